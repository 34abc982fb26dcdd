use jetcartan::forms::{calculus_residuals, max_residual};
use jetcartan::lie::{cartan_residuals, Eta};
use jetcartan::parse::parse_expression;
use jetcartan::sampling::Sampler;
use jetcartan::{Chart, Expr};
use proptest::prelude::*;
use std::collections::HashMap;

fn names() -> Vec<String> {
    vec!["x".into(), "y".into(), "z".into()]
}

/// Expression source texts over x, y, z and the parameter k, well defined on
/// the unit box.
fn source() -> impl Strategy<Value = String> {
    let leaf = prop_oneof![
        Just("x".to_string()),
        Just("y".to_string()),
        Just("z".to_string()),
        Just("k".to_string()),
        (-3.0f64..3.0).prop_map(|c| format!("{c:.3}")),
    ];
    leaf.prop_recursive(4, 24, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("({a})+({b})")),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("({a})-({b})")),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("({a})*({b})")),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("({a})/(2+({b})^2)")),
            inner.clone().prop_map(|a| format!("-({a})")),
            inner.clone().prop_map(|a| format!("sin({a})")),
            inner.clone().prop_map(|a| format!("exp(cos({a}))")),
            inner.clone().prop_map(|a| format!("sqrt(1+({a})^2)")),
            inner.prop_map(|a| format!("({a})^3")),
        ]
    })
}

fn lower(text: &str) -> Expr {
    let params = vec!["k".to_string()];
    let values = HashMap::from([("k".to_string(), 0.7)]);
    parse_expression(text, &names(), &params)
        .unwrap()
        .to_expr(&names(), &values)
        .unwrap()
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn printing_round_trips(text in source(), p in prop::array::uniform3(-1.0f64..1.0)) {
        let params = vec!["k".to_string()];
        let ast = parse_expression(&text, &names(), &params).unwrap();
        let again = parse_expression(&ast.to_string(), &names(), &params).unwrap();
        prop_assert_eq!(&ast, &again);
        let (a, b) = (lower(&text).eval(&p).unwrap(), lower(&ast.to_string()).eval(&p).unwrap());
        prop_assert!(close(a, b, 1e-12), "{} vs {}", a, b);
    }

    #[test]
    fn derivatives_match_finite_differences(text in source(), p in prop::array::uniform3(-0.8f64..0.8), v in 0usize..3) {
        let e = lower(&text);
        let h = 1e-5;
        let shifted = |s: f64| {
            let mut q = p;
            q[v] += s;
            e.eval(&q).unwrap()
        };
        let fd = (shifted(h) - shifted(-h)) / (2.0 * h);
        let exact = e.diff(v).eval(&p).unwrap();
        prop_assert!(close(exact, fd, 1e-5), "{} vs {}", exact, fd);
    }

    #[test]
    fn hessian_is_symmetric(text in source(), p in prop::array::uniform3(-1.0f64..1.0), a in 0usize..3, b in 0usize..3) {
        let e = lower(&text);
        let ab = e.diff2(a, b).eval(&p).unwrap();
        let ba = e.diff2(b, a).eval(&p).unwrap();
        let nested = e.diff(a).diff(b).eval(&p).unwrap();
        prop_assert!(close(ab, ba, 1e-10));
        prop_assert!(close(ab, nested, 1e-10));
    }

    #[test]
    fn compiled_tape_matches_tree_evaluation(text in source(), p in prop::array::uniform3(-1.0f64..1.0)) {
        let e = lower(&text);
        let tape = jetcartan::Tape::compile(&[e.clone(), e.diff(0)]);
        let v = tape.eval(&p).unwrap();
        prop_assert!(close(v[0], e.eval(&p).unwrap(), 1e-12));
        prop_assert!(close(v[1], e.diff(0).eval(&p).unwrap(), 1e-12));
    }

    #[test]
    fn exterior_calculus_laws(seed in any::<u64>()) {
        let mut s = Sampler::new(seed);
        for (name, r) in calculus_residuals(4, 2, &mut s).unwrap() {
            prop_assert!(r < 1e-10, "{}: {}", name, r);
        }
    }

    #[test]
    fn wedge_is_associative(seed in any::<u64>(), p in 0usize..3, q in 0usize..2) {
        let chart = Chart::euclidean("x", 5);
        let mut s = Sampler::new(seed);
        let (a, b, c) = (s.form(&chart, p), s.form(&chart, q), s.form(&chart, 1));
        let pts = vec![s.point(5), s.point(5)];
        let left = a.wedge(&b).wedge(&c);
        let right = a.wedge(&b.wedge(&c));
        prop_assert!(max_residual(&[(&left, &right)], &pts).unwrap() < 1e-10);
    }

    #[test]
    fn cartan_decomposition_for_any_seed(seed in any::<u64>(), lorentzian in any::<bool>()) {
        let eta = if lorentzian { Eta::lorentzian(4) } else { Eta::euclidean(4) };
        let mut s = Sampler::new(seed);
        for (name, r) in cartan_residuals(&eta, 2, &mut s).unwrap() {
            prop_assert!(r < 1e-10, "{}: {}", name, r);
        }
    }
}
