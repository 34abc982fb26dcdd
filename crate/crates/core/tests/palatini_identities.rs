use jetcartan::forms::{max_residual, merge_residuals, values_max_abs, DiffForm, SectionMap};
use jetcartan::frame::{CanonicalForms, JetChart};
use jetcartan::lie::Eta;
use jetcartan::palatini::*;
use jetcartan::sampling::Sampler;
use jetcartan::sections::*;
use jetcartan::{Chart, Expr};

fn section_max(forms: &[DiffForm], sec: &SectionMap, pts: &[Vec<f64>]) -> f64 {
    let refs: Vec<&DiffForm> = forms.iter().collect();
    let pull = sec.numeric(&refs);
    pts.iter()
        .flat_map(|x| pull.eval(x).unwrap())
        .map(|v| values_max_abs(&v))
        .fold(0.0, f64::max)
}

#[test]
fn lambda_properties_at_m3() {
    let m = 3;
    let jet = JetChart::with_momenta(m);
    let eta = Eta::lorentzian(m);
    let f = CanonicalForms::build(&jet, &eta).unwrap();
    let mut s = Sampler::new(3);
    let extra = jet.dim() - jet.jet_dim();
    let pts: Vec<Vec<f64>> = (0..8).map(|_| s.jet_point(m, extra)).collect();
    let l = palatini_lagrangian(&f);
    assert!(max_residual(&[(&l.d(), &palatini_differential(&f))], &pts).unwrap() < 1e-10);

    let th = canonical_momentum(&f).unwrap();
    let lam = canonical_lambda(&f, &th);
    let dlam = lam.d();
    let res = |form| max_residual(&[(&dlam, &dlambda_closed(&f, &th, form))], &pts).unwrap();
    assert!(res(DLambdaForm::Derived) < 1e-10);
    // The sign factor (−1)^{m−1} is +1 in odd dimension.
    assert!(res(DLambdaForm::Printed) < 1e-10);
    assert!(res(DLambdaForm::Ablated) > 1e-2);

    let zero: Vec<Vec<f64>> = pts
        .iter()
        .map(|p| {
            let mut q = p.clone();
            q[jet.jet_dim()..].iter_mut().for_each(|v| *v = 0.0);
            q
        })
        .collect();
    assert!(max_residual(&[(&lam, &l)], &zero).unwrap() < 1e-12);
    assert!(horizontality_defect(&lam, m, &pts, &mut s).unwrap() < 1e-10);
    let k = s.k_element(&eta);
    assert!(equivariance_residual(&f, &lam, &k, &pts[..4], &mut s).unwrap() < 1e-9);
    let g = s.group_element(m);
    assert!(equivariance_residual(&f, &lam, &g, &pts[..4], &mut s).unwrap() > 1e-3);
}

#[test]
fn printed_dlambda_signs_fail_in_even_dimension() {
    let m = 4;
    let jet = JetChart::with_momenta(m);
    let f = CanonicalForms::build(&jet, &Eta::lorentzian(m)).unwrap();
    let mut s = Sampler::new(4);
    let extra = jet.dim() - jet.jet_dim();
    let pts: Vec<Vec<f64>> = (0..3).map(|_| s.jet_point(m, extra)).collect();
    let th = canonical_momentum(&f).unwrap();
    let dlam = canonical_lambda(&f, &th).d();
    let printed = dlambda_closed(&f, &th, DLambdaForm::Printed);
    assert!(max_residual(&[(&dlam, &printed)], &pts).unwrap() > 1e-2);
}

#[test]
fn levi_civita_sections_of_random_frames() {
    let m = 4;
    let jet = JetChart::new(m);
    let eta = Eta::lorentzian(m);
    let f = CanonicalForms::build(&jet, &eta).unwrap();
    let base = Chart::euclidean("x", m);
    let mut s = Sampler::new(5);
    let e = einstein_forms(&f);
    let k = congruence_forms(&f);
    let combo = |c: f64| -> Vec<DiffForm> {
        let mut out = Vec::new();
        for i in 0..m {
            for j in i..m {
                out.push(DiffForm::lin_comb(&[(1.0, e.get(i, j)), (-c, &k[i][j])]));
            }
        }
        out
    };
    let fb = first_bianchi_forms(&f);
    for _ in 0..2 {
        let field = FrameField::random_polynomial(&base, &mut s, 0.15);
        let pts: Vec<Vec<f64>> = (0..4).map(|_| (0..m).map(|_| s.uniform(-0.5, 0.5)).collect()).collect();
        let sec = levi_civita_section(&jet, &field, &eta);
        assert!(section_max(&combo(-1.0), &sec, &pts) < 1e-10);
        assert!(section_max(&combo(0.5), &sec, &pts) > 1e-3);
        assert!(section_max(&fb, &sec, &pts) < 1e-10);

        let samples = SectionEvaluator::new(&f, &sec).unwrap().samples(&pts).unwrap();
        let oracle = RicciOracle::new(&field, &eta);
        assert!(oracle_discrepancy(&samples, &oracle, &pts).unwrap() < 1e-8);
        let all = merge_residuals(samples.into_iter().map(|s| s.residuals));
        for key in ["metricity", "torsion"] {
            let v = all.iter().find(|(n, _)| n == key).unwrap().1;
            assert!(v < 1e-10, "{key}: {v}");
        }
        let dens = lagrangian_density(&f, &sec, &pts).unwrap();
        let det = field.determinant();
        for (x, l) in pts.iter().zip(dens) {
            let expected = -det.eval(x).unwrap().signum() * oracle.scalar_density(x).unwrap();
            assert!((l - expected).abs() < 1e-9 * expected.abs().max(1.0), "{l} vs {expected}");
        }

        let gamma = random_connection(m, &mut s, false, 0.3);
        let generic = connection_section(&jet, &field, &gamma, None);
        assert!(section_max(&fb, &generic, &pts) > 1e-3);
        assert!(section_max(&combo(-1.0), &generic, &pts) > 1e-3);
    }
}

#[test]
fn nu_lemma_kernel_is_trivial() {
    let mut s = Sampler::new(1);
    for m in 3..=5 {
        let r = nu_lemma_rank(m, &mut s).unwrap();
        assert_eq!(r.kernel_dim, 0, "m={m}");
        assert!(r.proof_identity < 1e-10, "m={m}: {}", r.proof_identity);
    }
}

#[test]
fn de_sitter_is_an_einstein_space() {
    let base = Chart::new("ds", vec!["x".into(), "y".into(), "z".into(), "tau".into()]).unwrap();
    let a = Expr::var(3).scale(3.0 * (1.0f64 / 3.0).sqrt());
    let sp = a.pow(&Expr::constant(-1.0 / 3.0));
    let frame: Vec<Vec<Expr>> = (0..4)
        .map(|i| {
            (0..4)
                .map(|j| match (i == j, i) {
                    (false, _) => Expr::zero(),
                    (true, 3) => a.clone(),
                    _ => sp.clone(),
                })
                .collect()
        })
        .collect();
    let field = FrameField::new(&base, frame).unwrap();
    let eta = Eta::lorentzian(4);
    let jet = JetChart::over(base.coord_names(), true);
    let f = CanonicalForms::build(&jet, &eta).unwrap();
    let sec = levi_civita_section(&jet, &field, &eta);
    let pts = vec![vec![0.1, 0.2, -0.3, 0.7], vec![0.5, -0.2, 0.3, 1.6]];
    let samples = SectionEvaluator::new(&f, &sec).unwrap().samples(&pts).unwrap();
    for sample in &samples {
        for i in 0..4 {
            for j in 0..4 {
                let expected = if i != j { 0.0 } else if i == 3 { -1.0 } else { 1.0 };
                assert!((sample.ricci[(i, j)] - expected).abs() < 1e-12);
            }
        }
    }
    let all = merge_residuals(samples.into_iter().map(|s| s.residuals));
    let get = |k: &str| all.iter().find(|(n, _)| n == k).unwrap().1;
    assert!((get("einstein") - 1.0).abs() < 1e-12);
    assert!((get("einstein_form") - 2.0).abs() < 1e-12);
    assert!(get("traceless_einstein") < 1e-12);
    assert!(get("equiaffinity") < 1e-12);
}
