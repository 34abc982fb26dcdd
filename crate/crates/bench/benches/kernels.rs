use criterion::{criterion_group, criterion_main, Criterion};
use jetcartan::frame::{CanonicalForms, JetChart};
use jetcartan::lie::Eta;
use jetcartan::parse::parse_expression;
use jetcartan::sampling::Sampler;
use jetcartan::suite::{run_suite, Family, SuiteConfig};
use jetcartan::Tape;
use std::collections::HashMap;
use std::hint::black_box;

fn parsing(c: &mut Criterion) {
    let coords: Vec<String> = ["r", "theta", "phi", "t"].iter().map(|s| s.to_string()).collect();
    let params = vec!["M".to_string()];
    let values = HashMap::from([("M".to_string(), 1.0)]);
    c.bench_function("parse_and_lower_vielbein_entry", |b| {
        b.iter(|| {
            let ast = parse_expression(black_box("1/(r*sin(theta))*sqrt(1-2*M/r)"), &coords, &params).unwrap();
            ast.to_expr(&coords, &values).unwrap()
        })
    });
}

fn canonical_forms(c: &mut Criterion) {
    let eta = Eta::lorentzian(4);
    c.bench_function("build_canonical_forms_m4", |b| {
        b.iter(|| CanonicalForms::build(&JetChart::new(4), &eta).unwrap())
    });
    let jet = JetChart::new(4);
    let f = CanonicalForms::build(&jet, &eta).unwrap();
    let roots: Vec<_> = f
        .omega()
        .entries()
        .iter()
        .flat_map(|w| w.terms().values().cloned().collect::<Vec<_>>())
        .collect();
    let tape = Tape::compile(&roots);
    let mut s = Sampler::new(1);
    let p = s.jet_point(4, 0);
    c.bench_function("evaluate_connection_form_m4", |b| b.iter(|| tape.eval(black_box(&p)).unwrap()));
}

fn suites(c: &mut Criterion) {
    let mut group = c.benchmark_group("suite");
    group.sample_size(10);
    let cfg = SuiteConfig {
        families: vec![Family::Algebra],
        samples: 20,
        ..SuiteConfig::default()
    };
    group.bench_function("algebra_20_samples", |b| b.iter(|| run_suite(&cfg).unwrap()));
    group.finish();
}

criterion_group!(benches, parsing, canonical_forms, suites);
criterion_main!(benches);
