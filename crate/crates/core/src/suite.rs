//! Check orchestration: every residual family as named, seeded checks with
//! pinned tolerances, collected into a JSON report.
//!
//! A negative control (name ending in `.negative_control`) passes when its
//! residual exceeds the tolerance, which then acts as a lower threshold.

use crate::forms::{calculus_residuals, max_residual, DiffForm, Residuals};
use crate::frame::{CanonicalForms, Identity, JetChart};
use crate::lie::{cartan_residuals, Eta};
use crate::lifts::{
    bracket_residuals, contraction_residuals, difference_residuals, duality_residual, BasisFields,
    DifferenceTensor, DualBasis,
};
use crate::palatini::*;
use crate::sampling::Sampler;
use crate::scenario::{Expectation, Scenario};
use crate::sections::{connection_section, levi_civita_section, random_connection, FrameField};
use crate::transition::{transition_residuals, BaseTransition};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;
use std::time::Instant;

pub const NEGATIVE_SUFFIX: &str = ".negative_control";

/// Built-in scenarios used when none is given.
pub const BUILTIN_SCENARIOS: &[(&str, &str)] = &[
    ("minkowski", include_str!("../../../scenarios/minkowski.json")),
    ("schwarzschild", include_str!("../../../scenarios/schwarzschild.json")),
    ("desitter", include_str!("../../../scenarios/desitter.json")),
];

const POLAR_FIXTURE: &str = include_str!("../../../scenarios/polar.json");

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Algebra,
    Frame,
    Basis,
    Palatini,
    Unimodular,
}

impl Family {
    pub const ALL: [Family; 5] = [
        Family::Algebra,
        Family::Frame,
        Family::Basis,
        Family::Palatini,
        Family::Unimodular,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Family::Algebra => "algebra",
            Family::Frame => "frame",
            Family::Basis => "basis",
            Family::Palatini => "palatini",
            Family::Unimodular => "unimodular",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Family {
    type Err = String;
    fn from_str(s: &str) -> Result<Family, String> {
        Family::ALL
            .into_iter()
            .find(|f| f.as_str() == s)
            .ok_or_else(|| format!("unknown suite '{s}'"))
    }
}

/// Parses `algebra|frame|basis|palatini|unimodular|all`.
pub fn parse_suite(s: &str) -> Result<Vec<Family>, String> {
    if s == "all" {
        Ok(Family::ALL.to_vec())
    } else {
        Ok(vec![s.parse()?])
    }
}

#[derive(Clone, Debug)]
pub struct SuiteConfig {
    pub families: Vec<Family>,
    pub dim: usize,
    pub samples: usize,
    pub seed: u64,
    /// Overrides every pinned tolerance of ordinary checks when set.
    pub tol: Option<f64>,
    /// Scenarios for the palatini and unimodular families; the built-in
    /// fixtures are used when empty.
    pub scenarios: Vec<Scenario>,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        SuiteConfig {
            families: Family::ALL.to_vec(),
            dim: 4,
            samples: 50,
            seed: 42,
            tol: None,
            scenarios: Vec::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub family: Family,
    pub samples: usize,
    pub max_residual: f64,
    pub tolerance: f64,
    pub pass: bool,
    pub seconds: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl CheckResult {
    pub fn is_negative_control(&self) -> bool {
        self.name.ends_with(NEGATIVE_SUFFIX)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConfigEcho {
    pub suite: Vec<Family>,
    pub dim: usize,
    pub seed: u64,
    pub samples: usize,
    pub tol: Option<f64>,
    pub scenarios: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub version: String,
    pub config: ConfigEcho,
    pub checks: Vec<CheckResult>,
    pub pass: bool,
}

impl Report {
    pub fn check(&self, name: &str) -> Option<&CheckResult> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// The report with every `seconds` field zeroed, for reproducibility checks.
    pub fn without_timings(&self) -> Report {
        let mut r = self.clone();
        for c in &mut r.checks {
            c.seconds = 0.0;
        }
        r
    }
}

/// Collects results of one job, attributing elapsed time to each check.
struct Recorder {
    family: Family,
    tol: Option<f64>,
    last: Instant,
    out: Vec<CheckResult>,
}

impl Recorder {
    fn push(&mut self, name: String, samples: usize, residual: f64, tolerance: f64, negative: bool) {
        let now = Instant::now();
        let residual = if residual.is_nan() { f64::MAX } else { residual };
        let pass = if negative {
            residual > tolerance
        } else {
            residual <= tolerance
        };
        self.out.push(CheckResult {
            name,
            family: self.family,
            samples,
            max_residual: residual.min(f64::MAX),
            tolerance,
            pass,
            seconds: (now - self.last).as_secs_f64(),
            note: None,
        });
        self.last = now;
    }

    fn check(&mut self, name: impl Into<String>, samples: usize, residual: f64, tolerance: f64) {
        let t = self.tol.unwrap_or(tolerance);
        self.push(name.into(), samples, residual, t, false);
    }

    fn negative(&mut self, name: impl Into<String>, samples: usize, residual: f64, threshold: f64) {
        let name = format!("{}{NEGATIVE_SUFFIX}", name.into());
        self.push(name, samples, residual, threshold, true);
    }

    fn all(&mut self, prefix: &str, set: &Residuals, samples: usize, tolerance: f64) {
        for (n, v) in set {
            self.check(format!("{prefix}.{n}"), samples, *v, tolerance);
        }
    }

    fn note(&mut self, text: String) {
        if let Some(last) = self.out.last_mut() {
            last.note = Some(text);
        }
    }
}

type JobFn = Box<dyn Fn(&mut Recorder, &mut Sampler) -> Result<(), String> + Send + Sync>;

struct Job {
    name: String,
    family: Family,
    run: JobFn,
}

fn job(name: impl Into<String>, family: Family, run: impl Fn(&mut Recorder, &mut Sampler) -> Result<(), String> + Send + Sync + 'static) -> Job {
    Job {
        name: name.into(),
        family,
        run: Box::new(run),
    }
}

fn err<E: fmt::Display>(e: E) -> String {
    e.to_string()
}

fn jet_points(m: usize, extra: usize, n: usize, s: &mut Sampler) -> Vec<Vec<f64>> {
    (0..n).map(|_| s.jet_point(m, extra)).collect()
}

fn identity_check(rec: &mut Recorder, prefix: &str, id: &Identity, points: &[Vec<f64>], tol: f64) -> Result<(), String> {
    let r = id.residual(points).map_err(err)?;
    rec.check(format!("{prefix}.{}", id.name), points.len(), r, tol);
    Ok(())
}

/// Random frame fields e = I + 0.15·P on [−0.5, 0.5]^m with their sample points.
fn random_fields(m: usize, count: usize, per_field: usize, s: &mut Sampler) -> Vec<(FrameField, Vec<Vec<f64>>)> {
    let base = crate::chart::Chart::euclidean("x", m);
    (0..count)
        .map(|_| {
            let f = FrameField::random_polynomial(&base, s, 0.15);
            let pts = (0..per_field).map(|_| (0..m).map(|_| s.uniform(-0.5, 0.5)).collect()).collect();
            (f, pts)
        })
        .collect()
}

fn section_max(forms: &[DiffForm], section: &crate::forms::SectionMap, points: &[Vec<f64>]) -> Result<f64, String> {
    let refs: Vec<&DiffForm> = forms.iter().collect();
    let pull = section.numeric(&refs);
    let mut worst: f64 = 0.0;
    for x in points {
        for v in pull.eval(x).map_err(err)? {
            worst = worst.max(crate::forms::values_max_abs(&v));
        }
    }
    Ok(worst)
}

fn algebra_jobs(cfg: &SuiteConfig) -> Vec<Job> {
    let (m, n) = (cfg.dim, cfg.samples);
    vec![
        job("algebra.euclidean", Family::Algebra, move |rec, s| {
            let r = cartan_residuals(&Eta::euclidean(m), n, s).map_err(err)?;
            rec.all("algebra.euclidean", &r, n, 1e-10);
            Ok(())
        }),
        job("algebra.lorentzian", Family::Algebra, move |rec, s| {
            let r = cartan_residuals(&Eta::lorentzian(m), n, s).map_err(err)?;
            rec.all("algebra.lorentzian", &r, n, 1e-10);
            Ok(())
        }),
        job("algebra.calculus", Family::Algebra, move |rec, s| {
            let r = calculus_residuals(4, n, s).map_err(err)?;
            rec.all("algebra", &r, n, 1e-10);
            Ok(())
        }),
    ]
}

fn frame_jobs(cfg: &SuiteConfig) -> Vec<Job> {
    let (m, n) = (cfg.dim, cfg.samples);
    vec![
        job("frame.identities", Family::Frame, move |rec, s| {
            let jet = JetChart::new(m);
            let f = CanonicalForms::build(&jet, &Eta::lorentzian(m))?;
            let pts = jet_points(m, 0, n, s);
            for id in f.structure_identities() {
                identity_check(rec, "frame", &id, &pts, 1e-9)?;
            }
            identity_check(rec, "frame", &f.theta_wedge_identities(), &pts[..pts.len().min(10)], 1e-10)?;
            for id in [
                f.curvature_coordinate_identity(),
                f.torsion_coordinate_identity(),
                f.metricity_coordinate_identity(),
                f.metricity_projector_identity(),
            ] {
                identity_check(rec, "frame", &id, &pts, 1e-9)?;
            }
            Ok(())
        }),
        job("frame.first_bianchi", Family::Frame, move |rec, s| {
            let eta = Eta::lorentzian(m);
            let jet = JetChart::new(m);
            let f = CanonicalForms::build(&jet, &eta)?;
            let fb = first_bianchi_forms(&f);
            let per = 5;
            let count = n.div_ceil(per).max(1);
            let mut worst: f64 = 0.0;
            for (field, pts) in random_fields(m, count, per, s) {
                worst = worst.max(section_max(&fb, &levi_civita_section(&jet, &field, &eta), &pts)?);
            }
            rec.check("frame.first_bianchi", count * per, worst, 1e-9);
            let mut generic: f64 = 0.0;
            for (field, pts) in random_fields(m, 2, per, s) {
                let gamma = random_connection(m, s, false, 0.3);
                generic = generic.max(section_max(&fb, &connection_section(&jet, &field, &gamma, None), &pts)?);
            }
            rec.negative("frame.first_bianchi.generic", 2 * per, generic, 1e-3);
            Ok(())
        }),
        job("frame.transition", Family::Frame, move |rec, s| {
            let polar = Scenario::from_json(POLAR_FIXTURE).map_err(err)?;
            let t = BaseTransition::polar_to_cartesian();
            let r = transition_residuals(&t, polar.eta(), polar.region(), n, s)?;
            for (name, v) in &r {
                if name.ends_with("without_h") {
                    rec.negative(format!("frame.{name}"), n, *v, 1e-2);
                } else {
                    rec.check(format!("frame.{name}"), n, *v, 1e-8);
                }
            }
            Ok(())
        }),
    ]
}

fn basis_jobs(cfg: &SuiteConfig) -> Vec<Job> {
    let (m, n) = (cfg.dim, cfg.samples);
    vec![
        job("basis.duality", Family::Basis, move |rec, s| {
            let m = 3;
            let jet = JetChart::new(m);
            let f = CanonicalForms::build(&jet, &Eta::lorentzian(m))?;
            let xi = random_connection(m, s, true, 0.3);
            let basis = BasisFields::build(&jet, &xi)?;
            let c = DifferenceTensor::build(&f, &basis);
            let dual = DualBasis::build(&f, &c);
            let pts = jet_points(m, 0, n.min(10), s);
            let r = duality_residual(&dual, &basis, &pts, None).map_err(err)?;
            rec.check("basis.duality.m3", pts.len(), r, 1e-9);
            Ok(())
        }),
        job("basis.adapted", Family::Basis, move |rec, s| {
            let jet = JetChart::new(m);
            let f = CanonicalForms::build(&jet, &Eta::lorentzian(m))?;
            let xi = random_connection(m, s, true, 0.3);
            let basis = BasisFields::build(&jet, &xi)?;
            let c = DifferenceTensor::build(&f, &basis);
            let dual = DualBasis::build(&f, &c);
            let pts = jet_points(m, 0, n, s);
            let groups: Vec<_> = (0..2).map(|_| s.group_element(m)).collect();
            let r = contraction_residuals(&f, &basis, &c, &dual, &pts).map_err(err)?;
            rec.all("basis", &r, n, 1e-9);
            let r = difference_residuals(&basis, &c, &pts, &groups).map_err(err)?;
            rec.all("basis", &r, n, 1e-9);
            let r = bracket_residuals(&f, &basis, &[], &pts).map_err(err)?;
            rec.all("basis", &r, n, 1e-9);
            Ok(())
        }),
    ]
}

fn palatini_jobs(cfg: &SuiteConfig) -> Vec<Job> {
    let (m, n) = (cfg.dim, cfg.samples);
    let mut jobs = vec![
        job("palatini.lambda", Family::Palatini, move |rec, s| {
            let eta = Eta::lorentzian(m);
            let jet = JetChart::with_momenta(m);
            let f = CanonicalForms::build(&jet, &eta)?;
            let extra = jet.dim() - jet.jet_dim();
            let pts = jet_points(m, extra, n, s);
            let l = palatini_lagrangian(&f);
            let dl = l.d();
            let r = max_residual(&[(&dl, &palatini_differential(&f))], &pts).map_err(err)?;
            rec.check("palatini.dlagrangian_closed_form", n, r, 1e-8);
            let th = canonical_momentum(&f)?;
            let lam = canonical_lambda(&f, &th);
            let zero: Vec<Vec<f64>> = pts
                .iter()
                .map(|p| {
                    let mut q = p.clone();
                    q[jet.jet_dim()..].iter_mut().for_each(|v| *v = 0.0);
                    q
                })
                .collect();
            let r = max_residual(&[(&lam, &l)], &zero).map_err(err)?;
            rec.check("palatini.lambda_at_zero_momenta", n, r, 1e-12);
            let dlam = lam.d();
            let r = max_residual(&[(&dlam, &dlambda_closed(&f, &th, DLambdaForm::Derived))], &pts).map_err(err)?;
            rec.check("palatini.dlambda_closed_form", n, r, 1e-8);
            let r = max_residual(&[(&dlam, &dlambda_closed(&f, &th, DLambdaForm::Ablated))], &pts).map_err(err)?;
            rec.negative("palatini.dlambda_ablated", n, r, 1e-2);
            if m % 2 == 0 {
                let r = max_residual(&[(&dlam, &dlambda_closed(&f, &th, DLambdaForm::Printed))], &pts).map_err(err)?;
                rec.negative("palatini.dlambda_printed_signs", n, r, 1e-2);
            }
            let r = horizontality_defect(&lam, m, &pts, s).map_err(err)?;
            rec.check("palatini.lambda_horizontal", n, r, 1e-10);
            let few = &pts[..pts.len().min(10)];
            let mut k_res: f64 = 0.0;
            for _ in 0..5 {
                let g = s.k_element(&eta);
                k_res = k_res.max(equivariance_residual(&f, &lam, &g, few, s).map_err(err)?);
            }
            rec.check("palatini.lambda_equivariance_k", 5 * few.len(), k_res, 1e-9);
            let g = s.group_element(m);
            let r = equivariance_residual(&f, &lam, &g, few, s).map_err(err)?;
            rec.negative("palatini.lambda_equivariance_gl", few.len(), r, 1e-3);
            Ok(())
        }),
        job("palatini.nu_lemma", Family::Palatini, move |rec, s| {
            for mm in [m, m + 1] {
                if mm < 3 {
                    continue;
                }
                let r = nu_lemma_rank(mm, s)?;
                rec.check(format!("palatini.nu_lemma.m{mm}.kernel_dimension"), 1, r.kernel_dim as f64, 0.0);
                rec.check(format!("palatini.nu_lemma.m{mm}.proof_identity"), 1, r.proof_identity, 1e-10);
            }
            Ok(())
        }),
        job("palatini.congruence", Family::Palatini, move |rec, s| {
            if m < 3 {
                return Ok(());
            }
            let eta = Eta::lorentzian(m);
            let jet = JetChart::new(m);
            let f = CanonicalForms::build(&jet, &eta)?;
            let e = einstein_forms(&f);
            let k = congruence_forms(&f);
            let with = |c: f64| -> Vec<DiffForm> {
                let mut out = Vec::new();
                for i in 0..m {
                    for kk in i..m {
                        out.push(DiffForm::lin_comb(&[(1.0, e.get(i, kk)), (-c, &k[i][kk])]));
                    }
                }
                out
            };
            let corrected = with(-1.0);
            let printed = with(0.5);
            let per = 4;
            let count = n.min(20).div_ceil(per).max(1);
            let (mut good, mut bad): (f64, f64) = (0.0, 0.0);
            for (field, pts) in random_fields(m, count, per, s) {
                let sec = levi_civita_section(&jet, &field, &eta);
                good = good.max(section_max(&corrected, &sec, &pts)?);
                bad = bad.max(section_max(&printed, &sec, &pts)?);
            }
            rec.check("palatini.congruence", count * per, good, 1e-8);
            rec.negative("palatini.congruence_printed_coefficient", count * per, bad, 1e-3);
            let mut generic: f64 = 0.0;
            for (field, pts) in random_fields(m, 2, per, s) {
                let gamma = random_connection(m, s, false, 0.3);
                generic = generic.max(section_max(&corrected, &connection_section(&jet, &field, &gamma, None), &pts)?);
            }
            rec.negative("palatini.congruence_generic", 2 * per, generic, 1e-3);
            Ok(())
        }),
    ];
    for sc in scenarios(cfg) {
        let name = sc.name().to_string();
        jobs.push(job(format!("palatini.{name}"), Family::Palatini, move |rec, s| {
            scenario_checks(rec, s, &sc, n, false)
        }));
    }
    jobs
}

fn unimodular_jobs(cfg: &SuiteConfig) -> Vec<Job> {
    let n = cfg.samples;
    scenarios(cfg)
        .into_iter()
        .map(|sc| {
            let name = sc.name().to_string();
            job(format!("unimodular.{name}"), Family::Unimodular, move |rec, s| {
                scenario_checks(rec, s, &sc, n, true)
            })
        })
        .collect()
}

fn scenarios(cfg: &SuiteConfig) -> Vec<Scenario> {
    if !cfg.scenarios.is_empty() {
        return cfg.scenarios.clone();
    }
    BUILTIN_SCENARIOS
        .iter()
        .map(|(_, text)| Scenario::from_json(text).expect("built-in scenarios are valid"))
        .collect()
}

/// Tolerance and outcome for one residual of a scenario.
fn scenario_entry(rec: &mut Recorder, sc: &Scenario, prefix: &str, key: &str, samples: usize, value: f64, tol: f64) {
    let name = format!("{prefix}.{key}");
    match sc.expectation(key) {
        Some(Expectation::Fail) => rec.negative(name, samples, value, tol),
        _ => rec.check(name, samples, value, tol),
    }
}

fn scenario_checks(rec: &mut Recorder, s: &mut Sampler, sc: &Scenario, n: usize, unimodular: bool) -> Result<(), String> {
    let mut pts = sc.sample_points(n, s).map_err(err)?;
    let mut sc = sc.clone();
    let prefix = if unimodular {
        format!("unimodular.{}", sc.name())
    } else {
        format!("palatini.{}", sc.name())
    };
    let mut warning = None;
    if unimodular {
        match unimodular_frame(sc.field(), &pts, 1e-9).map_err(err)? {
            Some(field) => sc = sc.with_field(field),
            None => {
                warning = Some("det e is not constant on the region; frame used as given".to_string());
            }
        }
        pts = sc.sample_points(n, s).map_err(err)?;
    }
    let jet = JetChart::over(sc.base().coord_names(), true);
    let f = CanonicalForms::build(&jet, sc.eta())?;
    let section = sc.section(&jet);
    let ev = SectionEvaluator::new(&f, &section)?;
    let samples = ev.samples(&pts).map_err(err)?;
    let get = |name: &str| -> f64 {
        samples
            .iter()
            .map(|x| x.residuals.iter().find(|(k, _)| k == name).map_or(0.0, |e| e.1))
            .fold(0.0, f64::max)
    };
    let keys: &[&str] = if unimodular {
        &["equiaffinity", "torsion", "momentum_trace_split", "traceless_einstein", "trace_identity", "einstein"]
    } else {
        &["metricity", "torsion", "momenta", "einstein", "einstein_form"]
    };
    for key in keys {
        scenario_entry(rec, &sc, &prefix, key, pts.len(), get(key), 1e-6);
        if *key == "equiaffinity" {
            if let Some(w) = warning.take() {
                rec.note(w);
            }
        }
    }
    if !unimodular {
        // |E(X₁…X_m)| = 2|G| pointwise.
        let consistency = samples
            .iter()
            .map(|x| {
                let v = |k: &str| x.residuals.iter().find(|(n, _)| n == k).map_or(0.0, |e| e.1);
                (v("einstein_form") - 2.0 * v("einstein")).abs()
            })
            .fold(0.0, f64::max);
        rec.check(format!("{prefix}.einstein_form_consistency"), pts.len(), consistency, 1e-6);
        if let crate::scenario::ScenarioConnection::LeviCivita = sc.connection_kind() {
            let oracle = RicciOracle::new(sc.field(), sc.eta());
            let d = oracle_discrepancy(&samples, &oracle, &pts).map_err(err)?;
            rec.check(format!("{prefix}.ricci_oracle"), pts.len(), d, 1e-8);
            let jet0 = JetChart::over(sc.base().coord_names(), false);
            let f0 = CanonicalForms::build(&jet0, sc.eta())?;
            let dens = lagrangian_density(&f0, &sc.section(&jet0), &pts).map_err(err)?;
            let det = sc.field().determinant();
            let mut worst: f64 = 0.0;
            for (x, l) in pts.iter().zip(&dens) {
                let r = oracle.scalar_density(x).map_err(err)?;
                let sign = det.eval(x).map_err(err)?.signum();
                worst = worst.max((l + sign * r).abs() / r.abs().max(1.0));
            }
            rec.check(format!("{prefix}.lagrangian_density"), pts.len(), worst, 1e-6);
        }
    }
    Ok(())
}

fn jobs_for(cfg: &SuiteConfig) -> Vec<Job> {
    let mut jobs = Vec::new();
    for fam in &cfg.families {
        jobs.extend(match fam {
            Family::Algebra => algebra_jobs(cfg),
            Family::Frame => frame_jobs(cfg),
            Family::Basis => basis_jobs(cfg),
            Family::Palatini => palatini_jobs(cfg),
            Family::Unimodular => unimodular_jobs(cfg),
        });
    }
    jobs
}

/// Runs every check of the configured families. Checks are independent and
/// run in parallel; each draws from its own seeded stream, so the report is
/// reproducible except for timings.
pub fn run_suite(cfg: &SuiteConfig) -> Result<Report, String> {
    if cfg.dim < 2 {
        return Err("dimension must be at least 2".into());
    }
    if cfg.samples == 0 {
        return Err("at least one sample is required".into());
    }
    let jobs = jobs_for(cfg);
    let results: Vec<Vec<CheckResult>> = jobs
        .par_iter()
        .map(|j| {
            let mut sampler = Sampler::for_label(cfg.seed, &j.name);
            let mut rec = Recorder {
                family: j.family,
                tol: cfg.tol,
                last: Instant::now(),
                out: Vec::new(),
            };
            let run = std::panic::catch_unwind(std::panic::AssertUnwindSafe(|| (j.run)(&mut rec, &mut sampler)));
            let failure = match run {
                Ok(Ok(())) => None,
                Ok(Err(e)) => Some(e),
                Err(p) => Some(
                    p.downcast_ref::<String>()
                        .cloned()
                        .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                        .unwrap_or_else(|| "check panicked".into()),
                ),
            };
            if let Some(e) = failure {
                rec.push(format!("{}.error", j.name), 0, f64::MAX, 0.0, false);
                rec.note(e);
            }
            rec.out
        })
        .collect();
    let mut checks: Vec<CheckResult> = results.into_iter().flatten().collect();
    checks.sort_by(|a, b| a.name.cmp(&b.name));
    let pass = checks.iter().all(|c| c.pass);
    Ok(Report {
        version: env!("CARGO_PKG_VERSION").to_string(),
        config: ConfigEcho {
            suite: cfg.families.clone(),
            dim: cfg.dim,
            seed: cfg.seed,
            samples: cfg.samples,
            tol: cfg.tol,
            scenarios: scenarios_names(cfg),
        },
        checks,
        pass,
    })
}

fn scenarios_names(cfg: &SuiteConfig) -> Vec<String> {
    if cfg
        .families
        .iter()
        .any(|f| matches!(f, Family::Palatini | Family::Unimodular))
    {
        scenarios(cfg).iter().map(|s| s.name().to_string()).collect()
    } else {
        Vec::new()
    }
}
