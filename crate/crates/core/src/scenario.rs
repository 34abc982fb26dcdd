//! Scenario files: a vielbein on a coordinate region, optionally with an
//! explicit connection, read from JSON.

use crate::chart::{determinant, Chart};
use crate::expr::{Expr, Tape};
use crate::forms::SectionMap;
use crate::frame::JetChart;
use crate::lie::Eta;
use crate::parse::parse_expression;
use crate::sampling::Sampler;
use crate::sections::{connection_section, Connection, FrameField};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashMap};
use std::path::Path;
use std::sync::Arc;

/// Schema version accepted by [`Scenario::from_json`].
pub const SCENARIO_VERSION: u32 = 1;

/// Smallest |det e| accepted on the sample region.
pub const MIN_DETERMINANT: f64 = 0.01;

#[derive(Debug, thiserror::Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("invalid scenario JSON at line {line}, column {column}: {message}")]
    Json {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("field '{field}': {message}")]
    Schema { field: String, message: String },
    #[error("field '{field}': cannot parse \"{text}\" at offset {offset}: {message}")]
    Expression {
        field: String,
        text: String,
        offset: usize,
        message: String,
    },
    #[error("vielbein is singular inside the region at {at}: {reason}")]
    Singular { at: String, reason: String },
}

fn schema(field: impl Into<String>, message: impl Into<String>) -> ScenarioError {
    ScenarioError::Schema {
        field: field.into(),
        message: message.into(),
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
enum ConnectionSpec {
    Named(String),
    Explicit(Vec<Vec<Vec<String>>>),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Expectation {
    Pass,
    Fail,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    jetcartan_scenario: u32,
    name: String,
    dim: usize,
    signature: Vec<i32>,
    coordinates: Vec<String>,
    #[serde(default)]
    params: BTreeMap<String, f64>,
    vielbein: Vec<Vec<String>>,
    region: BTreeMap<String, [f64; 2]>,
    #[serde(default)]
    connection: Option<ConnectionSpec>,
    #[serde(default)]
    expected: BTreeMap<String, Expectation>,
}

/// Where the connection of a scenario comes from.
#[derive(Clone, Debug)]
pub enum ScenarioConnection {
    LeviCivita,
    Explicit(Connection),
}

/// A validated scenario.
#[derive(Clone, Debug)]
pub struct Scenario {
    name: String,
    eta: Eta,
    base: Arc<Chart>,
    params: BTreeMap<String, f64>,
    field: FrameField,
    connection: ScenarioConnection,
    region: Vec<(f64, f64)>,
    expected: BTreeMap<String, Expectation>,
}

fn parse_field(
    field: &str,
    text: &str,
    coords: &[String],
    params: &BTreeMap<String, f64>,
) -> Result<Expr, ScenarioError> {
    let names: Vec<String> = params.keys().cloned().collect();
    let ast = parse_expression(text, coords, &names).map_err(|e| ScenarioError::Expression {
        field: field.to_string(),
        text: text.to_string(),
        offset: e.offset(),
        message: e.to_string(),
    })?;
    let values: HashMap<String, f64> = params.iter().map(|(k, v)| (k.clone(), *v)).collect();
    ast.to_expr(coords, &values).map_err(|message| schema(field, message))
}

impl Scenario {
    pub fn load(path: impl AsRef<Path>) -> Result<Scenario, ScenarioError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Scenario::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Scenario, ScenarioError> {
        let file: ScenarioFile = serde_json::from_str(text).map_err(|e| ScenarioError::Json {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        Scenario::from_file(file)
    }

    fn from_file(file: ScenarioFile) -> Result<Scenario, ScenarioError> {
        if file.jetcartan_scenario != SCENARIO_VERSION {
            return Err(schema(
                "jetcartan_scenario",
                format!("unsupported version {}, expected {SCENARIO_VERSION}", file.jetcartan_scenario),
            ));
        }
        let m = file.dim;
        if m < 2 {
            return Err(schema("dim", "dimension must be at least 2"));
        }
        if file.signature.len() != m {
            return Err(schema("signature", format!("expected {m} entries, found {}", file.signature.len())));
        }
        let eta = Eta::new(&file.signature).map_err(|e| schema("signature", e))?;
        if file.coordinates.len() != m {
            return Err(schema(
                "coordinates",
                format!("expected {m} names, found {}", file.coordinates.len()),
            ));
        }
        let base = Chart::new(file.name.clone(), file.coordinates.clone())
            .map_err(|e| schema("coordinates", e.to_string()))?;
        if let Some(p) = file.params.keys().find(|p| file.coordinates.contains(p)) {
            return Err(schema("params", format!("'{p}' is also a coordinate name")));
        }
        if let Some((p, v)) = file.params.iter().find(|(_, v)| !v.is_finite()) {
            return Err(schema("params", format!("'{p}' = {v} is not finite")));
        }
        let coords = &file.coordinates;
        if file.vielbein.len() != m || file.vielbein.iter().any(|r| r.len() != m) {
            return Err(schema("vielbein", format!("expected a {m}×{m} array of expressions")));
        }
        let mut frame = Vec::with_capacity(m);
        for (mu, row) in file.vielbein.iter().enumerate() {
            let mut r = Vec::with_capacity(m);
            for (k, text) in row.iter().enumerate() {
                r.push(parse_field(&format!("vielbein[{mu}][{k}]"), text, coords, &file.params)?);
            }
            frame.push(r);
        }
        let field = FrameField::new(&base, frame).map_err(|e| schema("vielbein", e))?;

        let mut region = Vec::with_capacity(m);
        for c in coords {
            let [lo, hi] = *file
                .region
                .get(c)
                .ok_or_else(|| schema("region", format!("missing interval for '{c}'")))?;
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(schema("region", format!("interval for '{c}' must satisfy lo < hi")));
            }
            region.push((lo, hi));
        }
        if let Some(extra) = file.region.keys().find(|k| !coords.contains(k)) {
            return Err(schema("region", format!("'{extra}' is not a coordinate")));
        }

        let connection = match file.connection {
            None => ScenarioConnection::LeviCivita,
            Some(ConnectionSpec::Named(n)) if n == "levi-civita" => ScenarioConnection::LeviCivita,
            Some(ConnectionSpec::Named(n)) => {
                return Err(schema("connection", format!("unknown connection '{n}'")));
            }
            Some(ConnectionSpec::Explicit(g)) => {
                if g.len() != m || g.iter().any(|a| a.len() != m || a.iter().any(|b| b.len() != m)) {
                    return Err(schema("connection", format!("expected a {m}×{m}×{m} array")));
                }
                let mut gamma = Vec::with_capacity(m);
                for (mu, a) in g.iter().enumerate() {
                    let mut plane = Vec::with_capacity(m);
                    for (nu, b) in a.iter().enumerate() {
                        let mut row = Vec::with_capacity(m);
                        for (s, text) in b.iter().enumerate() {
                            row.push(parse_field(&format!("connection[{mu}][{nu}][{s}]"), text, coords, &file.params)?);
                        }
                        plane.push(row);
                    }
                    gamma.push(plane);
                }
                ScenarioConnection::Explicit(gamma)
            }
        };
        for (k, _) in file.expected.iter() {
            if !KNOWN_EXPECTATIONS.contains(&k.as_str()) {
                return Err(schema("expected", format!("unknown check '{k}'")));
            }
        }
        let scenario = Scenario {
            name: file.name,
            eta,
            base,
            params: file.params,
            field,
            connection,
            region,
            expected: file.expected,
        };
        scenario.scan_singularities(5)?;
        Ok(scenario)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn m(&self) -> usize {
        self.field.m()
    }

    pub fn eta(&self) -> &Eta {
        &self.eta
    }

    pub fn base(&self) -> &Arc<Chart> {
        &self.base
    }

    pub fn params(&self) -> &BTreeMap<String, f64> {
        &self.params
    }

    pub fn field(&self) -> &FrameField {
        &self.field
    }

    pub fn region(&self) -> &[(f64, f64)] {
        &self.region
    }

    pub fn connection_kind(&self) -> &ScenarioConnection {
        &self.connection
    }

    /// Γ^μ_{νσ}: the explicit connection, or the Levi-Civita connection of the frame.
    pub fn connection(&self) -> Connection {
        match &self.connection {
            ScenarioConnection::LeviCivita => self.field.levi_civita(&self.eta),
            ScenarioConnection::Explicit(g) => g.clone(),
        }
    }

    /// Declared outcome for a residual family, if any.
    pub fn expectation(&self, check: &str) -> Option<Expectation> {
        self.expected.get(check).copied()
    }

    /// The section of `jet` determined by the frame and connection, with zero momenta.
    pub fn section(&self, jet: &JetChart) -> SectionMap {
        connection_section(jet, &self.field, &self.connection(), None)
    }

    /// Same scenario with a different frame field (used for unimodular rescaling).
    pub fn with_field(&self, field: FrameField) -> Scenario {
        Scenario {
            field,
            ..self.clone()
        }
    }

    /// Checks the vielbein on a grid with `n` points per axis, visiting points
    /// closest to the centre of the region first.
    pub fn scan_singularities(&self, n: usize) -> Result<(), ScenarioError> {
        let m = self.m();
        let tape = Tape::compile(&[determinant(self.field.frame())]);
        let n = n.max(2);
        let mut grid: Vec<Vec<f64>> = vec![vec![]];
        for &(lo, hi) in &self.region {
            let mut next = Vec::with_capacity(grid.len() * n);
            for p in &grid {
                for i in 0..n {
                    let mut q = p.clone();
                    q.push(lo + (hi - lo) * i as f64 / (n - 1) as f64);
                    next.push(q);
                }
            }
            grid = next;
        }
        let centre: Vec<f64> = self.region.iter().map(|(lo, hi)| 0.5 * (lo + hi)).collect();
        let dist = |p: &Vec<f64>| -> f64 {
            (0..m)
                .map(|i| {
                    let w = self.region[i].1 - self.region[i].0;
                    ((p[i] - centre[i]) / w).powi(2)
                })
                .sum()
        };
        grid.sort_by(|a, b| dist(a).total_cmp(&dist(b)));
        for p in &grid {
            self.check_point(&tape, p)?;
        }
        Ok(())
    }

    fn check_point(&self, det: &Tape, p: &[f64]) -> Result<f64, ScenarioError> {
        let at = self.base.describe(p);
        let singular = |reason: String| ScenarioError::Singular { at: at.clone(), reason };
        match det.eval(p) {
            Err(e) => Err(singular(e.to_string())),
            Ok(v) if !v[0].is_finite() => Err(singular("determinant is not finite".into())),
            Ok(v) if v[0].abs() < MIN_DETERMINANT => {
                Err(singular(format!("|det e| = {:.3e} < {MIN_DETERMINANT}", v[0].abs())))
            }
            Ok(v) => Ok(v[0]),
        }
    }

    /// Uniform sample points in the region at which the vielbein is regular.
    pub fn sample_points(&self, n: usize, sampler: &mut Sampler) -> Result<Vec<Vec<f64>>, ScenarioError> {
        let tape = Tape::compile(&[determinant(self.field.frame())]);
        let mut out = Vec::with_capacity(n);
        let mut rejected = 0usize;
        while out.len() < n {
            let p: Vec<f64> = self.region.iter().map(|&(lo, hi)| sampler.uniform(lo, hi)).collect();
            match self.check_point(&tape, &p) {
                Ok(_) => out.push(p),
                Err(e) => {
                    rejected += 1;
                    if rejected > 100 + 10 * n {
                        return Err(e);
                    }
                }
            }
        }
        Ok(out)
    }
}

/// Residual families a scenario may declare an expectation for.
pub const KNOWN_EXPECTATIONS: &[&str] = &[
    "metricity",
    "torsion",
    "momenta",
    "einstein",
    "einstein_form",
    "equiaffinity",
    "traceless_einstein",
    "momentum_trace_split",
];

#[cfg(test)]
mod tests {
    use super::*;

    fn schwarzschild_like(lo: f64, hi: f64) -> String {
        format!(
            r#"{{
  "jetcartan_scenario": 1, "name": "s", "dim": 2, "signature": [1, -1],
  "coordinates": ["r", "t"], "params": {{"M": 1.0}},
  "vielbein": [["sqrt(1-2*M/r)", "0"], ["0", "1/sqrt(1-2*M/r)"]],
  "region": {{"r": [{lo}, {hi}], "t": [0, 1]}}
}}"#
        )
    }

    #[test]
    fn loads_regular_region() {
        let s = Scenario::from_json(&schwarzschild_like(3.0, 10.0)).unwrap();
        assert_eq!(s.m(), 2);
        assert_eq!(s.params()["M"], 1.0);
        let pts = s.sample_points(10, &mut Sampler::new(1)).unwrap();
        assert!(pts.iter().all(|p| (3.0..=10.0).contains(&p[0])));
    }

    #[test]
    fn reports_pole_inside_region() {
        let err = Scenario::from_json(&schwarzschild_like(1.0, 3.0)).unwrap_err();
        let msg = err.to_string();
        assert!(matches!(err, ScenarioError::Singular { .. }), "{msg}");
        assert!(msg.contains("r=2"), "{msg}");
    }

    #[test]
    fn schema_errors_name_the_field() {
        let bad = schwarzschild_like(3.0, 10.0).replace("\"dim\": 2", "\"dim\": 3");
        let e = Scenario::from_json(&bad).unwrap_err().to_string();
        assert!(e.contains("signature"), "{e}");
        let bad = schwarzschild_like(3.0, 10.0).replace("\"name\": \"s\",", "");
        let e = Scenario::from_json(&bad).unwrap_err().to_string();
        assert!(e.contains("name"), "{e}");
        let bad = schwarzschild_like(3.0, 10.0).replace("sqrt(1-2*M/r)\", \"0\"", "sqrt(1-2*Q/r)\", \"0\"");
        let e = Scenario::from_json(&bad).unwrap_err();
        assert!(matches!(e, ScenarioError::Expression { .. }), "{e}");
        assert!(e.to_string().contains("vielbein[0][0]"), "{e}");
    }
}
