//! Exterior algebra over a chart: forms, vector fields and maps between charts.

use crate::chart::{same_chart, Chart};
use crate::expr::{EvalError, Expr, Tape};
use rustc_hash::FxHashMap;
use smallvec::SmallVec;
use std::collections::BTreeMap;
use std::sync::Arc;

/// Strictly increasing multi-index of coordinate differentials.
pub type Idx = SmallVec<[u16; 6]>;

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum FormError {
    #[error("chart mismatch: '{0}' vs '{1}'")]
    ChartMismatch(String, String),
    #[error("degree mismatch: {0} vs {1}")]
    DegreeMismatch(usize, usize),
    #[error("section component {0} is not the identity on the base coordinate")]
    NotASection(usize),
    #[error("{0}")]
    Eval(#[from] EvalError),
}

fn check_chart(a: &Arc<Chart>, b: &Arc<Chart>) -> Result<(), FormError> {
    if same_chart(a, b) {
        Ok(())
    } else {
        Err(FormError::ChartMismatch(a.name().into(), b.name().into()))
    }
}

/// Merges two sorted index lists; `None` if they share an index, otherwise
/// the merged list and the sign of the shuffle permutation.
pub fn merge_indices(a: &[u16], b: &[u16]) -> Option<(Idx, f64)> {
    let mut out = Idx::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    let mut inversions = 0usize;
    while i < a.len() && j < b.len() {
        if a[i] < b[j] {
            out.push(a[i]);
            i += 1;
        } else if a[i] > b[j] {
            inversions += a.len() - i;
            out.push(b[j]);
            j += 1;
        } else {
            return None;
        }
    }
    out.extend_from_slice(&a[i..]);
    out.extend_from_slice(&b[j..]);
    Some((out, if inversions % 2 == 0 { 1.0 } else { -1.0 }))
}

/// A differential form stored as a sparse map from multi-index to coefficient.
#[derive(Clone, Debug)]
pub struct DiffForm {
    chart: Arc<Chart>,
    degree: usize,
    terms: BTreeMap<Idx, Expr>,
}

/// Accumulates contributions to a form and sums each coefficient once.
pub struct FormAcc {
    chart: Arc<Chart>,
    degree: usize,
    terms: BTreeMap<Idx, Vec<Expr>>,
}

impl FormAcc {
    pub fn new(chart: &Arc<Chart>, degree: usize) -> FormAcc {
        FormAcc {
            chart: chart.clone(),
            degree,
            terms: BTreeMap::new(),
        }
    }

    pub fn push(&mut self, idx: Idx, c: Expr) {
        if !c.is_zero() {
            self.terms.entry(idx).or_default().push(c);
        }
    }

    /// Adds `factor * a`.
    pub fn add_scaled(&mut self, a: &DiffForm, factor: &Expr) {
        assert!(same_chart(&self.chart, &a.chart), "chart mismatch in form sum");
        if a.terms.is_empty() || factor.is_zero() {
            return;
        }
        assert_eq!(self.degree, a.degree, "degree mismatch in form sum");
        for (k, c) in &a.terms {
            self.push(k.clone(), c.mul(factor));
        }
    }

    pub fn add(&mut self, a: &DiffForm) {
        self.add_scaled(a, &Expr::one());
    }

    pub fn add_const(&mut self, a: &DiffForm, c: f64) {
        self.add_scaled(a, &Expr::constant(c));
    }

    /// Adds `c * (a ∧ b)`.
    pub fn add_wedge(&mut self, a: &DiffForm, b: &DiffForm, c: f64) {
        assert!(same_chart(&a.chart, &b.chart), "chart mismatch in wedge");
        if c == 0.0 {
            return;
        }
        assert_eq!(self.degree, a.degree + b.degree, "degree mismatch in wedge sum");
        for (ka, ca) in &a.terms {
            for (kb, cb) in &b.terms {
                if let Some((k, s)) = merge_indices(ka, kb) {
                    self.push(k, ca.mul(cb).scale(s * c));
                }
            }
        }
    }

    pub fn finish(self) -> DiffForm {
        let terms = self
            .terms
            .into_iter()
            .filter_map(|(k, v)| {
                let s = Expr::sum(v);
                (!s.is_zero()).then_some((k, s))
            })
            .collect();
        DiffForm {
            chart: self.chart,
            degree: self.degree,
            terms,
        }
    }
}

impl DiffForm {
    pub fn zero(chart: &Arc<Chart>, degree: usize) -> DiffForm {
        DiffForm {
            chart: chart.clone(),
            degree,
            terms: BTreeMap::new(),
        }
    }

    pub fn scalar(chart: &Arc<Chart>, f: Expr) -> DiffForm {
        let mut terms = BTreeMap::new();
        if !f.is_zero() {
            terms.insert(Idx::new(), f);
        }
        DiffForm {
            chart: chart.clone(),
            degree: 0,
            terms,
        }
    }

    /// The coordinate differential dx^i.
    pub fn dx(chart: &Arc<Chart>, i: usize) -> DiffForm {
        let mut terms = BTreeMap::new();
        terms.insert(Idx::from_slice(&[i as u16]), Expr::one());
        DiffForm {
            chart: chart.clone(),
            degree: 1,
            terms,
        }
    }

    /// Builds a form from unsorted index lists, applying permutation signs.
    pub fn from_terms<I>(chart: &Arc<Chart>, degree: usize, terms: I) -> DiffForm
    where
        I: IntoIterator<Item = (Vec<usize>, Expr)>,
    {
        let mut acc = FormAcc::new(chart, degree);
        for (idx, c) in terms {
            assert_eq!(idx.len(), degree, "index length must equal the degree");
            let mut sorted: Vec<usize> = idx.clone();
            let mut sign = 1.0;
            for i in 0..sorted.len() {
                for j in 0..sorted.len() - 1 - i {
                    if sorted[j] > sorted[j + 1] {
                        sorted.swap(j, j + 1);
                        sign = -sign;
                    }
                }
            }
            if sorted.windows(2).any(|w| w[0] == w[1]) {
                continue;
            }
            acc.push(sorted.iter().map(|&i| i as u16).collect(), c.scale(sign));
        }
        acc.finish()
    }

    pub fn chart(&self) -> &Arc<Chart> {
        &self.chart
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn terms(&self) -> &BTreeMap<Idx, Expr> {
        &self.terms
    }

    pub fn is_structurally_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn coeff(&self, idx: &[u16]) -> Expr {
        self.terms.get(idx).cloned().unwrap_or_else(Expr::zero)
    }

    /// The coefficient of the 0-form part.
    pub fn as_scalar(&self) -> Expr {
        assert_eq!(self.degree, 0);
        self.coeff(&[])
    }

    pub fn try_add(&self, other: &DiffForm) -> Result<DiffForm, FormError> {
        check_chart(&self.chart, &other.chart)?;
        if self.degree != other.degree && !self.terms.is_empty() && !other.terms.is_empty() {
            return Err(FormError::DegreeMismatch(self.degree, other.degree));
        }
        Ok(DiffForm::lin_comb(&[(1.0, self), (1.0, other)]))
    }

    /// Σ c_k a_k with a single n-ary sum per coefficient.
    pub fn lin_comb(parts: &[(f64, &DiffForm)]) -> DiffForm {
        let first = parts.first().expect("non-empty combination").1;
        let mut acc = FormAcc::new(&first.chart, first.degree);
        for (c, f) in parts {
            acc.add_const(f, *c);
        }
        acc.finish()
    }

    pub fn add(&self, other: &DiffForm) -> DiffForm {
        self.try_add(other).expect("form addition")
    }

    pub fn sub(&self, other: &DiffForm) -> DiffForm {
        DiffForm::lin_comb(&[(1.0, self), (-1.0, other)])
    }

    pub fn scale(&self, c: f64) -> DiffForm {
        self.mul_expr(&Expr::constant(c))
    }

    pub fn neg(&self) -> DiffForm {
        self.scale(-1.0)
    }

    pub fn mul_expr(&self, f: &Expr) -> DiffForm {
        let mut acc = FormAcc::new(&self.chart, self.degree);
        acc.add_scaled(self, f);
        acc.finish()
    }

    pub fn try_wedge(&self, other: &DiffForm) -> Result<DiffForm, FormError> {
        check_chart(&self.chart, &other.chart)?;
        let mut acc = FormAcc::new(&self.chart, self.degree + other.degree);
        acc.add_wedge(self, other, 1.0);
        Ok(acc.finish())
    }

    pub fn wedge(&self, other: &DiffForm) -> DiffForm {
        self.try_wedge(other).expect("wedge")
    }

    /// Exterior derivative.
    pub fn d(&self) -> DiffForm {
        let mut acc = FormAcc::new(&self.chart, self.degree + 1);
        for (k, c) in &self.terms {
            for &v in c.support() {
                let single = [v as u16];
                if let Some((idx, s)) = merge_indices(&single, k) {
                    acc.push(idx, c.diff(v as usize).scale(s));
                }
            }
        }
        acc.finish()
    }

    pub fn try_interior(&self, x: &VectorField) -> Result<DiffForm, FormError> {
        check_chart(&self.chart, &x.chart)?;
        if self.degree == 0 {
            return Ok(DiffForm::zero(&self.chart, 0));
        }
        let mut acc = FormAcc::new(&self.chart, self.degree - 1);
        for (k, c) in &self.terms {
            for p in 0..k.len() {
                let comp = &x.comps[k[p] as usize];
                if comp.is_zero() {
                    continue;
                }
                let mut rest = k.clone();
                rest.remove(p);
                let sign = if p % 2 == 0 { 1.0 } else { -1.0 };
                acc.push(rest, c.mul(comp).scale(sign));
            }
        }
        Ok(acc.finish())
    }

    /// Interior product X⌟a.
    pub fn interior(&self, x: &VectorField) -> DiffForm {
        self.try_interior(x).expect("interior product")
    }

    /// Reinterprets the form on a chart whose leading coordinates coincide
    /// with this chart's coordinates.
    pub fn extend_to(&self, chart: &Arc<Chart>) -> DiffForm {
        assert!(chart.dim() >= self.chart.dim());
        assert_eq!(&chart.coord_names()[..self.chart.dim()], self.chart.coord_names());
        DiffForm {
            chart: chart.clone(),
            degree: self.degree,
            terms: self.terms.clone(),
        }
    }

    /// Pulls the form back along `phi`, symbolically.
    pub fn pullback(&self, phi: &ChartMap) -> Result<DiffForm, FormError> {
        check_chart(&self.chart, &phi.target)?;
        let mut memo = FxHashMap::default();
        let mut dphi: FxHashMap<u16, DiffForm> = FxHashMap::default();
        let mut acc = FormAcc::new(&phi.source, self.degree);
        for (k, c) in &self.terms {
            let c = c.substitute(&phi.comps, &mut memo);
            let mut form = DiffForm::scalar(&phi.source, c);
            for &a in k.iter() {
                let da = dphi
                    .entry(a)
                    .or_insert_with(|| phi.differential(a as usize))
                    .clone();
                form = form.wedge(&da);
                if form.terms.is_empty() {
                    break;
                }
            }
            acc.add(&form);
        }
        Ok(acc.finish())
    }

    /// Evaluates the form on tangent vectors given by numeric components.
    pub fn eval_on(values: &[(Idx, f64)], vectors: &[Vec<f64>]) -> f64 {
        values
            .iter()
            .map(|(k, c)| {
                let m: Vec<Vec<f64>> = k
                    .iter()
                    .map(|&a| vectors.iter().map(|v| v[a as usize]).collect())
                    .collect();
                c * small_det(&m)
            })
            .sum()
    }
}

/// Determinant of a small dense matrix by Gaussian elimination.
pub fn small_det(m: &[Vec<f64>]) -> f64 {
    let n = m.len();
    if n == 0 {
        return 1.0;
    }
    if n == 1 {
        return m[0][0];
    }
    if n == 2 {
        return m[0][0] * m[1][1] - m[0][1] * m[1][0];
    }
    let mut a: Vec<Vec<f64>> = m.to_vec();
    let mut det = 1.0;
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        if a[piv][col] == 0.0 {
            return 0.0;
        }
        if piv != col {
            a.swap(piv, col);
            det = -det;
        }
        det *= a[col][col];
        for r in col + 1..n {
            let f = a[r][col] / a[col][col];
            for c in col..n {
                a[r][c] -= f * a[col][c];
            }
        }
    }
    det
}

/// A vector field given by its coordinate components.
#[derive(Clone, Debug)]
pub struct VectorField {
    chart: Arc<Chart>,
    comps: Vec<Expr>,
}

impl VectorField {
    pub fn new(chart: &Arc<Chart>, comps: Vec<Expr>) -> VectorField {
        assert_eq!(comps.len(), chart.dim(), "vector field component count");
        VectorField {
            chart: chart.clone(),
            comps,
        }
    }

    pub fn zero(chart: &Arc<Chart>) -> VectorField {
        VectorField::new(chart, vec![Expr::zero(); chart.dim()])
    }

    /// The coordinate vector field ∂_i.
    pub fn coordinate(chart: &Arc<Chart>, i: usize) -> VectorField {
        let mut v = VectorField::zero(chart);
        v.comps[i] = Expr::one();
        v
    }

    pub fn chart(&self) -> &Arc<Chart> {
        &self.chart
    }

    pub fn comps(&self) -> &[Expr] {
        &self.comps
    }

    pub fn comp(&self, i: usize) -> &Expr {
        &self.comps[i]
    }

    pub fn set(&mut self, i: usize, e: Expr) {
        self.comps[i] = e;
    }

    /// Directional derivative X(f).
    pub fn apply(&self, f: &Expr) -> Expr {
        Expr::sum(
            f.support()
                .iter()
                .filter(|&&v| !self.comps[v as usize].is_zero())
                .map(|&v| self.comps[v as usize].mul(&f.diff(v as usize))),
        )
    }

    pub fn try_bracket(&self, other: &VectorField) -> Result<VectorField, FormError> {
        check_chart(&self.chart, &other.chart)?;
        let comps = (0..self.chart.dim())
            .map(|mu| self.apply(&other.comps[mu]).sub(&other.apply(&self.comps[mu])))
            .collect();
        Ok(VectorField::new(&self.chart, comps))
    }

    /// Lie bracket [X, Y].
    pub fn bracket(&self, other: &VectorField) -> VectorField {
        self.try_bracket(other).expect("lie bracket")
    }

    pub fn add(&self, other: &VectorField) -> VectorField {
        assert!(same_chart(&self.chart, &other.chart));
        VectorField::new(
            &self.chart,
            self.comps.iter().zip(&other.comps).map(|(a, b)| a.add(b)).collect(),
        )
    }

    pub fn sub(&self, other: &VectorField) -> VectorField {
        self.add(&other.scale(-1.0))
    }

    pub fn scale(&self, c: f64) -> VectorField {
        self.mul_expr(&Expr::constant(c))
    }

    pub fn mul_expr(&self, f: &Expr) -> VectorField {
        VectorField::new(&self.chart, self.comps.iter().map(|a| a.mul(f)).collect())
    }

    /// Σ f_k X_k with one n-ary sum per component.
    pub fn combination(chart: &Arc<Chart>, parts: &[(Expr, &VectorField)]) -> VectorField {
        let comps = (0..chart.dim())
            .map(|mu| {
                Expr::sum(
                    parts
                        .iter()
                        .filter(|(_, x)| !x.comps[mu].is_zero())
                        .map(|(f, x)| f.mul(&x.comps[mu])),
                )
            })
            .collect();
        VectorField::new(chart, comps)
    }

    /// Reinterprets the field on a chart extending this one; new components vanish.
    pub fn extend_to(&self, chart: &Arc<Chart>) -> VectorField {
        assert!(chart.dim() >= self.chart.dim());
        assert_eq!(&chart.coord_names()[..self.chart.dim()], self.chart.coord_names());
        let mut comps = self.comps.clone();
        comps.resize(chart.dim(), Expr::zero());
        VectorField::new(chart, comps)
    }
}

/// A smooth map between charts given by one expression per target coordinate.
#[derive(Clone, Debug)]
pub struct ChartMap {
    source: Arc<Chart>,
    target: Arc<Chart>,
    comps: Vec<Expr>,
}

/// A section over the leading (base) coordinates of the target chart.
pub type SectionMap = ChartMap;

impl ChartMap {
    pub fn new(source: &Arc<Chart>, target: &Arc<Chart>, comps: Vec<Expr>) -> ChartMap {
        assert_eq!(comps.len(), target.dim(), "one component per target coordinate");
        ChartMap {
            source: source.clone(),
            target: target.clone(),
            comps,
        }
    }

    /// A section: the first `source.dim()` target coordinates are the base
    /// coordinates themselves.
    pub fn section(
        source: &Arc<Chart>,
        target: &Arc<Chart>,
        comps: Vec<Expr>,
    ) -> Result<ChartMap, FormError> {
        for (i, c) in comps.iter().take(source.dim()).enumerate() {
            let ok = c.support() == [i as u32] && c.diff(i).as_const() == Some(1.0) && {
                let mut p = vec![0.0; source.dim()];
                p[i] = 0.37;
                c.eval(&p).map(|v| (v - 0.37).abs() < 1e-14).unwrap_or(false)
            };
            if !ok {
                return Err(FormError::NotASection(i));
            }
        }
        Ok(ChartMap::new(source, target, comps))
    }

    pub fn source(&self) -> &Arc<Chart> {
        &self.source
    }

    pub fn target(&self) -> &Arc<Chart> {
        &self.target
    }

    pub fn comps(&self) -> &[Expr] {
        &self.comps
    }

    /// dφ^a as a 1-form on the source chart.
    pub fn differential(&self, a: usize) -> DiffForm {
        DiffForm::scalar(&self.source, self.comps[a].clone()).d()
    }

    /// Compiles the map for numeric pullbacks of the given target forms.
    pub fn numeric(&self, forms: &[&DiffForm]) -> NumericPullback {
        let n = self.source.dim();
        let mut roots = self.comps.clone();
        for c in &self.comps {
            for rho in 0..n {
                roots.push(c.diff(rho));
            }
        }
        NumericPullback {
            map_tape: Tape::compile(&roots),
            forms: CompiledForms::new(forms),
            source_dim: n,
            target_dim: self.target.dim(),
        }
    }
}

/// Numeric values of a form: (multi-index, coefficient) pairs in key order.
pub type FormValues = Vec<(Idx, f64)>;

/// Forms compiled into one tape for repeated numeric evaluation.
pub struct CompiledForms {
    tape: Tape,
    layout: Vec<Vec<Idx>>,
}

impl CompiledForms {
    pub fn new(forms: &[&DiffForm]) -> CompiledForms {
        let mut roots = Vec::new();
        let mut layout = Vec::with_capacity(forms.len());
        for f in forms {
            let mut keys = Vec::with_capacity(f.terms.len());
            for (k, c) in &f.terms {
                keys.push(k.clone());
                roots.push(c.clone());
            }
            layout.push(keys);
        }
        CompiledForms {
            tape: Tape::compile(&roots),
            layout,
        }
    }

    pub fn tape_len(&self) -> usize {
        self.tape.len()
    }

    pub fn eval(&self, point: &[f64]) -> Result<Vec<FormValues>, EvalError> {
        let flat = self.tape.eval(point)?;
        let mut it = flat.into_iter();
        Ok(self
            .layout
            .iter()
            .map(|keys| keys.iter().map(|k| (k.clone(), it.next().unwrap())).collect())
            .collect())
    }
}

/// Maximum coefficientwise difference between two evaluated forms.
pub fn values_residual(a: &FormValues, b: &FormValues) -> f64 {
    let (mut i, mut j) = (0, 0);
    let mut worst: f64 = 0.0;
    while i < a.len() || j < b.len() {
        let ord = match (a.get(i), b.get(j)) {
            (Some(x), Some(y)) => x.0.cmp(&y.0),
            (Some(_), None) => std::cmp::Ordering::Less,
            (None, _) => std::cmp::Ordering::Greater,
        };
        let d = match ord {
            std::cmp::Ordering::Less => {
                i += 1;
                a[i - 1].1
            }
            std::cmp::Ordering::Greater => {
                j += 1;
                b[j - 1].1
            }
            std::cmp::Ordering::Equal => {
                i += 1;
                j += 1;
                a[i - 1].1 - b[j - 1].1
            }
        };
        worst = worst.max(d.abs());
    }
    worst
}

/// Named maximum residuals, in insertion order.
pub type Residuals = Vec<(String, f64)>;

/// Raises the entry `name` to at least `v` (NaN propagates as a failure).
pub fn bump(out: &mut Residuals, name: &str, v: f64) {
    let v = if v.is_nan() { f64::INFINITY } else { v };
    if let Some(e) = out.iter_mut().find(|(n, _)| n == name) {
        e.1 = e.1.max(v);
    } else {
        out.push((name.to_string(), v));
    }
}

/// Merges per-point residual sets by maximum.
pub fn merge_residuals<I: IntoIterator<Item = Residuals>>(parts: I) -> Residuals {
    let mut out = Residuals::new();
    for r in parts {
        for (n, v) in r {
            bump(&mut out, &n, v);
        }
    }
    out
}

/// X⌟α on numeric coefficients, with X given by its components.
pub fn interior_values(vals: &FormValues, x: &[f64]) -> FormValues {
    let mut out: BTreeMap<Idx, f64> = BTreeMap::new();
    for (k, c) in vals {
        for p in 0..k.len() {
            let xv = x[k[p] as usize];
            if xv == 0.0 {
                continue;
            }
            let mut rest = k.clone();
            rest.remove(p);
            let sign = if p % 2 == 0 { 1.0 } else { -1.0 };
            *out.entry(rest).or_insert(0.0) += sign * c * xv;
        }
    }
    out.into_iter().collect()
}

/// Linear combination of evaluated forms of equal degree.
pub fn combine_values(parts: &[(f64, &FormValues)]) -> FormValues {
    let mut out: BTreeMap<Idx, f64> = BTreeMap::new();
    for (c, vals) in parts {
        for (k, v) in vals.iter() {
            *out.entry(k.clone()).or_insert(0.0) += c * v;
        }
    }
    out.into_iter().collect()
}

/// Value of an evaluated 0-form (possibly with no stored coefficient).
pub fn scalar_value(vals: &FormValues) -> f64 {
    vals.iter().filter(|(k, _)| k.is_empty()).map(|(_, v)| v).sum()
}

pub fn values_max_abs(a: &FormValues) -> f64 {
    a.iter().fold(0.0, |m, (_, v)| m.max(v.abs()))
}

/// Max residual of `lhs[k] - rhs[k]` over all pairs and points.
pub fn max_residual(
    pairs: &[(&DiffForm, &DiffForm)],
    points: &[Vec<f64>],
) -> Result<f64, EvalError> {
    let forms: Vec<&DiffForm> = pairs.iter().flat_map(|(a, b)| [*a, *b]).collect();
    let compiled = CompiledForms::new(&forms);
    let mut worst: f64 = 0.0;
    for p in points {
        let vals = compiled.eval(p)?;
        for pair in vals.chunks(2) {
            worst = worst.max(values_residual(&pair[0], &pair[1]));
        }
    }
    Ok(worst)
}

/// Max absolute coefficient over forms and points.
pub fn max_abs(forms: &[&DiffForm], points: &[Vec<f64>]) -> Result<f64, EvalError> {
    let compiled = CompiledForms::new(forms);
    let mut worst: f64 = 0.0;
    for p in points {
        for v in compiled.eval(p)? {
            worst = worst.max(values_max_abs(&v));
        }
    }
    Ok(worst)
}

/// d² = 0, the graded Leibniz rule and graded commutativity on random forms
/// over R^n, one random point per sample.
pub fn calculus_residuals(n: usize, samples: usize, sampler: &mut crate::sampling::Sampler) -> Result<Residuals, EvalError> {
    let chart = Chart::euclidean("y", n);
    let mut out = Residuals::new();
    for s in 0..samples {
        let p = s % 3;
        let q = (s / 3) % 3;
        let a = sampler.form(&chart, p);
        let b = sampler.form(&chart, q);
        let pt = vec![sampler.point(n)];
        let dd = a.d().d();
        bump(&mut out, "forms.d_squared", max_abs(&[&dd], &pt)?);
        let lhs = a.wedge(&b).d();
        let sign = if p % 2 == 0 { 1.0 } else { -1.0 };
        let rhs = DiffForm::lin_comb(&[(1.0, &a.d().wedge(&b)), (sign, &a.wedge(&b.d()))]);
        bump(&mut out, "forms.leibniz", max_residual(&[(&lhs, &rhs)], &pt)?);
        let ab = a.wedge(&b);
        let ba = b.wedge(&a).scale(if (p * q) % 2 == 0 { 1.0 } else { -1.0 });
        bump(&mut out, "forms.graded_commutativity", max_residual(&[(&ab, &ba)], &pt)?);
    }
    Ok(out)
}

/// A chart map compiled for pointwise numeric pullback of fixed forms.
pub struct NumericPullback {
    map_tape: Tape,
    forms: CompiledForms,
    source_dim: usize,
    target_dim: usize,
}

impl NumericPullback {
    /// Image point and Jacobian ∂φ^a/∂x^ρ at `x`.
    pub fn map_at(&self, x: &[f64]) -> Result<(Vec<f64>, Vec<Vec<f64>>), EvalError> {
        let vals = self.map_tape.eval(x)?;
        let (y, jac) = vals.split_at(self.target_dim);
        let jac = jac.chunks(self.source_dim).map(|r| r.to_vec()).collect();
        Ok((y.to_vec(), jac))
    }

    /// Pulled-back coefficients of every compiled form at `x`.
    pub fn eval(&self, x: &[f64]) -> Result<Vec<FormValues>, EvalError> {
        let (y, jac) = self.map_at(x)?;
        let target_vals = self.forms.eval(&y)?;
        Ok(target_vals
            .iter()
            .map(|vals| pull_values(vals, &jac, self.source_dim))
            .collect())
    }
}

/// All increasing k-element multi-indices over n coordinates.
pub fn subsets_of(n: usize, k: usize) -> Vec<Idx> {
    subsets(n, k)
}

fn subsets(n: usize, k: usize) -> Vec<Idx> {
    let mut out = Vec::new();
    let mut cur = Idx::new();
    fn rec(start: usize, n: usize, k: usize, cur: &mut Idx, out: &mut Vec<Idx>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i as u16);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    rec(0, n, k, &mut cur, &mut out);
    out
}

/// Pulls numeric coefficients back through a Jacobian.
pub fn pull_values(vals: &FormValues, jac: &[Vec<f64>], source_dim: usize) -> FormValues {
    let k = vals.first().map(|(i, _)| i.len()).unwrap_or(0);
    let targets = subsets(source_dim, k);
    let mut out: Vec<(Idx, f64)> = targets.iter().map(|t| (t.clone(), 0.0)).collect();
    for (idx, c) in vals {
        if *c == 0.0 {
            continue;
        }
        for (slot, t) in targets.iter().enumerate() {
            let m: Vec<Vec<f64>> = idx
                .iter()
                .map(|&a| t.iter().map(|&r| jac[a as usize][r as usize]).collect())
                .collect();
            out[slot].1 += c * small_det(&m);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    #[test]
    fn calculus_on_random_forms() {
        let r = calculus_residuals(4, 9, &mut crate::sampling::Sampler::new(8)).unwrap();
        assert_eq!(r.len(), 3);
        for (name, v) in &r {
            assert!(*v < 1e-10, "{name}: {v}");
        }
    }

    use super::*;

    fn plane() -> Arc<Chart> {
        Chart::new("plane", vec!["x".into(), "y".into()]).unwrap()
    }

    #[test]
    fn wedge_signs() {
        let c = plane();
        let dx = DiffForm::dx(&c, 0);
        let dy = DiffForm::dx(&c, 1);
        assert!(dx.wedge(&dx).is_structurally_zero());
        let a = dx.wedge(&dy);
        let b = dy.wedge(&dx);
        assert_eq!(a.coeff(&[0, 1]).as_const(), Some(1.0));
        assert_eq!(b.coeff(&[0, 1]).as_const(), Some(-1.0));
    }

    #[test]
    fn derivative_of_one_form() {
        let c = plane();
        let a = DiffForm::dx(&c, 1).mul_expr(&Expr::var(0));
        let da = a.d();
        assert_eq!(da.terms().len(), 1);
        assert_eq!(da.coeff(&[0, 1]).as_const(), Some(1.0));
    }

    #[test]
    fn interior_of_area_form() {
        let c = plane();
        let area = DiffForm::dx(&c, 0).wedge(&DiffForm::dx(&c, 1));
        let r = area.interior(&VectorField::coordinate(&c, 0));
        assert_eq!(r.degree(), 1);
        assert_eq!(r.coeff(&[1]).as_const(), Some(1.0));
        let one = DiffForm::dx(&c, 0).interior(&VectorField::coordinate(&c, 0));
        assert_eq!(one.as_scalar().as_const(), Some(1.0));
    }

    #[test]
    fn bracket_of_simple_fields() {
        let c = plane();
        let dx = VectorField::coordinate(&c, 0);
        let dy = VectorField::coordinate(&c, 1);
        assert!(dx.bracket(&dy).comps().iter().all(|e| e.is_zero()));
        let x_dy = dy.mul_expr(&Expr::var(0));
        let b = x_dy.bracket(&dx);
        assert_eq!(b.comp(1).as_const(), Some(-1.0));
        assert!(b.comp(0).is_zero());
    }

    #[test]
    fn degree_overflow_is_zero() {
        let c = plane();
        let area = DiffForm::dx(&c, 0).wedge(&DiffForm::dx(&c, 1));
        let w = area.wedge(&DiffForm::dx(&c, 0));
        assert_eq!(w.degree(), 3);
        assert!(w.is_structurally_zero());
    }

    #[test]
    fn mismatched_charts_error() {
        let a = DiffForm::dx(&plane(), 0);
        let other = Chart::euclidean("other", 2);
        let b = DiffForm::dx(&other, 0);
        assert!(matches!(a.try_wedge(&b), Err(FormError::ChartMismatch(..))));
    }

    #[test]
    fn pullback_along_polar_map() {
        let polar = Chart::new("polar", vec!["r".into(), "t".into()]).unwrap();
        let c = plane();
        let r = Expr::var(0);
        let t = Expr::var(1);
        let phi = ChartMap::new(&polar, &c, vec![r.mul(&t.cos()), r.mul(&t.sin())]);
        let area = DiffForm::dx(&c, 0).wedge(&DiffForm::dx(&c, 1));
        let pulled = area.pullback(&phi).unwrap();
        let v = pulled.coeff(&[0, 1]).eval(&[2.0, 0.3]).unwrap();
        assert!((v - 2.0).abs() < 1e-14);
        let num = phi.numeric(&[&area]).eval(&[2.0, 0.3]).unwrap();
        assert!((num[0][0].1 - 2.0).abs() < 1e-14);
    }

    #[test]
    fn sections_must_fix_base() {
        let base = Chart::euclidean("base", 1);
        let total = Chart::euclidean("total", 2);
        let x = Expr::var(0);
        assert!(ChartMap::section(&base, &total, vec![x.clone(), x.powi(2)]).is_ok());
        assert!(ChartMap::section(&base, &total, vec![x.scale(2.0), x]).is_err());
    }
}
