//! Matrix-, vector- and symmetric-valued forms and the Cartan decomposition
//! of gl(m) induced by a diagonal metric η.

use crate::chart::Chart;
use crate::expr::Expr;
use crate::expr::EvalError;
use crate::forms::{bump, max_abs, max_residual, DiffForm, FormAcc, Residuals};
use crate::sampling::Sampler;
use std::sync::Arc;

/// Diagonal metric with ±1 entries.
#[derive(Clone, Debug, PartialEq)]
pub struct Eta {
    diag: Vec<f64>,
}

impl Eta {
    pub fn new(signature: &[i32]) -> Result<Eta, String> {
        if signature.is_empty() {
            return Err("signature must not be empty".into());
        }
        if let Some(s) = signature.iter().find(|s| s.abs() != 1) {
            return Err(format!("signature entries must be ±1, found {s}"));
        }
        Ok(Eta {
            diag: signature.iter().map(|&s| s as f64).collect(),
        })
    }

    pub fn euclidean(m: usize) -> Eta {
        Eta { diag: vec![1.0; m] }
    }

    /// diag(1, …, 1, −1).
    pub fn lorentzian(m: usize) -> Eta {
        let mut diag = vec![1.0; m];
        diag[m - 1] = -1.0;
        Eta { diag }
    }

    pub fn m(&self) -> usize {
        self.diag.len()
    }

    /// η_{ij}; equal to η^{ij} since η² = 1.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        if i == j {
            self.diag[i]
        } else {
            0.0
        }
    }

    pub fn diag(&self, i: usize) -> f64 {
        self.diag[i]
    }

    pub fn signature(&self) -> Vec<i32> {
        self.diag.iter().map(|&d| d as i32).collect()
    }
}

/// Which summand of gl(m) = k ⊕ p to project on.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Part {
    K,
    P,
}

/// An m×m array of forms of equal degree; entry (i, j) is γ^i_j.
#[derive(Clone, Debug)]
pub struct MatrixForm {
    m: usize,
    entries: Vec<DiffForm>,
}

impl MatrixForm {
    pub fn from_fn(m: usize, mut f: impl FnMut(usize, usize) -> DiffForm) -> MatrixForm {
        let mut entries = Vec::with_capacity(m * m);
        for i in 0..m {
            for j in 0..m {
                entries.push(f(i, j));
            }
        }
        let out = MatrixForm { m, entries };
        out.check_uniform();
        out
    }

    fn check_uniform(&self) {
        let first = &self.entries[0];
        for e in &self.entries {
            assert!(
                crate::chart::same_chart(e.chart(), first.chart()),
                "matrix form entries on different charts"
            );
            assert_eq!(e.degree(), first.degree(), "matrix form entries of mixed degree");
        }
    }

    /// Constant matrix viewed as a 0-form.
    pub fn constant(chart: &Arc<Chart>, a: &[Vec<f64>]) -> MatrixForm {
        MatrixForm::from_fn(a.len(), |i, j| DiffForm::scalar(chart, Expr::constant(a[i][j])))
    }

    pub fn identity(chart: &Arc<Chart>, m: usize) -> MatrixForm {
        MatrixForm::from_fn(m, |i, j| {
            DiffForm::scalar(chart, Expr::constant(if i == j { 1.0 } else { 0.0 }))
        })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn degree(&self) -> usize {
        self.entries[0].degree()
    }

    pub fn chart(&self) -> &Arc<Chart> {
        self.entries[0].chart()
    }

    pub fn get(&self, i: usize, j: usize) -> &DiffForm {
        &self.entries[i * self.m + j]
    }

    pub fn entries(&self) -> &[DiffForm] {
        &self.entries
    }

    pub fn map(&self, f: impl Fn(&DiffForm) -> DiffForm) -> MatrixForm {
        MatrixForm {
            m: self.m,
            entries: self.entries.iter().map(f).collect(),
        }
    }

    pub fn add(&self, other: &MatrixForm) -> MatrixForm {
        MatrixForm::from_fn(self.m, |i, j| self.get(i, j).add(other.get(i, j)))
    }

    pub fn sub(&self, other: &MatrixForm) -> MatrixForm {
        MatrixForm::from_fn(self.m, |i, j| self.get(i, j).sub(other.get(i, j)))
    }

    pub fn scale(&self, c: f64) -> MatrixForm {
        self.map(|f| f.scale(c))
    }

    pub fn d(&self) -> MatrixForm {
        self.map(|f| f.d())
    }

    /// π_k or π_p of the Cartan decomposition.
    pub fn cartan_project(&self, part: Part, eta: &Eta) -> Result<MatrixForm, String> {
        if eta.m() != self.m {
            return Err(format!(
                "η has dimension {} but the matrix form has {}",
                eta.m(),
                self.m
            ));
        }
        let s = match part {
            Part::K => -1.0,
            Part::P => 1.0,
        };
        Ok(MatrixForm::from_fn(self.m, |i, j| {
            let c = 0.5 * s * eta.diag(j) * eta.diag(i);
            DiffForm::lin_comb(&[(0.5, self.get(i, j)), (c, self.get(j, i))])
        }))
    }

    pub fn project(&self, part: Part, eta: &Eta) -> MatrixForm {
        self.cartan_project(part, eta).expect("η dimension")
    }

    /// (γ∧ρ)^i_j = γ^i_p ∧ ρ^p_j.
    pub fn wedge(&self, other: &MatrixForm) -> MatrixForm {
        assert_eq!(self.m, other.m, "matrix form dimension mismatch");
        let deg = self.degree() + other.degree();
        MatrixForm::from_fn(self.m, |i, j| {
            let mut acc = FormAcc::new(self.chart(), deg);
            for p in 0..self.m {
                acc.add_wedge(self.get(i, p), other.get(p, j), 1.0);
            }
            acc.finish()
        })
    }

    /// (γ∧v)^i = γ^i_k ∧ v^k.
    pub fn wedge_vector(&self, v: &VectorValuedForm) -> VectorValuedForm {
        let deg = self.degree() + v.degree();
        VectorValuedForm::from_fn(self.m, |i| {
            let mut acc = FormAcc::new(self.chart(), deg);
            for k in 0..self.m {
                acc.add_wedge(self.get(i, k), v.get(k), 1.0);
            }
            acc.finish()
        })
    }

    pub fn trace(&self) -> DiffForm {
        let mut acc = FormAcc::new(self.chart(), self.degree());
        for i in 0..self.m {
            acc.add(self.get(i, i));
        }
        acc.finish()
    }

    /// Entries of (γη)^{ij} + (γη)^{ji}; vanishes iff γ is k-valued.
    pub fn k_defect(&self, eta: &Eta) -> Vec<DiffForm> {
        let mut out = Vec::new();
        for i in 0..self.m {
            for j in i..self.m {
                out.push(DiffForm::lin_comb(&[
                    (eta.diag(j), self.get(i, j)),
                    (eta.diag(i), self.get(j, i)),
                ]));
            }
        }
        out
    }

    /// Entries of (ηγ)_{ij} − (ηγ)_{ji}; vanishes iff γ is p-valued.
    pub fn p_defect(&self, eta: &Eta) -> Vec<DiffForm> {
        let mut out = Vec::new();
        for i in 0..self.m {
            for j in i + 1..self.m {
                out.push(DiffForm::lin_comb(&[
                    (eta.diag(i), self.get(i, j)),
                    (-eta.diag(j), self.get(j, i)),
                ]));
            }
        }
        out
    }
}

/// An R^m-valued form.
#[derive(Clone, Debug)]
pub struct VectorValuedForm {
    entries: Vec<DiffForm>,
}

impl VectorValuedForm {
    pub fn from_fn(m: usize, f: impl FnMut(usize) -> DiffForm) -> VectorValuedForm {
        let entries: Vec<DiffForm> = (0..m).map(f).collect();
        for e in &entries {
            assert_eq!(e.degree(), entries[0].degree(), "vector form entries of mixed degree");
        }
        VectorValuedForm { entries }
    }

    pub fn m(&self) -> usize {
        self.entries.len()
    }

    pub fn degree(&self) -> usize {
        self.entries[0].degree()
    }

    pub fn get(&self, i: usize) -> &DiffForm {
        &self.entries[i]
    }

    pub fn entries(&self) -> &[DiffForm] {
        &self.entries
    }

    pub fn d(&self) -> VectorValuedForm {
        VectorValuedForm::from_fn(self.m(), |i| self.entries[i].d())
    }

    pub fn add(&self, other: &VectorValuedForm) -> VectorValuedForm {
        VectorValuedForm::from_fn(self.m(), |i| self.entries[i].add(&other.entries[i]))
    }
}

/// A symmetric m×m array of forms; only the upper triangle is stored.
#[derive(Clone, Debug)]
pub struct SymValuedForm {
    m: usize,
    upper: Vec<DiffForm>,
}

impl SymValuedForm {
    /// Builds from a function evaluated on i ≤ j only.
    pub fn from_upper(m: usize, mut f: impl FnMut(usize, usize) -> DiffForm) -> SymValuedForm {
        let mut upper = Vec::with_capacity(m * (m + 1) / 2);
        for i in 0..m {
            for j in i..m {
                upper.push(f(i, j));
            }
        }
        SymValuedForm { m, upper }
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn get(&self, i: usize, j: usize) -> &DiffForm {
        let (a, b) = if i <= j { (i, j) } else { (j, i) };
        &self.upper[pair_index(self.m, a, b)]
    }

    pub fn upper(&self) -> &[DiffForm] {
        &self.upper
    }
}

/// Position of (i, j), i ≤ j, in row-major upper-triangular storage.
pub fn pair_index(m: usize, i: usize, j: usize) -> usize {
    debug_assert!(i <= j && j < m);
    i * m - i * (i + 1) / 2 + j
}

/// Random matrix-valued form of the given degree on `chart`.
pub fn random_matrix_form(chart: &Arc<Chart>, m: usize, degree: usize, sampler: &mut Sampler) -> MatrixForm {
    MatrixForm::from_fn(m, |_, _| sampler.form(chart, degree))
}

/// The Cartan-decomposition properties on random forms: projector sum and
/// idempotence, the (anti)symmetry characterisation in both directions,
/// Tr(γ_k∧ρ_p) = 0 and both parities of the decomposition of ω∧ω.
pub fn cartan_residuals(eta: &Eta, samples: usize, sampler: &mut Sampler) -> Result<Residuals, EvalError> {
    let m = eta.m();
    let chart = Chart::euclidean("y", 4);
    let mut out = Residuals::new();
    let tag = |name: &str| format!("cartan.{name}");
    for s in 0..samples {
        let pt = vec![sampler.point(4)];
        let n = 1 + s % 2;
        let g = random_matrix_form(&chart, m, n, sampler);
        let gk = g.project(Part::K, eta);
        let gp = g.project(Part::P, eta);
        let pairs = |a: &MatrixForm, b: &MatrixForm| -> Vec<(DiffForm, DiffForm)> {
            a.entries().iter().cloned().zip(b.entries().iter().cloned()).collect()
        };
        let check = |ps: Vec<(DiffForm, DiffForm)>| -> Result<f64, EvalError> {
            let refs: Vec<(&DiffForm, &DiffForm)> = ps.iter().map(|(a, b)| (a, b)).collect();
            max_residual(&refs, &pt)
        };
        let zero = |fs: &[DiffForm]| -> Result<f64, EvalError> {
            let refs: Vec<&DiffForm> = fs.iter().collect();
            max_abs(&refs, &pt)
        };
        bump(&mut out, &tag("projector_sum"), check(pairs(&gk.add(&gp), &g))?);
        bump(&mut out, &tag("idempotence_k"), check(pairs(&gk.project(Part::K, eta), &gk))?);
        bump(&mut out, &tag("idempotence_p"), check(pairs(&gp.project(Part::P, eta), &gp))?);
        bump(&mut out, &tag("complementary"), zero(gk.project(Part::P, eta).entries())?);
        // γ ∈ k ⇒ γη antisymmetric; γ ∈ p ⇒ ηγ symmetric.
        bump(&mut out, &tag("k_is_antisymmetric"), zero(&gk.k_defect(eta))?);
        bump(&mut out, &tag("p_is_symmetric"), zero(&gp.p_defect(eta))?);
        // Converse: build γη antisymmetric (resp. ηγ symmetric) directly and
        // check that the other projection vanishes.
        let a = random_matrix_form(&chart, m, n, sampler);
        let anti = MatrixForm::from_fn(m, |i, j| {
            DiffForm::lin_comb(&[(eta.diag(j), a.get(i, j)), (-eta.diag(j), a.get(j, i))])
        });
        let sym = MatrixForm::from_fn(m, |i, j| {
            DiffForm::lin_comb(&[(eta.diag(i), a.get(i, j)), (eta.diag(i), a.get(j, i))])
        });
        bump(&mut out, &tag("antisymmetric_is_k"), zero(anti.project(Part::P, eta).entries())?);
        bump(&mut out, &tag("symmetric_is_p"), zero(sym.project(Part::K, eta).entries())?);
        bump(&mut out, &tag("trace_k_vanishes"), zero(&[gk.trace()])?);
        let r = random_matrix_form(&chart, m, 3 - n, sampler).project(Part::P, eta);
        bump(&mut out, &tag("trace_wedge"), zero(&[gk.wedge(&r).trace()])?);
        let sq = g.wedge(&g);
        let same = gp.wedge(&gp).add(&gk.wedge(&gk));
        let mixed = gp.wedge(&gk).add(&gk.wedge(&gp));
        let (k_rhs, p_rhs) = if n % 2 == 1 { (&same, &mixed) } else { (&mixed, &same) };
        let name = if n % 2 == 1 { "decomp_square.odd" } else { "decomp_square.even" };
        let res = check(pairs(&sq.project(Part::K, eta), k_rhs))?
            .max(check(pairs(&sq.project(Part::P, eta), p_rhs))?);
        bump(&mut out, &tag(name), res);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pair_index_is_dense() {
        let m = 4;
        let mut seen = Vec::new();
        for i in 0..m {
            for j in i..m {
                seen.push(pair_index(m, i, j));
            }
        }
        assert_eq!(seen, (0..10).collect::<Vec<_>>());
    }

    #[test]
    fn projection_of_elementary_matrix() {
        let c = Chart::euclidean("pt", 1);
        let eta = Eta::lorentzian(4);
        let mut a = vec![vec![0.0; 4]; 4];
        // E^1_2 has its single entry in row 2, column 1.
        a[1][0] = 1.0;
        let g = MatrixForm::constant(&c, &a);
        let k = g.project(Part::K, &eta);
        let p = g.project(Part::P, &eta);
        let val = |f: &DiffForm| f.as_scalar().as_const().unwrap_or(0.0);
        assert_eq!((val(k.get(1, 0)), val(k.get(0, 1))), (0.5, -0.5));
        assert_eq!((val(p.get(1, 0)), val(p.get(0, 1))), (0.5, 0.5));
    }

    #[test]
    fn trace_of_identity() {
        let c = Chart::euclidean("pt", 1);
        let t = MatrixForm::identity(&c, 4).trace();
        assert_eq!(t.as_scalar().as_const(), Some(4.0));
    }

    #[test]
    fn cartan_properties_hold() {
        for eta in [Eta::euclidean(4), Eta::lorentzian(4)] {
            let r = cartan_residuals(&eta, 6, &mut Sampler::new(3)).unwrap();
            for (name, v) in &r {
                assert!(*v < 1e-10, "{name}: {v}");
            }
            assert_eq!(r.len(), 12);
        }
    }

    #[test]
    fn bad_signature() {
        assert!(Eta::new(&[1, 2]).is_err());
        assert!(Eta::new(&[]).is_err());
    }
}
