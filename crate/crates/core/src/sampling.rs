//! Seeded random inputs: jet points, group elements and polynomial fields.

use crate::chart::Chart;
use crate::expr::Expr;
use crate::forms::{subsets_of, DiffForm};
use crate::lie::Eta;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::sync::Arc;

/// Deterministic random source. Every check derives its own stream from
/// the run seed and the check name, so results do not depend on scheduling.
pub struct Sampler {
    rng: ChaCha8Rng,
}

impl Sampler {
    pub fn new(seed: u64) -> Sampler {
        Sampler {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Stream keyed by a seed and a label (FNV-1a of the label).
    pub fn for_label(seed: u64, label: &str) -> Sampler {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for b in label.bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x100_0000_01b3);
        }
        Sampler::new(seed ^ h)
    }

    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.rng.random::<f64>()
    }

    pub fn index(&mut self, n: usize) -> usize {
        self.rng.random_range(0..n)
    }

    /// e = I + 0.3·U with |det e| ≥ 0.2.
    pub fn vielbein(&mut self, m: usize) -> DMatrix<f64> {
        loop {
            let e = DMatrix::from_fn(m, m, |i, j| {
                (if i == j { 1.0 } else { 0.0 }) + 0.3 * self.uniform(-1.0, 1.0)
            });
            if e.determinant().abs() >= 0.2 {
                return e;
            }
        }
    }

    /// Random point of the jet chart (x, e, e'), followed by `extra`
    /// uniform[−1, 1] coordinates (used for momenta).
    pub fn jet_point(&mut self, m: usize, extra: usize) -> Vec<f64> {
        let mut p = Vec::with_capacity(m + m * m + m * m * m + extra);
        for _ in 0..m {
            p.push(self.uniform(-1.0, 1.0));
        }
        let e = self.vielbein(m);
        for mu in 0..m {
            for k in 0..m {
                p.push(e[(mu, k)]);
            }
        }
        for _ in 0..m * m * m {
            p.push(self.uniform(-0.5, 0.5));
        }
        for _ in 0..extra {
            p.push(self.uniform(-1.0, 1.0));
        }
        p
    }

    /// General linear element I + 0.3·U with |det| ≥ 0.2.
    pub fn group_element(&mut self, m: usize) -> DMatrix<f64> {
        self.vielbein(m)
    }

    /// Random element of the identity component of the η-orthogonal group.
    pub fn k_element(&mut self, eta: &Eta) -> DMatrix<f64> {
        let kappa = self.k_algebra(eta);
        let t = self.uniform(0.2, 1.0);
        (kappa * t).exp()
    }

    /// Random κ with κη antisymmetric.
    pub fn k_algebra(&mut self, eta: &Eta) -> DMatrix<f64> {
        let m = eta.m();
        let a = DMatrix::from_fn(m, m, |_, _| self.uniform(-1.0, 1.0));
        DMatrix::from_fn(m, m, |i, j| 0.5 * (a[(i, j)] - eta.diag(j) * a[(j, i)] * eta.diag(i)))
    }

    /// Random polynomial of total degree ≤ 2 in the given variables,
    /// with coefficients uniform in [−scale, scale].
    pub fn polynomial(&mut self, vars: &[usize], scale: f64) -> Expr {
        let mut terms = vec![Expr::constant(self.uniform(-scale, scale))];
        for (a, &u) in vars.iter().enumerate() {
            terms.push(Expr::var(u).scale(self.uniform(-scale, scale)));
            for &v in &vars[a..] {
                terms.push(Expr::var(u).mul(&Expr::var(v)).scale(self.uniform(-scale, scale)));
            }
        }
        Expr::sum(terms)
    }

    /// Random form of the given degree whose coefficients are p + sin(q)
    /// for random quadratic polynomials p, q.
    pub fn form(&mut self, chart: &Arc<Chart>, degree: usize) -> DiffForm {
        let vars: Vec<usize> = (0..chart.dim()).collect();
        let terms: Vec<(Vec<usize>, Expr)> = subsets_of(chart.dim(), degree)
            .into_iter()
            .map(|idx| {
                let c = self.polynomial(&vars, 0.5).add(&self.polynomial(&vars, 0.5).sin());
                (idx.iter().map(|&i| i as usize).collect(), c)
            })
            .collect();
        DiffForm::from_terms(chart, degree, terms)
    }

    /// Uniform point in [−1, 1]^n.
    pub fn point(&mut self, n: usize) -> Vec<f64> {
        (0..n).map(|_| self.uniform(-1.0, 1.0)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn streams_are_reproducible() {
        let a = Sampler::for_label(42, "x").jet_point(3, 0);
        let b = Sampler::for_label(42, "x").jet_point(3, 0);
        let c = Sampler::for_label(42, "y").jet_point(3, 0);
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_eq!(a.len(), 3 + 9 + 27);
    }

    #[test]
    fn k_elements_preserve_eta() {
        let eta = Eta::lorentzian(4);
        let mut s = Sampler::new(1);
        let g = s.k_element(&eta);
        let e = DMatrix::from_fn(4, 4, |i, j| eta.get(i, j));
        let d = &g * &e * g.transpose() - &e;
        assert!(d.amax() < 1e-12, "{d}");
    }
}
