//! Changes of base coordinates lifted to the jet chart, and the invariance
//! of θ and ω under them.

use crate::chart::{matrix_inverse, Chart};
use crate::expr::{EvalError, Expr, Tape};
use crate::forms::{bump, values_residual, ChartMap, Residuals};
use crate::frame::{CanonicalForms, JetChart};
use crate::lie::Eta;
use crate::sampling::Sampler;
use std::sync::Arc;

/// A base coordinate change x ↦ x̄(x) with its first and second derivatives.
pub struct BaseTransition {
    source: Arc<Chart>,
    target: Arc<Chart>,
    map: Vec<Expr>,
    /// J^μ_σ = ∂x̄^μ/∂x^σ.
    jac: Vec<Vec<Expr>>,
    /// K = J⁻¹.
    inv: Vec<Vec<Expr>>,
}

impl BaseTransition {
    pub fn new(source: &Arc<Chart>, target: &Arc<Chart>, map: Vec<Expr>) -> Result<BaseTransition, String> {
        let m = source.dim();
        if target.dim() != m || map.len() != m {
            return Err("a coordinate change needs equal dimensions".into());
        }
        let jac: Vec<Vec<Expr>> = map.iter().map(|f| (0..m).map(|s| f.diff(s)).collect()).collect();
        let inv = matrix_inverse(&jac);
        Ok(BaseTransition {
            source: source.clone(),
            target: target.clone(),
            map,
            jac,
            inv,
        })
    }

    /// Polar (r, φ) to Cartesian (x, y).
    pub fn polar_to_cartesian() -> BaseTransition {
        let polar = Chart::new("polar", vec!["r".into(), "phi".into()]).expect("names");
        let cart = Chart::new("cartesian", vec!["x".into(), "y".into()]).expect("names");
        let r = Expr::var(0);
        let phi = Expr::var(1);
        BaseTransition::new(&polar, &cart, vec![r.mul(&phi.cos()), r.mul(&phi.sin())]).expect("2 = 2")
    }

    pub fn source(&self) -> &Arc<Chart> {
        &self.source
    }

    pub fn target(&self) -> &Arc<Chart> {
        &self.target
    }

    /// The lifted map (x, e, e') ↦ (x̄, Je, (Je'_ρ + H_ρ e)K^ρ_ν) between jet charts,
    /// with H^μ_{σρ} = ∂_ρ J^μ_σ.
    pub fn jet_map(&self, src: &JetChart, dst: &JetChart) -> ChartMap {
        let m = src.m();
        let mut comps = vec![Expr::zero(); dst.dim()];
        for mu in 0..m {
            comps[dst.x(mu)] = self.map[mu].clone();
            for k in 0..m {
                comps[dst.e(mu, k)] =
                    Expr::sum((0..m).map(|s| self.jac[mu][s].mul(&Expr::var(src.e(s, k)))));
                for nu in 0..m {
                    comps[dst.ep(mu, k, nu)] = Expr::sum((0..m).map(|rho| {
                        let inner = Expr::sum((0..m).map(|s| {
                            self.jac[mu][s]
                                .mul(&Expr::var(src.ep(s, k, rho)))
                                .add(&self.jac[mu][s].diff(rho).mul(&Expr::var(src.e(s, k))))
                        }));
                        inner.mul(&self.inv[rho][nu])
                    }));
                }
            }
        }
        ChartMap::new(src.chart(), dst.chart(), comps)
    }

    /// Ā^μ_{δν} = J^μ_σK^ρ_νK^γ_δA^σ_{γρ} − c·H^μ_{γρ}K^γ_δK^ρ_ν at base point x;
    /// c = 1 is the transformation law, c = 0 drops the inhomogeneous term.
    pub fn transform_connection(
        &self,
        a: &[Vec<Vec<f64>>],
        x: &[f64],
        inhomogeneous: f64,
    ) -> Result<Vec<Vec<Vec<f64>>>, EvalError> {
        let m = self.map.len();
        let mut roots: Vec<Expr> = Vec::new();
        roots.extend(self.jac.iter().flatten().cloned());
        roots.extend(self.inv.iter().flatten().cloned());
        for mu in 0..m {
            for g in 0..m {
                for r in 0..m {
                    roots.push(self.jac[mu][g].diff(r));
                }
            }
        }
        let v = Tape::compile(&roots).eval(x)?;
        let j = |a: usize, b: usize| v[a * m + b];
        let k = |a: usize, b: usize| v[m * m + a * m + b];
        let h = |mu: usize, g: usize, r: usize| v[2 * m * m + (mu * m + g) * m + r];
        let mut out = vec![vec![vec![0.0; m]; m]; m];
        for (mu, plane) in out.iter_mut().enumerate() {
            for (d, row) in plane.iter_mut().enumerate() {
                for (nu, slot) in row.iter_mut().enumerate() {
                    let mut s = 0.0;
                    for g in 0..m {
                        for r in 0..m {
                            let kk = k(g, d) * k(r, nu);
                            s -= inhomogeneous * h(mu, g, r) * kk;
                            for sg in 0..m {
                                s += j(mu, sg) * kk * a[sg][g][r];
                            }
                        }
                    }
                    *slot = s;
                }
            }
        }
        Ok(out)
    }
}

/// Residuals of Φ*θ̄ = θ, Φ*ω̄ = ω and of the connection transformation law
/// (with and without its inhomogeneous term) at random jet points over `region`.
pub fn transition_residuals(
    t: &BaseTransition,
    eta: &Eta,
    region: &[(f64, f64)],
    samples: usize,
    sampler: &mut Sampler,
) -> Result<Residuals, String> {
    let src = JetChart::over(t.source().coord_names(), false);
    let dst = JetChart::over(t.target().coord_names(), false);
    let m = src.m();
    let fs = CanonicalForms::build(&src, eta)?;
    let fd = CanonicalForms::build(&dst, eta)?;
    let phi = t.jet_map(&src, &dst);
    let mut targets = Vec::new();
    targets.extend(fd.theta().entries().iter());
    targets.extend(fd.omega().entries().iter());
    let pull = phi.numeric(&targets);
    let mut sources = Vec::new();
    sources.extend(fs.theta().entries().iter());
    sources.extend(fs.omega().entries().iter());
    let direct = crate::forms::CompiledForms::new(&sources);
    let mut out = Residuals::new();
    let err = |e: EvalError| e.to_string();
    for _ in 0..samples {
        let mut p = sampler.jet_point(m, 0);
        for (mu, (lo, hi)) in region.iter().enumerate() {
            p[mu] = sampler.uniform(*lo, *hi);
        }
        let pulled = pull.eval(&p).map_err(err)?;
        let here = direct.eval(&p).map_err(err)?;
        for (n, (a, b)) in pulled.iter().zip(&here).enumerate() {
            let name = if n < m { "transition.theta" } else { "transition.omega" };
            bump(&mut out, name, values_residual(a, b));
        }
        let (y, _) = pull.map_at(&p).map_err(err)?;
        let a_src = src.jet_projection(&p)?;
        let a_dst = dst.jet_projection(&y)?;
        let x = &p[..m];
        for (name, c) in [("transition.connection", 1.0), ("transition.connection_without_h", 0.0)] {
            let predicted = t.transform_connection(&a_src, x, c).map_err(err)?;
            let mut worst: f64 = 0.0;
            for mu in 0..m {
                for d in 0..m {
                    for nu in 0..m {
                        worst = worst.max((predicted[mu][d][nu] - a_dst[mu][d][nu]).abs());
                    }
                }
            }
            bump(&mut out, name, worst);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polar_to_cartesian_invariance() {
        let t = BaseTransition::polar_to_cartesian();
        let mut s = Sampler::new(2);
        let r = transition_residuals(&t, &Eta::euclidean(2), &[(1.0, 2.0), (0.0, 6.2)], 20, &mut s).unwrap();
        let get = |n: &str| r.iter().find(|(k, _)| k == n).unwrap().1;
        assert!(get("transition.theta") < 1e-12, "{r:?}");
        assert!(get("transition.omega") < 1e-12, "{r:?}");
        assert!(get("transition.connection") < 1e-12, "{r:?}");
        assert!(get("transition.connection_without_h") > 1e-2, "{r:?}");
    }
}
