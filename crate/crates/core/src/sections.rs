//! Vielbein fields on a base chart, their connections, and the induced
//! sections of the jet bundle.

use crate::chart::{determinant, matrix_inverse, Chart};
use crate::expr::Expr;
use crate::forms::SectionMap;
use crate::frame::JetChart;
use crate::lie::Eta;
use crate::sampling::Sampler;
use std::sync::Arc;

/// Γ^μ_{νσ}, indexed [μ][ν][σ].
pub type Connection = Vec<Vec<Vec<Expr>>>;

/// A frame field e^μ_k(x), indexed [μ][k].
#[derive(Clone, Debug)]
pub struct FrameField {
    base: Arc<Chart>,
    frame: Vec<Vec<Expr>>,
}

impl FrameField {
    pub fn new(base: &Arc<Chart>, frame: Vec<Vec<Expr>>) -> Result<FrameField, String> {
        let m = base.dim();
        if frame.len() != m || frame.iter().any(|r| r.len() != m) {
            return Err(format!("frame must be {m}×{m} on chart {}", base.name()));
        }
        if let Some(v) = frame.iter().flatten().flat_map(|e| e.support()).find(|&&v| v as usize >= m) {
            return Err(format!("frame depends on variable {v}, which is not a base coordinate"));
        }
        Ok(FrameField {
            base: base.clone(),
            frame,
        })
    }

    /// e = I + scale·P with P a random quadratic polynomial per entry.
    pub fn random_polynomial(base: &Arc<Chart>, sampler: &mut Sampler, scale: f64) -> FrameField {
        let m = base.dim();
        let vars: Vec<usize> = (0..m).collect();
        let frame = (0..m)
            .map(|mu| {
                (0..m)
                    .map(|k| {
                        let p = sampler.polynomial(&vars, scale);
                        if mu == k {
                            p.add(&Expr::one())
                        } else {
                            p
                        }
                    })
                    .collect()
            })
            .collect();
        FrameField {
            base: base.clone(),
            frame,
        }
    }

    pub fn base(&self) -> &Arc<Chart> {
        &self.base
    }

    pub fn m(&self) -> usize {
        self.frame.len()
    }

    pub fn frame(&self) -> &[Vec<Expr>] {
        &self.frame
    }

    /// e^k_μ, indexed [k][μ].
    pub fn coframe(&self) -> Vec<Vec<Expr>> {
        matrix_inverse(&self.frame)
    }

    pub fn determinant(&self) -> Expr {
        determinant(&self.frame)
    }

    /// g_{μν} = η_{ij} e^i_μ e^j_ν.
    pub fn metric(&self, eta: &Eta) -> Vec<Vec<Expr>> {
        let co = self.coframe();
        let m = self.m();
        (0..m)
            .map(|mu| {
                (0..m)
                    .map(|nu| Expr::sum((0..m).map(|i| co[i][mu].mul(&co[i][nu]).scale(eta.diag(i)))))
                    .collect()
            })
            .collect()
    }

    /// g^{μν} = η^{ij} e^μ_i e^ν_j.
    pub fn inverse_metric(&self, eta: &Eta) -> Vec<Vec<Expr>> {
        let m = self.m();
        (0..m)
            .map(|mu| {
                (0..m)
                    .map(|nu| {
                        Expr::sum(
                            (0..m).map(|i| self.frame[mu][i].mul(&self.frame[nu][i]).scale(eta.diag(i))),
                        )
                    })
                    .collect()
            })
            .collect()
    }

    /// Levi-Civita connection of the metric defined by the frame.
    pub fn levi_civita(&self, eta: &Eta) -> Connection {
        christoffel(&self.metric(eta), &self.inverse_metric(eta))
    }

    /// Multiplies every frame vector by a constant.
    pub fn scaled(&self, c: f64) -> FrameField {
        FrameField {
            base: self.base.clone(),
            frame: self.frame.iter().map(|r| r.iter().map(|e| e.scale(c)).collect()).collect(),
        }
    }
}

/// Γ^μ_{νσ} = ½ g^{μα}(∂_ν g_{ασ} + ∂_σ g_{αν} − ∂_α g_{νσ}).
pub fn christoffel(g: &[Vec<Expr>], ginv: &[Vec<Expr>]) -> Connection {
    let m = g.len();
    let dg: Vec<Vec<Vec<Expr>>> = (0..m)
        .map(|a| (0..m).map(|b| (0..m).map(|c| g[a][b].diff(c)).collect()).collect())
        .collect();
    (0..m)
        .map(|mu| {
            (0..m)
                .map(|nu| {
                    (0..m)
                        .map(|s| {
                            Expr::sum((0..m).map(|a| {
                                let bracket = Expr::sum([
                                    dg[a][s][nu].clone(),
                                    dg[a][nu][s].clone(),
                                    dg[nu][s][a].neg(),
                                ]);
                                ginv[mu][a].mul(&bracket)
                            }))
                            .scale(0.5)
                        })
                        .collect()
                })
                .collect()
        })
        .collect()
}

/// A random quadratic-polynomial connection on the base, optionally
/// symmetric in its lower indices.
pub fn random_connection(m: usize, sampler: &mut Sampler, symmetric: bool, scale: f64) -> Connection {
    let vars: Vec<usize> = (0..m).collect();
    let mut g = vec![vec![vec![Expr::zero(); m]; m]; m];
    for mu in 0..m {
        for nu in 0..m {
            for s in 0..m {
                if symmetric && s < nu {
                    g[mu][nu][s] = g[mu][s][nu].clone();
                } else {
                    g[mu][nu][s] = sampler.polynomial(&vars, scale);
                }
            }
        }
    }
    g
}

/// The jet section x ↦ (x, e(x), −e^σ_k Γ^μ_{σν}(x), p(x)), whose connection
/// coordinates are A = Γ. Momentum components default to zero.
pub fn connection_section(
    jet: &JetChart,
    field: &FrameField,
    gamma: &Connection,
    momenta: Option<&dyn Fn(usize, usize, usize) -> Expr>,
) -> SectionMap {
    let m = jet.m();
    let mut comps = vec![Expr::zero(); jet.dim()];
    for mu in 0..m {
        comps[jet.x(mu)] = Expr::var(mu);
        for k in 0..m {
            comps[jet.e(mu, k)] = field.frame[mu][k].clone();
            for nu in 0..m {
                comps[jet.ep(mu, k, nu)] =
                    Expr::sum((0..m).map(|s| field.frame[s][k].mul(&gamma[mu][s][nu]))).neg();
            }
        }
    }
    if jet.has_momenta() {
        if let Some(p) = momenta {
            for a in 0..m {
                for i in 0..m {
                    for j in i..m {
                        comps[jet.p(a, i, j)] = p(a, i, j);
                    }
                }
            }
        }
    }
    SectionMap::section(field.base(), jet.chart(), comps).expect("base components are the identity")
}

/// The Levi-Civita section of a frame field.
pub fn levi_civita_section(jet: &JetChart, field: &FrameField, eta: &Eta) -> SectionMap {
    connection_section(jet, field, &field.levi_civita(eta), None)
}

/// The first prolongation x ↦ (x, e(x), ∂_ν e^μ_k(x)).
pub fn holonomic_section(jet: &JetChart, field: &FrameField) -> SectionMap {
    let m = jet.m();
    let mut comps = vec![Expr::zero(); jet.dim()];
    for mu in 0..m {
        comps[jet.x(mu)] = Expr::var(mu);
        for k in 0..m {
            comps[jet.e(mu, k)] = field.frame[mu][k].clone();
            for nu in 0..m {
                comps[jet.ep(mu, k, nu)] = field.frame[mu][k].diff(nu);
            }
        }
    }
    SectionMap::section(field.base(), jet.chart(), comps).expect("base components are the identity")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flat_polar_christoffel() {
        // Frame of the flat metric in polar coordinates (r, φ).
        let base = Chart::new("polar", vec!["r".into(), "phi".into()]).unwrap();
        let r = Expr::var(0);
        let frame = vec![vec![Expr::one(), Expr::zero()], vec![Expr::zero(), r.recip()]];
        let f = FrameField::new(&base, frame).unwrap();
        let gamma = f.levi_civita(&Eta::euclidean(2));
        let p = [2.0, 0.3];
        // Γ^r_{φφ} = −r, Γ^φ_{rφ} = 1/r.
        assert!((gamma[0][1][1].eval(&p).unwrap() + 2.0).abs() < 1e-14);
        assert!((gamma[1][0][1].eval(&p).unwrap() - 0.5).abs() < 1e-14);
        assert!(gamma[0][0][0].eval(&p).unwrap().abs() < 1e-14);
    }

    #[test]
    fn section_has_requested_connection() {
        let base = Chart::euclidean("x", 3);
        let jet = JetChart::new(3);
        let mut s = Sampler::new(11);
        let f = FrameField::random_polynomial(&base, &mut s, 0.15);
        let gamma = random_connection(3, &mut s, false, 0.4);
        let sec = connection_section(&jet, &f, &gamma, None);
        let x = [0.1, -0.2, 0.3];
        let pt: Vec<f64> = sec.comps().iter().map(|c| c.eval(&x).unwrap()).collect();
        let a = jet.jet_projection(&pt).unwrap();
        for mu in 0..3 {
            for nu in 0..3 {
                for sg in 0..3 {
                    let g = gamma[mu][nu][sg].eval(&x).unwrap();
                    assert!((a[mu][nu][sg] - g).abs() < 1e-12);
                }
            }
        }
    }
}
