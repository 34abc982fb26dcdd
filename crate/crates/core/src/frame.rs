//! Jet-bundle charts of the frame bundle and the canonical forms on them.

use crate::chart::{determinant, matrix_inverse, Chart};
use crate::expr::Expr;
use crate::forms::{ChartMap, DiffForm, FormAcc};
use crate::lie::{pair_index, Eta, MatrixForm, Part, SymValuedForm, VectorValuedForm};
use nalgebra::DMatrix;
use std::collections::HashMap;
use std::sync::{Arc, Mutex};

/// Coordinates (x^μ, e^μ_k, e^μ_{kν}) and optionally momenta p^a_{ij}, i ≤ j.
#[derive(Clone, Debug)]
pub struct JetChart {
    m: usize,
    momenta: bool,
    chart: Arc<Chart>,
    lm: Arc<Chart>,
}

impl JetChart {
    pub fn new(m: usize) -> JetChart {
        let base: Vec<String> = (0..m).map(|i| format!("x{i}")).collect();
        JetChart::over(&base, false)
    }

    /// The velocity–multimomentum chart: jet coordinates plus p^a_{ij}.
    pub fn with_momenta(m: usize) -> JetChart {
        let base: Vec<String> = (0..m).map(|i| format!("x{i}")).collect();
        JetChart::over(&base, true)
    }

    /// Jet chart over a base chart with the given coordinate names.
    pub fn over(base: &[String], momenta: bool) -> JetChart {
        let m = base.len();
        let mut names: Vec<String> = base.to_vec();
        for mu in 0..m {
            for k in 0..m {
                names.push(format!("e[{mu},{k}]"));
            }
        }
        let lm_names = names.clone();
        for mu in 0..m {
            for k in 0..m {
                for nu in 0..m {
                    names.push(format!("e[{mu},{k};{nu}]"));
                }
            }
        }
        if momenta {
            for a in 0..m {
                for i in 0..m {
                    for j in i..m {
                        names.push(format!("p[{a};{i},{j}]"));
                    }
                }
            }
        }
        let tag = base.join(",");
        let name = if momenta {
            format!("W({tag})")
        } else {
            format!("J1({tag})")
        };
        JetChart {
            m,
            momenta,
            chart: Chart::new(name, names).expect("distinct jet coordinate names"),
            lm: Chart::new(format!("LM({tag})"), lm_names).expect("distinct frame coordinate names"),
        }
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn has_momenta(&self) -> bool {
        self.momenta
    }

    pub fn chart(&self) -> &Arc<Chart> {
        &self.chart
    }

    /// The frame-bundle chart, whose coordinates are the leading jet coordinates.
    pub fn lm_chart(&self) -> &Arc<Chart> {
        &self.lm
    }

    pub fn dim(&self) -> usize {
        self.chart.dim()
    }

    /// Dimension without momenta.
    pub fn jet_dim(&self) -> usize {
        self.m + self.m * self.m + self.m * self.m * self.m
    }

    pub fn x(&self, mu: usize) -> usize {
        mu
    }

    pub fn e(&self, mu: usize, k: usize) -> usize {
        self.m + mu * self.m + k
    }

    pub fn ep(&self, mu: usize, k: usize, nu: usize) -> usize {
        self.m + self.m * self.m + (mu * self.m + k) * self.m + nu
    }

    pub fn p(&self, a: usize, i: usize, j: usize) -> usize {
        assert!(self.momenta, "chart has no momentum coordinates");
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        let pairs = self.m * (self.m + 1) / 2;
        self.jet_dim() + a * pairs + pair_index(self.m, i, j)
    }

    /// e^μ_k as coordinate expressions, indexed [μ][k].
    pub fn vielbein(&self) -> Vec<Vec<Expr>> {
        (0..self.m)
            .map(|mu| (0..self.m).map(|k| Expr::var(self.e(mu, k))).collect())
            .collect()
    }

    /// Reads the vielbein matrix out of a point.
    pub fn frame_at(&self, p: &[f64]) -> DMatrix<f64> {
        DMatrix::from_fn(self.m, self.m, |mu, k| p[self.e(mu, k)])
    }

    /// The right action (x, e, e', p)·g = (x, e·g, e'·g, p·g), where momenta
    /// transform as p'^c_{ab} = det(g) (g⁻¹)^c_l g^i_a g^j_b p^l_{ij}.
    pub fn act(&self, p: &[f64], g: &DMatrix<f64>) -> Vec<f64> {
        let m = self.m;
        let mut out = p.to_vec();
        for mu in 0..m {
            for k in 0..m {
                out[self.e(mu, k)] = (0..m).map(|l| p[self.e(mu, l)] * g[(l, k)]).sum();
                for nu in 0..m {
                    out[self.ep(mu, k, nu)] =
                        (0..m).map(|l| p[self.ep(mu, l, nu)] * g[(l, k)]).sum();
                }
            }
        }
        if self.momenta {
            for (slot, terms) in self.momentum_action(g) {
                out[slot] = terms.iter().map(|&(src, c)| c * p[src]).sum();
            }
        }
        out
    }

    /// For each momentum slot, the linear combination of source slots it
    /// receives under the action of g.
    fn momentum_action(&self, g: &DMatrix<f64>) -> Vec<(usize, Vec<(usize, f64)>)> {
        let m = self.m;
        let det = g.determinant();
        let ginv = g.clone().try_inverse().expect("group element is invertible");
        let mut out = Vec::new();
        for c in 0..m {
            for a in 0..m {
                for b in a..m {
                    let mut terms: Vec<(usize, f64)> = Vec::new();
                    for l in 0..m {
                        for i in 0..m {
                            for j in 0..m {
                                let coef = det * ginv[(c, l)] * g[(i, a)] * g[(j, b)];
                                let src = self.p(l, i, j);
                                match terms.iter_mut().find(|t| t.0 == src) {
                                    Some(t) => t.1 += coef,
                                    None => terms.push((src, coef)),
                                }
                            }
                        }
                    }
                    out.push((self.p(c, a, b), terms));
                }
            }
        }
        out
    }

    /// The right action as a chart map, for pullbacks.
    pub fn action_map(&self, g: &DMatrix<f64>) -> ChartMap {
        let m = self.m;
        let mut comps: Vec<Expr> = (0..self.dim()).map(Expr::var).collect();
        for mu in 0..m {
            for k in 0..m {
                comps[self.e(mu, k)] =
                    Expr::sum((0..m).map(|l| Expr::var(self.e(mu, l)).scale(g[(l, k)])));
                for nu in 0..m {
                    comps[self.ep(mu, k, nu)] =
                        Expr::sum((0..m).map(|l| Expr::var(self.ep(mu, l, nu)).scale(g[(l, k)])));
                }
            }
        }
        if self.momenta {
            for (slot, terms) in self.momentum_action(g) {
                comps[slot] = Expr::sum(terms.iter().map(|&(src, c)| Expr::var(src).scale(c)));
            }
        }
        ChartMap::new(&self.chart, &self.chart, comps)
    }

    /// Connection coordinates A^σ_{μν} = −e^k_μ e^σ_{kν}, indexed [σ][μ][ν].
    pub fn jet_projection(&self, p: &[f64]) -> Result<Vec<Vec<Vec<f64>>>, String> {
        let m = self.m;
        let e = self.frame_at(p);
        let inv = e
            .clone()
            .try_inverse()
            .filter(|_| e.determinant().abs() > 1e-12)
            .ok_or_else(|| format!("singular vielbein at {}", self.chart.describe(p)))?;
        Ok((0..m)
            .map(|s| {
                (0..m)
                    .map(|mu| {
                        (0..m)
                            .map(|nu| {
                                -(0..m).map(|k| inv[(k, mu)] * p[self.ep(s, k, nu)]).sum::<f64>()
                            })
                            .collect()
                    })
                    .collect()
            })
            .collect())
    }
}

/// θ, ω, T, Ω and σ₀ on a jet chart, with θ_{i₁…i_p} built on demand.
pub struct CanonicalForms {
    jet: JetChart,
    eta: Eta,
    coframe: Vec<Vec<Expr>>,
    theta: VectorValuedForm,
    omega: MatrixForm,
    torsion: VectorValuedForm,
    curvature: MatrixForm,
    sigma0: DiffForm,
    algebra: ThetaAlgebra,
}

/// A named family of form identities lhs = rhs.
pub struct Identity {
    pub name: String,
    pub pairs: Vec<(DiffForm, DiffForm)>,
}

impl Identity {
    pub fn new(name: &str, pairs: Vec<(DiffForm, DiffForm)>) -> Identity {
        Identity {
            name: name.to_string(),
            pairs,
        }
    }

    pub fn residual(&self, points: &[Vec<f64>]) -> Result<f64, crate::expr::EvalError> {
        let refs: Vec<(&DiffForm, &DiffForm)> = self.pairs.iter().map(|(a, b)| (a, b)).collect();
        crate::forms::max_residual(&refs, points)
    }
}

fn permutation_sign(seq: &[usize]) -> f64 {
    let mut sign = 1.0;
    for i in 0..seq.len() {
        for j in i + 1..seq.len() {
            if seq[i] > seq[j] {
                sign = -sign;
            }
        }
    }
    sign
}

/// Products of a coframe θ^1..θ^m and the contracted forms θ_{i₁…i_p}.
pub struct ThetaAlgebra {
    theta: VectorValuedForm,
    products: Mutex<HashMap<Vec<usize>, DiffForm>>,
}

impl ThetaAlgebra {
    pub fn new(theta: &VectorValuedForm) -> ThetaAlgebra {
        ThetaAlgebra {
            theta: theta.clone(),
            products: Mutex::new(HashMap::new()),
        }
    }

    pub fn theta(&self) -> &VectorValuedForm {
        &self.theta
    }

    /// θ^{c₁}∧…∧θ^{c_r} for an increasing list, memoized.
    fn theta_product(&self, indices: &[usize]) -> DiffForm {
        if indices.is_empty() {
            return DiffForm::scalar(self.theta.get(0).chart(), Expr::one());
        }
        if let Some(f) = self.products.lock().unwrap().get(indices) {
            return f.clone();
        }
        let rest = self.theta_product(&indices[1..]);
        let f = self.theta.get(indices[0]).wedge(&rest);
        self.products
            .lock()
            .unwrap()
            .insert(indices.to_vec(), f.clone());
        f
    }

    /// θ_{i₁…i_p} = (1/(m−p)!) ε_{i₁…i_p j₁…j_{m−p}} θ^{j₁}∧…∧θ^{j_{m−p}}.
    pub fn theta_multi(&self, indices: &[usize]) -> DiffForm {
        let m = self.theta.m();
        let degree = m.saturating_sub(indices.len());
        let distinct = indices.iter().all(|&i| i < m)
            && (0..indices.len()).all(|a| !indices[a + 1..].contains(&indices[a]));
        if !distinct {
            return DiffForm::zero(self.theta.get(0).chart(), degree);
        }
        let complement: Vec<usize> = (0..m).filter(|i| !indices.contains(i)).collect();
        let mut seq = indices.to_vec();
        seq.extend_from_slice(&complement);
        self.theta_product(&complement)
            .scale(permutation_sign(&seq))
    }

}

impl CanonicalForms {
    pub fn build(jet: &JetChart, eta: &Eta) -> Result<CanonicalForms, String> {
        let m = jet.m();
        if m < 2 {
            return Err("canonical forms need m ≥ 2".into());
        }
        if eta.m() != m {
            return Err(format!("η has dimension {} but the chart has m = {m}", eta.m()));
        }
        let chart = jet.chart().clone();
        let coframe = matrix_inverse(&jet.vielbein());
        let theta = VectorValuedForm::from_fn(m, |k| {
            let mut acc = FormAcc::new(&chart, 1);
            for mu in 0..m {
                acc.add_scaled(&DiffForm::dx(&chart, jet.x(mu)), &coframe[k][mu]);
            }
            acc.finish()
        });
        let omega = MatrixForm::from_fn(m, |k, l| {
            let mut acc = FormAcc::new(&chart, 1);
            for mu in 0..m {
                acc.add_scaled(&DiffForm::dx(&chart, jet.e(mu, l)), &coframe[k][mu]);
            }
            for s in 0..m {
                let c = Expr::sum((0..m).map(|mu| {
                    coframe[k][mu].mul(&Expr::var(jet.ep(mu, l, s))).neg()
                }));
                acc.add_scaled(&DiffForm::dx(&chart, jet.x(s)), &c);
            }
            acc.finish()
        });
        let wt = omega.wedge_vector(&theta);
        let torsion = VectorValuedForm::from_fn(m, |i| theta.get(i).d().add(wt.get(i)));
        let curvature = omega.d().add(&omega.wedge(&omega));
        let mut sigma0 = theta.get(0).clone();
        for k in 1..m {
            sigma0 = sigma0.wedge(theta.get(k));
        }
        let algebra = ThetaAlgebra::new(&theta);
        Ok(CanonicalForms {
            jet: jet.clone(),
            eta: eta.clone(),
            coframe,
            theta,
            omega,
            torsion,
            curvature,
            sigma0,
            algebra,
        })
    }

    pub fn jet(&self) -> &JetChart {
        &self.jet
    }

    pub fn eta(&self) -> &Eta {
        &self.eta
    }

    pub fn m(&self) -> usize {
        self.jet.m()
    }

    pub fn chart(&self) -> &Arc<Chart> {
        self.jet.chart()
    }

    /// e^k_μ, indexed [k][μ].
    pub fn coframe(&self) -> &[Vec<Expr>] {
        &self.coframe
    }

    pub fn theta(&self) -> &VectorValuedForm {
        &self.theta
    }

    pub fn omega(&self) -> &MatrixForm {
        &self.omega
    }

    pub fn torsion(&self) -> &VectorValuedForm {
        &self.torsion
    }

    pub fn curvature(&self) -> &MatrixForm {
        &self.curvature
    }

    pub fn sigma0(&self) -> &DiffForm {
        &self.sigma0
    }

    /// θ_{i₁…i_p}; see [`ThetaAlgebra::theta_multi`].
    pub fn theta_multi(&self, indices: &[usize]) -> DiffForm {
        self.algebra.theta_multi(indices)
    }

    /// A^σ_{μν} = −e^k_μ e^σ_{kν}.
    pub fn a_coeff(&self, s: usize, mu: usize, nu: usize) -> Expr {
        let m = self.m();
        Expr::sum((0..m).map(|k| {
            self.coframe[k][mu]
                .mul(&Expr::var(self.jet.ep(s, k, nu)))
                .neg()
        }))
    }

    /// g̃^{μν} = η^{ij} e^μ_i e^ν_j.
    pub fn g_tilde(&self, mu: usize, nu: usize) -> Expr {
        Expr::sum((0..self.m()).map(|i| {
            Expr::var(self.jet.e(mu, i))
                .mul(&Expr::var(self.jet.e(nu, i)))
                .scale(self.eta.diag(i))
        }))
    }

    /// Q^{ij} = η^{ip}ω^j_p + η^{jp}ω^i_p.
    pub fn metricity(&self) -> SymValuedForm {
        let eta = &self.eta;
        SymValuedForm::from_upper(self.m(), |i, j| {
            DiffForm::lin_comb(&[
                (eta.diag(i), self.omega.get(j, i)),
                (eta.diag(j), self.omega.get(i, j)),
            ])
        })
    }

    pub fn omega_part(&self, part: Part) -> MatrixForm {
        self.omega.project(part, &self.eta)
    }

    /// The structure equations, both Bianchi identities, the dθ_{…}
    /// identities and the torsion lemma.
    pub fn structure_identities(&self) -> Vec<Identity> {
        let m = self.m();
        let chart = self.chart();
        let th = &self.theta;
        let om = &self.omega;
        let t = &self.torsion;
        let big = &self.curvature;
        let mut out = Vec::new();

        let wt = om.wedge_vector(th);
        out.push(Identity::new(
            "structure.torsion",
            (0..m)
                .map(|i| (th.get(i).d(), t.get(i).sub(wt.get(i))))
                .collect(),
        ));
        let ww = om.wedge(om);
        let dom = om.d();
        out.push(Identity::new(
            "structure.curvature",
            (0..m * m)
                .map(|n| {
                    let (i, j) = (n / m, n % m);
                    (dom.get(i, j).clone(), big.get(i, j).sub(ww.get(i, j)))
                })
                .collect(),
        ));

        let dbig = big.d();
        let bw = big.wedge(om);
        let wb = om.wedge(big);
        out.push(Identity::new(
            "bianchi.curvature",
            (0..m * m)
                .map(|n| {
                    let (i, j) = (n / m, n % m);
                    (dbig.get(i, j).clone(), bw.get(i, j).sub(wb.get(i, j)))
                })
                .collect(),
        ));
        let bt = big.wedge_vector(th);
        let wtt = om.wedge_vector(t);
        out.push(Identity::new(
            "bianchi.torsion",
            (0..m)
                .map(|i| (t.get(i).d(), bt.get(i).sub(wtt.get(i))))
                .collect(),
        ));

        let trace = om.trace();
        let deg = |p: usize| m + 1 - p;
        let mut pairs = Vec::new();
        for i in 0..m {
            let mut acc = FormAcc::new(chart, deg(1));
            for l in 0..m {
                acc.add_wedge(om.get(l, i), &self.theta_multi(&[l]), 1.0);
                acc.add_wedge(t.get(l), &self.theta_multi(&[i, l]), 1.0);
            }
            acc.add_wedge(&trace, &self.theta_multi(&[i]), -1.0);
            pairs.push((self.theta_multi(&[i]).d(), acc.finish()));
        }
        out.push(Identity::new("dtheta.1", pairs));

        let mut pairs = Vec::new();
        for k in 0..m {
            for p in k + 1..m {
                let mut acc = FormAcc::new(chart, deg(2));
                for q in 0..m {
                    acc.add_wedge(om.get(q, k), &self.theta_multi(&[q, p]), 1.0);
                    acc.add_wedge(om.get(q, p), &self.theta_multi(&[q, k]), -1.0);
                    if m >= 3 {
                        acc.add_wedge(t.get(q), &self.theta_multi(&[k, p, q]), 1.0);
                    }
                }
                acc.add_wedge(&trace, &self.theta_multi(&[k, p]), -1.0);
                pairs.push((self.theta_multi(&[k, p]).d(), acc.finish()));
            }
        }
        out.push(Identity::new("dtheta.2", pairs));

        if m >= 3 {
            let mut pairs = Vec::new();
            for i in 0..m {
                for p in i + 1..m {
                    for q in p + 1..m {
                        let mut acc = FormAcc::new(chart, deg(3));
                        for k in 0..m {
                            acc.add_wedge(om.get(k, i), &self.theta_multi(&[k, p, q]), 1.0);
                            acc.add_wedge(om.get(k, p), &self.theta_multi(&[k, q, i]), 1.0);
                            acc.add_wedge(om.get(k, q), &self.theta_multi(&[k, i, p]), 1.0);
                            if m >= 4 {
                                acc.add_wedge(t.get(k), &self.theta_multi(&[i, p, q, k]), 1.0);
                            }
                        }
                        acc.add_wedge(&trace, &self.theta_multi(&[i, p, q]), -1.0);
                        pairs.push((self.theta_multi(&[i, p, q]).d(), acc.finish()));
                    }
                }
            }
            out.push(Identity::new("dtheta.3", pairs));
        }

        if m < 3 {
            return out;
        }
        let dt_cov: Vec<DiffForm> = (0..m).map(|k| t.get(k).d().add(wtt.get(k))).collect();
        let mut pairs = Vec::new();
        for i in 0..m {
            for p in 0..m {
                let mut lhs = FormAcc::new(chart, m);
                let mut rhs = FormAcc::new(chart, m);
                for k in 0..m {
                    lhs.add_wedge(&dt_cov[k], &self.theta_multi(&[i, k, p]), 1.0);
                    rhs.add_wedge(big.get(k, p), &self.theta_multi(&[i, k]), 1.0);
                    rhs.add_wedge(big.get(k, i), &self.theta_multi(&[p, k]), -1.0);
                    rhs.add_wedge(big.get(k, k), &self.theta_multi(&[i, p]), -1.0);
                }
                pairs.push((lhs.finish(), rhs.finish()));
            }
        }
        out.push(Identity::new("torsion_lemma", pairs));
        out
    }

    /// θ^l ∧ θ_{i₁…i_p} = Σ_k (−1)^{p−k} δ^l_{i_k} θ_{i₁…î_k…i_p} for every
    /// index tuple of every length p ≤ m.
    pub fn theta_wedge_identities(&self) -> Identity {
        let m = self.m();
        let mut pairs = Vec::new();
        let mut tuples: Vec<Vec<usize>> = vec![vec![]];
        for _ in 0..m {
            let mut next = Vec::new();
            for t in &tuples {
                for i in 0..m {
                    if !t.contains(&i) {
                        let mut u = t.clone();
                        u.push(i);
                        next.push(u);
                    }
                }
            }
            for t in &next {
                for l in 0..m {
                    let lhs = self.theta.get(l).wedge(&self.theta_multi(t));
                    let mut acc = FormAcc::new(self.chart(), m + 1 - t.len());
                    for (k, &ik) in t.iter().enumerate() {
                        if ik == l {
                            let mut rest = t.clone();
                            rest.remove(k);
                            let s = if (t.len() - 1 - k) % 2 == 0 { 1.0 } else { -1.0 };
                            acc.add_const(&self.theta_multi(&rest), s);
                        }
                    }
                    pairs.push((lhs, acc.finish()));
                }
            }
            tuples = next;
        }
        Identity::new("theta_multi.expansion", pairs)
    }

    /// e^l_μ Ω^k_l against e^k_γ(dA^γ_{μρ}∧dx^ρ + A^γ_{σβ}A^σ_{μδ}dx^β∧dx^δ).
    pub fn curvature_coordinate_identity(&self) -> Identity {
        let m = self.m();
        let chart = self.chart();
        let jet = &self.jet;
        let a: Vec<Vec<Vec<Expr>>> = (0..m)
            .map(|s| (0..m).map(|mu| (0..m).map(|nu| self.a_coeff(s, mu, nu)).collect()).collect())
            .collect();
        let dx = |i: usize| DiffForm::dx(chart, jet.x(i));
        let mut pairs = Vec::new();
        for k in 0..m {
            for mu in 0..m {
                let mut lhs = FormAcc::new(chart, 2);
                for l in 0..m {
                    lhs.add_scaled(self.curvature.get(k, l), &self.coframe[l][mu]);
                }
                let mut rhs = FormAcc::new(chart, 2);
                for g in 0..m {
                    let mut inner = FormAcc::new(chart, 2);
                    for rho in 0..m {
                        let da = DiffForm::scalar(chart, a[g][mu][rho].clone()).d();
                        inner.add_wedge(&da, &dx(rho), 1.0);
                    }
                    for b in 0..m {
                        for dd in 0..m {
                            let c = Expr::sum((0..m).map(|s| a[g][s][b].mul(&a[s][mu][dd])));
                            inner.add_scaled(&dx(b).wedge(&dx(dd)), &c);
                        }
                    }
                    rhs.add_scaled(&inner.finish(), &self.coframe[k][g]);
                }
                pairs.push((lhs.finish(), rhs.finish()));
            }
        }
        Identity::new("curvature.coordinates", pairs)
    }

    /// T^i = e^i_σ A^σ_{νμ} dx^μ∧dx^ν (A carries the derivative index last).
    pub fn torsion_coordinate_identity(&self) -> Identity {
        let m = self.m();
        let chart = self.chart();
        let pairs = (0..m)
            .map(|i| {
                let mut acc = FormAcc::new(chart, 2);
                for mu in 0..m {
                    for nu in 0..m {
                        let c = Expr::sum(
                            (0..m).map(|s| self.coframe[i][s].mul(&self.a_coeff(s, nu, mu))),
                        );
                        let w = DiffForm::dx(chart, mu).wedge(&DiffForm::dx(chart, nu));
                        acc.add_scaled(&w, &c);
                    }
                }
                (self.torsion.get(i).clone(), acc.finish())
            })
            .collect();
        Identity::new("torsion.coordinates", pairs)
    }

    /// Q^{ij} = e^i_μ e^j_ν [dg̃^{μν} + (g̃^{μσ}A^ν_{σγ} + g̃^{νσ}A^μ_{σγ}) dx^γ].
    pub fn metricity_coordinate_identity(&self) -> Identity {
        let m = self.m();
        let chart = self.chart();
        let q = self.metricity();
        let mut pairs = Vec::new();
        for i in 0..m {
            for j in i..m {
                let mut rhs = FormAcc::new(chart, 1);
                for mu in 0..m {
                    for nu in 0..m {
                        let mut inner = FormAcc::new(chart, 1);
                        inner.add(&DiffForm::scalar(chart, self.g_tilde(mu, nu)).d());
                        for g in 0..m {
                            let c = Expr::sum((0..m).flat_map(|s| {
                                [
                                    self.g_tilde(mu, s).mul(&self.a_coeff(nu, s, g)),
                                    self.g_tilde(nu, s).mul(&self.a_coeff(mu, s, g)),
                                ]
                            }));
                            inner.add_scaled(&DiffForm::dx(chart, g), &c);
                        }
                        let f = self.coframe[i][mu].mul(&self.coframe[j][nu]);
                        rhs.add_scaled(&inner.finish(), &f);
                    }
                }
                pairs.push((q.get(i, j).clone(), rhs.finish()));
            }
        }
        Identity::new("metricity.coordinates", pairs)
    }

    /// Q^{ij} = 2η^{ik}(ω_p)^j_k.
    pub fn metricity_projector_identity(&self) -> Identity {
        let m = self.m();
        let q = self.metricity();
        let wp = self.omega_part(Part::P);
        let pairs = (0..m)
            .flat_map(|i| (i..m).map(move |j| (i, j)))
            .map(|(i, j)| (q.get(i, j).clone(), wp.get(j, i).scale(2.0 * self.eta.diag(i))))
            .collect();
        Identity::new("metricity.projector", pairs)
    }

    /// Determinant of the vielbein as an expression.
    pub fn frame_determinant(&self) -> Expr {
        determinant(&self.jet.vielbein())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::Sampler;

    #[test]
    fn jet_layout() {
        let j = JetChart::new(4);
        assert_eq!(j.dim(), 84);
        assert_eq!(j.ep(3, 3, 3), 83);
        let w = JetChart::with_momenta(4);
        assert_eq!(w.dim(), 124);
        assert_eq!(w.p(3, 3, 3), 123);
        assert_eq!(w.p(1, 2, 0), w.p(1, 0, 2));
        assert_eq!(JetChart::new(5).dim(), 155);
    }

    #[test]
    fn coframe_inverts_frame() {
        let jet = JetChart::new(4);
        let cf = CanonicalForms::build(&jet, &Eta::lorentzian(4)).unwrap();
        let mut s = Sampler::new(3);
        let p = s.jet_point(4, 0);
        for nu in 0..4 {
            for mu in 0..4 {
                let v: f64 = (0..4)
                    .map(|k| cf.coframe()[k][mu].eval(&p).unwrap() * p[jet.e(nu, k)])
                    .sum();
                let expect = if mu == nu { 1.0 } else { 0.0 };
                assert!((v - expect).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn top_multi_index_is_one() {
        let jet = JetChart::new(3);
        let cf = CanonicalForms::build(&jet, &Eta::euclidean(3)).unwrap();
        assert_eq!(cf.theta_multi(&[0, 1, 2]).as_scalar().as_const(), Some(1.0));
        assert_eq!(cf.theta_multi(&[1, 0, 2]).as_scalar().as_const(), Some(-1.0));
        assert!(cf.theta_multi(&[0, 0]).is_structurally_zero());
    }

    #[test]
    fn identity_action_fixes_points() {
        let jet = JetChart::new(3);
        let mut s = Sampler::new(5);
        let p = s.jet_point(3, 0);
        assert_eq!(jet.act(&p, &DMatrix::identity(3, 3)), p);
    }

    #[test]
    fn flat_point_has_no_connection() {
        let jet = JetChart::new(3);
        let mut p = vec![0.0; jet.dim()];
        for k in 0..3 {
            p[jet.e(k, k)] = 1.0;
        }
        let a = jet.jet_projection(&p).unwrap();
        assert!(a.iter().flatten().flatten().all(|&v| v == 0.0));
    }
}
