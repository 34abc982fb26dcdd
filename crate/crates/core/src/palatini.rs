//! The Palatini Lagrangian, the canonical form λ on the velocity–multimomentum
//! chart, the equations of motion along sections and the unimodular variant.

use crate::expr::{EvalError, Expr, Tape};
use crate::forms::{
    bump, combine_values, merge_residuals, values_max_abs, CompiledForms,
    DiffForm, FormAcc, FormValues, Residuals, SectionMap,
};
use crate::frame::{CanonicalForms, ThetaAlgebra};
use crate::lie::{Eta, Part, SymValuedForm, VectorValuedForm};
use crate::sampling::Sampler;
use crate::sections::FrameField;
use nalgebra::DMatrix;
use rayon::prelude::*;

/// L_PG = η^{kl} θ_{kp} ∧ Ω^p_l.
pub fn palatini_lagrangian(f: &CanonicalForms) -> DiffForm {
    let m = f.m();
    let mut acc = FormAcc::new(f.chart(), m);
    for l in 0..m {
        for p in 0..m {
            if p != l {
                acc.add_wedge(&f.theta_multi(&[l, p]), f.curvature().get(p, l), f.eta().diag(l));
            }
        }
    }
    acc.finish()
}

/// [(η^{kl}ω^q_k + η^{qk}ω^l_k)∧θ_{qp} − η^{kl}ω^s_s∧θ_{kp} + η^{kl}T^q∧θ_{kpq}] ∧ Ω^p_l.
pub fn palatini_differential(f: &CanonicalForms) -> DiffForm {
    let m = f.m();
    let eta = f.eta();
    let om = f.omega();
    let trace = om.trace();
    let mut acc = FormAcc::new(f.chart(), m + 1);
    for p in 0..m {
        for l in 0..m {
            let mut br = FormAcc::new(f.chart(), m - 1);
            for q in 0..m {
                let tq = f.theta_multi(&[q, p]);
                br.add_wedge(om.get(q, l), &tq, eta.diag(l));
                br.add_wedge(om.get(l, q), &tq, eta.diag(q));
                if m >= 3 {
                    br.add_wedge(f.torsion().get(q), &f.theta_multi(&[l, p, q]), eta.diag(l));
                }
            }
            br.add_wedge(&trace, &f.theta_multi(&[l, p]), -eta.diag(l));
            acc.add_wedge(&br.finish(), f.curvature().get(p, l), 1.0);
        }
    }
    acc.finish()
}

/// Θ_{ij} = p^a_{ij} θ_a on a chart with momentum coordinates.
pub fn canonical_momentum(f: &CanonicalForms) -> Result<SymValuedForm, String> {
    let jet = f.jet();
    if !jet.has_momenta() {
        return Err("canonical momentum needs a chart with momentum coordinates".into());
    }
    let m = f.m();
    let theta_a: Vec<DiffForm> = (0..m).map(|a| f.theta_multi(&[a])).collect();
    Ok(SymValuedForm::from_upper(m, |i, j| {
        let mut acc = FormAcc::new(f.chart(), m - 1);
        for (a, ta) in theta_a.iter().enumerate() {
            acc.add_scaled(ta, &Expr::var(jet.p(a, i, j)));
        }
        acc.finish()
    }))
}

/// λ = η^{kl}θ_{kp}∧Ω^p_l + η^{ql}Θ_{pq}∧ω^p_l.
pub fn canonical_lambda(f: &CanonicalForms, theta_mom: &SymValuedForm) -> DiffForm {
    let m = f.m();
    let mut acc = FormAcc::new(f.chart(), m);
    acc.add(&palatini_lagrangian(f));
    for p in 0..m {
        for l in 0..m {
            acc.add_wedge(theta_mom.get(p, l), f.omega().get(p, l), f.eta().diag(l));
        }
    }
    acc.finish()
}

/// Variants of the closed expression for dλ.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DLambdaForm {
    /// Θ∧ω terms carry the sign (−1)^{m−1} from moving an (m−1)-form past ω.
    Derived,
    /// Every sign as printed; agrees with `Derived` for odd m.
    Printed,
    /// `Derived` without the η^{ik}[DΘ]_{ij}∧(ω_p)^j_k term.
    Ablated,
}

/// [2η^{kp}(ω_p)^i_k∧θ_{il} − (ω_p)^s_s∧η^{kp}θ_{kl} + η^{kp}T^i∧θ_{kli} + s η^{ip}Θ_{il}]∧Ω^l_p
/// + η^{ik}[dΘ_{ij} + s(η^{rq}η_{li}Θ_{rj}∧(ω_k)^l_q − Θ_{ip}∧(ω_k)^p_j)]∧(ω_p)^j_k.
pub fn dlambda_closed(f: &CanonicalForms, theta_mom: &SymValuedForm, form: DLambdaForm) -> DiffForm {
    let m = f.m();
    let eta = f.eta();
    let s = match form {
        DLambdaForm::Printed => 1.0,
        _ if m % 2 == 0 => -1.0,
        _ => 1.0,
    };
    let wp = f.omega_part(Part::P);
    let wk = f.omega_part(Part::K);
    let trace_p = wp.trace();
    let mut acc = FormAcc::new(f.chart(), m + 1);
    for l in 0..m {
        for p in 0..m {
            let mut br = FormAcc::new(f.chart(), m - 1);
            for i in 0..m {
                br.add_wedge(wp.get(i, p), &f.theta_multi(&[i, l]), 2.0 * eta.diag(p));
                if m >= 3 {
                    br.add_wedge(f.torsion().get(i), &f.theta_multi(&[p, l, i]), eta.diag(p));
                }
            }
            br.add_wedge(&trace_p, &f.theta_multi(&[p, l]), -eta.diag(p));
            br.add_const(theta_mom.get(p, l), s * eta.diag(p));
            acc.add_wedge(&br.finish(), f.curvature().get(l, p), 1.0);
        }
    }
    if form != DLambdaForm::Ablated {
        for i in 0..m {
            for j in 0..m {
                let mut br = FormAcc::new(f.chart(), m);
                br.add(&theta_mom.get(i, j).d());
                for q in 0..m {
                    br.add_wedge(theta_mom.get(q, j), wk.get(i, q), s * eta.diag(q) * eta.diag(i));
                    br.add_wedge(theta_mom.get(i, q), wk.get(q, j), -s);
                }
                acc.add_wedge(&br.finish(), wp.get(j, i), eta.diag(i));
            }
        }
    }
    acc.finish()
}

/// Largest |α(V₁, V₂, X₃, …)| over random vectors with V₁, V₂ vertical for
/// the projection onto the first `base_dim` coordinates.
pub fn horizontality_defect(
    form: &DiffForm,
    base_dim: usize,
    points: &[Vec<f64>],
    sampler: &mut Sampler,
) -> Result<f64, EvalError> {
    let n = form.chart().dim();
    let k = form.degree();
    let compiled = CompiledForms::new(&[form]);
    let mut worst: f64 = 0.0;
    for p in points {
        let vals = &compiled.eval(p)?[0];
        let vectors: Vec<Vec<f64>> = (0..k)
            .map(|slot| {
                (0..n)
                    .map(|a| {
                        if slot < 2 && a < base_dim {
                            0.0
                        } else {
                            sampler.uniform(-1.0, 1.0)
                        }
                    })
                    .collect()
            })
            .collect();
        worst = worst.max(DiffForm::eval_on(vals, &vectors).abs());
    }
    Ok(worst)
}

/// max |(R_g*α)_u(v₁, …, v_k) − α_u(v₁, …, v_k)| over random tangent vectors,
/// with (R_g*α)_u(v…) = α_{ug}(dR_g v…).
pub fn equivariance_residual(
    f: &CanonicalForms,
    form: &DiffForm,
    g: &DMatrix<f64>,
    points: &[Vec<f64>],
    sampler: &mut Sampler,
) -> Result<f64, EvalError> {
    let n = form.chart().dim();
    let k = form.degree();
    let moved = f.jet().action_map(g).numeric(&[]);
    let compiled = CompiledForms::new(&[form]);
    let mut worst: f64 = 0.0;
    for p in points {
        let (y, jac) = moved.map_at(p)?;
        let at_p = &compiled.eval(p)?[0];
        let at_y = &compiled.eval(&y)?[0];
        for _ in 0..4 {
            let vs: Vec<Vec<f64>> =
                (0..k).map(|_| (0..n).map(|_| sampler.uniform(-1.0, 1.0)).collect()).collect();
            let ws: Vec<Vec<f64>> = vs
                .iter()
                .map(|v| (0..n).map(|a| (0..n).map(|b| jac[a][b] * v[b]).sum()).collect())
                .collect();
            let d = DiffForm::eval_on(at_y, &ws) - DiffForm::eval_on(at_p, &vs);
            worst = worst.max(d.abs());
        }
    }
    Ok(worst)
}

/// E_{ik} = θ_{il}∧Ω^l_k + θ_{kl}∧Ω^l_i − η_{ik}η^{pq}θ_{ql}∧Ω^l_p, for i ≤ k.
pub fn einstein_forms(f: &CanonicalForms) -> SymValuedForm {
    let m = f.m();
    let eta = f.eta();
    let big = f.curvature();
    let trace_part = {
        let mut acc = FormAcc::new(f.chart(), m);
        for p in 0..m {
            for l in 0..m {
                acc.add_wedge(&f.theta_multi(&[p, l]), big.get(l, p), eta.diag(p));
            }
        }
        acc.finish()
    };
    SymValuedForm::from_upper(m, |i, k| {
        let mut acc = FormAcc::new(f.chart(), m);
        for l in 0..m {
            acc.add_wedge(&f.theta_multi(&[i, l]), big.get(l, k), 1.0);
            acc.add_wedge(&f.theta_multi(&[k, l]), big.get(l, i), 1.0);
        }
        acc.add_const(&trace_part, -eta.get(i, k));
        acc.finish()
    })
}

/// K_{ik} = η_{ip}θ^p ∧ η^{qs}θ_{kqr}∧Ω^r_s; the congruence compares E_{ik}
/// with a multiple of K_{ik}.
pub fn congruence_forms(f: &CanonicalForms) -> Vec<Vec<DiffForm>> {
    let m = f.m();
    let eta = f.eta();
    let big = f.curvature();
    (0..m)
        .map(|i| {
            (0..m)
                .map(|k| {
                    let mut inner = FormAcc::new(f.chart(), m - 1);
                    for q in 0..m {
                        for r in 0..m {
                            inner.add_wedge(&f.theta_multi(&[k, q, r]), big.get(r, q), eta.diag(q));
                        }
                    }
                    f.theta().get(i).wedge(&inner.finish()).scale(eta.diag(i))
                })
                .collect()
        })
        .collect()
}

/// Ω^k_p∧θ_{ik} − Ω^k_i∧θ_{pk} for all i, p.
pub fn first_bianchi_forms(f: &CanonicalForms) -> Vec<DiffForm> {
    let m = f.m();
    let big = f.curvature();
    let mut out = Vec::new();
    for i in 0..m {
        for p in 0..m {
            let mut acc = FormAcc::new(f.chart(), m);
            for k in 0..m {
                acc.add_wedge(big.get(k, p), &f.theta_multi(&[i, k]), 1.0);
                acc.add_wedge(big.get(k, i), &f.theta_multi(&[p, k]), -1.0);
            }
            out.push(acc.finish());
        }
    }
    out
}

/// Everything the equations of motion need at one base point.
#[derive(Clone, Debug)]
pub struct SectionSample {
    /// Ω_{ij} = Ω^l_{ilj} in frame components.
    pub ricci: DMatrix<f64>,
    pub residuals: Residuals,
}

/// Forms pulled back along a section and compiled once.
pub struct SectionEvaluator<'a> {
    forms: &'a CanonicalForms,
    pull: crate::forms::NumericPullback,
    has_momenta: bool,
}

impl<'a> SectionEvaluator<'a> {
    pub fn new(forms: &'a CanonicalForms, section: &SectionMap) -> Result<SectionEvaluator<'a>, String> {
        if !crate::chart::same_chart(section.target(), forms.chart()) {
            return Err(format!(
                "section targets {} but the forms live on {}",
                section.target().name(),
                forms.chart().name()
            ));
        }
        let has_momenta = forms.jet().has_momenta();
        let wp = forms.omega_part(Part::P);
        let einstein = einstein_forms(forms);
        let mut list: Vec<DiffForm> = Vec::new();
        list.extend(wp.entries().iter().cloned());
        list.extend(forms.torsion().entries().iter().cloned());
        list.extend(forms.curvature().entries().iter().cloned());
        list.extend(einstein.upper().iter().cloned());
        list.push(forms.omega().trace());
        if has_momenta {
            list.extend(canonical_momentum(forms)?.upper().iter().cloned());
        }
        let refs: Vec<&DiffForm> = list.iter().collect();
        Ok(SectionEvaluator {
            forms,
            pull: section.numeric(&refs),
            has_momenta,
        })
    }

    /// Frame vectors X_a = e^μ_a ∂_μ and the pulled-back forms at `x`.
    pub fn sample(&self, x: &[f64]) -> Result<SectionSample, EvalError> {
        let f = self.forms;
        let m = f.m();
        let eta = f.eta();
        let jet = f.jet();
        let (y, _) = self.pull.map_at(x)?;
        let frame: Vec<Vec<f64>> = (0..m).map(|a| (0..m).map(|mu| y[jet.e(mu, a)]).collect()).collect();
        let vals = self.pull.eval(x)?;
        let (wp, rest) = vals.split_at(m * m);
        let (tor, rest) = rest.split_at(m);
        let (big, rest) = rest.split_at(m * m);
        let pairs = m * (m + 1) / 2;
        let (ein, rest) = rest.split_at(pairs);
        let (trace, rest) = rest.split_at(1);
        let mut out = Residuals::new();
        let max_of = |v: &[FormValues]| v.iter().fold(0.0_f64, |a, x| a.max(values_max_abs(x)));
        bump(&mut out, "metricity", max_of(wp));
        bump(&mut out, "torsion", max_of(tor));
        bump(&mut out, "equiaffinity", values_max_abs(&trace[0]));

        let ricci = DMatrix::from_fn(m, m, |i, j| {
            (0..m)
                .map(|l| DiffForm::eval_on(&big[l * m + i], &[frame[l].clone(), frame[j].clone()]))
                .sum::<f64>()
        });
        let scalar: f64 = (0..m).map(|i| eta.diag(i) * ricci[(i, i)]).sum();
        let mut g_max: f64 = 0.0;
        let mut tl_max: f64 = 0.0;
        let mut tl_trace = 0.0;
        for i in 0..m {
            for j in 0..m {
                let e = ricci[(i, j)] - 0.5 * eta.get(i, j) * scalar;
                let t = ricci[(i, j)] - eta.get(i, j) * scalar / m as f64;
                g_max = g_max.max(e.abs());
                tl_max = tl_max.max(t.abs());
                if i == j {
                    tl_trace += eta.diag(i) * t;
                }
            }
        }
        bump(&mut out, "einstein", g_max);
        bump(&mut out, "traceless_einstein", tl_max);
        bump(&mut out, "trace_identity", tl_trace.abs());
        let ein_max = ein.iter().fold(0.0_f64, |a, v| a.max(DiffForm::eval_on(v, &frame).abs()));
        bump(&mut out, "einstein_form", ein_max);

        if self.has_momenta {
            let mom = rest;
            bump(&mut out, "momenta", max_of(mom));
            let idx = |i: usize, j: usize| crate::lie::pair_index(m, i.min(j), i.max(j));
            let trace_parts: Vec<(f64, &FormValues)> =
                (0..m).map(|a| (eta.diag(a) / m as f64, &mom[idx(a, a)])).collect();
            let mu = combine_values(&trace_parts);
            let mut split: f64 = 0.0;
            for k in 0..m {
                for l in k..m {
                    let d = combine_values(&[(1.0, &mom[idx(k, l)]), (-eta.get(k, l), &mu)]);
                    split = split.max(values_max_abs(&d));
                }
            }
            bump(&mut out, "momentum_trace_split", split);
        }
        Ok(SectionSample { ricci, residuals: out })
    }

    pub fn samples(&self, points: &[Vec<f64>]) -> Result<Vec<SectionSample>, EvalError> {
        points.par_iter().map(|x| self.sample(x)).collect()
    }
}

/// Maximum residuals of the equations of motion along a section.
pub fn eom_residuals(
    forms: &CanonicalForms,
    section: &SectionMap,
    points: &[Vec<f64>],
) -> Result<Residuals, String> {
    let ev = SectionEvaluator::new(forms, section)?;
    let samples = ev.samples(points).map_err(|e| e.to_string())?;
    Ok(merge_residuals(samples.into_iter().map(|s| s.residuals)))
}

/// Classical pipeline Γ → Riemann → Ricci, independent of the forms code.
pub struct RicciOracle {
    m: usize,
    frame_tape: Tape,
    tape: Tape,
    ginv_tape: Tape,
    det_tape: Tape,
}

impl RicciOracle {
    pub fn new(field: &FrameField, eta: &Eta) -> RicciOracle {
        let m = field.m();
        let g = field.metric(eta);
        let ginv = field.inverse_metric(eta);
        let gamma = field.levi_civita(eta);
        let mut roots = Vec::new();
        for mu in 0..m {
            for nu in 0..m {
                for s in 0..m {
                    roots.push(gamma[mu][nu][s].clone());
                }
            }
        }
        for mu in 0..m {
            for nu in 0..m {
                for s in 0..m {
                    for r in 0..m {
                        roots.push(gamma[mu][nu][s].diff(r));
                    }
                }
            }
        }
        let frame: Vec<Expr> = field.frame().iter().flatten().cloned().collect();
        RicciOracle {
            m,
            frame_tape: Tape::compile(&frame),
            tape: Tape::compile(&roots),
            ginv_tape: Tape::compile(&ginv.into_iter().flatten().collect::<Vec<_>>()),
            det_tape: Tape::compile(&[crate::chart::determinant(&g)]),
        }
    }

    /// R_{νσ} = ∂_μΓ^μ_{νσ} − ∂_σΓ^μ_{νμ} + Γ^μ_{λμ}Γ^λ_{νσ} − Γ^μ_{λσ}Γ^λ_{νμ}.
    pub fn ricci_coordinates(&self, x: &[f64]) -> Result<DMatrix<f64>, EvalError> {
        let m = self.m;
        let v = self.tape.eval(x)?;
        let gam = |mu: usize, nu: usize, s: usize| v[(mu * m + nu) * m + s];
        let dg = |mu: usize, nu: usize, s: usize, r: usize| v[m * m * m + ((mu * m + nu) * m + s) * m + r];
        Ok(DMatrix::from_fn(m, m, |nu, s| {
            let mut r = 0.0;
            for mu in 0..m {
                r += dg(mu, nu, s, mu) - dg(mu, nu, mu, s);
                for l in 0..m {
                    r += gam(mu, l, mu) * gam(l, nu, s) - gam(mu, l, s) * gam(l, nu, mu);
                }
            }
            r
        }))
    }

    /// R_{ij} = R_{μν} e^μ_i e^ν_j.
    pub fn ricci_frame(&self, x: &[f64]) -> Result<DMatrix<f64>, EvalError> {
        let m = self.m;
        let e = DMatrix::from_row_slice(m, m, &self.frame_tape.eval(x)?);
        Ok(e.transpose() * self.ricci_coordinates(x)? * e)
    }

    /// Scalar curvature R = g^{μν}R_{μν}.
    pub fn scalar(&self, x: &[f64]) -> Result<f64, EvalError> {
        let m = self.m;
        let ginv = DMatrix::from_row_slice(m, m, &self.ginv_tape.eval(x)?);
        Ok(ginv.component_mul(&self.ricci_coordinates(x)?).sum())
    }

    /// R √|det g|.
    pub fn scalar_density(&self, x: &[f64]) -> Result<f64, EvalError> {
        let det = self.det_tape.eval(x)?[0];
        Ok(self.scalar(x)? * det.abs().sqrt())
    }
}

/// Largest |Ω_{ij} − R_{ij}| between the forms pipeline and the oracle.
pub fn oracle_discrepancy(samples: &[SectionSample], oracle: &RicciOracle, points: &[Vec<f64>]) -> Result<f64, EvalError> {
    let mut worst: f64 = 0.0;
    for (s, x) in samples.iter().zip(points) {
        worst = worst.max((&s.ricci - oracle.ricci_frame(x)?).amax());
    }
    Ok(worst)
}

/// Evaluates the pulled-back Lagrangian on the coordinate directions ∂_0, …, ∂_{m−1}.
pub fn lagrangian_density(forms: &CanonicalForms, section: &SectionMap, points: &[Vec<f64>]) -> Result<Vec<f64>, EvalError> {
    let l = palatini_lagrangian(forms);
    let pull = section.numeric(&[&l]);
    let m = forms.m();
    points
        .iter()
        .map(|x| {
            let vals = pull.eval(x)?;
            let basis: Vec<Vec<f64>> = (0..m)
                .map(|a| (0..m).map(|b| if a == b { 1.0 } else { 0.0 }).collect())
                .collect();
            Ok(DiffForm::eval_on(&vals[0], &basis))
        })
        .collect()
}

/// Result of the ν-lemma rank computation.
#[derive(Clone, Debug)]
pub struct NuLemma {
    pub m: usize,
    pub unknowns: usize,
    pub kernel_dim: usize,
    /// Largest residual of θ^k∧ν^i∧θ_{ikl} = 2(m−2)ν^i_{li}σ₀ for random ν.
    pub proof_identity: f64,
}

/// Coframe algebra on R^m with a random constant coframe θ^a = c^a_μ dx^μ.
fn constant_coframe(m: usize, sampler: &mut Sampler) -> (ThetaAlgebra, DiffForm) {
    let chart = crate::chart::Chart::euclidean("x", m);
    let c = sampler.vielbein(m);
    let theta = VectorValuedForm::from_fn(m, |a| {
        DiffForm::from_terms(
            &chart,
            1,
            (0..m).map(|mu| (vec![mu], Expr::constant(c[(a, mu)]))),
        )
    });
    let mut sigma0 = theta.get(0).clone();
    for k in 1..m {
        sigma0 = sigma0.wedge(theta.get(k));
    }
    (ThetaAlgebra::new(&theta), sigma0)
}

fn constant_coeffs(f: &DiffForm, len: usize) -> Vec<f64> {
    let keys = crate::forms::subsets_of(f.chart().dim(), len);
    keys.iter()
        .map(|k| f.coeff(k).as_const().unwrap_or(0.0))
        .collect()
}

/// Builds the linear map ν^i_{jk} ↦ ν^i∧θ_{ijk}, with ν^i = Σ_{j<k} ν^i_{jk} θ^j∧θ^k,
/// at a random coframe, and reports its kernel dimension.
pub fn nu_lemma_rank(m: usize, sampler: &mut Sampler) -> Result<NuLemma, String> {
    if m < 3 {
        return Err("the ν-lemma needs m ≥ 3".into());
    }
    let (alg, sigma0) = constant_coframe(m, sampler);
    let th = alg.theta();
    let mut columns: Vec<Vec<f64>> = Vec::new();
    for i in 0..m {
        for j in 0..m {
            for k in j + 1..m {
                let nu = th.get(j).wedge(th.get(k));
                let mut col = Vec::new();
                for a in 0..m {
                    for b in a + 1..m {
                        let img = nu.wedge(&alg.theta_multi(&[i, a, b]));
                        col.extend(constant_coeffs(&img, m - 1));
                    }
                }
                columns.push(col);
            }
        }
    }
    let rows = columns[0].len();
    let a = DMatrix::from_fn(rows, columns.len(), |r, c| columns[c][r]);
    let sv = a.clone().svd(false, false).singular_values;
    let smax = sv.max();
    let rank = sv.iter().filter(|&&s| s > 1e-10 * smax.max(1.0)).count();
    let unknowns = columns.len();

    // Proof identity with ν^i = Σ_{j,k} ν^i_{jk} θ^j∧θ^k (full sum).
    let mut coeff = vec![vec![vec![0.0; m]; m]; m];
    for ci in coeff.iter_mut() {
        for j in 0..m {
            for k in j + 1..m {
                let v = sampler.uniform(-1.0, 1.0);
                ci[j][k] = v;
                ci[k][j] = -v;
            }
        }
    }
    let chart = sigma0.chart().clone();
    let nu: Vec<DiffForm> = (0..m)
        .map(|i| {
            let mut acc = FormAcc::new(&chart, 2);
            for j in 0..m {
                for k in 0..m {
                    acc.add_wedge(th.get(j), th.get(k), coeff[i][j][k]);
                }
            }
            acc.finish()
        })
        .collect();
    let mut proof: f64 = 0.0;
    for l in 0..m {
        let mut lhs = FormAcc::new(&chart, m);
        for k in 0..m {
            for (i, nui) in nu.iter().enumerate() {
                lhs.add(&th.get(k).wedge(nui).wedge(&alg.theta_multi(&[i, k, l])));
            }
        }
        let trace: f64 = (0..m).map(|i| coeff[i][l][i]).sum();
        let rhs = sigma0.scale(2.0 * (m as f64 - 2.0) * trace);
        let d = lhs.finish().sub(&rhs);
        proof = proof.max(constant_coeffs(&d, m).iter().fold(0.0, |a, v| a.max(v.abs())));
    }
    Ok(NuLemma {
        m,
        unknowns,
        kernel_dim: unknowns - rank,
        proof_identity: proof,
    })
}

/// |det e| on a grid of points, to decide whether unimodular rescaling applies.
pub fn determinant_spread(field: &FrameField, points: &[Vec<f64>]) -> Result<(f64, f64), EvalError> {
    let det = field.determinant();
    let mut lo = f64::INFINITY;
    let mut hi: f64 = 0.0;
    for p in points {
        let d = det.eval(p)?.abs();
        lo = lo.min(d);
        hi = hi.max(d);
    }
    Ok((lo, hi))
}

/// The frame rescaled to unit determinant when det e is constant (to `tol`
/// relative) on the points; otherwise `None`.
pub fn unimodular_frame(field: &FrameField, points: &[Vec<f64>], tol: f64) -> Result<Option<FrameField>, EvalError> {
    let (lo, hi) = determinant_spread(field, points)?;
    if hi - lo > tol * hi.max(1e-300) {
        return Ok(None);
    }
    let m = field.m() as f64;
    Ok(Some(field.scaled(hi.powf(-1.0 / m))))
}
