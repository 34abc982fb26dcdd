//! The adapted basis of J¹τ built from a torsionless background connection
//! Ξ: standard horizontal fields, fundamental fields and vertical lifts,
//! together with the difference function C and the dual coframe.
//!
//! Fundamental fields follow ω(A*) = A, i.e. A* generates e ↦ e·exp(tA).
//! The elementary matrix E^k_l has entries (E^k_l)^i_j = δ^i_l δ^k_j.

use crate::chart::matrix_inverse;
use crate::expr::{EvalError, Expr, Tape};
use crate::forms::{
    bump, combine_values, Residuals, interior_values, scalar_value, values_max_abs, values_residual, CompiledForms,
    DiffForm, FormAcc, FormValues, VectorField,
};
use crate::frame::{CanonicalForms, JetChart};
use crate::lie::MatrixForm;
use crate::sections::Connection;
use nalgebra::DMatrix;
use rayon::prelude::*;

/// The elementary matrix E^k_l.
pub fn elementary(m: usize, k: usize, l: usize) -> DMatrix<f64> {
    let mut a = DMatrix::zeros(m, m);
    a[(l, k)] = 1.0;
    a
}

fn delta(a: usize, b: usize) -> f64 {
    if a == b {
        1.0
    } else {
        0.0
    }
}

/// A* on LM: Σ (eA)^μ_j ∂/∂e^μ_j.
pub fn fundamental_lm(jet: &JetChart, a: &[Vec<Expr>]) -> VectorField {
    let m = jet.m();
    let chart = jet.lm_chart();
    let mut x = VectorField::zero(chart);
    for mu in 0..m {
        for j in 0..m {
            let c = Expr::sum((0..m).map(|i| Expr::var(jet.e(mu, i)).mul(&a[i][j])));
            x.set(jet.e(mu, j), c);
        }
    }
    x
}

fn const_matrix(a: &DMatrix<f64>) -> Vec<Vec<Expr>> {
    (0..a.nrows())
        .map(|i| (0..a.ncols()).map(|j| Expr::constant(a[(i, j)])).collect())
        .collect()
}

/// A* on J¹τ, from the explicit formula (eA)^μ_j ∂_{e^μ_j} + (e'A)^μ_{jν} ∂_{e^μ_{jν}}.
pub fn fundamental(jet: &JetChart, a: &DMatrix<f64>) -> VectorField {
    let m = jet.m();
    let mut x = VectorField::zero(jet.chart());
    for mu in 0..m {
        for j in 0..m {
            x.set(
                jet.e(mu, j),
                Expr::sum((0..m).map(|i| Expr::var(jet.e(mu, i)).scale(a[(i, j)]))),
            );
            for nu in 0..m {
                x.set(
                    jet.ep(mu, j, nu),
                    Expr::sum((0..m).map(|i| Expr::var(jet.ep(mu, i, nu)).scale(a[(i, j)]))),
                );
            }
        }
    }
    x
}

/// B(e_i) = e^μ_i(∂_μ − e^ν_j Ξ^σ_{μν} ∂_{e^σ_j}) on LM.
pub fn standard_horizontal(jet: &JetChart, xi: &Connection, i: usize) -> VectorField {
    let m = jet.m();
    let mut x = VectorField::zero(jet.lm_chart());
    for mu in 0..m {
        x.set(jet.x(mu), Expr::var(jet.e(mu, i)));
    }
    for s in 0..m {
        for j in 0..m {
            let c = Expr::sum((0..m).flat_map(|mu| {
                (0..m).map(move |nu| (mu, nu))
            }).map(|(mu, nu)| {
                Expr::var(jet.e(mu, i))
                    .mul(&Expr::var(jet.e(nu, j)))
                    .mul(&xi[s][mu][nu])
            }));
            x.set(jet.e(s, j), c.neg());
        }
    }
    x
}

/// First prolongation of a field on LM to J¹τ.
pub fn prolong(jet: &JetChart, x: &VectorField) -> VectorField {
    let m = jet.m();
    let mut out = x.extend_to(jet.chart());
    let total = |f: &Expr, kappa: usize| -> Expr {
        let mut terms = vec![f.diff(jet.x(kappa))];
        for mu in 0..m {
            for k in 0..m {
                let v = jet.e(mu, k);
                if f.depends_on(v) {
                    terms.push(Expr::var(jet.ep(mu, k, kappa)).mul(&f.diff(v)));
                }
            }
        }
        Expr::sum(terms)
    };
    for kappa in 0..m {
        let dxs: Vec<Expr> = (0..m).map(|s| total(x.comp(jet.x(s)), kappa)).collect();
        for nu in 0..m {
            for j in 0..m {
                let mut terms = vec![total(x.comp(jet.e(nu, j)), kappa)];
                for s in 0..m {
                    if !dxs[s].is_zero() {
                        terms.push(Expr::var(jet.ep(nu, j, s)).mul(&dxs[s]).neg());
                    }
                }
                out.set(jet.ep(nu, j, kappa), Expr::sum(terms));
            }
        }
    }
    out
}

/// (θ^i, (E^j_l)_{LM})^V = −e^i_ν e^μ_l ∂/∂e^μ_{jν}.
pub fn vertical_lift(jet: &JetChart, coframe: &[Vec<Expr>], i: usize, j: usize, l: usize) -> VectorField {
    let m = jet.m();
    let mut x = VectorField::zero(jet.chart());
    for mu in 0..m {
        for nu in 0..m {
            x.set(
                jet.ep(mu, j, nu),
                coframe[i][nu].mul(&Expr::var(jet.e(mu, l))).neg(),
            );
        }
    }
    x
}

/// σ^i_j = e^i_μ(de^μ_j + Ξ^μ_{σν} e^ν_j dx^σ) on LM.
pub fn background_form(jet: &JetChart, xi: &Connection) -> MatrixForm {
    let m = jet.m();
    let chart = jet.lm_chart();
    let co = matrix_inverse(&jet.vielbein());
    MatrixForm::from_fn(m, |i, j| {
        let mut acc = FormAcc::new(chart, 1);
        for mu in 0..m {
            acc.add_scaled(&DiffForm::dx(chart, jet.e(mu, j)), &co[i][mu]);
        }
        for s in 0..m {
            let c = Expr::sum((0..m).flat_map(|mu| (0..m).map(move |nu| (mu, nu))).map(|(mu, nu)| {
                co[i][mu].mul(&xi[mu][s][nu]).mul(&Expr::var(jet.e(nu, j)))
            }));
            acc.add_scaled(&DiffForm::dx(chart, jet.x(s)), &c);
        }
        acc.finish()
    })
}

/// The basis B of J¹τ.
pub struct BasisFields {
    jet: JetChart,
    xi: Connection,
    coframe: Vec<Vec<Expr>>,
    /// B(e_i) on LM.
    pub horiz_lm: Vec<VectorField>,
    /// (B(e_i))¹.
    pub horiz: Vec<VectorField>,
    /// (E^k_l)_{J¹τ} at index k·m + l.
    pub fund: Vec<VectorField>,
    /// (θ^i, (E^j_l)_{LM})^V at index (i·m + j)·m + l.
    pub vert: Vec<VectorField>,
}

impl BasisFields {
    pub fn build(jet: &JetChart, xi: &Connection) -> Result<BasisFields, String> {
        let m = jet.m();
        for mu in 0..m {
            for s in 0..m {
                for nu in s + 1..m {
                    let (a, b) = (&xi[mu][s][nu], &xi[mu][nu][s]);
                    let probes = [[0.13, -0.27, 0.31, 0.05, -0.11], [-0.4, 0.22, 0.07, -0.19, 0.36]];
                    let symmetric = a.ptr_eq(b)
                        || probes.iter().all(|p| match (a.eval(p), b.eval(p)) {
                            (Ok(x), Ok(y)) => (x - y).abs() <= 1e-12 * (1.0 + x.abs()),
                            _ => true,
                        });
                    if !symmetric {
                        return Err(format!("background connection has torsion in Ξ^{mu}_({s}{nu})"));
                    }
                }
            }
        }
        let coframe = matrix_inverse(&jet.vielbein());
        let horiz_lm: Vec<VectorField> = (0..m).map(|i| standard_horizontal(jet, xi, i)).collect();
        let horiz = horiz_lm.iter().map(|b| prolong(jet, b)).collect();
        let fund = (0..m * m)
            .map(|n| fundamental(jet, &elementary(m, n / m, n % m)))
            .collect();
        let mut vert = Vec::with_capacity(m * m * m);
        for i in 0..m {
            for j in 0..m {
                for l in 0..m {
                    vert.push(vertical_lift(jet, &coframe, i, j, l));
                }
            }
        }
        Ok(BasisFields {
            jet: jet.clone(),
            xi: xi.clone(),
            coframe,
            horiz_lm,
            horiz,
            fund,
            vert,
        })
    }

    pub fn jet(&self) -> &JetChart {
        &self.jet
    }

    pub fn xi(&self) -> &Connection {
        &self.xi
    }

    /// e^k_μ on the jet chart.
    pub fn coframe(&self) -> &[Vec<Expr>] {
        &self.coframe
    }

    pub fn fund(&self, k: usize, l: usize) -> &VectorField {
        &self.fund[k * self.jet.m() + l]
    }

    pub fn vert(&self, i: usize, j: usize, l: usize) -> &VectorField {
        let m = self.jet.m();
        &self.vert[(i * m + j) * m + l]
    }

    /// Basis in dual order: (B_a), (E^l_k) for ρ^k_l, (θ^r, E^q_p)^V for Ψ^p_{qr}.
    pub fn ordered(&self) -> Vec<&VectorField> {
        let m = self.jet.m();
        let mut out: Vec<&VectorField> = self.horiz.iter().collect();
        for k in 0..m {
            for l in 0..m {
                out.push(self.fund(l, k));
            }
        }
        for p in 0..m {
            for q in 0..m {
                for r in 0..m {
                    out.push(self.vert(r, q, p));
                }
            }
        }
        out
    }
}

/// C^k_{ji} = ω^k_j((B(e_i))¹), the derivatives D^l_{jki} = (B(e_i))¹·C^l_{jk},
/// and F^{pi}_{qjk} = (E^p_q)_{J¹τ}·C^i_{jk}.
pub struct DifferenceTensor {
    m: usize,
    closed: Vec<Expr>,
    contracted: Vec<Expr>,
    d: Vec<Expr>,
}

impl DifferenceTensor {
    pub fn build(forms: &CanonicalForms, basis: &BasisFields) -> DifferenceTensor {
        let m = forms.m();
        let jet = forms.jet();
        let co = forms.coframe();
        let xi = basis.xi();
        let mut closed = Vec::with_capacity(m * m * m);
        let mut contracted = Vec::with_capacity(m * m * m);
        for k in 0..m {
            for j in 0..m {
                for i in 0..m {
                    let c = Expr::sum((0..m).flat_map(|nu| (0..m).map(move |mu| (nu, mu))).map(
                        |(nu, mu)| {
                            let inner = Expr::sum(
                                std::iter::once(Expr::var(jet.ep(nu, j, mu))).chain(
                                    (0..m).map(|s| Expr::var(jet.e(s, j)).mul(&xi[nu][mu][s])),
                                ),
                            );
                            co[k][nu].mul(&Expr::var(jet.e(mu, i))).mul(&inner)
                        },
                    ));
                    closed.push(c.neg());
                    contracted.push(forms.omega().get(k, j).interior(&basis.horiz[i]).as_scalar());
                }
            }
        }
        let mut d = Vec::with_capacity(m.pow(4));
        for l in 0..m {
            for j in 0..m {
                for k in 0..m {
                    for i in 0..m {
                        d.push(basis.horiz[i].apply(&closed[(l * m + j) * m + k]));
                    }
                }
            }
        }
        DifferenceTensor {
            m,
            closed,
            contracted,
            d,
        }
    }

    pub fn m(&self) -> usize {
        self.m
    }

    /// C^k_{ji} from the closed coordinate formula
    /// −e^k_ν e^μ_i (e^ν_{jμ} + e^σ_j Ξ^ν_{μσ}).
    pub fn c(&self, k: usize, j: usize, i: usize) -> &Expr {
        &self.closed[(k * self.m + j) * self.m + i]
    }

    /// C^k_{ji} from the contraction ω^k_j((B(e_i))¹).
    pub fn c_contracted(&self, k: usize, j: usize, i: usize) -> &Expr {
        &self.contracted[(k * self.m + j) * self.m + i]
    }

    pub fn all(&self) -> &[Expr] {
        &self.closed
    }

    pub fn all_contracted(&self) -> &[Expr] {
        &self.contracted
    }

    /// D^l_{jki}.
    pub fn d(&self, l: usize, j: usize, k: usize, i: usize) -> &Expr {
        let m = self.m;
        &self.d[((l * m + j) * m + k) * m + i]
    }

    pub fn all_d(&self) -> &[Expr] {
        &self.d
    }

    /// F^{pi}_{qjk} = −δ^i_q C^p_{jk} + δ^p_j C^i_{qk} + δ^p_k C^i_{jq}.
    pub fn f(&self, p: usize, i: usize, q: usize, j: usize, k: usize) -> Expr {
        let mut terms = Vec::new();
        if i == q {
            terms.push(self.c(p, j, k).neg());
        }
        if p == j {
            terms.push(self.c(i, q, k).clone());
        }
        if p == k {
            terms.push(self.c(i, j, q).clone());
        }
        Expr::sum(terms)
    }

    /// F evaluated from numeric C values (indexed like `all`).
    pub fn f_values(m: usize, c: &[f64], p: usize, i: usize, q: usize, j: usize, k: usize) -> f64 {
        let at = |a: usize, b: usize, d: usize| c[(a * m + b) * m + d];
        let mut v = 0.0;
        if i == q {
            v -= at(p, j, k);
        }
        if p == j {
            v += at(i, q, k);
        }
        if p == k {
            v += at(i, j, q);
        }
        v
    }
}

/// θ^i, ρ^k_l = ω^k_l − C^k_{lp}θ^p and
/// Ψ^i_{jk} = dC^i_{jk} − F^{pi}_{qjk}ω^q_p − (D^i_{jkp} − F^{si}_{rjk}C^r_{sp})θ^p.
pub struct DualBasis {
    m: usize,
    pub theta: Vec<DiffForm>,
    pub rho: Vec<DiffForm>,
    pub psi: Vec<DiffForm>,
}

impl DualBasis {
    pub fn build(forms: &CanonicalForms, c: &DifferenceTensor) -> DualBasis {
        let m = forms.m();
        let chart = forms.chart();
        let theta: Vec<DiffForm> = (0..m).map(|i| forms.theta().get(i).clone()).collect();
        let mut rho = Vec::with_capacity(m * m);
        for k in 0..m {
            for l in 0..m {
                let mut acc = FormAcc::new(chart, 1);
                acc.add(forms.omega().get(k, l));
                for p in 0..m {
                    acc.add_scaled(&theta[p], &c.c(k, l, p).neg());
                }
                rho.push(acc.finish());
            }
        }
        let mut psi = Vec::with_capacity(m * m * m);
        for i in 0..m {
            for j in 0..m {
                for k in 0..m {
                    let mut acc = FormAcc::new(chart, 1);
                    acc.add(&DiffForm::scalar(chart, c.c(i, j, k).clone()).d());
                    for p in 0..m {
                        for q in 0..m {
                            let f = c.f(p, i, q, j, k);
                            if !f.is_zero() {
                                acc.add_scaled(forms.omega().get(q, p), &f.neg());
                            }
                        }
                    }
                    for p in 0..m {
                        let mut terms = vec![c.d(i, j, k, p).clone()];
                        for s in 0..m {
                            for r in 0..m {
                                let f = c.f(s, i, r, j, k);
                                if !f.is_zero() {
                                    terms.push(f.mul(c.c(r, s, p)).neg());
                                }
                            }
                        }
                        acc.add_scaled(&theta[p], &Expr::sum(terms).neg());
                    }
                    psi.push(acc.finish());
                }
            }
        }
        DualBasis {
            m,
            theta,
            rho,
            psi,
        }
    }

    /// Dual forms in pairing order: θ^a, ρ^k_l, Ψ^p_{qr}.
    pub fn ordered(&self) -> Vec<&DiffForm> {
        self.theta
            .iter()
            .chain(self.rho.iter())
            .chain(self.psi.iter())
            .collect()
    }

    pub fn psi(&self, i: usize, j: usize, k: usize) -> &DiffForm {
        &self.psi[(i * self.m + j) * self.m + k]
    }
}

/// Vector fields compiled for pointwise evaluation.
pub struct CompiledFields {
    tape: Tape,
    dim: usize,
}

impl CompiledFields {
    pub fn new(fields: &[&VectorField]) -> CompiledFields {
        let dim = fields.first().map(|f| f.chart().dim()).unwrap_or(0);
        let roots: Vec<Expr> = fields.iter().flat_map(|f| f.comps().iter().cloned()).collect();
        CompiledFields {
            tape: Tape::compile(&roots),
            dim,
        }
    }

    pub fn eval(&self, p: &[f64]) -> Result<Vec<Vec<f64>>, EvalError> {
        Ok(self
            .tape
            .eval(p)?
            .chunks(self.dim)
            .map(|c| c.to_vec())
            .collect())
    }
}

/// Pairs 1-form values with a vector.
pub fn pair(form: &FormValues, x: &[f64]) -> f64 {
    scalar_value(&interior_values(form, x))
}

/// α(X, Y) for an evaluated 2-form.
pub fn pair2(form: &FormValues, x: &[f64], y: &[f64]) -> f64 {
    scalar_value(&interior_values(&interior_values(form, x), y))
}

/// Largest entry of ⟨B*, B⟩ − I over the points. `rows` and `cols`
/// restrict the checked entries (all when `None`).
pub fn duality_residual(
    dual: &DualBasis,
    basis: &BasisFields,
    points: &[Vec<f64>],
    probe: Option<(&[usize], &[usize])>,
) -> Result<f64, EvalError> {
    let forms = dual.ordered();
    let fields = basis.ordered();
    let n = forms.len();
    let (rows, cols): (Vec<usize>, Vec<usize>) = match probe {
        Some((r, c)) => (r.to_vec(), c.to_vec()),
        None => ((0..n).collect(), (0..n).collect()),
    };
    let fsel: Vec<&DiffForm> = rows.iter().map(|&r| forms[r]).collect();
    let vsel: Vec<&VectorField> = cols.iter().map(|&c| fields[c]).collect();
    let cf = CompiledForms::new(&fsel);
    let cv = CompiledFields::new(&vsel);
    let per_point: Result<Vec<f64>, EvalError> = points
        .par_iter()
        .map(|p| {
            let fv = cf.eval(p)?;
            let vv = cv.eval(p)?;
            let mut worst: f64 = 0.0;
            for (a, &r) in rows.iter().enumerate() {
                for (b, &c) in cols.iter().enumerate() {
                    let expect = delta(r, c);
                    worst = worst.max((pair(&fv[a], &vv[b]) - expect).abs());
                }
            }
            Ok(worst)
        })
        .collect();
    Ok(per_point?.into_iter().fold(0.0, f64::max))
}


/// Contractions of Ω and T with the basis, as 1-forms on every coordinate
/// differential, plus the pairwise scalar tables.
///
/// With X⌟α = α(X, ·):
/// - (B_i)¹⌟Ω^k_l = [D^k_{lji} − D^k_{lij} + R^k_l(B_i, B_j) + C^k_{pi}C^p_{lj} − C^k_{pj}C^p_{li}]θ^j − Ψ^k_{li}
/// - A*⌟Ω = 0, A*⌟T = 0, V⌟T = 0
/// - (θ^r, E^k_l)^V⌟Ω^q_p = δ^k_p δ^q_l θ^r
/// - (B_i)¹⌟T^k = (C^k_{ji} − C^k_{ij})θ^j
pub fn contraction_residuals(
    forms: &CanonicalForms,
    basis: &BasisFields,
    c: &DifferenceTensor,
    dual: &DualBasis,
    points: &[Vec<f64>],
) -> Result<Residuals, EvalError> {
    let m = forms.m();
    let jet = forms.jet();
    let sigma = background_form(jet, basis.xi());
    let r_form = sigma.d().add(&sigma.wedge(&sigma));
    let domega = forms.omega().d();

    let mut list: Vec<&DiffForm> = Vec::new();
    list.extend(forms.curvature().entries());
    list.extend(forms.torsion().entries());
    list.extend(dual.theta.iter());
    list.extend(dual.psi.iter());
    list.extend(domega.entries());
    let cf = CompiledForms::new(&list);
    let r_list: Vec<&DiffForm> = r_form.entries().iter().collect();
    let cr = CompiledForms::new(&r_list);
    let fields: Vec<&VectorField> = basis
        .horiz
        .iter()
        .chain(basis.fund.iter())
        .chain(basis.vert.iter())
        .collect();
    let cv = CompiledFields::new(&fields);
    let lm_fields: Vec<&VectorField> = basis.horiz_lm.iter().collect();
    let clm = CompiledFields::new(&lm_fields);
    let mut scalars: Vec<Expr> = c.all().to_vec();
    scalars.extend_from_slice(c.all_d());
    let cs = Tape::compile(&scalars);

    let per_point: Result<Vec<Residuals>, EvalError> = points
        .par_iter()
        .map(|p| {
            let mut out = Residuals::new();
            let v = cf.eval(p)?;
            let lm_dim = jet.lm_chart().dim();
            let rv = cr.eval(&p[..lm_dim])?;
            let fv = cv.eval(p)?;
            let blm = clm.eval(&p[..lm_dim])?;
            let sv = cs.eval(p)?;
            let (cv_, dv) = sv.split_at(m * m * m);
            let cc = |k: usize, j: usize, i: usize| cv_[(k * m + j) * m + i];
            let dd = |l: usize, j: usize, k: usize, i: usize| dv[((l * m + j) * m + k) * m + i];
            let om = |k: usize, l: usize| &v[k * m + l];
            let tor = |k: usize| &v[m * m + k];
            let th = |k: usize| &v[m * m + m + k];
            let psi = |i: usize, j: usize, k: usize| &v[m * m + 2 * m + (i * m + j) * m + k];
            let dom = |k: usize, l: usize| &v[m * m + 2 * m + m * m * m + k * m + l];
            let hz = |i: usize| &fv[i];
            let fd = |k: usize, l: usize| &fv[m + k * m + l];
            let vt = |i: usize, j: usize, l: usize| &fv[m + m * m + (i * m + j) * m + l];
            let rr = |k: usize, l: usize, i: usize, j: usize| pair2(&rv[k * m + l], &blm[i], &blm[j]);

            for i in 0..m {
                for k in 0..m {
                    for l in 0..m {
                        let lhs = interior_values(om(k, l), hz(i));
                        let mut parts: Vec<(f64, &FormValues)> = Vec::new();
                        let coefs: Vec<f64> = (0..m)
                            .map(|j| {
                                let mut s = dd(k, l, j, i) - dd(k, l, i, j) + rr(k, l, i, j);
                                for q in 0..m {
                                    s += cc(k, q, i) * cc(q, l, j) - cc(k, q, j) * cc(q, l, i);
                                }
                                s
                            })
                            .collect();
                        for j in 0..m {
                            parts.push((coefs[j], th(j)));
                        }
                        parts.push((-1.0, psi(k, l, i)));
                        let rhs = combine_values(&parts);
                        bump(&mut out, "horizontal.curvature", values_residual(&lhs, &rhs));
                    }
                }
                for k in 0..m {
                    let lhs = interior_values(tor(k), hz(i));
                    let parts: Vec<(f64, &FormValues)> =
                        (0..m).map(|j| (cc(k, j, i) - cc(k, i, j), th(j))).collect();
                    let rhs = combine_values(&parts);
                    bump(&mut out, "horizontal.torsion", values_residual(&lhs, &rhs));
                }
            }
            for a in 0..m {
                for b in 0..m {
                    for k in 0..m {
                        for l in 0..m {
                            let x = interior_values(om(k, l), fd(a, b));
                            bump(&mut out, "fundamental.curvature", values_max_abs(&x));
                        }
                        let x = interior_values(tor(k), fd(a, b));
                        bump(&mut out, "fundamental.torsion", values_max_abs(&x));
                    }
                }
            }
            for r in 0..m {
                for k in 0..m {
                    for l in 0..m {
                        for q in 0..m {
                            for pp in 0..m {
                                let lhs = interior_values(om(q, pp), vt(r, k, l));
                                let s = delta(k, pp) * delta(q, l);
                                let rhs = combine_values(&[(s, th(r))]);
                                bump(&mut out, "vertical.curvature", values_residual(&lhs, &rhs));
                            }
                            let x = interior_values(tor(q), vt(r, k, l));
                            bump(&mut out, "vertical.torsion", values_max_abs(&x));
                        }
                    }
                }
            }

            // Pairwise scalar tables.
            for i in 0..m {
                for j in 0..m {
                    for k in 0..m {
                        for l in 0..m {
                            let mut expect = dd(k, l, j, i) - dd(k, l, i, j) + rr(k, l, i, j);
                            for q in 0..m {
                                expect += cc(k, q, i) * cc(q, l, j) - cc(k, q, j) * cc(q, l, i);
                            }
                            let got = pair2(om(k, l), hz(i), hz(j));
                            bump(&mut out, "table.curvature.horizontal", (got - expect).abs());
                        }
                        let got = pair2(tor(k), hz(i), hz(j));
                        bump(&mut out, "table.torsion.horizontal", (got - (cc(k, j, i) - cc(k, i, j))).abs());
                    }
                }
            }
            for i in 0..m {
                for j in 0..m {
                    for k in 0..m {
                        for l in 0..m {
                            for q in 0..m {
                                for pp in 0..m {
                                    let expect = delta(k, j) * delta(i, pp) * delta(q, l)
                                        - delta(i, l) * delta(k, pp) * delta(q, j);
                                    let got = pair2(dom(q, pp), fd(i, j), fd(k, l));
                                    bump(&mut out, "table.domega.fundamental", (got - expect).abs());
                                    let got = pair2(om(q, pp), fd(i, j), fd(k, l));
                                    bump(&mut out, "table.curvature.fundamental", got.abs());
                                }
                            }
                        }
                    }
                }
            }
            for i in 0..m {
                for j in 0..m {
                    for pp in 0..m {
                        for q in 0..m {
                            for k in 0..m {
                                for l in 0..m {
                                    let expect = -delta(j, i) * delta(pp, l) * delta(k, q);
                                    let got = pair2(om(k, l), hz(i), vt(j, pp, q));
                                    bump(&mut out, "table.curvature.horizontal_vertical", (got - expect).abs());
                                }
                            }
                        }
                    }
                }
            }
            Ok(out)
        })
        .collect();
    let mut out = Residuals::new();
    for r in per_point? {
        for (n, v) in r {
            bump(&mut out, &n, v);
        }
    }
    Ok(out)
}

/// |C(closed) − C(contraction)|, |A*·C − F(A)| for all E^p_q, and the
/// type-ρ law C(u·g)^k_{ji} = (g⁻¹)^k_a C(u)^a_{bc} g^b_j g^c_i.
pub fn difference_residuals(
    basis: &BasisFields,
    c: &DifferenceTensor,
    points: &[Vec<f64>],
    groups: &[DMatrix<f64>],
) -> Result<Residuals, EvalError> {
    let m = c.m();
    let jet = basis.jet();
    let mut roots: Vec<Expr> = c.all().to_vec();
    roots.extend_from_slice(c.all_contracted());
    for p in 0..m {
        for q in 0..m {
            for e in c.all() {
                roots.push(basis.fund(p, q).apply(e));
            }
        }
    }
    let tape = Tape::compile(&roots);
    let n3 = m * m * m;
    let ctape = Tape::compile(c.all());
    let per_point: Result<Vec<Residuals>, EvalError> = points
        .par_iter()
        .map(|pt| {
            let mut out = Residuals::new();
            let v = tape.eval(pt)?;
            let (closed, rest) = v.split_at(n3);
            let (contracted, gens) = rest.split_at(n3);
            for a in 0..n3 {
                bump(&mut out, "c.closed_vs_contraction", (closed[a] - contracted[a]).abs());
            }
            for p in 0..m {
                for q in 0..m {
                    for i in 0..m {
                        for j in 0..m {
                            for k in 0..m {
                                let got = gens[(p * m + q) * n3 + (i * m + j) * m + k];
                                let expect = DifferenceTensor::f_values(m, closed, p, i, q, j, k);
                                bump(&mut out, "c.infinitesimal_generator", (got - expect).abs());
                            }
                        }
                    }
                }
            }
            for g in groups {
                let moved = jet.act(pt, g);
                let cm = ctape.eval(&moved)?;
                let gi = g.clone().try_inverse().expect("invertible group element");
                for k in 0..m {
                    for j in 0..m {
                        for i in 0..m {
                            let mut s = 0.0;
                            for a in 0..m {
                                for b in 0..m {
                                    for cidx in 0..m {
                                        s += gi[(k, a)] * closed[(a * m + b) * m + cidx] * g[(b, j)] * g[(cidx, i)];
                                    }
                                }
                            }
                            bump(&mut out, "c.type_rho", (cm[(k * m + j) * m + i] - s).abs());
                        }
                    }
                }
            }
            Ok(out)
        })
        .collect();
    let mut out = Residuals::new();
    for r in per_point? {
        for (n, v) in r {
            bump(&mut out, &n, v);
        }
    }
    Ok(out)
}

fn field_residual(a: &VectorField, b: &VectorField, points: &[Vec<f64>]) -> Result<f64, EvalError> {
    let cv = CompiledFields::new(&[a, b]);
    let mut worst: f64 = 0.0;
    for p in points {
        let v = cv.eval(p)?;
        for (x, y) in v[0].iter().zip(&v[1]) {
            worst = worst.max((x - y).abs());
        }
    }
    Ok(worst)
}

fn field_max_abs(a: &VectorField, points: &[Vec<f64>], range: std::ops::Range<usize>) -> Result<f64, EvalError> {
    let tape = Tape::compile(&a.comps()[range]);
    let mut worst: f64 = 0.0;
    for p in points {
        for v in tape.eval(p)? {
            worst = worst.max(v.abs());
        }
    }
    Ok(worst)
}

/// Brackets and horizontality of the basis:
/// σ(B_i) = 0, θ(B_i) = e_i, [B_i, (E^p_q)*] = −δ^p_i B_q,
/// [B_i, B_j] = −(R(B_i, B_j))*, prolongation of fundamental fields,
/// [X¹, Y¹] = [X, Y]¹ for the given LM fields, [V, V'] = 0 and [X¹, V] τ₁₀-vertical.
pub fn bracket_residuals(
    forms: &CanonicalForms,
    basis: &BasisFields,
    extra_lm: &[VectorField],
    points: &[Vec<f64>],
) -> Result<Residuals, EvalError> {
    let m = forms.m();
    let jet = forms.jet();
    let lm_dim = jet.lm_chart().dim();
    let lm_points: Vec<Vec<f64>> = points.iter().map(|p| p[..lm_dim].to_vec()).collect();
    let mut out = Residuals::new();
    let sigma = background_form(jet, basis.xi());
    let r_form = sigma.d().add(&sigma.wedge(&sigma));

    let theta_lm: Vec<DiffForm> = (0..m)
        .map(|k| {
            let co = matrix_inverse(&jet.vielbein());
            let mut acc = FormAcc::new(jet.lm_chart(), 1);
            for mu in 0..m {
                acc.add_scaled(&DiffForm::dx(jet.lm_chart(), jet.x(mu)), &co[k][mu]);
            }
            acc.finish()
        })
        .collect();
    for i in 0..m {
        let b = &basis.horiz_lm[i];
        let mut exprs = Vec::new();
        for k in 0..m {
            for l in 0..m {
                exprs.push(sigma.get(k, l).interior(b).as_scalar());
            }
        }
        let tape = Tape::compile(&exprs);
        let th: Vec<Expr> = (0..m).map(|k| theta_lm[k].interior(b).as_scalar()).collect();
        let tt = Tape::compile(&th);
        for p in &lm_points {
            for v in tape.eval(p)? {
                bump(&mut out, "horizontal.sigma", v.abs());
            }
            for (k, v) in tt.eval(p)?.into_iter().enumerate() {
                bump(&mut out, "horizontal.projection", (v - delta(k, i)).abs());
            }
        }
    }

    for i in 0..m {
        for p in 0..m {
            for q in 0..m {
                let e = fundamental_lm(jet, &const_matrix(&elementary(m, p, q)));
                let lhs = basis.horiz_lm[i].bracket(&e);
                let rhs = if p == i {
                    basis.horiz_lm[q].scale(-1.0)
                } else {
                    VectorField::zero(jet.lm_chart())
                };
                bump(&mut out, "bracket.horizontal_fundamental", field_residual(&lhs, &rhs, &lm_points)?);
            }
        }
    }

    for i in 0..m {
        for j in i + 1..m {
            let lhs = basis.horiz_lm[i].bracket(&basis.horiz_lm[j]);
            let a: Vec<Vec<Expr>> = (0..m)
                .map(|k| {
                    (0..m)
                        .map(|l| {
                            r_form
                                .get(k, l)
                                .interior(&basis.horiz_lm[i])
                                .interior(&basis.horiz_lm[j])
                                .as_scalar()
                        })
                        .collect()
                })
                .collect();
            let rhs = fundamental_lm(jet, &a).scale(-1.0);
            bump(&mut out, "bracket.horizontal_horizontal", field_residual(&lhs, &rhs, &lm_points)?);
        }
    }

    for k in 0..m {
        for l in 0..m {
            let e = fundamental_lm(jet, &const_matrix(&elementary(m, k, l)));
            let pr = prolong(jet, &e);
            bump(&mut out, "prolongation.fundamental", field_residual(&pr, basis.fund(k, l), points)?);
        }
    }

    for (a, x) in extra_lm.iter().enumerate() {
        for y in &extra_lm[a + 1..] {
            let lhs = prolong(jet, x).bracket(&prolong(jet, y));
            let rhs = prolong(jet, &x.bracket(y));
            bump(&mut out, "prolongation.bracket", field_residual(&lhs, &rhs, points)?);
        }
    }

    let nv = basis.vert.len();
    let picks = [0, nv / 3, nv / 2, nv - 1];
    for &a in &picks {
        for &b in &picks {
            let br = basis.vert[a].bracket(&basis.vert[b]);
            bump(&mut out, "bracket.vertical_vertical", field_max_abs(&br, points, 0..jet.dim())?);
        }
        for x in basis.horiz.iter().chain(basis.fund.iter().take(m)) {
            let br = x.bracket(&basis.vert[a]);
            bump(&mut out, "bracket.lift_vertical", field_max_abs(&br, points, 0..lm_dim)?);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chart::Chart;
    use crate::lie::Eta;
    use crate::sampling::Sampler;
    use crate::sections::random_connection;

    #[test]
    fn flat_horizontal_is_coordinate_field() {
        let jet = JetChart::new(3);
        let xi = vec![vec![vec![Expr::zero(); 3]; 3]; 3];
        let b = standard_horizontal(&jet, &xi, 1);
        let mut p = vec![0.0; jet.lm_chart().dim()];
        for k in 0..3 {
            p[jet.e(k, k)] = 1.0;
        }
        let v: Vec<f64> = b.comps().iter().map(|c| c.eval(&p).unwrap()).collect();
        let mut expect = vec![0.0; v.len()];
        expect[1] = 1.0;
        assert_eq!(v, expect);
    }

    #[test]
    fn prolong_coordinate_field() {
        let jet = JetChart::new(2);
        let x = VectorField::coordinate(jet.lm_chart(), 0);
        let p = prolong(&jet, &x);
        for (i, c) in p.comps().iter().enumerate() {
            assert_eq!(c.as_const(), Some(if i == 0 { 1.0 } else { 0.0 }));
        }
    }

    #[test]
    fn flat_difference_tensor_vanishes() {
        let jet = JetChart::new(2);
        let cf = CanonicalForms::build(&jet, &Eta::euclidean(2)).unwrap();
        let xi = vec![vec![vec![Expr::zero(); 2]; 2]; 2];
        let basis = BasisFields::build(&jet, &xi).unwrap();
        let c = DifferenceTensor::build(&cf, &basis);
        let mut p = Sampler::new(2).jet_point(2, 0);
        for v in &mut p[jet.ep(0, 0, 0)..] {
            *v = 0.0;
        }
        for e in c.all() {
            assert_eq!(e.eval(&p).unwrap(), 0.0);
        }
    }

    #[test]
    fn torsion_in_background_is_rejected() {
        let jet = JetChart::new(2);
        let _ = Chart::euclidean("x", 2);
        let xi = random_connection(2, &mut Sampler::new(1), false, 0.3);
        assert!(BasisFields::build(&jet, &xi).is_err());
    }
}
