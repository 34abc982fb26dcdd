//! Expression graphs with exact symbolic partial derivatives.
//!
//! An [`Expr`] is an immutable, reference-counted DAG over chart coordinates.
//! Derivatives are built lazily and memoized on each node, so repeated
//! differentiation of shared subexpressions stays linear in the graph size.
//! Numeric evaluation goes through a [`Tape`], a flattened instruction list
//! that is compiled once and evaluated at many points.

use rustc_hash::FxHashMap;
use std::fmt;
use std::sync::{Arc, LazyLock, Mutex};

/// Elementary functions understood by the graph.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Func {
    Sqrt,
    Sin,
    Cos,
    Tan,
    Exp,
    Ln,
}

impl Func {
    pub fn name(self) -> &'static str {
        match self {
            Func::Sqrt => "sqrt",
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Tan => "tan",
            Func::Exp => "exp",
            Func::Ln => "ln",
        }
    }

    fn apply(self, x: f64) -> f64 {
        match self {
            Func::Sqrt => x.sqrt(),
            Func::Sin => x.sin(),
            Func::Cos => x.cos(),
            Func::Tan => x.tan(),
            Func::Exp => x.exp(),
            Func::Ln => x.ln(),
        }
    }
}

/// Why a numeric evaluation failed.
#[derive(Clone, Debug, PartialEq)]
pub enum DomainKind {
    DivisionByZero,
    NegativeSqrt,
    NonPositiveLog,
    NegativePowerBase,
    NonFinite(&'static str),
}

impl fmt::Display for DomainKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DomainKind::DivisionByZero => write!(f, "division by zero"),
            DomainKind::NegativeSqrt => write!(f, "square root of a negative number"),
            DomainKind::NonPositiveLog => write!(f, "logarithm of a non-positive number"),
            DomainKind::NegativePowerBase => {
                write!(f, "non-integer power of a negative number")
            }
            DomainKind::NonFinite(op) => write!(f, "non-finite result in {op}"),
        }
    }
}

/// A domain error together with the coordinate values where it occurred.
#[derive(Clone, Debug, PartialEq, thiserror::Error)]
#[error("{kind} at point {point:?}")]
pub struct EvalError {
    pub kind: DomainKind,
    pub point: Vec<f64>,
}

enum Op {
    Const(f64),
    Var(u32),
    Sum(Box<[Expr]>),
    Mul(Expr, Expr),
    Scale(f64, Expr),
    Div(Expr, Expr),
    Powi(Expr, i32),
    Powf(Expr, Expr),
    Func(Func, Expr),
}

struct Node {
    op: Op,
    support: Box<[u32]>,
    derivs: Mutex<Option<Box<[Option<Expr>]>>>,
}

/// Immutable expression over coordinate indices.
#[derive(Clone)]
pub struct Expr(Arc<Node>);

static ZERO: LazyLock<Expr> = LazyLock::new(|| Expr::raw(Op::Const(0.0), Box::new([])));
static ONE: LazyLock<Expr> = LazyLock::new(|| Expr::raw(Op::Const(1.0), Box::new([])));

fn merge_support(a: &[u32], b: &[u32]) -> Box<[u32]> {
    if a.is_empty() {
        return b.into();
    }
    if b.is_empty() || a == b {
        return a.into();
    }
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => {
                out.push(a[i]);
                i += 1;
            }
            std::cmp::Ordering::Greater => {
                out.push(b[j]);
                j += 1;
            }
            std::cmp::Ordering::Equal => {
                out.push(a[i]);
                i += 1;
                j += 1;
            }
        }
    }
    out.extend_from_slice(&a[i..]);
    out.extend_from_slice(&b[j..]);
    out.into_boxed_slice()
}

impl Expr {
    fn raw(op: Op, support: Box<[u32]>) -> Expr {
        Expr(Arc::new(Node {
            op,
            support,
            derivs: Mutex::new(None),
        }))
    }

    pub fn zero() -> Expr {
        ZERO.clone()
    }

    pub fn one() -> Expr {
        ONE.clone()
    }

    pub fn constant(c: f64) -> Expr {
        if c == 0.0 {
            Expr::zero()
        } else if c == 1.0 {
            Expr::one()
        } else {
            Expr::raw(Op::Const(c), Box::new([]))
        }
    }

    pub fn var(index: usize) -> Expr {
        let i = index as u32;
        Expr::raw(Op::Var(i), Box::new([i]))
    }

    /// Sorted coordinate indices this expression depends on.
    pub fn support(&self) -> &[u32] {
        &self.0.support
    }

    pub fn depends_on(&self, var: usize) -> bool {
        self.0.support.binary_search(&(var as u32)).is_ok()
    }

    pub fn as_const(&self) -> Option<f64> {
        match self.0.op {
            Op::Const(c) => Some(c),
            _ => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.as_const() == Some(0.0)
    }

    pub fn is_one(&self) -> bool {
        self.as_const() == Some(1.0)
    }

    pub fn ptr_eq(&self, other: &Expr) -> bool {
        Arc::ptr_eq(&self.0, &other.0)
    }

    fn key(&self) -> usize {
        Arc::as_ptr(&self.0) as usize
    }

    /// N-ary sum; zero terms are dropped and constants folded.
    pub fn sum<I: IntoIterator<Item = Expr>>(terms: I) -> Expr {
        let mut constant = 0.0;
        let mut rest: Vec<Expr> = Vec::new();
        for t in terms {
            match t.0.op {
                Op::Const(c) => constant += c,
                _ => rest.push(t),
            }
        }
        if constant != 0.0 {
            rest.push(Expr::constant(constant));
        }
        match rest.len() {
            0 => Expr::zero(),
            1 => rest.pop().unwrap(),
            _ => {
                let mut support: Box<[u32]> = Box::new([]);
                for t in &rest {
                    support = merge_support(&support, t.support());
                }
                Expr::raw(Op::Sum(rest.into_boxed_slice()), support)
            }
        }
    }

    pub fn scale(&self, c: f64) -> Expr {
        if c == 0.0 || self.is_zero() {
            return Expr::zero();
        }
        if c == 1.0 {
            return self.clone();
        }
        match &self.0.op {
            Op::Const(a) => Expr::constant(a * c),
            Op::Scale(a, inner) => inner.scale(a * c),
            _ => Expr::raw(Op::Scale(c, self.clone()), self.0.support.clone()),
        }
    }

    pub fn mul(&self, other: &Expr) -> Expr {
        if let Some(a) = self.as_const() {
            return other.scale(a);
        }
        if let Some(b) = other.as_const() {
            return self.scale(b);
        }
        if let Op::Scale(a, inner) = &self.0.op {
            return inner.mul(other).scale(*a);
        }
        if let Op::Scale(b, inner) = &other.0.op {
            return self.mul(inner).scale(*b);
        }
        let support = merge_support(self.support(), other.support());
        Expr::raw(Op::Mul(self.clone(), other.clone()), support)
    }

    pub fn add(&self, other: &Expr) -> Expr {
        if self.is_zero() {
            return other.clone();
        }
        if other.is_zero() {
            return self.clone();
        }
        Expr::sum([self.clone(), other.clone()])
    }

    pub fn sub(&self, other: &Expr) -> Expr {
        self.add(&other.scale(-1.0))
    }

    pub fn neg(&self) -> Expr {
        self.scale(-1.0)
    }

    pub fn div(&self, other: &Expr) -> Expr {
        if self.is_zero() {
            return Expr::zero();
        }
        if let Some(b) = other.as_const() {
            if b != 0.0 {
                return self.scale(1.0 / b);
            }
        }
        let support = merge_support(self.support(), other.support());
        Expr::raw(Op::Div(self.clone(), other.clone()), support)
    }

    pub fn recip(&self) -> Expr {
        Expr::one().div(self)
    }

    pub fn powi(&self, n: i32) -> Expr {
        match n {
            0 => Expr::one(),
            1 => self.clone(),
            _ => {
                if let Some(c) = self.as_const() {
                    return Expr::constant(c.powi(n));
                }
                Expr::raw(Op::Powi(self.clone(), n), self.0.support.clone())
            }
        }
    }

    /// General power. Integer constant exponents are routed to [`Expr::powi`].
    pub fn pow(&self, exponent: &Expr) -> Expr {
        if let Some(e) = exponent.as_const() {
            if e.fract() == 0.0 && e.abs() <= i32::MAX as f64 {
                return self.powi(e as i32);
            }
            if let Some(b) = self.as_const() {
                if b >= 0.0 {
                    return Expr::constant(b.powf(e));
                }
            }
        }
        let support = merge_support(self.support(), exponent.support());
        Expr::raw(Op::Powf(self.clone(), exponent.clone()), support)
    }

    pub fn apply(&self, f: Func) -> Expr {
        if let Some(c) = self.as_const() {
            let v = f.apply(c);
            if v.is_finite() {
                return Expr::constant(v);
            }
        }
        Expr::raw(Op::Func(f, self.clone()), self.0.support.clone())
    }

    pub fn sqrt(&self) -> Expr {
        self.apply(Func::Sqrt)
    }

    pub fn sin(&self) -> Expr {
        self.apply(Func::Sin)
    }

    pub fn cos(&self) -> Expr {
        self.apply(Func::Cos)
    }

    pub fn exp(&self) -> Expr {
        self.apply(Func::Exp)
    }

    pub fn ln(&self) -> Expr {
        self.apply(Func::Ln)
    }

    /// Exact partial derivative with respect to coordinate `var`.
    pub fn diff(&self, var: usize) -> Expr {
        let v = var as u32;
        let slot = match self.0.support.binary_search(&v) {
            Ok(slot) => slot,
            Err(_) => return Expr::zero(),
        };
        {
            let guard = self.0.derivs.lock().unwrap();
            if let Some(cache) = guard.as_ref() {
                if let Some(d) = &cache[slot] {
                    return d.clone();
                }
            }
        }
        let d = self.diff_uncached(var);
        let mut guard = self.0.derivs.lock().unwrap();
        let cache =
            guard.get_or_insert_with(|| vec![None; self.0.support.len()].into_boxed_slice());
        cache[slot].get_or_insert(d).clone()
    }

    /// Second partial with a canonical variable order, so the result is
    /// symmetric in its arguments by construction.
    pub fn diff2(&self, a: usize, b: usize) -> Expr {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        self.diff(lo).diff(hi)
    }

    fn diff_uncached(&self, var: usize) -> Expr {
        match &self.0.op {
            Op::Const(_) => Expr::zero(),
            Op::Var(i) => {
                if *i as usize == var {
                    Expr::one()
                } else {
                    Expr::zero()
                }
            }
            Op::Sum(terms) => Expr::sum(
                terms
                    .iter()
                    .filter(|t| t.depends_on(var))
                    .map(|t| t.diff(var)),
            ),
            Op::Mul(a, b) => {
                let da = a.diff(var);
                let db = b.diff(var);
                da.mul(b).add(&a.mul(&db))
            }
            Op::Scale(c, a) => a.diff(var).scale(*c),
            Op::Div(a, b) => {
                let da = a.diff(var);
                let db = b.diff(var);
                da.sub(&self.mul(&db)).div(b)
            }
            Op::Powi(a, n) => a.powi(n - 1).mul(&a.diff(var)).scale(*n as f64),
            Op::Powf(a, e) => {
                if let Some(c) = e.as_const() {
                    a.pow(&Expr::constant(c - 1.0))
                        .mul(&a.diff(var))
                        .scale(c)
                } else {
                    let term = e
                        .diff(var)
                        .mul(&a.ln())
                        .add(&e.mul(&a.diff(var)).div(a));
                    self.mul(&term)
                }
            }
            Op::Func(f, a) => {
                let da = a.diff(var);
                let outer = match f {
                    Func::Sqrt => return da.div(self).scale(0.5),
                    Func::Sin => a.cos(),
                    Func::Cos => a.sin().neg(),
                    Func::Tan => Expr::one().add(&self.powi(2)),
                    Func::Exp => self.clone(),
                    Func::Ln => return da.div(a),
                };
                outer.mul(&da)
            }
        }
    }

    /// Replaces every variable `i` by `subs[i]`, sharing work through `memo`.
    pub fn substitute(&self, subs: &[Expr], memo: &mut FxHashMap<usize, Expr>) -> Expr {
        if self.0.support.is_empty() {
            return self.clone();
        }
        if let Some(e) = memo.get(&self.key()) {
            return e.clone();
        }
        let out = match &self.0.op {
            Op::Const(_) => self.clone(),
            Op::Var(i) => subs[*i as usize].clone(),
            Op::Sum(terms) => Expr::sum(terms.iter().map(|t| t.substitute(subs, memo))),
            Op::Mul(a, b) => a.substitute(subs, memo).mul(&b.substitute(subs, memo)),
            Op::Scale(c, a) => a.substitute(subs, memo).scale(*c),
            Op::Div(a, b) => a.substitute(subs, memo).div(&b.substitute(subs, memo)),
            Op::Powi(a, n) => a.substitute(subs, memo).powi(*n),
            Op::Powf(a, e) => a.substitute(subs, memo).pow(&e.substitute(subs, memo)),
            Op::Func(f, a) => a.substitute(subs, memo).apply(*f),
        };
        memo.insert(self.key(), out.clone());
        out
    }

    /// Convenience single-point evaluation.
    pub fn eval(&self, point: &[f64]) -> Result<f64, EvalError> {
        let tape = Tape::compile(std::slice::from_ref(self));
        let mut out = [0.0];
        tape.eval_into(point, &mut Vec::new(), &mut out)?;
        Ok(out[0])
    }

    /// Number of distinct nodes reachable from this expression.
    pub fn node_count(&self) -> usize {
        Tape::compile(std::slice::from_ref(self)).len()
    }
}

macro_rules! binop {
    ($trait:ident, $method:ident, $impl_fn:ident) => {
        impl std::ops::$trait<&Expr> for &Expr {
            type Output = Expr;
            fn $method(self, rhs: &Expr) -> Expr {
                Expr::$impl_fn(self, rhs)
            }
        }
        impl std::ops::$trait<Expr> for Expr {
            type Output = Expr;
            fn $method(self, rhs: Expr) -> Expr {
                Expr::$impl_fn(&self, &rhs)
            }
        }
        impl std::ops::$trait<&Expr> for Expr {
            type Output = Expr;
            fn $method(self, rhs: &Expr) -> Expr {
                Expr::$impl_fn(&self, rhs)
            }
        }
        impl std::ops::$trait<Expr> for &Expr {
            type Output = Expr;
            fn $method(self, rhs: Expr) -> Expr {
                Expr::$impl_fn(self, &rhs)
            }
        }
    };
}

binop!(Add, add, add);
binop!(Sub, sub, sub);
binop!(Mul, mul, mul);
binop!(Div, div, div);

impl std::ops::Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr::neg(&self)
    }
}

impl std::ops::Neg for &Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr::neg(self)
    }
}

impl From<f64> for Expr {
    fn from(c: f64) -> Expr {
        Expr::constant(c)
    }
}

impl fmt::Debug for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.0.op {
            Op::Const(c) => write!(f, "{c}"),
            Op::Var(i) => write!(f, "x{i}"),
            Op::Sum(ts) => {
                write!(f, "(")?;
                for (k, t) in ts.iter().enumerate() {
                    if k > 0 {
                        write!(f, " + ")?;
                    }
                    write!(f, "{t:?}")?;
                }
                write!(f, ")")
            }
            Op::Mul(a, b) => write!(f, "{a:?}*{b:?}"),
            Op::Scale(c, a) => write!(f, "{c}*{a:?}"),
            Op::Div(a, b) => write!(f, "({a:?})/({b:?})"),
            Op::Powi(a, n) => write!(f, "({a:?})^{n}"),
            Op::Powf(a, e) => write!(f, "({a:?})^({e:?})"),
            Op::Func(g, a) => write!(f, "{}({a:?})", g.name()),
        }
    }
}

#[derive(Clone, Copy)]
enum Instr {
    Const(f64),
    Var(u32),
    Sum { start: u32, len: u32 },
    Mul(u32, u32),
    Scale(f64, u32),
    Div(u32, u32),
    Powi(u32, i32),
    Powf(u32, u32),
    Func(Func, u32),
}

/// A compiled list of expressions, evaluated in topological order.
#[derive(Clone)]
pub struct Tape {
    instrs: Vec<Instr>,
    args: Vec<u32>,
    outputs: Vec<u32>,
}

impl Tape {
    pub fn compile(roots: &[Expr]) -> Tape {
        let mut tape = Tape {
            instrs: Vec::new(),
            args: Vec::new(),
            outputs: Vec::with_capacity(roots.len()),
        };
        let mut seen: FxHashMap<usize, u32> = FxHashMap::default();
        for r in roots {
            let slot = tape.visit(r, &mut seen);
            tape.outputs.push(slot);
        }
        tape
    }

    fn visit(&mut self, e: &Expr, seen: &mut FxHashMap<usize, u32>) -> u32 {
        if let Some(&slot) = seen.get(&e.key()) {
            return slot;
        }
        let instr = match &e.0.op {
            Op::Const(c) => Instr::Const(*c),
            Op::Var(i) => Instr::Var(*i),
            Op::Sum(terms) => {
                let slots: Vec<u32> = terms.iter().map(|t| self.visit(t, seen)).collect();
                let start = self.args.len() as u32;
                self.args.extend_from_slice(&slots);
                Instr::Sum {
                    start,
                    len: slots.len() as u32,
                }
            }
            Op::Mul(a, b) => {
                let a = self.visit(a, seen);
                Instr::Mul(a, self.visit(b, seen))
            }
            Op::Scale(c, a) => Instr::Scale(*c, self.visit(a, seen)),
            Op::Div(a, b) => {
                let a = self.visit(a, seen);
                Instr::Div(a, self.visit(b, seen))
            }
            Op::Powi(a, n) => Instr::Powi(self.visit(a, seen), *n),
            Op::Powf(a, b) => {
                let a = self.visit(a, seen);
                Instr::Powf(a, self.visit(b, seen))
            }
            Op::Func(f, a) => Instr::Func(*f, self.visit(a, seen)),
        };
        let slot = self.instrs.len() as u32;
        self.instrs.push(instr);
        seen.insert(e.key(), slot);
        slot
    }

    pub fn len(&self) -> usize {
        self.instrs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instrs.is_empty()
    }

    pub fn num_outputs(&self) -> usize {
        self.outputs.len()
    }

    /// Evaluates all outputs at `point`, using `work` as scratch space.
    pub fn eval_into(
        &self,
        point: &[f64],
        work: &mut Vec<f64>,
        out: &mut [f64],
    ) -> Result<(), EvalError> {
        work.clear();
        work.reserve(self.instrs.len());
        let fail = |kind: DomainKind| EvalError {
            kind,
            point: point.to_vec(),
        };
        for instr in &self.instrs {
            let v = match *instr {
                Instr::Const(c) => c,
                Instr::Var(i) => point[i as usize],
                Instr::Sum { start, len } => {
                    let s = start as usize;
                    self.args[s..s + len as usize]
                        .iter()
                        .map(|&a| work[a as usize])
                        .sum()
                }
                Instr::Mul(a, b) => work[a as usize] * work[b as usize],
                Instr::Scale(c, a) => c * work[a as usize],
                Instr::Div(a, b) => {
                    let den = work[b as usize];
                    if den == 0.0 {
                        return Err(fail(DomainKind::DivisionByZero));
                    }
                    let q = work[a as usize] / den;
                    if !q.is_finite() {
                        return Err(fail(DomainKind::DivisionByZero));
                    }
                    q
                }
                Instr::Powi(a, n) => {
                    let base = work[a as usize];
                    if base == 0.0 && n < 0 {
                        return Err(fail(DomainKind::DivisionByZero));
                    }
                    base.powi(n)
                }
                Instr::Powf(a, b) => {
                    let base = work[a as usize];
                    let e = work[b as usize];
                    if base < 0.0 && e.fract() != 0.0 {
                        return Err(fail(DomainKind::NegativePowerBase));
                    }
                    if base == 0.0 && e < 0.0 {
                        return Err(fail(DomainKind::DivisionByZero));
                    }
                    base.powf(e)
                }
                Instr::Func(f, a) => {
                    let x = work[a as usize];
                    match f {
                        Func::Sqrt if x < 0.0 => return Err(fail(DomainKind::NegativeSqrt)),
                        Func::Ln if x <= 0.0 => return Err(fail(DomainKind::NonPositiveLog)),
                        _ => {}
                    }
                    f.apply(x)
                }
            };
            if !v.is_finite() {
                return Err(fail(DomainKind::NonFinite(match instr {
                    Instr::Func(f, _) => f.name(),
                    Instr::Powi(..) | Instr::Powf(..) => "power",
                    _ => "arithmetic",
                })));
            }
            work.push(v);
        }
        for (o, &slot) in out.iter_mut().zip(&self.outputs) {
            *o = work[slot as usize];
        }
        Ok(())
    }

    pub fn eval(&self, point: &[f64]) -> Result<Vec<f64>, EvalError> {
        let mut out = vec![0.0; self.outputs.len()];
        self.eval_into(point, &mut Vec::new(), &mut out)?;
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn folding_keeps_constants_small() {
        let x = Expr::var(0);
        assert!((&x * &Expr::zero()).is_zero());
        assert!((&x * &Expr::one()).ptr_eq(&x));
        assert_eq!(Expr::sum([Expr::constant(2.0), Expr::constant(3.0)]).as_const(), Some(5.0));
    }

    #[test]
    fn derivative_of_quotient() {
        let x = Expr::var(0);
        let y = Expr::var(1);
        let f = &x / &y;
        let p = [3.0, 2.0];
        assert!((f.diff(0).eval(&p).unwrap() - 0.5).abs() < 1e-15);
        assert!((f.diff(1).eval(&p).unwrap() + 0.75).abs() < 1e-15);
        assert!((f.diff2(1, 1).eval(&p).unwrap() - 0.75).abs() < 1e-15);
    }

    #[test]
    fn derivative_cache_returns_same_node() {
        let x = Expr::var(0);
        let f = x.sin().mul(&x);
        assert!(f.diff(0).ptr_eq(&f.diff(0)));
        assert!(f.diff(3).is_zero());
    }

    #[test]
    fn domain_errors_are_reported() {
        let x = Expr::var(0);
        let err = x.sqrt().eval(&[-1.0]).unwrap_err();
        assert_eq!(err.kind, DomainKind::NegativeSqrt);
        assert_eq!(err.point, vec![-1.0]);
        let err = Expr::one().div(&x).eval(&[0.0]).unwrap_err();
        assert_eq!(err.kind, DomainKind::DivisionByZero);
        assert!(x.ln().eval(&[0.0]).is_err());
    }

    #[test]
    fn substitution_composes() {
        let x = Expr::var(0);
        let f = x.powi(2).add(&x);
        let t = Expr::var(0).scale(2.0);
        let g = f.substitute(&[t], &mut FxHashMap::default());
        assert_eq!(g.eval(&[1.5]).unwrap(), 12.0);
    }

    #[test]
    fn general_power_derivative() {
        let x = Expr::var(0);
        let y = Expr::var(1);
        let f = x.pow(&y);
        let p = [2.0, 3.0];
        assert!((f.diff(0).eval(&p).unwrap() - 12.0).abs() < 1e-12);
        assert!((f.diff(1).eval(&p).unwrap() - 8.0 * 2f64.ln()).abs() < 1e-12);
    }
}
