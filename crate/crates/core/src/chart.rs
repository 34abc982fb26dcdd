//! Coordinate charts, points and scalar fields.

use crate::expr::{EvalError, Expr, Tape};
use rustc_hash::FxHashMap;
use std::fmt;
use std::sync::Arc;

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum ChartError {
    #[error("chart '{0}' has duplicate coordinate name '{1}'")]
    DuplicateCoordinate(String, String),
    #[error("chart '{0}' has no coordinates")]
    Empty(String),
    #[error("point has {found} values but chart '{chart}' has dimension {dim}")]
    WrongLength {
        chart: String,
        dim: usize,
        found: usize,
    },
    #[error("chart mismatch: '{0}' vs '{1}'")]
    Mismatch(String, String),
    #[error("{0}")]
    Domain(String),
}

/// A named coordinate system.
#[derive(Debug, PartialEq, Eq)]
pub struct Chart {
    name: String,
    coord_names: Vec<String>,
}

impl Chart {
    pub fn new(name: impl Into<String>, coord_names: Vec<String>) -> Result<Arc<Chart>, ChartError> {
        let name = name.into();
        if coord_names.is_empty() {
            return Err(ChartError::Empty(name));
        }
        for (i, c) in coord_names.iter().enumerate() {
            if coord_names[..i].contains(c) {
                return Err(ChartError::DuplicateCoordinate(name, c.clone()));
            }
        }
        Ok(Arc::new(Chart { name, coord_names }))
    }

    /// Chart `x0..x{dim-1}`.
    pub fn euclidean(name: impl Into<String>, dim: usize) -> Arc<Chart> {
        Chart::new(name, (0..dim).map(|i| format!("x{i}")).collect()).expect("distinct names")
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.coord_names.len()
    }

    pub fn coord_names(&self) -> &[String] {
        &self.coord_names
    }

    pub fn index_of(&self, coord: &str) -> Option<usize> {
        self.coord_names.iter().position(|c| c == coord)
    }

    /// Renders point values as `name=value` pairs for diagnostics.
    pub fn describe(&self, values: &[f64]) -> String {
        self.coord_names
            .iter()
            .zip(values)
            .map(|(n, v)| format!("{n}={v}"))
            .collect::<Vec<_>>()
            .join(", ")
    }
}

pub fn same_chart(a: &Arc<Chart>, b: &Arc<Chart>) -> bool {
    Arc::ptr_eq(a, b) || **a == **b
}

/// A point given by its coordinate values.
#[derive(Clone, Debug)]
pub struct Point {
    chart: Arc<Chart>,
    values: Vec<f64>,
}

impl Point {
    pub fn new(chart: &Arc<Chart>, values: Vec<f64>) -> Result<Point, ChartError> {
        if values.len() != chart.dim() {
            return Err(ChartError::WrongLength {
                chart: chart.name.clone(),
                dim: chart.dim(),
                found: values.len(),
            });
        }
        Ok(Point {
            chart: chart.clone(),
            values,
        })
    }

    pub fn chart(&self) -> &Arc<Chart> {
        &self.chart
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Value, gradient and Hessian of a scalar field at a point.
#[derive(Clone, Debug, PartialEq)]
pub struct Jet {
    pub value: f64,
    pub gradient: Vec<f64>,
    pub hessian: Vec<Vec<f64>>,
}

/// A coefficient function on a chart with exact derivatives.
#[derive(Clone)]
pub struct ScalarField {
    chart: Arc<Chart>,
    expr: Expr,
}

impl fmt::Debug for ScalarField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ScalarField[{}]({:?})", self.chart.name, self.expr)
    }
}

impl ScalarField {
    pub fn new(chart: &Arc<Chart>, expr: Expr) -> ScalarField {
        debug_assert!(expr.support().iter().all(|&v| (v as usize) < chart.dim()));
        ScalarField {
            chart: chart.clone(),
            expr,
        }
    }

    pub fn coordinate(chart: &Arc<Chart>, index: usize) -> ScalarField {
        ScalarField::new(chart, Expr::var(index))
    }

    pub fn constant(chart: &Arc<Chart>, c: f64) -> ScalarField {
        ScalarField::new(chart, Expr::constant(c))
    }

    pub fn chart(&self) -> &Arc<Chart> {
        &self.chart
    }

    pub fn expr(&self) -> &Expr {
        &self.expr
    }

    pub fn partial(&self, index: usize) -> ScalarField {
        ScalarField::new(&self.chart, self.expr.diff(index))
    }

    fn domain_error(&self, e: EvalError) -> ChartError {
        ChartError::Domain(format!("{} at {}", e.kind, self.chart.describe(&e.point)))
    }

    pub fn eval(&self, p: &Point) -> Result<f64, ChartError> {
        self.check(p)?;
        self.expr.eval(&p.values).map_err(|e| self.domain_error(e))
    }

    fn check(&self, p: &Point) -> Result<(), ChartError> {
        if !same_chart(&self.chart, &p.chart) {
            return Err(ChartError::Mismatch(
                self.chart.name.clone(),
                p.chart.name.clone(),
            ));
        }
        Ok(())
    }

    /// Value plus gradient (order ≥ 1) and symmetric Hessian (order 2).
    pub fn eval_jet(&self, p: &Point, order: u8) -> Result<Jet, ChartError> {
        self.check(p)?;
        let n = self.chart.dim();
        let support: Vec<usize> = self.expr.support().iter().map(|&v| v as usize).collect();
        let mut roots = vec![self.expr.clone()];
        if order >= 1 {
            roots.extend(support.iter().map(|&v| self.expr.diff(v)));
        }
        if order >= 2 {
            for (a, &u) in support.iter().enumerate() {
                for &v in &support[a..] {
                    roots.push(self.expr.diff2(u, v));
                }
            }
        }
        let vals = Tape::compile(&roots)
            .eval(&p.values)
            .map_err(|e| self.domain_error(e))?;
        let mut gradient = vec![0.0; if order >= 1 { n } else { 0 }];
        let mut hessian = vec![vec![0.0; n]; if order >= 2 { n } else { 0 }];
        let mut k = 1;
        if order >= 1 {
            for &v in &support {
                gradient[v] = vals[k];
                k += 1;
            }
        }
        if order >= 2 {
            for (a, &u) in support.iter().enumerate() {
                for &v in &support[a..] {
                    hessian[u][v] = vals[k];
                    hessian[v][u] = vals[k];
                    k += 1;
                }
            }
        }
        Ok(Jet {
            value: vals[0],
            gradient,
            hessian,
        })
    }
}

macro_rules! field_op {
    ($trait:ident, $method:ident) => {
        impl std::ops::$trait<&ScalarField> for &ScalarField {
            type Output = ScalarField;
            fn $method(self, rhs: &ScalarField) -> ScalarField {
                assert!(
                    same_chart(&self.chart, &rhs.chart),
                    "scalar fields on different charts"
                );
                ScalarField::new(&self.chart, Expr::$method(&self.expr, &rhs.expr))
            }
        }
    };
}

field_op!(Add, add);
field_op!(Sub, sub);
field_op!(Mul, mul);
field_op!(Div, div);

/// Determinant by cofactor expansion with memoized minors.
pub fn determinant(mat: &[Vec<Expr>]) -> Expr {
    let n = mat.len();
    let mut memo = FxHashMap::default();
    minor_det(mat, (1u32 << n) - 1, 0, &mut memo)
}

fn minor_det(mat: &[Vec<Expr>], cols: u32, row: usize, memo: &mut FxHashMap<u32, Expr>) -> Expr {
    if cols == 0 {
        return Expr::one();
    }
    if let Some(e) = memo.get(&cols) {
        return e.clone();
    }
    let mut terms = Vec::new();
    let mut sign = 1.0;
    for c in 0..mat.len() {
        if cols & (1 << c) == 0 {
            continue;
        }
        let entry = &mat[row][c];
        if !entry.is_zero() {
            let sub = minor_det(mat, cols & !(1 << c), row + 1, memo);
            terms.push(entry.mul(&sub).scale(sign));
        }
        sign = -sign;
    }
    let d = Expr::sum(terms);
    memo.insert(cols, d.clone());
    d
}

/// Inverse of a square matrix of expressions via the adjugate.
pub fn matrix_inverse(mat: &[Vec<Expr>]) -> Vec<Vec<Expr>> {
    let n = mat.len();
    let det = determinant(mat);
    let mut inv = vec![vec![Expr::zero(); n]; n];
    for i in 0..n {
        for j in 0..n {
            let minor: Vec<Vec<Expr>> = (0..n)
                .filter(|&r| r != i)
                .map(|r| {
                    (0..n)
                        .filter(|&c| c != j)
                        .map(|c| mat[r][c].clone())
                        .collect()
                })
                .collect();
            let sign = if (i + j) % 2 == 0 { 1.0 } else { -1.0 };
            let cof = if n == 1 {
                Expr::one()
            } else {
                determinant(&minor).scale(sign)
            };
            inv[j][i] = cof.div(&det);
        }
    }
    inv
}

/// Matrix of scalar fields inverted entrywise through the adjugate.
pub fn matrix_field_inverse(mat: &[Vec<ScalarField>]) -> Result<Vec<Vec<ScalarField>>, ChartError> {
    let chart = mat
        .first()
        .and_then(|r| r.first())
        .map(|f| f.chart.clone())
        .ok_or_else(|| ChartError::Domain("empty matrix".into()))?;
    for row in mat {
        if row.len() != mat.len() {
            return Err(ChartError::Domain("matrix is not square".into()));
        }
        for f in row {
            if !same_chart(&f.chart, &chart) {
                return Err(ChartError::Mismatch(chart.name.clone(), f.chart.name.clone()));
            }
        }
    }
    let exprs: Vec<Vec<Expr>> = mat
        .iter()
        .map(|r| r.iter().map(|f| f.expr.clone()).collect())
        .collect();
    Ok(matrix_inverse(&exprs)
        .into_iter()
        .map(|r| r.into_iter().map(|e| ScalarField::new(&chart, e)).collect())
        .collect())
}

/// Fails with the point description when the matrix is singular there.
pub fn check_invertible(mat: &[Vec<ScalarField>], p: &Point, tol: f64) -> Result<f64, ChartError> {
    let exprs: Vec<Vec<Expr>> = mat
        .iter()
        .map(|r| r.iter().map(|f| f.expr.clone()).collect())
        .collect();
    let det = ScalarField::new(p.chart(), determinant(&exprs)).eval(p)?;
    if det.abs() <= tol {
        return Err(ChartError::Domain(format!(
            "singular matrix (det = {det:e}) at {}",
            p.chart.describe(&p.values)
        )));
    }
    Ok(det)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn duplicate_names_rejected() {
        assert!(Chart::new("c", vec!["x".into(), "x".into()]).is_err());
    }

    #[test]
    fn product_jet() {
        let c = Chart::euclidean("R2", 2);
        let f = &ScalarField::coordinate(&c, 0) * &ScalarField::coordinate(&c, 1);
        let j = f.eval_jet(&Point::new(&c, vec![2.0, 3.0]).unwrap(), 1).unwrap();
        assert_eq!(j.value, 6.0);
        assert_eq!(j.gradient, vec![3.0, 2.0]);
    }

    #[test]
    fn sine_jet() {
        let c = Chart::euclidean("R1", 1);
        let f = ScalarField::new(&c, Expr::var(0).sin());
        let j = f.eval_jet(&Point::new(&c, vec![0.0]).unwrap(), 2).unwrap();
        assert_eq!((j.value, j.gradient[0], j.hessian[0][0]), (0.0, 1.0, 0.0));
    }

    #[test]
    fn diagonal_inverse() {
        let c = Chart::euclidean("R2", 2);
        let a = ScalarField::coordinate(&c, 0);
        let b = ScalarField::coordinate(&c, 1);
        let z = ScalarField::constant(&c, 0.0);
        let inv = matrix_field_inverse(&[vec![a, z.clone()], vec![z, b]]).unwrap();
        let p = Point::new(&c, vec![2.0, 4.0]).unwrap();
        assert_eq!(inv[0][0].eval(&p).unwrap(), 0.5);
        assert_eq!(inv[1][1].eval(&p).unwrap(), 0.25);
        assert_eq!(inv[0][1].eval(&p).unwrap(), 0.0);
    }

    #[test]
    fn domain_error_names_coordinates() {
        let c = Chart::new("polar", vec!["r".into()]).unwrap();
        let f = ScalarField::new(&c, Expr::var(0).sqrt());
        let err = f.eval(&Point::new(&c, vec![-2.0]).unwrap()).unwrap_err();
        assert!(err.to_string().contains("r=-2"), "{err}");
    }
}
