use std::fmt;

use nalgebra::{DMatrix, DVector};

use super::{parse, ScalarExpr, Var};
use crate::error::{Error, Result};

/// A polynomial/analytic vector field on ℝⁿ given componentwise by expressions.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorFieldExpr {
    dim: usize,
    components: Vec<ScalarExpr>,
}

impl VectorFieldExpr {
    pub fn new(dim: usize, components: Vec<ScalarExpr>) -> Result<Self> {
        if components.len() != dim {
            return Err(Error::DimensionMismatch { expected: dim, found: components.len() });
        }
        for c in &components {
            c.check_vars(dim, 0)?;
        }
        Ok(Self { dim, components })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn components(&self) -> &[ScalarExpr] {
        &self.components
    }

    pub fn eval(&self, x: &[f64]) -> Vec<f64> {
        self.components.iter().map(|c| c.eval(x, &[])).collect()
    }

    pub fn eval_into(&self, x: &[f64], out: &mut [f64]) {
        for (o, c) in out.iter_mut().zip(&self.components) {
            *o = c.eval(x, &[]);
        }
    }

    /// Symbolic Jacobian `∂X_i/∂x_j`.
    pub fn jacobian_exprs(&self) -> Vec<Vec<ScalarExpr>> {
        self.components
            .iter()
            .map(|c| (0..self.dim).map(|j| c.diff(Var::X(j))).collect())
            .collect()
    }

    pub fn jacobian(&self, x: &[f64]) -> DMatrix<f64> {
        let j = self.jacobian_exprs();
        DMatrix::from_fn(self.dim, self.dim, |r, c| j[r][c].eval(x, &[]))
    }

    pub fn is_zero(&self) -> bool {
        self.components.iter().all(ScalarExpr::is_zero)
    }

    pub fn to_vector(&self, x: &[f64]) -> DVector<f64> {
        DVector::from_vec(self.eval(x))
    }
}

/// Parses `"[e1, …, en]"` as a vector field on ℝ^dim.
pub fn parse_field(text: &str, dim: usize) -> Result<VectorFieldExpr> {
    let comps = parse::parse_list(text)?;
    let comps: Vec<ScalarExpr> = comps.into_iter().map(ScalarExpr::from_node).collect();
    if comps.len() != dim {
        return Err(Error::DimensionMismatch { expected: dim, found: comps.len() });
    }
    VectorFieldExpr::new(dim, comps)
}

/// The Lie bracket `[X, Y] = DY·X − DX·Y`, computed symbolically.
pub fn lie_bracket(x: &VectorFieldExpr, y: &VectorFieldExpr) -> Result<VectorFieldExpr> {
    if x.dim != y.dim {
        return Err(Error::DimensionMismatch { expected: x.dim, found: y.dim });
    }
    let n = x.dim;
    let (jx, jy) = (x.jacobian_exprs(), y.jacobian_exprs());
    let comps = (0..n)
        .map(|i| {
            let mut acc = ScalarExpr::constant(0.0);
            for j in 0..n {
                acc = acc
                    .add(&jy[i][j].mul(&x.components[j]))
                    .sub(&jx[i][j].mul(&y.components[j]));
            }
            acc
        })
        .collect();
    Ok(VectorFieldExpr { dim: n, components: comps })
}

impl fmt::Display for VectorFieldExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        for (k, c) in self.components.iter().enumerate() {
            if k > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, "]")
    }
}
