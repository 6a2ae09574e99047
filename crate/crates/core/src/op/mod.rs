//! Operators defined by fibred kernels: `Op(a)` on functions, the adjoint
//! action `Õp(b)` on densities, and `Op_L(a)` on sampled leaves.

mod grid;
mod leaf;

use rayon::prelude::*;

pub use grid::{Grid, GridFunction};
pub use leaf::{LeafFunction, REACH_FACTOR};

use crate::error::{Error, Result};
use crate::expr::ScalarExpr;
use crate::foliation::LeafSample;
use crate::geometry::Aabb;
use crate::kernel::{propagate_support, r_to_s_convert, FibredKernel};
use crate::quadrature::QuadratureConfig;

/// A function on the base.
pub trait Function: Sync {
    fn value(&self, x: &[f64]) -> Result<f64>;

    /// A box outside which the function vanishes, if known.
    fn support(&self) -> Option<Aabb> {
        None
    }
}

impl Function for ScalarExpr {
    fn value(&self, x: &[f64]) -> Result<f64> {
        self.try_eval(x, &[])
    }
}

/// Adapts a closure, optionally declaring its support.
pub struct FnFunction<F> {
    f: F,
    support: Option<Aabb>,
}

impl<F: Fn(&[f64]) -> f64 + Sync> FnFunction<F> {
    pub fn new(f: F) -> Self {
        Self { f, support: None }
    }

    pub fn with_support(f: F, support: Aabb) -> Self {
        Self { f, support: Some(support) }
    }
}

impl<F: Fn(&[f64]) -> f64 + Sync> Function for FnFunction<F> {
    fn value(&self, x: &[f64]) -> Result<f64> {
        Ok((self.f)(x))
    }

    fn support(&self) -> Option<Aabb> {
        self.support.clone()
    }
}

/// `Op(a)f` as a function, evaluated on demand. Lets operators compose
/// without an intermediate grid.
pub struct OpFunction<'a> {
    kernel: &'a FibredKernel,
    f: &'a dyn Function,
    quad: QuadratureConfig,
}

impl<'a> OpFunction<'a> {
    pub fn new(kernel: &'a FibredKernel, f: &'a dyn Function, quad: QuadratureConfig) -> Self {
        Self { kernel, f, quad }
    }
}

impl Function for OpFunction<'_> {
    fn value(&self, x: &[f64]) -> Result<f64> {
        op_at(self.kernel, self.f, x, &self.quad)
    }

    fn support(&self) -> Option<Aabb> {
        support_bound(self.kernel, self.f.support().as_ref())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct OpConfig {
    pub quad: QuadratureConfig,
    /// Fail on the first flow escape instead of masking the point.
    pub strict: bool,
}

impl OpConfig {
    pub fn with_order(order: usize) -> Self {
        Self { quad: QuadratureConfig::with_order(order), strict: false }
    }
}

/// Output of a grid evaluation; masked points hold NaN.
#[derive(Debug, Clone, PartialEq)]
pub struct Applied {
    pub values: GridFunction,
    pub masked: usize,
}

fn is_maskable(e: &Error) -> bool {
    matches!(e, Error::DomainEscape { .. })
}

fn collect_masked(results: Vec<Result<f64>>, strict: bool) -> Result<(Vec<f64>, usize)> {
    let mut masked = 0;
    let mut out = Vec::with_capacity(results.len());
    for r in results {
        match r {
            Ok(v) => out.push(v),
            Err(e) if is_maskable(&e) && !strict => {
                masked += 1;
                out.push(f64::NAN);
            }
            Err(e) => return Err(e),
        }
    }
    Ok((out, masked))
}

fn eval_grid(grid: &Grid, cfg: &OpConfig, g: impl Fn(&[f64]) -> Result<f64> + Sync) -> Result<Applied> {
    cfg.quad.validate()?;
    let pts = grid.points();
    let results: Vec<Result<f64>> = pts.par_iter().map(|x| g(x)).collect();
    let (values, masked) = collect_masked(results, cfg.strict)?;
    Ok(Applied { values: GridFunction::with_mask(grid.clone(), values), masked })
}

/// `Op(a)f(x) = (a, s^*f)(x)` at one point.
pub fn op_at(a: &FibredKernel, f: &dyn Function, x: &[f64], quad: &QuadratureConfig) -> Result<f64> {
    a.op_value(x, &|y| f.value(y), quad)
}

/// `Op(a)f` on a grid, for an r-fibred kernel.
pub fn apply_op(a: &FibredKernel, f: &dyn Function, grid: &Grid, cfg: &OpConfig) -> Result<Applied> {
    check_dim(a, grid)?;
    if a.side() != crate::bisubmersion::Side::R {
        return Err(Error::SideMismatch("Op needs an r-fibred kernel".into()));
    }
    eval_grid(grid, cfg, |x| op_at(a, f, x, &cfg.quad))
}

/// `Õp(b)k` on a grid for an s-fibred kernel, `k` a density against Lebesgue.
pub fn apply_adjoint(b: &FibredKernel, k: &dyn Function, grid: &Grid, cfg: &OpConfig) -> Result<Applied> {
    check_dim(b, grid)?;
    if b.side() != crate::bisubmersion::Side::S {
        return Err(Error::SideMismatch("the adjoint action needs an s-fibred kernel".into()));
    }
    eval_grid(grid, cfg, |y| b.adjoint_value(y, &|z| k.value(z), &cfg.quad))
}

/// `Op(a)k` for a generalized function `k`, through the density route
/// `(Op(a)k)μ = Õp(ã)(kμ)` with `μ = weight · Lebesgue` and `ã` the
/// transverse conversion of `a` with respect to `μ`.
pub fn apply_generalized(
    a: &FibredKernel,
    k: &dyn Function,
    weight: Option<&ScalarExpr>,
    grid: &Grid,
    cfg: &OpConfig,
) -> Result<Applied> {
    check_dim(a, grid)?;
    let converted = r_to_s_convert(a, weight)?;
    let w = |x: &[f64]| -> Result<f64> {
        match weight {
            Some(e) => e.try_eval(x, &[]),
            None => Ok(1.0),
        }
    };
    eval_grid(grid, cfg, |y| {
        let v = converted.adjoint_value(y, &|z| Ok(k.value(z)? * w(z)?), &cfg.quad)?;
        Ok(v / w(y)?)
    })
}

/// `Op_L(a)` applied to values given on the sample points of a leaf, returned
/// at the same points. Masked points hold NaN.
pub fn apply_on_leaf(a: &FibredKernel, leaf: &LeafSample, values: &[f64], cfg: &OpConfig) -> Result<(Vec<f64>, usize)> {
    let interp = LeafFunction::new(leaf, values)?;
    apply_at_points(a, &interp, &leaf.points, cfg)
}

/// `Op(a)f` at arbitrary points, with the same masking policy as grids.
pub fn apply_at_points(a: &FibredKernel, f: &dyn Function, points: &[Vec<f64>], cfg: &OpConfig) -> Result<(Vec<f64>, usize)> {
    cfg.quad.validate()?;
    let results: Vec<Result<f64>> = points.par_iter().map(|x| op_at(a, f, x, &cfg.quad)).collect();
    collect_masked(results, cfg.strict)
}

/// Conservative box for `supp(a)∘supp(f)`; `None` when it is empty.
pub fn support_bound(a: &FibredKernel, f_support: Option<&Aabb>) -> Option<Aabb> {
    propagate_support(a, f_support?)
}

fn check_dim(a: &FibredKernel, grid: &Grid) -> Result<()> {
    if grid.dim() != a.base().dim() {
        return Err(Error::DimensionMismatch { expected: a.base().dim(), found: grid.dim() });
    }
    Ok(())
}

#[cfg(test)]
mod tests;
