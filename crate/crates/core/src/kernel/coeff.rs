use std::sync::Arc;

use super::Density;
use crate::bisubmersion::{Bisection, Bisubmersion, Side};
use crate::error::Result;
use crate::expr::ScalarExpr;
use crate::geometry::Aabb;
use crate::quadrature::integrate;

/// A smooth function on the base, built from expressions and bisection
/// diffeomorphisms.
#[derive(Debug, Clone, PartialEq)]
pub enum Coeff {
    Expr(ScalarExpr),
    Product(Box<Coeff>, Box<Coeff>),
    /// `c∘Φ_S`, or `c∘Φ_S^{-1}` when `inverse` is set.
    Shifted { bisection: Arc<Bisection>, inverse: bool, inner: Box<Coeff> },
}

impl Coeff {
    pub fn constant(c: f64) -> Self {
        Coeff::Expr(ScalarExpr::constant(c))
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        match self {
            Coeff::Expr(e) => e.try_eval(x, &[]),
            Coeff::Product(a, b) => {
                let va = a.eval(x)?;
                if va == 0.0 {
                    return Ok(0.0);
                }
                Ok(va * b.eval(x)?)
            }
            Coeff::Shifted { bisection, inverse, inner } => {
                let y = if *inverse { bisection.phi_inv(x)? } else { bisection.phi(x)? };
                inner.eval(&y)
            }
        }
    }

    pub fn times(self, other: Coeff) -> Coeff {
        match (self.as_constant(), other.as_constant()) {
            (Some(1.0), _) => other,
            (_, Some(1.0)) => self,
            _ => Coeff::Product(Box::new(self), Box::new(other)),
        }
    }

    pub fn shifted(self, bisection: &Arc<Bisection>, inverse: bool) -> Coeff {
        if self.as_constant().is_some() {
            return self;
        }
        Coeff::Shifted { bisection: bisection.clone(), inverse, inner: Box::new(self) }
    }

    fn as_constant(&self) -> Option<f64> {
        match self {
            Coeff::Expr(e) => e.as_constant(),
            _ => None,
        }
    }
}

/// Where a coefficient factor of a derived density is evaluated.
#[derive(Debug, Clone, PartialEq)]
pub enum Probe {
    /// The base point the kernel is fibred over.
    Base,
    /// `r_H(u)` for the given bisubmersion.
    R(Bisubmersion),
    /// `s_H(u)` for the given bisubmersion.
    S(Bisubmersion),
}

/// The value of a density atom at `(α, x, u)`, where `α` are fibre chart
/// coordinates, `x` the base point along the kernel's side and `u` the
/// ambient point of the host.
#[derive(Debug, Clone, PartialEq)]
pub enum DensityFn {
    /// An expression in `x1..xn` (base) and `xi1..xim` (fibre chart).
    Expr(ScalarExpr),
    /// `coeff(probe) · inner(α, shift(x), u)`: the result of translating a
    /// density by a Dirac atom.
    Translated {
        coeff: Coeff,
        probe: Probe,
        shift: Option<(Arc<Bisection>, bool)>,
        inner: Arc<Density>,
    },
    /// Transverse conversion between the r- and s-fibrations with respect
    /// to `μ = weight · Lebesgue`.
    Converted { from: Side, weight: Option<ScalarExpr>, inner: Arc<Density> },
    /// Pushforward of `Convolved{first, second}` along the addition morphism:
    /// `∫ first(ζ − α, ·)·second(α, ·) dα` over the second block.
    AdditionPushed { first: Arc<Density>, second: Arc<Density>, side: Side, order: usize },
    /// Extension by zero from an open restriction.
    Restricted { param_box: Aabb, inner: Arc<Density> },
}

impl DensityFn {
    pub(crate) fn eval(&self, alpha: &[f64], x: &[f64], u: &[f64]) -> Result<f64> {
        match self {
            DensityFn::Expr(e) => e.try_eval(x, alpha),
            DensityFn::Translated { coeff, probe, shift, inner } => {
                let c = match probe {
                    Probe::Base => coeff.eval(x)?,
                    Probe::R(h) => coeff.eval(&h.r(u)?)?,
                    Probe::S(h) => coeff.eval(&h.s(u)?)?,
                };
                if c == 0.0 {
                    return Ok(0.0);
                }
                let v = match shift {
                    None => inner.value(alpha, x, u)?,
                    Some((b, inverse)) => {
                        let y = if *inverse { b.phi_inv(x)? } else { b.phi(x)? };
                        inner.value(alpha, &y, u)?
                    }
                };
                Ok(c * v)
            }
            DensityFn::Converted { from, weight, inner } => {
                // the original host: `host` is inverted once the atom is transposed
                let orig = &inner.host;
                let other = orig.map(*from, u)?;
                let v = inner.value(alpha, &other, u)?;
                if v == 0.0 {
                    return Ok(0.0);
                }
                let jac = super::convert::conversion_factor(orig, u)?;
                let w = match weight {
                    Some(w) => w.try_eval(&other, &[])? / w.try_eval(x, &[])?,
                    None => 1.0,
                };
                Ok(match from {
                    Side::R => v * jac * w,
                    Side::S => v * w / jac,
                })
            }
            DensityFn::AdditionPushed { first, second, side, order } => {
                addition_integral(first, second, *side, *order, alpha, x)
            }
            DensityFn::Restricted { param_box, inner } => {
                if param_box.contains(u) {
                    inner.value(alpha, x, u)
                } else {
                    Ok(0.0)
                }
            }
        }
    }
}

/// `(π_*c)(ζ, z)` for `c = Convolved{first, second}`: the fibre chart of the
/// composition at `α = (ζ − β, β)` is mapped by `π` to the chart point `ζ`.
fn addition_integral(first: &Density, second: &Density, side: Side, order: usize, zeta: &[f64], z: &[f64]) -> Result<f64> {
    let b1 = &first.xi_box;
    let shifted = Aabb {
        lo: zeta.iter().zip(&b1.hi).map(|(z, h)| z - h).collect(),
        hi: zeta.iter().zip(&b1.lo).map(|(z, l)| z - l).collect(),
    };
    let Some(dom) = second.xi_box.intersect(&shifted) else { return Ok(0.0) };
    integrate(&dom, order, |beta| {
        let a1: Vec<f64> = zeta.iter().zip(beta).map(|(z, b)| z - b).collect();
        match side {
            Side::R => {
                let Some(u) = first.host.chart(Side::R, z, &a1)? else { return Ok(0.0) };
                let d1 = first.value(&a1, z, &u)?;
                if d1 == 0.0 {
                    return Ok(0.0);
                }
                let y = first.host.s(&u)?;
                let Some(v) = second.host.chart(Side::R, &y, beta)? else { return Ok(0.0) };
                Ok(d1 * second.value(beta, &y, &v)?)
            }
            Side::S => {
                let Some(w) = second.host.chart(Side::S, z, beta)? else { return Ok(0.0) };
                let d2 = second.value(beta, z, &w)?;
                if d2 == 0.0 {
                    return Ok(0.0);
                }
                let y = second.host.r(&w)?;
                let Some(v) = first.host.chart(Side::S, &y, &a1)? else { return Ok(0.0) };
                Ok(d2 * first.value(&a1, &y, &v)?)
            }
        }
    })
}
