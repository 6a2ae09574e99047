//! Bisubmersions as lazy terms over a foliation.
//!
//! A point of a bisubmersion is an ambient parameter vector: `(ξ, x)` for a
//! path-holonomy bisubmersion, `u ++ v` for a composition, and the inner
//! representation for inverses, restrictions and translates. Fibres are
//! parameterized by intrinsic chart coordinates `α` (the ξ-components), which
//! are the same on the r- and the s-side, so a density can be written against
//! `dα` regardless of which fibration it is paired along.

mod bisection;
mod morphism;

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;

pub use bisection::Bisection;
pub use morphism::{make_addition_morphism, Morphism, MorphismKind};

use crate::error::{Error, Result};
use crate::flow::{back_flow, exp_flow, flow_jacobian};
use crate::foliation::SingularFoliation;
use crate::geometry::{dist, sample_image, Aabb};

/// Which submersion a fibred object is fibred along.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    R,
    S,
}

impl Side {
    pub fn flip(self) -> Side {
        match self {
            Side::R => Side::S,
            Side::S => Side::R,
        }
    }
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Side::R => "r",
            Side::S => "s",
        })
    }
}

/// Tolerance on the fibre constraint `s_U(u) = r_V(v)` of a composition.
pub const FIBRE_TOL: f64 = 1e-7;

#[derive(Debug, Clone, PartialEq)]
pub enum Bisubmersion {
    PathHolonomy(Arc<SingularFoliation>),
    Inverse(Arc<Bisubmersion>),
    Composition(Arc<Bisubmersion>, Arc<Bisubmersion>),
    /// Open subset cut out by a box in ambient parameters.
    Restriction { inner: Arc<Bisubmersion>, param_box: Aabb },
    /// `U^S = r_U^{-1}(s(S))` with `r = Φ_S∘r_U`.
    TranslateLeft { inner: Arc<Bisubmersion>, bisection: Arc<Bisection> },
    /// `U_S = s_U^{-1}(r(S))` with `s = Φ_S^{-1}∘s_U`.
    TranslateRight { inner: Arc<Bisubmersion>, bisection: Arc<Bisection> },
}

pub fn make_path_holonomy(f: Arc<SingularFoliation>) -> Bisubmersion {
    Bisubmersion::PathHolonomy(f)
}

/// `(U, s_U, r_U)`; inverting twice returns the original term.
pub fn invert(u: &Bisubmersion) -> Bisubmersion {
    match u {
        Bisubmersion::Inverse(inner) => (**inner).clone(),
        Bisubmersion::Restriction { inner, param_box } => Bisubmersion::Restriction {
            inner: Arc::new(invert(inner)),
            param_box: param_box.clone(),
        },
        other => Bisubmersion::Inverse(Arc::new(other.clone())),
    }
}

pub fn compose(u: &Bisubmersion, v: &Bisubmersion) -> Result<Bisubmersion> {
    if !same_base(u.foliation(), v.foliation()) {
        return Err(Error::BaseMismatch(format!(
            "cannot compose over '{}' and '{}'",
            u.foliation().name(),
            v.foliation().name()
        )));
    }
    Ok(Bisubmersion::Composition(Arc::new(u.clone()), Arc::new(v.clone())))
}

pub fn restrict(u: &Bisubmersion, param_box: Aabb) -> Result<Bisubmersion> {
    if param_box.dim() != u.param_dim() {
        return Err(Error::DimensionMismatch { expected: u.param_dim(), found: param_box.dim() });
    }
    Ok(Bisubmersion::Restriction { inner: Arc::new(u.clone()), param_box })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TranslateSide {
    Left,
    Right,
}

/// Left (`U^S`) or right (`U_S`) translate of `u` by the bisection `s`.
pub fn translate(u: &Bisubmersion, s: &Bisection, side: TranslateSide) -> Result<Bisubmersion> {
    if !same_base(u.foliation(), s.host().foliation()) {
        return Err(Error::BaseMismatch("bisection lives over a different foliation".into()));
    }
    let bisection = Arc::new(s.clone());
    let inner = Arc::new(u.clone());
    match side {
        TranslateSide::Left => {
            let img = u.image_box(Side::R).ok_or(Error::EmptyTranslate)?;
            if !img.intersects(s.base_box()) {
                return Err(Error::EmptyTranslate);
            }
            Ok(Bisubmersion::TranslateLeft { inner, bisection })
        }
        TranslateSide::Right => {
            let img = u.image_box(Side::S).ok_or(Error::EmptyTranslate)?;
            if !img.intersects(s.range_box()) {
                return Err(Error::EmptyTranslate);
            }
            Ok(Bisubmersion::TranslateRight { inner, bisection })
        }
    }
}

pub(crate) fn same_base(a: &Arc<SingularFoliation>, b: &Arc<SingularFoliation>) -> bool {
    Arc::ptr_eq(a, b) || a == b
}

impl Bisubmersion {
    pub fn foliation(&self) -> &Arc<SingularFoliation> {
        match self {
            Bisubmersion::PathHolonomy(f) => f,
            Bisubmersion::Inverse(i) => i.foliation(),
            Bisubmersion::Composition(u, _) => u.foliation(),
            Bisubmersion::Restriction { inner, .. }
            | Bisubmersion::TranslateLeft { inner, .. }
            | Bisubmersion::TranslateRight { inner, .. } => inner.foliation(),
        }
    }

    pub fn base_dim(&self) -> usize {
        self.foliation().dim()
    }

    /// Length of the ambient parameter vector.
    pub fn param_dim(&self) -> usize {
        match self {
            Bisubmersion::PathHolonomy(f) => f.generator_count() + f.dim(),
            Bisubmersion::Composition(u, v) => u.param_dim() + v.param_dim(),
            Bisubmersion::Inverse(i)
            | Bisubmersion::Restriction { inner: i, .. }
            | Bisubmersion::TranslateLeft { inner: i, .. }
            | Bisubmersion::TranslateRight { inner: i, .. } => i.param_dim(),
        }
    }

    /// Dimension of the r- and s-fibres; `dim U = fibre_dim + n`.
    pub fn fibre_dim(&self) -> usize {
        match self {
            Bisubmersion::PathHolonomy(f) => f.generator_count(),
            Bisubmersion::Composition(u, v) => u.fibre_dim() + v.fibre_dim(),
            Bisubmersion::Inverse(i)
            | Bisubmersion::Restriction { inner: i, .. }
            | Bisubmersion::TranslateLeft { inner: i, .. }
            | Bisubmersion::TranslateRight { inner: i, .. } => i.fibre_dim(),
        }
    }

    pub fn dim(&self) -> usize {
        self.fibre_dim() + self.base_dim()
    }

    /// The default fibre box: ξ-radius boxes of the path-holonomy factors.
    pub fn default_fibre_box(&self) -> Aabb {
        match self {
            Bisubmersion::PathHolonomy(f) => f.xi_box(),
            Bisubmersion::Composition(u, v) => u.default_fibre_box().product(&v.default_fibre_box()),
            Bisubmersion::Inverse(i)
            | Bisubmersion::Restriction { inner: i, .. }
            | Bisubmersion::TranslateLeft { inner: i, .. }
            | Bisubmersion::TranslateRight { inner: i, .. } => i.default_fibre_box(),
        }
    }

    fn split<'a>(&self, w: &'a [f64]) -> (&'a [f64], &'a [f64]) {
        match self {
            Bisubmersion::Composition(u, _) => w.split_at(u.param_dim()),
            _ => unreachable!("split on a non-composition"),
        }
    }

    /// Intrinsic fibre coordinates of a parameter point.
    pub fn fibre_coords(&self, u: &[f64]) -> Vec<f64> {
        match self {
            Bisubmersion::PathHolonomy(f) => u[..f.generator_count()].to_vec(),
            Bisubmersion::Composition(a, b) => {
                let (x, y) = self.split(u);
                let mut c = a.fibre_coords(x);
                c.extend(b.fibre_coords(y));
                c
            }
            Bisubmersion::Inverse(i)
            | Bisubmersion::Restriction { inner: i, .. }
            | Bisubmersion::TranslateLeft { inner: i, .. }
            | Bisubmersion::TranslateRight { inner: i, .. } => i.fibre_coords(u),
        }
    }

    pub fn map(&self, side: Side, u: &[f64]) -> Result<Vec<f64>> {
        match side {
            Side::R => self.r(u),
            Side::S => self.s(u),
        }
    }

    pub fn r(&self, u: &[f64]) -> Result<Vec<f64>> {
        self.check_len(u)?;
        match self {
            Bisubmersion::PathHolonomy(f) => {
                let m = f.generator_count();
                exp_flow(f, &u[..m], &u[m..], f.flow_config())
            }
            Bisubmersion::Inverse(i) => i.s(u),
            Bisubmersion::Composition(a, _) => a.r(self.split(u).0),
            Bisubmersion::Restriction { inner, .. } => inner.r(u),
            Bisubmersion::TranslateLeft { inner, bisection } => bisection.phi(&inner.r(u)?),
            Bisubmersion::TranslateRight { inner, .. } => inner.r(u),
        }
    }

    pub fn s(&self, u: &[f64]) -> Result<Vec<f64>> {
        self.check_len(u)?;
        match self {
            Bisubmersion::PathHolonomy(f) => Ok(u[f.generator_count()..].to_vec()),
            Bisubmersion::Inverse(i) => i.r(u),
            Bisubmersion::Composition(_, b) => b.s(self.split(u).1),
            Bisubmersion::Restriction { inner, .. } => inner.s(u),
            Bisubmersion::TranslateLeft { inner, .. } => inner.s(u),
            Bisubmersion::TranslateRight { inner, bisection } => bisection.phi_inv(&inner.s(u)?),
        }
    }

    fn check_len(&self, u: &[f64]) -> Result<()> {
        if u.len() != self.param_dim() {
            return Err(Error::DimensionMismatch { expected: self.param_dim(), found: u.len() });
        }
        Ok(())
    }

    /// Membership of an ambient parameter point in the bisubmersion.
    pub fn contains(&self, u: &[f64]) -> Result<bool> {
        self.check_len(u)?;
        Ok(match self {
            Bisubmersion::PathHolonomy(f) => f.chart().contains(&u[f.generator_count()..]),
            Bisubmersion::Inverse(i) => i.contains(u)?,
            Bisubmersion::Composition(a, b) => {
                let (x, y) = self.split(u);
                a.contains(x)? && b.contains(y)? && dist(&a.s(x)?, &b.r(y)?) <= FIBRE_TOL
            }
            Bisubmersion::Restriction { inner, param_box } => param_box.contains(u) && inner.contains(u)?,
            Bisubmersion::TranslateLeft { inner, bisection } => {
                inner.contains(u)? && bisection.in_domain(&inner.r(u)?)?
            }
            Bisubmersion::TranslateRight { inner, bisection } => {
                inner.contains(u)? && bisection.phi_inv_checked(&inner.s(u)?)?.is_some()
            }
        })
    }

    /// Canonical fibre parameterization: the point of the `side`-fibre over
    /// `x` with chart coordinates `alpha`, or `None` when that point is not
    /// in the bisubmersion. Flow escapes are reported as errors.
    pub fn chart(&self, side: Side, x: &[f64], alpha: &[f64]) -> Result<Option<Vec<f64>>> {
        if alpha.len() != self.fibre_dim() {
            return Err(Error::DimensionMismatch { expected: self.fibre_dim(), found: alpha.len() });
        }
        match self {
            Bisubmersion::PathHolonomy(f) => {
                let base = match side {
                    Side::S => x.to_vec(),
                    Side::R => back_flow(f, alpha, x, f.flow_config())?,
                };
                let mut u = alpha.to_vec();
                u.extend(base);
                Ok(Some(u))
            }
            Bisubmersion::Inverse(i) => i.chart(side.flip(), x, alpha),
            Bisubmersion::Composition(a, b) => {
                let (aa, ab) = alpha.split_at(a.fibre_dim());
                match side {
                    Side::R => {
                        let Some(u) = a.chart(Side::R, x, aa)? else { return Ok(None) };
                        let Some(v) = b.chart(Side::R, &a.s(&u)?, ab)? else { return Ok(None) };
                        Ok(Some(crate::geometry::concat(&u, &v)))
                    }
                    Side::S => {
                        let Some(v) = b.chart(Side::S, x, ab)? else { return Ok(None) };
                        let Some(u) = a.chart(Side::S, &b.r(&v)?, aa)? else { return Ok(None) };
                        Ok(Some(crate::geometry::concat(&u, &v)))
                    }
                }
            }
            Bisubmersion::Restriction { inner, param_box } => Ok(inner
                .chart(side, x, alpha)?
                .filter(|u| param_box.contains(u))),
            Bisubmersion::TranslateLeft { inner, bisection } => match side {
                Side::R => match bisection.phi_inv_checked(x)? {
                    Some(y) => inner.chart(Side::R, &y, alpha),
                    None => Ok(None),
                },
                Side::S => {
                    let Some(u) = inner.chart(Side::S, x, alpha)? else { return Ok(None) };
                    Ok(if bisection.in_domain(&inner.r(&u)?)? { Some(u) } else { None })
                }
            },
            Bisubmersion::TranslateRight { inner, bisection } => match side {
                Side::S => {
                    if !bisection.in_domain(x)? {
                        return Ok(None);
                    }
                    inner.chart(Side::S, &bisection.phi(x)?, alpha)
                }
                Side::R => {
                    let Some(u) = inner.chart(Side::R, x, alpha)? else { return Ok(None) };
                    Ok(if bisection.phi_inv_checked(&inner.s(&u)?)?.is_some() { Some(u) } else { None })
                }
            },
        }
    }

    /// `∂_z r(chart_s(z, α))` at the point `u = chart_s(z, α)`: the linear map
    /// relating s-fibre-chart × base coordinates to r-fibre-chart × base
    /// coordinates. Its determinant is the transverse conversion factor.
    pub fn s_chart_jacobian(&self, u: &[f64]) -> Result<DMatrix<f64>> {
        self.check_len(u)?;
        match self {
            Bisubmersion::PathHolonomy(f) => {
                let m = f.generator_count();
                flow_jacobian(f, &u[..m], &u[m..], f.flow_config())
            }
            Bisubmersion::Inverse(i) => {
                let n = self.base_dim();
                i.s_chart_jacobian(u)?
                    .try_inverse()
                    .filter(|m| m.iter().all(|v| v.is_finite()) && m.nrows() == n)
                    .ok_or_else(|| Error::Eval("singular flow Jacobian".into()))
            }
            Bisubmersion::Composition(a, b) => {
                let (x, y) = self.split(u);
                Ok(a.s_chart_jacobian(x)? * b.s_chart_jacobian(y)?)
            }
            Bisubmersion::Restriction { inner, .. } => inner.s_chart_jacobian(u),
            Bisubmersion::TranslateLeft { inner, bisection } => {
                Ok(bisection.phi_jacobian(&inner.r(u)?)? * inner.s_chart_jacobian(u)?)
            }
            Bisubmersion::TranslateRight { inner, bisection } => {
                let z = bisection.phi_inv(&inner.s(u)?)?;
                Ok(inner.s_chart_jacobian(u)? * bisection.phi_jacobian(&z)?)
            }
        }
    }

    /// Conservative box containing `side(U)`; `None` if empty.
    pub fn image_box(&self, side: Side) -> Option<Aabb> {
        match self {
            Bisubmersion::PathHolonomy(f) => Some(f.chart().clone()),
            Bisubmersion::Inverse(i) => i.image_box(side.flip()),
            Bisubmersion::Composition(a, b) => match side {
                Side::R => a.image_box(Side::R),
                Side::S => b.image_box(Side::S),
            },
            Bisubmersion::Restriction { inner, param_box } => {
                let img = sample_image(param_box, 7, |u| {
                    if inner.contains(u).ok()? {
                        inner.map(side, u).ok()
                    } else {
                        None
                    }
                })?;
                img.intersect(&inner.image_box(side)?)
            }
            Bisubmersion::TranslateLeft { inner, bisection } => match side {
                Side::R => bisection.range_box().intersect(self.foliation().chart()),
                Side::S => inner.image_box(Side::S),
            },
            Bisubmersion::TranslateRight { inner, bisection } => match side {
                Side::S => Some(bisection.base_box().clone()),
                Side::R => inner.image_box(Side::R),
            },
        }
    }

    pub fn is_path_holonomy(&self) -> bool {
        matches!(self, Bisubmersion::PathHolonomy(_))
    }
}

impl fmt::Display for Bisubmersion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Bisubmersion::PathHolonomy(fol) => write!(f, "U({})", fol.name()),
            Bisubmersion::Inverse(i) => write!(f, "({i})^t"),
            Bisubmersion::Composition(a, b) => write!(f, "({a} o {b})"),
            Bisubmersion::Restriction { inner, .. } => write!(f, "{inner}|box"),
            Bisubmersion::TranslateLeft { inner, .. } => write!(f, "{inner}^S"),
            Bisubmersion::TranslateRight { inner, .. } => write!(f, "{inner}_S"),
        }
    }
}

#[cfg(test)]
mod tests;
