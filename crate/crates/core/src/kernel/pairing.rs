use super::{Atom, FibredKernel};
use crate::bisubmersion::{Bisubmersion, Side};
use crate::error::{Error, Result};
use crate::geometry::concat;
use crate::quadrature::{integrate, QuadratureConfig};

/// A test function on the ambient parameters of a bisubmersion.
pub type Phi<'a> = &'a dyn Fn(&[f64]) -> Result<f64>;

impl Atom {
    /// `(a, φ)(x)`: the atom's fibre distribution over `x` paired with `φ`.
    pub fn pair(&self, side: Side, x: &[f64], phi: Phi<'_>, quad: &QuadratureConfig) -> Result<f64> {
        self.pair_at(side, x, phi, quad, 0)
    }

    fn pair_at(&self, side: Side, x: &[f64], phi: Phi<'_>, quad: &QuadratureConfig, depth: usize) -> Result<f64> {
        match self {
            Atom::Dirac { bisection, coeff } => {
                let y = match side {
                    Side::R => match bisection.phi_inv_checked(x)? {
                        Some(y) => y,
                        None => return Ok(0.0),
                    },
                    Side::S => {
                        if !bisection.in_domain(x)? {
                            return Ok(0.0);
                        }
                        x.to_vec()
                    }
                };
                let c = coeff.eval(x)?;
                if c == 0.0 {
                    return Ok(0.0);
                }
                Ok(c * phi(&bisection.section(&y)?)?)
            }
            Atom::Density(d) => {
                if !d.base_box.contains(x) {
                    return Ok(0.0);
                }
                integrate(&d.xi_box, quad.order, |alpha| {
                    let Some(u) = d.host.chart(side, x, alpha)? else { return Ok(0.0) };
                    let v = d.value(alpha, x, &u)?;
                    if v == 0.0 {
                        return Ok(0.0);
                    }
                    Ok(v * phi(&u)?)
                })
            }
            Atom::Convolved { left, right, .. } => {
                if depth >= quad.nesting_limit {
                    return Err(Error::NestingLimit(quad.nesting_limit));
                }
                let (lh, rh) = (left.host(), right.host());
                match side {
                    Side::R => left.pair_at(
                        side,
                        x,
                        &|u| {
                            let y = lh.s(u)?;
                            right.pair_at(side, &y, &|v| phi(&concat(u, v)), quad, depth + 1)
                        },
                        quad,
                        depth + 1,
                    ),
                    Side::S => right.pair_at(
                        side,
                        x,
                        &|w| {
                            let y = rh.r(w)?;
                            left.pair_at(side, &y, &|v| phi(&concat(v, w)), quad, depth + 1)
                        },
                        quad,
                        depth + 1,
                    ),
                }
            }
            Atom::Pushed { morphism, inner } => {
                inner.pair_at(side, x, &|u| phi(&morphism.apply(u)?), quad, depth)
            }
        }
    }

    /// `Õp(b)k(y)` for an s-fibred atom `b`, with `k` a density sample against
    /// Lebesgue measure. Defined by `⟨Õp(b)k, f⟩ = ⟨k, Op(b^t)f⟩`.
    pub fn adjoint_value(&self, y: &[f64], k: Phi<'_>, quad: &QuadratureConfig) -> Result<f64> {
        self.adjoint_at(y, k, quad, 0)
    }

    fn adjoint_at(&self, y: &[f64], k: Phi<'_>, quad: &QuadratureConfig, depth: usize) -> Result<f64> {
        match self {
            Atom::Dirac { bisection, coeff } => {
                let Some(x) = bisection.phi_inv_checked(y)? else { return Ok(0.0) };
                let c = coeff.eval(&x)?;
                if c == 0.0 {
                    return Ok(0.0);
                }
                let det = bisection.phi_jacobian(&x)?.determinant().abs();
                Ok(c * k(&x)? / det)
            }
            Atom::Density(d) => integrate(&d.xi_box, quad.order, |alpha| {
                let Some(u) = d.host.chart(Side::R, y, alpha)? else { return Ok(0.0) };
                let x = d.host.s(&u)?;
                let v = d.value(alpha, &x, &u)?;
                if v == 0.0 {
                    return Ok(0.0);
                }
                Ok(v * k(&x)? / super::conversion_factor(&d.host, &u)?)
            }),
            Atom::Convolved { left, right, .. } => {
                if depth >= quad.nesting_limit {
                    return Err(Error::NestingLimit(quad.nesting_limit));
                }
                left.adjoint_at(y, &|z| right.adjoint_at(z, k, quad, depth + 1), quad, depth + 1)
            }
            Atom::Pushed { inner, .. } => inner.adjoint_at(y, k, quad, depth),
        }
    }
}

impl FibredKernel {
    /// Pairing with a test function given per host bisubmersion.
    pub fn pair(
        &self,
        x: &[f64],
        phi: &dyn Fn(&Bisubmersion, &[f64]) -> Result<f64>,
        quad: &QuadratureConfig,
    ) -> Result<f64> {
        let mut total = 0.0;
        for atom in &self.atoms {
            let host = atom.host();
            total += atom.pair(self.side, x, &|u| phi(&host, u), quad)?;
        }
        Ok(total)
    }

    /// `(a, s^*f)(x)`: the kernel applied to a base function at one point.
    pub fn op_value(&self, x: &[f64], f: Phi<'_>, quad: &QuadratureConfig) -> Result<f64> {
        if self.side != Side::R {
            return Err(Error::SideMismatch("Op needs an r-fibred kernel".into()));
        }
        self.pair(x, &|h, u| f(&h.s(u)?), quad)
    }

    /// `Õp(b)k(y)` for an s-fibred kernel.
    pub fn adjoint_value(&self, y: &[f64], k: Phi<'_>, quad: &QuadratureConfig) -> Result<f64> {
        if self.side != Side::S {
            return Err(Error::SideMismatch("the adjoint action needs an s-fibred kernel".into()));
        }
        let mut total = 0.0;
        for atom in &self.atoms {
            total += atom.adjoint_value(y, k, quad)?;
        }
        Ok(total)
    }
}
