use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use super::{compose, invert, Bisubmersion};
use crate::error::{Error, Result};
use crate::expr::{ScalarExpr, Var};
use crate::flow::{back_flow, exp_flow, flow_jacobian, flow_with_sensitivities};
use crate::geometry::{concat, dist, sample_image, Aabb};

const NEWTON_MAX_ITERS: usize = 50;
const SECTION_TOL: f64 = 1e-9;
const ROUND_TRIP_TOL: f64 = 1e-7;

/// A bisection in section form: `x ↦ u(x)` with `s(u(x)) = x` over a base box.
#[derive(Debug, Clone, PartialEq)]
pub struct Bisection {
    host: Bisubmersion,
    kind: SectionKind,
    base: Aabb,
    range: Aabb,
}

#[derive(Debug, Clone, PartialEq)]
enum SectionKind {
    /// `x ↦ (ξ0, x)` on a path-holonomy host.
    ConstantXi(Vec<f64>),
    /// `x ↦ (ξ(x), x)` on a path-holonomy host; `dxi[i][j] = ∂ξ_i/∂x_j`.
    XiField { xi: Vec<ScalarExpr>, dxi: Vec<Vec<ScalarExpr>> },
    /// `y ↦ (sect_S(Φ_T y), sect_T(y))` on `U∘V`, so `Φ = Φ_S∘Φ_T`.
    Composed(Arc<Bisection>, Arc<Bisection>),
    /// The same submanifold viewed in the inverse host: `Φ = Φ_S^{-1}`.
    Inverse(Arc<Bisection>),
}

impl Bisection {
    /// Constant-ξ bisection on a path-holonomy bisubmersion.
    pub fn constant(host: &Bisubmersion, xi0: Vec<f64>, base: Aabb) -> Result<Self> {
        let f = path_holonomy_base(host)?;
        if xi0.len() != f.generator_count() {
            return Err(Error::DimensionMismatch { expected: f.generator_count(), found: xi0.len() });
        }
        Self::finish(host.clone(), SectionKind::ConstantXi(xi0), base)
    }

    pub fn identity(host: &Bisubmersion, base: Aabb) -> Result<Self> {
        let m = path_holonomy_base(host)?.generator_count();
        Self::constant(host, vec![0.0; m], base)
    }

    /// `x ↦ (ξ(x), x)` with ξ given by expressions in `x1..xn`.
    pub fn xi_field(host: &Bisubmersion, xi: Vec<ScalarExpr>, base: Aabb) -> Result<Self> {
        let f = path_holonomy_base(host)?;
        if xi.len() != f.generator_count() {
            return Err(Error::DimensionMismatch { expected: f.generator_count(), found: xi.len() });
        }
        for e in &xi {
            e.check_vars(f.dim(), 0)?;
        }
        let dxi = xi.iter().map(|e| (0..f.dim()).map(|j| e.diff(Var::X(j))).collect()).collect();
        Self::finish(host.clone(), SectionKind::XiField { xi, dxi }, base)
    }

    /// The bisection `S∘T` of `U∘V` with `Φ_{S∘T} = Φ_S∘Φ_T`.
    pub fn compose(s: &Bisection, t: &Bisection) -> Result<Self> {
        let host = compose(&s.host, &t.host)?;
        Ok(Self {
            host,
            base: t.base.clone(),
            range: s.range.clone(),
            kind: SectionKind::Composed(Arc::new(s.clone()), Arc::new(t.clone())),
        })
    }

    /// `S` viewed in the inverse bisubmersion, inducing `Φ_S^{-1}`.
    pub fn inverse(&self) -> Self {
        if let SectionKind::Inverse(inner) = &self.kind {
            return (**inner).clone();
        }
        Self {
            host: invert(&self.host),
            base: self.range.clone(),
            range: self.base.clone(),
            kind: SectionKind::Inverse(Arc::new(self.clone())),
        }
    }

    fn finish(host: Bisubmersion, kind: SectionKind, base: Aabb) -> Result<Self> {
        if base.dim() != host.base_dim() {
            return Err(Error::DimensionMismatch { expected: host.base_dim(), found: base.dim() });
        }
        let mut b = Self { host, kind, range: base.clone(), base };
        b.range = sample_image(&b.base, 9, |x| b.phi(x).ok())
            .ok_or_else(|| Error::NotABisection("Φ_S undefined on the whole base box".into()))?;
        b.validate()?;
        Ok(b)
    }

    pub fn host(&self) -> &Bisubmersion {
        &self.host
    }

    /// Conservative box containing the domain `s(S)`.
    pub fn base_box(&self) -> &Aabb {
        &self.base
    }

    /// Conservative box containing the range `r(S) = Φ_S(s(S))`.
    pub fn range_box(&self) -> &Aabb {
        &self.range
    }

    pub fn constant_xi(&self) -> Option<&[f64]> {
        match &self.kind {
            SectionKind::ConstantXi(xi) => Some(xi),
            _ => None,
        }
    }

    /// Whether `x` lies in the exact domain `s(S)`.
    pub fn in_domain(&self, x: &[f64]) -> Result<bool> {
        match &self.kind {
            SectionKind::ConstantXi(_) | SectionKind::XiField { .. } => Ok(self.base.contains(x)),
            SectionKind::Composed(s, t) => {
                if !t.in_domain(x)? {
                    return Ok(false);
                }
                match t.phi(x) {
                    Ok(y) => s.in_domain(&y),
                    Err(Error::DomainEscape { .. }) => Ok(false),
                    Err(e) => Err(e),
                }
            }
            SectionKind::Inverse(s) => Ok(s.phi_inv_checked(x)?.is_some()),
        }
    }

    /// `s|_S^{-1}(x)`; `x` must lie in the domain.
    pub fn section(&self, x: &[f64]) -> Result<Vec<f64>> {
        match &self.kind {
            SectionKind::ConstantXi(xi) => Ok(concat(xi, x)),
            SectionKind::XiField { xi, .. } => Ok(concat(&eval_all(xi, x), x)),
            SectionKind::Composed(s, t) => Ok(concat(&s.section(&t.phi(x)?)?, &t.section(x)?)),
            SectionKind::Inverse(s) => s.section(&s.phi_inv(x)?),
        }
    }

    /// `Φ_S = r∘s|_S^{-1}`.
    pub fn phi(&self, x: &[f64]) -> Result<Vec<f64>> {
        match &self.kind {
            SectionKind::ConstantXi(xi) => {
                let f = self.host.foliation();
                exp_flow(f, xi, x, f.flow_config())
            }
            SectionKind::XiField { xi, .. } => {
                let f = self.host.foliation();
                exp_flow(f, &eval_all(xi, x), x, f.flow_config())
            }
            SectionKind::Composed(s, t) => s.phi(&t.phi(x)?),
            SectionKind::Inverse(s) => s.phi_inv(x),
        }
    }

    /// `Φ_S^{-1}`, without a domain check.
    pub fn phi_inv(&self, y: &[f64]) -> Result<Vec<f64>> {
        match &self.kind {
            SectionKind::ConstantXi(xi) => {
                let f = self.host.foliation();
                back_flow(f, xi, y, f.flow_config())
            }
            SectionKind::XiField { .. } => self.newton_inverse(y),
            SectionKind::Composed(s, t) => t.phi_inv(&s.phi_inv(y)?),
            SectionKind::Inverse(s) => s.phi(y),
        }
    }

    /// `Φ_S^{-1}(y)` when `y ∈ r(S)`, else `None`.
    pub fn phi_inv_checked(&self, y: &[f64]) -> Result<Option<Vec<f64>>> {
        match self.phi_inv(y) {
            Ok(x) => Ok(if self.in_domain(&x)? { Some(x) } else { None }),
            Err(Error::DomainEscape { .. }) | Err(Error::NotABisection(_)) => Ok(None),
            Err(e) => Err(e),
        }
    }

    pub fn phi_jacobian(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        match &self.kind {
            SectionKind::ConstantXi(xi) => {
                let f = self.host.foliation();
                flow_jacobian(f, xi, x, f.flow_config())
            }
            SectionKind::XiField { xi, dxi } => {
                let f = self.host.foliation();
                let d = flow_with_sensitivities(f, &eval_all(xi, x), x, f.flow_config())?;
                Ok(d.dx + d.dxi * xi_jacobian(dxi, x))
            }
            SectionKind::Composed(s, t) => Ok(s.phi_jacobian(&t.phi(x)?)? * t.phi_jacobian(x)?),
            SectionKind::Inverse(s) => {
                let z = s.phi_inv(x)?;
                s.phi_jacobian(&z)?
                    .try_inverse()
                    .ok_or_else(|| Error::NotABisection(format!("singular DΦ at {z:?}")))
            }
        }
    }

    /// Damped Newton for `Exp(ξ(x), x) = y`, started from `back_flow(ξ(y), y)`.
    fn newton_inverse(&self, y: &[f64]) -> Result<Vec<f64>> {
        let SectionKind::XiField { xi, dxi } = &self.kind else { unreachable!() };
        let f = self.host.foliation();
        let cfg = f.flow_config();
        let mut x = back_flow(f, &eval_all(xi, y), y, cfg)?;
        let residual = |x: &[f64]| -> Result<(DVector<f64>, DMatrix<f64>)> {
            let d = flow_with_sensitivities(f, &eval_all(xi, x), x, cfg)?;
            let res = DVector::from_iterator(y.len(), d.point.iter().zip(y).map(|(a, b)| a - b));
            Ok((res, d.dx + d.dxi * xi_jacobian(dxi, x)))
        };
        let (mut res, mut jac) = residual(&x)?;
        for _ in 0..NEWTON_MAX_ITERS {
            if res.norm() < 1e-12 {
                return Ok(x);
            }
            let step = jac
                .clone()
                .lu()
                .solve(&res)
                .ok_or_else(|| Error::NotABisection(format!("singular DΦ near {x:?}")))?;
            let mut lambda = 1.0;
            loop {
                let trial: Vec<f64> = x.iter().zip(step.iter()).map(|(a, s)| a - lambda * s).collect();
                let accepted = match residual(&trial) {
                    Ok((r, j)) if r.norm() < res.norm() => Some((r, j)),
                    Ok(_) | Err(Error::DomainEscape { .. }) => None,
                    Err(e) => return Err(e),
                };
                if let Some((r, j)) = accepted {
                    x = trial;
                    res = r;
                    jac = j;
                    break;
                }
                lambda *= 0.5;
                if lambda < 1e-3 {
                    return Err(Error::NotABisection(format!("Newton line search stalled at {y:?}")));
                }
            }
            if step.norm() * lambda < 1e-14 {
                break;
            }
        }
        if res.norm() < 1e-9 {
            Ok(x)
        } else {
            Err(Error::NotABisection(format!(
                "Newton inversion of Φ_S did not converge at {y:?} (residual {:.3e})",
                res.norm()
            )))
        }
    }

    /// Sampled checks of `s∘section = id`, the round trip `Φ^{-1}∘Φ = id` and
    /// injectivity of `Φ` on the base box.
    pub fn validate(&self) -> Result<()> {
        let grid = self.base.grid(7);
        let mut images: Vec<(Vec<f64>, Vec<f64>)> = Vec::new();
        for x in &grid {
            if !self.in_domain(x)? {
                continue;
            }
            let fail = |e: Error| Error::NotABisection(format!("at {x:?}: {e}"));
            let u = self.section(x).map_err(fail)?;
            let sx = self.host.s(&u).map_err(fail)?;
            if dist(&sx, x) > SECTION_TOL {
                return Err(Error::NotABisection(format!("s(section({x:?})) = {sx:?}")));
            }
            let y = self.phi(x).map_err(fail)?;
            let back = self.phi_inv(&y).map_err(fail)?;
            if dist(&back, x) > ROUND_TRIP_TOL {
                return Err(Error::NotABisection(format!("Φ^-1(Φ({x:?})) = {back:?}")));
            }
            images.push((x.clone(), y));
        }
        for (i, (xi, yi)) in images.iter().enumerate() {
            for (xj, yj) in &images[i + 1..] {
                if dist(yi, yj) < 1e-12 && dist(xi, xj) > 1e-9 {
                    return Err(Error::NotABisection(format!("Φ({xi:?}) = Φ({xj:?})")));
                }
            }
        }
        Ok(())
    }
}

fn path_holonomy_base(host: &Bisubmersion) -> Result<&std::sync::Arc<crate::foliation::SingularFoliation>> {
    match host {
        Bisubmersion::PathHolonomy(f) => Ok(f),
        other => Err(Error::Invalid(format!(
            "section-form bisections need a path-holonomy host, got {other}"
        ))),
    }
}

fn eval_all(es: &[ScalarExpr], x: &[f64]) -> Vec<f64> {
    es.iter().map(|e| e.eval(x, &[])).collect()
}

fn xi_jacobian(dxi: &[Vec<ScalarExpr>], x: &[f64]) -> DMatrix<f64> {
    let (m, n) = (dxi.len(), x.len());
    DMatrix::from_fn(m, n, |i, j| dxi[i][j].eval(x, &[]))
}
