//! Unit-time flows of `Σ ξ_i X_i` with an embedded Dormand–Prince 5(4) integrator.
//!
//! The state can be augmented with the variational equation (for `∂Exp/∂x`)
//! and with parameter sensitivities (for `∂Exp/∂ξ`); error control then acts
//! on every component.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::foliation::SingularFoliation;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FlowConfig {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_steps: usize,
}

impl Default for FlowConfig {
    fn default() -> Self {
        Self { abs_tol: 1e-10, rel_tol: 1e-10, max_steps: 100_000 }
    }
}

impl FlowConfig {
    pub fn with_tol(tol: f64) -> Self {
        Self { abs_tol: tol, rel_tol: tol, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.abs_tol > 0.0 && self.rel_tol > 0.0) {
            return Err(Error::Invalid("flow tolerances must be positive".into()));
        }
        if self.max_steps == 0 {
            return Err(Error::Invalid("max_steps must be at least 1".into()));
        }
        Ok(())
    }
}

/// Flow endpoint together with its first derivatives.
#[derive(Debug, Clone)]
pub struct FlowDerivatives {
    pub point: Vec<f64>,
    /// `∂Exp(ξ, x)/∂x`, n×n.
    pub dx: DMatrix<f64>,
    /// `∂Exp(ξ, x)/∂ξ`, n×m.
    pub dxi: DMatrix<f64>,
}

/// `Exp(ξ, x)`: the time-1 state of `y' = Σ ξ_i X_i(y)`, `y(0) = x`.
pub fn exp_flow(f: &SingularFoliation, xi: &[f64], x: &[f64], cfg: &FlowConfig) -> Result<Vec<f64>> {
    check_args(f, xi, x)?;
    if xi.iter().all(|v| *v == 0.0) {
        return Ok(x.to_vec());
    }
    let out = integrate(f, xi, x, Augment::None, cfg)?;
    Ok(out[..f.dim()].to_vec())
}

/// The inverse of `Exp(ξ, ·)`, i.e. the time-1 flow of `−Σ ξ_i X_i`.
pub fn back_flow(f: &SingularFoliation, xi: &[f64], x: &[f64], cfg: &FlowConfig) -> Result<Vec<f64>> {
    let neg: Vec<f64> = xi.iter().map(|v| -v).collect();
    exp_flow(f, &neg, x, cfg)
}

/// `∂Exp(ξ, ·)/∂x` at `x`, integrated through the variational equation.
pub fn flow_jacobian(f: &SingularFoliation, xi: &[f64], x: &[f64], cfg: &FlowConfig) -> Result<DMatrix<f64>> {
    flow_with_jacobian(f, xi, x, cfg).map(|(_, j)| j)
}

pub fn flow_with_jacobian(
    f: &SingularFoliation,
    xi: &[f64],
    x: &[f64],
    cfg: &FlowConfig,
) -> Result<(Vec<f64>, DMatrix<f64>)> {
    check_args(f, xi, x)?;
    let n = f.dim();
    if xi.iter().all(|v| *v == 0.0) {
        return Ok((x.to_vec(), DMatrix::identity(n, n)));
    }
    let out = integrate(f, xi, x, Augment::Jacobian, cfg)?;
    Ok((out[..n].to_vec(), DMatrix::from_row_slice(n, n, &out[n..n + n * n])))
}

/// Endpoint plus derivatives in both `x` and `ξ`.
pub fn flow_with_sensitivities(
    f: &SingularFoliation,
    xi: &[f64],
    x: &[f64],
    cfg: &FlowConfig,
) -> Result<FlowDerivatives> {
    check_args(f, xi, x)?;
    let (n, m) = (f.dim(), f.generator_count());
    let out = if xi.iter().all(|v| *v == 0.0) {
        // At ξ = 0 the ξ-derivative is simply the generator matrix.
        let mut out = x.to_vec();
        for r in 0..n {
            out.extend((0..n).map(|c| if r == c { 1.0 } else { 0.0 }));
        }
        let g = f.generator_matrix(x);
        for r in 0..n {
            for c in 0..m {
                out.push(g[(r, c)]);
            }
        }
        out
    } else {
        integrate(f, xi, x, Augment::Sensitivities, cfg)?
    };
    Ok(FlowDerivatives {
        point: out[..n].to_vec(),
        dx: DMatrix::from_row_slice(n, n, &out[n..n + n * n]),
        dxi: DMatrix::from_row_slice(n, m, &out[n + n * n..]),
    })
}

fn check_args(f: &SingularFoliation, xi: &[f64], x: &[f64]) -> Result<()> {
    if x.len() != f.dim() {
        return Err(Error::DimensionMismatch { expected: f.dim(), found: x.len() });
    }
    if xi.len() != f.generator_count() {
        return Err(Error::DimensionMismatch { expected: f.generator_count(), found: xi.len() });
    }
    if !f.chart().contains_with(x, CHART_SLACK) {
        return Err(Error::DomainEscape { t: 0.0, point: x.to_vec() });
    }
    Ok(())
}

/// Points this close to the chart box still count as inside; absorbs
/// roundoff for trajectories that run along the boundary.
const CHART_SLACK: f64 = 1e-9;

#[derive(Clone, Copy, PartialEq)]
enum Augment {
    None,
    Jacobian,
    Sensitivities,
}

fn integrate(f: &SingularFoliation, xi: &[f64], x: &[f64], aug: Augment, cfg: &FlowConfig) -> Result<Vec<f64>> {
    let (n, m) = (f.dim(), f.generator_count());
    let mut y0 = x.to_vec();
    if aug != Augment::None {
        for r in 0..n {
            for c in 0..n {
                y0.push(if r == c { 1.0 } else { 0.0 });
            }
        }
    }
    if aug == Augment::Sensitivities {
        y0.extend(std::iter::repeat_n(0.0, n * m));
    }
    let mut field = vec![0.0; n];
    let mut dfield = DMatrix::<f64>::zeros(n, n);
    let rhs = |y: &[f64], dy: &mut [f64]| {
        let p = &y[..n];
        f.combined_field(xi, p, &mut field);
        dy[..n].copy_from_slice(&field);
        if aug == Augment::None {
            return;
        }
        f.combined_jacobian(xi, p, &mut dfield);
        // J' = DF·J, row-major.
        let jac = &y[n..n + n * n];
        for r in 0..n {
            for c in 0..n {
                let mut s = 0.0;
                for k in 0..n {
                    s += dfield[(r, k)] * jac[k * n + c];
                }
                dy[n + r * n + c] = s;
            }
        }
        if aug == Augment::Sensitivities {
            // S' = DF·S + [X_1 … X_m].
            let off = n + n * n;
            let sens = &y[off..];
            for i in 0..m {
                f.generator(i).eval_into(p, &mut field);
                for r in 0..n {
                    let mut s = field[r];
                    for k in 0..n {
                        s += dfield[(r, k)] * sens[k * m + i];
                    }
                    dy[off + r * m + i] = s;
                }
            }
        }
    };
    dopri5(y0, rhs, cfg, |y| f.chart().contains_with(&y[..n], CHART_SLACK))
}

// Dormand–Prince 5(4) tableau.
const A: [[f64; 6]; 6] = [
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

/// Integrates `y' = rhs(y)` over `t ∈ [0, 1]`; `inside` is checked after
/// every accepted step.
fn dopri5(
    mut y: Vec<f64>,
    mut rhs: impl FnMut(&[f64], &mut [f64]),
    cfg: &FlowConfig,
    inside: impl Fn(&[f64]) -> bool,
) -> Result<Vec<f64>> {
    let d = y.len();
    let mut k: Vec<Vec<f64>> = vec![vec![0.0; d]; 7];
    let mut tmp = vec![0.0; d];
    let mut ynew = vec![0.0; d];
    rhs(&y, &mut k[0]);

    let scale0 = y.iter().map(|v| v.abs()).fold(0.0, f64::max).max(1e-3);
    let speed0 = k[0].iter().map(|v| v.abs()).fold(0.0, f64::max);
    let mut h = if speed0 > 0.0 { (0.01 * scale0 / speed0).min(0.1) } else { 0.1 };
    let mut t = 0.0;
    let mut steps = 0;

    while t < 1.0 {
        if steps >= cfg.max_steps {
            return Err(Error::StepLimit(cfg.max_steps));
        }
        steps += 1;
        let last = h >= 1.0 - t;
        if last {
            h = 1.0 - t;
        }
        for s in 0..6 {
            for i in 0..d {
                let mut acc = 0.0;
                for (j, kj) in k.iter().enumerate().take(s + 1) {
                    acc += A[s][j] * kj[i];
                }
                tmp[i] = y[i] + h * acc;
            }
            if s == 5 {
                ynew.copy_from_slice(&tmp);
            }
            let (_, rest) = k.split_at_mut(s + 1);
            rhs(&tmp, &mut rest[0]);
        }
        let mut err = 0.0;
        for i in 0..d {
            let mut e = 0.0;
            for (j, kj) in k.iter().enumerate() {
                e += E[j] * kj[i];
            }
            let sc = cfg.abs_tol + cfg.rel_tol * y[i].abs().max(ynew[i].abs());
            err += (h * e / sc).powi(2);
        }
        let err = (err / d as f64).sqrt();
        if !err.is_finite() {
            h *= 0.2;
            continue;
        }
        if err <= 1.0 {
            t = if last { 1.0 } else { t + h };
            std::mem::swap(&mut y, &mut ynew);
            k.swap(0, 6);
            if !inside(&y) {
                return Err(Error::DomainEscape { t, point: y });
            }
            let fac = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
            h *= fac;
        } else {
            h *= (0.9 * err.powf(-0.2)).max(0.2);
        }
    }
    Ok(y)
}
