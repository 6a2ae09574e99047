//! Tensor-product Gauss–Legendre rules.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Aabb;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QuadratureConfig {
    /// Gauss–Legendre nodes per fibre dimension.
    pub order: usize,
    /// Maximum nesting depth of lazily convolved atoms.
    pub nesting_limit: usize,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self { order: 32, nesting_limit: 6 }
    }
}

impl QuadratureConfig {
    pub fn with_order(order: usize) -> Self {
        Self { order, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.order < 2 {
            return Err(Error::Invalid("quadrature order must be at least 2".into()));
        }
        Ok(())
    }
}

/// Nodes and weights on `[-1, 1]`.
#[derive(Debug)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

/// Cached `n`-point Gauss–Legendre rule.
pub fn gauss_legendre(n: usize) -> Arc<GaussLegendre> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<GaussLegendre>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(Default::default);
    let mut guard = cache.lock().expect("quadrature cache poisoned");
    guard.entry(n).or_insert_with(|| Arc::new(compute_rule(n))).clone()
}

fn compute_rule(n: usize) -> GaussLegendre {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        // Tricomi's initial guess, then Newton on P_n.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, x);
        dp = if d != 0.0 { d } else { dp };
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    GaussLegendre { nodes, weights }
}

/// `(P_n(x), P_n'(x))` by the three-term recurrence.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Tensor rule on `b` with `order` nodes per axis: `(points, weights)`.
/// A zero-dimensional box yields the single empty point with weight 1.
pub fn tensor_rule(b: &Aabb, order: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
    let gl = gauss_legendre(order);
    let d = b.dim();
    let total = order.pow(d as u32);
    let mut pts = Vec::with_capacity(total);
    let mut wts = Vec::with_capacity(total);
    let mut idx = vec![0usize; d];
    let half: Vec<f64> = b.widths().iter().map(|w| 0.5 * w).collect();
    let mid = b.center();
    for _ in 0..total {
        let mut w = 1.0;
        let mut p = Vec::with_capacity(d);
        for k in 0..d {
            p.push(mid[k] + half[k] * gl.nodes[idx[k]]);
            w *= half[k] * gl.weights[idx[k]];
        }
        pts.push(p);
        wts.push(w);
        for k in (0..d).rev() {
            idx[k] += 1;
            if idx[k] < order {
                break;
            }
            idx[k] = 0;
        }
    }
    (pts, wts)
}

/// `∫_b g` with the tensor rule; non-finite integrand values are an error.
pub fn integrate(b: &Aabb, order: usize, mut g: impl FnMut(&[f64]) -> Result<f64>) -> Result<f64> {
    if b.volume() == 0.0 && b.dim() > 0 {
        return Ok(0.0);
    }
    let (pts, wts) = tensor_rule(b, order);
    let mut acc = 0.0;
    for (p, w) in pts.iter().zip(&wts) {
        let v = g(p)?;
        if !v.is_finite() {
            return Err(Error::QuadratureFailure(format!("integrand is {v} at {p:?}")));
        }
        acc += w * v;
    }
    Ok(acc)
}
