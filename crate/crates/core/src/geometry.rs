//! Axis-aligned boxes and small dense-vector helpers.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A closed axis-aligned box `[lo_1,hi_1] × … × [lo_d,hi_d]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aabb {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl Aabb {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() {
            return Err(Error::DimensionMismatch {
                expected: lo.len(),
                found: hi.len(),
            });
        }
        if lo.iter().chain(hi.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Invalid("box bounds must be finite".into()));
        }
        if lo.iter().zip(&hi).any(|(l, h)| l > h) {
            return Err(Error::Invalid(format!("box with lo > hi: {lo:?} {hi:?}")));
        }
        Ok(Self { lo, hi })
    }

    pub fn from_intervals(iv: &[[f64; 2]]) -> Result<Self> {
        Self::new(iv.iter().map(|i| i[0]).collect(), iv.iter().map(|i| i[1]).collect())
    }

    /// The symmetric box `[-r_i, r_i]`.
    pub fn symmetric(radius: &[f64]) -> Self {
        Self {
            lo: radius.iter().map(|r| -r).collect(),
            hi: radius.to_vec(),
        }
    }

    /// The zero-dimensional box (a single point of ℝ⁰).
    pub fn unit0() -> Self {
        Self { lo: vec![], hi: vec![] }
    }

    pub fn point(p: &[f64]) -> Self {
        Self { lo: p.to_vec(), hi: p.to_vec() }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        self.contains_with(p, 0.0)
    }

    pub fn contains_with(&self, p: &[f64], slack: f64) -> bool {
        p.len() == self.dim()
            && p
                .iter()
                .zip(self.lo.iter().zip(&self.hi))
                .all(|(x, (l, h))| *x >= l - slack && *x <= h + slack)
    }

    /// True when `p` lies on the boundary of the box up to `tol`.
    pub fn on_boundary(&self, p: &[f64], tol: f64) -> bool {
        self.contains_with(p, tol)
            && p
                .iter()
                .zip(self.lo.iter().zip(&self.hi))
                .any(|(x, (l, h))| (x - l).abs() <= tol || (x - h).abs() <= tol)
    }

    pub fn intersect(&self, other: &Aabb) -> Option<Aabb> {
        let lo: Vec<f64> = self.lo.iter().zip(&other.lo).map(|(a, b)| a.max(*b)).collect();
        let hi: Vec<f64> = self.hi.iter().zip(&other.hi).map(|(a, b)| a.min(*b)).collect();
        if lo.iter().zip(&hi).any(|(l, h)| l > h) {
            None
        } else {
            Some(Aabb { lo, hi })
        }
    }

    pub fn intersects(&self, other: &Aabb) -> bool {
        self.intersect(other).is_some()
    }

    pub fn hull(&self, other: &Aabb) -> Aabb {
        Aabb {
            lo: self.lo.iter().zip(&other.lo).map(|(a, b)| a.min(*b)).collect(),
            hi: self.hi.iter().zip(&other.hi).map(|(a, b)| a.max(*b)).collect(),
        }
    }

    /// Minkowski sum `self + other`.
    pub fn sum(&self, other: &Aabb) -> Aabb {
        Aabb {
            lo: self.lo.iter().zip(&other.lo).map(|(a, b)| a + b).collect(),
            hi: self.hi.iter().zip(&other.hi).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn expand(&self, pad: f64) -> Aabb {
        Aabb {
            lo: self.lo.iter().map(|l| l - pad).collect(),
            hi: self.hi.iter().map(|h| h + pad).collect(),
        }
    }

    /// Cartesian product `self × other`, coordinates concatenated.
    pub fn product(&self, other: &Aabb) -> Aabb {
        let mut lo = self.lo.clone();
        lo.extend_from_slice(&other.lo);
        let mut hi = self.hi.clone();
        hi.extend_from_slice(&other.hi);
        Aabb { lo, hi }
    }

    pub fn contains_box(&self, other: &Aabb) -> bool {
        self.contains(&other.lo) && self.contains(&other.hi)
    }

    pub fn center(&self) -> Vec<f64> {
        self.lo.iter().zip(&self.hi).map(|(l, h)| 0.5 * (l + h)).collect()
    }

    pub fn widths(&self) -> Vec<f64> {
        self.lo.iter().zip(&self.hi).map(|(l, h)| h - l).collect()
    }

    pub fn volume(&self) -> f64 {
        self.widths().iter().product()
    }

    /// Bounding box of a non-empty point cloud.
    pub fn bounding(points: &[Vec<f64>]) -> Option<Aabb> {
        let first = points.first()?;
        let mut b = Aabb::point(first);
        for p in &points[1..] {
            for (k, v) in p.iter().enumerate() {
                b.lo[k] = b.lo[k].min(*v);
                b.hi[k] = b.hi[k].max(*v);
            }
        }
        Some(b)
    }

    /// Uniform tensor grid with `per_axis` nodes per axis (endpoints included),
    /// axis 0 varying slowest.
    pub fn grid(&self, per_axis: usize) -> Vec<Vec<f64>> {
        let per_axis = per_axis.max(1);
        let d = self.dim();
        let total = per_axis.pow(d as u32);
        let mut out = Vec::with_capacity(total);
        let mut idx = vec![0usize; d];
        for _ in 0..total {
            out.push(
                (0..d)
                    .map(|k| {
                        if per_axis == 1 {
                            0.5 * (self.lo[k] + self.hi[k])
                        } else {
                            self.lo[k]
                                + (self.hi[k] - self.lo[k]) * idx[k] as f64 / (per_axis - 1) as f64
                        }
                    })
                    .collect(),
            );
            for k in (0..d).rev() {
                idx[k] += 1;
                if idx[k] < per_axis {
                    break;
                }
                idx[k] = 0;
            }
        }
        out
    }

    /// Sample points on the boundary faces of the box.
    pub fn boundary_samples(&self, per_axis: usize) -> Vec<Vec<f64>> {
        self.grid(per_axis)
            .into_iter()
            .filter(|p| self.on_boundary(p, 0.0))
            .collect()
    }
}

/// Conservative image box of `g` over `b`: `g` is evaluated on a uniform
/// grid (`per_axis` nodes per axis); the bounding box of the successful values
/// is padded by the largest jump between grid neighbours. Returns `None` when
/// `g` fails everywhere.
pub fn sample_image(b: &Aabb, per_axis: usize, mut g: impl FnMut(&[f64]) -> Option<Vec<f64>>) -> Option<Aabb> {
    let per_axis = per_axis.max(2);
    let d = b.dim();
    let grid = b.grid(per_axis);
    let vals: Vec<Option<Vec<f64>>> = grid.iter().map(|p| g(p)).collect();
    let ok: Vec<Vec<f64>> = vals.iter().flatten().cloned().collect();
    let mut bx = Aabb::bounding(&ok)?;
    let mut pad: f64 = 0.0;
    // Neighbour along axis k is `stride_k` positions later (axis 0 slowest).
    for k in 0..d {
        let stride = per_axis.pow((d - 1 - k) as u32);
        for (i, vi) in vals.iter().enumerate() {
            if (i / stride) % per_axis == per_axis - 1 {
                continue;
            }
            if let (Some(a), Some(c)) = (vi, &vals[i + stride]) {
                pad = pad.max(dist(a, c));
            }
        }
    }
    bx = bx.expand(pad);
    Some(bx)
}

/// Uniform spatial hash over points of ℝⁿ, used for mesh deduplication and
/// neighbour queries on sampled leaves.
#[derive(Debug, Clone, Default)]
pub struct PointIndex {
    cell: f64,
    dim: usize,
    buckets: HashMap<Vec<i64>, Vec<usize>>,
    points: Vec<Vec<f64>>,
}

impl PointIndex {
    pub fn new(dim: usize, cell: f64) -> Self {
        assert!(cell > 0.0, "cell size must be positive");
        Self { cell, dim, buckets: HashMap::new(), points: Vec::new() }
    }

    pub fn from_points(points: &[Vec<f64>], cell: f64) -> Self {
        let dim = points.first().map_or(0, Vec::len);
        let mut idx = Self::new(dim, cell);
        for p in points {
            idx.insert(p.clone());
        }
        idx
    }

    fn key(&self, p: &[f64]) -> Vec<i64> {
        p.iter().map(|v| (v / self.cell).floor() as i64).collect()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i]
    }

    pub fn insert(&mut self, p: Vec<f64>) -> usize {
        let id = self.points.len();
        self.buckets.entry(self.key(&p)).or_default().push(id);
        self.points.push(p);
        id
    }

    /// Indices of all points within distance `r` of `p`.
    pub fn within(&self, p: &[f64], r: f64) -> Vec<usize> {
        let span = (r / self.cell).ceil() as i64;
        let center = self.key(p);
        let mut out = Vec::new();
        let mut offset = vec![-span; self.dim];
        loop {
            let key: Vec<i64> = center.iter().zip(&offset).map(|(c, o)| c + o).collect();
            if let Some(ids) = self.buckets.get(&key) {
                out.extend(ids.iter().copied().filter(|&i| dist(&self.points[i], p) <= r));
            }
            let mut k = 0;
            loop {
                if k == self.dim {
                    return out;
                }
                offset[k] += 1;
                if offset[k] <= span {
                    break;
                }
                offset[k] = -span;
                k += 1;
            }
        }
    }

    /// Nearest point within `r`, if any.
    pub fn nearest_within(&self, p: &[f64], r: f64) -> Option<(usize, f64)> {
        self.within(p, r)
            .into_iter()
            .map(|i| (i, dist(&self.points[i], p)))
            .min_by(|a, b| a.1.total_cmp(&b.1))
    }
}

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

pub fn concat(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut v = Vec::with_capacity(a.len() + b.len());
    v.extend_from_slice(a);
    v.extend_from_slice(b);
    v
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_includes_endpoints_and_center() {
        let b = Aabb::from_intervals(&[[-2.0, 2.0], [0.0, 1.0]]).unwrap();
        let g = b.grid(5);
        assert_eq!(g.len(), 25);
        assert_eq!(g[0], vec![-2.0, 0.0]);
        assert_eq!(g[24], vec![2.0, 1.0]);
        assert!(g.iter().any(|p| p[0] == 0.0));
    }

    #[test]
    fn intersect_and_sum() {
        let a = Aabb::from_intervals(&[[0.0, 1.0]]).unwrap();
        let b = Aabb::from_intervals(&[[2.0, 3.0]]).unwrap();
        assert!(a.intersect(&b).is_none());
        assert_eq!(a.sum(&b), Aabb::from_intervals(&[[2.0, 4.0]]).unwrap());
        assert!(Aabb::new(vec![1.0], vec![0.0]).is_err());
    }

    #[test]
    fn point_index_queries() {
        let pts: Vec<Vec<f64>> = (0..100).map(|k| vec![k as f64 * 0.01, 0.5]).collect();
        let idx = PointIndex::from_points(&pts, 0.02);
        assert_eq!(idx.within(&[0.5, 0.5], 0.0151).len(), 3);
        assert_eq!(idx.nearest_within(&[0.234, 0.5], 0.05).unwrap().0, 23);
        assert!(idx.nearest_within(&[5.0, 5.0], 0.1).is_none());
    }
}
