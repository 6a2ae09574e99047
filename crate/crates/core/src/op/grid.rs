use std::fmt::Write as _;

use super::Function;
use crate::error::{Error, Result};
use crate::geometry::Aabb;

/// A tensor grid over a box with `res[k] ≥ 2` nodes along axis `k`,
/// endpoints included. Points are ordered row-major, axis 0 slowest.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub bx: Aabb,
    pub res: Vec<usize>,
}

impl Grid {
    pub fn new(bx: Aabb, res: Vec<usize>) -> Result<Self> {
        if res.len() != bx.dim() {
            return Err(Error::DimensionMismatch { expected: bx.dim(), found: res.len() });
        }
        if res.iter().any(|&n| n < 2) {
            return Err(Error::Invalid("grid resolution must be at least 2 per axis".into()));
        }
        Ok(Self { bx, res })
    }

    pub fn uniform(bx: Aabb, n: usize) -> Result<Self> {
        let d = bx.dim();
        Self::new(bx, vec![n; d])
    }

    pub fn dim(&self) -> usize {
        self.res.len()
    }

    pub fn len(&self) -> usize {
        self.res.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn spacing(&self) -> Vec<f64> {
        (0..self.dim()).map(|k| (self.bx.hi[k] - self.bx.lo[k]) / (self.res[k] - 1) as f64).collect()
    }

    pub fn point(&self, mut i: usize) -> Vec<f64> {
        let h = self.spacing();
        let mut p = vec![0.0; self.dim()];
        for k in (0..self.dim()).rev() {
            let j = i % self.res[k];
            i /= self.res[k];
            p[k] = if j + 1 == self.res[k] { self.bx.hi[k] } else { self.bx.lo[k] + j as f64 * h[k] };
        }
        p
    }

    pub fn points(&self) -> Vec<Vec<f64>> {
        (0..self.len()).map(|i| self.point(i)).collect()
    }

    fn header(&self) -> String {
        let b: Vec<String> = (0..self.dim()).map(|k| format!("{}:{}", self.bx.lo[k], self.bx.hi[k])).collect();
        let r: Vec<String> = self.res.iter().map(|n| n.to_string()).collect();
        format!("# box={};res={}", b.join(","), r.join(","))
    }

    fn parse_header(line: &str) -> Result<Self> {
        let bad = || Error::Config(format!("malformed grid header '{line}'"));
        let body = line.strip_prefix("# ").ok_or_else(bad)?;
        let (b, r) = body.split_once(';').ok_or_else(bad)?;
        let b = b.strip_prefix("box=").ok_or_else(bad)?;
        let r = r.strip_prefix("res=").ok_or_else(bad)?;
        let mut lo = Vec::new();
        let mut hi = Vec::new();
        for iv in b.split(',') {
            let (l, h) = iv.split_once(':').ok_or_else(bad)?;
            lo.push(l.trim().parse::<f64>().map_err(|_| bad())?);
            hi.push(h.trim().parse::<f64>().map_err(|_| bad())?);
        }
        let res = r.split(',').map(|n| n.trim().parse::<usize>().map_err(|_| bad())).collect::<Result<Vec<_>>>()?;
        Grid::new(Aabb::new(lo, hi)?, res)
    }
}

/// Samples on a [`Grid`], multilinearly interpolated inside the box and zero
/// outside it.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    grid: Grid,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::DimensionMismatch { expected: grid.len(), found: values.len() });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Invalid(format!("non-finite grid value at index {i}")));
        }
        Ok(Self { grid, values })
    }

    /// Values may contain NaN for masked points.
    pub(crate) fn with_mask(grid: Grid, values: Vec<f64>) -> Self {
        Self { grid, values }
    }

    pub fn sample(grid: Grid, f: &dyn Function) -> Result<Self> {
        let values = grid.points().iter().map(|p| f.value(p)).collect::<Result<Vec<_>>>()?;
        Self::new(grid, values)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn masked_count(&self) -> usize {
        self.values.iter().filter(|v| v.is_nan()).count()
    }

    /// Largest `|f|` over unmasked nodes.
    pub fn max_abs(&self) -> f64 {
        self.values.iter().filter(|v| !v.is_nan()).fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Largest nodewise difference over nodes unmasked in both.
    pub fn max_abs_diff(&self, other: &GridFunction) -> Result<f64> {
        if self.grid != other.grid {
            return Err(Error::Invalid("grids differ".into()));
        }
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .filter(|(a, b)| !a.is_nan() && !b.is_nan())
            .fold(0.0, |m, (a, b)| m.max((a - b).abs())))
    }

    pub fn interpolate(&self, x: &[f64]) -> f64 {
        let g = &self.grid;
        if x.len() != g.dim() || !g.bx.contains(x) {
            return 0.0;
        }
        let h = g.spacing();
        let mut base = vec![0usize; g.dim()];
        let mut frac = vec![0.0; g.dim()];
        for k in 0..g.dim() {
            let t = (x[k] - g.bx.lo[k]) / h[k];
            let j = (t.floor() as usize).min(g.res[k] - 2);
            base[k] = j;
            frac[k] = t - j as f64;
        }
        let mut acc = 0.0;
        for corner in 0..(1usize << g.dim()) {
            let mut w = 1.0;
            let mut idx = 0;
            for k in 0..g.dim() {
                let bit = (corner >> k) & 1;
                w *= if bit == 1 { frac[k] } else { 1.0 - frac[k] };
                idx = idx * g.res[k] + base[k] + bit;
            }
            if w != 0.0 {
                acc += w * self.values[idx];
            }
        }
        acc
    }

    /// `# box=lo:hi,...;res=n,...` followed by one value per line.
    pub fn to_csv(&self) -> String {
        let mut s = self.grid.header();
        s.push('\n');
        for v in &self.values {
            if v.is_nan() {
                s.push_str("nan\n");
            } else {
                let _ = writeln!(s, "{v:e}");
            }
        }
        s
    }

    /// Reads a grid written by [`to_csv`](Self::to_csv); rejects `nan`.
    pub fn from_csv(text: &str) -> Result<Self> {
        let (grid, values) = parse_csv(text)?;
        Self::new(grid, values)
    }

    /// Like [`from_csv`](Self::from_csv) but keeps masked (`nan`) entries.
    pub fn from_csv_masked(text: &str) -> Result<Self> {
        let (grid, values) = parse_csv(text)?;
        if values.len() != grid.len() {
            return Err(Error::DimensionMismatch { expected: grid.len(), found: values.len() });
        }
        Ok(Self::with_mask(grid, values))
    }
}

fn parse_csv(text: &str) -> Result<(Grid, Vec<f64>)> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines.next().ok_or_else(|| Error::Config("empty grid file".into()))?;
    let grid = Grid::parse_header(header.trim())?;
    let values = lines
        .map(|l| l.trim().parse::<f64>().map_err(|_| Error::Config(format!("bad grid value '{l}'"))))
        .collect::<Result<Vec<_>>>()?;
    Ok((grid, values))
}

impl Function for GridFunction {
    fn value(&self, x: &[f64]) -> Result<f64> {
        Ok(self.interpolate(x))
    }

    fn support(&self) -> Option<Aabb> {
        Some(self.grid.bx.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn multilinear_is_exact_on_bilinear_functions() {
        let g = Grid::new(Aabb::from_intervals(&[[-1.0, 1.0], [0.0, 2.0]]).unwrap(), vec![5, 7]).unwrap();
        let f = |p: &[f64]| 1.0 + 2.0 * p[0] - p[1] + 0.5 * p[0] * p[1];
        let vals = g.points().iter().map(|p| f(p)).collect();
        let gf = GridFunction::new(g, vals).unwrap();
        for p in [[0.13, 1.71], [-0.99, 0.02], [1.0, 2.0]] {
            assert!((gf.interpolate(&p) - f(&p)).abs() < 1e-13);
        }
        assert_eq!(gf.interpolate(&[1.5, 1.0]), 0.0);
    }

    #[test]
    fn csv_round_trip() {
        let g = Grid::uniform(Aabb::from_intervals(&[[-1.5, 2.0]]).unwrap(), 4).unwrap();
        let gf = GridFunction::new(g, vec![0.1, -2.5e-12, 3.0, 1.0 / 3.0]).unwrap();
        let back = GridFunction::from_csv(&gf.to_csv()).unwrap();
        assert_eq!(back, gf);
        assert!(GridFunction::from_csv("# box=0:1;res=2\n1\n").is_err());
    }

    #[test]
    fn point_order_is_row_major() {
        let g = Grid::new(Aabb::from_intervals(&[[0.0, 1.0], [0.0, 2.0]]).unwrap(), vec![2, 3]).unwrap();
        assert_eq!(g.point(1), vec![0.0, 1.0]);
        assert_eq!(g.point(3), vec![1.0, 0.0]);
    }
}
