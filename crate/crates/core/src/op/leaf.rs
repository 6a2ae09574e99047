use nalgebra::{DMatrix, DVector, SymmetricEigen};

use super::Function;
use crate::error::{Error, Result};
use crate::foliation::LeafSample;
use crate::geometry::{dist, PointIndex};

/// Neighbourhood radius, in units of the leaf mesh, within which samples
/// are used for interpolation.
pub const REACH_FACTOR: f64 = 4.0;
const NEIGHBOURS: usize = 12;

/// A function known only at the sample points of a leaf, interpolated by
/// local least squares in tangent coordinates estimated from the
/// neighbouring samples.
pub struct LeafFunction<'a> {
    leaf: &'a LeafSample,
    values: &'a [f64],
    index: PointIndex,
    reach: f64,
}

impl<'a> LeafFunction<'a> {
    pub fn new(leaf: &'a LeafSample, values: &'a [f64]) -> Result<Self> {
        if values.len() != leaf.len() {
            return Err(Error::DimensionMismatch { expected: leaf.len(), found: values.len() });
        }
        let reach = REACH_FACTOR * leaf.mesh;
        Ok(Self { leaf, values, index: PointIndex::from_points(&leaf.points, reach), reach })
    }

    pub fn reach(&self) -> f64 {
        self.reach
    }
}

impl Function for LeafFunction<'_> {
    fn value(&self, p: &[f64]) -> Result<f64> {
        let mut near: Vec<(f64, usize)> =
            self.index.within(p, self.reach).into_iter().map(|i| (dist(p, self.index.point(i)), i)).collect();
        if near.is_empty() {
            let distance = self.leaf.points.iter().map(|q| dist(p, q)).fold(f64::INFINITY, f64::min);
            return Err(Error::InsufficientLeafSampling { distance, reach: self.reach });
        }
        near.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        near.truncate(NEIGHBOURS);
        let d = self.leaf.leaf_dim;
        let linear = d + 1;
        let quadratic = (d + 1) * (d + 2) / 2;
        let degree = if d > 0 && near.len() > quadratic {
            2
        } else if d > 0 && near.len() > linear {
            1
        } else {
            0
        };
        if degree == 0 {
            return Ok(self.values[near[0].1]);
        }
        let pts: Vec<&[f64]> = near.iter().map(|&(_, i)| self.index.point(i)).collect();
        let n = p.len();
        let k = pts.len();
        let centroid: Vec<f64> = (0..n).map(|j| pts.iter().map(|q| q[j]).sum::<f64>() / k as f64).collect();
        let mut cov = DMatrix::zeros(n, n);
        for q in &pts {
            let v = DVector::from_iterator(n, q.iter().zip(&centroid).map(|(a, c)| a - c));
            cov += &v * v.transpose();
        }
        let eig = SymmetricEigen::new(cov);
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        let basis: Vec<DVector<f64>> = order[..d].iter().map(|&j| eig.eigenvectors.column(j).into_owned()).collect();
        let coords = |q: &[f64]| -> Vec<f64> {
            basis
                .iter()
                .map(|b| b.iter().zip(q.iter().zip(&centroid)).map(|(e, (a, c))| e * (a - c)).sum())
                .collect()
        };
        let features = |t: &[f64]| -> Vec<f64> {
            let mut row = vec![1.0];
            row.extend_from_slice(t);
            if degree == 2 {
                for i in 0..t.len() {
                    for j in i..t.len() {
                        row.push(t[i] * t[j]);
                    }
                }
            }
            row
        };
        let scale = self.leaf.mesh;
        let rows: Vec<Vec<f64>> = pts
            .iter()
            .map(|q| features(&coords(q).iter().map(|c| c / scale).collect::<Vec<_>>()))
            .collect();
        let cols = rows[0].len();
        let a = DMatrix::from_fn(k, cols, |i, j| rows[i][j]);
        let mean = near.iter().map(|&(_, i)| self.values[i]).sum::<f64>() / k as f64;
        let b = DVector::from_iterator(k, near.iter().map(|&(_, i)| self.values[i] - mean));
        let at = a.transpose();
        let coef = (&at * &a)
            .cholesky()
            .map(|c| c.solve(&(&at * b)))
            .ok_or_else(|| Error::Eval("leaf interpolation: degenerate neighbourhood".into()))?;
        let t: Vec<f64> = coords(p).iter().map(|c| c / scale).collect();
        Ok(mean + features(&t).iter().zip(coef.iter()).map(|(f, c)| f * c).sum::<f64>())
    }
}
