//! Singular foliations given by generating vector fields on a chart box.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::{lie_bracket, parse_field, ScalarExpr, VectorFieldExpr};
use crate::flow::{exp_flow, FlowConfig};
use crate::geometry::{Aabb, PointIndex};

/// Generators `X_1..X_m` on a chart box `M0 ⊂ ℝⁿ`, with the ξ-radius that
/// bounds the parameter domain of path-holonomy bisubmersions.
#[derive(Debug, Clone, PartialEq)]
pub struct SingularFoliation {
    name: String,
    dim: usize,
    chart: Aabb,
    generators: Vec<VectorFieldExpr>,
    jacobians: Vec<Vec<Vec<ScalarExpr>>>,
    xi_radius: Vec<f64>,
    flow: FlowConfig,
}

impl SingularFoliation {
    pub fn new(name: &str, chart: Aabb, generators: Vec<VectorFieldExpr>, xi_radius: Vec<f64>) -> Result<Self> {
        let dim = chart.dim();
        if dim == 0 {
            return Err(Error::Invalid("chart box must have positive dimension".into()));
        }
        for g in &generators {
            if g.dim() != dim {
                return Err(Error::DimensionMismatch { expected: dim, found: g.dim() });
            }
        }
        if xi_radius.len() != generators.len() {
            return Err(Error::DimensionMismatch { expected: generators.len(), found: xi_radius.len() });
        }
        if xi_radius.iter().any(|r| !(*r > 0.0 && r.is_finite())) {
            return Err(Error::Invalid("xi_radius must be positive".into()));
        }
        let jacobians = generators.iter().map(VectorFieldExpr::jacobian_exprs).collect();
        Ok(Self {
            name: name.to_string(),
            dim,
            chart,
            generators,
            jacobians,
            xi_radius,
            flow: FlowConfig::default(),
        })
    }

    /// Builds a foliation from field strings such as `"[-x2, x1]"`.
    pub fn parse(name: &str, chart: Aabb, generators: &[&str], xi_radius: Vec<f64>) -> Result<Self> {
        let dim = chart.dim();
        let gens = generators.iter().map(|g| parse_field(g, dim)).collect::<Result<Vec<_>>>()?;
        Self::new(name, chart, gens, xi_radius)
    }

    pub fn with_flow_config(mut self, cfg: FlowConfig) -> Self {
        self.flow = cfg;
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn chart(&self) -> &Aabb {
        &self.chart
    }

    pub fn generators(&self) -> &[VectorFieldExpr] {
        &self.generators
    }

    pub fn generator(&self, i: usize) -> &VectorFieldExpr {
        &self.generators[i]
    }

    pub fn generator_count(&self) -> usize {
        self.generators.len()
    }

    pub fn xi_radius(&self) -> &[f64] {
        &self.xi_radius
    }

    pub fn xi_box(&self) -> Aabb {
        Aabb::symmetric(&self.xi_radius)
    }

    pub fn flow_config(&self) -> &FlowConfig {
        &self.flow
    }

    /// `Σ ξ_i X_i(p)` written into `out`.
    pub fn combined_field(&self, xi: &[f64], p: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        for (g, w) in self.generators.iter().zip(xi) {
            if *w == 0.0 {
                continue;
            }
            for (o, c) in out.iter_mut().zip(g.components()) {
                *o += w * c.eval(p, &[]);
            }
        }
    }

    /// `Σ ξ_i DX_i(p)` written into `out`.
    pub fn combined_jacobian(&self, xi: &[f64], p: &[f64], out: &mut DMatrix<f64>) {
        out.fill(0.0);
        for (jac, w) in self.jacobians.iter().zip(xi) {
            if *w == 0.0 {
                continue;
            }
            for (r, row) in jac.iter().enumerate() {
                for (c, e) in row.iter().enumerate() {
                    if !e.is_zero() {
                        out[(r, c)] += w * e.eval(p, &[]);
                    }
                }
            }
        }
    }

    /// The n×m matrix `[X_1(x) … X_m(x)]`.
    pub fn generator_matrix(&self, x: &[f64]) -> DMatrix<f64> {
        let mut g = DMatrix::zeros(self.dim, self.generator_count());
        for (i, gen) in self.generators.iter().enumerate() {
            for (r, v) in gen.eval(x).into_iter().enumerate() {
                g[(r, i)] = v;
            }
        }
        g
    }
}

/// Numerical rank with cutoff `σ ≥ 1e-8·max(1, σ_max)`.
pub(crate) fn numerical_rank(m: &DMatrix<f64>) -> usize {
    if m.is_empty() {
        return 0;
    }
    column_space(m).len()
}

/// Pointwise leaf dimension: rank of the generator matrix at `x`.
pub fn leaf_dimension(f: &SingularFoliation, x: &[f64]) -> usize {
    numerical_rank(&f.generator_matrix(x))
}

#[derive(Debug, Clone, Serialize)]
pub struct InvolutivityReport {
    pub pass: bool,
    pub points_checked: usize,
    pub worst_residual: f64,
    pub worst_point: Vec<f64>,
    pub worst_pair: Option<(usize, usize)>,
}

/// Spot-checks `[X_i, X_j](p) ∈ span{X_k(p)}` by least squares on a
/// deterministic grid (odd node count, so coordinate hyperplanes through the
/// centre are hit) plus `samples` seeded random points of the chart box.
///
/// This is only a pointwise necessary condition; it gates nothing.
pub fn involutivity_check(f: &SingularFoliation, samples: usize, tol: f64) -> InvolutivityReport {
    let mut points = f.chart().grid(grid_count(samples.max(1), f.dim()));
    let mut rng = ChaCha8Rng::seed_from_u64(0x1f0_1a7e);
    let chart = f.chart();
    for _ in 0..samples {
        points.push((0..f.dim()).map(|k| rng.gen_range(chart.lo[k]..=chart.hi[k])).collect());
    }
    let m = f.generator_count();
    let brackets: Vec<(usize, usize, VectorFieldExpr)> = (0..m)
        .flat_map(|i| ((i + 1)..m).map(move |j| (i, j)))
        .map(|(i, j)| (i, j, lie_bracket(f.generator(i), f.generator(j)).expect("same dimension")))
        .collect();

    let mut report = InvolutivityReport {
        pass: true,
        points_checked: points.len(),
        worst_residual: 0.0,
        worst_point: points.first().cloned().unwrap_or_default(),
        worst_pair: None,
    };
    let mut worst_ratio = 0.0;
    for p in &points {
        let g = f.generator_matrix(p);
        let basis = column_space(&g);
        for (i, j, b) in &brackets {
            let b = DVector::from_vec(b.eval(p));
            let projected = basis.iter().fold(DVector::zeros(b.len()), |acc, e| acc + e * e.dot(&b));
            let residual = (&b - projected).norm();
            let ratio = residual / (1.0 + b.norm() + g.norm());
            if ratio > tol {
                report.pass = false;
            }
            if ratio > worst_ratio || report.worst_pair.is_none() {
                worst_ratio = ratio;
                report.worst_residual = residual;
                report.worst_point = p.clone();
                report.worst_pair = Some((*i, *j));
            }
        }
    }
    report
}

/// Orthonormal basis of the column space of `g`, ignoring directions whose
/// singular value falls below `1e-7` of the largest (or of 1). Goes through
/// the symmetric eigenproblem of `g gᵀ`, which is robust for the small
/// matrices met here.
fn column_space(g: &DMatrix<f64>) -> Vec<DVector<f64>> {
    let eig = nalgebra::SymmetricEigen::new(g * g.transpose());
    let top = eig.eigenvalues.iter().copied().fold(1.0, f64::max);
    (0..eig.eigenvalues.len())
        .filter(|&k| eig.eigenvalues[k] >= 1e-14 * top)
        .map(|k| eig.eigenvectors.column(k).into_owned())
        .collect()
}

fn grid_count(samples: usize, dim: usize) -> usize {
    let k = (samples as f64).powf(1.0 / dim as f64).ceil() as usize;
    let k = k.clamp(3, 41);
    if k.is_multiple_of(2) {
        k + 1
    } else {
        k
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LeafOptions {
    /// Deduplication distance.
    pub mesh: f64,
    /// Random flows drawn from each queued point.
    pub draws_per_node: usize,
    pub seed: u64,
}

impl Default for LeafOptions {
    fn default() -> Self {
        Self { mesh: 1e-3, draws_per_node: 16, seed: 7 }
    }
}

/// A sampled leaf. Each point is reached from `basepoint` by a recorded word
/// of flows, stored as a tree (`parent`, `step`).
#[derive(Debug, Clone, Serialize)]
pub struct LeafSample {
    pub basepoint: Vec<f64>,
    pub points: Vec<Vec<f64>>,
    pub leaf_dim: usize,
    pub mesh: f64,
    pub parent: Vec<Option<usize>>,
    pub step: Vec<Vec<f64>>,
    pub escapes: usize,
    pub flows: usize,
}

impl LeafSample {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// The flow word `[ξ^(1), …, ξ^(k)]` leading from the basepoint to point `i`.
    pub fn word(&self, i: usize) -> Vec<Vec<f64>> {
        let mut w = Vec::new();
        let mut cur = i;
        while let Some(p) = self.parent[cur] {
            w.push(self.step[cur].clone());
            cur = p;
        }
        w.reverse();
        w
    }

    /// Recomputes point `i` by applying its word from the basepoint.
    pub fn replay(&self, f: &SingularFoliation, i: usize) -> Result<Vec<f64>> {
        let mut x = self.basepoint.clone();
        for xi in self.word(i) {
            x = exp_flow(f, &xi, &x, f.flow_config())?;
        }
        Ok(x)
    }
}

/// Breadth-first orbit exploration: from each queued point, apply `exp_flow`
/// with random `ξ` inside the ξ-radius and keep results farther than `mesh`
/// from every stored point. At most `budget` flows are computed; escapes
/// from the chart are counted, not fatal.
pub fn leaf_sample(f: &SingularFoliation, x0: &[f64], budget: usize, opts: &LeafOptions) -> Result<LeafSample> {
    if x0.len() != f.dim() {
        return Err(Error::DimensionMismatch { expected: f.dim(), found: x0.len() });
    }
    if !f.chart().contains(x0) {
        return Err(Error::DomainEscape { t: 0.0, point: x0.to_vec() });
    }
    if !(opts.mesh > 0.0) {
        return Err(Error::Invalid("leaf mesh must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut index = PointIndex::new(f.dim(), opts.mesh);
    index.insert(x0.to_vec());
    let mut sample = LeafSample {
        basepoint: x0.to_vec(),
        points: vec![x0.to_vec()],
        leaf_dim: leaf_dimension(f, x0),
        mesh: opts.mesh,
        parent: vec![None],
        step: vec![vec![]],
        escapes: 0,
        flows: 0,
    };
    let radius = f.xi_radius().to_vec();
    let mut head = 0;
    while head < sample.points.len() && sample.flows < budget {
        let base = sample.points[head].clone();
        for _ in 0..opts.draws_per_node.max(1) {
            if sample.flows >= budget {
                break;
            }
            sample.flows += 1;
            let xi: Vec<f64> = radius.iter().map(|r| rng.gen_range(-r..=*r)).collect();
            match exp_flow(f, &xi, &base, f.flow_config()) {
                Ok(p) => {
                    if index.nearest_within(&p, opts.mesh).is_none() {
                        index.insert(p.clone());
                        sample.points.push(p);
                        sample.parent.push(Some(head));
                        sample.step.push(xi);
                    }
                }
                Err(Error::DomainEscape { .. }) => sample.escapes += 1,
                Err(e) => return Err(e),
            }
        }
        head += 1;
    }
    Ok(sample)
}

/// The four canonical test foliations plus a non-involutive negative control.
pub mod canonical {
    use super::*;

    /// Translations `{[1]}` on `[-3, 3]`.
    pub fn translation() -> SingularFoliation {
        build("T", &[[-3.0, 3.0]], &["[1]"], vec![2.0])
    }

    /// Rotations `{[-x2, x1]}` on `[-2, 2]²`.
    pub fn rotation() -> SingularFoliation {
        build("R", &[[-2.0, 2.0], [-2.0, 2.0]], &["[-x2, x1]"], vec![std::f64::consts::PI])
    }

    /// Scalings `{[x1]}` on `[-2, 2]`.
    pub fn scaling() -> SingularFoliation {
        scaling_on(2.0)
    }

    /// Scalings on `[-half_width, half_width]`; the flow `x·e^ξ` leaves
    /// `[-2, 2]` quickly, so closed-form flow checks need a wider chart.
    pub fn scaling_on(half_width: f64) -> SingularFoliation {
        build("S", &[[-half_width, half_width]], &["[x1]"], vec![0.8])
    }

    /// Commuting coordinate fields `{[1,0], [0,1]}` on `[-2, 2]²`.
    pub fn commuting_pair() -> SingularFoliation {
        build("C", &[[-2.0, 2.0], [-2.0, 2.0]], &["[1, 0]", "[0, 1]"], vec![1.0, 1.0])
    }

    /// `{[1,0], [0,x1]}`: the bracket `[0,1]` leaves the span on `x1 = 0`.
    pub fn non_involutive() -> SingularFoliation {
        build("N", &[[-2.0, 2.0], [-2.0, 2.0]], &["[1, 0]", "[0, x1]"], vec![1.0, 1.0])
    }

    pub fn by_name(name: &str) -> Option<SingularFoliation> {
        match name {
            "T" => Some(translation()),
            "R" => Some(rotation()),
            "S" => Some(scaling()),
            "C" => Some(commuting_pair()),
            "N" => Some(non_involutive()),
            _ => None,
        }
    }

    fn build(name: &str, chart: &[[f64; 2]], gens: &[&str], radius: Vec<f64>) -> SingularFoliation {
        let chart = Aabb::from_intervals(chart).expect("static box");
        SingularFoliation::parse(name, chart, gens, radius).expect("static foliation")
    }
}
