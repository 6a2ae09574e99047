//! Operators restricted to a leaf: `Op_L(a)` acts on values known only at
//! the samples of a circle of the rotation foliation and agrees with
//! `(Op(a)f)|_L`.

use std::sync::Arc;

use leafwise::bisubmersion::{make_path_holonomy, Side};
use leafwise::expr::ScalarExpr;
use leafwise::foliation::{canonical, leaf_sample, LeafOptions};
use leafwise::geometry::Aabb;
use leafwise::kernel::density;
use leafwise::op::{apply_at_points, FnFunction, Function, LeafFunction, OpConfig};

fn main() -> leafwise::Result<()> {
    let r = canonical::rotation();
    let leaf = leaf_sample(&r, &[1.0, 0.0], 40_000, &LeafOptions { mesh: 2e-3, ..LeafOptions::default() })?;
    let u = make_path_holonomy(Arc::new(r));
    let a = density(
        &u,
        ScalarExpr::parse_with("(1-(xi1/0.6)^2)^3*(1 + 0.2*x2)", 2, 1)?,
        Aabb::from_intervals(&[[-0.6, 0.6]])?,
        Aabb::from_intervals(&[[-1.9, 1.9]; 2])?,
        Side::R,
    )?;

    let f = FnFunction::new(|x: &[f64]| (2.0 * x[1].atan2(x[0])).cos() + x[0] * x[1]);
    let values: Vec<f64> = leaf.points.iter().map(|p| f.value(p)).collect::<leafwise::Result<_>>()?;
    let cfg = OpConfig::with_order(24);
    // Only the samples are known on the leaf; Op_L interpolates between them.
    let on_leaf = LeafFunction::new(&leaf, &values)?;
    let probes: Vec<Vec<f64>> = leaf.points.iter().step_by(leaf.len() / 24).cloned().collect();
    let (restricted, _) = apply_at_points(&a, &on_leaf, &probes, &cfg)?;
    let (ambient, _) = apply_at_points(&a, &f, &probes, &cfg)?;
    let gap = restricted.iter().zip(&ambient).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    println!("{} leaf samples, {} probes, |Op_L(a)(f|L) - (Op(a)f)|L| = {gap:.2e}", leaf.len(), probes.len());
    Ok(())
}
