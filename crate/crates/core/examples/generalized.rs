//! Applying a kernel to a generalized function through the density route,
//! with two different reference measures; the result does not depend on
//! the choice.

use std::sync::Arc;

use leafwise::bisubmersion::{make_path_holonomy, Side};
use leafwise::expr::ScalarExpr;
use leafwise::foliation::canonical;
use leafwise::geometry::Aabb;
use leafwise::kernel::density;
use leafwise::op::{apply_generalized, apply_op, FnFunction, Grid, OpConfig};

fn main() -> leafwise::Result<()> {
    let t = make_path_holonomy(Arc::new(canonical::translation()));
    let a = density(
        &t,
        ScalarExpr::parse_with("(1-(xi1/0.6)^2)^3*(1 + 0.1*x1)", 1, 1)?,
        Aabb::from_intervals(&[[-0.6, 0.6]])?,
        Aabb::from_intervals(&[[-3.0, 3.0]])?,
        Side::R,
    )?;
    let k = FnFunction::new(|x: &[f64]| (-x[0] * x[0]).exp() * (1.0 + x[0]));
    let grid = Grid::uniform(Aabb::from_intervals(&[[-1.5, 1.5]])?, 31)?;
    let cfg = OpConfig::default();

    let direct = apply_op(&a, &k, &grid, &cfg)?;
    let lebesgue = apply_generalized(&a, &k, None, &grid, &cfg)?;
    let weight = ScalarExpr::parse("1 + x1^2/10", 1)?;
    let weighted = apply_generalized(&a, &k, Some(&weight), &grid, &cfg)?;
    println!("Lebesgue vs weighted measure: {:.2e}", lebesgue.values.max_abs_diff(&weighted.values)?);
    println!("density route vs Op(a)k:      {:.2e}", lebesgue.values.max_abs_diff(&direct.values)?);
    Ok(())
}
