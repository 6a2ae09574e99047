//! Support propagation: `Op(a)f` vanishes outside `supp(a)∘supp(f)`.

use std::sync::Arc;

use leafwise::bisubmersion::{make_path_holonomy, Bisection, Side};
use leafwise::expr::ScalarExpr;
use leafwise::foliation::canonical;
use leafwise::geometry::Aabb;
use leafwise::kernel::{convolve, density, dirac};
use leafwise::op::{apply_op, support_bound, FnFunction, Function, Grid, OpConfig};

fn main() -> leafwise::Result<()> {
    let t = make_path_holonomy(Arc::new(canonical::translation()));
    let iv = |a: f64, b: f64| Aabb::from_intervals(&[[a, b]]);
    let a = density(&t, ScalarExpr::parse_with("(1-(xi1/0.4)^2)^4", 1, 1)?, iv(-0.4, 0.4)?, iv(-3.0, 3.0)?, Side::R)?;
    let shift = Bisection::constant(&t, vec![-0.7], iv(-2.3, 3.0)?)?;
    let d = dirac(&shift, ScalarExpr::parse("exp(-8*x1^2)", 1)?, Side::R)?;
    let k = convolve(&a, &a)?.add(&convolve(&d, &a)?)?;

    let f = FnFunction::with_support(|x: &[f64]| if (0.0..1.0).contains(&x[0]) { (x[0] * (1.0 - x[0])).powi(3) } else { 0.0 }, iv(0.0, 1.0)?);
    let bound = support_bound(&k, f.support().as_ref()).expect("non-empty support");
    println!("support bound: [{:.3}, {:.3}]", bound.lo[0], bound.hi[0]);

    let grid = Grid::uniform(iv(-2.0, 1.8)?, 77)?;
    let out = apply_op(&k, &f, &grid, &OpConfig::default())?;
    let outside = grid
        .points()
        .iter()
        .zip(out.values.values())
        .filter(|(p, _)| !bound.contains(p))
        .map(|(_, v)| v.abs())
        .fold(0.0, f64::max);
    println!("max |Op(k)f| outside the bound: {outside:.1e}");
    Ok(())
}
