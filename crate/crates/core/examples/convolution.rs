//! Convolution is composition of operators: `Op(a*b) = Op(a)Op(b)` for
//! Dirac and density kernels alike.

use std::sync::Arc;

use leafwise::bisubmersion::{make_path_holonomy, Bisection, Side};
use leafwise::expr::ScalarExpr;
use leafwise::foliation::canonical;
use leafwise::geometry::Aabb;
use leafwise::kernel::{convolve, density, dirac};
use leafwise::op::{apply_op, FnFunction, Grid, OpConfig, OpFunction};

fn main() -> leafwise::Result<()> {
    let t = make_path_holonomy(Arc::new(canonical::translation()));
    let iv = |a: f64, b: f64| Aabb::from_intervals(&[[a, b]]);

    let shift = Bisection::constant(&t, vec![0.5], iv(-3.0, 2.5)?)?;
    let d = dirac(&shift, ScalarExpr::parse("(1 - ((x1 - 0.25)/2.75)^2)^2", 1)?, Side::R)?;
    let blur = density(&t, ScalarExpr::parse_with("(1-(xi1/0.6)^2)^4*(1 + 0.2*x1)", 1, 1)?, iv(-0.6, 0.6)?, iv(-3.0, 3.0)?, Side::R)?;

    let f = FnFunction::new(|x: &[f64]| (-x[0] * x[0]).exp() * (2.0 * x[0]).cos());
    let grid = Grid::uniform(iv(-1.5, 1.5)?, 31)?;
    let cfg = OpConfig::default();

    for (name, a, b) in [("dirac*density", &d, &blur), ("density*dirac", &blur, &d), ("density*density", &blur, &blur)] {
        let ab = convolve(a, b)?;
        let direct = apply_op(&ab, &f, &grid, &cfg)?;
        let inner = OpFunction::new(b, &f, cfg.quad);
        let composed = apply_op(a, &inner, &grid, &cfg)?;
        println!(
            "{name:<16} depth {}  |Op(a*b)f - Op(a)Op(b)f| = {:.2e}",
            ab.depth(),
            direct.values.max_abs_diff(&composed.values)?
        );
    }
    Ok(())
}
