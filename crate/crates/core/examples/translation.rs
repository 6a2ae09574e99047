//! A Dirac kernel on a constant bisection acts as a weighted translation:
//! `Op(cΔ)f(x) = c(x) f(Φ⁻¹(x))`.

use std::f64::consts::FRAC_PI_2;
use std::sync::Arc;

use leafwise::bisubmersion::{make_path_holonomy, Bisection, Side};
use leafwise::expr::ScalarExpr;
use leafwise::foliation::canonical;
use leafwise::geometry::Aabb;
use leafwise::kernel::dirac;
use leafwise::op::{apply_op, FnFunction, Grid, OpConfig};

fn main() -> leafwise::Result<()> {
    let r = make_path_holonomy(Arc::new(canonical::rotation()));
    let quarter = Bisection::constant(&r, vec![FRAC_PI_2], Aabb::from_intervals(&[[-1.4, 1.4]; 2])?)?;
    let c = ScalarExpr::parse("exp(-10*(x1^2 + x2^2))", 2)?;
    let k = dirac(&quarter, c, Side::R)?;

    let f = FnFunction::new(|x: &[f64]| x[0] + 0.5 * x[1] * x[1]);
    let grid = Grid::uniform(Aabb::from_intervals(&[[-1.0, 1.0]; 2])?, 9)?;
    let out = apply_op(&k, &f, &grid, &OpConfig::default())?;

    let mut worst: f64 = 0.0;
    for (p, v) in grid.points().iter().zip(out.values.values()) {
        // Rotating back by a quarter turn sends (x1, x2) to (x2, -x1).
        let expect = (-10.0 * (p[0] * p[0] + p[1] * p[1])).exp() * (p[1] + 0.5 * p[0] * p[0]);
        worst = worst.max((v - expect).abs());
    }
    println!("quarter turn on a 9x9 grid: max error {worst:.2e}");
    Ok(())
}
