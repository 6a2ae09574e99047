//! The addition morphism `U∘U → U` on a commuting foliation pushes a
//! convolution down to a single density without changing its operator.

use std::sync::Arc;

use leafwise::bisubmersion::{make_addition_morphism, make_path_holonomy, Side};
use leafwise::expr::ScalarExpr;
use leafwise::foliation::canonical;
use leafwise::geometry::Aabb;
use leafwise::kernel::{convolve, density, pushforward};
use leafwise::op::{apply_op, FnFunction, Grid, OpConfig};
use leafwise::quadrature::QuadratureConfig;

fn main() -> leafwise::Result<()> {
    let t = make_path_holonomy(Arc::new(canonical::translation()));
    let pi = make_addition_morphism(&t)?;
    let iv = |a: f64, b: f64| Aabb::from_intervals(&[[a, b]]);
    let bump = |w: f64| ScalarExpr::parse_with(&format!("(1-(xi1/{w})^2)^4"), 1, 1);
    let a = density(&t, bump(0.5)?, iv(-0.5, 0.5)?, iv(-3.0, 3.0)?, Side::R)?;
    let b = density(&t, bump(0.3)?, iv(-0.3, 0.3)?, iv(-3.0, 3.0)?, Side::R)?;

    let ab = convolve(&a, &b)?;
    let pushed = pushforward(&pi, &ab, &QuadratureConfig::default())?;
    println!("a*b has depth {}, π_*(a*b) has depth {}", ab.depth(), pushed.depth());

    let f = FnFunction::new(|x: &[f64]| (3.0 * x[0]).sin() * (-x[0] * x[0]).exp());
    let grid = Grid::uniform(iv(-1.5, 1.5)?, 31)?;
    let cfg = OpConfig::default();
    let lhs = apply_op(&pushed, &f, &grid, &cfg)?;
    let rhs = apply_op(&ab, &f, &grid, &cfg)?;
    println!("|Op(π_*(a*b))f - Op(a*b)f| = {:.2e}", lhs.values.max_abs_diff(&rhs.values)?);
    Ok(())
}
