//! Transverse conversion of an r-fibred kernel and the duality it satisfies:
//! `<Op(a)f, g> = <f, Op(ã^t)g>` on the scaling foliation.

use std::sync::Arc;

use leafwise::bisubmersion::{make_path_holonomy, Side};
use leafwise::expr::ScalarExpr;
use leafwise::foliation::canonical;
use leafwise::geometry::Aabb;
use leafwise::kernel::{density, r_to_s_convert};
use leafwise::op::{op_at, FnFunction, Function};
use leafwise::quadrature::{integrate, QuadratureConfig};

fn bump(t: f64) -> f64 {
    if t.abs() < 1.0 {
        (1.0 - t * t).powi(6)
    } else {
        0.0
    }
}

fn main() -> leafwise::Result<()> {
    let s = make_path_holonomy(Arc::new(canonical::scaling()));
    let a = density(
        &s,
        ScalarExpr::parse_with("(1-(xi1/0.5)^2)^4*(1 + 0.3*x1)", 1, 1)?,
        Aabb::from_intervals(&[[-0.5, 0.5]])?,
        Aabb::from_intervals(&[[-2.0, 2.0]])?,
        Side::R,
    )?;
    let at = r_to_s_convert(&a, None)?.transpose();

    let window = Aabb::from_intervals(&[[-1.0, 1.0]])?;
    let f = FnFunction::with_support(|x: &[f64]| bump(x[0]) * (1.0 + 0.5 * x[0]), window.clone());
    let g = FnFunction::with_support(|x: &[f64]| bump(x[0]) * (2.0 - x[0]).cos(), window.clone());
    let q = QuadratureConfig::default();

    let lhs = integrate(&window, 64, |x| Ok(op_at(&a, &f, x, &q)? * g.value(x)?))?;
    let rhs = integrate(&window, 64, |y| Ok(f.value(y)? * op_at(&at, &g, y, &q)?))?;
    println!("<Op(a)f, g>     = {lhs:.12}");
    println!("<f, Op(ã^t)g>   = {rhs:.12}");
    println!("difference      = {:.2e}", (lhs - rhs).abs());
    Ok(())
}
