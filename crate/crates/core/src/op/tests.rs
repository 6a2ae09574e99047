use std::sync::{Arc, Mutex};

use super::*;
use crate::bisubmersion::{make_path_holonomy, Bisection, Bisubmersion, Side};
use crate::foliation::{canonical, leaf_sample, LeafOptions};
use crate::geometry::norm;
use crate::kernel::{convolve, density, dirac};
use crate::quadrature::integrate;

fn bx(iv: &[[f64; 2]]) -> Aabb {
    Aabb::from_intervals(iv).unwrap()
}

fn expr(s: &str, n: usize, m: usize) -> ScalarExpr {
    ScalarExpr::parse_with(s, n, m).unwrap()
}

fn t_host() -> Bisubmersion {
    make_path_holonomy(Arc::new(canonical::translation()))
}

fn bump_density(host: &Bisubmersion, width: f64) -> FibredKernel {
    let a = expr(&format!("(1-(xi1/{width})^2)^4"), 1, 1);
    density(host, a, bx(&[[-width, width]]), bx(&[[-3.0, 3.0]]), Side::R).unwrap()
}

fn bump01(x: &[f64]) -> f64 {
    let t = 2.0 * x[0] - 1.0;
    if t.abs() < 1.0 {
        (1.0 - t * t).powi(4)
    } else {
        0.0
    }
}

#[test]
fn translation_dirac_moves_a_bump() {
    let u = t_host();
    let s = Bisection::constant(&u, vec![1.0], bx(&[[-3.0, 2.0]])).unwrap();
    let a = dirac(&s, expr("1", 1, 0), Side::R).unwrap();
    let f = FnFunction::with_support(bump01, bx(&[[0.0, 1.0]]));
    let grid = Grid::uniform(bx(&[[-1.0, 2.5]]), 71).unwrap();
    let out = apply_op(&a, &f, &grid, &OpConfig::default()).unwrap();
    assert_eq!(out.masked, 0);
    for (p, v) in grid.points().iter().zip(out.values.values()) {
        assert!((v - bump01(&[p[0] - 1.0])).abs() < 1e-9);
    }
    let bound = support_bound(&a, f.support().as_ref()).unwrap();
    assert!(bound.lo[0] <= 1.0 && bound.hi[0] >= 2.0);
    for (p, v) in grid.points().iter().zip(out.values.values()) {
        if !bound.contains(p) {
            assert!(v.abs() <= 1e-12);
        }
    }
    assert!(support_bound(&a, None).is_none());
}

#[test]
fn linearity_and_quadrature_convergence() {
    let u = t_host();
    let a = bump_density(&u, 0.8);
    let b = bump_density(&u, 0.5);
    let f = expr("exp(-x1^2)*cos(2*x1)", 1, 0);
    let grid = Grid::uniform(bx(&[[-1.0, 1.0]]), 21).unwrap();
    let cfg = OpConfig::default();
    let combo = a.scale(2.0).add(&b.scale(-0.5)).unwrap();
    let lhs = apply_op(&combo, &f, &grid, &cfg).unwrap().values;
    let oa = apply_op(&a, &f, &grid, &cfg).unwrap().values;
    let ob = apply_op(&b, &f, &grid, &cfg).unwrap().values;
    for i in 0..grid.len() {
        let rhs = 2.0 * oa.values()[i] - 0.5 * ob.values()[i];
        assert!((lhs.values()[i] - rhs).abs() < 1e-12);
    }
    let fine = apply_op(&a, &f, &grid, &OpConfig::with_order(64)).unwrap().values;
    assert!(fine.max_abs_diff(&oa).unwrap() < 1e-8);
}

#[test]
fn escapes_are_masked_or_fatal() {
    let a = bump_density(&t_host(), 1.0);
    let f = expr("1", 1, 0);
    let grid = Grid::uniform(bx(&[[1.0, 2.9]]), 5).unwrap();
    let out = apply_op(&a, &f, &grid, &OpConfig::default()).unwrap();
    assert!(out.masked > 0);
    assert_eq!(out.values.masked_count(), out.masked);
    let strict = OpConfig { strict: true, ..OpConfig::default() };
    assert!(matches!(apply_op(&a, &f, &grid, &strict), Err(Error::DomainEscape { .. })));
    assert!(matches!(apply_op(&a.transpose(), &f, &grid, &strict), Err(Error::SideMismatch(_))));
}

#[test]
fn adjoint_identity_on_translations() {
    let u = t_host();
    let s = Bisection::constant(&u, vec![0.5], bx(&[[-3.0, 2.5]])).unwrap();
    let d = dirac(&s, expr("exp(-4*x1^2)", 1, 0), Side::S).unwrap();
    let g = bump_density(&u, 0.7).transpose().transpose();
    let gs = crate::kernel::r_to_s_convert(&g, None).unwrap();
    let q = QuadratureConfig::with_order(48);
    let k = expr("exp(-2*x1^2)", 1, 0);
    let f = expr("exp(-(x1-0.3)^2)*(1+x1)", 1, 0);
    let window = bx(&[[-2.2, 2.2]]);
    for b in [d, gs] {
        let bt = b.transpose();
        let lhs = integrate(&window, 60, |y| Ok(b.adjoint_value(y, &|z| k.value(z), &q)? * f.value(y)?)).unwrap();
        let rhs = integrate(&window, 60, |x| Ok(k.value(x)? * bt.op_value(x, &|z| f.value(z), &q)?)).unwrap();
        // k·f decays fast enough that the window cut is below tolerance
        assert!((lhs - rhs).abs() < 1e-6, "{lhs} vs {rhs}");
    }
}

#[test]
fn leaf_action_on_the_circle() {
    let f = Arc::new(canonical::rotation());
    let u = make_path_holonomy(f.clone());
    let leaf = leaf_sample(&f, &[1.0, 0.0], 60_000, &LeafOptions { mesh: 2e-3, ..LeafOptions::default() }).unwrap();
    let a = density(&u, expr("(1-(xi1/0.6)^2)^3", 2, 1), bx(&[[-0.6, 0.6]]), bx(&[[-1.9, 1.9], [-1.9, 1.9]]), Side::R)
        .unwrap();
    let ambient = expr("x1^3 + sin(2*x2) + x1*x2", 2, 0);
    let values: Vec<f64> = leaf.points.iter().map(|p| ambient.value(p).unwrap()).collect();
    let probe: Vec<Vec<f64>> = leaf.points.iter().step_by(leaf.len() / 23).cloned().collect();
    let cfg = OpConfig::default();
    let interp = LeafFunction::new(&leaf, &values).unwrap();
    let (on_leaf, m1) = apply_at_points(&a, &interp, &probe, &cfg).unwrap();
    let (ambient_out, m2) = apply_at_points(&a, &ambient, &probe, &cfg).unwrap();
    assert_eq!(m1 + m2, 0);
    for (x, y) in on_leaf.iter().zip(&ambient_out) {
        assert!((x - y).abs() < 1e-5, "{x} vs {y}");
    }
    // every evaluation point of f lies on the unit circle
    let seen = Mutex::new(Vec::new());
    let recorder = FnFunction::new(|p: &[f64]| {
        seen.lock().unwrap().push(p.to_vec());
        1.0
    });
    op_at(&a, &recorder, &probe[3], &cfg.quad).unwrap();
    let seen = seen.into_inner().unwrap();
    assert_eq!(seen.len(), cfg.quad.order);
    assert!(seen.iter().all(|p| (norm(p) - 1.0).abs() < 1e-8));
    let far = LeafFunction::new(&leaf, &values).unwrap();
    assert!(matches!(far.value(&[0.0, 0.5]), Err(Error::InsufficientLeafSampling { .. })));
}

#[test]
fn convolved_support_bound_is_respected() {
    let u = t_host();
    let a = bump_density(&u, 0.4);
    let s = Bisection::constant(&u, vec![-0.7], bx(&[[-2.3, 3.0]])).unwrap();
    let d = dirac(&s, expr("exp(-8*x1^2)", 1, 0), Side::R).unwrap();
    let k = convolve(&a, &a).unwrap().add(&convolve(&d, &a).unwrap()).unwrap();
    let f = FnFunction::with_support(bump01, bx(&[[0.0, 1.0]]));
    let bound = support_bound(&k, f.support().as_ref()).unwrap();
    let grid = Grid::uniform(bx(&[[-1.8, 2.0]]), 77).unwrap();
    let out = apply_op(&k, &f, &grid, &OpConfig::with_order(16)).unwrap();
    let mut inside = 0.0f64;
    for (p, v) in grid.points().iter().zip(out.values.values()) {
        if bound.contains(p) {
            inside = inside.max(v.abs());
        } else {
            assert!(v.abs() <= 1e-10, "{v} at {p:?} outside {bound:?}");
        }
    }
    assert!(inside > 1e-3);
}
