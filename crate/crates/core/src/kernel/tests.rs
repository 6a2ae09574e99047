use std::sync::Arc;

use super::*;
use crate::bisubmersion::{make_addition_morphism, make_path_holonomy, restrict};
use crate::foliation::canonical;
use crate::quadrature::QuadratureConfig;

fn bx(iv: &[[f64; 2]]) -> Aabb {
    Aabb::from_intervals(iv).unwrap()
}

fn expr(s: &str, n: usize, m: usize) -> ScalarExpr {
    ScalarExpr::parse_with(s, n, m).unwrap()
}

fn t_host() -> Bisubmersion {
    make_path_holonomy(Arc::new(canonical::translation()))
}

fn quad() -> QuadratureConfig {
    QuadratureConfig::with_order(24)
}

fn op(k: &FibredKernel, f: &dyn Fn(f64) -> f64, x: f64) -> f64 {
    k.op_value(&[x], &|y| Ok(f(y[0])), &quad()).unwrap()
}

fn gaussian_density(host: &Bisubmersion) -> FibredKernel {
    // normalized polynomial bump on [-1, 1]
    let a = expr("(1-xi1^2)^4*315/256", 1, 1);
    density(host, a, bx(&[[-1.0, 1.0]]), bx(&[[-3.0, 3.0]]), Side::R).unwrap()
}

fn bump(a: f64) -> f64 {
    if a.abs() >= 1.0 {
        0.0
    } else {
        (1.0 - a * a).powi(4) * 315.0 / 256.0
    }
}

fn simpson(a: f64, b: f64, n: usize, g: impl Fn(f64) -> f64) -> f64 {
    let h = (b - a) / n as f64;
    let mut s = g(a) + g(b);
    for i in 1..n {
        s += g(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

#[test]
fn dirac_pairing_matches_definition() {
    let u = t_host();
    let s = Bisection::constant(&u, vec![0.5], bx(&[[-3.0, 2.5]])).unwrap();
    let k = dirac(&s, expr("exp(-4*x1^2)", 1, 0), Side::R).unwrap();
    let atom = &k.atoms()[0];
    let phi = |w: &[f64]| Ok(w[0] * 10.0 + w[1]);
    for x in [-1.0, 0.2, 1.3] {
        let v = atom.pair(Side::R, &[x], &phi, &quad()).unwrap();
        let expected = (-4.0 * x * x).exp() * (0.5 * 10.0 + (x - 0.5));
        assert!((v - expected).abs() < 1e-9, "{v} vs {expected}");
    }
    // outside r(S) = [-2.5, 3]
    assert_eq!(atom.pair(Side::R, &[-2.8], &phi, &quad()).unwrap(), 0.0);
    let ks = dirac(&s, expr("exp(-4*x1^2)", 1, 0), Side::S).unwrap();
    assert_eq!(ks.atoms()[0].pair(Side::S, &[2.7], &phi, &quad()).unwrap(), 0.0);
}

#[test]
fn dirac_support_violation() {
    let u = t_host();
    let s = Bisection::constant(&u, vec![0.5], bx(&[[-1.0, 1.0]])).unwrap();
    assert!(matches!(dirac(&s, expr("1", 1, 0), Side::R), Err(Error::SupportViolation(_))));
    let id = Bisection::identity(&u, bx(&[[-3.0, 3.0]])).unwrap();
    let k = dirac(&id, expr("1", 1, 0), Side::R).unwrap();
    let f = |x: f64| (1.0 - x * x).max(0.0).powi(3);
    for x in [-0.7, 0.0, 0.4] {
        assert!((op(&k, &f, x) - f(x)).abs() < 1e-12);
    }
}

#[test]
fn density_matches_convolution_oracle() {
    let k = gaussian_density(&t_host());
    let f = |x: f64| (-(x - 0.3f64).powi(2)).exp();
    for x in [-0.8, 0.0, 0.6] {
        let oracle = simpson(-1.0, 1.0, 4000, |a| bump(a) * f(x - a));
        assert!((op(&k, &f, x) - oracle).abs() < 1e-6);
    }
    let zero = density(&t_host(), expr("0", 1, 1), bx(&[[-1.0, 1.0]]), bx(&[[-3.0, 3.0]]), Side::R).unwrap();
    assert_eq!(op(&zero, &f, 0.1), 0.0);
}

#[test]
fn pairing_is_base_linear() {
    let k = gaussian_density(&t_host());
    let g = |x: &[f64]| 1.0 + x[0] * x[0];
    for x in [-0.5, 0.25] {
        let base = k.pair(&[x], &|h, u| Ok(h.s(u)?[0].sin() + u[0]), &quad()).unwrap();
        let scaled = k
            .pair(&[x], &|h, u| Ok(g(&h.r(u)?) * (h.s(u)?[0].sin() + u[0])), &quad())
            .unwrap();
        assert!((scaled - g(&[x]) * base).abs() < 1e-9);
    }
}

#[test]
fn dirac_convolution_composes_translations() {
    let u = make_path_holonomy(Arc::new(canonical::rotation()));
    let b = bx(&[[-1.2, 1.2], [-1.2, 1.2]]);
    let s = Bisection::constant(&u, vec![0.4], b.clone()).unwrap();
    let t = Bisection::constant(&u, vec![0.9], b).unwrap();
    let c = expr("x1*exp(-16*(x1^2+x2^2))", 2, 0);
    let a1 = dirac(&s, expr("exp(-16*(x1^2+x2^2))", 2, 0), Side::R).unwrap();
    let a2 = dirac(&t, c, Side::R).unwrap();
    let prod = convolve(&a1, &a2).unwrap();
    assert_eq!(prod.atoms().len(), 1);
    assert!(prod.atoms()[0].is_dirac());
    let f = |p: &[f64]| Ok(p[0] * p[0] + (p[1] + 0.2).sin());
    for x in [[0.3, 0.2], [-0.5, 0.1], [0.0, -0.6]] {
        let inner = |y: &[f64]| a2.op_value(y, &f, &quad());
        let lhs = prod.op_value(&x, &f, &quad()).unwrap();
        let rhs = a1.op_value(&x, &inner, &quad()).unwrap();
        assert!((lhs - rhs).abs() < 1e-7, "{lhs} vs {rhs}");
    }
}

#[test]
fn mixed_convolutions_are_densities() {
    let u = t_host();
    let s = Bisection::constant(&u, vec![0.5], bx(&[[-3.0, 2.5]])).unwrap();
    let d = dirac(&s, expr("exp(-4*x1^2)", 1, 0), Side::R).unwrap();
    let g = gaussian_density(&u);
    for (a, b) in [(&d, &g), (&g, &d)] {
        let p = convolve(a, b).unwrap();
        assert!(p.atoms().iter().all(Atom::is_density));
        let f = |y: &[f64]| Ok((-(y[0] - 0.2).powi(2)).exp());
        for x in [-0.4, 0.3] {
            let lhs = p.op_value(&[x], &f, &quad()).unwrap();
            let rhs = a.op_value(&[x], &|y| b.op_value(y, &f, &quad()), &quad()).unwrap();
            assert!((lhs - rhs).abs() < 1e-9);
        }
    }
    let gg = convolve(&g, &g).unwrap();
    assert!(matches!(gg.atoms()[0], Atom::Convolved { .. }));
}

#[test]
fn convolution_errors_and_disjoint_supports() {
    let u = t_host();
    let g = gaussian_density(&u);
    assert!(matches!(convolve(&g, &g.transpose()), Err(Error::SideMismatch(_))));
    let r = make_path_holonomy(Arc::new(canonical::scaling()));
    let other = density(&r, expr("1", 1, 1), bx(&[[-0.1, 0.1]]), bx(&[[-1.0, 1.0]]), Side::R).unwrap();
    assert!(matches!(convolve(&g, &other), Err(Error::BaseMismatch(_))));

    let narrow = |lo: f64, hi: f64| {
        density(&u, expr("1", 1, 1), bx(&[[-0.1, 0.1]]), bx(&[[lo, hi]]), Side::R).unwrap()
    };
    // s(supp a) ⊆ [-2.9, -1.9], r(supp b) = [1, 2]
    assert!(convolve(&narrow(-2.8, -2.0), &narrow(1.0, 2.0)).unwrap().is_zero());
    assert!(!convolve(&narrow(1.0, 2.0), &narrow(1.0, 2.0)).unwrap().is_zero());
}

#[test]
fn transpose_is_an_involution() {
    let u = t_host();
    let s = Bisection::constant(&u, vec![0.5], bx(&[[-3.0, 2.5]])).unwrap();
    let d = dirac(&s, expr("exp(-4*x1^2)", 1, 0), Side::R).unwrap();
    let g = gaussian_density(&u);
    let k = convolve(&g, &g).unwrap().add(&convolve(&d, &g).unwrap()).unwrap().add(&d).unwrap();
    assert_eq!(k.transpose().transpose(), k);
    assert_eq!(k.transpose().side(), Side::S);
}

#[test]
fn pushforward_pairing_identity() {
    let u = t_host();
    let g = gaussian_density(&u);
    let gg = convolve(&g, &g).unwrap();
    let pi = make_addition_morphism(&u).unwrap();
    let q = QuadratureConfig::with_order(32);
    let pushed = pushforward(&pi, &gg, &q).unwrap();
    assert!(pushed.atoms()[0].is_density());
    let phi = |w: &[f64]| Ok((w[0] * 0.7).cos() * (-(w[1] - 0.1).powi(2)).exp());
    for x in [-0.5, 0.4] {
        let lhs = pushed.pair(&[x], &|_, w| phi(w), &q).unwrap();
        let rhs = gg.pair(&[x], &|_, w| phi(&pi.apply(w)?), &q).unwrap();
        assert!((lhs - rhs).abs() < 1e-7, "{lhs} vs {rhs}");
    }
    // The pushed profile is the self-convolution of the bump.
    let Atom::Density(d) = &pushed.atoms()[0] else { unreachable!() };
    assert_eq!(d.xi_box(), &bx(&[[-2.0, 2.0]]));
    for zeta in [0.0, 0.35, 1.7] {
        let w = d.host().chart(Side::R, &[0.0], &[zeta]).unwrap().unwrap();
        let exact = simpson(-1.0, 1.0, 4000, |b| bump(zeta - b) * bump(b));
        assert!((d.value(&[zeta], &[0.0], &w).unwrap() - exact).abs() < 1e-9);
    }

    let wrong = pushforward(&pi, &g, &q);
    assert!(matches!(wrong, Err(Error::HostMismatch(_))));
}

#[test]
fn inclusion_pushforward_extends_by_zero() {
    let u = t_host();
    let r = restrict(&u, bx(&[[-1.0, 1.0], [-3.0, 3.0]])).unwrap();
    let a = density(&r, expr("(1-xi1^2)^3", 1, 1), bx(&[[-1.0, 1.0]]), bx(&[[-2.0, 2.0]]), Side::R).unwrap();
    let inc = Morphism::inclusion(&r).unwrap();
    let pushed = pushforward(&inc, &a, &quad()).unwrap();
    let f = |y: &[f64]| Ok(y[0].cos());
    for x in [-0.9, 0.0, 0.8] {
        let lhs = pushed.op_value(&[x], &f, &quad()).unwrap();
        let rhs = a.op_value(&[x], &f, &quad()).unwrap();
        assert!((lhs - rhs).abs() < 1e-12);
    }
}

#[test]
fn conversion_factors() {
    let u = t_host();
    assert!((conversion_factor(&u, &[0.7, 0.2]).unwrap() - 1.0).abs() < 1e-12);
    let s = make_path_holonomy(Arc::new(canonical::scaling()));
    for (xi, x) in [(0.3, 0.5), (-0.6, 1.2), (0.5, -0.4)] {
        let f = conversion_factor(&s, &[xi, x]).unwrap();
        assert!((f - f64::exp(xi)).abs() < 1e-7);
    }
    let d = dirac(&Bisection::identity(&u, bx(&[[-3.0, 3.0]])).unwrap(), expr("1", 1, 0), Side::R).unwrap();
    assert!(matches!(r_to_s_convert(&d, None), Err(Error::NotTransverse(_))));
}

#[test]
fn pullback_identities() {
    let k = gaussian_density(&t_host());
    let phi = |h: &Bisubmersion, u: &[f64]| Ok(h.s(u)?[0].cos() + u[0]);
    let id = pullback_base(BaseMap::identity(1), &k).unwrap();
    let p = BaseMap::new(1, vec![expr("0.5*x1 + 0.1", 1, 0)]).unwrap();
    let pk = pullback_base(p.clone(), &k).unwrap();
    let p2 = BaseMap::new(1, vec![expr("x1^2 - 0.3", 1, 0)]).unwrap();
    let ppk = pk.pullback(p2.clone()).unwrap();
    for y in [-0.6, 0.3] {
        let base = k.pair(&[y], &phi, &quad()).unwrap();
        assert_eq!(id.pair(&[y], &|h, _, u| phi(h, u), &quad()).unwrap(), base);
        let py = p.eval(&[y]).unwrap();
        let lhs = pk.pair(&[y], &|h, _, u| phi(h, u), &quad()).unwrap();
        assert!((lhs - k.pair(&py, &phi, &quad()).unwrap()).abs() < 1e-9);
        let pp = p.eval(&p2.eval(&[y]).unwrap()).unwrap();
        let lhs = ppk.pair(&[y], &|h, _, u| phi(h, u), &quad()).unwrap();
        assert!((lhs - k.pair(&pp, &phi, &quad()).unwrap()).abs() < 1e-9);
    }
}

#[test]
fn nesting_limit_is_enforced() {
    let g = gaussian_density(&t_host());
    let mut k = g.clone();
    for _ in 0..3 {
        k = convolve(&k, &g).unwrap();
    }
    assert_eq!(k.depth(), 3);
    let q = QuadratureConfig { order: 4, nesting_limit: 2 };
    assert!(matches!(k.op_value(&[0.0], &|_| Ok(1.0), &q), Err(Error::NestingLimit(2))));
}

#[test]
fn support_boxes() {
    let u = t_host();
    let s = Bisection::constant(&u, vec![1.0], bx(&[[-3.0, 2.0]])).unwrap();
    let d = dirac(&s, expr("exp(-8*x1^2)", 1, 0), Side::R).unwrap();
    let b = propagate_support(&d, &bx(&[[0.0, 1.0]])).unwrap();
    assert!(b.lo[0] <= 1.0 && b.hi[0] >= 2.0);
    let sup = support_of(&d);
    assert!(sup.r.unwrap().contains(&[2.9]));
    let g = gaussian_density(&u);
    let sum = support_of(&g.add(&d).unwrap());
    assert!(sum.s.unwrap().contains_box(&bx(&[[-3.0, 2.0]])));
}
