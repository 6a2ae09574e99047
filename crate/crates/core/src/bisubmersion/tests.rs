use std::f64::consts::FRAC_PI_2;
use std::sync::Arc;

use super::*;
use crate::expr::ScalarExpr;
use crate::foliation::canonical;
use crate::geometry::max_abs_diff;

fn ph(f: SingularFoliation) -> Bisubmersion {
    make_path_holonomy(Arc::new(f))
}

fn bx(iv: &[[f64; 2]]) -> Aabb {
    Aabb::from_intervals(iv).unwrap()
}

#[test]
fn path_holonomy_maps() {
    let u = ph(canonical::rotation());
    assert_eq!(u.dim(), 3);
    assert_eq!(u.s(&[0.4, 0.3, -0.2]).unwrap(), vec![0.3, -0.2]);
    assert_eq!(u.r(&[0.0, 0.3, -0.2]).unwrap(), vec![0.3, -0.2]);
    let y = u.r(&[FRAC_PI_2, 1.0, 0.0]).unwrap();
    assert!(dist(&y, &[0.0, 1.0]) < 1e-8);
}

#[test]
fn composition_structure() {
    let u = ph(canonical::translation());
    let c = compose(&u, &u).unwrap();
    assert_eq!(c.dim(), u.dim() + u.dim() - 1);
    // (η, y) ∘ (ξ, x) needs y = x + ξ.
    assert!(c.contains(&[0.2, 0.5, 0.3, 0.2]).unwrap());
    assert!(!c.contains(&[0.2, 0.6, 0.3, 0.2]).unwrap());
    assert!((c.r(&[0.2, 0.5, 0.3, 0.2]).unwrap()[0] - 0.7).abs() < 1e-12);
    assert_eq!(c.s(&[0.2, 0.5, 0.3, 0.2]).unwrap(), vec![0.2]);
    let other = ph(canonical::scaling());
    assert!(matches!(compose(&u, &other), Err(Error::BaseMismatch(_))));
}

#[test]
fn inverse_is_an_involution() {
    let u = ph(canonical::rotation());
    let t = invert(&u);
    let w = [0.7, 0.5, -0.5];
    assert_eq!(t.r(&w).unwrap(), u.s(&w).unwrap());
    assert_eq!(t.s(&w).unwrap(), u.r(&w).unwrap());
    assert_eq!(invert(&t), u);
}

#[test]
fn fibre_charts() {
    let u = ph(canonical::rotation());
    let x = [0.6, -0.8];
    let a = [1.1];
    let us = u.chart(Side::S, &x, &a).unwrap().unwrap();
    assert_eq!(u.s(&us).unwrap(), x.to_vec());
    let ur = u.chart(Side::R, &x, &a).unwrap().unwrap();
    assert!(dist(&u.r(&ur).unwrap(), &x) < 1e-7);

    let c = compose(&u, &u).unwrap();
    assert_eq!(c.fibre_dim(), 2);
    for side in [Side::R, Side::S] {
        let w = c.chart(side, &x, &[0.4, -0.9]).unwrap().unwrap();
        assert!(c.contains(&w).unwrap());
        assert!(dist(&c.map(side, &w).unwrap(), &x) < 1e-7);
        assert_eq!(c.fibre_coords(&w), vec![0.4, -0.9]);
    }
    let t = invert(&c);
    let w = t.chart(Side::S, &x, &[0.4, -0.9]).unwrap().unwrap();
    assert!(dist(&t.s(&w).unwrap(), &x) < 1e-7);
}

#[test]
fn constant_bisection_diffeo() {
    let u = ph(canonical::rotation());
    let full = bx(&[[-1.4, 1.4], [-1.4, 1.4]]);
    let s = Bisection::constant(&u, vec![FRAC_PI_2], full.clone()).unwrap();
    assert!(dist(&s.phi(&[1.0, 0.0]).unwrap(), &[0.0, 1.0]) < 1e-8);
    let id = Bisection::identity(&u, full).unwrap();
    assert_eq!(id.phi(&[0.3, 0.1]).unwrap(), vec![0.3, 0.1]);
    for x in [[0.3, 0.1], [-1.2, 0.7], [0.0, 1.3]] {
        let back = s.phi(&s.phi_inv(&x).unwrap()).unwrap();
        assert!(dist(&back, &x) < 1e-7);
    }
}

#[test]
fn xi_field_bisection_inverts_by_newton() {
    let u = ph(canonical::rotation());
    let xi = vec![ScalarExpr::parse("0.3 + 0.1*x1", 2).unwrap()];
    let s = Bisection::xi_field(&u, xi, bx(&[[-1.0, 1.0], [-1.0, 1.0]])).unwrap();
    for x in [[0.5, 0.2], [-0.7, 0.9], [0.0, -0.4]] {
        let y = s.phi(&x).unwrap();
        assert!(dist(&s.phi_inv(&y).unwrap(), &x) < 1e-9);
        let j = s.phi_jacobian(&x).unwrap();
        let h = 1e-6;
        for k in 0..2 {
            let mut p = x;
            p[k] += h;
            let up = s.phi(&p).unwrap();
            p[k] -= 2.0 * h;
            let dn = s.phi(&p).unwrap();
            for r in 0..2 {
                assert!((j[(r, k)] - (up[r] - dn[r]) / (2.0 * h)).abs() < 1e-6);
            }
        }
    }
}

#[test]
fn translates() {
    let f = canonical::translation();
    let u = ph(f);
    let s = Bisection::constant(&u, vec![0.5], bx(&[[-3.0, 2.5]])).unwrap();
    let right = translate(&u, &s, TranslateSide::Right).unwrap();
    let left = translate(&u, &s, TranslateSide::Left).unwrap();
    let w = [0.3, 1.0];
    assert!((right.s(&w).unwrap()[0] - 0.5).abs() < 1e-9);
    assert_eq!(right.r(&w).unwrap(), u.r(&w).unwrap());
    assert!((left.r(&w).unwrap()[0] - 1.8).abs() < 1e-9);
    assert_eq!(left.s(&w).unwrap(), u.s(&w).unwrap());

    let id = Bisection::identity(&u, bx(&[[-3.0, 3.0]])).unwrap();
    let t = translate(&u, &id, TranslateSide::Left).unwrap();
    assert_eq!(t.r(&w).unwrap(), u.r(&w).unwrap());

    let corner = restrict(&u, bx(&[[-0.1, 0.1], [-3.0, -2.5]])).unwrap();
    let far = Bisection::constant(&u, vec![0.1], bx(&[[1.0, 2.0]])).unwrap();
    assert!(matches!(translate(&corner, &far, TranslateSide::Left), Err(Error::EmptyTranslate)));
}

#[test]
fn translate_charts_are_consistent() {
    let u = ph(canonical::rotation());
    let s = Bisection::constant(&u, vec![0.7], bx(&[[-1.2, 1.2], [-1.2, 1.2]])).unwrap();
    for side in [TranslateSide::Left, TranslateSide::Right] {
        let t = translate(&u, &s, side).unwrap();
        let x = [0.4, -0.3];
        for q in [Side::R, Side::S] {
            let w = t.chart(q, &x, &[0.25]).unwrap().unwrap();
            assert!(dist(&t.map(q, &w).unwrap(), &x) < 1e-7, "{side:?} {q}");
        }
    }
}

#[test]
fn s_chart_jacobian_closed_forms() {
    let u = ph(canonical::scaling());
    let m = u.s_chart_jacobian(&[0.3, 0.5]).unwrap();
    assert!((m[(0, 0)] - 0.3f64.exp()).abs() < 1e-9);
    let t = invert(&u);
    let m = t.s_chart_jacobian(&[0.3, 0.5]).unwrap();
    assert!((m[(0, 0)] - (-0.3f64).exp()).abs() < 1e-9);
}

#[test]
fn addition_morphism() {
    let u = ph(canonical::translation());
    let pi = make_addition_morphism(&u).unwrap();
    // ((η, y), (ξ, x)) with y = x + ξ
    let w = [0.4, 0.5, 0.3, 0.2];
    assert_eq!(pi.apply(&w).unwrap(), vec![0.7, 0.2]);
    assert!((u.r(&pi.apply(&w).unwrap()).unwrap()[0] - 0.9).abs() < 1e-12);

    let c = ph(canonical::commuting_pair());
    let pc = make_addition_morphism(&c).unwrap();
    assert!(pc.compatibility_residual(100, 3).unwrap() <= 1e-7);
    assert!(pc.transpose().compatibility_residual(50, 4).unwrap() <= 1e-7);

    let n = ph(canonical::non_involutive());
    assert!(matches!(make_addition_morphism(&n), Err(Error::BracketNotZero { .. })));
}

#[test]
fn inclusion_morphism() {
    let u = ph(canonical::translation());
    let r = restrict(&u, bx(&[[-0.5, 0.5], [-1.0, 1.0]])).unwrap();
    let inc = Morphism::inclusion(&r).unwrap();
    assert_eq!(inc.target(), &u);
    assert!(inc.compatibility_residual(20, 1).unwrap() == 0.0);
    assert!(r.chart(Side::S, &[2.0], &[0.1]).unwrap().is_none());
    assert!(max_abs_diff(&r.chart(Side::S, &[0.5], &[0.1]).unwrap().unwrap(), &[0.1, 0.5]) == 0.0);
}
