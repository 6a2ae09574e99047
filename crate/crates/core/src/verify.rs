//! Verification suites: numerical checks of the calculus on the canonical
//! foliations, plus the user checks declared in a workspace.
//!
//! Every entry records the measured quantity and the bound it is held to.

use std::f64::consts::{E, FRAC_PI_2};
use std::sync::{Arc, Mutex};

use serde::Serialize;

use crate::bisubmersion::{make_addition_morphism, make_path_holonomy, Bisection, Bisubmersion, Side};
use crate::config::{CheckSpec, Workspace};
use crate::error::{Error, Result};
use crate::expr::ScalarExpr;
use crate::flow::{exp_flow, flow_jacobian};
use crate::foliation::{canonical, involutivity_check, leaf_sample, LeafOptions, SingularFoliation};
use crate::geometry::{norm, Aabb};
use crate::kernel::{conversion_factor, convolve, density, dirac, pushforward, r_to_s_convert, Atom, FibredKernel};
use crate::op::{
    apply_adjoint, apply_at_points, apply_generalized, apply_on_leaf, apply_op, op_at, support_bound, FnFunction,
    Function, Grid, LeafFunction, OpConfig, OpFunction,
};
use crate::quadrature::{integrate, QuadratureConfig};

pub const SUITES: [&str; 13] = [
    "flow",
    "translation",
    "composition",
    "associativity",
    "pushforward",
    "ideal",
    "transpose",
    "adjoint",
    "mu",
    "support",
    "leaf",
    "negative",
    "config",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
}

/// Whether `measured` must stay below or above `tolerance`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Bound {
    Upper,
    Lower,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    pub check: String,
    pub status: Status,
    pub measured: f64,
    pub tolerance: f64,
    pub bound: Bound,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

impl CheckResult {
    fn new(check: &str, measured: f64, tolerance: f64, bound: Bound) -> Self {
        let ok = match bound {
            Bound::Upper => measured <= tolerance,
            Bound::Lower => measured >= tolerance,
        };
        Self {
            check: check.to_string(),
            status: if ok { Status::Pass } else { Status::Fail },
            measured,
            tolerance,
            bound,
            detail: None,
        }
    }

    pub fn passed(&self) -> bool {
        self.status == Status::Pass
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub passed: bool,
    pub checks: Vec<CheckResult>,
}

impl Report {
    pub fn new(checks: Vec<CheckResult>) -> Self {
        Self { passed: checks.iter().all(CheckResult::passed), checks }
    }
}

/// Runs `check` and records its measurement; an error becomes a failing entry.
fn measure(name: &str, tolerance: f64, bound: Bound, check: impl FnOnce() -> Result<f64>) -> CheckResult {
    match check() {
        Ok(m) if m.is_nan() => {
            let mut r = CheckResult::new(name, m, tolerance, bound);
            r.status = Status::Fail;
            r.detail = Some("measurement is NaN".into());
            r
        }
        Ok(m) => CheckResult::new(name, m, tolerance, bound),
        Err(e) => {
            let mut r = CheckResult::new(name, f64::NAN, tolerance, bound);
            r.status = Status::Fail;
            r.detail = Some(e.to_string());
            r
        }
    }
}

fn upper(name: &str, tolerance: f64, check: impl FnOnce() -> Result<f64>) -> CheckResult {
    measure(name, tolerance, Bound::Upper, check)
}

/// Runs one suite by name.
pub fn run_suite(name: &str, ws: &Workspace) -> Result<Vec<CheckResult>> {
    let fx = Fixtures::new(ws)?;
    Ok(match name {
        "flow" => fx.flow(),
        "translation" => fx.translation(),
        "composition" => fx.composition(),
        "associativity" => fx.associativity(),
        "pushforward" => fx.pushforward(),
        "ideal" => fx.ideal(),
        "transpose" => fx.transpose(),
        "adjoint" => fx.adjoint(),
        "mu" => fx.mu(),
        "support" => fx.support(),
        "leaf" => fx.leaf(),
        "negative" => fx.negative(),
        "config" => config_checks(ws),
        other => return Err(Error::Config(format!("unknown suite '{other}'"))),
    })
}

pub fn run_all(ws: &Workspace) -> Result<Vec<CheckResult>> {
    let mut out = Vec::new();
    for s in SUITES {
        out.extend(run_suite(s, ws)?);
    }
    Ok(out)
}

fn bx(iv: &[[f64; 2]]) -> Aabb {
    Aabb::from_intervals(iv).expect("static box")
}

fn ex(s: &str, n: usize) -> ScalarExpr {
    ScalarExpr::parse(s, n).expect("static expression")
}

fn dex(s: &str, n: usize, m: usize) -> ScalarExpr {
    ScalarExpr::parse_with(s, n, m).expect("static expression")
}

/// Largest difference of two value lists; any NaN makes it infinite.
fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| {
        let d = (x - y).abs();
        if d.is_nan() {
            f64::INFINITY
        } else {
            m.max(d)
        }
    })
}

/// `(1 - t²)^k` on `|t| < 1`, zero outside.
fn bump(t: f64, k: i32) -> f64 {
    if t.abs() < 1.0 {
        (1.0 - t * t).powi(k)
    } else {
        0.0
    }
}

/// The canonical kernels and functions the suites are built from.
struct Fixtures<'w> {
    ws: &'w Workspace,
    t: Bisubmersion,
    r: Bisubmersion,
    cfg: OpConfig,
}

impl<'w> Fixtures<'w> {
    fn new(ws: &'w Workspace) -> Result<Self> {
        Ok(Self {
            ws,
            t: make_path_holonomy(ws.foliation("T")?.clone()),
            r: make_path_holonomy(ws.foliation("R")?.clone()),
            cfg: OpConfig { quad: *ws.quad(), strict: true },
        })
    }

    fn quad(&self, order: usize) -> QuadratureConfig {
        QuadratureConfig { order, ..*self.ws.quad() }
    }

    fn foliation(&self, name: &str) -> Result<Arc<SingularFoliation>> {
        self.ws.foliation(name).cloned()
    }

    fn t_grid() -> Grid {
        Grid::uniform(bx(&[[-1.5, 1.5]]), 31).expect("static grid")
    }

    fn r_grid() -> Grid {
        Grid::uniform(bx(&[[-1.0, 1.0], [-1.0, 1.0]]), 7).expect("static grid")
    }

    fn f_t() -> ScalarExpr {
        ex("exp(-x1^2)*cos(2*x1) + 0.1*x1", 1)
    }

    fn f_r() -> ScalarExpr {
        ex("exp(-(x1-0.3)^2 - x2^2) + 0.2*x1*x2", 2)
    }

    /// Shift by +0.5 with a linear coefficient; the base box touches the chart edge.
    fn dirac_t(&self) -> Result<FibredKernel> {
        let s = Bisection::constant(&self.t, vec![0.5], bx(&[[-3.0, 2.5]]))?;
        dirac(&s, ex("1 + 0.2*x1", 1), Side::R)
    }

    fn dirac_t2(&self) -> Result<FibredKernel> {
        let s = Bisection::constant(&self.t, vec![-0.8], bx(&[[-2.2, 3.0]]))?;
        dirac(&s, ex("cos(x1)", 1), Side::R)
    }

    fn density_t(&self, width: f64, power: u32, factor: &str) -> Result<FibredKernel> {
        let a = dex(&format!("(1-(xi1/{width})^2)^{power}*({factor})"), 1, 1);
        density(&self.t, a, bx(&[[-width, width]]), bx(&[[-3.0, 3.0]]), Side::R)
    }

    fn g_t(&self) -> Result<FibredKernel> {
        self.density_t(0.6, 4, "1 + 0.2*x1")
    }

    fn h_t(&self) -> Result<FibredKernel> {
        self.density_t(0.4, 3, "exp(-x1^2/4)")
    }

    fn dirac_r(&self, xi: f64, coeff: &str) -> Result<FibredKernel> {
        let s = Bisection::constant(&self.r, vec![xi], bx(&[[-1.4, 1.4], [-1.4, 1.4]]))?;
        dirac(&s, ex(coeff, 2), Side::R)
    }

    fn density_r(&self, width: f64, power: u32, factor: &str) -> Result<FibredKernel> {
        let a = dex(&format!("(1-(xi1/{width})^2)^{power}*({factor})"), 2, 1);
        density(&self.r, a, bx(&[[-width, width]]), bx(&[[-1.9, 1.9], [-1.9, 1.9]]), Side::R)
    }

    /// `max |Op(a*b)f - Op(a)Op(b)f|` on `grid`.
    fn homomorphism_gap(&self, a: &FibredKernel, b: &FibredKernel, f: &dyn Function, grid: &Grid) -> Result<f64> {
        let ab = convolve(a, b)?;
        let lhs = apply_op(&ab, f, grid, &self.cfg)?;
        let inner = OpFunction::new(b, f, self.cfg.quad);
        let rhs = apply_op(a, &inner, grid, &self.cfg)?;
        Ok(max_diff(lhs.values.values(), rhs.values.values()))
    }

    fn op_gap(&self, a: &FibredKernel, b: &FibredKernel, f: &dyn Function, grid: &Grid, quad: (usize, usize)) -> Result<f64> {
        let lhs = apply_op(a, f, grid, &OpConfig { quad: self.quad(quad.0), strict: true })?;
        let rhs = apply_op(b, f, grid, &OpConfig { quad: self.quad(quad.1), strict: true })?;
        Ok(max_diff(lhs.values.values(), rhs.values.values()))
    }

    fn flow(&self) -> Vec<CheckResult> {
        let flow = *self.ws.flow_config();
        let s6 = canonical::scaling_on(6.0).with_flow_config(flow);
        vec![
            upper("flow.scaling_closed_form", 1e-8, || Ok((exp_flow(&s6, &[1.0], &[2.0], &flow)?[0] - 2.0 * E).abs())),
            upper("flow.rotation_closed_form", 1e-8, || {
                let p = exp_flow(&*self.foliation("R")?, &[FRAC_PI_2], &[1.0, 0.0], &flow)?;
                Ok(norm(&[p[0], p[1] - 1.0]))
            }),
            upper("flow.translation_closed_form", 1e-10, || {
                let p = exp_flow(&*self.foliation("C")?, &[0.3, -0.7], &[0.1, 0.2], &flow)?;
                Ok(norm(&[p[0] - 0.4, p[1] + 0.5]))
            }),
            upper("flow.rotation_jacobian", 1e-7, || {
                let (c, s) = (0.8f64.cos(), 0.8f64.sin());
                let j = flow_jacobian(&*self.foliation("R")?, &[0.8], &[0.6, -0.3], &flow)?;
                Ok((j[(0, 0)] - c).abs().max((j[(0, 1)] + s).abs()).max((j[(1, 0)] - s).abs()).max((j[(1, 1)] - c).abs()))
            }),
        ]
    }

    fn translation(&self) -> Vec<CheckResult> {
        vec![
            upper("translation.rotation_quarter_turn", 1e-8, || {
                let c = "(1-(x1/1.4)^2)^2*(1-(x2/1.4)^2)^2*(1+0.3*x1)";
                let a = self.dirac_r(FRAC_PI_2, c)?;
                let f = Self::f_r();
                let grid = Grid::uniform(bx(&[[-1.5, 1.5], [-1.5, 1.5]]), 31)?;
                let out = apply_op(&a, &f, &grid, &self.cfg)?;
                let c = ex(c, 2);
                let inside = bx(&[[-1.4, 1.4], [-1.4, 1.4]]);
                let mut worst: f64 = 0.0;
                for (p, v) in grid.points().iter().zip(out.values.values()) {
                    let want = if inside.contains(p) { c.try_eval(p, &[])? * f.try_eval(&[p[1], -p[0]], &[])? } else { 0.0 };
                    worst = worst.max((v - want).abs());
                }
                Ok(worst)
            }),
            upper("translation.shift_moves_bump", 1e-9, || {
                let s = Bisection::constant(&self.t, vec![1.0], bx(&[[-3.0, 2.0]]))?;
                let a = dirac(&s, ex("1", 1), Side::R)?;
                let f = FnFunction::with_support(|x: &[f64]| bump(2.0 * x[0] - 1.0, 4), bx(&[[0.0, 1.0]]));
                let grid = Grid::uniform(bx(&[[-1.0, 2.5]]), 71)?;
                let out = apply_op(&a, &f, &grid, &self.cfg)?;
                let want: Vec<f64> = grid.points().iter().map(|p| bump(2.0 * (p[0] - 1.0) - 1.0, 4)).collect();
                Ok(max_diff(out.values.values(), &want))
            }),
        ]
    }

    fn composition(&self) -> Vec<CheckResult> {
        let tol = 1e-6;
        let ft = Self::f_t();
        let fr = Self::f_r();
        let tg = Self::t_grid();
        let rg = Self::r_grid();
        vec![
            upper("composition.T.dirac_dirac", tol, || self.homomorphism_gap(&self.dirac_t()?, &self.dirac_t2()?, &ft, &tg)),
            upper("composition.T.dirac_density", tol, || self.homomorphism_gap(&self.dirac_t()?, &self.g_t()?, &ft, &tg)),
            upper("composition.T.density_dirac", tol, || self.homomorphism_gap(&self.g_t()?, &self.dirac_t2()?, &ft, &tg)),
            upper("composition.T.density_density", tol, || self.homomorphism_gap(&self.g_t()?, &self.h_t()?, &ft, &tg)),
            upper("composition.R.dirac_density", tol, || {
                let d = self.dirac_r(0.7, "exp(-10*(x1^2+x2^2))*(1+x1)")?;
                self.homomorphism_gap(&d, &self.density_r(0.6, 3, "1 + 0.2*x2")?, &fr, &rg)
            }),
            upper("composition.R.density_density", tol, || {
                let a = self.density_r(0.6, 3, "1 + 0.2*x2")?;
                let b = self.density_r(0.5, 2, "1")?;
                self.homomorphism_gap(&a, &b, &fr, &rg)
            }),
        ]
    }

    fn associativity(&self) -> Vec<CheckResult> {
        let f = Self::f_t();
        let grid = Self::t_grid();
        let triple = |a: FibredKernel, b: FibredKernel, c: FibredKernel| -> Result<f64> {
            let left = convolve(&convolve(&a, &b)?, &c)?;
            let right = convolve(&a, &convolve(&b, &c)?)?;
            self.op_gap(&left, &right, &f, &grid, (self.cfg.quad.order, self.cfg.quad.order))
        };
        vec![
            upper("associativity.T.density_dirac_density", 1e-5, || triple(self.g_t()?, self.dirac_t()?, self.h_t()?)),
            upper("associativity.T.dirac_density_dirac", 1e-5, || triple(self.dirac_t()?, self.h_t()?, self.dirac_t2()?)),
        ]
    }

    fn pushforward(&self) -> Vec<CheckResult> {
        vec![
            upper("pushforward.T.addition", 1e-6, || {
                let pi = make_addition_morphism(&self.t)?;
                let ab = convolve(&self.density_t(0.5, 4, "1 + 0.2*x1")?, &self.density_t(0.3, 4, "1")?)?;
                let pushed = pushforward(&pi, &ab, &self.cfg.quad)?;
                let order = self.cfg.quad.order;
                self.op_gap(&pushed, &ab, &Self::f_t(), &Self::t_grid(), (order, order))
            }),
            upper("pushforward.C.addition", 1e-6, || {
                let c = make_path_holonomy(self.foliation("C")?);
                let pi = make_addition_morphism(&c)?;
                let base = bx(&[[-2.0, 2.0], [-2.0, 2.0]]);
                let a = density(
                    &c,
                    dex("(1-(xi1/0.5)^2)^4*(1-(xi2/0.5)^2)^4*(1+0.1*x1)", 2, 2),
                    bx(&[[-0.5, 0.5], [-0.5, 0.5]]),
                    base.clone(),
                    Side::R,
                )?;
                let b = density(
                    &c,
                    dex("(1-(xi1/0.4)^2)^4*(1-(xi2/0.4)^2)^4", 2, 2),
                    bx(&[[-0.4, 0.4], [-0.4, 0.4]]),
                    base,
                    Side::R,
                )?;
                let ab = convolve(&a, &b)?;
                let pushed = pushforward(&pi, &ab, &self.quad(16))?;
                let f = ex("exp(-x1^2)*cos(x2) + 0.1*x1*x2", 2);
                let grid = Grid::uniform(bx(&[[-0.8, 0.8], [-0.8, 0.8]]), 3)?;
                // the lazy side is exact at low order for polynomial bumps
                self.op_gap(&pushed, &ab, &f, &grid, (16, 10))
            }),
        ]
    }

    fn ideal(&self) -> Vec<CheckResult> {
        let non_density = |k: &FibredKernel| k.atoms().iter().filter(|a| !a.is_density()).count() as f64;
        let reduced = || -> Result<FibredKernel> {
            let pi = make_addition_morphism(&self.t)?;
            let ab = convolve(&self.density_t(0.5, 4, "1")?, &self.density_t(0.3, 3, "1")?)?;
            pushforward(&pi, &ab, &self.cfg.quad)
        };
        vec![
            upper("ideal.reduced_is_density", 0.0, || Ok(non_density(&reduced()?))),
            measure("ideal.second_difference_order", 1.9, Bound::Lower, || {
                let k = reduced()?;
                let Atom::Density(d) = &k.atoms()[0] else {
                    return Err(Error::Invalid("reduced kernel is not a density".into()));
                };
                let g = |z: f64| -> Result<f64> {
                    let u = d.host().chart(Side::R, &[0.0], &[z])?.ok_or_else(|| Error::Invalid("outside chart".into()))?;
                    d.value(&[z], &[0.0], &u)
                };
                let second = |h: f64| -> Result<f64> { Ok((g(0.5 + h)? - 2.0 * g(0.5)? + g(0.5 - h)?) / (h * h)) };
                let (d1, d2, d4) = (second(0.04)?, second(0.02)?, second(0.01)?);
                Ok(((d1 - d2).abs() / (d2 - d4).abs()).log2())
            }),
            upper("ideal.density_dirac_is_density", 0.0, || Ok(non_density(&convolve(&self.g_t()?, &self.dirac_t()?)?))),
            upper("ideal.dirac_density_is_density", 0.0, || Ok(non_density(&convolve(&self.dirac_t()?, &self.g_t()?)?))),
        ]
    }

    fn transpose(&self) -> Vec<CheckResult> {
        vec![upper("transpose.anti_homomorphism", 1e-6, || {
            let a = self.g_t()?;
            let b = self.dirac_t()?.add(&self.h_t()?)?;
            let lhs = convolve(&a, &b)?.transpose();
            let rhs = convolve(&b.transpose(), &a.transpose())?;
            let k = ex("exp(-x1^2)*(1 + 0.5*x1)", 1);
            let grid = Grid::uniform(bx(&[[-1.2, 1.2]]), 25)?;
            let l = apply_adjoint(&lhs, &k, &grid, &self.cfg)?;
            let r = apply_adjoint(&rhs, &k, &grid, &self.cfg)?;
            Ok(max_diff(l.values.values(), r.values.values()))
        })]
    }

    fn adjoint(&self) -> Vec<CheckResult> {
        let setup = || -> Result<(Bisubmersion, FibredKernel)> {
            let s = make_path_holonomy(self.foliation("S")?);
            let a = density(&s, dex("(1-(xi1/0.5)^2)^4*(1+0.3*x1)", 1, 1), bx(&[[-0.5, 0.5]]), bx(&[[-2.0, 2.0]]), Side::R)?;
            Ok((s, a))
        };
        let f = FnFunction::with_support(|x: &[f64]| bump(x[0], 6) * (1.0 + 0.5 * x[0]), bx(&[[-1.0, 1.0]]));
        let g = FnFunction::with_support(|x: &[f64]| bump(x[0], 6) * (2.0 - x[0]).cos(), bx(&[[-1.0, 1.0]]));
        let window = bx(&[[-1.0, 1.0]]);
        let q = self.cfg.quad;
        let lhs = |a: &FibredKernel| integrate(&window, 64, |x| Ok(op_at(a, &f, x, &q)? * g.value(x)?));
        vec![
            upper("adjoint.transposed_conversion", 1e-6, || {
                let (_, a) = setup()?;
                let at = r_to_s_convert(&a, None)?.transpose();
                let rhs = integrate(&window, 64, |y| Ok(f.value(y)? * op_at(&at, &g, y, &q)?))?;
                Ok((lhs(&a)? - rhs).abs())
            }),
            upper("adjoint.tilde_duality", 1e-6, || {
                let (_, a) = setup()?;
                let conv = r_to_s_convert(&a, None)?;
                let at = conv.transpose();
                let lhs = integrate(&window, 64, |y| Ok(conv.adjoint_value(y, &|z| g.value(z), &q)? * f.value(y)?))?;
                let rhs = integrate(&window, 64, |x| Ok(g.value(x)? * op_at(&at, &f, x, &q)?))?;
                Ok((lhs - rhs).abs())
            }),
            upper("adjoint.jacobian_factor", 1e-7, || {
                let (s, _) = setup()?;
                let mut worst: f64 = 0.0;
                for (xi, x) in [(0.3, 0.5), (-0.6, 1.2), (0.5, -0.4), (0.0, 1.9), (-0.2, -1.0)] {
                    worst = worst.max((conversion_factor(&s, &[xi, x])? - f64::exp(xi)).abs());
                }
                Ok(worst)
            }),
        ]
    }

    fn mu(&self) -> Vec<CheckResult> {
        let kernel = || -> Result<FibredKernel> { self.g_t()?.add(&convolve(&self.h_t()?, &self.dirac_t()?)?) };
        let k = ex("exp(-x1^2)*(2 + sin(x1))", 1);
        let grid = Grid::uniform(bx(&[[-1.2, 1.2]]), 25).expect("static grid");
        let w = ex("1 + x1^2/10", 1);
        vec![
            upper("mu.lebesgue_vs_weighted", 1e-6, || {
                let a = kernel()?;
                let plain = apply_generalized(&a, &k, None, &grid, &self.cfg)?;
                let weighted = apply_generalized(&a, &k, Some(&w), &grid, &self.cfg)?;
                Ok(max_diff(plain.values.values(), weighted.values.values()))
            }),
            upper("mu.density_route_matches_op", 1e-6, || {
                let a = kernel()?;
                let direct = apply_op(&a, &k, &grid, &self.cfg)?;
                let weighted = apply_generalized(&a, &k, Some(&w), &grid, &self.cfg)?;
                Ok(max_diff(direct.values.values(), weighted.values.values()))
            }),
        ]
    }

    fn support(&self) -> Vec<CheckResult> {
        let f = FnFunction::with_support(|x: &[f64]| bump(2.0 * x[0] - 1.0, 4), bx(&[[0.0, 1.0]]));
        let outside = |k: &FibredKernel| -> Result<f64> {
            let bound = support_bound(k, f.support().as_ref()).ok_or_else(|| Error::Invalid("empty bound".into()))?;
            let grid = Grid::uniform(bx(&[[-2.0, 1.8]]), 77)?;
            let out = apply_op(k, &f, &grid, &OpConfig { quad: self.quad(16), strict: true })?;
            Ok(grid
                .points()
                .iter()
                .zip(out.values.values())
                .filter(|(p, _)| !bound.contains(p))
                .fold(0.0, |m, (_, v)| m.max(v.abs())))
        };
        vec![
            upper("support.mixed_kernel", 1e-10, || {
                let a = self.density_t(0.4, 4, "1")?;
                let s = Bisection::constant(&self.t, vec![-0.7], bx(&[[-2.3, 3.0]]))?;
                let d = dirac(&s, ex("exp(-8*x1^2)", 1), Side::R)?;
                outside(&convolve(&a, &a)?.add(&convolve(&d, &a)?)?)
            }),
            upper("support.translation", 1e-12, || {
                let s = Bisection::constant(&self.t, vec![1.0], bx(&[[-3.0, 2.0]]))?;
                outside(&dirac(&s, ex("1", 1), Side::R)?)
            }),
            upper("support.empty_source_gives_empty_bound", 0.0, || {
                let a = self.g_t()?;
                Ok(if support_bound(&a, None).is_none() { 0.0 } else { 1.0 })
            }),
        ]
    }

    fn leaf(&self) -> Vec<CheckResult> {
        let run = || -> Result<Vec<CheckResult>> {
            let rot = self.foliation("R")?;
            let opts = LeafOptions { mesh: 2e-3, ..self.ws.settings.leaf };
            let leaf = leaf_sample(&rot, &[1.0, 0.0], 60_000, &opts)?;
            let a = self.density_r(0.6, 3, "1")?;
            let b = self.density_r(0.4, 2, "1 + 0.3*x1")?;
            let ambient = ex("x1^3 + sin(2*x2) + x1*x2", 2);
            let values: Vec<f64> = leaf.points.iter().map(|p| ambient.try_eval(p, &[])).collect::<Result<_>>()?;
            let probe: Vec<Vec<f64>> = leaf.points.iter().step_by((leaf.len() / 23).max(1)).cloned().collect();
            let cfg = self.cfg;
            let mut out = Vec::new();

            out.push(upper("leaf.off_leaf_perturbation", 1e-7, || {
                let perturbed = FnFunction::new(|p: &[f64]| {
                    let d = (norm(p) - 1.0).abs();
                    let tube = if d < 0.05 { 0.0 } else { (d - 0.05).powi(3) * 40.0 };
                    ambient.eval(p, &[]) + tube * p[0].cos()
                });
                let (x, _) = apply_at_points(&a, &ambient, &probe, &cfg)?;
                let (y, _) = apply_at_points(&a, &perturbed, &probe, &cfg)?;
                Ok(max_diff(&x, &y))
            }));
            out.push(upper("leaf.restriction_compatibility", 1e-5, || {
                let interp = LeafFunction::new(&leaf, &values)?;
                let (on_leaf, _) = apply_at_points(&a, &interp, &probe, &cfg)?;
                let (amb, _) = apply_at_points(&a, &ambient, &probe, &cfg)?;
                Ok(max_diff(&on_leaf, &amb))
            }));
            out.push(upper("leaf.restricted_homomorphism", 1e-5, || {
                let (vb, _) = apply_on_leaf(&b, &leaf, &values, &cfg)?;
                let after_b = LeafFunction::new(&leaf, &vb)?;
                let (lhs, _) = apply_at_points(&a, &after_b, &probe, &cfg)?;
                let interp = LeafFunction::new(&leaf, &values)?;
                let (rhs, _) = apply_at_points(&convolve(&a, &b)?, &interp, &probe, &cfg)?;
                Ok(max_diff(&lhs, &rhs))
            }));
            out.push(upper("leaf.evaluation_points_on_leaf", 10.0 * self.ws.flow_config().abs_tol.max(1e-9), || {
                let seen = Mutex::new(Vec::new());
                let recorder = FnFunction::new(|p: &[f64]| {
                    seen.lock().expect("recorder").push(norm(p));
                    1.0
                });
                for x in probe.iter().take(4) {
                    op_at(&convolve(&a, &b)?, &recorder, x, &cfg.quad)?;
                }
                let seen = seen.into_inner().expect("recorder");
                Ok(seen.iter().fold(0.0, |m, r| m.max((r - 1.0).abs())))
            }));
            out.push(upper("leaf.samples_on_circle", 1e-6, || {
                Ok(leaf.points.iter().fold(0.0, |m, p| m.max((norm(p) - 1.0).abs())))
            }));
            Ok(out)
        };
        run().unwrap_or_else(|e| {
            let mut r = CheckResult::new("leaf.sampling", f64::NAN, 0.0, Bound::Upper);
            r.status = Status::Fail;
            r.detail = Some(e.to_string());
            vec![r]
        })
    }

    fn negative(&self) -> Vec<CheckResult> {
        let n = || self.foliation("N");
        vec![
            measure("negative.involutivity_residual_detected", 1e-6, Bound::Lower, || {
                let rep = involutivity_check(&*n()?, 20, 1e-10);
                Ok(if rep.pass { 0.0 } else { rep.worst_residual })
            }),
            upper("negative.failure_on_x1_zero", 1e-12, || Ok(involutivity_check(&*n()?, 20, 1e-10).worst_point[0].abs())),
            upper("negative.addition_rejected", 0.0, || {
                match make_addition_morphism(&make_path_holonomy(n()?)) {
                    Err(Error::BracketNotZero { .. }) => Ok(0.0),
                    _ => Ok(1.0),
                }
            }),
            upper("negative.rotation_is_involutive", 1e-10, || Ok(involutivity_check(&*self.foliation("R")?, 20, 1e-10).worst_residual)),
        ]
    }
}

fn config_checks(ws: &Workspace) -> Vec<CheckResult> {
    let cfg = OpConfig { quad: *ws.quad(), strict: ws.settings.strict };
    ws.checks()
        .iter()
        .map(|c| match c {
            CheckSpec::Equal { name, lhs, rhs, function, grid, tolerance } => {
                upper(&format!("config.{name}"), *tolerance, || {
                    let g = grid.grid()?;
                    let f = ws.function(function)?;
                    let l = apply_op(ws.kernel(lhs)?, f, &g, &cfg)?;
                    let r = apply_op(ws.kernel(rhs)?, f, &g, &cfg)?;
                    Ok(max_diff(l.values.values(), r.values.values()))
                })
            }
            CheckSpec::Homomorphism { name, a, b, function, grid, tolerance } => {
                upper(&format!("config.{name}"), *tolerance, || {
                    let g = grid.grid()?;
                    let f = ws.function(function)?;
                    let (a, b) = (ws.kernel(a)?, ws.kernel(b)?);
                    let l = apply_op(&convolve(a, b)?, f, &g, &cfg)?;
                    let inner = OpFunction::new(b, f, cfg.quad);
                    let r = apply_op(a, &inner, &g, &cfg)?;
                    Ok(max_diff(l.values.values(), r.values.values()))
                })
            }
        })
        .collect()
}
