//! Fibred distributional kernels on bisubmersions.
//!
//! A kernel is a finite sum of atoms fibred along `r` or `s`: Dirac measures
//! on bisections with a smooth coefficient, smooth densities against the
//! fibre chart measure `dα`, and the lazy terms produced by convolution and
//! pushforward when no closed form is available.

mod coeff;
mod convert;
mod pairing;
mod pullback;
mod pushforward;
mod support;

use std::fmt;
use std::sync::Arc;

pub use coeff::{Coeff, DensityFn, Probe};
pub use convert::{conversion_factor, r_to_s_convert};
pub use pairing::Phi;
pub use pullback::{pullback_base, BaseMap, PulledBack};
pub use pushforward::pushforward;
pub use support::{propagate_support, support_of, SupportBox};

use crate::bisubmersion::{compose, invert, translate, Bisection, Bisubmersion, Morphism, Side, TranslateSide};
use crate::error::{Error, Result};
use crate::expr::ScalarExpr;
use crate::foliation::SingularFoliation;
use crate::geometry::Aabb;

/// A smooth density on `host`, truncated to `xi_box` in fibre chart
/// coordinates and to `base_box` in the base point along the kernel side.
#[derive(Debug, Clone, PartialEq)]
pub struct Density {
    pub(crate) host: Bisubmersion,
    pub(crate) func: DensityFn,
    pub(crate) xi_box: Aabb,
    pub(crate) base_box: Aabb,
}

impl Density {
    pub fn host(&self) -> &Bisubmersion {
        &self.host
    }

    pub fn func(&self) -> &DensityFn {
        &self.func
    }

    pub fn xi_box(&self) -> &Aabb {
        &self.xi_box
    }

    pub fn base_box(&self) -> &Aabb {
        &self.base_box
    }

    /// Density value at fibre coordinates `alpha` over `x`, at host point `u`.
    pub fn value(&self, alpha: &[f64], x: &[f64], u: &[f64]) -> Result<f64> {
        if !self.xi_box.contains(alpha) || !self.base_box.contains(x) {
            return Ok(0.0);
        }
        self.func.eval(alpha, x, u)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Atom {
    Dirac { bisection: Arc<Bisection>, coeff: Coeff },
    Density(Arc<Density>),
    /// `left * right` on `host = left.host ∘ right.host`, kept unreduced.
    Convolved { left: Arc<Atom>, right: Arc<Atom>, host: Bisubmersion },
    /// `π_* inner`, paired through `φ∘π`.
    Pushed { morphism: Arc<Morphism>, inner: Arc<Atom> },
}

impl Atom {
    pub fn host(&self) -> Bisubmersion {
        match self {
            Atom::Dirac { bisection, .. } => bisection.host().clone(),
            Atom::Density(d) => d.host.clone(),
            Atom::Convolved { host, .. } => host.clone(),
            Atom::Pushed { morphism, .. } => morphism.target().clone(),
        }
    }

    pub fn is_dirac(&self) -> bool {
        matches!(self, Atom::Dirac { .. })
    }

    pub fn is_density(&self) -> bool {
        matches!(self, Atom::Density(_))
    }

    /// Whether a Dirac atom occurs anywhere in the term.
    pub fn contains_dirac(&self) -> bool {
        match self {
            Atom::Dirac { .. } => true,
            Atom::Density(_) => false,
            Atom::Convolved { left, right, .. } => left.contains_dirac() || right.contains_dirac(),
            Atom::Pushed { inner, .. } => inner.contains_dirac(),
        }
    }

    /// Nesting depth of lazy convolutions.
    pub fn depth(&self) -> usize {
        match self {
            Atom::Dirac { .. } | Atom::Density(_) => 0,
            Atom::Convolved { left, right, .. } => 1 + left.depth().max(right.depth()),
            Atom::Pushed { inner, .. } => inner.depth(),
        }
    }

    fn scaled(&self, c: f64) -> Atom {
        match self {
            Atom::Dirac { bisection, coeff } => {
                Atom::Dirac { bisection: bisection.clone(), coeff: Coeff::constant(c).times(coeff.clone()) }
            }
            Atom::Density(d) => Atom::Density(Arc::new(Density {
                host: d.host.clone(),
                func: DensityFn::Translated {
                    coeff: Coeff::constant(c),
                    probe: Probe::Base,
                    shift: None,
                    inner: d.clone(),
                },
                xi_box: d.xi_box.clone(),
                base_box: d.base_box.clone(),
            })),
            Atom::Convolved { left, right, host } => {
                Atom::Convolved { left: Arc::new(left.scaled(c)), right: right.clone(), host: host.clone() }
            }
            Atom::Pushed { morphism, inner } => Atom::Pushed { morphism: morphism.clone(), inner: Arc::new(inner.scaled(c)) },
        }
    }

    /// The same data viewed in the inverse bisubmersions.
    pub fn transpose(&self) -> Atom {
        match self {
            Atom::Dirac { bisection, coeff } => {
                Atom::Dirac { bisection: Arc::new(bisection.inverse()), coeff: coeff.clone() }
            }
            Atom::Density(d) => Atom::Density(Arc::new(Density {
                host: invert(&d.host),
                func: d.func.clone(),
                xi_box: d.xi_box.clone(),
                base_box: d.base_box.clone(),
            })),
            Atom::Convolved { left, right, .. } => {
                let (l, r) = (right.transpose(), left.transpose());
                let host = Bisubmersion::Composition(Arc::new(l.host()), Arc::new(r.host()));
                Atom::Convolved { left: Arc::new(l), right: Arc::new(r), host }
            }
            Atom::Pushed { morphism, inner } => {
                Atom::Pushed { morphism: Arc::new(morphism.transpose()), inner: Arc::new(inner.transpose()) }
            }
        }
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Atom::Dirac { bisection, .. } => write!(f, "dirac[{}]", bisection.host()),
            Atom::Density(d) => write!(f, "density[{}]", d.host),
            Atom::Convolved { left, right, .. } => write!(f, "({left} * {right})"),
            Atom::Pushed { inner, .. } => write!(f, "push({inner})"),
        }
    }
}

/// A finite sum of atoms fibred along one side over one foliation.
#[derive(Debug, Clone, PartialEq)]
pub struct FibredKernel {
    side: Side,
    base: Arc<SingularFoliation>,
    atoms: Vec<Atom>,
}

/// `c·Δ_S`: the Dirac measure on the bisection `S` with coefficient `c`.
///
/// `c` must vanish on the boundary of `q(S)`, where `q` is the side map;
/// boundary points on the edge of the foliation chart are exempt.
pub fn dirac(s: &Bisection, c: ScalarExpr, side: Side) -> Result<FibredKernel> {
    let f = s.host().foliation().clone();
    c.check_vars(f.dim(), 0)?;
    check_coefficient_support(s, &c, side)?;
    Ok(FibredKernel {
        side,
        base: f,
        atoms: vec![Atom::Dirac { bisection: Arc::new(s.clone()), coeff: Coeff::Expr(c) }],
    })
}

fn check_coefficient_support(s: &Bisection, c: &ScalarExpr, side: Side) -> Result<()> {
    let chart = s.host().foliation().chart();
    let scale = match side {
        Side::S => s.base_box().grid(9),
        Side::R => s.range_box().grid(9),
    }
    .iter()
    .map(|x| c.eval(x, &[]).abs())
    .filter(|v| v.is_finite())
    .fold(0.0, f64::max);
    let threshold = 1e-8 * (1.0 + scale);
    // boundary points on the chart boundary are cut by the chart, not by c
    for x in s.base_box().boundary_samples(9) {
        if chart.on_boundary(&x, 1e-9) {
            continue;
        }
        let p = match side {
            Side::S => x,
            Side::R => match s.phi(&x) {
                Ok(y) => y,
                Err(Error::DomainEscape { .. }) => continue,
                Err(e) => return Err(e),
            },
        };
        if chart.on_boundary(&p, 1e-9) {
            continue;
        }
        let v = c.try_eval(&p, &[])?;
        if v.abs() > threshold {
            return Err(Error::SupportViolation(format!(
                "coefficient is {v:.3e} at {p:?} on the boundary of q(S)"
            )));
        }
    }
    Ok(())
}

/// A smooth density `a(α, x)·dα` on `host`, supported in `xi_box × base_box`.
pub fn density(host: &Bisubmersion, a: ScalarExpr, xi_box: Aabb, base_box: Aabb, side: Side) -> Result<FibredKernel> {
    let n = host.base_dim();
    let m = host.fibre_dim();
    if xi_box.dim() != m {
        return Err(Error::DimensionMismatch { expected: m, found: xi_box.dim() });
    }
    if base_box.dim() != n {
        return Err(Error::DimensionMismatch { expected: n, found: base_box.dim() });
    }
    a.check_vars(n, m)?;
    let d = Density { host: host.clone(), func: DensityFn::Expr(a), xi_box, base_box };
    Ok(FibredKernel { side, base: host.foliation().clone(), atoms: vec![Atom::Density(Arc::new(d))] })
}

impl FibredKernel {
    pub fn zero(side: Side, base: Arc<SingularFoliation>) -> Self {
        Self { side, base, atoms: Vec::new() }
    }

    pub fn from_atoms(side: Side, base: Arc<SingularFoliation>, atoms: Vec<Atom>) -> Self {
        Self { side, base, atoms }
    }

    pub fn side(&self) -> Side {
        self.side
    }

    pub fn base(&self) -> &Arc<SingularFoliation> {
        &self.base
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn is_zero(&self) -> bool {
        self.atoms.is_empty()
    }

    fn check_compatible(&self, other: &FibredKernel) -> Result<()> {
        if self.side != other.side {
            return Err(Error::SideMismatch(format!("{}-fibred and {}-fibred kernels", self.side, other.side)));
        }
        if !crate::bisubmersion::same_base(&self.base, &other.base) {
            return Err(Error::BaseMismatch(format!("'{}' vs '{}'", self.base.name(), other.base.name())));
        }
        Ok(())
    }

    pub fn add(&self, other: &FibredKernel) -> Result<FibredKernel> {
        self.check_compatible(other)?;
        let mut atoms = self.atoms.clone();
        atoms.extend(other.atoms.iter().cloned());
        Ok(Self { side: self.side, base: self.base.clone(), atoms })
    }

    pub fn scale(&self, c: f64) -> FibredKernel {
        let atoms = if c == 0.0 { Vec::new() } else { self.atoms.iter().map(|a| a.scaled(c)).collect() };
        Self { side: self.side, base: self.base.clone(), atoms }
    }

    /// `a^t`: the side flips and every host is replaced by its inverse.
    pub fn transpose(&self) -> FibredKernel {
        Self { side: self.side.flip(), base: self.base.clone(), atoms: self.atoms.iter().map(Atom::transpose).collect() }
    }

    /// Largest lazy-convolution depth among the atoms.
    pub fn depth(&self) -> usize {
        self.atoms.iter().map(Atom::depth).max().unwrap_or(0)
    }
}

/// `a * b`, reduced structurally where a closed form exists. Pairs of atoms
/// whose supports cannot meet are dropped.
pub fn convolve(a: &FibredKernel, b: &FibredKernel) -> Result<FibredKernel> {
    a.check_compatible(b)?;
    let side = a.side;
    let sa: Vec<SupportBox> = a.atoms.iter().map(|x| support::atom_support(x, side)).collect();
    let sb: Vec<SupportBox> = b.atoms.iter().map(|x| support::atom_support(x, side)).collect();
    let mut atoms = Vec::new();
    for (x, bx) in a.atoms.iter().zip(&sa) {
        for (y, by) in b.atoms.iter().zip(&sb) {
            let meets = matches!((&bx.s, &by.r), (Some(p), Some(q)) if p.intersects(q));
            if !meets {
                continue;
            }
            if let Some(atom) = convolve_atoms(side, x, y)? {
                atoms.push(atom);
            }
        }
    }
    Ok(FibredKernel { side, base: a.base.clone(), atoms })
}

fn convolve_atoms(side: Side, a: &Atom, b: &Atom) -> Result<Option<Atom>> {
    let lazy = |a: &Atom, b: &Atom| -> Result<Option<Atom>> {
        let host = compose(&a.host(), &b.host())?;
        Ok(Some(Atom::Convolved { left: Arc::new(a.clone()), right: Arc::new(b.clone()), host }))
    };
    let translated = |host: &Bisubmersion, s: &Bisection, how: TranslateSide| match translate(host, s, how) {
        Ok(h) => Ok(Some(h)),
        Err(Error::EmptyTranslate) => Ok(None),
        Err(e) => Err(e),
    };
    match (a, b) {
        (Atom::Dirac { bisection: s, coeff: c }, Atom::Dirac { bisection: t, coeff: d }) => {
            let coeff = match side {
                Side::R => c.clone().times(d.clone().shifted(s, true)),
                Side::S => d.clone().times(c.clone().shifted(t, false)),
            };
            Ok(Some(Atom::Dirac { bisection: Arc::new(Bisection::compose(s, t)?), coeff }))
        }
        (Atom::Dirac { bisection: s, coeff: c }, Atom::Density(w)) => {
            let Some(host) = translated(&w.host, s, TranslateSide::Left)? else { return Ok(None) };
            let (func, base_box) = match side {
                Side::R => {
                    let Some(bb) = s.range_box().intersect(w.host.foliation().chart()) else { return Ok(None) };
                    let f = DensityFn::Translated {
                        coeff: c.clone(),
                        probe: Probe::Base,
                        shift: Some((s.clone(), true)),
                        inner: w.clone(),
                    };
                    (f, bb)
                }
                Side::S => {
                    let f = DensityFn::Translated {
                        coeff: c.clone(),
                        probe: Probe::R(w.host.clone()),
                        shift: None,
                        inner: w.clone(),
                    };
                    (f, w.base_box.clone())
                }
            };
            Ok(Some(Atom::Density(Arc::new(Density { host, func, xi_box: w.xi_box.clone(), base_box }))))
        }
        (Atom::Density(u), Atom::Dirac { bisection: t, coeff: e }) => {
            let Some(host) = translated(&u.host, t, TranslateSide::Right)? else { return Ok(None) };
            let (func, base_box) = match side {
                Side::R => {
                    let f = DensityFn::Translated {
                        coeff: e.clone(),
                        probe: Probe::S(u.host.clone()),
                        shift: None,
                        inner: u.clone(),
                    };
                    (f, u.base_box.clone())
                }
                Side::S => {
                    let f = DensityFn::Translated {
                        coeff: e.clone(),
                        probe: Probe::Base,
                        shift: Some((t.clone(), false)),
                        inner: u.clone(),
                    };
                    (f, t.base_box().clone())
                }
            };
            Ok(Some(Atom::Density(Arc::new(Density { host, func, xi_box: u.xi_box.clone(), base_box }))))
        }
        _ => lazy(a, b),
    }
}

#[cfg(test)]
mod tests;
