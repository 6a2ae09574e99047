use super::{Atom, Density, FibredKernel};
use crate::bisubmersion::Side;
use crate::geometry::{sample_image, Aabb};

const SAMPLES: usize = 9;

/// Conservative boxes containing `r(supp a)` and `s(supp a)`; `None` marks
/// an empty image.
#[derive(Debug, Clone, PartialEq)]
pub struct SupportBox {
    pub r: Option<Aabb>,
    pub s: Option<Aabb>,
}

impl SupportBox {
    pub const EMPTY: SupportBox = SupportBox { r: None, s: None };

    pub fn union(&self, other: &SupportBox) -> SupportBox {
        let hull = |a: &Option<Aabb>, b: &Option<Aabb>| match (a, b) {
            (Some(a), Some(b)) => Some(a.hull(b)),
            (Some(a), None) | (None, Some(a)) => Some(a.clone()),
            (None, None) => None,
        };
        SupportBox { r: hull(&self.r, &other.r), s: hull(&self.s, &other.s) }
    }

    pub fn get(&self, side: Side) -> Option<&Aabb> {
        match side {
            Side::R => self.r.as_ref(),
            Side::S => self.s.as_ref(),
        }
    }
}

pub fn support_of(a: &FibredKernel) -> SupportBox {
    a.atoms.iter().fold(SupportBox::EMPTY, |acc, x| acc.union(&atom_support(x, a.side)))
}

pub(crate) fn atom_support(a: &Atom, side: Side) -> SupportBox {
    match a {
        Atom::Dirac { bisection, .. } => {
            SupportBox { r: Some(bisection.range_box().clone()), s: Some(bisection.base_box().clone()) }
        }
        Atom::Density(d) => density_support(d, side),
        Atom::Convolved { left, right, .. } => {
            SupportBox { r: atom_support(left, side).r, s: atom_support(right, side).s }
        }
        Atom::Pushed { inner, .. } => atom_support(inner, side),
    }
}

fn density_support(d: &Density, side: Side) -> SupportBox {
    let chart = d.host.foliation().chart();
    let Some(own) = d.base_box.intersect(chart) else { return SupportBox::EMPTY };
    let param = own.product(&d.xi_box);
    let n = own.dim();
    let other = sample_image(&param, SAMPLES, |p| {
        let (x, alpha) = p.split_at(n);
        let u = d.host.chart(side, x, alpha).ok()??;
        d.host.map(side.flip(), &u).ok()
    })
    .and_then(|b| b.intersect(chart));
    match side {
        Side::R => SupportBox { r: Some(own), s: other },
        Side::S => SupportBox { r: other, s: Some(own) },
    }
}

/// Conservative box for `supp(a)∘N = {r(u) : u ∈ supp a, s(u) ∈ N}`.
pub fn propagate_support(a: &FibredKernel, n: &Aabb) -> Option<Aabb> {
    a.atoms
        .iter()
        .filter_map(|x| propagate_atom(x, a.side, n))
        .reduce(|p, q| p.hull(&q))
}

fn propagate_atom(a: &Atom, side: Side, n: &Aabb) -> Option<Aabb> {
    match a {
        Atom::Dirac { bisection, .. } => {
            let dom = n.intersect(bisection.base_box())?;
            let img = sample_image(&dom, SAMPLES, |z| bisection.phi(z).ok())?;
            img.intersect(&bisection.range_box().expand(1e-12))
        }
        Atom::Density(d) => {
            let chart = d.host.foliation().chart();
            let s_img = d.host.image_box(Side::S)?;
            let z_box = match side {
                Side::S => n.intersect(&d.base_box)?.intersect(&s_img)?,
                Side::R => n.intersect(&s_img)?,
            };
            let nz = z_box.dim();
            let param = z_box.product(&d.xi_box);
            let img = sample_image(&param, SAMPLES, |p| {
                let (z, alpha) = p.split_at(nz);
                let u = d.host.chart(Side::S, z, alpha).ok()??;
                let x = d.host.r(&u).ok()?;
                // r-fibred densities are cut off in the r-base; keep a margin
                // so that the padded image still covers the boundary layer.
                if side == Side::R && !d.base_box.expand(margin(&d.base_box)).contains(&x) {
                    return None;
                }
                Some(x)
            })?;
            let img = img.intersect(chart)?;
            match side {
                Side::R => img.intersect(&d.base_box),
                Side::S => Some(img),
            }
        }
        Atom::Convolved { left, right, .. } => {
            let mid = propagate_atom(right, side, n)?;
            propagate_atom(left, side, &mid)
        }
        Atom::Pushed { inner, .. } => propagate_atom(inner, side, n),
    }
}

fn margin(b: &Aabb) -> f64 {
    b.widths().into_iter().fold(0.0, f64::max) / (SAMPLES as f64 - 1.0)
}
