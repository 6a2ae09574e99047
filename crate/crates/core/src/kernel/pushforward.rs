use std::sync::Arc;

use super::{Atom, Density, DensityFn, FibredKernel};
use crate::bisubmersion::{Bisubmersion, Morphism, MorphismKind};
use crate::error::{Error, Result};
use crate::quadrature::QuadratureConfig;

/// `π_* a`, defined by `(π_*a, φ) = (a, φ∘π)`.
///
/// Convolved pairs of densities pushed along an addition morphism and
/// densities pushed along an inclusion become density atoms on the target;
/// everything else is kept as a lazy `Pushed` atom.
pub fn pushforward(pi: &Morphism, a: &FibredKernel, quad: &QuadratureConfig) -> Result<FibredKernel> {
    quad.validate()?;
    let pi_arc = Arc::new(pi.clone());
    let mut atoms = Vec::with_capacity(a.atoms.len());
    for atom in &a.atoms {
        let host = atom.host();
        if &host != pi.source() {
            return Err(Error::HostMismatch(format!("atom lives on {host}, morphism starts at {}", pi.source())));
        }
        atoms.push(push_atom(&pi_arc, atom, a.side, quad).unwrap_or_else(|| Atom::Pushed {
            morphism: pi_arc.clone(),
            inner: Arc::new(atom.clone()),
        }));
    }
    Ok(FibredKernel::from_atoms(a.side, a.base.clone(), atoms))
}

fn push_atom(pi: &Arc<Morphism>, atom: &Atom, side: crate::bisubmersion::Side, quad: &QuadratureConfig) -> Option<Atom> {
    use crate::bisubmersion::Side;
    let target: &Bisubmersion = pi.target();
    match (pi.kind(), atom) {
        (MorphismKind::Addition { .. }, Atom::Convolved { left, right, .. }) => {
            let (Atom::Density(first), Atom::Density(second)) = (&**left, &**right) else { return None };
            let base_box = match side {
                Side::R => first.base_box.clone(),
                Side::S => second.base_box.clone(),
            };
            Some(Atom::Density(Arc::new(Density {
                host: target.clone(),
                func: DensityFn::AdditionPushed {
                    first: first.clone(),
                    second: second.clone(),
                    side,
                    order: quad.order,
                },
                xi_box: first.xi_box.sum(&second.xi_box),
                base_box,
            })))
        }
        (MorphismKind::Inclusion, Atom::Density(d)) => {
            let Bisubmersion::Restriction { param_box, .. } = pi.source() else { return None };
            Some(Atom::Density(Arc::new(Density {
                host: target.clone(),
                func: DensityFn::Restricted { param_box: param_box.clone(), inner: d.clone() },
                xi_box: d.xi_box.clone(),
                base_box: d.base_box.clone(),
            })))
        }
        _ => None,
    }
}
