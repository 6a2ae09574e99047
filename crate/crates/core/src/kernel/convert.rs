use std::sync::Arc;

use super::{Atom, Density, DensityFn, FibredKernel};
use crate::bisubmersion::{Bisubmersion, Side};
use crate::error::{Error, Result};
use crate::expr::ScalarExpr;

/// `|det ∂_z r(chart_s(z, α))|` at `u`: the ratio between Lebesgue measure
/// in r-chart coordinates `(α, r(u))` and in s-chart coordinates `(α, s(u))`.
pub fn conversion_factor(host: &Bisubmersion, u: &[f64]) -> Result<f64> {
    let det = host.s_chart_jacobian(u)?.determinant().abs();
    if det.is_finite() && det > 0.0 {
        Ok(det)
    } else {
        Err(Error::Eval(format!("degenerate transverse Jacobian {det:e} at {u:?}")))
    }
}

/// Rewrites an r-fibred kernel of densities as the s-fibred kernel `ã` with
/// `μ_s(ã) = μ_r(a)`, where `μ = weight · Lebesgue` (Lebesgue if `None`).
pub fn r_to_s_convert(a: &FibredKernel, weight: Option<&ScalarExpr>) -> Result<FibredKernel> {
    if a.side != Side::R {
        return Err(Error::SideMismatch("conversion expects an r-fibred kernel".into()));
    }
    if let Some(w) = weight {
        w.check_vars(a.base.dim(), 0)?;
    }
    let atoms = a.atoms.iter().map(|x| convert_atom(x, weight)).collect::<Result<Vec<_>>>()?;
    Ok(FibredKernel::from_atoms(Side::S, a.base.clone(), atoms))
}

fn convert_atom(a: &Atom, weight: Option<&ScalarExpr>) -> Result<Atom> {
    match a {
        Atom::Dirac { bisection, .. } => Err(Error::NotTransverse(format!(
            "Dirac atom on {} is not a density on the opposite fibration",
            bisection.host()
        ))),
        Atom::Density(d) => {
            let base_box = d
                .host
                .image_box(Side::S)
                .unwrap_or_else(|| d.host.foliation().chart().clone());
            Ok(Atom::Density(Arc::new(Density {
                host: d.host.clone(),
                func: DensityFn::Converted { from: Side::R, weight: weight.cloned(), inner: d.clone() },
                xi_box: d.xi_box.clone(),
                base_box,
            })))
        }
        Atom::Convolved { left, right, host } => Ok(Atom::Convolved {
            left: Arc::new(convert_atom(left, weight)?),
            right: Arc::new(convert_atom(right, weight)?),
            host: host.clone(),
        }),
        Atom::Pushed { morphism, inner } => {
            Ok(Atom::Pushed { morphism: morphism.clone(), inner: Arc::new(convert_atom(inner, weight)?) })
        }
    }
}
