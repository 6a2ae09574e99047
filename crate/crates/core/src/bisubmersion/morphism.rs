use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{compose, invert, Bisubmersion, Side};
use crate::error::{Error, Result};
use crate::expr::lie_bracket;
use crate::geometry::{dist, max_abs_diff};

/// A morphism of bisubmersions `source → target` with `r_V∘π = r_U` and
/// `s_V∘π = s_U`.
#[derive(Debug, Clone, PartialEq)]
pub struct Morphism {
    source: Bisubmersion,
    target: Bisubmersion,
    kind: MorphismKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MorphismKind {
    /// `U∘U → U`, `((η, y), (ξ, x)) ↦ (η + ξ, x)`, for commuting generators.
    /// With `swapped`, the source is `U^t∘U^t` and the base point is read
    /// from the first factor: `((ξ, x), (η, y)) ↦ (ξ + η, x)`.
    Addition { swapped: bool },
    /// The open inclusion of a restriction into its inner bisubmersion.
    Inclusion,
}

/// Checks that all generator brackets vanish on sample points.
fn check_commuting(u: &Bisubmersion) -> Result<()> {
    let f = u.foliation();
    let m = f.generator_count();
    let mut pts = f.chart().grid(9);
    let mut rng = ChaCha8Rng::seed_from_u64(0xadd);
    for _ in 0..64 {
        pts.push((0..f.dim()).map(|k| rng.gen_range(f.chart().lo[k]..=f.chart().hi[k])).collect());
    }
    for i in 0..m {
        for j in (i + 1)..m {
            let b = lie_bracket(f.generator(i), f.generator(j))?;
            for p in &pts {
                let v = b.eval(p);
                let residual = crate::geometry::norm(&v);
                if residual > 1e-12 {
                    return Err(Error::BracketNotZero { i, j, residual, point: p.clone() });
                }
            }
        }
    }
    Ok(())
}

/// The addition morphism `U∘U → U` of a path-holonomy bisubmersion whose
/// generators commute.
pub fn make_addition_morphism(u: &Bisubmersion) -> Result<Morphism> {
    if !u.is_path_holonomy() {
        return Err(Error::Invalid(format!("addition morphism needs a path-holonomy bisubmersion, got {u}")));
    }
    check_commuting(u)?;
    let m = Morphism { source: compose(u, u)?, target: u.clone(), kind: MorphismKind::Addition { swapped: false } };
    let residual = m.compatibility_residual(24, 1)?;
    if residual > 1e-6 {
        return Err(Error::Invalid(format!("addition morphism incompatible: residual {residual:.3e}")));
    }
    Ok(m)
}

impl Morphism {
    /// Inclusion of `Restriction{inner, box}` into `inner`.
    pub fn inclusion(restriction: &Bisubmersion) -> Result<Self> {
        match restriction {
            Bisubmersion::Restriction { inner, .. } => Ok(Self {
                source: restriction.clone(),
                target: (**inner).clone(),
                kind: MorphismKind::Inclusion,
            }),
            other => Err(Error::Invalid(format!("inclusion needs a restriction, got {other}"))),
        }
    }

    pub fn source(&self) -> &Bisubmersion {
        &self.source
    }

    pub fn target(&self) -> &Bisubmersion {
        &self.target
    }

    pub fn kind(&self) -> MorphismKind {
        self.kind
    }

    pub fn apply(&self, w: &[f64]) -> Result<Vec<f64>> {
        match self.kind {
            MorphismKind::Inclusion => Ok(w.to_vec()),
            MorphismKind::Addition { swapped } => {
                let Bisubmersion::Composition(a, _) = &self.source else { unreachable!() };
                let (first, second) = w.split_at(a.param_dim());
                let m = a.fibre_dim();
                let base = if swapped { &first[m..] } else { &second[m..] };
                let mut out: Vec<f64> = first[..m].iter().zip(&second[..m]).map(|(p, q)| p + q).collect();
                out.extend_from_slice(base);
                Ok(out)
            }
        }
    }

    /// The same map viewed between the inverse bisubmersions. Compositions
    /// are inverted factorwise (`(U∘V)^t = V^t∘U^t`), which swaps the
    /// ambient blocks.
    pub fn transpose(&self) -> Self {
        let (source, kind) = match (&self.source, self.kind) {
            (Bisubmersion::Composition(a, b), MorphismKind::Addition { swapped }) => (
                Bisubmersion::Composition(std::sync::Arc::new(invert(b)), std::sync::Arc::new(invert(a))),
                MorphismKind::Addition { swapped: !swapped },
            ),
            (src, kind) => (invert(src), kind),
        };
        Self { source, target: invert(&self.target), kind }
    }

    /// Largest deviation of `r_V∘π` from `r_U` and `s_V∘π` from `s_U` over
    /// random source points (fibre coordinates within half the ξ-radius).
    pub fn compatibility_residual(&self, samples: usize, seed: u64) -> Result<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f = self.source.foliation();
        let fbox = self.source.default_fibre_box();
        let mut worst: f64 = 0.0;
        let mut tried = 0;
        let mut done = 0;
        while done < samples && tried < 50 * samples {
            tried += 1;
            let x: Vec<f64> = (0..f.dim()).map(|k| rng.gen_range(f.chart().lo[k]..=f.chart().hi[k])).collect();
            let alpha: Vec<f64> = fbox.lo.iter().zip(&fbox.hi).map(|(l, h)| 0.5 * rng.gen_range(*l..=*h)).collect();
            let w = match self.source.chart(Side::S, &x, &alpha) {
                Ok(Some(w)) => w,
                Ok(None) | Err(Error::DomainEscape { .. }) => continue,
                Err(e) => return Err(e),
            };
            let (ru, su) = match (self.source.r(&w), self.source.s(&w)) {
                (Ok(r), Ok(s)) => (r, s),
                _ => continue,
            };
            let p = self.apply(&w)?;
            let (rv, sv) = match (self.target.r(&p), self.target.s(&p)) {
                (Ok(r), Ok(s)) => (r, s),
                _ => continue,
            };
            worst = worst.max(max_abs_diff(&ru, &rv)).max(dist(&su, &sv));
            done += 1;
        }
        if done == 0 {
            return Err(Error::Invalid("no admissible samples for the compatibility check".into()));
        }
        Ok(worst)
    }
}
