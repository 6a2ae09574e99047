use super::FibredKernel;
use crate::bisubmersion::Bisubmersion;
use crate::error::{Error, Result};
use crate::expr::ScalarExpr;
use crate::quadrature::QuadratureConfig;

/// A smooth map `N → M` between chart boxes.
#[derive(Debug, Clone, PartialEq)]
pub enum BaseMap {
    Expr { dim_in: usize, components: Vec<ScalarExpr> },
    /// `outer ∘ inner`.
    Compose(Box<BaseMap>, Box<BaseMap>),
}

impl BaseMap {
    pub fn new(dim_in: usize, components: Vec<ScalarExpr>) -> Result<Self> {
        for c in &components {
            c.check_vars(dim_in, 0)?;
        }
        Ok(BaseMap::Expr { dim_in, components })
    }

    pub fn identity(dim: usize) -> Self {
        let components = (0..dim).map(|k| ScalarExpr::var(crate::expr::Var::X(k))).collect();
        BaseMap::Expr { dim_in: dim, components }
    }

    pub fn dim_in(&self) -> usize {
        match self {
            BaseMap::Expr { dim_in, .. } => *dim_in,
            BaseMap::Compose(_, inner) => inner.dim_in(),
        }
    }

    pub fn dim_out(&self) -> usize {
        match self {
            BaseMap::Expr { components, .. } => components.len(),
            BaseMap::Compose(outer, _) => outer.dim_out(),
        }
    }

    pub fn eval(&self, y: &[f64]) -> Result<Vec<f64>> {
        match self {
            BaseMap::Expr { components, .. } => components.iter().map(|c| c.try_eval(y, &[])).collect(),
            BaseMap::Compose(outer, inner) => outer.eval(&inner.eval(y)?),
        }
    }

    pub fn then(self, outer: BaseMap) -> Result<BaseMap> {
        if outer.dim_in() != self.dim_out() {
            return Err(Error::DimensionMismatch { expected: self.dim_out(), found: outer.dim_in() });
        }
        Ok(BaseMap::Compose(Box::new(outer), Box::new(self)))
    }
}

/// `p^*a`, fibred over `N`: its fibre over `y` is the fibre of `a` over `p(y)`.
/// Points of the pullback are pairs `(y, u)` with `p(y) = q(u)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PulledBack {
    map: BaseMap,
    kernel: FibredKernel,
}

pub fn pullback_base(p: BaseMap, a: &FibredKernel) -> Result<PulledBack> {
    if p.dim_out() != a.base().dim() {
        return Err(Error::DimensionMismatch { expected: a.base().dim(), found: p.dim_out() });
    }
    Ok(PulledBack { map: p, kernel: a.clone() })
}

impl PulledBack {
    pub fn map(&self) -> &BaseMap {
        &self.map
    }

    pub fn kernel(&self) -> &FibredKernel {
        &self.kernel
    }

    /// `(p'^*(p^*a))` represented as `(p∘p')^*a`.
    pub fn pullback(&self, p: BaseMap) -> Result<PulledBack> {
        Ok(PulledBack { map: p.then(self.map.clone())?, kernel: self.kernel.clone() })
    }

    /// `(p^*a, φ)(y)` for `φ(host, y, u)` on the fibred product.
    pub fn pair(
        &self,
        y: &[f64],
        phi: &dyn Fn(&Bisubmersion, &[f64], &[f64]) -> Result<f64>,
        quad: &QuadratureConfig,
    ) -> Result<f64> {
        let x = self.map.eval(y)?;
        self.kernel.pair(&x, &|h, u| phi(h, y, u), quad)
    }
}
