//! JSON workspace: named foliations, bisubmersions, bisections, kernels and
//! functions, resolved into live objects.
//!
//! The canonical foliations `T`, `R`, `S`, `C` and `N` (and their
//! path-holonomy bisubmersions, under the same names) are always present
//! unless the config redefines them.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::bisubmersion::{
    compose, invert, make_addition_morphism, make_path_holonomy, restrict, translate, Bisection, Bisubmersion, Morphism,
    Side, TranslateSide,
};
use crate::error::{Error, Result};
use crate::expr::{parse_field, ScalarExpr};
use crate::flow::FlowConfig;
use crate::foliation::{canonical, LeafOptions, SingularFoliation};
use crate::geometry::Aabb;
use crate::kernel::{convolve, density, dirac, pushforward, r_to_s_convert, FibredKernel};
use crate::op::{Function, GridFunction};
use crate::quadrature::QuadratureConfig;

const CANONICAL: [&str; 5] = ["T", "R", "S", "C", "N"];

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Settings {
    pub flow: FlowConfig,
    pub quadrature: QuadratureConfig,
    pub leaf: LeafOptions,
    pub strict: bool,
}

/// Command-line overrides applied on top of the file's settings.
#[derive(Debug, Clone, Copy, Default)]
pub struct Overrides {
    pub ode_tol: Option<f64>,
    pub ode_max_steps: Option<usize>,
    pub quad_order: Option<usize>,
    pub seed: Option<u64>,
    pub strict: bool,
}

impl Overrides {
    fn apply(&self, s: &mut Settings) {
        if let Some(t) = self.ode_tol {
            s.flow.abs_tol = t;
            s.flow.rel_tol = t;
        }
        if let Some(n) = self.ode_max_steps {
            s.flow.max_steps = n;
        }
        if let Some(q) = self.quad_order {
            s.quadrature.order = q;
        }
        if let Some(seed) = self.seed {
            s.leaf.seed = seed;
        }
        s.strict |= self.strict;
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct FoliationSpec {
    dim: usize,
    #[serde(rename = "box")]
    chart: Vec<[f64; 2]>,
    generators: Vec<String>,
    xi_radius: Vec<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
enum BisubmersionSpec {
    PathHolonomy { foliation: String },
    Compose { left: String, right: String },
    Inverse { of: String },
    Translate { of: String, bisection: String, side: SideWord },
    Restrict { of: String, param_box: Vec<[f64; 2]> },
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(rename_all = "snake_case")]
enum SideWord {
    Left,
    Right,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
enum BisectionSpec {
    Constant { host: String, xi: Vec<f64>, base_box: Vec<[f64; 2]> },
    Identity { host: String, base_box: Vec<[f64; 2]> },
    Field { host: String, xi: Vec<String>, base_box: Vec<[f64; 2]> },
    Compose { first: String, second: String },
    Inverse { of: String },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
enum AtomSpec {
    Dirac { bisection: String, coeff: String },
    Density { host: String, expr: String, xi_box: Vec<[f64; 2]>, base_box: Vec<[f64; 2]> },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
enum MorphismSpec {
    Addition { bisubmersion: String },
    Inclusion { restriction: String },
}

#[derive(Debug, Clone, Copy, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
enum SideSpec {
    #[default]
    R,
    S,
}

impl From<SideSpec> for Side {
    fn from(s: SideSpec) -> Side {
        match s {
            SideSpec::R => Side::R,
            SideSpec::S => Side::S,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct AtomsKernel {
    #[serde(default)]
    side: SideSpec,
    /// Needed only when `atoms` is empty.
    foliation: Option<String>,
    atoms: Vec<AtomSpec>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct SumKernel {
    sum: Vec<String>,
    weights: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct PushKernel {
    pushforward: String,
    morphism: MorphismSpec,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConvertKernel {
    convert: String,
    weight: Option<String>,
}

#[derive(Debug, Clone)]
enum KernelSpec {
    Atoms(AtomsKernel),
    Convolve(Vec<String>),
    Sum(SumKernel),
    Transpose(String),
    Pushforward(PushKernel),
    Convert(ConvertKernel),
}

impl KernelSpec {
    fn parse(name: &str, v: &Value) -> Result<Self> {
        let obj = v.as_object().ok_or_else(|| Error::Config(format!("kernel '{name}' must be an object")))?;
        fn de<T: serde::de::DeserializeOwned>(name: &str, v: &Value) -> Result<T> {
            serde_json::from_value(v.clone()).map_err(|e| Error::Config(format!("kernel '{name}': {e}")))
        }
        if obj.contains_key("atoms") {
            Ok(Self::Atoms(de(name, v)?))
        } else if let Some(c) = obj.get("convolve") {
            if obj.len() != 1 {
                return Err(Error::Config(format!("kernel '{name}': 'convolve' takes no other keys")));
            }
            Ok(Self::Convolve(de(name, c)?))
        } else if obj.contains_key("sum") {
            Ok(Self::Sum(de(name, v)?))
        } else if let Some(t) = obj.get("transpose") {
            if obj.len() != 1 {
                return Err(Error::Config(format!("kernel '{name}': 'transpose' takes no other keys")));
            }
            Ok(Self::Transpose(de(name, t)?))
        } else if obj.contains_key("pushforward") {
            Ok(Self::Pushforward(de(name, v)?))
        } else if obj.contains_key("convert") {
            Ok(Self::Convert(de(name, v)?))
        } else {
            Err(Error::Config(format!(
                "kernel '{name}' needs one of 'atoms', 'convolve', 'sum', 'transpose', 'pushforward', 'convert'"
            )))
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum FunctionSpec {
    Expr(String),
    Full(FullFunctionSpec),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct FullFunctionSpec {
    expr: Option<String>,
    /// CSV grid file, relative to the config file.
    grid: Option<PathBuf>,
    dim: Option<usize>,
    support: Option<Vec<[f64; 2]>>,
}

/// A user-declared consistency check, run by the `config` verify suite.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CheckSpec {
    /// `Op(lhs)f` against `Op(rhs)f`.
    Equal { name: String, lhs: String, rhs: String, function: String, grid: GridSpec, tolerance: f64 },
    /// `Op(a*b)f` against `Op(a)Op(b)f`.
    Homomorphism { name: String, a: String, b: String, function: String, grid: GridSpec, tolerance: f64 },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    #[serde(rename = "box")]
    pub bx: Vec<[f64; 2]>,
    pub res: Vec<usize>,
}

impl GridSpec {
    pub fn grid(&self) -> Result<crate::op::Grid> {
        crate::op::Grid::new(aabb(&self.bx)?, self.res.clone())
    }
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    #[serde(default)]
    settings: Settings,
    #[serde(default)]
    foliations: BTreeMap<String, FoliationSpec>,
    #[serde(default)]
    bisubmersions: BTreeMap<String, BisubmersionSpec>,
    #[serde(default)]
    bisections: BTreeMap<String, BisectionSpec>,
    #[serde(default)]
    kernels: BTreeMap<String, Value>,
    #[serde(default)]
    functions: BTreeMap<String, FunctionSpec>,
    #[serde(default)]
    checks: Vec<CheckSpec>,
}

/// A named function from the workspace.
#[derive(Debug, Clone)]
pub enum WorkspaceFunction {
    Expr { expr: ScalarExpr, support: Option<Aabb> },
    Grid(GridFunction),
}

impl Function for WorkspaceFunction {
    fn value(&self, x: &[f64]) -> Result<f64> {
        match self {
            Self::Expr { expr, support } => match support {
                Some(b) if !b.contains(x) => Ok(0.0),
                _ => expr.try_eval(x, &[]),
            },
            Self::Grid(g) => Ok(g.interpolate(x)),
        }
    }

    fn support(&self) -> Option<Aabb> {
        match self {
            Self::Expr { support, .. } => support.clone(),
            Self::Grid(g) => Some(g.grid().bx.clone()),
        }
    }
}

/// The resolved workspace. All maps are ordered, so listings are deterministic.
#[derive(Debug, Clone)]
pub struct Workspace {
    pub settings: Settings,
    foliations: BTreeMap<String, Arc<SingularFoliation>>,
    bisubmersions: BTreeMap<String, Bisubmersion>,
    bisections: BTreeMap<String, Bisection>,
    kernels: BTreeMap<String, FibredKernel>,
    functions: BTreeMap<String, WorkspaceFunction>,
    checks: Vec<CheckSpec>,
}

fn aabb(iv: &[[f64; 2]]) -> Result<Aabb> {
    Aabb::from_intervals(iv).map_err(|e| Error::Config(e.to_string()))
}

fn missing(kind: &str, name: &str) -> Error {
    Error::Config(format!("unknown {kind} '{name}'"))
}

impl Workspace {
    /// Only the canonical objects.
    pub fn canonical(overrides: &Overrides) -> Result<Self> {
        Self::build(ConfigFile::default(), Path::new("."), overrides)
    }

    pub fn load(path: &Path, overrides: &Overrides) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let dir = path.parent().unwrap_or(Path::new("."));
        Self::from_json(&text, dir, overrides)
    }

    /// Parses a config; relative grid paths resolve against `dir`.
    pub fn from_json(text: &str, dir: &Path, overrides: &Overrides) -> Result<Self> {
        let file: ConfigFile = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        Self::build(file, dir, overrides)
    }

    fn build(mut file: ConfigFile, dir: &Path, overrides: &Overrides) -> Result<Self> {
        overrides.apply(&mut file.settings);
        file.settings.flow.validate().map_err(|e| Error::Config(e.to_string()))?;
        file.settings.quadrature.validate().map_err(|e| Error::Config(e.to_string()))?;
        let kernel_specs = file
            .kernels
            .iter()
            .map(|(k, v)| Ok((k.clone(), KernelSpec::parse(k, v)?)))
            .collect::<Result<BTreeMap<_, _>>>()?;
        let mut r = Resolver {
            file: &file,
            kernel_specs,
            ws: Workspace {
                settings: file.settings,
                foliations: BTreeMap::new(),
                bisubmersions: BTreeMap::new(),
                bisections: BTreeMap::new(),
                kernels: BTreeMap::new(),
                functions: BTreeMap::new(),
                checks: file.checks.clone(),
            },
            visiting: BTreeSet::new(),
        };
        for name in CANONICAL {
            r.foliation(name)?;
            r.bisubmersion(name)?;
        }
        for name in file.foliations.keys() {
            r.foliation(name)?;
        }
        for name in file.bisubmersions.keys() {
            r.bisubmersion(name)?;
        }
        for name in file.bisections.keys() {
            r.bisection(name)?;
        }
        let names: Vec<String> = r.kernel_specs.keys().cloned().collect();
        for name in &names {
            r.kernel(name)?;
        }
        for (name, spec) in &file.functions {
            let f = function(name, spec, dir)?;
            r.ws.functions.insert(name.clone(), f);
        }
        Ok(r.ws)
    }

    pub fn flow_config(&self) -> &FlowConfig {
        &self.settings.flow
    }

    pub fn quad(&self) -> &QuadratureConfig {
        &self.settings.quadrature
    }

    pub fn foliation(&self, name: &str) -> Result<&Arc<SingularFoliation>> {
        self.foliations.get(name).ok_or_else(|| missing("foliation", name))
    }

    pub fn bisubmersion(&self, name: &str) -> Result<&Bisubmersion> {
        self.bisubmersions.get(name).ok_or_else(|| missing("bisubmersion", name))
    }

    pub fn bisection(&self, name: &str) -> Result<&Bisection> {
        self.bisections.get(name).ok_or_else(|| missing("bisection", name))
    }

    pub fn kernel(&self, name: &str) -> Result<&FibredKernel> {
        self.kernels.get(name).ok_or_else(|| missing("kernel", name))
    }

    pub fn function(&self, name: &str) -> Result<&WorkspaceFunction> {
        self.functions.get(name).ok_or_else(|| missing("function", name))
    }

    pub fn foliations(&self) -> impl Iterator<Item = (&String, &Arc<SingularFoliation>)> {
        self.foliations.iter()
    }

    pub fn bisubmersions(&self) -> impl Iterator<Item = (&String, &Bisubmersion)> {
        self.bisubmersions.iter()
    }

    pub fn bisections(&self) -> impl Iterator<Item = (&String, &Bisection)> {
        self.bisections.iter()
    }

    pub fn kernels(&self) -> impl Iterator<Item = (&String, &FibredKernel)> {
        self.kernels.iter()
    }

    pub fn functions(&self) -> impl Iterator<Item = (&String, &WorkspaceFunction)> {
        self.functions.iter()
    }

    pub fn checks(&self) -> &[CheckSpec] {
        &self.checks
    }
}

fn function(name: &str, spec: &FunctionSpec, dir: &Path) -> Result<WorkspaceFunction> {
    let ctx = |e: Error| Error::Config(format!("function '{name}': {e}"));
    match spec {
        FunctionSpec::Expr(s) => {
            let dim = infer_dim(s);
            Ok(WorkspaceFunction::Expr { expr: ScalarExpr::parse(s, dim).map_err(ctx)?, support: None })
        }
        FunctionSpec::Full(full) => match (&full.expr, &full.grid) {
            (Some(s), None) => {
                let support = full.support.as_deref().map(aabb).transpose()?;
                let dim = full.dim.or(support.as_ref().map(Aabb::dim)).unwrap_or_else(|| infer_dim(s));
                Ok(WorkspaceFunction::Expr { expr: ScalarExpr::parse(s, dim).map_err(ctx)?, support })
            }
            (None, Some(p)) => {
                let path = dir.join(p);
                let text = std::fs::read_to_string(&path)
                    .map_err(|e| Error::Config(format!("function '{name}': cannot read {}: {e}", path.display())))?;
                Ok(WorkspaceFunction::Grid(GridFunction::from_csv(&text).map_err(ctx)?))
            }
            _ => Err(Error::Config(format!("function '{name}' needs exactly one of 'expr' and 'grid'"))),
        },
    }
}

/// Largest `xK` index mentioned, at least 1. Only used when no dimension is given.
fn infer_dim(s: &str) -> usize {
    let b = s.as_bytes();
    let mut best = 1;
    let mut i = 0;
    while i < b.len() {
        let starts = b[i] == b'x' && (i == 0 || !(b[i - 1].is_ascii_alphanumeric() || b[i - 1] == b'_'));
        if starts {
            let mut j = i + 1;
            while j < b.len() && b[j].is_ascii_digit() {
                j += 1;
            }
            if let Ok(k) = s[i + 1..j].parse::<usize>() {
                best = best.max(k);
            }
            i = j;
        } else {
            i += 1;
        }
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Kind {
    Bisubmersion,
    Bisection,
    Kernel,
}

struct Resolver<'a> {
    file: &'a ConfigFile,
    kernel_specs: BTreeMap<String, KernelSpec>,
    ws: Workspace,
    visiting: BTreeSet<(Kind, String)>,
}

impl Resolver<'_> {
    fn enter(&mut self, kind: Kind, name: &str) -> Result<()> {
        if !self.visiting.insert((kind, name.to_string())) {
            return Err(Error::Config(format!("reference cycle through {kind:?} '{name}'").to_lowercase()));
        }
        Ok(())
    }

    fn leave(&mut self, kind: Kind, name: &str) {
        self.visiting.remove(&(kind, name.to_string()));
    }

    fn foliation(&mut self, name: &str) -> Result<Arc<SingularFoliation>> {
        if let Some(f) = self.ws.foliations.get(name) {
            return Ok(f.clone());
        }
        let flow = self.ws.settings.flow;
        let f = match self.file.foliations.get(name) {
            Some(spec) => {
                let chart = aabb(&spec.chart)?;
                if chart.dim() != spec.dim {
                    return Err(Error::Config(format!("foliation '{name}': box has dimension {}", chart.dim())));
                }
                let gens = spec
                    .generators
                    .iter()
                    .map(|g| parse_field(g, spec.dim))
                    .collect::<Result<Vec<_>>>()
                    .map_err(|e| Error::Config(format!("foliation '{name}': {e}")))?;
                SingularFoliation::new(name, chart, gens, spec.xi_radius.clone())
                    .map_err(|e| Error::Config(format!("foliation '{name}': {e}")))?
            }
            None => canonical::by_name(name).ok_or_else(|| missing("foliation", name))?,
        };
        let f = Arc::new(f.with_flow_config(flow));
        self.ws.foliations.insert(name.to_string(), f.clone());
        Ok(f)
    }

    fn bisubmersion(&mut self, name: &str) -> Result<Bisubmersion> {
        if let Some(u) = self.ws.bisubmersions.get(name) {
            return Ok(u.clone());
        }
        let spec = match self.file.bisubmersions.get(name) {
            Some(s) => s.clone(),
            None if CANONICAL.contains(&name) => BisubmersionSpec::PathHolonomy { foliation: name.to_string() },
            None => return Err(missing("bisubmersion", name)),
        };
        self.enter(Kind::Bisubmersion, name)?;
        let ctx = |e: Error| match e {
            Error::Config(m) => Error::Config(m),
            e => Error::Config(format!("bisubmersion '{name}': {e}")),
        };
        let u = match spec {
            BisubmersionSpec::PathHolonomy { foliation } => Ok(make_path_holonomy(self.foliation(&foliation)?)),
            BisubmersionSpec::Compose { left, right } => {
                let (l, r) = (self.bisubmersion(&left)?, self.bisubmersion(&right)?);
                compose(&l, &r)
            }
            BisubmersionSpec::Inverse { of } => Ok(invert(&self.bisubmersion(&of)?)),
            BisubmersionSpec::Translate { of, bisection, side } => {
                let u = self.bisubmersion(&of)?;
                let s = self.bisection(&bisection)?;
                let side = match side {
                    SideWord::Left => TranslateSide::Left,
                    SideWord::Right => TranslateSide::Right,
                };
                translate(&u, &s, side)
            }
            BisubmersionSpec::Restrict { of, param_box } => restrict(&self.bisubmersion(&of)?, aabb(&param_box)?),
        }
        .map_err(ctx)?;
        self.leave(Kind::Bisubmersion, name);
        self.ws.bisubmersions.insert(name.to_string(), u.clone());
        Ok(u)
    }

    fn bisection(&mut self, name: &str) -> Result<Bisection> {
        if let Some(s) = self.ws.bisections.get(name) {
            return Ok(s.clone());
        }
        let spec = self.file.bisections.get(name).cloned().ok_or_else(|| missing("bisection", name))?;
        self.enter(Kind::Bisection, name)?;
        let ctx = |e: Error| match e {
            Error::Config(m) => Error::Config(m),
            e => Error::Config(format!("bisection '{name}': {e}")),
        };
        let s = match spec {
            BisectionSpec::Constant { host, xi, base_box } => {
                let u = self.bisubmersion(&host)?;
                Bisection::constant(&u, xi, aabb(&base_box)?)
            }
            BisectionSpec::Identity { host, base_box } => {
                let u = self.bisubmersion(&host)?;
                Bisection::identity(&u, aabb(&base_box)?)
            }
            BisectionSpec::Field { host, xi, base_box } => {
                let u = self.bisubmersion(&host)?;
                let n = u.base_dim();
                xi.iter()
                    .map(|e| ScalarExpr::parse(e, n))
                    .collect::<Result<Vec<_>>>()
                    .and_then(|xi| Bisection::xi_field(&u, xi, aabb(&base_box)?))
            }
            BisectionSpec::Compose { first, second } => {
                let (s, t) = (self.bisection(&first)?, self.bisection(&second)?);
                Bisection::compose(&s, &t)
            }
            BisectionSpec::Inverse { of } => Ok(self.bisection(&of)?.inverse()),
        }
        .map_err(ctx)?;
        self.leave(Kind::Bisection, name);
        self.ws.bisections.insert(name.to_string(), s.clone());
        Ok(s)
    }

    fn kernel(&mut self, name: &str) -> Result<FibredKernel> {
        if let Some(k) = self.ws.kernels.get(name) {
            return Ok(k.clone());
        }
        let spec = self.kernel_specs.get(name).cloned().ok_or_else(|| missing("kernel", name))?;
        self.enter(Kind::Kernel, name)?;
        let ctx = |e: Error| match e {
            Error::Config(m) => Error::Config(m),
            e => Error::Config(format!("kernel '{name}': {e}")),
        };
        let quad = self.ws.settings.quadrature;
        let k = match spec {
            KernelSpec::Atoms(spec) => self.atoms(name, &spec),
            KernelSpec::Convolve(parts) => {
                if parts.len() < 2 {
                    return Err(Error::Config(format!("kernel '{name}': 'convolve' needs at least two kernels")));
                }
                let mut acc = self.kernel(&parts[0])?;
                for p in &parts[1..] {
                    let next = self.kernel(p)?;
                    acc = convolve(&acc, &next).map_err(ctx)?;
                }
                Ok(acc)
            }
            KernelSpec::Sum(spec) => {
                if spec.sum.is_empty() {
                    return Err(Error::Config(format!("kernel '{name}': empty sum")));
                }
                let weights = spec.weights.clone().unwrap_or_else(|| vec![1.0; spec.sum.len()]);
                if weights.len() != spec.sum.len() {
                    return Err(Error::Config(format!("kernel '{name}': weights and sum differ in length")));
                }
                let mut acc: Option<FibredKernel> = None;
                for (p, w) in spec.sum.iter().zip(weights) {
                    let k = self.kernel(p)?.scale(w);
                    acc = Some(match acc {
                        None => k,
                        Some(a) => a.add(&k).map_err(ctx)?,
                    });
                }
                Ok(acc.expect("non-empty"))
            }
            KernelSpec::Transpose(of) => Ok(self.kernel(&of)?.transpose()),
            KernelSpec::Pushforward(spec) => {
                let a = self.kernel(&spec.pushforward)?;
                let pi = match &spec.morphism {
                    MorphismSpec::Addition { bisubmersion } => {
                        make_addition_morphism(&self.bisubmersion(bisubmersion)?).map_err(ctx)?
                    }
                    MorphismSpec::Inclusion { restriction } => {
                        Morphism::inclusion(&self.bisubmersion(restriction)?).map_err(ctx)?
                    }
                };
                pushforward(&pi, &a, &quad)
            }
            KernelSpec::Convert(spec) => {
                let a = self.kernel(&spec.convert)?;
                let w = spec.weight.as_deref().map(|w| ScalarExpr::parse(w, a.base().dim())).transpose().map_err(ctx)?;
                r_to_s_convert(&a, w.as_ref())
            }
        }
        .map_err(ctx)?;
        self.leave(Kind::Kernel, name);
        self.ws.kernels.insert(name.to_string(), k.clone());
        Ok(k)
    }

    fn atoms(&mut self, name: &str, spec: &AtomsKernel) -> Result<FibredKernel> {
        let side: Side = spec.side.into();
        let mut acc: Option<FibredKernel> = None;
        for atom in &spec.atoms {
            let k = match atom {
                AtomSpec::Dirac { bisection, coeff } => {
                    let s = self.bisection(bisection)?;
                    let c = ScalarExpr::parse(coeff, s.host().base_dim())?;
                    dirac(&s, c, side)?
                }
                AtomSpec::Density { host, expr, xi_box, base_box } => {
                    let u = self.bisubmersion(host)?;
                    let a = ScalarExpr::parse_with(expr, u.base_dim(), u.fibre_dim())?;
                    density(&u, a, aabb(xi_box)?, aabb(base_box)?, side)?
                }
            };
            acc = Some(match acc {
                None => k,
                Some(a) => a.add(&k)?,
            });
        }
        match (acc, &spec.foliation) {
            (Some(k), _) => Ok(k),
            (None, Some(f)) => Ok(FibredKernel::zero(side, self.foliation(f)?)),
            (None, None) => Err(Error::Config(format!("kernel '{name}': empty atom list needs a 'foliation'"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"{
        "settings": { "quadrature": { "order": 24 } },
        "bisections": {
            "shift": { "type": "constant", "host": "T", "xi": [1.0], "base_box": [[-3, 2]] },
            "back": { "type": "inverse", "of": "shift" }
        },
        "bisubmersions": {
            "TT": { "type": "compose", "left": "T", "right": "T" }
        },
        "kernels": {
            "move": { "side": "r", "atoms": [ { "type": "dirac", "bisection": "shift", "coeff": "1" } ] },
            "blur": { "side": "r", "atoms": [ { "type": "density", "host": "T", "expr": "(1-xi1^2)^2",
                       "xi_box": [[-1, 1]], "base_box": [[-3, 3]] } ] },
            "both": { "sum": ["move", "blur"], "weights": [2, -1] },
            "mb": { "convolve": ["move", "blur"] },
            "bb": { "convolve": ["blur", "blur"] },
            "bb_red": { "pushforward": "bb", "morphism": { "type": "addition", "bisubmersion": "T" } },
            "blur_s": { "convert": "blur" },
            "blur_t": { "transpose": "blur_s" }
        },
        "functions": {
            "f": "exp(-x1^2)",
            "g": { "expr": "1 - x1^2", "support": [[-1, 1]] }
        }
    }"#;

    #[test]
    fn sample_config_resolves() {
        let ws = Workspace::from_json(SAMPLE, Path::new("."), &Overrides::default()).unwrap();
        assert_eq!(ws.quad().order, 24);
        assert!(ws.kernel("mb").unwrap().atoms().iter().all(|a| a.is_density()));
        assert!(ws.kernel("bb_red").unwrap().atoms()[0].is_density());
        assert_eq!(ws.kernel("blur_s").unwrap().side(), Side::S);
        assert_eq!(ws.kernel("blur_t").unwrap().side(), Side::R);
        assert_eq!(ws.kernel("both").unwrap().atoms().len(), 2);
        assert_eq!(ws.bisubmersion("TT").unwrap().fibre_dim(), 2);
        let g = ws.function("g").unwrap();
        assert_eq!(g.value(&[2.0]).unwrap(), 0.0);
        assert_eq!(g.value(&[0.5]).unwrap(), 0.75);
        assert!(ws.foliation("R").is_ok());
    }

    #[test]
    fn overrides_reach_the_foliations() {
        let o = Overrides { ode_tol: Some(1e-7), quad_order: Some(8), ..Overrides::default() };
        let ws = Workspace::canonical(&o).unwrap();
        assert_eq!(ws.foliation("T").unwrap().flow_config().abs_tol, 1e-7);
        assert_eq!(ws.quad().order, 8);
        let bad = Overrides { quad_order: Some(1), ..Overrides::default() };
        assert!(matches!(Workspace::canonical(&bad), Err(Error::Config(_))));
    }

    #[test]
    fn errors_name_the_missing_key() {
        let cfg = r#"{ "kernels": { "k": { "convolve": ["a", "nowhere"] }, "a": { "transpose": "k" } } }"#;
        let err = Workspace::from_json(cfg, Path::new("."), &Overrides::default()).unwrap_err();
        assert!(err.to_string().contains("cycle"), "{err}");
        let cfg = r#"{ "kernels": { "k": { "transpose": "ghost" } } }"#;
        let err = Workspace::from_json(cfg, Path::new("."), &Overrides::default()).unwrap_err();
        assert!(err.to_string().contains("'ghost'"), "{err}");
        let ws = Workspace::canonical(&Overrides::default()).unwrap();
        assert!(ws.foliation("Q").unwrap_err().to_string().contains("'Q'"));
        let cfg = r#"{ "kernels": { "k": { "side": "r", "atoms": [], "extra": 1 } } }"#;
        assert!(Workspace::from_json(cfg, Path::new("."), &Overrides::default()).is_err());
        assert!(Workspace::from_json("{ not json", Path::new("."), &Overrides::default()).is_err());
    }

    #[test]
    fn bisection_cycles_are_rejected() {
        let cfg = r#"{ "bisections": {
            "a": { "type": "inverse", "of": "b" },
            "b": { "type": "inverse", "of": "a" } } }"#;
        let err = Workspace::from_json(cfg, Path::new("."), &Overrides::default()).unwrap_err();
        assert!(err.to_string().contains("cycle"));
    }

    #[test]
    fn dimension_is_inferred_from_variables() {
        assert_eq!(infer_dim("exp(-x1^2)"), 1);
        assert_eq!(infer_dim("x2*sin(x1) + exp(x3)"), 3);
        assert_eq!(infer_dim("2"), 1);
    }
}
