//! Scenario files.
//!
//! A scenario is a TOML document:
//!
//! ```toml
//! name = "entropic"
//! [params]            # optional named constants for expressions
//! K = 1.0
//! [model]
//! kind = "brownian"   # or "gbm" (mu, sigma, exact) or "sde" (drift, vol)
//! [endowment]
//! expr = "x"
//! [core]
//! tag = "entropic"    # or table = "f.csv" with class = "A1"
//! gamma = 1.0
//! [solver]
//! steps = 64
//! paths = 200000
//! seed = 1
//! [checks]
//! list = ["duality", "axioms"]
//! ```

use std::collections::BTreeMap;
use std::ops::Range;
use std::path::{Path, PathBuf};

use dcu_core::bsde::BasisSpec;
use dcu_core::inequalities::InequalityId;
use dcu_core::model::{
    build_catalogue_entry, build_linear_dirac, CatalogueTag, CoreClass, CoreFunction, Generator,
    GrowthParams, OffsetFn,
};
use serde::{Deserialize, Serialize};
use toml::Spanned;

use crate::error::{InModule, RunError};
use crate::expr::Expr;
use crate::tabulated::load_table;

fn default_horizon() -> f64 {
    1.0
}
fn default_dim() -> usize {
    1
}
fn default_degree() -> usize {
    4
}
fn yes() -> bool {
    true
}
fn default_controls() -> usize {
    50
}
fn default_draws() -> usize {
    10
}
fn default_samples() -> usize {
    100_000
}
fn default_eta() -> Spanned<String> {
    Spanned::new(0..0, "max(x, 0)".to_string())
}
fn default_bound_controls() -> Vec<f64> {
    vec![1.0, 2.0]
}
fn default_alpha_star() -> f64 {
    4.0
}
fn default_one() -> f64 {
    1.0
}
fn default_alpha() -> f64 {
    GrowthParams::default().alpha
}
fn default_zero_expr() -> Spanned<String> {
    Spanned::new(0..0, "0".to_string())
}
fn default_z_min() -> f64 {
    -20.0
}
fn default_z_max() -> f64 {
    20.0
}
fn default_z_points() -> usize {
    4001
}
fn default_dir() -> String {
    "out".to_string()
}
fn default_formats() -> Vec<String> {
    vec!["csv".to_string()]
}

/// The scenario as written, with defaults filled in. Serializing it gives
/// the resolved configuration stored in the manifest.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub name: String,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
    pub model: ModelSection,
    pub endowment: EndowmentSection,
    pub core: CoreSection,
    pub solver: SolverSection,
    #[serde(default)]
    pub checks: ChecksSection,
    #[serde(default)]
    pub outputs: OutputSection,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub kind: Spanned<String>,
    #[serde(default)]
    pub x0: f64,
    #[serde(default)]
    pub mu: f64,
    #[serde(default)]
    pub sigma: f64,
    /// Exact lognormal stepping for `gbm` instead of Euler.
    #[serde(default)]
    pub exact: bool,
    pub drift: Option<Spanned<String>>,
    pub vol: Option<Spanned<String>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EndowmentSection {
    pub expr: Spanned<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoreSection {
    pub tag: Option<Spanned<String>>,
    pub table: Option<Spanned<String>>,
    pub class: Option<Spanned<String>>,
    #[serde(default)]
    pub radial: bool,
    pub anchor: Option<Vec<f64>>,
    #[serde(default = "default_one")]
    pub gamma: f64,
    #[serde(default = "default_one")]
    pub lambda: f64,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_one")]
    pub c: f64,
    #[serde(default)]
    pub k: f64,
    /// Offset process `h(t)` as an expression in `t`.
    #[serde(default = "default_zero_expr")]
    pub h: Spanned<String>,
    #[serde(default = "default_z_min")]
    pub z_min: f64,
    #[serde(default = "default_z_max")]
    pub z_max: f64,
    #[serde(default = "default_z_points")]
    pub z_points: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    pub steps: Spanned<usize>,
    pub paths: Spanned<usize>,
    pub seed: u64,
    #[serde(default = "default_horizon")]
    pub horizon: f64,
    #[serde(default = "default_dim")]
    pub dim: usize,
    #[serde(default = "default_degree")]
    pub degree: usize,
    pub z_clip: Option<f64>,
    #[serde(default = "yes")]
    pub y_clip: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChecksSection {
    #[serde(default)]
    pub list: Vec<Spanned<String>>,
    #[serde(default = "default_controls")]
    pub controls: usize,
    /// Second endowment for the axiom checks.
    #[serde(default = "default_eta")]
    pub eta: Spanned<String>,
    #[serde(default)]
    pub inequalities: Vec<Spanned<String>>,
    #[serde(default = "default_draws")]
    pub draws: usize,
    #[serde(default = "default_samples")]
    pub samples: usize,
    /// Constant control levels for the moment bounds.
    #[serde(default = "default_bound_controls")]
    pub bound_controls: Vec<f64>,
    #[serde(default = "default_alpha_star")]
    pub alpha_star: f64,
    #[serde(default = "default_one")]
    pub bound_mu: f64,
    #[serde(default = "default_one")]
    pub bound_eps: f64,
}

impl Default for ChecksSection {
    fn default() -> Self {
        Self {
            list: Vec::new(),
            controls: default_controls(),
            eta: default_eta(),
            inequalities: Vec::new(),
            draws: default_draws(),
            samples: default_samples(),
            bound_controls: default_bound_controls(),
            alpha_star: default_alpha_star(),
            bound_mu: 1.0,
            bound_eps: 1.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default = "default_dir")]
    pub dir: String,
    #[serde(default = "default_formats")]
    pub formats: Vec<String>,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            dir: default_dir(),
            formats: default_formats(),
        }
    }
}

/// Forward model for the state process.
#[derive(Debug, Clone)]
pub enum Model {
    Brownian { x0: f64 },
    Gbm { x0: f64, mu: f64, sigma: f64, exact: bool },
    Sde { x0: f64, drift: Expr, vol: Expr },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Check {
    Duality,
    Axioms,
    Inequalities,
    Admissibility,
}

impl Check {
    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "duality" => Check::Duality,
            "axioms" => Check::Axioms,
            "inequalities" => Check::Inequalities,
            "admissibility" => Check::Admissibility,
            _ => return None,
        })
    }
}

/// A validated scenario, ready to run.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub file: ScenarioFile,
    pub model: Model,
    pub endowment: Expr,
    pub eta: Expr,
    pub core: CoreFunction,
    pub generator: Generator,
    pub basis: BasisSpec,
    pub checks: Vec<Check>,
    pub inequalities: Vec<InequalityId>,
    pub out_dir: PathBuf,
}

impl Scenario {
    pub fn steps(&self) -> usize {
        *self.file.solver.steps.get_ref()
    }

    pub fn paths(&self) -> usize {
        *self.file.solver.paths.get_ref()
    }

    pub fn wants(&self, c: Check) -> bool {
        self.checks.contains(&c)
    }
}

fn line_of(src: &str, offset: usize) -> usize {
    src[..offset.min(src.len())].bytes().filter(|&b| b == b'\n').count() + 1
}

struct Ctx<'a> {
    path: &'a Path,
    src: &'a str,
}

impl Ctx<'_> {
    fn err(&self, span: Range<usize>, message: impl Into<String>) -> RunError {
        RunError::Config {
            path: self.path.to_path_buf(),
            line: line_of(self.src, span.start),
            message: message.into(),
        }
    }

    fn expr(&self, s: &Spanned<String>, consts: &BTreeMap<String, f64>, what: &str) -> Result<Expr, RunError> {
        Expr::parse(s.get_ref(), consts)
            .map_err(|e| self.err(s.span(), format!("{what} `{}`: {e}", s.get_ref())))
    }
}

/// Reads and validates a scenario file. Relative paths inside it are
/// resolved against the file's directory; `out_override` replaces the
/// output directory.
pub fn load_scenario(path: &Path, out_override: Option<&Path>) -> Result<Scenario, RunError> {
    let src = std::fs::read_to_string(path).map_err(|e| RunError::io(path, e))?;
    parse_scenario(&src, path, out_override)
}

pub fn parse_scenario(src: &str, path: &Path, out_override: Option<&Path>) -> Result<Scenario, RunError> {
    let ctx = Ctx { path, src };
    let file: ScenarioFile = toml::from_str(src).map_err(|e| {
        let line = e.span().map_or(1, |s| line_of(src, s.start));
        RunError::Config {
            path: path.to_path_buf(),
            line,
            message: e.message().trim().to_string(),
        }
    })?;
    let base = path.parent().unwrap_or(Path::new("."));
    let consts = &file.params;

    let s = &file.solver;
    if *s.steps.get_ref() < 1 {
        return Err(ctx.err(s.steps.span(), "steps must be at least 1"));
    }
    if *s.paths.get_ref() < 1 {
        return Err(ctx.err(s.paths.span(), "paths must be at least 1"));
    }
    let top = |msg: String| RunError::Config {
        path: path.to_path_buf(),
        line: 1,
        message: msg,
    };
    if !(s.horizon > 0.0 && s.horizon.is_finite()) {
        return Err(top(format!("solver.horizon must be positive, got {}", s.horizon)));
    }
    if s.dim < 1 {
        return Err(top("solver.dim must be at least 1".into()));
    }

    let m = &file.model;
    let model = match m.kind.get_ref().as_str() {
        "brownian" => Model::Brownian { x0: m.x0 },
        "gbm" => Model::Gbm {
            x0: if m.x0 == 0.0 { 1.0 } else { m.x0 },
            mu: m.mu,
            sigma: m.sigma,
            exact: m.exact,
        },
        "sde" => {
            fn need<'a>(ctx: &Ctx<'_>, m: &'a ModelSection, name: &str) -> Result<&'a Spanned<String>, RunError> {
                let e = if name == "drift" { &m.drift } else { &m.vol };
                e.as_ref()
                    .ok_or_else(|| ctx.err(m.kind.span(), format!("model `sde` needs `{name}`")))
            }
            Model::Sde {
                x0: m.x0,
                drift: ctx.expr(need(&ctx, m, "drift")?, consts, "drift")?,
                vol: ctx.expr(need(&ctx, m, "vol")?, consts, "vol")?,
            }
        }
        other => return Err(ctx.err(m.kind.span(), format!("unknown model kind `{other}`"))),
    };

    let endowment = ctx.expr(&file.endowment.expr, consts, "endowment")?;
    let eta = ctx.expr(&file.checks.eta, consts, "eta")?;

    let (core, generator) = build_core(&ctx, &file, base)?;

    let mut checks = Vec::new();
    for c in &file.checks.list {
        let check = Check::parse(c.get_ref())
            .ok_or_else(|| ctx.err(c.span(), format!("unknown check `{}`", c.get_ref())))?;
        if !checks.contains(&check) {
            checks.push(check);
        }
    }
    let inequalities = if file.checks.inequalities.is_empty() {
        InequalityId::POINTWISE.to_vec()
    } else {
        file.checks
            .inequalities
            .iter()
            .map(|s| {
                InequalityId::from_label(s.get_ref())
                    .ok()
                    .filter(|i| i.is_pointwise())
                    .ok_or_else(|| ctx.err(s.span(), format!("unknown pointwise inequality `{}`", s.get_ref())))
            })
            .collect::<Result<_, _>>()?
    };
    if checks.contains(&Check::Duality) && file.checks.controls == 0 {
        return Err(top("checks.controls must be at least 1".into()));
    }
    if checks.contains(&Check::Inequalities) && (file.checks.draws == 0 || file.checks.samples == 0) {
        return Err(top("checks.draws and checks.samples must be at least 1".into()));
    }
    if let Some(bad) = file.outputs.formats.iter().find(|f| f.as_str() != "csv") {
        return Err(top(format!("unsupported output format `{bad}`")));
    }

    let basis = BasisSpec {
        degree: s.degree,
        z_clip: s.z_clip,
        y_clip: s.y_clip,
    };
    let out_dir = match out_override {
        Some(p) => p.to_path_buf(),
        None => base.join(&file.outputs.dir),
    };
    Ok(Scenario {
        file,
        model,
        endowment,
        eta,
        core,
        generator,
        basis,
        checks,
        inequalities,
        out_dir,
    })
}

fn build_core(ctx: &Ctx<'_>, file: &ScenarioFile, base: &Path) -> Result<(CoreFunction, Generator), RunError> {
    let c = &file.core;
    let params = GrowthParams {
        gamma: c.gamma,
        lambda: c.lambda,
        alpha: c.alpha,
        c: c.c,
        k: c.k,
        dim: file.solver.dim,
        horizon: file.solver.horizon,
    };
    let h_expr = ctx.expr(&c.h, &file.params, "offset h")?;
    if !h_expr.is_state_free() {
        return Err(ctx.err(c.h.span(), "offset h may depend on t only"));
    }
    let h = OffsetFn::new(move |t| h_expr.eval(0.0, t));
    let anchor_span = c.tag.as_ref().or(c.table.as_ref()).map_or(0..0, |s| s.span());
    match (&c.tag, &c.table) {
        (Some(tag), None) => {
            let parsed: CatalogueTag = tag.get_ref().parse().map_err(|_| RunError::UnknownTag {
                path: ctx.path.to_path_buf(),
                line: line_of(ctx.src, tag.span().start),
                tag: tag.get_ref().clone(),
            })?;
            let built = match (&c.anchor, parsed) {
                (Some(a), CatalogueTag::LinearDirac) => build_linear_dirac(a.clone(), &params, h),
                (Some(_), _) => {
                    return Err(ctx.err(anchor_span, "`anchor` applies to linear_dirac and tables only"))
                }
                (None, t) => build_catalogue_entry(t, &params, h),
            };
            built.map_err(|e| ctx.err(tag.span(), e.to_string()))
        }
        (None, Some(table)) => {
            let class_s = c
                .class
                .as_ref()
                .ok_or_else(|| ctx.err(table.span(), "a tabulated core needs `class`"))?;
            let class: CoreClass = class_s
                .get_ref()
                .parse()
                .map_err(|_| ctx.err(class_s.span(), format!("unknown class `{}`", class_s.get_ref())))?;
            let file_path = base.join(table.get_ref());
            if !file_path.exists() {
                return Err(ctx.err(table.span(), format!("table `{}` not found", file_path.display())));
            }
            let tab = load_table(&file_path, c.radial)?;
            let q_grid = tab.axis().to_vec();
            let anchor = c.anchor.clone().unwrap_or_else(|| vec![0.0; params.dim]);
            let core = CoreFunction::tabulated(tab, h, anchor, class, params)
                .map_err(|e| ctx.err(table.span(), e.to_string()))?;
            if c.z_min.partial_cmp(&c.z_max) != Some(std::cmp::Ordering::Less) || c.z_points < 2 {
                return Err(ctx.err(table.span(), "need z_min < z_max and z_points ≥ 2"));
            }
            let lo = if core.is_radial() { c.z_min.max(0.0) } else { c.z_min };
            let z: Vec<f64> = (0..c.z_points)
                .map(|i| lo + (c.z_max - lo) * i as f64 / (c.z_points - 1) as f64)
                .collect();
            let gen = Generator::from_core_numeric(&core, &q_grid, &z).in_module("conjugate")?;
            Ok((core, gen))
        }
        (Some(tag), Some(_)) => Err(ctx.err(tag.span(), "give either `tag` or `table`, not both")),
        (None, None) => Err(RunError::Config {
            path: ctx.path.to_path_buf(),
            line: 1,
            message: "[core] needs `tag` or `table`".into(),
        }),
    }
}
