//! TOML run configuration. Unknown keys are rejected; every semantic check
//! reports the dotted path of the offending field.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;
use ttn_gibbs::entanglement::{OffsetModel, Window, CFT_WINDOW, LOW_T_WINDOW};
use ttn_gibbs::gibbs::{Magnetization, OrderPattern};
use ttn_gibbs::models::{Boundary, LatticeGeometry, LatticeKind};
use ttn_gibbs::network::Layout;

/// Bad or inconsistent configuration input.
#[derive(Debug, Error)]
#[error("config error at `{path}`: {message}")]
pub struct SchemaError {
    pub path: String,
    pub message: String,
}

fn schema(path: &str, message: impl Into<String>) -> SchemaError {
    SchemaError { path: path.into(), message: message.into() }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelBlock,
    #[serde(default)]
    pub ansatz: AnsatzBlock,
    pub thermal: Option<ThermalBlock>,
    pub tasks: TasksBlock,
    #[serde(default)]
    pub output: OutputBlock,
    #[serde(default)]
    pub spectrum: SpectrumBlock,
    #[serde(default)]
    pub fit: FitBlock,
    #[serde(default)]
    pub tmax: TmaxBlock,
    #[serde(default)]
    pub magnetization: MagnetizationBlock,
    #[serde(default)]
    pub mixture: MixtureBlock,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Tfi,
    Xy,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelBlock {
    pub kind: ModelKind,
    #[serde(default = "chain")]
    pub lattice: LatticeKind,
    #[serde(rename = "L")]
    pub l: usize,
    #[serde(rename = "J", default = "one")]
    pub j: f64,
    #[serde(default)]
    pub g: f64,
    #[serde(default = "one")]
    pub coupling: f64,
    #[serde(default = "open")]
    pub boundary: Boundary,
}

fn chain() -> LatticeKind {
    LatticeKind::Chain
}

fn open() -> Boundary {
    Boundary::Open
}

fn one() -> f64 {
    1.0
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnsatzBlock {
    #[serde(default)]
    pub layout: Layout,
    #[serde(rename = "D", default = "default_d")]
    pub d: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_sweeps")]
    pub max_sweeps: usize,
    #[serde(default = "default_energy_tol")]
    pub energy_tol: f64,
    #[serde(default = "default_solver_tol")]
    pub solver_tol: f64,
    /// Bond dimensions of a convergence study.
    #[serde(rename = "D_list", default)]
    pub d_list: Vec<usize>,
}

fn default_d() -> usize {
    16
}
fn default_seed() -> u64 {
    1
}
fn default_sweeps() -> usize {
    40
}
fn default_energy_tol() -> f64 {
    1e-9
}
fn default_solver_tol() -> f64 {
    1e-10
}

impl Default for AnsatzBlock {
    fn default() -> Self {
        Self {
            layout: Layout::Tree,
            d: default_d(),
            seed: default_seed(),
            max_sweeps: default_sweeps(),
            energy_tol: default_energy_tol(),
            solver_tol: default_solver_tol(),
            d_list: Vec::new(),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Spacing {
    #[default]
    Log,
    Linear,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThermalBlock {
    pub chi: usize,
    /// Explicit grid; overrides the range keys.
    pub temperatures: Option<Vec<f64>>,
    pub t_min: Option<f64>,
    pub t_max: Option<f64>,
    pub points: Option<usize>,
    #[serde(default)]
    pub spacing: Spacing,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Oracle,
    Ground,
    Spectrum,
    Thermal,
    Tmax,
    Magnetization,
    Negativity,
    Fit,
    Mixture,
    Convergence,
}

impl Task {
    pub fn name(self) -> &'static str {
        match self {
            Task::Oracle => "oracle",
            Task::Ground => "ground",
            Task::Spectrum => "spectrum",
            Task::Thermal => "thermal",
            Task::Tmax => "tmax",
            Task::Magnetization => "magnetization",
            Task::Negativity => "negativity",
            Task::Fit => "fit",
            Task::Mixture => "mixture",
            Task::Convergence => "convergence",
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TasksBlock {
    pub run: Vec<Task>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputBlock {
    /// Relative paths resolve against `GIBBS_OUTPUT_ROOT`, else the working directory.
    #[serde(default = "default_dir")]
    pub dir: PathBuf,
    /// Where ground and excited states are cached; `<root>/snapshots` when absent.
    pub snapshot_dir: Option<PathBuf>,
    #[serde(default = "yes")]
    pub reuse_snapshots: bool,
}

fn default_dir() -> PathBuf {
    PathBuf::from("gibbs-out")
}

fn yes() -> bool {
    true
}

impl Default for OutputBlock {
    fn default() -> Self {
        Self { dir: default_dir(), snapshot_dir: None, reuse_snapshots: true }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumBlock {
    #[serde(default = "default_levels")]
    pub levels: usize,
}

fn default_levels() -> usize {
    20
}

impl Default for SpectrumBlock {
    fn default() -> Self {
        Self { levels: default_levels() }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitBlock {
    #[serde(default = "cft_window")]
    pub cft_window: [f64; 2],
    #[serde(default = "low_window")]
    pub low_window: [f64; 2],
    #[serde(default = "half")]
    pub c_fixed: f64,
}

fn cft_window() -> [f64; 2] {
    [CFT_WINDOW.lo, CFT_WINDOW.hi]
}
fn low_window() -> [f64; 2] {
    [LOW_T_WINDOW.lo, LOW_T_WINDOW.hi]
}
fn half() -> f64 {
    0.5
}

impl Default for FitBlock {
    fn default() -> Self {
        Self { cft_window: cft_window(), low_window: low_window(), c_fixed: half() }
    }
}

impl FitBlock {
    pub fn offsets() -> [OffsetModel; 2] {
        [OffsetModel::Constant, OffsetModel::Linear]
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TmaxBlock {
    #[serde(default = "default_eps")]
    pub eps: f64,
}

fn default_eps() -> f64 {
    1e-2
}

impl Default for TmaxBlock {
    fn default() -> Self {
        Self { eps: default_eps() }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MagnetizationBlock {
    #[serde(default = "absolute")]
    pub kind: Magnetization,
    #[serde(default)]
    pub pattern: PatternChoice,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PatternChoice {
    /// Staggered for the TFI with `J > 0` on a bipartite lattice, uniform otherwise.
    #[default]
    Auto,
    Uniform,
    Staggered,
}

fn absolute() -> Magnetization {
    Magnetization::Absolute
}

impl Default for MagnetizationBlock {
    fn default() -> Self {
        Self { kind: absolute(), pattern: PatternChoice::Auto }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixtureBlock {
    /// Sizes of the exact truncated mixtures reported for comparison.
    #[serde(default = "exact_levels")]
    pub exact_levels: Vec<usize>,
}

fn exact_levels() -> Vec<usize> {
    vec![2, 6]
}

impl Default for MixtureBlock {
    fn default() -> Self {
        Self { exact_levels: exact_levels() }
    }
}

/// Reads and validates a configuration file.
pub fn load(path: &Path) -> anyhow::Result<RunConfig> {
    let text = std::fs::read_to_string(path)?;
    let cfg: RunConfig = toml::from_str(&text).map_err(|e| {
        let field = e.span().map(|s| format!("byte {}..{}", s.start, s.end)).unwrap_or_else(|| "<document>".into());
        schema(&field, e.message().to_string())
    })?;
    cfg.validate()?;
    Ok(cfg)
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), SchemaError> {
        let m = &self.model;
        if m.l < 2 {
            return Err(schema("model.L", "linear size must be at least 2"));
        }
        if !(m.j.is_finite() && m.g.is_finite() && m.coupling.is_finite()) {
            return Err(schema("model", "couplings must be finite"));
        }
        if m.kind == ModelKind::Xy && m.lattice != LatticeKind::Chain {
            return Err(schema("model.lattice", "the XY model is defined on chains"));
        }
        let a = &self.ansatz;
        if a.d == 0 {
            return Err(schema("ansatz.D", "bond dimension must be positive"));
        }
        if a.max_sweeps == 0 {
            return Err(schema("ansatz.max_sweeps", "at least one sweep is required"));
        }
        if !(a.energy_tol > 0.0) {
            return Err(schema("ansatz.energy_tol", "must be positive"));
        }
        if !(a.solver_tol > 0.0) {
            return Err(schema("ansatz.solver_tol", "must be positive"));
        }
        if a.layout == Layout::Mps && m.lattice != LatticeKind::Chain {
            return Err(schema("ansatz.layout", "the MPS layout is available for chains only"));
        }
        if self.tasks.run.is_empty() {
            return Err(schema("tasks.run", "no task requested"));
        }
        let needs_thermal = self.tasks.run.iter().any(|t| {
            matches!(
                t,
                Task::Thermal
                    | Task::Tmax
                    | Task::Magnetization
                    | Task::Negativity
                    | Task::Fit
                    | Task::Mixture
                    | Task::Convergence
            )
        });
        match &self.thermal {
            Some(t) => {
                if t.chi == 0 {
                    return Err(schema("thermal.chi", "must be positive"));
                }
                self.temperatures()?;
            }
            None if needs_thermal => return Err(schema("thermal", "block required by the requested tasks")),
            None => {}
        }
        if self.tasks.run.contains(&Task::Convergence) {
            if a.d_list.len() < 2 {
                return Err(schema("ansatz.D_list", "convergence study needs at least two bond dimensions"));
            }
            if a.d_list.contains(&0) {
                return Err(schema("ansatz.D_list", "bond dimensions must be positive"));
            }
        }
        if self.spectrum.levels == 0 {
            return Err(schema("spectrum.levels", "must be positive"));
        }
        for (name, w) in [("fit.cft_window", self.fit.cft_window), ("fit.low_window", self.fit.low_window)] {
            Window::new(w[0], w[1]).map_err(|e| schema(name, e.to_string()))?;
        }
        if !self.fit.c_fixed.is_finite() {
            return Err(schema("fit.c_fixed", "must be finite"));
        }
        if !(self.tmax.eps > 0.0) {
            return Err(schema("tmax.eps", "must be positive"));
        }
        if self.order_pattern().is_none() {
            return Err(schema("magnetization.pattern", "staggered order needs a bipartite lattice (even L when periodic)"));
        }
        if self.mixture.exact_levels.contains(&0) {
            return Err(schema("mixture.exact_levels", "level counts must be positive"));
        }
        Ok(())
    }

    /// The ascending temperature grid of the thermal block.
    pub fn temperatures(&self) -> Result<Vec<f64>, SchemaError> {
        let t = self.thermal.as_ref().ok_or_else(|| schema("thermal", "block missing"))?;
        let grid = match &t.temperatures {
            Some(list) => list.clone(),
            None => {
                let (lo, hi, n) = match (t.t_min, t.t_max, t.points) {
                    (Some(lo), Some(hi), Some(n)) => (lo, hi, n),
                    _ => {
                        return Err(schema(
                            "thermal",
                            "give either `temperatures` or all of `t_min`, `t_max`, `points`",
                        ))
                    }
                };
                if n < 2 || !(lo < hi) || !(lo >= 0.0) || !hi.is_finite() {
                    return Err(schema("thermal.t_min", "range needs 0 ≤ t_min < t_max and points ≥ 2"));
                }
                match t.spacing {
                    Spacing::Linear => (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect(),
                    Spacing::Log => {
                        if lo == 0.0 {
                            return Err(schema("thermal.t_min", "log spacing needs t_min > 0"));
                        }
                        let (a, b) = (lo.ln(), hi.ln());
                        (0..n).map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp()).collect()
                    }
                }
            }
        };
        ttn_gibbs::gibbs::validate_temperatures(&grid).map_err(|e| schema("thermal.temperatures", e.to_string()))?;
        Ok(grid)
    }

    /// The resolved order pattern; `None` when it does not fit the lattice.
    pub fn order_pattern(&self) -> Option<OrderPattern> {
        let m = &self.model;
        let bipartite = LatticeGeometry::new(m.lattice, m.l, m.boundary).is_ok_and(|g| g.neel_sign(0).is_some());
        let pattern = match self.magnetization.pattern {
            PatternChoice::Uniform => OrderPattern::Uniform,
            PatternChoice::Staggered => OrderPattern::Staggered,
            PatternChoice::Auto if m.kind == ModelKind::Tfi && bipartite => OrderPattern::for_coupling(m.j),
            PatternChoice::Auto => OrderPattern::Uniform,
        };
        (pattern == OrderPattern::Uniform || bipartite || !self.tasks.run.contains(&Task::Magnetization)).then_some(pattern)
    }

    pub fn chi(&self) -> usize {
        self.thermal.as_ref().map_or(1, |t| t.chi)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(s: &str) -> Result<RunConfig, SchemaError> {
        let cfg: RunConfig = toml::from_str(s).map_err(|e| schema("?", e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    #[test]
    fn minimal_config_gets_defaults() {
        let cfg = parse("[model]\nkind = \"tfi\"\nL = 8\ng = 1.0\n[tasks]\nrun = [\"oracle\"]\n").unwrap();
        assert_eq!(cfg.ansatz.d, 16);
        assert_eq!(cfg.model.boundary, Boundary::Open);
        assert_eq!(cfg.tmax.eps, 1e-2);
    }

    #[test]
    fn thermal_tasks_require_the_thermal_block() {
        let err = parse("[model]\nkind = \"tfi\"\nL = 8\n[tasks]\nrun = [\"thermal\"]\n").unwrap_err();
        assert_eq!(err.path, "thermal");
    }

    #[test]
    fn log_grid_is_ascending_and_hits_the_ends() {
        let cfg = parse(
            "[model]\nkind = \"tfi\"\nL = 8\n[thermal]\nchi = 4\nt_min = 0.01\nt_max = 1.0\npoints = 5\n[tasks]\nrun = [\"thermal\"]\n",
        )
        .unwrap();
        let t = cfg.temperatures().unwrap();
        assert_eq!(t.len(), 5);
        assert!((t[0] - 0.01).abs() < 1e-15 && (t[4] - 1.0).abs() < 1e-15);
        assert!((t[2] - 0.1).abs() < 1e-12);
    }

    #[test]
    fn descending_grid_and_unknown_keys_are_rejected() {
        let err = parse(
            "[model]\nkind = \"tfi\"\nL = 8\n[thermal]\nchi = 4\ntemperatures = [0.2, 0.1]\n[tasks]\nrun = [\"thermal\"]\n",
        )
        .unwrap_err();
        assert_eq!(err.path, "thermal.temperatures");
        assert!(parse("[model]\nkind = \"tfi\"\nL = 8\nh = 1\n[tasks]\nrun = [\"oracle\"]\n").is_err());
    }

    #[test]
    fn order_pattern_follows_the_coupling_sign() {
        let base = "[thermal]\nchi = 4\nt_min = 0.1\nt_max = 1.0\npoints = 3\n[tasks]\nrun = [\"magnetization\"]\n";
        let cfg = parse(&format!("[model]\nkind = \"tfi\"\nL = 8\n{base}")).unwrap();
        assert_eq!(cfg.order_pattern(), Some(OrderPattern::Staggered));
        let cfg = parse(&format!("[model]\nkind = \"tfi\"\nL = 8\nJ = -1.0\n{base}")).unwrap();
        assert_eq!(cfg.order_pattern(), Some(OrderPattern::Uniform));
        let odd = "[model]\nkind = \"tfi\"\nL = 5\nboundary = \"periodic\"\n";
        assert_eq!(parse(&format!("{odd}{base}")).unwrap().order_pattern(), Some(OrderPattern::Uniform));
        let err = parse(&format!("{odd}[magnetization]\npattern = \"staggered\"\n{base}")).unwrap_err();
        assert_eq!(err.path, "magnetization.pattern");
    }
}
