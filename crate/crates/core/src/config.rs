//! Run configuration: a sectioned `key = value` text file (TOML syntax).
//!
//! Every key is optional. Defaults:
//!
//! ```toml
//! [grid]
//! dim = 1            # 1 or 2
//! nodes = 129        # nodes per axis
//! length = 1.0       # box side
//!
//! [time]
//! t_end = 0.05
//! steps = 50
//!
//! [model]
//! mu = 1.0
//! lambda = 1.0
//! nu = 1.0
//! sigma = 1.0        # inf disables the Ginzburg-Landau penalty
//! delta = 1e-3       # in [0, 1)
//! m = [0.0, 0.0, 1.0]
//! pressure_a = 1.0
//! pressure_gamma = 1.4
//!
//! [initial]
//! kind = "equilibrium"   # equilibrium | scaled-bumps | snapshot | manufactured
//! alpha = 1.0            # equilibrium, scaled-bumps
//! # theta = 0.05         # scaled-bumps
//! # rho = "rho.txt"      # snapshot: rho, u, d and optionally g
//! # case = "smooth-1d"   # manufactured
//!
//! [picard]
//! psi_tol = 1e-10
//! max_sweeps = 50
//! divergence_patience = 3
//! solver_tol = 1e-12
//! # solver_max_iterations = 10000
//!
//! [experiment]
//! kind = "simulate"      # simulate | mms | picard-report | continuity | smalldata
//!                        # | compat-roundtrip | delta-sweep
//! scales = [1e-2, 1e-3, 1e-4, 0.0]
//! growth_cap = 10.0
//! delta_count = 4
//! compat_nodes = [33, 65, 129]
//!
//! [output]
//! # dir = "out"          # default: $NEMATIC_OUTPUT_ROOT/<experiment>, else ./nematic-out/<experiment>
//! snapshot_times = []
//! ```

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::constitutive::{ModelParams, PressureLaw};
use crate::error::{Error, Result};
use crate::field::{snapshot, GridSpec, TimeGrid, MIN_NODES};
use crate::parabolic::SolverConfig;
use crate::picard::PicardConfig;

/// Manufactured initial-data cases selectable by id.
pub const MANUFACTURED_CASES: [&str; 1] = ["smooth-1d"];

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub grid: GridSection,
    #[serde(default)]
    pub time: TimeSection,
    #[serde(default)]
    pub model: ModelSection,
    #[serde(default)]
    pub initial: InitialSelector,
    #[serde(default)]
    pub picard: PicardSection,
    #[serde(default)]
    pub experiment: ExperimentSection,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSection {
    pub dim: usize,
    pub nodes: usize,
    pub length: f64,
}

impl Default for GridSection {
    fn default() -> Self {
        GridSection {
            dim: 1,
            nodes: 129,
            length: 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TimeSection {
    pub t_end: f64,
    pub steps: usize,
}

impl Default for TimeSection {
    fn default() -> Self {
        TimeSection { t_end: 0.05, steps: 50 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelSection {
    pub mu: f64,
    pub lambda: f64,
    pub nu: f64,
    pub sigma: f64,
    pub delta: f64,
    pub m: [f64; 3],
    pub pressure_a: f64,
    pub pressure_gamma: f64,
}

impl Default for ModelSection {
    fn default() -> Self {
        let p = ModelParams::default();
        ModelSection {
            mu: p.mu,
            lambda: p.lambda,
            nu: p.nu,
            sigma: p.sigma,
            delta: p.delta,
            m: p.m,
            pressure_a: p.pressure.a,
            pressure_gamma: p.pressure.gamma,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum InitialSelector {
    Equilibrium {
        #[serde(default = "one")]
        alpha: f64,
    },
    ScaledBumps {
        theta: f64,
        #[serde(default = "one")]
        alpha: f64,
    },
    Snapshot {
        rho: PathBuf,
        u: PathBuf,
        d: PathBuf,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        g: Option<PathBuf>,
    },
    Manufactured {
        case: String,
    },
}

fn one() -> f64 {
    1.0
}

impl Default for InitialSelector {
    fn default() -> Self {
        InitialSelector::Equilibrium { alpha: 1.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PicardSection {
    pub psi_tol: f64,
    pub max_sweeps: usize,
    pub divergence_patience: usize,
    pub solver_tol: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub solver_max_iterations: Option<usize>,
}

impl Default for PicardSection {
    fn default() -> Self {
        PicardSection {
            psi_tol: 1e-10,
            max_sweeps: 50,
            divergence_patience: 3,
            solver_tol: 1e-12,
            solver_max_iterations: None,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    #[default]
    Simulate,
    Mms,
    PicardReport,
    Continuity,
    Smalldata,
    CompatRoundtrip,
    DeltaSweep,
}

impl Experiment {
    pub const ALL: [Experiment; 7] = [
        Experiment::Simulate,
        Experiment::Mms,
        Experiment::PicardReport,
        Experiment::Continuity,
        Experiment::Smalldata,
        Experiment::CompatRoundtrip,
        Experiment::DeltaSweep,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Experiment::Simulate => "simulate",
            Experiment::Mms => "mms",
            Experiment::PicardReport => "picard-report",
            Experiment::Continuity => "continuity",
            Experiment::Smalldata => "smalldata",
            Experiment::CompatRoundtrip => "compat-roundtrip",
            Experiment::DeltaSweep => "delta-sweep",
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentSection {
    pub kind: Experiment,
    /// Perturbation sizes of the continuity experiment.
    pub scales: Vec<f64>,
    pub growth_cap: f64,
    pub delta_count: usize,
    pub compat_nodes: Vec<usize>,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        ExperimentSection {
            kind: Experiment::Simulate,
            scales: vec![1e-2, 1e-3, 1e-4, 0.0],
            growth_cap: crate::diagnostics::GROWTH_CAP,
            delta_count: 4,
            compat_nodes: vec![33, 65, 129],
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
    pub snapshot_times: Vec<f64>,
}

fn invalid(key: &str, constraint: impl Into<String>) -> Error {
    Error::Validation {
        key: key.to_string(),
        constraint: constraint.into(),
    }
}

fn positive(key: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(invalid(key, format!("must be positive and finite, got {v}")))
    }
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

fn parse_error(text: &str, e: toml::de::Error) -> Error {
    Error::Parse {
        line: e.span().map_or(0, |s| line_of(text, s.start)),
        message: e.message().trim().to_string(),
    }
}

impl RunConfig {
    pub fn grid(&self) -> Result<GridSpec> {
        let g = &self.grid;
        let extent = vec![g.length; g.dim];
        let nodes = vec![g.nodes; g.dim];
        GridSpec::new(g.dim, &extent, &nodes)
    }

    pub fn time_grid(&self) -> Result<TimeGrid> {
        TimeGrid::new(self.time.t_end, self.time.steps)
    }

    pub fn model_params(&self) -> Result<ModelParams> {
        let m = &self.model;
        Ok(ModelParams {
            mu: m.mu,
            lambda: m.lambda,
            nu: m.nu,
            sigma: m.sigma,
            delta: m.delta,
            m: m.m,
            pressure: PressureLaw::new(m.pressure_a, m.pressure_gamma)?,
        })
    }

    pub fn solver(&self) -> SolverConfig {
        SolverConfig {
            rel_tol: self.picard.solver_tol,
            max_iterations: self.picard.solver_max_iterations,
            ..SolverConfig::default()
        }
    }

    pub fn picard_config(&self) -> Result<PicardConfig> {
        Ok(PicardConfig {
            time: self.time_grid()?,
            psi_tol: self.picard.psi_tol,
            max_sweeps: self.picard.max_sweeps,
            divergence_patience: self.picard.divergence_patience,
            solver: self.solver(),
        })
    }

    /// Time levels at which snapshots are written, deduplicated and sorted.
    pub fn snapshot_levels(&self) -> Vec<usize> {
        let dt = self.time.t_end / self.time.steps as f64;
        let mut levels: Vec<usize> = self
            .output
            .snapshot_times
            .iter()
            .map(|t| ((t / dt).round() as usize).min(self.time.steps))
            .collect();
        levels.sort_unstable();
        levels.dedup();
        levels
    }

    /// Checks every numeric parameter against its owning type and that referenced
    /// snapshot files exist and parse. Errors name the offending `section.key`.
    pub fn validate(&self) -> Result<()> {
        let g = &self.grid;
        if g.dim != 1 && g.dim != 2 {
            return Err(invalid("grid.dim", format!("must be 1 or 2, got {}", g.dim)));
        }
        if g.nodes < MIN_NODES {
            return Err(invalid("grid.nodes", format!("must be at least {MIN_NODES}, got {}", g.nodes)));
        }
        positive("grid.length", g.length)?;
        positive("time.t_end", self.time.t_end)?;
        if self.time.steps == 0 {
            return Err(invalid("time.steps", "must be at least 1"));
        }
        self.model_params()
            .and_then(|p| p.validate().map(|_| p))
            .map_err(|e| match e {
                Error::Parameter { name, reason } => invalid(&format!("model.{name}"), reason),
                other => other,
            })?;
        self.validate_initial()?;
        let p = &self.picard;
        positive("picard.psi_tol", p.psi_tol)?;
        if p.max_sweeps == 0 {
            return Err(invalid("picard.max_sweeps", "must be at least 1"));
        }
        if p.divergence_patience == 0 {
            return Err(invalid("picard.divergence_patience", "must be at least 1"));
        }
        if !(p.solver_tol > 0.0 && p.solver_tol < 1.0) {
            return Err(invalid("picard.solver_tol", format!("must lie in (0, 1), got {}", p.solver_tol)));
        }
        if p.solver_max_iterations == Some(0) {
            return Err(invalid("picard.solver_max_iterations", "must be at least 1"));
        }
        self.validate_experiment()?;
        for &t in &self.output.snapshot_times {
            if !(t >= 0.0 && t <= self.time.t_end) {
                return Err(invalid(
                    "output.snapshot_times",
                    format!("{t} lies outside [0, {}]", self.time.t_end),
                ));
            }
        }
        Ok(())
    }

    fn validate_initial(&self) -> Result<()> {
        match &self.initial {
            InitialSelector::Equilibrium { alpha } => {
                if !(alpha.is_finite() && *alpha >= 0.0) {
                    return Err(invalid("initial.alpha", format!("must be nonnegative, got {alpha}")));
                }
            }
            InitialSelector::ScaledBumps { theta, alpha } => {
                if !(0.0..1.0).contains(theta) {
                    return Err(invalid("initial.theta", format!("must lie in [0, 1), got {theta}")));
                }
                if !(alpha.is_finite() && *alpha >= 0.0) {
                    return Err(invalid("initial.alpha", format!("must be nonnegative, got {alpha}")));
                }
            }
            InitialSelector::Snapshot { rho, u, d, g } => {
                let grid = self.grid()?;
                let dim = self.grid.dim;
                let files = [("initial.rho", Some(rho), 1), ("initial.u", Some(u), dim), ("initial.d", Some(d), 3), ("initial.g", g.as_ref(), dim)];
                for (key, path, ncomp) in files {
                    let Some(path) = path else { continue };
                    let (field, _) = snapshot::read(path).map_err(|e| invalid(key, format!("{}: {e}", path.display())))?;
                    if *field.grid() != grid || field.ncomp() != ncomp {
                        return Err(invalid(
                            key,
                            format!("{} does not match the configured grid with {ncomp} components", path.display()),
                        ));
                    }
                }
            }
            InitialSelector::Manufactured { case } => {
                if !MANUFACTURED_CASES.contains(&case.as_str()) {
                    return Err(invalid("initial.case", format!("unknown case {case:?}, expected one of {MANUFACTURED_CASES:?}")));
                }
                if self.grid.dim != 1 || self.grid.length != 1.0 {
                    return Err(invalid("initial.case", format!("{case} requires dim = 1 and length = 1")));
                }
            }
        }
        Ok(())
    }

    fn validate_experiment(&self) -> Result<()> {
        let e = &self.experiment;
        if e.scales.iter().any(|s| !(s.is_finite() && *s >= 0.0)) {
            return Err(invalid("experiment.scales", "entries must be finite and nonnegative"));
        }
        if e.kind == Experiment::Continuity && e.scales.iter().filter(|s| **s > 0.0).count() < 2 {
            return Err(invalid("experiment.scales", "need at least two positive scales"));
        }
        if !(e.growth_cap.is_finite() && e.growth_cap >= 1.0) {
            return Err(invalid("experiment.growth_cap", format!("must be at least 1, got {}", e.growth_cap)));
        }
        if e.delta_count == 0 {
            return Err(invalid("experiment.delta_count", "must be at least 1"));
        }
        if e.compat_nodes.len() < 2 || e.compat_nodes.iter().any(|&n| n < MIN_NODES) {
            return Err(invalid(
                "experiment.compat_nodes",
                format!("need at least two resolutions of at least {MIN_NODES} nodes"),
            ));
        }
        if e.kind == Experiment::Smalldata && !matches!(self.initial, InitialSelector::ScaledBumps { .. }) {
            return Err(invalid("initial.kind", "smalldata requires scaled-bumps initial data"));
        }
        Ok(())
    }

    /// Renders the configuration in the same grammar [`parse_config`] reads.
    pub fn serialize(&self) -> String {
        toml::to_string(self).expect("configuration is always representable")
    }
}

/// Parses without validating. Syntax errors and unknown keys carry a line number.
pub fn parse_unvalidated(text: &str) -> Result<RunConfig> {
    toml::from_str(text).map_err(|e| parse_error(text, e))
}

/// Parses and fully validates a configuration.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let cfg = parse_unvalidated(text)?;
    cfg.validate()?;
    Ok(cfg)
}

/// Parses `text`, applies `section.key=value` overrides in order, then validates.
/// Override values use the same value syntax as the file; anything that does not
/// parse as a value is taken as a bare string.
pub fn parse_with_overrides(text: &str, overrides: &[String]) -> Result<RunConfig> {
    let cfg = parse_unvalidated(text)?;
    if overrides.is_empty() {
        cfg.validate()?;
        return Ok(cfg);
    }
    let mut table: toml::Table = toml::from_str(text).map_err(|e| parse_error(text, e))?;
    for ov in overrides {
        let (key, value) = ov
            .split_once('=')
            .ok_or_else(|| invalid(ov, "override must have the form section.key=value"))?;
        let key = key.trim();
        let (section, name) = key
            .split_once('.')
            .ok_or_else(|| invalid(key, "override key must have the form section.key"))?;
        let value = value.trim();
        let parsed = toml::from_str::<toml::Table>(&format!("v = {value}"))
            .ok()
            .and_then(|mut t| t.remove("v"))
            .unwrap_or_else(|| toml::Value::String(value.to_string()));
        let entry = table
            .entry(section.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        match entry {
            toml::Value::Table(t) => {
                t.insert(name.to_string(), parsed);
            }
            _ => return Err(invalid(key, format!("`{section}` is not a section"))),
        }
    }
    let cfg: RunConfig = table
        .try_into()
        .map_err(|e: toml::de::Error| invalid("override", e.message().trim().to_string()))?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn load(path: &Path, overrides: &[String]) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)?;
    parse_with_overrides(&text, overrides)
}
