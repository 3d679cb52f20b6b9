use crate::CliError;
use optswitch::localbasis::{Basis, PartitionMode};
use optswitch::pathgen::RngKey;
use optswitch::power::PowerConfig;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

/// Environment variable consulted for the RNG key when the config has none.
pub const RNG_KEY_ENV: &str = "OPTSWITCH_RNG_KEY";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProblemKind {
    Power,
    BrownianTest,
    OuTest,
}

impl ProblemKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::Power => "power",
            Self::BrownianTest => "brownian-test",
            Self::OuTest => "ou-test",
        }
    }
}

/// Either a checkpoint count or `"auto"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Checkpoints {
    Count(usize),
    Keyword(String),
}

impl Default for Checkpoints {
    fn default() -> Self {
        Self::Keyword("auto".into())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    /// Years.
    pub horizon: f64,
    pub steps: Option<usize>,
    /// Years; `steps · step_size` must equal `horizon`.
    pub step_size: Option<f64>,
    /// Steps between decision dates; every step when absent.
    pub decision_every: Option<usize>,
    #[serde(default)]
    pub checkpoints: Checkpoints,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum LocalizationKind {
    None,
    #[default]
    Empirical,
    /// Closed-form box around the initial state; toy problems only.
    Brownian,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSection {
    pub paths: usize,
    pub cells: usize,
    pub partition: PartitionMode,
    pub basis: Basis,
    pub localization: LocalizationKind,
    pub epsilon: f64,
    /// Regressions are clamped to `±truncation_factor · max|target|`.
    pub truncation_factor: f64,
}

impl Default for SolverSection {
    fn default() -> Self {
        Self {
            paths: 5000,
            cells: 64,
            partition: PartitionMode::Adaptive,
            basis: Basis::Constant,
            localization: LocalizationKind::Empirical,
            epsilon: 0.01,
            truncation_factor: 2.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulationSection {
    pub paths: usize,
    pub start_regime: usize,
}

impl Default for SimulationSection {
    fn default() -> Self {
        Self {
            paths: 2000,
            start_regime: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub dir: PathBuf,
    pub density_tables: bool,
    pub strategy_tables: bool,
    pub audit_tables: bool,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
            density_tables: true,
            strategy_tables: true,
            audit_tables: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OracleSection {
    pub nodes: usize,
    pub quadrature: usize,
}

impl Default for OracleSection {
    fn default() -> Self {
        Self {
            nodes: 21,
            quadrature: 64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub problem: ProblemKind,
    #[serde(default)]
    pub rng_key: Option<RngKey>,
    pub grid: GridSection,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub simulation: SimulationSection,
    #[serde(default)]
    pub output: OutputSection,
    #[serde(default)]
    pub oracle: OracleSection,
    pub power: Option<PowerConfig>,
}

fn invalid(path: &str, message: impl Into<String>) -> CliError {
    CliError::Config {
        path: path.into(),
        message: message.into(),
    }
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, CliError> {
        let de = toml::Deserializer::parse(text).map_err(|e| invalid("", e.to_string()))?;
        let cfg: Self = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            invalid(
                if path == "." { "" } else { &path },
                e.into_inner().to_string(),
            )
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        Self::from_toml_str(&text)
    }

    /// Number of time steps, from `steps` or `horizon / step_size`.
    pub fn steps(&self) -> usize {
        let g = &self.grid;
        g.steps
            .unwrap_or_else(|| (g.horizon / g.step_size.unwrap_or(g.horizon)).round() as usize)
    }

    pub fn step_size(&self) -> f64 {
        self.grid.horizon / self.steps() as f64
    }

    /// The configured key, else the environment default, else the built-in
    /// default key.
    pub fn resolve_key(&self) -> Result<RngKey, CliError> {
        if let Some(k) = self.rng_key {
            return Ok(k);
        }
        match std::env::var(RNG_KEY_ENV) {
            Ok(s) if !s.trim().is_empty() => s
                .parse()
                .map_err(|e: optswitch::pathgen::PathError| invalid(RNG_KEY_ENV, e.to_string())),
            _ => Ok(RngKey::default()),
        }
    }

    pub fn power_config(&self) -> PowerConfig {
        self.power.clone().unwrap_or_default()
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let g = &self.grid;
        if !(g.horizon > 0.0 && g.horizon.is_finite()) {
            return Err(invalid("grid.horizon", "must be positive and finite"));
        }
        match (g.steps, g.step_size) {
            (None, None) => return Err(invalid("grid", "set `steps` or `step_size`")),
            (Some(0), _) => return Err(invalid("grid.steps", "must be at least 1")),
            (_, Some(h)) if !(h > 0.0 && h.is_finite()) => {
                return Err(invalid("grid.step_size", "must be positive and finite"))
            }
            (Some(n), Some(h)) if ((h * n as f64 - g.horizon) / g.horizon).abs() > 1e-9 => {
                return Err(invalid(
                    "grid.step_size",
                    format!(
                        "steps · step_size = {} differs from horizon {}",
                        h * n as f64,
                        g.horizon
                    ),
                ))
            }
            (None, Some(h)) => {
                let n = (g.horizon / h).round();
                if n < 1.0 || ((h * n - g.horizon) / g.horizon).abs() > 1e-9 {
                    return Err(invalid(
                        "grid.step_size",
                        format!("horizon {} is not a multiple of {h}", g.horizon),
                    ));
                }
            }
            _ => {}
        }
        if g.decision_every == Some(0) {
            return Err(invalid("grid.decision_every", "must be at least 1"));
        }
        if let Checkpoints::Keyword(k) = &g.checkpoints {
            if k != "auto" {
                return Err(invalid(
                    "grid.checkpoints",
                    format!("expected a count or \"auto\", got {k:?}"),
                ));
            }
        }
        let s = &self.solver;
        if s.cells == 0 {
            return Err(invalid("solver.cells", "must be at least 1"));
        }
        if s.paths < s.cells {
            return Err(invalid(
                "solver.paths",
                format!("M = {} is below K = {}", s.paths, s.cells),
            ));
        }
        if !(s.epsilon > 0.0 && s.epsilon < 1.0) && s.localization != LocalizationKind::None {
            return Err(invalid("solver.epsilon", "must lie in (0, 1)"));
        }
        if !(s.truncation_factor >= 1.0 && s.truncation_factor.is_finite()) {
            return Err(invalid(
                "solver.truncation_factor",
                "must be finite and at least 1",
            ));
        }
        if self.problem == ProblemKind::Power && s.localization == LocalizationKind::Brownian {
            return Err(invalid(
                "solver.localization",
                "the Brownian box is only defined for the toy problems",
            ));
        }
        if self.simulation.paths == 0 {
            return Err(invalid("simulation.paths", "must be at least 1"));
        }
        if self.power.is_some() && self.problem != ProblemKind::Power {
            return Err(invalid(
                "power",
                format!("not used by problem {}", self.problem.name()),
            ));
        }
        if self.problem == ProblemKind::Power {
            self.power_config().validate().map_err(|e| match e {
                optswitch::power::PowerError::Config { path, message } => {
                    invalid(&format!("power.{path}"), message)
                }
                other => invalid("power", other.to_string()),
            })?;
        }
        Ok(())
    }
}
