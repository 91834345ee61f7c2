//! Run configuration: one TOML file per experiment with an explicit schema
//! version. Unknown keys are rejected.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::env::{DiscreteTestMDP, Environment, InventoryEnv, InventoryParams, LineTrackingEnv};
use crate::error::{Error, Result};
use crate::kernel::ActionMode;
use crate::learner::{ContinuousArgmax, Evaluation, LearnerConfig, StepSchedule};
use crate::rng::SeedTree;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    pub environment: EnvironmentConfig,
    pub kernel: KernelSection,
    pub learner: LearnerSection,
    pub checkpoints: CheckpointSection,
    pub evaluation: EvaluationSection,
    pub dp: DpSection,
    pub diagnostics: DiagnosticsSection,
    pub xi: XiSection,
    pub seeds: SeedSection,
    pub output: OutputSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EnvironmentConfig {
    /// Two-item inventory started from empty stock.
    Inventory(InventoryParams),
    DiscreteTest(DiscreteTestConfig),
    LineTracking,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind", deny_unknown_fields)]
pub enum DiscreteTestConfig {
    Canonical,
    /// Random chain drawn from `SimRng::seed_from_u64(seed)`.
    Random { n_states: usize, n_actions: usize, seed: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelSection {
    pub sigma: f64,
    pub mode: ActionMode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LearnerSection {
    pub gamma: f64,
    pub iterations: u64,
    #[serde(default)]
    pub alpha: StepSchedule,
    #[serde(default)]
    pub evaluation: Evaluation,
    #[serde(default)]
    pub argmax: ContinuousArgmax,
    /// Fill the `step_seconds` column. Off by default because wall-clock
    /// times make metric files differ between identical runs.
    #[serde(default)]
    pub record_timing: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind", deny_unknown_fields)]
pub enum CheckpointSchedule {
    /// `first, first * factor, first * factor^2, ...`
    Geometric { first: u64, factor: f64 },
    Explicit { at: Vec<u64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckpointSection {
    pub schedule: CheckpointSchedule,
    /// Write learner checkpoint files (in addition to evaluating).
    pub save_state: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvaluationSection {
    pub enabled: bool,
    pub episodes: usize,
    pub horizon: usize,
    /// Also evaluate the uniform policy once and report it in the summary.
    #[serde(default)]
    pub uniform_baseline: bool,
    /// Reference table for the RMSE column.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<PathBuf>,
    /// Solve the DP of the `dp` section in-process when no reference file is given.
    #[serde(default)]
    pub compute_reference: bool,
    /// Keep only this many probes (cell centres x actions), chosen once.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probe_subsample: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DpSection {
    pub cells_per_axis: usize,
    pub demand_samples: usize,
    pub tol: f64,
    pub max_sweeps: usize,
    /// Overrides `learner.gamma`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiagnosticsSection {
    pub steps: usize,
    pub bins: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum XiSample {
    /// Uniform points on the unit square, one action.
    UniformSquare,
    /// State-action points of a behavior trajectory of the configured environment.
    Trajectory,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct XiSection {
    pub sample: XiSample,
    pub samples: usize,
    pub alpha: f64,
    pub probes_per_axis: usize,
    pub sigmas: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeedSection {
    pub master: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub dir: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    PaperBaseline,
    PaperSmall,
}

impl std::str::FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "paper_baseline" => Ok(Preset::PaperBaseline),
            "paper_small" => Ok(Preset::PaperSmall),
            _ => Err(Error::config(format!("unknown preset `{s}` (paper_baseline, paper_small)"))),
        }
    }
}

impl RunConfig {
    /// Full-scale inventory experiment.
    pub fn paper_baseline() -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            environment: EnvironmentConfig::Inventory(InventoryParams::paper()),
            kernel: KernelSection {
                sigma: 1.0,
                mode: ActionMode::ContinuousBox,
            },
            learner: LearnerSection {
                gamma: 0.7,
                iterations: 30_000,
                alpha: StepSchedule::default(),
                evaluation: Evaluation::Factored,
                argmax: ContinuousArgmax::default(),
                record_timing: false,
            },
            checkpoints: CheckpointSection {
                schedule: CheckpointSchedule::Geometric { first: 100, factor: 2.0 },
                save_state: true,
            },
            evaluation: EvaluationSection {
                enabled: true,
                episodes: 256,
                horizon: 200,
                uniform_baseline: true,
                reference: None,
                compute_reference: true,
                probe_subsample: None,
            },
            dp: DpSection {
                cells_per_axis: 25,
                demand_samples: 10_000,
                tol: 1e-10,
                max_sweeps: 1000,
                gamma: None,
            },
            diagnostics: DiagnosticsSection {
                steps: 100_000,
                bins: 50,
            },
            xi: XiSection {
                sample: XiSample::UniformSquare,
                samples: 10_000,
                alpha: 1.0,
                probes_per_axis: 21,
                sigmas: vec![0.2, 0.1, 0.05],
            },
            seeds: SeedSection { master: 0 },
            output: OutputSection {
                dir: PathBuf::from("runs/paper_baseline"),
            },
        }
    }

    /// Desk-scale variant: 20 actions, 5000 iterations, 15 x 15 DP grid.
    pub fn paper_small() -> Self {
        let mut c = Self::paper_baseline();
        c.environment = EnvironmentConfig::Inventory(InventoryParams::small());
        c.learner.iterations = 5000;
        c.checkpoints.schedule = CheckpointSchedule::Explicit {
            at: vec![100, 250, 500, 1000, 2500, 5000],
        };
        c.evaluation.episodes = 64;
        c.dp.cells_per_axis = 15;
        c.output.dir = PathBuf::from("runs/paper_small");
        c
    }

    pub fn preset(p: Preset) -> Self {
        match p {
            Preset::PaperBaseline => Self::paper_baseline(),
            Preset::PaperSmall => Self::paper_small(),
        }
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        let c: Self = toml::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml_str(&fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Format(e.to_string()))
    }

    pub fn seeds(&self) -> SeedTree {
        SeedTree::new(self.seeds.master)
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::config(format!(
                "schema_version: expected {SCHEMA_VERSION}, got {}",
                self.schema_version
            )));
        }
        if let EnvironmentConfig::Inventory(p) = &self.environment {
            p.validate().map_err(|e| Error::config(format!("environment.inventory: {e}")))?;
        }
        if let EnvironmentConfig::DiscreteTest(DiscreteTestConfig::Random { n_states, n_actions, .. }) =
            &self.environment
        {
            if *n_states == 0 || *n_actions == 0 {
                return Err(Error::config("environment.discrete-test: n_states and n_actions must be positive"));
            }
        }
        if !(self.kernel.sigma.is_finite() && self.kernel.sigma > 0.0) {
            return Err(Error::config(format!("kernel.sigma must be positive, got {}", self.kernel.sigma)));
        }
        self.learner_config()
            .validate()
            .map_err(|e| Error::config(format!("learner: {e}")))?;
        match &self.checkpoints.schedule {
            CheckpointSchedule::Geometric { first, factor } => {
                if *first == 0 || !(*factor > 1.0) {
                    return Err(Error::config("checkpoints.schedule: need first >= 1 and factor > 1"));
                }
            }
            CheckpointSchedule::Explicit { at } => {
                if at.windows(2).any(|w| w[0] >= w[1]) || at.first() == Some(&0) {
                    return Err(Error::config("checkpoints.schedule.at must be strictly increasing and positive"));
                }
            }
        }
        if self.evaluation.episodes == 0 || self.evaluation.horizon == 0 {
            return Err(Error::config("evaluation.episodes and evaluation.horizon must be at least 1"));
        }
        if self.evaluation.probe_subsample == Some(0) {
            return Err(Error::config("evaluation.probe_subsample must be positive"));
        }
        if self.dp.cells_per_axis == 0 || self.dp.demand_samples == 0 || self.dp.max_sweeps == 0 {
            return Err(Error::config("dp: cells_per_axis, demand_samples and max_sweeps must be positive"));
        }
        if !(self.dp.tol > 0.0) {
            return Err(Error::config("dp.tol must be positive"));
        }
        if let Some(g) = self.dp.gamma {
            if !(0.0..1.0).contains(&g) {
                return Err(Error::config("dp.gamma must lie in [0, 1)"));
            }
        }
        if self.diagnostics.bins == 0 {
            return Err(Error::config("diagnostics.bins must be positive"));
        }
        let xi = &self.xi;
        if xi.samples == 0 || xi.probes_per_axis == 0 {
            return Err(Error::config("xi.samples and xi.probes_per_axis must be positive"));
        }
        if !(xi.alpha > 0.0 && xi.alpha <= 1.0) {
            return Err(Error::config("xi.alpha must lie in (0, 1]"));
        }
        if xi.sigmas.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
            return Err(Error::config("xi.sigmas must be positive"));
        }
        Ok(())
    }

    pub fn learner_config(&self) -> LearnerConfig {
        LearnerConfig {
            alpha: self.learner.alpha,
            evaluation: self.learner.evaluation,
            argmax: self.learner.argmax,
            ..LearnerConfig::new(self.learner.gamma)
        }
    }

    /// Iterations `1..=iterations` at which to evaluate or checkpoint; the
    /// final iteration is always included.
    pub fn checkpoint_iterations(&self) -> Vec<u64> {
        let n = self.learner.iterations;
        let mut out: Vec<u64> = match &self.checkpoints.schedule {
            CheckpointSchedule::Geometric { first, factor } => {
                let mut v = Vec::new();
                let mut x = *first as f64;
                while x <= n as f64 {
                    let k = x.round() as u64;
                    if v.last() != Some(&k) {
                        v.push(k);
                    }
                    x *= factor;
                }
                v
            }
            CheckpointSchedule::Explicit { at } => at.iter().copied().filter(|k| *k <= n).collect(),
        };
        if n > 0 && out.last() != Some(&n) {
            out.push(n);
        }
        out
    }

    pub fn build_environment(&self) -> Result<Box<dyn Environment>> {
        Ok(match &self.environment {
            EnvironmentConfig::Inventory(p) => Box::new(InventoryEnv::new(p.clone())?),
            EnvironmentConfig::DiscreteTest(DiscreteTestConfig::Canonical) => Box::new(DiscreteTestMDP::canonical()),
            EnvironmentConfig::DiscreteTest(DiscreteTestConfig::Random { n_states, n_actions, seed }) => {
                use rand::SeedableRng;
                let mut rng = crate::rng::SimRng::seed_from_u64(*seed);
                Box::new(DiscreteTestMDP::random(*n_states, *n_actions, &mut rng))
            }
            EnvironmentConfig::LineTracking => Box::new(LineTrackingEnv::default()),
        })
    }

    pub fn inventory_params(&self) -> Result<&InventoryParams> {
        match &self.environment {
            EnvironmentConfig::Inventory(p) => Ok(p),
            _ => Err(Error::config("this command needs an inventory environment")),
        }
    }

    pub fn dp_gamma(&self) -> f64 {
        self.dp.gamma.unwrap_or(self.learner.gamma)
    }
}
