//! Experiment commands. Each reads a validated [`RunConfig`], writes its
//! artifacts below an output directory and returns a summary.
//!
//! Every random number comes from a named stream of the master seed, so the
//! metric files are a function of the configuration alone.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use log::info;
use rand::Rng;
use serde::Serialize;

use crate::benchmark::{dp_value_iteration, estimate_xi, GridQTable, GridSpec};
use crate::checkpoint::{load_checkpoint, load_table, save_checkpoint, save_table};
use crate::config::{RunConfig, XiSample};
use crate::env::{behavior_action, behavior_transition, Environment, InventoryEnv};
use crate::error::{Error, Result};
use crate::eval::{
    default_probes, mc_return, quadrant_share, rmse_on_grid, subsample_probes, visitation_histogram, EvalReport,
    GreedyPolicy, Probe, UniformPolicy,
};
use crate::kernel::{lattice, product_grid, Action, ActionMode, KernelConfig, StateActionPoint};
use crate::learner::{LearnerState, QModel};
use crate::report::{write_diagnostics, write_histogram, write_xi, EvalWriter, ScenarioRow, TdWriter, XiRow};
use crate::rng::streams;

pub const TD_FILE: &str = "td.csv";
pub const EVAL_FILE: &str = "eval.csv";
pub const SUMMARY_FILE: &str = "summary.json";
pub const CHECKPOINT_DIR: &str = "checkpoints";
pub const DP_TABLE_FILE: &str = "dp_table.qgrd";
pub const DP_META_FILE: &str = "dp_meta.json";
pub const DIAGNOSTICS_FILE: &str = "diagnostics.csv";
pub const XI_FILE: &str = "xi.csv";

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    Ok(BufWriter::new(File::create(path)?))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Format(e.to_string()))?;
    fs::write(path, text + "\n")?;
    Ok(())
}

pub fn checkpoint_path(out: &Path, iteration: u64) -> PathBuf {
    out.join(CHECKPOINT_DIR).join(format!("ckpt_{iteration:09}.qmck"))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ReturnSummary {
    pub mean: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrainSummary {
    pub iterations: u64,
    pub checkpoints: Vec<u64>,
    /// Fraction of training rewards that were clamped.
    pub training_clip_rate: f64,
    pub final_total_variation: f64,
    pub uniform_return: Option<ReturnSummary>,
    pub reference_residual: Option<f64>,
    #[serde(skip)]
    pub reports: Vec<EvalReport>,
}

/// Everything needed to evaluate snapshots of one run.
struct Evaluator<'a> {
    config: &'a RunConfig,
    env: &'a dyn Environment,
    reference: Option<(GridQTable, Vec<Probe>)>,
    base_seed: u64,
}

impl<'a> Evaluator<'a> {
    fn new(config: &'a RunConfig, env: &'a dyn Environment, out: &Path) -> Result<Self> {
        let seeds = config.seeds();
        let ev = &config.evaluation;
        let table = match (&ev.reference, ev.compute_reference) {
            (Some(path), _) => Some(load_table(path)?),
            (None, true) if config.inventory_params().is_ok() => {
                let table = solve_dp(config)?;
                save_table(&out.join(DP_TABLE_FILE), &table)?;
                Some(table)
            }
            _ => None,
        };
        let reference = table.map(|t| {
            let mut probes = default_probes(&t.grid, t.n_actions);
            if let Some(k) = ev.probe_subsample {
                probes = subsample_probes(&probes, k, &mut seeds.stream(streams::PROBE_SUBSAMPLE));
            }
            (t, probes)
        });
        Ok(Self {
            config,
            env,
            reference,
            base_seed: seeds.stream_u64(streams::EVAL),
        })
    }

    fn evaluate(&self, model: &QModel, iteration: u64) -> Result<EvalReport> {
        let ev = &self.config.evaluation;
        let mut policy = GreedyPolicy::new(model, self.config.learner.gamma);
        policy.argmax = self.config.learner.argmax;
        let est = mc_return(&policy, self.env, self.config.learner.gamma, ev.episodes, ev.horizon, self.base_seed)?;
        let rmse = match &self.reference {
            Some((table, probes)) => Some(rmse_on_grid(model, table, probes)?),
            None => None,
        };
        Ok(EvalReport {
            iteration,
            mc_return_mean: est.mean,
            mc_return_stderr: est.stderr,
            rmse_vs_reference: rmse,
            clip_rate: est.clip_rate,
            episodes: est.episodes,
            horizon: est.horizon,
        })
    }

    fn uniform_return(&self) -> Result<ReturnSummary> {
        let ev = &self.config.evaluation;
        let base = self.config.seeds().stream_u64(streams::EVAL_UNIFORM);
        let policy = UniformPolicy(self.env.action_space());
        let est = mc_return(&policy, self.env, self.config.learner.gamma, ev.episodes, ev.horizon, base)?;
        Ok(ReturnSummary {
            mean: est.mean,
            stderr: est.stderr,
        })
    }
}

fn kernel_for(config: &RunConfig, env: &dyn Environment) -> Result<KernelConfig> {
    env.kernel_config(config.kernel.sigma, config.kernel.mode)
}

/// Trains on one behavior trajectory, writing `td.csv`, checkpoints and
/// (when enabled) `eval.csv`.
pub fn cmd_train(config: &RunConfig, out: &Path) -> Result<TrainSummary> {
    config.validate()?;
    fs::create_dir_all(out)?;
    let env = config.build_environment()?;
    let seeds = config.seeds();
    let mut traj_rng = seeds.stream(streams::TRAJECTORY);
    let kernel = kernel_for(config, env.as_ref())?;

    let mut state = env.initial_state();
    let mut action = behavior_action(env.action_space(), &mut traj_rng);
    let mut learner = LearnerState::new(
        kernel,
        env.action_space().clone(),
        config.learner_config(),
        &state,
        &action,
        seeds.stream(streams::CONTINUOUS_ARGMAX),
    )?;

    let mut td = TdWriter::new(create(&out.join(TD_FILE))?, config.learner.record_timing)?;
    let evaluator = if config.evaluation.enabled {
        Some(Evaluator::new(config, env.as_ref(), out)?)
    } else {
        None
    };
    let mut eval_csv = match &evaluator {
        Some(_) => Some(EvalWriter::new(create(&out.join(EVAL_FILE))?)?),
        None => None,
    };

    let checkpoints = config.checkpoint_iterations();
    let mut next_ckpt = checkpoints.iter().peekable();
    let mut reports = Vec::new();
    let mut clipped = 0u64;
    for n in 1..=config.learner.iterations {
        let t = behavior_transition(env.as_ref(), &state, &action, &mut traj_rng)?;
        clipped += t.clipped as u64;
        let rec = learner.train_step(&t)?;
        td.write(&rec)?;
        state = t.next_state;
        action = t.next_action;

        if next_ckpt.peek() == Some(&&n) {
            next_ckpt.next();
            if config.checkpoints.save_state {
                let path = checkpoint_path(out, n);
                fs::create_dir_all(path.parent().expect("checkpoint dir"))?;
                save_checkpoint(&path, &learner, Some(&traj_rng))?;
            }
            if let (Some(ev), Some(w)) = (&evaluator, eval_csv.as_mut()) {
                let report = ev.evaluate(learner.model(), n)?;
                info!(
                    "n={n}: return {:.4} +/- {:.4}, rmse {:?}",
                    report.mc_return_mean, report.mc_return_stderr, report.rmse_vs_reference
                );
                w.write(&report)?;
                reports.push(report);
            }
        }
    }
    td.flush()?;

    let uniform_return = match &evaluator {
        Some(ev) if config.evaluation.uniform_baseline => Some(ev.uniform_return()?),
        _ => None,
    };
    let summary = TrainSummary {
        iterations: config.learner.iterations,
        checkpoints,
        training_clip_rate: if config.learner.iterations > 0 {
            clipped as f64 / config.learner.iterations as f64
        } else {
            0.0
        },
        final_total_variation: learner.total_variation(),
        uniform_return,
        reference_residual: evaluator.as_ref().and_then(|e| e.reference.as_ref()).map(|(t, _)| t.residual),
        reports,
    };
    write_json(&out.join(SUMMARY_FILE), &summary)?;
    Ok(summary)
}

fn dp_grid(config: &RunConfig) -> Result<GridSpec> {
    let p = config.inventory_params()?;
    GridSpec::square(p.i_max, 2, config.dp.cells_per_axis)
}

fn solve_dp(config: &RunConfig) -> Result<GridQTable> {
    let params = config.inventory_params()?;
    let seeds = config.seeds();
    let mut rng = seeds.stream(streams::DP_DEMAND);
    let mut table = dp_value_iteration(
        params,
        &dp_grid(config)?,
        config.dp.demand_samples,
        config.dp_gamma(),
        config.dp.tol,
        config.dp.max_sweeps,
        &mut rng,
    )?;
    table.seed = seeds.master();
    info!(
        "value iteration: {} sweeps, residual {:e}, converged {}",
        table.sweeps, table.residual, table.converged
    );
    Ok(table)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DpMeta {
    pub cells_per_axis: usize,
    pub n_actions: usize,
    pub gamma: f64,
    pub residual: f64,
    pub sweeps: usize,
    pub converged: bool,
    pub demand_samples: usize,
    pub master_seed: u64,
    pub demand_stream: &'static str,
}

/// Solves the grid DP for the configured inventory and writes the table
/// plus a metadata record.
pub fn cmd_dp_baseline(config: &RunConfig, out: &Path) -> Result<GridQTable> {
    config.validate()?;
    fs::create_dir_all(out)?;
    let table = solve_dp(config)?;
    save_table(&out.join(DP_TABLE_FILE), &table)?;
    write_json(
        &out.join(DP_META_FILE),
        &DpMeta {
            cells_per_axis: config.dp.cells_per_axis,
            n_actions: table.n_actions,
            gamma: table.gamma,
            residual: table.residual,
            sweeps: table.sweeps,
            converged: table.converged,
            demand_samples: table.demand_samples,
            master_seed: table.seed,
            demand_stream: streams::DP_DEMAND,
        },
    )?;
    Ok(table)
}

/// Evaluates saved checkpoints (all of `<out>/checkpoints` when `paths` is
/// empty) and writes `eval.csv`.
pub fn cmd_evaluate(config: &RunConfig, paths: &[PathBuf], out: &Path) -> Result<Vec<EvalReport>> {
    config.validate()?;
    let mut paths = paths.to_vec();
    if paths.is_empty() {
        let dir = out.join(CHECKPOINT_DIR);
        for entry in fs::read_dir(&dir)? {
            let p = entry?.path();
            if p.extension().is_some_and(|e| e == "qmck") {
                paths.push(p);
            }
        }
        paths.sort();
    }
    if paths.is_empty() {
        return Err(Error::usage("no checkpoints to evaluate"));
    }
    let env = config.build_environment()?;
    let evaluator = Evaluator::new(config, env.as_ref(), out)?;
    let mut w = EvalWriter::new(create(&out.join(EVAL_FILE))?)?;
    let mut reports = Vec::new();
    for p in &paths {
        let (learner, _) = load_checkpoint(p)?;
        let report = evaluator.evaluate(learner.model(), learner.iteration())?;
        w.write(&report)?;
        reports.push(report);
    }
    Ok(reports)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticsSummary {
    pub rows: Vec<ScenarioRow>,
}

/// Behavior-policy rollout; returns visited states `X_1..X_steps` and the
/// number of clamped rewards.
pub fn behavior_rollout(
    env: &dyn Environment,
    steps: usize,
    rng: &mut crate::rng::SimRng,
) -> Result<(Vec<Vec<f64>>, usize)> {
    let mut states = Vec::with_capacity(steps);
    let mut clipped = 0;
    let mut x = env.initial_state();
    let mut a = behavior_action(env.action_space(), rng);
    for _ in 0..steps {
        let t = behavior_transition(env, &x, &a, rng)?;
        clipped += t.clipped as usize;
        states.push(t.next_state.clone());
        x = t.next_state;
        a = t.next_action;
    }
    Ok((states, clipped))
}

/// Visitation histograms of the behavior chain under the configured and the
/// shifted demand, plus a summary table.
pub fn cmd_diagnostics(config: &RunConfig, out: &Path) -> Result<DiagnosticsSummary> {
    config.validate()?;
    fs::create_dir_all(out)?;
    let params = config.inventory_params()?;
    let seeds = config.seeds();
    let steps = config.diagnostics.steps;
    let scenarios = [
        ("baseline", params.clone(), streams::DIAGNOSTICS_BASELINE),
        ("shifted", params.shifted_demand(), streams::DIAGNOSTICS_SHIFTED),
    ];
    let mut rows = Vec::new();
    for (name, p, stream) in scenarios {
        let env = InventoryEnv::new(p)?;
        let (states, clipped) = behavior_rollout(&env, steps, &mut seeds.stream(stream))?;
        let (lo, hi) = env.state_bounds();
        let h = visitation_histogram(&states, lo, hi, config.diagnostics.bins)?;
        write_histogram(create(&out.join(format!("histogram_{name}.csv")))?, &h)?;
        let row = ScenarioRow {
            scenario: name.to_string(),
            steps,
            coverage: h.coverage(),
            top_right_share: quadrant_share(&states, env.params().i_max / 2.0),
            clip_rate: if steps > 0 { clipped as f64 / steps as f64 } else { 0.0 },
        };
        info!("{name}: coverage {:.4}, top-right share {:.5}", row.coverage, row.top_right_share);
        rows.push(row);
    }
    write_diagnostics(create(&out.join(DIAGNOSTICS_FILE))?, &rows)?;
    Ok(DiagnosticsSummary { rows })
}

/// The frozen sample, probe grid and base kernel of a bandwidth sweep.
pub fn xi_setup(config: &RunConfig) -> Result<(KernelConfig, Vec<StateActionPoint>, Vec<StateActionPoint>)> {
    let xi = &config.xi;
    let mut rng = config.seeds().stream(streams::XI_SAMPLE);
    match xi.sample {
        XiSample::UniformSquare => {
            let kernel = KernelConfig::new(1.0, ActionMode::FiniteActions, 2, 1, 3f64.sqrt())?;
            let samples = (0..xi.samples)
                .map(|_| StateActionPoint::indexed(vec![rng.random::<f64>(), rng.random::<f64>()], 0))
                .collect();
            let probes = product_grid(&lattice(&[0.0, 0.0], &[1.0, 1.0], xi.probes_per_axis), &[Action::Index(0)]);
            Ok((kernel, samples, probes))
        }
        XiSample::Trajectory => {
            let env = config.build_environment()?;
            let kernel = kernel_for(config, env.as_ref())?;
            let mode = kernel.action_mode();
            let space = env.action_space().clone();
            let actions = space.kernel_actions(mode)?;
            let mut samples = Vec::with_capacity(xi.samples);
            let mut x = env.initial_state();
            let mut a = behavior_action(&space, &mut rng);
            for _ in 0..xi.samples {
                samples.push(StateActionPoint::new(x.clone(), space.kernel_action(&a, mode)?));
                let t = behavior_transition(env.as_ref(), &x, &a, &mut rng)?;
                x = t.next_state;
                a = t.next_action;
            }
            let (lo, hi) = env.state_bounds();
            let probes = product_grid(&lattice(lo, hi, xi.probes_per_axis), &actions);
            Ok((kernel, samples, probes))
        }
    }
}

/// `xi(sigma)` for each bandwidth over one frozen sample; writes `xi.csv`.
pub fn cmd_xi_sweep(config: &RunConfig, sigmas: &[f64], out: &Path) -> Result<Vec<XiRow>> {
    config.validate()?;
    if sigmas.is_empty() {
        return Err(Error::usage("sigma list is empty"));
    }
    if sigmas.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
        return Err(Error::usage("every sigma must be positive"));
    }
    fs::create_dir_all(out)?;
    let (kernel, samples, probes) = xi_setup(config)?;
    let alpha = config.xi.alpha;
    let rows = sigmas
        .iter()
        .map(|&sigma| {
            let xi = estimate_xi(&kernel.with_sigma(sigma)?, &samples, alpha, &probes)?;
            info!("sigma {sigma}: xi {xi:.6}");
            Ok(XiRow {
                sigma,
                xi,
                xi_over_sigma_alpha: xi / sigma.powf(alpha),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    write_xi(create(&out.join(XI_FILE))?, &rows)?;
    Ok(rows)
}
