//! Diagnostics: Monte Carlo discounted returns, RMSE against a reference
//! table, and state visitation histograms.

use rand::seq::index::sample;

use crate::benchmark::{GridQTable, GridSpec};
use crate::env::{behavior_action, ActionSpace, Environment};
use crate::error::{Error, Result};
use crate::kernel::Action;
use crate::learner::{ContinuousArgmax, QModel};
use crate::rng::{indexed_rng, SimRng};

/// A (possibly randomized) stationary policy.
pub trait Policy {
    fn act(&self, state: &[f64], rng: &mut SimRng) -> Result<Action>;
}

/// Greedy with respect to a frozen model.
#[derive(Debug, Clone)]
pub struct GreedyPolicy<'a> {
    pub model: &'a QModel,
    pub gamma: f64,
    pub argmax: ContinuousArgmax,
}

impl<'a> GreedyPolicy<'a> {
    pub fn new(model: &'a QModel, gamma: f64) -> Self {
        Self {
            model,
            gamma,
            argmax: ContinuousArgmax::default(),
        }
    }
}

impl Policy for GreedyPolicy<'_> {
    fn act(&self, state: &[f64], rng: &mut SimRng) -> Result<Action> {
        Ok(self.model.greedy(state, self.gamma, &self.argmax, rng)?.0)
    }
}

#[derive(Debug, Clone)]
pub struct UniformPolicy<'a>(pub &'a ActionSpace);

impl Policy for UniformPolicy<'_> {
    fn act(&self, _state: &[f64], rng: &mut SimRng) -> Result<Action> {
        Ok(behavior_action(self.0, rng))
    }
}

/// Always plays the same action.
#[derive(Debug, Clone)]
pub struct ConstantPolicy(pub Action);

impl Policy for ConstantPolicy {
    fn act(&self, _state: &[f64], _rng: &mut SimRng) -> Result<Action> {
        Ok(self.0.clone())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub mean: f64,
    /// Sample standard deviation over `sqrt(episodes)`; zero for one episode.
    pub stderr: f64,
    /// Fraction of simulated rewards that were clamped.
    pub clip_rate: f64,
    pub episodes: usize,
    pub horizon: usize,
}

/// Discounted return `sum_{t<horizon} gamma^t R_{t+1}` from the initial
/// state, averaged over `episodes`. Episode `j` uses `indexed_rng(base_seed, j)`.
pub fn mc_return<E, P>(
    policy: &P,
    env: &E,
    gamma: f64,
    episodes: usize,
    horizon: usize,
    base_seed: u64,
) -> Result<McEstimate>
where
    E: Environment + ?Sized,
    P: Policy + ?Sized,
{
    if episodes == 0 || horizon == 0 {
        return Err(Error::usage("episodes and horizon must be at least 1"));
    }
    let mut returns = Vec::with_capacity(episodes);
    let mut clipped = 0usize;
    for j in 0..episodes {
        let mut rng = indexed_rng(base_seed, j as u64);
        let mut state = env.initial_state();
        let (mut v, mut discount) = (0.0, 1.0);
        for _ in 0..horizon {
            let action = policy.act(&state, &mut rng)?;
            let out = env.step(&state, &action, &mut rng)?;
            v += discount * out.reward;
            discount *= gamma;
            clipped += out.clipped as usize;
            state = out.next_state;
        }
        returns.push(v);
    }
    let n = episodes as f64;
    let mean = returns.iter().sum::<f64>() / n;
    let stderr = if episodes > 1 {
        let var = returns.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        (var / n).sqrt()
    } else {
        0.0
    };
    Ok(McEstimate {
        mean,
        stderr,
        clip_rate: clipped as f64 / (n * horizon as f64),
        episodes,
        horizon,
    })
}

/// `(state, action index)` probe.
pub type Probe = (Vec<f64>, usize);

/// Every cell centre paired with every action, state-major.
pub fn default_probes(grid: &GridSpec, n_actions: usize) -> Vec<Probe> {
    grid.cell_centers()
        .into_iter()
        .flat_map(|x| (0..n_actions).map(move |a| (x.clone(), a)))
        .collect()
}

/// `k` probes chosen uniformly without replacement, in their original order.
pub fn subsample_probes(probes: &[Probe], k: usize, rng: &mut SimRng) -> Vec<Probe> {
    if k >= probes.len() {
        return probes.to_vec();
    }
    let mut idx = sample(rng, probes.len(), k).into_vec();
    idx.sort_unstable();
    idx.into_iter().map(|i| probes[i].clone()).collect()
}

/// Root mean squared difference between the model and the table on `probes`.
pub fn rmse_on_grid(model: &QModel, reference: &GridQTable, probes: &[Probe]) -> Result<f64> {
    if probes.is_empty() {
        return Err(Error::usage("probe set is empty"));
    }
    if model.action_space().count() != Some(reference.n_actions) {
        return Err(Error::usage("model and reference table disagree on the action set"));
    }
    let mut q = Vec::new();
    let mut cached: Option<&[f64]> = None;
    let mut sum = 0.0;
    for (state, a) in probes {
        let reference_value = reference.value(state, *a)?;
        if cached != Some(state.as_slice()) {
            model.q_all_actions(state, &mut q)?;
            cached = Some(state);
        }
        sum += (q[*a] - reference_value).powi(2);
    }
    Ok((sum / probes.len() as f64).sqrt())
}

/// Visit counts over a uniform 2-D grid, row index from the first coordinate.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub grid: GridSpec,
    /// Row-major counts, `counts[i * bins_y + j]`.
    pub counts: Vec<u64>,
}

impl Histogram {
    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Fraction of cells with at least one visit.
    pub fn coverage(&self) -> f64 {
        self.counts.iter().filter(|c| **c > 0).count() as f64 / self.counts.len() as f64
    }

    pub fn rows(&self) -> impl Iterator<Item = &[u64]> {
        self.counts.chunks_exact(self.grid.cells[1])
    }
}

pub fn visitation_histogram(states: &[Vec<f64>], lo: &[f64], hi: &[f64], bins: usize) -> Result<Histogram> {
    if bins == 0 {
        return Err(Error::usage("bins must be at least 1"));
    }
    if lo.len() != 2 {
        return Err(Error::usage("visitation histograms are two-dimensional"));
    }
    let grid = GridSpec::new(lo.to_vec(), hi.to_vec(), vec![bins; 2])?;
    let mut counts = vec![0; grid.n_cells()];
    for s in states {
        counts[grid.cell_of(s)?] += 1;
    }
    Ok(Histogram { grid, counts })
}

/// Share of states whose every coordinate exceeds `threshold`; zero when empty.
pub fn quadrant_share(states: &[Vec<f64>], threshold: f64) -> f64 {
    if states.is_empty() {
        return 0.0;
    }
    let hits = states.iter().filter(|s| s.iter().all(|x| *x > threshold)).count();
    hits as f64 / states.len() as f64
}

/// One evaluation checkpoint.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub iteration: u64,
    pub mc_return_mean: f64,
    pub mc_return_stderr: f64,
    /// Absent when no reference table was supplied.
    pub rmse_vs_reference: Option<f64>,
    pub clip_rate: f64,
    pub episodes: usize,
    pub horizon: usize,
}
