//! Controlled Markov chains: the environment trait, the uniform behavior
//! policy, the two-item lost-sales inventory model and small test MDPs.

use nalgebra::{DMatrix, DVector, Matrix2};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{box_diagonal, Action, ActionMode, KernelConfig};
use crate::rng::SimRng;

/// Actions available to an environment. Finite actions are addressed by
/// index; each also carries a real embedding used by the continuous-box kernel.
#[derive(Debug, Clone, PartialEq)]
pub enum ActionSpace {
    Finite(Vec<Vec<f64>>),
    Box { lo: Vec<f64>, hi: Vec<f64> },
}

impl ActionSpace {
    pub fn is_finite(&self) -> bool {
        matches!(self, ActionSpace::Finite(_))
    }

    /// Number of finite actions; `None` for a box.
    pub fn count(&self) -> Option<usize> {
        match self {
            ActionSpace::Finite(v) => Some(v.len()),
            ActionSpace::Box { .. } => None,
        }
    }

    pub fn embedding_dim(&self) -> usize {
        match self {
            ActionSpace::Finite(v) => v.first().map_or(0, Vec::len),
            ActionSpace::Box { lo, .. } => lo.len(),
        }
    }

    /// Converts an environment action into the action part of a kernel point.
    pub fn kernel_action(&self, action: &Action, mode: ActionMode) -> Result<Action> {
        match (self, action, mode) {
            (ActionSpace::Finite(v), Action::Index(i), _) if *i >= v.len() => {
                Err(Error::usage(format!("action index {i} out of range (|A| = {})", v.len())))
            }
            (ActionSpace::Finite(_), Action::Index(i), ActionMode::FiniteActions) => Ok(Action::Index(*i)),
            (ActionSpace::Finite(v), Action::Index(i), ActionMode::ContinuousBox) => {
                Ok(Action::Vector(v[*i].clone()))
            }
            (ActionSpace::Box { .. }, Action::Vector(a), ActionMode::ContinuousBox) => {
                Ok(Action::Vector(a.clone()))
            }
            _ => Err(Error::config("action does not match the action space / kernel mode")),
        }
    }

    /// Kernel-side actions for every finite action, in index order.
    pub fn kernel_actions(&self, mode: ActionMode) -> Result<Vec<Action>> {
        match self {
            ActionSpace::Finite(v) => (0..v.len())
                .map(|i| self.kernel_action(&Action::Index(i), mode))
                .collect(),
            ActionSpace::Box { .. } => Err(Error::config("continuous action space has no finite action list")),
        }
    }

    /// Bounding box of the action embeddings.
    pub fn bounds(&self) -> (Vec<f64>, Vec<f64>) {
        match self {
            ActionSpace::Box { lo, hi } => (lo.clone(), hi.clone()),
            ActionSpace::Finite(v) => {
                let d = self.embedding_dim();
                let mut lo = vec![f64::INFINITY; d];
                let mut hi = vec![f64::NEG_INFINITY; d];
                for a in v {
                    for k in 0..d {
                        lo[k] = lo[k].min(a[k]);
                        hi[k] = hi[k].max(a[k]);
                    }
                }
                (lo, hi)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub reward: f64,
    pub next_state: Vec<f64>,
    /// Reward had to be clamped into [-1, 1].
    pub clipped: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub reward: f64,
    pub next_state: Vec<f64>,
    pub next_action: Action,
    pub clipped: bool,
}

pub trait Environment {
    /// Lower and upper corners of the state box.
    fn state_bounds(&self) -> (&[f64], &[f64]);

    fn action_space(&self) -> &ActionSpace;

    fn initial_state(&self) -> Vec<f64>;

    fn step(&self, state: &[f64], action: &Action, rng: &mut SimRng) -> Result<Outcome>;

    fn state_dim(&self) -> usize {
        self.state_bounds().0.len()
    }

    /// Kernel whose lower bound is exact for this environment's domain.
    fn kernel_config(&self, sigma: f64, mode: ActionMode) -> Result<KernelConfig> {
        let (lo, hi) = self.state_bounds();
        let state_diag = box_diagonal(lo, hi);
        let space = self.action_space();
        let (diameter, action_dim) = match (mode, space) {
            (ActionMode::FiniteActions, ActionSpace::Finite(_)) => ((state_diag * state_diag + 1.0).sqrt(), 1),
            (ActionMode::FiniteActions, ActionSpace::Box { .. }) => {
                return Err(Error::config("finite-action kernel requires a finite action space"))
            }
            (ActionMode::ContinuousBox, _) => {
                let (alo, ahi) = space.bounds();
                let action_diag = box_diagonal(&alo, &ahi);
                ((state_diag * state_diag + action_diag * action_diag).sqrt(), space.embedding_dim())
            }
        };
        KernelConfig::new(sigma, mode, lo.len(), action_dim, diameter)
    }
}

/// Uniform draw from `{0, .., n_actions - 1}`.
pub fn uniform_behavior_policy(n_actions: usize, rng: &mut SimRng) -> usize {
    assert!(n_actions > 0, "behavior policy needs at least one action");
    rng.random_range(0..n_actions)
}

/// Uniform behavior action for any action space.
pub fn behavior_action(space: &ActionSpace, rng: &mut SimRng) -> Action {
    match space {
        ActionSpace::Finite(v) => Action::Index(uniform_behavior_policy(v.len(), rng)),
        ActionSpace::Box { lo, hi } => Action::Vector(
            lo.iter()
                .zip(hi)
                .map(|(&l, &h)| if h > l { rng.random_range(l..=h) } else { l })
                .collect(),
        ),
    }
}

/// One step of the behavior chain: environment transition then a fresh behavior action.
pub fn behavior_transition<E: Environment + ?Sized>(
    env: &E,
    state: &[f64],
    action: &Action,
    rng: &mut SimRng,
) -> Result<Transition> {
    let out = env.step(state, action, rng)?;
    let next_action = behavior_action(env.action_space(), rng);
    Ok(Transition {
        reward: out.reward,
        next_state: out.next_state,
        next_action,
        clipped: out.clipped,
    })
}

/// Reward `-cost / c_max` clamped into [-1, 1].
pub fn normalized_reward(cost: f64, c_max: f64) -> (f64, bool) {
    let r = -cost / c_max;
    (r.clamp(-1.0, 1.0), !(-1.0..=1.0).contains(&r))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InventoryParams {
    pub i_max: f64,
    pub a_max: [usize; 2],
    pub order_cost: [f64; 2],
    pub holding_cost: [f64; 2],
    pub lostsale_cost: [f64; 2],
    pub fixed_cost: f64,
    pub demand_mean: [f64; 2],
    pub demand_cov: [[f64; 2]; 2],
    pub c_max: f64,
}

/// Cost normalizer for the full action set, `A = {0..10} x {0..8}`: 0.999
/// quantile of 10^5 pilot costs from the `demand-pilot` stream of master seed 0.
pub const PAPER_C_MAX: f64 = 9.18125415815593;
/// Same pilot for the reduced action set `{0..4} x {0..3}`.
pub const SMALL_C_MAX: f64 = 11.423145236951104;

impl InventoryParams {
    /// The two-item instance of the inventory experiment.
    pub fn paper() -> Self {
        Self {
            i_max: 15.0,
            a_max: [10, 8],
            order_cost: [0.3, 0.35],
            holding_cost: [0.05, 0.04],
            lostsale_cost: [0.8, 0.9],
            fixed_cost: 0.2,
            demand_mean: [5.0, 4.0],
            demand_cov: [[3.0, -0.21], [-0.21, 1.0]],
            c_max: PAPER_C_MAX,
        }
    }

    /// Desk-scale variant with `a_max = (4, 3)`.
    pub fn small() -> Self {
        Self {
            a_max: [4, 3],
            c_max: SMALL_C_MAX,
            ..Self::paper()
        }
    }

    /// Higher demand `G' ~ N((8, 7), Sigma)`, everything else unchanged.
    pub fn shifted_demand(&self) -> Self {
        Self {
            demand_mean: [8.0, 7.0],
            ..self.clone()
        }
    }

    pub fn n_actions(&self) -> usize {
        (self.a_max[0] + 1) * (self.a_max[1] + 1)
    }

    pub fn action_pair(&self, index: usize) -> (usize, usize) {
        let w = self.a_max[1] + 1;
        (index / w, index % w)
    }

    pub fn action_index(&self, a1: usize, a2: usize) -> usize {
        a1 * (self.a_max[1] + 1) + a2
    }

    fn cholesky(&self) -> Result<Matrix2<f64>> {
        let [[a, b], [c, d]] = self.demand_cov;
        if b != c {
            return Err(Error::config("demand_cov must be symmetric"));
        }
        Matrix2::new(a, b, c, d)
            .cholesky()
            .map(|ch| ch.l())
            .ok_or_else(|| Error::config("demand_cov must be positive definite"))
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.i_max.is_finite() && self.i_max > 0.0) {
            return Err(Error::config("i_max must be positive"));
        }
        if !(self.c_max.is_finite() && self.c_max > 0.0) {
            return Err(Error::config(format!("c_max must be positive, got {}", self.c_max)));
        }
        let costs = self.order_cost.iter().chain(&self.holding_cost).chain(&self.lostsale_cost);
        if costs.chain([&self.fixed_cost]).any(|c| !(c.is_finite() && *c >= 0.0)) {
            return Err(Error::config("cost coefficients must be nonnegative"));
        }
        self.cholesky().map(|_| ())
    }
}

/// Two-item lost-sales inventory with capacity `i_max` per item.
#[derive(Debug, Clone)]
pub struct InventoryEnv {
    params: InventoryParams,
    chol: Matrix2<f64>,
    actions: ActionSpace,
    lo: [f64; 2],
    hi: [f64; 2],
}

impl InventoryEnv {
    pub fn new(params: InventoryParams) -> Result<Self> {
        params.validate()?;
        Self::unchecked(params)
    }

    /// Skips the `c_max` check; used by the pilot that estimates it.
    fn unchecked(params: InventoryParams) -> Result<Self> {
        let chol = params.cholesky()?;
        let actions = ActionSpace::Finite(
            (0..params.n_actions())
                .map(|i| {
                    let (a1, a2) = params.action_pair(i);
                    vec![a1 as f64, a2 as f64]
                })
                .collect(),
        );
        let hi = [params.i_max; 2];
        Ok(Self {
            params,
            chol,
            actions,
            lo: [0.0; 2],
            hi,
        })
    }

    pub fn params(&self) -> &InventoryParams {
        &self.params
    }

    /// `D = |G|`, `G ~ N(mean, Sigma)` via the Cholesky factor.
    pub fn sample_demand(&self, rng: &mut SimRng) -> [f64; 2] {
        let z1: f64 = rng.sample(StandardNormal);
        let z2: f64 = rng.sample(StandardNormal);
        let l = &self.chol;
        let g1 = self.params.demand_mean[0] + l[(0, 0)] * z1;
        let g2 = self.params.demand_mean[1] + l[(1, 0)] * z1 + l[(1, 1)] * z2;
        [g1.abs(), g2.abs()]
    }

    /// Next state and one-step cost for an explicit demand.
    pub fn transition_with_demand(&self, state: &[f64], action: (usize, usize), demand: [f64; 2]) -> ([f64; 2], f64) {
        let p = &self.params;
        let a = [action.0 as f64, action.1 as f64];
        let mut next = [0.0; 2];
        let mut cost = if action.0 + action.1 > 0 { p.fixed_cost } else { 0.0 };
        for i in 0..2 {
            let stock = state[i] + a[i];
            next[i] = (stock - demand[i]).max(0.0).min(p.i_max);
            let lost = (demand[i] - stock).max(0.0);
            cost += p.order_cost[i] * a[i] + p.holding_cost[i] * next[i] + p.lostsale_cost[i] * lost;
        }
        (next, cost)
    }

    fn check_pair(&self, state: &[f64], action: (usize, usize)) -> Result<()> {
        if state.len() != 2 {
            return Err(Error::Dimension {
                what: "inventory state",
                expected: 2,
                got: state.len(),
            });
        }
        if action.0 > self.params.a_max[0] || action.1 > self.params.a_max[1] {
            return Err(Error::usage(format!(
                "order {:?} exceeds a_max {:?}",
                action, self.params.a_max
            )));
        }
        Ok(())
    }

    /// One transition with a forced demand; the next action comes from the behavior policy.
    pub fn step_with_demand(
        &self,
        state: &[f64],
        action: (usize, usize),
        demand: [f64; 2],
        rng: &mut SimRng,
    ) -> Result<Transition> {
        self.check_pair(state, action)?;
        let (next, cost) = self.transition_with_demand(state, action, demand);
        let (reward, clipped) = normalized_reward(cost, self.params.c_max);
        Ok(Transition {
            reward,
            next_state: next.to_vec(),
            next_action: behavior_action(&self.actions, rng),
            clipped,
        })
    }
}

/// Samples the demand, advances the inventory and draws the next behavior action.
pub fn inventory_step(env: &InventoryEnv, state: &[f64], action: (usize, usize), rng: &mut SimRng) -> Result<Transition> {
    env.check_pair(state, action)?;
    let demand = env.sample_demand(rng);
    env.step_with_demand(state, action, demand, rng)
}

impl Environment for InventoryEnv {
    fn state_bounds(&self) -> (&[f64], &[f64]) {
        (&self.lo, &self.hi)
    }

    fn action_space(&self) -> &ActionSpace {
        &self.actions
    }

    fn initial_state(&self) -> Vec<f64> {
        vec![0.0, 0.0]
    }

    fn step(&self, state: &[f64], action: &Action, rng: &mut SimRng) -> Result<Outcome> {
        let idx = match action {
            Action::Index(i) if *i < self.params.n_actions() => *i,
            _ => return Err(Error::usage(format!("invalid inventory action {action:?}"))),
        };
        let pair = self.params.action_pair(idx);
        self.check_pair(state, pair)?;
        let demand = self.sample_demand(rng);
        let (next, cost) = self.transition_with_demand(state, pair, demand);
        let (reward, clipped) = normalized_reward(cost, self.params.c_max);
        Ok(Outcome {
            reward,
            next_state: next.to_vec(),
            clipped,
        })
    }
}

/// Empirical `quantile` of one-step costs along a uniform-policy pilot run
/// from `(0, 0)`. The `c_max` field of `params` is ignored. Floors at 1e-6.
pub fn estimate_c_max(params: &InventoryParams, pilot_steps: usize, quantile: f64, rng: &mut SimRng) -> Result<f64> {
    if pilot_steps < 1000 {
        return Err(Error::usage(format!("pilot_steps must be at least 1000, got {pilot_steps}")));
    }
    if !(quantile > 0.0 && quantile <= 1.0) {
        return Err(Error::usage(format!("quantile must lie in (0, 1], got {quantile}")));
    }
    let env = InventoryEnv::unchecked(InventoryParams { c_max: 1.0, ..params.clone() })?;
    let n = params.n_actions();
    let mut state = [0.0, 0.0];
    let mut costs = Vec::with_capacity(pilot_steps);
    for _ in 0..pilot_steps {
        let action = params.action_pair(uniform_behavior_policy(n, rng));
        let demand = env.sample_demand(rng);
        let (next, cost) = env.transition_with_demand(&state, action, demand);
        costs.push(cost);
        state = next;
    }
    costs.sort_by(f64::total_cmp);
    let rank = ((quantile * pilot_steps as f64).ceil() as usize).clamp(1, pilot_steps);
    Ok(costs[rank - 1].max(1e-6))
}

/// Finite MDP with states embedded as points on the real line.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteTestMDP {
    positions: Vec<f64>,
    n_actions: usize,
    /// `transitions[(s * n_actions + a) * n_states + s']`.
    transitions: Vec<f64>,
    /// `rewards[s * n_actions + a]`.
    rewards: Vec<f64>,
    actions: ActionSpace,
    lo: [f64; 1],
    hi: [f64; 1],
}

impl DiscreteTestMDP {
    pub fn new(positions: Vec<f64>, n_actions: usize, transitions: Vec<f64>, rewards: Vec<f64>) -> Result<Self> {
        let ns = positions.len();
        if ns == 0 || n_actions == 0 {
            return Err(Error::config("test MDP needs at least one state and one action"));
        }
        if transitions.len() != ns * n_actions * ns || rewards.len() != ns * n_actions {
            return Err(Error::config("test MDP table sizes do not match states x actions"));
        }
        for row in transitions.chunks_exact(ns) {
            if row.iter().any(|p| *p < 0.0) || (row.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
                return Err(Error::config("transition rows must be probability vectors"));
            }
        }
        if rewards.iter().any(|r| r.abs() > 1.0) {
            return Err(Error::config("rewards must lie in [-1, 1]"));
        }
        for (i, p) in positions.iter().enumerate() {
            if positions[..i].contains(p) {
                return Err(Error::config("state positions must be distinct"));
            }
        }
        let lo = positions.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = positions.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let actions = ActionSpace::Finite((0..n_actions).map(|a| vec![a as f64]).collect());
        Ok(Self {
            positions,
            n_actions,
            transitions,
            rewards,
            actions,
            lo: [lo],
            hi: [hi],
        })
    }

    /// Three states at {0, 0.5, 1} with two actions.
    pub fn canonical() -> Self {
        #[rustfmt::skip]
        let transitions = vec![
            0.8, 0.2, 0.0,   0.2, 0.5, 0.3,
            0.3, 0.6, 0.1,   0.1, 0.3, 0.6,
            0.1, 0.3, 0.6,   0.5, 0.3, 0.2,
        ];
        let rewards = vec![0.0, -0.2, 0.3, 0.1, 1.0, -0.5];
        Self::new(vec![0.0, 0.5, 1.0], 2, transitions, rewards).expect("canonical MDP is valid")
    }

    /// Random dense MDP with states evenly spaced on [0, 1].
    pub fn random(n_states: usize, n_actions: usize, rng: &mut SimRng) -> Self {
        let positions = if n_states == 1 {
            vec![0.0]
        } else {
            (0..n_states).map(|i| i as f64 / (n_states - 1) as f64).collect()
        };
        let mut transitions = Vec::with_capacity(n_states * n_actions * n_states);
        for _ in 0..n_states * n_actions {
            let row: Vec<f64> = (0..n_states).map(|_| rng.random::<f64>() + 1e-3).collect();
            let total: f64 = row.iter().sum();
            let mut row: Vec<f64> = row.iter().map(|p| p / total).collect();
            let err = 1.0 - row.iter().sum::<f64>();
            row[0] += err;
            transitions.extend(row);
        }
        let rewards = (0..n_states * n_actions).map(|_| rng.random_range(-1.0..=1.0)).collect();
        Self::new(positions, n_actions, transitions, rewards).expect("random MDP is valid")
    }

    pub fn n_states(&self) -> usize {
        self.positions.len()
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    pub fn reward(&self, s: usize, a: usize) -> f64 {
        self.rewards[s * self.n_actions + a]
    }

    pub fn transition_row(&self, s: usize, a: usize) -> &[f64] {
        let ns = self.n_states();
        let k = (s * self.n_actions + a) * ns;
        &self.transitions[k..k + ns]
    }

    pub fn state_index(&self, state: &[f64]) -> Result<usize> {
        match state {
            [x] => self
                .positions
                .iter()
                .position(|p| p == x)
                .ok_or_else(|| Error::usage(format!("{x} is not a state of the test MDP"))),
            _ => Err(Error::Dimension {
                what: "test MDP state",
                expected: 1,
                got: state.len(),
            }),
        }
    }

    /// Samples the next state index; the reward is the deterministic table entry.
    pub fn step_index(&self, s: usize, a: usize, rng: &mut SimRng) -> Result<(usize, f64)> {
        if s >= self.n_states() || a >= self.n_actions {
            return Err(Error::usage(format!("state/action index ({s}, {a}) out of range")));
        }
        let row = self.transition_row(s, a);
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut next = row.len() - 1;
        for (j, p) in row.iter().enumerate() {
            acc += p;
            if u < acc {
                next = j;
                break;
            }
        }
        while row[next] == 0.0 {
            next -= 1;
        }
        Ok((next, self.reward(s, a)))
    }

    /// Stationary distribution of `(state, action)` under the uniform
    /// behavior policy, indexed `s * n_actions + a`.
    pub fn stationary_distribution(&self) -> Result<Vec<f64>> {
        let ns = self.n_states();
        let m = self.n_actions as f64;
        // rho = rho P_b with P_b(s, s') = mean_a P(s'|s, a); solve (P_b^T - I) rho = 0, sum rho = 1.
        let mut a = DMatrix::<f64>::zeros(ns, ns);
        for s in 0..ns {
            for act in 0..self.n_actions {
                for (sp, p) in self.transition_row(s, act).iter().enumerate() {
                    a[(sp, s)] += p / m;
                }
            }
        }
        for i in 0..ns {
            a[(i, i)] -= 1.0;
        }
        let mut b = DVector::<f64>::zeros(ns);
        for j in 0..ns {
            a[(ns - 1, j)] = 1.0;
        }
        b[ns - 1] = 1.0;
        let rho = a
            .lu()
            .solve(&b)
            .ok_or_else(|| Error::config("behavior chain has no unique stationary distribution"))?;
        Ok((0..ns)
            .flat_map(|s| std::iter::repeat_n(rho[s].max(0.0) / m, self.n_actions))
            .collect())
    }
}

pub fn discrete_mdp_step(mdp: &DiscreteTestMDP, state: usize, action: usize, rng: &mut SimRng) -> Result<Transition> {
    let (next, reward) = mdp.step_index(state, action, rng)?;
    Ok(Transition {
        reward,
        next_state: vec![mdp.positions[next]],
        next_action: Action::Index(uniform_behavior_policy(mdp.n_actions, rng)),
        clipped: false,
    })
}

impl Environment for DiscreteTestMDP {
    fn state_bounds(&self) -> (&[f64], &[f64]) {
        (&self.lo, &self.hi)
    }

    fn action_space(&self) -> &ActionSpace {
        &self.actions
    }

    fn initial_state(&self) -> Vec<f64> {
        vec![self.positions[0]]
    }

    fn step(&self, state: &[f64], action: &Action, rng: &mut SimRng) -> Result<Outcome> {
        let s = self.state_index(state)?;
        let a = match action {
            Action::Index(a) => *a,
            Action::Vector(_) => return Err(Error::usage("test MDP actions are indices")),
        };
        let (next, reward) = self.step_index(s, a, rng)?;
        Ok(Outcome {
            reward,
            next_state: vec![self.positions[next]],
            clipped: false,
        })
    }
}

/// One-dimensional tracking task with a continuous action: steer `x in [0, 1]`
/// towards 0.5 with `x' = clamp(x + a + 0.05 N(0,1))`, `a in [-0.25, 0.25]`,
/// reward `1 - 2 |x' - 0.5|`.
#[derive(Debug, Clone)]
pub struct LineTrackingEnv {
    actions: ActionSpace,
    lo: [f64; 1],
    hi: [f64; 1],
}

impl Default for LineTrackingEnv {
    fn default() -> Self {
        Self {
            actions: ActionSpace::Box {
                lo: vec![-0.25],
                hi: vec![0.25],
            },
            lo: [0.0],
            hi: [1.0],
        }
    }
}

impl Environment for LineTrackingEnv {
    fn state_bounds(&self) -> (&[f64], &[f64]) {
        (&self.lo, &self.hi)
    }

    fn action_space(&self) -> &ActionSpace {
        &self.actions
    }

    fn initial_state(&self) -> Vec<f64> {
        vec![0.0]
    }

    fn step(&self, state: &[f64], action: &Action, rng: &mut SimRng) -> Result<Outcome> {
        let a = match action {
            Action::Vector(a) if a.len() == 1 => a[0].clamp(-0.25, 0.25),
            _ => return Err(Error::usage("line tracking expects a 1-d action vector")),
        };
        let noise: f64 = rng.sample(StandardNormal);
        let x = (state[0] + a + 0.05 * noise).clamp(0.0, 1.0);
        Ok(Outcome {
            reward: 1.0 - 2.0 * (x - 0.5).abs(),
            next_state: vec![x],
            clipped: false,
        })
    }
}
