//! The Q-measure learning loop.
//!
//! The learner keeps a probability measure `mu` over visited state-action
//! pairs and a signed measure `nu`, both supported on the trajectory
//! `Z_0, Z_1, ...`. The current Q estimate is `q = Phi_mu[nu]`, and each
//! transition appends one atom to each measure:
//!
//! ```text
//! Y     = R + gamma * max_a clip(q(X', a))
//! nu   <- (1 - alpha) nu + alpha * Y * delta_{Z_n}
//! mu   <- (1 - beta)  mu + beta * delta_{Z_{n+1}}
//! ```
//!
//! For finite action sets two evaluation strategies produce the same
//! numbers up to rounding:
//!
//! * [`Evaluation::Direct`] evaluates the kernel once per (action, atom)
//!   pair, i.e. `|A| (2n + 1)` evaluations per step.
//! * [`Evaluation::Factored`] uses that both kernels factor as
//!   `k_state(x, y) * k_action(a, b)`: it evaluates the state factor once per
//!   atom, buckets the weighted sums by the atom's action and combines the
//!   buckets with a precomputed `|A| x |A|` action table. This needs `n + 1`
//!   exponentials per step and relies on `nu`'s atoms being a prefix of
//!   `mu`'s, which holds for every model the learner builds.

use std::time::{Duration, Instant};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::env::{ActionSpace, Transition};
use crate::error::{Error, Result};
use crate::kernel::{box_diagonal, Action, ActionMode, KernelConfig, StateActionPoint};
use crate::measure::{mu_update, nu_update, total_variation, WeightedMeasure};
use crate::rng::SimRng;

/// `max(min(x, 1/(1-gamma)), -1/(1-gamma))`.
#[inline]
pub fn clip(x: f64, gamma: f64) -> f64 {
    let bound = 1.0 / (1.0 - gamma);
    x.clamp(-bound, bound)
}

/// Step-size sequences indexed from `n = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub enum StepSchedule {
    /// `alpha_n = a / (n + b)`.
    AlphaRm { a: f64, b: f64 },
    /// `beta_n = 1 / (n + 1)`.
    BetaUniform,
}

impl StepSchedule {
    pub fn value(&self, n: u64) -> f64 {
        match *self {
            StepSchedule::AlphaRm { a, b } => a / (n as f64 + b),
            StepSchedule::BetaUniform => 1.0 / (n as f64 + 1.0),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let StepSchedule::AlphaRm { a, b } = *self {
            if !(a > 0.0 && b >= 1.0 && a.is_finite() && b.is_finite()) {
                return Err(Error::config(format!("alpha schedule needs a > 0, b >= 1 (got a={a}, b={b})")));
            }
            if a > b + 1.0 {
                return Err(Error::config(format!("alpha_1 = a/(1+b) = {} exceeds 1", a / (1.0 + b))));
            }
        }
        Ok(())
    }
}

impl Default for StepSchedule {
    fn default() -> Self {
        StepSchedule::AlphaRm { a: 1.0, b: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Evaluation {
    Direct,
    #[default]
    Factored,
}

/// Multi-start projected gradient ascent settings for box action spaces.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContinuousArgmax {
    pub steps: usize,
    pub restarts: usize,
    /// Initial step size; `None` means 0.1 x the action-box diagonal.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
}

impl Default for ContinuousArgmax {
    fn default() -> Self {
        Self {
            steps: 50,
            restarts: 4,
            eta: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LearnerConfig {
    pub gamma: f64,
    pub alpha: StepSchedule,
    pub beta: StepSchedule,
    pub evaluation: Evaluation,
    pub argmax: ContinuousArgmax,
}

impl LearnerConfig {
    pub fn new(gamma: f64) -> Self {
        Self {
            gamma,
            alpha: StepSchedule::default(),
            beta: StepSchedule::BetaUniform,
            evaluation: Evaluation::default(),
            argmax: ContinuousArgmax::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(Error::config(format!("gamma must lie in (0, 1), got {}", self.gamma)));
        }
        self.alpha.validate()?;
        if self.beta != StepSchedule::BetaUniform {
            return Err(Error::config("beta schedule must be 1/(n+1)"));
        }
        if self.argmax.steps == 0 || self.argmax.restarts == 0 {
            return Err(Error::config("continuous argmax needs at least one step and one restart"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TdRecord {
    pub iteration: u64,
    pub reward: f64,
    pub target_y: f64,
    pub greedy_value: f64,
    pub wall_clock_step: Duration,
}

#[derive(Debug, Clone, PartialEq)]
struct FiniteTable {
    /// Kernel-side encoding of each action.
    encoded: Vec<Vec<f64>>,
    /// `table[a * m + b] = k_action(a, b)`.
    table: Vec<f64>,
}

impl FiniteTable {
    fn new(kernel: &KernelConfig, space: &ActionSpace) -> Result<Self> {
        let actions = space.kernel_actions(kernel.action_mode())?;
        let sd = kernel.state_dim();
        let encoded: Vec<Vec<f64>> = actions
            .iter()
            .map(|a| {
                let mut z = vec![0.0; sd];
                kernel.encode_action_into(a, &mut z)?;
                Ok(z)
            })
            .collect::<Result<_>>()?;
        let m = encoded.len();
        let mut table = vec![0.0; m * m];
        for a in 0..m {
            for b in 0..m {
                table[a * m + b] = kernel.eval_sq(kernel.action_sq_dist(&encoded[a], &encoded[b]));
            }
        }
        let encoded = encoded.into_iter().map(|z| z[sd..].to_vec()).collect();
        Ok(Self { encoded, table })
    }

    fn len(&self) -> usize {
        self.encoded.len()
    }
}

/// `q = Phi_mu[nu]` together with the action space it is maximized over.
/// Snapshots taken during training are plain clones of this.
#[derive(Debug, Clone)]
pub struct QModel {
    kernel: KernelConfig,
    space: ActionSpace,
    finite: Option<FiniteTable>,
    mu: WeightedMeasure,
    nu: WeightedMeasure,
    /// Action index of each `mu` atom; present only for learner-built models.
    support_actions: Option<Vec<u32>>,
    evaluation: Evaluation,
}

impl QModel {
    /// Wraps arbitrary measures. Always evaluates directly.
    pub fn from_measures(
        kernel: KernelConfig,
        space: ActionSpace,
        mu: WeightedMeasure,
        nu: WeightedMeasure,
    ) -> Result<Self> {
        if mu.is_empty() {
            return Err(Error::usage("reference measure has empty support"));
        }
        for m in [&mu, &nu] {
            if m.point_len() != kernel.point_len() {
                return Err(Error::Dimension {
                    what: "measure support",
                    expected: kernel.point_len(),
                    got: m.point_len(),
                });
            }
        }
        let finite = match &space {
            ActionSpace::Finite(_) => Some(FiniteTable::new(&kernel, &space)?),
            ActionSpace::Box { .. } if kernel.action_mode() == ActionMode::ContinuousBox => None,
            ActionSpace::Box { .. } => return Err(Error::config("box action space requires the continuous-box kernel")),
        };
        Ok(Self {
            kernel,
            space,
            finite,
            mu,
            nu,
            support_actions: None,
            evaluation: Evaluation::Direct,
        })
    }

    pub fn kernel(&self) -> &KernelConfig {
        &self.kernel
    }

    pub fn action_space(&self) -> &ActionSpace {
        &self.space
    }

    pub fn mu(&self) -> &WeightedMeasure {
        &self.mu
    }

    pub fn nu(&self) -> &WeightedMeasure {
        &self.nu
    }

    pub fn evaluation(&self) -> Evaluation {
        self.evaluation
    }

    /// Chooses the evaluation strategy; `Factored` is ignored for models
    /// without per-atom action indices.
    pub fn set_evaluation(&mut self, evaluation: Evaluation) {
        self.evaluation = evaluation;
    }

    fn factored_available(&self) -> bool {
        self.evaluation == Evaluation::Factored && self.support_actions.is_some() && self.finite.is_some()
    }

    /// `q` at an encoded point.
    pub fn q_encoded(&self, z: &[f64]) -> f64 {
        let den = self.mu.kernel_integral(&self.kernel, z);
        if self.nu.is_empty() {
            return 0.0;
        }
        self.nu.kernel_integral(&self.kernel, z) / den
    }

    pub fn q(&self, z: &StateActionPoint) -> Result<f64> {
        Ok(self.q_encoded(&self.kernel.encode(z)?))
    }

    /// `q(state, a)` for an environment-side action.
    pub fn q_at(&self, state: &[f64], action: &Action) -> Result<f64> {
        let a = self.space.kernel_action(action, self.kernel.action_mode())?;
        self.q(&StateActionPoint::new(state.to_vec(), a))
    }

    /// Raw q-values of every finite action at `state`. Returns the number of
    /// kernel (or state-factor) exponentials evaluated.
    pub fn q_all_actions(&self, state: &[f64], out: &mut Vec<f64>) -> Result<u64> {
        let table = self
            .finite
            .as_ref()
            .ok_or_else(|| Error::usage("q_all_actions needs a finite action space"))?;
        if state.len() != self.kernel.state_dim() {
            return Err(Error::Dimension {
                what: "state",
                expected: self.kernel.state_dim(),
                got: state.len(),
            });
        }
        out.clear();
        if self.factored_available() {
            Ok(self.q_all_factored(state, table, out))
        } else {
            Ok(self.q_all_direct(state, table, out))
        }
    }

    fn q_all_direct(&self, state: &[f64], table: &FiniteTable, out: &mut Vec<f64>) -> u64 {
        let mut z = Vec::with_capacity(self.kernel.point_len());
        for a in &table.encoded {
            z.clear();
            z.extend_from_slice(state);
            z.extend_from_slice(a);
            let den = self.mu.kernel_integral(&self.kernel, &z);
            let num = self.nu.kernel_integral(&self.kernel, &z);
            out.push(if self.nu.is_empty() { 0.0 } else { num / den });
        }
        (table.len() * (self.mu.len() + self.nu.len())) as u64
    }

    fn q_all_factored(&self, state: &[f64], table: &FiniteTable, out: &mut Vec<f64>) -> u64 {
        let m = table.len();
        let actions = self.support_actions.as_deref().expect("checked by caller");
        let sd = self.kernel.state_dim();
        let c = self.kernel.inv_two_sigma_sq();
        let mut mu_bucket = vec![0.0; m];
        let mut nu_bucket = vec![0.0; m];
        let n_nu = self.nu.len();
        let mu_w = self.mu.base_weights();
        let nu_w = self.nu.base_weights();
        for (j, y) in self.mu.points().enumerate() {
            let d2: f64 = state.iter().zip(&y[..sd]).map(|(p, q)| (p - q) * (p - q)).sum();
            let s = (-d2 * c).exp();
            let b = actions[j] as usize;
            mu_bucket[b] += mu_w[j] * s;
            if j < n_nu {
                nu_bucket[b] += nu_w[j] * s;
            }
        }
        let (mu_scale, nu_scale) = (self.mu.global_scale(), self.nu.global_scale());
        for a in 0..m {
            let row = &table.table[a * m..(a + 1) * m];
            let den: f64 = row.iter().zip(&mu_bucket).map(|(t, v)| t * v).sum();
            let num: f64 = row.iter().zip(&nu_bucket).map(|(t, v)| t * v).sum();
            out.push(if n_nu == 0 { 0.0 } else { (nu_scale * num) / (mu_scale * den) });
        }
        self.mu.len() as u64
    }

    /// Maximizing finite action by clipped value (lowest index on ties) and
    /// that clipped value.
    pub fn greedy_finite(&self, state: &[f64], gamma: f64) -> Result<(usize, f64)> {
        let mut q = Vec::new();
        self.q_all_actions(state, &mut q)?;
        Ok(argmax_clipped(&q, gamma))
    }

    /// `q` and its gradient with respect to the action, box action spaces only.
    pub fn q_and_action_gradient(&self, state: &[f64], action: &[f64]) -> (f64, Vec<f64>) {
        let sd = self.kernel.state_dim();
        let inv_sigma_sq = 2.0 * self.kernel.inv_two_sigma_sq();
        let mut z = Vec::with_capacity(self.kernel.point_len());
        z.extend_from_slice(state);
        z.extend_from_slice(action);
        let integrate = |m: &WeightedMeasure| {
            let mut val = 0.0;
            let mut grad = vec![0.0; action.len()];
            for (u, b) in m.points().zip(m.base_weights()) {
                let wk = b * self.kernel.eval(&z, u);
                val += wk;
                for (g, (ui, ai)) in grad.iter_mut().zip(u[sd..].iter().zip(action)) {
                    *g += wk * (ui - ai) * inv_sigma_sq;
                }
            }
            let s = m.global_scale();
            (s * val, grad.into_iter().map(|g| s * g).collect::<Vec<_>>())
        };
        let (den, dden) = integrate(&self.mu);
        if self.nu.is_empty() {
            return (0.0, vec![0.0; action.len()]);
        }
        let (num, dnum) = integrate(&self.nu);
        let q = num / den;
        let grad = dnum.iter().zip(&dden).map(|(dn, dd)| (dn * den - num * dd) / (den * den)).collect();
        (q, grad)
    }

    /// Multi-start projected gradient ascent over the action box. A step
    /// that does not improve `q` is rejected and the step size halved.
    pub fn greedy_continuous(
        &self,
        state: &[f64],
        gamma: f64,
        settings: &ContinuousArgmax,
        rng: &mut SimRng,
    ) -> Result<(Vec<f64>, f64)> {
        let (lo, hi) = match &self.space {
            ActionSpace::Box { lo, hi } => (lo, hi),
            ActionSpace::Finite(_) => return Err(Error::usage("greedy_continuous needs a box action space")),
        };
        if lo.iter().zip(hi).any(|(l, h)| l > h) {
            return Err(Error::usage("action box is empty"));
        }
        let eta0 = settings.eta.unwrap_or(0.1 * box_diagonal(lo, hi));
        let project = |a: &mut [f64]| {
            for ((x, l), h) in a.iter_mut().zip(lo).zip(hi) {
                *x = x.clamp(*l, *h);
            }
        };
        let mut best: Option<(Vec<f64>, f64)> = None;
        let mut consider = |a: &[f64], v: f64| {
            let cv = clip(v, gamma);
            if best.as_ref().is_none_or(|(_, b)| cv > *b) {
                best = Some((a.to_vec(), cv));
            }
        };
        for _ in 0..settings.restarts {
            let mut a: Vec<f64> = lo
                .iter()
                .zip(hi)
                .map(|(&l, &h)| if h > l { rng.random_range(l..=h) } else { l })
                .collect();
            project(&mut a);
            let (mut v, mut g) = self.q_and_action_gradient(state, &a);
            consider(&a, v);
            let mut eta = eta0;
            for _ in 0..settings.steps {
                let mut cand: Vec<f64> = a.iter().zip(&g).map(|(x, d)| x + eta * d).collect();
                project(&mut cand);
                let (vc, gc) = self.q_and_action_gradient(state, &cand);
                if vc >= v {
                    a = cand;
                    v = vc;
                    g = gc;
                    consider(&a, v);
                } else {
                    eta *= 0.5;
                }
            }
        }
        Ok(best.expect("at least one restart"))
    }

    /// Greedy environment-side action and its clipped value.
    pub fn greedy(&self, state: &[f64], gamma: f64, settings: &ContinuousArgmax, rng: &mut SimRng) -> Result<(Action, f64)> {
        match &self.space {
            ActionSpace::Finite(_) => {
                let (a, v) = self.greedy_finite(state, gamma)?;
                Ok((Action::Index(a), v))
            }
            ActionSpace::Box { .. } => {
                let (a, v) = self.greedy_continuous(state, gamma, settings, rng)?;
                Ok((Action::Vector(a), v))
            }
        }
    }
}

/// First index of the maximal clipped value, and that value.
pub fn argmax_clipped(q: &[f64], gamma: f64) -> (usize, f64) {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, v) in q.iter().enumerate() {
        let c = clip(*v, gamma);
        if c > best.1 {
            best = (i, c);
        }
    }
    best
}

/// Learner state: the two measures plus everything needed to advance them.
#[derive(Debug, Clone)]
pub struct LearnerState {
    model: QModel,
    config: LearnerConfig,
    iteration: u64,
    last_point: Vec<f64>,
    argmax_rng: SimRng,
    last_kernel_evals: u64,
}

impl LearnerState {
    /// `mu_0 = delta_{Z_0}`, `nu_0 = 0` with `Z_0 = (state, action)`.
    pub fn new(
        kernel: KernelConfig,
        space: ActionSpace,
        config: LearnerConfig,
        initial_state: &[f64],
        initial_action: &Action,
        argmax_rng: SimRng,
    ) -> Result<Self> {
        config.validate()?;
        let mode = kernel.action_mode();
        let z0 = kernel.encode(&StateActionPoint::new(
            initial_state.to_vec(),
            space.kernel_action(initial_action, mode)?,
        ))?;
        let mu = WeightedMeasure::dirac(&z0);
        let nu = WeightedMeasure::zero(kernel.point_len());
        let mut model = QModel::from_measures(kernel, space, mu, nu)?;
        if let (ActionSpace::Finite(_), Action::Index(i)) = (&model.space, initial_action) {
            model.support_actions = Some(vec![*i as u32]);
        }
        model.evaluation = config.evaluation;
        Ok(Self {
            model,
            config,
            iteration: 0,
            last_point: z0,
            argmax_rng,
            last_kernel_evals: 0,
        })
    }

    pub fn model(&self) -> &QModel {
        &self.model
    }

    pub fn snapshot(&self) -> QModel {
        self.model.clone()
    }

    pub fn config(&self) -> &LearnerConfig {
        &self.config
    }

    pub fn gamma(&self) -> f64 {
        self.config.gamma
    }

    pub fn iteration(&self) -> u64 {
        self.iteration
    }

    pub fn mu(&self) -> &WeightedMeasure {
        &self.model.mu
    }

    pub fn nu(&self) -> &WeightedMeasure {
        &self.model.nu
    }

    pub fn kernel(&self) -> &KernelConfig {
        &self.model.kernel
    }

    /// Encoded `Z_n`.
    pub fn last_point(&self) -> &[f64] {
        &self.last_point
    }

    /// Kernel (or state-factor) exponentials spent computing the last target.
    pub fn last_kernel_evals(&self) -> u64 {
        self.last_kernel_evals
    }

    pub fn total_variation(&self) -> f64 {
        total_variation(&self.model.nu)
    }

    /// `1 / ((1 - gamma) kappa_min)`.
    pub fn q_bound(&self) -> f64 {
        1.0 / ((1.0 - self.config.gamma) * self.model.kernel.kappa_min())
    }

    pub fn set_evaluation(&mut self, evaluation: Evaluation) {
        self.config.evaluation = evaluation;
        self.model.evaluation = evaluation;
    }

    /// Clipped greedy value at `state` under the current (pre-update) model.
    fn greedy_value(&mut self, state: &[f64]) -> Result<f64> {
        match &self.model.space {
            ActionSpace::Finite(_) => {
                let mut q = Vec::new();
                self.last_kernel_evals = self.model.q_all_actions(state, &mut q)?;
                Ok(argmax_clipped(&q, self.config.gamma).1)
            }
            ActionSpace::Box { .. } => {
                let s = &self.config.argmax;
                let evals = (s.restarts * (s.steps + 1) * (self.model.mu.len() + self.model.nu.len())) as u64;
                let (_, v) = self
                    .model
                    .greedy_continuous(state, self.config.gamma, s, &mut self.argmax_rng)?;
                self.last_kernel_evals = evals;
                Ok(v)
            }
        }
    }

    /// `R + gamma * max_a clip(q_n(next_state, a))`.
    pub fn td_target(&mut self, reward: f64, next_state: &[f64]) -> Result<f64> {
        Ok(reward + self.config.gamma * self.greedy_value(next_state)?)
    }

    /// One iteration of the algorithm on a transition out of `Z_n`.
    pub fn train_step(&mut self, t: &Transition) -> Result<TdRecord> {
        let start = Instant::now();
        if !(t.reward.abs() <= 1.0) {
            return Err(Error::usage(format!("reward {} outside [-1, 1]", t.reward)));
        }
        let greedy_value = self.greedy_value(&t.next_state)?;
        let y = t.reward + self.config.gamma * greedy_value;

        let n = self.iteration + 1;
        let alpha = self.config.alpha.value(n);
        let beta = self.config.beta.value(n);
        let mode = self.model.kernel.action_mode();
        let z_next = self.model.kernel.encode(&StateActionPoint::new(
            t.next_state.clone(),
            self.model.space.kernel_action(&t.next_action, mode)?,
        ))?;
        nu_update(&mut self.model.nu, &self.last_point, y, alpha)?;
        mu_update(&mut self.model.mu, &z_next, beta)?;
        if let Some(actions) = self.model.support_actions.as_mut() {
            match t.next_action {
                Action::Index(i) => actions.push(i as u32),
                Action::Vector(_) => return Err(Error::usage("finite learner received a vector action")),
            }
        }
        self.iteration = n;
        self.last_point = z_next;
        Ok(TdRecord {
            iteration: n,
            reward: t.reward,
            target_y: y,
            greedy_value,
            wall_clock_step: start.elapsed(),
        })
    }

    pub(crate) fn restore(
        model: QModel,
        config: LearnerConfig,
        iteration: u64,
        last_point: Vec<f64>,
        argmax_rng: SimRng,
    ) -> Self {
        Self {
            model,
            config,
            iteration,
            last_point,
            argmax_rng,
            last_kernel_evals: 0,
        }
    }

    pub(crate) fn argmax_rng(&self) -> &SimRng {
        &self.argmax_rng
    }

    pub(crate) fn support_actions(&self) -> Option<&[u32]> {
        self.model.support_actions.as_deref()
    }
}

impl QModel {
    pub(crate) fn with_support_actions(mut self, actions: Option<Vec<u32>>, evaluation: Evaluation) -> Result<Self> {
        if let Some(a) = &actions {
            if a.len() != self.mu.len() || self.nu.len() > self.mu.len() {
                return Err(Error::Format("support action indices do not match the measures".into()));
            }
        }
        self.support_actions = actions;
        self.evaluation = evaluation;
        Ok(self)
    }
}
