//! Reference solutions: value iteration on a quantized state grid, the fixed
//! point of the kernel-smoothed clipped Bellman operator, and the
//! smoothing-bias functional `xi`.

use std::collections::HashMap;

use log::warn;

use crate::env::{normalized_reward, DiscreteTestMDP, Environment, InventoryEnv, InventoryParams};
use crate::error::{Error, Result};
use crate::kernel::{cartesian, Action, KernelConfig, StateActionPoint};
use crate::learner::clip;
use crate::measure::WeightedMeasure;
use crate::rng::SimRng;

/// Uniform partition of a state box into cells.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub cells: Vec<usize>,
}

impl GridSpec {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>, cells: Vec<usize>) -> Result<Self> {
        if lo.len() != hi.len() || lo.len() != cells.len() || lo.is_empty() {
            return Err(Error::config("grid bounds and cell counts must have equal, positive length"));
        }
        if cells.contains(&0) || lo.iter().zip(&hi).any(|(l, h)| !(h > l)) {
            return Err(Error::config("grid needs at least one cell per axis and a nonempty box"));
        }
        Ok(Self { lo, hi, cells })
    }

    /// `cells_per_axis` cells on each axis of the square `[0, side]^dim`.
    pub fn square(side: f64, dim: usize, cells_per_axis: usize) -> Result<Self> {
        Self::new(vec![0.0; dim], vec![side; dim], vec![cells_per_axis; dim])
    }

    pub fn n_cells(&self) -> usize {
        self.cells.iter().product()
    }

    fn width(&self, axis: usize) -> f64 {
        (self.hi[axis] - self.lo[axis]) / self.cells[axis] as f64
    }

    /// Containing cell (row-major, last axis fastest). Upper boundaries map
    /// into the last cell; points outside the box are an error.
    pub fn cell_of(&self, state: &[f64]) -> Result<usize> {
        if state.len() != self.lo.len() {
            return Err(Error::Dimension {
                what: "grid state",
                expected: self.lo.len(),
                got: state.len(),
            });
        }
        let mut idx = 0;
        for (axis, &x) in state.iter().enumerate() {
            if !(x >= self.lo[axis] && x <= self.hi[axis]) {
                return Err(Error::usage(format!("state {state:?} lies outside the grid")));
            }
            idx = idx * self.cells[axis] + self.axis_cell(axis, x);
        }
        Ok(idx)
    }

    #[inline]
    fn axis_cell(&self, axis: usize, x: f64) -> usize {
        (((x - self.lo[axis]) / self.width(axis)).floor() as usize).min(self.cells[axis] - 1)
    }

    pub fn cell_center(&self, idx: usize) -> Vec<f64> {
        let mut rem = idx;
        let mut out = vec![0.0; self.lo.len()];
        for axis in (0..self.lo.len()).rev() {
            let k = rem % self.cells[axis];
            rem /= self.cells[axis];
            out[axis] = self.lo[axis] + (k as f64 + 0.5) * self.width(axis);
        }
        out
    }

    pub fn cell_centers(&self) -> Vec<Vec<f64>> {
        let axes: Vec<Vec<f64>> = (0..self.lo.len())
            .map(|axis| (0..self.cells[axis]).map(|k| self.lo[axis] + (k as f64 + 0.5) * self.width(axis)).collect())
            .collect();
        cartesian(&axes)
    }
}

/// Q-values held constant on each grid cell, for a finite action set.
#[derive(Debug, Clone, PartialEq)]
pub struct GridQTable {
    pub grid: GridSpec,
    pub n_actions: usize,
    /// `values[cell * n_actions + action]`.
    pub values: Vec<f64>,
    pub residual: f64,
    pub sweeps: usize,
    pub converged: bool,
    pub gamma: f64,
    pub demand_samples: usize,
    pub seed: u64,
}

impl GridQTable {
    pub fn value(&self, state: &[f64], action: usize) -> Result<f64> {
        if action >= self.n_actions {
            return Err(Error::usage(format!("action {action} out of range for the table")));
        }
        Ok(self.values[self.grid.cell_of(state)? * self.n_actions + action])
    }

    /// Greedy action (lowest index on ties) per cell.
    pub fn greedy_actions(&self) -> Vec<usize> {
        self.values
            .chunks_exact(self.n_actions)
            .map(|row| crate::learner::argmax_clipped(row, self.gamma).0)
            .collect()
    }
}

/// Finite model on grid cells: mean rewards and sparse next-cell distributions.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularModel {
    pub n_states: usize,
    pub n_actions: usize,
    /// `rewards[s * n_actions + a]`.
    pub rewards: Vec<f64>,
    /// `next[s * n_actions + a]` lists `(next_state, probability)`.
    pub next: Vec<Vec<(u32, f64)>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DpSolution {
    pub values: Vec<f64>,
    pub residual: f64,
    pub sweeps: usize,
    pub converged: bool,
    /// Sup-norm change of each sweep.
    pub history: Vec<f64>,
}

/// Value iteration `Q <- r + gamma E[max_a' clip(Q(s', a'))]` from `Q = 0`
/// until the sup-norm change drops below `tol`.
pub fn value_iteration(model: &TabularModel, gamma: f64, tol: f64, max_sweeps: usize) -> Result<DpSolution> {
    if !(tol > 0.0) {
        return Err(Error::usage("tolerance must be positive"));
    }
    if !(0.0..1.0).contains(&gamma) {
        return Err(Error::config(format!("gamma must lie in [0, 1), got {gamma}")));
    }
    let m = model.n_actions;
    let mut q = vec![0.0; model.n_states * m];
    let mut v = vec![0.0; model.n_states];
    let mut history = Vec::new();
    let mut converged = false;
    for _ in 0..max_sweeps {
        for (s, row) in q.chunks_exact(m).enumerate() {
            v[s] = row.iter().map(|x| clip(*x, gamma)).fold(f64::NEG_INFINITY, f64::max);
        }
        let mut change = 0.0f64;
        for (k, qk) in q.iter_mut().enumerate() {
            let ev: f64 = model.next[k].iter().map(|(s, p)| p * v[*s as usize]).sum();
            let new = model.rewards[k] + gamma * ev;
            change = change.max((new - *qk).abs());
            *qk = new;
        }
        history.push(change);
        if change < tol {
            converged = true;
            break;
        }
    }
    if !converged {
        warn!(
            "value iteration stopped after {max_sweeps} sweeps with residual {:e}",
            history.last().copied().unwrap_or(f64::NAN)
        );
    }
    Ok(DpSolution {
        values: q,
        residual: history.last().copied().unwrap_or(f64::INFINITY),
        sweeps: history.len(),
        converged,
        history,
    })
}

/// Tabular model of the inventory chain on grid cells: each cell is
/// represented by its centre and the demand expectation is replaced by the
/// average over `demand_samples` draws shared by all cells and actions.
pub fn inventory_tabular_model(
    env: &InventoryEnv,
    grid: &GridSpec,
    demand_samples: usize,
    rng: &mut SimRng,
) -> Result<TabularModel> {
    if demand_samples == 0 {
        return Err(Error::usage("need at least one demand sample"));
    }
    let p = env.params();
    if grid.lo.len() != 2 {
        return Err(Error::config("inventory grid must be two-dimensional"));
    }
    let demands: Vec<[f64; 2]> = (0..demand_samples).map(|_| env.sample_demand(rng)).collect();
    let m = p.n_actions();
    let n_cells = grid.n_cells();
    let inv_n = 1.0 / demand_samples as f64;
    let mut rewards = Vec::with_capacity(n_cells * m);
    let mut next = Vec::with_capacity(n_cells * m);
    let mut cells = Vec::with_capacity(demand_samples);
    for c in 0..n_cells {
        let x = grid.cell_center(c);
        for a in 0..m {
            let pair = p.action_pair(a);
            cells.clear();
            let mut r_sum = 0.0;
            for d in &demands {
                let (xn, cost) = env.transition_with_demand(&x, pair, *d);
                r_sum += normalized_reward(cost, p.c_max).0;
                cells.push(grid.cell_of(&xn)? as u32);
            }
            cells.sort_unstable();
            let mut dist: Vec<(u32, f64)> = Vec::new();
            for &s in &cells {
                match dist.last_mut() {
                    Some((last, w)) if *last == s => *w += inv_n,
                    _ => dist.push((s, inv_n)),
                }
            }
            rewards.push(r_sum * inv_n);
            next.push(dist);
        }
    }
    Ok(TabularModel {
        n_states: n_cells,
        n_actions: m,
        rewards,
        next,
    })
}

/// Value iteration for the inventory model on a quantized grid.
pub fn dp_value_iteration(
    params: &InventoryParams,
    grid: &GridSpec,
    demand_samples: usize,
    gamma: f64,
    tol: f64,
    max_sweeps: usize,
    rng: &mut SimRng,
) -> Result<GridQTable> {
    let env = InventoryEnv::new(params.clone())?;
    let model = inventory_tabular_model(&env, grid, demand_samples, rng)?;
    let sol = value_iteration(&model, gamma, tol, max_sweeps)?;
    Ok(GridQTable {
        grid: grid.clone(),
        n_actions: model.n_actions,
        values: sol.values,
        residual: sol.residual,
        sweeps: sol.sweeps,
        converged: sol.converged,
        gamma,
        demand_samples,
        seed: 0,
    })
}

/// Per-support-point reward and next-state distribution, used to evaluate
/// the clipped Bellman operator at the atoms of a reference measure.
#[derive(Debug, Clone, PartialEq)]
pub struct SupportModel {
    pub rewards: Vec<f64>,
    /// `(next_state, probability)` pairs per support point.
    pub next: Vec<Vec<(Vec<f64>, f64)>>,
}

impl SupportModel {
    /// Exact expectations for `(state index, action index)` support points.
    pub fn from_discrete(mdp: &DiscreteTestMDP, support: &[(usize, usize)]) -> Self {
        let rewards = support.iter().map(|&(s, a)| mdp.reward(s, a)).collect();
        let next = support
            .iter()
            .map(|&(s, a)| {
                mdp.transition_row(s, a)
                    .iter()
                    .enumerate()
                    .filter(|(_, p)| **p > 0.0)
                    .map(|(sp, p)| (vec![mdp.positions()[sp]], *p))
                    .collect()
            })
            .collect();
        Self { rewards, next }
    }

    /// `samples` simulated transitions per support point, equally weighted.
    pub fn sampled<E: Environment + ?Sized>(
        env: &E,
        support: &[(Vec<f64>, Action)],
        samples: usize,
        rng: &mut SimRng,
    ) -> Result<Self> {
        if samples == 0 {
            return Err(Error::usage("need at least one next-state sample"));
        }
        let w = 1.0 / samples as f64;
        let mut rewards = Vec::with_capacity(support.len());
        let mut next = Vec::with_capacity(support.len());
        for (x, a) in support {
            let mut r = 0.0;
            let mut nx = Vec::with_capacity(samples);
            for _ in 0..samples {
                let out = env.step(x, a, rng)?;
                r += out.reward;
                nx.push((out.next_state, w));
            }
            rewards.push(r * w);
            next.push(nx);
        }
        Ok(Self { rewards, next })
    }
}

/// Upper bound on stored kernel weights (`queries x actions x support`).
const MAX_DENSE_ENTRIES: usize = 50_000_000;

/// The smoothed clipped Bellman operator `K_mu o T` restricted to a finite
/// reference measure `mu` and a finite action set.
#[derive(Debug, Clone)]
pub struct SmoothedBellman {
    kernel: KernelConfig,
    mu: WeightedMeasure,
    gamma: f64,
    actions: Vec<Action>,
    rewards: Vec<f64>,
    /// Per support point: `(query state index, probability)`.
    next: Vec<Vec<(usize, f64)>>,
    query_states: Vec<Vec<f64>>,
    /// Normalized kernel weights: row `(q * m + a)` holds
    /// `mu_k k(z, u_k) / sum_j mu_j k(z, u_j)` for `z = (query_q, a)`.
    rows: Vec<f64>,
}

impl SmoothedBellman {
    /// `actions` are kernel-side actions of the finite action set.
    pub fn new(
        kernel: KernelConfig,
        mu: WeightedMeasure,
        model: &SupportModel,
        actions: Vec<Action>,
        gamma: f64,
    ) -> Result<Self> {
        if mu.is_empty() {
            return Err(Error::usage("support is empty"));
        }
        mu.check_probability(1e-9)?;
        if model.rewards.len() != mu.len() || model.next.len() != mu.len() {
            return Err(Error::Dimension {
                what: "support model",
                expected: mu.len(),
                got: model.rewards.len(),
            });
        }
        if actions.is_empty() {
            return Err(Error::usage("action set is empty"));
        }
        if !(0.0..1.0).contains(&gamma) {
            return Err(Error::config(format!("gamma must lie in [0, 1), got {gamma}")));
        }
        let mut index: HashMap<Vec<u64>, usize> = HashMap::new();
        let mut query_states = Vec::new();
        let next = model
            .next
            .iter()
            .map(|row| {
                row.iter()
                    .map(|(x, p)| {
                        let key: Vec<u64> = x.iter().map(|v| v.to_bits()).collect();
                        let q = *index.entry(key).or_insert_with(|| {
                            query_states.push(x.clone());
                            query_states.len() - 1
                        });
                        (q, *p)
                    })
                    .collect()
            })
            .collect();
        let m = actions.len();
        let k = mu.len();
        if query_states.len() * m * k > MAX_DENSE_ENTRIES {
            return Err(Error::usage(format!(
                "smoothed operator needs {} kernel weights; thin the support or the next-state samples",
                query_states.len() * m * k
            )));
        }
        let mut op = Self {
            kernel,
            mu,
            gamma,
            actions,
            rewards: model.rewards.clone(),
            next,
            query_states,
            rows: Vec::new(),
        };
        let mut rows = Vec::with_capacity(op.query_states.len() * m * k);
        for qs in &op.query_states {
            for a in &op.actions {
                let z = op.kernel.encode(&StateActionPoint::new(qs.clone(), a.clone()))?;
                rows.extend(op.normalized_row(&z));
            }
        }
        op.rows = rows;
        Ok(op)
    }

    fn normalized_row(&self, z: &[f64]) -> Vec<f64> {
        let w: Vec<f64> = self
            .mu
            .points()
            .enumerate()
            .map(|(j, u)| self.mu.effective_weight(j) * self.kernel.eval(z, u))
            .collect();
        let total: f64 = w.iter().sum();
        w.into_iter().map(|x| x / total).collect()
    }

    pub fn support_len(&self) -> usize {
        self.mu.len()
    }

    pub fn n_actions(&self) -> usize {
        self.actions.len()
    }

    /// Distinct next states; functions are passed in as values at
    /// `(query_states[q], actions[a])`, indexed `q * n_actions + a`.
    pub fn query_states(&self) -> &[Vec<f64>] {
        &self.query_states
    }

    /// `T[f]` at each support point for `f` given at the query points.
    pub fn bellman(&self, f_queries: &[f64]) -> Vec<f64> {
        let m = self.actions.len();
        let vmax: Vec<f64> = f_queries
            .chunks_exact(m)
            .map(|row| row.iter().map(|x| clip(*x, self.gamma)).fold(f64::NEG_INFINITY, f64::max))
            .collect();
        self.rewards
            .iter()
            .zip(&self.next)
            .map(|(r, row)| r + self.gamma * row.iter().map(|(q, p)| p * vmax[*q]).sum::<f64>())
            .collect()
    }

    /// `K_mu[h]` at every query point for `h` given on the support.
    pub fn smooth_at_queries(&self, h: &[f64]) -> Vec<f64> {
        self.rows
            .chunks_exact(self.mu.len())
            .map(|row| row.iter().zip(h).map(|(w, v)| w * v).sum())
            .collect()
    }

    /// `K_mu[h]` at arbitrary encoded points.
    pub fn smooth_at(&self, h: &[f64], points: &[Vec<f64>]) -> Vec<f64> {
        points
            .iter()
            .map(|z| self.normalized_row(z).iter().zip(h).map(|(w, v)| w * v).sum())
            .collect()
    }

    pub fn kernel(&self) -> &KernelConfig {
        &self.kernel
    }

    pub fn mu(&self) -> &WeightedMeasure {
        &self.mu
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }
}

/// Fixed point `q* = K_mu[T[q*]]`, stored as the signed measure
/// `nu* = T[q*](u_k) mu_k delta_{u_k}` so that `q* = Phi_mu[nu*]`.
#[derive(Debug, Clone)]
pub struct SmoothedFixedPoint {
    pub kernel: KernelConfig,
    pub mu: WeightedMeasure,
    pub nu_star: WeightedMeasure,
    /// `T[q*]` at each support point.
    pub bellman_on_support: Vec<f64>,
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Sup-norm change of `T[q]` on the support per iteration.
    pub history: Vec<f64>,
}

impl SmoothedFixedPoint {
    pub fn q_encoded(&self, z: &[f64]) -> f64 {
        self.nu_star.kernel_integral(&self.kernel, z) / self.mu.kernel_integral(&self.kernel, z)
    }

    pub fn q(&self, z: &StateActionPoint) -> Result<f64> {
        Ok(self.q_encoded(&self.kernel.encode(z)?))
    }
}

/// Iterates `h <- T[K_mu h]` from `h = 0`, which is the q-iteration
/// `q <- K_mu[T[q]]` with `q = K_mu h`.
pub fn smoothed_fixed_point(op: &SmoothedBellman, tol: f64, max_iters: usize) -> Result<SmoothedFixedPoint> {
    if !(tol > 0.0) {
        return Err(Error::usage("tolerance must be positive"));
    }
    let mut h = vec![0.0; op.support_len()];
    let mut history = Vec::new();
    let mut converged = false;
    for _ in 0..max_iters {
        let next = op.bellman(&op.smooth_at_queries(&h));
        let change = next.iter().zip(&h).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        h = next;
        history.push(change);
        if change < tol {
            converged = true;
            break;
        }
    }
    if !converged {
        warn!("smoothed fixed point stopped after {max_iters} iterations");
    }
    let weights: Vec<f64> = h.iter().enumerate().map(|(k, v)| v * op.mu.effective_weight(k)).collect();
    let nu_star = WeightedMeasure::from_flat(op.mu.point_len(), op.mu.coords().to_vec(), weights, false)?;
    Ok(SmoothedFixedPoint {
        kernel: op.kernel.clone(),
        mu: op.mu.clone(),
        nu_star,
        bellman_on_support: h,
        residual: history.last().copied().unwrap_or(f64::INFINITY),
        iterations: history.len(),
        converged,
        history,
    })
}

/// Grid estimate of `sup_z int d(z,u)^alpha k(z,u) mu(du) / int k(z,u) mu(du)`
/// for the empirical measure of `samples`.
pub fn estimate_xi(
    cfg: &KernelConfig,
    samples: &[StateActionPoint],
    alpha: f64,
    probe_grid: &[StateActionPoint],
) -> Result<f64> {
    if samples.is_empty() || probe_grid.is_empty() {
        return Err(Error::usage("xi needs nonempty samples and probe grid"));
    }
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::usage(format!("Hölder exponent must lie in (0, 1], got {alpha}")));
    }
    let mut flat = Vec::with_capacity(samples.len() * cfg.point_len());
    for s in samples {
        cfg.encode_into(s, &mut flat)?;
    }
    let mut best = 0.0f64;
    for p in probe_grid {
        let z = cfg.encode(p)?;
        let (mut num, mut den) = (0.0, 0.0);
        for u in flat.chunks_exact(cfg.point_len()) {
            let d2 = cfg.sq_dist(&z, u);
            let k = cfg.eval_sq(d2);
            num += d2.powf(0.5 * alpha) * k;
            den += k;
        }
        best = best.max(num / den);
    }
    Ok(best)
}

/// `L_Q xi / (1 - gamma)`.
pub fn bias_bound(xi: f64, lipschitz: f64, gamma: f64) -> Result<f64> {
    if xi < 0.0 || lipschitz < 0.0 || !(0.0..1.0).contains(&gamma) {
        return Err(Error::usage("bias bound needs nonnegative inputs and gamma in [0, 1)"));
    }
    Ok(lipschitz * xi / (1.0 - gamma))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::ActionMode;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};

    fn rng(seed: u64) -> SimRng {
        SimRng::seed_from_u64(seed)
    }

    #[test]
    fn grid_indexing() {
        let g = GridSpec::square(15.0, 2, 25).unwrap();
        assert_eq!(g.n_cells(), 625);
        assert_eq!(g.cell_of(&[0.0, 0.0]).unwrap(), 0);
        assert_eq!(g.cell_of(&[15.0, 15.0]).unwrap(), 624);
        assert_eq!(g.cell_of(&[0.0, 0.61]).unwrap(), 1);
        assert_eq!(g.cell_of(&[0.61, 0.0]).unwrap(), 25);
        assert!(g.cell_of(&[15.01, 0.0]).is_err());
        for c in [0, 17, 311, 624] {
            assert_eq!(g.cell_of(&g.cell_center(c)).unwrap(), c);
        }
        assert_eq!(g.cell_centers()[311], g.cell_center(311));
    }

    #[test]
    fn zero_discount_gives_one_step_reward() {
        let model = TabularModel {
            n_states: 2,
            n_actions: 2,
            rewards: vec![0.1, -0.2, 0.3, 0.4],
            next: vec![vec![(0, 0.5), (1, 0.5)], vec![(1, 1.0)], vec![(0, 1.0)], vec![(1, 1.0)]],
        };
        let sol = value_iteration(&model, 0.0, 1e-12, 10).unwrap();
        assert_eq!(sol.values, model.rewards);
        assert!(sol.converged);
    }

    #[test]
    fn single_state_geometric_series() {
        let model = TabularModel {
            n_states: 1,
            n_actions: 1,
            rewards: vec![0.3],
            next: vec![vec![(0, 1.0)]],
        };
        let sol = value_iteration(&model, 0.5, 1e-13, 200).unwrap();
        assert_abs_diff_eq!(sol.values[0], 0.6, epsilon = 1e-12);
    }

    #[test]
    fn sweep_changes_contract() {
        let params = InventoryParams { c_max: 12.0, ..InventoryParams::small() };
        let grid = GridSpec::square(15.0, 2, 8).unwrap();
        let env = InventoryEnv::new(params).unwrap();
        let model = inventory_tabular_model(&env, &grid, 500, &mut rng(1)).unwrap();
        for row in &model.next {
            assert_abs_diff_eq!(row.iter().map(|(_, p)| p).sum::<f64>(), 1.0, epsilon = 1e-12);
        }
        let sol = value_iteration(&model, 0.7, 1e-10, 500).unwrap();
        assert!(sol.converged);
        for w in sol.history.windows(2).skip(1) {
            assert!(w[1] <= w[0] + 1e-10);
            assert!(w[1] <= 0.7 * w[0] + 1e-10);
        }
        assert!(sol.values.iter().all(|v| v.abs() <= 1.0 / 0.3));
        // One more sweep changes nothing beyond the tolerance.
        let again = value_iteration(&model, 0.7, 1e-10, sol.sweeps + 1).unwrap();
        for (a, b) in again.values.iter().zip(&sol.values) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    fn discrete_operator(mdp: &DiscreteTestMDP, sigma: f64, gamma: f64) -> SmoothedBellman {
        let kernel = mdp.kernel_config(sigma, ActionMode::FiniteActions).unwrap();
        let pi = mdp.stationary_distribution().unwrap();
        let support: Vec<(usize, usize)> =
            (0..mdp.n_states()).flat_map(|s| (0..mdp.n_actions()).map(move |a| (s, a))).collect();
        let points: Vec<StateActionPoint> =
            support.iter().map(|&(s, a)| StateActionPoint::indexed(vec![mdp.positions()[s]], a)).collect();
        let mu = WeightedMeasure::from_points(&kernel, &points, &pi, true).unwrap();
        let model = SupportModel::from_discrete(mdp, &support);
        let actions = (0..mdp.n_actions()).map(Action::Index).collect();
        SmoothedBellman::new(kernel, mu, &model, actions, gamma).unwrap()
    }

    #[test]
    fn single_point_fixed_point() {
        let mdp = DiscreteTestMDP::new(vec![0.0], 1, vec![1.0], vec![0.4]).unwrap();
        let op = discrete_operator(&mdp, 1.0, 0.6);
        let fp = smoothed_fixed_point(&op, 1e-13, 1000).unwrap();
        assert_abs_diff_eq!(fp.q(&StateActionPoint::indexed(vec![0.0], 0)).unwrap(), 1.0, epsilon = 1e-11);
    }

    #[test]
    fn fixed_point_contracts_and_satisfies_equation() {
        let mdp = DiscreteTestMDP::canonical();
        let op = discrete_operator(&mdp, 0.5, 0.7);
        let fp = smoothed_fixed_point(&op, 1e-12, 10_000).unwrap();
        assert!(fp.converged);
        for w in fp.history.windows(2) {
            assert!(w[1] <= 0.7 * w[0] + 1e-12);
        }
        let support: Vec<Vec<f64>> = fp.mu.points().map(<[f64]>::to_vec).collect();
        let q_support: Vec<f64> = support.iter().map(|z| fp.q_encoded(z)).collect();
        for q in &q_support {
            assert!(q.abs() <= 1.0 / 0.3);
            assert_eq!(clip(*q, 0.7), *q);
        }
        // Query points coincide with the support here.
        let q_queries: Vec<f64> = op
            .query_states()
            .iter()
            .flat_map(|x| (0..2).map(move |a| (x.clone(), a)))
            .map(|(x, a)| fp.q(&StateActionPoint::indexed(x, a)).unwrap())
            .collect();
        let again = op.smooth_at(&op.bellman(&q_queries), &support);
        for (a, b) in again.iter().zip(&q_support) {
            assert!((a - b).abs() < 1e-11);
        }
    }

    #[test]
    fn smoothing_is_non_expansive() {
        let mdp = DiscreteTestMDP::random(20, 2, &mut rng(3));
        let op = discrete_operator(&mdp, 0.1, 0.7);
        let grid: Vec<Vec<f64>> = (0..=50)
            .flat_map(|i| (0..2).map(move |a| vec![i as f64 / 50.0, a as f64]))
            .collect();
        let mut r = rng(4);
        for _ in 0..100 {
            let f: Vec<f64> = (0..op.support_len()).map(|_| r.random_range(-3.0..3.0)).collect();
            let g: Vec<f64> = (0..op.support_len()).map(|_| r.random_range(-3.0..3.0)).collect();
            let raw = f.iter().zip(&g).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            let sf = op.smooth_at(&f, &grid);
            let sg = op.smooth_at(&g, &grid);
            let smooth = sf.iter().zip(&sg).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            assert!(smooth <= raw + 1e-12);
        }
    }

    #[test]
    fn sampled_support_model_averages() {
        let mdp = DiscreteTestMDP::canonical();
        let support = vec![(vec![0.5], Action::Index(1))];
        let m = SupportModel::sampled(&mdp, &support, 4000, &mut rng(5)).unwrap();
        assert_abs_diff_eq!(m.rewards[0], 0.1, epsilon = 1e-12);
        let to_right = m.next[0].iter().filter(|(x, _)| x[0] == 1.0).map(|(_, p)| p).sum::<f64>();
        assert!((to_right - 0.6).abs() < 0.03);
    }

    #[test]
    fn xi_examples() {
        let cfg = KernelConfig::new(1.0, ActionMode::FiniteActions, 1, 0, 1.0).unwrap();
        let u = StateActionPoint::indexed(vec![0.3], 0);
        assert_eq!(estimate_xi(&cfg, &[u.clone(), u.clone()], 0.5, std::slice::from_ref(&u)).unwrap(), 0.0);

        let s = [StateActionPoint::indexed(vec![0.0], 0), StateActionPoint::indexed(vec![1.0], 0)];
        let e = (-0.5f64).exp();
        assert_abs_diff_eq!(estimate_xi(&cfg, &s, 1.0, &s).unwrap(), e / (1.0 + e), epsilon = 1e-12);
        assert_abs_diff_eq!(estimate_xi(&cfg, &s, 1.0, &s).unwrap(), 0.377_540_67, epsilon = 1e-8);
        assert!(estimate_xi(&cfg, &[], 1.0, &s).is_err());
    }

    #[test]
    fn bias_bound_examples() {
        assert_eq!(bias_bound(0.0, 3.0, 0.9).unwrap(), 0.0);
        assert_abs_diff_eq!(bias_bound(0.3, 1.0, 0.7).unwrap(), 1.0, epsilon = 1e-12);
        assert!(bias_bound(0.4, 1.0, 0.7).unwrap() > bias_bound(0.3, 1.0, 0.7).unwrap());
        assert!(bias_bound(0.3, 2.0, 0.7).unwrap() > bias_bound(0.3, 1.0, 0.7).unwrap());
        assert!(bias_bound(0.3, 1.0, 0.8).unwrap() > bias_bound(0.3, 1.0, 0.7).unwrap());
        assert!(bias_bound(-0.1, 1.0, 0.7).is_err());
    }
}
