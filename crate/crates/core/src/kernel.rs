//! Gaussian-type kernels on state-action pairs.
//!
//! Two action-space cases are supported:
//!
//! * `ContinuousBox`: actions are real vectors and the kernel is the plain
//!   Gaussian `exp(-|z-u|^2 / (2 sigma^2))` on the concatenated `(x, a)`.
//! * `FiniteActions`: actions are indices and
//!   `kappa((x,i),(y,j)) = exp(-(|x-y|^2 + 1{i != j}) / (2 sigma^2))`.
//!
//! Internally a point is stored as a flat `[f64]` row of length
//! [`KernelConfig::point_len`]: the state coordinates followed by either the
//! action vector or the action index written as an `f64`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measure::WeightedMeasure;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ActionMode {
    ContinuousBox,
    FiniteActions,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Action {
    Index(usize),
    Vector(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateActionPoint {
    pub state: Vec<f64>,
    pub action: Action,
}

impl StateActionPoint {
    pub fn new(state: Vec<f64>, action: Action) -> Self {
        Self { state, action }
    }

    pub fn indexed(state: Vec<f64>, action: usize) -> Self {
        Self::new(state, Action::Index(action))
    }

    pub fn continuous(state: Vec<f64>, action: Vec<f64>) -> Self {
        Self::new(state, Action::Vector(action))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KernelConfig {
    sigma: f64,
    action_mode: ActionMode,
    state_dim: usize,
    action_dim: usize,
    diameter: f64,
    kappa_min: f64,
    inv_two_sigma_sq: f64,
}

impl KernelConfig {
    /// `action_dim` is the action vector length for `ContinuousBox` and is
    /// ignored (treated as 1) for `FiniteActions`.
    pub fn new(
        sigma: f64,
        action_mode: ActionMode,
        state_dim: usize,
        action_dim: usize,
        diameter: f64,
    ) -> Result<Self> {
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(Error::config(format!("kernel bandwidth must be positive, got {sigma}")));
        }
        if !(diameter.is_finite() && diameter >= 0.0) {
            return Err(Error::config(format!("domain diameter must be nonnegative, got {diameter}")));
        }
        if state_dim == 0 {
            return Err(Error::config("state dimension must be positive"));
        }
        let action_dim = match action_mode {
            ActionMode::ContinuousBox if action_dim == 0 => {
                return Err(Error::config("continuous action dimension must be positive"))
            }
            ActionMode::ContinuousBox => action_dim,
            ActionMode::FiniteActions => 1,
        };
        let inv_two_sigma_sq = 1.0 / (2.0 * sigma * sigma);
        let kappa_min = (-diameter * diameter * inv_two_sigma_sq).exp();
        if kappa_min <= 0.0 {
            return Err(Error::config(format!(
                "kernel lower bound underflows for sigma={sigma}, diameter={diameter}"
            )));
        }
        Ok(Self {
            sigma,
            action_mode,
            state_dim,
            action_dim,
            diameter,
            kappa_min,
            inv_two_sigma_sq,
        })
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn action_mode(&self) -> ActionMode {
        self.action_mode
    }

    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    /// Length of the encoded action part (1 for finite actions).
    pub fn action_dim(&self) -> usize {
        self.action_dim
    }

    pub fn diameter(&self) -> f64 {
        self.diameter
    }

    pub fn kappa_min(&self) -> f64 {
        self.kappa_min
    }

    pub fn point_len(&self) -> usize {
        self.state_dim + self.action_dim
    }

    /// Same geometry with a different bandwidth.
    pub fn with_sigma(&self, sigma: f64) -> Result<Self> {
        Self::new(sigma, self.action_mode, self.state_dim, self.action_dim, self.diameter)
    }

    /// `1 / (2 sigma^2)`.
    #[inline]
    pub fn inv_two_sigma_sq(&self) -> f64 {
        self.inv_two_sigma_sq
    }

    pub fn encode(&self, p: &StateActionPoint) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(self.point_len());
        self.encode_into(p, &mut out)?;
        Ok(out)
    }

    pub fn encode_into(&self, p: &StateActionPoint, out: &mut Vec<f64>) -> Result<()> {
        if p.state.len() != self.state_dim {
            return Err(Error::Dimension {
                what: "state",
                expected: self.state_dim,
                got: p.state.len(),
            });
        }
        out.extend_from_slice(&p.state);
        self.encode_action_into(&p.action, out)
    }

    pub fn encode_action_into(&self, action: &Action, out: &mut Vec<f64>) -> Result<()> {
        match (self.action_mode, action) {
            (ActionMode::FiniteActions, Action::Index(i)) => out.push(*i as f64),
            (ActionMode::ContinuousBox, Action::Vector(a)) => {
                if a.len() != self.action_dim {
                    return Err(Error::Dimension {
                        what: "action",
                        expected: self.action_dim,
                        got: a.len(),
                    });
                }
                out.extend_from_slice(a);
            }
            (ActionMode::FiniteActions, Action::Vector(_)) => {
                return Err(Error::config("finite-action kernel expects an action index"))
            }
            (ActionMode::ContinuousBox, Action::Index(_)) => {
                return Err(Error::config("continuous-box kernel expects an action vector"))
            }
        }
        Ok(())
    }

    pub fn decode(&self, flat: &[f64]) -> StateActionPoint {
        let (state, action) = flat.split_at(self.state_dim);
        let action = match self.action_mode {
            ActionMode::FiniteActions => Action::Index(action[0] as usize),
            ActionMode::ContinuousBox => Action::Vector(action.to_vec()),
        };
        StateActionPoint::new(state.to_vec(), action)
    }

    #[inline]
    pub fn state_sq_dist(&self, z: &[f64], u: &[f64]) -> f64 {
        sq_dist(&z[..self.state_dim], &u[..self.state_dim])
    }

    #[inline]
    pub fn action_sq_dist(&self, z: &[f64], u: &[f64]) -> f64 {
        let (a, b) = (&z[self.state_dim..], &u[self.state_dim..]);
        match self.action_mode {
            ActionMode::ContinuousBox => sq_dist(a, b),
            ActionMode::FiniteActions => {
                if a[0] == b[0] {
                    0.0
                } else {
                    1.0
                }
            }
        }
    }

    /// Squared metric between two encoded points.
    #[inline]
    pub fn sq_dist(&self, z: &[f64], u: &[f64]) -> f64 {
        match self.action_mode {
            ActionMode::ContinuousBox => sq_dist(z, u),
            ActionMode::FiniteActions => self.state_sq_dist(z, u) + self.action_sq_dist(z, u),
        }
    }

    /// Kernel between two encoded points; no dimension checks.
    #[inline]
    pub fn eval(&self, z: &[f64], u: &[f64]) -> f64 {
        (-self.sq_dist(z, u) * self.inv_two_sigma_sq).exp()
    }

    /// `exp(-d2 / (2 sigma^2))` for a precomputed squared distance.
    #[inline]
    pub fn eval_sq(&self, d2: f64) -> f64 {
        (-d2 * self.inv_two_sigma_sq).exp()
    }
}

#[inline]
pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub fn eval_kernel(cfg: &KernelConfig, z: &StateActionPoint, u: &StateActionPoint) -> Result<f64> {
    let z = cfg.encode(z)?;
    let u = cfg.encode(u)?;
    Ok(cfg.eval(&z, &u))
}

pub fn kernel_lower_bound(cfg: &KernelConfig) -> f64 {
    cfg.kappa_min()
}

/// Diagonal length of an axis-aligned box.
pub fn box_diagonal(lo: &[f64], hi: &[f64]) -> f64 {
    sq_dist(lo, hi).sqrt()
}

fn encode_grid(cfg: &KernelConfig, grid: &[StateActionPoint]) -> Result<Vec<Vec<f64>>> {
    if grid.is_empty() {
        return Err(Error::usage("evaluation grid is empty"));
    }
    grid.iter().map(|p| cfg.encode(p)).collect()
}

fn check_layout(cfg: &KernelConfig, m: &WeightedMeasure) -> Result<()> {
    if m.point_len() != cfg.point_len() {
        return Err(Error::Dimension {
            what: "measure support",
            expected: cfg.point_len(),
            got: m.point_len(),
        });
    }
    Ok(())
}

/// Grid approximation of `sup_z |int kappa(z,.) d(a - b)|`.
pub fn kernel_mean_distance(
    cfg: &KernelConfig,
    a: &WeightedMeasure,
    b: &WeightedMeasure,
    eval_grid: &[StateActionPoint],
) -> Result<f64> {
    check_layout(cfg, a)?;
    check_layout(cfg, b)?;
    let grid = encode_grid(cfg, eval_grid)?;
    Ok(grid
        .iter()
        .map(|z| (a.kernel_integral(cfg, z) - b.kernel_integral(cfg, z)).abs())
        .fold(0.0, f64::max))
}

/// Grid approximation of the stationary-normalized distance
/// `sup_z |int kappa(z,.) d(a - b)| / int kappa(z,.) d mu_ref`.
pub fn stationary_normalized_distance(
    cfg: &KernelConfig,
    a: &WeightedMeasure,
    b: &WeightedMeasure,
    mu_ref: &WeightedMeasure,
    eval_grid: &[StateActionPoint],
) -> Result<f64> {
    check_layout(cfg, a)?;
    check_layout(cfg, b)?;
    check_layout(cfg, mu_ref)?;
    mu_ref.check_probability(1e-9)?;
    let grid = encode_grid(cfg, eval_grid)?;
    Ok(grid
        .iter()
        .map(|z| {
            let num = a.kernel_integral(cfg, z) - b.kernel_integral(cfg, z);
            (num / mu_ref.kernel_integral(cfg, z)).abs()
        })
        .fold(0.0, f64::max))
}

/// Uniform lattice over a box with `per_axis` points per axis, endpoints
/// included (a single point per axis sits at the box centre).
pub fn lattice(lo: &[f64], hi: &[f64], per_axis: usize) -> Vec<Vec<f64>> {
    assert_eq!(lo.len(), hi.len());
    let axes: Vec<Vec<f64>> = lo
        .iter()
        .zip(hi)
        .map(|(&l, &h)| match per_axis {
            0 => Vec::new(),
            1 => vec![0.5 * (l + h)],
            n => (0..n).map(|i| l + (h - l) * i as f64 / (n - 1) as f64).collect(),
        })
        .collect();
    cartesian(&axes)
}

/// Row-major cartesian product (last axis varies fastest).
pub(crate) fn cartesian(axes: &[Vec<f64>]) -> Vec<Vec<f64>> {
    axes.iter().fold(vec![Vec::new()], |acc, axis| {
        acc.iter()
            .flat_map(|prefix| {
                axis.iter().map(move |&v| {
                    let mut p = prefix.clone();
                    p.push(v);
                    p
                })
            })
            .collect()
    })
}

/// States crossed with actions, states outermost.
pub fn product_grid(states: &[Vec<f64>], actions: &[Action]) -> Vec<StateActionPoint> {
    states
        .iter()
        .flat_map(|s| actions.iter().map(move |a| StateActionPoint::new(s.clone(), a.clone())))
        .collect()
}
