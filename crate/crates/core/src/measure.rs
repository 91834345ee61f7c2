//! Weighted empirical measures with a global scale factor.
//!
//! A measure is `sum_k s * b_k * delta_{u_k}` where `s` is `global_scale` and
//! `b_k` the stored base weight. Mixing `m <- (1 - r) m + r w delta_z`
//! multiplies `s` by `1 - r` and appends `r w / s`, so each update is O(1)
//! apart from the push.

use crate::error::{Error, Result};
use crate::kernel::{KernelConfig, StateActionPoint};

/// Below this the scale is folded into the base weights.
const RENORMALIZE_BELOW: f64 = 1e-150;

#[derive(Debug, Clone, PartialEq)]
pub struct WeightedMeasure {
    point_len: usize,
    coords: Vec<f64>,
    base_weights: Vec<f64>,
    global_scale: f64,
    is_probability: bool,
}

impl WeightedMeasure {
    /// The zero signed measure.
    pub fn zero(point_len: usize) -> Self {
        Self {
            point_len,
            coords: Vec::new(),
            base_weights: Vec::new(),
            global_scale: 1.0,
            is_probability: false,
        }
    }

    /// Probability measure concentrated on one encoded point.
    pub fn dirac(point: &[f64]) -> Self {
        Self {
            point_len: point.len(),
            coords: point.to_vec(),
            base_weights: vec![1.0],
            global_scale: 1.0,
            is_probability: true,
        }
    }

    /// Builds a measure from flat encoded support rows and effective weights.
    pub fn from_flat(
        point_len: usize,
        coords: Vec<f64>,
        weights: Vec<f64>,
        is_probability: bool,
    ) -> Result<Self> {
        Self::from_parts(point_len, coords, weights, 1.0, is_probability)
    }

    pub(crate) fn from_parts(
        point_len: usize,
        coords: Vec<f64>,
        base_weights: Vec<f64>,
        global_scale: f64,
        is_probability: bool,
    ) -> Result<Self> {
        if point_len == 0 || coords.len() != point_len * base_weights.len() {
            return Err(Error::Dimension {
                what: "measure support",
                expected: point_len * base_weights.len(),
                got: coords.len(),
            });
        }
        if !(global_scale.is_finite() && global_scale > 0.0) {
            return Err(Error::Format(format!("global scale must be positive, got {global_scale}")));
        }
        let m = Self {
            point_len,
            coords,
            base_weights,
            global_scale,
            is_probability,
        };
        if is_probability {
            m.check_probability(1e-9)?;
        }
        Ok(m)
    }

    pub fn from_points(
        cfg: &KernelConfig,
        points: &[StateActionPoint],
        weights: &[f64],
        is_probability: bool,
    ) -> Result<Self> {
        if points.len() != weights.len() {
            return Err(Error::Dimension {
                what: "measure weights",
                expected: points.len(),
                got: weights.len(),
            });
        }
        let mut coords = Vec::with_capacity(points.len() * cfg.point_len());
        for p in points {
            cfg.encode_into(p, &mut coords)?;
        }
        Self::from_flat(cfg.point_len(), coords, weights.to_vec(), is_probability)
    }

    pub fn len(&self) -> usize {
        self.base_weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.base_weights.is_empty()
    }

    pub fn point_len(&self) -> usize {
        self.point_len
    }

    pub fn point(&self, k: usize) -> &[f64] {
        &self.coords[k * self.point_len..(k + 1) * self.point_len]
    }

    pub fn points(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.coords.chunks_exact(self.point_len)
    }

    /// Flat row-major support matrix.
    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn base_weights(&self) -> &[f64] {
        &self.base_weights
    }

    pub fn global_scale(&self) -> f64 {
        self.global_scale
    }

    pub fn is_probability(&self) -> bool {
        self.is_probability
    }

    pub fn effective_weight(&self, k: usize) -> f64 {
        self.global_scale * self.base_weights[k]
    }

    pub fn effective_weights(&self) -> Vec<f64> {
        self.base_weights.iter().map(|b| self.global_scale * b).collect()
    }

    pub fn total_mass(&self) -> f64 {
        self.global_scale * self.base_weights.iter().sum::<f64>()
    }

    /// Nonnegative effective weights summing to one within `tol`.
    pub fn check_probability(&self, tol: f64) -> Result<()> {
        if self.base_weights.iter().any(|&b| b < 0.0) {
            return Err(Error::usage("reference measure has negative weights"));
        }
        let mass = self.total_mass();
        if (mass - 1.0).abs() > tol {
            return Err(Error::usage(format!("reference measure has total mass {mass}, expected 1")));
        }
        Ok(())
    }

    /// `int kappa(z, u) m(du)` for an encoded point `z`.
    pub fn kernel_integral(&self, cfg: &KernelConfig, z: &[f64]) -> f64 {
        self.kernel_integral_prefix(cfg, z, self.len())
    }

    /// Kernel integral over the first `n` support entries.
    pub(crate) fn kernel_integral_prefix(&self, cfg: &KernelConfig, z: &[f64], n: usize) -> f64 {
        let sum: f64 = self
            .points()
            .take(n)
            .zip(&self.base_weights)
            .map(|(u, b)| b * cfg.eval(z, u))
            .sum();
        self.global_scale * sum
    }

    /// `m <- retain * m + added * delta_z`.
    fn mix(&mut self, z: &[f64], retain: f64, added: f64) -> Result<()> {
        if z.len() != self.point_len {
            return Err(Error::Dimension {
                what: "support point",
                expected: self.point_len,
                got: z.len(),
            });
        }
        self.global_scale *= retain;
        if self.global_scale == 0.0 {
            self.base_weights.iter_mut().for_each(|b| *b = 0.0);
            self.global_scale = 1.0;
        }
        self.coords.extend_from_slice(z);
        self.base_weights.push(added / self.global_scale);
        if self.global_scale < RENORMALIZE_BELOW {
            self.renormalize_scale();
        }
        Ok(())
    }

    /// Folds the global scale into the base weights.
    pub fn renormalize_scale(&mut self) {
        if self.global_scale == 1.0 {
            return;
        }
        let s = self.global_scale;
        self.base_weights.iter_mut().for_each(|b| *b *= s);
        self.global_scale = 1.0;
    }
}

/// `mu <- (1 - beta) mu + beta delta_{z_new}`.
pub fn mu_update(mu: &mut WeightedMeasure, z_new: &[f64], beta: f64) -> Result<()> {
    if !mu.is_probability {
        return Err(Error::usage("mu_update requires a probability measure"));
    }
    if !(beta > 0.0 && beta <= 1.0) {
        return Err(Error::usage(format!("beta must lie in (0, 1], got {beta}")));
    }
    mu.mix(z_new, 1.0 - beta, beta)
}

/// `nu <- (1 - alpha) nu + alpha y delta_{z_prev}`.
pub fn nu_update(nu: &mut WeightedMeasure, z_prev: &[f64], y: f64, alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::usage(format!("alpha must lie in (0, 1], got {alpha}")));
    }
    nu.mix(z_prev, 1.0 - alpha, alpha * y)
}

/// Sum of absolute effective weights; an upper bound on the total variation norm.
pub fn total_variation(nu: &WeightedMeasure) -> f64 {
    nu.global_scale * nu.base_weights.iter().map(|b| b.abs()).sum::<f64>()
}

/// `Phi_mu[nu](z)`: the kernel integral of `nu` normalized by that of `mu`.
pub fn reconstruct_q(
    cfg: &KernelConfig,
    nu: &WeightedMeasure,
    mu: &WeightedMeasure,
    z: &StateActionPoint,
) -> Result<f64> {
    if mu.is_empty() {
        return Err(Error::usage("reference measure has empty support"));
    }
    let z = cfg.encode(z)?;
    Ok(reconstruct_q_encoded(cfg, nu, mu, &z))
}

pub(crate) fn reconstruct_q_encoded(
    cfg: &KernelConfig,
    nu: &WeightedMeasure,
    mu: &WeightedMeasure,
    z: &[f64],
) -> f64 {
    if nu.is_empty() {
        return 0.0;
    }
    nu.kernel_integral(cfg, z) / mu.kernel_integral(cfg, z)
}
