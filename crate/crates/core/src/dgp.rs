//! Synthetic protest population.
//!
//! Four nuisance aspects `z1..z4` and a violence flag `v` are Bernoulli draws;
//! the true label is `d = z1 ∧ z2 ∧ z3 ∧ z4 ∧ ¬v`. The outcome follows
//! `y = beta0 + tau·d + beta1·v + beta2·x + ε` with `x, ε` normal.
//! Per unit the draw order is z1, z2, z3, z4, v, x, ε.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationConfig {
    pub p_z1: f64,
    pub p_z2: f64,
    pub p_z3: f64,
    pub p_z4: f64,
    pub p_v: f64,
    pub beta0: f64,
    pub tau: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub noise_sd: f64,
    #[serde(rename = "N")]
    pub n_total: usize,
    pub label_fraction: f64,
    /// Probability that an LLM label is flipped (δ).
    pub llm_error: f64,
    pub seed: u64,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            p_z1: 0.2,
            p_z2: 0.96,
            p_z3: 0.9,
            p_z4: 0.88,
            p_v: 0.05,
            beta0: -2.0,
            tau: 1.0,
            beta1: -5.0,
            beta2: 1.0,
            noise_sd: 1.0,
            n_total: 10_000,
            label_fraction: 0.1,
            llm_error: 0.1,
            seed: 0,
        }
    }
}

impl SimulationConfig {
    pub fn aspect_probabilities(&self) -> [f64; 4] {
        [self.p_z1, self.p_z2, self.p_z3, self.p_z4]
    }

    pub fn validate(&self) -> Result<()> {
        let probs = [
            ("p_z1", self.p_z1),
            ("p_z2", self.p_z2),
            ("p_z3", self.p_z3),
            ("p_z4", self.p_z4),
            ("p_v", self.p_v),
            ("llm_error", self.llm_error),
        ];
        for (name, p) in probs {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidConfig(format!("{name}={p} is not in [0, 1]")));
            }
        }
        for (name, c) in [
            ("beta0", self.beta0),
            ("tau", self.tau),
            ("beta1", self.beta1),
            ("beta2", self.beta2),
        ] {
            if !c.is_finite() {
                return Err(Error::InvalidConfig(format!("{name} is not finite")));
            }
        }
        if !(self.noise_sd > 0.0 && self.noise_sd.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "noise_sd={} must be positive",
                self.noise_sd
            )));
        }
        if self.n_total == 0 {
            return Err(Error::InvalidConfig("N must be at least 1".into()));
        }
        if !(self.label_fraction > 0.0 && self.label_fraction <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "label_fraction={} is not in (0, 1]",
                self.label_fraction
            )));
        }
        Ok(())
    }

    /// Size of the expert-labeled subsample, `⌈label_fraction · N⌉`.
    pub fn n_labeled(&self) -> usize {
        labeled_count(self.label_fraction, self.n_total)
    }
}

pub(crate) fn labeled_count(fraction: f64, n: usize) -> usize {
    // Guard against 0.1 * 10_000 landing a hair above 1000.
    let raw = fraction * n as f64;
    let rounded = raw.round();
    let k = if (raw - rounded).abs() < 1e-9 * raw.max(1.0) {
        rounded
    } else {
        raw.ceil()
    };
    (k as usize).min(n)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PopulationUnit {
    pub z: [u8; 4],
    /// Violent event.
    pub v: u8,
    /// True protest label.
    pub d: u8,
    pub x: f64,
    pub y: f64,
}

impl PopulationUnit {
    pub fn is_violent(&self) -> bool {
        self.v == 1
    }

    pub fn is_protest(&self) -> bool {
        self.d == 1
    }
}

/// Draws `cfg.n_total` units from `rng`.
pub fn generate_population<R: Rng + ?Sized>(
    cfg: &SimulationConfig,
    rng: &mut R,
) -> Result<Vec<PopulationUnit>> {
    cfg.validate()?;
    let probs = cfg.aspect_probabilities();
    let units = (0..cfg.n_total)
        .map(|_| {
            let mut z = [0u8; 4];
            for (zi, &p) in z.iter_mut().zip(&probs) {
                *zi = rng.gen_bool(p) as u8;
            }
            let v = rng.gen_bool(cfg.p_v) as u8;
            let d = (z.iter().all(|&a| a == 1) && v == 0) as u8;
            let x: f64 = StandardNormal.sample(rng);
            let eps: f64 = StandardNormal.sample(rng);
            let y = cfg.beta0
                + cfg.tau * d as f64
                + cfg.beta1 * v as f64
                + cfg.beta2 * x
                + cfg.noise_sd * eps;
            PopulationUnit { z, v, d, x, y }
        })
        .collect();
    Ok(units)
}

/// Closed-form `E[d] = p_z1·p_z2·p_z3·p_z4·(1 − p_v)`.
pub fn true_prevalence(cfg: &SimulationConfig) -> f64 {
    cfg.aspect_probabilities().iter().product::<f64>() * (1.0 - cfg.p_v)
}
