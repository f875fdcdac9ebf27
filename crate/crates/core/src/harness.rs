//! Monte Carlo experiment grid.
//!
//! A cell is one (condition, δ, estimator) combination. Replicate `r` of a
//! grid runs with seed `seed_base + r`; inside [`run_cell`] the population
//! and annotation streams are derived by hashing that seed together with
//! the cell key, so cells never share randomness and results do not depend
//! on scheduling.

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::annotation::{annotate, AnnotatedPopulation};
use crate::dgp::{generate_population, true_prevalence, SimulationConfig};
use crate::error::{Error, Result};
use crate::estimators::{
    dsl_regress, label_regression, ols, optimist_mean, pessimist_mean, ppi_mean, LabelSource,
    RegressionSpec,
};
use crate::linalg::Matrix;
use crate::model::{AnnotationCondition, Codebook, EstimateResult, EstimatorKind, ExpertCodebook};
use crate::stream::{derive_seed, rng_for, ANNOTATION_STREAM, POPULATION_STREAM};

/// Estimators the harness can run on a simulated replicate.
///
/// The three prevalence estimators target `E[d]`; the regression variants
/// target the label coefficient `tau` of `y ~ label + x + 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CellEstimator {
    /// Gold-label mean on the expert subsample.
    Pessimist,
    /// LLM-label mean on the full population.
    Optimist,
    /// Prediction-powered mean.
    Ppi,
    /// OLS on the expert subsample only ("small N").
    PessimistOls,
    /// OLS on LLM labels for every unit, uncorrected.
    OptimistOls,
    /// OLS on expert labels for every unit (reference fit).
    ExpertOls,
    /// Design-based corrected regression.
    Dsl,
}

impl CellEstimator {
    pub const ALL: [CellEstimator; 7] = [
        CellEstimator::Pessimist,
        CellEstimator::Optimist,
        CellEstimator::Ppi,
        CellEstimator::PessimistOls,
        CellEstimator::OptimistOls,
        CellEstimator::ExpertOls,
        CellEstimator::Dsl,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            CellEstimator::Pessimist => "pessimist",
            CellEstimator::Optimist => "optimist",
            CellEstimator::Ppi => "ppi",
            CellEstimator::PessimistOls => "pessimist_ols",
            CellEstimator::OptimistOls => "optimist_ols",
            CellEstimator::ExpertOls => "expert_ols",
            CellEstimator::Dsl => "dsl",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| Error::Format(format!("unknown estimator '{s}'")))
    }

    pub fn is_regression(&self) -> bool {
        matches!(
            self,
            CellEstimator::PessimistOls
                | CellEstimator::OptimistOls
                | CellEstimator::ExpertOls
                | CellEstimator::Dsl
        )
    }

    pub fn needs_expert_labels(&self) -> bool {
        !matches!(self, CellEstimator::Optimist | CellEstimator::OptimistOls)
    }

    fn code(&self) -> u64 {
        Self::ALL.iter().position(|e| e == self).unwrap() as u64
    }

    /// The parameter this estimator's replicates are compared against.
    pub fn truth(&self, cfg: &SimulationConfig) -> f64 {
        if self.is_regression() {
            cfg.tau
        } else {
            true_prevalence(cfg)
        }
    }
}

impl fmt::Display for CellEstimator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

fn condition_code(c: &AnnotationCondition) -> u64 {
    let e = match c.expert_codebook {
        ExpertCodebook::Complete => 0,
        ExpertCodebook::Incomplete => 1,
        ExpertCodebook::None => 2,
    };
    let l = match c.llm_codebook {
        Codebook::Complete => 0,
        Codebook::Incomplete => 1,
    };
    e * 2 + l
}

pub fn check_compatible(cond: &AnnotationCondition, est: CellEstimator) -> Result<()> {
    if est.needs_expert_labels() && cond.expert_codebook == ExpertCodebook::None {
        return Err(Error::IncompatibleCondition {
            estimator: est.name().to_string(),
            row: cond.row_name(),
            reason: "this condition collects no expert labels".into(),
        });
    }
    Ok(())
}

/// Generates and annotates one replicate population.
pub fn simulate_replicate(
    cfg: &SimulationConfig,
    cond: AnnotationCondition,
    est: CellEstimator,
    seed: u64,
) -> Result<AnnotatedPopulation> {
    let stream_seed = derive_seed(&[
        seed,
        condition_code(&cond),
        cfg.llm_error.to_bits(),
        est.code(),
    ]);
    let pop = generate_population(cfg, &mut rng_for(stream_seed, POPULATION_STREAM))?;
    annotate(
        pop,
        cond,
        cfg.llm_error,
        cfg.label_fraction,
        &mut rng_for(stream_seed, ANNOTATION_STREAM),
    )
}

/// One end-to-end replicate: population, annotation, estimate.
pub fn run_cell(
    cfg: &SimulationConfig,
    cond: AnnotationCondition,
    est: CellEstimator,
    seed: u64,
) -> Result<EstimateResult<f64>> {
    cfg.validate()?;
    check_compatible(&cond, est)?;
    let ann = simulate_replicate(cfg, cond, est, seed)?;
    estimate_on(&ann, est)
}

fn estimate_on(ann: &AnnotatedPopulation, est: CellEstimator) -> Result<EstimateResult<f64>> {
    let spec = RegressionSpec::label_on_covariates(1);
    match est {
        CellEstimator::Pessimist => pessimist_mean(ann.expert_labels.as_deref().unwrap_or(&[])),
        CellEstimator::Optimist => optimist_mean(&ann.llm_labels),
        CellEstimator::Ppi => {
            let gold = ann.expert_labels.as_deref().unwrap_or(&[]);
            let paired: Vec<_> = ann
                .sampled_indices
                .iter()
                .zip(gold)
                .map(|(&i, &g)| (ann.llm_labels[i], g))
                .collect();
            ppi_mean(&ann.llm_labels, &paired)
        }
        CellEstimator::PessimistOls => label_regression(&ann.to_dataset(), &spec, LabelSource::Gold),
        CellEstimator::OptimistOls => label_regression(&ann.to_dataset(), &spec, LabelSource::Llm),
        CellEstimator::ExpertOls => {
            let labels = ann.full_expert_labels().unwrap_or_default();
            let rows: Vec<Vec<f64>> = ann
                .units
                .iter()
                .zip(&labels)
                .map(|(u, l)| vec![l.to_scalar(), u.x, 1.0])
                .collect();
            let y: Vec<f64> = ann.units.iter().map(|u| u.y).collect();
            let beta = ols(&Matrix::from_rows(&rows)?, &y)?;
            Ok(EstimateResult {
                estimator: EstimatorKind::Ols,
                point: beta[0],
                half_width: None,
                n_used: ann.n_total(),
                big_n_used: ann.n_total(),
            })
        }
        CellEstimator::Dsl => {
            let pi = ann.n_labeled() as f64 / ann.n_total() as f64;
            dsl_regress(&ann.to_dataset(), &spec, pi)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentGrid {
    pub base_config: SimulationConfig,
    pub deltas: Vec<f64>,
    pub conditions: Vec<AnnotationCondition>,
    pub estimators: Vec<CellEstimator>,
    pub n_seeds: usize,
    pub seed_base: u64,
}

impl ExperimentGrid {
    pub fn validate(&self) -> Result<()> {
        self.base_config.validate()?;
        if self.n_seeds == 0 {
            return Err(Error::InvalidConfig("n_seeds must be at least 1".into()));
        }
        if let Some(d) = self.deltas.iter().find(|d| !(0.0..=1.0).contains(*d)) {
            return Err(Error::InvalidConfig(format!("delta {d} is not in [0, 1]")));
        }
        if self.deltas.is_empty() || self.conditions.is_empty() || self.estimators.is_empty() {
            return Err(Error::InvalidConfig(
                "grid needs at least one delta, condition and estimator".into(),
            ));
        }
        Ok(())
    }

    /// Cells in output order: condition, then delta, then estimator.
    pub fn cells(&self) -> Vec<(AnnotationCondition, f64, CellEstimator)> {
        let mut out = Vec::new();
        for &c in &self.conditions {
            for &d in &self.deltas {
                for &e in &self.estimators {
                    out.push((c, d, e));
                }
            }
        }
        out
    }

    /// DSL over both codebooks and δ ∈ {0.05, 0.10, 0.20, 0.30}, 250 seeds.
    pub fn delta_sweep() -> Self {
        Self {
            base_config: SimulationConfig::default(),
            deltas: vec![0.05, 0.10, 0.20, 0.30],
            conditions: vec![
                AnnotationCondition::PRAGMATIST,
                AnnotationCondition::CONCEPTUALIZATION_ERROR,
            ],
            estimators: vec![CellEstimator::Dsl],
            n_seeds: 250,
            seed_base: 20_250,
        }
    }

    /// Four regression strategies at δ = 0.1 over both codebooks, 50 seeds.
    pub fn strategy_comparison() -> Self {
        Self {
            deltas: vec![0.10],
            estimators: vec![
                CellEstimator::ExpertOls,
                CellEstimator::PessimistOls,
                CellEstimator::OptimistOls,
                CellEstimator::Dsl,
            ],
            n_seeds: 50,
            seed_base: 7_000,
            ..Self::delta_sweep()
        }
    }

    /// DSL under the four conditions that collect both kinds of label, 50 seeds.
    pub fn condition_matrix() -> Self {
        Self {
            conditions: vec![
                AnnotationCondition::PRAGMATIST,
                AnnotationCondition::PROCEDURAL_ERROR,
                AnnotationCondition::RELIABILITY_ERROR,
                AnnotationCondition::CONCEPTUALIZATION_ERROR,
            ],
            deltas: vec![0.10],
            estimators: vec![CellEstimator::Dsl],
            n_seeds: 50,
            seed_base: 9_000,
            ..Self::delta_sweep()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aggregate {
    pub mean: f64,
    pub p2_5: f64,
    pub p97_5: f64,
    pub covers_truth: bool,
}

/// Percentile of sorted data with linear interpolation between the closest
/// order statistics (rank `q·(n−1)`).
pub fn percentile(sorted: &[f64], q: f64) -> f64 {
    let h = q * (sorted.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Mean and central 95% empirical band of replicate estimates.
pub fn aggregate(points: &[f64], truth: f64) -> Result<Aggregate> {
    if points.is_empty() {
        return Err(Error::TooFewObservations {
            what: "aggregation",
            required: 1,
            got: 0,
        });
    }
    if points.iter().any(|p| !p.is_finite()) {
        return Err(Error::Format("non-finite replicate estimate".into()));
    }
    let mut sorted = points.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mean = points.iter().sum::<f64>() / points.len() as f64;
    let p2_5 = percentile(&sorted, 0.025);
    let p97_5 = percentile(&sorted, 0.975);
    Ok(Aggregate {
        mean,
        p2_5,
        p97_5,
        covers_truth: p2_5 <= truth && truth <= p97_5,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub condition: AnnotationCondition,
    pub delta: f64,
    pub estimator: CellEstimator,
    pub mean_estimate: f64,
    pub p2_5: f64,
    pub p97_5: f64,
    pub covers_truth: bool,
    pub truth: f64,
}

impl ExperimentSummary {
    pub fn band_width(&self) -> f64 {
        self.p97_5 - self.p2_5
    }
}

/// Runs every replicate of every cell and aggregates per cell.
///
/// Work is spread over `parallelism` threads; results are merged by cell
/// and replicate index, so the output does not depend on `parallelism`.
pub fn run_grid(grid: &ExperimentGrid, parallelism: usize) -> Result<Vec<ExperimentSummary>> {
    grid.validate()?;
    let cells = grid.cells();
    let jobs: Vec<(usize, usize)> = (0..cells.len())
        .flat_map(|c| (0..grid.n_seeds).map(move |r| (c, r)))
        .collect();

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(parallelism.max(1))
        .build()
        .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?;

    let results: Vec<Result<f64>> = pool.install(|| {
        jobs.par_iter()
            .map(|&(c, r)| {
                let (cond, delta, est) = cells[c];
                let cfg = SimulationConfig {
                    llm_error: delta,
                    ..grid.base_config
                };
                run_cell(&cfg, cond, est, grid.seed_base.wrapping_add(r as u64))
                    .map(|e| e.point)
                    .map_err(|source| Error::Cell {
                        condition: cond.key(),
                        delta,
                        estimator: est.name().to_string(),
                        replicate: r,
                        source: Box::new(source),
                    })
            })
            .collect()
    });

    let mut summaries = Vec::with_capacity(cells.len());
    let mut it = results.into_iter();
    for &(condition, delta, estimator) in &cells {
        let points = it
            .by_ref()
            .take(grid.n_seeds)
            .collect::<Result<Vec<f64>>>()?;
        let cfg = SimulationConfig {
            llm_error: delta,
            ..grid.base_config
        };
        let truth = estimator.truth(&cfg);
        let agg = aggregate(&points, truth)?;
        summaries.push(ExperimentSummary {
            condition,
            delta,
            estimator,
            mean_estimate: agg.mean,
            p2_5: agg.p2_5,
            p97_5: agg.p97_5,
            covers_truth: agg.covers_truth,
            truth,
        });
    }
    Ok(summaries)
}
