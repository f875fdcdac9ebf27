//! Expert and LLM annotation of a simulated population.

use rand::seq::index;
use rand::Rng;

use crate::dgp::{labeled_count, PopulationUnit};
use crate::error::{Error, Result};
use crate::model::{AnnotationCondition, Codebook, Dataset, LabeledRecord, Label};
use crate::scalar::Scalar;

/// Expert label: deterministic given the codebook.
///
/// The incomplete codebook does not exclude violent events, so it yields `d ∨ v`.
pub fn expert_label(unit: &PopulationUnit, codebook: Codebook) -> Label {
    match codebook {
        Codebook::Complete => Label::from_bool(unit.d == 1),
        Codebook::Incomplete => Label::from_bool(unit.d == 1 || unit.v == 1),
    }
}

/// LLM label: the expert label under the same codebook, flipped when one
/// uniform draw falls at or below `delta`.
pub fn llm_label<R: Rng + ?Sized>(
    unit: &PopulationUnit,
    codebook: Codebook,
    delta: f64,
    rng: &mut R,
) -> Result<Label> {
    check_delta(delta)?;
    Ok(flip(expert_label(unit, codebook), delta, rng))
}

fn check_delta(delta: f64) -> Result<()> {
    if (0.0..=1.0).contains(&delta) {
        Ok(())
    } else {
        Err(Error::InvalidConfig(format!("delta={delta} is not in [0, 1]")))
    }
}

fn flip<R: Rng + ?Sized>(label: Label, delta: f64, rng: &mut R) -> Label {
    // P ~ U(0,1]; flip iff P <= delta, so delta = 0 never flips and delta = 1 always does.
    let p: f64 = 1.0 - rng.gen::<f64>();
    if p <= delta {
        label.flipped()
    } else {
        label
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnnotatedPopulation {
    pub units: Vec<PopulationUnit>,
    pub condition: AnnotationCondition,
    /// Expert labels aligned with `sampled_indices`; absent when the
    /// condition collects no gold labels.
    pub expert_labels: Option<Vec<Label>>,
    pub llm_labels: Vec<Label>,
    /// Ascending, unique indices of the expert-labeled subsample.
    pub sampled_indices: Vec<usize>,
}

impl AnnotatedPopulation {
    pub fn n_total(&self) -> usize {
        self.units.len()
    }

    pub fn n_labeled(&self) -> usize {
        self.sampled_indices.len()
    }

    /// Expert labels for every unit, as if the whole population had been
    /// annotated under the condition's expert codebook.
    pub fn full_expert_labels(&self) -> Option<Vec<Label>> {
        let cb = self.condition.expert_codebook.codebook()?;
        Some(self.units.iter().map(|u| expert_label(u, cb)).collect())
    }

    /// Dataset view: covariate `x`, outcome `y`, LLM labels everywhere and
    /// gold labels on the sampled units.
    pub fn to_dataset<T: Scalar>(&self) -> Dataset<T> {
        let mut gold = vec![None; self.units.len()];
        if let Some(labels) = &self.expert_labels {
            for (&i, &l) in self.sampled_indices.iter().zip(labels) {
                gold[i] = Some(l);
            }
        }
        let records = self
            .units
            .iter()
            .zip(&self.llm_labels)
            .zip(gold)
            .enumerate()
            .map(|(i, ((u, &llm), g))| {
                LabeledRecord::new(
                    i.to_string(),
                    T::lit(u.y),
                    vec![T::lit(u.x)],
                    Some(llm),
                    g,
                )
            })
            .collect();
        Dataset::new(vec!["x".into()], records)
    }
}

/// Annotates `pop` under `cond`.
///
/// LLM labels are drawn first, one uniform per unit in index order; the
/// expert subsample is then a simple random sample without replacement of
/// `⌈label_fraction · N⌉` units.
pub fn annotate<R: Rng + ?Sized>(
    pop: Vec<PopulationUnit>,
    cond: AnnotationCondition,
    delta: f64,
    label_fraction: f64,
    rng: &mut R,
) -> Result<AnnotatedPopulation> {
    if pop.is_empty() {
        return Err(Error::InvalidConfig("cannot annotate an empty population".into()));
    }
    check_delta(delta)?;
    let expert_cb = cond.expert_codebook.codebook();
    if expert_cb.is_some() && !(label_fraction > 0.0 && label_fraction <= 1.0) {
        return Err(Error::InvalidConfig(format!(
            "label_fraction={label_fraction} must be in (0, 1] when expert labels are collected"
        )));
    }

    let llm_labels: Vec<Label> = pop
        .iter()
        .map(|u| flip(expert_label(u, cond.llm_codebook), delta, rng))
        .collect();

    let (sampled_indices, expert_labels) = match expert_cb {
        Some(cb) => {
            let n = labeled_count(label_fraction, pop.len()).max(1);
            let mut idx = index::sample(rng, pop.len(), n).into_vec();
            idx.sort_unstable();
            let labels = idx.iter().map(|&i| expert_label(&pop[i], cb)).collect();
            (idx, Some(labels))
        }
        None => (Vec::new(), None),
    };

    Ok(AnnotatedPopulation {
        units: pop,
        condition: cond,
        expert_labels,
        llm_labels,
        sampled_indices,
    })
}
