//! Records, datasets, annotation conditions and estimate results.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// A binary class label, stored as the integer 0 or 1 so it can enter a
/// design matrix without conversion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct Label(u8);

impl Label {
    pub const ZERO: Label = Label(0);
    pub const ONE: Label = Label(1);

    pub fn from_bool(b: bool) -> Self {
        Label(b as u8)
    }

    pub fn get(self) -> u8 {
        self.0
    }

    pub fn is_positive(self) -> bool {
        self.0 == 1
    }

    pub fn flipped(self) -> Self {
        Label(1 - self.0)
    }

    pub fn to_scalar<T: Scalar>(self) -> T {
        if self.0 == 1 {
            T::one()
        } else {
            T::zero()
        }
    }
}

impl TryFrom<u8> for Label {
    type Error = Error;

    fn try_from(v: u8) -> Result<Self> {
        match v {
            0 | 1 => Ok(Label(v)),
            other => Err(Error::Format(format!("label must be 0 or 1, got {other}"))),
        }
    }
}

impl From<Label> for u8 {
    fn from(l: Label) -> u8 {
        l.0
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// One unit of analysis: covariates, the dependent variable, and whichever
/// labels were collected for it.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledRecord<T> {
    pub id: String,
    pub y: T,
    pub x: Vec<T>,
    pub gold_label: Option<Label>,
    pub llm_label: Option<Label>,
    /// True iff the unit belongs to the expert-labeled subsample.
    pub sampled: bool,
}

impl<T: Scalar> LabeledRecord<T> {
    /// Builds a record whose `sampled` flag follows gold-label presence.
    pub fn new(
        id: impl Into<String>,
        y: T,
        x: Vec<T>,
        llm_label: Option<Label>,
        gold_label: Option<Label>,
    ) -> Self {
        Self {
            id: id.into(),
            y,
            x,
            sampled: gold_label.is_some(),
            gold_label,
            llm_label,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset<T> {
    /// Column names of the covariates, in record order.
    pub covariates: Vec<String>,
    pub records: Vec<LabeledRecord<T>>,
}

impl<T: Scalar> Dataset<T> {
    pub fn new(covariates: Vec<String>, records: Vec<LabeledRecord<T>>) -> Self {
        Self {
            covariates,
            records,
        }
    }

    /// Validated constructor; rejects any dataset with invariant violations.
    pub fn try_new(covariates: Vec<String>, records: Vec<LabeledRecord<T>>) -> Result<Self> {
        let ds = Self::new(covariates, records);
        match validate_dataset(&ds).into_iter().next() {
            None => Ok(ds),
            Some(v) => Err(Error::InvalidRecord {
                index: v.index,
                reason: v.kind.to_string(),
            }),
        }
    }

    pub fn n_total(&self) -> usize {
        self.records.len()
    }

    pub fn n_labeled(&self) -> usize {
        self.records.iter().filter(|r| r.sampled).count()
    }

    /// Gold labels of the sampled records.
    pub fn gold_labels(&self) -> Vec<Label> {
        self.records
            .iter()
            .filter(|r| r.sampled)
            .filter_map(|r| r.gold_label)
            .collect()
    }

    /// LLM labels for every record; fails if any record lacks one.
    pub fn llm_labels(&self) -> Result<Vec<Label>> {
        self.records
            .iter()
            .enumerate()
            .map(|(i, r)| {
                r.llm_label.ok_or_else(|| Error::InvalidRecord {
                    index: i,
                    reason: "missing llm_label".into(),
                })
            })
            .collect()
    }

    /// (llm_label, gold_label) pairs over the sampled records.
    pub fn paired_labels(&self) -> Result<Vec<(Label, Label)>> {
        self.records
            .iter()
            .enumerate()
            .filter(|(_, r)| r.sampled)
            .map(|(i, r)| match (r.llm_label, r.gold_label) {
                (Some(f), Some(g)) => Ok((f, g)),
                (None, _) => Err(Error::InvalidRecord {
                    index: i,
                    reason: "sampled record missing llm_label".into(),
                }),
                (_, None) => Err(Error::InvalidRecord {
                    index: i,
                    reason: "sampled record missing gold_label".into(),
                }),
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ViolationKind {
    SampledWithoutGold,
    GoldWithoutSampled,
    CovariateCount { expected: usize, got: usize },
    NonFinite(&'static str),
}

impl fmt::Display for ViolationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ViolationKind::SampledWithoutGold => write!(f, "sampled=true but gold_label is absent"),
            ViolationKind::GoldWithoutSampled => write!(f, "gold_label present but sampled=false"),
            ViolationKind::CovariateCount { expected, got } => {
                write!(f, "expected {expected} covariates, got {got}")
            }
            ViolationKind::NonFinite(field) => write!(f, "{field} is not finite"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub index: usize,
    pub kind: ViolationKind,
}

/// Lists every invariant violation in `d`, in record order.
///
/// Labels cannot be out of range because [`Label`] only admits 0 and 1.
pub fn validate_dataset<T: Scalar>(d: &Dataset<T>) -> Vec<Violation> {
    let k = d.covariates.len();
    let mut out = Vec::new();
    for (index, r) in d.records.iter().enumerate() {
        match (r.sampled, r.gold_label.is_some()) {
            (true, false) => out.push(Violation {
                index,
                kind: ViolationKind::SampledWithoutGold,
            }),
            (false, true) => out.push(Violation {
                index,
                kind: ViolationKind::GoldWithoutSampled,
            }),
            _ => {}
        }
        if r.x.len() != k {
            out.push(Violation {
                index,
                kind: ViolationKind::CovariateCount {
                    expected: k,
                    got: r.x.len(),
                },
            });
        }
        if !r.y.is_finite() {
            out.push(Violation {
                index,
                kind: ViolationKind::NonFinite("y"),
            });
        }
        if r.x.iter().any(|v| !v.is_finite()) {
            out.push(Violation {
                index,
                kind: ViolationKind::NonFinite("x"),
            });
        }
    }
    out
}

/// Which codebook an annotator receives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Codebook {
    Complete,
    Incomplete,
}

/// Codebook given to the expert annotators; `None` means no gold labels are collected.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExpertCodebook {
    Complete,
    Incomplete,
    None,
}

impl ExpertCodebook {
    pub fn codebook(self) -> Option<Codebook> {
        match self {
            ExpertCodebook::Complete => Some(Codebook::Complete),
            ExpertCodebook::Incomplete => Some(Codebook::Incomplete),
            ExpertCodebook::None => None,
        }
    }
}

/// The codebook each annotator receives. Each of the six combinations is one
/// row of the approaches table (see [`AnnotationCondition::row_name`]).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct AnnotationCondition {
    pub expert_codebook: ExpertCodebook,
    pub llm_codebook: Codebook,
}

impl AnnotationCondition {
    pub const PRAGMATIST: Self = Self::new(ExpertCodebook::Complete, Codebook::Complete);
    pub const PROCEDURAL_ERROR: Self = Self::new(ExpertCodebook::Incomplete, Codebook::Complete);
    pub const RELIABILITY_ERROR: Self = Self::new(ExpertCodebook::Complete, Codebook::Incomplete);
    pub const CONCEPTUALIZATION_ERROR: Self =
        Self::new(ExpertCodebook::Incomplete, Codebook::Incomplete);
    pub const OPTIMIST: Self = Self::new(ExpertCodebook::None, Codebook::Complete);
    pub const SURFACE_FORM_OPTIMIST: Self = Self::new(ExpertCodebook::None, Codebook::Incomplete);

    pub const fn new(expert_codebook: ExpertCodebook, llm_codebook: Codebook) -> Self {
        Self {
            expert_codebook,
            llm_codebook,
        }
    }

    pub fn all() -> [Self; 6] {
        [
            Self::PRAGMATIST,
            Self::PROCEDURAL_ERROR,
            Self::RELIABILITY_ERROR,
            Self::CONCEPTUALIZATION_ERROR,
            Self::OPTIMIST,
            Self::SURFACE_FORM_OPTIMIST,
        ]
    }

    /// Name of the approaches-table row this condition realizes.
    ///
    /// The pessimist row has no LLM labels; it is reached by running the
    /// pessimist estimator under a condition with a complete expert codebook.
    pub fn row_name(&self) -> &'static str {
        use Codebook as C;
        use ExpertCodebook as E;
        match (self.expert_codebook, self.llm_codebook) {
            (E::Complete, C::Complete) => "Pragmatist",
            (E::Incomplete, C::Complete) => "Procedural error",
            (E::Complete, C::Incomplete) => "Reliability error",
            (E::Incomplete, C::Incomplete) => "Conceptualization error",
            (E::None, C::Complete) => "Optimist",
            (E::None, C::Incomplete) => "Optimist (surface-form codebook)",
        }
    }

    /// Short stable key used in file output, e.g. `complete/incomplete`.
    pub fn key(&self) -> String {
        let e = match self.expert_codebook {
            ExpertCodebook::Complete => "complete",
            ExpertCodebook::Incomplete => "incomplete",
            ExpertCodebook::None => "none",
        };
        let l = match self.llm_codebook {
            Codebook::Complete => "complete",
            Codebook::Incomplete => "incomplete",
        };
        format!("{e}/{l}")
    }

    pub fn parse_key(s: &str) -> Result<Self> {
        let (e, l) = s
            .split_once('/')
            .ok_or_else(|| Error::Format(format!("bad condition key '{s}'")))?;
        let expert = match e {
            "complete" => ExpertCodebook::Complete,
            "incomplete" => ExpertCodebook::Incomplete,
            "none" => ExpertCodebook::None,
            _ => return Err(Error::Format(format!("bad expert codebook '{e}'"))),
        };
        let llm = match l {
            "complete" => Codebook::Complete,
            "incomplete" => Codebook::Incomplete,
            _ => return Err(Error::Format(format!("bad llm codebook '{l}'"))),
        };
        Ok(Self::new(expert, llm))
    }
}

impl fmt::Display for AnnotationCondition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.key())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EstimatorKind {
    Pessimist,
    Optimist,
    Ppi,
    Ols,
    Dsl,
}

impl fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EstimatorKind::Pessimist => "pessimist",
            EstimatorKind::Optimist => "optimist",
            EstimatorKind::Ppi => "ppi",
            EstimatorKind::Ols => "ols",
            EstimatorKind::Dsl => "dsl",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimateResult<T> {
    pub estimator: EstimatorKind,
    pub point: T,
    /// Normal-approximation interval half-width, when the estimator has one.
    pub half_width: Option<T>,
    /// Number of gold-labeled units used.
    pub n_used: usize,
    /// Number of units in the full population used.
    #[serde(rename = "N_used")]
    pub big_n_used: usize,
}

impl<T: Scalar> EstimateResult<T> {
    pub fn interval(&self) -> Option<(T, T)> {
        self.half_width
            .map(|w| (self.point - w, self.point + w))
    }
}
