//! Prevalence and regression estimators.
//!
//! Three prevalence estimators cover the gold-only, LLM-only and
//! prediction-powered regimes. Two regression estimators fit the analyst
//! model `y ~ label + covariates + 1`: plain least squares on whichever
//! labels are supplied, and a design-based correction that combines LLM
//! labels everywhere with gold labels on a known-probability subsample.
//!
//! Empirical variances divide by the sample size (not `n − 1`).

use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::linalg::{least_squares, solve_square, Matrix};
use crate::model::{Dataset, EstimateResult, EstimatorKind, LabeledRecord, Label};
use crate::scalar::{mean, Scalar};

pub const DEFAULT_ALPHA: f64 = 0.05;

/// Two-sided normal multiplier for error level `alpha`.
///
/// `alpha = 0.05` gives exactly 1.96; other levels use the standard normal
/// quantile `Φ⁻¹(1 − α/2)`.
pub fn normal_multiplier<T: Scalar>(alpha: f64) -> Result<T> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidConfig(format!("alpha={alpha} is not in (0, 1)")));
    }
    if alpha == DEFAULT_ALPHA {
        return Ok(T::lit(1.96));
    }
    let z = Normal::standard().inverse_cdf(1.0 - alpha / 2.0);
    Ok(T::lit(z))
}

fn need(what: &'static str, required: usize, got: usize) -> Result<()> {
    if got < required {
        Err(Error::TooFewObservations {
            what,
            required,
            got,
        })
    } else {
        Ok(())
    }
}

/// Mean and divide-by-n variance.
fn moments<T: Scalar>(values: &[T]) -> (T, T) {
    let m = mean(values.iter().copied());
    let var = mean(values.iter().map(|&v| (v - m) * (v - m)));
    (m, var)
}

fn as_scalars<T: Scalar>(labels: &[Label]) -> Vec<T> {
    labels.iter().map(|l| l.to_scalar()).collect()
}

/// Gold-only prevalence: sample mean of the gold labels with a
/// `1.96·sqrt(σ̂²_y / n)` half-width.
pub fn pessimist_mean<T: Scalar>(gold: &[Label]) -> Result<EstimateResult<T>> {
    pessimist_mean_at(gold, DEFAULT_ALPHA)
}

pub fn pessimist_mean_at<T: Scalar>(gold: &[Label], alpha: f64) -> Result<EstimateResult<T>> {
    need("the pessimist interval", 2, gold.len())?;
    let z: T = normal_multiplier(alpha)?;
    let n = gold.len();
    let (point, var) = moments(&as_scalars::<T>(gold));
    Ok(EstimateResult {
        estimator: EstimatorKind::Pessimist,
        point,
        half_width: Some(z * (var / T::from_count(n)).sqrt()),
        n_used: n,
        big_n_used: 0,
    })
}

/// LLM-only prevalence: sample mean of the LLM labels with a
/// `1.96·sqrt(σ̂²_f / N)` half-width.
pub fn optimist_mean<T: Scalar>(llm: &[Label]) -> Result<EstimateResult<T>> {
    optimist_mean_at(llm, DEFAULT_ALPHA)
}

pub fn optimist_mean_at<T: Scalar>(llm: &[Label], alpha: f64) -> Result<EstimateResult<T>> {
    need("the optimist interval", 2, llm.len())?;
    let z: T = normal_multiplier(alpha)?;
    let big_n = llm.len();
    let (point, var) = moments(&as_scalars::<T>(llm));
    Ok(EstimateResult {
        estimator: EstimatorKind::Optimist,
        point,
        half_width: Some(z * (var / T::from_count(big_n)).sqrt()),
        n_used: 0,
        big_n_used: big_n,
    })
}

/// Prediction-powered prevalence.
///
/// `llm` holds the LLM label of every unit; `paired` holds
/// `(llm_label, gold_label)` for the gold-labeled units. The LLM mean is
/// debiased by the mean discrepancy on the paired set (the rectifier), and
/// the interval adds the variances of both parts.
pub fn ppi_mean<T: Scalar>(llm: &[Label], paired: &[(Label, Label)]) -> Result<EstimateResult<T>> {
    ppi_mean_at(llm, paired, DEFAULT_ALPHA)
}

pub fn ppi_mean_at<T: Scalar>(
    llm: &[Label],
    paired: &[(Label, Label)],
    alpha: f64,
) -> Result<EstimateResult<T>> {
    need("the LLM-labeled set", 2, llm.len())?;
    need("the gold-labeled set", 2, paired.len())?;
    let z: T = normal_multiplier(alpha)?;
    let (big_n, n) = (llm.len(), paired.len());

    let (theta_f, var_f) = moments(&as_scalars::<T>(llm));
    let diffs: Vec<T> = paired
        .iter()
        .map(|&(f, g)| f.to_scalar::<T>() - g.to_scalar::<T>())
        .collect();
    let (rectifier, var_rect) = moments(&diffs);

    let width = z * (var_f / T::from_count(big_n) + var_rect / T::from_count(n)).sqrt();
    Ok(EstimateResult {
        estimator: EstimatorKind::Ppi,
        point: theta_f - rectifier,
        half_width: Some(width),
        n_used: n,
        big_n_used: big_n,
    })
}

/// Ordinary least squares via Householder QR.
pub fn ols<T: Scalar>(design: &Matrix<T>, response: &[T]) -> Result<Vec<T>> {
    least_squares(design, response, None)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regressor {
    Label,
    Covariate(usize),
    Intercept,
}

/// Column layout of the analyst regression. The response is always the
/// record's `y`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegressionSpec {
    pub regressors: Vec<Regressor>,
    /// Index into `regressors` of the reported coefficient.
    pub target_coefficient: usize,
}

impl RegressionSpec {
    /// `y ~ label + x_0 + … + x_{k−1} + 1`, reporting the label coefficient.
    pub fn label_on_covariates(n_covariates: usize) -> Self {
        let mut regressors = vec![Regressor::Label];
        regressors.extend((0..n_covariates).map(Regressor::Covariate));
        regressors.push(Regressor::Intercept);
        Self {
            regressors,
            target_coefficient: 0,
        }
    }

    pub fn validate(&self, n_covariates: usize) -> Result<()> {
        let intercepts = self
            .regressors
            .iter()
            .filter(|r| **r == Regressor::Intercept)
            .count();
        if intercepts != 1 {
            return Err(Error::InvalidConfig(format!(
                "regression must include the intercept exactly once, found {intercepts}"
            )));
        }
        if self.target_coefficient >= self.regressors.len() {
            return Err(Error::InvalidConfig(format!(
                "target coefficient {} out of range",
                self.target_coefficient
            )));
        }
        for r in &self.regressors {
            if let Regressor::Covariate(j) = r {
                if *j >= n_covariates {
                    return Err(Error::InvalidConfig(format!(
                        "covariate {j} requested but the dataset has {n_covariates}"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn column_names(&self, covariates: &[String]) -> Vec<String> {
        self.regressors
            .iter()
            .map(|r| match r {
                Regressor::Label => "label".to_string(),
                Regressor::Covariate(j) => covariates
                    .get(*j)
                    .cloned()
                    .unwrap_or_else(|| format!("x{j}")),
                Regressor::Intercept => "intercept".to_string(),
            })
            .collect()
    }

    fn row_into<T: Scalar>(&self, rec: &LabeledRecord<T>, label: Label, out: &mut [T]) {
        for (o, r) in out.iter_mut().zip(&self.regressors) {
            *o = match r {
                Regressor::Label => label.to_scalar(),
                Regressor::Covariate(j) => rec.x[*j],
                Regressor::Intercept => T::one(),
            };
        }
    }

    /// Design row for `rec` with `label` in the label column.
    pub fn row<T: Scalar>(&self, rec: &LabeledRecord<T>, label: Label) -> Vec<T> {
        let mut out = vec![T::zero(); self.regressors.len()];
        self.row_into(rec, label, &mut out);
        out
    }
}

/// Which label fills the label column of a plain regression.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LabelSource {
    /// Gold labels, sampled records only.
    Gold,
    /// LLM labels, every record.
    Llm,
}

/// Least-squares coefficients of `spec` using the chosen label column.
pub fn label_regression_coefficients<T: Scalar>(
    data: &Dataset<T>,
    spec: &RegressionSpec,
    source: LabelSource,
) -> Result<Vec<T>> {
    spec.validate(data.covariates.len())?;
    let mut rows = Vec::new();
    let mut response = Vec::new();
    for (i, rec) in data.records.iter().enumerate() {
        let label = match source {
            LabelSource::Gold if !rec.sampled => continue,
            LabelSource::Gold => rec.gold_label,
            LabelSource::Llm => rec.llm_label,
        };
        let label = label.ok_or_else(|| Error::InvalidRecord {
            index: i,
            reason: format!("missing {source:?} label"),
        })?;
        rows.push(spec.row(rec, label));
        response.push(rec.y);
    }
    if rows.is_empty() {
        return Err(Error::TooFewObservations {
            what: "regression",
            required: spec.regressors.len(),
            got: 0,
        });
    }
    let design = Matrix::from_rows(&rows)?;
    let names = spec.column_names(&data.covariates);
    least_squares(&design, &response, Some(&names))
}

/// Plain OLS estimate of the target coefficient.
pub fn label_regression<T: Scalar>(
    data: &Dataset<T>,
    spec: &RegressionSpec,
    source: LabelSource,
) -> Result<EstimateResult<T>> {
    let beta = label_regression_coefficients(data, spec, source)?;
    let (n_used, big_n_used) = match source {
        LabelSource::Gold => (data.n_labeled(), 0),
        LabelSource::Llm => (0, data.n_total()),
    };
    Ok(EstimateResult {
        estimator: EstimatorKind::Ols,
        point: beta[spec.target_coefficient],
        half_width: None,
        n_used,
        big_n_used,
    })
}

/// Bias-corrected normal equations `gram · β = cross`.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentSystem<T> {
    pub gram: Matrix<T>,
    pub cross: Vec<T>,
}

impl<T: Scalar> MomentSystem<T> {
    /// Builds the corrected moments.
    ///
    /// Each record contributes `m(llm) + (sampled/π)·(m(gold) − m(llm))`,
    /// where `m(label)` is its outer-product and cross-product contribution
    /// with `label` in the label column. Entries that do not involve the
    /// label cancel exactly in the correction term.
    pub fn dsl(data: &Dataset<T>, spec: &RegressionSpec, pi: T) -> Result<Self> {
        spec.validate(data.covariates.len())?;
        if !(pi > T::zero() && pi <= T::one()) {
            return Err(Error::InvalidConfig(format!(
                "sampling probability pi={pi} must be in (0, 1]"
            )));
        }
        let k = spec.regressors.len();
        let weight = T::one() / pi;
        let mut gram = Matrix::zeros(k, k);
        let mut cross = vec![T::zero(); k];
        let mut w_llm = vec![T::zero(); k];
        let mut w_gold = vec![T::zero(); k];

        for (i, rec) in data.records.iter().enumerate() {
            let llm = rec.llm_label.ok_or_else(|| Error::InvalidRecord {
                index: i,
                reason: "missing llm_label".into(),
            })?;
            spec.row_into(rec, llm, &mut w_llm);
            let gold = if rec.sampled {
                let g = rec.gold_label.ok_or_else(|| Error::InvalidRecord {
                    index: i,
                    reason: "sampled record missing gold_label".into(),
                })?;
                spec.row_into(rec, g, &mut w_gold);
                true
            } else {
                false
            };
            for a in 0..k {
                let m_llm = w_llm[a] * rec.y;
                cross[a] = cross[a]
                    + if gold {
                        m_llm + weight * (w_gold[a] * rec.y - m_llm)
                    } else {
                        m_llm
                    };
                for b in 0..k {
                    let m_llm = w_llm[a] * w_llm[b];
                    gram[(a, b)] = gram[(a, b)]
                        + if gold {
                            m_llm + weight * (w_gold[a] * w_gold[b] - m_llm)
                        } else {
                            m_llm
                        };
                }
            }
        }
        Ok(Self { gram, cross })
    }

    pub fn solve(&self, names: Option<&[String]>) -> Result<Vec<T>> {
        solve_square(&self.gram, &self.cross, names)
    }
}

/// Design-based corrected regression coefficients (all of them).
pub fn dsl_coefficients<T: Scalar>(
    data: &Dataset<T>,
    spec: &RegressionSpec,
    pi: T,
) -> Result<Vec<T>> {
    let system = MomentSystem::dsl(data, spec, pi)?;
    let names = spec.column_names(&data.covariates);
    system.solve(Some(&names))
}

/// Design-based corrected estimate of the target coefficient. The interval
/// is left empty; replicate studies report empirical percentile bands.
pub fn dsl_regress<T: Scalar>(
    data: &Dataset<T>,
    spec: &RegressionSpec,
    pi: T,
) -> Result<EstimateResult<T>> {
    let beta = dsl_coefficients(data, spec, pi)?;
    Ok(EstimateResult {
        estimator: EstimatorKind::Dsl,
        point: beta[spec.target_coefficient],
        half_width: None,
        n_used: data.n_labeled(),
        big_n_used: data.n_total(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels(v: &[u8]) -> Vec<Label> {
        v.iter().map(|&b| Label::try_from(b).unwrap()).collect()
    }

    fn pairs(v: &[(u8, u8)]) -> Vec<(Label, Label)> {
        v.iter()
            .map(|&(f, g)| (Label::try_from(f).unwrap(), Label::try_from(g).unwrap()))
            .collect()
    }

    #[test]
    fn pessimist_examples() {
        let r = pessimist_mean::<f64>(&labels(&[1, 0, 1, 0])).unwrap();
        assert!((r.point - 0.5).abs() < 1e-12);
        assert!((r.half_width.unwrap() - 0.49).abs() < 1e-12);
        let r = pessimist_mean::<f64>(&labels(&[1, 1, 1, 1])).unwrap();
        assert_eq!((r.point, r.half_width), (1.0, Some(0.0)));
        let r = pessimist_mean::<f64>(&labels(&[0, 0])).unwrap();
        assert_eq!((r.point, r.half_width), (0.0, Some(0.0)));
        assert!(pessimist_mean::<f64>(&labels(&[1])).is_err());
    }

    #[test]
    fn optimist_examples() {
        let r = optimist_mean::<f64>(&labels(&[1, 0])).unwrap();
        assert!((r.point - 0.5).abs() < 1e-12);
        assert!((r.half_width.unwrap() - 1.96 * (0.25f64 / 2.0).sqrt()).abs() < 1e-12);
        assert!((r.half_width.unwrap() - 0.6930).abs() < 1e-4);
        let r = optimist_mean::<f64>(&labels(&[1; 17])).unwrap();
        assert_eq!((r.point, r.half_width), (1.0, Some(0.0)));
        let r = optimist_mean::<f64>(&labels(&[1, 1, 0, 0, 1, 1, 0, 0])).unwrap();
        assert!((r.half_width.unwrap() - 0.3465).abs() < 1e-4);
        assert!(optimist_mean::<f64>(&[]).is_err());
    }

    #[test]
    fn ppi_hand_example() {
        let r = ppi_mean::<f64>(&labels(&[1, 1, 0, 1]), &pairs(&[(1, 1), (1, 0)])).unwrap();
        assert!((r.point - 0.25).abs() < 1e-12);
        // σ²_f = 0.1875, σ²_{f−Y} = 0.25
        let w = 1.96 * (0.1875f64 / 4.0 + 0.25 / 2.0).sqrt();
        assert!((r.half_width.unwrap() - w).abs() < 1e-12);
        assert_eq!((r.n_used, r.big_n_used), (2, 4));
    }

    #[test]
    fn ppi_collapses_to_optimist_with_perfect_predictions() {
        let llm = labels(&[1, 0, 0, 1, 1, 0]);
        let r = ppi_mean::<f64>(&llm, &pairs(&[(1, 1), (0, 0), (1, 1)])).unwrap();
        let o = optimist_mean::<f64>(&llm).unwrap();
        assert_eq!(r.point, o.point);
        assert_eq!(r.half_width, o.half_width);
    }

    #[test]
    fn ppi_rejects_small_samples() {
        assert!(ppi_mean::<f64>(&labels(&[1, 0]), &pairs(&[(1, 1)])).is_err());
        assert!(ppi_mean::<f64>(&labels(&[1]), &pairs(&[(1, 1), (0, 0)])).is_err());
    }

    #[test]
    fn multiplier_defaults_to_196() {
        assert_eq!(normal_multiplier::<f64>(0.05).unwrap(), 1.96);
        let z = normal_multiplier::<f64>(0.10).unwrap();
        assert!((z - 1.644_853_626_951_472).abs() < 1e-9);
        assert!(normal_multiplier::<f64>(0.0).is_err());
        let r = pessimist_mean_at::<f64>(&labels(&[1, 0, 1, 0]), 0.10).unwrap();
        assert!((r.half_width.unwrap() - z * 0.25).abs() < 1e-12);
    }

    #[test]
    fn noiseless_ols_recovers_coefficients() {
        // y = 2 + 3a − x, columns (1, a, x)
        let pts = [(0.0, -1.0), (1.0, 0.5), (0.0, 2.0), (1.0, -0.3), (1.0, 1.7), (0.0, 0.1)];
        let rows: Vec<Vec<f64>> = pts.iter().map(|&(a, x)| vec![1.0, a, x]).collect();
        let y: Vec<f64> = pts.iter().map(|&(a, x)| 2.0 + 3.0 * a - x).collect();
        let beta = ols(&Matrix::from_rows(&rows).unwrap(), &y).unwrap();
        for (b, t) in beta.iter().zip([2.0, 3.0, -1.0]) {
            assert!((b - t).abs() < 1e-10);
        }
        let zeros = ols(&Matrix::from_rows(&rows).unwrap(), &[0.0; 6]).unwrap();
        assert!(zeros.iter().all(|b| b.abs() < 1e-15));
    }

    fn small_dataset() -> Dataset<f64> {
        let recs = vec![
            LabeledRecord::new("0", 1.0, vec![0.3], Some(Label::ONE), Some(Label::ONE)),
            LabeledRecord::new("1", -2.0, vec![-1.0], Some(Label::ZERO), None),
            LabeledRecord::new("2", 0.5, vec![0.7], Some(Label::ONE), Some(Label::ZERO)),
            LabeledRecord::new("3", -1.5, vec![1.2], Some(Label::ZERO), None),
            LabeledRecord::new("4", 2.0, vec![-0.4], Some(Label::ZERO), Some(Label::ONE)),
            LabeledRecord::new("5", -0.3, vec![0.0], Some(Label::ONE), None),
        ];
        Dataset::new(vec!["x".into()], recs)
    }

    #[test]
    fn spec_validation() {
        let spec = RegressionSpec::label_on_covariates(1);
        assert!(spec.validate(1).is_ok());
        assert!(spec.validate(0).is_err());
        let mut twice = spec.clone();
        twice.regressors.push(Regressor::Intercept);
        assert!(twice.validate(1).is_err());
        let none = RegressionSpec {
            regressors: vec![Regressor::Label],
            target_coefficient: 0,
        };
        assert!(none.validate(0).is_err());
    }

    #[test]
    fn dsl_rejects_bad_inputs() {
        let ds = small_dataset();
        let spec = RegressionSpec::label_on_covariates(1);
        assert!(dsl_regress(&ds, &spec, 0.0).is_err());
        assert!(dsl_regress(&ds, &spec, -0.5).is_err());
        let mut broken = ds.clone();
        broken.records[0].gold_label = None;
        assert!(matches!(
            dsl_regress(&broken, &spec, 0.5),
            Err(Error::InvalidRecord { index: 0, .. })
        ));
        let mut no_llm = ds;
        no_llm.records[3].llm_label = None;
        assert!(dsl_regress(&no_llm, &spec, 0.5).is_err());
    }

    #[test]
    fn dsl_gram_is_symmetric() {
        let ds = small_dataset();
        let spec = RegressionSpec::label_on_covariates(1);
        let sys = MomentSystem::dsl(&ds, &spec, 0.5).unwrap();
        assert!(sys.gram.is_symmetric(1e-12));
    }

    #[test]
    fn dsl_with_full_sampling_is_ols_on_gold() {
        let mut ds = small_dataset();
        for (i, r) in ds.records.iter_mut().enumerate() {
            r.gold_label = Some(Label::from_bool(i % 3 != 1));
            r.sampled = true;
        }
        let spec = RegressionSpec::label_on_covariates(1);
        let a = dsl_coefficients(&ds, &spec, 1.0).unwrap();
        let b = label_regression_coefficients(&ds, &spec, LabelSource::Gold).unwrap();
        for (p, q) in a.iter().zip(&b) {
            assert!((p - q).abs() < 1e-10);
        }
    }

    #[test]
    fn dsl_with_perfect_llm_is_ols_on_llm() {
        let mut ds = small_dataset();
        for r in ds.records.iter_mut().filter(|r| r.sampled) {
            r.gold_label = r.llm_label;
        }
        let spec = RegressionSpec::label_on_covariates(1);
        let a = dsl_coefficients(&ds, &spec, 0.5).unwrap();
        let b = label_regression_coefficients(&ds, &spec, LabelSource::Llm).unwrap();
        for (p, q) in a.iter().zip(&b) {
            assert!((p - q).abs() < 1e-10);
        }
    }
}
