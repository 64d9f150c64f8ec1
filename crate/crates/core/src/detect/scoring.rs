use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::posterior::{
    self, log_posterior_params, log_prior_counts, plug_in_from_sums, robust_background_variance,
    BackgroundVariance, EstimatorKind, PlugInEstimate, SquareSums, VarianceFloor,
};
use crate::{Error, LabelSequence, NoiseParams, ObservationSequence, Result};

/// How a detector turns a candidate labeling into a score.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoringModel {
    /// Gaussian variances are given. The prior uses `fixed_rho` when set and
    /// the candidate's impulse fraction otherwise.
    Known {
        sigma1_sq: f64,
        sigma2_sq: f64,
        fixed_rho: Option<f64>,
    },
    /// All parameters are re-estimated from each candidate.
    PlugIn { estimator: EstimatorKind },
}

impl ScoringModel {
    pub fn validate(&self) -> Result<()> {
        if let ScoringModel::Known {
            sigma1_sq,
            sigma2_sq,
            fixed_rho,
        } = *self
        {
            NoiseParams::new(fixed_rho.unwrap_or(0.5), sigma1_sq, sigma2_sq)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy)]
enum Prepared {
    Known { v0: f64, v1: f64, rho: Option<f64> },
    PlugIn(BackgroundVariance, EstimatorKind),
}

/// A [`ScoringModel`] bound to one observation sequence.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Scorer {
    n: usize,
    prepared: Prepared,
    floor: VarianceFloor,
    floor_value: f64,
    max_sq: f64,
    sigma1_sq: f64,
    sigma2_sq: f64,
}

impl Scorer {
    pub fn new(model: ScoringModel, x: &[f64], floor: VarianceFloor) -> Result<Self> {
        if x.is_empty() {
            return Err(Error::EmptyInput);
        }
        model.validate()?;
        let max_sq = x.iter().map(|v| v * v).fold(0.0, f64::max);
        let (prepared, sigma1_sq, sigma2_sq) = match model {
            ScoringModel::Known {
                sigma1_sq,
                sigma2_sq,
                fixed_rho,
            } => (
                Prepared::Known {
                    v0: sigma1_sq,
                    v1: sigma1_sq + sigma2_sq,
                    rho: fixed_rho,
                },
                sigma1_sq,
                sigma2_sq,
            ),
            ScoringModel::PlugIn { estimator } => {
                let bg = match estimator {
                    EstimatorKind::Robust => {
                        BackgroundVariance::Fixed(robust_background_variance(x)?)
                    }
                    EstimatorKind::Ergodic => BackgroundVariance::Ergodic,
                };
                (Prepared::PlugIn(bg, estimator), f64::NAN, f64::NAN)
            }
        };
        Ok(Self {
            n: x.len(),
            prepared,
            floor,
            floor_value: floor.value_for(x),
            max_sq,
            sigma1_sq,
            sigma2_sq,
        })
    }

    fn sums(&self, k: usize, impulse_sq: f64, background_sq: f64) -> SquareSums {
        SquareSums {
            n: self.n,
            impulse_count: k,
            impulse_sq,
            background_sq,
            max_sq: self.max_sq,
        }
    }

    pub fn estimate(&self, k: usize, impulse_sq: f64, background_sq: f64) -> PlugInEstimate {
        match self.prepared {
            Prepared::Known { .. } => PlugInEstimate {
                params: NoiseParams {
                    rho: k as f64 / self.n as f64,
                    sigma1_sq: self.sigma1_sq,
                    sigma2_sq: self.sigma2_sq,
                },
                impulse_count: k,
                degenerate: false,
            },
            Prepared::PlugIn(bg, _) => plug_in_from_sums(
                bg,
                self.sums(k, impulse_sq, background_sq),
                self.floor_value,
            ),
        }
    }

    /// Log-posterior of a labeling from its sufficient statistics.
    pub fn log_score(&self, k: usize, impulse_sq: f64, background_sq: f64) -> f64 {
        let (rho, v0, v1) = match self.prepared {
            Prepared::Known { v0, v1, rho } => (rho.unwrap_or(k as f64 / self.n as f64), v0, v1),
            Prepared::PlugIn(..) => {
                let p = self.estimate(k, impulse_sq, background_sq).params;
                (p.rho, p.sigma1_sq, p.sigma1_sq + p.sigma2_sq)
            }
        };
        let mut s = log_prior_counts(k, self.n, rho);
        let m = self.n - k;
        if m > 0 {
            s -= 0.5 * m as f64 * (2.0 * PI * v0).ln() + background_sq / (2.0 * v0);
        }
        if k > 0 {
            s -= 0.5 * k as f64 * (2.0 * PI * v1).ln() + impulse_sq / (2.0 * v1);
        }
        s
    }

    /// Estimate for an explicit labeling, recomputed from scratch.
    pub fn full_estimate(
        &self,
        x: &ObservationSequence,
        labels: &LabelSequence,
    ) -> Result<PlugInEstimate> {
        match self.prepared {
            Prepared::Known { .. } => {
                let k = labels.impulse_count();
                Ok(self.estimate(k, f64::NAN, f64::NAN))
            }
            Prepared::PlugIn(_, kind) => posterior::estimate(kind, x, labels, self.floor),
        }
    }

    /// Score for an explicit labeling, recomputed from scratch.
    pub fn full_score(&self, x: &ObservationSequence, labels: &LabelSequence) -> Result<f64> {
        let est = self.full_estimate(x, labels)?;
        let mut params = est.params;
        if let Prepared::Known { rho: Some(r), .. } = self.prepared {
            params.rho = r;
        }
        Ok(log_posterior_params(x, labels, &params)?.log_score)
    }
}
