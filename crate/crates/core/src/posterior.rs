//! Plug-in Bayesian scoring of label sequences.
//!
//! A candidate labeling is scored by first estimating `(rho, sigma1_sq,
//! sigma2_sq)` from it and then evaluating
//! `log p(labels) + sum_n log f(x_n | label_n)` under those estimates.

use serde::{Deserialize, Serialize};

use crate::model::conditional_log_pdf;
use crate::robust::mad;
use crate::{Error, LabelSequence, NoiseParams, ObservationSequence, Result};

/// How the background variance is estimated from a candidate labeling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorKind {
    /// Mean square of the samples labeled background.
    Ergodic,
    /// `(1.4826 * MAD(x))^2` over the full sequence, independent of labels.
    Robust,
}

/// Lower bound applied to every variance estimate, relative to the mean
/// square of the observations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VarianceFloor {
    pub scale: f64,
}

impl Default for VarianceFloor {
    fn default() -> Self {
        Self { scale: 1e-12 }
    }
}

impl VarianceFloor {
    pub fn new(scale: f64) -> Result<Self> {
        if !(scale.is_finite() && scale > 0.0) {
            return Err(Error::domain(format!(
                "variance floor scale must be positive, got {scale}"
            )));
        }
        Ok(Self { scale })
    }

    /// Absolute floor for `x`; never below the smallest normal double.
    pub fn value_for(&self, x: &[f64]) -> f64 {
        let ms = x.iter().map(|v| v * v).sum::<f64>() / x.len().max(1) as f64;
        (self.scale * ms).max(f64::MIN_POSITIVE)
    }
}

/// Parameters estimated from one candidate labeling.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlugInEstimate {
    /// `sigma2_sq` is the excess impulse variance, never the total.
    pub params: NoiseParams,
    pub impulse_count: usize,
    /// Set when an empty background or impulse set forced a fallback.
    pub degenerate: bool,
}

/// Unnormalized natural-log posterior of a labeling.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct PosteriorScore {
    pub log_score: f64,
}

/// Background variance source for [`plug_in_from_sums`].
#[derive(Debug, Clone, Copy)]
pub(crate) enum BackgroundVariance {
    /// Label-independent value (the robust estimator).
    Fixed(f64),
    /// Mean square of the background set.
    Ergodic,
}

/// Sufficient statistics of a labeling for plug-in estimation.
#[derive(Debug, Clone, Copy)]
pub(crate) struct SquareSums {
    pub n: usize,
    pub impulse_count: usize,
    pub impulse_sq: f64,
    pub background_sq: f64,
    /// Largest `x_n^2` over the whole sequence.
    pub max_sq: f64,
}

/// The estimation rules shared by every scoring route:
///
/// * `rho = k / N`;
/// * empty impulse set: `sigma2_sq = max(max x^2 - sigma1_sq, floor)`;
/// * empty background set under the ergodic rule: `sigma1_sq = floor`.
pub(crate) fn plug_in_from_sums(
    background: BackgroundVariance,
    sums: SquareSums,
    floor: f64,
) -> PlugInEstimate {
    let SquareSums {
        n,
        impulse_count: k,
        impulse_sq,
        background_sq,
        max_sq,
    } = sums;
    let mut degenerate = false;
    let sigma1_sq = match background {
        BackgroundVariance::Fixed(v) => v.max(floor),
        BackgroundVariance::Ergodic if k < n => (background_sq / (n - k) as f64).max(floor),
        BackgroundVariance::Ergodic => {
            degenerate = true;
            floor
        }
    };
    let sigma2_sq = if k > 0 {
        (impulse_sq / k as f64 - sigma1_sq).max(floor)
    } else {
        degenerate = true;
        (max_sq - sigma1_sq).max(floor)
    };
    PlugInEstimate {
        params: NoiseParams {
            rho: k as f64 / n as f64,
            sigma1_sq,
            sigma2_sq,
        },
        impulse_count: k,
        degenerate,
    }
}

fn check_shape(x: &ObservationSequence, labels: &LabelSequence) -> Result<()> {
    if x.len() != labels.len() {
        return Err(Error::ShapeMismatch {
            left: x.len(),
            right: labels.len(),
        });
    }
    Ok(())
}

fn square_sums(x: &[f64], labels: &[bool]) -> SquareSums {
    let mut sums = SquareSums {
        n: x.len(),
        impulse_count: 0,
        impulse_sq: 0.0,
        background_sq: 0.0,
        max_sq: 0.0,
    };
    for (&v, &l) in x.iter().zip(labels) {
        let sq = v * v;
        sums.max_sq = sums.max_sq.max(sq);
        if l {
            sums.impulse_count += 1;
            sums.impulse_sq += sq;
        } else {
            sums.background_sq += sq;
        }
    }
    sums
}

/// Background variance of the robust estimator: `(1.4826 * MAD(x))^2`.
pub fn robust_background_variance(x: &[f64]) -> Result<f64> {
    let s = mad(x)?;
    Ok(s.sigma_hat * s.sigma_hat)
}

/// Zero-mean maximum-likelihood estimates from the labeled subsets.
pub fn estimate_ergodic(
    x: &ObservationSequence,
    labels: &LabelSequence,
    floor: VarianceFloor,
) -> Result<PlugInEstimate> {
    check_shape(x, labels)?;
    Ok(plug_in_from_sums(
        BackgroundVariance::Ergodic,
        square_sums(x, labels),
        floor.value_for(x),
    ))
}

/// Like [`estimate_ergodic`] but with the background variance taken from
/// the MAD of the full sequence, so it does not move when labels change.
pub fn estimate_robust(
    x: &ObservationSequence,
    labels: &LabelSequence,
    floor: VarianceFloor,
) -> Result<PlugInEstimate> {
    check_shape(x, labels)?;
    Ok(plug_in_from_sums(
        BackgroundVariance::Fixed(robust_background_variance(x)?),
        square_sums(x, labels),
        floor.value_for(x),
    ))
}

pub fn estimate(
    kind: EstimatorKind,
    x: &ObservationSequence,
    labels: &LabelSequence,
    floor: VarianceFloor,
) -> Result<PlugInEstimate> {
    match kind {
        EstimatorKind::Ergodic => estimate_ergodic(x, labels, floor),
        EstimatorKind::Robust => estimate_robust(x, labels, floor),
    }
}

/// `k log(rho) + (N - k) log(1 - rho)` with `0 log 0 = 0`.
pub fn log_prior_counts(impulse_count: usize, n: usize, rho: f64) -> f64 {
    let k = impulse_count as f64;
    let m = (n - impulse_count) as f64;
    let mut lp = 0.0;
    if impulse_count > 0 {
        lp += k * rho.ln();
    }
    if n > impulse_count {
        lp += m * (-rho).ln_1p();
    }
    lp
}

/// Log of the i.i.d. Bernoulli prior of a labeling.
pub fn log_prior(labels: &LabelSequence, rho: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&rho) {
        return Err(Error::domain(format!("rho must lie in [0, 1], got {rho}")));
    }
    Ok(log_prior_counts(labels.impulse_count(), labels.len(), rho))
}

/// Log-posterior of `labels` under explicit parameters (prior uses `params.rho`).
pub fn log_posterior_params(
    x: &ObservationSequence,
    labels: &LabelSequence,
    params: &NoiseParams,
) -> Result<PosteriorScore> {
    check_shape(x, labels)?;
    let likelihood: f64 = x
        .iter()
        .zip(labels.iter())
        .map(|(&v, &l)| conditional_log_pdf(v, l, params))
        .sum();
    Ok(PosteriorScore {
        log_score: log_prior(labels, params.rho)? + likelihood,
    })
}

/// Log-posterior of `labels` under a plug-in estimate.
pub fn log_posterior(
    x: &ObservationSequence,
    labels: &LabelSequence,
    est: &PlugInEstimate,
) -> Result<PosteriorScore> {
    log_posterior_params(x, labels, &est.params)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{gaussian_log_pdf, generate};
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn obs(v: &[f64]) -> ObservationSequence {
        ObservationSequence::new(v.to_vec()).unwrap()
    }

    fn labels(bits: &[u8]) -> LabelSequence {
        LabelSequence::from_bits(bits).unwrap()
    }

    const FLOOR: VarianceFloor = VarianceFloor { scale: 1e-12 };

    #[test]
    fn ergodic_small_case() {
        let e = estimate_ergodic(&obs(&[1.0, -1.0, 10.0]), &labels(&[0, 0, 1]), FLOOR).unwrap();
        assert_eq!(e.params.rho, 1.0 / 3.0);
        assert_eq!(e.params.sigma1_sq, 1.0);
        assert_eq!(e.params.sigma2_sq, 99.0);
        assert_eq!(e.impulse_count, 1);
        assert!(!e.degenerate);
    }

    #[test]
    fn ergodic_degenerate_sets() {
        let x = obs(&[1.0, -2.0, 3.0]);
        let e = estimate_ergodic(&x, &labels(&[0, 0, 0]), FLOOR).unwrap();
        assert_eq!(e.params.rho, 0.0);
        assert!((e.params.sigma1_sq - 14.0 / 3.0).abs() < 1e-15);
        assert!((e.params.sigma2_sq - (9.0 - 14.0 / 3.0)).abs() < 1e-12);
        assert!(e.degenerate);

        let e = estimate_ergodic(&x, &labels(&[1, 1, 1]), FLOOR).unwrap();
        let floor = FLOOR.value_for(&x);
        assert_eq!(e.params.sigma1_sq, floor);
        assert!(e.degenerate);
        assert!((e.params.sigma1_sq + e.params.sigma2_sq - 14.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn shape_mismatch_is_reported() {
        assert!(matches!(
            estimate_ergodic(&obs(&[1.0, 2.0]), &labels(&[0]), FLOOR),
            Err(Error::ShapeMismatch { left: 2, right: 1 })
        ));
        assert!(log_posterior_params(
            &obs(&[1.0]),
            &labels(&[0, 1]),
            &NoiseParams::new(0.5, 1.0, 1.0).unwrap()
        )
        .is_err());
    }

    #[test]
    fn ergodic_true_labels_recover_params() {
        let p = NoiseParams::new(1e-2, 1.0, 1e4).unwrap();
        let n = 100_000;
        let g = generate(p, n, 8).unwrap();
        let e = estimate_ergodic(&g.observations, &g.truth, FLOOR).unwrap();
        let k = g.truth.impulse_count() as f64;
        let se_rho = (p.rho * (1.0 - p.rho) / n as f64).sqrt();
        assert!((e.params.rho - p.rho).abs() < 5.0 * se_rho);
        let se_s1 = p.sigma1_sq * (2.0 / (n as f64 - k)).sqrt();
        assert!((e.params.sigma1_sq - p.sigma1_sq).abs() < 5.0 * se_s1);
        let total = p.sigma1_sq + p.sigma2_sq;
        let se_total = total * (2.0 / k).sqrt();
        assert!((e.params.sigma1_sq + e.params.sigma2_sq - total).abs() < 5.0 * se_total);
    }

    #[test]
    fn robust_background_ignores_labels() {
        let p = NoiseParams::new(1e-3, 1.0, 1e4).unwrap();
        let g = generate(p, 100_000, 21).unwrap();
        let x = &g.observations;
        let e_true = estimate_robust(x, &g.truth, FLOOR).unwrap();
        assert!((e_true.params.sigma1_sq - 1.0).abs() < 0.05);
        let e_zero = estimate_robust(x, &LabelSequence::zeros(x.len()), FLOOR).unwrap();
        assert_eq!(e_zero.params.sigma1_sq, e_true.params.sigma1_sq);
        assert!(e_zero.degenerate);
        let mut flipped = g.truth.clone().into_inner();
        flipped[17] = !flipped[17];
        let e_flip = estimate_robust(x, &LabelSequence::new(flipped), FLOOR).unwrap();
        assert_eq!(
            e_flip.params.sigma1_sq.to_bits(),
            e_true.params.sigma1_sq.to_bits()
        );
    }

    #[test]
    fn robust_all_impulse_is_not_degenerate() {
        let x = obs(&[1.0, -2.0, 3.0, 0.5]);
        let e = estimate_robust(&x, &labels(&[1, 1, 1, 1]), FLOOR).unwrap();
        assert!(!e.degenerate);
        assert_eq!(e.params.rho, 1.0);
    }

    #[test]
    fn log_prior_examples() {
        assert!((log_prior(&labels(&[1, 0, 0]), 0.5).unwrap() - 3.0 * 0.5f64.ln()).abs() < 1e-15);
        assert_eq!(log_prior(&labels(&[0, 0, 0]), 0.0).unwrap(), 0.0);
        assert_eq!(log_prior(&labels(&[1, 1]), 1.0).unwrap(), 0.0);
        assert!((log_prior(&labels(&[1, 1]), 0.25).unwrap() - 2.0 * 0.25f64.ln()).abs() < 1e-15);
        assert!(log_prior(&labels(&[1]), 1.2).is_err());
    }

    #[test]
    fn single_sample_posterior() {
        let est = PlugInEstimate {
            params: NoiseParams {
                rho: 0.0,
                sigma1_sq: 1.0,
                sigma2_sq: 1.0,
            },
            impulse_count: 0,
            degenerate: true,
        };
        let s = log_posterior(&obs(&[0.0]), &labels(&[0]), &est).unwrap();
        assert!((s.log_score + 0.5 * (2.0 * PI).ln()).abs() < 1e-15);
    }

    /// Direct product form `p(labels) * prod f(x_n | label_n)` evaluated in
    /// the linear domain, independent of the log-domain implementation.
    fn direct_product(x: &[f64], bits: u32, p: &NoiseParams) -> f64 {
        let mut prod = 1.0;
        for (i, &v) in x.iter().enumerate() {
            let imp = bits >> i & 1 == 1;
            let var = if imp {
                p.sigma1_sq + p.sigma2_sq
            } else {
                p.sigma1_sq
            };
            let dens = (-v * v / (2.0 * var)).exp() / (2.0 * PI * var).sqrt();
            prod *= dens * if imp { p.rho } else { 1.0 - p.rho };
        }
        prod
    }

    #[test]
    fn exhaustive_normalization_matches_direct_products() {
        let x = obs(&[0.3, -2.2, 5.1, 0.05]);
        let p = NoiseParams::new(0.2, 1.3, 9.0).unwrap();
        let mut total_log = 0.0;
        let mut total_direct = 0.0;
        let mut pairs = Vec::new();
        for bits in 0..16u32 {
            let l = LabelSequence::new((0..4).map(|i| bits >> i & 1 == 1).collect());
            let s = log_posterior_params(&x, &l, &p).unwrap().log_score.exp();
            let d = direct_product(&x, bits, &p);
            total_log += s;
            total_direct += d;
            pairs.push((s, d));
        }
        assert!((total_log - total_direct).abs() < 1e-12 * total_direct);
        for (s, d) in pairs {
            assert!((s / total_log - d / total_direct).abs() < 1e-12);
        }
        // With fixed params the labelings partition the joint density, whose
        // sum is the product of the mixture densities.
        let mix: f64 = x
            .iter()
            .map(|&v| {
                (1.0 - p.rho) * gaussian_log_pdf(v, p.sigma1_sq).exp()
                    + p.rho * gaussian_log_pdf(v, p.sigma1_sq + p.sigma2_sq).exp()
            })
            .product();
        assert!((total_log - mix).abs() < 1e-12 * mix);
    }

    proptest! {
        /// Exchanging the labels of a background/impulse pair changes the
        /// score by `0.5 (x_n^2 - x_m^2) (1/s1 - 1/(s1 + s2))`.
        #[test]
        fn swap_ratio_identity(
            x in prop::collection::vec(-30.0f64..30.0, 2..24),
            bits in prop::collection::vec(any::<bool>(), 24),
            m_seed in any::<prop::sample::Index>(),
            n_seed in any::<prop::sample::Index>(),
            rho in 0.01f64..0.99,
            s1 in 0.1f64..10.0,
            s2 in 0.1f64..1e4,
        ) {
            let len = x.len();
            let m = m_seed.index(len);
            let n = n_seed.index(len);
            prop_assume!(m != n);
            let mut alpha: Vec<bool> = bits[..len].to_vec();
            alpha[m] = false;
            alpha[n] = true;
            let mut beta = alpha.clone();
            beta[m] = true;
            beta[n] = false;
            let p = NoiseParams::new(rho, s1, s2).unwrap();
            let xo = obs(&x);
            let la = log_posterior_params(&xo, &LabelSequence::new(alpha), &p).unwrap().log_score;
            let lb = log_posterior_params(&xo, &LabelSequence::new(beta), &p).unwrap().log_score;
            let expected = 0.5 * (x[n] * x[n] - x[m] * x[m]) * (1.0 / s1 - 1.0 / (s1 + s2));
            prop_assert!((la - lb - expected).abs() <= 1e-9 * (1.0 + expected.abs()));
            if x[m] * x[m] < x[n] * x[n] {
                prop_assert!(la > lb);
            } else if x[m] * x[m] > x[n] * x[n] {
                prop_assert!(la < lb);
            }
        }
    }
}
