//! Robust scale estimation, the Gini sparsity index and threshold
//! initialization rules.

use crate::{Error, Result};

/// Gaussian consistency factor for the MAD.
pub const MAD_SCALE: f64 = 1.4826;
/// `3 * MAD_SCALE`.
pub const THREE_SIGMA_FACTOR: f64 = 4.4478;
/// Default multiplier of `gini * sigma_hat` in the sparsity-sensitive rule.
pub const DEFAULT_SSI_COEFFICIENT: f64 = 10.0;

/// Median absolute deviation and the Gaussian scale derived from it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RobustScale {
    pub mad: f64,
    /// `MAD_SCALE * mad`.
    pub sigma_hat: f64,
}

impl RobustScale {
    fn from_mad(mad: f64) -> Self {
        Self {
            mad,
            sigma_hat: MAD_SCALE * mad,
        }
    }
}

/// Gini index of a nonnegative sequence, in `[0, 1 - 1/N]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct SparsityIndex(pub f64);

impl SparsityIndex {
    pub fn value(self) -> f64 {
        self.0
    }
}

/// Median by selection. An even-length input yields the mean of the two
/// central order statistics. Reorders `data`.
pub fn median_in_place(data: &mut [f64]) -> Result<f64> {
    let n = data.len();
    if n == 0 {
        return Err(Error::EmptyInput);
    }
    let mid = n / 2;
    let (lower, upper_mid, _) = data.select_nth_unstable_by(mid, f64::total_cmp);
    let upper_mid = *upper_mid;
    if n % 2 == 1 {
        return Ok(upper_mid);
    }
    let lower_mid = lower
        .iter()
        .copied()
        .max_by(f64::total_cmp)
        .expect("even n >= 2 leaves a nonempty lower half");
    Ok(0.5 * (lower_mid + upper_mid))
}

pub fn median(data: &[f64]) -> Result<f64> {
    median_in_place(&mut data.to_vec())
}

/// `median(|z - median(z)|)` together with `1.4826 * MAD`.
pub fn mad(data: &[f64]) -> Result<RobustScale> {
    let mut buf = data.to_vec();
    let center = median_in_place(&mut buf)?;
    for v in &mut buf {
        *v = (*v - center).abs();
    }
    Ok(RobustScale::from_mad(median_in_place(&mut buf)?))
}

/// Gini index `1 - 2 sum_k (c_(k) / |c|_1) (N - k + 1/2) / N` over the
/// ascending order statistics `c_(1) <= ... <= c_(N)`.
pub fn gini(data: &[f64]) -> Result<SparsityIndex> {
    if data.is_empty() {
        return Err(Error::EmptyInput);
    }
    if let Some(v) = data.iter().find(|v| v.is_nan() || **v < 0.0) {
        return Err(Error::domain(format!(
            "Gini index needs nonnegative values, got {v}"
        )));
    }
    let mut sorted = data.to_vec();
    sorted.sort_unstable_by(f64::total_cmp);
    gini_ascending(&sorted)
}

/// Gini index of values already sorted in ascending order.
pub(crate) fn gini_ascending(sorted: &[f64]) -> Result<SparsityIndex> {
    gini_from_ranked(sorted.len(), sorted.iter().copied())
}

/// Gini index of values sorted in descending order.
pub(crate) fn gini_descending(sorted: &[f64]) -> Result<SparsityIndex> {
    gini_from_ranked(sorted.len(), sorted.iter().rev().copied())
}

fn gini_from_ranked(
    n: usize,
    ascending: impl Iterator<Item = f64> + Clone,
) -> Result<SparsityIndex> {
    let l1: f64 = ascending.clone().sum();
    if l1.is_nan() || l1 <= 0.0 {
        return Err(Error::DegenerateInput(
            "Gini index of an all-zero sequence is undefined".into(),
        ));
    }
    let nf = n as f64;
    let weighted: f64 = ascending
        .enumerate()
        .map(|(i, c)| c * (nf - (i + 1) as f64 + 0.5))
        .sum();
    let s = 1.0 - 2.0 * weighted / (l1 * nf);
    Ok(SparsityIndex(s.clamp(0.0, 1.0)))
}

/// Three-sigma rule: `4.4478 * MAD`.
pub fn threshold_three_sigma(data: &[f64]) -> Result<f64> {
    Ok(THREE_SIGMA_FACTOR * mad(data)?.mad)
}

/// Sparsity-sensitive threshold `coefficient * gini(|x|) * 1.4826 * MAD(x)`.
/// The default coefficient of 10 gives `14.826 * gini(|x|) * MAD(x)`.
pub fn threshold_ssi(data: &[f64], coefficient: f64) -> Result<f64> {
    if !(coefficient.is_finite() && coefficient > 0.0) {
        return Err(Error::domain(format!(
            "SSI coefficient must be positive, got {coefficient}"
        )));
    }
    let magnitudes: Vec<f64> = data.iter().map(|v| v.abs()).collect();
    let g = gini(&magnitudes)?;
    let scale = mad(data)?;
    Ok(ssi_from_parts(coefficient, g, scale))
}

pub(crate) fn ssi_from_parts(coefficient: f64, g: SparsityIndex, scale: RobustScale) -> f64 {
    coefficient * g.0 * scale.sigma_hat
}
