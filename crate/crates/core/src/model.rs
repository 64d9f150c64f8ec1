//! Domain types, BG sequence generation and density evaluation.
//!
//! The mixture weights follow the generative definition: the background
//! component carries `1 - rho` and the impulse component carries `rho`.

use std::f64::consts::PI;
use std::ops::Deref;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Bernoulli, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// The BG parameter vector `(rho, sigma1_sq, sigma2_sq)`.
///
/// `sigma2_sq` is the *excess* variance of the impulse state, so an impulse
/// sample has variance `sigma1_sq + sigma2_sq`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseParams {
    pub rho: f64,
    pub sigma1_sq: f64,
    pub sigma2_sq: f64,
}

impl NoiseParams {
    /// Validates `0 <= rho <= 1`, `sigma1_sq > 0` and `sigma2_sq > 0`.
    ///
    /// The stricter `sigma2_sq > sigma1_sq` ordering is not enforced here
    /// because intermediate estimates routinely violate it; see
    /// [`NoiseParams::is_ordered`].
    pub fn new(rho: f64, sigma1_sq: f64, sigma2_sq: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&rho) {
            return Err(Error::domain(format!("rho must lie in [0, 1], got {rho}")));
        }
        if !(sigma1_sq.is_finite() && sigma1_sq > 0.0) {
            return Err(Error::domain(format!(
                "sigma1_sq must be finite and positive, got {sigma1_sq}"
            )));
        }
        if !(sigma2_sq.is_finite() && sigma2_sq > 0.0) {
            return Err(Error::domain(format!(
                "sigma2_sq must be finite and positive, got {sigma2_sq}"
            )));
        }
        Ok(Self {
            rho,
            sigma1_sq,
            sigma2_sq,
        })
    }

    /// Whether the impulse power exceeds the background power.
    pub fn is_ordered(&self) -> bool {
        self.sigma2_sq > self.sigma1_sq
    }

    /// Variance of a sample in the given state.
    pub fn state_variance(&self, impulse: bool) -> f64 {
        if impulse {
            self.sigma1_sq + self.sigma2_sq
        } else {
            self.sigma1_sq
        }
    }
}

/// A finite, non-empty sequence of real noise samples.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationSequence(Vec<f64>);

impl ObservationSequence {
    pub fn new(samples: Vec<f64>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::EmptyInput);
        }
        if let Some(i) = samples.iter().position(|v| !v.is_finite()) {
            return Err(Error::domain(format!(
                "sample {i} is not finite ({})",
                samples[i]
            )));
        }
        Ok(Self(samples))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    /// Mean of the squared samples.
    pub fn mean_square(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>() / self.0.len() as f64
    }
}

impl Deref for ObservationSequence {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl TryFrom<Vec<f64>> for ObservationSequence {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

/// Binary impulse indicators; `true` marks an impulse.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct LabelSequence(Vec<bool>);

impl LabelSequence {
    pub fn new(labels: Vec<bool>) -> Self {
        Self(labels)
    }

    pub fn zeros(n: usize) -> Self {
        Self(vec![false; n])
    }

    /// Builds labels from `0`/`1` integers.
    pub fn from_bits(bits: &[u8]) -> Result<Self> {
        bits.iter()
            .enumerate()
            .map(|(i, &b)| match b {
                0 => Ok(false),
                1 => Ok(true),
                other => Err(Error::domain(format!(
                    "label {i} is {other}, expected 0 or 1"
                ))),
            })
            .collect::<Result<Vec<_>>>()
            .map(Self)
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<bool> {
        self.0
    }

    pub fn impulse_count(&self) -> usize {
        self.0.iter().filter(|&&b| b).count()
    }

    pub fn to_bits(&self) -> Vec<u8> {
        self.0.iter().map(|&b| u8::from(b)).collect()
    }
}

/// Serialized as a sequence of `0`/`1` integers.
impl Serialize for LabelSequence {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_seq(self.0.iter().map(|&b| u8::from(b)))
    }
}

impl<'de> Deserialize<'de> for LabelSequence {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let bits = Vec::<u8>::deserialize(d)?;
        Self::from_bits(&bits).map_err(serde::de::Error::custom)
    }
}

impl Deref for LabelSequence {
    type Target = [bool];

    fn deref(&self) -> &[bool] {
        &self.0
    }
}

/// Simulated noise together with the latent impulse states that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedNoise {
    pub observations: ObservationSequence,
    pub truth: LabelSequence,
    pub params: NoiseParams,
    pub seed: u64,
}

/// Draws `n` BG samples.
///
/// The stream is a ChaCha8 generator seeded from `seed`, so the output is
/// bit-identical across runs, platforms and thread counts.
pub fn generate(params: NoiseParams, n: usize, seed: u64) -> Result<GeneratedNoise> {
    let params = NoiseParams::new(params.rho, params.sigma1_sq, params.sigma2_sq)?;
    if n == 0 {
        return Err(Error::EmptyInput);
    }
    let bernoulli = Bernoulli::new(params.rho)
        .map_err(|e| Error::domain(format!("invalid impulse rate: {e}")))?;
    let sd_background = params.sigma1_sq.sqrt();
    let sd_impulse = (params.sigma1_sq + params.sigma2_sq).sqrt();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut samples = Vec::with_capacity(n);
    let mut truth = Vec::with_capacity(n);
    for _ in 0..n {
        let impulse = bernoulli.sample(&mut rng);
        let z: f64 = StandardNormal.sample(&mut rng);
        samples.push(z * if impulse { sd_impulse } else { sd_background });
        truth.push(impulse);
    }
    Ok(GeneratedNoise {
        observations: ObservationSequence(samples),
        truth: LabelSequence(truth),
        params,
        seed,
    })
}

/// Log-density of `N(0, variance)` at `x`.
#[inline]
pub fn gaussian_log_pdf(x: f64, variance: f64) -> f64 {
    -0.5 * (2.0 * PI * variance).ln() - x * x / (2.0 * variance)
}

/// `log f(x | label)`: the zero-mean Gaussian log-density with variance
/// `sigma1_sq + label * sigma2_sq`.
pub fn conditional_log_pdf(x: f64, impulse: bool, params: &NoiseParams) -> f64 {
    gaussian_log_pdf(x, params.state_variance(impulse))
}

/// Log of the two-component mixture density, evaluated with log-sum-exp.
pub fn mixture_log_pdf(x: f64, params: &NoiseParams) -> f64 {
    let background = (1.0 - params.rho).ln() + conditional_log_pdf(x, false, params);
    let impulse = params.rho.ln() + conditional_log_pdf(x, true, params);
    log_sum_exp(background, impulse)
}

/// Mixture density `(1 - rho) N(x; 0, s1) + rho N(x; 0, s1 + s2)`.
pub fn mixture_pdf(x: f64, params: &NoiseParams) -> f64 {
    mixture_log_pdf(x, params).exp()
}

fn log_sum_exp(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    if hi == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if lo == f64::NEG_INFINITY {
        return hi;
    }
    hi + (lo - hi).exp().ln_1p()
}
