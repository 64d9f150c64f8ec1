//! Bernoulli-Gaussian (BG) impulsive noise toolkit.
//!
//! A BG sample is zero-mean Gaussian with variance `sigma1_sq` (background)
//! or `sigma1_sq + sigma2_sq` (impulse), the state being drawn i.i.d. with
//! probability `rho`. This crate generates such noise, scores candidate
//! impulse labelings with a plug-in posterior, and detects impulses with
//! iterative threshold shifting (ITS), a search over magnitude thresholds
//! that only ever evaluates two neighbouring candidates per loop.
//!
//! Module map:
//!
//! * [`model`]: domain types, generation, mixture and conditional densities.
//! * [`io`]: the plain-text and `.f64` sample/label file formats.
//! * [`robust`]: MAD, Gini index, three-sigma and sparsity-sensitive thresholds.
//! * [`posterior`]: plug-in parameter estimates and label log-posteriors.
//! * [`detect`]: ITS (known and blind), SMLR, exhaustive MAP, three-sigma baseline.
//! * [`bench`]: seeded Monte-Carlo grid harness and reference-table comparison.

pub mod bench;
pub mod detect;
mod error;
pub mod io;
pub mod model;
pub mod posterior;
pub mod robust;

pub use error::{Error, Result};
pub use model::{GeneratedNoise, LabelSequence, NoiseParams, ObservationSequence};
