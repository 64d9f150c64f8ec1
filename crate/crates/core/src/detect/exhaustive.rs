use crate::model::gaussian_log_pdf;
use crate::posterior::log_prior_counts;
use crate::{Error, LabelSequence, NoiseParams, ObservationSequence, Result};

/// Largest input accepted by [`exhaustive_map`].
pub const EXHAUSTIVE_MAX_LEN: usize = 20;

/// Maximizes the log-posterior over all `2^N` labelings.
///
/// The Gaussian variances come from `params`. The prior uses `fixed_rho`
/// when given and otherwise each labeling's own impulse fraction
/// (`params.rho` is ignored). Ties go to fewer impulses, then to the
/// lexicographically smallest labeling.
pub fn exhaustive_map(
    x: &ObservationSequence,
    params: &NoiseParams,
    fixed_rho: Option<f64>,
) -> Result<LabelSequence> {
    let n = x.len();
    if n > EXHAUSTIVE_MAX_LEN {
        return Err(Error::Capacity {
            len: n,
            max: EXHAUSTIVE_MAX_LEN,
        });
    }
    NoiseParams::new(
        fixed_rho.unwrap_or(params.rho),
        params.sigma1_sq,
        params.sigma2_sq,
    )?;

    let bg: Vec<f64> = x
        .iter()
        .map(|&v| gaussian_log_pdf(v, params.sigma1_sq))
        .collect();
    let imp: Vec<f64> = x
        .iter()
        .map(|&v| gaussian_log_pdf(v, params.sigma1_sq + params.sigma2_sq))
        .collect();

    let mut best_mask = 0u32;
    let mut best_score = f64::NEG_INFINITY;
    let mut best_k = usize::MAX;
    for mask in 0u32..(1u32 << n) {
        let k = mask.count_ones() as usize;
        let rho = fixed_rho.unwrap_or(k as f64 / n as f64);
        let mut s = log_prior_counts(k, n, rho);
        for i in 0..n {
            s += if mask >> i & 1 == 1 { imp[i] } else { bg[i] };
        }
        let better = s > best_score
            || (s == best_score && (k < best_k || (k == best_k && lex_less(mask, best_mask))));
        if better {
            best_mask = mask;
            best_score = s;
            best_k = k;
        }
    }
    Ok(LabelSequence::new(
        (0..n).map(|i| best_mask >> i & 1 == 1).collect(),
    ))
}

/// Bit `i` holds label `i`; the first differing label decides.
fn lex_less(a: u32, b: u32) -> bool {
    let diff = a ^ b;
    diff != 0 && a & (diff & diff.wrapping_neg()) == 0
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> NoiseParams {
        NoiseParams::new(0.5, 1.0, 1e4).unwrap()
    }

    #[test]
    fn examples() {
        let x = ObservationSequence::new(vec![0.0]).unwrap();
        assert_eq!(
            exhaustive_map(&x, &params(), None).unwrap().to_bits(),
            vec![0]
        );
        let x = ObservationSequence::new(vec![0.1, 0.2, 50.0]).unwrap();
        assert_eq!(
            exhaustive_map(&x, &params(), None).unwrap().to_bits(),
            vec![0, 0, 1]
        );
    }

    #[test]
    fn capacity_limit() {
        let x = ObservationSequence::new(vec![1.0; 21]).unwrap();
        assert!(matches!(
            exhaustive_map(&x, &params(), None),
            Err(Error::Capacity { len: 21, max: 20 })
        ));
    }

    #[test]
    fn lexicographic_order() {
        assert!(lex_less(0b10, 0b01));
        assert!(!lex_less(0b01, 0b10));
        assert!(!lex_less(0b11, 0b11));
    }
}
