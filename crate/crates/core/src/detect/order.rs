//! Magnitude-ordered view of a sequence.
//!
//! A thresholded labeling `|x_n| >= T` is identified with the number `k` of
//! samples it marks: the first `k` entries of the descending magnitude
//! order. Valid states are group boundaries, i.e. `k` never splits a run of
//! equal magnitudes.

use crate::LabelSequence;

pub(crate) struct MagnitudeOrder {
    /// Sample indices by descending `|x|`; ties keep ascending index order.
    pub order: Vec<usize>,
    /// `|x|` in `order`.
    pub mags: Vec<f64>,
    /// `top_sq[k]`: sum of squares of the first `k` entries.
    top_sq: Vec<f64>,
    /// `tail_sq[k]`: sum of squares of entries `k..N`.
    tail_sq: Vec<f64>,
}

impl MagnitudeOrder {
    pub fn new(x: &[f64]) -> Self {
        let n = x.len();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| x[b].abs().total_cmp(&x[a].abs()).then(a.cmp(&b)));
        let mags: Vec<f64> = order.iter().map(|&i| x[i].abs()).collect();

        let mut top_sq = Vec::with_capacity(n + 1);
        top_sq.push(0.0);
        let mut acc = 0.0;
        for m in &mags {
            acc += m * m;
            top_sq.push(acc);
        }
        // Separate suffix sums avoid cancellation in `total - top` when the
        // impulse set dominates the energy.
        let mut tail_sq = vec![0.0; n + 1];
        let mut acc = 0.0;
        for k in (0..n).rev() {
            acc += mags[k] * mags[k];
            tail_sq[k] = acc;
        }
        Self {
            order,
            mags,
            top_sq,
            tail_sq,
        }
    }

    pub fn len(&self) -> usize {
        self.mags.len()
    }

    pub fn impulse_sq(&self, k: usize) -> f64 {
        self.top_sq[k]
    }

    pub fn background_sq(&self, k: usize) -> f64 {
        self.tail_sq[k]
    }

    /// Number of samples with `|x| >= t`.
    pub fn count_at_or_above(&self, t: f64) -> usize {
        self.mags.partition_point(|&m| m >= t)
    }

    /// State after removing the smallest-magnitude impulse group.
    pub fn demoted(&self, k: usize) -> Option<usize> {
        (k > 0).then(|| {
            let m = self.mags[k - 1];
            self.mags.partition_point(|&v| v > m)
        })
    }

    /// State after adding the largest-magnitude background group.
    pub fn promoted(&self, k: usize) -> Option<usize> {
        (k < self.len()).then(|| {
            let m = self.mags[k];
            self.mags.partition_point(|&v| v >= m)
        })
    }

    /// Threshold realizing state `k`: the smallest impulse magnitude, or
    /// infinity for the empty impulse set.
    pub fn threshold(&self, k: usize) -> f64 {
        if k == 0 {
            f64::INFINITY
        } else {
            self.mags[k - 1]
        }
    }

    pub fn labels(&self, k: usize) -> LabelSequence {
        let mut labels = vec![false; self.len()];
        for &i in &self.order[..k] {
            labels[i] = true;
        }
        LabelSequence::new(labels)
    }

    /// Number of distinct magnitudes.
    #[cfg(test)]
    pub fn distinct(&self) -> usize {
        let mut count = 0;
        let mut k = 0;
        while let Some(next) = self.promoted(k) {
            count += 1;
            k = next;
        }
        count
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn groups_and_thresholds() {
        let x = [1.0, -3.0, 2.0, 3.0, -1.0, 0.5];
        let o = MagnitudeOrder::new(&x);
        assert_eq!(o.order, vec![1, 3, 2, 0, 4, 5]);
        assert_eq!(o.distinct(), 4);
        assert_eq!(o.count_at_or_above(2.5), 2);
        assert_eq!(o.count_at_or_above(3.0), 2);
        assert_eq!(o.count_at_or_above(f64::INFINITY), 0);
        assert_eq!(o.promoted(0), Some(2));
        assert_eq!(o.promoted(3), Some(5));
        assert_eq!(o.promoted(6), None);
        assert_eq!(o.demoted(5), Some(3));
        assert_eq!(o.demoted(2), Some(0));
        assert_eq!(o.demoted(0), None);
        assert_eq!(o.threshold(0), f64::INFINITY);
        assert_eq!(o.threshold(5), 1.0);
        assert_eq!(o.labels(3).to_bits(), vec![0, 1, 1, 1, 0, 0]);
        assert_eq!(o.impulse_sq(2), 18.0);
        assert_eq!(o.background_sq(2), 4.0 + 1.0 + 1.0 + 0.25);
    }
}
