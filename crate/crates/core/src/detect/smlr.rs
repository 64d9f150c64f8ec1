use serde::{Deserialize, Serialize};

use super::scoring::{Scorer, ScoringModel};
use super::DetectorConfig;
use crate::posterior::{PlugInEstimate, PosteriorScore};
use crate::{Error, LabelSequence, ObservationSequence, Result};

/// Output of [`smlr`]. Labels need not be thresholded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmlrResult {
    pub labels: LabelSequence,
    pub estimate: PlugInEstimate,
    pub score: PosteriorScore,
    /// Number of accepted single-label flips.
    pub loops: usize,
    pub converged: bool,
}

/// Single most likely replacement: repeatedly apply the one label flip
/// that raises the score the most, until no flip helps.
///
/// Every iteration scores all `N` flips, so this is a reference detector
/// for modest `N`; `cfg.max_loops` bounds the number of flips.
pub fn smlr(
    x: &ObservationSequence,
    model: ScoringModel,
    init: &LabelSequence,
    cfg: &DetectorConfig,
) -> Result<SmlrResult> {
    cfg.validate()?;
    if init.len() != x.len() {
        return Err(Error::ShapeMismatch {
            left: x.len(),
            right: init.len(),
        });
    }
    let scorer = Scorer::new(model, x, cfg.floor())?;
    let budget = cfg.loop_budget(x.len());
    let mut labels = init.clone().into_inner();
    let mut loops = 0;
    let mut converged = false;

    while loops < budget {
        // Exact sums each round; nothing accumulates across flips.
        let (mut k, mut imp, mut bg) = (0usize, 0.0, 0.0);
        for (&v, &l) in x.iter().zip(&labels) {
            if l {
                k += 1;
                imp += v * v;
            } else {
                bg += v * v;
            }
        }
        let current = scorer.log_score(k, imp, bg);

        let mut best: Option<(usize, f64)> = None;
        for (i, (&v, &l)) in x.iter().zip(&labels).enumerate() {
            let sq = v * v;
            let s = if l {
                scorer.log_score(k - 1, (imp - sq).max(0.0), bg + sq)
            } else {
                scorer.log_score(k + 1, imp + sq, (bg - sq).max(0.0))
            };
            if s > best.map_or(current, |b| b.1) {
                best = Some((i, s));
            }
        }
        match best {
            Some((i, _)) => {
                labels[i] = !labels[i];
                loops += 1;
            }
            None => {
                converged = true;
                break;
            }
        }
    }

    let labels = LabelSequence::new(labels);
    let estimate = scorer.full_estimate(x, &labels)?;
    let log_score = scorer.full_score(x, &labels)?;
    Ok(SmlrResult {
        labels,
        estimate,
        score: PosteriorScore { log_score },
        loops,
        converged,
    })
}
