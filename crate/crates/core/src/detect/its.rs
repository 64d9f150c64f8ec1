use super::order::MagnitudeOrder;
use super::scoring::{Scorer, ScoringModel};
use super::{DetectionResult, DetectorConfig, InitRule, ScoreEval};
use crate::posterior::PosteriorScore;
use crate::robust::{gini_descending, mad, ssi_from_parts};
use crate::{Error, ObservationSequence, Result};

/// Shifts between consistency checks of the incremental score against a
/// full recomputation (debug builds).
pub const RESYNC_INTERVAL: usize = 64;

/// ITS with known Gaussian variances.
///
/// `rho` is re-estimated from every candidate unless `cfg.fixed_rho` is set.
/// `cfg.estimator` is ignored.
pub fn its_known(
    x: &ObservationSequence,
    sigma1_sq: f64,
    sigma2_sq: f64,
    cfg: &DetectorConfig,
) -> Result<DetectionResult> {
    cfg.validate()?;
    let model = ScoringModel::Known {
        sigma1_sq,
        sigma2_sq,
        fixed_rho: cfg.fixed_rho,
    };
    run(x, model, cfg)
}

/// ITS with all parameters re-estimated per candidate by `cfg.estimator`.
pub fn its_blind(x: &ObservationSequence, cfg: &DetectorConfig) -> Result<DetectionResult> {
    cfg.validate()?;
    if x.len() < 2 {
        return Err(Error::DegenerateInput(
            "blind detection needs at least two samples".into(),
        ));
    }
    if x.iter().all(|&v| v == 0.0) {
        return Err(Error::DegenerateInput("all samples are zero".into()));
    }
    run(
        x,
        ScoringModel::PlugIn {
            estimator: cfg.estimator,
        },
        cfg,
    )
}

fn initial_threshold(x: &[f64], order: &MagnitudeOrder, cfg: &DetectorConfig) -> Result<f64> {
    match cfg.init {
        // Reuse the magnitude sort instead of sorting again inside `gini`.
        InitRule::Ssi => Ok(ssi_from_parts(
            cfg.ssi_coefficient,
            gini_descending(&order.mags)?,
            mad(x)?,
        )),
        _ => cfg.initial_threshold(x),
    }
}

fn run(
    x: &ObservationSequence,
    model: ScoringModel,
    cfg: &DetectorConfig,
) -> Result<DetectionResult> {
    let order = MagnitudeOrder::new(x);
    let scorer = Scorer::new(model, x, cfg.floor())?;
    let t0 = initial_threshold(x, &order, cfg)?;

    let incremental = |k: usize| scorer.log_score(k, order.impulse_sq(k), order.background_sq(k));
    let eval = |k: usize| -> Result<f64> {
        match cfg.score_eval {
            ScoreEval::Incremental => Ok(incremental(k)),
            ScoreEval::Full => scorer.full_score(x, &order.labels(k)),
        }
    };

    let budget = cfg.loop_budget(x.len());
    let mut k = order.count_at_or_above(t0);
    let mut score = eval(k)?;
    let mut trace = vec![t0];
    let mut loops = 0;
    let mut converged = false;

    while loops < budget {
        loops += 1;
        let demote = order
            .demoted(k)
            .map(|c| eval(c).map(|s| (c, s)))
            .transpose()?;
        let promote = order
            .promoted(k)
            .map(|c| eval(c).map(|s| (c, s)))
            .transpose()?;

        // Strict improvement only; demotion wins ties with promotion.
        let mut best: Option<(usize, f64)> = None;
        for (cand, s) in [demote, promote].into_iter().flatten() {
            if s > best.map_or(score, |b| b.1) {
                best = Some((cand, s));
            }
        }
        let Some((next, next_score)) = best else {
            converged = true;
            break;
        };
        k = next;
        score = next_score;
        trace.push(order.threshold(k));

        let shifts = trace.len() - 1;
        if cfg.score_eval == ScoreEval::Incremental && shifts % RESYNC_INTERVAL == 0 {
            debug_assert!({
                let full = scorer.full_score(x, &order.labels(k))?;
                (full - score).abs() <= 1e-6
            });
        }
    }

    let labels = order.labels(k);
    let estimate = scorer.full_estimate(x, &labels)?;
    let log_score = scorer.full_score(x, &labels)?;
    Ok(DetectionResult {
        labels,
        estimate,
        score: PosteriorScore { log_score },
        loops,
        threshold_trace: trace,
        converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detect::classify_threshold;
    use crate::model::{generate, NoiseParams};
    use crate::posterior::EstimatorKind;

    fn obs(v: &[f64]) -> ObservationSequence {
        ObservationSequence::new(v.to_vec()).unwrap()
    }

    fn fixed(t0: f64) -> DetectorConfig {
        DetectorConfig {
            init: InitRule::Fixed(t0),
            ..Default::default()
        }
    }

    #[test]
    fn known_small_case_finds_the_single_impulse() {
        // Brute force over all eight labelings puts the optimum at {0,0,1}.
        for t0 in [100.0, 0.0, 0.15, 50.0] {
            let r = its_known(&obs(&[0.1, 0.2, 50.0]), 1.0, 1e4, &fixed(t0)).unwrap();
            assert_eq!(r.labels.to_bits(), vec![0, 0, 1], "t0 = {t0}");
            assert!(r.converged);
            assert!((r.score.log_score - (-9.421_565_789_236_59)).abs() < 1e-9);
        }
    }

    #[test]
    fn fixed_init_is_recorded() {
        let r = its_known(&obs(&[0.1, -2.0, 7.0]), 1.0, 100.0, &fixed(3.0)).unwrap();
        assert_eq!(r.threshold_trace[0], 3.0);
    }

    #[test]
    fn all_impulse_start_terminates() {
        let x = obs(&[0.3, -0.1, 0.2, 0.4, 0.05]);
        let r = its_known(&x, 1.0, 1e4, &fixed(0.0)).unwrap();
        assert!(r.converged);
        // Every sample is demoted in turn, then one final check.
        assert_eq!(r.labels.impulse_count(), 0);
        assert_eq!(r.loops, x.len() + 1);
        assert_eq!(r.labels, classify_threshold(&x, r.final_threshold()));
    }

    #[test]
    fn budget_exhaustion_is_reported() {
        let g = generate(NoiseParams::new(0.0, 1.0, 1.0).unwrap(), 1000, 1).unwrap();
        let cfg = DetectorConfig {
            init: InitRule::Fixed(0.0),
            fixed_rho: Some(0.01),
            max_loops: Some(3),
            ..Default::default()
        };
        let r = its_known(&g.observations, 1.0, 1e4, &cfg).unwrap();
        assert_eq!(r.loops, 3);
        assert!(!r.converged);
        assert_eq!(r.shifts(), 3);
    }

    #[test]
    fn known_pure_gaussian_finds_few_impulses() {
        let p = NoiseParams::new(0.0, 1.0, 1.0).unwrap();
        let cfg = DetectorConfig {
            init: InitRule::ThreeSigma,
            ..Default::default()
        };
        for seed in 0..50 {
            let g = generate(p, 1000, seed).unwrap();
            let r = its_known(&g.observations, 1.0, 1e4, &cfg).unwrap();
            assert!(r.labels.impulse_count() <= 10, "seed {seed}");
        }
    }

    #[test]
    fn blind_pure_gaussian_keeps_rho_small() {
        let p = NoiseParams::new(0.0, 1.0, 1.0).unwrap();
        for seed in 0..50 {
            let g = generate(p, 10_000, seed).unwrap();
            let r = its_blind(&g.observations, &DetectorConfig::default()).unwrap();
            assert!(
                r.estimate.params.rho <= 1e-3,
                "seed {seed}: {}",
                r.estimate.params.rho
            );
        }
    }

    #[test]
    fn blind_rejects_degenerate_input() {
        let cfg = DetectorConfig::default();
        assert!(matches!(
            its_blind(&obs(&[0.0; 4]), &cfg),
            Err(Error::DegenerateInput(_))
        ));
        assert!(matches!(
            its_blind(&obs(&[1.0]), &cfg),
            Err(Error::DegenerateInput(_))
        ));
    }

    #[test]
    fn incremental_matches_full_recomputation() {
        let p = NoiseParams::new(0.02, 1.0, 300.0).unwrap();
        for (seed, estimator) in [(1, EstimatorKind::Robust), (2, EstimatorKind::Ergodic)] {
            let g = generate(p, 3000, seed).unwrap();
            for init in [InitRule::Ssi, InitRule::ThreeSigma] {
                let base = DetectorConfig {
                    estimator,
                    init,
                    ..Default::default()
                };
                let inc = its_blind(&g.observations, &base).unwrap();
                let full = its_blind(
                    &g.observations,
                    &DetectorConfig {
                        score_eval: ScoreEval::Full,
                        ..base
                    },
                )
                .unwrap();
                assert_eq!(inc.labels, full.labels);
                assert_eq!(inc.threshold_trace, full.threshold_trace);
                assert!((inc.score.log_score - full.score.log_score).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn blind_is_deterministic() {
        let g = generate(NoiseParams::new(0.01, 1.0, 1e3).unwrap(), 20_000, 5).unwrap();
        let cfg = DetectorConfig::default();
        assert_eq!(
            its_blind(&g.observations, &cfg).unwrap(),
            its_blind(&g.observations, &cfg).unwrap()
        );
    }
}
