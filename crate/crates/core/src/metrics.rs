//! Evaluation metrics: Harrell's C-index, pooled AUROC, the mean timing
//! distance, and ensemble score spread, plus the per-window report.
//!
//! Undefined metrics surface as explicit nulls with a reason, never as
//! silent zeros.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::CurveEnsemble;
use crate::predict::{ensemble_predict, PredictorSpec};
use crate::survival::{build_label_matrix, LabelMatrix, SurvivalCurve, TimeGrid};

/// Harrell's concordance index.
///
/// Over comparable pairs — `i` has an event at `t_i` and `t_i < t_j` — a
/// pair is concordant when `risk_i > risk_j` with `risk = 1 - S(t_i)`
/// evaluated at the earlier event time; risk ties count 0.5.
pub fn concordance_index(
    curves: &[SurvivalCurve],
    times: &[usize],
    events: &[bool],
) -> Result<f64> {
    let (concordant, pairs) = concordance_counts(curves, times, events, None);
    if pairs == 0 {
        return Err(Error::UndefinedMetric("no comparable pairs".into()));
    }
    Ok(concordant / pairs as f64)
}

/// Concordant mass and pair count; `window` restricts to pairs whose earlier
/// event falls at that interval. Deterministic summation order (i, then j).
fn concordance_counts(
    curves: &[SurvivalCurve],
    times: &[usize],
    events: &[bool],
    window: Option<usize>,
) -> (f64, usize) {
    let mut concordant = 0.0;
    let mut pairs = 0usize;
    for i in 0..curves.len() {
        if !events[i] {
            continue;
        }
        let t_i = times[i];
        if let Some(w) = window {
            if t_i != w {
                continue;
            }
        }
        let risk_i = 1.0 - curves[i].at(t_i);
        for j in 0..curves.len() {
            if times[j] <= t_i {
                continue;
            }
            let risk_j = 1.0 - curves[j].at(t_i);
            if risk_i > risk_j {
                concordant += 1.0;
            } else if risk_i == risk_j {
                concordant += 0.5;
            }
            pairs += 1;
        }
    }
    (concordant, pairs)
}

/// Pooled AUROC over observed person-time: every entry `j <= t_i` is scored
/// by `S(j)` and labeled by the survival indicator `e(j)`. Computed by the
/// rank statistic with midrank tie handling.
pub fn auroc_pooled(curves: &[SurvivalCurve], labels: &[LabelMatrix]) -> Result<f64> {
    let mut scored: Vec<(f64, bool)> = Vec::new();
    for (curve, label) in curves.iter().zip(labels) {
        let t_i = label.e_row().iter().filter(|&&e| e == 1).count() + 1;
        for j in 1..=t_i {
            scored.push((curve.at(j), label.e_row()[j - 1] == 1));
        }
    }
    auroc_from_scores(&scored)
}

fn auroc_from_scores(scored: &[(f64, bool)]) -> Result<f64> {
    let n_pos = scored.iter().filter(|(_, pos)| *pos).count();
    let n_neg = scored.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::UndefinedMetric(
            "pooled entries contain a single class".into(),
        ));
    }

    let mut order: Vec<usize> = (0..scored.len()).collect();
    order.sort_by(|&a, &b| scored[a].0.partial_cmp(&scored[b].0).unwrap());

    // midranks over tie groups
    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j < order.len() && scored[order[j]].0 == scored[order[i]].0 {
            j += 1;
        }
        let midrank = (i + 1 + j) as f64 / 2.0; // average of ranks i+1..=j
        for &idx in &order[i..j] {
            if scored[idx].1 {
                rank_sum_pos += midrank;
            }
        }
        i = j;
    }

    let u = rank_sum_pos - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Ok(u / (n_pos as f64 * n_neg as f64))
}

/// Mean absolute difference between predicted and true times, in interval
/// units. Beyond-horizon sentinels arrive already scored at the horizon.
pub fn distance_score(predicted: &[usize], true_times: &[usize]) -> Result<f64> {
    if predicted.is_empty() || predicted.len() != true_times.len() {
        return Err(Error::InvalidInput(
            "distance_score needs aligned, non-empty time lists".into(),
        ));
    }
    let total: f64 = predicted
        .iter()
        .zip(true_times)
        .map(|(&a, &b)| (a as f64 - b as f64).abs())
        .sum();
    Ok(total / predicted.len() as f64)
}

/// Mean over records of the per-record ensemble spread of predicted times.
pub fn score_std(ensembles: &[CurveEnsemble], predictor: &PredictorSpec) -> Result<f64> {
    if ensembles.is_empty() {
        return Err(Error::InvalidInput("score_std needs at least one ensemble".into()));
    }
    let mut total = 0.0;
    for ens in ensembles {
        total += ensemble_predict(ens, predictor)?.spread;
    }
    Ok(total / ensembles.len() as f64)
}

/// One record's outputs as consumed by `evaluate_all`.
#[derive(Debug, Clone)]
pub struct RecordEval {
    pub id: String,
    pub mean_curve: SurvivalCurve,
    /// Predicted time with sentinels mapped to the horizon.
    pub t_hat: usize,
    pub spread: f64,
}

impl RecordEval {
    pub fn from_ensemble(ens: &CurveEnsemble, predictor: &PredictorSpec) -> Result<Self> {
        let pred = ensemble_predict(ens, predictor)?;
        Ok(RecordEval {
            id: ens.id.clone(),
            mean_curve: ens.mean.clone(),
            t_hat: pred.t_hat,
            spread: pred.spread,
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PerWindow {
    pub auroc: Vec<Option<f64>>,
    pub c_index: Vec<Option<f64>>,
}

/// The full evaluation suite. `auroc` and `c_index` are per-window averages
/// over windows with at least one valid pair, matching how the per-window
/// arrays are reduced.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricReport {
    pub auroc: Option<f64>,
    pub c_index: Option<f64>,
    pub distance_score: f64,
    pub score_std: f64,
    pub n_records: usize,
    pub n_comparable_pairs: usize,
    pub per_window: PerWindow,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub auroc_undefined_reason: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c_index_undefined_reason: Option<String>,
}

/// Computes all four metrics per estimation window and averages the
/// window-level discrimination metrics.
pub fn evaluate_all(
    records: &[RecordEval],
    times: &[usize],
    events: &[bool],
    horizon: usize,
) -> Result<MetricReport> {
    if records.is_empty() || records.len() != times.len() || records.len() != events.len() {
        return Err(Error::InvalidInput(
            "evaluate_all needs aligned, non-empty inputs".into(),
        ));
    }
    let curves: Vec<SurvivalCurve> = records.iter().map(|r| r.mean_curve.clone()).collect();
    let grid = TimeGrid::with_horizon(horizon)?;
    let labels: Vec<LabelMatrix> = times
        .iter()
        .zip(events)
        .map(|(&t, &e)| build_label_matrix(t, e, &grid))
        .collect::<Result<_>>()?;

    // per-window C-index: pairs whose earlier event falls in the window
    let mut c_windows: Vec<Option<f64>> = Vec::with_capacity(horizon);
    let mut n_pairs = 0usize;
    for w in 1..=horizon {
        let (concordant, pairs) = concordance_counts(&curves, times, events, Some(w));
        n_pairs += pairs;
        c_windows.push(if pairs > 0 {
            Some(concordant / pairs as f64)
        } else {
            None
        });
    }

    // per-window AUROC over the entries observed at that interval
    let mut a_windows: Vec<Option<f64>> = Vec::with_capacity(horizon);
    for w in 1..=horizon {
        let scored: Vec<(f64, bool)> = curves
            .iter()
            .zip(&labels)
            .zip(times)
            .filter(|((_, _), &t_i)| w <= t_i)
            .map(|((curve, label), _)| (curve.at(w), label.e_row()[w - 1] == 1))
            .collect();
        a_windows.push(auroc_from_scores(&scored).ok());
    }

    let average = |windows: &[Option<f64>]| -> Option<f64> {
        let defined: Vec<f64> = windows.iter().flatten().copied().collect();
        if defined.is_empty() {
            None
        } else {
            Some(defined.iter().sum::<f64>() / defined.len() as f64)
        }
    };
    let c_index = average(&c_windows);
    let auroc = average(&a_windows);

    let predicted: Vec<usize> = records.iter().map(|r| r.t_hat).collect();
    let distance = distance_score(&predicted, times)?;
    let spread = records.iter().map(|r| r.spread).sum::<f64>() / records.len() as f64;

    Ok(MetricReport {
        auroc,
        c_index,
        distance_score: distance,
        score_std: spread,
        n_records: records.len(),
        n_comparable_pairs: n_pairs,
        per_window: PerWindow {
            auroc: a_windows,
            c_index: c_windows,
        },
        auroc_undefined_reason: if auroc.is_none() {
            Some("no window had both surviving and non-surviving entries".into())
        } else {
            None
        },
        c_index_undefined_reason: if c_index.is_none() {
            Some("no comparable pairs in any window".into())
        } else {
            None
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::survival::{hazard_to_survival, HazardSequence};
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn flat_curve(level: f64, horizon: usize) -> SurvivalCurve {
        // constant-per-step survival level^t
        let h = HazardSequence::new(vec![1.0 - level; horizon]).unwrap();
        hazard_to_survival(&h)
    }

    #[test]
    fn perfectly_anti_ordered_risks_score_one() {
        let curves = vec![
            flat_curve(0.2, 4),
            flat_curve(0.5, 4),
            flat_curve(0.9, 4),
        ];
        let c = concordance_index(&curves, &[1, 2, 3], &[true, true, true]).unwrap();
        assert_eq!(c, 1.0);
    }

    #[test]
    fn all_ties_score_half() {
        let curves = vec![flat_curve(0.5, 4); 3];
        let c = concordance_index(&curves, &[1, 2, 3], &[true, true, true]).unwrap();
        assert_eq!(c, 0.5);
    }

    #[test]
    fn no_comparable_pairs_is_undefined() {
        let curves = vec![flat_curve(0.5, 4); 2];
        assert!(concordance_index(&curves, &[3, 2], &[false, false]).is_err());
    }

    // exhaustive pair-enumeration oracle, written independently
    fn c_index_oracle(curves: &[SurvivalCurve], times: &[usize], events: &[bool]) -> f64 {
        let mut num = 0.0;
        let mut den = 0.0;
        for i in 0..curves.len() {
            for j in 0..curves.len() {
                if !(events[i] && times[i] < times[j]) {
                    continue;
                }
                let ri = 1.0 - curves[i].at(times[i]);
                let rj = 1.0 - curves[j].at(times[i]);
                den += 1.0;
                if ri > rj {
                    num += 1.0;
                } else if ri == rj {
                    num += 0.5;
                }
            }
        }
        num / den
    }

    #[test]
    fn matches_exhaustive_oracle_on_random_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for _ in 0..20 {
            let n = 6;
            let horizon = 5;
            let curves: Vec<SurvivalCurve> = (0..n)
                .map(|_| {
                    let h: Vec<f64> = (0..horizon).map(|_| rng.gen_range(0.0..0.6)).collect();
                    hazard_to_survival(&HazardSequence::new(h).unwrap())
                })
                .collect();
            let times: Vec<usize> = (0..n).map(|_| rng.gen_range(1..=horizon)).collect();
            let events: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.6)).collect();
            if let Ok(c) = concordance_index(&curves, &times, &events) {
                assert_eq!(c, c_index_oracle(&curves, &times, &events));
            }
        }
    }

    #[test]
    fn auroc_perfect_separation() {
        let scored = vec![(0.9, true), (0.8, true), (0.2, false), (0.1, false)];
        assert_eq!(auroc_from_scores(&scored).unwrap(), 1.0);
    }

    #[test]
    fn auroc_constant_scores_are_random() {
        let scored = vec![(0.5, true), (0.5, false), (0.5, true), (0.5, false)];
        assert_eq!(auroc_from_scores(&scored).unwrap(), 0.5);
    }

    #[test]
    fn auroc_single_class_is_undefined() {
        let scored = vec![(0.5, true), (0.4, true)];
        assert!(auroc_from_scores(&scored).is_err());
    }

    // brute-force positive x negative pair comparison
    fn auroc_oracle(scored: &[(f64, bool)]) -> f64 {
        let pos: Vec<f64> = scored.iter().filter(|(_, p)| *p).map(|(s, _)| *s).collect();
        let neg: Vec<f64> = scored.iter().filter(|(_, p)| !*p).map(|(s, _)| *s).collect();
        let mut total = 0.0;
        for &p in &pos {
            for &n in &neg {
                total += if p > n {
                    1.0
                } else if p == n {
                    0.5
                } else {
                    0.0
                };
            }
        }
        total / (pos.len() * neg.len()) as f64
    }

    #[test]
    fn auroc_matches_brute_force_with_ties() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..30 {
            let scored: Vec<(f64, bool)> = (0..20)
                .map(|_| {
                    // coarse grid to force ties
                    let s = rng.gen_range(0..5) as f64 / 4.0;
                    (s, rng.gen_bool(0.5))
                })
                .collect();
            if let Ok(a) = auroc_from_scores(&scored) {
                assert!((a - auroc_oracle(&scored)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn reversed_scores_flip_auroc() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let scored: Vec<(f64, bool)> = (0..30)
            .map(|_| (rng.gen_range(0.0..1.0), rng.gen_bool(0.5)))
            .collect();
        let reversed: Vec<(f64, bool)> = scored.iter().map(|&(s, p)| (-s, p)).collect();
        let a = auroc_from_scores(&scored).unwrap();
        let b = auroc_from_scores(&reversed).unwrap();
        assert!((a + b - 1.0).abs() < 1e-12);
    }

    #[test]
    fn auroc_is_rank_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let scored: Vec<(f64, bool)> = (0..25)
            .map(|_| (rng.gen_range(0.0..1.0), rng.gen_bool(0.4)))
            .collect();
        let transformed: Vec<(f64, bool)> =
            scored.iter().map(|&(s, p)| (s.exp() * 3.0 + 1.0, p)).collect();
        let a = auroc_from_scores(&scored).unwrap();
        let b = auroc_from_scores(&transformed).unwrap();
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn distance_exact_predictions_are_zero() {
        assert_eq!(distance_score(&[3, 5], &[3, 5]).unwrap(), 0.0);
    }

    #[test]
    fn distance_hand_sum() {
        assert_eq!(distance_score(&[5, 3], &[4, 3]).unwrap(), 0.5);
    }

    #[test]
    fn distance_sentinel_scored_at_horizon() {
        // sentinel arrives as t_hat = horizon = 10 against truth 7
        assert_eq!(distance_score(&[10], &[7]).unwrap(), 3.0);
    }

    #[test]
    fn evaluate_all_perfect_oracle_predictions() {
        // risks anti-ordered with event times, predictions exact
        let horizon = 4;
        let levels = [0.1, 0.5, 0.9, 0.95];
        let times = [1usize, 2, 3, 4];
        let events = [true, true, true, false];
        let records: Vec<RecordEval> = levels
            .iter()
            .zip(&times)
            .enumerate()
            .map(|(i, (&lvl, &t))| RecordEval {
                id: format!("r{i}"),
                mean_curve: flat_curve(lvl, horizon),
                t_hat: t,
                spread: 0.0,
            })
            .collect();
        let report = evaluate_all(&records, &times, &events, horizon).unwrap();
        assert_eq!(report.c_index, Some(1.0));
        assert_eq!(report.auroc, Some(1.0));
        assert_eq!(report.distance_score, 0.0);
        assert_eq!(report.score_std, 0.0);
        assert!(report.n_comparable_pairs > 0);
    }

    #[test]
    fn evaluate_all_survives_degenerate_curves() {
        // stacked all-0/1 curves must not crash; metrics may be null
        let horizon = 3;
        let step = SurvivalCurve::new(vec![1.0, 0.0, 0.0]).unwrap();
        let records: Vec<RecordEval> = (0..3)
            .map(|i| RecordEval {
                id: format!("r{i}"),
                mean_curve: step.clone(),
                t_hat: horizon,
                spread: 0.0,
            })
            .collect();
        let report = evaluate_all(&records, &[1, 2, 3], &[true, true, false], horizon).unwrap();
        assert!(report.distance_score >= 0.0);
    }

    #[test]
    fn random_scores_hover_near_half() {
        let mut rng = ChaCha8Rng::seed_from_u64(55);
        let horizon = 6;
        let n = 50;
        let curves: Vec<SurvivalCurve> = (0..n)
            .map(|_| {
                let h: Vec<f64> = (0..horizon).map(|_| rng.gen_range(0.05..0.5)).collect();
                hazard_to_survival(&HazardSequence::new(h).unwrap())
            })
            .collect();
        let times: Vec<usize> = (0..n).map(|_| rng.gen_range(1..=horizon)).collect();
        let events: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.7)).collect();
        let c = concordance_index(&curves, &times, &events).unwrap();
        // ~3 standard errors for a rank statistic at this pair count
        assert!((c - 0.5).abs() < 0.2, "c = {c}");
    }
}
