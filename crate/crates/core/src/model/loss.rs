//! Training losses over batches of per-record factual hazards (or event
//! probabilities) and their label matrices, with analytic gradients.
//!
//! Hazard vectors are truncated to each record's observed length; intervals
//! past `t_i` never contribute.

use crate::survival::LabelMatrix;

/// Observed length and event flag encoded by a label matrix.
pub(crate) fn label_target(label: &LabelMatrix) -> (usize, bool) {
    let t_i = label.e_row().iter().filter(|&&e| e == 1).count() + 1;
    let event = label.c_row().iter().any(|&c| c == 1);
    (t_i, event)
}

/// Negative log likelihood of the first-hitting-time / censoring joint
/// distribution, averaged over the batch.
///
/// Event at `t_i`: `-[log h(t_i) + sum_{j<t_i} log(1-h(j))]`; censored at
/// `t_i`: `-sum_{j<=t_i} log(1-h(j))`.
pub fn likelihood_loss(hazards: &[Vec<f64>], labels: &[LabelMatrix]) -> f64 {
    assert_eq!(hazards.len(), labels.len());
    if hazards.is_empty() {
        return 0.0;
    }
    let mut total = 0.0;
    for (h, label) in hazards.iter().zip(labels) {
        let (t_i, event) = label_target(label);
        let mut loss = 0.0;
        if event {
            loss -= h[t_i - 1].ln();
            for &hj in &h[..t_i - 1] {
                loss -= (1.0 - hj).ln();
            }
        } else {
            for &hj in &h[..t_i] {
                loss -= (1.0 - hj).ln();
            }
        }
        total += loss;
    }
    total / hazards.len() as f64
}

/// d(likelihood_loss)/d(hazard), per record per step; zero past `t_i`.
pub(crate) fn likelihood_grad(hazards: &[Vec<f64>], labels: &[LabelMatrix]) -> Vec<Vec<f64>> {
    let scale = 1.0 / hazards.len() as f64;
    hazards
        .iter()
        .zip(labels)
        .map(|(h, label)| {
            let (t_i, event) = label_target(label);
            let mut g = vec![0.0; h.len()];
            if event {
                g[t_i - 1] = -scale / h[t_i - 1];
                for j in 0..t_i - 1 {
                    g[j] = scale / (1.0 - h[j]);
                }
            } else {
                for j in 0..t_i {
                    g[j] = scale / (1.0 - h[j]);
                }
            }
            g
        })
        .collect()
}

fn survival_prefix(hazards: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(hazards.len());
    let mut acc = 1.0;
    for &h in hazards {
        acc *= 1.0 - h;
        out.push(acc);
    }
    out
}

/// Exponential concordance surrogate over comparable pairs: `i` has an event
/// at `t_i` and `t_i < t_j`; each pair contributes
/// `exp((S_i(t_i) - S_j(t_i)) / sigma)`, normalized by the pair count.
pub fn rank_loss(hazards: &[Vec<f64>], labels: &[LabelMatrix], sigma: f64) -> f64 {
    let survivals: Vec<Vec<f64>> = hazards.iter().map(|h| survival_prefix(h)).collect();
    let targets: Vec<(usize, bool)> = labels.iter().map(label_target).collect();

    let mut total = 0.0;
    let mut pairs = 0usize;
    for (i, &(t_i, event_i)) in targets.iter().enumerate() {
        if !event_i {
            continue;
        }
        for (j, &(t_j, _)) in targets.iter().enumerate() {
            if t_j <= t_i {
                continue;
            }
            total += ((survivals[i][t_i - 1] - survivals[j][t_i - 1]) / sigma).exp();
            pairs += 1;
        }
    }
    if pairs == 0 {
        0.0
    } else {
        total / pairs as f64
    }
}

/// d(rank_loss)/d(S(t)), per record per step.
pub(crate) fn rank_grad(hazards: &[Vec<f64>], labels: &[LabelMatrix], sigma: f64) -> Vec<Vec<f64>> {
    let survivals: Vec<Vec<f64>> = hazards.iter().map(|h| survival_prefix(h)).collect();
    let targets: Vec<(usize, bool)> = labels.iter().map(label_target).collect();
    let mut grads: Vec<Vec<f64>> = hazards.iter().map(|h| vec![0.0; h.len()]).collect();

    let mut pairs = 0usize;
    for &(t_i, event_i) in targets.iter() {
        if !event_i {
            continue;
        }
        for &(t_j, _) in targets.iter() {
            if t_j > t_i {
                pairs += 1;
            }
        }
    }
    if pairs == 0 {
        return grads;
    }
    let scale = 1.0 / (sigma * pairs as f64);

    for (i, &(t_i, event_i)) in targets.iter().enumerate() {
        if !event_i {
            continue;
        }
        for (j, &(t_j, _)) in targets.iter().enumerate() {
            if t_j <= t_i {
                continue;
            }
            let term = ((survivals[i][t_i - 1] - survivals[j][t_i - 1]) / sigma).exp();
            grads[i][t_i - 1] += term * scale;
            grads[j][t_i - 1] -= term * scale;
        }
    }
    grads
}

/// Squared distance between the mean hidden representation of treated and
/// control records; zero when either group is empty.
pub fn calibration_loss(hidden: &[Vec<f64>], treated: &[bool]) -> f64 {
    assert_eq!(hidden.len(), treated.len());
    let dim = match hidden.first() {
        Some(h) => h.len(),
        None => return 0.0,
    };
    let mut mean_t = vec![0.0; dim];
    let mut mean_c = vec![0.0; dim];
    let mut n_t = 0usize;
    let mut n_c = 0usize;
    for (h, &is_t) in hidden.iter().zip(treated) {
        let (mean, n) = if is_t {
            (&mut mean_t, &mut n_t)
        } else {
            (&mut mean_c, &mut n_c)
        };
        for (m, &v) in mean.iter_mut().zip(h) {
            *m += v;
        }
        *n += 1;
    }
    if n_t == 0 || n_c == 0 {
        return 0.0;
    }
    mean_t
        .iter()
        .zip(&mean_c)
        .map(|(t, c)| {
            let d = t / n_t as f64 - c / n_c as f64;
            d * d
        })
        .sum()
}

/// d(calibration_loss)/d(hidden), per record.
pub(crate) fn calibration_grad(hidden: &[Vec<f64>], treated: &[bool]) -> Vec<Vec<f64>> {
    let dim = match hidden.first() {
        Some(h) => h.len(),
        None => return Vec::new(),
    };
    let mut mean_t = vec![0.0; dim];
    let mut mean_c = vec![0.0; dim];
    let mut n_t = 0usize;
    let mut n_c = 0usize;
    for (h, &is_t) in hidden.iter().zip(treated) {
        let (mean, n) = if is_t {
            (&mut mean_t, &mut n_t)
        } else {
            (&mut mean_c, &mut n_c)
        };
        for (m, &v) in mean.iter_mut().zip(h) {
            *m += v;
        }
        *n += 1;
    }
    if n_t == 0 || n_c == 0 {
        return hidden.iter().map(|h| vec![0.0; h.len()]).collect();
    }
    let diff: Vec<f64> = mean_t
        .iter()
        .zip(&mean_c)
        .map(|(t, c)| t / n_t as f64 - c / n_c as f64)
        .collect();
    hidden
        .iter()
        .zip(treated)
        .map(|(_, &is_t)| {
            let s = if is_t {
                2.0 / n_t as f64
            } else {
                -2.0 / n_c as f64
            };
            diff.iter().map(|&d| s * d).collect()
        })
        .collect()
}

/// Mean squared error of per-step event probabilities against the event
/// indicator row, over observed intervals only, averaged over records.
pub fn binary_mse_loss(probs: &[Vec<f64>], labels: &[LabelMatrix]) -> f64 {
    assert_eq!(probs.len(), labels.len());
    if probs.is_empty() {
        return 0.0;
    }
    let mut total = 0.0;
    for (p, label) in probs.iter().zip(labels) {
        let (t_i, _) = label_target(label);
        let mut sum = 0.0;
        for j in 0..t_i {
            let y = label.c_row()[j] as f64;
            let e = p[j] - y;
            sum += e * e;
        }
        total += sum / t_i as f64;
    }
    total / probs.len() as f64
}

/// d(binary_mse_loss)/d(prob), per record per step; zero past `t_i`.
pub(crate) fn binary_mse_grad(probs: &[Vec<f64>], labels: &[LabelMatrix]) -> Vec<Vec<f64>> {
    let scale = 1.0 / probs.len() as f64;
    probs
        .iter()
        .zip(labels)
        .map(|(p, label)| {
            let (t_i, _) = label_target(label);
            let mut g = vec![0.0; p.len()];
            for j in 0..t_i {
                let y = label.c_row()[j] as f64;
                g[j] = 2.0 * (p[j] - y) * scale / t_i as f64;
            }
            g
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::survival::{build_label_matrix, TimeGrid};

    fn label(t_i: usize, event: bool, horizon: usize) -> LabelMatrix {
        let grid = TimeGrid::with_horizon(horizon).unwrap();
        build_label_matrix(t_i, event, &grid).unwrap()
    }

    #[test]
    fn likelihood_event_at_first_interval() {
        let loss = likelihood_loss(&[vec![0.5, 0.3]], &[label(1, true, 2)]);
        assert!((loss - (-(0.5f64).ln())).abs() < 1e-15);
    }

    #[test]
    fn likelihood_perfect_survival_limit() {
        let eps = 1e-12;
        let loss = likelihood_loss(&[vec![eps, eps]], &[label(2, false, 2)]);
        assert!(loss >= 0.0 && loss < 1e-10);
    }

    #[test]
    fn likelihood_hand_formula() {
        let loss = likelihood_loss(&[vec![0.1, 0.8]], &[label(2, true, 2)]);
        let expect = -((0.8f64).ln() + (0.9f64).ln());
        assert!((loss - expect).abs() < 1e-15);
    }

    #[test]
    fn rank_loss_needs_a_pair() {
        assert_eq!(rank_loss(&[vec![0.5]], &[label(1, true, 3)], 0.1), 0.0);
    }

    #[test]
    fn rank_loss_rewards_separation() {
        // record 0: event at t=1 with high hazard (low survival);
        // record 1: survives to t=3 with low hazard (high survival)
        let well_ordered = rank_loss(
            &[vec![0.99], vec![0.01, 0.01, 0.01]],
            &[label(1, true, 3), label(3, false, 3)],
            0.1,
        );
        assert!(well_ordered < 1e-4, "{well_ordered}");
    }

    #[test]
    fn rank_loss_tie_is_one() {
        // identical hazards -> identical survival at the event time -> exp(0)
        let loss = rank_loss(
            &[vec![0.2], vec![0.2, 0.2]],
            &[label(1, true, 2), label(2, false, 2)],
            0.1,
        );
        assert!((loss - 1.0).abs() < 1e-12);
    }

    #[test]
    fn calibration_zero_when_one_group_empty() {
        let hidden = vec![vec![1.0, 2.0], vec![3.0, 4.0]];
        assert_eq!(calibration_loss(&hidden, &[true, true]), 0.0);
    }

    #[test]
    fn calibration_zero_for_identical_groups() {
        let hidden = vec![vec![1.0, 2.0], vec![1.0, 2.0]];
        assert_eq!(calibration_loss(&hidden, &[true, false]), 0.0);
    }

    #[test]
    fn calibration_hand_distance() {
        let hidden = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        let loss = calibration_loss(&hidden, &[true, false]);
        assert!((loss - 2.0).abs() < 1e-15);
    }

    #[test]
    fn binary_mse_perfect_is_zero() {
        let loss = binary_mse_loss(&[vec![0.0, 1.0]], &[label(2, true, 2)]);
        assert_eq!(loss, 0.0);
    }

    #[test]
    fn binary_mse_hand_arithmetic() {
        let loss = binary_mse_loss(&[vec![0.5, 0.5]], &[label(2, false, 2)]);
        assert!((loss - 0.25).abs() < 1e-15);
    }

    #[test]
    fn binary_mse_exact_hit_at_one() {
        let loss = binary_mse_loss(&[vec![1.0]], &[label(1, true, 1)]);
        assert_eq!(loss, 0.0);
    }

    #[test]
    fn rank_loss_is_monotone_in_pair_separation() {
        // increasing the survivor's survival at the event time lowers the loss
        let labels = [label(1, true, 2), label(2, false, 2)];
        let base = rank_loss(&[vec![0.8], vec![0.3, 0.3]], &labels, 0.1);
        let wider = rank_loss(&[vec![0.8], vec![0.1, 0.1]], &labels, 0.1);
        assert!(wider < base);
    }
}
