//! Training loop, prediction, and gradient verification for the recurrent
//! survival model.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::Cohort;
use crate::error::{Error, Result};
use crate::survival::{
    build_label_matrix, hazard_to_survival, HazardSequence, LabelMatrix, LongitudinalRecord,
    SurvivalCurve,
};

use super::gru::{backward_chains, run_chains, sigmoid, RecordCache};
use super::loss::{
    binary_mse_grad, binary_mse_loss, calibration_grad, calibration_loss, likelihood_grad,
    likelihood_loss, rank_grad, rank_loss,
};
use super::{CurveEnsemble, EpochStats, ModelConfig, ModelParams, TrainReport, Variant};

/// Doubles a treatment-free cohort into a treated copy and a control copy,
/// so two-headed models can train on data without a treatment column.
pub fn duplicate_for_counterfactual(cohort: &Cohort) -> Result<Cohort> {
    let mut records = Vec::with_capacity(cohort.records.len() * 2);
    for rec in &cohort.records {
        let len = rec.observed_length;
        records.push(LongitudinalRecord::new(
            format!("{}::t", rec.id),
            rec.covariates.clone(),
            vec![1u8; len],
            rec.event,
        )?);
        records.push(LongitudinalRecord::new(
            format!("{}::c", rec.id),
            rec.covariates.clone(),
            vec![0u8; len],
            rec.event,
        )?);
    }
    Cohort::new(cohort.grid.clone(), records, cohort.covariate_names.clone())
}

fn labels_for(cohort: &Cohort) -> Result<Vec<LabelMatrix>> {
    cohort
        .records
        .iter()
        .map(|rec| build_label_matrix(rec.observed_length, rec.event, &cohort.grid))
        .collect()
}

/// Input row for one step: scaled covariates, plus the treatment indicator
/// as an extra channel for single-headed models. Steps past the observed
/// length are zero-padded.
fn record_inputs(record: &LongitudinalRecord, heads: usize, steps: usize) -> Vec<Vec<f64>> {
    let d = record.num_covariates();
    let width = if heads == 1 { d + 1 } else { d };
    (0..steps)
        .map(|t| {
            let mut row = vec![0.0; width];
            if t < record.observed_length {
                row[..d].copy_from_slice(&record.covariates[t]);
                if heads == 1 {
                    row[d] = record.treatment[t] as f64;
                }
            }
            row
        })
        .collect()
}

/// Head index producing the factual output at step `t` (0-based); the
/// treatment indicator is carried forward past the observed length.
fn factual_head(record: &LongitudinalRecord, heads: usize, t: usize) -> usize {
    if heads == 1 {
        return 0;
    }
    let idx = t.min(record.observed_length - 1);
    record.treatment[idx] as usize
}

struct RecordForward {
    cache: RecordCache,
    /// Post-dropout hidden per step (equals the raw hidden without a mask).
    dropped: Vec<Vec<f64>>,
    /// Per head, per step sigmoid outputs.
    probs: Vec<Vec<f64>>,
}

fn forward_record(
    params: &ModelParams,
    config: &ModelConfig,
    record: &LongitudinalRecord,
    steps: usize,
    mask: Option<&[f64]>,
) -> RecordForward {
    let window = config.history_length.unwrap_or(usize::MAX);
    let inputs = record_inputs(record, config.heads, steps);
    let cache = run_chains(params, &inputs, window);

    let dropped: Vec<Vec<f64>> = cache
        .hidden
        .iter()
        .map(|h| match mask {
            Some(m) => h.iter().zip(m).map(|(a, b)| a * b).collect(),
            None => h.clone(),
        })
        .collect();

    let probs: Vec<Vec<f64>> = params
        .heads
        .iter()
        .map(|head| {
            dropped
                .iter()
                .map(|h| {
                    let logit: f64 =
                        head.w.iter().zip(h).map(|(w, v)| w * v).sum::<f64>() + head.b;
                    sigmoid(logit)
                })
                .collect()
        })
        .collect();

    RecordForward {
        cache,
        dropped,
        probs,
    }
}

fn check_dims(params: &ModelParams, config: &ModelConfig, d: usize) -> Result<()> {
    let expected = config.input_size(d);
    if params.input_size != expected {
        return Err(Error::InvalidConfig(format!(
            "model expects input width {}, data provides {expected}",
            params.input_size
        )));
    }
    if params.hidden_size != config.hidden_size || params.heads.len() != config.heads {
        return Err(Error::InvalidConfig(
            "params shape does not match config".into(),
        ));
    }
    Ok(())
}

/// Deterministic forward pass: one hazard sequence per head over the full
/// grid horizon, no dropout.
pub fn forward(
    params: &ModelParams,
    config: &ModelConfig,
    record: &LongitudinalRecord,
    horizon: usize,
) -> Result<Vec<HazardSequence>> {
    config.validate()?;
    check_dims(params, config, record.num_covariates())?;
    let fwd = forward_record(params, config, record, horizon, None);
    fwd.probs.into_iter().map(HazardSequence::new).collect()
}

#[derive(Debug, Clone, Copy, Default)]
struct LossParts {
    likelihood: f64,
    rank: f64,
    calibration: f64,
    total: f64,
}

/// Forward (and optionally backward) pass over one batch. Masks, when
/// present, are one dropout mask per record.
fn batch_pass(
    params: &ModelParams,
    config: &ModelConfig,
    records: &[&LongitudinalRecord],
    labels: &[&LabelMatrix],
    masks: Option<&[Vec<f64>]>,
    want_grads: bool,
) -> (LossParts, Option<ModelParams>) {
    let forwards: Vec<RecordForward> = records
        .iter()
        .enumerate()
        .map(|(i, rec)| {
            let mask = masks.map(|m| m[i].as_slice());
            forward_record(params, config, rec, rec.observed_length, mask)
        })
        .collect();

    // Factual per-step outputs, truncated to each observed length.
    let factual: Vec<Vec<f64>> = records
        .iter()
        .zip(&forwards)
        .map(|(rec, fwd)| {
            (0..rec.observed_length)
                .map(|t| fwd.probs[factual_head(rec, config.heads, t)][t])
                .collect()
        })
        .collect();
    let owned_labels: Vec<LabelMatrix> = labels.iter().map(|&l| l.clone()).collect();

    let final_hidden: Vec<Vec<f64>> = forwards
        .iter()
        .zip(records)
        .map(|(fwd, rec)| fwd.cache.hidden[rec.observed_length - 1].clone())
        .collect();
    let treated: Vec<bool> = records
        .iter()
        .map(|rec| rec.treatment[rec.observed_length - 1] == 1)
        .collect();

    let mut parts = LossParts::default();
    // d loss / d logit, per record, per step, for the factual head.
    let mut dlogit: Vec<Vec<f64>> = factual.iter().map(|f| vec![0.0; f.len()]).collect();
    // d loss / d raw hidden, per record, per step (beyond the head path).
    let mut dhidden_extra: Vec<Vec<Vec<f64>>> = Vec::new();

    match config.variant {
        Variant::Survival => {
            parts.likelihood = likelihood_loss(&factual, &owned_labels);
            parts.rank = rank_loss(&factual, &owned_labels, config.rank_sigma);
            if config.heads == 2 && config.gamma_calibration > 0.0 {
                parts.calibration = calibration_loss(&final_hidden, &treated);
            }
            parts.total = config.alpha_likelihood * parts.likelihood
                + config.beta_rank * parts.rank
                + config.gamma_calibration * parts.calibration;

            if want_grads {
                if config.alpha_likelihood > 0.0 {
                    let g = likelihood_grad(&factual, &owned_labels);
                    for (i, gi) in g.iter().enumerate() {
                        for (k, &gq) in gi.iter().enumerate() {
                            let q = factual[i][k];
                            dlogit[i][k] += config.alpha_likelihood * gq * q * (1.0 - q);
                        }
                    }
                }
                if config.beta_rank > 0.0 {
                    let g = rank_grad(&factual, &owned_labels, config.rank_sigma);
                    for (i, gi) in g.iter().enumerate() {
                        // dS(t)/dlogit_k = -S(t) q_k for k <= t: suffix sums.
                        let mut surv = Vec::with_capacity(factual[i].len());
                        let mut acc = 1.0;
                        for &q in &factual[i] {
                            acc *= 1.0 - q;
                            surv.push(acc);
                        }
                        let mut suffix = 0.0;
                        let mut dz = vec![0.0; factual[i].len()];
                        for k in (0..factual[i].len()).rev() {
                            suffix += gi[k] * surv[k];
                            dz[k] = -factual[i][k] * suffix;
                        }
                        for (slot, d) in dlogit[i].iter_mut().zip(dz) {
                            *slot += config.beta_rank * d;
                        }
                    }
                }
                if config.heads == 2 && config.gamma_calibration > 0.0 {
                    let g = calibration_grad(&final_hidden, &treated);
                    let mut extra: Vec<Vec<Vec<f64>>> = records
                        .iter()
                        .map(|rec| vec![Vec::new(); rec.observed_length])
                        .collect();
                    for (i, gi) in g.into_iter().enumerate() {
                        let last = records[i].observed_length - 1;
                        extra[i][last] = gi
                            .into_iter()
                            .map(|v| v * config.gamma_calibration)
                            .collect();
                    }
                    dhidden_extra = extra;
                }
            }
        }
        Variant::Binary => {
            parts.total = binary_mse_loss(&factual, &owned_labels);
            if want_grads {
                let g = binary_mse_grad(&factual, &owned_labels);
                for (i, gi) in g.iter().enumerate() {
                    for (k, &gp) in gi.iter().enumerate() {
                        let q = factual[i][k];
                        dlogit[i][k] += gp * q * (1.0 - q);
                    }
                }
            }
        }
    }

    if !want_grads {
        return (parts, None);
    }

    let mut grads = ModelParams::zeros(params.input_size, params.hidden_size, params.heads.len());
    for (i, rec) in records.iter().enumerate() {
        let fwd = &forwards[i];
        let mut d_hidden: Vec<Vec<f64>> = vec![vec![0.0; params.hidden_size]; rec.observed_length];
        for (t, &dz) in dlogit[i].iter().enumerate() {
            if dz == 0.0 {
                continue;
            }
            let head_idx = factual_head(rec, config.heads, t);
            let head = &params.heads[head_idx];
            let ghead = &mut grads.heads[head_idx];
            for k in 0..params.hidden_size {
                ghead.w[k] += dz * fwd.dropped[t][k];
            }
            ghead.b += dz;
            match masks.map(|m| &m[i]) {
                Some(mask) => {
                    for k in 0..params.hidden_size {
                        d_hidden[t][k] += dz * head.w[k] * mask[k];
                    }
                }
                None => {
                    for k in 0..params.hidden_size {
                        d_hidden[t][k] += dz * head.w[k];
                    }
                }
            }
        }
        if let Some(extra) = dhidden_extra.get(i) {
            for (t, gvec) in extra.iter().enumerate() {
                for (slot, &g) in d_hidden[t].iter_mut().zip(gvec) {
                    *slot += g;
                }
            }
        }
        backward_chains(params, &fwd.cache, &d_hidden, &mut grads);
    }

    (parts, Some(grads))
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    step: usize,
    lr: f64,
}

impl Adam {
    const BETA1: f64 = 0.9;
    const BETA2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    fn new(n: usize, lr: f64) -> Self {
        Adam {
            m: vec![0.0; n],
            v: vec![0.0; n],
            step: 0,
            lr,
        }
    }

    fn update(&mut self, weights: &mut [f64], grads: &[f64]) {
        self.step += 1;
        let b1c = 1.0 - Self::BETA1.powi(self.step as i32);
        let b2c = 1.0 - Self::BETA2.powi(self.step as i32);
        for ((w, &g), (m, v)) in weights
            .iter_mut()
            .zip(grads)
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            *m = Self::BETA1 * *m + (1.0 - Self::BETA1) * g;
            *v = Self::BETA2 * *v + (1.0 - Self::BETA2) * g * g;
            let mhat = *m / b1c;
            let vhat = *v / b2c;
            *w -= self.lr * mhat / (vhat.sqrt() + Self::EPS);
        }
    }
}

fn sample_masks(
    rng: &mut ChaCha8Rng,
    count: usize,
    hidden: usize,
    p: f64,
) -> Option<Vec<Vec<f64>>> {
    if p == 0.0 {
        return None;
    }
    let keep = 1.0 - p;
    Some(
        (0..count)
            .map(|_| {
                (0..hidden)
                    .map(|_| if rng.gen_bool(keep) { 1.0 / keep } else { 0.0 })
                    .collect()
            })
            .collect(),
    )
}

fn check_finite(parts: &LossParts, epoch: usize) -> Result<()> {
    for (name, value) in [
        ("likelihood", parts.likelihood),
        ("rank", parts.rank),
        ("calibration", parts.calibration),
        ("total", parts.total),
    ] {
        if !value.is_finite() {
            return Err(Error::NonFiniteLoss {
                component: name.to_string(),
                epoch,
            });
        }
    }
    Ok(())
}

/// Mini-batch adaptive-moment training with best-validation epoch selection.
/// Deterministic given `(config, seed, data)`.
pub fn train(
    config: &ModelConfig,
    train_cohort: &Cohort,
    validation_cohort: &Cohort,
) -> Result<(ModelParams, TrainReport)> {
    config.validate()?;
    if train_cohort.is_empty() {
        return Err(Error::InvalidInput("training cohort is empty".into()));
    }
    if train_cohort.num_covariates() != validation_cohort.num_covariates() {
        return Err(Error::InvalidConfig(
            "train and validation cohorts disagree on covariates".into(),
        ));
    }
    if train_cohort.grid.horizon() != validation_cohort.grid.horizon() {
        return Err(Error::InvalidConfig(
            "train and validation cohorts disagree on the time grid".into(),
        ));
    }

    // Two-copies rule for counterfactual heads on treatment-free data.
    let (train_cohort, validation_cohort) =
        if config.heads == 2 && !train_cohort.has_treatment {
            (
                duplicate_for_counterfactual(train_cohort)?,
                duplicate_for_counterfactual(validation_cohort)?,
            )
        } else {
            (train_cohort.clone(), validation_cohort.clone())
        };

    let d = train_cohort.num_covariates();
    let train_labels = labels_for(&train_cohort)?;
    let val_labels = labels_for(&validation_cohort)?;

    let started = std::time::Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut params = ModelParams::init(
        config.input_size(d),
        config.hidden_size,
        config.heads,
        &mut rng,
    );
    let mut adam = Adam::new(params.num_params(), config.learning_rate);

    let n = train_cohort.len();
    let mut order: Vec<usize> = (0..n).collect();

    let mut best: Option<(f64, usize, ModelParams)> = None;
    let mut epochs = Vec::with_capacity(config.epochs);

    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut sums = LossParts::default();
        let mut seen = 0usize;
        for batch in order.chunks(config.batch_size) {
            let records: Vec<&LongitudinalRecord> =
                batch.iter().map(|&i| &train_cohort.records[i]).collect();
            let labels: Vec<&LabelMatrix> = batch.iter().map(|&i| &train_labels[i]).collect();
            let masks = sample_masks(&mut rng, records.len(), config.hidden_size, config.dropout_p);
            let (parts, grads) =
                batch_pass(&params, config, &records, &labels, masks.as_deref(), true);
            check_finite(&parts, epoch)?;
            let grads = grads.unwrap();
            let mut flat = params.flatten();
            adam.update(&mut flat, &grads.flatten());
            params = ModelParams::from_flat(
                &flat,
                params.input_size,
                params.hidden_size,
                params.heads.len(),
            )?;

            let w = records.len() as f64;
            sums.likelihood += parts.likelihood * w;
            sums.rank += parts.rank * w;
            sums.calibration += parts.calibration * w;
            sums.total += parts.total * w;
            seen += records.len();
        }
        let scale = 1.0 / seen as f64;

        let validation = if validation_cohort.is_empty() {
            sums.total * scale
        } else {
            let records: Vec<&LongitudinalRecord> = validation_cohort.records.iter().collect();
            let labels: Vec<&LabelMatrix> = val_labels.iter().collect();
            let (parts, _) = batch_pass(&params, config, &records, &labels, None, false);
            check_finite(&parts, epoch)?;
            parts.total
        };

        epochs.push(EpochStats {
            likelihood: sums.likelihood * scale,
            rank: sums.rank * scale,
            calibration: sums.calibration * scale,
            total: sums.total * scale,
            validation,
        });

        let improved = match &best {
            Some((best_val, _, _)) => validation < *best_val,
            None => true,
        };
        if improved {
            best = Some((validation, epoch, params.clone()));
        }
    }

    let (_, selected_epoch, best_params) = best.expect("at least one epoch");
    let report = TrainReport {
        epochs,
        selected_epoch,
        wall_time_secs: started.elapsed().as_secs_f64(),
    };
    Ok((best_params, report))
}

/// `mc_samples` stochastic forward passes with dropout active; each factual
/// hazard sequence is mapped through the exact cumulative product.
pub fn predict_curves(
    params: &ModelParams,
    config: &ModelConfig,
    cohort: &Cohort,
    seed: u64,
) -> Result<Vec<CurveEnsemble>> {
    config.validate()?;
    check_dims(params, config, cohort.num_covariates())?;
    let horizon = cohort.grid.horizon();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut out = Vec::with_capacity(cohort.len());
    for rec in &cohort.records {
        if config.dropout_p == 0.0 {
            // no mask noise: one pass, exactly zero spread
            let fwd = forward_record(params, config, rec, horizon, None);
            let hazards: Vec<f64> = (0..horizon)
                .map(|t| fwd.probs[factual_head(rec, config.heads, t)][t])
                .collect();
            let curve = hazard_to_survival(&HazardSequence::new(hazards)?);
            out.push(CurveEnsemble {
                id: rec.id.clone(),
                samples: vec![curve.clone(); config.mc_samples],
                mean: curve,
                std: vec![0.0; horizon],
            });
            continue;
        }
        let mut samples = Vec::with_capacity(config.mc_samples);
        for _ in 0..config.mc_samples {
            let mask = sample_masks(&mut rng, 1, config.hidden_size, config.dropout_p)
                .map(|mut m| m.remove(0));
            let fwd = forward_record(params, config, rec, horizon, mask.as_deref());
            let hazards: Vec<f64> = (0..horizon)
                .map(|t| fwd.probs[factual_head(rec, config.heads, t)][t])
                .collect();
            samples.push(hazard_to_survival(&HazardSequence::new(hazards)?));
        }

        let k = samples.len() as f64;
        let mut mean = vec![0.0; horizon];
        for s in &samples {
            for (m, &v) in mean.iter_mut().zip(s.values()) {
                *m += v;
            }
        }
        for m in &mut mean {
            *m /= k;
        }
        // guard against last-ulp rounding breaking monotonicity
        for t in 1..horizon {
            if mean[t] > mean[t - 1] {
                mean[t] = mean[t - 1];
            }
        }
        let mut std = vec![0.0; horizon];
        for s in &samples {
            for (acc, (&v, &m)) in std.iter_mut().zip(s.values().iter().zip(&mean)) {
                let dev = v - m;
                *acc += dev * dev;
            }
        }
        for v in &mut std {
            *v = (*v / k).sqrt();
        }

        out.push(CurveEnsemble {
            id: rec.id.clone(),
            samples,
            mean: SurvivalCurve::new(mean)?,
            std,
        });
    }
    Ok(out)
}

/// Compares analytic gradients of the configured total loss against central
/// finite differences over a random parameter subset; returns the maximum
/// relative error.
pub fn gradient_check(
    params: &ModelParams,
    config: &ModelConfig,
    records: &[&LongitudinalRecord],
    labels: &[&LabelMatrix],
    subset: usize,
    seed: u64,
) -> Result<f64> {
    config.validate()?;
    let (_, grads) = batch_pass(params, config, records, labels, None, true);
    let analytic = grads.unwrap().flatten();
    let mut flat = params.flatten();

    let mut indices: Vec<usize> = (0..flat.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    indices.shuffle(&mut rng);
    indices.truncate(subset.max(1).min(flat.len()));

    let step = 1e-5;
    let mut max_rel = 0.0f64;
    for &idx in &indices {
        let original = flat[idx];
        flat[idx] = original + step;
        let plus = eval_total(&flat, params, config, records, labels)?;
        flat[idx] = original - step;
        let minus = eval_total(&flat, params, config, records, labels)?;
        flat[idx] = original;
        let numeric = (plus - minus) / (2.0 * step);
        let a = analytic[idx];
        let rel = (a - numeric).abs() / f64::max(1e-6, f64::max(a.abs(), numeric.abs()));
        max_rel = max_rel.max(rel);
    }
    Ok(max_rel)
}

fn eval_total(
    flat: &[f64],
    shape: &ModelParams,
    config: &ModelConfig,
    records: &[&LongitudinalRecord],
    labels: &[&LabelMatrix],
) -> Result<f64> {
    let p = ModelParams::from_flat(flat, shape.input_size, shape.hidden_size, shape.heads.len())?;
    let (parts, _) = batch_pass(&p, config, records, labels, None, false);
    Ok(parts.total)
}
