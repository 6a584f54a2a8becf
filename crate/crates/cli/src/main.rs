//! Batch front door: cohort synthesis, training, prediction, evaluation,
//! and threshold sweeps as reproducible, scriptable runs.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 configuration/validation
//! error.

mod artifacts;
mod config;

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use ttesurv::data::{
    apply_scaler, fit_scaler, load_longitudinal_csv, split_cohort, truncate_horizon,
    write_longitudinal_csv, Cohort, SplitSpec,
};
use ttesurv::metrics::{evaluate_all, RecordEval};
use ttesurv::model::{predict_curves, train, Checkpoint, ModelConfig, Variant};
use ttesurv::predict::{ensemble_predict, fit_threshold, threshold_time, PredictorSpec};
use ttesurv::synthetic::{generate_cohort, write_oracle_csv, SyntheticSpec};
use ttesurv::{Error, Result};

use artifacts::{
    read_curves, read_predictions, render_curves, render_predictions, render_sweep, write_atomic,
};
use config::{parse_float_list, resolve, FileConfig, ResolvedConfig};

#[derive(Parser)]
#[command(name = "ttesurv", version, about = "Discrete-time survival prediction engine")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Flat `key = value` config file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Global random seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic cohort plus its true-hazard oracle.
    Synth {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        horizon: Option<usize>,
        #[arg(long)]
        d: Option<usize>,
        #[arg(long)]
        censor_hazard: Option<f64>,
        #[arg(long)]
        treat_prob: Option<f64>,
        #[arg(long)]
        base_logit: Option<f64>,
    },
    /// Train a model and write a checkpoint plus a training report.
    Train {
        #[command(flatten)]
        common: Common,
        /// Longitudinal cohort CSV.
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        variant: Option<Variant>,
        #[arg(long)]
        heads: Option<usize>,
        #[arg(long)]
        hidden_size: Option<usize>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        learning_rate: Option<f64>,
        #[arg(long)]
        batch_size: Option<usize>,
        #[arg(long)]
        dropout: Option<f64>,
        #[arg(long)]
        mc_samples: Option<usize>,
        #[arg(long)]
        history_length: Option<usize>,
        /// Skip fitting the probability threshold on the validation split.
        #[arg(long)]
        no_fit_theta: bool,
    },
    /// Predict event times and survival curves for a cohort.
    Predict {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// `inflection` or `threshold`.
        #[arg(long)]
        method: Option<String>,
        #[arg(long)]
        smoothing_window: Option<usize>,
    },
    /// Score predictions against observed outcomes.
    Evaluate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        predictions: PathBuf,
        #[arg(long)]
        curves: PathBuf,
        #[arg(long)]
        data: PathBuf,
    },
    /// Sweep the probability threshold over a grid and report timing errors.
    SweepThreshold {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Comma-separated thresholds in (0, 1).
        #[arg(long)]
        grid: Option<String>,
    },
}

fn main() {
    let cli = Cli::parse();
    let code = match dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    };
    std::process::exit(code);
}

/// 2 for configuration/validation problems, 1 for runtime failures.
fn exit_code(e: &Error) -> i32 {
    match e {
        Error::InvalidConfig(_) | Error::InvalidInput(_) | Error::MissingColumn(_) => 2,
        _ => 1,
    }
}

fn dispatch(cmd: Command) -> Result<()> {
    match cmd {
        Command::Synth {
            common,
            n,
            horizon,
            d,
            censor_hazard,
            treat_prob,
            base_logit,
        } => cmd_synth(common, n, horizon, d, censor_hazard, treat_prob, base_logit),
        Command::Train {
            common,
            data,
            variant,
            heads,
            hidden_size,
            epochs,
            learning_rate,
            batch_size,
            dropout,
            mc_samples,
            history_length,
            no_fit_theta,
        } => cmd_train(
            common,
            &data,
            variant,
            heads,
            hidden_size,
            epochs,
            learning_rate,
            batch_size,
            dropout,
            mc_samples,
            history_length,
            no_fit_theta,
        ),
        Command::Predict {
            common,
            checkpoint,
            data,
            method,
            smoothing_window,
        } => cmd_predict(common, &checkpoint, &data, method, smoothing_window),
        Command::Evaluate {
            common,
            predictions,
            curves,
            data,
        } => cmd_evaluate(common, &predictions, &curves, &data),
        Command::SweepThreshold {
            common,
            checkpoint,
            data,
            grid,
        } => cmd_sweep_threshold(common, &checkpoint, &data, grid),
    }
}

fn echo_resolved(out_dir: &Path, resolved: &ResolvedConfig) -> Result<()> {
    write_atomic(&out_dir.join("resolved_config.txt"), &resolved.render())
}

/// Default coefficient pattern, cycled out to `d` covariates.
fn default_beta(d: usize) -> Vec<f64> {
    const PATTERN: [f64; 5] = [0.5, -0.5, 0.25, -0.25, 0.1];
    (0..d).map(|k| PATTERN[k % PATTERN.len()]).collect()
}

fn cmd_synth(
    common: Common,
    n: Option<usize>,
    horizon: Option<usize>,
    d: Option<usize>,
    censor_hazard: Option<f64>,
    treat_prob: Option<f64>,
    base_logit: Option<f64>,
) -> Result<()> {
    let file = FileConfig::load(common.config.as_deref())?;
    let mut res = ResolvedConfig::default();
    let defaults = SyntheticSpec::default();

    let d = resolve(d, &file, "synth.d", defaults.d, &mut res)?;
    let beta = match file.get::<String>("synth.beta")? {
        Some(raw) => parse_float_list(&raw)?,
        None => default_beta(d),
    };
    res.set(
        "synth.beta",
        beta.iter().map(f64::to_string).collect::<Vec<_>>().join(","),
    );
    let spec = SyntheticSpec {
        n: resolve(n, &file, "synth.n", defaults.n, &mut res)?,
        horizon: resolve(horizon, &file, "synth.horizon", defaults.horizon, &mut res)?,
        d,
        beta,
        gamma: resolve(None, &file, "synth.gamma", defaults.gamma, &mut res)?,
        tau: resolve(None, &file, "synth.tau", defaults.tau, &mut res)?,
        base_logit: resolve(base_logit, &file, "synth.base_logit", defaults.base_logit, &mut res)?,
        treat_prob: resolve(treat_prob, &file, "synth.treat_prob", defaults.treat_prob, &mut res)?,
        censor_hazard: resolve(
            censor_hazard,
            &file,
            "synth.censor_hazard",
            defaults.censor_hazard,
            &mut res,
        )?,
        seed: resolve(common.seed, &file, "seed", defaults.seed, &mut res)?,
    };

    let (cohort, oracle) = generate_cohort(&spec)?;

    let mut cohort_csv = Vec::new();
    write_longitudinal_csv(&cohort, &mut cohort_csv)?;
    write_atomic(&common.out.join("cohort.csv"), &String::from_utf8_lossy(&cohort_csv))?;

    let mut oracle_csv = Vec::new();
    write_oracle_csv(&oracle, &mut oracle_csv)?;
    write_atomic(&common.out.join("oracle.csv"), &String::from_utf8_lossy(&oracle_csv))?;

    echo_resolved(&common.out, &res)
}

#[allow(clippy::too_many_arguments)]
fn cmd_train(
    common: Common,
    data: &Path,
    variant: Option<Variant>,
    heads: Option<usize>,
    hidden_size: Option<usize>,
    epochs: Option<usize>,
    learning_rate: Option<f64>,
    batch_size: Option<usize>,
    dropout: Option<f64>,
    mc_samples: Option<usize>,
    history_length: Option<usize>,
    no_fit_theta: bool,
) -> Result<()> {
    let file = FileConfig::load(common.config.as_deref())?;
    let mut res = ResolvedConfig::default();
    let defaults = ModelConfig::default();

    let seed = resolve(common.seed, &file, "seed", defaults.seed, &mut res)?;
    let history = match history_length {
        Some(u) => Some(u),
        None => file.get::<usize>("model.history_length")?,
    };
    res.set(
        "model.history_length",
        history.map_or("full".to_string(), |u| u.to_string()),
    );
    let config = ModelConfig {
        hidden_size: resolve(hidden_size, &file, "model.hidden_size", defaults.hidden_size, &mut res)?,
        history_length: history,
        heads: resolve(heads, &file, "model.heads", defaults.heads, &mut res)?,
        variant: match variant {
            Some(v) => v,
            None => file
                .get::<String>("model.variant")?
                .map(|s| s.parse())
                .transpose()?
                .unwrap_or(defaults.variant),
        },
        alpha_likelihood: resolve(
            None,
            &file,
            "model.alpha_likelihood",
            defaults.alpha_likelihood,
            &mut res,
        )?,
        beta_rank: resolve(None, &file, "model.beta_rank", defaults.beta_rank, &mut res)?,
        gamma_calibration: resolve(
            None,
            &file,
            "model.gamma_calibration",
            defaults.gamma_calibration,
            &mut res,
        )?,
        rank_sigma: resolve(None, &file, "model.rank_sigma", defaults.rank_sigma, &mut res)?,
        dropout_p: resolve(dropout, &file, "model.dropout_p", defaults.dropout_p, &mut res)?,
        mc_samples: resolve(mc_samples, &file, "model.mc_samples", defaults.mc_samples, &mut res)?,
        learning_rate: resolve(
            learning_rate,
            &file,
            "model.learning_rate",
            defaults.learning_rate,
            &mut res,
        )?,
        epochs: resolve(epochs, &file, "model.epochs", defaults.epochs, &mut res)?,
        batch_size: resolve(batch_size, &file, "model.batch_size", defaults.batch_size, &mut res)?,
        seed,
    };
    res.set(
        "model.variant",
        match config.variant {
            Variant::Survival => "survival",
            Variant::Binary => "binary",
        },
    );
    config.validate()?;

    let train_fraction = resolve(None, &file, "data.train_fraction", 0.6, &mut res)?;
    let val_fraction = resolve(None, &file, "data.validation_fraction", 0.2, &mut res)?;
    let test_fraction = resolve(None, &file, "data.test_fraction", 0.2, &mut res)?;
    let fit_theta = !no_fit_theta
        && resolve(None, &file, "train.fit_theta", true, &mut res)?;
    res.set("train.fit_theta", fit_theta);
    res.set("data.path", data.display());

    let cohort = load_longitudinal_csv(data, None)?;
    let split = SplitSpec::new(train_fraction, val_fraction, test_fraction, seed)?;
    let (train_raw, val_raw, test_raw) = split_cohort(&cohort, &split)?;

    let scaler = fit_scaler(&train_raw)?;
    let train_cohort = apply_scaler(&scaler, &train_raw)?;
    let val_cohort = apply_scaler(&scaler, &val_raw)?;

    let (params, report) = train(&config, &train_cohort, &val_cohort)?;

    // fit the baseline threshold on the validation split's mean curves
    let theta = if fit_theta && !val_cohort.is_empty() {
        let ensembles = predict_curves(&params, &config, &val_cohort, seed)?;
        let curves: Vec<_> = ensembles.iter().map(|e| e.mean.clone()).collect();
        let times: Vec<usize> = val_cohort.records.iter().map(|r| r.observed_length).collect();
        let events: Vec<bool> = val_cohort.records.iter().map(|r| r.event).collect();
        Some(fit_threshold(&curves, &times, &events)?.theta())
    } else {
        None
    };

    let ckpt = Checkpoint::new(
        config,
        &params,
        cohort.num_covariates(),
        cohort.grid.horizon(),
        cohort.covariate_names.clone(),
        Some(scaler),
        theta,
    );
    write_atomic(&common.out.join("checkpoint.json"), &ckpt.to_json()?)?;
    write_atomic(
        &common.out.join("train_report.json"),
        &serde_json::to_string_pretty(&report)?,
    )?;

    // held-out split, unscaled, for downstream predict/evaluate runs
    let mut test_csv = Vec::new();
    write_longitudinal_csv(&test_raw, &mut test_csv)?;
    write_atomic(&common.out.join("test_split.csv"), &String::from_utf8_lossy(&test_csv))?;

    echo_resolved(&common.out, &res)
}

/// Loads a cohort the way the checkpoint expects it: same covariate order,
/// same horizon, scaled with the training scaler.
fn load_for_checkpoint(data: &Path, ckpt: &Checkpoint) -> Result<Cohort> {
    let cohort = load_longitudinal_csv(data, Some(&ckpt.covariate_names))?;
    let mut cohort = truncate_horizon(&cohort, ckpt.horizon)?;
    cohort.grid = ttesurv::survival::TimeGrid::new(
        ckpt.horizon,
        cohort.grid.step_label(),
        cohort.grid.window_size(),
    )?;
    match &ckpt.scaler {
        Some(scaler) => apply_scaler(scaler, &cohort),
        None => Ok(cohort),
    }
}

fn cmd_predict(
    common: Common,
    checkpoint: &Path,
    data: &Path,
    method: Option<String>,
    smoothing_window: Option<usize>,
) -> Result<()> {
    let file = FileConfig::load(common.config.as_deref())?;
    let mut res = ResolvedConfig::default();

    let seed = resolve(common.seed, &file, "seed", 0, &mut res)?;
    let method = resolve(method, &file, "predict.method", "inflection".to_string(), &mut res)?;
    let smoothing_window =
        resolve(smoothing_window, &file, "predict.smoothing_window", 3, &mut res)?;
    res.set("predict.checkpoint", checkpoint.display());
    res.set("data.path", data.display());

    let ckpt = Checkpoint::from_json(&std::fs::read_to_string(checkpoint)?)?;
    let spec = match method.parse::<ttesurv::predict::PredictionMethod>()? {
        ttesurv::predict::PredictionMethod::Inflection => {
            PredictorSpec::Inflection { smoothing_window }
        }
        ttesurv::predict::PredictionMethod::Threshold => {
            let theta = ckpt.theta.ok_or_else(|| {
                Error::InvalidConfig(
                    "threshold method needs a checkpoint with a fitted theta".into(),
                )
            })?;
            PredictorSpec::Threshold { theta }
        }
    };

    let cohort = load_for_checkpoint(data, &ckpt)?;
    let params = ckpt.params()?;
    let ensembles = predict_curves(&params, &ckpt.config, &cohort, seed)?;

    let ids: Vec<String> = ensembles.iter().map(|e| e.id.clone()).collect();
    let preds: Vec<_> = ensembles
        .iter()
        .map(|e| ensemble_predict(e, &spec))
        .collect::<Result<_>>()?;

    write_atomic(&common.out.join("predictions.csv"), &render_predictions(&ids, &preds))?;
    write_atomic(&common.out.join("curves.csv"), &render_curves(&ensembles))?;
    echo_resolved(&common.out, &res)
}

fn cmd_evaluate(
    common: Common,
    predictions: &Path,
    curves: &Path,
    data: &Path,
) -> Result<()> {
    let file = FileConfig::load(common.config.as_deref())?;
    let mut res = ResolvedConfig::default();
    res.set("evaluate.predictions", predictions.display());
    res.set("evaluate.curves", curves.display());
    res.set("data.path", data.display());
    let _ = file;

    let cohort = load_longitudinal_csv(data, None)?;
    let preds = read_predictions(predictions)?;
    let curve_map = read_curves(curves)?;

    let mut horizon = 0usize;
    let mut records = Vec::with_capacity(cohort.len());
    let mut times = Vec::with_capacity(cohort.len());
    let mut events = Vec::with_capacity(cohort.len());
    for rec in &cohort.records {
        let pred = preds.get(&rec.id).ok_or_else(|| Error::Integrity {
            id: rec.id.clone(),
            reason: "id missing from predictions".into(),
        })?;
        let curve = curve_map.get(&rec.id).ok_or_else(|| Error::Integrity {
            id: rec.id.clone(),
            reason: "id missing from curves".into(),
        })?;
        horizon = horizon.max(curve.len());
        records.push(RecordEval {
            id: rec.id.clone(),
            mean_curve: curve.clone(),
            t_hat: pred.t_hat,
            spread: pred.spread,
        });
        times.push(rec.observed_length);
        events.push(rec.event);
    }

    let report = evaluate_all(&records, &times, &events, horizon)?;
    write_atomic(
        &common.out.join("metrics.json"),
        &serde_json::to_string_pretty(&report)?,
    )?;
    echo_resolved(&common.out, &res)
}

fn cmd_sweep_threshold(
    common: Common,
    checkpoint: &Path,
    data: &Path,
    grid: Option<String>,
) -> Result<()> {
    let file = FileConfig::load(common.config.as_deref())?;
    let mut res = ResolvedConfig::default();

    let seed = resolve(common.seed, &file, "seed", 0, &mut res)?;
    let grid_raw = resolve(
        grid,
        &file,
        "sweep.grid",
        "0.90,0.95,0.99,0.999,0.9999".to_string(),
        &mut res,
    )?;
    res.set("sweep.checkpoint", checkpoint.display());
    res.set("data.path", data.display());

    let grid = parse_float_list(&grid_raw)?;
    if grid.is_empty() {
        return Err(Error::InvalidConfig("threshold grid is empty".into()));
    }
    if grid.iter().any(|&t| !(t > 0.0 && t < 1.0)) {
        return Err(Error::InvalidConfig("threshold grid must lie in (0, 1)".into()));
    }

    let ckpt = Checkpoint::from_json(&std::fs::read_to_string(checkpoint)?)?;
    let cohort = load_for_checkpoint(data, &ckpt)?;
    let params = ckpt.params()?;
    let ensembles = predict_curves(&params, &ckpt.config, &cohort, seed)?;
    let times: Vec<usize> = cohort.records.iter().map(|r| r.observed_length).collect();

    let mut rows = Vec::with_capacity(grid.len());
    for &theta in &grid {
        let mut signed = 0.0;
        let mut abs = 0.0;
        for (ens, &t_true) in ensembles.iter().zip(&times) {
            let p = threshold_time(&ens.mean, theta)?;
            let diff = p.t_hat as f64 - t_true as f64;
            signed += diff;
            abs += diff.abs();
        }
        let n = ensembles.len() as f64;
        rows.push((theta, signed / n, abs / n));
    }

    write_atomic(&common.out.join("sweep.csv"), &render_sweep(&rows))?;
    echo_resolved(&common.out, &res)
}
