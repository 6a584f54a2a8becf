//! Sequence model mapping covariate/treatment histories to per-interval
//! conditional survival probabilities.
//!
//! The encoder is a single-layer gated recurrent cell trained by
//! adaptive-moment gradient descent on a composite loss (censored
//! likelihood + concordance surrogate + optional treatment-balance term).
//! Predictive uncertainty comes from Monte Carlo dropout at inference time.

mod gru;
mod loss;
mod train;

pub use loss::{binary_mse_loss, calibration_loss, likelihood_loss, rank_loss};
pub use train::{
    duplicate_for_counterfactual, forward, gradient_check, predict_curves, train,
};

use serde::{Deserialize, Serialize};

use crate::data::CovariateScaler;
use crate::error::{Error, Result};
use crate::survival::SurvivalCurve;

/// Loss family the model is trained under.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    /// Censored likelihood + rank surrogate on hazard outputs.
    Survival,
    /// Mean squared error on per-step event indicators.
    Binary,
}

impl std::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "survival" => Ok(Variant::Survival),
            "binary" => Ok(Variant::Binary),
            other => Err(Error::InvalidConfig(format!("unknown variant `{other}`"))),
        }
    }
}

/// Architecture and optimization settings.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelConfig {
    pub hidden_size: usize,
    /// Length of the observation history window fed to the encoder;
    /// `None` = full history.
    pub history_length: Option<usize>,
    /// 1 = single head; 2 = counterfactual treated/control sub-networks.
    pub heads: usize,
    pub variant: Variant,
    pub alpha_likelihood: f64,
    pub beta_rank: f64,
    pub gamma_calibration: f64,
    /// Temperature of the exponential concordance surrogate.
    pub rank_sigma: f64,
    pub dropout_p: f64,
    /// Monte Carlo dropout samples per prediction.
    pub mc_samples: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            hidden_size: 32,
            history_length: None,
            heads: 1,
            variant: Variant::Survival,
            alpha_likelihood: 1.0,
            beta_rank: 1.0,
            gamma_calibration: 0.0,
            rank_sigma: 0.1,
            dropout_p: 0.1,
            mc_samples: 50,
            learning_rate: 1e-2,
            epochs: 100,
            batch_size: 64,
            seed: 0,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hidden_size == 0 {
            return Err(Error::InvalidConfig("hidden_size must be >= 1".into()));
        }
        if self.heads != 1 && self.heads != 2 {
            return Err(Error::InvalidConfig(format!("heads must be 1 or 2, got {}", self.heads)));
        }
        if self.alpha_likelihood < 0.0 || self.beta_rank < 0.0 || self.gamma_calibration < 0.0 {
            return Err(Error::InvalidConfig("loss weights must be >= 0".into()));
        }
        if self.variant == Variant::Survival && self.alpha_likelihood == 0.0 && self.beta_rank == 0.0
        {
            return Err(Error::InvalidConfig(
                "survival variant needs alpha_likelihood or beta_rank > 0".into(),
            ));
        }
        if self.variant == Variant::Binary && self.heads != 1 {
            return Err(Error::InvalidConfig("binary variant uses a single head".into()));
        }
        if !(0.0..1.0).contains(&self.dropout_p) {
            return Err(Error::InvalidConfig("dropout_p must lie in [0, 1)".into()));
        }
        if self.mc_samples == 0 || self.batch_size == 0 {
            return Err(Error::InvalidConfig("mc_samples and batch_size must be >= 1".into()));
        }
        if self.rank_sigma <= 0.0 {
            return Err(Error::InvalidConfig("rank_sigma must be > 0".into()));
        }
        if matches!(self.history_length, Some(0)) {
            return Err(Error::InvalidConfig("history_length must be >= 1".into()));
        }
        Ok(())
    }

    /// Encoder input width for `d` covariates: one-headed models also see the
    /// treatment indicator as an input channel.
    pub fn input_size(&self, d: usize) -> usize {
        if self.heads == 1 {
            d + 1
        } else {
            d
        }
    }
}

/// Per-head affine output map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeadParams {
    pub w: Vec<f64>,
    pub b: f64,
}

/// All learnable weights: gate matrices row-major `hidden x input` and
/// `hidden x hidden`, gate biases, and one affine head per sub-network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub input_size: usize,
    pub hidden_size: usize,
    pub wz: Vec<f64>,
    pub wr: Vec<f64>,
    pub wn: Vec<f64>,
    pub uz: Vec<f64>,
    pub ur: Vec<f64>,
    pub un: Vec<f64>,
    pub bz: Vec<f64>,
    pub br: Vec<f64>,
    pub bn: Vec<f64>,
    pub heads: Vec<HeadParams>,
}

impl ModelParams {
    pub fn zeros(input_size: usize, hidden_size: usize, heads: usize) -> Self {
        ModelParams {
            input_size,
            hidden_size,
            wz: vec![0.0; hidden_size * input_size],
            wr: vec![0.0; hidden_size * input_size],
            wn: vec![0.0; hidden_size * input_size],
            uz: vec![0.0; hidden_size * hidden_size],
            ur: vec![0.0; hidden_size * hidden_size],
            un: vec![0.0; hidden_size * hidden_size],
            bz: vec![0.0; hidden_size],
            br: vec![0.0; hidden_size],
            bn: vec![0.0; hidden_size],
            heads: (0..heads)
                .map(|_| HeadParams {
                    w: vec![0.0; hidden_size],
                    b: 0.0,
                })
                .collect(),
        }
    }

    /// Uniform init scaled by fan-in, deterministic in the RNG.
    pub fn init<R: rand::Rng>(input_size: usize, hidden_size: usize, heads: usize, rng: &mut R) -> Self {
        let mut p = Self::zeros(input_size, hidden_size, heads);
        let in_scale = 1.0 / (input_size as f64).sqrt();
        let rec_scale = 1.0 / (hidden_size as f64).sqrt();
        let fill = |v: &mut [f64], s: f64, rng: &mut R| {
            for x in v.iter_mut() {
                *x = rng.gen_range(-s..s);
            }
        };
        fill(&mut p.wz, in_scale, rng);
        fill(&mut p.wr, in_scale, rng);
        fill(&mut p.wn, in_scale, rng);
        fill(&mut p.uz, rec_scale, rng);
        fill(&mut p.ur, rec_scale, rng);
        fill(&mut p.un, rec_scale, rng);
        for head in &mut p.heads {
            fill(&mut head.w, rec_scale, rng);
        }
        p
    }

    pub fn num_params(&self) -> usize {
        3 * self.hidden_size * self.input_size
            + 3 * self.hidden_size * self.hidden_size
            + 3 * self.hidden_size
            + self.heads.len() * (self.hidden_size + 1)
    }

    /// Flattened view in a fixed order, for gradient checking, optimizer
    /// state, and checkpoints.
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_params());
        for block in [
            &self.wz, &self.wr, &self.wn, &self.uz, &self.ur, &self.un, &self.bz, &self.br,
            &self.bn,
        ] {
            out.extend_from_slice(block);
        }
        for head in &self.heads {
            out.extend_from_slice(&head.w);
            out.push(head.b);
        }
        out
    }

    pub fn from_flat(
        flat: &[f64],
        input_size: usize,
        hidden_size: usize,
        heads: usize,
    ) -> Result<Self> {
        let mut p = Self::zeros(input_size, hidden_size, heads);
        if flat.len() != p.num_params() {
            return Err(Error::InvalidConfig(format!(
                "flat weight vector has {} entries, expected {}",
                flat.len(),
                p.num_params()
            )));
        }
        let mut offset = 0;
        {
            let blocks: [&mut Vec<f64>; 9] = [
                &mut p.wz, &mut p.wr, &mut p.wn, &mut p.uz, &mut p.ur, &mut p.un, &mut p.bz,
                &mut p.br, &mut p.bn,
            ];
            for block in blocks {
                let len = block.len();
                block.copy_from_slice(&flat[offset..offset + len]);
                offset += len;
            }
        }
        for head in &mut p.heads {
            head.w.copy_from_slice(&flat[offset..offset + hidden_size]);
            offset += hidden_size;
            head.b = flat[offset];
            offset += 1;
        }
        Ok(p)
    }

    pub fn all_finite(&self) -> bool {
        self.flatten().iter().all(|v| v.is_finite())
    }
}

/// Monte Carlo dropout ensemble for one record: sampled curves, their
/// pointwise mean, and pointwise standard deviation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CurveEnsemble {
    pub id: String,
    pub samples: Vec<SurvivalCurve>,
    pub mean: SurvivalCurve,
    pub std: Vec<f64>,
}

/// Loss trajectory of one training run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EpochStats {
    pub likelihood: f64,
    pub rank: f64,
    pub calibration: f64,
    pub total: f64,
    pub validation: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainReport {
    pub epochs: Vec<EpochStats>,
    pub selected_epoch: usize,
    pub wall_time_secs: f64,
}

/// Versioned, self-describing snapshot of a trained model.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    pub config: ModelConfig,
    pub d: usize,
    pub horizon: usize,
    pub covariate_names: Vec<String>,
    pub scaler: Option<CovariateScaler>,
    /// Fitted probability threshold for the baseline predictor, if any.
    pub theta: Option<f64>,
    pub weights: Vec<f64>,
}

pub const CHECKPOINT_VERSION: u32 = 1;

impl Checkpoint {
    pub fn new(
        config: ModelConfig,
        params: &ModelParams,
        d: usize,
        horizon: usize,
        covariate_names: Vec<String>,
        scaler: Option<CovariateScaler>,
        theta: Option<f64>,
    ) -> Self {
        Checkpoint {
            version: CHECKPOINT_VERSION,
            config,
            d,
            horizon,
            covariate_names,
            scaler,
            theta,
            weights: params.flatten(),
        }
    }

    pub fn params(&self) -> Result<ModelParams> {
        ModelParams::from_flat(
            &self.weights,
            self.config.input_size(self.d),
            self.config.hidden_size,
            self.config.heads,
        )
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let ckpt: Checkpoint = serde_json::from_str(text)?;
        if ckpt.version != CHECKPOINT_VERSION {
            return Err(Error::InvalidConfig(format!(
                "checkpoint version {} unsupported (expected {CHECKPOINT_VERSION})",
                ckpt.version
            )));
        }
        Ok(ckpt)
    }
}
