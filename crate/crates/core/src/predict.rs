//! Event-time prediction from survival curves: the inflection point of the
//! curve, and the probability-threshold baseline with its Nelder-Mead fit.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::CurveEnsemble;
use crate::survival::SurvivalCurve;

pub const DEFAULT_SMOOTHING_WINDOW: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PredictionMethod {
    Inflection,
    Threshold,
}

impl std::fmt::Display for PredictionMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            PredictionMethod::Inflection => write!(f, "inflection"),
            PredictionMethod::Threshold => write!(f, "threshold"),
        }
    }
}

impl std::str::FromStr for PredictionMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "inflection" => Ok(PredictionMethod::Inflection),
            "threshold" => Ok(PredictionMethod::Threshold),
            other => Err(Error::InvalidConfig(format!("unknown method `{other}`"))),
        }
    }
}

/// Predicted event time in 1-based interval units. A curve that never
/// signals an event yields the beyond-horizon sentinel, scored at the
/// horizon in distance metrics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TtePrediction {
    pub t_hat: usize,
    pub beyond_horizon: bool,
    pub method: PredictionMethod,
    /// Standard deviation of `t_hat` across ensemble samples; 0 for a
    /// single curve.
    pub spread: f64,
}

/// Fitted probability threshold for the baseline predictor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdModel {
    theta_star: f64,
}

impl ThresholdModel {
    pub fn new(theta: f64) -> Result<Self> {
        if !(theta > 0.0 && theta < 1.0) {
            return Err(Error::InvalidInput(format!(
                "threshold {theta} outside the open interval (0, 1)"
            )));
        }
        Ok(ThresholdModel { theta_star: theta })
    }

    pub fn theta(&self) -> f64 {
        self.theta_star
    }
}

/// Centered moving average; windows shrink at the edges.
fn smooth(values: &[f64], window: usize) -> Vec<f64> {
    if window <= 1 {
        return values.to_vec();
    }
    let r = (window - 1) / 2;
    let n = values.len();
    (0..n)
        .map(|i| {
            // keep edge windows centered so they stay unbiased on curved data
            let ri = r.min(i).min(n - 1 - i);
            values[i - ri..=i + ri].iter().sum::<f64>() / (2 * ri + 1) as f64
        })
        .collect()
}

/// Predicts the event time as the earliest concave-to-convex crossing of the
/// (lightly smoothed) survival curve's discrete second differences.
pub fn inflection_time(curve: &SurvivalCurve, smoothing_window: usize) -> Result<TtePrediction> {
    let horizon = curve.len();
    if horizon < 3 {
        return Err(Error::InvalidInput(format!(
            "inflection needs at least 3 intervals, got {horizon}"
        )));
    }
    if smoothing_window % 2 == 0 {
        return Err(Error::InvalidInput("smoothing window must be odd".into()));
    }
    let sm = smooth(curve.values(), smoothing_window);

    // second differences for t in [2, horizon-1] (1-based); the crossing
    // needs a non-positive predecessor, so it starts at t = 3
    let d2 = |t: usize| sm[t] - 2.0 * sm[t - 1] + sm[t - 2];
    for t in 3..horizon {
        if d2(t) > 0.0 && d2(t - 1) <= 0.0 {
            return Ok(TtePrediction {
                t_hat: t,
                beyond_horizon: false,
                method: PredictionMethod::Inflection,
                spread: 0.0,
            });
        }
    }
    Ok(TtePrediction {
        t_hat: horizon,
        beyond_horizon: true,
        method: PredictionMethod::Inflection,
        spread: 0.0,
    })
}

/// Earliest interval where the curve drops below the threshold.
pub fn threshold_time(curve: &SurvivalCurve, theta: f64) -> Result<TtePrediction> {
    if !(theta > 0.0 && theta < 1.0) {
        return Err(Error::InvalidInput(format!(
            "threshold {theta} outside the open interval (0, 1)"
        )));
    }
    for (k, &s) in curve.values().iter().enumerate() {
        if s < theta {
            return Ok(TtePrediction {
                t_hat: k + 1,
                beyond_horizon: false,
                method: PredictionMethod::Threshold,
                spread: 0.0,
            });
        }
    }
    Ok(TtePrediction {
        t_hat: curve.len(),
        beyond_horizon: true,
        method: PredictionMethod::Threshold,
        spread: 0.0,
    })
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn threshold_objective(theta: f64, curves: &[SurvivalCurve], true_times: &[usize]) -> f64 {
    let total: f64 = curves
        .iter()
        .zip(true_times)
        .map(|(curve, &t)| {
            let pred = threshold_time(curve, theta).expect("theta in (0,1)");
            (pred.t_hat as f64 - t as f64).abs()
        })
        .sum();
    total / curves.len() as f64
}

/// One-dimensional Nelder-Mead over `logit(theta)` minimizing the mean
/// absolute distance between thresholded and true times. Event flags ride
/// along for the contract but the distance treats event and censoring
/// times alike.
pub fn fit_threshold(
    curves: &[SurvivalCurve],
    true_times: &[usize],
    _event_flags: &[bool],
) -> Result<ThresholdModel> {
    if curves.is_empty() || curves.len() != true_times.len() {
        return Err(Error::InvalidInput(
            "fit_threshold needs aligned, non-empty curves and times".into(),
        ));
    }
    let f = |x: f64| threshold_objective(logistic(x), curves, true_times);

    // 1-D simplex seeded at theta = 0.5 and 0.95
    let mut a = (logit(0.5), f(logit(0.5)));
    let mut b = (logit(0.95), f(logit(0.95)));
    const MAX_ITERS: usize = 200;
    for _ in 0..MAX_ITERS {
        if a.1 > b.1 {
            std::mem::swap(&mut a, &mut b);
        }
        if (a.0 - b.0).abs() < 1e-10 {
            break;
        }
        // reflect the worst point through the best
        let xr = a.0 + (a.0 - b.0);
        let fr = f(xr);
        if fr < a.1 {
            // expand
            let xe = a.0 + 2.0 * (a.0 - b.0);
            let fe = f(xe);
            b = if fe < fr { (xe, fe) } else { (xr, fr) };
        } else if fr < b.1 {
            b = (xr, fr);
        } else {
            // contract toward the best point
            let xc = a.0 + 0.5 * (b.0 - a.0);
            let fc = f(xc);
            if fc < b.1 {
                b = (xc, fc);
            } else {
                // shrink
                b = (a.0 + 0.5 * (b.0 - a.0), fc.min(b.1));
                let xs = a.0 + 0.5 * (b.0 - a.0);
                b = (xs, f(xs));
            }
        }
    }
    let best = if a.1 <= b.1 { a.0 } else { b.0 };
    ThresholdModel::new(logistic(best))
}

/// Parameters for applying a prediction method to an ensemble.
#[derive(Debug, Clone, Copy)]
pub enum PredictorSpec {
    Inflection { smoothing_window: usize },
    Threshold { theta: f64 },
}

impl PredictorSpec {
    pub fn apply(&self, curve: &SurvivalCurve) -> Result<TtePrediction> {
        match *self {
            PredictorSpec::Inflection { smoothing_window } => {
                inflection_time(curve, smoothing_window)
            }
            PredictorSpec::Threshold { theta } => threshold_time(curve, theta),
        }
    }
}

/// Applies the method to each sampled curve for the spread, and to the
/// ensemble-mean curve for the point prediction. Sentinels count as the
/// horizon when computing the spread.
pub fn ensemble_predict(ensemble: &CurveEnsemble, spec: &PredictorSpec) -> Result<TtePrediction> {
    if ensemble.samples.is_empty() {
        return Err(Error::InvalidInput("ensemble has no sampled curves".into()));
    }
    let per_sample: Vec<f64> = ensemble
        .samples
        .iter()
        .map(|s| spec.apply(s).map(|p| p.t_hat as f64))
        .collect::<Result<_>>()?;
    let k = per_sample.len() as f64;
    let mean = per_sample.iter().sum::<f64>() / k;
    let spread = (per_sample.iter().map(|t| (t - mean) * (t - mean)).sum::<f64>() / k).sqrt();

    let mut pred = spec.apply(&ensemble.mean)?;
    pred.spread = spread;
    Ok(pred)
}
