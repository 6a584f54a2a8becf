//! Synthetic cohorts drawn from a known parametric discrete-time hazard, so
//! downstream estimates can be checked against ground truth.

use std::collections::HashMap;
use std::io::Write;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::data::Cohort;
use crate::error::{Error, Result};
use crate::survival::{hazard_to_survival, HazardSequence, LongitudinalRecord, SurvivalCurve, TimeGrid};

/// Parameters of the generating hazard
/// `h_i(t) = logistic(base_logit + beta . x_i + gamma t + tau a_i)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub n: usize,
    pub horizon: usize,
    pub d: usize,
    pub beta: Vec<f64>,
    pub gamma: f64,
    pub tau: f64,
    pub base_logit: f64,
    pub treat_prob: f64,
    pub censor_hazard: f64,
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.d == 0 || self.horizon == 0 {
            return Err(Error::InvalidConfig("n, d, horizon must be >= 1".into()));
        }
        if self.beta.len() != self.d {
            return Err(Error::InvalidConfig(format!(
                "beta has {} entries, d = {}",
                self.beta.len(),
                self.d
            )));
        }
        if !(0.0..=1.0).contains(&self.treat_prob) || !(0.0..=1.0).contains(&self.censor_hazard) {
            return Err(Error::InvalidConfig("probabilities must lie in [0, 1]".into()));
        }
        Ok(())
    }
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            n: 1000,
            horizon: 20,
            d: 5,
            beta: vec![0.5, -0.5, 0.25, -0.25, 0.1],
            gamma: 0.05,
            tau: -0.3,
            base_logit: -2.5,
            treat_prob: 0.5,
            censor_hazard: 0.02,
            seed: 42,
        }
    }
}

/// True hazard sequences keyed by record id.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OracleHazards {
    index: HashMap<String, usize>,
    hazards: Vec<(String, HazardSequence)>,
}

impl OracleHazards {
    pub fn get(&self, id: &str) -> Option<&HazardSequence> {
        self.index.get(id).map(|&k| &self.hazards[k].1)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &HazardSequence)> {
        self.hazards.iter().map(|(id, h)| (id.as_str(), h))
    }

    pub fn len(&self) -> usize {
        self.hazards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.hazards.is_empty()
    }
}

fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Draws a cohort from the spec's hazard. Covariates are standard normal and
/// static over time; censoring is geometric and independent of covariates.
/// A censoring tie at the event interval is recorded as censored.
pub fn generate_cohort(spec: &SyntheticSpec) -> Result<(Cohort, OracleHazards)> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let grid = TimeGrid::with_horizon(spec.horizon)?;

    let mut records = Vec::with_capacity(spec.n);
    let mut hazards = Vec::with_capacity(spec.n);
    let mut index = HashMap::with_capacity(spec.n);

    for i in 0..spec.n {
        let id = format!("s{i}");
        let x: Vec<f64> = (0..spec.d).map(|_| rng.sample(StandardNormal)).collect();
        let treated = rng.gen_bool(spec.treat_prob);
        let linear: f64 = spec.base_logit
            + spec.beta.iter().zip(&x).map(|(b, v)| b * v).sum::<f64>()
            + if treated { spec.tau } else { 0.0 };

        let true_hazard: Vec<f64> = (1..=spec.horizon)
            .map(|t| logistic(linear + spec.gamma * t as f64))
            .collect();

        // Walk the intervals: per-interval event Bernoulli exactly matches the
        // first-hitting-time pmf induced by the hazard sequence.
        let mut event_interval: Option<usize> = None;
        for (k, &h) in true_hazard.iter().enumerate() {
            if rng.gen_bool(h) {
                event_interval = Some(k + 1);
                break;
            }
        }
        let mut censor_interval: Option<usize> = None;
        if spec.censor_hazard > 0.0 {
            for t in 1..=spec.horizon {
                if rng.gen_bool(spec.censor_hazard) {
                    censor_interval = Some(t);
                    break;
                }
            }
        }

        let event_t = event_interval.unwrap_or(usize::MAX);
        let censor_t = censor_interval.unwrap_or(usize::MAX);
        let (observed_length, event) = if event_t < censor_t && event_t <= spec.horizon {
            (event_t, true)
        } else if censor_t <= spec.horizon {
            (censor_t, false)
        } else {
            (spec.horizon, false)
        };

        let covariates = vec![x; observed_length];
        let treatment = vec![u8::from(treated); observed_length];
        records.push(LongitudinalRecord::new(
            id.clone(),
            covariates,
            treatment,
            event,
        )?);
        index.insert(id.clone(), hazards.len());
        hazards.push((id, HazardSequence::new(true_hazard)?));
    }

    let covariate_names = (1..=spec.d).map(|k| format!("x{k}")).collect();
    let cohort = Cohort::new(grid, records, covariate_names)?;
    Ok((cohort, OracleHazards { index, hazards }))
}

/// Exact survival curve from an individual's true hazards.
pub fn oracle_survival(oracle: &OracleHazards, id: &str) -> Result<SurvivalCurve> {
    oracle
        .get(id)
        .map(hazard_to_survival)
        .ok_or_else(|| Error::UnknownId(id.to_string()))
}

/// Writes the oracle as tidy CSV: `id,t,true_hazard`.
pub fn write_oracle_csv<W: Write>(oracle: &OracleHazards, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["id", "t", "true_hazard"])?;
    for (id, hazard) in oracle.iter() {
        for (k, &h) in hazard.values().iter().enumerate() {
            w.write_record([id, &(k + 1).to_string(), &format!("{h}")])?;
        }
    }
    w.flush()?;
    Ok(())
}
