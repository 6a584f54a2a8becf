//! Core discrete-time survival objects and the exact transforms among them.
//!
//! Time is a grid of 1-based intervals `(t-1, t]` for `t = 1..=horizon`.
//! Vectors are stored 0-based, so index `k` holds the value for interval
//! `t = k + 1`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The discrete time axis: `horizon` intervals, each covering
/// `window_size` raw time steps.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimeGrid {
    horizon: usize,
    step_label: String,
    window_size: usize,
}

impl TimeGrid {
    pub fn new(horizon: usize, step_label: impl Into<String>, window_size: usize) -> Result<Self> {
        if horizon == 0 {
            return Err(Error::InvalidInput("horizon must be >= 1".into()));
        }
        if window_size == 0 {
            return Err(Error::InvalidInput("window_size must be >= 1".into()));
        }
        Ok(TimeGrid {
            horizon,
            step_label: step_label.into(),
            window_size,
        })
    }

    /// Grid with unit windows and an anonymous step label.
    pub fn with_horizon(horizon: usize) -> Result<Self> {
        TimeGrid::new(horizon, "interval", 1)
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn step_label(&self) -> &str {
        &self.step_label
    }

    pub fn window_size(&self) -> usize {
        self.window_size
    }
}

/// Per-interval conditional event probabilities `h(t)`, one per grid interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HazardSequence {
    values: Vec<f64>,
}

impl HazardSequence {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidInput("hazard sequence must be non-empty".into()));
        }
        for (k, &h) in values.iter().enumerate() {
            if !(0.0..=1.0).contains(&h) {
                return Err(Error::InvalidInput(format!(
                    "hazard at interval {} is {h}, outside [0, 1]",
                    k + 1
                )));
            }
        }
        Ok(HazardSequence { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Non-increasing survival probabilities `S(t)`, one per grid interval.
/// `S(0) = 1` by definition and is not stored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurvivalCurve {
    values: Vec<f64>,
}

impl SurvivalCurve {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidInput("survival curve must be non-empty".into()));
        }
        let mut prev = 1.0f64;
        for (k, &s) in values.iter().enumerate() {
            if !(0.0..=1.0).contains(&s) {
                return Err(Error::InvalidInput(format!(
                    "survival at interval {} is {s}, outside [0, 1]",
                    k + 1
                )));
            }
            if s > prev {
                return Err(Error::InvalidInput(format!(
                    "survival curve increases at interval {}: {prev} -> {s}",
                    k + 1
                )));
            }
            prev = s;
        }
        Ok(SurvivalCurve { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `S(t)` for a 1-based interval index; `S(0) = 1`.
    pub fn at(&self, t: usize) -> f64 {
        if t == 0 {
            1.0
        } else {
            self.values[t - 1]
        }
    }
}

/// The 2 x horizon binary target: a survival-so-far row `E` and an
/// event-indicator row `C`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelMatrix {
    e_row: Vec<u8>,
    c_row: Vec<u8>,
}

impl LabelMatrix {
    pub fn e_row(&self) -> &[u8] {
        &self.e_row
    }

    pub fn c_row(&self) -> &[u8] {
        &self.c_row
    }

    pub fn horizon(&self) -> usize {
        self.e_row.len()
    }
}

/// One individual's covariate and treatment history.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LongitudinalRecord {
    pub id: String,
    /// One row per observed interval, `d` columns each.
    pub covariates: Vec<Vec<f64>>,
    /// Binary treatment indicator per observed interval.
    pub treatment: Vec<u8>,
    /// `t_i`, 1-based count of observed intervals.
    pub observed_length: usize,
    /// `true` = event at `t_i`, `false` = censored at `t_i`.
    pub event: bool,
}

impl LongitudinalRecord {
    pub fn new(
        id: impl Into<String>,
        covariates: Vec<Vec<f64>>,
        treatment: Vec<u8>,
        event: bool,
    ) -> Result<Self> {
        let id = id.into();
        let observed_length = covariates.len();
        if observed_length == 0 {
            return Err(Error::Integrity {
                id,
                reason: "record has no observed intervals".into(),
            });
        }
        if treatment.len() != observed_length {
            return Err(Error::Integrity {
                id,
                reason: format!(
                    "treatment length {} != covariate rows {}",
                    treatment.len(),
                    observed_length
                ),
            });
        }
        let d = covariates[0].len();
        if covariates.iter().any(|row| row.len() != d) {
            return Err(Error::Integrity {
                id,
                reason: "covariate rows have inconsistent widths".into(),
            });
        }
        Ok(LongitudinalRecord {
            id,
            covariates,
            treatment,
            observed_length,
            event,
        })
    }

    pub fn num_covariates(&self) -> usize {
        self.covariates[0].len()
    }
}

/// `S(t) = prod_{j<=t} (1 - h(j))`: exact cumulative product, no clamping.
pub fn hazard_to_survival(h: &HazardSequence) -> SurvivalCurve {
    let mut values = Vec::with_capacity(h.len());
    let mut acc = 1.0f64;
    for &hj in h.values() {
        acc *= 1.0 - hj;
        values.push(acc);
    }
    SurvivalCurve { values }
}

/// `h(t) = 1 - S(t)/S(t-1)` with `S(0) = 1`; once `S(t-1) = 0`, `h(t) = 0`
/// by convention.
pub fn survival_to_hazard(s: &SurvivalCurve) -> HazardSequence {
    let mut values = Vec::with_capacity(s.len());
    let mut prev = 1.0f64;
    for &st in s.values() {
        if prev == 0.0 {
            values.push(0.0);
        } else {
            values.push(1.0 - st / prev);
        }
        prev = st;
    }
    HazardSequence { values }
}

/// First-hitting-time mass `pmf(t) = h(t) * prod_{j<t} (1 - h(j))`.
///
/// The masses plus residual survival `S(horizon)` sum to 1.
pub fn event_time_pmf(h: &HazardSequence) -> Vec<f64> {
    let mut pmf = Vec::with_capacity(h.len());
    let mut surv = 1.0f64;
    for &hj in h.values() {
        pmf.push(hj * surv);
        surv *= 1.0 - hj;
    }
    pmf
}

/// Builds the label matrix for an individual observed through
/// `observed_length` intervals: `e(t) = 1` for `t < t_i`, and `c(t_i) = 1`
/// only when an event occurred.
pub fn build_label_matrix(
    observed_length: usize,
    event: bool,
    grid: &TimeGrid,
) -> Result<LabelMatrix> {
    let horizon = grid.horizon();
    if observed_length == 0 || observed_length > horizon {
        return Err(Error::InvalidInput(format!(
            "observed_length {observed_length} outside [1, {horizon}]"
        )));
    }
    let mut e_row = vec![0u8; horizon];
    let mut c_row = vec![0u8; horizon];
    for slot in e_row.iter_mut().take(observed_length - 1) {
        *slot = 1;
    }
    if event {
        c_row[observed_length - 1] = 1;
    }
    Ok(LabelMatrix { e_row, c_row })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn hz(v: &[f64]) -> HazardSequence {
        HazardSequence::new(v.to_vec()).unwrap()
    }

    #[test]
    fn survival_of_zero_hazard_is_flat() {
        let s = hazard_to_survival(&hz(&[0.0, 0.0, 0.0]));
        assert_eq!(s.values(), &[1.0, 1.0, 1.0]);
    }

    #[test]
    fn certain_event_zeroes_the_curve() {
        let s = hazard_to_survival(&hz(&[1.0, 0.5]));
        assert_eq!(s.values(), &[0.0, 0.0]);
    }

    #[test]
    fn cumulative_product_hand_oracle() {
        // 0.9, 0.9*0.8, 0.9*0.8*0.7
        let s = hazard_to_survival(&hz(&[0.1, 0.2, 0.3]));
        assert!((s.values()[0] - 0.9).abs() < 1e-15);
        assert!((s.values()[1] - 0.72).abs() < 1e-15);
        assert!((s.values()[2] - 0.504).abs() < 1e-15);
    }

    #[test]
    fn hazard_of_flat_curve_is_zero() {
        let s = SurvivalCurve::new(vec![1.0, 1.0, 1.0]).unwrap();
        assert_eq!(survival_to_hazard(&s).values(), &[0.0, 0.0, 0.0]);
    }

    #[test]
    fn hazard_inverts_product_oracle() {
        let s = SurvivalCurve::new(vec![0.9, 0.72, 0.504]).unwrap();
        let h = survival_to_hazard(&s);
        let expect = [0.1, 0.2, 0.3];
        for (got, want) in h.values().iter().zip(expect) {
            assert!((got - want).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_survival_convention() {
        let s = SurvivalCurve::new(vec![0.0, 0.0]).unwrap();
        assert_eq!(survival_to_hazard(&s).values(), &[1.0, 0.0]);
    }

    #[test]
    fn pmf_mass_at_first_interval() {
        assert_eq!(event_time_pmf(&hz(&[1.0, 0.3])), vec![1.0, 0.0]);
    }

    #[test]
    fn pmf_hand_oracle() {
        let pmf = event_time_pmf(&hz(&[0.5, 0.5]));
        assert_eq!(pmf, vec![0.5, 0.25]);
        let s = hazard_to_survival(&hz(&[0.5, 0.5]));
        assert!((s.values()[1] - 0.25).abs() < 1e-15);
    }

    #[test]
    fn pmf_of_zero_hazard_is_zero() {
        assert_eq!(event_time_pmf(&hz(&[0.0, 0.0, 0.0])), vec![0.0, 0.0, 0.0]);
    }

    #[test]
    fn label_matrix_event_case() {
        let grid = TimeGrid::with_horizon(5).unwrap();
        let m = build_label_matrix(3, true, &grid).unwrap();
        assert_eq!(m.e_row(), &[1, 1, 0, 0, 0]);
        assert_eq!(m.c_row(), &[0, 0, 1, 0, 0]);
    }

    #[test]
    fn label_matrix_censored_case() {
        let grid = TimeGrid::with_horizon(5).unwrap();
        let m = build_label_matrix(3, false, &grid).unwrap();
        assert_eq!(m.e_row(), &[1, 1, 0, 0, 0]);
        assert_eq!(m.c_row(), &[0, 0, 0, 0, 0]);
    }

    #[test]
    fn label_matrix_earliest_event() {
        let grid = TimeGrid::with_horizon(2).unwrap();
        let m = build_label_matrix(1, true, &grid).unwrap();
        assert_eq!(m.e_row(), &[0, 0]);
        assert_eq!(m.c_row(), &[1, 0]);
    }

    #[test]
    fn label_matrix_rejects_out_of_range() {
        let grid = TimeGrid::with_horizon(3).unwrap();
        assert!(build_label_matrix(0, true, &grid).is_err());
        assert!(build_label_matrix(4, false, &grid).is_err());
    }

    #[test]
    fn survival_curve_rejects_increase() {
        assert!(SurvivalCurve::new(vec![0.5, 0.6]).is_err());
    }

    #[test]
    fn hazard_rejects_out_of_range() {
        assert!(HazardSequence::new(vec![0.5, 1.1]).is_err());
        assert!(HazardSequence::new(vec![-0.1]).is_err());
    }

    proptest! {
        #[test]
        fn survival_is_monotone_in_unit_interval(values in proptest::collection::vec(0.0f64..=1.0, 1..60)) {
            let s = hazard_to_survival(&hz(&values));
            let mut prev = 1.0;
            for &v in s.values() {
                prop_assert!((0.0..=1.0).contains(&v));
                prop_assert!(v <= prev);
                prev = v;
            }
        }

        #[test]
        fn hazard_round_trips_below_one(values in proptest::collection::vec(0.0f64..0.999, 1..60)) {
            let h = hz(&values);
            let back = survival_to_hazard(&hazard_to_survival(&h));
            for (a, b) in h.values().iter().zip(back.values()) {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }

        #[test]
        fn pmf_and_residual_survival_conserve_mass(values in proptest::collection::vec(0.0f64..=1.0, 1..60)) {
            let h = hz(&values);
            let total: f64 = event_time_pmf(&h).iter().sum::<f64>()
                + hazard_to_survival(&h).values().last().unwrap();
            prop_assert!((total - 1.0).abs() < 1e-12);
        }

        #[test]
        fn label_matrix_invariants_hold(t_i in 1usize..=30, event in any::<bool>()) {
            let grid = TimeGrid::with_horizon(30).unwrap();
            let m = build_label_matrix(t_i, event, &grid).unwrap();
            // e_row is a prefix of 1s then 0s
            let mut seen_zero = false;
            for &e in m.e_row() {
                if e == 0 { seen_zero = true; }
                prop_assert!(!(seen_zero && e == 1));
            }
            let ones: usize = m.c_row().iter().map(|&c| c as usize).sum();
            prop_assert!(ones <= 1);
            prop_assert_eq!(ones == 0, !event);
            if event {
                prop_assert_eq!(m.c_row()[t_i - 1], 1);
                for t in t_i..30 {
                    prop_assert_eq!(m.e_row()[t], 0);
                }
            }
        }
    }
}
