//! Cohort ingestion: CSV parsing, time discretization, horizon truncation,
//! train/validation/test splitting, and covariate standardization.

use std::collections::HashSet;
use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::survival::{LongitudinalRecord, TimeGrid};

/// Column names reserved by the longitudinal CSV schema; every other column
/// is treated as a covariate when none are named explicitly.
const RESERVED_COLUMNS: [&str; 4] = ["id", "time_step", "treatment", "event"];

/// A set of records sharing one time grid and covariate layout.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Cohort {
    pub grid: TimeGrid,
    pub records: Vec<LongitudinalRecord>,
    pub covariate_names: Vec<String>,
    /// False when the source data carried no treatment column (all
    /// indicators defaulted to 0); two-headed models then duplicate the
    /// cohort into a treated and a control copy.
    pub has_treatment: bool,
}

impl Cohort {
    pub fn new(
        grid: TimeGrid,
        records: Vec<LongitudinalRecord>,
        covariate_names: Vec<String>,
    ) -> Result<Self> {
        let d = covariate_names.len();
        let mut seen = HashSet::new();
        for rec in &records {
            if rec.num_covariates() != d {
                return Err(Error::Integrity {
                    id: rec.id.clone(),
                    reason: format!("record has {} covariates, cohort has {d}", rec.num_covariates()),
                });
            }
            if rec.observed_length > grid.horizon() {
                return Err(Error::Integrity {
                    id: rec.id.clone(),
                    reason: format!(
                        "observed_length {} exceeds horizon {}",
                        rec.observed_length,
                        grid.horizon()
                    ),
                });
            }
            if !seen.insert(rec.id.clone()) {
                return Err(Error::Integrity {
                    id: rec.id.clone(),
                    reason: "duplicate id".into(),
                });
            }
        }
        Ok(Cohort {
            grid,
            records,
            covariate_names,
            has_treatment: true,
        })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn num_covariates(&self) -> usize {
        self.covariate_names.len()
    }
}

/// Fractions of the cohort assigned to train/validation/test.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub validation_fraction: f64,
    pub test_fraction: f64,
    pub seed: u64,
}

impl SplitSpec {
    pub fn new(train: f64, validation: f64, test: f64, seed: u64) -> Result<Self> {
        if train <= 0.0 || validation <= 0.0 || test <= 0.0 {
            return Err(Error::InvalidInput("split fractions must be positive".into()));
        }
        if (train + validation + test - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidInput(format!(
                "split fractions sum to {}, expected 1",
                train + validation + test
            )));
        }
        Ok(SplitSpec {
            train_fraction: train,
            validation_fraction: validation,
            test_fraction: test,
            seed,
        })
    }
}

/// Per-column location and scale fitted on training data only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovariateScaler {
    pub means: Vec<f64>,
    pub scales: Vec<f64>,
}

/// Reads a longitudinal cohort from CSV.
///
/// Required columns: `id`, `time_step` (1-based, contiguous per id) and
/// `event` (0/1, read from each id's final row). `treatment` (0/1) is
/// optional; when absent, indicators default to 0 and the cohort is marked
/// treatment-free. When `covariate_names` is `None`, every remaining column
/// is a covariate in header order.
pub fn load_longitudinal_csv(path: &Path, covariate_names: Option<&[String]>) -> Result<Cohort> {
    let mut reader = csv::Reader::from_path(path)?;
    let headers: Vec<String> = reader.headers()?.iter().map(str::to_owned).collect();

    let col = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    };
    let id_col = col("id")?;
    let time_col = col("time_step")?;
    let treat_col = headers.iter().position(|h| h == "treatment");
    let event_col = col("event")?;

    let covariates: Vec<String> = match covariate_names {
        Some(names) => names.to_vec(),
        None => headers
            .iter()
            .filter(|h| !RESERVED_COLUMNS.contains(&h.as_str()))
            .cloned()
            .collect(),
    };
    let cov_cols: Vec<usize> = covariates.iter().map(|c| col(c)).collect::<Result<_>>()?;

    struct Row {
        time_step: usize,
        covariates: Vec<f64>,
        treatment: u8,
        event: bool,
    }

    // Grouped by id, preserving first-appearance order for determinism.
    let mut order: Vec<String> = Vec::new();
    let mut groups: std::collections::HashMap<String, Vec<Row>> = std::collections::HashMap::new();

    for (row_idx, record) in reader.records().enumerate() {
        let record = record?;
        let row_number = row_idx + 2; // 1-based, after the header
        let parse_cell = |idx: usize, column: &str| -> Result<f64> {
            record[idx].trim().parse::<f64>().map_err(|e| Error::Parse {
                row: row_number,
                column: column.to_string(),
                reason: e.to_string(),
            })
        };

        let id = record[id_col].trim().to_string();
        let time_step = parse_cell(time_col, "time_step")? as usize;
        let treatment = match treat_col {
            Some(idx) => parse_cell(idx, "treatment")? as u8,
            None => 0,
        };
        let event = parse_cell(event_col, "event")? != 0.0;
        let covs: Vec<f64> = cov_cols
            .iter()
            .zip(&covariates)
            .map(|(&idx, name)| parse_cell(idx, name))
            .collect::<Result<_>>()?;

        if !groups.contains_key(&id) {
            order.push(id.clone());
        }
        groups.entry(id).or_default().push(Row {
            time_step,
            covariates: covs,
            treatment,
            event,
        });
    }

    let mut records = Vec::with_capacity(order.len());
    let mut max_len = 0usize;
    for id in order {
        let mut rows = groups.remove(&id).unwrap();
        rows.sort_by_key(|r| r.time_step);
        for (k, row) in rows.iter().enumerate() {
            if row.time_step != k + 1 {
                return Err(Error::Integrity {
                    id,
                    reason: format!(
                        "time steps not contiguous from 1: expected {}, found {}",
                        k + 1,
                        row.time_step
                    ),
                });
            }
        }
        let event = rows.last().unwrap().event;
        let treatment: Vec<u8> = rows.iter().map(|r| r.treatment).collect();
        let covs: Vec<Vec<f64>> = rows.into_iter().map(|r| r.covariates).collect();
        let rec = LongitudinalRecord::new(id, covs, treatment, event)?;
        max_len = max_len.max(rec.observed_length);
        records.push(rec);
    }

    let grid = TimeGrid::new(max_len.max(1), "step", 1)?;
    let mut cohort = Cohort::new(grid, records, covariates)?;
    cohort.has_treatment = treat_col.is_some();
    Ok(cohort)
}

/// Writes a cohort in the schema `load_longitudinal_csv` reads.
pub fn write_longitudinal_csv<W: Write>(cohort: &Cohort, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["id".to_string(), "time_step".to_string()];
    header.extend(cohort.covariate_names.iter().cloned());
    if cohort.has_treatment {
        header.push("treatment".to_string());
    }
    header.push("event".to_string());
    w.write_record(&header)?;
    for rec in &cohort.records {
        for t in 0..rec.observed_length {
            let mut row = vec![rec.id.clone(), (t + 1).to_string()];
            row.extend(rec.covariates[t].iter().map(|v| format!("{v}")));
            if cohort.has_treatment {
                row.push(rec.treatment[t].to_string());
            }
            let event_flag = rec.event && t + 1 == rec.observed_length;
            row.push(if event_flag { "1" } else { "0" }.to_string());
            w.write_record(&row)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Discretizes raw static survival data into interval windows.
///
/// Raw times are ranked among the sorted unique observed times; each falls in
/// interval `ceil(rank / window)`. The horizon keeps only complete windows
/// (`floor(unique_count / window)`); individuals past it are administratively
/// censored at the horizon.
pub fn discretize_static(
    raw_times: &[f64],
    raw_events: &[bool],
    covariates: &[Vec<f64>],
    window: usize,
    covariate_names: Vec<String>,
) -> Result<Cohort> {
    if window == 0 {
        return Err(Error::InvalidConfig("window must be >= 1".into()));
    }
    if raw_times.len() != raw_events.len() || raw_times.len() != covariates.len() {
        return Err(Error::InvalidInput("times, events, covariates must align".into()));
    }
    if raw_times.iter().any(|&t| !(t > 0.0)) {
        return Err(Error::InvalidInput("raw times must be positive".into()));
    }

    let mut unique: Vec<f64> = raw_times.to_vec();
    unique.sort_by(|a, b| a.partial_cmp(b).unwrap());
    unique.dedup();
    let u = unique.len();
    if window > u {
        return Err(Error::InvalidConfig(format!(
            "window {window} exceeds the {u} unique time points"
        )));
    }
    let horizon = u / window;
    let grid = TimeGrid::new(horizon, format!("{window} raw steps"), window)?;

    let mut records = Vec::with_capacity(raw_times.len());
    for (i, (&time, &event)) in raw_times.iter().zip(raw_events).enumerate() {
        let rank = unique.partition_point(|&x| x < time) + 1; // 1-based
        let interval = rank.div_ceil(window);
        let (observed_length, event) = if interval > horizon {
            (horizon, false)
        } else {
            (interval, event)
        };
        let covs = vec![covariates[i].clone(); observed_length];
        let treatment = vec![0u8; observed_length];
        records.push(LongitudinalRecord::new(
            i.to_string(),
            covs,
            treatment,
            event,
        )?);
    }
    let mut cohort = Cohort::new(grid, records, covariate_names)?;
    cohort.has_treatment = false;
    Ok(cohort)
}

/// Cuts every record to at most `max_steps` intervals; records cut short are
/// censored at the new horizon.
pub fn truncate_horizon(cohort: &Cohort, max_steps: usize) -> Result<Cohort> {
    if max_steps == 0 {
        return Err(Error::InvalidInput("max_steps must be >= 1".into()));
    }
    let grid = TimeGrid::new(
        max_steps,
        cohort.grid.step_label().to_string(),
        cohort.grid.window_size(),
    )?;
    let records = cohort
        .records
        .iter()
        .map(|rec| {
            if rec.observed_length <= max_steps {
                Ok(rec.clone())
            } else {
                LongitudinalRecord::new(
                    rec.id.clone(),
                    rec.covariates[..max_steps].to_vec(),
                    rec.treatment[..max_steps].to_vec(),
                    false,
                )
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let mut out = Cohort::new(grid, records, cohort.covariate_names.clone())?;
    out.has_treatment = cohort.has_treatment;
    Ok(out)
}

/// Deterministic id-level partition into train/validation/test.
pub fn split_cohort(cohort: &Cohort, spec: &SplitSpec) -> Result<(Cohort, Cohort, Cohort)> {
    let n = cohort.len();
    let mut indices: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    indices.shuffle(&mut rng);

    // Floor each target size, then hand leftovers to the largest remainders.
    let fractions = [
        spec.train_fraction,
        spec.validation_fraction,
        spec.test_fraction,
    ];
    let mut sizes = [0usize; 3];
    let mut remainders = [0f64; 3];
    for (k, f) in fractions.iter().enumerate() {
        let exact = f * n as f64;
        sizes[k] = exact.floor() as usize;
        remainders[k] = exact - exact.floor();
    }
    let mut leftover = n - sizes.iter().sum::<usize>();
    let mut by_remainder: Vec<usize> = (0..3).collect();
    by_remainder.sort_by(|&a, &b| remainders[b].partial_cmp(&remainders[a]).unwrap());
    for &k in &by_remainder {
        if leftover == 0 {
            break;
        }
        sizes[k] += 1;
        leftover -= 1;
    }

    let take = |range: std::ops::Range<usize>| -> Result<Cohort> {
        let records: Vec<LongitudinalRecord> = indices[range]
            .iter()
            .map(|&i| cohort.records[i].clone())
            .collect();
        let mut part = Cohort::new(cohort.grid.clone(), records, cohort.covariate_names.clone())?;
        part.has_treatment = cohort.has_treatment;
        Ok(part)
    };
    let train = take(0..sizes[0])?;
    let validation = take(sizes[0]..sizes[0] + sizes[1])?;
    let test = take(sizes[0] + sizes[1]..n)?;
    Ok((train, validation, test))
}

/// Fits per-column mean and population standard deviation over the training
/// cohort's observed person-time rows. Zero-variance columns get scale 1.
pub fn fit_scaler(train: &Cohort) -> Result<CovariateScaler> {
    if train.is_empty() {
        return Err(Error::InvalidInput("cannot fit a scaler on an empty cohort".into()));
    }
    let d = train.num_covariates();
    let mut means = vec![0.0; d];
    let mut count = 0usize;
    for rec in &train.records {
        for row in &rec.covariates {
            for (m, &v) in means.iter_mut().zip(row) {
                *m += v;
            }
            count += 1;
        }
    }
    for m in &mut means {
        *m /= count as f64;
    }
    let mut variances = vec![0.0; d];
    for rec in &train.records {
        for row in &rec.covariates {
            for (k, &v) in row.iter().enumerate() {
                let dev = v - means[k];
                variances[k] += dev * dev;
            }
        }
    }
    let scales: Vec<f64> = variances
        .iter()
        .map(|&var| {
            let sd = (var / count as f64).sqrt();
            if sd > 0.0 {
                sd
            } else {
                1.0
            }
        })
        .collect();
    Ok(CovariateScaler { means, scales })
}

/// Applies a fitted scaler to every covariate row of a cohort.
pub fn apply_scaler(scaler: &CovariateScaler, cohort: &Cohort) -> Result<Cohort> {
    if scaler.means.len() != cohort.num_covariates() {
        return Err(Error::InvalidInput(format!(
            "scaler has {} columns, cohort has {}",
            scaler.means.len(),
            cohort.num_covariates()
        )));
    }
    let records = cohort
        .records
        .iter()
        .map(|rec| {
            let covs: Vec<Vec<f64>> = rec
                .covariates
                .iter()
                .map(|row| {
                    row.iter()
                        .enumerate()
                        .map(|(k, &v)| (v - scaler.means[k]) / scaler.scales[k])
                        .collect()
                })
                .collect();
            LongitudinalRecord::new(rec.id.clone(), covs, rec.treatment.clone(), rec.event)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut out = Cohort::new(cohort.grid.clone(), records, cohort.covariate_names.clone())?;
    out.has_treatment = cohort.has_treatment;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_temp(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    #[test]
    fn parses_two_ids_three_steps() {
        let f = write_temp(
            "id,time_step,x1,x2,treatment,event\n\
             a,1,0.1,1.0,0,0\n\
             a,2,0.2,1.1,0,0\n\
             a,3,0.3,1.2,1,1\n\
             b,1,0.4,2.0,0,0\n\
             b,2,0.5,2.1,0,0\n\
             b,3,0.6,2.2,0,0\n",
        );
        let cohort = load_longitudinal_csv(f.path(), None).unwrap();
        assert_eq!(cohort.len(), 2);
        assert_eq!(cohort.covariate_names, vec!["x1", "x2"]);
        assert_eq!(cohort.records[0].observed_length, 3);
        assert!(cohort.records[0].event);
        assert!(!cohort.records[1].event);
        assert_eq!(cohort.records[0].treatment, vec![0, 0, 1]);
    }

    #[test]
    fn gap_in_time_steps_names_the_id() {
        let f = write_temp(
            "id,time_step,x1,treatment,event\n\
             a,1,0.1,0,0\n\
             a,2,0.2,0,0\n\
             a,4,0.3,0,1\n",
        );
        let err = load_longitudinal_csv(f.path(), None).unwrap_err();
        match err {
            Error::Integrity { id, .. } => assert_eq!(id, "a"),
            other => panic!("expected integrity error, got {other}"),
        }
    }

    #[test]
    fn header_only_file_yields_empty_cohort() {
        let f = write_temp("id,time_step,x1,treatment,event\n");
        let cohort = load_longitudinal_csv(f.path(), None).unwrap();
        assert!(cohort.is_empty());
    }

    #[test]
    fn missing_column_is_a_schema_error() {
        let f = write_temp("id,x1,treatment,event\na,0.1,0,0\n");
        match load_longitudinal_csv(f.path(), None).unwrap_err() {
            Error::MissingColumn(c) => assert_eq!(c, "time_step"),
            other => panic!("expected missing column, got {other}"),
        }
    }

    #[test]
    fn non_numeric_cell_reports_row_and_column() {
        let f = write_temp("id,time_step,x1,treatment,event\na,1,oops,0,0\n");
        match load_longitudinal_csv(f.path(), None).unwrap_err() {
            Error::Parse { row, column, .. } => {
                assert_eq!(row, 2);
                assert_eq!(column, "x1");
            }
            other => panic!("expected parse error, got {other}"),
        }
    }

    #[test]
    fn csv_round_trips_through_writer() {
        let f = write_temp(
            "id,time_step,x1,treatment,event\n\
             a,1,0.5,0,0\n\
             a,2,1.5,1,1\n",
        );
        let cohort = load_longitudinal_csv(f.path(), None).unwrap();
        let mut buf = Vec::new();
        write_longitudinal_csv(&cohort, &mut buf).unwrap();
        let g = write_temp(std::str::from_utf8(&buf).unwrap());
        let again = load_longitudinal_csv(g.path(), None).unwrap();
        assert_eq!(cohort.records, again.records);
    }

    #[test]
    fn single_window_collapses_everyone() {
        let times: Vec<f64> = (1..=100).map(|t| t as f64).collect();
        let events = vec![true; 100];
        let covs = vec![vec![0.0]; 100];
        let cohort = discretize_static(&times, &events, &covs, 100, vec!["x".into()]).unwrap();
        assert_eq!(cohort.grid.horizon(), 1);
        assert!(cohort.records.iter().all(|r| r.observed_length == 1));
    }

    #[test]
    fn rank_ceil_rule_hand_case() {
        // 7 unique times, window 2, event at the 5th-ranked time -> interval 3
        let times = vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0];
        let events = vec![false, false, false, false, true, false, false];
        let covs = vec![vec![0.0]; 7];
        let cohort = discretize_static(&times, &events, &covs, 2, vec!["x".into()]).unwrap();
        assert_eq!(cohort.grid.horizon(), 3);
        let rec = &cohort.records[4];
        assert_eq!(rec.observed_length, 3);
        assert!(rec.event);
    }

    #[test]
    fn partial_window_is_administratively_censored() {
        // 5 unique times, window 2 -> horizon 2; the 5th-ranked time spills over
        let times = vec![1.0, 2.0, 3.0, 4.0, 5.0];
        let events = vec![true; 5];
        let covs = vec![vec![0.0]; 5];
        let cohort = discretize_static(&times, &events, &covs, 2, vec!["x".into()]).unwrap();
        assert_eq!(cohort.grid.horizon(), 2);
        let spilled = &cohort.records[4];
        assert_eq!(spilled.observed_length, 2);
        assert!(!spilled.event);
    }

    #[test]
    fn window_larger_than_unique_times_is_rejected() {
        let times = vec![1.0, 2.0];
        let events = vec![true, true];
        let covs = vec![vec![0.0]; 2];
        assert!(discretize_static(&times, &events, &covs, 3, vec!["x".into()]).is_err());
    }

    #[test]
    fn discretization_is_monotone_in_raw_time() {
        let times: Vec<f64> = (1..=37).map(|t| (t * t) as f64).collect();
        let events = vec![true; 37];
        let covs = vec![vec![0.0]; 37];
        let cohort = discretize_static(&times, &events, &covs, 5, vec!["x".into()]).unwrap();
        let mut prev = 0usize;
        for rec in &cohort.records {
            assert!(rec.observed_length >= prev);
            prev = rec.observed_length;
        }
    }

    fn toy_cohort(n: usize, horizon: usize) -> Cohort {
        let grid = TimeGrid::with_horizon(horizon).unwrap();
        let records = (0..n)
            .map(|i| {
                let len = i % horizon + 1;
                LongitudinalRecord::new(
                    format!("r{i}"),
                    vec![vec![i as f64, 1.0]; len],
                    vec![0; len],
                    i % 3 == 0,
                )
                .unwrap()
            })
            .collect();
        Cohort::new(grid, records, vec!["x1".into(), "x2".into()]).unwrap()
    }

    #[test]
    fn truncate_censors_events_past_the_cut() {
        let grid = TimeGrid::with_horizon(30).unwrap();
        let long = LongitudinalRecord::new("a", vec![vec![0.0]; 25], vec![0; 25], true).unwrap();
        let short = LongitudinalRecord::new("b", vec![vec![0.0]; 5], vec![0; 5], true).unwrap();
        let cohort = Cohort::new(grid, vec![long, short], vec!["x".into()]).unwrap();
        let cut = truncate_horizon(&cohort, 20).unwrap();
        assert_eq!(cut.grid.horizon(), 20);
        assert_eq!(cut.records[0].observed_length, 20);
        assert!(!cut.records[0].event);
        assert_eq!(cut.records[1].observed_length, 5);
        assert!(cut.records[1].event);
    }

    #[test]
    fn truncate_empty_cohort_keeps_horizon() {
        let grid = TimeGrid::with_horizon(30).unwrap();
        let cohort = Cohort::new(grid, vec![], vec!["x".into()]).unwrap();
        let cut = truncate_horizon(&cohort, 20).unwrap();
        assert!(cut.is_empty());
        assert_eq!(cut.grid.horizon(), 20);
    }

    #[test]
    fn split_sizes_match_paper_fractions() {
        let cohort = toy_cohort(10, 4);
        let spec = SplitSpec::new(0.7, 0.1, 0.2, 11).unwrap();
        let (tr, va, te) = split_cohort(&cohort, &spec).unwrap();
        assert_eq!((tr.len(), va.len(), te.len()), (7, 1, 2));
    }

    #[test]
    fn split_is_deterministic() {
        let cohort = toy_cohort(23, 5);
        let spec = SplitSpec::new(0.7, 0.1, 0.2, 99).unwrap();
        let (a1, b1, c1) = split_cohort(&cohort, &spec).unwrap();
        let (a2, b2, c2) = split_cohort(&cohort, &spec).unwrap();
        assert_eq!(a1.records, a2.records);
        assert_eq!(b1.records, b2.records);
        assert_eq!(c1.records, c2.records);
    }

    #[test]
    fn tiny_split_rounds_within_one() {
        let cohort = toy_cohort(3, 2);
        let spec = SplitSpec::new(0.7, 0.1, 0.2, 5).unwrap();
        let (tr, va, te) = split_cohort(&cohort, &spec).unwrap();
        assert_eq!(tr.len() + va.len() + te.len(), 3);
        assert!((tr.len() as f64 - 2.1).abs() <= 1.0);
        assert!((va.len() as f64 - 0.3).abs() <= 1.0);
        assert!((te.len() as f64 - 0.6).abs() <= 1.0);
    }

    #[test]
    fn scaler_hand_arithmetic() {
        let grid = TimeGrid::with_horizon(1).unwrap();
        let records = vec![
            LongitudinalRecord::new("a", vec![vec![1.0, 7.0]], vec![0], false).unwrap(),
            LongitudinalRecord::new("b", vec![vec![3.0, 7.0]], vec![0], false).unwrap(),
        ];
        let cohort = Cohort::new(grid, records, vec!["x".into(), "k".into()]).unwrap();
        let scaler = fit_scaler(&cohort).unwrap();
        assert_eq!(scaler.means, vec![2.0, 7.0]);
        assert_eq!(scaler.scales, vec![1.0, 1.0]); // population sd 1; constant column -> 1
        let scaled = apply_scaler(&scaler, &cohort).unwrap();
        assert_eq!(scaled.records[0].covariates[0], vec![-1.0, 0.0]);
        assert_eq!(scaled.records[1].covariates[0], vec![1.0, 0.0]);
    }

    #[test]
    fn scaler_rejects_empty_cohort() {
        let grid = TimeGrid::with_horizon(1).unwrap();
        let cohort = Cohort::new(grid, vec![], vec!["x".into()]).unwrap();
        assert!(fit_scaler(&cohort).is_err());
    }

    #[test]
    fn scaler_normalizes_train_exactly() {
        let cohort = toy_cohort(17, 6);
        let scaler = fit_scaler(&cohort).unwrap();
        let scaled = apply_scaler(&scaler, &cohort).unwrap();
        let refit = fit_scaler(&scaled).unwrap();
        assert!(refit.means[0].abs() < 1e-9);
        assert!((refit.scales[0] - 1.0).abs() < 1e-9);
    }

    mod split_properties {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn split_is_a_partition(n in 3usize..80, seed in any::<u64>()) {
                let cohort = toy_cohort(n, 4);
                let spec = SplitSpec::new(0.7, 0.1, 0.2, seed).unwrap();
                let (tr, va, te) = split_cohort(&cohort, &spec).unwrap();
                let mut ids: Vec<&str> = tr
                    .records
                    .iter()
                    .chain(&va.records)
                    .chain(&te.records)
                    .map(|r| r.id.as_str())
                    .collect();
                prop_assert_eq!(ids.len(), n);
                ids.sort_unstable();
                ids.dedup();
                prop_assert_eq!(ids.len(), n);
            }
        }
    }
}
