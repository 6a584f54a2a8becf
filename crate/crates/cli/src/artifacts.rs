//! Output artifacts: atomic file writes and the CSV schemas shared between
//! `predict`, `evaluate`, and `sweep-threshold`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use ttesurv::model::CurveEnsemble;
use ttesurv::predict::TtePrediction;
use ttesurv::survival::SurvivalCurve;
use ttesurv::{Error, Result};

/// Writes via a sibling temp file + rename so a crash never leaves a
/// partial artifact behind.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    std::fs::create_dir_all(dir)?;
    let file_name = path
        .file_name()
        .ok_or_else(|| Error::InvalidInput(format!("not a file path: {}", path.display())))?;
    let tmp: PathBuf = dir.join(format!(".tmp-{}", file_name.to_string_lossy()));
    std::fs::write(&tmp, contents)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

/// Per-record predictions: `id,t_hat,spread,method`.
pub fn render_predictions(ids: &[String], preds: &[TtePrediction]) -> String {
    let mut out = String::from("id,t_hat,spread,method\n");
    for (id, p) in ids.iter().zip(preds) {
        out.push_str(&format!("{id},{},{},{}\n", p.t_hat, p.spread, p.method));
    }
    out
}

/// Per-record curves: `id,t,S_mean,S_std`, one row per interval.
pub fn render_curves(ensembles: &[CurveEnsemble]) -> String {
    let mut out = String::from("id,t,S_mean,S_std\n");
    for ens in ensembles {
        for (t, (&m, &s)) in ens.mean.values().iter().zip(&ens.std).enumerate() {
            out.push_str(&format!("{},{},{m},{s}\n", ens.id, t + 1));
        }
    }
    out
}

/// Threshold sweep rows: `theta,mean_signed_error,mean_abs_error`.
pub fn render_sweep(rows: &[(f64, f64, f64)]) -> String {
    let mut out = String::from("theta,mean_signed_error,mean_abs_error\n");
    for &(theta, signed, abs) in rows {
        out.push_str(&format!("{theta},{signed},{abs}\n"));
    }
    out
}

#[derive(Debug, Clone)]
pub struct PredictionRow {
    pub t_hat: usize,
    pub spread: f64,
}

/// Reads a predictions CSV back, keyed by id.
pub fn read_predictions(path: &Path) -> Result<BTreeMap<String, PredictionRow>> {
    let mut reader = csv::Reader::from_path(path)?;
    let headers = reader.headers()?.clone();
    let col = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    };
    let (id_c, t_c, s_c) = (col("id")?, col("t_hat")?, col("spread")?);
    let mut out = BTreeMap::new();
    for (i, row) in reader.records().enumerate() {
        let row = row?;
        let parse_err = |column: &str, reason: String| Error::Parse {
            row: i + 2,
            column: column.to_string(),
            reason,
        };
        let t_hat: usize = row[t_c]
            .parse()
            .map_err(|e| parse_err("t_hat", format!("{e}")))?;
        let spread: f64 = row[s_c]
            .parse()
            .map_err(|e| parse_err("spread", format!("{e}")))?;
        out.insert(row[id_c].to_string(), PredictionRow { t_hat, spread });
    }
    Ok(out)
}

/// Reads a curves CSV back into per-id survival curves, validating that
/// every id covers intervals `1..=horizon` in order.
pub fn read_curves(path: &Path) -> Result<BTreeMap<String, SurvivalCurve>> {
    let mut reader = csv::Reader::from_path(path)?;
    let headers = reader.headers()?.clone();
    let col = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    };
    let (id_c, t_c, s_c) = (col("id")?, col("t")?, col("S_mean")?);

    let mut grouped: BTreeMap<String, Vec<(usize, f64)>> = BTreeMap::new();
    for (i, row) in reader.records().enumerate() {
        let row = row?;
        let parse_err = |column: &str, reason: String| Error::Parse {
            row: i + 2,
            column: column.to_string(),
            reason,
        };
        let t: usize = row[t_c].parse().map_err(|e| parse_err("t", format!("{e}")))?;
        let s: f64 = row[s_c]
            .parse()
            .map_err(|e| parse_err("S_mean", format!("{e}")))?;
        grouped.entry(row[id_c].to_string()).or_default().push((t, s));
    }

    let mut out = BTreeMap::new();
    for (id, rows) in grouped {
        for (k, &(t, _)) in rows.iter().enumerate() {
            if t != k + 1 {
                return Err(Error::Integrity {
                    id: id.clone(),
                    reason: format!("curve rows not contiguous at t = {t}"),
                });
            }
        }
        let values: Vec<f64> = rows.into_iter().map(|(_, s)| s).collect();
        out.insert(id, SurvivalCurve::new(values)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn atomic_write_leaves_no_temp_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.csv");
        write_atomic(&path, "hello").unwrap();
        assert_eq!(std::fs::read_to_string(&path).unwrap(), "hello");
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
    }

    #[test]
    fn curves_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("curves.csv");
        write_atomic(
            &path,
            "id,t,S_mean,S_std\na,1,0.9,0\na,2,0.5,0\nb,1,0.8,0\nb,2,0.7,0\n",
        )
        .unwrap();
        let curves = read_curves(&path).unwrap();
        assert_eq!(curves["a"].values(), &[0.9, 0.5]);
        assert_eq!(curves["b"].values(), &[0.8, 0.7]);
    }

    #[test]
    fn gapped_curve_rows_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("curves.csv");
        write_atomic(&path, "id,t,S_mean,S_std\na,1,0.9,0\na,3,0.5,0\n").unwrap();
        assert!(read_curves(&path).is_err());
    }
}
