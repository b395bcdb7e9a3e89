//! File formats: CSV for records, normalized samples, estimates and scans
//! (with `#` comment headers), JSON for calibration models.
//!
//! Floats are written in Rust's shortest round-trip decimal form, so
//! re-running the same command reproduces files byte for byte.

use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::calibration::{CalibrationModel, RawRecord};
use crate::error::{AqqpError, Result};
use crate::estimator::{AqqpEstimate, DatasetMeta, QuadratureDataset, SignificanceScan};
use crate::num::Real;

fn io_err(path: &Path, source: std::io::Error) -> AqqpError {
    AqqpError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn parse_err(path: &Path, message: impl Into<String>) -> AqqpError {
    AqqpError::Parse {
        path: path.display().to_string(),
        message: message.into(),
    }
}

fn fmt<R: Real>(v: R) -> String {
    format!("{}", v.to_f64_lossy())
}

fn parse_field<R: Real>(path: &Path, line_no: usize, s: &str) -> Result<R> {
    s.trim()
        .parse::<f64>()
        .map(R::c)
        .map_err(|_| parse_err(path, format!("line {line_no}: bad number {s:?}")))
}

/// SHA-256 hex digest of a canonical `key=value` listing; embedded in output
/// headers so files can be traced back to the exact settings that made them.
pub fn settings_hash(parts: &[(&str, String)]) -> String {
    let mut canon = String::new();
    for (k, v) in parts {
        let _ = writeln!(canon, "{k}={v}");
    }
    let digest = Sha256::digest(canon.as_bytes());
    let mut hex = String::with_capacity(64);
    for b in digest {
        let _ = write!(hex, "{b:02x}");
    }
    hex
}

/// Writes raw records as `cycle_id,n_atoms,phi1,phi2` CSV.
pub fn write_records<R: Real>(
    path: &Path,
    records: &[RawRecord<R>],
    comments: &[String],
) -> Result<()> {
    let mut out = BufWriter::new(File::create(path).map_err(|e| io_err(path, e))?);
    let mut w = || -> std::io::Result<()> {
        for c in comments {
            writeln!(out, "# {c}")?;
        }
        writeln!(out, "cycle_id,n_atoms,phi1,phi2")?;
        for r in records {
            writeln!(
                out,
                "{},{},{},{}",
                r.cycle_id,
                r.n_atoms,
                fmt(r.phi1),
                fmt(r.phi2)
            )?;
        }
        out.flush()
    };
    w().map_err(|e| io_err(path, e))
}

/// Reads a records CSV written by [`write_records`].
pub fn read_records<R: Real>(path: &Path) -> Result<Vec<RawRecord<R>>> {
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    let mut records = Vec::new();
    let mut saw_header = false;
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| io_err(path, e))?;
        let line_no = idx + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        if !saw_header {
            if trimmed != "cycle_id,n_atoms,phi1,phi2" {
                return Err(parse_err(
                    path,
                    format!("line {line_no}: expected header cycle_id,n_atoms,phi1,phi2"),
                ));
            }
            saw_header = true;
            continue;
        }
        let fields: Vec<&str> = trimmed.split(',').collect();
        if fields.len() != 4 {
            return Err(parse_err(path, format!("line {line_no}: expected 4 fields")));
        }
        records.push(RawRecord {
            cycle_id: fields[0]
                .trim()
                .parse()
                .map_err(|_| parse_err(path, format!("line {line_no}: bad cycle_id")))?,
            n_atoms: fields[1]
                .trim()
                .parse()
                .map_err(|_| parse_err(path, format!("line {line_no}: bad n_atoms")))?,
            phi1: parse_field(path, line_no, fields[2])?,
            phi2: parse_field(path, line_no, fields[3])?,
        });
    }
    if !saw_header {
        return Err(parse_err(path, "missing header"));
    }
    Ok(records)
}

/// f64 on-disk form of a calibration model.
#[derive(Debug, Serialize, Deserialize)]
pub struct CalibrationFile {
    pub a0: f64,
    pub a1: f64,
    pub a2: f64,
    pub zeta: f64,
    pub epsilon: f64,
    pub n1_photons: f64,
    pub photon_ratio: f64,
    pub eta: f64,
    pub fit_covariance: [[f64; 3]; 3],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub settings_hash: Option<String>,
}

/// Serializes a calibration model to pretty JSON.
pub fn write_calibration<R: Real>(
    path: &Path,
    model: &CalibrationModel<R>,
    settings_hash: Option<String>,
) -> Result<()> {
    let mut cov = [[0.0f64; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            cov[i][j] = model.fit_covariance[i][j].to_f64_lossy();
        }
    }
    let file = CalibrationFile {
        a0: model.a0.to_f64_lossy(),
        a1: model.a1.to_f64_lossy(),
        a2: model.a2.to_f64_lossy(),
        zeta: model.zeta.to_f64_lossy(),
        epsilon: model.epsilon.to_f64_lossy(),
        n1_photons: model.n1_photons.to_f64_lossy(),
        photon_ratio: model.photon_ratio.to_f64_lossy(),
        eta: model.eta.to_f64_lossy(),
        fit_covariance: cov,
        settings_hash,
    };
    let text = serde_json::to_string_pretty(&file)
        .map_err(|e| parse_err(path, e.to_string()))?;
    std::fs::write(path, text + "\n").map_err(|e| io_err(path, e))
}

/// Reads a calibration JSON and rebuilds the model (re-deriving `eta`).
pub fn read_calibration<R: Real>(path: &Path) -> Result<CalibrationModel<R>> {
    let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let file: CalibrationFile =
        serde_json::from_str(&text).map_err(|e| parse_err(path, e.to_string()))?;
    let mut cov = [[R::zero(); 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            cov[i][j] = R::c(file.fit_covariance[i][j]);
        }
    }
    let model = CalibrationModel::new(
        [R::c(file.a0), R::c(file.a1), R::c(file.a2)],
        cov,
        R::c(file.zeta),
        R::c(file.epsilon),
        R::c(file.n1_photons),
        R::c(file.photon_ratio),
    )?;
    if (model.eta.to_f64_lossy() - file.eta).abs() > 1e-9 {
        return Err(parse_err(
            path,
            format!(
                "stored eta {} disagrees with exp(-n1 epsilon) = {}",
                file.eta,
                model.eta.to_f64_lossy()
            ),
        ));
    }
    Ok(model)
}

/// Writes normalized samples as a `jbar` CSV; metadata rides along in a
/// `# meta: {...}` comment line.
pub fn write_dataset<R: Real>(
    path: &Path,
    data: &QuadratureDataset<R>,
    comments: &[String],
) -> Result<()> {
    let meta_json =
        serde_json::to_string(data.meta()).map_err(|e| parse_err(path, e.to_string()))?;
    let mut out = BufWriter::new(File::create(path).map_err(|e| io_err(path, e))?);
    let mut w = || -> std::io::Result<()> {
        for c in comments {
            writeln!(out, "# {c}")?;
        }
        writeln!(out, "# meta: {meta_json}")?;
        writeln!(out, "jbar")?;
        for &s in data.samples() {
            writeln!(out, "{}", fmt(s))?;
        }
        out.flush()
    };
    w().map_err(|e| io_err(path, e))
}

/// Reads a `jbar` CSV written by [`write_dataset`] (or any one-column file
/// with that header).
pub fn read_dataset<R: Real>(path: &Path) -> Result<QuadratureDataset<R>> {
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    let mut samples = Vec::new();
    let mut meta = DatasetMeta::default();
    let mut saw_header = false;
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| io_err(path, e))?;
        let line_no = idx + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        if let Some(rest) = trimmed.strip_prefix('#') {
            if let Some(json) = rest.trim().strip_prefix("meta:") {
                meta = serde_json::from_str(json.trim())
                    .map_err(|e| parse_err(path, format!("line {line_no}: bad meta: {e}")))?;
            }
            continue;
        }
        if !saw_header {
            if trimmed != "jbar" {
                return Err(parse_err(
                    path,
                    format!("line {line_no}: expected header jbar"),
                ));
            }
            saw_header = true;
            continue;
        }
        samples.push(parse_field(path, line_no, trimmed)?);
    }
    if !saw_header {
        return Err(parse_err(path, "missing jbar header"));
    }
    QuadratureDataset::new(samples, None, meta)
}

/// Writes an estimate as `j_phi,p,se` CSV with summary comment lines.
pub fn write_estimate<R: Real>(
    path: &Path,
    est: &AqqpEstimate<R>,
    comments: &[String],
) -> Result<()> {
    let mut out = BufWriter::new(File::create(path).map_err(|e| io_err(path, e))?);
    let mut w = || -> std::io::Result<()> {
        for c in comments {
            writeln!(out, "# {c}")?;
        }
        writeln!(out, "# width = {}", fmt(est.width))?;
        writeln!(out, "# n_samples = {}", est.n_samples)?;
        writeln!(out, "j_phi,p,se")?;
        for i in 0..est.phi_grid.len() {
            writeln!(
                out,
                "{},{},{}",
                fmt(est.phi_grid[i]),
                fmt(est.p[i]),
                fmt(est.se[i])
            )?;
        }
        out.flush()
    };
    w().map_err(|e| io_err(path, e))
}

/// Writes a width scan as `w,sigma,at_phi` CSV.
pub fn write_scan<R: Real>(
    path: &Path,
    scan: &SignificanceScan<R>,
    comments: &[String],
) -> Result<()> {
    let mut out = BufWriter::new(File::create(path).map_err(|e| io_err(path, e))?);
    let mut w = || -> std::io::Result<()> {
        for c in comments {
            writeln!(out, "# {c}")?;
        }
        writeln!(out, "w,sigma,at_phi")?;
        for i in 0..scan.widths.len() {
            writeln!(
                out,
                "{},{},{}",
                fmt(scan.widths[i]),
                fmt(scan.sigma[i]),
                fmt(scan.argmin_phi[i])
            )?;
        }
        out.flush()
    };
    w().map_err(|e| io_err(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::tempdir;

    #[test]
    fn records_round_trip_bitwise() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("records.csv");
        let records: Vec<RawRecord<f64>> = (0..50)
            .map(|i| RawRecord {
                cycle_id: i,
                n_atoms: 290_000,
                phi1: (i as f64 * 0.123).sin() * 1e-3,
                phi2: (i as f64 * 0.456).cos() * 1e-3,
            })
            .collect();
        write_records(&path, &records, &["settings_hash = abc".into()]).unwrap();
        let back: Vec<RawRecord<f64>> = read_records(&path).unwrap();
        assert_eq!(records.len(), back.len());
        for (a, b) in records.iter().zip(&back) {
            assert_eq!(a.cycle_id, b.cycle_id);
            assert_eq!(a.phi1.to_bits(), b.phi1.to_bits());
            assert_eq!(a.phi2.to_bits(), b.phi2.to_bits());
        }
    }

    #[test]
    fn calibration_round_trip() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("cal.json");
        let model: CalibrationModel<f64> = CalibrationModel::new(
            [1.5e-7, 1e-11, 2e-19],
            [[1e-20; 3]; 3],
            0.61,
            1.02e-8,
            4.1e7,
            1.5,
        )
        .unwrap();
        write_calibration(&path, &model, Some("abc".into())).unwrap();
        let back: CalibrationModel<f64> = read_calibration(&path).unwrap();
        assert_eq!(model.a0.to_bits(), back.a0.to_bits());
        assert_eq!(model.zeta.to_bits(), back.zeta.to_bits());
        assert_eq!(model.eta.to_bits(), back.eta.to_bits());
    }

    #[test]
    fn corrupt_calibration_eta_rejected() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("cal.json");
        let text = r#"{"a0":1.5e-7,"a1":1e-11,"a2":0.0,"zeta":0.6,"epsilon":1.02e-8,
            "n1_photons":4.1e7,"photon_ratio":1.5,"eta":0.9,
            "fit_covariance":[[0,0,0],[0,0,0],[0,0,0]]}"#;
        std::fs::write(&path, text).unwrap();
        assert!(matches!(
            read_calibration::<f64>(&path),
            Err(AqqpError::Parse { .. })
        ));
    }

    #[test]
    fn dataset_round_trip_keeps_meta() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("data.csv");
        let data: QuadratureDataset<f64> = QuadratureDataset::new(
            vec![0.25, -1.5, 3.0e-7],
            None,
            DatasetMeta {
                source: Some("test".into()),
                calibration_id: None,
                efficiency: Some(0.83),
                n_atoms: Some(290_000),
            },
        )
        .unwrap();
        write_dataset(&path, &data, &[]).unwrap();
        let back: QuadratureDataset<f64> = read_dataset(&path).unwrap();
        assert_eq!(data.samples().len(), back.samples().len());
        for (a, b) in data.samples().iter().zip(back.samples()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        assert_eq!(back.meta().efficiency, Some(0.83));
        assert_eq!(back.meta().n_atoms, Some(290_000));
    }

    #[test]
    fn rewriting_is_byte_identical() {
        let dir = tempdir().unwrap();
        let a = dir.path().join("a.csv");
        let b = dir.path().join("b.csv");
        let data = QuadratureDataset::new(
            (0..100).map(|i| (i as f64 * 0.77).sin()).collect(),
            None,
            DatasetMeta::default(),
        )
        .unwrap();
        write_dataset(&a, &data, &["run".into()]).unwrap();
        write_dataset(&b, &data, &["run".into()]).unwrap();
        assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    }

    #[test]
    fn malformed_inputs_are_parse_errors() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        std::fs::write(&path, "cycle_id,n_atoms,phi1,phi2\n1,2,notanumber,0\n").unwrap();
        assert!(matches!(
            read_records::<f64>(&path),
            Err(AqqpError::Parse { .. })
        ));
        std::fs::write(&path, "wrong,header\n").unwrap();
        assert!(read_records::<f64>(&path).is_err());
        assert!(read_dataset::<f64>(&path).is_err());
        assert!(matches!(
            read_records::<f64>(&dir.path().join("missing.csv")),
            Err(AqqpError::Io { .. })
        ));
    }

    #[test]
    fn settings_hash_is_stable_and_order_sensitive() {
        let h1 = settings_hash(&[("w", "1.1".into()), ("seed", "7".into())]);
        let h2 = settings_hash(&[("w", "1.1".into()), ("seed", "7".into())]);
        let h3 = settings_hash(&[("seed", "7".into()), ("w", "1.1".into())]);
        assert_eq!(h1, h2);
        assert_ne!(h1, h3);
        assert_eq!(h1.len(), 64);
    }
}
