//! Serializable run, training and benchmark reports.
//!
//! Field order in the structs is the key order in the emitted JSON.

use std::collections::BTreeMap;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pipeline::RunConfig;

pub const REPORT_SCHEMA_VERSION: &str = "1.0.0";

/// JSON Schema (draft 07) for [`RunReport`].
pub const RUN_REPORT_SCHEMA: &str = include_str!("../schema/run_report.schema.json");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointPrediction {
    pub point: Vec<f64>,
    pub classical_score: f64,
    pub classical_label: i8,
    pub quantum_label: i8,
    /// Swap-test statistic; ½(1 − overlap) in analytic mode.
    pub p_estimate: f64,
    pub ambiguous: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelSlopes {
    pub k: f64,
    pub kk: f64,
    pub klk: f64,
}

/// SHA-256 of the normalized system matrix as handed to each path.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatrixChecksums {
    pub classical: String,
    pub quantum: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub schema_version: String,
    pub config: RunConfig,
    pub samples: usize,
    pub features: usize,
    pub labeled: usize,
    pub classical_alpha: Vec<f64>,
    /// Unit-norm real amplitudes of the simulated solution state.
    pub quantum_alpha: Vec<f64>,
    pub quantum_fidelity: f64,
    pub ky_fidelity: f64,
    pub prediction_agreement: f64,
    pub predictions: Vec<PointPrediction>,
    pub retained_eigenvalues: Vec<f64>,
    /// Frobenius distance between the normalized generator of the density
    /// mixture and the classical normalized system matrix.
    pub generator_deviation: f64,
    pub lmr_slopes: ChannelSlopes,
    pub lmr_steps: usize,
    pub lmr_trajectory_error: f64,
    pub multiply_success_probability: f64,
    pub hhl_success_probability: f64,
    pub a_hat_checksums: MatrixChecksums,
    /// Wall-clock seconds per stage, present only when requested.
    pub timings: Option<BTreeMap<String, f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainPrediction {
    pub point: Vec<f64>,
    pub score: f64,
    pub label: i8,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub schema_version: String,
    pub config: RunConfig,
    pub samples: usize,
    pub features: usize,
    pub labeled: usize,
    pub alpha: Vec<f64>,
    pub retained_eigenvalues: Vec<f64>,
    /// `‖Aα − Ky‖ / ‖Ky‖`.
    pub relative_residual: f64,
    pub objective: f64,
    pub predictions: Vec<TrainPrediction>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelBench {
    pub channel: String,
    pub dts: Vec<f64>,
    pub step_errors: Vec<f64>,
    pub slope: f64,
    pub steps: Vec<usize>,
    pub trajectory_errors: Vec<f64>,
    /// `error(n) / error(2n)` for consecutive step counts.
    pub halving_ratios: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub schema_version: String,
    pub config: RunConfig,
    pub total_time: f64,
    pub channels: Vec<ChannelBench>,
}

/// Pretty JSON with a trailing newline.
pub fn to_json<T: Serialize>(report: &T) -> Result<String> {
    let mut text = serde_json::to_string_pretty(report).map_err(|e| Error::Parameter(e.to_string()))?;
    text.push('\n');
    Ok(text)
}

pub fn emit_report<T: Serialize>(report: &T, path: &Path) -> Result<()> {
    std::fs::write(path, to_json(report)?).map_err(|e| Error::io(path, e))
}

pub fn read_report<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Parse {
        line: e.line(),
        message: e.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_report() -> RunReport {
        RunReport {
            schema_version: REPORT_SCHEMA_VERSION.into(),
            config: RunConfig::default(),
            samples: 2,
            features: 1,
            labeled: 1,
            classical_alpha: vec![0.5, -0.25],
            quantum_alpha: vec![0.8, -0.6],
            quantum_fidelity: 0.99,
            ky_fidelity: 1.0,
            prediction_agreement: 1.0,
            predictions: vec![PointPrediction {
                point: vec![1.0],
                classical_score: 0.3,
                classical_label: 1,
                quantum_label: 1,
                p_estimate: 0.2,
                ambiguous: false,
            }],
            retained_eigenvalues: vec![1.0],
            generator_deviation: 0.0,
            lmr_slopes: ChannelSlopes {
                k: 2.0,
                kk: 2.0,
                klk: 2.0,
            },
            lmr_steps: 1000,
            lmr_trajectory_error: 1e-4,
            multiply_success_probability: 0.1,
            hhl_success_probability: 0.2,
            a_hat_checksums: MatrixChecksums {
                classical: "ab".into(),
                quantum: "ab".into(),
            },
            timings: None,
        }
    }

    #[test]
    fn round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.json");
        let report = sample_report();
        emit_report(&report, &path).unwrap();
        let back: RunReport = read_report(&path).unwrap();
        assert_eq!(back, report);
    }

    #[test]
    fn key_order_follows_declaration() {
        let text = to_json(&sample_report()).unwrap();
        let pos = |k: &str| text.find(&format!("\"{k}\"")).unwrap();
        assert!(pos("schema_version") < pos("config"));
        assert!(pos("classical_alpha") < pos("quantum_fidelity"));
        assert!(pos("a_hat_checksums") < pos("timings"));
    }

    #[test]
    fn missing_directory_is_io_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("absent").join("r.json");
        match emit_report(&sample_report(), &path) {
            Err(Error::Io { path: p, .. }) => assert_eq!(p, path),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn schema_is_valid_json() {
        let schema: serde_json::Value = serde_json::from_str(RUN_REPORT_SCHEMA).unwrap();
        assert_eq!(schema["properties"]["schema_version"]["const"], REPORT_SCHEMA_VERSION);
    }
}
