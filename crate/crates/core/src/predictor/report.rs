//! Delimiter-separated export of predictions.

use super::Prediction;
use crate::error::Result;
use crate::sampler::Statistic;
use serde::Serialize;
use std::io::Write;

/// One exported line: a statistic of one prediction.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PredictionRow {
    pub algorithm: String,
    pub n: usize,
    pub b: usize,
    pub statistic: &'static str,
    pub runtime_s: f64,
    pub perf_flops_s: f64,
    /// Empty without a machine description.
    pub efficiency: Option<f64>,
}

impl PredictionRow {
    pub fn from_prediction(p: &Prediction) -> Vec<PredictionRow> {
        Statistic::ALL
            .iter()
            .map(|&s| PredictionRow {
                algorithm: p.algorithm.clone(),
                n: p.problem.n,
                b: p.block_size,
                statistic: s.name(),
                runtime_s: p.runtime.get(s),
                perf_flops_s: p.performance.get(s),
                efficiency: p.efficiency.map(|e| e.get(s)),
            })
            .collect()
    }
}

/// Writes a header and one row per (prediction, statistic).
pub fn export_predictions(out: impl Write, preds: &[Prediction], delimiter: u8) -> Result<()> {
    let mut w = csv::WriterBuilder::new().delimiter(delimiter).from_writer(out);
    for p in preds {
        for row in PredictionRow::from_prediction(p) {
            w.serialize(row)?;
        }
    }
    w.flush()?;
    Ok(())
}
