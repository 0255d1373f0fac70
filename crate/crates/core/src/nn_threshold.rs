//! Nearest-neighbor classifier with a confidence threshold.
//!
//! A query takes the label of its nearest stored sample (Euclidean, ties
//! to the lowest stored index) only if that sample lies within distance
//! `d`; otherwise the answer is [`Prediction::Unknown`], which every error
//! rate in this crate counts as wrong.

use crate::data::Dataset;
use crate::error::{check_dim, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Prediction {
    Label(usize),
    Unknown,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NnClassifier {
    train: Dataset,
    threshold: f64,
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Index and distance of the nearest sample in `data` (lowest index on ties).
fn nearest(data: &Dataset, x: &[f64]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (i, f) in data.features.iter().enumerate() {
        let d = distance(f, x);
        if d < best.1 {
            best = (i, d);
        }
    }
    best
}

impl NnClassifier {
    pub fn new(train: Dataset, threshold: f64) -> Result<Self> {
        if train.is_empty() {
            return Err(Error::InvalidArgument("empty training set".into()));
        }
        if threshold.is_nan() || threshold < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "threshold {threshold} must be non-negative"
            )));
        }
        Ok(Self { train, threshold })
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn predict(&self, x: &[f64]) -> Result<Prediction> {
        check_dim("nn query", self.train.dim(), x.len())?;
        let (i, d) = nearest(&self.train, x);
        Ok(if d <= self.threshold {
            Prediction::Label(self.train.labels[i])
        } else {
            Prediction::Unknown
        })
    }

    pub fn error_rate(&self, data: &Dataset) -> Result<f64> {
        if data.is_empty() {
            return Ok(0.0);
        }
        let mut wrong = 0usize;
        for (x, &l) in data.features.iter().zip(&data.labels) {
            if self.predict(x)? != Prediction::Label(l) {
                wrong += 1;
            }
        }
        Ok(wrong as f64 / data.len() as f64)
    }
}

/// `(d - sigma, d, d + sigma)` where `d` is the mean distance from each
/// validation sample to its nearest training sample and `sigma` the
/// population standard deviation of those distances. Negative points are
/// clamped to 0.
pub fn estimate_threshold_grid(train: &Dataset, validation: &Dataset) -> Result<[f64; 3]> {
    if train.is_empty() || validation.is_empty() {
        return Err(Error::InvalidArgument(
            "threshold estimation needs non-empty T and V".into(),
        ));
    }
    check_dim("threshold estimation", train.dim(), validation.dim())?;
    let dists: Vec<f64> = validation
        .features
        .iter()
        .map(|v| nearest(train, v).1)
        .collect();
    let n = dists.len() as f64;
    let mean = dists.iter().sum::<f64>() / n;
    let var = dists.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / n;
    let sd = var.sqrt();
    Ok([(mean - sd).max(0.0), mean, mean + sd])
}
