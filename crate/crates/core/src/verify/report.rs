use std::collections::BTreeMap;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::Error;

/// Counts of discarded samples keyed by reason code.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Rejections(pub BTreeMap<String, u64>);

impl Rejections {
    pub fn record(&mut self, err: &Error) {
        *self.0.entry(reason_code(err)).or_insert(0) += 1;
    }

    pub fn merge(&mut self, other: &Rejections) {
        for (k, v) in &other.0 {
            *self.0.entry(k.clone()).or_insert(0) += v;
        }
    }

    pub fn total(&self) -> u64 {
        self.0.values().sum()
    }
}

/// Short code for an error: the degeneracy reason when there is one,
/// otherwise the error kind.
pub fn reason_code(err: &Error) -> String {
    match err {
        Error::DegenerateSample(r) => r.as_str().to_string(),
        Error::Shape(_) => "Shape".into(),
        Error::Singularity { .. } => "Singularity".into(),
        Error::DegenerateSpectrum { .. } => "DegenerateSpectrum".into(),
        Error::NotHermitian(_) => "NotHermitian".into(),
        Error::NotAntiHermitian(_) => "NotAntiHermitian".into(),
        Error::NotUnitary(_) => "NotUnitary".into(),
        Error::Pole { .. } => "Pole".into(),
        Error::Reconstruction(_) => "Reconstruction".into(),
        Error::Domain(_) => "Domain".into(),
        Error::ChainStuck(_) => "ChainStuck".into(),
        Error::InvalidArgument(_) => "InvalidArgument".into(),
    }
}

/// One named comparison inside a report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub observed: f64,
    pub expected: f64,
    pub std_error: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub z: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p_value: Option<f64>,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McReport {
    pub name: String,
    pub estimate: f64,
    pub std_error: f64,
    /// Samples that produced a value.
    pub n_samples: u64,
    pub n_rejected: u64,
    pub rejections: Rejections,
    pub effective_sample_size: f64,
    pub seed: u64,
    pub chunk_size: usize,
    pub wall_time: f64,
    pub insufficient_samples: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub checks: Vec<Check>,
    #[serde(default, skip_serializing_if = "serde_json::Map::is_empty")]
    pub details: serde_json::Map<String, serde_json::Value>,
    pub passed: bool,
}

impl McReport {
    pub fn attempted(&self) -> u64 {
        self.n_samples + self.n_rejected
    }
}

pub(crate) struct Timer(Instant);

impl Timer {
    pub fn start() -> Self {
        Timer(Instant::now())
    }

    pub fn seconds(&self) -> f64 {
        self.0.elapsed().as_secs_f64()
    }
}

/// Mean and standard error of the mean.
pub fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, f64::INFINITY);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

/// Batch-means estimate of the mean and its standard error for a
/// correlated series.
pub fn batch_means(xs: &[f64], batches: usize) -> (f64, f64) {
    let b = batches.max(2).min(xs.len().max(1));
    let len = xs.len() / b;
    if len == 0 {
        return mean_and_se(xs);
    }
    let means: Vec<f64> = (0..b).map(|i| xs[i * len..(i + 1) * len].iter().sum::<f64>() / len as f64).collect();
    mean_and_se(&means)
}
