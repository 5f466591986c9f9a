//! Temporal aggregation schemes.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SchemeKind {
    Stock,
    Flow,
    Average,
    Weighted,
    Custom,
}

impl SchemeKind {
    pub fn name(self) -> &'static str {
        match self {
            SchemeKind::Stock => "stock",
            SchemeKind::Flow => "flow",
            SchemeKind::Average => "average",
            SchemeKind::Weighted => "weighted",
            SchemeKind::Custom => "custom",
        }
    }
}

/// Aggregation period K with weight vector `w = (w_1, ..., w_K)`.
///
/// The aggregate of block `m` is `y_m = Σ_i w_i x_{(m-1)K+i}`, so `w_K`
/// weighs the last observation of the block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregationScheme {
    weights: Vec<f64>,
    kstar: usize,
    kind: SchemeKind,
}

fn is_stock(w: &[f64]) -> bool {
    let k = w.len();
    w[..k - 1].iter().all(|&v| v == 0.0) && w[k - 1] == 1.0
}

fn is_flow(w: &[f64]) -> bool {
    w.iter().all(|&v| v == 1.0)
}

impl AggregationScheme {
    /// Builds a scheme of the given kind, checking that `weights` fit it.
    pub fn new(weights: Vec<f64>, kind: SchemeKind) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::InvalidInput("aggregation period must be at least 1".into()));
        }
        if weights.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite aggregation weight".into()));
        }
        let kstar = weights
            .iter()
            .position(|&v| v != 0.0)
            .ok_or_else(|| Error::InvalidInput("aggregation weights are all zero".into()))?
            + 1;
        let k = weights.len();
        let consistent = match kind {
            SchemeKind::Stock => is_stock(&weights),
            SchemeKind::Flow => is_flow(&weights),
            SchemeKind::Average => weights.iter().all(|&v| (v - 1.0 / k as f64).abs() < 1e-15),
            SchemeKind::Weighted => (weights.iter().sum::<f64>() - 1.0).abs() < 1e-12,
            SchemeKind::Custom => k == 1 || !(is_stock(&weights) || is_flow(&weights)),
        };
        if !consistent {
            return Err(Error::InvalidInput(format!(
                "weights {weights:?} do not match scheme kind {}",
                kind.name()
            )));
        }
        Ok(Self {
            weights,
            kstar,
            kind,
        })
    }

    /// Classifies arbitrary weights; stock and flow patterns get their tag.
    pub fn from_weights(weights: Vec<f64>) -> Result<Self> {
        let kind = if !weights.is_empty() && is_stock(&weights) {
            SchemeKind::Stock
        } else if !weights.is_empty() && is_flow(&weights) {
            SchemeKind::Flow
        } else {
            SchemeKind::Custom
        };
        Self::new(weights, kind)
    }

    pub fn stock(k: usize) -> Result<Self> {
        let mut w = vec![0.0; k];
        if let Some(last) = w.last_mut() {
            *last = 1.0;
        }
        Self::new(w, SchemeKind::Stock)
    }

    pub fn flow(k: usize) -> Result<Self> {
        Self::new(vec![1.0; k], SchemeKind::Flow)
    }

    pub fn average(k: usize) -> Result<Self> {
        Self::new(vec![1.0 / k.max(1) as f64; k], SchemeKind::Average)
    }

    /// Weighted average; the weights must sum to one.
    pub fn weighted(weights: Vec<f64>) -> Result<Self> {
        Self::new(weights, SchemeKind::Weighted)
    }

    /// Same kind with another period; only stock, flow and average.
    pub fn with_period(kind: SchemeKind, k: usize) -> Result<Self> {
        match kind {
            SchemeKind::Stock => Self::stock(k),
            SchemeKind::Flow => Self::flow(k),
            SchemeKind::Average => Self::average(k),
            other => Err(Error::Unsupported(format!(
                "scheme kind {} has no canonical period-{k} form",
                other.name()
            ))),
        }
    }

    pub fn k(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Weight `w_i` with 1-based index.
    pub fn w(&self, i: usize) -> f64 {
        self.weights[i - 1]
    }

    /// 1-based index of the first nonzero weight.
    pub fn kstar(&self) -> usize {
        self.kstar
    }

    pub fn kind(&self) -> SchemeKind {
        self.kind
    }

    /// Coefficients of `W̃(z) = Σ_{m=0}^{K-1} w_{K-m} z^m`.
    pub fn wtilde(&self) -> Vec<f64> {
        self.weights.iter().rev().copied().collect()
    }

    pub fn describe(&self) -> String {
        format!("{}(K={})", self.kind.name(), self.k())
    }
}

/// Temporal aggregation `y_m = Σ_i w_i x_{(m-1)K+i}`; a trailing partial
/// block is dropped.
pub fn aggregate_series(sample: &[f64], scheme: &AggregationScheme) -> Result<Vec<f64>> {
    let k = scheme.k();
    if sample.len() < k {
        return Err(Error::InvalidInput(format!(
            "series of length {} shorter than aggregation period {k}",
            sample.len()
        )));
    }
    Ok(sample
        .chunks_exact(k)
        .map(|block| block.iter().zip(scheme.weights()).map(|(x, w)| x * w).sum())
        .collect())
}
