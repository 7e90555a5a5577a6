//! Dataset-size weighted model averaging.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AggregationError {
    EmptyInput,
    /// `models` and `sizes` differ in length.
    CountMismatch {
        models: usize,
        sizes: usize,
    },
    DimensionMismatch {
        index: usize,
        expected: usize,
        found: usize,
    },
    ZeroSize {
        index: usize,
    },
}

impl fmt::Display for AggregationError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AggregationError::EmptyInput => f.write_str("empty-input: no models to aggregate"),
            AggregationError::CountMismatch { models, sizes } => {
                write!(f, "{models} models but {sizes} dataset sizes")
            }
            AggregationError::DimensionMismatch {
                index,
                expected,
                found,
            } => write!(
                f,
                "dimension-mismatch: model {index} has {found} parameters, expected {expected}"
            ),
            AggregationError::ZeroSize { index } => write!(f, "model {index} has dataset size 0"),
        }
    }
}

impl core::error::Error for AggregationError {}

/// Normalized weights `n_k / sum(n)`.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregationWeights {
    pub sizes: Vec<u64>,
    pub weights: Vec<f64>,
}

impl AggregationWeights {
    pub fn from_sizes(sizes: &[u64]) -> Result<Self, AggregationError> {
        if sizes.is_empty() {
            return Err(AggregationError::EmptyInput);
        }
        if let Some(index) = sizes.iter().position(|&n| n == 0) {
            return Err(AggregationError::ZeroSize { index });
        }
        let total: f64 = sizes.iter().map(|&n| n as f64).sum();
        Ok(AggregationWeights {
            sizes: sizes.to_vec(),
            weights: sizes.iter().map(|&n| n as f64 / total).collect(),
        })
    }

    pub fn sum(&self) -> f64 {
        self.weights.iter().sum()
    }
}

/// Component-wise `sum_k n_k w_k / sum(n)`.
///
/// The result is clamped into the per-component range of the inputs, which
/// the exact weighted mean never leaves.
pub fn fedavg<M: AsRef<[f64]>>(models: &[M], sizes: &[u64]) -> Result<Vec<f64>, AggregationError> {
    if models.is_empty() {
        return Err(AggregationError::EmptyInput);
    }
    if models.len() != sizes.len() {
        return Err(AggregationError::CountMismatch {
            models: models.len(),
            sizes: sizes.len(),
        });
    }
    let dim = models[0].as_ref().len();
    for (index, m) in models.iter().enumerate() {
        let found = m.as_ref().len();
        if found != dim {
            return Err(AggregationError::DimensionMismatch {
                index,
                expected: dim,
                found,
            });
        }
    }
    AggregationWeights::from_sizes(sizes)?;
    let total: f64 = sizes.iter().map(|&n| n as f64).sum();
    let mut out = vec![0.0; dim];
    for (m, &n) in models.iter().zip(sizes) {
        for (o, x) in out.iter_mut().zip(m.as_ref()) {
            *o += n as f64 * x;
        }
    }
    for (i, o) in out.iter_mut().enumerate() {
        *o /= total;
        let (lo, hi) = models
            .iter()
            .map(|m| m.as_ref()[i])
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| {
                (lo.min(x), hi.max(x))
            });
        *o = o.clamp(lo, hi);
    }
    Ok(out)
}
