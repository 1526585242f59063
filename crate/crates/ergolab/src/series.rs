//! Checkpointed Cesàro series: the common result shape for plain averages,
//! absolute-value averages, and scalar functional averages.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::function::{FunctionVector, NormKind};

/// One checkpoint value of a Cesàro series.
#[derive(Clone, Debug)]
pub enum SeriesValue {
    /// Plain average, a vector in the chain's basis.
    Function(FunctionVector),
    /// Absolute-value average sampled on a grid: nonnegative reals.
    AbsGrid(Vec<f64>),
    /// Scalar functional average.
    Scalar(Complex64),
}

impl SeriesValue {
    /// Sup-style magnitude of the checkpoint value.
    pub fn sup_value(&self) -> f64 {
        match self {
            SeriesValue::Function(f) => f.norm(NormKind::Sup),
            SeriesValue::AbsGrid(v) => v.iter().cloned().fold(0.0, f64::max),
            SeriesValue::Scalar(c) => c.norm(),
        }
    }

    /// L2-style magnitude of the checkpoint value.
    pub fn l2_value(&self) -> f64 {
        match self {
            SeriesValue::Function(f) => f.norm(NormKind::L2),
            SeriesValue::AbsGrid(v) => {
                (v.iter().map(|x| x * x).sum::<f64>() / v.len() as f64).sqrt()
            }
            SeriesValue::Scalar(c) => c.norm(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct CesaroSeries {
    checkpoints: Vec<u64>,
    values: Vec<SeriesValue>,
}

impl CesaroSeries {
    pub fn new(checkpoints: Vec<u64>, values: Vec<SeriesValue>) -> Result<Self> {
        if checkpoints.len() != values.len() {
            return Err(Error::Dimension(format!(
                "{} checkpoints vs {} values",
                checkpoints.len(),
                values.len()
            )));
        }
        if checkpoints.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Invalid(
                "checkpoints must be strictly increasing".into(),
            ));
        }
        Ok(Self {
            checkpoints,
            values,
        })
    }

    pub fn checkpoints(&self) -> &[u64] {
        &self.checkpoints
    }

    pub fn values(&self) -> &[SeriesValue] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.checkpoints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.checkpoints.is_empty()
    }

    pub fn value_at(&self, checkpoint: u64) -> Option<&SeriesValue> {
        self.checkpoints
            .iter()
            .position(|&c| c == checkpoint)
            .map(|i| &self.values[i])
    }

    pub fn final_value(&self) -> Option<&SeriesValue> {
        self.values.last()
    }
}

/// Default checkpoint schedule: geometric {1, 2, 4, ..., N} with N appended.
pub fn geometric_checkpoints(n: u64) -> Vec<u64> {
    let mut out = Vec::new();
    let mut c = 1u64;
    while c < n {
        out.push(c);
        c = c.saturating_mul(2);
    }
    out.push(n);
    out
}

/// Validates a user-supplied checkpoint list against the horizon.
pub fn validate_checkpoints(checkpoints: &[u64], n: u64) -> Result<()> {
    if checkpoints.is_empty() {
        return Err(Error::Invalid("at least one checkpoint required".into()));
    }
    if checkpoints.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Invalid(
            "checkpoints must be strictly increasing".into(),
        ));
    }
    let last = *checkpoints.last().unwrap();
    let first = checkpoints[0];
    if first < 1 || last > n {
        return Err(Error::Invalid(format!(
            "checkpoints must lie in 1..={n} (got {first}..={last})"
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn geometric_schedule_hits_endpoint() {
        assert_eq!(geometric_checkpoints(10), vec![1, 2, 4, 8, 10]);
        assert_eq!(geometric_checkpoints(8), vec![1, 2, 4, 8]);
        assert_eq!(geometric_checkpoints(1), vec![1]);
    }

    #[test]
    fn rejects_non_increasing_checkpoints() {
        assert!(validate_checkpoints(&[1, 1, 2], 10).is_err());
        assert!(validate_checkpoints(&[0, 2], 10).is_err());
        assert!(validate_checkpoints(&[2, 20], 10).is_err());
        assert!(validate_checkpoints(&[1, 5, 10], 10).is_ok());
    }
}
