//! Selection and prediction metrics.

use alloc::vec::Vec;

use crate::data::Dataset;
use crate::error::{ensure_len, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SelectionCounts {
    pub false_positives: usize,
    pub false_negatives: usize,
    pub captured: usize,
}

/// False positives, false negatives and true variables captured.
pub fn evaluate_selection(selected: &[usize], truth: &[usize], p: usize) -> Result<SelectionCounts> {
    if let Some(&bad) = selected.iter().chain(truth).find(|&&j| j >= p) {
        return Err(Error::IndexOutOfRange { index: bad, p });
    }
    let mut sel: Vec<usize> = selected.to_vec();
    sel.sort_unstable();
    sel.dedup();
    let mut tru: Vec<usize> = truth.to_vec();
    tru.sort_unstable();
    tru.dedup();
    let captured = sel.iter().filter(|j| tru.binary_search(j).is_ok()).count();
    Ok(SelectionCounts {
        false_positives: sel.len() - captured,
        false_negatives: tru.len() - captured,
        captured,
    })
}

/// Mean squared prediction error of `predict` on `test`.
pub fn mspe<F>(predict: F, test: &Dataset) -> Result<f64>
where
    F: FnOnce(&Dataset) -> Result<Vec<f64>>,
{
    let predictions = predict(test)?;
    mean_squared_error(&predictions, test.y())
}

pub fn mean_squared_error(predictions: &[f64], y: &[f64]) -> Result<f64> {
    if y.is_empty() {
        return Err(Error::EmptyData);
    }
    ensure_len(y.len(), predictions.len())?;
    Ok(predictions
        .iter()
        .zip(y)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        / y.len() as f64)
}

/// Mean and standard error `sd / √m`; a single value has standard error 0.
pub fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let m = values.len();
    if m == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / m as f64;
    if m == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (m - 1) as f64;
    (mean, (var / m as f64).sqrt())
}
