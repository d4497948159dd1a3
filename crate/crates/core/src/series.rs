//! Sampled trajectories: a shared time axis with fixed-width value rows.

use crate::{Error, Result};

/// Time series with strictly increasing times and a uniform value dimension.
/// Rows are stored flat, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    times: Vec<f64>,
    values: Vec<f64>,
    dim: usize,
}

impl TimeSeries {
    pub fn new(dim: usize) -> Self {
        assert!(dim >= 1, "value dimension must be at least 1");
        TimeSeries { times: Vec::new(), values: Vec::new(), dim }
    }

    pub fn with_capacity(dim: usize, rows: usize) -> Self {
        assert!(dim >= 1, "value dimension must be at least 1");
        TimeSeries {
            times: Vec::with_capacity(rows),
            values: Vec::with_capacity(rows * dim),
            dim,
        }
    }

    /// Append a sample. Times must arrive strictly increasing.
    pub fn push(&mut self, t: f64, row: &[f64]) -> Result<()> {
        if row.len() != self.dim {
            return Err(Error::validation(format!(
                "row has dimension {}, series has {}",
                row.len(),
                self.dim
            )));
        }
        if !t.is_finite() {
            return Err(Error::validation(format!("non-finite time {t}")));
        }
        if let Some(&last) = self.times.last() {
            if t <= last {
                return Err(Error::validation(format!(
                    "non-monotonic time insertion: {t} after {last}"
                )));
            }
        }
        self.times.push(t);
        self.values.extend_from_slice(row);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn time(&self, i: usize) -> f64 {
        self.times[i]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn value(&self, i: usize, j: usize) -> f64 {
        assert!(j < self.dim);
        self.values[i * self.dim + j]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        assert!(j < self.dim);
        (0..self.len()).map(|i| self.value(i, j)).collect()
    }

    pub fn last_row(&self) -> Option<&[f64]> {
        if self.is_empty() {
            None
        } else {
            Some(self.row(self.len() - 1))
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, &[f64])> {
        (0..self.len()).map(move |i| (self.times[i], self.row(i)))
    }
}
