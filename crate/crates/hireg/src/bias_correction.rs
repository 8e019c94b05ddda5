//! Batch bias estimation over repeated measurements and the sliding-window
//! corrector for online localization.
//!
//! Both techniques exploit the same fact: the least-squares solution is
//! unbiased under zero-mean noise, so the average of the differences
//! `x̂_series − x̂_ls` over many measurements estimates the systematic bias
//! of the regularized solution while the noise averages out.

use std::collections::VecDeque;

use nalgebra::DVector;

use crate::error::{Error, Result};

/// Default sliding-window length for online correction.
pub const DEFAULT_WINDOW_LEN: usize = 200;

/// Mean difference `(1/l) Σ (x̂_series,t − x̂_ls,t)` over paired estimate lists.
pub fn batch_bias(
    series_estimates: &[DVector<f64>],
    ls_estimates: &[DVector<f64>],
) -> Result<DVector<f64>> {
    if series_estimates.is_empty() {
        return Err(Error::EmptyInput("batch_bias"));
    }
    if series_estimates.len() != ls_estimates.len() {
        return Err(Error::DimensionMismatch {
            context: "batch_bias lists",
            expected: series_estimates.len(),
            actual: ls_estimates.len(),
        });
    }
    let dim = series_estimates[0].len();
    let mut sum = DVector::zeros(dim);
    for (hr, ls) in series_estimates.iter().zip(ls_estimates) {
        if hr.len() != dim || ls.len() != dim {
            return Err(Error::DimensionMismatch {
                context: "batch_bias vectors",
                expected: dim,
                actual: if hr.len() != dim { hr.len() } else { ls.len() },
            });
        }
        sum += hr - ls;
    }
    Ok(sum / series_estimates.len() as f64)
}

/// FIFO window of the last `capacity` difference vectors `Δx(t)`.
///
/// The estimated bias is zero until the window has accumulated `capacity`
/// samples; afterwards it is the mean of the stored differences. Single
/// writer at a time; snapshots returned by [`SlidingWindow::bias`] are
/// plain vectors and freely shareable.
#[derive(Debug, Clone)]
pub struct SlidingWindow {
    capacity: usize,
    dim: usize,
    entries: VecDeque<DVector<f64>>,
    /// Running sum of the stored entries.
    sum: DVector<f64>,
    /// Total pushes since creation (the current tick).
    pushed: usize,
}

impl SlidingWindow {
    pub fn new(capacity: usize, dim: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::InvalidArgument(
                "sliding window capacity must be at least 1".into(),
            ));
        }
        if dim == 0 {
            return Err(Error::InvalidArgument(
                "sliding window dimension must be at least 1".into(),
            ));
        }
        Ok(SlidingWindow {
            capacity,
            dim,
            entries: VecDeque::with_capacity(capacity),
            sum: DVector::zeros(dim),
            pushed: 0,
        })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Ticks seen so far (number of pushes).
    pub fn ticks(&self) -> usize {
        self.pushed
    }

    /// Whether the window holds a full `capacity` of samples.
    pub fn is_warmed_up(&self) -> bool {
        self.entries.len() == self.capacity
    }

    /// Append a difference vector, evicting the oldest when full.
    pub fn push(&mut self, delta: DVector<f64>) -> Result<()> {
        if delta.len() != self.dim {
            return Err(Error::DimensionMismatch {
                context: "sliding window push",
                expected: self.dim,
                actual: delta.len(),
            });
        }
        if self.entries.len() == self.capacity {
            let evicted = self.entries.pop_front().expect("window non-empty");
            self.sum -= evicted;
        }
        self.sum += &delta;
        self.entries.push_back(delta);
        self.pushed += 1;
        Ok(())
    }

    /// Estimated bias: zero until warmed up, then the mean of the stored
    /// differences.
    pub fn bias(&self) -> DVector<f64> {
        if self.is_warmed_up() {
            &self.sum / self.capacity as f64
        } else {
            DVector::zeros(self.dim)
        }
    }

    /// `estimate − bias()`.
    pub fn correct(&self, estimate: &DVector<f64>) -> Result<DVector<f64>> {
        if estimate.len() != self.dim {
            return Err(Error::DimensionMismatch {
                context: "sliding window correct",
                expected: self.dim,
                actual: estimate.len(),
            });
        }
        Ok(estimate - self.bias())
    }
}
