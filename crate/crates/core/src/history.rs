//! Sliding window of iterate and residual differences.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::smallmat::ColMatrix;
use crate::vecops;

/// Ring of the most recent `capacity` difference pairs `(Δx, Δr)`.
///
/// With a moving-average weight `γ > 0` the stored columns are the averaged
/// differences `Δx̂_k = γ Δx̂_{k-1} + (1 - γ) Δx_{k-1}` (and likewise for
/// `Δr̂`), starting from zero; the raw differences are not kept. `γ = 0`
/// stores the raw pairs.
#[derive(Debug, Clone)]
pub struct HistoryBuffer {
    dim: usize,
    capacity: usize,
    gamma: f64,
    dx_cols: VecDeque<Vec<f64>>,
    dr_cols: VecDeque<Vec<f64>>,
    dx_hat_last: Vec<f64>,
    dr_hat_last: Vec<f64>,
}

impl HistoryBuffer {
    /// Plain history without averaging.
    pub fn new(dim: usize, capacity: usize) -> Self {
        Self::with_moving_average(dim, capacity, 0.0)
    }

    /// `gamma` must lie in `[0, 1)`; callers validate configs before this point.
    pub fn with_moving_average(dim: usize, capacity: usize, gamma: f64) -> Self {
        assert!(capacity >= 1, "history capacity must be at least 1");
        assert!((0.0..1.0).contains(&gamma), "gamma must lie in [0, 1)");
        HistoryBuffer {
            dim,
            capacity,
            gamma,
            dx_cols: VecDeque::with_capacity(capacity),
            dr_cols: VecDeque::with_capacity(capacity),
            dx_hat_last: vec![0.0; dim],
            dr_hat_last: vec![0.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.dx_cols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dx_cols.is_empty()
    }

    pub fn moving_average_enabled(&self) -> bool {
        self.gamma > 0.0
    }

    pub fn push(&mut self, dx: &[f64], dr: &[f64]) -> Result<()> {
        for v in [dx, dr] {
            if v.len() != self.dim {
                return Err(Error::DimensionMismatch {
                    op: "HistoryBuffer::push",
                    expected: self.dim,
                    got: v.len(),
                });
            }
        }
        if !vecops::all_finite(dx) || !vecops::all_finite(dr) {
            return Err(Error::NonFinite("history column"));
        }

        let (dx_col, dr_col) = if self.moving_average_enabled() {
            let g = self.gamma;
            let avg = |last: &[f64], new: &[f64]| -> Vec<f64> {
                last.iter()
                    .zip(new)
                    .map(|(l, n)| g * l + (1.0 - g) * n)
                    .collect()
            };
            let dx_hat = avg(&self.dx_hat_last, dx);
            let dr_hat = avg(&self.dr_hat_last, dr);
            self.dx_hat_last.clone_from(&dx_hat);
            self.dr_hat_last.clone_from(&dr_hat);
            (dx_hat, dr_hat)
        } else {
            (dx.to_vec(), dr.to_vec())
        };

        if self.dx_cols.len() == self.capacity {
            self.dx_cols.pop_front();
            self.dr_cols.pop_front();
        }
        self.dx_cols.push_back(dx_col);
        self.dr_cols.push_back(dr_col);
        Ok(())
    }

    /// `(X, R)` with columns ordered oldest to newest.
    pub fn matrices(&self) -> (ColMatrix, ColMatrix) {
        let build = |cols: &VecDeque<Vec<f64>>| {
            let cols: Vec<&[f64]> = cols.iter().map(Vec::as_slice).collect();
            ColMatrix::from_columns(self.dim, &cols).expect("history columns have length dim")
        };
        (build(&self.dx_cols), build(&self.dr_cols))
    }

    /// The newest stored `Δx` column (averaged when the moving average is on).
    pub fn newest_dx(&self) -> Option<&[f64]> {
        self.dx_cols.back().map(Vec::as_slice)
    }

    pub fn clear(&mut self) {
        self.dx_cols.clear();
        self.dr_cols.clear();
        self.dx_hat_last.iter_mut().for_each(|v| *v = 0.0);
        self.dr_hat_last.iter_mut().for_each(|v| *v = 0.0);
    }
}
