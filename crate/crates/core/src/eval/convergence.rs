use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::factors::FactorMatrix;

/// Entries of the reference below this magnitude are left out of `e`.
pub const REFERENCE_GUARD: f64 = 1e-12;

/// Mean elementwise percentage difference between federated and centralized
/// item factors: `mean((Y_cf − Y_fcf) / Y_cf) · 100`. Signed; entries with
/// `|Y_cf| < 1e-12` are skipped, and a reference with no usable entries
/// yields 0.
pub fn divergence_e(y_fcf: &FactorMatrix, y_cf: &FactorMatrix) -> Result<f64> {
    if !y_fcf.same_shape(y_cf) {
        return Err(Error::DimensionMismatch {
            context: "divergence_e",
            expected: y_cf.values().len(),
            actual: y_fcf.values().len(),
        });
    }
    let (sum, n) = y_fcf
        .values()
        .iter()
        .zip(y_cf.values())
        .filter(|(_, r)| r.abs() >= REFERENCE_GUARD)
        .fold((0.0, 0usize), |(s, n), (f, r)| (s + (r - f) / r, n + 1));
    Ok(if n == 0 { 0.0 } else { sum / n as f64 * 100.0 })
}

/// What a federated run is compared against.
#[derive(Debug, Clone)]
pub enum TraceReference {
    /// One fixed item-factor matrix for every epoch.
    Fixed(FactorMatrix),
    /// `Y` of the centralized model after each epoch; entry `t` is used for
    /// federated epoch `t + 1`.
    PerEpoch(Vec<FactorMatrix>),
}

impl TraceReference {
    /// Reference for 1-based `epoch`, if one exists.
    pub fn for_epoch(&self, epoch: usize) -> Option<&FactorMatrix> {
        match self {
            Self::Fixed(y) => Some(y),
            Self::PerEpoch(ys) => epoch.checked_sub(1).and_then(|t| ys.get(t)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    /// 1-based.
    pub epoch: usize,
    /// 1-based within the epoch.
    pub gd_iter: usize,
    pub e_percent: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceTrace {
    rows: Vec<TraceRow>,
}

impl ConvergenceTrace {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends a row; `(epoch, gd_iter)` must strictly increase.
    pub fn push(&mut self, row: TraceRow) {
        if let Some(last) = self.rows.last() {
            assert!(
                (row.epoch, row.gd_iter) > (last.epoch, last.gd_iter),
                "trace indices must strictly increase"
            );
        }
        self.rows.push(row);
    }

    pub fn rows(&self) -> &[TraceRow] {
        &self.rows
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Last row of `epoch`.
    pub fn end_of_epoch(&self, epoch: usize) -> Option<&TraceRow> {
        self.rows.iter().rev().find(|r| r.epoch == epoch)
    }

    /// `|e|` at the first iteration where it drops below `threshold`
    /// within `epoch`, as `(gd_iter, e)`.
    pub fn first_below(&self, epoch: usize, threshold: f64) -> Option<(usize, f64)> {
        self.rows
            .iter()
            .filter(|r| r.epoch == epoch)
            .find(|r| r.e_percent.abs() < threshold)
            .map(|r| (r.gd_iter, r.e_percent))
    }

    /// CSV with header `epoch,gd_iter,e_percent`.
    pub fn write_csv(&self, mut w: impl Write) -> Result<()> {
        writeln!(w, "epoch,gd_iter,e_percent")?;
        for r in &self.rows {
            writeln!(w, "{},{},{}", r.epoch, r.gd_iter, r.e_percent)?;
        }
        Ok(())
    }
}
