use crate::error::{Error, Result};

/// Multi-scale coefficient applied to the base filter count.
pub const DEFAULT_ALPHA: f64 = 1.67;

/// Truncation coefficients for the three chained 3×3 convolutions. These are
/// the rounded sixth/third/half fractions; the exact fractions would give 570
/// instead of 569 for the 1024-filter stage.
const SPLIT: [f64; 3] = [0.167, 0.333, 0.5];

/// Widths of the three successive 3×3 convolutions of a multi-resolution
/// block with `base` filters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FilterSchedule {
    pub base: usize,
    pub alpha: f64,
    pub width: f64,
    pub filters: [usize; 3],
}

impl FilterSchedule {
    /// Channels after concatenating the three convolutions; also the width
    /// of the 1×1 residual.
    pub fn total(&self) -> usize {
        self.filters.iter().sum()
    }
}

pub fn filter_schedule(base: usize, alpha: f64) -> Result<FilterSchedule> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::invalid(format!("filter schedule: alpha must be positive, got {alpha}")));
    }
    let width = alpha * base as f64;
    let filters = SPLIT.map(|c| (width * c) as usize);
    if filters.contains(&0) {
        return Err(Error::invalid(format!(
            "filter schedule: base {base} with alpha {alpha} yields a zero-width layer {filters:?}"
        )));
    }
    Ok(FilterSchedule {
        base,
        alpha,
        width,
        filters,
    })
}
