use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Least-squares line through a series indexed `0..k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrendEstimate<T> {
    /// Change per window.
    pub slope: T,
    pub intercept: T,
    /// Number of points the fit used.
    pub windows: usize,
}

impl<T: Scalar> TrendEstimate<T> {
    /// Value of the fitted line at window index `x`.
    pub fn extrapolate(&self, x: T) -> T {
        self.intercept + self.slope * x
    }
}

/// Ordinary least-squares fit of `ys` against their index.
pub fn trend_series<T: Scalar>(ys: &[T]) -> Result<TrendEstimate<T>> {
    let k = ys.len();
    if k < 2 {
        return Err(Error::InsufficientData { needed: 2, got: k });
    }
    let n = T::from_usize_lossy(k);
    let x_mean = T::from_usize_lossy(k - 1) / T::lit(2.0);
    let y_mean = ys.iter().copied().sum::<T>() / n;
    let mut sxy = T::zero();
    let mut sxx = T::zero();
    for (i, &y) in ys.iter().enumerate() {
        let dx = T::from_usize_lossy(i) - x_mean;
        sxy += dx * (y - y_mean);
        sxx += dx * dx;
    }
    let slope = sxy / sxx;
    if !slope.is_finite() {
        return Err(Error::InvalidInput("non-finite value in trend series".into()));
    }
    Ok(TrendEstimate {
        slope,
        intercept: y_mean - slope * x_mean,
        windows: k,
    })
}
