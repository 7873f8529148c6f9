//! Windowed statistics, paired t-tests and box summaries of annual values.

use statrs::function::beta::beta_reg;
use thiserror::Error;

use crate::metrics::KeyMetrics;
use crate::Scalar;

#[derive(Debug, Error)]
pub enum StatsError {
    #[error("need at least {needed} annual values, got {available}")]
    InsufficientYears { needed: usize, available: usize },
    #[error("paired samples differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("a paired t-test needs at least 2 pairs, got {0}")]
    TooFewPairs(usize),
    #[error("no values to summarize")]
    EmptyInput,
    #[error("window length must be positive")]
    ZeroWindow,
}

/// How consecutive windows are laid over the annual values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum WindowMode {
    /// One window per start year.
    Rolling,
    /// Back-to-back windows from the first year; a trailing partial window is dropped.
    #[default]
    NonOverlapping,
}

/// Mean and one-sigma (sample) spread of annual metric values over a window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowStats<T: Scalar = f64> {
    pub start_year: i32,
    pub window_years: usize,
    pub mean: KeyMetrics<T>,
    pub sigma: KeyMetrics<T>,
}

/// Mean and sample standard deviation; sigma is 0 for a single value.
pub fn mean_sigma<T: Scalar>(values: &[T]) -> Option<(T, T)> {
    let m = crate::scalar::mean(values)?;
    Some((m, crate::scalar::sample_std(values).unwrap_or(T::zero())))
}

/// Window start offsets into `n_years` annual values.
pub fn window_starts(n_years: usize, window: usize, mode: WindowMode) -> Result<Vec<usize>, StatsError> {
    if window == 0 {
        return Err(StatsError::ZeroWindow);
    }
    if n_years < window {
        return Err(StatsError::InsufficientYears { needed: window, available: n_years });
    }
    Ok(match mode {
        WindowMode::Rolling => (0..=n_years - window).collect(),
        WindowMode::NonOverlapping => (0..n_years / window).map(|i| i * window).collect(),
    })
}

/// Windowed mean and sigma per metric over annual `(year, metrics)` values.
pub fn window_stats<T: Scalar>(
    annual: &[(i32, KeyMetrics<T>)],
    window: usize,
    mode: WindowMode,
) -> Result<Vec<WindowStats<T>>, StatsError> {
    let starts = window_starts(annual.len(), window, mode)?;
    Ok(starts
        .into_iter()
        .map(|s| {
            let slice = &annual[s..s + window];
            let per_metric = |m| -> Vec<T> { slice.iter().map(|(_, k)| k.get(m)).collect() };
            WindowStats {
                start_year: slice[0].0,
                window_years: window,
                mean: KeyMetrics::from_fn(|m| mean_sigma(&per_metric(m)).expect("non-empty window").0),
                sigma: KeyMetrics::from_fn(|m| mean_sigma(&per_metric(m)).expect("non-empty window").1),
            }
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TTestResult {
    pub t_statistic: f64,
    pub degrees_of_freedom: usize,
    /// Two-sided.
    pub p_value: f64,
    pub reject_at_95: bool,
}

/// Two-sided tail probability `P(|T| ≥ |t|)` of Student's t with `df` degrees of freedom.
pub fn students_t_two_sided_p(t: f64, df: usize) -> f64 {
    if t.is_infinite() {
        return 0.0;
    }
    if t == 0.0 {
        return 1.0;
    }
    let nu = df as f64;
    // P(|T| > t) = I_{ν/(ν+t²)}(ν/2, 1/2)
    beta_reg(nu / 2.0, 0.5, nu / (nu + t * t))
}

/// Paired t-test on `d_i = a_i − b_i`.
///
/// Identical non-zero differences give `t = ±∞, p = 0`; all-zero
/// differences give `t = 0, p = 1`.
pub fn paired_t_test<T: Scalar>(a: &[T], b: &[T]) -> Result<TTestResult, StatsError> {
    if a.len() != b.len() {
        return Err(StatsError::LengthMismatch(a.len(), b.len()));
    }
    if a.len() < 2 {
        return Err(StatsError::TooFewPairs(a.len()));
    }
    let d: Vec<f64> = a.iter().zip(b).map(|(&x, &y)| x.as_f64() - y.as_f64()).collect();
    let n = d.len() as f64;
    let df = d.len() - 1;
    let (mean, sd) = mean_sigma(&d).expect("non-empty");
    let t_statistic = if sd == 0.0 {
        if mean == 0.0 {
            0.0
        } else {
            mean.signum() * f64::INFINITY
        }
    } else {
        mean / (sd / n.sqrt())
    };
    let p_value = students_t_two_sided_p(t_statistic, df);
    Ok(TTestResult { t_statistic, degrees_of_freedom: df, p_value, reject_at_95: p_value < 0.05 })
}

/// Five-number summary with inclusive (linear interpolation) quartiles.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoxSummary<T: Scalar = f64> {
    pub min: T,
    pub q1: T,
    pub median: T,
    pub q3: T,
    pub max: T,
}

/// Quantile at position `q·(n−1)` of sorted values.
pub(crate) fn quantile_sorted<T: Scalar>(sorted: &[T], q: f64) -> T {
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = T::lit(pos - lo as f64);
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

pub fn box_summary<T: Scalar>(values: &[T]) -> Result<BoxSummary<T>, StatsError> {
    if values.is_empty() {
        return Err(StatsError::EmptyInput);
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite values"));
    Ok(BoxSummary {
        min: sorted[0],
        q1: quantile_sorted(&sorted, 0.25),
        median: quantile_sorted(&sorted, 0.5),
        q3: quantile_sorted(&sorted, 0.75),
        max: sorted[sorted.len() - 1],
    })
}
