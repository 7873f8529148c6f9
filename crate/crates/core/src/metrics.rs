//! The four key metrics of a highly renewable system, per simulated year.
//!
//! All metrics are in units of the mean historical load:
//!
//! * K1 dispatchable electricity: mean aggregated balancing;
//! * K2 transmission benefit: load-weighted isolated balancing minus
//!   aggregated balancing;
//! * K3 dispatchable capacity: maximum aggregated balancing;
//! * K4 short-term variability: sample standard deviation of the 3-hourly
//!   first differences of aggregated balancing.

use std::fmt;

use thiserror::Error;

use crate::mismatch::MismatchSet;
use crate::Scalar;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("variability needs at least 3 steps, got {0}")]
    TooShort(usize),
    #[error("series lengths differ: {0}")]
    AxisMismatch(String),
    #[error("mismatch set does not cover whole years")]
    NotWholeYears,
}

/// Identifies one of the four key metrics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Metric {
    DispatchableElectricity,
    TransmissionBenefit,
    DispatchableCapacity,
    ShortTermVariability,
}

impl Metric {
    pub const ALL: [Metric; 4] = [
        Metric::DispatchableElectricity,
        Metric::TransmissionBenefit,
        Metric::DispatchableCapacity,
        Metric::ShortTermVariability,
    ];

    /// Short column label (`K1` … `K4`).
    pub fn key(self) -> &'static str {
        match self {
            Metric::DispatchableElectricity => "K1",
            Metric::TransmissionBenefit => "K2",
            Metric::DispatchableCapacity => "K3",
            Metric::ShortTermVariability => "K4",
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Metric::DispatchableElectricity => "dispatchable_electricity",
            Metric::TransmissionBenefit => "transmission_benefit",
            Metric::DispatchableCapacity => "dispatchable_capacity",
            Metric::ShortTermVariability => "short_term_variability",
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct KeyMetrics<T: Scalar = f64> {
    pub dispatchable_electricity: T,
    pub transmission_benefit: T,
    pub dispatchable_capacity: T,
    pub short_term_variability: T,
}

impl<T: Scalar> KeyMetrics<T> {
    pub fn get(&self, metric: Metric) -> T {
        match metric {
            Metric::DispatchableElectricity => self.dispatchable_electricity,
            Metric::TransmissionBenefit => self.transmission_benefit,
            Metric::DispatchableCapacity => self.dispatchable_capacity,
            Metric::ShortTermVariability => self.short_term_variability,
        }
    }

    pub fn from_fn(mut f: impl FnMut(Metric) -> T) -> Self {
        Self {
            dispatchable_electricity: f(Metric::DispatchableElectricity),
            transmission_benefit: f(Metric::TransmissionBenefit),
            dispatchable_capacity: f(Metric::DispatchableCapacity),
            short_term_variability: f(Metric::ShortTermVariability),
        }
    }
}

/// K3 statistic: strict maximum, or an upper quantile for sensitivity runs.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum CapacityStatistic {
    #[default]
    Maximum,
    Quantile(f64),
}

/// K1: mean of aggregated balancing.
pub fn dispatchable_electricity<T: Scalar>(balancing: &[T]) -> T {
    crate::scalar::mean(balancing).unwrap_or(T::zero())
}

/// K2: `mean_t(Σ_n w_n·B_n(t) − B(t))`.
pub fn transmission_benefit<T: Scalar, S: AsRef<[T]>>(
    country_balancing: &[S],
    shares: &[T],
    aggregated: &[T],
) -> Result<T, MetricsError> {
    if country_balancing.len() != shares.len() {
        return Err(MetricsError::AxisMismatch(format!("{} countries, {} shares", country_balancing.len(), shares.len())));
    }
    if country_balancing.iter().any(|b| b.as_ref().len() != aggregated.len()) {
        return Err(MetricsError::AxisMismatch("country and aggregate balancing lengths differ".into()));
    }
    // The pointwise gap is non-negative by convexity; clamping only removes rounding noise.
    let gaps: Vec<T> = aggregated
        .iter()
        .enumerate()
        .map(|(t, &b)| {
            let isolated: T = country_balancing.iter().zip(shares).map(|(s, &w)| w * s.as_ref()[t]).sum();
            (isolated - b).max(T::zero())
        })
        .collect();
    Ok(dispatchable_electricity(&gaps))
}

/// K3 as the strict maximum of aggregated balancing.
pub fn dispatchable_capacity<T: Scalar>(balancing: &[T]) -> T {
    balancing.iter().copied().fold(T::zero(), T::max)
}

/// K3 as the `q` quantile (linear interpolation between order statistics).
pub fn dispatchable_capacity_quantile<T: Scalar>(balancing: &[T], q: f64) -> T {
    if balancing.is_empty() {
        return T::zero();
    }
    let mut sorted = balancing.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite balancing"));
    crate::stats::quantile_sorted(&sorted, q)
}

/// K4: sample standard deviation of first differences.
pub fn short_term_variability<T: Scalar>(balancing: &[T]) -> Result<T, MetricsError> {
    if balancing.len() < 3 {
        return Err(MetricsError::TooShort(balancing.len()));
    }
    let diffs: Vec<T> = balancing.windows(2).map(|w| w[1] - w[0]).collect();
    Ok(crate::scalar::sample_std(&diffs).expect("at least two differences"))
}

/// Key metrics of one window of a mismatch set.
pub fn key_metrics_for_range<T: Scalar>(
    set: &MismatchSet<T>,
    range: std::ops::Range<usize>,
    capacity: CapacityStatistic,
) -> Result<KeyMetrics<T>, MetricsError> {
    let b = &set.balancing[range.clone()];
    let per_country: Vec<&[T]> = set.country_balancing.iter().map(|s| &s[range.clone()]).collect();
    Ok(KeyMetrics {
        dispatchable_electricity: dispatchable_electricity(b),
        transmission_benefit: transmission_benefit(&per_country, &set.shares, b)?,
        dispatchable_capacity: match capacity {
            CapacityStatistic::Maximum => dispatchable_capacity(b),
            CapacityStatistic::Quantile(q) => dispatchable_capacity_quantile(b, q),
        },
        short_term_variability: short_term_variability(b)?,
    })
}

/// Key metrics for every whole year of the set, as `(year, metrics)`.
pub fn annual_key_metrics<T: Scalar>(
    set: &MismatchSet<T>,
    capacity: CapacityStatistic,
) -> Result<Vec<(i32, KeyMetrics<T>)>, MetricsError> {
    if !set.time.is_whole_years() {
        return Err(MetricsError::NotWholeYears);
    }
    (0..set.time.n_years())
        .map(|y| Ok((set.time.start_year + y as i32, key_metrics_for_range(set, set.time.year_steps(y), capacity)?)))
        .collect()
}
