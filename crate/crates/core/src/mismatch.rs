//! Generation-load mismatch, balancing and curtailment.
//!
//! Wind, solar and load are normalized per country by their historical
//! means, so every quantity here is in units of the country's mean
//! historical load. Countries are combined with load-share weights, which
//! models unlimited (copper-plate) transmission.

use std::collections::BTreeMap;
use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use thiserror::Error;

use crate::convert::CapacityFactorSeries;
use crate::demand::DemandSeries;
use crate::weather::TimeAxis;
use crate::Scalar;

#[derive(Debug, Error)]
pub enum MismatchError {
    #[error("axis mismatch: {0}")]
    AxisMismatch(String),
    #[error("{country}: historical mean of {quantity} is zero")]
    ZeroMean { country: String, quantity: &'static str },
    #[error("load shares sum to {0}, expected 1")]
    WeightSumInvalid(f64),
    #[error("missing {quantity} series for {country}")]
    MissingCountry { country: String, quantity: &'static str },
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
}

/// Climate pathway.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Scenario {
    Historical,
    Rcp26,
    Rcp45,
    Rcp85,
}

impl Scenario {
    pub const ALL: [Scenario; 4] = [Scenario::Historical, Scenario::Rcp26, Scenario::Rcp45, Scenario::Rcp85];

    pub fn label(self) -> &'static str {
        match self {
            Scenario::Historical => "historical",
            Scenario::Rcp26 => "RCP2.6",
            Scenario::Rcp45 => "RCP4.5",
            Scenario::Rcp85 => "RCP8.5",
        }
    }

    pub fn from_label(label: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|s| s.label().eq_ignore_ascii_case(label))
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// One point of an analysis sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioDescriptor<T: Scalar = f64> {
    pub scenario: Scenario,
    pub model_id: String,
    pub period: (i32, i32),
    /// Wind share of mean renewable generation; 1 is wind only.
    pub alpha: T,
    /// Mean renewable generation over mean load.
    pub gamma: T,
}

impl<T: Scalar> ScenarioDescriptor<T> {
    pub fn new(scenario: Scenario, model_id: impl Into<String>, period: (i32, i32), alpha: T, gamma: T) -> Result<Self, MismatchError> {
        if !(alpha >= T::zero() && alpha <= T::one()) {
            return Err(MismatchError::InvalidScenario(format!("alpha {alpha} outside [0, 1]")));
        }
        if !(gamma > T::zero()) || !gamma.is_finite() {
            return Err(MismatchError::InvalidScenario(format!("gamma {gamma} must be positive")));
        }
        if period.1 < period.0 {
            return Err(MismatchError::InvalidScenario(format!("period {}..{} ends before it starts", period.0, period.1)));
        }
        Ok(Self { scenario, model_id: model_id.into(), period, alpha, gamma })
    }
}

/// Historical means of one country.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CountryNormalization<T: Scalar = f64> {
    pub mean_wind_cf: T,
    pub mean_solar_cf: T,
    /// MWh per step.
    pub mean_load: T,
}

/// Historical means per country; computed once and reused for every scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizationConstants<T: Scalar = f64> {
    countries: BTreeMap<String, CountryNormalization<T>>,
}

impl<T: Scalar> NormalizationConstants<T> {
    pub fn get(&self, country: &str) -> Option<&CountryNormalization<T>> {
        self.countries.get(country)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &CountryNormalization<T>)> {
        self.countries.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn countries(&self) -> Vec<String> {
        self.countries.keys().cloned().collect()
    }

    /// `w_n = mean_load_n / Σ mean_load`, in country order.
    pub fn load_shares(&self) -> Vec<T> {
        let total: T = self.countries.values().map(|c| c.mean_load).sum();
        self.countries.values().map(|c| c.mean_load / total).collect()
    }

    /// Divides raw series by the country's historical means.
    pub fn normalize(&self, country: &str, wind: &[T], solar: &[T], load: &[T]) -> Result<NormalizedCountry<T>, MismatchError> {
        let c = self.get(country).ok_or_else(|| MismatchError::MissingCountry {
            country: country.to_string(),
            quantity: "normalization",
        })?;
        if wind.len() != solar.len() || wind.len() != load.len() {
            return Err(MismatchError::AxisMismatch(format!(
                "{country}: wind {}, solar {}, load {} steps",
                wind.len(),
                solar.len(),
                load.len()
            )));
        }
        Ok(NormalizedCountry {
            country: country.to_string(),
            wind: wind.iter().map(|&v| v / c.mean_wind_cf).collect(),
            solar: solar.iter().map(|&v| v / c.mean_solar_cf).collect(),
            load: load.iter().map(|&v| v / c.mean_load).collect(),
        })
    }
}

/// Per-country series divided by historical means (historical mean = 1).
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedCountry<T: Scalar = f64> {
    pub country: String,
    pub wind: Vec<T>,
    pub solar: Vec<T>,
    pub load: Vec<T>,
}

fn find<'a, S, F: Fn(&S) -> &str>(items: &'a [S], country: &str, key: F) -> Option<&'a S> {
    items.iter().find(|s| key(s) == country)
}

/// Historical per-country means of wind CF, solar CF and load.
pub fn compute_normalization<T: Scalar>(
    hist_wind: &[CapacityFactorSeries<T>],
    hist_solar: &[CapacityFactorSeries<T>],
    hist_load: &[DemandSeries<T>],
) -> Result<NormalizationConstants<T>, MismatchError> {
    let mut countries = BTreeMap::new();
    let axis = hist_load.first().map(|l| l.time);
    for load in hist_load {
        let country = load.country.as_str();
        let missing = |quantity| MismatchError::MissingCountry { country: country.to_string(), quantity };
        let wind = find(hist_wind, country, |s| s.country.as_str()).ok_or_else(|| missing("wind"))?;
        let solar = find(hist_solar, country, |s| s.country.as_str()).ok_or_else(|| missing("solar"))?;
        if Some(wind.time) != axis || Some(solar.time) != axis || Some(load.time) != axis {
            return Err(MismatchError::AxisMismatch(format!("{country}: historical series cover different periods")));
        }
        if !load.time.is_whole_years() {
            return Err(MismatchError::AxisMismatch(format!("{country}: historical period is not whole years")));
        }
        let mean = |v: &[T], quantity: &'static str| {
            let m = crate::scalar::mean(v).unwrap_or(T::zero());
            if m > T::zero() {
                Ok(m)
            } else {
                Err(MismatchError::ZeroMean { country: country.to_string(), quantity })
            }
        };
        countries.insert(
            country.to_string(),
            CountryNormalization {
                mean_wind_cf: mean(wind.values(), "wind capacity factor")?,
                mean_solar_cf: mean(solar.values(), "solar capacity factor")?,
                mean_load: mean(load.values(), "load")?,
            },
        );
    }
    if countries.is_empty() {
        return Err(MismatchError::AxisMismatch("no historical series".into()));
    }
    Ok(NormalizationConstants { countries })
}

/// `Δ(t) = γ·(α·W(t) + (1−α)·S(t)) − L(t)` on normalized series.
pub fn mismatch<T: Scalar>(alpha: T, gamma: T, wind: &[T], solar: &[T], load: &[T]) -> Result<Vec<T>, MismatchError> {
    if wind.len() != solar.len() || wind.len() != load.len() {
        return Err(MismatchError::AxisMismatch(format!(
            "wind {}, solar {}, load {} steps",
            wind.len(),
            solar.len(),
            load.len()
        )));
    }
    let beta = T::one() - alpha;
    Ok(wind.iter().zip(solar).zip(load).map(|((&w, &s), &l)| gamma * (alpha * w + beta * s) - l).collect())
}

fn check_shares<T: Scalar>(shares: &[T]) -> Result<(), MismatchError> {
    let sum: f64 = shares.iter().map(|w| w.as_f64()).sum();
    let tol = 1e-9_f64.max(T::epsilon().as_f64() * 4.0 * shares.len() as f64);
    if shares.is_empty() || shares.iter().any(|w| !(*w >= T::zero())) || (sum - 1.0).abs() > tol {
        return Err(MismatchError::WeightSumInvalid(sum));
    }
    Ok(())
}

/// Load-share weighted sum `Σ_n w_n·x_n(t)`.
pub fn aggregate_mismatch<T: Scalar, S: AsRef<[T]>>(series: &[S], shares: &[T]) -> Result<Vec<T>, MismatchError> {
    check_shares(shares)?;
    if series.len() != shares.len() {
        return Err(MismatchError::AxisMismatch(format!("{} series, {} shares", series.len(), shares.len())));
    }
    let n = series[0].as_ref().len();
    if series.iter().any(|s| s.as_ref().len() != n) {
        return Err(MismatchError::AxisMismatch("series lengths differ".into()));
    }
    let mut out = vec![T::zero(); n];
    for (s, &w) in series.iter().zip(shares) {
        for (acc, &v) in out.iter_mut().zip(s.as_ref()) {
            *acc += w * v;
        }
    }
    Ok(out)
}

/// Splits mismatch into balancing `B = max(−Δ, 0)` and curtailment `C = max(Δ, 0)`.
pub fn decompose<T: Scalar>(delta: &[T]) -> (Vec<T>, Vec<T>) {
    delta.iter().map(|&d| ((-d).max(T::zero()), d.max(T::zero()))).unzip()
}

/// Mismatch, balancing and curtailment for every country and the aggregate.
#[derive(Debug, Clone, PartialEq)]
pub struct MismatchSet<T: Scalar = f64> {
    pub time: TimeAxis,
    pub countries: Vec<String>,
    pub shares: Vec<T>,
    pub country_delta: Vec<Vec<T>>,
    pub country_balancing: Vec<Vec<T>>,
    pub country_curtailment: Vec<Vec<T>>,
    pub delta: Vec<T>,
    pub balancing: Vec<T>,
    pub curtailment: Vec<T>,
}

impl<T: Scalar> MismatchSet<T> {
    /// Builds the set from normalized inputs with a uniform mix.
    pub fn build(
        inputs: &[NormalizedCountry<T>],
        shares: &[T],
        alpha: T,
        gamma: T,
        time: TimeAxis,
    ) -> Result<Self, MismatchError> {
        if inputs.len() != shares.len() {
            return Err(MismatchError::AxisMismatch(format!("{} countries, {} shares", inputs.len(), shares.len())));
        }
        let mut country_delta = Vec::with_capacity(inputs.len());
        let mut country_balancing = Vec::with_capacity(inputs.len());
        let mut country_curtailment = Vec::with_capacity(inputs.len());
        for c in inputs {
            if c.load.len() != time.n_steps {
                return Err(MismatchError::AxisMismatch(format!("{}: {} steps, axis {}", c.country, c.load.len(), time.n_steps)));
            }
            let d = mismatch(alpha, gamma, &c.wind, &c.solar, &c.load)?;
            let (b, cu) = decompose(&d);
            country_delta.push(d);
            country_balancing.push(b);
            country_curtailment.push(cu);
        }
        let delta = aggregate_mismatch(&country_delta, shares)?;
        let (balancing, curtailment) = decompose(&delta);
        Ok(Self {
            time,
            countries: inputs.iter().map(|c| c.country.clone()).collect(),
            shares: shares.to_vec(),
            country_delta,
            country_balancing,
            country_curtailment,
            delta,
            balancing,
            curtailment,
        })
    }

    /// `time_index,country,delta,balancing,curtailment`, aggregate rows as `EU`.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> std::io::Result<()> {
        let mut w = BufWriter::with_capacity(1 << 20, File::create(path)?);
        writeln!(w, "time_index,country,delta,balancing,curtailment")?;
        for t in 0..self.time.n_steps {
            for (i, c) in self.countries.iter().enumerate() {
                writeln!(
                    w,
                    "{t},{c},{},{},{}",
                    self.country_delta[i][t], self.country_balancing[i][t], self.country_curtailment[i][t]
                )?;
            }
            writeln!(w, "{t},EU,{},{},{}", self.delta[t], self.balancing[t], self.curtailment[t])?;
        }
        w.flush()
    }
}
