//! Temperature-corrected demand via the degree-day method.
//!
//! Daily demand totals are regressed on heating and cooling degree days;
//! what remains is kept as a per-step-of-year baseline profile. Scenario
//! demand is then rebuilt from scenario temperatures, with each day's
//! degree-day component spread evenly over its eight 3-hourly steps.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use thiserror::Error;

use crate::weather::{
    csv_error, csv_reader, expect_header, malformed, parse_field, TimeAxis, WeatherError, STEPS_PER_DAY,
};
use crate::Scalar;

#[derive(Debug, Error)]
pub enum DemandError {
    #[error("series of length {0} is not a whole number of days")]
    LengthNotDivisible(usize),
    #[error("heating threshold {heating} must be below cooling threshold {cooling}")]
    InvalidThresholds { heating: f64, cooling: f64 },
    #[error("axis mismatch: {0}")]
    AxisMismatch(String),
    #[error("demand must cover whole years ({0} steps given)")]
    NotWholeYears(usize),
    #[error("invalid demand value {value} at step {step}")]
    InvalidValue { step: usize, value: f64 },
    #[error("baseline demand of {country} is not positive at step-of-year {step}")]
    NonPositiveBaseline { country: String, step: usize },
    #[error(transparent)]
    File(#[from] WeatherError),
}

/// Degree-day reference temperatures, °C.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DegreeDayParams<T: Scalar = f64> {
    heating_threshold: T,
    cooling_threshold: T,
}

impl<T: Scalar> DegreeDayParams<T> {
    pub fn new(heating_threshold: T, cooling_threshold: T) -> Result<Self, DemandError> {
        if !(heating_threshold < cooling_threshold) {
            return Err(DemandError::InvalidThresholds {
                heating: heating_threshold.as_f64(),
                cooling: cooling_threshold.as_f64(),
            });
        }
        Ok(Self { heating_threshold, cooling_threshold })
    }

    pub fn heating_threshold(&self) -> T {
        self.heating_threshold
    }

    pub fn cooling_threshold(&self) -> T {
        self.cooling_threshold
    }
}

impl<T: Scalar> Default for DegreeDayParams<T> {
    /// 17 °C heating, 22 °C cooling.
    fn default() -> Self {
        Self::new(T::lit(17.0), T::lit(22.0)).expect("default thresholds ordered")
    }
}

/// Mean of each day's eight 3-hourly values.
pub fn daily_mean_temperature<T: Scalar>(series: &[T]) -> Result<Vec<T>, DemandError> {
    if series.len() % STEPS_PER_DAY != 0 {
        return Err(DemandError::LengthNotDivisible(series.len()));
    }
    let n = T::from_count(STEPS_PER_DAY);
    Ok(series.chunks_exact(STEPS_PER_DAY).map(|day| day.iter().copied().sum::<T>() / n).collect())
}

/// Heating and cooling degree days of one daily mean temperature.
pub fn degree_days<T: Scalar>(t_daily: T, params: &DegreeDayParams<T>) -> (T, T) {
    let hdd = (params.heating_threshold - t_daily).max(T::zero());
    let cdd = (t_daily - params.cooling_threshold).max(T::zero());
    (hdd, cdd)
}

/// Degree days for a whole daily series, as `(HDD, CDD)`.
pub fn degree_day_series<T: Scalar>(daily: &[T], params: &DegreeDayParams<T>) -> (Vec<T>, Vec<T>) {
    daily.iter().map(|&t| degree_days(t, params)).unzip()
}

/// Per-country demand, MWh per 3-hour step.
#[derive(Debug, Clone, PartialEq)]
pub struct DemandSeries<T: Scalar = f64> {
    pub country: String,
    pub time: TimeAxis,
    values: Vec<T>,
}

impl<T: Scalar> DemandSeries<T> {
    pub fn new(country: impl Into<String>, time: TimeAxis, values: Vec<T>) -> Result<Self, DemandError> {
        if values.len() != time.n_steps {
            return Err(DemandError::AxisMismatch(format!("{} values for {} steps", values.len(), time.n_steps)));
        }
        if let Some(step) = values.iter().position(|v| !(*v >= T::zero()) || !v.is_finite()) {
            return Err(DemandError::InvalidValue { step, value: values[step].as_f64() });
        }
        Ok(Self { country: country.into(), time, values })
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }
}

/// Fitted degree-day sensitivity plus a baseline profile.
#[derive(Debug, Clone, PartialEq)]
pub struct DemandRegression<T: Scalar = f64> {
    pub country: String,
    /// One value per step of the year, MWh per step.
    pub baseline: Vec<T>,
    /// MWh per degree day (daily total).
    pub heating_coeff: T,
    pub cooling_coeff: T,
}

/// Statistics of the least-squares fit behind a [`DemandRegression`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitDiagnostics<T: Scalar = f64> {
    pub intercept: T,
    /// Coefficients before clipping at zero.
    pub raw_heating_coeff: T,
    pub raw_cooling_coeff: T,
    /// Standard errors; zero for regressors without variation.
    pub heating_se: T,
    pub cooling_se: T,
    pub residual_std: T,
    pub n_days: usize,
    /// Neither degree-day series varied; coefficients were set to zero.
    pub singular: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DemandFit<T: Scalar = f64> {
    pub regression: DemandRegression<T>,
    pub diagnostics: FitDiagnostics<T>,
}

fn centered<T: Scalar>(x: &[T]) -> (T, Vec<T>) {
    let m = crate::scalar::mean(x).unwrap_or(T::zero());
    (m, x.iter().map(|&v| v - m).collect())
}

fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

/// Ordinary least squares of daily demand totals on `(1, HDD, CDD)`.
pub fn fit_demand_regression<T: Scalar>(
    observed: &DemandSeries<T>,
    hdd: &[T],
    cdd: &[T],
) -> Result<DemandFit<T>, DemandError> {
    let time = observed.time;
    if !time.is_whole_years() {
        return Err(DemandError::NotWholeYears(time.n_steps));
    }
    let n_days = time.n_days();
    if hdd.len() != n_days || cdd.len() != n_days {
        return Err(DemandError::AxisMismatch(format!(
            "{n_days} demand days but {} HDD and {} CDD values",
            hdd.len(),
            cdd.len()
        )));
    }
    let totals: Vec<T> = observed.values.chunks_exact(STEPS_PER_DAY).map(|d| d.iter().copied().sum()).collect();

    let (y_mean, y) = centered(&totals);
    let (h_mean, h) = centered(hdd);
    let (c_mean, c) = centered(cdd);
    let shh = dot(&h, &h);
    let scc = dot(&c, &c);
    let shc = dot(&h, &c);
    let shy = dot(&h, &y);
    let scy = dot(&c, &y);
    let h_active = shh > T::zero();
    let c_active = scc > T::zero();

    // (coefficients, diagonal of the inverse normal matrix)
    let ((bh, bc), (ih, ic)) = match (h_active, c_active) {
        (true, true) => {
            let det = shh * scc - shc * shc;
            if det > T::lit(1e-12) * shh * scc {
                (((scc * shy - shc * scy) / det, (shh * scy - shc * shy) / det), (scc / det, shh / det))
            } else if shh >= scc {
                ((shy / shh, T::zero()), (T::one() / shh, T::zero()))
            } else {
                ((T::zero(), scy / scc), (T::zero(), T::one() / scc))
            }
        }
        (true, false) => ((shy / shh, T::zero()), (T::one() / shh, T::zero())),
        (false, true) => ((T::zero(), scy / scc), (T::zero(), T::one() / scc)),
        (false, false) => ((T::zero(), T::zero()), (T::zero(), T::zero())),
    };
    let singular = !h_active && !c_active;
    if singular {
        log::warn!(
            "{}: degree days never vary; degree-day coefficients set to 0 and baseline is the mean profile",
            observed.country
        );
    }
    let intercept = y_mean - bh * h_mean - bc * c_mean;

    let params = 1 + usize::from(ih > T::zero()) + usize::from(ic > T::zero());
    let rss: T = y
        .iter()
        .zip(&h)
        .zip(&c)
        .map(|((&yi, &hi), &ci)| {
            let r = yi - bh * hi - bc * ci;
            r * r
        })
        .sum();
    let dof = n_days.saturating_sub(params).max(1);
    let sigma2 = rss / T::from_count(dof);

    let heating_coeff = bh.max(T::zero());
    let cooling_coeff = bc.max(T::zero());
    let baseline = baseline_profile(observed, hdd, cdd, heating_coeff, cooling_coeff)?;

    Ok(DemandFit {
        regression: DemandRegression { country: observed.country.clone(), baseline, heating_coeff, cooling_coeff },
        diagnostics: FitDiagnostics {
            intercept,
            raw_heating_coeff: bh,
            raw_cooling_coeff: bc,
            heating_se: (sigma2 * ih).sqrt(),
            cooling_se: (sigma2 * ic).sqrt(),
            residual_std: sigma2.sqrt(),
            n_days,
            singular,
        },
    })
}

/// Per-step-of-year mean of demand after removing the degree-day component.
fn baseline_profile<T: Scalar>(
    observed: &DemandSeries<T>,
    hdd: &[T],
    cdd: &[T],
    heating_coeff: T,
    cooling_coeff: T,
) -> Result<Vec<T>, DemandError> {
    let time = observed.time;
    let per_step = T::from_count(STEPS_PER_DAY);
    let mut profile = vec![T::zero(); time.steps_per_year];
    for (t, &v) in observed.values.iter().enumerate() {
        let d = time.day_of(t);
        profile[time.step_of_year(t)] += v - (heating_coeff * hdd[d] + cooling_coeff * cdd[d]) / per_step;
    }
    let years = T::from_count(time.n_years());
    for (step, p) in profile.iter_mut().enumerate() {
        *p /= years;
        if !(*p > T::zero()) {
            return Err(DemandError::NonPositiveBaseline { country: observed.country.clone(), step });
        }
    }
    Ok(profile)
}

/// Demand on `time` from scenario degree days.
pub fn synthesize_demand<T: Scalar>(
    regression: &DemandRegression<T>,
    hdd: &[T],
    cdd: &[T],
    time: TimeAxis,
) -> Result<DemandSeries<T>, DemandError> {
    if !time.is_whole_years() {
        return Err(DemandError::NotWholeYears(time.n_steps));
    }
    if time.steps_per_year != regression.baseline.len() {
        return Err(DemandError::AxisMismatch(format!(
            "baseline has {} steps per year, axis {}",
            regression.baseline.len(),
            time.steps_per_year
        )));
    }
    if hdd.len() != time.n_days() || cdd.len() != time.n_days() {
        return Err(DemandError::AxisMismatch(format!(
            "{} days on the axis but {} HDD and {} CDD values",
            time.n_days(),
            hdd.len(),
            cdd.len()
        )));
    }
    let per_step = T::from_count(STEPS_PER_DAY);
    let values = (0..time.n_steps)
        .map(|t| {
            let d = time.day_of(t);
            let dd = (regression.heating_coeff * hdd[d] + regression.cooling_coeff * cdd[d]) / per_step;
            (regression.baseline[time.step_of_year(t)] + dd).max(T::zero())
        })
        .collect();
    DemandSeries::new(regression.country.clone(), time, values)
}

/// Loads `country,time_index,mwh`; every country must cover the same contiguous steps.
pub fn load_demand_file<T: Scalar>(
    path: impl AsRef<Path>,
    start_year: i32,
) -> Result<BTreeMap<String, DemandSeries<T>>, DemandError> {
    let mut rdr = csv_reader(BufReader::with_capacity(1 << 20, File::open(path).map_err(WeatherError::from)?));
    let mut record = csv::ByteRecord::new();
    let mut rows: BTreeMap<String, Vec<Option<T>>> = BTreeMap::new();
    let mut line = 0;
    while rdr.read_byte_record(&mut record).map_err(csv_error)? {
        line += 1;
        if line == 1 {
            expect_header(&record, &["country", "time_index", "mwh"], line)?;
            continue;
        }
        if record.len() != 3 {
            return Err(malformed(line, format!("expected 3 fields, found {}", record.len())).into());
        }
        let country = String::from_utf8_lossy(&record[0]).trim().to_string();
        let idx: usize = parse_field(&record[1], line, "time_index")?;
        let value: T = parse_field(&record[2], line, "mwh")?;
        let slot = rows.entry(country).or_default();
        if slot.len() <= idx {
            slot.resize(idx + 1, None);
        }
        if slot[idx].replace(value).is_some() {
            return Err(malformed(line, format!("duplicate time_index {idx}")).into());
        }
    }
    if rows.is_empty() {
        return Err(malformed(1, "no demand rows").into());
    }
    let n_steps = rows.values().map(Vec::len).max().unwrap_or(0);
    let mut out = BTreeMap::new();
    for (country, slots) in rows {
        if slots.len() != n_steps {
            return Err(WeatherError::TimeAxisGap(format!("{country}: demand ends at step {} of {n_steps}", slots.len())).into());
        }
        if let Some(gap) = slots.iter().position(Option::is_none) {
            return Err(WeatherError::TimeAxisGap(format!("{country}: no demand for time_index {gap}")).into());
        }
        let values = slots.into_iter().map(|v| v.unwrap()).collect();
        let series = DemandSeries::new(country.clone(), TimeAxis::new(start_year, n_steps), values)?;
        out.insert(country, series);
    }
    Ok(out)
}

pub fn write_demand_file<'a, T: Scalar>(
    path: impl AsRef<Path>,
    series: impl IntoIterator<Item = &'a DemandSeries<T>>,
) -> std::io::Result<()> {
    let mut w = BufWriter::with_capacity(1 << 20, File::create(path)?);
    writeln!(w, "country,time_index,mwh")?;
    for s in series {
        for (t, v) in s.values.iter().enumerate() {
            writeln!(w, "{},{t},{v}", s.country)?;
        }
    }
    w.flush()
}

/// Writes `country,heating_coeff,cooling_coeff` and the baseline profile
/// file `country,step_of_year,mwh`.
pub fn write_regressions<'a, T: Scalar>(
    coeff_path: impl AsRef<Path>,
    baseline_path: impl AsRef<Path>,
    regressions: impl IntoIterator<Item = &'a DemandRegression<T>> + Clone,
) -> std::io::Result<()> {
    let mut w = BufWriter::new(File::create(coeff_path)?);
    writeln!(w, "country,heating_coeff,cooling_coeff")?;
    for r in regressions.clone() {
        writeln!(w, "{},{},{}", r.country, r.heating_coeff, r.cooling_coeff)?;
    }
    w.flush()?;
    let mut w = BufWriter::new(File::create(baseline_path)?);
    writeln!(w, "country,step_of_year,mwh")?;
    for r in regressions {
        for (s, v) in r.baseline.iter().enumerate() {
            writeln!(w, "{},{s},{v}", r.country)?;
        }
    }
    w.flush()
}
