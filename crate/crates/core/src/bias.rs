//! Distribution-matching bias adjustment of capacity factors.
//!
//! A single multiplicative scale on the conversion driver (wind speed or
//! irradiance) is chosen so the histogram of the resulting capacity factors is
//! closest, in relative entropy, to a reference histogram. Fitting happens on
//! the historical period only; the fitted scale is then applied unchanged to
//! every scenario.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use thiserror::Error;

use crate::convert::{CapacityFactorSeries, CountryConversion, Technology};
use crate::weather::{csv_error, csv_reader, expect_header, malformed, parse_field, WeatherError};
use crate::Scalar;

/// Additive per-bin smoothing applied to empirical histograms.
pub const HISTOGRAM_SMOOTHING: f64 = 1e-9;
pub const DEFAULT_BINS: usize = 100;

#[derive(Debug, Error)]
pub enum BiasError {
    #[error("cannot build a histogram from no values")]
    EmptyInput,
    #[error("histogram needs at least 2 bins, got {0}")]
    TooFewBins(usize),
    #[error("value {0} outside [0, 1]")]
    OutOfRange(f64),
    #[error("histogram masses invalid: {0}")]
    InvalidMasses(String),
    #[error("histograms differ in binning ({0} vs {1} bins)")]
    BinMismatch(usize, usize),
    #[error("scale search grid is empty")]
    SearchGridEmpty,
    #[error("invalid scale search grid: {0}")]
    InvalidGrid(String),
    #[error("no reference samples for {country}/{technology}")]
    MissingReference { country: String, technology: Technology },
    #[error(transparent)]
    File(#[from] WeatherError),
}

/// Probability masses over a uniform partition of [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct CfHistogram<T: Scalar = f64> {
    masses: Vec<T>,
}

impl<T: Scalar> CfHistogram<T> {
    /// Histogram from explicit masses (non-negative, summing to 1).
    pub fn from_masses(masses: Vec<T>) -> Result<Self, BiasError> {
        if masses.len() < 2 {
            return Err(BiasError::TooFewBins(masses.len()));
        }
        if masses.iter().any(|m| !(*m >= T::zero())) {
            return Err(BiasError::InvalidMasses("negative or non-finite mass".into()));
        }
        let sum: T = masses.iter().copied().sum();
        let tol = 1e-9_f64.max(T::epsilon().as_f64() * 4.0 * masses.len() as f64);
        if (sum.as_f64() - 1.0).abs() > tol {
            return Err(BiasError::InvalidMasses(format!("masses sum to {sum}")));
        }
        Ok(Self { masses })
    }

    pub fn bin_count(&self) -> usize {
        self.masses.len()
    }

    pub fn masses(&self) -> &[T] {
        &self.masses
    }

    /// Bin edges `0, 1/n, …, 1`.
    pub fn edges(&self) -> Vec<T> {
        let n = T::from_count(self.bin_count());
        (0..=self.bin_count()).map(|i| T::from_count(i) / n).collect()
    }
}

/// Bin index of `v` in `[0, 1]`: right-open bins, the last one closed at 1.
fn bin_of<T: Scalar>(v: T, bins: usize) -> usize {
    let i = (v * T::from_count(bins)).floor().to_usize().unwrap_or(0);
    i.min(bins - 1)
}

/// Empirical histogram of capacity factors with additive smoothing.
pub fn histogram<T: Scalar>(values: &[T], bin_count: usize) -> Result<CfHistogram<T>, BiasError> {
    if bin_count < 2 {
        return Err(BiasError::TooFewBins(bin_count));
    }
    if values.is_empty() {
        return Err(BiasError::EmptyInput);
    }
    let mut counts = vec![0usize; bin_count];
    for &v in values {
        if !(v >= T::zero() && v <= T::one()) {
            return Err(BiasError::OutOfRange(v.as_f64()));
        }
        counts[bin_of(v, bin_count)] += 1;
    }
    let n = T::from_count(values.len());
    let eps = T::lit(HISTOGRAM_SMOOTHING);
    let norm = T::one() + eps * T::from_count(bin_count);
    Ok(CfHistogram { masses: counts.into_iter().map(|c| (T::from_count(c) / n + eps) / norm).collect() })
}

/// Kullback-Leibler divergence `D(P‖Q) = Σ p ln(p/q)` in nats.
pub fn relative_entropy<T: Scalar>(p: &CfHistogram<T>, q: &CfHistogram<T>) -> Result<T, BiasError> {
    if p.bin_count() != q.bin_count() {
        return Err(BiasError::BinMismatch(p.bin_count(), q.bin_count()));
    }
    let d: T = p
        .masses
        .iter()
        .zip(&q.masses)
        .filter(|(pi, _)| **pi > T::zero())
        .map(|(&pi, &qi)| pi * (pi / qi).ln())
        .sum();
    Ok(d.max(T::zero()))
}

/// Scale candidates `numerator / denominator` for numerators in `[first, last]`.
///
/// Keeping the candidates rational avoids drift from repeated addition of a
/// step such as 0.01.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ScaleGrid {
    first: i64,
    last: i64,
    denominator: u32,
}

impl ScaleGrid {
    /// Grid from `lo` to `hi` (inclusive) in steps of `step`; `1/step` must be an integer.
    pub fn new(lo: f64, hi: f64, step: f64) -> Result<Self, BiasError> {
        if !(step > 0.0 && lo > 0.0 && lo.is_finite() && hi.is_finite()) {
            return Err(BiasError::InvalidGrid(format!("lo={lo}, hi={hi}, step={step}")));
        }
        let inv = 1.0 / step;
        let denominator = inv.round();
        if (inv - denominator).abs() > 1e-6 * inv || denominator > u32::MAX as f64 {
            return Err(BiasError::InvalidGrid(format!("1/step must be an integer, step={step}")));
        }
        let first = (lo * denominator).round() as i64;
        let last = (hi * denominator).round() as i64;
        Ok(Self { first, last, denominator: denominator as u32 })
    }

    pub fn len(&self) -> usize {
        if self.last < self.first {
            0
        } else {
            (self.last - self.first + 1) as usize
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn points<T: Scalar>(&self) -> Vec<T> {
        let d = T::lit(self.denominator as f64);
        (self.first..=self.last).map(|k| T::lit(k as f64) / d).collect()
    }
}

impl Default for ScaleGrid {
    /// 0.50, 0.51, …, 2.00.
    fn default() -> Self {
        Self { first: 50, last: 200, denominator: 100 }
    }
}

/// Fitted driver scale for one country and technology.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BiasTransform<T: Scalar = f64> {
    pub technology: Technology,
    pub scale: T,
    /// Relative entropy to the reference at the fitted scale, nats.
    pub fitted_divergence: T,
}

/// Grid search for the scale minimizing `D(hist(convert(scale)) ‖ reference)`.
///
/// `convert` maps a driver scale to capacity factors. Ties go to the scale
/// nearest 1, then to the smaller scale.
pub fn fit_bias_transform<T, F>(
    technology: Technology,
    convert: F,
    reference: &CfHistogram<T>,
    grid: &ScaleGrid,
) -> Result<BiasTransform<T>, BiasError>
where
    T: Scalar,
    F: Fn(T) -> Vec<T>,
{
    if grid.is_empty() {
        return Err(BiasError::SearchGridEmpty);
    }
    let mut best: Option<(T, T)> = None;
    for scale in grid.points::<T>() {
        let produced = histogram(&convert(scale), reference.bin_count())?;
        let d = relative_entropy(&produced, reference)?;
        let better = match best {
            None => true,
            Some((bs, bd)) => {
                d < bd || (d == bd && ((scale - T::one()).abs(), scale) < ((bs - T::one()).abs(), bs))
            }
        };
        if better {
            best = Some((scale, d));
        }
    }
    let (scale, fitted_divergence) = best.expect("non-empty grid");
    Ok(BiasTransform { technology, scale, fitted_divergence })
}

/// Capacity factors from the driver rescaled by a previously fitted transform.
pub fn apply_bias_transform<T: Scalar>(conversion: &CountryConversion<T>, transform: &BiasTransform<T>) -> CapacityFactorSeries<T> {
    conversion.capacity_factor(transform.scale)
}

/// Reference capacity-factor samples keyed by (country, technology).
pub type ReferenceSamples<T = f64> = BTreeMap<(String, Technology), Vec<T>>;

pub fn load_reference_samples<T: Scalar>(path: impl AsRef<Path>) -> Result<ReferenceSamples<T>, BiasError> {
    let mut rdr = csv_reader(BufReader::with_capacity(1 << 20, File::open(path).map_err(WeatherError::from)?));
    let mut record = csv::ByteRecord::new();
    let mut out: ReferenceSamples<T> = BTreeMap::new();
    let mut line = 0;
    while rdr.read_byte_record(&mut record).map_err(csv_error)? {
        line += 1;
        if line == 1 {
            expect_header(&record, &["country", "technology", "value"], line)?;
            continue;
        }
        if record.len() != 3 {
            return Err(malformed(line, format!("expected 3 fields, found {}", record.len())).into());
        }
        let country = String::from_utf8_lossy(&record[0]).trim().to_string();
        let tech = String::from_utf8_lossy(&record[1]);
        let technology = Technology::from_tag(tech.trim())
            .ok_or_else(|| malformed(line, format!("unknown technology {tech:?}")))?;
        let value: T = parse_field(&record[2], line, "value")?;
        if !(value >= T::zero() && value <= T::one()) {
            return Err(malformed(line, format!("capacity factor {value} outside [0, 1]")).into());
        }
        out.entry((country, technology)).or_default().push(value);
    }
    if line == 0 {
        return Err(malformed(1, "empty file").into());
    }
    Ok(out)
}

pub fn write_reference_samples<T: Scalar>(path: impl AsRef<Path>, samples: &ReferenceSamples<T>) -> Result<(), BiasError> {
    let io = |e: std::io::Error| BiasError::File(e.into());
    let mut w = BufWriter::with_capacity(1 << 20, File::create(path).map_err(io)?);
    writeln!(w, "country,technology,value").map_err(io)?;
    for ((country, tech), values) in samples {
        for v in values {
            writeln!(w, "{country},{tech},{v}").map_err(io)?;
        }
    }
    w.flush().map_err(io)
}

/// Fitted transforms keyed by (country, technology).
pub type TransformTable<T = f64> = BTreeMap<(String, Technology), BiasTransform<T>>;

pub fn write_transforms<T: Scalar>(path: impl AsRef<Path>, table: &TransformTable<T>) -> std::io::Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "country,technology,scale,divergence")?;
    for ((country, tech), t) in table {
        writeln!(w, "{country},{tech},{},{}", t.scale, t.fitted_divergence)?;
    }
    w.flush()
}

pub fn load_transforms<T: Scalar>(path: impl AsRef<Path>) -> Result<TransformTable<T>, BiasError> {
    let mut rdr = csv_reader(BufReader::new(File::open(path).map_err(WeatherError::from)?));
    let mut record = csv::ByteRecord::new();
    let mut out = BTreeMap::new();
    let mut line = 0;
    while rdr.read_byte_record(&mut record).map_err(csv_error)? {
        line += 1;
        if line == 1 {
            expect_header(&record, &["country", "technology", "scale", "divergence"], line)?;
            continue;
        }
        if record.len() != 4 {
            return Err(malformed(line, format!("expected 4 fields, found {}", record.len())).into());
        }
        let country = String::from_utf8_lossy(&record[0]).trim().to_string();
        let tech = String::from_utf8_lossy(&record[1]);
        let technology = Technology::from_tag(tech.trim())
            .ok_or_else(|| malformed(line, format!("unknown technology {tech:?}")))?;
        let scale = parse_field(&record[2], line, "scale")?;
        let fitted_divergence = parse_field(&record[3], line, "divergence")?;
        out.insert((country, technology), BiasTransform { technology, scale, fitted_divergence });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn simple_histograms() {
        let h = histogram::<f64>(&[0.0, 0.0, 0.0], 2).unwrap();
        assert!((h.masses()[0] - 1.0).abs() < 1e-8 && h.masses()[1] < 1e-8);
        let h = histogram::<f64>(&[0.1, 0.9], 2).unwrap();
        assert!((h.masses()[0] - 0.5).abs() < 1e-12 && (h.masses()[1] - 0.5).abs() < 1e-12);
        let h = histogram::<f64>(&[1.0, 0.5], 2).unwrap();
        assert!((h.masses()[1] - 1.0).abs() < 1e-8, "1.0 and 0.5 both land in the closed last bin");
        assert!(matches!(histogram::<f64>(&[], 2), Err(BiasError::EmptyInput)));
        assert!(matches!(histogram(&[0.5], 1), Err(BiasError::TooFewBins(1))));
        assert!(matches!(histogram(&[1.5], 4), Err(BiasError::OutOfRange(_))));
        assert_eq!(h.edges(), vec![0.0, 0.5, 1.0]);
    }

    #[test]
    fn uniform_samples_spread_evenly() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let v: Vec<f64> = (0..10_000).map(|_| rng.random::<f64>()).collect();
        let h = histogram(&v, 10).unwrap();
        assert!(h.masses().iter().all(|m| (m - 0.1).abs() < 0.05));
        let total: f64 = h.masses().iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn divergence_values() {
        let p = CfHistogram::<f64>::from_masses(vec![0.5, 0.5]).unwrap();
        let q = CfHistogram::<f64>::from_masses(vec![0.25, 0.75]).unwrap();
        assert!(relative_entropy(&p, &p).unwrap().abs() < 1e-12);
        // 0.5 ln 2 + 0.5 ln(2/3), evaluated at 40 digits
        let oracle = 0.143_841_036_225_890_463_719_609_502_996_913_715_75;
        assert!((relative_entropy(&p, &q).unwrap() - oracle).abs() < 1e-12);
        let zero_p = CfHistogram::from_masses(vec![0.0, 1.0]).unwrap();
        assert!((relative_entropy(&zero_p, &q).unwrap() - (1.0f64 / 0.75).ln()).abs() < 1e-15);
        let r = CfHistogram::from_masses(vec![0.2, 0.3, 0.5]).unwrap();
        assert!(matches!(relative_entropy(&p, &r), Err(BiasError::BinMismatch(2, 3))));
    }

    #[test]
    fn gibbs_inequality() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..1000 {
            let n = rng.random_range(2..20);
            let mk = |rng: &mut ChaCha8Rng| {
                let raw: Vec<f64> = (0..n).map(|_| rng.random::<f64>() + 1e-6).collect();
                let s: f64 = raw.iter().sum();
                CfHistogram::from_masses(raw.iter().map(|r| r / s).collect()).unwrap()
            };
            let (p, q) = (mk(&mut rng), mk(&mut rng));
            assert!(relative_entropy(&p, &q).unwrap() >= 0.0);
        }
    }

    #[test]
    fn scale_grid() {
        let g = ScaleGrid::default();
        assert_eq!(g.len(), 151);
        let pts = g.points::<f64>();
        assert_eq!(pts[0], 0.5);
        assert_eq!(pts[75], 1.25);
        assert_eq!(pts[50], 1.0);
        assert_eq!(*pts.last().unwrap(), 2.0);
        assert_eq!(ScaleGrid::new(0.5, 2.0, 0.01).unwrap(), g);
        assert!(ScaleGrid::new(0.5, 2.0, 0.03).is_err());
        assert!(ScaleGrid::new(2.0, 1.0, 0.01).unwrap().is_empty());
    }

    fn ramp(scale: f64, base: &[f64]) -> Vec<f64> {
        base.iter().map(|b| (b * scale).min(1.0)).collect()
    }

    #[test]
    fn fit_self_match_and_planted_scale() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let base: Vec<f64> = (0..5000).map(|_| rng.random::<f64>() * 0.7).collect();
        let grid = ScaleGrid::default();
        let reference = histogram(&ramp(1.0, &base), DEFAULT_BINS).unwrap();
        let t = fit_bias_transform(Technology::Solar, |s| ramp(s, &base), &reference, &grid).unwrap();
        assert_eq!(t.scale, 1.0);
        assert_eq!(t.fitted_divergence, 0.0);

        let reference = histogram(&ramp(1.25, &base), DEFAULT_BINS).unwrap();
        let t = fit_bias_transform(Technology::Solar, |s| ramp(s, &base), &reference, &grid).unwrap();
        assert_eq!(t.scale, 1.25);

        let empty = ScaleGrid::new(2.0, 1.0, 0.01).unwrap();
        assert!(matches!(
            fit_bias_transform(Technology::Solar, |s| ramp(s, &base), &reference, &empty),
            Err(BiasError::SearchGridEmpty)
        ));
    }

    #[test]
    fn ties_prefer_scale_near_one() {
        // constant output: every scale gives the same histogram
        let reference = histogram(&[0.3; 10], 10).unwrap();
        let t = fit_bias_transform(Technology::Wind, |_| vec![0.7; 10], &reference, &ScaleGrid::default()).unwrap();
        assert_eq!(t.scale, 1.0);
        let grid = ScaleGrid::new(1.1, 1.5, 0.1).unwrap();
        let t = fit_bias_transform(Technology::Wind, |_| vec![0.7; 10], &reference, &grid).unwrap();
        assert_eq!(t.scale, 1.1);
    }
}
