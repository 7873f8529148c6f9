use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use super::{csv_error, csv_reader, expect_header, malformed, parse_field, GridDefinition, Result, TimeAxis, WeatherError};
use crate::Scalar;

/// Allowed deviation of a country's weight sum from 1.
pub const WEIGHT_SUM_TOLERANCE: f64 = 1e-9;

/// The 30 European countries of the default configuration.
pub const EUROPEAN_COUNTRIES: [&str; 30] = [
    "AT", "BA", "BE", "BG", "CH", "CZ", "DE", "DK", "EE", "ES", "FI", "FR", "GB", "GR", "HR", "HU", "IE", "IT", "LT",
    "LU", "LV", "NL", "NO", "PL", "PT", "RO", "RS", "SE", "SI", "SK",
];

/// A per-country time series on a [`TimeAxis`].
#[derive(Debug, Clone, PartialEq)]
pub struct CountrySeries<T: Scalar = f64> {
    pub country: String,
    pub time: TimeAxis,
    pub values: Vec<T>,
}

fn is_iso2(code: &str) -> bool {
    code.len() == 2 && code.bytes().all(|b| b.is_ascii_uppercase())
}

/// Convex weights mapping grid cells onto one country.
#[derive(Debug, Clone, PartialEq)]
pub struct CountryWeights<T: Scalar = f64> {
    country: String,
    entries: Vec<(usize, T)>,
}

impl<T: Scalar> CountryWeights<T> {
    pub fn new(country: impl Into<String>, mut entries: Vec<(usize, T)>) -> Result<Self> {
        let country = country.into();
        if !is_iso2(&country) {
            return Err(WeatherError::InvalidCountry(country));
        }
        if let Some(&(cell, w)) = entries.iter().find(|(_, w)| !(w.as_f64() >= 0.0)) {
            return Err(WeatherError::NegativeWeight { country, cell, weight: w.as_f64() });
        }
        entries.sort_by_key(|&(cell, _)| cell);
        if let Some(pair) = entries.windows(2).find(|p| p[0].0 == p[1].0) {
            return Err(WeatherError::DuplicateCell(pair[0].0));
        }
        let sum: f64 = entries.iter().map(|(_, w)| w.as_f64()).sum();
        let tol = WEIGHT_SUM_TOLERANCE.max(T::epsilon().as_f64() * 4.0 * entries.len() as f64);
        if entries.is_empty() || (sum - 1.0).abs() > tol {
            return Err(WeatherError::WeightSum { country, sum });
        }
        Ok(Self { country, entries })
    }

    /// Equal weights over `cells`.
    pub fn uniform(country: impl Into<String>, cells: &[usize]) -> Result<Self> {
        let w = T::one() / T::from_count(cells.len().max(1));
        Self::new(country, cells.iter().map(|&c| (c, w)).collect())
    }

    pub fn country(&self) -> &str {
        &self.country
    }

    pub fn entries(&self) -> &[(usize, T)] {
        &self.entries
    }

    pub fn check_grid(&self, grid: &GridDefinition) -> Result<()> {
        match self.entries.iter().find(|(cell, _)| !grid.contains(*cell)) {
            Some(&(cell, _)) => Err(WeatherError::UnknownCell(cell)),
            None => Ok(()),
        }
    }
}

/// Weights for every configured country, ordered by country code.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct WeightTable<T: Scalar = f64> {
    countries: BTreeMap<String, CountryWeights<T>>,
}

impl<T: Scalar> WeightTable<T> {
    pub fn new(weights: impl IntoIterator<Item = CountryWeights<T>>) -> Self {
        Self { countries: weights.into_iter().map(|w| (w.country.clone(), w)).collect() }
    }

    pub fn get(&self, country: &str) -> Option<&CountryWeights<T>> {
        self.countries.get(country)
    }

    pub fn countries(&self) -> impl Iterator<Item = &str> {
        self.countries.keys().map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = &CountryWeights<T>> {
        self.countries.values()
    }

    pub fn len(&self) -> usize {
        self.countries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.countries.is_empty()
    }
}

/// Raw weight rows grouped by country, before per-country validation.
fn read_weight_rows(path: &Path) -> Result<BTreeMap<String, Vec<(usize, f64)>>> {
    let mut rdr = csv_reader(BufReader::new(File::open(path)?));
    let mut record = csv::ByteRecord::new();
    let mut rows: BTreeMap<String, Vec<(usize, f64)>> = BTreeMap::new();
    let mut line = 0;
    while rdr.read_byte_record(&mut record).map_err(csv_error)? {
        line += 1;
        if line == 1 {
            expect_header(&record, &["country", "cell_id", "weight"], line)?;
            continue;
        }
        if record.len() != 3 {
            return Err(malformed(line, format!("expected 3 fields, found {}", record.len())));
        }
        let country = String::from_utf8_lossy(&record[0]).trim().to_string();
        let cell = parse_field(&record[1], line, "cell_id")?;
        let weight = parse_field(&record[2], line, "weight")?;
        rows.entry(country).or_default().push((cell, weight));
    }
    if line == 0 {
        return Err(malformed(1, "empty file"));
    }
    Ok(rows)
}

/// Loads a weights file and checks every country against `grid`.
pub fn load_weight_table<T: Scalar>(path: impl AsRef<Path>, grid: &GridDefinition) -> Result<WeightTable<T>> {
    let rows = read_weight_rows(path.as_ref())?;
    let mut table = Vec::with_capacity(rows.len());
    for (country, entries) in rows {
        let entries = entries.into_iter().map(|(c, w)| (c, T::lit(w))).collect();
        let weights = CountryWeights::new(country, entries)?;
        weights.check_grid(grid)?;
        table.push(weights);
    }
    Ok(WeightTable::new(table))
}

pub fn write_weight_table<T: Scalar>(path: impl AsRef<Path>, table: &WeightTable<T>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "country,cell_id,weight")?;
    for cw in table.iter() {
        for (cell, weight) in cw.entries() {
            writeln!(w, "{},{},{}", cw.country(), cell, weight)?;
        }
    }
    w.flush()?;
    Ok(())
}
