//! Loading, validation and country aggregation of gridded climate fields.
//!
//! Three CSV formats are understood:
//!
//! * grid file, header `cell_id,lat,lon`;
//! * field file, a `# variable=<tag> start_year=<Y> steps_per_year=2920 n_steps=<N> cells=<C>`
//!   preamble followed by header `time_index,cell_id,value`;
//! * weights file, header `country,cell_id,weight`.

mod field;
mod grid;
mod time;
mod weights;

use thiserror::Error;

pub use field::{aggregate_to_country, load_field_series, write_field_series, FieldSeries, Variable};
pub use grid::{load_grid_definition, write_grid_definition, GridCell, GridDefinition};
pub use time::{TimeAxis, STEPS_PER_DAY, STEPS_PER_YEAR, STEP_HOURS};
pub use weights::{
    load_weight_table, write_weight_table, CountrySeries, CountryWeights, WeightTable,
    EUROPEAN_COUNTRIES, WEIGHT_SUM_TOLERANCE,
};

#[derive(Debug, Error)]
pub enum WeatherError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed file at line {line}: {reason}")]
    MalformedFile { line: usize, reason: String },
    #[error("duplicate cell id {0}")]
    DuplicateCell(usize),
    #[error("cell ids must be contiguous from 0; cell {0} is missing")]
    NonContiguousCells(usize),
    #[error("coordinate out of range for cell {cell}: lat={lat}, lon={lon}")]
    OutOfRangeCoordinate { cell: usize, lat: f64, lon: f64 },
    #[error("variable mismatch: expected {expected}, file declares {found}")]
    VariableMismatch { expected: String, found: String },
    #[error("missing value at time_index {time_index}, cell {cell}")]
    MissingValue { time_index: usize, cell: usize },
    #[error("time axis gap: {0}")]
    TimeAxisGap(String),
    #[error("duplicate record at time_index {time_index}, cell {cell}")]
    DuplicateRecord { time_index: usize, cell: usize },
    #[error("value {value} at time_index {time_index}, cell {cell} outside valid range for {variable}")]
    OutOfRangeValue { variable: String, time_index: usize, cell: usize, value: f64 },
    #[error("unknown cell id {0}")]
    UnknownCell(usize),
    #[error("invalid country code {0:?}")]
    InvalidCountry(String),
    #[error("negative weight {weight} for country {country}, cell {cell}")]
    NegativeWeight { country: String, cell: usize, weight: f64 },
    #[error("weights of country {country} sum to {sum}, expected 1")]
    WeightSum { country: String, sum: f64 },
    #[error("grid/field mismatch: {0}")]
    GridMismatch(String),
}

impl WeatherError {
    /// Variant name, used to label validation findings.
    pub fn kind(&self) -> &'static str {
        match self {
            Self::Io(_) => "Io",
            Self::MalformedFile { .. } => "MalformedFile",
            Self::DuplicateCell(_) => "DuplicateCell",
            Self::NonContiguousCells(_) => "NonContiguousCells",
            Self::OutOfRangeCoordinate { .. } => "OutOfRangeCoordinate",
            Self::VariableMismatch { .. } => "VariableMismatch",
            Self::MissingValue { .. } => "MissingValue",
            Self::TimeAxisGap(_) => "TimeAxisGap",
            Self::DuplicateRecord { .. } => "DuplicateRecord",
            Self::OutOfRangeValue { .. } => "OutOfRangeValue",
            Self::UnknownCell(_) => "UnknownCell",
            Self::InvalidCountry(_) => "InvalidCountry",
            Self::NegativeWeight { .. } => "NegativeWeight",
            Self::WeightSum { .. } => "WeightSum",
            Self::GridMismatch(_) => "GridMismatch",
        }
    }
}

pub type Result<T, E = WeatherError> = std::result::Result<T, E>;

pub(crate) fn malformed(line: usize, reason: impl Into<String>) -> WeatherError {
    WeatherError::MalformedFile { line, reason: reason.into() }
}

/// Parses one CSV field, mapping failure to `MalformedFile`.
pub(crate) fn parse_field<F: std::str::FromStr>(raw: &[u8], line: usize, what: &str) -> Result<F> {
    std::str::from_utf8(raw)
        .ok()
        .map(str::trim)
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| malformed(line, format!("cannot parse {what} from {:?}", String::from_utf8_lossy(raw))))
}

/// Checks that a CSV header row matches exactly.
pub(crate) fn expect_header(record: &csv::ByteRecord, expected: &[&str], line: usize) -> Result<()> {
    let found: Vec<String> = record.iter().map(|f| String::from_utf8_lossy(f).trim().to_string()).collect();
    if found.len() != expected.len() || found.iter().zip(expected).any(|(a, b)| a != b) {
        return Err(malformed(line, format!("expected header {}, found {}", expected.join(","), found.join(","))));
    }
    Ok(())
}

pub(crate) fn csv_reader<R: std::io::Read>(rdr: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new().has_headers(false).flexible(true).from_reader(rdr)
}

pub(crate) fn csv_error(err: csv::Error) -> WeatherError {
    let line = err.position().map(|p| p.line() as usize).unwrap_or(0);
    match err.into_kind() {
        csv::ErrorKind::Io(e) => WeatherError::Io(e),
        other => malformed(line, format!("{other:?}")),
    }
}
