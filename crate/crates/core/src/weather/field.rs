use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use super::{
    csv_error, csv_reader, expect_header, malformed, parse_field, CountrySeries, CountryWeights, GridDefinition, Result,
    TimeAxis, WeatherError, STEPS_PER_YEAR,
};
use crate::Scalar;

/// Climate variable carried by a field file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Variable {
    /// Near-surface wind speed, m/s.
    WindSpeed,
    /// Incident irradiance, W/m².
    Irradiance,
    /// Near-surface air temperature, °C.
    Temperature,
}

impl Variable {
    pub fn tag(self) -> &'static str {
        match self {
            Variable::WindSpeed => "wind_speed",
            Variable::Irradiance => "irradiance",
            Variable::Temperature => "temperature",
        }
    }

    pub fn from_tag(tag: &str) -> Option<Self> {
        match tag {
            "wind_speed" => Some(Variable::WindSpeed),
            "irradiance" => Some(Variable::Irradiance),
            "temperature" => Some(Variable::Temperature),
            _ => None,
        }
    }

    /// Physical validity of a single value.
    pub fn admits(self, v: f64) -> bool {
        v.is_finite()
            && match self {
                Variable::WindSpeed | Variable::Irradiance => v >= 0.0,
                Variable::Temperature => (-90.0..=60.0).contains(&v),
            }
    }
}

impl fmt::Display for Variable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

/// Gridded time series of one variable, stored time-major
/// (`values[step * cell_count + cell]`).
#[derive(Debug, Clone, PartialEq)]
pub struct FieldSeries<T: Scalar = f64> {
    variable: Variable,
    grid: GridDefinition,
    time: TimeAxis,
    values: Vec<T>,
}

impl<T: Scalar> FieldSeries<T> {
    pub fn new(variable: Variable, grid: GridDefinition, time: TimeAxis, values: Vec<T>) -> Result<Self> {
        let cells = grid.cell_count();
        if values.len() != time.n_steps * cells {
            return Err(WeatherError::GridMismatch(format!(
                "{} values for {} steps x {} cells",
                values.len(),
                time.n_steps,
                cells
            )));
        }
        if let Some(idx) = values.iter().position(|v| !variable.admits(v.as_f64())) {
            return Err(WeatherError::OutOfRangeValue {
                variable: variable.tag().to_string(),
                time_index: idx / cells,
                cell: idx % cells,
                value: values[idx].as_f64(),
            });
        }
        Ok(Self { variable, grid, time, values })
    }

    pub fn variable(&self) -> Variable {
        self.variable
    }

    pub fn grid(&self) -> &GridDefinition {
        &self.grid
    }

    pub fn time(&self) -> TimeAxis {
        self.time
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn value(&self, step: usize, cell: usize) -> T {
        self.values[step * self.grid.cell_count() + cell]
    }

    /// All cells at one step.
    pub fn step(&self, step: usize) -> &[T] {
        let c = self.grid.cell_count();
        &self.values[step * c..(step + 1) * c]
    }

    pub fn cell_series(&self, cell: usize) -> Vec<T> {
        (0..self.time.n_steps).map(|t| self.value(t, cell)).collect()
    }

    /// True when both fields share grid and time axis.
    pub fn aligned_with<U: Scalar>(&self, other: &FieldSeries<U>) -> bool {
        self.time == other.time && self.grid == other.grid
    }
}

fn parse_preamble(line: &str) -> Result<(Variable, TimeAxis, usize)> {
    let body = line
        .trim()
        .strip_prefix('#')
        .ok_or_else(|| malformed(1, "missing '# variable=...' metadata preamble"))?;
    let mut variable = None;
    let mut start_year = None;
    let mut steps_per_year = None;
    let mut n_steps = None;
    let mut cells = None;
    for token in body.split_whitespace() {
        let (key, value) = token.split_once('=').ok_or_else(|| malformed(1, format!("bad metadata token {token:?}")))?;
        let bad = || malformed(1, format!("bad metadata value {token:?}"));
        match key {
            "variable" => variable = Some(value.to_string()),
            "start_year" => start_year = Some(value.parse::<i32>().map_err(|_| bad())?),
            "steps_per_year" => steps_per_year = Some(value.parse::<usize>().map_err(|_| bad())?),
            "n_steps" => n_steps = Some(value.parse::<usize>().map_err(|_| bad())?),
            "cells" => cells = Some(value.parse::<usize>().map_err(|_| bad())?),
            _ => return Err(malformed(1, format!("unknown metadata key {key:?}"))),
        }
    }
    let missing = |k: &str| malformed(1, format!("metadata key {k} missing"));
    let tag = variable.ok_or_else(|| missing("variable"))?;
    let variable = Variable::from_tag(&tag).ok_or_else(|| malformed(1, format!("unknown variable {tag:?}")))?;
    let steps_per_year = steps_per_year.ok_or_else(|| missing("steps_per_year"))?;
    if steps_per_year != STEPS_PER_YEAR {
        return Err(WeatherError::TimeAxisGap(format!(
            "steps_per_year={steps_per_year}; only uniform 3-hourly no-leap axes ({STEPS_PER_YEAR}) are supported"
        )));
    }
    let n_steps = n_steps.ok_or_else(|| missing("n_steps"))?;
    if n_steps == 0 {
        return Err(malformed(1, "n_steps must be positive"));
    }
    let time = TimeAxis { start_year: start_year.ok_or_else(|| missing("start_year"))?, steps_per_year, n_steps };
    Ok((variable, time, cells.ok_or_else(|| missing("cells"))?))
}

/// Loads a field file against an already loaded grid.
pub fn load_field_series<T: Scalar>(
    path: impl AsRef<Path>,
    grid: &GridDefinition,
    variable: Variable,
) -> Result<FieldSeries<T>> {
    let mut reader = BufReader::with_capacity(1 << 20, File::open(path)?);
    let mut first = String::new();
    reader.read_line(&mut first)?;
    let (declared, time, cells) = parse_preamble(&first)?;
    if declared != variable {
        return Err(WeatherError::VariableMismatch {
            expected: variable.tag().to_string(),
            found: declared.tag().to_string(),
        });
    }
    if cells != grid.cell_count() {
        return Err(WeatherError::GridMismatch(format!(
            "file declares {cells} cells, grid has {}",
            grid.cell_count()
        )));
    }

    let total = time.n_steps * cells;
    let mut values = vec![T::zero(); total];
    let mut filled = vec![false; total];
    let mut rdr = csv_reader(reader);
    let mut record = csv::ByteRecord::new();
    let mut line = 1;
    while rdr.read_byte_record(&mut record).map_err(csv_error)? {
        line += 1;
        if line == 2 {
            expect_header(&record, &["time_index", "cell_id", "value"], line)?;
            continue;
        }
        if record.len() != 3 {
            return Err(malformed(line, format!("expected 3 fields, found {}", record.len())));
        }
        let time_index: usize = parse_field(&record[0], line, "time_index")?;
        let cell: usize = parse_field(&record[1], line, "cell_id")?;
        if time_index >= time.n_steps {
            return Err(WeatherError::TimeAxisGap(format!(
                "time_index {time_index} outside declared axis of {} steps (line {line})",
                time.n_steps
            )));
        }
        if cell >= cells {
            return Err(WeatherError::UnknownCell(cell));
        }
        let raw = std::str::from_utf8(&record[2]).map(str::trim).unwrap_or("");
        let value: T = match raw.parse() {
            Ok(v) if T::is_finite(v) => v,
            _ if raw.is_empty() || raw.eq_ignore_ascii_case("nan") || raw.eq_ignore_ascii_case("na") => {
                return Err(WeatherError::MissingValue { time_index, cell })
            }
            _ => return Err(malformed(line, format!("cannot parse value {raw:?}"))),
        };
        if !variable.admits(value.as_f64()) {
            return Err(WeatherError::OutOfRangeValue {
                variable: variable.tag().to_string(),
                time_index,
                cell,
                value: value.as_f64(),
            });
        }
        let idx = time_index * cells + cell;
        if filled[idx] {
            return Err(WeatherError::DuplicateRecord { time_index, cell });
        }
        filled[idx] = true;
        values[idx] = value;
    }
    if line < 2 {
        return Err(malformed(2, "missing header"));
    }

    let step_has_records = |s: usize| filled[s * cells..(s + 1) * cells].iter().any(|&f| f);
    if time.n_steps > 0 && !step_has_records(time.n_steps - 1) {
        let end = (0..time.n_steps).rev().find(|&s| step_has_records(s)).map_or(0, |s| s + 1);
        return Err(WeatherError::TimeAxisGap(format!("records end at step {end} of {} declared", time.n_steps)));
    }
    if let Some(idx) = filled.iter().position(|f| !f) {
        let step = idx / cells;
        let whole_step_missing = filled[step * cells..(step + 1) * cells].iter().all(|f| !f);
        if whole_step_missing {
            let next = (step..time.n_steps).find(|&s| step_has_records(s)).expect("the last step has records");
            return Err(WeatherError::TimeAxisGap(format!("no records for time steps {step}..{next}")));
        }
        return Err(WeatherError::MissingValue { time_index: step, cell: idx % cells });
    }
    FieldSeries::new(variable, grid.clone(), time, values)
}

pub fn write_field_series<T: Scalar>(path: impl AsRef<Path>, field: &FieldSeries<T>) -> Result<()> {
    let mut w = BufWriter::with_capacity(1 << 20, File::create(path)?);
    let time = field.time();
    let cells = field.grid().cell_count();
    writeln!(
        w,
        "# variable={} start_year={} steps_per_year={} n_steps={} cells={}",
        field.variable(),
        time.start_year,
        time.steps_per_year,
        time.n_steps,
        cells
    )?;
    writeln!(w, "time_index,cell_id,value")?;
    for t in 0..time.n_steps {
        for (c, v) in field.step(t).iter().enumerate() {
            writeln!(w, "{t},{c},{v}")?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Weighted country aggregate: `out(t) = Σ_cells weight(cell) · field(t, cell)`.
pub fn aggregate_to_country<T: Scalar>(field: &FieldSeries<T>, weights: &CountryWeights<T>) -> Result<CountrySeries<T>> {
    if let Some(&(cell, _)) = weights.entries().iter().find(|(cell, _)| !field.grid().contains(*cell)) {
        return Err(WeatherError::UnknownCell(cell));
    }
    let values = (0..field.time().n_steps)
        .map(|t| {
            let row = field.step(t);
            weights.entries().iter().map(|&(cell, w)| w * row[cell]).sum()
        })
        .collect();
    Ok(CountrySeries { country: weights.country().to_string(), time: field.time(), values })
}
