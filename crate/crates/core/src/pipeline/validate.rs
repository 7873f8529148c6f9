//! Input checks that report every problem instead of stopping at the first.

use std::collections::BTreeSet;
use std::fmt;
use std::path::{Path, PathBuf};

use super::config::RunConfig;
use crate::bias::{load_reference_samples, BiasError, ReferenceSamples};
use crate::convert::Technology;
use crate::demand::{load_demand_file, DemandError};
use crate::weather::{load_field_series, load_grid_definition, load_weight_table, TimeAxis, Variable, WeatherError};

#[derive(Debug, Clone, PartialEq)]
pub struct Finding {
    pub file: Option<PathBuf>,
    pub kind: String,
    pub message: String,
}

impl fmt::Display for Finding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.file {
            Some(p) => write!(f, "{}: {}: {}", p.display(), self.kind, self.message),
            None => write!(f, "{}: {}", self.kind, self.message),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub findings: Vec<Finding>,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.findings.is_empty()
    }

    fn push(&mut self, file: Option<&Path>, kind: impl Into<String>, message: impl Into<String>) {
        self.findings.push(Finding { file: file.map(Path::to_path_buf), kind: kind.into(), message: message.into() });
    }

    fn weather(&mut self, file: &Path, err: &WeatherError) {
        self.push(Some(file), err.kind(), err.to_string());
    }

    fn exists(&mut self, file: &Path) -> bool {
        if file.is_file() {
            true
        } else {
            self.push(Some(file), "MissingFile", "file does not exist");
            false
        }
    }
}

fn demand_kind(err: &DemandError) -> &'static str {
    match err {
        DemandError::File(w) => w.kind(),
        _ => "InvalidDemand",
    }
}

fn bias_kind(err: &BiasError) -> &'static str {
    match err {
        BiasError::File(w) => w.kind(),
        _ => "InvalidReference",
    }
}

/// Checks headers, axes, weight sums and cross-file consistency.
pub fn cmd_validate(cfg: &RunConfig) -> ValidationReport {
    let mut report = ValidationReport::default();
    for p in cfg.check_parameters() {
        report.push(None, "InvalidConfig", p);
    }

    let grid_path = &cfg.inputs.grid;
    let grid = if report.exists(grid_path) {
        match load_grid_definition(grid_path) {
            Ok(g) => Some(g),
            Err(e) => {
                report.weather(grid_path, &e);
                None
            }
        }
    } else {
        None
    };

    let weights_path = &cfg.inputs.weights;
    let weights = match &grid {
        Some(g) if report.exists(weights_path) => match load_weight_table::<f64>(weights_path, g) {
            Ok(w) => Some(w),
            Err(e) => {
                report.weather(weights_path, &e);
                None
            }
        },
        _ => None,
    };
    let countries: Option<BTreeSet<String>> = weights.as_ref().map(|w| w.countries().map(str::to_string).collect());

    let mut historical_axis: Option<TimeAxis> = None;
    if let Some(grid) = &grid {
        for (i, s) in cfg.scenarios.iter().enumerate() {
            let mut axes = Vec::new();
            for (path, var) in
                [(&s.wind, Variable::WindSpeed), (&s.irradiance, Variable::Irradiance), (&s.temperature, Variable::Temperature)]
            {
                if !report.exists(path) {
                    continue;
                }
                match load_field_series::<f64>(path, grid, var) {
                    Ok(f) => axes.push((path, f.time())),
                    Err(e) => report.weather(path, &e),
                }
            }
            if let Some(&(_, first)) = axes.first() {
                for (path, axis) in &axes[1..] {
                    if *axis != first {
                        report.push(Some(path), "AxisMismatch", format!("time axis differs from {}", s.wind.display()));
                    }
                }
                if !first.is_whole_years() {
                    report.push(Some(axes[0].0), "AxisMismatch", "period is not a whole number of years");
                } else if first.n_years() < cfg.analysis.window_years {
                    report.push(
                        Some(axes[0].0),
                        "InsufficientYears",
                        format!("{} years available, window_years = {}", first.n_years(), cfg.analysis.window_years),
                    );
                }
                if i == 0 {
                    historical_axis = Some(first);
                }
            }
        }
    }

    let demand_path = &cfg.inputs.demand;
    if report.exists(demand_path) {
        let start = historical_axis.map(|a| a.start_year).unwrap_or(0);
        match load_demand_file::<f64>(demand_path, start) {
            Ok(series) => {
                if let Some(axis) = historical_axis {
                    if let Some(s) = series.values().find(|s| s.time != axis) {
                        report.push(
                            Some(demand_path),
                            "AxisMismatch",
                            format!("{} demand has {} steps, historical fields {}", s.country, s.time.n_steps, axis.n_steps),
                        );
                    }
                }
                for c in countries.iter().flatten().filter(|c| !series.contains_key(*c)) {
                    report.push(Some(demand_path), "MissingCountry", format!("no demand for {c}"));
                }
            }
            Err(e) => report.push(Some(demand_path), demand_kind(&e), e.to_string()),
        }
    }

    let mut reference = ReferenceSamples::<f64>::new();
    let mut reference_ok = true;
    for path in &cfg.inputs.reference {
        if !report.exists(path) {
            reference_ok = false;
            continue;
        }
        match load_reference_samples::<f64>(path) {
            Ok(r) => {
                for (key, values) in r {
                    if reference.insert(key.clone(), values).is_some() {
                        report.push(Some(path), "DuplicateReference", format!("{}/{} given in more than one file", key.0, key.1));
                    }
                }
            }
            Err(e) => {
                reference_ok = false;
                report.push(Some(path), bias_kind(&e), e.to_string());
            }
        }
    }
    if reference_ok {
        for c in countries.iter().flatten() {
            for tech in [Technology::Wind, Technology::Solar] {
                if !reference.contains_key(&(c.clone(), tech)) {
                    report.push(None, "MissingReference", format!("no {tech} reference samples for {c}"));
                }
            }
        }
    }
    report
}
