//! Run configuration, read from TOML.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::PipelineError;
use crate::bias::ScaleGrid;
use crate::convert::{SolarPanelModel, WindTurbineModel};
use crate::demand::DegreeDayParams;
use crate::metrics::CapacityStatistic;
use crate::mismatch::Scenario;
use crate::stats::WindowMode;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    /// Climate model identifier written to every report row.
    pub model: String,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    /// Seed the input bundle was generated with, if synthetic.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub inputs: Inputs,
    #[serde(default)]
    pub turbine: TurbineConfig,
    #[serde(default)]
    pub panel: PanelConfig,
    #[serde(default)]
    pub degree_days: DegreeDayConfig,
    #[serde(default)]
    pub bias: BiasConfig,
    #[serde(default)]
    pub analysis: AnalysisConfig,
    /// The first entry must be the historical period.
    #[serde(rename = "scenario")]
    pub scenarios: Vec<ScenarioFiles>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Inputs {
    pub grid: PathBuf,
    pub weights: PathBuf,
    /// Historical demand, `country,time_index,mwh`.
    pub demand: PathBuf,
    /// Reference capacity-factor sample files; together they must cover every country and technology.
    pub reference: Vec<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioFiles {
    /// `historical`, `RCP2.6`, `RCP4.5` or `RCP8.5`.
    pub scenario: String,
    pub wind: PathBuf,
    pub irradiance: PathBuf,
    pub temperature: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TurbineConfig {
    pub hub_height: f64,
    pub reference_height: f64,
    pub shear_exponent: f64,
    /// `[speed, capacity factor]` points from cut-in to cut-out.
    pub power_curve: Vec<[f64; 2]>,
}

impl Default for TurbineConfig {
    fn default() -> Self {
        let m = WindTurbineModel::<f64>::default();
        Self {
            hub_height: m.hub_height(),
            reference_height: m.reference_height(),
            shear_exponent: m.shear_exponent(),
            power_curve: m.power_curve().iter().map(|&(u, c)| [u, c]).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PanelConfig {
    pub temperature_coefficient: f64,
    pub mounting_coefficient: f64,
}

impl Default for PanelConfig {
    fn default() -> Self {
        let m = SolarPanelModel::<f64>::default();
        Self { temperature_coefficient: m.temperature_coefficient, mounting_coefficient: m.mounting_coefficient }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DegreeDayConfig {
    pub heating_threshold: f64,
    pub cooling_threshold: f64,
}

impl Default for DegreeDayConfig {
    fn default() -> Self {
        Self { heating_threshold: 17.0, cooling_threshold: 22.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BiasConfig {
    pub bins: usize,
    pub scale_min: f64,
    pub scale_max: f64,
    pub scale_step: f64,
}

impl Default for BiasConfig {
    fn default() -> Self {
        Self { bins: crate::bias::DEFAULT_BINS, scale_min: 0.5, scale_max: 2.0, scale_step: 0.01 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AnalysisConfig {
    pub alpha_grid: Vec<f64>,
    pub gamma: f64,
    pub window_years: usize,
    /// `non-overlapping` or `rolling`.
    pub window_mode: String,
    /// Use this quantile of balancing instead of its maximum for K3.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub capacity_quantile: Option<f64>,
    /// Also export every mismatch set as CSV (large).
    pub write_mismatch: bool,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            alpha_grid: (0..=10).map(|i| i as f64 / 10.0).collect(),
            gamma: 1.0,
            window_years: 20,
            window_mode: "non-overlapping".into(),
            capacity_quantile: None,
            write_mismatch: false,
        }
    }
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, PipelineError> {
        toml::from_str(text).map_err(|e| PipelineError::Config(e.to_string()))
    }

    /// Reads a config file and resolves relative paths against its directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, PipelineError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| PipelineError::io(path, e))?;
        let mut cfg = Self::from_toml(&text)?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        cfg.resolve_paths(&base);
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.output_dir);
        fix(&mut self.inputs.grid);
        fix(&mut self.inputs.weights);
        fix(&mut self.inputs.demand);
        self.inputs.reference.iter_mut().for_each(fix);
        for s in &mut self.scenarios {
            fix(&mut s.wind);
            fix(&mut s.irradiance);
            fix(&mut s.temperature);
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn turbine_model(&self) -> Result<WindTurbineModel<f64>, PipelineError> {
        let t = &self.turbine;
        WindTurbineModel::new(
            t.hub_height,
            t.reference_height,
            t.shear_exponent,
            t.power_curve.iter().map(|p| (p[0], p[1])).collect(),
        )
        .map_err(|e| PipelineError::Config(e.to_string()))
    }

    pub fn panel_model(&self) -> Result<SolarPanelModel<f64>, PipelineError> {
        SolarPanelModel::new(self.panel.temperature_coefficient, self.panel.mounting_coefficient)
            .map_err(|e| PipelineError::Config(e.to_string()))
    }

    pub fn degree_day_params(&self) -> Result<DegreeDayParams<f64>, PipelineError> {
        DegreeDayParams::new(self.degree_days.heating_threshold, self.degree_days.cooling_threshold)
            .map_err(|e| PipelineError::Config(e.to_string()))
    }

    pub fn scale_grid(&self) -> Result<ScaleGrid, PipelineError> {
        let b = &self.bias;
        if b.bins < 2 {
            return Err(PipelineError::Config(format!("bias.bins must be at least 2, got {}", b.bins)));
        }
        ScaleGrid::new(b.scale_min, b.scale_max, b.scale_step).map_err(|e| PipelineError::Config(e.to_string()))
    }

    pub fn window_mode(&self) -> Result<WindowMode, PipelineError> {
        match self.analysis.window_mode.as_str() {
            "non-overlapping" => Ok(WindowMode::NonOverlapping),
            "rolling" => Ok(WindowMode::Rolling),
            other => Err(PipelineError::Config(format!("unknown window_mode {other:?}"))),
        }
    }

    pub fn capacity_statistic(&self) -> Result<CapacityStatistic, PipelineError> {
        match self.analysis.capacity_quantile {
            None => Ok(CapacityStatistic::Maximum),
            Some(q) if q > 0.0 && q <= 1.0 => Ok(CapacityStatistic::Quantile(q)),
            Some(q) => Err(PipelineError::Config(format!("capacity_quantile {q} outside (0, 1]"))),
        }
    }

    /// Scenario of every entry, checking that the first is historical and labels are unique.
    pub fn scenario_list(&self) -> Result<Vec<Scenario>, PipelineError> {
        let mut out = Vec::with_capacity(self.scenarios.len());
        for s in &self.scenarios {
            let sc = Scenario::from_label(&s.scenario)
                .ok_or_else(|| PipelineError::Config(format!("unknown scenario {:?}", s.scenario)))?;
            if out.contains(&sc) {
                return Err(PipelineError::Config(format!("scenario {sc} listed twice")));
            }
            out.push(sc);
        }
        match out.first() {
            Some(Scenario::Historical) => Ok(out),
            Some(other) => Err(PipelineError::Config(format!("first scenario must be historical, found {other}"))),
            None => Err(PipelineError::Config("no scenarios configured".into())),
        }
    }

    /// Every check on parameters that does not touch input files.
    pub fn check_parameters(&self) -> Vec<String> {
        let mut problems = Vec::new();
        let mut note = |r: Result<(), PipelineError>| {
            if let Err(e) = r {
                problems.push(e.to_string());
            }
        };
        note(self.turbine_model().map(drop));
        note(self.panel_model().map(drop));
        note(self.degree_day_params().map(drop));
        note(self.scale_grid().map(drop));
        note(self.window_mode().map(drop));
        note(self.capacity_statistic().map(drop));
        note(self.scenario_list().map(drop));
        let a = &self.analysis;
        if a.alpha_grid.is_empty() {
            problems.push("alpha_grid is empty".into());
        }
        if let Some(bad) = a.alpha_grid.iter().find(|x| !(0.0..=1.0).contains(*x)) {
            problems.push(format!("alpha {bad} outside [0, 1]"));
        }
        if !(a.gamma > 0.0 && a.gamma.is_finite()) {
            problems.push(format!("gamma must be positive, got {}", a.gamma));
        }
        if a.window_years == 0 {
            problems.push("window_years must be positive".into());
        }
        if self.model.trim().is_empty() || self.model.contains(',') {
            problems.push(format!("model id {:?} must be non-empty and contain no commas", self.model));
        }
        if self.inputs.reference.is_empty() {
            problems.push("no reference files configured".into());
        }
        problems
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
model = "m1"

[inputs]
grid = "grid.csv"
weights = "weights.csv"
demand = "demand.csv"
reference = ["ref_wind.csv", "ref_solar.csv"]

[[scenario]]
scenario = "historical"
wind = "h/wind.csv"
irradiance = "h/irr.csv"
temperature = "h/temp.csv"
"#;

    #[test]
    fn defaults_and_resolution() {
        let mut cfg = RunConfig::from_toml(MINIMAL).unwrap();
        assert_eq!(cfg.analysis.alpha_grid.len(), 11);
        assert_eq!(cfg.analysis.alpha_grid[3], 0.3);
        assert_eq!(cfg.turbine.power_curve.len(), 4);
        assert!(cfg.check_parameters().is_empty());
        cfg.resolve_paths(Path::new("/data/run"));
        assert_eq!(cfg.inputs.grid, PathBuf::from("/data/run/grid.csv"));
        assert_eq!(cfg.scenarios[0].wind, PathBuf::from("/data/run/h/wind.csv"));
        let back = RunConfig::from_toml(&cfg.to_toml()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn parameter_problems() {
        let mut cfg = RunConfig::from_toml(MINIMAL).unwrap();
        cfg.analysis.alpha_grid = vec![0.0, 1.5];
        cfg.analysis.window_mode = "sliding".into();
        cfg.scenarios[0].scenario = "RCP8.5".into();
        let p = cfg.check_parameters();
        assert_eq!(p.len(), 3, "{p:?}");
    }
}
