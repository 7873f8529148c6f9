//! Writing a synthetic input bundle and its run config.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::{AnalysisConfig, Inputs, RunConfig, ScenarioFiles};
use super::PipelineError;
use crate::bias::{write_reference_samples, ReferenceSamples};
use crate::convert::Technology;
use crate::demand::write_demand_file;
use crate::mismatch::Scenario;
use crate::synth::{generate, ScenarioSpec, SynthBundle, SynthSpec};
use crate::weather::{write_field_series, write_grid_definition, write_weight_table};

/// User-facing subset of [`SynthSpec`], read from TOML.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub seed: u64,
    pub n_countries: usize,
    pub cells_per_country: usize,
    pub years: usize,
    pub historical_start_year: i32,
    /// Future scenarios generated after the historical period.
    pub scenarios: Vec<String>,
    pub wind_spatial_corr_km: f64,
    pub demand_noise_std: f64,
    pub reference_wind_scale: f64,
    pub reference_solar_scale: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        let s = SynthSpec::default();
        Self {
            seed: s.seed,
            n_countries: s.n_countries,
            cells_per_country: s.cells_per_country,
            years: 20,
            historical_start_year: 1986,
            scenarios: vec!["RCP4.5".into(), "RCP8.5".into()],
            wind_spatial_corr_km: s.wind_spatial_corr_km,
            demand_noise_std: s.demand_noise_std,
            reference_wind_scale: s.reference_wind_scale,
            reference_solar_scale: s.reference_solar_scale,
        }
    }
}

impl SynthConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, PipelineError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| PipelineError::io(path, e))?;
        toml::from_str(&text).map_err(|e| PipelineError::Config(e.to_string()))
    }

    pub fn to_spec(&self) -> Result<SynthSpec, PipelineError> {
        let mut scenarios = vec![ScenarioSpec::historical(self.historical_start_year, self.years)];
        for label in &self.scenarios {
            match Scenario::from_label(label) {
                Some(Scenario::Historical) | None => {
                    return Err(PipelineError::Config(format!("invalid future scenario {label:?}")))
                }
                Some(sc) => scenarios.push(ScenarioSpec::end_of_century(sc, self.years)),
            }
        }
        Ok(SynthSpec {
            seed: self.seed,
            n_countries: self.n_countries,
            cells_per_country: self.cells_per_country,
            scenarios,
            wind_spatial_corr_km: self.wind_spatial_corr_km,
            demand_noise_std: self.demand_noise_std,
            reference_wind_scale: self.reference_wind_scale,
            reference_solar_scale: self.reference_solar_scale,
            ..SynthSpec::default()
        })
    }
}

fn scenario_dir(sc: Scenario) -> String {
    sc.label().to_ascii_lowercase().replace('.', "")
}

/// Writes every file of `bundle` under `dir` plus `run.toml` pointing at them.
pub fn write_bundle(bundle: &SynthBundle, seed: u64, dir: &Path) -> Result<RunConfig, PipelineError> {
    let io = |p: &Path| {
        let p = p.to_path_buf();
        move |e: std::io::Error| PipelineError::io(&p, e)
    };
    let weather = |p: &Path| {
        let p = p.to_path_buf();
        move |e: crate::weather::WeatherError| PipelineError::Config(format!("{}: {e}", p.display()))
    };
    fs::create_dir_all(dir).map_err(io(dir))?;
    let grid = dir.join("grid.csv");
    write_grid_definition(&grid, &bundle.grid).map_err(weather(&grid))?;
    let weights = dir.join("weights.csv");
    write_weight_table(&weights, &bundle.weights).map_err(weather(&weights))?;
    let demand = dir.join("demand_historical.csv");
    write_demand_file(&demand, &bundle.historical_demand).map_err(io(&demand))?;

    let mut reference = Vec::new();
    for tech in [Technology::Wind, Technology::Solar] {
        let subset: ReferenceSamples =
            bundle.reference.iter().filter(|((_, t), _)| *t == tech).map(|(k, v)| (k.clone(), v.clone())).collect();
        let path = dir.join(format!("reference_{}.csv", tech.tag()));
        write_reference_samples(&path, &subset).map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))?;
        reference.push(PathBuf::from(format!("reference_{}.csv", tech.tag())));
    }

    let planted = dir.join("planted_demand.csv");
    let mut w = BufWriter::new(File::create(&planted).map_err(io(&planted))?);
    let mut text = String::from("country,base_load,heating_coeff,cooling_coeff\n");
    for (c, p) in &bundle.planted {
        text.push_str(&format!("{c},{},{},{}\n", p.base_load, p.heating_coeff, p.cooling_coeff));
    }
    w.write_all(text.as_bytes()).and_then(|_| w.flush()).map_err(io(&planted))?;

    let mut scenarios = Vec::new();
    for s in &bundle.scenarios {
        let sub = scenario_dir(s.spec.scenario);
        fs::create_dir_all(dir.join(&sub)).map_err(io(dir))?;
        let rel = |name: &str| PathBuf::from(&sub).join(name);
        for (field, name) in [(&s.wind, "wind.csv"), (&s.irradiance, "irradiance.csv"), (&s.temperature, "temperature.csv")] {
            let path = dir.join(rel(name));
            write_field_series(&path, field).map_err(weather(&path))?;
        }
        scenarios.push(ScenarioFiles {
            scenario: s.spec.scenario.label().to_string(),
            wind: rel("wind.csv"),
            irradiance: rel("irradiance.csv"),
            temperature: rel("temperature.csv"),
        });
    }

    let cfg = RunConfig {
        model: "synthetic".into(),
        output_dir: PathBuf::from("out"),
        seed: Some(seed),
        inputs: Inputs {
            grid: "grid.csv".into(),
            weights: "weights.csv".into(),
            demand: "demand_historical.csv".into(),
            reference,
        },
        turbine: Default::default(),
        panel: Default::default(),
        degree_days: Default::default(),
        bias: Default::default(),
        analysis: AnalysisConfig {
            window_years: AnalysisConfig::default().window_years.min(bundle.scenarios[0].spec.years),
            ..Default::default()
        },
        scenarios,
    };
    let run_toml = dir.join("run.toml");
    fs::write(&run_toml, cfg.to_toml()).map_err(io(&run_toml))?;
    Ok(cfg)
}

/// Generates a bundle from `config` and writes it under `dir`.
pub fn cmd_synth(config: &SynthConfig, dir: &Path) -> Result<RunConfig, PipelineError> {
    let spec = config.to_spec()?;
    let bundle = generate(&spec).map_err(|e| PipelineError::Config(e.to_string()))?;
    write_bundle(&bundle, config.seed, dir)
}
