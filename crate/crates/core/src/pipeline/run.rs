//! The `run` command: ingest → convert → bias-adjust → demand → mismatch → metrics → reports.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::fs::{self, File};
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use sha2::{Digest, Sha256};

use super::config::RunConfig;
use super::{PipelineError, Stage};
use crate::bias::{
    fit_bias_transform, histogram, load_reference_samples, relative_entropy, write_transforms, BiasError,
    ReferenceSamples, TransformTable,
};
use crate::convert::{CapacityFactorSeries, CountryConversion, Technology};
use crate::demand::{
    daily_mean_temperature, degree_day_series, fit_demand_regression, load_demand_file, synthesize_demand,
    write_regressions, DemandFit, DemandSeries,
};
use crate::metrics::{annual_key_metrics, KeyMetrics, Metric};
use crate::mismatch::{compute_normalization, MismatchSet, NormalizationConstants, NormalizedCountry, Scenario};
use crate::stats::{box_summary, paired_t_test, window_stats, TTestResult, WindowStats};
use crate::weather::{aggregate_to_country, load_field_series, load_grid_definition, load_weight_table, TimeAxis, Variable};

/// Metrics of one scenario for every alpha of the grid.
#[derive(Debug, Clone)]
pub struct ScenarioResults {
    pub scenario: Scenario,
    pub time: TimeAxis,
    /// `(year, metrics)` per alpha, in alpha-grid order.
    pub annual: Vec<Vec<(i32, KeyMetrics)>>,
    pub windows: Vec<Vec<WindowStats>>,
    /// Period means of normalized wind, solar and load per country, then `EU`.
    pub normalized_means: Vec<(String, [f64; 3])>,
}

impl ScenarioResults {
    /// Last complete window for alpha index `a`.
    pub fn last_window(&self, a: usize) -> &WindowStats {
        self.windows[a].last().expect("at least one window")
    }
}

#[derive(Debug, Clone)]
pub struct TTestRow {
    pub alpha: f64,
    pub metric: Metric,
    pub scenario_a: Scenario,
    pub scenario_b: Scenario,
    pub result: TTestResult,
}

#[derive(Debug, Clone)]
pub struct RunResults {
    pub model: String,
    pub alphas: Vec<f64>,
    pub countries: Vec<String>,
    pub transforms: TransformTable,
    /// Divergence of the unadjusted conversion from the reference.
    pub unadjusted_divergence: BTreeMap<(String, Technology), f64>,
    pub demand_fits: Vec<DemandFit>,
    pub normalization: NormalizationConstants,
    pub scenarios: Vec<ScenarioResults>,
    pub ttests: Vec<TTestRow>,
    pub timings: Vec<(Stage, f64)>,
}

impl RunResults {
    pub fn alpha_index(&self, alpha: f64) -> Option<usize> {
        self.alphas.iter().position(|&a| a == alpha)
    }

    pub fn scenario(&self, scenario: Scenario) -> Option<&ScenarioResults> {
        self.scenarios.iter().find(|s| s.scenario == scenario)
    }
}

struct Timer {
    totals: Vec<(Stage, f64)>,
}

impl Timer {
    fn new() -> Self {
        let stages = [
            Stage::Ingest,
            Stage::Convert,
            Stage::BiasAdjust,
            Stage::DemandModel,
            Stage::Mismatch,
            Stage::MetricsStats,
            Stage::Report,
        ];
        Self { totals: stages.iter().map(|&s| (s, 0.0)).collect() }
    }

    fn time<R>(&mut self, stage: Stage, f: impl FnOnce() -> R) -> R {
        let start = Instant::now();
        let r = f();
        let slot = self.totals.iter_mut().find(|(s, _)| *s == stage).expect("known stage");
        slot.1 += start.elapsed().as_secs_f64();
        r
    }
}

fn fail<E: Display>(stage: Stage, path: &Path) -> impl Fn(E) -> PipelineError + '_ {
    move |e| PipelineError::stage(stage, format!("{}: {e}", path.display()))
}

fn failed<E: Display>(stage: Stage) -> impl Fn(E) -> PipelineError {
    move |e| PipelineError::stage(stage, e)
}

struct ScenarioDrivers {
    scenario: Scenario,
    time: TimeAxis,
    wind: Vec<CountryConversion>,
    solar: Vec<CountryConversion>,
    /// Country-aggregated temperature.
    temperature: Vec<Vec<f64>>,
}

/// Runs every stage; when `sink` is given, artifacts are written there as stages finish.
pub fn execute(cfg: &RunConfig, sink: Option<&Path>) -> Result<RunResults, PipelineError> {
    let problems = cfg.check_parameters();
    if !problems.is_empty() {
        return Err(PipelineError::Config(problems.join("; ")));
    }
    let scenarios = cfg.scenario_list()?;
    let turbine = cfg.turbine_model()?;
    let panel = cfg.panel_model()?;
    let dd_params = cfg.degree_day_params()?;
    let scale_grid = cfg.scale_grid()?;
    let window_mode = cfg.window_mode()?;
    let capacity = cfg.capacity_statistic()?;
    let alphas = cfg.analysis.alpha_grid.clone();
    let window = cfg.analysis.window_years;
    let mut timer = Timer::new();

    // ingest + convert, one scenario at a time to bound memory
    let grid_path = &cfg.inputs.grid;
    let weights_path = &cfg.inputs.weights;
    let (grid, weights) = timer.time(Stage::Ingest, || {
        let grid = load_grid_definition(grid_path).map_err(fail(Stage::Ingest, grid_path))?;
        let weights = load_weight_table::<f64>(weights_path, &grid).map_err(fail(Stage::Ingest, weights_path))?;
        Ok::<_, PipelineError>((grid, weights))
    })?;
    let countries: Vec<String> = weights.countries().map(str::to_string).collect();
    let mut drivers = Vec::with_capacity(scenarios.len());
    for (files, &scenario) in cfg.scenarios.iter().zip(&scenarios) {
        let (wind, irr, temp) = timer.time(Stage::Ingest, || {
            let load = |path: &PathBuf, var| load_field_series::<f64>(path, &grid, var).map_err(fail(Stage::Ingest, path));
            let wind = load(&files.wind, Variable::WindSpeed)?;
            let irr = load(&files.irradiance, Variable::Irradiance)?;
            let temp = load(&files.temperature, Variable::Temperature)?;
            if wind.time() != irr.time() || wind.time() != temp.time() {
                return Err(PipelineError::stage(Stage::Ingest, format!("{scenario}: fields cover different periods")));
            }
            if !wind.time().is_whole_years() {
                return Err(PipelineError::stage(Stage::Ingest, format!("{scenario}: period is not whole years")));
            }
            Ok((wind, irr, temp))
        })?;
        let d = timer.time(Stage::Convert, || {
            let per_country: Result<Vec<_>, PipelineError> = weights
                .iter()
                .collect::<Vec<_>>()
                .par_iter()
                .map(|cw| {
                    let w = CountryConversion::wind(&wind, cw, &turbine).map_err(failed(Stage::Convert))?;
                    let s = CountryConversion::solar(&irr, &temp, cw, &panel).map_err(failed(Stage::Convert))?;
                    let t = aggregate_to_country(&temp, cw).map_err(failed(Stage::Convert))?;
                    Ok((w, s, t.values))
                })
                .collect();
            let mut d = ScenarioDrivers { scenario, time: wind.time(), wind: vec![], solar: vec![], temperature: vec![] };
            for (w, s, t) in per_country? {
                d.wind.push(w);
                d.solar.push(s);
                d.temperature.push(t);
            }
            Ok::<_, PipelineError>(d)
        })?;
        log::info!("loaded and converted {scenario} ({} years)", d.time.n_years());
        drivers.push(d);
    }
    let hist_time = drivers[0].time;

    // bias-adjust: fit on the historical period, apply unchanged to every scenario
    let (transforms, unadjusted_divergence) = timer.time(Stage::BiasAdjust, || {
        let mut reference = ReferenceSamples::<f64>::new();
        for path in &cfg.inputs.reference {
            let r = load_reference_samples::<f64>(path).map_err(fail(Stage::BiasAdjust, path))?;
            for (key, values) in r {
                if reference.insert(key.clone(), values).is_some() {
                    return Err(PipelineError::stage(
                        Stage::BiasAdjust,
                        format!("{}: duplicate reference for {}/{}", path.display(), key.0, key.1),
                    ));
                }
            }
        }
        let tasks: Vec<(usize, Technology)> =
            (0..countries.len()).flat_map(|i| [(i, Technology::Wind), (i, Technology::Solar)]).collect();
        let fitted: Result<Vec<_>, BiasError> = tasks
            .par_iter()
            .map(|&(i, tech)| {
                let country = &countries[i];
                let samples = reference
                    .get(&(country.clone(), tech))
                    .ok_or_else(|| BiasError::MissingReference { country: country.clone(), technology: tech })?;
                let ref_hist = histogram(samples, cfg.bias.bins)?;
                let conv = match tech {
                    Technology::Wind => &drivers[0].wind[i],
                    Technology::Solar => &drivers[0].solar[i],
                };
                let raw = relative_entropy(&histogram(&conv.capacity_factor_values(1.0), cfg.bias.bins)?, &ref_hist)?;
                let t = fit_bias_transform(tech, |s| conv.capacity_factor_values(s), &ref_hist, &scale_grid)?;
                Ok(((country.clone(), tech), t, raw))
            })
            .collect();
        let mut table = TransformTable::new();
        let mut raw = BTreeMap::new();
        for (key, t, d) in fitted.map_err(failed(Stage::BiasAdjust))? {
            table.insert(key.clone(), t);
            raw.insert(key, d);
        }
        if let Some(dir) = sink {
            let path = dir.join("transforms.csv");
            write_transforms(&path, &table).map_err(fail(Stage::BiasAdjust, &path))?;
        }
        Ok((table, raw))
    })?;
    let scale = |country: &str, tech| transforms[&(country.to_string(), tech)].scale;
    let capacity_factors: Vec<(Vec<Vec<f64>>, Vec<Vec<f64>>)> = timer.time(Stage::BiasAdjust, || {
        drivers
            .iter()
            .map(|d| {
                let w = d.wind.par_iter().map(|c| c.capacity_factor_values(scale(c.country(), Technology::Wind))).collect();
                let s = d.solar.par_iter().map(|c| c.capacity_factor_values(scale(c.country(), Technology::Solar))).collect();
                (w, s)
            })
            .collect()
    });
    let temperatures: Vec<(Scenario, TimeAxis, Vec<Vec<f64>>)> =
        drivers.into_iter().map(|d| (d.scenario, d.time, d.temperature)).collect();

    // demand: fit on historical demand and temperature, synthesize for every scenario
    let (demand_fits, demand) = timer.time(Stage::DemandModel, || {
        let path = &cfg.inputs.demand;
        let observed = load_demand_file::<f64>(path, hist_time.start_year).map_err(fail(Stage::DemandModel, path))?;
        let degree_days = |temps: &[f64]| -> Result<(Vec<f64>, Vec<f64>), PipelineError> {
            let daily = daily_mean_temperature(temps).map_err(failed(Stage::DemandModel))?;
            Ok(degree_day_series(&daily, &dd_params))
        };
        let mut fits = Vec::with_capacity(countries.len());
        for (i, country) in countries.iter().enumerate() {
            let obs = observed.get(country).ok_or_else(|| {
                PipelineError::stage(Stage::DemandModel, format!("{}: no demand for {country}", path.display()))
            })?;
            if obs.time != hist_time {
                return Err(PipelineError::stage(
                    Stage::DemandModel,
                    format!("{country}: demand has {} steps, historical fields {}", obs.time.n_steps, hist_time.n_steps),
                ));
            }
            let (hdd, cdd) = degree_days(&temperatures[0].2[i])?;
            fits.push(fit_demand_regression(obs, &hdd, &cdd).map_err(failed(Stage::DemandModel))?);
        }
        let mut demand: Vec<Vec<DemandSeries>> = Vec::with_capacity(temperatures.len());
        for (_, time, temps) in &temperatures {
            let mut per_country = Vec::with_capacity(countries.len());
            for (fit, t) in fits.iter().zip(temps) {
                let (hdd, cdd) = degree_days(t)?;
                per_country.push(synthesize_demand(&fit.regression, &hdd, &cdd, *time).map_err(failed(Stage::DemandModel))?);
            }
            demand.push(per_country);
        }
        if let Some(dir) = sink {
            let (coeff, base) = (dir.join("demand_coefficients.csv"), dir.join("demand_baseline.csv"));
            write_regressions(&coeff, &base, fits.iter().map(|f| &f.regression)).map_err(fail(Stage::DemandModel, &coeff))?;
            let diag = dir.join("demand_fit.csv");
            write_demand_diagnostics(&diag, &fits).map_err(fail(Stage::DemandModel, &diag))?;
        }
        Ok((fits, demand))
    })?;

    // normalization on the historical period, then normalized inputs for every scenario
    let (normalization, normalized) = timer.time(Stage::Mismatch, || {
        let cf_series = |tech, values: &Vec<Vec<f64>>| -> Result<Vec<CapacityFactorSeries>, PipelineError> {
            countries
                .iter()
                .zip(values)
                .map(|(c, v)| CapacityFactorSeries::new(c.clone(), tech, hist_time, v.clone()).map_err(failed(Stage::Mismatch)))
                .collect()
        };
        let hist_wind = cf_series(Technology::Wind, &capacity_factors[0].0)?;
        let hist_solar = cf_series(Technology::Solar, &capacity_factors[0].1)?;
        let norm = compute_normalization(&hist_wind, &hist_solar, &demand[0]).map_err(failed(Stage::Mismatch))?;
        let mut normalized: Vec<Vec<NormalizedCountry>> = Vec::with_capacity(scenarios.len());
        for (k, (w, s)) in capacity_factors.iter().enumerate() {
            let per_country: Result<Vec<_>, _> = norm
                .countries()
                .iter()
                .map(|c| {
                    let i = countries.iter().position(|x| x == c).expect("normalized countries come from the weights");
                    norm.normalize(c, &w[i], &s[i], demand[k][i].values())
                })
                .collect();
            normalized.push(per_country.map_err(failed(Stage::Mismatch))?);
        }
        Ok::<_, PipelineError>((norm, normalized))
    })?;
    drop(capacity_factors);
    let shares = normalization.load_shares();
    let gamma = cfg.analysis.gamma;

    // alpha sweep: independent (scenario, alpha) tasks, collected in order
    let tasks: Vec<(usize, usize)> = (0..scenarios.len()).flat_map(|k| (0..alphas.len()).map(move |a| (k, a))).collect();
    let annual: Vec<Vec<(i32, KeyMetrics)>> = timer.time(Stage::MetricsStats, || {
        tasks
            .par_iter()
            .map(|&(k, a)| {
                let set = MismatchSet::build(&normalized[k], &shares, alphas[a], gamma, temperatures[k].1)
                    .map_err(failed(Stage::Mismatch))?;
                annual_key_metrics(&set, capacity).map_err(failed(Stage::MetricsStats))
            })
            .collect::<Result<_, _>>()
    })?;
    if let (Some(dir), true) = (sink, cfg.analysis.write_mismatch) {
        timer.time(Stage::Report, || {
            for &(k, a) in &tasks {
                let set = MismatchSet::build(&normalized[k], &shares, alphas[a], gamma, temperatures[k].1)
                    .map_err(failed(Stage::Mismatch))?;
                let path = dir.join(format!("mismatch_{}_alpha{}.csv", scenario_slug(scenarios[k]), alphas[a]));
                set.write_csv(&path).map_err(fail(Stage::Report, &path))?;
            }
            Ok::<_, PipelineError>(())
        })?;
    }

    let normalized_means: Vec<Vec<(String, [f64; 3])>> = normalized
        .iter()
        .map(|per_country| {
            let mut rows: Vec<(String, [f64; 3])> = per_country
                .iter()
                .map(|c| (c.country.clone(), [mean(&c.wind), mean(&c.solar), mean(&c.load)]))
                .collect();
            let mut eu = [0.0; 3];
            for ((_, m), &w) in rows.iter().zip(&shares) {
                for j in 0..3 {
                    eu[j] += w * m[j];
                }
            }
            rows.push(("EU".into(), eu));
            rows
        })
        .collect();
    drop(normalized);

    let (scenario_results, ttests) = timer.time(Stage::MetricsStats, || {
        let mut results = Vec::with_capacity(scenarios.len());
        let mut annual = annual.into_iter();
        for (k, &scenario) in scenarios.iter().enumerate() {
            let per_alpha: Vec<_> = annual.by_ref().take(alphas.len()).collect();
            let windows = per_alpha
                .iter()
                .map(|a| window_stats(a, window, window_mode))
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| PipelineError::stage(Stage::MetricsStats, format!("{scenario}: {e}")))?;
            results.push(ScenarioResults {
                scenario,
                time: temperatures[k].1,
                annual: per_alpha,
                windows,
                normalized_means: normalized_means[k].clone(),
            });
        }
        let mut ttests = Vec::new();
        let hist = &results[0];
        for (a, &alpha) in alphas.iter().enumerate() {
            for other in &results[1..] {
                for metric in Metric::ALL {
                    let tail = |r: &ScenarioResults| -> Vec<f64> {
                        let v = &r.annual[a];
                        v[v.len() - window..].iter().map(|(_, k)| k.get(metric)).collect()
                    };
                    let result = paired_t_test(&tail(other), &tail(hist)).map_err(failed(Stage::MetricsStats))?;
                    ttests.push(TTestRow { alpha, metric, scenario_a: other.scenario, scenario_b: hist.scenario, result });
                }
            }
        }
        Ok::<_, PipelineError>((results, ttests))
    })?;

    let mut results = RunResults {
        model: cfg.model.clone(),
        alphas,
        countries,
        transforms,
        unadjusted_divergence,
        demand_fits,
        normalization,
        scenarios: scenario_results,
        ttests,
        timings: Vec::new(),
    };
    if let Some(dir) = sink {
        timer.time(Stage::Report, || write_reports(&results, dir))?;
    }
    results.timings = timer.totals;
    Ok(results)
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn scenario_slug(sc: Scenario) -> String {
    sc.label().to_ascii_lowercase().replace('.', "")
}

fn write_demand_diagnostics(path: &Path, fits: &[DemandFit]) -> std::io::Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "country,intercept,raw_heating_coeff,raw_cooling_coeff,heating_se,cooling_se,residual_std,n_days,singular")?;
    for f in fits {
        let d = &f.diagnostics;
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{}",
            f.regression.country,
            d.intercept,
            d.raw_heating_coeff,
            d.raw_cooling_coeff,
            d.heating_se,
            d.cooling_se,
            d.residual_std,
            d.n_days,
            d.singular
        )?;
    }
    w.flush()
}

fn report_io(path: &Path) -> impl Fn(std::io::Error) -> PipelineError + '_ {
    fail(Stage::Report, path)
}

fn csv_file(dir: &Path, name: &str, header: &str) -> Result<(PathBuf, BufWriter<File>), PipelineError> {
    let path = dir.join(name);
    let mut w = BufWriter::new(File::create(&path).map_err(fail(Stage::Report, &path))?);
    writeln!(w, "{header}").map_err(fail(Stage::Report, &path))?;
    Ok((path, w))
}

fn write_reports(r: &RunResults, dir: &Path) -> Result<(), PipelineError> {
    let model = &r.model;
    let keys = Metric::ALL.map(Metric::key);

    let (path, mut w) = csv_file(dir, "metrics_annual.csv", &format!("model,scenario,alpha,year,{}", keys.join(",")))?;
    for s in &r.scenarios {
        for (a, annual) in s.annual.iter().enumerate() {
            for (year, k) in annual {
                let vals = Metric::ALL.map(|m| k.get(m).to_string());
                writeln!(w, "{model},{},{},{year},{}", s.scenario, r.alphas[a], vals.join(",")).map_err(report_io(&path))?;
            }
        }
    }
    w.flush().map_err(report_io(&path))?;

    let header = format!(
        "model,scenario,alpha,window_start,window_years,{},{}",
        keys.map(|k| format!("mean_{k}")).join(","),
        keys.map(|k| format!("sigma_{k}")).join(",")
    );
    let (path, mut w) = csv_file(dir, "metrics_windows.csv", &header)?;
    for s in &r.scenarios {
        for (a, windows) in s.windows.iter().enumerate() {
            for ws in windows {
                let means = Metric::ALL.map(|m| ws.mean.get(m).to_string());
                let sigmas = Metric::ALL.map(|m| ws.sigma.get(m).to_string());
                writeln!(
                    w,
                    "{model},{},{},{},{},{},{}",
                    s.scenario,
                    r.alphas[a],
                    ws.start_year,
                    ws.window_years,
                    means.join(","),
                    sigmas.join(",")
                )
                .map_err(report_io(&path))?;
            }
        }
    }
    w.flush().map_err(report_io(&path))?;

    let (path, mut w) = csv_file(dir, "ttests.csv", "model,alpha,metric,scenario_a,scenario_b,t,df,p,reject")?;
    for t in &r.ttests {
        let res = &t.result;
        writeln!(
            w,
            "{model},{},{},{},{},{},{},{},{}",
            t.alpha,
            t.metric.key(),
            t.scenario_a,
            t.scenario_b,
            res.t_statistic,
            res.degrees_of_freedom,
            res.p_value,
            res.reject_at_95
        )
        .map_err(report_io(&path))?;
    }
    w.flush().map_err(report_io(&path))?;

    let (path, mut w) = csv_file(dir, "box_summaries.csv", "model,scenario,alpha,metric,min,q1,median,q3,max")?;
    for s in &r.scenarios {
        for (a, annual) in s.annual.iter().enumerate() {
            for m in Metric::ALL {
                let values: Vec<f64> = annual.iter().map(|(_, k)| k.get(m)).collect();
                let b = box_summary(&values).map_err(failed(Stage::MetricsStats))?;
                writeln!(w, "{model},{},{},{},{},{},{},{},{}", s.scenario, r.alphas[a], m.key(), b.min, b.q1, b.median, b.q3, b.max)
                    .map_err(report_io(&path))?;
            }
        }
    }
    w.flush().map_err(report_io(&path))?;

    // spread of last-window means across scenarios against the within-scenario sigma
    let (path, mut w) =
        csv_file(dir, "scenario_spread.csv", "model,alpha,metric,spread,min_sigma,mean_sigma,spread_lt_sigma")?;
    for (a, &alpha) in r.alphas.iter().enumerate() {
        for m in Metric::ALL {
            let means: Vec<f64> = r.scenarios.iter().map(|s| s.last_window(a).mean.get(m)).collect();
            let sigmas: Vec<f64> = r.scenarios.iter().map(|s| s.last_window(a).sigma.get(m)).collect();
            let spread = means.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - means.iter().cloned().fold(f64::INFINITY, f64::min);
            let min_sigma = sigmas.iter().cloned().fold(f64::INFINITY, f64::min);
            writeln!(w, "{model},{alpha},{},{spread},{min_sigma},{},{}", m.key(), mean(&sigmas), spread < min_sigma)
                .map_err(report_io(&path))?;
        }
    }
    w.flush().map_err(report_io(&path))?;

    let (path, mut w) = csv_file(dir, "normalized_means.csv", "model,scenario,region,wind,solar,load")?;
    for s in &r.scenarios {
        for (region, [wind, solar, load]) in &s.normalized_means {
            writeln!(w, "{model},{},{region},{wind},{solar},{load}", s.scenario).map_err(report_io(&path))?;
        }
    }
    w.flush().map_err(report_io(&path))?;

    let (path, mut w) = csv_file(dir, "normalization.csv", "country,mean_wind_cf,mean_solar_cf,mean_load,load_share")?;
    for ((c, n), share) in r.normalization.iter().zip(r.normalization.load_shares()) {
        writeln!(w, "{c},{},{},{},{share}", n.mean_wind_cf, n.mean_solar_cf, n.mean_load).map_err(report_io(&path))?;
    }
    w.flush().map_err(report_io(&path))?;
    Ok(())
}

fn sha256_file(path: &Path) -> std::io::Result<(String, u64)> {
    let mut file = File::open(path)?;
    let mut hasher = Sha256::new();
    let mut buf = vec![0u8; 1 << 20];
    let mut bytes = 0u64;
    loop {
        let n = file.read(&mut buf)?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
        bytes += n as u64;
    }
    Ok((hex::encode(hasher.finalize()), bytes))
}

/// Config at top level (so the manifest can be run again) plus a `[manifest]` table.
fn write_manifest(cfg: &RunConfig, results: &RunResults, dir: &Path) -> Result<(), PipelineError> {
    let config_text = cfg.to_toml();
    let mut doc: toml::Table = toml::from_str(&config_text).expect("serialized config parses");
    let mut m = toml::Table::new();
    m.insert("crate_version".into(), env!("CARGO_PKG_VERSION").into());
    m.insert("config_sha256".into(), hex::encode(Sha256::digest(config_text.as_bytes())).into());
    let mut inputs = toml::value::Array::new();
    let mut paths = vec![&cfg.inputs.grid, &cfg.inputs.weights, &cfg.inputs.demand];
    paths.extend(&cfg.inputs.reference);
    for s in &cfg.scenarios {
        paths.extend([&s.wind, &s.irradiance, &s.temperature]);
    }
    for p in paths {
        let (hash, bytes) = sha256_file(p).map_err(fail(Stage::Report, p))?;
        let mut t = toml::Table::new();
        t.insert("path".into(), p.display().to_string().into());
        t.insert("sha256".into(), hash.into());
        t.insert("bytes".into(), (bytes as i64).into());
        inputs.push(t.into());
    }
    m.insert("inputs".into(), inputs.into());
    let mut outputs = toml::Table::new();
    let mut names: Vec<_> = fs::read_dir(dir)
        .map_err(fail(Stage::Report, dir))?
        .filter_map(|e| e.ok().map(|e| e.file_name().to_string_lossy().into_owned()))
        .filter(|n| n.ends_with(".csv"))
        .collect();
    names.sort();
    for n in names {
        let path = dir.join(&n);
        let (hash, _) = sha256_file(&path).map_err(fail(Stage::Report, &path))?;
        outputs.insert(n, hash.into());
    }
    m.insert("outputs".into(), outputs.into());
    let mut timings = toml::Table::new();
    for (stage, secs) in &results.timings {
        timings.insert(stage.name().into(), (*secs).into());
    }
    m.insert("timings_seconds".into(), timings.into());
    doc.insert("manifest".into(), m.into());
    let path = dir.join("manifest.toml");
    fs::write(&path, toml::to_string(&doc).expect("manifest serializes")).map_err(fail(Stage::Report, &path))
}

/// Runs the pipeline into `out` through a staging directory.
///
/// On failure the staging directory becomes `out/quarantine` and holds the
/// partial outputs plus `error.txt`.
pub fn cmd_run(cfg: &RunConfig, out: &Path) -> Result<RunResults, PipelineError> {
    let name = out
        .file_name()
        .ok_or_else(|| PipelineError::Config(format!("output directory {} has no final component", out.display())))?;
    let staging = out.with_file_name(format!("{}.staging", name.to_string_lossy()));
    if staging.exists() {
        fs::remove_dir_all(&staging).map_err(|e| PipelineError::io(&staging, e))?;
    }
    fs::create_dir_all(&staging).map_err(|e| PipelineError::io(&staging, e))?;
    let outcome = execute(cfg, Some(&staging)).and_then(|r| {
        let start = Instant::now();
        write_manifest(cfg, &r, &staging)?;
        log::info!("manifest written in {:.2} s", start.elapsed().as_secs_f64());
        Ok(r)
    });
    match outcome {
        Ok(r) => {
            if out.exists() {
                fs::remove_dir_all(out).map_err(|e| PipelineError::io(out, e))?;
            }
            fs::rename(&staging, out).map_err(|e| PipelineError::io(out, e))?;
            Ok(r)
        }
        Err(err) => {
            let quarantine = out.join("quarantine");
            let moved = fs::write(staging.join("error.txt"), format!("{err}\n"))
                .and_then(|_| fs::create_dir_all(out))
                .and_then(|_| if quarantine.exists() { fs::remove_dir_all(&quarantine) } else { Ok(()) })
                .and_then(|_| fs::rename(&staging, &quarantine));
            if let Err(e) = moved {
                log::error!("could not quarantine partial outputs: {e}");
            }
            Err(err)
        }
    }
}
