//! Deterministic synthetic scenario inputs.
//!
//! Countries are laid out on a regular lattice over a Europe-sized box, each
//! with a few grid cells. Per scenario the generator produces:
//!
//! * wind speed: a first-order autoregressive process driven by spatially
//!   correlated noise (exponential kernel), mapped to Rayleigh marginals with
//!   a winter maximum;
//! * irradiance: Haurwitz clear-sky irradiance from the solar elevation at the
//!   step midpoint, exactly zero when the sun is below the horizon, thinned by
//!   an autoregressive cloud field;
//! * temperature: latitude-dependent seasonal and diurnal cycles, correlated
//!   noise and a warming offset ramped linearly over the period.
//!
//! Historical demand is planted as a diurnal/weekly profile whose daily totals
//! respond linearly to heating and cooling degree days. Reference capacity
//! factors come from the historical drivers scaled by known bias factors.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use statrs::function::erf::erfc;

use crate::bias::ReferenceSamples;
use crate::convert::{CountryConversion, SolarPanelModel, Technology, WindTurbineModel};
use crate::demand::{daily_mean_temperature, degree_day_series, DegreeDayParams, DemandSeries};
use crate::mismatch::Scenario;
use crate::weather::{
    aggregate_to_country, CountryWeights, FieldSeries, GridCell, GridDefinition, TimeAxis, Variable, WeightTable,
    EUROPEAN_COUNTRIES,
};

/// One simulated period.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSpec {
    pub scenario: Scenario,
    pub start_year: i32,
    pub years: usize,
    /// Temperature offset at the first year, °C.
    pub base_offset: f64,
    /// Additional warming reached by the last year, ramped linearly, °C.
    pub warming_offset: f64,
    /// Multiplier on wind speeds.
    pub wind_factor: f64,
    /// Multiplier on clear-sky irradiance.
    pub irradiance_factor: f64,
}

impl ScenarioSpec {
    pub fn historical(start_year: i32, years: usize) -> Self {
        Self {
            scenario: Scenario::Historical,
            start_year,
            years,
            base_offset: 0.0,
            warming_offset: 0.0,
            wind_factor: 1.0,
            irradiance_factor: 1.0,
        }
    }

    /// End-of-century period with a pathway-dependent warming.
    pub fn end_of_century(scenario: Scenario, years: usize) -> Self {
        let (base, ramp, wind, irr) = match scenario {
            Scenario::Historical => (0.0, 0.0, 1.0, 1.0),
            Scenario::Rcp26 => (1.0, 0.1, 0.995, 0.995),
            Scenario::Rcp45 => (2.0, 0.4, 0.99, 0.99),
            Scenario::Rcp85 => (3.5, 1.0, 0.985, 0.985),
        };
        Self {
            scenario,
            start_year: 2080,
            years,
            base_offset: base,
            warming_offset: ramp,
            wind_factor: wind,
            irradiance_factor: irr,
        }
    }

    pub fn time(&self) -> TimeAxis {
        TimeAxis::whole_years(self.start_year, self.years)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub seed: u64,
    pub n_countries: usize,
    pub cells_per_country: usize,
    pub scenarios: Vec<ScenarioSpec>,
    /// e-folding distance of the wind noise correlation, km.
    pub wind_spatial_corr_km: f64,
    /// Lag-1 (3-hourly) autocorrelation of the wind driver process.
    pub wind_lag1: f64,
    /// Mean 10 m wind speed, m/s.
    pub wind_mean: f64,
    /// Relative winter excess of wind speed.
    pub wind_seasonal_amplitude: f64,
    pub cloud_spatial_corr_km: f64,
    pub cloud_lag1: f64,
    /// Irradiance fraction removed at full cloud cover.
    pub cloud_depth: f64,
    pub temperature_seasonal_amplitude: f64,
    pub temperature_diurnal_amplitude: f64,
    pub temperature_noise_std: f64,
    pub temperature_lag1: f64,
    /// Daily-total demand response per heating degree day, as a fraction of base daily demand.
    pub heating_sensitivity: f64,
    pub cooling_sensitivity: f64,
    /// Relative diurnal amplitude of demand on weekdays; weekends use 60 % of it.
    pub demand_diurnal_amplitude: f64,
    /// Relative std of i.i.d. per-step demand noise; 0 plants an exact fit.
    pub demand_noise_std: f64,
    /// Driver scales behind the reference capacity factors.
    pub reference_wind_scale: f64,
    pub reference_solar_scale: f64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            seed: 7,
            n_countries: 30,
            cells_per_country: 2,
            scenarios: vec![
                ScenarioSpec::historical(1986, 20),
                ScenarioSpec::end_of_century(Scenario::Rcp45, 20),
                ScenarioSpec::end_of_century(Scenario::Rcp85, 20),
            ],
            wind_spatial_corr_km: 800.0,
            wind_lag1: 0.93,
            wind_mean: 6.5,
            wind_seasonal_amplitude: 0.15,
            cloud_spatial_corr_km: 600.0,
            cloud_lag1: 0.85,
            cloud_depth: 0.7,
            temperature_seasonal_amplitude: 8.0,
            temperature_diurnal_amplitude: 4.0,
            temperature_noise_std: 2.0,
            temperature_lag1: 0.95,
            heating_sensitivity: 0.02,
            cooling_sensitivity: 0.03,
            demand_diurnal_amplitude: 0.25,
            demand_noise_std: 0.0,
            reference_wind_scale: 1.08,
            reference_solar_scale: 0.94,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpecError(pub String);

impl std::fmt::Display for SynthSpecError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "invalid synth spec: {}", self.0)
    }
}

impl std::error::Error for SynthSpecError {}

impl SynthSpec {
    pub fn validate(&self) -> Result<(), SynthSpecError> {
        let fail = |m: &str| Err(SynthSpecError(m.to_string()));
        if self.n_countries == 0 || self.n_countries > EUROPEAN_COUNTRIES.len() {
            return fail("n_countries must be in 1..=30");
        }
        if self.cells_per_country == 0 {
            return fail("cells_per_country must be positive");
        }
        if self.scenarios.is_empty() || self.scenarios.iter().any(|s| s.years == 0) {
            return fail("need at least one scenario with positive years");
        }
        if self.scenarios[0].scenario != Scenario::Historical {
            return fail("the first scenario must be historical");
        }
        if !(self.wind_spatial_corr_km > 0.0 && self.cloud_spatial_corr_km > 0.0) {
            return fail("correlation lengths must be positive");
        }
        let lag_ok = |x: f64| (0.0..1.0).contains(&x);
        if !(lag_ok(self.wind_lag1) && lag_ok(self.cloud_lag1) && lag_ok(self.temperature_lag1)) {
            return fail("lag-1 autocorrelations must lie in [0, 1)");
        }
        if !(self.wind_mean > 0.0) || !(0.0..1.0).contains(&self.cloud_depth) {
            return fail("wind_mean must be positive and cloud_depth in [0, 1)");
        }
        if self.heating_sensitivity < 0.0 || self.cooling_sensitivity < 0.0 || self.demand_noise_std < 0.0 {
            return fail("demand sensitivities and noise must be non-negative");
        }
        if !(0.0..1.0).contains(&self.demand_diurnal_amplitude) {
            return fail("demand_diurnal_amplitude must lie in [0, 1)");
        }
        Ok(())
    }
}

/// Generated fields of one scenario.
#[derive(Debug, Clone)]
pub struct SynthScenario {
    pub spec: ScenarioSpec,
    pub wind: FieldSeries,
    pub irradiance: FieldSeries,
    pub temperature: FieldSeries,
}

/// Demand response planted into the historical series of a country.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlantedDemand {
    /// MWh per step.
    pub base_load: f64,
    /// MWh per degree day of daily total.
    pub heating_coeff: f64,
    pub cooling_coeff: f64,
}

#[derive(Debug, Clone)]
pub struct SynthBundle {
    pub grid: GridDefinition,
    pub weights: WeightTable,
    pub scenarios: Vec<SynthScenario>,
    pub reference: ReferenceSamples,
    pub historical_demand: Vec<DemandSeries>,
    pub planted: Vec<(String, PlantedDemand)>,
}

struct Country {
    code: &'static str,
    lat: f64,
    lon: f64,
}

fn layout(n: usize) -> Vec<Country> {
    let cols = (n as f64 * 1.3).sqrt().ceil() as usize;
    let rows = n.div_ceil(cols);
    (0..n)
        .map(|i| {
            let (r, c) = (i / cols, i % cols);
            let lat = 38.0 + 30.0 * (r as f64 + 0.5) / rows as f64;
            let lon = -8.0 + 36.0 * (c as f64 + 0.5) / cols as f64;
            Country { code: EUROPEAN_COUNTRIES[i], lat, lon }
        })
        .collect()
}

fn distance_km(a: &GridCell, b: &GridCell) -> f64 {
    let mean_lat = ((a.lat + b.lat) / 2.0).to_radians();
    let dx = (a.lon - b.lon) * 111.32 * mean_lat.cos();
    let dy = (a.lat - b.lat) * 110.57;
    (dx * dx + dy * dy).sqrt()
}

/// Lower Cholesky factor of the exponential covariance `exp(-d / length)`.
fn correlation_factor(cells: &[GridCell], length_km: f64) -> DMatrix<f64> {
    let n = cells.len();
    let cov = DMatrix::from_fn(n, n, |i, j| {
        let c = (-distance_km(&cells[i], &cells[j]) / length_km).exp();
        if i == j {
            c + 1e-9
        } else {
            c
        }
    });
    cov.cholesky().expect("exponential kernel is positive definite").l()
}

/// AR(1) field with unit marginal variance and spatially correlated innovations.
struct CorrelatedAr1 {
    factor: DMatrix<f64>,
    lag1: f64,
    innovation: f64,
    state: Vec<f64>,
    noise: Vec<f64>,
}

impl CorrelatedAr1 {
    fn new(factor: DMatrix<f64>, lag1: f64, rng: &mut ChaCha8Rng) -> Self {
        let n = factor.nrows();
        let mut s = Self { factor, lag1, innovation: (1.0 - lag1 * lag1).sqrt(), state: vec![0.0; n], noise: vec![0.0; n] };
        s.state = s.correlated(rng);
        s
    }

    fn correlated(&mut self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let n = self.state.len();
        for e in &mut self.noise {
            *e = StandardNormal.sample(rng);
        }
        (0..n).map(|i| (0..=i).map(|j| self.factor[(i, j)] * self.noise[j]).sum()).collect()
    }

    fn step(&mut self, rng: &mut ChaCha8Rng) -> &[f64] {
        let eps = self.correlated(rng);
        for (s, e) in self.state.iter_mut().zip(eps) {
            *s = self.lag1 * *s + self.innovation * e;
        }
        &self.state
    }
}

fn normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

/// Sine of the solar elevation at `lat`, `lon`, day of year and UTC hour.
pub fn sin_solar_elevation(lat: f64, lon: f64, day_of_year: usize, utc_hour: f64) -> f64 {
    let decl = (-23.44_f64).to_radians() * (2.0 * PI * (day_of_year as f64 + 10.0) / 365.0).cos();
    let solar_hour = utc_hour + lon / 15.0;
    let hour_angle = (15.0 * (solar_hour - 12.0)).to_radians();
    let phi = lat.to_radians();
    phi.sin() * decl.sin() + phi.cos() * decl.cos() * hour_angle.cos()
}

/// Haurwitz clear-sky irradiance, W/m²; zero at night.
pub fn clear_sky_irradiance(sin_elevation: f64) -> f64 {
    if sin_elevation <= 0.0 {
        0.0
    } else {
        1098.0 * sin_elevation * (-0.057 / sin_elevation).exp()
    }
}

fn seasonal_cos(day: usize) -> f64 {
    // +1 in mid-January, -1 in mid-July
    (2.0 * PI * (day as f64 - 15.0) / 365.0).cos()
}

fn scenario_seed(seed: u64, index: usize) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(index as u64 + 1)
}

fn generate_scenario(
    spec: &SynthSpec,
    scen: &ScenarioSpec,
    index: usize,
    grid: &GridDefinition,
    wind_factor_l: &DMatrix<f64>,
    cloud_factor_l: &DMatrix<f64>,
) -> SynthScenario {
    let mut rng = ChaCha8Rng::seed_from_u64(scenario_seed(spec.seed, index));
    let cells = grid.cells();
    let n = cells.len();
    let time = scen.time();
    let mut wind_proc = CorrelatedAr1::new(wind_factor_l.clone(), spec.wind_lag1, &mut rng);
    let mut cloud_proc = CorrelatedAr1::new(cloud_factor_l.clone(), spec.cloud_lag1, &mut rng);
    let mut temp_proc = CorrelatedAr1::new(wind_factor_l.clone(), spec.temperature_lag1, &mut rng);

    // Rayleigh scale giving the requested mean: mean = sigma * sqrt(pi / 2)
    let rayleigh_scale = spec.wind_mean / (PI / 2.0).sqrt();
    let mut wind = Vec::with_capacity(time.n_steps * n);
    let mut irr = Vec::with_capacity(time.n_steps * n);
    let mut temp = Vec::with_capacity(time.n_steps * n);
    let years = scen.years as f64;
    for t in 0..time.n_steps {
        let (day, hour) = time.day_and_hour(t);
        let season = seasonal_cos(day);
        let frac = if scen.years > 1 { (t / time.steps_per_year) as f64 / (years - 1.0) } else { 0.0 };
        let offset = scen.base_offset + scen.warming_offset * frac;
        let w = wind_proc.step(&mut rng).to_vec();
        let c = cloud_proc.step(&mut rng).to_vec();
        let z = temp_proc.step(&mut rng).to_vec();
        for (i, cell) in cells.iter().enumerate() {
            // Rayleigh quantile of the standard normal driver
            let u01 = normal_cdf(w[i]).clamp(1e-12, 1.0 - 1e-12);
            let speed = rayleigh_scale * (-2.0 * (1.0 - u01).ln()).sqrt();
            let speed = speed * (1.0 + spec.wind_seasonal_amplitude * season) * scen.wind_factor;
            wind.push(quantize(speed.max(0.0)));

            let sin_el = sin_solar_elevation(cell.lat, cell.lon, day, hour);
            let cover = normal_cdf(c[i]);
            let g = clear_sky_irradiance(sin_el) * (1.0 - spec.cloud_depth * cover) * scen.irradiance_factor;
            irr.push(if sin_el > 0.0 { quantize(g.max(0.0)) } else { 0.0 });

            let solar_hour = hour + cell.lon / 15.0;
            let annual_mean = 19.0 - 0.55 * (cell.lat - 37.0);
            let amplitude = spec.temperature_seasonal_amplitude * (1.0 + 0.012 * (cell.lat - 37.0));
            let value = annual_mean - amplitude * season
                + spec.temperature_diurnal_amplitude * (2.0 * PI * (solar_hour - 15.0) / 24.0).cos()
                + spec.temperature_noise_std * z[i]
                + offset;
            temp.push(quantize(value.clamp(-89.0, 59.0)));
        }
    }
    SynthScenario {
        spec: scen.clone(),
        wind: FieldSeries::new(Variable::WindSpeed, grid.clone(), time, wind).expect("wind in range"),
        irradiance: FieldSeries::new(Variable::Irradiance, grid.clone(), time, irr).expect("irradiance in range"),
        temperature: FieldSeries::new(Variable::Temperature, grid.clone(), time, temp).expect("temperature in range"),
    }
}

/// Rounds to 1e-3 so field files stay compact.
fn quantize(v: f64) -> f64 {
    (v * 1000.0).round() / 1000.0
}

/// Relative diurnal/weekly demand shape; each day's eight factors average to 1.
pub fn demand_shape(day: usize, step_in_day: usize, lon: f64, amplitude: f64) -> f64 {
    let weekend = day % 7 >= 5;
    let amp = if weekend { 0.6 * amplitude } else { amplitude };
    let local_hour = step_in_day as f64 * 3.0 + 1.5 + lon / 15.0;
    1.0 + amp * (2.0 * PI * (local_hour - 18.0) / 24.0).cos()
}

/// Generates a full synthetic bundle.
pub fn generate(spec: &SynthSpec) -> Result<SynthBundle, SynthSpecError> {
    spec.validate()?;
    let countries = layout(spec.n_countries);
    let mut layout_rng = ChaCha8Rng::seed_from_u64(spec.seed ^ 0x5EED_0F_C0DE);
    let mut cells = Vec::new();
    let mut weights = Vec::new();
    for country in &countries {
        let ids: Vec<usize> = (0..spec.cells_per_country).map(|k| cells.len() + k).collect();
        for &id in &ids {
            let dlat: f64 = rand::Rng::random_range(&mut layout_rng, -1.2..1.2);
            let dlon: f64 = rand::Rng::random_range(&mut layout_rng, -1.8..1.8);
            cells.push(GridCell { cell_id: id, lat: country.lat + dlat, lon: country.lon + dlon });
        }
        weights.push(CountryWeights::uniform(country.code, &ids).expect("uniform weights are valid"));
    }
    let grid = GridDefinition::new(cells).expect("synthetic grid is valid");
    let weights = WeightTable::new(weights);
    let wind_l = correlation_factor(grid.cells(), spec.wind_spatial_corr_km);
    let cloud_l = correlation_factor(grid.cells(), spec.cloud_spatial_corr_km);

    let scenarios: Vec<SynthScenario> = spec
        .scenarios
        .iter()
        .enumerate()
        .map(|(i, s)| generate_scenario(spec, s, i, &grid, &wind_l, &cloud_l))
        .collect();
    let hist = &scenarios[0];

    let turbine = WindTurbineModel::<f64>::default();
    let panel = SolarPanelModel::<f64>::default();
    let params = DegreeDayParams::<f64>::default();
    let mut reference = ReferenceSamples::new();
    let mut historical_demand = Vec::new();
    let mut planted = Vec::new();
    let mut demand_rng = ChaCha8Rng::seed_from_u64(scenario_seed(spec.seed, 1000));
    for country in &countries {
        let cw = weights.get(country.code).expect("weights exist for every country");
        let wind_conv = CountryConversion::wind(&hist.wind, cw, &turbine).expect("aligned inputs");
        let solar_conv = CountryConversion::solar(&hist.irradiance, &hist.temperature, cw, &panel).expect("aligned inputs");
        reference.insert(
            (country.code.to_string(), Technology::Wind),
            wind_conv.capacity_factor_values(spec.reference_wind_scale),
        );
        reference.insert(
            (country.code.to_string(), Technology::Solar),
            solar_conv.capacity_factor_values(spec.reference_solar_scale),
        );

        let temps = aggregate_to_country(&hist.temperature, cw).expect("weights match grid");
        let daily = daily_mean_temperature(&temps.values).expect("whole days");
        let (hdd, cdd) = degree_day_series(&daily, &params);
        let base_load: f64 = rand::Rng::random_range(&mut demand_rng, 2_000.0..20_000.0);
        let daily_base = base_load * 8.0;
        let p = PlantedDemand {
            base_load,
            heating_coeff: spec.heating_sensitivity * daily_base,
            cooling_coeff: spec.cooling_sensitivity * daily_base,
        };
        let time = hist.spec.time();
        let values: Vec<f64> = (0..time.n_steps)
            .map(|t| {
                let d = time.day_of(t);
                let shape = demand_shape(d, t % 8, country.lon, spec.demand_diurnal_amplitude);
                let dd = (p.heating_coeff * hdd[d] + p.cooling_coeff * cdd[d]) / 8.0;
                let noise = if spec.demand_noise_std > 0.0 {
                    let e: f64 = StandardNormal.sample(&mut demand_rng);
                    spec.demand_noise_std * base_load * e
                } else {
                    0.0
                };
                (base_load * shape + dd + noise).max(0.0)
            })
            .collect();
        historical_demand.push(DemandSeries::new(country.code, time, values).expect("non-negative demand"));
        planted.push((country.code.to_string(), p));
    }

    Ok(SynthBundle { grid, weights, scenarios, reference, historical_demand, planted })
}
