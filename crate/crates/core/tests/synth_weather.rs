use climate_vre::demand::{daily_mean_temperature, degree_day_series, fit_demand_regression, DegreeDayParams};
use climate_vre::mismatch::Scenario;
use climate_vre::pipeline::{cmd_validate, write_bundle};
use climate_vre::synth::{generate, ScenarioSpec, SynthSpec};
use climate_vre::weather::{aggregate_to_country, STEPS_PER_YEAR};

fn spec(years: usize, warming: f64) -> SynthSpec {
    let mut hist = ScenarioSpec::historical(1986, years);
    hist.warming_offset = warming;
    SynthSpec { n_countries: 2, cells_per_country: 1, scenarios: vec![hist], ..SynthSpec::default() }
}

fn year_means(values: &[f64], cells: usize) -> Vec<f64> {
    values.chunks(STEPS_PER_YEAR * cells).map(|y| y.iter().sum::<f64>() / y.len() as f64).collect()
}

#[test]
fn zero_warming_keeps_decadal_means_equal() {
    let s = SynthSpec { scenarios: vec![ScenarioSpec::historical(1986, 20)], ..SynthSpec::default() };
    let b = generate(&s).unwrap();
    let t = &b.scenarios[0].temperature;
    let means = year_means(t.values(), t.grid().cell_count());
    let first: f64 = means[..10].iter().sum::<f64>() / 10.0;
    let last: f64 = means[10..].iter().sum::<f64>() / 10.0;
    assert!((first - last).abs() < 0.1, "gap {}", first - last);
}

#[test]
fn warming_offset_ramps_linearly() {
    let b = generate(&spec(10, 3.0)).unwrap();
    let t = &b.scenarios[0].temperature;
    let means = year_means(t.values(), t.grid().cell_count());
    let gap = means[9] - means[0];
    assert!((gap - 3.0).abs() < 0.4, "gap {gap}");
}

#[test]
fn planted_demand_is_recovered() {
    let b = generate(&SynthSpec { n_countries: 3, cells_per_country: 2, scenarios: vec![ScenarioSpec::historical(1990, 2)], ..SynthSpec::default() })
        .unwrap();
    let hist = &b.scenarios[0];
    let mut checked_cooling = false;
    for (demand, (country, planted)) in b.historical_demand.iter().zip(&b.planted) {
        assert_eq!(&demand.country, country);
        let temps = aggregate_to_country(&hist.temperature, b.weights.get(country).unwrap()).unwrap();
        let daily = daily_mean_temperature(&temps.values).unwrap();
        let (hdd, cdd) = degree_day_series(&daily, &DegreeDayParams::default());
        let fit = fit_demand_regression(demand, &hdd, &cdd).unwrap();
        // a response to degree days that never occur leaves no trace in the data
        let expect = |dd: &[f64], planted: f64| if dd.iter().any(|&x| x > 0.0) { planted } else { 0.0 };
        assert!((fit.regression.heating_coeff - expect(&hdd, planted.heating_coeff)).abs() < 1e-6, "{country}");
        assert!((fit.regression.cooling_coeff - expect(&cdd, planted.cooling_coeff)).abs() < 1e-6, "{country}");
        checked_cooling |= cdd.iter().any(|&x| x > 0.0);
    }
    assert!(checked_cooling, "no country had cooling degree days");
}

#[test]
fn bundle_passes_validation() {
    let mut s = SynthSpec { n_countries: 4, cells_per_country: 2, ..SynthSpec::default() };
    s.scenarios = vec![ScenarioSpec::historical(1990, 1), ScenarioSpec::end_of_century(Scenario::Rcp85, 1)];
    let b = generate(&s).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_bundle(&b, s.seed, dir.path()).unwrap();
    let mut resolved = cfg.clone();
    resolved.resolve_paths(dir.path());
    let report = cmd_validate(&resolved);
    assert!(report.is_clean(), "{:?}", report.findings);
    assert_eq!(resolved.analysis.window_years, 1);
}
