//! End-to-end acceptance checks, one line per criterion.

mod common;

use std::fs;
use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use climate_vre::bias::{fit_bias_transform, histogram, relative_entropy, ScaleGrid};
use climate_vre::convert::{CountryConversion, SolarPanelModel, Technology, WindTurbineModel};
use climate_vre::demand::fit_demand_regression;
use climate_vre::metrics::{key_metrics_for_range, transmission_benefit, CapacityStatistic, Metric};
use climate_vre::mismatch::{decompose, MismatchSet, NormalizedCountry, Scenario};
use climate_vre::pipeline::{cmd_run, cmd_synth, RunConfig, RunResults, SynthConfig};
use climate_vre::stats::{paired_t_test, students_t_two_sided_p};
use climate_vre::weather::{CountryWeights, FieldSeries, GridCell, GridDefinition, TimeAxis, Variable};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Weibull};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * b.abs().max(f64::MIN_POSITIVE)
}

fn normalized(inp: &common::RandomInputs) -> Vec<NormalizedCountry> {
    (0..inp.shares.len())
        .map(|c| NormalizedCountry {
            country: format!("C{c}"),
            wind: inp.wind[c].clone(),
            solar: inp.solar[c].clone(),
            load: inp.load[c].clone(),
        })
        .collect()
}

fn oracle_equivalence() -> Outcome {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    let mut pass = true;
    for seed in 0..10 {
        let inp = common::random_inputs(seed, 3, 64);
        let countries = normalized(&inp);
        for alpha in [0.0, 0.5, 1.0] {
            let set = MismatchSet::build(&countries, &inp.shares, alpha, 1.0, TimeAxis::new(2000, 64)).unwrap();
            let k = key_metrics_for_range(&set, 0..64, CapacityStatistic::Maximum).unwrap();
            let oracle = common::brute_force_metrics(&inp, alpha, 1.0);
            for (i, m) in Metric::ALL.iter().enumerate() {
                let got = k.get(*m);
                worst = worst.max((got - oracle[i]).abs() / oracle[i].abs().max(f64::MIN_POSITIVE));
                pass &= rel_close(got, oracle[i], 1e-12);
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(pass && secs < 1.0, format!("max relative error {worst:.2e} (tol 1e-12), {secs:.3} s (limit 1 s)"))
}

fn subadditivity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut violations = 0;
    for _ in 0..10_000 {
        let n = rng.random_range(2..6);
        let inp = common::random_inputs(rng.random(), n, 32);
        let set = MismatchSet::build(&normalized(&inp), &inp.shares, rng.random_range(0.0..=1.0), 1.0, TimeAxis::new(2000, 32))
            .unwrap();
        let k2 = transmission_benefit(&set.country_balancing, &set.shares, &set.balancing).unwrap();
        if k2 < 0.0 {
            violations += 1;
        }
    }
    let (ba, _) = decompose(&[1.0, -1.0]);
    let (bb, _) = decompose(&[-1.0, 1.0]);
    let (agg, _) = decompose(&[0.0, 0.0]);
    let cancel = transmission_benefit(&[ba, bb], &[0.5, 0.5], &agg).unwrap();
    outcome(violations == 0 && cancel == 0.5, format!("{violations} violations in 10^4 sets; cancellation case K2 = {cancel}"))
}

fn decomposition() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut bad = 0;
    for _ in 0..10_000 {
        let delta: Vec<f64> = (0..64).map(|_| rng.random_range(-3.0..3.0)).collect();
        let (b, c) = decompose(&delta);
        bad += (0..64).filter(|&i| c[i] - b[i] != delta[i] || b[i] * c[i] != 0.0).count();
    }
    outcome(bad == 0, format!("{bad} pointwise failures over 10^4 series of 64 steps (exact)"))
}

fn window_mean(r: &RunResults, scenario: Scenario, alpha: f64, m: Metric) -> f64 {
    let a = r.alpha_index(alpha).unwrap();
    r.scenario(scenario).unwrap().last_window(a).mean.get(m)
}

fn mix_anchors(r: &RunResults) -> Outcome {
    let h = Scenario::Historical;
    let (solar_k1, wind_k1) = (window_mean(r, h, 0.0, Metric::DispatchableElectricity), window_mean(r, h, 1.0, Metric::DispatchableElectricity));
    let (solar_k4, wind_k4) = (window_mean(r, h, 0.0, Metric::ShortTermVariability), window_mean(r, h, 1.0, Metric::ShortTermVariability));
    let pass = solar_k1 > 0.5 && wind_k1 < 0.35 && wind_k1 < solar_k1 && solar_k4 > wind_k4;
    outcome(
        pass,
        format!("solar-only K1 {solar_k1:.4} (> 0.5), wind-only K1 {wind_k1:.4} (< 0.35), K4 solar {solar_k4:.4} > wind {wind_k4:.4}"),
    )
}

fn normalization_identity(r: &RunResults) -> Outcome {
    let hist = r.scenario(Scenario::Historical).unwrap();
    let worst = hist.normalized_means.iter().flat_map(|(_, m)| m.iter().map(|v| (v - 1.0).abs())).fold(0.0, f64::max);
    let future_load: Vec<(Scenario, f64)> = r.scenarios[1..]
        .iter()
        .map(|s| (s.scenario, s.normalized_means.iter().find(|(c, _)| c == "EU").unwrap().1[2]))
        .collect();
    let pass = worst <= 1e-9 && future_load.iter().all(|&(_, l)| l < 1.0);
    let listed: Vec<String> = future_load.iter().map(|(s, l)| format!("{s} <L> {l:.4}")).collect();
    outcome(pass, format!("historical max |mean - 1| {worst:.2e} (tol 1e-9); {}", listed.join(", ")))
}

fn wind_conversion(seed: u64, steps: usize, scale: f64) -> CountryConversion {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dist = Weibull::new(scale, 2.0).unwrap();
    let grid = GridDefinition::new((0..2).map(|i| GridCell { cell_id: i, lat: 55.0, lon: i as f64 }).collect()).unwrap();
    let speeds: Vec<f64> = (0..2 * steps).map(|_| dist.sample(&mut rng)).collect();
    let field = FieldSeries::new(Variable::WindSpeed, grid, TimeAxis::new(2000, steps), speeds).unwrap();
    CountryConversion::wind(&field, &CountryWeights::uniform("DE", &[0, 1]).unwrap(), &WindTurbineModel::default()).unwrap()
}

fn solar_conversion(seed: u64, steps: usize) -> CountryConversion {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let grid = GridDefinition::new(vec![GridCell { cell_id: 0, lat: 40.0, lon: 0.0 }]).unwrap();
    let g: Vec<f64> = (0..steps).map(|t| if t % 8 < 3 { 0.0 } else { rng.random_range(0.0..900.0) }).collect();
    let ta: Vec<f64> = (0..steps).map(|_| rng.random_range(-5.0..35.0)).collect();
    let time = TimeAxis::new(2000, steps);
    let irr = FieldSeries::new(Variable::Irradiance, grid.clone(), time, g).unwrap();
    let temp = FieldSeries::new(Variable::Temperature, grid, time, ta).unwrap();
    CountryConversion::solar(&irr, &temp, &CountryWeights::uniform("ES", &[0]).unwrap(), &SolarPanelModel::default()).unwrap()
}

fn bias_recovery() -> Outcome {
    let grid = ScaleGrid::default();
    let mut recovered = Vec::new();
    for (tech, conv) in [(Technology::Wind, wind_conversion(1, 5000, 6.0)), (Technology::Solar, solar_conversion(2, 5000))] {
        let reference = histogram(&conv.capacity_factor_values(1.25), 100).unwrap();
        let t = fit_bias_transform(tech, |s| conv.capacity_factor_values(s), &reference, &grid).unwrap();
        recovered.push((tech, t.scale));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut violations = 0;
    for case in 0..100 {
        let raw = wind_conversion(100 + case, 1500, rng.random_range(4.0..9.0));
        let other = wind_conversion(500 + case, 1500, rng.random_range(4.0..9.0));
        let reference = histogram(&other.capacity_factor_values(rng.random_range(0.7..1.5)), 100).unwrap();
        let pre = relative_entropy(&histogram(&raw.capacity_factor_values(1.0), 100).unwrap(), &reference).unwrap();
        let t = fit_bias_transform(Technology::Wind, |s| raw.capacity_factor_values(s), &reference, &grid).unwrap();
        if t.fitted_divergence > pre {
            violations += 1;
        }
    }
    let exact = recovered.iter().all(|&(_, s)| s == 1.25);
    let listed: Vec<String> = recovered.iter().map(|(t, s)| format!("{t} {s}")).collect();
    outcome(exact && violations == 0, format!("planted 1.25 recovered as {}; {violations} KL increases in 100 cases", listed.join(", ")))
}

fn demand_recovery() -> Outcome {
    let (obs, hdd, cdd) = common::planted_demand(1, 3.0, 0.5, 0.0);
    let fit = fit_demand_regression(&obs, &hdd, &cdd).unwrap();
    let (eh, ec) = ((fit.regression.heating_coeff - 3.0).abs(), (fit.regression.cooling_coeff - 0.5).abs());
    let mut covered = 0;
    for seed in 0..100 {
        let (obs, hdd, cdd) = common::planted_demand(1000 + seed, 3.0, 0.5, 5.0);
        let d = fit_demand_regression(&obs, &hdd, &cdd).unwrap().diagnostics;
        if (d.raw_heating_coeff - 3.0).abs() <= 3.0 * d.heating_se && (d.raw_cooling_coeff - 0.5).abs() <= 3.0 * d.cooling_se {
            covered += 1;
        }
    }
    outcome(
        eh < 1e-6 && ec < 1e-6 && covered >= 95,
        format!("noise-free errors {eh:.1e}/{ec:.1e} (tol 1e-6); {covered}/100 noisy fits within 3 SE (need 95)"),
    )
}

fn t_test_correctness() -> Outcome {
    let d = [1.0, 2.0, 3.0, 4.0, 5.0];
    let r = paired_t_test(&d, &[0.0; 5]).unwrap();
    let t_err = (r.t_statistic - 3.0 * 2f64.sqrt()).abs();
    // references evaluated with 40-digit arithmetic
    let d19 = [
        0.3, -0.1, 0.5, 0.2, 0.45, -0.05, 0.15, 0.6, 0.25, 0.1, 0.35, -0.2, 0.4, 0.05, 0.3, 0.2, -0.15, 0.55, 0.1, 0.25,
    ];
    let r19 = paired_t_test(&d19, &[0.0; 20]).unwrap();
    let cases = [
        (r.p_value, 0.013_235_599_563_682_689_519_524_144_461_613_879_162_19),
        (r19.p_value, 0.000_551_871_992_119_529_371_048_550_539_294_739_536_681),
        (students_t_two_sided_p(1.0, 4), 0.373_900_966_300_058_885_005_431_372_755_242_654_076_6),
        (students_t_two_sided_p(2.5, 4), 0.066_766_544_811_988_145_038_897_483_472_789_989_406_6),
        (students_t_two_sided_p(1.0, 19), 0.329_876_800_921_125_058_849_880_027_059_374_082_662_7),
        (students_t_two_sided_p(2.093, 19), 0.050_002_378_942_827_982_355_615_875_445_500_707_026_13),
        (students_t_two_sided_p(0.3, 19), 0.767_434_660_339_263_555_322_028_952_245_585_451_083_5),
    ];
    let p_err = cases.iter().map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let t19_err = (r19.t_statistic - 4.143_682_699_778_999_691_319).abs();
    let same = paired_t_test(&d, &d).unwrap();
    let pass = t_err < 1e-12 && t19_err < 1e-12 && p_err < 1e-9 && same.p_value == 1.0 && !same.reject_at_95;
    outcome(pass, format!("|t - 3*sqrt(2)| {t_err:.1e}; max p error {p_err:.1e} (tol 1e-9, df 4 and 19); a=b gives p {}", same.p_value))
}

fn synth_and_run(dir: &Path, tag: &str) -> (RunResults, f64) {
    let start = Instant::now();
    let bundle = dir.join(format!("bundle_{tag}"));
    cmd_synth(&SynthConfig { seed: 7, ..SynthConfig::default() }, &bundle).unwrap();
    let cfg = RunConfig::load(bundle.join("run.toml")).unwrap();
    let results = cmd_run(&cfg, &dir.join(format!("out_{tag}"))).unwrap();
    let secs = start.elapsed().as_secs_f64();
    fs::remove_dir_all(&bundle).ok();
    (results, secs)
}

fn csv_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "csv"))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    v.sort();
    v
}

fn main() -> ExitCode {
    let dir = tempfile::tempdir().unwrap();
    let (results, first_secs) = synth_and_run(dir.path(), "a");
    let (_, second_secs) = synth_and_run(dir.path(), "b");
    let a = csv_bytes(&dir.path().join("out_a"));
    let identical = a == csv_bytes(&dir.path().join("out_b"));
    let n_alpha = results.alphas.len();
    let determinism = outcome(
        identical && first_secs < 120.0 && second_secs < 120.0 && results.countries.len() == 30 && results.scenarios.len() == 3,
        format!(
            "30 countries x 20 years x 3 scenarios, {n_alpha} alphas: {first_secs:.1} s and {second_secs:.1} s (limit 120 s), {} report files {}",
            a.len(),
            if identical { "byte-identical" } else { "DIFFER" }
        ),
    );

    let criteria = [
        ("oracle equivalence", oracle_equivalence()),
        ("subadditivity, K2 >= 0", subadditivity()),
        ("decomposition invariants", decomposition()),
        ("wind/solar mix anchors", mix_anchors(&results)),
        ("normalization identity", normalization_identity(&results)),
        ("bias-adjust recovery", bias_recovery()),
        ("degree-day regression recovery", demand_recovery()),
        ("t-test correctness", t_test_correctness()),
        ("determinism and performance", determinism),
    ];
    let mut failed = 0;
    for (i, (name, o)) in criteria.iter().enumerate() {
        println!("criterion {} [{}] {name}: {}", i + 1, if o.pass { "PASS" } else { "FAIL" }, o.detail);
        failed += usize::from(!o.pass);
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
