#![allow(dead_code)]

use climate_vre::demand::{daily_mean_temperature, degree_day_series, DegreeDayParams, DemandSeries};
use climate_vre::weather::TimeAxis;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

/// Two years of demand with a constant-total diurnal profile plus a linear
/// degree-day response and optional i.i.d. per-step noise.
pub fn planted_demand(seed: u64, heating: f64, cooling: f64, noise_std: f64) -> (DemandSeries, Vec<f64>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let time = TimeAxis::whole_years(2001, 2);
    let day_noise = Normal::new(0.0, 3.0).unwrap();
    let offsets = [-3.0, -2.0, -1.0, 0.0, 1.0, 2.0, 3.0, 0.0];
    let mut temps = Vec::with_capacity(time.n_steps);
    for d in 0..time.n_days() {
        let season = -(2.0 * std::f64::consts::PI * ((d % 365) as f64 - 15.0) / 365.0).cos();
        let daily = 12.0 + 12.0 * season + day_noise.sample(&mut rng);
        temps.extend(offsets.iter().map(|o| daily + o));
    }
    let daily = daily_mean_temperature(&temps).unwrap();
    let (hdd, cdd) = degree_day_series(&daily, &DegreeDayParams::default());
    let step_noise = Normal::new(0.0, noise_std.max(1e-300)).unwrap();
    let values = (0..time.n_steps)
        .map(|t| {
            let (d, k) = (t / 8, t % 8);
            let shape = 1.0 + 0.2 * (2.0 * std::f64::consts::PI * (k as f64 - 6.0) / 8.0).cos();
            let e = if noise_std > 0.0 { step_noise.sample(&mut rng) } else { 0.0 };
            1000.0 * shape + (heating * hdd[d] + cooling * cdd[d]) / 8.0 + e
        })
        .collect();
    (DemandSeries::new("FR", time, values).unwrap(), hdd, cdd)
}

/// Normalized inputs for `n` countries over `steps` steps.
pub struct RandomInputs {
    pub wind: Vec<Vec<f64>>,
    pub solar: Vec<Vec<f64>>,
    pub load: Vec<Vec<f64>>,
    pub shares: Vec<f64>,
}

pub fn random_inputs(seed: u64, n: usize, steps: usize) -> RandomInputs {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut series = |lo: f64, hi: f64| -> Vec<Vec<f64>> {
        (0..n).map(|_| (0..steps).map(|_| rng.random_range(lo..hi)).collect()).collect()
    };
    let wind = series(0.0, 2.5);
    let solar = series(0.0, 3.0);
    let load = series(0.6, 1.4);
    let raw: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..1.0)).collect();
    let total: f64 = raw.iter().sum();
    RandomInputs { wind, solar, load, shares: raw.iter().map(|r| r / total).collect() }
}

/// K1..K4 straight from the definitions, with no library code involved.
pub fn brute_force_metrics(inp: &RandomInputs, alpha: f64, gamma: f64) -> [f64; 4] {
    let n = inp.shares.len();
    let steps = inp.load[0].len();
    let delta = |c: usize, t: usize| gamma * (alpha * inp.wind[c][t] + (1.0 - alpha) * inp.solar[c][t]) - inp.load[c][t];
    let mut b_agg = vec![0.0; steps];
    let mut isolated = 0.0;
    for t in 0..steps {
        let mut agg = 0.0;
        for c in 0..n {
            agg += inp.shares[c] * delta(c, t);
            let b = if delta(c, t) < 0.0 { -delta(c, t) } else { 0.0 };
            isolated += inp.shares[c] * b;
        }
        b_agg[t] = if agg < 0.0 { -agg } else { 0.0 };
    }
    let k1 = b_agg.iter().sum::<f64>() / steps as f64;
    let k2 = isolated / steps as f64 - k1;
    let mut k3 = 0.0;
    for &b in &b_agg {
        if b > k3 {
            k3 = b;
        }
    }
    let diffs: Vec<f64> = (1..steps).map(|t| b_agg[t] - b_agg[t - 1]).collect();
    let m = diffs.iter().sum::<f64>() / diffs.len() as f64;
    let var = diffs.iter().map(|d| (d - m) * (d - m)).sum::<f64>() / (diffs.len() - 1) as f64;
    [k1, k2, k3, var.sqrt()]
}

/// Two-sided Student-t tail probability by the closed-form series in θ = atan(t/√ν).
pub fn t_two_sided_closed_form(t: f64, df: usize) -> f64 {
    let theta = (t.abs() / (df as f64).sqrt()).atan();
    let (s, c) = theta.sin_cos();
    let a = if df % 2 == 1 {
        let mut sum = 0.0;
        if df > 1 {
            let mut term = c;
            sum = term;
            let mut k = 3;
            while k <= df - 2 {
                term *= c * c * (k - 1) as f64 / k as f64;
                sum += term;
                k += 2;
            }
        }
        2.0 / std::f64::consts::PI * (theta + s * sum)
    } else {
        let mut term = 1.0;
        let mut sum = 1.0;
        let mut k = 2;
        while k <= df - 2 {
            term *= c * c * (k - 1) as f64 / k as f64;
            sum += term;
            k += 2;
        }
        s * sum
    };
    1.0 - a
}
