//! Wind and solar capacity-factor conversion.
//!
//! Conversion runs per grid cell and the resulting capacity factors are then
//! aggregated with the country weights (convert-then-aggregate), since the
//! power curve is nonlinear.

use std::fmt;

use thiserror::Error;

use crate::weather::{CountryWeights, FieldSeries, TimeAxis, Variable, WeatherError};
use crate::Scalar;

#[derive(Debug, Error)]
pub enum ConvertError {
    #[error("invalid turbine model: {0}")]
    InvalidTurbine(String),
    #[error("invalid panel model: {0}")]
    InvalidPanel(String),
    #[error("axis mismatch: {0}")]
    AxisMismatch(String),
    #[error("capacity factor {value} at step {step} outside [0, 1]")]
    OutOfRange { step: usize, value: f64 },
    #[error(transparent)]
    Weather(#[from] WeatherError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Technology {
    Wind,
    Solar,
}

impl Technology {
    pub fn tag(self) -> &'static str {
        match self {
            Technology::Wind => "wind",
            Technology::Solar => "solar",
        }
    }

    pub fn from_tag(tag: &str) -> Option<Self> {
        match tag {
            "wind" => Some(Technology::Wind),
            "solar" => Some(Technology::Solar),
            _ => None,
        }
    }
}

impl fmt::Display for Technology {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

/// Hub-height extrapolation plus a tabulated power curve.
///
/// The first curve point is the cut-in speed and the last is the cut-out
/// speed. Output is zero at or below cut-in and at or above cut-out, and
/// linearly interpolated in between.
#[derive(Debug, Clone, PartialEq)]
pub struct WindTurbineModel<T: Scalar = f64> {
    hub_height: T,
    reference_height: T,
    shear_exponent: T,
    power_curve: Vec<(T, T)>,
}

impl<T: Scalar> WindTurbineModel<T> {
    pub fn new(hub_height: T, reference_height: T, shear_exponent: T, power_curve: Vec<(T, T)>) -> Result<Self, ConvertError> {
        let bad = |m: String| Err(ConvertError::InvalidTurbine(m));
        if !(hub_height > T::zero() && reference_height > T::zero()) {
            return bad(format!("heights must be positive (hub {hub_height}, reference {reference_height})"));
        }
        if !shear_exponent.is_finite() || shear_exponent < T::zero() {
            return bad(format!("shear exponent {shear_exponent} must be finite and non-negative"));
        }
        if power_curve.len() < 4 {
            return bad(format!("power curve needs at least 4 points, got {}", power_curve.len()));
        }
        if power_curve.windows(2).any(|w| !(w[1].0 > w[0].0)) {
            return bad("power curve speeds must be strictly increasing".into());
        }
        if power_curve[0].0 < T::zero() {
            return bad("power curve speeds must be non-negative".into());
        }
        if power_curve.iter().any(|&(_, cf)| !(cf >= T::zero() && cf <= T::one())) {
            return bad("power curve capacity factors must lie in [0, 1]".into());
        }
        if power_curve[0].1 != T::zero() {
            return bad("capacity factor at cut-in must be 0".into());
        }
        Ok(Self { hub_height, reference_height, shear_exponent, power_curve })
    }

    pub fn hub_height(&self) -> T {
        self.hub_height
    }

    pub fn reference_height(&self) -> T {
        self.reference_height
    }

    pub fn shear_exponent(&self) -> T {
        self.shear_exponent
    }

    pub fn power_curve(&self) -> &[(T, T)] {
        &self.power_curve
    }

    pub fn cut_in(&self) -> T {
        self.power_curve[0].0
    }

    pub fn cut_out(&self) -> T {
        self.power_curve[self.power_curve.len() - 1].0
    }

    /// Power-law factor `(hub / reference)^shear`.
    pub fn shear_factor(&self) -> T {
        (self.hub_height / self.reference_height).powf(self.shear_exponent)
    }

    /// Wind speed at hub height from a reference-height speed.
    pub fn extrapolate_hub_speed(&self, u_ref: T) -> T {
        u_ref * self.shear_factor()
    }

    pub fn wind_capacity_factor(&self, u_hub: T) -> T {
        let curve = &self.power_curve;
        if !(u_hub > self.cut_in()) || u_hub >= self.cut_out() {
            return T::zero();
        }
        // first point with speed > u_hub; guaranteed in 1..len
        let hi = curve.partition_point(|&(s, _)| s <= u_hub);
        let (s0, c0) = curve[hi - 1];
        let (s1, c1) = curve[hi];
        c0 + (u_hub - s0) / (s1 - s0) * (c1 - c0)
    }
}

impl<T: Scalar> Default for WindTurbineModel<T> {
    /// Cut-in 4 m/s, rated 13 m/s, cut-out 25 m/s; hub 80 m over a 10 m
    /// reference with shear exponent 0.143.
    fn default() -> Self {
        let curve = [(4.0, 0.0), (8.5, 0.5), (13.0, 1.0), (25.0, 1.0)];
        Self::new(
            T::lit(80.0),
            T::lit(10.0),
            T::lit(0.143),
            curve.iter().map(|&(s, c)| (T::lit(s), T::lit(c))).collect(),
        )
        .expect("default turbine is valid")
    }
}

/// Irradiance- and temperature-dependent PV output.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolarPanelModel<T: Scalar = f64> {
    pub stc_irradiance: T,
    pub temperature_coefficient: T,
    pub stc_cell_temperature: T,
    pub mounting_coefficient: T,
}

impl<T: Scalar> SolarPanelModel<T> {
    /// Panel at standard test conditions (1000 W/m², 25 °C).
    pub fn new(temperature_coefficient: T, mounting_coefficient: T) -> Result<Self, ConvertError> {
        if !(temperature_coefficient >= T::lit(-0.01) && temperature_coefficient <= T::zero()) {
            return Err(ConvertError::InvalidPanel(format!(
                "temperature coefficient {temperature_coefficient} outside [-0.01, 0]"
            )));
        }
        if !(mounting_coefficient >= T::zero() && mounting_coefficient <= T::lit(0.06)) {
            return Err(ConvertError::InvalidPanel(format!(
                "mounting coefficient {mounting_coefficient} outside [0, 0.06]"
            )));
        }
        Ok(Self {
            stc_irradiance: T::lit(1000.0),
            temperature_coefficient,
            stc_cell_temperature: T::lit(25.0),
            mounting_coefficient,
        })
    }

    pub fn cell_temperature(&self, irradiance: T, ambient: T) -> T {
        ambient + self.mounting_coefficient * irradiance
    }

    pub fn solar_capacity_factor(&self, irradiance: T, ambient: T) -> T {
        if !(irradiance > T::zero()) {
            return T::zero();
        }
        let t_cell = self.cell_temperature(irradiance, ambient);
        let cf = irradiance / self.stc_irradiance
            * (T::one() + self.temperature_coefficient * (t_cell - self.stc_cell_temperature));
        cf.max(T::zero()).min(T::one())
    }
}

impl<T: Scalar> Default for SolarPanelModel<T> {
    /// Crystalline silicon: -0.4 %/°C, 0.035 °C·m²/W.
    fn default() -> Self {
        Self::new(T::lit(-0.004), T::lit(0.035)).expect("default panel is valid")
    }
}

/// Country capacity factor series, every value in [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct CapacityFactorSeries<T: Scalar = f64> {
    pub country: String,
    pub technology: Technology,
    pub time: TimeAxis,
    values: Vec<T>,
}

impl<T: Scalar> CapacityFactorSeries<T> {
    pub fn new(country: impl Into<String>, technology: Technology, time: TimeAxis, values: Vec<T>) -> Result<Self, ConvertError> {
        if values.len() != time.n_steps {
            return Err(ConvertError::AxisMismatch(format!("{} values for {} steps", values.len(), time.n_steps)));
        }
        if let Some(step) = values.iter().position(|v| !(*v >= T::zero() && *v <= T::one())) {
            return Err(ConvertError::OutOfRange { step, value: values[step].as_f64() });
        }
        Ok(Self { country: country.into(), technology, time, values })
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }
}

enum Driver<T: Scalar> {
    Wind { speed: Vec<T>, model: WindTurbineModel<T> },
    Solar { irradiance: Vec<T>, temperature: Vec<T>, model: SolarPanelModel<T> },
}

/// One country's conversion inputs, gathered from the weighted cells so the
/// driver can be rescaled and reconverted cheaply (see bias adjustment).
///
/// Driver arrays are time-major over the country's weighted cells.
pub struct CountryConversion<T: Scalar = f64> {
    country: String,
    time: TimeAxis,
    weights: Vec<T>,
    driver: Driver<T>,
}

fn gather<T: Scalar>(field: &FieldSeries<T>, cells: &[usize]) -> Vec<T> {
    let mut out = Vec::with_capacity(field.time().n_steps * cells.len());
    for t in 0..field.time().n_steps {
        let row = field.step(t);
        out.extend(cells.iter().map(|&c| row[c]));
    }
    out
}

fn check_variable<T: Scalar>(field: &FieldSeries<T>, expected: Variable) -> Result<(), ConvertError> {
    if field.variable() != expected {
        return Err(ConvertError::AxisMismatch(format!("expected a {expected} field, got {}", field.variable())));
    }
    Ok(())
}

impl<T: Scalar> CountryConversion<T> {
    pub fn wind(wind: &FieldSeries<T>, weights: &CountryWeights<T>, model: &WindTurbineModel<T>) -> Result<Self, ConvertError> {
        check_variable(wind, Variable::WindSpeed)?;
        weights.check_grid(wind.grid())?;
        let cells: Vec<usize> = weights.entries().iter().map(|e| e.0).collect();
        Ok(Self {
            country: weights.country().to_string(),
            time: wind.time(),
            weights: weights.entries().iter().map(|e| e.1).collect(),
            driver: Driver::Wind { speed: gather(wind, &cells), model: model.clone() },
        })
    }

    pub fn solar(
        irradiance: &FieldSeries<T>,
        temperature: &FieldSeries<T>,
        weights: &CountryWeights<T>,
        model: &SolarPanelModel<T>,
    ) -> Result<Self, ConvertError> {
        check_variable(irradiance, Variable::Irradiance)?;
        check_variable(temperature, Variable::Temperature)?;
        if !irradiance.aligned_with(temperature) {
            return Err(ConvertError::AxisMismatch("irradiance and temperature differ in grid or time axis".into()));
        }
        weights.check_grid(irradiance.grid())?;
        let cells: Vec<usize> = weights.entries().iter().map(|e| e.0).collect();
        Ok(Self {
            country: weights.country().to_string(),
            time: irradiance.time(),
            weights: weights.entries().iter().map(|e| e.1).collect(),
            driver: Driver::Solar {
                irradiance: gather(irradiance, &cells),
                temperature: gather(temperature, &cells),
                model: *model,
            },
        })
    }

    pub fn country(&self) -> &str {
        &self.country
    }

    pub fn technology(&self) -> Technology {
        match self.driver {
            Driver::Wind { .. } => Technology::Wind,
            Driver::Solar { .. } => Technology::Solar,
        }
    }

    pub fn time(&self) -> TimeAxis {
        self.time
    }

    /// Country capacity factors with the driver (wind speed or irradiance)
    /// multiplied by `scale` before conversion.
    pub fn capacity_factor_values(&self, scale: T) -> Vec<T> {
        let k = self.weights.len();
        let weighted = |cf: &dyn Fn(usize) -> T, t: usize| -> T {
            let mut acc = T::zero();
            for (j, &w) in self.weights.iter().enumerate() {
                acc += w * cf(t * k + j);
            }
            acc.max(T::zero()).min(T::one())
        };
        match &self.driver {
            Driver::Wind { speed, model } => {
                let shear = model.shear_factor();
                (0..self.time.n_steps)
                    .map(|t| weighted(&|i| model.wind_capacity_factor(scale * speed[i] * shear), t))
                    .collect()
            }
            Driver::Solar { irradiance, temperature, model } => (0..self.time.n_steps)
                .map(|t| weighted(&|i| model.solar_capacity_factor(scale * irradiance[i], temperature[i]), t))
                .collect(),
        }
    }

    pub fn capacity_factor(&self, scale: T) -> CapacityFactorSeries<T> {
        CapacityFactorSeries {
            country: self.country.clone(),
            technology: self.technology(),
            time: self.time,
            values: self.capacity_factor_values(scale),
        }
    }
}

/// Unadjusted wind capacity factors for one country.
pub fn convert_country_wind_cf<T: Scalar>(
    wind: &FieldSeries<T>,
    weights: &CountryWeights<T>,
    model: &WindTurbineModel<T>,
) -> Result<CapacityFactorSeries<T>, ConvertError> {
    Ok(CountryConversion::wind(wind, weights, model)?.capacity_factor(T::one()))
}

/// Unadjusted solar capacity factors for one country.
pub fn convert_country_solar_cf<T: Scalar>(
    irradiance: &FieldSeries<T>,
    temperature: &FieldSeries<T>,
    weights: &CountryWeights<T>,
    model: &SolarPanelModel<T>,
) -> Result<CapacityFactorSeries<T>, ConvertError> {
    Ok(CountryConversion::solar(irradiance, temperature, weights, model)?.capacity_factor(T::one()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::weather::{GridCell, GridDefinition};
    use proptest::prelude::*;

    #[test]
    fn hub_extrapolation() {
        let m = WindTurbineModel::<f64>::default();
        assert_eq!(m.extrapolate_hub_speed(0.0), 0.0);
        let same = WindTurbineModel::new(10.0, 10.0, 0.3, m.power_curve().to_vec()).unwrap();
        assert_eq!(same.extrapolate_hub_speed(7.3), 7.3);
        // 8 * 8^0.143 evaluated at 40 digits
        let oracle = 10.770_400_554_214_258_318_397_295_947_366_284_495_29_f64;
        assert!((m.extrapolate_hub_speed(8.0) - oracle).abs() <= 1e-14 * oracle);
    }

    #[test]
    fn power_curve_points() {
        let m = WindTurbineModel::<f64>::default();
        assert_eq!(m.wind_capacity_factor(0.0), 0.0);
        assert_eq!(m.wind_capacity_factor(4.0), 0.0);
        assert_eq!(m.wind_capacity_factor(8.5), 0.5);
        assert_eq!(m.wind_capacity_factor(13.0), 1.0);
        assert_eq!(m.wind_capacity_factor(20.0), 1.0);
        assert_eq!(m.wind_capacity_factor(25.0), 0.0);
        assert_eq!(m.wind_capacity_factor(26.0), 0.0);
        assert!((m.wind_capacity_factor(6.25) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn turbine_validation() {
        let c = |v: &[(f64, f64)]| v.to_vec();
        assert!(WindTurbineModel::new(80.0, 10.0, 0.143, c(&[(4.0, 0.0), (13.0, 1.0), (25.0, 1.0)])).is_err());
        assert!(WindTurbineModel::new(80.0, 10.0, 0.143, c(&[(4.0, 0.0), (9.0, 0.5), (9.0, 1.0), (25.0, 1.0)])).is_err());
        assert!(WindTurbineModel::new(80.0, 10.0, 0.143, c(&[(4.0, 0.1), (9.0, 0.5), (13.0, 1.0), (25.0, 1.0)])).is_err());
        assert!(WindTurbineModel::new(80.0, 10.0, 0.143, c(&[(4.0, 0.0), (9.0, 1.5), (13.0, 1.0), (25.0, 1.0)])).is_err());
        assert!(WindTurbineModel::new(0.0, 10.0, 0.143, c(&[(4.0, 0.0), (9.0, 0.5), (13.0, 1.0), (25.0, 1.0)])).is_err());
    }

    #[test]
    fn solar_cases() {
        let p = SolarPanelModel::<f64>::default();
        assert_eq!(p.solar_capacity_factor(0.0, 40.0), 0.0);
        // T_amb = 25 - 0.035 * 1000 puts the cell at 25 °C
        assert!((p.solar_capacity_factor(1000.0, -10.0) - 1.0).abs() < 1e-12);
        // T_cell = 30 + 0.035*800 = 58; 0.8 * (1 - 0.004*33) = 0.6944
        let oracle = 0.8 * (1.0 - 0.004 * 33.0);
        assert!((p.solar_capacity_factor(800.0, 30.0) - oracle).abs() < 1e-12);
        assert!((oracle - 0.6944).abs() < 1e-12);
        assert!(SolarPanelModel::new(0.001, 0.03).is_err());
        assert!(SolarPanelModel::new(-0.004, 0.07).is_err());
        // cold sunny cell clamps at 1
        assert_eq!(p.solar_capacity_factor(1100.0, -40.0), 1.0);
    }

    fn field(var: Variable, cells: usize, values: Vec<f64>) -> FieldSeries {
        let grid = GridDefinition::new((0..cells).map(|i| GridCell { cell_id: i, lat: 50.0, lon: i as f64 }).collect())
            .unwrap();
        let steps = values.len() / cells;
        FieldSeries::new(var, grid, TimeAxis::new(2000, steps), values).unwrap()
    }

    #[test]
    fn country_conversion_matches_pointwise() {
        let m = WindTurbineModel::<f64>::default();
        let speeds = vec![3.0, 6.0, 9.0, 12.0, 20.0, 1.0];
        let f = field(Variable::WindSpeed, 2, speeds.clone());
        let single = CountryWeights::new("DE", vec![(1, 1.0)]).unwrap();
        let cf = convert_country_wind_cf(&f, &single, &m).unwrap();
        let expect: Vec<f64> = [6.0, 12.0, 1.0].iter().map(|&u| m.wind_capacity_factor(m.extrapolate_hub_speed(u))).collect();
        assert_eq!(cf.values(), &expect[..]);

        let same = field(Variable::WindSpeed, 2, vec![7.0, 7.0, 2.0, 2.0]);
        let half = CountryWeights::new("DE", vec![(0, 0.5), (1, 0.5)]).unwrap();
        let cf = convert_country_wind_cf(&same, &half, &m).unwrap();
        let e0 = m.wind_capacity_factor(m.extrapolate_hub_speed(7.0));
        assert!((cf.values()[0] - e0).abs() < 1e-15);
    }

    #[test]
    fn solar_axis_mismatch() {
        let irr = field(Variable::Irradiance, 2, vec![100.0; 4]);
        let temp = field(Variable::Temperature, 2, vec![10.0; 6]);
        let w = CountryWeights::new("DE", vec![(0, 1.0)]).unwrap();
        assert!(matches!(
            convert_country_solar_cf(&irr, &temp, &w, &SolarPanelModel::default()),
            Err(ConvertError::AxisMismatch(_))
        ));
    }

    fn monotone_curve() -> impl Strategy<Value = Vec<(f64, f64)>> {
        (2.0..6.0f64, prop::collection::vec(0.5..4.0f64, 4..8), prop::collection::vec(0.0..1.0f64, 4..8)).prop_map(
            |(cut_in, gaps, cfs)| {
                let n = gaps.len().min(cfs.len());
                let mut levels: Vec<f64> = cfs[..n].to_vec();
                levels.sort_by(|a, b| a.partial_cmp(b).unwrap());
                levels[0] = 0.0;
                let mut s = cut_in;
                let mut curve = Vec::new();
                for i in 0..n {
                    curve.push((s, levels[i]));
                    s += gaps[i];
                }
                curve
            },
        )
    }

    proptest! {
        #[test]
        fn curve_monotone_and_banded(curve in monotone_curve(), u1 in 0.0..40.0f64, u2 in 0.0..40.0f64) {
            let m = WindTurbineModel::new(80.0, 10.0, 0.143, curve.clone()).unwrap();
            let (lo, hi) = if u1 <= u2 { (u1, u2) } else { (u2, u1) };
            let (a, b) = (m.wind_capacity_factor(lo), m.wind_capacity_factor(hi));
            prop_assert!((0.0..=1.0).contains(&a) && (0.0..=1.0).contains(&b));
            if hi < m.cut_out() {
                prop_assert!(a <= b + 1e-15);
            }
            if lo <= m.cut_in() || lo >= m.cut_out() {
                prop_assert_eq!(a, 0.0);
            }
        }

        #[test]
        fn extrapolation_monotone(u1 in 0.0..40.0f64, u2 in 0.0..40.0f64) {
            let m = WindTurbineModel::<f64>::default();
            let (lo, hi) = if u1 <= u2 { (u1, u2) } else { (u2, u1) };
            prop_assert!(m.extrapolate_hub_speed(lo) <= m.extrapolate_hub_speed(hi));
        }

        #[test]
        fn solar_dark_is_zero_and_cooling_helps(t1 in -40.0..50.0f64, t2 in -40.0..50.0f64, g in 1.0..600.0f64) {
            let p = SolarPanelModel::<f64>::default();
            prop_assert_eq!(p.solar_capacity_factor(0.0, t1), 0.0);
            let (cold, warm) = if t1 < t2 { (t1, t2) } else { (t2, t1) };
            if cold < warm {
                prop_assert!(p.solar_capacity_factor(g, cold) > p.solar_capacity_factor(g, warm));
            }
        }
    }
}
