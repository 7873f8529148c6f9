use std::ops::Range;

/// Hours per time step.
pub const STEP_HOURS: usize = 3;
/// Three-hourly steps per day.
pub const STEPS_PER_DAY: usize = 24 / STEP_HOURS;
/// Steps per 365-day (no-leap) year.
pub const STEPS_PER_YEAR: usize = 365 * STEPS_PER_DAY;

/// Uniform 3-hourly time axis on a no-leap calendar.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TimeAxis {
    pub start_year: i32,
    pub steps_per_year: usize,
    pub n_steps: usize,
}

impl TimeAxis {
    pub fn new(start_year: i32, n_steps: usize) -> Self {
        Self { start_year, steps_per_year: STEPS_PER_YEAR, n_steps }
    }

    /// Axis covering `years` whole years.
    pub fn whole_years(start_year: i32, years: usize) -> Self {
        Self::new(start_year, years * STEPS_PER_YEAR)
    }

    pub fn is_whole_years(&self) -> bool {
        self.n_steps > 0 && self.n_steps % self.steps_per_year == 0
    }

    /// Number of complete years covered.
    pub fn n_years(&self) -> usize {
        self.n_steps / self.steps_per_year
    }

    pub fn n_days(&self) -> usize {
        self.n_steps / STEPS_PER_DAY
    }

    pub fn end_year(&self) -> i32 {
        self.start_year + self.n_years() as i32 - 1
    }

    pub fn years(&self) -> impl Iterator<Item = i32> + '_ {
        (0..self.n_years()).map(move |i| self.start_year + i as i32)
    }

    /// Step range of the `index`-th year of the axis.
    pub fn year_steps(&self, index: usize) -> Range<usize> {
        index * self.steps_per_year..(index + 1) * self.steps_per_year
    }

    pub fn step_of_year(&self, step: usize) -> usize {
        step % self.steps_per_year
    }

    pub fn day_of(&self, step: usize) -> usize {
        step / STEPS_PER_DAY
    }

    /// Day of year (0-based) and hour of day at the middle of `step`.
    pub fn day_and_hour(&self, step: usize) -> (usize, f64) {
        let soy = self.step_of_year(step);
        let day = soy / STEPS_PER_DAY;
        let hour = (soy % STEPS_PER_DAY) as f64 * STEP_HOURS as f64 + STEP_HOURS as f64 / 2.0;
        (day, hour)
    }
}
