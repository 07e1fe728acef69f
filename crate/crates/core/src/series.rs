use crate::error::{Error, Result};

/// Sampled `(t, value)` pairs with unit labels.
///
/// Times are strictly increasing. Units are free text used for CSV headers
/// and diagnostics only.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub time_unit: &'static str,
    pub value_unit: &'static str,
}

impl TimeSeries {
    pub fn new(
        times: Vec<f64>,
        values: Vec<f64>,
        time_unit: &'static str,
        value_unit: &'static str,
    ) -> Self {
        assert_eq!(
            times.len(),
            values.len(),
            "times and values must have equal length"
        );
        Self {
            times,
            values,
            time_unit,
            value_unit,
        }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.times.iter().copied().zip(self.values.iter().copied())
    }

    pub fn max_value(&self) -> f64 {
        self.values
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Linear interpolation at `t`. Extrapolation is an error.
    pub fn interpolate(&self, t: f64) -> Result<f64> {
        let (start, end) = match (self.times.first(), self.times.last()) {
            (Some(&s), Some(&e)) => (s, e),
            _ => {
                return Err(Error::OutOfRange {
                    t,
                    start: f64::NAN,
                    end: f64::NAN,
                })
            }
        };
        if !(t >= start && t <= end) {
            return Err(Error::OutOfRange { t, start, end });
        }
        let idx = self.times.partition_point(|&x| x < t);
        if idx < self.times.len() && self.times[idx] == t {
            return Ok(self.values[idx]);
        }
        let (t0, t1) = (self.times[idx - 1], self.times[idx]);
        let (v0, v1) = (self.values[idx - 1], self.values[idx]);
        Ok(v0 + (v1 - v0) * (t - t0) / (t1 - t0))
    }
}

/// `n` log-spaced points on `[start, end]`, both ends included.
pub fn log_grid(start: f64, end: f64, n: usize) -> Vec<f64> {
    assert!(start > 0.0 && end > start && n >= 2);
    let (a, b) = (start.ln(), end.ln());
    let mut grid: Vec<f64> = (0..n)
        .map(|k| (a + (b - a) * k as f64 / (n - 1) as f64).exp())
        .collect();
    grid[0] = start;
    grid[n - 1] = end;
    grid
}

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}
