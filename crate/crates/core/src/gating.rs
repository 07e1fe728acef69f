//! Two-state voltage-gated channel kinetics.
//!
//! The opening probability obeys `dP/dt = a1(V) (1 - P) - a2(V) P`. For a
//! piecewise-constant voltage the solution is an exponential relaxation
//! towards `a1 / (a1 + a2)` with time constant `1 / (a1 + a2)` on every
//! segment, so traces are computed in closed form and chained.
//!
//! Rates are in 1/ms and voltages in mV. Waveform durations and trace times
//! are in seconds.

use crate::error::{invalid, Result};
use crate::series::TimeSeries;

/// Half-width of the band around the removable singularity of `a1`, in mV.
const SINGULAR_BAND: f64 = 1e-7;

/// Transition rates of a two-state channel, 1/ms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatePair {
    /// Closed to open.
    pub alpha1: f64,
    /// Open to closed.
    pub alpha2: f64,
}

impl RatePair {
    pub fn new(alpha1: f64, alpha2: f64) -> Result<Self> {
        if !(alpha1 >= 0.0 && alpha2 >= 0.0 && alpha1.is_finite() && alpha2.is_finite()) {
            return Err(invalid("alpha", "rates must be finite and non-negative"));
        }
        if alpha1 + alpha2 <= 0.0 {
            return Err(invalid("alpha", "total transition rate must be positive"));
        }
        Ok(Self { alpha1, alpha2 })
    }

    /// Right-hand side of the gating equation, 1/ms.
    pub fn derivative(&self, p: f64) -> f64 {
        self.alpha1 * (1.0 - p) - self.alpha2 * p
    }
}

/// Single-gate potassium rates in the classical Hodgkin-Huxley voltage
/// convention (`v_hh` in mV, rates in 1/ms).
pub fn potassium_rates(v_hh: f64) -> RatePair {
    let x = (v_hh + 10.0) / 10.0;
    let alpha1 = if (v_hh + 10.0).abs() < SINGULAR_BAND {
        // x / (e^x - 1) = 1 - x/2 + O(x^2)
        0.1 * (1.0 - 0.5 * x)
    } else {
        0.1 * x / x.exp_m1()
    };
    RatePair {
        alpha1,
        alpha2: 0.125 * (v_hh / 80.0).exp(),
    }
}

/// Maps an applied membrane voltage onto the rate-function convention.
///
/// The potassium rate functions open the channel for negative arguments, so
/// an applied `+200 mV` corresponds to `-200 mV` in their convention.
pub fn applied_to_hh(v_applied: f64) -> f64 {
    -v_applied
}

/// Potassium rates for an applied voltage.
pub fn rates_for_applied(v_applied: f64) -> RatePair {
    potassium_rates(applied_to_hh(v_applied))
}

/// Final opening probability and time constant (ms).
pub fn steady_state(rates: RatePair) -> Result<(f64, f64)> {
    let total = rates.alpha1 + rates.alpha2;
    if !(total > 0.0) {
        return Err(invalid("alpha", "total transition rate must be positive"));
    }
    Ok((rates.alpha1 / total, 1.0 / total))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    /// Seconds.
    pub duration: f64,
    /// Applied voltage, mV.
    pub level: f64,
}

/// Piecewise-constant applied voltage starting at t = 0.
#[derive(Debug, Clone, PartialEq)]
pub struct VoltageWaveform {
    segments: Vec<Segment>,
}

impl VoltageWaveform {
    pub fn new(segments: Vec<Segment>) -> Result<Self> {
        if segments.is_empty() {
            return Err(invalid("waveform", "at least one segment is required"));
        }
        for s in &segments {
            if !(s.duration > 0.0 && s.duration.is_finite()) {
                return Err(invalid(
                    "waveform",
                    format!("segment duration must be > 0, got {}", s.duration),
                ));
            }
            if !s.level.is_finite() {
                return Err(invalid("waveform", "segment level must be finite"));
            }
        }
        Ok(Self { segments })
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn total_duration(&self) -> f64 {
        self.segments.iter().map(|s| s.duration).sum()
    }

    /// Start times of every segment followed by the end time.
    pub fn boundaries(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.segments.len() + 1);
        let mut t = 0.0;
        out.push(t);
        for s in &self.segments {
            t += s.duration;
            out.push(t);
        }
        out
    }

    /// Voltage at `t` (right-continuous; the last level is held after the end).
    pub fn level_at(&self, t: f64) -> f64 {
        let mut start = 0.0;
        for s in &self.segments {
            if t < start + s.duration {
                return s.level;
            }
            start += s.duration;
        }
        self.segments[self.segments.len() - 1].level
    }
}

/// On-off keying waveforms `(bit 0, bit 1)`.
///
/// Bit 0 holds `v_off` for the whole slot; bit 1 holds `v_on` for `t1`
/// seconds and `v_off` for the remainder.
pub fn ook_waveforms(
    v_on: f64,
    v_off: f64,
    t1: f64,
    t_slot: f64,
) -> Result<(VoltageWaveform, VoltageWaveform)> {
    if !(t1 > 0.0 && t_slot > t1 && t_slot.is_finite()) {
        return Err(invalid(
            "T1",
            format!("need 0 < T1 < T_slot, got T1 = {t1}, T_slot = {t_slot}"),
        ));
    }
    let zero = VoltageWaveform::new(vec![Segment {
        duration: t_slot,
        level: v_off,
    }])?;
    let one = VoltageWaveform::new(vec![
        Segment {
            duration: t1,
            level: v_on,
        },
        Segment {
            duration: t_slot - t1,
            level: v_off,
        },
    ])?;
    Ok((zero, one))
}

/// Opening probability over a waveform.
#[derive(Debug, Clone, PartialEq)]
pub struct GatingTrace {
    /// Times in seconds, probabilities dimensionless.
    pub series: TimeSeries,
}

/// Closed-form opening probability sampled every `dt_sample` seconds, plus
/// the exact segment boundaries.
pub fn evolve(p0: f64, waveform: &VoltageWaveform, dt_sample: f64) -> Result<GatingTrace> {
    if !(0.0..=1.0).contains(&p0) {
        return Err(invalid("p0", format!("must lie in [0, 1], got {p0}")));
    }
    if !(dt_sample > 0.0 && dt_sample.is_finite()) {
        return Err(invalid("dt_sample", "must be > 0"));
    }
    let bounds = waveform.boundaries();
    let total = bounds[bounds.len() - 1];
    let times = sample_times(&bounds, dt_sample);

    // Probability at the start of every segment.
    let mut starts = Vec::with_capacity(waveform.segments.len());
    let mut relax = Vec::with_capacity(waveform.segments.len());
    let mut p = p0;
    for seg in &waveform.segments {
        let (p_inf, t_c) = steady_state(rates_for_applied(seg.level))?;
        starts.push(p);
        relax.push((p_inf, t_c * 1e-3));
        p = p_inf + (p - p_inf) * (-seg.duration / (t_c * 1e-3)).exp();
    }

    let mut values = Vec::with_capacity(times.len());
    let mut seg = 0;
    for &t in &times {
        while seg + 1 < waveform.segments.len() && t >= bounds[seg + 1] {
            seg += 1;
        }
        let (p_inf, t_c) = relax[seg];
        let elapsed = (t.min(total) - bounds[seg]).max(0.0);
        let value = p_inf + (starts[seg] - p_inf) * (-elapsed / t_c).exp();
        values.push(value.clamp(0.0, 1.0));
    }
    Ok(GatingTrace {
        series: TimeSeries::new(times, values, "s", "probability"),
    })
}

/// Uniform samples `k * dt` below the end, the end itself, and every segment
/// boundary not already on the grid.
fn sample_times(bounds: &[f64], dt: f64) -> Vec<f64> {
    let total = bounds[bounds.len() - 1];
    let tol = 1e-9 * dt;
    let mut times: Vec<f64> = (0..)
        .map(|k| k as f64 * dt)
        .take_while(|&t| t < total - tol)
        .collect();
    times.extend_from_slice(&bounds[1..]);
    times.sort_by(f64::total_cmp);
    times.dedup_by(|a, b| (*a - *b).abs() <= tol);
    times
}

/// Fourth-order Runge-Kutta integration of the gating equation for an
/// arbitrary applied voltage `v(t)` (t in s, mV) from `t0` to `t1`.
///
/// Returns samples at every step including both ends.
pub fn integrate_rk4(
    p0: f64,
    voltage: impl Fn(f64) -> f64,
    t0: f64,
    t1: f64,
    dt: f64,
) -> Result<TimeSeries> {
    if !(dt > 0.0 && t1 > t0) {
        return Err(invalid("dt", "need dt > 0 and t1 > t0"));
    }
    let steps = ((t1 - t0) / dt).round().max(1.0) as usize;
    let h = (t1 - t0) / steps as f64;
    // Rates are per ms.
    let f = |t: f64, p: f64| rates_for_applied(voltage(t)).derivative(p) * 1e3;
    let mut times = Vec::with_capacity(steps + 1);
    let mut values = Vec::with_capacity(steps + 1);
    let mut p = p0;
    times.push(t0);
    values.push(p);
    for k in 0..steps {
        let t = t0 + k as f64 * h;
        let k1 = f(t, p);
        let k2 = f(t + 0.5 * h, p + 0.5 * h * k1);
        let k3 = f(t + 0.5 * h, p + 0.5 * h * k2);
        let k4 = f(t + h, p + h * k3);
        p += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        times.push(if k + 1 == steps { t1 } else { t + h });
        values.push(p);
    }
    Ok(TimeSeries::new(times, values, "s", "probability"))
}
