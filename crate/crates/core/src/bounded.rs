//! Closed-form release rate when the exterior is treated as a perfect sink.
//!
//! With zero exterior concentration the interior problem becomes sphere
//! heat conduction with a radiation boundary condition. Its eigenvalues are
//! the positive roots of `g cot g + h - 1 = 0` and every output is an
//! eigenfunction series. Because molecules cannot come back in, the
//! cumulative release of this model bounds the true cumulative release from
//! above.

use std::f64::consts::PI;

use crate::analytic::SourceModel;
use crate::error::{invalid, Error, Result};
use crate::physio::{DimensionlessParams, TransmitterSpec};
use crate::series::{CompensatedSum, TimeSeries};

/// Bracket width at which bisection hands over to Newton.
const BISECT_WIDTH: f64 = 1e-6;

/// Smallest dimensionless time at which the impulse series is evaluated.
pub const MIN_SERIES_TAU: f64 = 1e-6;

/// Positive roots of `g cot g + h - 1 = 0` in increasing order.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenRoots {
    pub h: f64,
    pub gammas: Vec<f64>,
}

impl EigenRoots {
    /// `g cot g + h - 1` at every root.
    pub fn residuals(&self) -> impl Iterator<Item = f64> + '_ {
        self.gammas.iter().map(move |&g| root_residual(self.h, g))
    }
}

/// `g cot g + h - 1`.
pub fn root_residual(h: f64, gamma: f64) -> f64 {
    gamma * gamma.cos() / gamma.sin() + h - 1.0
}

/// `cos g + (h - 1) sin(g)/g`: the root function divided by `sin(g)/g`,
/// finite everywhere and equal to `h` at the origin.
fn scaled(h: f64, gamma: f64) -> f64 {
    let sinc = if gamma == 0.0 {
        1.0
    } else {
        gamma.sin() / gamma
    };
    gamma.cos() + (h - 1.0) * sinc
}

/// [`scaled`] at `k pi`, where `sin` vanishes exactly; the floating-point
/// `sin(k pi)` would be amplified by very large `h`.
fn scaled_at_multiple(h: f64, k: f64) -> f64 {
    if k == 0.0 {
        h
    } else if k % 2.0 == 0.0 {
        1.0
    } else {
        -1.0
    }
}

/// The `n`-th positive root (1-based).
///
/// For `h > 0` the `n`-th root lies in `((n-1) pi, n pi)`; for `h = 0` the
/// root at the origin is excluded and the `n`-th root lies in
/// `(n pi, (n+1) pi)`.
fn nth_root(h: f64, n: usize) -> Result<f64> {
    let offset = if h == 0.0 { 0.0 } else { 1.0 };
    let mut lo = (n as f64 - offset) * PI;
    let mut hi = (n as f64 + 1.0 - offset) * PI;
    let mut f_lo = scaled_at_multiple(h, n as f64 - offset);
    let f_hi = scaled_at_multiple(h, n as f64 + 1.0 - offset);
    if f_lo.signum() == f_hi.signum() {
        return Err(Error::Bracketing { n, h });
    }
    while hi - lo > BISECT_WIDTH {
        let mid = 0.5 * (lo + hi);
        let f_mid = scaled(h, mid);
        if f_mid == 0.0 {
            return Ok(mid);
        }
        if f_mid.signum() == f_lo.signum() {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    // Newton on g cos g + (h - 1) sin g, kept inside the bracket.
    let mut g = 0.5 * (lo + hi);
    for _ in 0..50 {
        let f = g * g.cos() + (h - 1.0) * g.sin();
        let df = h * g.cos() - g * g.sin();
        let next = g - f / df;
        if !(next >= lo - BISECT_WIDTH && next <= hi + BISECT_WIDTH) {
            break;
        }
        let done = (next - g).abs() <= 2.0 * f64::EPSILON * g;
        g = next;
        if done {
            break;
        }
    }
    Ok(g)
}

/// First `n` positive eigenvalues for boundary constant `h`.
pub fn find_roots(h: f64, n: usize) -> Result<EigenRoots> {
    if !(h >= 0.0 && h.is_finite()) {
        return Err(invalid("h", format!("must be finite and >= 0, got {h}")));
    }
    if n == 0 {
        return Err(invalid("n", "at least one root must be requested"));
    }
    let gammas = (1..=n)
        .map(|k| nth_root(h, k))
        .collect::<Result<Vec<_>>>()?;
    Ok(EigenRoots { h, gammas })
}

fn weight(h: f64, gamma: f64) -> f64 {
    let g2 = gamma * gamma;
    (g2 + (h - 1.0) * (h - 1.0)) / (g2 + h * (h - 1.0))
}

/// Series coefficient `G_n`, m^2.
pub fn g_coefficient(h: f64, gamma: f64, r_m: f64) -> f64 {
    8.0 * PI * r_m * r_m * h * gamma.sin() * weight(h, gamma)
}

/// The same coefficient written through `g cos g - sin g`; equal to
/// [`g_coefficient`] only on the root locus.
pub fn g_coefficient_cos_form(h: f64, gamma: f64, r_m: f64) -> f64 {
    -8.0 * PI * r_m * r_m * (gamma * gamma.cos() - gamma.sin()) * weight(h, gamma)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesTruncation {
    /// Minimum number of terms summed.
    pub n_terms: usize,
    /// Summation stops once the remaining terms are bounded by this
    /// fraction of the running sum.
    pub tail_tol: f64,
}

impl Default for SeriesTruncation {
    fn default() -> Self {
        Self {
            n_terms: 200,
            tail_tol: 1e-12,
        }
    }
}

impl SeriesTruncation {
    pub fn validate(&self) -> Result<()> {
        if self.n_terms == 0 {
            return Err(invalid("n_terms", "must be >= 1"));
        }
        if !(self.tail_tol > 0.0 && self.tail_tol < 1.0) {
            return Err(invalid("tail_tol", "must lie in (0, 1)"));
        }
        Ok(())
    }

    /// Number of eigenvalues needed so that `exp(-g^2 tau)` drops below
    /// `tail_tol` (plus a safety margin) for every `tau >= tau_min`.
    pub fn terms_for(&self, tau_min: f64) -> usize {
        let decay = (1.0 / self.tail_tol).ln() + 10.0f64.ln();
        let needed = ((decay / tau_min).sqrt() / PI).ceil() as usize + 2;
        needed.max(self.n_terms)
    }
}

/// Eigenvalues together with their coefficients for one cell.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundSeries {
    pub r_m: f64,
    pub roots: EigenRoots,
    pub coefficients: Vec<f64>,
}

impl BoundSeries {
    pub fn new(h: f64, r_m: f64, n: usize) -> Result<Self> {
        let roots = find_roots(h, n)?;
        let coefficients = roots
            .gammas
            .iter()
            .map(|&g| g_coefficient(h, g, r_m))
            .collect();
        Ok(Self {
            r_m,
            roots,
            coefficients,
        })
    }

    pub fn h(&self) -> f64 {
        self.roots.h
    }

    fn terms(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.roots
            .gammas
            .iter()
            .copied()
            .zip(self.coefficients.iter().copied())
    }
}

/// Dimensionless impulse response of the sink-exterior model for a unit
/// shell source at `rho_prime`.
pub fn impulse_response_u(
    tau: f64,
    rho_prime: f64,
    series: &BoundSeries,
    trunc: &SeriesTruncation,
) -> Result<f64> {
    trunc.validate()?;
    if !(tau > 0.0) {
        return Err(invalid("tau", "the impulse series needs tau > 0"));
    }
    if tau < MIN_SERIES_TAU {
        return Err(Error::Unsupported {
            t: tau,
            min: MIN_SERIES_TAU,
        });
    }
    if !(rho_prime > 0.0 && rho_prime <= 1.0) {
        return Err(invalid("rho_prime", "must lie in (0, 1]"));
    }
    let needed = trunc.terms_for(tau);
    if series.roots.gammas.len() < needed {
        return Err(invalid(
            "series",
            format!(
                "{} eigenvalues held, tau = {tau} needs {needed}",
                series.roots.gammas.len()
            ),
        ));
    }
    let mut acc = CompensatedSum::default();
    for (k, (g, coef)) in series.terms().enumerate() {
        let decay = (-g * g * tau).exp();
        acc.add(coef * rho_prime * decay * (g * rho_prime).sin());
        let bound = coef.abs() * rho_prime * decay;
        if k + 1 >= trunc.n_terms && bound < trunc.tail_tol * acc.value().abs() {
            break;
        }
    }
    Ok(acc.value())
}

/// Release rate and cumulative release of the sink-exterior model at one
/// physical time (s). Returns `(w_u, M_u)`.
fn upper_point(
    t: f64,
    spec: &TransmitterSpec,
    source: &SourceModel,
    series: &BoundSeries,
) -> Result<(f64, f64)> {
    let h = series.h();
    let r_m = spec.r_m;
    let rho_s = spec.r_s / r_m;
    let time_scale = spec.time_scale();
    let initial_flux = 4.0 * PI * r_m * h * spec.d1 * source.t_conc;
    if t == 0.0 {
        return Ok((initial_flux, 0.0));
    }
    let tau = t / time_scale;
    if tau < MIN_SERIES_TAU {
        return Err(Error::Unsupported {
            t,
            min: MIN_SERIES_TAU * time_scale,
        });
    }
    // Generation term: the printed series sum_n G_n rho_s sin(g rho_s) (1 - e)/g^2
    // is split as steady state 4 pi r_s^2 minus an exponentially convergent
    // transient; the cumulative form converges like 1/g^4 on its own.
    let mut s_rate = CompensatedSum::default();
    let mut s_count = CompensatedSum::default();
    let mut t_rate = CompensatedSum::default();
    let mut t_count = CompensatedSum::default();
    for (g, coef) in series.terms() {
        let g2 = g * g;
        let decay = (-g2 * tau).exp();
        let shell = coef * rho_s * (g * rho_s).sin() / g2;
        s_rate.add(-shell * decay);
        s_count.add(-shell * (-(-g2 * tau).exp_m1()) / g2);
        let interior = coef * h * g.sin() / g2;
        t_rate.add(interior * decay);
        t_count.add(interior * (-(-g2 * tau).exp_m1()) / g2);
    }
    let steady = 4.0 * PI * spec.r_s * spec.r_s;
    let w =
        source.s_rate * (steady + s_rate.value()) + source.t_conc * spec.d1 / r_m * t_rate.value();
    let m = source.s_rate * (steady * t + time_scale * s_count.value())
        + source.t_conc * r_m * t_count.value();
    Ok((w, m))
}

/// `w_u` (molecules/s) and `M_u` (molecules) on a physical time grid (s).
///
/// `t = 0` is allowed and yields the initial boundary flux and zero count.
pub fn upper_signal(
    spec: &TransmitterSpec,
    params: &DimensionlessParams,
    source: &SourceModel,
    grid: &[f64],
    trunc: &SeriesTruncation,
) -> Result<(TimeSeries, TimeSeries)> {
    trunc.validate()?;
    check_grid(grid)?;
    let positive_min = grid.iter().copied().find(|&t| t > 0.0);
    let n = match positive_min {
        Some(t) => trunc.terms_for((t / spec.time_scale()).max(MIN_SERIES_TAU)),
        None => trunc.n_terms,
    };
    let series = BoundSeries::new(params.h, spec.r_m, n)?;
    upper_signal_with(spec, source, grid, &series)
}

/// As [`upper_signal`] with precomputed eigenvalues; every eigenvalue in
/// `series` is summed.
pub fn upper_signal_with(
    spec: &TransmitterSpec,
    source: &SourceModel,
    grid: &[f64],
    series: &BoundSeries,
) -> Result<(TimeSeries, TimeSeries)> {
    check_grid(grid)?;
    let mut w = Vec::with_capacity(grid.len());
    let mut m = Vec::with_capacity(grid.len());
    for &t in grid {
        let (wv, mv) = if series.h() == 0.0 {
            (0.0, 0.0)
        } else {
            upper_point(t, spec, source, series)?
        };
        w.push(wv);
        m.push(mv);
    }
    Ok((
        TimeSeries::new(grid.to_vec(), w, "s", "molecules/s"),
        TimeSeries::new(grid.to_vec(), m, "s", "molecules"),
    ))
}

pub(crate) fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(invalid("grid", "empty time grid"));
    }
    if grid[0] < 0.0 || !grid.iter().all(|t| t.is_finite()) {
        return Err(invalid("grid", "times must be finite and non-negative"));
    }
    if !grid.windows(2).all(|w| w[1] > w[0]) {
        return Err(invalid("grid", "times must be strictly increasing"));
    }
    Ok(())
}
