//! Average release rate `w(t)` and cumulative release `M(t)` of the
//! modulator during the on interval.
//!
//! The composite source (constant generation on the organelle shell plus the
//! initial interior content released at t = 0) is composed with the
//! impulse response entirely in the Laplace domain, and every output time is
//! obtained by a single numerical inversion.

use num_complex::Complex64;
use rayon::prelude::*;
use std::f64::consts::PI;

use crate::bounded::check_grid;
use crate::error::{Error, Result};
use crate::laplace::{talbot_invert, TalbotConfig, TransferFunction};
use crate::physio::{DimensionlessParams, TransmitterSpec};
use crate::series::{log_grid, TimeSeries};

/// Molecule source inside the cell during the on interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SourceModel {
    /// Generation rate per unit area on the organelle shell, molecules/(m^2 s).
    pub s_rate: f64,
    /// Interior concentration at t = 0, molecules/m^3.
    pub t_conc: f64,
}

impl SourceModel {
    pub fn from_spec(spec: &TransmitterSpec) -> Self {
        Self {
            s_rate: spec.s_rate,
            t_conc: spec.t_conc,
        }
    }

    pub fn generation_only(spec: &TransmitterSpec) -> Self {
        Self {
            t_conc: 0.0,
            ..Self::from_spec(spec)
        }
    }

    pub fn initial_only(spec: &TransmitterSpec) -> Self {
        Self {
            s_rate: 0.0,
            ..Self::from_spec(spec)
        }
    }
}

/// Release rate (molecules/s) and cumulative release (molecules).
#[derive(Debug, Clone, PartialEq)]
pub struct ModulatedSignal {
    pub w: TimeSeries,
    pub m: TimeSeries,
}

/// Everything needed to evaluate the release transform of one scenario.
#[derive(Debug, Clone, Copy)]
pub struct ReleaseModel {
    pub spec: TransmitterSpec,
    pub params: DimensionlessParams,
    pub source: SourceModel,
    shell: TransferFunction,
}

impl ReleaseModel {
    pub fn new(
        spec: &TransmitterSpec,
        params: &DimensionlessParams,
        source: &SourceModel,
    ) -> Result<Self> {
        spec.validate()?;
        let shell = TransferFunction::new(params.a, params.h, spec.r_m, spec.r_s / spec.r_m)?;
        Ok(Self {
            spec: *spec,
            params: *params,
            source: *source,
            shell,
        })
    }

    /// Reference scenario with the channels fully open.
    pub fn reference(n_channels: f64) -> Result<Self> {
        let spec = TransmitterSpec::with_channels(n_channels);
        let params = DimensionlessParams::from_spec(&spec, 1.0)?;
        Self::new(&spec, &params, &SourceModel::from_spec(&spec))
    }

    pub fn transfer_function(&self) -> &TransferFunction {
        &self.shell
    }

    /// Release-rate transform over dimensionless time, molecules/s.
    pub fn w_laplace(&self, s: Complex64) -> Result<Complex64> {
        w_laplace(&self.shell, &self.spec, &self.source, s)
    }

    /// Initial boundary flux (molecules/s) with a full interior and an empty
    /// exterior.
    pub fn initial_flux(&self) -> f64 {
        4.0 * PI * self.spec.r_m * self.params.h * self.spec.d1 * self.source.t_conc
    }

    /// `(w(t), M(t))` at a physical time `t >= 0` (s).
    ///
    /// The channels close at `T1`, so later times report no release and the
    /// cumulative count reached at `T1`.
    pub fn point(&self, t: f64, cfg: &TalbotConfig) -> Result<(f64, f64)> {
        if t == 0.0 {
            return Ok((self.initial_flux(), 0.0));
        }
        if t > self.spec.t1 {
            let (_, m) = self.point(self.spec.t1, cfg)?;
            return Ok((0.0, m));
        }
        let time_scale = self.spec.time_scale();
        let tau = t / time_scale;
        let relabel = |e: Error| match e {
            Error::Inversion { reason, .. } => Error::Inversion { t, reason },
            other => other,
        };
        let w = talbot_invert(|s| self.w_laplace(s), tau, cfg).map_err(relabel)?;
        let m = talbot_invert(|s| Ok(self.w_laplace(s)? / s), tau, cfg).map_err(relabel)?;
        Ok((w, time_scale * m))
    }
}

/// Laplace transform (over `tau`) of the release rate for the composite
/// source: `S phi(s | rho_s) / s + T (D1 / r_m) int_0^1 phi(s | rho') d rho'`.
///
/// `shell` must be the transfer function at the organelle radius.
pub fn w_laplace(
    shell: &TransferFunction,
    spec: &TransmitterSpec,
    source: &SourceModel,
    s: Complex64,
) -> Result<Complex64> {
    let mut total = Complex64::new(0.0, 0.0);
    if source.s_rate != 0.0 {
        total += source.s_rate * shell.phi_star(s)? / s;
    }
    if source.t_conc != 0.0 {
        total += source.t_conc * spec.d1 / spec.r_m * shell.phi_star_uniform(s)?;
    }
    Ok(total)
}

/// Default output grid: `n` log-spaced points on `[1e-5 T1, T1]`.
pub fn default_grid(spec: &TransmitterSpec, n: usize) -> Vec<f64> {
    log_grid(1e-5 * spec.t1, spec.t1, n)
}

/// `w` and `M` on a grid of physical times (s). `t = 0` may be included.
///
/// Every grid point is an independent pair of inversions; results are
/// returned in grid order.
pub fn modulated_signal(
    model: &ReleaseModel,
    grid: &[f64],
    cfg: &TalbotConfig,
) -> Result<ModulatedSignal> {
    check_grid(grid)?;
    let points: Vec<(f64, f64)> = grid
        .par_iter()
        .map(|&t| model.point(t, cfg))
        .collect::<Result<_>>()?;
    let (w, m): (Vec<f64>, Vec<f64>) = points.into_iter().unzip();
    Ok(ModulatedSignal {
        w: TimeSeries::new(grid.to_vec(), w, "s", "molecules/s"),
        m: TimeSeries::new(grid.to_vec(), m, "s", "molecules"),
    })
}

/// Average number of molecules released by time `t`, by linear
/// interpolation of a cumulative series.
pub fn released_count(m: &TimeSeries, t: f64) -> Result<f64> {
    m.interpolate(t)
}

/// Cumulative trapezoidal integral of a sampled rate, starting from zero at
/// the first sample.
pub fn cumulative_trapezoid(w: &TimeSeries) -> TimeSeries {
    let mut acc = 0.0;
    let mut out = Vec::with_capacity(w.len());
    for (k, (t, v)) in w.iter().enumerate() {
        if k > 0 {
            acc += 0.5 * (v + w.values[k - 1]) * (t - w.times[k - 1]);
        }
        out.push(acc);
    }
    TimeSeries::new(w.times.clone(), out, w.time_unit, "molecules")
}
