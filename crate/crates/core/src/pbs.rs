//! Particle-based simulator: Brownian molecules inside and around the cell,
//! a semi-permeable membrane crossed with probability `z`, and constant
//! generation on the organelle shell.
//!
//! Trials are seeded with `base_seed ^ trial_index` on the Xoshiro256++
//! generator, so a given `(spec, z, config)` always yields the same estimate
//! regardless of how many worker threads run the trials.

use rand::{Rng, SeedableRng};
use rand_distr::{Distribution, Poisson, StandardNormal, UnitBall, UnitSphere};
use rand_xoshiro::Xoshiro256PlusPlus;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{invalid, Result};
use crate::physio::TransmitterSpec;
use crate::series::TimeSeries;

pub type Position = [f64; 3];

/// Two-sided 95% normal quantile.
const Z95: f64 = 1.959_963_984_540_054;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PbsConfig {
    /// Step size, s.
    pub dt: f64,
    pub n_trials: usize,
    /// Histogram bin width, s. Must be a whole number of steps.
    pub bin_width: f64,
    /// Outside molecules beyond this radius (m) are retired.
    pub kill_radius: f64,
    pub base_seed: u64,
    /// Simulated span, s.
    pub duration: f64,
}

impl Default for PbsConfig {
    fn default() -> Self {
        let spec = TransmitterSpec::default();
        Self {
            dt: 1e-6,
            n_trials: 1000,
            bin_width: 5e-4,
            kill_radius: 10.0 * spec.r_m,
            base_seed: 0x1b3d_5a7c_9e0f_2468,
            duration: spec.t1,
        }
    }
}

impl PbsConfig {
    pub fn validate(&self, spec: &TransmitterSpec) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(invalid("dt", "must be positive"));
        }
        if self.n_trials == 0 {
            return Err(invalid("n_trials", "must be >= 1"));
        }
        if !(self.bin_width >= self.dt && self.bin_width.is_finite()) {
            return Err(invalid("bin_width", "must be >= dt"));
        }
        if !(self.kill_radius > spec.r_m) {
            return Err(invalid("kill_radius", "must exceed the cell radius"));
        }
        if !(self.duration >= self.bin_width && self.duration.is_finite()) {
            return Err(invalid("duration", "must cover at least one bin"));
        }
        whole_ratio("bin_width", self.bin_width, self.dt)?;
        whole_ratio("duration", self.duration, self.bin_width)?;
        Ok(())
    }

    pub fn steps_per_bin(&self) -> usize {
        (self.bin_width / self.dt).round() as usize
    }

    pub fn n_bins(&self) -> usize {
        (self.duration / self.bin_width).round() as usize
    }

    pub fn n_steps(&self) -> usize {
        self.steps_per_bin() * self.n_bins()
    }

    /// Config with `n_bins` equal bins over the same duration.
    pub fn with_bins(mut self, n_bins: usize) -> Self {
        self.bin_width = self.duration / n_bins as f64;
        self
    }
}

fn whole_ratio(name: &'static str, num: f64, den: f64) -> Result<()> {
    let ratio = num / den;
    if (ratio - ratio.round()).abs() > 1e-6 * ratio.max(1.0) {
        return Err(invalid(
            name,
            format!("must be a whole multiple ({ratio} is not)"),
        ));
    }
    Ok(())
}

/// Molecule positions of one trial together with its crossing tallies.
#[derive(Debug, Clone, PartialEq)]
pub struct PbsState {
    pub inside: Vec<Position>,
    pub outside: Vec<Position>,
    /// Molecules created by generation so far.
    pub produced_total: u64,
    pub initial_count: u64,
    pub retired: u64,
    pub crossings_out: Vec<u64>,
    pub crossings_in: Vec<u64>,
}

impl PbsState {
    pub fn total_tracked(&self) -> u64 {
        (self.inside.len() + self.outside.len()) as u64 + self.retired
    }

    /// Net outward crossings per bin.
    pub fn net_crossings(&self) -> Vec<i64> {
        self.crossings_out
            .iter()
            .zip(&self.crossings_in)
            .map(|(&o, &i)| o as i64 - i as i64)
            .collect()
    }
}

/// Number of molecules initially inside the cell.
pub fn initial_count(spec: &TransmitterSpec) -> u64 {
    spec.initial_content().round() as u64
}

/// Initial state: molecules spread uniformly over the interior, empty
/// exterior, `n_bins` zeroed tallies.
pub fn init_state<R: Rng + ?Sized>(spec: &TransmitterSpec, n_bins: usize, rng: &mut R) -> PbsState {
    let k = initial_count(spec);
    let inside = (0..k)
        .map(|_| {
            let u: [f64; 3] = UnitBall.sample(rng);
            u.map(|c| c * spec.r_m)
        })
        .collect();
    PbsState {
        inside,
        outside: Vec::new(),
        produced_total: 0,
        initial_count: k,
        retired: 0,
        crossings_out: vec![0; n_bins],
        crossings_in: vec![0; n_bins],
    }
}

fn norm(p: &Position) -> f64 {
    (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt()
}

fn displace<R: Rng + ?Sized>(p: &mut Position, sigma: f64, rng: &mut R) {
    for c in p.iter_mut() {
        let g: f64 = StandardNormal.sample(rng);
        *c += sigma * g;
    }
}

/// Radial reflection about the membrane, `r -> 2 r_m - r`.
fn reflect(p: &mut Position, r: f64, r_m: f64) {
    let target = (2.0 * r_m - r).abs();
    let scale = target / r;
    for c in p.iter_mut() {
        *c *= scale;
    }
}

/// One Brownian step of every molecule. Crossings are detected from the
/// end-of-step position only and tallied into bin `bin`.
pub fn step<R: Rng + ?Sized>(
    state: &mut PbsState,
    spec: &TransmitterSpec,
    z: f64,
    dt: f64,
    kill_radius: f64,
    bin: usize,
    rng: &mut R,
) {
    let r_m = spec.r_m;
    let sigma_in = (2.0 * spec.d1 * dt).sqrt();
    let sigma_out = (2.0 * spec.d2 * dt).sqrt();
    let mut entered = Vec::new();
    let mut exited = Vec::new();

    let mut k = 0;
    while k < state.inside.len() {
        let p = &mut state.inside[k];
        displace(p, sigma_in, rng);
        let r = norm(p);
        if r > r_m {
            if rng.random::<f64>() < z {
                exited.push(state.inside.swap_remove(k));
                state.crossings_out[bin] += 1;
                continue;
            }
            reflect(p, r, r_m);
        }
        k += 1;
    }

    let mut k = 0;
    while k < state.outside.len() {
        let p = &mut state.outside[k];
        displace(p, sigma_out, rng);
        let r = norm(p);
        if r <= r_m {
            if rng.random::<f64>() < z {
                entered.push(state.outside.swap_remove(k));
                state.crossings_in[bin] += 1;
                continue;
            }
            reflect(p, r, r_m);
        }
        if norm(&state.outside[k]) > kill_radius {
            state.outside.swap_remove(k);
            state.retired += 1;
            continue;
        }
        k += 1;
    }

    state.inside.extend(entered);
    for p in exited {
        if norm(&p) > kill_radius {
            state.retired += 1;
        } else {
            state.outside.push(p);
        }
    }
}

/// Adds `Poisson(4 pi r_s^2 S dt)` molecules on the organelle shell.
pub fn generate<R: Rng + ?Sized>(
    state: &mut PbsState,
    spec: &TransmitterSpec,
    dt: f64,
    rng: &mut R,
) {
    let mean = 4.0 * PI * spec.r_s * spec.r_s * spec.s_rate * dt;
    if mean <= 0.0 {
        return;
    }
    let count = match Poisson::new(mean) {
        Ok(dist) => dist.sample(rng) as u64,
        Err(_) => return,
    };
    for _ in 0..count {
        let u: [f64; 3] = UnitSphere.sample(rng);
        state.inside.push(u.map(|c| c * spec.r_s));
    }
    state.produced_total += count;
}

pub fn trial_rng(base_seed: u64, trial: usize) -> Xoshiro256PlusPlus {
    Xoshiro256PlusPlus::seed_from_u64(base_seed ^ trial as u64)
}

/// Runs one complete trial and returns its final state.
pub fn run_trial(spec: &TransmitterSpec, z: f64, cfg: &PbsConfig, trial: usize) -> PbsState {
    let mut rng = trial_rng(cfg.base_seed, trial);
    let mut state = init_state(spec, cfg.n_bins(), &mut rng);
    let per_bin = cfg.steps_per_bin();
    for n in 0..cfg.n_steps() {
        let bin = n / per_bin;
        step(&mut state, spec, z, cfg.dt, cfg.kill_radius, bin, &mut rng);
        generate(&mut state, spec, cfg.dt, &mut rng);
    }
    state
}

/// Trial-averaged release estimate. Times are bin ends.
#[derive(Debug, Clone, PartialEq)]
pub struct ReleaseEstimate {
    pub w_hat: TimeSeries,
    pub m_hat: TimeSeries,
    pub ci_halfwidth: TimeSeries,
    pub n_trials: usize,
    pub bin_width: f64,
}

impl ReleaseEstimate {
    pub fn bin_starts(&self) -> impl Iterator<Item = f64> + '_ {
        self.w_hat.times.iter().map(move |t| t - self.bin_width)
    }
}

fn validate_run(spec: &TransmitterSpec, z: f64, cfg: &PbsConfig) -> Result<()> {
    spec.validate()?;
    cfg.validate(spec)?;
    if !(0.0..1.0).contains(&z) {
        return Err(invalid("z", format!("must lie in [0, 1), got {z}")));
    }
    Ok(())
}

/// Net outward crossings per bin for every trial, in trial order.
pub fn run_trials(spec: &TransmitterSpec, z: f64, cfg: &PbsConfig) -> Result<Vec<Vec<i64>>> {
    validate_run(spec, z, cfg)?;
    Ok((0..cfg.n_trials)
        .into_par_iter()
        .map(|trial| run_trial(spec, z, cfg, trial).net_crossings())
        .collect())
}

/// Simulates `n_trials` trials at membrane permeability `z` and aggregates
/// the per-bin crossings.
pub fn run(spec: &TransmitterSpec, z: f64, cfg: &PbsConfig) -> Result<ReleaseEstimate> {
    let trials = run_trials(spec, z, cfg)?;
    Ok(aggregate(&trials, cfg))
}

/// Mean and 95% half-width across trials, reduced in trial order.
pub fn aggregate(trials: &[Vec<i64>], cfg: &PbsConfig) -> ReleaseEstimate {
    let n_bins = cfg.n_bins();
    let n = trials.len() as f64;
    let bw = cfg.bin_width;
    let mut w = Vec::with_capacity(n_bins);
    let mut ci = Vec::with_capacity(n_bins);
    let mut m = Vec::with_capacity(n_bins);
    let mut cumulative: i64 = 0;
    for b in 0..n_bins {
        let total: i64 = trials.iter().map(|t| t[b]).sum();
        cumulative += total;
        let mean = total as f64 / n;
        let var = if trials.len() > 1 {
            trials
                .iter()
                .map(|t| (t[b] as f64 - mean).powi(2))
                .sum::<f64>()
                / (n - 1.0)
        } else {
            0.0
        };
        w.push(mean / bw);
        ci.push(Z95 * (var / n).sqrt() / bw);
        m.push(cumulative as f64 / n);
    }
    let times: Vec<f64> = (1..=n_bins).map(|b| b as f64 * bw).collect();
    ReleaseEstimate {
        w_hat: TimeSeries::new(times.clone(), w, "s", "molecules/s"),
        m_hat: TimeSeries::new(times.clone(), m, "s", "molecules"),
        ci_halfwidth: TimeSeries::new(times, ci, "s", "molecules/s"),
        n_trials: trials.len(),
        bin_width: bw,
    }
}
