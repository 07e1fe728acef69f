//! The particle simulator detects membrane crossings only at the end of each
//! step, which makes its membrane behave like one with a smaller boundary
//! constant. With that constant the analytic solution should fall inside the
//! particle confidence band.

mod common;

use std::f64::consts::PI;

use ionmod::analytic::{ReleaseModel, SourceModel};
use ionmod::experiments::{analytic_bin_average, ci_overlap};
use ionmod::laplace::TalbotConfig;
use ionmod::pbs::{self, PbsConfig};
use ionmod::physio::{permeability, DimensionlessParams, TransmitterSpec};

/// Boundary constant of a membrane crossed with probability `z` per
/// end-of-step excursion: the partially reflecting wall of a Brownian walk
/// has permeability `z sqrt(D / (pi dt))`.
fn step_limited_h(spec: &TransmitterSpec, z: f64, dt: f64) -> f64 {
    let kappa = z * (spec.d1 / (PI * dt)).sqrt();
    spec.r_m * kappa / spec.d1
}

fn cfg(dt: f64, trials: usize) -> PbsConfig {
    PbsConfig {
        dt,
        n_trials: trials,
        bin_width: 1e-3,
        ..PbsConfig::default()
    }
}

#[test]
fn particle_release_matches_step_limited_membrane() {
    let spec = TransmitterSpec::with_channels(1e7);
    let z = permeability(&spec, 1.0).unwrap();
    let dt = 1e-5;
    let cfg = cfg(dt, 300);
    let est = pbs::run(&spec, z, &cfg).unwrap();

    let mut params = DimensionlessParams::from_spec(&spec, 1.0).unwrap();
    params.h = step_limited_h(&spec, z, dt);
    let model = ReleaseModel::new(&spec, &params, &SourceModel::from_spec(&spec)).unwrap();
    let analytic = analytic_bin_average(&model, &est, &TalbotConfig::default()).unwrap();
    // The first bin still carries the start-up transient of the discrete
    // walk, where the effective constant has not settled.
    let overlap = ci_overlap(&analytic, &est);
    let inside = overlap[1..].iter().filter(|&&o| o).count();
    assert!(
        inside as f64 >= 0.75 * (overlap.len() - 1) as f64,
        "{inside}/{}",
        overlap.len() - 1
    );
    assert!((analytic[0] - est.w_hat.values[0]).abs() < 0.1 * analytic[0]);

    // The same run is far below the transparent-membrane prediction early on.
    let full = ReleaseModel::reference(1e7).unwrap();
    let exact = analytic_bin_average(&full, &est, &TalbotConfig::default()).unwrap();
    assert!(exact[0] - est.w_hat.values[0] > 3.0 * est.ci_halfwidth.values[0]);
}

#[test]
fn kill_radius_has_little_effect() {
    let spec = TransmitterSpec::with_channels(1e7);
    let z = permeability(&spec, 1.0).unwrap();
    let base = cfg(1e-5, 200);
    let near = pbs::run(&spec, z, &base).unwrap();
    let far = pbs::run(
        &spec,
        z,
        &PbsConfig {
            kill_radius: 2.0 * base.kill_radius,
            ..base
        },
    )
    .unwrap();
    let (a, b) = (
        near.m_hat.values.last().unwrap(),
        far.m_hat.values.last().unwrap(),
    );
    assert!((a - b).abs() / b < 0.01, "{a} {b}");
}

#[test]
fn cumulative_estimate_is_sum_of_bins() {
    let spec = TransmitterSpec::default();
    let cfg = PbsConfig {
        dt: 1e-5,
        n_trials: 16,
        bin_width: 1e-3,
        duration: 5e-3,
        ..PbsConfig::default()
    };
    let trials = pbs::run_trials(&spec, 0.1, &cfg).unwrap();
    let est = pbs::aggregate(&trials, &cfg);
    let mut running = 0i64;
    for b in 0..cfg.n_bins() {
        running += trials.iter().map(|t| t[b]).sum::<i64>();
        assert_eq!(est.m_hat.values[b], running as f64 / trials.len() as f64);
        assert_eq!(est.w_hat.times[b], (b + 1) as f64 * 1e-3);
    }
    assert_eq!(common::log_points(1.0, 1.0, 2).len(), 2);
}
