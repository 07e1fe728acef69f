//! Reference implementations shared by the integration tests. Nothing here
//! calls into the library's transfer-function or series code.

#![allow(dead_code)]

use num_complex::Complex64;
use std::f64::consts::PI;

/// `sinh(q rho) e^{-q}`, `cosh(q) e^{-q}` and `sinh(q) e^{-q}`, written so
/// that no factor overflows for large `Re q`.
fn scaled_hyperbolics(q: Complex64, rho: f64) -> (Complex64, Complex64, Complex64) {
    let e2 = (-2.0 * q).exp();
    let sinh_rho = 0.5 * (((rho - 1.0) * q).exp() - (-(rho + 1.0) * q).exp());
    (sinh_rho, 0.5 * (1.0 + e2), 0.5 * (1.0 - e2))
}

/// Laplace transform (over dimensionless time) of the release rate of a unit
/// shell source at `rho` when the exterior is a perfect sink, in m^2.
///
/// Solves `s U = U''` on (0, 1) with `U(0) = 0`, a unit jump of `U'` at
/// `rho` and `U'(1) = (1 - h) U(1)`; the boundary flux is
/// `4 pi r_m^2 h U(1)` per unit injected surface density.
pub fn absorbing_transform(s: Complex64, h: f64, r_m: f64, rho: f64) -> Complex64 {
    let q = s.sqrt();
    let (sinh_rho, cosh_q, sinh_q) = scaled_hyperbolics(q, rho);
    4.0 * PI * r_m * r_m * h * rho * sinh_rho / (q * cosh_q - (1.0 - h) * sinh_q)
}

/// Same transform integrated over `rho` in (0, 1) with weight `rho`
/// (uniform volume source), in m^2.
pub fn absorbing_transform_uniform(s: Complex64, h: f64, r_m: f64) -> Complex64 {
    let q = s.sqrt();
    let (_, cosh_q, sinh_q) = scaled_hyperbolics(q, 1.0);
    // int_0^1 rho sinh(q rho) d rho = (q cosh q - sinh q) / q^2
    let moment = (q * cosh_q - sinh_q) / (q * q);
    4.0 * PI * r_m * r_m * h * moment / (q * cosh_q - (1.0 - h) * sinh_q)
}

/// Potassium gate rates (1/ms) written straight from the rate laws, with the
/// applied voltage sign flipped into the model convention.
pub fn gate_rates(v_applied: f64) -> (f64, f64) {
    let v = -v_applied;
    let x = v + 10.0;
    let a1 = if x.abs() < 1e-9 {
        0.1
    } else {
        0.01 * x / ((x / 10.0).exp() - 1.0)
    };
    let a2 = 0.125 * (v / 80.0).exp();
    (a1, a2)
}

pub fn log_points(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|k| a * (b / a).powf(k as f64 / (n - 1) as f64))
        .collect()
}
