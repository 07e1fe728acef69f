//! Laplace-domain impulse response of the modulator and numerical inversion.
//!
//! All quantities here are dimensionless except for the `r_m` prefactor of
//! the transfer function. The Laplace variable `s` is conjugate to the
//! dimensionless time `tau = D1 t / r_m^2`.

use num_complex::Complex64;
use std::f64::consts::PI;

use crate::error::{invalid, Error, Result};

/// Above this real part of `sqrt(s)` the hyperbolic functions are evaluated
/// in forms rescaled by `exp(-sqrt(s))`.
const RESCALE_ABOVE: f64 = 30.0;

/// Denominators smaller than this are reported as a pole hit.
const POLE_EPS: f64 = 1e-30;

/// Impulse response of the release rate for a unit shell source at
/// `rho_prime`, in the Laplace domain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransferFunction {
    /// Diffusivity ratio D2/D1.
    pub a: f64,
    /// Membrane boundary constant.
    pub h: f64,
    /// Cell radius, m.
    pub r_m: f64,
    /// Source radius over cell radius, in (0, 1].
    pub rho_prime: f64,
}

impl TransferFunction {
    pub fn new(a: f64, h: f64, r_m: f64, rho_prime: f64) -> Result<Self> {
        if !(a > 0.0 && a.is_finite()) {
            return Err(invalid("A", "diffusivity ratio must be > 0"));
        }
        if !(h >= 0.0 && h.is_finite()) {
            return Err(invalid("h", "boundary constant must be >= 0"));
        }
        if !(r_m > 0.0) {
            return Err(invalid("r_m", "must be > 0"));
        }
        if !(rho_prime > 0.0 && rho_prime <= 1.0) {
            return Err(invalid("rho_prime", "must lie in (0, 1]"));
        }
        Ok(Self {
            a,
            h,
            r_m,
            rho_prime,
        })
    }

    /// Same membrane and geometry, different source radius.
    pub fn at_radius(&self, rho_prime: f64) -> Result<Self> {
        Self::new(self.a, self.h, self.r_m, rho_prime)
    }

    /// The shared factor `-h / (r_m * D(s))` scaled so that `shell(s)`
    /// terms rescaled by `exp(-sqrt(s))` can be multiplied onto it, together
    /// with `kappa = A (1 + sqrt(s / A))`.
    ///
    /// Returns `(kappa, factor, rescaled)`.
    fn common(&self, s: Complex64) -> Result<(Complex64, Complex64, bool)> {
        let q = s.sqrt();
        let kappa = self.a + (s * self.a).sqrt();
        let h = self.h;
        let rescaled = q.re > RESCALE_ABOVE;
        let (sh, ch) = if rescaled {
            let e = (-2.0 * q).exp();
            ((1.0 - e) * 0.5, (1.0 + e) * 0.5)
        } else {
            (q.sinh(), q.cosh())
        };
        let denom = (h - (h - 1.0) * kappa) * sh - (h + kappa) * q * ch;
        if denom.norm() < POLE_EPS {
            return Err(Error::PoleProximity { re: s.re, im: s.im });
        }
        Ok((kappa, -h / (self.r_m * denom), rescaled))
    }

    /// Exterior concentration transform `U2(1, s)`.
    pub fn u2_boundary(&self, s: Complex64) -> Result<Complex64> {
        if self.h == 0.0 {
            return Ok(Complex64::new(0.0, 0.0));
        }
        let (_, factor, rescaled) = self.common(s)?;
        Ok(factor * self.rho_prime * shell_sinh(s.sqrt(), self.rho_prime, rescaled))
    }

    /// Transform of the dimensionless release-rate impulse response.
    pub fn phi_star(&self, s: Complex64) -> Result<Complex64> {
        if self.h == 0.0 {
            return Ok(Complex64::new(0.0, 0.0));
        }
        let (kappa, factor, rescaled) = self.common(s)?;
        let shell = shell_sinh(s.sqrt(), self.rho_prime, rescaled);
        let value = 4.0 * PI * self.r_m.powi(3) * kappa * factor * self.rho_prime * shell;
        debug_assert!(
            s.im != 0.0 || s.re <= 0.0 || value.re >= 0.0,
            "release transform must be non-negative on the positive real axis"
        );
        Ok(value)
    }

    /// `int_0^1 phi_star(s | rho') d rho'`, the transform for a source
    /// spread uniformly over the interior (per unit radial density).
    pub fn phi_star_uniform(&self, s: Complex64) -> Result<Complex64> {
        if self.h == 0.0 {
            return Ok(Complex64::new(0.0, 0.0));
        }
        let (kappa, factor, rescaled) = self.common(s)?;
        let radial = radial_moment(s.sqrt(), rescaled);
        Ok(4.0 * PI * self.r_m.powi(3) * kappa * factor * radial)
    }
}

/// `sinh(q rho)`, multiplied by `exp(-q)` when `rescaled`.
fn shell_sinh(q: Complex64, rho: f64, rescaled: bool) -> Complex64 {
    if rescaled {
        ((q * (rho - 1.0)).exp() - (-q * (rho + 1.0)).exp()) * 0.5
    } else {
        (q * rho).sinh()
    }
}

/// `int_0^1 rho sinh(q rho) d rho = (q cosh q - sinh q) / q^2`, multiplied by
/// `exp(-q)` when `rescaled`.
fn radial_moment(q: Complex64, rescaled: bool) -> Complex64 {
    if q.norm() < 0.5 {
        // sum_{k>=1} 2k q^(2k-1) / (2k+1)!
        let q2 = q * q;
        let mut term = q / 3.0;
        let mut sum = term;
        for k in 2..12 {
            let k = k as f64;
            // ratio of consecutive coefficients 2k/(2k+1)! over 2(k-1)/(2k-1)!
            term = term * q2 * (k / ((k - 1.0) * 2.0 * k * (2.0 * k + 1.0)));
            sum += term;
        }
        return sum;
    }
    if rescaled {
        let e = (-2.0 * q).exp();
        (q * (1.0 + e) - (1.0 - e)) * 0.5 / (q * q)
    } else {
        (q * q.cosh() - q.sinh()) / (q * q)
    }
}

/// Quadrature settings for the Talbot inversion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TalbotConfig {
    /// Quadrature nodes on the full contour (half of them are evaluated).
    pub n_nodes: usize,
    /// Multiplier on the contour scale `n_nodes / t`.
    pub shift_scale: f64,
}

impl Default for TalbotConfig {
    fn default() -> Self {
        Self {
            n_nodes: 48,
            shift_scale: 1.0,
        }
    }
}

impl TalbotConfig {
    pub fn with_nodes(n_nodes: usize) -> Self {
        Self {
            n_nodes,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_nodes < 8 || !self.n_nodes.is_multiple_of(2) {
            return Err(invalid("n_nodes", "need an even node count >= 8"));
        }
        if !(self.shift_scale > 0.0 && self.shift_scale.is_finite()) {
            return Err(invalid("shift_scale", "must be > 0"));
        }
        Ok(())
    }
}

// Cotangent contour s(theta) = mu (SIGMA + ALPHA theta cot(BETA theta) + i NU theta)
// with the optimized constants of Weideman and Trefethen.
const SIGMA: f64 = -0.6122;
const ALPHA: f64 = 0.5017;
const BETA: f64 = 0.6407;
const NU: f64 = 0.2645;

/// Inverse Laplace transform of `f` at `t > 0` by trapezoidal quadrature on
/// a Talbot-type cotangent contour.
///
/// `f` must be analytic off the negative real axis and satisfy
/// `f(conj(s)) = conj(f(s))`; only the upper half of the contour is
/// evaluated.
pub fn talbot_invert<F>(f: F, t: f64, cfg: &TalbotConfig) -> Result<f64>
where
    F: Fn(Complex64) -> Result<Complex64>,
{
    cfg.validate()?;
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::Inversion {
            t,
            reason: "inversion requires t > 0".into(),
        });
    }
    let n = cfg.n_nodes;
    let mu = cfg.shift_scale * n as f64 / t;
    let mut acc = 0.0;
    for k in 0..n / 2 {
        let theta = (2 * k + 1) as f64 * PI / n as f64;
        let bt = BETA * theta;
        let cot = bt.cos() / bt.sin();
        let s = Complex64::new(mu * (SIGMA + ALPHA * theta * cot), mu * NU * theta);
        let ds = Complex64::new(mu * ALPHA * (cot - bt / (bt.sin() * bt.sin())), mu * NU);
        let value = f(s).map_err(|e| Error::Inversion {
            t,
            reason: e.to_string(),
        })?;
        let term = (s * t).exp() * value * ds;
        if !term.is_finite() {
            return Err(Error::Inversion {
                t,
                reason: format!("non-finite contour term at s = {s}"),
            });
        }
        acc += term.im;
    }
    Ok(2.0 * acc / n as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn ok(f: impl Fn(Complex64) -> Complex64) -> impl Fn(Complex64) -> Result<Complex64> {
        move |s| Ok(f(s))
    }

    #[test]
    fn closed_membrane_releases_nothing() {
        let tf = TransferFunction::new(1.0, 0.0, 5e-6, 0.5).unwrap();
        assert_eq!(tf.phi_star(c(1.0, 2.0)).unwrap(), c(0.0, 0.0));
        assert_eq!(tf.phi_star_uniform(c(1.0, 0.0)).unwrap(), c(0.0, 0.0));
    }

    #[test]
    fn small_s_limit_is_injected_mass() {
        for &(h, rho) in &[(0.44208, 0.1), (4.9e4, 0.5), (1.0, 0.9)] {
            let tf = TransferFunction::new(1.0, h, 5e-6, rho).unwrap();
            let target = 4.0 * PI * (rho * 5e-6f64).powi(2);
            let v8 = tf.phi_star(c(1e-8, 0.0)).unwrap();
            let v10 = tf.phi_star(c(1e-10, 0.0)).unwrap();
            assert!(((v10.re - target) / target).abs() < ((v8.re - target) / target).abs() + 1e-12);
            assert!(
                ((v10.re - target) / target).abs() < 1e-4,
                "h={h}: {}",
                v10.re / target
            );
        }
    }

    #[test]
    fn vanishing_source_radius() {
        let tf = TransferFunction::new(1.0, 2.0, 5e-6, 1e-9).unwrap();
        assert!(tf.phi_star(c(1.0, 0.0)).unwrap().norm() < 1e-25);
    }

    #[test]
    fn rescaled_branch_is_continuous() {
        let tf = TransferFunction::new(1.0, 3.0, 5e-6, 0.7).unwrap();
        let below = tf.phi_star(c(29.999f64.powi(2), 0.0)).unwrap();
        let above = tf.phi_star(c(30.001f64.powi(2), 0.0)).unwrap();
        assert!(((below - above).norm() / below.norm()) < 1e-3);
        // no overflow far out on the contour
        assert!(tf.phi_star(c(1e7, 3e6)).unwrap().is_finite());
    }

    #[test]
    fn radial_moment_series_matches_closed_form() {
        for q in [c(0.49, 0.0), c(0.3, 0.35), c(0.1, -0.2)] {
            let series = radial_moment(q, false);
            let closed = (q * q.cosh() - q.sinh()) / (q * q);
            assert!((series - closed).norm() / closed.norm() < 1e-12);
        }
    }

    #[test]
    fn talbot_rejects_non_positive_time() {
        let f = ok(|s| 1.0 / s);
        assert!(talbot_invert(&f, 0.0, &TalbotConfig::default()).is_err());
        assert!(talbot_invert(&f, -1.0, &TalbotConfig::default()).is_err());
        assert!(talbot_invert(&f, 1.0, &TalbotConfig::with_nodes(6)).is_err());
    }

    #[test]
    fn talbot_standard_pairs() {
        let cfg = TalbotConfig::with_nodes(32);
        for t in [0.01, 0.1, 1.0, 5.0, 20.0] {
            let step = talbot_invert(ok(|s| 1.0 / s), t, &cfg).unwrap();
            assert!((step - 1.0).abs() < 1e-8, "t={t}: {step}");
            let ramp = talbot_invert(ok(|s| 1.0 / (s * s)), t, &cfg).unwrap();
            assert!(((ramp - t) / t).abs() < 1e-8);
        }
        for t in [0.1, 1.0, 5.0] {
            let e = talbot_invert(ok(|s| 1.0 / (s + 1.0)), t, &cfg).unwrap();
            assert!(((e - (-t).exp()) / (-t).exp()).abs() < 1e-8);
        }
    }

    #[test]
    fn talbot_node_doubling_is_stable() {
        let pairs: Vec<Box<dyn Fn(Complex64) -> Complex64>> = vec![
            Box::new(|s| 1.0 / s),
            Box::new(|s| 1.0 / (s * s)),
            Box::new(|s| 1.0 / (s + 1.0)),
        ];
        for f in &pairs {
            for t in [0.1, 0.5, 1.0, 2.0, 5.0] {
                let g = |s: Complex64| Ok(f(s));
                let a = talbot_invert(g, t, &TalbotConfig::with_nodes(32)).unwrap();
                let b = talbot_invert(g, t, &TalbotConfig::with_nodes(64)).unwrap();
                assert!(((a - b) / b).abs() < 1e-9, "t={t}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn doubling_radius_scales_by_four() {
        // 4 pi r_m^3 prefactor times the 1/r_m of U2: the s -> 0 limit is 4 pi r'^2
        let small = TransferFunction::new(1.3, 2.0, 5e-6, 0.4).unwrap();
        let big = TransferFunction::new(1.3, 2.0, 10e-6, 0.4).unwrap();
        let s = c(0.7, 1.1);
        let ratio = big.phi_star(s).unwrap() / small.phi_star(s).unwrap();
        assert!((ratio - c(4.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn mass_limit_approached_from_below() {
        let tf = TransferFunction::new(1.0, 0.44208, 5e-6, 0.5).unwrap();
        let target = 4.0 * PI * (0.5 * 5e-6f64).powi(2);
        let mut prev = 0.0;
        for k in 0..12 {
            let s = 10f64.powi(2 - k);
            let v = tf.phi_star(c(s, 0.0)).unwrap().re;
            assert!(v > prev && v <= target * (1.0 + 1e-12), "s={s}");
            prev = v;
        }
    }

    proptest! {
        #[test]
        fn conjugate_symmetry(re in 1e-3f64..50.0, im in -50.0f64..50.0,
                              h in 0.0f64..1e5, rho in 0.01f64..=1.0, a in 0.1f64..10.0) {
            let tf = TransferFunction::new(a, h, 5e-6, rho).unwrap();
            let s = c(re, im);
            let v = tf.phi_star(s).unwrap();
            let w = tf.phi_star(s.conj()).unwrap();
            prop_assert!((v.conj() - w).norm() <= 1e-12 * v.norm().max(1e-300));
        }

        #[test]
        fn real_axis_positive(s in 1e-6f64..1e4, h in 1e-3f64..1e5, rho in 0.01f64..=1.0) {
            let tf = TransferFunction::new(1.0, h, 5e-6, rho).unwrap();
            let v = tf.phi_star(c(s, 0.0)).unwrap();
            prop_assert!(v.re > 0.0 && v.im == 0.0);
        }
    }
}
