//! Lorentzian bath spectral density, its low-frequency regularization,
//! thermal occupations, and the Markovian reference rates.
//!
//! Units: ħ = 1 and k_B is folded into temperatures, so frequencies,
//! energies and temperatures share one arbitrary unit.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Smallest allowed `omega_c / omega_m` unless overridden.
pub const DEFAULT_CROSSOVER_RATIO: f64 = 50.0;
/// `omega_m = omega_c / DEFAULT_OMEGA_M_DIVISOR` when not given explicitly.
pub const DEFAULT_OMEGA_M_DIVISOR: f64 = 100.0;
/// Ratio that quantifies "much greater than" in [`consistency_check`].
pub const DEFAULT_CONSISTENCY_RATIO: f64 = 100.0;

/// Lorentzian bath: coupling `gamma0`, width `lambda`, peak `omega_c`, and
/// the crossover `omega_m` below which the density is replaced by a linear
/// ramp.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralParams {
    pub gamma0: f64,
    pub lambda: f64,
    pub omega_c: f64,
    pub omega_m: f64,
}

impl SpectralParams {
    pub fn new(gamma0: f64, lambda: f64, omega_c: f64, omega_m: f64) -> Result<Self> {
        Self::with_crossover_ratio(gamma0, lambda, omega_c, omega_m, DEFAULT_CROSSOVER_RATIO)
    }

    /// Uses the default crossover `omega_m = omega_c / 100`.
    pub fn lorentzian(gamma0: f64, lambda: f64, omega_c: f64) -> Result<Self> {
        Self::new(gamma0, lambda, omega_c, omega_c / DEFAULT_OMEGA_M_DIVISOR)
    }

    pub fn with_crossover_ratio(
        gamma0: f64,
        lambda: f64,
        omega_c: f64,
        omega_m: f64,
        min_ratio: f64,
    ) -> Result<Self> {
        // gamma0 = 0 is accepted as the decoupled limit.
        if !(gamma0 >= 0.0 && gamma0.is_finite()) {
            return Err(Error::invalid("gamma0", format!("must be >= 0, got {gamma0}")));
        }
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::invalid("lambda", format!("must be > 0, got {lambda}")));
        }
        if !(omega_c > 0.0 && omega_c.is_finite()) {
            return Err(Error::invalid("omega_c", format!("must be > 0, got {omega_c}")));
        }
        if !(omega_m > 0.0 && omega_m < omega_c) {
            return Err(Error::invalid(
                "omega_m",
                format!("must satisfy 0 < omega_m < omega_c, got {omega_m}"),
            ));
        }
        if omega_m * min_ratio > omega_c * (1.0 + 1e-12) {
            return Err(Error::invalid(
                "omega_m",
                format!("must be <= omega_c/{min_ratio}, got {omega_m}"),
            ));
        }
        Ok(Self {
            gamma0,
            lambda,
            omega_c,
            omega_m,
        })
    }

    /// Same bath shape, different coupling.
    pub fn with_gamma0(self, gamma0: f64) -> Result<Self> {
        if !(gamma0 >= 0.0 && gamma0.is_finite()) {
            return Err(Error::invalid("gamma0", format!("must be >= 0, got {gamma0}")));
        }
        Ok(Self { gamma0, ..self })
    }
}

/// A thermal bath: temperature (k_B T) plus its spectral density.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BathSpec {
    pub temperature: f64,
    pub spectral: SpectralParams,
}

impl BathSpec {
    pub fn new(temperature: f64, spectral: SpectralParams) -> Result<Self> {
        if !(temperature > 0.0 && temperature.is_finite()) {
            return Err(Error::invalid(
                "temperature",
                format!("must be > 0, got {temperature}"),
            ));
        }
        Ok(Self {
            temperature,
            spectral,
        })
    }

    pub fn beta(&self) -> f64 {
        1.0 / self.temperature
    }
}

/// `J(omega) = (gamma0 / 2 pi) lambda^2 / ((omega_c - omega)^2 + lambda^2)`.
pub fn lorentzian_j(omega: f64, p: &SpectralParams) -> f64 {
    let d = p.omega_c - omega;
    p.gamma0 / (2.0 * PI) * p.lambda * p.lambda / (d * d + p.lambda * p.lambda)
}

/// Analytic continuation of [`lorentzian_j`] off the real axis.
pub fn lorentzian_j_complex(z: Complex64, p: &SpectralParams) -> Complex64 {
    let d = p.omega_c - z;
    p.gamma0 / (2.0 * PI) * p.lambda * p.lambda / (d * d + p.lambda * p.lambda)
}

/// `dJ/domega = (gamma0 / pi) lambda^2 (omega_c - omega) / ((omega_c - omega)^2 + lambda^2)^2`.
pub fn lorentzian_slope(omega: f64, p: &SpectralParams) -> f64 {
    let d = p.omega_c - omega;
    let den = d * d + p.lambda * p.lambda;
    p.gamma0 / PI * p.lambda * p.lambda * d / (den * den)
}

/// Lorentzian with a linear ramp through the origin below `omega_m`.
pub fn regularized_j(omega: f64, p: &SpectralParams) -> Result<f64> {
    if !(omega >= 0.0) {
        return Err(Error::Domain {
            quantity: "regularized_j",
            value: omega,
            reason: "frequency must be non-negative",
        });
    }
    Ok(if omega <= p.omega_m {
        lorentzian_j(p.omega_m, p) * omega / p.omega_m
    } else {
        lorentzian_j(omega, p)
    })
}

/// Outcome of the low-frequency regularization consistency test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Consistency {
    pub ok: bool,
    /// `omega0 / ((gamma0/2) lambda^2 / (omega_c^2 + lambda^2))`.
    pub margin: f64,
}

/// Checks that `omega0` dominates the zero-frequency shift scale
/// `(gamma0/2) lambda^2/(omega_c^2 + lambda^2)` by at least `ratio`.
pub fn consistency_check_with(omega0: f64, p: &SpectralParams, ratio: f64) -> Consistency {
    let scale = 0.5 * p.gamma0 * p.lambda * p.lambda / (p.omega_c * p.omega_c + p.lambda * p.lambda);
    let margin = if scale == 0.0 { f64::INFINITY } else { omega0 / scale };
    Consistency {
        ok: margin >= ratio,
        margin,
    }
}

pub fn consistency_check(omega0: f64, p: &SpectralParams) -> Consistency {
    consistency_check_with(omega0, p, DEFAULT_CONSISTENCY_RATIO)
}

/// Bose-Einstein occupation `1/(e^{omega/T} - 1)`.
pub fn planck_occupation(omega: f64, temperature: f64) -> Result<f64> {
    if !(omega > 0.0) {
        return Err(Error::Domain {
            quantity: "planck_occupation",
            value: omega,
            reason: "diverges for omega <= 0",
        });
    }
    if !(temperature > 0.0) {
        return Err(Error::Domain {
            quantity: "planck_occupation",
            value: temperature,
            reason: "temperature must be positive",
        });
    }
    Ok(1.0 / (omega / temperature).exp_m1())
}

/// `(e^z - 1)/z`, accurate near `z = 0`.
pub fn phi1(z: Complex64) -> Complex64 {
    if z.norm() < 0.1 {
        // Horner on sum_{k>=0} z^k/(k+1)!
        let mut acc = Complex64::new(1.0 / 479_001_600.0, 0.0); // 1/12!
        let mut k = 11;
        while k >= 1 {
            acc = acc * z + 1.0 / factorial(k);
            k -= 1;
        }
        acc
    } else {
        (z.exp() - 1.0) / z
    }
}

fn factorial(k: u32) -> f64 {
    (1..=k).map(f64::from).product()
}

/// Planck occupation at complex frequency; zero once `Re z / T` is large.
pub fn planck_complex(z: Complex64, temperature: f64) -> Complex64 {
    let x = z / temperature;
    if x.re > 700.0 {
        return Complex64::new(0.0, 0.0);
    }
    1.0 / (x.exp() - 1.0)
}

/// `z n_E(z) = T / phi1(z/T)`, regular at the origin.
pub fn z_planck_complex(z: Complex64, temperature: f64) -> Complex64 {
    let x = z / temperature;
    if x.re > 700.0 {
        return Complex64::new(0.0, 0.0);
    }
    temperature / phi1(x)
}

/// Full-axis memory kernel `(gamma0 lambda / 2) e^{-i omega_c tau - lambda |tau|}`.
pub fn memory_kernel(tau: f64, p: &SpectralParams) -> Complex64 {
    0.5 * p.gamma0 * p.lambda * Complex64::new(-p.lambda * tau.abs(), -p.omega_c * tau).exp()
}

/// Born-Markov decay rate `2 pi J(omega0)`.
pub fn markov_rate(omega0: f64, p: &SpectralParams) -> f64 {
    2.0 * PI * lorentzian_j(omega0, p)
}

/// Principal-value frequency shift of the full-axis Lorentzian,
/// `gamma0 lambda Delta / 2 / (lambda^2 + Delta^2)` with `Delta = omega0 - omega_c`.
pub fn markov_shift(omega0: f64, p: &SpectralParams) -> f64 {
    let delta = omega0 - p.omega_c;
    0.5 * p.gamma0 * p.lambda * delta / (p.lambda * p.lambda + delta * delta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::{integrate, Tolerance};
    use proptest::prelude::*;

    fn fig3(gamma0: f64) -> SpectralParams {
        SpectralParams::lorentzian(gamma0, 0.2, 15.0).unwrap()
    }

    #[test]
    fn lorentzian_values() {
        let p = fig3(1.0);
        assert!((lorentzian_j(15.0, &p) - 0.159_154_943_091_895_3).abs() < 1e-15);
        assert!((lorentzian_j(15.2, &p) - 0.5 * lorentzian_j(15.0, &p)).abs() < 1e-15);
        assert!((lorentzian_j(14.8, &p) - 0.5 * lorentzian_j(15.0, &p)).abs() < 1e-15);
        let expected = 1.0 / (2.0 * PI) * 0.04 / 1.04;
        assert!((lorentzian_j(14.0, &p) - expected).abs() < 1e-15);
        assert!((lorentzian_j(14.0, &p) - 0.006_121_3).abs() < 1e-7);
    }

    #[test]
    fn regularized_density() {
        let p = fig3(1.0);
        assert_eq!(regularized_j(0.0, &p).unwrap(), 0.0);
        assert_eq!(regularized_j(p.omega_m, &p).unwrap(), lorentzian_j(p.omega_m, &p));
        assert_eq!(regularized_j(2.0 * p.omega_m, &p).unwrap(), lorentzian_j(2.0 * p.omega_m, &p));
        assert!(matches!(regularized_j(-1e-3, &p), Err(Error::Domain { .. })));
        let below = regularized_j(p.omega_m * (1.0 - 1e-15), &p).unwrap();
        let above = regularized_j(p.omega_m * (1.0 + 1e-15), &p).unwrap();
        assert!((below - above).abs() <= 1e-14);
    }

    #[test]
    fn consistency() {
        let c = consistency_check(16.0, &fig3(1.0));
        assert!(c.ok);
        assert!((c.margin - 16.0 / (0.5 * 0.04 / 225.04)).abs() < 1e-6);
        assert!((c.margin / 1.8e5 - 1.0).abs() < 0.01);
        let free = consistency_check(16.0, &fig3(0.0));
        assert!(free.ok && free.margin.is_infinite());
        let p = fig3(1.0);
        let boundary = 0.5 * p.gamma0 * p.lambda * p.lambda / (p.omega_c * p.omega_c + p.lambda * p.lambda);
        let c = consistency_check(boundary, &p);
        assert!(!c.ok);
        assert!((c.margin - 1.0).abs() < 1e-12);
    }

    #[test]
    fn planck_values() {
        assert!((planck_occupation(14.0, 15.0).unwrap() - 0.648_100_053).abs() < 1e-8);
        assert!((planck_occupation(16.0, 20.0).unwrap() - 0.815_966_221).abs() < 1e-8);
        assert_eq!(planck_occupation(1e4, 1.0).unwrap(), 0.0);
        assert!(planck_occupation(0.0, 1.0).is_err());
        let z = Complex64::new(14.0, 0.0);
        assert!((planck_complex(z, 15.0).re - 0.648_100_053).abs() < 1e-8);
        assert!((z_planck_complex(Complex64::new(0.0, 0.0), 3.0).re - 3.0).abs() < 1e-15);
    }

    #[test]
    fn phi1_matches_direct_formula() {
        for z in [Complex64::new(0.05, 0.02), Complex64::new(-0.09, 0.0), Complex64::new(0.0, 0.07)] {
            let direct = (z.exp() - 1.0) / z;
            assert!((phi1(z) - direct).norm() < 1e-13);
        }
        assert_eq!(phi1(Complex64::new(0.0, 0.0)), Complex64::new(1.0, 0.0));
    }

    #[test]
    fn memory_kernel_values() {
        let p = fig3(1.0);
        assert!((memory_kernel(0.0, &p).re - 0.1).abs() < 1e-15);
        for tau in [-3.0, 0.5, 7.0] {
            assert!((memory_kernel(tau, &p).norm() - 0.1 * (-0.2 * f64::abs(tau)).exp()).abs() < 1e-15);
        }
        assert_eq!(memory_kernel(1.0, &fig3(0.0)).norm(), 0.0);
    }

    #[test]
    fn kernel_at_origin_is_the_full_axis_weight() {
        let p = fig3(1.0);
        // Substitute omega = omega_c + lambda tan(theta) to integrate over the real line.
        let r = integrate(
            |th: f64| {
                let w = p.omega_c + p.lambda * th.tan();
                [lorentzian_j(w, &p) * p.lambda / th.cos().powi(2)]
            },
            &[-PI / 2.0, 0.0, PI / 2.0],
            Tolerance::new(1e-14, 1e-12),
            10_000,
        );
        assert!((r.value[0] / memory_kernel(0.0, &p).re - 1.0).abs() < 1e-8);
    }

    #[test]
    fn markov_rates() {
        let p = fig3(1.0);
        assert!((markov_rate(15.0, &p) - 1.0).abs() < 1e-14);
        assert!((markov_rate(16.0, &p) - 0.04 / 1.04).abs() < 1e-14);
        assert!((markov_rate(16.0, &p) - 0.038_462).abs() < 1e-6);
        assert!(markov_rate(1e6, &p) < 1e-12);
        assert_eq!(markov_shift(15.0, &p), 0.0);
        assert!((markov_shift(16.0, &p) - 0.1 / 1.04).abs() < 1e-14);
        assert!((markov_shift(14.0, &p) + 0.096_154).abs() < 1e-6);
    }

    #[test]
    fn invalid_parameters() {
        assert!(SpectralParams::lorentzian(-1.0, 0.2, 15.0).is_err());
        assert!(SpectralParams::lorentzian(1.0, 0.0, 15.0).is_err());
        assert!(SpectralParams::new(1.0, 0.2, 15.0, 1.0).is_err());
        assert!(SpectralParams::new(1.0, 0.2, 15.0, 0.3).is_ok());
        assert!(SpectralParams::with_crossover_ratio(1.0, 0.2, 15.0, 1.0, 10.0).is_ok());
        assert!(BathSpec::new(0.0, fig3(1.0)).is_err());
    }

    proptest! {
        #[test]
        fn lorentzian_symmetric(x in -50.0f64..50.0, g in 0.01f64..20.0, l in 0.05f64..5.0) {
            let p = SpectralParams::lorentzian(g, l, 15.0).unwrap();
            let a = lorentzian_j(15.0 + x, &p);
            let b = lorentzian_j(15.0 - x, &p);
            prop_assert!((a - b).abs() <= 1e-14 * a.abs().max(1e-300));
        }

        #[test]
        fn regularized_nonnegative(w in 0.0f64..100.0) {
            let p = fig3(3.0);
            prop_assert!(regularized_j(w, &p).unwrap() >= 0.0);
        }

        #[test]
        fn markov_rate_bounded(d in -20.0f64..20.0) {
            let p = fig3(2.0);
            let r = markov_rate(15.0 + d, &p);
            prop_assert!(r <= 2.0 * (1.0 + 1e-15));
            if d.abs() > 1e-6 { prop_assert!(r < 2.0); }
        }

        #[test]
        fn planck_monotone(w in 0.1f64..50.0, t in 0.5f64..40.0, dw in 0.01f64..5.0, dt in 0.01f64..5.0) {
            let n = planck_occupation(w, t).unwrap();
            prop_assert!(planck_occupation(w + dw, t).unwrap() < n);
            prop_assert!(planck_occupation(w, t + dt).unwrap() > n);
        }
    }
}
