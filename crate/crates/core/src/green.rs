//! Closed-form Green function of the Lorentzian Fano-Anderson model.
//!
//! With the memory kernel extended over the whole frequency axis, the
//! propagator of the system mode is
//!
//! ```text
//! G(t) = e^{-i w0 t} (mu2 e^{mu1 t} - mu1 e^{mu2 t}) / (mu2 - mu1)
//! ```
//!
//! where `mu1`, `mu2` solve `mu^2 + (lambda - i Delta) mu + gamma0 lambda / 2 = 0`.
//! Everything time-local in the exact master equation follows from the
//! logarithmic derivative `G'/G = -i w0 + rho(t)`, which is evaluated here in
//! a form that stays finite as `|G| -> 0` through the long-time decay.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::spectral::SpectralParams;

/// Relative separation below which the two roots are treated as one.
pub const DEGENERATE_TOL: f64 = 1e-10;
/// Default threshold on the envelope-normalized `|G|` for flagging a zero.
pub const DEFAULT_GUARD: f64 = 1e-12;

const I: Complex64 = Complex64::new(0.0, 1.0);

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RootPair {
    /// Dominant (slowest-decaying) root.
    pub mu1: Complex64,
    pub mu2: Complex64,
    pub omega0: f64,
    /// `omega0 - omega_c`.
    pub delta: f64,
    /// Both roots coincide; `G` takes the confluent form `(1 - mu t) e^{mu t}`.
    pub confluent: bool,
}

impl RootPair {
    /// Solves for the roots and switches to the confluent branch when they
    /// coincide.
    pub fn new(omega0: f64, p: &SpectralParams) -> Result<Self> {
        match solve_roots(omega0, p) {
            Err(Error::DegenerateRoots { .. }) => {
                let b = Complex64::new(p.lambda, -(omega0 - p.omega_c));
                let mu = -0.5 * b;
                if mu.re >= 0.0 {
                    return Err(Error::UnstableRoot { re: mu.re, im: mu.im });
                }
                Ok(Self {
                    mu1: mu,
                    mu2: mu,
                    omega0,
                    delta: omega0 - p.omega_c,
                    confluent: true,
                })
            }
            other => other,
        }
    }

    pub fn is_free(&self) -> bool {
        self.mu1 == Complex64::new(0.0, 0.0)
    }

    /// Real parts coincide: the relative phase of the two modes never
    /// settles and `G` has periodic exact zeros.
    pub fn is_balanced(&self) -> bool {
        !self.confluent
            && !self.is_free()
            && (self.mu1.re - self.mu2.re).abs() <= 1e-12 * self.mu1.norm().max(self.mu2.norm())
    }

    /// Amplitudes `c1 = mu2/(mu2-mu1)`, `c2 = -mu1/(mu2-mu1)` with
    /// `G = e^{-i w0 t} (c1 e^{mu1 t} + c2 e^{mu2 t})`.
    pub fn amplitudes(&self) -> [Complex64; 2] {
        let d = self.mu2 - self.mu1;
        [self.mu2 / d, -self.mu1 / d]
    }

    pub fn roots(&self) -> [Complex64; 2] {
        [self.mu1, self.mu2]
    }

    /// `rho = G'/G + i w0`, its time derivative, and the envelope-normalized
    /// modulus `|G| e^{-Re(mu1) t}` used for zero detection.
    pub fn log_derivative(&self, t: f64) -> (Complex64, Complex64, f64) {
        if self.is_free() {
            return (Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0), 1.0);
        }
        if self.confluent {
            let mu = self.mu1;
            let den = 1.0 - mu * t;
            let rho = -mu * mu * t / den;
            let rho_dot = -mu * mu / (den * den);
            return (rho, rho_dot, den.norm());
        }
        let (m1, m2) = (self.mu1, self.mu2);
        let r = ((m2 - m1) * t).exp();
        let den = m2 - m1 * r;
        let rho = m1 * m2 * (1.0 - r) / den;
        let rho_dot = -m1 * m2 * (m2 - m1) * (m2 - m1) * r / (den * den);
        (rho, rho_dot, den.norm() / (m2 - m1).norm())
    }

    /// Times in `[0, t_end]` where the normalized envelope drops below `tol`,
    /// one per near-zero of `G`.
    ///
    /// `G` vanishes where `(mu2 - mu1) t = ln(mu2/mu1) + 2 pi i k`; each
    /// branch `k` is projected onto the real axis and checked.
    pub fn near_zeros(&self, t_end: f64, tol: f64) -> Vec<f64> {
        if self.is_free() || self.confluent {
            return Vec::new();
        }
        let d = self.mu2 - self.mu1;
        let log = (self.mu2 / self.mu1).ln();
        let norm = d.norm_sqr();
        let at = |k: f64| (d.conj() * (log + Complex64::new(0.0, 2.0 * PI * k))).re / norm;
        let slope = 2.0 * PI * d.im / norm;
        if slope.abs() < 1e-300 {
            return Vec::new();
        }
        let (ka, kb) = ((0.0 - at(0.0)) / slope, (t_end - at(0.0)) / slope);
        let (lo, hi) = (ka.min(kb).floor() as i64, ka.max(kb).ceil() as i64);
        let mut out: Vec<f64> = (lo..=hi)
            .map(|k| at(k as f64))
            .filter(|&t| (0.0..=t_end).contains(&t) && self.log_derivative(t).2 < tol)
            .collect();
        out.sort_by(f64::total_cmp);
        out
    }

    /// `G(t)` and `G'(t)` directly from the closed form.
    pub fn green(&self, t: f64) -> (Complex64, Complex64) {
        let phase = Complex64::new(0.0, -self.omega0 * t).exp();
        if self.is_free() {
            return (phase, -I * self.omega0 * phase);
        }
        if self.confluent {
            let mu = self.mu1;
            let e = (mu * t).exp();
            let g = (1.0 - mu * t) * e;
            let gdot = -mu * mu * t * e;
            return (phase * g, phase * (gdot - I * self.omega0 * g));
        }
        let (m1, m2) = (self.mu1, self.mu2);
        let (e1, e2) = ((m1 * t).exp(), (m2 * t).exp());
        let d = m2 - m1;
        let g = (m2 * e1 - m1 * e2) / d;
        let gdot = m1 * m2 * (e1 - e2) / d;
        (phase * g, phase * (gdot - I * self.omega0 * g))
    }
}

/// Roots of `mu^2 + (lambda - i Delta) mu + gamma0 lambda / 2 = 0`, dominant
/// root first.
pub fn solve_roots(omega0: f64, p: &SpectralParams) -> Result<RootPair> {
    let delta = omega0 - p.omega_c;
    let b = Complex64::new(p.lambda, -delta);
    let c = Complex64::new(0.5 * p.gamma0 * p.lambda, 0.0);
    let sq = (b * b - 4.0 * c).sqrt();
    // Add the square root with the sign that avoids cancellation.
    let s = if (b.conj() * sq).re >= 0.0 { b + sq } else { b - sq };
    let q = -0.5 * s;
    let (mut m1, mut m2) = if c.re == 0.0 {
        (Complex64::new(0.0, 0.0), -b)
    } else {
        (q, c / q)
    };
    if m2.re > m1.re {
        std::mem::swap(&mut m1, &mut m2);
    }
    if (m1 - m2).norm() < DEGENERATE_TOL * m1.norm().max(m2.norm()) {
        return Err(Error::DegenerateRoots { re: m1.re, im: m1.im });
    }
    if p.gamma0 > 0.0 {
        for m in [m1, m2] {
            if m.re >= 0.0 {
                return Err(Error::UnstableRoot { re: m.re, im: m.im });
            }
        }
    }
    Ok(RootPair {
        mu1: m1,
        mu2: m2,
        omega0,
        delta,
        confluent: false,
    })
}

/// Green function and TCL coefficients at one instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GreenSample {
    pub t: f64,
    pub g: Complex64,
    pub gdot: Complex64,
    /// `-Im(G'/G)`; NaN when flagged.
    pub omega_r: f64,
    /// `-2 Re(G'/G)`; NaN when flagged.
    pub gamma_t: f64,
    pub omega_r_dot: f64,
    pub gamma_dot: f64,
    /// `G` is within the guard threshold of an exact zero.
    pub flagged: bool,
}

pub fn green_at(t: f64, r: &RootPair) -> GreenSample {
    green_at_with_guard(t, r, DEFAULT_GUARD)
}

pub fn green_at_with_guard(t: f64, r: &RootPair, guard: f64) -> GreenSample {
    let (g, gdot) = r.green(t);
    let (rho, rho_dot, envelope) = r.log_derivative(t);
    let flagged = envelope < guard || !rho.is_finite() || !rho_dot.is_finite();
    let (omega_r, gamma_t, omega_r_dot, gamma_dot) = if flagged {
        (f64::NAN, f64::NAN, f64::NAN, f64::NAN)
    } else {
        (r.omega0 - rho.im, -2.0 * rho.re, -rho_dot.im, -2.0 * rho_dot.re)
    };
    GreenSample {
        t,
        g,
        gdot,
        omega_r,
        gamma_t,
        omega_r_dot,
        gamma_dot,
        flagged,
    }
}

/// Second-order (Born) renormalized frequency.
pub fn born_omega_r(t: f64, omega0: f64, p: &SpectralParams) -> f64 {
    let d = omega0 - p.omega_c;
    let l = p.lambda;
    // (gamma0 lambda / 2)/(l^2+d^2) * [d - e^{-l t}(d cos dt + l sin dt)]
    let bracket = d - (-l * t).exp() * (d * (d * t).cos() + l * (d * t).sin());
    omega0 + 0.5 * p.gamma0 * l / (l * l + d * d) * bracket
}

/// Long-time renormalized frequency `omega0 - Im(mu1)`.
///
/// When both roots decay at the same rate (resonance with strong coupling)
/// `G(t)` is a real oscillation times `e^{-i w0 t}`, so the frequency stays
/// at `omega0`.
pub fn steady_omega_r(r: &RootPair) -> Result<f64> {
    if r.is_free() {
        return Ok(r.omega0);
    }
    for m in r.roots() {
        if m.re >= 0.0 {
            return Err(Error::UnstableRoot { re: m.re, im: m.im });
        }
    }
    if r.is_balanced() {
        return Ok(r.omega0);
    }
    Ok(r.omega0 - r.mu1.im)
}

/// Long-time decay rate of `|G|^2`, `-2 Re(mu1)`.
pub fn steady_gamma(r: &RootPair) -> f64 {
    -2.0 * r.mu1.re
}

/// Relaxation rate of `omega_r(t)` towards its limit, `Re(mu1 - mu2)`.
pub fn frequency_relaxation_rate(r: &RootPair) -> f64 {
    (r.mu1.re - r.mu2.re).max(0.0)
}
