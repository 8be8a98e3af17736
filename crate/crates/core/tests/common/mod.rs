//! Shared oracles for the integration and acceptance tests.

#![allow(dead_code)]

use num_complex::Complex64;

use nmotto::green::RootPair;
use nmotto::noise::noise_weight;
use nmotto::quad::{integrate, Tolerance};
use nmotto::spectral::BathSpec;

fn split(z: Complex64) -> [f64; 2] {
    [z.re, z.im]
}

/// Bath correlation `C(tau) = int w(omega) e^{i omega tau} d omega` by direct
/// frequency quadrature.
pub fn correlation(tau: f64, bath: &BathSpec) -> Complex64 {
    let p = &bath.spectral;
    let top = p.omega_c + 60.0 * bath.temperature + 200.0 * p.lambda;
    let mut bp = vec![0.0, p.omega_m, 1.0];
    for k in [-20.0, -5.0, -1.0, 0.0, 1.0, 5.0, 20.0] {
        bp.push(p.omega_c + k * p.lambda);
    }
    if tau > 0.0 {
        let step = std::f64::consts::PI / tau;
        let mut x = step;
        while x < top {
            bp.push(x);
            x += 4.0 * step;
        }
    }
    bp.push(top);
    bp.retain(|&x| (0.0..=top).contains(&x));
    bp.sort_by(f64::total_cmp);
    bp.dedup();
    let r = integrate(
        |w| split(noise_weight(w, bath) * Complex64::new(0.0, w * tau).exp()),
        &bp,
        Tolerance::new(1e-13, 1e-12),
        2_000_000,
    );
    assert!(r.converged, "correlation quadrature at tau = {tau}");
    Complex64::new(r.value[0], r.value[1])
}

/// `H(tau) = int_tau^t G(s) G*(s - tau) ds`.
fn overlap(tau: f64, t: f64, roots: &RootPair) -> Complex64 {
    let r = integrate(
        |s| split(roots.green(s).0 * roots.green(s - tau).0.conj()),
        &[tau, 0.5 * (tau + t), t],
        Tolerance::new(1e-14, 1e-12),
        200_000,
    );
    Complex64::new(r.value[0], r.value[1])
}

/// Noise integral `I(t) = int int G*(t-t1) G(t-t2) <c^dag(t1) c(t2)>` in the
/// time domain. The Hermitian symmetry of the integrand folds the square
/// onto `t1 > t2`, leaving `2 Re int_0^t C(tau) H(tau) d tau`.
pub fn brute_force_noise(t: f64, roots: &RootPair, bath: &BathSpec) -> f64 {
    let panels = (8.0 * t).ceil().max(4.0) as usize;
    let bp: Vec<f64> = (0..=panels).map(|j| t * j as f64 / panels as f64).collect();
    let r = integrate(
        |tau| split(correlation(tau, bath) * overlap(tau, t, roots)),
        &bp,
        Tolerance::new(1e-12, 1e-9),
        100_000,
    );
    assert!(r.converged, "outer quadrature at t = {t}");
    2.0 * r.value[0]
}
