//! Thermal noise contribution to the occupation number.
//!
//! The occupation of the system mode is `n(t) = |G(t)|^2 n0 + I(t)` with
//!
//! ```text
//! I(t) = ∫_0^∞ J̃(w) n_E(w) |F(w, t)|^2 dw,   F(w, t) = ∫_0^t G(s) e^{i w s} ds.
//! ```
//!
//! For short times `I` and `dI/dt` are integrated directly along the real
//! frequency axis. For longer times the integrand oscillates as `e^{iwt}`;
//! `|F|^2` is then split into a static part (computed once per phase) and
//! an oscillatory remainder whose frequency integral is moved onto two
//! short vertical rays in the upper half plane plus pole residues.

use std::f64::consts::PI;
use std::io::{self, Write};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::green::{green_at, RootPair};
use crate::quad::{breakpoints, integrate, Tolerance};
use crate::spectral::{
    consistency_check, lorentzian_j, lorentzian_j_complex, markov_rate, phi1, planck_complex,
    z_planck_complex, BathSpec,
};

const I: Complex64 = Complex64::new(0.0, 1.0);
const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// `e^{-RAY_DEPTH}` is the neglected contribution of the horizontal segment
/// closing the deformed contour.
const RAY_DEPTH: f64 = 45.0;
/// Rays stay below this fraction of the first Matsubara frequency.
const MATSUBARA_FRACTION: f64 = 0.9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseOptions {
    /// Tolerance for `I(t)` and `dI/dt` at each instant.
    pub tol: Tolerance,
    /// Tolerance for the time-independent frequency integrals.
    pub static_tol: Tolerance,
    pub max_evals: usize,
    /// Allow the contour route for long times.
    pub contour: bool,
}

impl Default for NoiseOptions {
    fn default() -> Self {
        Self {
            tol: Tolerance::new(1e-11, 1e-9),
            static_tol: Tolerance::new(1e-13, 1e-11),
            max_evals: 400_000,
            contour: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseState {
    pub t: f64,
    pub i_val: f64,
    pub i_dot: f64,
    /// `I + I'/gamma`; NaN where `gamma(t)` vanishes or is undefined.
    pub n_coef: f64,
    /// Combined quadrature and truncation error estimate on `i_val`.
    pub error: f64,
}

impl NoiseState {
    /// `N(t)`, or [`Error::SingularGamma`] where it is undefined.
    pub fn coefficient_n(&self, gamma: f64) -> Result<f64> {
        if self.n_coef.is_finite() {
            Ok(self.n_coef)
        } else {
            Err(Error::SingularGamma { t: self.t, gamma })
        }
    }
}

/// `(e^z (z - 1) + 1)/z^2 = ∫_0^1 s e^{z s} ds`.
fn phi2(z: Complex64) -> Complex64 {
    if z.norm() < 0.1 {
        // sum_k z^k / (k! (k + 2))
        let mut acc = ZERO;
        let mut term = Complex64::new(1.0, 0.0);
        for k in 0..14 {
            acc += term / (k as f64 + 2.0);
            term = term * z / (k as f64 + 1.0);
        }
        acc
    } else {
        (z.exp() * (z - 1.0) + 1.0) / (z * z)
    }
}

/// `F(w, t)` and `G(t) e^{i w t}` at detuning `x = w - omega0`.
fn transform_and_drive(x: f64, t: f64, r: &RootPair) -> (Complex64, Complex64) {
    if r.is_free() {
        let a = I * x;
        return (t * phi1(a * t), (a * t).exp());
    }
    if r.confluent {
        let mu = r.mu1;
        let a = mu + I * x;
        let f = t * phi1(a * t) - mu * t * t * phi2(a * t);
        return (f, (1.0 - mu * t) * (a * t).exp());
    }
    let c = r.amplitudes();
    let mut f = ZERO;
    let mut d = ZERO;
    for (ck, mk) in c.iter().zip(r.roots()) {
        let a = mk + I * x;
        f += ck * t * phi1(a * t);
        d += ck * (a * t).exp();
    }
    (f, d)
}

/// `F(w, t) = ∫_0^t G(s) e^{i w s} ds` in closed form.
pub fn f_transform(omega: f64, t: f64, r: &RootPair) -> Complex64 {
    transform_and_drive(omega - r.omega0, t, r).0
}

/// Noise weight `J̃(w) n_E(w)` on the real axis, finite at `w = 0`.
pub fn noise_weight(omega: f64, bath: &BathSpec) -> f64 {
    let p = &bath.spectral;
    let temp = bath.temperature;
    let x = omega / temp;
    if x > 700.0 {
        return 0.0;
    }
    if omega <= p.omega_m {
        let slope = lorentzian_j(p.omega_m, p) / p.omega_m;
        if x == 0.0 {
            slope * temp
        } else {
            slope * temp * x / x.exp_m1()
        }
    } else {
        lorentzian_j(omega, p) / x.exp_m1()
    }
}

/// Everything about one bath-coupled phase that does not depend on the
/// initial occupation: roots, static frequency integrals and the steady
/// noise level.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseSolution {
    pub roots: RootPair,
    pub bath: BathSpec,
    pub opts: NoiseOptions,
    /// `I(∞)`.
    pub i_inf: f64,
    /// Error estimate on the static integrals.
    pub static_error: f64,
    amps: [Complex64; 2],
    /// `∫ w / (a_k conj(a_l))`.
    a_static: [[Complex64; 2]; 2],
    /// `∫ w / conj(a_l)`.
    p_static: [Complex64; 2],
    omega_max: f64,
    t_switch: f64,
    rays: Option<RayTable>,
}

impl PhaseSolution {
    pub fn new(omega0: f64, bath: &BathSpec) -> Result<Self> {
        Self::with_options(omega0, bath, NoiseOptions::default())
    }

    pub fn with_options(omega0: f64, bath: &BathSpec, opts: NoiseOptions) -> Result<Self> {
        if !(omega0 > 0.0 && omega0.is_finite()) {
            return Err(Error::invalid("omega0", format!("must be > 0, got {omega0}")));
        }
        let p = &bath.spectral;
        let check = consistency_check(omega0, p);
        if !check.ok {
            log::warn!(
                "omega0 = {omega0} is only {:.3e} times the low-frequency shift scale",
                check.margin
            );
        }
        let roots = RootPair::new(omega0, p)?;
        let temp = bath.temperature;
        let omega_max = p.omega_c + (50.0 * p.lambda).max(10.0 * temp);
        let t_switch = RAY_DEPTH / (MATSUBARA_FRACTION * 2.0 * PI * temp);
        let mut sol = Self {
            roots,
            bath: *bath,
            opts,
            i_inf: 0.0,
            static_error: 0.0,
            amps: if roots.confluent || roots.is_free() {
                [Complex64::new(1.0, 0.0), ZERO]
            } else {
                roots.amplitudes()
            },
            a_static: [[ZERO; 2]; 2],
            p_static: [ZERO; 2],
            omega_max,
            t_switch,
            rays: None,
        };
        if p.gamma0 > 0.0 {
            sol.compute_statics()?;
            if opts.contour {
                sol.rays = RayTable::build(&sol);
                if let Some(table) = &sol.rays {
                    sol.t_switch = table.t_switch;
                }
            }
        }
        Ok(sol)
    }

    pub fn omega0(&self) -> f64 {
        self.roots.omega0
    }

    /// Time beyond which the contour route is used.
    pub fn t_switch(&self) -> f64 {
        self.t_switch
    }

    fn frequency_breaks(&self) -> Vec<f64> {
        let p = &self.bath.spectral;
        let mut extra = vec![p.omega_m, p.omega_c];
        for s in [1.0, 10.0] {
            extra.push(p.omega_c - s * p.lambda);
            extra.push(p.omega_c + s * p.lambda);
        }
        for m in self.roots.roots() {
            let centre = self.omega0() - m.im;
            let width = m.re.abs().max(1e-300);
            extra.push(centre);
            for s in [1.0, 10.0, 100.0, 1000.0] {
                extra.push(centre - s * width);
                extra.push(centre + s * width);
            }
        }
        breakpoints(0.0, self.omega_max, extra)
    }

    /// Bound on `∫_{omega_max}^∞ J n_E dw` times `sup` of the remaining factor.
    fn tail(&self, factor: f64) -> f64 {
        let temp = self.bath.temperature;
        let x = self.omega_max / temp;
        let occupied = -(-(-x).exp()).ln_1p() * temp;
        lorentzian_j(self.omega_max, &self.bath.spectral) * occupied * factor
    }

    /// Lower bound on `|a_k(w)|` for `w >= omega_max`.
    fn tail_distance(&self) -> f64 {
        self.roots
            .roots()
            .iter()
            .map(|m| self.omega_max - self.omega0() + m.im)
            .fold(f64::INFINITY, f64::min)
    }

    fn compute_statics(&mut self) -> Result<()> {
        let bath = self.bath;
        let roots = self.roots;
        let w0 = self.omega0();
        let bp = self.frequency_breaks();
        if roots.confluent {
            // Only I(∞) is needed; time-dependent values use the real axis.
            let mu = roots.mu1;
            let res = integrate(
                |w| {
                    let a = mu + I * (w - w0);
                    let s = -(1.0 / a + mu / (a * a));
                    [noise_weight(w, &bath) * s.norm_sqr()]
                },
                &bp,
                self.opts.static_tol,
                self.opts.max_evals,
            );
            let d = self.tail_distance();
            let tail = self.tail(((1.0 + mu.norm() / d) / d).powi(2));
            if !res.converged {
                return Err(Error::QuadratureFailure {
                    what: "steady noise integral",
                    error: res.max_error(),
                    target: self.opts.static_tol.abs,
                });
            }
            self.i_inf = res.value[0];
            self.static_error = res.error[0] + tail;
            return Ok(());
        }
        let [m1, m2] = roots.roots();
        let res = integrate(
            |w| {
                let x = w - w0;
                let wt = noise_weight(w, &bath);
                let a1 = m1 + I * x;
                let a2 = m2 + I * x;
                let (i1, i2) = (1.0 / a1, 1.0 / a2);
                let a12 = wt * i1 * i2.conj();
                [
                    wt * i1.norm_sqr(),
                    wt * i2.norm_sqr(),
                    a12.re,
                    a12.im,
                    wt * i1.re,
                    -wt * i1.im,
                    wt * i2.re,
                    -wt * i2.im,
                ]
            },
            &bp,
            self.opts.static_tol,
            self.opts.max_evals,
        );
        if !res.converged {
            return Err(Error::QuadratureFailure {
                what: "static noise integrals",
                error: res.max_error(),
                target: self.opts.static_tol.abs,
            });
        }
        let v = res.value;
        let a12 = Complex64::new(v[2], v[3]);
        self.a_static = [[v[0].into(), a12], [a12.conj(), v[1].into()]];
        self.p_static = [Complex64::new(v[4], v[5]), Complex64::new(v[6], v[7])];
        let c = self.amps;
        let mut i_inf = ZERO;
        for k in 0..2 {
            for l in 0..2 {
                i_inf += c[k] * c[l].conj() * self.a_static[k][l];
            }
        }
        self.i_inf = i_inf.re;
        let csum: f64 = c.iter().map(|z| z.norm()).sum();
        let d = self.tail_distance();
        self.static_error = res.max_error() * csum * csum + self.tail((csum / d).powi(2));
        Ok(())
    }

    /// `I(t)`, `I'(t)` and `N(t)`.
    pub fn noise(&self, t: f64) -> Result<NoiseState> {
        if !(t >= 0.0) {
            return Err(Error::Domain {
                quantity: "noise",
                value: t,
                reason: "time must be non-negative",
            });
        }
        if self.bath.spectral.gamma0 == 0.0 || t == 0.0 {
            return Ok(NoiseState {
                t,
                i_val: 0.0,
                i_dot: 0.0,
                n_coef: f64::NAN,
                error: 0.0,
            });
        }
        let (i_val, i_dot, error) = if self.opts.contour && t >= self.t_switch {
            if let Some(table) = &self.rays {
                self.noise_tabulated(table, t)
            } else {
                match self.noise_contour(t)? {
                    Some(v) => v,
                    None => self.noise_real_axis(t)?,
                }
            }
        } else {
            self.noise_real_axis(t)?
        };
        Ok(self.finish(t, i_val, i_dot, error))
    }

    fn finish(&self, t: f64, i_val: f64, i_dot: f64, error: f64) -> NoiseState {
        let s = green_at(t, &self.roots);
        let scale = self.roots.mu1.norm().max(self.bath.spectral.lambda);
        let n_coef = if s.flagged || !(s.gamma_t.abs() > 1e-12 * scale) {
            f64::NAN
        } else {
            i_val + i_dot / s.gamma_t
        };
        NoiseState {
            t,
            i_val,
            i_dot,
            n_coef,
            error,
        }
    }

    /// Direct quadrature of `w |F|^2` and `w 2 Re(conj(F) G e^{iwt})`.
    pub fn noise_real_axis(&self, t: f64) -> Result<(f64, f64, f64)> {
        let bath = self.bath;
        let roots = self.roots;
        let w0 = self.omega0();
        let mut bp = self.frequency_breaks();
        let spacing = (2.0 * PI / t).min(10.0);
        let n = (self.omega_max / spacing).ceil() as usize;
        bp.extend((1..n).map(|k| k as f64 * spacing));
        let bp = breakpoints(0.0, self.omega_max, bp);
        let res = integrate(
            |w| {
                let wt = noise_weight(w, &bath);
                let (f, d) = transform_and_drive(w - w0, t, &roots);
                [wt * f.norm_sqr(), 2.0 * wt * (f.conj() * d).re]
            },
            &bp,
            self.opts.tol,
            self.opts.max_evals,
        );
        if !res.converged {
            return Err(Error::QuadratureFailure {
                what: "noise integral",
                error: res.max_error(),
                target: self.opts.tol.abs.max(self.opts.tol.rel * res.value[0].abs()),
            });
        }
        let d = self.tail_distance();
        let fbound: f64 = if roots.confluent {
            t * (1.0 + roots.mu1.norm() * t)
        } else {
            self.amps.iter().map(|c| c.norm() * t.min(2.0 / d)).sum()
        };
        let tail = self.tail(fbound * fbound);
        Ok((res.value[0].max(0.0), res.value[1], res.error[0] + tail))
    }

    /// Closed-form parts of the long-time decomposition: the static sums
    /// and `sum_k c_k e^{mu_k t}`.
    fn static_parts(&self, t: f64) -> (Complex64, Complex64, Complex64) {
        let c = self.amps;
        let mus = self.roots.roots();
        let mut i_static = ZERO;
        let mut d_static = ZERO;
        for k in 0..2 {
            for l in 0..2 {
                let cc = c[k] * c[l].conj();
                let e = ((mus[k] + mus[l].conj()) * t).exp();
                i_static += cc * (1.0 + e) * self.a_static[k][l];
                d_static += cc * e * self.p_static[l];
            }
        }
        let drive = (0..2).map(|k| c[k] * (mus[k] * t).exp()).sum();
        (i_static, d_static, drive)
    }

    fn noise_tabulated(&self, table: &RayTable, t: f64) -> (f64, f64, f64) {
        let c = self.amps;
        let mus = self.roots.roots();
        let w0 = self.omega0();
        let s = 1.0 / t;
        let g = table.interpolate(s);
        let mut o1 = ZERO;
        let mut o2 = ZERO;
        for (r, &x) in table.ray_real.iter().enumerate() {
            let turn = Complex64::new(0.0, (x - w0) * t).exp() * s;
            let mut acc = ZERO;
            for k in 0..2 {
                acc += c[k] * (mus[k] * t).exp() * g[3 * r + k];
            }
            o1 += turn * acc;
            o2 += turn * g[3 * r + 2];
        }
        for (rate, coef) in &table.o1_terms {
            o1 += coef * (rate * t).exp();
        }
        for (rate, coef) in &table.o2_terms {
            o2 += coef * (rate * t).exp();
        }
        let (i_static, d_static, drive) = self.static_parts(t);
        let i_val = i_static.re - 2.0 * o1.re;
        let i_dot = 2.0 * d_static.re - 2.0 * (drive * o2).re;
        let csum: f64 = c.iter().map(|z| z.norm()).sum();
        let error = 2.0 * table.error * s * csum * csum + 2.0 * self.static_error;
        (i_val.max(0.0), i_dot, error)
    }

    /// Contour route; `None` when the geometry does not allow it.
    pub fn noise_contour(&self, t: f64) -> Result<Option<(f64, f64, f64)>> {
        let roots = self.roots;
        if roots.confluent || roots.is_free() || t <= 0.0 {
            return Ok(None);
        }
        let p = &self.bath.spectral;
        let temp = self.bath.temperature;
        let w0 = self.omega0();
        let mus = roots.roots();
        let c = self.amps;

        // Poles of conj-continued 1/conj(a_l) sit at w0 - i conj(mu_l).
        let vpoles: Vec<Complex64> = mus.iter().map(|m| w0 - I * m.conj()).collect();
        let ceiling = MATSUBARA_FRACTION * 2.0 * PI * temp;
        let mut height = None;
        for j in 0..9 {
            let y = RAY_DEPTH / t * (1.0 + 0.25 * j as f64);
            if y > ceiling {
                break;
            }
            let clear = vpoles
                .iter()
                .map(|z| z.im)
                .chain(std::iter::once(p.lambda))
                .all(|h| (h - y).abs() > 0.1 * y);
            if clear {
                height = Some(y);
                break;
            }
        }
        let Some(y_top) = height else { return Ok(None) };
        for z in &vpoles {
            if z.im < y_top && z.re < 2.0 * p.omega_m {
                return Ok(None);
            }
        }
        if w0 < 2.0 * p.omega_m {
            return Ok(None);
        }

        let growth: Vec<Complex64> = mus.iter().map(|m| (m * t).exp()).collect();
        let u_fn = |z: Complex64| -> Complex64 {
            (0..2).map(|k| c[k] * growth[k] / (mus[k] + I * (z - w0))).sum()
        };
        let v_fn = |z: Complex64| -> Complex64 {
            (0..2).map(|l| c[l].conj() / (mus[l].conj() - I * (z - w0))).sum()
        };
        let phase = |z: Complex64| (I * (z - w0) * t).exp();
        let slope = lorentzian_j(p.omega_m, p) / p.omega_m;
        let ramp = |z: Complex64| slope * z_planck_complex(z, temp);
        let full = |z: Complex64| lorentzian_j_complex(z, p) * planck_complex(z, temp);

        let u_top = y_top * t;
        let mut bp = vec![0.0, 1.0, 4.0, 12.0];
        bp.retain(|&u| u < u_top);
        bp.push(u_top);
        let res = integrate(
            |u| {
                let y = u / t;
                let z0 = Complex64::new(0.0, y);
                let zm = Complex64::new(p.omega_m, y);
                let h0 = ramp(z0) * phase(z0) * v_fn(z0);
                let hm = (full(zm) - ramp(zm)) * phase(zm) * v_fn(zm);
                let o1 = h0 * u_fn(z0) + hm * u_fn(zm);
                let o2 = h0 + hm;
                [o1.re, o1.im, o2.re, o2.im]
            },
            &bp,
            self.opts.tol,
            self.opts.max_evals,
        );
        if !res.converged {
            return Err(Error::QuadratureFailure {
                what: "noise contour integral",
                error: res.max_error(),
                target: self.opts.tol.abs,
            });
        }
        // dz = i dy = i du / t
        let scale = I / t;
        let mut o1 = scale * Complex64::new(res.value[0], res.value[1]);
        let mut o2 = scale * Complex64::new(res.value[2], res.value[3]);

        let z_l = Complex64::new(p.omega_c, p.lambda);
        if p.lambda < y_top {
            let k = 0.5 * p.gamma0 * p.lambda * planck_complex(z_l, temp) * phase(z_l) * v_fn(z_l);
            o1 += k * u_fn(z_l);
            o2 += k;
        }
        for (l, z) in vpoles.iter().enumerate() {
            if z.im < y_top {
                let k = -2.0 * PI * c[l].conj() * full(*z) * (mus[l].conj() * t).exp();
                o1 += k * u_fn(*z);
                o2 += k;
            }
        }

        let mut i_static = ZERO;
        let mut d_static = ZERO;
        for k in 0..2 {
            for l in 0..2 {
                let cc = c[k] * c[l].conj();
                let e = ((mus[k] + mus[l].conj()) * t).exp();
                i_static += cc * (1.0 + e) * self.a_static[k][l];
                d_static += cc * e * self.p_static[l];
            }
        }
        let drive: Complex64 = (0..2).map(|k| c[k] * growth[k]).sum();
        let i_val = i_static.re - 2.0 * o1.re;
        let i_dot = 2.0 * d_static.re - 2.0 * (drive * o2).re;
        let csum: f64 = c.iter().map(|z| z.norm()).sum();
        let error = 2.0 * res.max_error() / t * csum * csum + 2.0 * self.static_error;
        Ok(Some((i_val.max(0.0), i_dot, error)))
    }

    /// Occupation and its rate at `t` for initial occupation `n0`.
    pub fn occupation(&self, t: f64, n0: f64) -> Result<(f64, f64, NoiseState)> {
        let s = self.noise(t)?;
        let (g, gdot) = self.roots.green(t);
        let g2dot = 2.0 * (g.conj() * gdot).re;
        Ok((g.norm_sqr() * n0 + s.i_val, g2dot * n0 + s.i_dot, s))
    }
}

/// Long-time ray integrals tabulated in `s = 1/t`.
///
/// On the ray `z = x + iy` the oscillatory factor is `e^{i(x - w0)t} e^{-yt}`,
/// so each ray integral is an explicit phase times `s g(s)` with
/// `g(s) = i ∫ f(x + i s u) e^{-u} du` smooth on `[0, s_max]`. The `g` are
/// stored at Chebyshev nodes and evaluated by barycentric interpolation.
#[derive(Debug, Clone, PartialEq)]
struct RayTable {
    t_switch: f64,
    s_max: f64,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    /// Per node: for the rays at 0 and at omega_m, `[V/a_1, V/a_2, V]`.
    values: Vec<[Complex64; 6]>,
    ray_real: [f64; 2],
    /// Residue contributions `coef e^{rate t}`.
    o1_terms: Vec<(Complex64, Complex64)>,
    o2_terms: Vec<(Complex64, Complex64)>,
    error: f64,
}

impl RayTable {
    const MAX_NODES: usize = 513;

    fn build(sol: &PhaseSolution) -> Option<Self> {
        let roots = sol.roots;
        if roots.confluent || roots.is_free() {
            return None;
        }
        let p = &sol.bath.spectral;
        let temp = sol.bath.temperature;
        let w0 = sol.omega0();
        if w0 < 2.0 * p.omega_m {
            return None;
        }
        let mus = roots.roots();
        let c = sol.amps;
        let vpoles: Vec<Complex64> = mus.iter().map(|m| w0 - I * m.conj()).collect();
        let ceiling = MATSUBARA_FRACTION * 2.0 * PI * temp;
        let heights = || vpoles.iter().map(|z| z.im).chain(std::iter::once(p.lambda));
        let y0 = (0..12)
            .map(|j| ceiling * (1.0 - 0.06 * j as f64))
            .find(|&y| heights().all(|h| (h - y).abs() > 0.1 * y))?;
        for z in &vpoles {
            if z.im < y0 && z.re < 2.0 * p.omega_m {
                return None;
            }
        }

        let v_fn = |z: Complex64| -> Complex64 {
            (0..2).map(|l| c[l].conj() / (mus[l].conj() - I * (z - w0))).sum()
        };
        let a_fn = |k: usize, z: Complex64| mus[k] + I * (z - w0);
        let slope = lorentzian_j(p.omega_m, p) / p.omega_m;
        let ramp = |z: Complex64| slope * z_planck_complex(z, temp);
        let full = |z: Complex64| lorentzian_j_complex(z, p) * planck_complex(z, temp);

        let s_max = y0 / RAY_DEPTH;
        let tol = Tolerance::new(sol.opts.static_tol.abs * 1e-2, sol.opts.static_tol.rel);
        let evaluate = |s: f64| -> Option<[Complex64; 6]> {
            let mut out = [ZERO; 6];
            if s == 0.0 {
                let z0 = Complex64::new(0.0, 0.0);
                let zm = Complex64::new(p.omega_m, 0.0);
                for (r, (z, f)) in [(z0, ramp(z0)), (zm, full(zm) - ramp(zm))].into_iter().enumerate() {
                    let v = f * v_fn(z);
                    out[3 * r] = I * v / a_fn(0, z);
                    out[3 * r + 1] = I * v / a_fn(1, z);
                    out[3 * r + 2] = I * v;
                }
                return Some(out);
            }
            let u_top = (y0 / s).min(RAY_DEPTH + 10.0);
            let mut bp = vec![0.0, 1.0, 4.0, 12.0];
            bp.retain(|&u| u < u_top);
            bp.push(u_top);
            let res = integrate(
                |u| {
                    let y = s * u;
                    let damp = (-u).exp();
                    let mut v = [0.0; 12];
                    let z0 = Complex64::new(0.0, y);
                    let zm = Complex64::new(p.omega_m, y);
                    for (r, (z, f)) in [(z0, ramp(z0)), (zm, full(zm) - ramp(zm))].into_iter().enumerate() {
                        let h = damp * f * v_fn(z);
                        let parts = [h / a_fn(0, z), h / a_fn(1, z), h];
                        for (j, q) in parts.iter().enumerate() {
                            v[2 * (3 * r + j)] = q.re;
                            v[2 * (3 * r + j) + 1] = q.im;
                        }
                    }
                    v
                },
                &bp,
                tol,
                sol.opts.max_evals,
            );
            if !res.converged {
                return None;
            }
            for j in 0..6 {
                out[j] = I * Complex64::new(res.value[2 * j], res.value[2 * j + 1]);
            }
            Some(out)
        };

        // Chebyshev points of the second kind mapped onto [0, s_max].
        let node = |j: usize, m: usize| 0.5 * s_max * (1.0 - (PI * j as f64 / m as f64).cos());
        let mut m = 16;
        let mut values: Vec<[Complex64; 6]> = (0..=m).map(|j| evaluate(node(j, m))).collect::<Option<_>>()?;
        loop {
            let nodes: Vec<f64> = (0..=m).map(|j| node(j, m)).collect();
            let weights = bary_weights(m);
            let m2 = 2 * m;
            let mut refined = Vec::with_capacity(m2 + 1);
            let mut err: f64 = 0.0;
            let mut scale: f64 = 0.0;
            for j in 0..=m2 {
                if j % 2 == 0 {
                    refined.push(values[j / 2]);
                } else {
                    let s = node(j, m2);
                    let exact = evaluate(s)?;
                    let approx = barycentric(&nodes, &weights, &values, s);
                    for q in 0..6 {
                        err = err.max((exact[q] - approx[q]).norm());
                        scale = scale.max(exact[q].norm());
                    }
                    refined.push(exact);
                }
            }
            values = refined;
            m = m2;
            let converged = err <= 1e-10 * scale.max(1e-300) || err < 1e-15;
            if converged || m + 1 >= Self::MAX_NODES {
                if !converged {
                    log::debug!("ray table stopped at {m} nodes with error {err:e}");
                    return None;
                }
                let mut table = Self {
                    t_switch: RAY_DEPTH / y0,
                    s_max,
                    nodes: (0..=m).map(|j| node(j, m)).collect(),
                    weights: bary_weights(m),
                    values,
                    ray_real: [0.0, p.omega_m],
                    o1_terms: Vec::new(),
                    o2_terms: Vec::new(),
                    error: err,
                };
                let z_l = Complex64::new(p.omega_c, p.lambda);
                if p.lambda < y0 {
                    let k_l = 0.5 * p.gamma0 * p.lambda * planck_complex(z_l, temp) * v_fn(z_l);
                    let shift = I * (z_l - w0);
                    for k in 0..2 {
                        table.o1_terms.push((mus[k] + shift, k_l * c[k] / a_fn(k, z_l)));
                    }
                    table.o2_terms.push((shift, k_l));
                }
                for (l, z) in vpoles.iter().enumerate() {
                    if z.im < y0 {
                        let w_l = -2.0 * PI * c[l].conj() * full(*z);
                        for k in 0..2 {
                            let rate = mus[k] + mus[l].conj();
                            table.o1_terms.push((rate, w_l * c[k] / rate));
                        }
                        table.o2_terms.push((mus[l].conj(), w_l));
                    }
                }
                return Some(table);
            }
        }
    }

    fn interpolate(&self, s: f64) -> [Complex64; 6] {
        barycentric(&self.nodes, &self.weights, &self.values, s.clamp(0.0, self.s_max))
    }
}

fn bary_weights(m: usize) -> Vec<f64> {
    (0..=m)
        .map(|j| {
            let w = if j % 2 == 0 { 1.0 } else { -1.0 };
            if j == 0 || j == m {
                0.5 * w
            } else {
                w
            }
        })
        .collect()
}

fn barycentric(nodes: &[f64], weights: &[f64], values: &[[Complex64; 6]], s: f64) -> [Complex64; 6] {
    let mut num = [ZERO; 6];
    let mut den = 0.0;
    for ((&x, &w), v) in nodes.iter().zip(weights).zip(values) {
        let d = s - x;
        if d == 0.0 {
            return *v;
        }
        let q = w / d;
        den += q;
        for j in 0..6 {
            num[j] += q * v[j];
        }
    }
    num.map(|z| z / den)
}

/// `I(t)`, `I'(t)` and `N(t)` for one bath at one instant.
pub fn noise_at(t: f64, r: &RootPair, bath: &BathSpec) -> Result<NoiseState> {
    if r.omega0 <= 0.0 {
        return Err(Error::invalid("omega0", "must be > 0"));
    }
    PhaseSolution::new(r.omega0, bath)?.noise(t)
}

/// Sample flags in trajectory exports.
pub const FLAG_GREEN_ZERO: u32 = 1;
pub const FLAG_NO_GAMMA: u32 = 2;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectorySample {
    pub t: f64,
    pub g: Complex64,
    pub omega_r: f64,
    pub gamma: f64,
    pub omega_r_dot: f64,
    pub i_val: f64,
    pub i_dot: f64,
    pub n: f64,
    pub n_dot: f64,
    pub n_coef: f64,
    pub flags: u32,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvolveOptions {
    pub noise: NoiseOptions,
    /// Convergence threshold on `|G|^2`.
    pub eps_green: f64,
    /// Relative steadiness threshold over the trailing window.
    pub eps_steady: f64,
    /// Trailing window in units of `1/lambda`.
    pub window_lambda: f64,
    /// `t_max` in units of the slowest relaxation time.
    pub t_max_factor: f64,
    /// Samples per relaxation time.
    pub density: f64,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        Self {
            noise: NoiseOptions::default(),
            eps_green: 1e-10,
            eps_steady: 1e-8,
            window_lambda: 5.0,
            t_max_factor: 50.0,
            density: 20.0,
        }
    }
}

/// Sampled evolution of one bath-coupled phase.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub phase: PhaseSolution,
    pub n0: f64,
    pub samples: Vec<TrajectorySample>,
    pub converged_at: Option<f64>,
    pub n_inf: f64,
    pub omega_r_inf: f64,
}

impl Trajectory {
    pub fn omega0(&self) -> f64 {
        self.phase.omega0()
    }

    pub fn bath(&self) -> &BathSpec {
        &self.phase.bath
    }

    pub const CSV_HEADER: &'static str =
        "t,re_G,im_G,omega_r,gamma,omega_r_dot,I,I_dot,n,n_dot,flags";

    pub fn write_csv<W: Write>(&self, out: &mut W) -> io::Result<()> {
        writeln!(out, "{}", Self::CSV_HEADER)?;
        for s in &self.samples {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{}",
                s.t, s.g.re, s.g.im, s.omega_r, s.gamma, s.omega_r_dot, s.i_val, s.i_dot, s.n, s.n_dot, s.flags
            )?;
        }
        Ok(())
    }
}

/// Sample one phase at `t`.
pub fn sample_phase(phase: &PhaseSolution, n0: f64, t: f64) -> Result<TrajectorySample> {
    let gs = green_at(t, &phase.roots);
    let (n, n_dot, ns) = phase.occupation(t, n0)?;
    let mut flags = 0;
    if gs.flagged {
        flags |= FLAG_GREEN_ZERO;
    }
    if !ns.n_coef.is_finite() {
        flags |= FLAG_NO_GAMMA;
    }
    Ok(TrajectorySample {
        t,
        g: gs.g,
        omega_r: gs.omega_r,
        gamma: gs.gamma_t,
        omega_r_dot: gs.omega_r_dot,
        i_val: ns.i_val,
        i_dot: ns.i_dot,
        n,
        n_dot,
        n_coef: ns.n_coef,
        flags,
    })
}

pub fn evolve_phase(omega0: f64, bath: &BathSpec, n0: f64) -> Result<Trajectory> {
    evolve_phase_with(omega0, bath, n0, &EvolveOptions::default())
}

/// Samples a phase from `t = 0` until the mode has forgotten its initial
/// state and `omega_r`, `n` are steady over the trailing window.
///
/// The grid is geometric near `t = 0`, uniform at `1/lambda`-scale spacing
/// while `omega_r` relaxes, then uniform at the occupation relaxation scale.
pub fn evolve_phase_with(
    omega0: f64,
    bath: &BathSpec,
    n0: f64,
    opts: &EvolveOptions,
) -> Result<Trajectory> {
    if !(n0 >= 0.0 && n0.is_finite()) {
        return Err(Error::invalid("n0", format!("must be >= 0, got {n0}")));
    }
    let phase = PhaseSolution::with_options(omega0, bath, opts.noise)?;
    let roots = phase.roots;
    let p = &bath.spectral;
    let lambda = p.lambda;

    let kappa = crate::green::frequency_relaxation_rate(&roots);
    let tau_omega = 1.0 / kappa.max(lambda);
    let gamma_inf = crate::green::steady_gamma(&roots);
    let gamma_m = markov_rate(omega0, p);
    let mut slow = gamma_inf.min(gamma_m);
    if kappa > 0.0 && !roots.is_balanced() {
        // omega_r can settle long after |G|^2 has decayed.
        slow = slow.min(kappa);
    }
    let free = roots.is_free() || !(slow > 0.0);
    let t_max = if free {
        opts.t_max_factor / lambda
    } else {
        opts.t_max_factor / slow
    };
    let tau_n = if free { t_max } else { 1.0 / gamma_inf };
    let h1 = tau_omega.min(tau_n) / opts.density;
    let h2 = (tau_n / opts.density).max(h1);
    let t_fast = (30.0 * tau_omega).min(t_max);
    let window = opts.window_lambda / lambda;

    let mut times: Vec<f64> = vec![0.0];
    times.extend((1..=10).rev().map(|k| h1 * 0.5f64.powi(k)));
    let mut samples = Vec::new();
    for &t in &times {
        samples.push(sample_phase(&phase, n0, t)?);
    }
    let mut t = h1;
    let mut converged_at = None;
    let mut idx_window = 0usize;
    loop {
        samples.push(sample_phase(&phase, n0, t)?);
        let last = *samples.last().unwrap();
        if !free && last.g.norm_sqr() < opts.eps_green && t >= window {
            while samples[idx_window].t < t - window {
                idx_window += 1;
            }
            let tail = &samples[idx_window..];
            let steady = |f: &dyn Fn(&TrajectorySample) -> f64| {
                let (lo, hi) = tail.iter().map(f).filter(|v| v.is_finite()).fold(
                    (f64::INFINITY, f64::NEG_INFINITY),
                    |(lo, hi), v| (lo.min(v), hi.max(v)),
                );
                let refv = f(&last).abs().max(1e-300);
                (hi - lo) / refv < opts.eps_steady
            };
            if steady(&|s| s.n) && (roots.is_balanced() || steady(&|s| s.omega_r)) {
                converged_at = Some(t);
                break;
            }
        }
        if t >= t_max {
            break;
        }
        let h = if t < t_fast { h1 } else { h2 };
        t = (t + h).min(t_max);
    }
    if converged_at.is_none() && !free {
        return Err(Error::NoConvergence { t_max });
    }
    let last = samples.last().unwrap();
    Ok(Trajectory {
        omega_r_inf: crate::green::steady_omega_r(&roots)?,
        n_inf: last.n,
        phase,
        n0,
        samples,
        converged_at,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{planck_occupation, SpectralParams};

    fn bath(gamma0: f64, lambda: f64, omega_c: f64, temp: f64) -> BathSpec {
        BathSpec::new(temp, SpectralParams::lorentzian(gamma0, lambda, omega_c).unwrap()).unwrap()
    }

    fn roots(omega0: f64, b: &BathSpec) -> RootPair {
        RootPair::new(omega0, &b.spectral).unwrap()
    }

    #[test]
    fn transform_examples() {
        let b = bath(0.0, 0.2, 15.0, 20.0);
        let r = roots(16.0, &b);
        assert_eq!(f_transform(3.0, 0.0, &r), ZERO);
        assert!((f_transform(16.0, 2.5, &r) - 2.5).norm() < 1e-15);
        let x: f64 = 0.7;
        let t = 3.0;
        let expect = ((I * x * t).exp() - 1.0) / (I * x);
        assert!((f_transform(16.0 + x, t, &r) - expect).norm() < 1e-14);
    }

    #[test]
    fn transform_matches_time_quadrature() {
        for (g0, l, wc) in [(1.0, 0.2, 15.0), (0.1, 0.2, 15.0), (3.0, 1.0, 15.5)] {
            let b = bath(g0, l, wc, 20.0);
            let r = roots(15.0, &b);
            for (w, t) in [(15.0, 2.0), (14.3, 5.0), (40.0, 1.5)] {
                let q = integrate(
                    |s| {
                        let v = r.green(s).0 * Complex64::new(0.0, w * s).exp();
                        [v.re, v.im]
                    },
                    &breakpoints(0.0, t, (1..50).map(|k| k as f64 * t / 50.0)),
                    Tolerance::new(1e-14, 1e-13),
                    100_000,
                );
                let f = f_transform(w, t, &r);
                assert!((f - Complex64::new(q.value[0], q.value[1])).norm() < 1e-11);
            }
        }
    }

    #[test]
    fn weight_is_continuous() {
        let b = bath(1.0, 0.2, 15.0, 20.0);
        let wm = b.spectral.omega_m;
        assert!((noise_weight(wm * (1.0 - 1e-12), &b) - noise_weight(wm * (1.0 + 1e-12), &b)).abs() < 1e-12);
        let slope = lorentzian_j(wm, &b.spectral) / wm;
        assert!((noise_weight(0.0, &b) - slope * 20.0).abs() < 1e-15);
        assert!((noise_weight(1e-9, &b) - slope * 20.0).abs() < 1e-12);
    }

    #[test]
    fn initial_and_free_values() {
        let b = bath(1.0, 0.2, 15.0, 20.0);
        let s = noise_at(0.0, &roots(16.0, &b), &b).unwrap();
        assert_eq!((s.i_val, s.i_dot), (0.0, 0.0));
        let free = bath(0.0, 0.2, 15.0, 20.0);
        let s = noise_at(10.0, &roots(16.0, &free), &free).unwrap();
        assert_eq!((s.i_val, s.i_dot), (0.0, 0.0));
    }

    #[test]
    fn cold_bath_gives_no_noise() {
        // Only the low-frequency ramp stays populated, so I vanishes roughly like T^2.
        for t in [0.5, 5.0, 50.0] {
            let at = |temp: f64| {
                let b = bath(1.0, 0.2, 15.0, temp);
                noise_at(t, &roots(16.0, &b), &b).unwrap().i_val
            };
            let (hot, cold) = (at(0.05), at(0.005));
            assert!(hot < 1e-6 && cold < 1e-8, "t={t} I={hot}, {cold}");
            assert!(hot / cold > 50.0, "t={t} ratio {}", hot / cold);
        }
    }

    #[test]
    fn contour_matches_real_axis() {
        for (g0, l, wc, w0, temp) in [
            (1.0, 0.2, 15.0, 16.0, 20.0),
            (10.0, 0.2, 15.0, 14.0, 15.0),
            (5.0, 1.0, 15.0, 16.0, 20.0),
            (0.1, 0.2, 12.0, 16.0, 20.0),
        ] {
            let b = bath(g0, l, wc, temp);
            let ph = PhaseSolution::new(w0, &b).unwrap();
            for t in [2.0, 5.0, 10.0] {
                let (ia, da, _) = ph.noise_real_axis(t).unwrap();
                let (ic, dc, _) = ph.noise_contour(t).unwrap().expect("contour route");
                assert!((ia - ic).abs() < 1e-8 * ia.abs().max(1.0), "I {ia} vs {ic} at t={t}");
                assert!((da - dc).abs() < 1e-8 * da.abs().max(1.0), "I' {da} vs {dc} at t={t}");
            }
        }
    }

    #[test]
    fn tabulated_rays_match_direct_routes() {
        for (g0, l, wc, w0, temp) in [
            (1.0, 0.2, 15.0, 16.0, 20.0),
            (10.0, 0.2, 15.0, 14.0, 15.0),
            (5.0, 1.0, 15.0, 16.0, 20.0),
            (0.1, 0.2, 12.0, 16.0, 20.0),
        ] {
            let b = bath(g0, l, wc, temp);
            let ph = PhaseSolution::new(w0, &b).unwrap();
            let table = ph.rays.as_ref().expect("ray table");
            let t0 = ph.t_switch();
            for t in [t0, 1.3 * t0, 3.0 * t0, 10.0, 40.0, 200.0] {
                if t < t0 {
                    continue;
                }
                let (ia, da, _) = ph.noise_real_axis(t).unwrap();
                let (it, dt, _) = ph.noise_tabulated(table, t);
                assert!((ia - it).abs() < 1e-8 * ia.abs().max(1.0), "I {ia} vs {it} at t={t}");
                assert!((da - dt).abs() < 1e-8 * da.abs().max(1.0), "I' {da} vs {dt} at t={t}");
            }
        }
    }

    #[test]
    fn derivative_matches_finite_differences() {
        for (g0, l, wc, w0) in [(1.0, 0.2, 15.0, 16.0), (10.0, 0.2, 15.0, 14.0)] {
            let b = bath(g0, l, wc, 20.0);
            let ph = PhaseSolution::new(w0, &b).unwrap();
            let h = 1e-4 / l;
            for t in [0.3, 1.0, 3.0, 12.0, 40.0] {
                let c = ph.noise(t).unwrap();
                let fd = (ph.noise(t + h).unwrap().i_val - ph.noise(t - h).unwrap().i_val) / (2.0 * h);
                assert!((fd - c.i_dot).abs() <= 1e-4 * c.i_dot.abs().max(1e-3), "t={t} fd={fd} exact={}", c.i_dot);
            }
        }
    }

    #[test]
    fn late_noise_reaches_steady_value() {
        let b = bath(1.0, 0.2, 15.0, 20.0);
        let ph = PhaseSolution::new(16.0, &b).unwrap();
        let s = ph.noise(2000.0).unwrap();
        assert!((s.i_val - ph.i_inf).abs() < 1e-9 * ph.i_inf);
        assert!(s.i_dot.abs() < 1e-10);
    }

    #[test]
    fn noise_is_nonnegative() {
        let b = bath(10.0, 0.2, 15.0, 15.0);
        let ph = PhaseSolution::new(14.0, &b).unwrap();
        for k in 0..200 {
            let t = k as f64 * 0.37;
            assert!(ph.noise(t).unwrap().i_val >= 0.0);
        }
    }

    #[test]
    fn weak_coupling_n_coefficient_tends_to_planck() {
        let b = bath(0.01, 0.2, 15.0, 20.0);
        let ph = PhaseSolution::new(16.0, &b).unwrap();
        let nm = planck_occupation(16.0, 20.0).unwrap();
        let gm = markov_rate(16.0, &b.spectral);
        let s = ph.noise(3.0 / gm).unwrap();
        assert!((s.n_coef - nm).abs() < 0.05 * nm, "N={} vs {nm}", s.n_coef);
    }

    #[test]
    fn trajectory_contract() {
        let b = bath(1.0, 0.2, 15.0, 20.0);
        let tr = evolve_phase(16.0, &b, 0.648).unwrap();
        let first = tr.samples[0];
        assert_eq!(first.t, 0.0);
        assert_eq!(first.g, Complex64::new(1.0, 0.0));
        assert_eq!(first.gamma, 0.0);
        assert_eq!(first.i_val, 0.0);
        let tc = tr.converged_at.unwrap();
        assert!(tr.samples.last().unwrap().g.norm_sqr() < 1e-10);
        assert!((tr.n_inf - tr.phase.i_inf).abs() < 1e-8);
        for s in &tr.samples {
            assert!(s.n >= 0.0 && s.i_val >= 0.0);
            assert!((s.n - (s.g.norm_sqr() * 0.648 + s.i_val)).abs() < 1e-14);
            assert!(s.t <= tc);
        }
        for w in tr.samples.windows(2) {
            assert!(w[1].t > w[0].t);
        }
    }

    #[test]
    fn decoupled_trajectory_keeps_occupation() {
        let b = bath(0.0, 0.2, 15.0, 20.0);
        let tr = evolve_phase(16.0, &b, 1.7).unwrap();
        assert!(tr.converged_at.is_none());
        for s in &tr.samples {
            assert!((s.n - 1.7).abs() < 1e-12);
        }
    }

    #[test]
    fn csv_columns() {
        let b = bath(1.0, 0.2, 15.0, 20.0);
        let tr = evolve_phase(16.0, &b, 0.0).unwrap();
        let mut buf = Vec::new();
        tr.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), Trajectory::CSV_HEADER);
        let row: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(row.len(), 11);
        assert_eq!(row[1], "1");
        assert_eq!(row[2], "0");
    }
}
