//! Moment-equation oracle for the time-local master equation.
//!
//! The generator with `Omega = omega_r`, `d2 = gamma N`, `d1 = d2 + gamma`
//! and no drive or squeezing term yields closed linear equations for
//! `<a>`, `<aa>` and `<a^dag a>`. Integrating them numerically must reproduce
//! the moments obtained directly from the Green function and the noise
//! integral.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::green::{green_at, steady_gamma};
use crate::noise::{sample_phase, PhaseSolution, Trajectory};
use crate::spectral::{markov_rate, BathSpec};

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Normalized `|G|` below which a window counts as containing a zero.
pub const ZERO_ENVELOPE: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentState {
    pub t: f64,
    pub a_mean: Complex64,
    pub aa_mean: Complex64,
    pub n_mean: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnsatzCoefficients {
    pub omega_eff: f64,
    pub drive: Complex64,
    pub d1: f64,
    pub d2: f64,
    pub d3: Complex64,
}

impl AnsatzCoefficients {
    /// Net decay rate `d1 - d2`.
    pub fn gamma(&self) -> f64 {
        self.d1 - self.d2
    }

    pub fn constant(omega_eff: f64, gamma: f64, n: f64) -> Self {
        Self {
            omega_eff,
            drive: Complex64::new(0.0, 0.0),
            d1: gamma * (n + 1.0),
            d2: gamma * n,
            d3: Complex64::new(0.0, 0.0),
        }
    }
}

/// Coefficients of the phase at `t`, evaluated from the exact solution.
///
/// `d2` is formed as `gamma I + I'`, which equals `gamma N` wherever `N`
/// exists and stays finite where `gamma` vanishes.
pub fn phase_coefficients(phase: &PhaseSolution, t: f64) -> Result<AnsatzCoefficients> {
    let s = sample_phase(phase, 0.0, t)?;
    if s.flags & crate::noise::FLAG_GREEN_ZERO != 0 {
        return Err(Error::SingularGamma { t, gamma: s.gamma });
    }
    let d2 = s.gamma * s.i_val + s.i_dot;
    Ok(AnsatzCoefficients {
        omega_eff: s.omega_r,
        drive: Complex64::new(0.0, 0.0),
        d1: d2 + s.gamma,
        d2,
        d3: Complex64::new(0.0, 0.0),
    })
}

pub fn coefficients_at(t: f64, traj: &Trajectory) -> Result<AnsatzCoefficients> {
    phase_coefficients(&traj.phase, t)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    /// Rotating-frame frequency removed from `<a>` and `<aa>` before stepping.
    pub frame: f64,
    pub max_steps: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        Self {
            rtol: 1e-9,
            atol: 1e-12,
            frame: 0.0,
            max_steps: 1_000_000,
        }
    }
}

// Dormand-Prince 5(4) tableau.
const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B_ERR: [f64; 7] = [
    35.0 / 384.0 - 5179.0 / 57600.0,
    0.0,
    500.0 / 1113.0 - 7571.0 / 16695.0,
    125.0 / 192.0 - 393.0 / 640.0,
    -2187.0 / 6784.0 + 92097.0 / 339200.0,
    11.0 / 84.0 - 187.0 / 2100.0,
    -1.0 / 40.0,
];

type State = [f64; 5];

fn pack(m: &MomentState, frame: f64) -> State {
    let a = m.a_mean * Complex64::new(0.0, frame * m.t).exp();
    let aa = m.aa_mean * Complex64::new(0.0, 2.0 * frame * m.t).exp();
    [a.re, a.im, aa.re, aa.im, m.n_mean]
}

fn unpack(t: f64, y: &State, frame: f64) -> MomentState {
    let a = Complex64::new(y[0], y[1]) * Complex64::new(0.0, -frame * t).exp();
    let aa = Complex64::new(y[2], y[3]) * Complex64::new(0.0, -2.0 * frame * t).exp();
    MomentState {
        t,
        a_mean: a,
        aa_mean: aa,
        n_mean: y[4],
    }
}

fn rhs(c: &AnsatzCoefficients, frame: f64, y: &State) -> State {
    let g = c.gamma();
    let a = Complex64::new(y[0], y[1]);
    let aa = Complex64::new(y[2], y[3]);
    let da = (-I * (c.omega_eff - frame) - 0.5 * g) * a - c.drive;
    let daa = (-2.0 * I * (c.omega_eff - frame) - g) * aa - c.d3;
    [da.re, da.im, daa.re, daa.im, -g * y[4] + c.d2]
}

/// Integrates the moment equations and reports the state at each of
/// `times` (ascending, starting at or after `init.t`).
pub fn integrate_moments<F>(
    coeffs: F,
    init: MomentState,
    times: &[f64],
    opts: &OdeOptions,
) -> Result<Vec<MomentState>>
where
    F: Fn(f64) -> Result<AnsatzCoefficients>,
{
    let frame = opts.frame;
    let f = |t: f64, y: &State| -> Result<State> { Ok(rhs(&coeffs(t)?, frame, y)) };
    let mut t = init.t;
    let mut y = pack(&init, frame);
    let mut k0 = f(t, &y)?;
    let mut h = 1e-3;
    let mut steps = 0;
    let mut out = Vec::with_capacity(times.len());
    for &target in times {
        if target < t {
            return Err(Error::invalid("times", "must be ascending and start at init.t"));
        }
        while t < target {
            let last = target - t <= h;
            let step = if last { target - t } else { h };
            let mut k = [[0.0; 5]; 7];
            k[0] = k0;
            for s in 1..7 {
                let mut ys = y;
                for (j, kj) in k.iter().enumerate().take(s) {
                    for q in 0..5 {
                        ys[q] += step * A[s][j] * kj[q];
                    }
                }
                k[s] = f(t + C[s] * step, &ys)?;
            }
            let mut y_new = y;
            for (j, kj) in k.iter().enumerate().take(6) {
                for q in 0..5 {
                    y_new[q] += step * A[6][j] * kj[q];
                }
            }
            let mut err: f64 = 0.0;
            for q in 0..5 {
                let e: f64 = (0..7).map(|j| B_ERR[j] * k[j][q]).sum::<f64>() * step;
                let sc = opts.atol + opts.rtol * y[q].abs().max(y_new[q].abs());
                err = err.max((e / sc).abs());
            }
            steps += 1;
            if err <= 1.0 {
                t = if last { target } else { t + step };
                y = y_new;
                k0 = k[6];
            }
            let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
            if !(last && err <= 1.0) {
                h = step * factor;
            }
            if h < 1e-14 * t.abs().max(1.0) || steps > opts.max_steps {
                return Err(Error::StepCollapse { t, h });
            }
        }
        out.push(unpack(t, &y, frame));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleReport {
    pub t_end: f64,
    pub points: usize,
    pub max_a: f64,
    pub max_aa: f64,
    pub max_n: f64,
    /// The window contains a Green-function zero; the report is informative only.
    pub flagged: bool,
}

impl OracleReport {
    pub fn max_discrepancy(&self) -> f64 {
        self.max_a.max(self.max_aa).max(self.max_n)
    }

    pub fn passes(&self, threshold: f64) -> bool {
        self.flagged || self.max_discrepancy() <= threshold
    }
}

/// Grid length and horizon: `points` samples on `[0, horizon / gamma_M]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleGrid {
    pub points: usize,
    pub horizon: f64,
}

impl Default for OracleGrid {
    fn default() -> Self {
        Self {
            points: 200,
            horizon: 10.0,
        }
    }
}

/// Compares the moment ODE against `G <a>_0`, `G^2 <aa>_0` and
/// `|G|^2 n0 + I` on a uniform grid.
pub fn oracle_report(
    omega0: f64,
    bath: &BathSpec,
    init: MomentState,
    grid: OracleGrid,
) -> Result<OracleReport> {
    if grid.points < 2 {
        return Err(Error::invalid("points", "need at least 2"));
    }
    let phase = PhaseSolution::new(omega0, bath)?;
    let rate = markov_rate(omega0, &bath.spectral);
    let t_end = if rate > 0.0 {
        grid.horizon / rate
    } else {
        grid.horizon / bath.spectral.lambda
    };
    let times: Vec<f64> = (0..grid.points)
        .map(|j| t_end * j as f64 / (grid.points - 1) as f64)
        .collect();
    let init = MomentState { t: 0.0, ..init };
    let flagged = !phase.roots.near_zeros(t_end, ZERO_ENVELOPE).is_empty();
    let opts = OdeOptions {
        frame: omega0,
        ..OdeOptions::default()
    };
    let coeffs = |t: f64| phase_coefficients(&phase, t);
    let states = match integrate_moments(coeffs, init, &times, &opts) {
        Ok(s) => s,
        Err(e) if flagged => {
            log::warn!("oracle integration stopped at a Green-function zero: {e}");
            return Ok(OracleReport {
                t_end,
                points: grid.points,
                max_a: f64::NAN,
                max_aa: f64::NAN,
                max_n: f64::NAN,
                flagged,
            });
        }
        Err(e) => return Err(e),
    };
    let mut report = OracleReport {
        t_end,
        points: grid.points,
        max_a: 0.0,
        max_aa: 0.0,
        max_n: 0.0,
        flagged,
    };
    for s in &states {
        let g = green_at(s.t, &phase.roots).g;
        let i_val = phase.noise(s.t)?.i_val;
        report.max_a = report.max_a.max((s.a_mean - g * init.a_mean).norm());
        report.max_aa = report.max_aa.max((s.aa_mean - g * g * init.aa_mean).norm());
        report.max_n = report.max_n.max((s.n_mean - (g.norm_sqr() * init.n_mean + i_val)).abs());
    }
    Ok(report)
}

/// Steady occupation reached by the moment ODE from `n0`, integrated until
/// `|G|^2` has decayed below `1e-16`.
pub fn ode_steady_occupation(omega0: f64, bath: &BathSpec, n0: f64) -> Result<f64> {
    let phase = PhaseSolution::new(omega0, bath)?;
    let rate = steady_gamma(&phase.roots);
    if !(rate > 0.0) {
        return Err(Error::NoConvergence { t_max: f64::INFINITY });
    }
    let t_end = 40.0 / rate;
    let init = MomentState {
        t: 0.0,
        a_mean: Complex64::new(0.0, 0.0),
        aa_mean: Complex64::new(0.0, 0.0),
        n_mean: n0,
    };
    let opts = OdeOptions {
        frame: omega0,
        ..OdeOptions::default()
    };
    let out = integrate_moments(|t| phase_coefficients(&phase, t), init, &[t_end], &opts)?;
    Ok(out[0].n_mean)
}
