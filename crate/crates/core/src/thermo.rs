//! Four-stroke Otto cycle on the renormalized oscillator.
//!
//! Strokes I and III are instantaneous frequency switches at fixed
//! occupation; strokes II and IV couple the mode to the hot and cold bath
//! until it relaxes to its steady state. Work on the system is positive;
//! `W_out = -(W_I + W_II + W_III + W_IV)`.

use std::fmt;

use crate::error::{Error, Result};
use crate::green::{frequency_relaxation_rate, steady_gamma, steady_omega_r};
use crate::noise::{PhaseSolution, Trajectory};
use crate::quad::{breakpoints, integrate, Tolerance};
use crate::spectral::{planck_occupation, BathSpec, SpectralParams};

/// `|x|` below which a sign is reported as a boundary case.
pub const BOUNDARY_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CycleSpec {
    pub omega1: f64,
    pub omega2: f64,
    pub cold: BathSpec,
    pub hot: BathSpec,
}

impl CycleSpec {
    /// Both baths share `spectral`.
    pub fn new(omega1: f64, omega2: f64, t1: f64, t2: f64, spectral: SpectralParams) -> Result<Self> {
        Self::with_baths(
            omega1,
            omega2,
            BathSpec::new(t1, spectral)?,
            BathSpec::new(t2, spectral)?,
        )
    }

    pub fn with_baths(omega1: f64, omega2: f64, cold: BathSpec, hot: BathSpec) -> Result<Self> {
        if !(omega1 > 0.0 && omega1.is_finite()) {
            return Err(Error::invalid("omega1", format!("must be > 0, got {omega1}")));
        }
        if !(omega2 > omega1 && omega2.is_finite()) {
            return Err(Error::invalid(
                "omega2",
                format!("must exceed omega1 = {omega1}, got {omega2}"),
            ));
        }
        if cold.temperature >= hot.temperature {
            log::warn!(
                "cold bath ({}) is not colder than hot bath ({})",
                cold.temperature,
                hot.temperature
            );
        }
        Ok(Self {
            omega1,
            omega2,
            cold,
            hot,
        })
    }

    pub fn t1(&self) -> f64 {
        self.cold.temperature
    }

    pub fn t2(&self) -> f64 {
        self.hot.temperature
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Mode {
    HeatEngine,
    Refrigerator,
    Heater,
    Anomalous,
}

impl Mode {
    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::HeatEngine => "engine",
            Mode::Refrigerator => "refrigerator",
            Mode::Heater => "heater",
            Mode::Anomalous => "anomalous",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Classification {
    pub mode: Mode,
    /// One of the inputs was within [`BOUNDARY_EPS`] of zero.
    pub boundary: bool,
}

/// Sign pattern of `(W_out, Q_H)`; zero counts as positive.
pub fn classify_mode(w_out: f64, q_h: f64) -> Classification {
    let mode = match (w_out >= 0.0, q_h >= 0.0) {
        (true, true) => Mode::HeatEngine,
        (false, false) => Mode::Refrigerator,
        (false, true) => Mode::Heater,
        (true, false) => Mode::Anomalous,
    };
    Classification {
        mode,
        boundary: w_out.abs() < BOUNDARY_EPS || q_h.abs() < BOUNDARY_EPS,
    }
}

/// `W_out / Q_H` when both are positive, otherwise 0.
pub fn efficiency(w_out: f64, q_h: f64) -> f64 {
    if w_out > 0.0 && q_h > 0.0 {
        w_out / q_h
    } else {
        0.0
    }
}

/// `1 - omega1_r/omega2_r`, or 0 when the frequencies are out of order.
pub fn renormalized_efficiency(omega1_r: f64, omega2_r: f64) -> f64 {
    if omega1_r > 0.0 && omega2_r > omega1_r {
        1.0 - omega1_r / omega2_r
    } else {
        0.0
    }
}

/// `gamma0 lambda / (lambda^2 + Delta^2)`; small values mean `omega_r`
/// settles long before `n` does.
pub fn validity_margin(omega0: f64, p: &SpectralParams) -> f64 {
    let d = omega0 - p.omega_c;
    p.gamma0 * p.lambda / (p.lambda * p.lambda + d * d)
}

pub fn stroke_work_i(n1: f64, omega1_r: f64, omega2: f64) -> f64 {
    (omega2 - omega1_r) * n1
}

pub fn stroke_work_iii(n2: f64, omega2_r: f64, omega1: f64) -> f64 {
    (omega1 - omega2_r) * n2
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CycleDiagnostics {
    pub q_h_first_law: f64,
    /// `|Q_H(direct) - Q_H(first law)| / |Q_H|`.
    pub q_h_discrepancy: f64,
    pub q_c_first_law: f64,
    /// `W_out - Q_H - Q_C` with both heats from direct quadrature.
    pub bookkeeping_residual: f64,
    pub error_w2: f64,
    pub error_w4: f64,
    pub error_q_h: f64,
    pub error_q_c: f64,
    /// Integration windows of the two bath strokes.
    pub window_hot: f64,
    pub window_cold: f64,
    /// Larger validity margin of the two strokes.
    pub validity_margin: f64,
    /// A stroke had balanced roots, zero crossings of `G`, or a truncated window.
    pub flagged: bool,
    pub boundary: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StrokeLedger {
    pub w1: f64,
    pub w2: f64,
    pub w3: f64,
    pub w4: f64,
    pub q_h: f64,
    pub q_c: f64,
    pub du2: f64,
    pub n1: f64,
    pub n2: f64,
    pub omega1_r: f64,
    pub omega2_r: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CycleResult {
    pub w_out: f64,
    pub q_h: f64,
    pub eta: f64,
    pub eta_r: f64,
    pub mode: Mode,
    pub diagnostics: CycleDiagnostics,
}

impl CycleResult {
    pub const CSV_HEADER: &'static str = "w_out,q_h,q_c,eta,eta_r,mode,w1,w2,w3,w4,du2,n1,n2,omega1_r,omega2_r,q_h_first_law,q_h_discrepancy,bookkeeping_residual,error_w2,error_w4,error_q_h,validity_margin,flagged";

    pub fn csv_row(&self, ledger: &StrokeLedger) -> String {
        let d = &self.diagnostics;
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.w_out,
            self.q_h,
            ledger.q_c,
            self.eta,
            self.eta_r,
            self.mode,
            ledger.w1,
            ledger.w2,
            ledger.w3,
            ledger.w4,
            ledger.du2,
            ledger.n1,
            ledger.n2,
            ledger.omega1_r,
            ledger.omega2_r,
            d.q_h_first_law,
            d.q_h_discrepancy,
            d.bookkeeping_residual,
            d.error_w2,
            d.error_w4,
            d.error_q_h,
            d.validity_margin,
            u8::from(d.flagged),
        )
    }
}

/// Steady occupations of the Markovian cycle.
pub fn markov_occupations(spec: &CycleSpec) -> (f64, f64) {
    let n1 = planck_occupation(spec.omega1, spec.t1()).unwrap_or(0.0);
    let n2 = planck_occupation(spec.omega2, spec.t2()).unwrap_or(0.0);
    (n1, n2)
}

/// Born-Markov cycle: Planck occupations at the bare frequencies.
pub fn markov_cycle(spec: &CycleSpec) -> CycleResult {
    let (n1, n2) = markov_occupations(spec);
    let (w1, w2) = (spec.omega1, spec.omega2);
    let w_out = (w2 - w1) * (n2 - n1);
    let q_h = w2 * (n2 - n1);
    let q_c = -w1 * (n2 - n1);
    let cls = classify_mode(w_out, q_h);
    CycleResult {
        w_out,
        q_h,
        eta: if w_out > 0.0 && q_h > 0.0 { 1.0 - w1 / w2 } else { 0.0 },
        eta_r: 1.0 - w1 / w2,
        mode: cls.mode,
        diagnostics: CycleDiagnostics {
            q_h_first_law: q_h,
            q_h_discrepancy: 0.0,
            q_c_first_law: q_c,
            bookkeeping_residual: w_out - q_h - q_c,
            error_w2: 0.0,
            error_w4: 0.0,
            error_q_h: 0.0,
            error_q_c: 0.0,
            window_hot: 0.0,
            window_cold: 0.0,
            validity_margin: 0.0,
            flagged: false,
            boundary: cls.boundary,
        },
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegralOptions {
    pub tol: Tolerance,
    pub max_evals: usize,
    /// Window length in units of the `omega_r` relaxation time.
    pub window_factor: f64,
    /// Hard cap on the window in units of `max(1/lambda, 1/gamma_inf)`.
    pub window_cap: f64,
}

impl Default for IntegralOptions {
    fn default() -> Self {
        Self {
            tol: Tolerance::new(1e-8, 1e-7),
            max_evals: 200_000,
            window_factor: 32.0,
            window_cap: 400.0,
        }
    }
}

/// Time integrals of one bath stroke.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseIntegrals {
    /// `∫ omega_r' n dt`.
    pub work: f64,
    /// `∫ omega_r n' dt`, by direct quadrature.
    pub heat: f64,
    /// `omega_r(∞) n(∞) - omega0 n0 - work`.
    pub heat_first_law: f64,
    pub n_inf: f64,
    pub omega_r_inf: f64,
    pub error_work: f64,
    pub error_heat: f64,
    pub window: f64,
    pub flagged: bool,
}

/// Work and heat of a stroke that starts at occupation `n0`.
///
/// The heat uses `∫ omega_r n' = omega_r(∞)(n(∞) - n0) + ∫ (omega_r - omega_r(∞)) n'`,
/// so both integrands decay at the relaxation rate of `omega_r` and share
/// one truncation window.
pub fn phase_integrals(phase: &PhaseSolution, n0: f64, opts: &IntegralOptions) -> Result<PhaseIntegrals> {
    let roots = phase.roots;
    let omega0 = phase.omega0();
    let lambda = phase.bath.spectral.lambda;
    if roots.is_free() {
        return Ok(PhaseIntegrals {
            work: 0.0,
            heat: 0.0,
            heat_first_law: 0.0,
            n_inf: n0,
            omega_r_inf: omega0,
            error_work: 0.0,
            error_heat: 0.0,
            window: 0.0,
            flagged: false,
        });
    }
    let n_inf = phase.i_inf;
    let omega_r_inf = steady_omega_r(&roots)?;
    let kappa = frequency_relaxation_rate(&roots);
    if roots.is_balanced() || kappa == 0.0 {
        let heat = omega_r_inf * (n_inf - n0);
        return Ok(PhaseIntegrals {
            work: 0.0,
            heat,
            heat_first_law: omega_r_inf * n_inf - omega0 * n0,
            n_inf,
            omega_r_inf,
            error_work: 0.0,
            error_heat: phase.static_error * omega_r_inf,
            window: 0.0,
            flagged: true,
        });
    }
    let gamma_inf = steady_gamma(&roots);
    let cap = opts.window_cap * (1.0 / lambda).max(1.0 / gamma_inf);
    let mut window = opts.window_factor / kappa;
    let mut flagged = false;
    if window > cap {
        window = cap;
        flagged = true;
    }

    let osc = if roots.confluent {
        0.0
    } else {
        (roots.mu1.im - roots.mu2.im).abs()
    };
    // Initial panels span a few oscillations of omega_r; refined adaptively.
    let mut h = 4.0 / kappa;
    if osc > 0.0 {
        h = h.min(6.0 * std::f64::consts::PI / osc);
    }
    let panels = ((window / h).ceil() as usize).clamp(4, 4000);
    let extra = (1..panels).map(|k| k as f64 * window / panels as f64);
    let bp = breakpoints(0.0, window, extra);

    let mut failure = None;
    let mut zero_hits = false;
    let res = integrate(
        |t| {
            let (rho, rho_dot, envelope) = roots.log_derivative(t);
            match phase.occupation(t, n0) {
                Ok((n, n_dot, _)) => {
                    if envelope < crate::green::DEFAULT_GUARD || !rho.is_finite() || !rho_dot.is_finite() {
                        zero_hits = true;
                        return [0.0, 0.0];
                    }
                    let omega_r = omega0 - rho.im;
                    let omega_r_dot = -rho_dot.im;
                    [omega_r_dot * n, (omega_r - omega_r_inf) * n_dot]
                }
                Err(e) => {
                    failure.get_or_insert(e);
                    [0.0, 0.0]
                }
            }
        },
        &bp,
        opts.tol,
        opts.max_evals,
    );
    if let Some(e) = failure {
        return Err(e);
    }
    if !res.converged {
        return Err(Error::QuadratureFailure {
            what: "stroke work integral",
            error: res.max_error(),
            target: opts.tol.abs.max(opts.tol.rel * res.value[0].abs()),
        });
    }

    // Tail beyond the window: both integrands decay like e^{-kappa t}.
    let (rho, rho_dot, _) = roots.log_derivative(window);
    let (n_w, n_dot_w, _) = phase.occupation(window, n0)?;
    let n_scale = n_w.abs() + n0 + n_inf;
    let tail_work = rho_dot.norm() * n_scale / kappa;
    let tail_heat = (rho - roots.mu1).norm() * (n_dot_w.abs() + gamma_inf * n_scale) / kappa;

    let work = res.value[0];
    let heat = omega_r_inf * (n_inf - n0) + res.value[1];
    Ok(PhaseIntegrals {
        work,
        heat,
        heat_first_law: omega_r_inf * n_inf - omega0 * n0 - work,
        n_inf,
        omega_r_inf,
        error_work: res.error[0] + tail_work,
        error_heat: res.error[1] + tail_heat + phase.static_error * omega_r_inf.abs(),
        window,
        flagged: flagged || zero_hits,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
    pub flagged: bool,
}

fn require_converged(traj: &Trajectory) -> Result<()> {
    if traj.converged_at.is_none() && !traj.phase.roots.is_free() {
        return Err(Error::NoConvergence {
            t_max: traj.samples.last().map_or(0.0, |s| s.t),
        });
    }
    Ok(())
}

/// `∫ omega_r' n dt` along the heating stroke.
pub fn stroke_work_ii(traj: &Trajectory) -> Result<Estimate> {
    require_converged(traj)?;
    let r = phase_integrals(&traj.phase, traj.n0, &IntegralOptions::default())?;
    Ok(Estimate {
        value: r.work,
        error: r.error_work,
        flagged: r.flagged,
    })
}

/// `∫ omega_r' n dt` along the cooling stroke.
pub fn stroke_work_iv(traj: &Trajectory) -> Result<Estimate> {
    stroke_work_ii(traj)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeatInput {
    pub direct: f64,
    pub first_law: f64,
    pub discrepancy: f64,
    pub error: f64,
    pub flagged: bool,
}

/// Heat drawn from the bath during a stroke, by quadrature and by the
/// first law.
pub fn heat_input(traj: &Trajectory) -> Result<HeatInput> {
    require_converged(traj)?;
    let r = phase_integrals(&traj.phase, traj.n0, &IntegralOptions::default())?;
    Ok(HeatInput {
        direct: r.heat,
        first_law: r.heat_first_law,
        discrepancy: relative_gap(r.heat, r.heat_first_law),
        error: r.error_heat,
        flagged: r.flagged,
    })
}

fn relative_gap(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

/// Bath strokes of a limit cycle, exposed for diagrams.
#[derive(Debug, Clone, PartialEq)]
pub struct CyclePhases {
    pub cold: PhaseSolution,
    pub hot: PhaseSolution,
}

impl CyclePhases {
    pub fn new(spec: &CycleSpec) -> Result<Self> {
        if spec.cold.spectral.gamma0 == 0.0 || spec.hot.spectral.gamma0 == 0.0 {
            return Err(Error::invalid("gamma0", "a cycle needs a bath coupling gamma0 > 0"));
        }
        let cold = PhaseSolution::new(spec.omega1, &spec.cold).map_err(|e| e.in_phase("cooling stroke"))?;
        let hot = PhaseSolution::new(spec.omega2, &spec.hot).map_err(|e| e.in_phase("heating stroke"))?;
        Ok(Self { cold, hot })
    }

    pub fn n1(&self) -> f64 {
        self.cold.i_inf
    }

    pub fn n2(&self) -> f64 {
        self.hot.i_inf
    }
}

pub fn run_cycle(spec: &CycleSpec) -> Result<(StrokeLedger, CycleResult)> {
    run_cycle_with(spec, &IntegralOptions::default())
}

/// Limit cycle from the steady states of the two bath strokes. The steady
/// states do not depend on the initial occupation, so the periodic cycle is
/// reached after one pass.
pub fn run_cycle_with(spec: &CycleSpec, opts: &IntegralOptions) -> Result<(StrokeLedger, CycleResult)> {
    let phases = CyclePhases::new(spec)?;
    let n1 = phases.n1();
    let n2 = phases.n2();
    let hot = phase_integrals(&phases.hot, n1, opts).map_err(|e| e.in_phase("heating stroke"))?;
    let cold = phase_integrals(&phases.cold, n2, opts).map_err(|e| e.in_phase("cooling stroke"))?;
    let omega1_r = cold.omega_r_inf;
    let omega2_r = hot.omega_r_inf;

    let w1 = stroke_work_i(n1, omega1_r, spec.omega2);
    let w3 = stroke_work_iii(n2, omega2_r, spec.omega1);
    let ledger = StrokeLedger {
        w1,
        w2: hot.work,
        w3,
        w4: cold.work,
        q_h: hot.heat,
        q_c: cold.heat,
        du2: omega2_r * n2 - spec.omega2 * n1,
        n1,
        n2,
        omega1_r,
        omega2_r,
    };
    let w_out = -(w1 + hot.work + w3 + cold.work);
    let q_h = hot.heat;
    let cls = classify_mode(w_out, q_h);
    let margin = validity_margin(spec.omega1, &spec.cold.spectral)
        .max(validity_margin(spec.omega2, &spec.hot.spectral));
    let result = CycleResult {
        w_out,
        q_h,
        eta: efficiency(w_out, q_h),
        eta_r: renormalized_efficiency(omega1_r, omega2_r),
        mode: cls.mode,
        diagnostics: CycleDiagnostics {
            q_h_first_law: hot.heat_first_law,
            q_h_discrepancy: relative_gap(hot.heat, hot.heat_first_law),
            q_c_first_law: cold.heat_first_law,
            bookkeeping_residual: w_out - hot.heat - cold.heat,
            error_w2: hot.error_work,
            error_w4: cold.error_work,
            error_q_h: hot.error_heat,
            error_q_c: cold.error_heat,
            window_hot: hot.window,
            window_cold: cold.window,
            validity_margin: margin,
            flagged: hot.flagged || cold.flagged,
            boundary: cls.boundary,
        },
    };
    Ok((ledger, result))
}
