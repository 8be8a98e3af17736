use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;

use nmotto::noise::{evolve_phase, Trajectory};
use nmotto::plot::{self, Series};
use nmotto::quad::Tolerance;
use nmotto::spectral::{planck_occupation, BathSpec, SpectralParams};
use nmotto::sweep::{self, Axis, CellStatus, SweepSpec};
use nmotto::thermo::{markov_cycle, markov_occupations, run_cycle_with, CycleResult, CycleSpec, IntegralOptions};
use nmotto::validate::{oracle_report, MomentState, OracleGrid};
use num_complex::Complex64;

use crate::config::{Config, ConfigError};

/// Largest oracle discrepancy `validate` accepts.
pub const VALIDATE_TOL: f64 = 1e-6;

/// Default `(gamma0, lambda)` panels of `regions`.
pub const DEFAULT_PANELS: &[(f64, f64)] = &[(0.1, 0.2), (1.0, 0.2), (1.0, 1.0), (5.0, 1.0)];

#[derive(Debug)]
pub enum CliError {
    Config(ConfigError),
    Physics(nmotto::Error),
    Check(String),
    Io(std::io::Error),
}

impl CliError {
    /// 0 success, 1 I/O, 2 configuration, 3 physics or convergence.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Io(_) => 1,
            CliError::Config(_) => 2,
            CliError::Physics(e) if is_parameter_error(e) => 2,
            CliError::Physics(_) | CliError::Check(_) => 3,
        }
    }
}

fn is_parameter_error(e: &nmotto::Error) -> bool {
    match e {
        nmotto::Error::InvalidParameter { .. } => true,
        nmotto::Error::Phase { source, .. } => is_parameter_error(source),
        _ => false,
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(e) => write!(f, "config error: {e}"),
            CliError::Physics(e) if is_parameter_error(e) => write!(f, "config error: {e}"),
            CliError::Physics(e) => write!(f, "physics failure: {e}"),
            CliError::Check(msg) => write!(f, "check failed: {msg}"),
            CliError::Io(e) => write!(f, "i/o error: {e}"),
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e)
    }
}

impl From<nmotto::Error> for CliError {
    fn from(e: nmotto::Error) -> Self {
        CliError::Physics(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e)
    }
}

pub type CliResult<T> = Result<T, CliError>;

pub struct Context {
    pub config: Config,
    pub out: PathBuf,
    pub jobs: Option<usize>,
    pub svg: bool,
}

impl Context {
    fn write_csv(&self, name: &str, body: &str) -> CliResult<PathBuf> {
        self.write(name, format!("{}{body}", self.config.echo()))
    }

    fn write_svg(&self, name: &str, svg: &str) -> CliResult<PathBuf> {
        self.write(name, format!("<!--\n{}-->\n{svg}", self.config.echo()))
    }

    fn write(&self, name: &str, text: String) -> CliResult<PathBuf> {
        fs::create_dir_all(&self.out)?;
        let path = self.out.join(name);
        fs::write(&path, text)?;
        println!("wrote {}", path.display());
        Ok(path)
    }

    fn pool<R: Send>(&self, f: impl FnOnce() -> R + Send) -> CliResult<R> {
        Ok(sweep::with_jobs(self.jobs, f)?)
    }
}

fn spectral_params(cfg: &Config, gamma0: f64, lambda: f64, omega_c: f64) -> CliResult<SpectralParams> {
    let omega_m = cfg.f64_or("omega_m", omega_c / nmotto::spectral::DEFAULT_OMEGA_M_DIVISOR)?;
    Ok(SpectralParams::new(gamma0, lambda, omega_c, omega_m)?)
}

fn cycle_spec(cfg: &Config) -> CliResult<CycleSpec> {
    let omega1 = cfg.f64("omega1")?;
    let omega2 = cfg.f64("omega2")?;
    let t1 = cfg.f64("t1")?;
    let t2 = cfg.f64("t2")?;
    let p = spectral_params(cfg, cfg.f64("gamma0")?, cfg.f64("lambda")?, cfg.f64("omega_c")?)?;
    Ok(CycleSpec::new(omega1, omega2, t1, t2, p)?)
}

/// Base cycle for sweeps that override the coupling; every key has a default.
fn sweep_base(cfg: &Config, gamma0: f64, lambda: f64) -> CliResult<CycleSpec> {
    let omega1 = cfg.f64_or("omega1", 14.0)?;
    let omega2 = cfg.f64_or("omega2", 16.0)?;
    let t1 = cfg.f64_or("t1", 15.0)?;
    let t2 = cfg.f64_or("t2", 20.0)?;
    let omega_c = cfg.f64_or("omega_c", 15.0)?;
    let p = spectral_params(cfg, gamma0, lambda, omega_c)?;
    Ok(CycleSpec::new(omega1, omega2, t1, t2, p)?)
}

fn integral_options(cfg: &Config) -> CliResult<IntegralOptions> {
    let d = IntegralOptions::default();
    let abs = cfg.f64_or("tol_abs", d.tol.abs)?;
    let rel = cfg.f64_or("tol_rel", d.tol.rel)?;
    if !(abs > 0.0 && rel > 0.0) {
        return Err(ConfigError::Value {
            key: "tol_abs/tol_rel".into(),
            value: format!("{abs}/{rel}"),
            reason: "tolerances must be positive".into(),
        }
        .into());
    }
    Ok(IntegralOptions {
        tol: Tolerance::new(abs, rel),
        ..d
    })
}

fn axis(cfg: &Config, name: &'static str, keys: [&'static str; 3], default: (f64, f64, usize)) -> CliResult<Axis> {
    let min = cfg.f64_or(keys[0], default.0)?;
    let max = cfg.f64_or(keys[1], default.1)?;
    let points = cfg.usize_or(keys[2], default.2)?;
    Ok(Axis::linear(name, min, max, points)?)
}

fn omega_c_axis(cfg: &Config, base: &CycleSpec) -> CliResult<Axis> {
    let lo = (base.omega1 - 3.0).max(0.5);
    axis(cfg, "omega_c", ["wc_min", "wc_max", "wc_points"], (lo, base.omega2 + 3.0, 61))
}

pub fn cycle(ctx: &Context) -> CliResult<()> {
    let spec = cycle_spec(&ctx.config)?;
    let opts = integral_options(&ctx.config)?;
    let (ledger, exact) = run_cycle_with(&spec, &opts)?;
    let markov = markov_cycle(&spec);
    let (m1, m2) = markov_occupations(&spec);

    let rows: [(&str, String, String); 8] = [
        ("w_out", exact.w_out.to_string(), markov.w_out.to_string()),
        ("q_h", exact.q_h.to_string(), markov.q_h.to_string()),
        ("q_c", ledger.q_c.to_string(), markov.diagnostics.q_c_first_law.to_string()),
        ("eta", exact.eta.to_string(), markov.eta.to_string()),
        ("eta_r", exact.eta_r.to_string(), markov.eta_r.to_string()),
        ("mode", exact.mode.to_string(), markov.mode.to_string()),
        ("n1", ledger.n1.to_string(), m1.to_string()),
        ("n2", ledger.n2.to_string(), m2.to_string()),
    ];
    println!("{:<8} {:>22} {:>22}", "", "exact", "markov");
    for (name, e, m) in &rows {
        println!("{name:<8} {e:>22} {m:>22}");
    }
    if exact.diagnostics.flagged {
        log::warn!("a stroke has Green-function zeros or a truncated window");
    }

    let mut compare = String::from("quantity,exact,markov\n");
    for (name, e, m) in &rows {
        let _ = writeln!(compare, "{name},{e},{m}");
    }
    ctx.write_csv(
        "cycle.csv",
        &format!("{}\n{}\n", CycleResult::CSV_HEADER, exact.csv_row(&ledger)),
    )?;
    ctx.write_csv("compare.csv", &compare)?;
    Ok(())
}

pub fn trace(ctx: &Context) -> CliResult<()> {
    let cfg = &ctx.config;
    let spec = cycle_spec(cfg)?;
    let bath_name = cfg.str_or("bath", "hot");
    // A stroke starts from the Markov steady state of the other bath.
    let (omega0, bath, entry): (f64, BathSpec, f64) = match bath_name.as_str() {
        "hot" => (spec.omega2, spec.hot, planck_occupation(spec.omega1, spec.t1())?),
        "cold" => (spec.omega1, spec.cold, planck_occupation(spec.omega2, spec.t2())?),
        other => {
            return Err(ConfigError::Value {
                key: "bath".into(),
                value: other.into(),
                reason: "expected hot or cold".into(),
            }
            .into())
        }
    };
    let n0 = cfg.f64_or("n0", entry)?;
    let traj = evolve_phase(omega0, &bath, n0)?;
    match traj.converged_at {
        Some(t) => println!("{bath_name} stroke converged at t = {t}: n = {}, omega_r = {}", traj.n_inf, traj.omega_r_inf),
        None => log::warn!("{bath_name} stroke did not meet the steadiness test"),
    }
    let mut body = Vec::new();
    traj.write_csv(&mut body)?;
    ctx.write_csv(&format!("trace_{bath_name}.csv"), &String::from_utf8_lossy(&body))?;
    if ctx.svg {
        ctx.write_svg(&format!("trace_{bath_name}.svg"), &trace_svg(&traj))?;
    }
    Ok(())
}

fn trace_svg(traj: &Trajectory) -> String {
    let n = Series {
        label: "n(t)".into(),
        points: traj.samples.iter().map(|s| (s.t, s.n)).collect(),
        dashed: false,
    };
    let steady = Series {
        label: "n(inf)".into(),
        points: traj.samples.iter().map(|s| (s.t, traj.n_inf)).collect(),
        dashed: true,
    };
    plot::line_plot("occupation", "t", "n", &[n, steady], &[])
}

pub fn sweep_wc(ctx: &Context) -> CliResult<()> {
    let cfg = &ctx.config;
    let base = cycle_spec(cfg)?;
    let mut spec = SweepSpec::wc_scan(base)?;
    spec.axes = vec![omega_c_axis(cfg, &base)?];
    spec.opts = integral_options(cfg)?;
    let scan = ctx.pool(|| sweep::wc_scan(&spec))??;
    let failed = scan.rows.iter().filter(|r| r.cell.status == CellStatus::Failed).count();
    println!("{} points, {failed} failed", scan.rows.len());
    ctx.write_csv("wc_scan.csv", &scan.to_csv())?;
    if ctx.svg {
        ctx.write_svg("wc_scan.svg", &plot::wc_scan_svg(&scan))?;
    }
    Ok(())
}

pub fn diagram(ctx: &Context) -> CliResult<()> {
    let cfg = &ctx.config;
    let base = cycle_spec(cfg)?;
    let list = cfg.list_or("omega_c_list", &[12.0, 15.0, 18.0])?;
    let spec = SweepSpec::cycle_diagram(base, list)?;
    let loops = ctx.pool(|| sweep::cycle_diagram(&spec))??;
    let markov = sweep::markov_loop(&base);
    let ok: Vec<_> = loops.iter().filter_map(|l| l.as_ref().ok()).cloned().collect();
    for l in &loops {
        match l {
            Ok(l) => println!("omega_c = {}: area {} (markov {})", l.omega_c, l.area, l.markov_area),
            Err(e) => log::warn!("loop failed: {e}"),
        }
    }
    if ok.is_empty() {
        return Err(CliError::Check("no cycle loop could be traced".into()));
    }
    ctx.write_csv("diagram.csv", &sweep::diagram_csv(&loops, &markov))?;
    if ctx.svg {
        ctx.write_svg("diagram.svg", &plot::loops_svg(&ok, &markov))?;
    }
    Ok(())
}

pub fn spectral(ctx: &Context) -> CliResult<()> {
    let cfg = &ctx.config;
    let base = cycle_spec(cfg)?;
    let mut spec = SweepSpec::spectral_diag(base)?;
    spec.axes = vec![omega_c_axis(cfg, &base)?];
    let rows = sweep::spectral_diag(&spec)?;
    ctx.write_csv("spectral.csv", &sweep::spectral_csv(&rows))?;
    if ctx.svg {
        ctx.write_svg("spectral.svg", &plot::spectral_svg(&rows, &[base.omega1, base.omega2]))?;
    }
    Ok(())
}

pub fn regions(ctx: &Context) -> CliResult<()> {
    let cfg = &ctx.config;
    let panels = cfg.pairs_or("panels", DEFAULT_PANELS)?;
    let omega_c = cfg.f64_or("omega_c", 15.0)?;
    let t0 = cfg.f64_or("t0", 17.5)?;
    let dt = axis(cfg, "delta_t", ["delta_t_min", "delta_t_max", "delta_t_points"], (0.5, 20.0, 41))?;
    let dw = axis(
        cfg,
        "delta_omega",
        ["delta_omega_min", "delta_omega_max", "delta_omega_points"],
        (0.25, 10.0, 41),
    )?;
    let opts = integral_options(cfg)?;

    // Resolve every panel before the first write so the echo is complete.
    let mut specs = Vec::new();
    for &(gamma0, lambda) in &panels {
        let p = spectral_params(cfg, gamma0, lambda, omega_c)?;
        let base = sweep::symmetric_cycle(p, t0, dt.values[0], dw.values[0])?;
        let mut spec = SweepSpec::region_map(base)?;
        spec.axes = vec![dt.clone(), dw.clone()];
        spec.reference_temperature = t0;
        spec.opts = opts;
        specs.push((gamma0, lambda, spec));
    }
    for (gamma0, lambda, spec) in &specs {
        let map = ctx.pool(|| sweep::region_map(spec))??;
        let failed = map.points.iter().filter(|p| p.cell.status == CellStatus::Failed).count();
        println!(
            "gamma0 = {gamma0}, lambda = {lambda}: {} cells, {failed} failed",
            map.points.len()
        );
        let stem = format!("regions_g{gamma0}_l{lambda}");
        ctx.write_csv(&format!("{stem}.csv"), &map.to_csv())?;
        if ctx.svg {
            ctx.write_svg(&format!("{stem}.svg"), &plot::region_svg(&map))?;
        }
    }
    Ok(())
}

pub fn heatmap(ctx: &Context) -> CliResult<()> {
    let cfg = &ctx.config;
    let g = axis(cfg, "gamma0", ["gamma0_min", "gamma0_max", "gamma0_points"], (0.1, 20.0, 41))?;
    let l = axis(cfg, "lambda", ["lambda_min", "lambda_max", "lambda_points"], (0.05, 5.0, 41))?;
    let base = sweep_base(cfg, g.values[0], l.values[0])?;
    let mut spec = SweepSpec::eta_heatmap(base, 2)?;
    spec.axes = vec![g, l];
    spec.opts = integral_options(cfg)?;
    let map = ctx.pool(|| sweep::eta_heatmap(&spec))??;
    match map.argmax() {
        Some((i, j)) => println!(
            "max eta {} at gamma0 = {}, lambda = {}{}",
            map.eta(i, j).unwrap_or(f64::NAN),
            map.gamma0[i],
            map.lambda[j],
            if map.interior_max() { "" } else { " (grid edge)" }
        ),
        None => println!("no engine cells"),
    }
    ctx.write_csv("heatmap.csv", &map.to_csv())?;
    if ctx.svg {
        ctx.write_svg("heatmap.svg", &plot::heatmap_svg(&map))?;
    }
    Ok(())
}

pub fn validate(ctx: &Context) -> CliResult<()> {
    let cfg = &ctx.config;
    let spec = cycle_spec(cfg)?;
    let n0 = cfg.f64_opt("n0")?;
    let a0 = Complex64::new(cfg.f64_or("a0_re", 0.5)?, cfg.f64_or("a0_im", 0.0)?);
    let aa0 = Complex64::new(cfg.f64_or("aa0_re", 0.2)?, cfg.f64_or("aa0_im", 0.1)?);
    let d = OracleGrid::default();
    let grid = OracleGrid {
        points: cfg.usize_or("points", d.points)?,
        horizon: cfg.f64_or("horizon", d.horizon)?,
    };

    let strokes = [
        ("cold", spec.omega1, spec.cold, planck_occupation(spec.omega2, spec.t2())?),
        ("hot", spec.omega2, spec.hot, planck_occupation(spec.omega1, spec.t1())?),
    ];
    let mut body = String::from("stroke,omega0,temperature,n0,t_end,points,max_a,max_aa,max_n,flagged,pass\n");
    let mut failures = Vec::new();
    for (name, omega0, bath, entry) in strokes {
        let init = MomentState {
            t: 0.0,
            a_mean: a0,
            aa_mean: aa0,
            n_mean: n0.unwrap_or(entry),
        };
        let r = oracle_report(omega0, &bath, init, grid)?;
        let pass = r.passes(VALIDATE_TOL);
        println!(
            "{name:<5} max |d<a>| {:.3e}  |d<aa>| {:.3e}  |dn| {:.3e}{}  {}",
            r.max_a,
            r.max_aa,
            r.max_n,
            if r.flagged { "  (Green-function zero in window)" } else { "" },
            if pass { "PASS" } else { "FAIL" }
        );
        let _ = writeln!(
            body,
            "{name},{omega0},{},{},{},{},{},{},{},{},{}",
            bath.temperature,
            init.n_mean,
            r.t_end,
            r.points,
            r.max_a,
            r.max_aa,
            r.max_n,
            u8::from(r.flagged),
            u8::from(pass)
        );
        if !pass {
            failures.push(format!("{name} stroke discrepancy {:.3e}", r.max_discrepancy()));
        }
    }
    ctx.write_csv("validate.csv", &body)?;
    if failures.is_empty() {
        Ok(())
    } else {
        Err(CliError::Check(format!("{} exceeds {VALIDATE_TOL:e}", failures.join(", "))))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_follow_error_kind() {
        let bad = nmotto::Error::InvalidParameter {
            name: "lambda",
            reason: "must be > 0".into(),
        };
        assert_eq!(CliError::Physics(bad.clone()).exit_code(), 2);
        let wrapped = nmotto::Error::Phase {
            stage: "heating stroke",
            source: Box::new(bad),
        };
        assert_eq!(CliError::Physics(wrapped).exit_code(), 2);
        assert_eq!(CliError::Physics(nmotto::Error::NoConvergence { t_max: 1.0 }).exit_code(), 3);
        assert_eq!(CliError::Check("oracle".into()).exit_code(), 3);
        assert_eq!(CliError::Config(ConfigError::Missing("omega2")).exit_code(), 2);
    }
}
