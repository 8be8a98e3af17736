//! Parameter grids over the cycle: `omega_c` scans, `(omega, n)` loop
//! diagrams, spectral diagnostics, operating-region maps over
//! `(Delta T, Delta omega)` and efficiency maps over `(gamma0, lambda)`.
//!
//! Cells are evaluated on the current rayon pool and gathered in grid order,
//! so output does not depend on the number of workers. A failing cell is
//! recorded with its status and never aborts the sweep.

use std::fmt::Write as _;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::noise::{evolve_phase, Trajectory, FLAG_GREEN_ZERO};
use crate::spectral::{lorentzian_j, lorentzian_slope, SpectralParams};
use crate::thermo::{
    markov_cycle, markov_occupations, run_cycle_with, CycleResult, CycleSpec, IntegralOptions, Mode,
    StrokeLedger,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepKind {
    WcScan,
    CycleDiagram,
    SpectralDiag,
    RegionMap,
    EtaHeatmap,
}

impl SweepKind {
    fn axis_names(self) -> &'static [&'static str] {
        match self {
            SweepKind::WcScan | SweepKind::CycleDiagram | SweepKind::SpectralDiag => &["omega_c"],
            SweepKind::RegionMap => &["delta_t", "delta_omega"],
            SweepKind::EtaHeatmap => &["gamma0", "lambda"],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Axis {
    pub name: String,
    pub values: Vec<f64>,
}

impl Axis {
    /// `points` evenly spaced values on `[min, max]`.
    pub fn linear(name: &str, min: f64, max: f64, points: usize) -> Result<Self> {
        if points < 2 {
            return Err(Error::invalid("points", format!("axis `{name}` needs at least 2 points")));
        }
        if !(min.is_finite() && max.is_finite() && min < max) {
            return Err(Error::invalid("axis", format!("`{name}` needs min < max, got [{min}, {max}]")));
        }
        let step = (max - min) / (points - 1) as f64;
        let values = (0..points)
            .map(|j| if j + 1 == points { max } else { min + step * j as f64 })
            .collect();
        Ok(Self {
            name: name.to_string(),
            values,
        })
    }

    pub fn list(name: &str, values: Vec<f64>) -> Result<Self> {
        if values.is_empty() || values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("axis", format!("`{name}` needs finite values")));
        }
        Ok(Self {
            name: name.to_string(),
            values,
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub kind: SweepKind,
    pub base: CycleSpec,
    pub axes: Vec<Axis>,
    pub include_markov: bool,
    pub include_eta_r: bool,
    /// Mean temperature `T0` of the symmetric region-map parametrization.
    pub reference_temperature: f64,
    pub opts: IntegralOptions,
}

impl SweepSpec {
    pub fn new(kind: SweepKind, base: CycleSpec, axes: Vec<Axis>) -> Result<Self> {
        let names = kind.axis_names();
        if axes.len() != names.len() {
            return Err(Error::invalid("axes", format!("{kind:?} needs axes {names:?}")));
        }
        for (axis, name) in axes.iter().zip(names) {
            if axis.name != *name {
                return Err(Error::invalid(
                    "axes",
                    format!("{kind:?} expects axis `{name}`, got `{}`", axis.name),
                ));
            }
        }
        Ok(Self {
            kind,
            base,
            axes,
            include_markov: true,
            include_eta_r: true,
            reference_temperature: 0.5 * (base.t1() + base.t2()),
            opts: IntegralOptions::default(),
        })
    }

    /// 61 points over `[omega1 - 3, omega2 + 3]`.
    pub fn wc_scan(base: CycleSpec) -> Result<Self> {
        let axis = Axis::linear("omega_c", (base.omega1 - 3.0).max(0.5), base.omega2 + 3.0, 61)?;
        Self::new(SweepKind::WcScan, base, vec![axis])
    }

    pub fn spectral_diag(base: CycleSpec) -> Result<Self> {
        let axis = Axis::linear("omega_c", (base.omega1 - 3.0).max(0.5), base.omega2 + 3.0, 61)?;
        Self::new(SweepKind::SpectralDiag, base, vec![axis])
    }

    pub fn cycle_diagram(base: CycleSpec, omega_c: Vec<f64>) -> Result<Self> {
        Self::new(SweepKind::CycleDiagram, base, vec![Axis::list("omega_c", omega_c)?])
    }

    /// 41 x 41 over `Delta T in [0.5, 20]`, `Delta omega in [0.25, 10]` around
    /// `T0 = 17.5`.
    pub fn region_map(base: CycleSpec) -> Result<Self> {
        let mut s = Self::new(
            SweepKind::RegionMap,
            base,
            vec![
                Axis::linear("delta_t", 0.5, 20.0, 41)?,
                Axis::linear("delta_omega", 0.25, 10.0, 41)?,
            ],
        )?;
        s.reference_temperature = 17.5;
        Ok(s)
    }

    /// 41 x 41 over `gamma0 in [0.1, 20]`, `lambda in [0.05, 5]`.
    pub fn eta_heatmap(base: CycleSpec, points: usize) -> Result<Self> {
        Self::new(
            SweepKind::EtaHeatmap,
            base,
            vec![
                Axis::linear("gamma0", 0.1, 20.0, points)?,
                Axis::linear("lambda", 0.05, 5.0, points)?,
            ],
        )
    }

    fn expect(&self, kind: SweepKind) -> Result<()> {
        if self.kind != kind {
            return Err(Error::invalid("kind", format!("expected {kind:?}, got {:?}", self.kind)));
        }
        Ok(())
    }
}

/// Outcome of one grid cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CellStatus {
    Ok,
    Flagged,
    Failed,
}

impl CellStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            CellStatus::Ok => "ok",
            CellStatus::Flagged => "flagged",
            CellStatus::Failed => "failed",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub status: CellStatus,
    pub outcome: Option<(StrokeLedger, CycleResult)>,
}

impl Cell {
    pub fn result(&self) -> Option<&CycleResult> {
        self.outcome.as_ref().map(|(_, r)| r)
    }

    /// Operating mode, `None` when unresolved.
    pub fn mode(&self) -> Option<Mode> {
        match self.status {
            CellStatus::Failed => None,
            _ => self.result().map(|r| r.mode),
        }
    }
}

fn evaluate(spec: Result<CycleSpec>, opts: &IntegralOptions) -> Cell {
    match spec.and_then(|s| run_cycle_with(&s, opts)) {
        Ok((ledger, result)) => Cell {
            status: if result.diagnostics.flagged {
                CellStatus::Flagged
            } else {
                CellStatus::Ok
            },
            outcome: Some((ledger, result)),
        },
        Err(e) => {
            log::warn!("cell failed: {e}");
            Cell {
                status: CellStatus::Failed,
                outcome: None,
            }
        }
    }
}

/// Same bath shape centred at `omega_c`, keeping `omega_m / omega_c`.
fn recentred(p: &SpectralParams, omega_c: f64) -> Result<SpectralParams> {
    SpectralParams::new(p.gamma0, p.lambda, omega_c, p.omega_m * omega_c / p.omega_c)
}

fn with_spectral(base: &CycleSpec, p: SpectralParams) -> Result<CycleSpec> {
    CycleSpec::new(base.omega1, base.omega2, base.t1(), base.t2(), p)
}

/// Runs `f` with at most `jobs` workers; `None` uses the global pool.
pub fn with_jobs<R: Send>(jobs: Option<usize>, f: impl FnOnce() -> R + Send) -> Result<R> {
    match jobs {
        None => Ok(f()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build()
                .map_err(|e| Error::invalid("jobs", e.to_string()))?;
            Ok(pool.install(f))
        }
    }
}

fn num(x: f64) -> String {
    if x.is_nan() {
        "nan".to_string()
    } else {
        format!("{x}")
    }
}

// ---------------------------------------------------------------- omega_c scan

#[derive(Debug, Clone, PartialEq)]
pub struct WcRow {
    pub omega_c: f64,
    pub cell: Cell,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WcScan {
    pub rows: Vec<WcRow>,
    pub markov: CycleResult,
    /// `omega_c` values where the peak crosses a stroke frequency.
    pub markers: [f64; 2],
}

impl WcScan {
    pub const CSV_HEADER: &'static str = "omega_c,status,w_out,q_h,eta,eta_r,validity_margin,mode,error_w,error_q_h,q_h_discrepancy,w_out_markov,q_h_markov,eta_markov";

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# marker omega_c={}", num(self.markers[0]));
        let _ = writeln!(out, "# marker omega_c={}", num(self.markers[1]));
        let _ = writeln!(out, "{}", Self::CSV_HEADER);
        for row in &self.rows {
            let m = &self.markov;
            let nan = f64::NAN;
            let (w, q, eta, eta_r, margin, mode, ew, eq, disc) = match &row.cell.outcome {
                Some((_, r)) => (
                    r.w_out,
                    r.q_h,
                    r.eta,
                    r.eta_r,
                    r.diagnostics.validity_margin,
                    r.mode.as_str(),
                    r.diagnostics.error_w2 + r.diagnostics.error_w4,
                    r.diagnostics.error_q_h,
                    r.diagnostics.q_h_discrepancy,
                ),
                None => (nan, nan, nan, nan, nan, "unresolved", nan, nan, nan),
            };
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
                num(row.omega_c),
                row.cell.status.as_str(),
                num(w),
                num(q),
                num(eta),
                num(eta_r),
                num(margin),
                mode,
                num(ew),
                num(eq),
                num(disc),
                num(m.w_out),
                num(m.q_h),
                num(m.eta),
            );
        }
        out
    }
}

/// Full cycle at every `omega_c` of the axis.
pub fn wc_scan(spec: &SweepSpec) -> Result<WcScan> {
    spec.expect(SweepKind::WcScan)?;
    let base = spec.base;
    let rows = spec.axes[0]
        .values
        .par_iter()
        .map(|&wc| WcRow {
            omega_c: wc,
            cell: evaluate(
                recentred(&base.hot.spectral, wc).and_then(|p| with_spectral(&base, p)),
                &spec.opts,
            ),
        })
        .collect();
    Ok(WcScan {
        rows,
        markov: markov_cycle(&base),
        markers: [base.omega1, base.omega2],
    })
}

// ------------------------------------------------------------- cycle diagram

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stroke {
    I,
    II,
    III,
    IV,
}

impl Stroke {
    pub fn as_str(self) -> &'static str {
        match self {
            Stroke::I => "I",
            Stroke::II => "II",
            Stroke::III => "III",
            Stroke::IV => "IV",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoopPoint {
    pub stroke: Stroke,
    pub omega: f64,
    pub n: f64,
}

/// Closed `(omega, n)` loop of one cycle.
#[derive(Debug, Clone, PartialEq)]
pub struct CycleLoop {
    pub omega_c: f64,
    pub points: Vec<LoopPoint>,
    /// Work output from the enclosed area, `-oint n d omega`.
    pub area: f64,
    pub w_out: f64,
    pub markov_area: f64,
    pub flagged: bool,
}

/// `-oint n d omega` around the closed polygon.
pub fn loop_area(points: &[LoopPoint]) -> f64 {
    let n = points.len();
    (0..n)
        .map(|j| {
            let (a, b) = (points[j], points[(j + 1) % n]);
            -0.5 * (a.n + b.n) * (b.omega - a.omega)
        })
        .sum()
}

fn trace_stroke(traj: &Trajectory, stroke: Stroke, out: &mut Vec<LoopPoint>) -> bool {
    let mut flagged = false;
    for s in &traj.samples {
        if s.flags & FLAG_GREEN_ZERO != 0 || !s.omega_r.is_finite() {
            flagged = true;
            continue;
        }
        out.push(LoopPoint {
            stroke,
            omega: s.omega_r,
            n: s.n,
        });
    }
    flagged
}

fn diagram_for(base: &CycleSpec, wc: f64, opts: &IntegralOptions) -> Result<CycleLoop> {
    let spec = with_spectral(base, recentred(&base.hot.spectral, wc)?)?;
    let (ledger, result) = run_cycle_with(&spec, opts)?;
    let hot = evolve_phase(spec.omega2, &spec.hot, ledger.n1)?;
    let cold = evolve_phase(spec.omega1, &spec.cold, ledger.n2)?;
    let mut points = Vec::with_capacity(hot.samples.len() + cold.samples.len() + 2);
    // Stroke I is the jump from the end of stroke IV onto the first hot sample.
    let mut flagged = trace_stroke(&hot, Stroke::II, &mut points);
    flagged |= trace_stroke(&cold, Stroke::IV, &mut points);
    // Strokes I and III are the closing horizontal edges at fixed n.
    if let Some(first_cold) = points.iter().position(|p| p.stroke == Stroke::IV) {
        let end_hot = points[first_cold - 1];
        points.insert(
            first_cold,
            LoopPoint {
                stroke: Stroke::III,
                omega: end_hot.omega,
                n: end_hot.n,
            },
        );
    }
    if let Some(&last) = points.last() {
        points.push(LoopPoint {
            stroke: Stroke::I,
            omega: last.omega,
            n: last.n,
        });
    }
    let (n1m, n2m) = markov_occupations(&spec);
    Ok(CycleLoop {
        omega_c: wc,
        area: loop_area(&points),
        points,
        w_out: result.w_out,
        markov_area: (spec.omega2 - spec.omega1) * (n2m - n1m),
        flagged: flagged || result.diagnostics.flagged,
    })
}

/// Markov rectangle with corners `(omega1, n1), (omega2, n1), (omega2, n2), (omega1, n2)`.
pub fn markov_loop(base: &CycleSpec) -> Vec<LoopPoint> {
    let (n1, n2) = markov_occupations(base);
    vec![
        LoopPoint { stroke: Stroke::I, omega: base.omega1, n: n1 },
        LoopPoint { stroke: Stroke::II, omega: base.omega2, n: n1 },
        LoopPoint { stroke: Stroke::III, omega: base.omega2, n: n2 },
        LoopPoint { stroke: Stroke::IV, omega: base.omega1, n: n2 },
    ]
}

pub fn cycle_diagram(spec: &SweepSpec) -> Result<Vec<Result<CycleLoop>>> {
    spec.expect(SweepKind::CycleDiagram)?;
    let base = spec.base;
    Ok(spec.axes[0]
        .values
        .par_iter()
        .map(|&wc| diagram_for(&base, wc, &spec.opts))
        .collect())
}

pub const DIAGRAM_CSV_HEADER: &str = "omega_c,stroke,omega,n";

pub fn diagram_csv(loops: &[Result<CycleLoop>], markov: &[LoopPoint]) -> String {
    let mut out = String::new();
    for l in loops.iter().flatten() {
        let _ = writeln!(
            out,
            "# loop omega_c={} area={} w_out={} markov_area={} flagged={}",
            num(l.omega_c),
            num(l.area),
            num(l.w_out),
            num(l.markov_area),
            u8::from(l.flagged)
        );
    }
    let _ = writeln!(out, "{DIAGRAM_CSV_HEADER}");
    for p in markov {
        let _ = writeln!(out, "markov,{},{},{}", p.stroke.as_str(), num(p.omega), num(p.n));
    }
    for l in loops.iter().flatten() {
        for p in &l.points {
            let _ = writeln!(out, "{},{},{},{}", num(l.omega_c), p.stroke.as_str(), num(p.omega), num(p.n));
        }
    }
    out
}

// ------------------------------------------------------- spectral diagnostics

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralRow {
    pub omega_c: f64,
    pub j1: f64,
    pub j2: f64,
    pub slope1: f64,
    pub slope2: f64,
}

pub const SPECTRAL_CSV_HEADER: &str = "omega_c,j_omega1,j_omega2,dj_omega1,dj_omega2";

pub fn spectral_diag(spec: &SweepSpec) -> Result<Vec<SpectralRow>> {
    spec.expect(SweepKind::SpectralDiag)?;
    let base = spec.base;
    spec.axes[0]
        .values
        .iter()
        .map(|&wc| {
            let p = recentred(&base.hot.spectral, wc)?;
            Ok(SpectralRow {
                omega_c: wc,
                j1: lorentzian_j(base.omega1, &p),
                j2: lorentzian_j(base.omega2, &p),
                slope1: lorentzian_slope(base.omega1, &p),
                slope2: lorentzian_slope(base.omega2, &p),
            })
        })
        .collect()
}

pub fn spectral_csv(rows: &[SpectralRow]) -> String {
    let mut out = format!("{SPECTRAL_CSV_HEADER}\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            num(r.omega_c),
            num(r.j1),
            num(r.j2),
            num(r.slope1),
            num(r.slope2)
        );
    }
    out
}

// ---------------------------------------------------------------- region map

#[derive(Debug, Clone, PartialEq)]
pub struct RegionPoint {
    pub delta_t: f64,
    pub delta_omega: f64,
    pub cell: Cell,
    pub markov_mode: Mode,
}

impl RegionPoint {
    pub fn mode(&self) -> Option<Mode> {
        self.cell.mode()
    }
}

/// Grid indexed `[i_t * n_omega + i_omega]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionMap {
    pub delta_t: Vec<f64>,
    pub delta_omega: Vec<f64>,
    pub omega_c: f64,
    pub reference_temperature: f64,
    pub points: Vec<RegionPoint>,
}

/// Symmetric cycle `omega_{1,2} = omega_c -+ dw/2`, `T_{1,2} = T0 -+ dT/2`.
pub fn symmetric_cycle(p: SpectralParams, t0: f64, delta_t: f64, delta_omega: f64) -> Result<CycleSpec> {
    if !(delta_omega < 2.0 * p.omega_c) {
        return Err(Error::invalid("delta_omega", "must be below 2 omega_c"));
    }
    if !(delta_t < 2.0 * t0) {
        return Err(Error::invalid("delta_t", "must be below 2 T0"));
    }
    CycleSpec::new(
        p.omega_c - 0.5 * delta_omega,
        p.omega_c + 0.5 * delta_omega,
        t0 - 0.5 * delta_t,
        t0 + 0.5 * delta_t,
        p,
    )
}

impl RegionMap {
    pub const CSV_HEADER: &'static str = "delta_t,delta_omega,omega1,omega2,t1,t2,status,mode,markov_mode,w_out,q_h,eta";

    pub fn at(&self, i_t: usize, i_w: usize) -> &RegionPoint {
        &self.points[i_t * self.delta_omega.len() + i_w]
    }

    /// Markov engine/refrigerator boundary `Delta omega = omega_c Delta T / T0`.
    pub fn markov_boundary(&self, delta_t: f64) -> f64 {
        self.omega_c * delta_t / self.reference_temperature
    }

    /// Per `Delta T` column, the first `Delta omega` index that is no longer
    /// an engine under `mode`; `None` when the column has no such switch.
    pub fn boundary_rows(&self, mode: impl Fn(&RegionPoint) -> Option<Mode>) -> Vec<Option<usize>> {
        let nw = self.delta_omega.len();
        (0..self.delta_t.len())
            .map(|i| {
                let first = (0..nw).position(|j| mode(self.at(i, j)) != Some(Mode::HeatEngine))?;
                (first > 0).then_some(first)
            })
            .collect()
    }

    pub fn count(&self, mode: impl Fn(&RegionPoint) -> Option<Mode>, target: Mode) -> usize {
        self.points.iter().filter(|p| mode(p) == Some(target)).count()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "# markov_boundary delta_omega = {} * delta_t / {}",
            num(self.omega_c),
            num(self.reference_temperature)
        );
        let _ = writeln!(out, "{}", Self::CSV_HEADER);
        let t0 = self.reference_temperature;
        for p in &self.points {
            let (w, q, eta) = p
                .cell
                .result()
                .map(|r| (r.w_out, r.q_h, r.eta))
                .unwrap_or((f64::NAN, f64::NAN, f64::NAN));
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{},{}",
                num(p.delta_t),
                num(p.delta_omega),
                num(self.omega_c - 0.5 * p.delta_omega),
                num(self.omega_c + 0.5 * p.delta_omega),
                num(t0 - 0.5 * p.delta_t),
                num(t0 + 0.5 * p.delta_t),
                p.cell.status.as_str(),
                p.mode().map_or("unresolved", |m| m.as_str()),
                p.markov_mode.as_str(),
                num(w),
                num(q),
                num(eta)
            );
        }
        out
    }
}

pub fn region_map(spec: &SweepSpec) -> Result<RegionMap> {
    spec.expect(SweepKind::RegionMap)?;
    let p = spec.base.hot.spectral;
    let t0 = spec.reference_temperature;
    let (dts, dws) = (&spec.axes[0].values, &spec.axes[1].values);
    let grid: Vec<(f64, f64)> = dts.iter().flat_map(|&dt| dws.iter().map(move |&dw| (dt, dw))).collect();
    let points = grid
        .par_iter()
        .map(|&(dt, dw)| {
            let cyc = symmetric_cycle(p, t0, dt, dw);
            let markov_mode = cyc
                .as_ref()
                .map(|c| markov_cycle(c).mode)
                .unwrap_or(Mode::Anomalous);
            RegionPoint {
                delta_t: dt,
                delta_omega: dw,
                cell: evaluate(cyc, &spec.opts),
                markov_mode,
            }
        })
        .collect();
    Ok(RegionMap {
        delta_t: dts.clone(),
        delta_omega: dws.clone(),
        omega_c: p.omega_c,
        reference_temperature: t0,
        points,
    })
}

// ------------------------------------------------------------ efficiency map

/// Grid indexed `[i_gamma * n_lambda + i_lambda]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Heatmap {
    pub gamma0: Vec<f64>,
    pub lambda: Vec<f64>,
    pub cells: Vec<Cell>,
}

impl Heatmap {
    pub const CSV_HEADER: &'static str = "gamma0,lambda,status,mode,eta,w_out,q_h";

    pub fn eta(&self, i_g: usize, i_l: usize) -> Option<f64> {
        let c = &self.cells[i_g * self.lambda.len() + i_l];
        match c.status {
            CellStatus::Failed => None,
            _ => c.result().map(|r| r.eta),
        }
    }

    /// Grid index of the largest efficiency.
    pub fn argmax(&self) -> Option<(usize, usize)> {
        let nl = self.lambda.len();
        let mut best: Option<((usize, usize), f64)> = None;
        for i in 0..self.gamma0.len() {
            for j in 0..nl {
                if let Some(e) = self.eta(i, j) {
                    if best.is_none_or(|(_, b)| e > b) {
                        best = Some(((i, j), e));
                    }
                }
            }
        }
        best.map(|(ij, _)| ij)
    }

    /// The argmax lies strictly inside the grid.
    pub fn interior_max(&self) -> bool {
        match self.argmax() {
            Some((i, j)) => i > 0 && j > 0 && i + 1 < self.gamma0.len() && j + 1 < self.lambda.len(),
            None => false,
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        if let Some((i, j)) = self.argmax() {
            let _ = writeln!(
                out,
                "# argmax gamma0={} lambda={} eta={}",
                num(self.gamma0[i]),
                num(self.lambda[j]),
                num(self.eta(i, j).unwrap_or(f64::NAN))
            );
        }
        let _ = writeln!(out, "{}", Self::CSV_HEADER);
        let nl = self.lambda.len();
        for (k, c) in self.cells.iter().enumerate() {
            let (eta, w, q, mode) = c
                .result()
                .map(|r| (r.eta, r.w_out, r.q_h, r.mode.as_str()))
                .unwrap_or((f64::NAN, f64::NAN, f64::NAN, "unresolved"));
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                num(self.gamma0[k / nl]),
                num(self.lambda[k % nl]),
                c.status.as_str(),
                mode,
                num(eta),
                num(w),
                num(q)
            );
        }
        out
    }
}

pub fn eta_heatmap(spec: &SweepSpec) -> Result<Heatmap> {
    spec.expect(SweepKind::EtaHeatmap)?;
    let base = spec.base;
    let p = base.hot.spectral;
    let (gs, ls) = (&spec.axes[0].values, &spec.axes[1].values);
    let grid: Vec<(f64, f64)> = gs.iter().flat_map(|&g| ls.iter().map(move |&l| (g, l))).collect();
    let cells = grid
        .par_iter()
        .map(|&(g, l)| {
            let spec_cell =
                SpectralParams::new(g, l, p.omega_c, p.omega_m).and_then(|q| with_spectral(&base, q));
            evaluate(spec_cell, &spec.opts)
        })
        .collect();
    Ok(Heatmap {
        gamma0: gs.clone(),
        lambda: ls.clone(),
        cells,
    })
}
