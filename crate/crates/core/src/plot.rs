//! Minimal static SVG rendering for sweep output.

use std::fmt::Write as _;

use crate::sweep::{CycleLoop, Heatmap, LoopPoint, RegionMap, SpectralRow, WcScan};
use crate::thermo::Mode;

const W: f64 = 640.0;
const H: f64 = 420.0;
const PAD: f64 = 56.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
    pub dashed: bool,
}

struct Frame {
    x: (f64, f64),
    y: (f64, f64),
}

impl Frame {
    fn fit<'a>(pts: impl Iterator<Item = &'a (f64, f64)>) -> Self {
        let (mut x, mut y) = ((f64::INFINITY, f64::NEG_INFINITY), (f64::INFINITY, f64::NEG_INFINITY));
        for &(a, b) in pts.filter(|(a, b)| a.is_finite() && b.is_finite()) {
            x = (x.0.min(a), x.1.max(a));
            y = (y.0.min(b), y.1.max(b));
        }
        let widen = |r: (f64, f64)| {
            if !r.0.is_finite() {
                (0.0, 1.0)
            } else if r.1 - r.0 < 1e-12 {
                (r.0 - 0.5, r.1 + 0.5)
            } else {
                let m = 0.05 * (r.1 - r.0);
                (r.0 - m, r.1 + m)
            }
        };
        Self { x: widen(x), y: widen(y) }
    }

    fn px(&self, x: f64) -> f64 {
        PAD + (x - self.x.0) / (self.x.1 - self.x.0) * (W - 2.0 * PAD)
    }

    fn py(&self, y: f64) -> f64 {
        H - PAD - (y - self.y.0) / (self.y.1 - self.y.0) * (H - 2.0 * PAD)
    }
}

fn open(out: &mut String, title: &str) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(out, r#"<text x="{}" y="20" text-anchor="middle">{title}</text>"#, W / 2.0);
}

fn axes(out: &mut String, f: &Frame, xlabel: &str, ylabel: &str) {
    let (x0, x1, y0, y1) = (PAD, W - PAD, H - PAD, PAD);
    let _ = writeln!(
        out,
        r#"<path d="M{x0} {y1} L{x0} {y0} L{x1} {y0}" fill="none" stroke="black"/>"#
    );
    for k in 0..=4 {
        let fx = f.x.0 + (f.x.1 - f.x.0) * k as f64 / 4.0;
        let fy = f.y.0 + (f.y.1 - f.y.0) * k as f64 / 4.0;
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
            f.px(fx),
            y0 + 16.0,
            tick(fx)
        );
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"#,
            x0 - 4.0,
            f.py(fy) + 4.0,
            tick(fy)
        );
    }
    let _ = writeln!(out, r#"<text x="{}" y="{}" text-anchor="middle">{xlabel}</text>"#, W / 2.0, H - 12.0);
    let _ = writeln!(
        out,
        r#"<text x="14" y="{}" text-anchor="middle" transform="rotate(-90 14 {})">{ylabel}</text>"#,
        H / 2.0,
        H / 2.0
    );
}

fn tick(v: f64) -> String {
    let s = format!("{v:.3}");
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}

fn polyline(out: &mut String, f: &Frame, pts: &[(f64, f64)], color: &str, dashed: bool, closed: bool) {
    let mut d = String::new();
    let mut pen_up = true;
    for &(x, y) in pts {
        if !(x.is_finite() && y.is_finite()) {
            pen_up = true;
            continue;
        }
        let _ = write!(d, "{}{:.2} {:.2} ", if pen_up { "M" } else { "L" }, f.px(x), f.py(y));
        pen_up = false;
    }
    if closed {
        d.push('Z');
    }
    let dash = if dashed { r#" stroke-dasharray="6 4""# } else { "" };
    let _ = writeln!(out, r#"<path d="{d}" fill="none" stroke="{color}" stroke-width="1.5"{dash}/>"#);
}

fn legend(out: &mut String, labels: &[(&str, &str)]) {
    for (k, (label, color)) in labels.iter().enumerate() {
        let y = PAD + 14.0 * k as f64;
        let _ = writeln!(
            out,
            r#"<rect x="{}" y="{}" width="10" height="10" fill="{color}"/><text x="{}" y="{}">{label}</text>"#,
            W - PAD - 120.0,
            y,
            W - PAD - 106.0,
            y + 9.0
        );
    }
}

/// Line plot with optional vertical markers.
pub fn line_plot(title: &str, xlabel: &str, ylabel: &str, series: &[Series], markers: &[f64]) -> String {
    let f = Frame::fit(series.iter().flat_map(|s| s.points.iter()));
    let mut out = String::new();
    open(&mut out, title);
    axes(&mut out, &f, xlabel, ylabel);
    for &m in markers {
        let x = f.px(m);
        let _ = writeln!(
            out,
            r#"<line x1="{x:.2}" y1="{}" x2="{x:.2}" y2="{}" stroke="gray" stroke-dasharray="2 3"/>"#,
            PAD,
            H - PAD
        );
    }
    let mut labels = Vec::new();
    for (k, s) in series.iter().enumerate() {
        let c = COLORS[k % COLORS.len()];
        polyline(&mut out, &f, &s.points, c, s.dashed, false);
        labels.push((s.label.as_str(), c));
    }
    legend(&mut out, &labels);
    out.push_str("</svg>\n");
    out
}

/// `W_out`, `Q_H` and efficiency against `omega_c`, each with its Markov line.
pub fn wc_scan_svg(scan: &WcScan) -> String {
    let pick = |f: &dyn Fn(&crate::thermo::CycleResult) -> f64| -> Vec<(f64, f64)> {
        scan.rows
            .iter()
            .map(|r| (r.omega_c, r.cell.result().map_or(f64::NAN, f)))
            .collect()
    };
    let flat = |v: f64| -> Vec<(f64, f64)> { scan.rows.iter().map(|r| (r.omega_c, v)).collect() };
    let m = &scan.markov;
    let series = [
        Series { label: "W_out".into(), points: pick(&|r| r.w_out), dashed: false },
        Series { label: "W_out Markov".into(), points: flat(m.w_out), dashed: true },
        Series { label: "eta".into(), points: pick(&|r| r.eta), dashed: false },
        Series { label: "eta Markov".into(), points: flat(m.eta), dashed: true },
        Series { label: "eta_r".into(), points: pick(&|r| r.eta_r), dashed: false },
    ];
    line_plot("omega_c scan", "omega_c", "value", &series, &scan.markers)
}

pub fn spectral_svg(rows: &[SpectralRow], markers: &[f64]) -> String {
    let col = |f: &dyn Fn(&SpectralRow) -> f64| rows.iter().map(|r| (r.omega_c, f(r))).collect();
    let series = [
        Series { label: "J(omega1)".into(), points: col(&|r| r.j1), dashed: false },
        Series { label: "J(omega2)".into(), points: col(&|r| r.j2), dashed: false },
        Series { label: "J'(omega1)".into(), points: col(&|r| r.slope1), dashed: true },
        Series { label: "J'(omega2)".into(), points: col(&|r| r.slope2), dashed: true },
    ];
    line_plot("spectral density at the stroke frequencies", "omega_c", "J, dJ/domega", &series, markers)
}

pub fn loops_svg(loops: &[CycleLoop], markov: &[LoopPoint]) -> String {
    let as_xy = |pts: &[LoopPoint]| pts.iter().map(|p| (p.omega, p.n)).collect::<Vec<_>>();
    let all: Vec<(f64, f64)> = loops
        .iter()
        .flat_map(|l| as_xy(&l.points))
        .chain(as_xy(markov))
        .collect();
    let f = Frame::fit(all.iter());
    let mut out = String::new();
    open(&mut out, "cycle in the (omega, n) plane");
    axes(&mut out, &f, "omega", "n");
    polyline(&mut out, &f, &as_xy(markov), "black", true, true);
    let mut labels = vec![("Markov".to_string(), "black")];
    for (k, l) in loops.iter().enumerate() {
        let c = COLORS[k % COLORS.len()];
        polyline(&mut out, &f, &as_xy(&l.points), c, false, true);
        labels.push((format!("omega_c={}", l.omega_c), c));
    }
    let refs: Vec<(&str, &str)> = labels.iter().map(|(a, b)| (a.as_str(), *b)).collect();
    legend(&mut out, &refs);
    out.push_str("</svg>\n");
    out
}

fn mode_color(m: Option<Mode>) -> &'static str {
    match m {
        Some(Mode::HeatEngine) => "#f4a261",
        Some(Mode::Refrigerator) => "#2a9d8f",
        Some(Mode::Heater) => "#e63946",
        Some(Mode::Anomalous) => "#6d597a",
        None => "#bbbbbb",
    }
}

fn raster(out: &mut String, f: &Frame, xs: &[f64], ys: &[f64], color: impl Fn(usize, usize) -> String) {
    let step = |v: &[f64]| if v.len() > 1 { v[1] - v[0] } else { 1.0 };
    let (dx, dy) = (step(xs), step(ys));
    for (i, &x) in xs.iter().enumerate() {
        for (j, &y) in ys.iter().enumerate() {
            let (x0, x1) = (f.px(x - 0.5 * dx), f.px(x + 0.5 * dx));
            let (y0, y1) = (f.py(y + 0.5 * dy), f.py(y - 0.5 * dy));
            let _ = writeln!(
                out,
                r#"<rect x="{x0:.2}" y="{y0:.2}" width="{:.2}" height="{:.2}" fill="{}"/>"#,
                x1 - x0,
                y1 - y0,
                color(i, j)
            );
        }
    }
}

fn grid_frame(xs: &[f64], ys: &[f64]) -> Frame {
    let half = |v: &[f64]| if v.len() > 1 { 0.5 * (v[1] - v[0]) } else { 0.5 };
    Frame {
        x: (xs[0] - half(xs), xs[xs.len() - 1] + half(xs)),
        y: (ys[0] - half(ys), ys[ys.len() - 1] + half(ys)),
    }
}

/// Categorical raster of operating modes with the Markov boundary overlaid.
pub fn region_svg(map: &RegionMap) -> String {
    let f = grid_frame(&map.delta_t, &map.delta_omega);
    let mut out = String::new();
    open(&mut out, "operating regions");
    raster(&mut out, &f, &map.delta_t, &map.delta_omega, |i, j| {
        mode_color(map.at(i, j).mode()).to_string()
    });
    axes(&mut out, &f, "Delta T", "Delta omega");
    let top = map.delta_omega[map.delta_omega.len() - 1];
    let line: Vec<(f64, f64)> = map
        .delta_t
        .iter()
        .map(|&dt| (dt, map.markov_boundary(dt)))
        .filter(|&(_, w)| w <= top)
        .collect();
    polyline(&mut out, &f, &line, "black", true, false);
    legend(
        &mut out,
        &[
            ("engine", mode_color(Some(Mode::HeatEngine))),
            ("refrigerator", mode_color(Some(Mode::Refrigerator))),
            ("heater", mode_color(Some(Mode::Heater))),
            ("anomalous", mode_color(Some(Mode::Anomalous))),
            ("unresolved", mode_color(None)),
        ],
    );
    out.push_str("</svg>\n");
    out
}

/// Efficiency raster on a white-to-blue scale; the argmax cell is outlined.
pub fn heatmap_svg(map: &Heatmap) -> String {
    let f = grid_frame(&map.gamma0, &map.lambda);
    let top = map.argmax().and_then(|(i, j)| map.eta(i, j)).unwrap_or(1.0).max(1e-300);
    let mut out = String::new();
    open(&mut out, "efficiency");
    raster(&mut out, &f, &map.gamma0, &map.lambda, |i, j| match map.eta(i, j) {
        Some(e) => {
            let s = (e / top).clamp(0.0, 1.0);
            let c = |lo: f64, hi: f64| (lo + (hi - lo) * s).round() as u8;
            format!("#{:02x}{:02x}{:02x}", c(255.0, 8.0), c(255.0, 48.0), c(255.0, 107.0))
        }
        None => "#bbbbbb".to_string(),
    });
    if let Some((i, j)) = map.argmax() {
        let (x, y) = (f.px(map.gamma0[i]), f.py(map.lambda[j]));
        let _ = writeln!(out, r#"<circle cx="{x:.2}" cy="{y:.2}" r="5" fill="none" stroke="red" stroke-width="2"/>"#);
    }
    axes(&mut out, &f, "gamma0", "lambda");
    out.push_str("</svg>\n");
    out
}
