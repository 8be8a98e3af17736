//! Globally adaptive Gauss-Kronrod (10/21) quadrature for vector-valued
//! integrands.
//!
//! All components share the same abscissae, so an integrand that is
//! expensive to set up (a spectral weight, a Green function) is evaluated
//! once per node no matter how many integrals are being accumulated.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689_003,
    0.973_906_528_517_171_720_077_964_012_084_452,
    0.930_157_491_355_708_226_001_207_180_059_508,
    0.865_063_366_688_984_510_732_096_688_423_493,
    0.780_817_726_586_416_897_063_717_578_345_042,
    0.679_409_568_299_024_406_234_327_365_114_874,
    0.562_757_134_668_604_683_339_000_099_272_694,
    0.433_395_394_129_247_190_799_265_943_165_784,
    0.294_392_862_701_460_198_131_126_603_103_866,
    0.148_874_338_981_631_210_884_826_001_129_720,
    0.000_000_000_000_000_000_000_000_000_000_000,
];

const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_192,
    0.032_558_162_307_964_727_478_818_972_459_390,
    0.054_755_896_574_351_996_031_381_300_244_580,
    0.075_039_674_810_919_952_767_043_140_916_190,
    0.093_125_454_583_697_605_535_065_465_083_366,
    0.109_387_158_802_297_641_899_210_590_325_805,
    0.123_491_976_262_065_851_077_958_109_831_074,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];

// Gauss weights for the odd-indexed Kronrod nodes (1, 3, 5, 7, 9).
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];

/// Absolute and relative error targets, applied per component.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
}

impl Tolerance {
    pub const fn new(abs: f64, rel: f64) -> Self {
        Self { abs, rel }
    }

    fn target(&self, value: f64) -> f64 {
        self.abs.max(self.rel * value.abs())
    }
}

impl Default for Tolerance {
    fn default() -> Self {
        Self::new(1e-10, 1e-8)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuadResult<const N: usize> {
    pub value: [f64; N],
    pub error: [f64; N],
    pub evaluations: usize,
    pub converged: bool,
}

impl<const N: usize> QuadResult<N> {
    pub fn max_error(&self) -> f64 {
        self.error.iter().cloned().fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone)]
struct Panel<const N: usize> {
    a: f64,
    b: f64,
    value: [f64; N],
    error: [f64; N],
    priority: f64,
}

impl<const N: usize> PartialEq for Panel<N> {
    fn eq(&self, other: &Self) -> bool {
        self.priority == other.priority
    }
}

impl<const N: usize> Eq for Panel<N> {}

impl<const N: usize> PartialOrd for Panel<N> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<const N: usize> Ord for Panel<N> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.priority.total_cmp(&other.priority)
    }
}

/// One 21-point Kronrod panel with the embedded 10-point Gauss estimate.
pub fn gk21<const N: usize, F>(f: &mut F, a: f64, b: f64) -> ([f64; N], [f64; N])
where
    F: FnMut(f64) -> [f64; N],
{
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kron = [0.0; N];
    let mut gauss = [0.0; N];
    for i in 0..N {
        kron[i] = WGK[10] * fc[i];
    }
    for (j, &x) in XGK.iter().enumerate().take(10) {
        let dx = half * x;
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        for i in 0..N {
            let s = f1[i] + f2[i];
            kron[i] += WGK[j] * s;
            if j % 2 == 1 {
                gauss[i] += WG[j / 2] * s;
            }
        }
    }
    let mut value = [0.0; N];
    let mut error = [0.0; N];
    for i in 0..N {
        value[i] = kron[i] * half;
        error[i] = ((kron[i] - gauss[i]) * half).abs();
    }
    (value, error)
}

/// Integrates `f` over the closed interval spanned by `breakpoints`
/// (sorted, at least two entries), bisecting the worst panel until every
/// component meets `tol` or `max_evals` is exhausted.
pub fn integrate<const N: usize, F>(
    mut f: F,
    breakpoints: &[f64],
    tol: Tolerance,
    max_evals: usize,
) -> QuadResult<N>
where
    F: FnMut(f64) -> [f64; N],
{
    assert!(breakpoints.len() >= 2, "need at least one panel");
    let mut heap = BinaryHeap::new();
    let mut evaluations = 0;
    let mut total = [0.0; N];
    let mut total_err = [0.0; N];

    let push = |heap: &mut BinaryHeap<Panel<N>>, a: f64, b: f64, v: [f64; N], e: [f64; N]| {
        let priority = e.iter().cloned().fold(0.0, f64::max);
        heap.push(Panel {
            a,
            b,
            value: v,
            error: e,
            priority,
        });
    };

    for w in breakpoints.windows(2) {
        if w[1] <= w[0] {
            continue;
        }
        let (v, e) = gk21(&mut f, w[0], w[1]);
        evaluations += 21;
        for i in 0..N {
            total[i] += v[i];
            total_err[i] += e[i];
        }
        push(&mut heap, w[0], w[1], v, e);
    }

    let done = |total: &[f64; N], err: &[f64; N]| (0..N).all(|i| err[i] <= tol.target(total[i]));

    let mut converged = done(&total, &total_err);
    while !converged && evaluations + 42 <= max_evals {
        let Some(worst) = heap.pop() else { break };
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // Panel cannot be split further in floating point.
            push(&mut heap, worst.a, worst.b, worst.value, [0.0; N]);
            continue;
        }
        let (v1, e1) = gk21(&mut f, worst.a, mid);
        let (v2, e2) = gk21(&mut f, mid, worst.b);
        evaluations += 42;
        for i in 0..N {
            total[i] += v1[i] + v2[i] - worst.value[i];
            total_err[i] += e1[i] + e2[i] - worst.error[i];
        }
        push(&mut heap, worst.a, mid, v1, e1);
        push(&mut heap, mid, worst.b, v2, e2);
        converged = done(&total, &total_err);
    }

    // Re-sum from panels to shed accumulated rounding in the running totals.
    let mut value = [0.0; N];
    let mut error = [0.0; N];
    for p in heap.iter() {
        for i in 0..N {
            value[i] += p.value[i];
            error[i] += p.error[i];
        }
    }
    QuadResult {
        value,
        error,
        evaluations,
        converged,
    }
}

/// Sorts, deduplicates and clips candidate breakpoints to `[lo, hi]`.
pub fn breakpoints(lo: f64, hi: f64, extra: impl IntoIterator<Item = f64>) -> Vec<f64> {
    let mut pts: Vec<f64> = std::iter::once(lo)
        .chain(std::iter::once(hi))
        .chain(extra.into_iter().filter(|x| x.is_finite() && *x > lo && *x < hi))
        .collect();
    pts.sort_by(f64::total_cmp);
    pts.dedup_by(|a, b| (*a - *b).abs() <= 1e-14 * b.abs().max(1.0));
    pts
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomials_are_exact_on_one_panel() {
        // Kronrod 21 integrates degree 31 exactly.
        let r = integrate(|x| [x.powi(20), 3.0 * x * x], &[0.0, 1.0], Tolerance::new(1e-15, 1e-15), 21);
        assert!((r.value[0] - 1.0 / 21.0).abs() < 1e-15);
        assert!((r.value[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn sharp_lorentzian_is_resolved_with_breakpoints() {
        let w = 1e-5;
        let c = 3.0;
        let bp = breakpoints(0.0, 10.0, [c - 10.0 * w, c, c + 10.0 * w]);
        let r = integrate(
            |x| [w / ((x - c).powi(2) + w * w)],
            &bp,
            Tolerance::new(1e-12, 1e-12),
            200_000,
        );
        let exact = (7.0 / w).atan() + (3.0 / w).atan();
        assert!(r.converged);
        assert!((r.value[0] - exact).abs() < 1e-10, "{} vs {}", r.value[0], exact);
    }

    #[test]
    fn oscillatory_integrand() {
        let t = 200.0;
        let r = integrate(|x| [(t * x).cos()], &[0.0, 3.0], Tolerance::new(1e-13, 1e-12), 1_000_000);
        assert!(r.converged);
        assert!((r.value[0] - (3.0 * t).sin() / t).abs() < 1e-12);
    }

    #[test]
    fn breakpoints_are_clipped_and_sorted() {
        let bp = breakpoints(0.0, 5.0, [7.0, 2.0, -1.0, 2.0, f64::NAN, 1.0]);
        assert_eq!(bp, vec![0.0, 1.0, 2.0, 5.0]);
    }
}
