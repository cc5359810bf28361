//! Adaptive Gauss-Kronrod (G10/K21) integration with algebraic maps for
//! infinite endpoints.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

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
    0.0,
];

const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
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

/// Outcome of an adaptive integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureResult {
    pub value: f64,
    pub abs_error_estimate: f64,
    pub subdivisions: usize,
    pub converged: bool,
}

/// Tuning knobs for [`integrate_with`].
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureOptions {
    pub rel_tol: f64,
    /// Absolute error floor; useful when the integral may be tiny or zero.
    pub abs_tol: f64,
    pub max_subdivisions: usize,
    /// Interior breakpoints. Integration is split at each point inside (a, b).
    pub points: Vec<f64>,
    /// Length scale of the algebraic map used on infinite pieces.
    pub scale: f64,
}

impl Default for QuadratureOptions {
    fn default() -> Self {
        QuadratureOptions {
            rel_tol: 1e-10,
            abs_tol: 0.0,
            max_subdivisions: 10_000,
            points: Vec::new(),
            scale: 1.0,
        }
    }
}

impl QuadratureOptions {
    pub fn with_rel_tol(rel_tol: f64) -> Self {
        QuadratureOptions {
            rel_tol,
            ..Default::default()
        }
    }
}

struct RuleEval {
    value: f64,
    error: f64,
    resabs: f64,
}

fn rescale_error(err: f64, resabs: f64, resasc: f64) -> f64 {
    let mut err = err.abs();
    if resasc != 0.0 && err != 0.0 {
        let scale = (200.0 * err / resasc).powf(1.5);
        err = if scale < 1.0 { resasc * scale } else { resasc };
    }
    if resabs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        err = err.max(50.0 * f64::EPSILON * resabs);
    }
    err
}

fn kronrod21<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> RuleEval {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut gauss = 0.0;
    let mut kron = fc * WGK[10];
    let mut resabs = kron.abs();
    let mut fv1 = [0.0; 10];
    let mut fv2 = [0.0; 10];

    for (j, wg) in WG.iter().enumerate() {
        let jtw = 2 * j + 1;
        let x = half * XGK[jtw];
        let f1 = f(center - x);
        let f2 = f(center + x);
        fv1[jtw] = f1;
        fv2[jtw] = f2;
        gauss += wg * (f1 + f2);
        kron += WGK[jtw] * (f1 + f2);
        resabs += WGK[jtw] * (f1.abs() + f2.abs());
    }
    for j in 0..5 {
        let jtwm1 = 2 * j;
        let x = half * XGK[jtwm1];
        let f1 = f(center - x);
        let f2 = f(center + x);
        fv1[jtwm1] = f1;
        fv2[jtwm1] = f2;
        kron += WGK[jtwm1] * (f1 + f2);
        resabs += WGK[jtwm1] * (f1.abs() + f2.abs());
    }

    let mean = 0.5 * kron;
    let mut resasc = WGK[10] * (fc - mean).abs();
    for j in 0..10 {
        resasc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }

    let abs_half = half.abs();
    let resabs = resabs * abs_half;
    let resasc = resasc * abs_half;
    RuleEval {
        value: kron * half,
        error: rescale_error((kron - gauss) * half, resabs, resasc),
        resabs,
    }
}

#[derive(Debug)]
struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
    resabs: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

/// Maps a piece of the real line onto a bounded parameter interval.
#[derive(Debug, Clone, Copy)]
enum Piece {
    Finite(f64, f64),
    /// [a, inf): x = a + s u/(1-u), u in [0, 1)
    Upper(f64),
    /// (-inf, b]: x = b - s u/(1-u), u in [0, 1)
    Lower(f64),
    /// (-inf, inf): x = s u/(1-u^2), u in (-1, 1)
    Whole,
}

fn pieces(a: f64, b: f64, points: &[f64]) -> Vec<Piece> {
    let mut cuts: Vec<f64> = points
        .iter()
        .copied()
        .filter(|p| p.is_finite() && *p > a && *p < b)
        .collect();
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();

    if cuts.is_empty() {
        return vec![match (a.is_finite(), b.is_finite()) {
            (true, true) => Piece::Finite(a, b),
            (true, false) => Piece::Upper(a),
            (false, true) => Piece::Lower(b),
            (false, false) => Piece::Whole,
        }];
    }
    let mut out = Vec::with_capacity(cuts.len() + 1);
    out.push(if a.is_finite() {
        Piece::Finite(a, cuts[0])
    } else {
        Piece::Lower(cuts[0])
    });
    for w in cuts.windows(2) {
        out.push(Piece::Finite(w[0], w[1]));
    }
    let last = *cuts.last().unwrap();
    out.push(if b.is_finite() {
        Piece::Finite(last, b)
    } else {
        Piece::Upper(last)
    });
    out
}

/// Integrates `f` over (a, b); either endpoint may be infinite.
///
/// Returns an error if the subdivision budget runs out before the requested
/// tolerance is met, or if `f` produces a non-finite value.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, rel_tol: f64) -> Result<QuadratureResult> {
    integrate_with(f, a, b, &QuadratureOptions::with_rel_tol(rel_tol))
}

pub fn integrate_with<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, opts: &QuadratureOptions) -> Result<QuadratureResult> {
    let res = integrate_raw(&f, a, b, opts)?;
    if res.converged {
        Ok(res)
    } else {
        Err(Error::Integration(format!(
            "value {:.6e} with error estimate {:.3e} after {} subdivisions on ({a}, {b})",
            res.value, res.abs_error_estimate, res.subdivisions
        )))
    }
}

/// Like [`integrate_with`] but reports non-convergence through the
/// `converged` flag instead of an error.
pub fn integrate_raw<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, opts: &QuadratureOptions) -> Result<QuadratureResult> {
    if a.is_nan() || b.is_nan() {
        return Err(Error::argument("integration bounds must not be NaN"));
    }
    if !(opts.rel_tol > 0.0) {
        return Err(Error::argument("rel_tol must be positive"));
    }
    if a == b {
        return Ok(QuadratureResult {
            value: 0.0,
            abs_error_estimate: 0.0,
            subdivisions: 0,
            converged: true,
        });
    }
    if a > b {
        let r = integrate_raw(f, b, a, opts)?;
        return Ok(QuadratureResult { value: -r.value, ..r });
    }

    let s = opts.scale;
    // One heap of segments per piece; every segment lives on a finite
    // parameter interval of its piece's map.
    let mut segments: Vec<(Piece, BinaryHeap<Segment>)> = Vec::new();

    let eval = |piece: Piece, lo: f64, hi: f64| -> RuleEval {
        match piece {
            Piece::Finite(..) => kronrod21(f, lo, hi),
            Piece::Upper(a0) => kronrod21(
                &|u: f64| {
                    let d = 1.0 - u;
                    s * f(a0 + s * u / d) / (d * d)
                },
                lo,
                hi,
            ),
            Piece::Lower(b0) => kronrod21(
                &|u: f64| {
                    let d = 1.0 - u;
                    s * f(b0 - s * u / d) / (d * d)
                },
                lo,
                hi,
            ),
            Piece::Whole => kronrod21(
                &|u: f64| {
                    let d = 1.0 - u * u;
                    s * f(s * u / d) * (1.0 + u * u) / (d * d)
                },
                lo,
                hi,
            ),
        }
    };
    let bounds = |piece: Piece| -> (f64, f64) {
        match piece {
            Piece::Finite(x, y) => (x, y),
            Piece::Upper(_) | Piece::Lower(_) => (0.0, 1.0),
            Piece::Whole => (-1.0, 1.0),
        }
    };

    let mut subdivisions = 0usize;
    let (mut value, mut error, mut resabs) = (0.0, 0.0, 0.0);
    for piece in pieces(a, b, &opts.points) {
        let (lo, hi) = bounds(piece);
        let r = eval(piece, lo, hi);
        value += r.value;
        error += r.error;
        resabs += r.resabs;
        let mut h = BinaryHeap::new();
        h.push(Segment {
            a: lo,
            b: hi,
            value: r.value,
            error: r.error,
            resabs: r.resabs,
        });
        segments.push((piece, h));
        subdivisions += 1;
    }

    // Segments that cannot be bisected further without hitting roundoff.
    let mut frozen_error = 0.0;
    loop {
        if !value.is_finite() || !error.is_finite() {
            return Err(Error::Integration(format!(
                "integrand produced a non-finite value on ({a}, {b})"
            )));
        }
        let tol = opts.abs_tol.max(opts.rel_tol * value.abs());
        let roundoff = 50.0 * f64::EPSILON * resabs;
        if error <= tol || error <= 2.0 * roundoff {
            return Ok(QuadratureResult {
                value,
                abs_error_estimate: error,
                subdivisions,
                converged: true,
            });
        }
        if subdivisions >= opts.max_subdivisions || frozen_error >= error {
            return Ok(QuadratureResult {
                value,
                abs_error_estimate: error,
                subdivisions,
                converged: false,
            });
        }

        // Bisect the worst segment across all pieces.
        let (idx, _) = segments
            .iter()
            .enumerate()
            .filter_map(|(i, (_, h))| h.peek().map(|s| (i, s.error)))
            .max_by(|x, y| x.1.total_cmp(&y.1))
            .expect("at least one segment");
        let (piece, heap) = &mut segments[idx];
        let piece = *piece;
        let worst = heap.pop().unwrap();
        if worst.error == 0.0 {
            heap.push(worst);
            return Ok(QuadratureResult {
                value,
                abs_error_estimate: error,
                subdivisions,
                converged: false,
            });
        }
        let mid = 0.5 * (worst.a + worst.b);
        if !(mid > worst.a && mid < worst.b)
            || (worst.b - worst.a) <= 1e3 * f64::EPSILON * mid.abs().max(f64::MIN_POSITIVE)
        {
            // Too narrow to split: keep it but stop refining it.
            frozen_error += worst.error;
            heap.push(Segment { error: 0.0, ..worst });
            continue;
        }
        let left = eval(piece, worst.a, mid);
        let right = eval(piece, mid, worst.b);
        value += left.value + right.value - worst.value;
        error += left.error + right.error - worst.error;
        resabs += left.resabs + right.resabs - worst.resabs;
        heap.push(Segment {
            a: worst.a,
            b: mid,
            value: left.value,
            error: left.error,
            resabs: left.resabs,
        });
        heap.push(Segment {
            a: mid,
            b: worst.b,
            value: right.value,
            error: right.error,
            resabs: right.resabs,
        });
        subdivisions += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn gaussian_over_real_line() {
        let r = integrate(|x| (-x * x / 2.0).exp(), f64::NEG_INFINITY, f64::INFINITY, 1e-12).unwrap();
        assert!((r.value - (2.0 * PI).sqrt()).abs() < 1e-11, "{r:?}");
    }

    #[test]
    fn cos_squared_half_angle() {
        let r = integrate(|t| (t / 2.0).cos().powi(2), -PI, PI, 1e-12).unwrap();
        assert!((r.value - PI).abs() < 1e-12);
    }

    #[test]
    fn x_over_sinh() {
        // Classical value: integral of x/sinh(pi x) over (0, inf) is 1/4.
        let f = |x: f64| if x == 0.0 { 1.0 / PI } else { x / (PI * x).sinh() };
        let r = integrate(f, 0.0, f64::INFINITY, 1e-12).unwrap();
        assert!((r.value - 0.25).abs() < 1e-12, "{r:?}");
    }

    #[test]
    fn exact_on_low_degree_polynomials() {
        // G10 and K21 are both exact through degree 19, so one panel suffices.
        for deg in 0..=19 {
            let r = integrate(|x: f64| x.powi(deg), -0.5, 1.5, 1e-14).unwrap();
            let exact = (1.5f64.powi(deg + 1) - (-0.5f64).powi(deg + 1)) / (deg + 1) as f64;
            assert!((r.value - exact).abs() <= 1e-13 * exact.abs().max(1.0), "deg {deg}");
            assert_eq!(r.subdivisions, 1);
        }
    }

    #[test]
    fn reversed_bounds_flip_sign() {
        let r = integrate(|x| x, 1.0, 0.0, 1e-12).unwrap();
        assert!((r.value + 0.5).abs() < 1e-15);
    }

    #[test]
    fn breakpoints_and_scale() {
        let opts = QuadratureOptions {
            rel_tol: 1e-12,
            points: vec![40.0],
            scale: 0.5,
            ..Default::default()
        };
        let r = integrate_with(
            |x: f64| (-(x - 40.0).powi(2) / 0.02).exp(),
            f64::NEG_INFINITY,
            f64::INFINITY,
            &opts,
        )
        .unwrap();
        assert!((r.value - (0.02 * PI).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn budget_exhaustion_is_an_error() {
        let opts = QuadratureOptions {
            rel_tol: 1e-14,
            max_subdivisions: 3,
            ..Default::default()
        };
        let err = integrate_with(|x: f64| (1.0 / x).sin(), 1e-6, 1.0, &opts).unwrap_err();
        assert!(matches!(err, Error::Integration(_)));
    }

    #[test]
    fn converged_error_within_tolerance() {
        let r = integrate(|x: f64| x.sqrt(), 0.0, 1.0, 1e-10).unwrap();
        assert!(r.converged);
        assert!(r.abs_error_estimate <= 1e-10 * r.value.abs().max(1.0));
        assert!((r.value - 2.0 / 3.0).abs() < 1e-10);
    }
}
