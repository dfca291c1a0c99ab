//! Geometry of the cone collar and estimates of the trace constant.
//!
//! The truncated cone is `{|xi'| = xi_n, 1 < xi_n < 2}`; the collar is its
//! open `delta`-neighbourhood. Everything is rotation invariant in `xi'`, so
//! distances reduce to the meridian half-plane `(r, xi_n) = (|xi'|, xi_n)`
//! where the cone is the segment from `(1, 1)` to `(2, 2)`.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{arg, Error, Result};
use crate::field::{Grid, Spectrum};
use crate::fit::{self, FitModel, ScalingFit};
use crate::operators::check_collar_resolution;
use crate::quad;
use crate::rng;
use crate::special::{bessel_j1, gamma, sphere_area};
use crate::weights::{weight_cells, weighted_norm_with, WeightParams};
use crate::Complex64;

/// Distance from `(r, xi_n)` to the meridian segment.
pub fn meridian_dist(r: f64, xn: f64) -> f64 {
    let s = (0.5 * (r + xn)).clamp(1.0, 2.0);
    (r - s).hypot(xn - s)
}

/// Euclidean distance from `xi` to the truncated cone.
pub fn dist_to_cone(xi: &[f64]) -> f64 {
    let (xn, rest) = xi.split_last().expect("empty point");
    let r = rest.iter().map(|v| v * v).sum::<f64>().sqrt();
    meridian_dist(r, *xn)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConeCollar {
    pub delta: f64,
}

impl ConeCollar {
    pub fn new(delta: f64) -> Result<ConeCollar> {
        if !(delta > 0.0 && delta <= 0.25) {
            return arg(format!("collar width must lie in (0, 1/4], got {delta}"));
        }
        Ok(ConeCollar { delta })
    }

    pub fn contains(&self, xi: &[f64]) -> bool {
        dist_to_cone(xi) < self.delta
    }

    /// The heights `xi_n` with `(r, xi_n)` in the collar. The collar is
    /// convex in the meridian plane, so this is one open interval.
    pub fn height_interval(&self, r: f64) -> Option<(f64, f64)> {
        let d = self.delta;
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        // slab around the segment, between the two end normals
        let a = (r - std::f64::consts::SQRT_2 * d).max(2.0 - r);
        let b = (r + std::f64::consts::SQRT_2 * d).min(4.0 - r);
        if a < b {
            lo = a;
            hi = b;
        }
        for c in [1.0, 2.0] {
            let q = d * d - (r - c) * (r - c);
            if q > 0.0 {
                let h = q.sqrt();
                lo = lo.min(c - h);
                hi = hi.max(c + h);
            }
        }
        (lo < hi).then_some((lo, hi))
    }

    /// Points of the collar spread along the cone and across it, with extra
    /// points near the collar boundary. Coordinates `(r, 0, .., 0, xi_n)`.
    pub fn candidates(&self, n: usize) -> Vec<Vec<f64>> {
        let mut out = Vec::new();
        for c in [1.0, 1.25, 1.5, 1.75, 2.0] {
            for nu in [0.0, -0.5, 0.5, -0.9, 0.9] {
                let off = nu * self.delta / std::f64::consts::SQRT_2;
                let mut x = vec![0.0; n];
                x[0] = c + off;
                x[n - 1] = c - off;
                out.push(x);
            }
        }
        out
    }
}

/// Radial shells of `|z'|` used to stratify the Schur integral: the core
/// `[0, delta]`, rings `[l delta, (l+1) delta]` for `1 <= l <= 1/(1000 delta)`,
/// and everything beyond.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Shell {
    Core,
    Ring(u32),
    Far,
}

/// A shell together with a height band `|z_n| in [(k-1) delta, k delta]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StratumIndex {
    pub shell: Shell,
    pub band: u32,
}

impl Shell {
    pub fn last_ring(delta: f64) -> u32 {
        (1.0 / (1000.0 * delta)).floor() as u32
    }

    fn bounds(self, delta: f64, outer: f64) -> (f64, f64) {
        match self {
            Shell::Core => (0.0, delta),
            Shell::Ring(l) => (l as f64 * delta, (l + 1) as f64 * delta),
            Shell::Far => ((Shell::last_ring(delta) + 1) as f64 * delta, outer),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub stderr: f64,
}

impl Estimate {
    pub fn rel_err(&self) -> f64 {
        if self.value == 0.0 {
            0.0
        } else {
            self.stderr / self.value.abs()
        }
    }

    fn sum(parts: &[Estimate]) -> Estimate {
        let value = parts.iter().map(|e| e.value).sum();
        let stderr = parts.iter().map(|e| e.stderr * e.stderr).sum::<f64>().sqrt();
        Estimate { value, stderr }
    }
}

/// Sample budget and master seed of a Monte-Carlo run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McSpec {
    pub samples: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchurEstimate {
    pub total: Estimate,
    pub strata: Vec<(Shell, Estimate)>,
}

const CHUNK: usize = 1 << 14;

/// `s` with density proportional to `s^{a-1}` on `[lo, hi]`, from `u` in `[0, 1)`.
fn power_draw(a: f64, lo: f64, hi: f64, u: f64) -> f64 {
    let (p, q) = (lo.powf(a), hi.powf(a));
    (p + u * (q - p)).powf(1.0 / a)
}

fn power_mass(a: f64, lo: f64, hi: f64) -> f64 {
    (hi.powf(a) - lo.powf(a)) / a
}

/// Uniform direction on the unit sphere of `R^d`.
fn direction<R: Rng>(r: &mut R, d: usize, out: &mut [f64]) {
    if d == 1 {
        out[0] = if r.gen::<bool>() { 1.0 } else { -1.0 };
        return;
    }
    loop {
        let mut s = 0.0;
        for v in out.iter_mut() {
            *v = rng::normal(r);
            s += *v * *v;
        }
        if s > 1e-300 {
            let k = s.sqrt().recip();
            out.iter_mut().for_each(|v| *v *= k);
            return;
        }
    }
}

/// `int_lo^hi |s|^{b-1} ds` through the antiderivative `sgn(s)|s|^b / b`.
fn height_integral(b: f64, lo: f64, hi: f64) -> f64 {
    let f = |s: f64| s.signum() * s.abs().powf(b) / b;
    f(hi) - f(lo)
}

/// Monte-Carlo integral of `|z'|^{a-(n-1)} |z_n|^{b-1}` over the translated
/// collar `collar - x`, restricted to `lo <= |z'| <= hi`. The `z_n` integral
/// is exact; `z' = s theta` with `s ~ s^{a-1}` and `theta` uniform.
fn shell_integral(
    collar: &ConeCollar,
    x: &[f64],
    a: f64,
    b: f64,
    (lo, hi): (f64, f64),
    samples: usize,
    seed: u64,
    label: u64,
) -> Estimate {
    let n = x.len();
    let d = n - 1;
    if hi <= lo || samples == 0 {
        return Estimate { value: 0.0, stderr: 0.0 };
    }
    let scale = sphere_area(d) * power_mass(a, lo, hi);
    let chunks = samples.div_ceil(CHUNK);
    let sums: Vec<(f64, f64, usize)> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let count = CHUNK.min(samples - c * CHUNK);
            let mut r = rng::stream(seed, rng::stream_id("schur", (label << 32) | c as u64));
            let mut theta = vec![0.0; d];
            let (mut s1, mut s2) = (0.0, 0.0);
            for _ in 0..count {
                let s = power_draw(a, lo, hi, r.gen());
                direction(&mut r, d, &mut theta);
                let rad = x[..d]
                    .iter()
                    .zip(&theta)
                    .map(|(xi, t)| (xi + s * t).powi(2))
                    .sum::<f64>()
                    .sqrt();
                let j = match collar.height_interval(rad) {
                    Some((h0, h1)) => height_integral(b, h0 - x[d], h1 - x[d]),
                    None => 0.0,
                };
                s1 += j;
                s2 += j * j;
            }
            (s1, s2, count)
        })
        .collect();
    let (mut s1, mut s2, mut m) = (0.0, 0.0, 0usize);
    for (a1, a2, c) in sums {
        s1 += a1;
        s2 += a2;
        m += c;
    }
    let mean = s1 / m as f64;
    let var = (s2 / m as f64 - mean * mean).max(0.0);
    Estimate { value: scale * mean, stderr: scale * (var / m as f64).sqrt() }
}

fn outer_radius(collar: &ConeCollar, x: &[f64]) -> f64 {
    let d = x.len() - 1;
    let xr = x[..d].iter().map(|v| v * v).sum::<f64>().sqrt();
    xr + 2.0 + 2.0 * collar.delta
}

fn check_point(collar: &ConeCollar, x: &[f64]) -> Result<()> {
    if x.len() < 2 {
        return arg("points need at least two coordinates");
    }
    if !collar.contains(x) {
        return Err(Error::Geometry(format!(
            "point at distance {} is outside the collar of width {}",
            dist_to_cone(x),
            collar.delta
        )));
    }
    Ok(())
}

fn schur_core(collar: &ConeCollar, x: &[f64], a: f64, b: f64, mc: &McSpec) -> Result<SchurEstimate> {
    check_point(collar, x)?;
    let delta = collar.delta;
    let outer = outer_radius(collar, x);
    let rings = Shell::last_ring(delta);
    let mut shells = vec![Shell::Core];
    shells.extend((1..=rings).map(Shell::Ring));
    shells.push(Shell::Far);
    // a fifth of the budget to the core, a fifth to the rings, the rest far
    let core_n = mc.samples / 5;
    let ring_n = if rings > 0 { mc.samples / 5 / rings as usize } else { 0 };
    let far_n = mc.samples - core_n - ring_n * rings as usize;
    let strata: Vec<(Shell, Estimate)> = shells
        .iter()
        .enumerate()
        .map(|(i, &sh)| {
            let count = match sh {
                Shell::Core => core_n,
                Shell::Ring(_) => ring_n,
                Shell::Far => far_n,
            };
            (sh, shell_integral(collar, x, a, b, sh.bounds(delta, outer), count, mc.seed, i as u64))
        })
        .collect();
    let parts: Vec<Estimate> = strata.iter().map(|s| s.1).collect();
    Ok(SchurEstimate { total: Estimate::sum(&parts), strata })
}

/// Stratified estimate of `int_{collar - x} |z'|^{alpha-(n-1)} |z_n|^{beta-1} dz`.
pub fn schur_integral(x: &[f64], w: &WeightParams, delta: f64, mc: &McSpec) -> Result<SchurEstimate> {
    let n = x.len();
    if !(w.alpha > 0.0 && w.alpha < (n - 1) as f64 && w.beta > 0.0 && w.beta < 1.0) {
        return arg(format!(
            "Schur integrand needs 0 < alpha < {} and 0 < beta < 1, got ({}, {})",
            n - 1,
            w.alpha,
            w.beta
        ));
    }
    let collar = ConeCollar::new(delta)?;
    schur_core(&collar, x, w.alpha, w.beta, mc)
}

/// The same integral without stratification, one importance-sampled pass
/// over all of `|z'|`.
pub fn schur_integral_plain(x: &[f64], w: &WeightParams, delta: f64, mc: &McSpec) -> Result<Estimate> {
    let collar = ConeCollar::new(delta)?;
    check_point(&collar, x)?;
    let outer = outer_radius(&collar, x);
    Ok(shell_integral(&collar, x, w.alpha, w.beta, (0.0, outer), mc.samples, mc.seed, 1 << 20))
}

/// Volume of the collar by the Schur sampler with a constant integrand.
pub fn collar_volume(x: &[f64], delta: f64, mc: &McSpec) -> Result<Estimate> {
    let collar = ConeCollar::new(delta)?;
    let n = x.len();
    Ok(schur_core(&collar, x, (n - 1) as f64, 1.0, mc)?.total)
}

/// Area of the truncated cone in `R^n`.
pub fn cone_area(n: usize) -> f64 {
    // slant length sqrt 2 times the (n-2)-sphere area integrated over r in [1, 2]
    let d = (n - 1) as f64;
    std::f64::consts::SQRT_2 * sphere_area(n - 1) * (2f64.powf(d) - 1.0) / d
}

/// Constant `c` with `(|x'|^{-alpha} |x_n|^{-beta})^ = c |z'|^{alpha-(n-1)} |z_n|^{beta-1}`,
/// which converts the Schur integral of the kernel into a bound for the
/// weighted quadratic form.
pub fn kernel_constant(n: usize, w: &WeightParams) -> f64 {
    let riesz = |d: f64, a: f64| {
        if a == 0.0 {
            // the transform of 1 is a delta; no finite constant
            return f64::INFINITY;
        }
        std::f64::consts::PI.powf(a - d / 2.0) * gamma((d - a) / 2.0) / gamma(a / 2.0)
    };
    riesz((n - 1) as f64, w.alpha) * riesz(1.0, w.beta)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceBound {
    pub value: f64,
    pub stderr: f64,
    pub at: Vec<f64>,
}

/// Largest Schur integral over the candidate points of the collar. All
/// candidates get a pilot run of a tenth of the budget; the best three are
/// rerun at the full budget.
pub fn trace_constant_upper(delta: f64, w: &WeightParams, n: usize, mc: &McSpec) -> Result<TraceBound> {
    w.check_trace_window(n)?;
    let collar = ConeCollar::new(delta)?;
    let cands = collar.candidates(n);
    let pilot = McSpec { samples: (mc.samples / 10).max(CHUNK), seed: mc.seed ^ 0x5eed };
    let mut scored = Vec::with_capacity(cands.len());
    for x in &cands {
        scored.push(schur_integral(x, w, delta, &pilot)?.total.value);
    }
    let mut order: Vec<usize> = (0..cands.len()).collect();
    order.sort_by(|&i, &j| scored[j].total_cmp(&scored[i]));
    let mut best: Option<TraceBound> = None;
    for &i in order.iter().take(3) {
        let e = schur_integral(&cands[i], w, delta, mc)?.total;
        if best.as_ref().is_none_or(|b| e.value > b.value) {
            best = Some(TraceBound { value: e.value, stderr: e.stderr, at: cands[i].clone() });
        }
    }
    Ok(best.expect("at least one candidate"))
}

/// Measure of `{theta in S^{d-1} : lo <= theta_1 <= hi}`.
pub fn cap_measure(d: usize, lo: f64, hi: f64) -> f64 {
    let (lo, hi) = (lo.max(-1.0), hi.min(1.0));
    if lo >= hi {
        return 0.0;
    }
    match d {
        1 => [-1.0, 1.0].iter().filter(|&&c| c >= lo && c <= hi).count() as f64,
        2 => 2.0 * (lo.acos() - hi.acos()),
        3 => 2.0 * std::f64::consts::PI * (hi - lo),
        _ => {
            let k = (d - 2) as i32;
            sphere_area(d - 1) * quad::composite_gl(|p: f64| p.sin().powi(k), hi.acos(), lo.acos(), 8, 16)
        }
    }
}

/// Angular measure of `{theta : lo < |x + s theta| < hi}` for `|x| = rho`.
fn annulus_hit(d: usize, rho: f64, s: f64, lo: f64, hi: f64) -> f64 {
    let c = |t: f64| (t * t - rho * rho - s * s) / (2.0 * rho * s);
    cap_measure(d, c(lo), c(hi))
}

/// Schur integral of `|z|^{alpha-d}` over the collar of the unit sphere in
/// `R^d` (`d = n - 1`) translated by a point at radius `rho`, by quadrature
/// in `v = s^alpha` between the radii where the angular set changes shape.
pub fn sphere_schur(rho: f64, alpha: f64, delta: f64, d: usize) -> f64 {
    let (lo, hi) = (1.0 - delta, 1.0 + delta);
    let mut breaks = vec![0.0, (rho - lo).abs(), (rho - hi).abs(), rho + lo, rho + hi];
    breaks.retain(|&b| b >= 0.0);
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();
    let f = |v: f64| {
        let s = v.powf(1.0 / alpha);
        if s == 0.0 {
            return 0.0;
        }
        annulus_hit(d, rho, s, lo, hi) / alpha
    };
    breaks
        .windows(2)
        .map(|w| {
            let (a, b) = (w[0].powf(alpha), w[1].powf(alpha));
            if b <= a {
                0.0
            } else {
                // square-root edges at both ends: geometric panels both ways
                let m = 0.5 * (a + b);
                quad::singular_left(&f, a, m, 1e-13 * (b - a)) + quad::singular_left(&|v| f(a + b - v), a, m, 1e-13 * (b - a))
            }
        })
        .sum()
}

/// Sphere-collar constant: the largest `sphere_schur` over radii across the
/// collar.
pub fn sphere_trace(delta: f64, alpha: f64, n: usize) -> Result<f64> {
    if n < 2 || !(alpha > 0.0 && alpha < (n - 1) as f64) {
        return arg(format!("sphere trace needs 0 < alpha < {}, got {alpha}", n.max(2) - 1));
    }
    ConeCollar::new(delta)?;
    let d = n - 1;
    Ok([0.0, -0.5, 0.5, -0.9, 0.9]
        .iter()
        .map(|nu| sphere_schur(1.0 + nu * delta, alpha, delta, d))
        .fold(0.0, f64::max))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepFit {
    pub points: Vec<(f64, f64)>,
    pub power: ScalingFit,
    pub log: ScalingFit,
    pub preferred: FitModel,
}

impl SweepFit {
    pub fn from_points(points: Vec<(f64, f64)>) -> Result<SweepFit> {
        let (power, log, preferred) = fit::compare_models(&points)?;
        Ok(SweepFit { points, power, log, preferred })
    }
}

pub fn sphere_trace_sweep(deltas: &[f64], alpha: f64, n: usize) -> Result<SweepFit> {
    let points = deltas
        .iter()
        .map(|&d| Ok((d, sphere_trace(d, alpha, n)?)))
        .collect::<Result<Vec<_>>>()?;
    SweepFit::from_points(points)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntervalTrace {
    pub closed_form: f64,
    pub quadrature: f64,
    /// Largest row integral over a scan of base points across the interval.
    pub scan_sup: f64,
}

/// `sup_x int_{-delta}^{delta} |x - y|^{beta-1} dy` over `x` in the interval.
pub fn interval_trace_sup(delta: f64, beta: f64) -> Result<IntervalTrace> {
    if !(beta > 0.0 && beta < 1.0) {
        return arg(format!("beta must lie in (0, 1), got {beta}"));
    }
    if !(delta > 0.0) {
        return arg(format!("delta must be positive, got {delta}"));
    }
    let closed_form = 2.0 / beta * delta.powf(beta);
    let kernel = |y: f64| y.powf(beta - 1.0);
    let quadrature = 2.0 * quad::singular_left(&kernel, 0.0, delta, 1e-14 * delta.powf(beta));
    let scan_sup = (0..=64)
        .map(|i| {
            let x = -delta + 2.0 * delta * i as f64 / 64.0;
            height_integral(beta, -delta - x, delta - x)
        })
        .fold(0.0, f64::max);
    Ok(IntervalTrace { closed_form, quadrature, scan_sup })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SliceVolume {
    pub value: f64,
    pub stderr: f64,
    /// `l^{(n-2)/2} (l+10-k)^{(n-4)/2} delta^{n-1}`
    pub bound: f64,
    pub empty: bool,
}

/// `(n-1)`-volume of the set of `z'` with `l delta <= |z'| <= (l+1) delta` and
/// `||x' + z'| - (x_n + z_n)| < delta`, at the band centres
/// `z_n = +-(k - 1/2) delta` (the larger of the two). `x` lies on the cone.
pub fn slice_volume_mc(l: u32, k: u32, delta: f64, x: &[f64], samples: usize, seed: u64) -> Result<SliceVolume> {
    let n = x.len();
    if n < 3 {
        return arg("slice volumes need n >= 3");
    }
    if l < 1 || (l as f64) > 1.0 / (1000.0 * delta) {
        return arg(format!("ring index {l} outside [1, 1/(1000 delta)] for delta = {delta}"));
    }
    if k < 1 || k > l + 5 {
        return arg(format!("band index {k} outside [1, {}]", l + 5));
    }
    if samples == 0 {
        return arg("need at least one sample");
    }
    let d = n - 1;
    let rho = x[..d].iter().map(|v| v * v).sum::<f64>().sqrt();
    if (rho - x[d]).abs() > 1e-12 * rho.max(1.0) {
        return Err(Error::Geometry("slice volumes are taken at points of the cone".into()));
    }
    let (s0, s1) = (l as f64 * delta, (l + 1) as f64 * delta);
    let zc = (k as f64 - 0.5) * delta;
    let mut best = Estimate { value: 0.0, stderr: 0.0 };
    for (sign, tag) in [(1.0, 0u64), (-1.0, 1)] {
        let target = x[d] + sign * zc;
        let mut r = rng::stream(seed, rng::stream_id("slice", ((l as u64) << 40) | ((k as u64) << 8) | tag));
        let (mut m1, mut m2) = (0.0, 0.0);
        for _ in 0..samples {
            let s = s0 + (s1 - s0) * r.gen::<f64>();
            let v = s.powi(d as i32 - 1) * annulus_hit(d, rho, s, target - delta, target + delta) * (s1 - s0);
            m1 += v;
            m2 += v * v;
        }
        let mean = m1 / samples as f64;
        let se = ((m2 / samples as f64 - mean * mean).max(0.0) / samples as f64).sqrt();
        if mean > best.value {
            best = Estimate { value: mean, stderr: se };
        }
    }
    let (lf, kf, nf) = (l as f64, k as f64, n as f64);
    let bound = lf.powf((nf - 2.0) / 2.0) * (lf + 10.0 - kf).powf((nf - 4.0) / 2.0) * delta.powf(nf - 1.0);
    Ok(SliceVolume { value: best.value, stderr: best.stderr, bound, empty: best.value == 0.0 })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LowerBound {
    /// Largest ratio over the test family.
    pub value: f64,
    /// Ratio per test function; entry 0 is the collar indicator.
    pub ratios: Vec<f64>,
}

impl LowerBound {
    fn from_ratios(ratios: Vec<f64>) -> LowerBound {
        LowerBound { value: ratios.iter().cloned().fold(0.0, f64::max), ratios }
    }
}

/// Number of random collar-supported test functions next to the indicator.
pub const RANDOM_TESTS: usize = 10;

/// Extent of the `|x'|` integral in the radial lower bound, in box lengths.
pub const RADIAL_REACH: f64 = 2.0;

/// `||g^||^2_{L^2(w)} / ||g||^2` for a spectrum `g`.
pub fn lower_ratio(g: &Spectrum, cells: &[f64]) -> f64 {
    let num = weighted_norm_with(&g.inverse(), cells).powi(2);
    num / g.l2_norm().powi(2)
}

fn test_coefficient(r: &mut rng::Stream, which: usize) -> Complex64 {
    if which == 0 {
        Complex64::new(1.0, 0.0)
    } else {
        Complex64::new(rng::normal(r), rng::normal(r))
    }
}

/// Lower-bound proxy for the trace constant: test spectra supported on the
/// lattice points of the collar, the indicator and [`RANDOM_TESTS`] random
/// ones, measured by `||g^||^2_{L^2(w)} / ||g||^2`.
pub fn trace_constant_lower(delta: f64, w: &WeightParams, grid: &Grid, seed: u64) -> Result<LowerBound> {
    let collar = ConeCollar::new(delta)?;
    w.check_trace_window(grid.dim())?;
    if grid.dim() < 2 {
        return arg("the cone needs n >= 2");
    }
    check_collar_resolution(grid, delta)?;
    let reach = 2.0 + delta;
    if grid.nyquist() < reach {
        return Err(Error::Geometry(format!(
            "collar reaches {reach}, beyond Nyquist {}; need N >= {}",
            grid.nyquist(),
            ((2.0 * reach * grid.box_length()).ceil() as usize).next_power_of_two()
        )));
    }
    let cells = weight_cells(grid, w)?;
    let mut ratios = Vec::with_capacity(RANDOM_TESTS + 1);
    for which in 0..=RANDOM_TESTS {
        let mut r = rng::stream(seed, rng::stream_id("lower-grid", which as u64));
        let g = Spectrum::from_fn(*grid, |xi| {
            if collar.contains(xi) {
                test_coefficient(&mut r, which)
            } else {
                Complex64::new(0.0, 0.0)
            }
        });
        ratios.push(lower_ratio(&g, &cells));
    }
    Ok(LowerBound::from_ratios(ratios))
}

/// [`trace_constant_lower`] for `n = 3` restricted to test functions that
/// are radial in `xi'`. The `xi_n` variable stays on the lattice of a box of
/// side `len`; in `r = |xi'|` the test functions are constant on bins of
/// width `1/len`. The `x'` side is a Hankel transform, evaluated in closed
/// form bin by bin, and integrated over `|x'| <= RADIAL_REACH * len`.
pub fn trace_constant_lower_radial(delta: f64, w: &WeightParams, len: f64, seed: u64) -> Result<LowerBound> {
    let collar = ConeCollar::new(delta)?;
    w.check_trace_window(3)?;
    if 1.0 / len > delta / 8.0 {
        return Err(Error::Resolution(format!(
            "frequency step {} exceeds delta/8 = {}; need L >= {}",
            1.0 / len,
            delta / 8.0,
            8.0 / delta
        )));
    }
    let step = 1.0 / len;
    // r bins [j, j+1) / len and heights k / len covering the collar
    let j0 = ((1.0 - 2.0 * delta) * len).floor() as i64;
    let j1 = ((2.0 + 2.0 * delta) * len).ceil() as i64;
    let k0 = ((1.0 - delta) * len).floor() as i64;
    let k1 = ((2.0 + delta) * len).ceil() as i64;
    let bins = (j1 - j0) as usize;
    let heights = (k1 - k0 + 1) as usize;
    // demodulate xi_n by a lattice shift; |f|^2 does not change
    let shift = ((k0 + k1) / 2) as f64 * step;
    let band = (k1 - k0) as f64 * step;
    let nx = ((2.0 * band * len).ceil() as usize).next_power_of_two().max(8);
    let xgrid = Grid::cell_centered(1, nx, len)?;
    let xcells = weight_cells(&xgrid, &WeightParams::new(0.0, w.beta))?;

    // each height meets the collar in a run of bins
    let rows: Vec<(usize, usize)> = (0..heights)
        .map(|kk| {
            let xn = (k0 + kk as i64) as f64 * step;
            let inside: Vec<usize> = (0..bins)
                .filter(|&jj| {
                    let rc = (j0 as f64 + jj as f64 + 0.5) * step;
                    collar.height_interval(rc).is_some_and(|(lo, hi)| xn > lo && xn < hi)
                })
                .collect();
            match (inside.first(), inside.last()) {
                (Some(&a), Some(&b)) => (a, b + 1),
                _ => (0, 0),
            }
        })
        .collect();
    let mut tests = Vec::with_capacity(RANDOM_TESTS + 1);
    let mut norms = Vec::with_capacity(RANDOM_TESTS + 1);
    for which in 0..=RANDOM_TESTS {
        let mut r = rng::stream(seed, rng::stream_id("lower-radial", which as u64));
        let mut c = vec![Complex64::new(0.0, 0.0); heights * bins];
        let mut norm = 0.0;
        for (kk, &(a, b)) in rows.iter().enumerate() {
            for jj in a..b {
                let (ra, rb) = ((j0 + jj as i64) as f64 * step, (j0 + jj as i64 + 1) as f64 * step);
                let v = test_coefficient(&mut r, which);
                norm += v.norm_sqr() * std::f64::consts::PI * (rb * rb - ra * ra) * step;
                c[kk * bins + jj] = v;
            }
        }
        tests.push(c);
        norms.push(norm);
    }

    // rho nodes: geometric panels toward 0 (the weight rho^{1-alpha}), then
    // panels of width 1/4 up to `RADIAL_REACH * len`
    let (gx, gw) = quad::legendre_rule(16);
    let mut panels = Vec::new();
    let mut hi = 0.25;
    for _ in 0..60 {
        panels.push((0.5 * hi, hi));
        hi *= 0.5;
    }
    let far = (4.0 * RADIAL_REACH * len).ceil() as usize;
    for i in 1..far {
        panels.push((0.25 * i as f64, 0.25 * (i + 1) as f64));
    }
    let nodes: Vec<(f64, f64)> = panels
        .iter()
        .flat_map(|&(a, b)| {
            let (c, h) = (0.5 * (a + b), 0.5 * (b - a));
            gx.iter().zip(gw.iter()).map(move |(x, w)| (c + h * x, h * w))
        })
        .collect();

    // f(x_j) = len^{-1} sum c e^{2 pi i x_j xi} at cell centres, by an
    // unnormalised inverse DFT of the coefficients times these phases
    let slots: Vec<(usize, Complex64)> = (0..heights)
        .map(|kk| {
            let xi = (k0 + kk as i64) as f64 * step - shift;
            let slot = xgrid.slot_of(xi).expect("demodulated band fits");
            let m = xgrid.signed_index(slot) as f64;
            let ph = Complex64::from_polar(1.0 / len, std::f64::consts::PI * m * (1.0 / nx as f64 - 1.0));
            (slot, ph)
        })
        .collect();
    let fft = rustfft::FftPlanner::new().plan_fft_inverse(nx);
    let hx = xgrid.cell_volume();
    let count = tests.len();
    let parts: Vec<Vec<f64>> = nodes
        .par_chunks(64)
        .map(|chunk| {
            let mut acc = vec![0.0; count];
            let mut edge = vec![0.0; bins + 1];
            let mut buf = vec![Complex64::new(0.0, 0.0); nx];
            let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
            for &(rho, qw) in chunk {
                // int_{bin} J0(2 pi rho r) 2 pi r dr = [r J1(2 pi rho r) / rho]
                for (e, v) in edge.iter_mut().enumerate() {
                    let r = (j0 + e as i64) as f64 * step;
                    *v = r * bessel_j1(std::f64::consts::TAU * rho * r) / rho;
                }
                for e in 0..bins {
                    edge[e] = edge[e + 1] - edge[e];
                }
                let radial_weight = std::f64::consts::TAU * rho.powf(1.0 - w.alpha) * qw;
                for (t, c) in tests.iter().enumerate() {
                    buf.iter_mut().for_each(|z| *z = Complex64::new(0.0, 0.0));
                    for (kk, &(a, b)) in rows.iter().enumerate() {
                        let mut v = Complex64::new(0.0, 0.0);
                        for jj in a..b {
                            v += c[kk * bins + jj] * edge[jj];
                        }
                        let (slot, ph) = slots[kk];
                        buf[slot] = v * ph;
                    }
                    fft.process_with_scratch(&mut buf, &mut scratch);
                    let e: f64 = buf.iter().zip(&xcells).map(|(z, wc)| z.norm_sqr() * wc).sum();
                    acc[t] += radial_weight * e * hx;
                }
            }
            acc
        })
        .collect();
    let mut num = vec![0.0; count];
    for p in parts {
        for (a, b) in num.iter_mut().zip(p) {
            *a += b;
        }
    }
    Ok(LowerBound::from_ratios(num.iter().zip(&norms).map(|(a, b)| a / b).collect()))
}
