//! Multiplier operators on grids: dilated cone means, their maximal and square
//! functions, band and sector projections, and the strong maximal function.

use rayon::prelude::*;

use crate::error::{arg, Error, Result};
use crate::field::{Field, Grid, Spectrum};
use crate::multipliers::MultiplierSpec;

/// Geometric grid of dilations `t_min .. t_max` (both included).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TGrid {
    pub t_min: f64,
    pub t_max: f64,
    pub count: usize,
}

impl TGrid {
    pub fn new(t_min: f64, t_max: f64, count: usize) -> Result<TGrid> {
        if !(t_min > 0.0 && t_min < t_max && t_max.is_finite()) {
            return arg(format!("need 0 < t_min < t_max, got {t_min}, {t_max}"));
        }
        if count < 2 {
            return arg("t-grid needs at least 2 points");
        }
        Ok(TGrid { t_min, t_max, count })
    }

    /// Smallest count that resolves angular scale `scale` on this range.
    pub fn required_count(t_min: f64, t_max: f64, scale: f64) -> usize {
        ((16.0 * (t_max / t_min).ln() / scale).ceil() as usize).max(2)
    }

    /// Grid with the minimal resolving count for `scale`.
    pub fn resolving(t_min: f64, t_max: f64, scale: f64) -> Result<TGrid> {
        TGrid::new(t_min, t_max, TGrid::required_count(t_min, t_max, scale))
    }

    pub fn values(&self) -> Vec<f64> {
        let lr = (self.t_max / self.t_min).ln();
        (0..self.count)
            .map(|i| {
                if i + 1 == self.count {
                    self.t_max
                } else {
                    self.t_min * (lr * i as f64 / (self.count - 1) as f64).exp()
                }
            })
            .collect()
    }

    /// Trapezoid weights for `int f dt/t` in the variable `log t`.
    pub fn log_weights(&self) -> Vec<f64> {
        let h = (self.t_max / self.t_min).ln() / (self.count - 1) as f64;
        (0..self.count)
            .map(|i| if i == 0 || i + 1 == self.count { 0.5 * h } else { h })
            .collect()
    }

    /// Halves the spacing; the old points are a subset of the new ones.
    pub fn refined(&self) -> TGrid {
        TGrid { count: 2 * self.count - 1, ..*self }
    }

    fn check_resolution(&self, spec: &MultiplierSpec) -> Result<()> {
        if let Some(scale) = spec.angular_scale() {
            let need = TGrid::required_count(self.t_min, self.t_max, scale);
            if self.count < need {
                return Err(Error::Resolution(format!(
                    "t-grid has {} points, the angular scale {scale} needs at least {need}",
                    self.count
                )));
            }
        }
        Ok(())
    }
}

/// `T_t f = (m(xi'/t, xi_n) f^)^v`.
pub fn apply_t(f: &Field, spec: &MultiplierSpec, t: f64) -> Result<Field> {
    Ok(f.forward().multiplied(spec, t)?.inverse())
}

/// `T_t` applied to a precomputed spectrum; `None` if the result vanishes.
pub fn apply_t_spectrum(s: &Spectrum, spec: &MultiplierSpec, t: f64) -> Result<Option<Field>> {
    let m = s.multiplied(spec, t)?;
    if m.is_zero() {
        return Ok(None);
    }
    Ok(Some(m.inverse()))
}

const T_CHUNK: usize = 8;

/// Reduces `op(|T_t f|, weight)` over the t-grid chunk by chunk. The chunk
/// boundaries do not depend on the thread count, so results are bit-stable.
fn reduce_over_t(
    f: &Field,
    spec: &MultiplierSpec,
    ts: &[f64],
    ws: &[f64],
    init: f64,
    op: fn(f64, f64, f64) -> f64,
    merge: fn(f64, f64) -> f64,
) -> Result<Vec<f64>> {
    let s = f.forward();
    for &t in ts {
        // surface geometry errors before any work
        crate::field::eval_mask_check(spec, s.grid(), t)?;
    }
    let size = s.grid().size();
    let idx: Vec<usize> = (0..ts.len()).collect();
    let partials: Vec<Result<Vec<f64>>> = idx
        .par_chunks(T_CHUNK)
        .map(|chunk| {
            let mut acc = vec![init; size];
            for &i in chunk {
                if let Some(field) = apply_t_spectrum(&s, spec, ts[i])? {
                    for (a, z) in acc.iter_mut().zip(field.samples()) {
                        *a = op(*a, z.norm(), ws[i]);
                    }
                } else {
                    for a in acc.iter_mut() {
                        *a = op(*a, 0.0, ws[i]);
                    }
                }
            }
            Ok(acc)
        })
        .collect();
    let mut out = vec![init; size];
    for p in partials {
        let p = p?;
        for (o, v) in out.iter_mut().zip(p) {
            *o = merge(*o, v);
        }
    }
    Ok(out)
}

fn real_field(grid: &Grid, v: Vec<f64>) -> Field {
    let data = v.into_iter().map(|x| crate::Complex64::new(x, 0.0)).collect();
    Field::new(*grid, data).expect("finite reduction")
}

/// Pointwise `max_t |T_t f|` over the t-grid.
pub fn maximal(f: &Field, spec: &MultiplierSpec, tg: &TGrid) -> Result<Field> {
    let ts = tg.values();
    let ws = vec![0.0; ts.len()];
    let v = reduce_over_t(f, spec, &ts, &ws, 0.0, |a, m, _| a.max(m), f64::max)?;
    Ok(real_field(f.grid(), v))
}

/// Pointwise `(int |T_t f|^2 dt/t)^{1/2}` by the trapezoid rule in `log t`.
pub fn square_function(f: &Field, spec: &MultiplierSpec, tg: &TGrid) -> Result<Field> {
    tg.check_resolution(spec)?;
    let ts = tg.values();
    let ws = tg.log_weights();
    let v = reduce_over_t(f, spec, &ts, &ws, 0.0, |a, m, w| a + w * m * m, |a, b| a + b)?;
    Ok(real_field(f.grid(), v.into_iter().map(f64::sqrt).collect()))
}

/// `int |m(xi'/t, xi_n)|^2 dt/t` at one frequency, trapezoid in `log t`.
pub fn t_integral(spec: &MultiplierSpec, r: f64, xn: f64, tg: &TGrid) -> f64 {
    tg.values()
        .iter()
        .zip(tg.log_weights())
        .map(|(&t, w)| w * spec.eval_radial(r / t, xn).powi(2))
        .sum()
}

/// [`t_integral`] for the collar multiplier, summing only the grid points
/// where `m_delta(xi'/t, xi_n)` can be nonzero, `r/xi_n < t < r/(xi_n (1-delta))`.
pub fn collar_t_integral(delta: f64, r: f64, xn: f64, tg: &TGrid) -> f64 {
    if !(xn > 0.0 && r > 0.0) {
        return 0.0;
    }
    let spec = MultiplierSpec::DeltaCollar { delta };
    let h = (tg.t_max / tg.t_min).ln() / (tg.count - 1) as f64;
    let lo = ((r / xn / tg.t_min).ln() / h).floor().max(0.0) as usize;
    let hi = ((r / (xn * (1.0 - delta)) / tg.t_min).ln() / h).ceil();
    if hi < 0.0 || lo >= tg.count {
        return 0.0;
    }
    let hi = (hi as usize).min(tg.count - 1);
    let last = tg.count - 1;
    let lr = (tg.t_max / tg.t_min).ln();
    (lo..=hi)
        .map(|i| {
            let t = if i == last { tg.t_max } else { tg.t_min * (lr * i as f64 / last as f64).exp() };
            let w = if i == 0 || i == last { 0.5 * h } else { h };
            w * spec.eval_radial(r / t, xn).powi(2)
        })
        .sum()
}

/// `L_k f = (psi(2^{-k-1} xi_n) f^)^v`.
pub fn l_band(f: &Field, k: i32) -> Result<Field> {
    apply_t(f, &MultiplierSpec::BandPsi { k }, 1.0)
}

/// Angular sector `|xi'|/xi_n in [beta delta, (beta + 1) delta)`, `xi_n in [1/2, 4]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SectorIndex {
    pub beta: i64,
    pub delta: f64,
}

impl SectorIndex {
    pub fn contains(&self, r: f64, xn: f64) -> bool {
        if !(0.5..=4.0).contains(&xn) {
            return false;
        }
        let s = r / xn;
        s >= self.beta as f64 * self.delta && s < (self.beta + 1) as f64 * self.delta
    }
}

pub(crate) fn check_collar_resolution(grid: &Grid, delta: f64) -> Result<()> {
    if grid.freq_step() > delta / 8.0 {
        return Err(Error::Resolution(format!(
            "frequency step {} exceeds delta/8 = {}; need L >= {}",
            grid.freq_step(),
            delta / 8.0,
            8.0 / delta
        )));
    }
    Ok(())
}

/// Sharp frequency projection onto a sector.
pub fn sector_project(f: &Field, s: SectorIndex) -> Result<Field> {
    check_collar_resolution(f.grid(), s.delta)?;
    let mut spec = f.forward();
    let radial = crate::field::radial_frequencies(f.grid());
    for (c, &(r, xn)) in spec.coeffs_mut().iter_mut().zip(&radial) {
        if !s.contains(r, xn) {
            *c = crate::Complex64::new(0.0, 0.0);
        }
    }
    Ok(spec.inverse())
}

/// Periodic centered moving average of width `2s + 1` along `axis`.
fn moving_average(data: &[f64], grid: &Grid, axis: usize, s: usize) -> Vec<f64> {
    let n = grid.points_per_axis();
    let dim = grid.dim();
    let stride = n.pow((dim - 1 - axis) as u32);
    let mut out = vec![0.0; data.len()];
    let whole = 2 * s + 1 > n;
    let width = if whole { n as f64 } else { (2 * s + 1) as f64 };
    let outer = data.len() / (n * stride);
    let mut pre = vec![0.0; n + 1];
    for o in 0..outer {
        for inner in 0..stride {
            let base = o * n * stride + inner;
            for k in 0..n {
                pre[k + 1] = pre[k] + data[base + k * stride];
            }
            // inclusive a..=b with wrap; the window is shorter than the axis
            let seg = |lo: i64, hi: i64| pre[(hi + 1) as usize] - pre[lo as usize];
            let ni = n as i64;
            let range = |a: i64, b: i64| -> f64 {
                if a < 0 {
                    seg(a + ni, ni - 1) + seg(0, b)
                } else if b >= ni {
                    seg(a, ni - 1) + seg(0, b - ni)
                } else {
                    seg(a, b)
                }
            };
            if whole {
                for k in 0..n {
                    out[base + k * stride] = pre[n] / width;
                }
                continue;
            }
            for k in 0..n {
                let v = range(k as i64 - s as i64, k as i64 + s as i64);
                out[base + k * stride] = v / width;
            }
        }
    }
    out
}

/// Window radii in cells: 0, 1, 2, 4, ... and finally `n/2`, which stands
/// for the mean over the whole axis.
fn dyadic_radii(n: usize) -> Vec<usize> {
    let mut r = vec![0];
    let mut s = 1;
    while 2 * s < n {
        r.push(s);
        s *= 2;
    }
    r.push(n / 2);
    r
}

/// `M_1 o M_{n-1}` over centered cubes with dyadic radii (in cells).
pub fn strong_maximal(f: &Field) -> Field {
    let grid = *f.grid();
    let dim = grid.dim();
    let abs: Vec<f64> = f.samples().iter().map(|z| z.norm()).collect();
    let radii = dyadic_radii(grid.points_per_axis());
    let inner = if dim == 1 {
        abs
    } else {
        let mut best = abs.clone();
        for &s in &radii[1..] {
            let mut avg = abs.clone();
            for axis in 0..dim - 1 {
                avg = moving_average(&avg, &grid, axis, s);
            }
            for (b, a) in best.iter_mut().zip(avg) {
                *b = b.max(a);
            }
        }
        best
    };
    let mut out = inner.clone();
    for &s in &radii[1..] {
        let avg = moving_average(&inner, &grid, dim - 1, s);
        for (o, a) in out.iter_mut().zip(avg) {
            *o = o.max(a);
        }
    }
    real_field(&grid, out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::synthesize_mode;
    use crate::quad;
    use crate::rng;
    use crate::Complex64;

    fn c1() -> Complex64 {
        Complex64::new(1.0, 0.0)
    }

    fn band_field(grid: Grid, seed: u64, keep: impl Fn(&[f64]) -> bool) -> Field {
        let mut r = rng::stream(seed, 0);
        Spectrum::from_fn(grid, |xi| {
            if keep(xi) {
                Complex64::new(rng::normal(&mut r), rng::normal(&mut r))
            } else {
                Complex64::new(0.0, 0.0)
            }
        })
        .inverse()
    }

    fn max_diff(a: &Field, b: &Field) -> f64 {
        a.sub(b).unwrap().sup_norm()
    }

    #[test]
    fn t_grid_basics() {
        assert!(TGrid::new(1.0, 1.0, 4).is_err());
        assert!(TGrid::new(0.5, 2.0, 1).is_err());
        let tg = TGrid::new(0.5, 8.0, 5).unwrap();
        let v = tg.values();
        assert_eq!(v[0], 0.5);
        assert_eq!(v[4], 8.0);
        assert!((v[2] - 2.0).abs() < 1e-12);
        let fine = tg.refined().values();
        for (i, &t) in v.iter().enumerate() {
            assert!((fine[2 * i] - t).abs() < 1e-12 * t);
        }
        let w: f64 = tg.log_weights().iter().sum();
        assert!((w - 16f64.ln()).abs() < 1e-12);
        assert_eq!(TGrid::required_count(1.0, std::f64::consts::E, 0.5), 32);
    }

    #[test]
    fn single_mode_is_scaled() {
        let g = Grid::new(2, 64, 8.0).unwrap();
        let xi = [0.375, 1.0];
        let f = synthesize_mode(&g, &xi, c1()).unwrap();
        for spec in [
            MultiplierSpec::ConeLocalized { lambda: 1.0 },
            MultiplierSpec::DeltaCollar { delta: 0.25 },
            MultiplierSpec::AngularDyadic { level: 1, lambda: 0.5 },
        ] {
            for t in [0.5, 1.0, 1.5] {
                let out = apply_t(&f, &spec, t).unwrap();
                let m = spec.eval_radial(xi[0] / t, xi[1]);
                let want = synthesize_mode(&g, &xi, Complex64::new(m, 0.0)).unwrap();
                assert!(max_diff(&out, &want) < 1e-12, "{spec:?} t={t}");
            }
        }
        let band = apply_t(&f, &MultiplierSpec::BandPsi { k: 0 }, 1.0).unwrap();
        assert!(max_diff(&band, &f) < 1e-12);
    }

    #[test]
    fn large_dilation_approaches_band() {
        // (1 - s^2) - 1 = -s^2 with s <= R/t on xi_n >= 1
        let g = Grid::new(2, 64, 4.0).unwrap();
        let f = band_field(g, 3, |xi| xi[0].abs() <= 0.5 && xi[1] >= 1.0 && xi[1] < 2.0);
        let radius = 0.5;
        let l1 = f.forward().l1_norm();
        let band = l_band(&f, 0).unwrap();
        for t in [2.0, 4.0] {
            let out = apply_t(&f, &MultiplierSpec::ConeLocalized { lambda: 1.0 }, t).unwrap();
            let err = max_diff(&out, &band);
            assert!(err <= radius * radius / (t * t) * l1, "t={t}: {err}");
            assert!(err > 0.0);
        }
    }

    #[test]
    fn geometry_errors_name_the_fix() {
        let g = Grid::new(2, 16, 8.0).unwrap();
        let f = Field::zeros(g);
        match apply_t(&f, &MultiplierSpec::ConeLocalized { lambda: 1.0 }, 1.0) {
            Err(Error::Geometry(msg)) => assert!(msg.contains("N >= 32")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn maximal_single_mode() {
        let g = Grid::new(2, 32, 8.0).unwrap();
        let xi = [0.625, 1.0];
        let f = synthesize_mode(&g, &xi, c1()).unwrap();
        let tg = TGrid::new(1.0, 3.0, 9).unwrap();
        let m = maximal(&f, &MultiplierSpec::ConeFull { lambda: 1.0 }, &tg).unwrap();
        let want = 1.0 - (xi[0] / 3.0).powi(2);
        for z in m.samples() {
            assert!((z.re - want).abs() < 1e-12);
        }
        let f0 = synthesize_mode(&g, &[0.0, 0.5], c1()).unwrap();
        let cap = maximal(&f0, &MultiplierSpec::CapPhi, &tg).unwrap();
        assert!(cap.samples().iter().all(|z| (z.re - 1.0).abs() < 1e-12));
    }

    #[test]
    fn maximal_refinement_never_decreases() {
        let g = Grid::new(2, 32, 8.0).unwrap();
        let f = band_field(g, 5, |xi| xi[1] > 0.5 && xi[1] < 2.0 && xi[0].abs() < 1.5);
        let spec = MultiplierSpec::ConeLocalized { lambda: 0.5 };
        let tg = TGrid::new(0.25, 1.0, 6).unwrap();
        let a = maximal(&f, &spec, &tg).unwrap();
        let b = maximal(&f, &spec, &tg.refined()).unwrap();
        for (x, y) in a.samples().iter().zip(b.samples()) {
            assert!(y.re >= x.re);
        }
    }

    #[test]
    fn square_function_examples() {
        let delta = 0.125;
        let spec = MultiplierSpec::DeltaCollar { delta };
        let g = Grid::new(2, 32, 8.0).unwrap();
        let tg = TGrid::resolving(0.25, 1.0, delta).unwrap();

        let axis = synthesize_mode(&g, &[0.0, 1.0], c1()).unwrap();
        let s = square_function(&axis, &spec, &tg).unwrap();
        assert_eq!(s.sup_norm(), 0.0);

        let f = synthesize_mode(&g, &[0.5, 1.0], c1()).unwrap();
        let s = square_function(&f, &spec, &tg).unwrap();
        let oracle = quad::adaptive(
            &|lt: f64| crate::bumps::mu_delta(0.5 / lt.exp(), delta).powi(2),
            0.25f64.ln(),
            0.0,
            1e-13,
        );
        let got = s.samples()[0].re.powi(2);
        assert!((got - oracle).abs() <= 0.01 * oracle, "{got} vs {oracle}");
        assert!(got <= (1.0 / (1.0 - delta)).ln());
        for z in s.samples() {
            assert!((z.re - s.samples()[0].re).abs() < 1e-12);
        }
    }

    #[test]
    fn square_function_rejects_coarse_t_grid() {
        let g = Grid::new(2, 32, 8.0).unwrap();
        let f = Field::zeros(g);
        let tg = TGrid::new(0.25, 1.0, 10).unwrap();
        match square_function(&f, &MultiplierSpec::DeltaCollar { delta: 0.125 }, &tg) {
            Err(Error::Resolution(msg)) => assert!(msg.contains("178")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn square_function_plancherel_route() {
        let delta = 0.25;
        let spec = MultiplierSpec::DeltaCollar { delta };
        let g = Grid::new(2, 64, 8.0).unwrap();
        let f = band_field(g, 9, |xi| xi[1] > 0.5 && xi[1] < 2.0 && xi[0].abs() < 2.0);
        let tg = TGrid::resolving(0.2, 2.0, delta).unwrap();
        let s = square_function(&f, &spec, &tg).unwrap();
        let lhs = s.l2_norm().powi(2);
        let spec_f = f.forward();
        let radial = crate::field::radial_frequencies(&g);
        let (lo, hi) = (0.2f64.ln(), 2.0f64.ln());
        let mut rhs = 0.0;
        for (c, &(r, xn)) in spec_f.coeffs().iter().zip(&radial) {
            if c.norm_sqr() == 0.0 {
                continue;
            }
            let per = quad::composite_gl(|lt| spec.eval_radial(r / lt.exp(), xn).powi(2), lo, hi, 400, 16);
            rhs += c.norm_sqr() * per;
        }
        rhs *= g.dual_cell_volume();
        assert!((lhs - rhs).abs() <= 0.01 * rhs, "{lhs} vs {rhs}");
    }

    #[test]
    fn collar_t_integral_matches_full_sum() {
        for delta in [0.25, 0.03125] {
            let tg = TGrid::resolving(1.0 / 64.0, 2.0, delta).unwrap();
            let spec = MultiplierSpec::DeltaCollar { delta };
            for (r, xn) in [(0.5, 1.0), (0.9, 0.6), (1.0, 1.0), (3.9, 1.99), (0.01, 0.5), (0.0, 1.0), (1.0, -1.0)] {
                let a = t_integral(&spec, r, xn, &tg);
                let b = collar_t_integral(delta, r, xn, &tg);
                assert!((a - b).abs() <= 1e-15 + 1e-12 * a, "{r} {xn}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn collar_square_function_bound() {
        for delta in [0.25, 0.125] {
            let spec = MultiplierSpec::DeltaCollar { delta };
            let g = Grid::new(2, 64, 8.0).unwrap();
            let tg = TGrid::resolving(0.2, 2.0, delta).unwrap();
            let cap = (1.0 / (1.0 - delta)).ln();
            assert!(cap <= 1.2 * delta);
            let radial = crate::field::radial_frequencies(&g);
            for &(r, xn) in radial.iter() {
                assert!(t_integral(&spec, r, xn, &tg) <= cap);
            }
            for seed in 0..3 {
                let f = band_field(g, seed, |xi| xi[0].abs() < 2.0 && xi[1].abs() < 2.0);
                let s = square_function(&f, &spec, &tg).unwrap();
                assert!(s.l2_norm() <= (1.2 * delta).sqrt() * f.l2_norm());
            }
        }
    }

    #[test]
    fn sobolev_product_bound() {
        let level = 2;
        let g = Grid::new(2, 64, 8.0).unwrap();
        let f = band_field(g, 21, |xi| {
            (0.5..=1.0).contains(&xi[0].abs()) && xi[1] >= 0.75 && xi[1] <= 1.5
        });
        let tg = TGrid::resolving(0.25, 2.0, 0.25).unwrap().refined();
        let m = maximal(&f, &MultiplierSpec::AngularDyadic { level, lambda: 0.5 }, &tg).unwrap();
        let a = square_function(&f, &MultiplierSpec::AngularDyadic { level, lambda: 0.5 }, &tg).unwrap();
        let b = square_function(&f, &MultiplierSpec::AngularDyadicGrad { level, lambda: 0.5 }, &tg).unwrap();
        let k = (level as f64 + 1.0).exp2();
        for ((m, a), b) in m.samples().iter().zip(a.samples()).zip(b.samples()) {
            let lhs = m.re * m.re;
            assert!(lhs <= k * a.re * b.re + 0.1 * lhs, "{lhs} vs {}", k * a.re * b.re);
        }
    }

    #[test]
    fn maximal_dominated_by_dyadic_pieces() {
        let lambda = 0.5;
        let gmax = 12;
        let g = Grid::new(2, 64, 8.0).unwrap();
        let f = band_field(g, 17, |xi| xi[1] > 0.5 && xi[1] < 2.0 && xi[0].abs() < 2.0);
        let tg = TGrid::new(0.5, 1.5, 24).unwrap();
        let total = maximal(&f, &MultiplierSpec::ConeLocalized { lambda }, &tg).unwrap();
        let mut sum = vec![0.0; g.size()];
        for level in 0..=gmax {
            let m = maximal(&f, &MultiplierSpec::AngularDyadic { level, lambda }, &tg).unwrap();
            let c = (-(level as f64) * lambda).exp2();
            for (s, z) in sum.iter_mut().zip(m.samples()) {
                *s += c * z.re;
            }
        }
        let tail = (-((gmax + 1) as f64) * lambda).exp2() * f.forward().l1_norm();
        for (t, s) in total.samples().iter().zip(&sum) {
            assert!(t.re <= s + tail + 1e-12);
        }
    }

    #[test]
    fn band_pieces() {
        let g = Grid::new(2, 256, 4.0).unwrap();
        let up = synthesize_mode(&g, &[0.25, 1.0], c1()).unwrap();
        assert!(max_diff(&l_band(&up, 0).unwrap(), &up) < 1e-12);
        let down = synthesize_mode(&g, &[0.25, -1.0], c1()).unwrap();
        for k in -3..3 {
            assert!(l_band(&down, k).unwrap().sup_norm() < 1e-14);
        }
        let f = band_field(g, 2, |xi| xi[1] > 1.0 && xi[1] < 2.0);
        let mut acc = Field::zeros(g);
        for k in -4..=4 {
            acc = acc.add(&l_band(&f, k).unwrap()).unwrap();
        }
        assert!(acc.sub(&f).unwrap().l2_norm() <= 1e-12);
    }

    #[test]
    fn sector_projections() {
        let delta = 0.25;
        let g = Grid::new(2, 64, 32.0).unwrap();
        let f = band_field(g, 4, |_| true);
        let p = |b: i64, h: &Field| sector_project(h, SectorIndex { beta: b, delta }).unwrap();
        let once = p(1, &f);
        assert!(max_diff(&p(1, &once), &once) < 1e-12);
        let other = p(3, &f);
        assert!(once.inner(&other).unwrap().norm() < 1e-12 * f.l2_norm().powi(2));
        let betas: Vec<i64> = (0..8).collect();
        let total: f64 = betas.iter().map(|&b| p(b, &f).l2_norm().powi(2)).sum();
        let mut cut = f.forward();
        let radial = crate::field::radial_frequencies(&g);
        for (c, &(r, xn)) in cut.coeffs_mut().iter_mut().zip(&radial) {
            if !betas.iter().any(|&b| SectorIndex { beta: b, delta }.contains(r, xn)) {
                *c = Complex64::new(0.0, 0.0);
            }
        }
        let want = cut.l2_norm().powi(2);
        assert!((total - want).abs() < 1e-10 * want);

        let coarse = Grid::new(2, 16, 4.0).unwrap();
        assert!(matches!(
            sector_project(&Field::zeros(coarse), SectorIndex { beta: 0, delta }),
            Err(Error::Resolution(_))
        ));
    }

    #[test]
    fn strong_maximal_examples() {
        let g = Grid::cell_centered(2, 64, 32.0).unwrap();
        let c = Field::from_real(g, |_| 2.5);
        assert!(strong_maximal(&c).samples().iter().all(|z| (z.re - 2.5).abs() < 1e-12));

        let cube = Field::from_real(g, |x| if x.iter().all(|v| v.abs() < 0.5) { 1.0 } else { 0.0 });
        let m = strong_maximal(&cube);
        let coords = g.coords();
        let mut idx = [0usize; 2];
        for (flat, z) in m.samples().iter().enumerate() {
            g.unravel(flat, &mut idx);
            let (x0, xn) = (coords[idx[0]], coords[idx[1]]);
            assert!(z.re >= cube.samples()[flat].re - 1e-12);
            if x0.abs() < 0.5 && xn.abs() < 0.5 {
                assert!((z.re - 1.0).abs() < 1e-12);
            }
        }
        // x' inside the cube, |x_n| = d: only the x_n averages matter
        for &d in &[4.25, 8.25, 12.25] {
            let col = coords.iter().position(|&v| (v - 0.25).abs() < 1e-12).unwrap();
            let row = coords.iter().position(|&v| (v - d).abs() < 1e-12).unwrap();
            let got = m.samples()[g.ravel(&[col, row])].re;
            let mut oracle: f64 = 0.0;
            for &s in &dyadic_radii(64)[1..] {
                let (lo, hi) = if s == 32 { (0, 63) } else { (row as i64 - s as i64, row as i64 + s as i64) };
                let hits = (lo..=hi).filter(|&j| coords[j.rem_euclid(64) as usize].abs() < 0.5).count();
                oracle = oracle.max(hits as f64 / (hi - lo + 1) as f64);
            }
            assert!((got - oracle).abs() < 1e-12, "{got} vs {oracle}");
            assert!(got * d >= 0.25 && got * d <= 2.0, "{}", got * d);
        }
    }
}
