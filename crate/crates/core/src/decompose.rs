//! Four-way split of a field by Fourier caps in `x'` and `x_n`, the weight
//! exponents attached to the parts, and block orthogonality ratios.
//!
//! With `a = (n-1)(1-2/p)` and `b = 1-2/p` the parts carry weights
//! `w_i = |x'|^{-alpha_i} |x_n|^{-beta_i}` with
//!
//! ```text
//! part 1: alpha = 0,           beta = 0
//! part 2: alpha in (a, 1+a),   beta in [0, b)
//! part 3: alpha in [0, a),     beta in (b, 1+b)
//! part 4: alpha in (a, 1+a),   beta in (b, 1+b)
//! ```
//!
//! and `alpha_i + beta_i < a + b + eps`. Some of these exponents leave the
//! product A2 window, where the cell average of the weight is infinite. The
//! parts that carry them vanish to second order on the singular plane, so
//! their weighted norms are taken by midpoint sampling on a cell-centered grid.

use std::ops::RangeInclusive;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bumps::{annulus, psi, SchwartzCap};
use crate::error::{arg, Error, Result};
use crate::field::{Field, Grid, Sampling, Spectrum};
use crate::fit::kendall_tau;
use crate::rng;
use crate::weights::{lp_norm, weight_cells, weighted_norm_with, WeightParams};
use crate::Complex64;

/// Distance kept from open window edges and from the sum bound.
pub const EXPONENT_MARGIN: f64 = 1e-6;

/// An interval with open or closed ends.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub lo: f64,
    pub hi: f64,
    pub lo_open: bool,
    pub hi_open: bool,
}

impl Window {
    fn closed_open(lo: f64, hi: f64) -> Window {
        Window { lo, hi, lo_open: false, hi_open: true }
    }

    fn open(lo: f64, hi: f64) -> Window {
        Window { lo, hi, lo_open: true, hi_open: true }
    }

    fn point(v: f64) -> Window {
        Window { lo: v, hi: v, lo_open: false, hi_open: false }
    }

    pub fn contains(&self, v: f64) -> bool {
        let above = if self.lo_open { v > self.lo } else { v >= self.lo };
        let below = if self.hi_open { v < self.hi } else { v <= self.hi };
        above && below
    }

    /// Usable range after the margin. A degenerate `[c, c)` collapses to `c`.
    fn usable(&self) -> Option<(f64, f64)> {
        if self.lo == self.hi && !self.lo_open {
            return Some((self.lo, self.lo));
        }
        let lo = self.lo + if self.lo_open { EXPONENT_MARGIN } else { 0.0 };
        let hi = self.hi - if self.hi_open { EXPONENT_MARGIN } else { 0.0 };
        (lo <= hi).then_some((lo, hi))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PartWindow {
    pub alpha: Window,
    pub beta: Window,
}

/// Exponents for the four parts, with the windows they were drawn from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exponents {
    pub n: usize,
    pub p: f64,
    pub eps: f64,
    pub parts: [WeightParams; 4],
    pub windows: [PartWindow; 4],
}

impl Exponents {
    /// `n (1 - 2/p) + eps`, the strict bound on every `alpha_i + beta_i`.
    pub fn sum_bound(&self) -> f64 {
        self.n as f64 * (1.0 - 2.0 / self.p) + self.eps
    }
}

/// Picks exponents near the middle of each window, pulled toward the lower
/// edges when the sum bound requires it.
pub fn choose_exponents(p: f64, eps: f64, n: usize) -> Result<Exponents> {
    if !(p >= 2.0 && p.is_finite()) {
        return arg(format!("p must lie in [2, inf), got {p}"));
    }
    if !(eps > 0.0 && eps <= 0.5) {
        return arg(format!("eps must lie in (0, 1/2], got {eps}"));
    }
    if n < 2 {
        return arg(format!("dimension must be at least 2, got {n}"));
    }
    let b = 1.0 - 2.0 / p;
    let a = (n - 1) as f64 * b;
    let windows = [
        PartWindow { alpha: Window::point(0.0), beta: Window::point(0.0) },
        PartWindow { alpha: Window::open(a, 1.0 + a), beta: Window::closed_open(0.0, b) },
        PartWindow { alpha: Window::closed_open(0.0, a), beta: Window::open(b, 1.0 + b) },
        PartWindow { alpha: Window::open(a, 1.0 + a), beta: Window::open(b, 1.0 + b) },
    ];
    let budget = a + b + eps - EXPONENT_MARGIN;
    let mut parts = [WeightParams::unweighted(); 4];
    for (i, w) in windows.iter().enumerate().skip(1) {
        let (la, ha) = w.alpha.usable().ok_or_else(|| empty_window(i, "alpha", &w.alpha))?;
        let (lb, hb) = w.beta.usable().ok_or_else(|| empty_window(i, "beta", &w.beta))?;
        let floor = la + lb;
        if floor > budget {
            return Err(Error::Infeasible(format!(
                "part {}: alpha_{0} >= {la:e} and beta_{0} >= {lb:e} cannot meet alpha_{0} + beta_{0} < {:e} \
                 (n = {n}, p = {p}, eps = {eps:e}, margin {EXPONENT_MARGIN:e})",
                i + 1,
                a + b + eps
            )));
        }
        let width = (ha - la) + (hb - lb);
        let theta = if width > 0.0 { (0.5f64).min((budget - floor) / width) } else { 0.0 };
        parts[i] = WeightParams::new(la + theta * (ha - la), lb + theta * (hb - lb));
    }
    Ok(Exponents { n, p, eps, parts, windows })
}

fn empty_window(i: usize, which: &str, w: &Window) -> Error {
    Error::Infeasible(format!("part {}: {which} window ({}, {}) is empty after the margin", i + 1, w.lo, w.hi))
}

/// `f = f1 + f2 + f3 + f4` with `f1 = f phi(x') phi(x_n)`,
/// `f2 = f (1 - phi(x')) phi(x_n)`, `f3 = f phi(x') (1 - phi(x_n))` and
/// `f4 = f (1 - phi(x')) (1 - phi(x_n))`.
#[derive(Debug, Clone)]
pub struct FourSplit {
    pub parts: [Field; 4],
    pub rho: f64,
}

impl FourSplit {
    pub fn sum(&self) -> Field {
        let mut out = self.parts[0].clone();
        for part in &self.parts[1..] {
            for (o, v) in out.samples_mut().iter_mut().zip(part.samples()) {
                *o += v;
            }
        }
        out
    }

    pub fn spectra(&self) -> Vec<Spectrum> {
        self.parts.par_iter().map(|f| f.forward()).collect()
    }
}

/// Cap values `phi(x')` on the `x'` slab (storage order) and `phi(x_n)` on the last axis.
fn cap_tables(grid: &Grid, rho: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = grid.dim();
    if n < 2 {
        return arg("the split needs dimension at least 2");
    }
    let across = SchwartzCap::new(rho, n - 1)?;
    let along = SchwartzCap::new(rho, 1)?;
    let c = grid.coords();
    let np = grid.points_per_axis();
    let slab = np.pow(n as u32 - 1);
    let r2: Vec<f64> = (0..slab)
        .map(|mut o| {
            let mut s = 0.0;
            for _ in 0..n - 1 {
                s += c[o % np] * c[o % np];
                o /= np;
            }
            s
        })
        .collect();
    let mut distinct = r2.clone();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    let values: Vec<f64> = distinct.par_iter().map(|s| across.eval(s.sqrt())).collect();
    let a = r2
        .iter()
        .map(|s| values[distinct.binary_search_by(|v| v.total_cmp(s)).expect("radius in table")])
        .collect();
    let b = c.par_iter().map(|x| along.eval(x.abs())).collect();
    Ok((a, b))
}

pub fn split_four(f: &Field, rho: f64) -> Result<FourSplit> {
    if !(rho > 0.0 && rho <= 1.0 / 64.0) {
        return arg(format!("cap radius must lie in (0, 2^-6], got {rho}"));
    }
    let grid = *f.grid();
    let (a, b) = cap_tables(&grid, rho)?;
    let np = grid.points_per_axis();
    let mut parts: [Vec<Complex64>; 4] = std::array::from_fn(|_| Vec::with_capacity(grid.size()));
    for (flat, &v) in f.samples().iter().enumerate() {
        let (ca, cb) = (a[flat / np], b[flat % np]);
        parts[0].push(v * (ca * cb));
        parts[1].push(v * ((1.0 - ca) * cb));
        parts[2].push(v * (ca * (1.0 - cb)));
        parts[3].push(v * ((1.0 - ca) * (1.0 - cb)));
    }
    let parts = parts.map(|data| Field::new(grid, data).expect("finite parts"));
    Ok(FourSplit { parts, rho })
}

/// Fraction of spectral energy with `xi_n` outside `(lo, hi)`.
pub fn band_leakage(s: &Spectrum, lo: f64, hi: f64) -> f64 {
    let g = s.grid();
    let np = g.points_per_axis();
    let fr = g.freqs();
    let (mut out, mut total) = (0.0, 0.0);
    for (flat, c) in s.coeffs().iter().enumerate() {
        let e = c.norm_sqr();
        total += e;
        let xn = fr[flat % np];
        if !(xn > lo && xn < hi) {
            out += e;
        }
    }
    if total > 0.0 {
        out / total
    } else {
        0.0
    }
}

/// `(h^n sum |f|^2 w(x))^{1/2}` with the weight sampled at cell centers.
pub fn sampled_weighted_norm(f: &Field, w: &WeightParams) -> Result<f64> {
    let g = f.grid();
    if g.sampling() != Sampling::CellCentered {
        return arg("sampled weighted norms need a cell-centered grid");
    }
    let c = g.coords();
    let n = g.dim();
    let np = g.points_per_axis();
    // rows summed in parallel, then in order, so the result does not depend on scheduling
    let rows: Vec<f64> = f
        .samples()
        .par_chunks(np)
        .enumerate()
        .map(|(row, chunk)| {
            let mut x = [0.0; 4];
            let mut flat = row;
            for k in (0..n - 1).rev() {
                x[k] = c[flat % np];
                flat /= np;
            }
            chunk
                .iter()
                .zip(&c)
                .map(|(z, &xn)| {
                    x[n - 1] = xn;
                    z.norm_sqr() * w.value(&x[..n])
                })
                .sum()
        })
        .collect();
    let s: f64 = rows.iter().sum();
    Ok((s * g.cell_volume()).sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormReport {
    pub lp: f64,
    pub weighted: [f64; 4],
    /// `||f_i||_{L2(w_i)} / ||f||_p`
    pub ratios: [f64; 4],
}

impl NormReport {
    pub fn max_ratio(&self) -> f64 {
        self.ratios.iter().cloned().fold(0.0, f64::max)
    }
}

pub fn split_norm_report(split: &FourSplit, f: &Field, p: f64, exps: &Exponents) -> Result<NormReport> {
    if exps.n != f.grid().dim() {
        return arg(format!("exponents are for n = {}, field has n = {}", exps.n, f.grid().dim()));
    }
    let lp = lp_norm(f, p)?;
    if lp == 0.0 {
        return arg("zero field");
    }
    let mut weighted = [0.0; 4];
    for (i, (part, w)) in split.parts.iter().zip(&exps.parts).enumerate() {
        weighted[i] = sampled_weighted_norm(part, w)?;
    }
    Ok(NormReport { lp, weighted, ratios: weighted.map(|v| v / lp) })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DilationReport {
    pub scales: Vec<f64>,
    pub reports: Vec<NormReport>,
    /// Largest over smallest of the per-scale maximal ratio.
    pub spread: f64,
    /// Kendall tau of the maximal ratio against `s`.
    pub tau: f64,
}

/// Split reports for `f_s(x) = profile(s x', x_n)` over the given scales.
pub fn dilation_report(
    grid: &Grid,
    profile: impl Fn(&[f64]) -> f64,
    rho: f64,
    exps: &Exponents,
    scales: &[f64],
) -> Result<DilationReport> {
    if scales.len() < 2 {
        return arg("need at least two scales");
    }
    let n = grid.dim();
    let mut reports = Vec::with_capacity(scales.len());
    for &s in scales {
        if !(s > 0.0) {
            return arg(format!("scales must be positive, got {s}"));
        }
        let f = Field::from_real(*grid, |x| {
            let mut y = [0.0; 4];
            for (k, v) in x.iter().enumerate() {
                y[k] = if k + 1 < n { s * v } else { *v };
            }
            profile(&y[..n])
        });
        let split = split_four(&f, rho)?;
        reports.push(split_norm_report(&split, &f, exps.p, exps)?);
    }
    let maxes: Vec<f64> = reports.iter().map(NormReport::max_ratio).collect();
    let hi = maxes.iter().cloned().fold(0.0, f64::max);
    let lo = maxes.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok(DilationReport { scales: scales.to_vec(), tau: kendall_tau(scales, &maxes), spread: hi / lo, reports })
}

/// Sum of Gaussian wave packets with frequencies drawn from
/// `xi_n in band`, `|xi'| <= spread`, envelope `exp(-pi |x - x0|^2 / sigma^2)`
/// and centers `|x0_k| <= sigma` per axis. The spectrum is a sum of Gaussians
/// of width `1/sigma` around the drawn frequencies.
pub fn wave_packets(grid: &Grid, band: (f64, f64), spread: f64, sigma: f64, count: usize, seed: u64) -> Field {
    let n = grid.dim();
    let mut r = rng::stream(seed, rng::stream_id("wave-packets", 0));
    let packets: Vec<(Vec<f64>, Vec<f64>, Complex64)> = (0..count)
        .map(|_| {
            let mut xi: Vec<f64> = (0..n - 1).map(|_| spread * (2.0 * r.gen::<f64>() - 1.0)).collect();
            xi.push(band.0 + (band.1 - band.0) * r.gen::<f64>());
            let x0 = (0..n).map(|_| sigma * (2.0 * r.gen::<f64>() - 1.0)).collect();
            let c = Complex64::new(rng::normal(&mut r), rng::normal(&mut r));
            (xi, x0, c)
        })
        .collect();
    Field::from_fn(*grid, |x| {
        packets
            .iter()
            .map(|(xi, x0, c)| {
                let d2: f64 = x.iter().zip(x0).map(|(a, b)| (a - b) * (a - b)).sum();
                let phase: f64 = x.iter().zip(xi).map(|(a, b)| a * b).sum();
                c * Complex64::from_polar((-std::f64::consts::PI * d2 / (sigma * sigma)).exp(), std::f64::consts::TAU * phase)
            })
            .sum()
    })
}

/// Block multiplier `zeta(2^{-(k+l)} xi') psi(2^{-l} xi_n)` with `zeta` the annulus.
pub fn block_symbol(xi: &[f64], k: i32, l: i32) -> f64 {
    let (xn, rest) = xi.split_last().expect("empty frequency");
    let r = rest.iter().map(|v| v * v).sum::<f64>().sqrt();
    annulus(r * (-(k + l) as f64).exp2()) * psi(xn * (-l as f64).exp2())
}

/// The nonzero blocks `f_{k,l}` of `f`, with their indices.
pub fn blocks(
    f: &Field,
    ks: RangeInclusive<i32>,
    ls: RangeInclusive<i32>,
) -> Vec<((i32, i32), Field)> {
    let spec = f.forward();
    let g = *f.grid();
    let fr = g.freqs();
    let n = g.dim();
    let np = g.points_per_axis();
    let index: Vec<(i32, i32)> = ks.flat_map(|k| ls.clone().map(move |l| (k, l))).collect();
    index
        .into_par_iter()
        .filter_map(|(k, l)| {
            let mut data = spec.coeffs().to_vec();
            let mut xi = [0.0; 4];
            let mut any = false;
            for (mut flat, c) in data.iter_mut().enumerate() {
                if *c == Complex64::new(0.0, 0.0) {
                    continue;
                }
                for d in (0..n).rev() {
                    xi[d] = fr[flat % np];
                    flat /= np;
                }
                let m = block_symbol(&xi[..n], k, l);
                any |= m != 0.0;
                *c *= m;
            }
            any.then(|| ((k, l), Spectrum::new(g, data).expect("finite block").into_field()))
        })
        .collect()
}

/// `sum_{k,l} ||f_{k,l}||^2_{L2(w)} / ||f||^2_{L2(w)}`.
pub fn ortho_ratio(f: &Field, w: &WeightParams, ks: RangeInclusive<i32>, ls: RangeInclusive<i32>) -> Result<f64> {
    w.check_a2_window(f.grid().dim())?;
    let cells = weight_cells(f.grid(), w)?;
    let whole = weighted_norm_with(f, &cells).powi(2);
    if whole == 0.0 {
        return arg("zero field");
    }
    let parts: f64 = blocks(f, ks, ls).iter().map(|(_, b)| weighted_norm_with(b, &cells).powi(2)).sum();
    Ok(parts / whole)
}

/// `||sum H||^2_{L2(w)} / sum ||H||^2_{L2(w)}` for given block fields.
pub fn dual_ortho_ratio(blocks: &[Field], w: &WeightParams) -> Result<f64> {
    let first = blocks.first().ok_or_else(|| Error::Argument("no blocks".into()))?;
    let grid = *first.grid();
    w.check_a2_window(grid.dim())?;
    let cells = weight_cells(&grid, w)?;
    let mut total = Field::zeros(grid);
    let mut parts = 0.0;
    for b in blocks {
        if *b.grid() != grid {
            return arg("blocks live on different grids");
        }
        parts += weighted_norm_with(b, &cells).powi(2);
        for (t, v) in total.samples_mut().iter_mut().zip(b.samples()) {
            *t += v;
        }
    }
    if parts == 0.0 {
        return arg("all blocks vanish");
    }
    Ok(weighted_norm_with(&total, &cells).powi(2) / parts)
}

/// Random trigonometric polynomial with coefficients on lattice frequencies
/// `r_lo <= |xi'| <= r_hi`, `xi_n` in `band`. Each coefficient is drawn from
/// its own stream keyed by the lattice index, so grids with the same box
/// length carry the same polynomial.
pub fn random_band_field(grid: &Grid, r_span: (f64, f64), band: (f64, f64), seed: u64) -> Field {
    random_band_spectrum(grid, r_span, band, seed).into_field()
}

/// Spectrum of [`random_band_field`].
pub fn random_band_spectrum(grid: &Grid, r_span: (f64, f64), band: (f64, f64), seed: u64) -> Spectrum {
    let len = grid.box_length();
    Spectrum::from_fn(*grid, |xi| {
        let (xn, rest) = xi.split_last().expect("empty frequency");
        let r = rest.iter().map(|v| v * v).sum::<f64>().sqrt();
        if r < r_span.0 || r > r_span.1 || *xn < band.0 || *xn > band.1 {
            return Complex64::new(0.0, 0.0);
        }
        let key = xi.iter().fold(0u64, |acc, v| (acc << 21) | (((v * len).round() as i64 + (1 << 20)) as u64));
        let mut r = rng::stream(seed, rng::stream_id("band-field", key));
        Complex64::new(rng::normal(&mut r), rng::normal(&mut r))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::cube_field;

    fn gaussian(sigma: f64) -> impl Fn(&[f64]) -> f64 {
        move |x| (-std::f64::consts::PI * x.iter().map(|v| v * v).sum::<f64>() / (sigma * sigma)).exp()
    }

    #[test]
    fn exponents_for_n3_p4() {
        let e = choose_exponents(4.0, 0.25, 3).unwrap();
        let w = &e.windows;
        assert_eq!((w[1].alpha.lo, w[1].alpha.hi), (1.0, 2.0));
        assert_eq!((w[2].alpha.lo, w[2].alpha.hi), (0.0, 1.0));
        assert_eq!((w[1].beta.lo, w[1].beta.hi), (0.0, 0.5));
        assert_eq!((w[3].beta.lo, w[3].beta.hi), (0.5, 1.5));
        assert_eq!(e.parts[0], WeightParams::unweighted());
        for (p, w) in e.parts.iter().zip(w).skip(1) {
            assert!(w.alpha.contains(p.alpha) && w.beta.contains(p.beta), "{p:?}");
            assert!(p.alpha + p.beta < e.sum_bound());
        }
    }

    #[test]
    fn exponents_sweep_and_errors() {
        for n in 2..=4 {
            for p in [2.0, 2.5, 3.0, 4.0, 8.0, 100.0] {
                for eps in [1e-3, 0.1, 0.5] {
                    let e = choose_exponents(p, eps, n).unwrap();
                    for (q, w) in e.parts.iter().zip(&e.windows).skip(1) {
                        let ok = |win: &Window, v: f64| win.contains(v) || (win.lo == win.hi && v == win.lo);
                        assert!(ok(&w.alpha, q.alpha) && ok(&w.beta, q.beta), "{n} {p} {eps} {q:?}");
                        assert!(q.alpha + q.beta < e.sum_bound());
                    }
                }
            }
        }
        // p = 2 collapses [0, 0) to 0
        let e = choose_exponents(2.0, 0.25, 3).unwrap();
        assert_eq!(e.parts[1].beta, 0.0);
        assert_eq!(e.parts[2].alpha, 0.0);
        assert!(e.parts[3].alpha > 0.0 && e.parts[3].beta > 0.0);
        match choose_exponents(2.0, 1e-9, 3) {
            Err(Error::Infeasible(m)) => assert!(m.contains("part") && m.contains("alpha"), "{m}"),
            other => panic!("{other:?}"),
        }
        assert!(matches!(choose_exponents(1.5, 0.1, 3), Err(Error::Argument(_))));
        assert!(matches!(choose_exponents(4.0, 0.6, 3), Err(Error::Argument(_))));
    }

    #[test]
    fn split_identity_and_origin() {
        let g = Grid::new(3, 32, 64.0).unwrap();
        let f = cube_field(&g, 64.0, 5);
        let s = split_four(&f, 1.0 / 64.0).unwrap();
        assert!(s.sum().sub(&f).unwrap().sup_norm() <= 1e-13 * f.sup_norm());
        let o = g.ravel(&[16, 16, 16]);
        let f0 = f.samples()[o];
        assert!((s.parts[0].samples()[o] - f0).norm() <= 1e-12 * f0.norm());
        for part in &s.parts[1..] {
            assert!(part.samples()[o].norm() <= 1e-12 * f0.norm());
        }
        assert!(split_four(&f, 0.1).is_err());
    }

    #[test]
    fn band_leakage_of_parts() {
        let g = Grid::cell_centered(2, 512, 128.0).unwrap();
        for seed in 0..20 {
            let f = wave_packets(&g, (0.8, 1.7), 1.5, 16.0, 6, seed);
            assert!(band_leakage(&f.forward(), 0.5, 2.0) <= 1e-12);
            let s = split_four(&f, 1.0 / 256.0).unwrap();
            for spec in s.spectra() {
                let leak = band_leakage(&spec, 0.1, 10.0);
                assert!(leak <= 1e-6, "seed {seed}: {leak}");
            }
        }
    }

    #[test]
    fn gaussian_ratios_n3() {
        let g = Grid::cell_centered(3, 64, 512.0).unwrap();
        let e = choose_exponents(4.0, 0.25, 3).unwrap();
        let f = Field::from_real(g, gaussian(64.0));
        let s = split_four(&f, 1.0 / 64.0).unwrap();
        let r = split_norm_report(&s, &f, 4.0, &e).unwrap();
        assert!(r.ratios.iter().all(|v| v.is_finite() && *v > 0.0), "{:?}", r.ratios);
    }

    #[test]
    fn concentrated_field_is_its_first_part() {
        let g = Grid::cell_centered(2, 256, 64.0).unwrap();
        let e = choose_exponents(4.0, 0.25, 2).unwrap();
        let f = Field::from_real(g, gaussian(2.0));
        let s = split_four(&f, 1.0 / 64.0).unwrap();
        let r = split_norm_report(&s, &f, 4.0, &e).unwrap();
        let plain = f.l2_norm() / lp_norm(&f, 4.0).unwrap();
        assert!((r.ratios[0] - plain).abs() <= 1e-3 * plain, "{} vs {plain}", r.ratios[0]);
    }

    #[test]
    fn dilation_family_is_stable() {
        let g = Grid::cell_centered(2, 1024, 4096.0).unwrap();
        let e = choose_exponents(4.0, 0.25, 2).unwrap();
        let scales: Vec<f64> = (-4..=4).map(|k| (k as f64 / 2.0).exp2()).collect();
        let r = dilation_report(&g, gaussian(64.0), 1.0 / 64.0, &e, &scales).unwrap();
        assert!(r.spread <= 3.0, "{}", r.spread);
        assert!(r.tau.abs() <= 0.3, "{}", r.tau);
    }

    #[test]
    fn disjoint_blocks_are_orthogonal() {
        let g = Grid::cell_centered(2, 128, 32.0).unwrap();
        let modes = [[1.0, 0.5], [2.0, 0.5], [1.0, 1.0], [-0.5, 0.25]];
        let one = |m: &[f64; 2]| {
            Spectrum::from_fn(g, |xi| {
                if (xi[0] - m[0]).abs() < 1e-9 && (xi[1] - m[1]).abs() < 1e-9 {
                    Complex64::new(1.0, 0.5)
                } else {
                    Complex64::new(0.0, 0.0)
                }
            })
            .into_field()
        };
        let parts: Vec<Field> = modes.iter().map(one).collect();
        let f = parts.iter().skip(1).fold(parts[0].clone(), |acc, p| acc.add(p).unwrap());
        let w = WeightParams::unweighted();
        assert!((ortho_ratio(&f, &w, -6..=4, -3..=2).unwrap() - 1.0).abs() <= 1e-10);
        assert!((dual_ortho_ratio(&parts, &w).unwrap() - 1.0).abs() <= 1e-10);
    }

    #[test]
    fn random_fields_ratio_envelope() {
        let g = Grid::cell_centered(2, 128, 32.0).unwrap();
        let w = WeightParams::new(0.5, 0.5);
        for seed in 0..100 {
            let f = random_band_field(&g, (0.125, 1.5), (0.25, 1.5), seed);
            let r = ortho_ratio(&f, &w, -8..=4, -3..=2).unwrap();
            assert!(r > 0.0 && r <= 10.0, "seed {seed}: {r}");
        }
    }

    #[test]
    fn single_blocks() {
        let g = Grid::cell_centered(2, 256, 32.0).unwrap();
        let f = random_band_field(&g, (0.0, 3.9), (0.0, 3.9), 3);
        let mut seen = 0;
        for ((k, l), b) in blocks(&f, -8..=4, -3..=2) {
            // keep blocks whose neighbours lie inside the field's band
            if !(-4..=0).contains(&(k + l)) || !(-2..=1).contains(&l) {
                continue;
            }
            seen += 1;
            for w in [WeightParams::unweighted(), WeightParams::new(0.5, 0.5), WeightParams::new(0.9, 0.9)] {
                let r = ortho_ratio(&b, &w, -8..=4, -3..=2).unwrap();
                let d = dual_ortho_ratio(std::slice::from_ref(&b), &w).unwrap();
                assert!((0.5..=2.0).contains(&r), "({k},{l}) {w:?}: {r}");
                assert!((d - 1.0).abs() < 1e-12);
            }
        }
        assert!(seen >= 20);
    }
}
