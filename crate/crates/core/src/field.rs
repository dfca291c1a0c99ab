//! Periodic sampled fields and their Fourier coefficients.
//!
//! A grid of `N` points per axis on the box `[-L/2, L/2)^n` samples
//! `x_k = L (k + o)/N - L/2` with `o = 0` (vertex) or `o = 1/2` (cell centered).
//! Frequencies live on the dual lattice `xi_m = m / L` with
//! `m` in `-N/2 .. N/2 - 1`, stored in FFT order.
//!
//! Normalization: `coeff(xi) = h^n * sum_x f(x) exp(-2 pi i x.xi)` with
//! `h = L/N`, which approximates the continuous transform. The inverse is
//! `f(x) = L^{-n} * sum_xi coeff(xi) exp(2 pi i x.xi)`. With these choices
//! `h^n sum |f|^2 = L^{-n} sum |coeff|^2` holds exactly.
//!
//! The last axis is the distinguished `x_n` axis; the first `n - 1` axes form `x'`.

use std::f64::consts::TAU;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{arg, Error, Result};
use crate::multipliers::MultiplierSpec;

/// Default cap on the bytes of one complex array (2 GiB).
pub const DEFAULT_MEMORY_CAP: usize = 2 << 30;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sampling {
    /// Samples at `L k/N - L/2`; the origin is a sample.
    Vertex,
    /// Samples shifted by half a cell; no sample lies on a coordinate plane.
    CellCentered,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    dim: usize,
    n: usize,
    len: f64,
    sampling: Sampling,
}

impl Grid {
    /// Vertex grid under the default memory cap.
    pub fn new(dim: usize, n: usize, len: f64) -> Result<Grid> {
        Grid::with_options(dim, n, len, Sampling::Vertex, DEFAULT_MEMORY_CAP)
    }

    /// Cell-centered grid under the default memory cap.
    pub fn cell_centered(dim: usize, n: usize, len: f64) -> Result<Grid> {
        Grid::with_options(dim, n, len, Sampling::CellCentered, DEFAULT_MEMORY_CAP)
    }

    /// Full constructor. A grid needs `16 N^n` bytes per complex array, which
    /// must not exceed `cap_bytes`.
    pub fn with_options(
        dim: usize,
        n: usize,
        len: f64,
        sampling: Sampling,
        cap_bytes: usize,
    ) -> Result<Grid> {
        if dim == 0 {
            return arg("dimension must be at least 1");
        }
        if n < 8 || !n.is_power_of_two() {
            return arg(format!("points per axis must be a power of two >= 8, got {n}"));
        }
        if !(len > 0.0 && len.is_finite()) {
            return arg(format!("box length must be positive, got {len}"));
        }
        let bytes = (n as u128).pow(dim as u32) * 16;
        if bytes > cap_bytes as u128 {
            return Err(Error::Resource(format!(
                "grid {n}^{dim} needs {bytes} bytes per array, cap is {cap_bytes}"
            )));
        }
        Ok(Grid { dim, n, len, sampling })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn points_per_axis(&self) -> usize {
        self.n
    }
    pub fn box_length(&self) -> f64 {
        self.len
    }
    pub fn sampling(&self) -> Sampling {
        self.sampling
    }
    /// Total number of samples `N^n`.
    pub fn size(&self) -> usize {
        self.n.pow(self.dim as u32)
    }
    /// Physical spacing `L/N`.
    pub fn spacing(&self) -> f64 {
        self.len / self.n as f64
    }
    /// Frequency spacing `1/L`.
    pub fn freq_step(&self) -> f64 {
        1.0 / self.len
    }
    /// `N / (2L)`.
    pub fn nyquist(&self) -> f64 {
        self.n as f64 / (2.0 * self.len)
    }
    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.dim as i32)
    }
    /// Volume of one dual lattice cell, `L^{-n}`.
    pub fn dual_cell_volume(&self) -> f64 {
        self.freq_step().powi(self.dim as i32)
    }

    fn offset(&self) -> f64 {
        match self.sampling {
            Sampling::Vertex => 0.0,
            Sampling::CellCentered => 0.5,
        }
    }

    /// Physical coordinate of axis index `k`.
    pub fn coord(&self, k: usize) -> f64 {
        self.spacing() * (k as f64 + self.offset()) - 0.5 * self.len
    }

    /// Signed lattice index of FFT slot `m`.
    pub fn signed_index(&self, m: usize) -> i64 {
        if m < self.n / 2 {
            m as i64
        } else {
            m as i64 - self.n as i64
        }
    }

    /// Frequency of FFT slot `m`.
    pub fn freq(&self, m: usize) -> f64 {
        self.signed_index(m) as f64 / self.len
    }

    /// Physical coordinates along one axis.
    pub fn coords(&self) -> Vec<f64> {
        (0..self.n).map(|k| self.coord(k)).collect()
    }

    /// Frequencies along one axis in FFT order.
    pub fn freqs(&self) -> Vec<f64> {
        (0..self.n).map(|m| self.freq(m)).collect()
    }

    /// Splits a flat index into per-axis indices (axis 0 slowest).
    pub fn unravel(&self, mut flat: usize, out: &mut [usize]) {
        for a in (0..self.dim).rev() {
            out[a] = flat % self.n;
            flat /= self.n;
        }
    }

    pub fn ravel(&self, idx: &[usize]) -> usize {
        idx.iter().fold(0, |acc, &k| acc * self.n + k)
    }

    /// FFT slot of a lattice frequency, if it lies on the lattice.
    pub fn slot_of(&self, xi: f64) -> Option<usize> {
        let m = xi * self.len;
        let r = m.round();
        if (m - r).abs() > 1e-9 * (1.0 + m.abs()) {
            return None;
        }
        let r = r as i64;
        let half = (self.n / 2) as i64;
        if r < -half || r >= half {
            return None;
        }
        Some(if r < 0 { (r + self.n as i64) as usize } else { r as usize })
    }

    pub(crate) fn same_as(&self, other: &Grid) -> bool {
        self == other
    }
}

/// Per-lattice-point radial data `(|xi'|, xi_n)` in storage order.
pub(crate) fn radial_frequencies(grid: &Grid) -> Vec<(f64, f64)> {
    let f = grid.freqs();
    let f2: Vec<f64> = f.iter().map(|v| v * v).collect();
    let mut out = Vec::with_capacity(grid.size());
    let mut idx = vec![0usize; grid.dim()];
    for flat in 0..grid.size() {
        grid.unravel(flat, &mut idx);
        let d = grid.dim();
        let r2: f64 = idx[..d - 1].iter().map(|&m| f2[m]).sum();
        out.push((r2.sqrt(), f[idx[d - 1]]));
    }
    out
}

/// Samples of a function on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: Grid,
    data: Vec<Complex64>,
}

/// Fourier coefficients on the dual lattice, FFT order.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    grid: Grid,
    data: Vec<Complex64>,
}

fn check_len(grid: &Grid, len: usize) -> Result<()> {
    if len != grid.size() {
        return arg(format!("expected {} values, got {len}", grid.size()));
    }
    Ok(())
}

impl Field {
    pub fn new(grid: Grid, data: Vec<Complex64>) -> Result<Field> {
        check_len(&grid, data.len())?;
        if data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return arg("field samples must be finite");
        }
        Ok(Field { grid, data })
    }

    pub fn zeros(grid: Grid) -> Field {
        Field { grid, data: vec![Complex64::new(0.0, 0.0); grid.size()] }
    }

    /// Samples `f` at every grid point.
    pub fn from_fn(grid: Grid, mut f: impl FnMut(&[f64]) -> Complex64) -> Field {
        let c = grid.coords();
        let mut idx = vec![0usize; grid.dim()];
        let mut x = vec![0.0; grid.dim()];
        let data = (0..grid.size())
            .map(|flat| {
                grid.unravel(flat, &mut idx);
                for (xa, &k) in x.iter_mut().zip(&idx) {
                    *xa = c[k];
                }
                f(&x)
            })
            .collect();
        Field { grid, data }
    }

    pub fn from_real(grid: Grid, f: impl Fn(&[f64]) -> f64) -> Field {
        Field::from_fn(grid, |x| Complex64::new(f(x), 0.0))
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }
    pub fn samples(&self) -> &[Complex64] {
        &self.data
    }
    pub fn samples_mut(&mut self) -> &mut [Complex64] {
        &mut self.data
    }
    pub fn into_samples(self) -> Vec<Complex64> {
        self.data
    }

    /// `(h^n sum |f|^2)^{1/2}`.
    pub fn l2_norm(&self) -> f64 {
        (self.data.iter().map(|z| z.norm_sqr()).sum::<f64>() * self.grid.cell_volume()).sqrt()
    }

    pub fn sup_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn sub(&self, other: &Field) -> Result<Field> {
        if !self.grid.same_as(&other.grid) {
            return arg("grid mismatch");
        }
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect();
        Ok(Field { grid: self.grid, data })
    }

    pub fn add(&self, other: &Field) -> Result<Field> {
        if !self.grid.same_as(&other.grid) {
            return arg("grid mismatch");
        }
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect();
        Ok(Field { grid: self.grid, data })
    }

    /// `h^n sum f conj(g)`.
    pub fn inner(&self, other: &Field) -> Result<Complex64> {
        if !self.grid.same_as(&other.grid) {
            return arg("grid mismatch");
        }
        let s: Complex64 = self.data.iter().zip(&other.data).map(|(a, b)| a * b.conj()).sum();
        Ok(s * self.grid.cell_volume())
    }

    pub fn forward(&self) -> Spectrum {
        forward_transform(self)
    }

    /// Forward transform reusing the sample buffer.
    pub fn into_spectrum(self) -> Spectrum {
        let g = self.grid;
        let mut data = self.data;
        fft_nd(&mut data, g.dim(), g.points_per_axis(), false);
        scale_by_phase(&mut data, &g, false, g.cell_volume());
        Spectrum { grid: g, data }
    }
}

impl Spectrum {
    pub fn new(grid: Grid, data: Vec<Complex64>) -> Result<Spectrum> {
        check_len(&grid, data.len())?;
        Ok(Spectrum { grid, data })
    }

    pub fn zeros(grid: Grid) -> Spectrum {
        Spectrum { grid, data: vec![Complex64::new(0.0, 0.0); grid.size()] }
    }

    /// Fills the lattice with `f(xi)`.
    pub fn from_fn(grid: Grid, mut f: impl FnMut(&[f64]) -> Complex64) -> Spectrum {
        let fr = grid.freqs();
        let mut idx = vec![0usize; grid.dim()];
        let mut xi = vec![0.0; grid.dim()];
        let data = (0..grid.size())
            .map(|flat| {
                grid.unravel(flat, &mut idx);
                for (v, &m) in xi.iter_mut().zip(&idx) {
                    *v = fr[m];
                }
                f(&xi)
            })
            .collect();
        Spectrum { grid, data }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }
    pub fn coeffs(&self) -> &[Complex64] {
        &self.data
    }
    pub fn coeffs_mut(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    /// `(L^{-n} sum |c|^2)^{1/2}`, equal to the physical L2 norm.
    pub fn l2_norm(&self) -> f64 {
        (self.data.iter().map(|z| z.norm_sqr()).sum::<f64>() * self.grid.dual_cell_volume()).sqrt()
    }

    /// `L^{-n} sum |c|`, the lattice version of `||f^||_1`.
    pub fn l1_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).sum::<f64>() * self.grid.dual_cell_volume()
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|z| z.re == 0.0 && z.im == 0.0)
    }

    pub fn inverse(&self) -> Field {
        inverse_transform(self)
    }

    /// Inverse transform reusing the coefficient buffer.
    pub fn into_field(self) -> Field {
        let g = self.grid;
        let mut data = self.data;
        scale_by_phase(&mut data, &g, true, g.dual_cell_volume());
        fft_nd(&mut data, g.dim(), g.points_per_axis(), true);
        Field { grid: g, data }
    }

    /// Multiplies by the closed-form multiplier at `(xi'/t, xi_n)` without
    /// storing a mask.
    pub fn multiplied(&self, spec: &MultiplierSpec, t: f64) -> Result<Spectrum> {
        eval_mask_check(spec, &self.grid, t)?;
        let radial = radial_cache(&self.grid);
        let data = self
            .data
            .iter()
            .zip(radial.iter())
            .map(|(c, &(r, xn))| {
                if c.re == 0.0 && c.im == 0.0 {
                    *c
                } else {
                    c * spec.eval_radial(r / t, xn)
                }
            })
            .collect();
        Ok(Spectrum { grid: self.grid, data })
    }
}

fn radial_cache(grid: &Grid) -> Arc<Vec<(f64, f64)>> {
    static CACHE: OnceLock<Mutex<Vec<(Grid, Arc<Vec<(f64, f64)>>)>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(Vec::new()));
    let mut guard = cache.lock().unwrap();
    if let Some((_, v)) = guard.iter().find(|(g, _)| g == grid) {
        return v.clone();
    }
    let v = Arc::new(radial_frequencies(grid));
    // keep only a couple of grids alive; big grids are expensive
    if guard.len() >= 2 {
        guard.remove(0);
    }
    guard.push((*grid, v.clone()));
    v
}

/// A multiplier sampled on the dual lattice.
#[derive(Debug, Clone)]
pub struct SpectralMask {
    grid: Grid,
    values: Vec<f64>,
    spec: MultiplierSpec,
    dilation: f64,
}

impl SpectralMask {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }
    pub fn values(&self) -> &[f64] {
        &self.values
    }
    pub fn spec(&self) -> &MultiplierSpec {
        &self.spec
    }
    pub fn dilation(&self) -> f64 {
        self.dilation
    }
    pub fn sup(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

pub(crate) fn eval_mask_check(spec: &MultiplierSpec, grid: &Grid, t: f64) -> Result<()> {
    if !(t > 0.0 && t.is_finite()) {
        return arg(format!("dilation must be positive, got {t}"));
    }
    let ny = grid.nyquist();
    let (rmax, nmax) = spec.support_extent();
    let need = [rmax.map(|r| r * t.max(1.0)), nmax];
    for (which, e) in ["|xi'|", "xi_n"].iter().zip(need) {
        if let Some(e) = e {
            if e > ny * (1.0 + 1e-12) {
                let n_req = (2.0 * e * grid.box_length()).ceil() as usize;
                return Err(Error::Geometry(format!(
                    "support of {which} reaches {e:.4} beyond Nyquist {ny:.4}; need N >= {} or L <= {:.4}",
                    n_req.next_power_of_two(),
                    grid.points_per_axis() as f64 / (2.0 * e)
                )));
            }
        }
    }
    Ok(())
}

/// Samples `spec` at `(xi'/t, xi_n)` on the dual lattice of `grid`.
pub fn eval_mask(spec: &MultiplierSpec, grid: &Grid, t: f64) -> Result<SpectralMask> {
    eval_mask_check(spec, grid, t)?;
    let radial = radial_cache(grid);
    let values = radial.iter().map(|&(r, xn)| spec.eval_radial(r / t, xn)).collect();
    Ok(SpectralMask { grid: *grid, values, spec: spec.clone(), dilation: t })
}

/// Coefficientwise product.
pub fn apply_mask(s: &Spectrum, mask: &SpectralMask) -> Result<Spectrum> {
    if !s.grid.same_as(&mask.grid) {
        return arg("grid mismatch between spectrum and mask");
    }
    let data = s.data.iter().zip(&mask.values).map(|(c, m)| c * m).collect();
    Ok(Spectrum { grid: s.grid, data })
}

/// `amplitude * exp(2 pi i x.xi0)` for a lattice frequency `xi0`.
pub fn synthesize_mode(grid: &Grid, xi0: &[f64], amplitude: Complex64) -> Result<Field> {
    if xi0.len() != grid.dim() {
        return arg("frequency dimension does not match grid");
    }
    for &v in xi0 {
        if grid.slot_of(v).is_none() {
            return arg(format!("frequency {v} is not on the dual lattice"));
        }
    }
    let xi = xi0.to_vec();
    Ok(Field::from_fn(*grid, |x| {
        let ph: f64 = x.iter().zip(&xi).map(|(a, b)| a * b).sum();
        amplitude * Complex64::from_polar(1.0, TAU * ph)
    }))
}

fn plan(n: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    static PLANNER: OnceLock<Mutex<FftPlanner<f64>>> = OnceLock::new();
    let p = PLANNER.get_or_init(|| Mutex::new(FftPlanner::new()));
    let mut p = p.lock().unwrap();
    if inverse {
        p.plan_fft_inverse(n)
    } else {
        p.plan_fft_forward(n)
    }
}

/// Unnormalized n-D DFT in place (axis by axis).
pub(crate) fn fft_nd(data: &mut [Complex64], dim: usize, n: usize, inverse: bool) {
    let fft = plan(n, inverse);
    let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
    const BATCH: usize = 16;
    let mut buf = vec![Complex64::new(0.0, 0.0); n * BATCH];
    for axis in 0..dim {
        let stride = n.pow((dim - 1 - axis) as u32);
        if stride == 1 {
            fft.process_with_scratch(data, &mut scratch);
            continue;
        }
        let outer = data.len() / (n * stride);
        for o in 0..outer {
            let base = o * n * stride;
            let mut inner = 0;
            while inner < stride {
                let b = BATCH.min(stride - inner);
                for k in 0..n {
                    let row = base + k * stride + inner;
                    for j in 0..b {
                        buf[j * n + k] = data[row + j];
                    }
                }
                fft.process_with_scratch(&mut buf[..b * n], &mut scratch);
                for k in 0..n {
                    let row = base + k * stride + inner;
                    for j in 0..b {
                        data[row + j] = buf[j * n + k];
                    }
                }
                inner += b;
            }
        }
    }
}

/// Per-axis phase `exp(-2 pi i o m/N) (-1)^m` from the box offset.
fn axis_phase(grid: &Grid) -> Vec<Complex64> {
    let n = grid.points_per_axis() as f64;
    let o = grid.offset();
    (0..grid.points_per_axis())
        .map(|m| {
            let s = grid.signed_index(m) as f64;
            let sign = if grid.signed_index(m).rem_euclid(2) == 0 { 1.0 } else { -1.0 };
            Complex64::from_polar(sign, -TAU * o * s / n)
        })
        .collect()
}

fn scale_by_phase(data: &mut [Complex64], grid: &Grid, conj: bool, scale: f64) {
    let ph = axis_phase(grid);
    let ph: Vec<Complex64> = if conj { ph.iter().map(|z| z.conj()).collect() } else { ph };
    let n = grid.points_per_axis();
    let dim = grid.dim();
    let trivial = grid.offset() == 0.0;
    // outer product of per-axis factors, built with a running prefix over the
    // slow axes and a contiguous sweep over the last axis
    let rows = data.len() / n;
    let mut idx = vec![0usize; dim];
    for row in 0..rows {
        let mut pre = Complex64::new(scale, 0.0);
        let mut r = row;
        for a in (0..dim - 1).rev() {
            idx[a] = r % n;
            r /= n;
        }
        for &k in &idx[..dim - 1] {
            pre *= ph[k];
        }
        let chunk = &mut data[row * n..(row + 1) * n];
        if trivial {
            for (m, z) in chunk.iter_mut().enumerate() {
                *z *= if m % 2 == 0 { pre } else { -pre };
            }
        } else {
            for (z, p) in chunk.iter_mut().zip(&ph) {
                *z *= pre * p;
            }
        }
    }
}

pub fn forward_transform(f: &Field) -> Spectrum {
    let g = f.grid;
    let mut data = f.data.clone();
    fft_nd(&mut data, g.dim(), g.points_per_axis(), false);
    scale_by_phase(&mut data, &g, false, g.cell_volume());
    Spectrum { grid: g, data }
}

pub fn inverse_transform(s: &Spectrum) -> Field {
    let g = s.grid;
    let mut data = s.data.clone();
    scale_by_phase(&mut data, &g, true, g.dual_cell_volume());
    fft_nd(&mut data, g.dim(), g.points_per_axis(), true);
    Field { grid: g, data }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use rand::Rng;

    fn random_field(grid: Grid, seed: u64) -> Field {
        let mut r = rng::stream(seed, 0);
        let data = (0..grid.size()).map(|_| Complex64::new(r.gen::<f64>() - 0.5, r.gen::<f64>() - 0.5)).collect();
        Field::new(grid, data).unwrap()
    }

    fn brute_dft(f: &Field) -> Vec<Complex64> {
        let g = f.grid();
        let c = g.coords();
        let fr = g.freqs();
        let mut ix = vec![0; g.dim()];
        let mut im = vec![0; g.dim()];
        (0..g.size())
            .map(|m| {
                g.unravel(m, &mut im);
                let mut s = Complex64::new(0.0, 0.0);
                for k in 0..g.size() {
                    g.unravel(k, &mut ix);
                    let ph: f64 = ix.iter().zip(&im).map(|(&a, &b)| c[a] * fr[b]).sum();
                    s += f.samples()[k] * Complex64::from_polar(1.0, -TAU * ph);
                }
                s * g.cell_volume()
            })
            .collect()
    }

    #[test]
    fn grid_examples() {
        let g = Grid::new(2, 8, 16.0).unwrap();
        assert_eq!(g.freq_step(), 1.0 / 16.0);
        let g = Grid::new(3, 128, 64.0).unwrap();
        assert_eq!(g.size(), 128 * 128 * 128);
        assert_eq!(g.nyquist(), 1.0);
        assert!(matches!(Grid::new(2, 7, 16.0), Err(Error::Argument(_))));
        assert!(matches!(Grid::new(3, 4096, 1.0), Err(Error::Resource(_))));
        assert!(Grid::with_options(2, 64, 1.0, Sampling::Vertex, 1000).is_err());
    }

    #[test]
    fn transform_matches_direct_sum() {
        for (dim, n, len, s) in [
            (1, 8, 3.0, Sampling::Vertex),
            (1, 8, 5.0, Sampling::CellCentered),
            (2, 8, 2.0, Sampling::Vertex),
            (2, 8, 7.0, Sampling::CellCentered),
            (3, 8, 4.0, Sampling::CellCentered),
        ] {
            let g = Grid::with_options(dim, n, len, s, DEFAULT_MEMORY_CAP).unwrap();
            let f = random_field(g, 11);
            let a = f.forward();
            let b = brute_dft(&f);
            let scale = b.iter().map(|z| z.norm()).fold(0.0, f64::max);
            for (x, y) in a.coeffs().iter().zip(&b) {
                assert!((x - y).norm() <= 1e-13 * scale.max(1.0), "{x} vs {y}");
            }
        }
    }

    #[test]
    fn roundtrip_and_plancherel() {
        let g = Grid::new(2, 16, 3.0).unwrap();
        let f = random_field(g, 5);
        let back = f.forward().inverse();
        let dev = f.sub(&back).unwrap().sup_norm();
        assert!(dev <= 1e-12);
        let a = f.l2_norm();
        let b = f.forward().l2_norm();
        assert!((a - b).abs() <= 1e-12 * a);
    }

    #[test]
    fn unitarity_over_many_fields() {
        for (dim, n) in [(1, 64), (2, 32), (3, 16)] {
            for s in 0..(1000 / 3 + 1) {
                let samp = if s % 2 == 0 { Sampling::Vertex } else { Sampling::CellCentered };
                let g = Grid::with_options(dim, n, 1.0 + s as f64 * 0.01, samp, DEFAULT_MEMORY_CAP).unwrap();
                let f = random_field(g, 1000 + s as u64);
                let a = f.l2_norm().powi(2);
                let b = f.forward().l2_norm().powi(2);
                assert!((a - b).abs() <= 1e-10 * a);
            }
        }
    }

    #[test]
    fn single_mode_has_single_coefficient() {
        for samp in [Sampling::Vertex, Sampling::CellCentered] {
            let g = Grid::with_options(2, 16, 4.0, samp, DEFAULT_MEMORY_CAP).unwrap();
            let xi = [0.75, -1.25];
            let f = synthesize_mode(&g, &xi, Complex64::new(2.0, 1.0)).unwrap();
            let s = f.forward();
            let target = g.ravel(&[g.slot_of(xi[0]).unwrap(), g.slot_of(xi[1]).unwrap()]);
            for (i, c) in s.coeffs().iter().enumerate() {
                if i == target {
                    // coefficient times L^{-n} is the amplitude
                    let amp = c * g.dual_cell_volume();
                    assert!((amp - Complex64::new(2.0, 1.0)).norm() < 1e-12);
                } else {
                    assert!(c.norm() < 1e-11, "leak at {i}: {c}");
                }
            }
        }
        let g = Grid::new(1, 8, 2.0).unwrap();
        let f = synthesize_mode(&g, &[0.0], Complex64::new(1.0, 0.0)).unwrap();
        assert!(f.samples().iter().all(|z| (z - 1.0).norm() < 1e-15));
        assert!(synthesize_mode(&g, &[0.3], Complex64::new(1.0, 0.0)).is_err());
        assert!(synthesize_mode(&g, &[2.0], Complex64::new(1.0, 0.0)).is_err());
    }

    #[test]
    fn two_modes_two_nonzeros() {
        let g = Grid::new(2, 16, 4.0).unwrap();
        let a = synthesize_mode(&g, &[0.25, 0.5], Complex64::new(1.0, 0.0)).unwrap();
        let b = synthesize_mode(&g, &[-1.0, 0.75], Complex64::new(0.0, 1.0)).unwrap();
        let s = a.add(&b).unwrap().forward();
        assert_eq!(s.coeffs().iter().filter(|c| c.norm() > 1e-9).count(), 2);
    }

    #[test]
    fn mask_identity_and_zero() {
        let g = Grid::new(2, 16, 4.0).unwrap();
        let f = random_field(g, 3).forward();
        let one = SpectralMask { grid: g, values: vec![1.0; g.size()], spec: MultiplierSpec::BandPsi { k: 0 }, dilation: 1.0 };
        assert_eq!(apply_mask(&f, &one).unwrap(), f);
        let zero = SpectralMask { values: vec![0.0; g.size()], ..one.clone() };
        assert!(apply_mask(&f, &zero).unwrap().is_zero());
        let g2 = Grid::new(2, 16, 5.0).unwrap();
        assert!(apply_mask(&Spectrum::zeros(g2), &one).is_err());
    }
}
