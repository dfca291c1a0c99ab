//! Physical-space kernels of the collar and cone multipliers, their dyadic
//! and angular pieces, and the decay measurements made on them.
//!
//! `K_delta` is the inverse transform of the collar multiplier `m_delta`.
//! `K_j = K_delta Psi_j` for `j >= j0` and `K_{j,t}(x) = t^{n-1} K_j(t x', x_n)`.
//! Frequency pieces use distances to the part of the cone that carries the
//! collar, `{|xi'| = xi_n, 1/2 <= xi_n <= 2}`.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bumps::{eta, mu_delta, psi, AngularCollar, LpPartition};
use crate::error::{arg, Error, Result};
use crate::field::{eval_mask, Field, Grid, Sampling, Spectrum};
use crate::fit::{fit_scaling, FitModel, ScalingFit};
use crate::multipliers::MultiplierSpec;
use crate::operators::TGrid;
use crate::quad;
use crate::rng;
use crate::special::bessel_j0;
use crate::weights::{weight_cells, WeightParams};
use crate::Complex64;

const TAU: f64 = std::f64::consts::TAU;

/// Distance from `xi` to `{|xi'| = xi_n, 1/2 <= xi_n <= 2}`.
pub fn support_cone_dist(xi: &[f64]) -> f64 {
    let (xn, rest) = xi.split_last().expect("empty frequency");
    let r = rest.iter().map(|v| v * v).sum::<f64>().sqrt();
    let s = (0.5 * (r + xn)).clamp(0.5, 2.0);
    (r - s).hypot(xn - s)
}

fn check_resolution(grid: &Grid, delta: f64) -> Result<()> {
    if !(delta > 0.0 && delta <= 0.25) {
        return arg(format!("delta must lie in (0, 1/4], got {delta}"));
    }
    if grid.freq_step() > delta / 8.0 {
        return Err(Error::Resolution(format!(
            "lattice step 1/L = {} does not resolve delta = {delta}; need L >= {}",
            grid.freq_step(),
            8.0 / delta
        )));
    }
    Ok(())
}

/// `K_delta = (m_delta)^v` on the grid. The kernel is complex: `m_delta` is
/// even in `xi'` but not in `xi_n`, so only `K(-x) = conj K(x)` holds.
pub fn kernel_delta(grid: &Grid, delta: f64) -> Result<Field> {
    check_resolution(grid, delta)?;
    let mask = eval_mask(&MultiplierSpec::DeltaCollar { delta }, grid, 1.0)?;
    let data = mask.values().iter().map(|&v| Complex64::new(v, 0.0)).collect();
    Ok(Spectrum::new(*grid, data)?.into_field())
}

/// Which angular piece of `K_j` to keep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CollarPiece {
    Level(i32),
    Far,
}

#[derive(Debug, Clone)]
pub struct KernelPiece {
    pub j: i32,
    pub collar: Option<CollarPiece>,
    pub delta: f64,
    pub field: Field,
    pub spectrum: Spectrum,
}

fn radius(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn check_piece(grid: &Grid, j: i32, delta: f64) -> Result<LpPartition> {
    let part = LpPartition::for_delta(delta);
    if j < part.j0 {
        return arg(format!("piece index {j} below j0 = {}", part.j0));
    }
    if (j as f64 + 1.0).exp2() > 0.5 * grid.box_length() {
        return Err(Error::Geometry(format!(
            "piece {j} reaches radius 2^{} beyond L/2 = {}; need L >= {}",
            j + 1,
            0.5 * grid.box_length(),
            (j as f64 + 2.0).exp2()
        )));
    }
    Ok(part)
}

fn cut_piece(kd: &Field, part: &LpPartition, j: i32) -> Field {
    let grid = *kd.grid();
    let mut out = kd.clone();
    let c = grid.coords();
    let mut idx = vec![0usize; grid.dim()];
    let mut x = vec![0.0; grid.dim()];
    for (flat, z) in out.samples_mut().iter_mut().enumerate() {
        grid.unravel(flat, &mut idx);
        for (v, &k) in x.iter_mut().zip(&idx) {
            *v = c[k];
        }
        *z *= part.piece(radius(&x), j).expect("index checked");
    }
    out
}

fn apply_collar(spectrum: &mut Spectrum, collar: &AngularCollar, piece: CollarPiece) -> Result<()> {
    let grid = *spectrum.grid();
    let fr = grid.freqs();
    let mut idx = vec![0usize; grid.dim()];
    let mut xi = vec![0.0; grid.dim()];
    if let CollarPiece::Level(l) = piece {
        collar.piece(0.0, l)?;
    }
    for (flat, z) in spectrum.coeffs_mut().iter_mut().enumerate() {
        grid.unravel(flat, &mut idx);
        for (v, &m) in xi.iter_mut().zip(&idx) {
            *v = fr[m];
        }
        let d = support_cone_dist(&xi);
        *z *= match piece {
            CollarPiece::Level(l) => collar.piece(d, l)?,
            CollarPiece::Far => collar.far(d),
        };
    }
    Ok(())
}

/// `K_j`, optionally restricted in frequency to one angular piece.
pub fn kernel_piece(
    grid: &Grid,
    j: i32,
    delta: f64,
    collar: Option<(&AngularCollar, CollarPiece)>,
) -> Result<KernelPiece> {
    let part = check_piece(grid, j, delta)?;
    let kd = kernel_delta(grid, delta)?;
    piece_from(&kd, &part, j, delta, collar)
}

fn piece_from(
    kd: &Field,
    part: &LpPartition,
    j: i32,
    delta: f64,
    collar: Option<(&AngularCollar, CollarPiece)>,
) -> Result<KernelPiece> {
    let field = cut_piece(kd, part, j);
    let mut spectrum = field.forward();
    let field = match collar {
        None => field,
        Some((c, piece)) => {
            apply_collar(&mut spectrum, c, piece)?;
            spectrum.inverse()
        }
    };
    Ok(KernelPiece { j, collar: collar.map(|c| c.1), delta, field, spectrum })
}

/// All pieces `j0..=jmax` that fit the box, with `2^{jmax+1} = L/2`.
#[derive(Debug, Clone)]
pub struct PieceSum {
    pub pieces: Vec<KernelPiece>,
    /// `max |sum_j K_j + R - K_delta|` with `R` the part beyond `jmax`.
    pub identity_error: f64,
    /// `||R||_2^2 / ||K_delta||_2^2`.
    pub tail_mass: f64,
}

pub fn kernel_pieces(grid: &Grid, delta: f64) -> Result<PieceSum> {
    let part = LpPartition::for_delta(delta);
    let jmax = (0.25 * grid.box_length()).log2().floor() as i32;
    check_piece(grid, jmax, delta)?;
    let kd = kernel_delta(grid, delta)?;
    let pieces = (part.j0..=jmax)
        .map(|j| piece_from(&kd, &part, j, delta, None))
        .collect::<Result<Vec<_>>>()?;
    let c = grid.coords();
    let mut idx = vec![0usize; grid.dim()];
    let mut x = vec![0.0; grid.dim()];
    let scale = (-(jmax as f64) - 1.0).exp2();
    let (mut err, mut tail2, mut total2) = (0.0f64, 0.0, 0.0);
    for (flat, k) in kd.samples().iter().enumerate() {
        grid.unravel(flat, &mut idx);
        for (v, &m) in x.iter_mut().zip(&idx) {
            *v = c[m];
        }
        let rest = *k * (1.0 - eta(scale * radius(&x)));
        let sum: Complex64 = pieces.iter().map(|p| p.field.samples()[flat]).sum();
        err = err.max((sum + rest - k).norm());
        tail2 += rest.norm_sqr();
        total2 += k.norm_sqr();
    }
    Ok(PieceSum { pieces, identity_error: err, tail_mass: tail2 / total2 })
}

/// Lattice region probed by [`offcone_spectrum_sup`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Probe {
    Global,
    /// `2^l delta <= dist < 2^{l+1} delta`
    Shell(i32),
    /// `dist >= 1/2`
    Far,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbeSup {
    pub value: f64,
    pub points: usize,
}

impl ProbeSup {
    pub fn is_empty(&self) -> bool {
        self.points == 0
    }
}

fn probe_sup(spectrum: &Spectrum, center: &[f64], delta: f64, probe: Probe) -> ProbeSup {
    let grid = *spectrum.grid();
    let fr = grid.freqs();
    let dim = grid.dim();
    let (lo, hi) = match probe {
        Probe::Global => (f64::NEG_INFINITY, f64::INFINITY),
        Probe::Shell(l) => ((l as f64).exp2() * delta, (l as f64 + 1.0).exp2() * delta),
        Probe::Far => (0.5, f64::INFINITY),
    };
    let n = grid.points_per_axis();
    let (value, points) = spectrum
        .coeffs()
        .par_chunks(n)
        .enumerate()
        .map(|(row, chunk)| {
            let mut idx = vec![0usize; dim];
            let mut xi = vec![0.0; dim];
            grid.unravel(row * n, &mut idx);
            for a in 0..dim - 1 {
                xi[a] = center[a] + fr[idx[a]];
            }
            let mut best = 0.0f64;
            let mut count = 0usize;
            for (m, z) in chunk.iter().enumerate() {
                xi[dim - 1] = center[dim - 1] + fr[m];
                if matches!(probe, Probe::Global) {
                    best = best.max(z.norm());
                    count += 1;
                    continue;
                }
                let d = support_cone_dist(&xi);
                if d >= lo && d < hi {
                    best = best.max(z.norm());
                    count += 1;
                }
            }
            (best, count)
        })
        .reduce(|| (0.0, 0), |a, b| (a.0.max(b.0), a.1 + b.1));
    ProbeSup { value, points }
}

/// `sup |K_j^|` over the lattice points selected by `probe`.
pub fn offcone_spectrum_sup(piece: &KernelPiece, probe: Probe) -> ProbeSup {
    let center = vec![0.0; piece.spectrum.grid().dim()];
    probe_sup(&piece.spectrum, &center, piece.delta, probe)
}

/// `K_j^` on a frequency window around the `xi_1 > 0` half of the collar in
/// the plane. The window is `center + [-1, 1)^2`, sampled at spacing
/// `1/L` with `L = 2^{j+2}`, so the physical grid only needs spacing 1/2.
/// The `xi_1 < 0` half of `m_delta` is left out; its contribution on the
/// window is a far tail of `Psi_j^`.
#[derive(Debug, Clone)]
pub struct SpectrumPatch {
    pub j: i32,
    pub delta: f64,
    pub center: [f64; 2],
    pub spectrum: Spectrum,
}

pub const PATCH_CENTER: [f64; 2] = [1.25, 1.25];

pub fn spectrum_patch(j: i32, delta: f64) -> Result<SpectrumPatch> {
    let len = (j as f64 + 2.0).exp2();
    let grid = Grid::new(2, 2 * len as usize, len)?;
    check_resolution(&grid, delta)?;
    let part = check_piece(&grid, j, delta)?;
    let spec = MultiplierSpec::DeltaCollar { delta };
    let fr = grid.freqs();
    let n = grid.points_per_axis();
    let c = PATCH_CENTER;
    let mut data = vec![Complex64::new(0.0, 0.0); grid.size()];
    data.par_chunks_mut(n).enumerate().for_each(|(row, chunk)| {
        let x1 = c[0] + fr[row];
        for (m, z) in chunk.iter_mut().enumerate() {
            let x2 = c[1] + fr[m];
            if x2 > 0.5 && x2 < 2.0 && x1 > 0.0 && x1 < x2 && x1 > (1.0 - delta) * x2 {
                *z = Complex64::new(spec.eval_radial(x1, x2), 0.0);
            }
        }
    });
    let mut field = Spectrum::new(grid, data)?.into_field();
    let xs = grid.coords();
    field.samples_mut().par_chunks_mut(n).enumerate().for_each(|(row, chunk)| {
        let a = xs[row];
        for (k, z) in chunk.iter_mut().enumerate() {
            *z *= part.piece(a.hypot(xs[k]), j).expect("index checked");
        }
    });
    Ok(SpectrumPatch { j, delta, center: c, spectrum: field.into_spectrum() })
}

impl SpectrumPatch {
    pub fn sup(&self, probe: Probe) -> ProbeSup {
        probe_sup(&self.spectrum, &self.center, self.delta, probe)
    }
}

/// `||(eta(|.|))^||_1` on `R^dim` (`dim` 2 or 3): the `L^1` norm of the
/// transform of `Psi_{j0}`, which does not depend on the scale.
pub fn bottom_piece_hat_l1(dim: usize) -> Result<f64> {
    let profile = |rho: f64| -> f64 {
        let panels = 8 + (4.0 * rho) as usize;
        let kernel = |r: f64| -> f64 {
            let z = TAU * rho * r;
            match dim {
                2 => TAU * r * bessel_j0(z),
                _ => {
                    let sinc = if z.abs() < 1e-8 { 1.0 - z * z / 6.0 } else { z.sin() / z };
                    2.0 * TAU * r * r * sinc
                }
            }
        };
        quad::composite_gl(|r| kernel(r), 0.0, 0.5, panels, 16)
            + quad::composite_gl(|r| eta(r) * kernel(r), 0.5, 1.0, panels, 16)
    };
    let shell = match dim {
        2 => |rho: f64| TAU * rho,
        3 => |rho: f64| 2.0 * TAU * rho * rho,
        _ => return arg(format!("dimension must be 2 or 3, got {dim}")),
    };
    Ok(quad::composite_gl(|rho| profile(rho).abs() * shell(rho), 0.0, 40.0, 640, 8))
}

/// Quadrature nodes per axis needed for `K_lambda` at `(rho, x_n)`.
pub fn klambda_required_points(rho: f64, xn: f64) -> usize {
    8 * (rho.hypot(xn).ceil() as usize).max(2)
}

/// `K_lambda(x)` for `n = 3` at `|x'| = rho`, by the reduced quadrature
/// `2 pi int int (1 - r^2/xi_n^2)_+^lambda psi(xi_n) J0(2 pi r rho) e^{2 pi i x_n xi_n} r dr dxi_n`
/// with `r = xi_n sin(theta)`. `points` is the node count per axis.
pub fn kernel_klambda(rho: f64, xn: f64, lambda: f64, points: usize) -> Result<Complex64> {
    if !(lambda > 0.0) {
        return arg(format!("lambda must be positive, got {lambda}"));
    }
    if !(rho >= 0.0 && rho.is_finite() && xn.is_finite()) {
        return arg("need rho >= 0 and finite coordinates");
    }
    let need = klambda_required_points(rho, xn);
    if points < need {
        return Err(Error::Resolution(format!(
            "K_lambda at |x| = {:.3} needs at least {need} quadrature points per axis, got {points}",
            rho.hypot(xn)
        )));
    }
    let panels = points.div_ceil(8);
    let nodes = |a: f64, b: f64| -> Vec<(f64, f64)> {
        let (x, w) = quad::legendre_rule(8);
        let h = (b - a) / panels as f64;
        (0..panels)
            .flat_map(|p| {
                let lo = a + h * p as f64;
                x.iter().zip(&w).map(move |(&t, &wt)| (lo + 0.5 * h * (t + 1.0), 0.5 * h * wt)).collect::<Vec<_>>()
            })
            .collect()
    };
    let inner: Vec<(f64, f64)> = nodes(0.0, std::f64::consts::FRAC_PI_2)
        .into_iter()
        .map(|(th, w)| (th.sin(), w * th.cos().powf(2.0 * lambda + 1.0) * th.sin()))
        .collect();
    let mut total = Complex64::new(0.0, 0.0);
    for (t, w) in nodes(0.25, 1.0) {
        let b = psi(t);
        if b == 0.0 {
            continue;
        }
        let k = TAU * t * rho;
        let radial: f64 = inner.iter().map(|&(s, wc)| wc * bessel_j0(k * s)).sum();
        total += Complex64::from_polar(w * b * t * t * radial, TAU * xn * t);
    }
    Ok(total * TAU)
}

/// Decay of `|K_lambda|` along the ray `rho = x_n / sqrt 2`: the radii are
/// split into `windows` groups and the largest value in each group is fitted
/// against `|x|`. Returns the envelope and the fit; the decay exponent is
/// `-slope`.
pub fn klambda_ray_decay(
    lambda: f64,
    r_min: f64,
    r_max: f64,
    count: usize,
    windows: usize,
) -> Result<(Vec<(f64, f64)>, ScalingFit)> {
    if !(r_min > 0.0 && r_min < r_max) || windows < 2 || count < windows {
        return arg("need 0 < r_min < r_max and count >= windows >= 2");
    }
    let radii: Vec<f64> =
        (0..count).map(|i| r_min * (r_max / r_min).powf(i as f64 / (count - 1) as f64)).collect();
    let values = radii
        .par_iter()
        .map(|&r| {
            let xn = r * (2.0f64 / 3.0).sqrt();
            let rho = xn / 2f64.sqrt();
            let pts = 2 * klambda_required_points(rho, xn);
            kernel_klambda(rho, xn, lambda, pts).map(|z| z.norm())
        })
        .collect::<Result<Vec<f64>>>()?;
    let per = count / windows;
    let env: Vec<(f64, f64)> = (0..windows)
        .map(|w| {
            let hi = if w + 1 == windows { count } else { (w + 1) * per };
            (w * per..hi).map(|i| (radii[i], values[i])).fold((0.0, 0.0), |b, p| if p.1 > b.1 { p } else { b })
        })
        .collect();
    let fit = fit_scaling(&env, FitModel::PurePower)?;
    Ok((env, fit))
}

/// Regions of the cube lattice by the size of `|i'|` and `|i_n|` against `10 n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Region {
    E1,
    E2,
    E3,
    E4,
}

impl Region {
    fn slot(self) -> usize {
        self as usize
    }
}

/// Periodic lattice of cubes of side `c1 2^j` centred at `c1 2^j i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CubeLattice {
    pub dim: usize,
    pub j: i32,
    pub c1: f64,
    pub side: f64,
    pub per_axis: usize,
    /// Number of cubes per region, `E1..E4`.
    pub cube_counts: [usize; 4],
    /// Number of grid cells per region.
    pub cell_counts: [usize; 4],
}

impl CubeLattice {
    /// Index of the cube containing `x`, wrapped to the torus.
    pub fn cube_of(&self, x: &[f64]) -> Vec<i64> {
        let k = self.per_axis as i64;
        let lo = -(k / 2);
        x.iter()
            .map(|&v| {
                let i = (v / self.side + 0.5).floor() as i64;
                (i - lo).rem_euclid(k) + lo
            })
            .collect()
    }

    pub fn region(&self, i: &[i64]) -> Region {
        let t = 10.0 * self.dim as f64;
        let (inn, rest) = i.split_last().expect("empty index");
        let outer = rest.iter().map(|&v| (v * v) as f64).sum::<f64>().sqrt() >= t;
        let vertical = (inn.abs() as f64) >= t;
        match (outer, vertical) {
            (true, true) => Region::E1,
            (true, false) => Region::E2,
            (false, false) => Region::E3,
            (false, true) => Region::E4,
        }
    }
}

pub fn region_partition(grid: &Grid, j: i32, c1: f64) -> Result<CubeLattice> {
    if !(c1 > 0.0) {
        return arg(format!("c1 must be positive, got {c1}"));
    }
    let scale = (j as f64).exp2();
    let len = grid.box_length();
    let k = (len / (c1 * scale)).round().max(1.0);
    let c1 = len / (k * scale);
    if !(0.5..=2.0).contains(&c1) {
        return Err(Error::Geometry(format!(
            "no c1 in [1/2, 2] makes c1 2^{j} divide L = {len}"
        )));
    }
    let per_axis = k as usize;
    let dim = grid.dim();
    let mut lat = CubeLattice {
        dim,
        j,
        c1,
        side: c1 * scale,
        per_axis,
        cube_counts: [0; 4],
        cell_counts: [0; 4],
    };
    let lo = -((per_axis / 2) as i64);
    let mut i = vec![0i64; dim];
    for flat in 0..per_axis.pow(dim as u32) {
        let mut r = flat;
        for a in (0..dim).rev() {
            i[a] = lo + (r % per_axis) as i64;
            r /= per_axis;
        }
        lat.cube_counts[lat.region(&i).slot()] += 1;
    }
    let c = grid.coords();
    let mut idx = vec![0usize; dim];
    let mut x = vec![0.0; dim];
    for flat in 0..grid.size() {
        grid.unravel(flat, &mut idx);
        for (v, &m) in x.iter_mut().zip(&idx) {
            *v = c[m];
        }
        let cube = lat.cube_of(&x);
        lat.cell_counts[lat.region(&cube).slot()] += 1;
    }
    Ok(lat)
}

/// `(int |K_{j,t} * f|^2 dt/t)^{1/2}` over the t-grid for a batch of fields
/// on one vertex grid. The convolution is the exact periodic one.
pub fn piece_square_functions(fields: &[Field], j: i32, delta: f64, tg: &TGrid) -> Result<Vec<Field>> {
    let grid = match fields.first() {
        Some(f) => *f.grid(),
        None => return Ok(Vec::new()),
    };
    if grid.sampling() != Sampling::Vertex {
        return arg("piece square functions need a vertex grid (origin on the grid)");
    }
    if fields.iter().any(|f| f.grid() != &grid) {
        return arg("all fields must share one grid");
    }
    let part = check_piece(&grid, j, delta)?;
    let spec = MultiplierSpec::DeltaCollar { delta };
    let spectra: Vec<Spectrum> = fields.iter().map(|f| f.forward()).collect();
    let dim = grid.dim();
    let c = grid.coords();
    let mut acc = vec![vec![0.0f64; grid.size()]; fields.len()];
    for (t, wt) in tg.values().into_iter().zip(tg.log_weights()) {
        let mask = eval_mask(&spec, &grid, t)?;
        let data = mask.values().iter().map(|&v| Complex64::new(v, 0.0)).collect();
        let mut k = Spectrum::new(grid, data)?.into_field();
        let mut idx = vec![0usize; dim];
        let mut x = vec![0.0; dim];
        for (flat, z) in k.samples_mut().iter_mut().enumerate() {
            grid.unravel(flat, &mut idx);
            for (a, (v, &m)) in x.iter_mut().zip(&idx).enumerate() {
                *v = if a + 1 < dim { t * c[m] } else { c[m] };
            }
            *z *= part.piece(radius(&x), j).expect("index checked");
        }
        let khat = k.into_spectrum();
        acc.par_iter_mut().zip(&spectra).for_each(|(a, s)| {
            let data = s.coeffs().iter().zip(khat.coeffs()).map(|(u, v)| u * v).collect();
            let g = Spectrum::new(grid, data).expect("same grid").into_field();
            for (v, z) in a.iter_mut().zip(g.samples()) {
                *v += wt * z.norm_sqr();
            }
        });
    }
    acc.into_iter()
        .map(|a| Field::new(grid, a.into_iter().map(|v| Complex64::new(v.sqrt(), 0.0)).collect()))
        .collect()
}

/// Sparse spectra sharing one support of lattice indices.
#[derive(Debug, Clone)]
pub struct SparseFamily {
    pub support: Vec<Vec<i64>>,
    pub coeffs: Vec<Vec<Complex64>>,
}

/// Random fields with spectrum in the ball of radius `radius` around
/// `center`, complex Gaussian coefficients under a smooth radial envelope.
pub fn sparse_family(grid: &Grid, center: &[f64], radius: f64, count: usize, seed: u64) -> SparseFamily {
    let len = grid.box_length();
    let dim = grid.dim();
    let reach = (radius * len).ceil() as i64;
    let base: Vec<i64> = center.iter().map(|c| (c * len).round() as i64).collect();
    let mut support = Vec::new();
    let mut env = Vec::new();
    let mut i = vec![-reach; dim];
    loop {
        let d = i.iter().map(|&v| (v as f64 / len).powi(2)).sum::<f64>().sqrt() / radius;
        if d < 1.0 {
            support.push(i.iter().zip(&base).map(|(a, b)| a + b).collect::<Vec<i64>>());
            env.push((1.0 - d * d).powi(2));
        }
        let mut a = 0;
        while a < dim {
            i[a] += 1;
            if i[a] <= reach {
                break;
            }
            i[a] = -reach;
            a += 1;
        }
        if a == dim {
            break;
        }
    }
    let coeffs = (0..count)
        .map(|k| {
            let mut r = rng::stream(seed, rng::stream_id("sparse-family", k as u64));
            env.iter().map(|&e| Complex64::new(rng::normal(&mut r), rng::normal(&mut r)) * e).collect()
        })
        .collect();
    SparseFamily { support, coeffs }
}

impl SparseFamily {
    /// The `k`-th member as a spectrum on `grid`.
    pub fn spectrum(&self, grid: &Grid, k: usize) -> Result<Spectrum> {
        let mut s = Spectrum::zeros(*grid);
        let n = grid.points_per_axis() as i64;
        for (idx, c) in self.support.iter().zip(&self.coeffs[k]) {
            let slots: Vec<usize> = idx
                .iter()
                .map(|&v| {
                    if v < -n / 2 || v >= n / 2 {
                        Err(Error::Geometry(format!("lattice index {v} outside the grid")))
                    } else {
                        Ok(v.rem_euclid(n) as usize)
                    }
                })
                .collect::<Result<_>>()?;
            let flat = grid.ravel(&slots);
            s.coeffs_mut()[flat] = *c;
        }
        Ok(s)
    }
}

/// `||G_0 f||_{L^2(w)} / ||f||_{L^2(w)}` for every member of `family`, with
/// `G_0 f = (int_1^2 |(m_delta(xi'/t, xi_n) f^)^v|^2 dt/t)^{1/2}`.
///
/// Both norms are the grid sums with cell-averaged weights, written as
/// quadratic forms in the coefficients: with `W^` the transform of the
/// weight cells, `sum_x w |g|^2 h^n = L^{-2n} sum c_xi conj(c_eta) W^(eta - xi)`,
/// and the t-integral of `m_t(xi) m_t(eta)` is done per pair by
/// Gauss-Legendre over the common support in `log t`.
pub fn g0_weighted_ratios(grid: &Grid, delta: f64, w: &WeightParams, family: &SparseFamily) -> Result<Vec<f64>> {
    if !(delta > 0.0 && delta <= 0.25) {
        return arg(format!("delta must lie in (0, 1/4], got {delta}"));
    }
    w.check_a2_window(grid.dim())?;
    let cells = weight_cells(grid, w)?;
    let wf = Field::new(*grid, cells.into_iter().map(|v| Complex64::new(v, 0.0)).collect())?;
    let what = wf.into_spectrum();
    let n = grid.points_per_axis() as i64;
    let len = grid.box_length();
    let dim = grid.dim();
    let pts = &family.support;
    for k in 0..dim {
        let lo = pts.iter().map(|p| p[k]).min().unwrap_or(0);
        let hi = pts.iter().map(|p| p[k]).max().unwrap_or(0);
        if hi - lo >= n / 2 {
            return Err(Error::Geometry(format!(
                "support spans {} lattice steps on axis {k}; differences must stay below N/2 = {}",
                hi - lo,
                n / 2
            )));
        }
    }
    // differences below N/2 never alias
    let lookup = |a: &[i64], b: &[i64]| -> Complex64 {
        let slots: Vec<usize> = a.iter().zip(b).map(|(x, y)| (y - x).rem_euclid(n) as usize).collect();
        what.coeffs()[grid.ravel(&slots)]
    };

    // active log-t interval of every support point
    let ln2 = 2f64.ln();
    let mut active: Vec<(usize, f64, f64, f64, f64)> = Vec::new();
    for (p, idx) in pts.iter().enumerate() {
        let xn = idx[dim - 1] as f64 / len;
        let r = idx[..dim - 1].iter().map(|&v| (v as f64 / len).powi(2)).sum::<f64>().sqrt();
        let b = psi(0.5 * xn);
        if b == 0.0 || xn <= 0.0 {
            continue;
        }
        let q = r / xn;
        let lo = q.max(1.0).ln();
        let hi = (q / (1.0 - delta)).ln().min(ln2);
        if lo < hi {
            active.push((p, q, b, lo, hi));
        }
    }
    active.sort_by(|a, b| a.3.total_cmp(&b.3));
    let (gx, gw) = quad::legendre_rule(24);
    let mu = |q: f64, s: f64| mu_delta(q * (-s).exp(), delta);
    let pairs: Vec<(usize, usize, Complex64)> = (0..active.len())
        .into_par_iter()
        .map(|a| {
            let (pa, qa, ba, _, ha) = active[a];
            let mut out = Vec::new();
            for item in &active[a..] {
                let (pb, qb, bb, lb, hb) = *item;
                if lb >= ha {
                    break;
                }
                let (s0, s1) = (lb, ha.min(hb));
                let half = 0.5 * (s1 - s0);
                let mid = 0.5 * (s1 + s0);
                let integral: f64 = gx
                    .iter()
                    .zip(&gw)
                    .map(|(&x, &wt)| {
                        let s = mid + half * x;
                        wt * mu(qa, s) * mu(qb, s)
                    })
                    .sum::<f64>()
                    * half;
                let weight = lookup(&pts[pa], &pts[pb]);
                out.push((pa, pb, weight * (ba * bb * integral)));
            }
            out
        })
        .flatten()
        .collect();
    let w0 = what.coeffs()[0].re;
    let ratios = family
        .coeffs
        .par_iter()
        .map(|c| {
            let mut num = 0.0;
            for &(a, b, q) in &pairs {
                let v = c[a] * c[b].conj() * q;
                num += if a == b { v.re } else { 2.0 * v.re };
            }
            let mut den = 0.0;
            for a in 0..pts.len() {
                den += c[a].norm_sqr() * w0;
                for b in a + 1..pts.len() {
                    let v = c[a] * c[b].conj() * lookup(&pts[a], &pts[b]);
                    den += 2.0 * v.re;
                }
            }
            (num / den).sqrt()
        })
        .collect();
    Ok(ratios)
}

/// Draws a uniform random real field supported in the cube `[-s/2, s/2)^n`.
pub fn cube_field(grid: &Grid, side: f64, seed: u64) -> Field {
    let mut r = rng::stream(seed, rng::stream_id("cube-field", 0));
    Field::from_fn(*grid, |x| {
        let v: f64 = r.gen::<f64>() - 0.5;
        if x.iter().all(|&c| c >= -0.5 * side && c < 0.5 * side) {
            Complex64::new(v, 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        }
    })
}
