//! Power weights `w(x) = |x'|^{-alpha} |x_n|^{-beta}`.
//!
//! Weighted norms on grids use the cell average of the weight instead of its
//! value at the cell center. The weight is integrable across the singular
//! planes (inside the admissible window), so the cell average is finite and the
//! resulting sum converges at the rate of the smooth factor `|f|^2`.

use serde::{Deserialize, Serialize};

use crate::error::{arg, Error, Result};
use crate::field::{Field, Grid, Sampling};
use crate::quad;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightParams {
    pub alpha: f64,
    pub beta: f64,
}

impl WeightParams {
    pub fn new(alpha: f64, beta: f64) -> WeightParams {
        WeightParams { alpha, beta }
    }

    pub fn unweighted() -> WeightParams {
        WeightParams { alpha: 0.0, beta: 0.0 }
    }

    /// The reciprocal weight.
    pub fn inverse(&self) -> WeightParams {
        WeightParams { alpha: -self.alpha, beta: -self.beta }
    }

    /// `|x'|^{-alpha} |x_n|^{-beta}` at a point of `R^n`.
    pub fn value(&self, x: &[f64]) -> f64 {
        let (xn, rest) = x.split_last().expect("empty point");
        let r = rest.iter().map(|v| v * v).sum::<f64>().sqrt();
        let a = if rest.is_empty() { 1.0 } else { r.powf(-self.alpha) };
        a * xn.abs().powf(-self.beta)
    }

    /// Product A2 window `alpha in (-(n-1), n-1)`, `beta in (-1, 1)`.
    pub fn in_a2_window(&self, n: usize) -> bool {
        let d = (n - 1) as f64;
        self.alpha > -d && self.alpha < d && self.beta > -1.0 && self.beta < 1.0
    }

    pub fn check_a2_window(&self, n: usize) -> Result<()> {
        if !self.in_a2_window(n) {
            return arg(format!(
                "weight ({}, {}) outside the product A2 window for n = {n}",
                self.alpha, self.beta
            ));
        }
        Ok(())
    }

    /// Trace window `alpha in [0, n-1)`, `beta in [0, 1)`.
    pub fn check_trace_window(&self, n: usize) -> Result<()> {
        let d = (n - 1) as f64;
        if !(self.alpha >= 0.0 && self.alpha < d && self.beta >= 0.0 && self.beta < 1.0) {
            return arg(format!("weight ({}, {}) outside the trace window for n = {n}", self.alpha, self.beta));
        }
        Ok(())
    }
}

/// Mean of `|x|^{-a}` over `[lo, hi]` (one dimension, `a < 1`).
pub fn interval_power_mean(a: f64, lo: f64, hi: f64) -> f64 {
    if a == 0.0 {
        return 1.0;
    }
    let anti = |x: f64| x.signum() * x.abs().powf(1.0 - a) / (1.0 - a);
    if a < 1.0 {
        (anti(hi) - anti(lo)) / (hi - lo)
    } else if lo * hi <= 0.0 {
        // not integrable across 0
        f64::INFINITY
    } else {
        quad::gauss_legendre(|x| x.abs().powf(-a), lo, hi, 16) / (hi - lo)
    }
}

/// Per-axis cell averages of `|x|^{-a}` along one grid axis.
fn axis_means(grid: &Grid, a: f64) -> Vec<f64> {
    let h = grid.spacing();
    grid.coords()
        .iter()
        .map(|&c| {
            if a < 1.0 {
                interval_power_mean(a, c - 0.5 * h, c + 0.5 * h)
            } else {
                c.abs().powf(-a)
            }
        })
        .collect()
}

/// Cell averages of `|x'|^{-alpha}` on the `(n-1)`-dimensional block,
/// flattened in storage order of the first `n-1` axes.
fn block_means(grid: &Grid, alpha: f64) -> Vec<f64> {
    let d = grid.dim() - 1;
    let n = grid.points_per_axis();
    if d == 0 {
        return vec![1.0];
    }
    if d == 1 {
        return axis_means(grid, alpha);
    }
    let h = grid.spacing();
    let c = grid.coords();
    let count = n.pow(d as u32);
    let near = 4.0 * h * (d as f64).sqrt();
    let mut idx = vec![0usize; d];
    let mut out = Vec::with_capacity(count);
    for flat in 0..count {
        let mut r = flat;
        for a in (0..d).rev() {
            idx[a] = r % n;
            r /= n;
        }
        let x: Vec<f64> = idx.iter().map(|&k| c[k]).collect();
        let rad = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        if rad > near || alpha == 0.0 {
            out.push(rad.powf(-alpha));
            continue;
        }
        // the weight is even in every coordinate: fold the cell into the
        // positive orthant
        let lo: Vec<f64> = x.iter().map(|&v| (v.abs() - 0.5 * h).max(0.0)).collect();
        let hi: Vec<f64> = x.iter().map(|&v| v.abs() + 0.5 * h).collect();
        out.push(box_mean(alpha, &lo, &hi));
    }
    out
}

/// Mean of `|y|^{-a}` over the box `prod [lo_i, hi_i]` in the closed positive
/// orthant. Boxes are split dyadically toward the corner nearest the origin
/// until each piece is well separated from it, then integrated with a tensor
/// Gauss rule.
pub fn box_mean(a: f64, lo: &[f64], hi: &[f64]) -> f64 {
    let d = lo.len();
    let vol: f64 = lo.iter().zip(hi).map(|(l, u)| u - l).product();
    if lo.iter().all(|&l| l == 0.0) && a >= d as f64 {
        return f64::INFINITY;
    }
    let (x, w) = quad::legendre_rule(8);
    box_integral(a, lo, hi, &x, &w, 0) / vol
}

fn box_integral(a: f64, lo: &[f64], hi: &[f64], x: &[f64], w: &[f64], depth: u32) -> f64 {
    let d = lo.len();
    let dist = lo.iter().map(|v| v * v).sum::<f64>().sqrt();
    let diam = lo.iter().zip(hi).map(|(l, u)| (u - l) * (u - l)).sum::<f64>().sqrt();
    if dist >= 2.0 * diam {
        return tensor_gauss(a, lo, hi, x, w);
    }
    if depth >= 80 {
        // the remaining corner piece is of order diam^{d-a}
        return 0.0;
    }
    // split every axis at the point that keeps pieces near the corner small
    let mid: Vec<f64> = lo.iter().zip(hi).map(|(l, u)| 0.5 * (l + u)).collect();
    let mut total = 0.0;
    let mut sub_lo = vec![0.0; d];
    let mut sub_hi = vec![0.0; d];
    for mask in 0..(1usize << d) {
        for i in 0..d {
            if mask >> i & 1 == 0 {
                sub_lo[i] = lo[i];
                sub_hi[i] = mid[i];
            } else {
                sub_lo[i] = mid[i];
                sub_hi[i] = hi[i];
            }
        }
        total += box_integral(a, &sub_lo, &sub_hi, x, w, depth + 1);
    }
    total
}

fn tensor_gauss(a: f64, lo: &[f64], hi: &[f64], x: &[f64], w: &[f64]) -> f64 {
    let d = lo.len();
    let m = x.len();
    let half: Vec<f64> = lo.iter().zip(hi).map(|(l, u)| 0.5 * (u - l)).collect();
    let mid: Vec<f64> = lo.iter().zip(hi).map(|(l, u)| 0.5 * (u + l)).collect();
    let mut idx = vec![0usize; d];
    let mut total = 0.0;
    loop {
        let mut r2 = 0.0;
        let mut wt = 1.0;
        for i in 0..d {
            let y = mid[i] + half[i] * x[idx[i]];
            r2 += y * y;
            wt *= w[idx[i]];
        }
        total += wt * r2.powf(-0.5 * a);
        let mut i = 0;
        while i < d {
            idx[i] += 1;
            if idx[i] < m {
                break;
            }
            idx[i] = 0;
            i += 1;
        }
        if i == d {
            break;
        }
    }
    total * half.iter().product::<f64>()
}

/// Cell-averaged weight on every grid cell, storage order.
pub fn weight_cells(grid: &Grid, w: &WeightParams) -> Result<Vec<f64>> {
    if grid.sampling() != Sampling::CellCentered {
        return Err(Error::Argument(
            "weighted norms need a cell-centered grid (no sample on a singular plane)".into(),
        ));
    }
    let n = grid.points_per_axis();
    let xa = block_means(grid, w.alpha);
    let xn = axis_means(grid, w.beta);
    let mut out = Vec::with_capacity(grid.size());
    for a in &xa {
        for b in &xn {
            out.push(a * b);
        }
    }
    debug_assert_eq!(out.len(), grid.size());
    let _ = n;
    Ok(out)
}

/// `(sum |f|^2 W h^n)^{1/2}` with cell-averaged weight `W`.
pub fn weighted_norm(f: &Field, w: &WeightParams) -> Result<f64> {
    let cells = weight_cells(f.grid(), w)?;
    Ok(weighted_norm_with(f, &cells))
}

/// Weighted norm with precomputed cell weights.
pub fn weighted_norm_with(f: &Field, cells: &[f64]) -> f64 {
    let s: f64 = f.samples().iter().zip(cells).map(|(z, c)| z.norm_sqr() * c).sum();
    (s * f.grid().cell_volume()).sqrt()
}

/// `(h^n sum |f|^p)^{1/p}`; `p = inf` gives `max |f|`.
pub fn lp_norm(f: &Field, p: f64) -> Result<f64> {
    if !(p >= 1.0) {
        return arg(format!("p must be at least 1, got {p}"));
    }
    if p.is_infinite() {
        return Ok(f.sup_norm());
    }
    let s: f64 = f.samples().iter().map(|z| z.norm().powf(p)).sum();
    Ok((s * f.grid().cell_volume()).powf(1.0 / p))
}

/// Rectangles approaching the singular planes: at level `k` the unit cubes
/// have their nearest corner at distance `2^{-j}` (`j <= k`) from the
/// singular set, plus a few far cubes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RectangleSweep {
    pub levels: usize,
}

/// Mean of `|y|^{-a}` over the cube `[c, c+1]^d`.
fn cube_mean(a: f64, c: f64, d: usize) -> f64 {
    box_mean(a, &vec![c; d], &vec![c + 1.0; d])
}

/// `avg w * avg w^{-1}` factor of one axis group over `[c, c+1]^d`.
fn a2_factor(a: f64, c: f64, d: usize) -> f64 {
    if a == 0.0 {
        return 1.0;
    }
    cube_mean(a, c, d) * cube_mean(-a, c, d)
}

/// Sweep maxima of `(avg_R w)(avg_R w^{-1})`, one per level.
pub fn a2_product_constant(w: &WeightParams, n: usize, sweep: &RectangleSweep) -> Vec<f64> {
    let d = n - 1;
    let far = [1.0, 2.0, 4.0];
    let mut out = Vec::with_capacity(sweep.levels);
    let mut best_p: f64 = 1.0;
    let mut best_n: f64 = 1.0;
    for &c in &far {
        best_p = best_p.max(if d == 0 { 1.0 } else { a2_factor(w.alpha, c, d) });
        best_n = best_n.max(a2_factor(w.beta, c, 1));
    }
    for k in 0..sweep.levels {
        let c = (-(k as f64)).exp2();
        if d > 0 {
            best_p = best_p.max(a2_factor(w.alpha, c, d));
        }
        best_n = best_n.max(a2_factor(w.beta, c, 1));
        out.push(best_p * best_n);
    }
    out
}
