//! One function per scenario. Each returns its records in a fixed order;
//! sweep points run on the rayon pool and a failing point becomes an error
//! row instead of aborting the run.

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use anyhow::{anyhow, ensure, Result};
use rand::Rng;
use rayon::prelude::*;

use conelab_core::decompose::{
    band_leakage, blocks, choose_exponents, dilation_report, dual_ortho_ratio, random_band_field, random_band_spectrum,
    split_four, wave_packets,
};
use conelab_core::fit::{fit_scaling, kendall_tau, FitModel};
use conelab_core::kernels::{
    g0_weighted_ratios, kernel_piece, klambda_ray_decay, offcone_spectrum_sup, sparse_family, spectrum_patch, Probe,
};
use conelab_core::multipliers::reconstruct_residual;
use conelab_core::operators::{apply_t, collar_t_integral, TGrid};
use conelab_core::trace::{interval_trace_sup, slice_volume_mc, sphere_trace_sweep, trace_constant_upper, McSpec, SweepFit};
use conelab_core::weights::{a2_product_constant, weight_cells, weighted_norm_with, RectangleSweep, WeightParams};
use conelab_core::{rng, Field, Grid, MultiplierSpec};

use crate::config::{ExperimentConfig, Scenario};
use crate::record::Record;
use crate::thresholds::{self as th, runtime_cap, runtime_quantity};

/// Runs `f`, turning both errors and panics into a message.
pub fn guarded<R>(f: impl FnOnce() -> Result<R>) -> std::result::Result<R, String> {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(v)) => Ok(v),
        Ok(Err(e)) => Err(format!("{e:#}")),
        Err(p) => Err(p
            .downcast_ref::<&str>()
            .map(|s| s.to_string())
            .or_else(|| p.downcast_ref::<String>().cloned())
            .unwrap_or_else(|| "panic".into())),
    }
}

/// Maps `f` over `points` in parallel, keeping input order.
pub fn par_guarded<T: Sync, R: Send>(
    points: &[T],
    f: impl Fn(&T) -> Result<R> + Sync,
) -> Vec<std::result::Result<R, String>> {
    points.par_iter().map(|p| guarded(|| f(p))).collect()
}

/// Pushes the value, or an error row for `point`.
fn settle<R>(out: &mut Vec<Record>, cfg: &ExperimentConfig, point: &str, r: std::result::Result<R, String>) -> Option<R> {
    match r {
        Ok(v) => Some(v),
        Err(msg) => {
            eprintln!("{} [{point}]: {msg}", cfg.scenario);
            out.push(Record::error(cfg.scenario.name(), point, cfg.seed).n(cfg.n));
            None
        }
    }
}

fn row(cfg: &ExperimentConfig, quantity: &str, value: f64) -> Record {
    Record::new(cfg.scenario.name(), quantity, value, cfg.seed).n(cfg.n)
}

/// A row judged against its threshold table entry.
fn judged(cfg: &ExperimentConfig, quantity: &str, value: f64, ok: bool) -> Record {
    debug_assert!(th::lookup(cfg.scenario.name(), quantity).is_some(), "no threshold for {quantity}");
    row(cfg, quantity, value).check(ok && value.is_finite())
}

fn dyadic_label(v: f64) -> String {
    format!("2^{}", v.log2())
}

/// Runs the configured scenario and appends the runtime row.
pub fn run(cfg: &ExperimentConfig) -> Vec<Record> {
    let start = Instant::now();
    let body = guarded(|| match cfg.scenario {
        Scenario::Reconstruct => reconstruct(cfg),
        Scenario::SquareBound => square_bound(cfg),
        Scenario::TraceSweep if cfg.n == 1 => interval_sweep(cfg),
        Scenario::TraceSweep => trace_sweep(cfg),
        Scenario::SphereSweep => sphere_sweep(cfg),
        Scenario::SliceVolume => slice_volume(cfg),
        Scenario::KernelDecay => kernel_decay(cfg),
        Scenario::OffconeDecay => offcone_decay(cfg),
        Scenario::G0Weighted => g0_weighted(cfg),
        Scenario::Converge => converge(cfg),
        Scenario::DecomposeCheck => decompose_check(cfg),
        Scenario::OrthoCheck => ortho_check(cfg),
        Scenario::A2Check => a2_check(cfg),
    });
    let mut out = Vec::new();
    if let Some(rows) = settle(&mut out, cfg, "scenario", body) {
        out.extend(rows);
    }
    if cfg.timing {
        let elapsed = start.elapsed();
        let ms = elapsed.as_millis() as u64;
        for r in &mut out {
            r.runtime_ms = Some(ms);
        }
        let secs = elapsed.as_secs_f64();
        let quantity = runtime_quantity(cfg.scenario.name(), cfg.n);
        let mut r = row(cfg, quantity, secs);
        r.runtime_ms = Some(ms);
        if let Some(cap) = runtime_cap(cfg.scenario.name(), cfg.n) {
            r = r.check(secs < cap);
        }
        out.push(r);
    }
    out
}

fn reconstruct(cfg: &ExperimentConfig) -> Result<Vec<Record>> {
    const CHUNK: usize = 10_000;
    let n = cfg.n;
    let lambda = cfg.lambda;
    let chunks: Vec<usize> = (0..cfg.samples.div_ceil(CHUNK)).collect();
    let lu = th::C1_U_MIN.ln();
    let results = par_guarded(&chunks, |&c| {
        let count = CHUNK.min(cfg.samples - c * CHUNK);
        let mut r = rng::stream(cfg.seed, rng::stream_id("reconstruct", c as u64));
        let mut worst: f64 = 0.0;
        let mut xi = vec![0.0; n];
        for _ in 0..count {
            let xn = 0.5 + 1.5 * r.gen::<f64>();
            // u = 1 - |xi'|^2 / xi_n^2, log-uniform over [u_min, 1]
            let u = (lu * r.gen::<f64>()).exp();
            let radius = xn * (1.0 - u).max(0.0).sqrt();
            let mut norm = 0.0;
            for v in xi[..n - 1].iter_mut() {
                *v = rng::normal(&mut r);
                norm += *v * *v;
            }
            let norm = norm.sqrt();
            for v in xi[..n - 1].iter_mut() {
                *v *= radius / norm;
            }
            xi[n - 1] = xn;
            worst = worst.max(reconstruct_residual(lambda, th::C1_GAMMA_MAX, &xi));
        }
        Ok(worst)
    });
    let mut out = Vec::new();
    let mut worst: Option<f64> = Some(0.0);
    for (c, r) in results.into_iter().enumerate() {
        match settle(&mut out, cfg, &format!("chunk={c}"), r) {
            Some(v) => worst = worst.map(|w| w.max(v)),
            None => worst = None,
        }
    }
    if let Some(w) = worst {
        out.push(judged(cfg, "max_residual", w, w <= th::C1_MAX_RESIDUAL).lambda(lambda));
    }
    out.push(row(cfg, "samples", cfg.samples as f64));
    Ok(out)
}

fn t_grid(cfg: &ExperimentConfig, t_min: f64, t_max: f64, scale: f64) -> Result<TGrid> {
    Ok(match cfg.tgrid {
        Some(s) => TGrid::new(s.t_min, s.t_max, s.count)?,
        None => TGrid::resolving(t_min, t_max, scale)?,
    })
}

/// Plancherel form of the collar square function: `||G f||^2 = sum |f^|^2 T(xi)`
/// with `T` the t-integral at each lattice frequency.
fn square_bound(cfg: &ExperimentConfig) -> Result<Vec<Record>> {
    let grid = Grid::new(cfg.n, cfg.grid, cfg.len)?;
    let n = cfg.n;
    let np = grid.points_per_axis();
    let fr = grid.freqs();
    let len = grid.box_length();
    // lattice frequencies by (|i'|^2, slot of xi_n)
    let mut rows: BTreeMap<i64, usize> = BTreeMap::new();
    let mut row_of = Vec::with_capacity(grid.size() / np);
    let mut idx = vec![0usize; n];
    for outer in 0..grid.size() / np {
        grid.unravel(outer * np, &mut idx);
        let k2: i64 = idx[..n - 1].iter().map(|&m| grid.signed_index(m).pow(2)).sum();
        let next = rows.len();
        row_of.push(*rows.entry(k2).or_insert(next));
    }
    let radii: Vec<f64> = {
        let mut v = vec![0.0; rows.len()];
        for (&k2, &i) in &rows {
            v[i] = (k2 as f64).sqrt() / len;
        }
        v
    };
    let fields: Vec<u64> = (0..cfg.samples as u64).collect();
    let energies: Vec<Vec<(f64, f64)>> = {
        // per field: (|c|^2 summed per (row, slot)) is all the t-integral needs
        fields
            .par_iter()
            .map(|&i| {
                let seed = rng::derive_seed(cfg.seed, "square-bound", i);
                let s = random_band_spectrum(&grid, (0.0, 0.85), (0.5, 2.0), seed);
                let mut acc = vec![0.0; radii.len() * np];
                for (flat, c) in s.coeffs().iter().enumerate() {
                    let e = c.norm_sqr();
                    if e > 0.0 {
                        acc[row_of[flat / np] * np + flat % np] += e;
                    }
                }
                acc.into_iter().enumerate().filter(|(_, e)| *e > 0.0).map(|(k, e)| (k as f64, e)).collect()
            })
            .collect()
    };
    let results = par_guarded(&cfg.deltas, |&delta| {
        let tg = t_grid(cfg, 1.0 / 256.0, 2.0, delta)?;
        let cap = (1.0 / (1.0 - delta)).ln();
        let table: Vec<f64> = (0..radii.len() * np)
            .into_par_iter()
            .map(|k| collar_t_integral(delta, radii[k / np], fr[k % np], &tg))
            .collect();
        let worst_t = table.iter().cloned().fold(0.0, f64::max) / cap;
        let ratios: Vec<f64> = energies
            .iter()
            .map(|e| {
                let (num, den) = e.iter().fold((0.0, 0.0), |(a, b), &(k, v)| (a + v * table[k as usize], b + v));
                (num / den).sqrt()
            })
            .collect();
        Ok((delta, cap, worst_t, ratios, tg.count))
    });
    let mut out = Vec::new();
    for (delta, r) in cfg.deltas.iter().zip(results) {
        let Some((delta_v, cap, worst_t, ratios, count)) = settle(&mut out, cfg, &format!("delta={}", dyadic_label(*delta)), r)
        else {
            continue;
        };
        let bound = (th::C2_CAP_FACTOR * delta_v).sqrt();
        let worst = ratios.iter().cloned().fold(0.0, f64::max);
        let grid_row = |r: Record| r.grid(cfg.grid, cfg.len).delta(delta_v);
        out.push(grid_row(judged(cfg, "t_integral_over_cap", worst_t, worst_t <= 1.0)));
        out.push(grid_row(judged(cfg, "cap_over_delta", cap / delta_v, cap <= th::C2_CAP_FACTOR * delta_v)));
        out.push(grid_row(judged(cfg, "square_ratio_over_bound", worst / bound, worst <= bound)));
        out.push(grid_row(row(cfg, "square_ratio_max", worst)));
        out.push(grid_row(row(cfg, "t_points", count as f64)));
    }
    Ok(out)
}

fn weights_or(cfg: &ExperimentConfig, default: &[(f64, f64)]) -> Vec<WeightParams> {
    match (cfg.alpha, cfg.beta) {
        (Some(a), Some(b)) => vec![WeightParams::new(a, b)],
        _ => default.iter().map(|&(a, b)| WeightParams::new(a, b)).collect(),
    }
}

fn is_critical(s: f64) -> bool {
    (s - 1.0).abs() < 1e-9
}

/// Rows of a three-regime sweep fit: the slope against `min(s, 1)` off the
/// critical value, the log-model preference at it.
fn regime_rows(cfg: &ExperimentConfig, w: &WeightParams, s: f64, fit: &SweepFit, tol: f64) -> Vec<Record> {
    let mut out = Vec::new();
    for &(d, v) in &fit.points {
        out.push(row(cfg, "trace_value", v).delta(d).weight(w.alpha, w.beta));
    }
    let slope = row(cfg, "power_slope", fit.power.slope).fit(fit.power.slope, fit.power.r2).weight(w.alpha, w.beta);
    if is_critical(s) {
        out.push(slope);
        let pref = fit.preferred == FitModel::PowerTimesLog;
        out.push(judged(cfg, "log_preferred", pref as u8 as f64, pref).weight(w.alpha, w.beta));
        out.push(row(cfg, "log_slope", fit.log.slope).fit(fit.log.slope, fit.log.r2).weight(w.alpha, w.beta));
    } else {
        let target = s.min(1.0);
        let ok = (fit.power.slope - target).abs() <= tol;
        out.push(judged(cfg, "power_slope", fit.power.slope, ok).fit(fit.power.slope, fit.power.r2).weight(w.alpha, w.beta));
    }
    out
}

fn trace_sweep(cfg: &ExperimentConfig) -> Result<Vec<Record>> {
    let weights = weights_or(cfg, &[0.5, 0.8, 1.0, 1.3, 1.6].map(|s| (s / 2.0, s / 2.0)));
    let tol = if cfg.n == 4 { th::C3_TOL_N4 } else { th::C3_TOL_N3 };
    let mc = McSpec { samples: cfg.samples, seed: cfg.seed };
    let results = par_guarded(&weights, |w| {
        let points = cfg
            .deltas
            .iter()
            .map(|&d| Ok((d, trace_constant_upper(d, w, cfg.n, &mc)?)))
            .collect::<Result<Vec<_>>>()?;
        let fit = SweepFit::from_points(points.iter().map(|(d, b)| (*d, b.value)).collect())?;
        let stderr: Vec<f64> = points.iter().map(|(_, b)| b.stderr).collect();
        Ok((fit, stderr))
    });
    let mut out = Vec::new();
    for (w, r) in weights.iter().zip(results) {
        let Some((fit, stderr)) = settle(&mut out, cfg, &format!("alpha={},beta={}", w.alpha, w.beta), r) else {
            continue;
        };
        let mut rows = regime_rows(cfg, w, w.alpha + w.beta, &fit, tol);
        for (r, se) in rows.iter_mut().zip(&stderr) {
            r.stderr = Some(*se);
        }
        out.extend(rows);
    }
    Ok(out)
}

fn interval_sweep(cfg: &ExperimentConfig) -> Result<Vec<Record>> {
    let betas: Vec<f64> = match cfg.beta {
        Some(b) => vec![b],
        None => (1..=9).map(|k| k as f64 / 10.0).collect(),
    };
    let points: Vec<(f64, f64)> = betas.iter().flat_map(|&b| cfg.deltas.iter().map(move |&d| (b, d))).collect();
    let results = par_guarded(&points, |&(b, d)| Ok(interval_trace_sup(d, b)?));
    let mut out = Vec::new();
    for (&(b, d), r) in points.iter().zip(results) {
        let Some(t) = settle(&mut out, cfg, &format!("beta={b},delta={}", dyadic_label(d)), r) else {
            continue;
        };
        let err = (t.quadrature / t.closed_form - 1.0).abs();
        out.push(judged(cfg, "interval_rel_err", err, err <= th::C5_REL_TOL).delta(d).weight(0.0, b));
    }
    Ok(out)
}

fn sphere_sweep(cfg: &ExperimentConfig) -> Result<Vec<Record>> {
    let alphas: Vec<f64> = match cfg.alpha {
        Some(a) => vec![a],
        None => vec![0.5, 1.0, 1.5],
    };
    let results = par_guarded(&alphas, |&a| Ok(sphere_trace_sweep(&cfg.deltas, a, cfg.n)?));
    let mut out = Vec::new();
    for (&a, r) in alphas.iter().zip(results) {
        if let Some(fit) = settle(&mut out, cfg, &format!("alpha={a}"), r) {
            out.extend(regime_rows(cfg, &WeightParams::new(a, 0.0), a, &fit, th::C4_TOL));
        }
    }
    Ok(out)
}

pub const SLICE_POINT: [f64; 3] = [1.5, 0.0, 1.5];
pub const SLICE_RINGS: u32 = 64;

fn slice_volume(cfg: &ExperimentConfig) -> Result<Vec<Record>> {
    let delta = cfg.deltas[0];
    let rings: Vec<u32> = (1..=SLICE_RINGS).collect();
    let results = par_guarded(&rings, |&l| {
        (1..=l + 5)
            .map(|k| {
                let s = slice_volume_mc(l, k, delta, &SLICE_POINT, cfg.samples, cfg.seed)?;
                Ok((s.value / s.bound, s.empty))
            })
            .collect::<Result<Vec<_>>>()
    });
    let mut out = Vec::new();
    let (mut ls, mut ratios) = (Vec::new(), Vec::new());
    let mut complete = true;
    for (&l, r) in rings.iter().zip(results) {
        let Some(per_k) = settle(&mut out, cfg, &format!("l={l}"), r) else {
            complete = false;
            continue;
        };
        for (ratio, empty) in per_k {
            if !empty {
                ls.push(l as f64);
                ratios.push(ratio);
            }
        }
    }
    let worst = ratios.iter().cloned().fold(0.0, f64::max);
    let tau = kendall_tau(&ls, &ratios);
    let d = |r: Record| r.delta(delta);
    out.push(d(judged(cfg, "max_ratio", worst, complete && worst <= th::C6_MAX_CONSTANT)));
    out.push(d(judged(cfg, "kendall_tau", tau, complete && tau.abs() <= th::TAU_LIMIT)));
    out.push(d(row(cfg, "nonempty_slices", ratios.len() as f64)));
    Ok(out)
}

fn kernel_decay(cfg: &ExperimentConfig) -> Result<Vec<Record>> {
    let (env, fit) = klambda_ray_decay(cfg.lambda, 4.0, 64.0, cfg.samples, 8)?;
    let mut out: Vec<Record> =
        env.iter().map(|&(r, v)| row(cfg, &format!("klambda_abs@r={r:.2}"), v).lambda(cfg.lambda)).collect();
    let exponent = -fit.slope;
    let need = cfg.n as f64 / 2.0 + cfg.lambda - th::C8_MARGIN;
    out.push(judged(cfg, "decay_exponent", exponent, exponent >= need).fit(fit.slope, fit.r2).lambda(cfg.lambda));
    Ok(out)
}

pub const PATCH_LEVELS: std::ops::RangeInclusive<i32> = 6..=10;
pub const SHELL_LEVEL: i32 = 8;

fn offcone_decay(cfg: &ExperimentConfig) -> Result<Vec<Record>> {
    let delta = cfg.deltas[0];
    let mut out = Vec::new();
    let levels: Vec<i32> = PATCH_LEVELS.collect();
    let results = par_guarded(&levels, |&j| Ok(spectrum_patch(j, delta)?.sup(Probe::Global).value));
    let mut sweep = Vec::new();
    for (&j, r) in levels.iter().zip(results) {
        if let Some(v) = settle(&mut out, cfg, &format!("j={j}"), r) {
            out.push(row(cfg, &format!("patch_sup@j={j}"), v).delta(delta));
            sweep.push(((j as f64).exp2() * delta, v));
        }
    }
    if let Some(fit) = settle(&mut out, cfg, "sweep-fit", guarded(|| Ok(fit_scaling(&sweep, FitModel::PurePower)?))) {
        out.push(judged(cfg, "sweep_slope", fit.slope, fit.slope <= th::C7_MAX_SLOPE).delta(delta).fit(fit.slope, fit.r2));
    }
    let shells = guarded(|| {
        let grid = Grid::new(2, cfg.grid, cfg.len)?;
        let piece = kernel_piece(&grid, SHELL_LEVEL, delta, None)?;
        Ok((1..=6).map(|l| (l, offcone_spectrum_sup(&piece, Probe::Shell(l)))).collect::<Vec<_>>())
    });
    if let Some(shells) = settle(&mut out, cfg, &format!("j={SHELL_LEVEL} shells"), shells) {
        let mut pts = Vec::new();
        for (l, s) in shells {
            if s.is_empty() {
                continue;
            }
            out.push(row(cfg, &format!("shell_sup@l={l}"), s.value).grid(cfg.grid, cfg.len).delta(delta));
            if l >= 2 {
                pts.push(((l as f64).exp2(), s.value));
            }
        }
        if let Some(fit) = settle(&mut out, cfg, "shell-fit", guarded(|| Ok(fit_scaling(&pts, FitModel::PurePower)?))) {
            out.push(
                judged(cfg, "shell_slope", fit.slope, fit.slope <= th::C7_MAX_SLOPE)
                    .grid(cfg.grid, cfg.len)
                    .delta(delta)
                    .fit(fit.slope, fit.r2),
            );
        }
    }
    Ok(out)
}

/// Exponent of the weighted square-function envelope in `delta`.
pub fn g0_exponent(w: &WeightParams) -> f64 {
    let s = w.alpha + w.beta;
    if s <= 1.0 {
        0.5
    } else {
        (2.0 - s) / 2.0
    }
}

fn g0_weighted(cfg: &ExperimentConfig) -> Result<Vec<Record>> {
    let grid = Grid::cell_centered(cfg.n, cfg.grid, cfg.len)?;
    let center: Vec<f64> = if cfg.n == 3 { vec![1.4, 0.0, 1.0] } else { vec![1.4, 1.0] };
    let family = sparse_family(&grid, &center, 0.25, cfg.samples, cfg.seed);
    let weights = weights_or(cfg, &[(0.5, 0.3), (1.2, 0.6)]);
    let points: Vec<(usize, f64)> = (0..weights.len()).flat_map(|i| cfg.deltas.iter().map(move |&d| (i, d))).collect();
    let results = par_guarded(&points, |&(i, d)| {
        let r = g0_weighted_ratios(&grid, d, &weights[i], &family)?;
        Ok(r.iter().cloned().fold(0.0, f64::max))
    });
    let mut out = Vec::new();
    let mut per_weight: Vec<Vec<(f64, f64)>> = vec![Vec::new(); weights.len()];
    for (&(i, d), r) in points.iter().zip(results) {
        let w = &weights[i];
        if let Some(v) = settle(&mut out, cfg, &format!("alpha={},beta={},delta={}", w.alpha, w.beta, dyadic_label(d)), r) {
            out.push(row(cfg, "ratio_max", v).grid(cfg.grid, cfg.len).delta(d).weight(w.alpha, w.beta));
            per_weight[i].push((d, v));
        }
    }
    for (w, pts) in weights.iter().zip(per_weight) {
        let fit = guarded(|| {
            ensure!(pts.len() == cfg.deltas.len(), "missing sweep points");
            Ok(fit_scaling(&pts, FitModel::PurePower)?)
        });
        if let Some(fit) = settle(&mut out, cfg, &format!("alpha={},beta={} fit", w.alpha, w.beta), fit) {
            let need = g0_exponent(w) - th::C12_MARGIN;
            out.push(
                judged(cfg, "ratio_slope", fit.slope, fit.slope >= need)
                    .grid(cfg.grid, cfg.len)
                    .weight(w.alpha, w.beta)
                    .fit(fit.slope, fit.r2),
            );
        }
    }
    Ok(out)
}

fn converge(cfg: &ExperimentConfig) -> Result<Vec<Record>> {
    let grid = Grid::new(cfg.n, cfg.grid, cfg.len)?;
    // lattice frequencies strictly inside 1 < xi_n < 2
    let step = grid.freq_step();
    let f = random_band_field(&grid, (0.0, 1.0), (1.0 + 0.5 * step, 2.0 - 0.5 * step), cfg.seed);
    let sup = f.sup_norm();
    ensure!(sup > 0.0, "band field vanishes on this grid");
    let ts: Vec<f64> = match cfg.tgrid {
        Some(s) => TGrid::new(s.t_min, s.t_max, s.count)?.values(),
        None => (0..=10).map(|k| (k as f64).exp2()).collect(),
    };
    let spec = MultiplierSpec::ConeFull { lambda: cfg.lambda };
    let results = par_guarded(&ts, |&t| Ok(apply_t(&f, &spec, t)?.sub(&f)?.sup_norm() / sup));
    let mut out = Vec::new();
    let mut errs: Vec<Option<f64>> = Vec::new();
    for (&t, r) in ts.iter().zip(results) {
        let e = settle(&mut out, cfg, &format!("t={t}"), r);
        if let Some(e) = e {
            out.push(row(cfg, &format!("error_rel@t={t}"), e).grid(cfg.grid, cfg.len).lambda(cfg.lambda));
        }
        errs.push(e);
    }
    for i in 0..ts.len().saturating_sub(1) {
        if ts[i] < th::C9_T_FROM {
            continue;
        }
        let (Some(a), Some(b)) = (errs[i], errs[i + 1]) else {
            continue;
        };
        let ratio = b / a;
        let (lo, hi) = th::C9_RATIO;
        out.push(
            judged(cfg, &format!("error_ratio@t={}", ts[i]), ratio, ratio >= lo && ratio <= hi)
                .grid(cfg.grid, cfg.len)
                .lambda(cfg.lambda),
        );
    }
    if let Some(Some(last)) = errs.last() {
        out.push(
            judged(cfg, "final_error_rel", *last, *last <= th::C9_FINAL)
                .grid(cfg.grid, cfg.len)
                .lambda(cfg.lambda),
        );
    }
    Ok(out)
}

pub const SPLIT_RHO: f64 = 1.0 / 256.0;
pub const SPLIT_EPS: f64 = 0.25;

fn gaussian(sigma: f64) -> impl Fn(&[f64]) -> f64 {
    move |x| (-std::f64::consts::PI * x.iter().map(|v| v * v).sum::<f64>() / (sigma * sigma)).exp()
}

fn decompose_check(cfg: &ExperimentConfig) -> Result<Vec<Record>> {
    let grid = Grid::cell_centered(cfg.n, cfg.grid, cfg.len)?;
    let seeds: Vec<u64> = (0..cfg.samples as u64).map(|i| rng::derive_seed(cfg.seed, "decompose", i)).collect();
    let results = par_guarded(&seeds, |&seed| {
        let f = wave_packets(&grid, (0.8, 1.7), 1.5, 16.0, 6, seed);
        let s = split_four(&f, SPLIT_RHO)?;
        let identity = s.sum().sub(&f)?.sup_norm() / f.sup_norm();
        let leak = s.spectra().iter().map(|sp| band_leakage(sp, 0.1, 10.0)).fold(0.0, f64::max);
        Ok((identity, leak))
    });
    let mut out = Vec::new();
    let (mut identity, mut leak) = (Some(0.0f64), Some(0.0f64));
    for (i, r) in results.into_iter().enumerate() {
        match settle(&mut out, cfg, &format!("field={i}"), r) {
            Some((a, b)) => {
                identity = identity.map(|v| v.max(a));
                leak = leak.map(|v| v.max(b));
            }
            None => (identity, leak) = (None, None),
        }
    }
    let g = |r: Record| r.grid(cfg.grid, cfg.len).p(cfg.p);
    if let (Some(a), Some(b)) = (identity, leak) {
        out.push(g(judged(cfg, "sum_identity", a, a <= th::C10_IDENTITY)));
        out.push(g(judged(cfg, "band_leakage", b, b <= th::C10_LEAKAGE)));
    }
    // the dilation family runs on its own grid, wide enough for 16x in x'
    let dil = guarded(|| {
        let grid = Grid::cell_centered(2, 1024, 4096.0)?;
        let exps = choose_exponents(cfg.p, SPLIT_EPS, 2)?;
        let scales: Vec<f64> = (-4..=4).map(|k| (k as f64 / 2.0).exp2()).collect();
        Ok(dilation_report(&grid, gaussian(64.0), 1.0 / 64.0, &exps, &scales)?)
    });
    if let Some(rep) = settle(&mut out, cfg, "dilation", dil) {
        let d = |r: Record| r.grid(1024, 4096.0).p(cfg.p);
        for (s, r) in rep.scales.iter().zip(&rep.reports) {
            out.push(d(row(cfg, &format!("dilation_max_ratio@s={s:.4}"), r.max_ratio())));
        }
        out.push(d(judged(cfg, "dilation_spread", rep.spread, rep.spread <= th::C10_SPREAD)));
        out.push(d(judged(cfg, "dilation_tau", rep.tau, rep.tau.abs() <= th::TAU_LIMIT)));
    }
    Ok(out)
}

const BLOCK_K: std::ops::RangeInclusive<i32> = -8..=4;
const BLOCK_L: std::ops::RangeInclusive<i32> = -3..=2;

/// `(ortho, dual)` ratios for every weight on one grid.
fn ortho_pair(grid: &Grid, weights: &[WeightParams], seed: u64) -> Result<Vec<(f64, f64)>> {
    let f = random_band_field(grid, (0.125, 1.5), (0.25, 1.5), seed);
    let parts: Vec<Field> = blocks(&f, BLOCK_K, BLOCK_L).into_iter().map(|(_, b)| b).collect();
    ensure!(!parts.is_empty(), "no blocks");
    weights
        .iter()
        .map(|w| {
            w.check_a2_window(grid.dim())?;
            let cells = weight_cells(grid, w)?;
            let whole = weighted_norm_with(&f, &cells).powi(2);
            let sum: f64 = parts.iter().map(|b| weighted_norm_with(b, &cells).powi(2)).sum();
            Ok((sum / whole, dual_ortho_ratio(&parts, w)?))
        })
        .collect()
}

fn ortho_check(cfg: &ExperimentConfig) -> Result<Vec<Record>> {
    let grid_pairs = [0.0, 0.5, 0.9].iter().flat_map(|&a| [0.0, 0.5, 0.9].map(|b| (a, b))).collect::<Vec<_>>();
    let weights = weights_or(cfg, &grid_pairs);
    let points: Vec<(u64, usize)> =
        (0..cfg.samples as u64).flat_map(|i| [cfg.grid, 2 * cfg.grid].map(|np| (i, np))).collect();
    let results = par_guarded(&points, |&(i, np)| {
        let grid = Grid::cell_centered(cfg.n, np, cfg.len)?;
        ortho_pair(&grid, &weights, rng::derive_seed(cfg.seed, "ortho", i))
    });
    let mut out = Vec::new();
    let mut got = Vec::new();
    for (&(i, np), r) in points.iter().zip(results) {
        got.push(settle(&mut out, cfg, &format!("field={i},N={np}"), r));
    }
    for i in 0..cfg.samples {
        let (Some(a), Some(b)) = (&got[2 * i], &got[2 * i + 1]) else {
            continue;
        };
        for (k, w) in weights.iter().enumerate() {
            let ((o1, d1), (o2, d2)) = (a[k], b[k]);
            let wr = |r: Record, np: usize| r.grid(np, cfg.len).weight(w.alpha, w.beta);
            out.push(wr(row(cfg, "ortho_ratio", o1), cfg.grid));
            out.push(wr(row(cfg, "ortho_ratio", o2), 2 * cfg.grid));
            out.push(wr(row(cfg, "dual_ratio", d1), cfg.grid));
            out.push(wr(row(cfg, "dual_ratio", d2), 2 * cfg.grid));
            let co = (o2 / o1 - 1.0).abs();
            let cd = (d2 / d1 - 1.0).abs();
            out.push(wr(judged(cfg, "ortho_change", co, co <= th::C11_CHANGE), 2 * cfg.grid));
            out.push(wr(judged(cfg, "dual_change", cd, cd <= th::C11_CHANGE), 2 * cfg.grid));
        }
    }
    Ok(out)
}

fn a2_check(cfg: &ExperimentConfig) -> Result<Vec<Record>> {
    let w = WeightParams::new(cfg.alpha.unwrap_or(0.5), cfg.beta.unwrap_or(0.5));
    let values = a2_product_constant(&w, cfg.n, &RectangleSweep { levels: cfg.samples });
    let mut out = vec![row(cfg, "in_a2_window", w.in_a2_window(cfg.n) as u8 as f64).weight(w.alpha, w.beta)];
    for (k, v) in values.iter().enumerate() {
        out.push(row(cfg, &format!("a2_product@level={k}"), *v).weight(w.alpha, w.beta));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(anyhow!("non-finite A2 product"));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::record::Verdict;

    #[test]
    fn a_panicking_point_becomes_an_error_row() {
        let cfg = ExperimentConfig::defaults_for(Scenario::A2Check);
        let points = [1, 2, 3];
        let results = par_guarded(&points, |&p| {
            if p == 2 {
                panic!("boom at {p}");
            }
            Ok(p * 10)
        });
        let mut out = Vec::new();
        let kept: Vec<i32> = points
            .iter()
            .zip(results)
            .filter_map(|(p, r)| settle(&mut out, &cfg, &format!("p={p}"), r))
            .collect();
        assert_eq!(kept, vec![10, 30]);
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].verdict, Verdict::Error);
        assert_eq!(out[0].quantity, "error:p=2");
    }

    #[test]
    fn errors_are_isolated_too() {
        let r: std::result::Result<(), String> = guarded(|| Err(anyhow!("bad point")));
        assert_eq!(r.unwrap_err(), "bad point");
    }

    #[test]
    fn every_judged_quantity_has_a_table_entry() {
        for t in th::TABLE {
            assert!(th::lookup(t.scenario, t.quantity).is_some());
            assert!(t.scenario.parse::<Scenario>().is_ok(), "{}", t.scenario);
        }
    }

    #[test]
    fn envelope_exponent() {
        assert_eq!(g0_exponent(&WeightParams::new(0.5, 0.3)), 0.5);
        assert!((g0_exponent(&WeightParams::new(1.2, 0.6)) - 0.1).abs() < 1e-12);
    }
}
