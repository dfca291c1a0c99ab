//! Gauss-Legendre rules, composite and adaptive.

use std::sync::OnceLock;

/// Nodes and weights of the `n`-point rule on `[-1, 1]` by Newton iteration.
pub fn legendre_rule(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, 0.0);
            for j in 1..=n {
                let p2 = p1;
                p1 = p0;
                p0 = ((2 * j - 1) as f64 * z * p1 - (j - 1) as f64 * p2) / j as f64;
            }
            dp = n as f64 * (z * p0 - p1) / (z * z - 1.0);
            let dz = p0 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

fn cached(n: usize) -> &'static (Vec<f64>, Vec<f64>) {
    static R8: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    static R16: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    static R32: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    static R64: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    let cell = match n {
        8 => &R8,
        16 => &R16,
        32 => &R32,
        64 => &R64,
        _ => panic!("no cached rule of order {n}"),
    };
    cell.get_or_init(|| legendre_rule(n))
}

/// `n`-point Gauss-Legendre on `[a, b]`; `n` in {8, 16, 32, 64}.
pub fn gauss_legendre(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let (x, w) = cached(n);
    let (c, h) = (0.5 * (a + b), 0.5 * (b - a));
    x.iter().zip(w).map(|(xi, wi)| wi * f(c + h * xi)).sum::<f64>() * h
}

/// `panels` equal panels of `order`-point Gauss-Legendre.
pub fn composite_gl(f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize, order: usize) -> f64 {
    let h = (b - a) / panels as f64;
    (0..panels)
        .map(|i| gauss_legendre(&f, a + i as f64 * h, a + (i + 1) as f64 * h, order))
        .sum()
}

/// Adaptive bisection driven by the 8/16-point difference.
pub fn adaptive(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn rec(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64, whole: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let l = gauss_legendre(f, a, m, 16);
        let r = gauss_legendre(f, m, b, 16);
        if depth >= 40 || (l + r - whole).abs() <= tol {
            return l + r;
        }
        rec(f, a, m, 0.5 * tol, l, depth + 1) + rec(f, m, b, 0.5 * tol, r, depth + 1)
    }
    let whole = gauss_legendre(f, a, b, 16);
    rec(f, a, b, tol, whole, 0)
}

/// `int_a^b f` where `f` has an integrable power singularity at `a`:
/// geometric panels toward the singular end.
pub fn singular_left(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    let mut total = 0.0;
    let mut hi = b;
    let len = b - a;
    for k in 1..=200 {
        let lo = a + len * 0.5f64.powi(k);
        total += adaptive(f, lo, hi, tol);
        hi = lo;
        if hi - a < 1e-300 {
            break;
        }
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rules_integrate_polynomials() {
        for n in [8, 16, 32, 64] {
            let v = gauss_legendre(|x| x.powi(2 * n as i32 - 1) + x.powi(2 * n as i32 - 2), 0.0, 1.0, n);
            let exact = 1.0 / (2 * n) as f64 + 1.0 / (2 * n - 1) as f64;
            assert!((v - exact).abs() < 1e-13, "n={n}");
        }
    }

    #[test]
    fn adaptive_handles_peaks() {
        let v = adaptive(&|x: f64| 1.0 / (1e-4 + x * x), -1.0, 1.0, 1e-10);
        let exact = 2.0 * (1.0f64 / 1e-2).atan() / 1e-2;
        assert!((v - exact).abs() < 1e-8 * exact);
        let s = singular_left(&|x: f64| x.powf(-0.5), 0.0, 1.0, 1e-12);
        assert!((s - 2.0).abs() < 1e-9, "{s}");
    }
}
