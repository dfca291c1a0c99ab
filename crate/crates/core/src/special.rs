//! Bessel J0, J1 and a few closed forms.

use std::f64::consts::PI;

/// `J0(z)`: power series for `|z| < 12`, Hankel asymptotic expansion
/// (summed to its smallest term) beyond.
pub fn bessel_j0(z: f64) -> f64 {
    let z = z.abs();
    if z < 12.0 {
        let q = -0.25 * z * z;
        let mut term = 1.0;
        let mut sum = 1.0;
        for k in 1..80 {
            term *= q / (k * k) as f64;
            sum += term;
            if term.abs() < 1e-17 * sum.abs().max(1e-3) {
                break;
            }
        }
        sum
    } else {
        let (p, q) = hankel_pq(z, 0.0);
        let chi = z - 0.25 * PI;
        (2.0 / (PI * z)).sqrt() * (p * chi.cos() - q * chi.sin())
    }
}

/// `J1(z)`, same scheme as [`bessel_j0`].
pub fn bessel_j1(z: f64) -> f64 {
    let sign = z.signum();
    let z = z.abs();
    if z < 12.0 {
        let q = -0.25 * z * z;
        let mut term = 0.5 * z;
        let mut sum = term;
        for k in 1..80 {
            term *= q / (k * (k + 1)) as f64;
            sum += term;
            if term.abs() < 1e-17 * sum.abs().max(1e-3) {
                break;
            }
        }
        sign * sum
    } else {
        let (p, q) = hankel_pq(z, 4.0);
        let chi = z - 0.75 * PI;
        sign * (2.0 / (PI * z)).sqrt() * (p * chi.cos() - q * chi.sin())
    }
}

/// Asymptotic `P`, `Q` of order `nu` with `mu = 4 nu^2`.
fn hankel_pq(z: f64, mu: f64) -> (f64, f64) {
    let mut p = 1.0;
    let mut q = 0.0;
    let mut t = 1.0f64;
    let mut last = f64::INFINITY;
    for k in 1..200 {
        let odd = (2 * k - 1) as f64;
        t *= (mu - odd * odd) / (k as f64 * 8.0 * z);
        if t == 0.0 || t.abs() >= last {
            break;
        }
        last = t.abs();
        // P collects even k with sign (-1)^{k/2}, Q odd k with (-1)^{(k-1)/2}
        match k % 4 {
            0 => p += t,
            1 => q += t,
            2 => p -= t,
            _ => q -= t,
        }
        if t.abs() < 1e-17 {
            break;
        }
    }
    (p, q)
}

/// Surface area of the unit sphere in `R^d`, `2 pi^{d/2} / Gamma(d/2)`.
pub fn sphere_area(d: usize) -> f64 {
    2.0 * PI.powf(d as f64 / 2.0) / statrs::function::gamma::gamma(d as f64 / 2.0)
}

pub fn gamma(x: f64) -> f64 {
    statrs::function::gamma::gamma(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn j0_integral(z: f64) -> f64 {
        // (1/pi) int_0^pi cos(z sin th) d th; periodic trapezoid converges geometrically
        let m = 4096;
        let h = PI / m as f64;
        (0..m).map(|i| (z * ((i as f64 + 0.5) * h).sin()).cos()).sum::<f64>() * h / PI
    }

    #[test]
    fn matches_integral_representation() {
        let pts = [0.0, 0.3, 1.0, 2.404825557695773, 5.0, 8.0, 11.0, 11.99, 12.0, 12.01, 13.5, 15.0,
                   20.0, 30.0, 45.5, 60.0, 90.0, 120.0, 250.0, 400.0];
        for &z in &pts {
            let a = bessel_j0(z);
            let b = j0_integral(z);
            let env = (2.0 / (PI * z.max(1.0))).sqrt();
            assert!((a - b).abs() <= 1e-9 * env, "z={z}: {a} vs {b}");
        }
        assert_eq!(bessel_j0(-3.0), bessel_j0(3.0));
    }

    #[test]
    fn j1_matches_integral_representation() {
        // (1/pi) int_0^pi cos(th - z sin th) d th
        let j1_integral = |z: f64| {
            let m = 4096;
            let h = PI / m as f64;
            (0..=m)
                .map(|i| {
                    let th = i as f64 * h;
                    let w = if i == 0 || i == m { 0.5 } else { 1.0 };
                    w * (th - z * th.sin()).cos()
                })
                .sum::<f64>()
                * h
                / PI
        };
        for &z in &[0.0, 0.5, 1.0, 3.8317059702075125, 7.0, 11.99, 12.0, 12.01, 17.0, 40.0, 150.0, 600.0] {
            let a = bessel_j1(z);
            let b = j1_integral(z);
            let env = (2.0 / (PI * z.max(1.0))).sqrt();
            assert!((a - b).abs() <= 1e-9 * env, "z={z}: {a} vs {b}");
        }
        assert_eq!(bessel_j1(-2.0), -bessel_j1(2.0));
    }

    #[test]
    fn sphere_areas() {
        assert!((sphere_area(1) - 2.0).abs() < 1e-14);
        assert!((sphere_area(2) - 2.0 * PI).abs() < 1e-13);
        assert!((sphere_area(3) - 4.0 * PI).abs() < 1e-13);
    }
}
