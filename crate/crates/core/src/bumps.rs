//! Smooth cutoffs built from one C-infinity step.
//!
//! `S(x) = g(x) / (g(x) + g(1 - x))` with `g(x) = exp(-1/x)` for `x > 0`.
//! Everything else is assembled from `S`:
//!
//! * `eta(t) = 1 - S(2t - 1)`: equal to 1 on `t <= 1/2`, 0 on `t >= 1`.
//! * `psi(t) = eta(t) - eta(2t)`: supported in `[1/4, 1]`, and
//!   `sum_k psi(2^k t) = 1` for every `t > 0` by telescoping.
//! * `mu_delta(r) = B((1 - r)/delta)` with `B(s) = S(2s) (1 - S(2s - 1))`:
//!   supported in `(1 - delta, 1)`, peak value 1 at `r = 1 - delta/2`.
//! * `Psi(x) = eta(|x|/2) - eta(|x|)`: the dyadic annulus on `1/2 < |x| < 2`.

use crate::error::{arg, Result};
use crate::quad;
use crate::special;

fn g(x: f64) -> f64 {
    if x > 0.0 {
        (-1.0 / x).exp()
    } else {
        0.0
    }
}

fn dg(x: f64) -> f64 {
    if x > 0.0 {
        (-1.0 / x).exp() / (x * x)
    } else {
        0.0
    }
}

/// The base step `S`.
pub fn smoothstep(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else if x >= 1.0 {
        1.0
    } else if x <= 0.5 {
        // g(x)/(g(x)+g(1-x)) written to keep S(x) + S(1-x) = 1 in floating point
        let a = g(x);
        a / (a + g(1.0 - x))
    } else {
        1.0 - smoothstep(1.0 - x)
    }
}

/// `S'(x)`.
pub fn smoothstep_deriv(x: f64) -> f64 {
    if x <= 0.0 || x >= 1.0 {
        return 0.0;
    }
    let (a, b) = (g(x), g(1.0 - x));
    let s = a + b;
    (dg(x) * b + a * dg(1.0 - x)) / (s * s)
}

/// `sup |S'|`, attained at `x = 1/2` where it equals 2.
pub const SMOOTHSTEP_DERIV_SUP: f64 = 2.0;

/// `1 - S(2t - 1)`.
pub fn eta(t: f64) -> f64 {
    1.0 - smoothstep(2.0 * t - 1.0)
}

pub fn eta_deriv(t: f64) -> f64 {
    -2.0 * smoothstep_deriv(2.0 * t - 1.0)
}

/// Band bump on `[1/4, 1]`.
pub fn psi(t: f64) -> f64 {
    eta(t) - eta(2.0 * t)
}

pub fn psi_deriv(t: f64) -> f64 {
    eta_deriv(t) - 2.0 * eta_deriv(2.0 * t)
}

/// Profile of the collar bump on `s` in `(0, 1)`.
pub fn collar_profile(s: f64) -> f64 {
    smoothstep(2.0 * s) * (1.0 - smoothstep(2.0 * s - 1.0))
}

/// Collar bump in the angular variable, supported in `(1 - delta, 1)`.
pub fn mu_delta(r: f64, delta: f64) -> f64 {
    collar_profile((1.0 - r) / delta)
}

/// Dyadic scale `2^{j0}`: `2 ceil(1/delta)` rounded up to a power of two.
pub fn j0_for(delta: f64) -> i32 {
    let m = 2 * (1.0 / delta).ceil() as u64;
    m.next_power_of_two().trailing_zeros() as i32
}

/// Annulus `Psi(x) = eta(|x|/2) - eta(|x|)` as a function of `|x|`.
pub fn annulus(radius: f64) -> f64 {
    eta(radius / 2.0) - eta(radius)
}

/// Littlewood-Paley partition `Psi_j`, `j >= j0`, in physical space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LpPartition {
    pub j0: i32,
}

impl LpPartition {
    pub fn for_delta(delta: f64) -> LpPartition {
        LpPartition { j0: j0_for(delta) }
    }

    /// `Psi_j` at a point of norm `radius`. The bottom piece is the telescoped
    /// remainder `eta(2^{-j0-1} |x|)`.
    pub fn piece(&self, radius: f64, j: i32) -> Result<f64> {
        if j < self.j0 {
            return arg(format!("annulus index {j} below j0 = {}", self.j0));
        }
        let s = (-(j as f64)).exp2();
        if j == self.j0 {
            Ok(eta(radius * s / 2.0))
        } else {
            Ok(annulus(radius * s))
        }
    }
}

/// Compactly supported Fourier cap `phi^(xi) = c eta(|xi|/rho)` on `R^d`
/// with `c` normalizing `phi(0) = int phi^ = 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchwartzCap {
    pub rho: f64,
    pub dim: usize,
    norm: f64,
}

/// `int_0^1 eta(s) s^{d-1} ds` by composite Gauss-Legendre.
fn eta_moment(d: usize) -> f64 {
    0.5f64.powi(d as i32) / d as f64 + quad::gauss_legendre(|s| eta(s) * s.powi(d as i32 - 1), 0.5, 1.0, 64)
}

impl SchwartzCap {
    pub fn new(rho: f64, dim: usize) -> Result<SchwartzCap> {
        if !(rho > 0.0 && rho <= 1.0 / 64.0) {
            return arg(format!("cap radius must lie in (0, 1/64], got {rho}"));
        }
        if !(1..=3).contains(&dim) {
            return arg(format!("cap dimension must be 1, 2 or 3, got {dim}"));
        }
        let area = special::sphere_area(dim);
        let norm = 1.0 / (rho.powi(dim as i32) * area * eta_moment(dim));
        Ok(SchwartzCap { rho, dim, norm })
    }

    /// `phi^` at a frequency of norm `radius`.
    pub fn hat(&self, radius: f64) -> f64 {
        self.norm * eta(radius.abs() / self.rho)
    }

    /// `phi` at a point of norm `radius`, by quadrature of the radial
    /// inverse transform.
    pub fn eval(&self, radius: f64) -> f64 {
        let y = radius * self.rho;
        let w = std::f64::consts::TAU * y;
        let kernel = |s: f64| -> f64 {
            let z = w * s;
            match self.dim {
                1 => 2.0 * z.cos(),
                2 => std::f64::consts::TAU * s * special::bessel_j0(z),
                _ => {
                    let sinc = if z.abs() < 1e-8 { 1.0 - z * z / 6.0 } else { z.sin() / z };
                    4.0 * std::f64::consts::PI * s * s * sinc
                }
            }
        };
        let panels = 8 + (4.0 * y) as usize;
        let flat = quad::composite_gl(|s| kernel(s), 0.0, 0.5, panels, 16);
        let ramp = quad::composite_gl(|s| eta(s) * kernel(s), 0.5, 1.0, panels, 16);
        self.norm * self.rho.powi(self.dim as i32) * (flat + ramp)
    }
}

/// Angular collar partition `phi^_l` indexed by distance to the cone.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AngularCollar {
    pub delta: f64,
    pub first: i32,
    pub last: i32,
}

impl AngularCollar {
    /// `first = 10`; `last = l0` with `2^{l0}` the power of two nearest to
    /// `1/(10 delta)`. The range is empty unless `delta` is tiny; use
    /// [`AngularCollar::with_first`] at coarse `delta`.
    pub fn new(delta: f64) -> AngularCollar {
        AngularCollar::with_first(delta, 10)
    }

    pub fn with_first(delta: f64, first: i32) -> AngularCollar {
        let last = (1.0 / (10.0 * delta)).log2().round() as i32;
        AngularCollar { delta, first, last }
    }

    pub fn is_empty(&self) -> bool {
        self.last < self.first
    }

    /// `phi^_l` at distance `dist` from the cone.
    pub fn piece(&self, dist: f64, l: i32) -> Result<f64> {
        if l < self.first || l > self.last {
            return arg(format!("collar index {l} outside [{}, {}]", self.first, self.last));
        }
        let at = |k: i32| eta(dist / (k as f64).exp2() / self.delta);
        if l == self.first {
            Ok(at(l))
        } else {
            Ok(at(l) - at(l - 1))
        }
    }

    /// The far piece `1 - sum_l phi^_l`.
    pub fn far(&self, dist: f64) -> f64 {
        if self.is_empty() {
            return 1.0;
        }
        1.0 - eta(dist / (self.last as f64).exp2() / self.delta)
    }
}
