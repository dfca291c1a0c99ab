//! Closed-form cone multipliers.
//!
//! All families depend on `xi'` only through `r = |xi'|`, so they are
//! evaluated as functions of `(r, xi_n)`. With `u = 1 - r^2/xi_n^2`:
//!
//! * cone-full: `u_+^lambda`
//! * cone-localized: `u_+^lambda psi(xi_n/2)`
//! * angular-dyadic, level `g >= 1`: `psi(2^g u) 2^{g lambda}` times the
//!   localized symbol, supported in `u` in `(2^{-g-2}, 2^{-g})`;
//!   level 0: `(1 - eta(2u))` times the localized symbol.
//! * angular-dyadic-grad: `2^{-g} xi'.grad' m_g = 2^{-g} r d/dr m_g`
//! * delta-collar: `mu_delta(r/xi_n) psi(xi_n/2)`
//! * band-psi `k`: `psi(2^{-k-1} xi_n)`
//! * cap-phi: `eta(r/|xi_n|)`, equal to 1 on `r <= |xi_n|/2`.

use serde::{Deserialize, Serialize};

use crate::bumps::{eta, eta_deriv, mu_delta, psi, psi_deriv};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum MultiplierSpec {
    ConeFull { lambda: f64 },
    ConeLocalized { lambda: f64 },
    AngularDyadic { level: u32, lambda: f64 },
    AngularDyadicGrad { level: u32, lambda: f64 },
    DeltaCollar { delta: f64 },
    BandPsi { k: i32 },
    CapPhi,
}

fn cone_u(r: f64, xn: f64) -> f64 {
    if xn == 0.0 {
        return if r == 0.0 { 0.0 } else { f64::NEG_INFINITY };
    }
    let s = r / xn;
    1.0 - s * s
}

fn pos_pow(u: f64, lambda: f64) -> f64 {
    if u <= 0.0 {
        0.0
    } else {
        u.powf(lambda)
    }
}

/// Angular factor of level `g` as a function of `u > 0`, and its derivative.
fn angular(level: u32, lambda: f64, u: f64) -> (f64, f64) {
    if u <= 0.0 {
        return (0.0, 0.0);
    }
    let up = u.powf(lambda);
    let dup = lambda * u.powf(lambda - 1.0);
    if level == 0 {
        let c = 1.0 - eta(2.0 * u);
        let dc = -2.0 * eta_deriv(2.0 * u);
        (c * up, dc * up + c * dup)
    } else {
        let s = (level as f64).exp2();
        let scale = s.powf(lambda);
        let p = psi(s * u);
        if p == 0.0 && psi_deriv(s * u) == 0.0 {
            return (0.0, 0.0);
        }
        (scale * p * up, scale * (s * psi_deriv(s * u) * up + p * dup))
    }
}

impl MultiplierSpec {
    /// Value at `(r, xi_n)` with `r = |xi'|`.
    pub fn eval_radial(&self, r: f64, xn: f64) -> f64 {
        match *self {
            MultiplierSpec::ConeFull { lambda } => pos_pow(cone_u(r, xn), lambda),
            MultiplierSpec::ConeLocalized { lambda } => {
                let b = psi(0.5 * xn);
                if b == 0.0 {
                    0.0
                } else {
                    b * pos_pow(cone_u(r, xn), lambda)
                }
            }
            MultiplierSpec::AngularDyadic { level, lambda } => {
                let b = psi(0.5 * xn);
                if b == 0.0 {
                    0.0
                } else {
                    b * angular(level, lambda, cone_u(r, xn)).0
                }
            }
            MultiplierSpec::AngularDyadicGrad { level, lambda } => {
                let b = psi(0.5 * xn);
                if b == 0.0 || r == 0.0 {
                    return 0.0;
                }
                let u = cone_u(r, xn);
                let du_dr = -2.0 * r / (xn * xn);
                let d = angular(level, lambda, u).1 * du_dr * b;
                (-(level as f64)).exp2() * r * d
            }
            MultiplierSpec::DeltaCollar { delta } => {
                let b = psi(0.5 * xn);
                if b == 0.0 {
                    0.0
                } else {
                    b * mu_delta(r / xn, delta)
                }
            }
            MultiplierSpec::BandPsi { k } => psi((-(k as f64) - 1.0).exp2() * xn),
            MultiplierSpec::CapPhi => {
                if xn == 0.0 {
                    return if r == 0.0 { 1.0 } else { 0.0 };
                }
                eta(r / xn.abs())
            }
        }
    }

    /// Value at a point `xi = (xi', xi_n)`.
    pub fn eval(&self, xi: &[f64]) -> f64 {
        let (xn, rest) = xi.split_last().expect("empty frequency");
        let r = rest.iter().map(|v| v * v).sum::<f64>().sqrt();
        self.eval_radial(r, *xn)
    }

    /// Closed-form open support set in `(r, xi_n)`; the value is zero off it.
    pub fn in_support(&self, r: f64, xn: f64) -> bool {
        let band = xn > 0.5 && xn < 2.0;
        let u = cone_u(r, xn);
        match *self {
            MultiplierSpec::ConeFull { .. } => u > 0.0,
            MultiplierSpec::ConeLocalized { .. } => band && u > 0.0,
            MultiplierSpec::AngularDyadic { level, .. }
            | MultiplierSpec::AngularDyadicGrad { level, .. } => {
                if level == 0 {
                    band && u > 0.25
                } else {
                    let lo = (-(level as f64) - 2.0).exp2();
                    let hi = (-(level as f64)).exp2();
                    band && u > lo && u < hi
                }
            }
            MultiplierSpec::DeltaCollar { delta } => {
                let s = r / xn;
                band && s > 1.0 - delta && s < 1.0
            }
            MultiplierSpec::BandPsi { k } => {
                let lo = ((k - 1) as f64).exp2();
                xn > lo && xn < 4.0 * lo
            }
            MultiplierSpec::CapPhi => r < xn.abs() || (r == 0.0 && xn == 0.0),
        }
    }

    /// Bounds `(max |xi'|, max |xi_n|)` of the support before dilation;
    /// `None` when unbounded.
    pub fn support_extent(&self) -> (Option<f64>, Option<f64>) {
        match *self {
            MultiplierSpec::ConeFull { .. } | MultiplierSpec::CapPhi => (None, None),
            MultiplierSpec::BandPsi { k } => (None, Some(((k + 1) as f64).exp2())),
            _ => (Some(2.0), Some(2.0)),
        }
    }

    /// The angular scale that a t-quadrature must resolve, if any.
    pub fn angular_scale(&self) -> Option<f64> {
        match *self {
            MultiplierSpec::DeltaCollar { delta } => Some(delta),
            MultiplierSpec::AngularDyadic { level, .. } | MultiplierSpec::AngularDyadicGrad { level, .. }
                if level >= 1 =>
            {
                Some((-(level as f64)).exp2())
            }
            _ => None,
        }
    }
}

/// `m~_g` at `xi`; levels start at 1.
pub fn eval_grad_tilde(level: u32, lambda: f64, xi: &[f64]) -> f64 {
    MultiplierSpec::AngularDyadicGrad { level, lambda }.eval(xi)
}

/// `|m_0 + sum_{g=1}^{gmax} 2^{-g lambda} m_g - m^lambda|` at `xi`.
pub fn reconstruct_residual(lambda: f64, gmax: u32, xi: &[f64]) -> f64 {
    let mut sum = MultiplierSpec::AngularDyadic { level: 0, lambda }.eval(xi);
    for g in 1..=gmax {
        let v = MultiplierSpec::AngularDyadic { level: g, lambda }.eval(xi);
        sum += (-(g as f64) * lambda).exp2() * v;
    }
    (sum - MultiplierSpec::ConeLocalized { lambda }.eval(xi)).abs()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use rand::Rng;

    #[test]
    fn examples() {
        let loc = MultiplierSpec::ConeLocalized { lambda: 2.0 };
        assert_eq!(loc.eval(&[0.0, 0.0, 1.0]), 1.0);
        let full = MultiplierSpec::ConeFull { lambda: 1.0 };
        assert_eq!(full.eval(&[0.6, 0.8, 1.0]), 0.0);
        assert_eq!(full.eval(&[1.5, 1.5]), 0.0);
        // level 3 at u = 3/16: 2^3 u = 3/2 outside [1/4, 1]
        let m3 = MultiplierSpec::AngularDyadic { level: 3, lambda: 1.0 };
        let r = (1.0f64 - 3.0 / 16.0).sqrt();
        assert_eq!(m3.eval(&[r, 1.0]), 0.0);
        // u = 1/16: psi(1/2) u 2^3 = 1/2
        let r = (1.0f64 - 1.0 / 16.0).sqrt();
        let v = m3.eval(&[r, 1.0]);
        let oracle = psi(8.0 * (1.0 - r * r)) * (1.0 - r * r) * 8.0 * psi(0.5);
        assert!((v - 0.5).abs() < 1e-15 && (v - oracle).abs() < 1e-15);
    }

    #[test]
    fn negative_xn_and_evenness() {
        let full = MultiplierSpec::ConeFull { lambda: 1.5 };
        assert_eq!(full.eval(&[0.3, 1.0]), full.eval(&[0.3, -1.0]));
        for spec in [
            MultiplierSpec::ConeLocalized { lambda: 1.0 },
            MultiplierSpec::AngularDyadic { level: 2, lambda: 1.0 },
            MultiplierSpec::DeltaCollar { delta: 0.125 },
            MultiplierSpec::BandPsi { k: 0 },
        ] {
            assert_eq!(spec.eval(&[0.1, -1.0]), 0.0);
        }
    }

    #[test]
    fn grad_examples() {
        assert_eq!(eval_grad_tilde(2, 1.0, &[0.0, 0.0, 1.0]), 0.0);
        assert_eq!(eval_grad_tilde(2, 1.0, &[0.1, 1.0]), 0.0);
        let mut g = rng::stream(9, 0);
        let (level, lambda) = (4u32, 1.0);
        let m = MultiplierSpec::AngularDyadic { level, lambda };
        let mut checked = 0;
        while checked < 1000 {
            let xn: f64 = g.gen_range(0.6..1.9);
            let u: f64 = g.gen_range(2f64.powi(-6)..2f64.powi(-4));
            let r = xn * (1.0 - u).sqrt();
            let th: f64 = g.gen_range(0.0..std::f64::consts::TAU);
            let xi = [r * th.cos(), r * th.sin(), xn];
            let a = eval_grad_tilde(level, lambda, &xi);
            // xi'.grad' by central differences along the radial direction
            // the bump has large high derivatives, so plain central
            // differences at h = 1e-5 miss by ~1e-5 relative; two Richardson
            // levels on top of them do not
            let f = |d: f64| m.eval(&[xi[0] * (1.0 + d / r), xi[1] * (1.0 + d / r), xn]);
            let cd = |h: f64| (f(h) - f(-h)) / (2.0 * h);
            let h = 1e-4;
            let (a1, a2, a3) = (cd(h), cd(h / 2.0), cd(h / 4.0));
            let b1 = (4.0 * a2 - a1) / 3.0;
            let b2 = (4.0 * a3 - a2) / 3.0;
            let d1 = (16.0 * b2 - b1) / 15.0;
            let fd = d1 * r * 2f64.powi(-(level as i32));
            if a.abs() < 1e-3 {
                continue;
            }
            assert!((a - fd).abs() <= 1e-6 * a.abs(), "{a} vs {fd} at xn={xn:.17} u={u:.17} r={r:.17}");
            checked += 1;
        }
    }

    #[test]
    fn grad_matches_high_precision_value() {
        // reference from 40-digit arithmetic on the same closed form
        let (xn, r) = (0.74835957758034155, 0.72853423517357885);
        let v = eval_grad_tilde(4, 1.0, &[r, xn]);
        assert!((v - 2.4139929987604536).abs() < 1e-12, "{v}");
    }

    #[test]
    fn reconstruction_examples() {
        assert_eq!(reconstruct_residual(1.0, 3, &[0.0, 1.0]), 0.0);
        let r = (1.0f64 - 0.25).sqrt();
        assert!(reconstruct_residual(1.0, 8, &[r, 1.0]) <= 1e-14);
        assert_eq!(reconstruct_residual(1.0, 8, &[2.0, 1.0]), 0.0);
    }

    #[test]
    fn reconstruction_randomized() {
        let mut g = rng::stream(10, 0);
        let gmax = 12;
        for _ in 0..100_000 {
            let xn: f64 = g.gen_range(0.5..2.0);
            let u: f64 = g.gen_range((-(gmax as f64) - 1.0).exp2()..1.0);
            let r = xn * (1.0 - u).sqrt();
            let lambda: f64 = g.gen_range(0.1..3.0);
            assert!(reconstruct_residual(lambda, gmax, &[r, xn]) <= 1e-12);
        }
    }

    #[test]
    fn support_exactness() {
        let specs = [
            MultiplierSpec::ConeFull { lambda: 0.7 },
            MultiplierSpec::ConeLocalized { lambda: 1.0 },
            MultiplierSpec::AngularDyadic { level: 0, lambda: 1.0 },
            MultiplierSpec::AngularDyadic { level: 3, lambda: 2.0 },
            MultiplierSpec::AngularDyadicGrad { level: 2, lambda: 1.0 },
            MultiplierSpec::DeltaCollar { delta: 1.0 / 16.0 },
            MultiplierSpec::BandPsi { k: 1 },
            MultiplierSpec::CapPhi,
        ];
        let mut g = rng::stream(11, 0);
        for spec in &specs {
            for i in 0..20_000 {
                let (r, xn) = if i % 2 == 0 {
                    (g.gen_range(0.0..5.0), g.gen_range(-5.0..5.0))
                } else {
                    // boundary-adjacent: near the cone and the band edges
                    let xn: f64 = [0.5, 2.0, 1.0, 1.5][i % 4] + g.gen_range(-1e-3..1e-3);
                    let s: f64 = 1.0 + g.gen_range(-0.2..0.01) * g.gen::<f64>().powi(3);
                    (xn.abs() * s, xn)
                };
                let v = spec.eval_radial(r, xn);
                if !spec.in_support(r, xn) {
                    assert_eq!(v, 0.0, "{spec:?} at ({r}, {xn})");
                }
            }
        }
    }

    #[test]
    fn full_cone_is_zero_homogeneous() {
        let mut g = rng::stream(12, 0);
        let m = MultiplierSpec::ConeFull { lambda: 1.3 };
        for _ in 0..10_000 {
            let xi = [g.gen_range(-2.0..2.0), g.gen_range(-2.0..2.0), g.gen_range(-3.0..3.0)];
            let s: f64 = g.gen_range(0.01..100.0);
            let a = m.eval(&xi);
            let b = m.eval(&[s * xi[0], s * xi[1], s * xi[2]]);
            assert!((a - b).abs() <= 1e-12, "{a} {b}");
        }
    }
}
