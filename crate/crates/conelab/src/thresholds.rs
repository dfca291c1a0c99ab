//! Acceptance thresholds. Every verdict in the run store is looked up here by
//! `(scenario, quantity)`; reports cite the entry id and the table version.

use serde::Serialize;

pub const TABLE_VERSION: &str = "1";

pub const C1_MAX_RESIDUAL: f64 = 1e-12;
pub const C1_GAMMA_MAX: u32 = 12;
pub const C1_U_MIN: f64 = 1.0 / 8192.0;
pub const C2_CAP_FACTOR: f64 = 1.2;
pub const C3_TOL_N3: f64 = 0.15;
pub const C3_TOL_N4: f64 = 0.2;
pub const C4_TOL: f64 = 0.15;
pub const C5_REL_TOL: f64 = 0.005;
pub const C6_MAX_CONSTANT: f64 = 64.0;
pub const TAU_LIMIT: f64 = 0.3;
pub const C7_MAX_SLOPE: f64 = -3.0;
pub const C8_MARGIN: f64 = 0.3;
pub const C9_RATIO: (f64, f64) = (1.0 / 6.0, 1.0 / 2.5);
pub const C9_T_FROM: f64 = 8.0;
pub const C9_FINAL: f64 = 1e-3;
pub const C10_IDENTITY: f64 = 1e-13;
pub const C10_LEAKAGE: f64 = 1e-6;
pub const C10_SPREAD: f64 = 3.0;
pub const C11_CHANGE: f64 = 0.5;
pub const C12_MARGIN: f64 = 0.2;

#[derive(Debug, Clone, Copy, Serialize)]
pub struct Threshold {
    pub id: &'static str,
    pub criterion: u8,
    pub scenario: &'static str,
    pub quantity: &'static str,
    pub rule: &'static str,
    /// Set when the criterion is known not to be met at desk scale.
    pub known_failure: Option<&'static str>,
}

const fn entry(id: &'static str, criterion: u8, scenario: &'static str, quantity: &'static str, rule: &'static str) -> Threshold {
    Threshold { id, criterion, scenario, quantity, rule, known_failure: None }
}

const fn known(
    id: &'static str,
    criterion: u8,
    scenario: &'static str,
    quantity: &'static str,
    rule: &'static str,
    why: &'static str,
) -> Threshold {
    Threshold { id, criterion, scenario, quantity, rule, known_failure: Some(why) }
}

pub const TABLE: &[Threshold] = &[
    entry("C1.residual", 1, "reconstruct", "max_residual", "<= 1e-12 over 1e5 samples, gamma <= 12"),
    entry("C1.runtime", 1, "reconstruct", "runtime_s", "< 10 s"),
    entry("C2.t-integral", 2, "square-bound", "t_integral_over_cap", "<= 1 at every lattice frequency"),
    entry("C2.cap", 2, "square-bound", "cap_over_delta", "log(1/(1-delta))/delta <= 1.2"),
    entry("C2.square", 2, "square-bound", "square_ratio_over_bound", "||G f||/||f|| <= (1.2 delta)^(1/2), 20 fields"),
    entry("C2.runtime", 2, "square-bound", "runtime_s", "< 120 s"),
    entry("C3.power", 3, "trace-sweep", "power_slope", "within 0.15 (n=3) / 0.2 (n=4) of min(alpha+beta, 1)"),
    known(
        "C3.log",
        3,
        "trace-sweep",
        "log_preferred",
        "power-times-log model preferred at alpha+beta = 1",
        "v/delta ~ A log(1/delta) + B with B dominating over 2^-3..2^-7; pure power fits better",
    ),
    entry("C3.runtime", 3, "trace-sweep", "runtime_s", "< 900 s"),
    entry("C4.power", 4, "sphere-sweep", "power_slope", "within 0.15 of min(alpha, 1)"),
    known(
        "C4.log",
        4,
        "sphere-sweep",
        "log_preferred",
        "power-times-log model preferred at alpha = 1",
        "v ~ delta (4 log(1/delta) + 12.3); the constant term dominates at reachable delta",
    ),
    entry("C4.runtime", 4, "sphere-sweep", "runtime_s", "< 600 s"),
    entry("C5.interval", 5, "trace-sweep", "interval_rel_err", "|quadrature / closed form - 1| <= 0.005"),
    entry("C5.runtime", 5, "trace-sweep", "interval_runtime_s", "< 10 s"),
    entry("C6.constant", 6, "slice-volume", "max_ratio", "<= 64"),
    known(
        "C6.tau",
        6,
        "slice-volume",
        "kendall_tau",
        "|tau| <= 0.3 over (l, ratio)",
        "at k = 1 the ratio behaves like ((l+9)/l)^(1/2), a decreasing trend",
    ),
    entry("C6.runtime", 6, "slice-volume", "runtime_s", "< 600 s"),
    entry("C7.sweep", 7, "offcone-decay", "sweep_slope", "<= -3 against 2^j delta"),
    entry("C7.shell", 7, "offcone-decay", "shell_slope", "<= -3 against 2^l"),
    entry("C7.runtime", 7, "offcone-decay", "runtime_s", "< 300 s"),
    entry("C8.exponent", 8, "kernel-decay", "decay_exponent", ">= n/2 + lambda - 0.3"),
    entry("C8.runtime", 8, "kernel-decay", "runtime_s", "< 1200 s"),
    entry("C9.ratio", 9, "converge", "error_ratio", "in [1/6, 1/2.5] for t >= 8"),
    entry("C9.final", 9, "converge", "final_error_rel", "error(2^10) <= 1e-3 ||f||_inf"),
    entry("C9.runtime", 9, "converge", "runtime_s", "< 300 s"),
    entry("C10.identity", 10, "decompose-check", "sum_identity", "<= 1e-13"),
    entry("C10.leakage", 10, "decompose-check", "band_leakage", "<= 1e-6 at rho = 2^-8"),
    entry("C10.spread", 10, "decompose-check", "dilation_spread", "max/min <= 3"),
    entry("C10.tau", 10, "decompose-check", "dilation_tau", "|tau| <= 0.3"),
    entry("C10.runtime", 10, "decompose-check", "runtime_s", "< 300 s"),
    entry("C11.ortho", 11, "ortho-check", "ortho_change", "finite, relative change under N doubling <= 0.5"),
    entry("C11.dual", 11, "ortho-check", "dual_change", "finite, relative change under N doubling <= 0.5"),
    entry("C11.runtime", 11, "ortho-check", "runtime_s", "< 600 s"),
    entry("C12.slope", 12, "g0-weighted", "ratio_slope", ">= exponent - 0.2 (1/2 if alpha+beta < 1, (2-alpha-beta)/2 if > 1)"),
    entry("C12.runtime", 12, "g0-weighted", "runtime_s", "< 1800 s"),
];

const RUNTIME_CAPS: &[(&str, f64)] = &[
    ("reconstruct", 10.0),
    ("square-bound", 120.0),
    ("trace-sweep", 900.0),
    ("sphere-sweep", 600.0),
    ("slice-volume", 600.0),
    ("offcone-decay", 300.0),
    ("kernel-decay", 1200.0),
    ("converge", 300.0),
    ("decompose-check", 300.0),
    ("ortho-check", 600.0),
    ("g0-weighted", 1800.0),
];

/// Runtime cap in seconds, if the scenario backs a criterion.
pub fn runtime_cap(scenario: &str, n: usize) -> Option<f64> {
    if scenario == "trace-sweep" && n == 1 {
        return Some(10.0);
    }
    RUNTIME_CAPS.iter().find(|(s, _)| *s == scenario).map(|c| c.1)
}

pub fn runtime_quantity(scenario: &str, n: usize) -> &'static str {
    if scenario == "trace-sweep" && n == 1 {
        "interval_runtime_s"
    } else {
        "runtime_s"
    }
}

/// Entry for a record; a `@...` suffix on the quantity names the sweep point
/// and is ignored.
pub fn lookup(scenario: &str, quantity: &str) -> Option<&'static Threshold> {
    let base = quantity.split('@').next().unwrap_or(quantity);
    TABLE.iter().find(|t| t.scenario == scenario && t.quantity == base)
}

pub fn criterion_entries(criterion: u8) -> impl Iterator<Item = &'static Threshold> {
    TABLE.iter().filter(move |t| t.criterion == criterion)
}
