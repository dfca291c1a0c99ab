use conelab_core::decompose::{block_symbol, random_band_field, random_band_spectrum, split_four};
use conelab_core::multipliers::reconstruct_residual;
use conelab_core::operators::{apply_t, collar_t_integral, square_function, TGrid};
use conelab_core::{Grid, MultiplierSpec};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn dyadic_pieces_rebuild_the_multiplier(
        xn in 0.5f64..2.0,
        log_u in -13.0f64..0.0,
        angle in 0.0f64..std::f64::consts::TAU,
        lambda in 0.25f64..3.0,
    ) {
        let r = xn * (1.0 - log_u.exp2()).sqrt();
        let xi = [r * angle.cos(), r * angle.sin(), xn];
        prop_assert!(reconstruct_residual(lambda, 12, &xi) <= 1e-12);
    }

    #[test]
    fn block_squares_stay_between_a_quarter_and_one(
        log_r in -8.0f64..8.0,
        log_xn in -8.0f64..8.0,
    ) {
        let xi = [log_r.exp2(), log_xn.exp2()];
        let mut s = 0.0;
        for k in -30..=30 {
            for l in -12..=12 {
                s += block_symbol(&xi, k, l).powi(2);
            }
        }
        prop_assert!((0.25 - 1e-12..=1.0 + 1e-12).contains(&s), "{s}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn four_parts_sum_back(seed in 0u64..1000, k in 6i32..=10) {
        let g = Grid::cell_centered(2, 64, 64.0).unwrap();
        let f = random_band_field(&g, (0.0, 0.4), (0.1, 0.45), seed);
        let s = split_four(&f, (-k as f64).exp2()).unwrap();
        prop_assert!(s.sum().sub(&f).unwrap().sup_norm() <= 1e-13 * f.sup_norm());
    }
}

#[test]
fn square_function_by_plancherel() {
    let delta = 0.25;
    let g = Grid::new(2, 64, 8.0).unwrap();
    let s = random_band_spectrum(&g, (0.0, 0.85), (0.5, 2.0), 4);
    let f = s.inverse();
    let tg = TGrid::resolving(1.0 / 64.0, 2.0, delta).unwrap();
    let direct = square_function(&f, &MultiplierSpec::DeltaCollar { delta }, &tg).unwrap().l2_norm().powi(2);
    let fr = g.freqs();
    let np = g.points_per_axis();
    let by_symbol: f64 = s
        .coeffs()
        .iter()
        .enumerate()
        .map(|(flat, c)| c.norm_sqr() * collar_t_integral(delta, fr[flat / np].abs(), fr[flat % np], &tg))
        .sum::<f64>()
        * g.dual_cell_volume();
    assert!((direct - by_symbol).abs() <= 1e-10 * by_symbol, "{direct} vs {by_symbol}");
}

#[test]
fn cone_multiplier_error_halves_twice_per_doubling() {
    let g = Grid::new(2, 64, 16.0).unwrap();
    let f = random_band_field(&g, (0.0, 1.0), (1.03, 1.97), 8);
    let spec = MultiplierSpec::ConeFull { lambda: 1.0 };
    let err = |t: f64| apply_t(&f, &spec, t).unwrap().sub(&f).unwrap().sup_norm();
    for t in [2.0, 8.0, 32.0] {
        let ratio = err(2.0 * t) / err(t);
        assert!((ratio - 0.25).abs() < 1e-9, "t = {t}: {ratio}");
    }
}
