//! Slower convergence and consistency checks across modules.

use std::f64::consts::PI;

use freedens::*;
use num_traits::ToPrimitive;

fn f(q: &num_rational::BigRational) -> f64 {
    q.to_f64().unwrap()
}

fn linf_error(k: usize, t: u64, r: u64) -> f64 {
    let set = GcdClassSet::exactly(t);
    let c = if k == 2 {
        count_in_ball(k, Norm::LInf, r as f64, &set).unwrap()
    } else {
        count_in_linf_ball_mobius(k, r, &set).unwrap()
    };
    c.density_f64() - theoretical_density_ut(k, t).unwrap()
}

#[test]
fn lattice_errors_shrink_with_the_radius() {
    for (k, t) in [(2usize, 1u64), (3, 1)] {
        let errs: Vec<f64> = [100, 300, 1000].iter().map(|&r| linf_error(k, t, r).abs()).collect();
        assert!(errs[0] > errs[1] && errs[1] > errs[2], "k={k} t={t}: {errs:?}");
    }
}

#[test]
fn two_visible_errors_are_not_monotone() {
    // The signed error changes sign between r = 300 and r = 1000, so |error| at 300 is
    // smaller than at 1000. The O(1/r) rate still holds.
    let errs: Vec<f64> = [100, 300, 1000].iter().map(|&r| linf_error(2, 2, r)).collect();
    assert!(errs[1] < 0.0 && errs[2] > 0.0);
    assert!(errs[1].abs() < errs[2].abs());
    for (r, e) in [100.0, 300.0, 1000.0].iter().zip(&errs) {
        assert!(e.abs() * r < 0.2, "r={r}: {e}");
    }
}

#[test]
fn mobius_path_matches_the_scan_in_three_dimensions() {
    for set in [GcdClassSet::visible(), GcdClassSet::listed([2, 3, 7]), GcdClassSet::non_unit()] {
        let scan = count_in_ball(3, Norm::LInf, 60.0, &set).unwrap();
        assert_eq!(count_in_linf_ball_mobius(3, 60, &set).unwrap(), scan, "{set}");
    }
}

#[test]
fn open_square_measure_converges() {
    let small = region_count(2, &GcdClassSet::visible(), 2.0, &Region::Ball(Norm::LInf)).unwrap();
    assert_eq!(small.count, 8);
    assert_eq!(small.scaled, 2.0);
    let big = region_count(2, &GcdClassSet::visible(), 500.0, &Region::Ball(Norm::LInf)).unwrap();
    let target = 4.0 * 6.0 / (PI * PI);
    assert!((big.expected - target).abs() < 1e-12);
    assert!((big.scaled - target).abs() / target < 0.02);
}

#[test]
fn rank_three_table_to_forty() {
    let table = build_count_table(3, 40).unwrap();
    let mut last = 0.0;
    for n in 1..=40 {
        assert_eq!(table.level_total(n), sphere_size(3, n));
        if n >= 2 {
            let m = f(&second_moment(&table, n).unwrap()) / n as f64;
            assert!(m >= last && m <= 1.5, "n={n}: {m}");
            last = m;
        }
    }
    let errs: Vec<f64> = [10, 20, 40].iter().map(|&n| llt_sup_error(&table, n, default_sigma2(3)).unwrap()).collect();
    assert!(errs[0] > errs[1] && errs[1] > errs[2], "{errs:?}");
}

#[test]
fn rank_two_moments_and_tails() {
    let table = build_count_table(2, 200).unwrap();
    let mut last = 0.0;
    for n in 2..=200 {
        let m = f(&second_moment(&table, n).unwrap()) / n as f64;
        assert!(m >= last && m <= 2.0, "n={n}: {m}");
        last = m;
    }
    assert!(f(&tail_mass(&table, 100, 5.0).unwrap()) <= 0.01);
    assert_eq!(f(&tail_mass(&table, 100, 0.0).unwrap()), 1.0);
}

#[test]
fn test_element_sampling_agrees_with_the_hybrid_series() {
    let table = build_count_table(2, 200).unwrap();
    let exact = test_element_series_hybrid(&table, 200, Budget::default()).unwrap();
    let q = f(exact.point(200).unwrap().annular.as_ref().unwrap());
    let est = mc_annular_estimate(2, 200, &AnnularTarget::TestElements, 200_000, 11).unwrap();
    assert!((est.estimate - q).abs() <= 4.0 * est.se, "{} vs {q}", est.estimate);
}

#[test]
fn sample_estimate_json_fields() {
    let est = mc_annular_estimate(2, 20, &AnnularTarget::Lattice(GcdClassSet::visible()), 1000, 3).unwrap();
    let v = serde_json::to_value(&est).unwrap();
    let mut keys: Vec<&str> = v.as_object().unwrap().keys().map(String::as_str).collect();
    keys.sort();
    assert_eq!(keys, ["estimate", "n", "predicate", "samples", "se", "seed"]);
}

#[test]
fn expected_gcd_grows_slowly_in_rank_two() {
    // T_n has no limit for k = 2; it should still be finite and above 1
    let table = build_count_table(2, 100).unwrap();
    let series = expected_gcd_series(&table, 100).unwrap();
    let t100 = f(series[99].annular.as_ref().unwrap());
    assert!(t100 > 1.0 && t100 < 100.0);
}
