use gapdefect_core::diophantine::{exact_residual, ExactResidual};
use gapdefect_core::floquet::{gap, gap_coordinate_map};
use gapdefect_core::*;
use num_bigint::BigInt;
use proptest::prelude::*;

fn kp_like(a: f64, amp: f64, split: f64, qd: f64) -> PotentialSpec {
    let c = split * a;
    PotentialSpec::new(a, vec![Piece::constant(0.0, c, -amp), Piece::constant(c, a, amp)], vec![Piece::constant(0.0, 1.0, qd)]).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 12, ..ProptestConfig::default() })]

    #[test]
    fn counts_within_bounds(a in 0.5f64..3.0, amp in 5.0f64..50.0, split in 0.2f64..0.8, qd in -20.0f64..80.0) {
        let spec = kp_like(a, amp, split, qd);
        let params = CountParams::default();
        for j in 1..=3 {
            let Some(g) = gap(&spec, j, params.scan_step, params.edge_tol).unwrap() else { continue };
            let r = count_gap(&spec, &g, &params).unwrap();
            if r.classically_allowed {
                prop_assert!(r.lower_bound <= r.evans_count as i64 && r.evans_count as i64 <= r.upper_bound);
                if r.n_boundary == 0 {
                    prop_assert_eq!(r.evans_count, r.n_g + 1);
                }
            }
        }
    }

    #[test]
    fn sandwich_with_linear_defect(a in 0.5f64..3.0, amp in 5.0f64..50.0, q0 in 0.0f64..60.0, slope in -30.0f64..30.0) {
        let spec = kp_like(a, amp, 0.5, 0.0).with_defect(vec![Piece::new(0.0, 1.0, vec![q0, slope])]).unwrap();
        let params = CountParams::default();
        for j in 1..=3 {
            let Some(g) = gap(&spec, j, params.scan_step, params.edge_tol).unwrap() else { continue };
            // count_gap itself fails if a classically allowed count leaves the bounds
            let r = count_gap(&spec, &g, &params).unwrap();
            if r.classically_allowed {
                prop_assert!(r.lower_bound <= r.evans_count as i64 && r.evans_count as i64 <= r.upper_bound);
            }
        }
    }

    #[test]
    fn monodromy_is_symplectic(a in 0.5f64..3.0, amp in 0.0f64..50.0, split in 0.2f64..0.8, e in 0.0f64..300.0) {
        let spec = kp_like(a, amp, split, 0.0);
        let m = monodromy_periodic(&spec, e + amp);
        prop_assert!(m.symplectic_defect() < 1e-9);
    }

    #[test]
    fn gap_coordinate_is_monotone(a in 0.8f64..2.0, amp in 10.0f64..40.0) {
        let spec = kp_like(a, amp, 0.5, 0.0);
        let g = gap(&spec, 1, 0.5, 1e-10).unwrap().unwrap();
        let map = gap_coordinate_map(&spec, &g, 1e-9).unwrap();
        let grid = map.uniform_grid(16).unwrap();
        for w in grid.windows(2) {
            prop_assert!(w[1].0 > w[0].0 && w[1].1 > w[0].1);
        }
    }

    #[test]
    fn modular_group_law(i in 0usize..6, k in 0usize..6) {
        let gens = [
            Unimodular(1, 1, 0, 1), Unimodular(1, -1, 0, 1), Unimodular(0, -1, 1, 0),
            Unimodular(2, 1, 1, 1), Unimodular(1, 0, 1, 1), Unimodular(1, 0, -2, 1),
        ];
        let q = QuadraticIrrational::golden();
        let hits = &form_solutions(&q, 11, 4).unwrap()[0];
        let (b1, s1) = modular_transform(&q, hits, gens[i]).unwrap();
        let (b2, s2) = modular_transform(&b1, &s1, gens[k]).unwrap();
        let (b3, s3) = modular_transform(&q, hits, gens[i].compose(&gens[k])).unwrap();
        prop_assert_eq!(b2.exact(), b3.exact());
        prop_assert_eq!(s2, s3);
    }

    #[test]
    fn convergent_residual_signs_alternate(n in 2i64..40, c in 1i64..5) {
        // x² − n x − c: positive root with a periodic expansion
        prop_assume!(QuadraticIrrational::new(1, -n, -c, 1).is_ok());
        let q = QuadraticIrrational::new(1, -n, -c, 1).unwrap();
        let a = RealNumber::Quadratic(q);
        let cf = continued_fraction(&a, 16).unwrap();
        prop_assert!(cf.period_len.is_some());
        for (k, (p, qq)) in convergents(&cf.terms).iter().enumerate() {
            let ExactResidual::Quadratic(r) = exact_residual(&a, p, qq).unwrap() else { unreachable!() };
            prop_assert_eq!(r.signum(), if k % 2 == 0 { -1 } else { 1 });
        }
    }
}

/// A continued fraction with terms at most m keeps `|M (N − a M)|` away
/// from zero by `1/(m + 2)`.
#[test]
fn bounded_terms_keep_residuals_away_from_zero() {
    for (q, m) in [(QuadraticIrrational::golden(), 1.0), (QuadraticIrrational::new(1, 0, -2, 1).unwrap(), 2.0)] {
        let a = q.value();
        let bound = 1.0 / (m + 2.0);
        for mm in 1..=1_000_000i64 {
            let n = (a * mm as f64).round();
            let r = mm as f64 * (-a).mul_add(mm as f64, n);
            if r.abs() < bound + 1e-3 {
                // close call: decide exactly
                let ExactResidual::Quadratic(x) = exact_residual(&RealNumber::Quadratic(q), &BigInt::from(n as i64), &BigInt::from(mm)).unwrap() else {
                    unreachable!()
                };
                assert!(x.abs().to_f64() >= bound, "M = {mm}, residual {}", x.to_f64());
            }
        }
    }
}

/// Evans and oracle counts agree on a second constant-defect spec.
#[test]
fn oracle_matches_evans_on_second_spec() {
    let spec = kp_like(1.3, 25.0, 0.4, 35.0);
    let params = CountParams {
        oracle: Some(OracleParams::default()),
        ..CountParams::default()
    };
    for r in count_range(&spec, 1, 4, &params).unwrap() {
        assert_eq!(r.oracle_count, Some(r.evans_count), "G{}", r.gap.index);
    }
}
