mod common;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use speckle::divergence::{analytic_ks_distance, hphi_distance, test_statistic};
use speckle::kstest::{ecdf, ks_distance};
use speckle::{DistanceKind, G0Params, Sample};

fn law(a: f64, g: f64, l: f64) -> G0Params {
    G0Params::new(a, g, l).unwrap()
}

fn random_pair(rng: &mut ChaCha8Rng) -> (G0Params, G0Params) {
    let l = [1.0, 2.0, 4.0, 8.0][rng.random_range(0..4)];
    let mut one = || law(rng.random_range(-8.0..-1.2), rng.random_range(0.3..10.0), l);
    (one(), one())
}

#[test]
fn distances_are_nonnegative_and_symmetric() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..50 {
        let (p, q) = random_pair(&mut rng);
        for kind in DistanceKind::PARAMETRIC {
            let d = hphi_distance(kind, &p, &q).unwrap();
            assert!(d >= -1e-12, "{kind} {p:?} {q:?}: {d}");
            assert_eq!(d, hphi_distance(kind, &q, &p).unwrap());
        }
        assert_eq!(analytic_ks_distance(&p, &q).unwrap(), analytic_ks_distance(&q, &p).unwrap());
    }
}

#[test]
fn identical_laws_over_the_grid() {
    for a in [-1.5, -3.0, -5.0] {
        for g in [0.5, 2.0, 20.0] {
            for l in [1.0, 3.2, 8.0] {
                let p = law(a, g, l);
                for kind in DistanceKind::PARAMETRIC {
                    assert!(hphi_distance(kind, &p, &p).unwrap().abs() <= 1e-9);
                }
                assert!(analytic_ks_distance(&p, &p).unwrap() <= 1e-9);
            }
        }
    }
}

#[test]
fn divergences_match_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..6 {
        let (p, q) = random_pair(&mut rng);
        let oracle = common::divergences((p.alpha(), p.gamma(), p.looks()), (q.alpha(), q.gamma(), q.looks()));
        for (k, kind) in DistanceKind::PARAMETRIC.into_iter().enumerate() {
            let want = 0.5 * (oracle.forward[k] + oracle.backward[k]);
            let got = hphi_distance(kind, &p, &q).unwrap();
            assert!((got - want).abs() <= 1e-6 * want.abs().max(1e-300), "{kind}: {got} vs {want}");
        }
    }
}

#[test]
fn parametric_p_values_are_exponential() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..10 {
        let (p, q) = random_pair(&mut rng);
        for kind in DistanceKind::PARAMETRIC {
            let r = test_statistic(kind, &p, &q, 49, 121).unwrap();
            assert!((r.p_value - (-r.statistic / 2.0).exp()).abs() < 1e-12);
        }
    }
}

#[test]
fn ks_sweep_matches_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..100 {
        let (m, n) = (rng.random_range(1..=20), rng.random_range(1..=20));
        let mut draw = |n: usize| (0..n).map(|_| rng.random_range(1..8) as f64).collect::<Vec<_>>();
        let (x, y) = (draw(m), draw(n));
        let d = ks_distance(&ecdf(&Sample::new(x.clone()).unwrap()), &ecdf(&Sample::new(y.clone()).unwrap()));
        assert_eq!(d, common::brute_force_ks(&x, &y));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn distance_depends_on_gamma_ratio(a in -6.0..-1.3f64, g1 in 0.3..10.0f64, g2 in 0.3..10.0f64, l in 1.0..8.0f64, c in 0.05..20.0f64) {
        let (p, q) = (law(a, g1, l), law(a, g2, l));
        let (ps, qs) = (p.scaled(c).unwrap(), q.scaled(c).unwrap());
        for kind in DistanceKind::PARAMETRIC {
            let (d, ds) = (hphi_distance(kind, &p, &q).unwrap(), hphi_distance(kind, &ps, &qs).unwrap());
            prop_assert!((d - ds).abs() < 1e-8, "{} {} {}", kind, d, ds);
        }
    }

    #[test]
    fn ks_distance_is_a_shift_invariant_symmetric_probability(
        x in prop::collection::vec(0.01..10.0f64, 1..40),
        y in prop::collection::vec(0.01..10.0f64, 1..40),
        shift in 0.0..100.0f64,
    ) {
        let e = |v: &[f64]| ecdf(&Sample::new(v.to_vec()).unwrap());
        let d = ks_distance(&e(&x), &e(&y));
        prop_assert!((0.0..=1.0).contains(&d));
        prop_assert_eq!(d, ks_distance(&e(&y), &e(&x)));
        // Doubling is monotone and exact in floating point.
        let (xs, ys): (Vec<f64>, Vec<f64>) = (x.iter().map(|v| 2.0 * v).collect(), y.iter().map(|v| 2.0 * v).collect());
        prop_assert_eq!(d, ks_distance(&e(&xs), &e(&ys)));
        let (xa, ya): (Vec<f64>, Vec<f64>) = (x.iter().map(|v| v + shift).collect(), y.iter().map(|v| v + shift).collect());
        prop_assert_eq!(d, ks_distance(&e(&xa), &e(&ya)));
    }
}
