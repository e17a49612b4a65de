use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use speckle::estimation::{fit_ml, init_moments, log_likelihood, score, FitOptions};
use speckle::G0Params;

fn law(a: f64, g: f64, l: f64) -> G0Params {
    G0Params::new(a, g, l).unwrap()
}

#[test]
fn large_sample_consistency() {
    let s = law(-3.0, 2.0, 1.0).sample(100_000, &mut ChaCha8Rng::seed_from_u64(7)).unwrap();
    let fit = fit_ml(&s, 1.0, &FitOptions::default()).unwrap();
    assert!(fit.converged);
    assert!((fit.params.alpha() + 3.0).abs() < 0.1, "{:?}", fit.params);
    assert!((fit.params.gamma() - 2.0).abs() < 0.1, "{:?}", fit.params);
}

#[test]
fn optimum_beats_moment_start() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for (a, g, l) in [(-1.5, 0.5, 1.0), (-3.0, 2.0, 3.0), (-5.0, 4.0, 8.0), (-8.0, 7.0, 2.0)] {
        let s = law(a, g, l).sample(121, &mut rng).unwrap();
        let start = init_moments(&s, l).unwrap();
        let fit = fit_ml(&s, l, &FitOptions::default()).unwrap();
        assert!(fit.log_likelihood >= log_likelihood(&start, &s));
    }
}

#[test]
fn fits_are_bit_reproducible() {
    let s = law(-2.0, 1.0, 2.0).sample(81, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
    let opts = FitOptions::default();
    assert_eq!(fit_ml(&s, 2.0, &opts).unwrap(), fit_ml(&s, 2.0, &opts).unwrap());
}

#[test]
fn fit_is_scale_equivariant() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    for (a, g, l) in [(-1.5, 0.5, 1.0), (-3.0, 2.0, 8.0), (-5.0, 4.0, 3.0)] {
        let s = law(a, g, l).sample(400, &mut rng).unwrap();
        let base = fit_ml(&s, l, &FitOptions::default()).unwrap();
        assert!(base.converged);
        for c in [0.1, 10.0] {
            let f = fit_ml(&s.scaled(c).unwrap(), l, &FitOptions::default()).unwrap();
            let (da, dg) = (f.params.alpha() / base.params.alpha() - 1.0, f.params.gamma() / (c * base.params.gamma()) - 1.0);
            assert!(da.abs() < 1e-6 && dg.abs() < 1e-6, "c = {c}: {da:e} {dg:e}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(20))]

    #[test]
    fn score_is_the_gradient(a in -8.0..-1.2f64, g in 0.3..10.0f64, l in prop::sample::select(vec![1.0, 2.0, 4.0, 8.0]), seed in any::<u64>()) {
        let s = law(a, g, l).sample(60, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        let n = s.len() as f64;
        let f = |x: f64, y: f64| log_likelihood(&law(x, y, l), &s) / n;
        let h = 1e-6;
        let (sa, sg) = score(&law(a, g, l), &s);
        prop_assert!((sa - (f(a + h, g) - f(a - h, g)) / (2.0 * h)).abs() < 1e-6);
        prop_assert!((sg - (f(a, g + h) - f(a, g - h)) / (2.0 * h)).abs() < 1e-6);
    }
}
