use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use tidt_core::hankel::{
    check_periodicity_bound, check_smoothness_bound, cyclic_shift, hankel_forward, hankel_inverse,
    hankelize_unscaled,
};
use tidt_core::sampling::{apply_mask, gen_bernoulli, hankel_mask};
use tidt_core::{DenseTensor, HankelConfig};

fn random(shape: &[usize], seed: u64) -> DenseTensor {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    DenseTensor::from_fn(shape, |_| rng.gen_range(-1.0..1.0)).unwrap()
}

fn series_shape() -> impl Strategy<Value = Vec<usize>> {
    (2usize..=12, prop::collection::vec(1usize..=3, 0..=2)).prop_map(|(t, rest)| {
        let mut s = vec![t];
        s.extend(rest);
        s
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn hankel_is_an_isometry(shape in series_shape(), k_frac in 0.0f64..1.0, seed in any::<u64>(), symmetric in any::<bool>()) {
        let t = shape[0];
        let limit = if symmetric { 2 * t } else { t };
        let k = 1 + ((limit - 1) as f64 * k_frac) as usize;
        let cfg = if symmetric { HankelConfig::symmetric(k) } else { HankelConfig::new(k) };
        let (x, y) = (random(&shape, seed), random(&shape, seed ^ 3));
        let hx = hankel_forward(&x, &cfg).unwrap();
        let hy = hankel_forward(&y, &cfg).unwrap();
        prop_assert!(hankel_inverse(&hx, &cfg).unwrap().max_abs_diff(&x).unwrap() < 1e-12);
        if !symmetric {
            let d = hx.distance(&hy).unwrap() - x.distance(&y).unwrap();
            prop_assert!(d.abs() < 1e-12);
            // adjoint: ⟨H x, Z⟩ = ⟨x, H* Z⟩
            let z = random(hx.shape(), seed ^ 5);
            let lhs = hx.inner(&z).unwrap();
            let rhs = x.inner(&hankel_inverse(&z, &cfg).unwrap()).unwrap();
            prop_assert!((lhs - rhs).abs() < 1e-10);
        }
    }

    #[test]
    fn sampling_commutes_with_hankelization(shape in series_shape(), k_frac in 0.0f64..1.0, seed in any::<u64>()) {
        let t = shape[0];
        let k = 1 + ((t - 1) as f64 * k_frac) as usize;
        let cfg = HankelConfig::new(k);
        let x = random(&shape, seed);
        let mask = gen_bernoulli(&shape, 0.6, seed).unwrap();
        let hm = hankel_mask(&mask, &cfg).unwrap();
        let left = hankel_forward(&apply_mask(&x, &mask).unwrap(), &cfg).unwrap();
        let right = apply_mask(&hankel_forward(&x, &cfg).unwrap(), &hm).unwrap();
        prop_assert!(left.max_abs_diff(&right).unwrap() < 1e-15);
        prop_assert_eq!(hankelize_unscaled(mask.tensor(), &cfg).unwrap(), hm.tensor().clone());
    }

    #[test]
    fn smoothness_bound_holds(t in 3usize..=24, n in 1usize..=3, k_frac in 0.0f64..1.0, r_frac in 0.0f64..1.0, seed in any::<u64>()) {
        // a random walk is smooth relative to its amplitude
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut level = vec![0.0; n];
        let data: Vec<f64> = (0..t).flat_map(|_| {
            for v in level.iter_mut() { *v += rng.gen_range(-0.1..0.1); }
            level.clone()
        }).collect();
        let m = DenseTensor::from_vec(&[t, n], data).unwrap();
        let k = 1 + ((t - 1) as f64 * k_frac) as usize;
        let r = 1 + ((k - 1) as f64 * r_frac) as usize;
        let check = check_smoothness_bound(&m, k, r).unwrap();
        prop_assert!(check.holds, "{check:?}");
    }

    #[test]
    fn periodicity_bound_holds_near_periodic(tau in 1usize..=6, reps in 2usize..=6, n in 1usize..=3, k_frac in 0.0f64..1.0, seed in any::<u64>()) {
        let t = tau * reps;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let base: Vec<f64> = (0..tau * n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let m = DenseTensor::from_fn(&[t, n], |i| base[(i[0] % tau) * n + i[1]] + 1e-3 * rng.gen_range(-1.0..1.0)).unwrap();
        let k = 1 + ((t - 1) as f64 * k_frac) as usize;
        let check = check_periodicity_bound(&m, k, tau).unwrap();
        prop_assert!(check.holds, "{check:?}");
    }

    #[test]
    fn cyclic_shift_composes(shape in series_shape(), a in 0usize..30, b in 0usize..30, seed in any::<u64>()) {
        let m = random(&shape, seed);
        let t = shape[0];
        prop_assert_eq!(cyclic_shift(&cyclic_shift(&m, a), b), cyclic_shift(&m, (a + b) % t));
    }
}
