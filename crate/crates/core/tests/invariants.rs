use approx::assert_relative_eq;
use proptest::prelude::*;

use spdelab::evolution::NoiseModel;
use spdelab::field::{read_fields, write_fields};
use spdelab::morrey::{morrey_norm, Admissibility, BallSampler, CenterSet, MorreyParams};
use spdelab::spde::Mollifier;
use spdelab::{Field, GridFunction, Order, SpectralTriple};

fn triple(order: Order) -> SpectralTriple {
    SpectralTriple::new(1, 16, 2.0 * std::f64::consts::PI, order).unwrap()
}

fn grid_values(len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0f64..1.0, len)
}

fn order() -> impl Strategy<Value = Order> {
    prop_oneof![Just(Order::One), Just(Order::Two)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn scaled_resolvent_contracts_both_norms(
        order in order(),
        values in grid_values(16),
        log_lambda in -1.0f64..4.0,
    ) {
        let tr = triple(order);
        let lambda = 10f64.powf(log_lambda);
        let f = GridFunction::new(&tr, values).unwrap();
        let v = tr.resolvent(lambda, &f).unwrap().scaled(lambda);
        let (fh, fv) = tr.norms(&f).unwrap();
        let (vh, vv) = tr.norms(&v).unwrap();
        prop_assert!(vh <= fh * (1.0 + 1e-12) + 1e-300);
        prop_assert!(vv <= fv * (1.0 + 1e-12) + 1e-300);
    }

    #[test]
    fn resolvent_is_symmetric_in_both_inner_products(
        order in order(),
        a in grid_values(16),
        b in grid_values(16),
        lambda in 0.1f64..100.0,
    ) {
        let tr = triple(order);
        let f = GridFunction::new(&tr, a).unwrap();
        let g = GridFunction::new(&tr, b).unwrap();
        let rf = tr.resolvent(lambda, &f).unwrap();
        let rg = tr.resolvent(lambda, &g).unwrap();
        let scale = tr.norms(&f).unwrap().1 * tr.norms(&g).unwrap().1 + 1e-300;
        let h = tr.h_inner(rf.values(), g.values()) - tr.h_inner(f.values(), rg.values());
        let v = tr.v_inner(rf.values(), g.values()) - tr.v_inner(f.values(), rg.values());
        prop_assert!(h.abs() <= 1e-12 * scale);
        prop_assert!(v.abs() <= 1e-12 * scale);
    }

    #[test]
    fn preimage_inverts_the_resolvent(values in grid_values(16), lambda in 0.0f64..50.0) {
        let tr = triple(Order::One);
        let f = GridFunction::new(&tr, values).unwrap();
        let back = tr.resolvent_preimage(lambda, &tr.resolvent(lambda, &f).unwrap()).unwrap();
        for (x, y) in back.values().iter().zip(f.values()) {
            prop_assert!((x - y).abs() <= 1e-11);
        }
    }

    #[test]
    fn morrey_norm_is_homogeneous_and_shift_invariant(
        values in grid_values(64),
        c in 0.01f64..100.0,
        shift in 0usize..64,
    ) {
        let tr = SpectralTriple::new(1, 64, 4.0, Order::One).unwrap();
        let params = MorreyParams::new(2.0, 1.0, 0.5, Admissibility::Full).unwrap();
        let sampler = BallSampler::ladder(&tr, 1.0, 4, CenterSet::All);
        let base = morrey_norm(&tr, &values, &params, &sampler).unwrap();
        let scaled: Vec<f64> = values.iter().map(|v| c * v).collect();
        let shifted: Vec<f64> = (0..64).map(|i| values[(i + shift) % 64]).collect();
        assert_relative_eq!(morrey_norm(&tr, &scaled, &params, &sampler).unwrap(), c * base, max_relative = 1e-10);
        assert_relative_eq!(morrey_norm(&tr, &shifted, &params, &sampler).unwrap(), base, max_relative = 1e-10, epsilon = 1e-14);
    }

    #[test]
    fn mollifier_keeps_the_mean_and_does_not_raise_the_maximum(
        values in grid_values(32),
        epsilon in 0.05f64..0.95,
    ) {
        let tr = SpectralTriple::new(1, 32, 2.0, Order::One).unwrap();
        let m = Mollifier::new(&tr, epsilon).unwrap();
        let out = m.apply(&values);
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        let max = |v: &[f64]| v.iter().fold(0.0f64, |a, x| a.max(x.abs()));
        prop_assert!((mean(&out) - mean(&values)).abs() <= 1e-13);
        prop_assert!(max(&out) <= max(&values) + 1e-13);
    }

    #[test]
    fn coarsened_noise_keeps_the_endpoint(
        seed in any::<u64>(),
        path in 0u64..1000,
        factor in prop::sample::select(vec![1usize, 2, 4, 8]),
    ) {
        let model = NoiseModel::new(2, 0.0125, 0.5, seed).unwrap();
        let fine = model.path_increments(path);
        let (coarse_model, coarse) = model.coarsen(&fine, factor).unwrap();
        assert_relative_eq!(coarse_model.t_final(), 0.5, max_relative = 1e-14);
        for channel in 0..2 {
            let total = |v: &[f64]| v.iter().skip(channel).step_by(2).sum::<f64>();
            prop_assert!((total(&fine) - total(&coarse)).abs() <= 1e-12);
        }
    }

    #[test]
    fn single_step_draws_match_the_whole_path(seed in any::<u64>(), path in 0u64..1000, step in 0usize..40) {
        let model = NoiseModel::new(3, 0.025, 1.0, seed).unwrap();
        let all = model.path_increments(path);
        let mut one = [0.0; 3];
        model.increments(path, step, &mut one);
        prop_assert_eq!(&one[..], &all[3 * step..3 * step + 3]);
    }

    #[test]
    fn field_files_round_trip(values in grid_values(8), other in grid_values(8)) {
        let tr = SpectralTriple::new(3, 2, 1.5, Order::One).unwrap();
        let slices = vec![Field::from_components(vec![values, other]).unwrap()];
        let mut bytes = Vec::new();
        write_fields(&mut bytes, &tr, &slices).unwrap();
        let (header, back) = read_fields(bytes.as_slice()).unwrap();
        prop_assert_eq!((header.dim, header.points_per_axis, header.n_components), (3, 2, 2));
        prop_assert_eq!(back, slices);
    }
}
