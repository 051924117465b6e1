use besov_lab::besov::coeffs::SeriesBasis;
use besov_lab::bspline::{eval_tensor_basis, index_set, LevelLocation, SmoothnessVec, SplineOrder};
use besov_lab::estimators::{
    fit_kernel_ridge, fit_nonadaptive_series, FeatureMap, FittedModel, KernelFamily,
    RegressionDataset,
};
use besov_lab::relu::{compose_with_clipping, covering_number_bound, CsrMatrix, Layer, ReluNetwork};
use besov_lab::sampling::PxSampler;
use besov_lab::target::FnTarget;
use proptest::prelude::*;

fn smoothness(d: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(prop::sample::select(vec![0.5, 0.8, 1.0, 1.5, 2.0, 3.0, 4.0]), d)
}

fn dense_layer(rows: usize, cols: usize) -> impl Strategy<Value = (Vec<Vec<f64>>, Vec<f64>)> {
    let entry = prop_oneof![3 => Just(0.0), 2 => -2.0..2.0f64];
    (
        prop::collection::vec(prop::collection::vec(entry.clone(), cols), rows),
        prop::collection::vec(entry, rows),
    )
}

/// A network with the given layer widths and roughly 40% zero parameters.
fn network(widths: Vec<usize>) -> impl Strategy<Value = (ReluNetwork, Vec<(Vec<Vec<f64>>, Vec<f64>)>)> {
    let layers: Vec<_> = widths.windows(2).map(|w| dense_layer(w[1], w[0])).collect();
    layers.prop_map(|dense| {
        let net = ReluNetwork::new(
            dense
                .iter()
                .map(|(w, b)| Layer::new(CsrMatrix::from_dense(w), b.clone()))
                .collect(),
        )
        .unwrap();
        (net, dense)
    })
}

fn widths() -> impl Strategy<Value = Vec<usize>> {
    (1usize..4, prop::collection::vec(1usize..6, 1..4), 1usize..3).prop_map(|(i, mut h, o)| {
        h.insert(0, i);
        h.push(o);
        h
    })
}

proptest! {
    #![proptest_config(ProptestConfig { failure_persistence: None, ..ProptestConfig::with_cases(64) })]

    #[test]
    fn tensor_partition_of_unity(
        beta in (1usize..=3).prop_flat_map(smoothness),
        m in 1u32..=4,
        k in 0u32..=4,
        seed in prop::collection::vec(0.0..=1.0f64, 3),
    ) {
        let beta = SmoothnessVec::new(beta).unwrap();
        let m = SplineOrder::new(m).unwrap();
        let x = &seed[..beta.dim()];
        let set = index_set(k, &beta, m).unwrap();
        let sum: f64 = set
            .iter()
            .map(|j| eval_tensor_basis(&LevelLocation::new(k, j), &beta, m, x).unwrap())
            .sum();
        prop_assert!((sum - 1.0).abs() < 1e-12, "sum {}", sum);
    }

    #[test]
    fn predictions_respect_clip(
        clip in 0.05..2.0f64,
        sigma in 0.0..3.0f64,
        seed in any::<u64>(),
        probes in prop::collection::vec(-1.0..2.0f64, 40),
    ) {
        let f = FnTarget::new(1, |x: &[f64]| 5.0 * (7.0 * x[0]).sin());
        let data = RegressionDataset::generate(&f, 60, sigma, &PxSampler::Uniform, seed).unwrap();
        let basis = SeriesBasis::new(SmoothnessVec::new(vec![1.0]).unwrap(), SplineOrder::new(2).unwrap());
        let series: FittedModel =
            fit_nonadaptive_series(&data, &basis, &FeatureMap::Identity, 3, clip, 1e-8).unwrap().into();
        let kernel: FittedModel =
            fit_kernel_ridge(&data, KernelFamily::Gaussian, 0.1, 1e-6, clip).unwrap().into();
        for x in &probes {
            for model in [&series, &kernel] {
                let y = model.predict(&[*x]);
                prop_assert!(y.abs() <= clip, "{} exceeds {}", y, clip);
            }
        }
    }

    #[test]
    fn stats_match_recount((net, dense) in widths().prop_flat_map(network)) {
        let s = net.stats();
        let nonzeros: usize = dense
            .iter()
            .map(|(w, b)| w.iter().flatten().chain(b).filter(|v| **v != 0.0).count())
            .sum();
        let max_abs = dense
            .iter()
            .flat_map(|(w, b)| w.iter().flatten().chain(b))
            .fold(0.0f64, |m, v| m.max(v.abs()));
        let width = dense.iter().map(|(w, _)| w.len()).fold(dense[0].0[0].len(), usize::max);
        prop_assert_eq!(s.depth, dense.len());
        prop_assert_eq!(s.nonzeros, nonzeros);
        prop_assert_eq!(s.width, width);
        prop_assert_eq!(s.max_abs, max_abs);
    }

    #[test]
    fn json_round_trip(
        (net, _) in widths().prop_flat_map(network),
        x in prop::collection::vec(-3.0..3.0f64, 3),
    ) {
        let back = ReluNetwork::from_json(&net.to_json().unwrap()).unwrap();
        prop_assert_eq!(&back, &net);
        let x = &x[..net.input_dim()];
        prop_assert_eq!(back.forward(x), net.forward(x));
    }

    #[test]
    fn covering_bound_is_monotone(
        l in 1u64..50,
        w in 1u64..500,
        s in 0u64..10_000,
        b in 0.1..100.0f64,
        delta in 0.001..0.9f64,
    ) {
        let v = covering_number_bound(l, w, s, b, delta).unwrap();
        prop_assert!(v >= 0.0);
        prop_assert!(covering_number_bound(l + 1, w, s, b, delta).unwrap() >= v);
        prop_assert!(covering_number_bound(l, w + 1, s, b, delta).unwrap() >= v);
        prop_assert!(covering_number_bound(l, w, s + 1, b, delta).unwrap() >= v);
        prop_assert!(covering_number_bound(l, w, s, b * 1.5, delta).unwrap() >= v);
        prop_assert!(covering_number_bound(l, w, s, b, delta * 0.5).unwrap() >= v);
    }

    #[test]
    fn clipped_composition_is_exact(
        stages in prop::collection::vec(
            (prop::collection::vec(prop::collection::vec(-2.0..2.0f64, 2), 2),
             prop::collection::vec(-1.0..1.0f64, 2)),
            1..4,
        ),
        points in prop::collection::vec(prop::collection::vec(-0.5..1.5f64, 2), 20),
    ) {
        // each stage is a one-hidden-layer net z ↦ W2 η(W1 z + b1)
        let nets: Vec<ReluNetwork> = stages
            .iter()
            .map(|(w, b)| {
                let hidden = Layer::new(CsrMatrix::from_dense(w), b.clone());
                let out = Layer::new(CsrMatrix::from_dense(&[vec![1.0, -0.5], vec![0.25, 1.0]]), vec![0.1, -0.2]);
                ReluNetwork::new(vec![hidden, out]).unwrap()
            })
            .collect();
        let composed = compose_with_clipping(&nets).unwrap();
        for x in &points {
            let mut z = x.clone();
            for net in &nets {
                z = net.forward(&z).into_iter().map(|v| v.clamp(0.0, 1.0)).collect();
            }
            let got = composed.forward(x);
            for (a, b) in got.iter().zip(&z) {
                prop_assert!((a - b).abs() <= 1e-12, "{} vs {}", a, b);
            }
        }
    }
}
