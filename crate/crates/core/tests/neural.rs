use proptest::prelude::*;

use dlrom_core::geometry::UniformGrid1D;
use dlrom_core::linalg::Matrix;
use dlrom_core::neural::gradcheck::random_matrix;
use dlrom_core::neural::{
    adam_step, build_support_mask, load_network, save_network, Activation, AdamConfig, AdamState,
    AffineLayer, Gradients, Mask, Network,
};
use dlrom_core::rng;

fn line(grid: &UniformGrid1D) -> Vec<[f64; 2]> {
    grid.centers().into_iter().map(|x| [x, 0.0]).collect()
}

#[test]
fn support_mask_matches_distance_oracle() {
    let fine = line(&UniformGrid1D::new(5.0, 500).unwrap());
    let coarse = line(&UniformGrid1D::new(5.0, 250).unwrap());
    let mask = build_support_mask(&coarse, &fine, 0.25).unwrap();
    assert_eq!((mask.rows(), mask.cols()), (250, 500));
    for (i, p) in coarse.iter().enumerate() {
        let expect = fine.iter().filter(|q| (p[0] - q[0]).abs() <= 0.25).count();
        assert_eq!(mask.row_count(i), expect, "row {i}");
        for (j, q) in fine.iter().enumerate() {
            assert_eq!(mask.get(i, j), (p[0] - q[0]).abs() <= 0.25);
        }
    }
    // rows away from the ends see 25 fine cells on each side
    assert_eq!(mask.row_count(125), 50);
}

#[test]
fn support_mask_limits() {
    let a = [[0.0, 0.0], [1.0, 1.0], [0.5, 0.25]];
    let b = [[1.0, 0.0], [0.0, 1.0], [0.5, 0.25], [0.0, 0.0]];
    let dense = build_support_mask(&a, &b, 2f64.sqrt()).unwrap();
    assert_eq!(dense.count_ones(), 12);
    let point = build_support_mask(&a, &b, 0.0).unwrap();
    let hits: Vec<(usize, usize)> = (0..3)
        .flat_map(|i| (0..4).map(move |j| (i, j)))
        .filter(|&(i, j)| point.get(i, j))
        .collect();
    assert_eq!(hits, vec![(0, 3), (2, 2)]);
    assert!(build_support_mask(&a, &b, -1.0).is_err());
}

#[test]
fn activation_reference_values() {
    let l = Activation::leaky_relu(0.1).unwrap();
    let got: Vec<f64> = [-1.0, 0.0, 2.0].iter().map(|&x| l.apply(x)).collect();
    assert_eq!(got, vec![-0.1, 0.0, 2.0]);
    // 0.5 - rho(0.5 - x) then rho again, by hand
    let sc = Activation::SoftClamp;
    let got: Vec<f64> = [-1.0, 0.25, 1.0].iter().map(|&x| sc.apply(x)).collect();
    for (g, e) in got.iter().zip([-0.1, 0.25, 0.55]) {
        assert!((g - e).abs() < 1e-15);
    }
    assert!(Activation::leaky_relu(1.0).is_err());
}

#[test]
fn identity_layer_passes_input_through() {
    let layer = AffineLayer::new(
        Matrix::identity(3),
        vec![0.0; 3],
        None,
        Activation::Identity,
    )
    .unwrap();
    let net = Network::new(vec![layer]).unwrap();
    let x = Matrix::from_rows(&[vec![1.0, -2.0, 3.5], vec![0.0, 4.0, -1.0]]).unwrap();
    assert_eq!(net.predict(&x).unwrap(), x);
}

#[test]
fn linear_layer_weight_gradient_is_outer_product() {
    let mut r = rng::from_seed(5);
    let net = Network::new(vec![
        AffineLayer::dense(4, 3, Activation::Identity, &mut r).unwrap()
    ])
    .unwrap();
    let x = random_matrix(6, 4, 1.0, &mut r);
    let up = random_matrix(6, 3, 1.0, &mut r);
    let (_, cache) = net.forward(&x).unwrap();
    let (g, dx) = net.backward(&cache, &up).unwrap();
    for i in 0..3 {
        for j in 0..4 {
            let e: f64 = (0..6).map(|b| up.get(b, i) * x.get(b, j)).sum();
            assert!((g.layers[0].weights.get(i, j) - e).abs() < 1e-14);
        }
        let eb: f64 = (0..6).map(|b| up.get(b, i)).sum();
        assert!((g.layers[0].bias[i] - eb).abs() < 1e-14);
    }
    for b in 0..6 {
        for j in 0..4 {
            let e: f64 = (0..3)
                .map(|i| up.get(b, i) * net.layers()[0].weights.get(i, j))
                .sum();
            assert!((dx.get(b, j) - e).abs() < 1e-14);
        }
    }
    let zero = Matrix::zeros(6, 3);
    assert_eq!(net.backward(&cache, &zero).unwrap().0.max_abs(), 0.0);
}

/// Scalar Adam written out from the update formulas.
fn adam_oracle(p0: f64, grads: &[f64], c: &AdamConfig) -> f64 {
    let (mut p, mut m, mut v) = (p0, 0.0, 0.0);
    for (t, &g) in grads.iter().enumerate() {
        let t = (t + 1) as i32;
        p -= c.lr * c.weight_decay * p;
        m = c.beta1 * m + (1.0 - c.beta1) * g;
        v = c.beta2 * v + (1.0 - c.beta2) * g * g;
        let mh = m / (1.0 - c.beta1.powi(t));
        let vh = v / (1.0 - c.beta2.powi(t));
        p -= c.lr * mh / (vh.sqrt() + c.epsilon);
    }
    p
}

#[test]
fn adam_matches_scalar_oracle() {
    let cfg = AdamConfig {
        lr: 0.05,
        weight_decay: 0.1,
        ..AdamConfig::default()
    };
    let w = Matrix::from_rows(&[vec![0.7, -0.3]]).unwrap();
    let mut net = Network::new(vec![AffineLayer::new(
        w,
        vec![0.2],
        None,
        Activation::Identity,
    )
    .unwrap()])
    .unwrap();
    let mut state = AdamState::new(&net, cfg);
    let seq = [
        [0.5, -1.0, 2.0],
        [0.1, 0.0, -3.0],
        [-0.2, 4.0, 1e-3],
        [1.0, 1.0, 1.0],
    ];
    for g in &seq {
        let mut grads = Gradients::zeros_like(&net);
        grads.layers[0].weights.set(0, 0, g[0]);
        grads.layers[0].weights.set(0, 1, g[1]);
        grads.layers[0].bias[0] = g[2];
        adam_step(&mut state, &mut net, &grads).unwrap();
    }
    let col = |k: usize| seq.iter().map(|g| g[k]).collect::<Vec<_>>();
    let l = &net.layers()[0];
    assert!((l.weights.get(0, 0) - adam_oracle(0.7, &col(0), &cfg)).abs() < 1e-15);
    assert!((l.weights.get(0, 1) - adam_oracle(-0.3, &col(1), &cfg)).abs() < 1e-15);
    assert!((l.bias[0] - adam_oracle(0.2, &col(2), &cfg)).abs() < 1e-15);
    assert_eq!(state.step_count(), 4);
}

fn masked_net(seed: u64) -> Network {
    let mut r = rng::from_seed(seed);
    let fine = line(&UniformGrid1D::new(5.0, 40).unwrap());
    let coarse = line(&UniformGrid1D::new(5.0, 10).unwrap());
    Network::new(vec![
        AffineLayer::mesh_informed(&fine, &coarse, 0.6, Activation::Tanh, &mut r).unwrap(),
        AffineLayer::dense(10, 3, Activation::LeakyRelu(0.1), &mut r).unwrap(),
    ])
    .unwrap()
}

fn outside_mask_is_zero(net: &Network) -> bool {
    net.layers().iter().all(|l| match &l.mask {
        Some(m) => (0..l.outputs())
            .all(|i| (0..l.inputs()).all(|j| m.get(i, j) || l.weights.get(i, j) == 0.0)),
        None => true,
    })
}

#[test]
fn masked_weights_stay_zero_through_training_and_checkpoints() {
    let mut net = masked_net(9);
    assert!(outside_mask_is_zero(&net));
    let mut state = AdamState::new(
        &net,
        AdamConfig {
            weight_decay: 1e-2,
            ..Default::default()
        },
    );
    let mut r = rng::from_seed(10);
    for _ in 0..50 {
        let x = random_matrix(8, 40, 2.0, &mut r);
        let (y, cache) = net.forward(&x).unwrap();
        let (g, _) = net.backward(&cache, &y).unwrap();
        adam_step(&mut state, &mut net, &g).unwrap();
        assert!(outside_mask_is_zero(&net));
    }
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("net.ldlm");
    save_network(&net, &path).unwrap();
    let back = load_network(&path).unwrap();
    assert_eq!(back, net);
    assert!(outside_mask_is_zero(&back));

    std::fs::write(dir.path().join("junk.ldlm"), b"LDLM\x02\0\0\0").unwrap();
    assert!(load_network(&dir.path().join("junk.ldlm")).is_err());
    assert!(load_network(&dir.path().join("missing.ldlm")).is_err());
}

#[test]
fn parameter_only_backward_matches_full_backward() {
    let net = masked_net(6);
    let x = random_matrix(5, 40, 2.0, &mut rng::from_seed(2));
    let (y, cache) = net.forward(&x).unwrap();
    let (full, dx) = net.backward(&cache, &y).unwrap();
    assert_eq!(dx.cols(), 40);
    assert_eq!(net.backward_params(&cache, &y).unwrap(), full);
}

#[test]
fn forward_is_bit_reproducible() {
    let net = masked_net(4);
    let x = random_matrix(16, 40, 2.0, &mut rng::from_seed(1));
    let a = net.predict(&x).unwrap();
    let b = net.clone().predict(&x).unwrap();
    assert_eq!(a.as_slice(), b.as_slice());
    // rows are independent of batch composition
    let single = net.predict(&x.select_rows(&[3])).unwrap();
    assert_eq!(single.row(0), a.row(3));
}

#[test]
fn width_mismatches_are_rejected() {
    let mut r = rng::from_seed(0);
    let a = AffineLayer::dense(4, 3, Activation::Tanh, &mut r).unwrap();
    let b = AffineLayer::dense(2, 1, Activation::Tanh, &mut r).unwrap();
    assert!(Network::new(vec![a.clone(), b]).is_err());
    let net = Network::new(vec![a]).unwrap();
    assert!(net.predict(&Matrix::zeros(2, 5)).is_err());
    let bad_mask = Mask::from_fn(2, 2, |_, _| true);
    assert!(AffineLayer::new(
        Matrix::zeros(3, 4),
        vec![0.0; 3],
        Some(bad_mask),
        Activation::Tanh
    )
    .is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn soft_clamp_is_monotone(x in -5.0f64..5.0, d in 0.0f64..3.0) {
        let f = Activation::SoftClamp;
        prop_assert!(f.apply(x + d) >= f.apply(x));
    }

    #[test]
    fn soft_clamp_is_identity_on_band(x in 0.0f64..=0.5) {
        prop_assert!((Activation::SoftClamp.apply(x) - x).abs() <= 1e-16);
    }

    #[test]
    fn support_mask_is_monotone_in_radius(r in 0.0f64..1.0, dr in 0.0f64..0.5) {
        let a = line(&UniformGrid1D::new(2.0, 17).unwrap());
        let b = line(&UniformGrid1D::new(2.0, 9).unwrap());
        let small = build_support_mask(&b, &a, r).unwrap();
        let big = build_support_mask(&b, &a, r + dr).unwrap();
        for i in 0..9 {
            for j in 0..17 {
                prop_assert!(!small.get(i, j) || big.get(i, j));
            }
        }
    }
}
