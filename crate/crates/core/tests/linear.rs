use proptest::prelude::*;
use rand::Rng;

use qks::features::FeatureMatrix;
use qks::linear::{evaluate, loss_and_gradient, train, TrainOptions};
use qks::rng::{substream, Purpose};
use qks::Matrix;

fn noisy_problem(m: usize, d: usize, seed: u64) -> (Matrix, Vec<u8>) {
    let mut rng = substream(seed, Purpose::Scratch, 20, 0);
    let w: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let mut data = Vec::with_capacity(m * d);
    let mut y = Vec::with_capacity(m);
    for i in 0..m {
        let x: Vec<f64> = (0..d).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let margin: f64 = x.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>() + rng.gen_range(-0.5..0.5);
        // both classes guaranteed
        y.push(if i < 2 { i as u8 } else { u8::from(margin > 0.0) });
        data.extend(x);
    }
    (Matrix::from_vec(m, d, data), y)
}

fn bits(m: usize, d: usize, seed: u64) -> (FeatureMatrix, Vec<u8>) {
    let mut rng = substream(seed, Purpose::Scratch, 21, 0);
    let mut x = FeatureMatrix::zeros(m, d);
    let mut y = Vec::with_capacity(m);
    for i in 0..m {
        let mut score = 0i32;
        for j in 0..d {
            let b = rng.gen_bool(0.4);
            x.set(i, j, b);
            if b && j % 3 == 0 {
                score += 1;
            }
        }
        y.push(if i < 2 {
            i as u8
        } else {
            u8::from(score + rng.gen_range(-1..=1) > 1)
        });
    }
    (x, y)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10))]

    #[test]
    fn gradient_matches_central_differences(seed in 0u64..1000, lambda in 0.0..0.5f64) {
        let (x, y) = noisy_problem(40, 5, seed);
        let mut rng = substream(seed, Purpose::Scratch, 22, 0);
        let w: Vec<f64> = (0..5).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let b = rng.gen_range(-1.0..1.0);
        let (_, g) = loss_and_gradient(&x, &y, &w, b, lambda).unwrap();
        let h = 1e-5;
        for k in 0..=5 {
            let shifted = |delta: f64| {
                let mut w2 = w.clone();
                let mut b2 = b;
                if k < 5 { w2[k] += delta } else { b2 += delta }
                loss_and_gradient(&x, &y, &w2, b2, lambda).unwrap().0
            };
            let fd = (shifted(h) - shifted(-h)) / (2.0 * h);
            let rel = (fd - g[k]).abs() / g[k].abs().max(1e-3);
            prop_assert!(rel <= 1e-6, "component {}: analytic {} fd {}", k, g[k], fd);
        }
    }

    #[test]
    fn losses_never_increase(seed in 0u64..1000) {
        let (x, y) = noisy_problem(60, 4, seed);
        let (_, report) = train(&x, &y, &TrainOptions::default().with_lambda(1e-3)).unwrap();
        for pair in report.losses.windows(2) {
            prop_assert!(pair[1] <= pair[0], "{} then {}", pair[0], pair[1]);
        }
    }

    #[test]
    fn scaling_features_scales_weights(seed in 0u64..1000, c in 0.2..5.0f64) {
        // overlapping classes keep the unregularised optimum finite
        let (x, y) = noisy_problem(80, 3, seed);
        let opts = TrainOptions { tol: 1e-10, ..TrainOptions::default().with_lambda(0.0) };
        let (m1, _) = train(&x, &y, &opts).unwrap();
        let (mc, _) = train(&x.scaled(c), &y, &opts).unwrap();
        for (a, b) in m1.weights.iter().zip(&mc.weights) {
            prop_assert!((a / c - b).abs() <= 1e-5 * (1.0 + a.abs()), "{} / {} vs {}", a, c, b);
        }
        let margins_agree = (0..x.rows()).filter(|&i| {
            let d1 = m1.decision(&x, i);
            d1.abs() < 1e-6 || (d1 > 0.0) == (mc.decision(&x.scaled(c), i) > 0.0)
        }).count();
        prop_assert_eq!(margins_agree, x.rows());
    }

    #[test]
    fn packed_and_dense_agree(seed in 0u64..1000, d in 1usize..150) {
        let (x, y) = bits(50, d, seed);
        let dense = x.to_dense();
        let opts = TrainOptions::default();
        let (mp, rp) = train(&x, &y, &opts).unwrap();
        let (md, rd) = train(&dense, &y, &opts).unwrap();
        prop_assert_eq!(&mp, &md);
        prop_assert_eq!(rp.iterations, rd.iterations);
        prop_assert_eq!(mp.predict(&x), md.predict(&dense));
    }
}

#[test]
fn separable_clusters_fit_perfectly() {
    let mut rng = substream(0, Purpose::Scratch, 23, 0);
    let rows: Vec<[f64; 1]> = (0..100)
        .map(|i| [if i % 2 == 0 { -3.0 } else { 3.0 } + rng.gen_range(-0.5..0.5)])
        .collect();
    let y: Vec<u8> = (0..100).map(|i| (i % 2) as u8).collect();
    let x = Matrix::from_rows(&rows);
    let (model, _) = train(&x, &y, &TrainOptions::default().with_lambda(1e-4)).unwrap();
    assert_eq!(evaluate(&model, &x, &y), 0.0);
}

#[test]
fn training_is_repeatable() {
    let (x, y) = bits(300, 200, 5);
    let a = train(&x, &y, &TrainOptions::default()).unwrap().0;
    let b = train(&x, &y, &TrainOptions::default()).unwrap().0;
    assert_eq!(a, b);
}
