use proptest::prelude::*;
use rand::Rng;

use qks::ansatz::Ansatz;
use qks::encoding::{EncodingStructure, MachineConfig, QksMachine};
use qks::kernels::{closed_form_cnot2, closed_form_rxcz2, expected_inner, mc_kernel, SMatrix};
use qks::quil::CircuitTemplate;
use qks::rng::{substream, Purpose};
use qks::statevector::{exact_probabilities, StateVector};

fn machine(ansatz: Ansatz, sigma: f64, episodes: usize, seed: u64) -> QksMachine {
    let t = ansatz.template();
    let structure = match t.num_params() {
        1 => EncodingStructure::dense(2).unwrap(),
        _ => EncodingStructure::split(2).unwrap(),
    };
    QksMachine::sample(&t, structure, MachineConfig::new(sigma, episodes, seed)).unwrap()
}

fn points(n: usize, seed: u64) -> Vec<[f64; 2]> {
    let mut rng = substream(seed, Purpose::Scratch, 7, 0);
    (0..n)
        .map(|_| [rng.gen_range(-1.5..1.5), rng.gen_range(-1.5..1.5)])
        .collect()
}

#[test]
fn shot_pairs_agree_with_expected_inner() {
    // b_u · b_v from independent single shots, averaged, against p_uᵀ S p_v
    let t = Ansatz::Cnot2.template();
    let mut rng = substream(3, Purpose::Scratch, 0, 0);
    for _ in 0..5 {
        let tu = [rng.gen_range(0.0..6.3), rng.gen_range(0.0..6.3)];
        let tv = [rng.gen_range(0.0..6.3), rng.gen_range(0.0..6.3)];
        let mut su = StateVector::new(2).unwrap();
        let mut sv = StateVector::new(2).unwrap();
        su.run_template(&t, &tu).unwrap();
        sv.run_template(&t, &tv).unwrap();
        let n = 100_000;
        let (mut sum, mut sum2) = (0.0, 0.0);
        for _ in 0..n {
            let x = (su.sample_shot(&mut rng).0 & sv.sample_shot(&mut rng).0).count_ones() as f64;
            sum += x;
            sum2 += x * x;
        }
        let mean = sum / n as f64;
        let stderr = ((sum2 / n as f64 - mean * mean) / n as f64).sqrt();
        let pu = exact_probabilities(&t, &tu).unwrap();
        let pv = exact_probabilities(&t, &tv).unwrap();
        let exact = expected_inner(&pu, &pv);
        assert!((mean - exact).abs() <= 4.0 * stderr, "{mean} vs {exact} ± {stderr}");
        assert!((SMatrix::new(2).bilinear(&pu, &pv) - exact).abs() < 1e-14);
    }
}

#[test]
fn identity_kernel_is_exactly_zero() {
    let t = CircuitTemplate::parse("DEFCIRCUIT ID:\n").unwrap();
    let m = QksMachine::sample(
        &t,
        EncodingStructure::empty(2).unwrap(),
        MachineConfig::new(1.0, 500, 0),
    )
    .unwrap();
    let k = mc_kernel(&m, &[0.3, 0.1], &[-2.0, 1.0]).unwrap();
    assert_eq!(k.value, 0.0);
    assert_eq!(k.stderr, 0.0);
}

#[test]
fn cnot_diagonal_is_eleven_sixteenths() {
    let m = machine(Ansatz::Cnot2, 1.3, 20_000, 4);
    for u in points(4, 1) {
        let k = mc_kernel(&m, &u, &u).unwrap();
        assert!((k.value - 11.0 / 16.0).abs() <= 4.0 * k.stderr, "{k:?}");
    }
}

#[test]
fn cnot_matches_closed_form() {
    for (i, sigma) in [0.25, 1.0, 4.0].into_iter().enumerate() {
        let m = machine(Ansatz::Cnot2, sigma, 20_000, i as u64);
        let pts = points(8, 10 + i as u64);
        for pair in pts.chunks(2) {
            let (u, v) = (pair[0], pair[1]);
            let k = mc_kernel(&m, &u, &v).unwrap();
            let cf = closed_form_cnot2(&u, &v, sigma, &[0]);
            assert!(
                (k.value - cf).abs() <= 4.0 * k.stderr,
                "σ={sigma}: {} vs {cf} ± {}",
                k.value,
                k.stderr
            );
        }
    }
}

#[test]
fn literal_cz_matches_its_closed_form() {
    let m = machine(Ansatz::Rxcz2, 1.0, 20_000, 9);
    for pair in points(6, 2).chunks(2) {
        let k = mc_kernel(&m, &pair[0], &pair[1]).unwrap();
        let cf = closed_form_rxcz2(m.structure(), &pair[0], &pair[1], 1.0);
        assert!((k.value - cf).abs() <= 4.0 * k.stderr);
    }
}

#[test]
fn cz_kernel_is_constant_half() {
    for sigma in [0.25, 1.0, 4.0] {
        let m = machine(Ansatz::Cz2, sigma, 5_000, 1);
        for pair in points(6, 3).chunks(2) {
            let k = mc_kernel(&m, &pair[0], &pair[1]).unwrap();
            assert!((k.value - 0.5).abs() <= 4.0 * k.stderr + 1e-12, "{k:?}");
        }
    }
}

#[test]
fn mc_kernel_is_symmetric_and_bounded() {
    for a in [Ansatz::Cnot2, Ansatz::Rxcz2, Ansatz::Rx1] {
        let m = machine(a, 0.8, 3_000, 2);
        let q = m.num_qubits() as f64;
        for pair in points(6, 4).chunks(2) {
            let uv = mc_kernel(&m, &pair[0], &pair[1]).unwrap();
            let vu = mc_kernel(&m, &pair[1], &pair[0]).unwrap();
            assert_eq!(uv, vu);
            assert!((0.0..=q).contains(&uv.value));
        }
    }
}

/// Cholesky of `a + eps·I`; succeeds iff the smallest eigenvalue exceeds -eps.
fn cholesky_ok(a: &[Vec<f64>], eps: f64) -> bool {
    let n = a.len();
    let mut l = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..=i {
            let s: f64 = (0..j).map(|k| l[i][k] * l[j][k]).sum();
            if i == j {
                let d = a[i][i] + eps - s;
                if d <= 0.0 {
                    return false;
                }
                l[i][i] = d.sqrt();
            } else {
                l[i][j] = (a[i][j] - s) / l[j][j];
            }
        }
    }
    true
}

proptest! {
    #[test]
    fn closed_form_bounds(u in prop::array::uniform2(-5.0..5.0f64), v in prop::array::uniform2(-5.0..5.0f64), sigma in 0.01..10.0f64) {
        let k = closed_form_cnot2(&u, &v, sigma, &[0]);
        // strictly above 1/2 in exact arithmetic; far pairs underflow to it
        prop_assert!((0.5..=11.0 / 16.0).contains(&k));
    }

    #[test]
    fn closed_form_gram_is_psd(pts in prop::collection::vec(prop::array::uniform2(-3.0..3.0f64), 1..=8), sigma in 0.1..5.0f64) {
        let gram: Vec<Vec<f64>> = pts
            .iter()
            .map(|u| pts.iter().map(|v| closed_form_cnot2(u, v, sigma, &[0])).collect())
            .collect();
        prop_assert!(cholesky_ok(&gram, 1e-9));
    }
}
