//! Property-based invariants over random seeds and dimensions.

use gpt_kit::choi::{channel_of, choi_of};
use gpt_kit::framework::{apply, mix, operational_norm_state, pair, tensor_state};
use gpt_kit::linalg::{self, max_abs, max_abs_diff, random_kraus};
use gpt_kit::models::{ClassicalModel, Model, QuantumModel, TheoryModel};
use gpt_kit::reconstruct::{fixed_representation, represent, Gauge};
use gpt_kit::structure::{
    computational_face, effect_of, maximal_set, orthogonal_face, same_face, spectral_decompose,
    superposition_state,
};
use proptest::prelude::*;

fn model(quantum: bool, d: usize) -> Model {
    if quantum {
        Model::Quantum(QuantumModel::new(d))
    } else {
        Model::Classical(ClassicalModel::new(d))
    }
}

fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn tensor_product_is_associative(seed in any::<u64>(), d in 2usize..4, quantum in any::<bool>()) {
        let m = model(quantum, d);
        let mut r = linalg::rng(seed);
        let (a, b, c) = (m.sample_pure_state(&mut r), m.sample_pure_state(&mut r), m.sample_pure_state(&mut r));
        let left = tensor_state(&tensor_state(&a, &b).unwrap(), &c).unwrap();
        let right = tensor_state(&a, &tensor_state(&b, &c).unwrap()).unwrap();
        prop_assert!(max_abs_diff(&left.coords, &right.coords) <= 1e-15);
    }

    #[test]
    fn pairings_are_probabilities(seed in any::<u64>(), d in 2usize..5, quantum in any::<bool>()) {
        let m = model(quantum, d);
        let mut r = linalg::rng(seed);
        let rho = m.sample_pure_state(&mut r);
        let e = m.det_effect();
        prop_assert!((pair(&e, &rho).unwrap() - 1.0).abs() < 1e-12);
        let set = maximal_set(&m).unwrap();
        let total: f64 = set.effects.iter().map(|a| pair(a, &rho).unwrap()).sum();
        prop_assert!((total - 1.0).abs() < 1e-12);
        for a in &set.effects {
            let p = pair(a, &rho).unwrap();
            prop_assert!((-1e-12..=1.0 + 1e-12).contains(&p));
        }
    }

    #[test]
    fn channels_keep_states_normalised(seed in any::<u64>(), d in 2usize..4, n in 1usize..4) {
        let q = QuantumModel::new(d);
        let mut r = linalg::rng(seed);
        let t = q.kraus_map(&q, &random_kraus(&mut r, d, d, n));
        let rho = q.sample_mixed_state(&mut r, d);
        let out = apply(&t, &rho).unwrap();
        prop_assert!(out.is_normalized(1e-12));
        prop_assert!(q.contains_state(&out.coords, 1e-10));
        prop_assert!(t.channel_residual() < 1e-12);
    }

    #[test]
    fn choi_round_trip(seed in any::<u64>(), d in 2usize..4, n in 1usize..4) {
        let q = QuantumModel::new(d);
        let mut r = linalg::rng(seed);
        let t = q.kraus_map(&q, &random_kraus(&mut r, d, d, n));
        let back = channel_of(&choi_of(&t).unwrap()).unwrap();
        prop_assert!(linalg::max_abs_real(&(&back.matrix - &t.matrix)) < 1e-10);
    }

    #[test]
    fn operational_norm_is_a_norm(seed in any::<u64>(), d in 2usize..4, quantum in any::<bool>()) {
        let m = model(quantum, d);
        let mut r = linalg::rng(seed);
        let (a, b, c) = (m.sample_pure_state(&mut r), m.sample_pure_state(&mut r), m.sample_pure_state(&mut r));
        let ab = operational_norm_state(&m, &sub(&a.coords, &b.coords)).unwrap();
        let ba = operational_norm_state(&m, &sub(&b.coords, &a.coords)).unwrap();
        let bc = operational_norm_state(&m, &sub(&b.coords, &c.coords)).unwrap();
        let ac = operational_norm_state(&m, &sub(&a.coords, &c.coords)).unwrap();
        prop_assert!((ab - ba).abs() < 1e-12);
        prop_assert!(ac <= ab + bc + 1e-12);
        prop_assert!(ab <= 2.0 + 1e-12);
    }

    #[test]
    fn spectral_weights_are_sorted_probabilities(seed in any::<u64>(), d in 2usize..5, rank in 1usize..5) {
        let m = Model::Quantum(QuantumModel::new(d));
        let mut r = linalg::rng(seed);
        let rho = m.as_quantum().unwrap().sample_mixed_state(&mut r, rank);
        let dec = spectral_decompose(&m, &rho).unwrap();
        prop_assert!(dec.probs.windows(2).all(|w| w[0] >= w[1] - 1e-15));
        prop_assert!((dec.probs.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(dec.reconstruct().distance(&rho) < 1e-10);
    }

    #[test]
    fn superposition_meets_its_probabilities(seed in any::<u64>(), d in 2usize..5) {
        let m = Model::Quantum(QuantumModel::new(d));
        let mut r = linalg::rng(seed);
        let p = linalg::random_probabilities(&mut r, d);
        let set = maximal_set(&m).unwrap();
        let phi = superposition_state(&m, &p, &set).unwrap();
        prop_assert!(m.is_pure(&phi, 1e-9));
        for (a, pi) in set.effects.iter().zip(&p) {
            prop_assert!((pair(a, &phi).unwrap() - pi).abs() < 1e-10);
        }
    }

    #[test]
    fn orthogonal_face_is_the_complement(mask in 1u32..15, quantum in any::<bool>()) {
        let m = model(quantum, 4);
        let inside: Vec<usize> = (0..4).filter(|i| mask >> i & 1 == 1).collect();
        let outside: Vec<usize> = (0..4).filter(|i| mask >> i & 1 == 0).collect();
        let f = computational_face(&m, &inside).unwrap();
        let perp = orthogonal_face(&m, &f).unwrap();
        prop_assert!(same_face(&perp, &computational_face(&m, &outside).unwrap(), 1e-12));
        let sum: Vec<f64> = effect_of(&m, &f).unwrap().coords.iter()
            .zip(&effect_of(&m, &perp).unwrap().coords)
            .map(|(x, y)| x + y)
            .collect();
        prop_assert!(max_abs_diff(&sum, m.system().det_coords()) < 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn representation_is_linear_and_invertible(seed in any::<u64>(), d in 2usize..5, w in 0.0f64..1.0) {
        let fix = fixed_representation(d, Gauge::Seeded(seed)).unwrap();
        let m = Model::Quantum(QuantumModel::new(d));
        let mut r = linalg::rng(seed ^ 0x5eed);
        let (a, b) = (m.sample_pure_state(&mut r), m.sample_pure_state(&mut r));
        let mixed = mix(&[(w, &a), (1.0 - w, &b)]).unwrap();
        let lhs = represent(&mixed, &fix.rep).unwrap();
        let rhs = represent(&a, &fix.rep).unwrap() * linalg::c(w, 0.0)
            + represent(&b, &fix.rep).unwrap() * linalg::c(1.0 - w, 0.0);
        prop_assert!(max_abs(&(lhs - &rhs)) < 1e-12);
        let back = fix.rep.unrepresent(&rhs).unwrap();
        prop_assert!(max_abs_diff(&back, &mixed.coords) < 1e-10);
    }
}
