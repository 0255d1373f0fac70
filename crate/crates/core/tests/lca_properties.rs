use devlab::lca::{cosine, norm, rates, top_k_compete, MatchSchedule, NeuronState};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn active(weight: Vec<f64>) -> NeuronState {
    let mut n = NeuronState::virgin(weight);
    n.active = true;
    n
}

/// Top eigenvector of a symmetric 2x2 matrix by power iteration.
fn power_iteration(c: [[f64; 2]; 2]) -> [f64; 2] {
    let mut v = [1.0, 1.0];
    for _ in 0..500 {
        let w = [
            c[0][0] * v[0] + c[0][1] * v[1],
            c[1][0] * v[0] + c[1][1] * v[1],
        ];
        let n = (w[0] * w[0] + w[1] * w[1]).sqrt();
        v = [w[0] / n, w[1] / n];
    }
    v
}

#[test]
fn converges_to_first_principal_axis() {
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    let sx = Normal::new(0.0, 2.0).unwrap();
    let sy = Normal::new(0.0, 1.0).unwrap();
    let samples: Vec<[f64; 2]> = (0..10_000)
        .map(|_| [sx.sample(&mut rng), sy.sample(&mut rng)])
        .collect();

    // sample covariance
    let n = samples.len() as f64;
    let mut c = [[0.0; 2]; 2];
    for s in &samples {
        for i in 0..2 {
            for j in 0..2 {
                c[i][j] += s[i] * s[j] / n;
            }
        }
    }
    let axis = power_iteration(c);

    let mut neuron = active(vec![1.0, 1.0]);
    for s in &samples {
        neuron.learn_principal(s).unwrap();
    }
    let c = cosine(&neuron.weight, &axis).unwrap().abs();
    assert!(c >= 0.99, "cosine to principal axis {c}");
}

#[test]
fn batch_mean_equivalence() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let d = Normal::new(0.5, 3.0).unwrap();
    let inputs: Vec<Vec<f64>> = (0..1000)
        .map(|_| (0..4).map(|_| d.sample(&mut rng)).collect())
        .collect();
    let mut neuron = active(vec![9.0, -9.0, 9.0, -9.0]);
    for (k, x) in inputs.iter().enumerate() {
        neuron.learn(x, 1.0).unwrap();
        let n = (k + 1) as f64;
        for i in 0..4 {
            let mean: f64 = inputs[..=k].iter().map(|v| v[i]).sum::<f64>() / n;
            let rel = (neuron.weight[i] - mean).abs() / mean.abs().max(1.0);
            assert!(rel <= 1e-10, "step {k} component {i}: {rel}");
        }
    }
}

#[test]
fn match_threshold_limit() {
    let s = MatchSchedule::default();
    let m = s.threshold(100 * 1000);
    assert!((1.0 - s.delta - m).abs() <= 1e-43);
    assert!(m <= 1.0 - s.delta);
}

proptest! {
    #[test]
    fn candid_rates_sum_to_one(a in 1u64..10_000_000) {
        let (w1, w2) = rates(a);
        prop_assert_eq!(w1 + w2, 1.0);
    }

    #[test]
    fn unit_inputs_keep_norm_bounded(
        seed in any::<u64>(),
        steps in 1usize..400,
        dim in 1usize..6,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = Normal::new(0.0, 1.0).unwrap();
        let mut neuron = active(vec![0.0; dim]);
        for _ in 0..steps {
            let mut x: Vec<f64> = (0..dim).map(|_| g.sample(&mut rng)).collect();
            let n = norm(&x);
            if n == 0.0 { continue; }
            x.iter_mut().for_each(|v| *v /= n);
            neuron.learn(&x, 1.0).unwrap();
            prop_assert!(norm(&neuron.weight) <= 1.0 + 1e-9);
        }
    }

    #[test]
    fn first_firing_memorizes(
        w in prop::collection::vec(-5.0f64..5.0, 3),
        x in prop::collection::vec(-5.0f64..5.0, 3),
        r in 0.0f64..=1.0,
    ) {
        let n = active(w).lca_update(&x, r).unwrap();
        prop_assert_eq!(n.firing_age, 1);
        for (a, b) in n.weight.iter().zip(&x) {
            prop_assert_eq!(*a, r * b);
        }
    }

    #[test]
    fn trajectory_independent_of_initial_weight(
        w1 in prop::collection::vec(-5.0f64..5.0, 3),
        w2 in prop::collection::vec(-5.0f64..5.0, 3),
        xs in prop::collection::vec(prop::collection::vec(-5.0f64..5.0, 3), 1..30),
    ) {
        let mut a = active(w1);
        let mut b = active(w2);
        for x in &xs {
            a.learn(x, 1.0).unwrap();
            b.learn(x, 1.0).unwrap();
            prop_assert_eq!(&a, &b);
        }
    }

    #[test]
    fn schedule_increasing_and_bounded(t in 0u64..1_000_000) {
        let s = MatchSchedule::default();
        let m0 = s.threshold(t);
        let m1 = s.threshold(t + 1);
        prop_assert!(m0 >= 0.0);
        prop_assert!(m0 <= 1.0 - s.delta);
        prop_assert!(m1 >= m0);
        if t < 20_000 {
            prop_assert!(m1 > m0);
        }
    }

    #[test]
    fn top_k_winners_are_the_largest(
        pre in prop::collection::vec(-1.0f64..1.0, 1..20),
        k in 1usize..25,
    ) {
        let winners = top_k_compete(&pre, k).unwrap();
        prop_assert_eq!(winners.len(), k.min(pre.len()));
        let lowest = winners.iter().map(|w| pre[w.index]).fold(f64::INFINITY, f64::min);
        for (i, &p) in pre.iter().enumerate() {
            if !winners.iter().any(|w| w.index == i) {
                prop_assert!(p <= lowest);
            }
        }
        prop_assert_eq!(winners[0].response, 1.0);
    }
}
