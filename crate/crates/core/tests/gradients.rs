use adr_planner::learner::{backward, loss, td_target, Adam};
use adr_planner::{Experience, QNetwork};
use rand::{Rng, SeedableRng};
use rand_pcg::Pcg64;

fn random_batch(
    rng: &mut Pcg64,
    inputs: usize,
    outputs: usize,
    size: usize,
) -> (Vec<Experience>, Vec<f64>) {
    let batch = (0..size)
        .map(|_| Experience {
            state: (0..inputs).map(|_| rng.random_range(-1.0..1.0)).collect(),
            action: rng.random_range(0..outputs),
            reward: rng.random_range(0.0..10.0),
            next_state: vec![0.0; inputs],
            done: true,
        })
        .collect();
    let targets = (0..size).map(|_| rng.random_range(-2.0..2.0)).collect();
    (batch, targets)
}

#[test]
fn backprop_matches_central_differences() {
    let h = 1e-5;
    let mut rng = Pcg64::seed_from_u64(2024);
    let mut worst: f64 = 0.0;
    for trial in 0..10 {
        let inputs = rng.random_range(2..6);
        let outputs = rng.random_range(1..5);
        let hidden: Vec<usize> = (0..rng.random_range(1..3))
            .map(|_| rng.random_range(2..7))
            .collect();
        let mut net = QNetwork::new(inputs, &hidden, outputs, &mut rng);
        for layer in net.layers_mut() {
            layer
                .biases
                .iter_mut()
                .for_each(|b| *b = rng.random_range(-0.5..0.5));
        }
        let (batch, targets) = random_batch(&mut rng, inputs, outputs, 8);
        let refs: Vec<&Experience> = batch.iter().collect();
        let (_, grads) = backward(&net, &refs, &targets).unwrap();

        let analytic: Vec<f64> = grads.params().copied().collect();
        for (p, g) in analytic.iter().enumerate() {
            let mut plus = net.clone();
            *plus.params_mut().nth(p).unwrap() += h;
            let mut minus = net.clone();
            *minus.params_mut().nth(p).unwrap() -= h;
            let numeric = (loss(&refs, &plus, &targets).unwrap()
                - loss(&refs, &minus, &targets).unwrap())
                / (2.0 * h);
            let rel = (g - numeric).abs() / g.abs().max(numeric.abs()).max(1e-6);
            worst = worst.max(rel);
            assert!(rel < 1e-4, "trial {trial}, param {p}: {g} vs {numeric}");
        }
    }
    assert!(worst < 1e-4);
}

#[test]
fn adam_decreases_loss_on_a_frozen_batch() {
    let mut rng = Pcg64::seed_from_u64(7);
    let mut net = QNetwork::new(6, &[16, 16], 4, &mut rng);
    let (batch, targets) = random_batch(&mut rng, 6, 4, 32);
    let refs: Vec<&Experience> = batch.iter().collect();
    let mut adam = Adam::new(1e-3, &net);
    let mut previous = f64::INFINITY;
    for step in 0..100 {
        let (l, grads) = backward(&net, &refs, &targets).unwrap();
        assert!(l < previous, "loss rose at step {step}: {previous} -> {l}");
        previous = l;
        adam.step(&mut net, &grads);
    }
}

#[test]
fn terminal_targets_ignore_the_target_network() {
    let mut rng = Pcg64::seed_from_u64(3);
    let target = QNetwork::new(3, &[5], 2, &mut rng);
    for _ in 0..200 {
        let e = Experience {
            state: vec![0.0; 3],
            action: 0,
            reward: rng.random_range(-5.0..5.0),
            next_state: (0..3).map(|_| rng.random_range(-1.0..1.0)).collect(),
            done: rng.random_bool(0.5),
        };
        if e.done {
            assert_eq!(td_target(&e, &target, 0.95).unwrap(), e.reward);
        }
        assert_eq!(td_target(&e, &target, 0.0).unwrap(), e.reward);
    }
}
