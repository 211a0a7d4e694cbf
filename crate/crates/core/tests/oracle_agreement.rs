use adr_planner::environment::CostMatrix;
use adr_planner::oracle::{self, enumerate_sequences, evaluate_sequence, optimal_min_dv};
use adr_planner::{
    data, Budgets, CloudRanges, CostProvider, DebrisCatalog, Environment, HighThrust,
    MissionConfig, OrbitalElements, StartPolicy, TerminationCause,
};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_pcg::Pcg64;

fn falling_factorial(n: usize, k: usize) -> usize {
    (n - k + 1..=n).product()
}

fn cloud(n: usize, seed: u64) -> DebrisCatalog {
    data::generate_cloud(n, seed, &CloudRanges::default()).unwrap()
}

fn parking() -> StartPolicy {
    StartPolicy::ParkingOrbit(OrbitalElements::from_degrees(6978.0, 85.0, 0.0, 0.0).unwrap())
}

#[test]
fn sequence_counts_follow_the_falling_factorial() {
    for n in 1..=8 {
        for k in 1..=n {
            let count = enumerate_sequences(n, k).unwrap().count();
            assert_eq!(count, falling_factorial(n, k), "n = {n}, k = {k}");
        }
    }
}

#[test]
fn sequences_are_distinct_and_lexicographic() {
    let all: Vec<Vec<usize>> = enumerate_sequences(6, 3).unwrap().collect();
    assert!(all.windows(2).all(|w| w[0] < w[1]));
    for s in &all {
        let mut sorted = s.clone();
        sorted.sort_unstable();
        sorted.dedup();
        assert_eq!(sorted.len(), 3);
    }
}

#[test]
fn min_dv_is_below_sampled_sequences() {
    let costs = HighThrust::default();
    let catalog = cloud(8, 3);
    for start in [StartPolicy::FreeFirstPick, parking()] {
        let best = optimal_min_dv(&catalog, 5, &costs, &start).unwrap();
        let mut rng = Pcg64::seed_from_u64(99);
        let mut ids: Vec<usize> = (0..8).collect();
        for _ in 0..1000 {
            ids.shuffle(&mut rng);
            let seq = &ids[..5];
            let eval = evaluate_sequence(seq, &catalog, &costs, &start).unwrap();
            assert!(best.dv_optimal <= eval.total_dv, "{seq:?}");
        }
        let witness = evaluate_sequence(&best.sequence, &catalog, &costs, &start).unwrap();
        assert_eq!(witness.total_dv, best.dv_optimal);
    }
}

/// Longest feasible sequence by level-wise expansion over every prefix,
/// pricing legs directly through the cost model.
fn bfs_longest(catalog: &DebrisCatalog, budgets: Budgets, start: &StartPolicy) -> usize {
    let costs = HighThrust::default();
    let first = |to: usize| match start {
        StartPolicy::FreeFirstPick => (0.0, 0.0),
        StartPolicy::ParkingOrbit(p) => {
            let c = costs.cost(p, catalog.elements(to)).unwrap();
            (c.delta_v, c.delta_t)
        }
    };
    let mut level: Vec<(Vec<usize>, f64, f64)> = (0..catalog.len())
        .map(|to| {
            let (dv, dt) = first(to);
            (vec![to], dv, dt)
        })
        .filter(|(_, dv, dt)| *dv <= budgets.delta_v_max && *dt <= budgets.delta_t_max)
        .collect();
    let mut longest = 0;
    while !level.is_empty() {
        longest = level[0].0.len();
        let mut next = Vec::new();
        for (seq, dv, dt) in &level {
            let here = *seq.last().unwrap();
            for to in (0..catalog.len()).filter(|t| !seq.contains(t)) {
                let c = costs
                    .cost(catalog.elements(here), catalog.elements(to))
                    .unwrap();
                let (dv2, dt2) = (dv + c.delta_v, dt + c.delta_t);
                if dv2 <= budgets.delta_v_max && dt2 <= budgets.delta_t_max {
                    let mut s = seq.clone();
                    s.push(to);
                    next.push((s, dv2, dt2));
                }
            }
        }
        level = next;
    }
    longest
}

fn random_budgets(rng: &mut Pcg64) -> Budgets {
    Budgets {
        delta_v_max: rng.random_range(0.02..0.5),
        delta_t_max: rng.random_range(0.2..4.0) * 86_400.0,
    }
}

#[test]
fn full_depth_matches_breadth_first_enumeration() {
    let costs = HighThrust::default();
    let mut rng = Pcg64::seed_from_u64(5);
    for trial in 0..30u64 {
        let n = rng.random_range(1..=6);
        let catalog = cloud(n, 100 + trial);
        let budgets = random_budgets(&mut rng);
        let start = if trial % 3 == 0 {
            parking()
        } else {
            StartPolicy::FreeFirstPick
        };
        let res = oracle::full_depth_best_reward(&catalog, budgets, &costs, &start).unwrap();
        let expected = bfs_longest(&catalog, budgets, &start);
        assert_eq!(res.sequence.len(), expected, "trial {trial}");
        assert_eq!(res.best_reward, expected as f64);
    }
}

#[test]
fn replaying_witnesses_reproduces_oracle_totals() {
    let costs = HighThrust::default();
    let mut rng = Pcg64::seed_from_u64(11);
    for trial in 0..20u64 {
        let n = rng.random_range(2..=6);
        let catalog = cloud(n, 500 + trial);
        let budgets = random_budgets(&mut rng);
        let start = if trial % 2 == 0 {
            parking()
        } else {
            StartPolicy::FreeFirstPick
        };
        let res = oracle::full_depth_best_reward(&catalog, budgets, &costs, &start).unwrap();
        let cfg = MissionConfig {
            n_debris: n,
            delta_v_max: budgets.delta_v_max,
            delta_t_max: budgets.delta_t_max,
            risk_threshold: 0.0,
            start_policy: start,
            ..MissionConfig::default()
        };
        let mut env = Environment::new(cfg, catalog.clone(), &costs, trial).unwrap();
        let mut reward = 0.0;
        for (pos, &a) in res.sequence.iter().enumerate() {
            let out = env.step(a).unwrap();
            assert_eq!(out.termination_cause, TerminationCause::None);
            assert_eq!(out.terminal, pos + 1 == n, "early stop in trial {trial}");
            reward += out.reward;
        }
        assert_eq!(env.state().dv_used, res.total_dv);
        assert_eq!(env.state().dt_used, res.total_dt);
        assert_eq!(reward, res.best_reward);
    }
}

#[test]
fn min_dv_witness_fits_its_own_budget() {
    let costs = HighThrust::default();
    let catalog = cloud(7, 21);
    let start = StartPolicy::FreeFirstPick;
    let best = optimal_min_dv(&catalog, 4, &costs, &start).unwrap();
    let matrix = CostMatrix::build(&catalog, &start, &costs).unwrap();
    let budgets = Budgets {
        delta_v_max: best.dv_optimal,
        delta_t_max: 1e12,
    };
    let full = oracle::full_depth_with(&matrix, budgets).unwrap();
    assert!(full.sequence.len() >= 4);
    let halved = Budgets {
        delta_v_max: best.dv_optimal / 2.0,
        ..budgets
    };
    assert!(
        oracle::full_depth_with(&matrix, halved)
            .unwrap()
            .sequence
            .len()
            < 4
    );
}

#[test]
fn full_depth_refuses_large_catalogs() {
    let catalog = cloud(oracle::FULL_DEPTH_MAX_N + 1, 0);
    let budgets = Budgets {
        delta_v_max: 1.0,
        delta_t_max: 1e6,
    };
    let res = oracle::full_depth_best_reward(
        &catalog,
        budgets,
        &HighThrust::default(),
        &StartPolicy::FreeFirstPick,
    );
    assert!(res.is_err());
}
