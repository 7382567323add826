mod common;

use rand::Rng;
use stgames_core::learning::{run_dynamics, LearnerKind, LearnerSpec, RateSchedule, SignalSchedule};
use stgames_core::resilience::{
    average_consensus_step, run_adversarial_consensus, run_adversarial_learning, update_trust, AdversaryModel,
    AttackKind, ConsensusScenario, ResilienceConfig, TrustMatrix,
};
use stgames_core::rng::{seeded, SimRng};

use common::random_game;

fn complete_scenario(rng: &mut SimRng, n: usize) -> ConsensusScenario {
    ConsensusScenario {
        initial: (0..n).map(|_| rng.random_range(0.0..1.0)).collect(),
        neighbors: (0..n).map(|_| (0..n).collect()).collect(),
    }
}

fn injector(value: f64) -> AdversaryModel {
    AdversaryModel { compromised: vec![0], attack: AttackKind::ConstantInjection(value), window: (0, 1000) }
}

#[test]
fn trust_rows_stay_stochastic() {
    let mut rng = seeded(41);
    for _ in 0..10_000 {
        let n = rng.random_range(1..=6);
        let neighbors: Vec<Vec<usize>> = (0..n)
            .map(|i| {
                let mut nb: Vec<usize> = (0..n).filter(|&j| j == i || rng.random_bool(0.5)).collect();
                nb.sort_unstable();
                nb
            })
            .collect();
        let mut trust = TrustMatrix::uniform(neighbors.clone()).unwrap();
        for _ in 0..3 {
            let residuals: Vec<Vec<f64>> =
                (0..n).map(|_| (0..n).map(|_| rng.random_range(0.0..1.0f64).powi(2) * 1e3).collect()).collect();
            trust = update_trust(&trust, &residuals, rng.random_range(0.0..=1.0)).unwrap();
        }
        assert!(trust.max_row_error() <= 1e-12, "{:?}", trust.weights);
        for i in 0..n {
            for j in 0..n {
                let w = trust.weights[i][j];
                assert!(w >= 0.0 && w.is_finite());
                if !neighbors[i].contains(&j) {
                    assert_eq!(w, 0.0);
                }
            }
        }
    }
}

#[test]
fn trimming_keeps_honest_agents_in_the_hull() {
    let defense = ResilienceConfig { trim: 1, eta: 0.2, residual_scale: 1.0 };
    for seed in 0..20 {
        let scenario = complete_scenario(&mut seeded(seed), 7);
        let guarded = run_adversarial_consensus(&scenario, &injector(100.0), &defense, 60, seed).unwrap();
        assert_eq!(guarded.metrics.hull_exit, None, "seed {seed}");
        let naive = run_adversarial_consensus(&scenario, &injector(100.0), &ResilienceConfig::naive(), 60, seed).unwrap();
        assert!(naive.metrics.hull_exit.is_some(), "seed {seed}");
    }
}

#[test]
fn naive_damage_grows_with_magnitude() {
    for seed in 0..10 {
        let scenario = complete_scenario(&mut seeded(seed), 6);
        let dev: Vec<f64> = [1.0, 10.0, 100.0]
            .iter()
            .map(|&m| {
                run_adversarial_consensus(&scenario, &injector(m), &ResilienceConfig::naive(), 40, seed)
                    .unwrap()
                    .metrics
                    .max_deviation
            })
            .collect();
        assert!(dev[0] <= dev[1] && dev[1] <= dev[2], "{dev:?}");
    }
}

#[test]
fn without_an_adversary_runs_match_the_plain_algorithms() {
    for seed in 0..10 {
        let scenario = complete_scenario(&mut seeded(seed), 5);
        let run = run_adversarial_consensus(&scenario, &AdversaryModel::none(), &ResilienceConfig::naive(), 30, seed)
            .unwrap();
        let mut x = scenario.initial.clone();
        assert_eq!(run.values[0], x);
        for row in &run.values[1..] {
            x = average_consensus_step(&x, &scenario.neighbors);
            assert_eq!(row, &x);
        }
        assert_eq!(run.values, run.nominal);

        let g = random_game(&mut seeded(seed), &[2, 3], 1);
        let learners = vec![
            LearnerSpec::new(LearnerKind::SmoothedBestResponse)
                .with_rates(RateSchedule::Harmonic, RateSchedule::Constant(0.1)),
            LearnerSpec::new(LearnerKind::FictitiousPlay),
        ];
        let adv = run_adversarial_learning(&g, &learners, &AdversaryModel::none(), 300, seed).unwrap();
        let plain = run_dynamics(&g, &learners, 300, seed, &SignalSchedule::Constant(0)).unwrap();
        assert_eq!(adv.trace, plain);
        assert_eq!(adv.metrics.max_deviation, 0.0);
    }
}
