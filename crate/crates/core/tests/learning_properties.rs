mod common;

use proptest::prelude::*;
use rand::Rng;
use stgames_core::game::{enumerate_pure_nash, ActionProfile, StrategicGame};
use stgames_core::learning::{
    best_response_path, diagnostics_with_stride, run_dynamics, step_policy, LearnerKind, LearnerSpec,
    RateSchedule, SignalSchedule,
};
use stgames_core::rng::seeded;
use stgames_core::templates;

use common::{labels, random_game};

fn on_simplex(p: &[f64]) -> bool {
    p.iter().all(|&x| x >= 0.0) && (p.iter().sum::<f64>() - 1.0).abs() <= 1e-9
}

#[test]
fn policy_updates_stay_on_the_simplex() {
    let mut rng = seeded(17);
    for _ in 0..10_000 {
        let k = rng.random_range(1..=6);
        let kind = LearnerKind::ALL[rng.random_range(0..LearnerKind::ALL.len())];
        let raw: Vec<f64> = (0..k).map(|_| rng.random_range(0.0..1.0f64).powi(3)).collect();
        let s: f64 = raw.iter().sum();
        let policy: Vec<f64> = if s > 0.0 { raw.iter().map(|x| x / s).collect() } else { vec![1.0 / k as f64; k] };
        let values: Vec<f64> = (0..k).map(|_| rng.random_range(-50.0..50.0)).collect();
        let rate = if rng.random_bool(0.2) { [0.0, 1.0][rng.random_range(0..2)] } else { rng.random_range(0.0..1.0) };
        let temperature = 10f64.powf(rng.random_range(-3.0..2.0));
        let mask: Option<Vec<bool>> = rng.random_bool(0.3).then(|| {
            let mut m: Vec<bool> = (0..k).map(|_| rng.random_bool(0.5)).collect();
            m[rng.random_range(0..k)] = true;
            m
        });
        let next = step_policy(kind, &policy, &values, temperature, rate, mask.as_deref()).unwrap();
        assert!(on_simplex(&next), "{kind:?} {policy:?} {values:?} -> {next:?}");
        if let Some(m) = &mask {
            assert!(next.iter().zip(m).all(|(&p, &ok)| ok || p == 0.0));
        }
    }
}

proptest! {
    #[test]
    fn replicator_vertices_are_absorbing(vertex in 0usize..4, values in prop::collection::vec(-20.0f64..20.0, 4), rate in 0.0f64..=1.0) {
        let mut pi = vec![0.0; 4];
        pi[vertex] = 1.0;
        let next = step_policy(LearnerKind::Replicator, &pi, &values, 1.0, rate, None).unwrap();
        prop_assert_eq!(next, pi);
    }

    #[test]
    fn runs_are_reproducible(seed in any::<u64>(), kind in 0usize..5) {
        let g = random_game(&mut seeded(seed), &[2, 3], 2);
        let learners = vec![LearnerSpec::new(LearnerKind::ALL[kind]).with_rates(RateSchedule::Harmonic, RateSchedule::Constant(0.1)); 2];
        let schedule = SignalSchedule::Sequence(vec![0, 1, 1]);
        let a = run_dynamics(&g, &learners, 200, seed, &schedule).unwrap();
        let b = run_dynamics(&g, &learners, 200, seed, &schedule).unwrap();
        prop_assert_eq!(a, b);
    }
}

#[test]
fn fictitious_play_frequencies_approach_one_half() {
    let g = templates::matching_pennies();
    let learners = vec![LearnerSpec::new(LearnerKind::FictitiousPlay); 2];
    let trace = run_dynamics(&g, &learners, 20_000, 3, &SignalSchedule::Constant(0)).unwrap();
    let d = diagnostics_with_stride(&trace, &g, 1000).unwrap();
    for f in &d.marginal_frequencies {
        assert!((f[0] - 0.5).abs() < 0.05, "{f:?}");
    }
}

#[test]
fn payoff_estimates_converge_to_signal_averages() {
    // One agent, payoffs depending only on a uniformly drawn signal.
    let mut rng = seeded(5);
    let table: Vec<[f64; 2]> = (0..4).map(|_| [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)]).collect();
    let g = StrategicGame::from_fn(vec![labels(2)], (0..4).map(|s| format!("s{s}")).collect(), |s, x| {
        vec![table[s][x[0]]]
    })
    .unwrap();
    let horizon = 200_000;
    let signals = SignalSchedule::Sequence((0..horizon).map(|_| rng.random_range(0..4)).collect());
    let spec = LearnerSpec::new(LearnerKind::PayoffEstimation).with_rates(RateSchedule::Harmonic, RateSchedule::Constant(0.0));
    let trace = run_dynamics(&g, &[spec], horizon, 9, &signals).unwrap();
    let q = &trace.steps.last().unwrap().estimates[0];
    for a in 0..2 {
        let mean = table.iter().map(|r| r[a]).sum::<f64>() / 4.0;
        assert!((q[a] - mean).abs() < 0.02, "action {a}: {} vs {mean}", q[a]);
    }
}

#[test]
fn improvement_paths_end_at_equilibria_on_congestion() {
    let g = templates::atomic_routing_game(&templates::braess_augmented(), 4, &[]).unwrap();
    let nash = enumerate_pure_nash(&g, 0).unwrap();
    for idx in 0..g.num_profiles() {
        let path = best_response_path(&g, &g.profile_at(idx), 0, 1000).unwrap();
        assert!(path.converged);
        let end: &ActionProfile = path.profiles.last().unwrap();
        assert!(nash.contains(end));
        // Exact potential game: every move strictly lowers the Rosenthal potential, so no profile repeats.
        let mut seen = path.profiles.clone();
        seen.sort_by_key(|x| g.profile_index(&x.0));
        seen.dedup();
        assert_eq!(seen.len(), path.profiles.len());
    }
}
