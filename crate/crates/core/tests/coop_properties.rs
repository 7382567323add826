mod common;

use proptest::prelude::*;
use stgames_core::coop::{
    core_nonempty, in_core, is_convex, is_superadditive, nucleolus, shapley, CoalitionGame,
};
use stgames_core::rng::seeded;

use common::{random_coalition_game, random_convex_game};

fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
    a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn shapley_is_efficient_and_additive(seed in any::<u64>(), n in 2usize..=6) {
        let mut rng = seeded(seed);
        let v = random_coalition_game(&mut rng, n);
        let w = random_coalition_game(&mut rng, n);
        let phi_v = shapley(&v).unwrap();
        let phi_w = shapley(&w).unwrap();
        prop_assert!((phi_v.iter().sum::<f64>() - v.value(v.grand())).abs() < 1e-9);
        let sum = CoalitionGame::from_fn(n, |m| v.value(m) + w.value(m)).unwrap();
        let phi_sum = shapley(&sum).unwrap();
        for i in 0..n {
            prop_assert!((phi_sum[i] - phi_v[i] - phi_w[i]).abs() < 1e-9);
        }
    }

    #[test]
    fn shapley_and_nucleolus_are_permutation_equivariant(seed in any::<u64>(), n in 2usize..=5) {
        let mut rng = seeded(seed);
        let g = random_coalition_game(&mut rng, n);
        let mut perm: Vec<usize> = (0..n).collect();
        perm.rotate_left(1);
        let h = g.permuted(&perm).unwrap();
        let (a, b) = (shapley(&g).unwrap(), shapley(&h).unwrap());
        let (c, d) = (nucleolus(&g).unwrap(), nucleolus(&h).unwrap());
        for i in 0..n {
            prop_assert!((b[perm[i]] - a[i]).abs() < 1e-9);
            prop_assert!((d[perm[i]] - c[i]).abs() < 1e-6, "{:?} vs {:?}", c, d);
        }
    }

    #[test]
    fn convex_games_put_shapley_in_core(seed in any::<u64>(), n in 2usize..=6) {
        let mut rng = seeded(seed);
        let g = random_convex_game(&mut rng, n);
        prop_assert!(is_convex(&g).0);
        prop_assert!(is_superadditive(&g).0);
        prop_assert!(in_core(&g, &shapley(&g).unwrap()).unwrap().in_core());
    }

    #[test]
    fn nucleolus_is_in_a_nonempty_core(seed in any::<u64>(), n in 2usize..=5) {
        let mut rng = seeded(seed);
        let g = random_coalition_game(&mut rng, n);
        let verdict = core_nonempty(&g).unwrap();
        let nu = nucleolus(&g).unwrap();
        prop_assert!((nu.iter().sum::<f64>() - g.value(g.grand())).abs() < 1e-7);
        if verdict.nonempty {
            let check = in_core(&g, &nu).unwrap();
            prop_assert!(check.in_core(), "{:?}", check);
        }
    }

    #[test]
    fn core_certificate_is_feasible(seed in any::<u64>(), n in 2usize..=6) {
        let mut rng = seeded(seed);
        let g = random_convex_game(&mut rng, n);
        let verdict = core_nonempty(&g).unwrap();
        prop_assert!(verdict.nonempty);
        let cert = verdict.certificate.expect("nonempty core has a certificate");
        prop_assert!(in_core(&g, &cert).unwrap().in_core());
    }
}

#[test]
fn symmetric_and_dummy_agents() {
    // Agents 0 and 1 interchangeable, agent 3 a dummy.
    let g = CoalitionGame::from_fn(4, |m| {
        let core = m & 0b0111;
        let k01 = (core & 0b11).count_ones() as f64;
        let k2 = (core >> 2 & 1) as f64;
        k01 * 1.5 + k2 * 0.7 + if core & 0b11 == 0b11 { 2.0 } else { 0.0 } + k01 * k2
    })
    .unwrap();
    let phi = shapley(&g).unwrap();
    assert!((phi[0] - phi[1]).abs() < 1e-9);
    assert!(phi[3].abs() < 1e-9);
}

#[test]
fn nucleolus_on_asymmetric_example_matches_grid() {
    let g = CoalitionGame::from_fn(3, |m| match m.count_ones() {
        1 if m == 1 => 0.2,
        1 => 0.0,
        2 => 0.5,
        _ => 1.0,
    })
    .unwrap();
    let nu = nucleolus(&g).unwrap();
    let oracle = grid_nucleolus(&g, 1000);
    assert!(close(&nu, &oracle, 2e-3), "{nu:?} vs {oracle:?}");
}

/// Lexicographic minimum of the decreasingly sorted excess vector over the
/// simplex grid `{r >= 0, sum r = v(N)}` with `steps` steps per unit.
fn grid_nucleolus(g: &CoalitionGame, steps: usize) -> Vec<f64> {
    let total = g.value(7);
    let k = (total * steps as f64).round() as usize;
    let h = total / k as f64;
    let mut best: Option<(Vec<f64>, Vec<f64>)> = None;
    for a in 0..=k {
        for b in 0..=k - a {
            let r = [a as f64 * h, b as f64 * h, (k - a - b) as f64 * h];
            let mut e: Vec<f64> = (1..7u32)
                .map(|m| g.value(m) - (0..3).filter(|i| m >> i & 1 == 1).map(|i| r[i]).sum::<f64>())
                .collect();
            e.sort_by(|x, y| y.total_cmp(x));
            let better = match &best {
                None => true,
                Some((eb, _)) => e.iter().zip(eb).find(|(x, y)| (*x - *y).abs() > 1e-12).is_some_and(|(x, y)| x < y),
            };
            if better {
                best = Some((e, r.to_vec()));
            }
        }
    }
    best.unwrap().1
}
