//! Seeded instance generators shared by the integration tests.
#![allow(dead_code)]

use rand::seq::SliceRandom;
use rand::Rng;
use stgames_core::coop::{CoalitionGame, Coalition};
use stgames_core::game::StrategicGame;
use stgames_core::matching::MatchingMarket;
use stgames_core::rng::SimRng;

pub fn labels(k: usize) -> Vec<String> {
    (0..k).map(|a| format!("a{a}")).collect()
}

/// Payoffs drawn from a coarse grid so that ties actually occur.
pub fn random_game(rng: &mut SimRng, counts: &[usize], signals: usize) -> StrategicGame {
    let actions = counts.iter().map(|&k| labels(k)).collect();
    let sig = (0..signals).map(|s| format!("s{s}")).collect();
    StrategicGame::from_fn(actions, sig, |_, _| {
        (0..counts.len()).map(|_| rng.random_range(-4..=4) as f64 * 0.5).collect()
    })
    .unwrap()
}

pub fn random_coalition_game(rng: &mut SimRng, n: usize) -> CoalitionGame {
    CoalitionGame::from_fn(n, |m| if m == 0 { 0.0 } else { rng.random_range(-2.0..10.0) }).unwrap()
}

/// `v(S) = a|S|^2 + b|S| + sum of nonnegative pair synergies inside S`, which
/// is supermodular.
pub fn random_convex_game(rng: &mut SimRng, n: usize) -> CoalitionGame {
    let a = rng.random_range(0.0..1.0);
    let b = rng.random_range(0.0..2.0);
    let mut w = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in i + 1..n {
            w[i][j] = rng.random_range(0.0..0.5);
        }
    }
    CoalitionGame::from_fn(n, |m: Coalition| {
        let k = m.count_ones() as f64;
        let mut v = a * k * k + b * k;
        for i in 0..n {
            for j in i + 1..n {
                if m >> i & 1 == 1 && m >> j & 1 == 1 {
                    v += w[i][j];
                }
            }
        }
        v
    })
    .unwrap()
}

/// Three agents, zero singletons, superadditive.
pub fn random_superadditive3(rng: &mut SimRng) -> CoalitionGame {
    let pairs: Vec<f64> = (0..3).map(|_| rng.random_range(0..=100) as f64 / 100.0).collect();
    let top = pairs.iter().copied().fold(0.0, f64::max);
    let grand = top + rng.random_range(0..=100) as f64 / 100.0;
    CoalitionGame::from_fn(3, |m| match m {
        0b011 => pairs[0],
        0b101 => pairs[1],
        0b110 => pairs[2],
        0b111 => grand,
        _ => 0.0,
    })
    .unwrap()
}

pub fn random_market(rng: &mut SimRng, n: usize) -> MatchingMarket {
    let mut side = || {
        (0..n)
            .map(|_| {
                let mut p: Vec<usize> = (0..n).collect();
                p.shuffle(rng);
                p
            })
            .collect::<Vec<_>>()
    };
    let m = side();
    let w = side();
    MatchingMarket::new(m, w).unwrap()
}
