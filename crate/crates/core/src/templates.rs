//! Canonical instances: classic 2x2 games, the three-agent cooperative game
//! with pairwise synergy, the Pigou and Braess networks, and an atomic
//! discretisation of a routing network for learning experiments.

use crate::coop::CoalitionGame;
use crate::game::{StrategicGame, NO_SIGNAL};
use crate::network::{CongestionNetwork, Edge};
use crate::Result;

fn labels(xs: &[&str]) -> Vec<String> {
    xs.iter().map(|s| s.to_string()).collect()
}

/// Prisoner's dilemma with R=3, S=0, T=5, P=1; actions `C`, `D`.
pub fn prisoners_dilemma() -> StrategicGame {
    let a = labels(&["C", "D"]);
    StrategicGame::simple(
        vec![a.clone(), a],
        vec![vec![3.0, 3.0], vec![0.0, 5.0], vec![5.0, 0.0], vec![1.0, 1.0]],
    )
    .expect("static table")
}

/// Agent 0 wins 1 on a match, agent 1 wins 1 on a mismatch; actions `H`, `T`.
pub fn matching_pennies() -> StrategicGame {
    let a = labels(&["H", "T"]);
    StrategicGame::simple(
        vec![a.clone(), a],
        vec![vec![1.0, -1.0], vec![-1.0, 1.0], vec![-1.0, 1.0], vec![1.0, -1.0]],
    )
    .expect("static table")
}

/// Both agents get 1 on the diagonal and 0 off it; actions `A`, `B`.
pub fn coordination_game() -> StrategicGame {
    let a = labels(&["A", "B"]);
    StrategicGame::simple(
        vec![a.clone(), a],
        vec![vec![1.0, 1.0], vec![0.0, 0.0], vec![0.0, 0.0], vec![1.0, 1.0]],
    )
    .expect("static table")
}

/// Three agents: singletons 0, pairs 1/2, grand coalition 1.
pub fn pairwise_synergy_game() -> CoalitionGame {
    CoalitionGame::from_fn(3, |m| match m.count_ones() {
        1 => 0.0,
        2 => 0.5,
        _ => 1.0,
    })
    .expect("static table")
}

/// Three-agent majority game: any coalition of two or more earns 1.
pub fn majority_game() -> CoalitionGame {
    CoalitionGame::from_fn(3, |m| if m.count_ones() >= 2 { 1.0 } else { 0.0 }).expect("static table")
}

/// One link with latency `x`, demand 1.
pub fn single_link() -> CongestionNetwork {
    CongestionNetwork::new(2, vec![Edge::new(0, 1, 0.0, 1.0)], 0, 1, 1.0).expect("static network")
}

/// Two parallel links with latencies `1` and `x`, demand 1.
pub fn pigou() -> CongestionNetwork {
    CongestionNetwork::new(2, vec![Edge::new(0, 1, 1.0, 0.0), Edge::new(0, 1, 0.0, 1.0)], 0, 1, 1.0)
        .expect("static network")
}

/// Nodes s=0, u=1, v=2, t=3 with s->u: x, u->t: 1, s->v: 1, v->t: x, demand 1.
pub fn braess_base() -> CongestionNetwork {
    CongestionNetwork::new(
        4,
        vec![
            Edge::new(0, 1, 0.0, 1.0),
            Edge::new(1, 3, 1.0, 0.0),
            Edge::new(0, 2, 1.0, 0.0),
            Edge::new(2, 3, 0.0, 1.0),
        ],
        0,
        3,
        1.0,
    )
    .expect("static network")
}

/// Zero-latency u->v shortcut.
pub fn braess_shortcut() -> Edge {
    Edge::new(1, 2, 0.0, 0.0)
}

pub fn braess_augmented() -> CongestionNetwork {
    braess_base().with_edge(braess_shortcut()).expect("static network")
}

/// Atomic routing game: `agents` players each route `demand / agents` units on
/// one path and receive minus their path latency plus tolls. Each entry of
/// `toll_signals` is a `(label, per-edge tolls)` pair and becomes one signal.
/// Actions are labelled `p0, p1, ...` in path-enumeration order.
pub fn atomic_routing_game(
    net: &CongestionNetwork,
    agents: usize,
    toll_signals: &[(String, Vec<f64>)],
) -> Result<StrategicGame> {
    let paths = net.paths()?;
    if agents == 0 {
        return Err(crate::Error::domain("an atomic routing game needs at least one agent"));
    }
    for (label, tolls) in toll_signals {
        if tolls.len() != net.edges.len() {
            return Err(crate::Error::dims(format!("signal {label:?} lists {} tolls", tolls.len())));
        }
    }
    let (signals, tolls): (Vec<String>, Vec<Vec<f64>>) = if toll_signals.is_empty() {
        (vec![NO_SIGNAL.to_string()], vec![vec![0.0; net.edges.len()]])
    } else {
        toll_signals.iter().cloned().unzip()
    };
    let share = net.demand / agents as f64;
    let path_labels: Vec<String> = (0..paths.len()).map(|k| format!("p{k}")).collect();
    StrategicGame::from_fn(vec![path_labels; agents], signals, |s, profile| {
        let mut load = vec![0.0; net.edges.len()];
        for &p in profile {
            for &e in &paths[p] {
                load[e] += share;
            }
        }
        profile
            .iter()
            .map(|&p| -paths[p].iter().map(|&e| net.edges[e].latency(load[e]) + tolls[s][e]).sum::<f64>())
            .collect()
    })
}
