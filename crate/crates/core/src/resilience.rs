//! Adversarial corruption of exchanged information and the trimmed,
//! trust-weighted consensus defence.
//!
//! Each step every agent broadcasts one value to its neighbours. Messages
//! from compromised agents are rewritten during the activation window; the
//! receiver drops the `f` largest and `f` smallest of the values it holds and
//! averages the rest with its trust weights.

use rand::Rng;

use crate::game::StrategicGame;
use crate::learning::{LearnerSpec, Simulator, Trace};
use crate::rng::substream;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AttackKind {
    ConstantInjection(f64),
    SignFlip,
    Replay { lag: usize },
    ChannelDrop { probability: f64 },
}

impl AttackKind {
    pub fn name(&self) -> &'static str {
        match self {
            AttackKind::ConstantInjection(_) => "constant-injection",
            AttackKind::SignFlip => "sign-flip",
            AttackKind::Replay { .. } => "replay",
            AttackKind::ChannelDrop { .. } => "channel-drop",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdversaryModel {
    pub compromised: Vec<usize>,
    pub attack: AttackKind,
    /// Inclusive step window `[start, end]` during which the attack is active.
    pub window: (usize, usize),
}

impl AdversaryModel {
    pub fn none() -> Self {
        AdversaryModel { compromised: Vec::new(), attack: AttackKind::SignFlip, window: (0, 0) }
    }

    pub fn validate(&self, agents: usize) -> Result<()> {
        if let Some(&i) = self.compromised.iter().find(|&&i| i >= agents) {
            return Err(Error::domain(format!("compromised agent {i} is not in the scenario")));
        }
        match self.attack {
            AttackKind::Replay { lag: 0 } => Err(Error::domain("replay lag must be at least 1")),
            AttackKind::ChannelDrop { probability } if !(0.0..=1.0).contains(&probability) => {
                Err(Error::domain(format!("drop probability {probability} outside [0, 1]")))
            }
            AttackKind::ConstantInjection(v) if !v.is_finite() => Err(Error::domain("injected value must be finite")),
            _ if self.window.0 > self.window.1 => Err(Error::domain("activation window ends before it starts")),
            _ => Ok(()),
        }
    }

    pub fn is_compromised(&self, agent: usize) -> bool {
        self.compromised.contains(&agent)
    }

    pub fn active(&self, t: usize) -> bool {
        t >= self.window.0 && t <= self.window.1
    }
}

/// `inbox[receiver][sender]`: the value the receiver holds from the sender,
/// `None` when nothing arrived.
pub type Inbox = Vec<Vec<Option<f64>>>;

/// Honest inbox: each agent hears its neighbours' current values.
pub fn honest_inbox(values: &[f64], neighbors: &[Vec<usize>]) -> Inbox {
    neighbors
        .iter()
        .map(|nb| {
            let mut row = vec![None; values.len()];
            for &j in nb {
                row[j] = Some(values[j]);
            }
            row
        })
        .collect()
}

/// Rewrites messages sent by compromised agents at step `t`. Replay reads
/// `history[t - lag]` (the earliest row before that exists); channel drops
/// draw from substream `t` of `seed`, receivers in ascending order. An agent
/// never corrupts what it holds about itself.
pub fn corrupt_information(
    adversary: &AdversaryModel,
    inbox: &Inbox,
    history: &[Vec<f64>],
    t: usize,
    seed: u64,
) -> Result<Inbox> {
    let n = inbox.len();
    adversary.validate(n)?;
    if inbox.iter().any(|row| row.len() != n) {
        return Err(Error::dims("inbox must be square"));
    }
    let mut out = inbox.clone();
    if adversary.compromised.is_empty() || !adversary.active(t) {
        return Ok(out);
    }
    let mut rng = substream(seed, t as u64);
    for (i, row) in out.iter_mut().enumerate() {
        for (j, slot) in row.iter_mut().enumerate() {
            if i == j || !adversary.is_compromised(j) {
                continue;
            }
            let Some(v) = *slot else { continue };
            *slot = match adversary.attack {
                AttackKind::ConstantInjection(c) => Some(c),
                AttackKind::SignFlip => Some(-v),
                AttackKind::Replay { lag } => {
                    let past = history
                        .get(t.saturating_sub(lag))
                        .or_else(|| history.first())
                        .ok_or_else(|| Error::domain("replay attack needs a value history"))?;
                    Some(past[j])
                }
                AttackKind::ChannelDrop { probability } => {
                    if rng.random::<f64>() < probability {
                        None
                    } else {
                        Some(v)
                    }
                }
            };
        }
    }
    Ok(out)
}

/// Row-stochastic weights over each agent's neighbour set.
#[derive(Debug, Clone, PartialEq)]
pub struct TrustMatrix {
    pub neighbors: Vec<Vec<usize>>,
    /// `weights[i][j]`, zero outside the neighbour set.
    pub weights: Vec<Vec<f64>>,
}

impl TrustMatrix {
    pub fn uniform(neighbors: Vec<Vec<usize>>) -> Result<Self> {
        let n = neighbors.len();
        let mut weights = vec![vec![0.0; n]; n];
        for (i, nb) in neighbors.iter().enumerate() {
            if nb.is_empty() {
                return Err(Error::domain(format!("agent {i} has no neighbours")));
            }
            let mut sorted = nb.clone();
            sorted.sort_unstable();
            sorted.dedup();
            if sorted.len() != nb.len() || sorted.last().is_some_and(|&j| j >= n) {
                return Err(Error::domain(format!("neighbour list of agent {i} is invalid")));
            }
            for &j in nb {
                weights[i][j] = 1.0 / nb.len() as f64;
            }
        }
        Ok(TrustMatrix { neighbors, weights })
    }

    /// Complete graph with self-loops.
    pub fn complete(n: usize) -> Result<Self> {
        Self::uniform((0..n).map(|_| (0..n).collect()).collect())
    }

    pub fn max_row_error(&self) -> f64 {
        self.weights.iter().map(|r| (r.iter().sum::<f64>() - 1.0).abs()).fold(0.0, f64::max)
    }
}

/// `w'_ij ∝ w_ij exp(-eta r_ij)` over each neighbour set. Residuals are shifted
/// by the row minimum first, which cancels in the normalisation.
pub fn update_trust(trust: &TrustMatrix, residuals: &[Vec<f64>], eta: f64) -> Result<TrustMatrix> {
    if !(0.0..=1.0).contains(&eta) {
        return Err(Error::domain(format!("trust learning rate {eta} outside [0, 1]")));
    }
    let n = trust.neighbors.len();
    if residuals.len() != n || residuals.iter().any(|r| r.len() != n) {
        return Err(Error::dims("residual matrix must match the trust matrix"));
    }
    let mut out = trust.clone();
    if eta == 0.0 {
        return Ok(out);
    }
    for (i, nb) in trust.neighbors.iter().enumerate() {
        if nb.iter().any(|&j| !(residuals[i][j] >= 0.0)) {
            return Err(Error::domain(format!("negative residual in row {i}")));
        }
        let low = nb.iter().map(|&j| residuals[i][j]).fold(f64::INFINITY, f64::min);
        let raw: Vec<f64> = nb.iter().map(|&j| trust.weights[i][j] * (-eta * (residuals[i][j] - low)).exp()).collect();
        let s: f64 = raw.iter().sum();
        if s > 0.0 && s.is_finite() {
            for (&j, w) in nb.iter().zip(raw) {
                out.weights[i][j] = w / s;
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResilienceConfig {
    /// Values trimmed per side.
    pub trim: usize,
    /// Trust learning rate; zero keeps trust fixed.
    pub eta: f64,
    /// Residuals are divided by this before the trust update.
    pub residual_scale: f64,
}

impl ResilienceConfig {
    pub fn naive() -> Self {
        ResilienceConfig { trim: 0, eta: 0.0, residual_scale: 1.0 }
    }

    fn validate(&self, neighbors: &[Vec<usize>]) -> Result<()> {
        if !(0.0..=1.0).contains(&self.eta) {
            return Err(Error::domain(format!("trust learning rate {} outside [0, 1]", self.eta)));
        }
        if !(self.residual_scale > 0.0 && self.residual_scale.is_finite()) {
            return Err(Error::domain("residual scale must be positive"));
        }
        for (i, nb) in neighbors.iter().enumerate() {
            if nb.len() <= 2 * self.trim {
                return Err(Error::domain(format!(
                    "agent {i} has {} neighbours, trimming {} per side is infeasible",
                    nb.len(),
                    self.trim
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConsensusStep {
    pub values: Vec<f64>,
    /// `residuals[i][j] = |report_ij - aggregate_i|`, zero where nothing arrived.
    pub residuals: Vec<Vec<f64>>,
}

/// Trimmed, trust-weighted averaging of the inbox. Survivors keep their
/// neighbour-list order, and equal survivor weights reduce to a plain mean,
/// so with no trimming and uniform trust the update is exactly the classic
/// average. An agent holding too few values to trim keeps its own value.
pub fn resilient_consensus_step(
    values: &[f64],
    inbox: &Inbox,
    trust: &TrustMatrix,
    config: &ResilienceConfig,
) -> Result<ConsensusStep> {
    let n = values.len();
    if inbox.len() != n || trust.neighbors.len() != n {
        return Err(Error::dims("values, inbox and trust must cover the same agents"));
    }
    config.validate(&trust.neighbors)?;
    let mut next = values.to_vec();
    let mut residuals = vec![vec![0.0; n]; n];
    for i in 0..n {
        let received: Vec<(usize, f64)> = trust.neighbors[i]
            .iter()
            .filter_map(|&j| if j == i { Some((j, values[i])) } else { inbox[i][j].map(|v| (j, v)) })
            .collect();
        if received.len() <= 2 * config.trim {
            continue;
        }
        let mut order: Vec<usize> = (0..received.len()).collect();
        order.sort_by(|&a, &b| received[a].1.total_cmp(&received[b].1).then(received[a].0.cmp(&received[b].0)));
        let mut keep = vec![true; received.len()];
        for &k in order[..config.trim].iter().chain(&order[order.len() - config.trim..]) {
            keep[k] = false;
        }
        let survivors: Vec<(usize, f64)> =
            received.iter().zip(&keep).filter(|(_, &k)| k).map(|(&r, _)| r).collect();
        let w: Vec<f64> = survivors.iter().map(|&(j, _)| trust.weights[i][j]).collect();
        let equal = w.windows(2).all(|p| p[0] == p[1]);
        let wsum: f64 = w.iter().sum();
        let agg = if equal || !(wsum > 0.0) {
            survivors.iter().map(|&(_, v)| v).sum::<f64>() / survivors.len() as f64
        } else {
            survivors.iter().zip(&w).map(|(&(_, v), &wj)| wj * v).sum::<f64>() / wsum
        };
        for &(j, v) in &received {
            residuals[i][j] = (v - agg).abs() / config.residual_scale;
        }
        next[i] = agg;
    }
    Ok(ConsensusStep { values: next, residuals })
}

/// Plain averaging over each neighbour list, no defence.
pub fn average_consensus_step(values: &[f64], neighbors: &[Vec<usize>]) -> Vec<f64> {
    neighbors.iter().map(|nb| nb.iter().map(|&j| values[j]).sum::<f64>() / nb.len() as f64).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConsensusScenario {
    pub initial: Vec<f64>,
    pub neighbors: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResilienceMetrics {
    /// Largest honest deviation from the adversary-free run.
    pub max_deviation: f64,
    /// Honest `max - min` at every recorded step.
    pub diameter: Vec<f64>,
    /// First step after the window with diameter below `1e-3` of the initial
    /// diameter (learning scenarios: deviation below `1e-3`).
    pub recovery_time: Option<usize>,
    /// First step at which an honest value left the initial honest hull.
    pub hull_exit: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConsensusRun {
    /// `values[t]` for `t = 0..=T`.
    pub values: Vec<Vec<f64>>,
    pub nominal: Vec<Vec<f64>>,
    pub trust: TrustMatrix,
    pub metrics: ResilienceMetrics,
}

fn simulate_consensus(
    scenario: &ConsensusScenario,
    adversary: &AdversaryModel,
    defense: &ResilienceConfig,
    steps: usize,
    seed: u64,
) -> Result<(Vec<Vec<f64>>, TrustMatrix)> {
    let mut trust = TrustMatrix::uniform(scenario.neighbors.clone())?;
    let mut history = vec![scenario.initial.clone()];
    for t in 0..steps {
        let current = history.last().expect("nonempty");
        let inbox = honest_inbox(current, &scenario.neighbors);
        let inbox = corrupt_information(adversary, &inbox, &history, t, seed)?;
        let step = resilient_consensus_step(current, &inbox, &trust, defense)?;
        if defense.eta > 0.0 {
            trust = update_trust(&trust, &step.residuals, defense.eta)?;
        }
        history.push(step.values);
    }
    Ok((history, trust))
}

/// Runs the consensus scenario with and without the adversary under the same
/// defence and reports the resilience metrics over honest agents.
pub fn run_adversarial_consensus(
    scenario: &ConsensusScenario,
    adversary: &AdversaryModel,
    defense: &ResilienceConfig,
    steps: usize,
    seed: u64,
) -> Result<ConsensusRun> {
    let n = scenario.initial.len();
    if scenario.neighbors.len() != n {
        return Err(Error::dims("one neighbour list per agent"));
    }
    if scenario.initial.iter().any(|v| !v.is_finite()) {
        return Err(Error::domain("initial values must be finite"));
    }
    adversary.validate(n)?;
    defense.validate(&scenario.neighbors)?;
    let honest: Vec<usize> = (0..n).filter(|&i| !adversary.is_compromised(i)).collect();
    if honest.is_empty() {
        return Err(Error::domain("every agent is compromised"));
    }
    let (values, trust) = simulate_consensus(scenario, adversary, defense, steps, seed)?;
    let (nominal, _) = simulate_consensus(scenario, &AdversaryModel::none(), defense, steps, seed)?;

    let spread = |row: &[f64]| {
        let hi = honest.iter().map(|&i| row[i]).fold(f64::NEG_INFINITY, f64::max);
        let lo = honest.iter().map(|&i| row[i]).fold(f64::INFINITY, f64::min);
        (lo, hi)
    };
    let (lo0, hi0) = spread(&values[0]);
    let diameter: Vec<f64> = values.iter().map(|r| {
        let (lo, hi) = spread(r);
        hi - lo
    }).collect();
    let max_deviation = values
        .iter()
        .zip(&nominal)
        .flat_map(|(a, b)| honest.iter().map(move |&i| (a[i] - b[i]).abs()))
        .fold(0.0, f64::max);
    let threshold = 1e-3 * diameter[0];
    let recovery_time = (adversary.window.1 + 1..values.len()).find(|&t| diameter[t] < threshold);
    let hull_exit = values.iter().position(|r| {
        let (lo, hi) = spread(r);
        lo < lo0 || hi > hi0
    });
    Ok(ConsensusRun {
        values,
        nominal,
        trust,
        metrics: ResilienceMetrics { max_deviation, diameter, recovery_time, hull_exit },
    })
}

/// Maps a corrupted action report onto the sender's action range.
fn corrupt_action(attack: AttackKind, action: usize, actions: usize, past: usize, drop: bool) -> Option<usize> {
    match attack {
        AttackKind::ConstantInjection(v) => Some((v.round().max(0.0) as usize).min(actions - 1)),
        AttackKind::SignFlip => Some(actions - 1 - action),
        AttackKind::Replay { .. } => Some(past),
        AttackKind::ChannelDrop { .. } => (!drop).then_some(action),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LearningRun {
    pub trace: Trace,
    pub nominal: Trace,
    pub metrics: ResilienceMetrics,
}

/// Learning scenario in which opponents' action reports from compromised
/// agents are corrupted before honest agents learn from them: injection
/// reports a fixed action index, sign flip mirrors the action index, replay
/// repeats the action played `lag` steps earlier, channel drop loses the
/// report. Play itself is unaffected. Metrics compare honest policies with
/// the adversary-free run on the same seed: diameter is the per-step
/// largest sup-norm policy deviation.
pub fn run_adversarial_learning(
    game: &StrategicGame,
    learners: &[LearnerSpec],
    adversary: &AdversaryModel,
    steps: usize,
    seed: u64,
) -> Result<LearningRun> {
    let n = game.num_agents();
    adversary.validate(n)?;
    if steps == 0 {
        return Err(Error::domain("horizon must be at least 1"));
    }
    let run = |adv: &AdversaryModel| -> Result<Trace> {
        let mut sim = Simulator::new(game, learners.to_vec(), seed)?;
        let mut played: Vec<Vec<usize>> = Vec::with_capacity(steps);
        let mut records = Vec::with_capacity(steps);
        for t in 0..steps {
            let mut rng = substream(seed, t as u64);
            let lag = match adv.attack {
                AttackKind::Replay { lag } => lag,
                _ => 0,
            };
            let past = played.get(t.saturating_sub(lag)).or(played.first()).cloned();
            let mut observe = |i: usize, j: usize, a: usize| -> Option<usize> {
                if i == j || !adv.is_compromised(j) || !adv.active(t) {
                    return Some(a);
                }
                let drop = match adv.attack {
                    AttackKind::ChannelDrop { probability } => rng.random::<f64>() < probability,
                    _ => false,
                };
                let old = past.as_ref().map_or(a, |p| p[j]);
                corrupt_action(adv.attack, a, game.num_actions(j), old, drop)
            };
            let rec = sim.step_observed(game, 0, &mut observe)?;
            played.push(rec.actions.clone());
            records.push(rec);
        }
        Ok(Trace { seed, steps: records })
    };
    let trace = run(adversary)?;
    let nominal = run(&AdversaryModel::none())?;
    let honest: Vec<usize> = (0..n).filter(|&i| !adversary.is_compromised(i)).collect();
    let diameter: Vec<f64> = trace
        .steps
        .iter()
        .zip(&nominal.steps)
        .map(|(a, b)| {
            honest
                .iter()
                .flat_map(|&i| a.policies[i].iter().zip(&b.policies[i]).map(|(x, y)| (x - y).abs()))
                .fold(0.0, f64::max)
        })
        .collect();
    let max_deviation = diameter.iter().copied().fold(0.0, f64::max);
    let recovery_time = (adversary.window.1 + 1..diameter.len()).find(|&t| diameter[t] < 1e-3);
    Ok(LearningRun { trace, nominal, metrics: ResilienceMetrics { max_deviation, diameter, recovery_time, hull_exit: None } })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn complete_inbox(values: &[f64]) -> Inbox {
        let n = values.len();
        honest_inbox(values, &vec![(0..n).collect(); n])
    }

    #[test]
    fn no_adversary_passes_through() {
        let inbox = complete_inbox(&[1.0, 2.0, 3.0]);
        let out = corrupt_information(&AdversaryModel::none(), &inbox, &[], 0, 1).unwrap();
        assert_eq!(out, inbox);
    }

    #[test]
    fn injection_rewrites_sender() {
        let adv = AdversaryModel { compromised: vec![3], attack: AttackKind::ConstantInjection(10.0), window: (0, 5) };
        let inbox = complete_inbox(&[0.0, 1.0, 2.0, 3.0]);
        let out = corrupt_information(&adv, &inbox, &[], 2, 0).unwrap();
        for (i, row) in out.iter().enumerate() {
            assert_eq!(row[3], if i == 3 { Some(3.0) } else { Some(10.0) });
        }
        let after = corrupt_information(&adv, &inbox, &[], 6, 0).unwrap();
        assert_eq!(after, inbox);
    }

    #[test]
    fn replay_and_flip() {
        let inbox = complete_inbox(&[5.0, 7.0]);
        let history = vec![vec![1.0, 2.0], vec![3.0, 4.0], vec![5.0, 7.0]];
        let replay = AdversaryModel { compromised: vec![1], attack: AttackKind::Replay { lag: 2 }, window: (0, 9) };
        assert_eq!(corrupt_information(&replay, &inbox, &history, 2, 0).unwrap()[0][1], Some(2.0));
        let flip = AdversaryModel { compromised: vec![1], attack: AttackKind::SignFlip, window: (0, 9) };
        assert_eq!(corrupt_information(&flip, &inbox, &history, 2, 0).unwrap()[0][1], Some(-7.0));
        let bad = AdversaryModel { compromised: vec![1], attack: AttackKind::Replay { lag: 0 }, window: (0, 9) };
        assert!(corrupt_information(&bad, &inbox, &history, 2, 0).is_err());
    }

    #[test]
    fn full_drop_renormalises() {
        let values = [0.0, 1.0, 2.0, 9.0];
        let adv = AdversaryModel { compromised: vec![3], attack: AttackKind::ChannelDrop { probability: 1.0 }, window: (0, 0) };
        let out = corrupt_information(&adv, &complete_inbox(&values), &[], 0, 3).unwrap();
        assert!((0..3).all(|i| out[i][3].is_none()));
        let trust = TrustMatrix::complete(4).unwrap();
        let step = resilient_consensus_step(&values, &out, &trust, &ResilienceConfig::naive()).unwrap();
        // Remaining three weights 1/4 each re-sum to 1 after renormalisation.
        assert_eq!(step.values[0], 1.0);
    }

    #[test]
    fn trust_updates() {
        let trust = TrustMatrix::complete(3).unwrap();
        let r = vec![vec![0.0, 10.0, 0.0]; 3];
        assert_eq!(update_trust(&trust, &r, 0.0).unwrap(), trust);
        let equal = vec![vec![2.0; 3]; 3];
        let same = update_trust(&trust, &equal, 1.0).unwrap();
        assert!(same.weights.iter().flatten().zip(trust.weights.iter().flatten()).all(|(a, b)| (a - b).abs() < 1e-15));
        let shrunk = update_trust(&trust, &r, 1.0).unwrap();
        let ratio = shrunk.weights[0][1] / shrunk.weights[0][0];
        assert!((ratio - (-10f64).exp()).abs() < 1e-15);
        assert!(shrunk.max_row_error() < 1e-9);
        assert!(update_trust(&trust, &vec![vec![-1.0; 3]; 3], 0.5).is_err());
        assert!(update_trust(&trust, &r, 1.5).is_err());
    }

    #[test]
    fn plain_average_and_fixed_point() {
        let values = [0.0, 1.0, 5.0];
        let trust = TrustMatrix::complete(3).unwrap();
        let step = resilient_consensus_step(&values, &complete_inbox(&values), &trust, &ResilienceConfig::naive()).unwrap();
        assert_eq!(step.values, vec![2.0; 3]);
        let flat = [4.5; 3];
        let step = resilient_consensus_step(&flat, &complete_inbox(&flat), &trust, &ResilienceConfig::naive()).unwrap();
        assert_eq!(step.values, vec![4.5; 3]);
    }

    #[test]
    fn trimming_removes_outlier() {
        let values = [0.0, 0.25, 0.5, 0.75, 1.0, 100.0];
        let trust = TrustMatrix::complete(6).unwrap();
        let cfg = ResilienceConfig { trim: 1, eta: 0.0, residual_scale: 1.0 };
        let step = resilient_consensus_step(&values, &complete_inbox(&values), &trust, &cfg).unwrap();
        assert!(step.values[..5].iter().all(|&v| (0.0..=1.0).contains(&v)));
        let tight = ResilienceConfig { trim: 3, ..cfg };
        assert!(resilient_consensus_step(&values, &complete_inbox(&values), &trust, &tight).is_err());
    }

    fn scenario() -> ConsensusScenario {
        ConsensusScenario { initial: vec![0.0, 0.25, 0.5, 0.75, 1.0, 0.5], neighbors: vec![(0..6).collect(); 6] }
    }

    #[test]
    fn nominal_equivalence() {
        let run = run_adversarial_consensus(&scenario(), &AdversaryModel::none(), &ResilienceConfig::naive(), 30, 0)
            .unwrap();
        assert_eq!(run.metrics.max_deviation, 0.0);
        let mut plain = vec![scenario().initial];
        for _ in 0..30 {
            let next = average_consensus_step(plain.last().unwrap(), &scenario().neighbors);
            plain.push(next);
        }
        assert_eq!(run.values, plain);
    }

    #[test]
    fn injection_against_naive_and_trimmed() {
        let adv = AdversaryModel { compromised: vec![5], attack: AttackKind::ConstantInjection(100.0), window: (0, 49) };
        let naive = run_adversarial_consensus(&scenario(), &adv, &ResilienceConfig::naive(), 50, 1).unwrap();
        assert!(naive.metrics.hull_exit.is_some());
        let cfg = ResilienceConfig { trim: 1, eta: 0.5, residual_scale: 1.0 };
        let defended = run_adversarial_consensus(&scenario(), &adv, &cfg, 50, 1).unwrap();
        assert_eq!(defended.metrics.hull_exit, None);
        assert!(defended.trust.max_row_error() < 1e-9);
    }
}
