//! Global coordination on top of local learning: information mechanisms,
//! admissible-set restrictions, coordinator updates, the two-time-scale loop,
//! Stackelberg signal selection, dynamic-game rollouts and merge-split
//! coalition dynamics.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::coop::{Coalition, CoalitionGame};
use crate::game::{enumerate_pure_nash, ActionProfile, StrategicGame};
use crate::incentives::{modified_payoff, IncentiveSchedule};
use crate::learning::{LearnerSpec, Simulator, StepRecord, Trace};
use crate::rng::{sample_index, substream};
use crate::{Error, Result, TOL};

/// Environment state `z_t` as labelled scalars.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemState {
    pub t: usize,
    pub labels: Vec<String>,
    pub values: Vec<f64>,
}

impl SystemState {
    pub fn new(t: usize, labels: Vec<String>, values: Vec<f64>) -> Result<Self> {
        if labels.len() != values.len() {
            return Err(Error::dims("one label per state entry"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::domain("state entries must be finite"));
        }
        Ok(SystemState { t, labels, values })
    }
}

/// Which parts of `(z, x, c)` reach the agents, and through which channel.
/// Observed state entries carry Gaussian noise of standard deviation
/// `noise_std`: one draw shared by the public channel, one per agent on the
/// private channel.
#[derive(Debug, Clone, PartialEq)]
pub struct InformationMechanism {
    pub public_state: bool,
    pub public_actions: bool,
    pub public_signal: bool,
    pub private_state: bool,
    pub private_own_action: bool,
    pub noise_std: f64,
}

impl InformationMechanism {
    /// Everything public, no noise.
    pub fn identity() -> Self {
        InformationMechanism {
            public_state: true,
            public_actions: true,
            public_signal: true,
            private_state: false,
            private_own_action: false,
            noise_std: 0.0,
        }
    }

    pub fn with_noise(mut self, noise_std: f64) -> Result<Self> {
        if !(noise_std >= 0.0 && noise_std.is_finite()) {
            return Err(Error::domain(format!("noise magnitude must be finite and nonnegative, got {noise_std}")));
        }
        self.noise_std = noise_std;
        Ok(self)
    }

    pub fn is_public_only(&self) -> bool {
        !self.private_state && !self.private_own_action
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PublicChannel {
    pub state: Option<Vec<f64>>,
    pub actions: Option<Vec<usize>>,
    pub signal: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InformationRecord {
    pub public: PublicChannel,
    pub private_state: Option<Vec<f64>>,
    pub own_action: Option<usize>,
}

/// One record per agent. With zero noise the generator is not touched.
pub fn generate_information<R: Rng + ?Sized>(
    mech: &InformationMechanism,
    state: &SystemState,
    actions: &[usize],
    signal: usize,
    noise: &mut R,
) -> Vec<InformationRecord> {
    let mut observe = |values: &[f64]| -> Vec<f64> {
        if mech.noise_std > 0.0 {
            let normal = Normal::new(0.0, mech.noise_std).expect("validated noise magnitude");
            values.iter().map(|v| v + normal.sample(noise)).collect()
        } else {
            values.to_vec()
        }
    };
    let public = PublicChannel {
        state: mech.public_state.then(|| observe(&state.values)),
        actions: mech.public_actions.then(|| actions.to_vec()),
        signal: mech.public_signal.then_some(signal),
    };
    (0..actions.len())
        .map(|i| InformationRecord {
            public: public.clone(),
            private_state: mech.private_state.then(|| observe(&state.values)),
            own_action: mech.private_own_action.then_some(actions[i]),
        })
        .collect()
}

/// `sets[signal][agent]`: admissible action indices, `None` for the full set.
#[derive(Debug, Clone, PartialEq)]
pub struct AdmissibleSetRule {
    sets: Vec<Vec<Option<Vec<usize>>>>,
}

impl AdmissibleSetRule {
    pub fn full(game: &StrategicGame) -> Self {
        AdmissibleSetRule { sets: vec![vec![None; game.num_agents()]; game.signals().len()] }
    }

    /// Restricts `agent` to `actions` under `signal`. Duplicates are dropped
    /// and the set is kept in ascending order.
    pub fn restrict(mut self, signal: usize, agent: usize, actions: &[usize]) -> Result<Self> {
        let slot = self
            .sets
            .get_mut(signal)
            .and_then(|s| s.get_mut(agent))
            .ok_or_else(|| Error::domain(format!("no agent {agent} under signal {signal}")))?;
        let mut set = actions.to_vec();
        set.sort_unstable();
        set.dedup();
        *slot = Some(set);
        Ok(self)
    }

    /// Admissible actions of every agent under `signal`.
    pub fn sets(&self, game: &StrategicGame, signal: usize) -> Result<Vec<Vec<usize>>> {
        game.check_signal(signal)?;
        if self.sets.len() != game.signals().len() || self.sets[signal].len() != game.num_agents() {
            return Err(Error::dims("admissible-set rule does not match the game"));
        }
        self.sets[signal]
            .iter()
            .enumerate()
            .map(|(i, s)| match s {
                None => Ok((0..game.num_actions(i)).collect()),
                Some(v) if v.is_empty() => Err(Error::domain(format!("agent {i} has an empty admissible set"))),
                Some(v) if v.iter().any(|&a| a >= game.num_actions(i)) => {
                    Err(Error::domain(format!("admissible set of agent {i} names an unknown action")))
                }
                Some(v) => Ok(v.clone()),
            })
            .collect()
    }

    /// Per-agent masks for a simulator; `None` wherever the set is full.
    pub fn masks(&self, game: &StrategicGame, signal: usize) -> Result<Vec<Option<Vec<bool>>>> {
        Ok(self
            .sets(game, signal)?
            .into_iter()
            .enumerate()
            .map(|(i, set)| {
                (set.len() < game.num_actions(i)).then(|| {
                    let mut m = vec![false; game.num_actions(i)];
                    set.iter().for_each(|&a| m[a] = true);
                    m
                })
            })
            .collect())
    }
}

/// A game cut down to admissible actions, with `actions[i][k]` the original
/// index of the restricted game's action `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct RestrictedGame {
    pub game: StrategicGame,
    pub actions: Vec<Vec<usize>>,
}

impl RestrictedGame {
    pub fn lift(&self, profile: &ActionProfile) -> ActionProfile {
        ActionProfile(profile.0.iter().enumerate().map(|(i, &k)| self.actions[i][k]).collect())
    }
}

/// Single-signal game over the admissible actions under `signal`.
pub fn apply_admissible_sets(rule: &AdmissibleSetRule, game: &StrategicGame, signal: usize) -> Result<RestrictedGame> {
    let sets = rule.sets(game, signal)?;
    let labels = sets
        .iter()
        .enumerate()
        .map(|(i, s)| s.iter().map(|&a| game.action_labels(i)[a].clone()).collect())
        .collect();
    let restricted = StrategicGame::from_fn(labels, vec![game.signals()[signal].clone()], |_, p| {
        let original: Vec<usize> = p.iter().enumerate().map(|(i, &k)| sets[i][k]).collect();
        game.payoffs_at(signal, game.profile_index(&original)).to_vec()
    })?;
    Ok(RestrictedGame { game: restricted, actions: sets })
}

/// Summary of one inner epoch.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochDigest {
    pub epoch: usize,
    pub signal: usize,
    pub mean_welfare: f64,
    pub mean_payoffs: Vec<f64>,
    /// Per-agent empirical action frequencies over the epoch.
    pub frequencies: Vec<Vec<f64>>,
    /// Joint profile frequencies over the epoch, indexed by profile.
    pub joint_frequencies: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum GreedyScore {
    /// Mean welfare of the most recent epoch run under each candidate;
    /// candidates never tried are explored first, in candidate order.
    Observed,
    /// Welfare each candidate would have produced on the last epoch's joint
    /// action frequencies, evaluated in the given game.
    Counterfactual(StrategicGame),
}

#[derive(Debug, Clone, PartialEq)]
pub enum CoordinatorKind {
    Constant,
    RoundRobin,
    Greedy(GreedyScore),
    /// Replays a fixed signal sequence (repeating), checked against the
    /// candidate set at every update.
    Scripted(Vec<usize>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoordinatorPolicy {
    pub kind: CoordinatorKind,
    /// Candidate signal indices.
    pub candidates: Vec<usize>,
    /// Agents subject to admissible sets and incentives; all when `None`.
    pub controlled: Option<Vec<usize>>,
}

impl CoordinatorPolicy {
    pub fn new(kind: CoordinatorKind, candidates: Vec<usize>) -> Result<Self> {
        if candidates.is_empty() {
            return Err(Error::domain("coordinator needs at least one candidate signal"));
        }
        Ok(CoordinatorPolicy { kind, candidates, controlled: None })
    }

    fn validate(&self, game: &StrategicGame) -> Result<()> {
        if self.candidates.is_empty() {
            return Err(Error::domain("coordinator needs at least one candidate signal"));
        }
        for &c in &self.candidates {
            game.check_signal(c)?;
        }
        if let Some(ctrl) = &self.controlled {
            if let Some(&i) = ctrl.iter().find(|&&i| i >= game.num_agents()) {
                return Err(Error::domain(format!("controlled agent {i} is not in the game")));
            }
        }
        if let CoordinatorKind::Greedy(GreedyScore::Counterfactual(w)) = &self.kind {
            if w.num_profiles() != game.num_profiles() || w.signals().len() != game.signals().len() {
                return Err(Error::dims("counterfactual welfare game does not match the game grid"));
            }
        }
        Ok(())
    }
}

/// `c_{t+1} = Q(H_t, c_t)`. `history` holds every completed epoch, oldest first.
pub fn coordinator_update(policy: &CoordinatorPolicy, history: &[EpochDigest], current: usize) -> Result<usize> {
    let cands = &policy.candidates;
    if cands.is_empty() {
        return Err(Error::domain("coordinator needs at least one candidate signal"));
    }
    let pos = cands.iter().position(|&c| c == current);
    let next = match &policy.kind {
        CoordinatorKind::Constant => current,
        CoordinatorKind::RoundRobin => {
            let p = pos.ok_or_else(|| Error::contract(format!("current signal {current} is not a candidate")))?;
            cands[(p + 1) % cands.len()]
        }
        CoordinatorKind::Greedy(score) => {
            let Some(last) = history.last() else {
                return Ok(current);
            };
            let scores: Vec<f64> = match score {
                GreedyScore::Observed => cands
                    .iter()
                    .map(|&c| {
                        history.iter().rev().find(|d| d.signal == c).map_or(f64::INFINITY, |d| d.mean_welfare)
                    })
                    .collect(),
                GreedyScore::Counterfactual(w) => {
                    if last.joint_frequencies.len() != w.num_profiles() {
                        return Err(Error::dims("epoch digest does not match the welfare game"));
                    }
                    cands
                        .iter()
                        .map(|&c| {
                            last.joint_frequencies
                                .iter()
                                .enumerate()
                                .filter(|(_, &f)| f > 0.0)
                                .map(|(p, &f)| f * w.welfare_at(c, p))
                                .sum()
                        })
                        .collect()
                }
            };
            let mut best = 0;
            for k in 1..cands.len() {
                if scores[k] > scores[best] {
                    best = k;
                }
            }
            cands[best]
        }
        CoordinatorKind::Scripted(seq) => {
            if seq.is_empty() {
                return Err(Error::domain("scripted coordinator has an empty sequence"));
            }
            seq[history.len() % seq.len()]
        }
    };
    if !cands.contains(&next) {
        return Err(Error::contract(format!("coordinator emitted signal {next} outside its candidate set")));
    }
    Ok(next)
}

#[derive(Debug, Clone)]
pub struct TwoTimescaleConfig {
    /// Game family indexed by signal.
    pub game: StrategicGame,
    pub learners: Vec<LearnerSpec>,
    pub coordinator: CoordinatorPolicy,
    pub initial_signal: usize,
    pub outer_steps: usize,
    pub epoch_len: usize,
    pub seed: u64,
    pub admissible: Option<AdmissibleSetRule>,
    pub incentives: Option<IncentiveSchedule>,
    /// Game whose welfare enters the epoch digest; the learning game by default.
    pub welfare: Option<StrategicGame>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TwoTimescaleTrace {
    /// Every fast step, in order; `t` counts across epochs.
    pub fast: Trace,
    /// One digest per epoch; `signal` is the signal in force during it.
    pub epochs: Vec<EpochDigest>,
    /// Signal chosen after each epoch.
    pub decisions: Vec<usize>,
}

/// `K` epochs of `T` learning steps each under a fixed signal, with one
/// coordinator update between epochs. Learning state and the random stream
/// carry over across epochs.
pub fn run_two_timescale(cfg: &TwoTimescaleConfig) -> Result<TwoTimescaleTrace> {
    if cfg.outer_steps == 0 || cfg.epoch_len == 0 {
        return Err(Error::domain("outer steps and epoch length must be at least 1"));
    }
    let game = &cfg.game;
    cfg.coordinator.validate(game)?;
    if !cfg.coordinator.candidates.contains(&cfg.initial_signal) {
        return Err(Error::domain(format!("initial signal {} is not a candidate", cfg.initial_signal)));
    }
    let n = game.num_agents();
    let controlled = |i: usize| cfg.coordinator.controlled.as_ref().is_none_or(|c| c.contains(&i));
    let learning_game = match &cfg.incentives {
        Some(s) => {
            if s.num_agents() != n || s.num_profiles() != game.num_profiles() {
                return Err(Error::dims("incentive schedule is not defined on the game's profile grid"));
            }
            let masked = IncentiveSchedule::from_fn(game, |x, i| {
                if controlled(i) {
                    s.get(game.profile_index(&x.0), i)
                } else {
                    0.0
                }
            })?;
            modified_payoff(game, &masked)?
        }
        None => game.clone(),
    };
    let welfare = cfg.welfare.as_ref().unwrap_or(&learning_game);
    if welfare.num_profiles() != game.num_profiles() || welfare.signals().len() != game.signals().len() {
        return Err(Error::dims("welfare game does not match the game grid"));
    }

    let mut sim = Simulator::new(&learning_game, cfg.learners.clone(), cfg.seed)?;
    let mut signal = cfg.initial_signal;
    let mut steps: Vec<StepRecord> = Vec::with_capacity(cfg.outer_steps * cfg.epoch_len);
    let mut epochs = Vec::with_capacity(cfg.outer_steps);
    let mut decisions = Vec::with_capacity(cfg.outer_steps);
    for k in 0..cfg.outer_steps {
        if let Some(rule) = &cfg.admissible {
            let masks = rule
                .masks(game, signal)?
                .into_iter()
                .enumerate()
                .map(|(i, m)| if controlled(i) { m } else { None })
                .collect();
            sim.set_admissible(masks)?;
        }
        let mut welfare_sum = 0.0;
        let mut payoff_sum = vec![0.0; n];
        let mut counts: Vec<Vec<u64>> = (0..n).map(|i| vec![0; game.num_actions(i)]).collect();
        let mut joint = vec![0u64; game.num_profiles()];
        for _ in 0..cfg.epoch_len {
            let rec = sim.step(&learning_game, signal)?;
            let idx = game.profile_index(&rec.actions);
            welfare_sum += welfare.welfare_at(signal, idx);
            for i in 0..n {
                payoff_sum[i] += rec.payoffs[i];
                counts[i][rec.actions[i]] += 1;
            }
            joint[idx] += 1;
            steps.push(rec);
        }
        let t = cfg.epoch_len as f64;
        epochs.push(EpochDigest {
            epoch: k,
            signal,
            mean_welfare: welfare_sum / t,
            mean_payoffs: payoff_sum.iter().map(|v| v / t).collect(),
            frequencies: counts.iter().map(|c| c.iter().map(|&x| x as f64 / t).collect()).collect(),
            joint_frequencies: joint.iter().map(|&x| x as f64 / t).collect(),
        });
        signal = coordinator_update(&cfg.coordinator, &epochs, signal)?;
        decisions.push(signal);
    }
    Ok(TwoTimescaleTrace { fast: Trace { seed: cfg.seed, steps }, epochs, decisions })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SelectionMode {
    Optimistic,
    Pessimistic,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CandidateValue {
    pub signal: usize,
    /// `None` when the follower game has no pure equilibrium.
    pub value: Option<f64>,
    pub equilibrium: Option<ActionProfile>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum StackelbergOutcome {
    Solved { signal: usize, value: f64, equilibrium: ActionProfile, candidates: Vec<CandidateValue> },
    /// Every candidate's follower game lacks a pure equilibrium.
    NoSolution,
}

/// For each candidate `c`, the follower equilibria `E(c)` are the pure Nash
/// equilibria under `c`; the leader values `c` at the best (optimistic) or
/// worst (pessimistic) `J_0(c, x)` over `E(c)` and picks the best `c`.
/// Ties keep the earlier candidate and the lexicographically first equilibrium.
pub fn stackelberg_solve(
    game: &StrategicGame,
    candidates: &[usize],
    leader: impl Fn(usize, &ActionProfile) -> f64,
    mode: SelectionMode,
) -> Result<StackelbergOutcome> {
    if candidates.is_empty() {
        return Err(Error::domain("stackelberg design needs at least one candidate"));
    }
    let mut evaluated = Vec::with_capacity(candidates.len());
    for &c in candidates {
        let eqs = enumerate_pure_nash(game, c)?;
        let mut pick: Option<(f64, ActionProfile)> = None;
        for x in eqs {
            let v = leader(c, &x);
            let better = match (&pick, mode) {
                (None, _) => true,
                (Some((b, _)), SelectionMode::Optimistic) => v > *b,
                (Some((b, _)), SelectionMode::Pessimistic) => v < *b,
            };
            if better {
                pick = Some((v, x));
            }
        }
        if pick.is_none() {
            log::warn!("candidate signal {:?} has no pure follower equilibrium; skipped", game.signals()[c]);
        }
        evaluated.push(CandidateValue {
            signal: c,
            value: pick.as_ref().map(|p| p.0),
            equilibrium: pick.map(|p| p.1),
        });
    }
    let best = evaluated
        .iter()
        .filter(|e| e.value.is_some())
        .fold(None::<&CandidateValue>, |acc, e| match acc {
            Some(a) if a.value >= e.value => Some(a),
            _ => Some(e),
        })
        .cloned();
    Ok(match best {
        Some(CandidateValue { signal, value: Some(value), equilibrium: Some(equilibrium) }) => {
            StackelbergOutcome::Solved { signal, value, equilibrium, candidates: evaluated }
        }
        _ => StackelbergOutcome::NoSolution,
    })
}

/// Finite-state dynamic game: payoffs `J_i(z, x)` read from `stage` with the
/// state as signal, transitions `transitions[z][profile]` as distributions
/// over next states.
#[derive(Debug, Clone, PartialEq)]
pub struct DynamicGame {
    pub stage: StrategicGame,
    pub transitions: Vec<Vec<Vec<f64>>>,
    pub initial: usize,
}

impl DynamicGame {
    pub fn new(stage: StrategicGame, transitions: Vec<Vec<Vec<f64>>>, initial: usize) -> Result<Self> {
        let states = stage.signals().len();
        stage.check_signal(initial)?;
        if transitions.len() != states {
            return Err(Error::dims(format!("{} transition tables for {states} states", transitions.len())));
        }
        for (z, rows) in transitions.iter().enumerate() {
            if rows.len() != stage.num_profiles() {
                return Err(Error::dims(format!("state {z} has {} transition rows", rows.len())));
            }
            for row in rows {
                let s: f64 = row.iter().sum();
                if row.len() != states || row.iter().any(|&p| !(p >= 0.0)) || (s - 1.0).abs() > 1e-9 {
                    return Err(Error::domain(format!("transition row of state {z} is not a distribution")));
                }
            }
        }
        Ok(DynamicGame { stage, transitions, initial })
    }

    /// Transitions that ignore actions: `by_state[z]` is the next-state law.
    pub fn action_independent(stage: StrategicGame, by_state: Vec<Vec<f64>>, initial: usize) -> Result<Self> {
        let p = stage.num_profiles();
        let transitions = by_state.into_iter().map(|row| vec![row; p]).collect();
        Self::new(stage, transitions, initial)
    }

    pub fn num_states(&self) -> usize {
        self.stage.signals().len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum RolloutPolicy {
    /// Action per current state.
    Feedback(Vec<usize>),
    /// Action per period given only the initial state; the last entry repeats.
    OpenLoop(Vec<usize>),
}

impl RolloutPolicy {
    fn action(&self, t: usize, state: usize) -> usize {
        match self {
            RolloutPolicy::Feedback(by_state) => by_state[state],
            RolloutPolicy::OpenLoop(plan) => plan[t.min(plan.len() - 1)],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RolloutReport {
    pub mean: Vec<f64>,
    pub std_error: Vec<f64>,
    pub horizon: usize,
    /// `beta^H max|J_i| / (1 - beta)` per agent.
    pub truncation_bound: Vec<f64>,
    pub runs: usize,
}

/// Shortest horizon whose tail weight `beta^H / (1 - beta)` is below `1e-7`
/// for every agent.
pub fn default_horizon(discounts: &[f64]) -> usize {
    let b = discounts.iter().copied().fold(0.0, f64::max);
    if b <= 0.0 {
        return 1;
    }
    ((1e-7 * (1.0 - b)).ln() / b.ln()).floor() as usize + 1
}

/// Monte-Carlo mean of `sum_t beta_i^t J_i(z_t, x_t)` over `runs` rollouts;
/// run `r` draws from substream `r` of `seed`.
pub fn rollout_dynamic_game(
    dynamic: &DynamicGame,
    policies: &[RolloutPolicy],
    discounts: &[f64],
    horizon: Option<usize>,
    seed: u64,
    runs: usize,
) -> Result<RolloutReport> {
    let n = dynamic.stage.num_agents();
    if policies.len() != n || discounts.len() != n {
        return Err(Error::dims(format!("need one policy and one discount per agent ({n})")));
    }
    if let Some(b) = discounts.iter().find(|&&b| !(b > 0.0 && b < 1.0)) {
        return Err(Error::domain(format!("discount {b} outside (0, 1)")));
    }
    if runs == 0 {
        return Err(Error::domain("at least one rollout is required"));
    }
    for (i, p) in policies.iter().enumerate() {
        let (acts, what) = match p {
            RolloutPolicy::Feedback(v) if v.len() != dynamic.num_states() => {
                return Err(Error::dims(format!("feedback policy of agent {i} must list one action per state")));
            }
            RolloutPolicy::Feedback(v) => (v, "feedback"),
            RolloutPolicy::OpenLoop(v) if v.is_empty() => {
                return Err(Error::domain(format!("open-loop plan of agent {i} is empty")));
            }
            RolloutPolicy::OpenLoop(v) => (v, "open-loop"),
        };
        if acts.iter().any(|&a| a >= dynamic.stage.num_actions(i)) {
            return Err(Error::domain(format!("{what} policy of agent {i} names an unknown action")));
        }
    }
    let horizon = horizon.unwrap_or_else(|| default_horizon(discounts));
    let mut samples: Vec<Vec<f64>> = vec![Vec::with_capacity(runs); n];
    let mut profile = vec![0; n];
    for r in 0..runs {
        let mut rng = substream(seed, r as u64);
        let mut z = dynamic.initial;
        let mut total = vec![0.0; n];
        let mut weight = vec![1.0; n];
        for t in 0..horizon {
            for (i, p) in policies.iter().enumerate() {
                profile[i] = p.action(t, z);
            }
            let idx = dynamic.stage.profile_index(&profile);
            for i in 0..n {
                total[i] += weight[i] * dynamic.stage.payoff_at(z, idx, i);
                weight[i] *= discounts[i];
            }
            z = sample_index(&mut rng, &dynamic.transitions[z][idx]);
        }
        for i in 0..n {
            samples[i].push(total[i]);
        }
    }
    let mean: Vec<f64> = samples.iter().map(|s| s.iter().sum::<f64>() / runs as f64).collect();
    let std_error = samples
        .iter()
        .zip(&mean)
        .map(|(s, m)| {
            if runs < 2 {
                0.0
            } else {
                let var = s.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (runs - 1) as f64;
                (var / runs as f64).sqrt()
            }
        })
        .collect();
    let truncation_bound = (0..n)
        .map(|i| {
            let top = (0..dynamic.num_states())
                .flat_map(|z| (0..dynamic.stage.num_profiles()).map(move |p| (z, p)))
                .map(|(z, p)| dynamic.stage.payoff_at(z, p, i).abs())
                .fold(0.0, f64::max);
            discounts[i].powi(horizon as i32) * top / (1.0 - discounts[i])
        })
        .collect();
    Ok(RolloutReport { mean, std_error, horizon, truncation_bound, runs })
}

/// Partition of the agents into coalitions, blocks sorted by bitmask.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CoalitionStructure {
    blocks: Vec<Coalition>,
}

impl CoalitionStructure {
    pub fn new(agents: usize, mut blocks: Vec<Coalition>) -> Result<Self> {
        if agents >= Coalition::BITS as usize {
            return Err(Error::capacity(format!("coalition structures support fewer than {} agents", Coalition::BITS)));
        }
        let grand: Coalition = (1 << agents) - 1;
        let mut seen: Coalition = 0;
        for &b in &blocks {
            if b == 0 {
                return Err(Error::domain("coalition structure has an empty block"));
            }
            if b & !grand != 0 {
                return Err(Error::domain(format!("block {b:#b} names agents outside the game")));
            }
            if b & seen != 0 {
                return Err(Error::domain("coalition structure blocks overlap"));
            }
            seen |= b;
        }
        if seen != grand {
            return Err(Error::domain("coalition structure does not cover every agent"));
        }
        blocks.sort_unstable();
        Ok(CoalitionStructure { blocks })
    }

    pub fn singletons(agents: usize) -> Result<Self> {
        Self::new(agents, (0..agents).map(|i| 1 << i).collect())
    }

    pub fn blocks(&self) -> &[Coalition] {
        &self.blocks
    }

    pub fn total_value(&self, game: &CoalitionGame) -> f64 {
        self.blocks.iter().map(|&b| game.value(b)).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EvolutionRule {
    #[default]
    GreedyMergeSplit,
}

/// One merge-split move; the structure is returned unchanged at a fixed point.
pub fn evolve_coalitions(
    structure: &CoalitionStructure,
    game: &CoalitionGame,
    rule: EvolutionRule,
) -> Result<CoalitionStructure> {
    let EvolutionRule::GreedyMergeSplit = rule;
    let n = game.num_agents();
    let s = CoalitionStructure::new(n, structure.blocks.clone())?;
    let v = |c: Coalition| game.value(c);

    let mut merge: Option<(f64, usize, usize)> = None;
    for a in 0..s.blocks.len() {
        for b in a + 1..s.blocks.len() {
            let (x, y) = (s.blocks[a], s.blocks[b]);
            let gain = v(x | y) - v(x) - v(y);
            if gain > TOL && merge.is_none_or(|(g, _, _)| gain > g) {
                merge = Some((gain, a, b));
            }
        }
    }
    if let Some((_, a, b)) = merge {
        let mut blocks = s.blocks.clone();
        let merged = blocks[a] | blocks[b];
        blocks.remove(b);
        blocks[a] = merged;
        return CoalitionStructure::new(n, blocks);
    }

    let mut split: Option<(f64, usize, Coalition)> = None;
    for (k, &block) in s.blocks.iter().enumerate() {
        let low = block & block.wrapping_neg();
        // Submasks containing the lowest member, excluding the block itself.
        let rest = block & !low;
        let mut sub = rest;
        let mut parts = Vec::new();
        loop {
            sub = sub.wrapping_sub(1) & rest;
            if sub == rest {
                break;
            }
            parts.push(sub | low);
            if sub == 0 {
                break;
            }
        }
        parts.sort_unstable();
        for part in parts {
            let gain = v(part) + v(block & !part) - v(block);
            if gain > TOL && split.is_none_or(|(g, _, _)| gain > g) {
                split = Some((gain, k, part));
            }
        }
    }
    if let Some((_, k, part)) = split {
        let mut blocks = s.blocks.clone();
        let block = blocks[k];
        blocks[k] = part;
        blocks.push(block & !part);
        return CoalitionStructure::new(n, blocks);
    }
    Ok(s)
}

/// Applies [`evolve_coalitions`] until a fixed point or `max_moves` moves.
/// Returns the visited structures (starting one first) and whether the last
/// one is a fixed point.
pub fn evolve_to_fixed_point(
    start: &CoalitionStructure,
    game: &CoalitionGame,
    rule: EvolutionRule,
    max_moves: usize,
) -> Result<(Vec<CoalitionStructure>, bool)> {
    let mut path = vec![CoalitionStructure::new(game.num_agents(), start.blocks.clone())?];
    for _ in 0..max_moves {
        let last = path.last().expect("nonempty");
        let next = evolve_coalitions(last, game, rule)?;
        if &next == last {
            return Ok((path, true));
        }
        path.push(next);
    }
    let last = path.last().expect("nonempty");
    let fixed = &evolve_coalitions(last, game, rule)? == last;
    Ok((path, fixed))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learning::{run_dynamics, LearnerKind, RateSchedule, SignalSchedule};
    use crate::rng::seeded;
    use crate::templates;

    fn state() -> SystemState {
        SystemState::new(3, vec!["load".into(), "price".into()], vec![0.5, 2.0]).unwrap()
    }

    #[test]
    fn identity_information() {
        let recs = generate_information(&InformationMechanism::identity(), &state(), &[1, 0], 1, &mut seeded(0));
        assert_eq!(recs.len(), 2);
        for r in recs {
            assert_eq!(r.public.state, Some(vec![0.5, 2.0]));
            assert_eq!(r.public.actions, Some(vec![1, 0]));
            assert_eq!(r.public.signal, Some(1));
        }
    }

    #[test]
    fn public_only_records_agree() {
        let mech = InformationMechanism::identity().with_noise(0.3).unwrap();
        let recs = generate_information(&mech, &state(), &[0, 1, 1], 0, &mut seeded(9));
        assert!(recs.windows(2).all(|w| w[0] == w[1]));
        assert_ne!(recs[0].public.state, Some(vec![0.5, 2.0]));
    }

    #[test]
    fn noisy_private_records_reproduce() {
        let mech = InformationMechanism { private_state: true, private_own_action: true, ..InformationMechanism::identity() }
            .with_noise(1.0)
            .unwrap();
        let a = generate_information(&mech, &state(), &[0, 1], 0, &mut seeded(4));
        let b = generate_information(&mech, &state(), &[0, 1], 0, &mut seeded(4));
        assert_eq!(a, b);
        assert_ne!(a[0].private_state, a[1].private_state);
        assert_eq!(a[1].own_action, Some(1));
        assert!(InformationMechanism::identity().with_noise(-1.0).is_err());
    }

    #[test]
    fn admissible_sets() {
        let pd = templates::prisoners_dilemma();
        let full = apply_admissible_sets(&AdmissibleSetRule::full(&pd), &pd, 0).unwrap();
        assert_eq!(full.game, pd);

        let rule = AdmissibleSetRule::full(&pd).restrict(0, 0, &[0]).unwrap().restrict(0, 1, &[0]).unwrap();
        let r = apply_admissible_sets(&rule, &pd, 0).unwrap();
        assert_eq!(r.game.num_profiles(), 1);
        let eq = enumerate_pure_nash(&r.game, 0).unwrap();
        assert_eq!(eq.len(), 1);
        assert_eq!(r.lift(&eq[0]), ActionProfile::new(vec![0, 0]));

        let empty = AdmissibleSetRule::full(&pd).restrict(0, 1, &[]).unwrap();
        assert!(matches!(apply_admissible_sets(&empty, &pd, 0), Err(Error::Domain(_))));
    }

    #[test]
    fn removing_dominated_action_keeps_equilibria() {
        let pd = templates::prisoners_dilemma();
        let rule = AdmissibleSetRule::full(&pd).restrict(0, 0, &[1]).unwrap();
        let r = apply_admissible_sets(&rule, &pd, 0).unwrap();
        let lifted: Vec<_> = enumerate_pure_nash(&r.game, 0).unwrap().iter().map(|x| r.lift(x)).collect();
        assert_eq!(lifted, enumerate_pure_nash(&pd, 0).unwrap());
    }

    fn digest(signal: usize, welfare: f64) -> EpochDigest {
        EpochDigest {
            epoch: 0,
            signal,
            mean_welfare: welfare,
            mean_payoffs: vec![],
            frequencies: vec![],
            joint_frequencies: vec![0.25; 4],
        }
    }

    #[test]
    fn constant_and_round_robin() {
        let c = CoordinatorPolicy::new(CoordinatorKind::Constant, vec![0, 1, 2]).unwrap();
        assert_eq!(coordinator_update(&c, &[digest(1, 0.0)], 1).unwrap(), 1);
        let rr = CoordinatorPolicy::new(CoordinatorKind::RoundRobin, vec![0, 1, 2]).unwrap();
        let mut s = 0;
        let mut seq = vec![];
        for _ in 0..6 {
            s = coordinator_update(&rr, &[], s).unwrap();
            seq.push(s);
        }
        assert_eq!(seq, vec![1, 2, 0, 1, 2, 0]);
    }

    #[test]
    fn scripted_out_of_set_is_contract_violation() {
        let p = CoordinatorPolicy::new(CoordinatorKind::Scripted(vec![1, 5]), vec![0, 1]).unwrap();
        assert_eq!(coordinator_update(&p, &[], 0).unwrap(), 1);
        assert!(matches!(coordinator_update(&p, &[digest(1, 0.0)], 1), Err(Error::Contract(_))));
    }

    fn two_signal_game() -> StrategicGame {
        let a = vec!["a".to_string(), "b".to_string()];
        StrategicGame::from_fn(vec![a.clone(), a], vec!["c1".into(), "c2".into()], |s, x| {
            let base = (x[0] + 2 * x[1]) as f64;
            vec![base + s as f64 * 10.0, 1.0 + s as f64]
        })
        .unwrap()
    }

    #[test]
    fn greedy_locks_onto_better_signal() {
        let g = two_signal_game();
        for score in [GreedyScore::Observed, GreedyScore::Counterfactual(g.clone())] {
            let cfg = TwoTimescaleConfig {
                game: g.clone(),
                learners: vec![LearnerSpec::new(LearnerKind::SmoothedBestResponse); 2],
                coordinator: CoordinatorPolicy::new(CoordinatorKind::Greedy(score), vec![0, 1]).unwrap(),
                initial_signal: 0,
                outer_steps: 6,
                epoch_len: 20,
                seed: 3,
                admissible: None,
                incentives: None,
                welfare: None,
            };
            let out = run_two_timescale(&cfg).unwrap();
            assert_eq!(out.decisions, vec![1; 6]);
        }
    }

    #[test]
    fn single_epoch_matches_plain_dynamics() {
        let g = templates::matching_pennies();
        let learners = vec![
            LearnerSpec::new(LearnerKind::SmoothedBestResponse)
                .with_rates(RateSchedule::Harmonic, RateSchedule::Constant(0.2));
            2
        ];
        let cfg = TwoTimescaleConfig {
            game: g.clone(),
            learners: learners.clone(),
            coordinator: CoordinatorPolicy::new(CoordinatorKind::Constant, vec![0]).unwrap(),
            initial_signal: 0,
            outer_steps: 1,
            epoch_len: 300,
            seed: 11,
            admissible: Some(AdmissibleSetRule::full(&g)),
            incentives: None,
            welfare: None,
        };
        let tt = run_two_timescale(&cfg).unwrap();
        let plain = run_dynamics(&g, &learners, 300, 11, &SignalSchedule::Constant(0)).unwrap();
        assert_eq!(tt.fast, plain);
    }

    fn multiplicity_fixture() -> (StrategicGame, Vec<f64>) {
        // Signal 0 is a coordination game (two equilibria); signal 1 a PD.
        let a = vec!["x".to_string(), "y".to_string()];
        let g = StrategicGame::new(
            vec![a.clone(), a],
            vec!["c1".into(), "c2".into()],
            vec![
                vec![vec![1.0, 1.0], vec![0.0, 0.0], vec![0.0, 0.0], vec![1.0, 1.0]],
                vec![vec![3.0, 3.0], vec![0.0, 5.0], vec![5.0, 0.0], vec![1.0, 1.0]],
            ],
        )
        .unwrap();
        (g, vec![5.0, 0.0, 0.0, 1.0])
    }

    #[test]
    fn stackelberg_modes() {
        let (g, table) = multiplicity_fixture();
        let leader = |c: usize, x: &ActionProfile| if c == 0 { table[x.0[0] * 2 + x.0[1]] } else { 3.0 };
        let opt = stackelberg_solve(&g, &[0, 1], leader, SelectionMode::Optimistic).unwrap();
        let pes = stackelberg_solve(&g, &[0, 1], leader, SelectionMode::Pessimistic).unwrap();
        match (opt, pes) {
            (
                StackelbergOutcome::Solved { signal: s1, value: v1, equilibrium: e1, .. },
                StackelbergOutcome::Solved { signal: s2, value: v2, .. },
            ) => {
                assert_eq!((s1, v1, e1), (0, 5.0, ActionProfile::new(vec![0, 0])));
                assert_eq!((s2, v2), (1, 3.0));
            }
            _ => panic!("both modes should solve"),
        }
        let flat = stackelberg_solve(&g, &[1, 0], |_, _| 7.0, SelectionMode::Optimistic).unwrap();
        assert!(matches!(flat, StackelbergOutcome::Solved { signal: 1, .. }));
    }

    #[test]
    fn stackelberg_without_equilibria() {
        let g = templates::matching_pennies();
        assert_eq!(
            stackelberg_solve(&g, &[0], |_, _| 1.0, SelectionMode::Optimistic).unwrap(),
            StackelbergOutcome::NoSolution
        );
    }

    fn one_agent_states(payoffs: &[f64]) -> StrategicGame {
        let signals = (0..payoffs.len()).map(|z| format!("z{z}")).collect();
        StrategicGame::new(vec![vec!["stay".into()]], signals, payoffs.iter().map(|&p| vec![vec![p]]).collect())
            .unwrap()
    }

    #[test]
    fn rollout_geometric_series() {
        let dg = DynamicGame::action_independent(one_agent_states(&[1.0]), vec![vec![1.0]], 0).unwrap();
        let r = rollout_dynamic_game(&dg, &[RolloutPolicy::Feedback(vec![0])], &[0.5], None, 0, 1).unwrap();
        assert!((r.mean[0] - 2.0).abs() <= r.truncation_bound[0] + 1e-15);
        assert!(r.truncation_bound[0] < 1e-5);

        let zero = DynamicGame::action_independent(one_agent_states(&[0.0]), vec![vec![1.0]], 0).unwrap();
        let r = rollout_dynamic_game(&zero, &[RolloutPolicy::OpenLoop(vec![0])], &[0.99], None, 0, 3).unwrap();
        assert_eq!(r.mean[0], 0.0);
    }

    #[test]
    fn rollout_alternating_chain() {
        let dg = DynamicGame::action_independent(
            one_agent_states(&[1.0, 0.0]),
            vec![vec![0.0, 1.0], vec![1.0, 0.0]],
            0,
        )
        .unwrap();
        let r = rollout_dynamic_game(&dg, &[RolloutPolicy::Feedback(vec![0, 0])], &[0.5], None, 1, 2).unwrap();
        assert!((r.mean[0] - 4.0 / 3.0).abs() < 1e-6);
        assert_eq!(r.std_error[0], 0.0);
        assert!(rollout_dynamic_game(&dg, &[RolloutPolicy::Feedback(vec![0, 0])], &[1.0], None, 1, 2).is_err());
    }

    #[test]
    fn merge_split_examples() {
        let game = templates::pairwise_synergy_game();
        let (path, fixed) =
            evolve_to_fixed_point(&CoalitionStructure::singletons(3).unwrap(), &game, EvolutionRule::default(), 8)
                .unwrap();
        assert!(fixed);
        assert_eq!(path.len(), 3);
        assert_eq!(path[1].blocks(), &[0b011, 0b100]);
        assert_eq!(path[2].blocks(), &[0b111]);

        let additive = CoalitionGame::from_fn(3, |m| m.count_ones() as f64).unwrap();
        let singles = CoalitionStructure::singletons(3).unwrap();
        assert_eq!(evolve_coalitions(&singles, &additive, EvolutionRule::default()).unwrap(), singles);

        let grand = CoalitionStructure::new(3, vec![0b111]).unwrap();
        let maj = templates::majority_game();
        assert_eq!(evolve_coalitions(&grand, &maj, EvolutionRule::default()).unwrap(), grand);
    }

    #[test]
    fn split_when_grand_is_worse() {
        let g = CoalitionGame::from_fn(2, |m| if m == 0b11 || m == 0 { 0.0 } else { 1.0 }).unwrap();
        let grand = CoalitionStructure::new(2, vec![0b11]).unwrap();
        let next = evolve_coalitions(&grand, &g, EvolutionRule::default()).unwrap();
        assert_eq!(next.blocks(), &[0b01, 0b10]);
    }

    #[test]
    fn invalid_structures() {
        assert!(CoalitionStructure::new(3, vec![0b011, 0b110]).is_err());
        assert!(CoalitionStructure::new(3, vec![0b011]).is_err());
        assert!(CoalitionStructure::new(3, vec![0b011, 0, 0b100]).is_err());
    }
}
