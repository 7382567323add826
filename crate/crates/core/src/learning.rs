//! Local feedback learning.
//!
//! Each agent keeps a policy `pi` over its actions and a payoff estimate `q`.
//! One step samples a joint action from the policies, evaluates payoffs, then
//! per agent moves `q` toward a kind-specific target with rate `mu_t` and
//! moves `pi` toward a kind-specific response with rate `lambda_t`:
//!
//! ```text
//! q <- (1 - mu) q + mu G(q, observation)
//! pi <- (1 - lambda) pi + lambda Psi(pi, q)
//! ```
//!
//! Targets by kind: payoff estimation overwrites only the realized action's
//! coordinate with the realized payoff; fictitious play uses expected payoffs
//! against the empirical frequencies of the observed opponent actions; the
//! best-response, smoothed and replicator kinds use the payoff of every own
//! action against the opponents' observed actions.

use rand::Rng;

use crate::game::{argmax_first, mixed_nash_gap, ActionProfile, MixedProfile, StrategicGame};
use crate::rng::{sample_index, seeded, SimRng};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LearnerKind {
    BestResponse,
    SmoothedBestResponse,
    FictitiousPlay,
    Replicator,
    PayoffEstimation,
}

impl LearnerKind {
    pub const ALL: [LearnerKind; 5] = [
        LearnerKind::BestResponse,
        LearnerKind::SmoothedBestResponse,
        LearnerKind::FictitiousPlay,
        LearnerKind::Replicator,
        LearnerKind::PayoffEstimation,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            LearnerKind::BestResponse => "best-response",
            LearnerKind::SmoothedBestResponse => "smoothed-best-response",
            LearnerKind::FictitiousPlay => "fictitious-play",
            LearnerKind::Replicator => "replicator",
            LearnerKind::PayoffEstimation => "payoff-estimation",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == name)
    }
}

/// Step-size schedule evaluated at the 1-based step number.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RateSchedule {
    Constant(f64),
    /// `1 / t`.
    Harmonic,
}

impl RateSchedule {
    pub fn at(&self, step: usize) -> f64 {
        match *self {
            RateSchedule::Constant(r) => r,
            RateSchedule::Harmonic => 1.0 / step.max(1) as f64,
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            RateSchedule::Constant(r) if !(0.0..=1.0).contains(&r) => {
                Err(Error::domain(format!("rate {r} outside [0, 1]")))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LearnerSpec {
    pub kind: LearnerKind,
    pub payoff_rate: RateSchedule,
    pub policy_rate: RateSchedule,
    /// Softmax temperature; only read by the smoothed kind.
    pub temperature: f64,
    /// Uniform when absent.
    pub initial_policy: Option<Vec<f64>>,
}

impl LearnerSpec {
    /// Full-step defaults: `mu = lambda = 1`.
    pub fn new(kind: LearnerKind) -> Self {
        LearnerSpec {
            kind,
            payoff_rate: RateSchedule::Constant(1.0),
            policy_rate: RateSchedule::Constant(1.0),
            temperature: 1.0,
            initial_policy: None,
        }
    }

    pub fn with_rates(mut self, payoff_rate: RateSchedule, policy_rate: RateSchedule) -> Self {
        self.payoff_rate = payoff_rate;
        self.policy_rate = policy_rate;
        self
    }

    pub fn with_temperature(mut self, temperature: f64) -> Self {
        self.temperature = temperature;
        self
    }

    pub fn with_initial_policy(mut self, policy: Vec<f64>) -> Self {
        self.initial_policy = Some(policy);
        self
    }

    fn validate(&self, actions: usize) -> Result<()> {
        self.payoff_rate.validate()?;
        self.policy_rate.validate()?;
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return Err(Error::domain(format!("temperature must be positive, got {}", self.temperature)));
        }
        if let Some(p) = &self.initial_policy {
            if p.len() != actions {
                return Err(Error::dims(format!("initial policy has {} entries for {actions} actions", p.len())));
            }
            let s: f64 = p.iter().sum();
            if p.iter().any(|&v| !(v >= 0.0)) || (s - 1.0).abs() > 1e-9 {
                return Err(Error::domain("initial policy is not a probability vector"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentState {
    pub policy: Vec<f64>,
    pub estimate: Vec<f64>,
    /// `counts[j][a]`: times opponent `j` was observed playing `a` (own row empty).
    pub counts: Vec<Vec<u64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LearningState {
    pub agents: Vec<AgentState>,
    /// Completed steps.
    pub t: usize,
}

impl LearningState {
    pub fn initial(game: &StrategicGame, specs: &[LearnerSpec]) -> Result<Self> {
        let n = game.num_agents();
        if specs.len() != n {
            return Err(Error::dims(format!("{} learners for {n} agents", specs.len())));
        }
        let agents = specs
            .iter()
            .enumerate()
            .map(|(i, spec)| {
                let k = game.num_actions(i);
                spec.validate(k)?;
                Ok(AgentState {
                    policy: spec.initial_policy.clone().unwrap_or_else(|| vec![1.0 / k as f64; k]),
                    estimate: vec![0.0; k],
                    counts: (0..n).map(|j| if j == i { Vec::new() } else { vec![0; game.num_actions(j)] }).collect(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(LearningState { agents, t: 0 })
    }
}

/// What the payoff estimate moves toward.
#[derive(Debug, Clone, Copy)]
pub enum PayoffTarget<'a> {
    /// Only the realized action's coordinate changes.
    Realized { action: usize, payoff: f64 },
    /// Every coordinate moves toward the given vector.
    Vector(&'a [f64]),
}

pub fn step_payoff_estimate(estimate: &[f64], target: PayoffTarget<'_>, rate: f64) -> Result<Vec<f64>> {
    if !(0.0..=1.0).contains(&rate) {
        return Err(Error::domain(format!("payoff-learning rate {rate} outside [0, 1]")));
    }
    let mut q = estimate.to_vec();
    match target {
        PayoffTarget::Realized { action, payoff } => {
            let slot = q.get_mut(action).ok_or_else(|| Error::domain(format!("action {action} out of range")))?;
            *slot = (1.0 - rate) * *slot + rate * payoff;
        }
        PayoffTarget::Vector(g) => {
            if g.len() != q.len() {
                return Err(Error::dims("target and estimate lengths differ"));
            }
            for (x, &y) in q.iter_mut().zip(g) {
                *x = (1.0 - rate) * *x + rate * y;
            }
        }
    }
    Ok(q)
}

/// Policy response `Psi` for `kind` computed from `values` (the payoff
/// estimate, or for fictitious play the empirical-frequency expectations),
/// restricted to `allowed` actions when a mask is given.
pub fn policy_response(
    kind: LearnerKind,
    policy: &[f64],
    values: &[f64],
    temperature: f64,
    allowed: Option<&[bool]>,
) -> Vec<f64> {
    let k = values.len();
    let ok = |a: usize| allowed.is_none_or(|m| m[a]);
    match kind {
        LearnerKind::BestResponse | LearnerKind::FictitiousPlay | LearnerKind::PayoffEstimation => {
            let masked: Vec<f64> = (0..k).map(|a| if ok(a) { values[a] } else { f64::NEG_INFINITY }).collect();
            let mut out = vec![0.0; k];
            out[argmax_first(&masked)] = 1.0;
            out
        }
        LearnerKind::SmoothedBestResponse => {
            let top = (0..k).filter(|&a| ok(a)).map(|a| values[a]).fold(f64::NEG_INFINITY, f64::max);
            let w: Vec<f64> =
                (0..k).map(|a| if ok(a) { ((values[a] - top) / temperature).exp() } else { 0.0 }).collect();
            let s: f64 = w.iter().sum();
            w.into_iter().map(|x| x / s).collect()
        }
        LearnerKind::Replicator => {
            let low = values.iter().copied().fold(f64::INFINITY, f64::min);
            let base = normalize_masked(policy.to_vec(), allowed);
            let w: Vec<f64> = base.iter().zip(values).map(|(&p, &q)| p * (q - low + 1.0)).collect();
            let s: f64 = w.iter().sum();
            w.into_iter().map(|x| x / s).collect()
        }
    }
}

fn normalize_masked(mut p: Vec<f64>, allowed: Option<&[bool]>) -> Vec<f64> {
    for (a, v) in p.iter_mut().enumerate() {
        if *v < 0.0 || allowed.is_some_and(|m| !m[a]) {
            *v = 0.0;
        }
    }
    let s: f64 = p.iter().sum();
    if s > 0.0 {
        p.iter_mut().for_each(|v| *v /= s);
    } else {
        let count = allowed.map_or(p.len(), |m| m.iter().filter(|&&b| b).count());
        for (a, v) in p.iter_mut().enumerate() {
            *v = if allowed.is_none_or(|m| m[a]) { 1.0 / count as f64 } else { 0.0 };
        }
    }
    p
}

/// `pi <- (1 - rate) pi + rate Psi`, renormalised onto the simplex.
pub fn step_policy(
    kind: LearnerKind,
    policy: &[f64],
    values: &[f64],
    temperature: f64,
    rate: f64,
    allowed: Option<&[bool]>,
) -> Result<Vec<f64>> {
    if !(0.0..=1.0).contains(&rate) {
        return Err(Error::domain(format!("policy step size {rate} outside [0, 1]")));
    }
    if policy.len() != values.len() {
        return Err(Error::dims("policy and estimate lengths differ"));
    }
    if rate == 0.0 && allowed.is_none() {
        return Ok(policy.to_vec());
    }
    let psi = policy_response(kind, policy, values, temperature, allowed);
    let mixed = policy.iter().zip(&psi).map(|(&p, &r)| (1.0 - rate) * p + rate * r).collect();
    Ok(normalize_masked(mixed, allowed))
}

/// Expected payoff of each own action against opponents' empirical frequencies;
/// opponents never observed count as uniform.
pub fn fictitious_play_values(game: &StrategicGame, agent: usize, counts: &[Vec<u64>], signal: usize) -> Vec<f64> {
    let mixed: Vec<Vec<f64>> = (0..game.num_agents())
        .map(|j| {
            if j == agent {
                return vec![0.0; game.num_actions(j)];
            }
            let total: u64 = counts[j].iter().sum();
            if total == 0 {
                vec![1.0 / game.num_actions(j) as f64; game.num_actions(j)]
            } else {
                counts[j].iter().map(|&c| c as f64 / total as f64).collect()
            }
        })
        .collect();
    game.expected_deviation_payoffs(agent, &mixed, signal)
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    /// 1-based step number.
    pub t: usize,
    pub signal: usize,
    pub actions: Vec<usize>,
    pub payoffs: Vec<f64>,
    /// Policies after this step's update.
    pub policies: Vec<Vec<f64>>,
    /// Estimates after this step's update.
    pub estimates: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub seed: u64,
    pub steps: Vec<StepRecord>,
}

/// Owns one run's learning state and random stream.
#[derive(Debug, Clone)]
pub struct Simulator {
    specs: Vec<LearnerSpec>,
    state: LearningState,
    rng: SimRng,
    masks: Vec<Option<Vec<bool>>>,
}

impl Simulator {
    pub fn new(game: &StrategicGame, specs: Vec<LearnerSpec>, seed: u64) -> Result<Self> {
        let state = LearningState::initial(game, &specs)?;
        let masks = vec![None; specs.len()];
        Ok(Simulator { specs, state, rng: seeded(seed), masks })
    }

    pub fn state(&self) -> &LearningState {
        &self.state
    }

    pub fn specs(&self) -> &[LearnerSpec] {
        &self.specs
    }

    /// Restricts each agent to the actions flagged `true`; `None` lifts the
    /// restriction. Policy mass on excluded actions is removed immediately.
    pub fn set_admissible(&mut self, masks: Vec<Option<Vec<bool>>>) -> Result<()> {
        if masks.len() != self.specs.len() {
            return Err(Error::dims("one admissible mask per agent"));
        }
        for (i, m) in masks.iter().enumerate() {
            if let Some(m) = m {
                if m.len() != self.state.agents[i].policy.len() {
                    return Err(Error::dims(format!("admissible mask of agent {i} has wrong length")));
                }
                if !m.iter().any(|&b| b) {
                    return Err(Error::domain(format!("agent {i} has an empty admissible set")));
                }
                let p = std::mem::take(&mut self.state.agents[i].policy);
                self.state.agents[i].policy = normalize_masked(p, Some(m));
            }
        }
        self.masks = masks;
        Ok(())
    }

    pub fn step(&mut self, game: &StrategicGame, signal: usize) -> Result<StepRecord> {
        self.step_observed(game, signal, &mut |_, _, a| Some(a))
    }

    /// One step in which agent `observer` sees opponent `sender`'s action as
    /// `observe(observer, sender, action)`; `None` means the report was lost.
    pub fn step_observed(
        &mut self,
        game: &StrategicGame,
        signal: usize,
        observe: &mut dyn FnMut(usize, usize, usize) -> Option<usize>,
    ) -> Result<StepRecord> {
        game.check_signal(signal)?;
        let n = game.num_agents();
        if n != self.specs.len() {
            return Err(Error::dims(format!("game has {n} agents, simulator has {}", self.specs.len())));
        }
        let t = self.state.t + 1;
        let actions: Vec<usize> =
            (0..n).map(|i| sample_index(&mut self.rng, &self.state.agents[i].policy)).collect();
        let payoffs = game.payoffs_at(signal, game.profile_index(&actions)).to_vec();

        for i in 0..n {
            let spec = self.specs[i].clone();
            let mut seen = actions.clone();
            let mut complete = true;
            for j in (0..n).filter(|&j| j != i) {
                match observe(i, j, actions[j]) {
                    Some(a) if a < game.num_actions(j) => seen[j] = a,
                    _ => complete = false,
                }
                if spec.kind == LearnerKind::FictitiousPlay && complete {
                    self.state.agents[i].counts[j][seen[j]] += 1;
                }
            }
            let mu = spec.payoff_rate.at(t);
            let lambda = spec.policy_rate.at(t);
            let agent = &self.state.agents[i];
            let (estimate, values) = match spec.kind {
                LearnerKind::PayoffEstimation => {
                    let q = step_payoff_estimate(
                        &agent.estimate,
                        PayoffTarget::Realized { action: actions[i], payoff: payoffs[i] },
                        mu,
                    )?;
                    (q.clone(), q)
                }
                LearnerKind::FictitiousPlay => {
                    let g = fictitious_play_values(game, i, &agent.counts, signal);
                    let q = step_payoff_estimate(&agent.estimate, PayoffTarget::Vector(&g), mu)?;
                    (q, g)
                }
                _ => {
                    let q = if complete {
                        let g = game.deviation_payoffs(i, &seen, signal);
                        step_payoff_estimate(&agent.estimate, PayoffTarget::Vector(&g), mu)?
                    } else {
                        agent.estimate.clone()
                    };
                    (q.clone(), q)
                }
            };
            let policy = step_policy(
                spec.kind,
                &agent.policy,
                &values,
                spec.temperature,
                lambda,
                self.masks[i].as_deref(),
            )?;
            let agent = &mut self.state.agents[i];
            agent.estimate = estimate;
            agent.policy = policy;
        }
        self.state.t = t;
        Ok(StepRecord {
            t,
            signal,
            actions,
            payoffs,
            policies: self.state.agents.iter().map(|a| a.policy.clone()).collect(),
            estimates: self.state.agents.iter().map(|a| a.estimate.clone()).collect(),
        })
    }

    /// Draws one uniform number from the run's stream (used by callers that
    /// need extra randomness without a second generator).
    pub fn draw(&mut self) -> f64 {
        self.rng.random()
    }
}

/// Signal used at 0-based step `k`.
#[derive(Debug, Clone, PartialEq)]
pub enum SignalSchedule {
    Constant(usize),
    Sequence(Vec<usize>),
}

impl SignalSchedule {
    pub fn at(&self, k: usize) -> usize {
        match self {
            SignalSchedule::Constant(s) => *s,
            SignalSchedule::Sequence(v) => v[k % v.len()],
        }
    }
}

pub fn run_dynamics(
    game: &StrategicGame,
    learners: &[LearnerSpec],
    horizon: usize,
    seed: u64,
    signals: &SignalSchedule,
) -> Result<Trace> {
    if horizon == 0 {
        return Err(Error::domain("horizon must be at least 1"));
    }
    if let SignalSchedule::Sequence(v) = signals {
        if v.is_empty() {
            return Err(Error::domain("empty signal schedule"));
        }
    }
    let mut sim = Simulator::new(game, learners.to_vec(), seed)?;
    let mut steps = Vec::with_capacity(horizon);
    for k in 0..horizon {
        steps.push(sim.step(game, signals.at(k))?);
    }
    Ok(Trace { seed, steps })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostics {
    /// Time-averaged external regret per agent.
    pub regret: Vec<f64>,
    /// Per-agent empirical action frequencies over the whole trace.
    pub marginal_frequencies: Vec<Vec<f64>>,
    /// Observed joint profiles with their frequencies, lexicographic order.
    pub joint_frequencies: Vec<(ActionProfile, f64)>,
    /// Nash gap of the product of empirical marginals after each step.
    pub equilibrium_gap: Vec<f64>,
}

pub fn diagnostics(trace: &Trace, game: &StrategicGame) -> Result<Diagnostics> {
    diagnostics_with_stride(trace, game, 1)
}

/// As [`diagnostics`], evaluating the gap series only every `stride` steps
/// (and at the final step).
pub fn diagnostics_with_stride(trace: &Trace, game: &StrategicGame, stride: usize) -> Result<Diagnostics> {
    let n = game.num_agents();
    let horizon = trace.steps.len();
    for s in &trace.steps {
        if s.actions.len() != n {
            return Err(Error::dims("trace and game disagree on the number of agents"));
        }
        game.check_signal(s.signal)?;
        game.check_profile(&ActionProfile(s.actions.clone()))
            .map_err(|e| Error::dims(format!("trace does not belong to game: {e}")))?;
    }
    let mut hindsight: Vec<Vec<f64>> = (0..n).map(|i| vec![0.0; game.num_actions(i)]).collect();
    let mut realized = vec![0.0; n];
    let mut counts: Vec<Vec<u64>> = (0..n).map(|i| vec![0; game.num_actions(i)]).collect();
    let mut joint = vec![0u64; game.num_profiles()];
    let mut gap = Vec::new();
    let stride = stride.max(1);
    for (k, s) in trace.steps.iter().enumerate() {
        let idx = game.profile_index(&s.actions);
        joint[idx] += 1;
        for i in 0..n {
            realized[i] += game.payoff_at(s.signal, idx, i);
            for (a, v) in game.deviation_payoffs(i, &s.actions, s.signal).into_iter().enumerate() {
                hindsight[i][a] += v;
            }
            counts[i][s.actions[i]] += 1;
        }
        if (k + 1) % stride == 0 || k + 1 == horizon {
            let total = (k + 1) as f64;
            let mixed = MixedProfile(
                counts.iter().map(|c| c.iter().map(|&x| x as f64 / total).collect()).collect(),
            );
            gap.push(mixed_nash_gap(game, &mixed, s.signal)?);
        }
    }
    let t = horizon.max(1) as f64;
    let regret = (0..n)
        .map(|i| {
            let best = hindsight[i].iter().copied().fold(f64::NEG_INFINITY, f64::max);
            if horizon == 0 {
                0.0
            } else {
                (best - realized[i]) / t
            }
        })
        .collect();
    let marginal_frequencies = counts.iter().map(|c| c.iter().map(|&x| x as f64 / t).collect()).collect();
    let joint_frequencies = joint
        .iter()
        .enumerate()
        .filter(|(_, &c)| c > 0)
        .map(|(idx, &c)| (game.profile_at(idx), c as f64 / t))
        .collect();
    Ok(Diagnostics { regret, marginal_frequencies, joint_frequencies, equilibrium_gap: gap })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImprovementPath {
    pub profiles: Vec<ActionProfile>,
    pub converged: bool,
}

/// Asynchronous best-response dynamics: at each move the lowest-index agent
/// with a strictly profitable deviation switches to its smallest-index best
/// response. Stops at a pure Nash equilibrium or after `max_moves`.
pub fn best_response_path(
    game: &StrategicGame,
    start: &ActionProfile,
    signal: usize,
    max_moves: usize,
) -> Result<ImprovementPath> {
    game.check_profile(start)?;
    game.check_signal(signal)?;
    let mut current = start.clone();
    let mut profiles = vec![current.clone()];
    for _ in 0..=max_moves {
        let idx = game.profile_index(&current.0);
        let mover = (0..game.num_agents()).find_map(|i| {
            let devs = game.deviation_payoffs(i, &current.0, signal);
            let best = argmax_first(&devs);
            (devs[best] > game.payoff_at(signal, idx, i)).then_some((i, best))
        });
        match mover {
            None => return Ok(ImprovementPath { profiles, converged: true }),
            Some(_) if profiles.len() > max_moves => break,
            Some((i, a)) => {
                current = current.with_action(i, a);
                profiles.push(current.clone());
            }
        }
    }
    Ok(ImprovementPath { profiles, converged: false })
}
