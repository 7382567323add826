//! Scenario documents: TOML text, a strict serde schema, and the validated
//! objects each scenario kind runs on.

use serde::Deserialize;
use sha2::{Digest, Sha256};

use stgames_core::coop::{coalition_of, CoalitionGame, MAX_AGENTS};
use stgames_core::coordination::{AdmissibleSetRule, CoordinatorKind, CoordinatorPolicy, GreedyScore};
use stgames_core::game::{ActionProfile, StrategicGame, NO_SIGNAL};
use stgames_core::incentives::{BudgetSpec, Horizon};
use stgames_core::learning::{LearnerKind, LearnerSpec, LearningState, RateSchedule};
use stgames_core::matching::{MatchingMarket, Side};
use stgames_core::network::{marginal_cost_tolls, CongestionNetwork, Edge};
use stgames_core::resilience::{AdversaryModel, AttackKind, ConsensusScenario, ResilienceConfig};
use stgames_core::templates;

use crate::error::{CliError, CliResult, SchemaIssue};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Kind {
    Coop,
    Match,
    Nash,
    Learn,
    TwoTimescale,
    Stackelberg,
    Wardrop,
    Incentive,
    Resilience,
}

impl Kind {
    pub const ALL: [Kind; 9] = [
        Kind::Coop,
        Kind::Match,
        Kind::Nash,
        Kind::Learn,
        Kind::TwoTimescale,
        Kind::Stackelberg,
        Kind::Wardrop,
        Kind::Incentive,
        Kind::Resilience,
    ];

    /// Name used for the `kind` key and the payload section.
    pub fn name(self) -> &'static str {
        match self {
            Kind::Coop => "coop",
            Kind::Match => "match",
            Kind::Nash => "nash",
            Kind::Learn => "learn",
            Kind::TwoTimescale => "two-timescale",
            Kind::Stackelberg => "stackelberg",
            Kind::Wardrop => "wardrop",
            Kind::Incentive => "incentive",
            Kind::Resilience => "resilience",
        }
    }

    /// Command-line verb.
    pub fn verb(self) -> &'static str {
        match self {
            Kind::TwoTimescale => "ttscale",
            k => k.name(),
        }
    }

    pub fn is_stochastic(self) -> bool {
        matches!(self, Kind::Learn | Kind::TwoTimescale | Kind::Resilience)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Format {
    Csv,
    #[default]
    Jsonl,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Jsonl => "jsonl",
        }
    }
}

// Raw schema, as deserialized.

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    kind: Kind,
    seed: Option<u64>,
    #[serde(default)]
    strict: bool,
    output: Option<RawOutput>,
    coop: Option<CoopSpec>,
    #[serde(rename = "match")]
    matching: Option<MatchSpec>,
    nash: Option<NashSpec>,
    learn: Option<LearnSpec>,
    #[serde(rename = "two-timescale")]
    two_timescale: Option<TwoTimescaleSpec>,
    stackelberg: Option<StackelbergSpec>,
    wardrop: Option<WardropSpec>,
    incentive: Option<IncentiveSpec>,
    resilience: Option<ResilienceSpec>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOutput {
    format: Option<Format>,
    dir: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CoopSpec {
    agents: Option<usize>,
    template: Option<CoopTemplate>,
    #[serde(default)]
    values: Vec<CoalitionValue>,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(rename_all = "kebab-case")]
enum CoopTemplate {
    PairwiseSynergy,
    Majority,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CoalitionValue {
    members: Vec<usize>,
    value: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct MatchSpec {
    men: Vec<Vec<usize>>,
    women: Vec<Vec<usize>>,
    #[serde(default)]
    proposing: ProposingSide,
    enumerate: Option<bool>,
}

#[derive(Debug, Clone, Copy, Default, Deserialize)]
#[serde(rename_all = "lowercase")]
enum ProposingSide {
    #[default]
    M,
    W,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct GameSpec {
    template: Option<GameTemplate>,
    actions: Option<Vec<Vec<String>>>,
    signals: Option<Vec<String>>,
    payoffs: Option<Vec<Vec<f64>>>,
    tables: Option<Vec<Vec<Vec<f64>>>>,
    routing: Option<RoutingSpec>,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(rename_all = "kebab-case")]
enum GameTemplate {
    PrisonersDilemma,
    MatchingPennies,
    Coordination,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RoutingSpec {
    network: NetworkSpec,
    agents: usize,
    #[serde(default)]
    tolls: Vec<TollSpec>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct TollSpec {
    label: String,
    edges: Option<Vec<f64>>,
    #[serde(default)]
    marginal: bool,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct NetworkSpec {
    template: Option<NetworkTemplate>,
    nodes: Option<usize>,
    origin: Option<usize>,
    destination: Option<usize>,
    demand: Option<f64>,
    edges: Option<Vec<EdgeSpec>>,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(rename_all = "kebab-case")]
enum NetworkTemplate {
    SingleLink,
    Pigou,
    Braess,
    BraessAugmented,
}

/// Edge with latency `a + b x`.
#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
struct EdgeSpec {
    tail: usize,
    head: usize,
    a: f64,
    b: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct NashSpec {
    signal: Option<String>,
    game: GameSpec,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(rename_all = "kebab-case")]
enum LearnerName {
    BestResponse,
    SmoothedBestResponse,
    FictitiousPlay,
    Replicator,
    PayoffEstimation,
}

impl From<LearnerName> for LearnerKind {
    fn from(n: LearnerName) -> Self {
        match n {
            LearnerName::BestResponse => LearnerKind::BestResponse,
            LearnerName::SmoothedBestResponse => LearnerKind::SmoothedBestResponse,
            LearnerName::FictitiousPlay => LearnerKind::FictitiousPlay,
            LearnerName::Replicator => LearnerKind::Replicator,
            LearnerName::PayoffEstimation => LearnerKind::PayoffEstimation,
        }
    }
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(untagged)]
enum RateValue {
    Constant(f64),
    Named(RateName),
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(rename_all = "kebab-case")]
enum RateName {
    Harmonic,
}

impl From<RateValue> for RateSchedule {
    fn from(r: RateValue) -> Self {
        match r {
            RateValue::Constant(v) => RateSchedule::Constant(v),
            RateValue::Named(RateName::Harmonic) => RateSchedule::Harmonic,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct LearnerEntry {
    kind: LearnerName,
    payoff_rate: Option<RateValue>,
    policy_rate: Option<RateValue>,
    temperature: Option<f64>,
    initial_policy: Option<Vec<f64>>,
}

impl LearnerEntry {
    fn spec(&self) -> LearnerSpec {
        let mut s = LearnerSpec::new(self.kind.into());
        if let Some(r) = self.payoff_rate {
            s.payoff_rate = r.into();
        }
        if let Some(r) = self.policy_rate {
            s.policy_rate = r.into();
        }
        if let Some(t) = self.temperature {
            s.temperature = t;
        }
        s.initial_policy = self.initial_policy.clone();
        s
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct LearnSpec {
    horizon: usize,
    signal: Option<String>,
    signals: Option<Vec<String>>,
    record_every: Option<usize>,
    learner: Option<LearnerEntry>,
    learners: Option<Vec<LearnerEntry>>,
    game: GameSpec,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct TwoTimescaleSpec {
    outer_steps: usize,
    epoch_len: usize,
    initial_signal: String,
    candidates: Option<Vec<String>>,
    coordinator: CoordinatorSpec,
    controlled: Option<Vec<usize>>,
    #[serde(default)]
    admissible: Vec<AdmissibleSpec>,
    learner: Option<LearnerEntry>,
    learners: Option<Vec<LearnerEntry>>,
    game: GameSpec,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CoordinatorSpec {
    kind: CoordinatorName,
    script: Option<Vec<String>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(rename_all = "kebab-case")]
enum CoordinatorName {
    Constant,
    RoundRobin,
    Greedy,
    GreedyCounterfactual,
    Scripted,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct AdmissibleSpec {
    signal: String,
    agent: usize,
    actions: Vec<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct StackelbergSpec {
    #[serde(default)]
    mode: ModeSpec,
    candidates: Option<Vec<String>>,
    leader_weights: Option<Vec<f64>>,
    leader_payoffs: Option<Vec<Vec<f64>>>,
    game: GameSpec,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModeSpec {
    Optimistic,
    Pessimistic,
    #[default]
    Both,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct WardropSpec {
    network: NetworkSpec,
    shortcut: Option<EdgeSpec>,
    #[serde(default = "yes")]
    tolls: bool,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct IncentiveSpec {
    target: Vec<String>,
    baseline: Vec<String>,
    signal: Option<String>,
    budget: f64,
    discount: f64,
    horizon: HorizonSpec,
    game: GameSpec,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(untagged)]
enum HorizonSpec {
    Finite(usize),
    Named(InfiniteName),
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(rename_all = "kebab-case")]
enum InfiniteName {
    Infinite,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ResilienceSpec {
    #[serde(default)]
    mode: ResilienceMode,
    steps: usize,
    initial: Option<Vec<f64>>,
    neighbors: Option<Vec<Vec<usize>>>,
    adversary: Option<AdversarySpec>,
    #[serde(default)]
    defense: DefenseSpec,
    learner: Option<LearnerEntry>,
    learners: Option<Vec<LearnerEntry>>,
    game: Option<GameSpec>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Deserialize)]
#[serde(rename_all = "kebab-case")]
enum ResilienceMode {
    #[default]
    Consensus,
    Learning,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct AdversarySpec {
    compromised: Vec<usize>,
    attack: AttackName,
    value: Option<f64>,
    lag: Option<usize>,
    probability: Option<f64>,
    window: Option<[usize; 2]>,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(rename_all = "kebab-case")]
enum AttackName {
    ConstantInjection,
    SignFlip,
    Replay,
    ChannelDrop,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
struct DefenseSpec {
    #[serde(default)]
    trim: usize,
    #[serde(default)]
    eta: f64,
    #[serde(default = "one")]
    residual_scale: f64,
}

fn one() -> f64 {
    1.0
}

impl Default for DefenseSpec {
    fn default() -> Self {
        DefenseSpec { trim: 0, eta: 0.0, residual_scale: 1.0 }
    }
}

// Validated scenarios

/// A strategic game plus the game whose welfare is reported (routing games
/// exclude tolls, which are transfers).
#[derive(Debug, Clone, PartialEq)]
pub struct GameSetup {
    pub game: StrategicGame,
    pub welfare: Option<StrategicGame>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Payload {
    Coop(CoalitionGame),
    Match { market: MatchingMarket, proposing: Side, enumerate: bool },
    Nash { setup: GameSetup, signals: Vec<usize> },
    Learn { setup: GameSetup, learners: Vec<LearnerSpec>, horizon: usize, schedule: Vec<usize>, record_every: usize },
    TwoTimescale(Box<TwoTimescalePayload>),
    Stackelberg { setup: GameSetup, candidates: Vec<usize>, mode: ModeSpec, leader: Vec<Vec<f64>> },
    Wardrop { network: CongestionNetwork, shortcut: Option<Edge>, tolls: bool },
    Incentive { setup: GameSetup, target: ActionProfile, baseline: ActionProfile, signal: usize, budget: BudgetSpec },
    ResilienceConsensus { scenario: ConsensusScenario, adversary: AdversaryModel, defense: ResilienceConfig, steps: usize },
    ResilienceLearning { setup: GameSetup, learners: Vec<LearnerSpec>, adversary: AdversaryModel, steps: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct TwoTimescalePayload {
    pub setup: GameSetup,
    pub learners: Vec<LearnerSpec>,
    pub coordinator: CoordinatorPolicy,
    pub initial_signal: usize,
    pub outer_steps: usize,
    pub epoch_len: usize,
    pub admissible: Option<AdmissibleSetRule>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct OutputOptions {
    pub format: Option<Format>,
    pub dir: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub kind: Kind,
    pub seed: Option<u64>,
    pub strict: bool,
    pub output: OutputOptions,
    /// Key-sorted JSON form of the effective document; the digest hashes it.
    pub canonical: serde_json::Value,
    pub payload: Payload,
    pub warnings: Vec<String>,
}

impl ScenarioConfig {
    pub fn digest(&self) -> String {
        digest(&self.canonical)
    }
}

/// Command-line overrides applied before validation.
#[derive(Debug, Clone, Copy, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub strict: bool,
}

pub fn parse_scenario(text: &str) -> CliResult<ScenarioConfig> {
    parse_scenario_with(text, Overrides::default())
}

pub fn parse_scenario_with(text: &str, overrides: Overrides) -> CliResult<ScenarioConfig> {
    let table: toml::Table = text.parse().map_err(|e: toml::de::Error| syntax_error(text, &e))?;
    let raw: RawConfig = serde_path_to_error::deserialize(table.clone()).map_err(|e| {
        let path = e.path().to_string();
        let path = if path == "." { "(document)".to_string() } else { path };
        CliError::schema(path, e.inner().message().to_string())
    })?;

    let mut canonical = serde_json::to_value(&table).map_err(|e| CliError::schema("(document)", e.to_string()))?;
    let seed = overrides.seed.or(raw.seed);
    if let (Some(s), serde_json::Value::Object(map)) = (overrides.seed, &mut canonical) {
        map.insert("seed".into(), s.into());
    }
    let strict = raw.strict || overrides.strict;
    if strict && !raw.strict {
        if let serde_json::Value::Object(map) = &mut canonical {
            map.insert("strict".into(), true.into());
        }
    }
    let canonical = canonicalize(canonical);

    let kind = raw.kind;
    let mut issues = Vec::new();
    let present: Vec<&str> = [
        (raw.coop.is_some(), "coop"),
        (raw.matching.is_some(), "match"),
        (raw.nash.is_some(), "nash"),
        (raw.learn.is_some(), "learn"),
        (raw.two_timescale.is_some(), "two-timescale"),
        (raw.stackelberg.is_some(), "stackelberg"),
        (raw.wardrop.is_some(), "wardrop"),
        (raw.incentive.is_some(), "incentive"),
        (raw.resilience.is_some(), "resilience"),
    ]
    .into_iter()
    .filter_map(|(p, n)| p.then_some(n))
    .collect();
    for name in &present {
        if *name != kind.name() {
            issues.push(issue(*name, format!("section does not belong to a {} scenario", kind.name())));
        }
    }
    if !present.contains(&kind.name()) {
        issues.push(issue(kind.name(), "missing payload section for this kind"));
    }
    if kind.is_stochastic() && seed.is_none() {
        issues.push(issue("seed", format!("a seed is required for {} scenarios", kind.name())));
    }
    if !issues.is_empty() {
        return Err(CliError::Schema(issues));
    }

    let mut warnings = Vec::new();
    let payload = match kind {
        Kind::Coop => build_coop(raw.coop.as_ref().expect("checked"), strict, &mut warnings)?,
        Kind::Match => build_match(raw.matching.as_ref().expect("checked"))?,
        Kind::Nash => build_nash(raw.nash.as_ref().expect("checked"))?,
        Kind::Learn => build_learn(raw.learn.as_ref().expect("checked"))?,
        Kind::TwoTimescale => build_two_timescale(raw.two_timescale.as_ref().expect("checked"))?,
        Kind::Stackelberg => build_stackelberg(raw.stackelberg.as_ref().expect("checked"))?,
        Kind::Wardrop => build_wardrop(raw.wardrop.as_ref().expect("checked"))?,
        Kind::Incentive => build_incentive(raw.incentive.as_ref().expect("checked"))?,
        Kind::Resilience => build_resilience(raw.resilience.as_ref().expect("checked"))?,
    };
    let output = raw.output.unwrap_or_default();
    Ok(ScenarioConfig {
        kind,
        seed,
        strict,
        output: OutputOptions { format: output.format, dir: output.dir },
        canonical,
        payload,
        warnings,
    })
}

fn syntax_error(text: &str, e: &toml::de::Error) -> CliError {
    let offset = e.span().map_or(0, |s| s.start).min(text.len());
    let before = &text[..offset];
    let line = before.matches('\n').count() + 1;
    let column = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    CliError::Syntax { line, column, message: e.message().trim().to_string() }
}

fn issue(path: impl Into<String>, message: impl Into<String>) -> SchemaIssue {
    SchemaIssue { path: path.into(), message: message.into() }
}

fn bail<T>(path: impl Into<String>, message: impl Into<String>) -> CliResult<T> {
    Err(CliError::schema(path, message))
}

/// Recursively key-sorted copy.
pub fn canonicalize(v: serde_json::Value) -> serde_json::Value {
    match v {
        serde_json::Value::Object(map) => {
            let mut entries: Vec<_> = map.into_iter().collect();
            entries.sort_by(|a, b| a.0.cmp(&b.0));
            serde_json::Value::Object(entries.into_iter().map(|(k, v)| (k, canonicalize(v))).collect())
        }
        serde_json::Value::Array(xs) => serde_json::Value::Array(xs.into_iter().map(canonicalize).collect()),
        other => other,
    }
}

/// SHA-256 of the compact canonical JSON text, lowercase hex.
pub fn digest(canonical: &serde_json::Value) -> String {
    let text = serde_json::to_string(&canonicalize(canonical.clone())).expect("json values serialize");
    hex::encode(Sha256::digest(text.as_bytes()))
}

// Builders

fn build_coop(spec: &CoopSpec, strict: bool, warnings: &mut Vec<String>) -> CliResult<Payload> {
    if let Some(t) = spec.template {
        if spec.agents.is_some() || !spec.values.is_empty() {
            return bail("coop.template", "a template excludes `agents` and `values`");
        }
        return Ok(Payload::Coop(match t {
            CoopTemplate::PairwiseSynergy => templates::pairwise_synergy_game(),
            CoopTemplate::Majority => templates::majority_game(),
        }));
    }
    let Some(n) = spec.agents else {
        return bail("coop.agents", "missing field (or give `template`)");
    };
    if n == 0 {
        return bail("coop.agents", "at least one agent is required");
    }
    if n > MAX_AGENTS {
        return Err(CliError::Capacity(format!("coop.agents: {n} agents exceed the limit of {MAX_AGENTS}")));
    }
    let mut table = vec![None; 1usize << n];
    table[0] = Some(0.0);
    let mut issues = Vec::new();
    for (k, cv) in spec.values.iter().enumerate() {
        let path = format!("coop.values[{k}]");
        if let Some(&i) = cv.members.iter().find(|&&i| i >= n) {
            issues.push(issue(format!("{path}.members"), format!("agent {i} is not in a {n}-agent game")));
            continue;
        }
        let mask = coalition_of(&cv.members) as usize;
        if mask.count_ones() as usize != cv.members.len() {
            issues.push(issue(format!("{path}.members"), "repeated agent"));
            continue;
        }
        if !cv.value.is_finite() {
            issues.push(issue(format!("{path}.value"), "value must be finite"));
            continue;
        }
        if mask == 0 {
            if cv.value != 0.0 {
                issues.push(issue(format!("{path}.value"), "the empty coalition must be worth 0"));
            }
            continue;
        }
        if table[mask].is_some() {
            issues.push(issue(format!("{path}.members"), "coalition listed twice"));
            continue;
        }
        table[mask] = Some(cv.value);
    }
    let missing = table.iter().filter(|v| v.is_none()).count();
    if missing > 0 {
        if strict {
            issues.push(issue("coop.values", format!("{missing} coalitions have no value (strict mode)")));
        } else {
            warnings.push(format!("{missing} coalitions have no listed value and default to 0"));
        }
    }
    if !issues.is_empty() {
        return Err(CliError::Schema(issues));
    }
    let values = table.into_iter().map(|v| v.unwrap_or(0.0)).collect();
    CoalitionGame::new(n, values).map(Payload::Coop).map_err(|e| CliError::from_build("coop.values", e))
}

fn build_match(spec: &MatchSpec) -> CliResult<Payload> {
    let market =
        MatchingMarket::new(spec.men.clone(), spec.women.clone()).map_err(|e| CliError::from_build("match", e))?;
    let enumerate = spec.enumerate.unwrap_or(market.size() <= stgames_core::matching::MAX_ENUMERATION);
    let proposing = match spec.proposing {
        ProposingSide::M => Side::M,
        ProposingSide::W => Side::W,
    };
    Ok(Payload::Match { market, proposing, enumerate })
}

fn build_network(spec: &NetworkSpec, path: &str) -> CliResult<CongestionNetwork> {
    if let Some(t) = spec.template {
        if spec.nodes.is_some() || spec.edges.is_some() || spec.origin.is_some() || spec.destination.is_some() {
            return bail(format!("{path}.template"), "a template excludes explicit nodes and edges");
        }
        let mut net = match t {
            NetworkTemplate::SingleLink => templates::single_link(),
            NetworkTemplate::Pigou => templates::pigou(),
            NetworkTemplate::Braess => templates::braess_base(),
            NetworkTemplate::BraessAugmented => templates::braess_augmented(),
        };
        if let Some(d) = spec.demand {
            net = CongestionNetwork::new(net.nodes, net.edges, net.origin, net.destination, d)
                .map_err(|e| CliError::from_build(&format!("{path}.demand"), e))?;
        }
        return Ok(net);
    }
    let need = |v: Option<usize>, key: &str| v.ok_or_else(|| CliError::schema(format!("{path}.{key}"), "missing field"));
    let nodes = need(spec.nodes, "nodes")?;
    let origin = need(spec.origin, "origin")?;
    let destination = need(spec.destination, "destination")?;
    let Some(edges) = &spec.edges else {
        return bail(format!("{path}.edges"), "missing field");
    };
    let edges = edges.iter().map(|e| Edge::new(e.tail, e.head, e.a, e.b)).collect();
    CongestionNetwork::new(nodes, edges, origin, destination, spec.demand.unwrap_or(1.0))
        .map_err(|e| CliError::from_build(path, e))
}

fn build_game(spec: &GameSpec, path: &str) -> CliResult<GameSetup> {
    let explicit = spec.actions.is_some() || spec.payoffs.is_some() || spec.tables.is_some();
    let chosen = [spec.template.is_some(), explicit, spec.routing.is_some()].iter().filter(|&&b| b).count();
    if chosen != 1 {
        return bail(path, "give exactly one of `template`, `actions` with payoffs, or `routing`");
    }
    if let Some(t) = spec.template {
        if spec.signals.is_some() {
            return bail(format!("{path}.signals"), "templates have a single signal");
        }
        let game = match t {
            GameTemplate::PrisonersDilemma => templates::prisoners_dilemma(),
            GameTemplate::MatchingPennies => templates::matching_pennies(),
            GameTemplate::Coordination => templates::coordination_game(),
        };
        return Ok(GameSetup { game, welfare: None });
    }
    if let Some(r) = &spec.routing {
        if spec.signals.is_some() {
            return bail(format!("{path}.signals"), "routing signals come from `routing.tolls`");
        }
        let rpath = format!("{path}.routing");
        let net = build_network(&r.network, &format!("{rpath}.network"))?;
        let mut signals = Vec::with_capacity(r.tolls.len());
        for (k, t) in r.tolls.iter().enumerate() {
            let tpath = format!("{rpath}.tolls[{k}]");
            let tolls = match (&t.edges, t.marginal) {
                (Some(e), false) => e.clone(),
                (None, true) => marginal_cost_tolls(&net).map_err(|e| CliError::from_build(&tpath, e))?,
                _ => return bail(tpath, "give exactly one of `edges` or `marginal = true`"),
            };
            signals.push((t.label.clone(), tolls));
        }
        let game = templates::atomic_routing_game(&net, r.agents, &signals)
            .map_err(|e| CliError::from_build(&rpath, e))?;
        let free: Vec<(String, Vec<f64>)> =
            signals.iter().map(|(l, _)| (l.clone(), vec![0.0; net.edges.len()])).collect();
        let welfare = templates::atomic_routing_game(&net, r.agents, &free)
            .map_err(|e| CliError::from_build(&rpath, e))?;
        return Ok(GameSetup { game, welfare: Some(welfare) });
    }
    let Some(actions) = &spec.actions else {
        return bail(format!("{path}.actions"), "missing field");
    };
    let tables = match (&spec.payoffs, &spec.tables) {
        (Some(p), None) => vec![p.clone()],
        (None, Some(t)) => t.clone(),
        _ => return bail(path, "give exactly one of `payoffs` (one signal) or `tables` (one per signal)"),
    };
    let signals = match &spec.signals {
        Some(s) => s.clone(),
        None if tables.len() == 1 => vec![NO_SIGNAL.to_string()],
        None => (0..tables.len()).map(|s| format!("s{s}")).collect(),
    };
    let game = StrategicGame::new(actions.clone(), signals, tables).map_err(|e| CliError::from_build(path, e))?;
    Ok(GameSetup { game, welfare: None })
}

fn signal_index(game: &StrategicGame, label: &str, path: &str) -> CliResult<usize> {
    game.signal_index(label).map_err(|e| CliError::from_build(path, e))
}

fn profile_from_labels(game: &StrategicGame, labels: &[String], path: &str) -> CliResult<ActionProfile> {
    ActionProfile::from_labels(game, labels).map_err(|e| CliError::from_build(path, e))
}

fn build_learners(
    single: &Option<LearnerEntry>,
    many: &Option<Vec<LearnerEntry>>,
    game: &StrategicGame,
    section: &str,
) -> CliResult<Vec<LearnerSpec>> {
    let specs = match (single, many) {
        (Some(l), None) => vec![l.spec(); game.num_agents()],
        (None, Some(ls)) => {
            if ls.len() != game.num_agents() {
                return bail(
                    format!("{section}.learners"),
                    format!("{} learners for {} agents", ls.len(), game.num_agents()),
                );
            }
            ls.iter().map(LearnerEntry::spec).collect()
        }
        _ => return bail(section, "give exactly one of `learner` (shared) or `learners` (one per agent)"),
    };
    let path = if single.is_some() { format!("{section}.learner") } else { format!("{section}.learners") };
    LearningState::initial(game, &specs).map_err(|e| CliError::from_build(&path, e))?;
    Ok(specs)
}

fn build_nash(spec: &NashSpec) -> CliResult<Payload> {
    let setup = build_game(&spec.game, "nash.game")?;
    let signals = match &spec.signal {
        Some(l) => vec![signal_index(&setup.game, l, "nash.signal")?],
        None => (0..setup.game.signals().len()).collect(),
    };
    Ok(Payload::Nash { setup, signals })
}

fn build_learn(spec: &LearnSpec) -> CliResult<Payload> {
    if spec.horizon == 0 {
        return bail("learn.horizon", "horizon must be at least 1");
    }
    let setup = build_game(&spec.game, "learn.game")?;
    let learners = build_learners(&spec.learner, &spec.learners, &setup.game, "learn")?;
    let schedule = match (&spec.signal, &spec.signals) {
        (Some(l), None) => vec![signal_index(&setup.game, l, "learn.signal")?],
        (None, Some(ls)) if !ls.is_empty() => ls
            .iter()
            .enumerate()
            .map(|(k, l)| signal_index(&setup.game, l, &format!("learn.signals[{k}]")))
            .collect::<CliResult<_>>()?,
        (None, None) => vec![0],
        _ => return bail("learn", "give at most one nonempty `signal` or `signals`"),
    };
    let record_every = spec.record_every.unwrap_or(1);
    if record_every == 0 {
        return bail("learn.record_every", "must be at least 1");
    }
    Ok(Payload::Learn { setup, learners, horizon: spec.horizon, schedule, record_every })
}

fn build_two_timescale(spec: &TwoTimescaleSpec) -> CliResult<Payload> {
    let s = "two-timescale";
    if spec.outer_steps == 0 {
        return bail(format!("{s}.outer_steps"), "must be at least 1");
    }
    if spec.epoch_len == 0 {
        return bail(format!("{s}.epoch_len"), "must be at least 1");
    }
    let setup = build_game(&spec.game, &format!("{s}.game"))?;
    let game = &setup.game;
    let learners = build_learners(&spec.learner, &spec.learners, game, s)?;
    let candidates = match &spec.candidates {
        Some(ls) => ls
            .iter()
            .enumerate()
            .map(|(k, l)| signal_index(game, l, &format!("{s}.candidates[{k}]")))
            .collect::<CliResult<Vec<_>>>()?,
        None => (0..game.signals().len()).collect(),
    };
    let initial_signal = signal_index(game, &spec.initial_signal, &format!("{s}.initial_signal"))?;
    if !candidates.contains(&initial_signal) {
        return bail(format!("{s}.initial_signal"), "initial signal is not a candidate");
    }
    let cpath = format!("{s}.coordinator");
    if spec.coordinator.script.is_some() != (spec.coordinator.kind == CoordinatorName::Scripted) {
        return bail(format!("{cpath}.script"), "`script` is required by, and only allowed for, the scripted kind");
    }
    let kind = match spec.coordinator.kind {
        CoordinatorName::Constant => CoordinatorKind::Constant,
        CoordinatorName::RoundRobin => CoordinatorKind::RoundRobin,
        CoordinatorName::Greedy => CoordinatorKind::Greedy(GreedyScore::Observed),
        CoordinatorName::GreedyCounterfactual => CoordinatorKind::Greedy(GreedyScore::Counterfactual(
            setup.welfare.clone().unwrap_or_else(|| game.clone()),
        )),
        CoordinatorName::Scripted => {
            let script = spec.coordinator.script.as_ref().expect("checked");
            if script.is_empty() {
                return bail(format!("{cpath}.script"), "script is empty");
            }
            CoordinatorKind::Scripted(
                script
                    .iter()
                    .enumerate()
                    .map(|(k, l)| signal_index(game, l, &format!("{cpath}.script[{k}]")))
                    .collect::<CliResult<_>>()?,
            )
        }
    };
    let mut coordinator = CoordinatorPolicy::new(kind, candidates).map_err(|e| CliError::from_build(&cpath, e))?;
    if let Some(c) = &spec.controlled {
        if let Some(&i) = c.iter().find(|&&i| i >= game.num_agents()) {
            return bail(format!("{s}.controlled"), format!("agent {i} is not in the game"));
        }
        coordinator.controlled = Some(c.clone());
    }
    let admissible = if spec.admissible.is_empty() {
        None
    } else {
        let mut rule = AdmissibleSetRule::full(game);
        for (k, a) in spec.admissible.iter().enumerate() {
            let path = format!("{s}.admissible[{k}]");
            let sig = signal_index(game, &a.signal, &format!("{path}.signal"))?;
            if a.agent >= game.num_agents() {
                return bail(format!("{path}.agent"), format!("agent {} is not in the game", a.agent));
            }
            let acts = a
                .actions
                .iter()
                .map(|l| game.action_index(a.agent, l).map_err(|e| CliError::from_build(&format!("{path}.actions"), e)))
                .collect::<CliResult<Vec<_>>>()?;
            rule = rule.restrict(sig, a.agent, &acts).map_err(|e| CliError::from_build(&path, e))?;
        }
        Some(rule)
    };
    Ok(Payload::TwoTimescale(Box::new(TwoTimescalePayload {
        setup,
        learners,
        coordinator,
        initial_signal,
        outer_steps: spec.outer_steps,
        epoch_len: spec.epoch_len,
        admissible,
    })))
}

fn build_stackelberg(spec: &StackelbergSpec) -> CliResult<Payload> {
    let setup = build_game(&spec.game, "stackelberg.game")?;
    let game = &setup.game;
    let candidates = match &spec.candidates {
        Some(ls) if ls.is_empty() => return bail("stackelberg.candidates", "at least one candidate is required"),
        Some(ls) => ls
            .iter()
            .enumerate()
            .map(|(k, l)| signal_index(game, l, &format!("stackelberg.candidates[{k}]")))
            .collect::<CliResult<Vec<_>>>()?,
        None => (0..game.signals().len()).collect(),
    };
    let signals = game.signals().len();
    let profiles = game.num_profiles();
    let leader = match (&spec.leader_weights, &spec.leader_payoffs) {
        (Some(_), Some(_)) => return bail("stackelberg", "give at most one of `leader_weights` or `leader_payoffs`"),
        (None, Some(t)) => {
            if t.len() != signals || t.iter().any(|r| r.len() != profiles) {
                return bail(
                    "stackelberg.leader_payoffs",
                    format!("expected {signals} rows of {profiles} values (signal by profile)"),
                );
            }
            t.clone()
        }
        (w, None) => {
            let w = w.clone().unwrap_or_else(|| vec![1.0; game.num_agents()]);
            if w.len() != game.num_agents() {
                return bail("stackelberg.leader_weights", format!("expected {} weights", game.num_agents()));
            }
            let base = setup.welfare.as_ref().unwrap_or(game);
            (0..signals)
                .map(|s| (0..profiles).map(|p| base.payoffs_at(s, p).iter().zip(&w).map(|(v, c)| v * c).sum()).collect())
                .collect()
        }
    };
    Ok(Payload::Stackelberg { setup, candidates, mode: spec.mode, leader })
}

fn build_wardrop(spec: &WardropSpec) -> CliResult<Payload> {
    let network = build_network(&spec.network, "wardrop.network")?;
    let shortcut = spec.shortcut.map(|e| Edge::new(e.tail, e.head, e.a, e.b));
    if let Some(e) = shortcut {
        network.with_edge(e).map_err(|err| CliError::from_build("wardrop.shortcut", err))?;
    }
    Ok(Payload::Wardrop { network, shortcut, tolls: spec.tolls })
}

fn build_incentive(spec: &IncentiveSpec) -> CliResult<Payload> {
    let setup = build_game(&spec.game, "incentive.game")?;
    let game = &setup.game;
    let target = profile_from_labels(game, &spec.target, "incentive.target")?;
    let baseline = profile_from_labels(game, &spec.baseline, "incentive.baseline")?;
    let signal = match &spec.signal {
        Some(l) => signal_index(game, l, "incentive.signal")?,
        None => 0,
    };
    let horizon = match spec.horizon {
        HorizonSpec::Finite(h) => Horizon::Finite(h),
        HorizonSpec::Named(InfiniteName::Infinite) => Horizon::Infinite,
    };
    let budget =
        BudgetSpec::new(spec.budget, spec.discount, horizon).map_err(|e| CliError::from_build("incentive", e))?;
    Ok(Payload::Incentive { setup, target, baseline, signal, budget })
}

fn build_adversary(spec: &Option<AdversarySpec>, agents: usize, steps: usize) -> CliResult<AdversaryModel> {
    let Some(a) = spec else {
        return Ok(AdversaryModel::none());
    };
    let p = "resilience.adversary";
    let attack = match (a.attack, a.value, a.lag, a.probability) {
        (AttackName::ConstantInjection, Some(v), None, None) => AttackKind::ConstantInjection(v),
        (AttackName::SignFlip, None, None, None) => AttackKind::SignFlip,
        (AttackName::Replay, None, Some(lag), None) => AttackKind::Replay { lag },
        (AttackName::ChannelDrop, None, None, Some(probability)) => AttackKind::ChannelDrop { probability },
        (name, ..) => {
            let needs = match name {
                AttackName::ConstantInjection => "`value`",
                AttackName::SignFlip => "no parameter",
                AttackName::Replay => "`lag`",
                AttackName::ChannelDrop => "`probability`",
            };
            return bail(format!("{p}.attack"), format!("this attack takes {needs}"));
        }
    };
    let window = a.window.map_or((0, steps.saturating_sub(1)), |[s, e]| (s, e));
    let model = AdversaryModel { compromised: a.compromised.clone(), attack, window };
    model.validate(agents).map_err(|e| CliError::from_build(p, e))?;
    Ok(model)
}

fn build_resilience(spec: &ResilienceSpec) -> CliResult<Payload> {
    let s = "resilience";
    if spec.steps == 0 {
        return bail(format!("{s}.steps"), "must be at least 1");
    }
    match spec.mode {
        ResilienceMode::Consensus => {
            for (present, key) in [
                (spec.game.is_some(), "game"),
                (spec.learner.is_some(), "learner"),
                (spec.learners.is_some(), "learners"),
            ] {
                if present {
                    return bail(format!("{s}.{key}"), "only used in learning mode");
                }
            }
            let Some(initial) = spec.initial.clone() else {
                return bail(format!("{s}.initial"), "missing field");
            };
            let n = initial.len();
            if n == 0 {
                return bail(format!("{s}.initial"), "at least one agent is required");
            }
            let neighbors = spec.neighbors.clone().unwrap_or_else(|| (0..n).map(|_| (0..n).collect()).collect());
            if neighbors.len() != n {
                return bail(format!("{s}.neighbors"), format!("{} lists for {n} agents", neighbors.len()));
            }
            let adversary = build_adversary(&spec.adversary, n, spec.steps)?;
            let defense = ResilienceConfig {
                trim: spec.defense.trim,
                eta: spec.defense.eta,
                residual_scale: spec.defense.residual_scale,
            };
            let scenario = ConsensusScenario { initial, neighbors };
            // Dry run of one step surfaces neighbour and defence errors as schema errors.
            stgames_core::resilience::run_adversarial_consensus(&scenario, &adversary, &defense, 0, 0)
                .map_err(|e| CliError::from_build(s, e))?;
            Ok(Payload::ResilienceConsensus { scenario, adversary, defense, steps: spec.steps })
        }
        ResilienceMode::Learning => {
            for (present, key) in [
                (spec.initial.is_some(), "initial"),
                (spec.neighbors.is_some(), "neighbors"),
            ] {
                if present {
                    return bail(format!("{s}.{key}"), "only used in consensus mode");
                }
            }
            let Some(g) = &spec.game else {
                return bail(format!("{s}.game"), "missing field (learning mode)");
            };
            let setup = build_game(g, &format!("{s}.game"))?;
            let learners = build_learners(&spec.learner, &spec.learners, &setup.game, s)?;
            let adversary = build_adversary(&spec.adversary, setup.game.num_agents(), spec.steps)?;
            Ok(Payload::ResilienceLearning { setup, learners, adversary, steps: spec.steps })
        }
    }
}
