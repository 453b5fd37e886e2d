//! Discrete-time population engine.
//!
//! Each step draws an ordered (sender, receiver) pair among connected actors,
//! builds and solves their game, and applies the expected state changes of
//! the selected outcome. One step is one communication; simulation time is
//! steps divided by the number of actors.
//!
//! Randomness comes from ChaCha8 seeded with the run seed: stream 0 drives
//! initialization, stream 1 drives pair selection.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::game::{self, EquilibriumProfile, GameError, PayoffMatrix, ReceiverAction, SenderAction};
use crate::metrics::{self, QualityRecord};
use crate::model::{self, ActorState, ClampReport, GlobalParams, Personality, Violations, IDENTITY_TOL};

pub const INIT_STREAM: u64 = 0;
pub const PAIR_STREAM: u64 = 1;
/// Feasibility resampling budget per actor before falling back to `F = N`.
pub const MAX_INIT_ATTEMPTS: usize = 1000;
pub const DEFAULT_BINS: usize = 50;

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("invalid configuration: {0}")]
    Config(#[from] Violations),
    #[error("edge list {path}: {message}")]
    Topology { path: PathBuf, message: String },
    #[error("observer failed at step {step}: {source}")]
    Observer {
        step: u64,
        #[source]
        source: io::Error,
    },
    #[error("invariant violated at step {step} for actor {actor}: {detail}")]
    Invariant { step: u64, actor: usize, detail: String },
    #[error("game failed at step {step}: {source}")]
    Game {
        step: u64,
        #[source]
        source: GameError,
    },
}

/// Share of the population with one personality.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PersonaShare {
    pub fraction: f64,
    pub name: String,
    pub personality: Personality,
}

/// Share of the population starting at one knowledge level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KnowledgeGroup {
    pub fraction: f64,
    pub k: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum Topology {
    #[default]
    Complete,
    /// Undirected edges, one `i j` pair per line.
    EdgeList(PathBuf),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationConfig {
    pub actor_count: usize,
    pub params: GlobalParams,
    pub personas: Vec<PersonaShare>,
    pub initial_k_groups: Vec<KnowledgeGroup>,
    /// Horizon in communications per actor.
    pub steps_per_actor: f64,
    pub sample_interval: f64,
    pub snapshot_times: Vec<f64>,
    pub seed: u64,
    pub topology: Topology,
    #[serde(default = "default_bins")]
    pub histogram_bins: usize,
}

fn default_bins() -> usize {
    DEFAULT_BINS
}

impl SimulationConfig {
    pub fn total_steps(&self) -> u64 {
        (self.steps_per_actor * self.actor_count as f64).round() as u64
    }

    pub fn validate(&self) -> Result<(), Violations> {
        let personalities: Vec<_> = self.personas.iter().map(|p| p.personality).collect();
        let mut out = match model::validate(&self.params, &personalities) {
            Ok(()) => Violations::default(),
            Err(v) => v,
        };
        if self.actor_count < 2 {
            out.push("actor_count must be ≥ 2", self.actor_count as f64, "actor_count >= 2");
        }
        check_fractions(&mut out, "persona", self.personas.iter().map(|p| p.fraction));
        check_fractions(&mut out, "k-group", self.initial_k_groups.iter().map(|g| g.fraction));
        for (i, p) in self.personas.iter().enumerate() {
            if p.name.is_empty() || p.name.contains([',', '"', '\n', '\r', '/']) {
                out.push(format!("personas[{i}].name {:?} is not a plain label", p.name), f64::NAN, "non-empty, no separators");
            }
        }
        for (i, g) in self.initial_k_groups.iter().enumerate() {
            if !(0.0..=1.0).contains(&g.k) {
                out.push(format!("initial_k_groups[{i}].k"), g.k, "[0, 1]");
            }
        }
        if !(self.steps_per_actor >= 0.0) || !self.steps_per_actor.is_finite() {
            out.push("steps_per_actor", self.steps_per_actor, ">= 0");
        }
        if !(self.sample_interval > 0.0) || !self.sample_interval.is_finite() {
            out.push("sample_interval", self.sample_interval, "> 0");
        }
        for (i, t) in self.snapshot_times.iter().enumerate() {
            if !(*t >= 0.0) || !t.is_finite() {
                out.push(format!("snapshot_times[{i}]"), *t, ">= 0");
            }
        }
        if self.histogram_bins == 0 {
            out.push("histogram_bins", 0.0, ">= 1");
        }
        out.into_result()
    }
}

fn check_fractions(out: &mut Violations, what: &str, fractions: impl Iterator<Item = f64>) {
    let mut sum = 0.0;
    let mut any = false;
    for (i, f) in fractions.enumerate() {
        any = true;
        if !(0.0..=1.0).contains(&f) {
            out.push(format!("{what} fraction [{i}]"), f, "[0, 1]");
        }
        sum += f;
    }
    if !any {
        out.push(format!("{what} list is empty"), 0.0, "at least one entry");
    } else if (sum - 1.0).abs() > IDENTITY_TOL {
        out.push(format!("{what} fractions sum to {sum}"), sum, "sum = 1");
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Actor {
    pub state: ActorState,
    pub personality: Personality,
    pub persona: usize,
    pub initial_k: f64,
}

#[derive(Debug, Clone, PartialEq)]
enum Graph {
    Complete,
    Edges(Vec<(usize, usize)>),
}

#[derive(Debug, Clone)]
pub struct World {
    pub params: GlobalParams,
    pub actors: Vec<Actor>,
    pub persona_names: Vec<String>,
    graph: Graph,
    rng: ChaCha8Rng,
    steps: u64,
    clamp: ClampReport,
    init_fallbacks: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransmissionRecord {
    /// Steps completed, this one included.
    pub step: u64,
    pub sim_time: f64,
    pub sender_id: usize,
    pub receiver_id: usize,
    pub profile: EquilibriumProfile,
    pub matrix: Option<PayoffMatrix>,
}

impl World {
    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn sim_time(&self) -> f64 {
        self.steps as f64 / self.actors.len() as f64
    }

    pub fn clamp_report(&self) -> &ClampReport {
        &self.clamp
    }

    /// Actors whose initial draw never became feasible.
    pub fn init_fallbacks(&self) -> u64 {
        self.init_fallbacks
    }

    pub fn persona_name(&self, actor: &Actor) -> &str {
        &self.persona_names[actor.persona]
    }

    fn pick_pair(&mut self) -> (usize, usize) {
        match &self.graph {
            Graph::Complete => {
                let n = self.actors.len();
                let s = self.rng.gen_range(0..n);
                let mut r = self.rng.gen_range(0..n - 1);
                if r >= s {
                    r += 1;
                }
                (s, r)
            }
            Graph::Edges(edges) => {
                let (a, b) = edges[self.rng.gen_range(0..edges.len())];
                if self.rng.gen::<bool>() {
                    (a, b)
                } else {
                    (b, a)
                }
            }
        }
    }

    /// Plays one game between a random connected pair.
    pub fn step(&mut self) -> Result<TransmissionRecord, EngineError> {
        let (s, r) = self.pick_pair();
        let step = self.steps + 1;
        let decay = self.params.delta;

        let sender = &self.actors[s];
        let receiver = &self.actors[r];
        let (profile, matrix) = if sender.state.f_count > 0.0 {
            let m = game::build_payoff_matrix(
                (&sender.state, &sender.personality),
                (&receiver.state, &receiver.personality),
                &self.params,
            )
            .map_err(|source| EngineError::Game { step, source })?;
            let p = game::solve_equilibrium(&m).map_err(|source| EngineError::Game { step, source })?;
            (p, Some(m))
        } else {
            (EquilibriumProfile::hold(), None)
        };

        let mut s_state = self.actors[s].state;
        let mut r_state = self.actors[r].state;
        match (profile.sender_action, profile.receiver_action, &matrix) {
            (SenderAction::Forward, receiver_action, Some(m)) => {
                let d = &m.deltas;
                s_state.popularity += d.sender.dp;
                apply_counts(&mut r_state, &d.receiver.counts);
                if receiver_action == ReceiverAction::Feedback {
                    apply_counts(&mut s_state, &d.sender.counts);
                    s_state.reputation += d.sender.dc;
                    r_state.reputation += d.receiver.dc;
                    r_state.popularity += d.receiver.dp;
                } else {
                    r_state.popularity -= decay;
                }
            }
            _ => {
                s_state.popularity -= decay;
                r_state.popularity -= decay;
            }
        }

        for (id, state) in [(s, s_state), (r, r_state)] {
            let (clamped, report) = model::clamp(&state, &self.params);
            let bad = clamped.check(&self.params);
            if !bad.is_empty() {
                return Err(EngineError::Invariant {
                    step,
                    actor: id,
                    detail: bad.to_string(),
                });
            }
            self.clamp.absorb(&report);
            self.actors[id].state = clamped;
        }
        self.steps = step;

        Ok(TransmissionRecord {
            step,
            sim_time: step as f64 / self.actors.len() as f64,
            sender_id: s,
            receiver_id: r,
            profile,
            matrix,
        })
    }
}

fn apply_counts(state: &mut ActorState, d: &crate::dynamics::CountDeltas) {
    state.f_count += d.d_f;
    state.f_plus_count += d.d_plus;
    state.f_minus_count += d.d_minus;
    state.f_rumor_count += d.d_rumor;
}

/// Count-scale state for a target knowledge `k` and drawn label fractions,
/// or `None` when the draw cannot reach `k` without exceeding `N`.
pub fn initial_state(
    k: f64,
    f_plus: f64,
    f_minus: f64,
    reputation: f64,
    popularity: f64,
    params: &GlobalParams,
) -> Option<ActorState> {
    let n = params.n();
    let base = ActorState {
        reputation: reputation * n,
        popularity: popularity * n,
        ..ActorState::default()
    };
    if f_plus + f_minus > 1.0 {
        return None;
    }
    if k == 0.0 {
        return Some(base);
    }
    let f_rumor = 1.0 - f_plus - f_minus;
    let per_assertion = f_plus + f_minus + params.lambda * f_rumor;
    if !(k <= per_assertion) {
        return None;
    }
    let f = (k * n / per_assertion).min(n);
    let plus = f_plus * f;
    let minus = f_minus * f;
    Some(ActorState {
        f_count: f,
        f_plus_count: plus,
        f_minus_count: minus,
        f_rumor_count: (f - plus - minus).max(0.0),
        ..base
    })
}

/// Fallback for an actor whose draws never became feasible: knows everything,
/// labels in the last drawn proportions.
fn saturated_state(f_plus: f64, f_minus: f64, reputation: f64, popularity: f64, params: &GlobalParams) -> ActorState {
    let n = params.n();
    let decided = f_plus + f_minus;
    let (fp, fm) = if decided > 1.0 {
        (f_plus / decided, f_minus / decided)
    } else {
        (f_plus, f_minus)
    };
    let plus = fp * n;
    let minus = fm * n;
    ActorState {
        f_count: n,
        f_plus_count: plus,
        f_minus_count: minus,
        f_rumor_count: (n - plus - minus).max(0.0),
        reputation: reputation * n,
        popularity: popularity * n,
    }
}

/// Splits `n` into integer counts proportional to `fractions` (largest remainder).
pub fn apportion(n: usize, fractions: &[f64]) -> Vec<usize> {
    let total: f64 = fractions.iter().sum();
    let quotas: Vec<f64> = fractions.iter().map(|f| f / total * n as f64).collect();
    let mut counts: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
    let assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..fractions.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = quotas[a] - quotas[a].floor();
        let rb = quotas[b] - quotas[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for &i in order.iter().take(n.saturating_sub(assigned)) {
        counts[i] += 1;
    }
    counts
}

fn shuffled_labels(n: usize, fractions: &[f64], rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut labels: Vec<usize> = apportion(n, fractions)
        .into_iter()
        .enumerate()
        .flat_map(|(i, c)| std::iter::repeat(i).take(c))
        .collect();
    labels.shuffle(rng);
    labels
}

pub fn load_edge_list(path: &Path, actor_count: usize) -> Result<Vec<(usize, usize)>, EngineError> {
    let err = |message: String| EngineError::Topology {
        path: path.to_path_buf(),
        message,
    };
    let text = fs::read_to_string(path).map_err(|e| err(e.to_string()))?;
    parse_edge_list(&text, actor_count).map_err(err)
}

/// Parses `i j` lines (zero-based, `#` comments) into a deduplicated,
/// connected, undirected edge list.
pub fn parse_edge_list(text: &str, actor_count: usize) -> Result<Vec<(usize, usize)>, String> {
    let mut edges = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut it = line.split_whitespace();
        let mut next = || -> Result<usize, String> {
            let tok = it.next().ok_or_else(|| format!("line {}: expected two indices", lineno + 1))?;
            let v: usize = tok
                .parse()
                .map_err(|_| format!("line {}: bad index {tok:?}", lineno + 1))?;
            if v >= actor_count {
                return Err(format!("line {}: index {v} out of range (actor_count {actor_count})", lineno + 1));
            }
            Ok(v)
        };
        let a = next()?;
        let b = next()?;
        if it.next().is_some() {
            return Err(format!("line {}: trailing tokens", lineno + 1));
        }
        if a == b {
            return Err(format!("line {}: self-loop on {a}", lineno + 1));
        }
        edges.push((a.min(b), a.max(b)));
    }
    edges.sort_unstable();
    edges.dedup();
    if edges.is_empty() {
        return Err("no edges".into());
    }

    let mut parent: Vec<usize> = (0..actor_count).collect();
    fn root(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for &(a, b) in &edges {
        let (ra, rb) = (root(&mut parent, a), root(&mut parent, b));
        parent[ra] = rb;
    }
    let r0 = root(&mut parent, 0);
    if let Some(lonely) = (1..actor_count).find(|&i| root(&mut parent, i) != r0) {
        return Err(format!("network is not connected (actor {lonely} unreachable from 0)"));
    }
    Ok(edges)
}

/// Builds the initial world for a validated configuration.
pub fn init_population(config: &SimulationConfig) -> Result<World, EngineError> {
    config.validate()?;
    let graph = match &config.topology {
        Topology::Complete => Graph::Complete,
        Topology::EdgeList(path) => Graph::Edges(load_edge_list(path, config.actor_count)?),
    };
    let params = config.params;
    let n = config.actor_count;

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(INIT_STREAM);
    let persona_fracs: Vec<f64> = config.personas.iter().map(|p| p.fraction).collect();
    let k_fracs: Vec<f64> = config.initial_k_groups.iter().map(|g| g.fraction).collect();
    let persona_of = shuffled_labels(n, &persona_fracs, &mut rng);
    let group_of = shuffled_labels(n, &k_fracs, &mut rng);

    let mut fallbacks = 0;
    let mut actors = Vec::with_capacity(n);
    for i in 0..n {
        let k = config.initial_k_groups[group_of[i]].k;
        let reputation: f64 = rng.gen();
        let popularity: f64 = rng.gen();
        let mut last = (0.0, 0.0);
        let mut state = None;
        for _ in 0..MAX_INIT_ATTEMPTS {
            let f_plus: f64 = rng.gen();
            let f_minus: f64 = 0.5 * rng.gen::<f64>();
            last = (f_plus, f_minus);
            state = initial_state(k, f_plus, f_minus, reputation, popularity, &params);
            if state.is_some() {
                break;
            }
        }
        let state = state.unwrap_or_else(|| {
            fallbacks += 1;
            saturated_state(last.0, last.1, reputation, popularity, &params)
        });
        let persona = persona_of[i];
        actors.push(Actor {
            state,
            personality: config.personas[persona].personality,
            persona,
            initial_k: state.knowledge(params.lambda) / params.n(),
        });
    }

    let mut pair_rng = ChaCha8Rng::seed_from_u64(config.seed);
    pair_rng.set_stream(PAIR_STREAM);
    Ok(World {
        params,
        actors,
        persona_names: config.personas.iter().map(|p| p.name.clone()).collect(),
        graph,
        rng: pair_rng,
        steps: 0,
        clamp: ClampReport::default(),
        init_fallbacks: fallbacks,
    })
}

/// Hooks invoked by [`run`]. All methods default to no-ops.
pub trait Observer {
    fn on_sample(&mut self, _world: &World) -> io::Result<()> {
        Ok(())
    }
    fn on_snapshot(&mut self, _world: &World, _time: f64) -> io::Result<()> {
        Ok(())
    }
    fn on_transmission(&mut self, _record: &TransmissionRecord) -> io::Result<()> {
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SimulationSummary {
    pub world: World,
    pub initial: QualityRecord,
    pub last: QualityRecord,
    pub clamp: ClampReport,
    pub init_fallbacks: u64,
}

pub fn run(config: &SimulationConfig, observers: &mut [&mut dyn Observer]) -> Result<SimulationSummary, EngineError> {
    let mut world = init_population(config)?;
    let n = config.actor_count as f64;
    let total = config.total_steps();
    let sample_every = ((config.sample_interval * n).round() as u64).max(1);
    let mut snapshots: Vec<(u64, f64)> = config
        .snapshot_times
        .iter()
        .map(|&t| ((t * n).round() as u64, t))
        .filter(|&(s, _)| s <= total)
        .collect();
    snapshots.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)));
    snapshots.dedup_by(|a, b| a.0 == b.0);
    let mut next_snapshot = 0;

    let notify = |world: &World, observers: &mut [&mut dyn Observer], sample: bool, snapshot: Option<f64>| {
        for obs in observers.iter_mut() {
            if sample {
                obs.on_sample(world)?;
            }
            if let Some(t) = snapshot {
                obs.on_snapshot(world, t)?;
            }
        }
        Ok::<(), io::Error>(())
    };
    let observer_err = |step| move |source| EngineError::Observer { step, source };

    let initial = metrics::quality_summary(&world);
    let take_snapshot = |step: u64, next: &mut usize| {
        if *next < snapshots.len() && snapshots[*next].0 == step {
            *next += 1;
            Some(snapshots[*next - 1].1)
        } else {
            None
        }
    };
    let snap = take_snapshot(0, &mut next_snapshot);
    notify(&world, observers, true, snap).map_err(observer_err(0))?;

    while world.steps() < total {
        let rec = world.step()?;
        for obs in observers.iter_mut() {
            obs.on_transmission(&rec).map_err(observer_err(rec.step))?;
        }
        let step = rec.step;
        let sample = step % sample_every == 0 || step == total;
        let snap = take_snapshot(step, &mut next_snapshot);
        if sample || snap.is_some() {
            notify(&world, observers, sample, snap).map_err(observer_err(step))?;
        }
    }

    Ok(SimulationSummary {
        last: metrics::quality_summary(&world),
        initial,
        clamp: world.clamp.clone(),
        init_fallbacks: world.init_fallbacks,
        world,
    })
}
