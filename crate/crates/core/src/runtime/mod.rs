//! Concrete execution of the orchestration protocols with pluggable
//! callbacks and a seeded scheduler.
//!
//! A round instantiates the same process terms the checker explores, but
//! with data values held in a host-side arena and the client update computed
//! by the client callback. At every step one enabled node is picked uniformly
//! at random. Once all nodes have finished, each node's final local data is
//! read off the trace: a client keeps the update it sent, an aggregating
//! node applies the server callback to the updates it collected.

mod conformance;
mod rng;

use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::kernel::{ChannelId, HostEval, HostFn, HostRef, KernelError, Status, Value};
use crate::models::{self, DataBinding, ModelConfig, ModelError, UpdateFn, Variant};
use crate::trace::{Action, Event, EventMsg};

pub use conformance::{conforms, Conformance, ConformanceError};
pub use rng::SplitMix64;

/// Host-provided update and aggregation functions. Both must be pure and
/// terminating; an `Err` aborts the round.
pub trait Callbacks: fmt::Debug + Send + Sync {
    /// Client update from the node's local data, its private data and the
    /// data received from the server (or peer).
    fn cfun(&self, local: f64, private: f64, server: f64) -> Result<f64, String>;
    /// Aggregate of the updates a node collected.
    fn sfun(&self, local: f64, private: f64, updates: &[f64]) -> Result<f64, String>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ClientFn {
    /// `local + server`
    #[default]
    Add,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ServerFn {
    Sum,
    #[default]
    Mean,
}

impl ClientFn {
    pub fn name(self) -> &'static str {
        match self {
            ClientFn::Add => "add",
        }
    }
}

impl ServerFn {
    pub fn name(self) -> &'static str {
        match self {
            ServerFn::Sum => "sum",
            ServerFn::Mean => "mean",
        }
    }
}

/// The shipped callbacks. With no updates to aggregate, both server
/// functions return the node's own local data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct StandardCallbacks {
    pub cfun: ClientFn,
    pub sfun: ServerFn,
}

impl Callbacks for StandardCallbacks {
    fn cfun(&self, local: f64, _private: f64, server: f64) -> Result<f64, String> {
        match self.cfun {
            ClientFn::Add => Ok(local + server),
        }
    }

    fn sfun(&self, local: f64, _private: f64, updates: &[f64]) -> Result<f64, String> {
        if updates.is_empty() {
            return Ok(local);
        }
        let sum: f64 = updates.iter().sum();
        Ok(match self.sfun {
            ServerFn::Sum => sum,
            ServerFn::Mean => sum / updates.len() as f64,
        })
    }
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    /// Variant, node count, server id and capacities. Its integer data
    /// fields are ignored in favour of `ldata` and `pdata` below.
    pub model: ModelConfig,
    pub ldata: Vec<f64>,
    pub pdata: Vec<f64>,
    pub seed: u64,
    pub iters: usize,
    pub callbacks: Arc<dyn Callbacks>,
}

impl RunConfig {
    /// Data taken from `model`, one iteration, standard callbacks.
    pub fn new(model: ModelConfig, seed: u64) -> Self {
        RunConfig {
            ldata: model.ldata.iter().map(|&v| v as f64).collect(),
            pdata: model.pdata.iter().map(|&v| v as f64).collect(),
            model,
            seed,
            iters: 1,
            callbacks: Arc::new(StandardCallbacks::default()),
        }
    }

    pub fn with_ldata(mut self, ldata: Vec<f64>) -> Self {
        self.ldata = ldata;
        self
    }

    pub fn with_pdata(mut self, pdata: Vec<f64>) -> Self {
        self.pdata = pdata;
        self
    }

    pub fn with_iters(mut self, iters: usize) -> Self {
        self.iters = iters;
        self
    }

    pub fn with_callbacks(mut self, callbacks: impl Callbacks + 'static) -> Self {
        self.callbacks = Arc::new(callbacks);
        self
    }

    pub fn validate(&self) -> Result<(), RunError> {
        self.model.validate()?;
        let n = self.model.nodes;
        if self.ldata.len() != n || self.pdata.len() != n {
            return Err(RunError::InvalidConfig(format!(
                "{} ldata and {} pdata values for {n} nodes",
                self.ldata.len(),
                self.pdata.len()
            )));
        }
        if self.iters == 0 {
            return Err(RunError::InvalidConfig(
                "iteration count must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// The events of one round, tagged with the configuration shape needed to
/// pick the matching model.
#[derive(Debug, Clone, PartialEq)]
pub struct ConcreteTrace {
    pub variant: Variant,
    pub nodes: usize,
    pub server_id: Option<usize>,
    pub events: Vec<Event>,
}

impl ConcreteTrace {
    fn empty(cfg: &ModelConfig) -> Self {
        ConcreteTrace {
            variant: cfg.variant,
            nodes: cfg.nodes,
            server_id: (cfg.variant == Variant::Centralised).then_some(cfg.server_id),
            events: Vec::new(),
        }
    }

    /// Events matching `action` on `channel`.
    pub fn count(&self, action: Action, channel: ChannelId) -> usize {
        self.events
            .iter()
            .filter(|e| e.action == action && e.channel == Some(channel))
            .count()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoundResult {
    pub final_ldata: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub final_ldata: Vec<f64>,
    /// One trace per round, in order.
    pub rounds: Vec<ConcreteTrace>,
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error("invalid run configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("round {round}: callback failed after {} steps: {message}", trace.events.len())]
    Callback {
        round: usize,
        message: String,
        trace: ConcreteTrace,
    },
    #[error("round {round}: no node can move after {} steps", trace.events.len())]
    Deadlock { round: usize, trace: ConcreteTrace },
    #[error("round {round}: {source}")]
    Kernel {
        round: usize,
        source: KernelError,
        trace: ConcreteTrace,
    },
}

impl RunError {
    /// Events recorded before the failure, if the round had started.
    pub fn partial_trace(&self) -> Option<&ConcreteTrace> {
        match self {
            RunError::Callback { trace, .. }
            | RunError::Deadlock { trace, .. }
            | RunError::Kernel { trace, .. } => Some(trace),
            _ => None,
        }
    }
}

/// Data values of a round. Indices `0..n` hold ldata, `n..2n` pdata, the
/// rest are callback results.
struct Arena<'a> {
    values: Vec<f64>,
    callbacks: &'a dyn Callbacks,
    failure: Option<String>,
}

impl Arena<'_> {
    fn get(&self, v: Value) -> Result<f64, KernelError> {
        match v {
            Value::Host(HostRef(i)) => self
                .values
                .get(i as usize)
                .copied()
                .ok_or_else(|| KernelError::Host(format!("dangling host value #{i}"))),
            Value::Int(i) => Ok(i as f64),
        }
    }
}

impl HostEval for Arena<'_> {
    fn apply(&mut self, f: HostFn, args: &[Value]) -> Result<Value, KernelError> {
        match (f, args) {
            (HostFn::ClientUpdate, &[local, private, server]) => {
                let (l, p, s) = (self.get(local)?, self.get(private)?, self.get(server)?);
                let out = self
                    .callbacks
                    .cfun(l, p, s)
                    .and_then(|v| finite(v, "cfun"))
                    .map_err(|m| {
                        self.failure = Some(m.clone());
                        KernelError::Host(m)
                    })?;
                self.values.push(out);
                Ok(Value::Host(HostRef(self.values.len() as u32 - 1)))
            }
            (f, args) => Err(KernelError::Host(format!(
                "{f:?} applied to {} arguments",
                args.len()
            ))),
        }
    }
}

fn finite(v: f64, what: &str) -> Result<f64, String> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("{what} returned {v}"))
    }
}

/// Seed of round `k` (0-based) of a run seeded with `seed`.
pub fn round_seed(seed: u64, k: usize) -> u64 {
    seed ^ k as u64
}

/// Executes one round. `cfg.iters` is ignored.
pub fn run_round(cfg: &RunConfig) -> Result<(RoundResult, ConcreteTrace), RunError> {
    execute_round(cfg, 0, cfg.seed, &cfg.ldata)
}

/// Runs `cfg.iters` rounds, feeding each round's final local data into the
/// next and seeding round `k` with [`round_seed`].
pub fn run(cfg: &RunConfig) -> Result<RunResult, RunError> {
    cfg.validate()?;
    let mut ldata = cfg.ldata.clone();
    let mut rounds = Vec::with_capacity(cfg.iters);
    for k in 0..cfg.iters {
        let (res, trace) = execute_round(cfg, k, round_seed(cfg.seed, k), &ldata)?;
        ldata = res.final_ldata;
        rounds.push(trace);
    }
    Ok(RunResult {
        final_ldata: ldata,
        rounds,
    })
}

fn execute_round(
    cfg: &RunConfig,
    round: usize,
    seed: u64,
    ldata: &[f64],
) -> Result<(RoundResult, ConcreteTrace), RunError> {
    cfg.validate()?;
    let n = cfg.model.nodes;
    let binding = DataBinding {
        ldata: (0..n as u32).map(|i| Value::Host(HostRef(i))).collect(),
        pdata: (n as u32..2 * n as u32)
            .map(|i| Value::Host(HostRef(i)))
            .collect(),
        update: UpdateFn::Host,
    };
    let sys = models::instantiate(&cfg.model, &[], &binding)?;
    let mut arena = Arena {
        values: ldata.iter().chain(&cfg.pdata).copied().collect(),
        callbacks: cfg.callbacks.as_ref(),
        failure: None,
    };
    let mut rng = SplitMix64::new(seed);
    let mut trace = ConcreteTrace::empty(&cfg.model);
    let mut state = sys.initial().clone();

    macro_rules! kernel {
        ($e:expr) => {
            match $e {
                Ok(v) => v,
                Err(source) => {
                    return Err(match arena.failure.take() {
                        Some(message) => RunError::Callback {
                            round,
                            message,
                            trace,
                        },
                        None => RunError::Kernel {
                            round,
                            source,
                            trace,
                        },
                    })
                }
            }
        };
    }

    loop {
        let enabled = kernel!(sys.enabled_nodes(&state));
        if enabled.is_empty() {
            break;
        }
        let node = enabled[rng.below(enabled.len() as u64) as usize];
        let (label, next) = match kernel!(sys.step(&state, node, &mut arena)) {
            Some(x) => x,
            None => unreachable!("node {node} was reported enabled"),
        };
        let msg = match label.message() {
            Some(m) => Some(kernel!(EventMsg::resolve(&m, |v| arena.get(v)))),
            None => None,
        };
        trace.events.push(Event {
            step: trace.events.len(),
            node,
            action: Action::of(&label),
            channel: label.channel(),
            msg,
        });
        state = next;
    }
    if kernel!(sys.classify(&state)) != Status::AllDone {
        return Err(RunError::Deadlock { round, trace });
    }

    let mut final_ldata = Vec::with_capacity(n);
    for (i, &own) in ldata.iter().enumerate().take(n) {
        let v = match final_role(&cfg.model, i) {
            Role::Client => trace
                .events
                .iter()
                .find(|e| {
                    e.node == i && e.action == Action::Send && e.channel == Some(ChannelId::ClientsToServer)
                })
                .and_then(|e| e.msg)
                .map(|m| m.data())
                .unwrap_or(own),
            Role::Aggregator(ch) => {
                let updates: Vec<f64> = trace
                    .events
                    .iter()
                    .filter(|e| e.node == i && e.action == Action::Recv && e.channel == Some(ch))
                    .filter_map(|e| e.msg.map(|m| m.data()))
                    .collect();
                match cfg
                    .callbacks
                    .sfun(own, cfg.pdata[i], &updates)
                    .and_then(|v| finite(v, "sfun"))
                {
                    Ok(v) => v,
                    Err(message) => {
                        return Err(RunError::Callback {
                            round,
                            message,
                            trace,
                        })
                    }
                }
            }
        };
        final_ldata.push(v);
    }
    Ok((RoundResult { final_ldata }, trace))
}

enum Role {
    Client,
    /// Aggregates the updates it dequeues from this channel.
    Aggregator(ChannelId),
}

fn final_role(cfg: &ModelConfig, node: usize) -> Role {
    match cfg.variant {
        Variant::Centralised if node == cfg.server_id => Role::Aggregator(ChannelId::ClientsToServer),
        Variant::Centralised => Role::Client,
        Variant::Decentralised => Role::Aggregator(ChannelId::Buffer(node as u32)),
    }
}
