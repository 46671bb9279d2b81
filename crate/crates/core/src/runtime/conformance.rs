//! Whether a concrete trace is a path of the abstract model.
//!
//! Payloads are dropped: the runtime's callbacks compute values the
//! addition-only model cannot, so only the control skeleton of each event is
//! compared. Because a node has at most one enabled transition, the event's
//! node fixes the abstract transition and matching is a single walk.

use thiserror::Error;

use super::ConcreteTrace;
use crate::kernel::{ActionLabel, KernelError, NoHost};
use crate::models::{SystemModel, Variant};
use crate::trace::{Action, Event};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Conformance {
    /// Index of the first event with no matching abstract transition.
    pub first_divergence: Option<usize>,
}

impl Conformance {
    pub fn conforms(&self) -> bool {
        self.first_divergence.is_none()
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ConformanceError {
    #[error("trace of a {trace} system checked against a {model} model")]
    ShapeMismatch { trace: String, model: String },
    #[error(transparent)]
    Kernel(#[from] KernelError),
}

fn shape(variant: Variant, nodes: usize, server: Option<usize>) -> String {
    match server {
        Some(s) => format!("{} n={nodes} srv={s}", variant.name()),
        None => format!("{} n={nodes}", variant.name()),
    }
}

/// Same node, action and channel, and for tagged messages the same phase
/// and sender.
fn matches(e: &Event, label: &ActionLabel) -> bool {
    if e.action != Action::of(label) || e.channel != label.channel() {
        return false;
    }
    match (e.msg, label.message()) {
        (None, None) => true,
        (Some(c), Some(a)) => c.phase() == a.phase() && c.from_node() == a.from_node(),
        _ => false,
    }
}

pub fn conforms(model: &SystemModel, trace: &ConcreteTrace) -> Result<Conformance, ConformanceError> {
    let cfg = model.config();
    let server = (cfg.variant == Variant::Centralised).then_some(cfg.server_id);
    if (trace.variant, trace.nodes, trace.server_id) != (cfg.variant, cfg.nodes, server) {
        return Err(ConformanceError::ShapeMismatch {
            trace: shape(trace.variant, trace.nodes, trace.server_id),
            model: shape(cfg.variant, cfg.nodes, server),
        });
    }
    let sys = model.system();
    let mut state = sys.initial().clone();
    for (i, e) in trace.events.iter().enumerate() {
        let next = match (e.node < cfg.nodes)
            .then(|| sys.step(&state, e.node, &mut NoHost))
            .transpose()?
            .flatten()
        {
            Some((label, next)) if matches(e, &label) => next,
            _ => {
                return Ok(Conformance {
                    first_divergence: Some(i),
                })
            }
        };
        state = next;
    }
    Ok(Conformance {
        first_divergence: None,
    })
}
