use thiserror::Error;

use super::Predicate;
use crate::kernel::{ActionLabel, GlobalState, KernelError, Status, System};
use crate::trace::Event;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TraceStep {
    pub node: usize,
    pub label: ActionLabel,
}

/// A path from the initial state. For liveness violations `cycle_start`
/// marks where the repeating part begins: replaying `steps[cycle_start..]`
/// from the state reached after `steps[..cycle_start]` returns to that same
/// state. An empty cycle denotes the stutter loop of a terminal state.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Counterexample {
    pub steps: Vec<TraceStep>,
    pub cycle_start: Option<usize>,
}

#[derive(Debug, Error, PartialEq)]
pub enum ReplayError {
    #[error("step {index} ({node}: {label}) is not enabled")]
    StepNotEnabled {
        index: usize,
        node: usize,
        label: ActionLabel,
    },
    #[error("trace ends in a {0:?} state, not a deadlock")]
    NotDeadlock(Status),
    #[error("cycle start {0} lies beyond the trace")]
    BadCycleStart(usize),
    #[error("cycle does not return to its start state")]
    CycleOpen,
    #[error("empty cycle on a state that can still move")]
    NotTerminal,
    #[error("state {0} on the cycle satisfies the predicate")]
    CycleSatisfies(usize),
    #[error("lasso replay needs the predicate it violates")]
    MissingPredicate,
    #[error(transparent)]
    Kernel(#[from] KernelError),
}

impl Counterexample {
    pub fn is_lasso(&self) -> bool {
        self.cycle_start.is_some()
    }

    /// The steps as trace events, numbered from 0.
    pub fn events(&self) -> Vec<Event> {
        self.steps
            .iter()
            .enumerate()
            .map(|(i, s)| {
                Event::from_int_label(i, s.node, &s.label).expect("checker traces hold integer data only")
            })
            .collect()
    }

    /// Replays the trace through [`System::apply`] and checks that it
    /// witnesses its violation: a deadlock at the end for safety traces, or
    /// a closed cycle of states all falsifying `p` for lassos. Returns the
    /// final state.
    pub fn replay(&self, sys: &System, p: Option<&Predicate>) -> Result<GlobalState, ReplayError> {
        let mut states = vec![sys.initial().clone()];
        for (index, step) in self.steps.iter().enumerate() {
            let cur = states.last().expect("non-empty");
            let t = sys
                .enabled_transitions(cur)?
                .into_iter()
                .find(|t| t.node == step.node && t.label == step.label)
                .ok_or(ReplayError::StepNotEnabled {
                    index,
                    node: step.node,
                    label: step.label,
                })?;
            let next = sys.apply(cur, &t)?;
            states.push(next);
        }
        let last = states.last().expect("non-empty").clone();
        match self.cycle_start {
            None => match sys.classify(&last)? {
                Status::Deadlock => Ok(last),
                other => Err(ReplayError::NotDeadlock(other)),
            },
            Some(k) => {
                let p = p.ok_or(ReplayError::MissingPredicate)?;
                let rp = p.resolve(sys).map_err(|_| ReplayError::MissingPredicate)?;
                let start = states.get(k).ok_or(ReplayError::BadCycleStart(k))?;
                if *start != last {
                    return Err(ReplayError::CycleOpen);
                }
                if k == self.steps.len() && !sys.enabled_nodes(&last)?.is_empty() {
                    return Err(ReplayError::NotTerminal);
                }
                if let Some(i) = (k..states.len()).find(|&i| rp.holds(&states[i])) {
                    return Err(ReplayError::CycleSatisfies(i));
                }
                Ok(last)
            }
        }
    }
}
