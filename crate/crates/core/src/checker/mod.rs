//! Explicit-state verification: deadlock freedom, reachability of a
//! predicate, and `[]<> p` via nested depth-first search.
//!
//! All searches share one state store that keeps each visited state as its
//! canonical byte encoding. Membership is decided on the full encoding, so
//! digest collisions can never merge distinct states.

mod liveness;
mod search;
mod trace;

use std::fmt;
use std::time::Duration;

use thiserror::Error;

use crate::kernel::{GlobalState, KernelError, SharedVar, System, Value};
use crate::models::{SystemModel, TERMINATED};

pub use trace::{Counterexample, ReplayError, TraceStep};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Strategy {
    #[default]
    Dfs,
    Bfs,
}

impl Strategy {
    pub fn name(self) -> &'static str {
        match self {
            Strategy::Dfs => "dfs",
            Strategy::Bfs => "bfs",
        }
    }
}

/// Resource caps. Exceeding any of them aborts the search with
/// [`CheckError::ResourceExceeded`] instead of producing a verdict.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Budget {
    pub max_states: usize,
    /// Approximate bytes held by the visited store.
    pub max_bytes: usize,
    pub max_time: Duration,
}

impl Default for Budget {
    fn default() -> Self {
        Budget {
            max_states: 10_000_000,
            max_bytes: 8 << 30,
            max_time: Duration::from_secs(300),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Limit {
    States,
    Memory,
    Time,
}

impl fmt::Display for Limit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Limit::States => "state",
            Limit::Memory => "memory",
            Limit::Time => "time",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct StateSpaceStats {
    pub states: usize,
    pub transitions: usize,
    pub max_depth: usize,
    pub peak_frontier: usize,
    /// Estimated bytes held by the visited store.
    pub stored_bytes: usize,
    pub elapsed: Duration,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CheckError {
    #[error("{limit} budget exceeded after {} states", stats.states)]
    ResourceExceeded { limit: Limit, stats: StateSpaceStats },
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error("predicate `{0}` refers to an unknown shared variable")]
    UnknownPredicateVar(String),
}

/// A named condition `shared_var == value` over global states.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Predicate {
    pub name: String,
    pub var: String,
    pub value: i64,
}

impl Predicate {
    /// `terminated == True`.
    pub fn terminated() -> Self {
        Predicate {
            name: "Terminated".into(),
            var: TERMINATED.into(),
            value: 1,
        }
    }

    pub(crate) fn resolve(&self, sys: &System) -> Result<ResolvedPredicate, CheckError> {
        sys.shared_var(&self.var)
            .map(|var| ResolvedPredicate {
                var,
                value: Value::Int(self.value),
            })
            .ok_or_else(|| CheckError::UnknownPredicateVar(self.name.clone()))
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct ResolvedPredicate {
    var: SharedVar,
    value: Value,
}

impl ResolvedPredicate {
    pub(crate) fn holds(&self, s: &GlobalState) -> bool {
        s.shared[self.var.0 as usize] == self.value
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Verdict {
    Valid,
    /// Reachability violations carry no trace: they mean exhaustive search
    /// found no witness.
    Violated(Option<Counterexample>),
}

impl Verdict {
    pub fn is_valid(&self) -> bool {
        matches!(self, Verdict::Valid)
    }

    pub fn counterexample(&self) -> Option<&Counterexample> {
        match self {
            Verdict::Violated(cx) => cx.as_ref(),
            Verdict::Valid => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub verdict: Verdict,
    pub stats: StateSpaceStats,
}

/// Entry point for all checks, carrying the resource budget.
#[derive(Debug, Clone, Copy, Default)]
pub struct Checker {
    pub budget: Budget,
}

impl Checker {
    pub fn new(budget: Budget) -> Self {
        Checker { budget }
    }

    /// Visits every reachable state once.
    pub fn explore(&self, model: &SystemModel, strategy: Strategy) -> Result<StateSpaceStats, CheckError> {
        let run = search::run(model.system(), strategy, self.budget, |_, _, _| {})?;
        Ok(run.stats)
    }

    /// Valid iff no reachable state is a deadlock. The whole state space is
    /// always explored so both strategies report the same counts; under BFS
    /// the reported deadlock is one at minimal depth.
    pub fn check_deadlock_free(
        &self,
        model: &SystemModel,
        strategy: Strategy,
    ) -> Result<CheckOutcome, CheckError> {
        let sys = model.system();
        let mut found = None;
        let run = search::run(sys, strategy, self.budget, |idx, _, status| {
            if found.is_none() && status == Some(crate::kernel::Status::Deadlock) {
                found = Some(idx);
            }
        })?;
        let verdict = match found {
            None => Verdict::Valid,
            Some(idx) => Verdict::Violated(Some(run.counterexample(sys, idx)?)),
        };
        Ok(CheckOutcome {
            verdict,
            stats: run.stats,
        })
    }

    /// Valid iff some reachable state satisfies `p`.
    pub fn check_reaches(
        &self,
        model: &SystemModel,
        p: &Predicate,
        strategy: Strategy,
    ) -> Result<CheckOutcome, CheckError> {
        let sys = model.system();
        let rp = p.resolve(sys)?;
        let mut found = false;
        let run = search::run(sys, strategy, self.budget, |_, s, _| {
            found |= rp.holds(s);
        })?;
        Ok(CheckOutcome {
            verdict: if found {
                Verdict::Valid
            } else {
                Verdict::Violated(None)
            },
            stats: run.stats,
        })
    }

    /// Valid iff every infinite path (terminal states stutter) visits `p`
    /// states infinitely often, i.e. no reachable cycle consists solely of
    /// states falsifying `p`.
    pub fn check_always_eventually(
        &self,
        model: &SystemModel,
        p: &Predicate,
    ) -> Result<CheckOutcome, CheckError> {
        let sys = model.system();
        let rp = p.resolve(sys)?;
        liveness::run(sys, &rp, self.budget)
    }
}

pub fn explore(model: &SystemModel, strategy: Strategy) -> Result<StateSpaceStats, CheckError> {
    Checker::default().explore(model, strategy)
}

pub fn check_deadlock_free(model: &SystemModel, strategy: Strategy) -> Result<CheckOutcome, CheckError> {
    Checker::default().check_deadlock_free(model, strategy)
}

pub fn check_reaches(
    model: &SystemModel,
    p: &Predicate,
    strategy: Strategy,
) -> Result<CheckOutcome, CheckError> {
    Checker::default().check_reaches(model, p, strategy)
}

pub fn check_always_eventually(model: &SystemModel, p: &Predicate) -> Result<CheckOutcome, CheckError> {
    Checker::default().check_always_eventually(model, p)
}
