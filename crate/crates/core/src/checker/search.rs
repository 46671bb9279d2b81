use std::collections::VecDeque;
use std::time::Instant;

use indexmap::IndexSet;
use rustc_hash::FxBuildHasher;

use super::trace::{Counterexample, TraceStep};
use super::{Budget, CheckError, Limit, StateSpaceStats, Strategy};
use crate::kernel::{GlobalState, KernelError, NoHost, Status, System};

const NO_PARENT: u32 = u32::MAX;
/// Bookkeeping bytes per stored state besides its encoding.
const ENTRY_OVERHEAD: usize = 48;

/// Visited states, in discovery order, as canonical encodings.
pub(super) struct StateStore {
    set: IndexSet<Box<[u8]>, FxBuildHasher>,
    bytes: usize,
    scratch: Vec<u8>,
}

impl StateStore {
    pub(super) fn new() -> Self {
        StateStore {
            set: IndexSet::default(),
            bytes: 0,
            scratch: Vec::with_capacity(256),
        }
    }

    /// Index of `s`, and whether it was newly inserted.
    pub(super) fn intern(&mut self, s: &GlobalState) -> Result<(usize, bool), KernelError> {
        self.scratch.clear();
        s.encode(&mut self.scratch)?;
        if let Some(i) = self.set.get_index_of(self.scratch.as_slice()) {
            return Ok((i, false));
        }
        self.bytes += self.scratch.len() + ENTRY_OVERHEAD;
        let (i, _) = self.set.insert_full(self.scratch.as_slice().into());
        Ok((i, true))
    }

    pub(super) fn get(&self, idx: usize) -> Result<GlobalState, KernelError> {
        GlobalState::decode(&self.set[idx])
    }

    pub(super) fn len(&self) -> usize {
        self.set.len()
    }

    pub(super) fn bytes(&self) -> usize {
        self.bytes
    }
}

pub(super) struct Guard {
    budget: Budget,
    start: Instant,
    ticks: u32,
}

impl Guard {
    pub(super) fn new(budget: Budget) -> Self {
        Guard {
            budget,
            start: Instant::now(),
            ticks: 0,
        }
    }

    pub(super) fn elapsed(&self) -> std::time::Duration {
        self.start.elapsed()
    }

    pub(super) fn check(&mut self, store: &StateStore, stats: &StateSpaceStats) -> Result<(), CheckError> {
        let limit = if store.len() > self.budget.max_states {
            Some(Limit::States)
        } else if store.bytes() > self.budget.max_bytes {
            Some(Limit::Memory)
        } else {
            self.ticks = self.ticks.wrapping_add(1);
            (self.ticks.is_multiple_of(1024) && self.start.elapsed() > self.budget.max_time)
                .then_some(Limit::Time)
        };
        match limit {
            None => Ok(()),
            Some(limit) => Err(CheckError::ResourceExceeded {
                limit,
                stats: StateSpaceStats {
                    states: store.len(),
                    stored_bytes: store.bytes(),
                    elapsed: self.start.elapsed(),
                    ..*stats
                },
            }),
        }
    }
}

pub(super) struct SearchRun {
    store: StateStore,
    /// `(parent index, node that moved)` per state.
    parents: Vec<(u32, u32)>,
    pub(super) stats: StateSpaceStats,
}

impl SearchRun {
    /// Path from the initial state to `target` along discovery parents.
    pub(super) fn counterexample(&self, sys: &System, target: usize) -> Result<Counterexample, CheckError> {
        let mut path = vec![target];
        let mut cur = target;
        while self.parents[cur].0 != NO_PARENT {
            cur = self.parents[cur].0 as usize;
            path.push(cur);
        }
        path.reverse();
        let mut steps = Vec::with_capacity(path.len());
        for w in path.windows(2) {
            let node = self.parents[w[1]].1 as usize;
            steps.push(step_between(sys, &self.store.get(w[0])?, node)?);
        }
        Ok(Counterexample {
            steps,
            cycle_start: None,
        })
    }
}

pub(super) fn step_between(sys: &System, from: &GlobalState, node: usize) -> Result<TraceStep, CheckError> {
    let (label, _) = sys
        .step(from, node, &mut NoHost)?
        .ok_or(KernelError::NotEnabled { node })?;
    Ok(TraceStep { node, label })
}

/// Exhaustive search from the initial state. `visit` is called once per
/// state when it is expanded, with its terminal status (`None` while it
/// still has successors).
pub(super) fn run(
    sys: &System,
    strategy: Strategy,
    budget: Budget,
    mut visit: impl FnMut(usize, &GlobalState, Option<Status>),
) -> Result<SearchRun, CheckError> {
    let mut guard = Guard::new(budget);
    let mut store = StateStore::new();
    let mut parents = Vec::new();
    let mut depth = Vec::new();
    let mut stats = StateSpaceStats::default();

    let (root, _) = store.intern(sys.initial())?;
    parents.push((NO_PARENT, 0));
    depth.push(0u32);
    let mut frontier = VecDeque::from([root]);
    stats.peak_frontier = 1;

    loop {
        let next = match strategy {
            Strategy::Dfs => frontier.pop_back(),
            Strategy::Bfs => frontier.pop_front(),
        };
        let Some(idx) = next else { break };
        let state = store.get(idx)?;
        let succs = sys.enabled_transitions(&state)?;
        let status = if succs.is_empty() {
            Some(sys.classify(&state)?)
        } else {
            None
        };
        visit(idx, &state, status);
        let d = depth[idx] + 1;
        for t in succs {
            stats.transitions += 1;
            let (j, fresh) = store.intern(&t.successor)?;
            if fresh {
                parents.push((idx as u32, t.node as u32));
                depth.push(d);
                stats.max_depth = stats.max_depth.max(d as usize);
                frontier.push_back(j);
            }
        }
        stats.peak_frontier = stats.peak_frontier.max(frontier.len());
        guard.check(&store, &stats)?;
    }
    stats.states = store.len();
    stats.stored_bytes = store.bytes();
    stats.elapsed = guard.elapsed();
    Ok(SearchRun {
        store,
        parents,
        stats,
    })
}
