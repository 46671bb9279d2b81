//! Nested depth-first search for `[]<> p`.
//!
//! Runs on the product of the state graph with the two-state Büchi automaton
//! for `<>[] !p`: `q0` loops on anything and moves to `q1` on a `!p` state;
//! `q1` (accepting) loops on `!p` states only. Terminal states get a stutter
//! self-loop. An accepting cycle in the product is exactly a reachable cycle
//! of `!p` states.

use super::search::{step_between, Guard, StateStore};
use super::trace::{Counterexample, TraceStep};
use super::{Budget, CheckError, CheckOutcome, ResolvedPredicate, StateSpaceStats, Verdict};
use crate::kernel::System;

/// Outer stack up to the seed, and the inner stack closing the cycle.
type Lasso = (Vec<DfsFrame>, Vec<DfsFrame>);

const OUTER_Q0: u8 = 1;
const OUTER_Q1: u8 = 2;
const INNER: u8 = 4;

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
struct PState {
    state: u32,
    accepting: bool,
}

/// Product edge: target and the node that moved (`None` for a stutter).
#[derive(Clone, Copy)]
struct PEdge {
    to: PState,
    node: Option<u32>,
}

struct DfsFrame {
    at: PState,
    /// Edge by which this frame was entered.
    via: Option<u32>,
    succs: Vec<PEdge>,
    next: usize,
}

struct Ndfs<'a> {
    sys: &'a System,
    p: &'a ResolvedPredicate,
    store: StateStore,
    /// Per system state: whether it falsifies `p`.
    bad: Vec<bool>,
    flags: Vec<u8>,
    guard: Guard,
    stats: StateSpaceStats,
}

impl<'a> Ndfs<'a> {
    fn intern(&mut self, s: &crate::kernel::GlobalState) -> Result<u32, CheckError> {
        let (i, fresh) = self.store.intern(s)?;
        if fresh {
            self.bad.push(!self.p.holds(s));
            self.flags.push(0);
        }
        Ok(i as u32)
    }

    /// System-level successors, or a stutter loop for terminal states.
    fn system_succs(&mut self, at: u32) -> Result<Vec<(u32, Option<u32>)>, CheckError> {
        let s = self.store.get(at as usize)?;
        let ts = self.sys.enabled_transitions(&s)?;
        if ts.is_empty() {
            return Ok(vec![(at, None)]);
        }
        let mut out = Vec::with_capacity(ts.len());
        for t in ts {
            out.push((self.intern(&t.successor)?, Some(t.node as u32)));
        }
        self.guard.check(&self.store, &self.stats)?;
        Ok(out)
    }

    fn product_succs(&mut self, at: PState) -> Result<Vec<PEdge>, CheckError> {
        let mut out = Vec::new();
        for (to, node) in self.system_succs(at.state)? {
            if !at.accepting {
                out.push(PEdge {
                    to: PState {
                        state: to,
                        accepting: false,
                    },
                    node,
                });
            }
            if self.bad[to as usize] {
                out.push(PEdge {
                    to: PState {
                        state: to,
                        accepting: true,
                    },
                    node,
                });
            }
        }
        self.stats.transitions += out.len();
        Ok(out)
    }

    fn outer_flag(p: PState) -> u8 {
        if p.accepting {
            OUTER_Q1
        } else {
            OUTER_Q0
        }
    }

    fn frame(&mut self, at: PState, via: Option<u32>) -> Result<DfsFrame, CheckError> {
        Ok(DfsFrame {
            at,
            via,
            succs: self.product_succs(at)?,
            next: 0,
        })
    }

    /// Outer search from `root`. Returns the outer stack (root to seed)
    /// together with the inner stack closing the cycle, if one is found.
    fn outer(&mut self, root: PState) -> Result<Option<Lasso>, CheckError> {
        self.flags[root.state as usize] |= Self::outer_flag(root);
        let mut stack = vec![self.frame(root, None)?];
        loop {
            self.stats.max_depth = self.stats.max_depth.max(stack.len() - 1);
            self.stats.peak_frontier = self.stats.peak_frontier.max(stack.len());
            let top = stack.last_mut().expect("non-empty");
            if top.next < top.succs.len() {
                let e = top.succs[top.next];
                top.next += 1;
                let f = Self::outer_flag(e.to);
                if self.flags[e.to.state as usize] & f == 0 {
                    self.flags[e.to.state as usize] |= f;
                    let fr = self.frame(e.to, e.node)?;
                    stack.push(fr);
                }
                continue;
            }
            let at = top.at;
            if at.accepting {
                if let Some(cycle) = self.inner(at)? {
                    return Ok(Some((stack, cycle)));
                }
            }
            stack.pop();
            if stack.is_empty() {
                return Ok(None);
            }
        }
    }

    /// Inner search for a path from `seed` back to itself through accepting
    /// product states. Inner marks persist across calls.
    fn inner(&mut self, seed: PState) -> Result<Option<Vec<DfsFrame>>, CheckError> {
        self.flags[seed.state as usize] |= INNER;
        let mut stack = vec![self.frame(seed, None)?];
        while let Some(top) = stack.last_mut() {
            if top.next < top.succs.len() {
                let e = top.succs[top.next];
                top.next += 1;
                if !e.to.accepting {
                    continue;
                }
                if e.to == seed {
                    stack.push(DfsFrame {
                        at: seed,
                        via: e.node,
                        succs: Vec::new(),
                        next: 0,
                    });
                    return Ok(Some(stack));
                }
                if self.flags[e.to.state as usize] & INNER == 0 {
                    self.flags[e.to.state as usize] |= INNER;
                    let fr = self.frame(e.to, e.node)?;
                    stack.push(fr);
                }
            } else {
                stack.pop();
            }
        }
        Ok(None)
    }

    fn lasso(&self, outer: &[DfsFrame], inner: &[DfsFrame]) -> Result<Counterexample, CheckError> {
        let mut steps = Vec::new();
        self.collect_steps(outer, &mut steps)?;
        let cycle_start = steps.len();
        self.collect_steps(inner, &mut steps)?;
        Ok(Counterexample {
            steps,
            cycle_start: Some(cycle_start),
        })
    }

    fn collect_steps(&self, frames: &[DfsFrame], steps: &mut Vec<TraceStep>) -> Result<(), CheckError> {
        for w in frames.windows(2) {
            if let Some(node) = w[1].via {
                let from = self.store.get(w[0].at.state as usize)?;
                steps.push(step_between(self.sys, &from, node as usize)?);
            }
        }
        Ok(())
    }
}

pub(super) fn run(sys: &System, p: &ResolvedPredicate, budget: Budget) -> Result<CheckOutcome, CheckError> {
    let mut ndfs = Ndfs {
        sys,
        p,
        store: StateStore::new(),
        bad: Vec::new(),
        flags: Vec::new(),
        guard: Guard::new(budget),
        stats: StateSpaceStats::default(),
    };
    let s0 = ndfs.intern(sys.initial())?;
    let mut roots = vec![PState {
        state: s0,
        accepting: false,
    }];
    if ndfs.bad[s0 as usize] {
        roots.push(PState {
            state: s0,
            accepting: true,
        });
    }
    let mut verdict = Verdict::Valid;
    for root in roots {
        if ndfs.flags[root.state as usize] & Ndfs::outer_flag(root) != 0 {
            continue;
        }
        if let Some((outer, inner)) = ndfs.outer(root)? {
            verdict = Verdict::Violated(Some(ndfs.lasso(&outer, &inner)?));
            break;
        }
    }
    ndfs.stats.states = ndfs.store.len();
    ndfs.stats.stored_bytes = ndfs.store.bytes();
    ndfs.stats.elapsed = ndfs.guard.elapsed();
    Ok(CheckOutcome {
        verdict,
        stats: ndfs.stats,
    })
}
