//! Naive recursive interleaving executor.
//!
//! Builds the complete reachable graph by plain recursion over
//! `enabled_transitions`, keyed by full structural state in a `BTreeMap`
//! (no hashing, no encoding, no search strategy). Verdicts are derived from
//! the explicit graph with textbook algorithms that the checker does not use.

use std::collections::{BTreeMap, BTreeSet};

use flcsp_core::kernel::{ActionLabel, GlobalState, Status, System, Value};

pub struct Edge {
    pub node: usize,
    pub label: ActionLabel,
    pub to: usize,
}

pub struct Graph {
    pub states: Vec<GlobalState>,
    pub edges: Vec<Vec<Edge>>,
    pub status: Vec<Status>,
}

impl Graph {
    pub fn state_count(&self) -> usize {
        self.states.len()
    }

    pub fn transition_count(&self) -> usize {
        self.edges.iter().map(Vec::len).sum()
    }

    pub fn terminated(&self, i: usize) -> bool {
        self.states[i].shared[0] == Value::Int(1)
    }

    pub fn deadlocks(&self) -> Vec<usize> {
        (0..self.states.len())
            .filter(|&i| self.status[i] == Status::Deadlock)
            .collect()
    }

    pub fn all_done(&self) -> Vec<usize> {
        (0..self.states.len())
            .filter(|&i| self.status[i] == Status::AllDone)
            .collect()
    }

    pub fn reaches_terminated(&self) -> bool {
        (0..self.states.len()).any(|i| self.terminated(i))
    }

    /// Whether some reachable cycle (terminal states stutter) consists only
    /// of non-terminated states. Kahn-style peeling: repeatedly discard
    /// non-terminated states with no remaining non-terminated successor; any
    /// survivor lies on or leads into such a cycle.
    pub fn has_non_terminated_cycle(&self) -> bool {
        let n = self.states.len();
        let bad: Vec<bool> = (0..n).map(|i| !self.terminated(i)).collect();
        let mut preds: Vec<Vec<usize>> = vec![Vec::new(); n];
        let mut out_deg = vec![0usize; n];
        for i in (0..n).filter(|&i| bad[i]) {
            if self.edges[i].is_empty() {
                // stutter loop
                out_deg[i] = 1;
                preds[i].push(i);
            }
            for e in &self.edges[i] {
                if bad[e.to] {
                    out_deg[i] += 1;
                    preds[e.to].push(i);
                }
            }
        }
        let mut alive = bad.clone();
        let mut work: Vec<usize> = (0..n).filter(|&i| bad[i] && out_deg[i] == 0).collect();
        while let Some(i) = work.pop() {
            alive[i] = false;
            for &p in &preds[i] {
                out_deg[p] -= 1;
                if out_deg[p] == 0 && alive[p] {
                    work.push(p);
                }
            }
        }
        alive.iter().any(|&a| a)
    }

    /// Every distinct value of `profile` accumulated along a maximal path
    /// from the initial state, computed by memoised recursion.
    pub fn path_profiles<K: Ord + Clone>(
        &self,
        key: impl Fn(usize, &ActionLabel) -> Option<K>,
    ) -> BTreeSet<BTreeMap<K, usize>> {
        let mut memo: Vec<Option<BTreeSet<BTreeMap<K, usize>>>> = vec![None; self.states.len()];
        self.profiles_from(0, &key, &mut memo)
    }

    fn profiles_from<K: Ord + Clone>(
        &self,
        i: usize,
        key: &impl Fn(usize, &ActionLabel) -> Option<K>,
        memo: &mut Vec<Option<BTreeSet<BTreeMap<K, usize>>>>,
    ) -> BTreeSet<BTreeMap<K, usize>> {
        if let Some(done) = &memo[i] {
            return done.clone();
        }
        let mut out = BTreeSet::new();
        if self.edges[i].is_empty() {
            out.insert(BTreeMap::new());
        }
        for e in &self.edges[i] {
            for mut p in self.profiles_from(e.to, key, memo) {
                if let Some(k) = key(e.node, &e.label) {
                    *p.entry(k).or_insert(0) += 1;
                }
                out.insert(p);
            }
        }
        memo[i] = Some(out.clone());
        out
    }
}

pub fn enumerate(sys: &System) -> Graph {
    let mut index = BTreeMap::new();
    let mut g = Graph {
        states: Vec::new(),
        edges: Vec::new(),
        status: Vec::new(),
    };
    visit(sys, sys.initial().clone(), &mut index, &mut g);
    g
}

fn visit(sys: &System, s: GlobalState, index: &mut BTreeMap<GlobalState, usize>, g: &mut Graph) -> usize {
    if let Some(&i) = index.get(&s) {
        return i;
    }
    let i = g.states.len();
    index.insert(s.clone(), i);
    g.states.push(s.clone());
    g.edges.push(Vec::new());
    g.status.push(sys.classify(&s).expect("classify"));
    for t in sys.enabled_transitions(&s).expect("enabled transitions") {
        let to = visit(sys, t.successor, index, g);
        g.edges[i].push(Edge {
            node: t.node,
            label: t.label,
            to,
        });
    }
    i
}

/// Runs `f` on a thread with a large stack; the recursion depth equals the
/// longest path.
pub fn with_stack<T: Send + 'static>(f: impl FnOnce() -> T + Send + 'static) -> T {
    std::thread::Builder::new()
        .stack_size(512 << 20)
        .spawn(f)
        .expect("spawn")
        .join()
        .expect("oracle thread panicked")
}
