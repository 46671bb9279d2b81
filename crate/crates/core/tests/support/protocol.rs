//! Message-level simulator of both orchestration protocols, written directly
//! against the protocol description with its own program counters and
//! queues. It shares no code with the kernel, so its verdicts are an
//! independent check on the term-level models. Its step granularity is
//! coarser (only communications and flag writes are steps), so only
//! verdicts are comparable, not state counts.

use std::collections::{HashSet, VecDeque};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Kind {
    Centralised { server: usize },
    Decentralised,
}

#[derive(Clone, Debug)]
pub struct Protocol {
    pub kind: Kind,
    pub n: usize,
    pub extra_update: bool,
    pub silent: Option<usize>,
    pub strict: bool,
    pub tonode_cap: usize,
}

impl Protocol {
    pub fn centralised(n: usize, server: usize) -> Self {
        Protocol {
            kind: Kind::Centralised { server },
            n,
            extra_update: false,
            silent: None,
            strict: false,
            tonode_cap: 2 * n.saturating_sub(1),
        }
    }

    pub fn decentralised(n: usize) -> Self {
        Protocol {
            kind: Kind::Decentralised,
            ..Self::centralised(n, 0)
        }
    }
}

type Msg = (u8, usize, i64);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
enum Pc {
    Start,
    Bcast(usize),
    Recv(usize),
    Recv2(usize),
    Reply { i: usize, to: usize, data: i64 },
    Stash { i: usize, msg: Msg },
    Drain(usize),
    Finish,
    Done,
    // centralised only
    Wait,
    Answer(i64),
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
struct World {
    pcs: Vec<Pc>,
    inbox: Vec<VecDeque<Msg>>,
    buffer: Vec<VecDeque<Msg>>,
    terminated: bool,
}

#[derive(Debug, Default)]
pub struct Summary {
    pub states: usize,
    pub deadlock_reachable: bool,
    pub terminated_reachable: bool,
    /// A state with no moves, not all nodes done and `terminated` false.
    pub stuck_unterminated: bool,
    /// A stuck state in which some node waits in its reply loop with a
    /// phase-2 message at the head of its inbox.
    pub stuck_on_phase2_head: bool,
    /// Every state with no moves has `terminated` set.
    pub every_end_terminated: bool,
}

impl Protocol {
    fn ldata(&self, i: usize) -> i64 {
        i as i64
    }

    fn settle(&self, me: usize, pc: Pc) -> Pc {
        let n = self.n;
        match pc {
            Pc::Bcast(id) => match (id..n).find(|&j| j != me) {
                Some(j) => Pc::Bcast(j),
                None => match self.kind {
                    Kind::Centralised { .. } => self.settle(me, Pc::Drain(0)),
                    Kind::Decentralised => self.settle(me, Pc::Recv(0)),
                },
            },
            Pc::Recv(i) => {
                let bound = if self.strict { n - 1 } else { 2 * (n - 1) };
                if i >= bound {
                    if self.strict {
                        self.settle(me, Pc::Recv2(0))
                    } else {
                        self.settle(me, Pc::Drain(0))
                    }
                } else {
                    pc
                }
            }
            Pc::Recv2(i) if i >= n - 1 => Pc::Finish,
            Pc::Drain(i) => {
                let bound = match self.kind {
                    Kind::Centralised { .. } if self.extra_update => n,
                    _ => n - 1,
                };
                if i >= bound {
                    Pc::Finish
                } else {
                    pc
                }
            }
            other => other,
        }
    }

    fn initial(&self) -> World {
        let pcs = (0..self.n)
            .map(|i| match self.kind {
                Kind::Centralised { server } if i != server => Pc::Wait,
                _ => Pc::Start,
            })
            .collect();
        World {
            pcs,
            inbox: vec![VecDeque::new(); self.n],
            buffer: vec![VecDeque::new(); self.n],
            terminated: false,
        }
    }

    fn moves(&self, w: &World) -> Vec<World> {
        let mut out = Vec::new();
        for me in 0..self.n {
            if let Some(next) = self.step(w, me) {
                out.push(next);
            }
        }
        out
    }

    fn step(&self, w: &World, me: usize) -> Option<World> {
        let n = self.n;
        let mut w2 = w.clone();
        let pc = match w.pcs[me] {
            Pc::Start => {
                w2.terminated = false;
                Pc::Bcast(0)
            }
            Pc::Bcast(j) => {
                let cap = match self.kind {
                    Kind::Centralised { .. } => 1,
                    Kind::Decentralised => self.tonode_cap,
                };
                if w.inbox[j].len() >= cap {
                    return None;
                }
                w2.inbox[j].push_back((1, me, self.ldata(me)));
                Pc::Bcast(j + 1)
            }
            Pc::Wait => {
                let (_, _, d) = w2.inbox[me].pop_front()?;
                if self.silent == Some(me) {
                    Pc::Done
                } else {
                    Pc::Answer(self.ldata(me) + d)
                }
            }
            Pc::Answer(d) => {
                let Kind::Centralised { server } = self.kind else {
                    unreachable!()
                };
                if w.buffer[server].len() >= n - 1 {
                    return None;
                }
                w2.buffer[server].push_back((0, me, d));
                Pc::Done
            }
            Pc::Recv(i) => {
                let head = *w.inbox[me].front()?;
                if self.strict && head.0 != 1 {
                    return None;
                }
                w2.inbox[me].pop_front();
                let (phase, from, d) = head;
                if phase == 1 {
                    if self.silent == Some(me) {
                        Pc::Recv(i + 1)
                    } else {
                        Pc::Reply {
                            i,
                            to: from,
                            data: self.ldata(me) + d,
                        }
                    }
                } else {
                    Pc::Stash { i, msg: head }
                }
            }
            Pc::Recv2(i) => {
                w2.inbox[me].pop_front()?;
                Pc::Recv2(i + 1)
            }
            Pc::Reply { i, to, data } => {
                if w.inbox[to].len() >= self.tonode_cap {
                    return None;
                }
                w2.inbox[to].push_back((2, me, data));
                Pc::Recv(i + 1)
            }
            Pc::Stash { i, msg } => {
                if w.buffer[me].len() >= n - 1 {
                    return None;
                }
                w2.buffer[me].push_back(msg);
                Pc::Recv(i + 1)
            }
            Pc::Drain(i) => {
                w2.buffer[me].pop_front()?;
                Pc::Drain(i + 1)
            }
            Pc::Finish => {
                w2.terminated = true;
                Pc::Done
            }
            Pc::Done => return None,
        };
        w2.pcs[me] = self.settle(me, pc);
        Some(w2)
    }

    pub fn explore(&self) -> Summary {
        let mut w0 = self.initial();
        for i in 0..self.n {
            w0.pcs[i] = self.settle(i, w0.pcs[i]);
        }
        let mut seen = HashSet::new();
        let mut stack = vec![w0.clone()];
        seen.insert(w0);
        let mut s = Summary {
            every_end_terminated: true,
            ..Summary::default()
        };
        while let Some(w) = stack.pop() {
            s.states += 1;
            s.terminated_reachable |= w.terminated;
            let next = self.moves(&w);
            if next.is_empty() {
                let all_done = w.pcs.iter().all(|p| *p == Pc::Done);
                if !all_done {
                    s.deadlock_reachable = true;
                    if !w.terminated {
                        s.stuck_unterminated = true;
                    }
                    let phase2_head = (0..self.n).any(|i| {
                        matches!(w.pcs[i], Pc::Recv(_)) && w.inbox[i].front().map(|m| m.0) == Some(2)
                    });
                    s.stuck_on_phase2_head |= phase2_head && !w.terminated;
                }
                s.every_end_terminated &= w.terminated;
            }
            for x in next {
                if seen.insert(x.clone()) {
                    stack.push(x);
                }
            }
        }
        s
    }
}
