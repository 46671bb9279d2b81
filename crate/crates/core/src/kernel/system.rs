use std::collections::{HashMap, VecDeque};
use std::fmt;

use smallvec::smallvec;

use super::state::{Env, Frame, GlobalState, NodeState};
use super::term::{ChanExpr, Cond, Expr, HostFn, MsgExpr, Program, SharedVar, Term, TermId};
use super::value::{ChannelId, Message, Value};
use super::KernelError;

/// Upper bound on consecutive silent unfoldings (calls, sequencing) for one
/// node. Reaching it means a recursion without an intervening action.
const UNFOLD_LIMIT: usize = 100_000;

/// Which steps are visible transitions.
///
/// In `Micro` every assignment, branch resolution and skip elimination is
/// its own transition. In `Coarse` only sends and receives are; the rest is
/// executed eagerly after each communication.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum StepMode {
    #[default]
    Micro,
    Coarse,
}

/// What a transition did.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ActionLabel {
    Send {
        ch: ChannelId,
        msg: Message,
    },
    Recv {
        ch: ChannelId,
        msg: Message,
    },
    Assign {
        var: SharedVar,
        value: Value,
    },
    /// Branch resolution or elimination of a finished sequential part.
    Skip,
}

impl ActionLabel {
    pub fn channel(&self) -> Option<ChannelId> {
        match *self {
            ActionLabel::Send { ch, .. } | ActionLabel::Recv { ch, .. } => Some(ch),
            _ => None,
        }
    }

    pub fn message(&self) -> Option<Message> {
        match *self {
            ActionLabel::Send { msg, .. } | ActionLabel::Recv { msg, .. } => Some(msg),
            _ => None,
        }
    }

    pub fn action_name(&self) -> &'static str {
        match self {
            ActionLabel::Send { .. } => "send",
            ActionLabel::Recv { .. } => "recv",
            ActionLabel::Assign { .. } => "assign",
            ActionLabel::Skip => "skip",
        }
    }
}

impl fmt::Display for ActionLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ActionLabel::Send { ch, msg } => write!(f, "{ch}!{msg}"),
            ActionLabel::Recv { ch, msg } => write!(f, "{ch}?{msg}"),
            ActionLabel::Assign { var, value } => write!(f, "{{v{} = {value}}}", var.0),
            ActionLabel::Skip => f.write_str("tau"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Transition {
    pub node: usize,
    pub label: ActionLabel,
    pub successor: GlobalState,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    AllDone,
    Deadlock,
    Running,
}

/// Evaluator for [`HostFn`] applications.
pub trait HostEval {
    fn apply(&mut self, f: HostFn, args: &[Value]) -> Result<Value, KernelError>;
}

/// Evaluator for checker-mode systems, which never apply host functions.
pub struct NoHost;

impl HostEval for NoHost {
    fn apply(&mut self, f: HostFn, _args: &[Value]) -> Result<Value, KernelError> {
        Err(KernelError::Host(format!(
            "{f:?} applied in a system without host evaluator"
        )))
    }
}

/// Declared channels and their capacities, in a fixed order that also
/// indexes [`GlobalState::channels`].
#[derive(Debug, Clone, Default)]
pub struct ChannelLayout {
    ids: Vec<ChannelId>,
    capacities: Vec<usize>,
    index: HashMap<ChannelId, usize>,
}

impl ChannelLayout {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn declare(&mut self, id: ChannelId, capacity: usize) -> Result<(), KernelError> {
        if capacity == 0 {
            return Err(KernelError::ZeroCapacity(id.to_string()));
        }
        if self.index.contains_key(&id) {
            return Err(KernelError::Malformed(format!("channel `{id}` declared twice")));
        }
        self.index.insert(id, self.ids.len());
        self.ids.push(id);
        self.capacities.push(capacity);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn index_of(&self, id: ChannelId) -> Option<usize> {
        self.index.get(&id).copied()
    }

    pub fn capacity(&self, id: ChannelId) -> Option<usize> {
        self.index_of(id).map(|i| self.capacities[i])
    }

    pub fn iter(&self) -> impl Iterator<Item = (ChannelId, usize)> + '_ {
        self.ids.iter().copied().zip(self.capacities.iter().copied())
    }

    pub fn id_at(&self, idx: usize) -> ChannelId {
        self.ids[idx]
    }
}

/// Interleaving composition of one process per node over shared channels
/// and shared variables.
#[derive(Debug, Clone)]
pub struct System {
    program: Program,
    layout: ChannelLayout,
    initial: GlobalState,
    mode: StepMode,
}

struct Ctx<'a> {
    env: &'a [Value],
    shared: &'a [Value],
}

impl System {
    /// `entries[i]` is node `i`'s initial term; it must be closed (no local
    /// slots), typically a call whose arguments read shared variables.
    pub fn new(
        program: Program,
        layout: ChannelLayout,
        entries: &[TermId],
        shared: Vec<Value>,
        mode: StepMode,
    ) -> Result<System, KernelError> {
        if shared.len() != program.shared_names().len() {
            return Err(KernelError::Malformed(format!(
                "{} shared values for {} shared variables",
                shared.len(),
                program.shared_names().len()
            )));
        }
        let mut state = GlobalState {
            nodes: entries
                .iter()
                .map(|&term| NodeState {
                    frames: smallvec![Frame {
                        term,
                        env: Env::new(),
                    }],
                })
                .collect(),
            channels: vec![VecDeque::new(); layout.len()],
            shared,
        };
        let mut sys = System {
            program,
            layout,
            initial: state.clone(),
            mode,
        };
        for i in 0..entries.len() {
            sys.normalize(&mut state, i, &mut NoHost)?;
        }
        sys.initial = state;
        Ok(sys)
    }

    pub fn initial(&self) -> &GlobalState {
        &self.initial
    }

    pub fn program(&self) -> &Program {
        &self.program
    }

    pub fn layout(&self) -> &ChannelLayout {
        &self.layout
    }

    pub fn mode(&self) -> StepMode {
        self.mode
    }

    pub fn node_count(&self) -> usize {
        self.initial.nodes.len()
    }

    pub fn shared_var(&self, name: &str) -> Option<SharedVar> {
        self.program.shared_by_name(name)
    }

    /// True when the node's whole behaviour has reduced to `Skip`.
    pub fn node_done(&self, state: &GlobalState, node: usize) -> bool {
        let n = &state.nodes[node];
        n.frames.len() == 1 && matches!(self.program.term(n.top().term), Term::Skip)
    }

    /// Nodes whose head action can fire, ascending.
    pub fn enabled_nodes(&self, state: &GlobalState) -> Result<Vec<usize>, KernelError> {
        let mut out = Vec::new();
        for i in 0..state.nodes.len() {
            if self.is_enabled(state, i)? {
                out.push(i);
            }
        }
        Ok(out)
    }

    pub fn is_enabled(&self, state: &GlobalState, node: usize) -> Result<bool, KernelError> {
        let ns = &state.nodes[node];
        let top = ns.top();
        let ctx = Ctx {
            env: &top.env,
            shared: &state.shared,
        };
        Ok(match self.program.term(top.term) {
            Term::Skip => ns.frames.len() > 1,
            Term::Send { chan, .. } => {
                let (_, idx) = self.channel(chan, &ctx)?;
                state.channels[idx].len() < self.layout.capacities[idx]
            }
            Term::Recv {
                chan, binders, guard, ..
            } => {
                let (_, idx) = self.channel(chan, &ctx)?;
                match state.channels[idx].front() {
                    None => false,
                    Some(head) => {
                        let env = bind(&top.env, binders, head)?;
                        match guard {
                            None => true,
                            Some(g) => self.cond(
                                g,
                                &Ctx {
                                    env: &env,
                                    shared: &state.shared,
                                },
                            )?,
                        }
                    }
                }
            }
            Term::Assign { .. } | Term::If { .. } => true,
            Term::Call { .. } | Term::Seq { .. } => {
                return Err(KernelError::Malformed(
                    "unnormalized term at the head of a node".into(),
                ))
            }
        })
    }

    /// Fires node `node`'s head action if it is enabled.
    pub fn step(
        &self,
        state: &GlobalState,
        node: usize,
        host: &mut dyn HostEval,
    ) -> Result<Option<(ActionLabel, GlobalState)>, KernelError> {
        if !self.is_enabled(state, node)? {
            return Ok(None);
        }
        let mut next = state.clone();
        let label = self.fire(&mut next, node, host)?;
        self.normalize(&mut next, node, host)?;
        Ok(Some((label, next)))
    }

    /// Every transition enabled in `state`, ordered by ascending node id.
    /// At most one per node, since each node has a single head action.
    pub fn enabled_transitions(&self, state: &GlobalState) -> Result<Vec<Transition>, KernelError> {
        let mut out = Vec::new();
        for node in 0..state.nodes.len() {
            if let Some((label, successor)) = self.step(state, node, &mut NoHost)? {
                out.push(Transition {
                    node,
                    label,
                    successor,
                });
            }
        }
        Ok(out)
    }

    /// Successor of `state` under `t`, which must be enabled there.
    pub fn apply(&self, state: &GlobalState, t: &Transition) -> Result<GlobalState, KernelError> {
        match self.step(state, t.node, &mut NoHost)? {
            Some((label, next)) if label == t.label && next == t.successor => Ok(next),
            _ => Err(KernelError::NotEnabled { node: t.node }),
        }
    }

    pub fn classify(&self, state: &GlobalState) -> Result<Status, KernelError> {
        if (0..state.nodes.len()).all(|i| self.node_done(state, i)) {
            return Ok(Status::AllDone);
        }
        for i in 0..state.nodes.len() {
            if self.is_enabled(state, i)? {
                return Ok(Status::Running);
            }
        }
        Ok(Status::Deadlock)
    }

    fn fire(
        &self,
        state: &mut GlobalState,
        node: usize,
        host: &mut dyn HostEval,
    ) -> Result<ActionLabel, KernelError> {
        let n_nodes = state.nodes.len();
        let GlobalState {
            nodes,
            channels,
            shared,
        } = state;
        let ns = &mut nodes[node];
        let term_id = ns.top().term;
        match self.program.term(term_id) {
            Term::Skip => {
                ns.frames.pop();
                Ok(ActionLabel::Skip)
            }
            Term::Send { chan, msg, then } => {
                let top = ns.top();
                let ctx = Ctx {
                    env: &top.env,
                    shared,
                };
                let (ch, idx) = self.channel(chan, &ctx)?;
                let msg = self.message(msg, &ctx, host, n_nodes)?;
                channels[idx].push_back(msg);
                ns.top_mut().term = *then;
                Ok(ActionLabel::Send { ch, msg })
            }
            Term::Recv {
                chan, binders, then, ..
            } => {
                let top = ns.top();
                let (ch, idx) = self.channel(
                    chan,
                    &Ctx {
                        env: &top.env,
                        shared,
                    },
                )?;
                let msg = channels[idx]
                    .pop_front()
                    .ok_or(KernelError::NotEnabled { node })?;
                let env = bind(&top.env, binders, &msg)?;
                let top = ns.top_mut();
                top.env = env;
                top.term = *then;
                Ok(ActionLabel::Recv { ch, msg })
            }
            Term::Assign { var, value, then } => {
                let top = ns.top();
                let v = eval(
                    value,
                    &Ctx {
                        env: &top.env,
                        shared,
                    },
                    host,
                )?;
                shared[var.0 as usize] = v;
                ns.top_mut().term = *then;
                Ok(ActionLabel::Assign { var: *var, value: v })
            }
            Term::If { cond, then, els } => {
                let top = ns.top();
                let taken = self.cond(
                    cond,
                    &Ctx {
                        env: &top.env,
                        shared,
                    },
                )?;
                ns.top_mut().term = if taken { *then } else { *els };
                Ok(ActionLabel::Skip)
            }
            Term::Call { .. } | Term::Seq { .. } => Err(KernelError::Malformed(
                "unnormalized term at the head of a node".into(),
            )),
        }
    }

    /// Performs the silent steps at the head of `node` until it reaches a
    /// visible action (or `Skip`).
    fn normalize(
        &self,
        state: &mut GlobalState,
        node: usize,
        host: &mut dyn HostEval,
    ) -> Result<(), KernelError> {
        for _ in 0..UNFOLD_LIMIT {
            let ns = &mut state.nodes[node];
            let top = ns.top();
            match self.program.term(top.term) {
                Term::Call { def, args } => {
                    let d = self.program.def(*def);
                    let ctx = Ctx {
                        env: &top.env,
                        shared: &state.shared,
                    };
                    let mut env = Env::with_capacity(d.slot_count());
                    for a in args {
                        env.push(eval(a, &ctx, host)?);
                    }
                    env.resize(d.slot_count(), Value::Int(0));
                    *ns.top_mut() = Frame { term: d.body, env };
                }
                Term::Seq { first, then } => {
                    let pushed = Frame {
                        term: *first,
                        env: top.env.clone(),
                    };
                    ns.top_mut().term = *then;
                    ns.frames.push(pushed);
                }
                Term::Skip if self.mode == StepMode::Coarse && ns.frames.len() > 1 => {
                    ns.frames.pop();
                }
                Term::Assign { .. } | Term::If { .. } if self.mode == StepMode::Coarse => {
                    self.fire(state, node, host)?;
                }
                _ => return Ok(()),
            }
        }
        Err(KernelError::UnfoldLimit(UNFOLD_LIMIT))
    }

    fn channel(&self, chan: &ChanExpr, ctx: &Ctx) -> Result<(ChannelId, usize), KernelError> {
        let index = match &chan.index {
            None => None,
            Some(e) => {
                let v = int(eval(e, ctx, &mut NoHost)?, "channel index")?;
                Some(
                    u32::try_from(v)
                        .map_err(|_| KernelError::UnknownChannel(format!("{}[{v}]", chan.kind.name())))?,
                )
            }
        };
        let id = ChannelId::new(chan.kind, index)
            .ok_or_else(|| KernelError::Malformed(format!("bad channel {:?}", chan.kind)))?;
        let idx = self
            .layout
            .index_of(id)
            .ok_or_else(|| KernelError::UnknownChannel(id.to_string()))?;
        Ok((id, idx))
    }

    fn message(
        &self,
        m: &MsgExpr,
        ctx: &Ctx,
        host: &mut dyn HostEval,
        n_nodes: usize,
    ) -> Result<Message, KernelError> {
        Ok(match m {
            MsgExpr::Plain(e) => Message::Plain(eval(e, ctx, host)?),
            MsgExpr::Tagged { phase, from, data } => {
                let phase = int(eval(phase, ctx, host)?, "phase")?;
                let from = int(eval(from, ctx, host)?, "source")?;
                if !(1..=2).contains(&phase) {
                    return Err(KernelError::Type(format!("message phase {phase} not in {{1,2}}")));
                }
                if from < 0 || from as usize >= n_nodes {
                    return Err(KernelError::Type(format!("message source {from} out of range")));
                }
                Message::Tagged {
                    phase: phase as u8,
                    from: from as u32,
                    data: eval(data, ctx, host)?,
                }
            }
        })
    }

    fn cond(&self, c: &Cond, ctx: &Ctx) -> Result<bool, KernelError> {
        let mut h = NoHost;
        Ok(match c {
            Cond::Eq(a, b) => eval(a, ctx, &mut h)? == eval(b, ctx, &mut h)?,
            Cond::Ne(a, b) => eval(a, ctx, &mut h)? != eval(b, ctx, &mut h)?,
            Cond::Lt(a, b) => {
                int(eval(a, ctx, &mut h)?, "comparison")? < int(eval(b, ctx, &mut h)?, "comparison")?
            }
        })
    }
}

fn bind(env: &[Value], binders: &[u16], msg: &Message) -> Result<Env, KernelError> {
    if binders.len() != msg.arity() {
        return Err(KernelError::Type(format!(
            "receive binds {} fields but message `{msg}` has {}",
            binders.len(),
            msg.arity()
        )));
    }
    let mut env = Env::from_slice(env);
    match *msg {
        Message::Plain(v) => env[binders[0] as usize] = v,
        Message::Tagged { phase, from, data } => {
            env[binders[0] as usize] = Value::Int(phase as i64);
            env[binders[1] as usize] = Value::Int(from as i64);
            env[binders[2] as usize] = data;
        }
    }
    Ok(env)
}

fn int(v: Value, what: &str) -> Result<i64, KernelError> {
    v.as_int()
        .ok_or_else(|| KernelError::Type(format!("{what} must be an integer, got {v}")))
}

fn eval(e: &Expr, ctx: &Ctx, host: &mut dyn HostEval) -> Result<Value, KernelError> {
    let arith = |a: &Expr,
                 b: &Expr,
                 host: &mut dyn HostEval,
                 op: fn(i64, i64) -> Option<i64>,
                 name: &str|
     -> Result<Value, KernelError> {
        let x = int(eval(a, ctx, host)?, name)?;
        let y = int(eval(b, ctx, host)?, name)?;
        op(x, y)
            .map(Value::Int)
            .ok_or_else(|| KernelError::Overflow(format!("{x} {name} {y}")))
    };
    match e {
        Expr::Lit(v) => Ok(Value::Int(*v)),
        Expr::Local(s) => ctx
            .env
            .get(*s as usize)
            .copied()
            .ok_or_else(|| KernelError::Malformed(format!("unbound slot {s}"))),
        Expr::Shared(v) => ctx
            .shared
            .get(v.0 as usize)
            .copied()
            .ok_or_else(|| KernelError::Malformed(format!("unknown shared variable {}", v.0))),
        Expr::Add(a, b) => arith(a, b, host, i64::checked_add, "+"),
        Expr::Sub(a, b) => arith(a, b, host, i64::checked_sub, "-"),
        Expr::Mul(a, b) => arith(a, b, host, i64::checked_mul, "*"),
        Expr::Host(f, args) => {
            let vals = args
                .iter()
                .map(|a| eval(a, ctx, host))
                .collect::<Result<Vec<_>, _>>()?;
            host.apply(*f, &vals)
        }
    }
}
