//! The centralised and decentralised one-shot orchestration systems as kernel
//! terms, and the mutations used to test the checker's sensitivity.
//!
//! Definitions transliterate the CSP processes: `CeServer`, `CeClient`,
//! `CeBroadcastMsg`, `CeRcvMsgs` for the star topology and
//! `FlDecentralised`, `DeBroadcastMsg`, `DeRcvMsgs`, `DeRcvMsgs2` for the
//! clique. Each node starts directly in its role process; the role dispatch
//! on `nodeId == flSrvId` is resolved at construction.

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

use crate::kernel::{
    ChanExpr, ChannelId, ChannelKind, ChannelLayout, DefId, Expr, HostFn, KernelError, MsgExpr,
    ProgramBuilder, SharedVar, StepMode, System, TermId, Value,
};

/// Name of the shared termination flag.
pub const TERMINATED: &str = "terminated";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variant {
    Centralised,
    Decentralised,
}

impl Variant {
    pub fn name(self) -> &'static str {
        match self {
            Variant::Centralised => "centralised",
            Variant::Decentralised => "decentralised",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ModelError {
    #[error("invalid model configuration: {0}")]
    InvalidConfig(String),
    #[error("mutation {mutation} does not apply: {reason}")]
    InapplicableMutation { mutation: String, reason: String },
    #[error(transparent)]
    Kernel(#[from] KernelError),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModelConfig {
    pub variant: Variant,
    pub nodes: usize,
    /// Server node of the centralised variant. Ignored for decentralised.
    pub server_id: usize,
    pub ldata: Vec<i64>,
    pub pdata: Vec<i64>,
    pub capacity_override: BTreeMap<ChannelKind, usize>,
    pub step_mode: StepMode,
}

impl ModelConfig {
    pub fn centralised(nodes: usize, server_id: usize) -> Self {
        ModelConfig {
            variant: Variant::Centralised,
            nodes,
            server_id,
            ldata: vec![0; nodes],
            pdata: vec![0; nodes],
            capacity_override: BTreeMap::new(),
            step_mode: StepMode::Micro,
        }
    }

    pub fn decentralised(nodes: usize) -> Self {
        ModelConfig {
            variant: Variant::Decentralised,
            ..Self::centralised(nodes, 0)
        }
    }

    pub fn with_ldata(mut self, ldata: Vec<i64>) -> Self {
        self.ldata = ldata;
        self
    }

    pub fn with_pdata(mut self, pdata: Vec<i64>) -> Self {
        self.pdata = pdata;
        self
    }

    pub fn with_step_mode(mut self, mode: StepMode) -> Self {
        self.step_mode = mode;
        self
    }

    pub fn with_capacity(mut self, kind: ChannelKind, capacity: usize) -> Self {
        self.capacity_override.insert(kind, capacity);
        self
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |m: String| Err(ModelError::InvalidConfig(m));
        if self.nodes == 0 {
            return bad("at least one node is required".into());
        }
        if self.nodes > u32::MAX as usize {
            return bad(format!("{} nodes is too many", self.nodes));
        }
        if self.variant == Variant::Centralised && self.server_id >= self.nodes {
            return bad(format!(
                "server id {} out of range for {} nodes",
                self.server_id, self.nodes
            ));
        }
        if self.ldata.len() != self.nodes {
            return bad(format!(
                "{} ldata values for {} nodes",
                self.ldata.len(),
                self.nodes
            ));
        }
        if self.pdata.len() != self.nodes {
            return bad(format!(
                "{} pdata values for {} nodes",
                self.pdata.len(),
                self.nodes
            ));
        }
        for (&kind, &cap) in &self.capacity_override {
            if !kind_belongs(self.variant, kind) {
                return bad(format!(
                    "channel kind `{}` does not exist in the {} model",
                    kind.name(),
                    self.variant
                ));
            }
            if cap == 0 {
                return Err(KernelError::ZeroCapacity(kind.name().into()).into());
            }
        }
        Ok(())
    }

    /// Capacity of `kind` without overrides.
    pub fn default_capacity(&self, kind: ChannelKind) -> usize {
        let n = self.nodes;
        match kind {
            ChannelKind::ServerToClient => 1,
            ChannelKind::ClientsToServer | ChannelKind::Buffer => n - 1,
            ChannelKind::ToNode => 2 * (n - 1),
        }
    }

    pub fn capacity(&self, kind: ChannelKind) -> usize {
        self.capacity_override
            .get(&kind)
            .copied()
            .unwrap_or_else(|| self.default_capacity(kind))
    }
}

fn kind_belongs(variant: Variant, kind: ChannelKind) -> bool {
    match variant {
        Variant::Centralised => {
            matches!(kind, ChannelKind::ServerToClient | ChannelKind::ClientsToServer)
        }
        Variant::Decentralised => matches!(kind, ChannelKind::ToNode | ChannelKind::Buffer),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mutation {
    /// The centralised server waits for `noNodes` updates instead of
    /// `noNodes - 1`.
    ExpectExtraUpdate,
    /// One node never sends its reply. `None` designates the lowest-id
    /// client (centralised) or node 0 (decentralised).
    SkipReply {
        node: Option<usize>,
    },
    /// Decentralised nodes accept only phase-1 messages during the reply
    /// loop instead of buffering early phase-2 messages.
    StrictPhaseOrder,
    CapacityOverride {
        kind: ChannelKind,
        capacity: usize,
    },
}

impl Mutation {
    pub fn name(&self) -> String {
        match self {
            Mutation::ExpectExtraUpdate => "expect-extra-update".into(),
            Mutation::SkipReply { node: None } => "skip-reply".into(),
            Mutation::SkipReply { node: Some(n) } => format!("skip-reply[{n}]"),
            Mutation::StrictPhaseOrder => "strict-phase-order".into(),
            Mutation::CapacityOverride { kind, capacity } => {
                format!("capacity[{}={capacity}]", kind.name())
            }
        }
    }
}

impl fmt::Display for Mutation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

/// How the client update inside the models is computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum UpdateFn {
    /// `ldata + received`, as in the abstract models.
    Add,
    /// `cfun(ldata, pdata, received)` through the host evaluator.
    Host,
}

/// Initial data and update function used to instantiate a model.
#[derive(Debug, Clone)]
pub(crate) struct DataBinding {
    pub ldata: Vec<Value>,
    pub pdata: Vec<Value>,
    pub update: UpdateFn,
}

impl DataBinding {
    fn from_config(cfg: &ModelConfig) -> Self {
        DataBinding {
            ldata: cfg.ldata.iter().copied().map(Value::Int).collect(),
            pdata: cfg.pdata.iter().copied().map(Value::Int).collect(),
            update: UpdateFn::Add,
        }
    }
}

/// A built system together with the configuration and mutations that
/// produced it. Immutable after construction.
#[derive(Debug, Clone)]
pub struct SystemModel {
    system: System,
    config: ModelConfig,
    mutations: Vec<Mutation>,
}

impl SystemModel {
    pub fn system(&self) -> &System {
        &self.system
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn mutations(&self) -> &[Mutation] {
        &self.mutations
    }

    pub fn variant(&self) -> Variant {
        self.config.variant
    }

    /// Effective capacity of `kind`, taking capacity mutations into account.
    pub fn capacity(&self, kind: ChannelKind) -> usize {
        effective_config(&self.config, &self.mutations).capacity(kind)
    }
}

pub fn build_centralised(cfg: &ModelConfig) -> Result<SystemModel, ModelError> {
    if cfg.variant != Variant::Centralised {
        return Err(ModelError::InvalidConfig(
            "build_centralised needs a centralised configuration".into(),
        ));
    }
    build_with_mutations(cfg, &[])
}

pub fn build_decentralised(cfg: &ModelConfig) -> Result<SystemModel, ModelError> {
    if cfg.variant != Variant::Decentralised {
        return Err(ModelError::InvalidConfig(
            "build_decentralised needs a decentralised configuration".into(),
        ));
    }
    build_with_mutations(cfg, &[])
}

/// Builds whichever variant `cfg` names.
pub fn build(cfg: &ModelConfig) -> Result<SystemModel, ModelError> {
    build_with_mutations(cfg, &[])
}

/// Returns a new system with `mutation` applied on top of `model`'s.
pub fn apply_mutation(model: &SystemModel, mutation: Mutation) -> Result<SystemModel, ModelError> {
    let mut muts = model.mutations.clone();
    muts.push(mutation);
    build_with_mutations(&model.config, &muts)
}

pub fn build_with_mutations(cfg: &ModelConfig, mutations: &[Mutation]) -> Result<SystemModel, ModelError> {
    let system = instantiate(cfg, mutations, &DataBinding::from_config(cfg))?;
    Ok(SystemModel {
        system,
        config: cfg.clone(),
        mutations: mutations.to_vec(),
    })
}

fn effective_config(cfg: &ModelConfig, mutations: &[Mutation]) -> ModelConfig {
    let mut eff = cfg.clone();
    for m in mutations {
        if let Mutation::CapacityOverride { kind, capacity } = *m {
            eff.capacity_override.insert(kind, capacity);
        }
    }
    eff
}

fn check_mutation(cfg: &ModelConfig, m: Mutation) -> Result<(), ModelError> {
    let reject = |reason: String| {
        Err(ModelError::InapplicableMutation {
            mutation: m.name(),
            reason,
        })
    };
    match m {
        Mutation::ExpectExtraUpdate if cfg.variant != Variant::Centralised => {
            reject("only the centralised server collects updates".into())
        }
        Mutation::StrictPhaseOrder if cfg.variant != Variant::Decentralised => {
            reject("phases only exist in the decentralised model".into())
        }
        Mutation::SkipReply { .. } if cfg.nodes < 2 => reject("a single node has nobody to reply to".into()),
        Mutation::SkipReply { node: Some(k) } if k >= cfg.nodes => reject(format!("node {k} out of range")),
        Mutation::SkipReply { node: Some(k) }
            if cfg.variant == Variant::Centralised && k == cfg.server_id =>
        {
            reject(format!("node {k} is the server, not a client"))
        }
        Mutation::CapacityOverride { kind, .. } if !kind_belongs(cfg.variant, kind) => reject(format!(
            "no `{}` channels in the {} model",
            kind.name(),
            cfg.variant
        )),
        Mutation::CapacityOverride { capacity: 0, .. } => reject("capacity must be at least 1".into()),
        _ => Ok(()),
    }
}

/// The node that stays silent under `SkipReply`, if any.
fn silent_node(cfg: &ModelConfig, mutations: &[Mutation]) -> Option<usize> {
    mutations.iter().find_map(|m| match *m {
        Mutation::SkipReply { node: Some(k) } => Some(k),
        Mutation::SkipReply { node: None } => Some(match cfg.variant {
            Variant::Centralised => (0..cfg.nodes).find(|&i| i != cfg.server_id).unwrap_or(0),
            Variant::Decentralised => 0,
        }),
        _ => None,
    })
}

pub(crate) fn instantiate(
    cfg: &ModelConfig,
    mutations: &[Mutation],
    data: &DataBinding,
) -> Result<System, ModelError> {
    cfg.validate()?;
    for &m in mutations {
        check_mutation(cfg, m)?;
    }
    if data.ldata.len() != cfg.nodes || data.pdata.len() != cfg.nodes {
        return Err(ModelError::InvalidConfig(
            "data binding does not match node count".into(),
        ));
    }
    let eff = effective_config(cfg, mutations);

    let mut b = ProgramBuilder::new();
    let vars = SharedVars::declare(&mut b, cfg.nodes);
    let mut shared = vec![Value::Int(0)];
    shared.extend(data.ldata.iter().copied());
    shared.extend(data.pdata.iter().copied());

    let mut layout = ChannelLayout::new();
    let n = cfg.nodes as u32;
    let entries = match cfg.variant {
        Variant::Centralised => {
            let srv = cfg.server_id as u32;
            for i in (0..n).filter(|&i| i != srv) {
                layout.declare(
                    ChannelId::ServerToClient(i),
                    eff.capacity(ChannelKind::ServerToClient),
                )?;
            }
            if n >= 2 {
                layout.declare(
                    ChannelId::ClientsToServer,
                    eff.capacity(ChannelKind::ClientsToServer),
                )?;
            }
            centralised_program(&mut b, cfg, mutations, data.update, &vars)
        }
        Variant::Decentralised => {
            if n >= 2 {
                for i in 0..n {
                    layout.declare(ChannelId::ToNode(i), eff.capacity(ChannelKind::ToNode))?;
                }
                for i in 0..n {
                    layout.declare(ChannelId::Buffer(i), eff.capacity(ChannelKind::Buffer))?;
                }
            }
            decentralised_program(&mut b, cfg, mutations, data.update, &vars)
        }
    };
    let program = b.finish()?;
    Ok(System::new(program, layout, &entries, shared, cfg.step_mode)?)
}

struct SharedVars {
    terminated: SharedVar,
    ldata: Vec<SharedVar>,
    pdata: Vec<SharedVar>,
}

impl SharedVars {
    fn declare(b: &mut ProgramBuilder, n: usize) -> Self {
        let terminated = b.shared_var(TERMINATED);
        let ldata = (0..n).map(|i| b.shared_var(format!("ldataArr[{i}]"))).collect();
        let pdata = (0..n).map(|i| b.shared_var(format!("pdataArr[{i}]"))).collect();
        SharedVars {
            terminated,
            ldata,
            pdata,
        }
    }
}

fn lit(v: usize) -> Expr {
    Expr::lit(v as i64)
}

fn update_expr(update: UpdateFn, ldata: Expr, pdata: Option<Expr>, received: Expr) -> Expr {
    match update {
        UpdateFn::Add => ldata + received,
        UpdateFn::Host => Expr::Host(
            HostFn::ClientUpdate,
            vec![ldata, pdata.expect("host updates need pdata"), received],
        ),
    }
}

/// `XxBroadcastMsg(id, noNodes, nodeId, ldata)`: send `msg` to every other
/// node's channel of `kind`, ascending.
fn broadcast_def(b: &mut ProgramBuilder, name: &str, kind: ChannelKind, tagged: bool) -> DefId {
    let d = b.declare(name, &["id", "noNodes", "nodeId", "ldata"], &[]);
    let (id, no_nodes, node_id, ldata) = (
        b.var(d, "id"),
        b.var(d, "noNodes"),
        b.var(d, "nodeId"),
        b.var(d, "ldata"),
    );
    let msg = if tagged {
        MsgExpr::Tagged {
            phase: Expr::lit(1),
            from: node_id.clone(),
            data: ldata.clone(),
        }
    } else {
        MsgExpr::Plain(ldata.clone())
    };
    let skip = b.skip();
    let send = b.send(ChanExpr::indexed(kind, id.clone()), msg, skip);
    let first = b.if_then(id.clone().ne(node_id.clone()), send);
    let rec = b.call(
        d,
        vec![id.clone() + Expr::lit(1), no_nodes.clone(), node_id, ldata],
    );
    let second = b.if_then(id.lt(no_nodes - Expr::lit(1)), rec);
    let body = b.seq(first, second);
    b.define(d, body);
    d
}

/// `Name(i, bound, ...)`: receive `bound - i` messages from `chan` and drop
/// them. `extra` names the parameters passed through unchanged.
fn drain_def(
    b: &mut ProgramBuilder,
    name: &str,
    params: &[&str],
    binders: &[&str],
    chan: impl Fn(&ProgramBuilder, DefId) -> ChanExpr,
    bound: impl Fn(&ProgramBuilder, DefId) -> Expr,
    next_args: impl Fn(&ProgramBuilder, DefId) -> Vec<Expr>,
) -> DefId {
    let d = b.declare(name, params, binders);
    let slots = binders.iter().map(|n| b.slot(d, n)).collect();
    let i = b.var(d, "i");
    let rec = b.call(d, next_args(b, d));
    let recv = b.recv(chan(b, d), slots, None, rec);
    let body = b.if_then(i.lt(bound(b, d)), recv);
    b.define(d, body);
    d
}

fn centralised_program(
    b: &mut ProgramBuilder,
    cfg: &ModelConfig,
    mutations: &[Mutation],
    update: UpdateFn,
    vars: &SharedVars,
) -> Vec<TermId> {
    let role_params = ["noNodes", "nodeId", "flSrvId", "ldata", "pdata"];
    let extra = mutations.contains(&Mutation::ExpectExtraUpdate);
    let silent = silent_node(cfg, mutations);

    let broadcast = broadcast_def(b, "CeBroadcastMsg", ChannelKind::ServerToClient, false);
    let rcv = drain_def(
        b,
        "CeRcvMsgs",
        &["i", "noMsgs"],
        &["update"],
        |_, _| ChanExpr::single(ChannelKind::ClientsToServer),
        |b, d| b.var(d, "noMsgs"),
        |b, d| vec![b.var(d, "i") + Expr::lit(1), b.var(d, "noMsgs")],
    );

    let server = b.declare("CeServer", &role_params, &[]);
    {
        let no_nodes = b.var(server, "noNodes");
        let expected = if extra {
            no_nodes.clone()
        } else {
            no_nodes.clone() - Expr::lit(1)
        };
        let bc = b.call(
            broadcast,
            vec![
                Expr::lit(0),
                no_nodes,
                b.var(server, "nodeId"),
                b.var(server, "ldata"),
            ],
        );
        let rc = b.call(rcv, vec![Expr::lit(0), expected]);
        let skip = b.skip();
        let done = b.assign(vars.terminated, Expr::lit(1), skip);
        let rest = b.seq_all(&[bc, rc, done]);
        let body = b.assign(vars.terminated, Expr::lit(0), rest);
        b.define(server, body);
    }

    let client_def = |b: &mut ProgramBuilder, name: &str, reply: bool| {
        let d = b.declare(name, &role_params, &["srvLdata"]);
        let srv_ldata = b.slot(d, "srvLdata");
        let node_id = b.var(d, "nodeId");
        let skip = b.skip();
        let after = if reply {
            let data = update_expr(
                update,
                b.var(d, "ldata"),
                Some(b.var(d, "pdata")),
                Expr::local(srv_ldata),
            );
            b.send(
                ChanExpr::single(ChannelKind::ClientsToServer),
                MsgExpr::Plain(data),
                skip,
            )
        } else {
            skip
        };
        let body = b.recv(
            ChanExpr::indexed(ChannelKind::ServerToClient, node_id),
            vec![srv_ldata],
            None,
            after,
        );
        b.define(d, body);
        d
    };
    let client = client_def(b, "CeClient", true);
    let silent_client = silent.map(|_| client_def(b, "CeClientNoReply", false));

    (0..cfg.nodes)
        .map(|i| {
            let def = if i == cfg.server_id {
                server
            } else if Some(i) == silent {
                silent_client.expect("declared above")
            } else {
                client
            };
            b.call(
                def,
                vec![
                    lit(cfg.nodes),
                    lit(i),
                    lit(cfg.server_id),
                    Expr::Shared(vars.ldata[i]),
                    Expr::Shared(vars.pdata[i]),
                ],
            )
        })
        .collect()
}

fn decentralised_program(
    b: &mut ProgramBuilder,
    cfg: &ModelConfig,
    mutations: &[Mutation],
    update: UpdateFn,
    vars: &SharedVars,
) -> Vec<TermId> {
    let strict = mutations.contains(&Mutation::StrictPhaseOrder);
    let silent = silent_node(cfg, mutations);
    // pdata is only threaded into the receive loop when a host callback
    // needs it; the abstract model's loop has no such parameter.
    let host = update == UpdateFn::Host;
    let rcv_params: &[&str] = if host {
        &["i", "noNodes", "nodeId", "ldata", "pdata"]
    } else {
        &["i", "noNodes", "nodeId", "ldata"]
    };
    let tagged = &["phase", "from", "nodeldata"];

    let broadcast = broadcast_def(b, "DeBroadcastMsg", ChannelKind::ToNode, true);

    let pass = |b: &ProgramBuilder, d: DefId| -> Vec<Expr> {
        let mut args = vec![
            b.var(d, "i") + Expr::lit(1),
            b.var(d, "noNodes"),
            b.var(d, "nodeId"),
            b.var(d, "ldata"),
        ];
        if host {
            args.push(b.var(d, "pdata"));
        }
        args
    };
    let reply = |b: &mut ProgramBuilder, d: DefId, then: TermId| -> TermId {
        let data = update_expr(
            update,
            b.var(d, "ldata"),
            host.then(|| b.var(d, "pdata")),
            b.var(d, "nodeldata"),
        );
        b.send(
            ChanExpr::indexed(ChannelKind::ToNode, b.var(d, "from")),
            MsgExpr::Tagged {
                phase: Expr::lit(2),
                from: b.var(d, "nodeId"),
                data,
            },
            then,
        )
    };

    // Returns (phase-1/2 receive loop, phase-3 loop) for one reply policy.
    let loops = |b: &mut ProgramBuilder, suffix: &str, replies: bool| -> (DefId, DefId) {
        if strict {
            let d1 = b.declare(&format!("DeRcvPhase1{suffix}"), rcv_params, tagged);
            let slots = tagged.iter().map(|n| b.slot(d1, n)).collect();
            let rec = b.call(d1, pass(b, d1));
            let after = if replies { reply(b, d1, rec) } else { rec };
            let guard = b.var(d1, "phase").eq(Expr::lit(1));
            let recv = b.recv(
                ChanExpr::indexed(ChannelKind::ToNode, b.var(d1, "nodeId")),
                slots,
                Some(guard),
                after,
            );
            let bound = b.var(d1, "noNodes") - Expr::lit(1);
            let body = b.if_then(b.var(d1, "i").lt(bound), recv);
            b.define(d1, body);

            let d2 = drain_def(
                b,
                &format!("DeRcvPhase2{suffix}"),
                &["i", "noNodes", "nodeId"],
                &["phase", "from", "update"],
                |b, d| ChanExpr::indexed(ChannelKind::ToNode, b.var(d, "nodeId")),
                |b, d| b.var(d, "noNodes") - Expr::lit(1),
                |b, d| {
                    vec![
                        b.var(d, "i") + Expr::lit(1),
                        b.var(d, "noNodes"),
                        b.var(d, "nodeId"),
                    ]
                },
            );
            return (d1, d2);
        }

        let d = b.declare(&format!("DeRcvMsgs{suffix}"), rcv_params, tagged);
        let slots = tagged.iter().map(|n| b.slot(d, n)).collect();
        let rec1 = b.call(d, pass(b, d));
        let on_phase1 = if replies { reply(b, d, rec1) } else { rec1 };
        let rec2 = b.call(d, pass(b, d));
        let on_phase2 = b.send(
            ChanExpr::indexed(ChannelKind::Buffer, b.var(d, "nodeId")),
            MsgExpr::Tagged {
                phase: b.var(d, "phase"),
                from: b.var(d, "from"),
                data: b.var(d, "nodeldata"),
            },
            rec2,
        );
        let dispatch = b.if_else(b.var(d, "phase").eq(Expr::lit(1)), on_phase1, on_phase2);
        let recv = b.recv(
            ChanExpr::indexed(ChannelKind::ToNode, b.var(d, "nodeId")),
            slots,
            None,
            dispatch,
        );
        let bound = Expr::lit(2) * b.var(d, "noNodes") - Expr::lit(2);
        let body = b.if_then(b.var(d, "i").lt(bound), recv);
        b.define(d, body);

        let d2 = drain_def(
            b,
            &format!("DeRcvMsgs2{suffix}"),
            &["i", "noNodes", "nodeId"],
            &["phase", "from", "update"],
            |b, d| ChanExpr::indexed(ChannelKind::Buffer, b.var(d, "nodeId")),
            |b, d| b.var(d, "noNodes") - Expr::lit(1),
            |b, d| {
                vec![
                    b.var(d, "i") + Expr::lit(1),
                    b.var(d, "noNodes"),
                    b.var(d, "nodeId"),
                ]
            },
        );
        (d, d2)
    };

    let node_params: &[&str] = &["noNodes", "nodeId", "ldata", "pdata"];
    let node_def = |b: &mut ProgramBuilder, name: &str, rcv: DefId, rcv2: DefId| {
        let d = b.declare(name, node_params, &[]);
        let (no_nodes, node_id, ldata) = (b.var(d, "noNodes"), b.var(d, "nodeId"), b.var(d, "ldata"));
        let bc = b.call(
            broadcast,
            vec![Expr::lit(0), no_nodes.clone(), node_id.clone(), ldata.clone()],
        );
        let mut rargs = vec![Expr::lit(0), no_nodes.clone(), node_id.clone(), ldata];
        if host {
            rargs.push(b.var(d, "pdata"));
        }
        let r1 = b.call(rcv, rargs);
        let r2 = b.call(rcv2, vec![Expr::lit(0), no_nodes, node_id]);
        let skip = b.skip();
        let done = b.assign(vars.terminated, Expr::lit(1), skip);
        let rest = b.seq_all(&[bc, r1, r2, done]);
        let body = b.assign(vars.terminated, Expr::lit(0), rest);
        b.define(d, body);
        d
    };

    let (rcv, rcv2) = loops(b, "", true);
    let node = node_def(b, "FlDecentralised", rcv, rcv2);
    let silent_node_def = silent.map(|_| {
        let (r, r2) = loops(b, "NoReply", false);
        node_def(b, "FlDecentralisedNoReply", r, r2)
    });

    (0..cfg.nodes)
        .map(|i| {
            let def = if Some(i) == silent {
                silent_node_def.expect("declared above")
            } else {
                node
            };
            b.call(
                def,
                vec![
                    lit(cfg.nodes),
                    lit(i),
                    Expr::Shared(vars.ldata[i]),
                    Expr::Shared(vars.pdata[i]),
                ],
            )
        })
        .collect()
}
