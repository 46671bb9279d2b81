//! Process-term algebra.
//!
//! Terms live in an arena owned by a [`Program`] and are referenced by
//! [`TermId`]. Each definition has a fixed frame of local slots: its
//! parameters first, then any receive binders. Variables are resolved to
//! slot indices when the program is built, so evaluation never looks up
//! names.

use std::ops;

use super::value::ChannelKind;
use super::KernelError;

pub type Slot = u16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TermId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DefId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SharedVar(pub u32);

/// Host-provided functions. Only the runtime supplies an evaluator for these.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum HostFn {
    /// `cfun(localData, privateData, serverData)`
    ClientUpdate,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Expr {
    Lit(i64),
    Local(Slot),
    Shared(SharedVar),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Host(HostFn, Vec<Expr>),
}

impl Expr {
    pub fn lit(v: i64) -> Self {
        Expr::Lit(v)
    }

    pub fn local(slot: Slot) -> Self {
        Expr::Local(slot)
    }

    pub fn eq(self, rhs: Expr) -> Cond {
        Cond::Eq(self, rhs)
    }

    pub fn ne(self, rhs: Expr) -> Cond {
        Cond::Ne(self, rhs)
    }

    pub fn lt(self, rhs: Expr) -> Cond {
        Cond::Lt(self, rhs)
    }

    fn visit<'a>(&'a self, out: &mut impl FnMut(&'a Expr)) {
        out(self);
        match self {
            Expr::Lit(_) | Expr::Local(_) | Expr::Shared(_) => {}
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) => {
                a.visit(out);
                b.visit(out);
            }
            Expr::Host(_, args) => args.iter().for_each(|a| a.visit(out)),
        }
    }
}

impl ops::Add for Expr {
    type Output = Expr;
    fn add(self, rhs: Expr) -> Expr {
        Expr::Add(Box::new(self), Box::new(rhs))
    }
}

impl ops::Sub for Expr {
    type Output = Expr;
    fn sub(self, rhs: Expr) -> Expr {
        Expr::Sub(Box::new(self), Box::new(rhs))
    }
}

impl ops::Mul for Expr {
    type Output = Expr;
    fn mul(self, rhs: Expr) -> Expr {
        Expr::Mul(Box::new(self), Box::new(rhs))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Cond {
    Eq(Expr, Expr),
    Ne(Expr, Expr),
    Lt(Expr, Expr),
}

impl Cond {
    fn operands(&self) -> (&Expr, &Expr) {
        match self {
            Cond::Eq(a, b) | Cond::Ne(a, b) | Cond::Lt(a, b) => (a, b),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChanExpr {
    pub kind: ChannelKind,
    pub index: Option<Expr>,
}

impl ChanExpr {
    pub fn indexed(kind: ChannelKind, index: Expr) -> Self {
        ChanExpr {
            kind,
            index: Some(index),
        }
    }

    pub fn single(kind: ChannelKind) -> Self {
        ChanExpr { kind, index: None }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MsgExpr {
    Plain(Expr),
    Tagged { phase: Expr, from: Expr, data: Expr },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Term {
    Skip,
    Send {
        chan: ChanExpr,
        msg: MsgExpr,
        then: TermId,
    },
    /// Binders receive the message fields positionally. The optional guard
    /// is evaluated with the binders already in scope; the receive is only
    /// enabled when it holds on the head message.
    Recv {
        chan: ChanExpr,
        binders: Vec<Slot>,
        guard: Option<Cond>,
        then: TermId,
    },
    Assign {
        var: SharedVar,
        value: Expr,
        then: TermId,
    },
    If {
        cond: Cond,
        then: TermId,
        els: TermId,
    },
    Call {
        def: DefId,
        args: Vec<Expr>,
    },
    /// Sequential composition `first; then`. Both halves run in the frame
    /// that was current when the `Seq` was reached.
    Seq {
        first: TermId,
        then: TermId,
    },
}

#[derive(Debug, Clone)]
pub struct Definition {
    pub name: String,
    pub params: Vec<String>,
    pub locals: Vec<String>,
    pub body: TermId,
}

impl Definition {
    pub fn slot_count(&self) -> usize {
        self.params.len() + self.locals.len()
    }

    pub fn slot_name(&self, slot: Slot) -> Option<&str> {
        let s = slot as usize;
        self.params
            .get(s)
            .or_else(|| s.checked_sub(self.params.len()).and_then(|i| self.locals.get(i)))
            .map(String::as_str)
    }
}

/// An immutable, validated set of definitions over a term arena.
#[derive(Debug, Clone)]
pub struct Program {
    terms: Vec<Term>,
    defs: Vec<Definition>,
    shared: Vec<String>,
}

impl Program {
    pub fn term(&self, id: TermId) -> &Term {
        &self.terms[id.0 as usize]
    }

    pub fn def(&self, id: DefId) -> &Definition {
        &self.defs[id.0 as usize]
    }

    pub fn defs(&self) -> impl Iterator<Item = (DefId, &Definition)> {
        self.defs.iter().enumerate().map(|(i, d)| (DefId(i as u32), d))
    }

    pub fn def_by_name(&self, name: &str) -> Option<DefId> {
        self.defs
            .iter()
            .position(|d| d.name == name)
            .map(|i| DefId(i as u32))
    }

    pub fn shared_names(&self) -> &[String] {
        &self.shared
    }

    pub fn shared_by_name(&self, name: &str) -> Option<SharedVar> {
        self.shared
            .iter()
            .position(|n| n == name)
            .map(|i| SharedVar(i as u32))
    }

    pub fn terms_len(&self) -> usize {
        self.terms.len()
    }
}

struct PendingDef {
    name: String,
    params: Vec<String>,
    locals: Vec<String>,
    body: Option<TermId>,
}

/// Incremental construction of a [`Program`]. Definitions are declared
/// first (so bodies can refer to themselves) and given bodies later.
#[derive(Default)]
pub struct ProgramBuilder {
    terms: Vec<Term>,
    defs: Vec<PendingDef>,
    shared: Vec<String>,
}

impl ProgramBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn shared_var(&mut self, name: impl Into<String>) -> SharedVar {
        self.shared.push(name.into());
        SharedVar(self.shared.len() as u32 - 1)
    }

    pub fn declare(&mut self, name: &str, params: &[&str], locals: &[&str]) -> DefId {
        self.defs.push(PendingDef {
            name: name.to_owned(),
            params: params.iter().map(|s| s.to_string()).collect(),
            locals: locals.iter().map(|s| s.to_string()).collect(),
            body: None,
        });
        DefId(self.defs.len() as u32 - 1)
    }

    /// Slot of a named parameter or local in `def`.
    ///
    /// Panics if the name was not declared; builders are written against a
    /// fixed set of names, so this is a programming error.
    pub fn slot(&self, def: DefId, name: &str) -> Slot {
        let d = &self.defs[def.0 as usize];
        let pos = d
            .params
            .iter()
            .chain(d.locals.iter())
            .position(|n| n == name)
            .unwrap_or_else(|| panic!("`{name}` is not declared in `{}`", d.name));
        pos as Slot
    }

    /// Shorthand for `Expr::Local(self.slot(def, name))`.
    pub fn var(&self, def: DefId, name: &str) -> Expr {
        Expr::Local(self.slot(def, name))
    }

    pub fn define(&mut self, def: DefId, body: TermId) {
        self.defs[def.0 as usize].body = Some(body);
    }

    fn push(&mut self, t: Term) -> TermId {
        self.terms.push(t);
        TermId(self.terms.len() as u32 - 1)
    }

    pub fn skip(&mut self) -> TermId {
        self.push(Term::Skip)
    }

    pub fn send(&mut self, chan: ChanExpr, msg: MsgExpr, then: TermId) -> TermId {
        self.push(Term::Send { chan, msg, then })
    }

    pub fn recv(&mut self, chan: ChanExpr, binders: Vec<Slot>, guard: Option<Cond>, then: TermId) -> TermId {
        self.push(Term::Recv {
            chan,
            binders,
            guard,
            then,
        })
    }

    pub fn assign(&mut self, var: SharedVar, value: Expr, then: TermId) -> TermId {
        self.push(Term::Assign { var, value, then })
    }

    pub fn if_else(&mut self, cond: Cond, then: TermId, els: TermId) -> TermId {
        self.push(Term::If { cond, then, els })
    }

    /// `if (cond) { then }` with an implicit `Skip` else branch.
    pub fn if_then(&mut self, cond: Cond, then: TermId) -> TermId {
        let els = self.skip();
        self.if_else(cond, then, els)
    }

    pub fn call(&mut self, def: DefId, args: Vec<Expr>) -> TermId {
        self.push(Term::Call { def, args })
    }

    pub fn seq(&mut self, first: TermId, then: TermId) -> TermId {
        self.push(Term::Seq { first, then })
    }

    /// Right-nested sequence of the given terms.
    pub fn seq_all(&mut self, parts: &[TermId]) -> TermId {
        let (&last, init) = parts.split_last().expect("seq_all needs at least one term");
        init.iter().rev().fold(last, |acc, &t| self.seq(t, acc))
    }

    pub fn finish(self) -> Result<Program, KernelError> {
        let mut defs = Vec::with_capacity(self.defs.len());
        for d in self.defs {
            let body = d
                .body
                .ok_or_else(|| KernelError::Malformed(format!("definition `{}` has no body", d.name)))?;
            defs.push(Definition {
                name: d.name,
                params: d.params,
                locals: d.locals,
                body,
            });
        }
        let program = Program {
            terms: self.terms,
            defs,
            shared: self.shared,
        };
        validate(&program)?;
        Ok(program)
    }
}

fn validate(p: &Program) -> Result<(), KernelError> {
    for (_, def) in p.defs() {
        let slots = def.slot_count();
        let mut stack = vec![def.body];
        let mut seen = vec![false; p.terms.len()];
        while let Some(id) = stack.pop() {
            let Some(flag) = seen.get_mut(id.0 as usize) else {
                return Err(KernelError::Malformed(format!(
                    "`{}` references missing term {}",
                    def.name, id.0
                )));
            };
            if *flag {
                continue;
            }
            *flag = true;
            let mut exprs: Vec<&Expr> = Vec::new();
            let mut bad_slot = None;
            match p.term(id) {
                Term::Skip => {}
                Term::Send { chan, msg, then } => {
                    exprs.extend(chan.index.iter());
                    match msg {
                        MsgExpr::Plain(e) => exprs.push(e),
                        MsgExpr::Tagged { phase, from, data } => exprs.extend([phase, from, data]),
                    }
                    check_chan(def, chan)?;
                    stack.push(*then);
                }
                Term::Recv {
                    chan,
                    binders,
                    guard,
                    then,
                } => {
                    exprs.extend(chan.index.iter());
                    check_chan(def, chan)?;
                    if let Some(g) = guard {
                        let (a, b) = g.operands();
                        exprs.extend([a, b]);
                    }
                    if !(binders.len() == 1 || binders.len() == 3) {
                        return Err(KernelError::Malformed(format!(
                            "receive in `{}` must bind 1 or 3 fields, binds {}",
                            def.name,
                            binders.len()
                        )));
                    }
                    bad_slot = binders.iter().find(|&&s| s as usize >= slots).copied();
                    stack.push(*then);
                }
                Term::Assign { var, value, then } => {
                    if var.0 as usize >= p.shared.len() {
                        return Err(KernelError::Malformed(format!(
                            "`{}` assigns unknown shared variable {}",
                            def.name, var.0
                        )));
                    }
                    exprs.push(value);
                    stack.push(*then);
                }
                Term::If { cond, then, els } => {
                    let (a, b) = cond.operands();
                    exprs.extend([a, b]);
                    stack.push(*then);
                    stack.push(*els);
                }
                Term::Call { def: callee, args } => {
                    let Some(target) = p.defs.get(callee.0 as usize) else {
                        return Err(KernelError::UnresolvedCall(format!("#{}", callee.0)));
                    };
                    if target.params.len() != args.len() {
                        return Err(KernelError::Malformed(format!(
                            "call to `{}` from `{}` passes {} arguments, expected {}",
                            target.name,
                            def.name,
                            args.len(),
                            target.params.len()
                        )));
                    }
                    exprs.extend(args.iter());
                }
                Term::Seq { first, then } => {
                    stack.push(*first);
                    stack.push(*then);
                }
            }
            for e in exprs {
                e.visit(&mut |sub| match sub {
                    Expr::Local(s) if *s as usize >= slots => bad_slot = Some(*s),
                    Expr::Shared(v) if v.0 as usize >= p.shared.len() => bad_slot = Some(Slot::MAX),
                    _ => {}
                });
            }
            if let Some(s) = bad_slot {
                return Err(KernelError::Malformed(format!(
                    "`{}` references undeclared variable slot {s}",
                    def.name
                )));
            }
        }
    }
    Ok(())
}

fn check_chan(def: &Definition, chan: &ChanExpr) -> Result<(), KernelError> {
    if chan.kind.is_indexed() != chan.index.is_some() {
        return Err(KernelError::Malformed(format!(
            "`{}` uses channel `{}` with wrong indexing",
            def.name,
            chan.kind.name()
        )));
    }
    Ok(())
}
