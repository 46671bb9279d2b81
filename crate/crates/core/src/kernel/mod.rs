//! Process terms, global states and their small-step semantics over bounded
//! FIFO channels with interleaving composition.

mod state;
mod system;
mod term;
mod value;

pub use state::{key_of, Env, Frame, GlobalState, NodeState, StateKey};
pub use system::{ActionLabel, ChannelLayout, HostEval, NoHost, Status, StepMode, System, Transition};
pub use term::{
    ChanExpr, Cond, DefId, Definition, Expr, HostFn, MsgExpr, Program, ProgramBuilder, SharedVar, Slot, Term,
    TermId,
};
pub use value::{ChannelId, ChannelKind, HostRef, Message, Value};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum KernelError {
    #[error("malformed model: {0}")]
    Malformed(String),
    #[error("call to undefined process `{0}`")]
    UnresolvedCall(String),
    #[error("channel `{0}` is not declared")]
    UnknownChannel(String),
    #[error("channel `{0}` declared with capacity 0")]
    ZeroCapacity(String),
    #[error("type error: {0}")]
    Type(String),
    #[error("arithmetic overflow in {0}")]
    Overflow(String),
    #[error("state holds host value #{0} and cannot be hashed")]
    NotHashable(u32),
    #[error("corrupt state encoding: {0}")]
    Decode(String),
    #[error("transition of node {node} is not enabled in this state")]
    NotEnabled { node: usize },
    #[error("host function failed: {0}")]
    Host(String),
    #[error("process unfolding did not reach an action after {0} silent steps")]
    UnfoldLimit(usize),
}
