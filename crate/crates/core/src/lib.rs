//! Explicit-state verification and seeded simulation of generic
//! centralised and decentralised federated-learning orchestration
//! protocols, modelled as CSP-style processes over bounded FIFO channels.

pub mod checker;
pub mod kernel;
pub mod models;
pub mod runtime;
pub mod trace;

pub use checker::{
    Budget, CheckError, CheckOutcome, Checker, Counterexample, Predicate, StateSpaceStats, Strategy, Verdict,
};
pub use kernel::{ChannelId, ChannelKind, GlobalState, KernelError, Message, StepMode, System, Value};
pub use models::{ModelConfig, ModelError, Mutation, SystemModel, Variant};
pub use runtime::{ConcreteTrace, RunConfig, RunError, RunResult};
pub use trace::{Action, Event, EventMsg};
