use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Args, ValueEnum};
use flcsp_core::checker::Limit;
use flcsp_core::models::build_with_mutations;
use flcsp_core::trace::{write_jsonl, Event};
use flcsp_core::{
    Budget, CheckError, CheckOutcome, Checker, Mutation, Predicate, Strategy, SystemModel, Variant,
};
use serde::Serialize;

use crate::common::{create, write_json, ModelArgs};
use crate::Status;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Assertion {
    Deadlockfree,
    ReachesTerminated,
    AlwaysEventuallyTerminated,
    All,
}

impl Assertion {
    fn name(self) -> &'static str {
        match self {
            Assertion::Deadlockfree => "deadlockfree",
            Assertion::ReachesTerminated => "reaches-terminated",
            Assertion::AlwaysEventuallyTerminated => "always-eventually-terminated",
            Assertion::All => "all",
        }
    }

    fn expand(self) -> Vec<Assertion> {
        match self {
            Assertion::All => vec![
                Assertion::Deadlockfree,
                Assertion::ReachesTerminated,
                Assertion::AlwaysEventuallyTerminated,
            ],
            a => vec![a],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Search {
    Dfs,
    Bfs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MutationArg {
    ExpectExtraUpdate,
    SkipReply,
    StrictPhaseOrder,
}

#[derive(Args, Debug)]
pub struct CheckArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long = "assert", value_enum)]
    pub assertion: Assertion,
    /// Search order for the safety and reachability checks. The liveness
    /// check always uses nested depth-first search.
    #[arg(long, value_enum, default_value = "dfs")]
    pub search: Search,
    #[arg(long, value_enum)]
    pub mutation: Option<MutationArg>,
    /// Write the first counterexample as JSON Lines.
    #[arg(long)]
    pub trace_out: Option<PathBuf>,
    #[arg(long)]
    pub max_states: Option<usize>,
    /// Report `elapsedMs` as null so output is reproducible byte for byte.
    #[arg(long)]
    pub no_timing: bool,
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct CheckReport {
    model: &'static str,
    nodes: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    server_id: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    mutation: Option<String>,
    checks: Vec<CheckEntry>,
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct CheckEntry {
    assertion: &'static str,
    strategy: &'static str,
    verdict: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    limit: Option<String>,
    states: usize,
    transitions: usize,
    elapsed_ms: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    counterexample: Option<TraceJson>,
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct TraceJson {
    cycle_start: Option<usize>,
    steps: Vec<Event>,
}

fn mutations(args: &CheckArgs) -> Vec<Mutation> {
    let mut out: Vec<Mutation> = args
        .mutation
        .map(|m| match m {
            MutationArg::ExpectExtraUpdate => Mutation::ExpectExtraUpdate,
            MutationArg::SkipReply => Mutation::SkipReply { node: None },
            MutationArg::StrictPhaseOrder => Mutation::StrictPhaseOrder,
        })
        .into_iter()
        .collect();
    out.extend(
        args.model
            .capacities
            .iter()
            .map(|&(kind, capacity)| Mutation::CapacityOverride { kind, capacity }),
    );
    out
}

fn check_one(
    checker: &Checker,
    model: &SystemModel,
    assertion: Assertion,
    strategy: Strategy,
) -> (&'static str, Result<CheckOutcome, CheckError>) {
    let p = Predicate::terminated();
    match assertion {
        Assertion::Deadlockfree => (strategy.name(), checker.check_deadlock_free(model, strategy)),
        Assertion::ReachesTerminated => (strategy.name(), checker.check_reaches(model, &p, strategy)),
        Assertion::AlwaysEventuallyTerminated => ("ndfs", checker.check_always_eventually(model, &p)),
        Assertion::All => unreachable!("expanded by the caller"),
    }
}

pub fn run(args: &CheckArgs) -> Result<Status> {
    let cfg = args.model.base_config()?;
    let muts = mutations(args);
    let model = build_with_mutations(&cfg, &muts)?;
    let mut budget = Budget::default();
    if let Some(m) = args.max_states {
        budget.max_states = m;
    }
    let checker = Checker::new(budget);
    let strategy = match args.search {
        Search::Dfs => Strategy::Dfs,
        Search::Bfs => Strategy::Bfs,
    };
    let p = Predicate::terminated();

    let mut checks = Vec::new();
    let mut status = Status::Holds;
    let mut first_trace: Option<Vec<Event>> = None;
    for assertion in args.assertion.expand() {
        let (strategy_name, result) = check_one(&checker, &model, assertion, strategy);
        let ms = |d: std::time::Duration| (!args.no_timing).then_some(d.as_millis() as u64);
        let entry = match result {
            Ok(out) => {
                let counterexample = match out.verdict.counterexample() {
                    Some(cx) => {
                        cx.replay(model.system(), Some(&p)).with_context(|| {
                            format!("{} counterexample failed to replay", assertion.name())
                        })?;
                        let steps = cx.events();
                        first_trace.get_or_insert_with(|| steps.clone());
                        Some(TraceJson {
                            cycle_start: cx.cycle_start,
                            steps,
                        })
                    }
                    None => None,
                };
                let verdict = if out.verdict.is_valid() {
                    "valid"
                } else {
                    status = Status::Violated;
                    "violated"
                };
                CheckEntry {
                    assertion: assertion.name(),
                    strategy: strategy_name,
                    verdict,
                    limit: None,
                    states: out.stats.states,
                    transitions: out.stats.transitions,
                    elapsed_ms: ms(out.stats.elapsed),
                    counterexample,
                }
            }
            Err(CheckError::ResourceExceeded { limit, stats }) => {
                if status == Status::Holds {
                    status = Status::ResourceExceeded;
                }
                CheckEntry {
                    assertion: assertion.name(),
                    strategy: strategy_name,
                    verdict: "resource-exceeded",
                    limit: Some(limit_name(limit).into()),
                    states: stats.states,
                    transitions: stats.transitions,
                    elapsed_ms: ms(stats.elapsed),
                    counterexample: None,
                }
            }
            Err(e) => return Err(e.into()),
        };
        checks.push(entry);
    }

    if let Some(path) = &args.trace_out {
        let mut out = create(path)?;
        write_jsonl(first_trace.as_deref().unwrap_or(&[]), &mut out)
            .with_context(|| format!("cannot write {}", path.display()))?;
    }
    write_json(&CheckReport {
        model: cfg.variant.name(),
        nodes: cfg.nodes,
        server_id: (cfg.variant == Variant::Centralised).then_some(cfg.server_id),
        mutation: (!muts.is_empty()).then(|| muts.iter().map(|m| m.name()).collect::<Vec<_>>().join(",")),
        checks,
    })?;
    Ok(status)
}

fn limit_name(l: Limit) -> &'static str {
    match l {
        Limit::States => "states",
        Limit::Memory => "memory",
        Limit::Time => "time",
    }
}
