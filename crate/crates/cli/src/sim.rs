use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, ValueEnum};
use flcsp_core::models::build;
use flcsp_core::runtime::{self, conforms, ClientFn, ServerFn, StandardCallbacks};
use flcsp_core::trace::{read_jsonl, write_jsonl, Event};
use flcsp_core::{ConcreteTrace, RunConfig, SystemModel, Variant};
use serde::Serialize;

use crate::common::{create, ser_numbers, write_json, ModelArgs};
use crate::Status;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CfunArg {
    Add,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SfunArg {
    Sum,
    Mean,
}

#[derive(Args, Debug)]
pub struct SimArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long)]
    pub seed: u64,
    #[arg(long, default_value_t = 1)]
    pub iters: usize,
    #[arg(long, value_enum, default_value = "add")]
    pub cfun: CfunArg,
    #[arg(long, value_enum, default_value = "mean")]
    pub sfun: SfunArg,
    /// Initial local data, one value per node (default all 0).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub ldata: Option<Vec<f64>>,
    /// Private data, one value per node (default all 0).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub pdata: Option<Vec<f64>>,
    /// Write the events of every round as JSON Lines. Step numbers restart
    /// at 0 with each round.
    #[arg(long)]
    pub trace_out: Option<PathBuf>,
    /// Check every round's trace against the abstract model.
    #[arg(long)]
    pub conformance: bool,
}

#[derive(Args, Debug)]
pub struct ConformArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// JSON Lines trace; a step number of 0 starts a new round.
    #[arg(long)]
    pub trace: PathBuf,
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct SimReport {
    #[serde(serialize_with = "ser_numbers")]
    final_ldata: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    conformance: Option<ConformanceReport>,
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct ConformanceReport {
    conforms: bool,
    rounds: usize,
    /// Round and event index of the first mismatch.
    #[serde(skip_serializing_if = "Option::is_none")]
    round: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    first_divergence: Option<usize>,
}

fn data(values: &Option<Vec<f64>>, n: usize, what: &str) -> Result<Vec<f64>> {
    match values {
        None => Ok(vec![0.0; n]),
        Some(v) if v.len() != n => bail!("--{what} has {} values for {n} nodes", v.len()),
        Some(v) if v.iter().any(|x| !x.is_finite()) => bail!("--{what} values must be finite"),
        Some(v) => Ok(v.clone()),
    }
}

fn check_rounds(model: &SystemModel, rounds: &[ConcreteTrace]) -> Result<ConformanceReport> {
    for (k, trace) in rounds.iter().enumerate() {
        let c = conforms(model, trace)?;
        if let Some(i) = c.first_divergence {
            return Ok(ConformanceReport {
                conforms: false,
                rounds: rounds.len(),
                round: Some(k),
                first_divergence: Some(i),
            });
        }
    }
    Ok(ConformanceReport {
        conforms: true,
        rounds: rounds.len(),
        round: None,
        first_divergence: None,
    })
}

fn write_trace(path: &Path, rounds: &[ConcreteTrace]) -> Result<()> {
    let mut out = create(path)?;
    for r in rounds {
        write_jsonl(&r.events, &mut out).with_context(|| format!("cannot write {}", path.display()))?;
    }
    Ok(())
}

pub fn run(args: &SimArgs) -> Result<Status> {
    let mut cfg = args.model.base_config()?;
    for &(kind, v) in &args.model.capacities {
        cfg = cfg.with_capacity(kind, v);
    }
    cfg.validate()?;
    let n = cfg.nodes;
    let run_cfg = RunConfig::new(cfg.clone(), args.seed)
        .with_ldata(data(&args.ldata, n, "ldata")?)
        .with_pdata(data(&args.pdata, n, "pdata")?)
        .with_iters(args.iters)
        .with_callbacks(StandardCallbacks {
            cfun: match args.cfun {
                CfunArg::Add => ClientFn::Add,
            },
            sfun: match args.sfun {
                SfunArg::Sum => ServerFn::Sum,
                SfunArg::Mean => ServerFn::Mean,
            },
        });
    let result = match runtime::run(&run_cfg) {
        Ok(r) => r,
        Err(e) => {
            if let (Some(path), Some(partial)) = (&args.trace_out, e.partial_trace()) {
                write_trace(path, std::slice::from_ref(partial))?;
            }
            return Err(anyhow::Error::new(e));
        }
    };
    if let Some(path) = &args.trace_out {
        write_trace(path, &result.rounds)?;
    }
    let conformance = if args.conformance {
        Some(check_rounds(&build(&cfg)?, &result.rounds)?)
    } else {
        None
    };
    let status = match &conformance {
        Some(c) if !c.conforms => Status::Violated,
        _ => Status::Holds,
    };
    write_json(&SimReport {
        final_ldata: result.final_ldata,
        conformance,
    })?;
    Ok(status)
}

/// Splits a multi-round event list where the step counter restarts. An
/// empty list is one empty round.
fn split_rounds(events: Vec<Event>) -> Vec<Vec<Event>> {
    let mut rounds: Vec<Vec<Event>> = Vec::new();
    for e in events {
        match rounds.last_mut() {
            Some(r) if e.step != 0 => r.push(e),
            _ => rounds.push(vec![e]),
        }
    }
    if rounds.is_empty() {
        rounds.push(Vec::new());
    }
    rounds
}

pub fn conform(args: &ConformArgs) -> Result<Status> {
    let mut cfg = args.model.base_config()?;
    for &(kind, v) in &args.model.capacities {
        cfg = cfg.with_capacity(kind, v);
    }
    let model = build(&cfg)?;
    let file = File::open(&args.trace).with_context(|| format!("cannot open {}", args.trace.display()))?;
    let events = read_jsonl(BufReader::new(file)).with_context(|| format!("in {}", args.trace.display()))?;
    let rounds: Vec<ConcreteTrace> = split_rounds(events)
        .into_iter()
        .map(|events| ConcreteTrace {
            variant: cfg.variant,
            nodes: cfg.nodes,
            server_id: (cfg.variant == Variant::Centralised).then_some(cfg.server_id),
            events,
        })
        .collect();
    let report = check_rounds(&model, &rounds)?;
    let status = if report.conforms {
        Status::Holds
    } else {
        Status::Violated
    };
    write_json(&report)?;
    Ok(status)
}
