//! Acceptance suite. Prints one `PASS`/`FAIL` line per criterion and fails
//! if any criterion fails.
//!
//! The criteria run one after another inside a single test so that the
//! large state spaces are never held in memory at the same time.

#[path = "../../core/tests/support/mod.rs"]
mod support;

use std::io::Write;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use flcsp_core::checker::{Budget, CheckError, Checker, Predicate, Strategy, Verdict};
use flcsp_core::kernel::{ChannelId, ChannelKind, Message, NoHost, Status};
use flcsp_core::models::{build, build_with_mutations, ModelConfig, Mutation, SystemModel};
use flcsp_core::runtime::{conforms, run, run_round, ClientFn, ServerFn, StandardCallbacks};
use flcsp_core::{Action, ConcreteTrace, RunConfig, Variant};
use support::enumerate::{enumerate, with_stack};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);
type StretchCheck<'a> = (&'a str, Box<dyn Fn() -> Result<Verdict, CheckError> + 'a>);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Verdicts {
    deadlock_free: bool,
    reaches: bool,
    always_eventually: bool,
}

struct Checked {
    verdicts: Verdicts,
    states: usize,
    peak_bytes: usize,
}

/// All three checks with `strategy` for the safety ones; liveness always
/// uses nested DFS.
fn check_all(checker: &Checker, m: &SystemModel, strategy: Strategy) -> Result<Checked, CheckError> {
    let p = Predicate::terminated();
    let d = checker.check_deadlock_free(m, strategy)?;
    let r = checker.check_reaches(m, &p, strategy)?;
    let a = checker.check_always_eventually(m, &p)?;
    Ok(Checked {
        verdicts: Verdicts {
            deadlock_free: d.verdict.is_valid(),
            reaches: r.verdict.is_valid(),
            always_eventually: a.verdict.is_valid(),
        },
        states: d.stats.states,
        peak_bytes: [d.stats, r.stats, a.stats]
            .iter()
            .map(|s| s.stored_bytes)
            .max()
            .unwrap(),
    })
}

const ALL_VALID: Verdicts = Verdicts {
    deadlock_free: true,
    reaches: true,
    always_eventually: true,
};

fn verdict_reproduction(cfg: ModelConfig, max_time: Duration, max_bytes: usize) -> Outcome {
    let m = build(&cfg).map_err(|e| e.to_string())?;
    let checker = Checker::default();
    let start = Instant::now();
    let mut detail = Vec::new();
    for strategy in [Strategy::Dfs, Strategy::Bfs] {
        let c = check_all(&checker, &m, strategy).map_err(|e| format!("{strategy:?}: {e}"))?;
        ensure(c.verdicts == ALL_VALID, || {
            format!("{strategy:?}: {:?}", c.verdicts)
        })?;
        ensure(c.peak_bytes < max_bytes, || {
            format!("{strategy:?}: {} bytes stored", c.peak_bytes)
        })?;
        detail.push(format!(
            "{strategy:?} {} states {} KiB",
            c.states,
            c.peak_bytes >> 10
        ));
    }
    let elapsed = start.elapsed();
    ensure(elapsed < max_time, || format!("took {elapsed:?}"))?;
    Ok(format!("{}, {:.2} s", detail.join(", "), elapsed.as_secs_f64()))
}

fn criterion_1() -> Outcome {
    verdict_reproduction(ModelConfig::centralised(3, 2), Duration::from_secs(5), 100 << 20)
}

fn criterion_2() -> Outcome {
    let small = verdict_reproduction(ModelConfig::decentralised(3), Duration::from_secs(30), usize::MAX)?;
    // desk-scale stretch under the default budget: every check either
    // proves the property or runs out of budget
    let m = build(&ModelConfig::decentralised(4)).map_err(|e| e.to_string())?;
    let checker = Checker::new(Budget::default());
    let p = Predicate::terminated();
    let mut stretch = Vec::new();
    let runs: [StretchCheck; 3] = [
        (
            "deadlockfree",
            Box::new(|| checker.check_deadlock_free(&m, Strategy::Dfs).map(|o| o.verdict)),
        ),
        (
            "reaches",
            Box::new(|| checker.check_reaches(&m, &p, Strategy::Dfs).map(|o| o.verdict)),
        ),
        (
            "always-eventually",
            Box::new(|| checker.check_always_eventually(&m, &p).map(|o| o.verdict)),
        ),
    ];
    for (name, f) in runs {
        match f() {
            Ok(Verdict::Valid) => stretch.push(format!("{name} valid")),
            Err(CheckError::ResourceExceeded { limit, stats }) => {
                stretch.push(format!("{name} {limit} budget after {} states", stats.states))
            }
            Ok(v) => return Err(format!("n=4 {name}: wrong verdict {v:?}")),
            Err(e) => return Err(format!("n=4 {name}: {e}")),
        }
    }
    Ok(format!("n=3: {small}; n=4: {}", stretch.join(", ")))
}

fn small_configs() -> Vec<ModelConfig> {
    let mut out = Vec::new();
    for n in 1..=3 {
        for srv in 0..n {
            out.push(ModelConfig::centralised(n, srv));
        }
        out.push(ModelConfig::decentralised(n));
    }
    out
}

fn criterion_3() -> Outcome {
    let checker = Checker::default();
    let mut total = 0;
    for cfg in small_configs() {
        let m = build(&cfg).map_err(|e| e.to_string())?;
        let sys = m.system().clone();
        let (states, transitions, oracle) = with_stack(move || {
            let g = enumerate(&sys);
            let v = Verdicts {
                deadlock_free: g.deadlocks().is_empty(),
                reaches: g.reaches_terminated(),
                always_eventually: !g.has_non_terminated_cycle(),
            };
            (g.state_count(), g.transition_count(), v)
        });
        for strategy in [Strategy::Dfs, Strategy::Bfs] {
            let stats = checker.explore(&m, strategy).map_err(|e| e.to_string())?;
            ensure((stats.states, stats.transitions) == (states, transitions), || {
                format!(
                    "{cfg:?} {strategy:?}: checker {}/{} vs enumerator {states}/{transitions}",
                    stats.states, stats.transitions
                )
            })?;
            let c = check_all(&checker, &m, strategy).map_err(|e| e.to_string())?;
            ensure(c.verdicts == oracle, || {
                format!("{cfg:?} {strategy:?}: {:?} vs {oracle:?}", c.verdicts)
            })?;
        }
        total += 1;
    }
    Ok(format!("{total} configurations agree on counts and verdicts"))
}

/// Every shipped mutation with the configuration it is exercised on.
fn mutation_matrix() -> Vec<(&'static str, ModelConfig, Mutation)> {
    vec![
        (
            "expect-extra-update c3",
            ModelConfig::centralised(3, 2),
            Mutation::ExpectExtraUpdate,
        ),
        (
            "skip-reply c2",
            ModelConfig::centralised(2, 0),
            Mutation::SkipReply { node: None },
        ),
        (
            "strict-phase-order d3",
            ModelConfig::decentralised(3),
            Mutation::StrictPhaseOrder,
        ),
        (
            "capacity tonode=1 d3",
            ModelConfig::decentralised(3),
            Mutation::CapacityOverride {
                kind: ChannelKind::ToNode,
                capacity: 1,
            },
        ),
    ]
}

fn criterion_4() -> Outcome {
    let checker = Checker::default();
    let p = Predicate::terminated();
    for (name, cfg, mutation) in mutation_matrix() {
        let base = check_all(&checker, &build(&cfg).unwrap(), Strategy::Dfs).map_err(|e| e.to_string())?;
        let m = build_with_mutations(&cfg, &[mutation]).map_err(|e| e.to_string())?;
        let mutant = check_all(&checker, &m, Strategy::Dfs).map_err(|e| e.to_string())?;
        ensure(base.verdicts != mutant.verdicts, || format!("{name} survived"))?;
    }

    for (cfg, mutation) in [
        (ModelConfig::centralised(3, 2), Mutation::ExpectExtraUpdate),
        (ModelConfig::centralised(2, 0), Mutation::SkipReply { node: None }),
    ] {
        let m = build_with_mutations(&cfg, &[mutation]).unwrap();
        for strategy in [Strategy::Dfs, Strategy::Bfs] {
            let out = checker
                .check_deadlock_free(&m, strategy)
                .map_err(|e| e.to_string())?;
            let cx = out
                .verdict
                .counterexample()
                .ok_or_else(|| format!("{mutation:?} {strategy:?}: deadlockfree not violated"))?;
            let end = cx.replay(m.system(), None).map_err(|e| e.to_string())?;
            ensure(m.system().classify(&end) == Ok(Status::Deadlock), || {
                format!("{mutation:?}: trace does not end in a deadlock")
            })?;
        }
    }

    let m = build_with_mutations(&ModelConfig::decentralised(3), &[Mutation::StrictPhaseOrder]).unwrap();
    let sys = m.system();
    let out = checker
        .check_always_eventually(&m, &p)
        .map_err(|e| e.to_string())?;
    let cx = out
        .verdict
        .counterexample()
        .ok_or("strict phase order: liveness not violated")?;
    let k = cx.cycle_start.ok_or("strict phase order: no lasso")?;
    cx.replay(sys, Some(&p)).map_err(|e| e.to_string())?;
    // some state of the prefix has a node still answering requests while a
    // reply sits at the head of its inbox
    let mut s = sys.initial().clone();
    let mut hazard = false;
    for step in cx.steps[..k].iter() {
        s = sys.step(&s, step.node, &mut NoHost).unwrap().unwrap().1;
        hazard |= (0..sys.node_count()).any(|i| {
            let q = &s.channels[sys.layout().index_of(ChannelId::ToNode(i as u32)).unwrap()];
            matches!(q.front(), Some(Message::Tagged { phase: 2, .. }))
                && !sys.is_enabled(&s, i).unwrap()
                && !sys.node_done(&s, i)
        });
    }
    ensure(hazard, || "lasso prefix never blocks on a phase-2 head".into())?;
    Ok(format!(
        "{} mutations flip a verdict; lasso of {} steps cycling from {k}",
        mutation_matrix().len(),
        cx.steps.len()
    ))
}

fn criterion_5() -> Outcome {
    let checker = Checker::default();
    let p = Predicate::terminated();
    let (mut replayed, mut failures) = (0, Vec::new());
    for (name, cfg, mutation) in mutation_matrix() {
        let m = build_with_mutations(&cfg, &[mutation]).unwrap();
        let sys = m.system();
        for strategy in [Strategy::Dfs, Strategy::Bfs] {
            let v = checker
                .check_deadlock_free(&m, strategy)
                .map_err(|e| e.to_string())?
                .verdict;
            if let Some(cx) = v.counterexample() {
                replayed += 1;
                match cx.replay(sys, None) {
                    Ok(end) if sys.classify(&end) == Ok(Status::Deadlock) => {}
                    other => failures.push(format!("{name} {strategy:?}: {other:?}")),
                }
            }
        }
        let v = checker
            .check_always_eventually(&m, &p)
            .map_err(|e| e.to_string())?
            .verdict;
        if let Some(cx) = v.counterexample() {
            replayed += 1;
            if let Err(e) = cx.replay(sys, Some(&p)) {
                failures.push(format!("{name} liveness: {e}"));
            }
        }
    }
    ensure(failures.is_empty(), || failures.join("; "))?;
    ensure(replayed > 0, || "nothing to replay".into())?;
    Ok(format!("{replayed} counterexamples replayed, 0 failures"))
}

const SEEDS: u64 = 1000;

fn seeded_traces(
    f: &mut dyn FnMut(&ModelConfig, u64, &ConcreteTrace) -> Result<(), String>,
) -> Result<usize, String> {
    let mut runs = 0;
    for n in 2..=4 {
        for seed in 0..SEEDS {
            for cfg in [
                ModelConfig::centralised(n, seed as usize % n),
                ModelConfig::decentralised(n),
            ] {
                let (_, trace) = run_round(&RunConfig::new(cfg.clone(), seed)).map_err(|e| e.to_string())?;
                f(&cfg, seed, &trace)?;
                runs += 1;
            }
        }
    }
    Ok(runs)
}

fn criterion_6() -> Outcome {
    let runs = seeded_traces(&mut |cfg, seed, trace| {
        let model = build(cfg).map_err(|e| e.to_string())?;
        let c = conforms(&model, trace).map_err(|e| e.to_string())?;
        ensure(c.conforms(), || {
            format!("{cfg:?} seed {seed}: diverges at {:?}", c.first_divergence)
        })
    })?;
    Ok(format!("{runs} traces conform"))
}

fn criterion_7() -> Outcome {
    let runs = seeded_traces(&mut |cfg, seed, t| {
        let n = cfg.nodes;
        let sends = |pick: &dyn Fn(ChannelId, Option<u8>) -> bool| {
            t.events
                .iter()
                .filter(|e| e.action == Action::Send)
                .filter(|e| pick(e.channel.unwrap(), e.msg.and_then(|m| m.phase())))
                .count()
        };
        let got: Vec<usize>;
        let expect: Vec<usize>;
        match cfg.variant {
            Variant::Centralised => {
                got = vec![
                    sends(&|ch, _| matches!(ch, ChannelId::ServerToClient(_))),
                    sends(&|ch, _| ch == ChannelId::ClientsToServer),
                ];
                expect = vec![n - 1; 2];
            }
            Variant::Decentralised => {
                let dequeues = t
                    .events
                    .iter()
                    .filter(|e| e.action == Action::Recv && matches!(e.channel, Some(ChannelId::Buffer(_))))
                    .count();
                got = vec![
                    sends(&|ch, p| matches!(ch, ChannelId::ToNode(_)) && p == Some(1)),
                    sends(&|ch, p| matches!(ch, ChannelId::ToNode(_)) && p == Some(2)),
                    sends(&|ch, _| matches!(ch, ChannelId::Buffer(_))),
                    dequeues,
                ];
                expect = vec![n * (n - 1); 4];
            }
        }
        ensure(got == expect, || {
            format!("{cfg:?} seed {seed}: counts {got:?}, expected {expect:?}")
        })
    })?;
    Ok(format!("{runs} traces have exact message counts"))
}

fn criterion_8() -> Outcome {
    let cfg = |sfun| {
        RunConfig::new(ModelConfig::centralised(3, 2), 42)
            .with_ldata(vec![0.0, 1.0, 2.0])
            .with_callbacks(StandardCallbacks {
                cfun: ClientFn::Add,
                sfun,
            })
    };
    let sum = run(&cfg(ServerFn::Sum)).map_err(|e| e.to_string())?.final_ldata;
    let mean = run(&cfg(ServerFn::Mean)).map_err(|e| e.to_string())?.final_ldata;
    // round 2 starts from [2, 3, 2.5]: updates 4.5 and 5.5, mean 5
    let chained = run(&cfg(ServerFn::Mean).with_iters(2))
        .map_err(|e| e.to_string())?
        .final_ldata;
    ensure(sum == [2.0, 3.0, 5.0], || format!("sum gave {sum:?}"))?;
    ensure(mean == [2.0, 3.0, 2.5], || format!("mean gave {mean:?}"))?;
    ensure(chained == [4.5, 5.5, 5.0], || {
        format!("two iterations gave {chained:?}")
    })?;
    Ok(format!(
        "sum server {}, mean server {}, two iterations {chained:?}",
        sum[2], mean[2]
    ))
}

fn criterion_9() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let trace = dir.path().join("t.jsonl");
    let t = trace.to_str().unwrap();
    let cases: [&[&str]; 4] = [
        &[
            "check",
            "--model",
            "centralised",
            "--nodes",
            "3",
            "--server-id",
            "2",
            "--assert",
            "all",
            "--no-timing",
        ],
        &[
            "check",
            "--model",
            "decentralised",
            "--nodes",
            "3",
            "--mutation",
            "strict-phase-order",
            "--assert",
            "all",
            "--no-timing",
            "--trace-out",
            t,
        ],
        &[
            "sim",
            "--model",
            "centralised",
            "--nodes",
            "3",
            "--server-id",
            "2",
            "--seed",
            "42",
            "--trace-out",
            t,
        ],
        &[
            "sim",
            "--model",
            "decentralised",
            "--nodes",
            "4",
            "--seed",
            "7",
            "--iters",
            "3",
            "--trace-out",
            t,
        ],
    ];
    for args in cases {
        let mut seen = None;
        for _ in 0..3 {
            let _ = std::fs::remove_file(&trace);
            let out = Command::new(env!("CARGO_BIN_EXE_flcsp"))
                .args(args)
                .output()
                .map_err(|e| e.to_string())?;
            ensure(out.status.code().is_some_and(|c| c <= 1), || {
                format!("{args:?}: {}", String::from_utf8_lossy(&out.stderr))
            })?;
            let written = read_optional(&trace);
            let this = (out.stdout, written);
            match &seen {
                None => seen = Some(this),
                Some(first) => ensure(first == &this, || {
                    format!("{args:?}: output differs between runs")
                })?,
            }
        }
    }
    Ok(format!(
        "{} invocations byte-identical over 3 repeats",
        cases.len()
    ))
}

fn read_optional(p: &Path) -> Option<Vec<u8>> {
    std::fs::read(p).ok()
}

/// Writes past the test harness's output capture so the lines show up in a
/// plain `cargo test` run.
fn report(line: std::fmt::Arguments) {
    let mut out = std::io::stdout().lock();
    writeln!(out, "{line}").unwrap();
    out.flush().unwrap();
}

#[test]
fn acceptance() {
    let criteria: [Criterion; 9] = [
        ("centralised verdicts", criterion_1),
        ("decentralised verdicts", criterion_2),
        ("enumerator equivalence", criterion_3),
        ("mutation kill", criterion_4),
        ("counterexample replay", criterion_5),
        ("runtime conformance", criterion_6),
        ("message counts", criterion_7),
        ("aggregation", criterion_8),
        ("determinism", criterion_9),
    ];
    let mut failed = Vec::new();
    for (i, (name, f)) in criteria.into_iter().enumerate() {
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        match outcome {
            Ok(detail) => report(format_args!("PASS {} {name}: {detail}", i + 1)),
            Err(why) => {
                report(format_args!("FAIL {} {name}: {why}", i + 1));
                failed.push(i + 1);
            }
        }
    }
    assert!(failed.is_empty(), "criteria {failed:?} failed");
}
