use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use anyhow::{bail, Context, Result};
use clap::{Args, ValueEnum};
use flcsp_core::{ChannelKind, ModelConfig};
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModelKind {
    Centralised,
    Decentralised,
}

/// Flags selecting a model configuration, shared by all commands.
#[derive(Args, Debug, Clone)]
pub struct ModelArgs {
    #[arg(long, value_enum)]
    pub model: ModelKind,
    #[arg(long)]
    pub nodes: usize,
    /// Server node (centralised only, default 0).
    #[arg(long)]
    pub server_id: Option<usize>,
    /// Channel capacity override, e.g. `tonode=1`. Repeatable.
    #[arg(long = "capacity", value_name = "KIND=V", value_parser = parse_capacity)]
    pub capacities: Vec<(ChannelKind, usize)>,
}

fn parse_capacity(s: &str) -> Result<(ChannelKind, usize), String> {
    let (kind, v) = s
        .split_once('=')
        .ok_or_else(|| format!("expected KIND=V, got `{s}`"))?;
    let kind: ChannelKind = kind.parse()?;
    let v = v
        .parse()
        .map_err(|_| format!("capacity `{v}` is not a non-negative integer"))?;
    Ok((kind, v))
}

impl ModelArgs {
    /// The configuration with default data, before capacity overrides.
    pub fn base_config(&self) -> Result<ModelConfig> {
        let cfg = match self.model {
            ModelKind::Centralised => ModelConfig::centralised(self.nodes, self.server_id.unwrap_or(0)),
            ModelKind::Decentralised => {
                if self.server_id.is_some() {
                    bail!("--server-id applies to the centralised model only");
                }
                ModelConfig::decentralised(self.nodes)
            }
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

pub fn write_json(value: &impl Serialize) -> Result<()> {
    let stdout = io::stdout();
    let mut out = stdout.lock();
    serde_json::to_writer_pretty(&mut out, value)?;
    out.write_all(b"\n")?;
    out.flush()?;
    Ok(())
}

pub fn create(path: &Path) -> Result<BufWriter<File>> {
    let f = File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
    Ok(BufWriter::new(f))
}

pub fn ser_numbers<S: serde::Serializer>(v: &[f64], s: S) -> Result<S::Ok, S::Error> {
    s.collect_seq(v.iter().map(|&x| flcsp_core::trace::number(x)))
}
