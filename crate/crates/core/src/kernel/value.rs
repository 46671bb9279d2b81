use std::fmt;

/// Index into a host-side data arena. Only the runtime creates these.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct HostRef(pub u32);

/// A data value flowing through processes and channels.
///
/// Checker-mode systems only ever contain `Int`. `Host` values are opaque
/// handles owned by the runtime, which keeps the actual payloads.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Value {
    Int(i64),
    Host(HostRef),
}

impl Value {
    pub fn as_int(self) -> Option<i64> {
        match self {
            Value::Int(v) => Some(v),
            Value::Host(_) => None,
        }
    }
}

impl From<i64> for Value {
    fn from(v: i64) -> Self {
        Value::Int(v)
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(v) => write!(f, "{v}"),
            Value::Host(r) => write!(f, "#{}", r.0),
        }
    }
}

/// Message payloads. The centralised protocol uses single-field messages,
/// the decentralised one uses `(phase, from, data)` triples.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Message {
    Plain(Value),
    Tagged { phase: u8, from: u32, data: Value },
}

impl Message {
    pub fn data(&self) -> Value {
        match *self {
            Message::Plain(v) => v,
            Message::Tagged { data, .. } => data,
        }
    }

    pub fn phase(&self) -> Option<u8> {
        match *self {
            Message::Plain(_) => None,
            Message::Tagged { phase, .. } => Some(phase),
        }
    }

    pub fn from_node(&self) -> Option<u32> {
        match *self {
            Message::Plain(_) => None,
            Message::Tagged { from, .. } => Some(from),
        }
    }

    /// Number of fields a receive must bind.
    pub fn arity(&self) -> usize {
        match self {
            Message::Plain(_) => 1,
            Message::Tagged { .. } => 3,
        }
    }
}

impl fmt::Display for Message {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Message::Plain(v) => write!(f, "{v}"),
            Message::Tagged { phase, from, data } => write!(f, "{phase}.{from}.{data}"),
        }
    }
}

/// Channel families. Used for capacity overrides and indexed channel
/// expressions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ChannelKind {
    ServerToClient,
    ClientsToServer,
    ToNode,
    Buffer,
}

impl ChannelKind {
    pub fn is_indexed(self) -> bool {
        !matches!(self, ChannelKind::ClientsToServer)
    }

    pub fn name(self) -> &'static str {
        match self {
            ChannelKind::ServerToClient => "server2client",
            ChannelKind::ClientsToServer => "clients2server",
            ChannelKind::ToNode => "tonode",
            ChannelKind::Buffer => "buffer",
        }
    }
}

impl std::str::FromStr for ChannelKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "server2client" => Ok(ChannelKind::ServerToClient),
            "clients2server" => Ok(ChannelKind::ClientsToServer),
            "tonode" => Ok(ChannelKind::ToNode),
            "buffer" => Ok(ChannelKind::Buffer),
            other => Err(format!("unknown channel kind `{other}`")),
        }
    }
}

/// A concrete channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ChannelId {
    ServerToClient(u32),
    ClientsToServer,
    ToNode(u32),
    Buffer(u32),
}

impl ChannelId {
    pub fn kind(self) -> ChannelKind {
        match self {
            ChannelId::ServerToClient(_) => ChannelKind::ServerToClient,
            ChannelId::ClientsToServer => ChannelKind::ClientsToServer,
            ChannelId::ToNode(_) => ChannelKind::ToNode,
            ChannelId::Buffer(_) => ChannelKind::Buffer,
        }
    }

    pub fn index(self) -> Option<u32> {
        match self {
            ChannelId::ServerToClient(i) | ChannelId::ToNode(i) | ChannelId::Buffer(i) => Some(i),
            ChannelId::ClientsToServer => None,
        }
    }

    pub fn new(kind: ChannelKind, index: Option<u32>) -> Option<Self> {
        match (kind, index) {
            (ChannelKind::ServerToClient, Some(i)) => Some(ChannelId::ServerToClient(i)),
            (ChannelKind::ClientsToServer, None) => Some(ChannelId::ClientsToServer),
            (ChannelKind::ToNode, Some(i)) => Some(ChannelId::ToNode(i)),
            (ChannelKind::Buffer, Some(i)) => Some(ChannelId::Buffer(i)),
            _ => None,
        }
    }
}

impl fmt::Display for ChannelId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.index() {
            Some(i) => write!(f, "{}[{i}]", self.kind().name()),
            None => f.write_str(self.kind().name()),
        }
    }
}

impl std::str::FromStr for ChannelId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.split_once('[') {
            None => {
                let kind: ChannelKind = s.parse()?;
                ChannelId::new(kind, None).ok_or_else(|| format!("channel `{s}` needs an index"))
            }
            Some((name, rest)) => {
                let idx = rest
                    .strip_suffix(']')
                    .and_then(|d| d.parse::<u32>().ok())
                    .ok_or_else(|| format!("malformed channel `{s}`"))?;
                let kind: ChannelKind = name.parse()?;
                ChannelId::new(kind, Some(idx)).ok_or_else(|| format!("channel `{name}` takes no index"))
            }
        }
    }
}
