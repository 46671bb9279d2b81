use std::collections::VecDeque;
use std::hash::{Hash, Hasher};

use smallvec::SmallVec;

use super::term::TermId;
use super::value::{HostRef, Message, Value};
use super::KernelError;

/// Slot values of one activation. Inline up to the largest slot count of
/// the shipped models, so cloning a state rarely allocates.
pub type Env = SmallVec<[Value; 8]>;

/// One activation: the term still to run and the slots it runs against.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Frame {
    pub term: TermId,
    pub env: Env,
}

/// A node's remaining behaviour. The last frame is the one executing; frames
/// below it are pending continuations of sequential compositions.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeState {
    pub frames: SmallVec<[Frame; 4]>,
}

impl NodeState {
    pub fn top(&self) -> &Frame {
        self.frames.last().expect("node state always has a frame")
    }

    pub fn top_mut(&mut self) -> &mut Frame {
        self.frames.last_mut().expect("node state always has a frame")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GlobalState {
    pub nodes: Vec<NodeState>,
    /// Queues indexed like the system's channel layout.
    pub channels: Vec<VecDeque<Message>>,
    pub shared: Vec<Value>,
}

/// Fixed-width digest of a state's canonical encoding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct StateKey(pub [u64; 2]);

impl GlobalState {
    /// Digest of the canonical encoding. Equal states always yield equal
    /// keys; callers that need exact membership compare encodings on a key
    /// match (see [`GlobalState::encode`]).
    pub fn canonical_key(&self) -> Result<StateKey, KernelError> {
        let mut buf = Vec::with_capacity(128);
        self.encode(&mut buf)?;
        Ok(key_of(&buf))
    }

    /// Appends an injective byte encoding of the state. Fails on host values,
    /// which are opaque handles and carry no structural identity.
    pub fn encode(&self, out: &mut Vec<u8>) -> Result<(), KernelError> {
        put_uvar(out, self.nodes.len() as u64);
        for node in &self.nodes {
            put_uvar(out, node.frames.len() as u64);
            for f in &node.frames {
                put_uvar(out, f.term.0 as u64);
                put_uvar(out, f.env.len() as u64);
                for v in f.env.iter() {
                    put_value(out, *v)?;
                }
            }
        }
        put_uvar(out, self.channels.len() as u64);
        for q in &self.channels {
            put_uvar(out, q.len() as u64);
            for m in q {
                match *m {
                    Message::Plain(v) => {
                        out.push(0);
                        put_value(out, v)?;
                    }
                    Message::Tagged { phase, from, data } => {
                        out.push(1);
                        out.push(phase);
                        put_uvar(out, from as u64);
                        put_value(out, data)?;
                    }
                }
            }
        }
        put_uvar(out, self.shared.len() as u64);
        for v in &self.shared {
            put_value(out, *v)?;
        }
        Ok(())
    }

    /// Inverse of [`GlobalState::encode`].
    pub fn decode(bytes: &[u8]) -> Result<GlobalState, KernelError> {
        let mut r = Reader { bytes, pos: 0 };
        let n = r.uvar()? as usize;
        let mut nodes = Vec::with_capacity(n);
        for _ in 0..n {
            let nf = r.uvar()? as usize;
            let mut frames = SmallVec::with_capacity(nf);
            for _ in 0..nf {
                let term = TermId(r.uvar()? as u32);
                let ne = r.uvar()? as usize;
                let env = (0..ne).map(|_| r.value()).collect::<Result<_, _>>()?;
                frames.push(Frame { term, env });
            }
            nodes.push(NodeState { frames });
        }
        let nc = r.uvar()? as usize;
        let mut channels = Vec::with_capacity(nc);
        for _ in 0..nc {
            let len = r.uvar()? as usize;
            let mut q = VecDeque::with_capacity(len);
            for _ in 0..len {
                let m = match r.byte()? {
                    0 => Message::Plain(r.value()?),
                    1 => {
                        let phase = r.byte()?;
                        let from = r.uvar()? as u32;
                        Message::Tagged {
                            phase,
                            from,
                            data: r.value()?,
                        }
                    }
                    t => return Err(KernelError::Decode(format!("bad message tag {t}"))),
                };
                q.push_back(m);
            }
            channels.push(q);
        }
        let ns = r.uvar()? as usize;
        let shared = (0..ns).map(|_| r.value()).collect::<Result<_, _>>()?;
        if r.pos != bytes.len() {
            return Err(KernelError::Decode("trailing bytes".into()));
        }
        Ok(GlobalState {
            nodes,
            channels,
            shared,
        })
    }

    pub fn has_host_values(&self) -> bool {
        let host = |v: &Value| matches!(v, Value::Host(_));
        self.shared.iter().any(host)
            || self
                .nodes
                .iter()
                .flat_map(|n| n.frames.iter())
                .any(|f| f.env.iter().any(host))
            || self.channels.iter().flatten().any(|m| host(&m.data()))
    }
}

/// Key of an already-encoded state.
pub fn key_of(encoded: &[u8]) -> StateKey {
    let mut a = std::collections::hash_map::DefaultHasher::new();
    encoded.hash(&mut a);
    let mut b = std::collections::hash_map::DefaultHasher::new();
    0x9e37_79b9_7f4a_7c15u64.hash(&mut b);
    encoded.hash(&mut b);
    StateKey([a.finish(), b.finish()])
}

fn put_uvar(out: &mut Vec<u8>, mut v: u64) {
    while v >= 0x80 {
        out.push((v as u8) | 0x80);
        v >>= 7;
    }
    out.push(v as u8);
}

fn put_value(out: &mut Vec<u8>, v: Value) -> Result<(), KernelError> {
    match v {
        Value::Int(i) => {
            put_uvar(out, ((i << 1) ^ (i >> 63)) as u64);
            Ok(())
        }
        Value::Host(HostRef(r)) => Err(KernelError::NotHashable(r)),
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn byte(&mut self) -> Result<u8, KernelError> {
        let b = *self
            .bytes
            .get(self.pos)
            .ok_or_else(|| KernelError::Decode("unexpected end of encoding".into()))?;
        self.pos += 1;
        Ok(b)
    }

    fn uvar(&mut self) -> Result<u64, KernelError> {
        let mut v = 0u64;
        let mut shift = 0;
        loop {
            let b = self.byte()?;
            if shift >= 64 {
                return Err(KernelError::Decode("varint overflow".into()));
            }
            v |= ((b & 0x7f) as u64) << shift;
            if b & 0x80 == 0 {
                return Ok(v);
            }
            shift += 7;
        }
    }

    fn value(&mut self) -> Result<Value, KernelError> {
        let z = self.uvar()?;
        Ok(Value::Int(((z >> 1) as i64) ^ -((z & 1) as i64)))
    }
}
