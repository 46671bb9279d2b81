//! Event traces shared by the checker, the runtime and the command line.
//!
//! One event per line in JSON Lines form:
//! `{"step":0,"node":2,"action":"send","channel":"server2client[0]","msg":{"data":2}}`.
//! Integral numbers are written without a fractional part.

use std::fmt;
use std::io::{self, BufRead, Write};

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::kernel::{ActionLabel, ChannelId, Message, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Action {
    Send,
    Recv,
    Assign,
    Skip,
}

impl Action {
    pub fn name(self) -> &'static str {
        match self {
            Action::Send => "send",
            Action::Recv => "recv",
            Action::Assign => "assign",
            Action::Skip => "skip",
        }
    }

    pub fn of(label: &ActionLabel) -> Action {
        match label {
            ActionLabel::Send { .. } => Action::Send,
            ActionLabel::Recv { .. } => Action::Recv,
            ActionLabel::Assign { .. } => Action::Assign,
            ActionLabel::Skip => Action::Skip,
        }
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A message with its data payload resolved to a number.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged, deny_unknown_fields)]
pub enum EventMsg {
    // Tagged first: untagged deserialization tries variants in order.
    Tagged {
        phase: u8,
        from: u32,
        #[serde(serialize_with = "ser_number")]
        data: f64,
    },
    Plain {
        #[serde(serialize_with = "ser_number")]
        data: f64,
    },
}

impl EventMsg {
    pub fn data(&self) -> f64 {
        match *self {
            EventMsg::Plain { data } | EventMsg::Tagged { data, .. } => data,
        }
    }

    pub fn phase(&self) -> Option<u8> {
        match *self {
            EventMsg::Tagged { phase, .. } => Some(phase),
            EventMsg::Plain { .. } => None,
        }
    }

    pub fn from_node(&self) -> Option<u32> {
        match *self {
            EventMsg::Tagged { from, .. } => Some(from),
            EventMsg::Plain { .. } => None,
        }
    }

    /// Resolves the payload of `msg` with `data`.
    pub fn resolve<E>(msg: &Message, data: impl FnOnce(Value) -> Result<f64, E>) -> Result<Self, E> {
        Ok(match *msg {
            Message::Plain(v) => EventMsg::Plain { data: data(v)? },
            Message::Tagged { phase, from, data: v } => EventMsg::Tagged {
                phase,
                from,
                data: data(v)?,
            },
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub step: usize,
    pub node: usize,
    pub action: Action,
    #[serde(serialize_with = "ser_channel", deserialize_with = "de_channel")]
    pub channel: Option<ChannelId>,
    pub msg: Option<EventMsg>,
}

impl Event {
    /// Event for a checker-mode label, whose values are all integers.
    pub fn from_int_label(step: usize, node: usize, label: &ActionLabel) -> Option<Event> {
        let msg = match label.message() {
            Some(m) => Some(EventMsg::resolve(&m, |v| v.as_int().map(|i| i as f64).ok_or(())))
                .transpose()
                .ok()?,
            None => None,
        };
        Some(Event {
            step,
            node,
            action: Action::of(label),
            channel: label.channel(),
            msg,
        })
    }
}

fn ser_number<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
    number(*v).serialize(s)
}

fn ser_channel<S: Serializer>(v: &Option<ChannelId>, s: S) -> Result<S::Ok, S::Error> {
    match v {
        Some(c) => s.collect_str(c),
        None => s.serialize_none(),
    }
}

fn de_channel<'de, D: Deserializer<'de>>(d: D) -> Result<Option<ChannelId>, D::Error> {
    Option::<String>::deserialize(d)?
        .map(|s| s.parse().map_err(serde::de::Error::custom))
        .transpose()
}

/// JSON number for `v`, integral when `v` is a whole number that an `i64`
/// holds exactly.
pub fn number(v: f64) -> serde_json::Value {
    const EXACT: f64 = 9_007_199_254_740_992.0;
    if v.fract() == 0.0 && v.abs() <= EXACT {
        serde_json::Value::from(v as i64)
    } else {
        serde_json::Number::from_f64(v)
            .map(serde_json::Value::Number)
            .unwrap_or(serde_json::Value::Null)
    }
}

pub fn write_jsonl(events: &[Event], mut out: impl Write) -> io::Result<()> {
    for e in events {
        serde_json::to_writer(&mut out, e)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

/// Parses events, skipping blank lines. Errors carry the 1-based line.
pub fn read_jsonl(input: impl BufRead) -> io::Result<Vec<Event>> {
    let mut events = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let e = serde_json::from_str(&line)
            .map_err(|err| io::Error::new(io::ErrorKind::InvalidData, format!("line {}: {err}", i + 1)))?;
        events.push(e);
    }
    Ok(events)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(e: &Event) -> String {
        serde_json::to_string(e).unwrap()
    }

    #[test]
    fn field_order_and_integral_numbers() {
        let e = Event {
            step: 3,
            node: 1,
            action: Action::Send,
            channel: Some(ChannelId::ToNode(2)),
            msg: Some(EventMsg::Tagged {
                phase: 2,
                from: 1,
                data: 4.0,
            }),
        };
        assert_eq!(
            line(&e),
            r#"{"step":3,"node":1,"action":"send","channel":"tonode[2]","msg":{"phase":2,"from":1,"data":4}}"#
        );
        let e = Event {
            step: 0,
            node: 0,
            action: Action::Assign,
            channel: None,
            msg: None,
        };
        assert_eq!(
            line(&e),
            r#"{"step":0,"node":0,"action":"assign","channel":null,"msg":null}"#
        );
        assert_eq!(number(2.5).to_string(), "2.5");
        assert_eq!(number(-7.0).to_string(), "-7");
    }

    #[test]
    fn jsonl_round_trip() {
        let events = vec![
            Event {
                step: 0,
                node: 2,
                action: Action::Send,
                channel: Some(ChannelId::ServerToClient(0)),
                msg: Some(EventMsg::Plain { data: 2.0 }),
            },
            Event {
                step: 1,
                node: 0,
                action: Action::Recv,
                channel: Some(ChannelId::ClientsToServer),
                msg: Some(EventMsg::Plain { data: 0.25 }),
            },
            Event {
                step: 2,
                node: 1,
                action: Action::Recv,
                channel: Some(ChannelId::Buffer(1)),
                msg: Some(EventMsg::Tagged {
                    phase: 1,
                    from: 0,
                    data: 3.0,
                }),
            },
            Event {
                step: 3,
                node: 1,
                action: Action::Skip,
                channel: None,
                msg: None,
            },
        ];
        let mut buf = Vec::new();
        write_jsonl(&events, &mut buf).unwrap();
        let back = read_jsonl(buf.as_slice()).unwrap();
        assert_eq!(back, events);
    }

    #[test]
    fn rejects_bad_channel() {
        let err =
            read_jsonl(r#"{"step":0,"node":0,"action":"send","channel":"nowhere","msg":null}"#.as_bytes())
                .unwrap_err();
        assert!(err.to_string().starts_with("line 1"));
    }
}
