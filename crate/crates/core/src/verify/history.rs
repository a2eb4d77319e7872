//! Invocation/response histories and their line-oriented text form:
//!
//! ```text
//! <thread> <seq> <INVOKE|RESPOND> <SEARCH|INSERT|DELETE> <key> [<true|false>] <timestamp_ns>
//! ```
//!
//! The result column appears on RESPOND lines only. Blank lines and lines
//! starting with `#` are ignored.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::HistoryError;
use crate::set::{Key, OpKind};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum EventKind {
    Invoke,
    Respond,
}

impl EventKind {
    fn as_str(self) -> &'static str {
        match self {
            EventKind::Invoke => "INVOKE",
            EventKind::Respond => "RESPOND",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Event {
    pub thread: usize,
    /// Per-thread operation counter, shared by an operation's two events.
    pub seq: u64,
    pub kind: EventKind,
    pub op: OpKind,
    pub key: Key,
    pub result: Option<bool>,
    pub timestamp: u64,
}

impl Event {
    fn order_key(&self) -> (u64, usize, u64, EventKind) {
        (self.timestamp, self.thread, self.seq, self.kind)
    }
}

impl fmt::Display for Event {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {} {} {}", self.thread, self.seq, self.kind.as_str(), self.op, self.key)?;
        if let Some(r) = self.result {
            write!(f, " {r}")?;
        }
        write!(f, " {}", self.timestamp)
    }
}

/// One operation with its interval. `respond` is `None` for an operation
/// that never returned.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Operation {
    pub thread: usize,
    pub seq: u64,
    pub op: OpKind,
    pub key: Key,
    pub result: Option<bool>,
    pub invoke: u64,
    pub respond: Option<u64>,
}

impl Operation {
    pub fn complete(thread: usize, seq: u64, op: OpKind, key: Key, result: bool, invoke: u64, respond: u64) -> Self {
        Operation {
            thread,
            seq,
            op,
            key,
            result: Some(result),
            invoke,
            respond: Some(respond),
        }
    }

    /// `self` returned before `other` was invoked.
    pub fn precedes(&self, other: &Operation) -> bool {
        matches!(self.respond, Some(r) if r < other.invoke)
    }
}

/// Time-ordered, well-formed event log.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct History {
    events: Vec<Event>,
}

impl History {
    /// Validates and orders events by `(timestamp, thread, seq)`.
    pub fn from_events(mut events: Vec<Event>) -> Result<Self, HistoryError> {
        events.sort_by_key(Event::order_key);
        let h = History { events };
        h.operations()?;
        Ok(h)
    }

    pub fn from_operations(ops: impl IntoIterator<Item = Operation>) -> Result<Self, HistoryError> {
        let mut events = Vec::new();
        for o in ops {
            events.push(Event {
                thread: o.thread,
                seq: o.seq,
                kind: EventKind::Invoke,
                op: o.op,
                key: o.key,
                result: None,
                timestamp: o.invoke,
            });
            if let Some(ts) = o.respond {
                events.push(Event {
                    thread: o.thread,
                    seq: o.seq,
                    kind: EventKind::Respond,
                    op: o.op,
                    key: o.key,
                    result: o.result,
                    timestamp: ts,
                });
            }
        }
        Self::from_events(events)
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// Pairs invocations with responses, checking per-thread well-formedness.
    /// Operations are returned in invocation order.
    pub fn operations(&self) -> Result<Vec<Operation>, HistoryError> {
        let bad = |msg: String| Err(HistoryError::Malformed(msg));
        let mut ops: Vec<Operation> = Vec::new();
        // thread -> (index of its open op, last seq, last timestamp)
        let mut open: HashMap<usize, Option<usize>> = HashMap::new();
        let mut last: HashMap<usize, (u64, u64)> = HashMap::new();
        for e in &self.events {
            if let Some(&(seq, ts)) = last.get(&e.thread) {
                if e.timestamp < ts {
                    return bad(format!("thread {} timestamps go backwards at seq {}", e.thread, e.seq));
                }
                let fresh_seq = e.kind == EventKind::Invoke;
                if (fresh_seq && e.seq <= seq) || (!fresh_seq && e.seq != seq) {
                    return bad(format!("thread {} seq {} out of order", e.thread, e.seq));
                }
            }
            last.insert(e.thread, (e.seq, e.timestamp));
            let slot = open.entry(e.thread).or_default();
            match (e.kind, *slot) {
                (EventKind::Invoke, None) => {
                    if e.result.is_some() {
                        return bad(format!("thread {} seq {}: INVOKE carries a result", e.thread, e.seq));
                    }
                    *slot = Some(ops.len());
                    ops.push(Operation {
                        thread: e.thread,
                        seq: e.seq,
                        op: e.op,
                        key: e.key,
                        result: None,
                        invoke: e.timestamp,
                        respond: None,
                    });
                }
                (EventKind::Invoke, Some(_)) => {
                    return bad(format!("thread {} invokes seq {} with an operation still open", e.thread, e.seq));
                }
                (EventKind::Respond, None) => {
                    return bad(format!("thread {} responds to seq {} without an invocation", e.thread, e.seq));
                }
                (EventKind::Respond, Some(i)) => {
                    let o = &mut ops[i];
                    if o.op != e.op || o.key != e.key {
                        return bad(format!("thread {} seq {}: response does not match its invocation", e.thread, e.seq));
                    }
                    if e.result.is_none() {
                        return bad(format!("thread {} seq {}: RESPOND without a result", e.thread, e.seq));
                    }
                    o.result = e.result;
                    o.respond = Some(e.timestamp);
                    *slot = None;
                }
            }
        }
        Ok(ops)
    }

    /// Number of invocations.
    pub fn op_count(&self) -> usize {
        self.events.iter().filter(|e| e.kind == EventKind::Invoke).count()
    }

    pub fn is_complete(&self) -> bool {
        self.events.len() == 2 * self.op_count()
    }

    pub fn to_text(&self) -> String {
        self.to_string()
    }

    pub fn parse(text: &str) -> Result<Self, HistoryError> {
        text.parse()
    }
}

impl fmt::Display for History {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for e in &self.events {
            writeln!(f, "{e}")?;
        }
        Ok(())
    }
}

fn parse_line(line: &str) -> Result<Event, String> {
    let tok: Vec<&str> = line.split_whitespace().collect();
    let (kind, result) = match tok.get(2) {
        Some(&"INVOKE") if tok.len() == 6 => (EventKind::Invoke, None),
        Some(&"RESPOND") if tok.len() == 7 => {
            let r = tok[5].parse::<bool>().map_err(|_| format!("bad result `{}`", tok[5]))?;
            (EventKind::Respond, Some(r))
        }
        Some(&"INVOKE") | Some(&"RESPOND") => return Err(format!("wrong field count ({})", tok.len())),
        Some(other) => return Err(format!("bad event kind `{other}`")),
        None => return Err("too few fields".into()),
    };
    let num = |s: &str, what: &str| s.parse::<u64>().map_err(|_| format!("bad {what} `{s}`"));
    Ok(Event {
        thread: num(tok[0], "thread")? as usize,
        seq: num(tok[1], "seq")?,
        kind,
        op: tok[3].parse()?,
        key: tok[4].parse().map_err(|_| format!("bad key `{}`", tok[4]))?,
        result,
        timestamp: num(tok[tok.len() - 1], "timestamp")?,
    })
}

impl FromStr for History {
    type Err = HistoryError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut events = Vec::new();
        for (i, raw) in s.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            events.push(parse_line(line).map_err(|msg| HistoryError::Parse { line: i + 1, msg })?);
        }
        History::from_events(events)
    }
}
