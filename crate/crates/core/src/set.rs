//! Dictionary semantics shared by every tree variant, and the sequential
//! reference set the verifiers replay histories against.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::KeyError;

/// Application keys are plain signed integers. The two extreme values are
/// reserved for the sentinel nodes and are rejected by every public entry point.
pub type Key = i64;

/// The two immortal boundary keys.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Sentinel {
    NegInf,
    PosInf,
}

impl Sentinel {
    pub const fn key(self) -> Key {
        match self {
            Sentinel::NegInf => Key::MIN,
            Sentinel::PosInf => Key::MAX,
        }
    }

    pub fn of(key: Key) -> Option<Sentinel> {
        match key {
            Key::MIN => Some(Sentinel::NegInf),
            Key::MAX => Some(Sentinel::PosInf),
            _ => None,
        }
    }
}

pub const NEG_INF: Key = Sentinel::NegInf.key();
pub const POS_INF: Key = Sentinel::PosInf.key();

#[inline]
pub fn is_sentinel(key: Key) -> bool {
    key == NEG_INF || key == POS_INF
}

#[inline]
pub fn check_key(key: Key) -> Result<Key, KeyError> {
    if is_sentinel(key) {
        Err(KeyError::Sentinel(key))
    } else {
        Ok(key)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum OpKind {
    Search,
    Insert,
    Delete,
}

impl OpKind {
    pub const ALL: [OpKind; 3] = [OpKind::Search, OpKind::Insert, OpKind::Delete];

    pub fn as_str(self) -> &'static str {
        match self {
            OpKind::Search => "SEARCH",
            OpKind::Insert => "INSERT",
            OpKind::Delete => "DELETE",
        }
    }
}

impl fmt::Display for OpKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for OpKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "SEARCH" => Ok(OpKind::Search),
            "INSERT" => Ok(OpKind::Insert),
            "DELETE" => Ok(OpKind::Delete),
            other => Err(format!("unknown operation `{other}`")),
        }
    }
}

/// Sequential reference set. Not thread-safe; callers serialize access.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct SeqOracle {
    contents: BTreeSet<Key>,
}

impl SeqOracle {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn apply(&mut self, op: OpKind, key: Key) -> Result<bool, KeyError> {
        check_key(key)?;
        Ok(match op {
            OpKind::Search => self.contents.contains(&key),
            OpKind::Insert => self.contents.insert(key),
            OpKind::Delete => self.contents.remove(&key),
        })
    }

    pub fn contains(&self, key: Key) -> bool {
        self.contents.contains(&key)
    }

    pub fn len(&self) -> usize {
        self.contents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.contents.is_empty()
    }

    /// Keys in strictly increasing order.
    pub fn keys(&self) -> impl Iterator<Item = Key> + '_ {
        self.contents.iter().copied()
    }

    pub fn to_vec(&self) -> Vec<Key> {
        self.keys().collect()
    }
}
