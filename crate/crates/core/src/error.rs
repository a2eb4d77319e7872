use thiserror::Error;

use crate::set::{Key, OpKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum KeyError {
    #[error("key {0} is reserved for a sentinel node")]
    Sentinel(Key),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConfigError {
    #[error("workload percentages must sum to 100 (got {insert}+{delete}+{search})")]
    MixSum { insert: u32, delete: u32, search: u32 },
    #[error("key range must be at least 2 (got {0})")]
    KeyRange(u64),
    #[error("thread count must be positive")]
    NoThreads,
    #[error("the unsynchronized variant is single-threaded (requested {0} threads)")]
    SeqThreads(usize),
    #[error("duration must be positive")]
    Duration,
    #[error("{0} list must not be empty")]
    EmptyList(&'static str),
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum HistoryError {
    #[error("history has {ops} operations, above the checker bound of {bound}")]
    TooLarge { ops: usize, bound: usize },
    #[error("malformed history: {0}")]
    Malformed(String),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StressError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("deadlock suspected: thread {thread} stuck in {op}({key}) past the {timeout_ms} ms grace timeout")]
    Deadlock {
        thread: usize,
        op: OpKind,
        key: Key,
        timeout_ms: u64,
    },
    #[error("deadlock suspected: thread {thread} did not finish within the {timeout_ms} ms grace timeout")]
    Stalled { thread: usize, timeout_ms: u64 },
}

#[derive(Debug, Error)]
pub enum RecordError {
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unknown format `{0}` (expected csv or json)")]
    Format(String),
    #[error("{0}")]
    Invalid(String),
}
