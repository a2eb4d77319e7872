//! Concurrent external binary search trees under six lock schemes, with the
//! tooling to check and measure them.
//!
//! * [`set`]: keys, sentinels and the sequential reference set.
//! * [`locks`]: flag, flag-and-mark and ticket try-locks.
//! * [`bst`]: the tree variants behind one [`bst::ConcurrentSet`] trait.
//! * [`verify`]: structural checks, history recording, a linearizability
//!   checker and a stress runner with deadlock detection.
//! * [`bench`]: prefill plus timed mixed-workload throughput runs.
//! * [`model`]: an Amdahl-style speedup model for concurrent structures.

pub mod bench;
pub mod bst;
pub mod error;
pub mod locks;
pub mod model;
pub mod set;
pub mod verify;

pub use bst::{new_tree, ConcurrentSet, TreeHandle, Variant};
pub use error::{ConfigError, HistoryError, KeyError, RecordError, StressError};
pub use set::{Key, OpKind, SeqOracle, Sentinel, NEG_INF, POS_INF};
