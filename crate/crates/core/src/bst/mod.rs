//! External binary search trees under six synchronization schemes.
//!
//! All variants share one layout: keys live in leaves, internal nodes are
//! routers with two children, and the tree starts as a POS_INF router over a
//! NEG_INF leaf and a POS_INF leaf. Those three nodes are never unlinked, so
//! every application leaf has both a parent and a grandparent.
//!
//! Searches never lock. The fine-grained variants take a snapshot of the
//! search path, try-lock the nodes they are about to change, validate the
//! snapshot and either commit or start over from the root. Once validation
//! passes the commit cannot fail. Nodes unlinked by a delete keep their
//! locks forever, which is what makes stale snapshots fail validation.
//!
//! | variant | locks                                  | validation                     |
//! |---------|----------------------------------------|--------------------------------|
//! | `seq`   | none, single-threaded                  | none                           |
//! | `coarse`| one tree-wide mutex                    | none                           |
//! | `fn`    | flag per node: pred+curr / ppred+pred+curr | link re-checks             |
//! | `fe`    | flag per incoming edge: curr / pred+curr+sibling | link re-checks, cut edges on unlinked routers |
//! | `fem`   | flag+mark per incoming edge: curr / pred+curr | marks and link re-checks |
//! | `tn`    | ticket per node: pred / ppred+pred     | version stamps sampled during the search |

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::KeyError;
use crate::set::{Key, OpKind};

mod fe;
mod fem;
mod fn_tree;
mod node;
mod raw;
mod seq;
mod shape;
mod tn;

pub use fe::FeBst;
pub use fem::FemBst;
pub use fn_tree::FnBst;
pub use seq::{CoarseBst, SeqBst};
pub use shape::{Shape, ShapeNode};
pub use tn::TnBst;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    /// Unsynchronized baseline.
    Seq,
    /// One lock around each whole operation.
    Coarse,
    /// Flag lock on nodes.
    #[serde(rename = "fn")]
    FlagNode,
    /// Flag lock on edges.
    #[serde(rename = "fe")]
    FlagEdge,
    /// Flag-and-mark lock on edges.
    #[serde(rename = "fem")]
    FlagEdgeMark,
    /// Ticket lock on nodes.
    #[serde(rename = "tn")]
    TicketNode,
}

impl Variant {
    pub const ALL: [Variant; 6] = [
        Variant::Seq,
        Variant::Coarse,
        Variant::FlagNode,
        Variant::FlagEdge,
        Variant::FlagEdgeMark,
        Variant::TicketNode,
    ];

    /// Variants that may be shared between threads.
    pub const CONCURRENT: [Variant; 5] = [
        Variant::Coarse,
        Variant::FlagNode,
        Variant::FlagEdge,
        Variant::FlagEdgeMark,
        Variant::TicketNode,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Seq => "seq",
            Variant::Coarse => "coarse",
            Variant::FlagNode => "fn",
            Variant::FlagEdge => "fe",
            Variant::FlagEdgeMark => "fem",
            Variant::TicketNode => "tn",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Variant::Seq => "BST",
            Variant::Coarse => "SYN-BST",
            Variant::FlagNode => "FN-BST",
            Variant::FlagEdge => "FE-BST",
            Variant::FlagEdgeMark => "FEM-BST",
            Variant::TicketNode => "TN-BST",
        }
    }

    pub fn is_concurrent(self) -> bool {
        self != Variant::Seq
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name().eq_ignore_ascii_case(s) || v.label().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown variant `{s}` (expected one of seq, coarse, fn, fe, fem, tn)"))
    }
}

/// Set interface implemented by every variant.
pub trait ConcurrentSet: Send + Sync {
    fn variant(&self) -> Variant;

    fn search(&self, key: Key) -> Result<bool, KeyError>;

    fn insert(&self, key: Key) -> Result<bool, KeyError>;

    fn delete(&self, key: Key) -> Result<bool, KeyError>;

    fn apply(&self, op: OpKind, key: Key) -> Result<bool, KeyError> {
        match op {
            OpKind::Search => self.search(key),
            OpKind::Insert => self.insert(key),
            OpKind::Delete => self.delete(key),
        }
    }

    /// Abandoned attempts since construction, one per restart of an
    /// operation's retry loop.
    fn retry_count(&self) -> u64;

    /// Failed try-lock attempts since construction.
    fn lock_failure_count(&self) -> u64;

    /// In-order application keys. Only meaningful at quiescence.
    fn collect_leaf_keys(&self) -> Vec<Key>;

    /// Copy of the reachable structure. Only meaningful at quiescence.
    fn shape(&self) -> Shape;
}

pub type TreeHandle = Arc<dyn ConcurrentSet>;

pub fn new_tree(variant: Variant) -> TreeHandle {
    match variant {
        Variant::Seq => Arc::new(SeqBst::new()),
        Variant::Coarse => Arc::new(CoarseBst::new()),
        Variant::FlagNode => Arc::new(FnBst::new()),
        Variant::FlagEdge => Arc::new(FeBst::new()),
        Variant::FlagEdgeMark => Arc::new(FemBst::new()),
        Variant::TicketNode => Arc::new(TnBst::new()),
    }
}

macro_rules! quiescent_views {
    () => {
        fn retry_count(&self) -> u64 {
            self.raw.retries.sum()
        }

        fn lock_failure_count(&self) -> u64 {
            self.raw.lock_failures.sum()
        }

        fn collect_leaf_keys(&self) -> Vec<Key> {
            self.raw.leaf_keys()
        }

        fn shape(&self) -> Shape {
            self.raw.shape()
        }
    };
}
pub(crate) use quiescent_views;
