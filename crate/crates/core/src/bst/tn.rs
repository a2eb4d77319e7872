//! TN-BST: ticket locks on nodes, validated by version stamps.
//!
//! The search records the version of each router before reading its child
//! link. A writer later acquires the router only if the version is still the
//! one it saw ([`TicketLock::try_acquire_at`]), which proves nobody wrote
//! through that router in between, so no link needs re-reading. Unlinked
//! routers keep their tickets taken forever.

use std::sync::atomic::Ordering::SeqCst;

use crossbeam_epoch::{self as epoch, Guard, Shared};
use crossbeam_utils::Backoff;

use super::node::{splice_router, Node};
use super::raw::RawTree;
use super::{quiescent_views, ConcurrentSet, Shape, Variant};
use crate::error::KeyError;
use crate::locks::TicketLock;
use crate::set::{check_key, Key};

pub struct TnBst {
    raw: RawTree<TicketLock>,
}

struct Versioned<'g> {
    ppred: Shared<'g, Node<TicketLock>>,
    ppred_version: u32,
    pright: bool,
    pred: Shared<'g, Node<TicketLock>>,
    pred_version: u32,
    right: bool,
    curr: Shared<'g, Node<TicketLock>>,
}

impl TnBst {
    pub fn new() -> Self {
        TnBst { raw: RawTree::new() }
    }

    fn find<'g>(&self, key: Key, guard: &'g Guard) -> Versioned<'g> {
        let mut snap = Versioned {
            ppred: Shared::null(),
            ppred_version: 0,
            pright: false,
            pred: Shared::null(),
            pred_version: 0,
            right: false,
            curr: self.raw.root(guard),
        };
        // SAFETY: nodes reached from the root are protected by the guard
        let mut node = unsafe { snap.curr.deref() };
        while !node.leaf {
            snap.ppred = snap.pred;
            snap.ppred_version = snap.pred_version;
            snap.pright = snap.right;
            snap.pred = snap.curr;
            // version before link
            snap.pred_version = node.lock.version_of();
            snap.right = key >= node.key;
            snap.curr = node.next(snap.right, guard);
            node = unsafe { snap.curr.deref() };
        }
        snap
    }
}

impl Default for TnBst {
    fn default() -> Self {
        Self::new()
    }
}

impl ConcurrentSet for TnBst {
    fn variant(&self) -> Variant {
        Variant::TicketNode
    }

    fn search(&self, key: Key) -> Result<bool, KeyError> {
        check_key(key)?;
        let guard = &epoch::pin();
        // SAFETY: as in `find`
        Ok(unsafe { self.find(key, guard).curr.deref() }.key == key)
    }

    fn insert(&self, key: Key) -> Result<bool, KeyError> {
        check_key(key)?;
        let guard = &epoch::pin();
        let backoff = Backoff::new();
        loop {
            let s = self.find(key, guard);
            // SAFETY: as in `find`; pred is never null
            let (pred, curr) = unsafe { (s.pred.deref(), s.curr.deref()) };
            if curr.key == key {
                return Ok(false);
            }
            if !pred.lock.try_acquire_at(s.pred_version) {
                self.raw.lock_failed();
                backoff.snooze();
                continue;
            }
            pred.child(s.right).store(splice_router(key, s.curr, curr.key), SeqCst);
            pred.lock.release();
            return Ok(true);
        }
    }

    fn delete(&self, key: Key) -> Result<bool, KeyError> {
        check_key(key)?;
        let guard = &epoch::pin();
        let backoff = Backoff::new();
        loop {
            let s = self.find(key, guard);
            // SAFETY: as in `find`
            if unsafe { s.curr.deref() }.key != key {
                return Ok(false);
            }
            // SAFETY: an application leaf always has a grandparent
            let (ppred, pred) = unsafe { (s.ppred.deref(), s.pred.deref()) };
            if !ppred.lock.try_acquire_at(s.ppred_version) {
                self.raw.lock_failed();
                backoff.snooze();
                continue;
            }
            if !pred.lock.try_acquire_at(s.pred_version) {
                ppred.lock.release();
                self.raw.lock_failed();
                backoff.snooze();
                continue;
            }
            let sibling = pred.next(!s.right, guard);
            ppred.child(s.pright).store(sibling, SeqCst);
            ppred.lock.release();
            // pred stays locked; curr is only reachable through pred
            unsafe {
                self.raw.retire(s.pred, guard);
                self.raw.retire(s.curr, guard);
            }
            return Ok(true);
        }
    }

    quiescent_views!();
}
