//! FN-BST: flag locks on nodes.
//!
//! A node's flag guards the node's own child links. Insert locks the parent
//! and the leaf; delete locks grandparent, parent and leaf, top-down. The
//! unlinked parent and leaf are never unlocked, so a snapshot that still
//! names them can never lock them again.

use std::sync::atomic::Ordering::SeqCst;

use crossbeam_epoch as epoch;
use crossbeam_utils::Backoff;

use super::node::splice_router;
use super::raw::RawTree;
use super::{quiescent_views, ConcurrentSet, Shape, Variant};
use crate::error::KeyError;
use crate::locks::FlagLock;
use crate::set::{check_key, Key};

pub struct FnBst {
    raw: RawTree<FlagLock>,
}

impl FnBst {
    pub fn new() -> Self {
        FnBst { raw: RawTree::new() }
    }
}

impl Default for FnBst {
    fn default() -> Self {
        Self::new()
    }
}

impl ConcurrentSet for FnBst {
    fn variant(&self) -> Variant {
        Variant::FlagNode
    }

    fn search(&self, key: Key) -> Result<bool, KeyError> {
        check_key(key)?;
        Ok(self.raw.search(key, &epoch::pin()))
    }

    fn insert(&self, key: Key) -> Result<bool, KeyError> {
        check_key(key)?;
        let guard = &epoch::pin();
        let backoff = Backoff::new();
        loop {
            let s = self.raw.find(key, guard);
            let curr = s.curr();
            if curr.key == key {
                return Ok(false);
            }
            let pred = s.pred();
            if !pred.lock.try_acquire() {
                self.raw.lock_failed();
                backoff.snooze();
                continue;
            }
            if !curr.lock.try_acquire() {
                pred.lock.release();
                self.raw.lock_failed();
                backoff.snooze();
                continue;
            }
            if pred.child(s.right).load(SeqCst, guard) != s.curr {
                curr.lock.release();
                pred.lock.release();
                self.raw.retry();
                backoff.snooze();
                continue;
            }
            pred.child(s.right).store(splice_router(key, s.curr, curr.key), SeqCst);
            curr.lock.release();
            pred.lock.release();
            return Ok(true);
        }
    }

    fn delete(&self, key: Key) -> Result<bool, KeyError> {
        check_key(key)?;
        let guard = &epoch::pin();
        let backoff = Backoff::new();
        loop {
            let s = self.raw.find(key, guard);
            let curr = s.curr();
            if curr.key != key {
                return Ok(false);
            }
            let pred = s.pred();
            let ppred = s.ppred();

            if !ppred.lock.try_acquire() {
                self.raw.lock_failed();
                backoff.snooze();
                continue;
            }
            if !pred.lock.try_acquire() {
                ppred.lock.release();
                self.raw.lock_failed();
                backoff.snooze();
                continue;
            }
            if !curr.lock.try_acquire() {
                pred.lock.release();
                ppred.lock.release();
                self.raw.lock_failed();
                backoff.snooze();
                continue;
            }
            if ppred.child(s.pright).load(SeqCst, guard) != s.pred
                || pred.child(s.right).load(SeqCst, guard) != s.curr
            {
                curr.lock.release();
                pred.lock.release();
                ppred.lock.release();
                self.raw.retry();
                backoff.snooze();
                continue;
            }
            // pred is locked, so its other link is stable
            let sibling = pred.next(!s.right, guard);
            ppred.child(s.pright).store(sibling, SeqCst);
            ppred.lock.release();
            // pred and curr stay locked
            unsafe {
                self.raw.retire(s.pred, guard);
                self.raw.retire(s.curr, guard);
            }
            return Ok(true);
        }
    }

    quiescent_views!();
}
