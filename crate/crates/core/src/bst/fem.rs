//! FEM-BST: flag-and-mark locks on edges.
//!
//! A node's lock word guards the edge into it. Insert locks only the leaf it
//! replaces. Delete locks the parent router and the leaf, marks both, and
//! swings the grandparent's edge to the sibling. The grandparent itself is
//! never locked: the marks tell concurrent operations that the parent is
//! on its way out, and the sibling wait below ensures no insert is still
//! writing under the parent when it is unlinked.

use std::sync::atomic::Ordering::SeqCst;

use crossbeam_epoch as epoch;
use crossbeam_utils::Backoff;

use super::node::splice_router;
use super::raw::RawTree;
use super::{quiescent_views, ConcurrentSet, Shape, Variant};
use crate::error::KeyError;
use crate::locks::FlagMarkWord;
use crate::set::{check_key, Key};

pub struct FemBst {
    raw: RawTree<FlagMarkWord>,
}

impl FemBst {
    pub fn new() -> Self {
        FemBst { raw: RawTree::new() }
    }
}

impl Default for FemBst {
    fn default() -> Self {
        Self::new()
    }
}

impl ConcurrentSet for FemBst {
    fn variant(&self) -> Variant {
        Variant::FlagEdgeMark
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
            if !curr.lock.try_acquire() {
                self.raw.lock_failed();
                backoff.snooze();
                continue;
            }
            let pred = s.pred();
            // parent is being deleted
            if pred.lock.is_marked() {
                curr.lock.release();
                self.raw.retry();
                backoff.snooze();
                continue;
            }
            // parent no longer points at the leaf we locked
            if pred.child(s.right).load(SeqCst, guard) != s.curr {
                curr.lock.release();
                self.raw.retry();
                backoff.snooze();
                continue;
            }
            pred.child(s.right).store(splice_router(key, s.curr, curr.key), SeqCst);
            curr.lock.release();
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

            if pred.lock.is_marked() || !pred.lock.try_acquire() {
                self.raw.lock_failed();
                backoff.snooze();
                continue;
            }
            pred.lock.set_marked(true);

            // grandparent deleted, or no longer linked to pred
            if ppred.lock.is_marked() || ppred.child(s.pright).load(SeqCst, guard) != s.pred {
                pred.lock.set_marked(false);
                pred.lock.release();
                self.raw.retry();
                backoff.snooze();
                continue;
            }

            if !curr.lock.try_acquire() {
                pred.lock.set_marked(false);
                pred.lock.release();
                self.raw.lock_failed();
                backoff.snooze();
                continue;
            }
            curr.lock.set_marked(true);

            if pred.child(s.right).load(SeqCst, guard) != s.curr {
                curr.lock.set_marked(false);
                curr.lock.release();
                pred.lock.set_marked(false);
                pred.lock.release();
                self.raw.retry();
                backoff.snooze();
                continue;
            }

            // Committed. Wait until the sibling edge is quiet: an insert may
            // hold the sibling leaf after passing its mark check, and a
            // delete below may still be swinging this edge. The lock must be
            // read before the link; once the sibling is seen unlocked, any
            // later locker will find pred marked and back off.
            let sibling_link = pred.child(!s.right);
            let wait = Backoff::new();
            let mut sibling = sibling_link.load(SeqCst, guard);
            loop {
                // SAFETY: protected by the guard; routers never hold null links
                let node = unsafe { sibling.deref() };
                if node.lock.is_held() || sibling_link.load(SeqCst, guard) != sibling {
                    sibling = sibling_link.load(SeqCst, guard);
                    wait.snooze();
                    continue;
                }
                break;
            }

            ppred.child(s.pright).store(sibling, SeqCst);
            // pred and curr stay locked and marked
            unsafe {
                self.raw.retire(s.pred, guard);
                self.raw.retire(s.curr, guard);
            }
            return Ok(true);
        }
    }

    quiescent_views!();
}
