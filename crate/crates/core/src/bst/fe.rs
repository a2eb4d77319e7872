//! FE-BST: flag locks on edges, no mark bits.
//!
//! A node's flag guards the edge into it, and every write to an edge happens
//! while holding the flag of the node it points at (or pointed at). Without
//! a mark to announce a dying parent, delete also takes the sibling's flag,
//! and before releasing it cuts both edges of the unlinked router by setting
//! the tag bit. Any stale snapshot that still goes through that router then
//! fails its link re-check, because a tagged edge never compares equal to an
//! untagged pointer.

use std::sync::atomic::Ordering::SeqCst;

use crossbeam_epoch::{self as epoch, Guard};
use crossbeam_utils::Backoff;

use super::node::{splice_router, Node};
use super::raw::RawTree;
use super::{quiescent_views, ConcurrentSet, Shape, Variant};
use crate::error::KeyError;
use crate::locks::FlagLock;
use crate::set::{check_key, Key};

const CUT: usize = 1;

pub struct FeBst {
    raw: RawTree<FlagLock>,
}

impl FeBst {
    pub fn new() -> Self {
        FeBst { raw: RawTree::new() }
    }
}

impl Default for FeBst {
    fn default() -> Self {
        Self::new()
    }
}

fn cut_edges(node: &Node<FlagLock>, guard: &Guard) {
    for right in [false, true] {
        let link = node.child(right);
        link.store(link.load(SeqCst, guard).with_tag(CUT), SeqCst);
    }
}

impl ConcurrentSet for FeBst {
    fn variant(&self) -> Variant {
        Variant::FlagEdge
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
            let link = s.pred().child(s.right);
            // also catches a parent whose edges were cut by a delete
            if link.load(SeqCst, guard) != s.curr {
                curr.lock.release();
                self.raw.retry();
                backoff.snooze();
                continue;
            }
            link.store(splice_router(key, s.curr, curr.key), SeqCst);
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

            if !pred.lock.try_acquire() {
                self.raw.lock_failed();
                backoff.snooze();
                continue;
            }
            if ppred.child(s.pright).load(SeqCst, guard) != s.pred {
                pred.lock.release();
                self.raw.retry();
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

            // Committed. Take the sibling edge, following the link if a
            // delete below pred swings it while we wait.
            let sibling_link = pred.child(!s.right);
            let wait = Backoff::new();
            let sibling = loop {
                let candidate = sibling_link.load(SeqCst, guard);
                // SAFETY: protected by the guard; routers never hold null links
                let node = unsafe { candidate.deref() };
                if node.lock.try_acquire() {
                    if sibling_link.load(SeqCst, guard) == candidate {
                        break candidate;
                    }
                    node.lock.release();
                }
                wait.snooze();
            };

            ppred.child(s.pright).store(sibling, SeqCst);
            cut_edges(pred, guard);
            // SAFETY: as above
            unsafe { sibling.deref() }.lock.release();
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
