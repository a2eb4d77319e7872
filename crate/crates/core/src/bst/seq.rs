use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Mutex;

use crossbeam_epoch::{self as epoch, Guard};

use super::node::splice_router;
use super::raw::RawTree;
use super::{ConcurrentSet, Shape, Variant};
use crate::error::KeyError;
use crate::locks::NoLock;
use crate::set::{check_key, Key};

/// Plain external-tree insert. Caller guarantees exclusive access.
fn insert_exclusive(raw: &RawTree<NoLock>, key: Key, guard: &Guard) -> bool {
    let s = raw.find(key, guard);
    let curr = s.curr();
    if curr.key == key {
        return false;
    }
    let router = splice_router(key, s.curr, curr.key);
    s.pred().child(s.right).store(router, Ordering::Relaxed);
    true
}

/// Plain external-tree delete. Caller guarantees exclusive access.
fn delete_exclusive(raw: &RawTree<NoLock>, key: Key, guard: &Guard) -> bool {
    let s = raw.find(key, guard);
    if s.curr().key != key {
        return false;
    }
    let sibling = s.pred().next(!s.right, guard);
    s.ppred().child(s.pright).store(sibling, Ordering::Relaxed);
    // SAFETY: exclusive access, both nodes were just unlinked
    unsafe {
        raw.free_now(s.pred);
        raw.free_now(s.curr);
    }
    true
}

/// Unsynchronized tree: the single-threaded upper bound.
///
/// It is `Sync` only so it fits the common handle type. Overlapping calls
/// from two threads are detected and panic.
pub struct SeqBst {
    raw: RawTree<NoLock>,
    busy: AtomicBool,
}

struct Exclusive<'a>(&'a AtomicBool);

impl<'a> Exclusive<'a> {
    fn enter(flag: &'a AtomicBool) -> Self {
        if flag.swap(true, Ordering::Acquire) {
            panic!("unsynchronized tree used from two threads at once");
        }
        Exclusive(flag)
    }
}

impl Drop for Exclusive<'_> {
    fn drop(&mut self) {
        self.0.store(false, Ordering::Release);
    }
}

impl SeqBst {
    pub fn new() -> Self {
        SeqBst {
            raw: RawTree::new(),
            busy: AtomicBool::new(false),
        }
    }

    fn with_exclusive<R>(&self, f: impl FnOnce(&Guard) -> R) -> R {
        let _excl = Exclusive::enter(&self.busy);
        // SAFETY: nodes are freed eagerly, which is sound because no other
        // thread can be inside the tree while `_excl` is held
        f(unsafe { epoch::unprotected() })
    }
}

impl Default for SeqBst {
    fn default() -> Self {
        Self::new()
    }
}

impl ConcurrentSet for SeqBst {
    fn variant(&self) -> Variant {
        Variant::Seq
    }

    fn search(&self, key: Key) -> Result<bool, KeyError> {
        check_key(key)?;
        Ok(self.with_exclusive(|g| self.raw.search(key, g)))
    }

    fn insert(&self, key: Key) -> Result<bool, KeyError> {
        check_key(key)?;
        Ok(self.with_exclusive(|g| insert_exclusive(&self.raw, key, g)))
    }

    fn delete(&self, key: Key) -> Result<bool, KeyError> {
        check_key(key)?;
        Ok(self.with_exclusive(|g| delete_exclusive(&self.raw, key, g)))
    }

    fn collect_leaf_keys(&self) -> Vec<Key> {
        self.with_exclusive(|_| self.raw.leaf_keys())
    }

    fn shape(&self) -> Shape {
        self.with_exclusive(|_| self.raw.shape())
    }

    fn retry_count(&self) -> u64 {
        0
    }

    fn lock_failure_count(&self) -> u64 {
        0
    }
}

/// Sequential tree behind one mutex held for each whole operation.
pub struct CoarseBst {
    raw: RawTree<NoLock>,
    lock: Mutex<()>,
}

impl CoarseBst {
    pub fn new() -> Self {
        CoarseBst {
            raw: RawTree::new(),
            lock: Mutex::new(()),
        }
    }

    fn locked<R>(&self, f: impl FnOnce(&Guard) -> R) -> R {
        let _held = self.lock.lock().unwrap_or_else(|e| e.into_inner());
        // SAFETY: every access to the nodes happens under `lock`
        f(unsafe { epoch::unprotected() })
    }
}

impl Default for CoarseBst {
    fn default() -> Self {
        Self::new()
    }
}

impl ConcurrentSet for CoarseBst {
    fn variant(&self) -> Variant {
        Variant::Coarse
    }

    fn search(&self, key: Key) -> Result<bool, KeyError> {
        check_key(key)?;
        Ok(self.locked(|g| self.raw.search(key, g)))
    }

    fn insert(&self, key: Key) -> Result<bool, KeyError> {
        check_key(key)?;
        Ok(self.locked(|g| insert_exclusive(&self.raw, key, g)))
    }

    fn delete(&self, key: Key) -> Result<bool, KeyError> {
        check_key(key)?;
        Ok(self.locked(|g| delete_exclusive(&self.raw, key, g)))
    }

    fn collect_leaf_keys(&self) -> Vec<Key> {
        self.locked(|_| self.raw.leaf_keys())
    }

    fn shape(&self) -> Shape {
        self.locked(|_| self.raw.shape())
    }

    fn retry_count(&self) -> u64 {
        0
    }

    fn lock_failure_count(&self) -> u64 {
        0
    }
}
