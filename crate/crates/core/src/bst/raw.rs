//! Substrate shared by every variant: the immortal three-node skeleton,
//! the snapshot-taking descent, retry statistics, quiescent traversal and
//! reclamation of unlinked nodes.

use std::sync::atomic::{AtomicU64, AtomicUsize, Ordering};
#[cfg(feature = "retain-retired")]
use std::sync::Mutex;

#[cfg(feature = "retain-retired")]
use crossbeam_epoch::Owned;
use crossbeam_epoch::{self as epoch, Atomic, Guard, Shared};
use crossbeam_utils::CachePadded;

use super::node::Node;
use super::shape::{Shape, ShapeNode};
use crate::locks::NodeLock;
use crate::set::{is_sentinel, Key, NEG_INF, POS_INF};

/// Search result: the last three nodes on the path to a leaf and the
/// directions taken from the two routers. `ppred` is null when `pred` is
/// the root.
pub(crate) struct Snapshot<'g, L> {
    pub(crate) ppred: Shared<'g, Node<L>>,
    pub(crate) pright: bool,
    pub(crate) pred: Shared<'g, Node<L>>,
    pub(crate) right: bool,
    pub(crate) curr: Shared<'g, Node<L>>,
}

impl<'g, L> Snapshot<'g, L> {
    // SAFETY (all three): nodes reached from the root under `guard` stay
    // allocated until the guard is dropped; `pred` and `curr` are never null.
    pub(crate) fn curr(&self) -> &'g Node<L> {
        unsafe { self.curr.deref() }
    }
    pub(crate) fn pred(&self) -> &'g Node<L> {
        unsafe { self.pred.deref() }
    }
    /// Only valid for snapshots ending at an application leaf, whose parent
    /// is never the root.
    pub(crate) fn ppred(&self) -> &'g Node<L> {
        debug_assert!(!self.ppred.is_null());
        unsafe { self.ppred.deref() }
    }
}

const STRIPES: usize = 64;

static NEXT_STRIPE: AtomicUsize = AtomicUsize::new(0);

thread_local! {
    static STRIPE: usize = NEXT_STRIPE.fetch_add(1, Ordering::Relaxed) % STRIPES;
}

/// Per-tree counter striped across cache lines so hot-path increments from
/// different threads rarely share a line.
pub(crate) struct StripedCounter {
    slots: Box<[CachePadded<AtomicU64>]>,
}

impl StripedCounter {
    fn new() -> Self {
        Self {
            slots: (0..STRIPES).map(|_| CachePadded::new(AtomicU64::new(0))).collect(),
        }
    }

    #[inline]
    pub(crate) fn incr(&self) {
        STRIPE.with(|&i| self.slots[i].fetch_add(1, Ordering::Relaxed));
    }

    pub(crate) fn sum(&self) -> u64 {
        self.slots.iter().map(|s| s.load(Ordering::Relaxed)).sum()
    }
}

pub(crate) struct RawTree<L> {
    root: Atomic<Node<L>>,
    /// One per abandoned attempt (a `continue` of an operation's loop).
    pub(crate) retries: StripedCounter,
    /// One per failed try-lock or failed versioned acquire.
    pub(crate) lock_failures: StripedCounter,
    #[cfg(feature = "retain-retired")]
    retired: Mutex<Vec<usize>>,
}

impl<L: NodeLock> RawTree<L> {
    /// The initial three nodes: a POS_INF router whose left child is the
    /// NEG_INF leaf and whose right child is the POS_INF leaf.
    pub(crate) fn new() -> Self {
        let root = Node::router(
            POS_INF,
            Atomic::new(Node::leaf(NEG_INF)),
            Atomic::new(Node::leaf(POS_INF)),
        );
        RawTree {
            root: Atomic::new(root),
            retries: StripedCounter::new(),
            lock_failures: StripedCounter::new(),
            #[cfg(feature = "retain-retired")]
            retired: Mutex::new(Vec::new()),
        }
    }

    #[inline]
    pub(crate) fn root<'g>(&self, guard: &'g Guard) -> Shared<'g, Node<L>> {
        self.root.load(Ordering::SeqCst, guard)
    }

    /// Descends to the leaf for `key`, going left iff `key < router.key`.
    pub(crate) fn find<'g>(&self, key: Key, guard: &'g Guard) -> Snapshot<'g, L> {
        let mut ppred = Shared::null();
        let mut pright = false;
        let mut pred = Shared::null();
        let mut right = false;
        let mut curr = self.root(guard);
        // SAFETY: see Snapshot; routers always have two non-null children
        let mut node = unsafe { curr.deref() };
        while !node.leaf {
            ppred = pred;
            pright = right;
            pred = curr;
            right = key >= node.key;
            curr = node.next(right, guard);
            node = unsafe { curr.deref() };
        }
        Snapshot {
            ppred,
            pright,
            pred,
            right,
            curr,
        }
    }

    pub(crate) fn search(&self, key: Key, guard: &Guard) -> bool {
        self.find(key, guard).curr().key == key
    }

    #[inline]
    pub(crate) fn retry(&self) {
        self.retries.incr();
    }

    #[inline]
    pub(crate) fn lock_failed(&self) {
        self.lock_failures.incr();
        self.retries.incr();
    }

    /// Hands an unlinked node to the reclamation scheme. The node must not
    /// be reachable from the root.
    ///
    /// # Safety
    /// `node` must have been unlinked by the caller and must not be retired
    /// twice.
    pub(crate) unsafe fn retire(&self, node: Shared<'_, Node<L>>, guard: &Guard) {
        #[cfg(feature = "retain-retired")]
        {
            let _ = guard;
            self.retired
                .lock()
                .unwrap_or_else(|e| e.into_inner())
                .push(node.as_raw() as usize);
        }
        #[cfg(not(feature = "retain-retired"))]
        guard.defer_destroy(node);
    }

    /// Frees an unlinked node immediately.
    ///
    /// # Safety
    /// The caller must have exclusive access to the tree, so no other
    /// reference to `node` can exist.
    pub(crate) unsafe fn free_now(&self, node: Shared<'_, Node<L>>) {
        drop(node.into_owned());
    }

    /// In-order application keys. Requires quiescence to be meaningful.
    pub(crate) fn leaf_keys(&self) -> Vec<Key> {
        let guard = &epoch::pin();
        let mut out = Vec::new();
        let mut stack = vec![self.root(guard)];
        while let Some(p) = stack.pop() {
            // SAFETY: reachable nodes are protected by the guard
            let Some(node) = (unsafe { p.as_ref() }) else {
                continue;
            };
            if node.leaf {
                if !is_sentinel(node.key) {
                    out.push(node.key);
                }
            } else {
                stack.push(node.next(true, guard));
                stack.push(node.next(false, guard));
            }
        }
        out
    }

    /// Copies the reachable structure into an index-based [`Shape`].
    pub(crate) fn shape(&self) -> Shape {
        let guard = &epoch::pin();
        let mut nodes = Vec::new();
        // (node, parent slot to patch, is right child)
        type Pending<'g, L> = (Shared<'g, Node<L>>, Option<(usize, bool)>);
        let mut stack: Vec<Pending<'_, L>> = vec![(self.root(guard), None)];
        while let Some((p, parent)) = stack.pop() {
            // SAFETY: reachable nodes are protected by the guard
            let Some(node) = (unsafe { p.as_ref() }) else {
                continue;
            };
            let idx = nodes.len();
            nodes.push(ShapeNode {
                key: node.key,
                leaf: node.leaf,
                left: None,
                right: None,
            });
            if let Some((pi, right)) = parent {
                if right {
                    nodes[pi].right = Some(idx);
                } else {
                    nodes[pi].left = Some(idx);
                }
            }
            stack.push((node.next(true, guard), Some((idx, true))));
            stack.push((node.next(false, guard), Some((idx, false))));
        }
        Shape::new(nodes)
    }
}

impl<L> Drop for RawTree<L> {
    fn drop(&mut self) {
        // SAFETY: `&mut self` means no operation is in flight; every node
        // reachable from the root is owned by the tree exactly once.
        unsafe {
            let guard = epoch::unprotected();
            let mut stack = vec![self.root.load(Ordering::Relaxed, guard)];
            while let Some(p) = stack.pop() {
                if p.is_null() {
                    continue;
                }
                let node = p.deref();
                stack.push(node.left.load(Ordering::Relaxed, guard).with_tag(0));
                stack.push(node.right.load(Ordering::Relaxed, guard).with_tag(0));
                drop(p.into_owned());
            }
            #[cfg(feature = "retain-retired")]
            for addr in self.retired.get_mut().unwrap_or_else(|e| e.into_inner()).drain(..) {
                drop(Owned::from_raw(addr as *mut Node<L>));
            }
        }
    }
}
