use crossbeam_epoch::{Atomic, Guard, Owned, Shared};
use std::sync::atomic::Ordering::SeqCst;

use crate::set::Key;

/// External-tree node. Leaves carry dictionary keys; internal nodes are
/// routers with exactly two children. `key` and `leaf` never change after
/// construction.
pub(crate) struct Node<L> {
    pub(crate) key: Key,
    pub(crate) leaf: bool,
    pub(crate) left: Atomic<Node<L>>,
    pub(crate) right: Atomic<Node<L>>,
    pub(crate) lock: L,
}

impl<L: Default> Node<L> {
    pub(crate) fn leaf(key: Key) -> Self {
        Node {
            key,
            leaf: true,
            left: Atomic::null(),
            right: Atomic::null(),
            lock: L::default(),
        }
    }

    pub(crate) fn router(key: Key, left: Atomic<Node<L>>, right: Atomic<Node<L>>) -> Self {
        Node {
            key,
            leaf: false,
            left,
            right,
            lock: L::default(),
        }
    }
}

impl<L> Node<L> {
    #[inline]
    pub(crate) fn child(&self, right: bool) -> &Atomic<Node<L>> {
        if right {
            &self.right
        } else {
            &self.left
        }
    }

    /// Loads a child link with any edge tag stripped.
    #[inline]
    pub(crate) fn next<'g>(&self, right: bool, guard: &'g Guard) -> Shared<'g, Node<L>> {
        self.child(right).load(SeqCst, guard).with_tag(0)
    }
}

/// Builds the router that replaces leaf `curr` when `key` is inserted next
/// to it: the smaller key goes left and the router carries the larger one.
/// A NEG_INF leaf is always smaller, so it stays on the left.
pub(crate) fn splice_router<'g, L: Default>(key: Key, curr: Shared<'g, Node<L>>, curr_key: Key) -> Owned<Node<L>> {
    let leaf = Atomic::new(Node::leaf(key));
    let existing = Atomic::from(curr);
    if key < curr_key {
        Owned::new(Node::router(curr_key, leaf, existing))
    } else {
        Owned::new(Node::router(key, existing, leaf))
    }
}
