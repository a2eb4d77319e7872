use serde::{Deserialize, Serialize};

use crate::set::Key;

/// Plain copy of one node of a quiescent tree.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShapeNode {
    pub key: Key,
    pub leaf: bool,
    pub left: Option<usize>,
    pub right: Option<usize>,
}

/// Index-based copy of a tree's reachable structure. Index 0 is the root.
///
/// Built iteratively so degenerate (list-shaped) trees do not recurse.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Shape {
    nodes: Vec<ShapeNode>,
}

impl Shape {
    pub fn new(nodes: Vec<ShapeNode>) -> Self {
        Shape { nodes }
    }

    pub fn root(&self) -> Option<usize> {
        (!self.nodes.is_empty()).then_some(0)
    }

    pub fn nodes(&self) -> &[ShapeNode] {
        &self.nodes
    }

    pub fn node(&self, idx: usize) -> &ShapeNode {
        &self.nodes[idx]
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Longest root-to-leaf path, counted in edges.
    pub fn height(&self) -> usize {
        let Some(root) = self.root() else { return 0 };
        let mut best = 0;
        let mut stack = vec![(root, 0usize)];
        let mut seen = vec![false; self.nodes.len()];
        while let Some((i, d)) = stack.pop() {
            if std::mem::replace(&mut seen[i], true) {
                continue;
            }
            best = best.max(d);
            let n = &self.nodes[i];
            stack.extend(n.left.into_iter().chain(n.right).filter(|&c| c < self.nodes.len()).map(|c| (c, d + 1)));
        }
        best
    }

    /// Keys of all leaves, left to right, sentinels included.
    pub fn leaf_keys(&self) -> Vec<Key> {
        let mut out = Vec::new();
        let Some(root) = self.root() else { return out };
        let mut seen = vec![false; self.nodes.len()];
        let mut stack = vec![root];
        while let Some(i) = stack.pop() {
            if i >= self.nodes.len() || std::mem::replace(&mut seen[i], true) {
                continue;
            }
            let n = &self.nodes[i];
            if n.left.is_none() && n.right.is_none() {
                out.push(n.key);
            }
            stack.extend(n.right);
            stack.extend(n.left);
        }
        out
    }
}
