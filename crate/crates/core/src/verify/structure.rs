use std::fmt;

use serde::{Deserialize, Serialize};

use crate::bst::{ConcurrentSet, Shape};
use crate::set::{Key, NEG_INF, POS_INF};

/// Outcome of a quiescent structural check. Every flag is true exactly when
/// `violations` has no finding of that category.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct InvariantReport {
    pub order_ok: bool,
    pub shape_ok: bool,
    pub sentinels_ok: bool,
    pub balance_ok: bool,
    pub violations: Vec<String>,
}

impl Default for InvariantReport {
    fn default() -> Self {
        InvariantReport {
            order_ok: true,
            shape_ok: true,
            sentinels_ok: true,
            balance_ok: true,
            violations: Vec::new(),
        }
    }
}

impl InvariantReport {
    pub fn is_ok(&self) -> bool {
        self.order_ok && self.shape_ok && self.sentinels_ok && self.balance_ok
    }

    fn order(&mut self, msg: String) {
        self.order_ok = false;
        self.violations.push(format!("order: {msg}"));
    }

    fn shape(&mut self, msg: String) {
        self.shape_ok = false;
        self.violations.push(format!("shape: {msg}"));
    }

    fn sentinel(&mut self, msg: String) {
        self.sentinels_ok = false;
        self.violations.push(format!("sentinel: {msg}"));
    }

    /// Folds in the result of a history balance check.
    pub fn record_balance(&mut self, findings: Vec<String>) {
        if !findings.is_empty() {
            self.balance_ok = false;
            self.violations.extend(findings.into_iter().map(|f| format!("balance: {f}")));
        }
    }
}

impl fmt::Display for InvariantReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "order={} shape={} sentinels={} balance={}",
            self.order_ok, self.shape_ok, self.sentinels_ok, self.balance_ok
        )?;
        for v in &self.violations {
            write!(f, "\n  {v}")?;
        }
        Ok(())
    }
}

pub fn check_structure(tree: &dyn ConcurrentSet) -> InvariantReport {
    check_shape(&tree.shape())
}

fn key_str(k: Key) -> String {
    match k {
        NEG_INF => "-inf".into(),
        POS_INF => "+inf".into(),
        k => k.to_string(),
    }
}

/// Checks a quiescent tree copy:
/// * order: every node of a left subtree has key `< router.key`, every node
///   of a right subtree has key `>= router.key`, leaves strictly increase;
/// * shape: routers have two children, leaves none, no node is shared;
/// * sentinels: a `+inf` router root with the `+inf` leaf on its right and
///   the `-inf` leaf as the leftmost leaf.
pub fn check_shape(shape: &Shape) -> InvariantReport {
    let mut report = InvariantReport::default();
    let Some(root) = shape.root() else {
        report.sentinel("tree has no root".into());
        return report;
    };
    let nodes = shape.nodes();
    // parent link of each visited node, for path reporting
    let mut parent: Vec<Option<(usize, bool)>> = vec![None; nodes.len()];
    let mut visited = vec![false; nodes.len()];
    let path = |parent: &[Option<(usize, bool)>], mut i: usize| {
        let mut steps = Vec::new();
        while let Some((p, right)) = parent[i] {
            steps.push(if right { 'R' } else { 'L' });
            i = p;
        }
        steps.reverse();
        if steps.is_empty() {
            "root".to_string()
        } else {
            format!("root.{}", steps.into_iter().map(String::from).collect::<Vec<_>>().join("."))
        }
    };

    let r = &nodes[root];
    if r.key != POS_INF || r.leaf {
        report.sentinel(format!("root is {} {}, expected the +inf router", if r.leaf { "leaf" } else { "router" }, key_str(r.key)));
    }
    match r.right.map(|i| &nodes[i]) {
        Some(n) if n.leaf && n.key == POS_INF => {}
        _ => report.sentinel("root's right child is not the +inf leaf".into()),
    }

    // (node, lower bound inclusive, upper bound exclusive)
    let mut stack: Vec<(usize, Key, Option<Key>)> = vec![(root, Key::MIN, None)];
    let mut leaves: Vec<(usize, Key)> = Vec::new();
    while let Some((i, lo, hi)) = stack.pop() {
        if i >= nodes.len() {
            report.shape(format!("dangling child index {i}"));
            continue;
        }
        if std::mem::replace(&mut visited[i], true) {
            report.shape(format!("node {} reachable twice (cycle or shared subtree)", key_str(nodes[i].key)));
            continue;
        }
        let n = &nodes[i];
        let at = path(&parent, i);
        if n.key < lo || hi.is_some_and(|h| n.key >= h) {
            let hi_s = hi.map_or("+inf]".to_string(), |h| format!("{})", key_str(h)));
            report.order(format!("{} at {at} outside [{}, {hi_s}", key_str(n.key), key_str(lo)));
        }
        match (n.leaf, n.left, n.right) {
            (true, None, None) => leaves.push((i, n.key)),
            (true, _, _) => report.shape(format!("leaf {} at {at} has children", key_str(n.key))),
            (false, Some(l), Some(rt)) => {
                for (c, right) in [(rt, true), (l, false)] {
                    if c < nodes.len() && !visited[c] {
                        parent[c] = Some((i, right));
                    }
                }
                stack.push((rt, n.key, hi));
                stack.push((l, lo, Some(n.key)));
            }
            (false, l, rt) => {
                report.shape(format!(
                    "router {} at {at} has {} child(ren)",
                    key_str(n.key),
                    usize::from(l.is_some()) + usize::from(rt.is_some())
                ));
                // keep checking whatever hangs below it
                if let Some(c) = l {
                    stack.push((c, lo, Some(n.key)));
                }
                if let Some(c) = rt {
                    stack.push((c, n.key, hi));
                }
            }
        }
    }

    // stack order visits left before right, so `leaves` is in-order
    for w in leaves.windows(2) {
        if w[0].1 >= w[1].1 {
            report.order(format!(
                "leaves not strictly increasing: {} then {} at {}",
                key_str(w[0].1),
                key_str(w[1].1),
                path(&parent, w[1].0)
            ));
        }
    }
    match leaves.first() {
        Some(&(_, NEG_INF)) => {}
        _ => report.sentinel("leftmost leaf is not -inf".into()),
    }
    if leaves.iter().filter(|l| l.1 == NEG_INF).count() > 1 || leaves.iter().filter(|l| l.1 == POS_INF).count() > 1 {
        report.sentinel("duplicate sentinel leaf".into());
    }
    report
}
