//! Quiescent consistency between a history's successful mutations and the
//! keys left in the tree.
//!
//! Per key, the successful inserts and deletes must admit an order that
//! alternates insert, delete, insert, ... from an empty start and respects
//! real-time precedence, and the key is present at the end iff that order
//! ends on an insert. Responses are not in linearization order when
//! operations overlap, so the alternation is checked by scheduling rather
//! than by sorting timestamps. Searches and failed mutations are ignored.

use std::collections::{BTreeMap, BTreeSet};

use crate::error::HistoryError;
use crate::set::{Key, OpKind};
use crate::verify::history::{History, Operation};

pub fn check_balance(history: &History, final_keys: &[Key]) -> Result<bool, HistoryError> {
    Ok(balance_findings(&history.operations()?, final_keys).is_empty())
}

/// Every per-key inconsistency, as human-readable findings.
pub fn balance_findings(ops: &[Operation], final_keys: &[Key]) -> Vec<String> {
    let mut per_key: BTreeMap<Key, Vec<&Operation>> = BTreeMap::new();
    let mut findings = Vec::new();
    for o in ops {
        if o.respond.is_none() {
            findings.push(format!("{}({}) on thread {} never returned", o.op, o.key, o.thread));
            continue;
        }
        if o.op != OpKind::Search && o.result == Some(true) {
            per_key.entry(o.key).or_default().push(o);
        }
    }
    let present: BTreeSet<Key> = final_keys.iter().copied().collect();
    for &k in &present {
        if !per_key.contains_key(&k) {
            findings.push(format!("key {k} present but never inserted"));
        }
    }
    for (key, ops) in &per_key {
        let inserts = ops.iter().filter(|o| o.op == OpKind::Insert).count();
        let deletes = ops.len() - inserts;
        let net = inserts as i64 - deletes as i64;
        let expected = i64::from(present.contains(key));
        if net != expected {
            findings.push(format!(
                "key {key}: {inserts} successful inserts, {deletes} successful deletes, but key is {}",
                if expected == 1 { "present" } else { "absent" }
            ));
        } else if !alternates(ops) {
            findings.push(format!("key {key}: successful inserts and deletes cannot alternate in real-time order"));
        }
    }
    findings
}

/// Greedy earliest-response scheduling of one key's successful mutations.
///
/// An unplaced operation is eligible once every operation that returned
/// before it was invoked is placed. Among eligible operations of the kind
/// the alternation needs next, taking the one that responds first never
/// rules out a schedule that another choice would have allowed.
fn alternates(ops: &[&Operation]) -> bool {
    let resp = |o: &Operation| o.respond.unwrap_or(u64::MAX);
    // unplaced operations ordered by response, split by kind
    let mut inserts: BTreeSet<(u64, usize)> = BTreeSet::new();
    let mut deletes: BTreeSet<(u64, usize)> = BTreeSet::new();
    for (i, o) in ops.iter().enumerate() {
        match o.op {
            OpKind::Insert => inserts.insert((resp(o), i)),
            _ => deletes.insert((resp(o), i)),
        };
    }
    let mut want_insert = true;
    while !inserts.is_empty() || !deletes.is_empty() {
        let earliest = inserts
            .first()
            .into_iter()
            .chain(deletes.first())
            .map(|&(r, _)| r)
            .min()
            .expect("non-empty");
        let pool = if want_insert { &mut inserts } else { &mut deletes };
        let Some(&pick) = pool.iter().find(|&&(_, i)| ops[i].invoke <= earliest) else {
            return false;
        };
        pool.remove(&pick);
        want_insert = !want_insert;
    }
    true
}
