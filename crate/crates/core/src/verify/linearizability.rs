//! Wing–Gong style linearizability search against [`SeqOracle`].
//!
//! The search repeatedly picks an operation none of whose real-time
//! predecessors is still unplaced, replays it on the oracle and recurses.
//! Failed `(placed set, oracle contents)` pairs are memoized, which turns the
//! factorial search into something closer to `2^n` times the number of
//! distinct set states. Operations that never returned may be placed with
//! any result, or left out.

use std::collections::HashSet;

use crate::error::HistoryError;
use crate::set::{Key, SeqOracle};
use crate::verify::history::{History, Operation};

pub const DEFAULT_OP_BOUND: usize = 20;

/// Hard ceiling from the 64-bit placement mask.
pub const MAX_OP_BOUND: usize = 64;

pub fn check_linearizable(history: &History) -> Result<bool, HistoryError> {
    check_linearizable_bounded(history, DEFAULT_OP_BOUND)
}

pub fn check_linearizable_bounded(history: &History, bound: usize) -> Result<bool, HistoryError> {
    let ops = history.operations()?;
    check_operations(&ops, bound)
}

/// Same as [`check_linearizable_bounded`] on already-paired operations.
pub fn check_operations(ops: &[Operation], bound: usize) -> Result<bool, HistoryError> {
    let bound = bound.min(MAX_OP_BOUND);
    if ops.len() > bound {
        return Err(HistoryError::TooLarge { ops: ops.len(), bound });
    }
    let n = ops.len();
    // predecessors[i]: operations that returned before i was invoked
    let predecessors: Vec<u64> = (0..n)
        .map(|i| {
            (0..n)
                .filter(|&j| j != i && ops[j].precedes(&ops[i]))
                .fold(0u64, |m, j| m | 1 << j)
        })
        .collect();
    let required: u64 = (0..n).filter(|&i| ops[i].respond.is_some()).fold(0, |m, i| m | 1 << i);

    let mut search = Search {
        ops,
        predecessors,
        required,
        failed: HashSet::new(),
    };
    Ok(search.run(0, &mut SeqOracle::new()))
}

struct Search<'a> {
    ops: &'a [Operation],
    predecessors: Vec<u64>,
    required: u64,
    failed: HashSet<(u64, Vec<Key>)>,
}

impl Search<'_> {
    fn run(&mut self, placed: u64, state: &mut SeqOracle) -> bool {
        if placed & self.required == self.required {
            return true;
        }
        let memo = (placed, state.to_vec());
        if self.failed.contains(&memo) {
            return false;
        }
        for i in 0..self.ops.len() {
            let bit = 1u64 << i;
            if placed & bit != 0 || self.predecessors[i] & !placed != 0 {
                continue;
            }
            let o = self.ops[i];
            let mut next = state.clone();
            let Ok(got) = next.apply(o.op, o.key) else {
                // sentinel keys can never be linearized
                continue;
            };
            if o.result.is_some_and(|want| want != got) {
                continue;
            }
            if self.run(placed | bit, &mut next) {
                return true;
            }
        }
        self.failed.insert(memo);
        false
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::set::OpKind::*;

    fn op(thread: usize, seq: u64, kind: crate::set::OpKind, key: Key, r: bool, inv: u64, resp: u64) -> Operation {
        Operation::complete(thread, seq, kind, key, r, inv, resp)
    }

    fn check(ops: Vec<Operation>) -> bool {
        check_linearizable(&History::from_operations(ops).unwrap()).unwrap()
    }

    #[test]
    fn empty_history() {
        assert!(check(vec![]));
    }

    #[test]
    fn single_thread_program_order() {
        assert!(check(vec![
            op(0, 0, Insert, 5, true, 0, 1),
            op(0, 1, Search, 5, true, 2, 3),
            op(0, 2, Insert, 5, false, 4, 5),
            op(0, 3, Delete, 5, true, 6, 7),
            op(0, 4, Delete, 5, false, 8, 9),
        ]));
        assert!(!check(vec![op(0, 0, Insert, 5, true, 0, 1), op(0, 1, Search, 5, false, 2, 3)]));
    }

    #[test]
    fn real_time_order_forces_presence() {
        assert!(!check(vec![op(0, 0, Insert, 5, true, 0, 10), op(1, 0, Search, 5, false, 11, 12)]));
    }

    #[test]
    fn overlap_allows_search_first() {
        assert!(check(vec![op(0, 0, Insert, 5, true, 0, 10), op(1, 0, Search, 5, false, 5, 12)]));
    }

    #[test]
    fn equal_timestamps_count_as_overlap() {
        assert!(check(vec![op(0, 0, Insert, 5, true, 0, 10), op(1, 0, Search, 5, false, 10, 12)]));
    }

    #[test]
    fn double_successful_insert_rejected() {
        assert!(!check(vec![op(0, 0, Insert, 1, true, 0, 10), op(1, 0, Insert, 1, true, 0, 10)]));
    }

    #[test]
    fn pending_operation_may_take_effect() {
        let h: History = "0 0 INVOKE INSERT 1 0\n1 0 INVOKE SEARCH 1 5\n1 0 RESPOND SEARCH 1 true 6\n"
            .parse()
            .unwrap();
        assert!(check_linearizable(&h).unwrap());
        let h: History = "0 0 INVOKE DELETE 1 0\n1 0 INVOKE SEARCH 1 5\n1 0 RESPOND SEARCH 1 true 6\n"
            .parse()
            .unwrap();
        assert!(!check_linearizable(&h).unwrap());
    }

    #[test]
    fn oversized_history_refused() {
        let ops: Vec<_> = (0..21).map(|i| op(0, i, Search, 1, false, 2 * i, 2 * i + 1)).collect();
        let h = History::from_operations(ops).unwrap();
        assert_eq!(
            check_linearizable(&h),
            Err(HistoryError::TooLarge { ops: 21, bound: 20 })
        );
        assert_eq!(check_linearizable_bounded(&h, 30), Ok(true));
    }

    #[test]
    fn wide_overlap_stays_tractable() {
        // 20 fully concurrent ops over 2 keys
        let ops: Vec<_> = (0..20)
            .map(|i| {
                let kind = [Insert, Delete, Search][i % 3];
                op(i, 0, kind, (i % 2) as Key, i % 4 == 0, 0, 100)
            })
            .collect();
        let h = History::from_operations(ops).unwrap();
        check_linearizable(&h).unwrap();
    }
}
