//! Verification harness: quiescent structural checks, history recording,
//! a linearizability checker and deadlock-watching stress runs.

pub mod balance;
pub mod history;
pub mod linearizability;
pub mod stress;
pub mod structure;

pub use balance::{balance_findings, check_balance};
pub use history::{Event, EventKind, History, Operation};
pub use linearizability::{check_linearizable, check_linearizable_bounded, check_operations, DEFAULT_OP_BOUND, MAX_OP_BOUND};
pub use stress::{run_stress, run_stress_on, Clock, Recording, StressConfig, StressLength, StressRun};
pub use structure::{check_shape, check_structure, InvariantReport};

/// Structural check of the run's tree plus the balance check of its
/// history against the tree's keys.
pub fn check_run(run: &StressRun) -> InvariantReport {
    let mut report = check_structure(run.tree.as_ref());
    match run.history.operations() {
        Ok(ops) => report.record_balance(balance_findings(&ops, &run.tree.collect_leaf_keys())),
        Err(e) => report.record_balance(vec![e.to_string()]),
    }
    report
}
