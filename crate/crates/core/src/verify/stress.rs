//! Multi-threaded stress runs that record histories and watch for stuck
//! threads.

use std::sync::atomic::{AtomicBool, AtomicI64, AtomicU64, Ordering};
use std::sync::{Arc, Barrier};
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant};

use crossbeam_utils::CachePadded;

use crate::bench::workload::{OpGenerator, WorkloadSpec};
use crate::bst::{new_tree, TreeHandle, Variant};
use crate::error::{ConfigError, StressError};
use crate::set::{Key, OpKind};
use crate::verify::history::{History, Operation};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StressLength {
    OpsPerThread(u64),
    Duration(Duration),
}

/// Which completed operations end up in the history.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Recording {
    All,
    /// Successful inserts and deletes only: enough for the balance check and
    /// a small fraction of the memory on long runs.
    Mutations,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Clock {
    /// Nanoseconds since run start.
    Monotonic,
    /// A shared counter bumped at every invocation and response. Gives
    /// reproducible single-threaded histories at the cost of one contended
    /// atomic per event.
    Logical,
}

#[derive(Clone, Copy, Debug)]
pub struct StressConfig {
    pub variant: Variant,
    pub threads: usize,
    pub length: StressLength,
    pub workload: WorkloadSpec,
    pub seed: u64,
    /// How long a thread may go without finishing an operation before it is
    /// reported as stuck.
    pub timeout: Duration,
    pub recording: Recording,
    pub clock: Clock,
}

impl StressConfig {
    pub fn new(variant: Variant, threads: usize, length: StressLength, workload: WorkloadSpec) -> Self {
        StressConfig {
            variant,
            threads,
            length,
            workload,
            seed: 0,
            timeout: Duration::from_secs(30),
            recording: Recording::All,
            clock: Clock::Monotonic,
        }
    }

    pub fn seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn timeout(mut self, timeout: Duration) -> Self {
        self.timeout = timeout;
        self
    }

    pub fn recording(mut self, recording: Recording) -> Self {
        self.recording = recording;
        self
    }

    pub fn clock(mut self, clock: Clock) -> Self {
        self.clock = clock;
        self
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.workload.validate()?;
        if self.threads == 0 {
            return Err(ConfigError::NoThreads);
        }
        if self.variant == Variant::Seq && self.threads > 1 {
            return Err(ConfigError::SeqThreads(self.threads));
        }
        if self.length == StressLength::Duration(Duration::ZERO) {
            return Err(ConfigError::Duration);
        }
        Ok(())
    }
}

#[derive(Clone)]
pub struct StressRun {
    pub history: History,
    /// The tree, quiescent once the run returns.
    pub tree: TreeHandle,
    /// Completed operations, recorded or not.
    pub ops_completed: u64,
}

impl std::fmt::Debug for StressRun {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("StressRun")
            .field("variant", &self.tree.variant())
            .field("events", &self.history.events().len())
            .field("ops_completed", &self.ops_completed)
            .finish()
    }
}

const IDLE: u64 = u64::MAX;

/// What a worker is doing, readable by the watchdog.
#[derive(Default)]
struct Progress {
    completed: AtomicU64,
    /// `IDLE`, or the index of the in-flight op kind.
    op: AtomicU64,
    key: AtomicI64,
}

impl Progress {
    fn begin(&self, op: OpKind, key: Key) {
        self.key.store(key, Ordering::Relaxed);
        self.op.store(op as u64, Ordering::Release);
    }

    fn end(&self) {
        self.op.store(IDLE, Ordering::Relaxed);
        self.completed.fetch_add(1, Ordering::Release);
    }

    fn in_flight(&self) -> Option<(OpKind, Key)> {
        let op = self.op.load(Ordering::Acquire);
        let kind = *OpKind::ALL.get(usize::try_from(op).ok()?)?;
        Some((kind, self.key.load(Ordering::Relaxed)))
    }
}

enum Timer {
    Monotonic(Instant),
    Logical(AtomicU64),
}

impl Timer {
    fn now(&self) -> u64 {
        match self {
            Timer::Monotonic(base) => base.elapsed().as_nanos() as u64,
            Timer::Logical(c) => c.fetch_add(1, Ordering::SeqCst),
        }
    }
}

struct Shared {
    tree: TreeHandle,
    stop: AtomicBool,
    start: Barrier,
    timer: Timer,
    progress: Vec<CachePadded<Progress>>,
}

/// Runs `config.threads` workers against a fresh tree and returns the
/// merged history. Stuck workers are detached and reported as a deadlock.
pub fn run_stress(config: &StressConfig) -> Result<StressRun, StressError> {
    run_stress_on(new_tree(config.variant), config)
}

/// [`run_stress`] against an existing (possibly prefilled) tree. The
/// history only covers this run.
pub fn run_stress_on(tree: TreeHandle, config: &StressConfig) -> Result<StressRun, StressError> {
    config.validate()?;
    let shared = Arc::new(Shared {
        tree,
        stop: AtomicBool::new(false),
        start: Barrier::new(config.threads + 1),
        timer: match config.clock {
            Clock::Monotonic => Timer::Monotonic(Instant::now()),
            Clock::Logical => Timer::Logical(AtomicU64::new(0)),
        },
        progress: (0..config.threads).map(|_| CachePadded::new(Progress { op: AtomicU64::new(IDLE), ..Default::default() })).collect(),
    });
    let handles: Vec<JoinHandle<Vec<Operation>>> = (0..config.threads)
        .map(|t| {
            let shared = Arc::clone(&shared);
            let cfg = *config;
            thread::Builder::new()
                .name(format!("stress-{t}"))
                .spawn(move || worker(&shared, &cfg, t))
                .expect("spawn stress worker")
        })
        .collect();

    shared.start.wait();
    let started = Instant::now();
    let deadline = match config.length {
        StressLength::Duration(d) => Some(started + d),
        StressLength::OpsPerThread(_) => None,
    };
    watch(&shared, &handles, deadline, config.timeout)?;

    let mut ops = Vec::new();
    for h in handles {
        ops.extend(h.join().expect("stress worker panicked"));
    }
    let ops_completed = shared.progress.iter().map(|p| p.completed.load(Ordering::Acquire)).sum();
    let history = History::from_operations(ops).expect("workers record well-formed histories");
    Ok(StressRun {
        history,
        tree: Arc::clone(&shared.tree),
        ops_completed,
    })
}

fn worker(shared: &Shared, cfg: &StressConfig, t: usize) -> Vec<Operation> {
    let mut gen = OpGenerator::new(&cfg.workload, cfg.seed, t as u64);
    let limit = match cfg.length {
        StressLength::OpsPerThread(n) => n,
        StressLength::Duration(_) => u64::MAX,
    };
    let mut log = Vec::with_capacity(match (cfg.length, cfg.recording) {
        (StressLength::OpsPerThread(n), Recording::All) => n.min(1 << 20) as usize,
        _ => 1 << 16,
    });
    let progress = &shared.progress[t];
    shared.start.wait();
    let mut seq = 0;
    while seq < limit && !shared.stop.load(Ordering::Relaxed) {
        let (op, key) = gen.next_op();
        progress.begin(op, key);
        let invoke = shared.timer.now();
        let result = shared.tree.apply(op, key).expect("generated keys are never sentinels");
        let respond = shared.timer.now();
        progress.end();
        if cfg.recording == Recording::All || (result && op != OpKind::Search) {
            log.push(Operation::complete(t, seq, op, key, result, invoke, respond));
        }
        seq += 1;
    }
    log
}

const POLL: Duration = Duration::from_millis(5);

/// Stops workers at the deadline and flags any that stops making progress
/// for longer than `timeout`.
fn watch(shared: &Shared, handles: &[JoinHandle<Vec<Operation>>], deadline: Option<Instant>, timeout: Duration) -> Result<(), StressError> {
    let n = handles.len();
    let mut last_seen: Vec<(u64, Instant)> = vec![(0, Instant::now()); n];
    loop {
        let now = Instant::now();
        if deadline.is_some_and(|d| now >= d) {
            shared.stop.store(true, Ordering::Relaxed);
        }
        let mut running = 0;
        for (t, h) in handles.iter().enumerate() {
            if h.is_finished() {
                continue;
            }
            running += 1;
            let p = &shared.progress[t];
            let done = p.completed.load(Ordering::Acquire);
            if done != last_seen[t].0 {
                last_seen[t] = (done, now);
                continue;
            }
            // the clock only starts once the run is supposed to be over or
            // some other worker is already done
            let wind_down = deadline.is_some_and(|d| now >= d) || handles.iter().any(|h| h.is_finished());
            let since = now.duration_since(last_seen[t].1);
            if since > timeout && (wind_down || since > timeout * 2) {
                shared.stop.store(true, Ordering::Relaxed);
                let timeout_ms = timeout.as_millis() as u64;
                return Err(match p.in_flight() {
                    Some((op, key)) => StressError::Deadlock {
                        thread: t,
                        op,
                        key,
                        timeout_ms,
                    },
                    None => StressError::Stalled { thread: t, timeout_ms },
                });
            }
        }
        if running == 0 {
            return Ok(());
        }
        let sleep = deadline.map_or(POLL, |d| d.saturating_duration_since(now).clamp(Duration::from_micros(100), POLL));
        thread::sleep(sleep);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::verify::{check_balance, check_linearizable, check_structure};

    fn small(variant: Variant, threads: usize, ops: u64) -> StressConfig {
        StressConfig::new(variant, threads, StressLength::OpsPerThread(ops), WorkloadSpec::mid_contention(16))
    }

    #[test]
    fn single_thread_runs_are_reproducible() {
        let cfg = small(Variant::FlagEdgeMark, 1, 100).seed(42).clock(Clock::Logical);
        let a = run_stress(&cfg).unwrap();
        let b = run_stress(&cfg).unwrap();
        assert_eq!(a.history, b.history);
        assert_eq!(a.history.op_count(), 100);
        assert_eq!(a.ops_completed, 100);
    }

    #[test]
    fn monotonic_single_thread_same_ops() {
        let cfg = small(Variant::TicketNode, 1, 100).seed(7);
        let strip = |r: StressRun| {
            r.history
                .operations()
                .unwrap()
                .into_iter()
                .map(|o| (o.op, o.key, o.result))
                .collect::<Vec<_>>()
        };
        assert_eq!(strip(run_stress(&cfg).unwrap()), strip(run_stress(&cfg).unwrap()));
    }

    #[test]
    fn seq_rejects_threads() {
        assert_eq!(
            run_stress(&small(Variant::Seq, 2, 1)).unwrap_err(),
            StressError::Config(ConfigError::SeqThreads(2))
        );
    }

    #[test]
    fn short_concurrent_runs_check_out() {
        for v in Variant::CONCURRENT {
            let cfg = small(v, 4, 2000).seed(3).recording(Recording::Mutations);
            let run = run_stress(&cfg).unwrap();
            assert_eq!(run.ops_completed, 8000);
            assert!(check_structure(run.tree.as_ref()).is_ok(), "{v}");
            assert!(check_balance(&run.history, &run.tree.collect_leaf_keys()).unwrap(), "{v}");
        }
    }

    #[test]
    fn timed_run_stops() {
        let cfg = StressConfig::new(
            Variant::FlagEdgeMark,
            3,
            StressLength::Duration(Duration::from_millis(100)),
            WorkloadSpec::mid_contention(64),
        )
        .recording(Recording::Mutations);
        let t = Instant::now();
        let run = run_stress(&cfg).unwrap();
        assert!(t.elapsed() < Duration::from_secs(5));
        assert!(run.ops_completed > 0);
    }

    #[test]
    fn tiny_histories_linearize() {
        for seed in 0..50 {
            let run = run_stress(&small(Variant::FlagEdgeMark, 3, 5).seed(seed)).unwrap();
            assert!(check_linearizable(&run.history).unwrap(), "seed {seed}");
        }
    }

    /// A set whose insert never returns once a key is taken.
    struct Hangs(TreeHandle);

    impl crate::bst::ConcurrentSet for Hangs {
        fn variant(&self) -> Variant {
            self.0.variant()
        }
        fn search(&self, key: Key) -> Result<bool, crate::KeyError> {
            self.0.search(key)
        }
        fn insert(&self, key: Key) -> Result<bool, crate::KeyError> {
            if key == 1 {
                loop {
                    thread::park();
                }
            }
            self.0.insert(key)
        }
        fn delete(&self, key: Key) -> Result<bool, crate::KeyError> {
            self.0.delete(key)
        }
        fn retry_count(&self) -> u64 {
            0
        }
        fn lock_failure_count(&self) -> u64 {
            0
        }
        fn collect_leaf_keys(&self) -> Vec<Key> {
            self.0.collect_leaf_keys()
        }
        fn shape(&self) -> crate::bst::Shape {
            self.0.shape()
        }
    }

    #[test]
    fn stuck_thread_is_named() {
        let tree: TreeHandle = Arc::new(Hangs(new_tree(Variant::Coarse)));
        let cfg = StressConfig::new(
            Variant::Coarse,
            2,
            StressLength::Duration(Duration::from_millis(50)),
            WorkloadSpec::new(100, 0, 0, 2),
        )
        .timeout(Duration::from_millis(200));
        match run_stress_on(tree, &cfg).unwrap_err() {
            StressError::Deadlock { op, key, .. } => assert_eq!((op, key), (OpKind::Insert, 1)),
            e => panic!("unexpected {e}"),
        }
    }
}
