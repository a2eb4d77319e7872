//! Throughput measurement: prefill to half the key range, warm up, then
//! count operations completed by every worker until a deadline.

pub mod pin;
pub mod record;
pub mod workload;

use std::sync::atomic::{AtomicU8, Ordering};
use std::sync::{Arc, Barrier};
use std::thread;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::bst::{new_tree, ConcurrentSet, TreeHandle, Variant};
use crate::error::ConfigError;
pub use record::{read_csv, read_json, read_records, write_csv, write_json, write_records, BenchRecord, Format, CSV_HEADER};
pub use workload::{Mix, OpGenerator, WorkloadSpec, PREFILL_STREAM};

/// Counter reported in a record's `retries` column.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ContentionCounter {
    /// Restarts of an operation's retry loop.
    #[default]
    Retries,
    /// Failed try-lock attempts only.
    LockFailures,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BenchConfig {
    pub variant: Variant,
    pub threads: usize,
    pub duration_ms: u64,
    pub workload: WorkloadSpec,
    pub seed: u64,
    pub warmup_ms: u64,
    /// Round-robin the workers over the available CPUs.
    pub pin: bool,
    pub counter: ContentionCounter,
}

impl BenchConfig {
    pub const DEFAULT_WARMUP_MS: u64 = 500;

    pub fn new(variant: Variant, threads: usize, duration_ms: u64, workload: WorkloadSpec) -> Self {
        BenchConfig {
            variant,
            threads,
            duration_ms,
            workload,
            seed: 0,
            warmup_ms: Self::DEFAULT_WARMUP_MS,
            pin: false,
            counter: ContentionCounter::Retries,
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.workload.validate()?;
        if self.threads == 0 {
            return Err(ConfigError::NoThreads);
        }
        if self.variant == Variant::Seq && self.threads > 1 {
            return Err(ConfigError::SeqThreads(self.threads));
        }
        if self.duration_ms == 0 {
            return Err(ConfigError::Duration);
        }
        Ok(())
    }
}

/// Inserts uniform keys from `[0, key_range)` until the tree holds
/// `key_range / 2` of them. Returns the number of insert attempts.
pub fn prefill(tree: &dyn ConcurrentSet, workload: &WorkloadSpec, seed: u64) -> u64 {
    let mut gen = OpGenerator::new(workload, seed, PREFILL_STREAM);
    let target = workload.key_range / 2;
    let (mut size, mut attempts) = (0, 0);
    while size < target {
        attempts += 1;
        if tree.insert(gen.next_key()).expect("generated keys are never sentinels") {
            size += 1;
        }
    }
    attempts
}

const WARMUP: u8 = 0;
const MEASURE: u8 = 1;
const STOP: u8 = 2;

/// One measured run. `repeat` is echoed into the record.
pub fn run_bench(config: &BenchConfig, repeat: u32) -> Result<BenchRecord, ConfigError> {
    run_bench_keep(config, repeat).map(|(rec, _)| rec)
}

/// [`run_bench`], also handing back the quiescent tree for inspection.
pub fn run_bench_keep(config: &BenchConfig, repeat: u32) -> Result<(BenchRecord, TreeHandle), ConfigError> {
    config.validate()?;
    let tree = new_tree(config.variant);
    prefill(tree.as_ref(), &config.workload, config.seed);

    let phase = Arc::new(AtomicU8::new(if config.warmup_ms == 0 { MEASURE } else { WARMUP }));
    let barrier = Arc::new(Barrier::new(config.threads + 1));
    let cpus = if config.pin { pin::cpus() } else { Vec::new() };
    let workers: Vec<_> = (0..config.threads)
        .map(|t| {
            let tree = Arc::clone(&tree);
            let phase = Arc::clone(&phase);
            let barrier = Arc::clone(&barrier);
            let cpu = (!cpus.is_empty()).then(|| cpus[t % cpus.len()]);
            let cfg = *config;
            thread::Builder::new()
                .name(format!("bench-{t}"))
                .spawn(move || {
                    if let Some(cpu) = cpu {
                        pin::pin_current(cpu);
                    }
                    let mut gen = OpGenerator::new(&cfg.workload, cfg.seed, t as u64);
                    barrier.wait();
                    let mut counted = 0u64;
                    loop {
                        let p = phase.load(Ordering::Relaxed);
                        if p == STOP {
                            break;
                        }
                        let (op, key) = gen.next_op();
                        tree.apply(op, key).expect("generated keys are never sentinels");
                        counted += u64::from(p == MEASURE);
                    }
                    counted
                })
                .expect("spawn bench worker")
        })
        .collect();

    let counter = |t: &dyn ConcurrentSet| match config.counter {
        ContentionCounter::Retries => t.retry_count(),
        ContentionCounter::LockFailures => t.lock_failure_count(),
    };
    barrier.wait();
    if config.warmup_ms > 0 {
        thread::sleep(Duration::from_millis(config.warmup_ms));
        phase.store(MEASURE, Ordering::Relaxed);
    }
    let before = counter(tree.as_ref());
    let started = Instant::now();
    thread::sleep(Duration::from_millis(config.duration_ms));
    phase.store(STOP, Ordering::Relaxed);
    let wall = started.elapsed();
    let ops: u64 = workers.into_iter().map(|w| w.join().expect("bench worker panicked")).sum();
    let retries = counter(tree.as_ref()) - before;
    Ok((BenchRecord::new(config, repeat, ops, retries, wall), tree))
}

/// Every `(variant, threads)` pair run `repeats` times, variant-major.
pub fn sweep(base: &BenchConfig, threads: &[usize], variants: &[Variant], repeats: u32) -> Result<Vec<BenchRecord>, ConfigError> {
    sweep_with(base, threads, variants, repeats, |_| {})
}

/// [`sweep`] with a callback after each record, for progress output.
pub fn sweep_with(
    base: &BenchConfig,
    threads: &[usize],
    variants: &[Variant],
    repeats: u32,
    mut on_record: impl FnMut(&BenchRecord),
) -> Result<Vec<BenchRecord>, ConfigError> {
    if threads.is_empty() {
        return Err(ConfigError::EmptyList("thread"));
    }
    if variants.is_empty() {
        return Err(ConfigError::EmptyList("variant"));
    }
    if repeats == 0 {
        return Err(ConfigError::Invalid("repeats must be positive".into()));
    }
    let configs: Vec<BenchConfig> = variants
        .iter()
        .flat_map(|&variant| threads.iter().map(move |&t| BenchConfig { variant, threads: t, ..*base }))
        .collect();
    // refuse the whole grid before running any of it
    for c in &configs {
        c.validate()?;
    }
    let mut out = Vec::with_capacity(configs.len() * repeats as usize);
    for c in &configs {
        for r in 0..repeats {
            let rec = run_bench(c, r)?;
            on_record(&rec);
            out.push(rec);
        }
    }
    Ok(out)
}
