use std::io::Write;
use std::path::PathBuf;
use std::time::{Duration, Instant};

use clap::{Args, ValueEnum};

use cbst::bench::Mix;
use cbst::verify::{
    check_linearizable_bounded, check_run, run_stress, Clock, History, Recording, StressConfig, StressLength, DEFAULT_OP_BOUND,
};
use cbst::{HistoryError, Variant};

use crate::{failed, open_out, usage, CliError, CliResult};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    /// Stress run, then structural and balance checks.
    Invariants,
    /// Many small randomized histories through the linearizability checker.
    Linearizability,
    /// Re-check a stored history file.
    Replay,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ClockArg {
    Monotonic,
    Logical,
}

#[derive(Args, Debug)]
pub struct CheckArgs {
    #[arg(long, value_enum)]
    mode: Mode,
    #[arg(long, default_value = "fem")]
    variant: Variant,
    /// Worker threads [default: 8 for invariants, 3 for linearizability].
    #[arg(long)]
    threads: Option<usize>,
    /// Stress duration for invariants mode.
    #[arg(long, default_value_t = 5000)]
    duration_ms: u64,
    /// Operations per thread. Runs invariants mode by count instead of time.
    #[arg(long)]
    ops: Option<u64>,
    /// Histories to generate in linearizability mode.
    #[arg(long, default_value_t = 1000)]
    iterations: u64,
    /// [default: 10000 for invariants, 4 for linearizability]
    #[arg(long)]
    key_range: Option<u64>,
    /// insert,delete,search percentages [default: 20,10,70 for invariants,
    /// 35,35,30 for linearizability].
    #[arg(long)]
    mix: Option<Mix>,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// How long a worker may go without progress before it counts as stuck.
    #[arg(long, default_value_t = 30_000)]
    timeout_ms: u64,
    /// Largest history the linearizability checker accepts.
    #[arg(long, default_value_t = DEFAULT_OP_BOUND)]
    bound: usize,
    /// History file for replay mode.
    #[arg(long)]
    history: Option<PathBuf>,
    /// Timestamp source for recorded histories.
    #[arg(long, value_enum, default_value_t = ClockArg::Monotonic)]
    clock: ClockArg,
    /// Write the generated histories here (linearizability mode).
    #[arg(long)]
    out: Option<PathBuf>,
}

const LIN_MIX: Mix = Mix {
    insert: 35,
    delete: 35,
    search: 30,
};

impl CheckArgs {
    fn stress_config(&self, threads: usize, length: StressLength, key_range: u64, mix: Mix) -> Result<StressConfig, CliError> {
        let cfg = StressConfig::new(self.variant, threads, length, mix.with_range(key_range))
            .seed(self.seed)
            .timeout(Duration::from_millis(self.timeout_ms))
            .clock(match self.clock {
                ClockArg::Monotonic => Clock::Monotonic,
                ClockArg::Logical => Clock::Logical,
            });
        cfg.validate().map_err(usage)?;
        Ok(cfg)
    }
}

pub fn run(args: CheckArgs) -> CliResult {
    if args.mode != Mode::Replay && args.history.is_some() {
        return Err(usage("--history only applies to --mode replay"));
    }
    match args.mode {
        Mode::Invariants => invariants(&args),
        Mode::Linearizability => linearizability(&args),
        Mode::Replay => replay(&args),
    }
}

fn invariants(args: &CheckArgs) -> CliResult {
    let length = match args.ops {
        Some(n) => StressLength::OpsPerThread(n),
        None => StressLength::Duration(Duration::from_millis(args.duration_ms)),
    };
    let cfg = args
        .stress_config(args.threads.unwrap_or(8), length, args.key_range.unwrap_or(10_000), args.mix.unwrap_or(Mix::MID))?
        .recording(Recording::Mutations);
    let started = Instant::now();
    let run = run_stress(&cfg).map_err(failed)?;
    let report = check_run(&run);
    println!(
        "{} x{} threads: {} ops in {:.2} s, {} keys left, {} retries",
        run.tree.variant().label(),
        cfg.threads,
        run.ops_completed,
        started.elapsed().as_secs_f64(),
        run.tree.collect_leaf_keys().len(),
        run.tree.retry_count()
    );
    println!("{report}");
    match report.violations.first() {
        None => Ok(()),
        Some(v) => Err(failed(format!("invariant violated: {v}"))),
    }
}

fn linearizability(args: &CheckArgs) -> CliResult {
    let threads = args.threads.unwrap_or(3);
    let ops = args.ops.unwrap_or(5);
    let total = threads as u64 * ops;
    if total > args.bound as u64 {
        return Err(usage(HistoryError::TooLarge {
            ops: total as usize,
            bound: args.bound,
        }));
    }
    let mut out = args.out.as_deref().map(|p| open_out(Some(p))).transpose()?;
    let mix = args.mix.unwrap_or(LIN_MIX);
    let key_range = args.key_range.unwrap_or(4);
    for i in 0..args.iterations {
        // one seed per iteration, derived from the base seed
        let cfg = args.stress_config(threads, StressLength::OpsPerThread(ops), key_range, mix)?.seed(args.seed.wrapping_add(i));
        let run = run_stress(&cfg).map_err(failed)?;
        if let Some(w) = out.as_mut() {
            writeln!(w, "# iteration {i} seed {}\n{}", cfg.seed, run.history).map_err(failed)?;
        }
        let ok = check_linearizable_bounded(&run.history, args.bound).map_err(failed)?;
        if !ok {
            if let Some(w) = out.as_mut() {
                w.flush().map_err(failed)?;
            }
            return Err(failed(format!(
                "iteration {i} (seed {}): history is not linearizable\n{}",
                cfg.seed, run.history
            )));
        }
    }
    if let Some(w) = out.as_mut() {
        w.flush().map_err(failed)?;
    }
    println!(
        "{}: {} histories of {threads} threads x {ops} ops (key range {key_range}, mix {mix}) all linearizable",
        args.variant.label(),
        args.iterations
    );
    Ok(())
}

fn replay(args: &CheckArgs) -> CliResult {
    let Some(path) = &args.history else {
        return Err(usage("--mode replay needs --history <file>"));
    };
    let text = std::fs::read_to_string(path).map_err(|e| failed(format!("{}: {e}", path.display())))?;
    let history: History = text.parse().map_err(|e| usage(format!("{}: {e}", path.display())))?;
    match check_linearizable_bounded(&history, args.bound) {
        Ok(true) => {
            println!("{}: {} operations, linearizable", path.display(), history.op_count());
            Ok(())
        }
        Ok(false) => Err(failed(format!("{}: history is not linearizable", path.display()))),
        // oversized or malformed
        Err(e) => Err(usage(e)),
    }
}
