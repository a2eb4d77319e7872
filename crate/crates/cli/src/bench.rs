use std::io::Write;
use std::path::PathBuf;

use clap::{Args, ValueEnum};

use cbst::bench::{sweep_with, write_records, BenchConfig, BenchRecord, ContentionCounter, Format, Mix};
use cbst::Variant;

use crate::{failed, open_out, usage, CliResult};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    /// 9% insert, 1% delete, 90% search; buckets 10000 and 100000; 1-32 threads; 5 s runs.
    PaperLow,
    /// 20% insert, 10% delete, 70% search; otherwise as paper-low.
    PaperMid,
}

impl Preset {
    fn mix(self) -> Mix {
        match self {
            Preset::PaperLow => Mix::LOW,
            Preset::PaperMid => Mix::MID,
        }
    }
}

const PRESET_THREADS: [usize; 6] = [1, 2, 4, 8, 16, 32];
const PRESET_KEY_RANGES: [u64; 2] = [10_000, 100_000];
const PRESET_DURATION_MS: u64 = 5000;

#[derive(Args, Debug)]
pub struct BenchArgs {
    /// Variants to run (seq, coarse, fn, fe, fem, tn), comma-separated.
    #[arg(long, value_delimiter = ',')]
    variant: Vec<Variant>,
    /// Thread counts, comma-separated.
    #[arg(long, value_delimiter = ',')]
    threads: Vec<usize>,
    /// Measured time per run.
    #[arg(long)]
    duration_ms: Option<u64>,
    /// Keys are drawn from [0, key-range); comma-separated for several.
    #[arg(long, value_delimiter = ',')]
    key_range: Vec<u64>,
    /// Operation mix as insert,delete,search percentages.
    #[arg(long)]
    mix: Option<Mix>,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Runs per configuration.
    #[arg(long, default_value_t = 3)]
    repeats: u32,
    /// Unmeasured time before each run.
    #[arg(long, default_value_t = BenchConfig::DEFAULT_WARMUP_MS)]
    warmup_ms: u64,
    /// Output format; defaults to the --out extension, else csv.
    #[arg(long)]
    format: Option<Format>,
    /// Output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Expand to a standard workload grid. Explicit flags override it.
    #[arg(long, value_enum)]
    preset: Option<Preset>,
    /// Report failed try-lock attempts instead of retries in the retries column.
    #[arg(long)]
    count_lock_failures: bool,
    /// Pin workers round-robin to CPUs (also enabled by CBST_PIN=1).
    #[arg(long)]
    pin: bool,
}

/// Fully resolved sweep.
#[derive(Debug, PartialEq)]
pub struct Plan {
    pub variants: Vec<Variant>,
    pub threads: Vec<usize>,
    pub key_ranges: Vec<u64>,
    pub base: BenchConfig,
    pub repeats: u32,
}

fn env_pin() -> bool {
    std::env::var("CBST_PIN").is_ok_and(|v| v == "1")
}

impl BenchArgs {
    pub fn plan(&self) -> Result<Plan, String> {
        let preset = self.preset;
        let or = |given: &[usize], fallback: &[usize]| if given.is_empty() { fallback.to_vec() } else { given.to_vec() };
        let variants = match (&self.variant[..], preset) {
            ([], Some(_)) => Variant::CONCURRENT.to_vec(),
            ([], None) => vec![Variant::FlagEdgeMark],
            (v, _) => v.to_vec(),
        };
        let threads = or(&self.threads, if preset.is_some() { &PRESET_THREADS } else { &[1] });
        let key_ranges = match (&self.key_range[..], preset) {
            ([], Some(_)) => PRESET_KEY_RANGES.to_vec(),
            ([], None) => vec![10_000],
            (k, _) => k.to_vec(),
        };
        let mix = self.mix.or(preset.map(Preset::mix)).unwrap_or(Mix::LOW);
        let duration_ms = self.duration_ms.unwrap_or(if preset.is_some() { PRESET_DURATION_MS } else { 1000 });
        let base = BenchConfig {
            seed: self.seed,
            warmup_ms: self.warmup_ms,
            pin: self.pin || env_pin(),
            counter: if self.count_lock_failures { ContentionCounter::LockFailures } else { ContentionCounter::Retries },
            ..BenchConfig::new(variants[0], threads[0], duration_ms, mix.with_range(key_ranges[0]))
        };
        if self.repeats == 0 {
            return Err("--repeats must be positive".into());
        }
        // every cell of the grid must be valid before anything runs
        for &variant in &variants {
            for &t in &threads {
                for &k in &key_ranges {
                    let cfg = BenchConfig { variant, threads: t, workload: mix.with_range(k), ..base };
                    cfg.validate().map_err(|e| format!("{variant} x {t} threads x key range {k}: {e}"))?;
                }
            }
        }
        Ok(Plan {
            variants,
            threads,
            key_ranges,
            base,
            repeats: self.repeats,
        })
    }

    fn format(&self) -> Format {
        self.format.unwrap_or_else(|| self.out.as_deref().map_or(Format::Csv, Format::from_path))
    }
}

pub fn run(args: BenchArgs) -> CliResult {
    let plan = args.plan().map_err(usage)?;
    let format = args.format();
    let mut records = Vec::new();
    for &k in &plan.key_ranges {
        let base = BenchConfig {
            workload: plan.base.workload.mix().with_range(k),
            ..plan.base
        };
        let recs = sweep_with(&base, &plan.threads, &plan.variants, plan.repeats, |r| {
            eprintln!(
                "  {:<6} threads={:<3} key_range={:<7} repeat={} {:>14.0} ops/s",
                r.variant.label(),
                r.threads,
                r.key_range,
                r.repeat,
                r.throughput_ops_s
            );
        })
        .map_err(failed)?;
        records.extend(recs);
    }
    let mut out = open_out(args.out.as_deref())?;
    write_records(&mut out, &records, format).map_err(failed)?;
    out.flush().map_err(failed)?;
    drop(out);
    let summary = summary(&records);
    if args.out.is_some() {
        print!("{summary}");
    } else {
        eprint!("{summary}");
    }
    Ok(())
}

/// Median throughput and mean contention per configuration.
fn summary(records: &[BenchRecord]) -> String {
    let mut s = format!(
        "{:<8} {:>7} {:>9} {:>9} {:>16} {:>11}\n",
        "variant", "threads", "key_range", "mix", "median ops/s", "contention"
    );
    let mut i = 0;
    while i < records.len() {
        let r = &records[i];
        let same = |o: &BenchRecord| o.variant == r.variant && o.threads == r.threads && o.key_range == r.key_range;
        let group: Vec<&BenchRecord> = records[i..].iter().take_while(|o| same(o)).collect();
        let mut tp: Vec<f64> = group.iter().map(|g| g.throughput_ops_s).collect();
        tp.sort_by(f64::total_cmp);
        let c = group.iter().map(|g| g.contention_rate).sum::<f64>() / group.len() as f64;
        s += &format!(
            "{:<8} {:>7} {:>9} {:>9} {:>16.0} {:>11.6}\n",
            r.variant.label(),
            r.threads,
            r.key_range,
            format!("{},{},{}", r.insert_pct, r.delete_pct, r.search_pct),
            tp[tp.len() / 2],
            c
        );
        i += group.len();
    }
    s
}

#[cfg(test)]
mod tests {
    use clap::Parser;

    use super::*;

    #[derive(Parser)]
    struct Wrap {
        #[command(flatten)]
        args: BenchArgs,
    }

    fn plan(argv: &[&str]) -> Result<Plan, String> {
        let w = Wrap::try_parse_from(std::iter::once("bench").chain(argv.iter().copied())).map_err(|e| e.to_string())?;
        w.args.plan()
    }

    #[test]
    fn preset_low_expands_to_the_grid() {
        let p = plan(&["--preset", "paper-low"]).unwrap();
        assert_eq!(p.variants, Variant::CONCURRENT.to_vec());
        assert_eq!(p.threads, PRESET_THREADS.to_vec());
        assert_eq!(p.key_ranges, vec![10_000, 100_000]);
        assert_eq!(p.base.workload.mix(), Mix::LOW);
        assert_eq!(p.base.duration_ms, 5000);
    }

    #[test]
    fn explicit_flags_override_preset() {
        let p = plan(&["--preset", "paper-mid", "--threads", "2", "--key-range", "64", "--variant", "fem"]).unwrap();
        assert_eq!(p.base.workload.mix(), Mix::MID);
        assert_eq!((p.threads, p.key_ranges, p.variants), (vec![2], vec![64], vec![Variant::FlagEdgeMark]));
    }

    #[test]
    fn seq_with_threads_is_a_usage_error() {
        let err = plan(&["--variant", "seq", "--threads", "4"]).unwrap_err();
        assert!(err.contains("single-threaded"), "{err}");
        assert!(plan(&["--variant", "seq", "--threads", "1"]).is_ok());
    }

    #[test]
    fn bad_mix_rejected_by_parser() {
        assert!(plan(&["--mix", "50,50,50"]).is_err());
    }
}
