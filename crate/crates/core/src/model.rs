//! Speedup model for concurrent data structures.
//!
//! Classic Amdahl: `1 / ((1 - p) + p / P)`. For a concurrent structure the
//! whole operation is parallel, but it carries extra work for taking a
//! snapshot and for the consistency controller, and only part of the
//! threads make progress at any time:
//!
//! ```text
//! W_p = w_p + w_snapshot + w_control
//! P'  = P · (1 - c) · α
//! speedup = P(1 - c)α / (1 + w_snapshot/w_p + w_control/w_p)
//! ```
//!
//! subject to `0 ≤ c ≤ 1`, `1/w_snapshot ≤ β ≤ 1` and
//! `0 ≤ α ≤ w_snapshot·β/w_control`, `α ≤ 1`. The rate α grows with time
//! towards its ceiling as `α(t) = (w_snapshot·β/w_control)(1 - h^-t)` for a
//! structure of hardness `h > 1`.

// `!(x >= lo)` style comparisons reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::collections::BTreeMap;
use std::fmt;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bench::BenchRecord;
use crate::bst::Variant;
use crate::error::RecordError;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Processor (thread) count.
    pub p: u32,
    /// Contention rate.
    pub c: f64,
    /// Rate of taking effect on linearization points.
    pub alpha: f64,
    /// Rate of recording valid linearization points.
    pub beta: f64,
    pub w_p: f64,
    pub w_snapshot: f64,
    pub w_control: f64,
    /// Hardness of the structure.
    pub h: f64,
    /// Sequential workload of the original program. Zero for a concurrent
    /// structure, where every operation is parallel work.
    pub w_s: f64,
}

impl Default for ModelParams {
    fn default() -> Self {
        ModelParams {
            p: 1,
            c: 0.0,
            alpha: 1.0,
            beta: 1.0,
            w_p: 1.0,
            w_snapshot: 1.0,
            w_control: 0.0,
            h: 2.0,
            w_s: 0.0,
        }
    }
}

impl ModelParams {
    /// Parameters for [`concurrent_speedup`] given the two overhead ratios,
    /// with `w_p` normalized to 1.
    pub fn from_ratios(p: u32, c: f64, alpha: f64, ws_ratio: f64, wc_ratio: f64) -> Self {
        ModelParams {
            p,
            c,
            alpha,
            w_p: 1.0,
            w_snapshot: ws_ratio,
            w_control: wc_ratio,
            ..ModelParams::default()
        }
    }

    /// `w_snapshot·β/w_control`, the ceiling of α; infinite without control work.
    pub fn alpha_ceiling(&self) -> f64 {
        if self.w_control == 0.0 {
            f64::INFINITY
        } else {
            self.w_snapshot * self.beta / self.w_control
        }
    }
}

/// One violated inequality of the parameter constraints.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Violation {
    Processors(u32),
    Contention(f64),
    BetaFloor { beta: f64, floor: f64 },
    BetaAboveOne(f64),
    AlphaNegative(f64),
    AlphaAboveCeiling { alpha: f64, ceiling: f64 },
    AlphaAboveOne(f64),
    ParallelWork(f64),
    SnapshotWork(f64),
    ControlWork(f64),
    SequentialWork(f64),
    Hardness(f64),
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Violation::Processors(p) => write!(f, "P out of range: need P >= 1 (got {p})"),
            Violation::Contention(c) => write!(f, "c out of range: need 0 <= c <= 1 (got {c})"),
            Violation::BetaFloor { beta, floor } => {
                write!(f, "beta below floor: need 1/w_snapshot <= beta (got beta = {beta}, 1/w_snapshot = {floor})")
            }
            Violation::BetaAboveOne(b) => write!(f, "beta out of range: need beta <= 1 (got {b})"),
            Violation::AlphaNegative(a) => write!(f, "alpha out of range: need 0 <= alpha (got {a})"),
            Violation::AlphaAboveCeiling { alpha, ceiling } => write!(
                f,
                "alpha above ceiling: need alpha <= w_snapshot*beta/w_control (got alpha = {alpha}, ceiling = {ceiling})"
            ),
            Violation::AlphaAboveOne(a) => write!(f, "alpha out of range: need alpha <= 1 (got {a})"),
            Violation::ParallelWork(w) => write!(f, "w_p out of range: need w_p > 0 (got {w})"),
            Violation::SnapshotWork(w) => write!(f, "w_snapshot out of range: need w_snapshot > 0 (got {w})"),
            Violation::ControlWork(w) => write!(f, "w_control out of range: need w_control >= 0 (got {w})"),
            Violation::SequentialWork(w) => write!(f, "w_s out of range: need w_s >= 0 (got {w})"),
            Violation::Hardness(h) => write!(f, "h out of range: need h > 1 (got {h})"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Error)]
pub enum ModelError {
    #[error("{}", join(.0))]
    Invalid(Vec<Violation>),
    #[error("no 1-thread baseline for {variant} key_range={key_range} mix={mix}")]
    MissingBaseline { variant: Variant, key_range: u64, mix: String },
    #[error("no bench records given")]
    NoRecords,
    #[error("{0}")]
    Domain(String),
}

fn join(v: &[Violation]) -> String {
    v.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
}

/// `NaN` fails every check below, because each is written as "not inside".
fn push_if(out: &mut Vec<Violation>, bad: bool, v: Violation) {
    if bad {
        out.push(v);
    }
}

/// Constraints the speedup formula itself depends on. They only involve
/// the unit-free overhead ratios.
fn speedup_violations(m: &ModelParams) -> Vec<Violation> {
    let mut v = Vec::new();
    push_if(&mut v, m.p < 1, Violation::Processors(m.p));
    push_if(&mut v, !(0.0..=1.0).contains(&m.c), Violation::Contention(m.c));
    push_if(&mut v, !(m.alpha >= 0.0), Violation::AlphaNegative(m.alpha));
    push_if(&mut v, !(m.alpha <= 1.0), Violation::AlphaAboveOne(m.alpha));
    push_if(&mut v, !(m.w_p > 0.0 && m.w_p.is_finite()), Violation::ParallelWork(m.w_p));
    push_if(&mut v, !(m.w_snapshot >= 0.0 && m.w_snapshot.is_finite()), Violation::SnapshotWork(m.w_snapshot));
    push_if(&mut v, !(m.w_control >= 0.0 && m.w_control.is_finite()), Violation::ControlWork(m.w_control));
    v
}

/// Every violated constraint, empty when the parameters are valid.
/// Boundaries are inclusive exactly as written in the module docs.
pub fn validate(m: &ModelParams) -> Vec<Violation> {
    let mut v = Vec::new();
    push_if(&mut v, m.p < 1, Violation::Processors(m.p));
    push_if(&mut v, !(0.0..=1.0).contains(&m.c), Violation::Contention(m.c));
    push_if(&mut v, !(m.w_p > 0.0 && m.w_p.is_finite()), Violation::ParallelWork(m.w_p));
    push_if(&mut v, !(m.w_snapshot > 0.0 && m.w_snapshot.is_finite()), Violation::SnapshotWork(m.w_snapshot));
    push_if(&mut v, !(m.w_control >= 0.0 && m.w_control.is_finite()), Violation::ControlWork(m.w_control));
    push_if(&mut v, !(m.w_s >= 0.0 && m.w_s.is_finite()), Violation::SequentialWork(m.w_s));
    push_if(&mut v, !(m.h > 1.0 && m.h.is_finite()), Violation::Hardness(m.h));
    let floor = 1.0 / m.w_snapshot;
    push_if(&mut v, !(floor <= m.beta), Violation::BetaFloor { beta: m.beta, floor });
    push_if(&mut v, !(m.beta <= 1.0), Violation::BetaAboveOne(m.beta));
    push_if(&mut v, !(m.alpha >= 0.0), Violation::AlphaNegative(m.alpha));
    if m.w_control > 0.0 {
        let ceiling = m.alpha_ceiling();
        push_if(&mut v, !(m.alpha <= ceiling), Violation::AlphaAboveCeiling { alpha: m.alpha, ceiling });
    }
    push_if(&mut v, !(m.alpha <= 1.0), Violation::AlphaAboveOne(m.alpha));
    v
}

/// `1 / ((1 - p) + p / P)` for parallel fraction `p` in `[0, 1]`, `P >= 1`.
pub fn amdahl_speedup(p: f64, processors: u32) -> f64 {
    debug_assert!((0.0..=1.0).contains(&p) && processors >= 1);
    1.0 / ((1.0 - p) + p / f64::from(processors))
}

/// `W_p = w_p + w_snapshot + w_control`.
pub fn parallel_workload(m: &ModelParams) -> f64 {
    m.w_p + m.w_snapshot + m.w_control
}

/// `P · (1 - c) · α`.
pub fn effective_parallelism(m: &ModelParams) -> f64 {
    f64::from(m.p) * (1.0 - m.c) * m.alpha
}

/// `P(1 - c)α / (1 + w_snapshot/w_p + w_control/w_p)`.
///
/// Only the constraints on P, c, α and the workloads are enforced here; the
/// β floor depends on the absolute work unit, which the ratios leave open.
/// Use [`validate`] for the full set.
pub fn concurrent_speedup(m: &ModelParams) -> Result<f64, ModelError> {
    let v = speedup_violations(m);
    if !v.is_empty() {
        return Err(ModelError::Invalid(v));
    }
    Ok(effective_parallelism(m) / (1.0 + m.w_snapshot / m.w_p + m.w_control / m.w_p))
}

/// `asymptote · (1 - h^-t)`.
pub fn alpha_curve(t: f64, h: f64, asymptote: f64) -> Result<f64, ModelError> {
    if !(h > 1.0 && h.is_finite()) {
        return Err(ModelError::Invalid(vec![Violation::Hardness(h)]));
    }
    if !(t >= 0.0) {
        return Err(ModelError::Domain(format!("t must be non-negative (got {t})")));
    }
    if !(asymptote >= 0.0 && asymptote.is_finite()) {
        return Err(ModelError::Domain(format!("asymptote must be a non-negative number (got {asymptote})")));
    }
    Ok(asymptote * (-h.powf(-t) + 1.0))
}

/// `α(t) = (w_snapshot·β/w_control)(1 - h^-t)`.
pub fn alpha_at(t: f64, m: &ModelParams) -> Result<f64, ModelError> {
    let mut v = Vec::new();
    push_if(&mut v, !(m.h > 1.0 && m.h.is_finite()), Violation::Hardness(m.h));
    push_if(&mut v, !(m.w_control > 0.0 && m.w_control.is_finite()), Violation::ControlWork(m.w_control));
    push_if(&mut v, !(m.w_snapshot > 0.0 && m.w_snapshot.is_finite()), Violation::SnapshotWork(m.w_snapshot));
    let floor = 1.0 / m.w_snapshot;
    push_if(&mut v, !(floor <= m.beta), Violation::BetaFloor { beta: m.beta, floor });
    push_if(&mut v, !(m.beta <= 1.0), Violation::BetaAboveOne(m.beta));
    if !v.is_empty() {
        return Err(ModelError::Invalid(v));
    }
    alpha_curve(t, m.h, m.alpha_ceiling())
}

/// `(t, α(t))` for `t = 0, step, 2·step, ...` up to and including `t_max`.
pub fn alpha_series(h: f64, asymptote: f64, t_max: f64, step: f64) -> Result<Vec<(f64, f64)>, ModelError> {
    if !(step > 0.0 && t_max >= 0.0 && t_max.is_finite()) {
        return Err(ModelError::Domain(format!("need step > 0 and t_max >= 0 (got step {step}, t_max {t_max})")));
    }
    // tolerate float drift at the last step
    let n = (t_max / step + 1e-9).floor() as u64;
    (0..=n)
        .map(|i| {
            let t = i as f64 * step;
            alpha_curve(t, h, asymptote).map(|a| (t, a))
        })
        .collect()
}

/// The configuration a record was measured under, ignoring the repeat.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ConfigKey {
    pub variant: Variant,
    pub key_range: u64,
    pub mix: (u32, u32, u32),
    pub threads: usize,
}

impl ConfigKey {
    pub fn of(r: &BenchRecord) -> Self {
        ConfigKey {
            variant: r.variant,
            key_range: r.key_range,
            mix: (r.insert_pct, r.delete_pct, r.search_pct),
            threads: r.threads,
        }
    }

    fn workload(&self) -> (Variant, u64, (u32, u32, u32)) {
        (self.variant, self.key_range, self.mix)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ContentionFit {
    pub config: ConfigKey,
    /// Mean of `retries / (retries + ops_completed)` over the repeats.
    pub c: f64,
    pub repeats: usize,
}

/// Per-record contention rate, averaged per configuration. Output follows
/// first appearance in `records`.
pub fn fit_contention(records: &[BenchRecord]) -> Result<Vec<ContentionFit>, ModelError> {
    if records.is_empty() {
        return Err(ModelError::NoRecords);
    }
    let mut order: Vec<ConfigKey> = Vec::new();
    let mut sums: BTreeMap<ConfigKey, (f64, usize)> = BTreeMap::new();
    for r in records {
        let k = ConfigKey::of(r);
        let c = crate::bench::record::contention(r.retries, r.ops_completed);
        let e = sums.entry(k).or_insert_with(|| {
            order.push(k);
            (0.0, 0)
        });
        e.0 += c;
        e.1 += 1;
    }
    Ok(order
        .into_iter()
        .map(|k| {
            let (sum, n) = sums[&k];
            ContentionFit {
                config: k,
                c: sum / n as f64,
                repeats: n,
            }
        })
        .collect())
}

/// One row of the prediction table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub variant: Variant,
    pub threads: usize,
    pub measured_speedup: f64,
    pub predicted_speedup: f64,
    pub ratio: f64,
    pub c_fitted: f64,
}

pub const COMPARISON_HEADER: &str = "variant,threads,measured_speedup,predicted_speedup,ratio,c_fitted";

/// Measured speedup `throughput(T) / throughput(1)` (means over repeats)
/// against [`concurrent_speedup`] with `P = T` and the fitted `c`. The
/// template supplies α and the overhead ratios. Rows are grouped by
/// workload in order of first appearance, then sorted by thread count.
pub fn predict_vs_measured(records: &[BenchRecord], template: &ModelParams) -> Result<Vec<Comparison>, ModelError> {
    let fits = fit_contention(records)?;
    let mut throughput: BTreeMap<ConfigKey, (f64, usize)> = BTreeMap::new();
    for r in records {
        let e = throughput.entry(ConfigKey::of(r)).or_default();
        e.0 += r.throughput_ops_s;
        e.1 += 1;
    }
    let mean = |k: &ConfigKey| throughput.get(k).map(|&(s, n)| s / n as f64);

    let mut workloads = Vec::new();
    for f in &fits {
        if !workloads.contains(&f.config.workload()) {
            workloads.push(f.config.workload());
        }
    }
    let mut rows = Vec::new();
    for w in workloads {
        let (variant, key_range, mix) = w;
        let base_key = ConfigKey {
            variant,
            key_range,
            mix,
            threads: 1,
        };
        let Some(base) = mean(&base_key) else {
            return Err(ModelError::MissingBaseline {
                variant,
                key_range,
                mix: format!("{},{},{}", mix.0, mix.1, mix.2),
            });
        };
        let mut group: Vec<&ContentionFit> = fits.iter().filter(|f| f.config.workload() == w).collect();
        group.sort_by_key(|f| f.config.threads);
        for f in group {
            let t = f.config.threads;
            let measured = if t == 1 { 1.0 } else { mean(&f.config).unwrap_or(0.0) / base };
            let params = ModelParams {
                p: u32::try_from(t).map_err(|_| ModelError::Domain(format!("thread count {t} too large")))?,
                c: f.c,
                ..*template
            };
            let predicted = concurrent_speedup(&params)?;
            rows.push(Comparison {
                variant,
                threads: t,
                measured_speedup: measured,
                predicted_speedup: predicted,
                ratio: measured / predicted,
                c_fitted: f.c,
            });
        }
    }
    Ok(rows)
}

pub fn write_comparison_csv<W: Write>(out: W, rows: &[Comparison]) -> Result<(), RecordError> {
    let mut w = csv::Writer::from_writer(out);
    if rows.is_empty() {
        w.write_record(COMPARISON_HEADER.split(','))?;
    }
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_comparison_csv<R: Read>(input: R) -> Result<Vec<Comparison>, RecordError> {
    Ok(csv::Reader::from_reader(input).deserialize().collect::<Result<_, _>>()?)
}
