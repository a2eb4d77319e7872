use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::BenchConfig;
use crate::bst::Variant;
use crate::error::RecordError;

/// One measured run, flattened for CSV and JSON output.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchRecord {
    pub variant: Variant,
    pub threads: usize,
    pub key_range: u64,
    pub insert_pct: u32,
    pub delete_pct: u32,
    pub search_pct: u32,
    pub duration_ms: u64,
    pub ops_completed: u64,
    pub throughput_ops_s: f64,
    pub retries: u64,
    pub contention_rate: f64,
    pub wall_time_ms: f64,
    pub seed: u64,
    pub repeat: u32,
}

pub const CSV_HEADER: &str = "variant,threads,key_range,insert_pct,delete_pct,search_pct,duration_ms,ops_completed,throughput_ops_s,retries,contention_rate,wall_time_ms,seed,repeat";

pub(crate) fn contention(retries: u64, ops: u64) -> f64 {
    if retries == 0 {
        0.0
    } else {
        retries as f64 / (retries + ops) as f64
    }
}

impl BenchRecord {
    pub fn new(config: &BenchConfig, repeat: u32, ops_completed: u64, retries: u64, wall: Duration) -> Self {
        let secs = wall.as_secs_f64();
        let w = &config.workload;
        BenchRecord {
            variant: config.variant,
            threads: config.threads,
            key_range: w.key_range,
            insert_pct: w.insert_pct,
            delete_pct: w.delete_pct,
            search_pct: w.search_pct,
            duration_ms: config.duration_ms,
            ops_completed,
            throughput_ops_s: if secs > 0.0 { ops_completed as f64 / secs } else { 0.0 },
            retries,
            contention_rate: contention(retries, ops_completed),
            wall_time_ms: secs * 1000.0,
            seed: config.seed,
            repeat,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

impl Format {
    /// Guesses from a file extension, defaulting to CSV.
    pub fn from_path(path: &std::path::Path) -> Format {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("json") => Format::Json,
            _ => Format::Csv,
        }
    }
}

impl fmt::Display for Format {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Format::Csv => "csv",
            Format::Json => "json",
        })
    }
}

impl FromStr for Format {
    type Err = RecordError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            _ => Err(RecordError::Format(s.to_string())),
        }
    }
}

pub fn write_csv<W: Write>(out: W, records: &[BenchRecord]) -> Result<(), RecordError> {
    let mut w = csv::Writer::from_writer(out);
    if records.is_empty() {
        w.write_record(CSV_HEADER.split(','))?;
    }
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<R: Read>(input: R) -> Result<Vec<BenchRecord>, RecordError> {
    let mut r = csv::Reader::from_reader(input);
    Ok(r.deserialize().collect::<Result<_, _>>()?)
}

pub fn write_json<W: Write>(mut out: W, records: &[BenchRecord]) -> Result<(), RecordError> {
    serde_json::to_writer_pretty(&mut out, records)?;
    writeln!(out)?;
    Ok(())
}

pub fn read_json<R: Read>(input: R) -> Result<Vec<BenchRecord>, RecordError> {
    Ok(serde_json::from_reader(input)?)
}

pub fn write_records<W: Write>(out: W, records: &[BenchRecord], format: Format) -> Result<(), RecordError> {
    match format {
        Format::Csv => write_csv(out, records),
        Format::Json => write_json(out, records),
    }
}

pub fn read_records<R: Read>(input: R, format: Format) -> Result<Vec<BenchRecord>, RecordError> {
    match format {
        Format::Csv => read_csv(input),
        Format::Json => read_json(input),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bench::WorkloadSpec;

    fn sample() -> Vec<BenchRecord> {
        let cfg = BenchConfig::new(Variant::FlagEdgeMark, 4, 1000, WorkloadSpec::low_contention(10_000));
        vec![
            BenchRecord::new(&cfg, 0, 123_456, 78, Duration::from_micros(1_000_321)),
            BenchRecord::new(&BenchConfig { variant: Variant::Seq, threads: 1, ..cfg }, 1, 99, 0, Duration::from_millis(1000)),
        ]
    }

    #[test]
    fn derived_columns() {
        let r = &sample()[0];
        assert!((r.throughput_ops_s - 123_456.0 / 1.000321).abs() < 1e-6);
        assert!((r.contention_rate - 78.0 / (78.0 + 123_456.0)).abs() < 1e-15);
        assert_eq!(sample()[1].contention_rate, 0.0);
    }

    #[test]
    fn csv_header_and_round_trip() {
        let mut buf = Vec::new();
        write_csv(&mut buf, &sample()).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().next().unwrap(), CSV_HEADER);
        assert!(text.lines().nth(1).unwrap().starts_with("fem,4,10000,9,1,90,1000,123456,"));
        assert_eq!(read_csv(text.as_bytes()).unwrap(), sample());
    }

    #[test]
    fn empty_csv_still_has_header() {
        let mut buf = Vec::new();
        write_csv(&mut buf, &[]).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().trim_end(), CSV_HEADER);
    }

    #[test]
    fn json_round_trip() {
        let mut buf = Vec::new();
        write_json(&mut buf, &sample()).unwrap();
        let v: serde_json::Value = serde_json::from_slice(&buf).unwrap();
        let first = v.as_array().unwrap()[0].as_object().unwrap();
        let fields: Vec<&str> = first.keys().map(String::as_str).collect();
        let mut want: Vec<&str> = CSV_HEADER.split(',').collect();
        want.sort_unstable();
        let mut got = fields.clone();
        got.sort_unstable();
        assert_eq!(got, want);
        assert_eq!(read_json(buf.as_slice()).unwrap(), sample());
    }

    #[test]
    fn format_parsing() {
        assert_eq!("JSON".parse::<Format>().unwrap(), Format::Json);
        assert!("xml".parse::<Format>().is_err());
        assert_eq!(Format::from_path("a/r.json".as_ref()), Format::Json);
        assert_eq!(Format::from_path("r.csv".as_ref()), Format::Csv);
    }
}
