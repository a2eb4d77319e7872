use std::fs::File;
use std::io::{BufReader, Write};
use std::path::PathBuf;

use clap::{ArgGroup, Args};

use cbst::bench::{read_records, Format};
use cbst::model::{self, alpha_series, concurrent_speedup, predict_vs_measured, write_comparison_csv, ModelError, ModelParams};

use crate::{failed, open_out, usage, CliError, CliResult};

#[derive(Args, Debug)]
#[command(group(ArgGroup::new("action").required(true).args(["eval", "curve_alpha", "compare", "validate"])))]
pub struct ModelArgs {
    /// Print the concurrent speedup for --P, --c, --alpha, --ws-ratio, --wc-ratio.
    #[arg(long)]
    eval: bool,
    /// Emit (t, alpha) rows as CSV for --h and --asymptote.
    #[arg(long)]
    curve_alpha: bool,
    /// Compare measured speedups in --records with the model's prediction.
    #[arg(long)]
    compare: bool,
    /// Check a full parameter vector against every constraint.
    #[arg(long)]
    validate: bool,

    /// Processor (thread) count.
    #[arg(long = "P", default_value_t = 1)]
    p: u32,
    /// Contention rate.
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    c: f64,
    /// Rate of taking effect on linearization points.
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    alpha: f64,
    /// Rate of recording valid linearization points.
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    beta: f64,
    /// w_snapshot / w_p.
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    ws_ratio: f64,
    /// w_control / w_p.
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    wc_ratio: f64,
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    w_p: f64,
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    w_snapshot: f64,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    w_control: f64,
    /// Hardness of the structure.
    #[arg(long, default_value_t = 2.0, allow_negative_numbers = true)]
    h: f64,
    /// Ceiling of alpha(t); defaults to w_snapshot*beta/w_control.
    #[arg(long, allow_negative_numbers = true)]
    asymptote: Option<f64>,
    #[arg(long, default_value_t = 10.0)]
    t_max: f64,
    #[arg(long, default_value_t = 1.0)]
    step: f64,
    /// Bench records (CSV or JSON by extension) for --compare.
    #[arg(long)]
    records: Option<PathBuf>,
    /// Output file for --curve-alpha and --compare; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn model_failure(e: ModelError) -> CliError {
    match e {
        ModelError::Invalid(v) => failed(v.iter().map(ToString::to_string).collect::<Vec<_>>().join("\n")),
        e => failed(e),
    }
}

impl ModelArgs {
    fn full_params(&self) -> ModelParams {
        ModelParams {
            p: self.p,
            c: self.c,
            alpha: self.alpha,
            beta: self.beta,
            w_p: self.w_p,
            w_snapshot: self.w_snapshot,
            w_control: self.w_control,
            h: self.h,
            w_s: 0.0,
        }
    }

    fn ratio_params(&self) -> ModelParams {
        ModelParams::from_ratios(self.p, self.c, self.alpha, self.ws_ratio, self.wc_ratio)
    }
}

pub fn run(args: ModelArgs) -> CliResult {
    if args.eval {
        let s = concurrent_speedup(&args.ratio_params()).map_err(model_failure)?;
        println!("{s}");
    } else if args.curve_alpha {
        let asymptote = match args.asymptote {
            Some(a) => a,
            None => {
                let m = args.full_params();
                // α(0) = 0 validates everything the curve needs
                model::alpha_at(0.0, &m).map_err(model_failure)?;
                m.alpha_ceiling()
            }
        };
        let rows = alpha_series(args.h, asymptote, args.t_max, args.step).map_err(model_failure)?;
        let mut out = open_out(args.out.as_deref())?;
        let write = |out: &mut dyn Write| -> std::io::Result<()> {
            writeln!(out, "t,alpha")?;
            for (t, a) in rows {
                writeln!(out, "{t},{a}")?;
            }
            out.flush()
        };
        write(&mut out).map_err(failed)?;
    } else if args.compare {
        let Some(path) = &args.records else {
            return Err(usage("--compare needs --records <file>"));
        };
        let file = File::open(path).map_err(|e| failed(format!("{}: {e}", path.display())))?;
        let records = read_records(BufReader::new(file), Format::from_path(path)).map_err(|e| failed(format!("{}: {e}", path.display())))?;
        let rows = predict_vs_measured(&records, &args.ratio_params()).map_err(model_failure)?;
        let mut out = open_out(args.out.as_deref())?;
        write_comparison_csv(&mut out, &rows).map_err(failed)?;
    } else {
        let violations = model::validate(&args.full_params());
        if !violations.is_empty() {
            return Err(model_failure(ModelError::Invalid(violations)));
        }
        println!("parameters satisfy every constraint");
    }
    Ok(())
}
