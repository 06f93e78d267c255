//! The `spi` command line.
//!
//! Exit codes: 0 ok, 1 usage, 2 model error, 3 evaluation error.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::engine::{Engine, Query};
use crate::error::Error;
use crate::eval::EvalStats;
use crate::factor::Factor;
use crate::generate::{cpt_star, noisy_or_star};
use crate::network::{parse_network, validate_network, BeliefNetwork, LocalModel};
use crate::partition::{validate_partition_tree, PartitionTree};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_MODEL: i32 = 2;
pub const EXIT_EVAL: i32 = 3;

/// Largest parent count for which `bench` also runs the full-table encoding.
const BENCH_CPT_LIMIT: usize = 16;

#[derive(Parser, Debug)]
#[command(
    name = "spi",
    version,
    about = "Symbolic inference over belief networks"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Check a net file and print its diagnostics.
    Validate { net: PathBuf },
    /// Print P(targets | evidence) as TSV.
    Query {
        net: PathBuf,
        #[arg(short = 't', value_delimiter = ',', required = true)]
        targets: Vec<String>,
        #[arg(short = 'e', value_delimiter = ',', value_parser = parse_observation)]
        evidence: Vec<(String, String)>,
        /// Append evaluation counters as `# key value` lines.
        #[arg(long)]
        stats: bool,
    },
    /// Print the root partition's rewritten expression and predicted costs.
    Plan {
        net: PathBuf,
        #[arg(short = 't', value_delimiter = ',', required = true)]
        targets: Vec<String>,
        #[arg(short = 'e', value_delimiter = ',', value_parser = parse_observation)]
        evidence: Vec<(String, String)>,
        /// Also print the plans of every partition the query visits.
        #[arg(long)]
        all: bool,
    },
    /// Scaling run on a generated noisy-or star, against its full-table encoding.
    Bench {
        #[arg(long, value_name = "N")]
        noisyor: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Append the counters of the largest noisy-or run as `# key value` lines.
        #[arg(long)]
        stats: bool,
    },
    /// Print the full conditional table of a noisy-or node.
    Expand { net: PathBuf, node: String },
}

fn parse_observation(s: &str) -> std::result::Result<(String, String), String> {
    match s.split_once('=') {
        Some((v, x)) if !v.trim().is_empty() && !x.trim().is_empty() => {
            Ok((v.trim().to_string(), x.trim().to_string()))
        }
        _ => Err(format!("expected var=value, got `{s}`")),
    }
}

/// A failure with its exit code.
struct Failure(i32, String);

fn model_err(e: impl std::fmt::Display) -> Failure {
    Failure(EXIT_MODEL, e.to_string())
}

fn eval_err(e: Error) -> Failure {
    Failure(EXIT_EVAL, e.to_string())
}

/// Parses `args` (program name first) and runs the command.
pub fn run<I, S>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() {
                write!(err, "{text}")
            } else {
                write!(out, "{text}")
            };
            return code;
        }
    };
    match execute(&cli.command, out) {
        Ok(code) => code,
        Err(Failure(code, msg)) => {
            let _ = writeln!(err, "spi: {msg}");
            code
        }
    }
}

fn execute(cmd: &Command, out: &mut dyn Write) -> Result<i32, Failure> {
    match cmd {
        Command::Validate { net } => validate(net, out),
        Command::Query {
            net,
            targets,
            evidence,
            stats,
        } => {
            let net = load(net)?;
            let q = query_of(targets, evidence);
            let mut engine = Engine::new(&net).map_err(model_err)?;
            let f = engine.query(&q).map_err(eval_err)?;
            write_rows(out, &f, true)?;
            if *stats {
                write_stats(out, &engine.eval_stats())?;
            }
            Ok(EXIT_OK)
        }
        Command::Plan {
            net,
            targets,
            evidence,
            all,
        } => {
            let net = load(net)?;
            let q = query_of(targets, evidence);
            let mut engine = Engine::new(&net).map_err(model_err)?;
            if *all {
                engine.query(&q).map_err(eval_err)?;
                for p in engine.plans() {
                    emit(out, &p.dump(engine.tree()))?;
                }
            } else {
                let plan = engine.plan(&q).map_err(eval_err)?;
                emit(out, &plan.dump(engine.tree()))?;
            }
            Ok(EXIT_OK)
        }
        Command::Bench {
            noisyor,
            seed,
            stats,
        } => bench(*noisyor, *seed, *stats, out),
        Command::Expand { net, node } => {
            let net = load(net)?;
            let f = expand(&net, node)?;
            write_rows(out, &f, false)?;
            Ok(EXIT_OK)
        }
    }
}

fn emit(out: &mut dyn Write, text: &str) -> Result<(), Failure> {
    write!(out, "{text}").map_err(|e| Failure(EXIT_EVAL, e.to_string()))
}

fn read(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| model_err(format!("{}: {e}", path.display())))
}

fn load(path: &Path) -> Result<BeliefNetwork, Failure> {
    crate::network::load_network(&read(path)?).map_err(model_err)
}

fn query_of(targets: &[String], evidence: &[(String, String)]) -> Query {
    let mut q = Query::new(targets);
    for (v, x) in evidence {
        q = q.given(v, x);
    }
    q
}

fn validate(path: &Path, out: &mut dyn Write) -> Result<i32, Failure> {
    let net = parse_network(&read(path)?)
        .and_then(|b| b.build_unchecked())
        .map_err(model_err)?;
    let mut diags = validate_network(&net);
    if diags.is_empty() {
        if let Some(spec) = net.partition_spec() {
            match PartitionTree::from_spec(&net, spec) {
                Ok(tree) => diags.extend(validate_partition_tree(&net, &tree)),
                Err(e) => diags.push(e.to_string()),
            }
        }
    }
    let text: String = diags.iter().map(|d| format!("{d}\n")).collect();
    emit(out, &text)?;
    if diags.is_empty() {
        emit(out, &format!("ok: {} variables\n", net.variables().len()))?;
        Ok(EXIT_OK)
    } else {
        Ok(EXIT_MODEL)
    }
}

fn expand(net: &BeliefNetwork, node: &str) -> Result<Factor, Failure> {
    let child = net.variable(node).map_err(model_err)?;
    let LocalModel::Expr {
        noisy_or: Some(no), ..
    } = net.model(node).map_err(model_err)?
    else {
        return Err(model_err(format!("`{node}` is not a noisy-or node")));
    };
    let parents = no
        .parents
        .iter()
        .map(|p| net.variable(p).cloned())
        .collect::<crate::Result<Vec<_>>>()
        .map_err(model_err)?;
    crate::oracle::expand_noisy_or_to_cpt(child, &parents, &no.params, no.leak).map_err(model_err)
}

fn bench(n: usize, seed: u64, stats: bool, out: &mut dyn Write) -> Result<i32, Failure> {
    if n == 0 {
        return Err(Failure(
            EXIT_USAGE,
            "--noisyor needs at least one parent".into(),
        ));
    }
    let mut text = String::from(
        "parents\tnoisyor_multiplications\tnoisyor_scope\tnoisyor_peak_cells\tcpt_multiplications\tcpt_scope\tcpt_peak_cells\n",
    );
    let mut last = EvalStats::default();
    for k in 1..=n {
        let a = star_stats(&noisy_or_star(seed, k).map_err(model_err)?)?;
        text.push_str(&format!(
            "{k}\t{}\t{}\t{}",
            a.multiplications, a.largest_scope, a.peak_cells
        ));
        if k <= BENCH_CPT_LIMIT {
            let b = star_stats(&cpt_star(seed, k).map_err(model_err)?)?;
            text.push_str(&format!(
                "\t{}\t{}\t{}\n",
                b.multiplications, b.largest_scope, b.peak_cells
            ));
        } else {
            text.push_str("\t-\t-\t-\n");
        }
        last = a;
    }
    emit(out, &text)?;
    if stats {
        write_stats(out, &last)?;
    }
    Ok(EXIT_OK)
}

fn star_stats(net: &BeliefNetwork) -> Result<EvalStats, Failure> {
    let mut engine = Engine::new(net).map_err(model_err)?;
    engine.query(&Query::new(&["D"])).map_err(eval_err)?;
    Ok(engine.eval_stats())
}

/// One `var=value,...<TAB>prob` line per cell; `sorted` orders lines by
/// their assignment text, otherwise table order.
fn write_rows(out: &mut dyn Write, f: &Factor, sorted: bool) -> Result<(), Failure> {
    let mut rows: Vec<(String, f64)> = f
        .cells()
        .map(|(idx, v)| {
            let parts: Vec<String> = idx
                .iter()
                .zip(f.scope())
                .map(|(&d, e)| format!("{}={}", e.name(), e.variable().domain()[d]))
                .collect();
            (parts.join(","), v)
        })
        .collect();
    if sorted {
        rows.sort_by(|a, b| a.0.cmp(&b.0));
    }
    let text: String = rows
        .iter()
        .map(|(a, v)| format!("{a}\t{}\n", significant(*v, 12)))
        .collect();
    emit(out, &text)
}

fn write_stats(out: &mut dyn Write, s: &EvalStats) -> Result<(), Failure> {
    let text: String = s
        .entries()
        .iter()
        .map(|(k, v)| format!("# {k} {v}\n"))
        .collect();
    emit(out, &text)
}

/// `v` to `digits` significant digits, trailing zeros dropped, scientific
/// notation outside `1e-5..1e12`.
pub fn significant(v: f64, digits: usize) -> String {
    if v == 0.0 || !v.is_finite() {
        return if v == 0.0 { "0".into() } else { v.to_string() };
    }
    let sci = format!("{:.*e}", digits - 1, v);
    let (mantissa, exp) = sci.split_once('e').expect("exponent");
    let exp: i32 = exp.parse().expect("exponent");
    if !(-5..12).contains(&exp) {
        let m = trim_zeros(mantissa);
        return format!("{m}e{exp}");
    }
    let decimals = (digits as i32 - 1 - exp).max(0) as usize;
    trim_zeros(&format!("{:.*}", decimals, v)).to_string()
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn significant_digits() {
        assert_eq!(significant(0.85, 12), "0.85");
        assert_eq!(significant(1.0 / 3.0, 12), "0.333333333333");
        assert_eq!(significant(0.030000000000000013, 12), "0.03");
        assert_eq!(significant(1.0, 12), "1");
        assert_eq!(significant(0.0, 12), "0");
        assert_eq!(significant(1.234e-7, 12), "1.234e-7");
        assert_eq!(significant(0.99999999999999, 12), "1");
    }

    #[test]
    fn observations() {
        assert_eq!(parse_observation("B=t"), Ok(("B".into(), "t".into())));
        assert!(parse_observation("B").is_err());
        assert!(parse_observation("=t").is_err());
    }

    #[test]
    fn usage_errors_exit_one() {
        let (mut o, mut e) = (Vec::new(), Vec::new());
        assert_eq!(run(["spi", "frobnicate"], &mut o, &mut e), EXIT_USAGE);
        assert_eq!(run(["spi", "query", "x.net"], &mut o, &mut e), EXIT_USAGE);
        assert_eq!(run(["spi", "--help"], &mut o, &mut e), EXIT_OK);
    }
}
