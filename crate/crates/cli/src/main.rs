use std::collections::BTreeSet;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use cyverify::arith::format_rational;
use cyverify::corpus::{inventory, load_corpus, parse_twist};
use cyverify::dsl;
use cyverify::eval::{eval_range, harmonic_cy_coefficients, EvalOptions};
use cyverify::harness::{verify_all, with_twist, Filter, Ranges};
use cyverify::laurent::{ct_sequence, parse_laurent, CtSpec};
use cyverify::theta::{check_twisted, parse_theta, TwistMode};

const BUILTIN_CORPUS: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/../../corpus/paper.cyid");

#[derive(Parser)]
#[command(
    name = "cyverify",
    version,
    about = "Exact checks of binomial-sum, constant-term and recurrence formulas"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Human,
    Tsv,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate a formula at one n or over 0..=nmax.
    Eval {
        expr: String,
        #[arg(long)]
        n: Option<i64>,
        #[arg(long, default_value_t = 10)]
        nmax: i64,
        /// Drop singular summands instead of failing.
        #[arg(long)]
        skip_singular: bool,
    },
    /// Constant terms of poly^(mult*n) for n = 0..=nmax.
    Ct {
        poly: String,
        #[arg(long, default_value_t = 1)]
        mult: u32,
        #[arg(long, default_value_t = 4)]
        nmax: u32,
    },
    /// Run the corpus.
    Verify {
        #[arg(long)]
        corpus: Option<PathBuf>,
        /// Comma-separated item ids.
        #[arg(long, value_delimiter = ',')]
        items: Vec<String>,
        /// Comma-separated record kinds: member, ghost, ct, closed, conditional, rec.
        #[arg(long, value_delimiter = ',')]
        kind: Vec<String>,
        /// Cap every range at this n.
        #[arg(long)]
        nmax: Option<i64>,
        /// Range for single sums.
        #[arg(long)]
        nmax_single: Option<i64>,
        #[arg(long, value_enum, default_value_t = Format::Human)]
        format: Format,
        /// auto, none or alternating; overrides the corpus setting of every rec record.
        #[arg(long)]
        twist: Option<String>,
        /// Leave the timing column out of the report.
        #[arg(long)]
        no_timing: bool,
    },
    /// Check the harmonic-number sequence for (b, c) against an operator.
    RecCheck {
        operator: String,
        #[arg(long)]
        b: i64,
        #[arg(long)]
        c: i64,
        #[arg(long, default_value_t = 20)]
        nmax: i64,
        #[arg(long, default_value = "auto")]
        twist: String,
    },
    /// Print the corpus inventory.
    List {
        #[arg(long)]
        corpus: Option<PathBuf>,
    },
}

fn corpus_path(p: Option<PathBuf>) -> PathBuf {
    p.unwrap_or_else(|| {
        let local = PathBuf::from("corpus/paper.cyid");
        if local.exists() {
            local
        } else {
            PathBuf::from(BUILTIN_CORPUS)
        }
    })
}

fn fail(msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::from(2)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Eval {
            expr,
            n,
            nmax,
            skip_singular,
        } => {
            let e = match dsl::parse(&expr) {
                Ok(e) => e,
                Err(err) => return fail(err),
            };
            let (lo, hi) = n.map_or((0, nmax), |n| (n, n));
            match eval_range(&e, lo, hi, EvalOptions { skip_singular }) {
                Ok(values) => {
                    for (i, v) in values.iter().enumerate() {
                        println!("{}\t{}", lo + i as i64, format_rational(v));
                    }
                    ExitCode::SUCCESS
                }
                Err(err) => fail(err),
            }
        }
        Command::Ct { poly, mult, nmax } => {
            let p = match parse_laurent(&poly) {
                Ok(p) => p,
                Err(err) => return fail(err),
            };
            for (n, v) in ct_sequence(&CtSpec::new(p, mult), nmax).iter().enumerate() {
                println!("{n}\t{v}");
            }
            ExitCode::SUCCESS
        }
        Command::Verify {
            corpus,
            items,
            kind,
            nmax,
            nmax_single,
            format,
            twist,
            no_timing,
        } => {
            let path = corpus_path(corpus);
            let mut groups = match load_corpus(&path) {
                Ok(g) => g,
                Err(err) => return fail(err),
            };
            if let Some(t) = twist {
                match parse_twist(&t) {
                    Ok(mode) => with_twist(&mut groups, mode),
                    Err(err) => return fail(err),
                }
            }
            let mut ranges = nmax.map_or_else(Ranges::default, Ranges::uniform);
            if let Some(s) = nmax_single {
                ranges.single = s;
                ranges.closed_single = s;
            }
            let set =
                |v: Vec<String>| (!v.is_empty()).then(|| v.into_iter().collect::<BTreeSet<_>>());
            let filter = Filter {
                items: set(items),
                kinds: set(kind),
            };
            let report = verify_all(&groups, &ranges, &filter);
            match format {
                Format::Human => print!("{}", report.to_human()),
                Format::Tsv => print!("{}", report.to_tsv(!no_timing)),
            }
            ExitCode::from(report.exit_code() as u8)
        }
        Command::RecCheck {
            operator,
            b,
            c,
            nmax,
            twist,
        } => {
            let op = match parse_theta(&operator) {
                Ok(op) => op,
                Err(err) => return fail(err),
            };
            let mode = match parse_twist(&twist) {
                Ok(m) => m,
                Err(err) => return fail(err),
            };
            let seq = match harmonic_cy_coefficients(b, c, nmax) {
                Ok(s) => s,
                Err(err) => return fail(err),
            };
            let rec = op.to_recurrence();
            println!("recurrence: {}", rec.describe());
            let shown: Vec<String> = seq.iter().take(8).map(format_rational).collect();
            println!("sequence: {} ...", shown.join(", "));
            let (t, report) = check_twisted(&rec, &seq, mode);
            match report.failures.first() {
                None => {
                    println!("satisfied for n <= {nmax} (twist {t})");
                    ExitCode::SUCCESS
                }
                Some((m, r)) => {
                    let tried = if mode == TwistMode::Auto {
                        "no twist held".to_string()
                    } else {
                        format!("twist {t}")
                    };
                    println!(
                        "first failure at m={m}: residual {} ({tried}; {} of {} indices fail)",
                        format_rational(r),
                        report.failures.len(),
                        report.checked
                    );
                    ExitCode::from(1)
                }
            }
        }
        Command::List { corpus } => {
            let path = corpus_path(corpus);
            let groups = match load_corpus(&path) {
                Ok(g) => g,
                Err(err) => return fail(err),
            };
            println!("corpus: {}", path.display());
            println!("groups: {}", groups.len());
            for (tag, count) in inventory(&groups) {
                println!("{tag}: {count}");
            }
            for g in &groups {
                let labels: Vec<&str> = g.records.iter().map(|r| r.label.as_str()).collect();
                println!("item {}\t{}", g.item_id, labels.join(" "));
            }
            ExitCode::SUCCESS
        }
    }
}
