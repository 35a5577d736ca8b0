//! `redmx`: compute, update, benchmark and serve redundancy matrices.
//!
//! Exit codes:
//!
//! | code | meaning |
//! |------|---------|
//! | 0  | success |
//! | 1  | file could not be read or written |
//! | 2  | model or script syntax error |
//! | 3  | structure is kinematically indeterminate |
//! | 4  | removal of a statically determinate part |
//! | 5  | singular update gate |
//! | 6  | benchmark correctness gate failed |
//! | 7  | `--verify` found a deviation from recomputation |
//! | 8  | service could not bind its address |
//! | 9  | invalid update (unknown or duplicate element, wrong payload size) |
//! | 10 | invalid command line |

use std::fmt;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use redmx::bench::{self, BenchConfig, Scenario, Series};
use redmx::design::{DesignState, VERIFY_TOLERANCE};
use redmx::io::{
    export_matrix, format_report, parse_model, parse_update_script, ParseError, Precision,
};
use redmx::{Error, ModelDocument};

/// Above this many rows `update` skips `--verify` unless asked for.
const VERIFY_DEFAULT_MAX_NQ: usize = 2000;

#[derive(Parser)]
#[command(
    name = "redmx",
    version,
    about = "Redundancy matrices with low-rank structural updates"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute R = I - A K^-1 A^T C and print the redundancy report.
    Compute {
        model: PathBuf,
        #[command(flatten)]
        out: Output,
    },
    /// Apply an update script and print the final report.
    Update {
        model: PathBuf,
        script: PathBuf,
        /// Cross-check every step against a recomputation (default when n_q <= 2000).
        #[arg(long, overrides_with = "no_verify")]
        verify: bool,
        #[arg(long)]
        no_verify: bool,
        #[command(flatten)]
        out: Output,
    },
    /// Time recomputation against updates on the scalable truss family.
    Bench {
        /// A single k, a range `a..b` (inclusive) or a list `a,b,c`.
        #[arg(long, default_value = "4..8", value_parser = parse_k)]
        k: KRange,
        #[arg(long, default_value_t = 5)]
        reps: usize,
        #[arg(long, value_enum, default_value_t = ScenarioArg::All)]
        scenario: ScenarioArg,
        /// Untimed runs before measuring.
        #[arg(long, default_value_t = 1)]
        warmup: usize,
        /// Check the updated state against a recomputation at the smallest k.
        #[arg(long)]
        verify: bool,
        /// Write the table here instead of only printing it.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write gnuplot data for a log-log plot.
        #[arg(long)]
        plot: Option<PathBuf>,
    },
    /// Run the HTTP design service seeded with a model.
    Serve {
        model: PathBuf,
        #[arg(long, default_value = redmx_service::DEFAULT_BIND)]
        bind: String,
        /// Directory of static UI assets to serve.
        #[arg(long)]
        assets: Option<PathBuf>,
    },
    /// Write the introductory example fixture files.
    Fixtures {
        #[arg(long, default_value = "fixtures")]
        out: PathBuf,
    },
}

#[derive(Args)]
struct Output {
    /// Write R to this file.
    #[arg(long = "export-R")]
    export_r: Option<PathBuf>,
    /// Write K^-1 to this file.
    #[arg(long = "export-Kinv")]
    export_kinv: Option<PathBuf>,
    /// Digits after the decimal point, `sigN` for N significant digits, or
    /// `full` for round-trip output.
    #[arg(long, default_value = "3", value_parser = parse_precision)]
    precision: Precision,
}

#[derive(Clone, Copy, ValueEnum)]
enum ScenarioArg {
    Add,
    Remove,
    Exchange,
    All,
}

impl From<ScenarioArg> for Scenario {
    fn from(s: ScenarioArg) -> Self {
        match s {
            ScenarioArg::Add => Scenario::Add,
            ScenarioArg::Remove => Scenario::Remove,
            ScenarioArg::Exchange => Scenario::Exchange,
            ScenarioArg::All => Scenario::All,
        }
    }
}

#[derive(Clone, Debug)]
struct KRange(Vec<usize>);

fn parse_k(s: &str) -> Result<KRange, String> {
    let bad = || format!("expected k, a..b or a,b,c; got {s:?}");
    let ks: Vec<usize> = if let Some((a, b)) = s.split_once("..") {
        let (a, b): (usize, usize) = (
            a.trim().parse().map_err(|_| bad())?,
            b.trim().parse().map_err(|_| bad())?,
        );
        if a > b {
            return Err(bad());
        }
        (a..=b).collect()
    } else {
        s.split(',')
            .map(|p| p.trim().parse().map_err(|_| bad()))
            .collect::<Result<_, _>>()?
    };
    Ok(KRange(ks))
}

fn parse_precision(s: &str) -> Result<Precision, String> {
    if s == "full" {
        return Ok(Precision::Full);
    }
    if let Some(d) = s.strip_prefix("sig") {
        return d
            .parse::<usize>()
            .ok()
            .filter(|&d| (1..=17).contains(&d))
            .map(Precision::Significant)
            .ok_or_else(|| format!("expected sig1..sig17, got {s:?}"));
    }
    s.parse::<usize>()
        .ok()
        .filter(|&d| d <= 17)
        .map(Precision::Decimals)
        .ok_or_else(|| format!("expected 0..=17, sigN or full, got {s:?}"))
}

/// A failure with its exit code.
#[derive(Debug)]
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn new(code: u8, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }

    fn io(path: &Path, e: std::io::Error) -> Self {
        Self::new(1, format!("{}: {e}", path.display()))
    }

    fn parse(path: &Path, e: ParseError) -> Self {
        Self::new(
            2,
            format!("{}:{}:{}: {}", path.display(), e.line, e.column, e.message),
        )
    }

    fn analysis(context: &str, e: Error) -> Self {
        let code = match &e {
            Error::RankDeficient { .. } | Error::NotPositiveDefinite { .. } | Error::NoFreeDofs => {
                3
            }
            Error::StaticallyDeterminateRemoval { .. } => 4,
            Error::GateSingular { .. } => 5,
            Error::BenchGate(_) => 6,
            Error::Config(_) => 10,
            _ => 9,
        };
        Self::new(code, format!("{context}{e}"))
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| Failure::io(path, e))
}

fn write(path: &Path, text: &str) -> Result<(), Failure> {
    std::fs::write(path, text).map_err(|e| Failure::io(path, e))
}

fn load(path: &Path) -> Result<DesignState<f64>, Failure> {
    let doc: ModelDocument<f64> = parse_model(&read(path)?).map_err(|e| Failure::parse(path, e))?;
    DesignState::new(doc).map_err(|e| Failure::analysis(&format!("{}: ", path.display()), e))
}

fn finish(design: &DesignState<f64>, out: &Output) -> Result<(), Failure> {
    let state = design.state();
    print!("{}", format_report(&state.report(), out.precision));
    if let Some(p) = &out.export_r {
        write(p, &export_matrix(state.r(), out.precision))?;
    }
    if let Some(p) = &out.export_kinv {
        write(p, &export_matrix(state.kinv(), out.precision))?;
    }
    Ok(())
}

fn update(model: &Path, script: &Path, verify: Option<bool>, out: &Output) -> Result<(), Failure> {
    let mut design = load(model)?;
    let steps =
        parse_update_script::<f64>(&read(script)?).map_err(|e| Failure::parse(script, e))?;
    let verify = verify.unwrap_or(design.state().n_q() <= VERIFY_DEFAULT_MAX_NQ);
    for (step, line) in steps.steps.iter().zip(&steps.lines) {
        let at = format!("{}:{line}: ", script.display());
        design.apply(step).map_err(|e| Failure::analysis(&at, e))?;
        if verify {
            let v = design
                .verify(VERIFY_TOLERANCE)
                .map_err(|e| Failure::analysis(&at, e))?;
            eprintln!(
                "{at}verified (R deviation {:.1e}, K^-1 deviation {:.1e})",
                v.r_deviation, v.kinv_deviation
            );
            if !v.passed() {
                return Err(Failure::new(
                    7,
                    format!(
                        "{at}updated state deviates from recomputation beyond {VERIFY_TOLERANCE:e}"
                    ),
                ));
            }
        }
    }
    finish(&design, out)
}

/// Growth label for a fitted log-log slope.
fn slope_label(slope: f64) -> &'static str {
    if (1.6..=2.4).contains(&slope) {
        "~quadratic"
    } else if (2.6..=3.4).contains(&slope) {
        "~cubic"
    } else {
        "~other"
    }
}

fn run_bench(cfg: BenchConfig, out: Option<&Path>, plot: Option<&Path>) -> Result<(), Failure> {
    let records = bench::run_benchmark_with(&cfg, |r| {
        eprintln!(
            "k = {} done (recompute {:.3} ms)",
            r.k, r.t_recompute.median_ms
        );
    })
    .map_err(|e| Failure::analysis("", e))?;
    let table = bench::format_table(&records);
    print!("{table}");
    if let Some(p) = out {
        write(p, &table)?;
    }
    if let Some(p) = plot {
        write(p, &bench::format_gnuplot(&records))?;
    }
    for (name, series) in [
        ("recompute", Series::Recompute),
        ("add", Series::Add),
        ("remove", Series::Remove),
        ("exchange", Series::Exchange),
    ] {
        if records.iter().all(|r| r.series(series).is_none()) {
            continue;
        }
        match bench::fit_loglog_slope(&records, series) {
            Ok(s) => println!("slope {name} {s:.2} {}", slope_label(s)),
            Err(e) => println!("slope {name} - ({e})"),
        }
    }
    Ok(())
}

fn serve(model: &Path, bind: &str, assets: Option<PathBuf>) -> Result<(), Failure> {
    let design = load(model)?;
    let runtime = tokio::runtime::Runtime::new().map_err(|e| Failure::new(1, e.to_string()))?;
    runtime.block_on(async {
        let listener = tokio::net::TcpListener::bind(bind)
            .await
            .map_err(|e| Failure::new(8, format!("cannot bind {bind}: {e}")))?;
        let addr = listener
            .local_addr()
            .map_err(|e| Failure::new(8, e.to_string()))?;
        eprintln!("serving {} on http://{addr}", model.display());
        let app = redmx_service::router_with_assets(
            redmx_service::SessionStore::with_default(design),
            assets,
        );
        redmx_service::serve(listener, app)
            .await
            .map_err(|e| Failure::new(1, e.to_string()))
    })
}

fn fixtures(dir: &Path) -> Result<(), Failure> {
    std::fs::create_dir_all(dir).map_err(|e| Failure::io(dir, e))?;
    for (name, text) in redmx::fixtures::files().map_err(|e| Failure::analysis("", e))? {
        write(&dir.join(&name), &text)?;
        println!("{}", dir.join(name).display());
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Compute { model, out } => finish(&load(&model)?, &out),
        Command::Update {
            model,
            script,
            verify,
            no_verify,
            out,
        } => {
            let flag = match (verify, no_verify) {
                (true, _) => Some(true),
                (_, true) => Some(false),
                _ => None,
            };
            update(&model, &script, flag, &out)
        }
        Command::Bench {
            k,
            reps,
            scenario,
            warmup,
            verify,
            out,
            plot,
        } => {
            let cfg = BenchConfig {
                k_values: k.0,
                repetitions: reps,
                scenario: scenario.into(),
                warmup,
                seed: BenchConfig::seed_from_env(),
                verify,
                ..BenchConfig::default()
            };
            run_bench(cfg, out.as_deref(), plot.as_deref())
        }
        Command::Serve {
            model,
            bind,
            assets,
        } => serve(&model, &bind, assets),
        Command::Fixtures { out } => fixtures(&out),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 10 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.code)
        }
    }
}
