mod bench;
mod report;

use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::time::Duration;

use anyhow::Context;
use clap::{Parser, Subcommand, ValueEnum};
use latalloc::instances::{self, generate, validate_nondominated, GeneratorSpec, Violation};
use latalloc::SolveStatus;

use report::{run, Limits, Mode, RunError};

const EXIT_OPTIMAL: u8 = 0;
const EXIT_LIMIT: u8 = 2;
const EXIT_INPUT: u8 = 3;
const EXIT_INVARIANT: u8 = 4;
const EXIT_INTERRUPTED: i32 = 130;

#[derive(Parser)]
#[command(name = "latalloc", version, about = "Exact and heuristic demand allocation with fixed activation costs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve an instance file.
    Solve {
        instance: PathBuf,
        /// Branch on one copy at a time instead of whole groups.
        #[arg(long)]
        binary_branching: bool,
        /// Only run the primal heuristic.
        #[arg(long, conflicts_with = "binary_branching")]
        heuristic_only: bool,
        /// Print one line per evaluated node to stderr.
        #[arg(long)]
        trace: bool,
        /// Wall-clock limit in seconds.
        #[arg(long)]
        time_limit: Option<f64>,
        #[arg(long)]
        node_limit: Option<u64>,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// Generate an instance file.
    Generate {
        #[arg(value_enum)]
        class: Class,
        /// Number of resources, or for `partition` the weights, e.g. "2 3 5 4".
        spec: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Latency exponent p of f(x) = b x^p.
        #[arg(long, default_value_t = 1.0)]
        exponent: f64,
        /// Output path; stdout when omitted.
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Check an instance file and report dominated resources.
    Validate { instance: PathBuf },
    /// Run a benchmark suite and write CSV.
    Bench {
        suite: PathBuf,
        /// Output CSV; stdout when omitted.
        #[arg(short, long)]
        out: Option<PathBuf>,
        /// Worker threads, overriding the suite file.
        #[arg(long)]
        workers: Option<usize>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Text,
    Csv,
}

#[derive(Clone, Copy, ValueEnum)]
enum Class {
    Base,
    Random,
    Partition,
}

/// Error tagged with the exit code it maps to.
struct Failure {
    code: u8,
    error: anyhow::Error,
}

fn input(error: impl Into<anyhow::Error>) -> Failure {
    Failure { code: EXIT_INPUT, error: error.into() }
}

impl From<RunError> for Failure {
    fn from(e: RunError) -> Self {
        Failure { code: EXIT_INVARIANT, error: e.into() }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_INPUT } else { EXIT_OPTIMAL });
        }
    };
    let result = match cli.command {
        Command::Solve { instance, binary_branching, heuristic_only, trace, time_limit, node_limit, format } => {
            let mode = match (heuristic_only, binary_branching) {
                (true, _) => Mode::HeuristicOnly,
                (false, true) => Mode::Binary,
                (false, false) => Mode::NAry,
            };
            cmd_solve(&instance, mode, trace, time_limit, node_limit, format)
        }
        Command::Generate { class, spec, seed, exponent, out } => {
            cmd_generate(class, &spec, seed, exponent, out.as_deref())
        }
        Command::Validate { instance } => cmd_validate(&instance),
        Command::Bench { suite, out, workers } => cmd_bench(&suite, out.as_deref(), workers),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}

fn cmd_solve(
    path: &Path,
    mode: Mode,
    trace: bool,
    time_limit: Option<f64>,
    node_limit: Option<u64>,
    format: Format,
) -> Result<u8, Failure> {
    let time_limit = match time_limit {
        Some(t) if !(t.is_finite() && t >= 0.0) => return Err(input(anyhow::anyhow!("--time-limit must be >= 0"))),
        t => t.map(Duration::from_secs_f64),
    };
    let instance = instances::read_instance(path).with_context(|| format!("{}", path.display())).map_err(input)?;
    let id = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let limits = Limits { node_limit, time_limit, trace };
    let report = run(&instance, &id, "file", mode, &limits)?;

    if trace {
        let mut err = std::io::stderr().lock();
        for t in &report.trace {
            let _ = writeln!(err, "depth {} bound {} incumbent {}", t.depth, t.bound, t.incumbent);
        }
    }
    match format {
        Format::Text => print!("{}", report.to_text()),
        Format::Csv => {
            let mut w = csv::Writer::from_writer(std::io::stdout().lock());
            w.serialize(report.row())
                .and_then(|()| Ok(w.flush()?))
                .map_err(|e| Failure { code: 1, error: e.into() })?;
        }
    }
    Ok(match report.status {
        None | Some(SolveStatus::Optimal) => EXIT_OPTIMAL,
        Some(SolveStatus::NodeLimit | SolveStatus::TimeLimit) => EXIT_LIMIT,
    })
}

fn parse_weights(spec: &str) -> anyhow::Result<Vec<u64>> {
    spec.split(|c: char| c.is_whitespace() || c == ',')
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<u64>().with_context(|| format!("weight `{t}` is not a nonnegative integer")))
        .collect()
}

fn cmd_generate(class: Class, spec: &str, seed: u64, exponent: f64, out: Option<&Path>) -> Result<u8, Failure> {
    let size = || spec.trim().parse::<usize>().with_context(|| format!("size `{spec}` is not an integer"));
    let (gen_spec, comment) = match class {
        Class::Base => {
            let q = size().map_err(input)?;
            (GeneratorSpec { exponent, ..GeneratorSpec::base(q) }, format!("base q={q} p={exponent}"))
        }
        Class::Random => {
            let q = size().map_err(input)?;
            (
                GeneratorSpec { exponent, ..GeneratorSpec::random(q, seed) },
                format!("random q={q} seed={seed} p={exponent}"),
            )
        }
        Class::Partition => {
            let w = parse_weights(spec).map_err(input)?;
            let total: u64 = w.iter().sum();
            let listed: Vec<String> = w.iter().map(u64::to_string).collect();
            (GeneratorSpec::partition(w), format!("partition weights={} W={total}", listed.join(" ")))
        }
    };
    let instance = generate(&gen_spec).map_err(input)?;
    let text = instances::format_instance(&instance, &[comment]).map_err(input)?;
    let summary = format!("{} groups, {} resources", instance.num_groups(), instance.q());
    match out {
        Some(path) => {
            std::fs::write(path, text).with_context(|| format!("writing {}", path.display())).map_err(input)?;
            println!("wrote {}: {summary}", path.display());
        }
        None => {
            print!("{text}");
            eprintln!("{summary}");
        }
    }
    Ok(EXIT_OPTIMAL)
}

fn describe(v: &Violation) -> String {
    match *v {
        Violation::Dominates { better, worse } => format!("group {better} dominates group {worse}"),
        Violation::FixedCostIncreases { index } => format!("fixed cost increases at group {index}"),
        Violation::CoefficientDecreases { index } => format!("latency coefficient decreases at group {index}"),
        Violation::BelowFirstFixedCost { index } => {
            format!("group {index}: fixed cost plus coefficient below the first group's fixed cost")
        }
    }
}

fn cmd_validate(path: &Path) -> Result<u8, Failure> {
    let instance = instances::read_instance(path).with_context(|| format!("{}", path.display())).map_err(input)?;
    let violations = validate_nondominated(&instance);
    println!("{}: {} groups, {} resources", path.display(), instance.num_groups(), instance.q());
    if violations.is_empty() {
        println!("ok");
        return Ok(EXIT_OPTIMAL);
    }
    for v in &violations {
        println!("{}", describe(v));
    }
    Err(input(anyhow::anyhow!("{} violation(s)", violations.len())))
}

fn cmd_bench(suite_path: &Path, out: Option<&Path>, workers: Option<usize>) -> Result<u8, Failure> {
    let suite = bench::load_suite(suite_path).map_err(input)?;
    let jobs = suite.jobs().map_err(input)?;
    let limits = suite.limits().map_err(input)?;
    let workers =
        workers.or(suite.workers).unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    if workers == 0 {
        return Err(input(anyhow::anyhow!("workers must be at least 1")));
    }

    let stop = Arc::new(AtomicBool::new(false));
    {
        let stop = stop.clone();
        ctrlc::set_handler(move || stop.store(true, Ordering::Relaxed))
            .map_err(|e| Failure { code: 1, error: e.into() })?;
    }
    let sink: Box<dyn std::io::Write> = match out {
        Some(p) => {
            Box::new(std::fs::File::create(p).with_context(|| format!("creating {}", p.display())).map_err(input)?)
        }
        None => Box::new(std::io::stdout().lock()),
    };
    let outcome = bench::run_bench(&jobs, &limits, workers, sink, &stop, |o| {
        if let Some((id, e)) = &o.failure {
            eprintln!("error: {id}: {e}");
            std::process::exit(if matches!(e, RunError::Sandwich(_)) { EXIT_INVARIANT.into() } else { 1 });
        }
        eprintln!("interrupted after {} of {} runs", o.rows, jobs.len());
        std::process::exit(EXIT_INTERRUPTED);
    })
    .map_err(|e| Failure { code: 1, error: e })?;

    eprintln!("{} runs written", outcome.rows);
    Ok(if outcome.limit_hits > 0 { EXIT_LIMIT } else { EXIT_OPTIMAL })
}
