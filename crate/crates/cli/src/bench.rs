//! Benchmark suites: a TOML file expands into (instance, mode) jobs that run
//! on a small worker pool; rows are written in suite order as soon as every
//! earlier row is done.

use std::path::Path;
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::mpsc;
use std::time::Duration;

use anyhow::{bail, Context};
use latalloc::instances::{generate, GeneratorSpec};
use latalloc::Instance;
use serde::Deserialize;

use crate::report::{run, summarize, CsvRow, Limits, Mode, RunError, RunReport};

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Suite {
    /// Worker threads; defaults to the available parallelism.
    pub workers: Option<usize>,
    pub node_limit: Option<u64>,
    pub time_limit_s: Option<f64>,
    #[serde(rename = "group", default)]
    pub groups: Vec<SuiteGroup>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuiteGroup {
    pub class: String,
    #[serde(default)]
    pub sizes: Vec<usize>,
    /// Explicit seeds for the random class.
    pub seeds: Option<Vec<u64>>,
    /// Alternatively `seed_count` consecutive seeds from `first_seed`.
    pub seed_count: Option<u64>,
    #[serde(default)]
    pub first_seed: u64,
    /// Weight lists for the partition class.
    #[serde(default)]
    pub weights: Vec<Vec<u64>>,
    #[serde(default = "default_modes")]
    pub modes: Vec<String>,
    #[serde(default = "one")]
    pub repetitions: u32,
    #[serde(default = "unit_exponent")]
    pub exponent: f64,
}

fn default_modes() -> Vec<String> {
    vec!["nary".into()]
}

fn one() -> u32 {
    1
}

fn unit_exponent() -> f64 {
    1.0
}

pub struct Job {
    pub id: String,
    pub class: String,
    pub instance: Instance,
    pub mode: Mode,
    pub repetitions: u32,
}

pub fn load_suite(path: &Path) -> anyhow::Result<Suite> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

impl Suite {
    pub fn limits(&self) -> anyhow::Result<Limits> {
        let time_limit = match self.time_limit_s {
            Some(t) if !(t.is_finite() && t > 0.0) => bail!("time_limit_s must be positive"),
            t => t.map(Duration::from_secs_f64),
        };
        Ok(Limits { node_limit: self.node_limit, time_limit, trace: false })
    }

    /// Expands the suite into jobs, generating every instance up front so
    /// that bad specs fail before any solving starts.
    pub fn jobs(&self) -> anyhow::Result<Vec<Job>> {
        let mut jobs = Vec::new();
        for (k, g) in self.groups.iter().enumerate() {
            let modes = g
                .modes
                .iter()
                .map(|m| Mode::parse(m).with_context(|| format!("group {}: unknown mode `{m}`", k + 1)))
                .collect::<anyhow::Result<Vec<_>>>()?;
            if g.repetitions == 0 {
                bail!("group {}: repetitions must be at least 1", k + 1);
            }
            let mut instances: Vec<(String, Instance)> = Vec::new();
            let gen = |spec: GeneratorSpec| generate(&spec).with_context(|| format!("group {}", k + 1));
            match g.class.as_str() {
                "base" => {
                    for &q in &g.sizes {
                        let spec = GeneratorSpec { exponent: g.exponent, ..GeneratorSpec::base(q) };
                        instances.push((format!("base-q{q}"), gen(spec)?));
                    }
                }
                "random" => {
                    let seeds: Vec<u64> = match (&g.seeds, g.seed_count) {
                        (Some(s), None) => s.clone(),
                        (None, Some(n)) => (g.first_seed..g.first_seed + n).collect(),
                        (None, None) => vec![g.first_seed],
                        (Some(_), Some(_)) => bail!("group {}: give either seeds or seed_count", k + 1),
                    };
                    for &q in &g.sizes {
                        for &seed in &seeds {
                            let spec = GeneratorSpec { exponent: g.exponent, ..GeneratorSpec::random(q, seed) };
                            instances.push((format!("random-q{q}-s{seed}"), gen(spec)?));
                        }
                    }
                }
                "partition" => {
                    for w in &g.weights {
                        let name: Vec<String> = w.iter().map(u64::to_string).collect();
                        let spec = GeneratorSpec { exponent: g.exponent, ..GeneratorSpec::partition(w.clone()) };
                        instances.push((format!("partition-{}", name.join("-")), gen(spec)?));
                    }
                }
                other => bail!("group {}: unknown class `{other}`", k + 1),
            }
            for (id, instance) in instances {
                for &mode in &modes {
                    jobs.push(Job {
                        id: id.clone(),
                        class: g.class.clone(),
                        instance: instance.clone(),
                        mode,
                        repetitions: g.repetitions,
                    });
                }
            }
        }
        Ok(jobs)
    }
}

fn run_job(job: &Job, limits: &Limits) -> Result<RunReport, RunError> {
    let mut report = run(&job.instance, &job.id, &job.class, job.mode, limits)?;
    let mut total = report.wall;
    for _ in 1..job.repetitions {
        total += run(&job.instance, &job.id, &job.class, job.mode, limits)?.wall;
    }
    report.wall = total / job.repetitions;
    Ok(report)
}

#[derive(Debug, Default)]
pub struct BenchOutcome {
    pub rows: usize,
    pub limit_hits: usize,
    /// First failing job, if any.
    pub failure: Option<(String, RunError)>,
    pub interrupted: bool,
}

/// Runs `jobs` on `workers` threads and writes instance rows, then summary
/// rows, to `out`. Stops early when `stop` becomes true, keeping every row
/// completed in suite order so far.
///
/// Running solves cannot be cancelled, so once the file is finished after an
/// interrupt or failure, `early_exit` is called before waiting for them;
/// the command line passes a function that exits the process.
pub fn run_bench<W: std::io::Write>(
    jobs: &[Job],
    limits: &Limits,
    workers: usize,
    out: W,
    stop: &AtomicBool,
    early_exit: impl FnOnce(&BenchOutcome),
) -> anyhow::Result<BenchOutcome> {
    let mut writer = csv::Writer::from_writer(out);
    let mut written: Vec<CsvRow> = Vec::new();
    let mut outcome = BenchOutcome::default();
    let next = AtomicUsize::new(0);
    let abort = AtomicBool::new(false);

    std::thread::scope(|scope| -> anyhow::Result<()> {
        let (tx, rx) = mpsc::channel();
        for _ in 0..workers.clamp(1, jobs.len().max(1)) {
            let tx = tx.clone();
            let (next, abort) = (&next, &abort);
            scope.spawn(move || loop {
                if abort.load(Ordering::Relaxed) || stop.load(Ordering::Relaxed) {
                    break;
                }
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(job) = jobs.get(i) else { break };
                if tx.send((i, run_job(job, limits))).is_err() {
                    break;
                }
            });
        }
        drop(tx);

        let mut pending: Vec<Option<Result<RunReport, RunError>>> = (0..jobs.len()).map(|_| None).collect();
        let mut cursor = 0;
        'collect: while cursor < jobs.len() {
            if stop.load(Ordering::Relaxed) {
                outcome.interrupted = true;
                break;
            }
            match rx.recv_timeout(Duration::from_millis(50)) {
                Ok((i, r)) => pending[i] = Some(r),
                Err(mpsc::RecvTimeoutError::Timeout) => continue,
                Err(mpsc::RecvTimeoutError::Disconnected) => break,
            }
            while let Some(r) = pending.get_mut(cursor).and_then(Option::take) {
                match r {
                    Ok(report) => {
                        if report.status.is_some() && !report.is_optimal() {
                            outcome.limit_hits += 1;
                        }
                        let row = report.row();
                        writer.serialize(&row)?;
                        writer.flush()?;
                        written.push(row);
                        cursor += 1;
                    }
                    Err(e) => {
                        outcome.failure = Some((jobs[cursor].id.clone(), e));
                        break 'collect;
                    }
                }
            }
        }
        abort.store(true, Ordering::Relaxed);

        for row in summarize(&written) {
            writer.serialize(&row)?;
        }
        writer.flush()?;
        outcome.rows = written.len();
        if outcome.interrupted || outcome.failure.is_some() {
            early_exit(&outcome);
        }
        Ok(())
    })?;
    Ok(outcome)
}
