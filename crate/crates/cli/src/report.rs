use std::fmt::Write as _;
use std::time::Duration;

use latalloc::heuristic::{primal_heuristic_with, HeuristicOptions};
use latalloc::relax::node_relaxation;
use latalloc::{solve, Branching, Instance, SolveOptions, SolveStatus};
use serde::Serialize;

pub const SANDWICH_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    NAry,
    Binary,
    HeuristicOnly,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::NAry => "nary",
            Mode::Binary => "binary",
            Mode::HeuristicOnly => "heuristic",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "nary" => Some(Mode::NAry),
            "binary" => Some(Mode::Binary),
            "heuristic" => Some(Mode::HeuristicOnly),
            _ => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub instance: String,
    pub class: String,
    pub q: usize,
    pub mode: Mode,
    /// `None` for heuristic-only runs.
    pub status: Option<SolveStatus>,
    pub optimum: f64,
    /// `(group, active copies)` for every group with at least one active copy.
    pub active: Vec<(usize, usize)>,
    pub x: Vec<f64>,
    pub heuristic: f64,
    pub root_bound: f64,
    pub nodes: u64,
    pub bound_evals: u64,
    pub wall: Duration,
    pub trace: Vec<latalloc::bnb::TraceEntry>,
}

#[derive(Debug)]
pub enum RunError {
    Solver(latalloc::Error),
    /// heuristic >= optimum >= bound failed.
    Sandwich(String),
}

impl std::fmt::Display for RunError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RunError::Solver(e) => write!(f, "{e}"),
            RunError::Sandwich(m) => write!(f, "invariant violated: {m}"),
        }
    }
}

impl std::error::Error for RunError {}

#[derive(Debug, Clone, Default)]
pub struct Limits {
    pub node_limit: Option<u64>,
    pub time_limit: Option<Duration>,
    pub trace: bool,
}

pub fn run(instance: &Instance, id: &str, class: &str, mode: Mode, limits: &Limits) -> Result<RunReport, RunError> {
    let started = std::time::Instant::now();
    let report = match mode {
        Mode::HeuristicOnly => {
            let h = primal_heuristic_with(instance, &HeuristicOptions::default()).map_err(RunError::Solver)?;
            let zeros = vec![0; instance.num_groups()];
            let root = node_relaxation(instance, &zeros, &zeros).map_err(RunError::Solver)?;
            RunReport {
                instance: id.to_string(),
                class: class.to_string(),
                q: instance.q(),
                mode,
                status: None,
                optimum: h.allocation.value,
                active: active_groups(&h.allocation.active_counts(instance)),
                x: h.allocation.x.clone(),
                heuristic: h.allocation.value,
                root_bound: root.bound,
                nodes: 0,
                bound_evals: 1,
                wall: started.elapsed(),
                trace: Vec::new(),
            }
        }
        Mode::NAry | Mode::Binary => {
            let options = SolveOptions {
                branching: if mode == Mode::Binary { Branching::Binary } else { Branching::NAry },
                node_limit: limits.node_limit,
                time_limit: limits.time_limit,
                trace: limits.trace,
                ..SolveOptions::default()
            };
            let s = solve(instance, &options).map_err(RunError::Solver)?;
            RunReport {
                instance: id.to_string(),
                class: class.to_string(),
                q: instance.q(),
                mode,
                status: Some(s.status),
                optimum: s.allocation.value,
                active: active_groups(&s.allocation.active_counts(instance)),
                x: s.allocation.x.clone(),
                heuristic: s.heuristic_value,
                root_bound: s.root_bound,
                nodes: s.stats.nodes,
                bound_evals: s.stats.bound_evals,
                wall: s.stats.wall_time,
                trace: s.trace,
            }
        }
    };
    report.check_sandwich()?;
    Ok(report)
}

fn active_groups(counts: &[usize]) -> Vec<(usize, usize)> {
    counts.iter().enumerate().filter(|(_, &n)| n > 0).map(|(g, &n)| (g, n)).collect()
}

impl RunReport {
    pub fn is_optimal(&self) -> bool {
        self.status == Some(SolveStatus::Optimal)
    }

    fn check_sandwich(&self) -> Result<(), RunError> {
        let slack = SANDWICH_TOL * self.optimum.abs().max(1.0);
        if self.heuristic < self.optimum - slack {
            return Err(RunError::Sandwich(format!("heuristic {} below optimum {}", self.heuristic, self.optimum)));
        }
        if self.optimum < self.root_bound - slack {
            return Err(RunError::Sandwich(format!("optimum {} below root bound {}", self.optimum, self.root_bound)));
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let status = match self.status {
            None => "heuristic only",
            Some(SolveStatus::Optimal) => "optimal",
            Some(SolveStatus::NodeLimit) => "node limit reached",
            Some(SolveStatus::TimeLimit) => "time limit reached",
        };
        let active: Vec<String> = self.active.iter().map(|(g, n)| format!("{g}:{n}")).collect();
        let mut x = String::new();
        for (i, v) in self.x.iter().enumerate() {
            if i > 0 {
                x.push(' ');
            }
            write!(x, "{v:.6}").unwrap();
        }
        let mut out = String::new();
        writeln!(out, "instance    {}", self.instance).unwrap();
        writeln!(out, "mode        {}", self.mode.name()).unwrap();
        writeln!(out, "status      {status}").unwrap();
        writeln!(out, "value       {}", self.optimum).unwrap();
        writeln!(out, "active      {}", active.join(" ")).unwrap();
        writeln!(out, "x           {x}").unwrap();
        writeln!(out, "heuristic   {}", self.heuristic).unwrap();
        writeln!(out, "root bound  {}", self.root_bound).unwrap();
        writeln!(out, "nodes       {}", self.nodes).unwrap();
        writeln!(out, "bound evals {}", self.bound_evals).unwrap();
        writeln!(out, "wall ms     {:.3}", wall_ms(self.wall)).unwrap();
        out
    }

    pub fn row(&self) -> CsvRow {
        CsvRow {
            instance: self.instance.clone(),
            class: self.class.clone(),
            q: self.q,
            mode: self.mode.name().to_string(),
            optimum: self.optimum,
            heuristic: self.heuristic,
            root_bound: self.root_bound,
            nodes: self.nodes as f64,
            bound_evals: self.bound_evals as f64,
            wall_ms: wall_ms(self.wall),
            optimal_flag: if self.is_optimal() { 1.0 } else { 0.0 },
        }
    }
}

pub fn wall_ms(d: Duration) -> f64 {
    d.as_secs_f64() * 1e3
}

/// One line of the benchmark CSV. Summary rows reuse the layout with
/// averaged numbers, `instance` set to `mean` and `optimal_flag` holding
/// the fraction of runs proved optimal.
#[derive(Debug, Clone, Serialize)]
pub struct CsvRow {
    pub instance: String,
    pub class: String,
    pub q: usize,
    pub mode: String,
    pub optimum: f64,
    pub heuristic: f64,
    pub root_bound: f64,
    pub nodes: f64,
    pub bound_evals: f64,
    pub wall_ms: f64,
    pub optimal_flag: f64,
}

#[cfg(test)]
const CSV_COLUMNS: [&str; 11] = [
    "instance",
    "class",
    "q",
    "mode",
    "optimum",
    "heuristic",
    "root_bound",
    "nodes",
    "bound_evals",
    "wall_ms",
    "optimal_flag",
];

/// Averages rows per `(class, q, mode)`, in order of first appearance.
pub fn summarize(rows: &[CsvRow]) -> Vec<CsvRow> {
    let mut keys: Vec<(String, usize, String)> = Vec::new();
    for r in rows {
        let key = (r.class.clone(), r.q, r.mode.clone());
        if !keys.contains(&key) {
            keys.push(key);
        }
    }
    keys.into_iter()
        .map(|(class, q, mode)| {
            let group: Vec<&CsvRow> = rows.iter().filter(|r| r.class == class && r.q == q && r.mode == mode).collect();
            let n = group.len() as f64;
            let mean = |f: fn(&CsvRow) -> f64| group.iter().map(|r| f(r)).sum::<f64>() / n;
            CsvRow {
                instance: "mean".into(),
                class,
                q,
                mode,
                optimum: mean(|r| r.optimum),
                heuristic: mean(|r| r.heuristic),
                root_bound: mean(|r| r.root_bound),
                nodes: mean(|r| r.nodes),
                bound_evals: mean(|r| r.bound_evals),
                wall_ms: mean(|r| r.wall_ms),
                optimal_flag: mean(|r| r.optimal_flag),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(class: &str, q: usize, mode: &str, nodes: f64, optimal: f64) -> CsvRow {
        CsvRow {
            instance: "i".into(),
            class: class.into(),
            q,
            mode: mode.into(),
            optimum: 1.0,
            heuristic: 2.0,
            root_bound: 0.5,
            nodes,
            bound_evals: nodes,
            wall_ms: 1.0,
            optimal_flag: optimal,
        }
    }

    #[test]
    fn summary_groups_in_first_seen_order() {
        let rows = vec![
            row("random", 50, "nary", 10.0, 1.0),
            row("random", 50, "binary", 30.0, 1.0),
            row("random", 50, "nary", 20.0, 0.0),
            row("base", 10, "nary", 5.0, 1.0),
        ];
        let s = summarize(&rows);
        assert_eq!(s.len(), 3);
        assert_eq!((s[0].mode.as_str(), s[0].nodes, s[0].optimal_flag), ("nary", 15.0, 0.5));
        assert_eq!(s[1].mode, "binary");
        assert_eq!(s[2].class, "base");
    }

    #[test]
    fn header_matches_schema() {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.serialize(row("base", 3, "nary", 1.0, 1.0)).unwrap();
        let text = String::from_utf8(w.into_inner().unwrap()).unwrap();
        assert_eq!(text.lines().next().unwrap(), CSV_COLUMNS.join(","));
    }

    #[test]
    fn sandwich_is_checked() {
        let inst = latalloc::instances::generate_base(6).unwrap();
        let r = run(&inst, "b6", "base", Mode::NAry, &Limits::default()).unwrap();
        assert!(r.is_optimal());
        let mut bad = r.clone();
        bad.heuristic = bad.optimum - 1.0;
        assert!(matches!(bad.check_sandwich(), Err(RunError::Sandwich(_))));
    }
}
