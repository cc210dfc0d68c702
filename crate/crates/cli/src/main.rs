//! `monoseq` command-line front end: value tables, verification, Monte Carlo
//! experiments and gap tabulation, all written as CSV.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use monoseq::analysis::GapSummary;
use monoseq::export::{keep_index, write_table_header, write_table_row};
use monoseq::family::{adaptive_family, fixed_width_family, greedy_family, SelectionRule};
use monoseq::format::num;
use monoseq::report::VerificationReport;
use monoseq::simulate::{run_policy, run_unimodal, write_summary_csv, MCSummary, MonteCarlo};
use monoseq::value::{
    build_table, log_gap, lower_bound, optimal_family, origin_values, sweep_rows, upper_bound, GridConfig,
    Retention, TableKind,
};
use monoseq::verify::{run_verification, VerifyConfig};

#[derive(Parser, Debug)]
#[command(name = "monoseq", version, about = "Online monotone subsequence selection: tables, checks and simulation")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Common {
    /// Grid spacing of the value tables; its reciprocal must be an integer.
    #[arg(long, global = true, default_value_t = 1e-4)]
    grid_step: f64,
    /// Largest horizon tabulated.
    #[arg(long, global = true, default_value_t = 10_000)]
    k_max: usize,
    /// Worker threads (default: all cores). Output does not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output CSV path; `-` writes to standard output.
    #[arg(long, short, global = true)]
    output: Option<PathBuf>,
    /// Directory for the default output file `<command>.csv`.
    #[arg(long, global = true, env = "MONOSEQ_OUT_DIR", default_value = ".")]
    out_dir: PathBuf,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Build the adaptive and optimal value tables and export them thinned.
    Tables {
        /// Keep every k-th row (default: about 100 rows).
        #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
        k_stride: Option<u64>,
        /// Keep every s-th grid node (default: about 100 nodes).
        #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
        s_stride: Option<u64>,
    },
    /// Run the numerical verification suite.
    Verify {
        /// Tolerance for grid-precision checks (default: 10 * grid step).
        #[arg(long)]
        tolerance: Option<f64>,
    },
    /// Monte Carlo of one policy, or a single trace with `--values`.
    Simulate {
        #[arg(long, value_enum, default_value_t = Policy::Adaptive)]
        policy: Policy,
        /// Window width of the fixed-width policy.
        #[arg(long, default_value_t = 0.05)]
        width: f64,
        #[command(flatten)]
        run: RunArgs,
        /// Initial state.
        #[arg(long, default_value_t = 0.0)]
        s0: f64,
    },
    /// Tabulate v*_n(0) - v̂_n(0) for n = 1..=k_max.
    Gap,
    /// Increasing then decreasing selection around a turning point.
    Unimodal {
        #[command(flatten)]
        run: RunArgs,
        /// Turning point (default: n / 2).
        #[arg(long)]
        turning: Option<usize>,
    },
}

#[derive(Args, Debug)]
struct RunArgs {
    /// Sample length (default: k_max).
    #[arg(long)]
    n: Option<usize>,
    #[arg(long, default_value_t = 100_000)]
    reps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Replay this comma-separated sequence and write its selection trace.
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    values: Option<Vec<f64>>,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum Policy {
    Adaptive,
    Optimal,
    Greedy,
    FixedWidth,
}

impl Policy {
    fn name(self) -> &'static str {
        match self {
            Policy::Adaptive => "adaptive",
            Policy::Optimal => "optimal",
            Policy::Greedy => "greedy",
            Policy::FixedWidth => "fixed-width",
        }
    }
}

enum Failure {
    Usage(String),
    Verification,
    Io(io::Error),
}

impl From<monoseq::Error> for Failure {
    fn from(e: monoseq::Error) -> Self {
        Failure::Usage(e.to_string())
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Io(e)
    }
}

type Outcome = Result<(), Failure>;

/// CSV sink plus the stream for human-readable summaries, which moves to
/// stderr when the CSV takes stdout.
struct Sink {
    csv: Box<dyn Write>,
    note: Box<dyn Write>,
    path: Option<PathBuf>,
}

impl Sink {
    fn open(common: &Common, name: &str) -> io::Result<Sink> {
        let path = common
            .output
            .clone()
            .unwrap_or_else(|| common.out_dir.join(format!("{name}.csv")));
        if path.as_os_str() == "-" {
            return Ok(Sink {
                csv: Box::new(BufWriter::new(io::stdout())),
                note: Box::new(io::stderr()),
                path: None,
            });
        }
        let file = File::create(&path)?;
        Ok(Sink {
            csv: Box::new(BufWriter::new(file)),
            note: Box::new(io::stdout()),
            path: Some(path),
        })
    }

    fn finish(mut self) -> io::Result<()> {
        self.csv.flush()?;
        if let Some(p) = &self.path {
            writeln!(self.note, "wrote {}", p.display())?;
        }
        Ok(())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Verification) => ExitCode::from(1),
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Io(e)) => {
            eprintln!("I/O error: {e}");
            ExitCode::from(3)
        }
    }
}

fn run(cli: &Cli) -> Outcome {
    let common = &cli.common;
    if let Some(t) = common.threads {
        if t == 0 {
            return Err(Failure::Usage("--threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| Failure::Usage(e.to_string()))?;
    }
    let grid = GridConfig::new(common.grid_step, common.k_max)?;
    match &cli.command {
        Command::Tables { k_stride, s_stride } => cmd_tables(common, &grid, *k_stride, *s_stride),
        Command::Verify { tolerance } => cmd_verify(common, &grid, *tolerance),
        Command::Simulate { policy, width, run, s0 } => cmd_simulate(common, &grid, *policy, *width, run, *s0),
        Command::Gap => cmd_gap(common, &grid),
        Command::Unimodal { run, turning } => cmd_unimodal(common, run, *turning),
    }
}

fn cmd_tables(common: &Common, grid: &GridConfig, k_stride: Option<u64>, s_stride: Option<u64>) -> Outcome {
    let k_max = grid.k_max();
    let k_stride = k_stride.map_or(k_max.div_ceil(100).max(1), |v| v as usize);
    let s_stride = s_stride.map_or((grid.intervals() / 100).max(1), |v| v as usize);
    let mut sink = Sink::open(common, "tables")?;
    write_table_header(&mut sink.csv)?;
    let mut at_origin = [0.0; 2];
    for (slot, kind) in [TableKind::Adaptive, TableKind::Optimal].into_iter().enumerate() {
        let mut io_error = None;
        let mut visit = |k: usize, values: &[f64]| {
            if k == k_max {
                at_origin[slot] = values[0];
            }
            if io_error.is_none() && keep_index(k, k_max, k_stride) {
                if let Err(e) = write_table_row(&mut sink.csv, kind, k, values, grid, s_stride) {
                    io_error = Some(e);
                }
            }
        };
        let zeros = vec![0.0; grid.nodes()];
        visit(0, &zeros);
        sweep_rows(kind, grid, |row| {
            visit(row.k, row.values);
            Ok(())
        })?;
        if let Some(e) = io_error {
            return Err(e.into());
        }
    }
    let [v_hat, v_opt] = at_origin;
    let upper = upper_bound(k_max, 0.0)?;
    let lower = lower_bound(k_max, 0.0)?;
    writeln!(sink.note, "n = {k_max}, grid step = {}, eps = {}", num(grid.step()), num(grid.tolerance()))?;
    writeln!(sink.note, "lower bound sqrt(2n) - 2(log n + 1) = {}", num(lower))?;
    writeln!(sink.note, "adaptive v_n(0)                   = {}", num(v_hat))?;
    writeln!(sink.note, "optimal  v_n(0)                   = {}", num(v_opt))?;
    writeln!(sink.note, "upper bound sqrt(2n)              = {}", num(upper))?;
    sink.finish()?;
    Ok(())
}

fn cmd_verify(common: &Common, grid: &GridConfig, tolerance: Option<f64>) -> Outcome {
    let mut cfg = VerifyConfig::new(*grid);
    if let Some(t) = tolerance {
        if t.is_nan() || t < 0.0 {
            return Err(Failure::Usage(format!("--tolerance must be nonnegative, got {t}")));
        }
        cfg.tolerance = t;
    }
    let report = run_verification(&cfg)?;
    let mut sink = Sink::open(common, "verify")?;
    report.write_csv(&mut sink.csv)?;
    let failed = report.failures().count();
    writeln!(sink.note, "{} checks, {} failed", report.rows.len(), failed)?;
    sink.finish()?;
    if failed > 0 {
        print_failures(&report);
        return Err(Failure::Verification);
    }
    Ok(())
}

fn print_failures(report: &VerificationReport) {
    let failing = VerificationReport {
        rows: report.failures().cloned().collect(),
    };
    let mut err = io::stderr().lock();
    let _ = writeln!(err, "failing checks:");
    let _ = failing.write_csv(&mut err);
}

fn horizon(run: &RunArgs, fallback: usize) -> Result<usize, Failure> {
    match (&run.values, run.n) {
        (Some(v), Some(n)) if v.len() != n => Err(Failure::Usage(format!(
            "--n {n} does not match the {} values given",
            v.len()
        ))),
        (Some(v), _) => Ok(v.len()),
        (None, n) => Ok(n.unwrap_or(fallback)),
    }
}

fn bracket(n: usize, s0: f64) -> Result<(f64, f64), Failure> {
    Ok((lower_bound(n, s0)?, upper_bound(n, s0)?))
}

fn cmd_simulate(common: &Common, grid: &GridConfig, policy: Policy, width: f64, run: &RunArgs, s0: f64) -> Outcome {
    let n = horizon(run, grid.k_max())?;
    match policy {
        Policy::Adaptive => simulate_with(common, &adaptive_family(), policy, run, n, s0),
        Policy::Greedy => simulate_with(common, &greedy_family(), policy, run, n, s0),
        Policy::FixedWidth => simulate_with(common, &fixed_width_family(width)?, policy, run, n, s0),
        Policy::Optimal => {
            let table = build_table(TableKind::Optimal, &grid.with_k_max(n)?, Retention::LastTwo)?;
            simulate_with(common, &optimal_family(&table)?, policy, run, n, s0)
        }
    }
}

fn simulate_with<R: SelectionRule>(common: &Common, rule: &R, policy: Policy, run: &RunArgs, n: usize, s0: f64) -> Outcome {
    if let Some(values) = &run.values {
        let trace = run_policy(rule, values, s0)?;
        let mut sink = Sink::open(common, "trace")?;
        trace.write_csv(&mut sink.csv)?;
        writeln!(sink.note, "{} selected {} of {}", policy.name(), trace.count(), n)?;
        sink.finish()?;
        return Ok(());
    }
    let summary = MonteCarlo::new(n, run.reps, run.seed).with_s0(s0).simulate(rule)?;
    let mut sink = Sink::open(common, "simulate")?;
    write_summary_csv(&mut sink.csv, &[(policy.name(), &summary)])?;
    let (lower, upper) = bracket(n, s0)?;
    print_summary(&mut sink.note, policy.name(), &summary)?;
    writeln!(sink.note, "bracket [{}, {}]", num(lower), num(upper))?;
    sink.finish()?;
    Ok(())
}

fn print_summary(out: &mut dyn Write, policy: &str, s: &MCSummary) -> io::Result<()> {
    writeln!(
        out,
        "{policy}: n = {}, reps = {}, mean = {} ± {} (SE)",
        s.n,
        s.reps,
        num(s.mean),
        num(s.std_error)
    )?;
    writeln!(out, "standardized: mean = {}, variance = {}", num(s.clt_mean), num(s.clt_var))
}

fn cmd_gap(common: &Common, grid: &GridConfig) -> Outcome {
    let v_opt = origin_values(TableKind::Optimal, grid)?;
    let v_hat = origin_values(TableKind::Adaptive, grid)?;
    let summary = GapSummary::from_origin_series(&v_opt, &v_hat);
    let mut sink = Sink::open(common, "gap")?;
    summary.write_csv(&mut sink.csv)?;
    if let Some((n, gap)) = summary.max_gap() {
        writeln!(
            sink.note,
            "max gap over n <= {} is {} at n = {} (log bound there {})",
            grid.k_max(),
            num(gap),
            n,
            num(log_gap(n))
        )?;
    }
    sink.finish()?;
    let report = VerificationReport {
        rows: summary.check_rows(grid.tolerance()),
    };
    if !report.all_pass() {
        print_failures(&report);
        return Err(Failure::Verification);
    }
    Ok(())
}

fn cmd_unimodal(common: &Common, run: &RunArgs, turning: Option<usize>) -> Outcome {
    let n = horizon(run, common.k_max)?;
    if let Some(values) = &run.values {
        let trace = run_unimodal(values, turning)?;
        let mut sink = Sink::open(common, "trace")?;
        trace.write_csv(&mut sink.csv)?;
        writeln!(
            sink.note,
            "unimodal selected {} of {} (turning point {})",
            trace.count(),
            n,
            trace.turning
        )?;
        sink.finish()?;
        return Ok(());
    }
    let summary = MonteCarlo::new(n, run.reps, run.seed).simulate_unimodal(turning)?;
    let mut sink = Sink::open(common, "unimodal")?;
    write_summary_csv(&mut sink.csv, &[("unimodal", &summary)])?;
    print_summary(&mut sink.note, "unimodal", &summary)?;
    let first = turning.unwrap_or(n / 2);
    let (mut lower, mut upper) = (0.0, 0.0);
    for (label, m) in [("increasing", first), ("decreasing", n - first)] {
        if m == 0 {
            continue;
        }
        let (lo, hi) = bracket(m, 0.0)?;
        writeln!(sink.note, "{label} segment of {m}: bracket [{}, {}]", num(lo), num(hi))?;
        lower += lo;
        upper += hi;
    }
    writeln!(sink.note, "sum of brackets [{}, {}]", num(lower), num(upper))?;
    sink.finish()?;
    Ok(())
}
