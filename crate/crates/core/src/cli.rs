//! The `distill` command-line front end.
//!
//! Subcommands write either a plain-text report or CSV. Exit codes: 0 on
//! success, 1 when oracle verification fails, 2 on usage or domain errors,
//! 3 when the exact evaluator's size cap is exceeded.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::bell::{
    avg_fidelity_single_conditional, avg_fidelity_single_locc, distill_step, fidelity,
    is_distillable, werner, BellDiagonalState, NORMALIZATION_TOL,
};
use crate::ensemble::{n_min, round_up_even, UnsuccessfulConvention};
use crate::error::Error;
use crate::iterative::{
    expected_fidelity_exact, expected_fidelity_mc, expected_fidelity_mc_threads,
    fully_successful_fidelity, sweep_over_fidelity, IterationPolicy,
};
use crate::oracle::{sample_simplex, verify_against, RotationConvention, EQUIVALENCE_TOL};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VERIFY_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_RESOURCE: i32 = 3;

/// Hand-typed states may miss unit total by at most this much.
pub const INPUT_SUM_TOL: f64 = 1e-9;

const SIG_DIGITS: usize = 12;

#[derive(Debug, Parser)]
#[command(name = "distill", version, about = "Iterative CNOT entanglement distillation on finite samples")]
pub struct Cli {
    #[command(flatten)]
    pub common: CommonArgs,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// Master seed for every random stream.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,

    /// Output file (default: standard output).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    #[arg(long, global = true, value_enum, default_value_t = PolicyArg::Backup)]
    pub policy: PolicyArg,

    #[arg(long, global = true, value_enum, default_value_t = MethodArg::Exact)]
    pub method: MethodArg,

    /// Monte Carlo trajectories.
    #[arg(long, global = true, default_value_t = 100_000)]
    pub trials: usize,

    /// Fidelity assigned to an all-failed round.
    #[arg(long, global = true, value_enum, default_value_t = FuArg::Locc)]
    pub fu: FuArg,

    /// Keep distilling when two pairs remain and no backup is held.
    #[arg(long, global = true)]
    pub no_stop_at_two: bool,
}

impl CommonArgs {
    pub fn iteration_policy(&self) -> IterationPolicy {
        IterationPolicy {
            stop_at_two: !self.no_stop_at_two,
            ..self.policy.into()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PolicyArg {
    Backup,
    Nobackup,
    DropEven,
}

impl From<PolicyArg> for IterationPolicy {
    fn from(p: PolicyArg) -> Self {
        match p {
            PolicyArg::Backup => IterationPolicy::backup(),
            PolicyArg::Nobackup => IterationPolicy::no_backup(),
            PolicyArg::DropEven => IterationPolicy::drop_even(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Exact,
    Mc,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FuArg {
    Locc,
    Conditional,
}

impl From<FuArg> for UnsuccessfulConvention {
    fn from(f: FuArg) -> Self {
        match f {
            FuArg::Locc => UnsuccessfulConvention::LoccFloor,
            FuArg::Conditional => UnsuccessfulConvention::Conditional,
        }
    }
}

#[derive(Debug, Clone, Copy, Args)]
pub struct GridArgs {
    #[arg(long, default_value_t = 0.505)]
    pub start: f64,
    #[arg(long, default_value_t = 0.995)]
    pub stop: f64,
    #[arg(long, default_value_t = 0.005)]
    pub step: f64,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Single-step quantities for one Bell-diagonal state (Φ⁺ Ψ⁻ Ψ⁺ Φ⁻).
    Step {
        #[arg(num_args = 4, allow_negative_numbers = true, value_names = ["A", "B", "C", "D"])]
        coeffs: Vec<f64>,
    },
    /// Minimal sample size over a Werner-state sweep, as CSV.
    Nmin {
        #[command(flatten)]
        grid: GridArgs,
    },
    /// Average output fidelity of the iterative scheme.
    Iterate {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        a0: f64,
        /// Worker threads for Monte Carlo (default: all cores).
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Relative average fidelity against the Werner input fidelity, as CSV.
    Fig3 {
        #[arg(long, value_delimiter = ',', default_values_t = [4usize, 5, 6])]
        n_list: Vec<usize>,
        #[command(flatten)]
        grid: GridArgs,
    },
    /// Average fidelity against sample size at fixed input, as CSV.
    Fig4 {
        #[arg(long, default_value_t = 0.75)]
        a0: f64,
        #[arg(long, default_value_t = 3)]
        n_start: usize,
        #[arg(long, default_value_t = 40)]
        n_stop: usize,
    },
    /// Compare the closed-form step against the gate-level simulation.
    VerifyOracle {
        #[arg(long, default_value_t = 1000)]
        samples: usize,
        /// Additional state checked before the random samples.
        #[arg(long)]
        state: Option<BellDiagonalState>,
        /// Perturb the closed-form success probability (negative control).
        #[arg(long, hide = true)]
        inject_fault: Option<f64>,
    },
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Resource(String),
    Io(io::Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::ExactCapExceeded { .. } => CliError::Resource(e.to_string()),
            other => CliError::Usage(other.to_string()),
        }
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Io(e)
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Io(_) => EXIT_USAGE,
            CliError::Resource(_) => EXIT_RESOURCE,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(msg) => write!(f, "error: {msg}"),
            CliError::Resource(msg) => write!(f, "error: {msg}"),
            CliError::Io(e) => write!(f, "error: {e}"),
        }
    }
}

/// Renders `x` with 12 significant digits and a `.` decimal point.
pub fn format_sig(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{:.*}", SIG_DIGITS - 1, x);
    }
    let magnitude = x.abs().log10().floor() as i64;
    let decimals = (SIG_DIGITS as i64 - 1 - magnitude).max(0) as usize;
    format!("{x:.decimals$}")
}

/// Header plus rows of optional numeric cells.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Cell {
    Int(usize),
    Float(f64),
    Empty,
}

impl From<Option<f64>> for Cell {
    fn from(x: Option<f64>) -> Self {
        x.map_or(Cell::Empty, Cell::Float)
    }
}

impl CsvTable {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Self {
            header: header.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.header.len(), "row arity");
        self.rows.push(row);
    }

    pub fn render(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row
                .iter()
                .map(|c| match c {
                    Cell::Int(n) => n.to_string(),
                    Cell::Float(x) => format_sig(*x),
                    Cell::Empty => String::new(),
                })
                .collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }
}

/// Inclusive grid `start, start + step, …` up to `stop`.
pub fn grid(g: GridArgs) -> Result<Vec<f64>, Error> {
    let GridArgs { start, stop, step } = g;
    if !(step > 0.0) || !(start < stop) || !start.is_finite() || !stop.is_finite() {
        return Err(Error::InvalidGrid { start, stop, step });
    }
    let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
    Ok((0..count).map(|i| start + i as f64 * step).collect())
}

/// Validates hand-typed coefficients: nonnegative, within 1e-9 of unit
/// total, renormalized with a warning beyond 1e-12.
pub fn parse_state_input(coeffs: &[f64], warnings: &mut Vec<String>) -> Result<BellDiagonalState, CliError> {
    let arr: [f64; 4] = coeffs
        .try_into()
        .map_err(|_| CliError::Usage("expected four coefficients".into()))?;
    if arr.iter().any(|x| !x.is_finite() || *x < 0.0) {
        return Err(CliError::Usage(format!(
            "coefficients must be nonnegative numbers, got {arr:?}"
        )));
    }
    let sum: f64 = arr.iter().sum();
    if (sum - 1.0).abs() > INPUT_SUM_TOL {
        return Err(CliError::Usage(format!("coefficients sum to {sum}, expected 1")));
    }
    let arr = if (sum - 1.0).abs() > NORMALIZATION_TOL {
        warnings.push(format!("coefficients sum to {sum}; renormalized"));
        arr.map(|x| x / sum)
    } else {
        arr
    };
    Ok(BellDiagonalState::from_array(arr)?)
}

pub fn cmd_step(
    s: &BellDiagonalState,
    conv: UnsuccessfulConvention,
) -> String {
    let out = distill_step(s);
    let mut r = String::new();
    let mut line = |k: &str, v: String| r.push_str(&format!("{k}: {v}\n"));
    line("state", format!("{s:.12}"));
    line("fidelity", format_sig(fidelity(s)));
    line("distillable", is_distillable(s).to_string());
    line("p_success", format_sig(out.p_success));
    line("success_state", format!("{:.12}", out.success_state));
    line(
        "failure_state",
        if out.failure_reachable {
            format!("{:.12}", out.failure_state)
        } else {
            format!("{:.12} (unreachable)", out.failure_state)
        },
    );
    line("fidelity_success", format_sig(fidelity(&out.success_state)));
    line("fidelity_failure", format_sig(fidelity(&out.failure_state)));
    line("avg_fidelity_locc", format_sig(avg_fidelity_single_locc(s)));
    line(
        "avg_fidelity_conditional",
        format_sig(avg_fidelity_single_conditional(s)),
    );
    let label = match conv {
        UnsuccessfulConvention::LoccFloor => "n_min_locc",
        UnsuccessfulConvention::Conditional => "n_min_conditional",
    };
    match n_min(s, conv) {
        Ok(n) => line(label, format!("{} (even: {})", format_sig(n), round_up_even(n))),
        Err(e) => line(label, format!("n/a ({e})")),
    }
    if !is_distillable(s) {
        r.push_str("note: not distillable (no coefficient exceeds 1/2)\n");
    }
    r
}

pub fn cmd_nmin(g: GridArgs) -> Result<CsvTable, Error> {
    let mut table = CsvTable::new([
        "A",
        "nmin_locc",
        "nmin_locc_even",
        "nmin_conditional",
        "nmin_conditional_even",
    ]);
    for a in grid(g)? {
        let s = werner(a)?;
        let mut row = vec![Cell::Float(a)];
        for conv in [UnsuccessfulConvention::LoccFloor, UnsuccessfulConvention::Conditional] {
            match n_min(&s, conv) {
                Ok(n) => {
                    row.push(Cell::Float(n));
                    row.push(Cell::Int(round_up_even(n)));
                }
                Err(_) => row.extend([Cell::Empty, Cell::Empty]),
            }
        }
        table.push(row);
    }
    Ok(table)
}

pub fn cmd_iterate(
    n: usize,
    a0: f64,
    policy: IterationPolicy,
    method: MethodArg,
    trials: usize,
    seed: u64,
    threads: Option<usize>,
) -> Result<String, Error> {
    let s0 = werner(a0)?;
    let mut r = String::new();
    r.push_str(&format!("n: {n}\nA0: {}\n", format_sig(a0)));
    match method {
        MethodArg::Exact => {
            let e = expected_fidelity_exact(n, &s0, &policy)?;
            r.push_str(&format!("mean_fidelity: {}\n", format_sig(e)));
        }
        MethodArg::Mc => {
            let stats = match threads {
                Some(t) => expected_fidelity_mc_threads(n, &s0, &policy, trials, seed, t)?,
                None => expected_fidelity_mc(n, &s0, &policy, trials, seed)?,
            };
            r.push_str(&format!(
                "trials: {}\nmean_fidelity: {}\nstd_error: {}\nfailure_rate: {}\n",
                stats.trials,
                format_sig(stats.mean_fidelity),
                format_sig(stats.std_error),
                format_sig(stats.failure_rate)
            ));
        }
    }
    r.push_str(&format!(
        "fully_successful: {}\n",
        format_sig(fully_successful_fidelity(n, &s0))
    ));
    Ok(r)
}

pub fn cmd_fig3(n_list: &[usize], g: GridArgs, policy: IterationPolicy) -> Result<CsvTable, Error> {
    let a_values = grid(g)?;
    let mut header = vec!["A0".to_string()];
    header.extend(n_list.iter().map(|n| format!("ratio_N{n}")));
    let mut table = CsvTable::new(header);
    let columns = n_list
        .iter()
        .map(|&n| sweep_over_fidelity(n, &a_values, &policy))
        .collect::<Result<Vec<_>, _>>()?;
    for (i, &a0) in a_values.iter().enumerate() {
        let mut row = vec![Cell::Float(a0)];
        row.extend(columns.iter().map(|col| Cell::Float(col[i].ratio)));
        table.push(row);
    }
    Ok(table)
}

/// `stop_at_two` applies to both the backup and the no-backup curve.
pub fn cmd_fig4(a0: f64, n_start: usize, n_stop: usize, stop_at_two: bool) -> Result<CsvTable, Error> {
    if n_start == 0 || n_start > n_stop {
        return Err(Error::InvalidGrid {
            start: n_start as f64,
            stop: n_stop as f64,
            step: 1.0,
        });
    }
    let s0 = werner(a0)?;
    let no_backup = IterationPolicy {
        stop_at_two,
        ..IterationPolicy::no_backup()
    };
    let backup = IterationPolicy {
        stop_at_two,
        ..IterationPolicy::backup()
    };
    let mut table = CsvTable::new(["N", "nobackup", "backup", "fully_successful"]);
    for n in n_start..=n_stop {
        table.push(vec![
            Cell::Int(n),
            Cell::Float(expected_fidelity_exact(n, &s0, &no_backup)?),
            Cell::Float(expected_fidelity_exact(n, &s0, &backup)?),
            Cell::Float(fully_successful_fidelity(n, &s0)),
        ]);
    }
    Ok(table)
}

/// Returns the report and whether every deviation is below tolerance.
pub fn cmd_verify_oracle(
    samples: usize,
    seed: u64,
    state: Option<BellDiagonalState>,
    inject_fault: Option<f64>,
) -> Result<(String, bool), Error> {
    use rand::SeedableRng;
    if samples == 0 && state.is_none() {
        return Err(Error::NoTrials);
    }
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let states: Vec<BellDiagonalState> = state
        .into_iter()
        .chain((0..samples).map(|_| sample_simplex(&mut rng)))
        .collect();
    let fault = inject_fault.unwrap_or(0.0);
    let report = verify_against(states, RotationConvention::default(), |s| {
        let mut out = distill_step(s);
        out.p_success += fault;
        out
    })?;
    let passed = report.passed();
    let mut r = format!(
        "samples: {}\nmax_p_deviation: {:e}\nmax_success_deviation: {:e}\nmax_failure_deviation: {:e}\ntolerance: {:e}\n",
        report.samples,
        report.max_p_deviation,
        report.max_success_deviation,
        report.max_failure_deviation,
        EQUIVALENCE_TOL,
    );
    if passed {
        r.push_str("result: PASS\n");
    } else {
        if let Some(w) = report.worst_state {
            r.push_str(&format!("worst_state: {w:.15}\n"));
        }
        r.push_str("result: FAIL\n");
    }
    Ok((r, passed))
}

fn open_output(out: &Option<PathBuf>) -> io::Result<Box<dyn Write>> {
    Ok(match out {
        Some(path) => Box::new(BufWriter::new(File::create(path)?)),
        None => Box::new(io::stdout().lock()),
    })
}

/// Runs a parsed command, writing warnings to `stderr`. Returns the exit code.
pub fn run(cli: Cli, stderr: &mut dyn Write) -> i32 {
    match execute(cli, stderr) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(stderr, "{e}");
            if let CliError::Resource(_) = e {
                let _ = writeln!(stderr, "hint: rerun with --method mc");
            }
            e.exit_code()
        }
    }
}

fn execute(cli: Cli, stderr: &mut dyn Write) -> Result<i32, CliError> {
    let common = cli.common;
    let policy = common.iteration_policy();
    let (text, code) = match cli.command {
        Command::Step { coeffs } => {
            let mut warnings = Vec::new();
            let s = parse_state_input(&coeffs, &mut warnings)?;
            for w in warnings {
                writeln!(stderr, "warning: {w}")?;
            }
            (cmd_step(&s, common.fu.into()), EXIT_OK)
        }
        Command::Nmin { grid } => (cmd_nmin(grid)?.render(), EXIT_OK),
        Command::Iterate { n, a0, threads } => (
            cmd_iterate(n, a0, policy, common.method, common.trials, common.seed, threads)?,
            EXIT_OK,
        ),
        Command::Fig3 { n_list, grid } => (cmd_fig3(&n_list, grid, policy)?.render(), EXIT_OK),
        Command::Fig4 { a0, n_start, n_stop } => (
            cmd_fig4(a0, n_start, n_stop, policy.stop_at_two)?.render(),
            EXIT_OK,
        ),
        Command::VerifyOracle {
            samples,
            state,
            inject_fault,
        } => {
            let (text, passed) = cmd_verify_oracle(samples, common.seed, state, inject_fault)?;
            (text, if passed { EXIT_OK } else { EXIT_VERIFY_FAILED })
        }
    };
    let mut out = open_output(&common.out)?;
    out.write_all(text.as_bytes())?;
    out.flush()?;
    Ok(code)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn significant_digit_formatting() {
        assert_eq!(format_sig(0.722222222222222), "0.722222222222");
        assert_eq!(format_sig(3.14629), "3.14629000000");
        assert_eq!(format_sig(12.5), "12.5000000000");
        assert_eq!(format_sig(0.0), "0.00000000000");
        assert_eq!(format_sig(0.00123), "0.00123000000000");
    }

    #[test]
    fn grid_is_inclusive() {
        let g = grid(GridArgs { start: 0.505, stop: 0.995, step: 0.005 }).unwrap();
        assert_eq!(g.len(), 99);
        assert!((g[98] - 0.995).abs() < 1e-12);
        assert!(grid(GridArgs { start: 0.5, stop: 0.4, step: 0.1 }).is_err());
        assert!(grid(GridArgs { start: 0.5, stop: 0.6, step: 0.0 }).is_err());
    }

    #[test]
    fn csv_render_shape() {
        let mut t = CsvTable::new(["x", "y", "z"]);
        t.push(vec![Cell::Int(3), Cell::Float(0.5), Cell::Empty]);
        assert_eq!(t.render(), "x,y,z\n3,0.500000000000,\n");
    }

    #[test]
    fn state_input_validation() {
        let mut w = Vec::new();
        assert!(parse_state_input(&[0.25, 0.25, 0.25, 0.25], &mut w).is_ok());
        assert!(w.is_empty());
        let s = parse_state_input(&[0.75, 0.0833333333, 0.0833333333, 0.0833333333], &mut w).unwrap();
        assert_eq!(w.len(), 1);
        assert!((s.coefficients().iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert!(parse_state_input(&[0.5, 0.5, 0.1, 0.0], &mut w).is_err());
        assert!(parse_state_input(&[1.1, -0.1, 0.0, 0.0], &mut w).is_err());
    }

    #[test]
    fn step_report_contents() {
        let r = cmd_step(&werner(0.75).unwrap(), UnsuccessfulConvention::LoccFloor);
        assert!(r.contains("p_success: 0.722222222222"));
        assert!(r.contains("fidelity_success: 0.788461538462"));
        let r = cmd_step(&BellDiagonalState::new(0.2, 0.3, 0.3, 0.2).unwrap(), UnsuccessfulConvention::LoccFloor);
        assert!(r.contains("not distillable"));
    }
}
