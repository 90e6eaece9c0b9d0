//! Command-line front end.
//!
//! Exit codes: 0 on success, 2 for invalid arguments, 1 for runtime failures.

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;

use crate::analysis::{
    no_coordination_bound, no_coordination_probability_iid, spectral_efficiency_bound,
};
use crate::channel::{
    sample_channels, sigma2_from_snr_db, ChannelRealization, GameConfig, Player,
    DEFAULT_BLOCK_LEN, DEFAULT_RATE, DEFAULT_SNR_DB,
};
use crate::efficiency::{solve_gamma_star, EfficiencyModel, GammaStar};
use crate::equilibrium::{
    leader_candidates, nash_solve, oracle_stackelberg, stackelberg_solve, EquilibriumKind,
    EquilibriumOutcome, LeaderCandidates, OracleGrid, DEFAULT_EPSILON,
};
use crate::simulator::{format_number, run_sweep, SolverSet, SweepSpec, SweepVariable};

/// Relative utility gap reported as acceptable by `oracle-compare`.
pub const ORACLE_GAP_TOLERANCE: f64 = 0.005;
/// Environment variable capping the number of worker threads.
pub const THREADS_ENV: &str = "CARRIERGAME_THREADS";

#[derive(Debug)]
pub enum CliError {
    /// Invalid arguments (exit code 2).
    Usage(String),
    /// Failure while running a valid command (exit code 1).
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Runtime(m) => f.write_str(m),
        }
    }
}

fn usage(e: impl std::fmt::Display) -> CliError {
    CliError::Usage(e.to_string())
}

fn runtime(e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(e.to_string())
}

#[derive(Debug, Parser)]
#[command(
    name = "carriergame",
    version,
    about = "Energy-efficient power control games on two users and K carriers"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve the game for one gain realization.
    Solve(SolveArgs),
    /// Monte Carlo sweep over K, SNR or correlation.
    Sweep(SweepArgs),
    /// Tabulate the no-coordination and spectral-efficiency bounds over K.
    Bound(BoundArgs),
    /// Compare the closed-form leader utility against a grid search.
    OracleCompare(OracleArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Game {
    Stackelberg,
    Nash,
    Both,
}

#[derive(Debug, Clone, Args)]
pub struct OutputArgs {
    /// Output file (standard output if omitted).
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

#[derive(Debug, Clone, Args)]
pub struct ModelArgs {
    /// Block length M of the efficiency function (1 - e^{-x})^M.
    #[arg(long = "M", default_value_t = DEFAULT_BLOCK_LEN)]
    pub block_len: u32,
    /// Signal-to-noise ratio in dB; the noise variance is 10^{-SNR/10}.
    #[arg(long, default_value_t = DEFAULT_SNR_DB, allow_negative_numbers = true)]
    pub snr_db: f64,
    /// Rate of user 1 in bit/s.
    #[arg(long, default_value_t = DEFAULT_RATE)]
    pub rate1: f64,
    /// Rate of user 2 in bit/s.
    #[arg(long, default_value_t = DEFAULT_RATE)]
    pub rate2: f64,
}

impl ModelArgs {
    fn model(&self) -> Result<(EfficiencyModel, GammaStar), CliError> {
        let model = EfficiencyModel::exp_block(self.block_len).map_err(usage)?;
        let gs = solve_gamma_star(&model).map_err(runtime)?;
        Ok((model, gs))
    }

    fn config(&self, carriers: usize, theta: f64) -> Result<(GameConfig, GammaStar), CliError> {
        let (model, gs) = self.model()?;
        let config = GameConfig::new(
            carriers,
            sigma2_from_snr_db(self.snr_db),
            [self.rate1, self.rate2],
            theta,
            model,
        )
        .map_err(usage)?;
        Ok((config, gs))
    }
}

#[derive(Debug, Clone, Args)]
pub struct SolveArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Gains as "g1_1,...,g1_K;g2_1,...,g2_K".
    #[arg(long, conflicts_with = "gains_file", required_unless_present = "gains_file")]
    pub gains: Option<String>,
    /// File with two lines of K whitespace-separated gains (user 1, user 2).
    #[arg(long)]
    pub gains_file: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Game::Stackelberg)]
    pub game: Game,
    /// Also run the grid-search oracle for the hierarchical game.
    #[arg(long)]
    pub oracle: bool,
    /// Target of the vanishing-power ε-equilibrium.
    #[arg(long, default_value_t = DEFAULT_EPSILON)]
    pub epsilon: f64,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Number of carriers (when not swept).
    #[arg(long = "K", default_value_t = 4)]
    pub carriers: usize,
    /// Inter-user fading correlation in [0, 1] (when not swept).
    #[arg(long, default_value_t = 0.0)]
    pub theta: f64,
    #[arg(long, default_value_t = 10_000)]
    pub trials: u64,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// Swept variable: K, snr_db or theta.
    #[arg(long = "var", value_parser = parse_variable)]
    pub variable: SweepVariable,
    /// Comma-separated, strictly increasing values.
    #[arg(long, value_delimiter = ',', num_args = 1.., allow_negative_numbers = true, required = true)]
    pub values: Vec<f64>,
    #[command(flatten)]
    pub output: OutputArgs,
}

fn parse_variable(s: &str) -> Result<SweepVariable, String> {
    s.parse().map_err(|e: crate::simulator::SimulatorError| e.to_string())
}

#[derive(Debug, Clone, Args)]
pub struct BoundArgs {
    #[arg(long = "M", default_value_t = DEFAULT_BLOCK_LEN)]
    pub block_len: u32,
    /// Carrier counts: an inclusive range "a..b" or a comma-separated list.
    #[arg(long = "K", default_value = "1..32")]
    pub carriers: String,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct OracleArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long = "K", default_value_t = 4)]
    pub carriers: usize,
    #[arg(long, default_value_t = 0.0)]
    pub theta: f64,
    /// Number of random instances.
    #[arg(long, default_value_t = 1000)]
    pub trials: u64,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// Oracle grid density.
    #[arg(long, default_value_t = OracleGrid::default().points_per_decade)]
    pub points_per_decade: usize,
    #[command(flatten)]
    pub output: OutputArgs,
}

/// Parses `args` (including the program name), runs the command and writes
/// results to `--out` or `stdout`.
pub fn run<I, T>(args: I, stdout: &mut dyn Write) -> Result<(), CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        // --help and --version are reported as "errors" with exit code 0.
        Err(e) if e.exit_code() == 0 => {
            return write!(stdout, "{}", e.render()).map_err(runtime);
        }
        Err(e) => return Err(CliError::Usage(e.render().to_string())),
    };
    match cli.command {
        Command::Solve(a) => solve(&a, stdout),
        Command::Sweep(a) => sweep(&a, stdout),
        Command::Bound(a) => bound(&a, stdout),
        Command::OracleCompare(a) => oracle_compare(&a, stdout),
    }
}

/// Entry point used by the binary: applies the thread cap, runs the command
/// and maps the outcome to an exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    if let Err(e) = configure_threads() {
        eprintln!("error: {e}");
        return e.exit_code();
    }
    let stdout = io::stdout();
    let mut lock = stdout.lock();
    match run(args, &mut lock) {
        Ok(()) => 0,
        Err(e) => {
            let text = e.to_string();
            if text.starts_with("error:") {
                eprint!("{text}");
            } else {
                eprintln!("error: {text}");
            }
            e.exit_code()
        }
    }
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(value) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let threads: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| usage(format!("{THREADS_ENV} must be a positive integer, got '{value}'")))?;
    // A global pool may already exist when embedded; the cap then cannot apply.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    Ok(())
}

fn open_output<'a>(
    output: &OutputArgs,
    stdout: &'a mut dyn Write,
) -> Result<Box<dyn Write + 'a>, CliError> {
    match &output.out {
        Some(path) => {
            let file = File::create(path)
                .map_err(|e| runtime(format!("cannot create {}: {e}", path.display())))?;
            Ok(Box::new(BufWriter::new(file)))
        }
        None => Ok(Box::new(stdout)),
    }
}

fn write_json<T: Serialize>(value: &T, out: &mut dyn Write) -> Result<(), CliError> {
    serde_json::to_writer_pretty(&mut *out, value).map_err(runtime)?;
    writeln!(out).map_err(runtime)
}

fn write_csv(header: &[&str], rows: &[Vec<String>], out: &mut dyn Write) -> Result<(), CliError> {
    let mut writer = csv::Writer::from_writer(out);
    writer.write_record(header).map_err(runtime)?;
    for row in rows {
        writer.write_record(row).map_err(runtime)?;
    }
    writer.flush().map_err(runtime)
}

/// Parses "a,b,...;c,d,..." into two gain rows.
pub fn parse_inline_gains(text: &str) -> Result<[Vec<f64>; 2], CliError> {
    let rows: Vec<&str> = text.split(';').collect();
    parse_rows(&rows, |row| row.split(',').collect())
}

/// Parses two non-empty lines of whitespace-separated gains.
pub fn parse_gains_file(text: &str) -> Result<[Vec<f64>; 2], CliError> {
    let rows: Vec<&str> = text.lines().filter(|l| !l.trim().is_empty()).collect();
    parse_rows(&rows, |row| row.split_whitespace().collect())
}

fn parse_rows(rows: &[&str], split: impl Fn(&str) -> Vec<&str>) -> Result<[Vec<f64>; 2], CliError> {
    if rows.len() != 2 {
        return Err(usage(format!("expected gains for 2 users, got {} rows", rows.len())));
    }
    let parse = |row: &str| -> Result<Vec<f64>, CliError> {
        split(row)
            .into_iter()
            .map(|t| t.trim().parse::<f64>().map_err(|_| usage(format!("invalid gain '{}'", t.trim()))))
            .collect()
    };
    Ok([parse(rows[0])?, parse(rows[1])?])
}

/// Parses "a..b" (inclusive) or "a,b,c" into carrier counts.
pub fn parse_carrier_range(text: &str) -> Result<Vec<usize>, CliError> {
    let int = |s: &str| {
        s.trim()
            .parse::<usize>()
            .map_err(|_| usage(format!("invalid carrier count '{}'", s.trim())))
    };
    let values = match text.split_once("..") {
        Some((lo, hi)) => {
            let (lo, hi) = (int(lo)?, int(hi.trim_start_matches('='))?);
            if lo > hi {
                return Err(usage(format!("empty carrier range {text}")));
            }
            (lo..=hi).collect()
        }
        None => text.split(',').map(int).collect::<Result<Vec<_>, _>>()?,
    };
    if values.is_empty() || values.contains(&0) {
        return Err(usage("carrier counts must be at least 1"));
    }
    Ok(values)
}

#[derive(Debug, Serialize)]
struct SolveReport {
    gains: ChannelRealization,
    gamma_star: f64,
    gamma_hat: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    candidates: Option<LeaderCandidates>,
    #[serde(skip_serializing_if = "Option::is_none")]
    stackelberg: Option<EquilibriumOutcome>,
    #[serde(skip_serializing_if = "Option::is_none")]
    nash: Option<EquilibriumOutcome>,
    #[serde(skip_serializing_if = "Option::is_none")]
    oracle: Option<EquilibriumOutcome>,
}

fn solve(args: &SolveArgs, stdout: &mut dyn Write) -> Result<(), CliError> {
    let rows = match (&args.gains, &args.gains_file) {
        (Some(text), _) => parse_inline_gains(text)?,
        (None, Some(path)) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| runtime(format!("cannot read {}: {e}", path.display())))?;
            parse_gains_file(&text)?
        }
        (None, None) => return Err(usage("one of --gains or --gains-file is required")),
    };
    if !(args.epsilon > 0.0 && args.epsilon.is_finite()) {
        return Err(usage(format!("--epsilon must be positive, got {}", args.epsilon)));
    }
    let (model, gs) = args.model.model()?;
    let gains = ChannelRealization::new(
        rows,
        sigma2_from_snr_db(args.model.snr_db),
        [args.model.rate1, args.model.rate2],
    )
    .map_err(usage)?;

    let hierarchical = matches!(args.game, Game::Stackelberg | Game::Both);
    let report = SolveReport {
        gamma_star: gs.value,
        gamma_hat: gains.gamma_hat(),
        candidates: (hierarchical && gains.same_best() && gains.gamma_hat() > gs.value)
            .then(|| leader_candidates(&gains, &model, &gs)),
        stackelberg: hierarchical.then(|| stackelberg_solve(&gains, &model, &gs, args.epsilon)),
        nash: matches!(args.game, Game::Nash | Game::Both).then(|| nash_solve(&gains, &model, &gs)),
        oracle: args
            .oracle
            .then(|| oracle_stackelberg(&gains, &model, &gs, &OracleGrid::default())),
        gains,
    };

    let mut out = open_output(&args.output, stdout)?;
    match args.output.format {
        Format::Json => write_json(&report, &mut *out),
        Format::Csv => {
            let header = [
                "game", "kind", "branch", "carrier_1", "carrier_2", "power_1", "power_2",
                "utility_1", "utility_2", "coordinated",
            ];
            let outcomes = [
                ("stackelberg", &report.stackelberg),
                ("nash", &report.nash),
                ("oracle", &report.oracle),
            ];
            let rows: Vec<Vec<String>> = outcomes
                .iter()
                .filter_map(|(name, o)| o.as_ref().map(|o| outcome_record(name, o)))
                .collect();
            write_csv(&header, &rows, &mut *out)
        }
    }
}

fn outcome_record(game: &str, o: &EquilibriumOutcome) -> Vec<String> {
    let kind = match o.kind {
        EquilibriumKind::NashExact => "nash_exact",
        EquilibriumKind::NashInfeasible => "nash_infeasible",
        EquilibriumKind::StackelbergExact => "stackelberg_exact",
        EquilibriumKind::StackelbergEpsilon { .. } => "stackelberg_epsilon",
        EquilibriumKind::NoEquilibrium => "no_equilibrium",
    };
    let branch = serde_json::to_value(o.branch)
        .ok()
        .and_then(|v| v.as_str().map(str::to_string))
        .unwrap_or_default();
    let carrier = |p: Player| o.active_carrier(p).map_or_else(|| "NaN".into(), |k| (k + 1).to_string());
    let power = |p: Player| format_number(o.active_carrier(p).map(|k| o.alloc.power(p, k)));
    vec![
        game.to_string(),
        kind.to_string(),
        branch,
        carrier(Player::Leader),
        carrier(Player::Follower),
        power(Player::Leader),
        power(Player::Follower),
        format_number(o.utility(Player::Leader)),
        format_number(o.utility(Player::Follower)),
        o.coordinated.to_string(),
    ]
}

fn sweep(args: &SweepArgs, stdout: &mut dyn Write) -> Result<(), CliError> {
    // A swept variable overrides the corresponding base setting.
    let carriers = match args.variable {
        SweepVariable::Carriers => 2,
        _ => args.carriers,
    };
    let theta = match args.variable {
        SweepVariable::Theta => 0.0,
        _ => args.theta,
    };
    let (config, _) = args.model.config(carriers, theta)?;
    let spec = SweepSpec::new(
        args.variable,
        args.values.clone(),
        args.trials,
        config,
        args.seed,
        SolverSet::default(),
    )
    .map_err(usage)?;
    let result = run_sweep(&spec);
    let mut out = open_output(&args.output, stdout)?;
    match args.output.format {
        Format::Csv => result.write_csv(&mut *out).map_err(runtime),
        Format::Json => {
            result.write_json(&mut *out).map_err(runtime)?;
            writeln!(out).map_err(runtime)
        }
    }
}

#[derive(Debug, Serialize)]
struct BoundRow {
    carriers: usize,
    gamma_star: f64,
    p_nocoord_bound: f64,
    p_nocoord_exact_iid: f64,
    se_bound: f64,
}

fn bound(args: &BoundArgs, stdout: &mut dyn Write) -> Result<(), CliError> {
    let model = EfficiencyModel::exp_block(args.block_len).map_err(usage)?;
    let gs = solve_gamma_star(&model).map_err(runtime)?;
    let rows: Vec<BoundRow> = parse_carrier_range(&args.carriers)?
        .into_iter()
        .map(|k| BoundRow {
            carriers: k,
            gamma_star: gs.value,
            p_nocoord_bound: no_coordination_bound(k, &gs).bound,
            p_nocoord_exact_iid: no_coordination_probability_iid(k, &gs),
            se_bound: spectral_efficiency_bound(k, &gs),
        })
        .collect();
    let mut out = open_output(&args.output, stdout)?;
    match args.output.format {
        Format::Json => write_json(&rows, &mut *out),
        Format::Csv => {
            let records: Vec<Vec<String>> = rows
                .iter()
                .map(|r| {
                    vec![
                        r.carriers.to_string(),
                        format_number(Some(r.gamma_star)),
                        format_number(Some(r.p_nocoord_bound)),
                        format_number(Some(r.p_nocoord_exact_iid)),
                        format_number(Some(r.se_bound)),
                    ]
                })
                .collect();
            write_csv(
                &["K", "gamma_star", "p_nocoord_bound", "p_nocoord_exact_iid", "se_bound"],
                &records,
                &mut *out,
            )
        }
    }
}

/// Summary of closed-form versus grid-search leader utilities. A positive
/// gap means the grid found a better leader strategy.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleComparison {
    pub instances: u64,
    pub carriers: usize,
    pub points_per_decade: usize,
    pub max_relative_gap: f64,
    pub mean_relative_gap: f64,
    pub within_tolerance: u64,
    pub tolerance: f64,
}

/// Relative shortfall `(oracle − closed)/oracle` of the closed-form leader
/// utility on one instance.
pub fn oracle_gap(
    gains: &ChannelRealization,
    model: &EfficiencyModel,
    gs: &GammaStar,
    grid: &OracleGrid,
) -> f64 {
    let closed = stackelberg_solve(gains, model, gs, DEFAULT_EPSILON)
        .utility(Player::Leader)
        .unwrap_or(0.0);
    let oracle = oracle_stackelberg(gains, model, gs, grid)
        .utility(Player::Leader)
        .unwrap_or(0.0);
    (oracle - closed) / oracle
}

fn oracle_compare(args: &OracleArgs, stdout: &mut dyn Write) -> Result<(), CliError> {
    if args.trials == 0 {
        return Err(usage("--trials must be at least 1"));
    }
    if args.points_per_decade == 0 {
        return Err(usage("--points-per-decade must be at least 1"));
    }
    let (config, gs) = args.model.config(args.carriers, args.theta)?;
    let grid = OracleGrid {
        points_per_decade: args.points_per_decade,
        ..OracleGrid::default()
    };
    let gaps: Vec<f64> = (0..args.trials)
        .into_par_iter()
        .map(|t| oracle_gap(&sample_channels(&config, args.seed, t), &config.model, &gs, &grid))
        .collect();
    let summary = OracleComparison {
        instances: args.trials,
        carriers: args.carriers,
        points_per_decade: args.points_per_decade,
        max_relative_gap: gaps.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        mean_relative_gap: gaps.iter().sum::<f64>() / gaps.len() as f64,
        within_tolerance: gaps.iter().filter(|&&g| g <= ORACLE_GAP_TOLERANCE).count() as u64,
        tolerance: ORACLE_GAP_TOLERANCE,
    };
    let mut out = open_output(&args.output, stdout)?;
    match args.output.format {
        Format::Json => write_json(&summary, &mut *out),
        Format::Csv => write_csv(
            &[
                "instances",
                "K",
                "points_per_decade",
                "max_relative_gap",
                "mean_relative_gap",
                "within_tolerance",
                "tolerance",
            ],
            &[vec![
                summary.instances.to_string(),
                summary.carriers.to_string(),
                summary.points_per_decade.to_string(),
                format_number(Some(summary.max_relative_gap)),
                format_number(Some(summary.mean_relative_gap)),
                summary.within_tolerance.to_string(),
                format_number(Some(summary.tolerance)),
            ]],
            &mut *out,
        ),
    }
}
