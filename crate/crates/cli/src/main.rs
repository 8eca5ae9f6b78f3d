use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use trustkey::verify::{self, Mode};
use trustkey::{coverage_curve, eq1_height_bound, levels, LatencyConfig, SimConfig, TimeDistribution};

#[derive(Debug, Parser)]
#[command(name = "trustkey", version, about = "Trust-ordered session-key distribution simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Worst-case B-tree height floor(log_d((n + 1) / 2))
    Bound(SizeArgs),
    /// Height of the complete d-ary tree holding n peers
    Levels(SizeArgs),
    /// Run a churn simulation and write metrics.csv and coverage.csv
    Simulate(SimulateArgs),
    /// Per-level coverage of a full tree
    Coverage(CoverageArgs),
    /// Run the invariant suite
    Verify(VerifyArgs),
}

#[derive(Debug, Args)]
struct SizeArgs {
    #[arg(long)]
    n: u64,
    #[arg(long)]
    d: u64,
}

#[derive(Debug, Args)]
struct LatencyArgs {
    #[arg(long, default_value_t = 1)]
    kdc_gen: u64,
    #[arg(long, default_value_t = 1)]
    kdc_to_server: u64,
    #[arg(long, default_value_t = 1)]
    server_to_root: u64,
    #[arg(long, default_value_t = 1)]
    per_level: u64,
    /// Start the chart clock at the KDC rather than at the root
    #[arg(long)]
    include_offsets: bool,
}

impl LatencyArgs {
    fn config(&self) -> LatencyConfig {
        LatencyConfig {
            kdc_gen: self.kdc_gen,
            kdc_to_server: self.kdc_to_server,
            server_to_root: self.server_to_root,
            per_level: self.per_level,
            include_offsets_in_chart: self.include_offsets,
        }
    }
}

#[derive(Debug, Args)]
struct SimulateArgs {
    /// Initial online peers
    #[arg(long, visible_alias = "nodes", default_value_t = 333)]
    n: usize,
    /// Fanout
    #[arg(long, visible_alias = "fanout", default_value_t = 2)]
    d: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Churn time units after the initial distribution
    #[arg(long, default_value_t = 0)]
    duration: u64,
    #[arg(long, default_value_t = 0.0)]
    join_rate: f64,
    #[arg(long, default_value_t = 0.0)]
    leave_rate: f64,
    /// Lower bound of the uniform initial online time
    #[arg(long, default_value_t = 0)]
    time_lo: u64,
    /// Upper bound of the uniform initial online time
    #[arg(long, default_value_t = 1_000_000)]
    time_hi: u64,
    /// Let half of all joins bring back an offline peer
    #[arg(long)]
    rejoin_pool: bool,
    #[command(flatten)]
    latency: LatencyArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Ascii,
}

#[derive(Debug, Args)]
struct CoverageArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    d: usize,
    #[command(flatten)]
    latency: LatencyArgs,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    #[arg(long, conflicts_with = "full")]
    quick: bool,
    #[arg(long)]
    full: bool,
    #[arg(long, default_value_t = 42)]
    seed: u64,
}

const CHART_WIDTH: usize = 50;

fn render_ascii(curve: &[(u64, usize)], n: usize) -> String {
    let time_width = curve.last().map_or(1, |(t, _)| t.to_string().len());
    let count_width = n.to_string().len();
    let mut out = String::new();
    for &(t, covered) in curve {
        let bar = (covered * CHART_WIDTH).div_ceil(n.max(1));
        out.push_str(&format!(
            "{t:>time_width$} | {:<CHART_WIDTH$} {covered:>count_width$}\n",
            "#".repeat(bar)
        ));
    }
    out
}

fn render_csv(curve: &[(u64, usize)]) -> String {
    let mut out = String::from("time_unit,nodes_covered\n");
    for (t, covered) in curve {
        out.push_str(&format!("{t},{covered}\n"));
    }
    out
}

fn execute(command: Command, stdout: &mut impl Write) -> Result<ExitCode, trustkey::Error> {
    match command {
        Command::Bound(args) => {
            writeln!(stdout, "{}", eq1_height_bound(args.n, args.d)?)?;
        }
        Command::Levels(args) => {
            writeln!(stdout, "{}", levels(args.n, args.d)?)?;
        }
        Command::Simulate(args) => {
            let config = SimConfig {
                node_count: args.n,
                fanout: args.d,
                seed: args.seed,
                duration: args.duration,
                join_rate: args.join_rate,
                leave_rate: args.leave_rate,
                initial_time: TimeDistribution::UniformInt {
                    lo: args.time_lo,
                    hi: args.time_hi,
                },
                latency: args.latency.config(),
                rejoin_pool: args.rejoin_pool,
            };
            let metrics = trustkey::run(config)?;
            metrics.write_files(&args.out)?;
            writeln!(stdout, "{}", metrics.summary())?;
        }
        Command::Coverage(args) => {
            let latency = args.latency.config();
            latency.validate()?;
            let curve = coverage_curve(args.n, args.d, &latency)?;
            let text = match args.format {
                Format::Csv => render_csv(&curve),
                Format::Ascii => render_ascii(&curve, args.n),
            };
            stdout.write_all(text.as_bytes())?;
        }
        Command::Verify(args) => {
            let mode = if args.full { Mode::Full } else { Mode::Quick };
            let report = verify::run_suite(mode, args.seed);
            for check in &report.checks {
                writeln!(stdout, "{check}")?;
            }
            writeln!(stdout, "{} passed, {} failed", report.passed(), report.failed())?;
            if !report.all_passed() {
                return Ok(ExitCode::from(1));
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        // usage errors exit 2, --help and --version exit 0
        Err(e) => e.exit(),
    };
    let mut stdout = io::stdout().lock();
    match execute(cli.command, &mut stdout) {
        Ok(code) => code,
        Err(e) => {
            let _ = stdout.flush();
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
