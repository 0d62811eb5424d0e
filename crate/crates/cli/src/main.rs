//! `uwbcal`: simulate, calibrate, fuse and evaluate from the command line.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(name = "uwbcal", version, about = "UWB anchor calibration and range/odometry fusion")]
struct Cli {
    /// Log solver progress and per-window traces.
    #[arg(short, long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic scenario as run bundles with ground truth.
    Simulate {
        /// Scenario description (TOML); every field is optional.
        scenario: PathBuf,
        outdir: PathBuf,
    },
    /// Estimate anchor positions and link biases from one run.
    Calibrate(CalibrateArgs),
    /// Fuse a run with a calibration into the anchor frame.
    Fuse(FuseArgs),
    /// Absolute trajectory error of an estimate against ground truth.
    EvalAte {
        estimate: PathBuf,
        groundtruth: PathBuf,
        #[arg(long, value_enum, default_value_t = AlignArg::None)]
        align: AlignArg,
        /// Write the per-pose error series here as CSV.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Per-link series of raw ranges, gate decisions and predicted ranges.
    FilterReport(FilterReportArgs),
}

#[derive(Args, Debug)]
struct CalibrateArgs {
    /// Run bundle manifest or the directory holding it.
    bundle: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Full calibration config (TOML); flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    cauchy_scale: Option<f64>,
    /// Ignore height priors listed in the bundle (they are used whenever
    /// present otherwise).
    #[arg(long)]
    no_height_priors: bool,
    /// Ignore pair priors listed in the bundle.
    #[arg(long)]
    no_pair_priors: bool,
    #[arg(long)]
    sequential: bool,
}

#[derive(Args, Debug)]
struct FuseArgs {
    bundle: PathBuf,
    #[arg(long)]
    calib: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Per-window timing report (CSV).
    #[arg(long)]
    timing: Option<PathBuf>,
    /// Full fusion config (TOML); flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    window: Option<usize>,
    #[arg(long)]
    stride: Option<usize>,
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    cauchy_scale: Option<f64>,
    #[arg(long)]
    sequential: bool,
}

#[derive(Args, Debug)]
struct FilterReportArgs {
    bundle: PathBuf,
    #[arg(long)]
    calib: PathBuf,
    /// Output directory, one CSV per link plus a summary.
    #[arg(long, default_value = "filter_report")]
    out: PathBuf,
    /// Gate threshold; defaults to the one stored with the calibration.
    #[arg(long)]
    tau: Option<f64>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum AlignArg {
    None,
    Rigid,
}

fn main() -> ExitCode {
    // clap exits with status 2 on usage errors
    let cli = Cli::parse();
    let level = if cli.verbose { "debug" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    let result = match cli.command {
        Command::Simulate { scenario, outdir } => commands::simulate(&scenario, &outdir),
        Command::Calibrate(a) => commands::calibrate(&a),
        Command::Fuse(a) => commands::fuse(&a),
        Command::EvalAte { estimate, groundtruth, align, out } => {
            let align = match align {
                AlignArg::None => uwbcal::dataio::Alignment::None,
                AlignArg::Rigid => uwbcal::dataio::Alignment::Rigid,
            };
            commands::eval_ate(&estimate, &groundtruth, align, out.as_deref())
        }
        Command::FilterReport(a) => commands::filter_report(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
