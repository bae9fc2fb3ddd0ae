//! `isac-ot` command line: single runs, rate-floor sweeps and convergence
//! comparisons on a JSON scenario file.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use isac_ot::harness::{self, AlgoChoice, ExperimentSpec, Sweep};

#[derive(Parser, Debug)]
#[command(
    name = "isac-ot",
    version,
    about = "Cell association and power allocation for ISAC UAV networks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run the selected algorithm(s) once and write traces and a summary.
    Run(Common),
    /// Repeat full runs over an increasing list of per-UAV rate floors.
    SweepRmin {
        #[command(flatten)]
        common: Common,
        /// Comma-separated rate floors in bit/s (default: five points from zero
        /// to twice the weakest per-UAV rate of the initial solution).
        #[arg(long, value_delimiter = ',')]
        rmin: Option<Vec<f64>>,
    },
    /// Per-iteration objective and target CRB for AIBOT next to the baseline.
    Convergence(Common),
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum Algo {
    Aibot,
    Baseline,
    Both,
}

#[derive(Args, Debug)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    #[arg(long, value_enum, default_value = "both")]
    algo: Algo,
    /// Overrides the seed stored in the config file.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Use path loss proportional to distance instead of distance squared.
    #[arg(long)]
    literal_eq6: bool,
    /// Treat the cooperative QoS threshold as an upper bound.
    #[arg(long)]
    literal_c5: bool,
}

impl Common {
    fn spec(self, sweep: Sweep) -> ExperimentSpec {
        ExperimentSpec {
            config_path: self.config,
            algo: match self.algo {
                Algo::Aibot => AlgoChoice::Aibot,
                Algo::Baseline => AlgoChoice::Baseline,
                Algo::Both => AlgoChoice::Both,
            },
            sweep,
            out_dir: self.out,
            seed: self.seed,
            literal_eq6: self.literal_eq6,
            literal_c5: self.literal_c5,
        }
    }
}

fn execute(command: Command) -> isac_ot::Result<serde_json::Value> {
    match command {
        Command::Run(c) => {
            let report = harness::cmd_run(&c.spec(Sweep::None))?;
            Ok(serde_json::to_value(&report.summaries)?)
        }
        Command::SweepRmin { common, rmin } => {
            let sweep = rmin.map(Sweep::RMin).unwrap_or(Sweep::None);
            let report = harness::cmd_sweep_rmin(&common.spec(sweep))?;
            if report.infeasible_rows > 0 {
                eprintln!(
                    "warning: {} of {} sweep rows infeasible",
                    report.infeasible_rows,
                    report.rows.len()
                );
            }
            Ok(serde_json::json!({
                "rows": report.rows.len(),
                "infeasible": report.infeasible_rows,
                "file": report.file.display().to_string(),
            }))
        }
        Command::Convergence(c) => {
            let report = harness::cmd_convergence(&c.spec(Sweep::None))?;
            Ok(serde_json::to_value(&report.summaries)?)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(v) => {
            println!("{}", serde_json::to_string_pretty(&v).unwrap_or_default());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", harness::error_json(&e));
            ExitCode::from(harness::exit_code(&e) as u8)
        }
    }
}
