use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use forcegrasp::harness::{
    cells_below, read_records, records_to_csv, run_campaign, Campaign, Report, StrategyChoice, DEFAULT_TRIALS,
    TRIALS_FILE,
};
use forcegrasp::world::Scene;

const EXIT_CONFIG: u8 = 2;
const EXIT_THRESHOLD: u8 = 3;

#[derive(Parser)]
#[command(name = "forcegrasp", version, about = "Force-guided grasping campaigns in simulation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a seeded Monte Carlo campaign.
    Run {
        #[arg(long)]
        scene: PathBuf,
        /// A, B, C, baseline or all.
        #[arg(long, default_value = "all")]
        strategy: String,
        /// Object ids to grasp (default: every target in the scene).
        #[arg(long, value_delimiter = ',')]
        target: Vec<String>,
        #[arg(long, default_value_t = DEFAULT_TRIALS)]
        trials: usize,
        #[arg(long = "sigma-scale", value_delimiter = ',', default_value = "1")]
        sigma_scale: Vec<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Exit with code 3 if a strategy cell falls below the minimum rate.
        #[arg(long)]
        assert: bool,
        #[arg(long = "min-rate", default_value_t = 0.9)]
        min_rate: f64,
        #[arg(long, value_enum, default_value_t = Format::Table)]
        format: Format,
    },
    /// Check a scene file against the schema.
    Validate {
        #[arg(long)]
        scene: PathBuf,
    },
    /// Print the report of a finished campaign directory.
    Report {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Table)]
        format: Format,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Table,
    Csv,
}

fn parse_strategies(s: &str) -> Result<Vec<StrategyChoice>, String> {
    if s.eq_ignore_ascii_case("all") {
        return Ok(StrategyChoice::ALL.to_vec());
    }
    s.split(',').map(|p| p.trim().parse()).collect()
}

fn render(report: &Report, records: &[forcegrasp::harness::TrialRecord], format: Format) -> String {
    match format {
        Format::Json => report.to_json() + "\n",
        Format::Table => report.to_table(),
        Format::Csv => records_to_csv(records),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Validate { scene } => match Scene::load(&scene) {
            Ok(s) => {
                println!("{}: ok ({} objects)", scene.display(), s.objects.len());
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("{e}");
                ExitCode::from(EXIT_CONFIG)
            }
        },
        Command::Run { scene, strategy, target, trials, sigma_scale, seed, out, assert, min_rate, format } => {
            let strategies = match parse_strategies(&strategy) {
                Ok(s) => s,
                Err(e) => {
                    eprintln!("{e}");
                    return ExitCode::from(EXIT_CONFIG);
                }
            };
            let mut campaign = match Campaign::load(&scene) {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("{e}");
                    return ExitCode::from(EXIT_CONFIG);
                }
            };
            campaign.targets = target;
            campaign.trials = trials;
            campaign.multipliers = sigma_scale;
            campaign.strategies = strategies;
            campaign.master_seed = seed;
            campaign.out = out;
            let output = match run_campaign(&campaign) {
                Ok(o) => o,
                Err(e) => {
                    eprintln!("{e}");
                    return ExitCode::from(EXIT_CONFIG);
                }
            };
            print!("{}", render(&output.report, &output.records, format));
            let failing = cells_below(&output.report, min_rate);
            if assert && !failing.is_empty() {
                for c in failing {
                    eprintln!("below {min_rate}: {} {} sigma {} rate {:.3}", c.target, c.strategy, c.sigma_scale, c.rate);
                }
                return ExitCode::from(EXIT_THRESHOLD);
            }
            ExitCode::SUCCESS
        }
        Command::Report { input, format } => match read_records(&input.join(TRIALS_FILE)) {
            Ok(records) => {
                let report = Report::new(&input.display().to_string(), 0, &records);
                print!("{}", render(&report, &records, format));
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("{e}");
                ExitCode::from(EXIT_CONFIG)
            }
        },
    }
}
