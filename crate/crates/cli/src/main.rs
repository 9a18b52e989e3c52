use std::io::Read;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use productmix::testgen::BenchConfig;
use productmix::Execution;
use productmix_cli::commands::{self, Method, MAX_VALUE_ENV};
use productmix_cli::file::AuctionFile;
use productmix_cli::{CliError, Output};

#[derive(Parser)]
#[command(name = "productmix", version, about = "Product-mix auction solver")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Unit,
    LongBinary,
    LongDemand,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Unit => Method::Unit,
            MethodArg::LongBinary => Method::LongBinary,
            MethodArg::LongDemand => Method::LongDemand,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Check every bidder's list for validity.
    Validate {
        /// Auction file, or - for stdin.
        file: PathBuf,
    },
    /// Find the minimal market-clearing price of the target.
    Price {
        file: PathBuf,
        #[arg(long, value_enum, default_value = "long-binary")]
        method: MethodArg,
        /// Print every descent step as a JSON line.
        #[arg(long)]
        trace: bool,
    },
    /// Find the price, then split the target among the bidders.
    Allocate {
        file: PathBuf,
        #[arg(long, value_enum, default_value = "long-binary")]
        method: MethodArg,
        /// JSON list of [good, bidder name] pairs, most preferred first.
        #[arg(long)]
        priority_file: Option<PathBuf>,
        /// Single-threaded, with the canonical priority list unless one is given.
        #[arg(long)]
        seedless_deterministic: bool,
    },
    /// Print a random valid auction file.
    Generate {
        #[arg(short = 'n', default_value_t = 2)]
        goods: usize,
        #[arg(short = 'm', default_value_t = 2)]
        bidders: usize,
        #[arg(short = 'q', default_value_t = 10)]
        rounds: usize,
        #[arg(short = 'M', env = MAX_VALUE_ENV, default_value_t = 100)]
        max_value: i64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Time allocation over a parameter grid and print CSV.
    Bench {
        #[arg(long, default_value = "bids")]
        axis: String,
        /// a..b:step, a..b or a,b,c
        #[arg(long)]
        grid: String,
        #[arg(short = 'n', default_value_t = 2)]
        goods: usize,
        #[arg(short = 'm', default_value_t = 5)]
        bidders: usize,
        #[arg(short = 'q', default_value_t = 20)]
        rounds: usize,
        #[arg(short = 'M', env = MAX_VALUE_ENV, default_value_t = 100)]
        max_value: i64,
        #[arg(long, default_value_t = 5)]
        repetitions: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Generate instances on one thread.
        #[arg(long)]
        sequential: bool,
        /// Write the CSV here and the manifest next to it.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        manifest: Option<PathBuf>,
    },
    /// Sample demand over a price grid (two goods only) and print CSV.
    Regions {
        file: PathBuf,
        #[arg(long, default_value = "1")]
        grid_step: String,
        /// Upper end of both price axes.
        #[arg(long)]
        max: Option<String>,
        /// Restrict to one bidder's list.
        #[arg(long)]
        bidder: Option<String>,
    },
}

fn read_input(path: &Path) -> Result<String, CliError> {
    if path == Path::new("-") {
        let mut text = String::new();
        std::io::stdin().read_to_string(&mut text)?;
        return Ok(text);
    }
    std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))
}

fn load(path: &Path) -> Result<AuctionFile, CliError> {
    AuctionFile::parse(&read_input(path)?)
}

fn run(cli: Cli) -> Result<Output, CliError> {
    match cli.command {
        Command::Validate { file } => Ok(commands::validate(&load(&file)?)),
        Command::Price { file, method, trace } => commands::price(&load(&file)?, method.into(), trace),
        Command::Allocate {
            file,
            method,
            priority_file,
            seedless_deterministic,
        } => {
            let auction = load(&file)?;
            let priority = match priority_file {
                Some(path) => Some(commands::parse_priority(&read_input(&path)?)?),
                None => None,
            };
            commands::allocate(&auction, method.into(), priority.as_deref(), seedless_deterministic)
        }
        Command::Generate {
            goods,
            bidders,
            rounds,
            max_value,
            seed,
        } => commands::generate(goods, bidders, rounds, max_value, seed),
        Command::Bench {
            axis,
            grid,
            goods,
            bidders,
            rounds,
            max_value,
            repetitions,
            seed,
            sequential,
            out,
            manifest,
        } => {
            let cfg = BenchConfig {
                n: goods,
                m: bidders,
                q: rounds,
                max_value,
                repetitions,
                seed,
                execution: if sequential {
                    Execution::Sequential
                } else {
                    Execution::Parallel
                },
            };
            let result = commands::bench(commands::parse_axis(&axis)?, &commands::parse_grid(&grid)?, &cfg)?;
            let manifest = manifest.or_else(|| {
                out.as_ref().map(|p| {
                    let mut name = p.clone().into_os_string();
                    name.push(".manifest.json");
                    PathBuf::from(name)
                })
            });
            if let Some(path) = manifest {
                std::fs::write(path, &result.manifest)?;
            }
            match out {
                Some(path) => {
                    std::fs::write(path, &result.csv)?;
                    Ok(Output::ok(String::new()))
                }
                None => Ok(Output::ok(result.csv)),
            }
        }
        Command::Regions {
            file,
            grid_step,
            max,
            bidder,
        } => {
            let step = commands::parse_step(&grid_step)?;
            let max = max.as_deref().map(commands::parse_step).transpose()?;
            commands::regions(&load(&file)?, step, max, bidder.as_deref())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(out) => {
            print!("{}", out.stdout);
            ExitCode::from(out.code as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
