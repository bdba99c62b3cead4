use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use qks::datasets::gen_picture_frames;
use qks::experiments::{
    build_machine, featurize_pair, kernel_check, random_pairs, run_baseline, run_qks, run_sweep, write_kernel_csv,
    DatasetSource, ExperimentError, PreparedData, Result, RunConfig, SweepRequest,
};
use qks::features::{load_features, save_features, FeatureMetadata};
use qks::{Ansatz, Split};

#[derive(Parser)]
#[command(name = "qks", version, about = "Quantum kitchen sinks on a statevector simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Logistic regression on the raw inputs
    Baseline {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        lambda: Option<f64>,
        /// Write the JSON report here as well as to stdout
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sample a machine, featurise, train and evaluate
    Run {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        machine: MachineArgs,
        #[arg(long, default_value_t = 1000)]
        episodes: usize,
        #[arg(long, default_value_t = 1.0)]
        sigma: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate a sigma by episodes grid, averaged over seeds
    Sweep {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        machine: MachineArgs,
        #[arg(long, value_delimiter = ',', required = true)]
        sigma: Vec<f64>,
        #[arg(long, value_delimiter = ',', required = true)]
        episodes: Vec<usize>,
        #[arg(long, value_delimiter = ',', default_value = "0")]
        seed: Vec<u64>,
        /// Output prefix; writes PREFIX.csv and PREFIX.json
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare the Monte Carlo implied kernel with its closed form
    Kernel {
        #[arg(long, default_value = "cnot2")]
        ansatz: Ansatz,
        #[arg(long, default_value_t = 1.0)]
        sigma: f64,
        #[arg(long, default_value_t = 100_000)]
        episodes: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 20)]
        pairs: usize,
        /// Input dimension of the random pairs
        #[arg(long, default_value_t = 2)]
        dim: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write the picture-frames train and test sets as CSV
    GenFrames {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 800)]
        train_per_class: usize,
        #[arg(long, default_value_t = 200)]
        test_per_class: usize,
        /// Output directory
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Save or inspect bit-packed feature files
    #[command(subcommand)]
    Features(FeaturesCommand),
}

#[derive(Subcommand)]
enum FeaturesCommand {
    /// Featurise both splits into OUT/train.qksf and OUT/test.qksf
    Dump {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        machine: MachineArgs,
        #[arg(long, default_value_t = 1000)]
        episodes: usize,
        #[arg(long, default_value_t = 1.0)]
        sigma: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print the metadata and a summary of a feature file
    Load { path: PathBuf },
}

#[derive(Copy, Clone, ValueEnum)]
enum DatasetKind {
    Frames,
    Mnist,
    Csv,
}

#[derive(Args)]
struct DataArgs {
    #[arg(long, value_enum, default_value = "frames")]
    dataset: DatasetKind,
    /// Seed of the generated picture frames
    #[arg(long, default_value_t = 0)]
    data_seed: u64,
    #[arg(long, env = "QKS_MNIST_DIR", default_value = "data/mnist")]
    mnist_dir: PathBuf,
    /// Digit pair `a,b`; a becomes class 0
    #[arg(long, default_value = "3,5", value_parser = parse_digits)]
    digits: (u8, u8),
    #[arg(long, required_if_eq("dataset", "csv"))]
    train_csv: Option<PathBuf>,
    #[arg(long, required_if_eq("dataset", "csv"))]
    test_csv: Option<PathBuf>,
}

#[derive(Args)]
struct MachineArgs {
    #[arg(long, default_value = "cnot2")]
    ansatz: Ansatz,
    #[arg(long, default_value_t = 1)]
    layers: usize,
    #[arg(long)]
    lambda: Option<f64>,
}

fn parse_digits(s: &str) -> std::result::Result<(u8, u8), String> {
    let (a, b) = s.split_once(',').ok_or("expected two digits like 3,5")?;
    let digit = |t: &str| match t.trim().parse::<u8>() {
        Ok(d) if d <= 9 => Ok(d),
        _ => Err(format!("`{t}` is not a digit")),
    };
    let (a, b) = (digit(a)?, digit(b)?);
    if a == b {
        return Err("the two digits must differ".into());
    }
    Ok((a, b))
}

impl DataArgs {
    fn load(&self) -> Result<PreparedData> {
        let source = match self.dataset {
            DatasetKind::Frames => DatasetSource::frames(self.data_seed),
            DatasetKind::Mnist => DatasetSource::Mnist {
                dir: self.mnist_dir.clone(),
                digits: self.digits,
            },
            DatasetKind::Csv => DatasetSource::Csv {
                train: self.train_csv.clone().expect("required by clap"),
                test: self.test_csv.clone().expect("required by clap"),
            },
        };
        source.load()
    }
}

fn emit<T: Serialize>(report: &T, out: Option<&Path>) -> Result<()> {
    let json = serde_json::to_string_pretty(report).expect("reports serialise");
    println!("{json}");
    if let Some(path) = out {
        fs::write(path, json + "\n").map_err(qks_io(path))?;
    }
    Ok(())
}

fn qks_io(path: &Path) -> impl FnOnce(std::io::Error) -> ExperimentError + '_ {
    move |source| ExperimentError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn run_config(machine: &MachineArgs, sigma: f64, episodes: usize, seed: u64) -> RunConfig {
    RunConfig {
        ansatz: machine.ansatz,
        layers: machine.layers,
        sigma,
        episodes,
        seed,
        lambda: machine.lambda,
    }
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Baseline { data, lambda, out } => {
            let report = run_baseline(&data.load()?, lambda)?;
            emit(&report, out.as_deref())
        }
        Command::Run {
            data,
            machine,
            episodes,
            sigma,
            seed,
            out,
        } => {
            let report = run_qks(&data.load()?, &run_config(&machine, sigma, episodes, seed))?;
            emit(&report, out.as_deref())
        }
        Command::Sweep {
            data,
            machine,
            sigma,
            episodes,
            seed,
            out,
        } => {
            let request = SweepRequest {
                ansatz: machine.ansatz,
                layers: machine.layers,
                sigmas: sigma,
                episodes,
                seeds: seed,
                lambda: machine.lambda,
            };
            let result = run_sweep(&data.load()?, &request)?;
            println!("sigma,episodes,train_error,test_error,seconds");
            for c in &result.cells {
                println!(
                    "{},{},{},{},{:.3}",
                    c.sigma, c.episodes, c.train_error, c.test_error, c.seconds
                );
            }
            if let Some(prefix) = out {
                result.write_csv(&prefix.with_extension("csv"))?;
                let json = prefix.with_extension("json");
                let text = serde_json::to_string_pretty(&result).expect("reports serialise");
                fs::write(&json, text + "\n").map_err(qks_io(&json))?;
            }
            Ok(())
        }
        Command::Kernel {
            ansatz,
            sigma,
            episodes,
            seed,
            pairs,
            dim,
            out,
        } => {
            if dim == 0 {
                return Err(ExperimentError::Usage("--dim must be positive".into()));
            }
            let rows = kernel_check(ansatz, sigma, episodes, seed, &random_pairs(pairs, dim, seed))?;
            match out {
                Some(path) => write_kernel_csv(&path, &rows),
                None => {
                    println!("mc,stderr,closed_form");
                    for r in &rows {
                        let cf = r.closed_form.map_or(String::new(), |c| c.to_string());
                        println!("{},{},{cf}", r.mc, r.stderr);
                    }
                    Ok(())
                }
            }
        }
        Command::GenFrames {
            seed,
            train_per_class,
            test_per_class,
            out,
        } => {
            if train_per_class == 0 || test_per_class == 0 {
                return Err(ExperimentError::Usage("class counts must be positive".into()));
            }
            fs::create_dir_all(&out).map_err(qks_io(&out))?;
            let (train, test) = gen_picture_frames(train_per_class, test_per_class, seed);
            train.write_csv(&out.join("frames_train.csv"))?;
            test.write_csv(&out.join("frames_test.csv"))?;
            println!("train {} rows sha256 {}", train.len(), train.checksum());
            println!("test  {} rows sha256 {}", test.len(), test.checksum());
            Ok(())
        }
        Command::Features(FeaturesCommand::Dump {
            data,
            machine,
            episodes,
            sigma,
            seed,
            out,
        }) => {
            let data = data.load()?;
            let m = build_machine(&data, &run_config(&machine, sigma, episodes, seed))?;
            let (train_x, test_x) = featurize_pair(&m, &data)?;
            fs::create_dir_all(&out).map_err(qks_io(&out))?;
            for (name, x, split) in [
                ("train.qksf", &train_x, Split::Train),
                ("test.qksf", &test_x, Split::Test),
            ] {
                let path = out.join(name);
                save_features(&path, x, &FeatureMetadata::describe(&m, split, x))?;
                println!("{}: {} x {}", path.display(), x.rows(), x.cols());
            }
            Ok(())
        }
        Command::Features(FeaturesCommand::Load { path }) => {
            let (x, meta) = load_features(&path)?;
            let density = x.count_ones() as f64 / (x.rows() * x.cols()).max(1) as f64;
            println!("{}", serde_json::to_string_pretty(&meta).expect("metadata serialises"));
            println!("ones density {density:.6}");
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
