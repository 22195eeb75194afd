use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use qssvm_core::cost::{cost_model, CostModelParams};
use qssvm_core::error::ErrorClass;
use qssvm_core::graph::LaplacianKind;
use qssvm_core::pipeline::{bench_lmr, load_inputs, run_pipeline, run_train, BenchOptions, GraphSource, RunConfig, DEFAULT_DTS};
use qssvm_core::report::{emit_report, to_json};
use qssvm_core::svm::KernelSpec;
use qssvm_core::Error;

#[derive(Parser)]
#[command(name = "qssvm", version, about = "Semi-supervised LS-SVM with a simulated quantum training pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Classical training and prediction only.
    Train(RunArgs),
    /// Simulated quantum pipeline checked against the classical solution.
    Simulate(RunArgs),
    /// Error scaling of the K, KK and KLK channels.
    Bench(BenchArgs),
    /// Asymptotic cost of the quantum and dequantized algorithms.
    Costmodel(CostArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Training set: header row, then `f1,...,fp,label` with label in {-1, 0, 1}.
    dataset: PathBuf,
    #[arg(long, default_value_t = 1.0)]
    gamma: f64,
    /// `linear`, `poly:d,c` or `rbf:w`.
    #[arg(long, default_value = "linear")]
    kernel: KernelSpec,
    /// Symmetric k-nearest-neighbour graph.
    #[arg(long, conflicts_with = "graph")]
    knn: Option<usize>,
    /// Graph file `{"m": .., "edges": [[i, j], ..]}` indexed by dataset row.
    #[arg(long)]
    graph: Option<PathBuf>,
    #[arg(long, default_value_t = 0.05)]
    sigma_thresh: f64,
    #[arg(long, default_value_t = 8)]
    clock_qubits: u32,
    /// Error budget of the channel simulation.
    #[arg(long, default_value_t = 1e-3)]
    delta: f64,
    /// Swap-test shots; 0 evaluates the statistic exactly.
    #[arg(long, default_value_t = 0)]
    shots: u64,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// `normalized` or `combinatorial`.
    #[arg(long, default_value = "normalized")]
    laplacian: LaplacianKind,
    /// Points to classify; defaults to the training points.
    #[arg(long)]
    testset: Option<PathBuf>,
    /// Write the JSON report here instead of stdout.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Include wall-clock stage timings in the report.
    #[arg(long)]
    timings: bool,
}

impl RunArgs {
    fn config(&self) -> RunConfig {
        let graph = match (&self.graph, self.knn) {
            (Some(path), _) => GraphSource::File(path.clone()),
            (None, Some(k)) => GraphSource::Knn(k),
            (None, None) => RunConfig::default().graph,
        };
        RunConfig {
            gamma: self.gamma,
            kernel: self.kernel,
            graph,
            sigma_thresh: self.sigma_thresh,
            clock_qubits: self.clock_qubits,
            delta: self.delta,
            shots: self.shots,
            seed: self.seed,
            laplacian_kind: self.laplacian,
            record_timings: self.timings,
        }
    }
}

#[derive(Args)]
struct BenchArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Comma-separated step sizes.
    #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_DTS.to_vec())]
    dts: Vec<f64>,
    #[arg(long, default_value_t = 1.0)]
    time: f64,
    /// Number of trajectory step counts, each double the previous.
    #[arg(long, default_value_t = 3)]
    doublings: usize,
}

#[derive(Args)]
struct CostArgs {
    #[arg(long)]
    m: usize,
    #[arg(long)]
    p: usize,
    /// Rank, 1 <= q <= m.
    #[arg(long)]
    q: f64,
    #[arg(long)]
    epsilon: f64,
    #[arg(long, default_value_t = 1.0)]
    eta: f64,
    #[arg(long, default_value_t = 1.0)]
    delta_fail: f64,
    #[arg(long)]
    report: Option<PathBuf>,
}

fn output<T: Serialize>(report: &T, path: Option<&Path>) -> Result<(), Error> {
    match path {
        Some(p) => emit_report(report, p),
        None => {
            print!("{}", to_json(report)?);
            Ok(())
        }
    }
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Train(args) => {
            let cfg = args.config();
            let inputs = load_inputs(&cfg, &args.dataset, args.testset.as_deref())?;
            output(&run_train(&cfg, &inputs)?, args.report.as_deref())
        }
        Command::Simulate(args) => {
            let report = run_pipeline(&args.config(), &args.dataset, args.testset.as_deref())?;
            output(&report, args.report.as_deref())
        }
        Command::Bench(args) => {
            let opts = BenchOptions {
                dts: args.dts,
                total_time: args.time,
                doublings: args.doublings,
            };
            let report = bench_lmr(&args.run.config(), &args.run.dataset, &opts)?;
            output(&report, args.run.report.as_deref())
        }
        Command::Costmodel(args) => {
            let params = CostModelParams {
                m: args.m,
                p: args.p,
                q: args.q,
                epsilon: args.epsilon,
                eta: args.eta,
                delta_fail: args.delta_fail,
            };
            output(&cost_model(&params)?, args.report.as_deref())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(match err.class() {
                ErrorClass::Input => 2,
                ErrorClass::Numerical => 3,
                ErrorClass::Io => 4,
            })
        }
    }
}
