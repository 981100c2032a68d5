mod cmd;
mod obs;

use clap::{Parser, Subcommand};
use cmd::Algo;
use muz_core::{InferConfig, Resampling};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "muz", version, about = "Run, infer and transform reactive probabilistic programs")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Parse and kind-check a file, then print its constant parameters as JSON.
    Check { file: PathBuf },
    /// Run a deterministic node and print its outputs as CSV.
    Run {
        file: PathBuf,
        #[arg(long)]
        node: Option<String>,
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long)]
        obs: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Filter a probabilistic node and print per-step posterior summaries as CSV.
    Infer {
        file: PathBuf,
        #[arg(long)]
        node: Option<String>,
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long, default_value_t = 1000)]
        particles: usize,
        #[arg(long, default_value_t = 100)]
        cloud: usize,
        #[arg(long, value_enum, default_value_t = Algo::Pf)]
        algo: Algo,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        obs: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 0.5)]
        ess_threshold: f64,
        #[arg(long, value_enum, default_value_t = ResamplingArg::Multinomial)]
        resampling: ResamplingArg,
    },
    /// Externalize constant parameters; writes the compiled program and a
    /// `.perm.json` seed permutation.
    CompileApf {
        file: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare two programs on random seed prefixes; exits 1 on a counterexample.
    Equiv {
        left: PathBuf,
        right: PathBuf,
        #[arg(long)]
        node: Option<String>,
        #[arg(long)]
        right_node: Option<String>,
        /// A `.perm.json` sidecar (compares against the compiled model) or a list `1,0`.
        #[arg(long)]
        perm: Option<String>,
        #[arg(long, default_value_t = 50)]
        steps: usize,
        #[arg(long, default_value_t = 100)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        obs: Option<PathBuf>,
    },
    /// Grid posterior of a small model, or agreement with the interpreter (`--agree`).
    Oracle {
        file: PathBuf,
        #[arg(long)]
        node: Option<String>,
        #[arg(long, default_value_t = 1)]
        steps: usize,
        #[arg(long, default_value_t = 100)]
        grid: usize,
        #[arg(long)]
        agree: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        obs: Option<PathBuf>,
    },
    /// Print the resolved program as JSON.
    DumpAst { file: PathBuf },
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum ResamplingArg {
    Multinomial,
    Systematic,
}

/// Thread count from `MUZ_THREADS`, defaulting to the available cores.
fn threads() -> usize {
    std::env::var("MUZ_THREADS")
        .ok()
        .and_then(|s| s.parse().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

fn exit_code(e: &anyhow::Error) -> u8 {
    if e.downcast_ref::<cmd::Io>().is_some() {
        return 3;
    }
    match e.chain().find_map(|c| c.downcast_ref::<muz_core::Error>()) {
        Some(muz_core::Error::Degenerate { .. } | muz_core::Error::NonFinite(_)) => 2,
        _ => 1,
    }
}

fn dispatch(cli: Cli) -> anyhow::Result<bool> {
    match cli.cmd {
        Cmd::Check { file } => cmd::check(&file).map(|_| true),
        Cmd::DumpAst { file } => cmd::dump_ast(&file).map(|_| true),
        Cmd::Run { file, node, steps, obs, out } => {
            cmd::run(&file, node.as_deref(), steps, obs.as_deref(), out.as_deref()).map(|_| true)
        }
        Cmd::Infer { file, node, steps, particles, cloud, algo, seed, obs, out, ess_threshold, resampling } => {
            let n = threads();
            rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
            let cfg = InferConfig {
                particles,
                cloud,
                seed,
                ess_threshold,
                resampling: match resampling {
                    ResamplingArg::Multinomial => Resampling::Multinomial,
                    ResamplingArg::Systematic => Resampling::Systematic,
                },
                parallel: n > 1,
            };
            let job = cmd::InferSpec {
                file: &file,
                node: node.as_deref(),
                steps,
                obs: obs.as_deref(),
                out: out.as_deref(),
                algo,
                cfg,
            };
            cmd::infer(job).map(|_| true)
        }
        Cmd::CompileApf { file, out } => {
            let (prog, perm) = cmd::compile_apf(&file, out.as_deref())?;
            eprintln!("wrote {} and {}", prog.display(), perm.display());
            Ok(true)
        }
        Cmd::Equiv { left, right, node, right_node, perm, steps, trials, seed, obs } => cmd::equiv(cmd::EquivSpec {
            left: &left,
            right: &right,
            node: node.as_deref(),
            right_node: right_node.as_deref(),
            perm: perm.as_deref(),
            steps,
            trials,
            seed,
            obs: obs.as_deref(),
        }),
        Cmd::Oracle { file, node, steps, grid, agree, seed, obs } => cmd::oracle(cmd::OracleSpec {
            file: &file,
            node: node.as_deref(),
            steps,
            obs: obs.as_deref(),
            grid,
            agree,
            seed,
        }),
    }
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
