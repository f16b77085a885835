use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use delam_fem::bench::BenchmarkName;
use delam_fem::cli::{execute_run, exit_code, parse_config, resolve_runs};
use delam_fem::Error;

/// Delamination benchmarks with zero-thickness cohesive elements.
#[derive(Debug, Parser)]
#[command(version)]
struct Args {
    /// JSON run specification.
    #[arg(long, required_unless_present = "list_benchmarks")]
    config: Option<PathBuf>,
    /// Output directory; overrides `output_dir` from the config (default `out`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Print the available benchmark names and exit.
    #[arg(long)]
    list_benchmarks: bool,
    /// Seed for the interface mesh perturbation.
    #[arg(long)]
    seed: Option<u64>,
    /// Only log warnings and errors.
    #[arg(long)]
    quiet: bool,
}

fn init_threads() -> Result<(), Error> {
    let Ok(v) = std::env::var("DELAM_FEM_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .map_err(|_| Error::Config(format!("DELAM_FEM_THREADS must be a non-negative integer, got {v:?}")))?;
    if n > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(format!("cannot size the worker pool: {e}")))?;
    }
    Ok(())
}

fn run(args: &Args) -> Result<i32, Error> {
    if args.list_benchmarks {
        for b in BenchmarkName::ALL {
            println!("{b}");
        }
        return Ok(0);
    }
    init_threads()?;
    let path = args.config.as_ref().expect("clap enforces --config");
    let text =
        std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    let cfg = parse_config(&text)?;
    let runs = resolve_runs(&cfg, args.seed)?;
    let out = args.out.clone().or_else(|| cfg.output_dir.clone()).unwrap_or_else(|| PathBuf::from("out"));
    log::info!("runs={} out={}", runs.len(), out.display());
    let mut code = 0;
    for run in &runs {
        let outcome = execute_run(run, &out)?;
        let s = &outcome.summary;
        println!(
            "{} {} {} alpha=({:e},{:e}) peak={:.6} at {:.4} mm steps={} iterations={} status={} -> {}",
            s.run_id,
            run.benchmark,
            run.formulation.name(),
            run.alpha_n,
            run.alpha_t,
            s.peak_load,
            s.disp_at_peak,
            s.steps,
            s.total_iterations,
            s.status,
            outcome.dir.display()
        );
        if let Some(e) = &outcome.abort {
            log::error!("run {} stopped: {e}", s.run_id);
            code = code.max(exit_code(e));
        }
    }
    Ok(code)
}

fn main() -> ExitCode {
    let args = Args::parse();
    let level = if args.quiet { "warn" } else { "info" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(&args) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
