use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::Parser;

use vecfl::harness::{self, comparison_csv, emit_metrics, load_config, write_atomic, ExperimentResult, SimConfig};

/// Quantized federated learning over a vehicular edge network.
#[derive(Debug, Parser)]
#[command(name = "vecfl", version, about)]
struct Cli {
    /// JSON configuration file; omitted keys take their defaults.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Master seed (overrides the config).
    #[arg(long, value_name = "U64")]
    seed: Option<u64>,

    /// Quantization scheme (overrides the config).
    #[arg(long, value_parser = ["dqn-gradq", "ada-gradq", "fix2", "fix6", "fix10", "random"])]
    scheme: Option<String>,

    /// Training episodes (overrides `T`).
    #[arg(long, value_name = "N")]
    episodes: Option<u64>,

    /// Output directory (overrides `out`).
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,

    /// Run one experiment per first weight, e.g. 0.1,0.3,0.5,0.7,0.9.
    #[arg(long, value_name = "LIST", value_delimiter = ',', conflicts_with = "participants")]
    sweep_w1: Option<Vec<f64>>,

    /// Run one experiment per participant count, e.g. 2,4,6,8.
    #[arg(long, value_name = "LIST", value_delimiter = ',')]
    participants: Option<Vec<usize>>,
}

fn label(x: f64) -> String {
    harness::fmt_g(x)
}

fn emit_all(results: &[ExperimentResult], out: &Path, prefix: &str, table: &str, keys: &[String]) -> vecfl::Result<()> {
    for (res, key) in results.iter().zip(keys) {
        emit_metrics(res, &out.join(format!("{prefix}{key}")))?;
    }
    std::fs::create_dir_all(out)?;
    write_atomic(&out.join(table), &comparison_csv(results))
}

fn run(cli: Cli) -> vecfl::Result<()> {
    let mut cfg = match &cli.config {
        Some(path) => load_config(path)?,
        None => SimConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(scheme) = cli.scheme {
        cfg.scheme = scheme;
    }
    if let Some(t) = cli.episodes {
        cfg.episodes = t;
    }
    if let Some(out) = cli.out {
        cfg.out = out;
    }
    let cfg = cfg.finalize()?;
    log::info!("scheme {} seed {} -> {}", cfg.scheme, cfg.seed, cfg.out.display());

    if let Some(weights) = &cli.sweep_w1 {
        let results = harness::sweep_w1(&cfg, weights)?;
        let keys: Vec<String> = weights.iter().map(|&w| label(w)).collect();
        emit_all(&results, &cfg.out, "w1_", "sweep.csv", &keys)?;
        for r in &results {
            println!("w1 = {}: G_pi = {}, avg_q = {}", label(r.w1), label(r.summary.g_pi), label(r.summary.avg_q));
        }
    } else if let Some(counts) = &cli.participants {
        let results = harness::sweep_participants(&cfg, counts)?;
        let keys: Vec<String> = counts.iter().map(|k| k.to_string()).collect();
        emit_all(&results, &cfg.out, "K_", "participants.csv", &keys)?;
        for (k, r) in counts.iter().zip(&results) {
            println!("K = {k}: avg_total_time = {}", label(r.summary.avg_total_time));
        }
    } else {
        let res = harness::run_experiment(&cfg)?;
        emit_metrics(&res, &cfg.out)?;
        let s = &res.summary;
        println!(
            "{}: avg_total_time = {}, avg_QE = {}, G_pi = {}, test_acc = {}",
            s.scheme,
            label(s.avg_total_time),
            label(s.avg_qe),
            label(s.g_pi),
            label(s.test_acc)
        );
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("VECFL_LOG", "warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let mut source = std::error::Error::source(&e);
            while let Some(s) = source {
                eprintln!("  caused by: {s}");
                source = s.source();
            }
            ExitCode::FAILURE
        }
    }
}
