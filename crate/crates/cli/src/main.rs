use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use amopt_core::harness::{self, ExperimentConfig};
use amopt_core::Error;
use clap::{Parser, Subcommand};

/// Benchmark harness for stochastic Anderson mixing optimizers.
#[derive(Parser)]
#[command(name = "amopt", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and write its JSONL trace.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Trace file; overrides `trace.output`.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Override a config entry, e.g. `--set optimizer.m=5`.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        /// Shorthand for `--set problem.header=true` on CSV problems.
        #[arg(long)]
        csv_header: bool,
    },
    /// Run several configs over shared seeds and print a summary table.
    Compare {
        #[arg(long = "config", num_args = 1.., required = true)]
        configs: Vec<PathBuf>,
        #[arg(long, default_value_t = 1)]
        seeds: usize,
    },
    /// Compare Anderson mixing with GMRES on a random SPD system.
    GmresCheck {
        #[arg(long, default_value_t = 30)]
        dim: usize,
        #[arg(long, default_value_t = 1e3)]
        cond: f64,
        #[arg(long, default_value_t = 15)]
        steps: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn exit_code(e: &Error) -> ExitCode {
    if e.is_numerical() {
        ExitCode::from(2)
    } else {
        ExitCode::from(1)
    }
}

fn run(
    config: PathBuf,
    out: Option<PathBuf>,
    seed: Option<u64>,
    mut overrides: Vec<String>,
    csv_header: bool,
) -> Result<(), Error> {
    if csv_header {
        overrides.push("problem.header=true".into());
    }
    if let Some(s) = seed {
        overrides.push(format!("seed={s}"));
    }
    let cfg = ExperimentConfig::load(&config, &overrides)?;
    let out = out.or_else(|| cfg.trace.output.clone());
    let result = match &out {
        Some(path) => {
            let file = File::create(path)
                .map_err(|e| Error::config("trace.output", format!("{}: {e}", path.display())))?;
            let mut w = BufWriter::new(file);
            let r = harness::run_experiment(&cfg, Some(&mut w));
            w.flush()?;
            r
        }
        None => harness::run_experiment(&cfg, None),
    }?;
    println!("{}", result.summary);
    if let Some(path) = out {
        println!("trace              {}", path.display());
    }
    Ok(())
}

fn compare(configs: Vec<PathBuf>, seeds: usize) -> Result<(), Error> {
    let threads = harness::threads_from_env()?;
    let loaded = configs
        .iter()
        .map(|p| {
            let label = p.file_stem().map_or_else(
                || p.display().to_string(),
                |s| s.to_string_lossy().into_owned(),
            );
            ExperimentConfig::load(p, &[]).map(|c| (label, c))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let rows = harness::compare(&loaded, seeds, threads)?;
    print!("{}", harness::format_table(&rows));
    Ok(())
}

fn gmres_check(dim: usize, cond: f64, steps: usize, seed: u64) -> Result<(), Error> {
    if dim == 0 || steps == 0 {
        return Err(Error::config(
            "gmres-check",
            "dim and steps must be positive",
        ));
    }
    if !(cond >= 1.0 && cond.is_finite()) {
        return Err(Error::config("gmres-check.cond", "must be at least 1"));
    }
    let check = harness::gmres_check(dim, cond, steps, seed)?;
    for (k, (p, q)) in check.plain.iter().zip(&check.preconditioned).enumerate() {
        println!("k={:<3} am_vs_gmres={p:.3e}  pam_vs_pgmres={q:.3e}", k + 1);
    }
    println!("max deviation (plain)          {:.3e}", check.max_plain());
    println!(
        "max deviation (preconditioned) {:.3e}",
        check.max_preconditioned()
    );
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run {
            config,
            out,
            seed,
            overrides,
            csv_header,
        } => run(config, out, seed, overrides, csv_header),
        Command::Compare { configs, seeds } => compare(configs, seeds),
        Command::GmresCheck {
            dim,
            cond,
            steps,
            seed,
        } => gmres_check(dim, cond, steps, seed),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
