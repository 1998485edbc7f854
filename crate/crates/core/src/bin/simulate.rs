use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::Parser;

use spin1_cov::harness::validation::oracle_check;
use spin1_cov::harness::{run_experiment, run_sweep, write_gamma_diagonal, write_results, ExperimentConfig, RunResult, SweepSpec};

/// Gaussian simulation of a Faraday-probed spin-1 ensemble.
#[derive(Parser, Debug)]
#[command(name = "simulate", version)]
struct Cli {
    /// Experiment configuration (JSON). Missing fields take preset values.
    config: PathBuf,

    /// Results CSV; stdout if omitted.
    #[arg(long)]
    out: Option<PathBuf>,

    /// Compare the engine against exact single-atom references and fail if
    /// they disagree.
    #[arg(long)]
    oracle_check: bool,

    /// Sweep one numeric config field: `param=lo:hi:n` (dotted path).
    #[arg(long)]
    sweep: Option<String>,
}

const FIELD_TOL: f64 = 1e-8;
const PULSE_TOL: f64 = 1e-4;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let mut src = std::error::Error::source(e.as_ref());
            while let Some(s) = src {
                eprintln!("  caused by: {s}");
                src = s.source();
            }
            ExitCode::FAILURE
        }
    }
}

type BoxError = Box<dyn std::error::Error>;

fn run(cli: Cli) -> Result<(), BoxError> {
    let text = std::fs::read_to_string(&cli.config)
        .map_err(|e| format!("reading {}: {e}", cli.config.display()))?;
    let cfg = ExperimentConfig::from_json(&text)?;

    if cli.oracle_check {
        check_oracles(&cfg, cli.out.as_deref())?;
        return Ok(());
    }

    if let Some(sweep) = &cli.sweep {
        let spec: SweepSpec = sweep.parse()?;
        let mut failed = 0;
        for (value, result) in run_sweep(&cfg, &spec) {
            match result {
                Ok(r) => {
                    let path = sweep_path(cli.out.as_deref(), &spec.param, value);
                    write_outputs(&r, Some(&path), cfg.toggles.gamma_diagonal)?;
                    eprintln!("{}={value}: {} pulses -> {}", spec.param, r.records.len(), path.display());
                }
                Err(e) => {
                    failed += 1;
                    eprintln!("{}={value}: {e}", spec.param);
                }
            }
        }
        if failed > 0 {
            return Err(format!("{failed} sweep run(s) failed").into());
        }
        return Ok(());
    }

    let result = run_experiment(&cfg)?;
    write_outputs(&result, cli.out.as_deref(), cfg.toggles.gamma_diagonal)?;
    let m = &result.metadata;
    eprintln!(
        "config {}: {} pulses, Larmor {:.4} kHz, tau_gauss {:.3e} s, substeps {}/{}",
        m.config_hash,
        result.records.len(),
        m.larmor_hz / 1e3,
        m.tau_gauss,
        m.pulse_substeps,
        m.dark_substeps
    );
    Ok(())
}

fn write_outputs(result: &RunResult, out: Option<&Path>, diagonal: bool) -> Result<(), BoxError> {
    match out {
        Some(path) => {
            write_results(BufWriter::new(File::create(path)?), result)?;
            if diagonal {
                let diag = path.with_extension("gamma_diag.csv");
                write_gamma_diagonal(BufWriter::new(File::create(&diag)?), result)?;
            }
        }
        None => {
            write_results(io::stdout().lock(), result)?;
            if diagonal {
                eprintln!("gamma diagonal output needs --out");
            }
        }
    }
    Ok(())
}

fn sweep_path(out: Option<&Path>, param: &str, value: f64) -> PathBuf {
    let base = out.unwrap_or(Path::new("results.csv"));
    let stem = base.file_stem().and_then(|s| s.to_str()).unwrap_or("results");
    let name = format!("{stem}_{}_{value:e}.csv", param.replace('.', "_"));
    base.with_file_name(name)
}

fn check_oracles(cfg: &ExperimentConfig, out: Option<&Path>) -> Result<(), BoxError> {
    let check = oracle_check(cfg, 200, 10_000)?;
    let mut w: Box<dyn Write> = match out {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(io::stdout().lock()),
    };
    writeln!(w, "t_s,component,engine,oracle,abs_diff")?;
    let names = spin1_cov::algebra::NAMES;
    for p in &check.field_trace {
        for k in 0..8 {
            writeln!(
                w,
                "{:.10e},{},{:.15e},{:.15e},{:.3e}",
                p.t,
                names[k],
                p.engine[k],
                p.oracle[k],
                (p.engine[k] - p.oracle[k]).abs()
            )?;
        }
    }
    w.flush()?;
    eprintln!(
        "field evolution: max deviation {:.3e} (tolerance {FIELD_TOL:.0e}); \
         first pulse with {} substeps: max deviation {:.3e} (tolerance {PULSE_TOL:.0e})",
        check.max_field_error, check.pulse_substeps, check.pulse_error
    );
    if check.max_field_error > FIELD_TOL || check.pulse_error > PULSE_TOL {
        return Err("engine disagrees with the oracle".into());
    }
    Ok(())
}
