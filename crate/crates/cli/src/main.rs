use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::Parser;
use qns_core::bench::{run_benchmark, BenchOptions, BenchmarkName};
use qns_core::cfd::GradientMethod;
use qns_core::hhl::Backend;
use qns_core::hybrid::ReadoutKind;

/// Benchmarks of the hybrid HHL pressure solver for 2D Navier-Stokes.
#[derive(Debug, Parser)]
#[command(name = "qns", version)]
struct Args {
    /// poisson1d | poisson2d | nc-sweep | cheb-demo | cavity-classical |
    /// cavity-fullstate | cavity-hybrid | tgv-hybrid
    benchmark: BenchmarkName,
    /// Interior points per axis (sample points for cheb-demo).
    #[arg(long)]
    grid: Option<usize>,
    #[arg(long)]
    clock_qubits: Option<usize>,
    #[arg(long)]
    trotter_steps: Option<usize>,
    #[arg(long, value_parser = ["spectral", "trotter"])]
    backend: Option<String>,
    /// Chebyshev modes per dimension.
    #[arg(long)]
    cheb_m: Option<usize>,
    /// Shots per overlap estimate.
    #[arg(long)]
    shots: Option<u64>,
    /// Hyperbolic stretching factor; 0 selects a uniform grid.
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    re: Option<f64>,
    #[arg(long)]
    dt: Option<f64>,
    /// Time steps (step cap for cavity-classical).
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long, value_parser = ["fullstate", "chebyshev"])]
    readout: Option<String>,
    #[arg(long, value_parser = ["central", "analytic"])]
    gradient: Option<String>,
    #[arg(long, env = "QNS_SEED", default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "qns-out")]
    out: PathBuf,
    /// Exit nonzero if any acceptance threshold is breached.
    #[arg(long)]
    check: bool,
    /// Full-length cavity runs (2000 steps).
    #[arg(long)]
    long: bool,
    /// Worker threads for the data-parallel kernels and sweep points.
    #[arg(long)]
    jobs: Option<usize>,
}

fn options(a: &Args) -> anyhow::Result<BenchOptions> {
    let hybrid =
        matches!(a.benchmark, BenchmarkName::CavityFullstate | BenchmarkName::CavityHybrid | BenchmarkName::TgvHybrid);
    if !hybrid && (a.readout.is_some() || a.gradient.is_some() || a.long) {
        bail!("--readout, --gradient and --long apply only to the hybrid flow benchmarks");
    }
    Ok(BenchOptions {
        grid: a.grid,
        clock_qubits: a.clock_qubits,
        trotter_steps: a.trotter_steps,
        backend: a.backend.as_deref().map(str::parse::<Backend>).transpose()?,
        cheb_m: a.cheb_m,
        shots: a.shots,
        beta: a.beta,
        re: a.re,
        dt: a.dt,
        steps: a.steps,
        readout: a.readout.as_deref().map(str::parse::<ReadoutKind>).transpose()?,
        gradient: a.gradient.as_deref().map(str::parse::<GradientMethod>).transpose()?,
        seed: a.seed,
        long: a.long,
        nc_range: None,
    })
}

fn run(a: &Args) -> anyhow::Result<bool> {
    if let Some(j) = a.jobs {
        qns_core::configure_threads(j)?;
    }
    let opts = options(a)?;
    let report =
        run_benchmark(a.benchmark, &opts, &a.out).with_context(|| format!("benchmark {} failed", a.benchmark))?;
    let text = report.render();
    std::fs::write(a.out.join(format!("{}_report.txt", a.benchmark)), &text)?;
    report.write_csv(&a.out.join(format!("{}_report.csv", a.benchmark)))?;
    print!("{text}");
    if a.check {
        for c in report.checks.iter().filter(|c| !c.passed) {
            eprintln!("threshold breached: {} = {:e} > {:e}", c.name, c.value, c.threshold);
        }
    }
    Ok(!a.check || report.all_passed())
}

fn main() -> ExitCode {
    let args = Args::parse();
    match run(&args) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
