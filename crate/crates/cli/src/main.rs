use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use qsysid_core::crlb::{rho, CrlbAccumulator};
use qsysid_core::harness::{
    efficiency_report, efficiency_report_for, rate_slope, run_experiment, write_outputs, ExperimentConfig, RunOptions,
};
use qsysid_core::model::{example1, GaussianNoise, QuantizerSpec, RegressorSource};
use qsysid_core::Error;

/// Identification of linear systems from quantized observations.
#[derive(Debug, Parser)]
#[command(name = "qsysid", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the Monte-Carlo experiment described by a config file.
    Simulate(SimulateArgs),
    /// Tabulate the per-sample Fisher information and the bound trace.
    Crlb(CrlbArgs),
    /// Reproduce the third-order benchmark system experiment.
    Example1(Example1Args),
    /// Check a config file and the constant-weight conditions.
    Validate(ValidateArgs),
}

#[derive(Debug, Args)]
struct OutputArgs {
    /// Directory for output files.
    #[arg(long, env = "QSYSID_OUTDIR", default_value = ".")]
    outdir: PathBuf,

    /// Worker threads (all cores when omitted).
    #[arg(long)]
    jobs: Option<usize>,

    /// Also write per-step records of one trial to <name>_trace.csv.
    #[arg(long, default_value_t = false)]
    trace: bool,

    /// Trial recorded by --trace.
    #[arg(long, default_value_t = 0)]
    trace_trial: usize,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    /// TOML experiment config.
    config: PathBuf,

    /// Number of trials [default: from config].
    #[arg(long)]
    trials: Option<usize>,

    /// Steps per trial [default: from config].
    #[arg(long)]
    horizon: Option<usize>,

    /// Master seed [default: from config].
    #[arg(long)]
    seed: Option<u64>,

    /// Output file prefix [default: from config].
    #[arg(long)]
    name: Option<String>,

    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Debug, Args)]
struct CrlbArgs {
    /// TOML experiment config.
    config: PathBuf,

    /// Lower end of the output grid.
    #[arg(long, default_value_t = -3.0, allow_hyphen_values = true)]
    x_min: f64,

    /// Upper end of the output grid.
    #[arg(long, default_value_t = 3.0, allow_hyphen_values = true)]
    x_max: f64,

    /// Number of grid points.
    #[arg(long, default_value_t = 61)]
    points: usize,

    /// Steps of the bound table [default: from config].
    #[arg(long)]
    horizon: Option<usize>,

    /// Directory for output files.
    #[arg(long, env = "QSYSID_OUTDIR", default_value = ".")]
    outdir: PathBuf,
}

#[derive(Debug, Args)]
struct Example1Args {
    /// Number of trials.
    #[arg(long, default_value_t = example1::TRIALS)]
    trials: usize,

    /// Steps per trial.
    #[arg(long, default_value_t = example1::HORIZON)]
    horizon: usize,

    /// Master seed.
    #[arg(long, default_value_t = 1)]
    seed: u64,

    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Debug, Args)]
struct ValidateArgs {
    /// TOML experiment config.
    config: PathBuf,
}

fn load(path: &Path) -> Result<ExperimentConfig, Error> {
    ExperimentConfig::from_path(path).map_err(|e| match e {
        Error::Io(io) => Error::config("config", format!("cannot read {}: {io}", path.display())),
        other => other,
    })
}

fn run_and_report(cfg: &ExperimentConfig, out: &OutputArgs) -> Result<(), Error> {
    let opts = RunOptions {
        jobs: out.jobs,
        trace_trial: out.trace.then_some(out.trace_trial),
    };
    let result = run_experiment::<f64>(cfg, &opts)?;
    let paths = write_outputs(&out.outdir, cfg, &result.metrics, result.trace.as_deref())?;
    let m = &result.metrics;
    if let Some(last) = m.rows.last() {
        println!("k = {}, trials = {}", last.k, m.trials);
        for (e, kind) in m.estimators.iter().enumerate() {
            let s = &last.stats[e];
            let slope = rate_slope(m, *kind).map_or_else(|_| "n/a".to_string(), |v| format!("{v:.4}"));
            let eff = efficiency_report_for(m, *kind)?;
            println!(
                "  {:<5} mse = {:.6e} (se {:.2e})  k*mse = {:.6}  mse/tr(crlb) = {:.4}  slope = {}",
                kind.name(),
                s.mse,
                s.mse_se,
                last.k as f64 * s.mse,
                eff.last().map_or(f64::NAN, |r| r.r1),
                slope
            );
        }
        println!("  k*tr(crlb) = {:.6}", last.k as f64 * last.trace_crlb);
        if let Ok(eff) = efficiency_report(m) {
            if let Some(r) = eff.last() {
                println!("  tr(mean P_hat)/tr(crlb) = {:.4}", r.r2);
            }
        }
        if m.violations > 0 {
            eprintln!("warning: {} steps violated the box or gain invariants", m.violations);
        }
    }
    println!("wrote {}", paths.metrics.display());
    println!("wrote {}", paths.meta.display());
    if let Some(t) = paths.trace {
        println!("wrote {}", t.display());
    }
    Ok(())
}

fn simulate(args: SimulateArgs) -> Result<(), Error> {
    let mut cfg = load(&args.config)?;
    if let Some(t) = args.trials {
        cfg.run.trials = t;
    }
    if let Some(h) = args.horizon {
        cfg.run.horizon = h;
        if cfg.run.checkpoints.as_ref().is_some_and(|c| c.last() != Some(&h)) {
            cfg.run.checkpoints = None;
        }
    }
    if let Some(s) = args.seed {
        cfg.regressors.seed = s;
    }
    if let Some(n) = args.name {
        cfg.name = n;
    }
    run_and_report(&cfg, &args.output)
}

fn crlb(args: CrlbArgs) -> Result<(), Error> {
    let mut cfg = load(&args.config)?;
    if let Some(h) = args.horizon {
        cfg.run.horizon = h;
        cfg.run.checkpoints = None;
    }
    if args.points < 2 || args.x_max.is_nan() || args.x_min.is_nan() || args.x_max <= args.x_min {
        return Err(Error::config("x-grid", "need --points >= 2 and --x-max > --x-min"));
    }
    let setup = cfg.build::<f64>()?;
    let spec = QuantizerSpec::<f64>::from_f64(&cfg.system.thresholds)?;
    let noise = GaussianNoise::new(cfg.system.sigma)?;
    let s2 = cfg.system.sigma * cfg.system.sigma;

    let mut table = String::from("x,rho,rho_sigma2\n");
    for i in 0..args.points {
        let x = args.x_min + (args.x_max - args.x_min) * i as f64 / (args.points - 1) as f64;
        let r = rho(x, &spec, &noise);
        table.push_str(&format!("{x:.11e},{r:.11e},{:.11e}\n", r * s2));
    }

    // bound along the regressor stream of trial 0
    let sys = &setup.system;
    let mut regs = cfg.regressors::<f64>(0)?;
    let mut acc = CrlbAccumulator::new(sys.dim(), spec, noise)?;
    let mut bound = String::from("k,trace_crlb,k_trace_crlb\n");
    let mut next = 0;
    for k in 1..=cfg.run.horizon {
        let phi = regs.next_regressor();
        acc.accumulate(&phi, sys.mean_output(&phi)?)?;
        if next < setup.checkpoints.len() && setup.checkpoints[next] == k {
            let tr = acc.bound()?.trace();
            bound.push_str(&format!("{k},{tr:.11e},{:.11e}\n", k as f64 * tr));
            next += 1;
        }
    }

    std::fs::create_dir_all(&args.outdir)?;
    let rho_path = args.outdir.join(format!("{}_crlb.csv", cfg.name));
    let bound_path = args.outdir.join(format!("{}_bound.csv", cfg.name));
    std::fs::write(&rho_path, table)?;
    std::fs::write(&bound_path, bound)?;
    println!("wrote {}", rho_path.display());
    println!("wrote {}", bound_path.display());
    Ok(())
}

fn validate(args: ValidateArgs) -> Result<(), Error> {
    let cfg = load(&args.config)?;
    if let Some(report) = cfg.weight_report()? {
        println!("wqnp weights: f_min = {:.6e}, gap = {}", report.f_min, report.gap);
        for v in report.violations() {
            println!("  not met: {v}");
        }
        if !report.is_admissible() {
            let first = report.violations().into_iter().next().unwrap_or_default();
            return Err(Error::config("wqnp.alphas", first));
        }
        if !report.contraction_ok {
            eprintln!("warning: the contraction condition is sufficient, not necessary; the run may still converge");
        }
    }
    cfg.build::<f64>()?;
    println!("config ok");
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Crlb(a) => crlb(a),
        Command::Example1(a) => {
            let cfg = ExperimentConfig::example1(a.trials, a.horizon, a.seed);
            run_and_report(&cfg, &a.output)
        }
        Command::Validate(a) => validate(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { 1 } else { 2 })
        }
    }
}
