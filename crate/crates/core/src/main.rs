use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use nlburgers::integrator::IntegratorConfig;
use nlburgers::runner::{self, ConfigOverrides, RunConfig};
use nlburgers::validation::{self, AsymptoticSetup, ConvergenceReport, Level, Verdict};
use nlburgers::{ModelKind, ModelParams, SpectralGrid, Spectrum};

#[derive(Parser)]
#[command(name = "nlburgers", version, about = "Nonlocal Burgers pseudo-spectral solver")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one simulation and write timeseries.csv, snapshots and run.json.
    Run(RunArgs),
    /// Run one simulation per value of a parameter, each in its own directory.
    Sweep(SweepArgs),
    /// Run a validation experiment and write its JSON report.
    Validate(ValidateArgs),
}

#[derive(Args, Clone, Debug, Default)]
struct RunArgs {
    /// JSON file with the same keys as the flags (snake_case).
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    model: Option<ModelKind>,
    #[arg(long, allow_hyphen_values = true)]
    alpha: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    beta: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    epsilon: Option<f64>,
    /// Number of grid nodes N.
    #[arg(long)]
    n_modes: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    t_final: Option<f64>,
    #[arg(long)]
    rtol: Option<f64>,
    #[arg(long)]
    atol: Option<f64>,
    #[arg(long)]
    dt_init: Option<f64>,
    #[arg(long)]
    dt_max: Option<f64>,
    /// `sines:A,K,PHASE;...`, `chirp:A,B` or `random:A`.
    #[arg(long, allow_hyphen_values = true)]
    initial: Option<String>,
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    output_every: Option<f64>,
    #[arg(long)]
    output_dir: Option<PathBuf>,
    #[arg(long)]
    no_dealias: bool,
    #[arg(long)]
    seed: Option<u64>,
    /// Accept alpha outside [0, 2] for the general model.
    #[arg(long)]
    allow_any_alpha: bool,
}

impl RunArgs {
    fn overrides(&self) -> ConfigOverrides {
        ConfigOverrides {
            model: self.model,
            alpha: self.alpha,
            beta: self.beta,
            epsilon: self.epsilon,
            n_modes: self.n_modes,
            t_final: self.t_final,
            rtol: self.rtol,
            atol: self.atol,
            dt_init: self.dt_init,
            dt_max: self.dt_max,
            initial: self.initial.clone(),
            preset: self.preset.clone(),
            output_every: self.output_every,
            output_dir: self.output_dir.clone(),
            no_dealias: self.no_dealias.then_some(true),
            seed: self.seed,
            allow_any_alpha: self.allow_any_alpha.then_some(true),
        }
    }

    fn resolve(&self) -> nlburgers::Result<RunConfig> {
        let file = self.config.as_deref().map(ConfigOverrides::from_file).transpose()?;
        runner::parse_config(file.as_ref(), &self.overrides())
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum SweepParam {
    Alpha,
    Beta,
    Epsilon,
    NModes,
    Seed,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long, value_enum)]
    param: SweepParam,
    /// Comma-separated values.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
    values: Vec<f64>,
    /// Maximum concurrent runs (defaults to available cores).
    #[arg(long)]
    workers: Option<usize>,
    #[command(flatten)]
    run: RunArgs,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Experiment {
    /// Linearized runs against `e^{λt}` for alpha 0, 1, 2 and k = 1, 2, 4, 10.
    Linear,
    /// General right-hand side against the alpha 0/1/2 forms.
    CrossCheck,
    /// Reduced model against the full system over an epsilon sweep.
    Asymptotic,
    /// Grid refinement study of a run configuration.
    SelfConvergence,
}

#[derive(Args)]
struct ValidateArgs {
    #[arg(value_enum)]
    experiment: Experiment,
    /// Report path.
    #[arg(long, default_value = "validation.json")]
    out: PathBuf,
    /// Grid nodes for the asymptotic sweep.
    #[arg(long, default_value_t = 512)]
    n_nodes: usize,
    /// Comparison time for the self-convergence study.
    #[arg(long)]
    t_out: Option<f64>,
    /// Run configuration for the self-convergence study (`--seed` also seeds
    /// the cross-check).
    #[command(flatten)]
    run: RunArgs,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run(args) => cmd_run(&args),
        Command::Sweep(args) => cmd_sweep(&args),
        Command::Validate(args) => cmd_validate(&args),
    };
    match outcome {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn cmd_run(args: &RunArgs) -> nlburgers::Result<i32> {
    let cfg = args.resolve()?;
    let summary = runner::run(&cfg)?;
    let t = &summary.metadata.termination;
    eprintln!(
        "{:?} at t = {} after {} steps ({} rejected); outputs in {}",
        t.status,
        t.time,
        t.accepted_steps,
        t.rejected_steps,
        cfg.output_dir.display()
    );
    Ok(summary.metadata.exit_code)
}

fn sweep_label(param: SweepParam, v: f64) -> String {
    match param {
        SweepParam::Alpha => format!("alpha_{v}"),
        SweepParam::Beta => format!("beta_{v}"),
        SweepParam::Epsilon => format!("epsilon_{v}"),
        SweepParam::NModes => format!("n_modes_{v}"),
        SweepParam::Seed => format!("seed_{v}"),
    }
}

fn cmd_sweep(args: &SweepArgs) -> nlburgers::Result<i32> {
    let base = args.run.resolve()?;
    let mut configs = Vec::new();
    for &v in &args.values {
        let mut cfg = base.clone();
        match args.param {
            SweepParam::Alpha => cfg.alpha = v,
            SweepParam::Beta => cfg.beta = v,
            SweepParam::Epsilon => cfg.epsilon = v,
            SweepParam::NModes => cfg.n_modes = v as usize,
            SweepParam::Seed => cfg.seed = v as u64,
        }
        cfg.output_dir = base.output_dir.join(sweep_label(args.param, v));
        cfg.validate()?;
        configs.push(cfg);
    }
    let workers = args
        .workers
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
        .max(1);
    let mut codes = Vec::new();
    for chunk in configs.chunks(workers) {
        let results: Vec<_> = std::thread::scope(|s| {
            let handles: Vec<_> = chunk.iter().map(|c| s.spawn(move || runner::run(c))).collect();
            handles.into_iter().map(|h| h.join().expect("sweep worker panicked")).collect()
        });
        for (cfg, res) in chunk.iter().zip(results) {
            let code = match res {
                Ok(summary) => summary.metadata.exit_code,
                Err(e) => {
                    eprintln!("{}: error: {e}", cfg.output_dir.display());
                    1
                }
            };
            eprintln!("{}: exit {code}", cfg.output_dir.display());
            codes.push(code);
        }
    }
    Ok(if codes.contains(&1) { 1 } else { 0 })
}

fn write_report(path: &Path, report: &ConvergenceReport) -> nlburgers::Result<i32> {
    std::fs::write(path, report.to_json()?)?;
    eprintln!("{:?}: {}", report.verdict, path.display());
    Ok(if report.verdict == Verdict::Pass { 0 } else { 1 })
}

fn cmd_validate(args: &ValidateArgs) -> nlburgers::Result<i32> {
    let report = match args.experiment {
        Experiment::Linear => linear_report()?,
        Experiment::CrossCheck => {
            let mut worst = None::<ConvergenceReport>;
            for alpha in [0u8, 1, 2] {
                let r = validation::cross_check_rhs(alpha, 100, args.run.seed.unwrap_or(0), 256)?;
                let replace = worst.as_ref().is_none_or(|w| {
                    r.verdict == Verdict::Fail || r.errors[0] > w.errors[0] && w.verdict == Verdict::Pass
                });
                if replace {
                    worst = Some(r);
                }
            }
            worst.expect("three checks ran")
        }
        Experiment::Asymptotic => {
            let grid = SpectralGrid::new(args.n_nodes)?;
            let mut p0 = Spectrum::sine_mode(&grid, 1, 0.5);
            p0.add_scaled(0.25, &Spectrum::cosine_mode(&grid, 2, 1.0));
            let setup = AsymptoticSetup {
                alpha: 2.0,
                beta: 2.0,
                tau_final: 0.5,
                integrator: IntegratorConfig::default(),
                min_order: 0.8,
            };
            validation::asymptotic_consistency(&[0.1, 0.05, 0.025], &p0, &setup)?
        }
        Experiment::SelfConvergence => {
            let cfg = args.run.resolve()?;
            let params = cfg.model_params();
            let t_out = args.t_out.unwrap_or(cfg.t_final);
            let initial = cfg.initial.clone();
            let seed = cfg.seed;
            let levels: Vec<Level> = [cfg.n_modes / 2, cfg.n_modes, cfg.n_modes * 2]
                .into_iter()
                .map(|n| Level { n_nodes: n, rtol: cfg.rtol })
                .collect();
            validation::self_convergence(
                &params,
                &move |g| initial.spectrum(g, seed),
                &cfg.integrator_config(),
                &levels,
                t_out,
                2.0,
            )?
        }
    };
    write_report(&args.out, &report)
}

fn linear_report() -> nlburgers::Result<ConvergenceReport> {
    let config = IntegratorConfig::default();
    let mut values = Vec::new();
    let mut errors = Vec::new();
    let mut metadata = std::collections::BTreeMap::new();
    for (kind, alpha) in [(ModelKind::Alpha0, 0.0), (ModelKind::Alpha1, 1.0), (ModelKind::Alpha2, 2.0)] {
        let params = ModelParams::new(kind, alpha, 2.0, 1.0);
        for k in [1usize, 2, 4, 10] {
            let e = validation::linear_oracle_error(k, &params, 64, &config)?;
            metadata.insert(format!("{}_k{k}_relative", kind.name()), e.relative.to_string());
            values.push(k as f64);
            errors.push(e.scaled);
        }
    }
    // Errors are in units of the integrator tolerance `atol + rtol·|exact|`.
    let threshold = 10.0;
    let ok = errors.iter().all(|e| *e <= threshold);
    Ok(ConvergenceReport {
        parameter: "wavenumber".into(),
        values,
        errors,
        estimated_order: None,
        threshold,
        verdict: Verdict::from_bool(ok),
        metadata,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }
}
