//! Command-line front end for the nudging experiments.
//!
//! Exit codes: 0 success, 1 configuration error, 2 numerical failure, 3 I/O error.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use nudging::conditions::{self, ConditionInputs, FlowScales};
use nudging::control::ControllerKind;
use nudging::harness::{self, ExperimentConfig, Overrides, Preset, RecordWriter};
use nudging::Error;

#[derive(Parser, Debug)]
#[command(name = "nudging", version, about = "Nudging data assimilation experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Temporal convergence study over the configured dt_list.
    Converge(RunArgs),
    /// Long-time run against the manufactured solution.
    Longtime(RunArgs),
    /// Coarse model nudged towards a finer forced simulation.
    Saturate(RunArgs),
    /// Same-grid twin with constant chi, for the exponential decay bound.
    TwinDecay(RunArgs),
    /// Evaluate the parameter conditions without running a simulation.
    Conditions(ConditionArgs),
}

#[derive(Args, Debug, Clone)]
struct RunArgs {
    /// TOML file layered over the subcommand's preset.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    chi0: Option<f64>,
    /// constant, algo1 or algo2
    #[arg(long)]
    controller: Option<ControllerKind>,
    /// Switch to a Fourier observer with this cutoff.
    #[arg(long)]
    observer_k: Option<usize>,
    #[arg(long)]
    nu: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ConditionArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Preset supplying nu, chi, and the observer.
    #[arg(long, default_value = "twin-decay")]
    preset: String,
    /// Large-scale velocity U.
    #[arg(long, default_value_t = 1.0)]
    velocity: f64,
    /// Large-scale length L; defaults to the domain side.
    #[arg(long)]
    length: Option<f64>,
    /// Forcing wavenumber; defaults to the model's forcing mode.
    #[arg(long)]
    kf: Option<f64>,
    /// Time average of ||grad u||^2; defaults to |Omega| (U kf)^2.
    #[arg(long)]
    avg_grad_sq: Option<f64>,
    /// Time average of ||grad u||^4; defaults to the square of avg_grad_sq.
    #[arg(long)]
    avg_grad_4: Option<f64>,
    /// Micro-scale ||e|| / ||grad e|| of the error for the refined condition.
    #[arg(long)]
    lambda_t: Option<f64>,
}

impl RunArgs {
    fn overrides(&self) -> Overrides {
        Overrides {
            dt: self.dt,
            chi0: self.chi0,
            controller: self.controller,
            observer_k: self.observer_k,
            nu: self.nu,
            seed: self.seed,
            out: self.out.clone(),
        }
    }

    fn resolve(&self, preset: Preset) -> nudging::Result<ExperimentConfig> {
        let base = preset.config();
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::load(&base, path)?,
            None => base,
        };
        cfg.apply(&self.overrides());
        cfg.validate()?;
        Ok(cfg)
    }
}

fn output_dir(cfg: &ExperimentConfig, preset: Preset) -> PathBuf {
    cfg.output_path
        .clone()
        .unwrap_or_else(|| Path::new("out").join(preset.name()))
}

fn write_file(path: &Path, text: &str) -> nudging::Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| Error::Io {
            path: dir.to_path_buf(),
            source: e,
        })?;
    }
    std::fs::write(path, text).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn converge(args: &RunArgs) -> nudging::Result<()> {
    let mut cfg = args.resolve(Preset::Converge)?;
    if let Some(dt) = args.dt {
        cfg.dt_list = vec![dt];
    }
    let dir = output_dir(&cfg, Preset::Converge);
    let rows = harness::run_convergence(&cfg, &cfg.dt_list)?;
    write_file(&dir.join("config.toml"), &cfg.to_toml()?)?;
    harness::emit_convergence_csv(&rows, dir.join("convergence.csv"))?;
    println!("{:>12} {:>14} {:>8} {:>12}", "dt", "||u-v||", "rate", "chi_max");
    for r in &rows {
        let rate = r.rate.map(|x| format!("{x:.3}")).unwrap_or_else(|| "-".into());
        println!("{:>12.6} {:>14.6e} {:>8} {:>12.4e}", r.dt, r.final_err, rate, r.chi_max);
    }
    println!("wrote {}", dir.join("convergence.csv").display());
    Ok(())
}

fn twin(args: &RunArgs, preset: Preset) -> nudging::Result<()> {
    let cfg = args.resolve(preset)?;
    let dir = output_dir(&cfg, preset);
    write_file(&dir.join("config.toml"), &cfg.to_toml()?)?;
    let csv_path = dir.join("records.csv");
    let mut writer = RecordWriter::create(&csv_path)?;
    let summary = harness::run_twin_with(&cfg, |r, _| writer.write(r))?;
    writer.finish()?;
    let report = harness::condition_report(&cfg, &summary)?;
    harness::emit_report(&cfg, &report, &summary, dir.join("report.json"))?;
    println!(
        "{}: {} steps, final rel_err {:.4e}, max chi {:.4e}, repeats {}, forced {}",
        preset.name(),
        summary.steps,
        summary.final_rel_err,
        summary.chi_max_observed,
        summary.total_repeats,
        summary.forced_steps
    );
    println!("wrote {} and {}", csv_path.display(), dir.join("report.json").display());
    Ok(())
}

fn evaluate_conditions(args: &ConditionArgs) -> nudging::Result<()> {
    let preset: Preset = args.preset.parse()?;
    let cfg = args.run.resolve(preset)?;
    let observer = cfg.observer.build(cfg.length)?;
    let length = args.length.unwrap_or(cfg.length);
    let kf = args
        .kf
        .unwrap_or(std::f64::consts::TAU / cfg.length * cfg.model.forcing_mode() as f64);
    let scales = FlowScales::new(length, args.velocity, cfg.nu, Some(kf))?;
    let avg_grad_sq = args
        .avg_grad_sq
        .unwrap_or(cfg.length * cfg.length * (args.velocity * kf).powi(2));
    let inputs = ConditionInputs {
        nu: cfg.nu,
        chi: cfg.controller.chi0,
        chi0: 1.0,
        c1: observer.c1(),
        h: observer.h(),
        avg_grad_sq,
        avg_grad_4: args.avg_grad_4.unwrap_or(avg_grad_sq * avg_grad_sq),
        lambda_t: args.lambda_t,
    };
    let report = conditions::evaluate(inputs, Some(&scales))?;
    let text = serde_json::to_string_pretty(&report).map_err(|e| Error::Numerical(e.to_string()))?;
    // A closed pipe (e.g. `| head`) is not an error here.
    let _ = writeln!(std::io::stdout(), "{text}");
    if let Some(dir) = &cfg.output_path {
        write_file(&dir.join("conditions.json"), &text)?;
    }
    Ok(())
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Numerical(_) => 2,
        Error::Io { .. } | Error::Csv { .. } => 3,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match &cli.command {
        Command::Converge(a) => converge(a),
        Command::Longtime(a) => twin(a, Preset::Longtime),
        Command::Saturate(a) => twin(a, Preset::Saturate),
        Command::TwinDecay(a) => twin(a, Preset::TwinDecay),
        Command::Conditions(a) => evaluate_conditions(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
