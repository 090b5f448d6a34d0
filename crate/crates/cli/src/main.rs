use std::path::{Path, PathBuf};
use std::process::ExitCode;

use bandit_lds::harness::{self, ExperimentConfig, RegretReport, RunRecord};
use bandit_lds::lds::SystemPreset;
use bandit_lds::policies::lqr_gain;
use bandit_lds::Error;
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "bandit-lds", version, about = "Bandit control of linear dynamical systems")]
struct Cli {
    /// Suppress progress on stderr.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and write its result files.
    Run(RunArgs),
    /// Run the exploration phase only and report both identification methods.
    Sysid(RunArgs),
    /// Solve the Riccati equation with Q = I, R = I.
    Riccati(SourceArgs),
    /// Parse a config and print it with every default filled in.
    Validate(SourceArgs),
    /// Run every cell of a built-in grid.
    Grid(GridArgs),
}

#[derive(Args)]
struct SourceArgs {
    /// Experiment config (TOML).
    #[arg(long, conflicts_with_all = ["preset", "system"])]
    config: Option<PathBuf>,
    /// Built-in experiment cell, e.g. `sinusoidal-quadratic`.
    #[arg(long, conflicts_with = "system")]
    preset: Option<String>,
    /// System preset name (riccati only).
    #[arg(long)]
    system: Option<String>,
}

#[derive(Args)]
struct Overrides {
    /// Output directory [default: $BANDIT_LDS_OUT, else results/<name>].
    #[arg(long)]
    out: Option<PathBuf>,
    /// First seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Number of repetitions.
    #[arg(long)]
    runs: Option<usize>,
    /// Enable the hindsight oracle and regret report.
    #[arg(long)]
    oracle: bool,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    source: SourceArgs,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Args)]
struct GridArgs {
    /// `paper-known-dynamics`, `paper-unknown-dynamics` or `toy`.
    name: String,
    #[command(flatten)]
    overrides: Overrides,
}

const OUT_ENV: &str = "BANDIT_LDS_OUT";

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let level = if cli.quiet { "warn" } else { "info" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .target(env_logger::Target::Stderr)
        .init();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Io(_) => 1,
        Error::Run { source, .. } => exit_code(source),
        e if e.is_config() => 1,
        _ => 2,
    }
}

fn dispatch(cmd: Command) -> bandit_lds::Result<()> {
    match cmd {
        Command::Run(args) => {
            let cfg = apply(load(&args.source)?, &args.overrides)?;
            let out = out_dir(&args.overrides, &cfg.name);
            run_one(&cfg, &out)
        }
        Command::Sysid(args) => {
            let cfg = apply(load(&args.source)?, &args.overrides)?;
            let out = out_dir(&args.overrides, &cfg.name);
            let ids = harness::run_identification(&cfg)?;
            let mut json = serde_json::to_string_pretty(&ids).expect("reports serialize");
            json.push('\n');
            harness::write_atomic(&out.join("identification.json"), json.as_bytes())?;
            for id in &ids {
                for r in &id.reports {
                    println!(
                        "seed={}\tmethod={}\tT0={}\ta_error={:.6e}\tb_error={:.6e}",
                        id.seed,
                        r.method.tag(),
                        r.explore_steps,
                        r.a_error.unwrap_or(f64::NAN),
                        r.b_error.unwrap_or(f64::NAN)
                    );
                }
            }
            log::info!("wrote {}", out.join("identification.json").display());
            Ok(())
        }
        Command::Riccati(src) => {
            let sys = match (&src.system, &src.config, &src.preset) {
                (Some(name), _, _) => SystemPreset::from_name(name)?.build(),
                (None, None, None) => SystemPreset::DoubleIntegrator.build(),
                _ => load(&src)?.system.build()?,
            };
            let sol = lqr_gain(sys.a(), sys.b())?;
            let report = sol.report(sys.a(), sys.b());
            println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
            Ok(())
        }
        Command::Validate(src) => {
            let cfg = load(&src)?;
            print!("{}", cfg.to_toml());
            Ok(())
        }
        Command::Grid(args) => {
            let cells = harness::grid(&args.name)?;
            let root = out_dir(&args.overrides, &args.name);
            for cell in cells {
                let cfg = apply(cell, &args.overrides)?;
                log::info!("cell {}", cfg.name);
                run_one(&cfg, &root.join(&cfg.name))?;
            }
            Ok(())
        }
    }
}

fn load(src: &SourceArgs) -> bandit_lds::Result<ExperimentConfig> {
    match (&src.config, &src.preset) {
        (Some(path), _) => ExperimentConfig::load(path),
        (None, Some(name)) => harness::preset(name),
        (None, None) => Err(Error::Config("one of --config or --preset is required".into())),
    }
}

fn apply(mut cfg: ExperimentConfig, o: &Overrides) -> bandit_lds::Result<ExperimentConfig> {
    if let Some(seed) = o.seed {
        cfg.seed = seed;
        cfg.seeds = None;
    }
    if let Some(runs) = o.runs {
        cfg.runs = runs;
        cfg.seeds = None;
    }
    if o.oracle {
        cfg.oracle.enabled = true;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn out_dir(o: &Overrides, name: &str) -> PathBuf {
    match (&o.out, std::env::var_os(OUT_ENV)) {
        (Some(p), _) => p.clone(),
        (None, Some(root)) => Path::new(&root).join(name),
        (None, None) => Path::new("results").join(name),
    }
}

fn run_one(cfg: &ExperimentConfig, out: &Path) -> bandit_lds::Result<()> {
    let registry = bandit_lds::policies::ControllerRegistry::with_builtins();
    let progress = |done: usize, total: usize| log::info!("{}: seed {done}/{total} done", cfg.name);
    let record = harness::run_experiment_with(cfg, &registry, &progress)?;
    let regret = match record.oracles() {
        Some(o) if cfg.oracle.enabled => Some(harness::regret_report(&record, &o)?),
        _ => None,
    };
    harness::write_outputs(&record, regret.as_ref(), out)?;
    print_summary(&record, regret.as_ref())?;
    log::info!("wrote {}", out.display());
    Ok(())
}

fn print_summary(record: &RunRecord, regret: Option<&RegretReport>) -> bandit_lds::Result<()> {
    for alg in record.algorithms() {
        let s = record.summary(alg)?;
        let (total, ci) = record.total_cost(alg)?;
        let mut line = format!(
            "{}\t{alg}\tfinal_mean_cost={:.6}\tfinal_avg_cost={:.6}\ttotal_cost={total:.6}\ttotal_ci={ci:.6}",
            record.config.name,
            s.mean.last().copied().unwrap_or(f64::NAN),
            s.avg_mean.last().copied().unwrap_or(f64::NAN),
        );
        if let Some(r) = regret.and_then(|r| r.algorithms.iter().find(|a| &a.algorithm == alg)) {
            line.push_str(&format!("\tregret={:.6}\tregret_ci={:.6}", r.regret_mean, r.regret_ci));
        }
        println!("{line}");
    }
    Ok(())
}
