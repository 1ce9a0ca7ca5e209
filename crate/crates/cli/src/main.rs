mod presets;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use swarmorg::config::{OracleCheck, SimConfig};

use run::{run_experiment, Job};

#[derive(Parser)]
#[command(name = "swarmorg", version = env!("SWARMORG_VERSION"), about = "Swarm self-organization experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// 1D pseudo-localization and density control.
    #[command(name = "run-1d")]
    Run1d(RunArgs),
    /// 2D pipeline: boundary control, pseudo-localization, density control.
    #[command(name = "run-2d")]
    Run2d {
        #[command(flatten)]
        run: RunArgs,
        /// Per-stage iteration counts `k1,k2,k`.
        #[arg(long, value_name = "K1,K2,K")]
        stage_breakpoints: Option<String>,
    },
    /// Reference-solver checks; all configured checks when none is named.
    Oracle {
        check: Option<CheckArg>,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Shipped presets.
    Presets {
        #[command(subcommand)]
        action: PresetAction,
    },
}

#[derive(Subcommand)]
enum PresetAction {
    List,
}

#[derive(Args)]
struct RunArgs {
    /// JSON config file.
    #[arg(long, conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Named preset, see `presets list`.
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; overrides the config's `output.dir`.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum CheckArg {
    CheckCdf,
    CheckPde1d,
    CheckHeatflow,
    CheckHausdorff,
}

impl From<CheckArg> for OracleCheck {
    fn from(c: CheckArg) -> Self {
        match c {
            CheckArg::CheckCdf => OracleCheck::CheckCdf,
            CheckArg::CheckPde1d => OracleCheck::CheckPde1d,
            CheckArg::CheckHeatflow => OracleCheck::CheckHeatflow,
            CheckArg::CheckHausdorff => OracleCheck::CheckHausdorff,
        }
    }
}

/// Reads and validates a config file; unknown keys are rejected.
fn parse_config(path: &PathBuf) -> Result<SimConfig> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    SimConfig::from_json(&text).map_err(|e| anyhow!("{}: {e}", path.display()))
}

fn resolve(args: &RunArgs, fallback: Option<SimConfig>) -> Result<(SimConfig, PathBuf)> {
    let mut cfg = match (&args.config, &args.preset, fallback) {
        (Some(path), _, _) => parse_config(path)?,
        (None, Some(name), _) => presets::load(name)?,
        (None, None, Some(cfg)) => cfg,
        (None, None, None) => bail!("pass --config <file> or --preset <name>"),
    };
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    let dir = args
        .out_dir
        .clone()
        .unwrap_or_else(|| PathBuf::from(&cfg.output.dir));
    cfg.output.dir = dir.display().to_string();
    cfg.validate()?;
    Ok((cfg, dir))
}

fn breakpoints(cfg: &mut SimConfig, arg: &str) -> Result<()> {
    let parts: Vec<usize> = arg
        .split(',')
        .map(|s| s.trim().parse::<usize>())
        .collect::<Result<_, _>>()
        .map_err(|e| anyhow!("--stage-breakpoints {arg:?}: {e}"))?;
    let [k1, k2, k] = parts[..] else {
        bail!("--stage-breakpoints takes three counts k1,k2,k, got {arg:?}");
    };
    cfg.iterations.k1 = k1;
    cfg.iterations.k2 = k2;
    cfg.iterations.k = k;
    Ok(())
}

fn execute(cli: Cli) -> Result<bool> {
    let (job, args, name, cfg) = match &cli.command {
        Command::Presets {
            action: PresetAction::List,
        } => {
            for p in presets::PRESETS {
                println!("{:<14} {}", p.name, p.summary);
            }
            return Ok(true);
        }
        Command::Run1d(args) => (Job::OneD, args, "run-1d", resolve(args, None)?),
        Command::Run2d {
            run,
            stage_breakpoints,
        } => {
            let (mut cfg, dir) = resolve(run, None)?;
            if let Some(arg) = stage_breakpoints {
                breakpoints(&mut cfg, arg)?;
            }
            (Job::TwoD, run, "run-2d", (cfg, dir))
        }
        Command::Oracle { check, run } => {
            let fallback = presets::load("oracle-all")?;
            (
                Job::Oracle(check.map(Into::into)),
                run,
                "oracle",
                resolve(run, Some(fallback))?,
            )
        }
    };
    let (cfg, dir) = cfg;
    let m = run_experiment(job, cfg, name, args.preset.clone(), &dir)?;
    for c in &m.checks {
        println!(
            "{} {}: {:.4e} (limit {:.4e})",
            if c.passed { "pass" } else { "FAIL" },
            c.name,
            c.value,
            c.limit
        );
    }
    if let Some(e) = &m.error {
        eprintln!("error: {e}");
    }
    println!(
        "wrote {} files and manifest.json to {}",
        m.files.len(),
        dir.display()
    );
    Ok(m.passed)
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
