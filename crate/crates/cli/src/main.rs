//! `tandem`: run suites, compare arms, replay traces and train toy policies.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use log::info;
use tandem_core::env::AppPack;
use tandem_core::grpo::{train_toy, RunConfig, ToyTask};
use tandem_core::orchestrator::{run_suite, Arm, Mode, SuiteConfig, SuiteRun};
use tandem_core::telemetry::{aggregate, render_comparison, replay, write_run, EpisodeTrace, RunReport, Verdict};

#[derive(Parser)]
#[command(name = "tandem", version, about = "Device/cloud GUI agent runtime")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute a suite and write traces plus a report.
    Run {
        suite: PathBuf,
        #[command(flatten)]
        opts: RunOpts,
    },
    /// Run the collaborative, cloud-only and device-only arms of a suite and compare them.
    Bench {
        suite: PathBuf,
        #[command(flatten)]
        opts: RunOpts,
    },
    /// Re-apply recorded traces against a pack and report divergences.
    Replay {
        #[arg(required = true)]
        traces: Vec<PathBuf>,
        /// Pack file; the bundled pack when omitted.
        #[arg(long)]
        pack: Option<PathBuf>,
    },
    /// Train a toy policy and write its learning curve.
    GrpoDemo {
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "tandem-out")]
        out: PathBuf,
    },
    /// Load and validate an app pack.
    ValidatePack { pack: PathBuf },
}

#[derive(Args)]
struct RunOpts {
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    parallel: Option<usize>,
    /// Zero wall-clock fields so that repeated runs are byte-identical.
    #[arg(long)]
    deterministic: bool,
    /// Assessor and switcher mode.
    #[arg(long, value_parser = ["rules", "model"])]
    mode: Option<String>,
    #[arg(long, default_value = "tandem-out")]
    out: PathBuf,
}

impl RunOpts {
    fn apply(&self, cfg: &mut SuiteConfig) -> Result<()> {
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(parallel) = self.parallel {
            if parallel == 0 {
                bail!("--parallel must be at least 1");
            }
            cfg.parallel = parallel;
        }
        if self.deterministic {
            cfg.deterministic = true;
        }
        if let Some(mode) = &self.mode {
            let mode: Mode = mode.parse().map_err(anyhow::Error::msg)?;
            cfg.assess_mode = mode;
            cfg.switch_mode = mode;
        }
        Ok(())
    }
}

fn load_suite(path: &Path, opts: &RunOpts) -> Result<(SuiteConfig, AppPack)> {
    let mut cfg = SuiteConfig::load(path).with_context(|| format!("loading suite {}", path.display()))?;
    opts.apply(&mut cfg)?;
    let pack = cfg.load_pack()?;
    Ok((cfg, pack))
}

fn results(run: &SuiteRun) -> Vec<tandem_core::orchestrator::EpisodeResult> {
    run.runs.iter().map(|r| r.result.clone()).collect()
}

fn cmd_run(suite: &Path, opts: &RunOpts) -> Result<()> {
    let (cfg, pack) = load_suite(suite, opts)?;
    let run = run_suite(&cfg, &pack)?;
    let report = aggregate(&cfg.id, &results(&run), None)?;
    let paths = write_run(&opts.out, &run, &report)?;
    info!("wrote {} traces under {}", paths.len(), opts.out.display());
    print!("{}", report.to_text());
    Ok(())
}

fn cmd_bench(suite: &Path, opts: &RunOpts) -> Result<()> {
    let (cfg, pack) = load_suite(suite, opts)?;
    let mut runs = Vec::new();
    for arm in Arm::ALL {
        let arm_cfg = SuiteConfig { arm, ..cfg.clone() };
        runs.push((arm, run_suite(&arm_cfg, &pack)?));
    }
    let baseline = runs
        .iter()
        .find(|(arm, _)| *arm == Arm::CloudOnly)
        .map(|(_, run)| results(run))
        .expect("cloud-only arm is always run");
    let mut reports: Vec<(Arm, RunReport)> = Vec::new();
    for (arm, run) in &runs {
        let report = aggregate(&format!("{}/{}", cfg.id, arm.as_str()), &results(run), Some(&baseline))?;
        write_run(&opts.out.join(arm.as_str()), run, &report)?;
        reports.push((*arm, report));
    }
    let table: Vec<(&str, &RunReport)> = reports.iter().map(|(a, r)| (a.as_str(), r)).collect();
    let comparison = render_comparison(&table);
    std::fs::write(opts.out.join("comparison.txt"), &comparison)?;
    print!("{comparison}");
    Ok(())
}

fn cmd_replay(traces: &[PathBuf], pack: Option<&Path>) -> Result<bool> {
    let pack = match pack {
        Some(p) => AppPack::load(p).with_context(|| format!("loading pack {}", p.display()))?,
        None => AppPack::bundled(),
    };
    let mut all_match = true;
    for path in traces {
        let trace = EpisodeTrace::read(path).with_context(|| format!("reading trace {}", path.display()))?;
        match replay(&trace, &pack) {
            Verdict::Match => println!("MATCH {}", path.display()),
            Verdict::Divergence { step, reason } => {
                all_match = false;
                let at = step.map(|s| format!(" step {s}")).unwrap_or_default();
                println!("DIVERGENCE {}{at}: {reason}", path.display());
            }
        }
    }
    Ok(all_match)
}

fn cmd_grpo_demo(config: &Path, seed: Option<u64>, out: &Path) -> Result<()> {
    let text = std::fs::read_to_string(config).with_context(|| format!("reading {}", config.display()))?;
    let mut cfg = RunConfig::from_toml(&text)?;
    if let Some(seed) = seed {
        cfg.grpo.seed = seed;
    }
    let task = ToyTask::load(cfg.task, &cfg.reward)?;
    let output = train_toy(&task, &cfg.grpo)?;
    std::fs::create_dir_all(out)?;
    let curve = out.join("curve.tsv");
    std::fs::write(&curve, output.to_tsv())?;
    println!("iterations: {}", cfg.grpo.iterations);
    println!("initial target probability: {:.6}", task.target_prob(&output.initial));
    println!("final target probability: {:.6}", output.final_target_prob(&task));
    match output.iterations_to(0.95) {
        Some(n) => println!("reached 0.95 after {n} iterations"),
        None => println!("did not reach 0.95"),
    }
    println!("curve: {}", curve.display());
    Ok(())
}

fn cmd_validate_pack(path: &Path) -> Result<()> {
    let pack = AppPack::load(path).with_context(|| format!("loading pack {}", path.display()))?;
    println!(
        "pack {} v{}: {} apps, {} screens, {} rules, {} tasks",
        pack.id,
        pack.version,
        pack.apps.len(),
        pack.screens.len(),
        pack.rules.len(),
        pack.tasks.len()
    );
    println!("hash: {}", pack.hash());
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Run { suite, opts } => cmd_run(suite, opts).map(|()| true),
        Command::Bench { suite, opts } => cmd_bench(suite, opts).map(|()| true),
        Command::Replay { traces, pack } => cmd_replay(traces, pack.as_deref()),
        Command::GrpoDemo { config, seed, out } => cmd_grpo_demo(config, *seed, out).map(|()| true),
        Command::ValidatePack { pack } => cmd_validate_pack(pack).map(|()| true),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
