use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context as _, Result};
use clap::{Args, Parser, Subcommand};

use scbc_cli::config::VerifyKind;
use scbc_cli::{kuramoto, room, run_stages, Import, Options, ProblemConfig, RunDir, Stage};
use scbc_core::bounds::BoundMode;
use scbc_core::Exec;

#[derive(Parser)]
#[command(name = "scbc", version, about = "Compositional control barrier certificates for networks of stochastic systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Accepting runs, reachability elements, partition sets and switching automaton.
    Decompose(Common),
    /// One certificate and controller per partition set and subsystem class.
    Synth(Common),
    /// Check every certificate in the configured verification mode.
    Verify(Common),
    /// Small-gain check and composite certificates.
    Compose(Common),
    /// Element and specification probability bounds.
    Bound(Common),
    /// Closed-loop Monte Carlo runs, traces and plots.
    Simulate(Common),
    /// Aggregate all artifacts into report.json and report.md.
    Report(Common),
    /// Every stage in order.
    Run(Common),
    /// Print a built-in problem config.
    Fixture {
        #[command(flatten)]
        source: Source,
    },
}

#[derive(Args, Clone)]
#[group(multiple = false)]
struct Source {
    /// Problem config file (JSON).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Built-in circular room network with N rooms.
    #[arg(long, value_name = "N")]
    rooms: Option<usize>,
    /// Built-in Kuramoto network with N oscillators.
    #[arg(long, value_name = "N")]
    oscillators: Option<usize>,
}

#[derive(Args, Clone)]
struct Common {
    /// Run directory.
    #[arg(long, default_value = "run")]
    out: PathBuf,
    #[command(flatten)]
    source: Source,
    /// Bound formula: theorem, paper_compat or tightest.
    #[arg(long)]
    mode: Option<BoundMode>,
    /// Verification mode: sampled or rigorous.
    #[arg(long)]
    verify: Option<VerifyKind>,
    #[arg(long)]
    seed: Option<u64>,
    /// Monte Carlo trajectories per initial proposition.
    #[arg(long)]
    n_traj: Option<usize>,
    /// Use certificates from `paper_room`, `paper_kuramoto` or a directory of .cert files.
    #[arg(long, value_name = "SOURCE")]
    import_certificates: Option<Import>,
    /// Disable data parallelism.
    #[arg(long)]
    sequential: bool,
}

fn load_source(s: &Source) -> Result<Option<ProblemConfig>> {
    Ok(match (s.rooms, s.oscillators, &s.config) {
        (Some(n), _, _) => Some(room(n)),
        (_, Some(n), _) => Some(kuramoto(n)),
        (_, _, Some(p)) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            Some(ProblemConfig::from_json(&text)?)
        }
        _ => None,
    })
}

fn execute(c: &Common, stages: &[Stage]) -> Result<()> {
    let run = RunDir::new(&c.out)?;
    let overrides = c.mode.is_some() || c.verify.is_some() || c.seed.is_some() || c.n_traj.is_some();
    let mut cfg = match load_source(&c.source)? {
        Some(cfg) => cfg,
        None if run.exists("config.json") => run.config()?,
        None => bail!("no problem given: pass --config, --rooms or --oscillators, or reuse a run directory with config.json"),
    };
    if let Some(m) = c.mode {
        cfg.modes.bound = m;
    }
    if let Some(v) = c.verify {
        cfg.modes.verify = v;
    }
    if let Some(s) = c.seed {
        cfg.seed = s;
    }
    if let Some(n) = c.n_traj {
        cfg.simulation.n_traj = n;
    }
    if overrides || !run.exists("config.json") || load_source(&c.source)?.is_some() {
        cfg.build()?;
        run.write_config(&cfg)?;
    }
    let opts = Options {
        import: c.import_certificates.clone(),
        exec: if c.sequential { Exec::Sequential } else { Exec::default() },
    };
    run_stages(&run, stages, &opts)?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match &cli.command {
        Command::Decompose(c) => execute(c, &[Stage::Decompose]),
        Command::Synth(c) => execute(c, &[Stage::Synth]),
        Command::Verify(c) => execute(c, &[Stage::Verify]),
        Command::Compose(c) => execute(c, &[Stage::Compose]),
        Command::Bound(c) => execute(c, &[Stage::Bound]),
        Command::Simulate(c) => execute(c, &[Stage::Simulate]),
        Command::Report(c) => execute(c, &[Stage::Report]),
        Command::Run(c) => execute(c, &Stage::ALL),
        Command::Fixture { source } => load_source(source).and_then(|cfg| match cfg {
            Some(cfg) => {
                print!("{}", cfg.to_json()?);
                Ok(())
            }
            None => bail!("pass --rooms N, --oscillators N or --config FILE"),
        }),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
