use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use col_lab::baselines::evaluate;
use col_lab::expert::{collect_demonstrations, scripted_action, DemoSource};
use col_lab::harness::session::{bind, Pacing};
use col_lab::harness::summary::render_table;
use col_lab::harness::{load_actor, run_experiment, serve_session, summarize, ExperimentConfig, SessionConfig, SessionMode};
use col_lab::lander::EnvKind;

#[derive(Parser)]
#[command(name = "col-lab", version, about = "Cycle-of-Learning experiments on a 2-D lander")]
struct Cli {
    /// Log level filter (error, warn, info, debug, trace).
    #[arg(long, global = true, default_value = "info")]
    log: String,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Record scripted-pilot demonstrations.
    CollectDemos {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 20)]
        episodes: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "lander-dense")]
        env: EnvKind,
    },
    /// Train one method over a seed sweep.
    Train {
        /// key = value configuration file.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Override one key; repeatable.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        /// Shorthand for --set demo_path=...
        #[arg(long)]
        demos: Option<PathBuf>,
        /// Shorthand for --set output_dir=...
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate a checkpoint without exploration noise.
    Evaluate {
        /// Checkpoint directory or actor network file.
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, default_value = "lander-dense")]
        env: EnvKind,
        #[arg(long, default_value_t = 100)]
        episodes: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Window-average table over finished runs.
    Summarize {
        run_dirs: Vec<PathBuf>,
        /// Also write the table as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Live session for the browser client.
    Serve {
        #[arg(long)]
        mode: SessionMode,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        #[arg(long, default_value_t = 8765)]
        port: u16,
        #[arg(long, default_value = "lander-dense")]
        env: EnvKind,
        /// Demonstration file for human or intervention transitions.
        #[arg(long)]
        record: Option<PathBuf>,
        /// Directory with the client's static files.
        #[arg(long = "static")]
        static_dir: Option<PathBuf>,
        #[arg(long)]
        episodes: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 50.0)]
        hz: f64,
        /// Wait for one client action per human-controlled step.
        #[arg(long)]
        lockstep: bool,
    },
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::CollectDemos { out, episodes, seed, env } => {
            let mut environment = env.make();
            let mut pilot = scripted_action;
            let trajs = collect_demonstrations(environment.as_mut(), &mut pilot, episodes, seed, DemoSource::Scripted, &out)?;
            let steps: usize = trajs.iter().map(|t| t.transitions.len()).sum();
            let mean = trajs.iter().map(|t| t.episode_return()).sum::<f64>() / trajs.len().max(1) as f64;
            println!("wrote {} episodes ({steps} transitions, mean return {mean:.2}) to {}", trajs.len(), out.display());
        }
        Command::Train {
            config,
            overrides,
            demos,
            out,
        } => {
            let mut cfg = match &config {
                Some(path) => ExperimentConfig::from_file(path)?,
                None => ExperimentConfig::default(),
            };
            for pair in &overrides {
                cfg.set_pair(pair).with_context(|| format!("applying --set {pair}"))?;
            }
            if let Some(d) = demos {
                cfg.demo_path = Some(d);
            }
            if let Some(o) = out {
                cfg.output_dir = o;
            }
            let outcome = run_experiment(&cfg)?;
            for s in &outcome.seeds {
                if let Some(last) = s.rows.last() {
                    println!(
                        "seed {}: final evaluation {:.2} +- {:.2} at {} env steps",
                        s.seed, last.eval_return_mean, last.eval_return_stderr, last.env_steps
                    );
                }
            }
            println!("results in {}", outcome.dir.display());
        }
        Command::Evaluate {
            checkpoint,
            env,
            episodes,
            seed,
        } => {
            let mut actor = load_actor(&checkpoint)?;
            let mut environment = env.make();
            let stats = evaluate(&mut actor, environment.as_mut(), episodes, &mut ChaCha8Rng::seed_from_u64(seed))?;
            println!(
                "{}",
                serde_json::json!({
                    "checkpoint": checkpoint.display().to_string(),
                    "env": env.as_str(),
                    "episodes": episodes,
                    "mean": stats.mean,
                    "stderr": stats.stderr,
                })
            );
        }
        Command::Summarize { run_dirs, csv } => {
            if run_dirs.is_empty() {
                bail!("summarize needs at least one run directory");
            }
            let rows = summarize(&run_dirs)?;
            print!("{}", render_table(&rows));
            if let Some(path) = csv {
                col_lab::harness::metrics::write_rows(&path, &rows)?;
            }
        }
        Command::Serve {
            mode,
            checkpoint,
            host,
            port,
            env,
            record,
            static_dir,
            episodes,
            seed,
            hz,
            lockstep,
        } => {
            let agent = checkpoint.as_deref().map(load_actor).transpose()?;
            let listener = bind((host.as_str(), port))?;
            let mut config = SessionConfig::new(env, mode);
            config.pacing = if lockstep { Pacing::Lockstep { hz } } else { Pacing::RealTime { hz } };
            config.max_episodes = episodes;
            config.seed = seed;
            config.record_path = record;
            config.static_dir = static_dir;
            println!("listening on http://{}", listener.local_addr()?);
            let report = serve_session(listener, &config, agent, None)?;
            let recorded: usize = report.recorded.iter().map(|t| t.transitions.len()).sum();
            println!("session over: {} episodes, {recorded} recorded transitions", report.episodes.len());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::new().parse_filters(&cli.log).format_timestamp_secs().init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
