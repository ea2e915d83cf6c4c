//! Seed sweeps: pretraining, training, metrics files and checkpoints.

use std::path::{Path, PathBuf};
use std::sync::mpsc::Receiver;
use std::time::Instant;

use log::info;

use super::config::{ExperimentConfig, FROZEN_CONFIG};
use super::metrics::{aggregate, write_rows, CsvSink, MetricsRow, TimingRow, AGGREGATE_FILE, METRICS_FILE, TIMING_FILE};
use crate::agent::{ColAgent, LossReport};
use crate::baselines::{evaluate, make_ablation, train_bc, Ablation, Method, OuNoise};
use crate::error::{Error, Result};
use crate::expert::load_demonstrations;
use crate::lander::EnvKind;
use crate::nn::save_network;
use crate::replay::ExpertBuffer;
use crate::training::{train, LossAccumulator, Replay, RunStreams, TrainConfig};

/// Files produced for one seed.
#[derive(Debug, Clone)]
pub struct SeedOutcome {
    pub seed: u64,
    pub dir: PathBuf,
    pub rows: Vec<MetricsRow>,
}

#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub dir: PathBuf,
    pub seeds: Vec<SeedOutcome>,
}

pub fn seed_dir(output_dir: &Path, seed: u64) -> PathBuf {
    output_dir.join(format!("seed_{seed}"))
}

/// Loads the configured demonstrations into an expert buffer.
pub fn load_expert_buffer(config: &ExperimentConfig) -> Result<ExpertBuffer> {
    let mut buffer = ExpertBuffer::new();
    let Some(path) = &config.demo_path else {
        return Ok(buffer);
    };
    let demos = load_demonstrations(path)?;
    for r in &demos.rejected {
        log::warn!("{}: skipping trajectory {} (line {}): {}", path.display(), r.trajectory, r.line, r.reason);
    }
    let recorded_on = match &demos.header {
        Some(h) => Some(h.env_id.parse::<EnvKind>()?),
        None => None,
    };
    let to_sparse = match (recorded_on, config.env) {
        (Some(EnvKind::Dense), EnvKind::Sparse) => true,
        (Some(EnvKind::Sparse), EnvKind::Dense) => {
            return Err(Error::Config(format!(
                "{} was recorded with sparse rewards and cannot seed a dense run",
                path.display()
            )))
        }
        _ => false,
    };
    let take = config.demo_episodes.unwrap_or(usize::MAX);
    if take > demos.trajectories.len() && config.demo_episodes.is_some() {
        return Err(Error::Config(format!(
            "demo_episodes = {take} but {} holds only {} valid trajectories",
            path.display(),
            demos.trajectories.len()
        )));
    }
    for traj in demos.trajectories.iter().take(take) {
        if to_sparse {
            buffer.extend(traj.to_sparse()?.transitions)?;
        } else {
            buffer.extend(traj.transitions.iter().copied())?;
        }
    }
    if buffer.is_empty() && config.method.needs_demos() {
        return Err(Error::Config(format!("{} contains no usable demonstrations", path.display())));
    }
    Ok(buffer)
}

/// Runs every configured seed and writes the aggregate file.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentOutcome> {
    config.validate()?;
    let expert = load_expert_buffer(config)?;
    let dir = config.output_dir.clone();
    std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let frozen = dir.join(FROZEN_CONFIG);
    std::fs::write(&frozen, config.to_key_values()).map_err(|e| Error::io(&frozen, e))?;

    let mut seeds = Vec::with_capacity(config.seeds.len());
    for &seed in &config.seeds {
        info!("{} on {}: seed {seed}", config.method, config.env);
        seeds.push(run_seed(config, &expert, seed, None)?);
    }
    let per_seed: Vec<Vec<MetricsRow>> = seeds.iter().map(|s| s.rows.clone()).collect();
    write_rows(&dir.join(AGGREGATE_FILE), &aggregate(&per_seed)?)?;
    Ok(ExperimentOutcome { dir, seeds })
}

/// One seed of one method. `interventions` feeds transitions produced
/// elsewhere (a live session) into the expert buffer between updates.
pub fn run_seed(
    config: &ExperimentConfig,
    expert: &ExpertBuffer,
    seed: u64,
    interventions: Option<&Receiver<crate::replay::Transition>>,
) -> Result<SeedOutcome> {
    let dir = seed_dir(&config.output_dir, seed);
    std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let mut metrics = CsvSink::<MetricsRow>::create(&dir.join(METRICS_FILE))?;
    let mut timing = CsvSink::<TimingRow>::create(&dir.join(TIMING_FILE))?;
    let started = Instant::now();
    let mut streams = RunStreams::new(seed);
    let mut eval_env = config.env.make();
    let mut rows = Vec::new();

    let ablation = make_ablation(config.method, config.resolved_hyper());
    if config.method == Method::Bc {
        let mut policy = train_bc(expert.as_slice(), &config.bc, &mut streams.sample)?;
        let stats = evaluate(&mut policy, eval_env.as_mut(), config.bc_eval_episodes, &mut streams.eval_rng())?;
        let row = MetricsRow {
            seed,
            env_steps: 0,
            updates: 0,
            episodes: 0,
            eval_return_mean: stats.mean,
            eval_return_stderr: stats.stderr,
            eval_episodes: stats.returns.len(),
            loss_bc: 0.5 * crate::baselines::bc_mse(&policy, expert.as_slice())?,
            loss_q1: 0.0,
            loss_actor_q: 0.0,
            loss_l2_actor: 0.0,
            loss_l2_critic: 0.0,
            loss_actor: 0.0,
            loss_critic: 0.0,
            expert_buffer_size: expert.len(),
            agent_buffer_size: 0,
        };
        metrics.write(&row)?;
        timing.write(&TimingRow {
            env_steps: 0,
            wall_time_s: started.elapsed().as_secs_f64(),
        })?;
        let final_dir = dir.join("final");
        std::fs::create_dir_all(&final_dir).map_err(|e| Error::io(&final_dir, e))?;
        save_network(&policy, &final_dir.join("actor.colnn"))?;
        rows.push(row);
        return Ok(SeedOutcome { seed, dir, rows });
    }

    let mut agent = build_agent(&ablation, &streams)?;
    let pretrain_report = pretrain_agent(&mut agent, &ablation, expert, &mut streams)?;
    let mut replay = Replay::new(ablation.regime, expert.clone(), config.agent_capacity, &config.per)?;
    let train_config = TrainConfig {
        iterations: config.iterations(),
        eval_interval: config.eval_interval,
        eval_episodes: config.eval_episodes,
        rl_weights: ablation.rl_weights,
        per: config.per,
        noise: OuNoise::new(config.ou_theta, config.ou_sigma),
    };
    let mut env = config.env.make();
    let checkpoint_every = config.checkpoint_interval as u64;
    let mut on_eval = |point: &crate::training::EvalPoint, agent: &ColAgent| -> Result<()> {
        let row = MetricsRow::from_point(seed, point);
        info!(
            "seed {seed} step {:>8}: return {:.2} +- {:.2}",
            row.env_steps, row.eval_return_mean, row.eval_return_stderr
        );
        metrics.write(&row)?;
        timing.write(&TimingRow {
            env_steps: point.env_steps,
            wall_time_s: started.elapsed().as_secs_f64(),
        })?;
        if checkpoint_every > 0 && point.env_steps > 0 && point.env_steps.is_multiple_of(checkpoint_every) {
            agent.save(&dir.join("checkpoints").join(format!("step_{:09}", point.env_steps)))?;
        }
        rows.push(row);
        Ok(())
    };
    train(
        &mut agent,
        env.as_mut(),
        eval_env.as_mut(),
        &mut replay,
        &train_config,
        &mut streams,
        pretrain_report,
        interventions,
        &mut on_eval,
    )?;
    agent.save(&dir.join("final"))?;
    Ok(SeedOutcome { seed, dir, rows })
}

pub fn build_agent(ablation: &Ablation, streams: &RunStreams) -> Result<ColAgent> {
    ColAgent::new(ablation.hyper.clone(), &ablation.actor_shape, &ablation.critic_shape, streams.init)
}

/// Runs the method's pretraining phase; returns the mean loss report.
pub fn pretrain_agent(
    agent: &mut ColAgent,
    ablation: &Ablation,
    expert: &ExpertBuffer,
    streams: &mut RunStreams,
) -> Result<LossReport> {
    let reports = agent.pretrain(
        expert,
        ablation.pretrain_steps(),
        ablation.hyper.batch_size,
        &ablation.pretrain_weights,
        &mut streams.sample,
    )?;
    let mut acc = LossAccumulator::default();
    reports.iter().for_each(|r| acc.add(r));
    Ok(acc.take())
}

/// Loads an actor from a network file or from a checkpoint directory
/// holding `actor.colnn`.
pub fn load_actor(path: &Path) -> Result<crate::nn::NetworkParams> {
    let file = if path.is_dir() { path.join("actor.colnn") } else { path.to_path_buf() };
    let actor = crate::nn::load_network(&file)?;
    if actor.input_width() != crate::lander::OBS_DIM || actor.output_width() != crate::lander::ACTION_DIM {
        return Err(Error::Validation(format!(
            "{} is not an actor: maps {} inputs to {} outputs",
            file.display(),
            actor.input_width(),
            actor.output_width()
        )));
    }
    Ok(actor)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expert::{collect_demonstrations, scripted_action, DemoSource};
    use crate::lander::{LanderEnv, SparseReward};

    fn config_for(env: EnvKind, demos: &Path) -> ExperimentConfig {
        ExperimentConfig {
            env,
            demo_path: Some(demos.to_path_buf()),
            ..ExperimentConfig::default()
        }
    }

    #[test]
    fn dense_demos_are_sparsified_for_sparse_runs() {
        let dir = tempfile::tempdir().unwrap();
        let dense = dir.path().join("dense.ndjson");
        let sparse = dir.path().join("sparse.ndjson");
        collect_demonstrations(&mut LanderEnv::new(), &mut scripted_action, 2, 3, DemoSource::Scripted, &dense).unwrap();
        let mut sparse_env = SparseReward::new(LanderEnv::new());
        collect_demonstrations(&mut sparse_env, &mut scripted_action, 2, 3, DemoSource::Scripted, &sparse).unwrap();

        let converted = load_expert_buffer(&config_for(EnvKind::Sparse, &dense)).unwrap();
        let native = load_expert_buffer(&config_for(EnvKind::Sparse, &sparse)).unwrap();
        assert_eq!(converted.as_slice(), native.as_slice());
        let nonzero = converted.as_slice().iter().filter(|t| t.reward != 0.0).count();
        assert_eq!(nonzero, 2);

        let kept = load_expert_buffer(&config_for(EnvKind::Dense, &dense)).unwrap();
        assert!(kept.as_slice().iter().filter(|t| t.reward != 0.0).count() > 2);
        assert!(matches!(load_expert_buffer(&config_for(EnvKind::Dense, &sparse)), Err(Error::Config(_))));
    }
}
