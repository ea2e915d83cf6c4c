//! Metrics CSV schema, per-seed and aggregate files.

use std::fs::File;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::baselines::mean_stderr;
use crate::error::{Error, Result};
use crate::training::EvalPoint;

pub const METRICS_FILE: &str = "metrics.csv";
pub const TIMING_FILE: &str = "timing.csv";
pub const AGGREGATE_FILE: &str = "aggregate.csv";

/// One row of a per-seed metrics file. Column order is the field order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub seed: u64,
    pub env_steps: u64,
    pub updates: u64,
    pub episodes: u64,
    pub eval_return_mean: f64,
    pub eval_return_stderr: f64,
    pub eval_episodes: usize,
    pub loss_bc: f64,
    pub loss_q1: f64,
    pub loss_actor_q: f64,
    pub loss_l2_actor: f64,
    pub loss_l2_critic: f64,
    pub loss_actor: f64,
    pub loss_critic: f64,
    pub expert_buffer_size: usize,
    pub agent_buffer_size: usize,
}

impl MetricsRow {
    pub fn from_point(seed: u64, p: &EvalPoint) -> Self {
        MetricsRow {
            seed,
            env_steps: p.env_steps,
            updates: p.updates,
            episodes: p.episodes,
            eval_return_mean: p.eval.mean,
            eval_return_stderr: p.eval.stderr,
            eval_episodes: p.eval.returns.len(),
            loss_bc: p.losses.bc,
            loss_q1: p.losses.q1,
            loss_actor_q: p.losses.actor_q,
            loss_l2_actor: p.losses.l2_actor,
            loss_l2_critic: p.losses.l2_critic,
            loss_actor: p.losses.combined_actor,
            loss_critic: p.losses.combined_critic,
            expert_buffer_size: p.expert_size,
            agent_buffer_size: p.agent_size,
        }
    }
}

/// Wall-clock companion row, kept apart so metrics files stay reproducible.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingRow {
    pub env_steps: u64,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub env_steps: u64,
    pub seeds: usize,
    pub eval_return_mean: f64,
    pub eval_return_stderr: f64,
    pub loss_bc: f64,
    pub loss_q1: f64,
    pub loss_actor_q: f64,
    pub loss_actor: f64,
    pub loss_critic: f64,
}

/// Incremental CSV writer that flushes after every row.
pub struct CsvSink<T> {
    writer: csv::Writer<File>,
    path: std::path::PathBuf,
    _row: std::marker::PhantomData<T>,
}

impl<T: Serialize> CsvSink<T> {
    pub fn create(path: &Path) -> Result<Self> {
        let writer = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
        Ok(CsvSink {
            writer,
            path: path.to_path_buf(),
            _row: std::marker::PhantomData,
        })
    }

    pub fn write(&mut self, row: &T) -> Result<()> {
        self.writer.serialize(row).map_err(|e| csv_error(&self.path, e))?;
        self.writer.flush().map_err(|e| Error::io(&self.path, e))
    }
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Parse {
            path: path.to_path_buf(),
            line: 0,
            message: format!("{other:?}"),
        },
    }
}

pub fn write_rows<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut sink = CsvSink::create(path)?;
    for r in rows {
        sink.write(r)?;
    }
    Ok(())
}

pub fn read_rows<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    reader
        .deserialize()
        .enumerate()
        .map(|(i, r)| {
            r.map_err(|e| Error::Parse {
                path: path.to_path_buf(),
                line: i + 2,
                message: e.to_string(),
            })
        })
        .collect()
}

/// Mean and standard error across seeds at each env step. Every seed must
/// report the same step grid.
pub fn aggregate(per_seed: &[Vec<MetricsRow>]) -> Result<Vec<AggregateRow>> {
    let first = per_seed.first().ok_or(Error::Empty("seed list"))?;
    let grid: Vec<u64> = first.iter().map(|r| r.env_steps).collect();
    for rows in per_seed {
        let other: Vec<u64> = rows.iter().map(|r| r.env_steps).collect();
        if other != grid {
            return Err(Error::Alignment(format!(
                "seed {} reports env steps {:?}..., expected {:?}...",
                rows.first().map_or(0, |r| r.seed),
                &other[..other.len().min(4)],
                &grid[..grid.len().min(4)]
            )));
        }
    }
    let n = per_seed.len() as f64;
    let mean_of = |i: usize, f: fn(&MetricsRow) -> f64| per_seed.iter().map(|rows| f(&rows[i])).sum::<f64>() / n;
    Ok(grid
        .iter()
        .enumerate()
        .map(|(i, &env_steps)| {
            let returns: Vec<f64> = per_seed.iter().map(|rows| rows[i].eval_return_mean).collect();
            let (mean, stderr) = mean_stderr(&returns).expect("non-empty");
            AggregateRow {
                env_steps,
                seeds: per_seed.len(),
                eval_return_mean: mean,
                eval_return_stderr: stderr,
                loss_bc: mean_of(i, |r| r.loss_bc),
                loss_q1: mean_of(i, |r| r.loss_q1),
                loss_actor_q: mean_of(i, |r| r.loss_actor_q),
                loss_actor: mean_of(i, |r| r.loss_actor),
                loss_critic: mean_of(i, |r| r.loss_critic),
            }
        })
        .collect())
}
