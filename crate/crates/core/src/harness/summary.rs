//! Window-average summaries across seeds.

use std::path::{Path, PathBuf};

use serde::Serialize;

use super::config::{ExperimentConfig, FROZEN_CONFIG};
use super::metrics::{read_rows, MetricsRow, METRICS_FILE};
use crate::baselines::{mean_stderr, Method};
use crate::error::{Error, Result};
use crate::lander::EnvKind;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub method: String,
    pub env: String,
    pub seeds: usize,
    pub mean: f64,
    pub stderr: f64,
    pub run_dir: String,
}

/// Per-seed metrics of a finished run, ordered as the frozen config lists seeds.
pub fn load_run(run_dir: &Path) -> Result<(ExperimentConfig, Vec<Vec<MetricsRow>>)> {
    let config = ExperimentConfig::from_file(&run_dir.join(FROZEN_CONFIG))?;
    let per_seed = config
        .seeds
        .iter()
        .map(|&s| read_rows::<MetricsRow>(&super::experiment::seed_dir(run_dir, s).join(METRICS_FILE)))
        .collect::<Result<Vec<_>>>()?;
    Ok((config, per_seed))
}

/// Mean of the evaluation returns over every row of one seed's run. For
/// behavior cloning that is the single 100-episode evaluation.
pub fn window_average(rows: &[MetricsRow]) -> Result<f64> {
    if rows.is_empty() {
        return Err(Error::Empty("metrics file"));
    }
    Ok(rows.iter().map(|r| r.eval_return_mean).sum::<f64>() / rows.len() as f64)
}

/// Per-seed window averages, after checking every seed shares one step grid.
pub fn window_averages(per_seed: &[Vec<MetricsRow>]) -> Result<Vec<f64>> {
    let first: Vec<u64> = per_seed
        .first()
        .ok_or(Error::Empty("seed list"))?
        .iter()
        .map(|r| r.env_steps)
        .collect();
    per_seed
        .iter()
        .map(|rows| {
            let grid: Vec<u64> = rows.iter().map(|r| r.env_steps).collect();
            if grid != first {
                return Err(Error::Alignment(format!(
                    "seed {} has {} evaluation rows on a different step grid than {} rows",
                    rows.first().map_or(0, |r| r.seed),
                    grid.len(),
                    first.len()
                )));
            }
            window_average(rows)
        })
        .collect()
}

fn summarize_one(run_dir: &Path) -> Result<SummaryRow> {
    let (config, per_seed) = load_run(run_dir)?;
    let averages = window_averages(&per_seed)?;
    if config.method == Method::Bc && per_seed.iter().any(|r| r.len() != 1) {
        return Err(Error::Validation(format!(
            "{}: behavior cloning runs hold one evaluation row per seed",
            run_dir.display()
        )));
    }
    let (mean, stderr) = mean_stderr(&averages).ok_or(Error::Empty("seed list"))?;
    Ok(SummaryRow {
        method: config.method.to_string(),
        env: config.env.to_string(),
        seeds: averages.len(),
        mean,
        stderr,
        run_dir: run_dir.display().to_string(),
    })
}

/// One row per run directory: mean and standard error across seeds of
/// the per-seed window average. Runs on the same environment must share
/// one evaluation step grid, behavior cloning excepted.
pub fn summarize(run_dirs: &[PathBuf]) -> Result<Vec<SummaryRow>> {
    let rows: Vec<SummaryRow> = run_dirs.iter().map(|d| summarize_one(d)).collect::<Result<_>>()?;
    let mut grids: Vec<(EnvKind, Vec<u64>, &Path)> = Vec::new();
    for dir in run_dirs {
        let (config, per_seed) = load_run(dir)?;
        if config.method == Method::Bc {
            continue;
        }
        let grid: Vec<u64> = per_seed[0].iter().map(|r| r.env_steps).collect();
        if let Some((_, other, other_dir)) = grids.iter().find(|(env, _, _)| *env == config.env) {
            if *other != grid {
                return Err(Error::Alignment(format!(
                    "{} and {} evaluate on different step grids",
                    other_dir.display(),
                    dir.display()
                )));
            }
        } else {
            grids.push((config.env, grid, dir));
        }
    }
    Ok(rows)
}

/// Cross-seed mean and standard error of one statistic per seed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SeedStat {
    pub mean: f64,
    pub stderr: f64,
}

impl SeedStat {
    pub fn of(per_seed: &[f64]) -> Result<Self> {
        let (mean, stderr) = mean_stderr(per_seed).ok_or(Error::Empty("seed list"))?;
        Ok(SeedStat { mean, stderr })
    }

    /// `sqrt(se_a^2 + se_b^2)`
    pub fn pooled_stderr(&self, other: &SeedStat) -> f64 {
        self.stderr.hypot(other.stderr)
    }

    /// How many pooled standard errors `self` lies above `other`.
    pub fn margin_over(&self, other: &SeedStat) -> f64 {
        let se = self.pooled_stderr(other);
        let gap = self.mean - other.mean;
        if se == 0.0 {
            return if gap > 0.0 { f64::INFINITY } else if gap < 0.0 { f64::NEG_INFINITY } else { 0.0 };
        }
        gap / se
    }
}

/// Evaluation return of the first row (the post-pretraining evaluation).
pub fn first_return(rows: &[MetricsRow]) -> Result<f64> {
    rows.first().map(|r| r.eval_return_mean).ok_or(Error::Empty("metrics file"))
}

/// Mean evaluation return over rows in the last quarter of the run, i.e.
/// with `env_steps >= 0.75 * last env_steps`, excluding step 0.
pub fn final_quarter_mean(rows: &[MetricsRow]) -> Result<f64> {
    let last = rows.last().ok_or(Error::Empty("metrics file"))?.env_steps;
    let cutoff = 0.75 * last as f64;
    let tail: Vec<f64> = rows
        .iter()
        .filter(|r| r.env_steps > 0 && r.env_steps as f64 >= cutoff)
        .map(|r| r.eval_return_mean)
        .collect();
    if tail.is_empty() {
        return Err(Error::Empty("final-quarter evaluations"));
    }
    Ok(tail.iter().sum::<f64>() / tail.len() as f64)
}

/// Trailing moving average; the first points average what is available.
pub fn smooth(curve: &[f64], window: usize) -> Vec<f64> {
    let window = window.max(1);
    (0..curve.len())
        .map(|i| {
            let lo = (i + 1).saturating_sub(window);
            curve[lo..=i].iter().sum::<f64>() / (i + 1 - lo) as f64
        })
        .collect()
}

/// Largest peak-to-trough decline, `max_t (max_{s<=t} c_s - c_t)`.
pub fn max_drawdown(curve: &[f64]) -> f64 {
    let mut peak = f64::NEG_INFINITY;
    let mut worst: f64 = 0.0;
    for &c in curve {
        peak = peak.max(c);
        worst = worst.max(peak - c);
    }
    worst
}

/// Seed-averaged evaluation curve; every seed must share one step grid.
pub fn mean_curve(per_seed: &[Vec<MetricsRow>]) -> Result<Vec<f64>> {
    window_averages(per_seed)?;
    let n = per_seed.len() as f64;
    Ok((0..per_seed[0].len())
        .map(|i| per_seed.iter().map(|rows| rows[i].eval_return_mean).sum::<f64>() / n)
        .collect())
}

/// Fixed-width text rendering of a summary.
pub fn render_table(rows: &[SummaryRow]) -> String {
    let mut out = format!("{:<10} {:<14} {:>5} {:>12} {:>10}\n", "method", "env", "seeds", "mean", "stderr");
    for r in rows {
        out.push_str(&format!(
            "{:<10} {:<14} {:>5} {:>12.2} {:>10.2}\n",
            r.method, r.env, r.seeds, r.mean, r.stderr
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::metrics::write_rows;

    fn row(seed: u64, env_steps: u64, ret: f64) -> MetricsRow {
        MetricsRow {
            seed,
            env_steps,
            updates: 0,
            episodes: 0,
            eval_return_mean: ret,
            eval_return_stderr: 0.0,
            eval_episodes: 10,
            loss_bc: 0.0,
            loss_q1: 0.0,
            loss_actor_q: 0.0,
            loss_l2_actor: 0.0,
            loss_l2_critic: 0.0,
            loss_actor: 0.0,
            loss_critic: 0.0,
            expert_buffer_size: 0,
            agent_buffer_size: 0,
        }
    }

    fn fake_run(dir: &Path, method: Method, per_seed: &[(u64, Vec<(u64, f64)>)]) {
        let mut cfg = ExperimentConfig::default();
        cfg.method = method;
        cfg.seeds = per_seed.iter().map(|(s, _)| *s).collect();
        std::fs::create_dir_all(dir).unwrap();
        std::fs::write(dir.join(FROZEN_CONFIG), cfg.to_key_values()).unwrap();
        for (seed, points) in per_seed {
            let sd = super::super::experiment::seed_dir(dir, *seed);
            std::fs::create_dir_all(&sd).unwrap();
            let rows: Vec<MetricsRow> = points.iter().map(|&(s, r)| row(*seed, s, r)).collect();
            write_rows(&sd.join(METRICS_FILE), &rows).unwrap();
        }
    }

    #[test]
    fn constant_return_has_zero_error() {
        let tmp = tempfile::tempdir().unwrap();
        let d = tmp.path().join("run");
        fake_run(&d, Method::Col, &[(1, vec![(0, 7.0), (10, 7.0), (20, 7.0)])]);
        let s = summarize(&[d]).unwrap();
        assert_eq!(s[0].mean, 7.0);
        assert_eq!(s[0].stderr, 0.0);
    }

    #[test]
    fn two_seed_stderr() {
        let tmp = tempfile::tempdir().unwrap();
        let d = tmp.path().join("run");
        fake_run(&d, Method::Col, &[(1, vec![(0, 2.0), (10, 4.0)]), (2, vec![(0, 8.0), (10, 10.0)])]);
        let s = summarize(&[d]).unwrap();
        assert_eq!(s[0].mean, 6.0);
        assert_eq!(s[0].stderr, 3.0);
    }

    #[test]
    fn mismatched_grids_are_rejected() {
        let tmp = tempfile::tempdir().unwrap();
        let d = tmp.path().join("run");
        fake_run(&d, Method::Col, &[(1, vec![(0, 2.0), (10, 4.0)]), (2, vec![(0, 8.0), (20, 10.0)])]);
        assert!(matches!(summarize(&[d]), Err(Error::Alignment(_))));

        let a = tmp.path().join("a");
        let b = tmp.path().join("b");
        let bc = tmp.path().join("bc");
        fake_run(&a, Method::Col, &[(1, vec![(0, 1.0), (10, 1.0)])]);
        fake_run(&b, Method::Ddpg, &[(1, vec![(0, 1.0), (5, 1.0)])]);
        fake_run(&bc, Method::Bc, &[(1, vec![(0, 3.0)])]);
        assert!(matches!(summarize(&[a.clone(), b]), Err(Error::Alignment(_))));
        let s = summarize(&[a, bc]).unwrap();
        assert_eq!(s[1].method, "bc");
        assert_eq!(s[1].mean, 3.0);
    }
    #[test]
    fn drawdown_and_smoothing() {
        assert_eq!(max_drawdown(&[1.0, 3.0, 2.0, 5.0, 0.0, 4.0]), 5.0);
        assert_eq!(max_drawdown(&[1.0, 2.0, 3.0]), 0.0);
        assert_eq!(max_drawdown(&[]), 0.0);
        assert_eq!(smooth(&[1.0, 3.0, 5.0, 7.0], 2), vec![1.0, 2.0, 4.0, 6.0]);
        assert_eq!(smooth(&[1.0, 3.0], 1), vec![1.0, 3.0]);
    }

    #[test]
    fn final_quarter_uses_tail_rows() {
        let rows: Vec<MetricsRow> = (0..=8).map(|i| row(1, i * 10, i as f64)).collect();
        // cutoff 60: rows at 60, 70, 80
        assert_eq!(final_quarter_mean(&rows).unwrap(), 7.0);
        assert_eq!(first_return(&rows).unwrap(), 0.0);
        assert!(final_quarter_mean(&rows[..1]).is_err());
    }

    #[test]
    fn pooled_margins() {
        let a = SeedStat { mean: 10.0, stderr: 3.0 };
        let b = SeedStat { mean: 0.0, stderr: 4.0 };
        assert_eq!(a.pooled_stderr(&b), 5.0);
        assert_eq!(a.margin_over(&b), 2.0);
        assert_eq!(b.margin_over(&a), -2.0);
        let z = SeedStat { mean: 1.0, stderr: 0.0 };
        assert_eq!(z.margin_over(&SeedStat { mean: 0.0, stderr: 0.0 }), f64::INFINITY);
    }
}
