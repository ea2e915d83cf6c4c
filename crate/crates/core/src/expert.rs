//! Demonstrations: a scripted lander pilot, trajectory recording and the
//! newline-delimited JSON demonstration file.
//!
//! A demonstration file starts with one header object
//! `{"version":1,"env_id":..,"action_dim":2,"obs_dim":8,"metadata":{..}}`
//! followed by one object per transition
//! `{"t":..,"s":[8],"a":[2],"r":..,"s2":[8],"done":..,"source":..}`.
//! Transitions that ended on the time limit additionally carry
//! `"time_limit":true`. Trajectory boundaries are implied: a record starts a
//! new trajectory when the previous one was `done`, when `t` does not
//! continue the previous record, or when `source` changes.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lander::{Action, EnvState, Environment, ACTION_DIM, OBS_DIM};
use crate::policy::Policy;
use crate::replay::{Source, Transition};

pub const DEMO_FORMAT_VERSION: u32 = 1;

// Scripted pilot gains.
const ANGLE_FROM_X: f64 = 0.5;
const ANGLE_FROM_VX: f64 = 1.0;
const MAX_TARGET_ANGLE: f64 = 0.4;
const ANGLE_GAIN: f64 = 8.0;
const SPIN_GAIN: f64 = 4.0;
const DESCENT_BASE: f64 = 0.3;
const DESCENT_PER_HEIGHT: f64 = 0.4;
const MAX_DESCENT: f64 = 1.5;
const VERTICAL_GAIN: f64 = 5.0;

/// Target descent rate for the scripted pilot: slow near the ground, and
/// held high while still far off the pad horizontally.
fn descent_setpoint(y: f64, x: f64) -> f64 {
    -(DESCENT_BASE + DESCENT_PER_HEIGHT * (y - 1.5 * x.abs()).max(0.0)).min(MAX_DESCENT)
}

/// Proportional-derivative lander pilot used as the demonstrator.
pub fn scripted_action(obs: &[f64; OBS_DIM]) -> Action {
    let s = EnvState::from_observation(obs).expect("fixed-size observation");
    if s.left_contact && s.right_contact {
        return Action::new(0.0, 0.0);
    }
    let target_angle = (ANGLE_FROM_X * s.x + ANGLE_FROM_VX * s.vx).clamp(-MAX_TARGET_ANGLE, MAX_TARGET_ANGLE);
    let side = (target_angle - s.angle) * ANGLE_GAIN - s.angular_velocity * SPIN_GAIN;

    let accel = VERTICAL_GAIN * (descent_setpoint(s.y, s.x) - s.vy) - crate::lander::GRAVITY;
    let power = accel / (crate::lander::MAIN_THRUST * s.angle.cos().max(0.5));
    let main = 2.0 * power - 1.0;
    Action::new(main, side).clamped()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum DemoSource {
    Scripted,
    Human,
    Intervention,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct DemoMetadata {
    pub source: Option<DemoSource>,
    pub seed: Option<u64>,
    pub episodes: Option<usize>,
    /// Seconds since the Unix epoch; absent for reproducible scripted runs.
    pub timestamp: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemoHeader {
    pub version: u32,
    pub env_id: String,
    pub action_dim: usize,
    pub obs_dim: usize,
    #[serde(default)]
    pub metadata: DemoMetadata,
}

impl DemoHeader {
    pub fn new(env_id: &str, metadata: DemoMetadata) -> Self {
        DemoHeader {
            version: DEMO_FORMAT_VERSION,
            env_id: env_id.to_string(),
            action_dim: ACTION_DIM,
            obs_dim: OBS_DIM,
            metadata,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemoRecord {
    pub t: u32,
    pub s: [f64; OBS_DIM],
    pub a: [f64; ACTION_DIM],
    pub r: f64,
    pub s2: [f64; OBS_DIM],
    pub done: bool,
    pub source: DemoSource,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub time_limit: bool,
}

impl DemoRecord {
    pub fn to_transition(&self) -> Transition {
        Transition {
            state: self.s,
            action: self.a,
            reward: self.r,
            next_state: self.s2,
            done: self.done,
            truncated: self.time_limit,
            source: Source::Expert,
        }
    }
}

/// One contiguous run of demonstrated transitions.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub transitions: Vec<Transition>,
    pub source: DemoSource,
    /// Episode step index of the first transition.
    pub start_step: u32,
    pub seed: Option<u64>,
    pub timestamp: Option<u64>,
}

impl Trajectory {
    pub fn episode_return(&self) -> f64 {
        self.transitions.iter().map(|t| t.reward).sum()
    }

    pub fn len(&self) -> usize {
        self.transitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transitions.is_empty()
    }

    /// Ends without a `done` transition.
    pub fn is_truncated(&self) -> bool {
        !self.transitions.last().is_some_and(|t| t.done)
    }

    /// Rewards as the sparse wrapper pays them: zero until the `done`
    /// transition, which carries the accumulated return.
    pub fn to_sparse(&self) -> Result<Trajectory> {
        if self.start_step > 0 && !self.is_truncated() {
            return Err(Error::Validation(format!(
                "segment starting at step {} has no recoverable episode return",
                self.start_step
            )));
        }
        let mut out = self.clone();
        let mut accumulated = 0.0;
        for t in &mut out.transitions {
            accumulated += t.reward;
            t.reward = if t.done { std::mem::take(&mut accumulated) } else { 0.0 };
        }
        Ok(out)
    }

    pub fn records(&self) -> impl Iterator<Item = DemoRecord> + '_ {
        self.transitions.iter().enumerate().map(move |(i, t)| DemoRecord {
            t: self.start_step + i as u32,
            s: t.state,
            a: t.action,
            r: t.reward,
            s2: t.next_state,
            done: t.done,
            source: self.source,
            time_limit: t.truncated,
        })
    }

    /// Chaining and done-flag checks. Interventions may end without `done`
    /// (control handed back); other sources ending without `done` are
    /// reported through [`Trajectory::is_truncated`].
    pub fn validate(&self) -> std::result::Result<(), String> {
        if self.transitions.is_empty() {
            return Err("empty trajectory".into());
        }
        for (i, pair) in self.transitions.windows(2).enumerate() {
            if pair[0].next_state != pair[1].state {
                return Err(format!("next_state of step {i} does not match the state of step {}", i + 1));
            }
        }
        let last = self.transitions.len() - 1;
        if let Some(i) = self.transitions[..last].iter().position(|t| t.done) {
            return Err(format!("done flag set on non-final step {i}"));
        }
        if let Some(i) = self.transitions.iter().position(|t| !t.is_finite()) {
            return Err(format!("non-finite value in step {i}"));
        }
        Ok(())
    }
}

/// Streams a demonstration file: header first, then records as they arrive.
pub struct DemoWriter<W: Write> {
    out: W,
}

impl DemoWriter<BufWriter<File>> {
    pub fn create(path: &Path, header: &DemoHeader) -> Result<Self> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        DemoWriter::new(BufWriter::new(file), header).map_err(|e| Error::io(path, e))
    }
}

impl<W: Write> DemoWriter<W> {
    pub fn new(mut out: W, header: &DemoHeader) -> std::io::Result<Self> {
        serde_json::to_writer(&mut out, header)?;
        out.write_all(b"\n")?;
        Ok(DemoWriter { out })
    }

    pub fn write_record(&mut self, record: &DemoRecord) -> std::io::Result<()> {
        serde_json::to_writer(&mut self.out, record)?;
        self.out.write_all(b"\n")
    }

    pub fn write_trajectory(&mut self, trajectory: &Trajectory) -> std::io::Result<()> {
        for record in trajectory.records() {
            self.write_record(&record)?;
        }
        Ok(())
    }

    pub fn flush(&mut self) -> std::io::Result<()> {
        self.out.flush()
    }

    pub fn into_inner(self) -> W {
        self.out
    }
}

/// Roll `policy` out noise-free for `episodes` episodes.
pub fn record_episodes<E: Environment + ?Sized, P: Policy + ?Sized>(
    env: &mut E,
    policy: &mut P,
    episodes: usize,
    seed: u64,
    source: DemoSource,
) -> Result<Vec<Trajectory>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(episodes);
    for _ in 0..episodes {
        let mut state = env.reset(&mut rng);
        let mut transitions = Vec::new();
        loop {
            let obs = state.observation();
            let action = policy.act(&obs)?.clamped();
            let result = env.step(action)?;
            transitions.push(Transition {
                state: obs,
                action: action.to_array(),
                reward: result.reward,
                next_state: result.next_state.observation(),
                done: result.done,
                truncated: result.done && !result.reason.is_terminal_for_bootstrap(),
                source: Source::Expert,
            });
            state = result.next_state;
            if result.done {
                break;
            }
        }
        out.push(Trajectory {
            transitions,
            source,
            start_step: 0,
            seed: Some(seed),
            timestamp: None,
        });
    }
    Ok(out)
}

/// Record `episodes` scripted or policy episodes and write them to `out_path`.
pub fn collect_demonstrations<E: Environment + ?Sized, P: Policy + ?Sized>(
    env: &mut E,
    policy: &mut P,
    episodes: usize,
    seed: u64,
    source: DemoSource,
    out_path: &Path,
) -> Result<Vec<Trajectory>> {
    let trajectories = record_episodes(env, policy, episodes, seed, source)?;
    let header = DemoHeader::new(
        env.id(),
        DemoMetadata {
            source: Some(source),
            seed: Some(seed),
            episodes: Some(episodes),
            timestamp: None,
        },
    );
    let mut writer = DemoWriter::create(out_path, &header)?;
    for t in &trajectories {
        writer.write_trajectory(t).map_err(|e| Error::io(out_path, e))?;
    }
    writer.flush().map_err(|e| Error::io(out_path, e))?;
    Ok(trajectories)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Rejection {
    /// Position of the trajectory in the file (0-based).
    pub trajectory: usize,
    /// 1-based line of the trajectory's first record.
    pub line: usize,
    pub reason: String,
}

#[derive(Debug, Clone, Default)]
pub struct LoadedDemos {
    pub header: Option<DemoHeader>,
    pub trajectories: Vec<Trajectory>,
    pub rejected: Vec<Rejection>,
}

impl LoadedDemos {
    pub fn transitions(&self) -> impl Iterator<Item = Transition> + '_ {
        self.trajectories.iter().flat_map(|t| t.transitions.iter().copied())
    }

    pub fn num_transitions(&self) -> usize {
        self.trajectories.iter().map(Trajectory::len).sum()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct LoadOptions {
    /// Keep scripted/human trajectories that end without a `done` step.
    pub keep_truncated: bool,
}

pub fn load_demonstrations(path: &Path) -> Result<LoadedDemos> {
    load_demonstrations_with(path, LoadOptions::default())
}

pub fn load_demonstrations_with(path: &Path, options: LoadOptions) -> Result<LoadedDemos> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_demonstrations(BufReader::new(file), path, options)
}

pub fn parse_demonstrations<R: BufRead>(reader: R, path: &Path, options: LoadOptions) -> Result<LoadedDemos> {
    let parse_err = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut loaded = LoadedDemos::default();
    // (first line, records)
    let mut groups: Vec<(usize, Vec<DemoRecord>)> = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        if loaded.header.is_none() {
            let header: DemoHeader = serde_json::from_str(&line)
                .map_err(|e| parse_err(line_no, format!("bad header: {e} (column {})", e.column())))?;
            if header.version != DEMO_FORMAT_VERSION {
                return Err(parse_err(line_no, format!("unsupported version {}", header.version)));
            }
            if header.obs_dim != OBS_DIM || header.action_dim != ACTION_DIM {
                return Err(parse_err(
                    line_no,
                    format!(
                        "dimensions obs={} action={} do not match {OBS_DIM}/{ACTION_DIM}",
                        header.obs_dim, header.action_dim
                    ),
                ));
            }
            loaded.header = Some(header);
            continue;
        }
        let record: DemoRecord = serde_json::from_str(&line)
            .map_err(|e| parse_err(line_no, format!("bad record: {e} (column {})", e.column())))?;
        let starts_new = match groups.last().and_then(|(_, g)| g.last()) {
            None => true,
            Some(prev) => prev.done || record.t != prev.t + 1 || record.source != prev.source,
        };
        if starts_new {
            groups.push((line_no, Vec::new()));
        }
        groups.last_mut().unwrap().1.push(record);
    }

    let metadata = loaded.header.as_ref().map(|h| h.metadata.clone()).unwrap_or_default();
    for (index, (line, records)) in groups.into_iter().enumerate() {
        let trajectory = Trajectory {
            source: records[0].source,
            start_step: records[0].t,
            transitions: records.iter().map(DemoRecord::to_transition).collect(),
            seed: metadata.seed,
            timestamp: metadata.timestamp,
        };
        let verdict = trajectory.validate().and_then(|_| {
            if trajectory.is_truncated() && trajectory.source != DemoSource::Intervention && !options.keep_truncated {
                Err("trajectory ends without a done step (aborted session)".to_string())
            } else {
                Ok(())
            }
        });
        match verdict {
            Ok(()) => loaded.trajectories.push(trajectory),
            Err(reason) => loaded.rejected.push(Rejection {
                trajectory: index,
                line,
                reason,
            }),
        }
    }
    Ok(loaded)
}
