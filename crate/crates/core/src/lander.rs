//! Two-dimensional powered-descent lander.
//!
//! The body is a rigid hull with two legs whose feet sit on the body's
//! reference line. Ground contact is a stiff spring-damper on each foot;
//! touching the ground with the hull, or touching down too fast, crashes.
//! Integration is semi-implicit Euler at a fixed 50 Hz step.

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const OBS_DIM: usize = 8;
pub const ACTION_DIM: usize = 2;

pub const DT: f64 = 0.02;
pub const GRAVITY: f64 = -10.0;
pub const MASS: f64 = 1.0;
pub const INERTIA: f64 = 1.0;
pub const MAIN_THRUST: f64 = 15.0;
pub const SIDE_FORCE: f64 = 1.5;
pub const SIDE_TORQUE: f64 = 1.2;
pub const MAX_EPISODE_STEPS: u32 = 1000;

pub const START_HEIGHT: f64 = 4.0;
pub const START_X_RANGE: f64 = 0.3;
pub const START_VX_RANGE: f64 = 1.0;
pub const START_VY_RANGE: f64 = 0.5;

/// Feet sit at `(+-FOOT_SPREAD, 0)` in the body frame.
pub const FOOT_SPREAD: f64 = 0.3;
/// Hull polygon corners in the body frame.
pub const HULL: [(f64, f64); 4] = [(-0.25, 0.1), (0.25, 0.1), (0.2, 0.6), (-0.2, 0.6)];

pub const PAD_HALF_WIDTH: f64 = 0.4;
pub const SAFE_SPEED: f64 = 0.5;
pub const SAFE_ANGLE: f64 = 0.2;
/// Touching down faster than this along either axis is a crash.
pub const CRASH_SPEED: f64 = 1.0;
pub const ARENA_HALF_WIDTH: f64 = 5.0;
pub const ARENA_CEILING: f64 = 10.0;

const GROUND_STIFFNESS: f64 = 400.0;
const GROUND_DAMPING: f64 = 40.0;
const GROUND_FRICTION: f64 = 0.5;

pub const MAIN_FUEL_COST: f64 = 0.30;
pub const SIDE_FUEL_COST: f64 = 0.03;
pub const TERMINAL_BONUS: f64 = 100.0;

pub const ENV_ID_DENSE: &str = "lander-dense";
pub const ENV_ID_SPARSE: &str = "lander-sparse";

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EnvState {
    pub x: f64,
    pub y: f64,
    pub vx: f64,
    pub vy: f64,
    pub angle: f64,
    pub angular_velocity: f64,
    pub left_contact: bool,
    pub right_contact: bool,
    pub step_count: u32,
    pub terminal: bool,
}

impl EnvState {
    pub fn observation(&self) -> [f64; OBS_DIM] {
        [
            self.x,
            self.y,
            self.vx,
            self.vy,
            self.angle,
            self.angular_velocity,
            f64::from(u8::from(self.left_contact)),
            f64::from(u8::from(self.right_contact)),
        ]
    }

    /// Rebuild a (non-terminal) state from an observation vector.
    pub fn from_observation(obs: &[f64]) -> Result<Self> {
        if obs.len() != OBS_DIM {
            return Err(Error::shape("observation", OBS_DIM, obs.len()));
        }
        Ok(EnvState {
            x: obs[0],
            y: obs[1],
            vx: obs[2],
            vy: obs[3],
            angle: obs[4],
            angular_velocity: obs[5],
            left_contact: obs[6] > 0.5,
            right_contact: obs[7] > 0.5,
            step_count: 0,
            terminal: false,
        })
    }

    fn to_world(self, (bx, by): (f64, f64)) -> (f64, f64) {
        let (s, c) = self.angle.sin_cos();
        (self.x + bx * c - by * s, self.y + bx * s + by * c)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Action {
    pub main: f64,
    pub side: f64,
}

impl Action {
    pub const IDLE: Action = Action { main: -1.0, side: 0.0 };

    pub fn new(main: f64, side: f64) -> Self {
        Action { main, side }
    }

    pub fn from_slice(a: &[f64]) -> Result<Self> {
        if a.len() != ACTION_DIM {
            return Err(Error::shape("action", ACTION_DIM, a.len()));
        }
        Ok(Action { main: a[0], side: a[1] })
    }

    pub fn to_array(self) -> [f64; ACTION_DIM] {
        [self.main, self.side]
    }

    /// Clamp to `[-1, 1]`; NaN components map to 0.
    pub fn clamped(self) -> Self {
        let c = |v: f64| if v.is_nan() { 0.0 } else { v.clamp(-1.0, 1.0) };
        Action {
            main: c(self.main),
            side: c(self.side),
        }
    }

    /// Main engine power in `[0, 1]`: off for `main <= 0`, else `0.5 + 0.5 * main`.
    pub fn main_power(self) -> f64 {
        let main = self.clamped().main;
        if main > 0.0 {
            0.5 + 0.5 * main
        } else {
            0.0
        }
    }

    /// Signed side thruster power: zero inside the `|side| <= 0.5` dead band.
    pub fn side_power(self) -> f64 {
        let side = self.clamped().side;
        if side.abs() > 0.5 {
            side
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum TerminationReason {
    Running,
    Landed,
    Crashed,
    OutOfBounds,
    TimeLimit,
}

impl TerminationReason {
    pub fn as_str(self) -> &'static str {
        match self {
            TerminationReason::Running => "RUNNING",
            TerminationReason::Landed => "LANDED",
            TerminationReason::Crashed => "CRASHED",
            TerminationReason::OutOfBounds => "OUT_OF_BOUNDS",
            TerminationReason::TimeLimit => "TIME_LIMIT",
        }
    }

    /// Episode ended for a reason that should cut value bootstrapping.
    pub fn is_terminal_for_bootstrap(self) -> bool {
        matches!(
            self,
            TerminationReason::Landed | TerminationReason::Crashed | TerminationReason::OutOfBounds
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepResult {
    pub next_state: EnvState,
    pub reward: f64,
    pub done: bool,
    pub reason: TerminationReason,
}

/// Potential used by the dense reward.
pub fn shaping(s: &EnvState) -> f64 {
    -100.0 * s.x.hypot(s.y) - 100.0 * s.vx.hypot(s.vy) - 100.0 * s.angle.abs()
        + 10.0 * f64::from(u8::from(s.left_contact))
        + 10.0 * f64::from(u8::from(s.right_contact))
}

pub fn dense_reward(prev: &EnvState, next: &EnvState, action: Action, reason: TerminationReason) -> f64 {
    let mut r = shaping(next) - shaping(prev);
    r -= MAIN_FUEL_COST * action.main_power();
    r -= SIDE_FUEL_COST * action.side_power().abs();
    match reason {
        TerminationReason::Landed => r += TERMINAL_BONUS,
        TerminationReason::Crashed | TerminationReason::OutOfBounds => r -= TERMINAL_BONUS,
        TerminationReason::Running | TerminationReason::TimeLimit => {}
    }
    r
}

/// Initial state: airborne at `START_HEIGHT`, upright, with a small random
/// horizontal offset and initial velocity.
pub fn reset_state(rng: &mut dyn RngCore) -> EnvState {
    let x = rng.gen_range(-START_X_RANGE..=START_X_RANGE);
    let vx = rng.gen_range(-START_VX_RANGE..=START_VX_RANGE);
    let vy = rng.gen_range(-START_VY_RANGE..=0.0);
    EnvState {
        x,
        y: START_HEIGHT,
        vx,
        vy,
        ..EnvState::default()
    }
}

/// Advance the lander by one fixed step.
pub fn step(state: &EnvState, action: Action) -> Result<StepResult> {
    if state.terminal {
        return Err(Error::Usage("step called on a terminal state; reset first".into()));
    }
    let action = action.clamped();
    let (sin, cos) = state.angle.sin_cos();

    let mut fx = 0.0;
    let mut fy = MASS * GRAVITY;
    let mut torque = 0.0;

    let main = action.main_power();
    if main > 0.0 {
        // body "up" axis is (-sin, cos)
        fx += -MAIN_THRUST * main * sin;
        fy += MAIN_THRUST * main * cos;
    }
    let side = action.side_power();
    if side != 0.0 {
        // positive side power yaws counter-clockwise and pushes along -body_x
        fx += -SIDE_FORCE * side * cos;
        fy += -SIDE_FORCE * side * sin;
        torque += SIDE_TORQUE * side;
    }

    for bx in [-FOOT_SPREAD, FOOT_SPREAD] {
        let (px, py) = state.to_world((bx, 0.0));
        if py < 0.0 {
            let (rx, ry) = (px - state.x, py - state.y);
            let foot_vx = state.vx - state.angular_velocity * ry;
            let foot_vy = state.vy + state.angular_velocity * rx;
            let normal = (GROUND_STIFFNESS * -py - GROUND_DAMPING * foot_vy).max(0.0);
            let friction = (-GROUND_DAMPING * foot_vx).clamp(-GROUND_FRICTION * normal, GROUND_FRICTION * normal);
            fx += friction;
            fy += normal;
            torque += rx * normal - ry * friction;
        }
    }

    let mut next = *state;
    next.vx += fx / MASS * DT;
    next.vy += fy / MASS * DT;
    next.angular_velocity += torque / INERTIA * DT;
    next.x += next.vx * DT;
    next.y += next.vy * DT;
    next.angle += next.angular_velocity * DT;
    next.step_count += 1;

    next.left_contact = next.to_world((-FOOT_SPREAD, 0.0)).1 <= 0.0;
    next.right_contact = next.to_world((FOOT_SPREAD, 0.0)).1 <= 0.0;
    let hull_hit = HULL.iter().any(|&p| next.to_world(p).1 <= 0.0);
    let touching = next.left_contact || next.right_contact;
    let fast = next.vx.abs() > CRASH_SPEED || next.vy.abs() > CRASH_SPEED;

    let reason = if hull_hit || (touching && fast) {
        TerminationReason::Crashed
    } else if next.x.abs() > ARENA_HALF_WIDTH || next.y > ARENA_CEILING {
        TerminationReason::OutOfBounds
    } else if next.left_contact
        && next.right_contact
        && next.vx.abs() < SAFE_SPEED
        && next.vy.abs() < SAFE_SPEED
        && next.angle.abs() < SAFE_ANGLE
        && next.x.abs() < PAD_HALF_WIDTH
    {
        TerminationReason::Landed
    } else if next.step_count >= MAX_EPISODE_STEPS {
        TerminationReason::TimeLimit
    } else {
        TerminationReason::Running
    };

    let done = reason != TerminationReason::Running;
    next.terminal = done;
    let reward = dense_reward(state, &next, action, reason);
    if !reward.is_finite() || next.observation().iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric(format!("lander produced a non-finite step from {state:?}")));
    }
    Ok(StepResult {
        next_state: next,
        reward,
        done,
        reason,
    })
}

/// Episodic environment with the lander's observation and action layout.
pub trait Environment {
    fn id(&self) -> &'static str;
    fn reset(&mut self, rng: &mut dyn RngCore) -> EnvState;
    fn step(&mut self, action: Action) -> Result<StepResult>;
    fn state(&self) -> &EnvState;
}

#[derive(Debug, Clone, Default)]
pub struct LanderEnv {
    state: EnvState,
    started: bool,
}

impl LanderEnv {
    pub fn new() -> Self {
        Self::default()
    }
}

impl Environment for LanderEnv {
    fn id(&self) -> &'static str {
        ENV_ID_DENSE
    }

    fn reset(&mut self, rng: &mut dyn RngCore) -> EnvState {
        self.state = reset_state(rng);
        self.started = true;
        self.state
    }

    fn step(&mut self, action: Action) -> Result<StepResult> {
        if !self.started {
            return Err(Error::Usage("step called before reset".into()));
        }
        let result = step(&self.state, action)?;
        self.state = result.next_state;
        Ok(result)
    }

    fn state(&self) -> &EnvState {
        &self.state
    }
}

/// Withholds reward until the episode ends, then pays the episode's
/// accumulated dense reward in one lump.
#[derive(Debug, Clone, Default)]
pub struct SparseReward<E> {
    inner: E,
    accumulated: f64,
}

impl<E: Environment> SparseReward<E> {
    pub fn new(inner: E) -> Self {
        SparseReward { inner, accumulated: 0.0 }
    }

    pub fn inner(&self) -> &E {
        &self.inner
    }
}

impl<E: Environment> Environment for SparseReward<E> {
    fn id(&self) -> &'static str {
        ENV_ID_SPARSE
    }

    fn reset(&mut self, rng: &mut dyn RngCore) -> EnvState {
        self.accumulated = 0.0;
        self.inner.reset(rng)
    }

    fn step(&mut self, action: Action) -> Result<StepResult> {
        let mut result = self.inner.step(action)?;
        self.accumulated += result.reward;
        result.reward = if result.done {
            std::mem::take(&mut self.accumulated)
        } else {
            0.0
        };
        Ok(result)
    }

    fn state(&self) -> &EnvState {
        self.inner.state()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EnvKind {
    #[serde(rename = "lander-dense")]
    Dense,
    #[serde(rename = "lander-sparse")]
    Sparse,
}

impl EnvKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EnvKind::Dense => ENV_ID_DENSE,
            EnvKind::Sparse => ENV_ID_SPARSE,
        }
    }

    pub fn make(self) -> Box<dyn Environment + Send> {
        match self {
            EnvKind::Dense => Box::new(LanderEnv::new()),
            EnvKind::Sparse => Box::new(SparseReward::new(LanderEnv::new())),
        }
    }
}

impl std::str::FromStr for EnvKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            ENV_ID_DENSE | "dense" => Ok(EnvKind::Dense),
            ENV_ID_SPARSE | "sparse" => Ok(EnvKind::Sparse),
            other => Err(Error::Config(format!(
                "unknown environment {other:?}; expected {ENV_ID_DENSE} or {ENV_ID_SPARSE}"
            ))),
        }
    }
}

impl std::fmt::Display for EnvKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}
