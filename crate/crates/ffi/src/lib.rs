//! C ABI over the lander environment, actor checkpoints, the scripted
//! pilot, demonstration files and experiment runs.
//!
//! Every fallible call returns a [`ColStatus`]; on failure the message is
//! kept per thread and read back with [`col_last_error`]. Handles are
//! opaque and must be released with their `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use col_lab::baselines::evaluate;
use col_lab::expert::{collect_demonstrations, load_demonstrations, scripted_action, DemoSource, LoadedDemos};
use col_lab::harness::{load_actor, run_experiment, ExperimentConfig};
use col_lab::lander::{Action, EnvKind, Environment, TerminationReason};
use col_lab::nn::NetworkParams;
use col_lab::replay::{Source, Transition};
use col_lab::Error;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const COL_OBS_DIM: usize = 8;
pub const COL_ACTION_DIM: usize = 2;

const _: () = assert!(COL_OBS_DIM == col_lab::lander::OBS_DIM && COL_ACTION_DIM == col_lab::lander::ACTION_DIM);

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ColStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Config = 3,
    Shape = 4,
    Numeric = 5,
    Usage = 6,
    Empty = 7,
    Parse = 8,
    Validation = 9,
    Alignment = 10,
    Io = 11,
    Session = 12,
    OutOfRange = 13,
    Panic = 14,
}

impl From<&Error> for ColStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::Config(_) => ColStatus::Config,
            Error::Shape { .. } => ColStatus::Shape,
            Error::Numeric(_) => ColStatus::Numeric,
            Error::Usage(_) => ColStatus::Usage,
            Error::Empty(_) => ColStatus::Empty,
            Error::Parse { .. } => ColStatus::Parse,
            Error::Validation(_) => ColStatus::Validation,
            Error::Alignment(_) => ColStatus::Alignment,
            Error::Io { .. } => ColStatus::Io,
            Error::Session(_) => ColStatus::Session,
        }
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ColReason {
    Running = 0,
    Landed = 1,
    Crashed = 2,
    OutOfBounds = 3,
    TimeLimit = 4,
}

impl From<TerminationReason> for ColReason {
    fn from(r: TerminationReason) -> Self {
        match r {
            TerminationReason::Running => ColReason::Running,
            TerminationReason::Landed => ColReason::Landed,
            TerminationReason::Crashed => ColReason::Crashed,
            TerminationReason::OutOfBounds => ColReason::OutOfBounds,
            TerminationReason::TimeLimit => ColReason::TimeLimit,
        }
    }
}

/// Result of one environment step.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct ColStep {
    pub obs: [f64; COL_OBS_DIM],
    pub reward: f64,
    pub done: bool,
    pub reason: ColReason,
}

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct ColTransition {
    pub state: [f64; COL_OBS_DIM],
    pub action: [f64; COL_ACTION_DIM],
    pub reward: f64,
    pub next_state: [f64; COL_OBS_DIM],
    pub done: bool,
    /// The episode hit the time limit rather than a terminal state.
    pub truncated: bool,
    /// True for demonstrator transitions.
    pub expert: bool,
}

impl From<&Transition> for ColTransition {
    fn from(t: &Transition) -> Self {
        ColTransition {
            state: t.state,
            action: t.action,
            reward: t.reward,
            next_state: t.next_state,
            done: t.done,
            truncated: t.truncated,
            expert: t.source == Source::Expert,
        }
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct ColEvalResult {
    pub mean: f64,
    pub stderr: f64,
    pub episodes: usize,
}

/// An environment plus the generator that draws its start states.
pub struct ColEnv {
    env: Box<dyn Environment + Send>,
    rng: ChaCha8Rng,
}

/// A deterministic actor network.
pub struct ColPolicy {
    actor: NetworkParams,
}

/// Validated trajectories from a demonstration file, flattened.
pub struct ColDemos {
    demos: LoadedDemos,
    transitions: Vec<Transition>,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn fail(status: ColStatus, msg: impl Into<String>) -> ColStatus {
    set_error(msg.into());
    status
}

/// Runs `f`, recording errors and turning panics into [`ColStatus::Panic`].
fn guard(f: impl FnOnce() -> Result<(), ColStatus>) -> ColStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => ColStatus::Ok,
        Ok(Err(status)) => status,
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            fail(ColStatus::Panic, format!("panic: {msg}"))
        }
    }
}

fn lab(e: Error) -> ColStatus {
    let status = ColStatus::from(&e);
    fail(status, e.to_string())
}

unsafe fn str_arg<'a>(p: *const c_char, name: &str) -> Result<&'a str, ColStatus> {
    if p.is_null() {
        return Err(fail(ColStatus::NullPointer, format!("{name} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(ColStatus::InvalidArgument, format!("{name} is not valid UTF-8")))
}

unsafe fn ref_arg<'a, T>(p: *const T, name: &str) -> Result<&'a T, ColStatus> {
    p.as_ref().ok_or_else(|| fail(ColStatus::NullPointer, format!("{name} is null")))
}

unsafe fn mut_arg<'a, T>(p: *mut T, name: &str) -> Result<&'a mut T, ColStatus> {
    p.as_mut().ok_or_else(|| fail(ColStatus::NullPointer, format!("{name} is null")))
}

fn env_kind(s: &str) -> Result<EnvKind, ColStatus> {
    s.parse().map_err(lab)
}

/// Copies the calling thread's last error message into `buf` (always
/// NUL-terminated when `len > 0`) and returns the length the full
/// message needs, including the terminator.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn col_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        let bytes = msg.as_bytes();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len - 1);
            ptr::copy_nonoverlapping(bytes.as_ptr(), buf.cast::<u8>(), n);
            *buf.add(n) = 0;
        }
        bytes.len() + 1
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn col_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Creates an environment (`"lander-dense"` or `"lander-sparse"`) whose
/// start states are drawn from a generator seeded with `seed`.
///
/// # Safety
/// `kind` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn col_env_new(kind: *const c_char, seed: u64, out: *mut *mut ColEnv) -> ColStatus {
    guard(|| {
        let out = mut_arg(out, "out")?;
        let kind = env_kind(str_arg(kind, "kind")?)?;
        *out = Box::into_raw(Box::new(ColEnv {
            env: kind.make(),
            rng: ChaCha8Rng::seed_from_u64(seed),
        }));
        Ok(())
    })
}

/// # Safety
/// `env` must come from [`col_env_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn col_env_free(env: *mut ColEnv) {
    if !env.is_null() {
        drop(Box::from_raw(env));
    }
}

/// Starts a new episode and writes the first observation.
///
/// # Safety
/// `env` must be a live handle; `obs_out` must point to 8 doubles.
#[no_mangle]
pub unsafe extern "C" fn col_env_reset(env: *mut ColEnv, obs_out: *mut f64) -> ColStatus {
    guard(|| {
        let env = mut_arg(env, "env")?;
        let obs_out = mut_arg(obs_out.cast::<[f64; COL_OBS_DIM]>(), "obs_out")?;
        let state = env.env.reset(&mut env.rng);
        *obs_out = state.observation();
        Ok(())
    })
}

/// Applies `action` (2 doubles, clamped to [-1, 1]).
///
/// # Safety
/// `env` must be a live handle; `action` must point to 2 doubles and
/// `out` be writable.
#[no_mangle]
pub unsafe extern "C" fn col_env_step(env: *mut ColEnv, action: *const f64, out: *mut ColStep) -> ColStatus {
    guard(|| {
        let env = mut_arg(env, "env")?;
        let a = ref_arg(action.cast::<[f64; COL_ACTION_DIM]>(), "action")?;
        let out = mut_arg(out, "out")?;
        let step = env.env.step(Action::new(a[0], a[1]).clamped()).map_err(lab)?;
        *out = ColStep {
            obs: step.next_state.observation(),
            reward: step.reward,
            done: step.done,
            reason: step.reason.into(),
        };
        Ok(())
    })
}

/// The scripted pilot's action for an observation.
///
/// # Safety
/// `obs` must point to 8 doubles and `action_out` to 2 writable doubles.
#[no_mangle]
pub unsafe extern "C" fn col_scripted_action(obs: *const f64, action_out: *mut f64) -> ColStatus {
    guard(|| {
        let obs = ref_arg(obs.cast::<[f64; COL_OBS_DIM]>(), "obs")?;
        let out = mut_arg(action_out.cast::<[f64; COL_ACTION_DIM]>(), "action_out")?;
        *out = scripted_action(obs).to_array();
        Ok(())
    })
}

/// Loads an actor from a network file or a checkpoint directory.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn col_policy_load(path: *const c_char, out: *mut *mut ColPolicy) -> ColStatus {
    guard(|| {
        let out = mut_arg(out, "out")?;
        let path = PathBuf::from(str_arg(path, "path")?);
        let actor = load_actor(&path).map_err(lab)?;
        *out = Box::into_raw(Box::new(ColPolicy { actor }));
        Ok(())
    })
}

/// # Safety
/// `policy` must come from [`col_policy_load`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn col_policy_free(policy: *mut ColPolicy) {
    if !policy.is_null() {
        drop(Box::from_raw(policy));
    }
}

/// Deterministic action for one observation, clamped to [-1, 1].
///
/// # Safety
/// `policy` must be live; `obs` must point to 8 doubles and
/// `action_out` to 2 writable doubles.
#[no_mangle]
pub unsafe extern "C" fn col_policy_act(policy: *const ColPolicy, obs: *const f64, action_out: *mut f64) -> ColStatus {
    guard(|| {
        let policy = ref_arg(policy, "policy")?;
        let obs = ref_arg(obs.cast::<[f64; COL_OBS_DIM]>(), "obs")?;
        let out = mut_arg(action_out.cast::<[f64; COL_ACTION_DIM]>(), "action_out")?;
        let raw = policy.actor.forward(obs).map_err(lab)?;
        *out = Action::from_slice(&raw).map_err(lab)?.clamped().to_array();
        Ok(())
    })
}

/// Noise-free evaluation over `episodes` episodes.
///
/// # Safety
/// `policy` must be live, `env_kind` NUL-terminated and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn col_policy_evaluate(
    policy: *const ColPolicy,
    env_kind_name: *const c_char,
    episodes: usize,
    seed: u64,
    out: *mut ColEvalResult,
) -> ColStatus {
    guard(|| {
        let policy = ref_arg(policy, "policy")?;
        let kind = env_kind(str_arg(env_kind_name, "env_kind_name")?)?;
        let out = mut_arg(out, "out")?;
        let mut actor = policy.actor.clone();
        let mut env = kind.make();
        let stats =
            evaluate(&mut actor, env.as_mut(), episodes, &mut ChaCha8Rng::seed_from_u64(seed)).map_err(lab)?;
        *out = ColEvalResult {
            mean: stats.mean,
            stderr: stats.stderr,
            episodes: stats.returns.len(),
        };
        Ok(())
    })
}

/// Records scripted-pilot episodes to a demonstration file. The number of
/// transitions written goes to `transitions_out` when it is non-null.
///
/// # Safety
/// String arguments must be NUL-terminated; `transitions_out` must be
/// null or writable.
#[no_mangle]
pub unsafe extern "C" fn col_collect_demos(
    path: *const c_char,
    env_kind_name: *const c_char,
    episodes: usize,
    seed: u64,
    transitions_out: *mut usize,
) -> ColStatus {
    guard(|| {
        let path = PathBuf::from(str_arg(path, "path")?);
        let kind = env_kind(str_arg(env_kind_name, "env_kind_name")?)?;
        let mut env = kind.make();
        let mut pilot = scripted_action;
        let trajs =
            collect_demonstrations(env.as_mut(), &mut pilot, episodes, seed, DemoSource::Scripted, &path).map_err(lab)?;
        if let Some(n) = transitions_out.as_mut() {
            *n = trajs.iter().map(|t| t.transitions.len()).sum();
        }
        Ok(())
    })
}

/// Loads and validates a demonstration file.
///
/// # Safety
/// `path` must be NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn col_demos_load(path: *const c_char, out: *mut *mut ColDemos) -> ColStatus {
    guard(|| {
        let out = mut_arg(out, "out")?;
        let path = PathBuf::from(str_arg(path, "path")?);
        let demos = load_demonstrations(&path).map_err(lab)?;
        let transitions = demos.transitions().collect();
        *out = Box::into_raw(Box::new(ColDemos { demos, transitions }));
        Ok(())
    })
}

/// # Safety
/// `demos` must come from [`col_demos_load`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn col_demos_free(demos: *mut ColDemos) {
    if !demos.is_null() {
        drop(Box::from_raw(demos));
    }
}

/// Number of accepted transitions; 0 for a null handle.
///
/// # Safety
/// `demos` must be null or live.
#[no_mangle]
pub unsafe extern "C" fn col_demos_len(demos: *const ColDemos) -> usize {
    demos.as_ref().map_or(0, |d| d.transitions.len())
}

/// Number of accepted trajectories; 0 for a null handle.
///
/// # Safety
/// `demos` must be null or live.
#[no_mangle]
pub unsafe extern "C" fn col_demos_trajectories(demos: *const ColDemos) -> usize {
    demos.as_ref().map_or(0, |d| d.demos.trajectories.len())
}

/// Number of trajectories rejected by validation; 0 for a null handle.
///
/// # Safety
/// `demos` must be null or live.
#[no_mangle]
pub unsafe extern "C" fn col_demos_rejected(demos: *const ColDemos) -> usize {
    demos.as_ref().map_or(0, |d| d.demos.rejected.len())
}

/// Copies transition `index` into `out`.
///
/// # Safety
/// `demos` must be live and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn col_demos_get(demos: *const ColDemos, index: usize, out: *mut ColTransition) -> ColStatus {
    guard(|| {
        let demos = ref_arg(demos, "demos")?;
        let out = mut_arg(out, "out")?;
        let t = demos.transitions.get(index).ok_or_else(|| {
            fail(
                ColStatus::OutOfRange,
                format!("index {index} out of range for {} transitions", demos.transitions.len()),
            )
        })?;
        *out = t.into();
        Ok(())
    })
}

/// Runs a seed sweep. `config_path` may be null for defaults; each of the
/// `n_overrides` strings is a `key=value` override applied in order.
///
/// # Safety
/// `config_path` must be null or NUL-terminated; `overrides` must point to
/// `n_overrides` NUL-terminated strings (or be null when it is 0).
#[no_mangle]
pub unsafe extern "C" fn col_train(
    config_path: *const c_char,
    overrides: *const *const c_char,
    n_overrides: usize,
) -> ColStatus {
    guard(|| {
        let mut cfg = if config_path.is_null() {
            ExperimentConfig::default()
        } else {
            ExperimentConfig::from_file(std::path::Path::new(str_arg(config_path, "config_path")?)).map_err(lab)?
        };
        if n_overrides > 0 {
            if overrides.is_null() {
                return Err(fail(ColStatus::NullPointer, "overrides is null"));
            }
            for i in 0..n_overrides {
                let pair = str_arg(*overrides.add(i), "override")?;
                cfg.set_pair(pair).map_err(lab)?;
            }
        }
        run_experiment(&cfg).map(|_| ()).map_err(lab)
    })
}
