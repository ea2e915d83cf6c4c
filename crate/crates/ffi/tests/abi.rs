//! The C ABI exercised the way a C caller would use it.

use std::ffi::{CStr, CString};
use std::ptr;

use col_lab::expert::scripted_action;
use col_lab::lander::{Action, Environment, LanderEnv};
use col_lab_ffi::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn c(s: &str) -> CString {
    CString::new(s).unwrap()
}

fn last_error() -> String {
    let mut buf = vec![0 as std::ffi::c_char; 256];
    let needed = unsafe { col_last_error(buf.as_mut_ptr(), buf.len()) };
    assert!(needed > 0);
    unsafe { CStr::from_ptr(buf.as_ptr()) }.to_string_lossy().into_owned()
}

#[test]
fn version_is_the_crate_version() {
    let v = unsafe { CStr::from_ptr(col_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn env_handle_matches_native_environment() {
    let mut handle = ptr::null_mut();
    assert_eq!(unsafe { col_env_new(c("lander-dense").as_ptr(), 5, &mut handle) }, ColStatus::Ok);
    let mut obs = [0.0; COL_OBS_DIM];
    assert_eq!(unsafe { col_env_reset(handle, obs.as_mut_ptr()) }, ColStatus::Ok);

    let mut native = LanderEnv::new();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let start = native.reset(&mut rng).observation();
    assert_eq!(obs, start);

    let mut total = 0.0;
    let mut native_total = 0.0;
    let mut native_obs = start;
    for _ in 0..2000 {
        let mut action = [0.0; COL_ACTION_DIM];
        assert_eq!(unsafe { col_scripted_action(obs.as_ptr(), action.as_mut_ptr()) }, ColStatus::Ok);
        assert_eq!(action, scripted_action(&native_obs).to_array());
        let mut step = std::mem::MaybeUninit::<ColStep>::uninit();
        assert_eq!(unsafe { col_env_step(handle, action.as_ptr(), step.as_mut_ptr()) }, ColStatus::Ok);
        let step = unsafe { step.assume_init() };
        let native_step = native.step(Action::new(action[0], action[1])).unwrap();
        assert_eq!(step.obs, native_step.next_state.observation());
        assert_eq!(step.reward, native_step.reward);
        total += step.reward;
        native_total += native_step.reward;
        obs = step.obs;
        native_obs = native_step.next_state.observation();
        if step.done {
            assert_ne!(step.reason, ColReason::Running);
            break;
        }
        assert_eq!(step.reason, ColReason::Running);
    }
    assert_eq!(total, native_total);
    unsafe { col_env_free(handle) };
}

#[test]
fn bad_arguments_report_status_and_message() {
    let mut handle = ptr::null_mut();
    assert_eq!(unsafe { col_env_new(ptr::null(), 0, &mut handle) }, ColStatus::NullPointer);
    assert!(last_error().contains("kind"));
    assert_eq!(unsafe { col_env_new(c("moon").as_ptr(), 0, &mut handle) }, ColStatus::Config);
    assert!(last_error().contains("moon"));
    let latin1 = CString::new(vec![0xe9u8, b'x']).unwrap();
    assert_eq!(unsafe { col_env_new(latin1.as_ptr(), 0, &mut handle) }, ColStatus::InvalidArgument);
    assert!(last_error().contains("UTF-8"));
    assert!(handle.is_null());

    let mut obs = [0.0; COL_OBS_DIM];
    assert_eq!(unsafe { col_env_reset(ptr::null_mut(), obs.as_mut_ptr()) }, ColStatus::NullPointer);
    assert_eq!(unsafe { col_scripted_action(ptr::null(), obs.as_mut_ptr()) }, ColStatus::NullPointer);

    let mut policy = ptr::null_mut();
    assert_eq!(unsafe { col_policy_load(c("/nonexistent/actor.colnn").as_ptr(), &mut policy) }, ColStatus::Io);
    assert!(policy.is_null());

    // stepping before reset is a usage error, not a crash
    assert_eq!(unsafe { col_env_new(c("lander-sparse").as_ptr(), 0, &mut handle) }, ColStatus::Ok);
    let mut step = std::mem::MaybeUninit::<ColStep>::uninit();
    let action = [0.0; COL_ACTION_DIM];
    assert_eq!(unsafe { col_env_step(handle, action.as_ptr(), step.as_mut_ptr()) }, ColStatus::Usage);
    unsafe { col_env_free(handle) };

    // freeing null handles is a no-op
    unsafe {
        col_env_free(ptr::null_mut());
        col_policy_free(ptr::null_mut());
        col_demos_free(ptr::null_mut());
        assert_eq!(col_demos_len(ptr::null()), 0);
    }
}

#[test]
fn short_error_buffers_are_truncated_and_terminated() {
    let mut handle = ptr::null_mut();
    unsafe { col_env_new(c("a-rather-long-unknown-environment-name").as_ptr(), 0, &mut handle) };
    let full = last_error();
    let mut small = [1 as std::ffi::c_char; 8];
    let needed = unsafe { col_last_error(small.as_mut_ptr(), small.len()) };
    assert_eq!(needed, full.len() + 1);
    let got = unsafe { CStr::from_ptr(small.as_ptr()) }.to_str().unwrap();
    assert_eq!(got, &full[..7]);
}

#[test]
fn demonstrations_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = c(dir.path().join("demos.ndjson").to_str().unwrap());
    let mut written = 0usize;
    let status = unsafe { col_collect_demos(path.as_ptr(), c("lander-dense").as_ptr(), 3, 11, &mut written) };
    assert_eq!(status, ColStatus::Ok);
    assert!(written > 0);

    let mut demos = ptr::null_mut();
    assert_eq!(unsafe { col_demos_load(path.as_ptr(), &mut demos) }, ColStatus::Ok);
    unsafe {
        assert_eq!(col_demos_len(demos), written);
        assert_eq!(col_demos_trajectories(demos), 3);
        assert_eq!(col_demos_rejected(demos), 0);
    }
    let mut t = std::mem::MaybeUninit::<ColTransition>::uninit();
    assert_eq!(unsafe { col_demos_get(demos, 0, t.as_mut_ptr()) }, ColStatus::Ok);
    let first = unsafe { t.assume_init() };
    assert!(first.expert);
    assert_eq!(first.action, scripted_action(&first.state).to_array());
    assert_eq!(unsafe { col_demos_get(demos, written, t.as_mut_ptr()) }, ColStatus::OutOfRange);
    assert!(last_error().contains("out of range"));
    unsafe { col_demos_free(demos) };
}

#[test]
fn train_then_load_and_evaluate_policy() {
    let dir = tempfile::tempdir().unwrap();
    let demos = dir.path().join("demos.ndjson");
    let demos_c = c(demos.to_str().unwrap());
    assert_eq!(
        unsafe { col_collect_demos(demos_c.as_ptr(), c("lander-dense").as_ptr(), 2, 0, ptr::null_mut()) },
        ColStatus::Ok
    );
    let out = dir.path().join("run");
    let overrides = [
        c("method=col"),
        c("seeds=4"),
        c("total_env_steps=400"),
        c("pretrain_steps=50"),
        c("eval_interval=200"),
        c("eval_episodes=1"),
        c(&format!("demo_path={}", demos.display())),
        c(&format!("output_dir={}", out.display())),
    ];
    let ptrs: Vec<_> = overrides.iter().map(|s| s.as_ptr()).collect();
    assert_eq!(unsafe { col_train(ptr::null(), ptrs.as_ptr(), ptrs.len()) }, ColStatus::Ok, "{}", last_error());
    assert!(out.join("aggregate.csv").exists());

    let bad = [c("lambda_a=-1")];
    let bad_ptrs: Vec<_> = bad.iter().map(|s| s.as_ptr()).collect();
    assert_eq!(unsafe { col_train(ptr::null(), bad_ptrs.as_ptr(), 1) }, ColStatus::Config);
    assert_eq!(unsafe { col_train(ptr::null(), ptr::null(), 1) }, ColStatus::NullPointer);

    let checkpoint = c(out.join("seed_4").join("final").to_str().unwrap());
    let mut policy = ptr::null_mut();
    assert_eq!(unsafe { col_policy_load(checkpoint.as_ptr(), &mut policy) }, ColStatus::Ok, "{}", last_error());
    let mut action = [9.0; COL_ACTION_DIM];
    let obs = [0.1; COL_OBS_DIM];
    assert_eq!(unsafe { col_policy_act(policy, obs.as_ptr(), action.as_mut_ptr()) }, ColStatus::Ok);
    assert!(action.iter().all(|a| (-1.0..=1.0).contains(a)));

    let mut first = std::mem::MaybeUninit::<ColEvalResult>::uninit();
    let mut second = std::mem::MaybeUninit::<ColEvalResult>::uninit();
    unsafe {
        assert_eq!(col_policy_evaluate(policy, c("lander-dense").as_ptr(), 3, 8, first.as_mut_ptr()), ColStatus::Ok);
        assert_eq!(col_policy_evaluate(policy, c("lander-dense").as_ptr(), 3, 8, second.as_mut_ptr()), ColStatus::Ok);
        let (a, b) = (first.assume_init(), second.assume_init());
        assert_eq!(a.episodes, 3);
        assert_eq!(a.mean, b.mean);
        assert!(a.stderr >= 0.0);
        col_policy_free(policy);
    }
}
