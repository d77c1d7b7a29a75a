//! C ABI over the mindprobe harness.
//!
//! Every fallible function returns an [`MmStatus`]. On failure a message is
//! kept per thread and can be read with [`mm_last_error`]. Datasets are
//! exposed as opaque [`MmDataset`] handles owned by the caller until passed
//! to [`mm_dataset_free`]. Strings returned through out-pointers must be
//! released with [`mm_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::ptr;

use mindprobe::backends::{Backend, BackendError};
use mindprobe::dataset::{self, Dataset, DatasetError};
use mindprobe::domain::{Action, Bounds};
use mindprobe::envs::BuiltinEnv;
use mindprobe::parsing;
use mindprobe::policies;
use mindprobe::runner::{self, RunControl, RunError, RunPlan};

/// Result codes shared by every entry point.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MmStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Format = 4,
    Simulation = 5,
    Backend = 6,
    /// The run finished without error but some queries failed or it stopped early.
    Incomplete = 7,
    Panic = 99,
}

/// Opaque dataset handle.
pub struct MmDataset {
    inner: Dataset,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let c = CString::new(msg.into().replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

struct Failure(MmStatus, String);

impl Failure {
    fn arg(msg: impl Into<String>) -> Self {
        Failure(MmStatus::InvalidArgument, msg.into())
    }
}

impl From<DatasetError> for Failure {
    fn from(e: DatasetError) -> Self {
        let code = match &e {
            DatasetError::Io(_) => MmStatus::Io,
            DatasetError::Format { .. } | DatasetError::Version { .. } | DatasetError::Validation(_) => {
                MmStatus::Format
            }
            DatasetError::Simulation { .. } => MmStatus::Simulation,
            DatasetError::Precondition(_) | DatasetError::Unsupported(_) => MmStatus::InvalidArgument,
        };
        Failure(code, e.to_string())
    }
}

impl From<RunError> for Failure {
    fn from(e: RunError) -> Self {
        match e {
            RunError::Dataset(d) => d.into(),
            RunError::Backend(b) => b.into(),
            RunError::Io { .. } | RunError::Journal(_) => Failure(MmStatus::Io, e.to_string()),
            RunError::Plan(_) | RunError::Prompt(_) => Failure(MmStatus::InvalidArgument, e.to_string()),
        }
    }
}

impl From<BackendError> for Failure {
    fn from(e: BackendError) -> Self {
        Failure(MmStatus::Backend, e.to_string())
    }
}

/// Runs `f`, translating errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<MmStatus, Failure>) -> MmStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(status)) => status,
        Ok(Err(Failure(code, msg))) => {
            set_error(msg);
            code
        }
        Err(_) => {
            set_error("internal panic");
            MmStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure(MmStatus::NullPointer, format!("{what} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure::arg(format!("{what} is not valid UTF-8")))
}

fn out_ptr<T>(p: *mut T, what: &str) -> Result<(), Failure> {
    if p.is_null() {
        Err(Failure(MmStatus::NullPointer, format!("{what} is null")))
    } else {
        Ok(())
    }
}

fn dataset_ref<'a>(ds: *const MmDataset) -> Result<&'a Dataset, Failure> {
    if ds.is_null() {
        return Err(Failure(MmStatus::NullPointer, "dataset handle is null".into()));
    }
    Ok(unsafe { &(*ds).inner })
}

fn into_c_string(s: String) -> Result<*mut c_char, Failure> {
    CString::new(s)
        .map(CString::into_raw)
        .map_err(|_| Failure::arg("string contains a NUL byte"))
}

/// Message for the last failed call on this thread, or null. Valid until
/// the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn mm_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn mm_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Frees a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not have been freed already.
#[no_mangle]
pub unsafe extern "C" fn mm_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Simulates `n_episodes` episodes of a built-in task with its scripted
/// controller. `max_steps == 0` keeps the task's own limit.
///
/// # Safety
/// `task` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mm_dataset_collect(
    task: *const c_char,
    n_episodes: usize,
    seed: u64,
    max_steps: usize,
    out: *mut *mut MmDataset,
) -> MmStatus {
    guard(|| {
        out_ptr(out, "out")?;
        let env = BuiltinEnv::for_task(str_arg(task, "task")?).map_err(|e| Failure::arg(e.to_string()))?;
        let policy = policies::scripted(env);
        let ds = dataset::collect(env, policy.as_ref(), n_episodes, seed, (max_steps > 0).then_some(max_steps))?;
        *out = Box::into_raw(Box::new(MmDataset { inner: ds }));
        Ok(MmStatus::Ok)
    })
}

/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mm_dataset_load(path: *const c_char, out: *mut *mut MmDataset) -> MmStatus {
    guard(|| {
        out_ptr(out, "out")?;
        let ds = Dataset::load(Path::new(str_arg(path, "path")?))?;
        *out = Box::into_raw(Box::new(MmDataset { inner: ds }));
        Ok(MmStatus::Ok)
    })
}

/// # Safety
/// `ds` must be a live handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn mm_dataset_save(ds: *const MmDataset, path: *const c_char) -> MmStatus {
    guard(|| {
        dataset_ref(ds)?.save(Path::new(str_arg(path, "path")?))?;
        Ok(MmStatus::Ok)
    })
}

/// Releases a dataset handle. Null is ignored.
///
/// # Safety
/// `ds` must come from this library and not have been freed already.
#[no_mangle]
pub unsafe extern "C" fn mm_dataset_free(ds: *mut MmDataset) {
    if !ds.is_null() {
        drop(Box::from_raw(ds));
    }
}

/// Number of episodes, or 0 for a null handle.
///
/// # Safety
/// `ds` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn mm_dataset_n_episodes(ds: *const MmDataset) -> usize {
    dataset_ref(ds).map_or(0, |d| d.episodes.len())
}

/// # Safety
/// `ds` must be a live handle and `out_len` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mm_dataset_episode_len(ds: *const MmDataset, episode: usize, out_len: *mut usize) -> MmStatus {
    guard(|| {
        out_ptr(out_len, "out_len")?;
        let d = dataset_ref(ds)?;
        let ep = d
            .episodes
            .get(episode)
            .ok_or_else(|| Failure::arg(format!("episode {episode} out of range ({} episodes)", d.episodes.len())))?;
        *out_len = ep.len();
        Ok(MmStatus::Ok)
    })
}

/// Hex content hash of the dataset body. Free with [`mm_string_free`].
///
/// # Safety
/// `ds` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mm_dataset_content_hash(ds: *const MmDataset, out: *mut *mut c_char) -> MmStatus {
    guard(|| {
        out_ptr(out, "out")?;
        *out = into_c_string(dataset_ref(ds)?.content_hash())?;
        Ok(MmStatus::Ok)
    })
}

/// Equal-width bin index of `value` over `[low, high]`.
///
/// # Safety
/// `out_bin` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mm_quantize(value: f64, low: f64, high: f64, n_bins: usize, out_bin: *mut usize) -> MmStatus {
    guard(|| {
        out_ptr(out_bin, "out_bin")?;
        *out_bin = parsing::quantize(value, &Bounds::new(low, high), n_bins).map_err(|e| Failure::arg(e.to_string()))?;
        Ok(MmStatus::Ok)
    })
}

/// One transition of a built-in task. Discrete actions are passed as a
/// single integral value. `out_state` must hold at least `state_len`
/// values.
///
/// # Safety
/// Array arguments must point to at least the stated number of values and
/// every out-pointer must be valid.
#[no_mangle]
pub unsafe extern "C" fn mm_env_step(
    task: *const c_char,
    state: *const f64,
    state_len: usize,
    action: *const f64,
    action_len: usize,
    out_state: *mut f64,
    out_reward: *mut f64,
    out_terminated: *mut bool,
) -> MmStatus {
    guard(|| {
        for (p, what) in [(state, "state"), (action, "action")] {
            if p.is_null() {
                return Err(Failure(MmStatus::NullPointer, format!("{what} is null")));
            }
        }
        out_ptr(out_state, "out_state")?;
        out_ptr(out_reward, "out_reward")?;
        out_ptr(out_terminated, "out_terminated")?;
        let env = BuiltinEnv::for_task(str_arg(task, "task")?).map_err(|e| Failure::arg(e.to_string()))?;
        let s = std::slice::from_raw_parts(state, state_len);
        let a = std::slice::from_raw_parts(action, action_len);
        let action = if env.spec().action_space.is_discrete() {
            match a {
                [x] if x.fract() == 0.0 && *x >= 0.0 => Action::Discrete(*x as usize),
                _ => return Err(Failure::arg("discrete action must be one non-negative integer")),
            }
        } else {
            Action::Continuous(a.to_vec())
        };
        let tr = env.step(s, &action).map_err(|e| Failure::arg(e.to_string()))?;
        std::slice::from_raw_parts_mut(out_state, state_len).copy_from_slice(&tr.state);
        *out_reward = tr.reward;
        *out_terminated = tr.terminated;
        Ok(MmStatus::Ok)
    })
}

/// Runs (or resumes) the plan at `plan_path`. On `Ok` or `Incomplete`,
/// `out_summary` receives a JSON summary to free with [`mm_string_free`].
/// `output_dir` may be null to keep the plan's own directory.
///
/// # Safety
/// String arguments must be NUL-terminated (or null where allowed) and
/// `out_summary` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mm_run_plan(
    plan_path: *const c_char,
    output_dir: *const c_char,
    out_summary: *mut *mut c_char,
) -> MmStatus {
    guard(|| {
        out_ptr(out_summary, "out_summary")?;
        let mut plan = RunPlan::load(Path::new(str_arg(plan_path, "plan_path")?))?;
        if !output_dir.is_null() {
            plan.output_dir = PathBuf::from(str_arg(output_dir, "output_dir")?);
        }
        let resolved = plan.resolve()?;
        let transcript = plan.output_dir.join(runner::TRANSCRIPT_FILE);
        let backends = plan
            .backends
            .iter()
            .map(|b| b.build(Some(&transcript)))
            .collect::<Result<Vec<Box<dyn Backend>>, _>>()?;
        let outcome = runner::run(&resolved, &backends, RunControl::default())?;
        let summary = format!(
            "{{\"total_queries\":{},\"resumed\":{},\"completed_now\":{},\"failed\":{},\"metric_rows\":{}}}",
            outcome.total_queries,
            outcome.resumed,
            outcome.completed_now,
            outcome.failures.len(),
            outcome.metrics.len()
        );
        *out_summary = into_c_string(summary)?;
        Ok(if outcome.is_complete() { MmStatus::Ok } else { MmStatus::Incomplete })
    })
}
