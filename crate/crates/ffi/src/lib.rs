//! C ABI over `mmfees`.
//!
//! Objects cross the boundary as opaque handles created by `*_new`/`*_build`/
//! `*_run` functions and released with the matching `*_free`. Every fallible
//! call returns an [`MmfStatus`]; on failure a description is available from
//! [`mmf_last_error`] on the same thread. Joint actions are 1-based ids as in
//! the CLI output.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use mmfees::agent::JointActionCodec;
use mmfees::game::expected_reward;
use mmfees::{build_reward_matrix, run_experiment, AggregateResult, EquilibriumReport, Error, ExperimentConfig, RewardMatrix};

/// Result codes for every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MmfStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    ConfigError = 3,
    InvalidArgument = 4,
    TooLarge = 5,
    IoError = 6,
    Panic = 7,
}

/// Opaque experiment configuration.
pub struct MmfConfig {
    inner: ExperimentConfig,
}

/// Opaque exact reward matrix together with its equilibrium classification.
pub struct MmfRewardMatrix {
    matrix: RewardMatrix,
    report: EquilibriumReport,
}

/// Opaque result of a multi-instance experiment.
pub struct MmfExperiment {
    result: AggregateResult,
}

/// Plain-value summary of an experiment. Statistics whose `has_*` flag is 0
/// are undefined and set to NaN.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MmfSummary {
    pub n_instances: usize,
    pub n_converged: usize,
    pub has_net_fee: u8,
    pub net_fee_mean: f64,
    pub net_fee_std: f64,
    pub orders_mean: f64,
    pub orders_std: f64,
    pub convergence_rate: f64,
    pub modal_fraction: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

fn status_of(err: &Error) -> MmfStatus {
    match err {
        Error::Config { .. } | Error::UnknownTable(_) => MmfStatus::ConfigError,
        Error::TooManyProfiles { .. } => MmfStatus::TooLarge,
        Error::Io(_) => MmfStatus::IoError,
        Error::InvalidParameter { .. } | Error::LevelOutOfRange { .. } | Error::ActionOutOfRange { .. } => {
            MmfStatus::InvalidArgument
        }
    }
}

fn fail(status: MmfStatus, msg: impl Into<String>) -> MmfStatus {
    set_error(msg);
    status
}

fn from_error(err: Error) -> MmfStatus {
    fail(status_of(&err), err.to_string())
}

/// Runs `f`, turning panics into `MmfStatus::Panic`.
fn guard(f: impl FnOnce() -> MmfStatus) -> MmfStatus {
    clear_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".to_string());
            fail(MmfStatus::Panic, format!("internal error: {msg}"))
        }
    }
}

unsafe fn read_str<'a>(s: *const c_char) -> Result<&'a str, MmfStatus> {
    if s.is_null() {
        return Err(fail(MmfStatus::NullPointer, "null string"));
    }
    CStr::from_ptr(s)
        .to_str()
        .map_err(|e| fail(MmfStatus::InvalidUtf8, e.to_string()))
}

unsafe fn read_profile(
    cfg: &ExperimentConfig,
    action_ids: *const u32,
    n_agents: usize,
) -> Result<Vec<usize>, MmfStatus> {
    if action_ids.is_null() {
        return Err(fail(MmfStatus::NullPointer, "null action id array"));
    }
    if n_agents != cfg.market.n_agents {
        return Err(fail(
            MmfStatus::InvalidArgument,
            format!("expected {} actions, got {n_agents}", cfg.market.n_agents),
        ));
    }
    let codec = JointActionCodec::new(cfg.market.grid.levels());
    std::slice::from_raw_parts(action_ids, n_agents)
        .iter()
        .map(|&id| {
            codec
                .pair_from_id(id as usize)
                .map(|p| codec.index(p))
                .map_err(from_error)
        })
        .collect()
}

/// Short static description of a status code.
#[no_mangle]
pub extern "C" fn mmf_status_message(status: MmfStatus) -> *const c_char {
    let s: &'static CStr = match status {
        MmfStatus::Ok => c"ok",
        MmfStatus::NullPointer => c"null pointer argument",
        MmfStatus::InvalidUtf8 => c"string is not valid UTF-8",
        MmfStatus::ConfigError => c"invalid configuration",
        MmfStatus::InvalidArgument => c"invalid argument",
        MmfStatus::TooLarge => c"problem too large for exact enumeration",
        MmfStatus::IoError => c"I/O error",
        MmfStatus::Panic => c"internal error",
    };
    s.as_ptr()
}

/// Copies the calling thread's last error message into `buf` (NUL-terminated,
/// truncated to `cap`). Returns the full message length without the NUL, or 0
/// when there is no error.
#[no_mangle]
pub unsafe extern "C" fn mmf_last_error(buf: *mut c_char, cap: usize) -> usize {
    LAST_ERROR.with(|e| match e.borrow().as_ref() {
        None => {
            if !buf.is_null() && cap > 0 {
                *buf = 0;
            }
            0
        }
        Some(msg) => {
            let bytes = msg.as_bytes();
            if !buf.is_null() && cap > 0 {
                let n = bytes.len().min(cap - 1);
                ptr::copy_nonoverlapping(bytes.as_ptr() as *const c_char, buf, n);
                *buf.add(n) = 0;
            }
            bytes.len()
        }
    })
}

/// Baseline configuration.
#[no_mangle]
pub extern "C" fn mmf_config_new() -> *mut MmfConfig {
    Box::into_raw(Box::new(MmfConfig {
        inner: ExperimentConfig::default(),
    }))
}

/// Parses `key = value` text into a new configuration.
#[no_mangle]
pub unsafe extern "C" fn mmf_config_parse(text: *const c_char, out: *mut *mut MmfConfig) -> MmfStatus {
    guard(|| {
        if out.is_null() {
            return fail(MmfStatus::NullPointer, "null output pointer");
        }
        let text = match read_str(text) {
            Ok(t) => t,
            Err(s) => return s,
        };
        match ExperimentConfig::parse(text) {
            Ok(inner) => {
                *out = Box::into_raw(Box::new(MmfConfig { inner }));
                MmfStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// Loads a configuration file.
#[no_mangle]
pub unsafe extern "C" fn mmf_config_load(path: *const c_char, out: *mut *mut MmfConfig) -> MmfStatus {
    guard(|| {
        if out.is_null() {
            return fail(MmfStatus::NullPointer, "null output pointer");
        }
        let path = match read_str(path) {
            Ok(p) => p,
            Err(s) => return s,
        };
        match ExperimentConfig::load(path) {
            Ok(inner) => {
                *out = Box::into_raw(Box::new(MmfConfig { inner }));
                MmfStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// Sets one configuration key, with the same keys and value syntax as the
/// config file. Setting `beta` keeps the current `eta`.
#[no_mangle]
pub unsafe extern "C" fn mmf_config_set(cfg: *mut MmfConfig, key: *const c_char, value: *const c_char) -> MmfStatus {
    guard(|| {
        let Some(cfg) = cfg.as_mut() else {
            return fail(MmfStatus::NullPointer, "null config");
        };
        let (key, value) = match (read_str(key), read_str(value)) {
            (Ok(k), Ok(v)) => (k, v),
            (Err(s), _) | (_, Err(s)) => return s,
        };
        if key.contains(['=', '\n', '#']) || value.contains(['\n', '#']) {
            return fail(MmfStatus::InvalidArgument, "key and value must be plain tokens");
        }
        let text = format!("{}{key} = {value}\n", cfg.inner.to_text());
        match ExperimentConfig::parse(&text) {
            Ok(inner) => {
                cfg.inner = inner;
                MmfStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// Reads a numeric configuration value. Count keys are returned as doubles.
#[no_mangle]
pub unsafe extern "C" fn mmf_config_get(cfg: *const MmfConfig, key: *const c_char, out: *mut f64) -> MmfStatus {
    guard(|| {
        let Some(cfg) = cfg.as_ref() else {
            return fail(MmfStatus::NullPointer, "null config");
        };
        if out.is_null() {
            return fail(MmfStatus::NullPointer, "null output pointer");
        }
        let key = match read_str(key) {
            Ok(k) => k,
            Err(s) => return s,
        };
        let text = cfg.inner.to_text();
        let found = text.lines().find_map(|l| {
            let (k, v) = l.split_once(" = ")?;
            (k == key).then(|| v.parse::<f64>().ok()).flatten()
        });
        match found {
            Some(v) => {
                *out = v;
                MmfStatus::Ok
            }
            None => fail(MmfStatus::InvalidArgument, format!("unknown key `{key}`")),
        }
    })
}

#[no_mangle]
pub unsafe extern "C" fn mmf_config_free(cfg: *mut MmfConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

/// Exact expected one-period reward of each agent under the profile given by
/// `n_agents` 1-based joint action ids. Writes `n_agents` values to `out`.
#[no_mangle]
pub unsafe extern "C" fn mmf_expected_reward(
    cfg: *const MmfConfig,
    action_ids: *const u32,
    n_agents: usize,
    out: *mut f64,
) -> MmfStatus {
    guard(|| {
        let Some(cfg) = cfg.as_ref() else {
            return fail(MmfStatus::NullPointer, "null config");
        };
        if out.is_null() {
            return fail(MmfStatus::NullPointer, "null output pointer");
        }
        let profile = match read_profile(&cfg.inner, action_ids, n_agents) {
            Ok(p) => p,
            Err(s) => return s,
        };
        let codec = JointActionCodec::new(cfg.inner.market.grid.levels());
        let pairs: Vec<_> = profile.iter().map(|&a| codec.pair(a)).collect();
        match expected_reward(&pairs, &cfg.inner.market, &cfg.inner.fees) {
            Ok(r) => {
                ptr::copy_nonoverlapping(r.as_ptr(), out, r.len());
                MmfStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// Builds the full reward matrix and classifies its equilibria.
#[no_mangle]
pub unsafe extern "C" fn mmf_reward_matrix_build(cfg: *const MmfConfig, out: *mut *mut MmfRewardMatrix) -> MmfStatus {
    guard(|| {
        let Some(cfg) = cfg.as_ref() else {
            return fail(MmfStatus::NullPointer, "null config");
        };
        if out.is_null() {
            return fail(MmfStatus::NullPointer, "null output pointer");
        }
        match build_reward_matrix(&cfg.inner.market, &cfg.inner.fees) {
            Ok(matrix) => {
                let report = EquilibriumReport::analyze(&matrix);
                *out = Box::into_raw(Box::new(MmfRewardMatrix { matrix, report }));
                MmfStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

#[no_mangle]
pub unsafe extern "C" fn mmf_reward_matrix_num_agents(m: *const MmfRewardMatrix) -> usize {
    m.as_ref().map_or(0, |m| m.matrix.n_agents())
}

#[no_mangle]
pub unsafe extern "C" fn mmf_reward_matrix_num_actions(m: *const MmfRewardMatrix) -> usize {
    m.as_ref().map_or(0, |m| m.matrix.n_actions())
}

unsafe fn matrix_profile(m: &MmfRewardMatrix, action_ids: *const u32, n_agents: usize) -> Result<Vec<usize>, MmfStatus> {
    if action_ids.is_null() {
        return Err(fail(MmfStatus::NullPointer, "null action id array"));
    }
    if n_agents != m.matrix.n_agents() {
        return Err(fail(
            MmfStatus::InvalidArgument,
            format!("expected {} actions, got {n_agents}", m.matrix.n_agents()),
        ));
    }
    std::slice::from_raw_parts(action_ids, n_agents)
        .iter()
        .map(|&id| {
            let id = id as usize;
            if id == 0 || id > m.matrix.n_actions() {
                Err(fail(
                    MmfStatus::InvalidArgument,
                    format!("joint action id {id} is outside 1..={}", m.matrix.n_actions()),
                ))
            } else {
                Ok(id - 1)
            }
        })
        .collect()
}

/// Expected reward of `agent` (0-based) under a profile of 1-based action ids.
#[no_mangle]
pub unsafe extern "C" fn mmf_reward_matrix_get(
    m: *const MmfRewardMatrix,
    action_ids: *const u32,
    n_agents: usize,
    agent: usize,
    out: *mut f64,
) -> MmfStatus {
    guard(|| {
        let Some(m) = m.as_ref() else {
            return fail(MmfStatus::NullPointer, "null matrix");
        };
        if out.is_null() {
            return fail(MmfStatus::NullPointer, "null output pointer");
        }
        if agent >= m.matrix.n_agents() {
            return fail(MmfStatus::InvalidArgument, format!("agent {agent} out of range"));
        }
        match matrix_profile(m, action_ids, n_agents) {
            Ok(p) => {
                *out = m.matrix.reward(&p, agent);
                MmfStatus::Ok
            }
            Err(s) => s,
        }
    })
}

fn membership(set: &[Vec<usize>], profile: &[usize]) -> u8 {
    set.iter().any(|p| p == profile) as u8
}

/// Sets `*out` to 1 when the profile is a pure Nash equilibrium, else 0.
#[no_mangle]
pub unsafe extern "C" fn mmf_reward_matrix_is_nash(
    m: *const MmfRewardMatrix,
    action_ids: *const u32,
    n_agents: usize,
    out: *mut u8,
) -> MmfStatus {
    guard(|| {
        let Some(m) = m.as_ref() else {
            return fail(MmfStatus::NullPointer, "null matrix");
        };
        if out.is_null() {
            return fail(MmfStatus::NullPointer, "null output pointer");
        }
        match matrix_profile(m, action_ids, n_agents) {
            Ok(p) => {
                *out = membership(&m.report.pure_nash, &p);
                MmfStatus::Ok
            }
            Err(s) => s,
        }
    })
}

/// Sets `*out` to 1 when the profile maximises joint profit, else 0.
#[no_mangle]
pub unsafe extern "C" fn mmf_reward_matrix_is_cooperative(
    m: *const MmfRewardMatrix,
    action_ids: *const u32,
    n_agents: usize,
    out: *mut u8,
) -> MmfStatus {
    guard(|| {
        let Some(m) = m.as_ref() else {
            return fail(MmfStatus::NullPointer, "null matrix");
        };
        if out.is_null() {
            return fail(MmfStatus::NullPointer, "null output pointer");
        }
        match matrix_profile(m, action_ids, n_agents) {
            Ok(p) => {
                *out = membership(&m.report.cooperative, &p);
                MmfStatus::Ok
            }
            Err(s) => s,
        }
    })
}

#[no_mangle]
pub unsafe extern "C" fn mmf_reward_matrix_free(m: *mut MmfRewardMatrix) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

/// Runs every configured instance with seeds `seed + k`.
#[no_mangle]
pub unsafe extern "C" fn mmf_experiment_run(cfg: *const MmfConfig, seed: u64, out: *mut *mut MmfExperiment) -> MmfStatus {
    guard(|| {
        let Some(cfg) = cfg.as_ref() else {
            return fail(MmfStatus::NullPointer, "null config");
        };
        if out.is_null() {
            return fail(MmfStatus::NullPointer, "null output pointer");
        }
        let mut c = cfg.inner.clone();
        c.base_seed = seed;
        match run_experiment(&c) {
            Ok(result) => {
                *out = Box::into_raw(Box::new(MmfExperiment { result }));
                MmfStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

#[no_mangle]
pub unsafe extern "C" fn mmf_experiment_summary(exp: *const MmfExperiment, out: *mut MmfSummary) -> MmfStatus {
    guard(|| {
        let Some(exp) = exp.as_ref() else {
            return fail(MmfStatus::NullPointer, "null experiment");
        };
        if out.is_null() {
            return fail(MmfStatus::NullPointer, "null output pointer");
        }
        let r = &exp.result;
        let (fee_mean, fee_std) = r.net_fee.map_or((f64::NAN, f64::NAN), |s| (s.mean, s.std));
        let (ord_mean, ord_std) = r.orders.map_or((f64::NAN, f64::NAN), |s| (s.mean, s.std));
        *out = MmfSummary {
            n_instances: r.n_instances,
            n_converged: r.n_converged,
            has_net_fee: r.net_fee.is_some() as u8,
            net_fee_mean: fee_mean,
            net_fee_std: fee_std,
            orders_mean: ord_mean,
            orders_std: ord_std,
            convergence_rate: r.convergence_rate(),
            modal_fraction: r.modal().map_or(f64::NAN, |(_, s)| s),
        };
        MmfStatus::Ok
    })
}

/// Writes the most common settled profile (1-based ids) into `buf`. `*len`
/// receives the number of agents even when `cap` is too small, in which case
/// nothing is written and `MMF_STATUS_INVALID_ARGUMENT` is returned.
#[no_mangle]
pub unsafe extern "C" fn mmf_experiment_modal_profile(
    exp: *const MmfExperiment,
    buf: *mut u32,
    cap: usize,
    len: *mut usize,
) -> MmfStatus {
    guard(|| {
        let Some(exp) = exp.as_ref() else {
            return fail(MmfStatus::NullPointer, "null experiment");
        };
        if len.is_null() {
            return fail(MmfStatus::NullPointer, "null length pointer");
        }
        let profile = exp.result.modal().map(|(p, _)| p.to_vec()).unwrap_or_default();
        *len = profile.len();
        if cap < profile.len() {
            return fail(MmfStatus::InvalidArgument, format!("buffer holds {cap}, need {}", profile.len()));
        }
        if buf.is_null() && !profile.is_empty() {
            return fail(MmfStatus::NullPointer, "null buffer");
        }
        for (i, a) in profile.iter().enumerate() {
            *buf.add(i) = (*a + 1) as u32;
        }
        MmfStatus::Ok
    })
}

/// Share of instances that settled on the profile of 1-based ids.
#[no_mangle]
pub unsafe extern "C" fn mmf_experiment_profile_share(
    exp: *const MmfExperiment,
    action_ids: *const u32,
    n_agents: usize,
    out: *mut f64,
) -> MmfStatus {
    guard(|| {
        let Some(exp) = exp.as_ref() else {
            return fail(MmfStatus::NullPointer, "null experiment");
        };
        if out.is_null() || action_ids.is_null() {
            return fail(MmfStatus::NullPointer, "null pointer argument");
        }
        let ids = std::slice::from_raw_parts(action_ids, n_agents);
        if ids.contains(&0) {
            return fail(MmfStatus::InvalidArgument, "action ids are 1-based");
        }
        let profile: Vec<usize> = ids.iter().map(|&id| id as usize - 1).collect();
        *out = exp.result.profile_share(&profile);
        MmfStatus::Ok
    })
}

#[no_mangle]
pub unsafe extern "C" fn mmf_experiment_free(exp: *mut MmfExperiment) {
    if !exp.is_null() {
        drop(Box::from_raw(exp));
    }
}
