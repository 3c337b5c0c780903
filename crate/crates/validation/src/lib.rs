//! Independent reference implementations used to check `mmfees`, plus the
//! bookkeeping for the acceptance suite in `tests/acceptance.rs`.

use std::collections::HashMap;
use std::io::Write;
use std::sync::{Arc, Mutex, OnceLock};

use mmfees::agent::{JointActionCodec, LevelPair};
use mmfees::market::{period_reward, FeeSchedule, MarketParams};
use mmfees::sim::{stream_rng, MarketEnv};
use mmfees::{run_experiment, AggregateResult, ExperimentConfig};

/// Brute-force matcher over unit lots: each share of the market order takes
/// the tightest level with depth left, then each level's executed amount is
/// shared out in proportion to the agents' quotes there.
pub fn tick_lot_match(quotes: &[Vec<u32>], m: u32) -> Vec<Vec<f64>> {
    let levels = quotes.first().map_or(0, Vec::len);
    let depth: Vec<u32> = (0..levels).map(|k| quotes.iter().map(|q| q[k]).sum()).collect();
    let mut taken = vec![0u32; levels];
    for _ in 0..m {
        match (0..levels).find(|&k| taken[k] < depth[k]) {
            Some(k) => taken[k] += 1,
            None => break,
        }
    }
    quotes
        .iter()
        .map(|q| {
            (0..levels)
                .map(|k| {
                    if depth[k] == 0 {
                        0.0
                    } else {
                        taken[k] as f64 * q[k] as f64 / depth[k] as f64
                    }
                })
                .collect()
        })
        .collect()
}

/// Sample mean and standard error of a statistic.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    pub std_error: f64,
}

/// Monte Carlo estimate of every agent's one-period reward under a fixed
/// profile of 0-based joint action indices, starting from flat inventory.
pub fn sampled_reward(
    profile: &[usize],
    params: &MarketParams,
    fees: &FeeSchedule,
    samples: u64,
    seed: u64,
) -> Vec<Estimate> {
    let env = MarketEnv::new(params, fees).expect("valid market");
    let codec = JointActionCodec::new(params.grid.levels());
    let actions: Vec<LevelPair> = profile.iter().map(|&a| codec.pair(a)).collect();
    let mut rng = stream_rng(seed, 0);
    let n = profile.len();
    let mut sum = vec![0.0; n];
    let mut sum_sq = vec![0.0; n];
    for _ in 0..samples {
        let out = env.step(&actions, &mut rng);
        for i in 0..n {
            let dy = out.bid.agent_total(i) - out.ask.agent_total(i);
            let r = period_reward(out.ask.agent(i), out.bid.agent(i), &params.grid, fees.beta, params.xi, dy);
            sum[i] += r;
            sum_sq[i] += r * r;
        }
    }
    let s = samples as f64;
    (0..n)
        .map(|i| {
            let mean = sum[i] / s;
            let var = (sum_sq[i] / s - mean * mean) * s / (s - 1.0);
            Estimate {
                mean,
                std_error: (var.max(0.0) / s).sqrt(),
            }
        })
        .collect()
}

type Cache = Mutex<HashMap<String, Arc<OnceLock<AggregateResult>>>>;

/// Runs an experiment once per distinct configuration and shares the result
/// between callers, so criteria that read the same table cell do not repeat
/// the learning runs.
pub fn experiment(cfg: &ExperimentConfig) -> Arc<OnceLock<AggregateResult>> {
    static CACHE: OnceLock<Cache> = OnceLock::new();
    let slot = CACHE
        .get_or_init(Default::default)
        .lock()
        .unwrap()
        .entry(cfg.to_text())
        .or_default()
        .clone();
    slot.get_or_init(|| run_experiment(cfg).expect("valid experiment configuration"));
    slot
}

pub fn within(x: f64, lo: f64, hi: f64) -> bool {
    (lo..=hi).contains(&x)
}

/// Writes one `criterion N: PASS|FAIL ...` line straight to stderr so it shows
/// up whether or not the test harness captures output.
pub fn report(id: u32, pass: bool, detail: &str) -> bool {
    let verdict = if pass { "PASS" } else { "FAIL" };
    let mut err = std::io::stderr().lock();
    writeln!(err, "criterion {id}: {verdict} | {detail}").ok();
    pass
}
