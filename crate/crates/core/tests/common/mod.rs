#![allow(dead_code)]

use mmfees::agent::{JointActionCodec, LevelPair};
use mmfees::market::{FeeSchedule, MarketParams};
use mmfees::sim::{stream_rng, MarketEnv};

/// Brute-force matcher over unit lots: each share of the market order takes
/// the tightest level with depth left, then each level's executed amount is
/// shared out in proportion to the agents' quotes there.
pub fn tick_lot_match(quotes: &[Vec<u32>], m: u32) -> Vec<Vec<f64>> {
    let levels = quotes[0].len();
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

/// Monte Carlo mean and standard error of every agent's one-period reward,
/// starting from a flat inventory.
pub fn sampled_reward(
    profile: &[usize],
    params: &MarketParams,
    fees: &FeeSchedule,
    samples: u64,
    seed: u64,
) -> Vec<(f64, f64)> {
    let env = MarketEnv::new(params, fees).unwrap();
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
            let r = mmfees::market::period_reward(
                out.ask.agent(i),
                out.bid.agent(i),
                &params.grid,
                fees.beta,
                params.xi,
                dy,
            );
            sum[i] += r;
            sum_sq[i] += r * r;
        }
    }
    let s = samples as f64;
    (0..n)
        .map(|i| {
            let mean = sum[i] / s;
            let var = (sum_sq[i] / s - mean * mean) * s / (s - 1.0);
            (mean, (var.max(0.0) / s).sqrt())
        })
        .collect()
}
