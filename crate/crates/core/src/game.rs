//! Exact one-period game: expected rewards for every joint action profile by
//! enumerating the binomial order flow, and pure-Nash / cooperative
//! classification of the resulting matrix game.

use std::collections::HashMap;
use std::fmt::Write as _;

use crate::agent::{JointActionCodec, LevelPair};
use crate::error::{Error, Result};
use crate::market::{
    arrival_probability, level_weights, make_quote_curve, match_side, sum_levels, FeeSchedule,
    Fills, MarketParams, QuoteCurve, Side,
};

/// Largest profile count `build_reward_matrix` will enumerate.
pub const MAX_PROFILES: u128 = 10_000_000;

/// Relative tolerance used when comparing expected rewards for ties and
/// profitable deviations.
const TIE_TOL: f64 = 1e-9;

fn strictly_greater(a: f64, b: f64) -> bool {
    a > b + TIE_TOL * (1.0 + b.abs())
}

/// `Binomial(n, p)` probability mass for every outcome `0..=n`.
pub fn binomial_pmf(n: u64, p: f64) -> Vec<f64> {
    let n_us = n as usize;
    let mut pmf = vec![0.0; n_us + 1];
    if p <= 0.0 {
        pmf[0] = 1.0;
        return pmf;
    }
    if p >= 1.0 {
        pmf[n_us] = 1.0;
        return pmf;
    }
    let mut ln_fact = vec![0.0f64; n_us + 1];
    for i in 1..=n_us {
        ln_fact[i] = ln_fact[i - 1] + (i as f64).ln();
    }
    let (lp, lq) = (p.ln(), (-p).ln_1p());
    for m in 0..=n_us {
        let ln = ln_fact[n_us] - ln_fact[m] - ln_fact[n_us - m] + m as f64 * lp + (n_us - m) as f64 * lq;
        pmf[m] = ln.exp();
    }
    pmf
}

/// Exact first and second moments of one side's fills.
#[derive(Debug, Clone)]
pub struct SideMoments {
    /// Expected fills per agent and level.
    pub fills: Fills,
    /// `E[total_i]`
    pub mean_total: Vec<f64>,
    /// `E[total_i^2]`
    pub second_moment: Vec<f64>,
}

pub fn side_moments<Q: AsRef<[f64]>>(quotes: &[Q], p: f64, max_size: u64) -> SideMoments {
    let n = quotes.len();
    let levels = quotes.first().map_or(0, |q| q.as_ref().len());
    let mut expected = vec![vec![0.0; levels]; n];
    let mut mean_total = vec![0.0; n];
    let mut second_moment = vec![0.0; n];
    for (m, prob) in binomial_pmf(max_size, p).into_iter().enumerate() {
        if prob == 0.0 {
            continue;
        }
        let fills = match_side(quotes, m as u64);
        for i in 0..n {
            for (acc, g) in expected[i].iter_mut().zip(fills.agent(i)) {
                *acc += prob * g;
            }
            let t = fills.agent_total(i);
            mean_total[i] += prob * t;
            second_moment[i] += prob * t * t;
        }
    }
    let mut fills = Fills::zeros(n, levels);
    for (i, row) in expected.iter().enumerate() {
        fills.agent_mut(i).copy_from_slice(row);
    }
    SideMoments {
        fills,
        mean_total,
        second_moment,
    }
}

fn profile_curves(profile: &[LevelPair], side: Side, params: &MarketParams) -> Result<Vec<QuoteCurve>> {
    profile
        .iter()
        .map(|pair| {
            let level = match side {
                Side::Ask => pair.ask,
                Side::Bid => pair.bid,
            };
            make_quote_curve(level, params)
        })
        .collect()
}

fn side_for_profile(
    profile: &[LevelPair],
    side: Side,
    params: &MarketParams,
    fees: &FeeSchedule,
) -> Result<SideMoments> {
    if profile.len() != params.n_agents {
        return Err(Error::invalid(
            "profile",
            format!("expected {} actions, got {}", params.n_agents, profile.len()),
        ));
    }
    let curves = profile_curves(profile, side, params)?;
    let weights = level_weights(&params.grid, fees, params.c0, params.c1);
    let p = arrival_probability(&sum_levels(&curves), &weights, params.sigma);
    Ok(side_moments(&curves, p, params.max_order_size()))
}

/// Expected per-agent, per-level fills on one side under `profile`.
pub fn expected_side_fills(
    profile: &[LevelPair],
    side: Side,
    params: &MarketParams,
    fees: &FeeSchedule,
) -> Result<Fills> {
    Ok(side_for_profile(profile, side, params, fees)?.fills)
}

/// Exact expected one-period reward of every agent under `profile`. Ask and
/// bid flow are independent, so `E[(b - a)^2] = E[b^2] + E[a^2] - 2 E[a] E[b]`.
pub fn expected_reward(profile: &[LevelPair], params: &MarketParams, fees: &FeeSchedule) -> Result<Vec<f64>> {
    let ask = side_for_profile(profile, Side::Ask, params, fees)?;
    let bid = side_for_profile(profile, Side::Bid, params, fees)?;
    let deltas = params.grid.deltas();
    let spread_income = |fills: &[f64]| -> f64 {
        fills.iter().zip(deltas).map(|(g, d)| g * (d + fees.beta)).sum()
    };
    Ok((0..profile.len())
        .map(|i| {
            let dy2 = bid.second_moment[i] + ask.second_moment[i]
                - 2.0 * ask.mean_total[i] * bid.mean_total[i];
            spread_income(ask.fills.agent(i)) + spread_income(bid.fills.agent(i)) - params.xi * dy2
        })
        .collect())
}

/// Expected rewards for every joint action profile. Profiles are indexed in
/// mixed radix with agent 0 most significant; actions are 0-based joint
/// action indices.
#[derive(Debug, Clone, PartialEq)]
pub struct RewardMatrix {
    n_agents: usize,
    n_actions: usize,
    rewards: Vec<f64>,
}

impl RewardMatrix {
    pub fn from_fn(n_agents: usize, n_actions: usize, mut f: impl FnMut(&[usize]) -> Vec<f64>) -> Self {
        let n_profiles = n_actions.pow(n_agents as u32);
        let mut rewards = Vec::with_capacity(n_profiles * n_agents);
        let mut m = Self {
            n_agents,
            n_actions,
            rewards: Vec::new(),
        };
        for idx in 0..n_profiles {
            let r = f(&m.profile(idx));
            assert_eq!(r.len(), n_agents);
            rewards.extend(r);
        }
        m.rewards = rewards;
        m
    }

    pub fn n_agents(&self) -> usize {
        self.n_agents
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn n_profiles(&self) -> usize {
        self.rewards.len() / self.n_agents.max(1)
    }

    pub fn profile_index(&self, profile: &[usize]) -> usize {
        profile.iter().fold(0, |acc, &a| acc * self.n_actions + a)
    }

    pub fn profile(&self, mut index: usize) -> Vec<usize> {
        let mut p = vec![0; self.n_agents];
        for slot in p.iter_mut().rev() {
            *slot = index % self.n_actions;
            index /= self.n_actions;
        }
        p
    }

    pub fn reward(&self, profile: &[usize], agent: usize) -> f64 {
        self.rewards[self.profile_index(profile) * self.n_agents + agent]
    }

    pub fn rewards_at(&self, profile: &[usize]) -> &[f64] {
        let i = self.profile_index(profile) * self.n_agents;
        &self.rewards[i..i + self.n_agents]
    }

    pub fn joint_profit(&self, profile: &[usize]) -> f64 {
        self.rewards_at(profile).iter().sum()
    }

    /// Shifts every entry by `c`.
    pub fn shifted(&self, c: f64) -> Self {
        Self {
            rewards: self.rewards.iter().map(|r| r + c).collect(),
            ..self.clone()
        }
    }

    /// One text table for `agent` in a two-agent game: rows are the agent's
    /// own action id, columns the competitor's, one decimal place.
    pub fn format_table(&self, agent: usize) -> String {
        assert_eq!(self.n_agents, 2, "tables are defined for two agents");
        let other = 1 - agent;
        let mut out = String::new();
        write!(out, "{:>6}", "own\\op").unwrap();
        for c in 1..=self.n_actions {
            write!(out, " {c:>6}").unwrap();
        }
        out.push('\n');
        for own in 0..self.n_actions {
            write!(out, "{:>6}", own + 1).unwrap();
            for opp in 0..self.n_actions {
                let mut profile = [0usize; 2];
                profile[agent] = own;
                profile[other] = opp;
                write!(out, " {:>6.1}", self.reward(&profile, agent)).unwrap();
            }
            out.push('\n');
        }
        out
    }
}

/// Builds the full reward matrix. Agents are symmetric, so each multiset of
/// actions is evaluated once and permuted.
pub fn build_reward_matrix(params: &MarketParams, fees: &FeeSchedule) -> Result<RewardMatrix> {
    params.validate()?;
    let codec = JointActionCodec::new(params.grid.levels());
    let n_actions = codec.count();
    let profiles = (n_actions as u128).checked_pow(params.n_agents as u32).unwrap_or(u128::MAX);
    if profiles > MAX_PROFILES {
        return Err(Error::TooManyProfiles {
            profiles,
            limit: MAX_PROFILES,
        });
    }
    let mut cache: HashMap<Vec<usize>, Vec<f64>> = HashMap::new();
    let mut failure = None;
    let matrix = RewardMatrix::from_fn(params.n_agents, n_actions, |profile| {
        let mut sorted = profile.to_vec();
        sorted.sort_unstable();
        let by_position = cache.entry(sorted.clone()).or_insert_with(|| {
            let pairs: Vec<LevelPair> = sorted.iter().map(|&a| codec.pair(a)).collect();
            expected_reward(&pairs, params, fees).unwrap_or_else(|e| {
                failure.get_or_insert(e);
                vec![f64::NAN; pairs.len()]
            })
        });
        profile
            .iter()
            .map(|a| {
                let pos = sorted.binary_search(a).expect("action present in its own profile");
                by_position[pos]
            })
            .collect()
    });
    match failure {
        Some(e) => Err(e),
        None => Ok(matrix),
    }
}

/// Profiles from which no agent gains by a unilateral deviation (weak
/// inequality).
pub fn find_pure_nash(matrix: &RewardMatrix) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    for idx in 0..matrix.n_profiles() {
        let profile = matrix.profile(idx);
        let stable = (0..matrix.n_agents()).all(|i| {
            let own = matrix.reward(&profile, i);
            let mut deviation = profile.clone();
            (0..matrix.n_actions()).all(|c| {
                deviation[i] = c;
                !strictly_greater(matrix.reward(&deviation, i), own)
            })
        });
        if stable {
            out.push(profile);
        }
    }
    out
}

/// Profiles maximising the agents' joint expected profit, all ties included.
pub fn find_cooperative(matrix: &RewardMatrix) -> Vec<Vec<usize>> {
    let profits: Vec<f64> = (0..matrix.n_profiles())
        .map(|i| matrix.joint_profit(&matrix.profile(i)))
        .collect();
    let best = profits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    profits
        .iter()
        .enumerate()
        .filter(|(_, &v)| !strictly_greater(best, v))
        .map(|(i, _)| matrix.profile(i))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct EquilibriumReport {
    pub pure_nash: Vec<Vec<usize>>,
    pub cooperative: Vec<Vec<usize>>,
    /// Joint profit per profile index.
    pub joint_profit: Vec<f64>,
}

impl EquilibriumReport {
    pub fn analyze(matrix: &RewardMatrix) -> Self {
        Self {
            pure_nash: find_pure_nash(matrix),
            cooperative: find_cooperative(matrix),
            joint_profit: (0..matrix.n_profiles())
                .map(|i| matrix.joint_profit(&matrix.profile(i)))
                .collect(),
        }
    }
}

/// `(6,6)`-style rendering of a profile with 1-based action ids.
pub fn format_profile(profile: &[usize]) -> String {
    let ids: Vec<String> = profile.iter().map(|a| (a + 1).to_string()).collect();
    format!("({})", ids.join(","))
}
