//! A single simulation instance: learning until the joint greedy policy is
//! stable, then a frozen greedy evaluation window.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::agent::{apply_skew, encode_state, epsilon, initial_state, select_action, Agent, JointActionCodec, LevelPair, QTable};
use crate::config::ExperimentConfig;
use crate::error::Result;
use crate::market::{
    arrival_probability, inventory_update, level_weights, make_quote_curve, match_side, period_reward,
    sample_order_size, AggregateBook, FeeSchedule, Fills, MarketParams, PriceGrid, QuoteCurve,
};

/// Independent RNG stream for `(seed, stream)`. Stream 0 drives order flow,
/// stream `i + 1` belongs to agent `i`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&stream.to_le_bytes());
    ChaCha8Rng::from_seed(key)
}

/// Order flow and matching for a fixed market configuration.
#[derive(Debug, Clone)]
pub struct MarketEnv {
    params: MarketParams,
    fees: FeeSchedule,
    weights: Vec<f64>,
    curves: Vec<QuoteCurve>,
    max_order: u64,
}

#[derive(Debug, Clone)]
pub struct PeriodOutcome {
    pub book: AggregateBook,
    pub ask: Fills,
    pub bid: Fills,
}

impl MarketEnv {
    pub fn new(params: &MarketParams, fees: &FeeSchedule) -> Result<Self> {
        params.validate()?;
        let curves = (1..=params.grid.levels())
            .map(|level| make_quote_curve(level, params))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            weights: level_weights(&params.grid, fees, params.c0, params.c1),
            max_order: params.max_order_size(),
            params: params.clone(),
            fees: *fees,
            curves,
        })
    }

    pub fn params(&self) -> &MarketParams {
        &self.params
    }

    pub fn fees(&self) -> &FeeSchedule {
        &self.fees
    }

    pub fn grid(&self) -> &PriceGrid {
        &self.params.grid
    }

    /// Quotes the executed actions, draws independent ask and bid order
    /// sizes and matches both sides.
    pub fn step<R: Rng + ?Sized>(&self, actions: &[LevelPair], rng: &mut R) -> PeriodOutcome {
        let asks: Vec<&[f64]> = actions.iter().map(|a| self.curves[a.ask - 1].volumes()).collect();
        let bids: Vec<&[f64]> = actions.iter().map(|a| self.curves[a.bid - 1].volumes()).collect();
        let book = AggregateBook::from_curves(&asks, &bids);
        let p_ask = arrival_probability(&book.ask, &self.weights, self.params.sigma);
        let p_bid = arrival_probability(&book.bid, &self.weights, self.params.sigma);
        let m_ask = sample_order_size(p_ask, self.max_order, rng);
        let m_bid = sample_order_size(p_bid, self.max_order, rng);
        PeriodOutcome {
            ask: match_side(&asks, m_ask),
            bid: match_side(&bids, m_bid),
            book,
        }
    }
}

/// Running totals over an evaluation window.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EvalStats {
    /// Filled shares per level, all agents and both sides.
    pub level_fills: Vec<f64>,
    pub periods: u64,
    pub n_agents: usize,
}

impl EvalStats {
    pub fn new(levels: usize, n_agents: usize) -> Self {
        Self {
            level_fills: vec![0.0; levels],
            periods: 0,
            n_agents,
        }
    }

    pub fn record(&mut self, ask: &Fills, bid: &Fills) {
        for (k, acc) in self.level_fills.iter_mut().enumerate() {
            *acc += ask.level_total(k) + bid.level_total(k);
        }
        self.periods += 1;
    }

    pub fn filled(&self) -> f64 {
        self.level_fills.iter().sum()
    }

    /// Executed-volume-weighted `delta + beta`; `None` when nothing traded.
    pub fn net_fee(&self, grid: &PriceGrid, beta: f64) -> Option<f64> {
        let total = self.filled();
        if total <= 0.0 {
            return None;
        }
        let weighted: f64 = self
            .level_fills
            .iter()
            .zip(grid.deltas())
            .map(|(g, d)| g * (d + beta))
            .sum();
        Some(weighted / total)
    }

    /// Filled shares per agent, per side and per period.
    pub fn orders_per_agent(&self) -> f64 {
        if self.periods == 0 || self.n_agents == 0 {
            return 0.0;
        }
        self.filled() / (self.periods as f64 * self.n_agents as f64 * 2.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InventorySummary {
    pub min: f64,
    pub max: f64,
    pub last: f64,
}

impl InventorySummary {
    fn new() -> Self {
        Self {
            min: 0.0,
            max: 0.0,
            last: 0.0,
        }
    }

    fn observe(&mut self, y: f64) {
        self.min = self.min.min(y);
        self.max = self.max.max(y);
        self.last = y;
    }
}

#[derive(Debug, Clone)]
pub struct InstanceResult {
    pub seed: u64,
    pub converged: bool,
    /// Learning periods, excluding the evaluation window.
    pub periods_run: u64,
    /// Per agent, the greedy action index for every state.
    pub final_greedy: Vec<Vec<usize>>,
    pub q_tables: Vec<QTable>,
    pub net_fee: Option<f64>,
    pub orders_per_agent: f64,
    pub inventory: Vec<InventorySummary>,
    /// Most frequent greedy joint profile (action indices) during evaluation.
    pub modal_profile: Vec<usize>,
    pub modal_share: f64,
}

/// Learner state plus market state of one running instance.
pub struct Instance {
    pub env: MarketEnv,
    pub agents: Vec<Agent<ChaCha8Rng>>,
    pub market_rng: ChaCha8Rng,
    pub state: usize,
    pub inventory: Vec<InventorySummary>,
    cfg: ExperimentConfig,
}

impl Instance {
    pub fn new(cfg: &ExperimentConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let levels = cfg.market.grid.levels();
        Ok(Self {
            env: MarketEnv::new(&cfg.market, &cfg.fees)?,
            agents: (0..cfg.market.n_agents)
                .map(|i| Agent::new(levels, stream_rng(seed, i as u64 + 1)))
                .collect(),
            market_rng: stream_rng(seed, 0),
            state: initial_state(levels),
            inventory: vec![InventorySummary::new(); cfg.market.n_agents],
            cfg: cfg.clone(),
        })
    }

    fn settle(&mut self, executed: &[LevelPair]) -> (PeriodOutcome, Vec<f64>) {
        let outcome = self.env.step(executed, &mut self.market_rng);
        let grid = self.env.grid();
        let rewards = self
            .agents
            .iter_mut()
            .zip(self.inventory.iter_mut())
            .enumerate()
            .map(|(i, (agent, inv))| {
                let (a, b) = (outcome.ask.agent(i), outcome.bid.agent(i));
                let (a_tot, b_tot) = (outcome.ask.agent_total(i), outcome.bid.agent_total(i));
                let dy = b_tot - a_tot;
                agent.inventory = inventory_update(agent.inventory, b_tot, a_tot);
                inv.observe(agent.inventory);
                period_reward(a, b, grid, self.cfg.fees.beta, self.cfg.market.xi, dy)
            })
            .collect();
        (outcome, rewards)
    }

    /// One learning period at time `t`. Returns whether any agent's greedy
    /// policy changed.
    pub fn learn_step(&mut self, t: u64) -> bool {
        let levels = self.env.grid().levels();
        let codec = JointActionCodec::new(levels);
        let eps = epsilon(t, self.cfg.agent.mu);
        let state = self.state;
        let chosen: Vec<usize> = self
            .agents
            .iter_mut()
            .map(|a| select_action(a.q.row(state), eps, &mut a.rng))
            .collect();
        let executed: Vec<LevelPair> = chosen
            .iter()
            .zip(&self.agents)
            .map(|(&c, a)| apply_skew(codec.pair(c), a.inventory, &self.cfg.agent, levels))
            .collect();
        let (outcome, rewards) = self.settle(&executed);
        let next = encode_state(&outcome.book, self.env.grid());
        let cfg = self.cfg.agent;
        let mut changed = false;
        for ((agent, &c), &r) in self.agents.iter_mut().zip(&chosen).zip(&rewards) {
            changed |= agent.learn(state, c, r, next, &cfg);
        }
        self.state = next;
        changed
    }

    /// Learns until every agent's greedy policy has been unchanged for
    /// `convergence_window` consecutive periods or `max_periods` elapse.
    /// Returns `(converged, periods_run)`.
    pub fn learn(&mut self) -> (bool, u64) {
        let mut stable = 0u64;
        let mut t = 0u64;
        while t < self.cfg.max_periods {
            let changed = self.learn_step(t);
            t += 1;
            if changed {
                stable = 0;
            } else {
                stable += 1;
                if stable >= self.cfg.convergence_window {
                    return (true, t);
                }
            }
        }
        (false, t)
    }

    /// Plays the frozen greedy policies for `periods` periods.
    pub fn evaluate(&mut self, periods: u64) -> (EvalStats, HashMap<Vec<usize>, u64>) {
        let levels = self.env.grid().levels();
        let codec = JointActionCodec::new(levels);
        let mut stats = EvalStats::new(levels, self.agents.len());
        let mut profiles: HashMap<Vec<usize>, u64> = HashMap::new();
        for _ in 0..periods {
            let state = self.state;
            let chosen: Vec<usize> = self.agents.iter().map(|a| a.greedy_policy()[state]).collect();
            let executed: Vec<LevelPair> = chosen
                .iter()
                .zip(&self.agents)
                .map(|(&c, a)| apply_skew(codec.pair(c), a.inventory, &self.cfg.agent, levels))
                .collect();
            let (outcome, _) = self.settle(&executed);
            stats.record(&outcome.ask, &outcome.bid);
            *profiles.entry(chosen).or_default() += 1;
            self.state = encode_state(&outcome.book, self.env.grid());
        }
        (stats, profiles)
    }
}

/// Frozen greedy evaluation: `(net_fee, orders_per_agent)`.
pub fn evaluate_greedy(instance: &mut Instance, eval_periods: u64) -> (Option<f64>, f64) {
    let (stats, _) = instance.evaluate(eval_periods);
    let beta = instance.env.fees().beta;
    (stats.net_fee(instance.env.grid(), beta), stats.orders_per_agent())
}

/// Most frequent profile; ties go to the lexicographically smallest.
pub(crate) fn modal<K: Ord + Clone>(counts: &HashMap<K, u64>) -> Option<(K, u64)> {
    counts
        .iter()
        .max_by(|(ka, ca), (kb, cb)| ca.cmp(cb).then_with(|| kb.cmp(ka)))
        .map(|(k, c)| (k.clone(), *c))
}

pub fn run_instance(cfg: &ExperimentConfig, seed: u64) -> Result<InstanceResult> {
    let mut inst = Instance::new(cfg, seed)?;
    let (converged, periods_run) = inst.learn();
    let (stats, profiles) = inst.evaluate(cfg.eval_periods);
    let (modal_profile, count) = modal(&profiles).unwrap_or_default();
    Ok(InstanceResult {
        seed,
        converged,
        periods_run,
        final_greedy: inst.agents.iter().map(|a| a.greedy_policy().to_vec()).collect(),
        q_tables: inst.agents.iter().map(|a| a.q.clone()).collect(),
        net_fee: stats.net_fee(inst.env.grid(), cfg.fees.beta),
        orders_per_agent: stats.orders_per_agent(),
        inventory: inst.inventory.clone(),
        modal_share: count as f64 / cfg.eval_periods as f64,
        modal_profile,
    })
}
