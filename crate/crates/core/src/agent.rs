//! Tabular independent Q-learners.
//!
//! Joint (ask, bid) actions and book states share one row-major layout over
//! the `K x K` level pairs. Internally everything is a 0-based index; the
//! 1-based ids used in reports are `index + 1`.

use std::fmt::Write as _;

use rand::Rng;

use crate::error::{Error, Result};
use crate::market::{AggregateBook, PriceGrid};

/// An (ask level, bid level) pair, both 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LevelPair {
    pub ask: usize,
    pub bid: usize,
}

impl LevelPair {
    pub fn new(ask: usize, bid: usize) -> Self {
        Self { ask, bid }
    }
}

/// Row-major codec between level pairs and flat indices, shared by joint
/// actions and states.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PairCodec {
    levels: usize,
}

pub type JointActionCodec = PairCodec;
pub type StateCodec = PairCodec;

impl PairCodec {
    pub fn new(levels: usize) -> Self {
        Self { levels }
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    pub fn count(&self) -> usize {
        self.levels * self.levels
    }

    pub fn index(&self, pair: LevelPair) -> usize {
        (pair.ask - 1) * self.levels + (pair.bid - 1)
    }

    /// 1-based id: `(ask - 1) * K + bid`.
    pub fn id(&self, pair: LevelPair) -> usize {
        self.index(pair) + 1
    }

    pub fn pair(&self, index: usize) -> LevelPair {
        LevelPair {
            ask: index / self.levels + 1,
            bid: index % self.levels + 1,
        }
    }

    pub fn pair_from_id(&self, id: usize) -> Result<LevelPair> {
        if id == 0 || id > self.count() {
            return Err(Error::ActionOutOfRange {
                id,
                max: self.count(),
            });
        }
        Ok(self.pair(id - 1))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AgentConfig {
    pub alpha: f64,
    pub gamma: f64,
    /// Exploration decay rate.
    pub mu: f64,
    pub skew_upper: f64,
    pub skew_lower: f64,
}

impl AgentConfig {
    pub fn baseline() -> Self {
        Self {
            alpha: 0.05,
            gamma: 0.95,
            mu: 1e-5,
            skew_upper: 500.0,
            skew_lower: -500.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::invalid("alpha", format!("must lie in (0, 1], got {}", self.alpha)));
        }
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(Error::invalid("gamma", format!("must lie in [0, 1), got {}", self.gamma)));
        }
        if !self.mu.is_finite() || self.mu <= 0.0 {
            return Err(Error::invalid("mu", format!("must be positive, got {}", self.mu)));
        }
        if self.skew_lower.is_nan() || self.skew_upper.is_nan() || self.skew_lower > self.skew_upper {
            return Err(Error::invalid(
                "skew_lower",
                format!(
                    "must not exceed skew_upper ({} > {})",
                    self.skew_lower, self.skew_upper
                ),
            ));
        }
        Ok(())
    }
}

/// Dense state x action table of Q-values.
#[derive(Debug, Clone, PartialEq)]
pub struct QTable {
    n_states: usize,
    n_actions: usize,
    values: Vec<f64>,
}

impl QTable {
    pub fn zeros(n_states: usize, n_actions: usize) -> Self {
        Self {
            n_states,
            n_actions,
            values: vec![0.0; n_states * n_actions],
        }
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn row(&self, state: usize) -> &[f64] {
        &self.values[state * self.n_actions..(state + 1) * self.n_actions]
    }

    pub fn get(&self, state: usize, action: usize) -> f64 {
        self.values[state * self.n_actions + action]
    }

    pub fn set(&mut self, state: usize, action: usize, value: f64) {
        self.values[state * self.n_actions + action] = value;
    }

    pub fn row_max(&self, state: usize) -> f64 {
        self.row(state).iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Greedy action with ties resolved to the lowest index, so the policy is a
    /// pure function of the table.
    pub fn greedy(&self, state: usize) -> usize {
        let row = self.row(state);
        let mut best = 0;
        for (a, &v) in row.iter().enumerate().skip(1) {
            if v > row[best] {
                best = a;
            }
        }
        best
    }

    pub fn greedy_policy(&self) -> Vec<usize> {
        (0..self.n_states).map(|s| self.greedy(s)).collect()
    }

    /// One line per state, space-separated values in shortest round-trip form.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for s in 0..self.n_states {
            let mut first = true;
            for v in self.row(s) {
                if !first {
                    out.push(' ');
                }
                first = false;
                write!(out, "{v}").unwrap();
            }
            out.push('\n');
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut values = Vec::new();
        let mut n_actions = None;
        let mut n_states = 0;
        for (lineno, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let row = line
                .split_whitespace()
                .map(|tok| {
                    tok.parse::<f64>().map_err(|e| Error::Config {
                        line: lineno + 1,
                        message: format!("bad Q-value `{tok}`: {e}"),
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            match n_actions {
                None => n_actions = Some(row.len()),
                Some(n) if n != row.len() => {
                    return Err(Error::Config {
                        line: lineno + 1,
                        message: format!("expected {n} values, found {}", row.len()),
                    })
                }
                _ => {}
            }
            values.extend(row);
            n_states += 1;
        }
        Ok(Self {
            n_states,
            n_actions: n_actions.unwrap_or(0),
            values,
        })
    }
}

/// Exploration rate `exp(-mu * t)`.
pub fn epsilon(t: u64, mu: f64) -> f64 {
    (-mu * t as f64).exp()
}

/// Bucket of one side: the level whose spread is nearest to the
/// volume-weighted average spread, ties going to the wider level. Empty sides
/// map to the widest level.
pub fn side_bucket(volumes: &[f64], grid: &PriceGrid) -> usize {
    let depth: f64 = volumes.iter().sum();
    let levels = grid.levels();
    if depth <= 0.0 {
        return levels;
    }
    let mean = volumes
        .iter()
        .zip(grid.deltas())
        .map(|(v, d)| v * d)
        .sum::<f64>()
        / depth;
    let mut best = 1;
    let mut best_dist = f64::INFINITY;
    for (k, d) in grid.deltas().iter().enumerate() {
        let dist = (d - mean).abs();
        if dist <= best_dist {
            best = k + 1;
            best_dist = dist;
        }
    }
    best
}

/// State index observed from a book.
pub fn encode_state(book: &AggregateBook, grid: &PriceGrid) -> usize {
    let codec = StateCodec::new(grid.levels());
    codec.index(LevelPair::new(
        side_bucket(&book.ask, grid),
        side_bucket(&book.bid, grid),
    ))
}

/// State before any book has been observed.
pub fn initial_state(levels: usize) -> usize {
    StateCodec::new(levels).index(LevelPair::new(levels, levels))
}

/// Epsilon-greedy choice over one Q-row. Greedy ties are broken uniformly at
/// random.
pub fn select_action<R: Rng + ?Sized>(row: &[f64], eps: f64, rng: &mut R) -> usize {
    if eps > 0.0 && rng.random::<f64>() < eps {
        return rng.random_range(0..row.len());
    }
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let ties = row.iter().filter(|&&v| v == max).count();
    let pick = if ties > 1 { rng.random_range(0..ties) } else { 0 };
    row.iter()
        .enumerate()
        .filter(|(_, &v)| v == max)
        .nth(pick)
        .map(|(a, _)| a)
        .expect("row is non-empty")
}

/// `q(s, a) <- (1 - alpha) q(s, a) + alpha (r + gamma max_a' q(s', a'))`.
pub fn q_update(
    q: &mut QTable,
    state: usize,
    action: usize,
    reward: f64,
    next_state: usize,
    alpha: f64,
    gamma: f64,
) {
    let target = reward + gamma * q.row_max(next_state);
    let old = q.get(state, action);
    q.set(state, action, (1.0 - alpha) * old + alpha * target);
}

/// Inventory control: above `skew_upper` quote the tightest ask and widest
/// bid, below `skew_lower` the reverse.
pub fn apply_skew(action: LevelPair, inventory: f64, cfg: &AgentConfig, levels: usize) -> LevelPair {
    if inventory > cfg.skew_upper {
        LevelPair::new(1, levels)
    } else if inventory < cfg.skew_lower {
        LevelPair::new(levels, 1)
    } else {
        action
    }
}

/// Learner state owned by one simulation instance.
#[derive(Debug, Clone)]
pub struct Agent<R> {
    pub q: QTable,
    pub inventory: f64,
    pub rng: R,
    greedy: Vec<usize>,
}

impl<R: Rng> Agent<R> {
    pub fn new(levels: usize, rng: R) -> Self {
        let n = levels * levels;
        let q = QTable::zeros(n, n);
        let greedy = q.greedy_policy();
        Self {
            q,
            inventory: 0.0,
            rng,
            greedy,
        }
    }

    pub fn greedy_policy(&self) -> &[usize] {
        &self.greedy
    }

    /// Applies one Q-update and reports whether the greedy action of the
    /// updated state changed.
    pub fn learn(
        &mut self,
        state: usize,
        action: usize,
        reward: f64,
        next_state: usize,
        cfg: &AgentConfig,
    ) -> bool {
        q_update(&mut self.q, state, action, reward, next_state, cfg.alpha, cfg.gamma);
        let greedy = self.q.greedy(state);
        let changed = greedy != self.greedy[state];
        self.greedy[state] = greedy;
        changed
    }
}
