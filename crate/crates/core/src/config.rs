//! Experiment configuration and its flat `key = value` text form.

use std::fmt::Write as _;
use std::path::Path;

use crate::agent::AgentConfig;
use crate::error::{Error, Result};
use crate::market::{FeeSchedule, MarketParams, PriceGrid};

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub market: MarketParams,
    pub fees: FeeSchedule,
    pub agent: AgentConfig,
    pub n_instances: usize,
    /// Consecutive periods with an unchanged greedy policy that count as convergence.
    pub convergence_window: u64,
    pub max_periods: u64,
    pub eval_periods: u64,
    pub base_seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            market: MarketParams::baseline(),
            fees: FeeSchedule::none(),
            agent: AgentConfig::baseline(),
            n_instances: 20,
            convergence_window: 100_000,
            max_periods: 20_000_000,
            eval_periods: 1_000,
            base_seed: 0,
        }
    }
}

pub const KEYS: &[&str] = &[
    "n_agents",
    "K",
    "volume_per_agent",
    "sigma",
    "c0",
    "c1",
    "xi",
    "beta",
    "eta",
    "gamma",
    "alpha",
    "mu",
    "n_instances",
    "convergence_window",
    "max_periods",
    "eval_periods",
    "base_seed",
    "skew_upper",
    "skew_lower",
    "concentration",
];

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.market.validate()?;
        self.agent.validate()?;
        if self.n_instances == 0 {
            return Err(Error::invalid("n_instances", "must be at least 1"));
        }
        if self.convergence_window == 0 {
            return Err(Error::invalid("convergence_window", "must be at least 1"));
        }
        if self.eval_periods == 0 {
            return Err(Error::invalid("eval_periods", "must be at least 1"));
        }
        if !self.fees.beta.is_finite() || !self.fees.eta.is_finite() {
            return Err(Error::invalid("beta", "fees must be finite"));
        }
        Ok(())
    }

    /// Parses `key = value` lines on top of the defaults. `#` starts a comment.
    /// When `beta` is given without `eta`, the taker fee follows
    /// [`FeeSchedule::from_rebate`].
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        let mut levels = cfg.market.grid.levels();
        let mut eta = None;
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Config {
                line: line_no,
                message: format!("expected `key = value`, found `{line}`"),
            })?;
            let (key, value) = (key.trim(), value.trim());
            let err = |message: String| Error::Config {
                line: line_no,
                message,
            };
            let real = || -> Result<f64> {
                value
                    .parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| err(format!("`{key}` expects a real number, found `{value}`")))
            };
            let count = || -> Result<u64> {
                let v = real().map_err(|_| err(format!("`{key}` expects a count, found `{value}`")))?;
                if v < 0.0 || v.fract() != 0.0 || v > u64::MAX as f64 {
                    return Err(err(format!("`{key}` expects a non-negative integer, found `{value}`")));
                }
                Ok(v as u64)
            };
            match key {
                "n_agents" => cfg.market.n_agents = count()? as usize,
                "K" => levels = count()? as usize,
                "volume_per_agent" => cfg.market.volume_per_agent = real()?,
                "sigma" => cfg.market.sigma = real()?,
                "c0" => cfg.market.c0 = real()?,
                "c1" => cfg.market.c1 = real()?,
                "xi" => cfg.market.xi = real()?,
                "concentration" => cfg.market.concentration = real()?,
                "beta" => cfg.fees.beta = real()?,
                "eta" => eta = Some(real()?),
                "gamma" => cfg.agent.gamma = real()?,
                "alpha" => cfg.agent.alpha = real()?,
                "mu" => cfg.agent.mu = real()?,
                "skew_upper" => cfg.agent.skew_upper = real()?,
                "skew_lower" => cfg.agent.skew_lower = real()?,
                "n_instances" => cfg.n_instances = count()? as usize,
                "convergence_window" => cfg.convergence_window = count()?,
                "max_periods" => cfg.max_periods = count()?,
                "eval_periods" => cfg.eval_periods = count()?,
                "base_seed" => cfg.base_seed = count()?,
                _ => return Err(err(format!("unknown key `{key}`"))),
            }
        }
        cfg.market.grid = PriceGrid::uniform(levels).map_err(|e| Error::Config {
            line: 0,
            message: e.to_string(),
        })?;
        cfg.fees = match eta {
            Some(eta) => FeeSchedule::new(cfg.fees.beta, eta),
            None => FeeSchedule::from_rebate(cfg.fees.beta),
        };
        cfg.validate().map_err(|e| Error::Config {
            line: 0,
            message: e.to_string(),
        })?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let m = &self.market;
        let a = &self.agent;
        let pairs: [(&str, String); 20] = [
            ("n_agents", m.n_agents.to_string()),
            ("K", m.grid.levels().to_string()),
            ("volume_per_agent", m.volume_per_agent.to_string()),
            ("sigma", m.sigma.to_string()),
            ("c0", m.c0.to_string()),
            ("c1", m.c1.to_string()),
            ("xi", m.xi.to_string()),
            ("concentration", m.concentration.to_string()),
            ("beta", self.fees.beta.to_string()),
            ("eta", self.fees.eta.to_string()),
            ("gamma", a.gamma.to_string()),
            ("alpha", a.alpha.to_string()),
            ("mu", a.mu.to_string()),
            ("skew_upper", a.skew_upper.to_string()),
            ("skew_lower", a.skew_lower.to_string()),
            ("n_instances", self.n_instances.to_string()),
            ("convergence_window", self.convergence_window.to_string()),
            ("max_periods", self.max_periods.to_string()),
            ("eval_periods", self.eval_periods.to_string()),
            ("base_seed", self.base_seed.to_string()),
        ];
        for (k, v) in pairs {
            writeln!(s, "{k} = {v}").unwrap();
        }
        s
    }
}
