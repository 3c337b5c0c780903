//! Multi-instance experiments, aggregation and the table sweeps.

use std::collections::HashMap;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rayon::prelude::*;

use crate::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::market::FeeSchedule;
use crate::sim::{run_instance, InstanceResult};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub mean: f64,
    pub std: f64,
}

/// Mean and sample standard deviation (divisor `n - 1`, zero for a single
/// value). Values are sorted before summation so the result does not depend
/// on their order.
pub fn summarize(values: &[f64]) -> Option<Summary> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() == 1 {
        return Some(Summary { mean, std: 0.0 });
    }
    let mut sq: Vec<f64> = v.iter().map(|x| (x - mean) * (x - mean)).collect();
    sq.sort_by(f64::total_cmp);
    let var = sq.iter().sum::<f64>() / (n - 1.0);
    Some(Summary { mean, std: var.sqrt() })
}

#[derive(Debug, Clone)]
pub struct AggregateResult {
    pub n_instances: usize,
    pub n_converged: usize,
    /// Over converged instances, or all instances when none converged.
    pub net_fee: Option<Summary>,
    pub orders: Option<Summary>,
    /// Share of all instances whose evaluation-window modal profile is each
    /// profile, most frequent first.
    pub profile_shares: Vec<(Vec<usize>, f64)>,
    pub instances: Vec<InstanceResult>,
}

impl AggregateResult {
    pub fn from_instances(instances: Vec<InstanceResult>) -> Self {
        let n = instances.len();
        let converged: Vec<&InstanceResult> = instances.iter().filter(|r| r.converged).collect();
        let pool: Vec<&InstanceResult> = if converged.is_empty() {
            instances.iter().collect()
        } else {
            converged.clone()
        };
        let fees: Vec<f64> = pool.iter().filter_map(|r| r.net_fee).collect();
        let orders: Vec<f64> = pool.iter().map(|r| r.orders_per_agent).collect();

        let mut counts: HashMap<Vec<usize>, u64> = HashMap::new();
        for r in &instances {
            *counts.entry(r.modal_profile.clone()).or_default() += 1;
        }
        let mut profile_shares: Vec<(Vec<usize>, u64)> = counts.into_iter().collect();
        profile_shares.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        Self {
            n_instances: n,
            n_converged: converged.len(),
            net_fee: summarize(&fees),
            orders: summarize(&orders),
            profile_shares: profile_shares
                .into_iter()
                .map(|(p, c)| (p, c as f64 / n.max(1) as f64))
                .collect(),
            instances,
        }
    }

    pub fn convergence_rate(&self) -> f64 {
        if self.n_instances == 0 {
            0.0
        } else {
            self.n_converged as f64 / self.n_instances as f64
        }
    }

    pub fn all_converged(&self) -> bool {
        self.n_converged == self.n_instances
    }

    pub fn profile_share(&self, profile: &[usize]) -> f64 {
        self.profile_shares
            .iter()
            .find(|(p, _)| p == profile)
            .map_or(0.0, |(_, s)| *s)
    }

    pub fn modal(&self) -> Option<(&[usize], f64)> {
        self.profile_shares.first().map(|(p, s)| (p.as_slice(), *s))
    }
}

/// Runs `n_instances` instances with seeds `base_seed + k`, in parallel,
/// aggregated in instance order.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<AggregateResult> {
    cfg.validate()?;
    let instances = (0..cfg.n_instances as u64)
        .into_par_iter()
        .map(|k| run_instance(cfg, cfg.base_seed.wrapping_add(k)))
        .collect::<Result<Vec<_>>>()?;
    Ok(AggregateResult::from_instances(instances))
}

/// The five parameter sweeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepTable {
    MakerTaker = 1,
    TakerMaker = 2,
    Volatility = 3,
    Inventory = 4,
    Agents = 5,
}

impl SweepTable {
    pub const ALL: [SweepTable; 5] = [
        SweepTable::MakerTaker,
        SweepTable::TakerMaker,
        SweepTable::Volatility,
        SweepTable::Inventory,
        SweepTable::Agents,
    ];

    pub fn id(self) -> u8 {
        self as u8
    }

    /// Experiment settings for every row of the table, derived from `base`.
    pub fn settings(self, base: &ExperimentConfig) -> Vec<ExperimentConfig> {
        let with = |f: &dyn Fn(&mut ExperimentConfig)| {
            let mut c = base.clone();
            c.agent.gamma = 0.95;
            f(&mut c);
            c
        };
        match self {
            SweepTable::MakerTaker => [
                (0.0, 0.0),
                (0.0, 0.1),
                (0.5, 0.0),
                (0.5, 0.1),
                (0.95, 0.0),
                (0.95, 0.1),
                (0.95, 0.2),
                (0.95, 0.3),
                (0.99, 0.0),
                (0.99, 0.1),
                (0.99, 0.2),
                (0.99, 0.5),
            ]
            .iter()
            .map(|&(gamma, beta)| {
                with(&|c| {
                    c.agent.gamma = gamma;
                    c.fees = FeeSchedule::from_rebate(beta);
                })
            })
            .collect(),
            SweepTable::TakerMaker => [-0.15, -0.45, -0.75]
                .iter()
                .map(|&beta| with(&|c| c.fees = FeeSchedule::from_rebate(beta)))
                .collect(),
            SweepTable::Volatility => [0.2, 0.6, 1.0]
                .iter()
                .map(|&sigma| {
                    with(&|c| {
                        c.market.sigma = sigma;
                        c.fees = FeeSchedule::from_rebate(0.2);
                    })
                })
                .collect(),
            SweepTable::Inventory => [0.0, 0.1, 0.2, 0.3]
                .iter()
                .map(|&xi| {
                    with(&|c| {
                        c.market.xi = xi;
                        c.fees = FeeSchedule::from_rebate(0.2);
                    })
                })
                .collect(),
            SweepTable::Agents => [4usize, 6, 8]
                .iter()
                .map(|&n| {
                    with(&|c| {
                        c.market.n_agents = n;
                        c.fees = FeeSchedule::none();
                    })
                })
                .collect(),
        }
    }
}

impl FromStr for SweepTable {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "1" | "maker-taker" => Ok(SweepTable::MakerTaker),
            "2" | "taker-maker" => Ok(SweepTable::TakerMaker),
            "3" | "volatility" => Ok(SweepTable::Volatility),
            "4" | "inventory" => Ok(SweepTable::Inventory),
            "5" | "agents" => Ok(SweepTable::Agents),
            other => Err(Error::UnknownTable(other.to_string())),
        }
    }
}

impl fmt::Display for SweepTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.id())
    }
}

/// One CSV row: the swept settings and their aggregate result.
#[derive(Debug, Clone)]
pub struct SweepRow {
    pub table: SweepTable,
    pub config: ExperimentConfig,
    pub result: AggregateResult,
}

pub const CSV_HEADER: &str = "table_id,gamma,beta,eta,sigma,xi,n_agents,net_fee_mean,net_fee_std,orders_mean,orders_std,convergence_rate,modal_profile,modal_fraction";

/// Marker written for statistics that are undefined (no executed volume).
pub const ABSENT: &str = "NA";

/// `6-6` style profile id list for CSV cells.
pub fn csv_profile(profile: &[usize]) -> String {
    profile
        .iter()
        .map(|a| (a + 1).to_string())
        .collect::<Vec<_>>()
        .join("-")
}

impl SweepRow {
    pub fn csv_line(&self) -> String {
        let c = &self.config;
        let r = &self.result;
        let real = |x: f64| format!("{x:.6}");
        let opt = |s: Option<Summary>, pick: fn(Summary) -> f64| s.map_or(ABSENT.to_string(), |s| real(pick(s)));
        let (modal_profile, modal_fraction) = r
            .modal()
            .map_or((ABSENT.to_string(), ABSENT.to_string()), |(p, s)| (csv_profile(p), real(s)));
        [
            self.table.to_string(),
            real(c.agent.gamma),
            real(c.fees.beta),
            real(c.fees.eta),
            real(c.market.sigma),
            real(c.market.xi),
            c.market.n_agents.to_string(),
            opt(r.net_fee, |s| s.mean),
            opt(r.net_fee, |s| s.std),
            opt(r.orders, |s| s.mean),
            opt(r.orders, |s| s.std),
            real(r.convergence_rate()),
            modal_profile,
            modal_fraction,
        ]
        .join(",")
    }
}

pub fn run_sweep(table: SweepTable, base: &ExperimentConfig) -> Result<Vec<SweepRow>> {
    table
        .settings(base)
        .into_iter()
        .map(|config| {
            let result = run_experiment(&config)?;
            Ok(SweepRow {
                table,
                config,
                result,
            })
        })
        .collect()
}

pub fn write_csv<W: Write>(out: &mut W, rows: &[SweepRow]) -> std::io::Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for row in rows {
        writeln!(out, "{}", row.csv_line())?;
    }
    Ok(())
}
