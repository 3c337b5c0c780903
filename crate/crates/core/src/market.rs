//! One-period market mechanics: the spread grid, quote curves, the order
//! arrival model and price-priority matching with pro-rata splitting.
//!
//! Volumes, fills and inventories are real-valued throughout. Pro-rata
//! splitting at the marginal level produces fractional fills and nothing here
//! rounds them.

use rand::Rng;
use rand_distr::{Binomial, Distribution};

use crate::error::{Error, Result};

/// Spread levels on one side of the book, in ticks from the mid-price.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceGrid {
    deltas: Vec<f64>,
}

impl PriceGrid {
    pub fn new(deltas: Vec<f64>) -> Result<Self> {
        if deltas.is_empty() {
            return Err(Error::invalid("deltas", "at least one price level is required"));
        }
        if deltas.iter().any(|d| !d.is_finite()) {
            return Err(Error::invalid("deltas", "spreads must be finite"));
        }
        if deltas.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid("deltas", "spreads must be strictly increasing"));
        }
        Ok(Self { deltas })
    }

    /// `levels` levels with `delta_k = k` ticks.
    pub fn uniform(levels: usize) -> Result<Self> {
        Self::new((1..=levels).map(|k| k as f64).collect())
    }

    pub fn levels(&self) -> usize {
        self.deltas.len()
    }

    pub fn deltas(&self) -> &[f64] {
        &self.deltas
    }

    /// Spread of a 1-based level.
    pub fn delta(&self, level: usize) -> f64 {
        self.deltas[level - 1]
    }
}

/// Per-level limit-order volumes for one side of one agent.
#[derive(Debug, Clone, PartialEq)]
pub struct QuoteCurve {
    volumes: Vec<f64>,
}

impl QuoteCurve {
    pub fn new(volumes: Vec<f64>) -> Result<Self> {
        if volumes.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::invalid("volumes", "quote volumes must be finite and non-negative"));
        }
        Ok(Self { volumes })
    }

    pub fn volumes(&self) -> &[f64] {
        &self.volumes
    }

    pub fn total(&self) -> f64 {
        self.volumes.iter().sum()
    }
}

impl AsRef<[f64]> for QuoteCurve {
    fn as_ref(&self) -> &[f64] {
        &self.volumes
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    Ask,
    Bid,
}

/// Volume available at each level, summed over all agents.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregateBook {
    pub ask: Vec<f64>,
    pub bid: Vec<f64>,
}

impl AggregateBook {
    pub fn empty(levels: usize) -> Self {
        Self {
            ask: vec![0.0; levels],
            bid: vec![0.0; levels],
        }
    }

    /// Entrywise sums of the agents' ask and bid curves.
    pub fn from_curves<Q: AsRef<[f64]>>(asks: &[Q], bids: &[Q]) -> Self {
        Self {
            ask: sum_levels(asks),
            bid: sum_levels(bids),
        }
    }

    pub fn side(&self, side: Side) -> &[f64] {
        match side {
            Side::Ask => &self.ask,
            Side::Bid => &self.bid,
        }
    }
}

pub(crate) fn sum_levels<Q: AsRef<[f64]>>(curves: &[Q]) -> Vec<f64> {
    let levels = curves.first().map_or(0, |c| c.as_ref().len());
    let mut out = vec![0.0; levels];
    for curve in curves {
        for (acc, v) in out.iter_mut().zip(curve.as_ref()) {
            *acc += v;
        }
    }
    out
}

/// Maker rebate `beta` and taker access fee `eta`, both per share in ticks.
/// Negative values describe a taker-maker venue.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeeSchedule {
    pub beta: f64,
    pub eta: f64,
}

impl FeeSchedule {
    /// Exchange margin between the taker fee and the maker rebate.
    pub const EXCHANGE_MARGIN: f64 = 0.05;

    pub fn new(beta: f64, eta: f64) -> Self {
        Self { beta, eta }
    }

    pub fn none() -> Self {
        Self::new(0.0, 0.0)
    }

    /// Rebate `beta` with the taker fee set `EXCHANGE_MARGIN` above it. A zero
    /// rebate means no fee model at all, so the taker fee is zero too.
    pub fn from_rebate(beta: f64) -> Self {
        if beta == 0.0 {
            Self::none()
        } else {
            Self::new(beta, beta + Self::EXCHANGE_MARGIN)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MarketParams {
    pub grid: PriceGrid,
    /// Mid-price volatility; scales how quickly arrival probability falls with spread.
    pub sigma: f64,
    pub c0: f64,
    pub c1: f64,
    /// Limit-order volume each agent quotes per side.
    pub volume_per_agent: f64,
    pub n_agents: usize,
    /// Inventory aversion.
    pub xi: f64,
    /// Share of an agent's side volume placed on its chosen level.
    pub concentration: f64,
}

impl MarketParams {
    pub fn baseline() -> Self {
        Self {
            grid: PriceGrid::uniform(4).expect("static grid"),
            sigma: 0.4,
            c0: 1.0,
            c1: 0.2,
            volume_per_agent: 20.0,
            n_agents: 2,
            xi: 0.05,
            concentration: 0.7,
        }
    }

    /// Largest market order per side and period: the whole book's volume on
    /// that side.
    pub fn max_order_size(&self) -> u64 {
        (self.volume_per_agent * self.n_agents as f64).round() as u64
    }

    pub fn validate(&self) -> Result<()> {
        if !self.sigma.is_finite() || self.sigma <= 0.0 {
            return Err(Error::invalid("sigma", format!("must be positive, got {}", self.sigma)));
        }
        if self.c1.is_nan() || self.c1 < 0.0 {
            return Err(Error::invalid("c1", format!("must be non-negative, got {}", self.c1)));
        }
        if !self.c0.is_finite() {
            return Err(Error::invalid("c0", "must be finite"));
        }
        if !self.volume_per_agent.is_finite() || self.volume_per_agent < 0.0 {
            return Err(Error::invalid(
                "volume_per_agent",
                format!("must be non-negative, got {}", self.volume_per_agent),
            ));
        }
        if self.n_agents == 0 {
            return Err(Error::invalid("n_agents", "at least one agent is required"));
        }
        if self.xi.is_nan() || self.xi < 0.0 {
            return Err(Error::invalid("xi", format!("must be non-negative, got {}", self.xi)));
        }
        if !(0.0..=1.0).contains(&self.concentration) {
            return Err(Error::invalid(
                "concentration",
                format!("must lie in [0, 1], got {}", self.concentration),
            ));
        }
        Ok(())
    }
}

/// Per-agent, per-level fills on one side of the book.
#[derive(Debug, Clone, PartialEq)]
pub struct Fills {
    levels: usize,
    volumes: Vec<f64>,
}

impl Fills {
    pub fn zeros(n_agents: usize, levels: usize) -> Self {
        Self {
            levels,
            volumes: vec![0.0; n_agents * levels],
        }
    }

    pub fn n_agents(&self) -> usize {
        self.volumes.len().checked_div(self.levels).unwrap_or(0)
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    pub fn agent(&self, i: usize) -> &[f64] {
        &self.volumes[i * self.levels..(i + 1) * self.levels]
    }

    pub(crate) fn agent_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.volumes[i * self.levels..(i + 1) * self.levels]
    }

    pub fn agent_total(&self, i: usize) -> f64 {
        self.agent(i).iter().sum()
    }

    pub fn total(&self) -> f64 {
        self.volumes.iter().sum()
    }

    pub fn level_total(&self, level_idx: usize) -> f64 {
        (0..self.n_agents())
            .map(|i| self.volumes[i * self.levels + level_idx])
            .sum()
    }
}

/// Arrival-probability weights `w_k = c1 * max(delta_k + eta - c0, 0)^2`.
pub fn level_weights(grid: &PriceGrid, fees: &FeeSchedule, c0: f64, c1: f64) -> Vec<f64> {
    grid.deltas()
        .iter()
        .map(|d| {
            let x = (d + fees.eta - c0).max(0.0);
            c1 * x * x
        })
        .collect()
}

/// Quote curve for one side: `concentration * V` on `level` and the rest
/// spread evenly across the other levels.
pub fn make_quote_curve(level: usize, params: &MarketParams) -> Result<QuoteCurve> {
    let levels = params.grid.levels();
    if level == 0 || level > levels {
        return Err(Error::LevelOutOfRange { level, levels });
    }
    let total = params.volume_per_agent;
    if levels == 1 {
        return QuoteCurve::new(vec![total]);
    }
    let main = params.concentration * total;
    let other = (1.0 - params.concentration) * total / (levels - 1) as f64;
    let volumes = (1..=levels)
        .map(|k| if k == level { main } else { other })
        .collect();
    QuoteCurve::new(volumes)
}

/// Probability that a single market order arrives on a side with the given
/// per-level depth: `exp(-(1/sigma) * sum_k w_k * A_k / |A|)`. An empty side
/// attracts no orders.
pub fn arrival_probability(side: &[f64], weights: &[f64], sigma: f64) -> f64 {
    let depth: f64 = side.iter().sum();
    if depth <= 0.0 {
        return 0.0;
    }
    let weighted: f64 = side.iter().zip(weights).map(|(a, w)| w * a).sum();
    (-(weighted / depth) / sigma).exp()
}

/// Number of market orders arriving on one side, `Binomial(max_size, p)`.
pub fn sample_order_size<R: Rng + ?Sized>(p: f64, max_size: u64, rng: &mut R) -> u64 {
    let p = p.clamp(0.0, 1.0);
    if p == 0.0 || max_size == 0 {
        return 0;
    }
    if p == 1.0 {
        return max_size;
    }
    Binomial::new(max_size, p)
        .expect("probability clamped to [0, 1]")
        .sample(rng)
}

/// Matches a market order of size `m` against one side of the book.
///
/// Levels fill in order of increasing spread. The first level whose
/// cumulative depth exceeds `m` receives the remainder, split across agents in
/// proportion to their volume there; anything above it is untouched. Market
/// volume beyond the whole book is cancelled.
pub fn match_side<Q: AsRef<[f64]>>(quotes: &[Q], m: u64) -> Fills {
    let levels = quotes.first().map_or(0, |q| q.as_ref().len());
    let mut fills = Fills::zeros(quotes.len(), levels);
    let depth = sum_levels(quotes);
    let mut remaining = m as f64;
    for (k, &level_depth) in depth.iter().enumerate() {
        if remaining <= 0.0 {
            break;
        }
        if level_depth <= 0.0 {
            continue;
        }
        let ratio = if remaining >= level_depth {
            remaining -= level_depth;
            1.0
        } else {
            let r = remaining / level_depth;
            remaining = 0.0;
            r
        };
        for (i, q) in quotes.iter().enumerate() {
            fills.volumes[i * levels + k] = q.as_ref()[k] * ratio;
        }
    }
    fills
}

/// One agent's reward for one period: spread plus rebate on every filled
/// share, minus the quadratic inventory penalty on this period's change `dy`.
pub fn period_reward(
    ask_fills: &[f64],
    bid_fills: &[f64],
    grid: &PriceGrid,
    beta: f64,
    xi: f64,
    dy: f64,
) -> f64 {
    let side = |fills: &[f64]| -> f64 {
        fills
            .iter()
            .zip(grid.deltas())
            .map(|(g, d)| g * (d + beta))
            .sum()
    };
    side(ask_fills) + side(bid_fills) - xi * dy * dy
}

pub fn inventory_update(previous: f64, bid_total: f64, ask_total: f64) -> f64 {
    previous + bid_total - ask_total
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn assert_close(a: &[f64], b: &[f64], tol: f64) {
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(b) {
            assert!((x - y).abs() < tol, "{a:?} vs {b:?}");
        }
    }

    #[test]
    fn baseline_weights() {
        let grid = PriceGrid::uniform(4).unwrap();
        let w = level_weights(&grid, &FeeSchedule::none(), 1.0, 0.2);
        assert_close(&w, &[0.0, 0.2, 0.8, 1.8], 1e-12);
    }

    #[test]
    fn weights_vanish_without_coefficient() {
        let grid = PriceGrid::new(vec![0.5, 1.5, 7.0]).unwrap();
        let w = level_weights(&grid, &FeeSchedule::new(0.3, 0.4), 1.0, 0.0);
        assert_eq!(w, vec![0.0; 3]);
    }

    #[test]
    fn taker_maker_weights() {
        let grid = PriceGrid::uniform(4).unwrap();
        let w = level_weights(&grid, &FeeSchedule::new(-0.75, -0.7), 1.0, 0.2);
        assert_close(&w, &[0.0, 0.018, 0.338, 1.058], 1e-12);
    }

    #[test]
    fn grid_rejects_unsorted() {
        assert!(PriceGrid::new(vec![1.0, 1.0]).is_err());
        assert!(PriceGrid::new(vec![]).is_err());
    }

    #[test]
    fn quote_curves() {
        let params = MarketParams::baseline();
        assert_close(make_quote_curve(2, &params).unwrap().volumes(), &[2.0, 14.0, 2.0, 2.0], 1e-12);
        assert_close(make_quote_curve(1, &params).unwrap().volumes(), &[14.0, 2.0, 2.0, 2.0], 1e-12);
        let empty = MarketParams {
            volume_per_agent: 0.0,
            ..MarketParams::baseline()
        };
        assert_eq!(make_quote_curve(3, &empty).unwrap().volumes(), &[0.0; 4]);
        assert!(matches!(
            make_quote_curve(5, &params),
            Err(Error::LevelOutOfRange { level: 5, levels: 4 })
        ));
        assert!(make_quote_curve(0, &params).is_err());
    }

    #[test]
    fn arrival_probability_cases() {
        let w = [0.0, 0.2, 0.8, 1.8];
        assert_eq!(arrival_probability(&[40.0, 0.0, 0.0, 0.0], &w, 0.4), 1.0);
        let p = arrival_probability(&[4.0, 28.0, 4.0, 4.0], &w, 0.4);
        assert!((p - (-1.0f64).exp()).abs() < 1e-12);
        assert_eq!(arrival_probability(&[0.0; 4], &w, 0.4), 0.0);
    }

    #[test]
    fn degenerate_binomials() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            assert_eq!(sample_order_size(1.0, 40, &mut rng), 40);
            assert_eq!(sample_order_size(0.0, 40, &mut rng), 0);
        }
    }

    #[test]
    fn binomial_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 100_000;
        let sum: u64 = (0..n).map(|_| sample_order_size(0.5, 40, &mut rng)).sum();
        let mean = sum as f64 / n as f64;
        assert!((mean - 20.0).abs() < 0.1, "mean {mean}");
    }

    #[test]
    fn full_fill_when_order_exceeds_book() {
        let q = [vec![14.0, 2.0, 2.0, 2.0], vec![2.0, 14.0, 2.0, 2.0]];
        let fills = match_side(&q, 55);
        assert_eq!(fills.agent(0), q[0].as_slice());
        assert_eq!(fills.agent(1), q[1].as_slice());
    }

    #[test]
    fn marginal_level_split() {
        let q = [vec![14.0, 2.0, 2.0, 2.0], vec![14.0, 2.0, 2.0, 2.0]];
        let fills = match_side(&q, 20);
        assert_close(fills.agent(0), &[10.0, 0.0, 0.0, 0.0], 1e-12);
        assert_close(fills.agent(1), &[10.0, 0.0, 0.0, 0.0], 1e-12);

        let fills = match_side(&q, 30);
        assert_close(fills.agent(0), &[14.0, 1.0, 0.0, 0.0], 1e-12);
        assert_close(fills.agent(1), &[14.0, 1.0, 0.0, 0.0], 1e-12);
    }

    #[test]
    fn zero_order_fills_nothing() {
        let q = [vec![3.0, 1.0]];
        assert_eq!(match_side(&q, 0).total(), 0.0);
    }

    #[test]
    fn rewards() {
        let grid = PriceGrid::uniform(4).unwrap();
        let lvl2 = [0.0, 10.0, 0.0, 0.0];
        assert!((period_reward(&lvl2, &lvl2, &grid, 0.0, 0.05, 0.0) - 40.0).abs() < 1e-12);
        assert!((period_reward(&lvl2, &lvl2, &grid, 0.1, 0.05, 0.0) - 42.0).abs() < 1e-12);
        let r = period_reward(&[14.0, 0.0, 0.0, 0.0], &[0.0; 4], &grid, 0.0, 0.05, -14.0);
        assert!((r - 4.2).abs() < 1e-12);
    }

    #[test]
    fn inventory() {
        assert_eq!(inventory_update(0.0, 10.0, 10.0), 0.0);
        assert_eq!(inventory_update(0.0, 14.0, 0.0), 14.0);
        assert_eq!(inventory_update(5.0, 3.5, 1.25), 7.25);
    }

    #[test]
    fn max_order_scales_with_agents() {
        let params = MarketParams {
            n_agents: 8,
            ..MarketParams::baseline()
        };
        assert_eq!(params.max_order_size(), 160);
        assert_eq!(MarketParams::baseline().max_order_size(), 40);
    }

    #[test]
    fn fee_schedule_margin() {
        let f = FeeSchedule::from_rebate(0.2);
        assert!((f.eta - 0.25).abs() < 1e-12);
        assert_eq!(FeeSchedule::from_rebate(0.0), FeeSchedule::none());
        assert!((FeeSchedule::from_rebate(-0.75).eta + 0.7).abs() < 1e-12);
    }
}
