mod common;

use mmfees::market::{level_weights, match_side, FeeSchedule, PriceGrid};
use proptest::prelude::*;

fn book(agents: usize, levels: usize) -> impl Strategy<Value = Vec<Vec<u32>>> {
    prop::collection::vec(prop::collection::vec(0u32..12, levels), agents)
}

fn as_real(quotes: &[Vec<u32>]) -> Vec<Vec<f64>> {
    quotes.iter().map(|q| q.iter().map(|&v| v as f64).collect()).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn agrees_with_tick_lot_oracle(quotes in book(2, 4), m in 0u32..=40) {
        let fills = match_side(&as_real(&quotes), m as u64);
        let oracle = common::tick_lot_match(&quotes, m);
        for (i, row) in oracle.iter().enumerate() {
            for (k, want) in row.iter().enumerate() {
                prop_assert!((fills.agent(i)[k] - want).abs() < 1e-12,
                    "agent {i} level {k}: {} vs {want}", fills.agent(i)[k]);
            }
        }
    }

    #[test]
    fn conserves_volume(quotes in book(3, 4), m in 0u32..=60) {
        let q = as_real(&quotes);
        let fills = match_side(&q, m as u64);
        let depth: f64 = q.iter().flatten().sum();
        prop_assert!((fills.total() - (m as f64).min(depth)).abs() < 1e-9);
        for (i, row) in q.iter().enumerate() {
            for (k, &v) in row.iter().enumerate() {
                prop_assert!(fills.agent(i)[k] <= v + 1e-12);
                prop_assert!(fills.agent(i)[k] >= 0.0);
            }
        }
    }

    #[test]
    fn respects_price_priority(quotes in book(2, 4), m in 0u32..=40) {
        let q = as_real(&quotes);
        let fills = match_side(&q, m as u64);
        for k in 1..4 {
            if fills.level_total(k) > 0.0 {
                for j in 0..k {
                    let depth: f64 = q.iter().map(|r| r[j]).sum();
                    prop_assert!((fills.level_total(j) - depth).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn splits_marginal_level_pro_rata(quotes in book(3, 4), m in 1u32..=60) {
        let q = as_real(&quotes);
        let fills = match_side(&q, m as u64);
        for k in 0..4 {
            let depth: f64 = q.iter().map(|r| r[k]).sum();
            if depth == 0.0 {
                continue;
            }
            let ratio = fills.level_total(k) / depth;
            for (i, row) in q.iter().enumerate() {
                prop_assert!((fills.agent(i)[k] - ratio * row[k]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn weights_grow_with_taker_fee(eta in -1.0f64..1.0, bump in 0.0f64..1.0) {
        let grid = PriceGrid::uniform(4).unwrap();
        let lo = level_weights(&grid, &FeeSchedule::new(0.0, eta), 1.0, 0.2);
        let hi = level_weights(&grid, &FeeSchedule::new(0.0, eta + bump), 1.0, 0.2);
        for (a, b) in lo.iter().zip(&hi) {
            prop_assert!(*a >= 0.0 && b >= a);
        }
        for w in lo.windows(2) {
            prop_assert!(w[1] >= w[0]);
        }
    }
}

#[test]
fn oracle_reproduces_worked_example() {
    let quotes = vec![vec![14, 2, 2, 2], vec![14, 2, 2, 2]];
    let fills = common::tick_lot_match(&quotes, 30);
    assert_eq!(fills[0], vec![14.0, 1.0, 0.0, 0.0]);
    assert_eq!(fills[1], vec![14.0, 1.0, 0.0, 0.0]);
}
