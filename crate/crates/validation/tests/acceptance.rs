//! Acceptance criteria. Each test prints one `criterion N: PASS|FAIL` line
//! and then asserts it. Stochastic criteria use 20 instances per cell with
//! the default seeds.

use mmfees::agent::{epsilon, q_update, QTable};
use mmfees::experiment::{run_sweep, write_csv};
use mmfees::game::{build_reward_matrix, expected_reward};
use mmfees::market::{match_side, FeeSchedule, MarketParams};
use mmfees::sim::stream_rng;
use mmfees::{run_instance, AggregateResult, EquilibriumReport, ExperimentConfig, SweepTable};
use mmfees_validation::{experiment, report, sampled_reward, tick_lot_match, within};
use rand::Rng;

/// Cell (own, opponent) for agent 0, addressed by 1-based joint action ids.
fn cell(beta: f64, own: usize, opp: usize) -> f64 {
    let m = build_reward_matrix(&MarketParams::baseline(), &FeeSchedule::from_rebate(beta)).unwrap();
    m.reward(&[own - 1, opp - 1], 0)
}

fn table_cell(table: SweepTable, pick: impl Fn(&ExperimentConfig) -> bool) -> ExperimentConfig {
    table
        .settings(&ExperimentConfig::default())
        .into_iter()
        .find(|c| pick(c))
        .expect("setting exists in table")
}

fn maker_taker(gamma: f64, beta: f64) -> ExperimentConfig {
    table_cell(SweepTable::MakerTaker, |c| c.agent.gamma == gamma && c.fees.beta == beta)
}

fn net_fee(r: &AggregateResult) -> f64 {
    r.net_fee.map_or(f64::NAN, |s| s.mean)
}

fn orders(r: &AggregateResult) -> f64 {
    r.orders.map_or(f64::NAN, |s| s.mean)
}

fn describe(label: &str, r: &AggregateResult) -> String {
    let modal = r
        .modal()
        .map(|(p, s)| format!("{} {:.0}%", mmfees::game::format_profile(p), 100.0 * s))
        .unwrap_or_default();
    format!(
        "{label}: fee {:.3}±{:.3} orders {:.2}±{:.2} conv {}/{} modal {modal}",
        net_fee(r),
        r.net_fee.map_or(f64::NAN, |s| s.std),
        orders(r),
        r.orders.map_or(f64::NAN, |s| s.std),
        r.n_converged,
        r.n_instances
    )
}

#[test]
fn criterion_1_exact_matrix_anchors() {
    let checks = [
        ("R(6,6) β=0", cell(0.0, 6, 6), 34.2),
        ("R(1,1) β=0", cell(0.0, 1, 1), 26.5),
        ("R(1|6) β=0.1", cell(0.1, 1, 6), 32.0),
        ("R(1|6) β=0.2", cell(0.2, 1, 6), 34.4),
    ];
    let pass = checks.iter().all(|(_, got, want)| (got - want).abs() <= 0.05);
    let detail: Vec<String> = checks
        .iter()
        .map(|(name, got, want)| format!("{name} = {got:.3} (target {want} ± 0.05)"))
        .collect();
    assert!(report(1, pass, &detail.join("; ")));
}

#[test]
fn criterion_2_equilibrium_classification() {
    let classify = |beta: f64| {
        let m = build_reward_matrix(&MarketParams::baseline(), &FeeSchedule::from_rebate(beta)).unwrap();
        EquilibriumReport::analyze(&m)
    };
    let (base, rebate) = (classify(0.0), classify(0.1));
    let six = vec![5, 5];
    let one = vec![0, 0];
    let checks = [
        ("β=0 (6,6) Nash", base.pure_nash.contains(&six)),
        ("β=0 (6,6) cooperative", base.cooperative.contains(&six)),
        ("β=0 (1,1) not Nash", !base.pure_nash.contains(&one)),
        ("β=0.1 (6,6) cooperative", rebate.cooperative.contains(&six)),
        ("β=0.1 (6,6) not Nash", !rebate.pure_nash.contains(&six)),
    ];
    let show = |ps: &[Vec<usize>]| ps.iter().map(|p| mmfees::game::format_profile(p)).collect::<Vec<_>>().join(" ");
    let detail = format!(
        "{}; Nash β=0: [{}], β=0.1: [{}]",
        checks.iter().map(|(n, ok)| format!("{n}: {ok}")).collect::<Vec<_>>().join(", "),
        show(&base.pure_nash),
        show(&rebate.pure_nash)
    );
    assert!(report(2, checks.iter().all(|c| c.1), &detail));
}

#[test]
fn criterion_3_maker_taker_table() {
    let base = experiment(&maker_taker(0.95, 0.0));
    let rebate = experiment(&maker_taker(0.95, 0.2));
    let patient = experiment(&maker_taker(0.99, 0.2));
    let (base, rebate, patient) = (base.get().unwrap(), rebate.get().unwrap(), patient.get().unwrap());
    let pass = within(net_fee(base), 1.75, 2.00)
        && within(orders(base), 7.5, 10.5)
        && within(net_fee(rebate), 1.10, 1.35)
        && within(net_fee(patient), 1.90, 2.15);
    let detail = format!(
        "{} [fee 1.75..2.00, orders 7.5..10.5]; {} [fee 1.10..1.35]; {} [fee 1.90..2.15]",
        describe("γ=0.95 β=0", base),
        describe("γ=0.95 β=0.2", rebate),
        describe("γ=0.99 β=0.2", patient)
    );
    assert!(report(3, pass, &detail));
}

#[test]
fn criterion_4_rebate_non_monotonicity() {
    let cells = [(0.95, 0.3), (0.95, 0.2), (0.99, 0.2), (0.99, 0.0)].map(|(g, b)| experiment(&maker_taker(g, b)));
    let fee: Vec<f64> = cells.iter().map(|c| net_fee(c.get().unwrap())).collect();
    let pass = fee[0] > fee[1] && fee[2] > fee[3];
    let detail = format!(
        "γ=0.95: fee(β=0.3) {:.4} > fee(β=0.2) {:.4}; γ=0.99: fee(β=0.2) {:.4} > fee(β=0) {:.4}",
        fee[0], fee[1], fee[2], fee[3]
    );
    assert!(report(4, pass, &detail));
}

#[test]
fn criterion_5_taker_maker_direction() {
    let rows: Vec<(f64, AggregateResult)> = SweepTable::TakerMaker
        .settings(&ExperimentConfig::default())
        .iter()
        .map(|c| (c.fees.beta, experiment(c).get().unwrap().clone()))
        .collect();
    let ord: Vec<f64> = rows.iter().map(|(_, r)| orders(r)).collect();
    let spreads: Vec<f64> = rows.iter().map(|(b, r)| net_fee(r) - b).collect();
    let pass = ord.windows(2).all(|w| w[1] > w[0])
        && within(ord[2], 14.5, 16.5)
        && spreads.iter().all(|&s| within(s, 1.9, 2.1));
    let detail = format!(
        "orders {:.2} → {:.2} → {:.2} (strictly increasing, last in 14.5..16.5); fee−β {:.3}, {:.3}, {:.3} (each 1.9..2.1)",
        ord[0], ord[1], ord[2], spreads[0], spreads[1], spreads[2]
    );
    assert!(report(5, pass, &detail));
}

#[test]
fn criterion_6_low_volatility_anchor() {
    let cfg = table_cell(SweepTable::Volatility, |c| c.market.sigma == 0.2);
    let slot = experiment(&cfg);
    let r = slot.get().unwrap();
    let std = r.net_fee.map_or(f64::NAN, |s| s.std);
    // 1.200 as reported to three decimals.
    let pass = (net_fee(r) - 1.2).abs() < 5e-4 && std < 0.01;
    let detail = format!("{} [fee 1.200, std < 0.01]", describe("σ=0.2 β=0.2", r));
    assert!(report(6, pass, &detail));
}

#[test]
fn criterion_7_many_agents() {
    let eight = experiment(&table_cell(SweepTable::Agents, |c| c.market.n_agents == 8));
    let four = experiment(&table_cell(SweepTable::Agents, |c| c.market.n_agents == 4));
    let (eight, four) = (eight.get().unwrap(), four.get().unwrap());
    let pass = within(net_fee(eight), 0.98, 1.10) && within(orders(eight), 12.5, 14.0) && within(net_fee(four), 1.75, 2.0);
    let detail = format!(
        "{} [fee 0.98..1.10, orders 12.5..14.0]; {} [fee 1.75..2.0]",
        describe("N=8", eight),
        describe("N=4", four)
    );
    assert!(report(7, pass, &detail));
}

#[test]
fn criterion_8_collusive_share() {
    let slot = experiment(&maker_taker(0.95, 0.1));
    let r = slot.get().unwrap();
    let share = r.profile_share(&[5, 5]);
    let pass = within(share, 0.55, 0.95);
    let detail = format!("share of (6,6) = {share:.2} [0.55..0.95]; {}", describe("γ=0.95 β=0.1", r));
    assert!(report(8, pass, &detail));
}

fn matching_agrees_with_oracle() -> Result<(), String> {
    let mut rng = stream_rng(2024, 0);
    for case in 0..1000 {
        let quotes: Vec<Vec<u32>> = (0..2).map(|_| (0..4).map(|_| rng.random_range(0..12)).collect()).collect();
        let m = rng.random_range(0..=40);
        let real: Vec<Vec<f64>> = quotes.iter().map(|q| q.iter().map(|&v| v as f64).collect()).collect();
        let fills = match_side(&real, m as u64);
        let oracle = tick_lot_match(&quotes, m);
        for (i, row) in oracle.iter().enumerate() {
            for (k, want) in row.iter().enumerate() {
                if (fills.agent(i)[k] - want).abs() > 1e-12 {
                    return Err(format!("book {case}: agent {i} level {k} {} vs {want}", fills.agent(i)[k]));
                }
            }
        }
    }
    Ok(())
}

fn exact_reward_agrees_with_sampling() -> Result<f64, String> {
    let params = MarketParams::baseline();
    let codec = mmfees::agent::JointActionCodec::new(4);
    let mut rng = stream_rng(77, 0);
    let mut worst = 0.0f64;
    for case in 0..10u64 {
        let profile = [rng.random_range(0..16), rng.random_range(0..16)];
        let fees = FeeSchedule::from_rebate([0.0, 0.1, 0.2, -0.45, -0.75][case as usize % 5]);
        let pairs = profile.map(|a| codec.pair(a));
        let exact = expected_reward(&pairs, &params, &fees).map_err(|e| e.to_string())?;
        let mc = sampled_reward(&profile, &params, &fees, 1_000_000, 1000 + case);
        for i in 0..2 {
            let z = (mc[i].mean - exact[i]).abs() / mc[i].std_error;
            worst = worst.max(z);
            if z > 3.0 {
                return Err(format!(
                    "profile {profile:?} agent {i}: exact {:.4} vs sampled {:.4} ± {:.4}",
                    exact[i], mc[i].mean, mc[i].std_error
                ));
            }
        }
    }
    Ok(worst)
}

fn sweep_is_deterministic() -> Result<(), String> {
    let mut cfg = ExperimentConfig::default();
    cfg.agent.mu = 2e-4;
    cfg.convergence_window = 2_000;
    cfg.max_periods = 60_000;
    cfg.eval_periods = 200;
    cfg.n_instances = 6;
    let csv = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        let rows = pool.install(|| run_sweep(SweepTable::TakerMaker, &cfg)).unwrap();
        let mut out = Vec::new();
        write_csv(&mut out, &rows).unwrap();
        out
    };
    if csv(1) == csv(4) && csv(1) == csv(1) {
        Ok(())
    } else {
        Err("CSV differs between runs".into())
    }
}

fn inventory_is_contained() -> Result<f64, String> {
    let mut cfg = ExperimentConfig::default();
    cfg.agent.skew_upper = 50.0;
    cfg.agent.skew_lower = -50.0;
    cfg.convergence_window = u64::MAX;
    cfg.max_periods = 200_000;
    let bound = 50.0 + 2.0 * cfg.market.volume_per_agent;
    let mut worst = 0.0f64;
    for seed in 0..4 {
        let r = run_instance(&cfg, seed).map_err(|e| e.to_string())?;
        for inv in &r.inventory {
            worst = worst.max(inv.max).max(-inv.min);
        }
    }
    let baseline_cfg = maker_taker(0.95, 0.0);
    let default_bound = baseline_cfg.agent.skew_upper + 2.0 * baseline_cfg.market.volume_per_agent;
    let baseline = experiment(&baseline_cfg);
    for inst in &baseline.get().unwrap().instances {
        for inv in &inst.inventory {
            if inv.max.max(-inv.min) >= default_bound {
                return Err(format!("seed {}: inventory {inv:?} beyond ±{default_bound}", inst.seed));
            }
        }
    }
    if worst < bound {
        Ok(worst)
    } else {
        Err(format!("|inventory| reached {worst} with thresholds ±50 (bound {bound})"))
    }
}

fn learning_identities() -> Result<(), String> {
    if epsilon(0, 1e-5) != 1.0 || (epsilon(100_000, 1e-5) - (-1.0f64).exp()).abs() > 1e-15 {
        return Err("epsilon decay".into());
    }
    let mut rng = stream_rng(5, 0);
    for _ in 0..1000 {
        let mut q = QTable::zeros(16, 16);
        for s in 0..16 {
            for a in 0..16 {
                q.set(s, a, rng.random_range(-50.0..50.0));
            }
        }
        let (s, a, next) = (rng.random_range(0..16), rng.random_range(0..16), rng.random_range(0..16));
        let r: f64 = rng.random_range(-100.0..100.0);
        let frozen = q.clone();
        q_update(&mut q, s, a, r, next, 0.0, 0.95);
        if q != frozen {
            return Err("alpha = 0 changed the table".into());
        }
        q_update(&mut q, s, a, r, next, 1.0, 0.0);
        if q.get(s, a) != r {
            return Err("alpha = 1, gamma = 0 did not store the reward".into());
        }
    }
    Ok(())
}

#[test]
fn criterion_9_property_suites() {
    let matching = matching_agrees_with_oracle();
    let reward = exact_reward_agrees_with_sampling();
    let determinism = sweep_is_deterministic();
    let inventory = inventory_is_contained();
    let identities = learning_identities();
    let pass = matching.is_ok() && reward.is_ok() && determinism.is_ok() && inventory.is_ok() && identities.is_ok();
    let fmt = |r: Result<String, String>| r.unwrap_or_else(|e| format!("FAILED ({e})"));
    let detail = format!(
        "tick-lot oracle: {}; Monte Carlo: {}; determinism: {}; inventory: {}; learning identities: {}",
        fmt(matching.map(|_| "1000/1000 books".into())),
        fmt(reward.map(|z| format!("worst |z| = {z:.2}"))),
        fmt(determinism.map(|_| "identical CSV".into())),
        fmt(inventory.map(|w| format!("max |y| = {w:.1} < 90"))),
        fmt(identities.map(|_| "ok".into())),
    );
    assert!(report(9, pass, &detail));
}
