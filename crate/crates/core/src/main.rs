use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use mmfees::agent::JointActionCodec;
use mmfees::experiment::{csv_profile, write_csv, SweepRow, CSV_HEADER};
use mmfees::game::format_profile;
use mmfees::{build_reward_matrix, run_experiment, run_sweep, EquilibriumReport, ExperimentConfig, FeeSchedule, SweepTable};

const EXIT_CONFIG: u8 = 2;
const EXIT_NOT_CONVERGED: u8 = 3;

#[derive(Parser)]
#[command(name = "mmfees", version, about = "Market-making fee experiments with independent Q-learners")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the exact one-period reward matrix and its equilibria.
    Matrix {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Maker rebate; without --eta the taker fee is beta + 0.05 (0 for beta = 0).
        #[arg(long, allow_hyphen_values = true)]
        beta: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        eta: Option<f64>,
    },
    /// Run one experiment (all configured instances) and print its summary.
    Run {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Write the first instance's Q-tables here, one file per agent.
        #[arg(long)]
        dump_q: Option<PathBuf>,
    },
    /// Run every setting of one table and write the results as CSV.
    Sweep {
        #[arg(long)]
        table: String,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

fn load(path: &Option<PathBuf>) -> Result<ExperimentConfig, ExitCode> {
    match path {
        Some(p) => ExperimentConfig::load(p).map_err(|e| {
            eprintln!("error: {}: {e}", p.display());
            ExitCode::from(EXIT_CONFIG)
        }),
        None => Ok(ExperimentConfig::default()),
    }
}

fn matrix(cfg: ExperimentConfig, beta: Option<f64>, eta: Option<f64>) -> Result<(), ExitCode> {
    let fees = match (beta, eta) {
        (None, None) => cfg.fees,
        (Some(b), None) => FeeSchedule::from_rebate(b),
        (b, Some(e)) => FeeSchedule::new(b.unwrap_or(cfg.fees.beta), e),
    };
    let m = build_reward_matrix(&cfg.market, &fees).map_err(|e| {
        eprintln!("error: {e}");
        ExitCode::from(EXIT_CONFIG)
    })?;
    let codec = JointActionCodec::new(cfg.market.grid.levels());
    println!("beta = {}, eta = {}", fees.beta, fees.eta);
    if m.n_agents() == 2 {
        for agent in 0..2 {
            println!("\nagent {} reward (rows: own action, columns: competitor action)", agent + 1);
            print!("{}", m.format_table(agent));
        }
    } else {
        println!("\nprofile rewards");
        for idx in 0..m.n_profiles() {
            let p = m.profile(idx);
            let r: Vec<String> = m.rewards_at(&p).iter().map(|v| format!("{v:.1}")).collect();
            println!("{} {}", format_profile(&p), r.join(" "));
        }
    }
    let report = EquilibriumReport::analyze(&m);
    let show = |ps: &[Vec<usize>]| -> String {
        if ps.is_empty() {
            "none".to_string()
        } else {
            ps.iter().map(|p| format_profile(p)).collect::<Vec<_>>().join(" ")
        }
    };
    println!("\npure Nash equilibria: {}", show(&report.pure_nash));
    println!("cooperative profiles: {}", show(&report.cooperative));
    if let Some(best) = report.cooperative.first() {
        let pairs: Vec<String> = best
            .iter()
            .map(|&a| {
                let p = codec.pair(a);
                format!("(ask {}, bid {})", p.ask, p.bid)
            })
            .collect();
        println!("joint profit {:.3} at {}", m.joint_profit(best), pairs.join(" "));
    }
    Ok(())
}

fn run(mut cfg: ExperimentConfig, seed: Option<u64>, dump_q: Option<PathBuf>) -> Result<bool, ExitCode> {
    if let Some(s) = seed {
        cfg.base_seed = s;
    }
    let result = run_experiment(&cfg).map_err(|e| {
        eprintln!("error: {e}");
        ExitCode::from(EXIT_CONFIG)
    })?;
    println!("instance,seed,converged,periods,net_fee,orders,modal_profile,modal_share");
    for (k, r) in result.instances.iter().enumerate() {
        println!(
            "{k},{},{},{},{},{:.6},{},{:.3}",
            r.seed,
            r.converged,
            r.periods_run,
            r.net_fee.map_or("NA".into(), |f| format!("{f:.6}")),
            r.orders_per_agent,
            csv_profile(&r.modal_profile),
            r.modal_share
        );
    }
    println!();
    println!("{CSV_HEADER}");
    println!(
        "{}",
        SweepRow {
            table: SweepTable::MakerTaker,
            config: cfg.clone(),
            result: result.clone(),
        }
        .csv_line()
        .split_once(',')
        .map(|(_, rest)| format!("run,{rest}"))
        .unwrap_or_default()
    );
    if let (Some(dir), Some(first)) = (dump_q, result.instances.first()) {
        let write = || -> io::Result<()> {
            std::fs::create_dir_all(&dir)?;
            for (i, q) in first.q_tables.iter().enumerate() {
                std::fs::write(dir.join(format!("agent{}.q", i + 1)), q.dump())?;
            }
            Ok(())
        };
        write().map_err(|e| {
            eprintln!("error: writing Q-tables to {}: {e}", dir.display());
            ExitCode::FAILURE
        })?;
    }
    Ok(result.all_converged())
}

fn sweep(cfg: ExperimentConfig, table: &str, out: PathBuf) -> Result<bool, ExitCode> {
    let table: SweepTable = table.parse().map_err(|e| {
        eprintln!("error: {e}");
        ExitCode::from(EXIT_CONFIG)
    })?;
    let rows = run_sweep(table, &cfg).map_err(|e| {
        eprintln!("error: {e}");
        ExitCode::from(EXIT_CONFIG)
    })?;
    let written = File::create(&out).and_then(|f| {
        let mut w = BufWriter::new(f);
        write_csv(&mut w, &rows)?;
        w.flush()
    });
    if let Err(e) = written {
        eprintln!("error: writing {}: {e}", out.display());
        return Err(ExitCode::FAILURE);
    }
    for row in &rows {
        println!("{}", row.csv_line());
    }
    Ok(rows.iter().all(|r| r.result.all_converged()))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Matrix { config, beta, eta } => load(&config).and_then(|c| matrix(c, beta, eta)).map(|_| true),
        Command::Run { config, seed, dump_q } => load(&config).and_then(|c| run(c, seed, dump_q)),
        Command::Sweep { table, config, out } => load(&config).and_then(|c| sweep(c, &table, out)),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("warning: some instances did not converge within max_periods");
            ExitCode::from(EXIT_NOT_CONVERGED)
        }
        Err(code) => code,
    }
}
