//! Acceptance suite: one line per criterion, nonzero exit if any fails.
//!
//! Run with `cargo test --test acceptance`.

use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use carriergame::analysis::{
    leader_preference_conditions, leader_prefers_leading, no_coordination_bound,
    no_coordination_bound_product, no_coordination_probability_iid, spectral_efficiency_bound,
    welfare_report,
};
use carriergame::channel::{sample_channels, sinr, GameConfig, Player};
use carriergame::efficiency::{solve_gamma_star, EfficiencyModel, GammaStar};
use carriergame::equilibrium::{
    nash_solve, oracle_stackelberg, oracle_stackelberg_on, stackelberg_solve,
    OracleGrid, DEFAULT_EPSILON,
};
use carriergame::simulator::{
    run_sweep, run_sweep_with, Execution, SolverSet, SweepSpec, SweepVariable, Z95,
};
use rayon::prelude::*;

const SEED: u64 = 20_240_601;
const TRIALS: u64 = 10_000;

type Criterion = (&'static str, fn() -> Outcome);

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn m100() -> (EfficiencyModel, GammaStar) {
    let model = EfficiencyModel::exp_block(100).unwrap();
    let gs = solve_gamma_star(&model).unwrap();
    (model, gs)
}

fn config(carriers: usize, theta: f64) -> GameConfig {
    GameConfig {
        theta,
        ..GameConfig::standard(carriers).unwrap()
    }
}

/// Plain bisection on `100x = e^x − 1` over a bracket excluding the root at 0.
fn gamma_star_oracle() -> f64 {
    let g = |x: f64| 100.0 * x - x.exp_m1();
    let (mut lo, mut hi) = (1.0_f64, 20.0_f64);
    assert!(g(lo) > 0.0 && g(hi) < 0.0);
    while hi - lo > 1e-13 {
        let mid = 0.5 * (lo + hi);
        if g(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn gamma_star_solver() -> Outcome {
    let model = EfficiencyModel::exp_block(100).unwrap();
    let mut fastest = Duration::MAX;
    let mut gs = solve_gamma_star(&model).unwrap();
    for _ in 0..5 {
        let start = Instant::now();
        gs = solve_gamma_star(&model).unwrap();
        fastest = fastest.min(start.elapsed());
    }
    let residual = (100.0 * gs.value - gs.value.exp_m1()).abs();
    let oracle = gamma_star_oracle();
    let pass = residual <= 1e-8 && (gs.value - oracle).abs() <= 1e-10 && fastest < Duration::from_millis(1);
    outcome(
        pass,
        format!(
            "γ*={:.15} residual={residual:.2e} |γ*-oracle|={:.2e} time={fastest:?}",
            gs.value,
            (gs.value - oracle).abs()
        ),
    )
}

fn bound_identity() -> Outcome {
    let (_, gs) = m100();
    let worst = (2..=64)
        .map(|k| {
            let (a, b) = (no_coordination_bound(k, &gs).bound, no_coordination_bound_product(k, &gs));
            (a - b).abs() / b
        })
        .fold(0.0, f64::max);
    outcome(worst <= 1e-10, format!("max relative difference {worst:.2e} over K=2..64"))
}

fn sweep(variable: SweepVariable, values: Vec<f64>, base: GameConfig, trials: u64, solvers: SolverSet) -> carriergame::simulator::SweepResult {
    let spec = SweepSpec::new(variable, values, trials, base, SEED, solvers).unwrap();
    run_sweep(&spec)
}

fn nash_frequency() -> Outcome {
    let (_, gs) = m100();
    let start = Instant::now();
    let result = sweep(
        SweepVariable::Carriers,
        vec![2.0, 4.0, 8.0, 16.0],
        config(2, 0.0),
        TRIALS,
        SolverSet::default(),
    );
    let elapsed = start.elapsed();
    let mut pass = elapsed < Duration::from_secs(30);
    let mut parts = Vec::new();
    for row in &result.rows {
        let k = row.value as usize;
        let bound = no_coordination_bound(k, &gs).bound;
        let exact = no_coordination_probability_iid(k, &gs);
        let se = (bound * (1.0 - bound) / TRIALS as f64).sqrt();
        let nash = row.p_nocoord_nash.unwrap();
        let stack = row.p_nocoord_stackelberg.unwrap();
        let ok_nash = (nash - bound).abs() <= 3.0 * se;
        let ok_stack = stack <= bound;
        let exact_se = (exact * (1.0 - exact) / TRIALS as f64).sqrt();
        let near_exact = (nash - exact).abs() <= 3.0 * exact_se.max(1.0 / TRIALS as f64);
        pass &= ok_nash && ok_stack;
        parts.push(format!(
            "K={k}: nash={nash:.4} bound={bound:.4}±{:.4}{} stackelberg={stack:.4}{} (i.i.d. region probability {exact:.2e}, nash within 3 SE: {near_exact})",
            3.0 * se,
            if ok_nash { "" } else { " OUT" },
            if ok_stack { "" } else { " ABOVE" },
        ));
    }
    parts.push(format!("time={elapsed:.1?}"));
    outcome(pass, parts.join("; "))
}

fn oracle_equivalence() -> Outcome {
    let (model, gs) = m100();
    let grid = OracleGrid::default();
    let fine = grid.refined(10);
    let start = Instant::now();
    let instances: Vec<(usize, u64)> = [2usize, 4]
        .iter()
        .flat_map(|&k| (0..500).map(move |t| (k, t)))
        .collect();
    let results: Vec<(f64, Option<f64>)> = instances
        .par_iter()
        .map(|&(k, t)| {
            let gains = sample_channels(&config(k, 0.0), SEED, t);
            let closed = stackelberg_solve(&gains, &model, &gs, DEFAULT_EPSILON)
                .utility(Player::Leader)
                .unwrap();
            let oracle = oracle_stackelberg(&gains, &model, &gs, &grid).utility(Player::Leader).unwrap();
            let gap = (oracle - closed) / oracle;
            let refined = (gap > 0.005).then(|| {
                let u = oracle_stackelberg(&gains, &model, &gs, &fine).utility(Player::Leader).unwrap();
                (u - closed) / u
            });
            (gap, refined)
        })
        .collect();
    let within = results.iter().filter(|(g, _)| *g <= 0.005).count();
    let refined_ok = results
        .iter()
        .filter_map(|(_, r)| *r)
        .all(|r| r <= fine.relative_step());
    let max_gap = results.iter().map(|(g, _)| *g).fold(f64::NEG_INFINITY, f64::max);
    let fraction = within as f64 / results.len() as f64;
    let elapsed = start.elapsed();
    outcome(
        fraction >= 0.99 && refined_ok && elapsed < Duration::from_secs(300),
        format!(
            "{within}/{} within 0.5% (max gap {max_gap:.2e}), refined violations ok={refined_ok}, time={elapsed:.1?}",
            results.len()
        ),
    )
}

fn carrier_restriction() -> Outcome {
    let (model, gs) = m100();
    let grid = OracleGrid::default();
    let step = grid.relative_step();
    let instances: Vec<(usize, u64)> = [4usize, 8]
        .iter()
        .flat_map(|&k| (0..500).map(move |t| (k, t)))
        .collect();
    let gaps: Vec<f64> = instances
        .par_iter()
        .map(|&(k, t)| {
            let gains = sample_channels(&config(k, 0.5), SEED ^ 0x5eed, t);
            let full = oracle_stackelberg(&gains, &model, &gs, &grid).utility(Player::Leader).unwrap();
            let pair = [gains.best(Player::Leader), gains.second(Player::Leader)];
            let restricted = oracle_stackelberg_on(&gains, &model, &gs, &grid, &pair)
                .utility(Player::Leader)
                .unwrap();
            (full - restricted).abs() / full
        })
        .collect();
    let worst = gaps.iter().copied().fold(0.0, f64::max);
    outcome(
        worst <= step,
        format!("max relative difference {worst:.2e} vs grid step {step:.2e} on {} instances", gaps.len()),
    )
}

fn follower_sinr() -> Outcome {
    let (model, gs) = m100();
    let cfg = config(4, 0.0);
    let worst = (0..TRIALS)
        .into_par_iter()
        .map(|t| {
            let gains = sample_channels(&cfg, SEED, t);
            let out = stackelberg_solve(&gains, &model, &gs, DEFAULT_EPSILON);
            out.active_carrier(Player::Follower).map_or(0.0, |k| {
                (sinr(&gains, &out.alloc, Player::Follower, k) - gs.value).abs() / gs.value
            })
        })
        .reduce(|| 0.0, f64::max);
    outcome(worst <= 1e-9, format!("max relative deviation {worst:.2e} over {TRIALS} trials"))
}

fn leader_dominance() -> Outcome {
    let (model, gs) = m100();
    let cfg = config(4, 0.0);
    let (compared, violations) = (0..TRIALS)
        .into_par_iter()
        .map(|t| {
            let gains = sample_channels(&cfg, SEED, t);
            let s = stackelberg_solve(&gains, &model, &gs, DEFAULT_EPSILON);
            let n = nash_solve(&gains, &model, &gs);
            if s.kind.is_exact() && n.kind.is_exact() {
                let worse = s.utility(Player::Leader) < n.utility(Player::Leader);
                (1u64, u64::from(worse))
            } else {
                (0, 0)
            }
        })
        .reduce(|| (0, 0), |a, b| (a.0 + b.0, a.1 + b.1));
    outcome(violations == 0, format!("{violations} violations on {compared} comparable trials"))
}

fn role_preference() -> Outcome {
    let (model, gs) = m100();
    let cfg = config(8, 0.0);
    let records: Vec<Option<(bool, bool)>> = (0..TRIALS)
        .into_par_iter()
        .map(|t| {
            let gains = sample_channels(&cfg, SEED, t);
            leader_prefers_leading(&gains, &model, &gs)
                .ok()
                .map(|direct| (direct, leader_preference_conditions(&gains, &model, &gs)))
        })
        .collect();
    let defined: Vec<(bool, bool)> = records.iter().flatten().copied().collect();
    let frequency = defined.iter().filter(|(d, _)| *d).count() as f64 / defined.len() as f64;
    let target = 1.0 - no_coordination_bound(8, &gs).bound;
    let se = (target * (1.0 - target) / defined.len() as f64).sqrt();
    let disagreements = defined.iter().filter(|(d, c)| d != c).count();
    outcome(
        frequency >= target - 3.0 * se && disagreements == 0,
        format!(
            "frequency={frequency:.4} threshold={:.4} on {} trials; closed-form disagreements={disagreements}",
            target - 3.0 * se,
            defined.len()
        ),
    )
}

fn spectral_efficiency() -> Outcome {
    let (_, gs) = m100();
    let values: Vec<f64> = (2..=32).map(f64::from).collect();
    let result = sweep(
        SweepVariable::Carriers,
        values,
        config(2, 0.0),
        TRIALS,
        SolverSet {
            nash: false,
            stackelberg: true,
        },
    );
    let limit = (1.0 + gs.value).log2();
    let mut pass = true;
    let mut worst_margin = f64::INFINITY;
    for row in &result.rows {
        let mean = row.se_coordinated_mean.unwrap();
        let se = row.ci_se_coordinated_mean.unwrap_or(0.0) / Z95;
        let bound = spectral_efficiency_bound(row.value as usize, &gs);
        worst_margin = worst_margin.min(mean - (bound - 3.0 * se));
        pass &= mean >= bound - 3.0 * se;
    }
    let last = result.rows.last().unwrap().se_coordinated_mean.unwrap();
    let rel = (last - limit).abs() / limit;
    pass &= rel <= 0.02;
    outcome(
        pass,
        format!("min margin over bound {worst_margin:.2e} bit/s/Hz; K=32 mean {last:.4} vs limit {limit:.4} ({:.2}%)", 100.0 * rel),
    )
}

fn efficiency_gain() -> Outcome {
    let result = sweep(
        SweepVariable::Carriers,
        vec![4.0],
        config(4, 0.0),
        TRIALS,
        SolverSet::default(),
    );
    let row = &result.rows[0];
    let nash = row.ee_nash_sum.unwrap();
    let stack = row.ee_stackelberg_sum_nash_exact.unwrap();
    let stack_all = row.ee_stackelberg_sum.unwrap();
    let gain = stack / nash - 1.0;
    let in_band = (0.05..=0.35).contains(&gain);
    let pass = in_band || gain > 0.0;
    outcome(
        pass,
        format!(
            "hierarchical {stack:.4e} vs simultaneous {nash:.4e} bit/J on {} exact trials: gain {:+.2}%{}; hierarchical over all trials {stack_all:.4e}",
            row.trials - row.nash_excluded,
            100.0 * gain,
            if in_band { "" } else { " (outside 5%..35%)" },
        ),
    )
}

fn determinism() -> Outcome {
    let bin = env!("CARGO_BIN_EXE_carriergame");
    let args = [
        "sweep", "--var", "K", "--values", "2,4,8,16", "--trials", "10000", "--snr-db", "10",
        "--theta", "0", "--seed", "42",
    ];
    let run = |threads: Option<&str>| {
        let mut cmd = Command::new(bin);
        cmd.args(args);
        if let Some(n) = threads {
            cmd.env("CARRIERGAME_THREADS", n);
        }
        let out = cmd.output().expect("binary runs");
        (out.status.success(), out.stdout)
    };
    let (ok_a, a) = run(None);
    let (ok_b, b) = run(None);
    let (ok_c, c) = run(Some("1"));

    let spec = SweepSpec::new(
        SweepVariable::SnrDb,
        vec![0.0, 10.0, 20.0],
        2000,
        config(4, 0.3),
        SEED,
        SolverSet::default(),
    )
    .unwrap();
    let library = run_sweep_with(&spec, Execution::Serial) == run_sweep_with(&spec, Execution::Parallel);
    let pass = ok_a && ok_b && ok_c && !a.is_empty() && a == b && a == c && library;
    outcome(
        pass,
        format!(
            "rerun identical={} single-thread identical={} ({} bytes); library serial==parallel={library}",
            a == b,
            a == c,
            a.len()
        ),
    )
}

fn welfare_ratios() -> Outcome {
    let (model, gs) = m100();
    let cfg = config(4, 0.0);
    let mut checked = 0u64;
    let mut defined = [0u64; 2];
    let mut violations = [0u64; 2];
    let mut worst = [0.0f64; 2];
    let mut trial = 0u64;
    while checked < TRIALS {
        let gains = sample_channels(&cfg, SEED ^ 0xbee, trial);
        trial += 1;
        if !gains.same_best() {
            continue;
        }
        checked += 1;
        let s = stackelberg_solve(&gains, &model, &gs, DEFAULT_EPSILON);
        let n = nash_solve(&gains, &model, &gs);
        let r = welfare_report(&gains, &n, &s, &model, &gs);
        let pairs = [(r.ratio_vs_nash, r.bound_vs_nash), (r.ratio_vs_max, r.bound_vs_max)];
        let holds = [r.holds_vs_nash, r.holds_vs_max];
        for i in 0..2 {
            if let (Some(h), (Some(ratio), Some(bound))) = (holds[i], pairs[i]) {
                defined[i] += 1;
                if !h {
                    violations[i] += 1;
                    worst[i] = worst[i].max(ratio / bound);
                }
            }
        }
    }
    outcome(
        violations == [0, 0],
        format!(
            "{checked} shared-carrier trials; vs simultaneous: {} violations of {} (worst ratio/bound {:.4}); vs maximum: {} violations of {}",
            violations[0], defined[0], worst[0], violations[1], defined[1]
        ),
    )
}

fn main() -> ExitCode {
    let criteria: [Criterion; 12] = [
        ("energy-efficient SINR solver", gamma_star_solver),
        ("no-coordination bound identity", bound_identity),
        ("no-coordination frequencies", nash_frequency),
        ("closed form vs grid oracle", oracle_equivalence),
        ("two-carrier restriction", carrier_restriction),
        ("follower SINR", follower_sinr),
        ("leader not worse than simultaneous play", leader_dominance),
        ("role preference", role_preference),
        ("spectral efficiency bound and limit", spectral_efficiency),
        ("energy-efficiency gain", efficiency_gain),
        ("determinism", determinism),
        ("social welfare ratios", welfare_ratios),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let result = check();
        if !result.pass {
            failed += 1;
        }
        println!(
            "{} criterion {:>2} {name}: {}",
            if result.pass { "PASS" } else { "FAIL" },
            i + 1,
            result.detail
        );
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
