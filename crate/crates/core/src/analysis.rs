//! Closed-form coordination, spectral-efficiency, role-preference and
//! social-welfare results.

use serde::{Deserialize, Serialize};
use statrs::function::beta::ln_beta;
use thiserror::Error;

use crate::channel::{ChannelRealization, Player};
use crate::efficiency::{solve_beta_star, EfficiencyModel, GammaStar};
use crate::equilibrium::{stackelberg_solve, EquilibriumKind, EquilibriumOutcome, DEFAULT_EPSILON};

/// Relative slack for the welfare comparisons, covering the threshold
/// branch's power margin and rounding.
pub const WELFARE_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalysisError {
    #[error("no exact hierarchical equilibrium when player {leader} leads")]
    RoleEquilibriumMissing { leader: usize },
}

/// Upper bound on the probability that the users fail to coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoordinationBound {
    pub carriers: usize,
    pub gamma_star: f64,
    pub bound: f64,
}

/// Whether both users share their best carrier and each has
/// `g^B ≥ (1+γ*) g^S` (boundary included). In this region the
/// simultaneous-move game cannot coordinate.
pub fn no_coordination_region(gains: &ChannelRealization, gamma_star: &GammaStar) -> bool {
    let threshold = 1.0 + gamma_star.value;
    gains.same_best()
        && Player::BOTH
            .iter()
            .all(|&p| gains.best_gain(p) >= threshold * gains.second_gain(p))
}

/// `(1+γ*)·B(1+γ*, K)`, evaluated through the log-Beta function. A single
/// carrier gives exactly 1 since `B(a, 1) = 1/a`.
pub fn no_coordination_bound(carriers: usize, gamma_star: &GammaStar) -> CoordinationBound {
    assert!(carriers >= 1, "at least one carrier is required");
    let a = 1.0 + gamma_star.value;
    let bound = if carriers == 1 {
        1.0
    } else {
        a * ln_beta(a, carriers as f64).exp()
    };
    CoordinationBound {
        carriers,
        gamma_star: gamma_star.value,
        bound,
    }
}

/// The same bound as the finite product `(K−1)!/∏_{k=2..K}(k+γ*)`.
pub fn no_coordination_bound_product(carriers: usize, gamma_star: &GammaStar) -> f64 {
    (2..=carriers)
        .map(|k| (k - 1) as f64 / (k as f64 + gamma_star.value))
        .product()
}

/// Exact probability of the no-coordination region under i.i.d. unit-mean
/// Rayleigh fading: `(1/K)·(K!/∏_{j=2..K}(j+γ*))²`.
///
/// Each user independently has `g^B ≥ (1+γ*)g^S` with probability
/// `K!/∏(j+γ*)`, and the two best carriers coincide with probability `1/K`
/// independently of the ratio events.
pub fn no_coordination_probability_iid(carriers: usize, gamma_star: &GammaStar) -> f64 {
    let k = carriers as f64;
    let single = k * no_coordination_bound_product(carriers, gamma_star);
    single * single / k
}

/// Lower bound on the expected per-user spectral efficiency (bit/s/Hz):
/// `log₂(1+γ*)·(1 − (1+γ*)B(1+γ*, K))`.
pub fn spectral_efficiency_bound(carriers: usize, gamma_star: &GammaStar) -> f64 {
    (1.0 + gamma_star.value).log2() * (1.0 - no_coordination_bound(carriers, gamma_star).bound)
}

/// Per-user average of `log₂(1 + SINR)` on each user's active carrier; a
/// silent user contributes zero.
pub fn realized_spectral_efficiency(outcome: &EquilibriumOutcome, gains: &ChannelRealization) -> f64 {
    Player::BOTH
        .iter()
        .filter_map(|&p| {
            let k = outcome.active_carrier(p)?;
            Some((1.0 + crate::channel::sinr(gains, &outcome.alloc, p, k)).log2())
        })
        .sum::<f64>()
        / 2.0
}

/// Whether player 1 does at least as well leading as following, found by
/// solving the hierarchical game under both role assignments.
pub fn leader_prefers_leading(
    gains: &ChannelRealization,
    model: &EfficiencyModel,
    gamma_star: &GammaStar,
) -> Result<bool, AnalysisError> {
    let leading = stackelberg_solve(gains, model, gamma_star, DEFAULT_EPSILON);
    let following = stackelberg_solve(&gains.swapped(), model, gamma_star, DEFAULT_EPSILON);
    let exact = |o: &EquilibriumOutcome| o.kind == EquilibriumKind::StackelbergExact;
    if !exact(&leading) {
        return Err(AnalysisError::RoleEquilibriumMissing { leader: 1 });
    }
    if !exact(&following) {
        return Err(AnalysisError::RoleEquilibriumMissing { leader: 2 });
    }
    let as_leader = leading.utility(Player::Leader).unwrap_or(0.0);
    let as_follower = following.utility(Player::Follower).unwrap_or(0.0);
    Ok(as_leader >= as_follower)
}

/// Closed-form version of [`leader_prefers_leading`]: player 1 prefers to
/// lead iff one of the listed gain configurations holds.
///
/// All values are normalised by `R g^B/σ²` of the player concerned. With
/// `ρ_n = g_n^B/g_n^S`, `w(ρ) = f(ρ−1)/(ρ−1)` is the threshold value,
/// `u_n = f(γ*)/(γ* ρ_n)` the second-carrier value, `v(ρ)` the shared-carrier
/// value with `β*` computed for a follower of ratio `ρ`, and
/// `s(ρ) = f(γ*)(1−γ*β*)/(γ*(1+β*))` the follower's utility while sharing.
pub fn leader_preference_conditions(
    gains: &ChannelRealization,
    model: &EfficiencyModel,
    gamma_star: &GammaStar,
) -> bool {
    if !gains.same_best() {
        return true;
    }
    let gs = gamma_star.value;
    let (r1, r2) = (gains.best_ratio(Player::Leader), gains.best_ratio(Player::Follower));
    if r1.min(r2) <= 1.0 + gs {
        return true;
    }
    let f_gs = model.value(gs);
    let w = |r: f64| model.value(r - 1.0) / (r - 1.0);
    let u = |r: f64| f_gs / (gs * r);
    let beta = |r: f64| solve_beta_star(model, gamma_star, r - 1.0).map(|b| b.value);
    let v = |r: f64| match beta(r) {
        Some(b) => model.value(b) * (1.0 - gs * b) / (b * (1.0 + gs)),
        None => f64::NEG_INFINITY,
    };
    let shared_follower = |r: f64| match beta(r) {
        Some(b) => f_gs * (1.0 - gs * b) / (gs * (1.0 + b)),
        None => f64::NEG_INFINITY,
    };

    // Candidate values when player 1 leads (follower ratio r2) and when
    // player 2 leads (follower ratio r1).
    let (w12, u1, v12) = (w(r2), u(r1), v(r2));
    let (w21, u2, v21) = (w(r1), u(r2), v(r1));
    let one_threshold = w12 >= u1.max(v12);
    let one_second = u1 >= w12.max(v12);
    let one_shared = v12 >= u1.max(w12);
    let two_threshold = w21 >= u2.max(v21);
    let two_shared = v21 >= u2.max(w21);

    (one_threshold && two_threshold)
        || (one_shared && two_threshold)
        || (one_second
            && two_shared
            && beta(r1).is_some_and(|b| r1 <= (1.0 + b) / (1.0 - gs * b)))
        || (one_threshold && w12 >= shared_follower(r1) && two_shared)
        || (one_second && two_threshold)
}

/// Social welfare at both equilibria and the guaranteed worst-case ratios.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WelfareReport {
    pub sw_stackelberg: Option<f64>,
    pub sw_nash: Option<f64>,
    /// Sum of both users' single-user optima.
    pub sw_upper: f64,
    /// `sw_nash / sw_stackelberg`.
    pub ratio_vs_nash: Option<f64>,
    /// `sw_upper / sw_stackelberg`.
    pub ratio_vs_max: Option<f64>,
    /// `(R₁g₁^B + R₂g₂^B)/(R₁g₁^B + R₂g₂^S)` on a shared best carrier.
    pub bound_vs_nash: Option<f64>,
    /// `(R₁g₁^B + R₂g₂^B)/(R₁g₁^S + R₂g₂^S)` on a shared best carrier.
    pub bound_vs_max: Option<f64>,
    /// Whether the comparison with the simultaneous-move welfare holds:
    /// the ratio bound on a shared best carrier, equality otherwise.
    pub holds_vs_nash: Option<bool>,
    /// As `holds_vs_nash`, against the upper welfare.
    pub holds_vs_max: Option<bool>,
}

pub fn welfare_report(
    gains: &ChannelRealization,
    nash: &EquilibriumOutcome,
    stackelberg: &EquilibriumOutcome,
    model: &EfficiencyModel,
    gamma_star: &GammaStar,
) -> WelfareReport {
    let gs = gamma_star.value;
    let scale = model.value(gs) / (gs * gains.sigma2());
    let weighted = |p: Player, g: f64| gains.rate(p) * g;
    let (l, f) = (Player::Leader, Player::Follower);
    let top = weighted(l, gains.best_gain(l)) + weighted(f, gains.best_gain(f));
    let sw_upper = scale * top;

    let sw_stackelberg = stackelberg.welfare();
    let sw_nash = nash.welfare();
    let ratio_vs_nash = sw_stackelberg.zip(sw_nash).map(|(s, n)| n / s);
    let ratio_vs_max = sw_stackelberg.map(|s| sw_upper / s);

    let within = |ratio: f64, bound: f64| ratio <= bound * (1.0 + WELFARE_TOLERANCE);
    let equal = |a: f64, b: f64| (a - b).abs() <= WELFARE_TOLERANCE * a.abs().max(b.abs());

    let (bound_vs_nash, bound_vs_max, holds_vs_nash, holds_vs_max) = if gains.same_best() {
        let bn = top / (weighted(l, gains.best_gain(l)) + weighted(f, gains.second_gain(f)));
        let bm = top / (weighted(l, gains.second_gain(l)) + weighted(f, gains.second_gain(f)));
        (
            Some(bn),
            Some(bm),
            ratio_vs_nash.map(|r| within(r, bn)),
            ratio_vs_max.map(|r| within(r, bm)),
        )
    } else {
        (
            None,
            None,
            sw_stackelberg.zip(sw_nash).map(|(s, n)| equal(s, n)),
            sw_stackelberg.map(|s| equal(s, sw_upper)),
        )
    };

    WelfareReport {
        sw_stackelberg,
        sw_nash,
        sw_upper,
        ratio_vs_nash,
        ratio_vs_max,
        bound_vs_nash,
        bound_vs_max,
        holds_vs_nash,
        holds_vs_max,
    }
}
