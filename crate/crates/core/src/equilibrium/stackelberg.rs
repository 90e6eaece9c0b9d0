//! Hierarchical (leader–follower) equilibrium in closed form.

use serde::{Deserialize, Serialize};

use super::{leader_value, Branch, EquilibriumKind, EquilibriumOutcome, PowerAllocation};
use crate::channel::{ChannelRealization, Player};
use crate::efficiency::{solve_beta_star, BetaStar, EfficiencyModel, GammaStar};

/// Default target for the vanishing-power ε-equilibrium.
pub const DEFAULT_EPSILON: f64 = 1e-6;
/// Maximum number of halvings of the leader power in the ε-construction.
pub const MAX_HALVINGS: usize = 200;
/// Relative amount by which the leader exceeds the follower's switching
/// threshold in the threshold branch, so the follower's move is strict.
pub const THRESHOLD_MARGIN: f64 = 1e-9;

/// The leader's four candidate utilities (bit/J) when both users share the
/// same best carrier and the follower does not yield by itself.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LeaderCandidates {
    /// Sharing the best carrier at SINR `β*`; `-∞` when `β*` does not exist.
    pub v: f64,
    /// Best carrier at the follower's switching threshold (SINR `γ̂`).
    pub w: f64,
    /// Second-best carrier at SINR `γ*`, interference-free.
    pub u: f64,
    /// Supremum approached as the leader's power on the best carrier vanishes.
    pub v0: f64,
    #[serde(skip)]
    pub beta_star: Option<BetaStar>,
}

impl LeaderCandidates {
    /// The winning branch: the largest value, ties resolved V > W > U, and
    /// the vanishing-power branch only as a strict maximum.
    pub fn winner(&self) -> Branch {
        let mut branch = Branch::SharedCarrier;
        let mut best = self.v;
        if self.w > best {
            branch = Branch::Threshold;
            best = self.w;
        }
        if self.u > best {
            branch = Branch::SecondBest;
            best = self.u;
        }
        if self.v0 > best {
            branch = Branch::VanishingPower;
        }
        branch
    }
}

/// Closed-form candidate utilities of the leader. Meaningful when both users
/// share the best carrier and `γ̂ > γ*`.
pub fn leader_candidates(
    gains: &ChannelRealization,
    model: &EfficiencyModel,
    gamma_star: &GammaStar,
) -> LeaderCandidates {
    let gs = gamma_star.value;
    let gamma_hat = gains.gamma_hat();
    let sigma2 = gains.sigma2();
    let r1 = gains.rate(Player::Leader);
    let g_best = gains.best_gain(Player::Leader);
    let g_second = gains.second_gain(Player::Leader);

    let beta_star = solve_beta_star(model, gamma_star, gamma_hat);
    let v = match beta_star {
        Some(b) => {
            model.value(b.value) * (1.0 - gs * b.value) * g_best * r1
                / (b.value * sigma2 * (1.0 + gs))
        }
        None => f64::NEG_INFINITY,
    };
    let w = model.value(gamma_hat) * g_best * r1 / (gamma_hat * sigma2);
    let u = model.value(gs) * g_second * r1 / (gs * sigma2);
    let v0 = model.derivative_at_zero() * g_best * r1 / (sigma2 * (1.0 + gs));
    LeaderCandidates {
        v,
        w,
        u,
        v0,
        beta_star,
    }
}

/// Solves the hierarchical game with player 1 leading.
///
/// * Different best carriers: both users transmit on their own best carrier
///   at SINR `γ*`.
/// * Shared best carrier with `γ̂ ≤ γ*`: the leader keeps its single-user
///   optimum and the follower moves to its second carrier.
/// * Otherwise the leader picks the largest of [`LeaderCandidates`] and the
///   follower best-responds. When only the vanishing-power supremum is best,
///   the leader's power is halved from `γ*σ²/g₁^B` until its utility is
///   within a factor `1 + epsilon` of that supremum, giving an
///   ε-equilibrium; if [`MAX_HALVINGS`] halvings do not suffice the outcome
///   is [`EquilibriumKind::NoEquilibrium`].
pub fn stackelberg_solve(
    gains: &ChannelRealization,
    model: &EfficiencyModel,
    gamma_star: &GammaStar,
    epsilon: f64,
) -> EquilibriumOutcome {
    let gs = gamma_star.value;
    let sigma2 = gains.sigma2();
    let k = gains.carriers();
    let b1 = gains.best(Player::Leader);
    let g_best = gains.best_gain(Player::Leader);
    let exact = EquilibriumKind::StackelbergExact;

    if !gains.same_best() {
        let mut alloc = PowerAllocation::zeros(k);
        for player in Player::BOTH {
            alloc.set(player, gains.best(player), gs * sigma2 / gains.best_gain(player));
        }
        return EquilibriumOutcome::new(exact, Branch::DistinctBest, alloc, gains, model);
    }

    if gains.gamma_hat() <= gs {
        let mut alloc = PowerAllocation::zeros(k);
        alloc.set(Player::Leader, b1, gs * sigma2 / g_best);
        alloc.set(
            Player::Follower,
            gains.second(Player::Follower),
            gs * sigma2 / gains.second_gain(Player::Follower),
        );
        return EquilibriumOutcome::new(exact, Branch::FollowerYields, alloc, gains, model);
    }

    let candidates = leader_candidates(gains, model, gamma_star);
    let branch = candidates.winner();
    let mut row = vec![0.0; k];
    match branch {
        Branch::SharedCarrier => {
            let beta = candidates
                .beta_star
                .expect("shared-carrier branch wins only when β* exists")
                .value;
            row[b1] = beta * sigma2 * (1.0 + gs) / (g_best * (1.0 - beta * gs));
        }
        Branch::Threshold => {
            row[b1] = gains.gamma_hat() * sigma2 / g_best * (1.0 + THRESHOLD_MARGIN);
        }
        Branch::SecondBest => {
            row[gains.second(Player::Leader)] = gs * sigma2 / gains.second_gain(Player::Leader);
        }
        _ => return vanishing_power(gains, model, gamma_star, candidates.v0, epsilon),
    }
    let (_, alloc) = leader_value(row, gains, model, gamma_star);
    EquilibriumOutcome::new(exact, branch, alloc, gains, model)
}

fn vanishing_power(
    gains: &ChannelRealization,
    model: &EfficiencyModel,
    gamma_star: &GammaStar,
    v0: f64,
    epsilon: f64,
) -> EquilibriumOutcome {
    let k = gains.carriers();
    let b1 = gains.best(Player::Leader);
    let mut alpha = gamma_star.value * gains.sigma2() / gains.best_gain(Player::Leader);
    for _ in 0..MAX_HALVINGS {
        let mut row = vec![0.0; k];
        row[b1] = alpha;
        let (u, alloc) = leader_value(row, gains, model, gamma_star);
        if (1.0 + epsilon) * u >= v0 {
            return EquilibriumOutcome::new(
                EquilibriumKind::StackelbergEpsilon { epsilon },
                Branch::VanishingPower,
                alloc,
                gains,
                model,
            );
        }
        alpha *= 0.5;
    }
    EquilibriumOutcome::new(
        EquilibriumKind::NoEquilibrium,
        Branch::VanishingPower,
        PowerAllocation::zeros(k),
        gains,
        model,
    )
}
