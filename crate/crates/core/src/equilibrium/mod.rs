//! Equilibria of the two-user multi-carrier power control game.
//!
//! Utilities are energy efficiencies in bit/J,
//! `u_n = R_n Σ_k f(γ_n^k) / Σ_k p_n^k`. The follower's best response and
//! every equilibrium use a single carrier per user.

mod nash;
mod oracle;
mod stackelberg;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::{effective_gain, sinr, ChannelRealization, Player};
use crate::efficiency::{log_grid, EfficiencyModel, GammaStar};

pub use nash::nash_solve;
pub use oracle::{oracle_stackelberg, oracle_stackelberg_on, OracleGrid};
pub use stackelberg::{
    leader_candidates, stackelberg_solve, LeaderCandidates, DEFAULT_EPSILON, MAX_HALVINGS,
    THRESHOLD_MARGIN,
};

/// Points per carrier in the leader-deviation grid of [`epsilon_ne_check`].
pub const DEVIATION_GRID_POINTS: usize = 200;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EquilibriumError {
    #[error("{0:?} transmits with zero total power; utility is undefined")]
    ZeroPower(Player),
}

/// Transmit powers (W) of both users on every carrier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerAllocation {
    powers: [Vec<f64>; 2],
}

impl PowerAllocation {
    pub fn zeros(carriers: usize) -> Self {
        Self {
            powers: [vec![0.0; carriers], vec![0.0; carriers]],
        }
    }

    pub fn from_rows(leader: Vec<f64>, follower: Vec<f64>) -> Self {
        assert_eq!(leader.len(), follower.len(), "rows must have equal length");
        Self {
            powers: [leader, follower],
        }
    }

    pub fn carriers(&self) -> usize {
        self.powers[0].len()
    }

    pub fn row(&self, player: Player) -> &[f64] {
        &self.powers[player.index()]
    }

    pub fn power(&self, player: Player, carrier: usize) -> f64 {
        self.powers[player.index()][carrier]
    }

    pub fn set(&mut self, player: Player, carrier: usize, power: f64) {
        self.powers[player.index()][carrier] = power;
    }

    pub fn set_row(&mut self, player: Player, row: Vec<f64>) {
        assert_eq!(row.len(), self.carriers());
        self.powers[player.index()] = row;
    }

    pub fn total_power(&self, player: Player) -> f64 {
        self.row(player).iter().sum()
    }

    /// First carrier with positive power.
    pub fn active_carrier(&self, player: Player) -> Option<usize> {
        self.row(player).iter().position(|&p| p > 0.0)
    }

    /// At most one positive entry per user.
    pub fn is_single_carrier(&self) -> bool {
        self.powers
            .iter()
            .all(|row| row.iter().filter(|&&p| p > 0.0).count() <= 1)
    }

    pub fn is_empty(&self) -> bool {
        self.powers.iter().flatten().all(|&p| p == 0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum EquilibriumKind {
    NashExact,
    /// No pure simultaneous-move equilibrium exists; the allocation is empty.
    NashInfeasible,
    StackelbergExact,
    /// The leader's utility is within a factor `1 + epsilon` of its supremum.
    StackelbergEpsilon { epsilon: f64 },
    NoEquilibrium,
}

impl EquilibriumKind {
    pub fn is_exact(self) -> bool {
        matches!(self, EquilibriumKind::NashExact | EquilibriumKind::StackelbergExact)
    }
}

/// Which case of the closed-form solution produced an outcome.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    /// Users have different best carriers; both use them interference-free.
    DistinctBest,
    /// Shared best carrier, and the follower's second carrier is close enough
    /// that it moves there when the leader plays its single-user optimum.
    FollowerYields,
    /// Leader shares its best carrier with the follower at SINR `β*`.
    SharedCarrier,
    /// Leader on its best carrier at exactly the power that pushes the
    /// follower to its second carrier.
    Threshold,
    /// Leader moves to its second-best carrier.
    SecondBest,
    /// Leader's supremum is only approached as its power vanishes.
    VanishingPower,
    /// Simultaneous play with a unique carrier split.
    Split,
    /// Simultaneous play with two possible splits; the user with the larger
    /// best-to-second gain ratio takes the shared carrier (ties to user 1).
    SplitSelected,
    /// Simultaneous play where both users keep the shared best carrier.
    SameCarrierNash,
    /// Produced by exhaustive grid search.
    GridSearch,
}

/// A solved game: allocation, utilities and coordination flag.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumOutcome {
    pub kind: EquilibriumKind,
    pub branch: Branch,
    pub alloc: PowerAllocation,
    /// Utility of each user in bit/J; `None` for users that do not transmit.
    pub utilities: [Option<f64>; 2],
    pub active_carriers: [Option<usize>; 2],
    /// Both users transmit, on different carriers.
    pub coordinated: bool,
}

impl EquilibriumOutcome {
    pub(crate) fn new(
        kind: EquilibriumKind,
        branch: Branch,
        alloc: PowerAllocation,
        gains: &ChannelRealization,
        model: &EfficiencyModel,
    ) -> Self {
        let utilities = Player::BOTH.map(|p| utility(&alloc, gains, model, p).ok());
        let active_carriers = Player::BOTH.map(|p| alloc.active_carrier(p));
        let coordinated = matches!(active_carriers, [Some(a), Some(b)] if a != b);
        Self {
            kind,
            branch,
            alloc,
            utilities,
            active_carriers,
            coordinated,
        }
    }

    pub fn utility(&self, player: Player) -> Option<f64> {
        self.utilities[player.index()]
    }

    pub fn active_carrier(&self, player: Player) -> Option<usize> {
        self.active_carriers[player.index()]
    }

    /// Sum of both utilities, when both are defined.
    pub fn welfare(&self) -> Option<f64> {
        Some(self.utilities[0]? + self.utilities[1]?)
    }
}

/// Energy efficiency `R_n Σ_k f(γ_n^k) / Σ_k p_n^k` of `player`, in bit/J.
pub fn utility(
    alloc: &PowerAllocation,
    gains: &ChannelRealization,
    model: &EfficiencyModel,
    player: Player,
) -> Result<f64, EquilibriumError> {
    let total = alloc.total_power(player);
    if total.is_nan() || total <= 0.0 {
        return Err(EquilibriumError::ZeroPower(player));
    }
    let throughput: f64 = alloc
        .row(player)
        .iter()
        .enumerate()
        .filter(|(_, &p)| p > 0.0)
        .map(|(k, _)| model.value(sinr(gains, alloc, player, k)))
        .sum();
    Ok(gains.rate(player) * throughput / total)
}

/// Best single-carrier response of `player` to the other user's power row:
/// transmit on the carrier with the highest effective gain (ties to the lowest
/// index) at the power that brings the SINR to `γ*`.
pub fn best_response(
    opponent: &[f64],
    gains: &ChannelRealization,
    gamma_star: &GammaStar,
    player: Player,
) -> Vec<f64> {
    let mut best = 0;
    let mut best_gain = f64::NEG_INFINITY;
    for (k, &p) in opponent.iter().enumerate() {
        let h = effective_gain(gains, p, player, k);
        if h > best_gain {
            best = k;
            best_gain = h;
        }
    }
    let mut row = vec![0.0; opponent.len()];
    let other = player.other();
    row[best] = gamma_star.value * (gains.sigma2() + gains.gain(other, best) * opponent[best])
        / gains.gain(player, best);
    row
}

/// Follower's best response to the leader's power row.
pub fn follower_best_response(
    leader: &[f64],
    gains: &ChannelRealization,
    gamma_star: &GammaStar,
) -> Vec<f64> {
    best_response(leader, gains, gamma_star, Player::Follower)
}

/// Leader's utility when it plays `row` and the follower best-responds.
pub(crate) fn leader_value(
    row: Vec<f64>,
    gains: &ChannelRealization,
    model: &EfficiencyModel,
    gamma_star: &GammaStar,
) -> (f64, PowerAllocation) {
    let follower = follower_best_response(&row, gains, gamma_star);
    let alloc = PowerAllocation::from_rows(row, follower);
    let u = utility(&alloc, gains, model, Player::Leader).unwrap_or(0.0);
    (u, alloc)
}

/// Checks that `alloc` is an `ε`-equilibrium of the hierarchical game:
/// `(1 + ε)·u_n(alloc) ≥ u_n(deviation)` for each user.
///
/// The follower's deviation is its analytic best response to the leader row.
/// The leader's deviations are single-carrier powers on a
/// [`DEVIATION_GRID_POINTS`]-point log grid over `[1e-6, 1e4]·σ²/g₁^k` for
/// every carrier `k`, each answered by the follower's best response.
pub fn epsilon_ne_check(
    alloc: &PowerAllocation,
    gains: &ChannelRealization,
    model: &EfficiencyModel,
    gamma_star: &GammaStar,
    epsilon: f64,
) -> bool {
    let (Ok(u_leader), Ok(u_follower)) = (
        utility(alloc, gains, model, Player::Leader),
        utility(alloc, gains, model, Player::Follower),
    ) else {
        return false;
    };
    let scale = 1.0 + epsilon;

    let response = follower_best_response(alloc.row(Player::Leader), gains, gamma_star);
    let deviated = PowerAllocation::from_rows(alloc.row(Player::Leader).to_vec(), response);
    let Ok(u_response) = utility(&deviated, gains, model, Player::Follower) else {
        return false;
    };
    if scale * u_follower < u_response {
        return false;
    }

    let k = gains.carriers();
    for carrier in 0..k {
        let unit = gains.sigma2() / gains.gain(Player::Leader, carrier);
        for p in log_grid(1e-6 * unit, 1e4 * unit, DEVIATION_GRID_POINTS) {
            let mut row = vec![0.0; k];
            row[carrier] = p;
            let (u, _) = leader_value(row, gains, model, gamma_star);
            if scale * u_leader < u {
                return false;
            }
        }
    }
    true
}
