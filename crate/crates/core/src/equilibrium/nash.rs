//! Simultaneous-move (Nash) equilibrium baseline.

use super::{Branch, EquilibriumKind, EquilibriumOutcome, PowerAllocation};
use crate::channel::{ChannelRealization, Player};
use crate::efficiency::{EfficiencyModel, GammaStar};

/// Solves the simultaneous-move game.
///
/// * Different best carriers: both on their own best carrier at SINR `γ*`.
/// * Shared best carrier `B`, with `ρ_n = g_n^B / g_n^S`:
///   - exactly one `ρ_n ≥ 1 + γ*`: that user takes `B`, the other its second
///     carrier;
///   - both `ρ_n < 1 + γ*`: two splits are equilibria; the user with the
///     larger ratio takes `B` (ties to player 1);
///   - both `ρ_n ≥ 1 + γ*`: the users do not coordinate. Both staying on `B`
///     at mutual SINR `γ*` requires `γ* < 1` and `ρ_n ≥ 1/(1 − γ*)` for both
///     users, with powers `γ*σ²/(g_n^B(1 − γ*))`. Otherwise no pure
///     equilibrium exists and the outcome is [`EquilibriumKind::NashInfeasible`]
///     with an empty allocation.
pub fn nash_solve(
    gains: &ChannelRealization,
    model: &EfficiencyModel,
    gamma_star: &GammaStar,
) -> EquilibriumOutcome {
    let gs = gamma_star.value;
    let sigma2 = gains.sigma2();
    let k = gains.carriers();
    let exact = EquilibriumKind::NashExact;

    if !gains.same_best() {
        let mut alloc = PowerAllocation::zeros(k);
        for player in Player::BOTH {
            alloc.set(player, gains.best(player), gs * sigma2 / gains.best_gain(player));
        }
        return EquilibriumOutcome::new(exact, Branch::DistinctBest, alloc, gains, model);
    }

    let ratios = Player::BOTH.map(|p| gains.best_ratio(p));
    let threshold = 1.0 + gs;
    let high = ratios.map(|r| r >= threshold);

    let split = |on_best: Player, branch: Branch| {
        let other = on_best.other();
        let mut alloc = PowerAllocation::zeros(k);
        alloc.set(on_best, gains.best(on_best), gs * sigma2 / gains.best_gain(on_best));
        alloc.set(other, gains.second(other), gs * sigma2 / gains.second_gain(other));
        EquilibriumOutcome::new(exact, branch, alloc, gains, model)
    };

    match high {
        [true, false] => split(Player::Leader, Branch::Split),
        [false, true] => split(Player::Follower, Branch::Split),
        [false, false] => {
            let on_best = if ratios[0] >= ratios[1] {
                Player::Leader
            } else {
                Player::Follower
            };
            split(on_best, Branch::SplitSelected)
        }
        [true, true] => {
            let stays = gs < 1.0 && ratios.iter().all(|&r| r >= 1.0 / (1.0 - gs));
            let mut alloc = PowerAllocation::zeros(k);
            let kind = if stays {
                let b = gains.best(Player::Leader);
                for player in Player::BOTH {
                    alloc.set(player, b, gs * sigma2 / (gains.best_gain(player) * (1.0 - gs)));
                }
                exact
            } else {
                EquilibriumKind::NashInfeasible
            };
            EquilibriumOutcome::new(kind, Branch::SameCarrierNash, alloc, gains, model)
        }
    }
}
