//! Exhaustive grid search over the leader's single-carrier strategies.

use serde::{Deserialize, Serialize};

use super::{leader_value, Branch, EquilibriumKind, EquilibriumOutcome, PowerAllocation};
use crate::channel::{ChannelRealization, Player};
use crate::efficiency::{log_grid, EfficiencyModel, GammaStar};

/// Log-spaced leader power grid, in units of `σ²/g₁^{B₁}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleGrid {
    pub points_per_decade: usize,
    pub p_min: f64,
    pub p_max: f64,
}

impl Default for OracleGrid {
    fn default() -> Self {
        Self {
            points_per_decade: 200,
            p_min: 1e-6,
            p_max: 1e4,
        }
    }
}

impl OracleGrid {
    /// Relative spacing between neighbouring grid powers.
    pub fn relative_step(&self) -> f64 {
        10f64.powf(1.0 / self.points_per_decade as f64) - 1.0
    }

    /// The same range with `factor` times as many points per decade.
    pub fn refined(&self, factor: usize) -> Self {
        Self {
            points_per_decade: self.points_per_decade * factor,
            ..*self
        }
    }

    fn powers(&self, unit: f64) -> Vec<f64> {
        let decades = (self.p_max / self.p_min).log10();
        let n = (decades * self.points_per_decade as f64).round() as usize + 1;
        log_grid(self.p_min * unit, self.p_max * unit, n.max(2))
    }
}

/// Leader's best grid strategy against the analytic follower response, over
/// all carriers.
pub fn oracle_stackelberg(
    gains: &ChannelRealization,
    model: &EfficiencyModel,
    gamma_star: &GammaStar,
    grid: &OracleGrid,
) -> EquilibriumOutcome {
    let carriers: Vec<usize> = (0..gains.carriers()).collect();
    oracle_stackelberg_on(gains, model, gamma_star, grid, &carriers)
}

/// As [`oracle_stackelberg`], with the leader restricted to `carriers`.
/// The first grid point reaching the maximum wins.
pub fn oracle_stackelberg_on(
    gains: &ChannelRealization,
    model: &EfficiencyModel,
    gamma_star: &GammaStar,
    grid: &OracleGrid,
    carriers: &[usize],
) -> EquilibriumOutcome {
    let k = gains.carriers();
    let powers = grid.powers(gains.sigma2() / gains.best_gain(Player::Leader));
    let mut best: Option<(f64, PowerAllocation)> = None;
    for &carrier in carriers {
        for &p in &powers {
            let mut row = vec![0.0; k];
            row[carrier] = p;
            let (u, alloc) = leader_value(row, gains, model, gamma_star);
            if best.as_ref().is_none_or(|(b, _)| u > *b) {
                best = Some((u, alloc));
            }
        }
    }
    let alloc = best.map(|(_, a)| a).unwrap_or_else(|| PowerAllocation::zeros(k));
    EquilibriumOutcome::new(
        EquilibriumKind::StackelbergExact,
        Branch::GridSearch,
        alloc,
        gains,
        model,
    )
}
