//! Energy-efficient power control for two users sharing `K` carriers.
//!
//! Each user maximises its energy efficiency (bit/J). The crate solves the
//! simultaneous-move and leader–follower versions of the game in closed form,
//! validates them against a grid-search oracle, evaluates coordination and
//! efficiency bounds, and runs seeded Monte Carlo sweeps over Rayleigh fading.

pub mod channel;
pub mod efficiency;
pub mod equilibrium;
pub mod analysis;
pub mod simulator;
pub mod cli;

pub use channel::{ChannelRealization, GameConfig, Player};
pub use efficiency::{solve_beta_star, solve_gamma_star, EfficiencyModel, GammaStar};
pub use equilibrium::{nash_solve, stackelberg_solve, EquilibriumKind, EquilibriumOutcome};
