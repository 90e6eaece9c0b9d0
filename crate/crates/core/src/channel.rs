//! Game configuration, fading realizations and the SINR of each user.
//!
//! Power gains are unit-mean exponential (Rayleigh amplitude). Inter-user
//! correlation uses a shared complex Gaussian component per carrier:
//! `h_n = √θ·c + √(1-θ)·z_n` with `c, z_1, z_2 ~ CN(0, 1)` and `g_n = |h_n|²`.
//! `θ = 0` gives independent users, `θ = 1` identical gains, and every
//! marginal stays Exp(1) in between.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::efficiency::{EfficiencyError, EfficiencyModel};
use crate::equilibrium::PowerAllocation;

/// Default packet length in bits.
pub const DEFAULT_BLOCK_LEN: u32 = 100;
/// Default transmission rate of both users, bit/s.
pub const DEFAULT_RATE: f64 = 1e6;
/// Default SNR in dB.
pub const DEFAULT_SNR_DB: f64 = 10.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ChannelError {
    #[error("at least 2 carriers are required, got {0}")]
    TooFewCarriers(usize),
    #[error("noise variance must be positive and finite, got {0}")]
    NoiseVariance(f64),
    #[error("rates must be positive and finite, got {0:?}")]
    Rates([f64; 2]),
    #[error("correlation must lie in [0, 1], got {0}")]
    Correlation(f64),
    #[error("both users need the same number of carriers ({0} vs {1})")]
    RowLength(usize, usize),
    #[error("gain {value} of user {user} on carrier {carrier} is not positive and finite")]
    Gain {
        user: usize,
        carrier: usize,
        value: f64,
    },
    #[error(transparent)]
    Efficiency(#[from] EfficiencyError),
}

/// One of the two players. In hierarchical play player 1 leads; in
/// simultaneous play the labels only tell the users apart.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Player {
    Leader,
    Follower,
}

impl Player {
    pub const BOTH: [Player; 2] = [Player::Leader, Player::Follower];

    pub fn index(self) -> usize {
        match self {
            Player::Leader => 0,
            Player::Follower => 1,
        }
    }

    pub fn other(self) -> Player {
        match self {
            Player::Leader => Player::Follower,
            Player::Follower => Player::Leader,
        }
    }
}

/// Parameters shared by every realization of one experiment.
#[derive(Debug, Clone)]
pub struct GameConfig {
    pub carriers: usize,
    pub sigma2: f64,
    pub rates: [f64; 2],
    pub theta: f64,
    pub model: EfficiencyModel,
}

impl GameConfig {
    pub fn new(
        carriers: usize,
        sigma2: f64,
        rates: [f64; 2],
        theta: f64,
        model: EfficiencyModel,
    ) -> Result<Self, ChannelError> {
        let config = Self {
            carriers,
            sigma2,
            rates,
            theta,
            model,
        };
        config.validate()?;
        Ok(config)
    }

    /// `M = 100`, `R = 1 Mbit/s` for both users, 10 dB SNR, independent users.
    pub fn standard(carriers: usize) -> Result<Self, ChannelError> {
        Self::new(
            carriers,
            sigma2_from_snr_db(DEFAULT_SNR_DB),
            [DEFAULT_RATE; 2],
            0.0,
            EfficiencyModel::exp_block(DEFAULT_BLOCK_LEN)?,
        )
    }

    pub fn validate(&self) -> Result<(), ChannelError> {
        if self.carriers < 2 {
            return Err(ChannelError::TooFewCarriers(self.carriers));
        }
        if !(self.sigma2 > 0.0 && self.sigma2.is_finite()) {
            return Err(ChannelError::NoiseVariance(self.sigma2));
        }
        if !self.rates.iter().all(|r| *r > 0.0 && r.is_finite()) {
            return Err(ChannelError::Rates(self.rates));
        }
        if !(0.0..=1.0).contains(&self.theta) {
            return Err(ChannelError::Correlation(self.theta));
        }
        Ok(())
    }

    pub fn snr_db(&self) -> f64 {
        -10.0 * self.sigma2.log10()
    }
}

/// `σ² = 10^{-SNR_dB/10}` for unit-mean gains.
pub fn sigma2_from_snr_db(snr_db: f64) -> f64 {
    10f64.powf(-snr_db / 10.0)
}

/// Power gains of both users on every carrier, with the noise variance and
/// rates they were drawn for.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChannelRealization {
    gains: [Vec<f64>; 2],
    sigma2: f64,
    rates: [f64; 2],
    #[serde(skip)]
    best: [usize; 2],
    #[serde(skip)]
    second: [usize; 2],
}

impl ChannelRealization {
    pub fn new(gains: [Vec<f64>; 2], sigma2: f64, rates: [f64; 2]) -> Result<Self, ChannelError> {
        let (k1, k2) = (gains[0].len(), gains[1].len());
        if k1 != k2 {
            return Err(ChannelError::RowLength(k1, k2));
        }
        if k1 < 2 {
            return Err(ChannelError::TooFewCarriers(k1));
        }
        if !(sigma2 > 0.0 && sigma2.is_finite()) {
            return Err(ChannelError::NoiseVariance(sigma2));
        }
        if !rates.iter().all(|r| *r > 0.0 && r.is_finite()) {
            return Err(ChannelError::Rates(rates));
        }
        for (user, row) in gains.iter().enumerate() {
            if let Some((carrier, &value)) =
                row.iter().enumerate().find(|(_, g)| !(**g > 0.0 && g.is_finite()))
            {
                return Err(ChannelError::Gain {
                    user: user + 1,
                    carrier,
                    value,
                });
            }
        }
        Ok(Self::from_valid(gains, sigma2, rates))
    }

    fn from_valid(gains: [Vec<f64>; 2], sigma2: f64, rates: [f64; 2]) -> Self {
        let (b1, s1) = best_two(&gains[0]);
        let (b2, s2) = best_two(&gains[1]);
        Self {
            gains,
            sigma2,
            rates,
            best: [b1, b2],
            second: [s1, s2],
        }
    }

    pub fn carriers(&self) -> usize {
        self.gains[0].len()
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    pub fn rate(&self, player: Player) -> f64 {
        self.rates[player.index()]
    }

    pub fn row(&self, player: Player) -> &[f64] {
        &self.gains[player.index()]
    }

    pub fn gain(&self, player: Player, carrier: usize) -> f64 {
        self.gains[player.index()][carrier]
    }

    /// Index of the player's strongest carrier (ties to the lowest index).
    pub fn best(&self, player: Player) -> usize {
        self.best[player.index()]
    }

    /// Index of the player's second strongest carrier.
    pub fn second(&self, player: Player) -> usize {
        self.second[player.index()]
    }

    pub fn best_gain(&self, player: Player) -> f64 {
        self.gain(player, self.best(player))
    }

    pub fn second_gain(&self, player: Player) -> f64 {
        self.gain(player, self.second(player))
    }

    /// `g^B / g^S` for the given player.
    pub fn best_ratio(&self, player: Player) -> f64 {
        self.best_gain(player) / self.second_gain(player)
    }

    /// Relative gap between the follower's two best carriers,
    /// `(g₂^{B₂} - g₂^{S₂}) / g₂^{S₂}`.
    pub fn gamma_hat(&self) -> f64 {
        let (b, s) = (self.best_gain(Player::Follower), self.second_gain(Player::Follower));
        (b - s) / s
    }

    pub fn same_best(&self) -> bool {
        self.best[0] == self.best[1]
    }

    /// The same channel with the two players' roles exchanged.
    pub fn swapped(&self) -> Self {
        let [a, b] = self.gains.clone();
        Self::from_valid([b, a], self.sigma2, [self.rates[1], self.rates[0]])
    }
}

fn best_two(row: &[f64]) -> (usize, usize) {
    let mut best = 0;
    for (k, &g) in row.iter().enumerate() {
        if g > row[best] {
            best = k;
        }
    }
    let mut second = if best == 0 { 1 } else { 0 };
    for (k, &g) in row.iter().enumerate() {
        if k != best && g > row[second] {
            second = k;
        }
    }
    (best, second)
}

/// Draws the gains of trial `trial` under `config`.
///
/// The generator is a ChaCha8 stream keyed by `seed` and selected by `trial`,
/// so any trial can be recomputed on its own.
pub fn sample_channels(config: &GameConfig, seed: u64, trial: u64) -> ChannelRealization {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);

    let k = config.carriers;
    let shared = config.theta.sqrt();
    let own = (1.0 - config.theta).sqrt();
    let mut gains = [vec![0.0; k], vec![0.0; k]];
    for carrier in 0..k {
        let c = complex_normal(&mut rng);
        for row in gains.iter_mut() {
            let z = complex_normal(&mut rng);
            let (re, im) = (shared * c.0 + own * z.0, shared * c.1 + own * z.1);
            row[carrier] = (re * re + im * im).max(f64::MIN_POSITIVE);
        }
    }
    ChannelRealization::from_valid(gains, config.sigma2, config.rates)
}

/// Circularly symmetric complex Gaussian with `E|z|² = 1`.
fn complex_normal(rng: &mut impl Rng) -> (f64, f64) {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    (re * std::f64::consts::FRAC_1_SQRT_2, im * std::f64::consts::FRAC_1_SQRT_2)
}

/// Received SINR `g_n^k p_n^k / (σ² + g_m^k p_m^k)`.
pub fn sinr(gains: &ChannelRealization, alloc: &PowerAllocation, player: Player, carrier: usize) -> f64 {
    let own = alloc.power(player, carrier);
    if own == 0.0 {
        return 0.0;
    }
    effective_gain(gains, alloc.power(player.other(), carrier), player, carrier) * own
}

/// SINR per unit of own power, `g_n^k / (σ² + g_m^k p_m^k)`.
pub fn effective_gain(gains: &ChannelRealization, opp_power: f64, player: Player, carrier: usize) -> f64 {
    let interference = gains.gain(player.other(), carrier) * opp_power;
    gains.gain(player, carrier) / (gains.sigma2() + interference)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn realization(g1: &[f64], g2: &[f64], sigma2: f64) -> ChannelRealization {
        ChannelRealization::new([g1.to_vec(), g2.to_vec()], sigma2, [1.0, 1.0]).unwrap()
    }

    #[test]
    fn config_validation() {
        let model = EfficiencyModel::exp_block(100).unwrap();
        assert!(GameConfig::new(1, 1.0, [1.0; 2], 0.0, model.clone()).is_err());
        assert!(GameConfig::new(2, 0.0, [1.0; 2], 0.0, model.clone()).is_err());
        assert!(GameConfig::new(2, 1.0, [1.0, -1.0], 0.0, model.clone()).is_err());
        assert!(GameConfig::new(2, 1.0, [1.0; 2], 1.5, model.clone()).is_err());
        assert!(GameConfig::new(2, 1.0, [1.0; 2], 1.0, model).is_ok());
        let std = GameConfig::standard(4).unwrap();
        assert!((std.sigma2 - 0.1).abs() < 1e-15);
        assert!((std.snr_db() - 10.0).abs() < 1e-12);
    }

    #[test]
    fn realization_validation() {
        assert!(ChannelRealization::new([vec![1.0, 2.0], vec![1.0]], 1.0, [1.0; 2]).is_err());
        assert!(ChannelRealization::new([vec![1.0], vec![1.0]], 1.0, [1.0; 2]).is_err());
        assert!(matches!(
            ChannelRealization::new([vec![1.0, 0.0], vec![1.0, 2.0]], 1.0, [1.0; 2]),
            Err(ChannelError::Gain { user: 1, carrier: 1, .. })
        ));
    }

    #[test]
    fn best_and_second_with_ties() {
        let r = realization(&[3.0, 1.0, 3.0, 2.0], &[1.0, 1.0, 1.0, 1.0], 1.0);
        assert_eq!((r.best(Player::Leader), r.second(Player::Leader)), (0, 2));
        assert_eq!((r.best(Player::Follower), r.second(Player::Follower)), (0, 1));
        let r = realization(&[1.0, 5.0], &[4.0, 2.0], 1.0);
        assert_eq!((r.best(Player::Leader), r.second(Player::Leader)), (1, 0));
        assert_eq!(r.gamma_hat(), 1.0);
        assert!(!r.same_best());
    }

    #[test]
    fn sinr_examples() {
        let r = realization(&[2.0, 1.0], &[1.0, 1.0], 1.0);
        let mut alloc = PowerAllocation::zeros(2);
        alloc.set(Player::Leader, 0, 3.0);
        alloc.set(Player::Follower, 0, 5.0);
        assert_eq!(sinr(&r, &alloc, Player::Leader, 0), 1.0);

        let mut solo = PowerAllocation::zeros(2);
        solo.set(Player::Leader, 0, 3.0);
        assert_eq!(sinr(&r, &solo, Player::Leader, 0), 6.0);
        assert_eq!(sinr(&r, &solo, Player::Follower, 0), 0.0);
    }

    #[test]
    fn effective_gain_examples() {
        let r = realization(&[4.0, 1.0], &[2.0, 1.0], 1.0);
        assert_eq!(effective_gain(&r, 1.0, Player::Leader, 0), 4.0 / 3.0);
        assert_eq!(effective_gain(&r, 0.0, Player::Leader, 0), 4.0);
        let mut prev = f64::INFINITY;
        for p in [0.0, 1.0, 10.0, 1e3, 1e6, 1e12] {
            let h = effective_gain(&r, p, Player::Leader, 0);
            assert!(h < prev);
            prev = h;
        }
        assert!(prev < 1e-11);
    }

    #[test]
    fn full_correlation_gives_identical_rows() {
        let mut config = GameConfig::standard(16).unwrap();
        config.theta = 1.0;
        for trial in 0..50 {
            let r = sample_channels(&config, 9, trial);
            assert_eq!(r.row(Player::Leader), r.row(Player::Follower));
            assert_eq!(r.best(Player::Leader), r.best(Player::Follower));
        }
    }

    #[test]
    fn sampling_is_reproducible() {
        let config = GameConfig::standard(8).unwrap();
        assert_eq!(sample_channels(&config, 5, 17), sample_channels(&config, 5, 17));
        assert_ne!(sample_channels(&config, 5, 17), sample_channels(&config, 5, 18));
        assert_ne!(sample_channels(&config, 6, 17), sample_channels(&config, 5, 17));
    }

    #[test]
    fn swapping_exchanges_roles() {
        let r = realization(&[1.0, 5.0, 2.0], &[4.0, 2.0, 3.0], 0.5);
        let s = r.swapped();
        assert_eq!(s.row(Player::Leader), r.row(Player::Follower));
        assert_eq!(s.best(Player::Follower), r.best(Player::Leader));
        assert_eq!(s.swapped(), r);
    }
}
