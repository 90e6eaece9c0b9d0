//! Packet-success efficiency functions and the two scalar root problems that
//! every equilibrium formula depends on.
//!
//! The energy-efficient operating SINR `γ*` maximizes `f(x)/x` and is the
//! unique positive root of `x f'(x) = f(x)`. The leader's shared-carrier SINR
//! `β*` solves `(x - x²γ*) f'(x) = f(x)` on a bounded interval.
//!
//! Both equations are solved on the *log-slope* form `f'(x)/f(x)`, which stays
//! finite where `f` itself underflows (for `(1 - e^{-x})^M` with large `M`,
//! `f(x)` is below `f64::MIN_POSITIVE` for small `x`).

use std::fmt;
use std::sync::Arc;

use thiserror::Error;

/// Upper end of the bracket searched for `γ*`; `e^x` overflows just above it.
pub const X_MAX: f64 = 745.0;

/// Absolute bisection tolerance for both root problems.
pub const ROOT_TOL: f64 = 1e-12;

/// Number of log-spaced points scanned for sign changes of the `β*` equation.
pub const BETA_GRID_POINTS: usize = 10_000;

/// Keeps `β*` strictly below `1/γ*` so that `1 - γ*β* > 0`.
pub const BETA_MARGIN: f64 = 1e-9;

/// Lowest point of the `β*` scan, relative to the interval's upper end.
const BETA_GRID_SPAN: f64 = 1e-10;

const GAMMA_GRID_POINTS: usize = 4_000;
const GAMMA_GRID_LOW: f64 = 1e-8;
const MAX_BISECTIONS: usize = 200;

type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EfficiencyError {
    #[error("block length must be greater than 1, got {0}")]
    BlockLength(u32),
    #[error("efficiency function is not a valid sigmoid: {0}")]
    InvalidShape(String),
    #[error("x f'(x) = f(x) has no positive root on (0, {X_MAX}]")]
    NoRoot,
}

/// Shape of the efficiency function.
#[derive(Clone)]
pub enum EfficiencyKind {
    /// `f(x) = (1 - e^{-x})^M` for a block of `M` bits.
    ExpBlock { block_len: u32 },
    /// Arbitrary sigmoid supplied as closures.
    Custom {
        f: ScalarFn,
        f_prime: ScalarFn,
        f_prime_at_zero: f64,
    },
}

impl fmt::Debug for EfficiencyKind {
    fn fmt(&self, fmt: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EfficiencyKind::ExpBlock { block_len } => fmt
                .debug_struct("ExpBlock")
                .field("block_len", block_len)
                .finish(),
            EfficiencyKind::Custom {
                f_prime_at_zero, ..
            } => fmt
                .debug_struct("Custom")
                .field("f_prime_at_zero", f_prime_at_zero)
                .finish_non_exhaustive(),
        }
    }
}

/// The efficiency function `f`, mapping SINR to packet success probability.
#[derive(Debug, Clone)]
pub struct EfficiencyModel {
    kind: EfficiencyKind,
}

impl EfficiencyModel {
    pub fn exp_block(block_len: u32) -> Result<Self, EfficiencyError> {
        if block_len <= 1 {
            return Err(EfficiencyError::BlockLength(block_len));
        }
        Ok(Self {
            kind: EfficiencyKind::ExpBlock { block_len },
        })
    }

    /// Wraps a user-supplied sigmoid after checking its shape on a sample grid:
    /// `f(0) = 0`, `f` nondecreasing with values in `[0, 1)`, and `f_prime`
    /// consistent with a central difference of `f`.
    pub fn custom<F, D>(f: F, f_prime: D, f_prime_at_zero: f64) -> Result<Self, EfficiencyError>
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
        D: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        if !(f_prime_at_zero >= 0.0 && f_prime_at_zero.is_finite()) {
            return Err(EfficiencyError::InvalidShape(format!(
                "f'(0+) must be finite and nonnegative, got {f_prime_at_zero}"
            )));
        }
        let model = Self {
            kind: EfficiencyKind::Custom {
                f: Arc::new(f),
                f_prime: Arc::new(f_prime),
                f_prime_at_zero,
            },
        };
        model.check_shape()?;
        Ok(model)
    }

    pub fn kind(&self) -> &EfficiencyKind {
        &self.kind
    }

    pub fn block_len(&self) -> Option<u32> {
        match self.kind {
            EfficiencyKind::ExpBlock { block_len } => Some(block_len),
            EfficiencyKind::Custom { .. } => None,
        }
    }

    /// `f(x)`.
    pub fn value(&self, x: f64) -> f64 {
        match &self.kind {
            EfficiencyKind::ExpBlock { block_len } => (-(-x).exp_m1()).powi(*block_len as i32),
            EfficiencyKind::Custom { f, .. } => f(x),
        }
    }

    /// `f'(x)`.
    pub fn derivative(&self, x: f64) -> f64 {
        match &self.kind {
            EfficiencyKind::ExpBlock { block_len } => {
                let m = *block_len as i32;
                f64::from(*block_len) * (-x).exp() * (-(-x).exp_m1()).powi(m - 1)
            }
            EfficiencyKind::Custom { f_prime, .. } => f_prime(x),
        }
    }

    /// Right derivative `f'(0+)`.
    pub fn derivative_at_zero(&self) -> f64 {
        match &self.kind {
            EfficiencyKind::ExpBlock { .. } => 0.0,
            EfficiencyKind::Custom {
                f_prime_at_zero, ..
            } => *f_prime_at_zero,
        }
    }

    /// `f'(x) / f(x)` for `x > 0`; NaN where a custom `f` evaluates to zero.
    pub fn log_slope(&self, x: f64) -> f64 {
        match &self.kind {
            EfficiencyKind::ExpBlock { block_len } => f64::from(*block_len) / x.exp_m1(),
            EfficiencyKind::Custom { f, f_prime, .. } => {
                let fx = f(x);
                if fx > 0.0 {
                    f_prime(x) / fx
                } else {
                    f64::NAN
                }
            }
        }
    }

    fn check_shape(&self) -> Result<(), EfficiencyError> {
        let f0 = self.value(0.0);
        if f0.abs() > 1e-12 {
            return Err(EfficiencyError::InvalidShape(format!("f(0) = {f0}")));
        }
        let grid = shape_grid();
        let mut prev = f0;
        for &x in &grid {
            let fx = self.value(x);
            // f(x) < 1 mathematically, but saturates to exactly 1.0 in floating point.
            if !(0.0..=1.0).contains(&fx) {
                return Err(EfficiencyError::InvalidShape(format!("f({x}) = {fx} outside [0, 1]")));
            }
            if fx < prev - 1e-15 {
                return Err(EfficiencyError::InvalidShape(format!("f decreases near x = {x}")));
            }
            prev = fx;
            let (analytic, numeric) = (self.derivative(x), central_difference(self, x));
            if !derivative_agrees(analytic, numeric, x) {
                return Err(EfficiencyError::InvalidShape(format!(
                    "f'({x}) = {analytic} but finite difference gives {numeric}"
                )));
            }
        }
        Ok(())
    }
}

/// Sample points used to validate custom efficiency functions.
pub(crate) fn shape_grid() -> Vec<f64> {
    log_grid(1e-4, 100.0, 241)
}

fn difference_step(x: f64) -> f64 {
    1e-6 * x.max(1e-3)
}

/// Central finite difference of `f` at `x` with a step scaled to `x`.
pub fn central_difference(model: &EfficiencyModel, x: f64) -> f64 {
    let h = difference_step(x);
    let lo = (x - h).max(0.0);
    (model.value(x + h) - model.value(lo)) / (x + h - lo)
}

/// Whether an analytic derivative matches its central difference within
/// relative 1e-6, plus the rounding error of differencing values of size ≤ 1
/// that carry a few hundred ulps of evaluation error.
pub(crate) fn derivative_agrees(analytic: f64, numeric: f64, x: f64) -> bool {
    let rounding = 2048.0 * f64::EPSILON / difference_step(x);
    (analytic - numeric).abs() <= 1e-6 * analytic.abs().max(numeric.abs()) + rounding
}

/// `n` log-spaced points from `lo` to `hi` inclusive.
pub(crate) fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    debug_assert!(lo > 0.0 && hi >= lo && n >= 2);
    let (a, b) = (lo.ln(), hi.ln());
    let step = (b - a) / (n - 1) as f64;
    let mut grid: Vec<f64> = (0..n).map(|i| (a + step * i as f64).exp()).collect();
    grid[0] = lo;
    grid[n - 1] = hi;
    grid
}

/// Bisection on a bracket `[lo, hi]` where `g` changes sign, stopping when the
/// bracket is narrower than `tol` or can no longer be split.
pub(crate) fn bisect(mut lo: f64, mut hi: f64, tol: f64, g: impl Fn(f64) -> f64) -> f64 {
    let mut lo_positive = g(lo) > 0.0;
    for _ in 0..MAX_BISECTIONS {
        if hi - lo <= tol {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let g_mid = g(mid);
        if g_mid == 0.0 {
            return mid;
        }
        if (g_mid > 0.0) == lo_positive {
            lo = mid;
            lo_positive = g_mid > 0.0;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// The energy-efficient SINR, i.e. the maximizer of `f(x)/x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaStar {
    pub value: f64,
    /// `value · f'(value) - f(value)`.
    pub residual: f64,
}

/// Leader's SINR when sharing its best carrier with the follower.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BetaStar {
    pub value: f64,
    /// `f(value)(1 - value·γ*)/value`.
    pub objective: f64,
}

/// Solves `x f'(x) = f(x)` for its positive root.
///
/// Scans a log grid on `(0, X_MAX]` from the top down for the sign change of
/// `x f'(x)/f(x) - 1` and refines it by bisection to [`ROOT_TOL`].
pub fn solve_gamma_star(model: &EfficiencyModel) -> Result<GammaStar, EfficiencyError> {
    let gap = |x: f64| x * model.log_slope(x) - 1.0;
    let grid = log_grid(GAMMA_GRID_LOW, X_MAX, GAMMA_GRID_POINTS);

    let mut upper: Option<(f64, f64)> = None;
    for &x in grid.iter().rev() {
        let g = gap(x);
        if !g.is_finite() {
            continue;
        }
        match upper {
            Some((hi, g_hi)) if g_hi < 0.0 && g >= 0.0 => {
                let value = if g == 0.0 { x } else { bisect(x, hi, ROOT_TOL, gap) };
                let residual = value * model.derivative(value) - model.value(value);
                return Ok(GammaStar { value, residual });
            }
            _ => upper = Some((x, g)),
        }
    }
    Err(EfficiencyError::NoRoot)
}

/// Solves `(x - x²γ*) f'(x) = f(x)` on `(0, min(γ̂/(1+γ*(1+γ̂)), (1-ε)/γ*)]`.
///
/// Every sign change on a [`BETA_GRID_POINTS`]-point log grid is refined by
/// bisection; the root with the largest `f(x)(1 - xγ*)/x` is returned.
/// `None` means the only solution is `x = 0`.
pub fn solve_beta_star(
    model: &EfficiencyModel,
    gamma_star: &GammaStar,
    gamma_hat: f64,
) -> Option<BetaStar> {
    let gs = gamma_star.value;
    if gamma_hat.is_nan() || gamma_hat <= 0.0 {
        return None;
    }
    let upper = (gamma_hat / (1.0 + gs * (1.0 + gamma_hat))).min((1.0 - BETA_MARGIN) / gs);
    if !(upper > 0.0 && upper.is_finite()) {
        return None;
    }
    let lower = upper * BETA_GRID_SPAN;
    if lower.is_nan() || lower <= 0.0 {
        return None;
    }

    let gap = |x: f64| x * (1.0 - x * gs) * model.log_slope(x) - 1.0;
    let objective = |x: f64| model.value(x) * (1.0 - x * gs) / x;

    let grid = log_grid(lower, upper, BETA_GRID_POINTS);
    let mut roots = Vec::new();
    let mut prev: Option<(f64, f64)> = None;
    for &x in &grid {
        let g = gap(x);
        if !g.is_finite() {
            prev = None;
            continue;
        }
        if g == 0.0 {
            roots.push(x);
        } else if let Some((x_prev, g_prev)) = prev {
            if g_prev != 0.0 && (g_prev > 0.0) != (g > 0.0) {
                roots.push(bisect(x_prev, x, ROOT_TOL, gap));
            }
        }
        prev = Some((x, g));
    }

    roots
        .into_iter()
        .map(|value| BetaStar {
            value,
            objective: objective(value),
        })
        .fold(None, |best: Option<BetaStar>, cand| match best {
            Some(b) if b.objective >= cand.objective => Some(b),
            _ => Some(cand),
        })
}

/// Whether an exact Stackelberg equilibrium is guaranteed to exist, i.e.
/// whether `f'(0+) = 0`.
pub fn existence_guaranteed(model: &EfficiencyModel) -> bool {
    model.derivative_at_zero() == 0.0
}
