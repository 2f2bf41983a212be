//! Closed-form bounds and Monte Carlo estimators for the protocol's
//! parameters.

mod campaigns;
mod stats;
mod true_game;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use campaigns::{
    equilibrium_mc, honest_short_fraction, mean_long_share_bytes, mean_true_game, measure_forgery_rate,
    EquilibriumConfig, EquilibriumReport, ForgeryReport, ProfileRow, ProfileVerdict, ShareSizeReport,
};
pub use stats::Estimate;
pub use true_game::{
    enumerate_view, posterior_bound, true_game_prob_closed, true_game_prob_mc, ConditionedView, McEstimate,
    TrueGameBound, TAIL_CUTOFF,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalysisError {
    #[error("utilities must satisfy U- < U <= U+ (got U+={u_plus}, U={u}, U-={u_minus})")]
    NotLearningPreferring { u_plus: f64, u: f64, u_minus: f64 },
    #[error("precondition violated: {0}")]
    PreconditionViolated(String),
    #[error("no proposal satisfied the conditioning event")]
    InsufficientConditioningMass,
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),
    #[error(transparent)]
    Dealer(#[from] crate::dealer::DealerError),
}

/// Prior over the ordered secret set `{0, .., z - 1}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct SecretDistribution {
    probs: Vec<f64>,
}

impl SecretDistribution {
    pub fn new(probs: Vec<f64>) -> Result<Self, AnalysisError> {
        if probs.is_empty() {
            return Err(AnalysisError::InvalidDistribution("empty secret set".into()));
        }
        if probs.iter().any(|&q| !q.is_finite() || q < 0.0) {
            return Err(AnalysisError::InvalidDistribution("negative or non-finite probability".into()));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(AnalysisError::InvalidDistribution(format!("probabilities sum to {total}")));
        }
        Ok(Self { probs })
    }

    pub fn uniform(z: usize) -> Self {
        Self { probs: vec![1.0 / z as f64; z] }
    }

    pub fn z(&self) -> usize {
        self.probs.len()
    }

    pub fn prob(&self, a: usize) -> f64 {
        self.probs[a]
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// Most likely secret, smallest index on ties.
    pub fn b(&self) -> usize {
        let mut best = 0;
        for (i, &q) in self.probs.iter().enumerate() {
            if q > self.probs[best] {
                best = i;
            }
        }
        best
    }

    pub fn d_b(&self) -> f64 {
        self.probs[self.b()]
    }

    /// Inverse-CDF draw from one uniform in [0, 1).
    pub fn sample<R: rand::Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (i, &q) in self.probs.iter().enumerate() {
            acc += q;
            if u < acc {
                return i;
            }
        }
        self.probs.iter().rposition(|&q| q > 0.0).unwrap_or(0)
    }
}

impl TryFrom<Vec<f64>> for SecretDistribution {
    type Error = AnalysisError;

    fn try_from(probs: Vec<f64>) -> Result<Self, Self::Error> {
        Self::new(probs)
    }
}

impl From<SecretDistribution> for Vec<f64> {
    fn from(d: SecretDistribution) -> Self {
        d.probs
    }
}

/// `c_i = (U - U-) / (U+ - U-)`.
pub fn compute_ci(u_plus: f64, u: f64, u_minus: f64) -> Result<f64, AnalysisError> {
    if !(u_minus < u && u <= u_plus) {
        return Err(AnalysisError::NotLearningPreferring { u_plus, u, u_minus });
    }
    Ok((u - u_minus) / (u_plus - u_minus))
}

fn beta_cap(c: f64, d_b: f64, z: usize, n: usize) -> f64 {
    let gap = c - d_b;
    gap / (gap + 2.0 * (z * n) as f64 + 1.0)
}

/// Largest admissible β: the minimum over players of `(c_i - D(b)) / (c_i - D(b) + 2zn + 1)`.
pub fn compute_beta0(c_list: &[f64], dist: &SecretDistribution, n: usize) -> Result<f64, AnalysisError> {
    let c0 = c_list.iter().copied().fold(f64::INFINITY, f64::min);
    if c_list.is_empty() {
        return Err(AnalysisError::PreconditionViolated("no players".into()));
    }
    let d_b = dist.d_b();
    if d_b >= c0 {
        return Err(AnalysisError::PreconditionViolated(format!("D(b) = {d_b} is not below c0 = {c0}")));
    }
    Ok(c_list.iter().map(|&c| beta_cap(c, d_b, dist.z(), n)).fold(f64::INFINITY, f64::min))
}

/// Whether β keeps player `i` from profiting by deviating:
/// `β < (c_i - D(b)) / (c_i - D(b) + 2zn + 1)`.
pub fn deviation_cap_check(c_i: f64, d_b: f64, z: usize, n: usize, beta: f64) -> bool {
    c_i > d_b && beta < beta_cap(c_i, d_b, z, n)
}

/// Every number `analyze` reports for one configuration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundsReport {
    pub c: Vec<f64>,
    pub c0: f64,
    pub beta0: Option<f64>,
    pub beta: f64,
    pub d_b: f64,
    pub b: usize,
    /// True-game probability and its bound at game `t` with share size `s` and observed candidate `b`.
    pub true_game: Option<TrueGameBound>,
    pub posterior_bound: Option<f64>,
    /// MAC forgery bound per received payload, `L / p` with `L = 2`.
    pub forgery_bound: f64,
    /// Probability of a correct blind guess, `D(b)`.
    pub guess_probability: f64,
    pub admissible_distribution: bool,
    pub admissible_beta: bool,
}

pub fn bounds_report(
    utilities: &[crate::strategies::UtilityProfile],
    dist: &SecretDistribution,
    n: usize,
    beta: f64,
    p: u32,
    view_point: (usize, usize),
) -> Result<BoundsReport, AnalysisError> {
    let c = utilities.iter().map(|u| compute_ci(u.u_plus, u.u, u.u_minus)).collect::<Result<Vec<_>, _>>()?;
    let c0 = c.iter().copied().fold(f64::INFINITY, f64::min);
    let beta0 = compute_beta0(&c, dist, n).ok();
    let (share, t) = view_point;
    let true_game = true_game_prob_closed(n, dist.z(), beta, dist.d_b(), share, t).ok();
    Ok(BoundsReport {
        admissible_distribution: dist.d_b() < c0,
        admissible_beta: beta0.is_some_and(|b0| beta < b0),
        posterior_bound: true_game.map(|tg| posterior_bound(tg.value, dist)),
        c,
        c0,
        beta0,
        beta,
        d_b: dist.d_b(),
        b: dist.b(),
        true_game,
        forgery_bound: 2.0 / f64::from(p),
        guess_probability: dist.d_b(),
    })
}
