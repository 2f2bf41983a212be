//! Probability that the current game is the true game, given one player's
//! view: game number `t`, own share length `s`, and the candidate secret `a`
//! that game `t` unmasks to.

use rand::Rng;
use serde::Serialize;

use super::{AnalysisError, Estimate, SecretDistribution};
use crate::dealer::{geometric_pmf, sample_geometric};
use crate::par::map_trials;
use crate::rng::trial_rng;

/// Geometric tails are enumerated until the remaining mass drops below this.
pub const TAIL_CUTOFF: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrueGameBound {
    pub value: f64,
    pub bound: f64,
}

fn check_view(n: usize, z: usize, beta: f64, share_len: usize, t: usize) -> Result<(), AnalysisError> {
    if !(beta > 0.0 && beta < 1.0) {
        return Err(AnalysisError::PreconditionViolated(format!("beta = {beta} is outside (0, 1)")));
    }
    if t == 0 || share_len <= t {
        return Err(AnalysisError::PreconditionViolated(format!("need share length {share_len} > t = {t} >= 1")));
    }
    if n < 2 || z == 0 {
        return Err(AnalysisError::PreconditionViolated(format!("n = {n}, z = {z}")));
    }
    Ok(())
}

/// `Pr(l = t | l >= t, y_t = a, s_i = share_len)` in closed form, with the
/// bound `z n β / (1 - β)`.
pub fn true_game_prob_closed(
    n: usize,
    z: usize,
    beta: f64,
    d_a: f64,
    share_len: usize,
    t: usize,
) -> Result<TrueGameBound, AnalysisError> {
    check_view(n, z, beta, share_len, t)?;
    let (nf, zf) = (n as f64, z as f64);
    let value = (nf - 1.0) * d_a * beta / ((1.0 - beta) / zf + (nf - 1.0) * beta * ((share_len - t) as f64 / zf + d_a));
    let bound = zf * nf * beta / (1.0 - beta);
    assert!(value <= bound, "closed form {value} above bound {bound}");
    Ok(TrueGameBound { value, bound })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McEstimate {
    pub estimate: Estimate,
    pub accepted: u64,
    pub proposals: u64,
    /// Fraction of proposals in the conditioning event.
    pub acceptance: Estimate,
}

const CHUNKS: u64 = 64;

/// Rejection sampler for the same conditional probability. Each proposal
/// draws `l`, `d`, the short player, the secret `y ~ D` and the fake
/// candidate of game `t`; the observer is player 0.
#[allow(clippy::too_many_arguments)]
pub fn true_game_prob_mc(
    n: usize,
    dist: &SecretDistribution,
    beta: f64,
    a: usize,
    share_len: usize,
    t: usize,
    proposals: u64,
    seed: u64,
) -> Result<McEstimate, AnalysisError> {
    let z = dist.z();
    check_view(n, z, beta, share_len, t)?;
    let (share_len, t) = (share_len as u64, t as u64);
    let counts = map_trials(CHUNKS, |chunk| {
        let mut rng = trial_rng(seed, chunk);
        let quota = proposals / CHUNKS + u64::from(chunk < proposals % CHUNKS);
        let (mut accepted, mut hits) = (0u64, 0u64);
        for _ in 0..quota {
            let l = sample_geometric(beta, &mut rng).expect("beta checked");
            let d = sample_geometric(beta, &mut rng).expect("beta checked");
            let observer_short = rng.random_range(0..n) == 0;
            let y = dist.sample(&mut rng);
            let fake = rng.random_range(0..z);
            let s = if observer_short { l - 1 } else { l + d - 1 };
            let y_t = if l == t { y } else { fake };
            if l >= t && y_t == a && s == share_len {
                accepted += 1;
                hits += u64::from(l == t);
            }
        }
        (accepted, hits)
    });
    let accepted: u64 = counts.iter().map(|c| c.0).sum();
    let hits: u64 = counts.iter().map(|c| c.1).sum();
    if accepted == 0 {
        return Err(AnalysisError::InsufficientConditioningMass);
    }
    Ok(McEstimate {
        estimate: Estimate::proportion(hits, accepted),
        accepted,
        proposals,
        acceptance: Estimate::proportion(accepted, proposals),
    })
}

/// Exact law of the dealer randomness restricted to one view, by enumeration
/// over `(short player?, l, d, y, fake candidate)` with `l, d` truncated at
/// [`TAIL_CUTOFF`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionedView {
    /// Probability of the view itself.
    pub mass: f64,
    /// `Pr(l = t | view)`.
    pub true_game_prob: f64,
    /// `Pr(y = a' | view)` for each `a'`.
    pub posterior: Vec<f64>,
    /// Upper bound on the probability left out by truncation.
    pub truncation: f64,
}

impl ConditionedView {
    pub fn max_posterior(&self) -> f64 {
        self.posterior.iter().copied().fold(0.0, f64::max)
    }
}

pub fn enumerate_view(
    n: usize,
    dist: &SecretDistribution,
    beta: f64,
    observed: usize,
    share_len: usize,
    t: usize,
) -> Result<ConditionedView, AnalysisError> {
    let z = dist.z();
    check_view(n, z, beta, share_len, t)?;
    let cutoff = (TAIL_CUTOFF.ln() / (1.0 - beta).ln()).ceil() as u64;
    let (share_len, t) = (share_len as u64, t as u64);
    let mut joint = vec![0.0; z];
    let mut true_game = 0.0;
    for observer_short in [true, false] {
        let w_short = if observer_short { 1.0 / n as f64 } else { (n - 1) as f64 / n as f64 };
        for l in 1..=cutoff {
            let w_l = geometric_pmf(beta, l);
            for d in 1..=cutoff {
                let s = if observer_short { l - 1 } else { l + d - 1 };
                if l < t || s != share_len {
                    continue;
                }
                let w = w_short * w_l * geometric_pmf(beta, d);
                for (y, joint_y) in joint.iter_mut().enumerate() {
                    for fake in 0..z {
                        let y_t = if l == t { y } else { fake };
                        if y_t == observed {
                            let mass = w * dist.prob(y) / z as f64;
                            *joint_y += mass;
                            if l == t {
                                true_game += mass;
                            }
                        }
                    }
                }
            }
        }
    }
    let mass: f64 = joint.iter().sum();
    if mass == 0.0 {
        return Err(AnalysisError::InsufficientConditioningMass);
    }
    Ok(ConditionedView {
        mass,
        true_game_prob: true_game / mass,
        posterior: joint.iter().map(|j| j / mass).collect(),
        truncation: 2.0 * (1.0 - beta).powf(cutoff as f64),
    })
}

/// Upper bound on the best posterior guess: `true_game_prob + D(b)`.
pub fn posterior_bound(tgp: f64, dist: &SecretDistribution) -> f64 {
    tgp + dist.d_b()
}
