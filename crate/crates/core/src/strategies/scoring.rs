use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::StrategyProfile;
use crate::channel::Transcript;
use crate::dealer::DealerTruth;
use crate::player::HaltReason;
use crate::types::PlayerId;

/// Payoffs of one player: secret alone, secret shared, no secret, and the
/// bonus for tricking someone into a wrong value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UtilityProfile {
    pub u_plus: f64,
    pub u: f64,
    pub u_minus: f64,
    #[serde(default)]
    pub u_f: f64,
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("utilities must satisfy U- < U <= U+ (got U+={u_plus}, U={u}, U-={u_minus})")]
pub struct NotLearningPreferring {
    pub u_plus: f64,
    pub u: f64,
    pub u_minus: f64,
}

impl UtilityProfile {
    pub fn new(u_plus: f64, u: f64, u_minus: f64) -> Self {
        Self { u_plus, u, u_minus, u_f: 0.0 }
    }

    pub fn validate(&self) -> Result<(), NotLearningPreferring> {
        if self.u_minus < self.u && self.u <= self.u_plus {
            Ok(())
        } else {
            Err(NotLearningPreferring { u_plus: self.u_plus, u: self.u, u_minus: self.u_minus })
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PlayerOutcome {
    pub output: Option<u32>,
    pub correct: bool,
    pub halt: Option<HaltReason>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OutcomeRecord {
    pub players: Vec<PlayerOutcome>,
    /// Players who output a value other than the secret.
    pub tricked: Vec<PlayerId>,
    pub utilities: Vec<f64>,
    /// Deviators whose run left someone outside their coalition with a wrong value.
    pub uf_credit: Vec<bool>,
}

impl OutcomeRecord {
    pub fn retrieved(&self) -> impl Iterator<Item = PlayerId> + '_ {
        self.players.iter().enumerate().filter(|(_, o)| o.correct).map(|(i, _)| PlayerId(i))
    }
}

pub fn score_outcome(
    transcript: &Transcript,
    truth: &DealerTruth,
    profile: &StrategyProfile,
    utilities: &[UtilityProfile],
) -> OutcomeRecord {
    let n = transcript.n();
    assert_eq!(utilities.len(), n, "one utility profile per player");
    let secret = truth.secret_element();
    let players: Vec<PlayerOutcome> = (0..n)
        .map(|i| {
            let output = transcript.outputs[i];
            PlayerOutcome {
                output: output.map(|v| v.value()),
                correct: output == Some(secret),
                halt: transcript.halts[i],
            }
        })
        .collect();
    let tricked: Vec<PlayerId> =
        (0..n).filter(|&i| players[i].output.is_some() && !players[i].correct).map(PlayerId).collect();
    let retrieved: Vec<PlayerId> = (0..n).filter(|&i| players[i].correct).map(PlayerId).collect();

    let utilities_out = (0..n)
        .map(|i| {
            let u = &utilities[i];
            if !players[i].correct {
                return u.u_minus;
            }
            let own = profile.coalition_of(PlayerId(i));
            if retrieved.iter().all(|r| own.contains(r)) {
                u.u_plus
            } else {
                u.u
            }
        })
        .collect();
    let uf_credit = (0..n)
        .map(|i| {
            let own = profile.coalition_of(PlayerId(i));
            profile.kinds[i].is_deviation() && tricked.iter().any(|t| !own.contains(t))
        })
        .collect();
    OutcomeRecord { players, tricked, utilities: utilities_out, uf_credit }
}
