use serde::Serialize;

use crate::dealer::TagSet;
use crate::field::{FieldElement, PrimeModulus};
use crate::types::{PlayerId, Stage};

/// A broadcast envelope. The channel stamps `sender`; payload integrity rests
/// on the per-receiver tags.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Message {
    pub sender: PlayerId,
    pub game: u64,
    pub stage: Stage,
    pub payload: Payload,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Payload {
    Stage1 {
        masked: FieldElement,
        tags: TagSet,
    },
    Stage2 {
        mask: FieldElement,
        indicator: FieldElement,
        tags: TagSet,
    },
    /// End-of-share signal ⊥. Carries no tag.
    Bottom,
}

impl Payload {
    /// Field encoding of the payload body; ⊥ is the single element zero.
    pub fn elements(&self, p: PrimeModulus) -> Vec<FieldElement> {
        match self {
            Payload::Stage1 { masked, .. } => vec![*masked],
            Payload::Stage2 { mask, indicator, .. } => vec![*mask, *indicator],
            Payload::Bottom => vec![p.zero()],
        }
    }

    pub fn is_bottom(&self) -> bool {
        matches!(self, Payload::Bottom)
    }

    pub fn tags(&self) -> Option<&TagSet> {
        match self {
            Payload::Stage1 { tags, .. } | Payload::Stage2 { tags, .. } => Some(tags),
            Payload::Bottom => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum HaltReason {
    SecretRevealed,
    CheaterDetected,
    Stalled,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Action {
    Broadcast(Message),
    Output(FieldElement),
    Halt(HaltReason),
}

/// What a player made of one delivery.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Accepted,
    Bottom,
    /// Failed authentication, or a payload of the wrong shape for its stage.
    Rejected,
    /// Duplicate, stale, or outside the games this share can verify.
    Ignored,
    /// Recipient had already halted.
    Dropped,
}
