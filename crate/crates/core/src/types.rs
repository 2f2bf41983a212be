use std::fmt;

use serde::{Deserialize, Serialize};

use crate::field::PrimeModulus;

/// Zero-based player index. The player's Shamir abscissa is `index + 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PlayerId(pub usize);

impl PlayerId {
    #[inline]
    pub fn abscissa(self) -> u32 {
        self.0 as u32 + 1
    }

    pub fn all(n: usize) -> impl Iterator<Item = PlayerId> {
        (0..n).map(PlayerId)
    }
}

impl fmt::Display for PlayerId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Serialized as the number 1 or 2.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum Stage {
    One,
    Two,
}

impl Stage {
    pub fn number(self) -> u8 {
        match self {
            Stage::One => 1,
            Stage::Two => 2,
        }
    }

    pub fn from_number(n: u8) -> Option<Stage> {
        match n {
            1 => Some(Stage::One),
            2 => Some(Stage::Two),
            _ => None,
        }
    }

    pub(crate) fn slot(self) -> usize {
        usize::from(self.number() - 1)
    }
}

impl TryFrom<u8> for Stage {
    type Error = String;

    fn try_from(n: u8) -> Result<Self, Self::Error> {
        Stage::from_number(n).ok_or_else(|| format!("stage must be 1 or 2, got {n}"))
    }
}

impl From<Stage> for u8 {
    fn from(stage: Stage) -> u8 {
        stage.number()
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.number())
    }
}

/// Public parameters every share carries in its header.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ProtocolParams {
    pub p: PrimeModulus,
    pub n: usize,
    /// Stage-1 (masked secret) threshold.
    pub m: usize,
    /// Stage-2 (mask and indicator) threshold.
    pub k: usize,
}

impl ProtocolParams {
    pub fn players(&self) -> impl Iterator<Item = PlayerId> {
        PlayerId::all(self.n)
    }

    /// Position of `receiver` among the `n - 1` players other than `owner`.
    #[inline]
    pub fn other_slot(owner: PlayerId, receiver: PlayerId) -> usize {
        debug_assert_ne!(owner, receiver);
        if receiver.0 < owner.0 {
            receiver.0
        } else {
            receiver.0 - 1
        }
    }
}
