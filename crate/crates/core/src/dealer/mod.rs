//! The non-interactive dealer.
//!
//! A deal draws the true-game index `l` and tail length `d` from G(β), builds
//! `L + 1 = l + d` games of masked candidate secrets, and hands one player the
//! short share (`l - 1` full cells) while everyone else gets `L` full cells.
//! Every share ends with a half cell carrying only stage-1 material.
//!
//! Randomness is drawn from one stream in a fixed order: `l`, `d`, candidate
//! secrets, masks, sharing polynomials, MAC keys, then the short-player
//! assignment.

mod format;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use format::{ShareFormatError, SHARE_HEADER_LEN};

use crate::field::{sample_uniform, smallest_prime_at_least, FieldElement, FieldError, PrimeModulus};
use crate::itmac::{self, MacKey, Tag};
use crate::rng::{seeded, SimRng};
use crate::shamir::{Polynomial, SharePoint, Threshold};
use crate::types::{PlayerId, ProtocolParams, Stage};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DealerError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("thresholds must satisfy 2 <= k <= m-1 and m < n (got n={n}, m={m}, k={k})")]
    InvalidThreshold { n: usize, m: usize, k: usize },
    #[error(transparent)]
    Field(#[from] FieldError),
}

/// Inputs to a deal. Secrets are indices `0..z` into the ordered secret set,
/// encoded as the field elements `0..z`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DealerParams {
    pub secret: u32,
    pub beta: f64,
    pub m: usize,
    pub k: usize,
    pub n: usize,
    pub secret_set_size: u32,
    pub seed: u64,
}

impl DealerParams {
    pub fn validate(&self) -> Result<(), DealerError> {
        let Self { n, m, k, .. } = *self;
        if !(2 <= k && k < m && m < n) {
            return Err(DealerError::InvalidThreshold { n, m, k });
        }
        check_beta(self.beta)?;
        if self.secret_set_size == 0 {
            return Err(DealerError::InvalidParameter("secret set is empty".into()));
        }
        if self.secret >= self.secret_set_size {
            return Err(DealerError::InvalidParameter(format!(
                "secret {} is not in a set of size {}",
                self.secret, self.secret_set_size
            )));
        }
        Ok(())
    }

    /// Smallest prime with room for the secret set, `n` abscissas, and MAC
    /// forgery probability at most β per payload element.
    pub fn field(&self) -> Result<PrimeModulus, DealerError> {
        check_beta(self.beta)?;
        let inv_beta = (1.0 / self.beta).ceil();
        if inv_beta >= f64::from(u32::MAX) {
            return Err(DealerError::Field(FieldError::OutOfRange(u64::MAX)));
        }
        let lower = u64::from(self.secret_set_size).max(self.n as u64 + 1).max(inv_beta as u64 + 1);
        Ok(smallest_prime_at_least(lower)?)
    }

    pub fn protocol(&self) -> Result<ProtocolParams, DealerError> {
        Ok(ProtocolParams { p: self.field()?, n: self.n, m: self.m, k: self.k })
    }
}

fn check_beta(beta: f64) -> Result<(), DealerError> {
    if beta > 0.0 && beta < 1.0 {
        Ok(())
    } else {
        Err(DealerError::InvalidParameter(format!("beta = {beta} is outside (0, 1)")))
    }
}

/// Draws from G(β) on {1, 2, ...} by inverting the CDF at one uniform draw.
pub fn sample_geometric<R: Rng + ?Sized>(beta: f64, rng: &mut R) -> Result<u64, DealerError> {
    check_beta(beta)?;
    // u in (0, 1]
    let u = 1.0 - rng.random::<f64>();
    let draws = (u.ln() / (-beta).ln_1p()).ceil();
    Ok(if draws.is_finite() && draws >= 1.0 { draws.min(u64::MAX as f64) as u64 } else { 1 })
}

/// P(X = t) for X ~ G(β).
pub fn geometric_pmf(beta: f64, t: u64) -> f64 {
    if t == 0 {
        0.0
    } else {
        beta * (1.0 - beta).powf((t - 1) as f64)
    }
}

/// Hidden ground truth of a deal. Only test harnesses and scoring see this.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DealerTruth {
    pub p: PrimeModulus,
    /// Index of the true game, 1-based.
    pub l: u64,
    pub d: u64,
    /// Number of full games on a long share, `l + d - 1`.
    pub total_games: u64,
    pub short_player: PlayerId,
    pub secret: u32,
    /// `secrets[j - 1]` is the candidate secret of game `j`, for `j` in `1..=L + 1`.
    /// Entry `L + 1` is the dummy behind the long players' half cell.
    pub secrets: Vec<u32>,
    pub masks: Vec<u32>,
}

impl DealerTruth {
    pub fn indicator(&self, game: u64) -> bool {
        game == self.l
    }

    pub fn secret_element(&self) -> FieldElement {
        self.p.element(u64::from(self.secret))
    }

    pub fn share_len(&self, player: PlayerId) -> u64 {
        if player == self.short_player {
            self.l - 1
        } else {
            self.total_games
        }
    }
}

/// Per-receiver tags of one broadcast, `n - 1` of them in receiver order
/// skipping the sender.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TagSet(pub Vec<Tag>);

impl TagSet {
    pub fn for_receiver(&self, sender: PlayerId, receiver: PlayerId) -> Option<Tag> {
        if sender == receiver {
            return None;
        }
        self.0.get(ProtocolParams::other_slot(sender, receiver)).copied()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Stage1Material {
    pub masked: SharePoint,
    pub tags: TagSet,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Stage2Material {
    pub mask: SharePoint,
    pub indicator: SharePoint,
    pub tags: TagSet,
}

impl Stage2Material {
    pub fn payload(&self) -> [FieldElement; 2] {
        [self.mask.y, self.indicator.y]
    }
}

/// Dealt material for one two-stage game.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GameCell {
    pub stage1: Stage1Material,
    pub stage2: Stage2Material,
}

/// The trailing stage-1-only cell of every share.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HalfCell {
    pub stage1: Stage1Material,
}

/// Verification keys held by one receiver: one per (other sender, game, stage)
/// for games `1..=cells + 1`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KeyTable {
    owner: PlayerId,
    n: usize,
    keys: Vec<MacKey>,
}

impl KeyTable {
    pub(crate) fn from_keys(owner: PlayerId, n: usize, keys: Vec<MacKey>) -> Self {
        debug_assert_eq!(keys.len() % (2 * (n - 1)), 0);
        Self { owner, n, keys }
    }

    pub fn games(&self) -> u64 {
        (self.keys.len() / (2 * (self.n - 1))) as u64
    }

    fn index(&self, sender: PlayerId, game: u64, stage: Stage) -> Option<usize> {
        if sender == self.owner || sender.0 >= self.n || game == 0 || game > self.games() {
            return None;
        }
        let per_game = 2 * (self.n - 1);
        Some(
            (game as usize - 1) * per_game
                + stage.slot() * (self.n - 1)
                + ProtocolParams::other_slot(self.owner, sender),
        )
    }

    pub fn get(&self, sender: PlayerId, game: u64, stage: Stage) -> Option<&MacKey> {
        self.index(sender, game, stage).map(|i| &self.keys[i])
    }

    pub fn keys(&self) -> &[MacKey] {
        &self.keys
    }
}

/// Everything one player receives from the dealer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlayerShare {
    pub params: ProtocolParams,
    pub owner: PlayerId,
    pub cells: Vec<GameCell>,
    pub half: HalfCell,
    pub verify_keys: KeyTable,
}

impl PlayerShare {
    /// Number of full games, `s_i`.
    pub fn len(&self) -> u64 {
        self.cells.len() as u64
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    /// Game number of the trailing half cell, `s_i + 1`.
    pub fn half_game(&self) -> u64 {
        self.len() + 1
    }

    pub fn cell(&self, game: u64) -> Option<&GameCell> {
        game.checked_sub(1).and_then(|i| self.cells.get(i as usize))
    }

    /// Stage-1 material for `game`, including the half cell.
    pub fn stage1(&self, game: u64) -> Option<&Stage1Material> {
        if game == self.half_game() {
            Some(&self.half.stage1)
        } else {
            self.cell(game).map(|c| &c.stage1)
        }
    }
}

/// Output of a deal: shares indexed by player, plus the hidden truth.
#[derive(Debug, Clone)]
pub struct Deal {
    pub shares: Vec<PlayerShare>,
    pub truth: DealerTruth,
}

pub fn deal(params: &DealerParams) -> Result<Deal, DealerError> {
    params.validate()?;
    let mut rng = seeded(params.seed);
    let l = sample_geometric(params.beta, &mut rng)?;
    let d = sample_geometric(params.beta, &mut rng)?;
    build(params, &mut rng, l, d, None)
}

/// Deal with `l`, `d` and optionally the short player fixed instead of drawn.
/// The remaining draws follow the usual order. Intended for tests.
pub fn deal_forced(params: &DealerParams, l: u64, d: u64, short_player: Option<PlayerId>) -> Result<Deal, DealerError> {
    params.validate()?;
    if l == 0 || d == 0 {
        return Err(DealerError::InvalidParameter("l and d must be at least 1".into()));
    }
    if short_player.is_some_and(|s| s.0 >= params.n) {
        return Err(DealerError::InvalidParameter("short player out of range".into()));
    }
    let mut rng = seeded(params.seed);
    build(params, &mut rng, l, d, short_player)
}

struct GamePolys {
    masked: Vec<SharePoint>,
    stage2: Option<(Vec<SharePoint>, Vec<SharePoint>)>,
}

fn build(
    params: &DealerParams,
    rng: &mut SimRng,
    l: u64,
    d: u64,
    forced_short: Option<PlayerId>,
) -> Result<Deal, DealerError> {
    let protocol = params.protocol()?;
    let ProtocolParams { p, n, m, k } = protocol;
    let total = l + d - 1;
    let games = (total + 1) as usize;

    // Candidate secrets: y at game l, i.i.d. uniform over Y elsewhere (incl. the dummy game L + 1).
    let secrets: Vec<u32> = (1..=games as u64)
        .map(|j| if j == l { params.secret } else { rng.random_range(0..params.secret_set_size) })
        .collect();
    let masks: Vec<FieldElement> = (0..games).map(|_| sample_uniform(rng, p)).collect();

    let polys: Vec<GamePolys> = (0..games)
        .map(|j| {
            let game = j as u64 + 1;
            let masked_value = p.element(u64::from(secrets[j])) + masks[j];
            let masked = Polynomial::random(masked_value, Threshold(m), rng).points(n);
            let stage2 = (game <= total).then(|| {
                let mask = Polynomial::random(masks[j], Threshold(k), rng).points(n);
                let flag = if game == l { p.one() } else { p.zero() };
                let indicator = Polynomial::random(flag, Threshold(k), rng).points(n);
                (mask, indicator)
            });
            GamePolys { masked, stage2 }
        })
        .collect();

    // keys[game][stage][sender][receiver]
    let key_slot = |game: usize, stage: Stage, sender: usize, receiver: usize| {
        ((game * 2 + stage.slot()) * n + sender) * n + receiver
    };
    let mut keys: Vec<Option<MacKey>> = vec![None; games * 2 * n * n];
    for game in 0..games {
        for stage in [Stage::One, Stage::Two] {
            for sender in 0..n {
                for receiver in (0..n).filter(|&r| r != sender) {
                    keys[key_slot(game, stage, sender, receiver)] = Some(itmac::keygen(rng, p));
                }
            }
        }
    }

    let short_player = match forced_short {
        Some(s) => s,
        None => PlayerId(rng.random_range(0..n)),
    };

    // Each key authenticates at most one payload.
    let mut used = vec![false; keys.len()];
    let mut tag_all = |game: usize, stage: Stage, sender: usize, payload: &[FieldElement]| -> TagSet {
        TagSet(
            (0..n)
                .filter(|&r| r != sender)
                .map(|receiver| {
                    let slot = key_slot(game, stage, sender, receiver);
                    assert!(!used[slot], "MAC key reused");
                    used[slot] = true;
                    itmac::mac(keys[slot].as_ref().expect("key drawn"), payload).expect("payload length")
                })
                .collect(),
        )
    };

    let shares = (0..n)
        .map(|owner| {
            let id = PlayerId(owner);
            let cell_count = if id == short_player { l - 1 } else { total } as usize;
            let cells = (0..cell_count)
                .map(|j| {
                    let masked = polys[j].masked[owner];
                    let (mask_pts, ind_pts) = polys[j].stage2.as_ref().expect("full game has stage 2");
                    let (mask, indicator) = (mask_pts[owner], ind_pts[owner]);
                    GameCell {
                        stage1: Stage1Material { masked, tags: tag_all(j, Stage::One, owner, &[masked.y]) },
                        stage2: Stage2Material {
                            mask,
                            indicator,
                            tags: tag_all(j, Stage::Two, owner, &[mask.y, indicator.y]),
                        },
                    }
                })
                .collect();
            // Half cell: the genuine stage-1 share of the next game (game l for the
            // short player, the dummy game L + 1 for long players).
            let masked = polys[cell_count].masked[owner];
            let half = HalfCell {
                stage1: Stage1Material { masked, tags: tag_all(cell_count, Stage::One, owner, &[masked.y]) },
            };
            let mut table = Vec::with_capacity((cell_count + 1) * 2 * (n - 1));
            for game in 0..=cell_count {
                for stage in [Stage::One, Stage::Two] {
                    for sender in (0..n).filter(|&s| s != owner) {
                        table.push(keys[key_slot(game, stage, sender, owner)].expect("key drawn"));
                    }
                }
            }
            PlayerShare { params: protocol, owner: id, cells, half, verify_keys: KeyTable::from_keys(id, n, table) }
        })
        .collect();

    let truth = DealerTruth {
        p,
        l,
        d,
        total_games: total,
        short_player,
        secret: params.secret,
        secrets,
        masks: masks.iter().map(|r| r.value()).collect(),
    };
    Ok(Deal { shares, truth })
}
