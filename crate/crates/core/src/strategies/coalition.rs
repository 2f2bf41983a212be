use std::collections::BTreeMap;

use crate::dealer::PlayerShare;
use crate::field::FieldElement;
use crate::player::Received;
use crate::shamir::{reconstruct, SharePoint, Threshold};
use crate::types::{PlayerId, ProtocolParams, Stage};

/// Everything a coalition can see: its members' dealt shares, shares gifted
/// over side channels, and every payload any member has verified.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PooledView {
    pub params: ProtocolParams,
    stage1: BTreeMap<u64, BTreeMap<u32, FieldElement>>,
    stage2: BTreeMap<u64, BTreeMap<u32, (FieldElement, FieldElement)>>,
}

/// Whatever the pooled points reach threshold for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct PoolReconstruction {
    pub indicator: Option<FieldElement>,
    pub mask: Option<FieldElement>,
    pub masked: Option<FieldElement>,
    pub secret: Option<FieldElement>,
}

impl PooledView {
    pub fn new(params: ProtocolParams) -> Self {
        Self { params, stage1: BTreeMap::new(), stage2: BTreeMap::new() }
    }

    pub fn from_shares<'a>(shares: impl IntoIterator<Item = &'a PlayerShare>) -> Option<Self> {
        let mut shares = shares.into_iter().peekable();
        let mut view = Self::new(shares.peek()?.params);
        for share in shares {
            view.add_share(share);
        }
        Some(view)
    }

    pub fn add_share(&mut self, share: &PlayerShare) {
        debug_assert_eq!(share.params, self.params);
        let x = share.owner.abscissa();
        for (j, cell) in share.cells.iter().enumerate() {
            let game = j as u64 + 1;
            self.stage1.entry(game).or_default().insert(x, cell.stage1.masked.y);
            self.stage2.entry(game).or_default().insert(x, (cell.stage2.mask.y, cell.stage2.indicator.y));
        }
        self.stage1.entry(share.half_game()).or_default().insert(x, share.half.stage1.masked.y);
    }

    pub fn add_received(&mut self, sender: PlayerId, game: u64, received: Received) {
        let x = sender.abscissa();
        match received {
            Received::Stage1(y) => {
                self.stage1.entry(game).or_default().insert(x, y);
            }
            Received::Stage2 { mask, indicator } => {
                self.stage2.entry(game).or_default().insert(x, (mask, indicator));
            }
            Received::Bottom => {}
        }
    }

    pub fn points(&self, game: u64, stage: Stage) -> usize {
        match stage {
            Stage::One => self.stage1.get(&game).map_or(0, BTreeMap::len),
            Stage::Two => self.stage2.get(&game).map_or(0, BTreeMap::len),
        }
    }

    pub fn indicator(&self, game: u64) -> Option<FieldElement> {
        let k = self.params.k;
        let pts: Vec<_> = self.stage2.get(&game)?.iter().take(k).map(|(&x, &(_, i))| SharePoint::new(x, i)).collect();
        reconstruct(&pts, Threshold(k)).ok()
    }
}

/// Reconstructs what the pooled view allows for `game`, interpolating through
/// the smallest abscissas available.
pub fn coalition_pool_reconstruct(view: &PooledView, game: u64) -> PoolReconstruction {
    let ProtocolParams { m, k, .. } = view.params;
    let mut out = PoolReconstruction::default();
    if let Some(s2) = view.stage2.get(&game) {
        if s2.len() >= k {
            let mask: Vec<_> = s2.iter().take(k).map(|(&x, &(r, _))| SharePoint::new(x, r)).collect();
            let ind: Vec<_> = s2.iter().take(k).map(|(&x, &(_, i))| SharePoint::new(x, i)).collect();
            out.mask = reconstruct(&mask, Threshold(k)).ok();
            out.indicator = reconstruct(&ind, Threshold(k)).ok();
        }
    }
    if let Some(s1) = view.stage1.get(&game) {
        if s1.len() >= m {
            let pts: Vec<_> = s1.iter().take(m).map(|(&x, &y)| SharePoint::new(x, y)).collect();
            out.masked = reconstruct(&pts, Threshold(m)).ok();
        }
    }
    if let (Some(masked), Some(mask)) = (out.masked, out.mask) {
        out.secret = Some(masked - mask);
    }
    out
}

/// Shared state of one coalition during a single run.
#[derive(Debug, Clone)]
pub struct CoalitionBoard {
    pub members: Vec<PlayerId>,
    pub view: PooledView,
    /// Set once the coalition has decided to leave with this value.
    pub quit: Option<FieldElement>,
}

impl CoalitionBoard {
    pub fn new(members: Vec<PlayerId>, view: PooledView) -> Self {
        Self { members, view, quit: None }
    }

    /// The pooled view says `game` is the true game.
    pub fn knows_true_game(&self, game: u64) -> bool {
        self.view.indicator(game).is_some_and(|i| i == self.view.params.p.one())
    }

    /// Decides to quit if the pool already yields the secret of `game`.
    pub fn check(&mut self, game: u64) -> Option<FieldElement> {
        if self.quit.is_none() && self.knows_true_game(game) {
            self.quit = coalition_pool_reconstruct(&self.view, game).secret;
        }
        self.quit
    }
}
