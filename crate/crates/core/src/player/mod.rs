//! The reconstruction protocol as an event-driven state machine.
//!
//! A player opens each stage by broadcasting its own material, then consumes
//! deliveries one at a time. Stage 1 ends once all `n - 1` other stage-1
//! messages have arrived and authenticated. Stage 2 reconstructs the game's
//! indicator from the player's own share and `k - 1` verified others: a one
//! reveals the secret; a zero advances to the next game once every stage-2
//! message is in, unless someone sent ⊥ in this game. A player whose share has
//! run out sends its half cell in stage 1 and ⊥ in stage 2, and leaves with
//! the secret once `k` others' stage-2 shares have authenticated.
//!
//! Any authentication failure sets `cheater_detected` and halts the player.

mod message;

use std::collections::BTreeMap;
use std::sync::Arc;

pub use message::{Action, HaltReason, Message, Payload, Verdict};

use crate::channel::Delivery;
use crate::dealer::PlayerShare;
use crate::field::FieldElement;
use crate::itmac;
use crate::shamir::{reconstruct, SharePoint, Threshold};
use crate::types::{PlayerId, Stage};

/// Position in the game list: `(game, stage)`, 1-based games.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Cursor {
    pub game: u64,
    pub stage: Stage,
}

/// A verified payload body held in the inbox.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Received {
    Stage1(FieldElement),
    Stage2 { mask: FieldElement, indicator: FieldElement },
    Bottom,
}

/// Points a player interpolated when it revealed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RevealBasis {
    pub game: u64,
    pub masked_points: Vec<SharePoint>,
    pub mask_points: Vec<SharePoint>,
    pub masked: FieldElement,
    pub mask: FieldElement,
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct Decision {
    indicator: FieldElement,
    mask: FieldElement,
    mask_points: Vec<SharePoint>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlayerState {
    index: PlayerId,
    share: Arc<PlayerShare>,
    cursor: Cursor,
    inbox: BTreeMap<(u64, Stage), BTreeMap<PlayerId, Received>>,
    decision: Option<Decision>,
    secret_revealed: bool,
    cheater_detected: bool,
    output: Option<FieldElement>,
    reveal_basis: Option<RevealBasis>,
    halted: Option<HaltReason>,
    last_verdict: Option<Verdict>,
}

/// Starts player `index` at game 1, stage 1, and returns its opening broadcast.
///
/// Panics if `share` was dealt to a different player.
pub fn player_init(index: PlayerId, share: Arc<PlayerShare>) -> (PlayerState, Vec<Action>) {
    assert_eq!(share.owner, index, "share belongs to player {}", share.owner);
    let state = PlayerState {
        index,
        share,
        cursor: Cursor { game: 1, stage: Stage::One },
        inbox: BTreeMap::new(),
        decision: None,
        secret_revealed: false,
        cheater_detected: false,
        output: None,
        reveal_basis: None,
        halted: None,
        last_verdict: None,
    };
    let opening = vec![Action::Broadcast(state.own_message(1, Stage::One))];
    (state, opening)
}

/// Functional form of [`PlayerState::step`].
pub fn player_step(mut state: PlayerState, event: &Delivery) -> (PlayerState, Vec<Action>) {
    let actions = state.step(event);
    (state, actions)
}

impl PlayerState {
    pub fn index(&self) -> PlayerId {
        self.index
    }

    pub fn share(&self) -> &PlayerShare {
        &self.share
    }

    pub fn cursor(&self) -> Cursor {
        self.cursor
    }

    pub fn secret_revealed(&self) -> bool {
        self.secret_revealed
    }

    pub fn cheater_detected(&self) -> bool {
        self.cheater_detected
    }

    pub fn output(&self) -> Option<FieldElement> {
        self.output
    }

    pub fn reveal_basis(&self) -> Option<&RevealBasis> {
        self.reveal_basis.as_ref()
    }

    pub fn halted(&self) -> Option<HaltReason> {
        self.halted
    }

    pub fn is_live(&self) -> bool {
        self.halted.is_none()
    }

    /// Verdict on the most recent delivery.
    pub fn last_verdict(&self) -> Option<Verdict> {
        self.last_verdict
    }

    /// Verified payloads from other players for `(game, stage)`, in sender order.
    pub fn received(&self, game: u64, stage: Stage) -> impl Iterator<Item = (PlayerId, Received)> + '_ {
        self.inbox.get(&(game, stage)).into_iter().flat_map(|m| m.iter().map(|(&s, &r)| (s, r)))
    }

    /// This player's own broadcast for `(game, stage)` as dealt.
    pub fn own_message(&self, game: u64, stage: Stage) -> Message {
        let payload = match stage {
            Stage::One => {
                let material = self.share.stage1(game).expect("cursor stays within the share");
                Payload::Stage1 { masked: material.masked.y, tags: material.tags.clone() }
            }
            Stage::Two => match self.share.cell(game) {
                Some(cell) => Payload::Stage2 {
                    mask: cell.stage2.mask.y,
                    indicator: cell.stage2.indicator.y,
                    tags: cell.stage2.tags.clone(),
                },
                None => Payload::Bottom,
            },
        };
        Message { sender: self.index, game, stage, payload }
    }

    /// Marks the player halted with `Stalled`. Used by the driver at quiescence.
    pub fn stall(&mut self) {
        if self.halted.is_none() {
            self.halted = Some(HaltReason::Stalled);
        }
    }

    /// Halts with an output chosen outside the protocol (deviating strategies).
    pub fn quit_with(&mut self, value: Option<FieldElement>, reason: HaltReason) -> Vec<Action> {
        let mut actions = Vec::new();
        if self.halted.is_some() {
            return actions;
        }
        if let Some(v) = value {
            self.output = Some(v);
            actions.push(Action::Output(v));
        }
        self.halted = Some(reason);
        actions.push(Action::Halt(reason));
        actions
    }

    pub fn step(&mut self, event: &Delivery) -> Vec<Action> {
        let msg = &*event.message;
        debug_assert_eq!(event.recipient, self.index);
        if self.halted.is_some() {
            self.last_verdict = Some(Verdict::Dropped);
            return Vec::new();
        }
        let Some(key) = self.share.verify_keys.get(msg.sender, msg.game, msg.stage) else {
            self.last_verdict = Some(Verdict::Ignored);
            return Vec::new();
        };
        if self.inbox.get(&(msg.game, msg.stage)).is_some_and(|m| m.contains_key(&msg.sender)) {
            self.last_verdict = Some(Verdict::Ignored);
            return Vec::new();
        }
        let received = match (&msg.payload, msg.stage) {
            (Payload::Bottom, _) => Some(Received::Bottom),
            (Payload::Stage1 { masked, tags }, Stage::One) => tags
                .for_receiver(msg.sender, self.index)
                .filter(|&tag| itmac::verify(key, &[*masked], tag))
                .map(|_| Received::Stage1(*masked)),
            (Payload::Stage2 { mask, indicator, tags }, Stage::Two) => tags
                .for_receiver(msg.sender, self.index)
                .filter(|&tag| itmac::verify(key, &[*mask, *indicator], tag))
                .map(|_| Received::Stage2 { mask: *mask, indicator: *indicator }),
            _ => None,
        };
        let Some(received) = received else {
            self.last_verdict = Some(Verdict::Rejected);
            return self.detect_cheater();
        };
        self.last_verdict = Some(if received == Received::Bottom { Verdict::Bottom } else { Verdict::Accepted });
        if msg.game < self.cursor.game {
            // A finished game cannot change.
            return Vec::new();
        }
        self.inbox.entry((msg.game, msg.stage)).or_default().insert(msg.sender, received);
        self.advance()
    }

    fn detect_cheater(&mut self) -> Vec<Action> {
        self.cheater_detected = true;
        self.halted = Some(HaltReason::CheaterDetected);
        vec![Action::Halt(HaltReason::CheaterDetected)]
    }

    fn count(&self, game: u64, stage: Stage) -> usize {
        self.inbox.get(&(game, stage)).map_or(0, BTreeMap::len)
    }

    fn bottom_seen(&self, game: u64) -> bool {
        [Stage::One, Stage::Two].iter().any(|&s| self.received(game, s).any(|(_, r)| r == Received::Bottom))
    }

    fn others_stage2(&self, game: u64) -> Vec<(SharePoint, SharePoint)> {
        self.received(game, Stage::Two)
            .filter_map(|(sender, r)| match r {
                Received::Stage2 { mask, indicator } => {
                    let x = sender.abscissa();
                    Some((SharePoint::new(x, mask), SharePoint::new(x, indicator)))
                }
                _ => None,
            })
            .collect()
    }

    /// Own stage-1 point plus every verified non-⊥ stage-1 point of `game`.
    fn masked_points(&self, game: u64) -> Vec<SharePoint> {
        let own = self.share.stage1(game).map(|m| m.masked);
        own.into_iter()
            .chain(self.received(game, Stage::One).filter_map(|(sender, r)| match r {
                Received::Stage1(y) => Some(SharePoint::new(sender.abscissa(), y)),
                _ => None,
            }))
            .collect()
    }

    /// The candidate secret of `game` this player could compute right now:
    /// masked value from stage 1 minus the mask from its own and `k - 1`
    /// others' stage-2 shares (or `k` others once its share has ended).
    pub fn candidate(&self, game: u64) -> Option<FieldElement> {
        let k = self.share.params.k;
        let mut mask_points: Vec<SharePoint> = self.share.cell(game).map(|c| c.stage2.mask).into_iter().collect();
        mask_points.extend(self.others_stage2(game).into_iter().map(|(m, _)| m));
        mask_points.sort_by_key(|pt| pt.x);
        if mask_points.len() < k {
            return None;
        }
        let mask = reconstruct(&mask_points[..k], Threshold(k)).ok()?;
        let masked = reconstruct(&self.masked_points(game), Threshold(self.share.params.m)).ok()?;
        Some(masked - mask)
    }

    fn advance(&mut self) -> Vec<Action> {
        let n = self.share.params.n;
        let k = self.share.params.k;
        let mut actions = Vec::new();
        loop {
            let game = self.cursor.game;
            match self.cursor.stage {
                Stage::One => {
                    if self.count(game, Stage::One) < n - 1 {
                        break;
                    }
                    self.cursor.stage = Stage::Two;
                    self.decision = None;
                    actions.push(Action::Broadcast(self.own_message(game, Stage::Two)));
                }
                Stage::Two if game == self.share.half_game() => {
                    let others = self.others_stage2(game);
                    if others.len() >= k {
                        let mask_points: Vec<_> = others.iter().take(k).map(|(m, _)| *m).collect();
                        match reconstruct(&mask_points, Threshold(k)) {
                            Ok(mask) => actions.extend(self.reveal(game, mask, mask_points)),
                            Err(_) => actions.extend(self.detect_cheater()),
                        }
                    } else if self.count(game, Stage::Two) == n - 1 {
                        actions.extend(self.detect_cheater());
                    }
                    break;
                }
                Stage::Two => {
                    if self.decision.is_none() {
                        let others = self.others_stage2(game);
                        if others.len() + 1 >= k {
                            let own = &self.share.cell(game).expect("long branch has a cell").stage2;
                            let (mut mask_points, mut ind_points) = (vec![own.mask], vec![own.indicator]);
                            for (m, i) in others.into_iter().take(k - 1) {
                                mask_points.push(m);
                                ind_points.push(i);
                            }
                            let decided = reconstruct(&ind_points, Threshold(k))
                                .and_then(|ind| reconstruct(&mask_points, Threshold(k)).map(|mask| (ind, mask)));
                            match decided {
                                Ok((indicator, mask)) => {
                                    self.decision = Some(Decision { indicator, mask, mask_points })
                                }
                                Err(_) => {
                                    actions.extend(self.detect_cheater());
                                    break;
                                }
                            }
                        }
                    }
                    let p = self.share.params.p;
                    match self.decision.clone() {
                        Some(d) if d.indicator == p.one() => {
                            actions.extend(self.reveal(game, d.mask, d.mask_points));
                            break;
                        }
                        Some(d) if d.indicator != p.zero() || self.bottom_seen(game) => {
                            actions.extend(self.detect_cheater());
                            break;
                        }
                        Some(_) if self.count(game, Stage::Two) == n - 1 => {
                            self.inbox.retain(|&(g, _), _| g > game);
                            self.cursor = Cursor { game: game + 1, stage: Stage::One };
                            self.decision = None;
                            actions.push(Action::Broadcast(self.own_message(game + 1, Stage::One)));
                        }
                        Some(_) => break,
                        // Every stage-2 message is in but too few carry shares.
                        None if self.count(game, Stage::Two) == n - 1 => {
                            actions.extend(self.detect_cheater());
                            break;
                        }
                        None => break,
                    }
                }
            }
        }
        actions
    }

    fn reveal(&mut self, game: u64, mask: FieldElement, mask_points: Vec<SharePoint>) -> Vec<Action> {
        let m = self.share.params.m;
        let mut masked_points = self.masked_points(game);
        masked_points.sort_by_key(|pt| pt.x);
        let Ok(masked) = reconstruct(&masked_points, Threshold(m)) else {
            return self.detect_cheater();
        };
        let secret = masked - mask;
        self.secret_revealed = true;
        self.output = Some(secret);
        self.halted = Some(HaltReason::SecretRevealed);
        self.reveal_basis = Some(RevealBasis { game, masked_points, mask_points, masked, mask });
        vec![Action::Output(secret), Action::Halt(HaltReason::SecretRevealed)]
    }
}
