//! Deviations from the honest protocol, built as wrappers around
//! [`PlayerState`]. Each wrapper rewrites or suppresses the honest player's
//! broadcasts and may quit early with a value of its choosing.

mod coalition;
mod scoring;

use std::cell::RefCell;
use std::collections::BTreeMap;
use std::rc::Rc;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use coalition::{coalition_pool_reconstruct, CoalitionBoard, PoolReconstruction, PooledView};
pub use scoring::{score_outcome, NotLearningPreferring, OutcomeRecord, PlayerOutcome, UtilityProfile};

use crate::channel::{Agent, Delivery};
use crate::dealer::{PlayerShare, TagSet};
use crate::field::{sample_uniform, FieldElement};
use crate::itmac::Tag;
use crate::player::{player_init, Action, HaltReason, Message, Payload, PlayerState, Received, Verdict};
use crate::rng::{trial_rng, SimRng};
use crate::shamir::lagrange_coefficient_at_zero;
use crate::types::{PlayerId, Stage};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GuessRule {
    /// Output a fixed value, normally the most likely secret under the prior.
    Prior { guess: u32 },
    /// Withhold stage 2 and output the game's candidate secret as soon as the
    /// others' stage-2 shares allow it.
    GameCandidate,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StrategyKind {
    Honest,
    SilentFrom { game: u64, stage: Stage },
    ForgeIndicator { game: u64 },
    FakeTrueGame { game: u64 },
    GuessAndQuit { game: u64, stage: Stage, rule: GuessRule },
    CoalitionMember { id: usize },
    MaliciousEarlyStop { game: u64 },
    MaliciousSideChannel { recipients: Vec<PlayerId> },
}

impl StrategyKind {
    pub fn is_deviation(&self) -> bool {
        !matches!(self, StrategyKind::Honest)
    }
}

/// One strategy per player.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StrategyProfile {
    pub kinds: Vec<StrategyKind>,
}

impl StrategyProfile {
    pub fn honest(n: usize) -> Self {
        Self { kinds: vec![StrategyKind::Honest; n] }
    }

    pub fn with(mut self, player: PlayerId, kind: StrategyKind) -> Self {
        self.kinds[player.0] = kind;
        self
    }

    pub fn n(&self) -> usize {
        self.kinds.len()
    }

    pub fn coalitions(&self) -> BTreeMap<usize, Vec<PlayerId>> {
        let mut out: BTreeMap<usize, Vec<PlayerId>> = BTreeMap::new();
        for (i, kind) in self.kinds.iter().enumerate() {
            if let StrategyKind::CoalitionMember { id } = kind {
                out.entry(*id).or_default().push(PlayerId(i));
            }
        }
        out
    }

    /// Members of `player`'s coalition, or just `player`.
    pub fn coalition_of(&self, player: PlayerId) -> Vec<PlayerId> {
        match self.kinds[player.0] {
            StrategyKind::CoalitionMember { id } => self.coalitions().remove(&id).unwrap_or_default(),
            _ => vec![player],
        }
    }

    pub fn deviators(&self) -> Vec<PlayerId> {
        (0..self.n()).filter(|&i| self.kinds[i].is_deviation()).map(PlayerId).collect()
    }

    /// Instantiates one agent per player. Strategy randomness for player `i`
    /// comes from stream `i` of `seed`.
    pub fn build_agents(&self, shares: &[PlayerShare], seed: u64) -> Vec<StrategicPlayer> {
        assert_eq!(shares.len(), self.n(), "one share per player");
        let mut boards: BTreeMap<usize, Rc<RefCell<CoalitionBoard>>> = BTreeMap::new();
        for (id, members) in self.coalitions() {
            let view = PooledView::from_shares(members.iter().map(|m| &shares[m.0])).expect("coalition is nonempty");
            boards.insert(id, Rc::new(RefCell::new(CoalitionBoard::new(members, view))));
        }
        // Side-channel gifts land in every coalition that contains a recipient.
        for (i, kind) in self.kinds.iter().enumerate() {
            if let StrategyKind::MaliciousSideChannel { recipients } = kind {
                for board in boards.values() {
                    let mut board = board.borrow_mut();
                    if recipients.iter().any(|r| board.members.contains(r)) {
                        board.view.add_share(&shares[i]);
                    }
                }
            }
        }
        shares
            .iter()
            .enumerate()
            .map(|(i, share)| {
                let kind = self.kinds[i].clone();
                let board = match kind {
                    StrategyKind::CoalitionMember { id } => boards.get(&id).cloned(),
                    _ => None,
                };
                let (state, _) = player_init(PlayerId(i), Arc::new(share.clone()));
                StrategicPlayer::new(state, kind, trial_rng(seed, i as u64), board)
            })
            .collect()
    }
}

/// An honest state machine driven through a strategy.
#[derive(Debug)]
pub struct StrategicPlayer {
    state: PlayerState,
    kind: StrategyKind,
    rng: SimRng,
    board: Option<Rc<RefCell<CoalitionBoard>>>,
    armed: bool,
}

impl StrategicPlayer {
    pub fn new(
        state: PlayerState,
        kind: StrategyKind,
        rng: SimRng,
        board: Option<Rc<RefCell<CoalitionBoard>>>,
    ) -> Self {
        if matches!(kind, StrategyKind::CoalitionMember { .. }) {
            assert!(board.is_some(), "coalition member without a board");
        }
        Self { state, kind, rng, board, armed: false }
    }

    pub fn state(&self) -> &PlayerState {
        &self.state
    }

    pub fn kind(&self) -> &StrategyKind {
        &self.kind
    }

    fn random_tags(&mut self) -> TagSet {
        let p = self.state.share().params.p;
        let n = self.state.share().params.n;
        TagSet((1..n).map(|_| Tag(sample_uniform(&mut self.rng, p))).collect())
    }

    /// Shift that moves the indicator reconstructed by the lowest-indexed
    /// other player (own share plus this player's, then lowest indices) by one.
    fn fake_shift(&self) -> FieldElement {
        let me = self.state.index();
        let params = self.state.share().params;
        let victim = params.players().find(|&p| p != me).expect("n >= 2");
        let mut basis = vec![victim.abscissa(), me.abscissa()];
        basis.extend(params.players().filter(|&p| p != me && p != victim).take(params.k - 2).map(PlayerId::abscissa));
        lagrange_coefficient_at_zero(params.p, &basis, me.abscissa()).inv().expect("lagrange coefficients are nonzero")
    }

    /// Rewrites one outgoing broadcast. `None` withholds it.
    fn transform(&mut self, mut msg: Message) -> Option<Message> {
        let at = (msg.game, msg.stage);
        match self.kind.clone() {
            StrategyKind::Honest => Some(msg),
            StrategyKind::SilentFrom { game, stage } => (at < (game, stage)).then_some(msg),
            StrategyKind::MaliciousEarlyStop { game } => (at < (game, Stage::One)).then_some(msg),
            StrategyKind::MaliciousSideChannel { .. } => None,
            StrategyKind::ForgeIndicator { game } => {
                if at == (game, Stage::Two) && !msg.payload.is_bottom() {
                    let p = self.state.share().params.p;
                    let forged = sample_uniform(&mut self.rng, p);
                    let tags = self.random_tags();
                    if let Payload::Stage2 { indicator, tags: t, .. } = &mut msg.payload {
                        *indicator = forged;
                        *t = tags;
                    }
                }
                Some(msg)
            }
            StrategyKind::FakeTrueGame { game } => {
                if at == (game, Stage::Two) && !msg.payload.is_bottom() {
                    let shift = self.fake_shift();
                    let tags = self.random_tags();
                    if let Payload::Stage2 { indicator, tags: t, .. } = &mut msg.payload {
                        *indicator = *indicator + shift;
                        *t = tags;
                    }
                }
                Some(msg)
            }
            StrategyKind::GuessAndQuit { game, stage, .. } => {
                if at < (game, stage) {
                    Some(msg)
                } else {
                    self.armed = true;
                    None
                }
            }
            StrategyKind::CoalitionMember { .. } => {
                let board = self.board.as_ref().expect("member has a board").borrow();
                (!board.knows_true_game(msg.game)).then_some(msg)
            }
        }
    }

    fn outgoing(&mut self, actions: Vec<Action>) -> Vec<Action> {
        let mut out = Vec::with_capacity(actions.len());
        for action in actions {
            match action {
                Action::Broadcast(msg) => {
                    if let Some(msg) = self.transform(msg) {
                        out.push(Action::Broadcast(msg));
                    }
                }
                Action::Output(v) => {
                    if let Some(board) = &self.board {
                        board.borrow_mut().quit.get_or_insert(v);
                    }
                    out.push(Action::Output(v));
                }
                halt => out.push(halt),
            }
        }
        out.extend(self.react());
        out
    }

    /// Strategy moves that do not wait for an outgoing broadcast.
    fn react(&mut self) -> Vec<Action> {
        if !self.state.is_live() {
            return Vec::new();
        }
        match self.kind {
            StrategyKind::GuessAndQuit { rule: GuessRule::Prior { guess }, .. } if self.armed => {
                let value = self.state.share().params.p.element(u64::from(guess));
                self.state.quit_with(Some(value), HaltReason::SecretRevealed)
            }
            StrategyKind::GuessAndQuit { game, rule: GuessRule::GameCandidate, .. } if self.armed => {
                match self.state.candidate(game) {
                    Some(value) => self.state.quit_with(Some(value), HaltReason::SecretRevealed),
                    None => Vec::new(),
                }
            }
            StrategyKind::CoalitionMember { .. } => {
                let game = self.state.cursor().game;
                let quit = self.board.as_ref().expect("member has a board").borrow_mut().check(game);
                match quit {
                    Some(value) => self.state.quit_with(Some(value), HaltReason::SecretRevealed),
                    None => Vec::new(),
                }
            }
            _ => Vec::new(),
        }
    }
}

impl Agent for StrategicPlayer {
    fn id(&self) -> PlayerId {
        self.state.index()
    }

    fn open(&mut self) -> Vec<Action> {
        let opening = Agent::open(&mut self.state);
        self.outgoing(opening)
    }

    fn deliver(&mut self, delivery: &Delivery) -> (Verdict, Vec<Action>) {
        let actions = self.state.step(delivery);
        let verdict = self.state.last_verdict().expect("step sets a verdict");
        if verdict == Verdict::Accepted {
            if let Some(board) = &self.board {
                let msg = &delivery.message;
                let received = match &msg.payload {
                    Payload::Stage1 { masked, .. } => Received::Stage1(*masked),
                    Payload::Stage2 { mask, indicator, .. } => Received::Stage2 { mask: *mask, indicator: *indicator },
                    Payload::Bottom => Received::Bottom,
                };
                board.borrow_mut().view.add_received(msg.sender, msg.game, received);
            }
        }
        (verdict, self.outgoing(actions))
    }

    fn poll(&mut self) -> Vec<Action> {
        self.react()
    }

    fn is_live(&self) -> bool {
        self.state.is_live()
    }

    fn stall(&mut self) {
        self.state.stall()
    }
}

/// One strategy-wrapped step.
pub fn apply_strategy(player: &mut StrategicPlayer, event: &Delivery) -> Vec<Action> {
    player.deliver(event).1
}
