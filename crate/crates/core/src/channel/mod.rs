//! Simulated asynchronous broadcast channel and the simulation driver.
//!
//! Every broadcast fans out into one pending delivery per other player. The
//! scheduler picks one pending delivery per step, subject to the fairness
//! budget. The channel stamps sender identity, so ⊥ is attributable even
//! though it carries no tag.

mod scheduler;
mod transcript;

use std::collections::HashSet;
use std::sync::Arc;

use thiserror::Error;

pub use scheduler::{schedule_step, DeferRule, Order, Scheduler, SchedulerKind, SchedulerPolicy, Script, ScriptError};
pub use transcript::{Record, RecordKind, Transcript};

use crate::player::{Action, Message, PlayerState, Verdict};
use crate::types::{PlayerId, Stage};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Delivery {
    pub message: Arc<Message>,
    pub recipient: PlayerId,
    pub enqueued_at: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ChannelError {
    #[error("player {sender} already broadcast game {game} stage {stage}")]
    DuplicateBroadcast { sender: PlayerId, game: u64, stage: Stage },
    #[error("unknown sender {0}")]
    UnknownSender(PlayerId),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SimError {
    #[error("simulation exceeded {0} steps")]
    SimulationBudgetExceeded(u64),
    #[error(transparent)]
    Channel(#[from] ChannelError),
}

/// Pending deliveries, oldest first.
#[derive(Debug, Clone)]
pub struct Channel {
    n: usize,
    pending: Vec<Delivery>,
    sent: HashSet<(PlayerId, u64, Stage)>,
    step: u64,
}

impl Channel {
    pub fn new(n: usize) -> Self {
        Self { n, pending: Vec::new(), sent: HashSet::new(), step: 0 }
    }

    pub fn pending(&self) -> &[Delivery] {
        &self.pending
    }

    pub fn step(&self) -> u64 {
        self.step
    }

    /// Queues one delivery of `message` for every player except `sender`.
    pub fn broadcast_enqueue(&mut self, sender: PlayerId, mut message: Message) -> Result<usize, ChannelError> {
        if sender.0 >= self.n {
            return Err(ChannelError::UnknownSender(sender));
        }
        message.sender = sender;
        if !self.sent.insert((sender, message.game, message.stage)) {
            return Err(ChannelError::DuplicateBroadcast { sender, game: message.game, stage: message.stage });
        }
        let message = Arc::new(message);
        let before = self.pending.len();
        self.pending.extend(PlayerId::all(self.n).filter(|&r| r != sender).map(|recipient| Delivery {
            message: message.clone(),
            recipient,
            enqueued_at: self.step,
        }));
        Ok(self.pending.len() - before)
    }

    /// Removes and returns the scheduler's pick, advancing the step counter.
    pub fn next(&mut self, scheduler: &mut Scheduler) -> Option<Delivery> {
        if self.pending.is_empty() {
            return None;
        }
        let i = scheduler.pick(&self.pending, self.step);
        self.step += 1;
        Some(self.pending.remove(i))
    }
}

/// A participant driven by the simulation: the honest state machine or a
/// strategy wrapped around it.
pub trait Agent {
    fn id(&self) -> PlayerId;
    /// Actions taken before any delivery (the game-1 stage-1 broadcast).
    fn open(&mut self) -> Vec<Action>;
    fn deliver(&mut self, delivery: &Delivery) -> (Verdict, Vec<Action>);
    /// Called after every step, for behavior triggered by someone else's delivery.
    fn poll(&mut self) -> Vec<Action> {
        Vec::new()
    }
    fn is_live(&self) -> bool;
    /// Marks the agent halted at quiescence.
    fn stall(&mut self);
}

impl Agent for PlayerState {
    fn id(&self) -> PlayerId {
        self.index()
    }

    fn open(&mut self) -> Vec<Action> {
        vec![Action::Broadcast(self.own_message(1, Stage::One))]
    }

    fn deliver(&mut self, delivery: &Delivery) -> (Verdict, Vec<Action>) {
        let actions = self.step(delivery);
        (self.last_verdict().expect("step sets a verdict"), actions)
    }

    fn is_live(&self) -> bool {
        PlayerState::is_live(self)
    }

    fn stall(&mut self) {
        PlayerState::stall(self)
    }
}

/// Knobs for [`run_simulation_with`].
#[derive(Debug, Clone)]
pub struct SimOptions {
    pub max_steps: u64,
    /// Keep the per-event log. Outputs and halts are always kept.
    pub record: bool,
}

/// Runs `agents` (indexed by player) to quiescence under `policy`.
pub fn run_simulation<A: Agent>(
    agents: &mut [A],
    policy: &SchedulerPolicy,
    max_steps: u64,
) -> Result<Transcript, SimError> {
    run_simulation_with(agents, policy, &SimOptions { max_steps, record: true })
}

pub fn run_simulation_with<A: Agent>(
    agents: &mut [A],
    policy: &SchedulerPolicy,
    options: &SimOptions,
) -> Result<Transcript, SimError> {
    let n = agents.len();
    debug_assert!(agents.iter().enumerate().all(|(i, a)| a.id() == PlayerId(i)));
    let mut channel = Channel::new(n);
    let mut scheduler = Scheduler::new(policy.clone());
    let mut log = Transcript::new(n);
    let mut sim = Driver { channel: &mut channel, log: &mut log, record: options.record };

    for (i, agent) in agents.iter_mut().enumerate() {
        let actions = agent.open();
        sim.apply(PlayerId(i), actions)?;
    }
    sim.poll_all(agents)?;

    while let Some(delivery) = sim.channel.next(&mut scheduler) {
        let step = sim.channel.step();
        let recipient = delivery.recipient;
        let agent = &mut agents[recipient.0];
        let verdict = if agent.is_live() {
            let (verdict, actions) = agent.deliver(&delivery);
            sim.record_delivery(step, &delivery, verdict);
            sim.apply(recipient, actions)?;
            verdict
        } else {
            sim.record_delivery(step, &delivery, Verdict::Dropped);
            Verdict::Dropped
        };
        if verdict != Verdict::Dropped {
            sim.poll_all(agents)?;
        }
        if step >= options.max_steps && !sim.channel.pending().is_empty() {
            return Err(SimError::SimulationBudgetExceeded(options.max_steps));
        }
    }

    let step = sim.channel.step();
    for (i, agent) in agents.iter_mut().enumerate() {
        if agent.is_live() {
            agent.stall();
            log.halts[i] = Some(crate::player::HaltReason::Stalled);
            if options.record {
                let mut r = Record::blank(step, RecordKind::Halt);
                r.sender = Some(i);
                r.reason = Some(crate::player::HaltReason::Stalled);
                log.records.push(r);
            }
        }
    }
    log.steps = step;
    Ok(log)
}

struct Driver<'a> {
    channel: &'a mut Channel,
    log: &'a mut Transcript,
    record: bool,
}

impl Driver<'_> {
    fn apply(&mut self, who: PlayerId, actions: Vec<Action>) -> Result<(), SimError> {
        let step = self.channel.step();
        for action in actions {
            match action {
                Action::Broadcast(message) => {
                    let (game, stage) = (message.game, message.stage);
                    self.channel.broadcast_enqueue(who, message)?;
                    let reached = &mut self.log.games_reached[who.0];
                    *reached = (*reached).max(game);
                    if self.record {
                        let mut r = Record::blank(step, RecordKind::Broadcast);
                        r.sender = Some(who.0);
                        r.game = Some(game);
                        r.stage = Some(stage.number());
                        self.log.records.push(r);
                    }
                }
                Action::Output(value) => {
                    debug_assert!(self.log.outputs[who.0].is_none(), "second output from {who}");
                    self.log.outputs[who.0] = Some(value);
                    if self.record {
                        let mut r = Record::blank(step, RecordKind::Output);
                        r.sender = Some(who.0);
                        r.value = Some(value.value());
                        self.log.records.push(r);
                    }
                }
                Action::Halt(reason) => {
                    self.log.halts[who.0] = Some(reason);
                    if self.record {
                        let mut r = Record::blank(step, RecordKind::Halt);
                        r.sender = Some(who.0);
                        r.reason = Some(reason);
                        self.log.records.push(r);
                    }
                }
            }
        }
        Ok(())
    }

    fn record_delivery(&mut self, step: u64, d: &Delivery, verdict: Verdict) {
        if self.record {
            let mut r = Record::blank(step, RecordKind::Delivery);
            r.sender = Some(d.message.sender.0);
            r.recipient = Some(d.recipient.0);
            r.game = Some(d.message.game);
            r.stage = Some(d.message.stage.number());
            r.verdict = Some(verdict);
            self.log.records.push(r);
        }
    }

    fn poll_all<A: Agent>(&mut self, agents: &mut [A]) -> Result<(), SimError> {
        for (i, agent) in agents.iter_mut().enumerate() {
            if agent.is_live() {
                let actions = agent.poll();
                if !actions.is_empty() {
                    self.apply(PlayerId(i), actions)?;
                }
            }
        }
        Ok(())
    }
}
