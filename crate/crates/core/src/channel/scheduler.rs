use std::str::FromStr;

use rand::Rng;
use thiserror::Error;

use super::Delivery;
use crate::rng::{seeded, SimRng};
use crate::types::{PlayerId, Stage};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SchedulerKind {
    Fifo,
    RandomSeeded(u64),
    AdversarialScripted(Script),
}

/// How the channel picks the next delivery. Whatever the kind, a delivery that
/// has waited `fairness_budget` steps is delivered next.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SchedulerPolicy {
    pub kind: SchedulerKind,
    pub fairness_budget: u64,
}

impl SchedulerPolicy {
    pub fn default_budget(n: usize) -> u64 {
        8 * n as u64
    }

    pub fn fifo(n: usize) -> Self {
        Self { kind: SchedulerKind::Fifo, fairness_budget: Self::default_budget(n) }
    }

    pub fn random(seed: u64, n: usize) -> Self {
        Self { kind: SchedulerKind::RandomSeeded(seed), fairness_budget: Self::default_budget(n) }
    }

    pub fn scripted(script: Script, n: usize) -> Self {
        Self { kind: SchedulerKind::AdversarialScripted(script), fairness_budget: Self::default_budget(n) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Order {
    #[default]
    Fifo,
    Lifo,
}

/// Matches deliveries the adversary wants to hold back. Empty fields match anything.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct DeferRule {
    pub sender: Option<PlayerId>,
    pub recipient: Option<PlayerId>,
    pub game: Option<u64>,
    pub stage: Option<Stage>,
}

impl DeferRule {
    pub fn matches(&self, d: &Delivery) -> bool {
        self.sender.is_none_or(|s| s == d.message.sender)
            && self.recipient.is_none_or(|r| r == d.recipient)
            && self.game.is_none_or(|g| g == d.message.game)
            && self.stage.is_none_or(|s| s == d.message.stage)
    }
}

/// An adversarial schedule: deliver in `order`, skipping anything a defer rule
/// matches while something else is pending.
///
/// Text form, one directive per line (`#` starts a comment):
///
/// ```text
/// order lifo
/// defer sender=1 game=2 stage=1
/// defer recipient=0
/// ```
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Script {
    pub order: Order,
    pub defer: Vec<DeferRule>,
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("schedule script line {line}: {message}")]
pub struct ScriptError {
    pub line: usize,
    pub message: String,
}

impl FromStr for Script {
    type Err = ScriptError;

    fn from_str(text: &str) -> Result<Self, Self::Err> {
        let mut script = Script::default();
        for (i, raw) in text.lines().enumerate() {
            let err = |message: String| ScriptError { line: i + 1, message };
            let line = raw.split('#').next().unwrap_or("").trim();
            let mut words = line.split_whitespace();
            match words.next() {
                None => {}
                Some("order") => {
                    script.order = match words.next() {
                        Some("fifo") => Order::Fifo,
                        Some("lifo") => Order::Lifo,
                        other => return Err(err(format!("unknown order {other:?}"))),
                    }
                }
                Some("defer") => {
                    let mut rule = DeferRule::default();
                    for word in words {
                        let (key, value) =
                            word.split_once('=').ok_or_else(|| err(format!("expected key=value, got {word}")))?;
                        let value: u64 = value.parse().map_err(|_| err(format!("bad number in {word}")))?;
                        match key {
                            "sender" => rule.sender = Some(PlayerId(value as usize)),
                            "recipient" => rule.recipient = Some(PlayerId(value as usize)),
                            "game" => rule.game = Some(value),
                            "stage" => {
                                rule.stage = Some(
                                    Stage::from_number(value as u8).ok_or_else(|| err(format!("bad stage {value}")))?,
                                )
                            }
                            _ => return Err(err(format!("unknown key {key}"))),
                        }
                    }
                    script.defer.push(rule);
                }
                Some(other) => return Err(err(format!("unknown directive {other}"))),
            }
        }
        Ok(script)
    }
}

/// Live scheduler state for one run.
#[derive(Debug, Clone)]
pub struct Scheduler {
    policy: SchedulerPolicy,
    rng: Option<SimRng>,
}

impl Scheduler {
    pub fn new(policy: SchedulerPolicy) -> Self {
        let rng = match policy.kind {
            SchedulerKind::RandomSeeded(seed) => Some(seeded(seed)),
            _ => None,
        };
        Self { policy, rng }
    }

    pub fn policy(&self) -> &SchedulerPolicy {
        &self.policy
    }

    /// Index into `pending` (ordered oldest first) of the next delivery.
    pub fn pick(&mut self, pending: &[Delivery], step: u64) -> usize {
        assert!(!pending.is_empty(), "nothing to schedule");
        if step.saturating_sub(pending[0].enqueued_at) >= self.policy.fairness_budget {
            return 0;
        }
        match &self.policy.kind {
            SchedulerKind::Fifo => 0,
            SchedulerKind::RandomSeeded(_) => self.rng.as_mut().expect("seeded").random_range(0..pending.len()),
            SchedulerKind::AdversarialScripted(script) => {
                let allowed = |d: &&Delivery| !script.defer.iter().any(|r| r.matches(d));
                let found = match script.order {
                    Order::Fifo => pending.iter().position(|d| allowed(&d)),
                    Order::Lifo => pending.iter().rposition(|d| allowed(&d)),
                };
                found.unwrap_or(0)
            }
        }
    }
}

/// Picks the next delivery under `policy` with a fresh scheduler.
pub fn schedule_step(policy: &SchedulerPolicy, pending: &[Delivery], step: u64) -> usize {
    Scheduler::new(policy.clone()).pick(pending, step)
}
