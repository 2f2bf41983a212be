//! Experiment configuration (TOML).

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use rand::seq::index::sample;
use rsslab::analysis::SecretDistribution;
use rsslab::channel::{SchedulerPolicy, Script};
use rsslab::dealer::DealerParams;
use rsslab::rng::seeded;
use rsslab::strategies::{StrategyKind, StrategyProfile, UtilityProfile};
use rsslab::PlayerId;
use serde::Deserialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("cannot parse {path}: {source}")]
    Parse { path: PathBuf, source: Box<toml::de::Error> },
    #[error("{0}")]
    Invalid(String),
}

fn invalid<T>(msg: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError::Invalid(msg.into()))
}

/// A secret given either by index or by its label in `secret_set`.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum SecretRef {
    Index(u32),
    Label(String),
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HonestSelection {
    /// Explicit honest players.
    pub players: Option<Vec<usize>>,
    /// Pick this many honest players at random from the master seed.
    pub count: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct PlayerUtility {
    pub player: usize,
    #[serde(flatten)]
    pub utility: UtilityProfile,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct StrategyEntry {
    /// Omitted entries go to the non-honest players in index order.
    pub player: Option<usize>,
    #[serde(flatten)]
    pub kind: StrategyKind,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoalitionSpec {
    pub id: usize,
    pub members: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PolicyName {
    #[default]
    Fifo,
    Random,
    Script,
}

#[derive(Debug, Clone, PartialEq, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct ScheduleSection {
    #[serde(default)]
    pub policy: PolicyName,
    /// Script path, relative to the config file.
    pub script: Option<PathBuf>,
    pub fairness_budget: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisSection {
    #[serde(default = "default_share_len")]
    pub share_len: usize,
    #[serde(default = "default_game")]
    pub game: usize,
}

fn default_share_len() -> usize {
    2
}

fn default_game() -> usize {
    1
}

impl Default for AnalysisSection {
    fn default() -> Self {
        Self { share_len: default_share_len(), game: default_game() }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub n: usize,
    pub m: usize,
    pub k: usize,
    pub beta: f64,
    pub secret_set: Option<Vec<String>>,
    pub distribution: Option<Vec<f64>>,
    #[serde(default = "default_secret")]
    pub secret: SecretRef,
    #[serde(default)]
    pub seed: u64,
    pub trials: Option<u64>,
    pub forgery_trials: Option<u64>,
    pub max_steps: Option<u64>,
    pub honest: Option<HonestSelection>,
    pub utility: Option<UtilityProfile>,
    #[serde(default)]
    pub player_utility: Vec<PlayerUtility>,
    #[serde(default)]
    pub strategy: Vec<StrategyEntry>,
    #[serde(default)]
    pub coalition: Vec<CoalitionSpec>,
    #[serde(default)]
    pub schedule: ScheduleSection,
    #[serde(default)]
    pub analysis: AnalysisSection,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn default_secret() -> SecretRef {
    SecretRef::Index(0)
}

/// Everything downstream commands need, checked.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub dealer: DealerParams,
    pub labels: Vec<String>,
    pub dist: SecretDistribution,
    pub utilities: Vec<UtilityProfile>,
    pub profile: StrategyProfile,
    pub honest: Vec<PlayerId>,
    pub schedule: ScheduleSection,
    pub analysis: AnalysisSection,
    pub trials: u64,
    pub forgery_trials: u64,
    pub max_steps: Option<u64>,
    pub base_dir: PathBuf,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read { path: path.into(), source })?;
        let mut cfg: Self = toml::from_str(&text)
            .map_err(|source| ConfigError::Parse { path: path.into(), source: Box::new(source) })?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    pub fn resolve(&self, seed_override: Option<u64>) -> Result<Experiment, ConfigError> {
        let seed = seed_override.unwrap_or(self.seed);
        let n = self.n;
        let (labels, dist) = match (&self.secret_set, &self.distribution) {
            (None, None) => return invalid("one of `secret_set` or `distribution` is required"),
            (Some(set), None) => (set.clone(), SecretDistribution::uniform(set.len().max(1))),
            (set, Some(probs)) => {
                let dist = SecretDistribution::new(probs.clone()).map_err(|e| ConfigError::Invalid(e.to_string()))?;
                let labels = set.clone().unwrap_or_else(|| (0..probs.len()).map(|i| i.to_string()).collect());
                (labels, dist)
            }
        };
        if labels.is_empty() {
            return invalid("secret set is empty");
        }
        if labels.len() != dist.z() {
            return invalid(format!("secret_set has {} entries but distribution has {}", labels.len(), dist.z()));
        }
        let secret = match &self.secret {
            SecretRef::Index(i) => *i,
            SecretRef::Label(name) => match labels.iter().position(|l| l == name) {
                Some(i) => i as u32,
                None => return invalid(format!("secret {name:?} is not in secret_set")),
            },
        };
        let dealer = DealerParams {
            secret,
            beta: self.beta,
            m: self.m,
            k: self.k,
            n,
            secret_set_size: labels.len() as u32,
            seed,
        };
        dealer.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;

        let mut utilities = vec![self.utility.unwrap_or(UtilityProfile::new(5.0, 3.0, 1.0)); n];
        for pu in &self.player_utility {
            check_player(pu.player, n, "player_utility")?;
            utilities[pu.player] = pu.utility;
        }
        for (i, u) in utilities.iter().enumerate() {
            u.validate().map_err(|e| ConfigError::Invalid(format!("player {i}: {e}")))?;
        }

        let honest = self.honest_players(seed)?;
        let profile = self.profile(&honest)?;
        if honest.len() < self.k + 1 {
            return invalid(format!("{} honest players, need at least k+1 = {}", honest.len(), self.k + 1));
        }
        if self.schedule.policy == PolicyName::Script && self.schedule.script.is_none() {
            return invalid("schedule.policy = \"script\" needs schedule.script");
        }
        if self.analysis.game == 0 || self.analysis.share_len <= self.analysis.game {
            return invalid("analysis needs share_len > game >= 1");
        }
        Ok(Experiment {
            dealer,
            labels,
            dist,
            utilities,
            profile,
            honest,
            schedule: self.schedule.clone(),
            analysis: self.analysis.clone(),
            trials: self.trials.unwrap_or(1000),
            forgery_trials: self.forgery_trials.unwrap_or(50_000),
            max_steps: self.max_steps,
            base_dir: self.base_dir.clone(),
        })
    }

    fn honest_players(&self, seed: u64) -> Result<Vec<PlayerId>, ConfigError> {
        let n = self.n;
        let Some(sel) = &self.honest else {
            // Everyone without a strategy or coalition.
            let mut taken = BTreeSet::new();
            for s in &self.strategy {
                match s.player {
                    Some(p) => {
                        taken.insert(p);
                    }
                    None => return invalid("strategy entries need `player` unless [honest] selects players"),
                }
            }
            taken.extend(self.coalition.iter().flat_map(|c| c.members.iter().copied()));
            return Ok((0..n).filter(|i| !taken.contains(i)).map(PlayerId).collect());
        };
        match (&sel.players, sel.count) {
            (Some(list), None) => {
                let set: BTreeSet<usize> = list.iter().copied().collect();
                if set.len() != list.len() {
                    return invalid("honest.players has duplicates");
                }
                for &p in &set {
                    check_player(p, n, "honest.players")?;
                }
                Ok(set.into_iter().map(PlayerId).collect())
            }
            (None, Some(count)) => {
                if count > n {
                    return invalid(format!("honest.count = {count} exceeds n = {n}"));
                }
                let mut picked = sample(&mut seeded(seed ^ 0x4f4e_4553_5459), n, count).into_vec();
                picked.sort_unstable();
                Ok(picked.into_iter().map(PlayerId).collect())
            }
            _ => invalid("[honest] needs exactly one of `players` or `count`"),
        }
    }

    fn profile(&self, honest: &[PlayerId]) -> Result<StrategyProfile, ConfigError> {
        let n = self.n;
        let mut kinds = vec![StrategyKind::Honest; n];
        let mut assigned = vec![false; n];
        let mut free = (0..n).filter(|i| !honest.contains(&PlayerId(*i)));
        let mut assign = |p: usize, kind: StrategyKind, what: &str| -> Result<(), ConfigError> {
            check_player(p, n, what)?;
            if honest.contains(&PlayerId(p)) {
                return invalid(format!("{what}: player {p} is in the honest set"));
            }
            if std::mem::replace(&mut assigned[p], true) {
                return invalid(format!("{what}: player {p} already has a strategy"));
            }
            kinds[p] = kind;
            Ok(())
        };
        for c in &self.coalition {
            if c.members.is_empty() {
                return invalid(format!("coalition {} has no members", c.id));
            }
            for &p in &c.members {
                assign(p, StrategyKind::CoalitionMember { id: c.id }, "coalition")?;
            }
        }
        for s in &self.strategy {
            check_kind(&s.kind, n)?;
            let p = match s.player {
                Some(p) => p,
                None => loop {
                    match free.next() {
                        Some(p)
                            if !self.coalition.iter().any(|c| c.members.contains(&p))
                                && !self.strategy.iter().any(|e| e.player == Some(p)) =>
                        {
                            break p
                        }
                        Some(_) => continue,
                        None => return invalid("more strategy entries than non-honest players"),
                    }
                },
            };
            assign(p, s.kind.clone(), "strategy")?;
        }
        Ok(StrategyProfile { kinds })
    }
}

fn check_player(p: usize, n: usize, what: &str) -> Result<(), ConfigError> {
    if p >= n {
        return invalid(format!("{what}: player {p} out of range for n = {n}"));
    }
    Ok(())
}

fn check_kind(kind: &StrategyKind, n: usize) -> Result<(), ConfigError> {
    let game = match kind {
        StrategyKind::SilentFrom { game, .. }
        | StrategyKind::ForgeIndicator { game }
        | StrategyKind::FakeTrueGame { game }
        | StrategyKind::GuessAndQuit { game, .. }
        | StrategyKind::MaliciousEarlyStop { game } => Some(*game),
        StrategyKind::MaliciousSideChannel { recipients } => {
            for r in recipients {
                check_player(r.0, n, "side channel recipient")?;
            }
            None
        }
        StrategyKind::Honest | StrategyKind::CoalitionMember { .. } => None,
    };
    if game == Some(0) {
        return invalid("games are numbered from 1");
    }
    Ok(())
}

impl Experiment {
    /// Scheduler from the config, or from a `--schedule` override.
    pub fn policy(&self, flag: Option<&str>) -> Result<SchedulerPolicy, ConfigError> {
        let n = self.dealer.n;
        let mut policy = match flag {
            Some(text) => parse_schedule(text, Path::new(""), self.dealer.seed, n)?,
            None => match self.schedule.policy {
                PolicyName::Fifo => SchedulerPolicy::fifo(n),
                PolicyName::Random => SchedulerPolicy::random(self.dealer.seed, n),
                PolicyName::Script => {
                    let path = self.schedule.script.as_ref().expect("checked at load");
                    SchedulerPolicy::scripted(read_script(&self.base_dir.join(path))?, n)
                }
            },
        };
        if let Some(b) = self.schedule.fairness_budget {
            if b == 0 {
                return invalid("fairness_budget must be positive");
            }
            policy.fairness_budget = b;
        }
        Ok(policy)
    }
}

/// `fifo`, `random` or `script:PATH`.
pub fn parse_schedule(text: &str, base: &Path, seed: u64, n: usize) -> Result<SchedulerPolicy, ConfigError> {
    match text {
        "fifo" => Ok(SchedulerPolicy::fifo(n)),
        "random" => Ok(SchedulerPolicy::random(seed, n)),
        _ => match text.strip_prefix("script:") {
            Some(path) => Ok(SchedulerPolicy::scripted(read_script(&base.join(path))?, n)),
            None => invalid(format!("unknown schedule {text:?}; expected fifo, random or script:PATH")),
        },
    }
}

fn read_script(path: &Path) -> Result<Script, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read { path: path.into(), source })?;
    text.parse().map_err(|e| ConfigError::Invalid(format!("{}: {e}", path.display())))
}
