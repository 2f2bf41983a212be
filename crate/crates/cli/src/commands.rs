use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rsslab::analysis::{
    bounds_report, equilibrium_mc, honest_short_fraction, mean_long_share_bytes, mean_true_game, measure_forgery_rate,
    BoundsReport, EquilibriumConfig, EquilibriumReport, Estimate, ForgeryReport, ShareSizeReport,
};
use rsslab::channel::{run_simulation_with, SchedulerKind, SimOptions, Transcript};
use rsslab::dealer::{deal, DealerTruth, PlayerShare};
use rsslab::player::HaltReason;
use rsslab::strategies::{score_outcome, StrategyKind, StrategyProfile};
use rsslab::PlayerId;
use serde::Serialize;
use thiserror::Error;

use crate::config::{parse_schedule, ConfigError, Experiment, PolicyName};

pub const TRUTH_FILE: &str = "truth.json";

pub fn share_file(owner: usize) -> String {
    format!("share_{owner}.bin")
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("incompatible shares: {0}")]
    IncompatibleShares(String),
    #[error("{context}: {source}")]
    Io { context: String, source: std::io::Error },
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::IncompatibleShares(_) => 2,
            CliError::Io { .. } | CliError::Runtime(_) => 1,
        }
    }
}

pub fn io_err(context: impl Into<String>) -> impl FnOnce(std::io::Error) -> CliError {
    let context = context.into();
    move |source| CliError::Io { context, source }
}

fn runtime(e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(e.to_string())
}

// ---- deal ----

#[derive(Debug, Serialize)]
pub struct ShareFileRow {
    pub owner: usize,
    pub path: String,
    pub bytes: usize,
}

#[derive(Debug, Serialize)]
pub struct DealReport {
    pub p: u32,
    pub n: usize,
    pub m: usize,
    pub k: usize,
    pub seed: u64,
    pub truth: String,
    pub shares: Vec<ShareFileRow>,
}

pub fn cmd_deal(exp: &Experiment, out_dir: &Path) -> Result<DealReport, CliError> {
    let dealt = deal(&exp.dealer).map_err(|e| ConfigError::Invalid(e.to_string()))?;
    fs::create_dir_all(out_dir).map_err(io_err(format!("creating {}", out_dir.display())))?;
    let mut shares = Vec::new();
    for share in &dealt.shares {
        let path = out_dir.join(share_file(share.owner.0));
        let bytes = share.to_bytes();
        fs::write(&path, &bytes).map_err(io_err(format!("writing {}", path.display())))?;
        shares.push(ShareFileRow { owner: share.owner.0, path: path.display().to_string(), bytes: bytes.len() });
    }
    let truth = out_dir.join(TRUTH_FILE);
    let json = serde_json::to_string_pretty(&dealt.truth).map_err(runtime)?;
    fs::write(&truth, json + "\n").map_err(io_err(format!("writing {}", truth.display())))?;
    let d = &exp.dealer;
    Ok(DealReport {
        p: dealt.truth.p.get(),
        n: d.n,
        m: d.m,
        k: d.k,
        seed: d.seed,
        truth: truth.display().to_string(),
        shares,
    })
}

/// Reads `share_*.bin` from `dir` and checks that they come from one deal.
pub fn load_shares(dir: &Path) -> Result<Vec<PlayerShare>, CliError> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(io_err(format!("reading {}", dir.display())))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.file_name().and_then(|n| n.to_str()).is_some_and(|n| n.starts_with("share_") && n.ends_with(".bin"))
        })
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(CliError::IncompatibleShares(format!("no share files in {}", dir.display())));
    }
    let mut shares = Vec::new();
    for path in &paths {
        let bytes = fs::read(path).map_err(io_err(format!("reading {}", path.display())))?;
        let share = PlayerShare::from_bytes(&bytes)
            .map_err(|e| CliError::IncompatibleShares(format!("{}: {e}", path.display())))?;
        shares.push(share);
    }
    check_compatible(&mut shares)?;
    Ok(shares)
}

fn check_compatible(shares: &mut [PlayerShare]) -> Result<(), CliError> {
    let params = shares[0].params;
    if let Some(bad) = shares.iter().find(|s| s.params != params) {
        return Err(CliError::IncompatibleShares(format!(
            "share of player {} has header {:?}, expected {:?}",
            bad.owner.0, bad.params, params
        )));
    }
    shares.sort_by_key(|s| s.owner);
    let owners: Vec<usize> = shares.iter().map(|s| s.owner.0).collect();
    if owners != (0..params.n).collect::<Vec<_>>() {
        return Err(CliError::IncompatibleShares(format!("expected owners 0..{}, found {owners:?}", params.n)));
    }
    let longest = shares.iter().map(|s| s.len()).max().unwrap_or(0);
    let short = shares.iter().filter(|s| s.len() < longest).count();
    if short > 1 || shares.iter().any(|s| s.verify_keys.games() != s.len() + 1) {
        return Err(CliError::IncompatibleShares("share lengths do not fit one deal".into()));
    }
    Ok(())
}

// ---- run ----

#[derive(Debug, Serialize)]
pub struct PlayerRow {
    pub player: usize,
    pub strategy: String,
    pub honest: bool,
    pub output: Option<u32>,
    pub output_label: Option<String>,
    pub correct: Option<bool>,
    pub halt: Option<HaltReason>,
    pub games: u64,
    pub utility: Option<f64>,
}

#[derive(Debug, Serialize)]
pub struct RunReport {
    pub p: u32,
    pub n: usize,
    pub m: usize,
    pub k: usize,
    pub schedule: String,
    pub steps: u64,
    pub secret: Option<u32>,
    pub secret_label: Option<String>,
    /// Every honest player output the secret (or, without a truth file, the same value).
    pub honest_success: bool,
    pub players: Vec<PlayerRow>,
}

pub struct RunInput<'a> {
    pub exp: Option<&'a Experiment>,
    pub shares_dir: Option<&'a Path>,
    pub schedule: Option<&'a str>,
    pub seed: Option<u64>,
}

fn strategy_name(kind: &StrategyKind) -> String {
    match serde_json::to_value(kind) {
        Ok(serde_json::Value::Object(map)) => map.get("kind").and_then(|v| v.as_str()).unwrap_or("?").to_string(),
        _ => "?".into(),
    }
}

fn schedule_name(kind: &SchedulerKind) -> &'static str {
    match kind {
        SchedulerKind::Fifo => "fifo",
        SchedulerKind::RandomSeeded(_) => "random",
        SchedulerKind::AdversarialScripted(_) => "script",
    }
}

pub fn cmd_run(input: RunInput<'_>) -> Result<(RunReport, Transcript), CliError> {
    let (shares, truth) = match (input.shares_dir, input.exp) {
        (Some(dir), _) => {
            let shares = load_shares(dir)?;
            let truth_path = dir.join(TRUTH_FILE);
            let truth = match fs::read_to_string(&truth_path) {
                Ok(text) => Some(
                    serde_json::from_str::<DealerTruth>(&text)
                        .map_err(|e| CliError::IncompatibleShares(format!("{}: {e}", truth_path.display())))?,
                ),
                Err(_) => None,
            };
            (shares, truth)
        }
        (None, Some(exp)) => {
            let dealt = deal(&exp.dealer).map_err(|e| ConfigError::Invalid(e.to_string()))?;
            (dealt.shares, Some(dealt.truth))
        }
        (None, None) => return Err(ConfigError::Invalid("run needs --config or --shares".into()).into()),
    };
    let params = shares[0].params;
    let n = params.n;
    if let Some(exp) = input.exp {
        let d = &exp.dealer;
        if (d.n, d.m, d.k) != (params.n, params.m, params.k) {
            return Err(CliError::IncompatibleShares(format!(
                "config has n={} m={} k={}, shares have n={} m={} k={}",
                d.n, d.m, d.k, params.n, params.m, params.k
            )));
        }
    }
    let seed = input.seed.or(input.exp.map(|e| e.dealer.seed)).unwrap_or(0);
    let policy = match (input.exp, input.schedule) {
        (Some(exp), flag) => exp.policy(flag)?,
        (None, flag) => parse_schedule(flag.unwrap_or("fifo"), Path::new(""), seed, n)?,
    };
    let profile = input.exp.map(|e| e.profile.clone()).unwrap_or_else(|| StrategyProfile::honest(n));
    let longest = shares.iter().map(|s| s.len()).max().unwrap_or(0);
    let budget = input.exp.and_then(|e| e.max_steps).unwrap_or(4 * (n * n) as u64 * (longest + 2) + 1000);
    let mut agents = profile.build_agents(&shares, seed);
    let transcript =
        run_simulation_with(&mut agents, &policy, &SimOptions { max_steps: budget, record: true }).map_err(runtime)?;

    let labels = input.exp.map(|e| e.labels.clone());
    let label = |v: u32| labels.as_ref().and_then(|l| l.get(v as usize).cloned());
    let scored = match (&truth, input.exp) {
        (Some(t), Some(exp)) => Some(score_outcome(&transcript, t, &profile, &exp.utilities)),
        _ => None,
    };
    let secret = truth.as_ref().map(|t| t.secret_element());
    let honest_set: Vec<PlayerId> = match input.exp {
        Some(exp) => exp.honest.clone(),
        None => PlayerId::all(n).collect(),
    };
    let players: Vec<PlayerRow> = (0..n)
        .map(|i| {
            let output = transcript.outputs[i];
            PlayerRow {
                player: i,
                strategy: strategy_name(&profile.kinds[i]),
                honest: honest_set.contains(&PlayerId(i)),
                output: output.map(|v| v.value()),
                output_label: output.and_then(|v| label(v.value())),
                correct: secret.map(|y| output == Some(y)),
                halt: transcript.halts[i],
                games: transcript.games_reached[i],
                utility: scored.as_ref().map(|s| s.utilities[i]),
            }
        })
        .collect();
    let honest: Vec<&PlayerRow> = players.iter().filter(|r| r.honest).collect();
    let honest_success = match secret {
        Some(y) => honest.iter().all(|r| r.output == Some(y.value())),
        None => honest.iter().all(|r| r.output.is_some() && r.output == honest[0].output),
    };
    let report = RunReport {
        p: params.p.get(),
        n,
        m: params.m,
        k: params.k,
        schedule: schedule_name(&policy.kind).into(),
        steps: transcript.steps,
        secret: secret.map(|y| y.value()),
        secret_label: secret.and_then(|y| label(y.value())),
        honest_success,
        players,
    };
    Ok((report, transcript))
}

// ---- analyze ----

#[derive(Debug, Serialize)]
pub struct AnalyzeReport {
    pub n: usize,
    pub p: u32,
    pub view_share_len: usize,
    pub view_game: usize,
    #[serde(flatten)]
    pub bounds: BoundsReport,
    pub verdicts: BTreeMap<String, bool>,
}

pub fn cmd_analyze(exp: &Experiment) -> Result<AnalyzeReport, CliError> {
    let d = &exp.dealer;
    let p = d.field().map_err(|e| ConfigError::Invalid(e.to_string()))?;
    let point = (exp.analysis.share_len, exp.analysis.game);
    let bounds = bounds_report(&exp.utilities, &exp.dist, d.n, d.beta, p.get(), point)
        .map_err(|e| ConfigError::Invalid(e.to_string()))?;
    let verdicts = BTreeMap::from([
        ("D(b) < c0".to_string(), bounds.admissible_distribution),
        ("beta < beta0".to_string(), bounds.admissible_beta),
    ]);
    Ok(AnalyzeReport { n: d.n, p: p.get(), view_share_len: point.0, view_game: point.1, bounds, verdicts })
}

// ---- montecarlo ----

#[derive(Debug, Serialize)]
pub struct RoundsSection {
    pub mean_true_game: Estimate,
    pub expected: f64,
}

#[derive(Debug, Serialize)]
pub struct ShortPlayerSection {
    /// Fraction of deals whose short player lands in a random `k+1` honest set.
    pub strict_fraction: Estimate,
    pub eps_nash_fraction: f64,
    pub expected: f64,
}

#[derive(Debug, Serialize)]
pub struct MonteCarloReport {
    pub trials: u64,
    pub seed: u64,
    pub beta: f64,
    pub p: u32,
    pub rounds: RoundsSection,
    pub share_size: ShareSizeReport,
    pub short_player: ShortPlayerSection,
    pub forgery: ForgeryReport,
    pub equilibrium: Option<EquilibriumReport>,
    pub equilibrium_skipped: Option<String>,
}

pub fn cmd_montecarlo(exp: &Experiment, trials: u64, schedule: Option<&str>) -> Result<MonteCarloReport, CliError> {
    let d = &exp.dealer;
    let random_schedule = match (schedule, exp.schedule.policy) {
        (Some("fifo"), _) | (None, PolicyName::Fifo) => false,
        (Some("random"), _) | (None, PolicyName::Random) => true,
        (other, _) => {
            let name = other.unwrap_or("script");
            return Err(
                ConfigError::Invalid(format!("montecarlo supports fifo or random schedules, not {name}")).into()
            );
        }
    };
    let p = d.field().map_err(|e| ConfigError::Invalid(e.to_string()))?;
    let seed = d.seed;
    let rounds = mean_true_game(d, trials, seed).map_err(runtime)?;
    let share_size = mean_long_share_bytes(d, trials, seed ^ 1).map_err(runtime)?;
    let strict = honest_short_fraction(d, trials, seed ^ 2).map_err(runtime)?;
    let forgery = measure_forgery_rate(p.get(), exp.forgery_trials, seed ^ 3).map_err(runtime)?;

    let mut profiles = Vec::new();
    if !exp.profile.deviators().is_empty() {
        let names: Vec<String> = exp
            .profile
            .deviators()
            .iter()
            .map(|PlayerId(i)| format!("{i}:{}", strategy_name(&exp.profile.kinds[*i])))
            .collect();
        profiles.push((names.join(","), exp.profile.clone()));
    }
    let cfg = EquilibriumConfig {
        template: d.clone(),
        dist: exp.dist.clone(),
        utilities: exp.utilities.clone(),
        profiles,
        random_schedule,
        master_seed: seed ^ 4,
        forgery_trials: exp.forgery_trials,
    };
    let (equilibrium, equilibrium_skipped) = match equilibrium_mc(&cfg, trials) {
        Ok(r) => (Some(r), None),
        Err(e) => (None, Some(e.to_string())),
    };
    Ok(MonteCarloReport {
        trials,
        seed,
        beta: d.beta,
        p: p.get(),
        rounds: RoundsSection { mean_true_game: rounds, expected: 1.0 / d.beta },
        share_size,
        short_player: ShortPlayerSection {
            eps_nash_fraction: 1.0 - strict.mean,
            strict_fraction: strict,
            expected: (d.k + 1) as f64 / d.n as f64,
        },
        forgery,
        equilibrium,
        equilibrium_skipped,
    })
}
