//! Trial campaigns over full deals and simulations.

use rand::seq::index::sample as sample_indices;
use rand::Rng;
use serde::Serialize;

use super::{compute_beta0, compute_ci, AnalysisError, Estimate, SecretDistribution};
use crate::channel::{run_simulation_with, SchedulerPolicy, SimOptions};
use crate::dealer::{deal, DealerParams};
use crate::field::sample_uniform;
use crate::itmac::{self, Tag};
use crate::par::map_trials;
use crate::player::HaltReason;
use crate::rng::{trial_rng, trial_seed};
use crate::strategies::{score_outcome, StrategyProfile, UtilityProfile};
use crate::types::PlayerId;

fn trial_params(template: &DealerParams, master: u64, index: u64) -> DealerParams {
    DealerParams { seed: trial_seed(master, index), ..template.clone() }
}

/// Mean true-game index `l` over `deals` deals.
pub fn mean_true_game(template: &DealerParams, deals: u64, master: u64) -> Result<Estimate, AnalysisError> {
    template.validate()?;
    let ls = map_trials(deals, |i| deal(&trial_params(template, master, i)).map(|d| d.truth.l as f64));
    Ok(Estimate::from_samples(&ls.into_iter().collect::<Result<Vec<_>, _>>()?))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ShareSizeReport {
    pub beta: f64,
    pub bytes: Estimate,
    pub games: Estimate,
}

/// Mean serialized size of a long share (the first player who is not short).
pub fn mean_long_share_bytes(
    template: &DealerParams,
    deals: u64,
    master: u64,
) -> Result<ShareSizeReport, AnalysisError> {
    template.validate()?;
    let rows = map_trials(deals, |i| {
        let d = deal(&trial_params(template, master, i))?;
        let long = d.shares.iter().find(|s| s.owner != d.truth.short_player).expect("n >= 2");
        Ok::<_, AnalysisError>((long.to_bytes().len() as f64, long.len() as f64))
    })
    .into_iter()
    .collect::<Result<Vec<_>, _>>()?;
    let bytes: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let games: Vec<f64> = rows.iter().map(|r| r.1).collect();
    Ok(ShareSizeReport {
        beta: template.beta,
        bytes: Estimate::from_samples(&bytes),
        games: Estimate::from_samples(&games),
    })
}

/// Fraction of deals whose short player lands in a uniformly chosen honest
/// set of `k + 1` players.
pub fn honest_short_fraction(template: &DealerParams, deals: u64, master: u64) -> Result<Estimate, AnalysisError> {
    template.validate()?;
    let hits = map_trials(deals, |i| {
        let mut rng = trial_rng(master ^ 0x5eed, i);
        let honest = sample_indices(&mut rng, template.n, template.k + 1);
        let d = deal(&trial_params(template, master, i))?;
        Ok::<_, AnalysisError>(honest.iter().any(|h| h == d.truth.short_player.0))
    })
    .into_iter()
    .collect::<Result<Vec<_>, _>>()?;
    Ok(Estimate::proportion(hits.iter().filter(|&&h| h).count() as u64, deals))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ForgeryReport {
    pub p: u32,
    /// Acceptance rate of uniformly guessed tags on a fresh payload.
    pub forged: Estimate,
    pub honest_accepted: u64,
    pub trials: u64,
}

/// Fresh key per trial; a two-element payload with its genuine tag, and a
/// substituted payload with a uniformly guessed tag.
pub fn measure_forgery_rate(p: u32, trials: u64, master: u64) -> Result<ForgeryReport, AnalysisError> {
    let p = crate::field::PrimeModulus::new(p).map_err(|e| AnalysisError::PreconditionViolated(e.to_string()))?;
    let rows = map_trials(trials, |i| {
        let mut rng = trial_rng(master, i);
        let key = itmac::keygen(&mut rng, p);
        let payload = [sample_uniform(&mut rng, p), sample_uniform(&mut rng, p)];
        let honest = itmac::verify(&key, &payload, itmac::mac(&key, &payload).expect("two elements"));
        let forged_payload = [payload[0] + p.one(), payload[1]];
        let guess = Tag(sample_uniform(&mut rng, p));
        (honest, itmac::verify(&key, &forged_payload, guess))
    });
    let forged = rows.iter().filter(|r| r.1).count() as u64;
    Ok(ForgeryReport {
        p: p.get(),
        forged: Estimate::proportion(forged, trials),
        honest_accepted: rows.iter().filter(|r| r.0).count() as u64,
        trials,
    })
}

/// An equilibrium campaign: an honest baseline plus named deviation profiles,
/// all run on the same deals.
#[derive(Debug, Clone)]
pub struct EquilibriumConfig {
    /// Dealer parameters; the secret is redrawn from `dist` every trial.
    pub template: DealerParams,
    pub dist: SecretDistribution,
    pub utilities: Vec<UtilityProfile>,
    pub profiles: Vec<(String, StrategyProfile)>,
    pub random_schedule: bool,
    pub master_seed: u64,
    pub forgery_trials: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProfileRow {
    pub name: String,
    pub utilities: Vec<Estimate>,
    pub mean_games: f64,
    /// Trials where some player output a wrong value.
    pub tricked_trials: u64,
    /// Trials where some player halted on a failed check.
    pub detected_trials: u64,
    pub budget_exhausted: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProfileVerdict {
    pub profile: String,
    pub player: usize,
    pub deviator: Estimate,
    pub honest: Estimate,
    pub eps_hat: f64,
    /// `honest + eps_hat + 4 sigma`.
    pub threshold: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquilibriumReport {
    pub trials: u64,
    pub beta0: f64,
    pub forgery: ForgeryReport,
    pub honest: ProfileRow,
    pub rows: Vec<ProfileRow>,
    pub verdicts: Vec<ProfileVerdict>,
}

struct TrialOutcome {
    utilities: Vec<f64>,
    games: f64,
    tricked: bool,
    detected: bool,
    exhausted: bool,
}

fn run_profile(
    cfg: &EquilibriumConfig,
    profile: &StrategyProfile,
    deal: &crate::dealer::Deal,
    seed: u64,
) -> TrialOutcome {
    let n = cfg.template.n;
    let mut agents = profile.build_agents(&deal.shares, seed);
    let policy = if cfg.random_schedule { SchedulerPolicy::random(seed, n) } else { SchedulerPolicy::fifo(n) };
    let budget = 4 * (n * n) as u64 * (deal.truth.total_games + 2) + 1000;
    match run_simulation_with(&mut agents, &policy, &SimOptions { max_steps: budget, record: false }) {
        Ok(t) => {
            let outcome = score_outcome(&t, &deal.truth, profile, &cfg.utilities);
            TrialOutcome {
                games: t.games_reached.iter().copied().max().unwrap_or(0) as f64,
                tricked: !outcome.tricked.is_empty(),
                detected: t.halts.contains(&Some(HaltReason::CheaterDetected)),
                utilities: outcome.utilities,
                exhausted: false,
            }
        }
        Err(_) => TrialOutcome {
            utilities: cfg.utilities.iter().map(|u| u.u_minus).collect(),
            games: f64::NAN,
            tricked: false,
            detected: false,
            exhausted: true,
        },
    }
}

fn summarize(name: &str, n: usize, outcomes: &[&TrialOutcome]) -> ProfileRow {
    let utilities =
        (0..n).map(|i| Estimate::from_samples(&outcomes.iter().map(|o| o.utilities[i]).collect::<Vec<_>>())).collect();
    let games: Vec<f64> = outcomes.iter().map(|o| o.games).filter(|g| g.is_finite()).collect();
    ProfileRow {
        name: name.to_string(),
        utilities,
        mean_games: Estimate::from_samples(&games).mean,
        tricked_trials: outcomes.iter().filter(|o| o.tricked).count() as u64,
        detected_trials: outcomes.iter().filter(|o| o.detected).count() as u64,
        budget_exhausted: outcomes.iter().filter(|o| o.exhausted).count() as u64,
    }
}

/// Runs every profile on `trials` shared deals and checks that no deviator
/// beats its honest mean by more than `eps_hat + 4 sigma`, where `eps_hat` is
/// the measured forgery rate times `U+ - U-`.
pub fn equilibrium_mc(cfg: &EquilibriumConfig, trials: u64) -> Result<EquilibriumReport, AnalysisError> {
    let n = cfg.template.n;
    if cfg.utilities.len() != n {
        return Err(AnalysisError::PreconditionViolated(format!(
            "{} utility profiles for {n} players",
            cfg.utilities.len()
        )));
    }
    if cfg.dist.z() != cfg.template.secret_set_size as usize {
        return Err(AnalysisError::PreconditionViolated("distribution size differs from the secret set".into()));
    }
    let c = cfg.utilities.iter().map(|u| compute_ci(u.u_plus, u.u, u.u_minus)).collect::<Result<Vec<_>, _>>()?;
    let beta0 = compute_beta0(&c, &cfg.dist, n)?;
    if cfg.template.beta >= beta0 {
        return Err(AnalysisError::PreconditionViolated(format!(
            "beta = {} is not below beta0 = {beta0}",
            cfg.template.beta
        )));
    }
    if cfg.profiles.iter().any(|(_, p)| p.n() != n) {
        return Err(AnalysisError::PreconditionViolated("profile size differs from n".into()));
    }
    cfg.template.validate()?;
    let p = cfg.template.field()?;
    let forgery = measure_forgery_rate(p.get(), cfg.forgery_trials, cfg.master_seed ^ 0xf0f0)?;

    let honest_profile = StrategyProfile::honest(n);
    let per_trial: Vec<Vec<TrialOutcome>> = map_trials(trials, |i| {
        let seed = trial_seed(cfg.master_seed, i);
        let mut rng = trial_rng(cfg.master_seed ^ 0xd157, i);
        let secret = cfg.dist.sample(&mut rng) as u32;
        let _ = rng.random::<u64>();
        let deal = deal(&DealerParams { secret, seed, ..cfg.template.clone() }).expect("template validated");
        std::iter::once(&honest_profile)
            .chain(cfg.profiles.iter().map(|(_, p)| p))
            .map(|profile| run_profile(cfg, profile, &deal, seed))
            .collect()
    });

    let column = |j: usize| per_trial.iter().map(|row| &row[j]).collect::<Vec<_>>();
    let honest = summarize("honest", n, &column(0));
    let rows: Vec<ProfileRow> =
        cfg.profiles.iter().enumerate().map(|(j, (name, _))| summarize(name, n, &column(j + 1))).collect();

    let mut verdicts = Vec::new();
    for ((name, profile), row) in cfg.profiles.iter().zip(&rows) {
        for PlayerId(i) in profile.deviators() {
            let u = &cfg.utilities[i];
            let eps_hat = forgery.forged.mean * (u.u_plus - u.u_minus);
            let (dev, hon) = (row.utilities[i], honest.utilities[i]);
            let threshold = hon.mean + eps_hat + 4.0 * (dev.sigma.powi(2) + hon.sigma.powi(2)).sqrt();
            verdicts.push(ProfileVerdict {
                profile: name.clone(),
                player: i,
                deviator: dev,
                honest: hon,
                eps_hat,
                threshold,
                holds: dev.mean <= threshold,
            });
        }
    }
    Ok(EquilibriumReport { trials, beta0, forgery, honest, rows, verdicts })
}
