use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

const BASE: &str = r#"
n = 4
m = 3
k = 2
secret_set = ["red", "green", "blue", "black"]
secret = "blue"
seed = 11

[utility]
u_plus = 5.0
u = 3.0
u_minus = 1.0
"#;

fn rsslab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rsslab")).args(args).output().expect("binary runs")
}

fn last_json(out: &Output) -> Value {
    let stdout = String::from_utf8_lossy(&out.stdout);
    serde_json::from_str(stdout.lines().last().expect("some output")).expect("json report")
}

fn beta_first(beta: f64, tables: &str) -> String {
    // BASE ends inside [utility], so top-level keys go before it.
    let (head, tail) = BASE.split_at(BASE.find("[utility]").unwrap());
    format!("{head}beta = {beta}\n{tail}{tables}")
}

fn config(dir: &Path, name: &str, beta: f64, tables: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, beta_first(beta, tables)).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn deal_writes_shares_and_truth_deterministically() {
    let dir = TempDir::new().unwrap();
    let cfg = config(dir.path(), "exp.toml", 0.2, "");
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let o = rsslab(&["deal", "--config", &cfg, "--out", out.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let mut names: Vec<_> = fs::read_dir(&a).unwrap().map(|e| e.unwrap().file_name().into_string().unwrap()).collect();
    names.sort();
    assert_eq!(names, ["share_0.bin", "share_1.bin", "share_2.bin", "share_3.bin", "truth.json"]);
    for name in &names {
        assert_eq!(fs::read(a.join(name)).unwrap(), fs::read(b.join(name)).unwrap(), "{name}");
    }
    let o = rsslab(&["deal", "--config", &cfg, "--seed", "12", "--out", dir.path().join("c").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert_ne!(fs::read(a.join("truth.json")).unwrap(), fs::read(dir.path().join("c/truth.json")).unwrap());
}

#[test]
fn invalid_thresholds_exit_2() {
    let dir = TempDir::new().unwrap();
    let bad = dir.path().join("bad.toml");
    fs::write(&bad, beta_first(0.2, "").replace("k = 2", "k = 3")).unwrap();
    let o = rsslab(&["deal", "--config", bad.to_str().unwrap(), "--out", dir.path().join("x").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("2 <= k <= m-1"));
    let o = rsslab(&["analyze", "--config", dir.path().join("missing.toml").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let o = rsslab(&["run", "--config", &config(dir.path(), "e.toml", 0.2, ""), "--schedule", "sideways"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn honest_run_reconstructs_for_everyone() {
    let dir = TempDir::new().unwrap();
    let cfg = config(dir.path(), "exp.toml", 0.2, "");
    let o = rsslab(&["run", "--config", &cfg, "--format", "ndjson", "--schedule", "random"]);
    assert_eq!(o.status.code(), Some(0));
    let report = last_json(&o);
    assert_eq!(report["secret_label"], "blue");
    for p in report["players"].as_array().unwrap() {
        assert_eq!(p["correct"], true);
        assert_eq!(p["output_label"], "blue");
        assert_eq!(p["halt"], "secret_revealed");
        assert_eq!(p["utility"], 3.0);
    }
}

#[test]
fn silent_player_stalls_everyone() {
    let dir = TempDir::new().unwrap();
    let cfg =
        config(dir.path(), "exp.toml", 0.2, "[[strategy]]\nplayer = 0\nkind = \"silent_from\"\ngame = 1\nstage = 1\n");
    let out = dir.path().join("out");
    let o = rsslab(&["run", "--config", &cfg, "--format", "ndjson", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let report = last_json(&o);
    for p in &report["players"].as_array().unwrap()[1..] {
        assert_eq!(p["halt"], "stalled");
        assert_eq!(p["correct"], false);
    }
    assert!(fs::read_to_string(out.join("transcript.ndjson")).unwrap().lines().count() > 0);
    assert!(out.join("report.ndjson").exists());
}

#[test]
fn scripted_schedule_matches_fifo_on_dealt_shares() {
    let dir = TempDir::new().unwrap();
    let cfg = config(dir.path(), "exp.toml", 0.2, "");
    let shares = dir.path().join("shares");
    assert_eq!(rsslab(&["deal", "--config", &cfg, "--out", shares.to_str().unwrap()]).status.code(), Some(0));
    let script = dir.path().join("adv.txt");
    fs::write(&script, "# starve player 2\norder lifo\ndefer sender=2\ndefer recipient=0 stage=2\n").unwrap();
    let outputs = |schedule: &str| {
        let o = rsslab(&["run", "--shares", shares.to_str().unwrap(), "--schedule", schedule, "--format", "ndjson"]);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
        let report = last_json(&o);
        assert_eq!(report["schedule"], schedule.split(':').next().unwrap());
        report["players"].as_array().unwrap().iter().map(|p| p["output"].clone()).collect::<Vec<_>>()
    };
    let fifo = outputs("fifo");
    assert!(fifo.iter().all(|v| v == 2));
    assert_eq!(outputs(&format!("script:{}", script.display())), fifo);
}

#[test]
fn mismatched_shares_are_rejected() {
    let dir = TempDir::new().unwrap();
    let four = config(dir.path(), "four.toml", 0.2, "");
    let five = dir.path().join("five.toml");
    fs::write(&five, beta_first(0.2, "").replace("n = 4", "n = 5")).unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    rsslab(&["deal", "--config", &four, "--out", a.to_str().unwrap()]);
    rsslab(&["deal", "--config", five.to_str().unwrap(), "--out", b.to_str().unwrap()]);
    fs::copy(b.join("share_4.bin"), a.join("share_4.bin")).unwrap();
    let o = rsslab(&["run", "--shares", a.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("incompatible shares"));
}

#[test]
fn analyze_reports_beta0_and_verdicts() {
    let dir = TempDir::new().unwrap();
    let below = config(dir.path(), "below.toml", 0.005, "");
    let o = rsslab(&["analyze", "--config", &below, "--format", "ndjson"]);
    assert_eq!(o.status.code(), Some(0));
    let r = last_json(&o);
    assert!((r["beta0"].as_f64().unwrap() - 0.007519).abs() < 1e-6);
    assert_eq!(r["verdicts"]["beta < beta0"], true);

    let above = config(dir.path(), "above.toml", 0.2, "");
    let o = rsslab(&["analyze", "--config", &above]);
    assert_eq!(o.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&o.stdout).contains("\"beta < beta0\" = false"));

    // c = 0.5, D(b) = 0.1 over ten secrets, n = 3.
    let skew = dir.path().join("skew.toml");
    let probs = ["0.1"; 10];
    fs::write(&skew, format!("n = 3\nm = 2\nk = 2\nbeta = 0.01\ndistribution = [{}]\n", probs.join(", "))).unwrap();
    // m = 2 leaves no valid k, so analysis rejects the config before computing anything.
    assert_eq!(rsslab(&["analyze", "--config", skew.to_str().unwrap()]).status.code(), Some(2));
    fs::write(&skew, format!("n = 4\nm = 3\nk = 2\nbeta = 0.01\ndistribution = [{}]\n", probs.join(", "))).unwrap();
    let r = last_json(&rsslab(&["analyze", "--config", skew.to_str().unwrap(), "--format", "ndjson"]));
    let beta0 = r["beta0"].as_f64().unwrap();
    assert!((beta0 - 0.4 / (0.4 + 81.0)).abs() < 1e-12, "{beta0}");
}

#[test]
fn montecarlo_rounds_and_short_fraction() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("mc.toml");
    let (head, tail) = BASE.split_at(BASE.find("[utility]").unwrap());
    fs::write(&cfg, format!("{head}beta = 0.2\nforgery_trials = 2000\n{tail}")).unwrap();
    let o = rsslab(&["montecarlo", "--config", cfg.to_str().unwrap(), "--trials", "20000", "--format", "ndjson"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let r = last_json(&o);
    let n = 20_000.0;
    let mean = r["rounds"]["mean_true_game"]["mean"].as_f64().unwrap();
    let sigma = (0.8f64 / 0.04 / n).sqrt();
    assert!((mean - 5.0).abs() <= 4.0 * sigma, "{mean}");
    let frac = r["short_player"]["strict_fraction"]["mean"].as_f64().unwrap();
    assert!((frac - 0.75).abs() <= 4.0 * (0.75f64 * 0.25 / n).sqrt(), "{frac}");
    // beta = 0.2 is above beta0, so the equilibrium campaign is skipped with a reason.
    assert!(r["equilibrium"].is_null());
    assert!(r["equilibrium_skipped"].as_str().unwrap().contains("beta0"));
}

#[test]
fn montecarlo_equilibrium_with_configured_deviation() {
    let dir = TempDir::new().unwrap();
    let cfg = config(
        dir.path(),
        "exp.toml",
        0.005,
        "[[strategy]]\nplayer = 1\nkind = \"guess_and_quit\"\ngame = 1\nstage = 1\nrule = { prior = { guess = 0 } }\n",
    );
    let run = || rsslab(&["montecarlo", "--config", &cfg, "--trials", "60", "--schedule", "random"]);
    let o = run();
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(o.stdout, run().stdout);
    let text = String::from_utf8_lossy(&o.stdout);
    assert!(text.contains("name = \"1:guess_and_quit\""), "{text}");
    assert!(text.contains("holds = true"));
}
