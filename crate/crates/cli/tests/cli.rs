use std::path::Path;
use std::process::{Command, Output};

use qauth_cli::config::{AttackArg, ExperimentConfig, ProtocolArg, SourceArg};
use qauth_cli::simulate::{simulate, summary_json};

fn qauth(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qauth")).args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn config(protocol: ProtocolArg, attack: AttackArg, bits: usize, delta: f64, seed: u64) -> ExperimentConfig {
    ExperimentConfig {
        protocol,
        attack,
        source: SourceArg::Perfect,
        challenge_bits: 16,
        bits,
        delta,
        epsilon: 0.0,
        trials: 4000,
        master_seed: seed,
        db_size: 1,
        grid_resolution: None,
        forger: None,
    }
}

#[test]
fn identical_seeds_give_identical_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str, jobs: &str| {
        let out = dir.path().join(name);
        let tr = dir.path().join(format!("{name}.jsonl"));
        let o = qauth(&[
            "--jobs", jobs, "simulate", "--protocol", "online", "--attack", "helstrom-adaptive", "--delta", "0.25",
            "--bits", "2", "--trials", "3000", "--seed", "11", "--out", p(&out), "--transcripts", p(&tr),
        ]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        (std::fs::read(out).unwrap(), std::fs::read(tr).unwrap())
    };
    let a = run("a.json", "1");
    let b = run("b.json", "2");
    assert_eq!(a, b);
}

#[test]
fn different_seeds_agree_statistically() {
    for (protocol, attack, bits) in [
        (ProtocolArg::Offline, AttackArg::ClassicalGuess, 1),
        (ProtocolArg::Online, AttackArg::OptimalForger, 1),
        (ProtocolArg::Online, AttackArg::HelstromNaive, 1),
    ] {
        let a = simulate(&config(protocol, attack, bits, 0.25, 1), None).unwrap();
        let b = simulate(&config(protocol, attack, bits, 0.25, 2), None).unwrap();
        assert_ne!(summary_json(&a), summary_json(&b));
        assert!(a.wilson_lo <= b.wilson_hi && b.wilson_lo <= a.wilson_hi, "{attack:?}");
    }
}

/// Rates over a 100-configuration matrix sit inside their own Wilson
/// interval around the analytic reference in at least 99 cases.
#[test]
fn smoke_matrix_tracks_references() {
    let deltas = [0.0, 0.1, 0.25, 0.4, 0.5];
    let mut configs = Vec::new();
    for (i, &delta) in deltas.iter().enumerate() {
        for bits in [1, 2] {
            for attack in [AttackArg::OptimalForger, AttackArg::HelstromAdaptive, AttackArg::HelstromNaive, AttackArg::None] {
                configs.push(config(ProtocolArg::Online, attack, bits, delta, 100 + i as u64));
            }
            for attack in [AttackArg::ClassicalGuess, AttackArg::None] {
                configs.push(config(ProtocolArg::Offline, attack, bits, delta, 200 + i as u64));
            }
        }
    }
    for (i, eps) in [0.0, 0.01, 0.05, 0.1, 0.2].into_iter().enumerate() {
        for source in [SourceArg::Noisy, SourceArg::Purification] {
            let mut c = config(ProtocolArg::Offline, AttackArg::None, 2, 0.25, 300 + i as u64);
            c.source = source;
            c.epsilon = eps;
            configs.push(c.clone());
            if source == SourceArg::Purification {
                c.attack = AttackArg::Purification;
                c.bits = 1;
                configs.push(c);
            }
        }
    }
    let mut c = config(ProtocolArg::Online, AttackArg::Forger, 1, 0.25, 400);
    c.forger = Some(qauth_cli::config::ForgerArgs {
        rx: 0.6,
        rz: 0.8,
        rpx: 0.0,
        rpz: -1.0,
        q0: 0.5,
    });
    while configs.len() < 100 {
        c.master_seed += 1;
        configs.push(c.clone());
    }
    assert_eq!(configs.len(), 100);

    let mut inside = 0;
    for c in &configs {
        let s = simulate(c, None).unwrap();
        let r = s.analytic_reference.expect("every matrix entry has a reference");
        assert!(s.wilson_lo <= s.empirical_rate && s.empirical_rate <= s.wilson_hi);
        if s.wilson_lo <= r + 1e-12 && r <= s.wilson_hi + 1e-12 {
            inside += 1;
        }
    }
    assert!(inside >= 99, "only {inside} of 100 references covered");
}

#[test]
fn replay_flags_injected_response() {
    let dir = tempfile::tempdir().unwrap();
    let tr = dir.path().join("t.jsonl");
    let o = qauth(&[
        "simulate", "--protocol", "offline", "--bits", "4", "--delta", "0.25", "--trials", "3", "--seed", "4",
        "--transcripts", p(&tr), "--out", p(&dir.path().join("s.json")),
    ]);
    assert_eq!(code(&o), 0);

    let o = qauth(&["replay", p(&tr), "--strict"]);
    assert_eq!(code(&o), 0);
    assert!(String::from_utf8_lossy(&o.stdout).contains("3 of 3 rounds pass"));

    // Leak the verifier's response of round 1 onto the classical channel.
    let text = std::fs::read_to_string(&tr).unwrap();
    let mut lines: Vec<String> = text.lines().map(str::to_string).collect();
    let mut round = 0;
    let mut at = None;
    for (i, l) in lines.iter().enumerate() {
        if l.contains("\"type\":\"header\"") {
            round = serde_json::from_str::<serde_json::Value>(l).unwrap()["round_id"].as_u64().unwrap();
        }
        if round == 1 && l.contains("\"type\":\"verifier\"") {
            at = Some(i);
        }
    }
    let at = at.unwrap();
    let y = serde_json::from_str::<serde_json::Value>(&lines[at]).unwrap()["response"]
        .as_str()
        .unwrap()
        .to_string();
    lines.insert(
        at,
        format!(
            "{{\"type\":\"event\",\"direction\":\"PtoV\",\"round\":1,\"pair_index\":null,\
             \"payload\":{{\"kind\":\"classical\",\"role\":\"reply\",\"bits\":\"{y}\"}}}}"
        ),
    );
    let bad = dir.path().join("bad.jsonl");
    std::fs::write(&bad, lines.join("\n") + "\n").unwrap();

    let lenient = qauth(&["replay", p(&bad)]);
    assert_eq!(code(&lenient), 0);
    let stdout = String::from_utf8_lossy(&lenient.stdout);
    assert!(stdout.contains("FAIL channel_discipline: 1/3"), "{stdout}");
    assert!(stdout.contains("round 1: channel_discipline"));

    let strict = qauth(&["replay", p(&bad), "--strict"]);
    assert_eq!(code(&strict), 3);
}

#[test]
fn replay_rejects_empty_and_missing_files() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty.jsonl");
    std::fs::write(&empty, "").unwrap();
    assert_eq!(code(&qauth(&["replay", p(&empty)])), 2);
    assert_eq!(code(&qauth(&["replay", p(&dir.path().join("missing.jsonl"))])), 2);
    let junk = dir.path().join("junk.jsonl");
    std::fs::write(&junk, "{\"type\":\"event\"}\n").unwrap();
    assert_eq!(code(&qauth(&["replay", p(&junk)])), 2);
}

#[test]
fn configuration_errors_exit_with_one() {
    let bad: &[&[&str]] = &[
        &["simulate", "--protocol", "offline", "--trials", "0", "--seed", "1"],
        &["simulate", "--protocol", "offline", "--trials", "5", "--seed", "1", "--delta", "0.7"],
        &["simulate", "--protocol", "offline", "--trials", "5", "--seed", "1", "--unknown-flag"],
        &["simulate", "--protocol", "offline", "--trials", "5", "--seed", "1", "--attack", "optimal-forger"],
        &["simulate", "--protocol", "online", "--trials", "5", "--seed", "1", "--attack", "forger", "--rx", "0.5"],
        &["simulate", "--protocol", "online", "--trials", "5", "--seed", "1", "--attack", "forger",
          "--rx", "1", "--rz", "1", "--rpx", "0", "--rpz", "0", "--q0", "1"],
        &["simulate", "--protocol", "sideways", "--trials", "5", "--seed", "1"],
        &["optimize", "--delta", "0.25", "--resolution", "0.1"],
        &["analyze", "bounds", "--epsilons", "0.3", "--out", "/dev/null"],
        &["--jobs", "0", "optimize", "--delta", "0.25"],
    ];
    for args in bad {
        let o = qauth(args);
        assert_eq!(code(&o), 1, "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    }
}

#[test]
fn unwritable_output_exits_with_two() {
    let o = qauth(&[
        "simulate", "--protocol", "offline", "--trials", "2", "--seed", "1", "--out", "/nonexistent/dir/s.json",
    ]);
    assert_eq!(code(&o), 2);
}

#[test]
fn optimize_emits_comparison() {
    let o = qauth(&["optimize", "--delta", "0.25", "--resolution", "0.01"]);
    assert_eq!(code(&o), 0);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!((v["closed_form"].as_f64().unwrap() - 0.697_642_4).abs() < 1e-6);
    assert!((v["best_value"].as_f64().unwrap() - 0.6976).abs() < 1e-3);
    let o = qauth(&["optimize", "--delta", "0", "--resolution", "0.01"]);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!((v["best_value"].as_f64().unwrap() - 0.5).abs() < 1e-9);
}

#[test]
fn analyze_outputs_are_stable() {
    let dir = tempfile::tempdir().unwrap();
    for kind in ["figure3", "table1", "bounds"] {
        let a = dir.path().join(format!("{kind}_a.csv"));
        let b = dir.path().join(format!("{kind}_b.csv"));
        assert_eq!(code(&qauth(&["analyze", kind, "--out", p(&a)])), 0);
        assert_eq!(code(&qauth(&["analyze", kind, "--out", p(&b)])), 0);
        assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    }
    let rows = std::fs::read_to_string(dir.path().join("table1_a.csv")).unwrap().lines().count();
    assert_eq!(rows, 5);
}
