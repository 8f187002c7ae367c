//! Monte Carlo properties checked at 5 standard errors.

use qauth_core::adversary::{
    game_strategy_win_prob_mc, ClassicalGuessAttack, Continuation, ForgerAttack, HelstromAdaptiveAttack,
    PurificationAttack, StrategyParams,
};
use qauth_core::analysis::{pr_win_closed_form, pr_win_objective};
use qauth_core::hepuf::HepufDevice;
use qauth_core::protocol::{
    honest_bit_acceptance, run_offline_round, run_online_round, OfflineAdversary, OnlineAdversary, SourceModel,
};
use qauth_core::puf::{build_crp_database, BiasedCpuf, BitString, CrpDatabase};
use qauth_core::quantum::{bloch_to_density, measure_single, outcome_probability, BlochVector, MeasBasis};
use qauth_core::transcript::audit_transcript;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn five_sigma(p: f64, n: u64) -> f64 {
    5.0 * (p * (1.0 - p) / n as f64).sqrt()
}

#[test]
fn single_qubit_frequencies_follow_born_rule() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let n = 100_000u64;
    for v in [(0.0, 0.0, 1.0), (0.6, 0.0, 0.8), (0.3, -0.4, -0.5), (0.0, 0.0, 0.0)] {
        let rho = bloch_to_density(&BlochVector::new(v.0, v.1, v.2).unwrap());
        for basis in [MeasBasis::Computational, MeasBasis::Hadamard] {
            let p1 = outcome_probability(&rho, basis, true).unwrap();
            let ones = (0..n).filter(|_| measure_single(&rho, basis, &mut rng).unwrap().0).count() as u64;
            let f = ones as f64 / n as f64;
            assert!((f - p1).abs() <= five_sigma(p1, n).max(1e-12), "{v:?} {basis:?}: {f} vs {p1}");
        }
    }
}

#[test]
fn cpuf_bias_and_uniqueness() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for delta in [0.0, 0.1, 0.25] {
        let a = BiasedCpuf::new(32, 64, delta, 11).unwrap();
        let b = BiasedCpuf::new(32, 64, delta, 12).unwrap();
        let (mut zeros, mut agree, mut total) = (0u64, 0u64, 0u64);
        for _ in 0..16_000 {
            let x = BitString::random(32, &mut rng);
            let (ya, yb) = (a.eval(&x).unwrap(), b.eval(&x).unwrap());
            zeros += ya.count_zeros() as u64;
            agree += ya.iter().zip(yb.iter()).filter(|(u, v)| u == v).count() as u64;
            total += 64;
        }
        let p = 0.5 + delta;
        let freq = zeros as f64 / total as f64;
        assert!(total >= 1_000_000);
        assert!((freq - p).abs() <= 5.0 * ((0.25 - delta * delta) / total as f64).sqrt(), "delta {delta}: {freq}");
        let same = p * p + (1.0 - p) * (1.0 - p);
        let rate = agree as f64 / total as f64;
        assert!((rate - same).abs() <= five_sigma(same, total), "delta {delta}: agreement {rate} vs {same}");
    }
}

#[test]
fn optimal_strategy_matches_closed_form_and_dominates_random_ones() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let n = 100_000u64;
    for i in 0..=10 {
        let delta = 0.05 * i as f64;
        let closed = pr_win_closed_form(delta).unwrap();
        let opt = game_strategy_win_prob_mc(delta, &StrategyParams::optimal(delta).unwrap(), n, &mut rng).unwrap();
        assert!((opt - closed).abs() <= five_sigma(closed, n) + 1e-12, "delta {delta}: {opt} vs {closed}");
        for _ in 0..200 {
            let mut disk = || loop {
                let (x, z) = (rng.random_range(-1.0..=1.0f64), rng.random_range(-1.0..=1.0f64));
                if x * x + z * z <= 1.0 {
                    break (x, z);
                }
            };
            let (rx, rz) = disk();
            let (rpx, rpz) = disk();
            let q0 = rng.random::<f64>();
            let s = StrategyParams::new(rx, rz, rpx, rpz, q0).unwrap();
            let other = game_strategy_win_prob_mc(delta, &s, n, &mut rng).unwrap();
            let slack = 5.0 * ((opt * (1.0 - opt) + other * (1.0 - other)) / n as f64).sqrt();
            assert!(other <= opt + slack + 1e-12, "delta {delta}: {s:?} won {other} against {opt}");
        }
    }
}

fn online_rate(delta: f64, attack: &mut dyn FnMut() -> Box<dyn OnlineAdversary>, rounds: u64, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut accepted = 0u64;
    for i in 0..rounds {
        let mut dev = HepufDevice::new(BiasedCpuf::new(24, 2, delta, seed ^ i).unwrap()).unwrap();
        let mut db = dev.build_crp_database(1, &mut rng).unwrap();
        dev.set_mode(1).unwrap();
        let mut adv = attack();
        let t = run_online_round(&mut db, &mut dev, Some(adv.as_mut()), &mut rng).unwrap();
        accepted += u64::from(t.accepted());
    }
    accepted as f64 / rounds as f64
}

/// Querying the prover and Helstrom-measuring its qubit adds nothing over
/// the prior: the Bayes continuation lands on the closed form, and forging
/// in the guessed basis does no better.
#[test]
fn adaptive_queries_do_not_boost_the_forger() {
    let n = 40_000u64;
    for (i, delta) in [0.1, 0.25, 0.4].into_iter().enumerate() {
        let closed = pr_win_closed_form(delta).unwrap();
        let bayes = online_rate(
            delta,
            &mut || Box::new(HelstromAdaptiveAttack::new(delta, Continuation::Bayes).unwrap()),
            n,
            10 + i as u64,
        );
        assert!((bayes - closed).abs() <= five_sigma(closed, n), "delta {delta}: {bayes} vs {closed}");
        let naive = online_rate(
            delta,
            &mut || Box::new(HelstromAdaptiveAttack::new(delta, Continuation::Naive).unwrap()),
            n,
            20 + i as u64,
        );
        let naive_exact = pr_win_objective(delta, &StrategyParams::new(0.0, 1.0, 0.0, 0.0, 1.0).unwrap());
        assert!(naive_exact < closed);
        assert!((naive - naive_exact).abs() <= five_sigma(naive_exact, n), "delta {delta}: naive {naive}");
        let forger = online_rate(delta, &mut || Box::new(ForgerAttack::optimal(delta).unwrap()), n, 30 + i as u64);
        assert!((forger - closed).abs() <= five_sigma(closed, n));
    }
}

#[test]
fn noisy_source_acceptance_matches_flip_rates() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let n = 40_000u64;
    for (eps, weights) in [(0.1, [1.0, 0.0, 0.0]), (0.2, [0.0, 1.0, 0.0]), (0.15, [0.2, 0.3, 0.5])] {
        for delta in [0.0, 0.3] {
            let source = SourceModel::mixed_noise(eps, weights).unwrap();
            let puf = BiasedCpuf::new(24, 1, delta, 99).unwrap();
            let mut accepted = 0u64;
            let mut db = build_crp_database(&puf, n as usize, &mut rng).unwrap();
            for _ in 0..n {
                accepted += u64::from(run_offline_round(&mut db, &puf, &source, None, &mut rng).unwrap().accepted());
            }
            let p = honest_bit_acceptance(&source, delta);
            let rate = accepted as f64 / n as f64;
            assert!((rate - p).abs() <= five_sigma(p, n), "eps {eps} {weights:?} delta {delta}: {rate} vs {p}");
        }
    }
}

#[test]
fn transcripts_never_carry_the_response() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let puf = BiasedCpuf::new(16, 8, 0.2, 7).unwrap();
    let mut db = build_crp_database(&puf, 300, &mut rng).unwrap();
    let purified = SourceModel::adversarial_purification(0.1, SourceModel::default_chi()).unwrap();
    for i in 0..300 {
        let mut attack: Option<Box<dyn OfflineAdversary>> = match i % 3 {
            0 => None,
            1 => Some(Box::new(ClassicalGuessAttack)),
            _ => Some(Box::new(PurificationAttack)),
        };
        let source = if i % 3 == 2 { purified.clone() } else { SourceModel::perfect() };
        let adv = attack.as_mut().map(|a| &mut **a as &mut dyn OfflineAdversary);
        let t = run_offline_round(&mut db, &puf, &source, adv, &mut rng).unwrap();
        let report = audit_transcript(&t);
        assert!(report.passed(), "{report:?}");
        let y = &t.verifier.as_ref().unwrap().response;
        // The reply may equal y by chance; only the challenge is otherwise sent.
        assert_eq!(t.classical_payloads().count(), 2);
        assert!(t.classical_payloads().all(|(_, _, bits)| bits.len() != 16 || bits != y));
    }
    assert!(db.is_empty());

    let cpuf = BiasedCpuf::new(16, 8, 0.2, 8).unwrap();
    let mut dev = HepufDevice::new(cpuf).unwrap();
    let mut db = dev.build_crp_database(100, &mut rng).unwrap();
    dev.set_mode(1).unwrap();
    for _ in 0..100 {
        let t = run_online_round(&mut db, &mut dev, None, &mut rng).unwrap();
        assert!(t.accepted());
        assert!(audit_transcript(&t).passed());
    }
}

#[test]
fn crp_database_survives_a_file_round_trip() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let puf = BiasedCpuf::new(20, 12, 0.25, 5).unwrap();
    let db = build_crp_database(&puf, 50, &mut rng).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("db.jsonl");
    db.write_jsonl(std::fs::File::create(&path).unwrap()).unwrap();
    let back = CrpDatabase::read_jsonl(std::io::BufReader::new(std::fs::File::open(&path).unwrap())).unwrap();
    assert_eq!(back.entries(), db.entries());
    assert_eq!(back.device_fingerprint(), puf.fingerprint());
    for crp in back.entries() {
        assert_eq!(puf.eval(&crp.challenge).unwrap(), crp.response);
    }
}
