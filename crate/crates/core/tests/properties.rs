use proptest::prelude::*;
use qauth_core::adversary::{adversary_view_states, StrategyParams};
use qauth_core::analysis::{
    analytic_optimum, helstrom_guess_prob, mu_epsilon, noisy_forgery_bound, optimize_grid, pr_win_closed_form,
    pr_win_objective, wilson_interval,
};
use qauth_core::hepuf::{HepufDevice, HepufError, SplitResponse};
use qauth_core::pair::SharedPair;
use qauth_core::protocol::{verify_offline, verify_online};
use qauth_core::puf::{BiasedCpuf, BitString};
use qauth_core::quantum::{
    bell_state, bloch_to_density, density_to_bloch, fidelity, partial_trace, trace_distance, BellKind, BlochVector,
    DensityMatrix, MeasBasis, Subsystem, C64,
};
use qauth_core::transcript::{Decision, Transcript};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn bloch_ball() -> impl Strategy<Value = BlochVector> {
    (0.0..=1.0f64, 0.0..std::f64::consts::PI, 0.0..std::f64::consts::TAU)
        .prop_map(|(r, theta, phi)| {
            let r = r.cbrt();
            BlochVector::new(r * theta.sin() * phi.cos(), r * theta.sin() * phi.sin(), r * theta.cos()).unwrap()
        })
}

fn two_qubit_state() -> impl Strategy<Value = DensityMatrix> {
    // Random mixture of three random pure states.
    (prop::collection::vec(-1.0..1.0f64, 24), prop::collection::vec(0.01..1.0f64, 3)).prop_map(|(amps, w)| {
        let comps: Vec<(f64, DensityMatrix)> = (0..3)
            .map(|k| {
                let v: Vec<C64> = (0..4).map(|i| C64::new(amps[8 * k + 2 * i], amps[8 * k + 2 * i + 1])).collect();
                let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt().max(1e-6);
                let v: Vec<C64> = v.iter().map(|z| z / norm).collect();
                (w[k], DensityMatrix::from_pure(&v).unwrap())
            })
            .collect();
        let total: f64 = w.iter().sum();
        let comps: Vec<(f64, DensityMatrix)> = comps.into_iter().map(|(p, r)| (p / total, r)).collect();
        DensityMatrix::mixture(&comps).unwrap()
    })
}

fn bits(len: usize) -> impl Strategy<Value = BitString> {
    prop::collection::vec(any::<bool>(), len).prop_map(BitString::new)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn bloch_round_trip(v in bloch_ball()) {
        let rho = bloch_to_density(&v);
        rho.validate().unwrap();
        let back = density_to_bloch(&rho).unwrap();
        prop_assert!((back.x() - v.x()).abs() <= 1e-12);
        prop_assert!((back.y() - v.y()).abs() <= 1e-12);
        prop_assert!((back.z() - v.z()).abs() <= 1e-12);
    }

    #[test]
    fn fuchs_van_de_graaf(a in bloch_ball(), b in bloch_ball()) {
        let (ra, rb) = (bloch_to_density(&a), bloch_to_density(&b));
        let f = fidelity(&ra, &rb).unwrap();
        let t = trace_distance(&ra, &rb).unwrap();
        let root = f.sqrt();
        prop_assert!(1.0 - root <= t + 1e-9, "F={f} T={t}");
        prop_assert!(t <= (1.0 - f).max(0.0).sqrt() + 1e-9, "F={f} T={t}");
    }

    #[test]
    fn two_qubit_operations_preserve_validity(rho in two_qubit_state(), basis in any::<bool>(), sub in any::<bool>()) {
        rho.validate().unwrap();
        let sub = if sub { Subsystem::P } else { Subsystem::V };
        for keep in [Subsystem::V, Subsystem::P] {
            partial_trace(&rho, keep).unwrap().validate().unwrap();
        }
        let mut total = 0.0;
        for outcome in [false, true] {
            let (p, post) = qauth_core::quantum::project_local(&rho, sub, MeasBasis::from_bit(basis), outcome).unwrap();
            total += p;
            if let Some((collapsed, joint)) = post {
                collapsed.validate().unwrap();
                joint.validate().unwrap();
            }
        }
        prop_assert!((total - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn cpuf_is_deterministic(seed in any::<u64>(), x in bits(24), delta in 0.0..=0.5f64) {
        let a = BiasedCpuf::new(24, 40, delta, seed).unwrap();
        let b = BiasedCpuf::new(24, 40, delta, seed).unwrap();
        prop_assert_eq!(a.eval(&x).unwrap(), b.eval(&x).unwrap());
        prop_assert_eq!(a.eval(&x).unwrap(), a.eval(&x).unwrap());
    }

    #[test]
    fn verify_offline_flags_exactly_the_differences(a in bits(32), b in bits(32)) {
        let d = verify_offline(&a, &b).unwrap();
        let expected: Vec<usize> = (0..32).filter(|&i| a.get(i) != b.get(i)).collect();
        prop_assert_eq!(d.accepted, expected.is_empty());
        prop_assert_eq!(d.failing_bit_indices, expected);
    }

    #[test]
    fn verify_online_checks_parity(a in bits(16), b in bits(16), y2 in bits(16)) {
        let d = verify_online(&a, &b, &y2).unwrap();
        let expected: Vec<usize> = (0..16).filter(|&i| a.get(i) ^ b.get(i) != y2.get(i)).collect();
        prop_assert_eq!(d.failing_bit_indices, expected);
        let forged = BitString::new((0..16).map(|i| b.get(i) ^ y2.get(i)).collect());
        prop_assert!(verify_online(&forged, &b, &y2).unwrap().accepted);
    }

    #[test]
    fn mode_zero_lock_is_irreversible(ops in prop::collection::vec(0u8..6, 1..40), seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut dev = HepufDevice::new(BiasedCpuf::new(12, 4, 0.1, seed).unwrap()).unwrap();
        let x = BitString::random(12, &mut rng);
        let mut left_zero = false;
        for op in ops {
            match op {
                0 => {
                    let r = dev.set_mode(0);
                    prop_assert_eq!(r.is_err(), left_zero);
                    if left_zero {
                        prop_assert!(matches!(r, Err(HepufError::RelockAttempt)));
                    }
                }
                1 | 2 => {
                    dev.set_mode(op).unwrap();
                    left_zero = true;
                }
                3 => prop_assert_eq!(dev.eval_mode0(&x).is_ok(), !left_zero),
                4 => {
                    let r = dev.eval_mode1(&x);
                    prop_assert_eq!(r.is_ok(), dev.mode() == 1);
                }
                _ => {
                    let retained = dev.retained_len();
                    let r = dev.measure_mode2(&mut rng);
                    prop_assert_eq!(r.is_ok(), dev.mode() == 2 && retained > 0);
                }
            }
            prop_assert_eq!(dev.is_locked(), left_zero);
            prop_assert!(left_zero || dev.mode() == 0);
        }
    }

    #[test]
    fn mode_one_releases_maximally_mixed_halves(seed in any::<u64>(), x in bits(20), delta in 0.0..=0.5f64) {
        let mut dev = HepufDevice::new(BiasedCpuf::new(20, 16, delta, seed).unwrap()).unwrap();
        dev.set_mode(1).unwrap();
        let out = dev.eval_mode1(&x).unwrap();
        let mixed = DensityMatrix::maximally_mixed(2).unwrap();
        prop_assert_eq!(out.reduced.len(), 8);
        for rho in &out.reduced {
            prop_assert!(rho.max_abs_diff(&mixed) <= 1e-12);
        }
    }

    #[test]
    fn device_pairs_correlate_by_y2(seed in any::<u64>(), x in bits(20), delta in 0.0..=0.5f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cpuf = BiasedCpuf::new(20, 32, delta, seed).unwrap();
        let split = SplitResponse::split(&cpuf.eval(&x).unwrap()).unwrap();
        let mut dev = HepufDevice::new(cpuf).unwrap();
        dev.set_mode(1).unwrap();
        let handles = dev.eval_mode1(&x).unwrap().handles;
        dev.set_mode(2).unwrap();
        let b = dev.measure_mode2(&mut rng).unwrap();
        for (i, h) in handles.iter().enumerate() {
            let (a, _) = h.measure(Subsystem::V, MeasBasis::from_bit(split.y1.get(i)), &mut rng).unwrap();
            prop_assert_eq!(a ^ b.get(i), split.y2.get(i));
        }
    }

    #[test]
    fn analytic_optimum_dominates_grid(delta in 0.0..=0.5f64) {
        let grid = optimize_grid(delta, 0.01).unwrap();
        let (rx, rz) = analytic_optimum(delta).unwrap();
        let analytic = pr_win_objective(delta, &StrategyParams::new(rx, rz, 0.0, 0.0, 1.0).unwrap());
        prop_assert!(analytic >= grid.best_value - 1e-12);
        prop_assert!((analytic - pr_win_closed_form(delta).unwrap()).abs() <= 1e-12);
        prop_assert!(((rx * rx + rz * rz) - 1.0).abs() <= 1e-9);
        prop_assert!(grid.best_params.q0 == 0.0 || grid.best_params.q0 == 1.0);
    }

    #[test]
    fn closed_form_dominates_random_strategies(
        delta in 0.0..=0.5f64,
        a in bloch_ball(),
        b in bloch_ball(),
        q0 in 0.0..=1.0f64,
    ) {
        let s = StrategyParams::new(a.x(), a.z(), b.x(), b.z(), q0).unwrap();
        prop_assert!(pr_win_objective(delta, &s) <= pr_win_closed_form(delta).unwrap() + 1e-12);
    }

    #[test]
    fn mu_rises_up_to_one_ninth(e1 in 0.0..=1.0 / 9.0f64, e2 in 0.0..=1.0 / 9.0f64) {
        let (lo, hi) = if e1 <= e2 { (e1, e2) } else { (e2, e1) };
        prop_assert!(mu_epsilon(lo).unwrap() <= mu_epsilon(hi).unwrap() + 1e-15);
    }

    #[test]
    fn noisy_bound_is_monotone(e1 in 0.0..=0.25f64, e2 in 0.0..=0.25f64, m in 1u32..64) {
        let (lo, hi) = if e1 <= e2 { (e1, e2) } else { (e2, e1) };
        prop_assert!(noisy_forgery_bound(m, lo).unwrap() <= noisy_forgery_bound(m, hi).unwrap() + 1e-15);
        prop_assert!(noisy_forgery_bound(m + 1, lo).unwrap() <= noisy_forgery_bound(m, lo).unwrap() + 1e-15);
    }

    #[test]
    fn wilson_interval_contains_the_rate(n in 1u64..1_000_000, frac in 0.0..=1.0f64, z in 0.5..6.0f64) {
        let s = ((n as f64) * frac).floor() as u64;
        let (lo, hi) = wilson_interval(s, n, z).unwrap();
        let p = s as f64 / n as f64;
        prop_assert!(0.0 <= lo && lo <= p && p <= hi && hi <= 1.0);
    }

    #[test]
    fn adversary_views_average_to_mixed(delta in 0.0..=0.5f64) {
        // Index 2 * y1 + b; the prover's outcome b is uniform, so averaging
        // over it must return the maximally mixed state for either basis.
        let views = adversary_view_states(delta).unwrap();
        let mixed = DensityMatrix::maximally_mixed(2).unwrap();
        for y1 in 0..2 {
            let avg = DensityMatrix::mixture(&[(0.5, views[2 * y1]), (0.5, views[2 * y1 + 1])]).unwrap();
            prop_assert!(avg.max_abs_diff(&mixed) <= 1e-12);
        }
    }

    #[test]
    fn transcript_round_trip(seed in any::<u64>(), accepted in any::<bool>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut t = Transcript::new(qauth_core::transcript::Protocol::Offline);
        t.push(
            qauth_core::transcript::Direction::VtoP,
            qauth_core::transcript::Payload::Classical {
                role: qauth_core::transcript::ClassicalRole::Challenge,
                bits: BitString::random(16, &mut rng),
            },
            None,
        );
        let v = BlochVector::new(0.3, -0.2, 0.5).unwrap();
        t.push(
            qauth_core::transcript::Direction::SourceToV,
            qauth_core::transcript::Payload::Quantum(bloch_to_density(&v)),
            Some(0),
        );
        t.set_round_id(seed);
        t.decision = Some(Decision::from_failures(if accepted { vec![] } else { vec![0] }));
        let mut buf = Vec::new();
        t.write_jsonl(&mut buf).unwrap();
        let back = Transcript::read_all(std::io::Cursor::new(buf)).unwrap();
        prop_assert_eq!(back.len(), 1);
        prop_assert_eq!(&back[0], &t);
    }
}

#[test]
fn bell_states_have_mixed_marginals() {
    let mixed = DensityMatrix::maximally_mixed(2).unwrap();
    for kind in BellKind::ALL {
        let rho = bell_state(kind);
        rho.validate().unwrap();
        for keep in [Subsystem::V, Subsystem::P] {
            assert!(partial_trace(&rho, keep).unwrap().max_abs_diff(&mixed) <= 1e-12);
        }
    }
}

#[test]
fn every_basis_and_encoding_combination_correlates() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for (y1, y2) in [(false, false), (false, true), (true, false), (true, true)] {
        let kind = if y2 { BellKind::PsiMinus } else { BellKind::PhiPlus };
        let basis = MeasBasis::from_bit(y1);
        for _ in 0..200 {
            let pair = SharedPair::new(bell_state(kind));
            let (p_out, _) = pair.measure(Subsystem::P, basis, &mut rng).unwrap();
            let (v_out, _) = pair.measure(Subsystem::V, basis, &mut rng).unwrap();
            assert_eq!(p_out ^ v_out, y2, "y1={y1} y2={y2}");
        }
    }
}

#[test]
fn mu_peaks_at_log2_3_and_the_bound_is_vacuous_beyond() {
    let peak = mu_epsilon(1.0 / 9.0).unwrap();
    assert!((peak - 3f64.log2()).abs() < 1e-12);
    assert!(mu_epsilon(0.2).unwrap() < peak);
    assert!((mu_epsilon(0.25).unwrap() - 1.0).abs() < 1e-12);
    for eps in [1.0 / 9.0, 0.2, 0.25] {
        assert_eq!(noisy_forgery_bound(16, eps).unwrap(), 1.0);
    }
}

#[test]
fn degenerate_bias_values_are_exact() {
    assert_eq!(pr_win_closed_form(0.0).unwrap(), 0.5);
    assert_eq!(helstrom_guess_prob(0.0).unwrap(), 0.5);
    assert_eq!(pr_win_closed_form(0.5).unwrap(), 1.0);
    assert_eq!(helstrom_guess_prob(0.5).unwrap(), 1.0);
}

#[test]
fn oracle_agrees_with_closed_form_on_the_delta_grid() {
    for i in 0..=10 {
        let delta = 0.05 * i as f64;
        let grid = optimize_grid(delta, 0.005).unwrap();
        let closed = pr_win_closed_form(delta).unwrap();
        assert!((grid.best_value - closed).abs() <= 2e-3, "delta {delta}");
        assert!(grid.best_value <= closed + 1e-12);
    }
}

#[test]
fn split_response_halves() {
    let y: BitString = "10110100".parse().unwrap();
    let s = SplitResponse::split(&y).unwrap();
    assert_eq!(s.y1.to_string(), "1011");
    assert_eq!(s.y2.to_string(), "0100");
}
