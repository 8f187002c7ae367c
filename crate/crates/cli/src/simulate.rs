use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use qauth_core::adversary::{
    purification_success_exact, ClassicalGuessAttack, Continuation, ForgerAttack, HelstromAdaptiveAttack,
    PurificationAttack, StrategyParams,
};
use qauth_core::analysis::{
    optimize_grid, per_round_guess_bound, per_round_min_entropy_bound, pr_win_closed_form, pr_win_objective,
    wilson_interval,
};
use qauth_core::hepuf::HepufDevice;
use qauth_core::protocol::{
    honest_bit_acceptance, run_offline_round, run_online_round, OfflineAdversary, OnlineAdversary, SourceModel,
};
use qauth_core::puf::{build_crp_database, BiasedCpuf};
use qauth_core::quantum::MeasBasis;
use qauth_core::transcript::Transcript;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{child_seed, AttackArg, ExperimentConfig, ProtocolArg, SourceArg};
use crate::CliError;

/// Critical value for the reported Wilson interval.
pub const SUMMARY_Z: f64 = 5.0;

/// Trials per scheduling batch. Transcripts are written batch by batch in
/// trial order, so memory stays bounded.
const BATCH: u64 = 16_384;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BoundSummary {
    pub guess_bound: f64,
    pub min_entropy_bound: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunSummary {
    pub config: ExperimentConfig,
    pub accept_count: u64,
    pub trials: u64,
    pub empirical_rate: f64,
    pub wilson_z: f64,
    pub wilson_lo: f64,
    pub wilson_hi: f64,
    pub analytic_reference: Option<f64>,
    /// Per-round bounds for the purification source, when they apply.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bounds: Option<BoundSummary>,
    /// Strategy actually played by online forgers.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub strategy: Option<StrategyParams>,
    #[serde(skip)]
    pub wall_time: std::time::Duration,
}

fn source_model(config: &ExperimentConfig) -> Result<SourceModel, CliError> {
    let eps = config.epsilon;
    let model = match config.source {
        SourceArg::Perfect => SourceModel::perfect(),
        SourceArg::Noisy => SourceModel::mixed_noise(eps, [1.0 / 3.0; 3])?,
        SourceArg::Purification => SourceModel::adversarial_purification(eps, SourceModel::default_chi())?,
    };
    Ok(model)
}

/// Forger parameters for the online attacks that play a fixed strategy.
fn forger_strategy(config: &ExperimentConfig) -> Result<Option<StrategyParams>, CliError> {
    let params = match config.attack {
        AttackArg::OptimalForger => StrategyParams::optimal(config.delta)?,
        AttackArg::Grid => {
            let res = config.grid_resolution.expect("validated");
            optimize_grid(config.delta, res)?.best_params
        }
        AttackArg::Forger => {
            let f = config.forger.expect("validated");
            StrategyParams::new(f.rx, f.rz, f.rpx, f.rpz, f.q0)?
        }
        _ => return Ok(None),
    };
    Ok(Some(params))
}

/// Exact acceptance probability of one round, when the configuration has one.
pub fn analytic_reference(config: &ExperimentConfig, strategy: Option<&StrategyParams>) -> Result<Option<f64>, CliError> {
    let delta = config.delta;
    let per_bit = match (config.protocol, config.attack) {
        (ProtocolArg::Offline, AttackArg::None) => honest_bit_acceptance(&source_model(config)?, delta),
        (ProtocolArg::Offline, AttackArg::ClassicalGuess) => 0.5,
        (ProtocolArg::Offline, AttackArg::Purification) => {
            let chi = SourceModel::default_chi();
            let z = purification_success_exact(config.epsilon, chi, MeasBasis::Computational)?;
            let x = purification_success_exact(config.epsilon, chi, MeasBasis::Hadamard)?;
            (0.5 + delta) * z + (0.5 - delta) * x
        }
        (ProtocolArg::Online, AttackArg::None) => 1.0,
        (ProtocolArg::Online, AttackArg::HelstromAdaptive) => pr_win_closed_form(delta)?,
        // Always |0>, announcing 0: the guess is constant at the prior optimum.
        (ProtocolArg::Online, AttackArg::HelstromNaive) => {
            pr_win_objective(delta, &StrategyParams::new(0.0, 1.0, 0.0, 0.0, 1.0)?)
        }
        (ProtocolArg::Online, _) => match strategy {
            Some(s) => pr_win_objective(delta, s),
            None => return Ok(None),
        },
        _ => return Ok(None),
    };
    Ok(Some(per_bit.powi(config.bits as i32)))
}

fn offline_adversary(attack: AttackArg) -> Option<Box<dyn OfflineAdversary>> {
    match attack {
        AttackArg::ClassicalGuess => Some(Box::new(ClassicalGuessAttack)),
        AttackArg::Purification => Some(Box::new(PurificationAttack)),
        _ => None,
    }
}

fn online_adversary(
    config: &ExperimentConfig,
    strategy: Option<&StrategyParams>,
) -> Result<Option<Box<dyn OnlineAdversary>>, CliError> {
    let adv: Box<dyn OnlineAdversary> = match config.attack {
        AttackArg::None => return Ok(None),
        AttackArg::HelstromAdaptive => Box::new(HelstromAdaptiveAttack::new(config.delta, Continuation::Bayes)?),
        AttackArg::HelstromNaive => Box::new(HelstromAdaptiveAttack::new(config.delta, Continuation::Naive)?),
        _ => Box::new(ForgerAttack::new(*strategy.expect("fixed strategy resolved"))?),
    };
    Ok(Some(adv))
}

/// Plays trial `index` from its own child seed: a fresh device, a fresh
/// database, one round.
pub fn run_trial(
    config: &ExperimentConfig,
    source: &SourceModel,
    strategy: Option<&StrategyParams>,
    index: u64,
) -> Result<Transcript, CliError> {
    let mut rng = ChaCha8Rng::seed_from_u64(child_seed(config.master_seed, index));
    let device_seed = rng.next_u64();
    let mut t = match config.protocol {
        ProtocolArg::Offline => {
            let puf = BiasedCpuf::new(config.challenge_bits, config.bits, config.delta, device_seed)?;
            let mut db = build_crp_database(&puf, config.db_size, &mut rng)?;
            let mut adv = offline_adversary(config.attack);
            let adv = adv.as_mut().map(|a| &mut **a as &mut dyn OfflineAdversary);
            run_offline_round(&mut db, &puf, source, adv, &mut rng)?
        }
        ProtocolArg::Online => {
            let puf = BiasedCpuf::new(config.challenge_bits, 2 * config.bits, config.delta, device_seed)?;
            let mut dev = HepufDevice::new(puf)?;
            let mut db = dev.build_crp_database(config.db_size, &mut rng)?;
            dev.set_mode(1)?;
            let mut adv = online_adversary(config, strategy)?;
            let adv = adv.as_mut().map(|a| &mut **a as &mut dyn OnlineAdversary);
            run_online_round(&mut db, &mut dev, adv, &mut rng)?
        }
    };
    t.set_round_id(index);
    Ok(t)
}

/// Runs all trials on the current rayon pool. Counting is order-independent
/// and transcripts are written in trial order, so the output does not depend
/// on the number of workers.
pub fn simulate(config: &ExperimentConfig, transcripts: Option<&Path>) -> Result<RunSummary, CliError> {
    config.validate()?;
    let started = std::time::Instant::now();
    let source = source_model(config)?;
    let strategy = forger_strategy(config)?;
    let reference = analytic_reference(config, strategy.as_ref())?;

    let mut sink = match transcripts {
        Some(path) => Some(BufWriter::new(File::create(path).map_err(|e| CliError::io(path, e))?)),
        None => None,
    };

    let echo = serde_json::to_value(config).expect("config serializes");
    let mut accept_count = 0u64;
    let mut start = 0u64;
    while start < config.trials {
        let end = (start + BATCH).min(config.trials);
        if let Some(w) = sink.as_mut() {
            let rounds: Vec<Transcript> = (start..end)
                .into_par_iter()
                .map(|i| run_trial(config, &source, strategy.as_ref(), i))
                .collect::<Result<_, _>>()?;
            for mut t in rounds {
                t.config = echo.clone();
                accept_count += u64::from(t.accepted());
                t.write_jsonl(w)?;
            }
        } else {
            accept_count += (start..end)
                .into_par_iter()
                .map(|i| run_trial(config, &source, strategy.as_ref(), i).map(|t| u64::from(t.accepted())))
                .try_reduce(|| 0, |a, b| Ok(a + b))?;
        }
        start = end;
    }
    if let Some(mut w) = sink {
        w.flush().map_err(|e| CliError::io(transcripts.expect("sink has a path"), e))?;
    }

    let (wilson_lo, wilson_hi) = wilson_interval(accept_count, config.trials, SUMMARY_Z)?;
    let bounds = match config.source {
        SourceArg::Purification if config.epsilon <= 0.25 => Some(BoundSummary {
            guess_bound: per_round_guess_bound(config.epsilon)?.value,
            min_entropy_bound: per_round_min_entropy_bound(config.epsilon)?.value,
        }),
        _ => None,
    };
    Ok(RunSummary {
        config: config.clone(),
        accept_count,
        trials: config.trials,
        empirical_rate: accept_count as f64 / config.trials as f64,
        wilson_z: SUMMARY_Z,
        wilson_lo,
        wilson_hi,
        analytic_reference: reference,
        bounds,
        strategy,
        wall_time: started.elapsed(),
    })
}

/// Pretty JSON with a trailing newline; the bytes depend only on the config.
pub fn summary_json(summary: &RunSummary) -> String {
    let mut s = serde_json::to_string_pretty(summary).expect("summary serializes");
    s.push('\n');
    s
}
