//! Adversaries: the offline classical guesser, the single-qubit forger of the
//! online protocol, the adaptive-query Helstrom attacker and the
//! purification adversary against noisy pre-shared pairs.

use crate::hepuf::{HepufDevice, HepufError};
use crate::pair::{PairState, SharedPair};
use crate::protocol::{
    Interception, OfflineAdversary, OfflineReplyContext, OnlineAdversary, ProtocolError, QubitPayload,
};
use crate::puf::BitString;
use crate::quantum::{
    bell_state, bloch_to_density, hermitian2_eigen, measure_in_basis, measure_single, project_local, BellKind,
    BlochVector, DensityMatrix, MeasBasis, QuantumError, Subsystem, C64,
};
use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Eigenvalues of the Helstrom operator above this count as non-negative.
const TIE_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum AdversaryError {
    #[error("bias {0} outside [0, 1/2]")]
    DeltaOutOfRange(f64),
    #[error("invalid strategy parameters: {0}")]
    InvalidParams(String),
    #[error("pair carries no adversary register")]
    NotPurified,
    #[error(transparent)]
    Quantum(#[from] QuantumError),
    #[error(transparent)]
    Hepuf(#[from] HepufError),
}

impl From<AdversaryError> for ProtocolError {
    fn from(e: AdversaryError) -> Self {
        match e {
            AdversaryError::Quantum(q) => ProtocolError::Quantum(q),
            AdversaryError::Hepuf(h) => ProtocolError::Hepuf(h),
            other => ProtocolError::ConfigMismatch(other.to_string()),
        }
    }
}

pub fn check_delta(delta: f64) -> Result<(), AdversaryError> {
    if !(0.0..=0.5).contains(&delta) {
        return Err(AdversaryError::DeltaOutOfRange(delta));
    }
    Ok(())
}

/// Bloch components (y fixed to 0) of the two states a forger may send and
/// the probability `q0` of announcing `b = 0`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StrategyParams {
    pub rx: f64,
    pub rz: f64,
    pub rpx: f64,
    pub rpz: f64,
    pub q0: f64,
}

impl StrategyParams {
    pub fn new(rx: f64, rz: f64, rpx: f64, rpz: f64, q0: f64) -> Result<Self, AdversaryError> {
        let p = StrategyParams { rx, rz, rpx, rpz, q0 };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), AdversaryError> {
        let vals = [self.rx, self.rz, self.rpx, self.rpz, self.q0];
        if vals.iter().any(|v| !v.is_finite()) {
            return Err(AdversaryError::InvalidParams("non-finite value".into()));
        }
        if self.rx.hypot(self.rz) > 1.0 + 1e-12 || self.rpx.hypot(self.rpz) > 1.0 + 1e-12 {
            return Err(AdversaryError::InvalidParams("Bloch vector outside the unit disk".into()));
        }
        if !(0.0..=1.0).contains(&self.q0) {
            return Err(AdversaryError::InvalidParams(format!("q0 = {} outside [0, 1]", self.q0)));
        }
        Ok(())
    }

    /// The deterministic optimum: `b = 0` with the optimal state, the unused
    /// `b = 1` state left at the origin.
    pub fn optimal(delta: f64) -> Result<Self, AdversaryError> {
        let (rx, rz) = optimal_bloch_components(delta)?;
        Ok(StrategyParams {
            rx,
            rz,
            rpx: 0.0,
            rpz: 0.0,
            q0: 1.0,
        })
    }

    /// State sent together with announcement `b`.
    pub fn state_for(&self, b: bool) -> DensityMatrix {
        let (x, z) = if b { (self.rpx, self.rpz) } else { (self.rx, self.rz) };
        bloch_to_density(&clamped_bloch(x, z))
    }
}

fn clamped_bloch(x: f64, z: f64) -> BlochVector {
    let r = x.hypot(z);
    let s = if r > 1.0 { 1.0 / r } else { 1.0 };
    BlochVector::new(x * s, 0.0, z * s).expect("clamped to the unit disk")
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ForgerySubmission {
    pub state: DensityMatrix,
    pub claimed_bit: bool,
}

/// `((1 - 2d), (1 + 2d)) / sqrt(2 + 8 d^2)`.
pub fn optimal_bloch_components(delta: f64) -> Result<(f64, f64), AdversaryError> {
    check_delta(delta)?;
    let norm = (2.0 + 8.0 * delta * delta).sqrt();
    Ok(((1.0 - 2.0 * delta) / norm, (1.0 + 2.0 * delta) / norm))
}

pub fn optimal_forgery(delta: f64) -> Result<ForgerySubmission, AdversaryError> {
    let (rx, rz) = optimal_bloch_components(delta)?;
    Ok(ForgerySubmission {
        state: bloch_to_density(&clamped_bloch(rx, rz)),
        claimed_bit: false,
    })
}

/// Uniformly random reply; the verifier's outcomes are uniform so nothing
/// does better without the pairs.
pub fn offline_guess_attack<R: Rng + ?Sized>(m: usize, rng: &mut R) -> BitString {
    BitString::random(m, rng)
}

/// One play of the two-coin game: coins `c1` (basis) and `c2` (parity),
/// each 0 with probability `1/2 + delta`.
pub fn play_game_round<R: Rng + ?Sized>(
    delta: f64,
    params: &StrategyParams,
    rng: &mut R,
) -> Result<bool, AdversaryError> {
    let c1 = !rng.random_bool(0.5 + delta);
    let c2 = !rng.random_bool(0.5 + delta);
    let b = !rng.random_bool(params.q0);
    let (a, _) = measure_single(&params.state_for(b), MeasBasis::from_bit(c1), rng)?;
    Ok((a ^ b) == c2)
}

pub fn game_strategy_win_prob_mc<R: Rng + ?Sized>(
    delta: f64,
    params: &StrategyParams,
    trials: u64,
    rng: &mut R,
) -> Result<f64, AdversaryError> {
    check_delta(delta)?;
    params.validate()?;
    if trials == 0 {
        return Err(AdversaryError::InvalidParams("trials must be at least 1".into()));
    }
    let mut wins = 0u64;
    for _ in 0..trials {
        wins += u64::from(play_game_round(delta, params, rng)?);
    }
    Ok(wins as f64 / trials as f64)
}

/// The four states the verifier-side qubit can be left in after the prover
/// announces `b`, as seen by someone who knows neither `y2` nor `y1`:
/// index `2 * y1 + b`.
pub fn adversary_view_states(delta: f64) -> Result<[DensityMatrix; 4], AdversaryError> {
    check_delta(delta)?;
    let components = [
        (0.5 + delta, bell_state(BellKind::PhiPlus)),
        (0.5 - delta, bell_state(BellKind::PsiMinus)),
    ];
    let ensemble = DensityMatrix::mixture(&components)?;
    let mut out = [DensityMatrix::maximally_mixed(2)?; 4];
    for y1 in [false, true] {
        for b in [false, true] {
            let (_, post) = project_local(&ensemble, Subsystem::P, MeasBasis::from_bit(y1), b)?;
            let (collapsed, _) = post.ok_or(QuantumError::ZeroProbabilityBranch)?;
            out[2 * usize::from(y1) + usize::from(b)] = collapsed;
        }
    }
    Ok(out)
}

/// Eigenbasis of `p rho'_(y1=0) - (1 - p) rho'_(y1=1)` for announcement `b`,
/// with `p = 1/2 + delta` the prior on `y1 = 0`; each basis vector is paired
/// with the guess it triggers.
pub fn helstrom_measurement(delta: f64, b: bool) -> Result<[([C64; 2], bool); 2], AdversaryError> {
    let views = adversary_view_states(delta)?;
    let (r0, r1) = (&views[usize::from(b)], &views[2 + usize::from(b)]);
    let p = 0.5 + delta;
    let lambda: Vec<C64> = r0
        .entries()
        .iter()
        .zip(r1.entries())
        .map(|(x, y)| x * p - y * (1.0 - p))
        .collect();
    let eig = hermitian2_eigen(&lambda);
    Ok([(eig[0].1, eig[0].0 < -TIE_TOL), (eig[1].1, eig[1].0 < -TIE_TOL)])
}

/// Measures the captured qubit with the Helstrom measurement and returns the
/// guess for `y1`.
pub fn helstrom_attack_y1<R: Rng + ?Sized>(
    delta: f64,
    announced_b: bool,
    adversary_state: &DensityMatrix,
    rng: &mut R,
) -> Result<bool, AdversaryError> {
    let povm = helstrom_measurement(delta, announced_b)?;
    let (idx, _) = measure_in_basis(adversary_state, &[povm[0].0, povm[1].0], rng)?;
    Ok(povm[idx].1)
}

/// Probability of each guess given the true `(y1, y2)`, for announcement
/// `b`: entry `[y1][y2][guess]`.
pub fn helstrom_guess_likelihoods(delta: f64, b: bool) -> Result<[[[f64; 2]; 2]; 2], AdversaryError> {
    let povm = helstrom_measurement(delta, b)?;
    let mut out = [[[0.0; 2]; 2]; 2];
    for y1 in [false, true] {
        for y2 in [false, true] {
            let rho = DensityMatrix::from_pure(&MeasBasis::from_bit(y1).ket(b ^ y2))?;
            for (vec, guess) in povm {
                let p = crate::quantum::DensityMatrix::from_pure(&vec)?;
                let overlap: f64 = rho
                    .entries()
                    .iter()
                    .enumerate()
                    .map(|(i, z)| (z * p.get(i % 2, i / 2)).re)
                    .sum();
                out[usize::from(y1)][usize::from(y2)][usize::from(guess)] += overlap.clamp(0.0, 1.0);
            }
        }
    }
    Ok(out)
}

/// Runs the prover's device on `x` while posing as the verifier. Returns, per
/// pair, the qubit captured from the quantum channel (already collapsed by
/// the prover's measurement) and the announced bit. The device ends in mode 1.
pub fn adaptive_query_interaction<R: Rng + ?Sized>(
    dev: &mut HepufDevice,
    x: &BitString,
    rng: &mut R,
) -> Result<Vec<(DensityMatrix, bool)>, AdversaryError> {
    let out = dev.eval_mode1(x)?;
    dev.set_mode(2)?;
    let b = dev.measure_mode2(rng);
    dev.set_mode(1)?;
    let b = b?;
    Ok(out
        .handles
        .iter()
        .zip(b.iter())
        .map(|(h, bit)| (h.reduced(Subsystem::V), bit))
        .collect())
}

/// Best single-qubit forgery given a joint posterior over `(y1, y2)`
/// (entry `[y1][y2]`). Announces `b = 0`; `b = 1` with the reflected state
/// is equivalent.
pub fn bayes_forgery(posterior: [[f64; 2]; 2]) -> ForgerySubmission {
    let along_z = posterior[0][0] - posterior[0][1];
    let along_x = posterior[1][0] - posterior[1][1];
    let norm = along_z.hypot(along_x);
    let (rx, rz) = if norm > 0.0 { (along_x / norm, along_z / norm) } else { (0.0, 0.0) };
    ForgerySubmission {
        state: bloch_to_density(&clamped_bloch(rx, rz)),
        claimed_bit: false,
    }
}

/// Joint posterior over `(y1, y2)` after observing `guess` on a pair whose
/// announcement was `b`.
pub fn helstrom_posterior(delta: f64, b: bool, guess: bool) -> Result<[[f64; 2]; 2], AdversaryError> {
    let lik = helstrom_guess_likelihoods(delta, b)?;
    let prior = [0.5 + delta, 0.5 - delta];
    let mut post = [[0.0; 2]; 2];
    let mut total = 0.0;
    for y1 in 0..2 {
        for y2 in 0..2 {
            post[y1][y2] = prior[y1] * prior[y2] * lik[y1][y2][usize::from(guess)];
            total += post[y1][y2];
        }
    }
    if total <= 0.0 {
        return Err(AdversaryError::Quantum(QuantumError::ZeroProbabilityBranch));
    }
    for row in &mut post {
        for v in row.iter_mut() {
            *v /= total;
        }
    }
    Ok(post)
}

/// Forges with the basis named by the guess: `|0>` for `Z`, `|+>` for `X`,
/// always announcing 0.
pub fn naive_basis_forgery(guess_y1: bool) -> ForgerySubmission {
    let state = MeasBasis::from_bit(guess_y1).projector(false);
    ForgerySubmission {
        state,
        claimed_bit: false,
    }
}

/// Measures the adversary register of a purified pair with the Helstrom
/// measurement that best predicts the verifier's outcome in `basis`, and
/// collapses the pair accordingly. Returns the predicted outcome.
pub fn purification_register_guess<R: Rng + ?Sized>(
    pair: &SharedPair,
    basis: MeasBasis,
    rng: &mut R,
) -> Result<bool, AdversaryError> {
    let PairState::Purified(p) = pair.state() else {
        return Err(AdversaryError::NotPurified);
    };
    let [s0, s1] = p.register_conditionals(basis);
    let diff: Vec<C64> = s0.iter().zip(s1.iter()).map(|(a, b)| a - b).collect();
    let eig = hermitian2_eigen(&diff);
    let (p0, post0) = p.project_register(eig[0].1);
    let (_, post1) = p.project_register(eig[1].1);
    let pick_first = rng.random::<f64>() < p0;
    let (idx, post) = match (pick_first, post0, post1) {
        (true, Some(s), _) | (false, Some(s), None) => (0, s),
        (_, _, Some(s)) => (1, s),
        (_, None, None) => return Err(AdversaryError::Quantum(QuantumError::ZeroProbabilityBranch)),
    };
    pair.collapse_to(post);
    Ok(eig[idx].0 < -TIE_TOL)
}

/// One purification-adversary trial on a fresh pair: returns the guess and
/// the verifier's actual outcome.
pub fn purification_adversary_guess<R: Rng + ?Sized>(
    epsilon: f64,
    chi: [C64; 4],
    basis_bit: bool,
    rng: &mut R,
) -> Result<(bool, bool), AdversaryError> {
    let pair = SharedPair::purified(crate::pair::PurifiedPair::flagged(epsilon, chi)?);
    let basis = MeasBasis::from_bit(basis_bit);
    let guess = purification_register_guess(&pair, basis, rng)?;
    let (outcome, _) = pair.measure(Subsystem::V, basis, rng)?;
    Ok((guess, outcome))
}

/// Exact success probability of [`purification_register_guess`]:
/// `1/2 + ||sigma_0 - sigma_1||_1 / 2`.
pub fn purification_success_exact(epsilon: f64, chi: [C64; 4], basis: MeasBasis) -> Result<f64, AdversaryError> {
    let p = crate::pair::PurifiedPair::flagged(epsilon, chi)?;
    let [s0, s1] = p.register_conditionals(basis);
    let diff: Vec<C64> = s0.iter().zip(s1.iter()).map(|(a, b)| a - b).collect();
    let eig = hermitian2_eigen(&diff);
    Ok(0.5 + 0.5 * (eig[0].0.abs() + eig[1].0.abs()))
}

/// Offline attacker that answers in the prover's place with random bits.
#[derive(Clone, Copy, Debug, Default)]
pub struct ClassicalGuessAttack;

impl OfflineAdversary for ClassicalGuessAttack {
    fn intercept_challenge(&mut self, _x: &BitString) -> Interception {
        Interception::Block
    }

    fn reply(&mut self, ctx: &OfflineReplyContext<'_>, rng: &mut dyn RngCore) -> Result<Option<BitString>, ProtocolError> {
        Ok(Some(offline_guess_attack(ctx.pairs.len(), rng)))
    }
}

/// Offline attacker holding the purification of every pair. Given the basis
/// bits as side information, it reads its register and answers in the
/// prover's place.
#[derive(Clone, Copy, Debug, Default)]
pub struct PurificationAttack;

impl OfflineAdversary for PurificationAttack {
    fn intercept_challenge(&mut self, _x: &BitString) -> Interception {
        Interception::Block
    }

    fn wants_basis_side_information(&self) -> bool {
        true
    }

    fn reply(&mut self, ctx: &OfflineReplyContext<'_>, rng: &mut dyn RngCore) -> Result<Option<BitString>, ProtocolError> {
        let basis = ctx
            .basis_hint
            .ok_or_else(|| ProtocolError::ConfigMismatch("basis side information withheld".into()))?;
        let mut guesses = Vec::with_capacity(ctx.pairs.len());
        for (pair, bit) in ctx.pairs.iter().zip(basis.iter()) {
            guesses.push(purification_register_guess(pair, MeasBasis::from_bit(bit), rng)?);
        }
        Ok(Some(BitString::new(guesses)))
    }
}

/// Online attacker without the device: for every pair it draws `b` with
/// probability `q0` of 0 and sends the matching state.
#[derive(Clone, Debug)]
pub struct ForgerAttack {
    params: StrategyParams,
    pending: Vec<bool>,
}

impl ForgerAttack {
    pub fn new(params: StrategyParams) -> Result<Self, AdversaryError> {
        params.validate()?;
        Ok(ForgerAttack {
            params,
            pending: Vec::new(),
        })
    }

    pub fn optimal(delta: f64) -> Result<Self, AdversaryError> {
        Self::new(StrategyParams::optimal(delta)?)
    }

    pub fn params(&self) -> &StrategyParams {
        &self.params
    }
}

impl OnlineAdversary for ForgerAttack {
    fn intercept_challenge(
        &mut self,
        _x: &BitString,
        _device: &mut HepufDevice,
        _rng: &mut dyn RngCore,
    ) -> Result<Interception, ProtocolError> {
        Ok(Interception::Block)
    }

    fn quantum(
        &mut self,
        k: usize,
        _honest: Option<&[QubitPayload]>,
        rng: &mut dyn RngCore,
    ) -> Result<Option<Vec<QubitPayload>>, ProtocolError> {
        self.pending = (0..k).map(|_| !rng.random_bool(self.params.q0)).collect();
        Ok(Some(
            self.pending
                .iter()
                .map(|&b| QubitPayload::Standalone(self.params.state_for(b)))
                .collect(),
        ))
    }

    fn reply(
        &mut self,
        _k: usize,
        _honest: Option<&BitString>,
        _rng: &mut dyn RngCore,
    ) -> Result<Option<BitString>, ProtocolError> {
        Ok(Some(BitString::new(std::mem::take(&mut self.pending))))
    }
}

/// How the adaptive attacker turns its Helstrom guesses into a forgery.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Continuation {
    /// Forge against the posterior implied by the guess.
    Bayes,
    /// Forge in the guessed basis as if the guess were certain.
    Naive,
}

/// Online attacker that first queries the prover with the verifier's
/// challenge, applies the Helstrom measurement to each captured qubit to
/// guess `y1`, then blocks the prover and forges. The discrimination
/// measurement consumes the captured qubits.
#[derive(Clone, Debug)]
pub struct HelstromAdaptiveAttack {
    delta: f64,
    continuation: Continuation,
    pending: Vec<ForgerySubmission>,
    guesses: Vec<bool>,
}

impl HelstromAdaptiveAttack {
    pub fn new(delta: f64, continuation: Continuation) -> Result<Self, AdversaryError> {
        check_delta(delta)?;
        Ok(HelstromAdaptiveAttack {
            delta,
            continuation,
            pending: Vec::new(),
            guesses: Vec::new(),
        })
    }

    /// Guesses made in the most recent round.
    pub fn last_guesses(&self) -> &[bool] {
        &self.guesses
    }
}

impl OnlineAdversary for HelstromAdaptiveAttack {
    fn intercept_challenge(
        &mut self,
        x: &BitString,
        device: &mut HepufDevice,
        rng: &mut dyn RngCore,
    ) -> Result<Interception, ProtocolError> {
        let captured = adaptive_query_interaction(device, x, rng)?;
        self.pending.clear();
        self.guesses.clear();
        for (state, b) in captured {
            let guess = helstrom_attack_y1(self.delta, b, &state, rng)?;
            self.guesses.push(guess);
            let submission = match self.continuation {
                Continuation::Bayes => bayes_forgery(helstrom_posterior(self.delta, b, guess)?),
                Continuation::Naive => naive_basis_forgery(guess),
            };
            self.pending.push(submission);
        }
        Ok(Interception::Block)
    }

    fn quantum(
        &mut self,
        _k: usize,
        _honest: Option<&[QubitPayload]>,
        _rng: &mut dyn RngCore,
    ) -> Result<Option<Vec<QubitPayload>>, ProtocolError> {
        Ok(Some(self.pending.iter().map(|s| QubitPayload::Standalone(s.state)).collect()))
    }

    fn reply(
        &mut self,
        _k: usize,
        _honest: Option<&BitString>,
        _rng: &mut dyn RngCore,
    ) -> Result<Option<BitString>, ProtocolError> {
        Ok(Some(BitString::new(self.pending.iter().map(|s| s.claimed_bit).collect())))
    }
}
