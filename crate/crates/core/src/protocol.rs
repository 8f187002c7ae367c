//! Round state machines for the offline (pre-shared Bell pairs) and online
//! (HEPUF) protocols, the entanglement source, and verifier decision rules.

use crate::hepuf::{HepufDevice, HepufError, SplitResponse};
use crate::pair::{PurifiedPair, SharedPair};
use crate::puf::{BiasedCpuf, BitString, CrpDatabase, PufError};
use crate::quantum::{
    bell_state, fidelity, measure_single, partial_trace, BellKind, DensityMatrix, MeasBasis, QuantumError,
    Subsystem, C64,
};
use crate::transcript::{ClassicalRole, Decision, Direction, Payload, Protocol, Transcript, VerifierRecord};
use rand::{Rng, RngCore};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ProtocolError {
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("configuration mismatch: {0}")]
    ConfigMismatch(String),
    #[error("epsilon {0} outside [0, 1]")]
    InvalidEpsilon(f64),
    #[error("invalid source: {0}")]
    InvalidSource(String),
    #[error("emitted pair has fidelity {0} below 1 - epsilon")]
    FidelityViolation(f64),
    #[error(transparent)]
    Hepuf(#[from] HepufError),
    #[error(transparent)]
    Puf(#[from] PufError),
    #[error(transparent)]
    Quantum(#[from] QuantumError),
}

/// Orthogonal complement of `|Φ+>` in the Bell basis, in weight order.
pub const NOISE_KINDS: [BellKind; 3] = [BellKind::PhiMinus, BellKind::PsiPlus, BellKind::PsiMinus];

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SourceKind {
    Perfect,
    /// `(1 - eps) Φ+ + eps sum_k w_k B_k` over [`NOISE_KINDS`].
    MixedNoise { weights: [f64; 3] },
    /// `sqrt(1 - eps)|Φ+>|0>_A + sqrt(eps)|chi>|1>_A`, register held by the adversary.
    AdversarialPurification { chi: [C64; 4] },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SourceModel {
    epsilon: f64,
    kind: SourceKind,
}

impl SourceModel {
    pub fn perfect() -> Self {
        SourceModel {
            epsilon: 0.0,
            kind: SourceKind::Perfect,
        }
    }

    pub fn mixed_noise(epsilon: f64, weights: [f64; 3]) -> Result<Self, ProtocolError> {
        check_epsilon(epsilon)?;
        let total: f64 = weights.iter().sum();
        if weights.iter().any(|w| *w < 0.0) || (total - 1.0).abs() > 1e-12 {
            return Err(ProtocolError::InvalidSource(format!(
                "noise weights {weights:?} must be non-negative and sum to 1"
            )));
        }
        Ok(SourceModel {
            epsilon,
            kind: SourceKind::MixedNoise { weights },
        })
    }

    pub fn adversarial_purification(epsilon: f64, chi: [C64; 4]) -> Result<Self, ProtocolError> {
        check_epsilon(epsilon)?;
        // Validates normalisation and orthogonality once, up front.
        PurifiedPair::flagged(epsilon, chi).map_err(|e| ProtocolError::InvalidSource(e.to_string()))?;
        Ok(SourceModel {
            epsilon,
            kind: SourceKind::AdversarialPurification { chi },
        })
    }

    /// `|01>`, the default purification branch.
    pub fn default_chi() -> [C64; 4] {
        let z = C64::new(0.0, 0.0);
        [z, C64::new(1.0, 0.0), z, z]
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn kind(&self) -> SourceKind {
        self.kind
    }

    /// State of one emitted pair, before any purification is considered.
    pub fn pair_state(&self) -> DensityMatrix {
        match self.kind {
            SourceKind::Perfect => bell_state(BellKind::PhiPlus),
            SourceKind::MixedNoise { weights } => {
                let mut components = vec![(1.0 - self.epsilon, bell_state(BellKind::PhiPlus))];
                for (w, kind) in weights.iter().zip(NOISE_KINDS) {
                    if *w > 0.0 {
                        components.push((self.epsilon * w, bell_state(kind)));
                    }
                }
                DensityMatrix::mixture(&components).expect("weights validated at construction")
            }
            SourceKind::AdversarialPurification { chi } => PurifiedPair::flagged(self.epsilon, chi)
                .expect("validated at construction")
                .vp_state(),
        }
    }
}

fn check_epsilon(epsilon: f64) -> Result<(), ProtocolError> {
    if !(0.0..=1.0).contains(&epsilon) {
        return Err(ProtocolError::InvalidEpsilon(epsilon));
    }
    Ok(())
}

/// Emits `count` pairs. Purified pairs keep the adversary register inside the
/// shared handle. The randomness argument is unused by the current source
/// kinds, which emit identical states.
pub fn distribute_pairs<R: Rng + ?Sized>(
    source: &SourceModel,
    count: usize,
    _rng: &mut R,
) -> Result<Vec<SharedPair>, ProtocolError> {
    if count == 0 {
        return Err(ProtocolError::ConfigMismatch("pair count must be at least 1".into()));
    }
    let template = match source.kind {
        SourceKind::AdversarialPurification { chi } => {
            let p = PurifiedPair::flagged(source.epsilon, chi)?;
            let f = fidelity(&p.vp_state(), &bell_state(BellKind::PhiPlus))?;
            if f < 1.0 - source.epsilon - 1e-9 {
                return Err(ProtocolError::FidelityViolation(f));
            }
            return Ok((0..count).map(|_| SharedPair::purified(p)).collect());
        }
        _ => source.pair_state(),
    };
    let f = fidelity(&template, &bell_state(BellKind::PhiPlus))?;
    if f < 1.0 - source.epsilon - 1e-9 {
        return Err(ProtocolError::FidelityViolation(f));
    }
    Ok((0..count).map(|_| SharedPair::new(template)).collect())
}

/// Analytic per-bit honest acceptance of the offline protocol when both
/// parties measure in a basis whose bit is 0 with probability `1/2 + delta`.
pub fn honest_bit_acceptance(source: &SourceModel, delta: f64) -> f64 {
    let flips = match source.kind {
        SourceKind::Perfect => (0.0, 0.0),
        // Φ- and Ψ± disagree with Φ+ on the Z (resp. X) correlation as below.
        SourceKind::MixedNoise { weights: [phi_m, psi_p, psi_m] } => (
            source.epsilon * (psi_p + psi_m),
            source.epsilon * (phi_m + psi_m),
        ),
        SourceKind::AdversarialPurification { .. } => {
            let rho = source.pair_state();
            (
                disagreement_rate(&rho, MeasBasis::Computational),
                disagreement_rate(&rho, MeasBasis::Hadamard),
            )
        }
    };
    1.0 - ((0.5 + delta) * flips.0 + (0.5 - delta) * flips.1)
}

/// Probability that `V` and `P` disagree when both measure `basis`.
pub fn disagreement_rate(rho: &DensityMatrix, basis: MeasBasis) -> f64 {
    [false, true]
        .into_iter()
        .map(|o| match crate::quantum::project_local(rho, Subsystem::P, basis, o) {
            Ok((p, Some((v, _)))) => p * crate::quantum::outcome_probability(&v, basis, !o).unwrap_or(0.0),
            _ => 0.0,
        })
        .sum()
}

/// Accept iff `a == b` bitwise.
pub fn verify_offline(a: &BitString, b: &BitString) -> Result<Decision, ProtocolError> {
    if a.len() != b.len() {
        return Err(ProtocolError::LengthMismatch(a.len(), b.len()));
    }
    let failing = a
        .iter()
        .zip(b.iter())
        .enumerate()
        .filter_map(|(j, (x, y))| (x != y).then_some(j))
        .collect();
    Ok(Decision::from_failures(failing))
}

/// Accept iff `a_j xor b_j == y2_j` for every `j`.
pub fn verify_online(a: &BitString, b: &BitString, y2: &BitString) -> Result<Decision, ProtocolError> {
    if a.len() != b.len() {
        return Err(ProtocolError::LengthMismatch(a.len(), b.len()));
    }
    if a.len() != y2.len() {
        return Err(ProtocolError::LengthMismatch(a.len(), y2.len()));
    }
    let failing = (0..a.len())
        .filter(|&j| (a.get(j) ^ b.get(j)) != y2.get(j))
        .collect();
    Ok(Decision::from_failures(failing))
}

/// What an adversary does with the verifier's challenge.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Interception {
    /// Deliver it to the prover.
    Forward,
    /// Keep the prover out of the round and answer in its place.
    Block,
}

pub struct OfflineReplyContext<'a> {
    pub challenge: &'a BitString,
    pub pairs: &'a [SharedPair],
    /// The prover's reply, when the challenge was forwarded.
    pub honest_reply: Option<&'a BitString>,
    /// Per-pair basis bits, disclosed only to adversaries that ask for
    /// basis side information (a worst-case assumption).
    pub basis_hint: Option<&'a BitString>,
}

pub trait OfflineAdversary {
    fn intercept_challenge(&mut self, _x: &BitString) -> Interception {
        Interception::Forward
    }

    fn wants_basis_side_information(&self) -> bool {
        false
    }

    /// Replacement for the classical reply; `None` leaves the channel as is.
    fn reply(&mut self, ctx: &OfflineReplyContext<'_>, rng: &mut dyn RngCore) -> Result<Option<BitString>, ProtocolError>;
}

/// One offline authentication round. The drawn challenge is removed from the
/// database whatever the outcome.
pub fn run_offline_round<R: Rng>(
    db: &mut CrpDatabase,
    prover_puf: &BiasedCpuf,
    source: &SourceModel,
    adversary: Option<&mut dyn OfflineAdversary>,
    rng: &mut R,
) -> Result<Transcript, ProtocolError> {
    if prover_puf.response_bits() != db.response_bits() || prover_puf.challenge_bits() != db.challenge_bits() {
        return Err(ProtocolError::ConfigMismatch(format!(
            "device shape ({}, {}) differs from database shape ({}, {})",
            prover_puf.challenge_bits(),
            prover_puf.response_bits(),
            db.challenge_bits(),
            db.response_bits()
        )));
    }
    if prover_puf.fingerprint() != db.device_fingerprint() {
        return Err(ProtocolError::ConfigMismatch("database was built from another device".into()));
    }
    let m = db.response_bits();
    let mut t = Transcript::new(Protocol::Offline);
    t.events.reserve(2 * m + 2);

    let pairs = distribute_pairs(source, m, rng)?;
    for (j, pair) in pairs.iter().enumerate() {
        let joint = pair.joint();
        t.push(Direction::SourceToV, Payload::Quantum(partial_trace(&joint, Subsystem::V)?), Some(j));
        t.push(Direction::SourceToP, Payload::Quantum(partial_trace(&joint, Subsystem::P)?), Some(j));
    }

    let crp = db.take_challenge(rng)?;
    let y = crp.response;
    t.push(
        Direction::VtoP,
        Payload::Classical {
            role: ClassicalRole::Challenge,
            bits: crp.challenge.clone(),
        },
        None,
    );

    let mut adversary = adversary;
    let interception = match adversary.as_deref_mut() {
        Some(adv) => adv.intercept_challenge(&crp.challenge),
        None => Interception::Forward,
    };

    let honest = if interception == Interception::Forward {
        let y_prover = prover_puf.eval(&crp.challenge)?;
        let mut a = Vec::with_capacity(m);
        for (pair, bit) in pairs.iter().zip(y_prover.iter()) {
            let (outcome, _) = pair.measure(Subsystem::P, MeasBasis::from_bit(bit), rng)?;
            a.push(outcome);
        }
        Some(BitString::new(a))
    } else {
        None
    };

    let reply = match adversary {
        Some(adv) => {
            let hint = adv.wants_basis_side_information().then_some(&y);
            let ctx = OfflineReplyContext {
                challenge: &crp.challenge,
                pairs: &pairs,
                honest_reply: honest.as_ref(),
                basis_hint: hint,
            };
            adv.reply(&ctx, rng)?.or(honest)
        }
        None => honest,
    };

    let Some(a) = reply else {
        return Ok(t);
    };
    if a.len() != m {
        return Err(ProtocolError::LengthMismatch(a.len(), m));
    }
    t.push(
        Direction::PtoV,
        Payload::Classical {
            role: ClassicalRole::Reply,
            bits: a.clone(),
        },
        None,
    );

    let mut b = Vec::with_capacity(m);
    for (pair, bit) in pairs.iter().zip(y.iter()) {
        let (outcome, _) = pair.measure(Subsystem::V, MeasBasis::from_bit(bit), rng)?;
        b.push(outcome);
    }
    let b = BitString::new(b);
    t.decision = Some(verify_offline(&a, &b)?);
    t.verifier = Some(VerifierRecord { response: y, outcomes: b });
    Ok(t)
}

/// A qubit on the online quantum channel.
#[derive(Clone, Debug)]
pub enum QubitPayload {
    /// The `V` half of a pair whose other half sits elsewhere.
    Entangled(SharedPair),
    /// An unentangled qubit prepared by whoever sent it.
    Standalone(DensityMatrix),
}

impl QubitPayload {
    pub fn state(&self) -> DensityMatrix {
        match self {
            QubitPayload::Entangled(pair) => pair.reduced(Subsystem::V),
            QubitPayload::Standalone(rho) => *rho,
        }
    }

    pub fn measure<R: Rng + ?Sized>(&self, basis: MeasBasis, rng: &mut R) -> Result<bool, QuantumError> {
        match self {
            QubitPayload::Entangled(pair) => pair.measure(Subsystem::V, basis, rng).map(|(o, _)| o),
            QubitPayload::Standalone(rho) => measure_single(rho, basis, rng).map(|(o, _)| o),
        }
    }
}

pub trait OnlineAdversary {
    /// Sees the challenge first; may use the prover's device (posing as the
    /// verifier) before deciding whether to let the challenge through. The
    /// device must be left in mode 1.
    fn intercept_challenge(
        &mut self,
        _x: &BitString,
        _device: &mut HepufDevice,
        _rng: &mut dyn RngCore,
    ) -> Result<Interception, ProtocolError> {
        Ok(Interception::Forward)
    }

    /// Replacement for the qubits sent to the verifier.
    fn quantum(
        &mut self,
        _k: usize,
        _honest: Option<&[QubitPayload]>,
        _rng: &mut dyn RngCore,
    ) -> Result<Option<Vec<QubitPayload>>, ProtocolError> {
        Ok(None)
    }

    /// Replacement for the announced outcome string.
    fn reply(
        &mut self,
        _k: usize,
        _honest: Option<&BitString>,
        _rng: &mut dyn RngCore,
    ) -> Result<Option<BitString>, ProtocolError> {
        Ok(None)
    }
}

/// One online authentication round. The device must be in mode 1 and is
/// returned to mode 1.
pub fn run_online_round<R: Rng>(
    db: &mut CrpDatabase,
    prover_dev: &mut HepufDevice,
    adversary: Option<&mut dyn OnlineAdversary>,
    rng: &mut R,
) -> Result<Transcript, ProtocolError> {
    if prover_dev.mode() != 1 {
        return Err(HepufError::WrongMode {
            expected: 1,
            actual: prover_dev.mode(),
        }
        .into());
    }
    if prover_dev.fingerprint() != db.device_fingerprint() {
        return Err(ProtocolError::ConfigMismatch("database was built from another device".into()));
    }
    let k = prover_dev.pair_count();
    if db.response_bits() != 2 * k {
        return Err(ProtocolError::ConfigMismatch(format!(
            "database responses have {} bits, device expects {}",
            db.response_bits(),
            2 * k
        )));
    }
    let mut t = Transcript::new(Protocol::Online);
    t.events.reserve(k + 2);
    let crp = db.take_challenge(rng)?;
    let split = SplitResponse::split(&crp.response)?;
    t.push(
        Direction::VtoP,
        Payload::Classical {
            role: ClassicalRole::Challenge,
            bits: crp.challenge.clone(),
        },
        None,
    );

    let mut adversary = adversary;
    let interception = match adversary.as_deref_mut() {
        Some(adv) => adv.intercept_challenge(&crp.challenge, prover_dev, rng)?,
        None => Interception::Forward,
    };
    if prover_dev.mode() != 1 {
        return Err(ProtocolError::ConfigMismatch("adversary left the device outside mode 1".into()));
    }

    let honest_qubits = if interception == Interception::Forward {
        let out = prover_dev.eval_mode1(&crp.challenge)?;
        Some(out.handles.into_iter().map(QubitPayload::Entangled).collect::<Vec<_>>())
    } else {
        None
    };
    let qubits = match adversary.as_deref_mut() {
        Some(adv) => adv.quantum(k, honest_qubits.as_deref(), rng)?.or(honest_qubits),
        None => honest_qubits,
    };
    if let Some(qs) = &qubits {
        if qs.len() != k {
            return Err(ProtocolError::LengthMismatch(qs.len(), k));
        }
        for (j, q) in qs.iter().enumerate() {
            t.push(Direction::PtoV, Payload::Quantum(q.state()), Some(j));
        }
    }

    let honest_b = if interception == Interception::Forward {
        prover_dev.set_mode(2)?;
        let b = prover_dev.measure_mode2(rng)?;
        prover_dev.set_mode(1)?;
        Some(b)
    } else {
        None
    };
    let reply = match adversary {
        Some(adv) => adv.reply(k, honest_b.as_ref(), rng)?.or(honest_b),
        None => honest_b,
    };

    let (Some(qubits), Some(b)) = (qubits, reply) else {
        return Ok(t);
    };
    if b.len() != k {
        return Err(ProtocolError::LengthMismatch(b.len(), k));
    }
    t.push(
        Direction::PtoV,
        Payload::Classical {
            role: ClassicalRole::Reply,
            bits: b.clone(),
        },
        None,
    );

    let mut a = Vec::with_capacity(k);
    for (q, basis_bit) in qubits.iter().zip(split.y1.iter()) {
        a.push(q.measure(MeasBasis::from_bit(basis_bit), rng)?);
    }
    let a = BitString::new(a);
    t.decision = Some(verify_online(&a, &b, &split.y2)?);
    t.verifier = Some(VerifierRecord {
        response: crp.response,
        outcomes: a,
    });
    Ok(t)
}
