//! Hybrid entangled PUF: a classical PUF whose response half `y2` is encoded
//! into Bell pairs and whose other half `y1` selects the measurement applied
//! to the retained prover qubits.

use crate::pair::SharedPair;
use crate::puf::{distinct_challenges, BiasedCpuf, BitString, Crp, CrpDatabase, PufError};
use crate::quantum::{bell_state, BellKind, DensityMatrix, MeasBasis, QuantumError, Subsystem};
use rand::Rng;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum HepufError {
    #[error("mode 0 is locked: the device has left the setup phase")]
    CalledAfterLock,
    #[error("operation requires mode {expected}, device is in mode {actual}")]
    WrongMode { expected: u8, actual: u8 },
    #[error("mode-2 measurement requested before any mode-1 evaluation")]
    NothingRetained,
    #[error("cannot re-enter mode 0 once it has been left")]
    RelockAttempt,
    #[error("invalid mode {0}")]
    InvalidMode(u8),
    #[error("response length {0} is odd; it must split into equal halves")]
    OddResponseLength(usize),
    #[error("encoding states must be two distinct Bell states")]
    InvalidStateSet,
    #[error(transparent)]
    Puf(#[from] PufError),
    #[error(transparent)]
    Quantum(#[from] QuantumError),
}

/// `(y1, y2)` halves of a response.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SplitResponse {
    pub y1: BitString,
    pub y2: BitString,
}

impl SplitResponse {
    pub fn split(y: &BitString) -> Result<Self, HepufError> {
        if y.len() % 2 != 0 {
            return Err(HepufError::OddResponseLength(y.len()));
        }
        let (y1, y2) = y.split_at(y.len() / 2);
        Ok(SplitResponse { y1, y2 })
    }

    pub fn pair_count(&self) -> usize {
        self.y1.len()
    }
}

/// Result of a mode-1 evaluation.
#[derive(Clone, Debug)]
pub struct Mode1Output {
    /// `Tr_P` of every encoded pair at emission time.
    pub reduced: Vec<DensityMatrix>,
    /// Handles to the same pairs; the `V` qubit of each is what travels on
    /// the quantum channel.
    pub handles: Vec<SharedPair>,
}

#[derive(Clone, Debug)]
pub struct HepufDevice {
    mode: u8,
    cpuf: BiasedCpuf,
    state_set: (BellKind, BellKind),
    retained: Vec<SharedPair>,
    basis_bits: Option<BitString>,
    mode0_locked: bool,
}

impl HepufDevice {
    /// Fresh device in mode 0 with the `(Φ+, Ψ-)` encoding.
    pub fn new(cpuf: BiasedCpuf) -> Result<Self, HepufError> {
        Self::with_state_set(cpuf, (BellKind::PhiPlus, BellKind::PsiMinus))
    }

    pub fn with_state_set(cpuf: BiasedCpuf, state_set: (BellKind, BellKind)) -> Result<Self, HepufError> {
        if cpuf.response_bits() % 2 != 0 {
            return Err(HepufError::OddResponseLength(cpuf.response_bits()));
        }
        if state_set.0 == state_set.1 {
            return Err(HepufError::InvalidStateSet);
        }
        Ok(HepufDevice {
            mode: 0,
            cpuf,
            state_set,
            retained: Vec::new(),
            basis_bits: None,
            mode0_locked: false,
        })
    }

    pub fn mode(&self) -> u8 {
        self.mode
    }

    pub fn is_locked(&self) -> bool {
        self.mode0_locked
    }

    /// Number of pairs produced per challenge, `m / 2`.
    pub fn pair_count(&self) -> usize {
        self.cpuf.response_bits() / 2
    }

    pub fn challenge_bits(&self) -> usize {
        self.cpuf.challenge_bits()
    }

    pub fn delta(&self) -> f64 {
        self.cpuf.delta()
    }

    pub fn fingerprint(&self) -> String {
        self.cpuf.fingerprint()
    }

    pub fn state_set(&self) -> (BellKind, BellKind) {
        self.state_set
    }

    pub fn retained_len(&self) -> usize {
        self.retained.len()
    }

    pub fn set_mode(&mut self, new_mode: u8) -> Result<(), HepufError> {
        match new_mode {
            0 if self.mode0_locked => Err(HepufError::RelockAttempt),
            0 => Ok(()),
            1 | 2 => {
                self.mode = new_mode;
                self.mode0_locked = true;
                Ok(())
            }
            other => Err(HepufError::InvalidMode(other)),
        }
    }

    /// Full classical response; setup phase only.
    pub fn eval_mode0(&self, x: &BitString) -> Result<BitString, HepufError> {
        if self.mode0_locked || self.mode != 0 {
            return Err(HepufError::CalledAfterLock);
        }
        Ok(self.cpuf.eval(x)?)
    }

    /// Setup-phase helper: queries `d` distinct random challenges in mode 0.
    pub fn build_crp_database<R: Rng + ?Sized>(&self, d: usize, rng: &mut R) -> Result<CrpDatabase, HepufError> {
        let entries = distinct_challenges(self.cpuf.challenge_bits(), d, rng)?
            .into_iter()
            .map(|challenge| {
                let response = self.eval_mode0(&challenge)?;
                Ok(Crp { challenge, response })
            })
            .collect::<Result<Vec<_>, HepufError>>()?;
        Ok(CrpDatabase::from_entries(
            self.cpuf.challenge_bits(),
            self.cpuf.response_bits(),
            self.cpuf.delta(),
            self.cpuf.fingerprint(),
            entries,
        )?)
    }

    /// Encodes `y2` into pairs, keeps them, caches `y1`, and releases the
    /// verifier-side halves.
    pub fn eval_mode1(&mut self, x: &BitString) -> Result<Mode1Output, HepufError> {
        if self.mode != 1 {
            return Err(HepufError::WrongMode {
                expected: 1,
                actual: self.mode,
            });
        }
        let split = SplitResponse::split(&self.cpuf.eval(x)?)?;
        let encoded = [bell_state(self.state_set.0), bell_state(self.state_set.1)];
        let handles: Vec<SharedPair> = split
            .y2
            .iter()
            .map(|bit| SharedPair::new(encoded[usize::from(bit)]))
            .collect();
        let reduced = handles.iter().map(|h| h.reduced(Subsystem::V)).collect();
        self.retained = handles.clone();
        self.basis_bits = Some(split.y1);
        Ok(Mode1Output { reduced, handles })
    }

    /// Measures every retained prover qubit in the basis chosen by `y1` and
    /// returns the outcome string.
    pub fn measure_mode2<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<BitString, HepufError> {
        if self.mode != 2 {
            return Err(HepufError::WrongMode {
                expected: 2,
                actual: self.mode,
            });
        }
        if self.retained.is_empty() {
            return Err(HepufError::NothingRetained);
        }
        let y1 = self.basis_bits.take().ok_or(HepufError::NothingRetained)?;
        let mut outcomes = Vec::with_capacity(self.retained.len());
        for (pair, basis_bit) in self.retained.drain(..).zip(y1.iter()) {
            let (b, _) = pair.measure(Subsystem::P, MeasBasis::from_bit(basis_bit), rng)?;
            outcomes.push(b);
        }
        Ok(BitString::new(outcomes))
    }
}
