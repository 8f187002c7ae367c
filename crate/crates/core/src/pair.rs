//! Shared handles to entangled pairs.
//!
//! One handle is held by each party that owns a qubit of the pair, so a
//! measurement performed through one handle is visible through every other.
//! Handles never outlive a single authentication round.

use crate::quantum::{
    measure_local, partial_trace, BellKind, DensityMatrix, MeasBasis, QuantumError, Subsystem, C64,
};
use rand::Rng;
use std::cell::RefCell;
use std::rc::Rc;

/// Tripartite pure state `sum_i c_i |psi_i>_VP |i>_A` with orthonormal flag
/// states on the adversary register `A`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PurifiedPair {
    coeffs: [f64; 2],
    branches: [[C64; 4]; 2],
}

impl PurifiedPair {
    /// `sqrt(1 - eps) |Φ+>|0>_A + sqrt(eps) |chi>|1>_A`; `chi` must be
    /// normalised and orthogonal to `|Φ+>`.
    pub fn flagged(epsilon: f64, chi: [C64; 4]) -> Result<Self, QuantumError> {
        if !(0.0..=1.0).contains(&epsilon) {
            return Err(QuantumError::NotUnitTrace(epsilon));
        }
        let norm: f64 = chi.iter().map(|a| a.norm_sqr()).sum();
        if (norm - 1.0).abs() > 1e-12 {
            return Err(QuantumError::NotNormalized(norm.sqrt()));
        }
        let phi = BellKind::PhiPlus.amplitudes();
        let overlap: C64 = phi.iter().zip(chi.iter()).map(|(a, b)| a.conj() * b).sum();
        if overlap.norm() > 1e-12 {
            return Err(QuantumError::NotPositive(-overlap.norm()));
        }
        Ok(PurifiedPair {
            coeffs: [(1.0 - epsilon).sqrt(), epsilon.sqrt()],
            branches: [phi, chi],
        })
    }

    pub fn coefficients(&self) -> [f64; 2] {
        self.coeffs
    }

    pub fn branches(&self) -> &[[C64; 4]; 2] {
        &self.branches
    }

    /// `rho_VP = Tr_A` of the tripartite state.
    pub fn vp_state(&self) -> DensityMatrix {
        let mut components = Vec::with_capacity(2);
        for (c, psi) in self.coeffs.iter().zip(self.branches.iter()) {
            if *c > 0.0 {
                components.push((c * c, DensityMatrix::from_pure(psi).expect("normalised branch")));
            }
        }
        DensityMatrix::mixture(&components).expect("weights sum to one")
    }

    /// `Tr_VP` of the tripartite state (2x2, row-major).
    pub fn register_state(&self) -> [C64; 4] {
        let mut out = [C64::new(0.0, 0.0); 4];
        for i in 0..2 {
            for j in 0..2 {
                let ip: C64 = self.branches[j]
                    .iter()
                    .zip(self.branches[i].iter())
                    .map(|(a, b)| a.conj() * b)
                    .sum();
                out[i * 2 + j] = ip * (self.coeffs[i] * self.coeffs[j]);
            }
        }
        out
    }

    /// Unnormalised register states correlated with the verifier's outcome:
    /// entry `b` is `Tr_VP[(Π_b ⊗ I_P ⊗ I_A) |Ω><Ω|]`.
    pub fn register_conditionals(&self, basis: MeasBasis) -> [[C64; 4]; 2] {
        let mut out = [[C64::new(0.0, 0.0); 4]; 2];
        for (b, slot) in out.iter_mut().enumerate() {
            let ket = basis.ket(b == 1);
            // (Π_b ⊗ I) |psi_i>, V is the first factor.
            let project = |psi: &[C64; 4]| -> [C64; 4] {
                let mut res = [C64::new(0.0, 0.0); 4];
                for p in 0..2 {
                    let amp: C64 = (0..2).map(|v| ket[v].conj() * psi[2 * v + p]).sum();
                    for v in 0..2 {
                        res[2 * v + p] = ket[v] * amp;
                    }
                }
                res
            };
            let projected = [project(&self.branches[0]), project(&self.branches[1])];
            for i in 0..2 {
                for j in 0..2 {
                    let ip: C64 = self.branches[j]
                        .iter()
                        .zip(projected[i].iter())
                        .map(|(a, b)| a.conj() * b)
                        .sum();
                    slot[i * 2 + j] = ip * (self.coeffs[i] * self.coeffs[j]);
                }
            }
        }
        out
    }

    /// Projects the register onto `e`; returns the probability and the
    /// normalised pure state left on `VP`.
    pub fn project_register(&self, e: [C64; 2]) -> (f64, Option<DensityMatrix>) {
        let mut psi = [C64::new(0.0, 0.0); 4];
        for i in 0..2 {
            let w = e[i].conj() * self.coeffs[i];
            for (dst, src) in psi.iter_mut().zip(self.branches[i].iter()) {
                *dst += w * src;
            }
        }
        let prob: f64 = psi.iter().map(|a| a.norm_sqr()).sum();
        if prob <= 1e-15 {
            return (prob, None);
        }
        let norm = prob.sqrt();
        for a in psi.iter_mut() {
            *a /= norm;
        }
        (prob, DensityMatrix::from_pure(&psi).ok())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum PairState {
    /// Joint `VP` state with no outside purification.
    Mixed(DensityMatrix),
    /// Pair still entangled with an adversary register.
    Purified(PurifiedPair),
}

/// Reference-counted handle to one pair's joint state.
#[derive(Clone, Debug)]
pub struct SharedPair(Rc<RefCell<PairState>>);

impl SharedPair {
    pub fn new(state: DensityMatrix) -> Self {
        SharedPair(Rc::new(RefCell::new(PairState::Mixed(state))))
    }

    pub fn purified(pair: PurifiedPair) -> Self {
        SharedPair(Rc::new(RefCell::new(PairState::Purified(pair))))
    }

    /// Snapshot of the pair's state, including any purification.
    pub fn state(&self) -> PairState {
        self.0.borrow().clone()
    }

    /// Current joint `VP` state (adversary register traced out).
    pub fn joint(&self) -> DensityMatrix {
        match &*self.0.borrow() {
            PairState::Mixed(rho) => *rho,
            PairState::Purified(p) => p.vp_state(),
        }
    }

    pub fn reduced(&self, keep: Subsystem) -> DensityMatrix {
        partial_trace(&self.joint(), keep).expect("pair states are two-qubit")
    }

    pub fn is_purified(&self) -> bool {
        matches!(&*self.0.borrow(), PairState::Purified(_))
    }

    /// Replaces the shared state; used when the register is measured.
    pub fn collapse_to(&self, rho: DensityMatrix) {
        *self.0.borrow_mut() = PairState::Mixed(rho);
    }

    /// Measures one qubit of the pair and propagates the collapse to every
    /// holder. A purifying register that has not been measured yet is
    /// discarded at this point.
    pub fn measure<R: Rng + ?Sized>(
        &self,
        subsystem: Subsystem,
        basis: MeasBasis,
        rng: &mut R,
    ) -> Result<(bool, f64), QuantumError> {
        let joint = self.joint();
        let m = measure_local(&joint, subsystem, basis, rng)?;
        self.collapse_to(m.joint);
        Ok((m.outcome, m.prob))
    }

    pub fn same_pair(&self, other: &SharedPair) -> bool {
        Rc::ptr_eq(&self.0, &other.0)
    }
}
