//! Dense density-matrix substrate for one and two qubits.
//!
//! Two-qubit states use the ordering `index = 2 * v + p`: the verifier-side
//! qubit `V` is the first tensor factor and the prover-side qubit `P` the
//! second. Every module in the crate relies on this convention.

use nalgebra::{DMatrix, Matrix4};
use num_complex::Complex64;
use rand::Rng;
use std::f64::consts::FRAC_1_SQRT_2;
use thiserror::Error;

pub type C64 = Complex64;

pub const HERMITIAN_TOL: f64 = 1e-12;
pub const TRACE_TOL: f64 = 1e-12;
pub const PSD_TOL: f64 = -1e-10;
pub const BLOCH_TOL: f64 = 1e-12;

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QuantumError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("unsupported dimension {0}; only 2 and 4 are modelled")]
    UnsupportedDimension(usize),
    #[error("matrix is not Hermitian (max deviation {0:e})")]
    NotHermitian(f64),
    #[error("trace is {0}, expected 1")]
    NotUnitTrace(f64),
    #[error("matrix is not positive semidefinite (smallest eigenvalue {0:e})")]
    NotPositive(f64),
    #[error("Bloch vector has length {0} > 1")]
    UnphysicalBloch(f64),
    #[error("state vector has norm {0}, expected 1")]
    NotNormalized(f64),
    #[error("internal fault: sampled a zero-probability measurement branch")]
    ZeroProbabilityBranch,
}

pub type Result<T> = std::result::Result<T, QuantumError>;

/// Which half of a two-qubit pair an operation acts on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum Subsystem {
    /// Verifier side, first tensor factor.
    V,
    /// Prover side, second tensor factor.
    P,
}

impl Subsystem {
    pub fn other(self) -> Self {
        match self {
            Subsystem::V => Subsystem::P,
            Subsystem::P => Subsystem::V,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum BellKind {
    PhiPlus,
    PhiMinus,
    PsiPlus,
    PsiMinus,
}

impl BellKind {
    pub const ALL: [BellKind; 4] = [
        BellKind::PhiPlus,
        BellKind::PhiMinus,
        BellKind::PsiPlus,
        BellKind::PsiMinus,
    ];

    /// State vector in the `2 * v + p` ordering.
    pub fn amplitudes(self) -> [C64; 4] {
        let h = C64::new(FRAC_1_SQRT_2, 0.0);
        match self {
            BellKind::PhiPlus => [h, ZERO, ZERO, h],
            BellKind::PhiMinus => [h, ZERO, ZERO, -h],
            BellKind::PsiPlus => [ZERO, h, h, ZERO],
            BellKind::PsiMinus => [ZERO, h, -h, ZERO],
        }
    }
}

/// Single-qubit projective measurement used by both parties.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum MeasBasis {
    /// `{|0>, |1>}`
    Computational,
    /// `{|+>, |->}`
    Hadamard,
}

impl MeasBasis {
    /// Basis selected by a response bit: 0 picks Z, 1 picks X.
    pub fn from_bit(bit: bool) -> Self {
        if bit {
            MeasBasis::Hadamard
        } else {
            MeasBasis::Computational
        }
    }

    pub fn ket(self, outcome: bool) -> [C64; 2] {
        match (self, outcome) {
            (MeasBasis::Computational, false) => [ONE, ZERO],
            (MeasBasis::Computational, true) => [ZERO, ONE],
            (MeasBasis::Hadamard, false) => {
                let h = C64::new(FRAC_1_SQRT_2, 0.0);
                [h, h]
            }
            (MeasBasis::Hadamard, true) => {
                let h = C64::new(FRAC_1_SQRT_2, 0.0);
                [h, -h]
            }
        }
    }

    pub fn projector(self, outcome: bool) -> DensityMatrix {
        DensityMatrix::from_ket2(self.ket(outcome))
    }
}

/// Hermitian, unit-trace, positive semidefinite matrix of dimension 2 or 4.
///
/// Entries are stored row-major in a fixed buffer so the type is `Copy` and
/// never allocates.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DensityMatrix {
    dim: usize,
    data: [C64; 16],
}

impl DensityMatrix {
    /// Builds a state from row-major entries, checking every invariant.
    pub fn from_entries(dim: usize, entries: &[C64]) -> Result<Self> {
        check_dim(dim)?;
        if entries.len() != dim * dim {
            return Err(QuantumError::DimensionMismatch {
                expected: dim * dim,
                found: entries.len(),
            });
        }
        let mut data = [ZERO; 16];
        data[..dim * dim].copy_from_slice(entries);
        let rho = DensityMatrix { dim, data };
        rho.validate()?;
        Ok(rho)
    }

    /// Pure state `|psi><psi|` of a normalised 2- or 4-component vector.
    pub fn from_pure(amps: &[C64]) -> Result<Self> {
        let dim = amps.len();
        check_dim(dim)?;
        let norm: f64 = amps.iter().map(|a| a.norm_sqr()).sum();
        if (norm - 1.0).abs() > 1e-10 {
            return Err(QuantumError::NotNormalized(norm.sqrt()));
        }
        let mut data = [ZERO; 16];
        for i in 0..dim {
            for j in 0..dim {
                data[i * dim + j] = amps[i] * amps[j].conj();
            }
        }
        Ok(DensityMatrix::trusted(dim, data))
    }

    pub(crate) fn from_ket2(ket: [C64; 2]) -> Self {
        let mut data = [ZERO; 16];
        for i in 0..2 {
            for j in 0..2 {
                data[i * 2 + j] = ket[i] * ket[j].conj();
            }
        }
        DensityMatrix::trusted(2, data)
    }

    pub fn maximally_mixed(dim: usize) -> Result<Self> {
        check_dim(dim)?;
        let mut data = [ZERO; 16];
        let w = 1.0 / dim as f64;
        for i in 0..dim {
            data[i * dim + i] = C64::new(w, 0.0);
        }
        Ok(DensityMatrix::trusted(dim, data))
    }

    /// Computational basis projector `|index><index|`.
    pub fn basis_state(dim: usize, index: usize) -> Result<Self> {
        check_dim(dim)?;
        if index >= dim {
            return Err(QuantumError::DimensionMismatch {
                expected: dim,
                found: index,
            });
        }
        let mut data = [ZERO; 16];
        data[index * dim + index] = ONE;
        Ok(DensityMatrix::trusted(dim, data))
    }

    /// Construction path for internally derived states. Cheap invariants are
    /// checked under unit tests and debug assertions; the full eigenvalue
    /// check is left to [`DensityMatrix::validate`].
    pub(crate) fn trusted(dim: usize, data: [C64; 16]) -> Self {
        let rho = DensityMatrix { dim, data };
        if cfg!(any(test, debug_assertions)) {
            assert!(rho.hermitian_deviation() <= 1e-9, "non-Hermitian state {rho:?}");
            assert!((rho.trace().re - 1.0).abs() <= 1e-9, "non-unit trace {rho:?}");
        }
        rho
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, row: usize, col: usize) -> C64 {
        self.data[row * self.dim + col]
    }

    /// Row-major entries.
    pub fn entries(&self) -> &[C64] {
        &self.data[..self.dim * self.dim]
    }

    pub fn trace(&self) -> C64 {
        (0..self.dim).map(|i| self.get(i, i)).sum()
    }

    /// `Tr(rho^2)`.
    pub fn purity(&self) -> f64 {
        // Tr(rho^2) = sum_ij |rho_ij|^2 for Hermitian rho.
        self.entries().iter().map(|z| z.norm_sqr()).sum()
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        hermitian_eigenvalues(self.dim, self.entries())
    }

    pub fn hermitian_deviation(&self) -> f64 {
        let d = self.dim;
        let mut worst = 0.0f64;
        for i in 0..d {
            for j in 0..d {
                worst = worst.max((self.get(i, j) - self.get(j, i).conj()).norm());
            }
        }
        worst
    }

    /// Checks the three state invariants.
    pub fn validate(&self) -> Result<()> {
        let herm = self.hermitian_deviation();
        if herm > HERMITIAN_TOL {
            return Err(QuantumError::NotHermitian(herm));
        }
        let tr = self.trace();
        if (tr.re - 1.0).abs() > TRACE_TOL || tr.im.abs() > TRACE_TOL {
            return Err(QuantumError::NotUnitTrace(tr.re));
        }
        let min = self.eigenvalues()[0];
        if min < PSD_TOL {
            return Err(QuantumError::NotPositive(min));
        }
        Ok(())
    }

    /// Convex combination `sum_i w_i rho_i`; weights must be non-negative and
    /// sum to one.
    pub fn mixture(components: &[(f64, DensityMatrix)]) -> Result<Self> {
        let Some((_, first)) = components.first() else {
            return Err(QuantumError::NotUnitTrace(0.0));
        };
        let dim = first.dim;
        let mut data = [ZERO; 16];
        let mut total = 0.0;
        for (w, rho) in components {
            if rho.dim != dim {
                return Err(QuantumError::DimensionMismatch {
                    expected: dim,
                    found: rho.dim,
                });
            }
            if *w < 0.0 {
                return Err(QuantumError::NotPositive(*w));
            }
            total += w;
            for (acc, z) in data.iter_mut().zip(rho.entries()) {
                *acc += z * *w;
            }
        }
        if (total - 1.0).abs() > TRACE_TOL {
            return Err(QuantumError::NotUnitTrace(total));
        }
        Ok(DensityMatrix::trusted(dim, data))
    }

    /// `self ⊗ other` for two single-qubit states; `self` becomes `V`.
    pub fn tensor(&self, other: &DensityMatrix) -> Result<Self> {
        if self.dim != 2 || other.dim != 2 {
            return Err(QuantumError::DimensionMismatch {
                expected: 2,
                found: if self.dim != 2 { self.dim } else { other.dim },
            });
        }
        let mut data = [ZERO; 16];
        for v in 0..2 {
            for p in 0..2 {
                for v2 in 0..2 {
                    for p2 in 0..2 {
                        data[(2 * v + p) * 4 + 2 * v2 + p2] = self.get(v, v2) * other.get(p, p2);
                    }
                }
            }
        }
        Ok(DensityMatrix::trusted(4, data))
    }

    /// Largest entrywise modulus of `self - other`.
    pub fn max_abs_diff(&self, other: &DensityMatrix) -> f64 {
        if self.dim != other.dim {
            return f64::INFINITY;
        }
        self.entries()
            .iter()
            .zip(other.entries())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    fn to_dmatrix(&self) -> DMatrix<C64> {
        DMatrix::from_row_slice(self.dim, self.dim, self.entries())
    }
}

fn check_dim(dim: usize) -> Result<()> {
    match dim {
        2 | 4 => Ok(()),
        other => Err(QuantumError::UnsupportedDimension(other)),
    }
}

fn same_dim(a: &DensityMatrix, b: &DensityMatrix) -> Result<()> {
    if a.dim != b.dim {
        return Err(QuantumError::DimensionMismatch {
            expected: a.dim,
            found: b.dim,
        });
    }
    Ok(())
}

/// Eigen-decomposition of a 2x2 Hermitian matrix given row-major.
///
/// Returns `(eigenvalue, eigenvector)` pairs with the larger eigenvalue first.
pub(crate) fn hermitian2_eigen(m: &[C64]) -> [(f64, [C64; 2]); 2] {
    let a = m[0].re;
    let d = m[3].re;
    let b = m[1];
    let mean = 0.5 * (a + d);
    let half_gap = 0.5 * (a - d);
    let radius = (half_gap * half_gap + b.norm_sqr()).sqrt();
    let hi = mean + radius;
    let lo = mean - radius;
    if b.norm() <= 1e-300 {
        // Already diagonal.
        let e0 = [ONE, ZERO];
        let e1 = [ZERO, ONE];
        return if a >= d {
            [(a, e0), (d, e1)]
        } else {
            [(d, e1), (a, e0)]
        };
    }
    // (A - lambda) v = 0 with v = (b, lambda - a).
    let vec_for = |lambda: f64| -> [C64; 2] {
        let v0 = b;
        let v1 = C64::new(lambda - a, 0.0);
        let n = (v0.norm_sqr() + v1.norm_sqr()).sqrt();
        [v0 / n, v1 / n]
    };
    [(hi, vec_for(hi)), (lo, vec_for(lo))]
}

/// Eigenvalues of a Hermitian matrix (dim 2 closed form, dim 4 iterative),
/// ascending.
pub(crate) fn hermitian_eigenvalues(dim: usize, m: &[C64]) -> Vec<f64> {
    match dim {
        2 => {
            let [(hi, _), (lo, _)] = hermitian2_eigen(m);
            vec![lo, hi]
        }
        4 => {
            let mat = Matrix4::from_row_slice(m);
            let mut ev: Vec<f64> = mat.symmetric_eigenvalues().iter().copied().collect();
            ev.sort_by(f64::total_cmp);
            ev
        }
        _ => {
            let mat = DMatrix::from_row_slice(dim, dim, m);
            let mut ev: Vec<f64> = mat.symmetric_eigenvalues().iter().copied().collect();
            ev.sort_by(f64::total_cmp);
            ev
        }
    }
}

/// Trace norm of a Hermitian matrix.
pub(crate) fn trace_norm(dim: usize, m: &[C64]) -> f64 {
    hermitian_eigenvalues(dim, m).iter().map(|l| l.abs()).sum()
}

/// Projector onto a Bell state.
pub fn bell_state(kind: BellKind) -> DensityMatrix {
    let amps = kind.amplitudes();
    let mut data = [ZERO; 16];
    for i in 0..4 {
        for j in 0..4 {
            data[i * 4 + j] = amps[i] * amps[j].conj();
        }
    }
    DensityMatrix::trusted(4, data)
}

/// Point of the Bloch ball.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct BlochVector {
    x: f64,
    y: f64,
    z: f64,
}

impl BlochVector {
    pub fn new(x: f64, y: f64, z: f64) -> Result<Self> {
        let norm = (x * x + y * y + z * z).sqrt();
        if !norm.is_finite() || norm * norm > 1.0 + BLOCH_TOL {
            return Err(QuantumError::UnphysicalBloch(norm));
        }
        Ok(BlochVector { x, y, z })
    }

    pub fn origin() -> Self {
        BlochVector { x: 0.0, y: 0.0, z: 0.0 }
    }

    pub fn x(&self) -> f64 {
        self.x
    }
    pub fn y(&self) -> f64 {
        self.y
    }
    pub fn z(&self) -> f64 {
        self.z
    }

    pub fn norm(&self) -> f64 {
        (self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }
}

/// `rho = (I + x sigma_x + y sigma_y + z sigma_z) / 2`.
pub fn bloch_to_density(v: &BlochVector) -> DensityMatrix {
    let mut data = [ZERO; 16];
    data[0] = C64::new(0.5 * (1.0 + v.z), 0.0);
    data[1] = C64::new(0.5 * v.x, -0.5 * v.y);
    data[2] = C64::new(0.5 * v.x, 0.5 * v.y);
    data[3] = C64::new(0.5 * (1.0 - v.z), 0.0);
    DensityMatrix::trusted(2, data)
}

pub fn density_to_bloch(rho: &DensityMatrix) -> Result<BlochVector> {
    if rho.dim != 2 {
        return Err(QuantumError::DimensionMismatch {
            expected: 2,
            found: rho.dim,
        });
    }
    let off = rho.get(0, 1);
    BlochVector::new(2.0 * off.re, -2.0 * off.im, (rho.get(0, 0) - rho.get(1, 1)).re)
}

pub fn partial_trace(state: &DensityMatrix, keep: Subsystem) -> Result<DensityMatrix> {
    if state.dim != 4 {
        return Err(QuantumError::DimensionMismatch {
            expected: 4,
            found: state.dim,
        });
    }
    let mut data = [ZERO; 16];
    for i in 0..2 {
        for j in 0..2 {
            let mut acc = ZERO;
            for t in 0..2 {
                acc += match keep {
                    Subsystem::V => state.get(2 * i + t, 2 * j + t),
                    Subsystem::P => state.get(2 * t + i, 2 * t + j),
                };
            }
            data[i * 2 + j] = acc;
        }
    }
    Ok(DensityMatrix::trusted(2, data))
}

/// Unnormalised state of the unmeasured qubit after projecting `subsystem`
/// onto `ket`, i.e. `Tr_S[(Π ⊗ I) rho (Π ⊗ I)]`.
fn conditional_unnormalised(state: &DensityMatrix, subsystem: Subsystem, ket: [C64; 2]) -> [C64; 4] {
    let mut sigma = [ZERO; 4];
    for i in 0..2 {
        for j in 0..2 {
            let mut acc = ZERO;
            for s in 0..2 {
                for s2 in 0..2 {
                    let w = ket[s].conj() * ket[s2];
                    if w == ZERO {
                        continue;
                    }
                    let entry = match subsystem {
                        Subsystem::V => state.get(2 * s + i, 2 * s2 + j),
                        Subsystem::P => state.get(2 * i + s, 2 * j + s2),
                    };
                    acc += w * entry;
                }
            }
            sigma[i * 2 + j] = acc;
        }
    }
    sigma
}

/// Outcome of measuring one half of a pair.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LocalMeasurement {
    pub outcome: bool,
    /// Born probability of the sampled outcome.
    pub prob: f64,
    /// Normalised state of the other qubit.
    pub collapsed: DensityMatrix,
    /// Normalised post-measurement two-qubit state.
    pub joint: DensityMatrix,
}

/// Born probability and conditional post-measurement states for a fixed
/// outcome. Returns `None` for the states when the branch has probability 0.
pub fn project_local(
    state: &DensityMatrix,
    subsystem: Subsystem,
    basis: MeasBasis,
    outcome: bool,
) -> Result<(f64, Option<(DensityMatrix, DensityMatrix)>)> {
    if state.dim != 4 {
        return Err(QuantumError::DimensionMismatch {
            expected: 4,
            found: state.dim,
        });
    }
    let ket = basis.ket(outcome);
    let sigma = conditional_unnormalised(state, subsystem, ket);
    let prob = (sigma[0].re + sigma[3].re).clamp(0.0, 1.0);
    if prob <= 1e-15 {
        return Ok((prob, None));
    }
    let mut data = [ZERO; 16];
    for (dst, src) in data.iter_mut().zip(sigma.iter()) {
        *dst = src / prob;
    }
    // Re-symmetrise away round-off.
    data[0].im = 0.0;
    data[3].im = 0.0;
    data[2] = data[1].conj();
    let collapsed = DensityMatrix::trusted(2, data);
    let measured = DensityMatrix::from_ket2(ket);
    let joint = match subsystem {
        Subsystem::V => measured.tensor(&collapsed)?,
        Subsystem::P => collapsed.tensor(&measured)?,
    };
    Ok((prob, Some((collapsed, joint))))
}

/// Measures one qubit of a two-qubit state in `basis`, sampling the outcome
/// by the Born rule.
pub fn measure_local<R: Rng + ?Sized>(
    state: &DensityMatrix,
    subsystem: Subsystem,
    basis: MeasBasis,
    rng: &mut R,
) -> Result<LocalMeasurement> {
    if state.dim != 4 {
        return Err(QuantumError::DimensionMismatch {
            expected: 4,
            found: state.dim,
        });
    }
    let sigma0 = conditional_unnormalised(state, subsystem, basis.ket(false));
    let p0 = (sigma0[0].re + sigma0[3].re).clamp(0.0, 1.0);
    let outcome = rng.random::<f64>() >= p0;
    let (prob, post) = project_local(state, subsystem, basis, outcome)?;
    let (collapsed, joint) = post.ok_or(QuantumError::ZeroProbabilityBranch)?;
    Ok(LocalMeasurement {
        outcome,
        prob,
        collapsed,
        joint,
    })
}

/// Born probability of `outcome` when measuring a single qubit.
pub fn outcome_probability(state: &DensityMatrix, basis: MeasBasis, outcome: bool) -> Result<f64> {
    if state.dim != 2 {
        return Err(QuantumError::DimensionMismatch {
            expected: 2,
            found: state.dim,
        });
    }
    Ok(ket_probability(state, basis.ket(outcome)))
}

fn ket_probability(state: &DensityMatrix, ket: [C64; 2]) -> f64 {
    let mut acc = ZERO;
    for i in 0..2 {
        for j in 0..2 {
            acc += ket[i].conj() * state.get(i, j) * ket[j];
        }
    }
    acc.re.clamp(0.0, 1.0)
}

/// Measures a single qubit; returns the outcome and its Born probability.
pub fn measure_single<R: Rng + ?Sized>(
    state: &DensityMatrix,
    basis: MeasBasis,
    rng: &mut R,
) -> Result<(bool, f64)> {
    let p0 = outcome_probability(state, basis, false)?;
    let outcome = rng.random::<f64>() >= p0;
    let prob = if outcome { 1.0 - p0 } else { p0 };
    if prob <= 0.0 {
        return Err(QuantumError::ZeroProbabilityBranch);
    }
    Ok((outcome, prob))
}

/// Projective measurement of a qubit in an arbitrary orthonormal basis.
/// Returns the index of the basis vector obtained and its probability.
pub fn measure_in_basis<R: Rng + ?Sized>(
    state: &DensityMatrix,
    basis: &[[C64; 2]; 2],
    rng: &mut R,
) -> Result<(usize, f64)> {
    if state.dim != 2 {
        return Err(QuantumError::DimensionMismatch {
            expected: 2,
            found: state.dim,
        });
    }
    let p0 = ket_probability(state, basis[0]);
    let idx = usize::from(rng.random::<f64>() >= p0);
    let prob = if idx == 0 { p0 } else { 1.0 - p0 };
    if prob <= 0.0 {
        return Err(QuantumError::ZeroProbabilityBranch);
    }
    Ok((idx, prob))
}

fn psd_sqrt(rho: &DensityMatrix) -> DMatrix<C64> {
    let eig = rho.to_dmatrix().symmetric_eigen();
    let d = rho.dim;
    let mut out = DMatrix::<C64>::zeros(d, d);
    for k in 0..d {
        let lam = eig.eigenvalues[k].max(0.0).sqrt();
        let v = eig.eigenvectors.column(k);
        out += (v * v.adjoint()) * C64::new(lam, 0.0);
    }
    out
}

/// Uhlmann fidelity in the squared convention,
/// `F = (Tr sqrt(sqrt(a) b sqrt(a)))^2`, so that `F(a, |psi><psi|) = <psi|a|psi>`.
pub fn fidelity(a: &DensityMatrix, b: &DensityMatrix) -> Result<f64> {
    same_dim(a, b)?;
    let overlap = || -> f64 {
        a.entries()
            .iter()
            .enumerate()
            .map(|(idx, z)| {
                let (i, j) = (idx / a.dim, idx % a.dim);
                (z * b.get(j, i)).re
            })
            .sum()
    };
    if (b.purity() - 1.0).abs() <= 1e-12 || (a.purity() - 1.0).abs() <= 1e-12 {
        return Ok(overlap().clamp(0.0, 1.0));
    }
    let s = psd_sqrt(a);
    let m = &s * b.to_dmatrix() * &s;
    let root: f64 = m
        .symmetric_eigenvalues()
        .iter()
        .map(|l| l.max(0.0).sqrt())
        .sum();
    Ok((root * root).clamp(0.0, 1.0))
}

/// `||a - b||_1 / 2`.
pub fn trace_distance(a: &DensityMatrix, b: &DensityMatrix) -> Result<f64> {
    same_dim(a, b)?;
    let diff: Vec<C64> = a.entries().iter().zip(b.entries()).map(|(x, y)| x - y).collect();
    Ok((0.5 * trace_norm(a.dim, &diff)).clamp(0.0, 1.0))
}

/// Optimal success probability for telling `a` (prior `prior_a`) from `b`:
/// `1/2 + ||prior_a a - (1 - prior_a) b||_1 / 2`.
pub fn helstrom_success(prior_a: f64, a: &DensityMatrix, b: &DensityMatrix) -> Result<f64> {
    same_dim(a, b)?;
    let diff: Vec<C64> = a
        .entries()
        .iter()
        .zip(b.entries())
        .map(|(x, y)| x * prior_a - y * (1.0 - prior_a))
        .collect();
    Ok(0.5 + 0.5 * trace_norm(a.dim, &diff))
}
