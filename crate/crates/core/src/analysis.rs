//! Closed forms, the grid-search oracle for the forging game, the noisy-pair
//! entropic bounds, Monte Carlo statistics and the figure/table generators.

use crate::adversary::{adversary_view_states, check_delta, optimal_bloch_components, AdversaryError, StrategyParams};
use crate::quantum::helstrom_success;
use rayon::prelude::*;
use serde::Serialize;
use std::f64::consts::PI;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("bias {0} outside [0, 1/2]")]
    DeltaOutOfRange(f64),
    #[error("grid resolution {0} is coarser than 0.01 or not positive")]
    ResolutionTooCoarse(f64),
    #[error("probability {0} outside [0, 1]")]
    ProbabilityOutOfRange(f64),
    #[error("epsilon {0} > 1/4: the bound is inapplicable (h2 argument exceeds 1)")]
    BoundInapplicable(f64),
    #[error("epsilon {0} is negative")]
    NegativeEpsilon(f64),
    #[error("invalid count: {0}")]
    InvalidCount(String),
    #[error(transparent)]
    Adversary(#[from] AdversaryError),
}

impl From<crate::quantum::QuantumError> for AnalysisError {
    fn from(e: crate::quantum::QuantumError) -> Self {
        AnalysisError::Adversary(AdversaryError::Quantum(e))
    }
}

fn delta_ok(delta: f64) -> Result<(), AnalysisError> {
    check_delta(delta).map_err(|_| AnalysisError::DeltaOutOfRange(delta))
}

/// `1/2 + delta sqrt((1 + 4 delta^2) / 2)`.
pub fn pr_win_closed_form(delta: f64) -> Result<f64, AnalysisError> {
    delta_ok(delta)?;
    Ok(0.5 + delta * ((1.0 + 4.0 * delta * delta) / 2.0).sqrt())
}

/// Exact winning probability of an arbitrary strategy in the two-coin game.
pub fn pr_win_objective(delta: f64, s: &StrategyParams) -> f64 {
    let p0 = 0.5 + delta;
    let p1 = 0.5 - delta;
    let q0 = s.q0;
    0.5 * (p0 * p0 * (1.0 - s.rpz + q0 * (s.rz + s.rpz))
        + p0 * p1 * (2.0 + (s.rpz - s.rpx) + q0 * (s.rpx - s.rpz + s.rx - s.rz))
        + p1 * p1 * (1.0 + s.rpx - q0 * (s.rx + s.rpx)))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct OptimizationResult {
    pub best_params: StrategyParams,
    pub best_value: f64,
    pub grid_resolution: f64,
    pub evaluations: u64,
}

/// `q0` values in enumeration order; earlier entries win ties.
pub const Q0_GRID: [f64; 5] = [1.0, 0.0, 0.25, 0.5, 0.75];

/// Points of the unit disk on a polar grid: the origin, then every radius
/// step at every angle step. The angle count is even so the grid is closed
/// under `r -> -r`, the map between a strategy and its mirror with the
/// announced bit flipped; otherwise the mirror can win by discretisation alone.
pub fn polar_disk_grid(resolution: f64) -> Vec<(f64, f64)> {
    let radii = (1.0 / resolution - 1e-9).ceil() as usize;
    let angles = 2 * (PI / resolution).ceil() as usize;
    let mut pts = Vec::with_capacity(1 + radii * angles);
    pts.push((0.0, 0.0));
    for i in 1..=radii {
        let r = (i as f64 * resolution).min(1.0);
        for j in 0..angles {
            let theta = 2.0 * PI * j as f64 / angles as f64;
            pts.push((r * theta.cos(), r * theta.sin()));
        }
    }
    pts
}

/// Index of the maximum of `f` over `pts`; lowest index wins ties. Chunks
/// are reduced in index order so the result does not depend on scheduling.
fn argmax(pts: &[(f64, f64)], f: impl Fn(f64, f64) -> f64 + Sync) -> (usize, f64) {
    const CHUNK: usize = 4096;
    pts.par_chunks(CHUNK)
        .enumerate()
        .map(|(c, chunk)| {
            let mut best = (c * CHUNK, f64::NEG_INFINITY);
            for (i, &(x, z)) in chunk.iter().enumerate() {
                let v = f(x, z);
                if v > best.1 {
                    best = (c * CHUNK + i, v);
                }
            }
            best
        })
        .collect::<Vec<_>>()
        .into_iter()
        .fold((0, f64::NEG_INFINITY), |acc, b| if b.1 > acc.1 { b } else { acc })
}

/// Exhaustive grid maximisation of [`pr_win_objective`]. For fixed `q0` the
/// objective splits into a term in `(rx, rz)` and a term in `(r'x, r'z)`, so
/// maximising each disk separately visits the same argmax as the joint grid.
pub fn optimize_grid(delta: f64, resolution: f64) -> Result<OptimizationResult, AnalysisError> {
    delta_ok(delta)?;
    if !(resolution > 0.0 && resolution <= 0.01) {
        return Err(AnalysisError::ResolutionTooCoarse(resolution));
    }
    Ok(separable_search(delta, resolution))
}

pub(crate) fn separable_search(delta: f64, resolution: f64) -> OptimizationResult {
    let pts = polar_disk_grid(resolution);
    let mut best: Option<(StrategyParams, f64)> = None;
    let mut evaluations = 0u64;
    for q0 in Q0_GRID {
        let (i, _) = argmax(&pts, |x, z| {
            pr_win_objective(delta, &StrategyParams { rx: x, rz: z, rpx: 0.0, rpz: 0.0, q0 })
        });
        let (rx, rz) = pts[i];
        let (j, value) = argmax(&pts, |x, z| pr_win_objective(delta, &StrategyParams { rx, rz, rpx: x, rpz: z, q0 }));
        evaluations += 2 * pts.len() as u64;
        let params = StrategyParams {
            rx,
            rz,
            rpx: pts[j].0,
            rpz: pts[j].1,
            q0,
        };
        if best.is_none_or(|(_, v)| value > v + 1e-12) {
            best = Some((params, value));
        }
    }
    let (best_params, best_value) = best.expect("q0 grid is non-empty");
    OptimizationResult {
        best_params,
        best_value,
        grid_resolution: resolution,
        evaluations,
    }
}

/// Joint brute force over both disks; only for cross-checking the separable
/// search at coarse resolutions.
#[cfg(test)]
pub(crate) fn joint_search(delta: f64, resolution: f64) -> OptimizationResult {
    let pts = polar_disk_grid(resolution);
    let mut best: Option<(StrategyParams, f64)> = None;
    let mut evaluations = 0u64;
    for q0 in Q0_GRID {
        let mut local: Option<(StrategyParams, f64)> = None;
        for &(rx, rz) in &pts {
            for &(rpx, rpz) in &pts {
                let s = StrategyParams { rx, rz, rpx, rpz, q0 };
                let v = pr_win_objective(delta, &s);
                evaluations += 1;
                if local.is_none_or(|(_, b)| v > b) {
                    local = Some((s, v));
                }
            }
        }
        let (s, v) = local.expect("grid is non-empty");
        if best.is_none_or(|(_, b)| v > b + 1e-12) {
            best = Some((s, v));
        }
    }
    let (best_params, best_value) = best.expect("q0 grid is non-empty");
    OptimizationResult {
        best_params,
        best_value,
        grid_resolution: resolution,
        evaluations,
    }
}

/// `-p log2 p - (1 - p) log2 (1 - p)` with `0 log 0 = 0`.
pub fn binary_entropy(p: f64) -> Result<f64, AnalysisError> {
    if !(0.0..=1.0).contains(&p) {
        return Err(AnalysisError::ProbabilityOutOfRange(p));
    }
    let term = |x: f64| if x <= 0.0 { 0.0 } else { -x * x.log2() };
    Ok(term(p) + term(1.0 - p))
}

/// `2 sqrt(eps) + h2(2 sqrt(eps))`, defined for `0 <= eps <= 1/4`.
pub fn mu_epsilon(epsilon: f64) -> Result<f64, AnalysisError> {
    if epsilon < 0.0 {
        return Err(AnalysisError::NegativeEpsilon(epsilon));
    }
    if epsilon > 0.25 {
        return Err(AnalysisError::BoundInapplicable(epsilon));
    }
    let s = (2.0 * epsilon.sqrt()).min(1.0);
    Ok(s + binary_entropy(s)?)
}

/// `2^(-m (1 - mu(eps)))`, clamped to 1.
pub fn noisy_forgery_bound(m: u32, epsilon: f64) -> Result<f64, AnalysisError> {
    if m == 0 {
        return Err(AnalysisError::InvalidCount("m must be at least 1".into()));
    }
    let mu = mu_epsilon(epsilon)?;
    Ok(2f64.powf(-(m as f64) * (1.0 - mu)).clamp(0.0, 1.0))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PerRoundBound {
    pub value: f64,
    /// The unclamped expression reached or exceeded 1.
    pub vacuous: bool,
}

/// `min(1, 1/2 + mu(eps))`.
pub fn per_round_guess_bound(epsilon: f64) -> Result<PerRoundBound, AnalysisError> {
    let raw = 0.5 + mu_epsilon(epsilon)?;
    Ok(PerRoundBound {
        value: raw.min(1.0),
        vacuous: raw >= 1.0,
    })
}

/// `min(1, 2^(-(1 - mu(eps))))`.
pub fn per_round_min_entropy_bound(epsilon: f64) -> Result<PerRoundBound, AnalysisError> {
    let raw = 2f64.powf(-(1.0 - mu_epsilon(epsilon)?));
    Ok(PerRoundBound {
        value: raw.min(1.0),
        vacuous: raw >= 1.0,
    })
}

/// `1/2 + delta`.
pub fn helstrom_guess_prob(delta: f64) -> Result<f64, AnalysisError> {
    delta_ok(delta)?;
    Ok(0.5 + delta)
}

/// Helstrom success for telling `y1 = 0` from `y1 = 1` after announcement 0,
/// computed from the collapsed states with prior `prior_zero` on `y1 = 0`.
pub fn helstrom_guess_prob_from_states(delta: f64, prior_zero: f64) -> Result<f64, AnalysisError> {
    let views = adversary_view_states(delta)?;
    Ok(helstrom_success(prior_zero, &views[0], &views[2])?)
}

pub fn m_round_success(per_round: f64, m: u32) -> Result<f64, AnalysisError> {
    if !(0.0..=1.0).contains(&per_round) {
        return Err(AnalysisError::ProbabilityOutOfRange(per_round));
    }
    Ok(per_round.powi(m as i32))
}

/// Wilson score interval for `successes / trials` at normal quantile `z`.
pub fn wilson_interval(successes: u64, trials: u64, z: f64) -> Result<(f64, f64), AnalysisError> {
    if trials == 0 || successes > trials {
        return Err(AnalysisError::InvalidCount(format!("{successes} successes of {trials} trials")));
    }
    if !(z.is_finite() && z >= 0.0) {
        return Err(AnalysisError::InvalidCount(format!("z = {z}")));
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / denom;
    let half = z / denom * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    let lo = if successes == 0 { 0.0 } else { (centre - half).max(0.0) };
    let hi = if successes == trials { 1.0 } else { (centre + half).min(1.0) };
    Ok((lo.min(p), hi.max(p)))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Figure3Row {
    pub delta: f64,
    pub per_round: f64,
    pub after_m_rounds: f64,
}

pub fn figure3_curves(delta_grid: &[f64], m: u32) -> Result<Vec<Figure3Row>, AnalysisError> {
    delta_grid
        .iter()
        .map(|&delta| {
            let per_round = pr_win_closed_form(delta)?;
            Ok(Figure3Row {
                delta,
                per_round,
                after_m_rounds: m_round_success(per_round, m)?,
            })
        })
        .collect()
}

/// Evenly spaced grid over `[0, 1/2]` with `points` entries.
pub fn delta_grid(points: usize) -> Result<Vec<f64>, AnalysisError> {
    if points < 2 {
        return Err(AnalysisError::InvalidCount("a grid needs at least 2 points".into()));
    }
    Ok((0..points).map(|i| 0.5 * i as f64 / (points - 1) as f64).collect())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SecurityRow {
    pub protocol: String,
    pub rounds: u32,
    pub delta: Option<f64>,
    pub per_round_bound: Option<f64>,
    pub m_round_bound: Option<f64>,
    /// Expression quoted from the literature when the row is not recomputed.
    pub literature: Option<String>,
    pub recomputed: bool,
}

pub fn table1_rows(m: u32, delta: f64) -> Result<Vec<SecurityRow>, AnalysisError> {
    let online = pr_win_closed_form(delta)?;
    Ok(vec![
        SecurityRow {
            protocol: "QPUF (literature)".into(),
            rounds: m,
            delta: None,
            per_round_bound: None,
            m_round_bound: None,
            literature: Some("(1/2)^m".into()),
            recomputed: false,
        },
        SecurityRow {
            protocol: "HPUF (literature)".into(),
            rounds: m,
            delta: None,
            per_round_bound: None,
            m_round_bound: None,
            literature: Some("p_f^cl ((1/2+delta)(1+sqrt(2)(1/2+delta)))^(2m poly(m))".into()),
            recomputed: false,
        },
        SecurityRow {
            protocol: "offline".into(),
            rounds: m,
            delta: None,
            per_round_bound: Some(0.5),
            m_round_bound: Some(m_round_success(0.5, m)?),
            literature: None,
            recomputed: true,
        },
        SecurityRow {
            protocol: "online".into(),
            rounds: m,
            delta: Some(delta),
            per_round_bound: Some(online),
            m_round_bound: Some(m_round_success(online, m)?),
            literature: None,
            recomputed: true,
        },
    ])
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BoundsRow {
    pub epsilon: f64,
    pub mu: f64,
    pub per_round_guess_bound: f64,
    pub guess_bound_vacuous: bool,
    pub per_round_min_entropy_bound: f64,
    pub noisy_forgery_bound: f64,
}

pub fn bounds_rows(epsilons: &[f64], m: u32) -> Result<Vec<BoundsRow>, AnalysisError> {
    epsilons
        .iter()
        .map(|&epsilon| {
            let guess = per_round_guess_bound(epsilon)?;
            Ok(BoundsRow {
                epsilon,
                mu: mu_epsilon(epsilon)?,
                per_round_guess_bound: guess.value,
                guess_bound_vacuous: guess.vacuous,
                per_round_min_entropy_bound: per_round_min_entropy_bound(epsilon)?.value,
                noisy_forgery_bound: noisy_forgery_bound(m, epsilon)?,
            })
        })
        .collect()
}

/// Decimal rendering with 9 significant digits, no locale.
pub fn fmt_sig9(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return if x == 0.0 { "0".into() } else { format!("{x}") };
    }
    let exp = x.abs().log10().floor() as i32;
    if (-6..=9).contains(&exp) {
        let decimals = (8 - exp).max(0) as usize;
        format!("{x:.decimals$}")
    } else {
        format!("{x:.8e}")
    }
}

/// Analytic optimum as strategy parameters; convenience for oracle checks.
pub fn analytic_optimum(delta: f64) -> Result<(f64, f64), AnalysisError> {
    Ok(optimal_bloch_components(delta)?)
}
