//! K-complexity, K-entropy, the relaxation function φ₀(z) as a continued
//! fraction, and finite-chain spectral densities.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::closed_forms::ModeDecomposition;
use crate::evolve::WaveState;
use crate::sequence::LanczosSequence;
use crate::summation::NeumaierSum;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ObservableError {
    #[error("continued fraction not converged: depth {depth} gave {coarse}, depth {fine} gave {refined}")]
    NoConvergence { depth: usize, coarse: Complex64, fine: usize, refined: Complex64 },
    #[error("z = {0} lies on the spectrum; need Re z > 0 or Im z ≠ 0")]
    OnSpectrum(Complex64),
    #[error("depth must be at least 1")]
    ZeroDepth,
    #[error("sample {index} at t = {t} does not come after t = {previous}")]
    Ordering { index: usize, t: f64, previous: f64 },
    #[error("broadening width must be positive, got {0}")]
    Width(f64),
}

/// C_K = Σ n φₙ².
pub fn complexity_of(amplitudes: &[f64]) -> f64 {
    amplitudes.iter().enumerate().map(|(n, a)| n as f64 * a * a).collect::<NeumaierSum>().value()
}

/// S_K = −Σ φₙ² ln φₙ², with 0·ln 0 = 0.
pub fn entropy_of(amplitudes: &[f64]) -> f64 {
    let s = amplitudes
        .iter()
        .map(|a| a * a)
        .filter(|&p| p > 1e-300)
        .map(|p| -p * p.ln())
        .collect::<NeumaierSum>()
        .value();
    s.max(0.0)
}

pub fn complexity(state: &WaveState) -> f64 {
    complexity_of(&state.amplitudes)
}

pub fn entropy(state: &WaveState) -> f64 {
    entropy_of(&state.amplitudes)
}

const CF_TOL: f64 = 1e-10;

/// φ₀(z) truncated at `depth` levels. Finite chains terminate exactly at
/// their last coefficient; otherwise the remainder is replaced by the
/// constant-chain fixed point for b = √(b_d b_{d+1}).
pub fn continued_fraction(seq: &LanczosSequence, z: Complex64, depth: usize) -> Complex64 {
    // r holds the level-n remainder 1/(z + b_{n+1}² r_{n+1})
    let (levels, mut r) = match seq.support() {
        Some(k) if k <= depth => (k, 1.0 / z),
        _ => {
            let b2 = seq.bn_or_zero(depth) * seq.bn_or_zero(depth + 1);
            (depth, tail_seed(z, b2))
        }
    };
    for n in (1..=levels).rev() {
        let b = seq.bn_or_zero(n);
        r = 1.0 / (z + b * b * r);
    }
    r
}

/// Root of b²T² + zT − 1 = 0 that behaves as 1/z for large |z|.
fn tail_seed(z: Complex64, b2: f64) -> Complex64 {
    if b2 == 0.0 {
        return 1.0 / z;
    }
    let s = (z * z + 4.0 * b2).sqrt();
    let (p, m) = (z + s, z - s);
    if p.norm() >= m.norm() {
        2.0 / p
    } else {
        2.0 / m
    }
}

/// φ₀(z) compared at `depth` and 2·`depth`.
pub fn relaxation_phi0(seq: &LanczosSequence, z: Complex64, depth: usize) -> Result<Complex64, ObservableError> {
    check_z(z)?;
    if depth == 0 {
        return Err(ObservableError::ZeroDepth);
    }
    let coarse = continued_fraction(seq, z, depth);
    if seq.support().is_some_and(|k| k <= depth) {
        return Ok(coarse);
    }
    let refined = continued_fraction(seq, z, 2 * depth);
    if agree(coarse, refined, CF_TOL) {
        Ok(refined)
    } else {
        Err(ObservableError::NoConvergence { depth, coarse, fine: 2 * depth, refined })
    }
}

/// Converged φ₀(z) with the depth doubling history.
#[derive(Debug, Clone, PartialEq)]
pub struct Relaxation {
    pub value: Complex64,
    pub depth: usize,
    pub history: Vec<(usize, Complex64)>,
}

/// Doubles the depth from `depth` until two successive values agree to
/// `tol` relative, up to `max_depth`.
pub fn relaxation_phi0_adaptive(
    seq: &LanczosSequence,
    z: Complex64,
    depth: usize,
    max_depth: usize,
    tol: f64,
) -> Result<Relaxation, ObservableError> {
    check_z(z)?;
    if depth == 0 {
        return Err(ObservableError::ZeroDepth);
    }
    let mut d = depth;
    let mut prev = continued_fraction(seq, z, d);
    let mut history = vec![(d, prev)];
    if seq.support().is_some_and(|k| k <= d) {
        return Ok(Relaxation { value: prev, depth: d, history });
    }
    loop {
        let next_d = 2 * d;
        let next = continued_fraction(seq, z, next_d);
        history.push((next_d, next));
        if agree(prev, next, tol) {
            return Ok(Relaxation { value: next, depth: next_d, history });
        }
        if next_d * 2 > max_depth {
            return Err(ObservableError::NoConvergence { depth: d, coarse: prev, fine: next_d, refined: next });
        }
        d = next_d;
        prev = next;
    }
}

fn agree(a: Complex64, b: Complex64, tol: f64) -> bool {
    (a - b).norm() <= tol * b.norm().max(f64::MIN_POSITIVE)
}

fn check_z(z: Complex64) -> Result<(), ObservableError> {
    if z.re > 0.0 || z.im != 0.0 {
        Ok(())
    } else {
        Err(ObservableError::OnSpectrum(z))
    }
}

/// A δ-peak of the spectral density: weight·δ(ω − omega).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Impulse {
    pub omega: f64,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiniteSpectrum {
    /// Sorted by frequency.
    pub impulses: Vec<Impulse>,
    /// (ω, Lorentzian-broadened Φ(ω)) on the requested grid, for display.
    pub broadened: Vec<(f64, f64)>,
}

/// Φ(ω) of a finite chain as impulses: πa_ℓ at ±ω_ℓ and 2πa₀ at 0, so
/// that ∫Φ dω/2π = 1. Optionally broadened onto `omegas`.
pub fn spectral_density_finite(
    modes: &ModeDecomposition,
    omegas: &[f64],
    width: f64,
) -> Result<FiniteSpectrum, ObservableError> {
    if !(width > 0.0) {
        return Err(ObservableError::Width(width));
    }
    let mut impulses = Vec::with_capacity(2 * modes.modes.len() + 1);
    for m in modes.modes.iter().rev() {
        impulses.push(Impulse { omega: -m.omega, weight: PI * m.weight });
    }
    if modes.zero_mode_weight > 0.0 {
        impulses.push(Impulse { omega: 0.0, weight: 2.0 * PI * modes.zero_mode_weight });
    }
    for m in &modes.modes {
        impulses.push(Impulse { omega: m.omega, weight: PI * m.weight });
    }
    let broadened = omegas
        .iter()
        .map(|&w| {
            let v: f64 = impulses
                .iter()
                .map(|i| i.weight * width / PI / ((w - i.omega).powi(2) + width * width))
                .sum();
            (w, v)
        })
        .collect();
    Ok(FiniteSpectrum { impulses, broadened })
}

/// Sampled observables along a trajectory.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ObservableSeries {
    pub times: Vec<f64>,
    pub c_k: Vec<f64>,
    pub s_k: Vec<f64>,
    pub phi0: Vec<f64>,
    pub norm_error: Vec<f64>,
    pub active_size: Vec<usize>,
}

impl ObservableSeries {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Appends the observables of `state`; rejects out-of-order times.
    pub fn push_state(&mut self, state: &WaveState) -> Result<(), ObservableError> {
        self.push(
            state.t,
            complexity(state),
            entropy(state),
            state.amplitudes[0],
            state.norm_error,
            state.active_size(),
        )
    }

    pub fn push(
        &mut self,
        t: f64,
        c_k: f64,
        s_k: f64,
        phi0: f64,
        norm_error: f64,
        active_size: usize,
    ) -> Result<(), ObservableError> {
        if let Some(&prev) = self.times.last() {
            if !(t > prev) {
                return Err(ObservableError::Ordering { index: self.times.len(), t, previous: prev });
            }
        }
        self.times.push(t);
        self.c_k.push(c_k);
        self.s_k.push(s_k);
        self.phi0.push(phi0);
        self.norm_error.push(norm_error);
        self.active_size.push(active_size);
        Ok(())
    }
}

pub fn series_from_trajectory(states: &[WaveState]) -> Result<ObservableSeries, ObservableError> {
    let mut series = ObservableSeries::default();
    for s in states {
        series.push_state(s)?;
    }
    Ok(series)
}
