//! Exact reference solutions: analytic wave functions of the solvable
//! chains, finite-chain mode decompositions, the model spectral density
//! family and the leading long-time asymptotics of each growth class.

use std::f64::consts::PI;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::One;
use serde::Serialize;
use thiserror::Error;

use crate::moments::{moments_to_lanczos, MomentError, MomentSequence};
use crate::sequence::{extrapolate_linear_tail, LanczosError, LanczosSequence};
use crate::special::{bessel_j_orders, ln_binomial, ln_gamma};
use crate::tridiag::{site_zero_spectrum, TridiagError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ClosedFormError {
    #[error("site {n} is outside the chain (last site {last})")]
    OutsideSupport { n: usize, last: usize },
    #[error("an explicit chain needs at least one coefficient")]
    EmptyChain,
    #[error("no closed form or reference asymptotics for family `{0}`")]
    UnsupportedFamily(&'static str),
    #[error(transparent)]
    Eigen(#[from] TridiagError),
    #[error(transparent)]
    Moments(#[from] MomentError),
    #[error(transparent)]
    Sequence(#[from] LanczosError),
}

// ═══════════════════════════════════════════════════════════════════
//  Solvable semi-infinite and SU(2) chains
// ═══════════════════════════════════════════════════════════════════

/// ln cosh(x) without overflow.
fn ln_cosh(x: f64) -> f64 {
    let a = x.abs();
    a + (-2.0 * a).exp().ln_1p() - std::f64::consts::LN_2
}

/// φₙ(t) for bₙ = α√(n(n−1+η)):
/// √(Γ(n+η)/(n!Γ(η))) tanhⁿ(αt) / coshᵑ(αt).
pub fn syk_wavefunction(alpha: f64, eta: f64, n: usize, t: f64) -> f64 {
    let x = alpha * t;
    if n == 0 {
        return (-eta * ln_cosh(x)).exp();
    }
    let th = x.tanh();
    if th == 0.0 {
        return 0.0;
    }
    let ln_amp = 0.5 * (ln_gamma(n as f64 + eta) - ln_gamma(n as f64 + 1.0) - ln_gamma(eta))
        + n as f64 * th.abs().ln()
        - eta * ln_cosh(x);
    let sign = if th < 0.0 && n % 2 == 1 { -1.0 } else { 1.0 };
    sign * ln_amp.exp()
}

/// φₙ(t) for bₙ = α√n: the Glauber coherent state e^{−α²t²/2}(αt)ⁿ/√(n!).
pub fn coherent_wavefunction(alpha: f64, n: usize, t: f64) -> f64 {
    let x = alpha * t;
    if n == 0 {
        return (-0.5 * x * x).exp();
    }
    if x == 0.0 {
        return 0.0;
    }
    let ln_amp = -0.5 * x * x + n as f64 * x.abs().ln() - 0.5 * ln_gamma(n as f64 + 1.0);
    let sign = if x < 0.0 && n % 2 == 1 { -1.0 } else { 1.0 };
    sign * ln_amp.exp()
}

/// φₙ(t) for bₙ = α√(n(2j−n+1)): √C(2j, n) sinⁿ(αt) cos^{2j−n}(αt).
pub fn su2_wavefunction(alpha: f64, two_j: u32, n: usize, t: f64) -> Result<f64, ClosedFormError> {
    let m = two_j as usize;
    if n > m {
        return Err(ClosedFormError::OutsideSupport { n, last: m });
    }
    let (s, c) = (alpha * t).sin_cos();
    let binom = ln_binomial(m as u64, n as u64).exp().sqrt();
    Ok(binom * s.powi(n as i32) * c.powi((m - n) as i32))
}

/// Exact (C_K, S_K) of the η = 1 SYK-like chain:
/// C_K = sinh²(αt), S_K = cosh² ln cosh² − sinh² ln sinh².
pub fn syk_eta1_observables(alpha: f64, t: f64) -> (f64, f64) {
    let x = alpha * t;
    let sh2 = x.sinh().powi(2);
    if sh2 == 0.0 {
        return (0.0, 0.0);
    }
    // (1+c)ln(1+c) − c ln c rearranged to avoid cancellation at large c
    (sh2, 2.0 * ln_cosh(x) + sh2 * (1.0 / sh2).ln_1p())
}

/// The two constant-coefficient chains solved by Bessel functions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BesselVariant {
    /// bₙ = ω₀/2: φₙ = Jₙ(ω₀t) + Jₙ₊₂(ω₀t).
    A,
    /// b₁ = ω₀/√2, bₙ = ω₀/2 (n ≥ 2): φ₀ = J₀(ω₀t), φₙ = √2 Jₙ(ω₀t).
    B,
}

impl BesselVariant {
    pub fn sequence(&self, omega0: f64) -> LanczosSequence {
        match self {
            BesselVariant::A => LanczosSequence::Constant { b: omega0 / 2.0 },
            BesselVariant::B => LanczosSequence::ConstantWithFirst {
                b1: omega0 / 2f64.sqrt(),
                b: omega0 / 2.0,
            },
        }
    }
}

pub fn bessel_chain_wavefunction(variant: BesselVariant, omega0: f64, n: usize, t: f64) -> f64 {
    bessel_chain_amplitudes(variant, omega0, n + 1, t)[n]
}

/// φ₀, ..., φ_{len−1} of a Bessel chain.
pub fn bessel_chain_amplitudes(variant: BesselVariant, omega0: f64, len: usize, t: f64) -> Vec<f64> {
    let x = omega0 * t;
    let j = bessel_j_orders(len as u32 + 1, x);
    (0..len)
        .map(|n| match variant {
            BesselVariant::A => j[n] + j[n + 2],
            BesselVariant::B if n == 0 => j[0],
            BesselVariant::B => std::f64::consts::SQRT_2 * j[n],
        })
        .collect()
}

/// Probability mass below which the tail of an analytic profile is cut.
const TAIL_CUT: f64 = 1e-20;

/// Full amplitude vector φ₀, φ₁, ... at time t for every family with an
/// analytic solution, cut where the remaining tail mass is negligible.
/// Returns `None` for families without one.
pub fn closed_form_amplitudes(seq: &LanczosSequence, t: f64) -> Option<Vec<f64>> {
    match *seq {
        LanczosSequence::SykLike { alpha, eta } => {
            // negative-binomial occupation with mean η sinh²(αt)
            let mean = eta * (alpha * t).sinh().powi(2);
            Some(collect_until_tail(mean, |n| syk_wavefunction(alpha, eta, n, t)))
        }
        LanczosSequence::SqrtGrowth { alpha } => {
            let mean = (alpha * t).powi(2);
            Some(collect_until_tail(mean, |n| coherent_wavefunction(alpha, n, t)))
        }
        LanczosSequence::Su2 { alpha, two_j } => Some(
            (0..=two_j as usize)
                .map(|n| su2_wavefunction(alpha, two_j, n, t).expect("n within support"))
                .collect(),
        ),
        LanczosSequence::Constant { b } => Some(bessel_profile(BesselVariant::A, 2.0 * b, t)),
        LanczosSequence::ConstantWithFirst { b1, b }
            if (b1 - std::f64::consts::SQRT_2 * b).abs() <= 1e-15 * b1 =>
        {
            Some(bessel_profile(BesselVariant::B, 2.0 * b, t))
        }
        LanczosSequence::Explicit { ref coefficients } if coefficients.len() == 1 => {
            let (s, c) = (coefficients[0] * t).sin_cos();
            Some(vec![c, s])
        }
        _ => None,
    }
}

fn bessel_profile(variant: BesselVariant, omega0: f64, t: f64) -> Vec<f64> {
    let x = (omega0 * t).abs();
    // J_n(x) is negligible once n exceeds x by a few multiples of x^{1/3}
    let len = (x + 40.0 + 15.0 * x.cbrt()).ceil() as usize;
    bessel_chain_amplitudes(variant, omega0, len, t)
}

fn collect_until_tail(mean: f64, amp: impl Fn(usize) -> f64) -> Vec<f64> {
    let mut out = Vec::new();
    let mut n = 0usize;
    loop {
        let a = amp(n);
        out.push(a);
        // geometric-or-faster decay past the mean: stop once a run of
        // sites carries no mass
        if n as f64 > 2.0 * mean + 10.0 && a * a < TAIL_CUT * 1e-3 {
            let last: f64 = out.iter().rev().take(8).map(|v| v * v).sum();
            if last * (mean + 1.0) < TAIL_CUT {
                break;
            }
        }
        n += 1;
    }
    out
}

/// Exact (C_K, S_K) from an analytic amplitude vector.
pub fn closed_form_observables(seq: &LanczosSequence, t: f64) -> Option<(f64, f64)> {
    if let LanczosSequence::SykLike { alpha, eta } = *seq {
        if eta == 1.0 {
            return Some(syk_eta1_observables(alpha, t));
        }
    }
    let amps = closed_form_amplitudes(seq, t)?;
    Some((
        crate::observables::complexity_of(&amps),
        crate::observables::entropy_of(&amps),
    ))
}

// ═══════════════════════════════════════════════════════════════════
//  Finite chains
// ═══════════════════════════════════════════════════════════════════

/// One ± frequency pair of a finite chain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Mode {
    pub omega: f64,
    pub weight: f64,
}

/// How well the eigen-decomposition met its structural expectations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ModeDiagnostics {
    /// max |λᵢ + λ_{n−1−i}| over the ± pairs
    pub pairing_asymmetry: f64,
    /// |1 − a₀ − Σ a_ℓ|
    pub weight_defect: f64,
    /// |λ| of the eigenvalue identified as the zero mode, when present
    pub zero_mode_residual: Option<f64>,
}

/// φ₀(t) = a₀ + Σ a_ℓ cos(ω_ℓ t) for a chain that stops after K sites.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModeDecomposition {
    pub zero_mode_weight: f64,
    pub modes: Vec<Mode>,
    pub diagnostics: ModeDiagnostics,
}

impl ModeDecomposition {
    /// Reconstructed auto-correlation φ₀(t).
    pub fn phi0(&self, t: f64) -> f64 {
        self.zero_mode_weight + self.modes.iter().map(|m| m.weight * (m.omega * t).cos()).sum::<f64>()
    }
}

/// Diagonalizes the (K+1)×(K+1) tridiagonal Liouvillian and folds its ±ω
/// eigenvalue pairs into cosine modes with weights a_ℓ.
pub fn finite_chain_modes(b: &[f64]) -> Result<ModeDecomposition, ClosedFormError> {
    if b.is_empty() {
        return Err(ClosedFormError::EmptyChain);
    }
    let n = b.len() + 1;
    let spectrum = site_zero_spectrum(&vec![0.0; n], b)?;
    let norm = b.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let lam = &spectrum.eigenvalues;
    let w = &spectrum.weights;

    let mut modes = Vec::with_capacity(n / 2);
    let mut asym = 0.0f64;
    for i in (0..n / 2).rev() {
        let (lo, hi) = (i, n - 1 - i);
        asym = asym.max((lam[lo] + lam[hi]).abs());
        modes.push(Mode { omega: 0.5 * (lam[hi] - lam[lo]), weight: w[lo] + w[hi] });
    }
    let (zero_mode_weight, zero_mode_residual) = if n % 2 == 1 {
        let mid = n / 2;
        debug_assert!(lam[mid].abs() <= 1e-9 * norm.max(1.0));
        (w[mid], Some(lam[mid].abs()))
    } else {
        (0.0, None)
    };
    let total = zero_mode_weight + modes.iter().map(|m| m.weight).sum::<f64>();
    Ok(ModeDecomposition {
        zero_mode_weight,
        modes,
        diagnostics: ModeDiagnostics {
            pairing_asymmetry: asym,
            weight_defect: (1.0 - total).abs(),
            zero_mode_residual,
        },
    })
}

// ═══════════════════════════════════════════════════════════════════
//  Model spectral density Φ(ω) ∝ |ω/ω₀|^ν e^{−|ω/ω₀|}
// ═══════════════════════════════════════════════════════════════════

/// Spectral density with power-law onset ν and exponential cutoff ω₀.
/// Its Lanczos coefficients grow asymptotically as α n with ω₀ = 2α/π.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralModel {
    pub nu: f64,
    pub omega0: f64,
}

impl SpectralModel {
    pub fn from_alpha(nu: f64, alpha: f64) -> Self {
        Self { nu, omega0: 2.0 * alpha / PI }
    }

    /// μ₂ₙ = ω₀²ⁿ Γ(1+ν+2n)/Γ(1+ν), through log-gamma.
    pub fn moment(&self, n: usize) -> f64 {
        if n == 0 {
            return 1.0;
        }
        let ln = 2.0 * n as f64 * self.omega0.ln() + ln_gamma(1.0 + self.nu + 2.0 * n as f64)
            - ln_gamma(1.0 + self.nu);
        ln.exp()
    }

    /// Exact μ₂ₖ/ω₀²ᵏ = (2k+ν)!/ν! for integer ν, k = 0..=count.
    pub fn exact_reduced_moments(nu: u32, count: usize) -> MomentSequence {
        let mut values = Vec::with_capacity(count + 1);
        let mut acc = BigInt::one();
        values.push(BigRational::one());
        let mut top = nu as u64; // acc = (top)!/ν!
        for _ in 1..=count {
            for f in [top + 1, top + 2] {
                acc *= f;
            }
            top += 2;
            values.push(BigRational::from_integer(acc.clone()));
        }
        MomentSequence::exact(values).expect("μ₀ = 1 by construction")
    }

    /// C(t) = ½(1−iω₀t)^{−(1+ν)} + c.c. = Re (1−iω₀t)^{−(1+ν)}.
    pub fn autocorrelation(&self, t: f64) -> f64 {
        let u = self.omega0 * t;
        let p = 1.0 + self.nu;
        (1.0 + u * u).powf(-0.5 * p) * (p * u.atan()).cos()
    }

    /// Φ(ω) = π/(ω₀Γ(ν+1)) |ω/ω₀|^ν exp(−|ω/ω₀|).
    pub fn density(&self, omega: f64) -> f64 {
        let x = (omega / self.omega0).abs();
        let pow = if self.nu == 0.0 { 1.0 } else { x.powf(self.nu) };
        PI / (self.omega0 * ln_gamma(self.nu + 1.0).exp()) * pow * (-x).exp()
    }
}

/// Lanczos sequence of the model spectral density for integer ν: the first
/// `exact_count` coefficients come from an exact-rational moment inversion,
/// the rest from parity-resolved linear fits to the last `tail_window`
/// coefficients of each parity.
pub fn spectral_model_sequence(
    nu: u32,
    alpha: f64,
    exact_count: usize,
    tail_window: usize,
) -> Result<LanczosSequence, ClosedFormError> {
    let model = SpectralModel::from_alpha(nu as f64, alpha);
    let reduced = SpectralModel::exact_reduced_moments(nu, exact_count);
    let squares = moments_to_lanczos(&reduced, exact_count)?;
    let head: Vec<f64> = squares.coefficients_f64().into_iter().map(|b| b * model.omega0).collect();
    Ok(extrapolate_linear_tail(head, tail_window)?)
}

// ═══════════════════════════════════════════════════════════════════
//  Leading long-time asymptotics per growth class
// ═══════════════════════════════════════════════════════════════════

/// Leading long-time (C_K, S_K) of the growth class `seq` belongs to.
/// Overall constants are not determined; the pair is a reference shape.
pub fn table1_reference(seq: &LanczosSequence, t: f64) -> Result<(f64, f64), ClosedFormError> {
    use LanczosSequence::*;
    match *seq {
        Linear { alpha, .. } | SykLike { alpha, .. } => {
            let x = 2.0 * alpha * t;
            Ok((x.exp(), x))
        }
        LogCorrectedLinear { alpha, sigma, .. } => {
            let x = (2.0 * alpha * (1.0 + sigma) * t).powf(1.0 / (1.0 + sigma));
            Ok((x.exp(), x))
        }
        PowerLaw { alpha, delta } => {
            let x = 2.0 * alpha * t;
            Ok((x.powf(1.0 / (1.0 - delta)), x.ln()))
        }
        SqrtGrowth { alpha } => {
            let x = 2.0 * alpha * t;
            Ok((x * x, x.ln()))
        }
        PowerLog { alpha, delta, sign } => {
            let x = 2.0 * alpha * t;
            let gamma = 1.0 / (1.0 - delta);
            let s = match sign {
                crate::sequence::LogSign::Plus => 1.0,
                crate::sequence::LogSign::Minus => -1.0,
            };
            Ok((x.powf(gamma) * x.ln().powf(s * gamma), x.ln()))
        }
        LogGrowth { alpha, .. } => {
            let x = 2.0 * alpha * t;
            Ok((x * x.ln(), x.ln()))
        }
        Constant { b } | ConstantWithFirst { b, .. } => {
            let x = 2.0 * b * t;
            Ok((x, x.ln()))
        }
        _ => Err(ClosedFormError::UnsupportedFamily(seq.family_name())),
    }
}
