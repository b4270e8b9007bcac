//! The ergodicity indicator W = φ₀(0).

use num_complex::Complex64;
use serde::Serialize;
use thiserror::Error;

use crate::observables::relaxation_phi0_adaptive;
use crate::sequence::{LanczosError, LanczosSequence};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum WError {
    #[error("depth must be at least 2, got {0}")]
    Depth(usize),
    #[error(transparent)]
    Sequence(#[from] LanczosError),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "verdict", content = "value", rename_all = "snake_case")]
pub enum WVerdict {
    Zero,
    Infinite,
    /// W > 0 in inverse-energy units.
    Finite(f64),
    /// Why no verdict was reached.
    Undetermined(String),
}

/// One evaluation of φ₀ on the approach to z = 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WProbe {
    pub z: f64,
    pub phi0: f64,
    pub depth: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WDiagnostics {
    /// Π_{k≤m} b_{2k}²/b_{2k−1}² for m = 1, 2, ...
    pub partial_products: Vec<f64>,
    pub probes: Vec<WProbe>,
    /// d ln φ₀ / d ln z between the two smallest probes.
    pub log_slope: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WClassification {
    pub verdict: WVerdict,
    pub diagnostics: WDiagnostics,
}

const PROBES: [f64; 3] = [1e-2, 1e-3, 1e-4];
const START_DEPTH: usize = 64;
const PRODUCT_TERMS: usize = 32;

fn partial_products(seq: &LanczosSequence, terms: usize) -> Vec<f64> {
    let mut acc = 1.0;
    (1..=terms)
        .map(|k| {
            let odd = seq.bn_or_zero(2 * k - 1);
            let even = seq.bn_or_zero(2 * k);
            acc *= (even / odd).powi(2);
            acc
        })
        .take_while(|v| v.is_finite())
        .collect()
}

/// Classifies W for `seq`, continuing the fraction to at most `depth`
/// levels and declaring convergence at relative agreement `tol`.
///
/// Finite chains are classified by the parity of their length: an odd
/// number of coefficients gives Zero, an even number Infinite. Otherwise
/// φ₀(z) is evaluated at z = (10⁻², 10⁻³, 10⁻⁴)·b₁; a log-slope near −1
/// means Infinite, near +1 Zero, and anything else is extrapolated to
/// z = 0 by the quadratic through the three probes.
pub fn w_number(seq: &LanczosSequence, depth: usize, tol: f64) -> Result<WClassification, WError> {
    if depth < 2 {
        return Err(WError::Depth(depth));
    }
    seq.validate()?;
    let mut diagnostics = WDiagnostics {
        partial_products: partial_products(seq, PRODUCT_TERMS.min(depth / 2).max(1)),
        probes: Vec::new(),
        log_slope: None,
    };
    if let Some(k) = seq.support() {
        let verdict = if k % 2 == 1 { WVerdict::Zero } else { WVerdict::Infinite };
        return Ok(WClassification { verdict, diagnostics });
    }

    let b1 = seq.bn_or_zero(1);
    for scale in PROBES {
        let z = scale * b1;
        match relaxation_phi0_adaptive(seq, Complex64::new(z, 0.0), START_DEPTH.min(depth), depth, tol) {
            Ok(r) => diagnostics.probes.push(WProbe { z, phi0: r.value.re, depth: r.depth }),
            Err(e) => {
                return Ok(WClassification {
                    verdict: WVerdict::Undetermined(format!("φ₀({z:e}): {e}")),
                    diagnostics,
                })
            }
        }
    }
    let p = &diagnostics.probes;
    let slope = (p[2].phi0 / p[1].phi0).ln() / (p[2].z / p[1].z).ln();
    diagnostics.log_slope = Some(slope);
    let verdict = if slope < -0.5 {
        WVerdict::Infinite
    } else if slope > 0.5 {
        WVerdict::Zero
    } else {
        let w = neville_at_zero(p);
        if w.is_finite() && w > 0.0 {
            WVerdict::Finite(w)
        } else {
            WVerdict::Undetermined(format!("extrapolated φ₀(0) = {w} is not positive"))
        }
    };
    Ok(WClassification { verdict, diagnostics })
}

/// Value at z = 0 of the quadratic through the probes.
fn neville_at_zero(p: &[WProbe]) -> f64 {
    let mut v: Vec<f64> = p.iter().map(|q| q.phi0).collect();
    let x: Vec<f64> = p.iter().map(|q| q.z).collect();
    let n = v.len();
    for m in 1..n {
        for i in 0..n - m {
            v[i] = (x[i + m] * v[i] - x[i] * v[i + 1]) / (x[i + m] - x[i]);
        }
    }
    v[0]
}
