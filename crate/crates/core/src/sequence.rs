//! Lanczos-coefficient sequences: closed-form model families and explicit
//! finite lists.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LanczosError {
    #[error("coefficient index must be at least 1")]
    ZeroIndex,
    #[error("index {n} exceeds the sequence support (b_n = 0 for n > {bound})")]
    SupportExceeded { n: usize, bound: usize },
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
}

/// Sign of the logarithmic factor in [`LanczosSequence::PowerLog`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LogSign {
    Plus,
    Minus,
}

/// Straight-line continuation b_n = slope·n + intercept.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinearTail {
    pub slope: f64,
    pub intercept: f64,
}

impl LinearTail {
    fn at(&self, n: usize) -> f64 {
        self.slope * n as f64 + self.intercept
    }
}

/// A generator of Lanczos coefficients b_1, b_2, ... (energy units).
///
/// The coefficients are the only input that defines a dynamics: they fix the
/// tridiagonal Liouvillian on the half chain. Time is measured in units of
/// the inverse energy scale set by `alpha` (or `b`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LanczosSequence {
    /// b_n = α n + γ (chaotic).
    Linear { alpha: f64, gamma: f64 },
    /// b_n = α √(n (n − 1 + η)), the SYK-like solvable chain.
    SykLike { alpha: f64, eta: f64 },
    /// b_n = α √n, the coherent-state chain.
    SqrtGrowth { alpha: f64 },
    /// b_n = α √(n (2j − n + 1)) for 1 ≤ n ≤ 2j; the chain ends at site 2j.
    Su2 { alpha: f64, two_j: u32 },
    /// b_n = α n^δ with 0 < δ < 1 (integrable).
    PowerLaw { alpha: f64, delta: f64 },
    /// b_n = α n^δ ln(n + 1)^{±1}.
    PowerLog { alpha: f64, delta: f64, sign: LogSign },
    /// b_n = α n / ln(n + offset)^σ.
    LogCorrectedLinear { alpha: f64, sigma: f64, offset: u32 },
    /// b_n = α ln(n + offset) + γ₀.
    LogGrowth { alpha: f64, gamma0: f64, offset: u32 },
    /// b_n = b for all n.
    Constant { b: f64 },
    /// b_1 = b1, b_n = b for n ≥ 2.
    ConstantWithFirst { b1: f64, b: f64 },
    /// Finite chain: b_1..b_K given, b_n = 0 for n > K.
    Explicit { coefficients: Vec<f64> },
    /// Tabulated head continued by a straight line. Produced from exact
    /// moment inversions whose coefficients approach α n + γ.
    Extrapolated { head: Vec<f64>, tail: LinearTail },
}

fn positive(name: &'static str, v: f64) -> Result<(), LanczosError> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(LanczosError::InvalidParameter {
            name,
            reason: format!("must be positive and finite, got {v}"),
        })
    }
}

impl LanczosSequence {
    /// Checks the family parameters and that every coefficient in the
    /// support is positive.
    pub fn validate(&self) -> Result<(), LanczosError> {
        use LanczosSequence::*;
        match self {
            Linear { alpha, gamma } => {
                positive("alpha", *alpha)?;
                if !gamma.is_finite() {
                    return Err(LanczosError::InvalidParameter {
                        name: "gamma",
                        reason: "must be finite".into(),
                    });
                }
            }
            SykLike { alpha, eta } => {
                positive("alpha", *alpha)?;
                positive("eta", *eta)?;
            }
            SqrtGrowth { alpha } => positive("alpha", *alpha)?,
            Su2 { alpha, two_j } => {
                positive("alpha", *alpha)?;
                if *two_j == 0 {
                    return Err(LanczosError::InvalidParameter {
                        name: "two_j",
                        reason: "2j must be a positive integer".into(),
                    });
                }
            }
            PowerLaw { alpha, delta } | PowerLog { alpha, delta, .. } => {
                positive("alpha", *alpha)?;
                if !(*delta > 0.0 && *delta < 1.0) {
                    return Err(LanczosError::InvalidParameter {
                        name: "delta",
                        reason: format!("must lie in (0, 1), got {delta}"),
                    });
                }
            }
            LogCorrectedLinear { alpha, sigma, offset } => {
                positive("alpha", *alpha)?;
                positive("sigma", *sigma)?;
                if *offset == 0 {
                    return Err(LanczosError::InvalidParameter {
                        name: "offset",
                        reason: "offset 0 puts ln 1 = 0 in the denominator of b_1".into(),
                    });
                }
            }
            LogGrowth { alpha, gamma0, .. } => {
                positive("alpha", *alpha)?;
                if !gamma0.is_finite() {
                    return Err(LanczosError::InvalidParameter {
                        name: "gamma0",
                        reason: "must be finite".into(),
                    });
                }
            }
            Constant { b } => positive("b", *b)?,
            ConstantWithFirst { b1, b } => {
                positive("b1", *b1)?;
                positive("b", *b)?;
            }
            Explicit { coefficients } => {
                if coefficients.is_empty() {
                    return Err(LanczosError::InvalidParameter {
                        name: "coefficients",
                        reason: "an explicit chain needs at least one coefficient".into(),
                    });
                }
                for &c in coefficients {
                    positive("coefficients", c)?;
                }
            }
            Extrapolated { head, tail } => {
                for &c in head {
                    positive("head", c)?;
                }
                if !(tail.slope >= 0.0 && tail.slope.is_finite() && tail.intercept.is_finite()) {
                    return Err(LanczosError::InvalidParameter {
                        name: "tail",
                        reason: "tail slope must be non-negative and finite".into(),
                    });
                }
                let n = head.len() + 1;
                for m in [n, n + 1] {
                    positive("tail", self.raw(m))?;
                }
            }
        }
        // The remaining families are either manifestly positive or increasing
        // in n, so b_1 > 0 settles positivity on the support.
        positive("b_1", self.raw(1))
    }

    /// Number of non-zero coefficients for finite chains.
    pub fn support(&self) -> Option<usize> {
        match self {
            LanczosSequence::Su2 { two_j, .. } => Some(*two_j as usize),
            LanczosSequence::Explicit { coefficients } => Some(coefficients.len()),
            _ => None,
        }
    }

    /// True for sequences whose chain has finitely many sites.
    pub fn is_finite(&self) -> bool {
        self.support().is_some()
    }

    /// b_n, n ≥ 1.
    pub fn eval_bn(&self, n: usize) -> Result<f64, LanczosError> {
        if n == 0 {
            return Err(LanczosError::ZeroIndex);
        }
        if let Some(bound) = self.support() {
            if n > bound {
                return Err(LanczosError::SupportExceeded { n, bound });
            }
        }
        Ok(self.raw(n))
    }

    /// b_n with the finite-chain convention b_n = 0 beyond the support and
    /// b_0 = 0.
    pub fn bn_or_zero(&self, n: usize) -> f64 {
        if n == 0 {
            return 0.0;
        }
        match self.support() {
            Some(bound) if n > bound => 0.0,
            _ => self.raw(n),
        }
    }

    /// b_1, ..., b_count (truncated at the support of finite chains).
    pub fn coefficients(&self, count: usize) -> Vec<f64> {
        let count = self.support().map_or(count, |s| s.min(count));
        (1..=count).map(|n| self.raw(n)).collect()
    }

    fn raw(&self, n: usize) -> f64 {
        use LanczosSequence::*;
        let x = n as f64;
        match self {
            Linear { alpha, gamma } => alpha * x + gamma,
            SykLike { alpha, eta } => alpha * (x * (x - 1.0 + eta)).sqrt(),
            SqrtGrowth { alpha } => alpha * x.sqrt(),
            Su2 { alpha, two_j } => alpha * (x * (*two_j as f64 - x + 1.0)).sqrt(),
            PowerLaw { alpha, delta } => alpha * x.powf(*delta),
            PowerLog { alpha, delta, sign } => {
                let l = (x + 1.0).ln();
                match sign {
                    LogSign::Plus => alpha * x.powf(*delta) * l,
                    LogSign::Minus => alpha * x.powf(*delta) / l,
                }
            }
            LogCorrectedLinear { alpha, sigma, offset } => {
                alpha * x / (x + *offset as f64).ln().powf(*sigma)
            }
            LogGrowth { alpha, gamma0, offset } => alpha * (x + *offset as f64).ln() + gamma0,
            Constant { b } => *b,
            ConstantWithFirst { b1, b } => {
                if n == 1 {
                    *b1
                } else {
                    *b
                }
            }
            Explicit { coefficients } => coefficients[n - 1],
            Extrapolated { head, tail } => {
                if n <= head.len() {
                    head[n - 1]
                } else {
                    tail.at(n)
                }
            }
        }
    }

    /// μ₂ = b₁².
    pub fn mu2(&self) -> f64 {
        let b1 = self.raw(1);
        b1 * b1
    }

    /// Short family label used in reports.
    pub fn family_name(&self) -> &'static str {
        use LanczosSequence::*;
        match self {
            Linear { .. } => "linear",
            SykLike { .. } => "syk_like",
            SqrtGrowth { .. } => "sqrt_growth",
            Su2 { .. } => "su2",
            PowerLaw { .. } => "power_law",
            PowerLog { .. } => "power_log",
            LogCorrectedLinear { .. } => "log_corrected_linear",
            LogGrowth { .. } => "log_growth",
            Constant { .. } => "constant",
            ConstantWithFirst { .. } => "constant_with_first",
            Explicit { .. } => "explicit",
            Extrapolated { .. } => "extrapolated",
        }
    }
}

/// Continues `head` along the mean of two straight lines, one fitted to
/// each parity among the last `window` coefficients.
///
/// The even/odd stagger is averaged out rather than carried into the tail:
/// a stagger that persists to arbitrarily large n acts as a dimerization
/// that reflects the wave front, while the stagger in exact moment
/// inversions decays.
pub fn extrapolate_linear_tail(head: Vec<f64>, window: usize) -> Result<LanczosSequence, LanczosError> {
    let start = head.len().saturating_sub(window.max(4));
    let fit = |parity: usize| -> Result<LinearTail, LanczosError> {
        let pts: Vec<(f64, f64)> = (start..head.len())
            .filter(|i| (i + 1) % 2 == parity)
            .map(|i| ((i + 1) as f64, head[i]))
            .collect();
        if pts.len() < 2 {
            return Err(LanczosError::InvalidParameter {
                name: "head",
                reason: "need at least two coefficients of each parity to extrapolate".into(),
            });
        }
        let m = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let slope = sxy / sxx;
        Ok(LinearTail { slope, intercept: my - slope * mx })
    };
    let (even, odd) = (fit(0)?, fit(1)?);
    let tail = LinearTail {
        slope: 0.5 * (even.slope + odd.slope),
        intercept: 0.5 * (even.intercept + odd.intercept),
    };
    let seq = LanczosSequence::Extrapolated { head, tail };
    seq.validate()?;
    Ok(seq)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn family_examples() {
        let syk = LanczosSequence::SykLike { alpha: 1.0, eta: 1.0 };
        assert_eq!(syk.eval_bn(3).unwrap(), 3.0);
        let coh = LanczosSequence::SqrtGrowth { alpha: 2.0 };
        assert_eq!(coh.eval_bn(4).unwrap(), 4.0);
        let su2 = LanczosSequence::Su2 { alpha: 1.0, two_j: 2 };
        assert!((su2.eval_bn(2).unwrap() - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn su2_support_boundary() {
        for two_j in 1..=10u32 {
            let s = LanczosSequence::Su2 { alpha: 1.0, two_j };
            assert!(s.eval_bn(two_j as usize).unwrap() > 0.0);
            assert_eq!(
                s.eval_bn(two_j as usize + 1),
                Err(LanczosError::SupportExceeded { n: two_j as usize + 1, bound: two_j as usize })
            );
        }
    }

    #[test]
    fn explicit_support_and_zero_tail() {
        let s = LanczosSequence::Explicit { coefficients: vec![1.0, 2.0] };
        assert_eq!(s.eval_bn(2).unwrap(), 2.0);
        assert!(matches!(s.eval_bn(3), Err(LanczosError::SupportExceeded { bound: 2, .. })));
        assert_eq!(s.bn_or_zero(3), 0.0);
        assert_eq!(s.bn_or_zero(0), 0.0);
        assert_eq!(s.eval_bn(0), Err(LanczosError::ZeroIndex));
    }

    #[test]
    fn validation_rejects_bad_parameters() {
        assert!(LanczosSequence::PowerLaw { alpha: 1.0, delta: 1.2 }.validate().is_err());
        assert!(LanczosSequence::LogGrowth { alpha: 1.0, gamma0: 0.0, offset: 0 }
            .validate()
            .is_err());
        assert!(LanczosSequence::LogGrowth { alpha: 1.0, gamma0: 1.0, offset: 0 }
            .validate()
            .is_ok());
        assert!(LanczosSequence::LogCorrectedLinear { alpha: 1.0, sigma: 1.0, offset: 0 }
            .validate()
            .is_err());
        assert!(LanczosSequence::Explicit { coefficients: vec![] }.validate().is_err());
        assert!(LanczosSequence::Explicit { coefficients: vec![1.0, -1.0] }
            .validate()
            .is_err());
        assert!(LanczosSequence::Su2 { alpha: 1.0, two_j: 0 }.validate().is_err());
    }

    #[test]
    fn log_growth_offsets() {
        let a = LanczosSequence::LogGrowth { alpha: 1.0, gamma0: 0.0, offset: 1 };
        assert!((a.eval_bn(1).unwrap() - 2f64.ln()).abs() < 1e-15);
        let b = LanczosSequence::LogGrowth { alpha: 1.0, gamma0: 1.0, offset: 0 };
        assert_eq!(b.eval_bn(1).unwrap(), 1.0);
    }

    #[test]
    fn extrapolation_averages_the_stagger() {
        let head: Vec<f64> = (1..=40)
            .map(|n| 2.0 * n as f64 + if n % 2 == 0 { 0.25 } else { -0.25 })
            .collect();
        let s = extrapolate_linear_tail(head.clone(), 9).unwrap();
        assert_eq!(s.eval_bn(40).unwrap(), head[39]);
        assert!((s.eval_bn(101).unwrap() - 202.0).abs() < 1e-10);
        assert!((s.eval_bn(102).unwrap() - 204.0).abs() < 1e-10);
        assert!(extrapolate_linear_tail(vec![1.0, 2.0, 3.0], 4).is_err());
    }
}
