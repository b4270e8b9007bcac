//! Conversion between the even moments μ₂ₙ = (L²ⁿ)₀₀ and the Lanczos
//! coefficients bₙ.
//!
//! The inversion moments → coefficients is exponentially ill-conditioned,
//! so every value is carried as a [`BigRational`]. In [`Arithmetic::Exact`]
//! nothing is ever rounded; in [`Arithmetic::Float`] each intermediate is
//! rounded to a fixed number of significant bits, which gives a float path
//! with selectable precision. Coefficients leave this module as exact
//! squares bₙ²; square roots are only taken when converting to `f64`.

use num_bigint::{BigInt, Sign};
pub use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MomentError {
    #[error("moment sequence must start with mu_0 = 1")]
    NotNormalized,
    #[error("need {needed} moments (mu_0..mu_{{2({count})}}) but only {available} were given")]
    TooFewMoments { count: usize, needed: usize, available: usize },
    #[error("invalid moment sequence: Hankel determinant of order {order} is not positive")]
    InvalidMomentSequence { order: usize },
    #[error("float precision exhausted at order {order} (estimated relative error {estimate:e})")]
    PrecisionExhausted { order: usize, estimate: f64 },
    #[error("no Lanczos coefficients given")]
    InsufficientData,
    #[error("value {0} is not finite")]
    NonFinite(f64),
    #[error("Lanczos coefficient squares must be positive (entry {index})")]
    NonPositiveCoefficient { index: usize },
}

/// Arithmetic mode carried by moment and coefficient sequences.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Arithmetic {
    /// Exact rationals.
    Exact,
    /// Binary floating point with `bits` significant bits.
    Float { bits: u32 },
}

impl Arithmetic {
    fn reduce(&self, x: BigRational) -> BigRational {
        match self {
            Arithmetic::Exact => x,
            Arithmetic::Float { bits } => round_to_bits(&x, *bits),
        }
    }

    pub fn label(&self) -> String {
        match self {
            Arithmetic::Exact => "exact".to_string(),
            Arithmetic::Float { bits } => format!("float{bits}"),
        }
    }
}

/// Rounds `x` to the nearest binary float with `bits` significant bits.
pub fn round_to_bits(x: &BigRational, bits: u32) -> BigRational {
    if x.is_zero() {
        return BigRational::zero();
    }
    let num = x.numer().abs();
    let den = x.denom().clone();
    // |x| lies in (2^(e-1), 2^(e+1)) with e = bits(num) - bits(den)
    let mut shift = bits as i64 - (num.bits() as i64 - den.bits() as i64);
    let q = loop {
        let (n, d) = if shift >= 0 {
            (num.clone() << shift as usize, den.clone())
        } else {
            (num.clone(), den.clone() << (-shift) as usize)
        };
        // round half away from zero
        let q: BigInt = ((n << 1usize) + &d) / (d << 1usize);
        if q.bits() > bits as u64 {
            shift -= 1;
        } else {
            break q;
        }
    };
    let q = if x.is_negative() { -q } else { q };
    if shift >= 0 {
        BigRational::new(q, BigInt::one() << shift as usize)
    } else {
        BigRational::from_integer(q << (-shift) as usize)
    }
}

fn rational_from_f64(v: f64) -> Result<BigRational, MomentError> {
    BigRational::from_float(v).ok_or(MomentError::NonFinite(v))
}

/// Even moments μ₀ = 1, μ₂, μ₄, ... of a normalized initial operator.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentSequence {
    values: Vec<BigRational>,
    arithmetic: Arithmetic,
}

impl MomentSequence {
    pub fn exact(values: Vec<BigRational>) -> Result<Self, MomentError> {
        Self::with_arithmetic(values, Arithmetic::Exact)
    }

    pub fn from_integers(values: &[i64]) -> Result<Self, MomentError> {
        Self::exact(values.iter().map(|&v| BigRational::from_integer(v.into())).collect())
    }

    /// Float-mode moments. The `f64` inputs are taken at face value and then
    /// carried at `bits` significant bits.
    pub fn float(values: &[f64], bits: u32) -> Result<Self, MomentError> {
        let values = values
            .iter()
            .map(|&v| rational_from_f64(v))
            .collect::<Result<Vec<_>, _>>()?;
        Self::with_arithmetic(values, Arithmetic::Float { bits })
    }

    pub fn with_arithmetic(values: Vec<BigRational>, arithmetic: Arithmetic) -> Result<Self, MomentError> {
        if values.first().is_none_or(|m0| !m0.is_one()) {
            return Err(MomentError::NotNormalized);
        }
        let values = values.into_iter().map(|v| arithmetic.reduce(v)).collect();
        Ok(Self { values, arithmetic })
    }

    /// μ₀, μ₂, ... as rationals.
    pub fn values(&self) -> &[BigRational] {
        &self.values
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.to_f64().unwrap_or(f64::NAN)).collect()
    }

    pub fn arithmetic(&self) -> Arithmetic {
        self.arithmetic
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Squares of the Lanczos coefficients b₁², b₂², ...
#[derive(Debug, Clone, PartialEq)]
pub struct LanczosSquares {
    squares: Vec<BigRational>,
    arithmetic: Arithmetic,
}

impl LanczosSquares {
    pub fn exact(squares: Vec<BigRational>) -> Result<Self, MomentError> {
        Self::with_arithmetic(squares, Arithmetic::Exact)
    }

    /// Float-mode squares from coefficients bₙ (not squared).
    pub fn from_coefficients(b: &[f64], bits: u32) -> Result<Self, MomentError> {
        let arithmetic = Arithmetic::Float { bits };
        let squares = b
            .iter()
            .map(|&v| rational_from_f64(v).map(|r| &r * &r))
            .collect::<Result<Vec<_>, _>>()?;
        Self::with_arithmetic(squares, arithmetic)
    }

    pub fn with_arithmetic(squares: Vec<BigRational>, arithmetic: Arithmetic) -> Result<Self, MomentError> {
        if let Some(index) = squares.iter().position(|s| !s.is_positive()) {
            return Err(MomentError::NonPositiveCoefficient { index: index + 1 });
        }
        let squares = squares.into_iter().map(|v| arithmetic.reduce(v)).collect();
        Ok(Self { squares, arithmetic })
    }

    pub fn squares(&self) -> &[BigRational] {
        &self.squares
    }

    pub fn squares_f64(&self) -> Vec<f64> {
        self.squares.iter().map(|v| v.to_f64().unwrap_or(f64::NAN)).collect()
    }

    /// bₙ = √(bₙ²) in double precision.
    pub fn coefficients_f64(&self) -> Vec<f64> {
        self.squares_f64().into_iter().map(f64::sqrt).collect()
    }

    pub fn arithmetic(&self) -> Arithmetic {
        self.arithmetic
    }

    pub fn len(&self) -> usize {
        self.squares.len()
    }

    pub fn is_empty(&self) -> bool {
        self.squares.is_empty()
    }
}

/// Recovers b₁², ..., b_count² from μ₀, ..., μ_{2·count}.
///
/// Quotient-difference style recurrence on the auxiliary table
/// M⁽ⁿ⁾ₖ = M⁽ⁿ⁻¹⁾ₖ / b²ₙ₋₁ − M⁽ⁿ⁻²⁾ₖ₋₁ / b²ₙ₋₂ with M⁽⁰⁾ₖ = M⁽¹⁾ₖ = μ₂ₖ,
/// reading off b²ₙ = M⁽ⁿ⁾ₙ. A non-positive b²ₙ means the Hankel
/// determinant of order n is non-positive. In float mode a shadow run at 64
/// extra bits estimates the rounding error and flags precision exhaustion.
pub fn moments_to_lanczos(m: &MomentSequence, count: usize) -> Result<LanczosSquares, MomentError> {
    if m.len() < count + 1 {
        return Err(MomentError::TooFewMoments {
            count,
            needed: count + 1,
            available: m.len(),
        });
    }
    let main = qd_recurrence(&m.values[..=count], count, m.arithmetic)?;
    if let Arithmetic::Float { bits } = m.arithmetic {
        let tolerance = 2f64.powf(-(bits as f64) / 2.0);
        match qd_recurrence(&m.values[..=count], count, Arithmetic::Float { bits: bits + 64 }) {
            Ok(shadow) => {
                for (i, (a, b)) in main.iter().zip(&shadow).enumerate() {
                    let estimate = ((a - b) / b).abs().to_f64().unwrap_or(f64::INFINITY);
                    if estimate > tolerance {
                        return Err(MomentError::PrecisionExhausted { order: i + 1, estimate });
                    }
                }
            }
            Err(MomentError::InvalidMomentSequence { order }) => {
                return Err(MomentError::PrecisionExhausted { order, estimate: f64::INFINITY });
            }
            Err(e) => return Err(e),
        }
    }
    Ok(LanczosSquares { squares: main, arithmetic: m.arithmetic })
}

fn qd_recurrence(mu: &[BigRational], count: usize, arith: Arithmetic) -> Result<Vec<BigRational>, MomentError> {
    let mut squares = Vec::with_capacity(count);
    if count == 0 {
        return Ok(squares);
    }
    // rows indexed by k = 0..=count, entries below the diagonal unused
    let mut older: Vec<BigRational> = mu.to_vec(); // M^(n-2)
    let mut old: Vec<BigRational> = mu.to_vec(); // M^(n-1)
    let b1 = old[1].clone();
    if !b1.is_positive() {
        return Err(MomentError::InvalidMomentSequence { order: 1 });
    }
    squares.push(b1);
    let mut b_older = BigRational::one();
    for n in 2..=count {
        let b_old = squares[n - 2].clone();
        let mut row = vec![BigRational::zero(); count + 1];
        for k in n..=count {
            let a = arith.reduce(&old[k] / &b_old);
            let b = arith.reduce(&older[k - 1] / &b_older);
            row[k] = arith.reduce(a - b);
        }
        let bn = row[n].clone();
        if !bn.is_positive() {
            return Err(MomentError::InvalidMomentSequence { order: n });
        }
        squares.push(bn);
        older = std::mem::replace(&mut old, row);
        b_older = b_old;
    }
    Ok(squares)
}

/// μ₀, ..., μ_{2·count} from the squares b₁², b₂², ...; coefficients past
/// the end of the list are zero (finite chain).
///
/// Counts weighted Dyck paths: a path of length 2n returning to site 0
/// picks up bₕ² for every step up to height h. This stays inside the field
/// generated by the squares, so exact squares give exact moments.
pub fn lanczos_to_moments(b: &LanczosSquares, count: usize) -> Result<MomentSequence, MomentError> {
    if count > 0 && b.is_empty() {
        return Err(MomentError::InsufficientData);
    }
    let arith = b.arithmetic;
    let height = b.len().min(count);
    let mut paths = vec![BigRational::zero(); height + 1];
    paths[0] = BigRational::one();
    let mut values = vec![BigRational::one()];
    for step in 1..=2 * count {
        let mut next = vec![BigRational::zero(); height + 1];
        // reachable heights have the parity of `step`
        let top = step.min(height);
        for h in (step % 2..=top).step_by(2) {
            let mut acc = BigRational::zero();
            if h >= 1 {
                acc += &paths[h - 1] * &b.squares[h - 1];
            }
            if h < height {
                acc += &paths[h + 1];
            }
            next[h] = arith.reduce(acc);
        }
        paths = next;
        if step % 2 == 0 {
            values.push(paths[0].clone());
        }
    }
    Ok(MomentSequence { values, arithmetic: arith })
}

/// Parses "p/q", "p" or a decimal literal into an exact rational.
pub fn parse_rational(text: &str) -> Option<BigRational> {
    let text = text.trim();
    if let Some((p, q)) = text.split_once('/') {
        let p: BigInt = p.trim().parse().ok()?;
        let q: BigInt = q.trim().parse().ok()?;
        if q.is_zero() {
            return None;
        }
        return Some(BigRational::new(p, q));
    }
    if let Ok(i) = text.parse::<BigInt>() {
        return Some(BigRational::from_integer(i));
    }
    // decimal literal, read exactly in base ten
    let (mantissa, exp) = match text.find(['e', 'E']) {
        Some(i) => (&text[..i], text[i + 1..].parse::<i64>().ok()?),
        None => (text, 0),
    };
    let (sign, digits) = match mantissa.strip_prefix('-') {
        Some(rest) => (Sign::Minus, rest),
        None => (Sign::Plus, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (int_part, frac_part) = digits.split_once('.').unwrap_or((digits, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    let all: String = format!("{int_part}{frac_part}");
    if !all.chars().all(|c| c.is_ascii_digit()) {
        return None;
    }
    let n = BigInt::from_biguint(sign, all.parse().ok()?);
    let scale = exp - frac_part.len() as i64;
    let ten = BigInt::from(10);
    Some(if scale >= 0 {
        BigRational::from_integer(n * num_traits::pow(ten, scale as usize))
    } else {
        BigRational::new(n, num_traits::pow(ten, (-scale) as usize))
    })
}
