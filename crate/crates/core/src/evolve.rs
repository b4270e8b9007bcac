//! Time evolution of the operator wave function on the Krylov chain,
//! ∂tφₙ = bₙφₙ₋₁ − bₙ₊₁φₙ₊₁ with φₙ(0) = δₙ₀, on an active window of
//! sites that grows as the wave front advances.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::observables::complexity;
use crate::sequence::{LanczosError, LanczosSequence};
use crate::summation::NeumaierSum;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvolveError {
    #[error("invalid evolution config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Sequence(#[from] LanczosError),
    #[error("active window limit {active_size} reached at t = {t_reached}")]
    ResourceLimit {
        t_reached: f64,
        active_size: usize,
        /// Samples completed before the limit was hit.
        partial: Vec<WaveState>,
    },
    #[error("step size underflow at t = {t} (h = {h:e}, last error ratio {err_ratio:e})")]
    Stiffness { t: f64, h: f64, err_ratio: f64 },
}

/// Real amplitudes φ₀, ..., φ_{N−1} at time t.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaveState {
    pub t: f64,
    pub amplitudes: Vec<f64>,
    /// |Σφₙ² − 1|
    pub norm_error: f64,
    /// Σφₙ² over the trailing guard band.
    pub tail_mass: f64,
}

impl WaveState {
    /// φₙ = δₙ₀ on `size` sites.
    pub fn initial(size: usize) -> Self {
        let mut amplitudes = vec![0.0; size.max(1)];
        amplitudes[0] = 1.0;
        WaveState { t: 0.0, amplitudes, norm_error: 0.0, tail_mass: 0.0 }
    }

    pub fn from_amplitudes(t: f64, amplitudes: Vec<f64>, guard_band: usize) -> Self {
        let mut s = WaveState { t, amplitudes, norm_error: 0.0, tail_mass: 0.0 };
        s.refresh_diagnostics(guard_band);
        s
    }

    pub fn active_size(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn refresh_diagnostics(&mut self, guard_band: usize) {
        let norm: NeumaierSum = self.amplitudes.iter().map(|a| a * a).collect();
        self.norm_error = (norm.value() - 1.0).abs();
        self.tail_mass = tail_mass(&self.amplitudes, guard_band);
    }
}

fn tail_mass(amps: &[f64], guard_band: usize) -> f64 {
    amps[amps.len().saturating_sub(guard_band)..].iter().map(|a| a * a).sum()
}

/// Times at which the trajectory is sampled.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SampleGrid {
    /// `count` equally spaced times from 0 to t_max inclusive.
    Uniform { count: usize },
    /// `count` geometrically spaced times from t_min to t_max inclusive.
    Logarithmic { t_min: f64, count: usize },
    /// Given times, increasing, within [0, t_max].
    Explicit { times: Vec<f64> },
}

impl SampleGrid {
    pub fn times(&self, t_max: f64) -> Vec<f64> {
        match self {
            SampleGrid::Uniform { count } => match *count {
                0 => vec![],
                1 => vec![t_max],
                c => (0..c).map(|i| t_max * i as f64 / (c - 1) as f64).collect(),
            },
            SampleGrid::Logarithmic { t_min, count } => match *count {
                0 => vec![],
                1 => vec![t_max],
                c => {
                    let r = (t_max / t_min).ln();
                    (0..c)
                        .map(|i| if i + 1 == c { t_max } else { t_min * (r * i as f64 / (c - 1) as f64).exp() })
                        .collect()
                }
            },
            SampleGrid::Explicit { times } => times.clone(),
        }
    }

    fn validate(&self, t_max: f64) -> Result<(), EvolveError> {
        let bad = |m: &str| Err(EvolveError::InvalidConfig(m.to_string()));
        match self {
            SampleGrid::Uniform { count } | SampleGrid::Logarithmic { count, .. } if *count == 0 => {
                return bad("sample count must be positive")
            }
            SampleGrid::Logarithmic { t_min, .. } if !(*t_min > 0.0 && *t_min < t_max) => {
                return bad("logarithmic grid needs 0 < t_min < t_max")
            }
            SampleGrid::Explicit { times } => {
                if times.is_empty() {
                    return bad("explicit sample list is empty");
                }
                if times.iter().any(|t| !(t.is_finite() && *t >= 0.0 && *t <= t_max)) {
                    return bad("explicit sample times must lie in [0, t_max]");
                }
                if times.windows(2).any(|w| w[1] <= w[0]) {
                    return bad("explicit sample times must be strictly increasing");
                }
            }
            _ => {}
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Integrator {
    /// Explicit Dormand–Prince 5(4), step bounded by 0.5/b_max.
    DormandPrince,
    /// Fourth-order triple-jump composition of the Cayley (implicit
    /// midpoint) map. Norm-preserving and unconditionally stable, so the
    /// step follows accuracy alone; suited to wide windows with large b_max.
    CayleyComposition,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvolveConfig {
    pub t_max: f64,
    pub samples: SampleGrid,
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub truncation_tol: f64,
    pub guard_band: usize,
    pub max_active_size: usize,
    pub initial_active_size: usize,
    pub growth_factor: f64,
    pub integrator: Integrator,
    /// Stop after the first sample with C_K at or above this value.
    pub complexity_cap: Option<f64>,
}

impl Default for EvolveConfig {
    fn default() -> Self {
        EvolveConfig {
            t_max: 10.0,
            samples: SampleGrid::Uniform { count: 101 },
            rel_tol: 1e-11,
            abs_tol: 1e-13,
            truncation_tol: 1e-26,
            guard_band: 16,
            max_active_size: 4_000_000,
            initial_active_size: 64,
            growth_factor: 1.5,
            integrator: Integrator::CayleyComposition,
            complexity_cap: None,
        }
    }
}

impl EvolveConfig {
    pub fn validate(&self) -> Result<(), EvolveError> {
        let bad = |m: String| Err(EvolveError::InvalidConfig(m));
        if !(self.t_max.is_finite() && self.t_max > 0.0) {
            return bad(format!("t_max must be positive, got {}", self.t_max));
        }
        for (name, v) in [("rel_tol", self.rel_tol), ("abs_tol", self.abs_tol), ("truncation_tol", self.truncation_tol)] {
            if !(v > 0.0 && v < 1.0) {
                return bad(format!("{name} must lie in (0, 1), got {v}"));
            }
        }
        if self.guard_band < 4 {
            return bad(format!("guard_band must be at least 4, got {}", self.guard_band));
        }
        if !(self.growth_factor > 1.0 && self.growth_factor.is_finite()) {
            return bad(format!("growth_factor must exceed 1, got {}", self.growth_factor));
        }
        if let Some(cap) = self.complexity_cap {
            if !(cap > 0.0) {
                return bad(format!("complexity_cap must be positive, got {cap}"));
            }
        }
        if self.initial_active_size == 0 || self.max_active_size < self.initial_active_size {
            return bad("need 0 < initial_active_size <= max_active_size".into());
        }
        self.samples.validate(self.t_max)
    }
}

/// dφ/dt for the truncated chain (φ_N treated as 0).
pub fn rhs(state: &WaveState, seq: &LanczosSequence) -> Vec<f64> {
    let n = state.amplitudes.len();
    let b: Vec<f64> = (0..=n).map(|k| seq.bn_or_zero(k)).collect();
    let mut out = vec![0.0; n];
    apply_generator(&b, &state.amplitudes, &mut out);
    out
}

/// out = A y with (Ay)ₙ = bₙyₙ₋₁ − bₙ₊₁yₙ₊₁; `b[0]` is ignored.
fn apply_generator(b: &[f64], y: &[f64], out: &mut [f64]) {
    let n = y.len();
    if n == 1 {
        out[0] = 0.0;
        return;
    }
    out[0] = -b[1] * y[1];
    for i in 1..n - 1 {
        out[i] = b[i] * y[i - 1] - b[i + 1] * y[i + 1];
    }
    out[n - 1] = b[n - 1] * y[n - 2];
}

/// Window size after checking the tail of `state`.
pub fn active_window_policy(state: &WaveState, cfg: &EvolveConfig) -> usize {
    let n = state.active_size();
    let occupied = state
        .amplitudes
        .iter()
        .rposition(|a| a * a > cfg.truncation_tol)
        .map_or(1, |i| i + 1);
    let next = if state.tail_mass <= cfg.truncation_tol {
        n
    } else {
        ((cfg.growth_factor * n as f64).ceil() as usize).min(cfg.max_active_size)
    };
    next.max(occupied)
}

// Dormand–Prince 5(4) tableau.
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

/// Adaptive stepper bound to one sequence and config. Advances a state in
/// either time direction; a negative target integrates the reversed
/// generator.
pub struct Propagator<'a> {
    seq: &'a LanczosSequence,
    cfg: EvolveConfig,
    /// b[0..=N], b[0] = 0
    b: Vec<f64>,
    b_max: f64,
    chain_sites: usize,
    h: f64,
    last_err: f64,
    k: [Vec<f64>; 7],
    tmp: Vec<f64>,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
}

impl<'a> Propagator<'a> {
    pub fn new(seq: &'a LanczosSequence, cfg: &EvolveConfig) -> Result<Self, EvolveError> {
        seq.validate()?;
        cfg.validate()?;
        let chain_sites = seq.support().map_or(usize::MAX, |k| k + 1);
        Ok(Propagator {
            seq,
            cfg: cfg.clone(),
            b: vec![0.0],
            b_max: 0.0,
            chain_sites,
            h: 0.0,
            last_err: 0.0,
            k: Default::default(),
            tmp: Vec::new(),
            accepted_steps: 0,
            rejected_steps: 0,
        })
    }

    /// Initial state sized for this chain.
    pub fn initial_state(&self) -> WaveState {
        let size = self.cfg.initial_active_size.max(2 * self.cfg.guard_band).min(self.chain_sites);
        WaveState::initial(size.min(self.cfg.max_active_size))
    }

    fn ensure_coefficients(&mut self, n: usize) {
        while self.b.len() <= n {
            let k = self.b.len();
            let v = self.seq.bn_or_zero(k);
            self.b.push(v);
        }
        // only b[1..N] couple sites inside the window
        self.b_max = self.b[1..n.max(1)].iter().fold(self.b.get(1).copied().unwrap_or(0.0), |m, &v| m.max(v));
        for buf in self.k.iter_mut().chain(std::iter::once(&mut self.tmp)) {
            buf.resize(n, 0.0);
        }
    }

    fn truncates(&self, n: usize) -> bool {
        n < self.chain_sites
    }

    /// Integrates `state` to `t_target` (which may precede `state.t`).
    pub fn advance(&mut self, state: &mut WaveState, t_target: f64) -> Result<(), EvolveError> {
        let guard = self.cfg.guard_band;
        let mut n = state.active_size();
        self.ensure_coefficients(n);
        let dir = if t_target >= state.t { 1.0 } else { -1.0 };
        if self.h == 0.0 || self.h.signum() != dir {
            self.h = dir * 0.1 / self.b_max.max(1e-300);
        }
        let mut y_new = vec![0.0; n];
        while (t_target - state.t) * dir > 0.0 {
            let remaining = t_target - state.t;
            let mut h = self.h;
            if self.cfg.integrator == Integrator::DormandPrince {
                let cap = 0.5 / self.b_max.max(1e-300);
                if h.abs() > cap {
                    h = dir * cap;
                }
            }
            let hits_target = h.abs() >= remaining.abs();
            if hits_target {
                h = remaining;
            }
            y_new.resize(n, 0.0);
            let err = match self.cfg.integrator {
                Integrator::DormandPrince => self.dp_step(&state.amplitudes, h, &mut y_new),
                Integrator::CayleyComposition => self.cayley_step(&state.amplitudes, h, &mut y_new),
            };
            self.last_err = err;
            if !err.is_finite() || err > 1.0 {
                self.rejected_steps += 1;
                let fac = if err.is_finite() { (0.9 * err.powf(-0.2)).clamp(0.2, 1.0) } else { 0.2 };
                self.h = h * fac;
                if self.h.abs() < 1e-14 * state.t.abs().max(1.0 / self.b_max.max(1e-300)) {
                    return Err(EvolveError::Stiffness { t: state.t, h: self.h, err_ratio: err });
                }
                continue;
            }
            if self.truncates(n) && tail_mass(&y_new, guard) > self.cfg.truncation_tol {
                if n >= self.cfg.max_active_size {
                    return Err(EvolveError::ResourceLimit { t_reached: state.t, active_size: n, partial: vec![] });
                }
                let probe = WaveState { t: state.t, amplitudes: y_new.clone(), norm_error: 0.0, tail_mass: f64::INFINITY };
                let grown = active_window_policy(&probe, &self.cfg).min(self.chain_sites).max(n + 1);
                state.amplitudes.resize(grown, 0.0);
                n = grown;
                self.ensure_coefficients(n);
                continue;
            }
            std::mem::swap(&mut state.amplitudes, &mut y_new);
            state.t = if hits_target { t_target } else { state.t + h };
            self.accepted_steps += 1;
            let fac = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
            // keep the proposal from the last full step when the target
            // shortened this one
            let next = h * fac;
            if !hits_target || next.abs() > self.h.abs() {
                self.h = next;
            }
        }
        state.refresh_diagnostics(guard);
        Ok(())
    }

    fn error_scale(&self, y: &[f64]) -> f64 {
        let norm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        self.cfg.abs_tol + self.cfg.rel_tol * norm
    }

    fn dp_step(&mut self, y: &[f64], h: f64, out: &mut [f64]) -> f64 {
        let n = y.len();
        let b = &self.b;
        let [k1, k2, k3, k4, k5, k6, k7] = &mut self.k;
        let tmp = &mut self.tmp;
        apply_generator(b, y, k1);
        for i in 0..n {
            tmp[i] = y[i] + h * A21 * k1[i];
        }
        apply_generator(b, tmp, k2);
        for i in 0..n {
            tmp[i] = y[i] + h * (A31 * k1[i] + A32 * k2[i]);
        }
        apply_generator(b, tmp, k3);
        for i in 0..n {
            tmp[i] = y[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]);
        }
        apply_generator(b, tmp, k4);
        for i in 0..n {
            tmp[i] = y[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]);
        }
        apply_generator(b, tmp, k5);
        for i in 0..n {
            tmp[i] = y[i] + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]);
        }
        apply_generator(b, tmp, k6);
        for i in 0..n {
            out[i] = y[i] + h * (B1 * k1[i] + B3 * k3[i] + B4 * k4[i] + B5 * k5[i] + B6 * k6[i]);
        }
        apply_generator(b, out, k7);
        let mut err2 = 0.0;
        for i in 0..n {
            let e = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
            err2 += e * e;
        }
        err2.sqrt() / self.error_scale(y)
    }

    /// One composed step and its step-doubled comparison; keeps the
    /// two-half-step result.
    fn cayley_step(&mut self, y: &[f64], h: f64, out: &mut [f64]) -> f64 {
        let n = y.len();
        let [single, half, r, c, ..] = &mut self.k;
        single.copy_from_slice(y);
        triple_jump(&self.b, single, h, r, c);
        half.copy_from_slice(y);
        triple_jump(&self.b, half, 0.5 * h, r, c);
        triple_jump(&self.b, half, 0.5 * h, r, c);
        out.copy_from_slice(half);
        let mut err2 = 0.0;
        for i in 0..n {
            let e = half[i] - single[i];
            err2 += e * e;
        }
        err2.sqrt() / 15.0 / self.error_scale(y)
    }
}

fn triple_jump(b: &[f64], y: &mut [f64], h: f64, r: &mut [f64], c: &mut [f64]) {
    let cbrt2 = 2f64.cbrt();
    let g1 = 1.0 / (2.0 - cbrt2);
    let g2 = -cbrt2 / (2.0 - cbrt2);
    cayley(b, y, g1 * h, r, c);
    cayley(b, y, g2 * h, r, c);
    cayley(b, y, g1 * h, r, c);
}

/// y ← (I − τA/2)⁻¹(I + τA/2) y by a Thomas sweep. The pivots are
/// 1 + (τ/2)²bₙ²/pivₙ₋₁ ≥ 1, so no pivoting is needed.
fn cayley(b: &[f64], y: &mut [f64], tau: f64, r: &mut [f64], c: &mut [f64]) {
    let n = y.len();
    let s = 0.5 * tau;
    apply_generator(b, y, r);
    for i in 0..n {
        r[i] = y[i] + s * r[i];
    }
    // forward sweep: c[i] = super-diagonal / pivot, r[i] = reduced rhs
    let mut piv = 1.0;
    for i in 0..n {
        if i > 0 {
            piv = 1.0 + s * b[i] * c[i - 1];
            r[i] = (r[i] + s * b[i] * r[i - 1]) / piv;
        } else {
            r[0] /= piv;
        }
        c[i] = if i + 1 < n { s * b[i + 1] / piv } else { 0.0 };
    }
    y[n - 1] = r[n - 1];
    for i in (0..n - 1).rev() {
        y[i] = r[i] - c[i] * y[i + 1];
    }
}

/// Evolves from φₙ(0) = δₙ₀, calling `on_sample` at each sample time.
pub fn evolve_with<F: FnMut(&WaveState)>(
    seq: &LanczosSequence,
    cfg: &EvolveConfig,
    mut on_sample: F,
) -> Result<(), EvolveError> {
    let mut prop = Propagator::new(seq, cfg)?;
    let mut state = prop.initial_state();
    for t in cfg.samples.times(cfg.t_max) {
        prop.advance(&mut state, t)?;
        on_sample(&state);
        if cfg.complexity_cap.is_some_and(|cap| complexity(&state) >= cap) {
            break;
        }
    }
    Ok(())
}

/// Evolves from φₙ(0) = δₙ₀ and returns the state at every sample time.
/// A resource-limit error carries the samples completed before it.
pub fn evolve(seq: &LanczosSequence, cfg: &EvolveConfig) -> Result<Vec<WaveState>, EvolveError> {
    let mut out = Vec::new();
    match evolve_with(seq, cfg, |s| out.push(s.clone())) {
        Ok(()) => Ok(out),
        Err(EvolveError::ResourceLimit { t_reached, active_size, .. }) => {
            Err(EvolveError::ResourceLimit { t_reached, active_size, partial: out })
        }
        Err(e) => Err(e),
    }
}
