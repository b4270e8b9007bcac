//! Per-point work for each subcommand.

use std::path::{Path, PathBuf};

use krylov::evolve::{evolve_with, EvolveError};
use krylov::fit::{default_window, eta_bound_check, fit_log_relation, window_by_c, window_by_t, BoundVerdict, FitError, FitResult};
use krylov::moments::{
    lanczos_to_moments, moments_to_lanczos, parse_rational, Arithmetic, LanczosSquares, MomentError, MomentSequence,
};
use krylov::observables::{spectral_density_finite, ObservableSeries};
use krylov::wnumber::w_number;
use serde_json::{json, Map, Value};

use crate::config::{ArithmeticSetting, Direction, FitSettings, Format, MomentsSettings, Point};
use crate::output;
use crate::svg;

/// Process exit status. When several points fail the largest code wins.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Exit {
    Ok = 0,
    Failure = 1,
    Usage = 2,
    Bound = 3,
    Moments = 4,
    Resource = 5,
}

#[derive(Debug)]
pub struct Outcome {
    pub files: Vec<PathBuf>,
    pub exit: Exit,
    pub messages: Vec<String>,
}

impl Outcome {
    fn new() -> Self {
        Outcome { files: Vec::new(), exit: Exit::Ok, messages: Vec::new() }
    }

    fn fail(&mut self, exit: Exit, message: String) {
        self.exit = self.exit.max(exit);
        self.messages.push(message);
    }

    fn write(&mut self, dir: &Path, name: &str, bytes: &[u8]) {
        match output::write(dir, name, bytes) {
            Ok(p) => self.files.push(p),
            Err(e) => self.fail(Exit::Failure, format!("cannot write {}: {e}", dir.join(name).display())),
        }
    }

    pub fn merge(&mut self, other: Outcome) {
        self.files.extend(other.files);
        self.exit = self.exit.max(other.exit);
        self.messages.extend(other.messages);
    }
}

pub struct Context {
    pub out: PathBuf,
    pub format: Format,
    pub plot: bool,
    /// Directory relative paths in the config resolve against.
    pub base: PathBuf,
    pub single: bool,
}

fn parameters(p: &Point) -> Value {
    let map: Map<String, Value> = p.parameters.iter().cloned().collect();
    Value::Object(map)
}

fn fit_series(series: &ObservableSeries, s: &FitSettings) -> Result<(FitResult, BoundVerdict), FitError> {
    let sel = if s.t_min.is_some() || s.t_max.is_some() {
        window_by_t(series, s.t_min.unwrap_or(0.0), s.t_max.unwrap_or(f64::INFINITY))?
    } else if let Some(c_max) = s.c_max {
        window_by_c(series, s.c_min, c_max)?
    } else {
        default_window(series, s.c_min)?
    };
    let fit = fit_log_relation(series, &sel, s.lnln, s.weighting)?;
    let verdict = eta_bound_check(&fit, s.bound_tol);
    Ok((fit, verdict))
}

/// Fit report and plot for one series; shared by `evolve` and `fit`.
fn report(out: &mut Outcome, ctx: &Context, stem: &str, series: &ObservableSeries, settings: Option<&FitSettings>) {
    let mut fitted = None;
    if let Some(s) = settings {
        match fit_series(series, s) {
            Ok((fit, verdict)) => {
                out.write(&ctx.out, &format!("{stem}.fit.json"), &output::json_bytes(&output::fit_report(&fit, &verdict)));
                if let BoundVerdict::ViolatesBound(excess) = verdict {
                    out.fail(
                        Exit::Bound,
                        format!("{stem}: fitted slope {} exceeds 1 + {} by {excess}", fit.eta_tilde, s.bound_tol),
                    );
                }
                fitted = Some(fit);
            }
            Err(e) => out.fail(Exit::Usage, format!("{stem}: fit failed: {e}")),
        }
    }
    if ctx.plot {
        let svg = svg::plot(series, fitted.as_ref(), stem);
        out.write(&ctx.out, &format!("{stem}.svg"), svg.as_bytes());
    }
}

pub fn evolve(p: &Point, ctx: &Context) -> Outcome {
    let mut out = Outcome::new();
    let cfg = &p.config;
    let seq = match cfg.build_sequence().and_then(|s| cfg.check_evolve().map(|_| s)) {
        Ok(s) => s,
        Err(e) => {
            out.fail(Exit::Usage, format!("{}: {e}", p.name));
            return out;
        }
    };
    let mut series = ObservableSeries::default();
    let mut bad_sample = None;
    let result = evolve_with(&seq, &cfg.evolve, |state| {
        if let Err(e) = series.push_state(state) {
            bad_sample.get_or_insert(e);
        }
    });
    let status = match &result {
        Ok(()) => json!({"state": "complete"}),
        Err(EvolveError::ResourceLimit { t_reached, active_size, .. }) => {
            json!({"state": "resource_limit", "t_reached": t_reached, "active_size": active_size})
        }
        Err(EvolveError::Stiffness { t, h, .. }) => json!({"state": "step_underflow", "t_reached": t, "step": h}),
        Err(e) => json!({"state": "failed", "error": e.to_string()}),
    };
    match result {
        Ok(()) => {}
        Err(e @ (EvolveError::ResourceLimit { .. } | EvolveError::Stiffness { .. })) => {
            out.fail(Exit::Resource, format!("{}: {e}; partial series written", p.name))
        }
        Err(e) => {
            out.fail(Exit::Usage, format!("{}: {e}", p.name));
            return out;
        }
    }
    if let Some(e) = bad_sample {
        out.fail(Exit::Failure, format!("{}: {e}", p.name));
    }

    if ctx.format.csv() {
        out.write(&ctx.out, &format!("{}.csv", p.name), &output::series_csv(&series));
    }
    if ctx.format.json() {
        let mut meta = Map::new();
        meta.insert("point".into(), json!(p.name));
        meta.insert("parameters".into(), parameters(p));
        meta.insert("sequence".into(), p.raw.get("sequence").cloned().unwrap_or(Value::Null));
        meta.insert("evolve".into(), serde_json::to_value(&cfg.evolve).expect("config serializes"));
        meta.insert("status".into(), status);
        out.write(&ctx.out, &format!("{}.json", p.name), &output::json_bytes(&output::series_json(&series, meta)));
    }
    report(&mut out, ctx, &p.name, &series, cfg.fit.as_ref());
    out
}

pub fn fit(p: &Point, ctx: &Context) -> Outcome {
    let mut out = Outcome::new();
    let Some(paths) = p.config.series.as_ref().filter(|s| !s.is_empty()) else {
        out.fail(Exit::Usage, format!("{}: the fit command needs a \"series\" list", p.name));
        return out;
    };
    let settings = p.config.fit.clone().unwrap_or_default();
    for rel in paths {
        let path = ctx.base.join(rel);
        let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "series".into());
        let stem = if ctx.single { stem } else { format!("{}-{stem}", p.name) };
        match output::read_series(&path) {
            Ok(series) => report(&mut out, ctx, &stem, &series, Some(&settings)),
            Err(e) => out.fail(Exit::Usage, e.to_string()),
        }
    }
    out
}

pub fn wnumber(p: &Point, ctx: &Context) -> Outcome {
    let mut out = Outcome::new();
    let seq = match p.config.build_sequence() {
        Ok(s) => s,
        Err(e) => {
            out.fail(Exit::Usage, format!("{}: {e}", p.name));
            return out;
        }
    };
    let w = &p.config.wnumber;
    match w_number(&seq, w.depth, w.tol) {
        Ok(class) => {
            let doc = json!({
                "point": p.name,
                "parameters": parameters(p),
                "depth": w.depth,
                "tol": w.tol,
                "verdict": class.verdict,
                "diagnostics": class.diagnostics,
            });
            out.write(&ctx.out, &format!("{}.w.json", p.name), &output::json_bytes(&doc));
        }
        Err(e) => out.fail(Exit::Usage, format!("{}: {e}", p.name)),
    }
    out
}

pub fn modes(p: &Point, ctx: &Context) -> Outcome {
    let mut out = Outcome::new();
    let seq = match p.config.build_sequence() {
        Ok(s) => s,
        Err(e) => {
            out.fail(Exit::Usage, format!("{}: {e}", p.name));
            return out;
        }
    };
    let Some(support) = seq.support() else {
        out.fail(Exit::Usage, format!("{}: mode decomposition needs a finite chain", p.name));
        return out;
    };
    let b = seq.coefficients(support);
    let decomposition = match krylov::closed_forms::finite_chain_modes(&b) {
        Ok(d) => d,
        Err(e) => {
            out.fail(Exit::Usage, format!("{}: {e}", p.name));
            return out;
        }
    };
    let m = &p.config.modes;
    let top = m.omega_max.unwrap_or_else(|| {
        1.2 * decomposition.modes.iter().map(|x| x.omega).fold(0.0, f64::max).max(1.0)
    });
    let grid: Vec<f64> = (0..m.points)
        .map(|i| -top + 2.0 * top * i as f64 / (m.points.max(2) - 1) as f64)
        .collect();
    match spectral_density_finite(&decomposition, &grid, m.width) {
        Ok(spectrum) => {
            let doc = json!({
                "point": p.name,
                "parameters": parameters(p),
                "coefficients": b,
                "decomposition": decomposition,
                "spectrum": spectrum,
            });
            out.write(&ctx.out, &format!("{}.modes.json", p.name), &output::json_bytes(&doc));
        }
        Err(e) => out.fail(Exit::Usage, format!("{}: {e}", p.name)),
    }
    out
}

#[derive(Debug, thiserror::Error)]
enum MomentsFailure {
    #[error("entry {index}: {text:?} is not a number or rational")]
    Parse { index: usize, text: String },
    #[error(transparent)]
    Moments(#[from] MomentError),
}

fn parse_values(values: &[Value]) -> Result<Vec<krylov::moments::BigRational>, MomentsFailure> {
    values
        .iter()
        .enumerate()
        .map(|(index, v)| {
            // numbers are read from their decimal text, so 0.1 means 1/10
            let text = match v {
                Value::String(s) => s.clone(),
                other => other.to_string(),
            };
            parse_rational(&text).ok_or(MomentsFailure::Parse { index, text })
        })
        .collect()
}

fn max_rel_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs() / x.abs().max(y.abs()).max(f64::MIN_POSITIVE)).fold(0.0, f64::max)
}

fn run_moments(m: &MomentsSettings) -> Result<Value, MomentsFailure> {
    let arithmetic = match m.arithmetic {
        ArithmeticSetting::Exact => Arithmetic::Exact,
        ArithmeticSetting::Float { bits } => Arithmetic::Float { bits },
    };
    let values = parse_values(&m.values)?;
    let strings = |v: &[krylov::moments::BigRational]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>();
    match m.direction {
        Direction::ToLanczos => {
            let moments = MomentSequence::with_arithmetic(values, arithmetic)?;
            let count = m.count.unwrap_or(moments.len().saturating_sub(1));
            let squares = moments_to_lanczos(&moments, count)?;
            let back = lanczos_to_moments(&squares, count)?;
            Ok(json!({
                "direction": "to_lanczos",
                "arithmetic": arithmetic.label(),
                "moments": strings(moments.values()),
                "lanczos_squares": strings(squares.squares()),
                "lanczos_squares_f64": squares.squares_f64(),
                "coefficients": squares.coefficients_f64(),
                "round_trip_residual": max_rel_diff(&back.to_f64(), &moments.to_f64()[..=count]),
            }))
        }
        Direction::ToMoments => {
            let squares = if m.squares { values } else { values.iter().map(|b| b * b).collect() };
            let squares = LanczosSquares::with_arithmetic(squares, arithmetic)?;
            let count = m.count.unwrap_or(squares.len() + 1);
            let moments = lanczos_to_moments(&squares, count)?;
            let depth = count.min(squares.len());
            let back = moments_to_lanczos(&moments, depth)?;
            Ok(json!({
                "direction": "to_moments",
                "arithmetic": arithmetic.label(),
                "lanczos_squares": strings(squares.squares()),
                "moments": strings(moments.values()),
                "moments_f64": moments.to_f64(),
                "round_trip_residual": max_rel_diff(&back.squares_f64(), &squares.squares_f64()[..depth]),
            }))
        }
    }
}

pub fn moments(p: &Point, ctx: &Context) -> Outcome {
    let mut out = Outcome::new();
    let Some(m) = &p.config.moments else {
        out.fail(Exit::Usage, format!("{}: the moments command needs a \"moments\" section", p.name));
        return out;
    };
    match run_moments(m) {
        Ok(mut doc) => {
            doc["point"] = json!(p.name);
            doc["parameters"] = parameters(p);
            out.write(&ctx.out, &format!("{}.moments.json", p.name), &output::json_bytes(&doc));
        }
        Err(MomentsFailure::Parse { index, text }) => {
            out.fail(Exit::Usage, format!("{}: /moments/values/{index}: {text:?} is not a number or rational", p.name))
        }
        Err(MomentsFailure::Moments(e)) => out.fail(Exit::Moments, format!("{}: {e}", p.name)),
    }
    out
}
