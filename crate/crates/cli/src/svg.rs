//! Static SVG plot of S_K against ln C_K with the fitted line dashed.

use std::fmt::Write;

use krylov::fit::FitResult;
use krylov::observables::ObservableSeries;

use crate::output::fmt_f64;

const W: f64 = 640.0;
const H: f64 = 480.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;

/// Round to 0.01 px so the markup stays short and stable.
fn px(v: f64) -> String {
    fmt_f64((v * 100.0).round() / 100.0)
}

fn nice_step(span: f64) -> f64 {
    let raw = span / 6.0;
    let mag = 10f64.powf(raw.log10().floor());
    let norm = raw / mag;
    let m = if norm < 1.5 {
        1.0
    } else if norm < 3.5 {
        2.0
    } else if norm < 7.5 {
        5.0
    } else {
        10.0
    };
    m * mag
}

fn ticks(lo: f64, hi: f64) -> Vec<f64> {
    let step = nice_step(hi - lo);
    let mut v = (lo / step).ceil() * step;
    let mut out = Vec::new();
    while v <= hi + 1e-9 * step {
        // avoid printing -0
        out.push(if v.abs() < 1e-12 * step { 0.0 } else { v });
        v += step;
    }
    out
}

fn label(v: f64) -> String {
    let r = (v * 1e6).round() / 1e6;
    if r.fract() == 0.0 {
        format!("{}", r as i64)
    } else {
        fmt_f64(r)
    }
}

pub fn plot(series: &ObservableSeries, fit: Option<&FitResult>, title: &str) -> String {
    let pts: Vec<(f64, f64)> = (0..series.len())
        .filter(|&i| series.c_k[i] > 0.0 && series.c_k[i].is_finite() && series.s_k[i].is_finite())
        .map(|i| (series.c_k[i].ln(), series.s_k[i]))
        .collect();
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in &pts {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if pts.is_empty() {
        (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
    }
    if x1 - x0 < 1e-9 {
        x1 = x0 + 1.0;
    }
    if y1 - y0 < 1e-9 {
        y1 = y0 + 1.0;
    }
    let sx = |x: f64| LEFT + (x - x0) / (x1 - x0) * (W - LEFT - RIGHT);
    let sy = |y: f64| H - BOTTOM - (y - y0) / (y1 - y0) * (H - TOP - BOTTOM);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="24" text-anchor="middle" font-size="14">{}</text>"#, W / 2.0, escape(title));
    // axes
    let _ = writeln!(
        s,
        r#"<path d="M{} {} V{} H{}" fill="none" stroke="black"/>"#,
        LEFT,
        TOP,
        H - BOTTOM,
        W - RIGHT
    );
    for t in ticks(x0, x1) {
        let x = px(sx(t));
        let _ = writeln!(s, r#"<line x1="{x}" y1="{}" x2="{x}" y2="{}" stroke="black"/>"#, H - BOTTOM, H - BOTTOM + 5.0);
        let _ = writeln!(s, r#"<text x="{x}" y="{}" text-anchor="middle">{}</text>"#, H - BOTTOM + 18.0, label(t));
    }
    for t in ticks(y0, y1) {
        let y = px(sy(t));
        let _ = writeln!(s, r#"<line x1="{}" y1="{y}" x2="{LEFT}" y2="{y}" stroke="black"/>"#, LEFT - 5.0);
        let _ = writeln!(s, r#"<text x="{}" y="{y}" text-anchor="end" dominant-baseline="middle">{}</text>"#, LEFT - 8.0, label(t));
    }
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">ln C_K</text>"#, (LEFT + W - RIGHT) / 2.0, H - 15.0);
    let _ = writeln!(
        s,
        r#"<text x="20" y="{y}" text-anchor="middle" transform="rotate(-90 20 {y})">S_K</text>"#,
        y = (TOP + H - BOTTOM) / 2.0
    );
    if !pts.is_empty() {
        let path: Vec<String> = pts.iter().map(|&(x, y)| format!("{},{}", px(sx(x)), px(sy(y)))).collect();
        let _ = writeln!(s, r#"<polyline points="{}" fill="none" stroke="steelblue" stroke-width="1.5"/>"#, path.join(" "));
    }
    if let Some(f) = fit {
        let (a, b) = (f.c_window.0.ln(), f.c_window.1.ln());
        let n = if f.lnln_coefficient.is_some() { 32 } else { 1 };
        let line: Vec<String> = (0..=n)
            .map(|k| {
                let x = a + (b - a) * k as f64 / n as f64;
                format!("{},{}", px(sx(x)), px(sy(f.predict(x.exp()))))
            })
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline points="{}" fill="none" stroke="crimson" stroke-width="1.5" stroke-dasharray="6 4"/>"#,
            line.join(" ")
        );
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="start" fill="crimson">S_K = {} ln C_K + {}</text>"#,
            LEFT + 10.0,
            TOP + 14.0,
            label(f.eta_tilde),
            label(f.intercept)
        );
    }
    s.push_str("</svg>\n");
    s
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
