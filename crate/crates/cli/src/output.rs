//! Series files, reports and the manifest.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use krylov::fit::{BoundVerdict, FitResult};
use krylov::observables::ObservableSeries;
use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};

pub const CSV_HEADER: [&str; 6] = ["t", "c_k", "s_k", "phi0", "norm_error", "active_size"];

/// Shortest representation that parses back to the same f64.
pub fn fmt_f64(x: f64) -> String {
    ryu::Buffer::new().format(x).to_string()
}

pub fn series_csv(series: &ObservableSeries) -> Vec<u8> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .quote_style(csv::QuoteStyle::Necessary)
        .from_writer(Vec::new());
    w.write_record(CSV_HEADER).expect("in-memory write");
    for i in 0..series.len() {
        w.write_record([
            fmt_f64(series.times[i]),
            fmt_f64(series.c_k[i]),
            fmt_f64(series.s_k[i]),
            fmt_f64(series.phi0[i]),
            fmt_f64(series.norm_error[i]),
            series.active_size[i].to_string(),
        ])
        .expect("in-memory write");
    }
    w.into_inner().expect("in-memory flush")
}

pub fn series_json(series: &ObservableSeries, meta: Map<String, Value>) -> Value {
    let mut doc = meta;
    doc.insert(
        "columns".into(),
        json!({
            "t": series.times,
            "c_k": series.c_k,
            "s_k": series.s_k,
            "phi0": series.phi0,
            "norm_error": series.norm_error,
            "active_size": series.active_size,
        }),
    );
    Value::Object(doc)
}

#[derive(Debug, thiserror::Error)]
pub enum ReadError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: io::Error },
    #[error("{path}: {message}")]
    Format { path: String, message: String },
}

/// Reads a series written by `evolve` (CSV or JSON, by extension).
pub fn read_series(path: &Path) -> Result<ObservableSeries, ReadError> {
    let name = path.display().to_string();
    let bad = |message: String| ReadError::Format { path: name.clone(), message };
    let bytes = fs::read(path).map_err(|source| ReadError::Io { path: name.clone(), source })?;
    let mut s = ObservableSeries::default();
    if path.extension().is_some_and(|e| e == "json") {
        let doc: Value = serde_json::from_slice(&bytes).map_err(|e| bad(e.to_string()))?;
        let cols = doc.get("columns").ok_or_else(|| bad("missing \"columns\"".into()))?;
        let col = |k: &str| -> Result<Vec<f64>, ReadError> {
            serde_json::from_value(cols.get(k).cloned().unwrap_or(Value::Null))
                .map_err(|e| bad(format!("column {k}: {e}")))
        };
        let (t, c, e, p, n) = (col("t")?, col("c_k")?, col("s_k")?, col("phi0")?, col("norm_error")?);
        let a: Vec<usize> = serde_json::from_value(cols.get("active_size").cloned().unwrap_or(Value::Null))
            .map_err(|e| bad(format!("column active_size: {e}")))?;
        if [c.len(), e.len(), p.len(), n.len(), a.len()].iter().any(|&l| l != t.len()) {
            return Err(bad("columns differ in length".into()));
        }
        for i in 0..t.len() {
            s.push(t[i], c[i], e[i], p[i], n[i], a[i]).map_err(|e| bad(e.to_string()))?;
        }
    } else {
        let mut r = csv::Reader::from_reader(bytes.as_slice());
        let header = r.headers().map_err(|e| bad(e.to_string()))?.clone();
        if header.iter().ne(CSV_HEADER) {
            return Err(bad(format!("unexpected header {:?}", header.iter().collect::<Vec<_>>())));
        }
        for (row, rec) in r.records().enumerate() {
            let rec = rec.map_err(|e| bad(e.to_string()))?;
            let f = |k: usize| -> Result<f64, ReadError> {
                rec[k].parse().map_err(|_| bad(format!("row {}: bad number {:?}", row + 1, &rec[k])))
            };
            let size: usize = rec[5].parse().map_err(|_| bad(format!("row {}: bad active_size", row + 1)))?;
            s.push(f(0)?, f(1)?, f(2)?, f(3)?, f(4)?, size).map_err(|e| bad(e.to_string()))?;
        }
    }
    Ok(s)
}

pub fn fit_report(fit: &FitResult, verdict: &BoundVerdict) -> Value {
    json!({
        "eta_tilde": fit.eta_tilde,
        "intercept": fit.intercept,
        "lnln_coefficient": fit.lnln_coefficient,
        "window": {
            "c_min": fit.c_window.0,
            "c_max": fit.c_window.1,
            "t_min": fit.t_window.0,
            "t_max": fit.t_window.1,
        },
        "rms_residual": fit.rms_residual,
        "samples": fit.sample_count,
        "weighting": fit.weighting,
        "bound": verdict,
    })
}

pub fn json_bytes(v: &Value) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(v).expect("values serialize");
    out.push(b'\n');
    out
}

/// Writes `bytes` to `dir/name`, returning the path.
pub fn write(dir: &Path, name: &str, bytes: &[u8]) -> io::Result<PathBuf> {
    let path = dir.join(name);
    fs::write(&path, bytes)?;
    Ok(path)
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Writes `manifest.json` listing `files` (relative to `dir`) with their
/// sizes and checksums.
pub fn write_manifest(dir: &Path, command: &str, files: &[PathBuf]) -> io::Result<PathBuf> {
    let mut entries = Vec::with_capacity(files.len());
    let mut names: Vec<&PathBuf> = files.iter().collect();
    names.sort();
    for path in names {
        let bytes = fs::read(path)?;
        let rel = path.strip_prefix(dir).unwrap_or(path);
        entries.push(json!({
            "path": rel.to_string_lossy(),
            "bytes": bytes.len(),
            "sha256": sha256_hex(&bytes),
        }));
    }
    let created = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let doc = json!({
        "command": command,
        "tool_version": env!("CARGO_PKG_VERSION"),
        "created_unix_seconds": created,
        "files": entries,
    });
    write(dir, "manifest.json", &json_bytes(&doc))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip_in_shortest_form() {
        for x in [0.1, 1.0, 1e-20, 123456.789, f64::MIN_POSITIVE, 1.0 / 3.0] {
            let s = fmt_f64(x);
            assert_eq!(s.parse::<f64>().unwrap(), x);
        }
        assert_eq!(fmt_f64(0.5), "0.5");
        assert_eq!(fmt_f64(1e-20), "1e-20");
    }

    #[test]
    fn csv_layout() {
        let mut s = ObservableSeries::default();
        s.push(0.0, 0.0, 0.0, 1.0, 0.0, 64).unwrap();
        s.push(0.5, 0.25, 0.1, 0.9, 1e-15, 64).unwrap();
        let text = String::from_utf8(series_csv(&s)).unwrap();
        assert_eq!(text, "t,c_k,s_k,phi0,norm_error,active_size\n0.0,0.0,0.0,1.0,0.0,64\n0.5,0.25,0.1,0.9,1e-15,64\n");
    }

    #[test]
    fn checksum_of_empty_input() {
        assert_eq!(sha256_hex(b""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    }
}
