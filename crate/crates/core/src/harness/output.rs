//! Stable file formats: JSON-lines traces, diagnostics CSV and metadata sidecars.
//! Reals are written with 17 significant digits.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use crate::lyapunov::DiagnosticsSeries;
use crate::methods::{Method, Trace};
use crate::{Result, Vector};

pub const DIAGNOSTICS_HEADER: &str = "k,V,W,E,gap,grad_norm,step_norm,sum_t2_grad2,sum_st_gap";

/// `d.dddddddddddddddde±x`, 17 significant digits.
pub fn num(v: f64) -> String {
    format!("{v:.16e}")
}

fn array(v: &Vector) -> String {
    let items: Vec<String> = v.iter().map(|x| num(*x)).collect();
    format!("[{}]", items.join(","))
}

/// Header fields beyond the trace itself.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceHeader {
    pub iterations: usize,
    pub record_every: usize,
    pub dense_prefix: usize,
}

/// JSON-lines body: a header line, then one line per retained record.
pub fn trace_jsonl(trace: &Trace, header: &TraceHeader, retain: impl Fn(usize) -> bool) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{{\"type\":\"header\",\"method\":\"{}\",\"config_hash\":\"{}\",\"seed\":{},\"dim\":{},\"iterations\":{},\"record_every\":{},\"dense_prefix\":{},\"start\":{}}}",
        trace.method.name(),
        trace.config_hash,
        trace.seed,
        trace.start.len(),
        header.iterations,
        header.record_every,
        header.dense_prefix,
        array(&trace.start),
    );
    for rec in trace.records.iter().filter(|r| retain(r.k)) {
        let _ = write!(out, "{{\"k\":{}", rec.k);
        match trace.method {
            Method::Nag => {
                let x = rec.x.as_ref().unwrap_or(&rec.y);
                let _ = write!(out, ",\"x\":{}", array(x));
            }
            Method::Rag => {
                let _ = write!(out, ",\"y\":{},\"w\":{}", array(&rec.y), array(&rec.w));
            }
        }
        if rec.e.iter().any(|v| *v != 0.0) {
            let _ = write!(out, ",\"e\":{}", array(&rec.e));
        }
        let _ = writeln!(
            out,
            ",\"s\":{},\"alpha\":{},\"gap\":{},\"grad_norm\":{},\"step_norm\":{}}}",
            num(rec.s),
            num(rec.coef),
            num(rec.gap),
            num(rec.grad_norm),
            num(rec.step_norm)
        );
    }
    out
}

/// Diagnostics CSV; undefined entries are empty fields.
pub fn diagnostics_csv(d: &DiagnosticsSeries, retain: impl Fn(usize) -> bool) -> String {
    let opt = |v: Option<f64>| v.map(num).unwrap_or_default();
    let mut out = String::new();
    out.push_str(DIAGNOSTICS_HEADER);
    out.push('\n');
    for i in 0..d.k.len() {
        if !retain(d.k[i]) {
            continue;
        }
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            d.k[i],
            opt(d.v[i]),
            opt(d.w[i]),
            opt(d.e[i]),
            num(d.gap[i]),
            num(d.grad_norm[i]),
            num(d.step_norm[i]),
            num(d.sum_t2_grad2[i]),
            num(d.sum_st_gap[i]),
        );
    }
    out
}

/// Sidecar metadata; the only place a timestamp appears.
pub fn meta_json(command: &str, config_hash: &str, files: &[&Path]) -> String {
    let created = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let names: Vec<String> = files
        .iter()
        .map(|p| format!("\"{}\"", p.file_name().unwrap_or_default().to_string_lossy()))
        .collect();
    format!(
        "{{\"tool\":\"ravine {}\",\"command\":\"{command}\",\"config_hash\":\"{config_hash}\",\"created_unix\":{created},\"files\":[{}]}}\n",
        env!("CARGO_PKG_VERSION"),
        names.join(",")
    )
}

/// Write all files or none: on any failure the ones already written are removed.
pub fn write_all(files: &[(PathBuf, String)]) -> Result<()> {
    for (i, (path, body)) in files.iter().enumerate() {
        if let Err(e) = std::fs::write(path, body) {
            for (p, _) in &files[..=i] {
                let _ = std::fs::remove_file(p);
            }
            return Err(e.into());
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_digits() {
        assert_eq!(num(0.1), "1.0000000000000001e-1");
        assert_eq!(num(1.0), "1.0000000000000000e0");
        assert_eq!(num(0.1).parse::<f64>().unwrap(), 0.1);
        let x = 1.0 / 3.0;
        assert_eq!(num(x).parse::<f64>().unwrap(), x);
    }

    #[test]
    fn write_all_cleans_up() {
        let dir = tempfile::tempdir().unwrap();
        let ok = dir.path().join("a.txt");
        let bad = dir.path().join("missing").join("b.txt");
        let files = vec![(ok.clone(), "a".into()), (bad, "b".into())];
        assert!(write_all(&files).is_err());
        assert!(!ok.exists());
    }
}
