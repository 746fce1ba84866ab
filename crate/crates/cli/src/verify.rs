//! Re-checks stored artifacts against the invariants a run must satisfy.

use std::fs;
use std::path::Path;

use semistiff::minimize::{Status, MONOTONE_SLACK};

use crate::record::{summary_csv, RunRecord};

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Check {
            name: name.into(),
            passed,
            detail: detail.into(),
        }
    }

    pub fn line(&self) -> String {
        let tag = if self.passed { "PASS" } else { "FAIL" };
        if self.detail.is_empty() {
            format!("{tag} {}", self.name)
        } else {
            format!("{tag} {}: {}", self.name, self.detail)
        }
    }
}

/// All checks for a run directory. A directory that cannot be read, holds
/// no runs, or mixes config hashes yields a single failing check.
pub fn verify(dir: &Path) -> Vec<Check> {
    let text = match fs::read_to_string(dir.join("runs.jsonl")) {
        Ok(t) => t,
        Err(_) => return vec![Check::new("runs", false, "no runs found")],
    };
    let mut records = Vec::new();
    for (k, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        match serde_json::from_str::<RunRecord>(line) {
            Ok(r) => records.push(r),
            Err(e) => return vec![Check::new("runs", false, format!("runs.jsonl line {}: {e}", k + 1))],
        }
    }
    let mut checks = Vec::new();
    let summary = fs::read_to_string(dir.join("summary.csv"));
    match &summary {
        Ok(s) if *s == summary_csv(&records) => checks.push(Check::new("summary matches runs", true, "")),
        Ok(_) => checks.push(Check::new("summary matches runs", false, "summary.csv differs from runs.jsonl")),
        Err(_) => checks.push(Check::new("summary matches runs", false, "summary.csv missing")),
    }
    if records.is_empty() {
        checks.insert(0, Check::new("runs", false, "no runs found"));
        return checks;
    }
    let hash = &records[0].config_hash;
    if let Some(other) = records.iter().find(|r| &r.config_hash != hash) {
        return vec![Check::new(
            "config hash",
            false,
            format!("mixed config hashes {hash} and {}; refusing to verify", other.config_hash),
        )];
    }
    checks.insert(0, Check::new("config hash", true, hash.clone()));
    for (k, r) in records.iter().enumerate() {
        let name = |what: &str| format!("run {k} ({}) {what}", r.stem());
        if let Some(e) = &r.error {
            checks.push(Check::new(name("completed"), false, e.clone()));
            continue;
        }
        if let (Some((p, q)), Some(v)) = (r.final_degrees, &r.vortices) {
            let total = v.total_winding();
            checks.push(Check::new(
                name("degree identity"),
                q - p == total,
                format!("q − p = {}, vortex windings sum to {total}", q - p),
            ));
        }
        let Some(desc) = &r.descent else {
            continue;
        };
        if let Some(got) = r.final_degrees {
            checks.push(Check::new(
                name("sector degrees"),
                got == (r.p, r.q),
                format!("target ({}, {}), final {got:?}", r.p, r.q),
            ));
        }
        let worst = desc
            .energy_trace
            .windows(2)
            .map(|w| w[1].total - w[0].total - MONOTONE_SLACK * w[0].total.abs().max(1.0))
            .fold(f64::NEG_INFINITY, f64::max);
        checks.push(Check::new(
            name("monotone trace"),
            desc.monotone && !(worst > 0.0),
            if worst > 0.0 { format!("energy rises by {worst:e}") } else { String::new() },
        ));
        if let Some(a) = r.abdeg {
            let (lo, hi) = (r.d as f64 - 0.5, r.d as f64 + 0.5);
            let inside = a >= lo && a <= hi;
            let escaped = desc.status == Status::SectorEscape;
            checks.push(Check::new(
                name("abdeg window"),
                inside != escaped,
                format!("abdeg {a:.6} in [{lo}, {hi}], status {:?}", desc.status),
            ));
        }
        if desc.converged {
            checks.push(Check::new(
                name("stopping rule"),
                desc.residual <= desc.grad_tol,
                format!("residual {:e}, tolerance {:e}", desc.residual, desc.grad_tol),
            ));
        }
    }
    checks
}
