//! One line of `runs.jsonl` and the summary table derived from it.

use serde::{Deserialize, Serialize};

use semistiff::field::EnergyReport;
use semistiff::minimize::{MinimizeResult, Status};
use semistiff::topology::VortexSet;

pub const SUMMARY_HEADER: &str = "p,q,d,epsilon,energy,dirichlet,potential,abdeg,n_vortices,min_vortex_dist";

/// What the minimizer reported, traces included.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Descent {
    pub status: Status,
    pub converged: bool,
    pub iterations: usize,
    pub residual: f64,
    pub grad_tol: f64,
    pub record_every: usize,
    pub seeded_from: Option<(i32, i32)>,
    pub monotone: bool,
    pub degree_rejections: usize,
    pub pinned_nodes: usize,
    pub energy_trace: Vec<EnergyReport>,
    pub abdeg_trace: Vec<f64>,
    pub residual_trace: Vec<f64>,
}

impl Descent {
    pub fn new(r: &MinimizeResult, grad_tol: f64, record_every: usize, seeded_from: Option<(i32, i32)>) -> Self {
        Descent {
            status: r.status,
            converged: r.converged,
            iterations: r.iterations,
            residual: r.residual,
            grad_tol,
            record_every,
            seeded_from,
            monotone: r.monotone,
            degree_rejections: r.degree_rejections,
            pinned_nodes: r.pinned_nodes,
            energy_trace: r.energy_trace.clone(),
            abdeg_trace: r.abdeg_trace.clone(),
            residual_trace: r.residual_trace.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub config_hash: String,
    /// `sector` for ladder runs; `pair` or `comparison` for the vortex contrast.
    pub label: String,
    pub seed: u64,
    pub epsilon: f64,
    pub p: i32,
    pub q: i32,
    pub d: i32,
    pub grid: (usize, usize),
    pub elapsed_s: f64,
    #[serde(default)]
    pub error: Option<String>,
    #[serde(default)]
    pub energy: Option<EnergyReport>,
    #[serde(default)]
    pub abdeg: Option<f64>,
    #[serde(default)]
    pub final_degrees: Option<(i32, i32)>,
    #[serde(default)]
    pub vortices: Option<VortexSet>,
    #[serde(default)]
    pub descent: Option<Descent>,
}

impl RunRecord {
    pub fn stem(&self) -> String {
        format!("{}_eps{}_p{}q{}d{}_seed{}", self.label, self.epsilon, self.p, self.q, self.d, self.seed)
    }

    pub fn summary_row(&self) -> String {
        let opt = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
        let n_vortices = self.vortices.as_ref().map(|v| v.len().to_string()).unwrap_or_default();
        let min_dist = self.vortices.as_ref().and_then(|v| v.min_boundary_distance());
        format!(
            "{},{},{},{},{},{},{},{},{},{}",
            self.p,
            self.q,
            self.d,
            self.epsilon,
            opt(self.energy.map(|e| e.total)),
            opt(self.energy.map(|e| e.dirichlet)),
            opt(self.energy.map(|e| e.potential)),
            opt(self.abdeg),
            n_vortices,
            opt(min_dist),
        )
    }
}

pub fn summary_csv(records: &[RunRecord]) -> String {
    let mut out = String::from(SUMMARY_HEADER);
    out.push('\n');
    for r in records {
        out.push_str(&r.summary_row());
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record() -> RunRecord {
        RunRecord {
            config_hash: "abc".into(),
            label: "sector".into(),
            seed: 1,
            epsilon: 0.02,
            p: 1,
            q: 0,
            d: 1,
            grid: (16, 32),
            elapsed_s: 0.5,
            error: None,
            energy: Some(EnergyReport { dirichlet: 5.5, potential: 0.5, total: 6.0, epsilon: 0.02 }),
            abdeg: Some(0.99),
            final_degrees: Some((1, 0)),
            vortices: None,
            descent: None,
        }
    }

    #[test]
    fn summary_rows_follow_the_header() {
        let csv = summary_csv(&[record()]);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], SUMMARY_HEADER);
        assert_eq!(lines[1], "1,0,1,0.02,6,5.5,0.5,0.99,,");
        assert_eq!(lines[1].split(',').count(), lines[0].split(',').count());
    }

    #[test]
    fn records_round_trip() {
        let r = record();
        let line = serde_json::to_string(&r).unwrap();
        assert_eq!(serde_json::from_str::<RunRecord>(&line).unwrap(), r);
        assert_eq!(r.stem(), "sector_eps0.02_p1q0d1_seed1");
    }
}
