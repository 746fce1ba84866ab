//! Executes the runs a config declares and writes the artifacts.

use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use num_complex::Complex64;
use rayon::prelude::*;

use semistiff::minimize::{sector_protocol, MinimizeConfig};
use semistiff::testmaps::{continuum_energy, factorization_diagnostic, InteriorVortex, PlanarMap, VortexPair};
use semistiff::topology::{abdeg, boundary_degrees, find_vortices, Vortex, VortexSet};
use semistiff::{solve_v, ComplexField, Mesh, ScalarField};

use crate::config::{ExperimentConfig, Kind};
use crate::record::{summary_csv, Descent, RunRecord};
use crate::svg;

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub workers: usize,
    pub out: PathBuf,
    pub seed: Option<u64>,
}

/// A record plus the field it describes, when there is one.
struct Outcome {
    record: RunRecord,
    field: Option<ComplexField>,
}

#[derive(Debug, Clone, Copy)]
struct Job {
    epsilon: f64,
    seed: u64,
}

pub struct RunReport {
    pub records: Vec<RunRecord>,
    pub failures: usize,
}

pub fn run(cfg: &ExperimentConfig, opts: &RunOptions) -> anyhow::Result<RunReport> {
    let mut cfg = cfg.clone();
    if let Some(seed) = opts.seed {
        cfg.experiment.seeds = vec![seed];
    }
    let hash = cfg.hash();
    let seeds = match cfg.experiment.kind {
        Kind::Ladder => cfg.experiment.seeds.clone(),
        // the pair construction is deterministic; one pass suffices
        Kind::AppendixA => cfg.experiment.seeds[..1].to_vec(),
    };
    let empty = cfg.sweep.epsilons.is_empty() || (cfg.experiment.kind == Kind::Ladder && cfg.sweep.sectors.is_empty());
    let jobs: Vec<Job> = if empty {
        Vec::new()
    } else {
        seeds
            .iter()
            .flat_map(|&seed| cfg.sweep.epsilons.iter().map(move |&epsilon| Job { epsilon, seed }))
            .collect()
    };
    let mesh = Mesh::new(cfg.annulus(), cfg.grid());
    let pool = rayon::ThreadPoolBuilder::new().num_threads(opts.workers.max(1)).build()?;
    let outcomes: Vec<Vec<Outcome>> = pool.install(|| {
        jobs.par_iter()
            .map(|job| match cfg.experiment.kind {
                Kind::Ladder => ladder_job(&cfg, &mesh, &hash, *job),
                Kind::AppendixA => pair_job(&cfg, &mesh, &hash, *job),
            })
            .collect()
    });

    fs::create_dir_all(&opts.out)?;
    let mut records = Vec::new();
    let mut lines = String::new();
    for outcome in outcomes.into_iter().flatten() {
        write_artifacts(&cfg, &opts.out, &outcome)?;
        lines.push_str(&serde_json::to_string(&outcome.record)?);
        lines.push('\n');
        records.push(outcome.record);
    }
    fs::write(opts.out.join("runs.jsonl"), lines)?;
    fs::write(opts.out.join("summary.csv"), summary_csv(&records))?;
    let failures = records.iter().filter(|r| r.error.is_some()).count();
    Ok(RunReport { records, failures })
}

fn minimize_config(cfg: &ExperimentConfig, mesh: &Mesh, eps: f64) -> MinimizeConfig {
    let mut m = MinimizeConfig::new(mesh, eps, cfg.sweep.d);
    let s = &cfg.minimize;
    if let Some(v) = s.max_iters {
        m.max_iters = v;
    }
    if let Some(v) = s.grad_tol {
        m.grad_tol = v;
    }
    if let Some(v) = s.record_every {
        m.record_every = v;
    }
    if let Some(v) = s.mass_shift {
        m.mass_shift = v;
    }
    if let Some(v) = s.vortex_threshold {
        m.vortex_threshold = v;
    }
    if let Some(v) = s.metric {
        m.metric = v;
    }
    m
}

fn blank(cfg: &ExperimentConfig, mesh: &Mesh, hash: &str, job: Job, label: &str, (p, q): (i32, i32)) -> RunRecord {
    RunRecord {
        config_hash: hash.to_string(),
        label: label.to_string(),
        seed: job.seed,
        epsilon: job.epsilon,
        p,
        q,
        d: cfg.sweep.d,
        grid: (mesh.n_r(), mesh.n_t()),
        elapsed_s: 0.0,
        error: None,
        energy: None,
        abdeg: None,
        final_degrees: None,
        vortices: None,
        descent: None,
    }
}

fn ladder_job(cfg: &ExperimentConfig, mesh: &Arc<Mesh>, hash: &str, job: Job) -> Vec<Outcome> {
    let mcfg = minimize_config(cfg, mesh, job.epsilon);
    let start = Instant::now();
    match sector_protocol(mesh, &cfg.sweep.sectors, &mcfg, job.seed) {
        Ok(runs) => {
            let elapsed = start.elapsed().as_secs_f64() / runs.len().max(1) as f64;
            runs.into_iter()
                .map(|run| {
                    let r = run.result;
                    let mut record = blank(cfg, mesh, hash, job, "sector", (run.p, run.q));
                    record.elapsed_s = elapsed;
                    record.energy = Some(r.energy);
                    record.abdeg = Some(r.abdeg);
                    record.final_degrees = Some(r.final_degrees);
                    record.vortices = Some(r.vortices.clone());
                    record.descent = Some(Descent::new(&r, mcfg.grad_tol, mcfg.record_every, run.seeded_from));
                    Outcome { record, field: r.field }
                })
                .collect()
        }
        Err(e) => cfg
            .sweep
            .sectors
            .iter()
            .map(|&pq| {
                let mut record = blank(cfg, mesh, hash, job, "sector", pq);
                record.elapsed_s = start.elapsed().as_secs_f64();
                record.error = Some(e.to_string());
                Outcome { record, field: None }
            })
            .collect(),
    }
}

fn pair_job(cfg: &ExperimentConfig, mesh: &Arc<Mesh>, hash: &str, job: Job) -> Vec<Outcome> {
    let eps = job.epsilon;
    let a = *mesh.annulus();
    let pc = &cfg.pair;
    let zeta = Complex64::from_polar(a.r_outer() - pc.offset_ratio * eps, pc.angle);
    let center = pc.comparison_radius.unwrap_or(0.5 * (a.r_inner() + a.r_outer()));
    let comparison = InteriorVortex {
        d: 0,
        center: Complex64::new(center, 0.0),
        eps,
    };
    let v = match solve_v(mesh) {
        Ok(v) => v,
        Err(e) => {
            let mut r = blank(cfg, mesh, hash, job, "pair", (0, 1));
            r.error = Some(e.to_string());
            return vec![Outcome { record: r, field: None }];
        }
    };
    let evaluate = |label: &str, map: &dyn PlanarMap, zero: Option<Complex64>| -> Outcome {
        let start = Instant::now();
        let field = map.sample(mesh);
        let result = (|| -> semistiff::Result<RunRecord> {
            let (p, q) = boundary_degrees(&field)?;
            let mut r = blank(cfg, mesh, hash, job, label, (p, q));
            let ab = abdeg(&field, &v)?;
            r.d = ab.round() as i32;
            r.energy = Some(continuum_energy(map, &a, eps, pc.tolerance));
            r.abdeg = Some(ab);
            r.final_degrees = Some((p, q));
            r.vortices = Some(match zero {
                Some(z) => VortexSet {
                    entries: vec![Vortex {
                        x: z.re,
                        y: z.im,
                        winding: 1,
                        boundary_distance: a.boundary_distance(z.norm()),
                    }],
                },
                None => find_vortices(&field, 0.5)?,
            });
            Ok(r)
        })();
        let mut record = result.unwrap_or_else(|e| {
            let mut r = blank(cfg, mesh, hash, job, label, (0, 0));
            r.error = Some(e.to_string());
            r
        });
        record.elapsed_s = start.elapsed().as_secs_f64();
        Outcome { record, field: Some(field) }
    };
    let pair = match VortexPair::new(zeta) {
        Ok(p) => p,
        Err(e) => {
            let mut r = blank(cfg, mesh, hash, job, "pair", (0, 1));
            r.error = Some(e.to_string());
            return vec![Outcome { record: r, field: None }];
        }
    };
    let sampled = pair.sample(mesh);
    let zero = factorization_diagnostic(&pair, &sampled).zero;
    vec![evaluate("pair", &pair, Some(zero)), evaluate("comparison", &comparison, None)]
}

fn write_artifacts(cfg: &ExperimentConfig, out: &Path, o: &Outcome) -> anyhow::Result<()> {
    let Some(field) = &o.field else {
        return Ok(());
    };
    let stem = o.record.stem();
    if cfg.output.plots {
        let dir = out.join("plots");
        fs::create_dir_all(&dir)?;
        let title = format!("{stem}: |u|");
        fs::write(dir.join(format!("{stem}_modulus.svg")), svg::modulus_map(field, &title))?;
        let title = format!("{stem}: arg u");
        fs::write(dir.join(format!("{stem}_phase.svg")), svg::phase_map(field, &title))?;
        if let Some(d) = &o.record.descent {
            let title = format!("{stem}: energy");
            fs::write(
                dir.join(format!("{stem}_energy.svg")),
                svg::energy_trace(&d.energy_trace, d.record_every, &title),
            )?;
        }
    }
    if cfg.output.fields {
        let dir = out.join("fields");
        fs::create_dir_all(&dir)?;
        field.write_csv(BufWriter::new(fs::File::create(dir.join(format!("{stem}_field.csv")))?))?;
        let modulus = ScalarField {
            mesh: field.mesh.clone(),
            values: field.values.iter().map(|z| z.norm()).collect(),
        };
        modulus.write_csv(BufWriter::new(fs::File::create(dir.join(format!("{stem}_modulus.csv")))?))?;
    }
    Ok(())
}
