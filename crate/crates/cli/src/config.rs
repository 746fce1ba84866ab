//! Experiment configuration: TOML-style `key = value` lines grouped in
//! sections, validated against the grid and the spacing rule.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use semistiff::{Annulus, Grid, Mesh};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("{0}")]
    Parse(String),
    #[error("invalid `{field}`: {reason}")]
    Field { field: String, reason: String },
}

fn field_error(field: impl Into<String>, reason: impl Into<String>) -> ConfigError {
    ConfigError::Field {
        field: field.into(),
        reason: reason.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    /// Sector minimizations seeded down the degree ladder.
    Ladder,
    /// Vortex/ghost pairs against an interior vortex, by quadrature.
    AppendixA,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Experiment {
    pub kind: Kind,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
}

fn default_seeds() -> Vec<u64> {
    vec![0]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnnulusSection {
    pub r_inner: f64,
    pub r_outer: f64,
}

/// Grid sizes; when absent, the grid is derived from the smallest ε.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub n_radial: Option<usize>,
    pub n_angular: Option<usize>,
    #[serde(default = "default_aspect")]
    pub aspect: f64,
}

impl Default for GridSection {
    fn default() -> Self {
        GridSection {
            n_radial: None,
            n_angular: None,
            aspect: default_aspect(),
        }
    }
}

fn default_aspect() -> f64 {
    2.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    pub epsilons: Vec<f64>,
    #[serde(default = "default_d")]
    pub d: i32,
    /// (p, q) pairs, in ladder order.
    #[serde(default)]
    pub sectors: Vec<(i32, i32)>,
}

fn default_d() -> i32 {
    1
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MinimizeSection {
    pub max_iters: Option<usize>,
    pub grad_tol: Option<f64>,
    pub record_every: Option<usize>,
    pub mass_shift: Option<f64>,
    pub vortex_threshold: Option<f64>,
    pub metric: Option<semistiff::minimize::Metric>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairSection {
    /// Distance of the vortex from the outer circle, in units of ε.
    #[serde(default = "default_offset_ratio")]
    pub offset_ratio: f64,
    #[serde(default)]
    pub angle: f64,
    /// Radius of the interior comparison vortex (on the positive axis).
    pub comparison_radius: Option<f64>,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
}

impl Default for PairSection {
    fn default() -> Self {
        PairSection {
            offset_ratio: default_offset_ratio(),
            angle: 0.0,
            comparison_radius: None,
            tolerance: default_tolerance(),
        }
    }
}

fn default_offset_ratio() -> f64 {
    0.1
}

fn default_tolerance() -> f64 {
    1e-8
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub dir: Option<PathBuf>,
    /// Also write every final field as CSV.
    #[serde(default)]
    pub fields: bool,
    #[serde(default = "default_plots")]
    pub plots: bool,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection {
            dir: None,
            fields: false,
            plots: default_plots(),
        }
    }
}

fn default_plots() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub annulus: AnnulusSection,
    #[serde(default)]
    pub grid: GridSection,
    pub sweep: Sweep,
    #[serde(default)]
    pub minimize: MinimizeSection,
    #[serde(default)]
    pub pair: PairSection,
    #[serde(default)]
    pub output: OutputSection,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text).map_err(|e| match e {
            ConfigError::Parse(msg) => ConfigError::Parse(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn annulus(&self) -> Annulus {
        Annulus::new(self.annulus.r_inner, self.annulus.r_outer).expect("validated")
    }

    /// The declared grid, or the coarsest grid obeying the spacing rule for
    /// every ε of the sweep.
    pub fn grid(&self) -> Grid {
        match (self.grid.n_radial, self.grid.n_angular) {
            (Some(n_r), Some(n_t)) => Grid::new(n_r, n_t).expect("validated"),
            _ => {
                let eps = self.sweep.epsilons.iter().copied().fold(f64::INFINITY, f64::min);
                Grid::for_epsilon(&self.annulus(), eps, self.grid.aspect).expect("validated")
            }
        }
    }

    fn validate(&self) -> Result<(), ConfigError> {
        let a = Annulus::new(self.annulus.r_inner, self.annulus.r_outer)
            .map_err(|e| field_error("annulus", e.to_string()))?;
        if self.experiment.seeds.is_empty() {
            return Err(field_error("experiment.seeds", "needs at least one seed"));
        }
        if self.grid.n_radial.is_some() != self.grid.n_angular.is_some() {
            return Err(field_error("grid", "give both n_radial and n_angular, or neither"));
        }
        if !(self.grid.aspect > 0.0) {
            return Err(field_error("grid.aspect", "must be positive"));
        }
        if let (Some(n_r), Some(n_t)) = (self.grid.n_radial, self.grid.n_angular) {
            Grid::new(n_r, n_t).map_err(|e| field_error("grid", e.to_string()))?;
        }
        for (k, &eps) in self.sweep.epsilons.iter().enumerate() {
            if !(eps > 0.0 && eps.is_finite()) {
                return Err(field_error(format!("sweep.epsilons[{k}]"), format!("must be positive, got {eps}")));
            }
        }
        if self.sweep.epsilons.is_empty() {
            return Ok(());
        }
        let mesh = Mesh::new(a, self.grid());
        for (k, &eps) in self.sweep.epsilons.iter().enumerate() {
            mesh.check_spacing_rule(eps).map_err(|e| {
                field_error(
                    format!("sweep.epsilons[{k}]"),
                    format!("{eps} with grid {}x{}: {e}", mesh.n_r(), mesh.n_t()),
                )
            })?;
        }
        let d = self.sweep.d;
        if self.experiment.kind == Kind::Ladder {
            let mut last = 0;
            for (k, &(p, q)) in self.sweep.sectors.iter().enumerate() {
                if p > d || q > d {
                    return Err(field_error(format!("sweep.sectors[{k}]"), format!("({p}, {q}) needs p ≤ d and q ≤ d")));
                }
                let rung = (d - p).abs() + (d - q).abs();
                if rung < last {
                    return Err(field_error(
                        format!("sweep.sectors[{k}]"),
                        "sectors must be listed in increasing |d − p| + |d − q|",
                    ));
                }
                last = rung;
            }
        }
        let m = &self.minimize;
        let positive = |name: &str, v: Option<f64>| match v {
            Some(x) if !(x > 0.0) => Err(field_error(format!("minimize.{name}"), format!("must be positive, got {x}"))),
            _ => Ok(()),
        };
        positive("grad_tol", m.grad_tol)?;
        positive("mass_shift", m.mass_shift)?;
        if m.record_every == Some(0) {
            return Err(field_error("minimize.record_every", "must be at least 1"));
        }
        if let Some(t) = m.vortex_threshold {
            if !(t > 0.0 && t < 1.0) {
                return Err(field_error("minimize.vortex_threshold", format!("need 0 < t < 1, got {t}")));
            }
        }
        if self.experiment.kind == Kind::AppendixA {
            if (a.r_outer() - 1.0).abs() > 1e-12 {
                return Err(field_error("annulus.r_outer", "the vortex pair lives on a chart with r_outer = 1"));
            }
            let p = &self.pair;
            if !(p.offset_ratio > 0.0 && p.offset_ratio < 1.0) {
                return Err(field_error("pair.offset_ratio", "need 0 < ratio < 1"));
            }
            if !(p.tolerance > 0.0) {
                return Err(field_error("pair.tolerance", "must be positive"));
            }
            if let Some(r) = p.comparison_radius {
                if !(r > a.r_inner() && r < a.r_outer()) {
                    return Err(field_error("pair.comparison_radius", "must lie inside the annulus"));
                }
            }
        }
        Ok(())
    }

    /// Hex digest identifying everything that affects results. The output
    /// directory is left out.
    pub fn hash(&self) -> String {
        let mut canonical = self.clone();
        canonical.output.dir = None;
        let json = serde_json::to_string(&canonical).expect("config serializes");
        let digest = Sha256::digest(json.as_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const LADDER: &str = r#"
[experiment]
kind = "ladder"
seeds = [3]

[annulus]
r_inner = 1.0
r_outer = 2.718281828459045

[sweep]
epsilons = [0.2, 0.1]
d = 1
sectors = [[1, 1], [1, 0]]
"#;

    #[test]
    fn parses_and_derives_grid() {
        let c = ExperimentConfig::parse(LADDER).unwrap();
        assert_eq!(c.experiment.kind, Kind::Ladder);
        assert_eq!(c.sweep.sectors, vec![(1, 1), (1, 0)]);
        let g = c.grid();
        let m = Mesh::new(c.annulus(), g);
        assert!(m.check_spacing_rule(0.1).is_ok());
        assert!(c.output.plots && !c.output.fields);
    }

    #[test]
    fn unknown_keys_and_syntax_errors_name_the_line() {
        let bad = LADDER.replace("d = 1", "d = 1\ncolour = 3");
        let e = ExperimentConfig::parse(&bad).unwrap_err().to_string();
        assert!(e.contains("colour") && e.contains("line"), "{e}");
        let e = ExperimentConfig::parse("[sweep\n").unwrap_err().to_string();
        assert!(e.contains("line 1"), "{e}");
    }

    #[test]
    fn spacing_rule_is_enforced() {
        let bad = LADDER.replace("[sweep]", "[grid]\nn_radial = 32\nn_angular = 64\n\n[sweep]");
        let e = ExperimentConfig::parse(&bad).unwrap_err().to_string();
        assert!(e.contains("sweep.epsilons[0]"), "{e}");
    }

    #[test]
    fn ladder_order_and_range() {
        let bad = LADDER.replace("[[1, 1], [1, 0]]", "[[1, 0], [1, 1]]");
        assert!(ExperimentConfig::parse(&bad).unwrap_err().to_string().contains("sectors[1]"));
        let bad = LADDER.replace("[[1, 1], [1, 0]]", "[[2, 1]]");
        assert!(ExperimentConfig::parse(&bad).unwrap_err().to_string().contains("sectors[0]"));
    }

    #[test]
    fn hash_ignores_output_dir_only() {
        let a = ExperimentConfig::parse(LADDER).unwrap();
        let b = ExperimentConfig::parse(&format!("{LADDER}\n[output]\ndir = \"x\"\n")).unwrap();
        assert_eq!(a.hash(), b.hash());
        let c = ExperimentConfig::parse(&LADDER.replace("[3]", "[4]")).unwrap();
        assert_ne!(a.hash(), c.hash());
        assert_eq!(a.hash().len(), 16);
    }

    #[test]
    fn shipped_configs_validate() {
        let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
        for name in ["ladder_d1.cfg", "appendix_a.cfg"] {
            ExperimentConfig::load(&root.join(name)).unwrap();
        }
    }
}
