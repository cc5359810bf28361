//! Experiment configuration: TOML file values overridden by flags.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::CliError;
use crate::nef_family::{FamilyKind, FamilySpec};
use crate::qh_verify::{qh_params_from_theorem, DEFAULT_Z_THRESHOLD};
use crate::randomization::check_admissible;

pub const DEFAULT_PATHS: usize = 1_000_000;
pub const DEFAULT_GRID: [f64; 9] = [0.25, 0.3, 0.5, 0.7, 0.75, 1.0, 1.5, 2.0, 3.0];
pub const DEFAULT_PAIRS: [[f64; 2]; 4] = [[0.3, 0.7], [0.5, 2.0], [1.0, 1.0], [1.5, 3.0]];
pub const DEFAULT_TRIPLES: [[f64; 3]; 5] = [
    [0.25, 0.5, 0.75],
    [1.5, 2.0, 3.0],
    [0.5, 1.0, 2.0],
    [0.3, 0.7, 2.0],
    [0.3, 0.7, 1.5],
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Json,
    Csv,
}

/// Raw settings, as read from a file or collected from flags.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Settings {
    pub family: Option<String>,
    pub q: Option<f64>,
    pub p: Option<f64>,
    pub r: Option<f64>,
    pub paths: Option<usize>,
    pub seed: Option<u64>,
    pub grid: Option<Vec<f64>>,
    pub triples: Option<Vec<[f64; 3]>>,
    pub pairs: Option<Vec<[f64; 2]>>,
    pub threshold: Option<f64>,
    pub threads: Option<usize>,
    pub format: Option<Format>,
    pub out: Option<PathBuf>,
}

impl Settings {
    pub fn from_file(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::Usage(format!("bad config {}: {e}", path.display())))
    }

    /// Fields set in `self` win over `base`.
    pub fn over(self, base: Settings) -> Settings {
        Settings {
            family: self.family.or(base.family),
            q: self.q.or(base.q),
            p: self.p.or(base.p),
            r: self.r.or(base.r),
            paths: self.paths.or(base.paths),
            seed: self.seed.or(base.seed),
            grid: self.grid.or(base.grid),
            triples: self.triples.or(base.triples),
            pairs: self.pairs.or(base.pairs),
            threshold: self.threshold.or(base.threshold),
            threads: self.threads.or(base.threads),
            format: self.format.or(base.format),
            out: self.out.or(base.out),
        }
    }
}

/// Validated configuration. Only the serialized fields are echoed in
/// reports, so thread count and output location never change report bytes.
#[derive(Debug, Clone, Serialize)]
pub struct ExperimentConfig {
    pub family: String,
    pub q: Option<f64>,
    pub p: f64,
    pub r: f64,
    pub paths: usize,
    pub seed: Option<u64>,
    pub grid: Vec<f64>,
    pub triples: Vec<[f64; 3]>,
    pub pairs: Vec<[f64; 2]>,
    pub threshold: f64,
    #[serde(skip)]
    pub spec: FamilySpec,
    #[serde(skip)]
    pub threads: usize,
    #[serde(skip)]
    pub format: Format,
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

impl ExperimentConfig {
    /// Checks everything that does not need the randomization law to be
    /// admissible.
    pub fn resolve(s: Settings) -> Result<Self, CliError> {
        let kind: FamilyKind = s
            .family
            .as_deref()
            .ok_or_else(|| usage("missing --family"))?
            .parse()
            .map_err(|e: crate::Error| usage(e.to_string()))?;
        let spec = FamilySpec::new(kind, s.q).map_err(|e| usage(e.to_string()))?;
        let p = s.p.ok_or_else(|| usage("missing --p"))?;
        let r = s.r.ok_or_else(|| usage("missing --r"))?;
        if !(p.is_finite() && r.is_finite()) {
            return Err(usage("p and r must be finite"));
        }
        let paths = s.paths.unwrap_or(DEFAULT_PATHS);
        if paths < 20 {
            return Err(usage(format!("--paths must be at least 20, got {paths}")));
        }
        let threshold = s.threshold.unwrap_or(DEFAULT_Z_THRESHOLD);
        if !(threshold > 0.0) {
            return Err(usage(format!("--threshold must be positive, got {threshold}")));
        }
        let triples = s.triples.unwrap_or_else(|| DEFAULT_TRIPLES.to_vec());
        for &[a, b, c] in &triples {
            if !(0.0 < a && a < b && b < c && c.is_finite()) {
                return Err(usage(format!("triple ({a}, {b}, {c}) is not 0 < s < t < u")));
            }
        }
        let pairs = s.pairs.unwrap_or_else(|| DEFAULT_PAIRS.to_vec());
        for &[a, b] in &pairs {
            if !(a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite()) {
                return Err(usage(format!("pair ({a}, {b}) must be positive")));
            }
        }
        let referenced: Vec<f64> = triples
            .iter()
            .flatten()
            .chain(pairs.iter().flatten())
            .copied()
            .collect();
        let grid = match s.grid {
            Some(g) => {
                if let Some(t) = referenced.iter().find(|t| !g.contains(t)) {
                    return Err(usage(format!(
                        "time {t} is used by a pair or triple but missing from --grid"
                    )));
                }
                g
            }
            None => {
                let mut g: Vec<f64> = DEFAULT_GRID.iter().chain(&referenced).copied().collect();
                g.sort_by(f64::total_cmp);
                g.dedup();
                g
            }
        };
        if grid.iter().any(|&t| !(t > 0.0 && t.is_finite())) {
            return Err(usage("grid times must be positive"));
        }
        Ok(ExperimentConfig {
            family: kind.name().to_string(),
            q: spec.q(),
            p,
            r,
            paths,
            seed: s.seed,
            grid,
            triples,
            pairs,
            threshold,
            spec,
            threads: s.threads.unwrap_or(0),
            format: s.format.unwrap_or_default(),
            out: s.out,
        })
    }

    /// The admissibility conditions for (p, r) and r > a.
    pub fn require_admissible(&self) -> Result<(), CliError> {
        check_admissible(&self.spec, self.p, self.r).map_err(|e| usage(e.to_string()))?;
        qh_params_from_theorem(&self.spec, self.p, self.r).map_err(|e| usage(e.to_string()))?;
        Ok(())
    }

    pub fn require_seed(&self) -> Result<u64, CliError> {
        self.seed
            .ok_or_else(|| usage("--seed is required for commands that sample"))
    }
}

/// "a,b,c" into numbers.
pub fn parse_list(text: &str) -> Result<Vec<f64>, String> {
    text.split(',')
        .map(|x| x.trim().parse::<f64>().map_err(|e| format!("bad number {x:?}: {e}")))
        .collect()
}

/// "a,b,c;d,e,f" into fixed-width groups.
pub fn parse_groups<const N: usize>(text: &str) -> Result<Vec<[f64; N]>, String> {
    text.split(';')
        .filter(|g| !g.trim().is_empty())
        .map(|g| {
            let v = parse_list(g)?;
            <[f64; N]>::try_from(v.as_slice()).map_err(|_| format!("expected {N} numbers in {g:?}"))
        })
        .collect()
}
