use serde::{Deserialize, Serialize};
use std::path::PathBuf;

pub const SUITES: [&str; 10] = ["lemma1", "lemma1a", "lemma2", "lemma1c", "lemma1d", "seams", "twb", "zeros", "growth", "operators"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RGrid {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub sigma: f64,
    #[serde(rename = "N", default = "default_sectors")]
    pub sectors: u32,
    #[serde(default = "default_k_max")]
    pub k_max: usize,
    #[serde(default = "default_grid")]
    pub r_grid: RGrid,
    #[serde(default = "default_suites")]
    pub suites: Vec<String>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_out")]
    pub out_dir: PathBuf,
}

fn default_sectors() -> u32 {
    1
}

fn default_k_max() -> usize {
    512
}

fn default_grid() -> RGrid {
    RGrid { lo: 30.0, hi: 1000.0, count: 16 }
}

fn default_suites() -> Vec<String> {
    SUITES.iter().map(|s| s.to_string()).collect()
}

fn default_out() -> PathBuf {
    PathBuf::from("qcglue-out")
}

impl RunConfig {
    pub fn with_defaults(sigma: f64, suites: Vec<String>, out_dir: PathBuf) -> Self {
        RunConfig {
            sigma,
            sectors: default_sectors(),
            k_max: default_k_max(),
            r_grid: default_grid(),
            suites,
            seed: 0,
            out_dir,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.sigma > 0.5 && self.sigma < 1.0) {
            return Err(format!("sigma must lie in (1/2, 1), got {}", self.sigma));
        }
        if self.sectors == 0 {
            return Err("N must be a positive integer".into());
        }
        if self.k_max < 3 {
            return Err(format!("k_max must be at least 3, got {}", self.k_max));
        }
        let g = &self.r_grid;
        if !(g.lo >= 1.0 && g.hi > g.lo && g.hi.is_finite()) {
            return Err(format!("r_grid needs 1 <= lo < hi, got lo={} hi={}", g.lo, g.hi));
        }
        if g.count < 2 {
            return Err(format!("r_grid.count must be at least 2, got {}", g.count));
        }
        if self.suites.is_empty() {
            return Err("suites must not be empty".into());
        }
        for s in &self.suites {
            if !SUITES.contains(&s.as_str()) {
                return Err(format!("unknown suite {s:?}; expected one of {}", SUITES.join(", ")));
            }
        }
        Ok(())
    }
}
