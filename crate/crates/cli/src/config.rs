use std::path::Path;

use anyhow::{Context, Result};
use lonscape::community::{Algorithm, MclParams, SpinGlassParams};
use lonscape::lon::MAX_ENUMERATION_N;
use lonscape::stats::WeightMode;
use lonscape::transform::{default_grid, validate_grid};
use lonscape::InstanceClass;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::artifact::Usage;

/// Largest n built without `--force-large`.
pub const DEFAULT_SIZE_GUARD: usize = 11;

/// Everything a campaign depends on. Loaded from an optional JSON file, then
/// overridden by command-line flags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CampaignConfig {
    pub classes: Vec<InstanceClass>,
    pub sizes: Vec<usize>,
    pub instances_per_cell: usize,
    pub master_seed: u64,
    pub detectors: Vec<Algorithm>,
    pub null_m: usize,
    pub null_weights: WeightMode,
    pub swap_factor: usize,
    pub grid: Vec<f64>,
    pub anova_permutations: usize,
    pub spinglass: SpinGlassParams,
    pub mcl: MclParams,
    pub force_large: bool,
}

impl Default for CampaignConfig {
    fn default() -> Self {
        Self {
            classes: vec![InstanceClass::Uniform, InstanceClass::RealLike],
            sizes: vec![5, 6, 7, 8, 9],
            instances_per_cell: 30,
            master_seed: 1,
            detectors: vec![Algorithm::Greedy, Algorithm::SpinGlass, Algorithm::Mcl],
            null_m: 1000,
            null_weights: WeightMode::Permute,
            swap_factor: 20,
            grid: default_grid(),
            anova_permutations: 9999,
            spinglass: SpinGlassParams::default(),
            mcl: MclParams::default(),
            force_large: false,
        }
    }
}

impl CampaignConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        match path {
            None => Ok(Self::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .with_context(|| format!("cannot read config {}", p.display()))?;
                serde_json::from_str(&text)
                    .map_err(|e| Usage(format!("invalid config {}: {e}", p.display())).into())
            }
        }
    }

    pub fn size_guard(&self) -> usize {
        if self.force_large {
            MAX_ENUMERATION_N
        } else {
            DEFAULT_SIZE_GUARD
        }
    }

    /// Checks every parameter; run before any compute starts.
    pub fn validate(&self) -> Result<()> {
        let usage = |m: String| -> Result<()> { Err(Usage(m).into()) };
        if self.classes.is_empty() {
            return usage("at least one instance class is required".into());
        }
        if self.sizes.is_empty() {
            return usage("at least one size is required".into());
        }
        for &n in &self.sizes {
            if n < 2 {
                return usage(format!("size {n} is too small (need n >= 2)"));
            }
            self.check_size(n)?;
        }
        if self.instances_per_cell == 0 {
            return usage("instances_per_cell must be positive".into());
        }
        if self.detectors.is_empty() {
            return usage("at least one detector is required".into());
        }
        if self.null_m < 2 {
            return usage("null_m must be at least 2".into());
        }
        if self.swap_factor == 0 {
            return usage("swap_factor must be positive".into());
        }
        if self.anova_permutations == 0 {
            return usage("anova_permutations must be positive".into());
        }
        validate_grid(&self.grid).map_err(|e| Usage(e.to_string()))?;
        self.spinglass
            .validate()
            .map_err(|e| Usage(e.to_string()))?;
        self.mcl.validate().map_err(|e| Usage(e.to_string()))?;
        Ok(())
    }

    pub fn check_size(&self, n: usize) -> Result<()> {
        let guard = self.size_guard();
        if n > guard {
            let hint = if n <= MAX_ENUMERATION_N {
                " (pass --force-large to allow up to 12)"
            } else {
                ""
            };
            return Err(Usage(format!("n = {n} exceeds the size limit {guard}{hint}")).into());
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        let digest = Sha256::digest(json.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}
