//! On-disk layout, provenance stamps and error classification.

use std::fmt;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_COMPUTE: i32 = 4;

/// A user mistake: bad flag combination, invalid parameter, size guard.
#[derive(Debug)]
pub struct Usage(pub String);

impl fmt::Display for Usage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

/// Missing or malformed input files.
#[derive(Debug)]
pub struct DataError(pub String);

impl fmt::Display for DataError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for DataError {}

pub fn exit_code(err: &anyhow::Error) -> i32 {
    use lonscape::Error as E;
    for cause in err.chain() {
        if cause.is::<Usage>() {
            return EXIT_USAGE;
        }
        if cause.is::<DataError>()
            || cause.is::<std::io::Error>()
            || cause.is::<serde_json::Error>()
        {
            return EXIT_DATA;
        }
        if let Some(e) = cause.downcast_ref::<E>() {
            return match e {
                E::InvalidParam(_) | E::SizeGuard { .. } => EXIT_USAGE,
                E::Dimension { .. }
                | E::Contract(_)
                | E::Parse { .. }
                | E::Structure(_)
                | E::RowSum { .. }
                | E::Io { .. }
                | E::Csv { .. }
                | E::Json { .. } => EXIT_DATA,
                _ => EXIT_COMPUTE,
            };
        }
    }
    EXIT_COMPUTE
}

/// Stamp carried by every artifact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub config_hash: String,
    pub master_seed: u64,
    /// Seed of the item this artifact describes, when it has one.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub tool_version: String,
}

impl Provenance {
    pub fn new(config_hash: &str, master_seed: u64, seed: Option<u64>) -> Self {
        Self {
            config_hash: config_hash.to_string(),
            master_seed,
            seed,
            tool_version: TOOL_VERSION.to_string(),
        }
    }

    /// `# key=value ...` line for CSV files.
    pub fn csv_comment(&self) -> String {
        let mut s = format!(
            "# config_hash={} master_seed={} tool_version={}",
            self.config_hash, self.master_seed, self.tool_version
        );
        if let Some(seed) = self.seed {
            s.push_str(&format!(" seed={seed}"));
        }
        s.push('\n');
        s
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Artifact<T> {
    pub provenance: Provenance,
    pub data: T,
}

pub fn write_json<T: Serialize>(path: &Path, provenance: &Provenance, data: &T) -> Result<()> {
    #[derive(Serialize)]
    struct Out<'a, T> {
        provenance: &'a Provenance,
        data: &'a T,
    }
    let mut text = serde_json::to_string_pretty(&Out { provenance, data })?;
    text.push('\n');
    write_text(path, &text)
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<Artifact<T>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| DataError(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| DataError(format!("malformed {}: {e}", path.display())).into())
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)
            .with_context(|| format!("cannot create {}", parent.display()))?;
    }
    std::fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}

/// Campaign directory tree.
#[derive(Debug, Clone)]
pub struct Layout {
    pub root: PathBuf,
}

impl Layout {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn instances(&self) -> PathBuf {
        self.root.join("instances")
    }

    pub fn lons(&self) -> PathBuf {
        self.root.join("lons")
    }

    pub fn filtered(&self) -> PathBuf {
        self.root.join("filtered")
    }

    pub fn partitions(&self) -> PathBuf {
        self.root.join("partitions")
    }

    pub fn stats(&self) -> PathBuf {
        self.root.join("stats")
    }

    pub fn export(&self) -> PathBuf {
        self.root.join("export")
    }

    pub fn report(&self) -> PathBuf {
        self.root.join("report")
    }

    /// Files in `dir` ending in `suffix`, sorted by name, with the suffix
    /// stripped. A missing directory is a data error naming the stage that
    /// should have produced it.
    pub fn list(&self, dir: &Path, suffix: &str, producer: &str) -> Result<Vec<String>> {
        let entries = std::fs::read_dir(dir).map_err(|_| {
            DataError(format!(
                "{} does not exist; run `{producer}` first",
                dir.display()
            ))
        })?;
        let mut names = Vec::new();
        for entry in entries {
            let name = entry?.file_name().to_string_lossy().into_owned();
            if let Some(stem) = name.strip_suffix(suffix) {
                names.push(stem.to_string());
            }
        }
        names.sort();
        if names.is_empty() {
            return Err(DataError(format!(
                "no *{suffix} files in {}; run `{producer}` first",
                dir.display()
            ))
            .into());
        }
        Ok(names)
    }
}

/// Stable 64-bit FNV-1a hash, used to key per-instance seeds by name.
pub fn name_key(name: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in name.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn codes() {
        assert_eq!(exit_code(&Usage("x".into()).into()), EXIT_USAGE);
        assert_eq!(exit_code(&DataError("x".into()).into()), EXIT_DATA);
        let e: anyhow::Error = lonscape::Error::NonConvergence { iterations: 3 }.into();
        assert_eq!(exit_code(&e), EXIT_COMPUTE);
        let e: anyhow::Error = lonscape::Error::Structure("x".into()).into();
        assert_eq!(exit_code(&e.context("while reading")), EXIT_DATA);
    }

    #[test]
    fn fnv_reference_value() {
        assert_eq!(name_key(""), 0xcbf2_9ce4_8422_2325);
        assert_eq!(name_key("a"), 0xaf63_dc4c_8601_ec8c);
    }
}
