//! Pipeline stages. Each reads the previous stage's files from the campaign
//! directory and writes its own, stamped with the config hash.

use std::path::PathBuf;

use anyhow::{Context, Result};
use lonscape::community::{cross_evaluate, mcl, Algorithm, CrossEvaluation, Detector, Partition};
use lonscape::rng::derive_seed;
use lonscape::stats::{
    fitness_assortativity, null_ensemble, permutation_anova, q_significance, AnovaRecord,
    AnovaResult, AssortativityReport, NullModelEnsemble, RewireOptions, Significance,
};
use lonscape::transform::{
    filter, max_connected_threshold, symmetrize, ExportFormat, GraphTable, UndirectedLon,
};
use lonscape::{
    build_lon, read_instance, write_instance, AnyInstance, BuildOptions, GeneratorParams,
    InstanceClass, Lon, LonMeta,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::artifact::{name_key, read_json, write_json, write_text, DataError, Layout, Provenance};
use crate::config::CampaignConfig;

/// Shared state of one invocation.
pub struct Ctx {
    pub config: CampaignConfig,
    pub layout: Layout,
    pub hash: String,
}

impl Ctx {
    pub fn new(config: CampaignConfig, dir: impl Into<PathBuf>) -> Result<Self> {
        config.validate()?;
        let hash = config.hash();
        Ok(Self {
            config,
            layout: Layout::new(dir),
            hash,
        })
    }

    fn stamp(&self, seed: Option<u64>) -> Provenance {
        Provenance::new(&self.hash, self.config.master_seed, seed)
    }

    /// Seed for a named item and purpose, independent of processing order.
    fn item_seed(&self, name: &str, purpose: u64) -> u64 {
        derive_seed(self.config.master_seed ^ name_key(name), purpose)
    }
}

/// Runs `f` over `items` in parallel, keeping input order, and fails with
/// the first error.
fn par_each<T: Sync, R: Send>(
    items: &[T],
    f: impl Fn(&T) -> Result<R> + Sync + Send,
) -> Result<Vec<R>> {
    items
        .par_iter()
        .map(f)
        .collect::<Vec<_>>()
        .into_iter()
        .collect()
}

fn class_index(c: InstanceClass) -> u64 {
    match c {
        InstanceClass::Uniform => 0,
        InstanceClass::RealLike => 1,
    }
}

// ---------------------------------------------------------------- gen

pub fn gen(ctx: &Ctx) -> Result<Vec<String>> {
    let c = &ctx.config;
    let mut jobs = Vec::new();
    for &class in &c.classes {
        for &n in &c.sizes {
            for k in 0..c.instances_per_cell as u64 {
                let counter = (class_index(class) << 48) | ((n as u64) << 32) | k;
                jobs.push(GeneratorParams::new(
                    class,
                    n,
                    derive_seed(c.master_seed, counter),
                ));
            }
        }
    }
    let dir = ctx.layout.instances();
    std::fs::create_dir_all(&dir).with_context(|| format!("cannot create {}", dir.display()))?;
    par_each(&jobs, |params| {
        let inst = lonscape::generate(params)?;
        let name = inst.name().to_string();
        write_instance(&inst, dir.join(format!("{name}.dat")))?;
        write_json(
            &dir.join(format!("{name}.meta.json")),
            &ctx.stamp(Some(params.seed)),
            params,
        )?;
        Ok(name)
    })
}

// ---------------------------------------------------------------- build

pub fn build(ctx: &Ctx) -> Result<Vec<String>> {
    let dir = ctx.layout.instances();
    let names = ctx.layout.list(&dir, ".dat", "gen")?;
    let out = ctx.layout.lons();
    par_each(&names, |name| {
        let inst = read_instance(dir.join(format!("{name}.dat")))?;
        ctx.config.check_size(inst.n())?;
        let meta_path = dir.join(format!("{name}.meta.json"));
        let params = meta_path
            .exists()
            .then(|| read_json::<GeneratorParams>(&meta_path))
            .transpose()?
            .map(|a| a.data);
        let opts = BuildOptions {
            meta: LonMeta {
                name: name.clone(),
                n: inst.n(),
                class: params.as_ref().map(|p| p.class),
                seed: params.as_ref().map(|p| p.seed),
            },
            ..Default::default()
        };
        let lon = match &inst {
            AnyInstance::Integer(i) => build_lon(i, &opts),
            AnyInstance::Real(i) => build_lon(i, &opts),
        }
        .with_context(|| format!("building the LON of {name}"))?;
        log::info!("{name}: {} local optima", lon.num_nodes());
        write_json(
            &out.join(format!("{name}.json")),
            &ctx.stamp(opts.meta.seed),
            &lon,
        )?;
        Ok(name.clone())
    })
}

fn load_lon(ctx: &Ctx, name: &str) -> Result<Lon> {
    Ok(read_json::<Lon>(&ctx.layout.lons().join(format!("{name}.json")))?.data)
}

// ---------------------------------------------------------------- filter

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FilterRecord {
    /// `auto` (largest connected grid value) or `fixed`.
    pub mode: String,
    pub pi: f64,
    pub disconnects_at: Option<f64>,
    pub graph: UndirectedLon,
}

#[derive(Debug, Clone, Copy)]
pub enum FilterMode {
    Auto,
    Fixed(f64),
}

pub fn filter_stage(ctx: &Ctx, mode: FilterMode) -> Result<Vec<String>> {
    let names = ctx.layout.list(&ctx.layout.lons(), ".json", "build")?;
    let out = ctx.layout.filtered();
    par_each(&names, |name| {
        let lon = load_lon(ctx, name)?;
        let g = symmetrize(&lon);
        let record = match mode {
            FilterMode::Auto => {
                let ct = max_connected_threshold(&g, &ctx.config.grid)?;
                FilterRecord {
                    mode: "auto".into(),
                    pi: ct.pi_star,
                    disconnects_at: ct.disconnects_at,
                    graph: ct.graph,
                }
            }
            FilterMode::Fixed(pi) => FilterRecord {
                mode: "fixed".into(),
                pi,
                disconnects_at: None,
                graph: filter(&g, pi),
            },
        };
        write_json(
            &out.join(format!("{name}.json")),
            &ctx.stamp(lon.meta().seed),
            &record,
        )?;
        Ok(name.clone())
    })
}

fn load_filtered(ctx: &Ctx, name: &str) -> Result<FilterRecord> {
    Ok(read_json::<FilterRecord>(&ctx.layout.filtered().join(format!("{name}.json")))?.data)
}

// ---------------------------------------------------------------- detect

pub const SPINGLASS_PURPOSE: u64 = 1;
pub const NULL_PURPOSE: u64 = 2;

fn detector(ctx: &Ctx, alg: Algorithm) -> Option<Detector> {
    match alg {
        Algorithm::Greedy => Some(Detector::Greedy),
        Algorithm::SpinGlass => Some(Detector::SpinGlass(ctx.config.spinglass.clone())),
        Algorithm::Mcl => None,
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DetectionFailure {
    pub algorithm: Algorithm,
    pub error: String,
}

pub fn partition_path(ctx: &Ctx, name: &str, alg: Algorithm) -> PathBuf {
    ctx.layout.partitions().join(format!("{name}.{alg}.json"))
}

pub fn detect(ctx: &Ctx) -> Result<Vec<String>> {
    let names = ctx.layout.list(&ctx.layout.filtered(), ".json", "filter")?;
    let dir = ctx.layout.partitions();
    par_each(&names, |name| {
        let lon = load_lon(ctx, name)?;
        let filtered = load_filtered(ctx, name)?.graph;
        let mut found: Vec<Partition> = Vec::new();
        for &alg in &ctx.config.detectors {
            let seed = ctx.item_seed(name, SPINGLASS_PURPOSE);
            let result = match detector(ctx, alg) {
                Some(d) => d.detect(&filtered, seed),
                None => mcl(&lon, &ctx.config.mcl),
            };
            let stamp = ctx.stamp((alg == Algorithm::SpinGlass).then_some(seed));
            let failed = dir.join(format!("{name}.{alg}.failed.json"));
            match result {
                Ok(mut p) => {
                    p.source = name.clone();
                    write_json(&partition_path(ctx, name, alg), &stamp, &p)?;
                    let csv = stamp.csv_comment() + &p.to_csv();
                    write_text(&dir.join(format!("{name}.{alg}.csv")), &csv)?;
                    if failed.exists() {
                        std::fs::remove_file(&failed)?;
                    }
                    found.push(p);
                }
                Err(e) if matches!(e, lonscape::Error::NonConvergence { .. }) => {
                    log::warn!("{name}: {alg} failed: {e}");
                    let record = DetectionFailure {
                        algorithm: alg,
                        error: e.to_string(),
                    };
                    write_json(&failed, &stamp, &record)?;
                }
                Err(e) => return Err(e).with_context(|| format!("{alg} on {name}")),
            }
        }
        let cross: Vec<CrossEvaluation> = cross_evaluate(&found, &symmetrize(&lon))?;
        write_json(
            &dir.join(format!("{name}.cross.json")),
            &ctx.stamp(None),
            &cross,
        )?;
        Ok(name.clone())
    })
}

// ---------------------------------------------------------------- nulltest

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NullRecord {
    pub observed_q: f64,
    pub significance: Significance,
    pub swap_factor: usize,
    pub ensemble: NullModelEnsemble,
}

pub fn nulltest(ctx: &Ctx) -> Result<Vec<String>> {
    let names = ctx.layout.list(&ctx.layout.filtered(), ".json", "filter")?;
    let algs: Vec<Algorithm> = ctx
        .config
        .detectors
        .iter()
        .copied()
        .filter(|&a| a != Algorithm::Mcl)
        .collect();
    if algs.is_empty() {
        return Err(crate::artifact::Usage(
            "null tests need greedy or spinglass among the detectors".into(),
        )
        .into());
    }
    let opts = RewireOptions {
        swap_factor: ctx.config.swap_factor,
        weights: ctx.config.null_weights,
    };
    let dir = ctx.layout.stats();
    // instances run one after another; each ensemble is parallel inside
    for name in &names {
        let g = load_filtered(ctx, name)?.graph;
        for &alg in &algs {
            let part_path = partition_path(ctx, name, alg);
            let observed = read_json::<Partition>(&part_path)
                .with_context(|| {
                    format!("run `detect` before `nulltest` ({})", part_path.display())
                })?
                .data;
            let seed = ctx.item_seed(name, NULL_PURPOSE);
            let stamp = ctx.stamp(Some(seed));
            let det = detector(ctx, alg).expect("mcl filtered out");
            let ens = match null_ensemble(&g, &det, ctx.config.null_m, seed, &opts) {
                Ok(e) => e,
                Err(e @ lonscape::Error::Contract(_)) => {
                    log::warn!("{name}: no null model for {alg}: {e}");
                    let record = DetectionFailure {
                        algorithm: alg,
                        error: e.to_string(),
                    };
                    write_json(
                        &dir.join(format!("{name}.null.{alg}.failed.json")),
                        &stamp,
                        &record,
                    )?;
                    continue;
                }
                Err(e) => return Err(e).with_context(|| format!("null ensemble of {name}")),
            };
            let record = NullRecord {
                observed_q: observed.q,
                significance: q_significance(observed.q, &ens)?,
                swap_factor: opts.swap_factor,
                ensemble: ens,
            };
            write_json(
                &dir.join(format!("{name}.null.{alg}.json")),
                &stamp,
                &record,
            )?;
            let csv = stamp.csv_comment() + &record.ensemble.to_csv();
            write_text(&dir.join(format!("{name}.null.{alg}.csv")), &csv)?;
        }
    }
    Ok(names)
}

// ---------------------------------------------------------------- assort

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AssortRecord {
    pub unfiltered: Result<AssortativityReport, String>,
    pub filtered: Result<AssortativityReport, String>,
}

pub fn assort(ctx: &Ctx) -> Result<Vec<String>> {
    let names = ctx.layout.list(&ctx.layout.filtered(), ".json", "filter")?;
    let dir = ctx.layout.stats();
    par_each(&names, |name| {
        let lon = load_lon(ctx, name)?;
        let g = load_filtered(ctx, name)?.graph;
        let record = AssortRecord {
            unfiltered: fitness_assortativity(&lon, None).map_err(|e| e.to_string()),
            filtered: fitness_assortativity(&lon, Some(&g)).map_err(|e| e.to_string()),
        };
        write_json(
            &dir.join(format!("{name}.assort.json")),
            &ctx.stamp(lon.meta().seed),
            &record,
        )?;
        Ok(name.clone())
    })
}

// ---------------------------------------------------------------- export

/// Writes each LON (or its filtered graph) in every requested format to `export/`.
pub fn export(ctx: &Ctx, formats: &[ExportFormat], filtered: bool) -> Result<Vec<String>> {
    let names = if filtered {
        ctx.layout.list(&ctx.layout.filtered(), ".json", "filter")?
    } else {
        ctx.layout.list(&ctx.layout.lons(), ".json", "build")?
    };
    let out = ctx.layout.export();
    std::fs::create_dir_all(&out).with_context(|| format!("cannot create {}", out.display()))?;
    par_each(&names, |name| {
        let (table, stem) = if filtered {
            (
                GraphTable::from(&load_filtered(ctx, name)?.graph),
                format!("{name}.filtered"),
            )
        } else {
            (GraphTable::from(&load_lon(ctx, name)?), name.clone())
        };
        for f in formats {
            table.export(*f, out.join(format!("{stem}.{}", f.extension())))?;
        }
        Ok(name.clone())
    })
}

// ---------------------------------------------------------------- anova

pub const ANOVA_PURPOSE: u64 = 3;

/// Per-instance modularity of the undirected detectors, with class labels.
pub fn anova_records(ctx: &Ctx) -> Result<Vec<AnovaRecord>> {
    let names = ctx.layout.list(&ctx.layout.lons(), ".json", "build")?;
    let mut records = Vec::new();
    for name in &names {
        let lon = load_lon(ctx, name)?;
        let Some(class) = lon.meta().class else {
            continue;
        };
        for alg in [Algorithm::Greedy, Algorithm::SpinGlass] {
            if !ctx.config.detectors.contains(&alg) {
                continue;
            }
            let path = partition_path(ctx, name, alg);
            if path.exists() {
                records.push(AnovaRecord {
                    class: class.as_str().into(),
                    algorithm: alg.as_str().into(),
                    q: read_json::<Partition>(&path)?.data.q,
                });
            }
        }
    }
    Ok(records)
}

pub fn anova(ctx: &Ctx) -> Result<AnovaResult> {
    let records = anova_records(ctx)?;
    if records.is_empty() {
        return Err(
            DataError("no greedy or spinglass partitions; run `detect` first".into()).into(),
        );
    }
    let seed = derive_seed(ctx.config.master_seed, ANOVA_PURPOSE);
    let path = ctx.layout.stats().join("anova.failed.json");
    let res = match permutation_anova(&records, ctx.config.anova_permutations, seed) {
        Ok(r) => {
            if path.exists() {
                std::fs::remove_file(&path)?;
            }
            r
        }
        Err(e) => {
            write_json(&path, &ctx.stamp(Some(seed)), &e.to_string())?;
            return Err(e.into());
        }
    };
    write_json(
        &ctx.layout.stats().join("anova.json"),
        &ctx.stamp(Some(seed)),
        &res,
    )?;
    Ok(res)
}
