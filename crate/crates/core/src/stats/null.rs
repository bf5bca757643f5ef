//! Degree-preserving connected null models and Monte Carlo significance of Q.
//!
//! Rewiring is swap MCMC: pick two edges `{a,b}` and `{c,d}`, propose
//! `{a,d}` and `{c,b}`, and reject the move if it would create a self-loop,
//! a multi-edge or a disconnected graph. This keeps the unweighted degree
//! sequence exactly but is not a uniform sampler over connected graphs.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::community::{Algorithm, Detector};
use crate::error::{Error, Result};
use crate::rng::{self, derive_seed, streams};
use crate::transform::{UndirectedEdge, UndirectedLon};

/// Fraction of null samples allowed to fail before the ensemble is rejected.
pub const MAX_FAILURE_RATE: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum WeightMode {
    /// The original weights, shuffled onto the rewired edges.
    #[default]
    Permute,
    /// Every edge gets the mean original weight.
    Equal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RewireOptions {
    /// Swap attempts per edge.
    pub swap_factor: usize,
    pub weights: WeightMode,
}

impl Default for RewireOptions {
    fn default() -> Self {
        Self {
            swap_factor: 20,
            weights: WeightMode::Permute,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Rewired {
    pub graph: UndirectedLon,
    pub attempted: usize,
    pub accepted: usize,
    /// Set when no swap was accepted; `graph` is then the input unchanged.
    pub warning: Option<String>,
}

struct SwapGraph {
    edges: Vec<(usize, usize)>,
    present: HashSet<(usize, usize)>,
    adj: Vec<Vec<usize>>,
    mark: Vec<u32>,
    epoch: u32,
    queue: Vec<usize>,
}

fn key(a: usize, b: usize) -> (usize, usize) {
    (a.min(b), a.max(b))
}

impl SwapGraph {
    fn new(g: &UndirectedLon) -> Self {
        let edges: Vec<(usize, usize)> = g.edges().iter().map(|e| (e.a, e.b)).collect();
        let mut adj = vec![Vec::new(); g.num_nodes()];
        for &(a, b) in &edges {
            adj[a].push(b);
            adj[b].push(a);
        }
        Self {
            present: edges.iter().copied().collect(),
            edges,
            adj,
            mark: vec![0; g.num_nodes()],
            epoch: 0,
            queue: Vec::new(),
        }
    }

    fn unlink(&mut self, a: usize, b: usize) {
        let pos = self.adj[a]
            .iter()
            .position(|&x| x == b)
            .expect("edge present");
        self.adj[a].swap_remove(pos);
        let pos = self.adj[b]
            .iter()
            .position(|&x| x == a)
            .expect("edge present");
        self.adj[b].swap_remove(pos);
        self.present.remove(&key(a, b));
    }

    fn link(&mut self, a: usize, b: usize) {
        self.adj[a].push(b);
        self.adj[b].push(a);
        self.present.insert(key(a, b));
    }

    /// Breadth-first search from `from`, stopping once all targets are seen.
    fn reaches_all(&mut self, from: usize, targets: [usize; 3]) -> bool {
        self.epoch += 1;
        let epoch = self.epoch;
        let mut missing = targets.iter().filter(|&&t| t != from).count();
        let mut seen_targets = [false; 3];
        self.queue.clear();
        self.queue.push(from);
        self.mark[from] = epoch;
        let mut head = 0;
        while head < self.queue.len() && missing > 0 {
            let u = self.queue[head];
            head += 1;
            for k in 0..self.adj[u].len() {
                let w = self.adj[u][k];
                if self.mark[w] == epoch {
                    continue;
                }
                self.mark[w] = epoch;
                self.queue.push(w);
                for (t, seen) in targets.iter().zip(seen_targets.iter_mut()) {
                    if *t == w && !*seen {
                        *seen = true;
                        missing -= 1;
                    }
                }
            }
        }
        missing == 0
    }

    fn try_swap(&mut self, rng: &mut rng::Rng) -> bool {
        let m = self.edges.len();
        let i = rng.random_range(0..m);
        let j = rng.random_range(0..m - 1);
        let j = if j >= i { j + 1 } else { j };
        let (a, b) = self.edges[i];
        let (mut c, mut d) = self.edges[j];
        if rng.random::<bool>() {
            std::mem::swap(&mut c, &mut d);
        }
        // {a,b},{c,d} -> {a,d},{c,b}
        if a == d
            || c == b
            || self.present.contains(&key(a, d))
            || self.present.contains(&key(c, b))
        {
            return false;
        }
        self.unlink(a, b);
        self.unlink(c, d);
        self.link(a, d);
        self.link(c, b);
        // every component left after the removals holds one of a, b, c, d
        if self.reaches_all(a, [b, c, d]) {
            self.edges[i] = key(a, d);
            self.edges[j] = key(c, b);
            true
        } else {
            self.unlink(a, d);
            self.unlink(c, b);
            self.link(a, b);
            self.link(c, d);
            false
        }
    }
}

/// One degree-preserving connected randomization of `g`.
fn check_rewirable(g: &UndirectedLon) -> Result<()> {
    if g.edges().len() < 2 {
        return Err(Error::Contract(format!(
            "rewiring needs at least 2 edges, graph has {}",
            g.edges().len()
        )));
    }
    if !g.is_connected() {
        return Err(Error::Contract("rewiring expects a connected graph".into()));
    }
    Ok(())
}

pub fn rewire_null(g: &UndirectedLon, seed: u64, opts: &RewireOptions) -> Result<Rewired> {
    check_rewirable(g)?;
    let mut sg = SwapGraph::new(g);
    let mut rng = rng::stream(seed, streams::REWIRE);
    let attempted = opts.swap_factor * sg.edges.len();
    let accepted = (0..attempted).filter(|_| sg.try_swap(&mut rng)).count();
    if accepted == 0 {
        return Ok(Rewired {
            graph: g.clone(),
            attempted,
            accepted,
            warning: Some(format!(
                "no swap accepted in {attempted} attempts; the degree sequence is rigid"
            )),
        });
    }
    let mut weights: Vec<f64> = g.edges().iter().map(|e| e.weight).collect();
    match opts.weights {
        WeightMode::Permute => weights.shuffle(&mut rng::stream(seed, streams::WEIGHTS)),
        WeightMode::Equal => {
            let mean = weights.iter().sum::<f64>() / weights.len() as f64;
            weights.iter_mut().for_each(|w| *w = mean);
        }
    }
    let edges = sg
        .edges
        .iter()
        .zip(weights)
        .map(|(&(a, b), weight)| UndirectedEdge { a, b, weight })
        .collect();
    Ok(Rewired {
        graph: g.with_edges(edges)?,
        attempted,
        accepted,
        warning: None,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NullModelEnsemble {
    pub source: String,
    pub algorithm: Algorithm,
    pub seed: u64,
    pub requested: usize,
    /// Q of every successful sample, in sample order.
    pub samples: Vec<f64>,
    /// Indices of samples whose detector failed.
    pub failed: Vec<usize>,
    /// Samples in which no swap was accepted.
    pub rigid: usize,
    pub mean_q: f64,
    /// Standard deviation with the `m - 1` denominator.
    pub sd_q: f64,
}

impl NullModelEnsemble {
    pub fn is_degenerate(&self) -> bool {
        self.sd_q == 0.0
    }

    /// `sample_index,q` rows for successful samples.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("sample,q\n");
        let mut ok = (0..self.requested).filter(|i| !self.failed.contains(i));
        for q in &self.samples {
            s.push_str(&format!("{},{q}\n", ok.next().expect("index per sample")));
        }
        s
    }
}

/// Mean and `n - 1` standard deviation; identical values give exactly zero
/// spread.
pub fn mean_sd(xs: &[f64]) -> (f64, f64) {
    if let Some(&x0) = xs.first() {
        if xs.iter().all(|&x| x == x0) {
            return (x0, 0.0);
        }
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Runs `detector` on `m` independent rewirings of `g`. Sample `k` uses the
/// seed `derive_seed(seed, k)`, so results do not depend on thread count.
pub fn null_ensemble(
    g: &UndirectedLon,
    detector: &Detector,
    m: usize,
    seed: u64,
    opts: &RewireOptions,
) -> Result<NullModelEnsemble> {
    if m < 2 {
        return Err(Error::InvalidParam("null ensemble needs m >= 2".into()));
    }
    check_rewirable(g)?;
    let results: Vec<Result<(f64, bool)>> = (0..m as u64)
        .into_par_iter()
        .map(|k| {
            let s = derive_seed(seed, k);
            let r = rewire_null(g, s, opts)?;
            let p = detector.detect(&r.graph, derive_seed(s, 1))?;
            Ok((p.q, r.warning.is_some()))
        })
        .collect();
    let mut samples = Vec::with_capacity(m);
    let mut failed = Vec::new();
    let mut rigid = 0;
    let mut first_error = None;
    for (k, r) in results.into_iter().enumerate() {
        match r {
            Ok((q, was_rigid)) => {
                samples.push(q);
                rigid += was_rigid as usize;
            }
            Err(e) => {
                log::debug!("null sample {k} of {} failed: {e}", g.meta.name);
                failed.push(k);
                first_error.get_or_insert(e);
            }
        }
    }
    if !failed.is_empty() {
        log::warn!(
            "{} of {m} null samples of {} failed",
            failed.len(),
            g.meta.name
        );
    }
    if failed.len() as f64 > MAX_FAILURE_RATE * m as f64 || samples.len() < 2 {
        return Err(first_error.expect("some sample failed"));
    }
    let (mean_q, sd_q) = mean_sd(&samples);
    Ok(NullModelEnsemble {
        source: g.meta.name.clone(),
        algorithm: detector.algorithm(),
        seed,
        requested: m,
        samples,
        failed,
        rigid,
        mean_q,
        sd_q,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Significance {
    pub p_value: f64,
    /// `None` when the ensemble has zero spread.
    pub z_score: Option<f64>,
}

pub fn q_significance(q_obs: f64, ens: &NullModelEnsemble) -> Result<Significance> {
    if ens.samples.is_empty() {
        return Err(Error::Degenerate("empty null ensemble".into()));
    }
    let at_least = ens.samples.iter().filter(|&&q| q >= q_obs).count();
    let p_value = (at_least + 1) as f64 / (ens.samples.len() + 1) as f64;
    let z_score = (!ens.is_degenerate()).then(|| (q_obs - ens.mean_q) / ens.sd_q);
    Ok(Significance { p_value, z_score })
}
