//! Exact local optima networks.
//!
//! [`build_lon`] enumerates all `n!` assignments by Lehmer rank. A first pass
//! stores, for every rank, the rank of its best-improving neighbor (or itself
//! when no neighbor strictly improves). Chains are then collapsed to their
//! terminal optimum with path compression. A second pass visits every
//! assignment again and counts, for each neighbor, which basin it falls in.
//!
//! Transition counts are integers, so the result does not depend on how the
//! rank range is split across worker threads.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instance::InstanceClass;
use crate::qap::{
    factorial, lehmer_digits, neighborhood_size, next_permutation, swap_pairs, unrank_into,
    Permutation, QapInstance, Scalar,
};

/// Hard ceiling: basin indices are stored as `u32` with one flag bit.
pub const MAX_ENUMERATION_N: usize = 12;

const CHUNK: u64 = 1 << 15;
const DONE: u32 = 1 << 31;
const DENSE_LIMIT: usize = 2048;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalOptimum {
    pub id: usize,
    pub perm: Permutation,
    pub rank: u64,
    pub fitness: f64,
    pub basin_size: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LonMeta {
    pub name: String,
    pub n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub class: Option<InstanceClass>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub src: usize,
    pub dst: usize,
    pub weight: f64,
}

/// Directed weighted network of local optima. Row `i` holds the transition
/// probabilities out of basin `i`, self-loop included, sorted by target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "LonFile", try_from = "LonFile")]
pub struct Lon {
    meta: LonMeta,
    nodes: Vec<LocalOptimum>,
    rows: Vec<Vec<(usize, f64)>>,
}

#[derive(Serialize, Deserialize)]
struct LonFile {
    meta: LonMeta,
    nodes: Vec<LocalOptimum>,
    edges: Vec<Edge>,
}

impl From<Lon> for LonFile {
    fn from(lon: Lon) -> Self {
        let edges = lon.edges().collect();
        LonFile {
            meta: lon.meta,
            nodes: lon.nodes,
            edges,
        }
    }
}

impl TryFrom<LonFile> for Lon {
    type Error = Error;

    fn try_from(file: LonFile) -> Result<Self> {
        Lon::from_parts(file.meta, file.nodes, file.edges)
    }
}

impl Lon {
    /// Assembles a network from nodes and directed edges, checking ids,
    /// weight bounds and that every row sums to one.
    pub fn from_parts(meta: LonMeta, nodes: Vec<LocalOptimum>, edges: Vec<Edge>) -> Result<Self> {
        let v = nodes.len();
        if let Some((i, _)) = nodes.iter().enumerate().find(|(i, node)| node.id != *i) {
            return Err(Error::Structure(format!(
                "node at position {i} has a non-dense id"
            )));
        }
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); v];
        for e in edges {
            if e.src >= v || e.dst >= v {
                return Err(Error::Structure(format!(
                    "edge {}->{} references a missing node",
                    e.src, e.dst
                )));
            }
            if !(e.weight > 0.0 && e.weight <= 1.0 + 1e-12) {
                return Err(Error::Structure(format!(
                    "edge {}->{} has weight {} outside (0, 1]",
                    e.src, e.dst, e.weight
                )));
            }
            rows[e.src].push((e.dst, e.weight));
        }
        for (i, row) in rows.iter_mut().enumerate() {
            row.sort_by_key(|&(j, _)| j);
            if row.windows(2).any(|w| w[0].0 == w[1].0) {
                return Err(Error::Structure(format!("duplicate edge out of node {i}")));
            }
        }
        let lon = Lon { meta, nodes, rows };
        lon.check_row_sums(1e-9)?;
        Ok(lon)
    }

    pub fn meta(&self) -> &LonMeta {
        &self.meta
    }

    pub fn meta_mut(&mut self) -> &mut LonMeta {
        &mut self.meta
    }

    pub fn nodes(&self) -> &[LocalOptimum] {
        &self.nodes
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    /// Outgoing `(target, weight)` pairs of node `i`, self-loop included.
    pub fn out_edges(&self, i: usize) -> &[(usize, f64)] {
        &self.rows[i]
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        let row = &self.rows[i];
        row.binary_search_by_key(&j, |&(t, _)| t)
            .map(|k| row[k].1)
            .unwrap_or(0.0)
    }

    pub fn self_loop(&self, i: usize) -> f64 {
        self.weight(i, i)
    }

    /// All stored edges, self-loops included, ordered by `(src, dst)`.
    pub fn edges(&self) -> impl Iterator<Item = Edge> + '_ {
        self.rows.iter().enumerate().flat_map(|(src, row)| {
            row.iter()
                .map(move |&(dst, weight)| Edge { src, dst, weight })
        })
    }

    pub fn check_row_sums(&self, tol: f64) -> Result<()> {
        for (i, row) in self.rows.iter().enumerate() {
            let sum: f64 = row.iter().map(|&(_, w)| w).sum();
            if (sum - 1.0).abs() > tol {
                return Err(Error::RowSum { row: i, sum });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct BuildOptions {
    /// Largest `n` accepted. Never above [`MAX_ENUMERATION_N`].
    pub max_n: usize,
    pub meta: LonMeta,
}

impl Default for BuildOptions {
    fn default() -> Self {
        Self {
            max_n: MAX_ENUMERATION_N,
            meta: LonMeta::default(),
        }
    }
}

/// Steepest-descent local search under pairwise exchange. Among equally good
/// improving swaps the first in `(i, j)` order wins; equal cost is not an
/// improvement.
pub fn best_improvement<T: Scalar>(
    inst: &QapInstance<T>,
    start: &Permutation,
) -> Result<Permutation> {
    if start.len() != inst.n() {
        return Err(Error::Dimension {
            expected: inst.n(),
            actual: start.len(),
        });
    }
    let mut p = start.as_slice().to_vec();
    while let Some((i, j)) = best_swap(inst, &p) {
        p.swap(i, j);
    }
    Permutation::new(p)
}

#[inline]
fn best_swap<T: Scalar>(inst: &QapInstance<T>, p: &[usize]) -> Option<(usize, usize)> {
    let n = p.len();
    let mut best: Option<(T, usize, usize)> = None;
    for i in 0..n {
        for j in i + 1..n {
            let d = inst.swap_delta(p, i, j);
            let better = match best {
                None => d < T::ZERO,
                Some((bd, _, _)) => d < bd,
            };
            if better {
                best = Some((d, i, j));
            }
        }
    }
    best.map(|(_, i, j)| (i, j))
}

/// Lehmer rank of `p` with positions `i < j` exchanged, in O(n), given the
/// rank and Lehmer digits of `p`.
#[inline]
fn swapped_rank(p: &[usize], digits: &[usize], fact: &[u64], rank: u64, i: usize, j: usize) -> u64 {
    let n = p.len();
    let (a, b) = (p[i], p[j]);
    let mut new_di = usize::from(a < b);
    let mut new_dj = 0usize;
    let mut r = rank as i64;
    for k in i + 1..n {
        let pk = p[k];
        if k < j {
            new_di += usize::from(pk < b);
            let dk = i64::from(a < pk) - i64::from(b < pk);
            r += dk * fact[n - 1 - k] as i64;
        } else if k > j {
            new_di += usize::from(pk < b);
            new_dj += usize::from(pk < a);
        }
    }
    r += (new_di as i64 - digits[i] as i64) * fact[n - 1 - i] as i64;
    r += (new_dj as i64 - digits[j] as i64) * fact[n - 1 - j] as i64;
    r as u64
}

fn chunks(total: u64) -> Vec<(u64, u64)> {
    (0..total.div_ceil(CHUNK))
        .map(|c| (c * CHUNK, ((c + 1) * CHUNK).min(total)))
        .collect()
}

/// Visits every permutation with rank in `[lo, hi)` in rank order.
fn for_each_in_range(n: usize, lo: u64, hi: u64, mut f: impl FnMut(u64, &[usize], &[usize])) {
    let mut p = vec![0usize; n];
    let mut digits = vec![0usize; n];
    unrank_into(lo, &mut p);
    for r in lo..hi {
        lehmer_digits(&p, &mut digits);
        f(r, &p, &digits);
        if r + 1 < hi {
            next_permutation(&mut p);
        }
    }
}

pub fn build_lon<T: Scalar>(inst: &QapInstance<T>, opts: &BuildOptions) -> Result<Lon> {
    build_lon_with_basins(inst, opts).map(|(lon, _)| lon)
}

/// Like [`build_lon`], also returning the basin id of every rank.
pub fn build_lon_with_basins<T: Scalar>(
    inst: &QapInstance<T>,
    opts: &BuildOptions,
) -> Result<(Lon, Vec<u32>)> {
    let n = inst.n();
    let limit = opts.max_n.min(MAX_ENUMERATION_N);
    if n > limit {
        return Err(Error::SizeGuard { n, limit });
    }
    let total = factorial(n);
    let fact: Vec<u64> = (0..=n).map(factorial).collect();
    let ranges = chunks(total);

    // Pass 1: best-improving successor of every rank.
    let mut basin: Vec<u32> = vec![0; total as usize];
    {
        let mut slices: Vec<&mut [u32]> = Vec::with_capacity(ranges.len());
        let mut rest: &mut [u32] = &mut basin;
        for &(lo, hi) in &ranges {
            let (head, tail) = rest.split_at_mut((hi - lo) as usize);
            slices.push(head);
            rest = tail;
        }
        slices
            .into_par_iter()
            .zip(ranges.par_iter())
            .for_each(|(out, &(lo, hi))| {
                for_each_in_range(n, lo, hi, |r, p, digits| {
                    let succ = match best_swap(inst, p) {
                        Some((i, j)) => swapped_rank(p, digits, &fact, r, i, j),
                        None => r,
                    };
                    out[(r - lo) as usize] = succ as u32;
                });
            });
    }

    // Collapse successor chains onto their terminal optimum.
    let mut stack = Vec::new();
    for r in 0..basin.len() {
        if basin[r] & DONE != 0 {
            continue;
        }
        let mut x = r;
        let terminal = loop {
            let s = basin[x];
            if s & DONE != 0 {
                break s & !DONE;
            }
            if s as usize == x {
                break s;
            }
            stack.push(x);
            x = s as usize;
        };
        basin[x] = terminal | DONE;
        for y in stack.drain(..) {
            basin[y] = terminal | DONE;
        }
    }

    let optima: Vec<u32> = basin
        .iter()
        .enumerate()
        .filter(|&(r, &b)| (b & !DONE) as usize == r)
        .map(|(r, _)| r as u32)
        .collect();
    let v = optima.len();
    basin.par_iter_mut().for_each(|b| {
        let t = *b & !DONE;
        *b = optima.binary_search(&t).expect("terminal is an optimum") as u32;
    });

    // Pass 2: transition counts between basins.
    let basin_ref = &basin;
    let counts = ranges
        .par_iter()
        .fold(
            || Counts::new(v),
            |mut acc, &(lo, hi)| {
                for_each_in_range(n, lo, hi, |r, p, digits| {
                    let src = basin_ref[r as usize];
                    for (i, j) in swap_pairs(n) {
                        let nr = swapped_rank(p, digits, &fact, r, i, j);
                        acc.add(src, basin_ref[nr as usize]);
                    }
                });
                acc
            },
        )
        .reduce(|| Counts::new(v), Counts::merge);

    let mut sizes = vec![0u64; v];
    for &b in &basin {
        sizes[b as usize] += 1;
    }
    debug_assert_eq!(sizes.iter().sum::<u64>(), total);

    let per_config = neighborhood_size(n) as f64;
    let nodes: Vec<LocalOptimum> = optima
        .iter()
        .enumerate()
        .map(|(id, &r)| {
            let mut p = vec![0; n];
            unrank_into(r as u64, &mut p);
            let fitness = -inst.cost_of(&p).to_f64();
            LocalOptimum {
                id,
                perm: Permutation::new(p).expect("unranked permutation"),
                rank: r as u64,
                fitness,
                basin_size: sizes[id],
            }
        })
        .collect();

    let rows: Vec<Vec<(usize, f64)>> = counts
        .into_rows()
        .into_iter()
        .enumerate()
        .map(|(i, row)| {
            let denom = sizes[i] as f64 * per_config;
            row.into_iter()
                .map(|(j, c)| (j, c as f64 / denom))
                .collect()
        })
        .collect();

    let mut meta = opts.meta.clone();
    meta.n = n;
    if meta.name.is_empty() {
        meta.name = inst.name().to_string();
    }
    let lon = Lon { meta, nodes, rows };
    // n = 1 has no neighbors and therefore no transitions at all
    if n > 1 {
        lon.check_row_sums(1e-9)?;
    }
    Ok((lon, basin))
}

enum Counts {
    Dense { v: usize, cells: Vec<u64> },
    Sparse(Vec<HashMap<u32, u64>>),
}

impl Counts {
    fn new(v: usize) -> Self {
        if v <= DENSE_LIMIT {
            Counts::Dense {
                v,
                cells: vec![0; v * v],
            }
        } else {
            Counts::Sparse(vec![HashMap::new(); v])
        }
    }

    #[inline]
    fn add(&mut self, src: u32, dst: u32) {
        match self {
            Counts::Dense { v, cells } => cells[src as usize * *v + dst as usize] += 1,
            Counts::Sparse(rows) => *rows[src as usize].entry(dst).or_insert(0) += 1,
        }
    }

    fn merge(mut self, other: Counts) -> Counts {
        match (&mut self, other) {
            (Counts::Dense { cells, .. }, Counts::Dense { cells: o, .. }) => {
                cells.iter_mut().zip(o).for_each(|(a, b)| *a += b);
            }
            (Counts::Sparse(rows), Counts::Sparse(o)) => {
                for (row, orow) in rows.iter_mut().zip(o) {
                    for (k, c) in orow {
                        *row.entry(k).or_insert(0) += c;
                    }
                }
            }
            _ => unreachable!("accumulators of one build share a layout"),
        }
        self
    }

    fn into_rows(self) -> Vec<Vec<(usize, u64)>> {
        match self {
            Counts::Dense { v, cells } => cells
                .chunks(v.max(1))
                .take(v)
                .map(|row| {
                    row.iter()
                        .enumerate()
                        .filter(|&(_, &c)| c > 0)
                        .map(|(j, &c)| (j, c))
                        .collect()
                })
                .collect(),
            Counts::Sparse(rows) => rows
                .into_iter()
                .map(|row| {
                    let mut r: Vec<(usize, u64)> =
                        row.into_iter().map(|(j, c)| (j as usize, c)).collect();
                    r.sort_unstable();
                    r
                })
                .collect(),
        }
    }
}

/// The fittest node; ties go to the lowest permutation rank.
pub fn global_optimum(lon: &Lon) -> Result<&LocalOptimum> {
    lon.nodes()
        .iter()
        .reduce(|best, node| {
            if node.fitness > best.fitness
                || (node.fitness == best.fitness && node.rank < best.rank)
            {
                node
            } else {
                best
            }
        })
        .ok_or_else(|| Error::Structure("empty network".into()))
}
