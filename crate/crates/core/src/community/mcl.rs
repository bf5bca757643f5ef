//! Markov clustering on the directed LON.
//!
//! Column `j` of the flow matrix holds the transition probabilities out of
//! node `j`, so columns are stochastic from the start. Two optional weight
//! rescalings run before the first expansion: resetting each loop to the
//! largest off-diagonal entry of its column, and a one-off entrywise power
//! (pre-inflation). Both are off by default; on dense LONs the loop reset
//! tends to merge everything into one cluster.
//!
//! Clusters are read off the limit matrix: attractors are nodes with a
//! positive diagonal, attractors that exchange flow form one system, and each
//! node joins the system of the attractor holding most of its column.

use serde::{Deserialize, Serialize};

use super::{Algorithm, Partition};
use crate::error::{Error, Result};
use crate::lon::Lon;
use crate::transform::{symmetrize, DisjointSets};

const FIXED_POINT_TOL: f64 = 1e-9;
const ATTRACTOR_EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MclParams {
    pub inflation: f64,
    pub prune_eps: f64,
    pub max_iters: usize,
    pub loop_preprocess: bool,
    /// Entrywise power applied once to the input columns before iterating.
    pub pre_inflation: f64,
}

impl Default for MclParams {
    fn default() -> Self {
        Self {
            inflation: 2.0,
            prune_eps: 1e-5,
            max_iters: 200,
            loop_preprocess: false,
            pre_inflation: 1.0,
        }
    }
}

/// Dense `v x v` matrix, `m[row * v + col]`.
struct Flow {
    v: usize,
    m: Vec<f64>,
}

impl Flow {
    fn from_lon(lon: &Lon) -> Self {
        let v = lon.num_nodes();
        let mut m = vec![0.0; v * v];
        for e in lon.edges() {
            m[e.dst * v + e.src] = e.weight;
        }
        Flow { v, m }
    }

    fn normalize_columns(&mut self) {
        let v = self.v;
        for c in 0..v {
            let s: f64 = (0..v).map(|r| self.m[r * v + c]).sum();
            if s > 0.0 {
                for r in 0..v {
                    self.m[r * v + c] /= s;
                }
            }
        }
    }

    fn reset_loops_to_column_max(&mut self) {
        let v = self.v;
        for c in 0..v {
            let max_off = (0..v)
                .filter(|&r| r != c)
                .map(|r| self.m[r * v + c])
                .fold(0.0, f64::max);
            if max_off > 0.0 {
                self.m[c * v + c] = max_off;
            }
        }
        self.normalize_columns();
    }

    fn square(&self) -> Flow {
        let v = self.v;
        let mut out = vec![0.0; v * v];
        for i in 0..v {
            let row_out = &mut out[i * v..(i + 1) * v];
            for k in 0..v {
                let a = self.m[i * v + k];
                if a == 0.0 {
                    continue;
                }
                let row_k = &self.m[k * v..(k + 1) * v];
                for (o, &b) in row_out.iter_mut().zip(row_k) {
                    *o += a * b;
                }
            }
        }
        Flow { v, m: out }
    }

    fn inflate(&mut self, power: f64, prune: f64) {
        for x in self.m.iter_mut() {
            *x = x.powf(power);
        }
        self.normalize_columns();
        for x in self.m.iter_mut() {
            if *x < prune {
                *x = 0.0;
            }
        }
        self.normalize_columns();
    }
}

impl MclParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.inflation > 1.0 && self.inflation.is_finite()) {
            return Err(Error::InvalidParam("inflation must exceed 1".into()));
        }
        if !(self.pre_inflation > 0.0 && self.pre_inflation.is_finite()) {
            return Err(Error::InvalidParam("pre_inflation must be positive".into()));
        }
        if !(self.prune_eps >= 0.0 && self.prune_eps < 1.0) {
            return Err(Error::InvalidParam("prune_eps must lie in [0, 1)".into()));
        }
        Ok(())
    }
}

pub fn mcl(lon: &Lon, params: &MclParams) -> Result<Partition> {
    params.validate()?;
    let v = lon.num_nodes();
    let mut flow = Flow::from_lon(lon);
    if params.loop_preprocess {
        flow.reset_loops_to_column_max();
    }
    if params.pre_inflation != 1.0 {
        flow.inflate(params.pre_inflation, 0.0);
    }
    let mut converged = v == 0;
    for _ in 0..params.max_iters {
        let mut next = flow.square();
        next.inflate(params.inflation, params.prune_eps);
        let change = next
            .m
            .iter()
            .zip(&flow.m)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        flow = next;
        if change < FIXED_POINT_TOL {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::NonConvergence {
            iterations: params.max_iters,
        });
    }

    let m = &flow.m;
    let attractors: Vec<usize> = (0..v).filter(|&a| m[a * v + a] > ATTRACTOR_EPS).collect();
    let mut systems = DisjointSets::new(v);
    for &a in &attractors {
        for &b in &attractors {
            if a < b && (m[a * v + b] > ATTRACTOR_EPS || m[b * v + a] > ATTRACTOR_EPS) {
                systems.union(a, b);
            }
        }
    }
    // cluster ids ordered by each system's smallest attractor
    let mut cluster_of_root = std::collections::HashMap::new();
    let mut attractor_cluster = vec![usize::MAX; v];
    for &a in &attractors {
        let root = systems.find(a);
        let next = cluster_of_root.len();
        attractor_cluster[a] = *cluster_of_root.entry(root).or_insert(next);
    }
    let mut next_free = cluster_of_root.len();
    let raw: Vec<usize> = (0..v)
        .map(|node| {
            let mut best: Option<(f64, usize)> = None;
            for &a in &attractors {
                let mass = m[a * v + node];
                if mass <= ATTRACTOR_EPS {
                    continue;
                }
                let c = attractor_cluster[a];
                best = match best {
                    Some((bm, bc)) if bm > mass || (bm == mass && bc <= c) => Some((bm, bc)),
                    _ => Some((mass, c)),
                };
            }
            best.map(|(_, c)| c).unwrap_or_else(|| {
                next_free += 1;
                next_free - 1
            })
        })
        .collect();

    let unfiltered = symmetrize(lon);
    Partition::scored(&raw, &unfiltered, Algorithm::Mcl)
}
