//! Shared helpers for the integration tests.
#![allow(dead_code)]

use std::collections::HashMap;

use lonscape::{Lon, QapInstance};

/// LON computed the slow way: every permutation held as a `Vec`, costs by
/// the double sum, descent by scanning full neighbor costs.
pub struct NaiveLon {
    /// Optimum permutation -> (basin size, fitness).
    pub optima: HashMap<Vec<usize>, (u64, f64)>,
    /// (source optimum, target optimum) -> weight.
    pub weights: HashMap<(Vec<usize>, Vec<usize>), f64>,
}

pub fn naive_cost(inst: &QapInstance, p: &[usize]) -> i64 {
    let n = p.len();
    let mut c = 0;
    for i in 0..n {
        for j in 0..n {
            c += inst.d(i, j) * inst.f(p[i], p[j]);
        }
    }
    c
}

pub fn all_permutations(n: usize) -> Vec<Vec<usize>> {
    fn rec(cur: &mut Vec<usize>, used: &mut Vec<bool>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == used.len() {
            out.push(cur.clone());
            return;
        }
        for x in 0..used.len() {
            if !used[x] {
                used[x] = true;
                cur.push(x);
                rec(cur, used, out);
                cur.pop();
                used[x] = false;
            }
        }
    }
    let mut out = vec![];
    rec(&mut vec![], &mut vec![false; n], &mut out);
    out
}

fn swap(p: &[usize], i: usize, j: usize) -> Vec<usize> {
    let mut q = p.to_vec();
    q.swap(i, j);
    q
}

pub fn naive_lon(inst: &QapInstance) -> NaiveLon {
    let n = inst.n();
    let perms = all_permutations(n);
    let cost: HashMap<Vec<usize>, i64> = perms
        .iter()
        .map(|p| (p.clone(), naive_cost(inst, p)))
        .collect();
    let step = |p: &Vec<usize>| -> Option<Vec<usize>> {
        let mut best: Option<(i64, Vec<usize>)> = None;
        for i in 0..n {
            for j in i + 1..n {
                let q = swap(p, i, j);
                let c = cost[&q];
                if c < cost[p] && best.as_ref().is_none_or(|(bc, _)| c < *bc) {
                    best = Some((c, q));
                }
            }
        }
        best.map(|(_, q)| q)
    };
    let mut opt_of: HashMap<Vec<usize>, Vec<usize>> = HashMap::new();
    for p in &perms {
        let mut cur = p.clone();
        while let Some(next) = step(&cur) {
            cur = next;
        }
        opt_of.insert(p.clone(), cur);
    }
    let mut optima: HashMap<Vec<usize>, (u64, f64)> = HashMap::new();
    for o in opt_of.values() {
        optima.entry(o.clone()).or_insert((0, -(cost[o] as f64))).0 += 1;
    }
    let mut counts: HashMap<(Vec<usize>, Vec<usize>), u64> = HashMap::new();
    for p in &perms {
        for i in 0..n {
            for j in i + 1..n {
                let target = opt_of[&swap(p, i, j)].clone();
                *counts.entry((opt_of[p].clone(), target)).or_insert(0) += 1;
            }
        }
    }
    let pairs = (n * (n - 1) / 2) as f64;
    let weights = counts
        .into_iter()
        .map(|((a, b), c)| {
            let basin = optima[&a].0 as f64;
            ((a, b), c as f64 / (basin * pairs))
        })
        .collect();
    NaiveLon { optima, weights }
}

/// First mismatch between `lon` and the oracle, if any.
pub fn compare(lon: &Lon, naive: &NaiveLon, tol: f64) -> Result<(), String> {
    if lon.num_nodes() != naive.optima.len() {
        return Err(format!(
            "{} optima vs oracle {}",
            lon.num_nodes(),
            naive.optima.len()
        ));
    }
    let perm_of = |id: usize| lon.nodes()[id].perm.as_slice().to_vec();
    for node in lon.nodes() {
        let p = node.perm.as_slice().to_vec();
        let Some(&(basin, fit)) = naive.optima.get(&p) else {
            return Err(format!("{p:?} is not an optimum of the oracle"));
        };
        if basin != node.basin_size || fit != node.fitness {
            return Err(format!(
                "{p:?}: basin {} fitness {} vs oracle {basin} {fit}",
                node.basin_size, node.fitness
            ));
        }
    }
    let edges: Vec<_> = lon.edges().collect();
    if edges.len() != naive.weights.len() {
        return Err(format!(
            "{} edges vs oracle {}",
            edges.len(),
            naive.weights.len()
        ));
    }
    for e in edges {
        let key = (perm_of(e.src), perm_of(e.dst));
        let Some(&w) = naive.weights.get(&key) else {
            return Err(format!("edge {key:?} missing from oracle"));
        };
        if (w - e.weight).abs() > tol {
            return Err(format!("edge {key:?}: {} vs oracle {w}", e.weight));
        }
    }
    Ok(())
}

pub fn dummy_nodes(v: usize) -> Vec<lonscape::LocalOptimum> {
    (0..v)
        .map(|id| lonscape::LocalOptimum {
            id,
            perm: lonscape::Permutation::identity(1),
            rank: id as u64,
            fitness: -(id as f64) - 1.0,
            basin_size: 1,
        })
        .collect()
}

/// Undirected graph on `v` nodes; repeated pairs and loops in `edges` are
/// dropped.
pub fn graph(v: usize, edges: &[(usize, usize, f64)]) -> lonscape::UndirectedLon {
    let mut seen = std::collections::HashSet::new();
    let edges = edges
        .iter()
        .filter(|&&(a, b, _)| a != b && seen.insert((a.min(b), a.max(b))))
        .map(|&(a, b, weight)| lonscape::transform::UndirectedEdge { a, b, weight })
        .collect();
    lonscape::UndirectedLon::new(Default::default(), dummy_nodes(v), edges, vec![0.0; v]).unwrap()
}
