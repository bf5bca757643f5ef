//! Modularity and community detection on LONs.
//!
//! Modularity follows Newman–Girvan on the undirected graph:
//! `Q = sum_c [ W_c / W - (S_c / 2W)^2 ]`, where `W` is the total edge weight,
//! `W_c` the weight inside community `c` and `S_c` the summed weighted degree
//! of its nodes. Self-loops are left out of every term.

mod greedy;
mod mcl;
mod spinglass;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::transform::UndirectedLon;

pub use greedy::greedy_communities;
pub use mcl::{mcl, MclParams};
pub use spinglass::{spinglass_communities, SpinGlassParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Greedy,
    SpinGlass,
    Mcl,
}

impl Algorithm {
    pub fn as_str(self) -> &'static str {
        match self {
            Algorithm::Greedy => "greedy",
            Algorithm::SpinGlass => "spinglass",
            Algorithm::Mcl => "mcl",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "greedy" => Ok(Algorithm::Greedy),
            "spinglass" | "spin-glass" | "sg" => Ok(Algorithm::SpinGlass),
            "mcl" => Ok(Algorithm::Mcl),
            other => Err(Error::InvalidParam(format!("unknown algorithm '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Partition {
    /// Community of each node, ids `0..k` in order of first appearance.
    pub assignment: Vec<usize>,
    pub k: usize,
    pub q: f64,
    pub algorithm: Algorithm,
    pub source: String,
}

impl Partition {
    /// Relabels `raw` into contiguous ids and scores it on `g` (weighted).
    pub fn scored(raw: &[usize], g: &UndirectedLon, algorithm: Algorithm) -> Result<Self> {
        let (assignment, k) = compact(raw);
        let q = modularity_of(g, &assignment, true)?;
        Ok(Self {
            assignment,
            k,
            q,
            algorithm,
            source: g.meta.name.clone(),
        })
    }

    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.k];
        for (node, &c) in self.assignment.iter().enumerate() {
            out[c].push(node);
        }
        out
    }

    /// `node_id,community_id` rows.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("node_id,community_id\n");
        for (node, c) in self.assignment.iter().enumerate() {
            s.push_str(&format!("{node},{c}\n"));
        }
        s
    }

    pub fn from_csv(text: &str, algorithm: Algorithm, source: &str) -> Result<Self> {
        let mut r = csv::Reader::from_reader(text.as_bytes());
        let mut rows: Vec<(usize, usize)> = Vec::new();
        for rec in r.deserialize() {
            let rec: (usize, usize) =
                rec.map_err(|e| Error::Structure(format!("partition csv: {e}")))?;
            rows.push(rec);
        }
        rows.sort_unstable();
        if rows.iter().enumerate().any(|(i, &(node, _))| node != i) {
            return Err(Error::Structure(
                "partition csv must list nodes 0..n once each".into(),
            ));
        }
        let raw: Vec<usize> = rows.into_iter().map(|(_, c)| c).collect();
        let (assignment, k) = compact(&raw);
        Ok(Self {
            assignment,
            k,
            q: f64::NAN,
            algorithm,
            source: source.to_string(),
        })
    }
}

/// Relabels community ids to `0..k` by first appearance.
pub fn compact(raw: &[usize]) -> (Vec<usize>, usize) {
    let mut map = std::collections::HashMap::new();
    let assignment = raw
        .iter()
        .map(|&c| {
            let next = map.len();
            *map.entry(c).or_insert(next)
        })
        .collect();
    (assignment, map.len())
}

pub fn modularity(g: &UndirectedLon, part: &Partition, weighted: bool) -> Result<f64> {
    modularity_of(g, &part.assignment, weighted)
}

/// Modularity of an arbitrary community assignment (ids need not be dense).
pub fn modularity_of(g: &UndirectedLon, assignment: &[usize], weighted: bool) -> Result<f64> {
    if assignment.len() != g.num_nodes() {
        return Err(Error::Structure(format!(
            "assignment covers {} nodes, graph has {}",
            assignment.len(),
            g.num_nodes()
        )));
    }
    let (labels, k) = compact(assignment);
    let mut inside = vec![0.0; k];
    let mut strength = vec![0.0; k];
    let mut total = 0.0;
    for e in g.edges() {
        let w = if weighted { e.weight } else { 1.0 };
        total += w;
        let (ca, cb) = (labels[e.a], labels[e.b]);
        strength[ca] += w;
        strength[cb] += w;
        if ca == cb {
            inside[ca] += w;
        }
    }
    if total == 0.0 {
        return Ok(0.0);
    }
    Ok(inside
        .iter()
        .zip(&strength)
        .map(|(&wc, &sc)| wc / total - (sc / (2.0 * total)).powi(2))
        .sum())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossEvaluation {
    pub algorithm: Algorithm,
    pub k: usize,
    pub q: f64,
}

/// Weighted modularity of each partition on the unfiltered symmetrized graph.
pub fn cross_evaluate(
    partitions: &[Partition],
    unfiltered: &UndirectedLon,
) -> Result<Vec<CrossEvaluation>> {
    if unfiltered.is_filtered() {
        return Err(Error::Contract(
            "cross evaluation expects the unfiltered symmetrized graph".into(),
        ));
    }
    partitions
        .iter()
        .map(|p| {
            if p.assignment.len() != unfiltered.num_nodes() {
                return Err(Error::Structure(format!(
                    "{} partition covers {} nodes, graph has {}",
                    p.algorithm,
                    p.assignment.len(),
                    unfiltered.num_nodes()
                )));
            }
            Ok(CrossEvaluation {
                algorithm: p.algorithm,
                k: p.k,
                q: modularity(unfiltered, p, true)?,
            })
        })
        .collect()
}

/// A community detector usable on undirected graphs (and on their null
/// models).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "algorithm", rename_all = "lowercase")]
pub enum Detector {
    Greedy,
    SpinGlass(SpinGlassParams),
}

impl Detector {
    pub fn algorithm(&self) -> Algorithm {
        match self {
            Detector::Greedy => Algorithm::Greedy,
            Detector::SpinGlass(_) => Algorithm::SpinGlass,
        }
    }

    /// Runs the detector; `seed` overrides the spin-glass seed and is ignored
    /// by the deterministic greedy method.
    pub fn detect(&self, g: &UndirectedLon, seed: u64) -> Result<Partition> {
        match self {
            Detector::Greedy => Ok(greedy_communities(g)),
            Detector::SpinGlass(p) => {
                let p = SpinGlassParams { seed, ..p.clone() };
                spinglass_communities(g, &p)
            }
        }
    }
}

#[cfg(test)]
pub(crate) mod test_graphs {
    use crate::lon::{LocalOptimum, LonMeta};
    use crate::qap::Permutation;
    use crate::transform::{UndirectedEdge, UndirectedLon};

    pub fn graph(v: usize, edges: &[(usize, usize, f64)]) -> UndirectedLon {
        let nodes = (0..v)
            .map(|id| LocalOptimum {
                id,
                perm: Permutation::identity(1),
                rank: id as u64,
                fitness: -(id as f64) - 1.0,
                basin_size: 1,
            })
            .collect();
        UndirectedLon::new(
            LonMeta {
                name: "test".into(),
                ..Default::default()
            },
            nodes,
            edges
                .iter()
                .map(|&(a, b, weight)| UndirectedEdge { a, b, weight })
                .collect(),
            vec![0.0; v],
        )
        .unwrap()
    }

    pub fn two_cliques(size: usize) -> UndirectedLon {
        let mut e = vec![];
        for off in [0, size] {
            for a in 0..size {
                for b in a + 1..size {
                    e.push((off + a, off + b, 1.0));
                }
            }
        }
        graph(2 * size, &e)
    }

    /// Small deterministic pseudo-random weighted graph.
    pub fn random_graph(v: usize, density: f64, mut state: u64) -> UndirectedLon {
        let mut next = || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        let mut e = vec![];
        for a in 0..v {
            for b in a + 1..v {
                if next() < density {
                    e.push((a, b, 0.01 + next()));
                }
            }
        }
        graph(v, &e)
    }
}

#[cfg(test)]
mod tests {
    use super::test_graphs::*;
    use super::*;

    #[test]
    fn one_community_scores_zero() {
        let g = random_graph(12, 0.4, 99);
        let q = modularity_of(&g, &[0; 12], true).unwrap();
        assert!(q.abs() < 1e-15);
    }

    #[test]
    fn two_cliques_score_half() {
        let g = two_cliques(4);
        let part: Vec<usize> = (0..8).map(|i| i / 4).collect();
        assert!((modularity_of(&g, &part, true).unwrap() - 0.5).abs() < 1e-12);
        assert!((modularity_of(&g, &part, false).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn singletons_never_positive() {
        for seed in 1..20 {
            let g = random_graph(15, 0.3, seed);
            let singles: Vec<usize> = (0..15).collect();
            assert!(modularity_of(&g, &singles, true).unwrap() <= 0.0);
        }
    }

    #[test]
    fn unweighted_ignores_weights() {
        let g = graph(4, &[(0, 1, 5.0), (1, 2, 0.1), (2, 3, 5.0)]);
        let part = [0, 0, 1, 1];
        let unweighted = modularity_of(&g, &part, false).unwrap();
        // two of three unit edges inside, strengths 3 and 3 out of 6
        assert!((unweighted - (2.0 / 3.0 - 0.5)).abs() < 1e-12);
        assert!(modularity_of(&g, &part, true).unwrap() > unweighted);
    }

    #[test]
    fn missing_node_is_structural_error() {
        let g = two_cliques(3);
        assert!(matches!(
            modularity_of(&g, &[0; 5], true),
            Err(Error::Structure(_))
        ));
    }

    #[test]
    fn compact_relabels_by_first_appearance() {
        assert_eq!(compact(&[7, 7, 3, 9, 3]), (vec![0, 0, 1, 2, 1], 3));
    }

    #[test]
    fn partition_csv_round_trip() {
        let g = two_cliques(3);
        let p = Partition::scored(&[5, 5, 5, 2, 2, 2], &g, Algorithm::Greedy).unwrap();
        let back = Partition::from_csv(&p.to_csv(), Algorithm::Greedy, "test").unwrap();
        assert_eq!(back.assignment, p.assignment);
        assert!(Partition::from_csv("node_id,community_id\n1,0\n", Algorithm::Mcl, "x").is_err());
    }

    #[test]
    fn cross_evaluation() {
        let g = two_cliques(3);
        let a = Partition::scored(&[0, 0, 0, 1, 1, 1], &g, Algorithm::Greedy).unwrap();
        let b = Partition {
            algorithm: Algorithm::SpinGlass,
            ..a.clone()
        };
        let singles = Partition::scored(&[0, 1, 2, 3, 4, 5], &g, Algorithm::Mcl).unwrap();
        let res = cross_evaluate(&[a, b, singles], &g).unwrap();
        assert_eq!(res[0].q, res[1].q);
        assert!(res[2].q <= 0.0);
        let short = Partition {
            assignment: vec![0, 0, 1],
            k: 2,
            q: f64::NAN,
            algorithm: Algorithm::Mcl,
            source: String::new(),
        };
        assert!(cross_evaluate(&[short], &g).is_err());
        let filtered = crate::transform::filter(&g, 0.5);
        assert!(cross_evaluate(&[], &filtered).is_err());
    }

    #[test]
    fn algorithm_names() {
        for a in [Algorithm::Greedy, Algorithm::SpinGlass, Algorithm::Mcl] {
            assert_eq!(a.as_str().parse::<Algorithm>().unwrap(), a);
        }
    }
}
