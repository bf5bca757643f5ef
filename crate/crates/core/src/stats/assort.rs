//! Fitness assortativity: does a node's fitness predict the transition
//! weighted mean fitness of the optima it escapes to?

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lon::Lon;
use crate::transform::UndirectedLon;

/// Below this many points the correlation is reported but flagged.
pub const LOW_N: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GraphKind {
    Unfiltered,
    Filtered,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssortativityReport {
    pub graph_kind: GraphKind,
    /// `None` when either coordinate is constant.
    pub spearman_r: Option<f64>,
    /// Least-squares slope of mean neighbor fitness on fitness.
    pub slope: Option<f64>,
    pub n_points: usize,
    /// Nodes without a non-self outgoing edge.
    pub excluded: usize,
    pub low_n: bool,
    /// `(fitness, mean neighbor fitness)` for every included node.
    pub points: Vec<(f64, f64)>,
}

/// Ranks starting at 1, ties sharing their average rank.
pub fn average_ranks(xs: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut ranks = vec![0.0; xs.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && xs[order[j]] == xs[order[i]] {
            j += 1;
        }
        let avg = (i + j + 1) as f64 / 2.0;
        for &k in &order[i..j] {
            ranks[k] = avg;
        }
        i = j;
    }
    ranks
}

pub fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    (sxx > 0.0 && syy > 0.0).then(|| (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

pub fn spearman(x: &[f64], y: &[f64]) -> Option<f64> {
    pearson(&average_ranks(x), &average_ranks(y))
}

fn ols_slope(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Uses the directed weights of `lon`, or the averaged weights of `filtered`
/// when given. Self-loops never count.
pub fn fitness_assortativity(
    lon: &Lon,
    filtered: Option<&UndirectedLon>,
) -> Result<AssortativityReport> {
    let v = lon.num_nodes();
    let fitness: Vec<f64> = lon.nodes().iter().map(|n| n.fitness).collect();
    let rows: Vec<Vec<(usize, f64)>> = match filtered {
        None => (0..v)
            .map(|i| {
                lon.out_edges(i)
                    .iter()
                    .copied()
                    .filter(|&(j, _)| j != i)
                    .collect()
            })
            .collect(),
        Some(g) => {
            if g.num_nodes() != v {
                return Err(Error::Dimension {
                    expected: v,
                    actual: g.num_nodes(),
                });
            }
            g.adjacency()
        }
    };
    let mut points = Vec::with_capacity(v);
    for (i, row) in rows.iter().enumerate() {
        let total: f64 = row.iter().map(|&(_, w)| w).sum();
        if total > 0.0 {
            let y = row.iter().map(|&(j, w)| w * fitness[j]).sum::<f64>() / total;
            points.push((fitness[i], y));
        }
    }
    let n_points = points.len();
    if n_points < 2 {
        return Err(Error::Degenerate(format!(
            "assortativity needs 2 nodes with outgoing edges, found {n_points}"
        )));
    }
    let (x, y): (Vec<f64>, Vec<f64>) = points.iter().copied().unzip();
    Ok(AssortativityReport {
        graph_kind: if filtered.is_some() {
            GraphKind::Filtered
        } else {
            GraphKind::Unfiltered
        },
        spearman_r: spearman(&x, &y),
        slope: ols_slope(&x, &y),
        n_points,
        excluded: v - n_points,
        low_n: n_points < LOW_N,
        points,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lon::{Edge, LocalOptimum, LonMeta};
    use crate::qap::Permutation;

    fn lon(fitness: &[f64], edges: &[(usize, usize, f64)]) -> Lon {
        Lon::from_parts(
            LonMeta::default(),
            fitness
                .iter()
                .enumerate()
                .map(|(id, &fitness)| LocalOptimum {
                    id,
                    perm: Permutation::identity(1),
                    rank: id as u64,
                    fitness,
                    basin_size: 1,
                })
                .collect(),
            edges
                .iter()
                .map(|&(src, dst, weight)| Edge { src, dst, weight })
                .collect(),
        )
        .unwrap()
    }

    /// Classic formula for tie-free data.
    fn spearman_d2(x: &[f64], y: &[f64]) -> f64 {
        let rank = |v: &[f64]| -> Vec<usize> {
            v.iter()
                .map(|a| v.iter().filter(|b| *b < a).count())
                .collect()
        };
        let (rx, ry) = (rank(x), rank(y));
        let n = x.len() as f64;
        let d2: f64 = rx
            .iter()
            .zip(&ry)
            .map(|(&a, &b)| (a as f64 - b as f64).powi(2))
            .sum();
        1.0 - 6.0 * d2 / (n * (n * n - 1.0))
    }

    #[test]
    fn average_ranks_with_ties() {
        assert_eq!(
            average_ranks(&[3.0, 1.0, 3.0, 2.0]),
            vec![3.5, 1.0, 3.5, 2.0]
        );
    }

    #[test]
    fn matches_rank_difference_formula() {
        let x = [0.3, -1.2, 4.0, 2.2, 0.0, 7.5, -3.0];
        let y = [1.0, 0.5, -2.0, 3.3, 0.1, 2.0, -0.4];
        assert!((spearman(&x, &y).unwrap() - spearman_d2(&x, &y)).abs() < 1e-12);
    }

    #[test]
    fn two_node_lon() {
        let l = lon(
            &[-5.0, -15.0],
            &[(0, 0, 0.5), (0, 1, 0.5), (1, 0, 0.2), (1, 1, 0.8)],
        );
        let r = fitness_assortativity(&l, None).unwrap();
        assert_eq!(r.spearman_r, Some(-1.0));
        assert!(r.low_n);
        assert_eq!(r.points, vec![(-5.0, -15.0), (-15.0, -5.0)]);
        assert_eq!(r.slope, Some(-1.0));
    }

    #[test]
    fn monotone_neighbor_fitness() {
        // every node escapes to the next fitter one, so y = x + 1
        let inc = lon(
            &[-3.0, -2.0, -1.0],
            &[(0, 1, 1.0), (1, 2, 1.0), (2, 2, 1.0)],
        );
        // node 2 has only its loop and is excluded
        let r = fitness_assortativity(&inc, None).unwrap();
        assert_eq!((r.n_points, r.excluded), (2, 1));
        assert_eq!(r.spearman_r, Some(1.0));
    }

    #[test]
    fn filtered_uses_undirected_weights() {
        let l = lon(
            &[-1.0, -2.0, -3.0],
            &[
                (0, 1, 0.5),
                (0, 2, 0.5),
                (1, 0, 1.0),
                (2, 0, 0.9),
                (2, 2, 0.1),
            ],
        );
        let g = crate::transform::symmetrize(&l);
        let r = fitness_assortativity(&l, Some(&g)).unwrap();
        assert_eq!(r.graph_kind, GraphKind::Filtered);
        // node 0: (0.75*-2 + 0.7*-3) / 1.45
        assert!((r.points[0].1 - (0.75 * -2.0 + 0.7 * -3.0) / 1.45).abs() < 1e-12);
        assert_eq!(r.points[1].1, -1.0);
    }
}
