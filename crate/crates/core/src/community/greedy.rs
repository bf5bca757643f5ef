//! Agglomerative modularity maximization (Clauset–Newman–Moore).
//!
//! Merge gains `dQ = 2 (e_ij - a_i a_j)` live in a max-heap with lazy
//! invalidation: every community carries a version that is bumped whenever it
//! absorbs another one, and heap entries with stale versions are skipped.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap};

use super::{Algorithm, Partition};
use crate::transform::{DisjointSets, UndirectedLon};

/// Merges with a gain at or below this are treated as no improvement.
const MIN_GAIN: f64 = 1e-14;

#[derive(Debug, Clone, Copy)]
struct Candidate {
    gain: f64,
    a: usize,
    b: usize,
    va: u32,
    vb: u32,
}

impl PartialEq for Candidate {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Candidate {}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Candidate {
    // Larger gain first; on equal gain the lexicographically smaller pair.
    fn cmp(&self, other: &Self) -> Ordering {
        self.gain
            .total_cmp(&other.gain)
            .then_with(|| (other.a, other.b).cmp(&(self.a, self.b)))
            .then_with(|| (other.va, other.vb).cmp(&(self.va, self.vb)))
    }
}

pub fn greedy_communities(g: &UndirectedLon) -> Partition {
    let v = g.num_nodes();
    let total: f64 = g.edges().iter().map(|e| e.weight).sum();
    let mut dsu = DisjointSets::new(v);
    if total > 0.0 {
        let norm = 2.0 * total;
        let mut a = vec![0.0; v];
        let mut links: Vec<BTreeMap<usize, f64>> = vec![BTreeMap::new(); v];
        for e in g.edges() {
            let x = e.weight / norm;
            a[e.a] += x;
            a[e.b] += x;
            *links[e.a].entry(e.b).or_insert(0.0) += x;
            *links[e.b].entry(e.a).or_insert(0.0) += x;
        }
        let mut version = vec![0u32; v];
        let mut alive = vec![true; v];
        let mut heap = BinaryHeap::new();
        for i in 0..v {
            for (&j, &eij) in links[i].range(i + 1..) {
                heap.push(Candidate {
                    gain: 2.0 * (eij - a[i] * a[j]),
                    a: i,
                    b: j,
                    va: 0,
                    vb: 0,
                });
            }
        }
        while let Some(c) = heap.pop() {
            if !(alive[c.a] && alive[c.b] && version[c.a] == c.va && version[c.b] == c.vb) {
                continue;
            }
            if c.gain <= MIN_GAIN {
                break;
            }
            // absorb b into a (a < b)
            let (keep, gone) = (c.a, c.b);
            let absorbed = std::mem::take(&mut links[gone]);
            for (k, ebk) in absorbed {
                links[k].remove(&gone);
                if k == keep {
                    continue;
                }
                *links[keep].entry(k).or_insert(0.0) += ebk;
                *links[k].entry(keep).or_insert(0.0) += ebk;
            }
            links[keep].remove(&gone);
            a[keep] += a[gone];
            alive[gone] = false;
            version[keep] += 1;
            dsu.union(keep, gone);
            for (&k, &ek) in &links[keep] {
                let (x, y) = if keep < k { (keep, k) } else { (k, keep) };
                heap.push(Candidate {
                    gain: 2.0 * (ek - a[keep] * a[k]),
                    a: x,
                    b: y,
                    va: version[x],
                    vb: version[y],
                });
            }
        }
    }
    let raw: Vec<usize> = (0..v).map(|i| dsu.find(i)).collect();
    Partition::scored(&raw, g, Algorithm::Greedy).expect("assignment covers the graph")
}
