//! Simulated annealing over spin states, minimizing `E = -Q * |V|`.
//!
//! With unit resolution the Reichardt–Bornholdt Hamiltonian is `-2W Q`, so
//! both objectives share their ground states; scaling by `|V|` keeps typical
//! single-node energy changes of order one whatever the graph's weights.
//! Each sweep visits the nodes in index order and redraws every node's spin
//! from the heat-bath distribution over all `max_k` states. The temperature
//! falls geometrically per sweep and a zero-temperature pass polishes the
//! final state. The best partition seen is returned.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Algorithm, Partition};
use crate::error::{Error, Result};
use crate::rng;
use crate::transform::UndirectedLon;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SpinGlassParams {
    pub max_k: usize,
    pub t_initial: f64,
    pub cooling: f64,
    pub sweeps: usize,
    pub seed: u64,
}

impl Default for SpinGlassParams {
    fn default() -> Self {
        Self {
            max_k: 25,
            t_initial: 1.0,
            cooling: 0.95,
            sweeps: 200,
            seed: 0,
        }
    }
}

impl SpinGlassParams {
    pub fn validate(&self) -> Result<()> {
        if self.max_k < 2 {
            return Err(Error::InvalidParam("max_k must be at least 2".into()));
        }
        if !(self.t_initial > 0.0 && self.t_initial.is_finite()) {
            return Err(Error::InvalidParam("t_initial must be positive".into()));
        }
        if !(self.cooling > 0.0 && self.cooling < 1.0) {
            return Err(Error::InvalidParam("cooling must lie in (0, 1)".into()));
        }
        Ok(())
    }
}

struct State<'a> {
    adj: &'a [Vec<(usize, f64)>],
    degree: Vec<f64>,
    total: f64,
    spin: Vec<usize>,
    strength: Vec<f64>,
    link: Vec<f64>,
}

impl State<'_> {
    /// Fills `link[s]` with the weight from `v` into each state and returns
    /// the modularity change for moving `v` into each state.
    fn gains(&mut self, v: usize, out: &mut [f64]) {
        for x in self.link.iter_mut() {
            *x = 0.0;
        }
        for &(u, w) in &self.adj[v] {
            self.link[self.spin[u]] += w;
        }
        let cur = self.spin[v];
        let k = self.degree[v];
        let w = self.total;
        let base_link = self.link[cur];
        let base_strength = self.strength[cur];
        for (s, g) in out.iter_mut().enumerate() {
            *g = if s == cur {
                0.0
            } else {
                (self.link[s] - base_link) / w
                    - k * (self.strength[s] - base_strength + k) / (2.0 * w * w)
            };
        }
    }

    fn apply(&mut self, v: usize, s: usize) {
        let k = self.degree[v];
        self.strength[self.spin[v]] -= k;
        self.strength[s] += k;
        self.spin[v] = s;
    }
}

pub fn spinglass_communities(g: &UndirectedLon, params: &SpinGlassParams) -> Result<Partition> {
    params.validate()?;
    let v = g.num_nodes();
    let total: f64 = g.edges().iter().map(|e| e.weight).sum();
    if v <= 1 || total == 0.0 {
        let raw: Vec<usize> = (0..v).collect();
        return Partition::scored(&raw, g, Algorithm::SpinGlass);
    }
    let adj = g.adjacency();
    let degree: Vec<f64> = adj
        .iter()
        .map(|row| row.iter().map(|&(_, w)| w).sum())
        .collect();
    let k = params.max_k;
    let mut rng = rng::stream(params.seed, 0);
    let spin: Vec<usize> = (0..v).map(|_| rng.random_range(0..k)).collect();
    let mut strength = vec![0.0; k];
    for (node, &s) in spin.iter().enumerate() {
        strength[s] += degree[node];
    }
    let mut st = State {
        adj: &adj,
        degree,
        total,
        spin,
        strength,
        link: vec![0.0; k],
    };

    let scale = v as f64;
    let mut q = super::modularity_of(g, &st.spin, true)?;
    let mut best_q = q;
    let mut best = st.spin.clone();
    let mut gains = vec![0.0; k];
    let mut probs = vec![0.0; k];
    let mut t = params.t_initial;
    for _ in 0..params.sweeps {
        for node in 0..v {
            st.gains(node, &mut gains);
            let top = gains.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let mut z = 0.0;
            for (p, &gq) in probs.iter_mut().zip(&gains) {
                *p = ((gq - top) * scale / t).exp();
                z += *p;
            }
            let mut pick = rng.random::<f64>() * z;
            let mut chosen = k - 1;
            for (s, &p) in probs.iter().enumerate() {
                if pick < p {
                    chosen = s;
                    break;
                }
                pick -= p;
            }
            if chosen != st.spin[node] {
                q += gains[chosen];
                st.apply(node, chosen);
                if q > best_q + 1e-12 {
                    best_q = q;
                    best.clone_from(&st.spin);
                }
            }
        }
        t *= params.cooling;
    }

    // zero-temperature polish from the best state
    st.spin.clone_from(&best);
    st.strength.iter_mut().for_each(|x| *x = 0.0);
    for node in 0..v {
        st.strength[st.spin[node]] += st.degree[node];
    }
    loop {
        let mut moved = false;
        for node in 0..v {
            st.gains(node, &mut gains);
            let (s, &gq) = gains
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.total_cmp(b.1).then(b.0.cmp(&a.0)))
                .expect("max_k >= 2");
            if gq > 1e-12 {
                st.apply(node, s);
                moved = true;
            }
        }
        if !moved {
            break;
        }
    }
    let polished = super::modularity_of(g, &st.spin, true)?;
    let exact_best = super::modularity_of(g, &best, true)?;
    let raw = if polished >= exact_best {
        &st.spin
    } else {
        &best
    };
    Partition::scored(raw, g, Algorithm::SpinGlass)
}

#[cfg(test)]
mod tests {
    use super::super::test_graphs::*;
    use super::super::{greedy_communities, modularity_of};
    use super::*;

    #[test]
    fn two_cliques_recovered_almost_always() {
        let g = two_cliques(5);
        let hits = (0..100)
            .filter(|&seed| {
                let p = spinglass_communities(
                    &g,
                    &SpinGlassParams {
                        max_k: 4,
                        seed,
                        ..Default::default()
                    },
                )
                .unwrap();
                p.k == 2
                    && (p.q - 0.5).abs() < 1e-12
                    && p.assignment == vec![0, 0, 0, 0, 0, 1, 1, 1, 1, 1]
            })
            .count();
        assert!(hits >= 95, "{hits} / 100");
    }

    #[test]
    fn single_node() {
        let p = spinglass_communities(&graph(1, &[]), &SpinGlassParams::default()).unwrap();
        assert_eq!((p.k, p.q), (1, 0.0));
    }

    #[test]
    fn not_much_worse_than_greedy() {
        for seed in 1..20 {
            let g = random_graph(30, 0.15, seed);
            let greedy = greedy_communities(&g);
            let sg = spinglass_communities(
                &g,
                &SpinGlassParams {
                    seed,
                    ..Default::default()
                },
            )
            .unwrap();
            assert!(
                sg.q >= greedy.q - 0.05,
                "seed {seed}: {} vs {}",
                sg.q,
                greedy.q
            );
            assert!((sg.q - modularity_of(&g, &sg.assignment, true).unwrap()).abs() < 1e-10);
        }
    }

    #[test]
    fn seed_determinism() {
        let g = random_graph(25, 0.2, 4);
        let p = SpinGlassParams {
            seed: 17,
            ..Default::default()
        };
        assert_eq!(
            spinglass_communities(&g, &p).unwrap(),
            spinglass_communities(&g, &p).unwrap()
        );
    }

    #[test]
    fn rejects_bad_params() {
        let g = two_cliques(2);
        for p in [
            SpinGlassParams {
                max_k: 1,
                ..Default::default()
            },
            SpinGlassParams {
                cooling: 1.0,
                ..Default::default()
            },
            SpinGlassParams {
                t_initial: 0.0,
                ..Default::default()
            },
        ] {
            assert!(spinglass_communities(&g, &p).is_err());
        }
    }
}
