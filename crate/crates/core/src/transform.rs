//! Symmetrization, quantile filtering, density statistics and export.

use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lon::{LocalOptimum, Lon, LonMeta};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UndirectedEdge {
    pub a: usize,
    pub b: usize,
    pub weight: f64,
}

/// Undirected LON. Edges join distinct nodes (`a < b`) and are sorted;
/// self-loop weights are kept apart in `self_loops`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UndirectedLon {
    pub meta: LonMeta,
    pub nodes: Vec<LocalOptimum>,
    edges: Vec<UndirectedEdge>,
    pub self_loops: Vec<f64>,
    /// `None` when unfiltered, otherwise the applied `(pi, quantile)`.
    pub threshold: Option<Threshold>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Threshold {
    pub pi: f64,
    pub quantile: f64,
}

impl UndirectedLon {
    pub fn new(
        meta: LonMeta,
        nodes: Vec<LocalOptimum>,
        mut edges: Vec<UndirectedEdge>,
        self_loops: Vec<f64>,
    ) -> Result<Self> {
        let v = nodes.len();
        if self_loops.len() != v {
            return Err(Error::Dimension {
                expected: v,
                actual: self_loops.len(),
            });
        }
        for e in edges.iter_mut() {
            if e.a == e.b || e.a >= v || e.b >= v {
                return Err(Error::Structure(format!(
                    "invalid edge {{{}, {}}}",
                    e.a, e.b
                )));
            }
            if !(e.weight > 0.0 && e.weight.is_finite()) {
                return Err(Error::Structure(format!(
                    "edge {{{}, {}}} has non-positive weight {}",
                    e.a, e.b, e.weight
                )));
            }
            if e.a > e.b {
                std::mem::swap(&mut e.a, &mut e.b);
            }
        }
        edges.sort_by_key(|e| (e.a, e.b));
        if edges
            .windows(2)
            .any(|w| (w[0].a, w[0].b) == (w[1].a, w[1].b))
        {
            return Err(Error::Structure("duplicate undirected edge".into()));
        }
        Ok(Self {
            meta,
            nodes,
            edges,
            self_loops,
            threshold: None,
        })
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn edges(&self) -> &[UndirectedEdge] {
        &self.edges
    }

    pub fn is_filtered(&self) -> bool {
        self.threshold.is_some()
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        let key = (i.min(j), i.max(j));
        self.edges
            .binary_search_by_key(&key, |e| (e.a, e.b))
            .map(|k| self.edges[k].weight)
            .unwrap_or(0.0)
    }

    /// Neighbor lists `(node, weight)`, sorted by node; self-loops excluded.
    pub fn adjacency(&self) -> Vec<Vec<(usize, f64)>> {
        let mut adj = vec![Vec::new(); self.num_nodes()];
        for e in &self.edges {
            adj[e.a].push((e.b, e.weight));
            adj[e.b].push((e.a, e.weight));
        }
        for row in adj.iter_mut() {
            row.sort_by_key(|&(j, _)| j);
        }
        adj
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.num_nodes()];
        for e in &self.edges {
            deg[e.a] += 1;
            deg[e.b] += 1;
        }
        deg
    }

    /// Connected over all nodes, ignoring self-loops.
    pub fn is_connected(&self) -> bool {
        let mut dsu = DisjointSets::new(self.num_nodes());
        for e in &self.edges {
            dsu.union(e.a, e.b);
        }
        dsu.components() <= 1
    }

    /// Same nodes and self-loops with a different edge set.
    pub fn with_edges(&self, edges: Vec<UndirectedEdge>) -> Result<Self> {
        let mut g = UndirectedLon::new(
            self.meta.clone(),
            self.nodes.clone(),
            edges,
            self.self_loops.clone(),
        )?;
        g.threshold = self.threshold;
        Ok(g)
    }
}

pub(crate) struct DisjointSets {
    parent: Vec<usize>,
    size: Vec<usize>,
    count: usize,
}

impl DisjointSets {
    pub(crate) fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
            size: vec![1; n],
            count: n,
        }
    }

    pub(crate) fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    pub(crate) fn union(&mut self, a: usize, b: usize) -> bool {
        let (mut ra, mut rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        if self.size[ra] < self.size[rb] {
            std::mem::swap(&mut ra, &mut rb);
        }
        self.parent[rb] = ra;
        self.size[ra] += self.size[rb];
        self.count -= 1;
        true
    }

    pub(crate) fn components(&self) -> usize {
        self.count
    }
}

/// `w_ij = (w_ij + w_ji) / 2` for every pair linked in either direction.
pub fn symmetrize(lon: &Lon) -> UndirectedLon {
    let v = lon.num_nodes();
    let mut edges = Vec::new();
    for i in 0..v {
        for &(j, w) in lon.out_edges(i) {
            if j > i {
                edges.push(UndirectedEdge {
                    a: i,
                    b: j,
                    weight: (w + lon.weight(j, i)) / 2.0,
                });
            } else if j < i && lon.weight(j, i) == 0.0 {
                edges.push(UndirectedEdge {
                    a: j,
                    b: i,
                    weight: w / 2.0,
                });
            }
        }
    }
    let self_loops = (0..v).map(|i| lon.self_loop(i)).collect();
    UndirectedLon::new(lon.meta().clone(), lon.nodes().to_vec(), edges, self_loops)
        .expect("symmetrized edges are well formed")
}

/// Empirical quantile with linear interpolation between order statistics:
/// `h = (m - 1) p`, `q = x[floor h] + (h - floor h)(x[floor h + 1] - x[floor h])`
/// over the ascending sample `x` of size `m`.
pub fn quantile(sorted: &[f64], p: f64) -> Option<f64> {
    if sorted.is_empty() {
        return None;
    }
    let p = p.clamp(0.0, 1.0);
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    Some(sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo]))
}

/// Removes every edge lighter than the `pi`-quantile of the edge weights.
/// Nodes and self-loops are kept; edges equal to the quantile survive.
pub fn filter(g: &UndirectedLon, pi: f64) -> UndirectedLon {
    let mut weights: Vec<f64> = g.edges.iter().map(|e| e.weight).collect();
    weights.sort_by(f64::total_cmp);
    let Some(q) = quantile(&weights, pi) else {
        let mut out = g.clone();
        out.threshold = Some(Threshold { pi, quantile: 0.0 });
        return out;
    };
    let edges = g.edges.iter().copied().filter(|e| e.weight >= q).collect();
    UndirectedLon {
        meta: g.meta.clone(),
        nodes: g.nodes.clone(),
        edges,
        self_loops: g.self_loops.clone(),
        threshold: Some(Threshold { pi, quantile: q }),
    }
}

/// `{0.00, 0.01, ..., 0.99}`.
pub fn default_grid() -> Vec<f64> {
    (0..100).map(|k| k as f64 / 100.0).collect()
}

#[derive(Debug, Clone)]
pub struct ConnectedThreshold {
    pub pi_star: f64,
    pub graph: UndirectedLon,
    /// The next grid value, whose filtered graph is disconnected. `None` when
    /// `pi_star` is the last grid value.
    pub disconnects_at: Option<f64>,
}

pub fn validate_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::InvalidParam("threshold grid is empty".into()));
    }
    if grid.windows(2).any(|w| w[0] >= w[1]) || grid.iter().any(|p| !(0.0..=1.0).contains(p)) {
        return Err(Error::InvalidParam(
            "threshold grid must be strictly ascending within [0, 1]".into(),
        ));
    }
    Ok(())
}

/// Largest grid value whose filtered graph stays connected.
pub fn max_connected_threshold(g: &UndirectedLon, grid: &[f64]) -> Result<ConnectedThreshold> {
    validate_grid(grid)?;
    let mut best: Option<(usize, UndirectedLon)> = None;
    for (k, &pi) in grid.iter().enumerate() {
        let f = filter(g, pi);
        if f.is_connected() {
            best = Some((k, f));
        } else {
            break;
        }
    }
    let (k, graph) = best.ok_or_else(|| {
        Error::Internal(format!(
            "graph '{}' is disconnected before any filtering",
            g.meta.name
        ))
    })?;
    Ok(ConnectedThreshold {
        pi_star: grid[k],
        graph,
        disconnects_at: grid.get(k + 1).copied(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityStats {
    pub num_vertices: usize,
    /// Directed edges between distinct nodes.
    pub num_edges: usize,
    pub num_self_loops: usize,
    /// `num_edges / num_vertices^2`.
    pub edges_over_v_squared: f64,
    /// `(num_edges + num_self_loops) / num_vertices^2`.
    pub edges_with_loops_over_v_squared: f64,
    /// Mean `w_ii` over all nodes (zero where a node has no self-loop).
    pub mean_self_loop: f64,
    /// Mean `w_ij`, `i != j`, over existing edges.
    pub mean_out_weight: Option<f64>,
}

pub fn density_stats(lon: &Lon) -> DensityStats {
    let v = lon.num_nodes();
    let (mut edges, mut loops, mut out_sum, mut loop_sum) = (0usize, 0usize, 0.0, 0.0);
    for e in lon.edges() {
        if e.src == e.dst {
            loops += 1;
            loop_sum += e.weight;
        } else {
            edges += 1;
            out_sum += e.weight;
        }
    }
    let v2 = (v * v).max(1) as f64;
    DensityStats {
        num_vertices: v,
        num_edges: edges,
        num_self_loops: loops,
        edges_over_v_squared: edges as f64 / v2,
        edges_with_loops_over_v_squared: (edges + loops) as f64 / v2,
        mean_self_loop: if v == 0 { 0.0 } else { loop_sum / v as f64 },
        mean_out_weight: (edges > 0).then(|| out_sum / edges as f64),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExportFormat {
    Graphml,
    EdgeCsv,
    NodeCsv,
    Dot,
}

impl ExportFormat {
    pub fn extension(self) -> &'static str {
        match self {
            ExportFormat::Graphml => "graphml",
            ExportFormat::EdgeCsv => "edges.csv",
            ExportFormat::NodeCsv => "nodes.csv",
            ExportFormat::Dot => "dot",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeRow {
    pub id: usize,
    pub fitness: f64,
    pub basin_size: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeRow {
    pub src: usize,
    pub dst: usize,
    pub weight: f64,
}

/// Flat node and edge tables shared by all export formats. Self-loops appear
/// as `src == dst` edges.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphTable {
    pub name: String,
    pub directed: bool,
    pub nodes: Vec<NodeRow>,
    pub edges: Vec<EdgeRow>,
}

fn node_rows(nodes: &[LocalOptimum]) -> Vec<NodeRow> {
    nodes
        .iter()
        .map(|n| NodeRow {
            id: n.id,
            fitness: n.fitness,
            basin_size: n.basin_size,
        })
        .collect()
}

impl From<&Lon> for GraphTable {
    fn from(lon: &Lon) -> Self {
        GraphTable {
            name: lon.meta().name.clone(),
            directed: true,
            nodes: node_rows(lon.nodes()),
            edges: lon
                .edges()
                .map(|e| EdgeRow {
                    src: e.src,
                    dst: e.dst,
                    weight: e.weight,
                })
                .collect(),
        }
    }
}

impl From<&UndirectedLon> for GraphTable {
    fn from(g: &UndirectedLon) -> Self {
        let mut edges: Vec<EdgeRow> = g
            .edges
            .iter()
            .map(|e| EdgeRow {
                src: e.a,
                dst: e.b,
                weight: e.weight,
            })
            .chain(
                g.self_loops
                    .iter()
                    .enumerate()
                    .filter(|&(_, &w)| w > 0.0)
                    .map(|(i, &w)| EdgeRow {
                        src: i,
                        dst: i,
                        weight: w,
                    }),
            )
            .collect();
        edges.sort_by_key(|e| (e.src, e.dst));
        GraphTable {
            name: g.meta.name.clone(),
            directed: false,
            nodes: node_rows(&g.nodes),
            edges,
        }
    }
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
        .replace('\'', "&apos;")
}

impl GraphTable {
    pub fn to_graphml(&self) -> String {
        let mut s = String::new();
        s.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
        s.push_str(
            "<graphml xmlns=\"http://graphml.graphdrawing.org/xmlns\" \
             xmlns:xsi=\"http://www.w3.org/2001/XMLSchema-instance\" \
             xsi:schemaLocation=\"http://graphml.graphdrawing.org/xmlns \
             http://graphml.graphdrawing.org/xmlns/1.0/graphml.xsd\">\n",
        );
        s.push_str(
            "  <key id=\"fitness\" for=\"node\" attr.name=\"fitness\" attr.type=\"double\"/>\n",
        );
        s.push_str(
            "  <key id=\"basin_size\" for=\"node\" attr.name=\"basin_size\" attr.type=\"long\"/>\n",
        );
        s.push_str(
            "  <key id=\"weight\" for=\"edge\" attr.name=\"weight\" attr.type=\"double\"/>\n",
        );
        let _ = writeln!(
            s,
            "  <graph id=\"{}\" edgedefault=\"{}\">",
            xml_escape(&self.name),
            if self.directed {
                "directed"
            } else {
                "undirected"
            }
        );
        for n in &self.nodes {
            let _ = writeln!(s, "    <node id=\"n{}\">", n.id);
            let _ = writeln!(s, "      <data key=\"fitness\">{}</data>", n.fitness);
            let _ = writeln!(s, "      <data key=\"basin_size\">{}</data>", n.basin_size);
            s.push_str("    </node>\n");
        }
        for e in &self.edges {
            let _ = writeln!(s, "    <edge source=\"n{}\" target=\"n{}\">", e.src, e.dst);
            let _ = writeln!(s, "      <data key=\"weight\">{}</data>", e.weight);
            s.push_str("    </edge>\n");
        }
        s.push_str("  </graph>\n</graphml>\n");
        s
    }

    /// Graphviz text. Node width grows with basin size; fill is darker for
    /// fitter nodes.
    pub fn to_dot(&self) -> String {
        let mut s = String::new();
        let (kind, arrow) = if self.directed {
            ("digraph", "->")
        } else {
            ("graph", "--")
        };
        let _ = writeln!(s, "{kind} \"{}\" {{", self.name.replace('"', "\\\""));
        s.push_str("  node [shape=circle, style=filled, fontsize=8];\n");
        let max_basin = self
            .nodes
            .iter()
            .map(|n| n.basin_size)
            .max()
            .unwrap_or(1)
            .max(1) as f64;
        let (lo, hi) = self
            .nodes
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), n| {
                (lo.min(n.fitness), hi.max(n.fitness))
            });
        for n in &self.nodes {
            let width = 0.2 + 0.8 * (n.basin_size as f64 / max_basin).sqrt();
            let t = if hi > lo {
                (n.fitness - lo) / (hi - lo)
            } else {
                1.0
            };
            let gray = (230.0 - 200.0 * t).round() as u8;
            let _ = writeln!(
                s,
                "  n{} [label=\"{}\", width={:.3}, fillcolor=\"#{gray:02x}{gray:02x}{gray:02x}\", fontcolor=\"{}\"];",
                n.id,
                n.id,
                width,
                if gray < 110 { "white" } else { "black" }
            );
        }
        for e in &self.edges {
            let _ = writeln!(
                s,
                "  n{} {arrow} n{} [weight=\"{}\", penwidth={:.3}];",
                e.src,
                e.dst,
                e.weight,
                0.3 + 3.0 * e.weight
            );
        }
        s.push_str("}\n");
        s
    }

    pub fn to_node_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        if self.nodes.is_empty() {
            w.write_record(["id", "fitness", "basin_size"])
                .expect("in-memory csv");
        }
        for n in &self.nodes {
            w.serialize(n).expect("in-memory csv");
        }
        String::from_utf8(w.into_inner().expect("in-memory csv")).expect("utf-8")
    }

    pub fn to_edge_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        if self.edges.is_empty() {
            w.write_record(["src", "dst", "weight"])
                .expect("in-memory csv");
        }
        for e in &self.edges {
            w.serialize(e).expect("in-memory csv");
        }
        String::from_utf8(w.into_inner().expect("in-memory csv")).expect("utf-8")
    }

    pub fn render(&self, format: ExportFormat) -> String {
        match format {
            ExportFormat::Graphml => self.to_graphml(),
            ExportFormat::EdgeCsv => self.to_edge_csv(),
            ExportFormat::NodeCsv => self.to_node_csv(),
            ExportFormat::Dot => self.to_dot(),
        }
    }

    pub fn export(&self, format: ExportFormat, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(self.render(format).as_bytes())
            .map_err(|e| Error::io(path, e))
    }

    /// Reads back a node table and an edge table written by [`GraphTable::export`].
    pub fn import_csv(
        name: &str,
        directed: bool,
        nodes_path: impl AsRef<Path>,
        edges_path: impl AsRef<Path>,
    ) -> Result<Self> {
        fn read<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
            let csv_err = |source| Error::Csv {
                path: path.to_path_buf(),
                source,
            };
            let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
            r.deserialize()
                .collect::<Result<Vec<T>, _>>()
                .map_err(csv_err)
        }
        Ok(GraphTable {
            name: name.to_string(),
            directed,
            nodes: read(nodes_path.as_ref())?,
            edges: read(edges_path.as_ref())?,
        })
    }
}
