//! Property checks shared by the property suite and the acceptance battery.
#![allow(dead_code)]

use lonscape::community::{
    greedy_communities, modularity_of, spinglass_communities, SpinGlassParams,
};
use lonscape::qap::factorial;
use lonscape::stats::{rewire_null, RewireOptions};
use lonscape::transform::{filter, max_connected_threshold};
use lonscape::*;
use proptest::prelude::*;
use proptest::test_runner::{TestCaseResult, TestRunner};

use crate::common::graph;

pub const CASES: u32 = 1000;

pub fn config() -> ProptestConfig {
    ProptestConfig {
        failure_persistence: None,
        ..ProptestConfig::with_cases(CASES)
    }
}

pub fn arb_graph(max_v: usize) -> impl Strategy<Value = UndirectedLon> {
    (2..=max_v).prop_flat_map(|v| {
        prop::collection::vec((0..v, 0..v, 0.001f64..1.0), 1..(v * v).max(2))
            .prop_map(move |e| graph(v, &e))
    })
}

/// Spanning path plus random extra edges, so the graph is connected.
pub fn arb_connected_graph(max_v: usize) -> impl Strategy<Value = UndirectedLon> {
    (3..=max_v).prop_flat_map(|v| {
        (
            prop::collection::vec(0.001f64..1.0, v - 1),
            prop::collection::vec((0..v, 0..v, 0.001f64..1.0), 0..v * 3),
        )
            .prop_map(move |(path, extra)| {
                let mut e: Vec<_> = path
                    .iter()
                    .enumerate()
                    .map(|(i, &w)| (i, i + 1, w))
                    .collect();
                e.extend(extra);
                graph(v, &e)
            })
    })
}

pub fn arb_perm() -> impl Strategy<Value = Vec<usize>> {
    (1usize..=12).prop_flat_map(|n| Just((0..n).collect::<Vec<_>>()).prop_shuffle())
}

fn keys(g: &UndirectedLon) -> Vec<(usize, usize)> {
    g.edges().iter().map(|e| (e.a, e.b)).collect()
}

fn check_partition(assignment: &[usize], k: usize, v: usize) -> TestCaseResult {
    prop_assert_eq!(assignment.len(), v);
    let mut seen = vec![false; k];
    for &c in assignment {
        prop_assert!(c < k);
        seen[c] = true;
    }
    prop_assert!(seen.iter().all(|&s| s));
    Ok(())
}

pub fn rank_unrank_bijection(n: usize, frac: f64) -> TestCaseResult {
    let r = ((factorial(n) as f64 * frac) as u64).min(factorial(n) - 1);
    let p = Permutation::unrank(r, n).unwrap();
    prop_assert_eq!(p.rank(), r);
    prop_assert_eq!(Permutation::new(p.as_slice().to_vec()).unwrap(), p);
    Ok(())
}

pub fn rank_then_unrank(p: Vec<usize>) -> TestCaseResult {
    let n = p.len();
    let perm = Permutation::new(p).unwrap();
    prop_assert!(perm.rank() < factorial(n));
    prop_assert_eq!(Permutation::unrank(perm.rank(), n).unwrap(), perm);
    Ok(())
}

pub fn filter_is_monotone(g: UndirectedLon, p1: f64, p2: f64) -> TestCaseResult {
    let (lo, hi) = if p1 <= p2 { (p1, p2) } else { (p2, p1) };
    let a = filter(&g, lo);
    let b = filter(&g, hi);
    let ka = keys(&a);
    prop_assert!(keys(&b).iter().all(|k| ka.contains(k)));
    prop_assert!(b.edges().iter().all(|e| e.weight == g.weight(e.a, e.b)));
    Ok(())
}

pub fn connectivity_is_monotone_in_pi(g: UndirectedLon) -> TestCaseResult {
    let grid: Vec<f64> = (0..100).map(|k| k as f64 / 100.0).collect();
    let conn: Vec<bool> = grid
        .iter()
        .map(|&pi| filter(&g, pi).is_connected())
        .collect();
    if let Some(first_bad) = conn.iter().position(|&c| !c) {
        prop_assert!(conn[first_bad..].iter().all(|&c| !c));
    }
    let ct = max_connected_threshold(&g, &grid).unwrap();
    prop_assert!(ct.graph.is_connected());
    let idx = grid.iter().position(|&x| x == ct.pi_star).unwrap();
    prop_assert!(conn[..=idx].iter().all(|&c| c));
    prop_assert!(idx + 1 == grid.len() || !conn[idx + 1]);
    Ok(())
}

pub fn greedy_partition_invariants(g: UndirectedLon) -> TestCaseResult {
    let p = greedy_communities(&g);
    check_partition(&p.assignment, p.k, g.num_nodes())?;
    prop_assert!((p.q - modularity_of(&g, &p.assignment, true).unwrap()).abs() < 1e-10);
    prop_assert!(p.q >= -0.5 - 1e-12 && p.q <= 1.0);
    Ok(())
}

pub fn spinglass_partition_invariants(g: UndirectedLon, seed: u64) -> TestCaseResult {
    let params = SpinGlassParams {
        sweeps: 20,
        max_k: 6,
        seed,
        ..Default::default()
    };
    let p = spinglass_communities(&g, &params).unwrap();
    check_partition(&p.assignment, p.k, g.num_nodes())?;
    prop_assert!((p.q - modularity_of(&g, &p.assignment, true).unwrap()).abs() < 1e-10);
    Ok(())
}

pub fn lon_nodes_are_fixed_points(n: usize, seed: u64, real: bool) -> TestCaseResult {
    let class = if real {
        InstanceClass::RealLike
    } else {
        InstanceClass::Uniform
    };
    let inst = generate(&GeneratorParams::new(class, n, seed)).unwrap();
    let lon = build_lon(&inst, &BuildOptions::default()).unwrap();
    let total: u64 = lon.nodes().iter().map(|o| o.basin_size).sum();
    prop_assert_eq!(total, factorial(n));
    for o in lon.nodes() {
        prop_assert_eq!(&best_improvement(&inst, &o.perm).unwrap(), &o.perm);
        let c = inst.cost(&o.perm).unwrap();
        for q in o.perm.neighbors() {
            prop_assert!(inst.cost(&q).unwrap() >= c);
        }
    }
    prop_assert!(lon.check_row_sums(1e-9).is_ok());
    Ok(())
}

pub fn rewiring_preserves_degrees(g: UndirectedLon, seed: u64) -> TestCaseResult {
    prop_assume!(g.edges().len() >= 2);
    let r = rewire_null(
        &g,
        seed,
        &RewireOptions {
            swap_factor: 5,
            ..Default::default()
        },
    )
    .unwrap();
    prop_assert_eq!(r.graph.degrees(), g.degrees());
    prop_assert_eq!(r.graph.edges().len(), g.edges().len());
    prop_assert_eq!(r.graph.num_nodes(), g.num_nodes());
    prop_assert!(r.graph.is_connected());
    let sorted = |x: &UndirectedLon| {
        let mut w: Vec<f64> = x.edges().iter().map(|e| e.weight).collect();
        w.sort_by(f64::total_cmp);
        w
    };
    prop_assert_eq!(sorted(&r.graph), sorted(&g));
    Ok(())
}

fn run<S: Strategy>(strategy: S, check: impl Fn(S::Value) -> TestCaseResult) -> Result<(), String> {
    TestRunner::new(config())
        .run(&strategy, check)
        .map_err(|e| e.to_string())
}

/// Every suite, run outside the test harness: (name, outcome).
pub fn run_all() -> Vec<(&'static str, Result<(), String>)> {
    vec![
        (
            "rank/unrank bijection",
            run((1usize..=12, 0.0f64..1.0), |(n, f)| {
                rank_unrank_bijection(n, f)
            }),
        ),
        ("rank then unrank", run(arb_perm(), rank_then_unrank)),
        (
            "quantile-filter monotonicity",
            run((arb_graph(12), 0.0f64..1.0, 0.0f64..1.0), |(g, a, b)| {
                filter_is_monotone(g, a, b)
            }),
        ),
        (
            "connectivity monotone in pi",
            run(arb_connected_graph(12), connectivity_is_monotone_in_pi),
        ),
        (
            "greedy partition invariants",
            run(arb_graph(15), greedy_partition_invariants),
        ),
        (
            "spinglass partition invariants",
            run((arb_graph(10), any::<u64>()), |(g, s)| {
                spinglass_partition_invariants(g, s)
            }),
        ),
        (
            "LON fixed points",
            run((2usize..=6, any::<u64>(), any::<bool>()), |(n, s, r)| {
                lon_nodes_are_fixed_points(n, s, r)
            }),
        ),
        (
            "rewiring preserves degrees",
            run((arb_connected_graph(15), any::<u64>()), |(g, s)| {
                rewiring_preserves_degrees(g, s)
            }),
        ),
    ]
}
