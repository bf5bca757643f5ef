use std::fs;
use std::path::Path;
use std::process::{Command, Output};
use std::time::Instant;

use lonscape::transform::UndirectedLon;
use lonscape::{read_instance, AnyInstance, Lon};
use serde::de::DeserializeOwned;

fn lonscape(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lonscape"))
        .arg("--dir")
        .arg(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = lonscape(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn data<T: DeserializeOwned>(path: &Path) -> T {
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap();
    serde_json::from_value(v["data"].clone()).unwrap()
}

fn files(dir: &Path, suffix: &str) -> Vec<String> {
    let mut v: Vec<String> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .filter(|n| n.ends_with(suffix))
        .collect();
    v.sort();
    v
}

/// Every byte of every file under `dir`, keyed by relative path.
fn snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
    fn walk(root: &Path, dir: &Path, out: &mut Vec<(String, Vec<u8>)>) {
        for e in fs::read_dir(dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                walk(root, &p, out);
            } else {
                let rel = p.strip_prefix(root).unwrap().display().to_string();
                out.push((rel, fs::read(&p).unwrap()));
            }
        }
    }
    let mut out = Vec::new();
    walk(dir, dir, &mut out);
    out.sort();
    out
}

/// Local optima by exhaustive search: permutations no swap strictly improves.
fn brute_force_optima(path: &Path) -> Vec<(Vec<usize>, f64)> {
    let AnyInstance::Integer(inst) = read_instance(path).unwrap() else {
        panic!("generated instances are integer");
    };
    let n = inst.n();
    let cost = |p: &[usize]| -> i64 {
        let mut c = 0;
        for i in 0..n {
            for j in 0..n {
                c += inst.d(i, j) * inst.f(p[i], p[j]);
            }
        }
        c
    };
    let mut perms: Vec<Vec<usize>> = vec![vec![]];
    for _ in 0..n {
        let mut next = Vec::new();
        for p in &perms {
            for x in (0..n).filter(|x| !p.contains(x)) {
                let mut q = p.clone();
                q.push(x);
                next.push(q);
            }
        }
        perms = next;
    }
    let mut optima = Vec::new();
    for p in perms {
        let c = cost(&p);
        let improvable = (0..n).any(|i| {
            (i + 1..n).any(|j| {
                let mut q = p.clone();
                q.swap(i, j);
                cost(&q) < c
            })
        });
        if !improvable {
            optima.push((p, -(c as f64)));
        }
    }
    optima.sort_by(|a, b| a.0.cmp(&b.0));
    optima
}

#[test]
fn gen_is_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let c = tempfile::tempdir().unwrap();
    for d in [a.path(), b.path()] {
        ok(d, &["gen", "--n", "5,6", "--count", "2", "--seed", "7"]);
    }
    ok(
        c.path(),
        &["gen", "--n", "5,6", "--count", "2", "--seed", "8"],
    );
    let sa = snapshot(a.path());
    assert_eq!(sa.len(), 2 * 2 * 2 * 2, "dat and meta per instance");
    assert_eq!(sa, snapshot(b.path()));
    assert_ne!(sa, snapshot(c.path()));
}

#[test]
fn build_matches_brute_force_and_filter_stays_connected() {
    let d = tempfile::tempdir().unwrap();
    ok(
        d.path(),
        &["gen", "--n", "5", "--count", "3", "--seed", "3"],
    );
    ok(d.path(), &["build"]);
    ok(d.path(), &["filter", "--auto"]);
    let names = files(&d.path().join("instances"), ".dat");
    assert_eq!(names.len(), 6);
    for dat in names {
        let name = dat.trim_end_matches(".dat");
        let expected = brute_force_optima(&d.path().join("instances").join(&dat));
        let lon: Lon = data(&d.path().join("lons").join(format!("{name}.json")));
        let mut got: Vec<(Vec<usize>, f64)> = lon
            .nodes()
            .iter()
            .map(|o| (o.perm.as_slice().to_vec(), o.fitness))
            .collect();
        got.sort_by(|a, b| a.0.cmp(&b.0));
        assert_eq!(got, expected, "{name}");
        assert_eq!(lon.nodes().iter().map(|o| o.basin_size).sum::<u64>(), 120);

        let rec: serde_json::Value = serde_json::from_str(
            &fs::read_to_string(d.path().join("filtered").join(format!("{name}.json"))).unwrap(),
        )
        .unwrap();
        let g: UndirectedLon = serde_json::from_value(rec["data"]["graph"].clone()).unwrap();
        assert!(g.is_connected(), "{name}");
        assert_eq!(g.num_nodes(), lon.num_nodes());
        let pi = rec["data"]["pi"].as_f64().unwrap();
        assert!((0.0..1.0).contains(&pi));
    }
}

#[test]
fn full_pipeline_is_fast_and_thread_independent() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = [
        "run", "--n", "6", "--count", "2", "--m", "20", "--perms", "99",
    ];
    let start = Instant::now();
    let mut a_args = vec!["--threads", "1"];
    a_args.extend(args);
    let out = ok(a.path(), &a_args);
    assert!(start.elapsed().as_secs() < 60);
    assert!(out.contains("report:"), "{out}");
    let mut b_args = vec!["--threads", "3"];
    b_args.extend(args);
    ok(b.path(), &b_args);
    assert_eq!(snapshot(a.path()), snapshot(b.path()));

    let report = a.path().join("report");
    for f in [
        "report.md",
        "tables.csv",
        "fig4_modularity.csv",
        "fig5_6_zscores.csv",
        "fig8_cross.csv",
        "fig9_assortativity.csv",
    ] {
        assert!(report.join(f).exists(), "{f}");
    }
    let md = fs::read_to_string(report.join("report.md")).unwrap();
    assert!(md.contains("## Gaps"));
    assert!(md.contains("p(class)"));

    // CSV artifacts start with a provenance comment
    let csv = files(&a.path().join("partitions"), ".greedy.csv");
    let text = fs::read_to_string(a.path().join("partitions").join(&csv[0])).unwrap();
    assert!(text.starts_with("# config_hash="), "{text}");
    assert!(text
        .lines()
        .nth(1)
        .unwrap()
        .starts_with("node_id,community_id"));
}

#[test]
fn single_class_report_marks_contrasts_unavailable() {
    let d = tempfile::tempdir().unwrap();
    ok(
        d.path(),
        &[
            "run", "--class", "uniform", "--n", "5", "--count", "2", "--m", "10",
        ],
    );
    let md = fs::read_to_string(d.path().join("report/report.md")).unwrap();
    assert!(md.contains("class-contrast rows are unavailable"), "{md}");
    assert!(md.contains("unavailable: needs two classes"), "{md}");
    assert!(!d.path().join("stats/anova.json").exists());
}

#[test]
fn run_survives_an_unbalanced_anova() {
    let d = tempfile::tempdir().unwrap();
    ok(
        d.path(),
        &[
            "run", "--n", "5", "--count", "1", "--m", "10", "--perms", "9",
        ],
    );
    assert!(d.path().join("stats/anova.failed.json").exists());
    let md = fs::read_to_string(d.path().join("report/report.md")).unwrap();
    assert!(md.contains("ANOVA failed"), "{md}");
    assert_eq!(lonscape(d.path(), &["anova"]).status.code(), Some(3));
}

#[test]
fn exit_codes() {
    let d = tempfile::tempdir().unwrap();
    let code = |args: &[&str]| lonscape(d.path(), args).status.code().unwrap();
    assert_eq!(code(&["--help"]), 0);
    assert_eq!(code(&["--version"]), 0);
    assert_eq!(code(&["frobnicate"]), 2);
    assert_eq!(code(&["gen", "--class", "gaussian"]), 2);
    assert_eq!(code(&["gen", "--n", "12"]), 2);
    assert_eq!(code(&["gen", "--n", "13", "--count", "1"]), 2);
    assert_eq!(code(&["nulltest", "--m", "1"]), 2);
    assert_eq!(code(&["filter", "--pi", "1.5"]), 2);
    assert_eq!(code(&["--threads", "0", "gen"]), 2);

    let cfg = d.path().join("bad.json");
    fs::write(&cfg, r#"{"sizes": [5], "colour": 1}"#).unwrap();
    assert_eq!(code(&["--config", cfg.to_str().unwrap(), "gen"]), 2);

    // data errors: missing upstream artifacts
    assert_eq!(code(&["build"]), 3);
    assert_eq!(code(&["detect"]), 3);
    let out = lonscape(d.path(), &["build"]);
    assert!(String::from_utf8_lossy(&out.stderr).contains("run `gen` first"));
}

#[test]
fn size_guard_reads_the_instance() {
    let d = tempfile::tempdir().unwrap();
    let inst = d.path().join("instances");
    fs::create_dir_all(&inst).unwrap();
    let n = 12;
    let row = vec!["1"; n].join(" ");
    let mat = vec![row; n].join("\n");
    fs::write(inst.join("big.dat"), format!("{n}\n\n{mat}\n\n{mat}\n")).unwrap();
    let out = lonscape(d.path(), &["build"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--force-large"));
}

#[test]
fn empty_directory_report_lists_expected_artifacts() {
    let d = tempfile::tempdir().unwrap();
    let out = lonscape(d.path(), &["report"]);
    assert_eq!(out.status.code(), Some(3));
    let err = String::from_utf8_lossy(&out.stderr);
    for stage in [
        "lons/*.json (build)",
        "partitions/*.json (detect)",
        "stats/anova.json (anova)",
    ] {
        assert!(err.contains(stage), "{err}");
    }
}

#[test]
fn fixed_threshold_filter() {
    let d = tempfile::tempdir().unwrap();
    ok(
        d.path(),
        &["gen", "--class", "uniform", "--n", "6", "--count", "1"],
    );
    ok(d.path(), &["build"]);
    ok(d.path(), &["filter", "--pi", "0.5"]);
    let f = files(&d.path().join("filtered"), ".json");
    let rec: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(d.path().join("filtered").join(&f[0])).unwrap())
            .unwrap();
    assert_eq!(rec["data"]["mode"], "fixed");
    assert_eq!(rec["data"]["pi"], 0.5);
    assert!(rec["provenance"]["config_hash"].as_str().unwrap().len() == 64);
}

#[test]
fn export_round_trips_through_csv() {
    let d = tempfile::tempdir().unwrap();
    ok(
        d.path(),
        &["gen", "--class", "uniform", "--n", "5", "--count", "1"],
    );
    ok(d.path(), &["build"]);
    ok(d.path(), &["filter", "--auto"]);
    ok(d.path(), &["export"]);
    ok(d.path(), &["export", "--filtered", "--format", "graphml"]);
    let out = d.path().join("export");
    let names = files(&out, ".graphml");
    assert_eq!(names.len(), 2, "{names:?}");
    let stem = names
        .iter()
        .find(|n| !n.contains("filtered"))
        .unwrap()
        .trim_end_matches(".graphml");
    let lon: Lon = data(&d.path().join("lons").join(format!("{stem}.json")));
    let back = lonscape::GraphTable::import_csv(
        stem,
        true,
        out.join(format!("{stem}.nodes.csv")),
        out.join(format!("{stem}.edges.csv")),
    )
    .unwrap();
    assert_eq!(back, lonscape::GraphTable::from(&lon));
    let dot = fs::read_to_string(out.join(format!("{stem}.dot"))).unwrap();
    assert!(dot.starts_with("digraph"), "{dot}");
    assert_eq!(
        lonscape(d.path(), &["export", "--format", "svg"])
            .status
            .code(),
        Some(2)
    );
}
