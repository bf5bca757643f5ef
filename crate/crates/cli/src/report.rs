//! Campaign summary: tables, figure data and SVGs, with every missing piece
//! listed instead of skipped silently.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use anyhow::Result;
use lonscape::community::{Algorithm, CrossEvaluation};
use lonscape::stats::{mean_sd, AnovaResult};
use lonscape::{density_stats, Lon};

use crate::artifact::{read_json, write_text, DataError, Layout};
use crate::commands::{AssortRecord, NullRecord};
use crate::svg;

const EXPECTED: &str = "instances/*.dat (gen), lons/*.json (build), filtered/*.json (filter), \
partitions/*.json (detect), stats/*.null.*.json (nulltest), stats/*.assort.json (assort), stats/anova.json (anova)";

struct Instance {
    name: String,
    class: String,
    n: usize,
    lon: Lon,
}

#[derive(Default)]
pub struct Summary {
    pub gaps: Vec<String>,
    pub files: Vec<String>,
}

fn se(xs: &[f64]) -> f64 {
    let (_, sd) = mean_sd(xs);
    if xs.len() < 2 {
        0.0
    } else {
        sd / (xs.len() as f64).sqrt()
    }
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let k = v.len();
    if k % 2 == 1 {
        v[k / 2]
    } else {
        (v[k / 2 - 1] + v[k / 2]) / 2.0
    }
}

fn opt(x: Option<f64>) -> String {
    x.map(|v| format!("{v}")).unwrap_or_default()
}

fn read_failure(path: &std::path::Path) -> Result<Option<String>> {
    if !path.exists() {
        return Ok(None);
    }
    Ok(Some(read_json::<String>(path)?.data))
}

fn load_instances(layout: &Layout) -> Result<Vec<Instance>> {
    let lons = layout.lons();
    if !lons.exists() || std::fs::read_dir(&lons)?.next().is_none() {
        return Err(DataError(format!(
            "{} holds no campaign results; expected {EXPECTED}",
            layout.root.display()
        ))
        .into());
    }
    let names = layout.list(&lons, ".json", "build")?;
    names
        .into_iter()
        .map(|name| {
            let lon: Lon = read_json(&lons.join(format!("{name}.json")))?.data;
            Ok(Instance {
                class: lon
                    .meta()
                    .class
                    .map(|c| c.as_str().to_string())
                    .unwrap_or_else(|| "unknown".into()),
                n: lon.meta().n,
                name,
                lon,
            })
        })
        .collect()
}

pub fn report(layout: &Layout) -> Result<Summary> {
    let insts = load_instances(layout)?;
    let out = layout.report();
    let mut s = Summary::default();
    let mut md = String::from("# Campaign report\n\n");
    let classes: Vec<String> = {
        let mut c: Vec<String> = insts.iter().map(|i| i.class.clone()).collect();
        c.sort();
        c.dedup();
        c
    };
    let contrast = classes.len() >= 2;
    if !contrast {
        s.gaps.push(format!(
            "only one class ({}) present: class-contrast rows are unavailable",
            classes.join(", ")
        ));
    }

    let emit = |s: &mut Summary, file: &str, text: &str| -> Result<()> {
        write_text(&out.join(file), text)?;
        s.files.push(file.to_string());
        Ok(())
    };

    // Tables 1-3 and Fig. 1: per (class, n) means over instances
    let mut cells: BTreeMap<(String, usize), Vec<&Instance>> = BTreeMap::new();
    for i in &insts {
        cells.entry((i.class.clone(), i.n)).or_default().push(i);
    }
    let mut table = String::from(
        "class,n,instances,mean_vertices,mean_edges,mean_edges_with_loops,mean_edges_over_v2,mean_edges_with_loops_over_v2,mean_self_loop,se_self_loop,mean_out_weight,se_out_weight\n",
    );
    let mut fig1: BTreeMap<String, (Vec<(f64, f64, f64)>, Vec<(f64, f64, f64)>)> = BTreeMap::new();
    for ((class, n), group) in &cells {
        let st: Vec<_> = group.iter().map(|i| density_stats(&i.lon)).collect();
        let col =
            |f: &dyn Fn(&lonscape::DensityStats) -> f64| -> Vec<f64> { st.iter().map(f).collect() };
        let v = col(&|d| d.num_vertices as f64);
        let e = col(&|d| d.num_edges as f64);
        let el = col(&|d| (d.num_edges + d.num_self_loops) as f64);
        let r = col(&|d| d.edges_over_v_squared);
        let rl = col(&|d| d.edges_with_loops_over_v_squared);
        let sl = col(&|d| d.mean_self_loop);
        let ow: Vec<f64> = st.iter().filter_map(|d| d.mean_out_weight).collect();
        let (mow, sow) = if ow.is_empty() {
            (f64::NAN, f64::NAN)
        } else {
            (mean(&ow), se(&ow))
        };
        writeln!(
            table,
            "{class},{n},{},{},{},{},{},{},{},{},{},{}",
            group.len(),
            mean(&v),
            mean(&e),
            mean(&el),
            mean(&r),
            mean(&rl),
            mean(&sl),
            se(&sl),
            mow,
            sow
        )?;
        let entry = fig1.entry(class.clone()).or_default();
        entry.0.push((*n as f64, mean(&sl), se(&sl)));
        if !ow.is_empty() {
            entry.1.push((*n as f64, mow, sow));
        }
    }
    emit(&mut s, "tables.csv", &table)?;
    md.push_str("## Tables 1-3: LON size and density\n\nSee `tables.csv`. Density is reported with and without self-loops.\n\n");
    md.push_str("| class | n | instances | mean V | mean E (with loops) | E/V^2 (with loops) |\n|---|---|---|---|---|---|\n");
    for ((class, n), group) in &cells {
        let st: Vec<_> = group.iter().map(|i| density_stats(&i.lon)).collect();
        let v: Vec<f64> = st.iter().map(|d| d.num_vertices as f64).collect();
        let el: Vec<f64> = st
            .iter()
            .map(|d| (d.num_edges + d.num_self_loops) as f64)
            .collect();
        let rl: Vec<f64> = st
            .iter()
            .map(|d| d.edges_with_loops_over_v_squared)
            .collect();
        writeln!(
            md,
            "| {class} | {n} | {} | {:.3} | {:.3} | {:.3} |",
            group.len(),
            mean(&v),
            mean(&el),
            mean(&rl)
        )?;
    }
    md.push('\n');
    for (class, (loops, outs)) in &fig1 {
        let svg = svg::error_bars(
            &format!("Mean self-loop vs out-link weight ({class})"),
            "n",
            "mean weight",
            &[
                ("w_ii".into(), loops.clone()),
                ("w_ij".into(), outs.clone()),
            ],
        );
        emit(&mut s, &format!("fig1_weights_{class}.svg"), &svg)?;
    }

    // Fig. 4: modularity of the undirected detectors
    let mut q_rows = String::from("name,class,n,algorithm,k,q\n");
    let mut q_groups: BTreeMap<(String, Algorithm), Vec<f64>> = BTreeMap::new();
    let mut cross_rows = String::from("name,class,n,algorithm,k,q_unfiltered\n");
    let mut cross_groups: BTreeMap<(String, Algorithm), Vec<f64>> = BTreeMap::new();
    let mut single_cluster: BTreeMap<(String, Algorithm), usize> = BTreeMap::new();
    for i in &insts {
        for alg in [Algorithm::Greedy, Algorithm::SpinGlass, Algorithm::Mcl] {
            let path = layout.partitions().join(format!("{}.{alg}.json", i.name));
            let failed = layout
                .partitions()
                .join(format!("{}.{alg}.failed.json", i.name));
            if path.exists() {
                let p: lonscape::community::Partition = read_json(&path)?.data;
                writeln!(
                    q_rows,
                    "{},{},{},{alg},{},{}",
                    i.name, i.class, i.n, p.k, p.q
                )?;
                if alg != Algorithm::Mcl {
                    q_groups
                        .entry((i.class.clone(), alg))
                        .or_default()
                        .push(p.q);
                }
            } else if failed.exists() {
                s.gaps.push(format!(
                    "{}: {alg} did not converge (see partitions/{}.{alg}.failed.json)",
                    i.name, i.name
                ));
            }
        }
        let cross_path = layout.partitions().join(format!("{}.cross.json", i.name));
        if cross_path.exists() {
            let cross: Vec<CrossEvaluation> = read_json(&cross_path)?.data;
            for c in cross {
                writeln!(
                    cross_rows,
                    "{},{},{},{},{},{}",
                    i.name, i.class, i.n, c.algorithm, c.k, c.q
                )?;
                cross_groups
                    .entry((i.class.clone(), c.algorithm))
                    .or_default()
                    .push(c.q);
                if c.k <= 1 {
                    *single_cluster
                        .entry((i.class.clone(), c.algorithm))
                        .or_default() += 1;
                }
            }
        } else {
            s.gaps
                .push(format!("{}: no partitions (run `detect`)", i.name));
        }
    }
    emit(&mut s, "fig4_modularity.csv", &q_rows)?;
    let groups: Vec<(String, Vec<f64>)> = q_groups
        .iter()
        .map(|((c, a), v)| (format!("{c} {a}"), v.clone()))
        .collect();
    if !groups.is_empty() {
        emit(
            &mut s,
            "fig4_modularity.svg",
            &svg::box_plot("Modularity on filtered LONs", "Q", &groups),
        )?;
        md.push_str("## Fig. 4: modularity on filtered LONs\n\n| class | algorithm | instances | mean Q | median Q |\n|---|---|---|---|---|\n");
        for ((c, a), v) in &q_groups {
            writeln!(
                md,
                "| {c} | {a} | {} | {:.4} | {:.4} |",
                v.len(),
                mean(v) + 0.0,
                median(v) + 0.0
            )?;
        }
        md.push('\n');
    }
    emit(&mut s, "fig8_cross.csv", &cross_rows)?;
    let groups: Vec<(String, Vec<f64>)> = cross_groups
        .iter()
        .map(|((c, a), v)| (format!("{c} {a}"), v.clone()))
        .collect();
    if !groups.is_empty() {
        emit(
            &mut s,
            "fig8_cross.svg",
            &svg::box_plot("Weighted Q on unfiltered LONs", "Q", &groups),
        )?;
        md.push_str("## Fig. 8: cross-evaluated modularity\n\n| class | algorithm | instances | median Q | single-community outcomes |\n|---|---|---|---|---|\n");
        for ((c, a), v) in &cross_groups {
            let ones = single_cluster.get(&(c.clone(), *a)).copied().unwrap_or(0);
            writeln!(
                md,
                "| {c} | {a} | {} | {:.4} | {ones} |",
                v.len(),
                median(v) + 0.0
            )?;
        }
        md.push('\n');
    }

    // Figs. 5-6: z-scores against the null models
    let mut z_rows = String::from(
        "name,class,n,algorithm,observed_q,null_mean,null_sd,z,p_value,samples,rigid\n",
    );
    let mut z_groups: BTreeMap<Algorithm, BTreeMap<String, Vec<f64>>> = BTreeMap::new();
    let mut p_sig: BTreeMap<(String, Algorithm), (usize, usize)> = BTreeMap::new();
    for i in &insts {
        for alg in [Algorithm::Greedy, Algorithm::SpinGlass] {
            let path = layout.stats().join(format!("{}.null.{alg}.json", i.name));
            let failed = layout
                .stats()
                .join(format!("{}.null.{alg}.failed.json", i.name));
            if path.exists() {
                let r: NullRecord = read_json(&path)?.data;
                let z = r.significance.z_score;
                writeln!(
                    z_rows,
                    "{},{},{},{alg},{},{},{},{},{},{},{}",
                    i.name,
                    i.class,
                    i.n,
                    r.observed_q,
                    r.ensemble.mean_q,
                    r.ensemble.sd_q,
                    opt(z),
                    r.significance.p_value,
                    r.ensemble.samples.len(),
                    r.ensemble.rigid
                )?;
                if let Some(z) = z {
                    z_groups
                        .entry(alg)
                        .or_default()
                        .entry(i.class.clone())
                        .or_default()
                        .push(z);
                } else {
                    s.gaps.push(format!(
                        "{}: {alg} null ensemble has zero spread, z undefined",
                        i.name
                    ));
                }
                let e = p_sig.entry((i.class.clone(), alg)).or_default();
                e.0 += (r.significance.p_value < 0.05) as usize;
                e.1 += 1;
            } else if failed.exists() {
                s.gaps.push(format!(
                    "{}: no {alg} null model (see stats/{}.null.{alg}.failed.json)",
                    i.name, i.name
                ));
            }
        }
    }
    emit(&mut s, "fig5_6_zscores.csv", &z_rows)?;
    if z_groups.is_empty() {
        s.gaps.push("no null-model results (run `nulltest`)".into());
    }
    for (alg, by_class) in &z_groups {
        let groups: Vec<(String, Vec<f64>)> = by_class
            .iter()
            .map(|(c, v)| (c.clone(), v.clone()))
            .collect();
        let fig = if *alg == Algorithm::Greedy {
            "fig5"
        } else {
            "fig6"
        };
        emit(
            &mut s,
            &format!("{fig}_zscores_{alg}.svg"),
            &svg::strip_plot(
                &format!("Q z-scores against null models ({alg})"),
                "z",
                &groups,
                Some(0.0),
            ),
        )?;
    }
    if !p_sig.is_empty() {
        md.push_str("## Figs. 5-6: significance against null models\n\n| class | algorithm | p < 0.05 | instances | median z |\n|---|---|---|---|---|\n");
        for ((c, a), (sig, total)) in &p_sig {
            let zs = z_groups
                .get(a)
                .and_then(|m| m.get(c))
                .cloned()
                .unwrap_or_default();
            let mz = if zs.is_empty() {
                "n/a".to_string()
            } else {
                format!("{:.3}", median(&zs))
            };
            writeln!(md, "| {c} | {a} | {sig} | {total} | {mz} |")?;
        }
        md.push('\n');
    }

    // Fig. 9: fitness assortativity
    let mut a_rows = String::from("name,class,n,graph,spearman_r,slope,n_points,excluded,low_n\n");
    let mut pooled: BTreeMap<(String, &str), Vec<(f64, f64)>> = BTreeMap::new();
    let mut rs: BTreeMap<(String, &str), Vec<f64>> = BTreeMap::new();
    for i in &insts {
        let path = layout.stats().join(format!("{}.assort.json", i.name));
        if !path.exists() {
            s.gaps
                .push(format!("{}: no assortativity (run `assort`)", i.name));
            continue;
        }
        let rec: AssortRecord = read_json(&path)?.data;
        for (kind, r) in [("unfiltered", &rec.unfiltered), ("filtered", &rec.filtered)] {
            match r {
                Ok(r) => {
                    writeln!(
                        a_rows,
                        "{},{},{},{kind},{},{},{},{},{}",
                        i.name,
                        i.class,
                        i.n,
                        opt(r.spearman_r),
                        opt(r.slope),
                        r.n_points,
                        r.excluded,
                        r.low_n
                    )?;
                    pooled
                        .entry((i.class.clone(), kind))
                        .or_default()
                        .extend(&r.points);
                    if let Some(x) = r.spearman_r {
                        rs.entry((i.class.clone(), kind)).or_default().push(x);
                    }
                }
                Err(e) => s
                    .gaps
                    .push(format!("{}: {kind} assortativity unavailable: {e}", i.name)),
            }
        }
    }
    emit(&mut s, "fig9_assortativity.csv", &a_rows)?;
    for ((class, kind), pts) in &pooled {
        let (xs, ys): (Vec<f64>, Vec<f64>) = pts.iter().copied().unzip();
        let (mx, my) = (mean(&xs), mean(&ys));
        let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
        let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
        let line = (sxx > 0.0).then(|| (my - sxy / sxx * mx, sxy / sxx));
        emit(
            &mut s,
            &format!("fig9_assort_{class}_{kind}.svg"),
            &svg::scatter(
                &format!("Fitness vs mean neighbor fitness ({class}, {kind})"),
                "fitness",
                "weighted mean neighbor fitness",
                pts,
                line,
            ),
        )?;
    }
    if !rs.is_empty() {
        md.push_str("## Fig. 9: fitness assortativity\n\n| class | graph | instances | mean Spearman r |\n|---|---|---|---|\n");
        for ((c, k), v) in &rs {
            writeln!(md, "| {c} | {k} | {} | {:.4} |", v.len(), mean(v))?;
        }
        md.push('\n');
    }

    // ANOVA
    let anova_path = layout.stats().join("anova.json");
    md.push_str("## Permutation ANOVA on modularity\n\n");
    if anova_path.exists() {
        let a: AnovaResult = read_json(&anova_path)?.data;
        writeln!(
            md,
            "p(class) = {}, p(algorithm) = {}, p(interaction) = {} ({} permutations, {} replicates per cell)\n",
            a.p_class, a.p_algorithm, a.p_interaction, a.n_permutations, a.replicates
        )?;
    } else if let Some(reason) = read_failure(&layout.stats().join("anova.failed.json"))? {
        s.gaps.push(format!("ANOVA failed: {reason}"));
        writeln!(md, "unavailable: {reason}\n")?;
    } else if contrast {
        s.gaps.push("no ANOVA result (run `anova`)".into());
        md.push_str("unavailable\n\n");
    } else {
        md.push_str("unavailable: needs two classes\n\n");
    }

    md.push_str("## Gaps\n\n");
    if s.gaps.is_empty() {
        md.push_str("none\n");
    }
    for g in &s.gaps {
        writeln!(md, "- {g}")?;
    }
    write_text(&out.join("report.md"), &md)?;
    s.files.push("report.md".into());
    Ok(s)
}
