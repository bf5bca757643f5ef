//! Two-factor fixed-effects ANOVA with permutation p-values.
//!
//! Main effects are tested against free permutations of the response. The
//! interaction is tested against permutations restricted to within each
//! level of the first factor (the class), which keeps the class effect in
//! every resample while breaking any algorithm-by-class structure. All
//! p-values use add-one smoothing.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{self, streams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnovaRecord {
    pub class: String,
    pub algorithm: String,
    pub q: f64,
}

/// F statistics; `None` stands for an infinite F (effect present, zero
/// residual variance).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FStats {
    pub class: Option<f64>,
    pub algorithm: Option<f64>,
    pub interaction: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnovaResult {
    pub p_class: f64,
    pub p_algorithm: f64,
    pub p_interaction: f64,
    pub n_permutations: usize,
    pub observed_f: FStats,
    pub class_levels: Vec<String>,
    pub algorithm_levels: Vec<String>,
    pub replicates: usize,
}

/// Record layout with factor levels resolved to indices.
struct Design {
    a: Vec<usize>,
    b: Vec<usize>,
    la: usize,
    lb: usize,
    r: usize,
}

fn design(records: &[AnovaRecord]) -> Result<(Design, Vec<String>, Vec<String>)> {
    let levels = |f: fn(&AnovaRecord) -> &str| -> BTreeMap<String, usize> {
        let mut m: BTreeMap<String, usize> =
            records.iter().map(|r| (f(r).to_string(), 0)).collect();
        for (i, v) in m.values_mut().enumerate() {
            *v = i;
        }
        m
    };
    let ca = levels(|r| &r.class);
    let cb = levels(|r| &r.algorithm);
    if ca.len() < 2 || cb.len() < 2 {
        return Err(Error::Structure(format!(
            "need at least 2 levels per factor, got {} class and {} algorithm levels",
            ca.len(),
            cb.len()
        )));
    }
    let a: Vec<usize> = records.iter().map(|r| ca[&r.class]).collect();
    let b: Vec<usize> = records.iter().map(|r| cb[&r.algorithm]).collect();
    let mut counts = vec![0usize; ca.len() * cb.len()];
    for (&i, &j) in a.iter().zip(&b) {
        counts[i * cb.len() + j] += 1;
    }
    let r = counts[0];
    if r < 2 || counts.iter().any(|&c| c != r) {
        let names_a: Vec<&String> = ca.keys().collect();
        let names_b: Vec<&String> = cb.keys().collect();
        let cells: Vec<String> = counts
            .iter()
            .enumerate()
            .map(|(k, c)| {
                format!(
                    "({}, {}): {c}",
                    names_a[k / cb.len()],
                    names_b[k % cb.len()]
                )
            })
            .collect();
        return Err(Error::Structure(format!(
            "design must be balanced with at least 2 replicates per cell; cells {}",
            cells.join(", ")
        )));
    }
    let d = Design {
        a,
        b,
        la: ca.len(),
        lb: cb.len(),
        r,
    };
    Ok((d, ca.into_keys().collect(), cb.into_keys().collect()))
}

/// F statistics for response `y` laid out as `d`; infinite F is `INFINITY`.
fn f_stats(d: &Design, y: &[f64]) -> [f64; 3] {
    let n = y.len() as f64;
    let grand = y.iter().sum::<f64>() / n;
    let mut ma = vec![0.0; d.la];
    let mut mb = vec![0.0; d.lb];
    let mut mc = vec![0.0; d.la * d.lb];
    for (k, &v) in y.iter().enumerate() {
        ma[d.a[k]] += v;
        mb[d.b[k]] += v;
        mc[d.a[k] * d.lb + d.b[k]] += v;
    }
    let per_a = (d.lb * d.r) as f64;
    let per_b = (d.la * d.r) as f64;
    ma.iter_mut().for_each(|x| *x /= per_a);
    mb.iter_mut().for_each(|x| *x /= per_b);
    mc.iter_mut().for_each(|x| *x /= d.r as f64);

    let ss_total: f64 = y.iter().map(|v| (v - grand).powi(2)).sum();
    let ss_a = per_a * ma.iter().map(|m| (m - grand).powi(2)).sum::<f64>();
    let ss_b = per_b * mb.iter().map(|m| (m - grand).powi(2)).sum::<f64>();
    let mut ss_ab = 0.0;
    for i in 0..d.la {
        for j in 0..d.lb {
            ss_ab += (mc[i * d.lb + j] - ma[i] - mb[j] + grand).powi(2);
        }
    }
    ss_ab *= d.r as f64;
    let ss_e: f64 = y
        .iter()
        .enumerate()
        .map(|(k, v)| (v - mc[d.a[k] * d.lb + d.b[k]]).powi(2))
        .sum();

    let tiny = 1e-12 * ss_total;
    let clean = |ss: f64| if ss <= tiny { 0.0 } else { ss };
    let ms_e = clean(ss_e) / (d.la * d.lb * (d.r - 1)) as f64;
    let f = |ss: f64, df: usize| {
        let ss = clean(ss);
        if ss == 0.0 {
            0.0
        } else if ms_e == 0.0 {
            f64::INFINITY
        } else {
            ss / df as f64 / ms_e
        }
    };
    [
        f(ss_a, d.la - 1),
        f(ss_b, d.lb - 1),
        f(ss_ab, (d.la - 1) * (d.lb - 1)),
    ]
}

fn finite(f: f64) -> Option<f64> {
    f.is_finite().then_some(f)
}

pub fn permutation_anova(records: &[AnovaRecord], n_perm: usize, seed: u64) -> Result<AnovaResult> {
    if n_perm == 0 {
        return Err(Error::InvalidParam("n_perm must be positive".into()));
    }
    if let Some(r) = records.iter().find(|r| !r.q.is_finite()) {
        return Err(Error::InvalidParam(format!(
            "non-finite response for ({}, {})",
            r.class, r.algorithm
        )));
    }
    let (d, class_levels, algorithm_levels) = design(records)?;
    let y: Vec<f64> = records.iter().map(|r| r.q).collect();
    let first = y[0];
    if y.iter().all(|&v| v == first) {
        return Err(Error::Degenerate(
            "no variance: the response is constant".into(),
        ));
    }
    let obs = f_stats(&d, &y);

    let mut hits = [0usize; 3];
    let mut free = rng::stream(seed, streams::FREE_PERM);
    let mut perm = y.clone();
    for _ in 0..n_perm {
        perm.shuffle(&mut free);
        let f = f_stats(&d, &perm);
        hits[0] += (f[0] >= obs[0]) as usize;
        hits[1] += (f[1] >= obs[1]) as usize;
    }

    let mut restricted = rng::stream(seed, streams::RESTRICTED_PERM);
    let groups: Vec<Vec<usize>> = (0..d.la)
        .map(|lvl| (0..y.len()).filter(|&k| d.a[k] == lvl).collect())
        .collect();
    let mut perm = y.clone();
    let mut buf = Vec::new();
    for _ in 0..n_perm {
        for g in &groups {
            buf.clear();
            buf.extend(g.iter().map(|&k| y[k]));
            buf.shuffle(&mut restricted);
            for (&k, &v) in g.iter().zip(&buf) {
                perm[k] = v;
            }
        }
        hits[2] += (f_stats(&d, &perm)[2] >= obs[2]) as usize;
    }

    let p = |h: usize| (h + 1) as f64 / (n_perm + 1) as f64;
    Ok(AnovaResult {
        p_class: p(hits[0]),
        p_algorithm: p(hits[1]),
        p_interaction: p(hits[2]),
        n_permutations: n_perm,
        observed_f: FStats {
            class: finite(obs[0]),
            algorithm: finite(obs[1]),
            interaction: finite(obs[2]),
        },
        class_levels,
        algorithm_levels,
        replicates: d.r,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng as _;

    fn records(cells: &[(&str, &str, &[f64])]) -> Vec<AnovaRecord> {
        cells
            .iter()
            .flat_map(|&(c, a, qs)| {
                qs.iter().map(move |&q| AnovaRecord {
                    class: c.into(),
                    algorithm: a.into(),
                    q,
                })
            })
            .collect()
    }

    /// F statistics of a textbook 2x2 example with 3 replicates, from sums of
    /// squares worked out by hand.
    #[test]
    fn hand_computed_f() {
        let recs = records(&[
            ("u", "g", &[1.0, 2.0, 3.0]),
            ("u", "s", &[2.0, 3.0, 4.0]),
            ("r", "g", &[5.0, 6.0, 7.0]),
            ("r", "s", &[8.0, 9.0, 10.0]),
        ]);
        // cell means 2, 3, 6, 9; grand 5; SS_A = 6*(2.5-5)^2*2 = 75,
        // SS_B = 6*((4-5)^2 + (6-5)^2) = 12, SS_AB = 3*4*0.5^2 = 3,
        // SS_E = 4 cells * 2 = 8 on 8 df -> MS_E = 1
        let (d, _, _) = design(&recs).unwrap();
        let y: Vec<f64> = recs.iter().map(|r| r.q).collect();
        let f = f_stats(&d, &y);
        assert!((f[0] - 75.0).abs() < 1e-12);
        assert!((f[1] - 12.0).abs() < 1e-12);
        assert!((f[2] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn constant_response_is_an_error() {
        let recs = records(&[
            ("u", "g", &[1.0, 1.0]),
            ("u", "s", &[1.0, 1.0]),
            ("r", "g", &[1.0, 1.0]),
            ("r", "s", &[1.0, 1.0]),
        ]);
        let e = permutation_anova(&recs, 10, 0).unwrap_err();
        assert!(e.to_string().contains("no variance"));
    }

    #[test]
    fn class_determines_q() {
        let hi = [0.7; 10];
        let lo = [0.2; 10];
        let recs = records(&[
            ("r", "g", &hi),
            ("r", "s", &hi),
            ("u", "g", &lo),
            ("u", "s", &lo),
        ]);
        let res = permutation_anova(&recs, 999, 3).unwrap();
        assert_eq!(res.p_class, 1.0 / 1000.0);
        assert_eq!(res.observed_f.class, None);
        assert_eq!(res.observed_f.algorithm, Some(0.0));
        assert_eq!(res.p_algorithm, 1.0);
        assert_eq!(res.p_interaction, 1.0);
    }

    #[test]
    fn unbalanced_cells_are_listed() {
        let recs = records(&[
            ("u", "g", &[1.0, 2.0]),
            ("u", "s", &[1.0, 2.0, 3.0]),
            ("r", "g", &[1.0, 2.0]),
            ("r", "s", &[1.0, 2.0]),
        ]);
        let msg = permutation_anova(&recs, 10, 0).unwrap_err().to_string();
        assert!(msg.contains("(u, s): 3"), "{msg}");
        let one_level = records(&[("u", "g", &[1.0, 2.0]), ("u", "s", &[1.0, 3.0])]);
        assert!(permutation_anova(&one_level, 10, 0).is_err());
    }

    fn noisy(seed: u64, class_shift: f64) -> Vec<AnovaRecord> {
        let mut rng = rng::stream(seed, 0);
        let mut out = vec![];
        for c in ["r", "u"] {
            for a in ["g", "s"] {
                for _ in 0..10 {
                    let q = if c == "r" { class_shift } else { 0.0 } + rng.random::<f64>();
                    out.push(AnovaRecord {
                        class: c.into(),
                        algorithm: a.into(),
                        q,
                    });
                }
            }
        }
        out
    }

    #[test]
    fn detects_class_effect_only() {
        let res = permutation_anova(&noisy(5, 0.5), 1999, 8).unwrap();
        assert!(res.p_class < 0.01);
        assert!(res.p_algorithm > 0.01);
        assert!(res.p_interaction > 0.01);
        assert_eq!(res.class_levels, vec!["r", "u"]);
    }

    #[test]
    fn p_values_converge() {
        let recs = noisy(11, 0.1);
        let a = permutation_anova(&recs, 2000, 1).unwrap();
        let b = permutation_anova(&recs, 4000, 2).unwrap();
        let tol = 2.0 / (2000f64).sqrt();
        assert!((a.p_class - b.p_class).abs() < tol);
        assert!((a.p_algorithm - b.p_algorithm).abs() < tol);
        assert!((a.p_interaction - b.p_interaction).abs() < tol);
    }

    #[test]
    fn seed_determinism() {
        let recs = noisy(2, 0.2);
        assert_eq!(
            permutation_anova(&recs, 200, 4).unwrap(),
            permutation_anova(&recs, 200, 4).unwrap()
        );
    }
}
