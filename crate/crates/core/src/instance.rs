//! Random instance generators and QAPLIB-format IO.
//!
//! Distances follow one of two laws:
//!
//! * `Euclidean`: `n` points uniform in `[0, coord_range]^2`, entries are the
//!   rounded pairwise distances. Default for `RealLike`.
//! * `Uniform`: entries are integers uniform in `[1, dist_max]`. Default for
//!   `Uniform` (Taillard "a"-type instances).
//!
//! Flows:
//!
//! * `Uniform`: every off-diagonal flow is an integer drawn uniformly from
//!   `[1, flow_max]`.
//! * `RealLike`: each pair is zero with probability `reallike_sparsity`,
//!   otherwise `round(10^(u * reallike_amplitude))` with `u ~ U[0, 1)`.
//!
//! Both matrices are symmetric with a zero diagonal. Distances and flows come
//! from separate random streams of the same seed.

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qap::{QapInstance, Scalar};
use crate::rng::{self, streams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InstanceClass {
    Uniform,
    RealLike,
}

impl InstanceClass {
    pub fn as_str(self) -> &'static str {
        match self {
            InstanceClass::Uniform => "uniform",
            InstanceClass::RealLike => "real-like",
        }
    }
}

impl fmt::Display for InstanceClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for InstanceClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "uniform" | "u" => Ok(InstanceClass::Uniform),
            "real-like" | "reallike" | "real_like" | "rl" => Ok(InstanceClass::RealLike),
            other => Err(Error::InvalidParam(format!(
                "unknown instance class '{other}'"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DistanceLaw {
    Euclidean,
    Uniform,
}

impl DistanceLaw {
    pub fn default_for(class: InstanceClass) -> Self {
        match class {
            InstanceClass::Uniform => DistanceLaw::Uniform,
            InstanceClass::RealLike => DistanceLaw::Euclidean,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorParams {
    pub n: usize,
    pub seed: u64,
    pub class: InstanceClass,
    pub distance: DistanceLaw,
    pub coord_range: f64,
    pub dist_max: i64,
    pub flow_max: i64,
    pub reallike_amplitude: f64,
    pub reallike_sparsity: f64,
}

impl GeneratorParams {
    pub fn new(class: InstanceClass, n: usize, seed: u64) -> Self {
        Self {
            n,
            seed,
            class,
            distance: DistanceLaw::default_for(class),
            coord_range: 100.0,
            dist_max: 100,
            flow_max: 100,
            reallike_amplitude: 4.0,
            reallike_sparsity: 0.6,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidParam(msg.to_string()));
        if self.n < 2 {
            return bad("n must be at least 2");
        }
        if !(self.coord_range.is_finite() && self.coord_range > 0.0) {
            return bad("coord_range must be positive");
        }
        if self.dist_max < 1 {
            return bad("dist_max must be at least 1");
        }
        if self.flow_max < 1 {
            return bad("flow_max must be at least 1");
        }
        if !(self.reallike_amplitude.is_finite() && self.reallike_amplitude > 0.0) {
            return bad("reallike_amplitude must be positive");
        }
        if !(0.0..=1.0).contains(&self.reallike_sparsity) {
            return bad("reallike_sparsity must lie in [0, 1]");
        }
        Ok(())
    }

    /// Deterministic instance name, e.g. `uniform-n09-s0000000000000007`.
    pub fn default_name(&self) -> String {
        format!("{}-n{:02}-s{:016x}", self.class, self.n, self.seed)
    }
}

pub fn generate(params: &GeneratorParams) -> Result<QapInstance> {
    params.validate()?;
    let n = params.n;

    let mut dist_rng = rng::stream(params.seed, streams::POINTS);
    let mut dist = vec![0i64; n * n];
    match params.distance {
        DistanceLaw::Euclidean => {
            let points: Vec<(f64, f64)> = (0..n)
                .map(|_| {
                    let x = dist_rng.random::<f64>() * params.coord_range;
                    let y = dist_rng.random::<f64>() * params.coord_range;
                    (x, y)
                })
                .collect();
            for i in 0..n {
                for j in i + 1..n {
                    let (dx, dy) = (points[i].0 - points[j].0, points[i].1 - points[j].1);
                    let d = dx.hypot(dy).round() as i64;
                    dist[i * n + j] = d;
                    dist[j * n + i] = d;
                }
            }
        }
        DistanceLaw::Uniform => {
            for i in 0..n {
                for j in i + 1..n {
                    let d = dist_rng.random_range(1..=params.dist_max);
                    dist[i * n + j] = d;
                    dist[j * n + i] = d;
                }
            }
        }
    }

    let mut flow_rng = rng::stream(params.seed, streams::FLOWS);
    let mut flow = vec![0i64; n * n];
    for i in 0..n {
        for j in i + 1..n {
            let v = match params.class {
                InstanceClass::Uniform => flow_rng.random_range(1..=params.flow_max),
                InstanceClass::RealLike => {
                    let zero = flow_rng.random::<f64>() < params.reallike_sparsity;
                    let u = flow_rng.random::<f64>();
                    if zero {
                        0
                    } else {
                        10f64.powf(u * params.reallike_amplitude).round() as i64
                    }
                }
            };
            flow[i * n + j] = v;
            flow[j * n + i] = v;
        }
    }

    QapInstance::new(params.default_name(), n, dist, flow)
}

/// An instance read from disk: integer matrices when every entry parses as an
/// integer, real-valued otherwise.
#[derive(Debug, Clone, PartialEq)]
pub enum AnyInstance {
    Integer(QapInstance<i64>),
    Real(QapInstance<f64>),
}

impl AnyInstance {
    pub fn n(&self) -> usize {
        match self {
            AnyInstance::Integer(i) => i.n(),
            AnyInstance::Real(i) => i.n(),
        }
    }

    pub fn name(&self) -> &str {
        match self {
            AnyInstance::Integer(i) => i.name(),
            AnyInstance::Real(i) => i.name(),
        }
    }

    pub fn has_nonzero_diagonal(&self) -> bool {
        match self {
            AnyInstance::Integer(i) => i.has_nonzero_diagonal(),
            AnyInstance::Real(i) => i.has_nonzero_diagonal(),
        }
    }
}

pub fn format_instance<T: Scalar>(inst: &QapInstance<T>) -> String {
    let n = inst.n();
    let mut out = format!("{n}\n\n");
    for m in [inst.dist(), inst.flow()] {
        for row in m.chunks(n) {
            let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            out.push_str(&cells.join(" "));
            out.push('\n');
        }
        out.push('\n');
    }
    out
}

pub fn write_instance<T: Scalar>(inst: &QapInstance<T>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(format_instance(inst).as_bytes())
        .map_err(|e| Error::io(path, e))
}

pub fn read_instance(path: impl AsRef<Path>) -> Result<AnyInstance> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    parse_instance(&text, &name, &path.display().to_string())
}

struct Token<'a> {
    text: &'a str,
    line: usize,
    column: usize,
}

fn tokenize(text: &str) -> Vec<Token<'_>> {
    let mut out = Vec::new();
    for (li, line) in text.lines().enumerate() {
        let mut start = None;
        for (ci, ch) in line
            .char_indices()
            .chain(std::iter::once((line.len(), ' ')))
        {
            match (ch.is_whitespace(), start) {
                (false, None) => start = Some(ci),
                (true, Some(s)) => {
                    out.push(Token {
                        text: &line[s..ci],
                        line: li + 1,
                        column: s + 1,
                    });
                    start = None;
                }
                _ => {}
            }
        }
    }
    out
}

/// Parses QAPLIB text: `n`, then the distance matrix, then the flow matrix.
pub fn parse_instance(text: &str, name: &str, origin: &str) -> Result<AnyInstance> {
    let tokens = tokenize(text);
    let parse_err = |line, column, message: String| Error::Parse {
        path: origin.to_string(),
        line,
        column,
        message,
    };
    let first = tokens
        .first()
        .ok_or_else(|| parse_err(1, 1, "empty file: expected problem size".into()))?;
    let n: usize = first.text.parse().map_err(|_| {
        parse_err(
            first.line,
            first.column,
            format!("expected problem size, found '{}'", first.text),
        )
    })?;
    if n == 0 {
        return Err(parse_err(
            first.line,
            first.column,
            "problem size must be positive".into(),
        ));
    }
    let body = &tokens[1..];
    let need = 2 * n * n;
    if body.len() < need {
        let (line, column) = tokens
            .last()
            .map(|t| (t.line, t.column + t.text.len()))
            .unwrap_or((1, 1));
        let (which, have) = if body.len() < n * n {
            ("distance", body.len())
        } else {
            ("flow", body.len() - n * n)
        };
        return Err(parse_err(
            line,
            column,
            format!(
                "{which} matrix has {have} of {} entries for n = {n} ({} missing)",
                n * n,
                n * n - have
            ),
        ));
    }
    if body.len() > need {
        let t = &body[need];
        return Err(parse_err(
            t.line,
            t.column,
            format!(
                "unexpected trailing entry '{}' after {need} matrix entries",
                t.text
            ),
        ));
    }

    let ints: Option<Vec<i64>> = body.iter().map(|t| t.text.parse::<i64>().ok()).collect();
    let inst = match ints {
        Some(v) => {
            if let Some(k) = v.iter().position(|&x| x < 0) {
                let t = &body[k];
                return Err(parse_err(
                    t.line,
                    t.column,
                    format!("negative entry '{}'", t.text),
                ));
            }
            let (d, f) = v.split_at(n * n);
            AnyInstance::Integer(QapInstance::new(name, n, d.to_vec(), f.to_vec())?)
        }
        None => {
            let mut v = Vec::with_capacity(need);
            for t in body {
                let x: f64 = t.text.parse().map_err(|_| {
                    parse_err(
                        t.line,
                        t.column,
                        format!("expected a number, found '{}'", t.text),
                    )
                })?;
                if !(x.is_finite() && x >= 0.0) {
                    return Err(parse_err(
                        t.line,
                        t.column,
                        format!("entry '{}' is negative or not finite", t.text),
                    ));
                }
                v.push(x);
            }
            let (d, f) = v.split_at(n * n);
            AnyInstance::Real(QapInstance::new(name, n, d.to_vec(), f.to_vec())?)
        }
    };
    if inst.has_nonzero_diagonal() {
        log::warn!("{origin}: instance has nonzero diagonal entries");
    }
    Ok(inst)
}
