//! QAP instances, permutations and cost evaluation.
//!
//! The cost of an assignment `p` is `sum_i sum_j dist[i][j] * flow[p[i]][p[j]]`
//! over all ordered pairs, diagonal included. Fitness is the negated cost.

use std::fmt;
use std::ops::{Add, Mul, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Matrix entry type. `i64` for generated instances (exact arithmetic),
/// `f64` for real-valued instances read from disk.
pub trait Scalar:
    Copy
    + PartialOrd
    + PartialEq
    + Default
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Send
    + Sync
    + fmt::Debug
    + fmt::Display
    + 'static
{
    const ZERO: Self;

    fn to_f64(self) -> f64;

    /// Finite and non-negative.
    fn is_valid_entry(self) -> bool;
}

impl Scalar for i64 {
    const ZERO: Self = 0;

    fn to_f64(self) -> f64 {
        self as f64
    }

    fn is_valid_entry(self) -> bool {
        self >= 0
    }
}

impl Scalar for f64 {
    const ZERO: Self = 0.0;

    fn to_f64(self) -> f64 {
        self
    }

    fn is_valid_entry(self) -> bool {
        self.is_finite() && self >= 0.0
    }
}

/// A QAP instance with dense row-major `n x n` distance and flow matrices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QapInstance<T = i64> {
    name: String,
    n: usize,
    dist: Vec<T>,
    flow: Vec<T>,
}

impl<T: Scalar> QapInstance<T> {
    pub fn new(name: impl Into<String>, n: usize, dist: Vec<T>, flow: Vec<T>) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParam("problem size must be positive".into()));
        }
        for (label, m) in [("distance", &dist), ("flow", &flow)] {
            if m.len() != n * n {
                return Err(Error::Dimension {
                    expected: n * n,
                    actual: m.len(),
                });
            }
            if let Some(pos) = m.iter().position(|v| !v.is_valid_entry()) {
                return Err(Error::InvalidParam(format!(
                    "{label} entry ({}, {}) = {} is negative or not finite",
                    pos / n,
                    pos % n,
                    m[pos]
                )));
            }
        }
        Ok(Self {
            name: name.into(),
            n,
            dist,
            flow,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn set_name(&mut self, name: impl Into<String>) {
        self.name = name.into();
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dist(&self) -> &[T] {
        &self.dist
    }

    pub fn flow(&self) -> &[T] {
        &self.flow
    }

    #[inline]
    pub fn d(&self, i: usize, j: usize) -> T {
        self.dist[i * self.n + j]
    }

    #[inline]
    pub fn f(&self, i: usize, j: usize) -> T {
        self.flow[i * self.n + j]
    }

    /// True when either matrix carries a nonzero diagonal entry. Such
    /// instances are valid but unusual.
    pub fn has_nonzero_diagonal(&self) -> bool {
        (0..self.n).any(|i| self.d(i, i) != T::ZERO || self.f(i, i) != T::ZERO)
    }

    fn check(&self, p: &Permutation) -> Result<()> {
        if p.len() != self.n {
            return Err(Error::Dimension {
                expected: self.n,
                actual: p.len(),
            });
        }
        Ok(())
    }

    pub fn cost(&self, p: &Permutation) -> Result<T> {
        self.check(p)?;
        Ok(self.cost_of(p.as_slice()))
    }

    pub fn fitness(&self, p: &Permutation) -> Result<f64> {
        Ok(-self.cost(p)?.to_f64())
    }

    /// `cost(swap(p, i, j)) - cost(p)` in O(n).
    pub fn delta_cost(&self, p: &Permutation, i: usize, j: usize) -> Result<T> {
        self.check(p)?;
        if i == j {
            return Err(Error::Contract(format!(
                "swap indices must differ (got {i}, {j})"
            )));
        }
        if i >= self.n || j >= self.n {
            return Err(Error::Contract(format!(
                "swap indices ({i}, {j}) out of range for n = {}",
                self.n
            )));
        }
        Ok(self.swap_delta(p.as_slice(), i, j))
    }

    /// Unchecked cost of a raw assignment.
    #[inline]
    pub fn cost_of(&self, p: &[usize]) -> T {
        let n = self.n;
        let mut total = T::ZERO;
        for i in 0..n {
            let row = &self.dist[i * n..(i + 1) * n];
            let frow = &self.flow[p[i] * n..(p[i] + 1) * n];
            for j in 0..n {
                total = total + row[j] * frow[p[j]];
            }
        }
        total
    }

    /// Unchecked O(n) swap delta for positions `r != s`.
    #[inline]
    pub fn swap_delta(&self, p: &[usize], r: usize, s: usize) -> T {
        let n = self.n;
        let (pr, ps) = (p[r], p[s]);
        let a = &self.dist;
        let b = &self.flow;
        let mut delta = a[r * n + r] * (b[ps * n + ps] - b[pr * n + pr])
            + a[s * n + s] * (b[pr * n + pr] - b[ps * n + ps])
            + a[r * n + s] * (b[ps * n + pr] - b[pr * n + ps])
            + a[s * n + r] * (b[pr * n + ps] - b[ps * n + pr]);
        for (k, &pk) in p.iter().enumerate() {
            if k == r || k == s {
                continue;
            }
            delta = delta
                + a[k * n + r] * (b[pk * n + ps] - b[pk * n + pr])
                + a[k * n + s] * (b[pk * n + pr] - b[pk * n + ps])
                + a[r * n + k] * (b[ps * n + pk] - b[pr * n + pk])
                + a[s * n + k] * (b[pr * n + pk] - b[ps * n + pk]);
        }
        delta
    }
}

/// An assignment of facilities to locations: `mapping[i]` is the location of
/// facility `i`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct Permutation(Vec<usize>);

impl Permutation {
    pub fn new(mapping: Vec<usize>) -> Result<Self> {
        let n = mapping.len();
        let mut seen = vec![false; n];
        for &v in &mapping {
            if v >= n || seen[v] {
                return Err(Error::Contract(format!(
                    "{mapping:?} is not a permutation of 0..{n}"
                )));
            }
            seen[v] = true;
        }
        Ok(Self(mapping))
    }

    pub fn identity(n: usize) -> Self {
        Self((0..n).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn swapped(&self, i: usize, j: usize) -> Self {
        let mut v = self.0.clone();
        v.swap(i, j);
        Self(v)
    }

    /// The `n(n-1)/2` pairwise-exchange neighbors, in lexicographic `(i, j)`
    /// order with `i < j`.
    pub fn neighbors(&self) -> Vec<Permutation> {
        swap_pairs(self.len())
            .map(|(i, j)| self.swapped(i, j))
            .collect()
    }

    /// Lehmer-code rank in `[0, n!)`.
    pub fn rank(&self) -> u64 {
        rank_slice(&self.0)
    }

    pub fn unrank(rank: u64, n: usize) -> Result<Self> {
        if n > MAX_RANK_N {
            return Err(Error::Contract(format!(
                "ranking supports n <= {MAX_RANK_N}, got {n}"
            )));
        }
        if rank >= factorial(n) {
            return Err(Error::Contract(format!(
                "rank {rank} out of range [0, {n}!)"
            )));
        }
        let mut out = vec![0; n];
        unrank_into(rank, &mut out);
        Ok(Self(out))
    }
}

impl TryFrom<Vec<usize>> for Permutation {
    type Error = Error;

    fn try_from(v: Vec<usize>) -> Result<Self> {
        Permutation::new(v)
    }
}

impl From<Permutation> for Vec<usize> {
    fn from(p: Permutation) -> Self {
        p.0
    }
}

impl fmt::Display for Permutation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|v| v.to_string()).collect();
        write!(f, "[{}]", parts.join(" "))
    }
}

/// Index pairs `(i, j)`, `i < j`, in lexicographic order.
pub fn swap_pairs(n: usize) -> impl Iterator<Item = (usize, usize)> + Clone {
    (0..n).flat_map(move |i| (i + 1..n).map(move |j| (i, j)))
}

pub fn neighborhood_size(n: usize) -> usize {
    n * n.saturating_sub(1) / 2
}

/// Largest `n` whose `n!` fits in a `u64`.
pub const MAX_RANK_N: usize = 20;

pub const fn factorial(n: usize) -> u64 {
    let mut f = 1u64;
    let mut i = 2;
    while i <= n {
        f *= i as u64;
        i += 1;
    }
    f
}

/// Lehmer digits: `digits[k] = #{m > k : p[m] < p[k]}`.
#[inline]
pub fn lehmer_digits(p: &[usize], digits: &mut [usize]) {
    let n = p.len();
    for k in 0..n {
        let pk = p[k];
        digits[k] = p[k + 1..].iter().filter(|&&v| v < pk).count();
    }
    debug_assert!(n == digits.len());
}

pub fn rank_slice(p: &[usize]) -> u64 {
    let n = p.len();
    let mut r = 0u64;
    for k in 0..n {
        let pk = p[k];
        let d = p[k + 1..].iter().filter(|&&v| v < pk).count() as u64;
        r = r * (n - k) as u64 + d;
    }
    r
}

/// Writes the permutation of rank `rank` into `out` (length `n`).
pub fn unrank_into(mut rank: u64, out: &mut [usize]) {
    let n = out.len();
    let mut digits = [0usize; MAX_RANK_N];
    for k in (0..n).rev() {
        let base = (n - k) as u64;
        digits[k] = (rank % base) as usize;
        rank /= base;
    }
    let mut pool: Vec<usize> = (0..n).collect();
    for k in 0..n {
        out[k] = pool.remove(digits[k]);
    }
}

/// Advances `p` to the next permutation in lexicographic order. Returns false
/// (leaving `p` untouched) at the last permutation.
pub fn next_permutation(p: &mut [usize]) -> bool {
    let n = p.len();
    if n < 2 {
        return false;
    }
    let mut i = n - 1;
    while i > 0 && p[i - 1] >= p[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = n - 1;
    while p[j] <= p[i - 1] {
        j -= 1;
    }
    p.swap(i - 1, j);
    p[i..].reverse();
    true
}
