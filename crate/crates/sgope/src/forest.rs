//! Nearest-neighbour maps and labelled directed two-loop rooted forests.
//!
//! Every out-degree-one digraph whose cycles all have length two is a union
//! of `k` two-loops with rooted trees hanging off the loop vertices. The
//! count of such forests on `n` labelled vertices with `k` loops is
//!
//! ```text
//! n! / (2^k k!) · 2k n^{n−2k−1} / (n − 2k)!
//! ```
//!
//! which the enumeration here reproduces exactly for small `n`.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use rayon::prelude::*;

use crate::{Error, Point, Result};

/// Largest `n` accepted by [`enumerate_forests`].
pub const ENUMERATION_MAX: usize = 8;

const TIE_TOL: f64 = 1e-12;

/// An out-degree-one digraph without self-loops, `succ[i]` being the head of
/// the edge out of `i` (0-based).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Digraph {
    pub succ: Vec<usize>,
}

impl Digraph {
    pub fn new(succ: Vec<usize>) -> Result<Self> {
        let n = succ.len();
        for (i, &s) in succ.iter().enumerate() {
            if s >= n || s == i {
                return Err(Error::param(format!("vertex {i} has invalid successor {s}")));
            }
        }
        Ok(Digraph { succ })
    }

    /// From a 1-based successor list.
    pub fn from_one_based(succ: &[usize]) -> Result<Self> {
        if succ.contains(&0) {
            return Err(Error::param("1-based successor list contains 0"));
        }
        Self::new(succ.iter().map(|s| s - 1).collect())
    }

    pub fn len(&self) -> usize {
        self.succ.len()
    }

    pub fn is_empty(&self) -> bool {
        self.succ.is_empty()
    }
}

/// Result of [`classify`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ForestClass {
    pub valid: bool,
    /// Number of two-loops (number of cycles of any length when invalid).
    pub k: usize,
    /// Weakly connected components, each sorted, ordered by smallest vertex.
    pub components: Vec<Vec<usize>>,
}

/// `succ(i) = argmin_{j≠i} |x_j − x_i|`, ties going to the smallest index.
/// Squared distances within a relative `1e-12` of each other count as tied,
/// so configurations that are symmetric up to rounding resolve as intended.
pub fn nearest_neighbor_map(points: &[Point]) -> Result<Digraph> {
    if points.len() < 2 {
        return Err(Error::param("nearest-neighbour map needs at least two points"));
    }
    for i in 0..points.len() {
        for j in 0..i {
            if points[i] == points[j] {
                return Err(Error::CoincidentPoints(format!("points {j} and {i} coincide")));
            }
        }
    }
    let succ = (0..points.len())
        .map(|i| {
            let mut best = usize::MAX;
            let mut best_d = f64::INFINITY;
            for (j, p) in points.iter().enumerate() {
                let d = (p - points[i]).norm_sqr();
                if j != i && d < best_d * (1.0 - TIE_TOL) {
                    best = j;
                    best_d = d;
                }
            }
            best
        })
        .collect();
    Digraph::new(succ)
}

/// Cycle lengths of a functional graph, one entry per cycle.
fn cycle_lengths(succ: &[usize]) -> Vec<usize> {
    let n = succ.len();
    // 0 unvisited, 1 on the current path, 2 finished
    let mut state = vec![0u8; n];
    let mut out = Vec::new();
    for start in 0..n {
        let mut path = Vec::new();
        let mut v = start;
        while state[v] == 0 {
            state[v] = 1;
            path.push(v);
            v = succ[v];
        }
        if state[v] == 1 {
            let pos = path.iter().position(|&p| p == v).expect("on path");
            out.push(path.len() - pos);
        }
        for p in path {
            state[p] = 2;
        }
    }
    out
}

pub fn classify(g: &Digraph) -> ForestClass {
    let cycles = cycle_lengths(&g.succ);
    let n = g.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], mut v: usize) -> usize {
        while p[v] != v {
            p[v] = p[p[v]];
            v = p[v];
        }
        v
    }
    for (i, &s) in g.succ.iter().enumerate() {
        let (a, b) = (find(&mut parent, i), find(&mut parent, s));
        if a != b {
            parent[a.max(b)] = a.min(b);
        }
    }
    let mut comps: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for v in 0..n {
        let r = find(&mut parent, v);
        comps.entry(r).or_default().push(v);
    }
    ForestClass {
        valid: cycles.iter().all(|&l| l == 2),
        k: cycles.len(),
        components: comps.into_values().collect(),
    }
}

/// Number of two-loops if every cycle of `succ` has length two.
fn two_loop_count(succ: &[u8]) -> Option<usize> {
    let n = succ.len();
    let mut state = [0u8; ENUMERATION_MAX];
    let mut k = 0;
    for start in 0..n {
        let mut v = start;
        while state[v] == 0 {
            state[v] = 1;
            v = succ[v] as usize;
        }
        if state[v] == 1 {
            // closed a new cycle: it must be v → succ(v) → v
            let w = succ[v] as usize;
            if succ[w] as usize != v {
                return None;
            }
            k += 1;
        }
        // mark the path finished
        let mut u = start;
        while state[u] == 1 {
            state[u] = 2;
            u = succ[u] as usize;
        }
    }
    Some(k)
}

/// `|𝓕₂,ₖ⁽ⁿ⁾|` for every `k` by scanning all `(n−1)ⁿ` successor maps.
pub fn enumerate_forests(n: usize) -> Result<BTreeMap<usize, u64>> {
    if !(2..=ENUMERATION_MAX).contains(&n) {
        return Err(Error::param(format!("enumeration needs 2 ≤ n ≤ {ENUMERATION_MAX}, got {n}")));
    }
    // choices[i] ∈ 0..n−1 encodes succ(i) = choice if choice < i else choice + 1
    let partial: Vec<[u64; ENUMERATION_MAX / 2 + 1]> = (0..n - 1)
        .into_par_iter()
        .map(|first| {
            let mut counts = [0u64; ENUMERATION_MAX / 2 + 1];
            let mut choice = vec![0usize; n];
            choice[0] = first;
            let mut succ = vec![0u8; n];
            loop {
                for i in 0..n {
                    succ[i] = (if choice[i] < i { choice[i] } else { choice[i] + 1 }) as u8;
                }
                if let Some(k) = two_loop_count(&succ) {
                    counts[k] += 1;
                }
                // odometer over vertices 1..n
                let mut i = 1;
                while i < n {
                    choice[i] += 1;
                    if choice[i] < n - 1 {
                        break;
                    }
                    choice[i] = 0;
                    i += 1;
                }
                if i == n {
                    break;
                }
            }
            counts
        })
        .collect();
    let mut out = BTreeMap::new();
    for k in 1..=n / 2 {
        out.insert(k, partial.iter().map(|c| c[k]).sum());
    }
    Ok(out)
}

fn factorial(n: usize) -> BigInt {
    (1..=n).fold(BigInt::one(), |acc, i| acc * BigInt::from(i))
}

/// `n!/(2^k k!) · 2k n^{n−2k−1}/(n−2k)!` in exact integer arithmetic.
pub fn forest_count_exact(n: usize, k: usize) -> Result<BigInt> {
    if k < 1 || 2 * k > n {
        return Err(Error::param(format!("need 1 ≤ k ≤ n/2, got n = {n}, k = {k}")));
    }
    let num = factorial(n) * BigInt::from(2 * k);
    let den = BigInt::from(2u32).pow(k as u32) * factorial(k) * factorial(n - 2 * k);
    let q = if n == 2 * k {
        // n^{−1}: fold it into the denominator
        let d = den * BigInt::from(n);
        debug_assert!((&num % &d).is_zero());
        num / d
    } else {
        let d = den;
        num * BigInt::from(n).pow((n - 2 * k - 1) as u32) / d
    };
    Ok(q)
}

/// Labelled rooted tree counts `C_1..C_{m_max}` from the root-degree recursion
/// `C_m = Σ_d (1/d!) Σ_{r₁+…+r_d = m−1} m!/(r₁!⋯r_d!) ∏ C_{r_i}`,
/// evaluated as `T_m = C_m/m!` by convolution powers.
pub fn tree_series_coeffs(m_max: usize) -> Vec<BigRational> {
    let mut t: Vec<BigRational> = vec![BigRational::zero(); m_max + 1];
    if m_max >= 1 {
        t[1] = BigRational::one();
    }
    for m in 2..=m_max {
        // [x^{m−1}] Σ_{d≥1} T(x)^d/d! using only T_1..T_{m−1}
        let mut power = vec![BigRational::zero(); m];
        power[0] = BigRational::one();
        let mut total = BigRational::zero();
        let mut d_fact = BigRational::one();
        for d in 1..m {
            let mut next = vec![BigRational::zero(); m];
            for (i, pi) in power.iter().enumerate() {
                if pi.is_zero() {
                    continue;
                }
                for j in 1..m - i {
                    next[i + j] += pi * &t[j];
                }
            }
            power = next;
            d_fact *= BigRational::from_integer(BigInt::from(d));
            total += &power[m - 1] / &d_fact;
        }
        t[m] = total;
    }
    t.remove(0);
    t
}

/// `C_m` for `m = 1..=m_max`, from [`tree_series_coeffs`].
pub fn rooted_tree_counts(m_max: usize) -> Vec<BigInt> {
    tree_series_coeffs(m_max)
        .into_iter()
        .enumerate()
        .map(|(i, t)| {
            let c = t * BigRational::from_integer(factorial(i + 1));
            debug_assert!(c.is_integer());
            c.to_integer()
        })
        .collect()
}

pub fn rooted_tree_count(m: usize) -> Result<BigInt> {
    if m < 1 {
        return Err(Error::param("rooted trees need at least one vertex"));
    }
    Ok(rooted_tree_counts(m).pop().expect("m ≥ 1"))
}

/// `n!/(2^k k!) [T(x)^{2k}]_n`, the count from the tree-size convolution.
pub fn forest_count_convolution(n: usize, k: usize) -> Result<BigInt> {
    if k < 1 || 2 * k > n {
        return Err(Error::param(format!("need 1 ≤ k ≤ n/2, got n = {n}, k = {k}")));
    }
    let t = tree_series_coeffs(n);
    let mut power = vec![BigRational::zero(); n + 1];
    power[0] = BigRational::one();
    for _ in 0..2 * k {
        let mut next = vec![BigRational::zero(); n + 1];
        for (i, pi) in power.iter().enumerate() {
            if pi.is_zero() {
                continue;
            }
            for j in 1..=n - i {
                next[i + j] += pi * &t[j - 1];
            }
        }
        power = next;
    }
    let scale = BigRational::new(factorial(n), BigInt::from(2u32).pow(k as u32) * factorial(k));
    let c = &power[n] * scale;
    debug_assert!(c.is_integer());
    Ok(c.to_integer())
}

/// One row of a [`bound_probe`].
#[derive(Debug, Clone, PartialEq)]
pub struct BoundRow {
    pub n: usize,
    pub k: usize,
    pub count: BigInt,
    /// `(count / (n − k)!)^{1/n}`
    pub ratio: f64,
}

fn big_ln(x: &BigInt) -> f64 {
    let bits = x.bits();
    if bits < 1000 {
        return x.to_f64().expect("finite").ln();
    }
    let shift = bits - 900;
    (x >> shift).to_f64().expect("finite").ln() + shift as f64 * std::f64::consts::LN_2
}

/// The smallest `C` with `|𝓕₂,ₖ⁽ⁿ⁾| ≤ Cⁿ(n−k)!` over `n ∈ ns`, all `k`,
/// together with the per-(n, k) ratios.
pub fn bound_probe(ns: impl IntoIterator<Item = usize>) -> Result<(f64, Vec<BoundRow>)> {
    let mut rows = Vec::new();
    for n in ns {
        for k in 1..=n / 2 {
            let count = forest_count_exact(n, k)?;
            let ratio = ((big_ln(&count) - big_ln(&factorial(n - k))) / n as f64).exp();
            rows.push(BoundRow { n, k, count, ratio });
        }
    }
    let c = rows.iter().map(|r| r.ratio).fold(0.0, f64::max);
    Ok((c, rows))
}
