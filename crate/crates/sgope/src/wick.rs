//! The mollified field at finitely many nodes, Wick-ordered exponentials and
//! the `L²` Cauchy property of `:e^{iαφ_ε}:(f)` as `ε → 0`.
//!
//! The field `φ_ε` is only ever needed at quadrature nodes, where its exact
//! covariance is known, so samples come from factorising that covariance.
//!
//! For the deterministic second moments every covariance splits as
//! `E[φ_ε(x)φ_δ(y)] = L_{ε,δ}(|x − y|) + g(x, y)` with a radial log part, so
//! with `F = f·e^{−(α²/2)g(x,x)}`
//!
//! ```text
//! ∬ F(x)F(y) e^{α² E[φ_ε(x)φ_δ(y)]} = ∫_0^∞ s e^{α² L_{ε,δ}(s)} K(s) ds,
//! K(s) = ∫ dx ∫_0^{2π} dθ F(x) F(x + s e^{iθ}) e^{α² g(x, x + s e^{iθ})},
//! ```
//!
//! and `K` is smooth, which reduces everything to one-dimensional radial rules.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::gauss::{CovMatrix, GaussianSampler};
use crate::green::{Bump, DiskDomain, Mollifier};
use crate::mc::{self, McEstimate};
use crate::{quad, Error, Point, Result};

/// Largest node count accepted by [`NodeSet`].
pub const N_MAX: usize = 4096;

/// Default tensor-grid resolution per axis.
pub const DEFAULT_GRID: usize = 64;

/// Nodes with quadrature weights, all mollified at scale `eps`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NodeSet {
    pub nodes: Vec<Point>,
    pub weights: Vec<f64>,
    pub eps: f64,
}

impl NodeSet {
    pub fn new(nodes: Vec<Point>, weights: Vec<f64>, eps: f64, dom: &DiskDomain, moll: &Mollifier) -> Result<Self> {
        if nodes.is_empty() || nodes.len() != weights.len() {
            return Err(Error::param("node set needs matching non-empty node and weight lists"));
        }
        if nodes.len() > N_MAX {
            return Err(Error::param(format!("{} nodes exceed the cap of {N_MAX}", nodes.len())));
        }
        if !(eps > 0.0) {
            return Err(Error::param("mollification scale must be positive"));
        }
        if let Some(x) = nodes.iter().find(|&&x| dom.boundary_distance(x) <= eps * moll.radius()) {
            return Err(Error::OutsideDomain(format!("mollification disk around node {x}")));
        }
        Ok(NodeSet { nodes, weights, eps })
    }

    /// Tensor Gauss–Legendre grid (`n × n`) over the bounding square of
    /// `supp f`; nodes where `f` vanishes are dropped.
    pub fn tensor_grid(f: &Bump, n: usize, eps: f64, dom: &DiskDomain, moll: &Mollifier) -> Result<Self> {
        let rule = quad::gauss_legendre(n);
        let h = f.radius;
        let mut nodes = Vec::new();
        let mut weights = Vec::new();
        for (xi, wi) in rule.nodes.iter().zip(&rule.weights) {
            for (yj, wj) in rule.nodes.iter().zip(&rule.weights) {
                let p = f.center + Point::new(h * xi, h * yj);
                if f.eval(p) != 0.0 {
                    nodes.push(p);
                    weights.push(wi * wj * h * h);
                }
            }
        }
        Self::new(nodes, weights, eps, dom, moll)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// Covariance matrix `E[φ_ε(x_i) φ_ε(x_j)]` of the mollified field at the nodes.
pub fn field_covariance(dom: &DiskDomain, moll: &Mollifier, nodes: &NodeSet) -> Result<CovMatrix> {
    let n = nodes.len();
    let eps = nodes.eps;
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| (0..=i).map(|j| moll.cov_raw(dom, nodes.nodes[i], nodes.nodes[j], eps, eps)).collect())
        .collect();
    let m = nalgebra::DMatrix::from_fn(n, n, |i, j| if j <= i { rows[i][j] } else { rows[j][i] });
    CovMatrix::new(m)
}

/// Field values at the nodes of a [`NodeSet`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FieldSample {
    pub values: Vec<f64>,
    pub seed: u64,
    pub eps: f64,
}

/// Samples the mollified field at a fixed node set.
#[derive(Debug, Clone)]
pub struct FieldSampler {
    pub nodes: NodeSet,
    pub cov: CovMatrix,
    sampler: GaussianSampler,
}

impl FieldSampler {
    pub fn new(dom: &DiskDomain, moll: &Mollifier, nodes: NodeSet) -> Result<Self> {
        let cov = field_covariance(dom, moll, &nodes)?;
        let sampler = GaussianSampler::new(&cov)?;
        Ok(FieldSampler { nodes, cov, sampler })
    }

    pub fn sample(&self, seed: u64) -> FieldSample {
        let mut rng = mc::batch_rng(seed, 0);
        FieldSample {
            values: self.sampler.sample(&mut rng),
            seed,
            eps: self.nodes.eps,
        }
    }

    fn sample_values(&self, rng: &mut rand_chacha::ChaCha8Rng, out: &mut [f64]) {
        self.sampler.sample_into(rng, out);
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha.abs() < (4.0 * PI).sqrt() {
        Ok(())
    } else {
        Err(Error::param(format!("|alpha| must be below √(4π), got {alpha}")))
    }
}

/// Normalisation `e^{α²c_ρ/2} ε^{−α²/4π}` of the Wick exponential.
pub fn wick_factor(alpha: f64, eps: f64, c_rho: f64) -> f64 {
    (0.5 * alpha * alpha * c_rho - alpha * alpha / (4.0 * PI) * eps.ln()).exp()
}

fn wick_sum(values: &[f64], alpha: f64, f: &Bump, nodes: &NodeSet, c_rho: f64) -> Complex64 {
    let k = wick_factor(alpha, nodes.eps, c_rho);
    let mut acc = Complex64::new(0.0, 0.0);
    for ((x, w), v) in nodes.nodes.iter().zip(&nodes.weights).zip(values) {
        acc += Complex64::from_polar(w * f.eval(*x), alpha * v);
    }
    acc * k
}

/// `Σ_i w_i f(x_i) e^{α²c_ρ/2} ε^{−α²/4π} e^{iαφ_ε(x_i)}`.
pub fn wick_exponential(sample: &FieldSample, alpha: f64, f: &Bump, nodes: &NodeSet, moll: &Mollifier) -> Result<Complex64> {
    check_alpha(alpha)?;
    if sample.values.len() != nodes.len() || sample.eps != nodes.eps {
        return Err(Error::param("field sample does not belong to this node set"));
    }
    Ok(wick_sum(&sample.values, alpha, f, nodes, moll.c_rho()))
}

/// Monte Carlo estimates of `E[W]` and `E|W|²` for `W = :e^{iαφ_ε}:(f)`.
pub fn wick_moments_mc(
    sampler: &FieldSampler,
    alpha: f64,
    f: &Bump,
    moll: &Mollifier,
    budget: u64,
    seed: u64,
) -> Result<[McEstimate; 2]> {
    check_alpha(alpha)?;
    let c_rho = moll.c_rho();
    let n = sampler.nodes.len();
    mc::run(budget, seed, |rng| {
        let mut v = vec![0.0; n];
        sampler.sample_values(rng, &mut v);
        let w = wick_sum(&v, alpha, f, &sampler.nodes, c_rho);
        [w, Complex64::new(w.norm_sqr(), 0.0)]
    })
}

/// The exact second moment `E|W|²` of the node-quadrature Wick exponential:
/// `Σ_ij w_i w_j F(x_i) F(x_j) e^{α² Σ_ij}` with the regime-two diagonal.
pub fn wick_second_moment_nodes(dom: &DiskDomain, cov: &CovMatrix, alpha: f64, f: &Bump, nodes: &NodeSet) -> f64 {
    let a2 = alpha * alpha;
    let c: Vec<f64> = nodes
        .nodes
        .iter()
        .zip(&nodes.weights)
        .map(|(x, w)| w * f.eval(*x) * (-0.5 * a2 * dom.harmonic_raw(*x, *x)).exp())
        .collect();
    let mut acc = 0.0;
    for i in 0..nodes.len() {
        for j in 0..nodes.len() {
            // the regime-two diagonal cancels the Wick normalisation exactly
            acc += c[i] * c[j] * (a2 * cov.get(i, j)).exp();
        }
    }
    acc
}

/// Resolution of the radial reduction used by [`l2_cauchy_gap`] and
/// [`wick_second_moment`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GapOrder {
    /// Polar rule over `supp f` in `K(s)`: angular and radial nodes.
    pub angular: usize,
    pub radial: usize,
    /// Angular nodes of the inner circle in `K(s)`.
    pub circle: usize,
    /// Gauss nodes per radial panel in `s`.
    pub panel: usize,
}

impl Default for GapOrder {
    fn default() -> Self {
        GapOrder {
            angular: 48,
            radial: 24,
            circle: 32,
            panel: 16,
        }
    }
}

impl GapOrder {
    pub fn refined(self) -> Self {
        GapOrder {
            angular: 2 * self.angular,
            radial: 2 * self.radial,
            circle: 2 * self.circle,
            panel: 2 * self.panel,
        }
    }
}

/// `K(s)` of the module docs.
struct PairKernel<'a> {
    dom: &'a DiskDomain,
    f: &'a Bump,
    a2: f64,
    order: GapOrder,
    xs: Vec<(Point, f64)>,
}

impl<'a> PairKernel<'a> {
    fn new(dom: &'a DiskDomain, f: &'a Bump, alpha: f64, order: GapOrder) -> Self {
        let a2 = alpha * alpha;
        let rule = quad::gauss_legendre(order.radial);
        let dth = 2.0 * PI / order.angular as f64;
        let mut xs = Vec::new();
        for (t, w) in rule.nodes.iter().zip(&rule.weights) {
            let rho = 0.5 * f.radius * (1.0 + t);
            for k in 0..order.angular {
                let x = f.center + Complex64::from_polar(rho, (k as f64 + 0.5) * dth);
                let fx = f.eval(x);
                if fx != 0.0 {
                    let wx = w * 0.5 * f.radius * rho * dth;
                    xs.push((x, wx * fx * (-0.5 * a2 * dom.harmonic_raw(x, x)).exp()));
                }
            }
        }
        PairKernel { dom, f, a2, order, xs }
    }

    fn eval(&self, s: f64) -> f64 {
        let m = self.order.circle;
        let dth = 2.0 * PI / m as f64;
        let dirs: Vec<Complex64> = (0..m).map(|k| Complex64::from_polar(s, (k as f64 + 0.5) * dth)).collect();
        self.xs
            .par_iter()
            .map(|&(x, wx)| {
                let mut acc = 0.0;
                for d in &dirs {
                    let y = x + d;
                    let fy = self.f.eval(y);
                    if fy != 0.0 {
                        acc += fy * (self.a2 * (self.dom.harmonic_raw(x, y) - 0.5 * self.dom.harmonic_raw(y, y))).exp();
                    }
                }
                wx * acc * dth
            })
            .sum()
    }
}

fn panels(cuts: &mut Vec<f64>, hi: f64) -> Vec<(f64, f64)> {
    cuts.retain(|&c| c > 0.0 && c < hi);
    cuts.push(0.0);
    cuts.push(hi);
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    cuts.windows(2).map(|w| (w[0], w[1])).collect()
}

/// `∬ F(x)F(y) e^{α² E[φ_ε(x)φ_ε(y)]}`, the `ε`-second moment of
/// `:e^{iαφ_ε}:(f)`, by radial reduction.
pub fn wick_second_moment(dom: &DiskDomain, moll: &Mollifier, f: &Bump, alpha: f64, eps: f64, order: GapOrder) -> Result<f64> {
    check_alpha(alpha)?;
    f.check_inside(dom)?;
    let a2 = alpha * alpha;
    let k = PairKernel::new(dom, f, alpha, order);
    let x = dom.center;
    let log_part = |s: f64| moll.cov_raw(dom, x, x + s, eps, eps) - dom.harmonic_raw(x, x + s);
    let edge = 2.0 * eps * moll.radius();
    let diam = 2.0 * f.radius;
    let mut total = 0.0;
    for (lo, hi) in panels(&mut vec![edge], diam) {
        let integrand = |s: f64| s * (a2 * log_part(s)).exp() * k.eval(s);
        total += if lo == edge {
            // s^{1−α²/2π} behaviour right after the log part takes over
            quad::graded(lo, hi, order.panel, 8, integrand)
        } else {
            quad::gl(lo, hi, order.panel, integrand)
        };
    }
    Ok(total)
}

/// `E|:e^{iαφ_ε}:(f) − :e^{iαφ_δ}:(f)|²`, the three-term bracket integrated
/// against `f(x)f(y)e^{−(α²/2)(g(x,x) + g(y,y))}`. The bracket vanishes once
/// `|x − y| ≥ 2·max(ε, δ)·r_ρ`.
pub fn l2_cauchy_gap(dom: &DiskDomain, moll: &Mollifier, f: &Bump, alpha: f64, eps: f64, delta: f64) -> Result<f64> {
    l2_cauchy_gap_with(dom, moll, f, alpha, eps, delta, GapOrder::default())
}

pub fn l2_cauchy_gap_with(
    dom: &DiskDomain,
    moll: &Mollifier,
    f: &Bump,
    alpha: f64,
    eps: f64,
    delta: f64,
    order: GapOrder,
) -> Result<f64> {
    check_alpha(alpha)?;
    f.check_inside(dom)?;
    if !(eps > 0.0 && delta > 0.0) {
        return Err(Error::param("mollification scales must be positive"));
    }
    let r = moll.radius();
    if dom.boundary_distance(f.center) - f.radius <= eps.max(delta) * r {
        return Err(Error::OutsideDomain("mollification disks around supp f leave the domain".into()));
    }
    if eps == delta {
        return Ok(0.0);
    }
    let a2 = alpha * alpha;
    let x = dom.center;
    let log_part = |s: f64, a: f64, b: f64| moll.cov_raw(dom, x, x + s, a, b) - dom.harmonic_raw(x, x + s);
    let bracket = |s: f64| {
        (a2 * log_part(s, eps, eps)).exp() - 2.0 * (a2 * log_part(s, eps, delta)).exp() + (a2 * log_part(s, delta, delta)).exp()
    };
    let k = PairKernel::new(dom, f, alpha, order);
    let hi = (2.0 * eps.max(delta) * r).min(2.0 * f.radius);
    let mut cuts = vec![2.0 * eps * r, (eps + delta) * r, 2.0 * delta * r];
    let mut total = 0.0;
    for (lo, hi) in panels(&mut cuts, hi) {
        total += quad::gl(lo, hi, order.panel, |s| s * bracket(s) * k.eval(s));
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn setup() -> (DiskDomain, &'static Mollifier, Bump) {
        (DiskDomain::unit(), Mollifier::standard(), Bump::new(Point::new(0.1, -0.05), 0.3, 1.0).unwrap())
    }

    #[test]
    fn covariance_regimes() {
        let (d, m, _) = setup();
        let (x, y) = (Point::new(-0.2, 0.0), Point::new(0.2, 0.1));
        let ns = NodeSet::new(vec![x, y], vec![1.0, 1.0], 0.05, &d, m).unwrap();
        let c = field_covariance(&d, m, &ns).unwrap();
        assert_eq!(c.get(0, 1).to_bits(), d.green(x, y).unwrap().to_bits());
        assert_eq!(c.get(0, 1), c.get(1, 0));

        let o = NodeSet::new(vec![Point::new(0.0, 0.0)], vec![1.0], 0.01, &d, m).unwrap();
        let c = field_covariance(&d, m, &o).unwrap();
        assert!((c.get(0, 0) - (100f64.ln() / (2.0 * PI) + m.c_rho())).abs() < 1e-14);
    }

    #[test]
    fn grid_covariance_is_psd() {
        let (d, m, _) = setup();
        let nodes: Vec<Point> = (0..16).map(|k| Point::new(0.1 * (k % 4) as f64 - 0.05, 0.1 * (k / 4) as f64 - 0.2)).collect();
        let ns = NodeSet::new(nodes, vec![1.0; 16], 0.1, &d, m).unwrap();
        let c = field_covariance(&d, m, &ns).unwrap();
        assert!(c.min_eigenvalue() >= -c.psd_tolerance());
    }

    #[test]
    fn wick_exponential_basic_properties() {
        let (d, m, f) = setup();
        let ns = NodeSet::tensor_grid(&f, 12, 0.1, &d, m).unwrap();
        let fs = FieldSampler::new(&d, m, ns.clone()).unwrap();
        let s = fs.sample(4);
        assert_eq!(s, fs.sample(4));
        let w0 = wick_exponential(&s, 0.0, &f, &ns, m).unwrap();
        let integral: f64 = ns.nodes.iter().zip(&ns.weights).map(|(x, w)| w * f.eval(*x)).sum();
        assert_eq!(w0, Complex64::new(integral, 0.0));
        assert!((integral / f.integral() - 1.0).abs() < 1e-3);
        let wp = wick_exponential(&s, 1.5, &f, &ns, m).unwrap();
        let wm = wick_exponential(&s, -1.5, &f, &ns, m).unwrap();
        assert!((wp.conj() - wm).norm() < 1e-14 * wp.norm());
        assert!(wick_exponential(&s, 4.0, &f, &ns, m).is_err());
    }

    #[test]
    fn mc_moments_match_exact_node_moments() {
        let (d, m, f) = setup();
        let ns = NodeSet::tensor_grid(&f, 10, 0.1, &d, m).unwrap();
        let fs = FieldSampler::new(&d, m, ns.clone()).unwrap();
        let alpha = (2.0 * PI).sqrt();
        let [mean, second] = wick_moments_mc(&fs, alpha, &f, m, 10_000, 5).unwrap();
        // E[W] is exact from the regime-two diagonal
        let first: f64 = ns
            .nodes
            .iter()
            .zip(&ns.weights)
            .map(|(x, w)| w * f.eval(*x) * (-0.5 * alpha * alpha * d.harmonic_raw(*x, *x)).exp())
            .sum();
        assert!((mean.value.re - first).abs() < 4.0 * mean.stderr_re(), "{} {first}", mean.value);
        let exact = wick_second_moment_nodes(&d, &fs.cov, alpha, &f, &ns);
        assert!((second.value.re - exact).abs() < 4.0 * second.stderr, "{} {exact} {}", second.value, second.stderr);
    }

    #[test]
    fn gap_is_zero_on_the_diagonal() {
        let (d, m, f) = setup();
        assert_eq!(l2_cauchy_gap(&d, m, &f, 2.0, 0.1, 0.1).unwrap(), 0.0);
    }

    #[test]
    fn second_moment_radial_reduction_matches_nodes() {
        // the node double sum with a fine grid approximates the continuum integral
        let (d, m, f) = setup();
        let eps = 0.08;
        let alpha = PI.sqrt();
        let ns = NodeSet::tensor_grid(&f, 40, eps, &d, m).unwrap();
        let cov = field_covariance(&d, m, &ns).unwrap();
        let nodes = wick_second_moment_nodes(&d, &cov, alpha, &f, &ns);
        let radial = wick_second_moment(&d, m, &f, alpha, eps, GapOrder::default()).unwrap();
        assert!(((nodes - radial) / radial).abs() < 1e-3, "{nodes} {radial}");
    }
}
