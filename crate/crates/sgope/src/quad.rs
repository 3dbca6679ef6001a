//! Gauss–Legendre rules and polar-coordinate quadrature on disks.
//!
//! All two-dimensional integrals in the crate run over a disk (the support of
//! a bump), possibly with integrable point singularities of logarithmic or
//! `|u − p|^{−a}` type with `a < 2`. Such singularities become bounded after
//! switching to polar coordinates centred at the singular point, so the rules
//! here integrate over a disk in polar coordinates about an arbitrary centre,
//! with radial panels graded geometrically towards that centre. Several
//! singular points are handled with a smooth partition of unity.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::ops::{Add, Mul};
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use num_traits::Zero;

use crate::{Error, Point, Result};

/// Values that quadrature rules can accumulate.
pub trait Integrand: Copy + Zero + Add<Output = Self> + Mul<f64, Output = Self> {
    fn magnitude(&self) -> f64;
}

impl Integrand for f64 {
    fn magnitude(&self) -> f64 {
        self.abs()
    }
}

impl Integrand for Complex64 {
    fn magnitude(&self) -> f64 {
        self.norm()
    }
}

/// Nodes and weights of the `n`-point Gauss–Legendre rule on `[-1, 1]`.
#[derive(Debug)]
pub struct GlRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

fn compute_rule(n: usize) -> GlRule {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let p = if n == 1 { x } else { p1 };
            let pm1 = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (x * p - pm1) / (x * x - 1.0);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    GlRule { nodes, weights }
}

/// Cached Gauss–Legendre rule with `n ≥ 1` points.
pub fn gauss_legendre(n: usize) -> Arc<GlRule> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<GlRule>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().unwrap_or_else(|e| e.into_inner());
    guard
        .entry(n.max(1))
        .or_insert_with(|| Arc::new(compute_rule(n.max(1))))
        .clone()
}

/// `n`-point Gauss–Legendre approximation of `∫_a^b f`.
pub fn gl<T: Integrand>(a: f64, b: f64, n: usize, mut f: impl FnMut(f64) -> T) -> T {
    let rule = gauss_legendre(n);
    let (h, m) = (0.5 * (b - a), 0.5 * (b + a));
    let mut acc = T::zero();
    for (x, w) in rule.nodes.iter().zip(&rule.weights) {
        acc = acc + f(m + h * x) * (w * h);
    }
    acc
}

/// Composite rule on `[a, b]` whose panels shrink geometrically (ratio 1/4)
/// towards `a`, for integrands with an integrable endpoint singularity at `a`.
pub fn graded<T: Integrand>(
    a: f64,
    b: f64,
    n: usize,
    levels: usize,
    mut f: impl FnMut(f64) -> T,
) -> T {
    let mut acc = T::zero();
    let mut hi = b;
    for _ in 0..levels {
        let lo = a + 0.25 * (hi - a);
        acc = acc + gl(lo, hi, n, &mut f);
        hi = lo;
    }
    acc + gl(a, hi, n, &mut f)
}

/// Resolution of a polar rule: angular nodes, radial nodes per panel, and
/// number of graded radial panels towards the centre of the polar system.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PolarOrder {
    pub angular: usize,
    pub radial: usize,
    pub levels: usize,
}

impl PolarOrder {
    pub const fn new(angular: usize, radial: usize, levels: usize) -> Self {
        PolarOrder {
            angular,
            radial,
            levels,
        }
    }

    /// The order obtained after `k` refinement steps (node counts doubled).
    pub fn refined(self, k: u32) -> Self {
        let s = 1usize << k;
        PolarOrder {
            angular: self.angular * s,
            radial: self.radial * s,
            levels: self.levels + 2 * k as usize,
        }
    }
}

impl Default for PolarOrder {
    fn default() -> Self {
        PolarOrder::new(64, 16, 8)
    }
}

/// `∫_{B(c,r)} f` for a smooth integrand, in polar coordinates about `c`.
pub fn disk<T: Integrand>(
    c: Point,
    r: f64,
    angular: usize,
    radial: usize,
    mut f: impl FnMut(Point) -> T,
) -> T {
    let dth = 2.0 * PI / angular as f64;
    let dirs: Vec<Complex64> = (0..angular)
        .map(|k| Complex64::from_polar(1.0, (k as f64 + 0.5) * dth))
        .collect();
    gl(0.0, r, radial, |rho| {
        let mut acc = T::zero();
        for e in &dirs {
            acc = acc + f(c + e * rho);
        }
        acc * (rho * dth)
    })
}

/// `∫_{B(c,r)} f` in polar coordinates about `p`, which may lie inside or
/// outside the disk. Integrable singularities at `p` are resolved by the
/// graded radial panels.
pub fn polar_about<T: Integrand>(
    p: Point,
    c: Point,
    r: f64,
    order: PolarOrder,
    mut f: impl FnMut(Point) -> T,
) -> T {
    let d = p - c;
    let dist = d.norm();
    let c0 = dist * dist - r * r;
    if dist < r {
        let dth = 2.0 * PI / order.angular as f64;
        let mut acc = T::zero();
        for k in 0..order.angular {
            let e = Complex64::from_polar(1.0, (k as f64 + 0.5) * dth);
            let b = (d.conj() * e).re;
            let rho_max = -b + (b * b - c0).max(0.0).sqrt();
            acc = acc + graded(0.0, rho_max, order.radial, order.levels, |rho| f(p + e * rho) * rho);
        }
        acc * dth
    } else {
        // θ − θ_c = asin((r/|d|) sin v) makes the chord length 2r cos v, so
        // the angular integrand stays smooth up to the tangent directions
        let theta_c = (-d).arg();
        let k = (r / dist).min(1.0);
        gl(-0.5 * PI, 0.5 * PI, order.angular, |v| {
            let sv = k * v.sin();
            let jac = k * v.cos() / (1.0 - sv * sv).sqrt();
            let e = Complex64::from_polar(1.0, theta_c + sv.asin());
            let b = (d.conj() * e).re;
            let disc = (b * b - c0).max(0.0).sqrt();
            let (lo, hi) = ((-b - disc).max(0.0), -b + disc);
            gl(lo, hi, order.radial, |rho| f(p + e * rho) * rho) * jac
        })
    }
}

/// `∫_{B(c,r)} f` for an integrand with integrable singularities at each of
/// `centers`. The integrand is split with the partition of unity
/// `χ_i = |u − p_i|^{−2} / Σ_k |u − p_k|^{−2}` and each piece is integrated in
/// polar coordinates about its own centre.
pub fn polar_partition<T: Integrand>(
    centers: &[Point],
    c: Point,
    r: f64,
    order: PolarOrder,
    mut f: impl FnMut(Point) -> T,
) -> T {
    match centers.len() {
        0 => polar_about(c, c, r, order, f),
        1 => polar_about(centers[0], c, r, order, f),
        _ => {
            let mut acc = T::zero();
            for (i, &p) in centers.iter().enumerate() {
                acc = acc
                    + polar_about(p, c, r, order, |u| {
                        let di = (u - p).norm_sqr();
                        if di == 0.0 {
                            return T::zero();
                        }
                        let mut denom = 0.0;
                        for (k, &q) in centers.iter().enumerate() {
                            let dk = (u - q).norm_sqr();
                            if k != i && dk == 0.0 {
                                return T::zero();
                            }
                            denom += di / dk;
                        }
                        f(u) * (1.0 / denom)
                    });
            }
            acc
        }
    }
}

/// Runs `estimate(0), estimate(1), …` until two successive values agree to
/// `tol·max(1, |value|)`, returning the last one.
pub fn refine<T: Integrand>(
    tol: f64,
    max_steps: u32,
    mut estimate: impl FnMut(u32) -> T,
) -> Result<T> {
    let mut prev = estimate(0);
    let mut diff = f64::INFINITY;
    for k in 1..=max_steps {
        let next = estimate(k);
        diff = (next + prev * -1.0).magnitude();
        if diff <= tol * next.magnitude().max(1.0) {
            return Ok(next);
        }
        prev = next;
    }
    Err(Error::QuadratureNonConvergence { diff, tol })
}

/// Chebyshev interpolant of a smooth function on `[a, b]`.
#[derive(Debug, Clone)]
pub struct Chebyshev {
    a: f64,
    b: f64,
    coeffs: Vec<f64>,
}

impl Chebyshev {
    /// Interpolates `f` at `n` Chebyshev points of the first kind.
    pub fn fit(a: f64, b: f64, n: usize, mut f: impl FnMut(f64) -> f64) -> Self {
        let vals: Vec<f64> = (0..n)
            .map(|k| {
                let x = (PI * (k as f64 + 0.5) / n as f64).cos();
                f(a + 0.5 * (b - a) * (1.0 + x))
            })
            .collect();
        let coeffs = (0..n)
            .map(|j| {
                let s: f64 = (0..n)
                    .map(|k| vals[k] * (PI * j as f64 * (k as f64 + 0.5) / n as f64).cos())
                    .sum();
                s * 2.0 / n as f64 * if j == 0 { 0.5 } else { 1.0 }
            })
            .collect();
        Chebyshev { a, b, coeffs }
    }

    /// Clenshaw evaluation; arguments outside `[a, b]` extrapolate.
    pub fn eval(&self, t: f64) -> f64 {
        let x = (2.0 * t - self.a - self.b) / (self.b - self.a);
        let (mut b1, mut b2) = (0.0, 0.0);
        for &c in self.coeffs.iter().skip(1).rev() {
            let b0 = 2.0 * x * b1 - b2 + c;
            b2 = b1;
            b1 = b0;
        }
        x * b1 - b2 + self.coeffs[0]
    }
}
