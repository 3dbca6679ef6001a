//! Coulomb-gas integrals: moments of Wick exponentials, the one- and
//! two-point kernels `G_n`, `H_n`, and Onsager-type electrostatic bounds.
//!
//! The integrand `e^{−Σ α_kα_l G(x_k, x_l)}` blows up like
//! `|x_k − x_l|^{−α_kα_l/2π}` where opposite charges meet. Points are drawn
//! sequentially from a mixture: with probability ½ uniformly on the support
//! of their test function, otherwise from a radial density `∝ |u − c|^{−γ}`
//! about a uniformly chosen centre `c` (a fixed anchor or an already placed
//! point). With `γ = ‖α‖²/2π` every pair singularity is matched, which keeps
//! the importance weights square integrable.

use std::cmp::Ordering;
use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use serde::Serialize;

use crate::green::{Bump, DiskDomain, Mollifier};
use crate::mc::{self, McEstimate};
use crate::{Error, Point, Result};

/// Largest number of integrated points in a moment-growth probe.
pub const GROWTH_MAX_N: usize = 4;

/// Charges `α_1, …, α_n`, each in `(−√4π, √4π)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChargeSystem {
    alpha: Vec<f64>,
    beta: Option<f64>,
    sigma: Option<Vec<i8>>,
}

impl ChargeSystem {
    pub fn new(alpha: Vec<f64>) -> Result<Self> {
        let bound = (4.0 * PI).sqrt();
        if let Some(a) = alpha.iter().find(|a| !(a.abs() < bound)) {
            return Err(Error::param(format!("charge {a} outside (−√4π, √4π)")));
        }
        Ok(ChargeSystem {
            alpha,
            beta: None,
            sigma: None,
        })
    }

    /// `α_j = σ_j √β`.
    pub fn sine_gordon(beta: f64, sigma: &[i8]) -> Result<Self> {
        if !(beta > 0.0 && beta < 4.0 * PI) {
            return Err(Error::param(format!("β must lie in (0, 4π), got {beta}")));
        }
        if sigma.iter().any(|s| s.abs() != 1) {
            return Err(Error::param("signs must be ±1"));
        }
        let mut out = Self::new(sigma.iter().map(|&s| f64::from(s) * beta.sqrt()).collect())?;
        out.beta = Some(beta);
        out.sigma = Some(sigma.to_vec());
        Ok(out)
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn beta(&self) -> Option<f64> {
        self.beta
    }

    pub fn sigma(&self) -> Option<&[i8]> {
        self.sigma.as_deref()
    }

    pub fn len(&self) -> usize {
        self.alpha.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alpha.is_empty()
    }

    /// `‖α‖ = max |α_j|`.
    pub fn norm(&self) -> f64 {
        self.alpha.iter().fold(0.0, |m, a| m.max(a.abs()))
    }

    /// `‖α‖²/2π`, the worst pair singularity exponent.
    pub fn pair_exponent(&self) -> f64 {
        self.norm().powi(2) / (2.0 * PI)
    }
}

/// A fixed centre of radial proposal components.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Anchor {
    pub point: Point,
    pub gamma: f64,
}

/// Sequential mixture proposal for points `u_1, …, u_n`, `u_j` supported on
/// the disk `sites[j]`.
#[derive(Debug, Clone)]
pub struct Proposal {
    sites: Vec<(Point, f64)>,
    anchors: Vec<Anchor>,
    gamma: f64,
}

impl Proposal {
    /// `gamma` is the radial exponent used about already placed points.
    pub fn new(sites: Vec<(Point, f64)>, anchors: Vec<Anchor>, gamma: f64) -> Result<Self> {
        let ok = |g: f64| (0.0..2.0).contains(&g);
        if !ok(gamma) || anchors.iter().any(|a| !ok(a.gamma)) {
            return Err(Error::param("radial proposal exponents must lie in [0, 2)"));
        }
        if sites.iter().any(|s| !(s.1 > 0.0)) {
            return Err(Error::param("proposal sites need positive radii"));
        }
        Ok(Proposal { sites, anchors, gamma })
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    // radial density about c reaching over all of site (sc, sr)
    fn radial_density(c: Point, gamma: f64, (sc, sr): (Point, f64), u: Point) -> f64 {
        let reach = (c - sc).norm() + sr;
        let d = (u - c).norm();
        if d >= reach {
            0.0
        } else {
            (2.0 - gamma) / (2.0 * PI * reach.powf(2.0 - gamma)) * d.powf(-gamma)
        }
    }

    fn site_density(&self, j: usize, u: Point, placed: &[Point]) -> f64 {
        let (sc, sr) = self.sites[j];
        let uniform = if (u - sc).norm_sqr() < sr * sr { 1.0 / (PI * sr * sr) } else { 0.0 };
        let n_centres = self.anchors.len() + placed.len();
        if n_centres == 0 {
            return uniform;
        }
        let mut radial: f64 = self.anchors.iter().map(|a| Self::radial_density(a.point, a.gamma, (sc, sr), u)).sum();
        radial += placed.iter().map(|&p| Self::radial_density(p, self.gamma, (sc, sr), u)).sum::<f64>();
        0.5 * uniform + 0.5 * radial / n_centres as f64
    }

    /// Draws all points into `out` and returns their joint proposal density.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut Vec<Point>) -> f64 {
        out.clear();
        let mut density = 1.0;
        for (j, &(sc, sr)) in self.sites.iter().enumerate() {
            let n_centres = self.anchors.len() + j;
            let u = if n_centres == 0 || rng.random::<bool>() {
                let r = sr * rng.random::<f64>().sqrt();
                sc + Complex64::from_polar(r, 2.0 * PI * rng.random::<f64>())
            } else {
                let k = rng.random_range(0..n_centres);
                let (c, gamma) = match self.anchors.get(k) {
                    Some(a) => (a.point, a.gamma),
                    None => (out[k - self.anchors.len()], self.gamma),
                };
                let reach = (c - sc).norm() + sr;
                let r = reach * rng.random::<f64>().powf(1.0 / (2.0 - gamma));
                c + Complex64::from_polar(r, 2.0 * PI * rng.random::<f64>())
            };
            density *= self.site_density(j, u, out);
            out.push(u);
        }
        density
    }
}

/// Importance-sampled `∫ integrand(u) du` under `proposal`.
pub fn importance_integral<const K: usize, F>(
    proposal: &Proposal,
    budget: u64,
    seed: u64,
    integrand: F,
) -> Result<[McEstimate; K]>
where
    F: Fn(&[Point]) -> [Complex64; K] + Sync,
{
    if proposal.is_empty() {
        if budget == 0 {
            return Err(Error::param("Monte Carlo budget must be at least 1"));
        }
        return Ok(integrand(&[]).map(McEstimate::exact));
    }
    let zero = [Complex64::new(0.0, 0.0); K];
    mc::run(budget, seed, |rng| {
        let mut u = Vec::with_capacity(proposal.len());
        let q = proposal.draw(rng, &mut u);
        if !(q > 0.0 && q.is_finite()) {
            return zero;
        }
        integrand(&u).map(|v| v / q)
    })
}

fn check_sites(dom: &DiskDomain, fs: &[Bump]) -> Result<()> {
    fs.iter().try_for_each(|f| f.check_inside(dom))
}

fn check_point(dom: &DiskDomain, x: Point) -> Result<()> {
    if dom.contains(x) {
        Ok(())
    } else {
        Err(Error::OutsideDomain(format!("{x}")))
    }
}

fn cmp_bump(a: &Bump, b: &Bump) -> Ordering {
    a.center
        .re
        .total_cmp(&b.center.re)
        .then(a.center.im.total_cmp(&b.center.im))
        .then(a.radius.total_cmp(&b.radius))
        .then(a.amplitude.total_cmp(&b.amplitude))
}

// sorted (f_j, α_j) pairs so that the draw order ignores input order
fn canonical(fs: &[Bump], alpha: &[f64]) -> (Vec<Bump>, Vec<f64>) {
    let mut idx: Vec<usize> = (0..fs.len()).collect();
    idx.sort_by(|&i, &j| alpha[i].total_cmp(&alpha[j]).then(cmp_bump(&fs[i], &fs[j])));
    (idx.iter().map(|&i| fs[i]).collect(), idx.iter().map(|&i| alpha[i]).collect())
}

/// `e^{−Σ_{k<l} α_kα_l G(x_k, x_l)}` over fixed points followed by free
/// points, or zero when two points coincide.
fn pair_weight(dom: &DiskDomain, alpha: &[f64], points: &[Point]) -> f64 {
    let mut e = 0.0;
    for k in 0..points.len() {
        for l in k + 1..points.len() {
            let a = alpha[k] * alpha[l];
            if a == 0.0 {
                continue;
            }
            if points[k] == points[l] {
                return 0.0;
            }
            e -= a * dom.green_raw(points[k], points[l]);
        }
    }
    e.exp()
}

/// Shared engine for the moment and kernels: `fixed` points carry the first
/// charges, the free points follow with test functions `fs`.
fn coulomb_integral(
    dom: &DiskDomain,
    fixed: &[Point],
    fs: &[Bump],
    alpha: &[f64],
    self_energy: bool,
    budget: u64,
    seed: u64,
) -> Result<McEstimate> {
    let gamma = alpha.iter().fold(0.0f64, |m, a| m.max(a.abs())).powi(2) / (2.0 * PI);
    assert!(gamma < 2.0, "pair singularity exponent {gamma} is not integrable");
    let anchors = fixed
        .iter()
        .zip(alpha)
        .filter(|(_, a)| **a != 0.0)
        .map(|(&point, _)| Anchor { point, gamma })
        .collect();
    let sites = fs.iter().map(|f| (f.center, f.radius)).collect();
    let proposal = Proposal::new(sites, anchors, gamma)?;
    let nf = fixed.len();
    let [est] = importance_integral(&proposal, budget, seed, |u| {
        let mut w = 1.0;
        for (j, (f, &x)) in fs.iter().zip(u).enumerate() {
            let v = f.eval(x);
            if v == 0.0 {
                return [Complex64::new(0.0, 0.0)];
            }
            w *= v;
            if self_energy {
                w *= (-0.5 * alpha[nf + j].powi(2) * dom.harmonic_raw(x, x)).exp();
            }
        }
        let mut pts = Vec::with_capacity(nf + u.len());
        pts.extend_from_slice(fixed);
        pts.extend_from_slice(u);
        [Complex64::new(w * pair_weight(dom, alpha, &pts), 0.0)]
    })?;
    Ok(est)
}

/// `∫ ∏ f_j(x_j) e^{−α_j² g(x_j,x_j)/2} · e^{−Σ_{k<l} α_kα_l G(x_k,x_l)}`,
/// the mixed moment of Wick exponentials.
pub fn ic_moment(dom: &DiskDomain, fs: &[Bump], system: &ChargeSystem, budget: u64, seed: u64) -> Result<McEstimate> {
    if fs.is_empty() || fs.len() != system.len() {
        return Err(Error::param(format!(
            "{} test functions for {} charges",
            fs.len(),
            system.len()
        )));
    }
    check_sites(dom, fs)?;
    let (fs, alpha) = canonical(fs, system.alpha());
    coulomb_integral(dom, &[], &fs, &alpha, true, budget, seed)
}

/// `G_n(x_1)`: the charge `α_1` sits at `x_1`, the others are integrated
/// against `f_2, …, f_n`.
pub fn gn_kernel(
    dom: &DiskDomain,
    x1: Point,
    fs: &[Bump],
    system: &ChargeSystem,
    budget: u64,
    seed: u64,
) -> Result<McEstimate> {
    if system.len() < 2 || fs.len() + 1 != system.len() {
        return Err(Error::param("G_n needs n ≥ 2 charges and n − 1 test functions"));
    }
    check_point(dom, x1)?;
    check_sites(dom, fs)?;
    let (fs, rest) = canonical(fs, &system.alpha()[1..]);
    let alpha: Vec<f64> = std::iter::once(system.alpha()[0]).chain(rest).collect();
    coulomb_integral(dom, &[x1], &fs, &alpha, false, budget, seed)
}

/// `H_n(x_1, x_2)`: charges `α_1, α_2` fixed at `x_1, x_2`.
pub fn hn_kernel(
    dom: &DiskDomain,
    x1: Point,
    x2: Point,
    fs: &[Bump],
    system: &ChargeSystem,
    budget: u64,
    seed: u64,
) -> Result<McEstimate> {
    if system.len() < 3 || fs.len() + 2 != system.len() {
        return Err(Error::param("H_n needs n ≥ 3 charges and n − 2 test functions"));
    }
    check_point(dom, x1)?;
    check_point(dom, x2)?;
    if x1 == x2 {
        return Err(Error::CoincidentPoints(format!("{x1}")));
    }
    let a = system.alpha();
    let key = |x: Point, al: f64| (al, x.re, x.im);
    let (mut p, mut q) = ((x1, a[0]), (x2, a[1]));
    let (k1, k2) = (key(p.0, p.1), key(q.0, q.1));
    if k1.0.total_cmp(&k2.0).then(k1.1.total_cmp(&k2.1)).then(k1.2.total_cmp(&k2.2)) == Ordering::Greater {
        std::mem::swap(&mut p, &mut q);
    }
    check_sites(dom, fs)?;
    let (fs, rest) = canonical(fs, &a[2..]);
    let alpha: Vec<f64> = [p.1, q.1].into_iter().chain(rest).collect();
    coulomb_integral(dom, &[p.0, q.0], &fs, &alpha, false, budget, seed)
}

/// Both sides of the electrostatic bound
/// `−Σ_{j<k} α_jα_k C(x_j,x_k) ≤ (1/4π) Σ_j α_j² log(1/min_{k≠j}|x_k − x_j|) + c·n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OnsagerReport {
    pub lhs: f64,
    pub rhs: f64,
    pub margin: f64,
    pub constant_used: f64,
}

fn onsager(
    points: &[Point],
    system: &ChargeSystem,
    c: f64,
    mut cov: impl FnMut(Point, Point) -> Result<f64>,
) -> Result<OnsagerReport> {
    if points.len() != system.len() {
        return Err(Error::param(format!("{} points for {} charges", points.len(), system.len())));
    }
    let n = points.len();
    let alpha = system.alpha();
    let mut lhs = 0.0;
    let mut nearest = vec![f64::INFINITY; n];
    for j in 0..n {
        for k in j + 1..n {
            let d = (points[j] - points[k]).norm();
            if d == 0.0 {
                return Err(Error::CoincidentPoints(format!("{}", points[j])));
            }
            nearest[j] = nearest[j].min(d);
            nearest[k] = nearest[k].min(d);
            lhs -= alpha[j] * alpha[k] * cov(points[j], points[k])?;
        }
    }
    let rhs = nearest
        .iter()
        .zip(alpha)
        .filter(|(d, _)| d.is_finite())
        .map(|(d, a)| a * a * (1.0 / d).ln() / (4.0 * PI))
        .sum::<f64>()
        + c * n as f64;
    Ok(OnsagerReport {
        lhs,
        rhs,
        margin: rhs - lhs,
        constant_used: c,
    })
}

/// The bound with the Green's function itself.
pub fn onsager_check_limit(dom: &DiskDomain, points: &[Point], system: &ChargeSystem, c: f64) -> Result<OnsagerReport> {
    points.iter().try_for_each(|&x| check_point(dom, x))?;
    onsager(points, system, c, |x, y| Ok(dom.green_raw(x, y)))
}

/// The bound with the mollified covariance at scale `eps`.
pub fn onsager_check_mollified(
    dom: &DiskDomain,
    moll: &Mollifier,
    points: &[Point],
    system: &ChargeSystem,
    eps: f64,
    c: f64,
) -> Result<OnsagerReport> {
    onsager(points, system, c, |x, y| moll.cov(dom, x, y, eps, eps))
}

/// One row of a moment-growth probe.
#[derive(Debug, Clone, Serialize)]
pub struct GrowthRow {
    pub n: usize,
    /// `E|W|^{2n}` for `W = :e^{iαφ}:(f)`.
    pub moment: McEstimate,
    /// `(E|W|^{2n})^{1/2}`.
    pub root: f64,
    /// `root^{1/n} / n^{α²/8π}`.
    pub c_n: f64,
}

/// `E|:e^{iαφ}:(f)|^{2n}` for `n = 1, …, n_max` as neutral `2n`-charge moments.
pub fn moment_growth_probe(
    dom: &DiskDomain,
    f: &Bump,
    alpha: f64,
    n_max: usize,
    budget: u64,
    seed: u64,
) -> Result<Vec<GrowthRow>> {
    if n_max == 0 || n_max > GROWTH_MAX_N {
        return Err(Error::param(format!("n_max must lie in 1..={GROWTH_MAX_N}, got {n_max}")));
    }
    (1..=n_max)
        .map(|n| {
            let system = ChargeSystem::new([alpha, -alpha].into_iter().cycle().take(2 * n).collect())?;
            let moment = if alpha == 0.0 {
                f.check_inside(dom)?;
                McEstimate::exact_real(f.integral().powi(2 * n as i32))
            } else {
                ic_moment(dom, &vec![*f; 2 * n], &system, budget, mc::derive_seed(seed, &[n as u64]))?
            };
            let root = moment.value.re.max(0.0).sqrt();
            let c_n = root.powf(1.0 / n as f64) / (n as f64).powf(alpha * alpha / (8.0 * PI));
            Ok(GrowthRow { n, moment, root, c_n })
        })
        .collect()
}
