//! Sine-Gordon correlation functions as power series in `μ`.
//!
//! With `O = e^{iφ(f)}` and `W = :e^{i√βφ}:(ψ)`, expanding `e^{μ Re W}` gives
//!
//! ```text
//! ⟨X O e^{μ Re W}⟩ = Σ_n μⁿ/(2ⁿ n!) Σ_σ ⟨X O ∏_j :e^{iσ_j√βφ}:(ψ)⟩,
//! ```
//!
//! and each Gaussian expectation is `⟨O⟩` times a Coulomb-gas integral over
//! `u ∈ Ω^n` with one-point weights
//! `ψ_j(u) = ψ(u) e^{−(β/2)g(u,u)} e^{−√βσ_j F(u)}`, `F(u) = ∫ f(v) G(v, u) dv`.
//! The integral only depends on `σ` through the number `k` of plus signs, so
//! the `2ⁿ` sign vectors collapse to `n + 1` integrals weighted by `C(n, k)`.
//!
//! Everything that does not depend on `μ` is kept as [`Moments`], the
//! coefficients `a_n` of `Σ μⁿ a_n`, so one set of Monte Carlo runs serves
//! every coupling.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::coulomb::{self, Anchor, Proposal};
use crate::green::{Bump, DerivKind, DiskDomain, Mollifier};
use crate::mc::{self, McEstimate};
use crate::quad::{self, Chebyshev};
use crate::{Error, Point, Result};

/// Largest truncation order accepted.
pub const SERIES_MAX_N: usize = 10;

/// Radial proposal exponent about the points carrying `∂G(x, u)` factors.
pub const DERIV_GAMMA: f64 = 1.5;

/// Truncation target when the order is chosen automatically.
pub const AUTO_TAIL: f64 = 1e-4;

/// Model and observable parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SgParams {
    pub domain: DiskDomain,
    pub beta: f64,
    pub mu: f64,
    /// Interaction cutoff.
    pub psi: Bump,
    /// Test function of the spectator `O = e^{iφ(f)}`.
    pub f: Bump,
    /// Series truncation order; chosen from the tail bound when absent.
    pub trunc: Option<usize>,
    /// Growth constant for the tail bound; estimated when absent.
    pub c_cert: Option<f64>,
    /// Largest acceptable tail bound relative to `max(1, |a_0|)`.
    pub tail_tol: f64,
}

impl SgParams {
    pub fn new(beta: f64, mu: f64, psi: Bump, f: Bump) -> Self {
        SgParams {
            domain: DiskDomain::unit(),
            beta,
            mu,
            psi,
            f,
            trunc: None,
            c_cert: None,
            tail_tol: 1e-2,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0 && self.beta < 4.0 * PI) {
            return Err(Error::param(format!("β must lie in (0, 4π), got {}", self.beta)));
        }
        if !self.mu.is_finite() {
            return Err(Error::param("μ must be finite"));
        }
        if let Some(n) = self.trunc {
            if n > SERIES_MAX_N {
                return Err(Error::param(format!("truncation {n} exceeds {SERIES_MAX_N}")));
            }
        }
        if !(self.tail_tol > 0.0) {
            return Err(Error::param("tail tolerance must be positive"));
        }
        self.psi.check_inside(&self.domain)?;
        self.f.check_inside(&self.domain)
    }
}

/// `F(u) = ∫ f(v) G(v, u) dv` for a bump `f` of mass `M` centred at `c`.
///
/// The log part is `M/2π` times the radial potential of the normalised bump
/// (Newton's theorem) and, `g(·, u)` being harmonic, the mean value property
/// turns the rest into `M·g(c, u)`.
#[derive(Debug, Clone)]
struct Convolution {
    mass: f64,
    center: Point,
    radius: f64,
    potential: Chebyshev,
    // (mass fraction within t) / t²
    enclosed: Chebyshev,
    self_pairing: f64,
}

impl Convolution {
    const NODES: usize = 64;

    fn new(dom: &DiskDomain, f: &Bump) -> Result<Self> {
        let m = Mollifier::new(f.radius)?;
        let r = f.radius;
        let enclosed = |t: f64| 2.0 * PI * quad::gl(0.0, t, 48, |s| m.density(s) * s) / (t * t);
        let mass = f.integral();
        Ok(Convolution {
            mass,
            center: f.center,
            radius: r,
            potential: Chebyshev::fit(0.0, r, Self::NODES, |t| m.potential(t)),
            enclosed: Chebyshev::fit(0.0, r, Self::NODES, enclosed),
            self_pairing: mass * mass * (m.c_rho() + dom.harmonic_raw(f.center, f.center)),
        })
    }

    fn value(&self, dom: &DiskDomain, u: Point) -> f64 {
        let t = (u - self.center).norm();
        let pot = if t >= self.radius { -t.ln() } else { self.potential.eval(t) };
        self.mass * (pot / (2.0 * PI) + dom.harmonic_raw(self.center, u))
    }

    /// `∂F(u)`.
    fn wirtinger(&self, dom: &DiskDomain, u: Point) -> Complex64 {
        let d = u - self.center;
        let t = d.norm();
        let q = if t >= self.radius { 1.0 / (t * t) } else { self.enclosed.eval(t) };
        (-d.conj() * (q / (4.0 * PI)) + dom.harmonic_deriv_raw(u, self.center, DerivKind::Dx)) * self.mass
    }
}

/// A validated model with its `f`-dependent precomputations, growth
/// constant and truncation order.
#[derive(Debug, Clone)]
pub struct SgModel {
    params: SgParams,
    conv: Option<Convolution>,
    c_cert: f64,
    trunc: usize,
}

impl SgModel {
    pub fn new(params: SgParams) -> Result<Self> {
        params.validate()?;
        let dom = params.domain;
        let conv = if params.f.amplitude == 0.0 {
            None
        } else {
            Some(Convolution::new(&dom, &params.f)?)
        };
        let c_cert = match params.c_cert {
            Some(c) if c > 0.0 && c.is_finite() => c,
            Some(c) => return Err(Error::param(format!("growth constant must be positive, got {c}"))),
            None => certify_constant(&dom, &params.psi, params.beta, 20_000, 0x5eed)?,
        };
        let trunc = match params.trunc {
            Some(n) => n,
            None => (0..=SERIES_MAX_N)
                .find(|&n| truncation_bound(params.mu, params.beta, c_cert, n + 1).is_ok_and(|b| b < AUTO_TAIL))
                .ok_or(Error::TailBound {
                    bound: truncation_bound(params.mu, params.beta, c_cert, SERIES_MAX_N + 1)?,
                    tol: AUTO_TAIL,
                    order: SERIES_MAX_N,
                })?,
        };
        Ok(SgModel {
            params,
            conv,
            c_cert,
            trunc,
        })
    }

    pub fn params(&self) -> &SgParams {
        &self.params
    }

    pub fn trunc(&self) -> usize {
        self.trunc
    }

    pub fn certified_c(&self) -> f64 {
        self.c_cert
    }

    /// The same model at another coupling, keeping the truncation order.
    pub fn with_mu(&self, mu: f64) -> SgModel {
        let mut out = self.clone();
        out.params.mu = mu;
        out
    }

    fn order(&self) -> usize {
        if self.params.mu == 0.0 || self.params.psi.amplitude == 0.0 {
            0
        } else {
            self.trunc
        }
    }

    /// `∫ f(v) G(v, u) dv`.
    pub fn f_convolution(&self, u: Point) -> f64 {
        self.conv.as_ref().map_or(0.0, |c| c.value(&self.params.domain, u))
    }

    /// `V_f(x) = ∫ f(v) ∂_x G(v, x) dv`, or its `∂̄` version.
    pub fn v_f(&self, x: Point, bar: bool) -> Complex64 {
        let v = self
            .conv
            .as_ref()
            .map_or(Complex64::new(0.0, 0.0), |c| c.wirtinger(&self.params.domain, x));
        if bar {
            v.conj()
        } else {
            v
        }
    }

    /// `⟨O⟩ = e^{−½ ∬ f G f}`.
    pub fn observable_mean(&self) -> f64 {
        self.conv.as_ref().map_or(1.0, |c| (-0.5 * c.self_pairing).exp())
    }

    /// Leading sign for the `σ` enumeration. Following the sign of `f` makes
    /// `f → −f` map every sample to its `σ → −σ` image.
    fn lead(&self) -> i8 {
        if self.params.f.amplitude < 0.0 {
            -1
        } else {
            1
        }
    }

    fn weight(&self, u: Point, sigma: i8, with_f: bool) -> f64 {
        let p = self.params.psi.eval(u);
        if p == 0.0 {
            return 0.0;
        }
        let b = self.params.beta;
        let mut e = -0.5 * b * self.params.domain.harmonic_raw(u, u);
        if with_f {
            e -= b.sqrt() * f64::from(sigma) * self.f_convolution(u);
        }
        p * e.exp()
    }
}

/// `ψ(u) e^{−(β/2)g(u,u)} e^{−√βσ ∫ f(v)G(v,u) dv}`.
pub fn psi_weight(model: &SgModel, u: Point, sigma: i8) -> Result<f64> {
    if !model.params.domain.contains(u) {
        return Err(Error::OutsideDomain(format!("{u}")));
    }
    if sigma.abs() != 1 {
        return Err(Error::param("sign must be ±1"));
    }
    Ok(model.weight(u, sigma, true))
}

/// `V(x; u) = V_f(x) + √β Σ_j σ_j ∂_x G(x, u_j)` (all `∂̄` when `bar`).
pub fn v_kernel(model: &SgModel, x: Point, us: &[Point], sigmas: &[i8], bar: bool) -> Result<Complex64> {
    if us.len() != sigmas.len() {
        return Err(Error::param("one sign per charge position"));
    }
    if let Some(u) = us.iter().find(|&&u| u == x) {
        return Err(Error::CoincidentPoints(format!("{u}")));
    }
    Ok(v_raw(model, model.v_f(x, bar), x, us, sigmas, bar))
}

fn v_raw(model: &SgModel, vf: Complex64, x: Point, us: &[Point], sigmas: &[i8], bar: bool) -> Complex64 {
    let kind = if bar { DerivKind::DxBar } else { DerivKind::Dx };
    let dom = &model.params.domain;
    let s: Complex64 = us
        .iter()
        .zip(sigmas)
        .map(|(&u, &sg)| dom.green_deriv_raw(x, u, kind) * f64::from(sg))
        .sum();
    vf + s * model.params.beta.sqrt()
}

/// `Σ_{n ≥ n_from} (|μ|c)ⁿ n^{βn/8π} / n!`.
pub fn truncation_bound(mu: f64, beta: f64, c: f64, n_from: usize) -> Result<f64> {
    if !(c > 0.0) {
        return Err(Error::param("growth constant must be positive"));
    }
    if !(beta > 0.0 && beta < 8.0 * PI) {
        return Err(Error::param(format!("the bound diverges for β = {beta}")));
    }
    let x = mu.abs() * c;
    if x == 0.0 {
        return Ok(if n_from == 0 { 1.0 } else { 0.0 });
    }
    let log_term = |n: usize| {
        let nf = n as f64;
        let growth = if n == 0 { 0.0 } else { beta * nf / (8.0 * PI) * nf.ln() };
        nf * x.ln() + growth - statrs::function::gamma::ln_gamma(nf + 1.0)
    };
    let mut total = 0.0;
    let mut prev = f64::NEG_INFINITY;
    for n in n_from..n_from + 1_000_000 {
        let l = log_term(n);
        total += l.exp();
        if l < prev && l.exp() < 1e-16 * total.max(1e-300) {
            return Ok(total);
        }
        prev = l;
    }
    Err(Error::TailBound {
        bound: total,
        tol: 0.0,
        order: n_from,
    })
}

/// An upper estimate of `C` in `(E|W|^{2n})^{1/2} ≤ Cⁿ n^{βn/8π}`, `n ≤ 4`,
/// from the moment-growth probe with three standard errors and a 25% margin.
pub fn certify_constant(dom: &DiskDomain, psi: &Bump, beta: f64, budget: u64, seed: u64) -> Result<f64> {
    if psi.amplitude == 0.0 {
        return Ok(f64::MIN_POSITIVE);
    }
    let rows = coulomb::moment_growth_probe(dom, psi, beta.sqrt(), coulomb::GROWTH_MAX_N, budget, seed)?;
    let c = rows
        .iter()
        .map(|r| {
            let upper = (r.moment.value.re + 3.0 * r.moment.stderr).max(0.0).sqrt();
            upper.powf(1.0 / r.n as f64) / (r.n as f64).powf(beta / (8.0 * PI))
        })
        .fold(0.0, f64::max);
    Ok(1.25 * c)
}

/// Truncated series `Σ_{n ≤ N} μⁿ a_n` with a bound on the omitted tail.
#[derive(Debug, Clone, Serialize)]
pub struct SeriesResult {
    pub terms: Vec<McEstimate>,
    pub partial_sum: McEstimate,
    pub tail_bound: f64,
}

impl SeriesResult {
    /// `num / den`, term sums combined batchwise.
    pub fn ratio(num: &SeriesResult, den: &SeriesResult) -> McEstimate {
        McEstimate::ratio(&num.partial_sum, &den.partial_sum)
    }
}

/// Coefficients `a_0, …, a_N` of a series in `μ`.
#[derive(Debug, Clone, Serialize)]
pub struct Moments {
    pub coeffs: Vec<McEstimate>,
}

impl Moments {
    /// `Σ_i c_i · parts_i`, coefficient by coefficient.
    pub fn linear(parts: &[(&Moments, Complex64)]) -> Moments {
        let len = parts.iter().map(|(m, _)| m.coeffs.len()).max().unwrap_or(0);
        let zero = McEstimate::exact_real(0.0);
        let coeffs = (0..len)
            .map(|n| {
                let terms: Vec<McEstimate> = parts
                    .iter()
                    .map(|(m, c)| m.coeffs.get(n).unwrap_or(&zero).scale(*c))
                    .collect();
                McEstimate::sum(&terms)
            })
            .collect();
        Moments { coeffs }
    }

    /// Keeps `a_0, …, a_order`.
    pub fn truncated(&self, order: usize) -> Moments {
        Moments {
            coeffs: self.coeffs.iter().take(order + 1).cloned().collect(),
        }
    }

    /// The coefficients of `μ · Σ μⁿ a_n`.
    pub fn times_mu(&self) -> Moments {
        let mut coeffs = vec![McEstimate::exact_real(0.0)];
        coeffs.extend(self.coeffs.iter().cloned());
        Moments { coeffs }
    }

    /// The truncated series at `model`'s coupling. The tail bound is the
    /// partition-function bound scaled by `max(1, |a_0|)`; the unscaled bound
    /// must stay within the model's tolerance.
    pub fn at(&self, model: &SgModel) -> Result<SeriesResult> {
        let p = &model.params;
        let terms: Vec<McEstimate> = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(n, a)| a.scale(Complex64::new(p.mu.powi(n as i32), 0.0)))
            .collect();
        let scale = self.coeffs.first().map_or(1.0, |a| a.value.norm().max(1.0));
        let order = self.coeffs.len().saturating_sub(1);
        let exact = p.mu == 0.0 || p.psi.amplitude == 0.0;
        let relative = if exact {
            0.0
        } else {
            truncation_bound(p.mu, p.beta, model.c_cert, order + 1)?
        };
        if relative > p.tail_tol {
            return Err(Error::TailBound {
                bound: relative,
                tol: p.tail_tol,
                order,
            });
        }
        Ok(SeriesResult {
            partial_sum: McEstimate::sum(&terms),
            terms,
            tail_bound: scale * relative,
        })
    }
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|i| i as f64).product()
}

/// Runs the order-by-order Coulomb-gas integrals. `extra(u, σ)` multiplies
/// the Boltzmann weight; at order `n` the signs are `k` copies of `lead`
/// followed by `n − k` of `−lead`, and the run for `(n, k)` uses a seed
/// derived from `(tag, n, k)` only.
#[allow(clippy::too_many_arguments)]
fn order_moments<const K: usize, F>(
    model: &SgModel,
    anchors: &[Anchor],
    lead: i8,
    with_f: bool,
    prefactor: f64,
    zeroth: [Complex64; K],
    budget: u64,
    seed: u64,
    tag: u64,
    extra: F,
) -> Result<[Moments; K]>
where
    F: Fn(&[Point], &[i8]) -> [Complex64; K] + Sync,
{
    let p = &model.params;
    let dom = p.domain;
    let beta = p.beta;
    let mut out: [Vec<McEstimate>; K] = std::array::from_fn(|k| vec![McEstimate::exact(zeroth[k] * prefactor)]);
    for n in 1..=model.order() {
        let sites = vec![(p.psi.center, p.psi.radius); n];
        let proposal = Proposal::new(sites, anchors.to_vec(), beta / (2.0 * PI))?;
        let mut acc: [Vec<McEstimate>; K] = std::array::from_fn(|_| Vec::new());
        for k in 0..=n {
            let sigma: Vec<i8> = (0..n).map(|j| if j < k { lead } else { -lead }).collect();
            let est = coulomb::importance_integral(&proposal, budget, mc::derive_seed(seed, &[tag, n as u64, k as u64]), |u| {
                let mut w = 1.0;
                for (&x, &s) in u.iter().zip(&sigma) {
                    w *= model.weight(x, s, with_f);
                    if w == 0.0 {
                        return [Complex64::new(0.0, 0.0); K];
                    }
                }
                let mut e = 0.0;
                for a in 0..n {
                    for b in a + 1..n {
                        if u[a] == u[b] {
                            return [Complex64::new(0.0, 0.0); K];
                        }
                        e -= beta * f64::from(sigma[a] * sigma[b]) * dom.green_raw(u[a], u[b]);
                    }
                }
                w *= e.exp();
                extra(u, &sigma).map(|v| v * w)
            })?;
            let c = Complex64::new(binomial(n, k) * prefactor / (2f64.powi(n as i32) * factorial(n)), 0.0);
            for (slot, e) in acc.iter_mut().zip(est) {
                slot.push(e.scale(c));
            }
        }
        for (o, a) in out.iter_mut().zip(acc) {
            o.push(McEstimate::sum(&a));
        }
    }
    Ok(out.map(|coeffs| Moments { coeffs }))
}

const TAG_Z: u64 = 1;
const TAG_ZO: u64 = 2;
const TAG_VERTEX: u64 = 3;
const TAG_PAIR: u64 = 4;

/// Coefficients of `Z = ⟨e^{μ Re W}⟩`.
pub fn partition_moments(model: &SgModel, budget: u64, seed: u64) -> Result<Moments> {
    let one = [Complex64::new(1.0, 0.0)];
    let [m] = order_moments(model, &[], 1, false, 1.0, one, budget, seed, TAG_Z, |_, _| one)?;
    Ok(m)
}

/// Coefficients of `Z_μ(O) = ⟨O e^{μ Re W}⟩`.
pub fn observable_moments(model: &SgModel, budget: u64, seed: u64) -> Result<Moments> {
    if model.conv.is_none() {
        return partition_moments(model, budget, seed);
    }
    let one = [Complex64::new(1.0, 0.0)];
    let [m] = order_moments(model, &[], model.lead(), true, model.observable_mean(), one, budget, seed, TAG_ZO, |_, _| one)?;
    Ok(m)
}

pub fn partition_function(model: &SgModel, budget: u64, seed: u64) -> Result<SeriesResult> {
    partition_moments(model, budget, seed)?.at(model)
}

pub fn z_mu_observable(model: &SgModel, budget: u64, seed: u64) -> Result<SeriesResult> {
    observable_moments(model, budget, seed)?.at(model)
}

/// Which pair of derivatives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PairKind {
    /// `∂φ(x) ∂φ(y)`
    DD,
    /// `∂̄φ(x) ∂̄φ(y)`
    DbarDbar,
    /// `∂φ(x) ∂̄φ(y)`
    DDbar,
}

impl PairKind {
    pub const ALL: [PairKind; 3] = [PairKind::DD, PairKind::DbarDbar, PairKind::DDbar];

    fn index(self) -> usize {
        self as usize
    }

    fn green_kind(self) -> DerivKind {
        match self {
            PairKind::DD => DerivKind::DxDy,
            PairKind::DbarDbar => DerivKind::DxBarDyBar,
            PairKind::DDbar => DerivKind::DxDyBar,
        }
    }
}

/// The `μ`-independent pieces of the derivative kernels at `(x, y)`:
/// `⟨X O ∏⟩ = ∂∂G(x,y)·[Z_μ(O) coefficients] − [V(x;u)V(y;u) coefficients]`.
#[derive(Debug, Clone, Serialize)]
pub struct PairParts {
    pub x: Point,
    pub y: Point,
    /// `∂_x∂_y G`, `∂̄_x∂̄_y G`, `∂_x∂̄_y G`.
    pub ddg: [Complex64; 3],
    pub vv: [Moments; 3],
}

impl PairParts {
    /// Kernel coefficients given the `Z_μ(O)` coefficients `m`.
    pub fn moments(&self, kind: PairKind, m: &Moments) -> Moments {
        let i = kind.index();
        Moments::linear(&[(m, self.ddg[i]), (&self.vv[i], Complex64::new(-1.0, 0.0))])
    }
}

fn check_pair(dom: &DiskDomain, x: Point, y: Point) -> Result<()> {
    for p in [x, y] {
        if !dom.contains(p) {
            return Err(Error::OutsideDomain(format!("{p}")));
        }
    }
    if x == y {
        return Err(Error::CoincidentPoints(format!("{x}")));
    }
    Ok(())
}

/// The `V V` coefficients for all three kinds from one set of runs.
pub fn deriv_pair_parts(model: &SgModel, x: Point, y: Point, budget: u64, seed: u64) -> Result<PairParts> {
    let dom = model.params.domain;
    check_pair(&dom, x, y)?;
    let (fx, fy) = (model.v_f(x, false), model.v_f(y, false));
    let products = |vx: Complex64, vy: Complex64| [vx * vy, (vx * vy).conj(), vx * vy.conj()];
    let anchors = [
        Anchor {
            point: x,
            gamma: DERIV_GAMMA,
        },
        Anchor {
            point: y,
            gamma: DERIV_GAMMA,
        },
    ];
    let vv = order_moments(
        model,
        &anchors,
        model.lead(),
        true,
        model.observable_mean(),
        products(fx, fy),
        budget,
        seed,
        TAG_PAIR,
        |u, s| products(v_raw(model, fx, x, u, s, false), v_raw(model, fy, y, u, s, false)),
    )?;
    Ok(PairParts {
        x,
        y,
        ddg: PairKind::ALL.map(|k| dom.green_deriv_raw(x, y, k.green_kind())),
        vv,
    })
}

/// `⟨∂φ(x)∂φ(y) O e^{μ Re W}⟩` and its `∂̄` variants.
pub fn deriv_pair_kernel(
    model: &SgModel,
    x: Point,
    y: Point,
    kind: PairKind,
    budget: u64,
    seed: u64,
) -> Result<SeriesResult> {
    let parts = deriv_pair_parts(model, x, y, budget, seed)?;
    let m = observable_moments(model, budget, seed)?;
    parts.moments(kind, &m).at(model)
}

/// Coefficients of `⟨:e^{±i√βφ(x)}: O e^{μ Re W}⟩`; `sign` is `±1`.
pub fn vertex_moments(model: &SgModel, x: Point, sign: i8, budget: u64, seed: u64) -> Result<Moments> {
    let p = &model.params;
    let dom = p.domain;
    if !dom.contains(x) {
        return Err(Error::OutsideDomain(format!("{x}")));
    }
    if sign.abs() != 1 {
        return Err(Error::param("vertex sign must be ±1"));
    }
    let b = p.beta;
    let s = f64::from(sign);
    let prefactor =
        model.observable_mean() * (-0.5 * b * dom.harmonic_raw(x, x) - s * b.sqrt() * model.f_convolution(x)).exp();
    let anchors = [Anchor {
        point: x,
        gamma: b / (2.0 * PI),
    }];
    let one = [Complex64::new(1.0, 0.0)];
    let [m] = order_moments(model, &anchors, sign, true, prefactor, one, budget, seed, TAG_VERTEX, |u, sg| {
        let mut e = 0.0;
        for (&uj, &sj) in u.iter().zip(sg) {
            if uj == x {
                return [Complex64::new(0.0, 0.0)];
            }
            e -= s * b * f64::from(sj) * dom.green_raw(x, uj);
        }
        [Complex64::new(e.exp(), 0.0)]
    })?;
    Ok(m)
}

pub fn vertex_kernel(model: &SgModel, x: Point, sign: i8, budget: u64, seed: u64) -> Result<SeriesResult> {
    vertex_moments(model, x, sign, budget, seed)?.at(model)
}

/// Coefficients of `⟨:cos(√βφ(y)): O e^{μ Re W}⟩`.
pub fn cos_moments(model: &SgModel, y: Point, budget: u64, seed: u64) -> Result<Moments> {
    let plus = vertex_moments(model, y, 1, budget, seed)?;
    let minus = vertex_moments(model, y, -1, budget, seed)?;
    let half = Complex64::new(0.5, 0.0);
    Ok(Moments::linear(&[(&plus, half), (&minus, half)]))
}

pub fn cos_correlator(model: &SgModel, y: Point, budget: u64, seed: u64) -> Result<SeriesResult> {
    cos_moments(model, y, budget, seed)?.at(model)
}
