//! Short-distance behaviour of the derivative correlators.
//!
//! The subtracted combinations
//!
//! ```text
//! ∂∂:  ⟨∂φ(x)∂φ(y)O⟩ + (1/4π)(x−y)⁻²⟨O⟩ − μ(β/16π)((x̄−ȳ)/(x−y)) ψ(y)⟨:cos(√βφ(y)):O⟩
//! ∂̄∂̄:  the complex conjugate structure
//! ∂∂̄:  ⟨∂φ(x)∂̄φ(y)O⟩ + μ(β/8π) log|x−y|⁻¹ ψ(y)⟨:cos(√βφ(y)):O⟩
//! ```
//!
//! (all expectations normalised by `Z`) have finite limits as `x → y`.
//! Everything is assembled from μ-independent [`Moments`], with one set of
//! Monte Carlo runs per radius shared by the three kinds, both conjugates
//! and every coupling. The seeds of the runs do not depend on `x`, so the
//! values along a scan use common random numbers.
//!
//! Because the series for the numerator is truncated at order `N`, the
//! `μ`-proportional counterterms use the `cos` series truncated at `N − 1`;
//! this makes the subtraction exact order by order.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::green::{DerivKind, DiskDomain};
use crate::mc::McEstimate;
use crate::quad::{self, PolarOrder};
use crate::series::{self, Moments, PairKind, PairParts, SgModel};
use crate::{Error, Point, Result};

/// Default first radius of a scan.
pub const SCAN_R0: f64 = 0.2;
/// Default number of halvings of a scan.
pub const SCAN_J_MAX: usize = 5;
/// Half-width of reported intervals in standard errors.
pub const CI_SIGMAS: f64 = 3.0;

/// `lim_{x→y}` of the subtracted Gaussian combination (`μ = 0`).
pub fn gff_ope_limit(model: &SgModel, kind: PairKind, y: Point) -> Result<Complex64> {
    let dom = &model.params().domain;
    if !dom.contains(y) {
        return Err(Error::OutsideDomain(format!("{y}")));
    }
    let o = model.observable_mean();
    let (dk, bx, by) = match kind {
        PairKind::DD => (DerivKind::DxDy, false, false),
        PairKind::DbarDbar => (DerivKind::DxBarDyBar, true, true),
        PairKind::DDbar => (DerivKind::DxDyBar, false, true),
    };
    Ok(o * (dom.harmonic_deriv_raw(y, y, dk) - model.v_f(y, bx) * model.v_f(y, by)))
}

fn check_annulus(a: Complex64, delta: f64) -> Result<()> {
    if !(a.norm() > 0.0 && a.norm() < delta && delta.is_finite()) {
        return Err(Error::param(format!("need 0 < |a| < δ, got |a| = {}, δ = {delta}", a.norm())));
    }
    Ok(())
}

/// `∫_{B(0,δ)} d²u / ((u − a) u)` by quadrature resolving both poles.
pub fn singular_integral_pair(a: Complex64, delta: f64) -> Result<Complex64> {
    check_annulus(a, delta)?;
    let zero = Point::new(0.0, 0.0);
    Ok(quad::polar_partition(&[a, zero], zero, delta, PolarOrder::new(96, 24, 14), |u| {
        1.0 / ((u - a) * u)
    }))
}

/// `∫_{|a|<|u|<δ} d²u / |u|²` on geometrically graded radial panels.
pub fn singular_integral_log(a: Complex64, delta: f64) -> Result<f64> {
    check_annulus(a, delta)?;
    let (lo, hi) = (a.norm(), delta);
    let panels = ((hi / lo).log2().ceil() as usize).max(1);
    let ratio = (hi / lo).powf(1.0 / panels as f64);
    let angular = 16;
    let mut total = 0.0;
    for k in 0..panels {
        let (r0, r1) = (lo * ratio.powi(k as i32), lo * ratio.powi(k as i32 + 1));
        total += quad::gl(r0, r1, 16, |r| {
            (0..angular)
                .map(|j| {
                    let u = Point::from_polar(r, 2.0 * PI * (j as f64 + 0.5) / angular as f64);
                    r / u.norm_sqr()
                })
                .sum::<f64>()
                * (2.0 * PI / angular as f64)
        });
    }
    Ok(total)
}

/// The basis `(x−y)⁻², (x̄−ȳ)/(x−y), log|x−y|⁻¹, 1`, conjugated for `∂̄∂̄`.
pub fn singular_basis(kind: PairKind, d: Complex64) -> [Complex64; 4] {
    let b = [
        1.0 / (d * d),
        d.conj() / d,
        Complex64::new(-d.norm().ln(), 0.0),
        Complex64::new(1.0, 0.0),
    ];
    match kind {
        PairKind::DbarDbar => b.map(|z| z.conj()),
        _ => b,
    }
}

/// The μ-independent ingredients at a base point `y`: the series for `Z`,
/// `Z(O)` and `⟨:cos(√βφ(y)): O⟩`.
#[derive(Debug, Clone)]
pub struct OpeContext {
    pub y: Point,
    pub z: Moments,
    pub zo: Moments,
    pub cos: Moments,
    budget: u64,
    seed: u64,
}

impl OpeContext {
    /// Runs the Monte Carlo for `model`'s truncation order. The coefficients
    /// serve every nonzero `μ`; at `μ = 0` only the exact zeroth order is kept.
    pub fn new(model: &SgModel, y: Point, budget: u64, seed: u64) -> Result<Self> {
        let dom = &model.params().domain;
        if !dom.contains(y) {
            return Err(Error::OutsideDomain(format!("{y}")));
        }
        Ok(OpeContext {
            y,
            z: series::partition_moments(model, budget, seed)?,
            zo: series::observable_moments(model, budget, seed)?,
            cos: series::cos_moments(model, y, budget, seed)?,
            budget,
            seed,
        })
    }

    /// The pair runs at `x`, sharing this context's seed.
    pub fn pair(&self, model: &SgModel, x: Point) -> Result<PairParts> {
        series::deriv_pair_parts(model, x, self.y, self.budget, self.seed)
    }

    /// Subtraction terms of `kind` at separation `d = x − y`, as a series.
    fn counterterms(&self, model: &SgModel, kind: PairKind, d: Complex64) -> Moments {
        let p = model.params();
        let psi_y = p.psi.eval(self.y);
        let order = self.z.coeffs.len().saturating_sub(1);
        let cos = self.cos.truncated(order.saturating_sub(1)).times_mu();
        let b = singular_basis(kind, d);
        let beta = p.beta;
        match kind {
            PairKind::DD | PairKind::DbarDbar => Moments::linear(&[
                (&self.zo, b[0] / (4.0 * PI)),
                (&cos, -b[1] * (beta / (16.0 * PI) * psi_y)),
            ]),
            PairKind::DDbar => Moments::linear(&[(&cos, b[2] * (beta / (8.0 * PI) * psi_y))]),
        }
    }

    /// `⟨X O⟩_sG` without subtractions.
    pub fn raw(&self, model: &SgModel, kind: PairKind, parts: &PairParts) -> Result<McEstimate> {
        let num = parts.moments(kind, &self.zo).at(model)?;
        Ok(McEstimate::ratio(&num.partial_sum, &self.z.at(model)?.partial_sum))
    }

    /// The subtracted combination.
    pub fn combination(&self, model: &SgModel, kind: PairKind, parts: &PairParts) -> Result<McEstimate> {
        let ct = self.counterterms(model, kind, parts.x - parts.y);
        let num = Moments::linear(&[(&parts.moments(kind, &self.zo), Complex64::new(1.0, 0.0)), (&ct, Complex64::new(1.0, 0.0))]);
        Ok(McEstimate::ratio(&num.at(model)?.partial_sum, &self.z.at(model)?.partial_sum))
    }

    /// Correlator-side coefficients of `(x−y)⁻²`, `(x̄−ȳ)/(x−y)` and
    /// `log|x−y|⁻¹` implied by the counterterms (conjugate basis for `∂̄∂̄`).
    pub fn predicted(&self, model: &SgModel, kind: PairKind) -> Result<[McEstimate; 3]> {
        let z = self.z.at(model)?.partial_sum;
        let p = model.params();
        let psi_y = p.psi.eval(self.y);
        let order = self.z.coeffs.len().saturating_sub(1);
        let cos = self.cos.truncated(order.saturating_sub(1)).times_mu().at(model)?.partial_sum;
        let o = McEstimate::ratio(&self.zo.at(model)?.partial_sum, &z);
        let c = McEstimate::ratio(&cos, &z);
        let zero = McEstimate::exact_real(0.0);
        let re = |x: f64| Complex64::new(x, 0.0);
        Ok(match kind {
            PairKind::DD | PairKind::DbarDbar => {
                [o.scale(re(-1.0 / (4.0 * PI))), c.scale(re(p.beta / (16.0 * PI) * psi_y)), zero]
            }
            PairKind::DDbar => [zero.clone(), zero, c.scale(re(-p.beta / (8.0 * PI) * psi_y))],
        })
    }
}

/// `x = y + r·e^{iθ}` with `r = r₀ 2^{−j}`, `j = 0, …, j_max`.
pub fn scan_points(dom: &DiskDomain, y: Point, theta: f64, r0: f64, j_max: usize) -> Result<Vec<(f64, Point)>> {
    if !(r0 > 0.0) {
        return Err(Error::param("scan radius must be positive"));
    }
    let dir = Complex64::from_polar(1.0, theta);
    (0..=j_max)
        .map(|j| {
            let r = r0 * 0.5f64.powi(j as i32);
            let x = y + dir * r;
            if dom.contains(x) {
                Ok((r, x))
            } else {
                Err(Error::OutsideDomain(format!("scan point {x} (r = {r})")))
            }
        })
        .collect()
}

/// Values along one direction.
#[derive(Debug, Clone, Serialize)]
pub struct OpeScan {
    pub kind: PairKind,
    pub mu: f64,
    pub y: Point,
    pub theta: f64,
    pub radii: Vec<f64>,
    /// Subtracted combinations.
    pub values: Vec<McEstimate>,
    /// Normalised correlators without subtractions.
    pub raw: Vec<McEstimate>,
}

impl OpeScan {
    /// The scan restricted to radii `r ≤ r_max`.
    pub fn within(&self, r_max: f64) -> OpeScan {
        let keep: Vec<usize> = (0..self.radii.len()).filter(|&j| self.radii[j] <= r_max).collect();
        OpeScan {
            radii: keep.iter().map(|&j| self.radii[j]).collect(),
            values: keep.iter().map(|&j| self.values[j].clone()).collect(),
            raw: keep.iter().map(|&j| self.raw[j].clone()).collect(),
            ..self.clone()
        }
    }

    /// `|v_{j+1} − v_j|` with the standard error of each difference.
    pub fn increments(&self) -> Vec<(f64, f64)> {
        self.values
            .windows(2)
            .map(|w| {
                let d = w[1].sub(&w[0]);
                (d.value.norm(), d.stderr)
            })
            .collect()
    }
}

/// Scans for every kind, coupling and direction from one set of runs per
/// radius and direction.
#[allow(clippy::too_many_arguments)]
pub fn ope_scans(
    model: &SgModel,
    mus: &[f64],
    y: Point,
    thetas: &[f64],
    r0: f64,
    j_max: usize,
    budget: u64,
    seed: u64,
) -> Result<Vec<OpeScan>> {
    let dom = model.params().domain;
    let model = &model.with_mu(mus.iter().copied().find(|&m| m != 0.0).unwrap_or(0.0));
    let ctx = OpeContext::new(model, y, budget, seed)?;
    let models: Vec<SgModel> = mus.iter().map(|&mu| model.with_mu(mu)).collect();
    let mut out = Vec::new();
    for &theta in thetas {
        let pts = scan_points(&dom, y, theta, r0, j_max)?;
        let parts: Vec<PairParts> = pts.iter().map(|&(_, x)| ctx.pair(model, x)).collect::<Result<_>>()?;
        for m in &models {
            for kind in PairKind::ALL {
                let mut values = Vec::with_capacity(parts.len());
                let mut raw = Vec::with_capacity(parts.len());
                for p in &parts {
                    values.push(ctx.combination(m, kind, p)?);
                    raw.push(ctx.raw(m, kind, p)?);
                }
                out.push(OpeScan {
                    kind,
                    mu: m.params().mu,
                    y,
                    theta,
                    radii: pts.iter().map(|&(r, _)| r).collect(),
                    values,
                    raw,
                });
            }
        }
    }
    Ok(out)
}

/// A single scan.
#[allow(clippy::too_many_arguments)]
pub fn ope_scan(
    model: &SgModel,
    kind: PairKind,
    y: Point,
    theta: f64,
    r0: f64,
    j_max: usize,
    budget: u64,
    seed: u64,
) -> Result<OpeScan> {
    let mut scans = ope_scans(model, &[model.params().mu], y, &[theta], r0, j_max, budget, seed)?;
    let i = scans.iter().position(|s| s.kind == kind).expect("every kind is scanned");
    Ok(scans.swap_remove(i))
}

/// The subtracted combination at one pair of points.
pub fn ope_combination(model: &SgModel, kind: PairKind, x: Point, y: Point, budget: u64, seed: u64) -> Result<McEstimate> {
    let ctx = OpeContext::new(model, y, budget, seed)?;
    let parts = ctx.pair(model, x)?;
    ctx.combination(model, kind, &parts)
}

/// Regular terms fitted alongside the singular basis and then discarded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RegularTerms {
    /// Only the constant of the basis.
    Constant,
    /// Also `x−y`, `x̄−ȳ`, `(x−y)²`, `(x̄−ȳ)²`, `|x−y|²` and `|x−y|² log|x−y|⁻¹`.
    Quadratic,
    /// Quadratic terms plus `|x−y|` times `1`, `(x̄−ȳ)/(x−y)` and
    /// `(x−y)/(x̄−ȳ)`. At `β = 2π` the order-`μ²` terms carry corrections of
    /// this size, and leaving them out biases the phase coefficient by a few
    /// percent.
    Extended,
}

impl RegularTerms {
    fn extend(self, d: Complex64, out: &mut Vec<Complex64>) {
        if self == RegularTerms::Constant {
            return;
        }
        let n2 = d.norm_sqr();
        out.extend([
            d,
            d.conj(),
            d * d,
            d.conj() * d.conj(),
            Complex64::new(n2, 0.0),
            Complex64::new(-n2 * d.norm().ln(), 0.0),
        ]);
        if self == RegularTerms::Extended {
            let r = d.norm();
            out.extend([Complex64::new(r, 0.0), r * d.conj() / d, r * d / d.conj()]);
        }
    }

    fn count(self) -> usize {
        match self {
            RegularTerms::Constant => 0,
            RegularTerms::Quadratic => 6,
            RegularTerms::Extended => 9,
        }
    }
}

/// Weighted least-squares coefficients over [`singular_basis`].
#[derive(Debug, Clone, Serialize)]
pub struct SingularFit {
    pub kind: PairKind,
    pub coefficients: Vec<McEstimate>,
    /// Standard errors from the fit residuals, added in quadrature to the
    /// Monte Carlo errors in [`Self::ci`].
    pub misfit_stderr: Vec<f64>,
    pub ci: Vec<f64>,
    pub residual_norm: f64,
    pub points: usize,
}

impl SingularFit {
    /// Compares coefficient `k` with a prediction computed from the same
    /// runs, returning `(difference, tolerance)`.
    pub fn compare(&self, k: usize, predicted: &McEstimate) -> (f64, f64) {
        let d = self.coefficients[k].sub(predicted);
        let tol = CI_SIGMAS * d.stderr.hypot(self.misfit_stderr[k]);
        (d.value.norm(), tol)
    }
}

/// Fits the unsubtracted values of `scans` (one kind, at least three radii
/// and two directions) to the singular basis.
pub fn fit_singular(scans: &[OpeScan], regular: RegularTerms) -> Result<SingularFit> {
    let kind = scans.first().ok_or_else(|| Error::param("no scans to fit"))?.kind;
    if scans.iter().any(|s| s.kind != kind || s.mu != scans[0].mu || s.y != scans[0].y) {
        return Err(Error::param("scans must share kind, coupling and base point"));
    }
    if scans.iter().any(|s| s.radii.len() < 3) {
        return Err(Error::param("each scan needs at least three radii"));
    }
    if scans.len() < 2 {
        return Err(Error::param("need at least two directions"));
    }
    let mut data: Vec<&McEstimate> = Vec::new();
    let mut design: Vec<Vec<Complex64>> = Vec::new();
    for s in scans {
        for (r, v) in s.radii.iter().zip(&s.raw) {
            let d = Complex64::from_polar(*r, s.theta);
            let mut row = singular_basis(kind, d).to_vec();
            regular.extend(d, &mut row);
            data.push(v);
            design.push(row);
        }
    }
    let cols = 2 * (4 + regular.count());
    let rows = 2 * data.len();
    if rows < cols {
        return Err(Error::RankDeficient(format!("{} points for {} unknowns", data.len(), cols / 2)));
    }
    let weight = |se: f64| if se > 0.0 && se.is_finite() { 1.0 / se } else { 1.0 };
    let w: Vec<f64> = data.iter().flat_map(|v| [weight(v.stderr_re()), weight(v.stderr_im())]).collect();
    let a = DMatrix::from_fn(rows, cols, |i, j| {
        let b = design[i / 2][j / 2];
        let v = match (i % 2, j % 2) {
            (0, 0) => b.re,
            (0, _) => -b.im,
            (_, 0) => b.im,
            _ => b.re,
        };
        v * w[i]
    });
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    if svd.singular_values.iter().any(|&s| s <= 1e-10 * smax) {
        return Err(Error::RankDeficient(format!(
            "{} points over {} directions do not separate the basis",
            data.len(),
            scans.len()
        )));
    }
    let pinv = svd.pseudo_inverse(0.0).map_err(Error::param)?;
    let solve = |v: &[Complex64]| -> DVector<f64> {
        let rhs = DVector::from_fn(rows, |i, _| {
            let z = v[i / 2];
            w[i] * if i % 2 == 0 { z.re } else { z.im }
        });
        &pinv * rhs
    };
    let coefficients: Vec<McEstimate> = (0..4)
        .map(|k| {
            McEstimate::combine(&data, |v| {
                let c = solve(v);
                Complex64::new(c[2 * k], c[2 * k + 1])
            })
        })
        .collect();
    let values: Vec<Complex64> = data.iter().map(|v| v.value).collect();
    let c = solve(&values);
    let rhs = DVector::from_fn(rows, |i, _| {
        let z = values[i / 2];
        w[i] * if i % 2 == 0 { z.re } else { z.im }
    });
    let resid = &a * &c - rhs;
    let dof = (rows - cols).max(1) as f64;
    let s2 = resid.norm_squared() / dof;
    let cov = &pinv * pinv.transpose() * s2;
    let misfit_stderr: Vec<f64> = (0..4).map(|k| (cov[(2 * k, 2 * k)] + cov[(2 * k + 1, 2 * k + 1)]).sqrt()).collect();
    let ci = coefficients
        .iter()
        .zip(&misfit_stderr)
        .map(|(c, m)| CI_SIGMAS * c.stderr.hypot(*m))
        .collect();
    Ok(SingularFit {
        kind,
        coefficients,
        misfit_stderr,
        ci,
        residual_norm: resid.norm(),
        points: data.len(),
    })
}
