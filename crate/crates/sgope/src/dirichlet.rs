//! Simplex (Dirichlet) integrals and the ball-constrained power integrals
//! `∫_{U(R)} ∏_{j≤l} |u_j|^{−a/2π} ∏_{k>l} |u_k|^{−a/4π}` over
//! `U(R) = {u ∈ B(0, 2R)^{l+m} : Σ|u_j|² < (2R)²}`.
//!
//! In polar coordinates with `t_j = |u_j|²/(2R)²` the region becomes the
//! standard simplex, and each factor `|u|^{−e}` contributes
//! `π(2R)^{2−e} t^{−e/2}`, so
//!
//! ```text
//! ∫_{U(R)} = ∏_j π(2R)^{2−e_j} · ∏_j Γ(1 − e_j/2) / Γ(1 + Σ_j (1 − e_j/2)).
//! ```

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use serde::Serialize;
use statrs::function::gamma::{gamma, ln_gamma};

use crate::mc::{self, McEstimate};
use crate::{Error, Result};

/// `∫_𝒰 ∏ t_j^{a_j − 1} dt = ∏Γ(a_j) / Γ(1 + Σa_j)` over
/// `𝒰 = {t ∈ (0,1)^N : Σt_j ≤ 1}`.
pub fn simplex_moment(exponents: &[f64]) -> Result<f64> {
    if exponents.is_empty() {
        return Err(Error::param("simplex moment needs at least one exponent"));
    }
    if let Some(a) = exponents.iter().find(|&&a| !(a > 0.0 && a.is_finite())) {
        return Err(Error::param(format!("simplex exponents must be positive, got {a}")));
    }
    let total: f64 = exponents.iter().sum();
    if exponents.iter().all(|&a| a.fract() == 0.0) && total <= 20.0 {
        // (a−1)! products stay exact in f64 here
        let fact = |k: f64| (1..=k as u64).map(|i| i as f64).product::<f64>();
        return Ok(exponents.iter().map(|&a| fact(a - 1.0)).product::<f64>() / fact(total));
    }
    if exponents.iter().all(|&a| a < 100.0) && total < 100.0 {
        Ok(exponents.iter().map(|&a| gamma(a)).product::<f64>() / gamma(1.0 + total))
    } else {
        Ok((exponents.iter().map(|&a| ln_gamma(a)).sum::<f64>() - ln_gamma(1.0 + total)).exp())
    }
}

/// `l` factors `|u|^{−a/2π}`, `m` factors `|u|^{−a/4π}`, on `U(R)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExponentProfile {
    pub l: usize,
    pub m: usize,
    pub a: f64,
    pub r: f64,
}

impl ExponentProfile {
    pub fn new(l: usize, m: usize, a: f64, r: f64) -> Result<Self> {
        if l + m == 0 {
            return Err(Error::param("profile needs l + m ≥ 1"));
        }
        if !(a > 0.0 && a < 4.0 * PI) {
            return Err(Error::param(format!("a must lie in (0, 4π), got {a}")));
        }
        if !(r > 0.0 && r.is_finite()) {
            return Err(Error::param(format!("R must be positive, got {r}")));
        }
        Ok(ExponentProfile { l, m, a, r })
    }

    /// Singularity exponents `e_j`, strong factors first.
    pub fn exponents(&self) -> Vec<f64> {
        let strong = self.a / (2.0 * PI);
        let weak = self.a / (4.0 * PI);
        std::iter::repeat_n(strong, self.l)
            .chain(std::iter::repeat_n(weak, self.m))
            .collect()
    }

    fn factor(&self, e: f64) -> f64 {
        PI * (2.0 * self.r).powf(2.0 - e)
    }

    /// The exact value of the integral.
    pub fn exact(&self) -> f64 {
        let e = self.exponents();
        let pre: f64 = e.iter().map(|&e| self.factor(e)).product();
        let simplex = simplex_moment(&e.iter().map(|&e| 1.0 - e / 2.0).collect::<Vec<_>>())
            .expect("exponents below 2 give positive simplex exponents");
        pre * simplex
    }

    /// `1 / Γ(1 + (l+m)(1 − a/8π) − l·a/8π)`, the profile-dependent part of the bound.
    pub fn gamma_denominator(&self) -> f64 {
        let n = (self.l + self.m) as f64;
        let s = 1.0 + n * (1.0 - self.a / (8.0 * PI)) - self.l as f64 * self.a / (8.0 * PI);
        (-ln_gamma(s)).exp()
    }

    /// `C^{l+m} / Γ(…)`.
    pub fn bound(&self, c: f64) -> f64 {
        c.powi((self.l + self.m) as i32) * self.gamma_denominator()
    }
}

/// A constant `C_{a,R}` for which the bound holds for every `(l, m)`: the
/// largest per-factor constant `π(2R)^{2−e}Γ(1 − e/2)`, with a 5% margin.
pub fn certified_constant(a: f64, r: f64) -> f64 {
    [a / (2.0 * PI), a / (4.0 * PI)]
        .iter()
        .map(|&e| PI * (2.0 * r).powf(2.0 - e) * gamma(1.0 - e / 2.0))
        .fold(0.0, f64::max)
        * 1.05
}

/// Monte Carlo estimate of the `U(R)` integral: independent radial draws with
/// density `∝ r^{1−e_j}` on `[0, 2R]`, accepted when `Σ r_j² < (2R)²`.
pub fn u_region_integral(profile: &ExponentProfile, budget: u64, seed: u64) -> Result<McEstimate> {
    let e = profile.exponents();
    let two_r = 2.0 * profile.r;
    let norm: f64 = e.iter().map(|&e| 2.0 * PI * two_r.powf(2.0 - e) / (2.0 - e)).product();
    let inv: Vec<f64> = e.iter().map(|&e| 1.0 / (2.0 - e)).collect();
    let limit = two_r * two_r;
    let [hit] = mc::run(budget, seed, |rng| {
        let mut s = 0.0;
        for &p in &inv {
            let u: f64 = rng.random();
            let r = two_r * u.powf(p);
            s += r * r;
        }
        [Complex64::new(if s < limit { norm } else { 0.0 }, 0.0)]
    })?;
    Ok(hit)
}

/// One row of a bound check.
#[derive(Debug, Clone, Serialize)]
pub struct BoundCheck {
    pub profile: ExponentProfile,
    pub value: f64,
    pub bound: f64,
    pub satisfied: bool,
}

/// Checks the bound with [`certified_constant`] for all `1 ≤ l + m ≤ max_total`
/// and each `a` in `alphas`, using the exact integral.
pub fn bound_grid(alphas: &[f64], r: f64, max_total: usize) -> Result<Vec<BoundCheck>> {
    let mut out = Vec::new();
    for &a in alphas {
        let c = certified_constant(a, r);
        for total in 1..=max_total {
            for l in 0..=total {
                let p = ExponentProfile::new(l, total - l, a, r)?;
                let value = p.exact();
                let bound = p.bound(c);
                out.push(BoundCheck {
                    profile: p,
                    value,
                    bound,
                    satisfied: value <= bound,
                });
            }
        }
    }
    Ok(out)
}
