//! The disk Green's function, bump test functions and mollified covariances.
//!
//! On the unit disk
//!
//! ```text
//! G(x, y) = (1/2π) log|x − y|⁻¹ + g(x, y),    g(x, y) = (1/2π) log|1 − x·ȳ|,
//! ```
//!
//! and a disk of radius `R` about `c` is handled by rescaling to the unit
//! disk. Convolving the field with `ρ_ε(·) = ε⁻²ρ(·/ε)` gives the covariance
//! [`Mollifier::cov`], which equals `G` once the two mollification disks are
//! well separated, and otherwise splits into a radial log part (evaluated by
//! quadrature and cached per scale pair) plus `g(x, y)`, the latter exact by
//! the mean value property.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::quad::{self, PolarOrder};
use crate::{Error, Point, Result};

const INV_2PI: f64 = 1.0 / (2.0 * PI);
const INV_4PI: f64 = 1.0 / (4.0 * PI);

/// A disk domain; the unit disk is canonical.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiskDomain {
    pub center: Point,
    pub radius: f64,
}

/// Which Wirtinger derivative of `G(x, y)` to take.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DerivKind {
    /// `∂_x`
    Dx,
    /// `∂̄_x`
    DxBar,
    /// `∂_x ∂_y`
    DxDy,
    /// `∂_x ∂̄_y`
    DxDyBar,
    /// `∂̄_x ∂_y`
    DxBarDy,
    /// `∂̄_x ∂̄_y`
    DxBarDyBar,
}

impl Default for DiskDomain {
    fn default() -> Self {
        DiskDomain::unit()
    }
}

impl DiskDomain {
    pub fn unit() -> Self {
        DiskDomain {
            center: Point::new(0.0, 0.0),
            radius: 1.0,
        }
    }

    pub fn new(center: Point, radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) || !center.re.is_finite() || !center.im.is_finite() {
            return Err(Error::param(format!("disk radius must be positive, got {radius}")));
        }
        Ok(DiskDomain { center, radius })
    }

    #[inline]
    fn scaled(&self, x: Point) -> Point {
        (x - self.center) / self.radius
    }

    /// Distance from `x` to the boundary (negative outside).
    pub fn boundary_distance(&self, x: Point) -> f64 {
        self.radius - (x - self.center).norm()
    }

    pub fn contains(&self, x: Point) -> bool {
        self.boundary_distance(x) > 0.0
    }

    fn check(&self, x: Point) -> Result<()> {
        if x.re.is_finite() && x.im.is_finite() && self.contains(x) {
            Ok(())
        } else {
            Err(Error::OutsideDomain(format!("{x}")))
        }
    }

    /// `G(x, y)` without argument checks.
    #[inline]
    pub fn green_raw(&self, x: Point, y: Point) -> f64 {
        let (xs, ys) = (self.scaled(x), self.scaled(y));
        INV_2PI * ((Complex64::new(1.0, 0.0) - xs * ys.conj()).norm() / (xs - ys).norm()).ln()
    }

    /// `g(x, y)` without argument checks.
    #[inline]
    pub fn harmonic_raw(&self, x: Point, y: Point) -> f64 {
        let (xs, ys) = (self.scaled(x), self.scaled(y));
        INV_2PI * (self.radius.ln() + (Complex64::new(1.0, 0.0) - xs * ys.conj()).norm().ln())
    }

    /// The Dirichlet Green's function.
    pub fn green(&self, x: Point, y: Point) -> Result<f64> {
        self.check(x)?;
        self.check(y)?;
        if x == y {
            return Err(Error::CoincidentPoints(format!("{x}")));
        }
        Ok(self.green_raw(x, y))
    }

    /// The harmonic part `g = G − (1/2π) log|x − y|⁻¹`, defined on the diagonal too.
    pub fn harmonic_part(&self, x: Point, y: Point) -> Result<f64> {
        self.check(x)?;
        self.check(y)?;
        Ok(self.harmonic_raw(x, y))
    }

    /// Contribution of `g` to the requested derivative (valid on the diagonal).
    #[inline]
    pub fn harmonic_deriv_raw(&self, x: Point, y: Point, kind: DerivKind) -> Complex64 {
        let (xs, ys) = (self.scaled(x), self.scaled(y));
        let one = Complex64::new(1.0, 0.0);
        let r = self.radius;
        match kind {
            DerivKind::Dx => -ys.conj() / (one - xs * ys.conj()) * (INV_4PI / r),
            DerivKind::DxBar => (-ys.conj() / (one - xs * ys.conj()) * (INV_4PI / r)).conj(),
            DerivKind::DxDy | DerivKind::DxBarDyBar => Complex64::new(0.0, 0.0),
            DerivKind::DxDyBar => {
                let w = one - xs * ys.conj();
                -(w * w).inv() * (INV_4PI / (r * r))
            }
            DerivKind::DxBarDy => {
                let w = one - xs * ys.conj();
                (-(w * w).inv() * (INV_4PI / (r * r))).conj()
            }
        }
    }

    /// Derivative of `G` without argument checks.
    #[inline]
    pub fn green_deriv_raw(&self, x: Point, y: Point, kind: DerivKind) -> Complex64 {
        let d = x - y;
        let log_part = match kind {
            DerivKind::Dx => -d.inv() * INV_4PI,
            DerivKind::DxBar => -d.conj().inv() * INV_4PI,
            DerivKind::DxDy => -(d * d).inv() * INV_4PI,
            DerivKind::DxBarDyBar => -(d * d).conj().inv() * INV_4PI,
            DerivKind::DxDyBar | DerivKind::DxBarDy => Complex64::new(0.0, 0.0),
        };
        log_part + self.harmonic_deriv_raw(x, y, kind)
    }

    /// Closed-form Wirtinger derivative of `G(x, y)` for `x ≠ y`.
    pub fn green_deriv(&self, x: Point, y: Point, kind: DerivKind) -> Result<Complex64> {
        self.check(x)?;
        self.check(y)?;
        if x == y {
            return Err(Error::CoincidentPoints(format!("{x}")));
        }
        Ok(self.green_deriv_raw(x, y, kind))
    }

    /// `∬ a(x) b(y) G(x, y) dx dy`, with the log singularity handled in polar
    /// coordinates about each outer node.
    pub fn smeared_green(&self, a: &Bump, b: &Bump) -> Result<f64> {
        a.check_inside(self)?;
        b.check_inside(self)?;
        quad::refine(1e-9, 3, |k| {
            let s = 1usize << k;
            let inner = PolarOrder::new(32, 8, 6).refined(k);
            quad::disk(a.center, a.radius, 24 * s, 12 * s, |x| {
                let ax = a.eval(x);
                if ax == 0.0 {
                    return 0.0;
                }
                ax * quad::polar_about(x, b.center, b.radius, inner, |y| b.eval(y) * self.green_raw(x, y))
            })
        })
    }
}

/// `A·exp(−1/(1 − t²))` with `t = |x − center| / radius`, zero outside the support.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bump {
    pub center: Point,
    pub radius: f64,
    pub amplitude: f64,
}

/// `∫_{B(0,1)} exp(−1/(1 − |x|²)) dx`.
pub fn bump_mass() -> f64 {
    static MASS: OnceLock<f64> = OnceLock::new();
    // π ∫_0^1 exp(−1/w) dw after w = 1 − |x|²
    *MASS.get_or_init(|| PI * quad::gl(0.0, 1.0, 96, |w: f64| if w > 0.0 { (-1.0 / w).exp() } else { 0.0 }))
}

impl Bump {
    pub fn new(center: Point, radius: f64, amplitude: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::param(format!("bump radius must be positive, got {radius}")));
        }
        if !amplitude.is_finite() || !center.re.is_finite() || !center.im.is_finite() {
            return Err(Error::param("bump centre and amplitude must be finite"));
        }
        Ok(Bump {
            center,
            radius,
            amplitude,
        })
    }

    /// Support strictly inside the domain.
    pub fn check_inside(&self, dom: &DiskDomain) -> Result<()> {
        if dom.boundary_distance(self.center) > self.radius {
            Ok(())
        } else {
            Err(Error::OutsideDomain(format!(
                "support of bump at {} with radius {}",
                self.center, self.radius
            )))
        }
    }

    #[inline]
    pub fn eval(&self, x: Point) -> f64 {
        let s = (x - self.center).norm_sqr() / (self.radius * self.radius);
        if s < 1.0 {
            self.amplitude * (-1.0 / (1.0 - s)).exp()
        } else {
            0.0
        }
    }

    /// The Wirtinger derivative `∂f`.
    pub fn wirtinger(&self, x: Point) -> Complex64 {
        let r2 = self.radius * self.radius;
        let d = x - self.center;
        let s = d.norm_sqr() / r2;
        if s < 1.0 {
            let w = 1.0 - s;
            d.conj() * (-self.amplitude * (-1.0 / w).exp() / (w * w * r2))
        } else {
            Complex64::new(0.0, 0.0)
        }
    }

    /// `∫ f`.
    pub fn integral(&self) -> f64 {
        self.amplitude * self.radius * self.radius * bump_mass()
    }

    pub fn scaled(&self, lambda: f64) -> Bump {
        Bump {
            amplitude: self.amplitude * lambda,
            ..*self
        }
    }

    /// Integrates `h` against the bump over its support (smooth `h`).
    pub fn integrate<T: quad::Integrand>(&self, angular: usize, radial: usize, mut h: impl FnMut(Point) -> T) -> T {
        quad::disk(self.center, self.radius, angular, radial, |x| h(x) * self.eval(x))
    }
}

/// Radially symmetric unit-mass mollifier `ρ(a) ∝ exp(−1/(1 − |a|²/r²))`
/// supported on `B(0, r)`, together with its cached constant
/// `c_ρ = (1/2π) ∬ ρ(a)ρ(b) log|a − b|⁻¹` and cached covariance tables.
#[derive(Debug)]
pub struct Mollifier {
    radius: f64,
    c_rho: OnceLock<f64>,
    tables: Mutex<HashMap<(u64, u64), Arc<LogTable>>>,
}

impl Mollifier {
    pub fn new(radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::param(format!("mollifier radius must be positive, got {radius}")));
        }
        Ok(Mollifier {
            radius,
            c_rho: OnceLock::new(),
            tables: Mutex::new(HashMap::new()),
        })
    }

    /// The standard mollifier supported on the unit disk.
    pub fn standard() -> &'static Mollifier {
        static STD: OnceLock<Mollifier> = OnceLock::new();
        STD.get_or_init(|| Mollifier::new(1.0).expect("unit radius is valid"))
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    /// Density at distance `t` from the origin.
    #[inline]
    pub fn density(&self, t: f64) -> f64 {
        let s = t * t / (self.radius * self.radius);
        if s < 1.0 {
            (-1.0 / (1.0 - s)).exp() / (self.radius * self.radius * bump_mass())
        } else {
            0.0
        }
    }

    /// Log potential `∫ ρ(b) log|w − b|⁻¹ db` at `|w| = t`, by Newton's
    /// theorem for radial measures.
    pub fn potential(&self, t: f64) -> f64 {
        let r = self.radius;
        if t >= r {
            return -t.ln();
        }
        let inner = if t > 0.0 {
            -t.ln() * quad::gl(0.0, t, 48, |u| self.density(u) * u)
        } else {
            0.0
        };
        let outer = quad::graded(t, r, 32, if t > 0.0 { 2 } else { 10 }, |u| -self.density(u) * u * u.ln());
        2.0 * PI * (inner + outer)
    }

    /// `c_ρ`, computed once from the radial potential.
    pub fn c_rho(&self) -> f64 {
        *self.c_rho.get_or_init(|| {
            let r = self.radius;
            // split where the density changes fastest, near the edge of the support
            let f = |s: f64| self.density(s) * s * self.potential(s);
            quad::gl(0.0, 0.5 * r, 48, f) + quad::gl(0.5 * r, 0.85 * r, 48, f) + quad::gl(0.85 * r, r, 48, f)
        })
    }

    /// `c_ρ` by direct two-dimensional quadrature of the defining double
    /// integral (an independent scheme, used to cross-check [`Self::c_rho`]).
    pub fn c_rho_direct(&self, order: PolarOrder) -> f64 {
        let r = self.radius;
        let o = Point::new(0.0, 0.0);
        INV_2PI
            * quad::disk(o, r, order.angular, 2 * order.radial, |a| {
                let ra = self.density(a.norm());
                if ra == 0.0 {
                    return 0.0;
                }
                ra * quad::polar_about(a, o, r, order, |b| -self.density(b.norm()) * (a - b).norm().ln())
            })
    }

    /// The log part `(1/2π) ∬ ρ_ε(a) ρ_δ(b) log|d + a − b|⁻¹` at `|d| = s`,
    /// by direct quadrature: the potential of the wider of the two densities
    /// is integrated against the narrower one in polar coordinates. Both
    /// factors are smooth, so plain product rules converge quickly.
    pub fn log_part_quadrature(&self, s: f64, eps: f64, delta: f64) -> f64 {
        let (narrow, wide) = if eps <= delta { (eps, delta) } else { (delta, eps) };
        let r = narrow * self.radius;
        // U_w(t) = log w⁻¹ + U_1(t/w)
        let u_wide = |t: f64| -wide.ln() + self.potential(t / wide);
        let n_ang = 96;
        let dth = 2.0 * PI / n_ang as f64;
        let dirs: Vec<Complex64> = (0..n_ang)
            .map(|k| Complex64::from_polar(1.0, (k as f64 + 0.5) * dth))
            .collect();
        let ring = |rho: f64| {
            let w = self.density(rho / narrow) / (narrow * narrow);
            if w == 0.0 {
                return 0.0;
            }
            let sum: f64 = dirs.iter().map(|e| u_wide((e * rho + s).norm())).sum();
            w * rho * sum * dth
        };
        let acc = quad::gl(0.0, 0.5 * r, 32, ring) + quad::gl(0.5 * r, 0.85 * r, 32, ring) + quad::gl(0.85 * r, r, 32, ring);
        INV_2PI * acc
    }

    fn table(&self, eps: f64, delta: f64) -> Arc<LogTable> {
        let (a, b) = if eps <= delta { (eps, delta) } else { (delta, eps) };
        let key = (a.to_bits(), b.to_bits());
        if let Some(t) = self.tables.lock().unwrap_or_else(|e| e.into_inner()).get(&key) {
            return t.clone();
        }
        let t = Arc::new(LogTable::build(self, a, b));
        self.tables
            .lock()
            .unwrap_or_else(|e| e.into_inner())
            .entry(key)
            .or_insert(t)
            .clone()
    }

    /// Covariance `E[φ_ε(x) φ_δ(y)]` of the mollified field.
    pub fn cov(&self, dom: &DiskDomain, x: Point, y: Point, eps: f64, delta: f64) -> Result<f64> {
        if !(eps > 0.0 && delta > 0.0) {
            return Err(Error::param("mollification scales must be positive"));
        }
        let (re, rd) = (eps * self.radius, delta * self.radius);
        if dom.boundary_distance(x) <= re || dom.boundary_distance(y) <= rd {
            return Err(Error::OutsideDomain(format!(
                "mollification disk around {x} or {y} leaves the domain"
            )));
        }
        Ok(self.cov_raw(dom, x, y, eps, delta))
    }

    /// [`Self::cov`] without domain checks.
    pub fn cov_raw(&self, dom: &DiskDomain, x: Point, y: Point, eps: f64, delta: f64) -> f64 {
        let s = (x - y).norm();
        if eps.max(delta) < s / 3.0 {
            return dom.green_raw(x, y);
        }
        if x == y && eps == delta {
            return INV_2PI * (1.0 / eps).ln() + self.c_rho() + dom.harmonic_raw(x, x);
        }
        self.table(eps, delta).eval(s) + dom.harmonic_raw(x, y)
    }
}

/// Chebyshev interpolant of the mollified log part in `s ∈ [0, ε + δ]`;
/// beyond that range the log part is exactly `(1/2π) log s⁻¹`.
#[derive(Debug)]
struct LogTable {
    hi: f64,
    cheb: quad::Chebyshev,
}

impl LogTable {
    const NODES: usize = 40;

    fn build(m: &Mollifier, eps: f64, delta: f64) -> Self {
        let hi = (eps + delta) * m.radius;
        LogTable {
            hi,
            cheb: quad::Chebyshev::fit(0.0, hi, Self::NODES, |s| m.log_part_quadrature(s, eps, delta)),
        }
    }

    fn eval(&self, s: f64) -> f64 {
        if s >= self.hi {
            -INV_2PI * s.ln()
        } else {
            self.cheb.eval(s)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pt(re: f64, im: f64) -> Point {
        Point::new(re, im)
    }

    #[test]
    fn green_at_origin_and_half() {
        let d = DiskDomain::unit();
        let v = d.green(pt(0.0, 0.0), pt(0.5, 0.0)).unwrap();
        assert!((v - 2f64.ln() / (2.0 * PI)).abs() < 1e-15);
        assert!((v - 0.110318).abs() < 1e-6);
    }

    #[test]
    fn green_vanishes_at_boundary() {
        let d = DiskDomain::unit();
        let y = pt(0.2, -0.3);
        for k in 1..8 {
            let r = 1.0 - 10f64.powi(-k);
            let v = d.green(Point::from_polar(r, 0.7), y).unwrap();
            assert!(v.abs() < 10.0 * 10f64.powi(-k), "{k}: {v}");
        }
    }

    #[test]
    fn green_errors() {
        let d = DiskDomain::unit();
        assert!(matches!(d.green(pt(0.1, 0.0), pt(0.1, 0.0)), Err(Error::CoincidentPoints(_))));
        assert!(matches!(d.green(pt(1.1, 0.0), pt(0.1, 0.0)), Err(Error::OutsideDomain(_))));
    }

    #[test]
    fn harmonic_part_on_diagonal() {
        let d = DiskDomain::unit();
        assert_eq!(d.harmonic_part(pt(0.0, 0.0), pt(0.0, 0.0)).unwrap(), 0.0);
        let x = Point::from_polar(0.6, 1.1);
        let want = (1.0 - 0.36f64).ln() / (2.0 * PI);
        assert!((d.harmonic_part(x, x).unwrap() - want).abs() < 1e-15);
        // limit of G minus the log term as y → x
        let y = x + pt(1e-7, 0.0);
        let lim = d.green(x, y).unwrap() - (1.0 / 1e-7f64).ln() / (2.0 * PI);
        assert!((lim - want).abs() < 1e-6);
    }

    #[test]
    fn scaled_disk_matches_unit_disk_by_rescaling() {
        let big = DiskDomain::new(pt(1.0, 2.0), 3.0).unwrap();
        let u = DiskDomain::unit();
        let (x, y) = (pt(0.2, 0.1), pt(-0.4, 0.3));
        let gx = big.green(pt(1.0, 2.0) + x * 3.0, pt(1.0, 2.0) + y * 3.0).unwrap();
        assert!((gx - u.green(x, y).unwrap()).abs() < 1e-14);
        let dd = big.green_deriv(pt(1.0, 2.0) + x * 3.0, pt(1.0, 2.0) + y * 3.0, DerivKind::DxDyBar).unwrap();
        let du = u.green_deriv(x, y, DerivKind::DxDyBar).unwrap();
        assert!((dd * 9.0 - du).norm() < 1e-14);
    }

    // central finite differences of G in Wirtinger form
    fn fd_dx(f: &dyn Fn(Point) -> f64, x: Point, h: f64) -> Complex64 {
        let d1 = (f(x + pt(h, 0.0)) - f(x - pt(h, 0.0))) / (2.0 * h);
        let d2 = (f(x + pt(0.0, h)) - f(x - pt(0.0, h))) / (2.0 * h);
        Complex64::new(d1, -d2) * 0.5
    }

    #[test]
    fn first_derivative_matches_finite_differences() {
        let d = DiskDomain::unit();
        let (x, y) = (pt(0.3, -0.2), pt(-0.1, 0.45));
        let fd = fd_dx(&|x| d.green_raw(x, y), x, 1e-5);
        let an = d.green_deriv(x, y, DerivKind::Dx).unwrap();
        assert!((fd - an).norm() < 1e-8, "{fd} {an}");
        let anb = d.green_deriv(x, y, DerivKind::DxBar).unwrap();
        assert!((fd.conj() - anb).norm() < 1e-8);
    }

    #[test]
    fn harmonic_mixed_derivatives_by_finite_differences() {
        let d = DiskDomain::unit();
        let cases = [(pt(0.0, 0.0), pt(0.0, 0.0)), (pt(0.3, 0.1), pt(-0.2, 0.4)), (pt(0.5, -0.5), pt(0.5, -0.5))];
        for (x, y) in cases {
            let h = 1e-4;
            // ∂_y applied to ∂_x g, both by central differences
            let dx_g = |yy: Point| {
                let f = |xx: Point| d.harmonic_raw(xx, yy);
                fd_dx(&f, x, h)
            };
            let dyre = (dx_g(y + pt(h, 0.0)) - dx_g(y - pt(h, 0.0))) / (2.0 * h);
            let dyim = (dx_g(y + pt(0.0, h)) - dx_g(y - pt(0.0, h))) / (2.0 * h);
            let dxdy = (dyre - Complex64::i() * dyim) * 0.5;
            let dxdybar = (dyre + Complex64::i() * dyim) * 0.5;
            assert!(dxdy.norm() < 1e-6, "{dxdy}");
            let want = d.harmonic_deriv_raw(x, y, DerivKind::DxDyBar);
            assert!((dxdybar - want).norm() < 1e-6, "{dxdybar} {want}");
        }
        let at0 = d.harmonic_deriv_raw(pt(0.0, 0.0), pt(0.0, 0.0), DerivKind::DxDyBar);
        assert!((at0 + Complex64::new(1.0 / (4.0 * PI), 0.0)).norm() < 1e-16);
    }

    #[test]
    fn dx_dy_near_diagonal_is_dominated_by_double_pole() {
        let d = DiskDomain::unit();
        let h = 1e-3;
        let v = d.green_deriv(pt(0.1 + h, 0.0), pt(0.1, 0.0), DerivKind::DxDy).unwrap();
        let want = -1.0 / (4.0 * PI * h * h);
        assert!(((v.re - want) / want).abs() < 1e-12 && v.im.abs() < 1e-9);
    }

    #[test]
    fn harmonic_laplacian_vanishes() {
        let d = DiskDomain::unit();
        let y = pt(0.35, -0.15);
        for x in [pt(0.1, 0.2), pt(-0.5, 0.3), pt(0.35, -0.15)] {
            let mut errs = vec![];
            for h in [1e-2, 5e-3] {
                let f = |p: Point| d.harmonic_raw(p, y);
                let lap = (f(x + pt(h, 0.0)) + f(x - pt(h, 0.0)) + f(x + pt(0.0, h)) + f(x - pt(0.0, h))
                    - 4.0 * f(x))
                    / (h * h);
                errs.push(lap.abs());
            }
            // O(h²): halving h reduces the error by about four
            assert!(errs[1] < 1e-3 && errs[1] <= errs[0] / 3.0 + 1e-9, "{errs:?}");
        }
    }

    #[test]
    fn bump_wirtinger_matches_finite_differences() {
        let b = Bump::new(pt(0.1, -0.2), 0.4, 1.7).unwrap();
        let x = pt(0.25, -0.1);
        let fd = fd_dx(&|p| b.eval(p), x, 1e-6);
        assert!((fd - b.wirtinger(x)).norm() < 1e-7);
        assert_eq!(b.eval(pt(0.6, 0.0)), 0.0);
        let q = b.integrate(64, 48, |_| 1.0);
        assert!((q - b.integral()).abs() < 1e-10);
    }

    #[test]
    fn bump_mass_closed_form() {
        // π (e⁻¹ − E₁(1)) with E₁(1) = 0.219383934395520...
        let want = PI * ((-1.0f64).exp() - 0.219_383_934_395_520_3);
        assert!((bump_mass() - want).abs() < 1e-12);
    }

    #[test]
    fn smeared_green_properties() {
        let d = DiskDomain::unit();
        let a = Bump::new(pt(0.0, 0.0), 0.3, 1.0).unwrap();
        let v = d.smeared_green(&a, &a).unwrap();
        assert!(v > 0.0);
        let b = Bump::new(pt(0.2, 0.1), 0.25, 0.7).unwrap();
        let v1 = d.smeared_green(&a.scaled(2.0), &b).unwrap();
        let v2 = d.smeared_green(&a, &b).unwrap();
        assert!((v1 - 2.0 * v2).abs() < 1e-12 * v1.abs());
    }

    #[test]
    fn smeared_green_far_supports_match_tensor_rule() {
        let d = DiskDomain::unit();
        let a = Bump::new(pt(-0.45, 0.0), 0.2, 1.0).unwrap();
        let b = Bump::new(pt(0.45, 0.1), 0.2, 1.3).unwrap();
        let v = d.smeared_green(&a, &b).unwrap();
        // product of polar Gauss rules about the two centres; the integrand
        // is smooth because the supports are far apart
        let oracle = a.integrate(64, 64, |x| b.integrate(64, 64, |y| d.green_raw(x, y)));
        assert!(((v - oracle) / oracle).abs() < 1e-8, "{v} {oracle}");
    }

    #[test]
    fn c_rho_two_schemes_agree() {
        let m = Mollifier::standard();
        let a = m.c_rho();
        let b = m.c_rho_direct(PolarOrder::new(64, 20, 8));
        assert!(a.is_finite() && (a - b).abs() < 1e-6, "{a} {b}");
    }

    #[test]
    fn c_rho_scales_with_support_radius() {
        let m1 = Mollifier::new(1.0).unwrap();
        let m2 = Mollifier::new(0.5).unwrap();
        let shift = m2.c_rho() - m1.c_rho();
        assert!((shift - 2f64.ln() / (2.0 * PI)).abs() < 1e-9, "{shift}");
    }

    #[test]
    fn potential_is_log_outside_and_continuous_inside() {
        let m = Mollifier::standard();
        assert_eq!(m.potential(1.5), -(1.5f64).ln());
        // inside but next to the edge the density is negligible
        let t = 0.999_999f64;
        assert!((m.potential(t) + t.ln()).abs() < 1e-12);
        // the potential at 0 by a separate 1-d rule
        let direct = 2.0 * PI * quad::graded(0.0, 1.0, 40, 14, |u| -m.density(u) * u * u.ln());
        assert!((m.potential(0.0) - direct).abs() < 1e-10);
    }

    #[test]
    fn cov_regime_one_is_exactly_green() {
        let d = DiskDomain::unit();
        let m = Mollifier::standard();
        let (x, y) = (pt(-0.25, 0.0), pt(0.25, 0.0));
        assert_eq!(m.cov(&d, x, y, 0.01, 0.01).unwrap().to_bits(), d.green(x, y).unwrap().to_bits());
    }

    #[test]
    fn cov_regime_two_at_origin() {
        let d = DiskDomain::unit();
        let m = Mollifier::standard();
        let o = pt(0.0, 0.0);
        let v = m.cov(&d, o, o, 1e-3, 1e-3).unwrap();
        assert!((v - ((1e3f64).ln() / (2.0 * PI) + m.c_rho())).abs() < 1e-14);
    }

    #[test]
    fn quadrature_fallback_matches_closed_forms_at_boundaries() {
        let m = Mollifier::standard();
        for eps in [0.25, 0.1, 0.01] {
            // regime two: s = 0, ε = δ
            let q = m.log_part_quadrature(0.0, eps, eps);
            let closed = (1.0 / eps).ln() / (2.0 * PI) + m.c_rho();
            assert!((q - closed).abs() < 1e-6, "eps={eps}: {q} {closed}");
            // regime one boundary: s = 3 max(ε, δ)
            for delta in [eps, eps / 2.0] {
                let s = 3.0 * eps.max(delta);
                let q = m.log_part_quadrature(s, eps, delta);
                assert!((q + s.ln() / (2.0 * PI)).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn table_matches_direct_quadrature() {
        let d = DiskDomain::unit();
        let m = Mollifier::standard();
        let (eps, delta) = (0.05, 0.02);
        for k in 0..15 {
            let s = 0.0753 * k as f64 / 14.0;
            let x = pt(0.1, 0.0);
            let y = x + pt(s, 0.0);
            let v = m.cov(&d, x, y, eps, delta).unwrap() - d.harmonic_raw(x, y);
            let q = m.log_part_quadrature(s, eps, delta);
            assert!((v - q).abs() < 1e-8, "s={s}: {v} {q}");
        }
    }

    #[test]
    fn near_regime_deviation_is_bounded() {
        let d = DiskDomain::unit();
        let m = Mollifier::standard();
        let mut worst: f64 = 0.0;
        for (i, &eps) in [0.1, 0.03, 0.01, 0.003].iter().enumerate() {
            for &ratio in &[1.0, 0.5, 0.25] {
                for k in 0..6 {
                    let delta = eps * ratio;
                    let s = 3.0 * eps * k as f64 / 5.0;
                    let x = Point::from_polar(0.3, i as f64);
                    let y = x + Point::from_polar(s, 0.4);
                    let v = m.cov(&d, x, y, eps, delta).unwrap();
                    worst = worst.max((v - (1.0 / eps.max(delta)).ln() / (2.0 * PI)).abs());
                }
            }
        }
        assert!(worst < 0.5, "{worst}");
    }

    proptest! {
        #[test]
        fn green_is_symmetric_and_decomposes(r1 in 0.0..0.99f64, t1 in 0.0..6.3f64, r2 in 0.0..0.99f64, t2 in 0.0..6.3f64) {
            let d = DiskDomain::unit();
            let (x, y) = (Point::from_polar(r1, t1), Point::from_polar(r2, t2));
            prop_assume!((x - y).norm() > 1e-9);
            let g = d.green(x, y).unwrap();
            prop_assert!((g - d.green(y, x).unwrap()).abs() <= 1e-14 * g.abs().max(1.0));
            let resid = g + (x - y).norm().ln() / (2.0 * PI) - d.harmonic_part(x, y).unwrap();
            prop_assert!(resid.abs() < 1e-12);
            prop_assert!(g > 0.0);
        }

        #[test]
        fn conjugate_derivatives(r1 in 0.0..0.9f64, t1 in 0.0..6.3f64, r2 in 0.0..0.9f64, t2 in 0.0..6.3f64) {
            let d = DiskDomain::unit();
            let (x, y) = (Point::from_polar(r1, t1), Point::from_polar(r2, t2));
            prop_assume!((x - y).norm() > 1e-6);
            let a = d.green_deriv(x, y, DerivKind::DxDy).unwrap();
            let b = d.green_deriv(x, y, DerivKind::DxBarDyBar).unwrap();
            prop_assert!((a.conj() - b).norm() <= 1e-12 * a.norm().max(1.0));
            let c = d.green_deriv(x, y, DerivKind::DxDyBar).unwrap();
            let e = d.green_deriv(x, y, DerivKind::DxBarDy).unwrap();
            prop_assert!((c.conj() - e).norm() <= 1e-14);
        }
    }
}
