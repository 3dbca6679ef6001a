use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use sgope::coulomb::{Anchor, Proposal};
use sgope::green::{Bump, DerivKind, DiskDomain};
use sgope::mc;
use sgope::quad::{self, PolarOrder};
use sgope::series::*;
use sgope::Point;

const BETA: f64 = 2.0 * PI;

fn pt(x: f64, y: f64) -> Point {
    Point::new(x, y)
}

fn model(mu: f64, f_amp: f64, trunc: usize) -> SgModel {
    let psi = Bump::new(pt(0.0, 0.0), 0.5, 1.0).unwrap();
    let f = Bump::new(pt(0.25, -0.1), 0.3, f_amp).unwrap();
    let mut p = SgParams::new(BETA, mu, psi, f);
    p.trunc = Some(trunc);
    p.c_cert = Some(0.3);
    // low orders on purpose; the tail is checked elsewhere
    p.tail_tol = 1.0;
    SgModel::new(p).unwrap()
}

fn close(est: &sgope::mc::McEstimate, want: Complex64, what: &str) {
    assert!(
        (est.value - want).norm() < 4.0 * est.stderr + 1e-12,
        "{what}: {} vs {want} ± {}",
        est.value,
        est.stderr
    );
}

#[test]
fn partition_first_order_matches_quadrature() {
    let m = model(1.0, 0.0, 1);
    let d = DiskDomain::unit();
    let psi = m.params().psi;
    let want = psi.integrate(64, 32, |u| (-0.5 * BETA * d.harmonic_raw(u, u)).exp());
    let z = partition_function(&m, 100_000, 1).unwrap();
    close(&z.terms[1], Complex64::new(want, 0.0), "Z₁");
    let zo = z_mu_observable(&model(1.0, 0.0, 1), 100_000, 1).unwrap();
    assert_eq!(zo.partial_sum.value, z.partial_sum.value);
}

#[test]
fn observable_first_order_matches_quadrature() {
    let m = model(1.0, 1.0, 1);
    let d = DiskDomain::unit();
    let (psi, f) = (m.params().psi, m.params().f);
    // F by direct quadrature, independent of the radial reduction
    let conv = |u: Point| quad::polar_about(u, f.center, f.radius, PolarOrder::new(96, 16, 10), |v| f.eval(v) * d.green_raw(u, v));
    let want = m.observable_mean()
        * psi.integrate(48, 24, |u| (-0.5 * BETA * d.harmonic_raw(u, u)).exp() * (BETA.sqrt() * conv(u)).cosh());
    let zo = z_mu_observable(&m, 100_000, 2).unwrap();
    close(&zo.terms[1], Complex64::new(want, 0.0), "Z₁(O)");
    assert!((zo.terms[0].value.re - (-0.5 * d.smeared_green(&f, &f).unwrap()).exp()).abs() < 1e-9);
}

#[test]
fn vertex_first_order_matches_quadrature() {
    let m = model(1.0, 1.0, 1);
    let d = DiskDomain::unit();
    let psi = m.params().psi;
    let x = pt(0.1, 0.15);
    for sign in [1i8, -1] {
        let s = f64::from(sign);
        let pre =
            m.observable_mean() * (-0.5 * BETA * d.harmonic_raw(x, x) - s * BETA.sqrt() * m.f_convolution(x)).exp();
        let want = 0.5
            * pre
            * [1i8, -1]
                .iter()
                .map(|&sg| {
                    quad::polar_about(x, psi.center, psi.radius, PolarOrder::new(64, 16, 12), |u| {
                        psi_weight(&m, u, sg).unwrap() * (-s * BETA * f64::from(sg) * d.green_raw(x, u)).exp()
                    })
                })
                .sum::<f64>();
        let v = vertex_kernel(&m, x, sign, 200_000, 3).unwrap();
        close(&v.terms[1], Complex64::new(want, 0.0), "vertex₁");
    }
    let c = cos_correlator(&m, x, 50_000, 3).unwrap();
    assert!(c.partial_sum.value.im.abs() <= 3.0 * c.partial_sum.stderr + 1e-15);
}

#[test]
fn vertex_matches_gff_value_at_mu_zero() {
    let m = model(0.0, 0.0, 2);
    let d = DiskDomain::unit();
    let x = pt(0.3, -0.2);
    let v = vertex_kernel(&m, x, 1, 100, 1).unwrap();
    assert!((v.partial_sum.value.re - (-0.5 * BETA * d.harmonic_raw(x, x)).exp()).abs() < 1e-15);
}

#[test]
fn pair_first_order_matches_quadrature() {
    let m = model(1.0, 1.0, 1);
    let psi = m.params().psi;
    let (x, y) = (pt(0.1, 0.0), pt(-0.05, 0.12));
    let parts = deriv_pair_parts(&m, x, y, 200_000, 4).unwrap();
    for (i, kind) in PairKind::ALL.iter().enumerate() {
        let (bx, by) = match kind {
            PairKind::DD => (false, false),
            PairKind::DbarDbar => (true, true),
            PairKind::DDbar => (false, true),
        };
        let want = 0.5
            * m.observable_mean()
            * [1i8, -1]
                .iter()
                .map(|&sg| {
                    quad::polar_partition(&[x, y], psi.center, psi.radius, PolarOrder::new(64, 16, 12), |u| {
                        let vx = v_kernel(&m, x, &[u], &[sg], bx).unwrap();
                        let vy = v_kernel(&m, y, &[u], &[sg], by).unwrap();
                        vx * vy * psi_weight(&m, u, sg).unwrap()
                    })
                })
                .sum::<Complex64>();
        close(&parts.vv[i].coeffs[1], want, &format!("{kind:?}"));
    }
}

#[test]
fn pair_kernel_reduces_to_gff_at_mu_zero() {
    let m = model(0.0, 1.0, 2);
    let d = DiskDomain::unit();
    let (x, y) = (pt(0.1, 0.0), pt(-0.2, 0.3));
    for (kind, dk) in [
        (PairKind::DD, DerivKind::DxDy),
        (PairKind::DbarDbar, DerivKind::DxBarDyBar),
        (PairKind::DDbar, DerivKind::DxDyBar),
    ] {
        let (bx, by) = (dk == DerivKind::DxBarDyBar, dk != DerivKind::DxDy);
        let want = m.observable_mean() * (d.green_deriv_raw(x, y, dk) - m.v_f(x, bx) * m.v_f(y, by));
        let k = deriv_pair_kernel(&m, x, y, kind, 100, 1).unwrap();
        assert_eq!(k.terms.len(), 1);
        assert!((k.partial_sum.value - want).norm() < 1e-14 * want.norm().max(1.0));
    }
    assert!(deriv_pair_kernel(&m, x, x, PairKind::DD, 100, 1).is_err());
}

#[test]
fn conjugation_covariance_at_fixed_seed() {
    let (x, y) = (pt(0.1, 0.0), pt(-0.1, 0.1));
    let plus = model(1.0, 1.0, 2);
    let minus = model(1.0, -1.0, 2);
    let dd = deriv_pair_kernel(&plus, x, y, PairKind::DD, 5_000, 8).unwrap();
    let bb = deriv_pair_kernel(&minus, x, y, PairKind::DbarDbar, 5_000, 8).unwrap();
    let dd_minus = deriv_pair_kernel(&minus, x, y, PairKind::DD, 5_000, 8).unwrap();
    for ((a, b), c) in dd.terms.iter().zip(&bb.terms).zip(&dd_minus.terms) {
        assert_eq!(a.value.conj(), b.value);
        assert_eq!(a.value, c.value);
        assert_eq!(a.batches, c.batches);
    }
}

#[test]
fn terms_obey_growth_bound() {
    let m = model(1.0, 0.0, 3);
    let c = certify_constant(&DiskDomain::unit(), &m.params().psi, BETA, 20_000, 1).unwrap();
    let z = partition_function(&m, 20_000, 5).unwrap();
    for (n, t) in z.terms.iter().enumerate() {
        let nf = n as f64;
        let bound = c.powi(n as i32) * nf.powf(BETA * nf / (8.0 * PI)) / (1..=n).map(|i| i as f64).product::<f64>();
        assert!(t.value.norm() <= bound, "n = {n}: {} > {bound}", t.value);
    }
}

#[test]
fn automatic_truncation_meets_target() {
    let psi = Bump::new(pt(0.0, 0.0), 0.5, 1.0).unwrap();
    let f = Bump::new(pt(0.25, -0.1), 0.3, 0.0).unwrap();
    let m = SgModel::new(SgParams::new(BETA, 1.0, psi, f)).unwrap();
    let n = m.trunc();
    assert!((1..=SERIES_MAX_N).contains(&n));
    assert!(truncation_bound(1.0, BETA, m.certified_c(), n + 1).unwrap() < 1e-4);
    assert!(n == 0 || truncation_bound(1.0, BETA, m.certified_c(), n).unwrap() >= 1e-4);
}

// ∬ g(x)h(y) kernel(x, y) dx dy at first order, against the smeared Gaussian
// pairing with the test functions −∂g, −∂h.
#[test]
fn smeared_consistency_at_first_order() {
    let m = model(1.0, 1.0, 1);
    let d = DiskDomain::unit();
    let (psi, f) = (m.params().psi, m.params().f);
    let g = Bump::new(pt(0.2, 0.25), 0.15, 1.0).unwrap();
    let h = Bump::new(pt(-0.25, -0.1), 0.15, 1.0).unwrap();
    let order = PolarOrder::new(48, 12, 10);
    // P_a(v) = ∫ −∂a(x) G(x, v) dx
    let pot = |a: &Bump, v: Point| quad::polar_about(v, a.center, a.radius, order, |x| -a.wirtinger(x) * d.green_raw(x, v));
    let pair_gh = g.integrate(24, 12, |x| {
        let dg = g.wirtinger(x) / g.eval(x).max(1e-300);
        dg * pot(&h, x) * -1.0
    });
    let pf = |a: &Bump| f.integrate(24, 12, |v| pot(a, v));
    let (gf, hf) = (pf(&g), pf(&h));
    let direct = 0.5
        * m.observable_mean()
        * [1.0f64, -1.0]
            .iter()
            .map(|&sg| {
                psi.integrate(32, 16, |u| {
                    let w = psi_weight(&m, u, sg as i8).unwrap() / psi.eval(u).max(1e-300);
                    let cg = gf + pot(&g, u) * (BETA.sqrt() * sg);
                    let ch = hf + pot(&h, u) * (BETA.sqrt() * sg);
                    (pair_gh - cg * ch) * w
                })
            })
            .sum::<Complex64>();

    // kernel side: ∬ g h ∂∂G · [Z(O)]₁ − MC of ∬ g h V V
    let zo = observable_moments(&m, 100_000, 6).unwrap();
    let ddg = g.integrate(24, 12, |x| h.integrate(24, 12, |y| d.green_deriv_raw(x, y, DerivKind::DxDy)));
    let proposal = Proposal::new(vec![(psi.center, psi.radius)], Vec::<Anchor>::new(), BETA / (2.0 * PI)).unwrap();
    let area = |b: &Bump| PI * b.radius * b.radius;
    let uniform = |rng: &mut rand_chacha::ChaCha8Rng, b: &Bump| {
        b.center + Point::from_polar(b.radius * rng.random::<f64>().sqrt(), 2.0 * PI * rng.random::<f64>())
    };
    let [vv] = mc::run(100_000, 7, |rng| {
        let mut us = Vec::with_capacity(1);
        let q = proposal.draw(rng, &mut us);
        let (x, y) = (uniform(rng, &g), uniform(rng, &h));
        let sg: i8 = if rng.random::<bool>() { 1 } else { -1 };
        let w = psi_weight(&m, us[0], sg).unwrap() / q * g.eval(x) * area(&g) * h.eval(y) * area(&h);
        let v = v_kernel(&m, x, &us, &[sg], false).unwrap() * v_kernel(&m, y, &us, &[sg], false).unwrap();
        [v * w * m.observable_mean()]
    })
    .unwrap();
    // the random sign replaces ½Σσ
    let kernel = zo.coeffs[1].scale(ddg).sub(&vv);
    close(&kernel, direct, "smeared");
}
