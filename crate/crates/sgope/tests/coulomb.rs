use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sgope::coulomb::*;
use sgope::green::{Bump, DiskDomain, Mollifier};
use sgope::quad::{self, PolarOrder};
use sgope::wick::{self, GapOrder};
use sgope::Point;

fn bump(x: f64, y: f64, r: f64) -> Bump {
    Bump::new(Point::new(x, y), r, 1.0).unwrap()
}

fn self_energy(d: &DiskDomain, a: f64, x: Point) -> f64 {
    (-0.5 * a * a * d.harmonic_raw(x, x)).exp()
}

fn pair(d: &DiskDomain, ak: f64, al: f64, x: Point, y: Point) -> f64 {
    (-ak * al * d.green_raw(x, y)).exp()
}

// ∫∫ f(x)g(y) e^{−(a²/2)(g(x,x)+g(y,y))} e^{a² G(x,y)}
fn neutral_pair_oracle(d: &DiskDomain, f: &Bump, g: &Bump, a: f64) -> f64 {
    let order = PolarOrder::new(64, 16, 10);
    f.integrate(48, 24, |x| {
        let inner = quad::polar_about(x, g.center, g.radius, order, |y| {
            g.eval(y) * self_energy(d, a, y) * pair(d, a, -a, x, y)
        });
        self_energy(d, a, x) * inner
    })
}

#[test]
fn two_point_moment_matches_quadrature() {
    let d = DiskDomain::unit();
    let (f, g) = (bump(0.1, 0.0, 0.4), bump(-0.1, 0.1, 0.35));
    for a2 in [PI, 2.0 * PI, 3.0 * PI] {
        let a = f64::sqrt(a2);
        let want = neutral_pair_oracle(&d, &f, &g, a);
        let s = ChargeSystem::new(vec![a, -a]).unwrap();
        let e = ic_moment(&d, &[f, g], &s, 200_000, 11).unwrap();
        assert!((e.value.re - want).abs() < 4.0 * e.stderr, "α²={a2}: {} vs {want} ± {}", e.value, e.stderr);
        // neutral pairs give a positive real integrand
        assert_eq!(e.value.im, 0.0);
        assert!(e.value.re > 0.0);
    }
}

#[test]
fn gn_two_points_matches_quadrature() {
    let d = DiskDomain::unit();
    let f = bump(0.0, 0.1, 0.4);
    let a = f64::sqrt(2.0 * PI);
    let s = ChargeSystem::new(vec![a, -a]).unwrap();
    for x1 in [Point::new(0.05, 0.02), Point::new(0.5, -0.3)] {
        let want = quad::polar_about(x1, f.center, f.radius, PolarOrder::new(64, 16, 10), |y| {
            f.eval(y) * pair(&d, a, -a, x1, y)
        });
        let e = gn_kernel(&d, x1, &[f], &s, 200_000, 3).unwrap();
        assert!((e.value.re - want).abs() < 4.0 * e.stderr, "{x1}: {} vs {want} ± {}", e.value, e.stderr);
    }
}

#[test]
fn hn_three_points_matches_quadrature() {
    let d = DiskDomain::unit();
    let f = bump(0.0, 0.0, 0.4);
    let a = f64::sqrt(1.5 * PI);
    let s = ChargeSystem::new(vec![a, a, -a]).unwrap();
    let (x1, x2) = (Point::new(0.05, 0.0), Point::new(-0.05, 0.05));
    let want = pair(&d, a, a, x1, x2)
        * quad::polar_partition(&[x1, x2], f.center, f.radius, PolarOrder::new(64, 16, 10), |y| {
            f.eval(y) * pair(&d, a, -a, x1, y) * pair(&d, a, -a, x2, y)
        });
    let e = hn_kernel(&d, x1, x2, &[f], &s, 200_000, 5).unwrap();
    assert!((e.value.re - want).abs() < 4.0 * e.stderr, "{} vs {want} ± {}", e.value, e.stderr);
}

#[test]
fn hn_normalised_values_stay_bounded() {
    let d = DiskDomain::unit();
    let f = bump(0.0, 0.0, 0.5);
    let a = f64::sqrt(2.0 * PI);
    let s = ChargeSystem::new(vec![a, -a, a]).unwrap();
    let expo = s.pair_exponent();
    let vals: Vec<f64> = (2..=7)
        .map(|j| {
            let h = 0.5f64.powi(j);
            let x1 = Point::new(0.1, 0.0);
            let e = hn_kernel(&d, x1, x1 + h, &[f], &s, 50_000, 9).unwrap();
            e.value.norm() * h.powf(expo)
        })
        .collect();
    let (lo, hi) = vals.iter().fold((f64::INFINITY, 0.0f64), |(l, h), &v| (l.min(v), h.max(v)));
    assert!(hi < 2.0 * lo, "{vals:?}");
}

#[test]
fn gn_lipschitz_probe() {
    let d = DiskDomain::unit();
    let fs = [bump(0.1, 0.0, 0.35), bump(-0.1, 0.05, 0.35)];
    let a = f64::sqrt(2.0 * PI);
    let s = ChargeSystem::new(vec![a, -a, a]).unwrap();
    let mut worst = 0.0f64;
    let mut sup = 0.0f64;
    for k in 0..6 {
        let x = Point::from_polar(0.3, k as f64 * PI / 3.0);
        let h = 0.05;
        let g0 = gn_kernel(&d, x, &fs, &s, 40_000, 17).unwrap();
        let g1 = gn_kernel(&d, x + h, &fs, &s, 40_000, 17).unwrap();
        worst = worst.max((g1.value - g0.value).norm() / h);
        sup = sup.max(g0.value.norm());
    }
    assert!(worst + sup < 0.5, "{worst} {sup}");
}

fn random_config(rng: &mut ChaCha8Rng, n: usize, spread: f64) -> (Vec<Point>, Vec<i8>) {
    let pts = (0..n)
        .map(|_| Point::from_polar(spread * rng.random::<f64>().sqrt(), 2.0 * PI * rng.random::<f64>()))
        .collect();
    let sig = (0..n).map(|_| if rng.random::<bool>() { 1 } else { -1 }).collect();
    (pts, sig)
}

#[test]
fn onsager_neutral_pairs_with_unit_constant() {
    let d = DiskDomain::unit();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..1000 {
        let (x, _) = random_config(&mut rng, 2, 0.8);
        let a = rng.random_range(0.1..(4.0 * PI).sqrt() - 1e-9);
        let s = ChargeSystem::new(vec![a, -a]).unwrap();
        let r = onsager_check_limit(&d, &x, &s, 1.0).unwrap();
        assert!(r.margin >= 0.0, "{x:?} {a}: {r:?}");
    }
}

#[test]
fn onsager_random_configurations() {
    let d = DiskDomain::unit();
    let m = Mollifier::standard();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut least = f64::INFINITY;
    for case in 0..1000 {
        let n = [2, 8, 32, 64][case % 4];
        let (x, sig) = random_config(&mut rng, n, 0.8);
        let s = ChargeSystem::sine_gordon(2.0 * PI, &sig).unwrap();
        least = least.min(onsager_check_limit(&d, &x, &s, 2.0).unwrap().margin);
        if case % 10 == 0 {
            for j in 3..=8 {
                let r = onsager_check_mollified(&d, m, &x, &s, 0.5f64.powi(j), 2.0).unwrap();
                least = least.min(r.margin);
            }
        }
    }
    assert!(least >= 0.0);
}

#[test]
fn onsager_clustered_below_mollifier_scale() {
    let d = DiskDomain::unit();
    let m = Mollifier::standard();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..200 {
        let centre = Point::from_polar(0.6 * rng.random::<f64>(), 2.0 * PI * rng.random::<f64>());
        let (mut x, sig) = random_config(&mut rng, 16, 0.01);
        x.iter_mut().for_each(|p| *p += centre);
        let s = ChargeSystem::sine_gordon(3.0 * PI, &sig).unwrap();
        for j in 3..=8 {
            let r = onsager_check_mollified(&d, m, &x, &s, 0.5f64.powi(j), 2.0).unwrap();
            assert!(r.margin >= 0.0, "{r:?}");
        }
    }
}

#[test]
fn growth_probe_second_moment_and_constants() {
    let d = DiskDomain::unit();
    let f = bump(0.0, 0.0, 0.4);
    let a = f64::sqrt(2.0 * PI);
    let rows = moment_growth_probe(&d, &f, a, 4, 100_000, 21).unwrap();
    let want = neutral_pair_oracle(&d, &f, &f, a);
    let m1 = &rows[0].moment;
    assert!((m1.value.re - want).abs() < 4.0 * m1.stderr, "{} {want}", m1.value);
    // the mollified second moment approaches the same value
    let eps = 0.5f64.powi(9);
    let w = wick::wick_second_moment(&d, Mollifier::standard(), &f, a, eps, GapOrder::default()).unwrap();
    assert!((w - m1.value.re).abs() < 4.0 * m1.stderr + 0.01 * want);
    let cs: Vec<f64> = rows.iter().map(|r| r.c_n).collect();
    assert!(cs.iter().all(|&c| c < 0.25), "{cs:?}");
}
