use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use serde_json::{json, Map, Value};
use sgope::coulomb::{self, ChargeSystem};
use sgope::dirichlet;
use sgope::forest;
use sgope::gauss::{self, CovMatrix, GaussianSampler, Polynomial};
use sgope::green::{DiskDomain, Mollifier};
use sgope::mc::{self, McEstimate};
use sgope::ope::{self, OpeContext, OpeScan, RegularTerms};
use sgope::series::{self, PairKind, SeriesResult};
use sgope::wick;
use sgope::Point;

use crate::config::RunConfig;
use crate::output::Output;
use crate::CliError;

pub type Constants = Map<String, Value>;

fn num(x: f64) -> String {
    format!("{x:e}")
}

fn est_json(e: &McEstimate) -> Value {
    json!({"re": e.value.re, "im": e.value.im, "stderr": e.stderr})
}

fn series_json(s: &SeriesResult) -> Value {
    json!({
        "terms": s.terms.iter().map(est_json).collect::<Vec<_>>(),
        "value": [s.partial_sum.value.re, s.partial_sum.value.im],
        "stderr": s.partial_sum.stderr,
        "tail_bound": s.tail_bound,
    })
}

fn pair_kind(name: &str) -> Result<PairKind, CliError> {
    match name {
        "dd" => Ok(PairKind::DD),
        "dbardbar" => Ok(PairKind::DbarDbar),
        "ddbar" => Ok(PairKind::DDbar),
        other => Err(CliError::Precondition(format!("kind must be dd, dbardbar or ddbar, got '{other}'"))),
    }
}

fn kind_name(k: PairKind) -> &'static str {
    match k {
        PairKind::DD => "dd",
        PairKind::DbarDbar => "dbardbar",
        PairKind::DDbar => "ddbar",
    }
}

fn directions(cfg: &RunConfig, default: &[f64]) -> Result<Vec<f64>, CliError> {
    cfg.list_or("thetas", default)
}

pub fn green(cfg: &RunConfig, _c: &mut Constants) -> Result<Output, CliError> {
    let d = DiskDomain::unit();
    let pts = cfg.points("points")?;
    if pts.len() < 2 {
        return Err(CliError::Precondition("green needs at least two points".into()));
    }
    let mut rows = Vec::new();
    for i in 0..pts.len() {
        for j in i + 1..pts.len() {
            let (x, y) = (pts[i], pts[j]);
            let g = d.green(x, y)?;
            let h = d.harmonic_part(x, y)?;
            rows.push(vec![num(x.re), num(x.im), num(y.re), num(y.im), num(g), num(h), num(g - h)]);
        }
    }
    Ok(Output::Table {
        header: vec!["x_re", "x_im", "y_re", "y_im", "green", "harmonic", "log_part"],
        rows,
    })
}

pub fn moments(cfg: &RunConfig, c: &mut Constants) -> Result<Output, CliError> {
    let d = DiskDomain::unit();
    let f = cfg.f()?;
    let alphas = cfg.list_or("alphas", &[(2.0 * PI).sqrt(), -(2.0 * PI).sqrt()])?;
    let budget = cfg.budget(100_000)?;
    let seed = cfg.seed()?;
    let system = ChargeSystem::new(alphas.clone())?;
    let m = coulomb::ic_moment(&d, &vec![f; alphas.len()], &system, budget, seed)?;
    let mut doc = json!({"alphas": alphas, "moment": est_json(&m), "budget": budget});
    let n = cfg.usize_or("n", 0)?;
    if n > 0 {
        let alpha = cfg.f64_or("alpha", alphas[0].abs())?;
        let rows = coulomb::moment_growth_probe(&d, &f, alpha, n, budget, seed)?;
        let cmax = rows.iter().map(|r| r.c_n).fold(0.0, f64::max);
        c.insert("growth_c".into(), json!(cmax));
        doc["growth"] = rows
            .iter()
            .map(|r| json!({"n": r.n, "moment": est_json(&r.moment), "root": r.root, "c_n": r.c_n}))
            .collect();
    }
    Ok(Output::Json(doc))
}

pub fn forests(cfg: &RunConfig, _c: &mut Constants) -> Result<Output, CliError> {
    let n_max = cfg.usize_or("n", forest::ENUMERATION_MAX)?;
    let mut rows = Vec::new();
    for n in 2..=n_max {
        let counts = forest::enumerate_forests(n)?;
        for (&k, &count) in &counts {
            let formula = forest::forest_count_exact(n, k)?;
            let ok = formula == count.into();
            rows.push(vec![n.to_string(), k.to_string(), count.to_string(), formula.to_string(), ok.to_string()]);
        }
    }
    Ok(Output::Table {
        header: vec!["n", "k", "count", "formula_count", "match"],
        rows,
    })
}

pub fn simplex(cfg: &RunConfig, _c: &mut Constants) -> Result<Output, CliError> {
    let alphas = cfg.list_or("alphas", &[PI, 2.0 * PI, 3.0 * PI])?;
    let r = cfg.f64_or("r", 1.0)?;
    let max_total = cfg.usize_or("max_total", 6)?;
    let budget = cfg.u64_or("budget", 0)?;
    let seed = cfg.seed()?;
    let mut rows = Vec::new();
    for (i, b) in dirichlet::bound_grid(&alphas, r, max_total)?.iter().enumerate() {
        let p = &b.profile;
        let mut row = vec![
            p.l.to_string(),
            p.m.to_string(),
            num(p.a),
            num(p.r),
            num(b.value),
            num(b.bound),
            b.satisfied.to_string(),
        ];
        if budget > 0 {
            let e = dirichlet::u_region_integral(p, budget, mc::derive_seed(seed, &[i as u64]))?;
            row.extend([num(e.value.re), num(e.stderr)]);
        } else {
            row.extend([String::new(), String::new()]);
        }
        rows.push(row);
    }
    Ok(Output::Table {
        header: vec!["l", "m", "a", "r", "estimate", "bound", "satisfied", "mc", "mc_stderr"],
        rows,
    })
}

pub fn onsager(cfg: &RunConfig, c: &mut Constants) -> Result<Output, CliError> {
    let d = DiskDomain::unit();
    let beta = cfg.beta()?;
    let constant = cfg.f64_or("c", 2.0)?;
    let ns = cfg.usize_list_or("ns", &[2, 8, 32, 64])?;
    let cases = cfg.usize_or("cases", 1000)?;
    let spread = cfg.f64_or("spread", 0.8)?;
    let eps = cfg.list_or("eps", &(3..=8).map(|j| 0.5f64.powi(j)).collect::<Vec<_>>())?;
    c.insert("onsager_c".into(), json!(constant));
    let mut rng = mc::batch_rng(cfg.seed()?, 0);
    let moll = Mollifier::standard();
    let mut rows = Vec::new();
    for case in 0..cases {
        let n = ns[case % ns.len()];
        let pts: Vec<Point> = (0..n)
            .map(|_| Point::from_polar(spread * rng.random::<f64>().sqrt(), 2.0 * PI * rng.random::<f64>()))
            .collect();
        let sig: Vec<i8> = (0..n).map(|_| if rng.random::<bool>() { 1 } else { -1 }).collect();
        let s = ChargeSystem::sine_gordon(beta, &sig)?;
        let r = coulomb::onsager_check_limit(&d, &pts, &s, constant)?;
        let mut push = |variant: &str, e: String, r: coulomb::OnsagerReport| {
            rows.push(vec![case.to_string(), n.to_string(), variant.to_string(), e, num(r.lhs), num(r.rhs), num(r.margin)]);
        };
        push("limit", String::new(), r);
        if case % 10 == 0 {
            for &e in &eps {
                let r = coulomb::onsager_check_mollified(&d, moll, &pts, &s, e, constant)?;
                push("mollified", num(e), r);
            }
        }
    }
    Ok(Output::Table {
        header: vec!["case", "n", "variant", "eps", "lhs", "rhs", "margin"],
        rows,
    })
}

pub fn cauchy(cfg: &RunConfig, c: &mut Constants) -> Result<Output, CliError> {
    let d = DiskDomain::unit();
    let f = cfg.f()?;
    let alphas = cfg.list_or("alphas", &[PI.sqrt(), (2.0 * PI).sqrt(), (3.0 * PI).sqrt()])?;
    let j_min = cfg.usize_or("j_min", 3)?;
    let j_max = cfg.usize_or("j_max", 8)?;
    let moll = Mollifier::standard();
    c.insert("c_rho".into(), json!(moll.c_rho()));
    let mut rows = Vec::new();
    for &a in &alphas {
        for j in j_min..=j_max {
            let delta = 0.5f64.powi(j as i32);
            let gap = wick::l2_cauchy_gap(&d, moll, &f, a, delta / 2.0, delta)?;
            rows.push(vec![num(a), j.to_string(), num(delta), num(delta / 2.0), num(gap)]);
        }
    }
    Ok(Output::Table {
        header: vec!["alpha", "j", "delta", "eps", "gap"],
        rows,
    })
}

pub fn partition(cfg: &RunConfig, c: &mut Constants) -> Result<Output, CliError> {
    let m = cfg.model()?;
    c.insert("growth_c".into(), json!(m.certified_c()));
    let (budget, seed) = (cfg.budget(100_000)?, cfg.seed()?);
    let z = series::partition_function(&m, budget, seed)?;
    let zo = series::z_mu_observable(&m, budget, seed)?;
    Ok(Output::Json(json!({
        "trunc": m.trunc(),
        "partition": series_json(&z),
        "observable": series_json(&zo),
        "observable_normalised": est_json(&SeriesResult::ratio(&zo, &z)),
    })))
}

pub fn correlator(cfg: &RunConfig, c: &mut Constants) -> Result<Output, CliError> {
    let m = cfg.model()?;
    c.insert("growth_c".into(), json!(m.certified_c()));
    let (budget, seed) = (cfg.budget(100_000)?, cfg.seed()?);
    let kind = cfg.str_or("kind", "dd");
    let pts = cfg.points("points")?;
    let need = if matches!(kind, "dd" | "dbardbar" | "ddbar") { 2 } else { 1 };
    if pts.len() != need {
        return Err(CliError::Precondition(format!("kind {kind} takes {need} point(s), got {}", pts.len())));
    }
    let s = match kind {
        "vertex+" => series::vertex_kernel(&m, pts[0], 1, budget, seed)?,
        "vertex-" => series::vertex_kernel(&m, pts[0], -1, budget, seed)?,
        "cos" => series::cos_correlator(&m, pts[0], budget, seed)?,
        k => series::deriv_pair_kernel(&m, pts[0], pts[1], pair_kind(k)?, budget, seed)?,
    };
    let z = series::partition_function(&m, budget, seed)?;
    let mut doc = series_json(&s);
    doc["kind"] = json!(kind);
    doc["trunc"] = json!(m.trunc());
    doc["points"] = pts.iter().map(|p| json!([p.re, p.im])).collect();
    doc["normalised"] = est_json(&SeriesResult::ratio(&s, &z));
    Ok(Output::Json(doc))
}

fn scans(cfg: &RunConfig, mus: &[f64], default_thetas: &[f64]) -> Result<Vec<OpeScan>, CliError> {
    let m = cfg.model()?;
    let y = cfg.point_or("points", Point::new(0.0, 0.0))?;
    let thetas = directions(cfg, default_thetas)?;
    let r0 = cfg.f64_or("r0", ope::SCAN_R0)?;
    let j_max = cfg.usize_or("j_max", ope::SCAN_J_MAX)?;
    Ok(ope::ope_scans(&m, mus, y, &thetas, r0, j_max, cfg.budget(100_000)?, cfg.seed()?)?)
}

fn kinds(cfg: &RunConfig) -> Result<Vec<PairKind>, CliError> {
    match cfg.str_or("kind", "all") {
        "all" => Ok(PairKind::ALL.to_vec()),
        k => Ok(vec![pair_kind(k)?]),
    }
}

pub fn ope_scan(cfg: &RunConfig, _c: &mut Constants) -> Result<Output, CliError> {
    let kinds = kinds(cfg)?;
    let mut rows = Vec::new();
    for s in scans(cfg, &[cfg.mu()?], &[0.0])? {
        if !kinds.contains(&s.kind) {
            continue;
        }
        for (r, v) in s.radii.iter().zip(&s.values) {
            rows.push(vec![kind_name(s.kind).to_string(), num(s.theta), num(*r), num(v.value.re), num(v.value.im), num(v.stderr)]);
        }
    }
    Ok(Output::Table {
        header: vec!["kind", "theta", "r", "value_re", "value_im", "stderr"],
        rows,
    })
}

pub fn ope_fit(cfg: &RunConfig, _c: &mut Constants) -> Result<Output, CliError> {
    let m = cfg.model()?;
    let mu = cfg.mu()?;
    let eight: Vec<f64> = (0..8).map(|k| k as f64 * PI / 4.0).collect();
    let regular = match cfg.str_or("regular", "extended") {
        "constant" => RegularTerms::Constant,
        "quadratic" => RegularTerms::Quadratic,
        "extended" => RegularTerms::Extended,
        other => return Err(CliError::Precondition(format!("regular must be constant, quadratic or extended, got '{other}'"))),
    };
    let r_max = cfg.f64_or("fit_r_max", f64::INFINITY)?;
    let all = scans(cfg, &[mu], &eight)?;
    let y = cfg.point_or("points", Point::new(0.0, 0.0))?;
    let ctx = OpeContext::new(&m, y, cfg.budget(100_000)?, cfg.seed()?)?;
    let mut out = Vec::new();
    for kind in kinds(cfg)? {
        let sel: Vec<OpeScan> = all.iter().filter(|s| s.kind == kind).map(|s| s.within(r_max)).collect();
        let fit = ope::fit_singular(&sel, regular)?;
        let pred = ctx.predicted(&m.with_mu(mu), kind)?;
        let names = ["inverse_square", "phase", "log", "constant"];
        let coeffs: Vec<Value> = (0..4)
            .map(|k| {
                let mut v = json!({
                    "basis": names[k],
                    "re": fit.coefficients[k].value.re,
                    "im": fit.coefficients[k].value.im,
                    "ci": fit.ci[k],
                });
                if k < 3 {
                    let (diff, tol) = fit.compare(k, &pred[k]);
                    v["predicted"] = json!([pred[k].value.re, pred[k].value.im]);
                    v["difference"] = json!(diff);
                    v["tolerance"] = json!(tol);
                    v["consistent"] = json!(diff <= tol);
                }
                v
            })
            .collect();
        out.push(json!({
            "kind": kind_name(kind),
            "coefficients": coeffs,
            "residual_norm": fit.residual_norm,
            "points": fit.points,
        }));
    }
    Ok(Output::Json(json!({"mu": mu, "y": [y.re, y.im], "fits": out})))
}

pub fn girsanov(cfg: &RunConfig, _c: &mut Constants) -> Result<Output, CliError> {
    let rows: Vec<Vec<f64>> = cfg
        .str_or("cov", "1,0.5;0.5,1")
        .split(';')
        .map(|r| r.split(',').map(|v| crate::config::parse_number(v.trim())).collect::<Option<Vec<_>>>())
        .collect::<Option<_>>()
        .ok_or_else(|| CliError::Precondition("cov must be rows like 1,0.5;0.5,1".into()))?;
    let sigma = CovMatrix::from_rows(&rows)?;
    let poly = Polynomial::parse(sigma.dim(), cfg.str_or("poly", "x1*x2"))?;
    let z = cfg.complex_or("z", Complex64::new(1.0, 0.0))?;
    let exact = gauss::girsanov_expectation(&sigma, &poly, z)?;
    let mut doc = json!({"dim": sigma.dim(), "z": [z.re, z.im], "exact": [exact.re, exact.im]});
    let budget = cfg.u64_or("budget", 0)?;
    if budget > 0 {
        let sampler = GaussianSampler::new(&sigma)?;
        let [e] = mc::run(budget, cfg.seed()?, |rng| {
            let v = sampler.sample(rng);
            [poly.eval(&v) * (z * v[0]).exp()]
        })?;
        doc["monte_carlo"] = est_json(&e);
    }
    Ok(Output::Json(doc))
}
