//! Run configuration: a TOML file of flat keys (plus one optional table per
//! subcommand), overridden by command-line flags and `SGOPE_*` variables.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::Path;

use num_complex::Complex64;
use sgope::green::{Bump, DiskDomain};
use sgope::series::{SgModel, SgParams};
use sgope::Point;

use crate::CliError;

/// Every key a configuration may set.
pub const KEYS: &[&str] = &[
    "seed", "format", "beta", "mu", "mus", "alpha", "alphas", "psi_center", "psi_radius", "psi_amp", "f_center",
    "f_radius", "f_amp", "budget", "trunc", "tail_tol", "c_cert", "points", "kind", "n", "ns", "r", "max_total",
    "cases", "c", "eps", "spread", "thetas", "r0", "j_max", "regular", "cov", "poly", "z", "j_min", "fit_r_max",
];

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub subcommand: String,
    pub values: BTreeMap<String, String>,
    pub from_file: BTreeMap<String, String>,
    pub from_flags: BTreeMap<String, String>,
}

fn normalise(key: &str) -> String {
    key.replace('-', "_")
}

fn check_key(key: &str) -> Result<(), CliError> {
    if KEYS.contains(&key) {
        Ok(())
    } else {
        Err(CliError::Precondition(format!("unknown configuration key '{key}'")))
    }
}

/// Renders a TOML value in the flag syntax: numbers as written, arrays of
/// numbers as `a,b`, arrays of arrays as `a,b;c,d`.
fn flatten(v: &toml::Value) -> Result<String, CliError> {
    use toml::Value;
    Ok(match v {
        Value::String(s) => s.clone(),
        Value::Integer(i) => i.to_string(),
        Value::Float(f) => f.to_string(),
        Value::Boolean(b) => b.to_string(),
        Value::Array(items) => {
            let nested = items.iter().any(|i| i.is_array());
            let parts: Vec<String> = items.iter().map(flatten).collect::<Result<_, _>>()?;
            parts.join(if nested { ";" } else { "," })
        }
        other => return Err(CliError::Precondition(format!("unsupported configuration value {other}"))),
    })
}

impl RunConfig {
    pub fn build(
        subcommand: &str,
        file: Option<&Path>,
        flags: BTreeMap<String, String>,
    ) -> Result<RunConfig, CliError> {
        let mut from_file = BTreeMap::new();
        if let Some(path) = file {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Io(format!("cannot read {}: {e}", path.display())))?;
            let table: toml::Table = text
                .parse()
                .map_err(|e| CliError::Precondition(format!("malformed configuration {}: {e}", path.display())))?;
            // flat keys first, then the table named after the subcommand
            let mut section = BTreeMap::new();
            for (k, v) in &table {
                match v {
                    toml::Value::Table(t) => {
                        if normalise(k) != normalise(subcommand) {
                            continue;
                        }
                        for (k2, v2) in t {
                            let key = normalise(k2);
                            check_key(&key)?;
                            section.insert(key, flatten(v2)?);
                        }
                    }
                    _ => {
                        let key = normalise(k);
                        check_key(&key)?;
                        from_file.insert(key, flatten(v)?);
                    }
                }
            }
            from_file.extend(section);
        }
        let mut values = from_file.clone();
        values.extend(flags.clone());
        let cfg = RunConfig {
            subcommand: subcommand.to_string(),
            values,
            from_file,
            from_flags: flags,
        };
        cfg.seed()?;
        Ok(cfg)
    }

    fn raw(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    fn bad(key: &str, v: &str, what: &str) -> CliError {
        CliError::Precondition(format!("{key} = '{v}' is not {what}"))
    }

    pub fn seed(&self) -> Result<u64, CliError> {
        let v = self
            .raw("seed")
            .ok_or_else(|| CliError::Precondition("a seed is required (--seed or seed = …)".into()))?;
        v.parse().map_err(|_| Self::bad("seed", v, "an unsigned integer"))
    }

    pub fn f64_or(&self, key: &str, default: f64) -> Result<f64, CliError> {
        match self.raw(key) {
            None => Ok(default),
            Some(v) => v.parse().map_err(|_| Self::bad(key, v, "a number")),
        }
    }

    pub fn usize_or(&self, key: &str, default: usize) -> Result<usize, CliError> {
        match self.raw(key) {
            None => Ok(default),
            Some(v) => v.parse().map_err(|_| Self::bad(key, v, "a non-negative integer")),
        }
    }

    pub fn u64_or(&self, key: &str, default: u64) -> Result<u64, CliError> {
        match self.raw(key) {
            None => Ok(default),
            Some(v) => v.parse().map_err(|_| Self::bad(key, v, "a non-negative integer")),
        }
    }

    pub fn str_or<'a>(&'a self, key: &str, default: &'a str) -> &'a str {
        self.raw(key).unwrap_or(default)
    }

    pub fn has(&self, key: &str) -> bool {
        self.values.contains_key(key)
    }

    pub fn list_or(&self, key: &str, default: &[f64]) -> Result<Vec<f64>, CliError> {
        match self.raw(key) {
            None => Ok(default.to_vec()),
            Some(v) => v
                .split([',', ';'])
                .filter(|s| !s.trim().is_empty())
                .map(|s| parse_number(s.trim()).ok_or_else(|| Self::bad(key, v, "a list of numbers")))
                .collect(),
        }
    }

    pub fn usize_list_or(&self, key: &str, default: &[usize]) -> Result<Vec<usize>, CliError> {
        match self.raw(key) {
            None => Ok(default.to_vec()),
            Some(v) => v
                .split(',')
                .map(|s| s.trim().parse().map_err(|_| Self::bad(key, v, "a list of integers")))
                .collect(),
        }
    }

    /// Points written `x,y;x,y;…`.
    pub fn points(&self, key: &str) -> Result<Vec<Point>, CliError> {
        let v = self
            .raw(key)
            .ok_or_else(|| CliError::Precondition(format!("{key} is required")))?;
        v.split(';').map(|p| parse_point(p).ok_or_else(|| Self::bad(key, v, "a list of points x,y;x,y"))).collect()
    }

    pub fn point_or(&self, key: &str, default: Point) -> Result<Point, CliError> {
        match self.raw(key) {
            None => Ok(default),
            Some(v) => parse_point(v).ok_or_else(|| Self::bad(key, v, "a point x,y")),
        }
    }

    pub fn complex_or(&self, key: &str, default: Complex64) -> Result<Complex64, CliError> {
        self.point_or(key, default)
    }

    pub fn beta(&self) -> Result<f64, CliError> {
        let b = self.f64_or("beta", 2.0 * PI)?;
        if !(b > 0.0 && b < 4.0 * PI) {
            return Err(CliError::Precondition(format!("beta must lie in (0, 4π), got {b}")));
        }
        Ok(b)
    }

    pub fn mu(&self) -> Result<f64, CliError> {
        let mu = self.f64_or("mu", 1.0)?;
        if !mu.is_finite() {
            return Err(CliError::Precondition("mu must be finite".into()));
        }
        Ok(mu)
    }

    pub fn budget(&self, default: u64) -> Result<u64, CliError> {
        let b = self.u64_or("budget", default)?;
        if b == 0 {
            return Err(CliError::Precondition("budget must be at least 1".into()));
        }
        Ok(b)
    }

    fn bump(&self, prefix: &str, center: Point, radius: f64, amp: f64) -> Result<Bump, CliError> {
        let b = Bump::new(
            self.point_or(&format!("{prefix}_center"), center)?,
            self.f64_or(&format!("{prefix}_radius"), radius)?,
            self.f64_or(&format!("{prefix}_amp"), amp)?,
        )?;
        b.check_inside(&DiskDomain::unit())?;
        Ok(b)
    }

    pub fn psi(&self) -> Result<Bump, CliError> {
        self.bump("psi", Point::new(0.0, 0.0), 0.4, 1.0)
    }

    pub fn f(&self) -> Result<Bump, CliError> {
        self.bump("f", Point::new(0.3, -0.2), 0.2, 1.0)
    }

    pub fn model(&self) -> Result<SgModel, CliError> {
        let mut p = SgParams::new(self.beta()?, self.mu()?, self.psi()?, self.f()?);
        if self.has("trunc") {
            p.trunc = Some(self.usize_or("trunc", 0)?);
        }
        if self.has("c_cert") {
            p.c_cert = Some(self.f64_or("c_cert", 0.0)?);
        }
        p.tail_tol = self.f64_or("tail_tol", p.tail_tol)?;
        Ok(SgModel::new(p)?)
    }
}

/// Numbers, also accepting `pi`, `2pi`, `pi/4` and the like.
pub fn parse_number(s: &str) -> Option<f64> {
    if let Ok(v) = s.parse() {
        return Some(v);
    }
    let (num, den) = match s.split_once('/') {
        Some((a, b)) => (a, b.parse::<f64>().ok()?),
        None => (s, 1.0),
    };
    let factor = match num.strip_suffix("pi").or_else(|| num.strip_suffix('π')) {
        Some("") => 1.0,
        Some("-") => -1.0,
        Some(k) => k.trim_end_matches('*').parse().ok()?,
        None => return None,
    };
    Some(factor * PI / den)
}

fn parse_point(s: &str) -> Option<Point> {
    let (a, b) = s.split_once(',')?;
    Some(Point::new(parse_number(a.trim())?, parse_number(b.trim())?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_with_pi() {
        assert_eq!(parse_number("2"), Some(2.0));
        assert_eq!(parse_number("2pi"), Some(2.0 * PI));
        assert_eq!(parse_number("pi/4"), Some(PI / 4.0));
        assert_eq!(parse_number("-pi"), Some(-PI));
        assert_eq!(parse_number("x"), None);
    }

    #[test]
    fn flags_override_file() {
        let dir = std::env::temp_dir().join(format!("sgope-cfg-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("run.toml");
        std::fs::write(&path, "seed = 1\nbeta = 3.0\npsi_center = [0.1, 0.0]\n[partition]\nmu = 0.5\n[forests]\nn = 4\n").unwrap();
        let flags = BTreeMap::from([("beta".to_string(), "4.0".to_string())]);
        let cfg = RunConfig::build("partition", Some(&path), flags).unwrap();
        assert_eq!(cfg.beta().unwrap(), 4.0);
        assert_eq!(cfg.from_file["beta"], "3");
        assert_eq!(cfg.mu().unwrap(), 0.5);
        assert!(!cfg.has("n"));
        assert_eq!(cfg.point_or("psi_center", Point::new(0.0, 0.0)).unwrap(), Point::new(0.1, 0.0));
        std::fs::write(&path, "seed = 1\nbogus = 2\n").unwrap();
        assert!(matches!(RunConfig::build("partition", Some(&path), BTreeMap::new()), Err(CliError::Precondition(_))));
    }

    #[test]
    fn seed_is_mandatory_and_beta_checked() {
        assert!(RunConfig::build("green", None, BTreeMap::new()).is_err());
        let flags = BTreeMap::from([("seed".to_string(), "7".to_string()), ("beta".to_string(), "13".to_string())]);
        let cfg = RunConfig::build("correlator", None, flags).unwrap();
        match cfg.beta() {
            Err(CliError::Precondition(m)) => assert!(m.contains("(0, 4π)")),
            other => panic!("{other:?}"),
        }
    }
}
