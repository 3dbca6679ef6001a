//! `sgope`: runs the experiments of the `sgope` library from a configuration
//! file and flags, writing a result file and a manifest next to it.

mod commands;
mod config;
mod output;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Arg, ArgMatches, Command};
use serde_json::json;

use config::{RunConfig, KEYS};

#[derive(Debug)]
pub enum CliError {
    Precondition(String),
    Numerical(String),
    Io(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Precondition(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Io(_) => 4,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Precondition(m) => write!(f, "precondition violated: {m}"),
            CliError::Numerical(m) => write!(f, "numerical failure: {m}"),
            CliError::Io(m) => write!(f, "i/o failure: {m}"),
        }
    }
}

impl From<sgope::Error> for CliError {
    fn from(e: sgope::Error) -> Self {
        match e.kind() {
            sgope::ErrorKind::Precondition => CliError::Precondition(e.to_string()),
            sgope::ErrorKind::Numerical => CliError::Numerical(e.to_string()),
        }
    }
}

type Handler = fn(&RunConfig, &mut commands::Constants) -> Result<output::Output, CliError>;

const SUBCOMMANDS: &[(&str, &str, Handler)] = &[
    ("green", "Green's function and harmonic part at pairs of points", commands::green),
    ("moments", "Neutral Coulomb-gas moments and their growth", commands::moments),
    ("forests", "Two-loop rooted forest counts against the closed formula", commands::forests),
    ("simplex", "Simplex-integral bound grid and U(R) region integrals", commands::simplex),
    ("onsager", "Electrostatic inequality on random charge configurations", commands::onsager),
    ("cauchy", "L² Cauchy gaps of Wick exponentials along a scale schedule", commands::cauchy),
    ("partition", "Partition function and spectator observable as μ-series", commands::partition),
    ("correlator", "Vertex, cosine and derivative-pair correlators", commands::correlator),
    ("ope-scan", "Subtracted OPE combinations along a radius schedule", commands::ope_scan),
    ("ope-fit", "Singular OPE coefficients fitted against predictions", commands::ope_fit),
    ("girsanov", "Polynomial times exponential Gaussian expectations", commands::girsanov),
];

fn cli() -> Command {
    let mut cmd = Command::new("sgope")
        .version(env!("CARGO_PKG_VERSION"))
        .about("Sine-Gordon correlators and OPE checks on the unit disk")
        .subcommand_required(true)
        .arg(Arg::new("config").long("config").global(true).env("SGOPE_CONFIG").help("TOML configuration file"))
        .arg(Arg::new("out").long("out").global(true).env("SGOPE_OUT").help("Result file (default sgope-<subcommand>.<format>)"))
        .arg(
            Arg::new("workers")
                .long("workers")
                .global(true)
                .env("SGOPE_WORKERS")
                .value_parser(clap::value_parser!(usize))
                .help("Worker threads; never changes results"),
        );
    for key in KEYS {
        cmd = cmd.arg(
            Arg::new(*key)
                .long(key.replace('_', "-"))
                .global(true)
                .env(format!("SGOPE_{}", key.to_uppercase()))
                .allow_hyphen_values(true),
        );
    }
    for (name, about, _) in SUBCOMMANDS {
        cmd = cmd.subcommand(Command::new(*name).about(*about));
    }
    cmd
}

fn flags(m: &ArgMatches) -> BTreeMap<String, String> {
    KEYS.iter()
        .filter_map(|k| m.get_one::<String>(k).map(|v| (k.to_string(), v.clone())))
        .collect()
}

fn run(sub: &str, m: &ArgMatches) -> Result<PathBuf, CliError> {
    let started = Instant::now();
    let file = m.get_one::<String>("config").map(PathBuf::from);
    let cfg = RunConfig::build(sub, file.as_deref(), flags(m))?;
    let handler = SUBCOMMANDS.iter().find(|(n, _, _)| *n == sub).map(|s| s.2).expect("clap checks names");
    if let Some(&w) = m.get_one::<usize>("workers") {
        if w == 0 {
            return Err(CliError::Precondition("workers must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build_global()
            .map_err(|e| CliError::Precondition(format!("cannot start {w} workers: {e}")))?;
    }
    let mut constants = commands::Constants::new();
    let result = handler(&cfg, &mut constants)?;
    let format = cfg.str_or("format", result.default_format()).to_string();
    let text = result.render(&format)?;
    let out = m
        .get_one::<String>("out")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(format!("sgope-{sub}.{format}")));
    output::write(&out, &text)?;
    let manifest = json!({
        "subcommand": cfg.subcommand,
        "result": out.display().to_string(),
        "format": format,
        "config": cfg.values,
        "from_file": cfg.from_file,
        "from_flags": cfg.from_flags,
        "config_file": file.map(|p| p.display().to_string()),
        "version": env!("CARGO_PKG_VERSION"),
        "wall_time_s": started.elapsed().as_secs_f64(),
        "constants": constants,
    });
    let mpath = manifest_path(&out);
    output::write(&mpath, &(serde_json::to_string_pretty(&manifest).expect("json values serialise") + "\n"))?;
    Ok(out)
}

fn manifest_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".manifest.json");
    PathBuf::from(s)
}

fn main() -> ExitCode {
    let matches = cli().get_matches();
    let (sub, m) = matches.subcommand().expect("a subcommand is required");
    match run(sub, m) {
        Ok(out) => {
            eprintln!("wrote {}", out.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("sgope: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_key_is_a_flag() {
        let m = cli().try_get_matches_from(["sgope", "green", "--psi-center", "0.1,0", "--seed", "3"]).unwrap();
        let (_, sub) = m.subcommand().unwrap();
        let f = flags(sub);
        assert_eq!(f["psi_center"], "0.1,0");
        assert_eq!(f["seed"], "3");
    }

    #[test]
    fn error_kinds_map_to_exit_codes() {
        let e: CliError = sgope::Error::TailBound { bound: 1.0, tol: 0.1, order: 2 }.into();
        assert_eq!(e.exit_code(), 3);
        let e: CliError = sgope::Error::InvalidParameter("x".into()).into();
        assert_eq!(e.exit_code(), 2);
        assert_eq!(CliError::Io(String::new()).exit_code(), 4);
    }
}
