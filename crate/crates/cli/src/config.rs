//! Configuration: subcommand defaults, an INI file and command-line flags,
//! merged in that order of increasing precedence.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use ini::Ini;
use tfmhd_core::harness::{ExperimentKind, RunConfig, Startup};
use tfmhd_core::stepper::Formulation;

/// Every accepted `[section] key` pair.
pub const KEYS: &[(&str, &str)] = &[
    ("grid", "n"),
    ("grid", "length"),
    ("physics", "re_inv"),
    ("physics", "rem_inv"),
    ("physics", "s"),
    ("time", "dt"),
    ("time", "t_end"),
    ("solver", "picard_tol"),
    ("solver", "picard_max_iters"),
    ("solver", "formulation"),
    ("solver", "filter"),
    ("solver", "filter_pressure"),
    ("run", "kind"),
    ("run", "dts"),
    ("run", "output_dir"),
    ("run", "seed"),
    ("run", "startup"),
];

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config file {path}: {message}")]
    Read { path: PathBuf, message: String },
    #[error("unknown config key '{key}'; valid keys are: {}", valid_keys())]
    UnknownKey { key: String },
    #[error("invalid value for '{key}': '{value}' ({expected})")]
    TypeMismatch { key: String, value: String, expected: String },
    #[error("missing required key '{key}' for subcommand '{subcommand}'")]
    MissingKey { key: &'static str, subcommand: &'static str },
    #[error("{0}")]
    Invalid(String),
}

fn valid_keys() -> String {
    KEYS.iter().map(|(s, k)| format!("[{s}] {k}")).collect::<Vec<_>>().join(", ")
}

/// Values that may be given in a config file or on the command line.
/// `None` means "not set at this level".
#[derive(Debug, Default, Clone, PartialEq)]
pub struct Settings {
    pub n: Option<usize>,
    pub length: Option<f64>,
    pub re_inv: Option<f64>,
    pub rem_inv: Option<f64>,
    pub s: Option<f64>,
    pub dt: Option<f64>,
    pub t_end: Option<f64>,
    pub picard_tol: Option<f64>,
    pub picard_max_iters: Option<usize>,
    pub formulation: Option<Formulation>,
    pub filter: Option<bool>,
    pub filter_pressure: Option<bool>,
    pub kind: Option<ExperimentKind>,
    pub dts: Option<Vec<f64>>,
    pub output_dir: Option<PathBuf>,
    pub seed: Option<u64>,
    pub startup: Option<Startup>,
}

macro_rules! overlay {
    ($base:ident, $top:ident; $($field:ident),*) => {
        Settings { $($field: $top.$field.or($base.$field)),* }
    };
}

impl Settings {
    /// Fields set in `top` win over those in `self`.
    pub fn overlay(self, top: Settings) -> Settings {
        let base = self;
        overlay!(base, top; n, length, re_inv, rem_inv, s, dt, t_end, picard_tol, picard_max_iters,
            formulation, filter, filter_pressure, kind, dts, output_dir, seed, startup)
    }

    pub fn from_file(path: &Path) -> Result<Settings, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Read {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        Settings::from_ini_str(&text)
    }

    pub fn from_ini_str(text: &str) -> Result<Settings, ConfigError> {
        let ini = Ini::load_from_str(text).map_err(|e| ConfigError::Invalid(format!("malformed config file: {e}")))?;
        let mut out = Settings::default();
        for (section, props) in ini.iter() {
            for (key, value) in props.iter() {
                let section = section.unwrap_or("");
                out.set(section, key, value.trim())?;
            }
        }
        Ok(out)
    }

    fn set(&mut self, section: &str, key: &str, value: &str) -> Result<(), ConfigError> {
        let name = format!("[{section}] {key}");
        match (section, key) {
            ("grid", "n") => self.n = Some(parse(&name, value)?),
            ("grid", "length") => self.length = Some(parse_f64(&name, value)?),
            ("physics", "re_inv") => self.re_inv = Some(parse_f64(&name, value)?),
            ("physics", "rem_inv") => self.rem_inv = Some(parse_f64(&name, value)?),
            ("physics", "s") => self.s = Some(parse_f64(&name, value)?),
            ("time", "dt") => self.dt = Some(parse_f64(&name, value)?),
            ("time", "t_end") => self.t_end = Some(parse_f64(&name, value)?),
            ("solver", "picard_tol") => self.picard_tol = Some(parse_f64(&name, value)?),
            ("solver", "picard_max_iters") => self.picard_max_iters = Some(parse(&name, value)?),
            ("solver", "formulation") => self.formulation = Some(parse(&name, value)?),
            ("solver", "filter") => self.filter = Some(parse_bool(&name, value)?),
            ("solver", "filter_pressure") => self.filter_pressure = Some(parse_bool(&name, value)?),
            ("run", "kind") => self.kind = Some(parse(&name, value)?),
            ("run", "dts") => self.dts = Some(parse_dts(value).map_err(|e| mismatch(&name, value, &e))?),
            ("run", "output_dir") => self.output_dir = Some(PathBuf::from(value)),
            ("run", "seed") => self.seed = Some(parse(&name, value)?),
            ("run", "startup") => self.startup = Some(parse(&name, value)?),
            _ => {
                return Err(ConfigError::UnknownKey {
                    key: if section.is_empty() { key.to_string() } else { name },
                })
            }
        }
        Ok(())
    }
}

fn mismatch(key: &str, value: &str, expected: &str) -> ConfigError {
    ConfigError::TypeMismatch { key: key.to_string(), value: value.to_string(), expected: expected.to_string() }
}

fn parse<T>(key: &str, value: &str) -> Result<T, ConfigError>
where
    T: FromStr,
    T::Err: fmt::Display,
{
    value.parse::<T>().map_err(|e| mismatch(key, value, &e.to_string()))
}

fn parse_f64(key: &str, value: &str) -> Result<f64, ConfigError> {
    value.parse::<f64>().map_err(|_| mismatch(key, value, "expected a number"))
}

fn parse_bool(key: &str, value: &str) -> Result<bool, ConfigError> {
    match value.to_ascii_lowercase().as_str() {
        "on" | "true" | "yes" | "1" => Ok(true),
        "off" | "false" | "no" | "0" => Ok(false),
        _ => Err(mismatch(key, value, "expected on/off, true/false, yes/no or 1/0")),
    }
}

/// Comma-separated list of positive step sizes.
pub fn parse_dts(value: &str) -> Result<Vec<f64>, String> {
    value
        .split(',')
        .map(|s| s.trim())
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<f64>().map_err(|_| format!("expected a comma-separated list of numbers, got '{s}'")))
        .collect::<Result<Vec<_>, _>>()
        .and_then(|v| if v.is_empty() { Err("empty dt list".to_string()) } else { Ok(v) })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Subcommand {
    Converge,
    OrszagTang,
    Run,
    LemmaRates,
    Verify,
}

impl Subcommand {
    pub fn name(&self) -> &'static str {
        match self {
            Subcommand::Converge => "converge",
            Subcommand::OrszagTang => "orszag-tang",
            Subcommand::Run => "run",
            Subcommand::LemmaRates => "lemma-rates",
            Subcommand::Verify => "verify",
        }
    }
}

/// Fully resolved configuration for one invocation.
#[derive(Debug, Clone, PartialEq)]
pub struct CliConfig {
    pub run: RunConfig,
    pub output_dir: PathBuf,
    pub seed: u64,
}

pub const DEFAULT_DTS: [f64; 4] = [0.1, 0.05, 0.025, 0.0125];

fn preset(cmd: Subcommand, kind: Option<ExperimentKind>) -> Result<RunConfig, ConfigError> {
    let wrong_kind = |k: ExperimentKind| {
        ConfigError::Invalid(format!("subcommand '{}' does not accept kind = {k:?}", cmd.name()))
    };
    Ok(match cmd {
        Subcommand::Converge | Subcommand::LemmaRates => match kind {
            Some(k @ ExperimentKind::OrszagTang) => return Err(wrong_kind(k)),
            _ => RunConfig::manufactured(),
        },
        Subcommand::OrszagTang => match kind {
            Some(k @ ExperimentKind::Manufactured) => return Err(wrong_kind(k)),
            _ => RunConfig::orszag_tang(),
        },
        Subcommand::Run => match kind {
            Some(ExperimentKind::Manufactured) => {
                let mut c = RunConfig::manufactured();
                c.params.dt = 0.025;
                c
            }
            Some(ExperimentKind::OrszagTang) => RunConfig::orszag_tang(),
            None => return Err(ConfigError::MissingKey { key: "[run] kind", subcommand: cmd.name() }),
        },
        Subcommand::Verify => {
            let mut c = RunConfig::manufactured();
            c.n = 16;
            c
        }
    })
}

/// Merge `file` and `flags` over the subcommand defaults and validate.
pub fn resolve(cmd: Subcommand, file: Settings, flags: Settings) -> Result<CliConfig, ConfigError> {
    let s = file.overlay(flags);
    let mut run = preset(cmd, s.kind)?;
    if let Some(v) = s.n {
        run.n = v;
    }
    if let Some(v) = s.length {
        run.length = v;
    }
    let p = &mut run.params;
    p.re_inv = s.re_inv.unwrap_or(p.re_inv);
    p.rem_inv = s.rem_inv.unwrap_or(p.rem_inv);
    p.s = s.s.unwrap_or(p.s);
    p.dt = s.dt.unwrap_or(p.dt);
    p.t_end = s.t_end.unwrap_or(p.t_end);
    p.picard_tol = s.picard_tol.unwrap_or(p.picard_tol);
    p.picard_max_iters = s.picard_max_iters.unwrap_or(p.picard_max_iters);
    p.filter_enabled = s.filter.unwrap_or(p.filter_enabled);
    p.filter_pressure = s.filter_pressure.unwrap_or(p.filter_pressure);
    run.formulation = s.formulation.unwrap_or(run.formulation);
    run.startup = s.startup.unwrap_or(run.startup);
    run.dts = s.dts.unwrap_or_else(|| match cmd {
        Subcommand::Converge | Subcommand::LemmaRates => DEFAULT_DTS.to_vec(),
        _ => Vec::new(),
    });

    if cmd == Subcommand::LemmaRates {
        let increasing = run.dts.windows(2).any(|w| w[1] >= w[0]);
        if increasing || run.dts.iter().any(|d| !(d.is_finite() && *d > 0.0)) {
            return Err(ConfigError::Invalid("dts must be positive and strictly decreasing".into()));
        }
    } else {
        run.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
    }
    Ok(CliConfig {
        run,
        output_dir: s.output_dir.unwrap_or_else(|| PathBuf::from(".")),
        seed: s.seed.unwrap_or(0),
    })
}
