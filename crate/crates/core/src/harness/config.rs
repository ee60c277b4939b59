//! Line-oriented experiment configuration.
//!
//! ```text
//! # comments start with '#'
//! [experiment]
//! command = entrance-study
//! model = brownian:a=-1,s2=4
//! rate = exp(x)
//! seed = 7
//! out_dir = runs/entrance
//!
//! [params]
//! levels = 5, 10, 20, 40
//! n = 800
//! ```

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::Serialize;

use crate::error::{Error, Result};

/// Environment variable holding the default output directory.
pub const OUT_DIR_ENV: &str = "TCLAB_OUT_DIR";
pub const DEFAULT_OUT_DIR: &str = "tclab-out";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Classify,
    Simulate,
    EntranceStudy,
    Speed,
    Undershoot,
    Excursions,
    Glue,
    CramerLimit,
    Selftest,
}

impl Command {
    pub const ALL: [Command; 9] = [
        Command::Classify,
        Command::Simulate,
        Command::EntranceStudy,
        Command::Speed,
        Command::Undershoot,
        Command::Excursions,
        Command::Glue,
        Command::CramerLimit,
        Command::Selftest,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::Classify => "classify",
            Command::Simulate => "simulate",
            Command::EntranceStudy => "entrance-study",
            Command::Speed => "speed",
            Command::Undershoot => "undershoot",
            Command::Excursions => "excursions",
            Command::Glue => "glue",
            Command::CramerLimit => "cramer-limit",
            Command::Selftest => "selftest",
        }
    }

    /// Parameter keys accepted in `[params]`.
    pub fn params(self) -> &'static [&'static str] {
        match self {
            Command::Classify => &[],
            Command::Simulate => &["x0", "dt", "steps", "t_max", "grid", "paths"],
            Command::EntranceStudy => &["levels", "t_probe", "b", "n", "dt", "max_steps"],
            Command::Speed => &["x_proxy", "t", "n", "dt", "max_steps"],
            Command::Undershoot => &["x_proxy", "levels", "n", "dt", "max_steps"],
            Command::Excursions => &["mode", "theta", "y", "levels", "x_proxy", "window", "n", "dt", "occupation"],
            Command::Glue => {
                &["mode", "theta", "a_threshold", "horizon", "n_real", "x_proxy", "window", "start", "dt", "budget"]
            }
            Command::CramerLimit => &["theta", "y", "x", "n", "dt", "max_steps"],
            Command::Selftest => &["suite", "criteria"],
        }
    }

    /// Whether the command needs a model and a rate function.
    pub fn needs_model(self) -> bool {
        !matches!(self, Command::Selftest)
    }

    pub fn needs_rate(self) -> bool {
        !matches!(self, Command::Selftest | Command::CramerLimit)
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Command {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Command::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| format!("unknown command `{s}`"))
    }
}

/// A value with the line it came from (0 when set programmatically).
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Entry {
    pub line: usize,
    pub value: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub command: Command,
    pub model: Option<String>,
    pub rate: Option<String>,
    pub seed: u64,
    pub out_dir: PathBuf,
    pub params: BTreeMap<String, Entry>,
    /// Source lines of the experiment fields, for diagnostics.
    #[serde(skip)]
    lines: BTreeMap<&'static str, usize>,
}

impl ExperimentConfig {
    pub fn new(command: Command) -> Self {
        ExperimentConfig {
            command,
            model: None,
            rate: None,
            seed: 0,
            out_dir: default_out_dir(),
            params: BTreeMap::new(),
            lines: BTreeMap::new(),
        }
    }

    pub fn with_param(mut self, key: &str, value: impl Into<String>) -> Self {
        self.params.insert(key.to_string(), Entry { line: 0, value: value.into() });
        self
    }

    /// Line of an experiment field or parameter, 0 if unknown.
    pub fn line_of(&self, field: &str) -> usize {
        self.lines.get(field).copied().or_else(|| self.params.get(field).map(|e| e.line)).unwrap_or(0)
    }

    pub fn error(&self, field: &str, message: impl Into<String>) -> Error {
        Error::Config { line: self.line_of(field), field: field.to_string(), message: message.into() }
    }

    /// Rejects parameters the command does not know.
    pub fn validate(&self) -> Result<()> {
        let allowed = self.command.params();
        for (k, e) in &self.params {
            if !allowed.contains(&k.as_str()) {
                return Err(Error::Config {
                    line: e.line,
                    field: k.clone(),
                    message: format!("not a parameter of `{}` (expected one of {:?})", self.command, allowed),
                });
            }
        }
        if self.command.needs_model() && self.model.is_none() {
            return Err(self.error("model", "missing"));
        }
        if self.command.needs_rate() && self.rate.is_none() {
            return Err(self.error("rate", "missing"));
        }
        Ok(())
    }

    pub fn get<T: FromStr>(&self, key: &str, default: T) -> Result<T> {
        match self.params.get(key) {
            None => Ok(default),
            Some(e) => e.value.trim().parse().map_err(|_| self.error(key, format!("cannot parse `{}`", e.value))),
        }
    }

    pub fn get_opt<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.params.get(key) {
            None => Ok(None),
            Some(e) => e.value.trim().parse().map(Some).map_err(|_| self.error(key, format!("cannot parse `{}`", e.value))),
        }
    }

    pub fn get_list(&self, key: &str, default: &[f64]) -> Result<Vec<f64>> {
        match self.params.get(key) {
            None => Ok(default.to_vec()),
            Some(e) => e
                .value
                .split(',')
                .map(|v| v.trim().parse().map_err(|_| self.error(key, format!("`{}` is not a number", v.trim()))))
                .collect(),
        }
    }

    /// Canonical text: sorted, comment-free, independent of the source layout.
    pub fn canonical(&self) -> String {
        let mut s = String::from("[experiment]\n");
        s += &format!("command = {}\n", self.command);
        if let Some(m) = &self.model {
            s += &format!("model = {m}\n");
        }
        if let Some(r) = &self.rate {
            s += &format!("rate = {r}\n");
        }
        s += &format!("seed = {}\n", self.seed);
        s += "\n[params]\n";
        for (k, e) in &self.params {
            s += &format!("{k} = {}\n", e.value.trim());
        }
        s
    }
}

pub fn default_out_dir() -> PathBuf {
    std::env::var_os(OUT_DIR_ENV).map(PathBuf::from).unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR))
}

/// Parses a configuration file's text.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let mut section = None::<String>;
    let mut exp: BTreeMap<String, Entry> = BTreeMap::new();
    let mut params: BTreeMap<String, Entry> = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let t = raw.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        if let Some(rest) = t.strip_prefix('[') {
            let name = rest.strip_suffix(']').ok_or_else(|| Error::Config {
                line,
                field: t.to_string(),
                message: "unterminated section header".into(),
            })?;
            let name = name.trim();
            if name != "experiment" && name != "params" {
                return Err(Error::Config { line, field: name.to_string(), message: "unknown section".into() });
            }
            section = Some(name.to_string());
            continue;
        }
        let (k, v) = t.split_once('=').ok_or_else(|| Error::Config {
            line,
            field: t.to_string(),
            message: "expected `key = value`".into(),
        })?;
        let (k, v) = (k.trim().to_string(), v.trim().to_string());
        if k.is_empty() {
            return Err(Error::Config { line, field: k, message: "empty key".into() });
        }
        let target = match section.as_deref() {
            Some("experiment") => &mut exp,
            Some("params") => &mut params,
            _ => return Err(Error::Config { line, field: k, message: "key outside a section".into() }),
        };
        if target.insert(k.clone(), Entry { line, value: v }).is_some() {
            return Err(Error::Config { line, field: k, message: "duplicate key".into() });
        }
    }
    let command_entry = exp.remove("command").ok_or(Error::Config {
        line: 0,
        field: "command".into(),
        message: "missing in [experiment]".into(),
    })?;
    let command: Command = command_entry.value.parse().map_err(|m: String| Error::Config {
        line: command_entry.line,
        field: "command".into(),
        message: m,
    })?;
    let mut cfg = ExperimentConfig::new(command);
    cfg.lines.insert("command", command_entry.line);
    for (k, e) in exp {
        match k.as_str() {
            "model" => {
                cfg.lines.insert("model", e.line);
                cfg.model = Some(e.value);
            }
            "rate" => {
                cfg.lines.insert("rate", e.line);
                cfg.rate = Some(e.value);
            }
            "seed" => {
                cfg.lines.insert("seed", e.line);
                cfg.seed = e.value.parse().map_err(|_| Error::Config {
                    line: e.line,
                    field: "seed".into(),
                    message: format!("`{}` is not an unsigned integer", e.value),
                })?;
            }
            "out_dir" => {
                cfg.lines.insert("out_dir", e.line);
                cfg.out_dir = PathBuf::from(e.value);
            }
            _ => return Err(Error::Config { line: e.line, field: k, message: "unknown experiment field".into() }),
        }
    }
    cfg.params = params;
    cfg.validate()?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    const GOOD: &str = "# demo\n[experiment]\ncommand = speed\nmodel = brownian:a=-1,s2=1\nrate = max(1,x)^2\nseed = 3\n\n[params]\nt = 0.001, 0.01\nn = 100\n";

    #[test]
    fn parses_sections() {
        let c = parse_config(GOOD).unwrap();
        assert_eq!(c.command, Command::Speed);
        assert_eq!(c.seed, 3);
        assert_eq!(c.get_list("t", &[]).unwrap(), vec![0.001, 0.01]);
        assert_eq!(c.get::<usize>("n", 0).unwrap(), 100);
        assert_eq!(c.get::<f64>("dt", 0.5).unwrap(), 0.5);
        assert_eq!(c.line_of("n"), 10);
    }

    #[test]
    fn canonical_ignores_layout() {
        let a = parse_config(GOOD).unwrap();
        let b = parse_config(&GOOD.replace("# demo\n", "").replace("n = 100", "n=100")).unwrap();
        assert_eq!(a.canonical(), b.canonical());
    }

    #[test]
    fn diagnostics_carry_line_and_field() {
        let e = parse_config(&GOOD.replace("n = 100", "bogus = 1")).unwrap_err();
        assert!(matches!(e, Error::Config { line: 10, ref field, .. } if field == "bogus"), "{e}");
        let e = parse_config(&GOOD.replace("seed = 3", "seed = -3")).unwrap_err();
        assert!(matches!(e, Error::Config { line: 6, ref field, .. } if field == "seed"), "{e}");
        let e = parse_config("[experiment]\ncommand speed\n").unwrap_err();
        assert!(matches!(e, Error::Config { line: 2, .. }), "{e}");
        let e = parse_config("command = speed\n").unwrap_err();
        assert!(matches!(e, Error::Config { line: 1, .. }), "{e}");
        let e = parse_config("[experiment]\ncommand = fly\n").unwrap_err();
        assert!(matches!(e, Error::Config { line: 2, ref field, .. } if field == "command"), "{e}");
        let c = parse_config(&GOOD.replace("n = 100", "n = many")).unwrap();
        assert!(matches!(c.get::<usize>("n", 0), Err(Error::Config { line: 10, .. })));
    }
}
