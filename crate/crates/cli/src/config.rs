//! Experiment configuration: `key = value` files merged with command-line
//! overrides, then validated against the keys each scenario needs.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use covertsim::insertion::Sampling;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scenario {
    Kl,
    Detect,
    Sqrtlaw,
    Buffering,
    Walk,
    Timing,
    E2e,
}

impl Scenario {
    pub const ALL: [Scenario; 7] = [
        Scenario::Kl,
        Scenario::Detect,
        Scenario::Sqrtlaw,
        Scenario::Buffering,
        Scenario::Walk,
        Scenario::Timing,
        Scenario::E2e,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::Kl => "kl",
            Scenario::Detect => "detect",
            Scenario::Sqrtlaw => "sqrtlaw",
            Scenario::Buffering => "buffering",
            Scenario::Walk => "walk",
            Scenario::Timing => "timing",
            Scenario::E2e => "e2e",
        }
    }

    fn required(self) -> &'static [&'static str] {
        match self {
            Scenario::Kl => &["lambda", "T", "epsilon"],
            Scenario::Detect => &["lambda", "T", "trials", "seed"],
            Scenario::Sqrtlaw => &["lambda", "T", "epsilon", "trials", "seed"],
            Scenario::Buffering => &["lambda", "T", "epsilon", "trials", "seed"],
            Scenario::Walk => &["m", "steps", "trials", "seed"],
            Scenario::Timing => &["lambda", "mu", "T", "epsilon", "zeta"],
            Scenario::E2e => &[
                "lambda", "mu", "T", "epsilon", "zeta", "M", "trials", "seed",
            ],
        }
    }

    fn optional(self) -> &'static [&'static str] {
        match self {
            Scenario::Detect => &["alpha", "schedule", "epsilon", "sampling"],
            Scenario::Sqrtlaw => &["alpha", "sampling"],
            _ => &[],
        }
    }

    fn accepts(self, key: &str) -> bool {
        matches!(key, "scenario" | "out")
            || self.required().contains(&key)
            || self.optional().contains(&key)
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scenario {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            // the insertion experiment is the square-root-law sweep
            "insertion" => Ok(Scenario::Sqrtlaw),
            _ => Scenario::ALL
                .into_iter()
                .find(|sc| sc.name() == s)
                .ok_or_else(|| format!("unknown scenario `{s}`")),
        }
    }
}

/// How much covert traffic the `detect` scenario inserts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Schedule {
    /// `Δ·T = 4 (λT)^{3/4}`, more than the covert budget allows.
    #[default]
    Overload,
    /// The covert budget `Δ·T = ε sqrt(2λT)`.
    Budget,
}

#[derive(Debug, Error, PartialEq)]
pub enum ConfigIssue {
    #[error("unknown key `{key}`{}", .line.map(|l| format!(" (line {l})")).unwrap_or_default())]
    UnknownKey { key: String, line: Option<usize> },
    #[error("key `{key}` is not used by scenario `{scenario}`")]
    UnusedKey { key: String, scenario: Scenario },
    #[error("missing required key `{key}` for scenario `{scenario}`")]
    MissingKey { key: String, scenario: Scenario },
    #[error("invalid value for `{key}`: {reason}")]
    Range { key: String, reason: String },
    #[error("line {line}: {reason}")]
    Syntax { line: usize, reason: String },
    #[error("duplicate key `{key}` (line {line})")]
    Duplicate { key: String, line: usize },
    #[error("missing scenario: give a subcommand or a `scenario` key")]
    NoScenario,
    #[error("cannot read config file {path}: {reason}")]
    Unreadable { path: PathBuf, reason: String },
}

/// Every problem found in a configuration.
#[derive(Debug, Error, PartialEq)]
pub struct ConfigError(pub Vec<ConfigIssue>);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, issue) in self.0.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{issue}")?;
        }
        Ok(())
    }
}

impl ConfigError {
    /// True when some issue mentions `key`.
    pub fn names(&self, key: &str) -> bool {
        self.0.iter().any(|issue| match issue {
            ConfigIssue::UnknownKey { key: k, .. }
            | ConfigIssue::UnusedKey { key: k, .. }
            | ConfigIssue::MissingKey { key: k, .. }
            | ConfigIssue::Range { key: k, .. }
            | ConfigIssue::Duplicate { key: k, .. } => k == key,
            _ => false,
        })
    }
}

/// Every key a config file or flag may set.
pub const KEYS: [&str; 15] = [
    "scenario", "lambda", "mu", "T", "epsilon", "zeta", "alpha", "trials", "M", "seed", "m",
    "steps", "schedule", "sampling", "out",
];

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub scenario: Scenario,
    pub lambda: f64,
    pub mu: f64,
    pub horizons: Vec<f64>,
    pub epsilon: f64,
    pub zeta: f64,
    pub alpha: f64,
    pub trials: usize,
    /// Codebook size M.
    pub codebook_size: usize,
    pub seed: u64,
    /// Walk barrier offset.
    pub m: u64,
    pub steps: u64,
    pub schedule: Schedule,
    pub sampling: Sampling,
    pub output_path: Option<PathBuf>,
}

/// Raw `key -> value` pairs, later sources overriding earlier ones.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RawConfig {
    values: BTreeMap<String, String>,
}

impl RawConfig {
    /// Parses `key = value` lines. Blank lines and `#` comments are skipped.
    pub fn parse_str(text: &str) -> Result<Self, ConfigError> {
        let mut values = BTreeMap::new();
        let mut issues = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let Some((key, value)) = content.split_once('=') else {
                issues.push(ConfigIssue::Syntax {
                    line,
                    reason: format!("expected `key = value`, got `{content}`"),
                });
                continue;
            };
            let (key, value) = (key.trim(), value.trim());
            if !KEYS.contains(&key) {
                issues.push(ConfigIssue::UnknownKey {
                    key: key.to_string(),
                    line: Some(line),
                });
            } else if values.insert(key.to_string(), value.to_string()).is_some() {
                issues.push(ConfigIssue::Duplicate {
                    key: key.to_string(),
                    line,
                });
            }
        }
        if issues.is_empty() {
            Ok(Self { values })
        } else {
            Err(ConfigError(issues))
        }
    }

    pub fn read(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            ConfigError(vec![ConfigIssue::Unreadable {
                path: path.to_path_buf(),
                reason: e.to_string(),
            }])
        })?;
        Self::parse_str(&text)
    }

    /// Sets `key`, replacing any value from the file.
    pub fn set(&mut self, key: &str, value: impl Into<String>) {
        self.values.insert(key.to_string(), value.into());
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }
}

/// Merges `file` with `overrides` (which win) and validates the result for
/// `scenario`, or for the file's `scenario` key when none is given.
pub fn parse_config(
    file: Option<&Path>,
    overrides: &[(&str, String)],
    scenario: Option<Scenario>,
) -> Result<ExperimentConfig, ConfigError> {
    let mut raw = match file {
        Some(path) => RawConfig::read(path)?,
        None => RawConfig::default(),
    };
    let mut issues = Vec::new();
    for (key, value) in overrides {
        if KEYS.contains(key) {
            raw.set(key, value.clone());
        } else {
            issues.push(ConfigIssue::UnknownKey {
                key: key.to_string(),
                line: None,
            });
        }
    }
    if let Some(sc) = scenario {
        raw.set("scenario", sc.name());
    }
    if !issues.is_empty() {
        return Err(ConfigError(issues));
    }
    validate(&raw)
}

/// Typed, range-checked configuration from raw values.
pub fn validate(raw: &RawConfig) -> Result<ExperimentConfig, ConfigError> {
    let scenario = match raw.get("scenario") {
        None => return Err(ConfigError(vec![ConfigIssue::NoScenario])),
        Some(s) => s.parse::<Scenario>().map_err(|reason| {
            ConfigError(vec![ConfigIssue::Range {
                key: "scenario".into(),
                reason,
            }])
        })?,
    };
    let mut v = Validator {
        raw,
        scenario,
        issues: Vec::new(),
    };
    for key in raw.values.keys() {
        if !scenario.accepts(key) {
            v.issues.push(ConfigIssue::UnusedKey {
                key: key.clone(),
                scenario,
            });
        }
    }
    for key in scenario.required() {
        if raw.get(key).is_none() {
            v.issues.push(ConfigIssue::MissingKey {
                key: key.to_string(),
                scenario,
            });
        }
    }

    let lambda = v.number(
        "lambda",
        f64::NAN,
        |x| x > 0.0 && x.is_finite(),
        "must be positive",
    );
    let mu = v.number(
        "mu",
        f64::NAN,
        |x| x > 0.0 && x.is_finite(),
        "must be positive",
    );
    if raw.get("mu").is_some() && mu.is_finite() && lambda.is_finite() && mu <= lambda {
        v.range("mu", format!("must exceed lambda = {lambda}, got {mu}"));
    }
    let horizons = v.horizons();
    let epsilon = v.number("epsilon", f64::NAN, unit_open, "must lie in (0, 1)");
    let zeta = v.number("zeta", f64::NAN, unit_open, "must lie in (0, 1)");
    let alpha = v.number("alpha", 0.05, unit_open, "must lie in (0, 1)");
    let trials = v.integer("trials", 0, 1) as usize;
    let codebook_size = v.integer("M", 0, 1) as usize;
    let seed = v.integer("seed", 0, 0);
    let m = v.integer("m", 0, 0);
    let steps = v.integer("steps", 0, 1);
    let schedule = v.choice(
        "schedule",
        Schedule::Overload,
        &[
            ("overload", Schedule::Overload),
            ("budget", Schedule::Budget),
        ],
    );
    let sampling = v.choice(
        "sampling",
        Sampling::Counts,
        &[("counts", Sampling::Counts), ("traces", Sampling::Traces)],
    );
    if scenario == Scenario::Detect && schedule == Schedule::Budget && raw.get("epsilon").is_none()
    {
        v.issues.push(ConfigIssue::MissingKey {
            key: "epsilon".into(),
            scenario,
        });
    }
    if matches!(scenario, Scenario::Timing | Scenario::E2e) && horizons.len() > 1 {
        v.range("T", format!("scenario `{scenario}` takes a single horizon"));
    }
    let output_path = raw.get("out").map(PathBuf::from);

    if !v.issues.is_empty() {
        return Err(ConfigError(v.issues));
    }
    Ok(ExperimentConfig {
        scenario,
        lambda,
        mu,
        horizons,
        epsilon,
        zeta,
        alpha,
        trials,
        codebook_size,
        seed,
        m,
        steps,
        schedule,
        sampling,
        output_path,
    })
}

fn unit_open(x: f64) -> bool {
    x > 0.0 && x < 1.0
}

struct Validator<'a> {
    raw: &'a RawConfig,
    scenario: Scenario,
    issues: Vec<ConfigIssue>,
}

impl<'a> Validator<'a> {
    fn range(&mut self, key: &str, reason: String) {
        self.issues.push(ConfigIssue::Range {
            key: key.into(),
            reason,
        });
    }

    fn present(&self, key: &str) -> Option<&'a str> {
        // keys the scenario ignores were already reported
        let raw: &'a RawConfig = self.raw;
        raw.get(key).filter(|_| self.scenario.accepts(key))
    }

    fn number(&mut self, key: &str, default: f64, ok: impl Fn(f64) -> bool, rule: &str) -> f64 {
        let Some(text) = self.present(key) else {
            return default;
        };
        match text.parse::<f64>() {
            Ok(x) if ok(x) => x,
            Ok(x) => {
                self.range(key, format!("{rule}, got {x}"));
                default
            }
            Err(_) => {
                self.range(key, format!("`{text}` is not a number"));
                default
            }
        }
    }

    fn integer(&mut self, key: &str, default: u64, min: u64) -> u64 {
        let Some(text) = self.present(key) else {
            return default;
        };
        match text.parse::<u64>() {
            Ok(n) if n >= min => n,
            Ok(n) => {
                self.range(key, format!("must be at least {min}, got {n}"));
                default
            }
            Err(_) => {
                self.range(key, format!("`{text}` is not a nonnegative integer"));
                default
            }
        }
    }

    fn horizons(&mut self) -> Vec<f64> {
        let Some(text) = self.present("T") else {
            return Vec::new();
        };
        let mut out = Vec::new();
        for part in text.split(',') {
            match part.trim().parse::<f64>() {
                Ok(t) if t > 0.0 && t.is_finite() => out.push(t),
                Ok(t) => self.range("T", format!("horizons must be positive, got {t}")),
                Err(_) => self.range("T", format!("`{}` is not a number", part.trim())),
            }
        }
        out
    }

    fn choice<T: Copy>(&mut self, key: &str, default: T, options: &[(&str, T)]) -> T {
        let Some(text) = self.present(key) else {
            return default;
        };
        match options.iter().find(|(name, _)| *name == text) {
            Some(&(_, value)) => value,
            None => {
                let names: Vec<&str> = options.iter().map(|(n, _)| *n).collect();
                self.range(
                    key,
                    format!("expected one of {}, got `{text}`", names.join(", ")),
                );
                default
            }
        }
    }
}
