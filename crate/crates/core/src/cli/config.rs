//! Flat `key = value` run configuration.
//!
//! Lines are `key = value`; `#` starts a comment. Each subcommand has its own
//! defaults, a config file overrides them, and `--set key=value` overrides
//! the file. Unknown keys are rejected.

use std::collections::BTreeMap;
use std::fmt;

use sha2::{Digest, Sha256};

use super::{CliError, Command};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    Real,
    Count,
    List,
    /// Real number or the word `auto`.
    RealOrAuto,
}

const KEYS: &[(&str, Kind)] = &[
    ("alpha", Kind::Real),
    ("alpha_max", Kind::Real),
    ("alpha_min", Kind::Real),
    ("alpha_steps", Kind::Count),
    ("initial", Kind::Count),
    ("k_max", Kind::Count),
    ("mgf_s", Kind::List),
    ("n_eigs", Kind::Count),
    ("n_paths", Kind::Count),
    ("n_traj", Kind::Count),
    ("nex", Kind::Real),
    ("nex_list", Kind::List),
    ("nu", Kind::Real),
    ("rel_tol", Kind::Real),
    ("s", Kind::Real),
    ("s_max", Kind::Real),
    ("s_min", Kind::Real),
    ("s_steps", Kind::Count),
    ("s_window", Kind::Real),
    ("seed", Kind::Count),
    ("t_ensemble", Kind::Real),
    ("t_max", Kind::Real),
    ("tail_tol", Kind::Real),
    ("threshold", Kind::RealOrAuto),
    ("x_max", Kind::RealOrAuto),
    ("x_min", Kind::RealOrAuto),
    ("x_steps", Kind::Count),
];

fn defaults(command: Command) -> &'static [(&'static str, &'static str)] {
    match command {
        Command::Stationary => &[
            ("nex", "150"),
            ("alpha_min", "0.5"),
            ("alpha_max", "12"),
            ("alpha_steps", "116"),
            ("tail_tol", "1e-14"),
        ],
        Command::Potential => &[
            ("nex_list", "50,100,200"),
            ("alpha", "6.66"),
            ("x_min", "0"),
            ("x_max", "1.5"),
            ("x_steps", "151"),
            ("tail_tol", "1e-14"),
        ],
        Command::Trajectory => &[
            ("nex", "50"),
            ("alpha", "6.66"),
            ("t_max", "2000"),
            ("initial", "0"),
            ("n_paths", "3"),
            ("threshold", "auto"),
            ("n_traj", "0"),
            ("t_ensemble", "1"),
            ("mgf_s", "-0.5,0.5"),
            ("tail_tol", "1e-14"),
        ],
        Command::Grid => &[
            ("nex", "50"),
            ("alpha_min", "0.5"),
            ("alpha_max", "8"),
            ("alpha_steps", "41"),
            ("s_min", "-1"),
            ("s_max", "1"),
            ("s_steps", "41"),
        ],
        Command::Zoom => &[
            ("nex_list", "75,100,125"),
            ("alpha", "6.66"),
            ("s_min", "-0.01"),
            ("s_max", "0.01"),
            ("s_steps", "101"),
        ],
        Command::Spectrum => &[
            ("nex", "150"),
            ("alpha_min", "0.5"),
            ("alpha_max", "12"),
            ("alpha_steps", "116"),
            ("s", "0"),
            ("n_eigs", "10"),
        ],
        Command::Cumulants => &[
            ("nex_list", "50,100,150"),
            ("alpha_min", "0.5"),
            ("alpha_max", "12"),
            ("alpha_steps", "116"),
            ("k_max", "2"),
            ("tail_tol", "1e-14"),
        ],
        Command::Ldp => &[
            ("nex", "50"),
            ("alpha", "6.6"),
            ("s_window", "2"),
            ("x_min", "auto"),
            ("x_max", "auto"),
            ("x_steps", "101"),
        ],
        Command::Validate => &[],
    }
}

const COMMON: &[(&str, &str)] = &[("nu", "0.15"), ("rel_tol", "1e-12"), ("seed", "0")];

#[derive(Debug, Clone, PartialEq)]
enum Value {
    Real(f64),
    Count(u64),
    List(Vec<f64>),
    Auto,
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Real(x) => write!(f, "{}", super::output::real(*x)),
            Value::Count(n) => write!(f, "{n}"),
            Value::List(xs) => {
                let parts: Vec<String> = xs.iter().map(|x| super::output::real(*x)).collect();
                write!(f, "{}", parts.join(","))
            }
            Value::Auto => write!(f, "auto"),
        }
    }
}

fn kind_of(key: &str) -> Result<Kind, CliError> {
    KEYS.iter()
        .find(|(k, _)| *k == key)
        .map(|(_, kind)| *kind)
        .ok_or_else(|| CliError::Usage(format!("unknown configuration key `{key}`")))
}

fn parse_real(key: &str, raw: &str) -> Result<f64, CliError> {
    let x: f64 = raw
        .parse()
        .map_err(|_| CliError::Usage(format!("`{key}`: `{raw}` is not a number")))?;
    if !x.is_finite() {
        return Err(CliError::Usage(format!("`{key}` must be finite")));
    }
    Ok(x)
}

fn parse_value(key: &str, raw: &str) -> Result<Value, CliError> {
    let raw = raw.trim();
    match kind_of(key)? {
        Kind::Real => parse_real(key, raw).map(Value::Real),
        Kind::Count => raw.parse().map(Value::Count).map_err(|_| {
            CliError::Usage(format!("`{key}`: `{raw}` is not a non-negative integer"))
        }),
        Kind::List => raw
            .split(',')
            .map(|p| parse_real(key, p.trim()))
            .collect::<Result<Vec<_>, _>>()
            .map(Value::List),
        Kind::RealOrAuto if raw == "auto" => Ok(Value::Auto),
        Kind::RealOrAuto => parse_real(key, raw).map(Value::Real),
    }
}

/// Evenly spaced grid; a single step yields `[min]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub min: f64,
    pub max: f64,
    pub steps: usize,
}

impl GridSpec {
    pub fn points(&self) -> Vec<f64> {
        if self.steps == 1 {
            return vec![self.min];
        }
        let last = (self.steps - 1) as f64;
        (0..self.steps)
            .map(|i| {
                if i + 1 == self.steps {
                    self.max
                } else {
                    self.min + (self.max - self.min) * i as f64 / last
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    values: BTreeMap<String, Value>,
}

impl RunConfig {
    /// Defaults for `command`, then `file` contents, then `overrides`.
    pub fn load(
        command: Command,
        file: Option<&str>,
        overrides: &[String],
    ) -> Result<Self, CliError> {
        let mut cfg = Self {
            command,
            values: BTreeMap::new(),
        };
        for (k, v) in COMMON.iter().chain(defaults(command)) {
            cfg.set(k, v)?;
        }
        if let Some(text) = file {
            for (lineno, line) in text.lines().enumerate() {
                let line = line.split('#').next().unwrap_or("").trim();
                if line.is_empty() {
                    continue;
                }
                let (k, v) = line.split_once('=').ok_or_else(|| {
                    CliError::Usage(format!(
                        "config line {}: expected `key = value`",
                        lineno + 1
                    ))
                })?;
                cfg.set(k.trim(), v)?;
            }
        }
        for o in overrides {
            let (k, v) = o
                .split_once('=')
                .ok_or_else(|| CliError::Usage(format!("--set `{o}`: expected key=value")))?;
            cfg.set(k.trim(), v)?;
        }
        cfg.check()?;
        Ok(cfg)
    }

    pub fn set(&mut self, key: &str, raw: &str) -> Result<(), CliError> {
        let v = parse_value(key, raw)?;
        self.values.insert(key.to_string(), v);
        Ok(())
    }

    fn get(&self, key: &str) -> Result<&Value, CliError> {
        self.values
            .get(key)
            .ok_or_else(|| CliError::Usage(format!("`{key}` is not used by `{}`", self.command)))
    }

    pub fn real(&self, key: &str) -> Result<f64, CliError> {
        match self.get(key)? {
            Value::Real(x) => Ok(*x),
            _ => Err(CliError::Usage(format!("`{key}` is not a number"))),
        }
    }

    pub fn count(&self, key: &str) -> Result<u64, CliError> {
        match self.get(key)? {
            Value::Count(n) => Ok(*n),
            _ => Err(CliError::Usage(format!("`{key}` is not an integer"))),
        }
    }

    pub fn list(&self, key: &str) -> Result<Vec<f64>, CliError> {
        match self.get(key)? {
            Value::List(xs) => Ok(xs.clone()),
            _ => Err(CliError::Usage(format!("`{key}` is not a list"))),
        }
    }

    /// `None` for `auto`.
    pub fn real_or_auto(&self, key: &str) -> Result<Option<f64>, CliError> {
        match self.get(key)? {
            Value::Real(x) => Ok(Some(*x)),
            Value::Auto => Ok(None),
            _ => Err(CliError::Usage(format!("`{key}` is not a number"))),
        }
    }

    pub fn grid(&self, prefix: &str) -> Result<GridSpec, CliError> {
        let g = GridSpec {
            min: self.real(&format!("{prefix}_min"))?,
            max: self.real(&format!("{prefix}_max"))?,
            steps: self.count(&format!("{prefix}_steps"))? as usize,
        };
        Ok(g)
    }

    fn check(&self) -> Result<(), CliError> {
        for prefix in ["alpha", "s"] {
            if self.values.contains_key(&format!("{prefix}_min")) {
                let g = self.grid(prefix)?;
                if g.steps < 1 || g.min > g.max {
                    return Err(CliError::Usage(format!(
                        "{prefix} grid needs min <= max and at least one step"
                    )));
                }
            }
        }
        if let Some(Value::List(xs)) = self.values.get("nex_list") {
            if xs.is_empty() {
                return Err(CliError::Usage("nex_list is empty".into()));
            }
        }
        if let (Ok(Some(a)), Ok(Some(b))) = (self.real_or_auto("x_min"), self.real_or_auto("x_max"))
        {
            if a > b {
                return Err(CliError::Usage("x_min must not exceed x_max".into()));
            }
        }
        if matches!(self.values.get("x_steps"), Some(Value::Count(0))) {
            return Err(CliError::Usage("x_steps must be at least 1".into()));
        }
        Ok(())
    }

    /// Canonical text form: `command = ...` then keys in sorted order. It
    /// parses back to the same configuration.
    pub fn to_config_string(&self) -> String {
        let mut out = format!("# command = {}\n", self.command);
        for (k, v) in &self.values {
            out.push_str(&format!("{k} = {v}\n"));
        }
        out
    }

    /// SHA-256 of the canonical text, hex encoded.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_config_string().as_bytes()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_and_overrides_layer_on_defaults() {
        let file = "nex = 10 # comment\n\n# only a comment\nalpha_steps=3\n";
        let cfg = RunConfig::load(Command::Grid, Some(file), &["s_steps=3".into()]).unwrap();
        assert_eq!(cfg.real("nex").unwrap(), 10.0);
        assert_eq!(cfg.count("alpha_steps").unwrap(), 3);
        assert_eq!(cfg.count("s_steps").unwrap(), 3);
        assert_eq!(cfg.real("nu").unwrap(), 0.15);
    }

    #[test]
    fn canonical_form_round_trips() {
        let over = [
            "nu=0.1".to_string(),
            "alpha_min=0.30000000000000004".into(),
            "s_max=1e-300".into(),
        ];
        let a = RunConfig::load(Command::Grid, None, &over).unwrap();
        let text = a.to_config_string();
        let b = RunConfig::load(Command::Grid, Some(&text), &[]).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.hash(), b.hash());
        assert_eq!(b.real("alpha_min").unwrap(), 0.30000000000000004);
        assert_eq!(b.real("s_max").unwrap(), 1e-300);
    }

    #[test]
    fn bad_input_is_a_usage_error() {
        for o in [
            "bogus=1",
            "nex=abc",
            "alpha_steps=-1",
            "nex=inf",
            "alpha_min=9",
            "noequals",
        ] {
            assert!(
                matches!(
                    RunConfig::load(Command::Grid, None, &[o.into()]),
                    Err(CliError::Usage(_))
                ),
                "{o}"
            );
        }
        assert!(RunConfig::load(Command::Grid, Some("nex 3"), &[]).is_err());
    }

    #[test]
    fn grid_points() {
        let g = GridSpec {
            min: 0.0,
            max: 1.0,
            steps: 3,
        };
        assert_eq!(g.points(), vec![0.0, 0.5, 1.0]);
        let one = GridSpec {
            min: 2.0,
            max: 5.0,
            steps: 1,
        };
        assert_eq!(one.points(), vec![2.0]);
    }
}
