use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dynamics::{RelaxationSide, DEFAULT_DT};
use crate::potential::PotentialSpec;
use crate::verify::Suite;

pub const DEFAULT_T_END: f64 = 10.0;
pub const DEFAULT_GAMMA: f64 = 1.0;
pub const DEFAULT_SEED: u64 = 42;
pub const DEFAULT_THETA: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Simulate,
    Verify,
    Legendre,
    SpinDemo,
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Command::Simulate => "simulate",
            Command::Verify => "verify",
            Command::Legendre => "legendre",
            Command::SpinDemo => "spin-demo",
        })
    }
}

/// A fully resolved invocation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub command: Command,
    pub potential: Option<PotentialSpec>,
    /// `gamma_1, gamma_2, ...` of `hhat`.
    pub profile: Vec<f64>,
    pub side: RelaxationSide,
    pub x0: Option<Vec<f64>>,
    pub p0: Option<Vec<f64>>,
    pub z0: f64,
    pub dt: f64,
    pub t_end: f64,
    pub out: Option<PathBuf>,
    pub seed: u64,
    pub suite: Suite,
    /// Query point of `legendre`.
    pub p: Option<Vec<f64>>,
    pub theta: f64,
}

/// Settings as they appear in a JSON config file or as flags; every field
/// is optional so that flags can be layered over a file.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartialConfig {
    #[serde(default)]
    pub potential: Option<PotentialSpec>,
    #[serde(default)]
    pub profile: Option<Vec<f64>>,
    #[serde(default)]
    pub side: Option<RelaxationSide>,
    #[serde(default)]
    pub x0: Option<Vec<f64>>,
    #[serde(default)]
    pub p0: Option<Vec<f64>>,
    #[serde(default)]
    pub z0: Option<f64>,
    #[serde(default)]
    pub dt: Option<f64>,
    #[serde(default)]
    pub t_end: Option<f64>,
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub suite: Option<String>,
    #[serde(default)]
    pub p: Option<Vec<f64>>,
    #[serde(default)]
    pub theta: Option<f64>,
}

impl PartialConfig {
    /// Fields of `over` replace those of `self` where present.
    pub fn overlay(self, over: PartialConfig) -> PartialConfig {
        PartialConfig {
            potential: over.potential.or(self.potential),
            profile: over.profile.or(self.profile),
            side: over.side.or(self.side),
            x0: over.x0.or(self.x0),
            p0: over.p0.or(self.p0),
            z0: over.z0.or(self.z0),
            dt: over.dt.or(self.dt),
            t_end: over.t_end.or(self.t_end),
            out: over.out.or(self.out),
            seed: over.seed.or(self.seed),
            suite: over.suite.or(self.suite),
            p: over.p.or(self.p),
            theta: over.theta.or(self.theta),
        }
    }
}

/// A problem with the invocation itself; maps to exit code 2.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> UsageError {
    UsageError(msg.into())
}

pub fn read_config_file(path: &Path) -> Result<PartialConfig, UsageError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| usage(format!("cannot read config `{}`: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| {
        usage(format!(
            "config `{}` line {} column {}: {e}",
            path.display(),
            e.line(),
            e.column()
        ))
    })
}

/// Merges an optional config file with flag values (flags win), applies
/// defaults and validates the result for `command`.
pub fn load_config(
    command: Command,
    file: Option<&Path>,
    flags: PartialConfig,
) -> Result<RunConfig, UsageError> {
    let base = match file {
        Some(path) => read_config_file(path)?,
        None => PartialConfig::default(),
    };
    resolve(command, base.overlay(flags))
}

pub fn resolve(command: Command, c: PartialConfig) -> Result<RunConfig, UsageError> {
    let suite = match c.suite.as_deref() {
        Some(s) => s.parse::<Suite>().map_err(|e| usage(e.to_string()))?,
        None => Suite::All,
    };
    let cfg = RunConfig {
        command,
        potential: c.potential,
        profile: c.profile.unwrap_or_else(|| vec![DEFAULT_GAMMA]),
        side: c.side.unwrap_or(RelaxationSide::Psi),
        x0: c.x0,
        p0: c.p0,
        z0: c.z0.unwrap_or(0.0),
        dt: c.dt.unwrap_or(DEFAULT_DT),
        t_end: c.t_end.unwrap_or(DEFAULT_T_END),
        out: c.out,
        seed: c.seed.unwrap_or(DEFAULT_SEED),
        suite,
        p: c.p,
        theta: c.theta.unwrap_or(DEFAULT_THETA),
    };
    cfg.validate()?;
    Ok(cfg)
}

fn finite(name: &str, vals: &[f64]) -> Result<(), UsageError> {
    if vals.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(usage(format!("`{name}` must be finite")))
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), UsageError> {
        finite("dt", &[self.dt])?;
        finite("t-end", &[self.t_end])?;
        finite("z0", &[self.z0])?;
        finite("theta", &[self.theta])?;
        finite("profile", &self.profile)?;
        for (name, v) in [("x0", &self.x0), ("p0", &self.p0), ("p", &self.p)] {
            if let Some(v) = v {
                finite(name, v)?;
            }
        }
        if !(self.dt > 0.0) {
            return Err(usage(format!("`dt` must be positive, got {}", self.dt)));
        }
        if !(self.t_end > 0.0) {
            return Err(usage(format!(
                "`t-end` must be positive, got {}",
                self.t_end
            )));
        }
        match self.profile.first() {
            None => return Err(usage("`profile` needs at least gamma_1")),
            Some(&g1) if g1 <= 0.0 => {
                return Err(usage(format!(
                    "profile gamma_1 = {g1} leaves the relaxation domain: the flow is defined only \
                     where hhat >= 0 and dhhat/dDelta > 0, which requires gamma_1 > 0"
                )))
            }
            Some(_) => {}
        }
        match self.command {
            Command::Simulate => {
                self.require_potential()?;
                if self.x0.is_none() || self.p0.is_none() {
                    return Err(usage("`simulate` needs `x0` and `p0`"));
                }
            }
            Command::Legendre => {
                self.require_potential()?;
                if self.p.is_none() {
                    return Err(usage("`legendre` needs `p`"));
                }
            }
            Command::SpinDemo => {
                if self.p0.as_ref().is_some_and(|p| p.len() != 1) {
                    return Err(usage("`spin-demo` takes a scalar `p0`"));
                }
                if self.profile.len() != 1 {
                    return Err(usage(
                        "`spin-demo` uses the linear profile `gamma:<g>` only",
                    ));
                }
            }
            Command::Verify => {}
        }
        Ok(())
    }

    fn require_potential(&self) -> Result<(), UsageError> {
        match &self.potential {
            Some(p) if !p.name.trim().is_empty() => Ok(()),
            _ => Err(usage(format!("`{}` needs a potential name", self.command))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flags_sim() -> PartialConfig {
        PartialConfig {
            potential: Some(PotentialSpec::named("spin")),
            x0: Some(vec![0.3]),
            p0: Some(vec![0.1]),
            ..Default::default()
        }
    }

    #[test]
    fn defaults_apply() {
        let c = resolve(Command::Simulate, flags_sim()).unwrap();
        assert_eq!(c.dt, 1e-3);
        assert_eq!(c.t_end, 10.0);
        assert_eq!(c.profile, vec![1.0]);
        assert_eq!(c.side, RelaxationSide::Psi);
    }

    #[test]
    fn flags_override_file_values() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        std::fs::write(
            &path,
            r#"{"dt": 0.01, "t_end": 2.0, "potential": {"name": "spin"}, "x0": [0], "p0": [0]}"#,
        )
        .unwrap();
        let flags = PartialConfig {
            dt: Some(0.002),
            ..Default::default()
        };
        let c = load_config(Command::Simulate, Some(&path), flags).unwrap();
        assert_eq!(c.dt, 0.002);
        assert_eq!(c.t_end, 2.0);
    }

    #[test]
    fn missing_potential_is_usage_error() {
        let mut f = flags_sim();
        f.potential = None;
        assert!(resolve(Command::Simulate, f).is_err());
    }

    #[test]
    fn nonpositive_gamma_cites_domain() {
        let mut f = flags_sim();
        f.profile = Some(vec![0.0]);
        let e = resolve(Command::Simulate, f).unwrap_err();
        assert!(e.0.contains("gamma_1 > 0"), "{e}");
    }

    #[test]
    fn malformed_file_reports_position() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.json");
        std::fs::write(&path, "{\n  \"dt\": 0.1,\n  \"bogus\": 1\n}").unwrap();
        let e = read_config_file(&path).unwrap_err();
        assert!(e.0.contains("line 3"), "{e}");
    }
}
