//! Run configuration: a TOML document read into typed values, with every
//! error naming the offending key.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use thiserror::Error;
use toml::{Table, Value};

use crate::basis::BasisSpec;
use crate::evolution::{IntegratorConfig, Method};
use crate::operators::PotentialSpec;
use crate::params::PhysParams;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("syntax error: {0}")]
    Syntax(String),

    #[error("{location}key `{key}`: {reason}")]
    Key {
        key: String,
        location: Location,
        reason: String,
    },

    #[error("invalid override `{0}`: expected key=value")]
    Override(String),
}

/// Where a bad value came from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Location {
    Unknown,
    Line(usize),
    Override,
}

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Location::Unknown => Ok(()),
            Location::Line(n) => write!(f, "line {n}: "),
            Location::Override => write!(f, "--override: "),
        }
    }
}

type Result<T> = std::result::Result<T, ConfigError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scenario {
    Violate,
    Positive,
    Stationary,
    FreeParticleConsistency,
    RecoillessTrace,
    EtaCrossRep,
    ChoiAudit,
    MicrobathCompare,
    JoltCompare,
}

impl Scenario {
    pub const ALL: [Scenario; 9] = [
        Scenario::Violate,
        Scenario::Positive,
        Scenario::Stationary,
        Scenario::FreeParticleConsistency,
        Scenario::RecoillessTrace,
        Scenario::EtaCrossRep,
        Scenario::ChoiAudit,
        Scenario::MicrobathCompare,
        Scenario::JoltCompare,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::Violate => "violate",
            Scenario::Positive => "positive",
            Scenario::Stationary => "stationary",
            Scenario::FreeParticleConsistency => "freeparticle-consistency",
            Scenario::RecoillessTrace => "recoilless-trace",
            Scenario::EtaCrossRep => "eta-crossrep",
            Scenario::ChoiAudit => "choi-audit",
            Scenario::MicrobathCompare => "microbath-compare",
            Scenario::JoltCompare => "jolt-compare",
        }
    }

    /// The preset configuration shipped with the binary.
    pub fn preset(self) -> &'static str {
        match self {
            Scenario::Violate => include_str!("../../presets/violate.toml"),
            Scenario::Positive => include_str!("../../presets/positive.toml"),
            Scenario::Stationary => include_str!("../../presets/stationary.toml"),
            Scenario::FreeParticleConsistency => {
                include_str!("../../presets/freeparticle-consistency.toml")
            }
            Scenario::RecoillessTrace => include_str!("../../presets/recoilless-trace.toml"),
            Scenario::EtaCrossRep => include_str!("../../presets/eta-crossrep.toml"),
            Scenario::ChoiAudit => include_str!("../../presets/choi-audit.toml"),
            Scenario::MicrobathCompare => include_str!("../../presets/microbath-compare.toml"),
            Scenario::JoltCompare => include_str!("../../presets/jolt-compare.toml"),
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scenario {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Scenario::ALL
            .into_iter()
            .find(|sc| sc.name() == s)
            .ok_or_else(|| {
                let names: Vec<_> = Scenario::ALL.iter().map(|s| s.name()).collect();
                format!(
                    "unknown scenario `{s}`; valid scenarios: {}",
                    names.join(", ")
                )
            })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum InitialState {
    Gaussian {
        mean_q: f64,
        mean_p: f64,
        var_q: f64,
        squeeze: f64,
        /// Covariance scale factor, `1` for a pure state.
        mixing: f64,
    },
    Canonical,
    Fock {
        n: usize,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct BathConfig {
    pub n_modes: usize,
    pub per_mode_dim: usize,
    /// Time of the exact vs. reduced-model comparison.
    pub t_compare: f64,
    /// Sample spacing of the early-time purity record.
    pub dt: f64,
    /// Length of the early-time window.
    pub window: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChoiConfig {
    pub times: Vec<f64>,
    pub strengths: Vec<f64>,
    pub grid: BasisSpec,
}

/// Scenario-specific sections.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Extras {
    pub crossrep_grid: Option<BasisSpec>,
    pub choi: Option<ChoiConfig>,
    pub bath: Option<BathConfig>,
    pub convergence: bool,
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub scenario: Scenario,
    pub basis: BasisSpec,
    pub params: PhysParams,
    pub potential: PotentialSpec,
    pub initial_state: InitialState,
    pub integrator: IntegratorConfig,
    pub output: Option<PathBuf>,
    pub extras: Extras,
}

impl RunConfig {
    /// Parses `src`, applies `overrides` (last wins) and validates
    /// everything before returning.
    pub fn parse(src: &str, overrides: &[String]) -> Result<Self> {
        let mut table: Table = src
            .parse()
            .map_err(|e: toml::de::Error| ConfigError::Syntax(e.to_string()))?;
        let mut overridden = Vec::new();
        for o in overrides {
            let (key, value) = parse_override(o)?;
            set_path(&mut table, &key, value).map_err(|reason| ConfigError::Key {
                key: key.clone(),
                location: Location::Override,
                reason,
            })?;
            overridden.push(key);
        }
        Reader {
            table: &table,
            src,
            overridden: &overridden,
        }
        .run_config()
    }

    pub fn preset(scenario: Scenario, overrides: &[String]) -> Result<Self> {
        Self::parse(scenario.preset(), overrides)
    }
}

/// `key=value`, with the value read as a TOML literal and falling back to
/// a bare string.
pub fn parse_override(s: &str) -> Result<(String, Value)> {
    let (key, raw) = s
        .split_once('=')
        .ok_or_else(|| ConfigError::Override(s.to_string()))?;
    let key = key.trim();
    if key.is_empty() || key.split('.').any(str::is_empty) {
        return Err(ConfigError::Override(s.to_string()));
    }
    let raw = raw.trim();
    let value = format!("v = {raw}")
        .parse::<Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(raw.to_string()));
    Ok((key.to_string(), value))
}

fn set_path(table: &mut Table, key: &str, value: Value) -> std::result::Result<(), String> {
    let mut parts: Vec<&str> = key.split('.').collect();
    let last = parts.pop().unwrap_or(key);
    let mut t = table;
    for (i, p) in parts.iter().enumerate() {
        let entry = t
            .entry(p.to_string())
            .or_insert_with(|| Value::Table(Table::new()));
        t = entry
            .as_table_mut()
            .ok_or_else(|| format!("`{}` is not a table", parts[..=i].join(".")))?;
    }
    t.insert(last.to_string(), value);
    Ok(())
}

/// 1-based line of `key` in `src`, under its `[section]` header or as a
/// dotted key.
fn find_line(src: &str, key: &str) -> Option<usize> {
    let (section, leaf) = match key.rsplit_once('.') {
        Some((s, l)) => (s, l),
        None => ("", key),
    };
    let defines = |line: &str, name: &str| {
        line.strip_prefix(name)
            .map(|rest| rest.trim_start().starts_with('='))
            .unwrap_or(false)
    };
    let mut current = String::new();
    for (i, raw) in src.lines().enumerate() {
        let line = raw.trim();
        if let Some(h) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            current = h.trim().to_string();
            continue;
        }
        if (current == section && defines(line, leaf)) || (current.is_empty() && defines(line, key))
        {
            return Some(i + 1);
        }
    }
    None
}

struct Reader<'a> {
    table: &'a Table,
    src: &'a str,
    overridden: &'a [String],
}

impl Reader<'_> {
    fn get(&self, key: &str) -> Option<&Value> {
        let mut parts = key.split('.');
        let mut v = self.table.get(parts.next()?)?;
        for p in parts {
            v = v.as_table()?.get(p)?;
        }
        Some(v)
    }

    fn err(&self, key: &str, reason: impl Into<String>) -> ConfigError {
        let location = if self.overridden.iter().any(|k| k == key) {
            Location::Override
        } else {
            find_line(self.src, key).map_or(Location::Unknown, Location::Line)
        };
        ConfigError::Key {
            key: key.to_string(),
            location,
            reason: reason.into(),
        }
    }

    fn opt_f64(&self, key: &str) -> Result<Option<f64>> {
        match self.get(key) {
            None => Ok(None),
            Some(Value::Float(x)) => Ok(Some(*x)),
            Some(Value::Integer(n)) => Ok(Some(*n as f64)),
            Some(v) => Err(self.err(key, format!("expected a number, got {}", v.type_str()))),
        }
    }

    fn f64(&self, key: &str) -> Result<f64> {
        self.opt_f64(key)?.ok_or_else(|| self.err(key, "missing"))
    }

    fn f64_or(&self, key: &str, default: f64) -> Result<f64> {
        Ok(self.opt_f64(key)?.unwrap_or(default))
    }

    fn positive(&self, key: &str, x: f64) -> Result<f64> {
        if x.is_finite() && x > 0.0 {
            Ok(x)
        } else {
            Err(self.err(key, format!("must be finite and > 0, got {x}")))
        }
    }

    fn opt_usize(&self, key: &str) -> Result<Option<usize>> {
        match self.get(key) {
            None => Ok(None),
            Some(Value::Integer(n)) if *n >= 0 => Ok(Some(*n as usize)),
            Some(v) => Err(self.err(key, format!("expected a non-negative integer, got {v}"))),
        }
    }

    fn usize(&self, key: &str) -> Result<usize> {
        self.opt_usize(key)?.ok_or_else(|| self.err(key, "missing"))
    }

    fn opt_str(&self, key: &str) -> Result<Option<&str>> {
        match self.get(key) {
            None => Ok(None),
            Some(Value::String(s)) => Ok(Some(s)),
            Some(v) => Err(self.err(key, format!("expected a string, got {}", v.type_str()))),
        }
    }

    fn bool_or(&self, key: &str, default: bool) -> Result<bool> {
        match self.get(key) {
            None => Ok(default),
            Some(Value::Boolean(b)) => Ok(*b),
            Some(v) => Err(self.err(key, format!("expected true or false, got {}", v.type_str()))),
        }
    }

    fn opt_f64_list(&self, key: &str) -> Result<Option<Vec<f64>>> {
        let Some(v) = self.get(key) else {
            return Ok(None);
        };
        let arr = v
            .as_array()
            .ok_or_else(|| self.err(key, format!("expected an array, got {}", v.type_str())))?;
        arr.iter()
            .map(|x| match x {
                Value::Float(f) => Ok(*f),
                Value::Integer(n) => Ok(*n as f64),
                other => Err(self.err(key, format!("expected numbers, found {other}"))),
            })
            .collect::<Result<_>>()
            .map(Some)
    }

    fn run_config(&self) -> Result<RunConfig> {
        let name = self
            .opt_str("scenario")?
            .ok_or_else(|| self.err("scenario", "missing"))?;
        let scenario: Scenario = name.parse().map_err(|e: String| self.err("scenario", e))?;
        let basis = self.basis("basis")?;
        let params = self.params()?;
        let potential = self.potential()?;
        let initial_state = self.initial_state(&basis)?;
        let integrator = self.integrator(&basis)?;
        let output = self.opt_str("output.dir")?.map(PathBuf::from);
        let extras = self.extras(scenario)?;
        Ok(RunConfig {
            scenario,
            basis,
            params,
            potential,
            initial_state,
            integrator,
            output,
            extras,
        })
    }

    fn basis(&self, section: &str) -> Result<BasisSpec> {
        let key = |k: &str| format!("{section}.{k}");
        let kind = self
            .opt_str(&key("kind"))?
            .ok_or_else(|| self.err(&key("kind"), "missing"))?;
        let spec = match kind {
            "fock" => BasisSpec::Fock {
                dim: self.usize(&key("dim"))?,
                omega_ref: self.f64_or(&key("omega_ref"), 1.0)?,
            },
            "grid" => BasisSpec::Grid {
                x_min: self.f64(&key("x_min"))?,
                x_max: self.f64(&key("x_max"))?,
                n: self.usize(&key("n"))?,
            },
            other => {
                return Err(self.err(
                    &key("kind"),
                    format!("expected fock or grid, got {other:?}"),
                ))
            }
        };
        spec.validate()
            .map_err(|e| self.err(section, e.to_string()))?;
        Ok(spec)
    }

    fn params(&self) -> Result<PhysParams> {
        let mut v = [0.0; 5];
        for (slot, k) in v.iter_mut().zip(["hbar", "k", "m", "T", "omega_max"]) {
            let key = format!("params.{k}");
            *slot = self.positive(&key, self.f64(&key)?)?;
        }
        let coupling = self.f64("params.C")?;
        if !(coupling.is_finite() && coupling >= 0.0) {
            return Err(self.err(
                "params.C",
                format!("must be finite and >= 0, got {coupling}"),
            ));
        }
        PhysParams::new(v[0], v[1], v[2], v[3], coupling, v[4])
            .map_err(|e| self.err("params", e.to_string()))
    }

    fn potential(&self) -> Result<PotentialSpec> {
        let spec = PotentialSpec {
            coefficients: self
                .opt_f64_list("potential.coefficients")?
                .unwrap_or_default(),
            recoilless: self.bool_or("potential.recoilless", false)?,
        };
        spec.validate()
            .map_err(|e| self.err("potential.coefficients", e.to_string()))?;
        Ok(spec)
    }

    fn initial_state(&self, basis: &BasisSpec) -> Result<InitialState> {
        let kind = self
            .opt_str("initial_state.kind")?
            .ok_or_else(|| self.err("initial_state.kind", "missing"))?;
        match kind {
            "gaussian" => {
                let var_q = self.f64("initial_state.var_q")?;
                let mixing = self.f64_or("initial_state.mixing", 1.0)?;
                if !(mixing >= 1.0) {
                    return Err(self.err(
                        "initial_state.mixing",
                        format!("must be >= 1, got {mixing}"),
                    ));
                }
                Ok(InitialState::Gaussian {
                    mean_q: self.f64_or("initial_state.mean_q", 0.0)?,
                    mean_p: self.f64_or("initial_state.mean_p", 0.0)?,
                    var_q: self.positive("initial_state.var_q", var_q)?,
                    squeeze: self.f64_or("initial_state.squeeze", 0.0)?,
                    mixing,
                })
            }
            "canonical" => Ok(InitialState::Canonical),
            "fock" => {
                let n = self.usize("initial_state.n")?;
                match basis {
                    BasisSpec::Fock { dim, .. } if n < *dim => Ok(InitialState::Fock { n }),
                    BasisSpec::Fock { dim, .. } => Err(self.err(
                        "initial_state.n",
                        format!("must be below basis.dim = {dim}"),
                    )),
                    _ => Err(self.err("initial_state.kind", "number states need a fock basis")),
                }
            }
            other => Err(self.err(
                "initial_state.kind",
                format!("expected gaussian, canonical or fock, got {other:?}"),
            )),
        }
    }

    fn integrator(&self, basis: &BasisSpec) -> Result<IntegratorConfig> {
        let method = match self.opt_str("integrator.method")? {
            Some(m) => m
                .parse::<Method>()
                .map_err(|e| self.err("integrator.method", e.to_string()))?,
            None => Method::default_for(basis),
        };
        let times = match self.opt_f64_list("integrator.sample_times")? {
            Some(t) => t,
            None => self.sample_times()?,
        };
        let mut cfg = IntegratorConfig::new(method, times)
            .map_err(|e| self.err("integrator.sample_times", e.to_string()))?;
        cfg.rtol = self.f64_or("integrator.rtol", cfg.rtol)?;
        cfg.atol = self.f64_or("integrator.atol", cfg.atol)?;
        cfg.max_step = self.f64_or("integrator.max_step", cfg.max_step)?;
        cfg.validate()
            .map_err(|e| self.err("integrator", e.to_string()))?;
        Ok(cfg)
    }

    fn sample_times(&self) -> Result<Vec<f64>> {
        let t_end = self.f64_or("integrator.t_end", 10.0)?;
        let t_end = self.positive("integrator.t_end", t_end)?;
        let n = self.opt_usize("integrator.n_samples")?.unwrap_or(11);
        if n < 2 {
            return Err(self.err("integrator.n_samples", format!("need at least 2, got {n}")));
        }
        match self.opt_str("integrator.spacing")?.unwrap_or("linear") {
            "linear" => Ok((0..n).map(|k| t_end * k as f64 / (n - 1) as f64).collect()),
            "geometric" => {
                let t0 = self.f64("integrator.t_first")?;
                let t0 = self.positive("integrator.t_first", t0)?;
                if !(t0 < t_end) {
                    return Err(self.err("integrator.t_first", "must be below integrator.t_end"));
                }
                let r = (t_end / t0).powf(1.0 / (n - 1) as f64);
                Ok(std::iter::once(0.0)
                    .chain((0..n).map(|k| {
                        if k + 1 == n {
                            t_end
                        } else {
                            t0 * r.powi(k as i32)
                        }
                    }))
                    .collect())
            }
            other => Err(self.err(
                "integrator.spacing",
                format!("expected linear or geometric, got {other:?}"),
            )),
        }
    }

    fn extras(&self, scenario: Scenario) -> Result<Extras> {
        let mut extras = Extras {
            convergence: self.bool_or("checks.convergence", false)?,
            ..Extras::default()
        };
        match scenario {
            Scenario::EtaCrossRep => extras.crossrep_grid = Some(self.basis("crossrep")?),
            Scenario::ChoiAudit => extras.choi = Some(self.choi()?),
            Scenario::MicrobathCompare | Scenario::JoltCompare => extras.bath = Some(self.bath()?),
            _ => {}
        }
        Ok(extras)
    }

    fn choi(&self) -> Result<ChoiConfig> {
        let list = |key: &str| -> Result<Vec<f64>> {
            let v = self
                .opt_f64_list(key)?
                .ok_or_else(|| self.err(key, "missing"))?;
            if v.is_empty() || v.iter().any(|x| !(x.is_finite() && *x > 0.0)) {
                return Err(self.err(key, "need a non-empty list of positive numbers"));
            }
            Ok(v)
        };
        Ok(ChoiConfig {
            times: list("choi.times")?,
            strengths: list("choi.strengths")?,
            grid: self.basis("choi.grid")?,
        })
    }

    fn bath(&self) -> Result<BathConfig> {
        let omega_max = self.f64("params.omega_max")?;
        let t_compare = self.f64("bath.t_compare")?;
        let dt = self.f64_or("bath.dt", 4e-3)?;
        let window = self.f64_or("bath.window", 10.0 / omega_max)?;
        Ok(BathConfig {
            n_modes: self.usize("bath.n_modes")?,
            per_mode_dim: self.usize("bath.per_mode_dim")?,
            t_compare: self.positive("bath.t_compare", t_compare)?,
            dt: self.positive("bath.dt", dt)?,
            window: self.positive("bath.window", window)?,
        })
    }
}
