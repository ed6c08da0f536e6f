//! Config ingestion and artifact writing for the `fidstring` binary.
//!
//! Configs are JSON. Every field is checked by hand so that errors name
//! the offending path, e.g. `prior.c: expected 2 numbers`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::Serialize;
use serde_json::{Map, Value};

use crate::engine::{self, Scenario};
use crate::error::Error;
use crate::geometry::{Curve, ParamInterval, Vec2};
use crate::noise::{seeded_rng, GaussianNoise};
use crate::oracle::{self, OracleKind, OracleOptions};
use crate::priors::{ConditionMode, PriorWeight};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
const PARAM: &str = "t";

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Numerical(String),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Io(_) => 1,
            CliError::Numerical(_) => 2,
        }
    }
}

fn config_err(path: &str, msg: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("{path}: {msg}"))
}

fn numerical(e: Error) -> CliError {
    CliError::Numerical(e.to_string())
}

fn io(path: &Path, e: std::io::Error) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurveConfig {
    pub mu1: String,
    pub mu2: String,
    pub t_min: f64,
    pub t_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NoiseConfig {
    pub cov: [[f64; 2]; 2],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ModeConfig {
    /// `h = |∇C| |μ'|`; written `as_paper` in configs.
    #[serde(rename = "as_paper")]
    Product,
    #[serde(rename = "coarea")]
    Coarea,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum PriorConfig {
    Jeffreys,
    Linear {
        c: [f64; 2],
    },
    Shift {
        d: [f64; 2],
    },
    Condition {
        #[serde(rename = "C")]
        condition: String,
        mode: ModeConfig,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OutputConfig {
    pub grid_points: usize,
    pub quantiles: Vec<f64>,
    pub n_samples: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleConfig {
    pub kind: OracleKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub d: Option<[f64; 2]>,
    pub epsilon: f64,
    pub n_proposed: u64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProblemConfig {
    pub curve: CurveConfig,
    pub noise: NoiseConfig,
    pub observation: [f64; 2],
    pub prior: PriorConfig,
    pub output: OutputConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub oracle: Option<OracleConfig>,
}

// ------------------------------------------------------------ parsing

struct Obj<'a> {
    path: String,
    map: &'a Map<String, Value>,
}

fn join(path: &str, key: &str) -> String {
    if path.is_empty() {
        key.to_string()
    } else {
        format!("{path}.{key}")
    }
}

impl<'a> Obj<'a> {
    fn new(value: &'a Value, path: &str, allowed: &[&str]) -> Result<Self, CliError> {
        let map = value.as_object().ok_or_else(|| {
            config_err(
                if path.is_empty() { "config" } else { path },
                "expected an object",
            )
        })?;
        for key in map.keys() {
            if !allowed.contains(&key.as_str()) {
                return Err(config_err(&join(path, key), "unknown field"));
            }
        }
        Ok(Obj {
            path: path.to_string(),
            map,
        })
    }

    fn at(&self, key: &str) -> String {
        join(&self.path, key)
    }

    fn get(&self, key: &str) -> Result<&'a Value, CliError> {
        self.map
            .get(key)
            .ok_or_else(|| config_err(&self.at(key), "missing field"))
    }

    fn opt(&self, key: &str) -> Option<&'a Value> {
        self.map.get(key).filter(|v| !v.is_null())
    }

    fn object(&self, key: &str, allowed: &[&str]) -> Result<Obj<'a>, CliError> {
        Obj::new(self.get(key)?, &self.at(key), allowed)
    }

    fn number(&self, key: &str) -> Result<f64, CliError> {
        number(self.get(key)?, &self.at(key))
    }

    fn string(&self, key: &str) -> Result<String, CliError> {
        self.get(key)?
            .as_str()
            .map(str::to_string)
            .ok_or_else(|| config_err(&self.at(key), "expected a string"))
    }

    fn count(&self, key: &str) -> Result<u64, CliError> {
        self.get(key)?
            .as_u64()
            .ok_or_else(|| config_err(&self.at(key), "expected a non-negative integer"))
    }

    fn pair(&self, key: &str) -> Result<[f64; 2], CliError> {
        pair(self.get(key)?, &self.at(key))
    }
}

fn number(v: &Value, path: &str) -> Result<f64, CliError> {
    v.as_f64()
        .filter(|x| x.is_finite())
        .ok_or_else(|| config_err(path, "expected a finite number"))
}

fn pair(v: &Value, path: &str) -> Result<[f64; 2], CliError> {
    match v.as_array().map(|a| a.as_slice()) {
        Some([a, b]) => match (a.as_f64(), b.as_f64()) {
            (Some(a), Some(b)) if a.is_finite() && b.is_finite() => Ok([a, b]),
            _ => Err(config_err(path, "expected 2 numbers")),
        },
        _ => Err(config_err(path, "expected 2 numbers")),
    }
}

fn nonzero(v: [f64; 2], path: &str) -> Result<[f64; 2], CliError> {
    if v == [0.0, 0.0] {
        Err(config_err(path, "must be non-zero"))
    } else {
        Ok(v)
    }
}

impl ProblemConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let value: Value =
            serde_json::from_str(text).map_err(|e| CliError::Config(format!("config: {e}")))?;
        ProblemConfig::from_value(&value)
    }

    pub fn from_value(value: &Value) -> Result<Self, CliError> {
        let root = Obj::new(
            value,
            "",
            &["curve", "noise", "observation", "prior", "output", "oracle"],
        )?;

        let c = root.object("curve", &["mu1", "mu2", "t_min", "t_max"])?;
        let curve = CurveConfig {
            mu1: c.string("mu1")?,
            mu2: c.string("mu2")?,
            t_min: c.number("t_min")?,
            t_max: c.number("t_max")?,
        };
        if curve.t_min >= curve.t_max {
            return Err(config_err("curve.t_min", "must be less than curve.t_max"));
        }

        let n = root.object("noise", &["cov"])?;
        let rows = n
            .get("cov")?
            .as_array()
            .filter(|r| r.len() == 2)
            .ok_or_else(|| config_err("noise.cov", "expected a 2x2 matrix"))?;
        let noise = NoiseConfig {
            cov: [
                pair(&rows[0], "noise.cov[0]")?,
                pair(&rows[1], "noise.cov[1]")?,
            ],
        };

        let observation = root.pair("observation")?;

        let p = root.get("prior")?;
        let kind = p
            .get("type")
            .and_then(Value::as_str)
            .ok_or_else(|| config_err("prior.type", "expected a string"))?;
        let prior = match kind {
            "jeffreys" => {
                Obj::new(p, "prior", &["type"])?;
                PriorConfig::Jeffreys
            }
            "linear" => {
                let o = Obj::new(p, "prior", &["type", "c"])?;
                PriorConfig::Linear {
                    c: nonzero(o.pair("c")?, "prior.c")?,
                }
            }
            "shift" => {
                let o = Obj::new(p, "prior", &["type", "d"])?;
                PriorConfig::Shift {
                    d: nonzero(o.pair("d")?, "prior.d")?,
                }
            }
            "condition" => {
                let o = Obj::new(p, "prior", &["type", "C", "mode"])?;
                let mode = match o.string("mode")?.as_str() {
                    "as_paper" => ModeConfig::Product,
                    "coarea" => ModeConfig::Coarea,
                    other => {
                        return Err(config_err(
                            "prior.mode",
                            format!("expected \"as_paper\" or \"coarea\", got \"{other}\""),
                        ))
                    }
                };
                PriorConfig::Condition {
                    condition: o.string("C")?,
                    mode,
                }
            }
            other => {
                return Err(config_err(
                    "prior.type",
                    format!("unknown prior \"{other}\""),
                ))
            }
        };

        let o = root.object("output", &["grid_points", "quantiles", "n_samples", "seed"])?;
        let grid_points = o.count("grid_points")?;
        if grid_points < 2 {
            return Err(config_err("output.grid_points", "must be at least 2"));
        }
        let quantiles = o
            .get("quantiles")?
            .as_array()
            .ok_or_else(|| config_err("output.quantiles", "expected a list of numbers"))?
            .iter()
            .enumerate()
            .map(|(i, v)| {
                let path = format!("output.quantiles[{i}]");
                let p = number(v, &path)?;
                if p > 0.0 && p < 1.0 {
                    Ok(p)
                } else {
                    Err(config_err(&path, "must lie in (0, 1)"))
                }
            })
            .collect::<Result<Vec<_>, _>>()?;
        let output = OutputConfig {
            grid_points: grid_points as usize,
            quantiles,
            n_samples: o.count("n_samples")? as usize,
            seed: o.count("seed")?,
        };

        let oracle = match root.opt("oracle") {
            None => None,
            Some(v) => {
                let o = Obj::new(v, "oracle", &["kind", "d", "epsilon", "n_proposed", "seed"])?;
                let kind = match o.string("kind")?.as_str() {
                    "tube" => OracleKind::Tube,
                    "slab" => OracleKind::Slab,
                    other => {
                        return Err(config_err(
                            "oracle.kind",
                            format!("expected \"tube\" or \"slab\", got \"{other}\""),
                        ))
                    }
                };
                let d = match (kind, o.opt("d")) {
                    (_, Some(v)) => Some(nonzero(pair(v, "oracle.d")?, "oracle.d")?),
                    (OracleKind::Slab, None) => {
                        return Err(config_err("oracle.d", "required for a slab oracle"))
                    }
                    (OracleKind::Tube, None) => None,
                };
                let epsilon = o.number("epsilon")?;
                if epsilon <= 0.0 {
                    return Err(config_err("oracle.epsilon", "must be positive"));
                }
                let n_proposed = o.count("n_proposed")?;
                if n_proposed == 0 {
                    return Err(config_err("oracle.n_proposed", "must be at least 1"));
                }
                Some(OracleConfig {
                    kind,
                    d,
                    epsilon,
                    n_proposed,
                    seed: o.count("seed")?,
                })
            }
        };

        Ok(ProblemConfig {
            curve,
            noise,
            observation,
            prior,
            output,
            oracle,
        })
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("config serializes");
        s.push('\n');
        s
    }

    /// Scenario and prior after all module-level validation.
    pub fn build(&self) -> Result<(Scenario, PriorWeight), CliError> {
        let interval = ParamInterval::new(self.curve.t_min, self.curve.t_max)
            .map_err(|e| config_err("curve.t_min", e))?;
        let curve = Curve::parse(&self.curve.mu1, &self.curve.mu2, PARAM, interval)
            .map_err(|e| config_err("curve", e))?;
        let noise = GaussianNoise::new(self.noise.cov).map_err(|e| config_err("noise.cov", e))?;
        let x = Vec2::from(self.observation);
        let scenario = Scenario::new(curve, noise, x).map_err(|e| config_err("observation", e))?;
        let prior = match &self.prior {
            PriorConfig::Jeffreys => Ok(PriorWeight::Jeffreys),
            PriorConfig::Linear { c } => PriorWeight::linear(Vec2::from(*c)),
            PriorConfig::Shift { d } => PriorWeight::shift(Vec2::from(*d)),
            PriorConfig::Condition { condition, mode } => PriorWeight::parse_condition(
                condition,
                match mode {
                    ModeConfig::Product => ConditionMode::Product,
                    ModeConfig::Coarea => ConditionMode::Coarea,
                },
            ),
        }
        .map_err(|e| config_err("prior", e))?;
        Ok((scenario, prior))
    }
}

// ------------------------------------------------------------ commands

fn read_config(path: &Path) -> Result<ProblemConfig, CliError> {
    let text = fs::read_to_string(path).map_err(|e| io(path, e))?;
    ProblemConfig::from_json(&text)
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<(), CliError> {
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|e| io(&path, e))
}

fn prepare(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| io(dir, e))
}

fn json(value: &impl Serialize) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report serializes");
    s.push('\n');
    s
}

#[derive(Serialize)]
struct Summary<'a> {
    version: &'a str,
    #[serde(rename = "Z")]
    z: f64,
    log_z: f64,
    mode: f64,
    mean: f64,
    config: &'a ProblemConfig,
}

/// `run`: density table, quantiles, samples and summary.
pub fn run(config_path: &Path, out: &Path) -> Result<(), CliError> {
    let config = read_config(config_path)?;
    let (scenario, prior) = config.build()?;
    let rf = engine::normalize_default(&scenario, &prior).map_err(numerical)?;
    prepare(out)?;

    let mut csv = String::from("t,theta1,theta2,pdf,cdf\n");
    for t in rf.interval().linspace(config.output.grid_points) {
        let p = scenario.curve.point(t).map_err(numerical)?;
        let pdf = rf.pdf(t).map_err(numerical)?;
        writeln!(
            csv,
            "{t:.16e},{:.16e},{:.16e},{pdf:.16e},{:.16e}",
            p.x,
            p.y,
            rf.cdf(t)
        )
        .expect("write to string");
    }
    write(out, "density.csv", &csv)?;

    let mut quantiles = BTreeMap::new();
    for &p in &config.output.quantiles {
        quantiles.insert(format!("{p}"), rf.quantile(p).map_err(numerical)?);
    }
    write(out, "quantiles.json", &json(&quantiles))?;

    if config.output.n_samples > 0 {
        let draws = rf.sample(&mut seeded_rng(config.output.seed), config.output.n_samples);
        let mut s = String::with_capacity(draws.len() * 24);
        for t in draws {
            writeln!(s, "{t:.16e}").expect("write to string");
        }
        write(out, "samples.csv", &s)?;
    }

    let summary = Summary {
        version: VERSION,
        z: rf.z(),
        log_z: rf.log_z(),
        mode: rf.mode(),
        mean: rf.mean(),
        config: &config,
    };
    write(out, "summary.json", &json(&summary))
}

#[derive(Serialize)]
struct OracleReport {
    kind: OracleKind,
    epsilon: f64,
    n_proposed: u64,
    n_accepted: usize,
    acceptance_rate: f64,
    ks_distance: f64,
    failures: u64,
    seed: u64,
}

/// `oracle`: Monte Carlo conditioning run and its KS report. A tube run is
/// compared with the Jeffreys density and a slab run with Shift{d},
/// whatever prior the config names.
pub fn oracle_cmd(config_path: &Path, out: &Path) -> Result<(), CliError> {
    let config = read_config(config_path)?;
    let oc = config
        .oracle
        .clone()
        .ok_or_else(|| config_err("oracle", "missing field"))?;
    let (scenario, _) = config.build()?;
    let opts = OracleOptions::new(oc.epsilon, oc.n_proposed, oc.seed);
    let result = match oc.kind {
        OracleKind::Tube => oracle::tube_oracle(&scenario, &opts),
        OracleKind::Slab => {
            let d = oc.d.expect("validated for slab");
            oracle::slab_oracle(&scenario, Vec2::from(d), &opts)
        }
    }
    .map_err(numerical)?;
    prepare(out)?;
    let report = OracleReport {
        kind: result.kind,
        epsilon: result.epsilon,
        n_proposed: result.n_proposed,
        n_accepted: result.n_accepted(),
        acceptance_rate: result.acceptance_rate,
        ks_distance: result.ks_distance,
        failures: result.failures,
        seed: result.seed,
    };
    write(out, "oracle_report.json", &json(&report))?;
    let mut s = String::with_capacity(result.accepted_t.len() * 24);
    for t in &result.accepted_t {
        writeln!(s, "{t:.16e}").expect("write to string");
    }
    write(out, "oracle_samples.csv", &s)
}

/// Parameters of a built-in scenario.
#[derive(Debug, Clone, PartialEq)]
pub enum ScenarioSpec {
    Seidenfeld {
        x: [f64; 2],
        t_bound: f64,
    },
    Line {
        p0: [f64; 2],
        e: [f64; 2],
        t_min: f64,
        t_max: f64,
        x: [f64; 2],
    },
    Circle {
        r: f64,
        x: [f64; 2],
    },
}

fn default_output() -> OutputConfig {
    OutputConfig {
        grid_points: 1001,
        quantiles: vec![0.05, 0.25, 0.5, 0.75, 0.95],
        n_samples: 10_000,
        seed: 42,
    }
}

/// Config for a built-in scenario with a Jeffreys prior and a tube oracle.
pub fn scenario_config(spec: &ScenarioSpec) -> Result<ProblemConfig, CliError> {
    let (curve, x) = match *spec {
        ScenarioSpec::Seidenfeld { x, t_bound } => {
            if !(t_bound > 0.0 && t_bound.is_finite()) {
                return Err(config_err("t_bound", "must be positive"));
            }
            (
                CurveConfig {
                    mu1: "t^3".into(),
                    mu2: "t".into(),
                    t_min: -t_bound,
                    t_max: t_bound,
                },
                x,
            )
        }
        ScenarioSpec::Line {
            p0,
            e,
            t_min,
            t_max,
            x,
        } => {
            if (Vec2::from(e).norm() - 1.0).abs() > 1e-12 {
                return Err(config_err("e", "must be a unit vector"));
            }
            (
                CurveConfig {
                    mu1: format!("{:?} + t*{:?}", p0[0], e[0]).replace("+ t*-", "- t*"),
                    mu2: format!("{:?} + t*{:?}", p0[1], e[1]).replace("+ t*-", "- t*"),
                    t_min,
                    t_max,
                },
                x,
            )
        }
        ScenarioSpec::Circle { r, x } => {
            if !(r > 0.0 && r.is_finite()) {
                return Err(config_err("r", "must be positive"));
            }
            if x == [0.0, 0.0] {
                return Err(config_err("x", "must not be the centre"));
            }
            (
                CurveConfig {
                    mu1: format!("{r:?}*cos(t)"),
                    mu2: format!("{r:?}*sin(t)"),
                    t_min: 0.0,
                    t_max: 2.0 * std::f64::consts::PI,
                },
                x,
            )
        }
    };
    let config = ProblemConfig {
        curve,
        noise: NoiseConfig {
            cov: [[1.0, 0.0], [0.0, 1.0]],
        },
        observation: x,
        prior: PriorConfig::Jeffreys,
        output: default_output(),
        oracle: Some(OracleConfig {
            kind: OracleKind::Tube,
            d: None,
            epsilon: 0.01,
            n_proposed: 10_000_000,
            seed: 7,
        }),
    };
    config.build()?;
    Ok(config)
}

/// `scenario`: write `config.json` for a built-in scenario.
pub fn scenario_cmd(spec: &ScenarioSpec, out: &Path) -> Result<(), CliError> {
    let config = scenario_config(spec)?;
    prepare(out)?;
    write(out, "config.json", &config.to_json())
}
