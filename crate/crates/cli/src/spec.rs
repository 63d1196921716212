//! Experiment specifications: a flat `key = value` file or a JSON object,
//! overlaid by command-line flags.

use std::path::PathBuf;

use clap::{Parser, ValueEnum};
use percolab::estimators::WindowPolicy;
use percolab::AnchorRule;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SpecError {
    #[error("cannot read spec file {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("line {line}: {reason}")]
    Syntax { line: usize, reason: String },
    #[error("invalid JSON spec: {0}")]
    Json(#[from] serde_json::Error),
    #[error("field `{field}`: {reason}")]
    Field { field: &'static str, reason: String },
}

fn field(field: &'static str, reason: impl Into<String>) -> SpecError {
    SpecError::Field {
        field,
        reason: reason.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Mu,
    Ball,
    Rate,
    Shape,
    Pbar,
    Tails,
    Diag,
}

/// A fully resolved experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub command: Command,
    pub p: f64,
    pub d: usize,
    /// Integer directions, for `mu`, `rate`, `tails` and `diag`.
    pub directions: Vec<Vec<i64>>,
    /// Fundamental directions used when a ball is estimated.
    pub ball_directions: usize,
    pub eps: f64,
    pub scales: Vec<u64>,
    /// Radii `t` for `shape`.
    pub times: Vec<f64>,
    /// Meshes `N` for `pbar`.
    pub ns: Vec<u64>,
    /// Radii for `tails`.
    pub radii: Vec<usize>,
    pub replicas: u64,
    pub master_seed: u64,
    pub policy: WindowPolicy,
    pub anchor_rule: AnchorRule,
    /// Ratio in the distance tail of `tails`.
    pub ratio: f64,
    /// Direction scale for `pbar`.
    pub m: i64,
    pub eta: f64,
    pub macro_side: usize,
    /// Accepted replicas for `shape`; defaults to `replicas`.
    pub accepted: Option<u64>,
    /// Flat-face tolerance for `diag`.
    pub flat_tolerance: f64,
    /// A ball serialized by the `ball` command; estimated when absent.
    pub ball: Option<PathBuf>,
    pub ball_scale: u64,
    pub ball_replicas: u64,
    pub output: PathBuf,
    pub threads: Option<usize>,
}

/// Command-line flags; every flag overrides the spec file.
#[derive(Debug, Parser)]
#[command(
    name = "percolab",
    version,
    about = "Monte Carlo experiments on supercritical bond percolation"
)]
pub struct Cli {
    pub command: Command,
    /// Spec file: `key = value` lines or a JSON object.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    #[arg(long)]
    pub p: Option<f64>,
    #[arg(long)]
    pub d: Option<usize>,
    /// Directions such as `1,0` or `1,0;1,1`.
    #[arg(long = "dir")]
    pub directions: Option<String>,
    #[arg(long)]
    pub ball_directions: Option<usize>,
    #[arg(long)]
    pub eps: Option<f64>,
    #[arg(long)]
    pub scales: Option<String>,
    #[arg(long)]
    pub times: Option<String>,
    #[arg(long)]
    pub ns: Option<String>,
    #[arg(long)]
    pub radii: Option<String>,
    #[arg(long)]
    pub replicas: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub margin_factor: Option<f64>,
    #[arg(long)]
    pub max_vertices: Option<usize>,
    /// `giant` or `sphere:R`.
    #[arg(long)]
    pub anchor: Option<String>,
    #[arg(long)]
    pub ratio: Option<f64>,
    #[arg(long)]
    pub m: Option<i64>,
    #[arg(long)]
    pub eta: Option<f64>,
    #[arg(long)]
    pub macro_side: Option<usize>,
    #[arg(long)]
    pub accepted: Option<u64>,
    #[arg(long)]
    pub flat_tolerance: Option<f64>,
    #[arg(long)]
    pub ball: Option<PathBuf>,
    #[arg(long)]
    pub ball_scale: Option<u64>,
    #[arg(long)]
    pub ball_replicas: Option<u64>,
    #[arg(long, short)]
    pub out: Option<PathBuf>,
    #[arg(long, env = "PERCOLAB_THREADS")]
    pub threads: Option<usize>,
}

/// Raw `key -> value` pairs before typing.
type Pairs = Vec<(String, String)>;

fn parse_key_values(text: &str) -> Result<Pairs, SpecError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| SpecError::Syntax {
            line: i + 1,
            reason: "expected `key = value`".into(),
        })?;
        out.push((k.trim().replace('-', "_"), v.trim().to_string()));
    }
    Ok(out)
}

/// Flattens a JSON object into the same textual pairs.
fn parse_json(text: &str) -> Result<Pairs, SpecError> {
    let value: serde_json::Value = serde_json::from_str(text)?;
    let obj = value
        .as_object()
        .ok_or_else(|| field("spec", "JSON spec must be an object"))?;
    let render = |v: &serde_json::Value| -> String {
        match v {
            serde_json::Value::String(s) => s.clone(),
            serde_json::Value::Array(items) => items
                .iter()
                .map(|x| match x {
                    serde_json::Value::Array(inner) => {
                        inner.iter().map(|y| y.to_string()).collect::<Vec<_>>().join(",")
                    }
                    other => other.to_string(),
                })
                .collect::<Vec<_>>()
                .join(if items.iter().any(|x| x.is_array()) { ";" } else { "," }),
            other => other.to_string(),
        }
    };
    Ok(obj.iter().map(|(k, v)| (k.replace('-', "_"), render(v))).collect())
}

fn list<T: std::str::FromStr>(name: &'static str, s: &str) -> Result<Vec<T>, SpecError> {
    s.split(',')
        .map(str::trim)
        .filter(|x| !x.is_empty())
        .map(|x| x.parse().map_err(|_| field(name, format!("cannot parse `{x}`"))))
        .collect()
}

fn scalar<T: std::str::FromStr>(name: &'static str, s: &str) -> Result<T, SpecError> {
    s.trim().parse().map_err(|_| field(name, format!("cannot parse `{s}`")))
}

fn directions(s: &str) -> Result<Vec<Vec<i64>>, SpecError> {
    s.split(';')
        .filter(|x| !x.trim().is_empty())
        .map(|x| list("directions", x))
        .collect()
}

fn anchor(s: &str) -> Result<AnchorRule, SpecError> {
    match s.trim() {
        "giant" => Ok(AnchorRule::GiantCluster),
        other => other
            .strip_prefix("sphere:")
            .and_then(|r| r.parse().ok())
            .map(|outer| AnchorRule::ReachesSphere { outer })
            .ok_or_else(|| field("anchor", format!("expected `giant` or `sphere:R`, got `{other}`"))),
    }
}

impl ExperimentSpec {
    pub fn defaults(command: Command) -> Self {
        ExperimentSpec {
            command,
            p: 0.7,
            d: 2,
            directions: vec![vec![1, 0]],
            ball_directions: 4,
            eps: 0.3,
            scales: vec![16, 32, 64],
            times: vec![30.0, 60.0, 120.0],
            ns: vec![8, 16, 32],
            radii: vec![4, 8, 16, 32],
            replicas: 100,
            master_seed: 0,
            policy: WindowPolicy::default(),
            anchor_rule: AnchorRule::GiantCluster,
            ratio: 3.0,
            m: 4,
            eta: 0.2,
            macro_side: 8,
            accepted: None,
            flat_tolerance: 0.02,
            ball: None,
            ball_scale: 64,
            ball_replicas: 50,
            output: PathBuf::from("percolab-out"),
            threads: None,
        }
    }

    fn apply(&mut self, key: &str, value: &str) -> Result<(), SpecError> {
        match key {
            "command" => {
                self.command = Command::from_str(value, true).map_err(|e| field("command", e))?;
            }
            "p" => self.p = scalar("p", value)?,
            "d" => self.d = scalar("d", value)?,
            "dir" | "direction" | "directions" => self.directions = directions(value)?,
            "ball_directions" => self.ball_directions = scalar("ball_directions", value)?,
            "eps" => self.eps = scalar("eps", value)?,
            "scales" => self.scales = list("scales", value)?,
            "times" => self.times = list("times", value)?,
            "ns" => self.ns = list("ns", value)?,
            "radii" => self.radii = list("radii", value)?,
            "replicas" => self.replicas = scalar("replicas", value)?,
            "seed" | "master_seed" => self.master_seed = scalar("master_seed", value)?,
            "margin_factor" => self.policy.margin_factor = scalar("margin_factor", value)?,
            "max_vertices" => self.policy.max_vertices = scalar("max_vertices", value)?,
            "anchor" | "anchor_rule" => self.anchor_rule = anchor(value)?,
            "ratio" => self.ratio = scalar("ratio", value)?,
            "m" => self.m = scalar("m", value)?,
            "eta" => self.eta = scalar("eta", value)?,
            "macro_side" => self.macro_side = scalar("macro_side", value)?,
            "accepted" => self.accepted = Some(scalar("accepted", value)?),
            "flat_tolerance" => self.flat_tolerance = scalar("flat_tolerance", value)?,
            "ball" => self.ball = Some(PathBuf::from(value)),
            "ball_scale" => self.ball_scale = scalar("ball_scale", value)?,
            "ball_replicas" => self.ball_replicas = scalar("ball_replicas", value)?,
            "out" | "output" => self.output = PathBuf::from(value),
            "threads" => self.threads = Some(scalar("threads", value)?),
            _ => return Err(field("spec", format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    /// Spec file first, then flags.
    pub fn from_cli(cli: &Cli) -> Result<Self, SpecError> {
        let mut spec = ExperimentSpec::defaults(cli.command);
        if let Some(path) = &cli.spec {
            let text = std::fs::read_to_string(path).map_err(|source| SpecError::Read {
                path: path.clone(),
                source,
            })?;
            let pairs = if text.trim_start().starts_with('{') {
                parse_json(&text)?
            } else {
                parse_key_values(&text)?
            };
            for (k, v) in pairs {
                spec.apply(&k, &v)?;
            }
            spec.command = cli.command;
        }
        let flags: [(&str, Option<String>); 26] = [
            ("p", cli.p.map(|v| v.to_string())),
            ("d", cli.d.map(|v| v.to_string())),
            ("directions", cli.directions.clone()),
            ("ball_directions", cli.ball_directions.map(|v| v.to_string())),
            ("eps", cli.eps.map(|v| v.to_string())),
            ("scales", cli.scales.clone()),
            ("times", cli.times.clone()),
            ("ns", cli.ns.clone()),
            ("radii", cli.radii.clone()),
            ("replicas", cli.replicas.map(|v| v.to_string())),
            ("seed", cli.seed.map(|v| v.to_string())),
            ("margin_factor", cli.margin_factor.map(|v| v.to_string())),
            ("max_vertices", cli.max_vertices.map(|v| v.to_string())),
            ("anchor", cli.anchor.clone()),
            ("ratio", cli.ratio.map(|v| v.to_string())),
            ("m", cli.m.map(|v| v.to_string())),
            ("eta", cli.eta.map(|v| v.to_string())),
            ("macro_side", cli.macro_side.map(|v| v.to_string())),
            ("accepted", cli.accepted.map(|v| v.to_string())),
            ("flat_tolerance", cli.flat_tolerance.map(|v| v.to_string())),
            ("ball", cli.ball.as_ref().map(|v| v.display().to_string())),
            ("ball_scale", cli.ball_scale.map(|v| v.to_string())),
            ("ball_replicas", cli.ball_replicas.map(|v| v.to_string())),
            ("out", cli.out.as_ref().map(|v| v.display().to_string())),
            ("threads", cli.threads.map(|v| v.to_string())),
            ("command", None),
        ];
        for (k, v) in flags {
            if let Some(v) = v {
                spec.apply(k, &v)?;
            }
        }
        spec.validate()?;
        Ok(spec)
    }

    /// Checks every numeric field before any sampling starts.
    pub fn validate(&self) -> Result<(), SpecError> {
        if !(0.0..=1.0).contains(&self.p) {
            return Err(field("p", "must lie in [0, 1]"));
        }
        if !(2..=3).contains(&self.d) {
            return Err(field("d", "sampling supports d = 2 or 3"));
        }
        if self.replicas == 0 {
            return Err(field("replicas", "must be positive"));
        }
        if self.threads == Some(0) {
            return Err(field("threads", "must be positive"));
        }
        if !(self.policy.margin_factor >= 0.0) || self.policy.max_vertices == 0 {
            return Err(field(
                "policy",
                "margin factor must be nonnegative and the budget positive",
            ));
        }
        let increasing = |xs: &[u64]| !xs.is_empty() && xs[0] > 0 && xs.windows(2).all(|w| w[0] < w[1]);
        let needs_dirs = matches!(
            self.command,
            Command::Mu | Command::Rate | Command::Tails | Command::Diag
        );
        if needs_dirs {
            if self.directions.is_empty() {
                return Err(field("directions", "at least one direction is required"));
            }
            for u in &self.directions {
                if u.len() != self.d || u.iter().all(|&v| v == 0) {
                    return Err(field(
                        "directions",
                        format!("{u:?} must be a nonzero vector of length d"),
                    ));
                }
            }
        }
        if matches!(
            self.command,
            Command::Mu | Command::Rate | Command::Diag | Command::Ball
        ) && !increasing(&self.scales)
        {
            return Err(field("scales", "must be positive and strictly increasing"));
        }
        if matches!(self.command, Command::Rate) && !(self.eps > 0.0 && self.eps < 1.0) {
            return Err(field("eps", "must lie in (0, 1)"));
        }
        if matches!(self.command, Command::Shape) {
            if !(self.eps > 0.0) {
                return Err(field("eps", "must be positive"));
            }
            if self.times.is_empty() || !(self.times[0] >= 1.0) || self.times.windows(2).any(|w| !(w[0] < w[1])) {
                return Err(field("times", "must be at least 1 and strictly increasing"));
            }
            if self.accepted == Some(0) {
                return Err(field("accepted", "must be positive"));
            }
        }
        if matches!(self.command, Command::Pbar) {
            if !increasing(&self.ns) {
                return Err(field("ns", "must be positive and strictly increasing"));
            }
            if self.m <= 0 || !(self.eta > 0.0) || self.macro_side < 2 {
                return Err(field("m", "m and eta must be positive, macro_side at least 2"));
            }
        }
        if matches!(self.command, Command::Tails) {
            if self.radii.is_empty() || self.radii[0] == 0 || self.radii.windows(2).any(|w| w[0] >= w[1]) {
                return Err(field("radii", "must be positive and strictly increasing"));
            }
            if !(self.ratio >= 1.0) {
                return Err(field("ratio", "must be at least 1"));
            }
        }
        let needs_ball = matches!(
            self.command,
            Command::Ball | Command::Rate | Command::Shape | Command::Pbar
        );
        if needs_ball
            && self.ball.is_none()
            && (self.ball_directions < self.d + 1 || self.ball_scale == 0 || self.ball_replicas == 0)
        {
            return Err(field(
                "ball_directions",
                "need at least d + 1 directions and positive ball scale and replicas",
            ));
        }
        Ok(())
    }
}
