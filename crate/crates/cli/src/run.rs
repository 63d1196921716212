//! Dispatch of an [`ExperimentSpec`] to the estimators and the output
//! files it produces.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use percolab::clusters::{tail_statistics, TailParams};
use percolab::estimators::{
    detect_flat_face, distance_ratio_tail, estimate_deviation_rate, estimate_mu_ball, estimate_mu_direction,
    shape_deviation_curve, theoretical_rate_bounds, BallParams, DistanceTailParams, MuParams, RateEstimate, RateParams,
    ShapeParams,
};
use percolab::geometry::sampled_ratio_envelope;
use percolab::renorm::{estimate_pbar, largest_component_tail, PbarParams};
use percolab::stats::wilson_interval;
use percolab::{NormBall, TailCurve};
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::spec::{Command, ExperimentSpec, SpecError};

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Spec(#[from] SpecError),
    #[error(transparent)]
    Library(#[from] percolab::Error),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("cannot build the thread pool: {0}")]
    Threads(String),
}

impl RunError {
    /// Process exit code: 2 for invalid input, 3 for exhausted resources.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Spec(_) => 2,
            RunError::Library(percolab::Error::ResourceExhausted { .. }) => 3,
            RunError::Library(percolab::Error::InvalidParameter { .. }) => 2,
            _ => 1,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct FileEntry {
    pub name: String,
    pub sha256: String,
    pub bytes: usize,
}

/// Seed indices `[start, end)` consumed under one master seed.
#[derive(Debug, Clone, Serialize)]
pub struct SeedRange {
    pub task: String,
    pub master_seed: u64,
    pub start: u64,
    pub end: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub spec: ExperimentSpec,
    pub library_version: String,
    pub wall_seconds: f64,
    pub threads: usize,
    pub seed_ranges: Vec<SeedRange>,
    pub warnings: Vec<String>,
    pub files: Vec<FileEntry>,
}

/// Everything a command produces before it is written.
#[derive(Default)]
struct Outputs {
    results: Value,
    /// Rows `series,x,y,ci_lo,ci_hi`.
    plot: Vec<(String, f64, f64, f64, f64)>,
    extra: Vec<(String, String)>,
    seeds: Vec<SeedRange>,
    warnings: Vec<String>,
}

impl Outputs {
    fn plot_csv(&self) -> String {
        let mut out = String::from("series,x,y,ci_lo,ci_hi\n");
        for (s, x, y, lo, hi) in &self.plot {
            let _ = writeln!(out, "{s},{x},{y},{lo},{hi}");
        }
        out
    }
}

fn seeds(task: impl Into<String>, master_seed: u64, end: u64) -> SeedRange {
    SeedRange {
        task: task.into(),
        master_seed,
        start: 0,
        end,
    }
}

fn dir_id(u: &[i64]) -> String {
    u.iter().map(i64::to_string).collect::<Vec<_>>().join("_")
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("serializable")
}

fn mu_params(spec: &ExperimentSpec, direction: &[i64], seed: u64) -> MuParams {
    MuParams {
        p: spec.p,
        direction: direction.to_vec(),
        scales: spec.scales.clone(),
        replicas: spec.replicas,
        master_seed: seed,
        policy: spec.policy,
        anchor_rule: spec.anchor_rule,
        batches: 10,
    }
}

fn run_mu(spec: &ExperimentSpec, out: &mut Outputs) -> Result<(), RunError> {
    let mut estimates = Vec::new();
    for (k, u) in spec.directions.iter().enumerate() {
        let seed = percolab::lattice::sub_seed(spec.master_seed, k as u64);
        let est = estimate_mu_direction(&mu_params(spec, u, seed))?;
        let id = dir_id(u);
        for s in &est.sample.scales {
            out.plot.push((id.clone(), s.scale as f64, s.mean, s.ci_lo, s.ci_hi));
            if s.boundary_invalid + s.empty_anchor + s.disconnected > 0 {
                out.warnings.push(format!(
                    "mu {id} scale {}: {} boundary, {} empty-anchor, {} disconnected replicas rejected",
                    s.scale, s.boundary_invalid, s.empty_anchor, s.disconnected
                ));
            }
        }
        let end = est.sample.scales.last().map_or(0, |s| s.seed_end);
        out.seeds.push(seeds(format!("mu {id}"), seed, end));
        out.warnings.extend(est.warnings.iter().cloned());
        estimates.push(est);
    }
    out.results = json!({ "estimates": to_value(&estimates) });
    Ok(())
}

/// The spec's ball file, or a ball estimated with the spec's ball settings.
fn obtain_ball(spec: &ExperimentSpec, out: &mut Outputs) -> Result<NormBall, RunError> {
    if let Some(path) = &spec.ball {
        let text = std::fs::read_to_string(path).map_err(|source| RunError::Io {
            path: path.clone(),
            source,
        })?;
        let ball = NormBall::from_json(&text)?;
        if ball.d() != spec.d {
            return Err(SpecError::Field {
                field: "ball",
                reason: format!("ball has dimension {}, spec has {}", ball.d(), spec.d),
            }
            .into());
        }
        return Ok(ball);
    }
    let seed = percolab::lattice::sub_seed(spec.master_seed, u64::MAX);
    let params = BallParams {
        p: spec.p,
        d: spec.d,
        directions: spec.ball_directions,
        scales: vec![spec.ball_scale],
        replicas: spec.ball_replicas,
        master_seed: seed,
        policy: spec.policy,
        anchor_rule: spec.anchor_rule,
    };
    let est = estimate_mu_ball(&params)?;
    out.seeds.push(seeds("ball", seed, spec.ball_replicas));
    out.warnings
        .push("ball estimated on the fly; its gauge stands in for the true norm".into());
    Ok(est.ball)
}

fn run_ball(spec: &ExperimentSpec, out: &mut Outputs) -> Result<(), RunError> {
    let params = BallParams {
        p: spec.p,
        d: spec.d,
        directions: spec.ball_directions,
        scales: spec.scales.clone(),
        replicas: spec.replicas,
        master_seed: spec.master_seed,
        policy: spec.policy,
        anchor_rule: spec.anchor_rule,
    };
    let est = estimate_mu_ball(&params)?;
    for (k, e) in est.estimates.iter().enumerate() {
        let id = dir_id(&e.sample.direction);
        out.plot
            .push((format!("mu {id}"), k as f64, e.mu_hat, e.ci_lo, e.ci_hi));
        out.seeds.push(seeds(
            format!("ball {id}"),
            percolab::lattice::sub_seed(spec.master_seed, k as u64),
            e.sample.scales.last().map_or(0, |s| s.seed_end),
        ));
    }
    for v in est.ball.vertices() {
        out.plot.push(("vertex".into(), v[0], v[1], v[1], v[1]));
    }
    out.extra.push(("ball.json".into(), est.ball.to_json()));
    out.results = json!({
        "constants": to_value(&est.ball.constants()),
        "estimates": to_value(&est.estimates),
        "ball": to_value(&est.ball),
    });
    Ok(())
}

fn rate_plot(r: &RateEstimate, out: &mut Outputs) {
    let series = format!("{:?}", r.tail).to_lowercase();
    for i in 0..r.scales.len() {
        let iv = wilson_interval(r.counts[i], r.totals[i]);
        let nl = |p: f64| if p > 0.0 { -p.ln() } else { f64::INFINITY };
        out.plot
            .push((series.clone(), r.x[i], nl(iv.mean), nl(iv.hi), nl(iv.lo)));
    }
    if r.fit.is_none() {
        out.warnings.push(format!(
            "{series} tail: fewer than 3 scales with events; rule-of-three bounds reported"
        ));
    }
    if r.invalid.iter().any(|&u| u > 0) {
        out.warnings.push(format!(
            "{series} tail: {:?} replicas undecidable inside the window were excluded",
            r.invalid
        ));
    }
}

fn run_rate(spec: &ExperimentSpec, out: &mut Outputs) -> Result<(), RunError> {
    let ball = obtain_ball(spec, out)?;
    let mut results = Vec::new();
    for (k, u) in spec.directions.iter().enumerate() {
        let seed = percolab::lattice::sub_seed(spec.master_seed, k as u64);
        let params = RateParams {
            p: spec.p,
            direction: u.clone(),
            eps: spec.eps,
            scales: spec.scales.clone(),
            replicas: spec.replicas,
            master_seed: seed,
            policy: spec.policy,
        };
        let (upper, lower) = estimate_deviation_rate(&params, &ball)?;
        out.seeds.push(seeds(
            format!("rate {}", dir_id(u)),
            seed,
            spec.scales.len() as u64 * spec.replicas,
        ));
        rate_plot(&upper, out);
        rate_plot(&lower, out);
        out.extra
            .push((format!("rate_upper_{}.csv", dir_id(u)), upper.to_csv()));
        out.extra
            .push((format!("rate_lower_{}.csv", dir_id(u)), lower.to_csv()));
        results.push(json!({ "upper": to_value(&upper), "lower": to_value(&lower) }));
    }
    out.results = json!({ "rates": results, "ball": to_value(&ball) });
    Ok(())
}

fn run_shape(spec: &ExperimentSpec, out: &mut Outputs) -> Result<(), RunError> {
    let ball = obtain_ball(spec, out)?;
    let accepted = spec.accepted.unwrap_or(spec.replicas);
    let params = ShapeParams {
        p: spec.p,
        eps: spec.eps,
        times: spec.times.clone(),
        accepted,
        max_attempts: accepted.saturating_mul(20),
        master_seed: spec.master_seed,
        policy: spec.policy,
    };
    let stat = shape_deviation_curve(&params, &ball)?;
    for (i, &t) in stat.times.iter().enumerate() {
        let iv = wilson_interval(stat.exceed[i], stat.accepted);
        out.plot.push(("fraction".into(), t, iv.mean, iv.lo, iv.hi));
    }
    out.seeds.push(seeds("shape", spec.master_seed, stat.attempted));
    out.warnings.push(format!(
        "shape: {} of {} replicas rejected (origin outside the giant cluster)",
        stat.attempted - stat.accepted,
        stat.attempted
    ));
    out.extra.push(("shape.csv".into(), stat.to_csv()));
    out.results = json!({ "shape": to_value(&stat), "ball": to_value(&ball) });
    Ok(())
}

fn run_pbar(spec: &ExperimentSpec, out: &mut Outputs) -> Result<(), RunError> {
    let ball = obtain_ball(spec, out)?;
    let params = PbarParams {
        p: spec.p,
        d: spec.d,
        ns: spec.ns.clone(),
        m: spec.m,
        eta: spec.eta,
        replicas: spec.replicas,
        master_seed: spec.master_seed,
        macro_side: spec.macro_side,
        anchor_rule: spec.anchor_rule,
        policy: spec.policy,
    };
    let report = estimate_pbar(&params, &ball)?;
    for (k, c) in report.curves.iter().enumerate() {
        for pt in &c.points {
            out.plot
                .push((c.rhat_id.clone(), pt.n as f64, pt.mean, pt.ci_lo, pt.ci_hi));
        }
        out.seeds.push(seeds(
            format!("pbar {}", c.rhat_id),
            percolab::lattice::sub_seed(spec.master_seed, k as u64),
            spec.ns.len() as u64 * spec.replicas,
        ));
    }
    for pt in &report.min_curve {
        out.plot.push(("min".into(), pt.n as f64, pt.mean, pt.ci_lo, pt.ci_hi));
    }
    if !report.uniform {
        out.warnings
            .push("pbar: some direction lies outside the joint interval of the minimum".into());
    }
    out.extra.push(("pbar.csv".into(), report.to_csv()));
    out.results = json!({ "pbar": to_value(&report) });
    Ok(())
}

fn tail_plot(c: &TailCurve, out: &mut Outputs) {
    for (i, &r) in c.radii.iter().enumerate() {
        let iv = wilson_interval(c.counts[i], c.replicas);
        out.plot.push((c.event.clone(), r as f64, iv.mean, iv.lo, iv.hi));
    }
    if c.fit.is_none() {
        out.warnings
            .push(format!("{}: fewer than 3 radii with events, no fit", c.event));
    }
}

fn run_tails(spec: &ExperimentSpec, out: &mut Outputs) -> Result<(), RunError> {
    let dist_seed = percolab::lattice::sub_seed(spec.master_seed, 0);
    let distance = distance_ratio_tail(&DistanceTailParams {
        p: spec.p,
        direction: spec.directions[0].clone(),
        ratio: spec.ratio,
        radii: spec.radii.clone(),
        replicas: spec.replicas,
        master_seed: dist_seed,
        policy: spec.policy,
    })?;
    let cluster_seed = percolab::lattice::sub_seed(spec.master_seed, 1);
    let (finite, hole) = tail_statistics(&TailParams {
        p: spec.p,
        d: spec.d,
        radii: spec.radii.clone(),
        replicas: spec.replicas,
        master_seed: cluster_seed,
        half_width: None,
    })?;
    // Unwired components are measured in a window as wide as the largest
    // radius, with the radii reused as component-size thresholds.
    let unwired_seed = percolab::lattice::sub_seed(spec.master_seed, 2);
    let half = spec.radii.last().copied().unwrap_or(1);
    let unwired = largest_component_tail(spec.p, spec.d, half, &spec.radii, spec.replicas, unwired_seed)?;
    out.seeds.push(seeds("distance tail", dist_seed, spec.replicas));
    out.seeds.push(seeds("cluster tails", cluster_seed, spec.replicas));
    out.seeds
        .push(seeds("unwired component tail", unwired_seed, spec.replicas));
    let mut csv = String::from("event,radius,count,replicas\n");
    for c in [&distance, &finite, &hole, &unwired] {
        tail_plot(c, out);
        for (r, n) in c.radii.iter().zip(&c.counts) {
            let _ = writeln!(csv, "{},{r},{n},{}", c.event, c.replicas);
        }
    }
    out.extra.push(("tails.csv".into(), csv));
    out.results = json!({ "curves": [to_value(&distance), to_value(&finite), to_value(&hole), to_value(&unwired)] });
    Ok(())
}

/// Directions sampled for the adapted-basis ratio envelope in `diag`.
const RATIO_ENVELOPE_SAMPLES: usize = 2000;

fn run_diag(spec: &ExperimentSpec, out: &mut Outputs) -> Result<(), RunError> {
    let mut rows = Vec::new();
    for (k, u) in spec.directions.iter().enumerate() {
        let seed = percolab::lattice::sub_seed(spec.master_seed, k as u64);
        let face = detect_flat_face(&mu_params(spec, u, seed), spec.flat_tolerance)?;
        let l1: f64 = u.iter().map(|v| v.abs() as f64).sum();
        let bounds = theoretical_rate_bounds(spec.p, spec.eps, spec.d, face.estimate.mu_hat, l1);
        let id = dir_id(u);
        out.plot
            .push((format!("ratio {id}"), k as f64, face.ratio, face.ci_lo, face.ci_hi));
        out.seeds.push(seeds(
            format!("diag {id}"),
            seed,
            face.estimate.sample.scales.last().map_or(0, |s| s.seed_end),
        ));
        rows.push(json!({ "direction": u, "flat_face": to_value(&face), "rate_bounds": to_value(&bounds) }));
    }
    let envelope_seed = percolab::lattice::sub_seed(spec.master_seed, spec.directions.len() as u64);
    let envelope = sampled_ratio_envelope(spec.d, RATIO_ENVELOPE_SAMPLES, envelope_seed)?;
    out.seeds
        .push(seeds("ratio envelope", envelope_seed, RATIO_ENVELOPE_SAMPLES as u64));
    out.results = json!({ "diagnostics": rows, "adapted_ratio_envelope": to_value(&envelope) });
    Ok(())
}

fn hash(name: &str, body: &str) -> FileEntry {
    FileEntry {
        name: name.to_string(),
        sha256: hex::encode(Sha256::digest(body.as_bytes())),
        bytes: body.len(),
    }
}

fn write(dir: &Path, name: &str, body: &str) -> Result<FileEntry, RunError> {
    let path = dir.join(name);
    std::fs::write(&path, body).map_err(|source| RunError::Io { path, source })?;
    Ok(hash(name, body))
}

/// Runs the experiment, writes its files and finally the manifest.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<RunManifest, RunError> {
    spec.validate()?;
    let start = Instant::now();
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = spec.threads {
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| RunError::Threads(e.to_string()))?;
    let mut out = Outputs::default();
    pool.install(|| match spec.command {
        Command::Mu => run_mu(spec, &mut out),
        Command::Ball => run_ball(spec, &mut out),
        Command::Rate => run_rate(spec, &mut out),
        Command::Shape => run_shape(spec, &mut out),
        Command::Pbar => run_pbar(spec, &mut out),
        Command::Tails => run_tails(spec, &mut out),
        Command::Diag => run_diag(spec, &mut out),
    })?;

    std::fs::create_dir_all(&spec.output).map_err(|source| RunError::Io {
        path: spec.output.clone(),
        source,
    })?;
    let results = json!({
        "command": spec.command,
        "spec": to_value(spec),
        "library_version": percolab_version(),
        "seed_ranges": to_value(&out.seeds),
        "warnings": out.warnings,
        "results": out.results,
    });
    let mut files = vec![
        write(
            &spec.output,
            "results.json",
            &serde_json::to_string_pretty(&results).expect("serializable"),
        )?,
        write(&spec.output, "plot.csv", &out.plot_csv())?,
    ];
    for (name, body) in &out.extra {
        files.push(write(&spec.output, name, body)?);
    }
    let manifest = RunManifest {
        spec: spec.clone(),
        library_version: percolab_version(),
        wall_seconds: start.elapsed().as_secs_f64(),
        threads: pool.current_num_threads(),
        seed_ranges: out.seeds,
        warnings: out.warnings,
        files,
    };
    write(
        &spec.output,
        "manifest.json",
        &serde_json::to_string_pretty(&manifest).expect("serializable"),
    )?;
    Ok(manifest)
}

fn percolab_version() -> String {
    env!("CARGO_PKG_VERSION").to_string()
}
