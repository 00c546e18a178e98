//! The `sphere-qm` command line: manifest loading, flag overrides, result
//! caching and JSON-lines / CSV emission.
//!
//! Every JSON record is `{command, manifest, conventions, result, meta}`
//! with sorted keys; `meta` holds the timestamp and cache flag, so two runs
//! of one manifest differ only there.

use crate::acceptance::{self, Scale};
use crate::braids::{choose_direction, extract_braid, planarize, Diagram, PlanarLoop};
use crate::config::{basepoint, sample_configuration, trace_loop, CacheKey, LoopCache, CACHE_ENV};
use crate::conventions::conventions_json;
use crate::error::{Error, Result};
use crate::flows::{default_dt, lp_length, FlowSpec};
use crate::forms::{average_form_action, FormIndex};
use crate::gg::{build_embedding, embedding_phi_estimates, gg_estimate, sign_qm_closed_form, word_norm_report};
use crate::manifest::{Command, ExperimentManifest, Invariant};
use crate::mc::sample_rng;
use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64 as C;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

#[derive(Debug, Parser)]
#[command(name = "sphere-qm", version, about = "Braid quasimorphisms of area-preserving flows on the sphere")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Sub,
}

#[derive(Debug, Subcommand)]
pub enum Sub {
    /// Trajectories of sampled points and L^p lengths of the flow.
    Simulate(Common),
    /// Braid word of one traced loop (or of an explicit planar loop).
    Braid(Common),
    /// Monte Carlo average of an invariant over configuration space.
    Estimate(Common),
    /// Closed-form quasimorphism values of rotational flows.
    ClosedForm(Common),
    /// Build the quasimorphism embedding and estimate its dual basis.
    Embed(Common),
    /// Run the acceptance suite.
    Verify {
        #[command(flatten)]
        common: Common,
        /// Smaller sample sizes, same tolerances.
        #[arg(long)]
        quick: bool,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Args)]
pub struct Common {
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub samples: Option<usize>,
    /// Worker threads; 0 uses all cores. Never changes results.
    #[arg(long, default_value_t = 0)]
    pub workers: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "json")]
    pub format: Format,
}

/// A table for CSV export.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    fn new(header: &[&str]) -> Self {
        Table { header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    fn push(&mut self, row: Vec<String>) {
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let io = |e: csv::Error| Error::Io(e.to_string());
        w.write_record(&self.header).map_err(io)?;
        for r in &self.rows {
            w.write_record(r).map_err(io)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| Error::Io(e.to_string()))
    }
}

/// What a command produces: a JSON result and its tabular form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Outcome {
    pub result: Value,
    pub table: Table,
}

/// Parses `args` (including the program name) and runs; returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(cli: Cli) -> Result<i32> {
    let (command, common, quick) = match cli.command {
        Sub::Simulate(c) => (Command::Simulate, c, false),
        Sub::Braid(c) => (Command::Braid, c, false),
        Sub::Estimate(c) => (Command::Estimate, c, false),
        Sub::ClosedForm(c) => (Command::ClosedForm, c, false),
        Sub::Embed(c) => (Command::Embed, c, false),
        Sub::Verify { common, quick } => (Command::Verify, common, quick),
    };
    let mut manifest = match &common.manifest {
        Some(path) => {
            let m = ExperimentManifest::load(path)?;
            if m.command != command {
                return Err(Error::Invalid(format!(
                    "manifest is for `{}`, not `{}`",
                    m.command.name(),
                    command.name()
                )));
            }
            m
        }
        None => {
            let mut m = ExperimentManifest::new(command);
            if command == Command::Verify {
                m.seed = acceptance::DEFAULT_SEED;
            }
            m
        }
    };
    if let Some(s) = common.seed {
        manifest.seed = s;
    }
    if let Some(s) = common.samples {
        manifest.samples = s;
    }
    if let Some(o) = &common.out {
        manifest.output = Some(o.clone());
    }
    manifest.options.quick |= quick;
    manifest.validate()?;

    if command == Command::Verify {
        return verify(&manifest, common.format);
    }

    let cache_dir = std::env::var_os(CACHE_ENV).map(PathBuf::from);
    let key = manifest.cache_key();
    let cached = match &cache_dir {
        Some(dir) => read_cached(dir, &key)?,
        None => None,
    };
    let hit = cached.is_some();
    let outcome = match cached {
        Some(o) => o,
        None => {
            let o = execute(&manifest, common.workers)?;
            if let Some(dir) = &cache_dir {
                write_cached(dir, &key, &o)?;
            }
            o
        }
    };
    emit(&manifest, &key, &outcome, hit, common.format)?;
    Ok(0)
}

fn result_path(dir: &Path, key: &str) -> PathBuf {
    dir.join("results").join(format!("{key}.json"))
}

fn read_cached(dir: &Path, key: &str) -> Result<Option<Outcome>> {
    match std::fs::read_to_string(result_path(dir, key)) {
        Ok(text) => Ok(Some(serde_json::from_str(&text)?)),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
        Err(e) => Err(e.into()),
    }
}

fn write_cached(dir: &Path, key: &str, outcome: &Outcome) -> Result<()> {
    let path = result_path(dir, key);
    std::fs::create_dir_all(path.parent().expect("results dir"))?;
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, serde_json::to_vec(outcome)?)?;
    std::fs::rename(tmp, path)?;
    Ok(())
}

/// The deterministic part of a JSON record.
pub fn record(manifest: &ExperimentManifest, key: &str, result: &Value) -> Value {
    json!({
        "command": manifest.command.name(),
        "manifest": key,
        "conventions": conventions_json(),
        "result": result,
    })
}

fn emit(manifest: &ExperimentManifest, key: &str, outcome: &Outcome, cached: bool, format: Format) -> Result<()> {
    match format {
        Format::Json => {
            let mut rec = record(manifest, key, &outcome.result);
            let stamp = std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0);
            rec["meta"] = json!({ "timestamp_unix": stamp, "cached": cached });
            let line = format!("{}\n", serde_json::to_string(&rec)?);
            match &manifest.output {
                Some(path) => {
                    let mut f = std::fs::OpenOptions::new().create(true).append(true).open(path)?;
                    f.write_all(line.as_bytes())?;
                }
                None => print!("{line}"),
            }
        }
        Format::Csv => {
            let text = outcome.table.to_csv()?;
            match &manifest.output {
                Some(path) => std::fs::write(path, text)?,
                None => print!("{text}"),
            }
        }
    }
    Ok(())
}

fn fmt(x: f64) -> String {
    format!("{x}")
}

/// Runs one non-verify command.
pub fn execute(m: &ExperimentManifest, workers: usize) -> Result<Outcome> {
    match m.command {
        Command::Simulate => simulate(m),
        Command::Braid => braid(m),
        Command::Estimate => estimate(m, workers),
        Command::ClosedForm => closed_form(m),
        Command::Embed => embed(m, workers),
        Command::Verify => Err(Error::Invalid("verify is not a table command".into())),
    }
}

fn simulate(m: &ExperimentManifest) -> Result<Outcome> {
    let flow = m.flow_or_default();
    let steps = m.options.t_steps.max(1);
    let big_t = flow.duration();
    let dt = m.options.dt.unwrap_or_else(|| default_dt(&flow));
    let mut rng = sample_rng(m.seed, 0);
    let times: Vec<f64> = (0..=steps).map(|k| big_t * k as f64 / steps as f64).collect();
    let mut trajectories = Vec::with_capacity(m.n);
    for _ in 0..m.n {
        let mut p = crate::sphere::sample_uniform(&mut rng);
        let mut path = vec![p.to_unit_vector()];
        for w in times.windows(2) {
            p = flow.advance(&p, w[0], w[1], dt)?;
            path.push(p.to_unit_vector());
        }
        trajectories.push(path);
    }
    let mut table = Table::new(&["p", "value", "stderr"]);
    let mut lengths = Vec::new();
    for &p in &m.options.p_values {
        let l = lp_length(&flow, p, steps, m.samples, m.seed)?;
        table.push(vec![fmt(p), fmt(l.value), fmt(l.stderr)]);
        lengths.push(json!({ "p": p, "value": l.value, "stderr": l.stderr }));
    }
    Ok(Outcome { result: json!({ "times": times, "trajectories": trajectories, "lengths": lengths }), table })
}

fn diagram_outcome(theta: f64, d: &Diagram, strands: usize) -> Result<Outcome> {
    let mut table = Table::new(&["t", "over", "under", "position", "sign"]);
    for e in &d.events {
        table.push(vec![fmt(e.t), e.strands.0.to_string(), e.strands.1.to_string(), e.position.to_string(), e.sign.to_string()]);
    }
    Ok(Outcome {
        result: json!({
            "word": d.word.to_string(),
            "theta": theta,
            "strands": strands,
            "pure": d.word.is_pure(),
            "crossings": d.events.len(),
        }),
        table,
    })
}

fn braid(m: &ExperimentManifest) -> Result<Outcome> {
    let mut rng = sample_rng(m.seed, 1);
    let planar = match &m.options.planar_loop {
        Some(samples) => {
            let points = samples.iter().map(|s| s.iter().map(|&[re, im]| C::new(re, im)).collect()).collect();
            PlanarLoop::from_points(points)?
        }
        None => {
            let flow = m.flow_or_default();
            let dt = m.options.dt.unwrap_or_else(|| default_dt(&flow));
            let key = CacheKey::new(&flow, m.seed, m.n, dt, m.options.path_system);
            let cache = LoopCache::from_env();
            let cached = match &cache {
                Some(c) => c.get(&key)?,
                None => None,
            };
            let lp = match cached {
                Some(lp) => lp,
                None => {
                    let x = sample_configuration(m.n, m.seed)?;
                    let lp = trace_loop(&flow, &x, &basepoint(m.n, 0), m.options.path_system, dt)?;
                    if let Some(c) = &cache {
                        c.put(&key, &lp)?;
                    }
                    lp
                }
            };
            planarize(&lp)?
        }
    };
    let (theta, d) = match m.options.theta {
        Some(theta) => (theta, extract_braid(&planar, theta)?),
        None => choose_direction(&planar, m.options.c, &mut rng)?,
    };
    diagram_outcome(theta, &d, planar.strands())
}

fn estimate(m: &ExperimentManifest, workers: usize) -> Result<Outcome> {
    let flow = m.flow_or_default();
    let opts = m.estimate_options(workers);
    let invariant = m.invariant.unwrap_or(Invariant::SBar);
    let mut extra = json!({});
    let est = match invariant.base() {
        Some(base) => gg_estimate(&flow, base, m.n, m.samples, m.seed, &opts)?,
        None if invariant == Invariant::WordNorm => {
            let r = word_norm_report(&flow, m.n, m.samples, m.seed, m.options.c, &opts)?;
            extra = json!({ "l1": r.l1, "l1_stderr": r.l1_stderr });
            r.word_norm
        }
        None => {
            let nu = m.options.form.unwrap_or(FormIndex::AtZero(1));
            nu.validate(m.n.saturating_sub(3))?;
            average_form_action(&flow, m.n, nu, m.samples, m.seed, workers)?
        }
    };
    let mut table = Table::new(&["invariant", "n", "samples", "seed", "mean", "stderr", "resamples"]);
    let name = serde_json::to_value(invariant)?.as_str().unwrap_or_default().to_string();
    table.push(vec![
        name.clone(),
        m.n.to_string(),
        est.n_samples.to_string(),
        m.seed.to_string(),
        fmt(est.mean),
        fmt(est.stderr),
        est.resamples.to_string(),
    ]);
    let mut result = serde_json::to_value(est)?;
    result["invariant"] = json!(name);
    if let (Some(r), Some(e)) = (result.as_object_mut(), extra.as_object()) {
        r.extend(e.clone());
    }
    Ok(Outcome { result, table })
}

fn closed_form(m: &ExperimentManifest) -> Result<Outcome> {
    let (profiles, duration) = match (&m.options.profiles, &m.flow) {
        (p, f) if !p.is_empty() => (p.clone(), f.as_ref().map_or(1.0, FlowSpec::duration)),
        (_, Some(FlowSpec::Rotational { profile, duration })) => (vec![profile.clone()], *duration),
        (_, Some(_)) => return Err(Error::Invalid("closed form needs a rotational flow or explicit profiles".into())),
        (_, None) => {
            let FlowSpec::Rotational { profile, duration } = m.flow_or_default() else { unreachable!() };
            (vec![profile], duration)
        }
    };
    let ns = if m.options.ns.is_empty() {
        if m.n % 2 != 0 {
            return Err(Error::Invalid(format!("Sign needs an even number of points, got {}", m.n)));
        }
        vec![m.n / 2]
    } else {
        m.options.ns.clone()
    };
    let mut table = Table::new(&["profile", "n", "points", "duration", "value"]);
    let mut rows = Vec::new();
    for (i, p) in profiles.iter().enumerate() {
        for &n in &ns {
            let v = duration * sign_qm_closed_form(p, n)?;
            table.push(vec![i.to_string(), n.to_string(), (2 * n).to_string(), fmt(duration), fmt(v)]);
            rows.push(json!({ "profile": i, "n": n, "points": 2 * n, "duration": duration, "value": v }));
        }
    }
    Ok(Outcome { result: json!({ "values": rows }), table })
}

fn embed(m: &ExperimentManifest, workers: usize) -> Result<Outcome> {
    let spec = build_embedding(m.options.d, m.seed)?;
    let opts = m.estimate_options(workers);
    let mut table = Table::new(&["i", "j", "matrix", "coefficient", "phi_mean", "phi_stderr"]);
    let mut estimates = Vec::new();
    for j in 0..spec.d {
        let est = embedding_phi_estimates(&spec, j, 1.0, m.samples, m.seed.wrapping_add(j as u64), &opts)?;
        for (i, e) in est.iter().enumerate() {
            table.push(vec![
                i.to_string(),
                j.to_string(),
                fmt(spec.matrix[i][j]),
                fmt(spec.coefficients[i][j]),
                fmt(e.mean),
                fmt(e.stderr),
            ]);
        }
        estimates.push(est);
    }
    Ok(Outcome { result: json!({ "embedding": spec, "phi": estimates }), table })
}

fn verify(m: &ExperimentManifest, format: Format) -> Result<i32> {
    let scale = if m.options.quick { Scale::Quick } else { Scale::Full };
    let ids: Vec<u32> = if m.options.criteria.is_empty() { (1..=10).collect() } else { m.options.criteria.clone() };
    let mut reports = Vec::new();
    for id in ids {
        let r = acceptance::run_criterion(id, scale, m.seed);
        println!("{r}");
        reports.push(r);
    }
    let mut table = Table::new(&["id", "name", "passed", "seconds", "detail"]);
    for r in &reports {
        table.push(vec![r.id.to_string(), r.name.clone(), r.passed.to_string(), format!("{:.1}", r.seconds), r.detail.clone()]);
    }
    if m.output.is_some() {
        let outcome = Outcome { result: serde_json::to_value(&reports)?, table };
        emit(m, &m.cache_key(), &outcome, false, format)?;
    }
    let failed: Vec<String> = reports.iter().filter(|r| !r.passed).map(|r| format!("{} ({})", r.id, r.name)).collect();
    if failed.is_empty() {
        Ok(0)
    } else {
        eprintln!("failed criteria: {}", failed.join(", "));
        Ok(2)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_form_default_is_minus_four_fifteenths() {
        let o = execute(&ExperimentManifest::new(Command::ClosedForm), 0).unwrap();
        let v = o.result["values"][0]["value"].as_f64().unwrap();
        assert!((v + 4.0 / 15.0).abs() < 1e-10);
        assert_eq!(o.table.rows.len(), 1);
    }

    #[test]
    fn two_point_orbit_gives_sigma_squared() {
        let mut m = ExperimentManifest::new(Command::Braid);
        let k = 64;
        let loop_points = (0..=k)
            .map(|s| {
                let a = 2.0 * std::f64::consts::PI * s as f64 / k as f64;
                vec![[0.5 * a.cos(), 0.5 * a.sin()], [-0.5 * a.cos(), -0.5 * a.sin()]]
            })
            .collect();
        m.options.planar_loop = Some(loop_points);
        m.options.c = 2.0;
        let o = execute(&m, 0).unwrap();
        assert_eq!(o.result["word"], "2: 1 1");
    }

    #[test]
    fn record_is_deterministic() {
        let m = ExperimentManifest::new(Command::ClosedForm);
        let a = execute(&m, 0).unwrap();
        let b = execute(&m, 0).unwrap();
        let key = m.cache_key();
        assert_eq!(
            serde_json::to_string(&record(&m, &key, &a.result)).unwrap(),
            serde_json::to_string(&record(&m, &key, &b.result)).unwrap()
        );
    }

    #[test]
    fn bad_flags_and_mismatched_manifest_exit_one() {
        assert_eq!(run(["sphere-qm", "estimate", "--format", "xml"]), 1);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.json");
        std::fs::write(&path, r#"{"command": "braid"}"#).unwrap();
        assert_eq!(run(["sphere-qm".as_ref(), "embed".as_ref(), "--manifest".as_ref(), path.as_os_str()]), 1);
    }

    #[test]
    fn cache_hit_reproduces_cold_result() {
        let dir = tempfile::tempdir().unwrap();
        let m = ExperimentManifest::new(Command::ClosedForm);
        let cold = execute(&m, 0).unwrap();
        write_cached(dir.path(), &m.cache_key(), &cold).unwrap();
        assert_eq!(read_cached(dir.path(), &m.cache_key()).unwrap(), Some(cold));
    }
}
