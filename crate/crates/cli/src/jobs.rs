use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use anyhow::{bail, Context, Result};
use miclab::bounds_lab::{self, DemoConfig, LabConfig, LabSummary};
use miclab::dist::JointModel;
use miclab::info;
use miclab::mic::{self, CharacteristicMatrix, SearchConfig};
use miclab::rng::RNG_ALGORITHM;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::config::{self, Manifest};
use crate::ingest::ingest_points;
use crate::output::OutputDir;

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Command {
    MicSample,
    MicPopulation,
    LabStraddle,
    LabTv,
    LabConsistency,
    LabChernoffDemo,
    Fit,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::MicSample => "mic-sample",
            Command::MicPopulation => "mic-population",
            Command::LabStraddle => "lab-straddle",
            Command::LabTv => "lab-tv",
            Command::LabConsistency => "lab-consistency",
            Command::LabChernoffDemo => "lab-chernoff-demo",
            Command::Fit => "fit",
        }
    }

    /// Config key set by `--seed`.
    fn seed_key(self) -> Option<&'static str> {
        match self {
            Command::MicSample => Some("seed"),
            Command::LabStraddle | Command::LabTv | Command::LabConsistency => Some("master_seed"),
            _ => None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct JobSpec {
    pub command: Command,
    pub config_path: PathBuf,
    pub output_dir: PathBuf,
    pub overrides: Vec<String>,
    pub seed: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Status {
    Ok,
    /// A bound that holds with certainty was violated.
    InvariantViolated(String),
}

impl Status {
    pub fn exit_code(&self) -> u8 {
        match self {
            Status::Ok => 0,
            Status::InvariantViolated(_) => 2,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Report {
    pub status: Status,
    pub summary: String,
    pub artifacts: Vec<String>,
}

struct Outcome {
    status: Status,
    summary: String,
    resolved: Value,
}

/// Runs one job; config problems and I/O failures are errors, invariant
/// violations are reported through [`Status`].
pub fn run(job: &JobSpec) -> Result<Report> {
    let started = Instant::now();
    let raw = config::load(&job.config_path)?;
    let (mut value, base) = match Manifest::detect(&raw) {
        Some(m) => {
            if m.command != job.command.name() {
                bail!("manifest is for `{}`, not `{}`", m.command, job.command.name());
            }
            (m.config, PathBuf::new())
        }
        None => (raw, job.config_path.parent().map(Path::to_path_buf).unwrap_or_default()),
    };
    for assignment in &job.overrides {
        config::apply_override(&mut value, assignment)?;
    }
    if let Some(seed) = job.seed {
        let Some(key) = job.command.seed_key() else {
            bail!("`{}` does not take a seed", job.command.name());
        };
        config::apply_override(&mut value, &format!("{key}={seed}"))?;
    }

    let mut out = OutputDir::create(&job.output_dir)?;
    let outcome = match job.command {
        Command::MicSample => mic_sample(value, &base, &mut out)?,
        Command::MicPopulation => mic_population(value, &mut out)?,
        Command::LabStraddle => lab_straddle(value, &mut out)?,
        Command::LabTv => lab_tv(value, &mut out)?,
        Command::LabConsistency => lab_consistency(value, &mut out)?,
        Command::LabChernoffDemo => chernoff_demo(value, &mut out)?,
        Command::Fit => fit(value, &base, &mut out)?,
    };

    let mut artifacts = out.written().to_vec();
    artifacts.push("manifest.json".into());
    let manifest = Manifest {
        command: job.command.name().into(),
        config: outcome.resolved,
        overrides: job.overrides.clone(),
        rng_algorithm: RNG_ALGORITHM.into(),
        tool_version: env!("CARGO_PKG_VERSION").into(),
        wall_time_seconds: started.elapsed().as_secs_f64(),
        timestamp_unix: SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()),
        artifacts: artifacts.clone(),
    };
    out.write_json("manifest.json", &manifest)?;
    Ok(Report { status: outcome.status, summary: outcome.summary, artifacts })
}

fn typed<T: serde::de::DeserializeOwned>(value: Value, command: Command) -> Result<T> {
    serde_json::from_value(value).with_context(|| format!("invalid config for `{}`", command.name()))
}

fn resolve_path(base: &Path, path: &Path) -> Result<PathBuf> {
    let joined = if path.is_absolute() { path.to_path_buf() } else { base.join(path) };
    joined.canonicalize().with_context(|| format!("resolving {}", joined.display()))
}

fn default_m() -> usize {
    mic::DEFAULT_CANDIDATE_M
}

fn default_alpha() -> f64 {
    mic::DEFAULT_ALPHA
}

fn default_limit() -> u64 {
    mic::DEFAULT_EXHAUSTIVE_LIMIT
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MicSampleConfig {
    /// Points CSV; relative paths are taken from the config's directory.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    points: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    model: Option<JointModel>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    n: Option<usize>,
    #[serde(default)]
    seed: u64,
    #[serde(default = "default_m")]
    candidate_m: usize,
    /// Defaults to `floor(n^alpha)`.
    #[serde(default)]
    max_cells: Option<usize>,
    #[serde(default = "default_alpha")]
    alpha: f64,
    #[serde(default = "default_limit")]
    exhaustive_limit: u64,
}

fn matrix_summary(cm: &CharacteristicMatrix) -> Result<Value> {
    Ok(json!({
        "mic": mic::mic_value(cm)?,
        "entries": cm.len(),
        "max_cells": cm.max_cells,
        "candidate_m": cm.candidate_m,
        "x_candidates": cm.x_candidates,
        "y_candidates": cm.y_candidates,
        "exhaustive": true,
    }))
}

fn normalization_check(cm: &CharacteristicMatrix) -> Status {
    match cm.entries().find(|(_, e)| !(e.value >= -mic::NORMALIZATION_SLACK && e.value <= 1.0 + mic::NORMALIZATION_SLACK)) {
        Some((key, e)) => Status::InvariantViolated(format!("entry {key:?} = {} outside [0, 1]", e.value)),
        None => Status::Ok,
    }
}

fn mic_sample(value: Value, base: &Path, out: &mut OutputDir) -> Result<Outcome> {
    let mut cfg: MicSampleConfig = typed(value, Command::MicSample)?;
    let data = match (&cfg.points, &cfg.model, cfg.n) {
        (Some(path), None, None) => {
            let path = resolve_path(base, path)?;
            let data = ingest_points(&path)?;
            cfg.points = Some(path);
            cfg.seed = 0;
            data
        }
        (None, Some(model), Some(n)) => model.sample(n, cfg.seed)?,
        _ => bail!("`mic-sample` needs either `points` or both `model` and `n`"),
    };
    let max_cells = *cfg.max_cells.get_or_insert_with(|| mic::budget(data.n(), cfg.alpha, 1.0));
    let search = SearchConfig { candidate_m: cfg.candidate_m, max_cells, exhaustive_limit: cfg.exhaustive_limit };
    let cm = mic::sample_char_matrix(&data, &search)?;
    out.write("matrix.csv", cm.to_csv().as_bytes())?;
    let mut summary = matrix_summary(&cm)?;
    summary["n"] = json!(data.n());
    out.write_json("summary.json", &summary)?;
    Ok(Outcome {
        status: normalization_check(&cm),
        summary: format!("sample MIC = {} over {} entries (n = {}, B = {max_cells})", summary["mic"], cm.len(), data.n()),
        resolved: serde_json::to_value(&cfg)?,
    })
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MicPopulationConfig {
    model: JointModel,
    #[serde(default = "default_m")]
    candidate_m: usize,
    max_cells: usize,
    #[serde(default = "default_limit")]
    exhaustive_limit: u64,
}

fn mic_population(value: Value, out: &mut OutputDir) -> Result<Outcome> {
    let cfg: MicPopulationConfig = typed(value, Command::MicPopulation)?;
    let search =
        SearchConfig { candidate_m: cfg.candidate_m, max_cells: cfg.max_cells, exhaustive_limit: cfg.exhaustive_limit };
    let cm = mic::population_char_matrix(&cfg.model, &search)?;
    out.write("matrix.csv", cm.to_csv().as_bytes())?;
    let summary = matrix_summary(&cm)?;
    out.write_json("summary.json", &summary)?;
    Ok(Outcome {
        status: normalization_check(&cm),
        summary: format!("population MIC = {} over {} entries (B = {})", summary["mic"], cm.len(), cfg.max_cells),
        resolved: serde_json::to_value(&cfg)?,
    })
}

fn lab_status(summary: &LabSummary) -> Status {
    let mut broken = Vec::new();
    if summary.delta_violations > 0 {
        broken.push(format!("{} delta-bound violations", summary.delta_violations));
    }
    if summary.coarsening_violations > 0 {
        broken.push(format!("{} trials with TV on the snapped grid above TV on the equipartition", summary.coarsening_violations));
    }
    if summary.chain_violations > 0 {
        broken.push(format!("{} trials with deviation above the family gap", summary.chain_violations));
    }
    if broken.is_empty() {
        Status::Ok
    } else {
        Status::InvariantViolated(broken.join("; "))
    }
}

fn fit_text(fit: &Option<bounds_lab::FitResult>) -> String {
    fit.map_or("n/a".into(), |f| format!("{:.4} (r2 {:.4})", f.slope, f.r_squared))
}

fn lab_straddle(value: Value, out: &mut OutputDir) -> Result<Outcome> {
    let cfg: LabConfig = typed(value, Command::LabStraddle)?;
    let records = bounds_lab::run_straddle_trials(&cfg)?;
    let decompositions = bounds_lab::run_decomposition_trials(&cfg)?;
    let summary = bounds_lab::summarize(&records, &cfg.tolerances);
    let envelope = info::envelope_constant(decompositions.iter().map(|r| &r.breakdown));
    out.write("trials.csv", bounds_lab::trials_to_csv(&records).as_bytes())?;
    out.write("decomposition.csv", bounds_lab::decompositions_to_csv(&decompositions).as_bytes())?;
    out.write_json("summary.json", &json!({ "lab": summary, "envelope_constant": envelope }))?;
    Ok(Outcome {
        status: lab_status(&summary),
        summary: format!(
            "{} trials: {} delta-bound violations, d-bound violation rate {:.4} (tolerance {}), envelope constant {}",
            summary.trials,
            summary.delta_violations,
            summary.d_violation_rate,
            cfg.tolerances.d_violation_rate,
            envelope.map_or("n/a".into(), |c| format!("{c:.4}"))
        ),
        resolved: serde_json::to_value(&cfg)?,
    })
}

fn lab_tv(value: Value, out: &mut OutputDir) -> Result<Outcome> {
    let cfg: LabConfig = typed(value, Command::LabTv)?;
    let records = bounds_lab::run_tv_trials(&cfg)?;
    let summary = bounds_lab::summarize(&records, &cfg.tolerances);
    out.write("trials.csv", bounds_lab::trials_to_csv(&records).as_bytes())?;
    out.write_json("summary.json", &json!({ "lab": summary }))?;
    Ok(Outcome {
        status: lab_status(&summary),
        summary: format!(
            "{} trials: median-TV slope {}, {} coarsening violations",
            summary.trials,
            fit_text(&summary.tv_fit),
            summary.coarsening_violations
        ),
        resolved: serde_json::to_value(&cfg)?,
    })
}

fn lab_consistency(value: Value, out: &mut OutputDir) -> Result<Outcome> {
    let cfg: LabConfig = typed(value, Command::LabConsistency)?;
    let records = bounds_lab::run_consistency_trials(&cfg)?;
    let summary = bounds_lab::summarize(&records, &cfg.tolerances);
    out.write("trials.csv", bounds_lab::trials_to_csv(&records).as_bytes())?;
    out.write_json("summary.json", &json!({ "lab": summary }))?;
    let u = summary.deviation_fit.map_or("n/a".into(), |f| format!("{:.4}", -f.slope));
    Ok(Outcome {
        status: lab_status(&summary),
        summary: format!(
            "{} trials: u = {u}, median-deviation slope {}, {} chain violations",
            summary.trials,
            fit_text(&summary.deviation_fit),
            summary.chain_violations
        ),
        resolved: serde_json::to_value(&cfg)?,
    })
}

fn chernoff_demo(value: Value, out: &mut OutputDir) -> Result<Outcome> {
    let cfg: DemoConfig = typed(value, Command::LabChernoffDemo)?;
    let cmp = cfg.evaluate()?;
    let vacuous = cmp.corrected_union > 1.0;
    let flawed_small = cmp.flawed < 1e-6;
    out.write_json(
        "chernoff_demo.json",
        &json!({
            "n": cfg.n,
            "epsilon": cfg.epsilon,
            "alpha": cfg.alpha,
            "cells": cfg.resolved_cells(),
            "pi": cfg.resolved_pi(),
            "flawed": cmp.flawed,
            "corrected_cell": cmp.corrected_cell,
            "corrected_union": cmp.corrected_union,
            "corrected_union_capped": cmp.corrected_union_capped,
            "corrected_union_vacuous": vacuous,
            "flawed_below_1e-6": flawed_small,
            "alpha_constraint": bounds_lab::alpha_constraint(cfg.epsilon).ok(),
        }),
    )?;
    let mut table = String::from("epsilon,alpha_max\n");
    for i in 1..100 {
        let eps = i as f64 / 100.0;
        table.push_str(&format!("{eps},{}\n", bounds_lab::alpha_constraint(eps)?));
    }
    out.write("alpha_constraint.csv", table.as_bytes())?;
    let mut resolved = serde_json::to_value(&cfg)?;
    resolved["cells"] = json!(cfg.resolved_cells());
    resolved["pi"] = json!(cfg.resolved_pi());
    Ok(Outcome {
        status: Status::Ok,
        summary: format!(
            "corrected_union = {:.4e} ({}), flawed = {:.4e} ({})",
            cmp.corrected_union,
            if vacuous { "> 1, vacuous" } else { "<= 1" },
            cmp.flawed,
            if flawed_small { "< 1e-6" } else { ">= 1e-6" }
        ),
        resolved,
    })
}

fn default_column() -> String {
    "tv".into()
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FitConfig {
    /// Literal `(n, value)` pairs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    points: Option<Vec<(f64, f64)>>,
    /// Trial CSV; the per-`n` median of `column` is fitted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    input: Option<PathBuf>,
    #[serde(default = "default_column")]
    column: String,
}

fn medians_from_csv(path: &Path, column: &str) -> Result<Vec<(f64, f64)>> {
    let mut reader = csv::Reader::from_path(path).with_context(|| format!("opening {}", path.display()))?;
    let headers = reader.headers()?.clone();
    let find = |name: &str| {
        headers.iter().position(|h| h == name).with_context(|| format!("{}: no column `{name}`", path.display()))
    };
    let (ni, vi) = (find("n")?, find(column)?);
    let mut groups: Vec<(f64, Vec<f64>)> = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record?;
        let line = row + 2;
        let n: f64 = record[ni].parse().with_context(|| format!("{}: line {line}: bad n", path.display()))?;
        if record[vi].is_empty() {
            continue;
        }
        let v: f64 = record[vi].parse().with_context(|| format!("{}: line {line}: bad {column}", path.display()))?;
        match groups.iter_mut().find(|g| g.0 == n) {
            Some(g) => g.1.push(v),
            None => groups.push((n, vec![v])),
        }
    }
    Ok(groups
        .into_iter()
        .map(|(n, mut vs)| {
            vs.sort_by(f64::total_cmp);
            let mid = vs.len() / 2;
            let median = if vs.len() % 2 == 0 { 0.5 * (vs[mid - 1] + vs[mid]) } else { vs[mid] };
            (n, median)
        })
        .collect())
}

fn fit(value: Value, base: &Path, out: &mut OutputDir) -> Result<Outcome> {
    let mut cfg: FitConfig = typed(value, Command::Fit)?;
    let points = match (&cfg.points, &cfg.input) {
        (Some(points), None) => points.clone(),
        (None, Some(path)) => {
            let path = resolve_path(base, path)?;
            let points = medians_from_csv(&path, &cfg.column)?;
            cfg.input = Some(path);
            points
        }
        _ => bail!("`fit` needs exactly one of `points` or `input`"),
    };
    let result = bounds_lab::fit_power_law(&points)?;
    out.write_json("fit.json", &result)?;
    Ok(Outcome {
        status: Status::Ok,
        summary: format!("slope {:.6}, intercept {:.6}, r2 {:.6}, {} points", result.slope, result.intercept, result.r_squared, result.n_points),
        resolved: serde_json::to_value(&cfg)?,
    })
}
