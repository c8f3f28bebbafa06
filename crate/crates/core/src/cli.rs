//! Batch front end for the `design` binary.
//!
//! A job is a single JSON document. [`execute`] turns it into an [`Outcome`]
//! holding the exit code and every document the process should emit, so the
//! whole pipeline is testable without spawning a process.

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::closed_form::{
    axis_design, binary_two_point_design, corner_design_multifactor, hypercube_linear_design,
    hypercube_linear_spec, interval_boundary_design, saturated_weights, two_factor_design, ConstructResult,
    Criterion, DEFAULT_INTERVAL_GRID,
};
use crate::design::{CriterionOrder, Design, Region};
use crate::equivalence::{scan_to_csv, sensitivity_scan, verify_design, DEFAULT_TOLERANCE};
use crate::error::DesignError;
use crate::glm::{LinkFamily, ModelSpec, RegressionKind};
use crate::optimizer::{optimize_design, OptimizerOptions};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILED: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_MODEL: i32 = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub family: String,
    pub kind: String,
    pub nu: usize,
    pub beta: Vec<f64>,
}

/// Criterion order as a number or the string `"inf"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OrderValue {
    Number(f64),
    Text(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CriterionConfig {
    pub k: OrderValue,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Construct,
    Optimize,
    Verify,
    Scan,
}

fn default_tolerance() -> f64 {
    DEFAULT_TOLERANCE
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JobConfig {
    pub model: ModelConfig,
    pub region: Region,
    pub criterion: CriterionConfig,
    pub task: Task,
    #[serde(default)]
    pub design_in: Option<Design>,
    #[serde(default)]
    pub constructor: Option<String>,
    #[serde(default)]
    pub a: Option<Vec<f64>>,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    #[serde(default)]
    pub grid: Option<Vec<usize>>,
    #[serde(default)]
    pub seed: u64,
}

/// Everything a job run produces.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Outcome {
    pub exit_code: i32,
    /// JSON document for standard output.
    pub stdout: Option<String>,
    /// Single-line JSON error object for standard error.
    pub stderr: Option<String>,
    /// Scan table destined for the `--out` path.
    pub csv: Option<String>,
}

impl Outcome {
    fn error(exit_code: i32, kind: &str, message: impl Into<String>) -> Self {
        let body = json!({ "error": kind, "message": message.into() });
        Self {
            exit_code,
            stdout: None,
            stderr: Some(body.to_string()),
            csv: None,
        }
    }

    fn config(message: impl Into<String>) -> Self {
        Self::error(EXIT_CONFIG, "config", message)
    }

    fn model(err: DesignError) -> Self {
        Self::error(EXIT_MODEL, "model", err.to_string())
    }
}

/// Applies a `key.path=value` override. The value is parsed as JSON and
/// taken as a plain string when that fails.
pub fn apply_override(doc: &mut Value, assignment: &str) -> Result<(), String> {
    let (path, raw) = assignment
        .split_once('=')
        .ok_or_else(|| format!("override `{assignment}` is not of the form key=value"))?;
    if path.is_empty() {
        return Err(format!("override `{assignment}` has an empty key"));
    }
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let segments: Vec<&str> = path.split('.').collect();
    let mut node = doc;
    for (i, seg) in segments.iter().enumerate() {
        let last = i + 1 == segments.len();
        if node.is_null() {
            *node = Value::Object(Map::new());
        }
        node = match node {
            Value::Object(map) => {
                if last {
                    map.insert(seg.to_string(), value);
                    return Ok(());
                }
                map.entry(seg.to_string()).or_insert(Value::Null)
            }
            Value::Array(items) => {
                let idx: usize = seg
                    .parse()
                    .map_err(|_| format!("`{seg}` in `{path}` must index an array"))?;
                let len = items.len();
                let slot = items
                    .get_mut(idx)
                    .ok_or_else(|| format!("index {idx} in `{path}` is out of range ({len} items)"))?;
                if last {
                    *slot = value;
                    return Ok(());
                }
                slot
            }
            _ => return Err(format!("`{seg}` in `{path}` descends into a scalar")),
        };
    }
    unreachable!("loop returns on the last segment")
}

/// Parses a job document and applies overrides in order.
pub fn parse_config(text: &str, overrides: &[String]) -> Result<JobConfig, String> {
    let mut doc: Value = serde_json::from_str(text).map_err(|e| format!("invalid JSON: {e}"))?;
    for o in overrides {
        apply_override(&mut doc, o)?;
    }
    serde_json::from_value(doc).map_err(|e| format!("schema: {e}"))
}

/// A configuration checked against the model and region.
struct Job {
    config: JobConfig,
    spec: ModelSpec,
    region: Region,
    k: CriterionOrder,
}

fn prepare(config: JobConfig) -> Result<Job, String> {
    let m = &config.model;
    let family = LinkFamily::from_name(&m.family).ok_or_else(|| format!("unknown family `{}`", m.family))?;
    let kind = RegressionKind::from_name(&m.kind, m.nu).ok_or_else(|| format!("unknown kind `{}`", m.kind))?;
    let spec = ModelSpec::new(family, kind, m.beta.clone()).map_err(|e| e.to_string())?;

    let k = match &config.criterion.k {
        OrderValue::Number(v) => CriterionOrder::new(*v).map_err(|e| e.to_string())?,
        OrderValue::Text(t) if t.eq_ignore_ascii_case("inf") => CriterionOrder::Infinite,
        OrderValue::Text(t) => return Err(format!("criterion.k must be a number or \"inf\", got \"{t}\"")),
    };
    if !(config.tolerance.is_finite() && config.tolerance > 0.0) {
        return Err(format!("tolerance must be positive, got {}", config.tolerance));
    }

    let mut region = config.region.clone();
    if let (Region::GridBox { resolution, .. }, Some(grid)) = (&mut region, &config.grid) {
        if resolution.is_empty() {
            *resolution = grid.clone();
        }
    }
    region.validate().map_err(|e| e.to_string())?;
    if region.factors() != spec.factors() {
        return Err(format!(
            "region has {} factors but the model has {}",
            region.factors(),
            spec.factors()
        ));
    }

    match config.task {
        Task::Verify | Task::Scan if config.design_in.is_none() => {
            return Err("task requires design_in".into());
        }
        Task::Construct if config.constructor.is_none() => {
            return Err("task construct requires constructor".into());
        }
        _ => {}
    }
    if let Some(d) = &config.design_in {
        if d.factors() != spec.factors() {
            return Err(format!(
                "design_in has {} factors but the model has {}",
                d.factors(),
                spec.factors()
            ));
        }
    }
    Ok(Job {
        config,
        spec,
        region,
        k,
    })
}

fn d_or_a(k: CriterionOrder, name: &str) -> Result<Criterion, DesignError> {
    Criterion::from_order(k.value())
        .ok_or_else(|| DesignError::Unsupported(format!("{name} supports k = 0 or k = 1, got {}", k.value())))
}

fn unconditional(design: Design, label: &str) -> ConstructResult {
    ConstructResult {
        design,
        case_label: label.to_string(),
        condition_ok: true,
        condition_margin: 0.0,
    }
}

fn construct(job: &Job, name: &str) -> Result<ConstructResult, DesignError> {
    let spec = &job.spec;
    let k = job.k;
    match name {
        "saturated_weights" => {
            let c = d_or_a(k, name)?;
            let points = job.region.candidates()?;
            let w = saturated_weights(spec, &points, c)?;
            Ok(unconditional(Design::normalized(points, w)?, "saturated"))
        }
        "binary_two_point_design" => {
            let c = d_or_a(k, name)?;
            let points = job.region.candidates()?;
            if points.len() != 2 || spec.factors() != 1 {
                return Err(DesignError::Precondition(
                    "the two-point design needs a region of exactly two single-factor points".into(),
                ));
            }
            let d = binary_two_point_design(spec, points[0][0], points[1][0], c)?;
            Ok(unconditional(d, "two-point"))
        }
        "interval_boundary_design" => {
            let grid_n = job.config.grid.as_ref().and_then(|g| g.first().copied());
            interval_boundary_design(spec, d_or_a(k, name)?, grid_n.unwrap_or(DEFAULT_INTERVAL_GRID))
        }
        "two_factor_design" => two_factor_design(spec, d_or_a(k, name)?),
        "corner_design_multifactor" => corner_design_multifactor(spec, d_or_a(k, name)?),
        "axis_design" | "phik_axis_weights" => {
            let a = job.config.a.clone().unwrap_or_else(|| vec![1.0; spec.factors()]);
            axis_design(spec, &a, k, &job.region)
        }
        "hypercube_linear_design" => {
            let expected = hypercube_linear_spec(spec.factors())?;
            if spec.family().name() != expected.family().name() || spec.kind() != expected.kind() {
                return Err(DesignError::Precondition(
                    "the hypercube design needs the linear model without intercept".into(),
                ));
            }
            let d = hypercube_linear_design(spec.factors(), d_or_a(k, name)?)?;
            Ok(unconditional(d, "hypercube-layers"))
        }
        other => Err(DesignError::Unsupported(format!("unknown constructor `{other}`"))),
    }
}

fn finite_k(k: CriterionOrder) -> Result<f64, DesignError> {
    k.finite()
        .ok_or_else(|| DesignError::Unsupported("this task needs a finite criterion order".into()))
}

fn run(job: &Job) -> Result<Outcome, DesignError> {
    let ok = |stdout: String, exit_code: i32| Outcome {
        exit_code,
        stdout: Some(stdout),
        stderr: None,
        csv: None,
    };
    match job.config.task {
        Task::Construct => {
            let name = job.config.constructor.as_deref().unwrap_or_default();
            Ok(ok(construct(job, name)?.to_json(), EXIT_OK))
        }
        Task::Optimize => {
            let opts = OptimizerOptions {
                random_seed: job.config.seed,
                ..OptimizerOptions::default()
            };
            let result = optimize_design(&job.spec, &job.region, finite_k(job.k)?, &opts)?;
            let doc = json!({
                "design": result.design,
                "report": result.report,
                "converged": result.converged,
                "iterations": result.iterations,
            });
            let code = if result.converged { EXIT_OK } else { EXIT_FAILED };
            Ok(ok(doc.to_string(), code))
        }
        Task::Verify => {
            let design = job.config.design_in.as_ref().expect("checked in prepare");
            let report = verify_design(design, &job.spec, finite_k(job.k)?, &job.region, job.config.tolerance)?;
            let code = if report.pass { EXIT_OK } else { EXIT_FAILED };
            Ok(ok(report.to_json(), code))
        }
        Task::Scan => {
            let design = job.config.design_in.as_ref().expect("checked in prepare");
            let rows = sensitivity_scan(design, &job.spec, finite_k(job.k)?, &job.region)?;
            Ok(Outcome {
                exit_code: EXIT_OK,
                stdout: None,
                stderr: None,
                csv: Some(scan_to_csv(&rows)),
            })
        }
    }
}

/// Runs a parsed job.
pub fn execute(config: JobConfig) -> Outcome {
    let job = match prepare(config) {
        Ok(job) => job,
        Err(msg) => return Outcome::config(msg),
    };
    run(&job).unwrap_or_else(Outcome::model)
}

/// Parses, overrides and runs a job document.
pub fn execute_text(text: &str, overrides: &[String]) -> Outcome {
    match parse_config(text, overrides) {
        Ok(config) => execute(config),
        Err(msg) => Outcome::config(msg),
    }
}
