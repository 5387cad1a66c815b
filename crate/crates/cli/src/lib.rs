//! Config-driven experiment runner for `fieldlab`.
//!
//! An experiment is a named recipe over the library with a typed parameter
//! schema. Running one yields a versioned JSON report, CSV tables and, for
//! Langevin runs, an optional raw trajectory.

use std::path::PathBuf;
use std::time::Instant;

use fieldlab::LabError;
use serde::Deserialize;
use serde_json::{json, Map, Value};

mod experiments;
pub mod params;
pub mod report;

pub use experiments::REGISTRY;
use params::{ParamSpec, Params};
use report::{ExperimentReport, Outcome, Provenance, VerdictLine, SCHEMA_VERSION};

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "FIELDLAB_OUT";
pub const DEFAULT_OUT_DIR: &str = "fieldlab-out";

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RunError {
    #[error("usage error: {0}")]
    Usage(String),
    #[error("validation error: {0}")]
    Validation(String),
    /// A numerical failure during the run; reported as a failed verdict.
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl From<LabError> for RunError {
    fn from(e: LabError) -> Self {
        match e {
            LabError::InvalidArgument(_)
            | LabError::Resolution(_)
            | LabError::Domain(_)
            | LabError::GammaPole(_)
            | LabError::CoincidentPoints(_)
            | LabError::OutOfDomain(_) => RunError::Validation(e.to_string()),
            _ => RunError::Numerical(e.to_string()),
        }
    }
}

impl RunError {
    /// 1 for usage, validation and i/o problems, 2 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Numerical(_) => 2,
            _ => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: String,
    #[serde(default)]
    pub parameters: Map<String, Value>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub out: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn new(experiment: &str, seed: u64) -> Self {
        Self { experiment: experiment.to_string(), parameters: Map::new(), seed, out: None }
    }

    pub fn from_json(text: &str) -> Result<Self, RunError> {
        serde_json::from_str(text).map_err(|e| RunError::Usage(format!("config is not valid: {e}")))
    }

    pub fn set(mut self, key: &str, value: Value) -> Self {
        self.parameters.insert(key.to_string(), value);
        self
    }

    /// Applies a `key=value` override; `seed` and `experiment` address the
    /// top-level fields, every other key a parameter.
    pub fn apply_override(&mut self, raw: &str) -> Result<(), RunError> {
        let (key, value) = params::parse_override(raw)?;
        match key.as_str() {
            "seed" => {
                self.seed = value
                    .as_u64()
                    .ok_or_else(|| RunError::Validation(format!("`seed` must be a nonnegative integer, got {value}")))?;
            }
            "experiment" => {
                self.experiment = value.as_str().map(str::to_string).unwrap_or_else(|| value.to_string());
            }
            _ => {
                self.parameters.insert(key, value);
            }
        }
        Ok(())
    }
}

/// Collects results while an experiment runs.
#[derive(Debug, Default)]
pub(crate) struct Ctx {
    results: std::collections::BTreeMap<String, Value>,
    verdicts: Vec<VerdictLine>,
    tables: Vec<report::Table>,
    blobs: Vec<report::Blob>,
}

impl Ctx {
    pub(crate) fn result(&mut self, key: impl Into<String>, value: Value) {
        self.results.insert(key.into(), value);
    }

    pub(crate) fn verdict(&mut self, name: impl Into<String>, passed: bool, detail: impl Into<String>) {
        self.verdicts.push(VerdictLine { name: name.into(), passed, detail: detail.into() });
    }

    pub(crate) fn table(&mut self, t: report::Table) {
        self.tables.push(t);
    }

    pub(crate) fn blob(&mut self, name: &str, bytes: Vec<u8>) {
        self.blobs.push(report::Blob { name: name.to_string(), bytes });
    }
}

pub(crate) type RunFn = fn(&Params, u64, &mut Ctx) -> Result<(), RunError>;

pub struct Experiment {
    pub name: &'static str,
    pub summary: &'static str,
    /// The relations the experiment checks, written out.
    pub relations: &'static [&'static str],
    pub params: &'static [ParamSpec],
    pub(crate) run: RunFn,
}

impl Experiment {
    /// JSON Schema for the `parameters` object of a config.
    pub fn config_schema(&self) -> Value {
        let props: Map<String, Value> = self.params.iter().map(|p| (p.name.to_string(), p.schema())).collect();
        let required: Vec<&str> = self.params.iter().filter(|p| p.required()).map(|p| p.name).collect();
        json!({
            "$schema": "https://json-schema.org/draft/2020-12/schema",
            "title": self.name,
            "type": "object",
            "properties": props,
            "required": required,
            "additionalProperties": false,
        })
    }

    pub fn describe(&self) -> Value {
        let params: Vec<Value> = self
            .params
            .iter()
            .map(|p| {
                json!({
                    "name": p.name,
                    "type": p.type_name(),
                    "required": p.required(),
                    "default": p.default_value(),
                    "description": p.doc,
                })
            })
            .collect();
        json!({
            "name": self.name,
            "summary": self.summary,
            "relations": self.relations,
            "parameters": params,
            "config_schema": self.config_schema(),
        })
    }
}

pub fn find_experiment(name: &str) -> Result<&'static Experiment, RunError> {
    REGISTRY.iter().find(|e| e.name == name).ok_or_else(|| {
        let names: Vec<&str> = REGISTRY.iter().map(|e| e.name).collect();
        RunError::Usage(format!("unknown experiment `{name}`; registered: {}", names.join(", ")))
    })
}

/// Machine-readable registry listing.
pub fn list_experiments_json() -> Value {
    json!({
        "schema_version": SCHEMA_VERSION,
        "version": env!("CARGO_PKG_VERSION"),
        "experiments": REGISTRY.iter().map(Experiment::describe).collect::<Vec<_>>(),
    })
}

/// Human-readable registry listing.
pub fn list_experiments_text() -> String {
    let mut out = String::new();
    for e in REGISTRY.iter() {
        out.push_str(&format!("{}: {}\n", e.name, e.summary));
        for r in e.relations {
            out.push_str(&format!("    checks  {r}\n"));
        }
        for p in e.params {
            let default = match p.default_value() {
                Some(v) => format!("default {v}"),
                None if p.required() => "required".into(),
                None => "optional".into(),
            };
            out.push_str(&format!("    {:<18} {:<10} {:<28} {}\n", p.name, p.type_name(), default, p.doc));
        }
    }
    out
}

/// Validates `config`, runs it and assembles the outcome.
///
/// Usage and validation errors are returned before any computation. A
/// numerical failure during the run yields a failed report rather than an
/// error.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Outcome, RunError> {
    let exp = find_experiment(&config.experiment)?;
    let params = Params::resolve(exp.params, &config.parameters)?;
    let start = Instant::now();
    let mut cx = Ctx::default();
    let error = match (exp.run)(&params, config.seed, &mut cx) {
        Ok(()) => None,
        Err(RunError::Numerical(msg)) => {
            cx.verdict("completed", false, msg.clone());
            Some(msg)
        }
        Err(e) => return Err(e),
    };
    let passed = error.is_none() && cx.verdicts.iter().all(|v| v.passed);
    let report = ExperimentReport {
        schema_version: SCHEMA_VERSION.to_string(),
        experiment: exp.name.to_string(),
        parameters: params.as_map().clone(),
        results: cx.results,
        verdicts: cx.verdicts,
        passed,
        error,
        provenance: Provenance {
            seed: config.seed,
            version: env!("CARGO_PKG_VERSION").to_string(),
            wall_time_seconds: start.elapsed().as_secs_f64(),
        },
    };
    Ok(Outcome { report, tables: cx.tables, blobs: cx.blobs })
}

/// Output directory: explicit flag, then config, then the environment, then a fixed default.
pub fn resolve_out_dir(flag: Option<PathBuf>, config: &ExperimentConfig) -> PathBuf {
    flag.or_else(|| config.out.clone())
        .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR))
}
