//! Wraps an experiment's output in the results/manifest envelope and writes
//! everything to the output directory. Reruns with an identical spec are
//! byte-identical.

use std::fs;
use std::path::PathBuf;

use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::error::CliResult;
use crate::experiments::run_experiment;
use crate::spec::ExperimentSpec;

pub const RESULTS_SCHEMA_VERSION: u64 = 1;

#[derive(Debug)]
pub struct RunArtifacts {
    pub results_path: PathBuf,
    pub manifest_path: PathBuf,
    pub csv_paths: Vec<PathBuf>,
    pub results: Value,
}

/// Runs the experiment and writes `results.json`, `manifest.json`, and the
/// per-panel CSVs under the spec's output directory.
pub fn run(spec: &ExperimentSpec) -> CliResult<RunArtifacts> {
    let output = run_experiment(spec)?;
    fs::create_dir_all(&spec.out_dir)?;

    let canonical = spec.canonical();
    let canonical_json = serde_json::to_string(&canonical)?;
    let config_hash = format!("sha256:{:x}", Sha256::digest(canonical_json.as_bytes()));

    let results = json!({
        "schema_version": RESULTS_SCHEMA_VERSION,
        "experiment": spec.id.name(),
        "spec": canonical,
        "data": output.data,
    });
    let results_path = spec.out_dir.join("results.json");
    fs::write(&results_path, serde_json::to_string_pretty(&results)? + "\n")?;

    let manifest = json!({
        "schema_version": RESULTS_SCHEMA_VERSION,
        "experiment": spec.id.name(),
        "seed": spec.seed,
        "config_hash": config_hash,
        "versions": {
            "polymax": polymax::VERSION,
            "polymax-cli": env!("CARGO_PKG_VERSION"),
        },
    });
    let manifest_path = spec.out_dir.join("manifest.json");
    fs::write(&manifest_path, serde_json::to_string_pretty(&manifest)? + "\n")?;

    let mut csv_paths = Vec::new();
    for (name, contents) in &output.csvs {
        let path = spec.out_dir.join(name);
        fs::write(&path, contents)?;
        csv_paths.push(path);
    }

    Ok(RunArtifacts {
        results_path,
        manifest_path,
        csv_paths,
        results,
    })
}
