//! Run manifests and their comparison.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::config::Scenario;
use crate::error::RunError;
use crate::run::Headline;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Everything needed to reproduce a run, plus its headline numbers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: String,
    pub stream_scheme: String,
    pub seed: u64,
    /// The resolved scenario, defaults included.
    pub scenario: Value,
    pub results: Headline,
    /// Files written next to the manifest.
    pub outputs: Vec<String>,
}

impl Manifest {
    pub(crate) fn new(s: &Scenario, results: Headline, files: &[PathBuf]) -> Result<Self, RunError> {
        let scenario = serde_json::to_value(&s.file).map_err(|e| RunError::Manifest(e.to_string()))?;
        Ok(Self {
            version: VERSION.to_string(),
            stream_scheme: dcu_core::rng::StreamScheme::ChaCha8PerPath.id().to_string(),
            seed: s.file.solver.seed,
            scenario,
            results,
            outputs: files
                .iter()
                .filter_map(|p| p.file_name().map(|n| n.to_string_lossy().into_owned()))
                .collect(),
        })
    }

    pub fn write(&self, path: &Path) -> Result<(), RunError> {
        let mut text = serde_json::to_string_pretty(self).map_err(|e| RunError::Manifest(e.to_string()))?;
        text.push('\n');
        std::fs::write(path, text).map_err(|e| RunError::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self, RunError> {
        let text = std::fs::read_to_string(path).map_err(|e| RunError::io(path, e))?;
        serde_json::from_str(&text)
            .map_err(|e| RunError::Manifest(format!("{}: {e}", path.display())))
    }
}

fn flatten(prefix: &str, v: &Value, out: &mut BTreeMap<String, Value>) {
    match v {
        Value::Object(map) => {
            for (k, v) in map {
                let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                flatten(&key, v, out);
            }
        }
        other => {
            out.insert(prefix.to_string(), other.clone());
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FieldDiff {
    pub key: String,
    pub a: Value,
    pub b: Value,
    /// `b − a` when both sides are numbers.
    pub delta: Option<f64>,
}

/// Change of grid between two runs of the same scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct Refinement {
    pub steps: (u64, u64),
    pub paths: (u64, u64),
    pub abs_delta_y0: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ManifestDiff {
    pub version_warning: Option<String>,
    pub config: Vec<FieldDiff>,
    pub results: Vec<FieldDiff>,
    pub refinement: Option<Refinement>,
}

impl ManifestDiff {
    pub fn is_empty(&self) -> bool {
        self.config.is_empty() && self.results.is_empty()
    }
}

fn diff_values(a: &Value, b: &Value) -> Vec<FieldDiff> {
    let (mut fa, mut fb) = (BTreeMap::new(), BTreeMap::new());
    flatten("", a, &mut fa);
    flatten("", b, &mut fb);
    let keys: std::collections::BTreeSet<_> = fa.keys().chain(fb.keys()).cloned().collect();
    keys.into_iter()
        .filter_map(|k| {
            let va = fa.get(&k).cloned().unwrap_or(Value::Null);
            let vb = fb.get(&k).cloned().unwrap_or(Value::Null);
            (va != vb).then(|| {
                let delta = match (va.as_f64(), vb.as_f64()) {
                    (Some(x), Some(y)) => Some(y - x),
                    _ => None,
                };
                FieldDiff { key: k, a: va, b: vb, delta }
            })
        })
        .collect()
}

pub fn compare(a: &Manifest, b: &Manifest) -> ManifestDiff {
    let version_warning = (a.version != b.version || a.stream_scheme != b.stream_scheme).then(|| {
        format!(
            "version mismatch: {} ({}) vs {} ({})",
            a.version, a.stream_scheme, b.version, b.stream_scheme
        )
    });
    let config = diff_values(&a.scenario, &b.scenario);
    let ra = serde_json::to_value(&a.results).unwrap_or(Value::Null);
    let rb = serde_json::to_value(&b.results).unwrap_or(Value::Null);
    let results = diff_values(&ra, &rb);
    let grid = |m: &Manifest, k: &str| m.scenario["solver"][k].as_u64().unwrap_or(0);
    let steps = (grid(a, "steps"), grid(b, "steps"));
    let paths = (grid(a, "paths"), grid(b, "paths"));
    let refinement = (steps.0 != steps.1 || paths.0 != paths.1).then(|| Refinement {
        steps,
        paths,
        abs_delta_y0: (b.results.y0 - a.results.y0).abs(),
    });
    ManifestDiff {
        version_warning,
        config,
        results,
        refinement,
    }
}

impl fmt::Display for ManifestDiff {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for d in &self.config {
            writeln!(f, "config {}: {} -> {}", d.key, d.a, d.b)?;
        }
        if let Some(r) = &self.refinement {
            writeln!(
                f,
                "refinement: N {} -> {}, M {} -> {}, |dY0| = {:e}",
                r.steps.0, r.steps.1, r.paths.0, r.paths.1, r.abs_delta_y0
            )?;
        }
        for d in &self.results {
            match d.delta {
                Some(delta) => writeln!(f, "result {}: {} -> {} (delta {delta:e})", d.key, d.a, d.b)?,
                None => writeln!(f, "result {}: {} -> {}", d.key, d.a, d.b)?,
            }
        }
        Ok(())
    }
}
