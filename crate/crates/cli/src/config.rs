//! Experiment configuration: schema, defaults, and field-path validation.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};
use yamabe_core::disc::MIN_NODES;
use yamabe_core::stability::PerturbationKind;
use yamabe_core::{make_model, ModelSpec, Topology};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    Minimize,
    Spectrum,
    Lsred,
    Stability,
    Covariance,
}

impl Experiment {
    pub const ALL: [Experiment; 5] = [
        Experiment::Minimize,
        Experiment::Spectrum,
        Experiment::Lsred,
        Experiment::Stability,
        Experiment::Covariance,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::Minimize => "minimize",
            Experiment::Spectrum => "spectrum",
            Experiment::Lsred => "lsred",
            Experiment::Stability => "stability",
            Experiment::Covariance => "covariance",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    pub grad_tol: f64,
    pub kernel_tol: f64,
    pub newton_tol: f64,
    /// Relative tolerance on `|q(φ) − q(0)|` for the integrability verdict.
    pub integrability_tol: f64,
    pub max_iters: usize,
    pub max_newton: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            grad_tol: 1e-10,
            kernel_tol: 1e-6,
            newton_tol: 1e-11,
            integrability_tol: 1e-9,
            max_iters: 2000,
            max_newton: 30,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Ladder {
    pub min: f64,
    pub max: f64,
    pub steps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Sampling {
    /// Kernel directions swept by `lsred`.
    pub directions: usize,
    pub scales: Ladder,
    /// Random directions per perturbation kind (`stability`) or random
    /// states per factor (`covariance`).
    pub count: usize,
    pub kinds: Option<Vec<PerturbationKind>>,
    /// Retained eigenvectors used for transverse perturbations.
    pub transverse_modes: usize,
    /// Localization radius in `W^{1,2}`; defaults to the chart radius.
    pub delta: Option<f64>,
}

impl Default for Sampling {
    fn default() -> Self {
        Sampling {
            directions: 2,
            scales: Ladder {
                min: 1e-3,
                max: 1e-1,
                steps: 9,
            },
            count: 4,
            kinds: None,
            transverse_modes: 6,
            delta: None,
        }
    }
}

fn one() -> usize {
    1
}

fn default_modes() -> usize {
    16
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelSpec,
    #[serde(rename = "N")]
    pub n: usize,
    pub experiment: Experiment,
    pub seed: u64,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub sampling: Sampling,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
    /// Multi-start count for the minimization stage.
    #[serde(default = "one")]
    pub starts: usize,
    /// Eigenpairs computed by the spectral stage.
    #[serde(default = "default_modes")]
    pub modes: usize,
}

impl ExperimentConfig {
    /// Hex SHA-256 of the canonical JSON serialization.
    pub fn hash(&self) -> String {
        let text = serde_json::to_string(self).expect("config serializes");
        let digest = Sha256::digest(text.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// One schema violation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub path: String,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

struct Checker {
    out: Vec<Diagnostic>,
}

impl Checker {
    fn push(&mut self, path: &str, message: impl Into<String>) {
        self.out.push(Diagnostic {
            path: path.to_string(),
            message: message.into(),
        });
    }

    fn unknown(&mut self, obj: &Map<String, Value>, prefix: &str, allowed: &[&str]) {
        for key in obj.keys() {
            if !allowed.contains(&key.as_str()) {
                self.push(&join(prefix, key), "unknown field");
            }
        }
    }

    fn uint(
        &mut self,
        obj: &Map<String, Value>,
        prefix: &str,
        key: &str,
        required: bool,
        min: u64,
    ) -> Option<u64> {
        let path = join(prefix, key);
        match obj.get(key) {
            None if required => {
                self.push(&path, "missing required field");
                None
            }
            None => None,
            Some(v) => match v.as_u64() {
                Some(x) if x >= min => Some(x),
                Some(x) => {
                    self.push(&path, format!("{x} below minimum {min}"));
                    None
                }
                None => {
                    self.push(&path, "expected a nonnegative integer");
                    None
                }
            },
        }
    }

    fn positive(
        &mut self,
        obj: &Map<String, Value>,
        prefix: &str,
        key: &str,
        required: bool,
    ) -> Option<f64> {
        let path = join(prefix, key);
        match obj.get(key) {
            None if required => {
                self.push(&path, "missing required field");
                None
            }
            None => None,
            Some(v) => match v.as_f64() {
                Some(x) if x > 0.0 && x.is_finite() => Some(x),
                Some(x) => {
                    self.push(&path, format!("{x} is not positive"));
                    None
                }
                None => {
                    self.push(&path, "expected a number");
                    None
                }
            },
        }
    }

    fn object<'a>(&mut self, v: &'a Value, path: &str) -> Option<&'a Map<String, Value>> {
        let o = v.as_object();
        if o.is_none() {
            self.push(path, "expected an object");
        }
        o
    }
}

fn join(prefix: &str, key: &str) -> String {
    if prefix.is_empty() {
        key.to_string()
    } else {
        format!("{prefix}.{key}")
    }
}

const MODEL_KINDS: [(&str, &[&str]); 5] = [
    ("hemisphere", &["n"]),
    ("ball", &["n"]),
    ("spherical_cap", &["n", "angle"]),
    ("frank_product", &["d", "r"]),
    ("cylinder", &["n", "length"]),
];

fn check_model(c: &mut Checker, v: &Value) -> Option<ModelSpec> {
    let obj = c.object(v, "model")?;
    c.unknown(obj, "model", &["kind", "params"]);
    let kind = match obj.get("kind") {
        None => {
            c.push("model.kind", "missing required field");
            return None;
        }
        Some(Value::String(s)) => s.as_str(),
        Some(_) => {
            c.push("model.kind", "expected a string");
            return None;
        }
    };
    let Some((_, keys)) = MODEL_KINDS.iter().find(|(k, _)| *k == kind) else {
        let names: Vec<&str> = MODEL_KINDS.iter().map(|(k, _)| *k).collect();
        c.push(
            "model.kind",
            format!(
                "unknown model kind \"{kind}\" (expected one of {})",
                names.join(", ")
            ),
        );
        return None;
    };
    let Some(params) = obj.get("params") else {
        c.push("model.params", "missing required field");
        return None;
    };
    let params = c.object(params, "model.params")?;
    c.unknown(params, "model.params", keys);
    let before = c.out.len();
    for key in keys.iter() {
        if *key == "n" || *key == "d" {
            c.uint(params, "model.params", key, true, 3);
        } else {
            c.positive(params, "model.params", key, true);
        }
    }
    if c.out.len() > before {
        return None;
    }
    let spec: ModelSpec = match serde_json::from_value(v.clone()) {
        Ok(s) => s,
        Err(e) => {
            c.push("model", e.to_string());
            return None;
        }
    };
    if let Err(e) = make_model(&spec) {
        c.push("model.params", e.to_string());
        return None;
    }
    Some(spec)
}

/// Schema check of a parsed configuration document. Empty when valid.
pub fn validate_value(root: &Value) -> Vec<Diagnostic> {
    let mut c = Checker { out: Vec::new() };
    let Some(obj) = root.as_object() else {
        c.push("$", "expected a JSON object");
        return c.out;
    };
    c.unknown(
        obj,
        "",
        &[
            "model",
            "N",
            "experiment",
            "seed",
            "tolerances",
            "sampling",
            "output",
            "starts",
            "modes",
        ],
    );

    let spec = match obj.get("model") {
        Some(m) => check_model(&mut c, m),
        None => {
            c.push("model", "missing required field");
            None
        }
    };

    match obj.get("N") {
        None => c.push("N", "missing required field"),
        Some(v) => match v.as_u64() {
            Some(n) if (n as usize) < MIN_NODES => {
                c.push("N", format!("N below minimum {MIN_NODES}"))
            }
            Some(n) => {
                let circle = spec
                    .as_ref()
                    .and_then(|s| make_model(s).ok())
                    .is_some_and(|m| m.topology == Topology::Circle);
                if circle && n % 2 != 0 {
                    c.push("N", "circle models need an even N");
                }
                if let Some(k) = obj.get("modes").and_then(Value::as_u64) {
                    if k >= n {
                        c.push("modes", format!("{k} modes requested on {n} nodes"));
                    }
                }
            }
            None => c.push("N", "expected a nonnegative integer"),
        },
    }

    match obj.get("experiment") {
        None => c.push("experiment", "missing required field"),
        Some(Value::String(s)) if Experiment::ALL.iter().any(|e| e.name() == s) => {}
        Some(v) => {
            let names: Vec<&str> = Experiment::ALL.iter().map(|e| e.name()).collect();
            c.push(
                "experiment",
                format!("{v} is not one of {}", names.join(", ")),
            );
        }
    }

    c.uint(obj, "", "seed", true, 0);
    c.uint(obj, "", "starts", false, 1);
    c.uint(obj, "", "modes", false, 1);

    if let Some(v) = obj.get("output") {
        if !v.is_string() {
            c.push("output", "expected a string path prefix");
        }
    }

    if let Some(t) = obj
        .get("tolerances")
        .and_then(|t| c.object(t, "tolerances"))
    {
        let keys = [
            "grad_tol",
            "kernel_tol",
            "newton_tol",
            "integrability_tol",
            "max_iters",
            "max_newton",
        ];
        c.unknown(t, "tolerances", &keys);
        for k in &keys[..4] {
            c.positive(t, "tolerances", k, false);
        }
        c.uint(t, "tolerances", "max_iters", false, 1);
        c.uint(t, "tolerances", "max_newton", false, 1);
    }

    if let Some(s) = obj.get("sampling").and_then(|s| c.object(s, "sampling")) {
        c.unknown(
            s,
            "sampling",
            &[
                "directions",
                "scales",
                "count",
                "kinds",
                "transverse_modes",
                "delta",
            ],
        );
        c.uint(s, "sampling", "directions", false, 1);
        c.uint(s, "sampling", "count", false, 1);
        c.uint(s, "sampling", "transverse_modes", false, 1);
        c.positive(s, "sampling", "delta", false);
        if let Some(l) = s.get("scales").and_then(|l| c.object(l, "sampling.scales")) {
            c.unknown(l, "sampling.scales", &["min", "max", "steps"]);
            let lo = c.positive(l, "sampling.scales", "min", true);
            let hi = c.positive(l, "sampling.scales", "max", true);
            c.uint(l, "sampling.scales", "steps", true, 0);
            if let (Some(lo), Some(hi)) = (lo, hi) {
                if hi < lo {
                    c.push("sampling.scales", format!("max {hi} below min {lo}"));
                }
            }
        }
        if let Some(k) = s.get("kinds") {
            match k.as_array() {
                None => c.push("sampling.kinds", "expected an array"),
                Some(items) => {
                    for (i, item) in items.iter().enumerate() {
                        if serde_json::from_value::<PerturbationKind>(item.clone()).is_err() {
                            c.push(
                                &format!("sampling.kinds[{i}]"),
                                format!("{item} is not one of kernel, transverse, mixed"),
                            );
                        }
                    }
                }
            }
        }
    }

    if c.out.is_empty() {
        if let Err(e) = serde_json::from_value::<ExperimentConfig>(root.clone()) {
            c.push("$", e.to_string());
        }
    }
    c.out
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{path} is not valid JSON: {source}")]
    Json {
        path: String,
        source: serde_json::Error,
    },
    #[error("invalid configuration:\n{}", .0.iter().map(|d| format!("  {d}")).collect::<Vec<_>>().join("\n"))]
    Schema(Vec<Diagnostic>),
}

pub fn read_value(path: &Path) -> Result<Value, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.display().to_string(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|source| ConfigError::Json {
        path: path.display().to_string(),
        source,
    })
}

/// Reads, validates and parses a configuration file.
pub fn load(path: &Path) -> Result<ExperimentConfig, ConfigError> {
    let v = read_value(path)?;
    let diags = validate_value(&v);
    if !diags.is_empty() {
        return Err(ConfigError::Schema(diags));
    }
    Ok(serde_json::from_value(v).expect("validated config parses"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn good() -> Value {
        json!({
            "model": {"kind": "frank_product", "params": {"d": 5, "r": 0.5}},
            "N": 64,
            "experiment": "minimize",
            "seed": 1,
            "output": "out/run"
        })
    }

    #[test]
    fn well_formed_config_has_no_diagnostics() {
        assert!(validate_value(&good()).is_empty());
        let cfg: ExperimentConfig = serde_json::from_value(good()).unwrap();
        assert_eq!(cfg.tolerances, Tolerances::default());
        let back: ExperimentConfig =
            serde_json::from_value(serde_json::to_value(&cfg).unwrap()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn missing_seed_is_named() {
        let mut v = good();
        v.as_object_mut().unwrap().remove("seed");
        let d = validate_value(&v);
        assert_eq!(d.len(), 1);
        assert_eq!(d[0].path, "seed");
    }

    #[test]
    fn small_grid_is_reported() {
        let mut v = good();
        v["N"] = json!(8);
        let d = validate_value(&v);
        assert!(d.iter().any(|x| x.message == "N below minimum 16"), "{d:?}");
    }

    #[test]
    fn nested_paths() {
        let mut v = good();
        v["model"]["params"]["r"] = json!(-1.0);
        v["sampling"] = json!({"scales": {"min": 1e-3, "max": 1e-4, "steps": 3}, "kinds": ["kernel", "bogus"], "extra": 1});
        v["experiment"] = json!("fly");
        let paths: Vec<String> = validate_value(&v).into_iter().map(|d| d.path).collect();
        for p in [
            "model.params.r",
            "sampling.scales",
            "sampling.kinds[1]",
            "sampling.extra",
            "experiment",
        ] {
            assert!(paths.iter().any(|x| x == p), "{p} not in {paths:?}");
        }
    }

    #[test]
    fn odd_circle_grid_and_bad_kind() {
        let mut v = good();
        v["N"] = json!(33);
        assert!(validate_value(&v).iter().any(|d| d.path == "N"));
        v["N"] = json!(32);
        v["model"] = json!({"kind": "torus", "params": {}});
        assert!(validate_value(&v).iter().any(|d| d.path == "model.kind"));
    }

    #[test]
    fn hash_depends_on_content() {
        let a: ExperimentConfig = serde_json::from_value(good()).unwrap();
        let mut b = a.clone();
        b.seed = 2;
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash(), a.clone().hash());
        assert_eq!(a.hash().len(), 64);
    }
}
