//! Run configuration: the single structure every subcommand compiles into,
//! plus strict JSON ingestion with aggregated error reporting.

use std::collections::BTreeMap;
use std::path::PathBuf;

use serde::Serialize;

/// Which volatility the Monte Carlo verifier draws along paths.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Selection {
    Uniform,
    Adversarial,
}

/// Which PDE stepper to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StepperChoice {
    Implicit,
    Explicit,
}

/// Fully resolved command configuration. Identical configurations with the
/// same seed produce byte-identical artifacts.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub command: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub claim: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spec: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub price: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub surface: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub payoff: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid: Option<(usize, usize, f64)>,
    pub grid_step: f64,
    pub samples: usize,
    pub seed: u64,
    pub tolerance: f64,
    pub horizon: f64,
    pub selection: Selection,
    pub stepper: StepperChoice,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            command: String::new(),
            model: None,
            claim: None,
            spec: None,
            price: None,
            surface: None,
            out: None,
            payoff: None,
            grid: None,
            grid_step: 0.02,
            samples: 10_000,
            seed: quasisure::DEFAULT_SEED,
            tolerance: 1e-10,
            horizon: 1.0,
            selection: Selection::Uniform,
            stepper: StepperChoice::Implicit,
        }
    }
}

const COMMANDS: [&str; 6] = [
    "na1",
    "price-tree",
    "price-bsb",
    "duality",
    "verify-hedge",
    "follmer-demo",
];

/// Parses a JSON document into a [`RunConfig`], collecting every problem
/// instead of stopping at the first: unknown keys, type mismatches and
/// out-of-range values are all reported with their key paths.
pub fn validate_config(text: &str) -> Result<RunConfig, Vec<String>> {
    let value: serde_json::Value = match serde_json::from_str(text) {
        Ok(v) => v,
        Err(e) => return Err(vec![format!("syntax: {e}")]),
    };
    let Some(map) = value.as_object() else {
        return Err(vec!["top level must be a JSON object".into()]);
    };
    let mut errors = Vec::new();
    let mut cfg = RunConfig::default();

    let path_field = |map: &serde_json::Map<String, serde_json::Value>,
                          key: &str,
                          errors: &mut Vec<String>|
     -> Option<PathBuf> {
        map.get(key).and_then(|v| match v.as_str() {
            Some(s) => Some(PathBuf::from(s)),
            None => {
                errors.push(format!("/{key}: expected a string path"));
                None
            }
        })
    };

    match map.get("command").and_then(|v| v.as_str()) {
        Some(cmd) if COMMANDS.contains(&cmd) => cfg.command = cmd.to_string(),
        Some(cmd) => errors.push(format!(
            "/command: unknown command {cmd:?} (expected one of {COMMANDS:?})"
        )),
        None => errors.push("/command: required string".into()),
    }
    cfg.model = path_field(map, "model", &mut errors);
    cfg.claim = path_field(map, "claim", &mut errors);
    cfg.spec = path_field(map, "spec", &mut errors);
    cfg.price = path_field(map, "price", &mut errors);
    cfg.surface = path_field(map, "surface", &mut errors);
    cfg.out = path_field(map, "out", &mut errors);
    if let Some(v) = map.get("payoff") {
        match v.as_str() {
            Some(s) => cfg.payoff = Some(s.to_string()),
            None => errors.push("/payoff: expected a string like call:100".into()),
        }
    }
    if let Some(v) = map.get("grid") {
        let parsed = v.as_array().and_then(|a| {
            if a.len() != 3 {
                return None;
            }
            Some((
                a[0].as_u64()? as usize,
                a[1].as_u64()? as usize,
                a[2].as_f64()?,
            ))
        });
        match parsed {
            Some(g) => cfg.grid = Some(g),
            None => errors.push("/grid: expected [n_t, n_s, s_max]".into()),
        }
    }
    let num = |key: &str, errors: &mut Vec<String>| -> Option<f64> {
        map.get(key).and_then(|v| match v.as_f64() {
            Some(x) => Some(x),
            None => {
                errors.push(format!("/{key}: expected a number"));
                None
            }
        })
    };
    if let Some(x) = num("grid_step", &mut errors) {
        if x > 0.0 && x <= 0.5 {
            cfg.grid_step = x;
        } else {
            errors.push(format!("/grid_step: {x} outside (0, 0.5]"));
        }
    }
    if let Some(x) = num("tolerance", &mut errors) {
        if x > 0.0 {
            cfg.tolerance = x;
        } else {
            errors.push(format!("/tolerance: {x} must be positive"));
        }
    }
    if let Some(x) = num("horizon", &mut errors) {
        if x > 0.0 {
            cfg.horizon = x;
        } else {
            errors.push(format!("/horizon: {x} must be positive"));
        }
    }
    if let Some(v) = map.get("samples") {
        match v.as_u64() {
            Some(n) if n > 0 => cfg.samples = n as usize,
            _ => errors.push("/samples: expected a positive integer".into()),
        }
    }
    if let Some(v) = map.get("seed") {
        match v.as_u64() {
            Some(n) => cfg.seed = n,
            None => errors.push("/seed: expected an unsigned integer".into()),
        }
    }
    if let Some(v) = map.get("selection") {
        match v.as_str() {
            Some("uniform") => cfg.selection = Selection::Uniform,
            Some("adversarial") => cfg.selection = Selection::Adversarial,
            _ => errors.push("/selection: expected \"uniform\" or \"adversarial\"".into()),
        }
    }
    if let Some(v) = map.get("stepper") {
        match v.as_str() {
            Some("implicit") => cfg.stepper = StepperChoice::Implicit,
            Some("explicit") => cfg.stepper = StepperChoice::Explicit,
            _ => errors.push("/stepper: expected \"implicit\" or \"explicit\"".into()),
        }
    }

    const KNOWN: [&str; 16] = [
        "command",
        "model",
        "claim",
        "spec",
        "price",
        "surface",
        "out",
        "payoff",
        "grid",
        "grid_step",
        "samples",
        "seed",
        "tolerance",
        "horizon",
        "selection",
        "stepper",
    ];
    for key in map.keys() {
        if !KNOWN.contains(&key.as_str()) {
            errors.push(format!("/{key}: unknown key"));
        }
    }

    if errors.is_empty() {
        Ok(cfg)
    } else {
        Err(errors)
    }
}

/// Structured report of one dispatch; everything numeric in `results` is
/// also present in a CSV/JSON artifact on disk.
#[derive(Debug, Serialize)]
pub struct RunReport {
    pub command: String,
    pub config: RunConfig,
    pub results: BTreeMap<String, serde_json::Value>,
    pub warnings: Vec<String>,
    pub exit_code: i32,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_fills_defaults() {
        let cfg = validate_config(
            r#"{"command": "price-tree", "model": "tree.json", "claim": "claim.json"}"#,
        )
        .unwrap();
        assert_eq!(cfg.command, "price-tree");
        assert_eq!(cfg.seed, quasisure::DEFAULT_SEED);
        assert_eq!(cfg.grid_step, 0.02);
    }

    #[test]
    fn errors_are_aggregated_not_first_only() {
        let err = validate_config(
            r#"{"command": "price-tree", "tolerance": -1.0, "mystery": 1, "samples": "many"}"#,
        )
        .unwrap_err();
        assert!(err.iter().any(|e| e.contains("/tolerance")));
        assert!(err.iter().any(|e| e.contains("/mystery")));
        assert!(err.iter().any(|e| e.contains("/samples")));
        assert!(err.len() >= 3);
    }

    #[test]
    fn unknown_command_rejected() {
        let err = validate_config(r#"{"command": "frobnicate"}"#).unwrap_err();
        assert!(err[0].contains("unknown command"));
    }
}
