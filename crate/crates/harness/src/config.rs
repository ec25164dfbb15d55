//! Experiment configuration: TOML schema, validation and sweep expansion.
//!
//! ```toml
//! seeds = [0, 1, 2]
//! output = "out/beta"
//! checks = ["lemma1"]
//!
//! [problem]
//! kind = "quadratic"
//! d = 10
//! sigma = 1.0
//!
//! [optimizer]
//! kind = "jaguar-signsgd"
//! gamma = 3e-4
//! iterations = 20000
//!
//! [sweep]
//! "optimizer.beta" = [0.0, 0.9]
//! ```
//!
//! Unknown keys anywhere are errors, and all of them are reported at once.

use std::collections::BTreeMap;
use std::path::PathBuf;

use jaguar_core::optimizers::{OptimizerConfig, OptimizerKind};
use jaguar_core::problems::ProblemSpec;
use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use crate::error::{HarnessError, Result, SchemaIssue};

pub const DEFAULT_MAX_RUNS: usize = 10_000;

const TOP_KEYS: &[&str] = &["problem", "optimizer", "sweep", "seeds", "output", "checks", "max_runs"];

pub const OPTIMIZER_KEYS: &[&str] = &[
    "kind",
    "gamma",
    "beta",
    "tau",
    "ns_steps",
    "iterations",
    "preset",
    "gamma0",
    "delta0",
    "delta",
    "noise",
    "linear_decay",
    "sampling",
];

pub fn problem_keys(kind: &str) -> Option<&'static [&'static str]> {
    Some(match kind {
        "quadratic" => &["kind", "d", "condition_number", "sigma", "samples", "smoothness", "seed"],
        "logistic" => &["kind", "d", "samples", "label_noise", "seed"],
        "rosenbrock" => &["kind", "d", "seed"],
        "matrix-regression" => &["kind", "rows", "cols", "rank", "sigma", "samples", "seed"],
        _ => return None,
    })
}

const PROBLEM_KINDS: &[&str] = &["quadratic", "logistic", "rosenbrock", "matrix-regression"];

/// Diagnostics evaluated on the finished runs of an experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CheckName {
    /// Momentum-error bound per sweep point.
    #[serde(rename = "lemma1")]
    Lemma1,
    /// Log-log slope of the returned-iterate criterion against `T`.
    #[serde(rename = "slope-T")]
    SlopeT,
    /// Same against the number of parameters.
    #[serde(rename = "slope-d")]
    SlopeD,
}

const CHECK_NAMES: &[&str] = &["lemma1", "slope-T", "slope-d"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerBlock {
    pub kind: OptimizerKind,
    #[serde(flatten)]
    pub config: OptimizerConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub checks: Vec<CheckName>,
    #[serde(default = "default_max_runs")]
    pub max_runs: usize,
    pub problem: ProblemSpec,
    pub optimizer: OptimizerBlock,
    /// Dotted parameter path to the list of values it takes.
    #[serde(default)]
    pub sweep: BTreeMap<String, Vec<Value>>,
}

fn default_seeds() -> Vec<u64> {
    vec![0]
}

fn default_max_runs() -> usize {
    DEFAULT_MAX_RUNS
}

/// One fully resolved run of an experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSpec {
    /// Index of the sweep point (cross-product order, last key fastest).
    pub point: usize,
    /// `path=value` pairs of the sweep point, or `base` without a sweep.
    pub label: String,
    pub seed: u64,
    pub problem: ProblemSpec,
    pub kind: OptimizerKind,
    /// Configuration before preset resolution, with `seed` filled in.
    pub config: OptimizerConfig,
}

impl RunSpec {
    pub fn id(&self) -> String {
        format!("p{:04}-s{}", self.point, self.seed)
    }
}

fn issue(path: impl Into<String>, message: impl Into<String>) -> SchemaIssue {
    SchemaIssue {
        path: path.into(),
        message: message.into(),
    }
}

fn unknown_keys(table: &Table, prefix: &str, known: &[&str], issues: &mut Vec<SchemaIssue>) {
    for key in table.keys() {
        if !known.contains(&key.as_str()) {
            issues.push(issue(format!("{prefix}{key}"), "unknown key"));
        }
    }
}

fn problem_kind(table: &Table) -> Option<&str> {
    table.get("kind").and_then(Value::as_str)
}

/// Walks the raw document and lists every unknown or misplaced key.
pub fn validate_schema(doc: &Table) -> Vec<SchemaIssue> {
    let mut issues = Vec::new();
    unknown_keys(doc, "", TOP_KEYS, &mut issues);

    let mut problem_known: Option<&[&str]> = None;
    match doc.get("problem") {
        None => issues.push(issue("problem", "missing table")),
        Some(Value::Table(t)) => match problem_kind(t) {
            None => issues.push(issue("problem.kind", "missing problem kind")),
            Some(kind) => match problem_keys(kind) {
                Some(keys) => {
                    unknown_keys(t, "problem.", keys, &mut issues);
                    problem_known = Some(keys);
                }
                None => issues.push(issue(
                    "problem.kind",
                    format!("unknown problem `{kind}`; expected one of {}", PROBLEM_KINDS.join(", ")),
                )),
            },
        },
        Some(_) => issues.push(issue("problem", "must be a table")),
    }

    match doc.get("optimizer") {
        None => issues.push(issue("optimizer", "missing table")),
        Some(Value::Table(t)) => {
            if !t.contains_key("kind") {
                issues.push(issue("optimizer.kind", "missing optimizer kind"));
            }
            for key in t.keys() {
                if key == "seed" {
                    issues.push(issue("optimizer.seed", "seeds are set by the top-level `seeds` list"));
                } else if !OPTIMIZER_KEYS.contains(&key.as_str()) {
                    issues.push(issue(format!("optimizer.{key}"), "unknown key"));
                }
            }
        }
        Some(_) => issues.push(issue("optimizer", "must be a table")),
    }

    match doc.get("sweep") {
        None => {}
        Some(Value::Table(t)) => {
            for (path, values) in t {
                let full = format!("sweep.\"{path}\"");
                let known = match path.split_once('.') {
                    Some(("problem", key)) if key != "kind" => {
                        problem_known.is_none_or(|keys| keys.contains(&key))
                    }
                    Some(("optimizer", key)) => OPTIMIZER_KEYS.contains(&key),
                    _ => false,
                };
                if !known {
                    issues.push(issue(full.clone(), "not a sweepable parameter"));
                }
                match values {
                    Value::Array(a) if !a.is_empty() => {}
                    _ => issues.push(issue(full, "must be a non-empty list of values")),
                }
            }
        }
        Some(_) => issues.push(issue("sweep", "must be a table")),
    }

    if let Some(Value::Array(checks)) = doc.get("checks") {
        for (i, c) in checks.iter().enumerate() {
            if !c.as_str().is_some_and(|s| CHECK_NAMES.contains(&s)) {
                issues.push(issue(
                    format!("checks[{i}]"),
                    format!("unknown check; expected one of {}", CHECK_NAMES.join(", ")),
                ));
            }
        }
    }
    issues
}

fn assign(table: &mut Table, key: &str, value: Value) {
    table.insert(key.to_string(), value);
}

fn to_table<T: Serialize>(value: &T) -> Result<Table> {
    Table::try_from(value).map_err(|e| HarnessError::Parse(e.to_string()))
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let doc: Table = text.parse().map_err(|e: toml::de::Error| HarnessError::Parse(e.to_string()))?;
        let issues = validate_schema(&doc);
        if !issues.is_empty() {
            return Err(HarnessError::Schema(issues));
        }
        let cfg: Self = Value::Table(doc)
            .try_into()
            .map_err(|e: toml::de::Error| HarnessError::Parse(e.to_string()))?;
        cfg.check_values()?;
        Ok(cfg)
    }

    pub fn from_path(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        Self::from_toml_str(&text)
    }

    /// Deterministic TOML echo of the whole experiment.
    pub fn to_toml_string(&self) -> Result<String> {
        let mut doc = to_table(self)?;
        // per-run seeds come from `seeds`
        if let Some(Value::Table(opt)) = doc.get_mut("optimizer") {
            opt.remove("seed");
        }
        toml::to_string(&doc).map_err(|e| HarnessError::Parse(e.to_string()))
    }

    fn check_values(&self) -> Result<()> {
        let mut issues = Vec::new();
        if self.seeds.is_empty() {
            issues.push(issue("seeds", "must list at least one seed"));
        }
        let mut sorted = self.seeds.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != self.seeds.len() {
            issues.push(issue("seeds", "seeds must be distinct"));
        }
        if issues.is_empty() {
            Ok(())
        } else {
            Err(HarnessError::Schema(issues))
        }
    }

    /// Number of sweep points in the cross product.
    pub fn point_count(&self) -> usize {
        self.sweep.values().map(Vec::len).product()
    }

    pub fn run_count(&self) -> usize {
        self.point_count() * self.seeds.len()
    }

    /// Expands the sweep cross product times the seed list. Every value is
    /// re-validated through the typed config, so a bad sweep entry fails here
    /// rather than mid-experiment.
    pub fn expand(&self) -> Result<Vec<RunSpec>> {
        let runs = self.run_count();
        if runs > self.max_runs {
            return Err(HarnessError::TooManyRuns {
                runs,
                cap: self.max_runs,
            });
        }
        let base_problem = to_table(&self.problem)?;
        let base_optimizer = to_table(&self.optimizer)?;
        let keys: Vec<&String> = self.sweep.keys().collect();
        let mut specs = Vec::with_capacity(runs);
        let mut issues = Vec::new();
        for point in 0..self.point_count() {
            let mut problem = base_problem.clone();
            let mut optimizer = base_optimizer.clone();
            let mut labels = Vec::new();
            let mut rest = point;
            let mut picks = vec![0; keys.len()];
            for (slot, key) in keys.iter().enumerate().rev() {
                let n = self.sweep[*key].len();
                picks[slot] = rest % n;
                rest /= n;
            }
            for (key, pick) in keys.iter().zip(picks) {
                let value = self.sweep[*key][pick].clone();
                labels.push(format!("{key}={value}"));
                match key.split_once('.') {
                    Some(("problem", k)) => assign(&mut problem, k, value),
                    Some((_, k)) => assign(&mut optimizer, k, value),
                    None => unreachable!("validated sweep path"),
                }
            }
            let label = if labels.is_empty() {
                "base".to_string()
            } else {
                labels.join(",")
            };
            let problem: ProblemSpec = match Value::Table(problem).try_into() {
                Ok(p) => p,
                Err(e) => {
                    issues.push(issue(format!("sweep point {label}"), format!("problem: {e}")));
                    continue;
                }
            };
            let optimizer: OptimizerBlock = match Value::Table(optimizer).try_into() {
                Ok(o) => o,
                Err(e) => {
                    issues.push(issue(format!("sweep point {label}"), format!("optimizer: {e}")));
                    continue;
                }
            };
            for &seed in &self.seeds {
                let mut config = optimizer.config.clone();
                config.seed = seed;
                specs.push(RunSpec {
                    point,
                    label: label.clone(),
                    seed,
                    problem: problem.clone(),
                    kind: optimizer.kind,
                    config,
                });
            }
        }
        if issues.is_empty() {
            Ok(specs)
        } else {
            Err(HarnessError::Schema(issues))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
        [problem]
        kind = "quadratic"
        d = 2

        [optimizer]
        kind = "jaguar-signsgd"
        iterations = 100
    "#;

    fn keys_of<T: Serialize>(value: &T) -> Vec<String> {
        let mut keys: Vec<String> = to_table(value).unwrap().keys().cloned().collect();
        keys.sort();
        keys
    }

    fn sorted(keys: &[&str]) -> Vec<String> {
        let mut v: Vec<String> = keys.iter().map(|s| s.to_string()).collect();
        v.sort();
        v
    }

    #[test]
    fn minimal_config_defaults() {
        let cfg = ExperimentConfig::from_toml_str(MINIMAL).unwrap();
        assert_eq!(cfg.seeds, vec![0]);
        assert_eq!(cfg.max_runs, DEFAULT_MAX_RUNS);
        assert_eq!(cfg.optimizer.kind, OptimizerKind::JaguarSignSgd);
        assert_eq!(cfg.optimizer.config.iterations, 100);
        let runs = cfg.expand().unwrap();
        assert_eq!(runs.len(), 1);
        assert_eq!(runs[0].label, "base");
        assert_eq!(runs[0].id(), "p0000-s0");
    }

    #[test]
    fn schema_lists_match_serialized_types() {
        let mut cfg = OptimizerConfig::new(0.1, 0.9, 0.1, 10, 0);
        cfg.delta0 = Some(1.0);
        let mut expected = sorted(OPTIMIZER_KEYS);
        expected.retain(|k| k != "kind");
        expected.push("seed".into());
        expected.sort();
        assert_eq!(keys_of(&cfg), expected);
        let specs = [
            ProblemSpec::Quadratic {
                d: 2,
                condition_number: 1.0,
                sigma: 0.0,
                samples: 1,
                smoothness: 1.0,
                seed: 0,
            },
            ProblemSpec::Logistic {
                d: 2,
                samples: 4,
                label_noise: 0.0,
                seed: 0,
            },
            ProblemSpec::Rosenbrock { d: 2, seed: 0 },
            ProblemSpec::MatrixRegression {
                rows: 2,
                cols: 2,
                rank: 1,
                sigma: 0.0,
                samples: 1,
                seed: 0,
            },
        ];
        for spec in specs {
            let table = to_table(&spec).unwrap();
            let kind = table["kind"].as_str().unwrap().to_string();
            assert_eq!(keys_of(&spec), sorted(problem_keys(&kind).unwrap()), "{kind}");
        }
    }

    #[test]
    fn every_unknown_key_is_reported() {
        let text = r#"
            seed = 3
            [problem]
            kind = "quadratic"
            d = 2
            sigam = 1.0
            [optimizer]
            kind = "zo-sgd"
            iterations = 10
            gama = 0.1
            seed = 1
            [sweep]
            "optimizer.bta" = [0.1]
            "problem.d" = []
        "#;
        let Err(HarnessError::Schema(issues)) = ExperimentConfig::from_toml_str(text) else {
            panic!("expected a schema error");
        };
        let paths: Vec<&str> = issues.iter().map(|i| i.path.as_str()).collect();
        assert_eq!(
            paths,
            [
                "seed",
                "problem.sigam",
                "optimizer.gama",
                "optimizer.seed",
                "sweep.\"optimizer.bta\"",
                "sweep.\"problem.d\""
            ]
        );
    }

    #[test]
    fn unknown_problem_kind() {
        let text = MINIMAL.replace("\"quadratic\"", "\"quartic\"");
        let Err(HarnessError::Schema(issues)) = ExperimentConfig::from_toml_str(&text) else {
            panic!("expected a schema error");
        };
        assert_eq!(issues[0].path, "problem.kind");
    }

    #[test]
    fn sweep_cross_product_order() {
        let text = format!(
            "seeds = [5, 6]\n{MINIMAL}\n[sweep]\n\"optimizer.beta\" = [0.0, 0.9]\n\"problem.d\" = [2, 4, 8]\n"
        );
        let cfg = ExperimentConfig::from_toml_str(&text).unwrap();
        let runs = cfg.expand().unwrap();
        assert_eq!(runs.len(), 12);
        assert_eq!(runs[0].label, "optimizer.beta=0.0,problem.d=2");
        assert_eq!(runs[1].seed, 6);
        assert_eq!(runs[2].label, "optimizer.beta=0.0,problem.d=4");
        assert_eq!(runs[6].label, "optimizer.beta=0.9,problem.d=2");
        assert_eq!(runs[11].config.beta, 0.9);
        assert!(matches!(runs[11].problem, ProblemSpec::Quadratic { d: 8, .. }));
        assert_eq!(runs[11].config.seed, 6);
    }

    #[test]
    fn run_cap() {
        let text = format!("max_runs = 3\nseeds = [1, 2]\n{MINIMAL}\n[sweep]\n\"optimizer.beta\" = [0.0, 0.9]\n");
        let cfg = ExperimentConfig::from_toml_str(&text).unwrap();
        assert!(matches!(
            cfg.expand(),
            Err(HarnessError::TooManyRuns { runs: 4, cap: 3 })
        ));
    }

    #[test]
    fn bad_sweep_value_is_a_schema_error() {
        let text = format!("{MINIMAL}\n[sweep]\n\"optimizer.beta\" = [\"high\"]\n");
        let cfg = ExperimentConfig::from_toml_str(&text).unwrap();
        assert!(matches!(cfg.expand(), Err(HarnessError::Schema(_))));
    }

    #[test]
    fn echo_round_trips() {
        let text = format!("seeds = [1, 2]\nchecks = [\"lemma1\"]\n{MINIMAL}\n[sweep]\n\"optimizer.beta\" = [0.0, 0.9]\n");
        let cfg = ExperimentConfig::from_toml_str(&text).unwrap();
        let echo = cfg.to_toml_string().unwrap();
        assert_eq!(ExperimentConfig::from_toml_str(&echo).unwrap(), cfg);
        assert_eq!(cfg.to_toml_string().unwrap(), echo);
    }
}
