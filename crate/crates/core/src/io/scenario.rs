//! Scenario files: JSON documents holding a portfolio, its uncertain
//! parameters and descriptive metadata. See `docs/schema.md`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::model::{
    validate_portfolio, AdverseEvent, AttackType, BreachModel, DependencyEdge, Gdf, Portfolio, TableKnot,
    ValidPortfolio, ValidationReport,
};
use crate::sensitivity::{self, UncertainParam};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Metadata {
    #[serde(default)]
    pub title: String,
    #[serde(default)]
    pub notes: String,
    /// Parameter values are made up to show a shape, not measured.
    #[serde(default)]
    pub illustrative: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioFile {
    pub schema_version: u32,
    pub metadata: Metadata,
    pub portfolio: ValidPortfolio<f64>,
    pub uncertainty: Vec<UncertainParam>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ParseOptions {
    /// Report unknown fields as warnings instead of rejecting the document.
    pub lenient: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Parsed {
    pub scenario: ScenarioFile,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ScenarioError {
    #[error("syntax error at line {line}, column {column}: {msg}")]
    Syntax { line: usize, column: usize, msg: String },
    #[error("schema error at {path} (line {line}, column {column}): {msg}")]
    Schema {
        path: String,
        line: usize,
        column: usize,
        msg: String,
    },
    #[error("invalid portfolio:\n{0}")]
    Validation(ValidationReport),
}

// ---- wire format ----

#[derive(Serialize, Deserialize)]
struct ScenarioDoc {
    schema_version: u32,
    #[serde(default)]
    metadata: Metadata,
    portfolio: PortfolioDoc,
    #[serde(default)]
    uncertainty: Vec<UncertainParam>,
}

#[derive(Serialize, Deserialize)]
struct PortfolioDoc {
    budget: f64,
    #[serde(default)]
    gdfs: Vec<GdfDoc>,
    #[serde(default)]
    edges: Vec<EdgeDoc>,
}

#[derive(Serialize, Deserialize)]
struct GdfDoc {
    id: String,
    #[serde(default)]
    name: Option<String>,
    ben: f64,
    #[serde(default)]
    dir_costs: f64,
    #[serde(default)]
    attacks: Vec<AttackDoc>,
    #[serde(default)]
    adverse: Vec<AdverseDoc>,
    #[serde(default)]
    mandatory: bool,
    #[serde(default)]
    actual_spend: Option<f64>,
}

#[derive(Serialize, Deserialize)]
struct AttackDoc {
    id: String,
    #[serde(default)]
    description: String,
    baseline_prob: f64,
    loss: f64,
    breach: BreachDoc,
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum BreachDoc {
    #[serde(rename = "gordon_loeb_i")]
    GordonLoebI {
        alpha: f64,
        beta: f64,
    },
    #[serde(rename = "gordon_loeb_ii")]
    GordonLoebII {
        alpha: f64,
    },
    Exponential {
        kappa: f64,
    },
    Table(Vec<KnotDoc>),
}

#[derive(Serialize, Deserialize)]
struct KnotDoc {
    spend: f64,
    multiplier: f64,
}

#[derive(Serialize, Deserialize)]
struct AdverseDoc {
    id: String,
    prob: f64,
    cost: f64,
}

#[derive(Serialize, Deserialize)]
struct EdgeDoc {
    from: String,
    to: String,
    #[serde(default)]
    uplift: BTreeMap<String, f64>,
}

impl From<BreachDoc> for BreachModel<f64> {
    fn from(b: BreachDoc) -> Self {
        match b {
            BreachDoc::GordonLoebI { alpha, beta } => Self::GordonLoebI { alpha, beta },
            BreachDoc::GordonLoebII { alpha } => Self::GordonLoebII { alpha },
            BreachDoc::Exponential { kappa } => Self::Exponential { kappa },
            BreachDoc::Table(k) => Self::Table(
                k.into_iter()
                    .map(|k| TableKnot {
                        spend: k.spend,
                        multiplier: k.multiplier,
                    })
                    .collect(),
            ),
        }
    }
}

impl From<&BreachModel<f64>> for BreachDoc {
    fn from(b: &BreachModel<f64>) -> Self {
        match b {
            BreachModel::GordonLoebI { alpha, beta } => Self::GordonLoebI {
                alpha: *alpha,
                beta: *beta,
            },
            BreachModel::GordonLoebII { alpha } => Self::GordonLoebII { alpha: *alpha },
            BreachModel::Exponential { kappa } => Self::Exponential { kappa: *kappa },
            BreachModel::Table(k) => Self::Table(
                k.iter()
                    .map(|k| KnotDoc {
                        spend: k.spend,
                        multiplier: k.multiplier,
                    })
                    .collect(),
            ),
        }
    }
}

impl From<PortfolioDoc> for Portfolio<f64> {
    fn from(d: PortfolioDoc) -> Self {
        Portfolio {
            budget: d.budget,
            gdfs: d
                .gdfs
                .into_iter()
                .map(|g| Gdf {
                    name: g.name.unwrap_or_else(|| g.id.clone()),
                    id: g.id,
                    ben: g.ben,
                    dir_costs: g.dir_costs,
                    attacks: g
                        .attacks
                        .into_iter()
                        .map(|a| AttackType {
                            id: a.id,
                            description: a.description,
                            baseline_prob: a.baseline_prob,
                            loss: a.loss,
                            breach: a.breach.into(),
                        })
                        .collect(),
                    adverse: g
                        .adverse
                        .into_iter()
                        .map(|e| AdverseEvent {
                            id: e.id,
                            prob: e.prob,
                            cost: e.cost,
                        })
                        .collect(),
                    mandatory: g.mandatory,
                    actual_spend: g.actual_spend,
                })
                .collect(),
            edges: d
                .edges
                .into_iter()
                .map(|e| DependencyEdge {
                    from: e.from,
                    to: e.to,
                    uplift: e.uplift,
                })
                .collect(),
        }
    }
}

impl From<&Portfolio<f64>> for PortfolioDoc {
    fn from(p: &Portfolio<f64>) -> Self {
        PortfolioDoc {
            budget: p.budget,
            gdfs: p
                .gdfs
                .iter()
                .map(|g| GdfDoc {
                    id: g.id.clone(),
                    name: Some(g.name.clone()),
                    ben: g.ben,
                    dir_costs: g.dir_costs,
                    attacks: g
                        .attacks
                        .iter()
                        .map(|a| AttackDoc {
                            id: a.id.clone(),
                            description: a.description.clone(),
                            baseline_prob: a.baseline_prob,
                            loss: a.loss,
                            breach: (&a.breach).into(),
                        })
                        .collect(),
                    adverse: g
                        .adverse
                        .iter()
                        .map(|e| AdverseDoc {
                            id: e.id.clone(),
                            prob: e.prob,
                            cost: e.cost,
                        })
                        .collect(),
                    mandatory: g.mandatory,
                    actual_spend: g.actual_spend,
                })
                .collect(),
            edges: p
                .edges
                .iter()
                .map(|e| EdgeDoc {
                    from: e.from.clone(),
                    to: e.to.clone(),
                    uplift: e.uplift.clone(),
                })
                .collect(),
        }
    }
}

// ---- parsing ----

pub fn parse_scenario(text: &str) -> Result<ScenarioFile, ScenarioError> {
    parse_scenario_with(text, ParseOptions::default()).map(|p| p.scenario)
}

pub fn parse_scenario_with(text: &str, opts: ParseOptions) -> Result<Parsed, ScenarioError> {
    let raw: Value = serde_json::from_str(text).map_err(|e| ScenarioError::Syntax {
        line: e.line(),
        column: e.column(),
        msg: strip_position(&e),
    })?;
    let mut de = serde_json::Deserializer::from_str(text);
    let doc: ScenarioDoc = serde_path_to_error::deserialize(&mut de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        let msg = strip_position(&inner);
        ScenarioError::Schema {
            path: missing_field_path(&path, &msg),
            line: inner.line(),
            column: inner.column(),
            msg,
        }
    })?;
    if doc.schema_version != SCHEMA_VERSION {
        return Err(schema_at(
            text,
            "schema_version",
            format!(
                "unsupported schema version {}, expected {SCHEMA_VERSION}",
                doc.schema_version
            ),
        ));
    }

    let known = serde_json::to_value(&doc).expect("scenario documents always serialize");
    let mut unknown = Vec::new();
    unknown_fields(&raw, &known, String::new(), &mut unknown);
    let mut warnings = Vec::new();
    if let Some(first) = unknown.first() {
        if !opts.lenient {
            return Err(schema_at(text, first, "unknown field".to_string()));
        }
        warnings.extend(unknown.iter().map(|p| format!("ignored unknown field {p}")));
    }

    let portfolio = validate_portfolio(Portfolio::from(doc.portfolio)).map_err(ScenarioError::Validation)?;
    let base = portfolio_to_value(&portfolio);
    for (i, u) in doc.uncertainty.iter().enumerate() {
        if let Err(e) = sensitivity::check_param(&base, u) {
            return Err(schema_at(text, &format!("uncertainty[{i}]"), e.to_string()));
        }
    }
    Ok(Parsed {
        scenario: ScenarioFile {
            schema_version: doc.schema_version,
            metadata: doc.metadata,
            portfolio,
            uncertainty: doc.uncertainty,
        },
        warnings,
    })
}

fn strip_position(e: &serde_json::Error) -> String {
    let s = e.to_string();
    match s.rfind(" at line ") {
        Some(i) => s[..i].to_string(),
        None => s,
    }
}

fn missing_field_path(path: &str, msg: &str) -> String {
    let field = msg.strip_prefix("missing field `").and_then(|m| m.strip_suffix('`'));
    match (field, path) {
        (Some(f), "." | "") => f.to_string(),
        (Some(f), p) => format!("{p}.{f}"),
        (None, p) => p.to_string(),
    }
}

/// Schema error for a path found after deserialization; the position is that
/// of the first occurrence of the last key, which is good enough to navigate.
fn schema_at(text: &str, path: &str, msg: String) -> ScenarioError {
    let key = path
        .rsplit('.')
        .next()
        .map(|k| k.split('[').next().unwrap_or(k))
        .unwrap_or(path);
    let (line, column) = text
        .find(&format!("\"{key}\""))
        .map(|at| {
            let before = &text[..at];
            let line = before.matches('\n').count() + 1;
            let column = at - before.rfind('\n').map_or(0, |n| n + 1) + 1;
            (line, column)
        })
        .unwrap_or((0, 0));
    ScenarioError::Schema {
        path: path.to_string(),
        line,
        column,
        msg,
    }
}

/// Object keys present in `raw` but absent from the re-serialized document.
fn unknown_fields(raw: &Value, known: &Value, path: String, out: &mut Vec<String>) {
    let join = |k: &str| {
        if path.is_empty() {
            k.to_string()
        } else {
            format!("{path}.{k}")
        }
    };
    match (raw, known) {
        (Value::Object(r), Value::Object(k)) => {
            for (key, v) in r {
                match k.get(key) {
                    Some(kv) => unknown_fields(v, kv, join(key), out),
                    None => out.push(join(key)),
                }
            }
        }
        (Value::Array(r), Value::Array(k)) => {
            for (i, (rv, kv)) in r.iter().zip(k).enumerate() {
                unknown_fields(rv, kv, format!("{path}[{i}]"), out);
            }
        }
        _ => {}
    }
}

// ---- serialization ----

/// Portfolio as the JSON object stored under `portfolio`, with every field
/// spelled out. Uncertainty targets are JSON pointers into this object.
pub fn portfolio_to_value(p: &Portfolio<f64>) -> Value {
    serde_json::to_value(PortfolioDoc::from(p)).expect("portfolios always serialize")
}

/// Inverse of [`portfolio_to_value`]; the result is not yet validated.
pub fn portfolio_from_value(v: Value) -> Result<Portfolio<f64>, serde_json::Error> {
    serde_json::from_value::<PortfolioDoc>(v).map(Portfolio::from)
}

pub fn serialize_scenario(s: &ScenarioFile) -> String {
    let doc = ScenarioDoc {
        schema_version: s.schema_version,
        metadata: s.metadata.clone(),
        portfolio: PortfolioDoc::from(s.portfolio.portfolio()),
        uncertainty: s.uncertainty.clone(),
    };
    let mut out = serde_json::to_string_pretty(&doc).expect("scenario documents always serialize");
    out.push('\n');
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{"schema_version": 1, "portfolio": {"budget": 10, "gdfs": [{"id": "x", "ben": 5}]}}"#;

    #[test]
    fn minimal_document_gets_defaults() {
        let s = parse_scenario(MINIMAL).unwrap();
        let g = &s.portfolio.gdfs[0];
        assert_eq!(g.name, "x");
        assert_eq!(g.dir_costs, 0.0);
        assert!(g.attacks.is_empty() && g.adverse.is_empty());
        assert!(!g.mandatory);
        assert_eq!(g.actual_spend, None);
        assert!(s.uncertainty.is_empty());
        assert_eq!(s.metadata, Metadata::default());
    }

    #[test]
    fn missing_budget_names_path() {
        let e = parse_scenario(r#"{"schema_version": 1, "portfolio": {"gdfs": []}}"#).unwrap_err();
        match e {
            ScenarioError::Schema { path, .. } => assert_eq!(path, "portfolio.budget"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn syntax_error_has_position() {
        let e = parse_scenario("{\n  \"schema_version\": 1,\n  oops\n}").unwrap_err();
        assert!(matches!(e, ScenarioError::Syntax { line: 3, .. }), "{e:?}");
    }

    #[test]
    fn type_error_has_path_and_line() {
        let text =
            "{\"schema_version\": 1,\n \"portfolio\": {\"budget\": 1, \"gdfs\": [{\"id\": \"x\", \"ben\": \"lots\"}]}}";
        match parse_scenario(text).unwrap_err() {
            ScenarioError::Schema { path, line, .. } => {
                assert_eq!(path, "portfolio.gdfs[0].ben");
                assert_eq!(line, 2);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_fields_strict_and_lenient() {
        let text =
            r#"{"schema_version": 1, "portfolio": {"budget": 1, "gdfs": [{"id": "x", "ben": 5, "colour": "red"}]}}"#;
        match parse_scenario(text).unwrap_err() {
            ScenarioError::Schema { path, msg, .. } => {
                assert_eq!(path, "portfolio.gdfs[0].colour");
                assert_eq!(msg, "unknown field");
            }
            other => panic!("{other:?}"),
        }
        let p = parse_scenario_with(text, ParseOptions { lenient: true }).unwrap();
        assert_eq!(
            p.warnings,
            vec!["ignored unknown field portfolio.gdfs[0].colour".to_string()]
        );
    }

    #[test]
    fn wrong_version_and_validation_errors() {
        let e = parse_scenario(r#"{"schema_version": 2, "portfolio": {"budget": 1}}"#).unwrap_err();
        assert!(matches!(e, ScenarioError::Schema { ref path, .. } if path == "schema_version"));
        let e = parse_scenario(r#"{"schema_version": 1, "portfolio": {"budget": -1}}"#).unwrap_err();
        assert!(matches!(e, ScenarioError::Validation(_)));
    }

    #[test]
    fn breach_models_round_trip() {
        let text = r#"{"schema_version": 1, "portfolio": {"budget": 1, "gdfs": [{"id": "x", "ben": 5,
            "attacks": [
              {"id": "a", "baseline_prob": 0.2, "loss": 100, "breach": {"gordon_loeb_i": {"alpha": 0.1, "beta": 1.5}}},
              {"id": "b", "baseline_prob": 0.2, "loss": 100, "breach": {"gordon_loeb_ii": {"alpha": 0.1}}},
              {"id": "c", "baseline_prob": 0.2, "loss": 100, "breach": {"exponential": {"kappa": 0.1}}},
              {"id": "d", "baseline_prob": 0.2, "loss": 100, "breach": {"table": [
                 {"spend": 0, "multiplier": 1}, {"spend": 10, "multiplier": 0.5}, {"spend": 30, "multiplier": 0.25}]}}
            ]}]}}"#;
        let s = parse_scenario(text).unwrap();
        let again = parse_scenario(&serialize_scenario(&s)).unwrap();
        assert_eq!(s, again);
    }
}
