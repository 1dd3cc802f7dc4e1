//! Line-delimited JSON reports and their aggregation.
//!
//! Every line is one object. Metric lines carry `kind = "metric"`, a metric
//! `name`, the repetition index and the value; aggregate lines carry
//! `kind = "aggregate"` with mean, sample standard deviation and count. Every
//! line also embeds the config hash and the full seed list.

use std::fmt::Write as _;

use serde_json::{json, Value};

use crate::config::ExperimentConfig;
use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Metric {
    pub name: String,
    pub rep: usize,
    pub value: f64,
}

impl Metric {
    pub fn new(name: impl Into<String>, rep: usize, value: f64) -> Self {
        Self {
            name: name.into(),
            rep,
            value,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Aggregate {
    pub name: String,
    pub mean: f64,
    pub std: f64,
    pub count: usize,
}

/// Mean and sample standard deviation (zero for a single value).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Groups metrics by name, in order of first appearance.
pub fn aggregate(metrics: &[Metric]) -> Vec<Aggregate> {
    let mut names: Vec<&str> = Vec::new();
    for m in metrics {
        if !names.contains(&m.name.as_str()) {
            names.push(&m.name);
        }
    }
    names
        .into_iter()
        .map(|name| {
            let values: Vec<f64> = metrics.iter().filter(|m| m.name == name).map(|m| m.value).collect();
            let (mean, std) = mean_std(&values);
            Aggregate {
                name: name.to_string(),
                mean,
                std,
                count: values.len(),
            }
        })
        .collect()
}

fn header(cfg: &ExperimentConfig) -> Value {
    json!({
        "config_hash": cfg.hash(),
        "seeds": cfg.seed_list(),
        "method": cfg.method.name(),
    })
}

fn line(base: &Value, fields: Value) -> String {
    let mut obj = base.as_object().cloned().unwrap_or_default();
    if let Value::Object(extra) = fields {
        obj.extend(extra);
    }
    Value::Object(obj).to_string()
}

/// Metric lines followed by one aggregate line per metric name.
pub fn to_jsonl(cfg: &ExperimentConfig, metrics: &[Metric]) -> String {
    let base = header(cfg);
    let mut out = String::new();
    for m in metrics {
        out.push_str(&line(
            &base,
            json!({"kind": "metric", "name": m.name, "rep": m.rep, "value": m.value}),
        ));
        out.push('\n');
    }
    for a in aggregate(metrics) {
        out.push_str(&line(
            &base,
            json!({"kind": "aggregate", "name": a.name, "mean": a.mean, "std": a.std, "count": a.count}),
        ));
        out.push('\n');
    }
    out
}

/// Metric lines of a report; other kinds are skipped.
pub fn parse_metrics(text: &str) -> Result<Vec<Metric>> {
    let mut out = Vec::new();
    for (i, l) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let bad = |why: &str| CliError::Data(format!("report line {}: {why}", i + 1));
        let v: Value = serde_json::from_str(l).map_err(|e| bad(&e.to_string()))?;
        if v["kind"] != "metric" {
            continue;
        }
        let name = v["name"].as_str().ok_or_else(|| bad("missing name"))?;
        let rep = v["rep"].as_u64().ok_or_else(|| bad("missing rep"))? as usize;
        let value = v["value"].as_f64().ok_or_else(|| bad("missing value"))?;
        out.push(Metric::new(name, rep, value));
    }
    Ok(out)
}

/// Human-readable `name  mean ± std  (n)` table.
pub fn summary_table(aggs: &[Aggregate]) -> String {
    let width = aggs.iter().map(|a| a.name.len()).max().unwrap_or(0).max(6);
    let mut out = String::new();
    let _ = writeln!(out, "{:<width$}  {:>10}  {:>10}  {:>3}", "metric", "mean", "std", "n");
    for a in aggs {
        let _ = writeln!(
            out,
            "{:<width$}  {:>10.4}  {:>10.4}  {:>3}",
            a.name, a.mean, a.std, a.count
        );
    }
    out
}
