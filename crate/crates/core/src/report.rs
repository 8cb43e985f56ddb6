//! Metric reports: per-sequence values, aggregates, and the conventions that
//! produced them.
//!
//! Stored values are raw (mm or mm²). Table scale factors are applied only
//! when formatting the CSV table. JSON output has sorted keys and every
//! float rounded to 12 significant digits so identical runs are
//! byte-identical.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::error::{Error, Result};
use crate::registered::RegisteredConventions;
use crate::unregistered::VarifoldOptions;

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Metrics whose table columns are shown in units of a power of ten:
/// a raw DTW of 0.0123 mm appears as 1.23 under "DTW (x1e-2 mm)".
pub const TABLE_SCALES: [(&str, f64); 3] = [("dtw", 1e-2), ("dfd", 1e-3), ("delta_m", 1e-6)];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Registered,
    Unregistered,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Registered => "registered",
            Mode::Unregistered => "unregistered",
        }
    }
}

/// Every flag-switchable convention that affects metric values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Conventions {
    pub registered: RegisteredConventions,
    pub varifold: VarifoldOptions,
    /// Also report the training losses.
    pub losses: bool,
}

impl Default for Conventions {
    fn default() -> Self {
        Conventions {
            registered: RegisteredConventions::default(),
            varifold: VarifoldOptions::default(),
            losses: false,
        }
    }
}

impl Conventions {
    /// Reads the conventions block back out of a JSON report.
    pub fn from_report_json(text: &str) -> Result<Self> {
        let v: Value = serde_json::from_str(text)
            .map_err(|e| Error::invalid(format!("report is not valid JSON: {e}")))?;
        let c = v
            .pointer("/metadata/conventions")
            .ok_or_else(|| Error::invalid("report has no metadata.conventions"))?;
        serde_json::from_value(c.clone())
            .map_err(|e| Error::invalid(format!("unreadable conventions in report: {e}")))
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SequenceEntry {
    pub id: String,
    pub metrics: BTreeMap<String, f64>,
    pub per_frame: BTreeMap<String, Vec<f64>>,
    pub per_landmark: BTreeMap<String, Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricReport {
    pub mode: Mode,
    pub sequences: Vec<SequenceEntry>,
    pub conventions: Conventions,
    /// Free-form metadata: mask labels, alignment, seeds, input paths.
    pub metadata: BTreeMap<String, Value>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stat {
    pub mean: f64,
    pub std: f64,
}

/// Rounds to 12 significant digits.
pub fn round_sig12(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    format!("{x:.11e}").parse().expect("float round-trips through text")
}

fn num(x: f64, what: &str) -> Result<Value> {
    if !x.is_finite() {
        return Err(Error::invalid(format!("{what} is not finite ({x})")));
    }
    let r = round_sig12(x);
    // normalize -0.0 so it prints as 0.0
    let r = if r == 0.0 { 0.0 } else { r };
    Ok(Value::from(r))
}

/// Value of `metric` in its table unit; unchanged for unscaled metrics.
pub fn scaled_value(metric: &str, raw: f64) -> f64 {
    match TABLE_SCALES.iter().find(|(m, _)| *m == metric) {
        Some((_, unit)) => raw / unit,
        None => raw,
    }
}

impl MetricReport {
    pub fn new(mode: Mode, conventions: Conventions) -> Self {
        MetricReport {
            mode,
            sequences: Vec::new(),
            conventions,
            metadata: BTreeMap::new(),
        }
    }

    /// Metric names present in any sequence, sorted.
    pub fn metric_names(&self) -> Vec<String> {
        let mut names: Vec<String> = self
            .sequences
            .iter()
            .flat_map(|s| s.metrics.keys().cloned())
            .collect();
        names.sort();
        names.dedup();
        names
    }

    /// Mean and population standard deviation of each metric across sequences.
    pub fn aggregate(&self) -> BTreeMap<String, Stat> {
        let mut out = BTreeMap::new();
        for name in self.metric_names() {
            let xs: Vec<f64> = self
                .sequences
                .iter()
                .filter_map(|s| s.metrics.get(&name).copied())
                .collect();
            let n = xs.len() as f64;
            let mean = xs.iter().sum::<f64>() / n;
            let std = (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt();
            out.insert(name, Stat { mean, std });
        }
        out
    }

    pub fn to_json_value(&self) -> Result<Value> {
        let mut sequences = Vec::with_capacity(self.sequences.len());
        for s in &self.sequences {
            let mut metrics = Map::new();
            for (k, &v) in &s.metrics {
                metrics.insert(k.clone(), num(v, &format!("{}: {k}", s.id))?);
            }
            let arrays = |m: &BTreeMap<String, Vec<f64>>| -> Result<Map<String, Value>> {
                let mut out = Map::new();
                for (k, xs) in m {
                    let vals = xs
                        .iter()
                        .map(|&x| num(x, &format!("{}: {k}", s.id)))
                        .collect::<Result<Vec<_>>>()?;
                    out.insert(k.clone(), Value::Array(vals));
                }
                Ok(out)
            };
            let mut entry = Map::new();
            entry.insert("id".into(), Value::from(s.id.clone()));
            entry.insert("metrics".into(), Value::Object(metrics));
            if !s.per_frame.is_empty() {
                entry.insert("per_frame".into(), Value::Object(arrays(&s.per_frame)?));
            }
            if !s.per_landmark.is_empty() {
                entry.insert("per_landmark".into(), Value::Object(arrays(&s.per_landmark)?));
            }
            sequences.push(Value::Object(entry));
        }
        let mut aggregate = Map::new();
        for (k, st) in self.aggregate() {
            aggregate.insert(
                k.clone(),
                json!({ "mean": num(st.mean, &k)?, "std": num(st.std, &k)? }),
            );
        }
        let mut metadata: Map<String, Value> = self
            .metadata
            .iter()
            .map(|(k, v)| (k.clone(), v.clone()))
            .collect();
        metadata.insert("tool_version".into(), Value::from(TOOL_VERSION));
        metadata.insert(
            "conventions".into(),
            serde_json::to_value(self.conventions).expect("conventions serialize"),
        );
        let scales: Map<String, Value> = TABLE_SCALES
            .iter()
            .map(|(m, s)| (m.to_string(), Value::from(*s)))
            .collect();
        metadata.insert("table_scale_factors".into(), Value::Object(scales));
        metadata.insert("units".into(), units_value());
        Ok(json!({
            "mode": self.mode.as_str(),
            "sequences": sequences,
            "aggregate": aggregate,
            "metadata": metadata,
        }))
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(&self.to_json_value()?).expect("value serializes");
        s.push('\n');
        Ok(s)
    }

    /// Table with one row per sequence plus a mean row, scaled columns per
    /// [`TABLE_SCALES`].
    pub fn to_scaled_csv(&self) -> String {
        let columns: &[(&str, &str)] = match self.mode {
            Mode::Registered => &[
                ("lve", "LVE (mm^2)"),
                ("mve", "MVE (mm^2)"),
                ("fdd", "FDD (mm)"),
                ("dtw", "DTW (x1e-2 mm)"),
                ("dfd", "DFD (x1e-3 mm)"),
                ("delta_m", "delta_M (x1e-6 mm^2)"),
                ("delta_cd", "delta_Cd"),
            ],
            Mode::Unregistered => &[("hd", "HD (mm)"), ("cd", "CD (mm^2)"), ("varifold", "Varifold")],
        };
        let mut out = String::from("sequence");
        for (_, h) in columns {
            out.push(',');
            out.push_str(h);
        }
        out.push('\n');
        let cell = |metric: &str, raw: Option<f64>| match raw {
            Some(v) => format!("{}", round_sig12(scaled_value(metric, v))),
            None => String::new(),
        };
        for s in &self.sequences {
            out.push_str(&s.id);
            for (m, _) in columns {
                let _ = write!(out, ",{}", cell(m, s.metrics.get(*m).copied()));
            }
            out.push('\n');
        }
        let agg = self.aggregate();
        out.push_str("mean");
        for (m, _) in columns {
            let _ = write!(out, ",{}", cell(m, agg.get(*m).map(|s| s.mean)));
        }
        out.push('\n');
        out
    }
}

fn units_value() -> Value {
    json!({
        "lve": "mm^2", "mve": "mm^2", "fdd": "mm", "fdd_abs": "mm",
        "dtw": "mm", "dfd": "mm", "delta_m": "mm^2", "delta_cd": "1",
        "hd": "mm", "cd": "mm^2", "varifold": "mm^4",
        "loss_mse": "mm^2", "loss_masked_mse": "mm^2", "loss_velocity": "mm^2",
        "loss_cosine": "1", "loss_dynamic_chamfer": "mm^2",
    })
}
