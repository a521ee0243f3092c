//! Experiment specs and versioned reports (JSON, with a CSV mirror of rows).

use std::collections::BTreeMap;

use anyhow::{bail, Result};
use serde::{Deserialize, Serialize};
use serde_json::Value;

/// Bumped whenever a field changes meaning or is removed.
pub const SCHEMA_VERSION: u32 = 1;

/// Default write multiplier.
pub const DEFAULT_OMEGA: u64 = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Experiment {
    pub subject: String,
    pub sizes: Vec<usize>,
    #[serde(default)]
    pub params: BTreeMap<String, Value>,
    #[serde(default = "one")]
    pub repetitions: u32,
}

fn one() -> u32 {
    1
}

impl Experiment {
    pub fn new(subject: &str, sizes: Vec<usize>) -> Self {
        Experiment {
            subject: subject.to_string(),
            sizes,
            params: BTreeMap::new(),
            repetitions: 1,
        }
    }

    pub fn with(mut self, key: &str, v: impl Into<Value>) -> Self {
        self.params.insert(key.to_string(), v.into());
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.sizes.is_empty() || self.sizes.windows(2).any(|w| w[0] >= w[1]) {
            bail!("sizes must be non-empty and strictly increasing");
        }
        if self.repetitions == 0 {
            bail!("repetitions must be at least 1");
        }
        Ok(())
    }

    pub fn f64_param(&self, key: &str, default: f64) -> f64 {
        self.params.get(key).and_then(Value::as_f64).unwrap_or(default)
    }

    pub fn u64_param(&self, key: &str, default: u64) -> u64 {
        self.params.get(key).and_then(Value::as_u64).unwrap_or(default)
    }

    pub fn str_param<'a>(&'a self, key: &str, default: &'a str) -> &'a str {
        self.params.get(key).and_then(Value::as_str).unwrap_or(default)
    }

    pub fn u64_list(&self, key: &str, default: &[u64]) -> Vec<u64> {
        match self.params.get(key).and_then(Value::as_array) {
            Some(a) => a.iter().filter_map(Value::as_u64).collect(),
            None => default.to_vec(),
        }
    }

    pub fn seed(&self) -> u64 {
        self.u64_param("seed", 1)
    }

    pub fn omega(&self) -> u64 {
        self.u64_param("omega", DEFAULT_OMEGA)
    }
}

/// Metered totals for one size (and one setting of the row's tags),
/// averaged over repetitions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub n: usize,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub tags: BTreeMap<String, String>,
    pub reads: u64,
    pub writes: u64,
    pub charged_work: u64,
    #[serde(default)]
    pub ratios: BTreeMap<String, f64>,
    #[serde(default)]
    pub flags: BTreeMap<String, bool>,
}

impl Row {
    pub fn new(n: usize) -> Self {
        Row {
            n,
            tags: BTreeMap::new(),
            reads: 0,
            writes: 0,
            charged_work: 0,
            ratios: BTreeMap::new(),
            flags: BTreeMap::new(),
        }
    }

    pub fn tag(mut self, k: &str, v: impl ToString) -> Self {
        self.tags.insert(k.to_string(), v.to_string());
        self
    }

    pub fn ratio(&mut self, k: &str, v: f64) {
        self.ratios.insert(k.to_string(), v);
    }

    pub fn flag(&mut self, k: &str, v: bool) {
        self.flags.insert(k.to_string(), v);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Environment {
    pub seed: u64,
    pub omega: u64,
    pub version: String,
    /// Seconds since the Unix epoch; ignored by [`Report::canonical`].
    pub timestamp: u64,
}

impl Environment {
    pub fn now(seed: u64, omega: u64) -> Self {
        Environment {
            seed,
            omega,
            version: env!("CARGO_PKG_VERSION").to_string(),
            timestamp: std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map_or(0, |d| d.as_secs()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema_version: u32,
    pub experiment: Experiment,
    pub rows: Vec<Row>,
    /// Derived figures over all rows, such as flatness spreads.
    #[serde(default)]
    pub summary: BTreeMap<String, f64>,
    pub environment: Environment,
}

impl Report {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports serialize")
    }

    /// JSON with the timestamp zeroed, for determinism checks.
    pub fn canonical(&self) -> String {
        let mut r = self.clone();
        r.environment.timestamp = 0;
        r.to_json()
    }

    pub fn to_csv(&self) -> Result<String> {
        rows_csv(self.rows.iter().map(|r| (self.experiment.subject.as_str(), r)))
    }
}

/// Several reports in one file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Merged {
    pub schema_version: u32,
    pub reports: Vec<Report>,
}

pub fn merge(reports: Vec<Report>) -> Result<Merged> {
    if let Some(r) = reports.iter().find(|r| r.schema_version != SCHEMA_VERSION) {
        bail!(
            "report for {} has schema version {}, expected {SCHEMA_VERSION}",
            r.experiment.subject,
            r.schema_version
        );
    }
    Ok(Merged {
        schema_version: SCHEMA_VERSION,
        reports,
    })
}

impl Merged {
    pub fn to_csv(&self) -> Result<String> {
        rows_csv(
            self.reports
                .iter()
                .flat_map(|r| r.rows.iter().map(move |row| (r.experiment.subject.as_str(), row))),
        )
    }
}

/// One CSV line per row. Tag, ratio and flag columns are the union over all
/// rows; missing cells stay empty.
fn rows_csv<'a>(rows: impl Iterator<Item = (&'a str, &'a Row)> + Clone) -> Result<String> {
    let mut tags = std::collections::BTreeSet::new();
    let mut ratios = std::collections::BTreeSet::new();
    let mut flags = std::collections::BTreeSet::new();
    for (_, r) in rows.clone() {
        tags.extend(r.tags.keys().cloned());
        ratios.extend(r.ratios.keys().cloned());
        flags.extend(r.flags.keys().cloned());
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut head = vec!["subject".to_string(), "n".to_string()];
    head.extend(tags.iter().cloned());
    head.extend(["reads", "writes", "charged_work"].map(String::from));
    head.extend(ratios.iter().cloned());
    head.extend(flags.iter().cloned());
    w.write_record(&head)?;
    for (subject, r) in rows {
        let mut rec = vec![subject.to_string(), r.n.to_string()];
        rec.extend(tags.iter().map(|t| r.tags.get(t).cloned().unwrap_or_default()));
        rec.extend([r.reads, r.writes, r.charged_work].map(|x| x.to_string()));
        rec.extend(ratios.iter().map(|k| r.ratios.get(k).map(|v| v.to_string()).unwrap_or_default()));
        rec.extend(flags.iter().map(|k| r.flags.get(k).map(|v| v.to_string()).unwrap_or_default()));
        w.write_record(&rec)?;
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}

/// `max/min − 1` of a positive series; 0 for fewer than two values.
pub fn spread(values: impl IntoIterator<Item = f64>) -> f64 {
    let v: Vec<f64> = values.into_iter().collect();
    if v.len() < 2 {
        return 0.0;
    }
    let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    hi / lo - 1.0
}
