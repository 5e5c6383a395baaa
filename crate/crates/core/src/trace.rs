//! Frequency traces and their on-disk forms: a `time_s,freq_hz[,pm_<id>_pu…]`
//! CSV plus a JSON annotation sidecar `{events: [], ufls_trips: []}`.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("trace sample {index}: time {t} is not strictly increasing")]
    NonMonotonic { index: usize, t: f64 },
    #[error("trace sample {index}: frequency {f} must be positive and finite")]
    BadFrequency { index: usize, f: f64 },
    #[error("trace CSV: {0}")]
    Csv(String),
    #[error("annotation sidecar: {0}")]
    Annotation(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EventAnnotation {
    pub t_s: f64,
    pub deficit_mw: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub unit_id: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UflsTripAnnotation {
    /// 1-based stage number.
    pub stage: usize,
    pub t_s: f64,
    pub threshold_hz: f64,
    pub shed_mw: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Annotations {
    #[serde(default)]
    pub events: Vec<EventAnnotation>,
    #[serde(default)]
    pub ufls_trips: Vec<UflsTripAnnotation>,
    /// Settings of the run that produced the trace.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<serde_json::Value>,
}

impl Annotations {
    /// First recorded event time, if any.
    pub fn event_time(&self) -> Option<f64> {
        self.events.first().map(|e| e.t_s)
    }
}

/// Sampled `(t, f)` series; time strictly increasing, frequency positive.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FrequencyTrace {
    times: Vec<f64>,
    freqs: Vec<f64>,
    pub annotations: Annotations,
}

impl FrequencyTrace {
    pub fn new(times: Vec<f64>, freqs: Vec<f64>) -> Result<Self, TraceError> {
        assert_eq!(
            times.len(),
            freqs.len(),
            "time and frequency lengths differ"
        );
        for i in 0..times.len() {
            if !times[i].is_finite() || (i > 0 && times[i] <= times[i - 1]) {
                return Err(TraceError::NonMonotonic {
                    index: i,
                    t: times[i],
                });
            }
            if !(freqs[i] > 0.0 && freqs[i].is_finite()) {
                return Err(TraceError::BadFrequency {
                    index: i,
                    f: freqs[i],
                });
            }
        }
        Ok(FrequencyTrace {
            times,
            freqs,
            annotations: Annotations::default(),
        })
    }

    pub fn from_samples(samples: &[(f64, f64)]) -> Result<Self, TraceError> {
        let (t, f) = samples.iter().copied().unzip();
        Self::new(t, f)
    }

    /// Append a sample without re-checking earlier ones.
    pub(crate) fn push_unchecked(&mut self, t: f64, f: f64) {
        self.times.push(t);
        self.freqs.push(f);
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn freqs(&self) -> &[f64] {
        &self.freqs
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn samples(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.times.iter().copied().zip(self.freqs.iter().copied())
    }

    /// Linear interpolation; clamps outside the sampled range.
    pub fn interpolate(&self, t: f64) -> f64 {
        let ts = &self.times;
        if t <= ts[0] {
            return self.freqs[0];
        }
        if t >= ts[ts.len() - 1] {
            return self.freqs[ts.len() - 1];
        }
        let i = ts.partition_point(|&x| x <= t);
        let (t0, t1) = (ts[i - 1], ts[i]);
        let (f0, f1) = (self.freqs[i - 1], self.freqs[i]);
        f0 + (f1 - f0) * (t - t0) / (t1 - t0)
    }

    /// Same samples shifted in time by `dt` and in frequency by `df`.
    pub fn shifted(&self, dt: f64, df: f64) -> FrequencyTrace {
        FrequencyTrace {
            times: self.times.iter().map(|t| t + dt).collect(),
            freqs: self.freqs.iter().map(|f| f + df).collect(),
            annotations: self.annotations.clone(),
        }
    }
}

/// Per-unit mechanical power series written alongside frequency.
#[derive(Debug, Clone, PartialEq)]
pub struct PmColumn {
    pub unit_id: String,
    pub values: Vec<f64>,
}

pub fn write_trace_csv(trace: &FrequencyTrace, pm: &[PmColumn]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["time_s".to_string(), "freq_hz".to_string()];
    header.extend(pm.iter().map(|c| format!("pm_{}_pu", c.unit_id)));
    w.write_record(&header).expect("in-memory write");
    for (i, (t, f)) in trace.samples().enumerate() {
        let mut row = vec![format!("{t:.6}"), format!("{f:.9}")];
        row.extend(pm.iter().map(|c| format!("{:.9}", c.values[i])));
        w.write_record(&row).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("utf8")
}

/// Read `time_s` and `freq_hz` columns; other columns are ignored.
pub fn read_trace_csv(text: &str) -> Result<FrequencyTrace, TraceError> {
    let mut r = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = r
        .headers()
        .map_err(|e| TraceError::Csv(e.to_string()))?
        .clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| TraceError::Csv(format!("missing column `{name}`")))
    };
    let (ti, fi) = (col("time_s")?, col("freq_hz")?);
    let mut times = Vec::new();
    let mut freqs = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| TraceError::Csv(e.to_string()))?;
        let num = |i: usize, name: &str| -> Result<f64, TraceError> {
            let raw = rec.get(i).unwrap_or("");
            raw.parse::<f64>()
                .map_err(|_| TraceError::Csv(format!("row {}: bad {name} value `{raw}`", line + 2)))
        };
        times.push(num(ti, "time_s")?);
        freqs.push(num(fi, "freq_hz")?);
    }
    FrequencyTrace::new(times, freqs)
}

pub fn write_annotations(a: &Annotations) -> String {
    let mut s = serde_json::to_string_pretty(a).expect("annotations serialize");
    s.push('\n');
    s
}

pub fn read_annotations(text: &str) -> Result<Annotations, TraceError> {
    serde_json::from_str(text).map_err(|e| TraceError::Annotation(e.to_string()))
}

/// Sidecar path for a trace file: `run.csv` → `run.annotations.json`.
pub fn sidecar_path(trace_path: &Path) -> PathBuf {
    trace_path.with_extension("annotations.json")
}
