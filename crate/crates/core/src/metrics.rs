//! Frequency-response metrics: ROCOF, nadir, settling time and settling
//! frequency, plus metric comparison and tabular reports.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::trace::FrequencyTrace;

/// Default event-detection trigger.
pub const DEFAULT_TRIGGER_MHZ_PER_S: f64 = 10.0;

/// Sliding window used by event detection.
pub const DETECTION_WINDOW_S: f64 = 0.5;

const TIME_EPS: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("no samples at or after the event time {t_event_s} s")]
    NoPostEvent { t_event_s: f64 },
    #[error("trace too short: need {needed_s} s after the event, have {have_s} s")]
    TooShort { needed_s: f64, have_s: f64 },
    #[error("fewer than two samples in the ROCOF window")]
    SparseWindow,
    #[error("invalid metrics config: {0}")]
    Config(String),
    #[error("sample spacing {0} s exceeds 0.1 s")]
    Spacing(f64),
    #[error("no event detected")]
    NoEvent,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricsConfig {
    /// Least-squares ROCOF window, offsets after the event in seconds.
    pub rocof_window_s: (f64, f64),
    pub settle_band_mhz: f64,
    /// Tail over which the settling frequency is averaged.
    pub settle_tail_s: f64,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        MetricsConfig {
            rocof_window_s: (0.0, 0.5),
            settle_band_mhz: 5.0,
            settle_tail_s: 5.0,
        }
    }
}

impl MetricsConfig {
    pub fn validate(&self) -> Result<(), MetricsError> {
        let (a, b) = self.rocof_window_s;
        if !(a >= 0.0 && b > a) {
            return Err(MetricsError::Config(format!(
                "rocof window must satisfy 0 <= start < end (got {a}, {b})"
            )));
        }
        if !(self.settle_band_mhz > 0.0) || !(self.settle_tail_s > 0.0) {
            return Err(MetricsError::Config(
                "settle band and tail must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrequencyMetrics {
    /// Magnitude of the initial decline rate.
    pub rocof_mhz_per_s: f64,
    pub nadir_hz: f64,
    /// From the event until the trace stays inside the settle band.
    pub settling_time_s: f64,
    pub settling_freq_hz: f64,
}

/// Absolute per-metric differences, in Hz, mHz/s, s, Hz.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricsDelta {
    pub nadir_hz: f64,
    pub rocof_mhz_per_s: f64,
    pub settling_time_s: f64,
    pub settling_freq_hz: f64,
}

impl MetricsDelta {
    pub fn is_finite(&self) -> bool {
        [
            self.nadir_hz,
            self.rocof_mhz_per_s,
            self.settling_time_s,
            self.settling_freq_hz,
        ]
        .iter()
        .all(|x| x.is_finite())
    }

    /// Sum of each difference divided by its tolerance.
    pub fn normalized(&self, tol: &MetricsTolerance) -> f64 {
        self.nadir_hz / tol.nadir_hz
            + self.rocof_mhz_per_s / tol.rocof_mhz_per_s
            + self.settling_time_s / tol.settling_time_s
            + self.settling_freq_hz / tol.settling_freq_hz
    }
}

/// Per-metric acceptance thresholds. The default is the five-event
/// average difference between measurement and the validated model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricsTolerance {
    pub nadir_hz: f64,
    pub rocof_mhz_per_s: f64,
    pub settling_time_s: f64,
    pub settling_freq_hz: f64,
}

impl Default for MetricsTolerance {
    fn default() -> Self {
        MetricsTolerance {
            nadir_hz: 0.005,
            rocof_mhz_per_s: 4.2,
            settling_time_s: 1.4,
            settling_freq_hz: 0.006,
        }
    }
}

impl MetricsTolerance {
    pub fn scaled(&self, k: f64) -> Self {
        MetricsTolerance {
            nadir_hz: self.nadir_hz * k,
            rocof_mhz_per_s: self.rocof_mhz_per_s * k,
            settling_time_s: self.settling_time_s * k,
            settling_freq_hz: self.settling_freq_hz * k,
        }
    }

    pub fn admits(&self, d: &MetricsDelta) -> bool {
        d.nadir_hz <= self.nadir_hz
            && d.rocof_mhz_per_s <= self.rocof_mhz_per_s
            && d.settling_time_s <= self.settling_time_s
            && d.settling_freq_hz <= self.settling_freq_hz
    }
}

/// Least-squares slope of `(t, f)` pairs, or `None` with < 2 distinct times.
pub(crate) fn ls_slope(t: &[f64], f: &[f64]) -> Option<f64> {
    let n = t.len();
    if n < 2 {
        return None;
    }
    let t_ref = t[0];
    let nf = n as f64;
    let tm = t.iter().map(|x| x - t_ref).sum::<f64>() / nf;
    let fm = f.iter().sum::<f64>() / nf;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    for (x, y) in t.iter().zip(f) {
        let dx = x - t_ref - tm;
        sxy += dx * (y - fm);
        sxx += dx * dx;
    }
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Time-weighted mean of the linear interpolant over `[a, b]`.
fn trapezoid_mean(trace: &FrequencyTrace, a: f64, b: f64) -> f64 {
    let ts = trace.times();
    let fs = trace.freqs();
    let f_ref = trace.interpolate(a);
    let mut area = 0.0;
    let mut prev_t = a;
    let mut prev_d = 0.0;
    let start = ts.partition_point(|&t| t <= a);
    for i in start..ts.len() {
        if ts[i] >= b {
            break;
        }
        let d = fs[i] - f_ref;
        area += 0.5 * (prev_d + d) * (ts[i] - prev_t);
        prev_t = ts[i];
        prev_d = d;
    }
    let db = trace.interpolate(b) - f_ref;
    area += 0.5 * (prev_d + db) * (b - prev_t);
    if b > a {
        f_ref + area / (b - a)
    } else {
        f_ref + db
    }
}

pub fn compute_metrics(
    trace: &FrequencyTrace,
    t_event: f64,
    cfg: &MetricsConfig,
) -> Result<FrequencyMetrics, MetricsError> {
    cfg.validate()?;
    let ts = trace.times();
    let fs = trace.freqs();
    let first = ts.partition_point(|&t| t < t_event - TIME_EPS);
    if first >= ts.len() {
        return Err(MetricsError::NoPostEvent { t_event_s: t_event });
    }
    let t_last = ts[ts.len() - 1];
    let needed = cfg.rocof_window_s.1.max(cfg.settle_tail_s);
    let have = t_last - t_event;
    if have < needed - TIME_EPS {
        return Err(MetricsError::TooShort {
            needed_s: needed,
            have_s: have,
        });
    }

    let (w0, w1) = (
        t_event + cfg.rocof_window_s.0,
        t_event + cfg.rocof_window_s.1,
    );
    let lo = ts.partition_point(|&t| t < w0 - TIME_EPS);
    let hi = ts.partition_point(|&t| t <= w1 + TIME_EPS);
    let slope = ls_slope(&ts[lo..hi], &fs[lo..hi]).ok_or(MetricsError::SparseWindow)?;
    let rocof_mhz_per_s = (slope * 1000.0).abs();

    let mut nadir_idx = first;
    for i in first..ts.len() {
        if fs[i] < fs[nadir_idx] {
            nadir_idx = i;
        }
    }
    let nadir_hz = fs[nadir_idx];

    let settling_freq_hz = trapezoid_mean(trace, t_last - cfg.settle_tail_s, t_last);

    let band = cfg.settle_band_mhz / 1000.0;
    let mut settle_idx = nadir_idx;
    for i in (nadir_idx..ts.len()).rev() {
        if (fs[i] - settling_freq_hz).abs() > band {
            settle_idx = (i + 1).min(ts.len() - 1);
            break;
        }
    }
    let settling_time_s = (ts[settle_idx] - t_event).max(0.0);

    Ok(FrequencyMetrics {
        rocof_mhz_per_s,
        nadir_hz,
        settling_time_s,
        settling_freq_hz,
    })
}

pub fn compare_metrics(a: &FrequencyMetrics, b: &FrequencyMetrics) -> MetricsDelta {
    MetricsDelta {
        nadir_hz: (a.nadir_hz - b.nadir_hz).abs(),
        rocof_mhz_per_s: (a.rocof_mhz_per_s - b.rocof_mhz_per_s).abs(),
        settling_time_s: (a.settling_time_s - b.settling_time_s).abs(),
        settling_freq_hz: (a.settling_freq_hz - b.settling_freq_hz).abs(),
    }
}

pub fn average_delta(deltas: &[MetricsDelta]) -> MetricsDelta {
    let n = deltas.len().max(1) as f64;
    let mut acc = MetricsDelta::default();
    for d in deltas {
        acc.nadir_hz += d.nadir_hz;
        acc.rocof_mhz_per_s += d.rocof_mhz_per_s;
        acc.settling_time_s += d.settling_time_s;
        acc.settling_freq_hz += d.settling_freq_hz;
    }
    MetricsDelta {
        nadir_hz: acc.nadir_hz / n,
        rocof_mhz_per_s: acc.rocof_mhz_per_s / n,
        settling_time_s: acc.settling_time_s / n,
        settling_freq_hz: acc.settling_freq_hz / n,
    }
}

/// Earliest disturbance onset in an unannotated trace.
///
/// A trailing 0.5 s least-squares slope is scanned forward; on the first
/// window whose slope exceeds `trigger_mhz_per_s`, the onset is placed at
/// the breakpoint of the best continuous hinge (flat, then linear) fitted to
/// that window.
pub fn detect_event_time(
    trace: &FrequencyTrace,
    trigger_mhz_per_s: f64,
) -> Result<f64, MetricsError> {
    let ts = trace.times();
    let fs = trace.freqs();
    if let Some(gap) = ts
        .windows(2)
        .map(|w| w[1] - w[0])
        .find(|g| *g > 0.1 + TIME_EPS)
    {
        return Err(MetricsError::Spacing(gap));
    }
    let trigger = trigger_mhz_per_s / 1000.0;
    let mut lo = 0;
    for hi in 0..ts.len() {
        while ts[hi] - ts[lo] > DETECTION_WINDOW_S + TIME_EPS {
            lo += 1;
        }
        if ts[hi] - ts[0] < DETECTION_WINDOW_S - TIME_EPS || hi - lo < 2 {
            continue;
        }
        let slope = match ls_slope(&ts[lo..=hi], &fs[lo..=hi]) {
            Some(s) => s,
            None => continue,
        };
        if slope.abs() > trigger {
            return Ok(hinge_onset(&ts[lo..=hi], &fs[lo..=hi]));
        }
    }
    Err(MetricsError::NoEvent)
}

fn hinge_onset(t: &[f64], f: &[f64]) -> f64 {
    let mut best = (f64::INFINITY, t[0]);
    for k in 0..t.len() - 1 {
        let tau = t[k];
        let h: Vec<f64> = t.iter().map(|x| (x - tau).max(0.0)).collect();
        let n = t.len() as f64;
        let hm = h.iter().sum::<f64>() / n;
        let fm = f.iter().sum::<f64>() / n;
        let mut shh = 0.0;
        let mut shf = 0.0;
        for (hi, fi) in h.iter().zip(f) {
            shh += (hi - hm) * (hi - hm);
            shf += (hi - hm) * (fi - fm);
        }
        let m = if shh > 0.0 { shf / shh } else { 0.0 };
        let c = fm - m * hm;
        let sse: f64 = h
            .iter()
            .zip(f)
            .map(|(hi, fi)| (fi - c - m * hi).powi(2))
            .sum();
        if sse < best.0 {
            best = (sse, tau);
        }
    }
    best.1
}

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

/// Fixed decimals with trailing zeros dropped: `0.010` → `0.01`, `7.0` → `7`.
pub fn format_trimmed(x: f64, decimals: usize) -> String {
    let s = format!("{:.*}", decimals, x);
    let s = if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    };
    if s == "-0" {
        "0".into()
    } else {
        s
    }
}

const LABELS: [&str; 4] = [
    "Frequency nadir (Hz)",
    "Rate of change of frequency (mHz/s)",
    "Frequency settling time (s)",
    "Settling frequency (Hz)",
];
const DECIMALS: [usize; 4] = [3, 1, 1, 3];

fn metric_cells(m: &FrequencyMetrics) -> [String; 4] {
    [
        format_trimmed(m.nadir_hz, DECIMALS[0]),
        format_trimmed(m.rocof_mhz_per_s, DECIMALS[1]),
        format_trimmed(m.settling_time_s, DECIMALS[2]),
        format_trimmed(m.settling_freq_hz, DECIMALS[3]),
    ]
}

fn delta_cells(d: &MetricsDelta) -> [String; 4] {
    [
        format_trimmed(d.nadir_hz, DECIMALS[0]),
        format_trimmed(d.rocof_mhz_per_s, DECIMALS[1]),
        format_trimmed(d.settling_time_s, DECIMALS[2]),
        format_trimmed(d.settling_freq_hz, DECIMALS[3]),
    ]
}

/// Difference column as printed in comparison reports.
pub fn difference_column(d: &MetricsDelta) -> [String; 4] {
    delta_cells(d)
}

/// Measurement vs simulation side by side with their differences.
pub fn format_comparison(measured: &FrequencyMetrics, simulated: &FrequencyMetrics) -> String {
    let d = compare_metrics(measured, simulated);
    let (mc, sc, dc) = (
        metric_cells(measured),
        metric_cells(simulated),
        delta_cells(&d),
    );
    let w = LABELS.iter().map(|l| l.len()).max().unwrap_or(0);
    let mut out = format!(
        "{:<w$}  {:>12}  {:>12}  {:>10}\n",
        "Metric", "Measurement", "Simulation", "Difference"
    );
    for i in 0..4 {
        out.push_str(&format!(
            "{:<w$}  {:>12}  {:>12}  {:>10}\n",
            LABELS[i], mc[i], sc[i], dc[i]
        ));
    }
    out
}

/// Per-case differences followed by their average row.
pub fn format_average_table(deltas: &[MetricsDelta]) -> String {
    let header = ["Cases", LABELS[0], LABELS[1], LABELS[2], LABELS[3]];
    let mut rows: Vec<[String; 5]> = deltas
        .iter()
        .enumerate()
        .map(|(i, d)| {
            let c = delta_cells(d);
            [
                (i + 1).to_string(),
                c[0].clone(),
                c[1].clone(),
                c[2].clone(),
                c[3].clone(),
            ]
        })
        .collect();
    let avg = delta_cells(&average_delta(deltas));
    rows.push([
        "Average".into(),
        avg[0].clone(),
        avg[1].clone(),
        avg[2].clone(),
        avg[3].clone(),
    ]);
    let widths: Vec<usize> = (0..5)
        .map(|j| {
            rows.iter()
                .map(|r| r[j].len())
                .chain(std::iter::once(header[j].len()))
                .max()
                .unwrap_or(0)
        })
        .collect();
    let mut out = String::new();
    let line = |cells: &[&str]| {
        let mut s = format!("{:<w$}", cells[0], w = widths[0]);
        for j in 1..5 {
            s.push_str(&format!("  {:>w$}", cells[j], w = widths[j]));
        }
        s.push('\n');
        s
    };
    out.push_str(&line(&header));
    for r in &rows {
        let cells: Vec<&str> = r.iter().map(String::as_str).collect();
        out.push_str(&line(&cells));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp_then_flat(t0: f64, dt: f64, t_end: f64) -> FrequencyTrace {
        let n = (t_end / dt).round() as usize;
        let samples: Vec<(f64, f64)> = (0..=n)
            .map(|k| {
                let t = k as f64 * dt;
                let f = if t <= t0 {
                    60.0
                } else {
                    (60.0 - 0.6 * (t - t0)).max(59.7)
                };
                (t, f)
            })
            .collect();
        FrequencyTrace::from_samples(&samples).unwrap()
    }

    #[test]
    fn piecewise_linear_decline() {
        let tr = ramp_then_flat(1.0, 0.01, 20.0);
        let m = compute_metrics(&tr, 1.0, &MetricsConfig::default()).unwrap();
        assert!(
            (m.rocof_mhz_per_s - 600.0).abs() < 1e-6,
            "{}",
            m.rocof_mhz_per_s
        );
        assert!((m.nadir_hz - 59.7).abs() < 1e-12);
        assert!((m.settling_freq_hz - 59.7).abs() < 1e-12);
        // leaves the 5 mHz band at 59.705, i.e. 0.49 s after the event
        assert!(
            (m.settling_time_s - 0.5).abs() < 0.011,
            "{}",
            m.settling_time_s
        );
    }

    #[test]
    fn flat_trace() {
        let samples: Vec<(f64, f64)> = (0..=1000).map(|k| (k as f64 * 0.01, 60.0)).collect();
        let tr = FrequencyTrace::from_samples(&samples).unwrap();
        let m = compute_metrics(&tr, 1.0, &MetricsConfig::default()).unwrap();
        assert_eq!(m.rocof_mhz_per_s, 0.0);
        assert_eq!(m.nadir_hz, 60.0);
        assert_eq!(m.settling_time_s, 0.0);
        assert_eq!(m.settling_freq_hz, 60.0);
    }

    #[test]
    fn short_and_empty_traces() {
        let tr = ramp_then_flat(1.0, 0.01, 3.0);
        assert!(matches!(
            compute_metrics(&tr, 1.0, &MetricsConfig::default()),
            Err(MetricsError::TooShort { .. })
        ));
        assert!(matches!(
            compute_metrics(&tr, 10.0, &MetricsConfig::default()),
            Err(MetricsError::NoPostEvent { .. })
        ));
        let bad = MetricsConfig {
            rocof_window_s: (0.5, 0.1),
            ..MetricsConfig::default()
        };
        assert!(matches!(
            compute_metrics(&tr, 1.0, &bad),
            Err(MetricsError::Config(_))
        ));
    }

    #[test]
    fn irregular_sampling_mean_is_time_weighted() {
        // 59.9 for the first 4 s of the tail, 60.0 for the last 1 s, sampled unevenly
        let tr = FrequencyTrace::from_samples(&[
            (0.0, 60.0),
            (0.3, 59.9),
            (1.0, 59.9),
            (5.0, 59.9),
            (5.0 + 1e-6, 60.0),
            (5.5, 60.0),
            (6.0, 60.0),
        ])
        .unwrap();
        let cfg = MetricsConfig {
            settle_tail_s: 5.0,
            ..MetricsConfig::default()
        };
        let m = compute_metrics(&tr, 0.0, &cfg).unwrap();
        assert!(
            (m.settling_freq_hz - 59.92).abs() < 1e-6,
            "{}",
            m.settling_freq_hz
        );
    }

    #[test]
    fn comparison_reproduces_difference_column() {
        let meas = FrequencyMetrics {
            nadir_hz: 59.902,
            rocof_mhz_per_s: 23.0,
            settling_time_s: 21.0,
            settling_freq_hz: 59.932,
        };
        let sim = FrequencyMetrics {
            nadir_hz: 59.903,
            rocof_mhz_per_s: 30.0,
            settling_time_s: 23.0,
            settling_freq_hz: 59.935,
        };
        let d = compare_metrics(&meas, &sim);
        assert_eq!(difference_column(&d), ["0.001", "7", "2", "0.003"]);
        assert_eq!(compare_metrics(&meas, &meas), MetricsDelta::default());
        let report = format_comparison(&meas, &sim);
        assert!(report.lines().nth(1).unwrap().ends_with("0.001"));
        assert!(report.contains("59.935"));
    }

    #[test]
    fn trimmed_formatting() {
        assert_eq!(format_trimmed(0.010, 3), "0.01");
        assert_eq!(format_trimmed(7.0, 1), "7");
        assert_eq!(format_trimmed(0.0052, 3), "0.005");
        assert_eq!(format_trimmed(0.0058, 3), "0.006");
        assert_eq!(format_trimmed(-0.0001, 3), "0");
    }

    #[test]
    fn detects_step_onset() {
        for dt in [0.1, 0.01] {
            let n = (30.0 / dt) as usize;
            let samples: Vec<(f64, f64)> = (0..=n)
                .map(|k| {
                    let t = k as f64 * dt;
                    (t, 60.0 - 0.1 * (t - 12.0).max(0.0))
                })
                .collect();
            let tr = FrequencyTrace::from_samples(&samples).unwrap();
            let t = detect_event_time(&tr, DEFAULT_TRIGGER_MHZ_PER_S).unwrap();
            assert!((t - 12.0).abs() <= dt + 1e-9, "dt {dt}: {t}");
        }
    }

    #[test]
    fn flat_trace_has_no_event() {
        let samples: Vec<(f64, f64)> = (0..=100).map(|k| (k as f64 * 0.1, 60.0)).collect();
        let tr = FrequencyTrace::from_samples(&samples).unwrap();
        assert_eq!(detect_event_time(&tr, 10.0), Err(MetricsError::NoEvent));
    }

    #[test]
    fn coarse_sampling_rejected() {
        let tr = FrequencyTrace::from_samples(&[(0.0, 60.0), (0.5, 60.0), (1.0, 59.0)]).unwrap();
        assert!(matches!(
            detect_event_time(&tr, 10.0),
            Err(MetricsError::Spacing(_))
        ));
    }
}
