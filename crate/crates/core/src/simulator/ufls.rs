//! Staged under-frequency load shedding relay.

use serde::{Deserialize, Serialize};

use crate::trace::{FrequencyTrace, UflsTripAnnotation};

/// First under-frequency load shedding stage threshold used for flags.
pub const FIRST_STAGE_HZ: f64 = 59.3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UflsStage {
    pub threshold_hz: f64,
    /// Fraction of the then-current load, in (0, 1].
    pub shed_fraction: f64,
    #[serde(default)]
    pub delay_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UflsTable {
    pub stages: Vec<UflsStage>,
}

impl UflsTable {
    /// Single stage at 59.3 Hz shedding 5 % with no intentional delay.
    pub fn first_stage() -> Self {
        UflsTable {
            stages: vec![UflsStage {
                threshold_hz: FIRST_STAGE_HZ,
                shed_fraction: 0.05,
                delay_s: 0.0,
            }],
        }
    }

    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        for (i, s) in self.stages.iter().enumerate() {
            let n = i + 1;
            if !(s.shed_fraction > 0.0 && s.shed_fraction <= 1.0) {
                out.push(format!("UFLS stage {n}: shed_fraction must be in (0, 1]"));
            }
            if !(s.delay_s >= 0.0) {
                out.push(format!("UFLS stage {n}: delay_s must be non-negative"));
            }
            if !(s.threshold_hz > 0.0) {
                out.push(format!("UFLS stage {n}: threshold must be positive"));
            }
            if i > 0 && !(s.threshold_hz < self.stages[i - 1].threshold_hz) {
                out.push(format!("UFLS stage {n}: thresholds must strictly decrease"));
            }
        }
        out
    }
}

/// Online relay state. Feed it each new sample; it reports stages that
/// pick up on that sample.
#[derive(Debug, Clone)]
pub struct UflsMonitor {
    stages: Vec<UflsStage>,
    below_since: Vec<Option<f64>>,
    tripped: Vec<bool>,
}

impl UflsMonitor {
    pub fn new(table: &UflsTable) -> Self {
        let n = table.stages.len();
        UflsMonitor {
            stages: table.stages.clone(),
            below_since: vec![None; n],
            tripped: vec![false; n],
        }
    }

    /// Zero-based indices of stages tripping at `(t, f)`.
    pub fn observe(&mut self, t: f64, f: f64) -> Vec<usize> {
        let mut fired = Vec::new();
        for (i, stage) in self.stages.iter().enumerate() {
            if self.tripped[i] {
                continue;
            }
            if f < stage.threshold_hz {
                let since = *self.below_since[i].get_or_insert(t);
                if t - since >= stage.delay_s - 1e-9 {
                    self.tripped[i] = true;
                    fired.push(i);
                }
            } else {
                self.below_since[i] = None;
            }
        }
        fired
    }

    pub fn stage(&self, i: usize) -> &UflsStage {
        &self.stages[i]
    }
}

/// Replay a finished trace through the relay without feedback, returning
/// the shedding actions it would have taken from `load_mw`.
pub fn apply_ufls(
    trace: &FrequencyTrace,
    table: &UflsTable,
    load_mw: f64,
) -> Vec<UflsTripAnnotation> {
    let mut monitor = UflsMonitor::new(table);
    let mut load = load_mw;
    let mut actions = Vec::new();
    for (t, f) in trace.samples() {
        for i in monitor.observe(t, f) {
            let stage = monitor.stage(i);
            let shed = stage.shed_fraction * load;
            load -= shed;
            actions.push(UflsTripAnnotation {
                stage: i + 1,
                t_s: t,
                threshold_hz: stage.threshold_hz,
                shed_mw: shed,
            });
        }
    }
    actions
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dip(nadir: f64, below_for: f64) -> FrequencyTrace {
        // V-shaped dip reaching `nadir`, spending `below_for` seconds under 59.3
        let dt = 0.01;
        let n = 2000;
        let mut samples = Vec::with_capacity(n);
        let half = below_for / 2.0;
        let slope = (59.3 - nadir) / half.max(1e-6);
        for k in 0..n {
            let t = k as f64 * dt;
            let d = (t - 10.0).abs();
            let f = if below_for > 0.0 {
                (nadir + slope * d).min(60.0)
            } else {
                nadir.max(60.0 - d)
            };
            samples.push((t, f));
        }
        FrequencyTrace::from_samples(&samples).unwrap()
    }

    #[test]
    fn deep_nadir_trips_first_stage() {
        let table = UflsTable {
            stages: vec![UflsStage {
                threshold_hz: 59.3,
                shed_fraction: 0.05,
                delay_s: 0.0,
            }],
        };
        let acts = apply_ufls(&dip(59.26, 1.0), &table, 1000.0);
        assert_eq!(acts.len(), 1);
        assert_eq!(acts[0].stage, 1);
        assert!((acts[0].shed_mw - 50.0).abs() < 1e-9);
    }

    #[test]
    fn shallow_nadir_does_not_trip() {
        let table = UflsTable::first_stage();
        let tr = FrequencyTrace::from_samples(&[(0.0, 60.0), (1.0, 59.44), (2.0, 59.55)]).unwrap();
        assert!(apply_ufls(&tr, &table, 1000.0).is_empty());
    }

    #[test]
    fn short_excursion_does_not_satisfy_delay() {
        let table = UflsTable {
            stages: vec![UflsStage {
                threshold_hz: 59.3,
                shed_fraction: 0.05,
                delay_s: 0.5,
            }],
        };
        assert!(apply_ufls(&dip(59.2, 0.2), &table, 1000.0).is_empty());
        assert_eq!(apply_ufls(&dip(59.2, 0.8), &table, 1000.0).len(), 1);
    }

    #[test]
    fn each_stage_trips_once_on_current_load() {
        let table = UflsTable {
            stages: vec![
                UflsStage {
                    threshold_hz: 59.3,
                    shed_fraction: 0.1,
                    delay_s: 0.0,
                },
                UflsStage {
                    threshold_hz: 59.0,
                    shed_fraction: 0.1,
                    delay_s: 0.0,
                },
            ],
        };
        let tr =
            FrequencyTrace::from_samples(&[(0.0, 60.0), (1.0, 59.2), (2.0, 59.5), (3.0, 58.9)])
                .unwrap();
        let acts = apply_ufls(&tr, &table, 1000.0);
        assert_eq!(acts.len(), 2);
        assert_eq!((acts[0].stage, acts[0].t_s), (1, 1.0));
        assert_eq!((acts[1].stage, acts[1].t_s), (2, 3.0));
        assert!((acts[1].shed_mw - 90.0).abs() < 1e-9);
    }

    #[test]
    fn thresholds_must_decrease() {
        let table = UflsTable {
            stages: vec![
                UflsStage {
                    threshold_hz: 59.0,
                    shed_fraction: 0.1,
                    delay_s: 0.0,
                },
                UflsStage {
                    threshold_hz: 59.3,
                    shed_fraction: 1.5,
                    delay_s: 0.0,
                },
            ],
        };
        assert_eq!(table.violations().len(), 2);
    }
}
