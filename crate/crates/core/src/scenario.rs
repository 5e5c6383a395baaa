//! High-renewable scenarios built by displacing synchronous generation, and
//! penetration sweeps over them.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metrics::{compute_metrics, FrequencyMetrics, MetricsConfig, MetricsError};
use crate::model::{ModelError, RenewableKind, RenewableUnit, SystemCase, TripEvent};
use crate::simulator::ufls::{apply_ufls, UflsTable};
use crate::simulator::{simulate, SimConfig, SimError, SimOutput};

/// Wind share held fixed while PV varies.
pub const DEFAULT_WIND_PCT: f64 = 15.0;

const MW_EPS_REL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error(
        "infeasible scenario: {reason} (maximum feasible renewable share {max_feasible_pct:.2} %)"
    )]
    Infeasible {
        reason: String,
        max_feasible_pct: f64,
    },
    #[error("invalid scenario spec: {0}")]
    Spec(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "ids")]
pub enum DisplacementStrategy {
    /// Retire whole units in ascending `s_rated` (ties by id), then derate
    /// one marginal unit to balance exactly.
    RetireSmallestFirst,
    /// Scale every unit's output and rating by the same factor; `h` in
    /// seconds on the reduced base is preserved.
    ProportionalDerate,
    /// Retire in the given order, derating the marginal unit.
    PriorityList(Vec<String>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub wind_pct: f64,
    pub pv_pct: f64,
    pub displacement_strategy: DisplacementStrategy,
}

impl ScenarioSpec {
    pub fn new(wind_pct: f64, pv_pct: f64) -> Self {
        ScenarioSpec {
            wind_pct,
            pv_pct,
            displacement_strategy: DisplacementStrategy::RetireSmallestFirst,
        }
    }

    /// Total renewable level with wind held at `wind_pct`, PV making up the rest.
    pub fn level(total_pct: f64, wind_pct: f64) -> Self {
        if total_pct == 0.0 {
            ScenarioSpec::new(0.0, 0.0)
        } else {
            ScenarioSpec::new(wind_pct, total_pct - wind_pct)
        }
    }

    pub fn total_pct(&self) -> f64 {
        self.wind_pct + self.pv_pct
    }

    fn validate(&self) -> Result<(), ScenarioError> {
        if !(self.wind_pct >= 0.0 && self.pv_pct >= 0.0) {
            return Err(ScenarioError::Spec(format!(
                "shares must be non-negative (wind {}, pv {})",
                self.wind_pct, self.pv_pct
            )));
        }
        if !(self.total_pct() < 100.0) {
            return Err(ScenarioError::Spec(format!(
                "wind + pv must be below 100 % (got {})",
                self.total_pct()
            )));
        }
        Ok(())
    }
}

fn existing_mw(case: &SystemCase, kind: RenewableKind) -> f64 {
    case.renewables()
        .iter()
        .filter(|r| r.kind == kind)
        .map(|r| r.p_gen_mw)
        .sum()
}

/// Displace synchronous output with wind and PV so the case reaches the
/// requested shares. Load and total generation are unchanged and the system
/// base is pinned to the base case's so inertia stays comparable.
pub fn build_scenario(base: &SystemCase, spec: &ScenarioSpec) -> Result<SystemCase, ScenarioError> {
    spec.validate()?;
    let total = base.total_generation_mw();
    let sync = base.synchronous_generation_mw();
    let max_feasible_pct = 100.0 * (base.renewable_generation_mw() + sync) / total;
    let eps = MW_EPS_REL * total;

    let add_wind = spec.wind_pct / 100.0 * total - existing_mw(base, RenewableKind::WindDfig);
    let add_pv = spec.pv_pct / 100.0 * total - existing_mw(base, RenewableKind::Pv);
    if add_wind < -eps || add_pv < -eps {
        return Err(ScenarioError::Infeasible {
            reason: "requested share is below the renewables already in the case".into(),
            max_feasible_pct,
        });
    }
    let add_wind = add_wind.max(0.0);
    let add_pv = add_pv.max(0.0);
    let displaced = add_wind + add_pv;
    if displaced <= eps {
        return Ok(base.clone());
    }
    if displaced > sync - eps {
        return Err(ScenarioError::Infeasible {
            reason: format!("needs {displaced:.1} MW displaced, only {sync:.1} MW synchronous"),
            max_feasible_pct,
        });
    }

    let mut units = base.units().to_vec();
    match &spec.displacement_strategy {
        DisplacementStrategy::ProportionalDerate => {
            let k = 1.0 - displaced / sync;
            for u in &mut units {
                u.p_gen_mw *= k;
                u.s_rated_mva *= k;
            }
        }
        DisplacementStrategy::RetireSmallestFirst => {
            let mut order: Vec<usize> = (0..units.len()).collect();
            order.sort_by(|&a, &b| {
                units[a]
                    .s_rated_mva
                    .total_cmp(&units[b].s_rated_mva)
                    .then_with(|| units[a].id.cmp(&units[b].id))
            });
            units = retire_in_order(units, &order, displaced, eps).map_err(|short| {
                ScenarioError::Infeasible {
                    reason: format!("{short:.1} MW could not be displaced"),
                    max_feasible_pct,
                }
            })?;
        }
        DisplacementStrategy::PriorityList(ids) => {
            let mut order = Vec::with_capacity(ids.len());
            for id in ids {
                let i = units.iter().position(|u| &u.id == id).ok_or_else(|| {
                    ScenarioError::Spec(format!("priority list names unknown unit `{id}`"))
                })?;
                order.push(i);
            }
            let listed: f64 = order.iter().map(|&i| units[i].p_gen_mw).sum();
            units = retire_in_order(units, &order, displaced, eps).map_err(|_| {
                ScenarioError::Infeasible {
                    reason: format!("priority list covers only {listed:.1} MW"),
                    max_feasible_pct: 100.0 * (base.renewable_generation_mw() + listed) / total,
                }
            })?;
        }
    }

    let mut renewables = base.renewables().to_vec();
    for (kind, mw, stem) in [
        (RenewableKind::WindDfig, add_wind, "wind_scenario"),
        (RenewableKind::Pv, add_pv, "pv_scenario"),
    ] {
        if mw > eps {
            renewables.push(RenewableUnit {
                id: stem.to_string(),
                kind,
                p_gen_mw: mw,
            });
        }
    }
    Ok(base.with_parts(units, renewables, Some(base.s_base_mva()))?)
}

/// Remove units in `order` until `displaced` MW is gone; the last unit
/// touched is derated rather than retired, its rating scaled with its output. Returns the shortfall on failure.
fn retire_in_order(
    units: Vec<crate::model::SynchronousUnit>,
    order: &[usize],
    displaced: f64,
    eps: f64,
) -> Result<Vec<crate::model::SynchronousUnit>, f64> {
    let mut remaining = displaced;
    let mut retired = vec![false; units.len()];
    let mut units = units;
    for &i in order {
        if remaining <= eps {
            break;
        }
        let p = units[i].p_gen_mw;
        if p <= remaining + eps {
            retired[i] = true;
            remaining -= p;
        } else {
            let k = (p - remaining) / p;
            units[i].p_gen_mw = p - remaining;
            units[i].s_rated_mva *= k;
            remaining = 0.0;
        }
    }
    if remaining > eps {
        return Err(remaining);
    }
    Ok(units
        .into_iter()
        .zip(retired)
        .filter_map(|(u, r)| (!r).then_some(u))
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub enum SweepRowOutcome {
    Ok {
        metrics: FrequencyMetrics,
        output: Box<SimOutput>,
        /// 1-based UFLS stages whose pickup condition the trace satisfies.
        ufls_stages: Vec<usize>,
    },
    Infeasible(String),
    Failed(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub label: String,
    pub spec: ScenarioSpec,
    pub outcome: SweepRowOutcome,
}

impl SweepRow {
    pub fn metrics(&self) -> Option<&FrequencyMetrics> {
        match &self.outcome {
            SweepRowOutcome::Ok { metrics, .. } => Some(metrics),
            _ => None,
        }
    }

    /// Flag text for the sweep table.
    pub fn flags(&self) -> String {
        match &self.outcome {
            SweepRowOutcome::Ok { ufls_stages, .. } => ufls_stages
                .iter()
                .map(|s| format!("UFLS stage {s} would trigger"))
                .collect::<Vec<_>>()
                .join("; "),
            SweepRowOutcome::Infeasible(why) => format!("infeasible: {why}"),
            SweepRowOutcome::Failed(why) => format!("failed: {why}"),
        }
    }
}

/// Row label for a spec: `base` for no renewables, else `<total>%`.
pub fn level_label(spec: &ScenarioSpec) -> String {
    if spec.total_pct() == 0.0 {
        "base".to_string()
    } else {
        format!("{}%", crate::metrics::format_trimmed(spec.total_pct(), 2))
    }
}

#[derive(Debug, Error)]
enum RowError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

fn run_row(
    base: &SystemCase,
    spec: &ScenarioSpec,
    event: &TripEvent,
    cfg: &SimConfig,
    metrics_cfg: &MetricsConfig,
    flag_table: Option<&UflsTable>,
) -> SweepRowOutcome {
    let result = (|| -> Result<SweepRowOutcome, RowError> {
        let case = build_scenario(base, spec)?;
        let output = simulate(&case, event, cfg)?;
        let metrics = compute_metrics(&output.trace, output.trip.t_event_s, metrics_cfg)?;
        let mut ufls_stages: Vec<usize> = output
            .trace
            .annotations
            .ufls_trips
            .iter()
            .map(|a| a.stage)
            .collect();
        if let Some(table) = flag_table {
            for a in apply_ufls(&output.trace, table, case.p_load_mw()) {
                if !ufls_stages.contains(&a.stage) {
                    ufls_stages.push(a.stage);
                }
            }
        }
        ufls_stages.sort_unstable();
        Ok(SweepRowOutcome::Ok {
            metrics,
            output: Box::new(output),
            ufls_stages,
        })
    })();
    match result {
        Ok(o) => o,
        Err(RowError::Scenario(e)) => SweepRowOutcome::Infeasible(e.to_string()),
        Err(RowError::Sim(SimError::Event(e))) => SweepRowOutcome::Infeasible(e.to_string()),
        Err(e) => SweepRowOutcome::Failed(e.to_string()),
    }
}

/// Simulate each spec under the same event and config. Rows run in
/// parallel on the current rayon pool; output order follows `specs`.
pub fn penetration_sweep(
    base: &SystemCase,
    specs: &[ScenarioSpec],
    event: &TripEvent,
    cfg: &SimConfig,
    metrics_cfg: &MetricsConfig,
    flag_table: Option<&UflsTable>,
) -> Vec<SweepRow> {
    specs
        .par_iter()
        .map(|spec| SweepRow {
            label: level_label(spec),
            spec: spec.clone(),
            outcome: run_row(base, spec, event, cfg, metrics_cfg, flag_table),
        })
        .collect()
}

/// Sweep table CSV: `label,rocof_mhz_per_s,nadir_hz,settling_time_s,settling_freq_hz,ufls_flags`.
pub fn write_sweep_csv(rows: &[SweepRow]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "label",
        "rocof_mhz_per_s",
        "nadir_hz",
        "settling_time_s",
        "settling_freq_hz",
        "ufls_flags",
    ])
    .expect("in-memory write");
    for r in rows {
        let cells = match r.metrics() {
            Some(m) => [
                format!("{:.3}", m.rocof_mhz_per_s),
                format!("{:.5}", m.nadir_hz),
                format!("{:.2}", m.settling_time_s),
                format!("{:.5}", m.settling_freq_hz),
            ],
            None => Default::default(),
        };
        w.write_record([
            r.label.as_str(),
            &cells[0],
            &cells[1],
            &cells[2],
            &cells[3],
            &r.flags(),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("utf8")
}
