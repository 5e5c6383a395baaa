//! Center-of-inertia frequency simulation.
//!
//! One aggregate swing equation on the system base,
//!
//! ```text
//! 2·H_sys·dΔω/dt = ΔPm_total − ΔP_event + ΔP_shed − D·(P_load/S_base)·Δω
//! ```
//!
//! with `ΔPm_total` summed over responsive TGOV1 units scaled by
//! `s_rated/s_base`. Non-responsive units and renewables hold their output.
//! Integration is fixed-step RK4; a step is split when the trip falls
//! inside it so the disturbance lands exactly on `t_event`.

pub mod rk4;
pub mod ufls;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::governor::{tgov1_init, tgov1_step_output, GovernorError, GovernorState, Tgov1Params};
use crate::metrics::{compute_metrics, FrequencyMetrics, MetricsConfig, MetricsError};
use crate::model::{ModelError, ResolvedTrip, SystemCase, TripEvent};
use crate::trace::{EventAnnotation, FrequencyTrace, PmColumn, UflsTripAnnotation};

use self::rk4::Rk4;
use self::ufls::{UflsMonitor, UflsTable};

/// Collapse threshold as a fraction of nominal (55 Hz on a 60 Hz system).
pub const COLLAPSE_FRACTION: f64 = 55.0 / 60.0;

pub const MAX_DT_S: f64 = 0.1;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid simulation config: {}", .0.join("; "))]
    Config(Vec<String>),
    #[error(transparent)]
    Event(#[from] ModelError),
    #[error("unit `{unit}`: {source}")]
    GovernorInit {
        unit: String,
        #[source]
        source: GovernorError,
    },
    #[error("frequency collapse: {f_hz:.3} Hz at t = {t_s:.3} s (below {limit_hz:.3} Hz)")]
    Collapse { t_s: f64, f_hz: f64, limit_hz: f64 },
    #[error("integration diverged at step {step} (t = {t_s:.4} s)")]
    Diverged { step: usize, t_s: f64 },
    #[error("no synchronous inertia remains after the trip")]
    NoInertia,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub dt_s: f64,
    pub t_end_s: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ufls: Option<UflsTable>,
    #[serde(default)]
    pub record_per_unit: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            dt_s: 0.01,
            t_end_s: 60.0,
            ufls: None,
            record_per_unit: false,
        }
    }
}

impl SimConfig {
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !(self.dt_s > 0.0 && self.dt_s <= MAX_DT_S) {
            out.push(format!(
                "dt_s must be in (0, {MAX_DT_S}] (got {})",
                self.dt_s
            ));
        }
        if !(self.t_end_s > 0.0 && self.t_end_s.is_finite()) {
            out.push("t_end_s must be positive".to_string());
        }
        if let Some(t) = &self.ufls {
            out.extend(t.violations());
        }
        out
    }

    fn n_steps(&self) -> usize {
        let ratio = self.t_end_s / self.dt_s;
        let r = ratio.round();
        if (ratio - r).abs() < 1e-9 * ratio.max(1.0) {
            r as usize
        } else {
            ratio.ceil() as usize
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimOutput {
    pub trace: FrequencyTrace,
    /// Mechanical power per synchronous unit (pu machine base), when
    /// `record_per_unit` is set.
    pub pm: Vec<PmColumn>,
    /// Some responsive valve sat on a limit after the event.
    pub valve_limited: bool,
    pub trip: ResolvedTrip,
}

struct Governed {
    unit: usize,
    params: Tgov1Params,
    p_ref: f64,
    pm0: f64,
    base: f64,
}

struct Plant {
    f0: f64,
    s_base: f64,
    p_load_mw: f64,
    d_load: f64,
    ke_total: f64,
    units_ke: Vec<f64>,
    governed: Vec<Governed>,
}

/// Per-substep constants: which disturbance and shedding are in force.
#[derive(Clone, Copy)]
struct Phase {
    deficit_pu: f64,
    tripped: Option<usize>,
    shed_mw: f64,
}

impl Plant {
    fn build(case: &SystemCase) -> Result<(Plant, Vec<f64>), SimError> {
        let s_base = case.s_base_mva();
        let mut governed = Vec::new();
        let mut y = vec![0.0];
        for (i, u) in case.units().iter().enumerate() {
            if !u.responsive {
                continue;
            }
            let params = u
                .governor
                .expect("validated: responsive units have governors");
            let p0 = u.loading_pu();
            let st = tgov1_init(&params, p0).map_err(|source| SimError::GovernorInit {
                unit: u.id.clone(),
                source,
            })?;
            let pm0 = tgov1_step_output(&st, &params, p0, 0.0).p_mech;
            y.push(st.v);
            y.push(st.x_ll);
            governed.push(Governed {
                unit: i,
                params,
                p_ref: p0,
                pm0,
                base: u.s_rated_mva / s_base,
            });
        }
        let units_ke: Vec<f64> = case
            .units()
            .iter()
            .map(|u| u.kinetic_energy_mws())
            .collect();
        Ok((
            Plant {
                f0: case.f0_hz(),
                s_base,
                p_load_mw: case.p_load_mw(),
                d_load: case.d_load(),
                ke_total: units_ke.iter().sum(),
                units_ke,
                governed,
            },
            y,
        ))
    }

    fn h_sys(&self, phase: &Phase) -> f64 {
        let lost = phase.tripped.map_or(0.0, |i| self.units_ke[i]);
        (self.ke_total - lost) / self.s_base
    }

    fn derivatives(&self, phase: &Phase, y: &[f64], dy: &mut [f64]) {
        let dw = y[0];
        let mut dpm = 0.0;
        for (j, g) in self.governed.iter().enumerate() {
            let st = GovernorState {
                v: y[1 + 2 * j],
                x_ll: y[2 + 2 * j],
            };
            if phase.tripped == Some(g.unit) {
                dy[1 + 2 * j] = 0.0;
                dy[2 + 2 * j] = 0.0;
                continue;
            }
            let out = tgov1_step_output(&st, &g.params, g.p_ref, dw);
            dy[1 + 2 * j] = out.dv_dt;
            dy[2 + 2 * j] = out.dx_ll_dt;
            dpm += (out.p_mech - g.pm0) * g.base;
        }
        let load_pu = (self.p_load_mw - phase.shed_mw) / self.s_base;
        let shed_pu = phase.shed_mw / self.s_base;
        let accel = dpm - phase.deficit_pu + shed_pu - self.d_load * load_pu * dw;
        dy[0] = accel / (2.0 * self.h_sys(phase));
    }

    fn clamp_valves(&self, y: &mut [f64]) -> bool {
        let mut at_limit = false;
        for (j, g) in self.governed.iter().enumerate() {
            let v = &mut y[1 + 2 * j];
            *v = v.clamp(g.params.v_min, g.params.v_max);
            if *v <= g.params.v_min || *v >= g.params.v_max {
                at_limit = true;
            }
        }
        at_limit
    }

    fn unit_pm(&self, case: &SystemCase, phase: &Phase, y: &[f64]) -> Vec<f64> {
        let mut pm: Vec<f64> = case.units().iter().map(|u| u.loading_pu()).collect();
        for (j, g) in self.governed.iter().enumerate() {
            let st = GovernorState {
                v: y[1 + 2 * j],
                x_ll: y[2 + 2 * j],
            };
            pm[g.unit] = tgov1_step_output(&st, &g.params, g.p_ref, y[0]).p_mech;
        }
        if let Some(i) = phase.tripped {
            pm[i] = 0.0;
        }
        pm
    }
}

/// Run one trip simulation. A trip at or beyond the horizon is never
/// applied and yields a flat trace.
pub fn simulate(
    case: &SystemCase,
    event: &TripEvent,
    cfg: &SimConfig,
) -> Result<SimOutput, SimError> {
    let problems = cfg.violations();
    if !problems.is_empty() {
        return Err(SimError::Config(problems));
    }
    let trip = event.resolve(case)?;
    let (plant, mut y) = Plant::build(case)?;
    if trip.unit_index.is_some() {
        let after = Phase {
            deficit_pu: 0.0,
            tripped: trip.unit_index,
            shed_mw: 0.0,
        };
        if !(plant.h_sys(&after) > 0.0) {
            return Err(SimError::NoInertia);
        }
    }

    let dt = cfg.dt_s;
    let n = cfg.n_steps();
    let f0 = plant.f0;
    let limit_hz = f0 * COLLAPSE_FRACTION;
    let eps = 1e-9 * dt;

    let mut rk = Rk4::new(y.len());
    let mut trace = FrequencyTrace::default();
    let mut monitor = cfg.ufls.as_ref().map(UflsMonitor::new);
    let mut phase = Phase {
        deficit_pu: 0.0,
        tripped: None,
        shed_mw: 0.0,
    };
    let mut active = false;
    let mut valve_limited = false;
    let mut ufls_trips: Vec<UflsTripAnnotation> = Vec::new();
    let mut pm_rows: Vec<Vec<f64>> = Vec::new();

    let activate = |phase: &mut Phase| {
        phase.deficit_pu = trip.deficit_mw / plant.s_base;
        phase.tripped = trip.unit_index;
    };

    trace.push_unchecked(0.0, f0);
    if cfg.record_per_unit {
        pm_rows.push(plant.unit_pm(case, &phase, &y));
    }

    for k in 0..n {
        let t0 = k as f64 * dt;
        let t1 = (k + 1) as f64 * dt;
        let te = trip.t_event_s;
        if !active && te <= t0 + eps {
            activate(&mut phase);
            active = true;
        }
        if !active && te < t1 - eps {
            let ph = phase;
            rk.step(t0, &mut y, te - t0, |_, s, d| plant.derivatives(&ph, s, d));
            plant.clamp_valves(&mut y);
            activate(&mut phase);
            active = true;
            let ph = phase;
            rk.step(te, &mut y, t1 - te, |_, s, d| plant.derivatives(&ph, s, d));
        } else {
            let ph = phase;
            rk.step(t0, &mut y, dt, |_, s, d| plant.derivatives(&ph, s, d));
        }
        let limited = plant.clamp_valves(&mut y);
        valve_limited |= limited && active;

        if y.iter().any(|v| !v.is_finite()) {
            return Err(SimError::Diverged {
                step: k + 1,
                t_s: t1,
            });
        }
        let f = f0 * (1.0 + y[0]);
        if f < limit_hz {
            return Err(SimError::Collapse {
                t_s: t1,
                f_hz: f,
                limit_hz,
            });
        }
        trace.push_unchecked(t1, f);
        if cfg.record_per_unit {
            pm_rows.push(plant.unit_pm(case, &phase, &y));
        }
        if let Some(m) = monitor.as_mut() {
            for i in m.observe(t1, f) {
                let stage = m.stage(i);
                let shed = stage.shed_fraction * (plant.p_load_mw - phase.shed_mw);
                phase.shed_mw += shed;
                ufls_trips.push(UflsTripAnnotation {
                    stage: i + 1,
                    t_s: t1,
                    threshold_hz: stage.threshold_hz,
                    shed_mw: shed,
                });
            }
        }
    }

    if active {
        trace.annotations.events.push(EventAnnotation {
            t_s: trip.t_event_s,
            deficit_mw: trip.deficit_mw,
            unit_id: trip.unit_index.map(|i| case.units()[i].id.clone()),
        });
    }
    trace.annotations.ufls_trips = ufls_trips;

    let pm = if cfg.record_per_unit {
        case.units()
            .iter()
            .enumerate()
            .map(|(i, u)| PmColumn {
                unit_id: u.id.clone(),
                values: pm_rows.iter().map(|row| row[i]).collect(),
            })
            .collect()
    } else {
        Vec::new()
    };

    Ok(SimOutput {
        trace,
        pm,
        valve_limited,
        trip,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub dt_s: f64,
    pub dt_half_s: f64,
    pub nadir_hz: f64,
    pub nadir_half_hz: f64,
    pub nadir_delta_hz: f64,
    pub rocof_delta_mhz_per_s: f64,
    pub settling_time_delta_s: f64,
    pub settling_freq_delta_hz: f64,
    /// Valve limits were hit; the delta is reported but carries no
    /// order-of-accuracy expectation.
    pub non_smooth: bool,
}

#[derive(Debug, Error)]
pub enum ConvergenceError {
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

/// Build a step-size audit from two finished runs of the same case.
pub fn convergence_report(
    coarse: (&SimConfig, &SimOutput, &FrequencyMetrics),
    fine: (&SimConfig, &SimOutput, &FrequencyMetrics),
) -> ConvergenceReport {
    let (cc, co, cm) = coarse;
    let (fc, fo, fm) = fine;
    ConvergenceReport {
        dt_s: cc.dt_s,
        dt_half_s: fc.dt_s,
        nadir_hz: cm.nadir_hz,
        nadir_half_hz: fm.nadir_hz,
        nadir_delta_hz: (cm.nadir_hz - fm.nadir_hz).abs(),
        rocof_delta_mhz_per_s: (cm.rocof_mhz_per_s - fm.rocof_mhz_per_s).abs(),
        settling_time_delta_s: (cm.settling_time_s - fm.settling_time_s).abs(),
        settling_freq_delta_hz: (cm.settling_freq_hz - fm.settling_freq_hz).abs(),
        non_smooth: co.valve_limited || fo.valve_limited,
    }
}

/// Run at `cfg.dt_s` and at half of it and report metric differences.
pub fn verify_convergence(
    case: &SystemCase,
    event: &TripEvent,
    cfg: &SimConfig,
    metrics_cfg: &MetricsConfig,
) -> Result<ConvergenceReport, ConvergenceError> {
    let half = SimConfig {
        dt_s: cfg.dt_s / 2.0,
        ..cfg.clone()
    };
    let a = simulate(case, event, cfg)?;
    let b = simulate(case, event, &half)?;
    let te = a.trip.t_event_s;
    let ma = compute_metrics(&a.trace, te, metrics_cfg)?;
    let mb = compute_metrics(&b.trace, te, metrics_cfg)?;
    Ok(convergence_report((cfg, &a, &ma), (&half, &b, &mb)))
}
