//! Model calibration against a measured frequency event.
//!
//! Three knobs, adjusted in order:
//!
//! 1. responsive governor capacity `kappa`, realized by marking governed
//!    units responsive largest-first until `kappa` of governed MVA responds;
//!    fitted to the settling frequency,
//! 2. a reheater multiplier on every `t3` (with `t2` scaled alongside so the
//!    high-pressure fraction is unchanged); fitted to nadir and settling time,
//! 3. a uniform inertia multiplier on every `h`; fitted to ROCOF.
//!
//! `t1` is never touched. Each step keeps its move only if the total
//! normalized residual does not get worse. The sequence may be repeated,
//! and a measured trace, when given, drives a final joint refinement of the
//! reheater and inertia multipliers on trace RMSE.

pub mod search;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metrics::{
    compare_metrics, compute_metrics, FrequencyMetrics, MetricsConfig, MetricsDelta,
    MetricsTolerance,
};
use crate::model::{SystemCase, TripEvent};
use crate::simulator::{simulate, SimConfig, SimError};
use crate::trace::FrequencyTrace;

use self::search::{golden_section, golden_section_int};

#[derive(Debug, Error)]
pub enum CalibrationError {
    #[error("no governed units to calibrate")]
    NoGovernedUnits,
    #[error("inconsistent targets: {0}")]
    Targets(String),
    #[error("invalid calibration config: {0}")]
    Config(String),
    #[error("reference simulation failed: {0}")]
    Simulation(#[from] SimError),
    #[error("reference metrics failed: {0}")]
    Metrics(#[from] crate::metrics::MetricsError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationTargets {
    pub metrics: FrequencyMetrics,
    pub event: TripEvent,
    pub trace: Option<FrequencyTrace>,
}

impl CalibrationTargets {
    pub fn new(metrics: FrequencyMetrics, event: TripEvent) -> Self {
        CalibrationTargets {
            metrics,
            event,
            trace: None,
        }
    }

    fn validate(&self) -> Result<(), CalibrationError> {
        let m = &self.metrics;
        if !(m.nadir_hz <= m.settling_freq_hz) {
            return Err(CalibrationError::Targets(format!(
                "nadir {} Hz above settling frequency {} Hz",
                m.nadir_hz, m.settling_freq_hz
            )));
        }
        if ![
            m.nadir_hz,
            m.rocof_mhz_per_s,
            m.settling_time_s,
            m.settling_freq_hz,
        ]
        .iter()
        .all(|x| x.is_finite())
        {
            return Err(CalibrationError::Targets("non-finite metric".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrationConfig {
    pub kappa_bounds: (f64, f64),
    pub t3_mult_bounds: (f64, f64),
    pub h_mult_bounds: (f64, f64),
    /// Bracket width at which the multiplier searches stop.
    pub search_tol: f64,
    /// Extra passes of the three-step sequence after the first.
    pub outer_passes: usize,
    /// Per-metric match tolerance for skipping a step and for judging a
    /// boundary result converged.
    pub step_tolerance: MetricsTolerance,
    /// Scale for the total residual, `Σ |Δ_metric| / envelope_metric`.
    pub envelope: MetricsTolerance,
    /// Step 2 objective weights on (nadir error in Hz, settling-time error in s).
    pub reheater_weights: (f64, f64),
    /// Trace-RMSE window after the event for the refinement stage.
    pub refine_window_s: f64,
    pub refine_cycles: usize,
    pub sim: SimConfig,
    pub metrics: MetricsConfig,
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        let envelope = MetricsTolerance::default();
        CalibrationConfig {
            kappa_bounds: (0.0, 1.0),
            t3_mult_bounds: (0.25, 4.0),
            h_mult_bounds: (0.5, 2.0),
            search_tol: 1e-3,
            outer_passes: 2,
            step_tolerance: envelope.scaled(0.1),
            envelope,
            reheater_weights: (10.0, 0.01),
            refine_window_s: 30.0,
            refine_cycles: 2,
            sim: SimConfig::default(),
            metrics: MetricsConfig::default(),
        }
    }
}

impl CalibrationConfig {
    fn validate(&self) -> Result<(), CalibrationError> {
        let ok = |(a, b): (f64, f64)| a > 0.0 && b > a;
        let (k0, k1) = self.kappa_bounds;
        if !(k0 >= 0.0 && k1 > k0 && k1 <= 1.0) {
            return Err(CalibrationError::Config(
                "kappa bounds must lie in [0, 1]".into(),
            ));
        }
        if !ok(self.t3_mult_bounds) || !ok(self.h_mult_bounds) {
            return Err(CalibrationError::Config(
                "multiplier bounds must be positive and ordered".into(),
            ));
        }
        if !(self.search_tol > 0.0) {
            return Err(CalibrationError::Config(
                "search_tol must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CalibrationStep {
    GovernorCapacity,
    Reheater,
    Inertia,
    TraceRefinement,
}

/// Audit entry for one step of one pass.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub pass: usize,
    pub step: CalibrationStep,
    pub value_before: f64,
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
    pub accepted: bool,
    pub residual_before: f64,
    pub residual_after: f64,
    pub residuals: MetricsDelta,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceFlags {
    pub governor_capacity: bool,
    pub reheater: bool,
    pub inertia: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefinementRecord {
    pub rmse_before_hz: f64,
    pub rmse_after_hz: f64,
    pub evaluations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationResult {
    /// Realized responsive fraction of governed MVA.
    pub kappa: f64,
    pub responsive_units: usize,
    pub t3_mult: f64,
    pub h_mult: f64,
    pub simulated: FrequencyMetrics,
    pub residuals: MetricsDelta,
    pub total_residual: f64,
    pub converged: ConvergenceFlags,
    pub passes: usize,
    pub history: Vec<StepRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub refinement: Option<RefinementRecord>,
    /// Modeling choices a reader of the result should know about.
    pub notes: Vec<String>,
}

/// Outcome of a single scalar step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepResult {
    pub value: f64,
    /// Responsive unit count for the governor-capacity step.
    pub units: Option<usize>,
    pub iterations: usize,
    pub converged: bool,
    pub objective: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Knobs {
    units: usize,
    t3_mult: f64,
    h_mult: f64,
}

/// Simulates the base case under a knob setting.
struct Evaluator<'a> {
    base: &'a SystemCase,
    targets: &'a CalibrationTargets,
    cfg: &'a CalibrationConfig,
    /// Governed unit indices, largest first (ties by id).
    order: Vec<usize>,
    /// Cumulative governed MVA fraction after the first k units.
    cum_frac: Vec<f64>,
}

impl<'a> Evaluator<'a> {
    fn new(
        base: &'a SystemCase,
        targets: &'a CalibrationTargets,
        cfg: &'a CalibrationConfig,
    ) -> Result<Self, CalibrationError> {
        let units = base.units();
        let mut order: Vec<usize> = (0..units.len())
            .filter(|&i| units[i].is_governed())
            .collect();
        if order.is_empty() {
            return Err(CalibrationError::NoGovernedUnits);
        }
        order.sort_by(|&a, &b| {
            units[b]
                .s_rated_mva
                .total_cmp(&units[a].s_rated_mva)
                .then_with(|| units[a].id.cmp(&units[b].id))
        });
        let total: f64 = order.iter().map(|&i| units[i].s_rated_mva).sum();
        let mut cum = 0.0;
        let mut cum_frac = vec![0.0];
        for &i in &order {
            cum += units[i].s_rated_mva;
            cum_frac.push(cum / total);
        }
        Ok(Evaluator {
            base,
            targets,
            cfg,
            order,
            cum_frac,
        })
    }

    fn n_governed(&self) -> usize {
        self.order.len()
    }

    fn kappa(&self, units: usize) -> f64 {
        self.cum_frac[units]
    }

    /// Unit-count range whose realized kappa lies within the bounds.
    fn unit_range(&self) -> (usize, usize) {
        let (lo, hi) = self.cfg.kappa_bounds;
        let n = self.n_governed();
        let k_lo = (1..=n)
            .find(|&k| self.cum_frac[k] >= lo - 1e-12)
            .unwrap_or(n);
        let k_hi = (1..=n)
            .rev()
            .find(|&k| self.cum_frac[k] <= hi + 1e-12)
            .unwrap_or(1);
        (k_lo.min(k_hi), k_hi)
    }

    fn apply(&self, knobs: &Knobs) -> SystemCase {
        let mut units = self.base.units().to_vec();
        for (rank, &i) in self.order.iter().enumerate() {
            units[i].responsive = rank < knobs.units;
            if let Some(g) = units[i].governor.as_mut() {
                *g = g.with_reheater_scaled(knobs.t3_mult);
            }
        }
        for u in &mut units {
            u.h_s *= knobs.h_mult;
        }
        self.base
            .with_parts(
                units,
                self.base.renewables().to_vec(),
                self.base.s_base_override(),
            )
            .expect("scaling positive multipliers keeps the case valid")
    }

    fn simulate(&self, knobs: &Knobs) -> Result<crate::simulator::SimOutput, SimError> {
        simulate(&self.apply(knobs), &self.targets.event, &self.cfg.sim)
    }

    fn metrics(&self, knobs: &Knobs) -> Option<FrequencyMetrics> {
        let out = self.simulate(knobs).ok()?;
        compute_metrics(&out.trace, out.trip.t_event_s, &self.cfg.metrics).ok()
    }

    fn delta(&self, m: &FrequencyMetrics) -> MetricsDelta {
        compare_metrics(m, &self.targets.metrics)
    }

    fn total(&self, m: Option<&FrequencyMetrics>) -> f64 {
        m.map_or(f64::INFINITY, |m| {
            self.delta(m).normalized(&self.cfg.envelope)
        })
    }

    fn objective(&self, step: CalibrationStep, m: Option<&FrequencyMetrics>) -> f64 {
        let Some(m) = m else { return f64::INFINITY };
        let d = self.delta(m);
        let (wn, wt) = self.cfg.reheater_weights;
        match step {
            CalibrationStep::GovernorCapacity => d.settling_freq_hz,
            CalibrationStep::Reheater => wn * d.nadir_hz + wt * d.settling_time_s,
            CalibrationStep::Inertia => d.rocof_mhz_per_s,
            CalibrationStep::TraceRefinement => f64::INFINITY,
        }
    }

    fn step_tolerance(&self, step: CalibrationStep) -> f64 {
        let t = &self.cfg.step_tolerance;
        let (wn, wt) = self.cfg.reheater_weights;
        match step {
            CalibrationStep::GovernorCapacity => t.settling_freq_hz,
            CalibrationStep::Reheater => wn * t.nadir_hz + wt * t.settling_time_s,
            CalibrationStep::Inertia => t.rocof_mhz_per_s,
            CalibrationStep::TraceRefinement => 0.0,
        }
    }

    /// Search one knob with the others held at `at`.
    fn run_step(&self, step: CalibrationStep, at: &Knobs) -> StepResult {
        let tol = self.step_tolerance(step);
        let here = self.objective(step, self.metrics(at).as_ref());
        if here <= tol {
            return StepResult {
                value: self.knob_value(step, at),
                units: Some(at.units),
                iterations: 0,
                converged: true,
                objective: here,
            };
        }
        match step {
            CalibrationStep::GovernorCapacity => {
                let (k_lo, k_hi) = self.unit_range();
                let (k, fk, evals) = golden_section_int(
                    |k| self.objective(step, self.metrics(&Knobs { units: k, ..*at }).as_ref()),
                    k_lo,
                    k_hi,
                );
                let at_bound = k == k_lo || k == k_hi;
                StepResult {
                    value: self.kappa(k),
                    units: Some(k),
                    iterations: evals,
                    converged: !(at_bound && fk > tol),
                    objective: fk,
                }
            }
            CalibrationStep::Reheater | CalibrationStep::Inertia => {
                let (lo, hi) = if step == CalibrationStep::Reheater {
                    self.cfg.t3_mult_bounds
                } else {
                    self.cfg.h_mult_bounds
                };
                let r = golden_section(
                    |x| {
                        let k = self.with_value(step, at, x);
                        self.objective(step, self.metrics(&k).as_ref())
                    },
                    lo,
                    hi,
                    self.cfg.search_tol,
                );
                StepResult {
                    value: r.x,
                    units: None,
                    iterations: r.evals,
                    converged: !(r.at_bound && r.fx > tol),
                    objective: r.fx,
                }
            }
            CalibrationStep::TraceRefinement => unreachable!("refinement is not a scalar step"),
        }
    }

    fn knob_value(&self, step: CalibrationStep, k: &Knobs) -> f64 {
        match step {
            CalibrationStep::GovernorCapacity => self.kappa(k.units),
            CalibrationStep::Reheater => k.t3_mult,
            CalibrationStep::Inertia => k.h_mult,
            CalibrationStep::TraceRefinement => f64::NAN,
        }
    }

    fn with_value(&self, step: CalibrationStep, k: &Knobs, x: f64) -> Knobs {
        match step {
            CalibrationStep::Reheater => Knobs { t3_mult: x, ..*k },
            CalibrationStep::Inertia => Knobs { h_mult: x, ..*k },
            _ => *k,
        }
    }

    fn trace_rmse(&self, knobs: &Knobs, measured: &FrequencyTrace) -> f64 {
        let Ok(out) = self.simulate(knobs) else {
            return f64::INFINITY;
        };
        let te = out.trip.t_event_s;
        let (mut sum, mut n) = (0.0, 0usize);
        for (t, f) in measured.samples() {
            if t >= te && t <= te + self.cfg.refine_window_s {
                let e = out.trace.interpolate(t) - f;
                sum += e * e;
                n += 1;
            }
        }
        if n == 0 {
            f64::INFINITY
        } else {
            (sum / n as f64).sqrt()
        }
    }
}

fn identity_knobs(ev: &Evaluator) -> Knobs {
    Knobs {
        units: ev.n_governed(),
        t3_mult: 1.0,
        h_mult: 1.0,
    }
}

fn single_step(
    case: &SystemCase,
    targets: &CalibrationTargets,
    cfg: &CalibrationConfig,
    step: CalibrationStep,
) -> Result<StepResult, CalibrationError> {
    cfg.validate()?;
    targets.validate()?;
    let ev = Evaluator::new(case, targets, cfg)?;
    Ok(ev.run_step(step, &identity_knobs(&ev)))
}

/// Fit the responsive governor fraction to the settling frequency. Every
/// governed unit of `case` is a candidate; the search starts from all of them.
pub fn step1_governor_capacity(
    case: &SystemCase,
    targets: &CalibrationTargets,
    cfg: &CalibrationConfig,
) -> Result<StepResult, CalibrationError> {
    single_step(case, targets, cfg, CalibrationStep::GovernorCapacity)
}

/// Fit a reheater multiplier (relative to `case`) to nadir and settling time.
pub fn step2_reheater(
    case: &SystemCase,
    targets: &CalibrationTargets,
    cfg: &CalibrationConfig,
) -> Result<StepResult, CalibrationError> {
    single_step(case, targets, cfg, CalibrationStep::Reheater)
}

/// Fit a uniform inertia multiplier (relative to `case`) to ROCOF.
pub fn step3_inertia(
    case: &SystemCase,
    targets: &CalibrationTargets,
    cfg: &CalibrationConfig,
) -> Result<StepResult, CalibrationError> {
    if case.units().iter().all(|u| !u.is_governed()) {
        // inertia alone needs no governor; route through a knob-free evaluator
        cfg.validate()?;
        targets.validate()?;
        return Ok(inertia_only(case, targets, cfg));
    }
    single_step(case, targets, cfg, CalibrationStep::Inertia)
}

fn inertia_only(
    case: &SystemCase,
    targets: &CalibrationTargets,
    cfg: &CalibrationConfig,
) -> StepResult {
    let eval = |h: f64| -> f64 {
        let mut units = case.units().to_vec();
        for u in &mut units {
            u.h_s *= h;
        }
        let scaled =
            match case.with_parts(units, case.renewables().to_vec(), case.s_base_override()) {
                Ok(c) => c,
                Err(_) => return f64::INFINITY,
            };
        simulate(&scaled, &targets.event, &cfg.sim)
            .ok()
            .and_then(|o| compute_metrics(&o.trace, o.trip.t_event_s, &cfg.metrics).ok())
            .map_or(f64::INFINITY, |m| {
                (m.rocof_mhz_per_s - targets.metrics.rocof_mhz_per_s).abs()
            })
    };
    let tol = cfg.step_tolerance.rocof_mhz_per_s;
    let here = eval(1.0);
    if here <= tol {
        return StepResult {
            value: 1.0,
            units: None,
            iterations: 0,
            converged: true,
            objective: here,
        };
    }
    let (lo, hi) = cfg.h_mult_bounds;
    let r = golden_section(eval, lo, hi, cfg.search_tol);
    StepResult {
        value: r.x,
        units: None,
        iterations: r.evals,
        converged: !(r.at_bound && r.fx > tol),
        objective: r.fx,
    }
}

/// Full calibration: the three steps in order, optional repeat passes while
/// the total residual keeps falling, then trace refinement if a measured
/// trace is attached. Unconverged steps are flagged, never fatal.
pub fn calibrate(
    case: &SystemCase,
    targets: &CalibrationTargets,
    cfg: &CalibrationConfig,
) -> Result<(CalibrationResult, SystemCase), CalibrationError> {
    cfg.validate()?;
    targets.validate()?;
    let ev = Evaluator::new(case, targets, cfg)?;
    let mut knobs = identity_knobs(&ev);
    let first = ev.simulate(&knobs)?;
    let mut metrics = compute_metrics(&first.trace, first.trip.t_event_s, &cfg.metrics)?;
    let mut residual = ev.total(Some(&metrics));

    let steps = [
        CalibrationStep::GovernorCapacity,
        CalibrationStep::Reheater,
        CalibrationStep::Inertia,
    ];
    let mut flags = [true; 3];
    let mut history = Vec::new();
    let mut passes = 0;
    let mut prev_pass_residual = residual;

    for pass in 0..=cfg.outer_passes {
        passes = pass + 1;
        for (s, &step) in steps.iter().enumerate() {
            let before = ev.knob_value(step, &knobs);
            let r = ev.run_step(step, &knobs);
            let candidate = match step {
                CalibrationStep::GovernorCapacity => Knobs {
                    units: r.units.expect("capacity step reports units"),
                    ..knobs
                },
                _ => ev.with_value(step, &knobs, r.value),
            };
            let cand_metrics = ev.metrics(&candidate);
            let cand_residual = ev.total(cand_metrics.as_ref());
            let accepted = cand_residual <= residual;
            let residual_before = residual;
            if accepted {
                knobs = candidate;
                metrics = cand_metrics.expect("finite residual implies metrics");
                residual = cand_residual;
            }
            flags[s] = r.converged;
            history.push(StepRecord {
                pass,
                step,
                value_before: before,
                value: ev.knob_value(step, &knobs),
                iterations: r.iterations,
                converged: r.converged,
                accepted,
                residual_before,
                residual_after: residual,
                residuals: ev.delta(&metrics),
            });
        }
        if pass == cfg.outer_passes
            || cfg.step_tolerance.admits(&ev.delta(&metrics))
            || !(residual < prev_pass_residual)
        {
            break;
        }
        prev_pass_residual = residual;
    }

    let refinement = targets.trace.as_ref().map(|measured| {
        let mut evaluations = 0;
        let rmse_before = ev.trace_rmse(&knobs, measured);
        let mut best = rmse_before;
        for _ in 0..cfg.refine_cycles {
            for step in [CalibrationStep::Reheater, CalibrationStep::Inertia] {
                let (lo, hi) = if step == CalibrationStep::Reheater {
                    cfg.t3_mult_bounds
                } else {
                    cfg.h_mult_bounds
                };
                let x0 = ev.knob_value(step, &knobs);
                let a = (x0 / 1.25).max(lo);
                let b = (x0 * 1.25).min(hi);
                let r = golden_section(
                    |x| ev.trace_rmse(&ev.with_value(step, &knobs, x), measured),
                    a,
                    b,
                    cfg.search_tol,
                );
                evaluations += r.evals;
                if r.fx < best {
                    best = r.fx;
                    knobs = ev.with_value(step, &knobs, r.x);
                }
            }
        }
        RefinementRecord {
            rmse_before_hz: rmse_before,
            rmse_after_hz: best,
            evaluations,
        }
    });
    if refinement.is_some() {
        if let Some(m) = ev.metrics(&knobs) {
            metrics = m;
            residual = ev.total(Some(&metrics));
        }
    }

    let patched = ev.apply(&knobs);
    let result = CalibrationResult {
        kappa: ev.kappa(knobs.units),
        responsive_units: knobs.units,
        t3_mult: knobs.t3_mult,
        h_mult: knobs.h_mult,
        simulated: metrics,
        residuals: ev.delta(&metrics),
        total_residual: residual,
        converged: ConvergenceFlags {
            governor_capacity: flags[0],
            reheater: flags[1],
            inertia: flags[2],
        },
        passes,
        history,
        refinement,
        notes: vec![
            "inertia multiplier applied uniformly to every synchronous unit".into(),
            format!("load damping d_load = {} pu/pu", case.d_load()),
            "governor time constant t1 held fixed".into(),
        ],
    };
    Ok((result, patched))
}
