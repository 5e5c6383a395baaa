//! TGOV1 steam turbine-governor.
//!
//! Speed deviation passes through the droop `1/r` to form the valve command,
//! a first-order governor lag `t1` with valve position limits, then the
//! reheater lead-lag `(1 + s·t2)/(1 + s·t3)`. Turbine damping `d_t` acts
//! directly on speed deviation.
//!
//! The lead-lag is realized as `y = a·v + x_ll` with `a = t2/t3` and
//! `dx_ll/dt = ((1 - a)·v - x_ll)/t3`, so a valve step reaches mechanical
//! power instantly in the proportion `a` (the high-pressure share) and the
//! rest arrives through the reheater lag.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum GovernorError {
    #[error("initial power {p0} pu outside valve limits [{v_min}, {v_max}]")]
    OutsideLimits { p0: f64, v_min: f64, v_max: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tgov1Params {
    /// Droop, pu Δf per pu ΔP on machine base.
    #[serde(default = "defaults::r")]
    pub r: f64,
    #[serde(default = "defaults::t1")]
    pub t1_s: f64,
    #[serde(default = "defaults::t2")]
    pub t2_s: f64,
    /// Reheater time constant.
    #[serde(default = "defaults::t3")]
    pub t3_s: f64,
    #[serde(default = "defaults::v_max")]
    pub v_max: f64,
    #[serde(default = "defaults::v_min")]
    pub v_min: f64,
    #[serde(default)]
    pub d_t: f64,
}

mod defaults {
    pub fn r() -> f64 {
        0.05
    }
    pub fn t1() -> f64 {
        0.5
    }
    pub fn t2() -> f64 {
        2.1
    }
    pub fn t3() -> f64 {
        7.0
    }
    pub fn v_max() -> f64 {
        1.0
    }
    pub fn v_min() -> f64 {
        0.0
    }
}

impl Default for Tgov1Params {
    fn default() -> Self {
        Tgov1Params {
            r: defaults::r(),
            t1_s: defaults::t1(),
            t2_s: defaults::t2(),
            t3_s: defaults::t3(),
            v_max: defaults::v_max(),
            v_min: defaults::v_min(),
            d_t: 0.0,
        }
    }
}

impl Tgov1Params {
    /// Share of turbine power developed ahead of the reheater, `t2/t3`.
    pub fn hp_fraction(&self) -> f64 {
        self.t2_s / self.t3_s
    }

    /// Scale the reheater time constant, keeping `t2/t3` fixed.
    pub fn with_reheater_scaled(&self, mult: f64) -> Self {
        Tgov1Params {
            t2_s: self.t2_s * mult,
            t3_s: self.t3_s * mult,
            ..*self
        }
    }

    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !(self.r > 0.0) {
            out.push("droop r must be positive".to_string());
        }
        if !(self.t1_s > 0.0) {
            out.push("t1_s must be positive".to_string());
        }
        if !(self.t3_s > 0.0) {
            out.push("t3_s must be positive".to_string());
        }
        if !(self.t2_s >= 0.0 && self.t2_s <= self.t3_s) {
            out.push(format!(
                "require 0 <= t2_s <= t3_s (got t2_s = {}, t3_s = {})",
                self.t2_s, self.t3_s
            ));
        }
        if !(self.v_min < self.v_max) {
            out.push(format!(
                "require v_min < v_max (got {} and {})",
                self.v_min, self.v_max
            ));
        }
        if !(self.d_t >= 0.0) {
            out.push("d_t must be non-negative".to_string());
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GovernorState {
    /// Valve position, pu on machine base.
    pub v: f64,
    /// Lead-lag residue.
    pub x_ll: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GovernorOutput {
    pub dv_dt: f64,
    pub dx_ll_dt: f64,
    pub p_mech: f64,
}

/// Equilibrium state at zero speed deviation producing `p0`.
pub fn tgov1_init(params: &Tgov1Params, p0: f64) -> Result<GovernorState, GovernorError> {
    if p0 < params.v_min || p0 > params.v_max {
        return Err(GovernorError::OutsideLimits {
            p0,
            v_min: params.v_min,
            v_max: params.v_max,
        });
    }
    Ok(GovernorState {
        v: p0,
        x_ll: p0 * (1.0 - params.hp_fraction()),
    })
}

/// State derivatives and mechanical power output.
///
/// The valve state is read through the limits and its derivative is gated
/// to zero when pushing outward from a limit; motion back inside the range
/// is never delayed.
pub fn tgov1_step_output(
    state: &GovernorState,
    params: &Tgov1Params,
    p_ref: f64,
    dw: f64,
) -> GovernorOutput {
    let a = params.hp_fraction();
    let v = state.v.clamp(params.v_min, params.v_max);
    let command = p_ref - dw / params.r;
    let mut dv_dt = (command - v) / params.t1_s;
    if (v >= params.v_max && dv_dt > 0.0) || (v <= params.v_min && dv_dt < 0.0) {
        dv_dt = 0.0;
    }
    let dx_ll_dt = ((1.0 - a) * v - state.x_ll) / params.t3_s;
    let p_mech = a * v + state.x_ll - params.d_t * dw;
    GovernorOutput {
        dv_dt,
        dx_ll_dt,
        p_mech,
    }
}

/// DC gain of the block: clamped droop command less turbine damping.
pub fn tgov1_steady_state(params: &Tgov1Params, p_ref: f64, dw: f64) -> f64 {
    (p_ref - dw / params.r).clamp(params.v_min, params.v_max) - params.d_t * dw
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> Tgov1Params {
        Tgov1Params {
            r: 0.05,
            t1_s: 0.5,
            t2_s: 2.1,
            t3_s: 7.0,
            v_max: 1.0,
            v_min: 0.0,
            d_t: 0.0,
        }
    }

    #[test]
    fn init_is_equilibrium() {
        let p = params();
        let s = tgov1_init(&p, 0.8).unwrap();
        let out = tgov1_step_output(&s, &p, 0.8, 0.0);
        assert_eq!(out.dv_dt, 0.0);
        assert_eq!(out.dx_ll_dt, 0.0);
        assert!((out.p_mech - 0.8).abs() < 1e-15);
    }

    #[test]
    fn init_at_upper_limit_is_valid() {
        let p = params();
        let s = tgov1_init(&p, p.v_max).unwrap();
        assert_eq!(s.v, 1.0);
        // pinned: further opening is gated
        let out = tgov1_step_output(&s, &p, 1.0, -0.01);
        assert_eq!(out.dv_dt, 0.0);
        // closing is immediate
        let out = tgov1_step_output(&s, &p, 1.0, 0.01);
        assert!(out.dv_dt < 0.0);
    }

    #[test]
    fn init_outside_limits_errors() {
        let p = params();
        assert_eq!(
            tgov1_init(&p, 1.01),
            Err(GovernorError::OutsideLimits {
                p0: 1.01,
                v_min: 0.0,
                v_max: 1.0
            })
        );
    }

    #[test]
    fn valve_jump_passes_hp_fraction() {
        let p = Tgov1Params {
            t2_s: 0.3 * 7.0,
            ..params()
        };
        let s = tgov1_init(&p, 0.5).unwrap();
        let before = tgov1_step_output(&s, &p, 0.5, 0.0).p_mech;
        let jumped = GovernorState { v: s.v + 0.1, ..s };
        let after = tgov1_step_output(&jumped, &p, 0.5, 0.0).p_mech;
        assert!(((after - before) - 0.3 * 0.1).abs() < 1e-12);
    }

    #[test]
    fn steady_state_values() {
        let p = Tgov1Params {
            v_max: 2.0,
            ..params()
        };
        assert_eq!(tgov1_steady_state(&p, 0.8, 0.0), 0.8);
        assert!((tgov1_steady_state(&p, 0.8, -0.001) - 0.82).abs() < 1e-12);
        let sat = Tgov1Params {
            v_max: 0.95,
            ..params()
        };
        assert_eq!(tgov1_steady_state(&sat, 0.9, -0.01), 0.95);
    }

    #[test]
    fn reheater_scaling_keeps_fraction() {
        let p = params();
        let q = p.with_reheater_scaled(1.7);
        assert!((q.hp_fraction() - p.hp_fraction()).abs() < 1e-15);
        assert_eq!(q.t1_s, p.t1_s);
    }

    #[test]
    fn bad_params_reported() {
        let p = Tgov1Params {
            t2_s: 8.0,
            v_min: 1.0,
            ..params()
        };
        assert_eq!(p.violations().len(), 2);
    }
}
