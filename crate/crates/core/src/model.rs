//! Grid case description: synchronous fleet, renewable plants, load and
//! damping, plus the JSON case-file reader/writer and aggregate quantities
//! (system base, system inertia, penetration shares).

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::governor::Tgov1Params;

/// Relative tolerance on the initial generation/load balance.
pub const BALANCE_REL_TOL: f64 = 1e-6;

/// Default load damping in pu ΔP per pu Δf.
pub const DEFAULT_D_LOAD: f64 = 1.0;

/// Default nominal frequency.
pub const DEFAULT_F0_HZ: f64 = 60.0;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("case file parse error at `{path}`: {message}")]
    Parse { path: String, message: String },
    #[error("case validation failed: {}", .0.join("; "))]
    Validation(Vec<String>),
}

impl ModelError {
    pub fn violations(&self) -> &[String] {
        match self {
            ModelError::Validation(v) => v,
            ModelError::Parse { .. } => &[],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynchronousUnit {
    pub id: String,
    pub s_rated_mva: f64,
    pub p_gen_mw: f64,
    /// Inertia constant, seconds on machine base.
    pub h_s: f64,
    pub governor: Option<Tgov1Params>,
    /// Participates in primary frequency response.
    pub responsive: bool,
}

impl SynchronousUnit {
    /// Initial per-unit loading on the machine base.
    pub fn loading_pu(&self) -> f64 {
        self.p_gen_mw / self.s_rated_mva
    }

    /// Stored kinetic energy at rated speed, MW·s.
    pub fn kinetic_energy_mws(&self) -> f64 {
        self.h_s * self.s_rated_mva
    }

    pub fn is_governed(&self) -> bool {
        self.governor.is_some()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RenewableKind {
    Pv,
    WindDfig,
}

/// Converter-interfaced plant: constant power, no inertia, no governor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RenewableUnit {
    pub id: String,
    pub kind: RenewableKind,
    #[serde(rename = "p_gen_mw")]
    pub p_gen_mw: f64,
}

/// A validated grid case. Immutable once built; construct through
/// [`SystemCase::new`] or [`parse_case`].
#[derive(Debug, Clone, PartialEq)]
pub struct SystemCase {
    units: Vec<SynchronousUnit>,
    renewables: Vec<RenewableUnit>,
    p_load_mw: f64,
    d_load: f64,
    f0_hz: f64,
    s_base_override: Option<f64>,
    s_base_mva: f64,
}

impl SystemCase {
    pub fn new(
        units: Vec<SynchronousUnit>,
        renewables: Vec<RenewableUnit>,
        p_load_mw: f64,
        d_load: f64,
        f0_hz: f64,
        s_base_override: Option<f64>,
    ) -> Result<Self, ModelError> {
        let s_base_mva =
            s_base_override.unwrap_or_else(|| units.iter().map(|u| u.s_rated_mva).sum());
        let case = SystemCase {
            units,
            renewables,
            p_load_mw,
            d_load,
            f0_hz,
            s_base_override,
            s_base_mva,
        };
        let violations = case.violations();
        if violations.is_empty() {
            Ok(case)
        } else {
            Err(ModelError::Validation(violations))
        }
    }

    fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        let mut seen = BTreeSet::new();
        for u in &self.units {
            let id = &u.id;
            if !seen.insert(id.as_str()) {
                out.push(format!("duplicate unit id `{id}`"));
            }
            if !(u.s_rated_mva > 0.0) {
                out.push(format!("unit `{id}`: s_rated_mva must be positive"));
            }
            if !(u.p_gen_mw >= 0.0) {
                out.push(format!("unit `{id}`: p_gen_mw must be non-negative"));
            }
            if !(u.h_s > 0.0) {
                out.push(format!(
                    "unit `{id}`: inertia must be positive (h_s = {})",
                    u.h_s
                ));
            }
            if u.s_rated_mva > 0.0 && u.p_gen_mw > u.s_rated_mva {
                out.push(format!(
                    "unit `{id}`: p_gen_mw {} exceeds s_rated_mva {}",
                    u.p_gen_mw, u.s_rated_mva
                ));
            }
            match &u.governor {
                None if u.responsive => {
                    out.push(format!("unit `{id}`: responsive requires a governor"))
                }
                None => {}
                Some(g) => {
                    for v in g.violations() {
                        out.push(format!("unit `{id}` governor: {v}"));
                    }
                    if u.s_rated_mva > 0.0 {
                        let p0 = u.loading_pu();
                        if p0 < g.v_min || p0 > g.v_max {
                            out.push(format!(
                                "unit `{id}` governor: initial loading {p0} outside valve limits [{}, {}]",
                                g.v_min, g.v_max
                            ));
                        }
                    }
                }
            }
        }
        for r in &self.renewables {
            if !seen.insert(r.id.as_str()) {
                out.push(format!("duplicate unit id `{}`", r.id));
            }
            if !(r.p_gen_mw >= 0.0) {
                out.push(format!(
                    "renewable `{}`: p_gen_mw must be non-negative",
                    r.id
                ));
            }
        }
        if !(self.p_load_mw > 0.0) {
            out.push("p_load_mw must be positive".to_string());
        }
        if !(self.d_load >= 0.0) {
            out.push("d_load must be non-negative".to_string());
        }
        if !(self.f0_hz > 0.0) {
            out.push("f0 must be positive".to_string());
        }
        if !(self.s_base_mva > 0.0) {
            out.push("s_base_mva must be positive".to_string());
        }
        let gen = self.total_generation_mw();
        if self.p_load_mw > 0.0 && (gen - self.p_load_mw).abs() > BALANCE_REL_TOL * self.p_load_mw {
            out.push(format!(
                "power imbalance: generation {gen} MW vs load {} MW (fold losses into p_load_mw)",
                self.p_load_mw
            ));
        }
        out
    }

    pub fn units(&self) -> &[SynchronousUnit] {
        &self.units
    }

    pub fn renewables(&self) -> &[RenewableUnit] {
        &self.renewables
    }

    pub fn unit(&self, id: &str) -> Option<&SynchronousUnit> {
        self.units.iter().find(|u| u.id == id)
    }

    pub fn p_load_mw(&self) -> f64 {
        self.p_load_mw
    }

    pub fn d_load(&self) -> f64 {
        self.d_load
    }

    pub fn f0_hz(&self) -> f64 {
        self.f0_hz
    }

    pub fn s_base_mva(&self) -> f64 {
        self.s_base_mva
    }

    /// Explicit base from the case file, if one was given.
    pub fn s_base_override(&self) -> Option<f64> {
        self.s_base_override
    }

    pub fn synchronous_generation_mw(&self) -> f64 {
        self.units.iter().map(|u| u.p_gen_mw).sum()
    }

    pub fn renewable_generation_mw(&self) -> f64 {
        self.renewables.iter().fold(0.0, |acc, r| acc + r.p_gen_mw)
    }

    pub fn total_generation_mw(&self) -> f64 {
        self.synchronous_generation_mw() + self.renewable_generation_mw()
    }

    /// Rebuild with modified parts, re-running validation.
    pub fn with_parts(
        &self,
        units: Vec<SynchronousUnit>,
        renewables: Vec<RenewableUnit>,
        s_base_override: Option<f64>,
    ) -> Result<Self, ModelError> {
        SystemCase::new(
            units,
            renewables,
            self.p_load_mw,
            self.d_load,
            self.f0_hz,
            s_base_override,
        )
    }

    pub fn with_d_load(&self, d_load: f64) -> Result<Self, ModelError> {
        SystemCase::new(
            self.units.clone(),
            self.renewables.clone(),
            self.p_load_mw,
            d_load,
            self.f0_hz,
            self.s_base_override,
        )
    }
}

/// System inertia constant in seconds on the system base. Renewables carry
/// no rotating mass and are excluded.
pub fn system_inertia(case: &SystemCase) -> f64 {
    case.units
        .iter()
        .map(|u| u.kinetic_energy_mws())
        .sum::<f64>()
        / case.s_base_mva
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PenetrationShares {
    pub wind_pct: f64,
    pub pv_pct: f64,
    pub total_renewable_pct: f64,
}

/// Renewable output as a percentage of total generation.
pub fn penetration_shares(case: &SystemCase) -> PenetrationShares {
    let total = case.total_generation_mw();
    let share = |kind| {
        let mw = case
            .renewables
            .iter()
            .filter(|r| r.kind == kind)
            .fold(0.0, |acc, r| acc + r.p_gen_mw);
        if total > 0.0 {
            100.0 * mw / total
        } else {
            0.0
        }
    };
    let wind_pct = share(RenewableKind::WindDfig);
    let pv_pct = share(RenewableKind::Pv);
    PenetrationShares {
        wind_pct,
        pv_pct,
        total_renewable_pct: wind_pct + pv_pct,
    }
}

/// Generation-trip disturbance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "EventFile", into = "EventFile")]
pub struct TripEvent {
    pub t_event_s: f64,
    pub target: TripTarget,
}

#[derive(Debug, Clone, PartialEq)]
pub enum TripTarget {
    /// Step power deficit of the given size.
    Magnitude(f64),
    /// Trip a named synchronous unit: its output, inertia and governor go.
    Unit(String),
}

/// A trip checked against a case.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResolvedTrip {
    pub t_event_s: f64,
    pub deficit_mw: f64,
    pub unit_index: Option<usize>,
}

impl TripEvent {
    pub fn magnitude(t_event_s: f64, mw: f64) -> Self {
        TripEvent {
            t_event_s,
            target: TripTarget::Magnitude(mw),
        }
    }

    pub fn unit(t_event_s: f64, id: impl Into<String>) -> Self {
        TripEvent {
            t_event_s,
            target: TripTarget::Unit(id.into()),
        }
    }

    /// Check the trip against `case`. The lost generation must be strictly
    /// less than the synchronous generation online.
    pub fn resolve(&self, case: &SystemCase) -> Result<ResolvedTrip, ModelError> {
        let mut out = Vec::new();
        if !(self.t_event_s >= 0.0) {
            out.push("event time must be non-negative".to_string());
        }
        let (deficit_mw, unit_index) = match &self.target {
            TripTarget::Magnitude(mw) => {
                if !(*mw > 0.0) {
                    out.push("trip magnitude must be positive".to_string());
                }
                (*mw, None)
            }
            TripTarget::Unit(id) => match case.units.iter().position(|u| &u.id == id) {
                Some(i) => (case.units[i].p_gen_mw, Some(i)),
                None => {
                    out.push(format!("trip references unknown unit `{id}`"));
                    (0.0, None)
                }
            },
        };
        let sync = case.synchronous_generation_mw();
        if deficit_mw >= sync && unit_index.is_none() {
            out.push(format!(
                "trip magnitude {deficit_mw} MW must be below synchronous generation {sync} MW"
            ));
        }
        if unit_index.is_some() && case.units.len() < 2 {
            out.push("cannot trip the only synchronous unit".to_string());
        }
        if out.is_empty() {
            Ok(ResolvedTrip {
                t_event_s: self.t_event_s,
                deficit_mw,
                unit_index,
            })
        } else {
            Err(ModelError::Validation(out))
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EventFile {
    t_event_s: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    magnitude_mw: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    unit_id: Option<String>,
}

impl TryFrom<EventFile> for TripEvent {
    type Error = String;

    fn try_from(f: EventFile) -> Result<Self, Self::Error> {
        let target = match (f.magnitude_mw, f.unit_id) {
            (Some(mw), None) => TripTarget::Magnitude(mw),
            (None, Some(id)) => TripTarget::Unit(id),
            _ => return Err("event needs exactly one of `magnitude_mw` or `unit_id`".into()),
        };
        Ok(TripEvent {
            t_event_s: f.t_event_s,
            target,
        })
    }
}

impl From<TripEvent> for EventFile {
    fn from(e: TripEvent) -> Self {
        let (magnitude_mw, unit_id) = match e.target {
            TripTarget::Magnitude(mw) => (Some(mw), None),
            TripTarget::Unit(id) => (None, Some(id)),
        };
        EventFile {
            t_event_s: e.t_event_s,
            magnitude_mw,
            unit_id,
        }
    }
}

/// Parse a trip event JSON document.
pub fn parse_event(document: &str) -> Result<TripEvent, ModelError> {
    let de = &mut serde_json::Deserializer::from_str(document);
    serde_path_to_error::deserialize(de).map_err(|e| ModelError::Parse {
        path: e.path().to_string(),
        message: e.inner().to_string(),
    })
}

// ---------------------------------------------------------------------------
// Case-file schema
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CaseFile {
    #[serde(default = "default_f0")]
    f0: f64,
    p_load_mw: f64,
    #[serde(default = "default_d_load")]
    d_load: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    s_base_mva: Option<f64>,
    units: Vec<UnitFile>,
    #[serde(default)]
    renewables: Vec<RenewableUnit>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct UnitFile {
    id: String,
    s_rated_mva: f64,
    p_gen_mw: f64,
    h_s: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    governor: Option<Tgov1Params>,
    /// Defaults to "has a governor".
    #[serde(default, skip_serializing_if = "Option::is_none")]
    responsive: Option<bool>,
}

fn default_f0() -> f64 {
    DEFAULT_F0_HZ
}

fn default_d_load() -> f64 {
    DEFAULT_D_LOAD
}

/// Parse and validate a JSON case file.
pub fn parse_case(document: &str) -> Result<SystemCase, ModelError> {
    let de = &mut serde_json::Deserializer::from_str(document);
    let file: CaseFile = serde_path_to_error::deserialize(de).map_err(|e| ModelError::Parse {
        path: e.path().to_string(),
        message: e.inner().to_string(),
    })?;
    let units = file
        .units
        .into_iter()
        .map(|u| SynchronousUnit {
            responsive: u.responsive.unwrap_or(u.governor.is_some()),
            id: u.id,
            s_rated_mva: u.s_rated_mva,
            p_gen_mw: u.p_gen_mw,
            h_s: u.h_s,
            governor: u.governor,
        })
        .collect();
    SystemCase::new(
        units,
        file.renewables,
        file.p_load_mw,
        file.d_load,
        file.f0,
        file.s_base_mva,
    )
}

/// Serialize to the case-file schema (pretty JSON, stable key order).
pub fn serialize_case(case: &SystemCase) -> String {
    let file = CaseFile {
        f0: case.f0_hz,
        p_load_mw: case.p_load_mw,
        d_load: case.d_load,
        s_base_mva: case.s_base_override,
        units: case
            .units
            .iter()
            .map(|u| UnitFile {
                id: u.id.clone(),
                s_rated_mva: u.s_rated_mva,
                p_gen_mw: u.p_gen_mw,
                h_s: u.h_s,
                governor: u.governor,
                responsive: Some(u.responsive),
            })
            .collect(),
        renewables: case.renewables.clone(),
    };
    let mut s = serde_json::to_string_pretty(&file).expect("case serializes");
    s.push('\n');
    s
}
