//! Built-in cases for examples, benchmarks and tests.

use crate::governor::Tgov1Params;
use crate::model::{SynchronousUnit, SystemCase};

/// Interconnection-wide generation of the aggregate case, MW. Transmission
/// losses are folded into the load so the case balances.
pub const ERCOT_GENERATION_MW: f64 = 75735.83;

/// Metered load before losses, MW.
pub const ERCOT_METERED_LOAD_MW: f64 = 74127.61;

/// Largest single contingency used for the renewable sweep, MW.
pub const ERCOT_TRIP_MW: f64 = 1129.0;

fn fleet_block(
    prefix: &str,
    count: usize,
    s_rated_mva: f64,
    p_gen_mw: f64,
    h_s: f64,
    governor: Option<Tgov1Params>,
) -> impl Iterator<Item = SynchronousUnit> + '_ {
    (1..=count).map(move |i| SynchronousUnit {
        id: format!("{prefix}{i:02}"),
        s_rated_mva,
        p_gen_mw,
        h_s,
        responsive: governor.is_some(),
        governor,
    })
}

/// A 154-unit, all-synchronous aggregate of a large interconnection.
///
/// | block | units | MVA | MW each | H (s) | governor |
/// |---|---|---|---|---|---|
/// | nuc | 4 | 1350 | 1280 | 4.5 | none |
/// | coal | 16 | 900 | 720 | 3.5 | TGOV1 |
/// | gst | 24 | 600 | 480 | 3.0 | TGOV1 |
/// | cc | 60 | 700 | 560 | 4.0 | TGOV1 |
/// | pk | 50 | 350 | 279.5166 | 2.5 | TGOV1 |
pub fn ercot_aggregate() -> SystemCase {
    let tg = Tgov1Params::default();
    let units: Vec<SynchronousUnit> = fleet_block("nuc", 4, 1350.0, 1280.0, 4.5, None)
        .chain(fleet_block("coal", 16, 900.0, 720.0, 3.5, Some(tg)))
        .chain(fleet_block("gst", 24, 600.0, 480.0, 3.0, Some(tg)))
        .chain(fleet_block("cc", 60, 700.0, 560.0, 4.0, Some(tg)))
        .chain(fleet_block("pk", 50, 350.0, 279.5166, 2.5, Some(tg)))
        .collect();
    SystemCase::new(units, vec![], ERCOT_GENERATION_MW, 1.0, 60.0, None)
        .expect("reference case is balanced")
}

/// Ten identical governed units, 8000 MVA at 75 % loading.
pub fn equal_fleet() -> SystemCase {
    let units = fleet_block("g", 10, 8000.0, 6000.0, 4.0, Some(Tgov1Params::default())).collect();
    SystemCase::new(units, vec![], 60000.0, 1.0, 60.0, None).expect("reference case is balanced")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::system_inertia;

    #[test]
    fn aggregate_balances_and_is_synchronous() {
        let c = ercot_aggregate();
        assert_eq!(c.units().len(), 154);
        assert!((c.total_generation_mw() - ERCOT_GENERATION_MW).abs() < 1e-6);
        assert!(c.units().iter().all(|u| u.p_gen_mw <= u.s_rated_mva));
        assert!(system_inertia(&c) > 3.0);
    }

    #[test]
    fn metered_load_alone_is_rejected() {
        let c = ercot_aggregate();
        let err = SystemCase::new(
            c.units().to_vec(),
            vec![],
            ERCOT_METERED_LOAD_MW,
            1.0,
            60.0,
            None,
        );
        assert!(err.is_err());
    }
}
