//! Displace synchronous generation with wind and PV on the aggregate
//! reference case and watch the frequency response degrade.
//!
//! ```text
//! cargo run --release --example renewable_sweep
//! ```

use gridfreq::metrics::MetricsConfig;
use gridfreq::model::{penetration_shares, system_inertia, TripEvent};
use gridfreq::reference::{ercot_aggregate, ERCOT_TRIP_MW};
use gridfreq::scenario::{
    build_scenario, penetration_sweep, write_sweep_csv, ScenarioSpec, DEFAULT_WIND_PCT,
};
use gridfreq::simulator::{ufls::UflsTable, SimConfig};

fn main() {
    let base = ercot_aggregate();
    let specs: Vec<ScenarioSpec> = [0.0, 20.0, 40.0, 60.0]
        .iter()
        .map(|&total| ScenarioSpec::level(total, DEFAULT_WIND_PCT))
        .collect();

    for spec in &specs {
        let case = build_scenario(&base, spec).expect("feasible level");
        let shares = penetration_shares(&case);
        println!(
            "{:>5.1}% renewable ({:.0}% wind, {:.0}% PV): {} synchronous units, H_sys = {:.3} s",
            shares.total_renewable_pct,
            shares.wind_pct,
            shares.pv_pct,
            case.units().len(),
            system_inertia(&case)
        );
    }

    let event = TripEvent::magnitude(1.0, ERCOT_TRIP_MW);
    let rows = penetration_sweep(
        &base,
        &specs,
        &event,
        &SimConfig::default(),
        &MetricsConfig::default(),
        Some(&UflsTable::first_stage()),
    );
    println!();
    print!("{}", write_sweep_csv(&rows));
}
