//! Under-frequency load shedding on a low-inertia case: the same trip with
//! and without a three-stage relay table.
//!
//! ```text
//! cargo run --release --example ufls_relay
//! ```

use gridfreq::metrics::{compute_metrics, MetricsConfig};
use gridfreq::model::TripEvent;
use gridfreq::reference::ercot_aggregate;
use gridfreq::scenario::{build_scenario, ScenarioSpec, DEFAULT_WIND_PCT};
use gridfreq::simulator::ufls::{UflsStage, UflsTable};
use gridfreq::simulator::{simulate, SimConfig};

fn main() {
    let case = build_scenario(
        &ercot_aggregate(),
        &ScenarioSpec::level(60.0, DEFAULT_WIND_PCT),
    )
    .unwrap();
    let event = TripEvent::magnitude(1.0, 6500.0);
    let table = UflsTable {
        stages: vec![
            UflsStage {
                threshold_hz: 59.3,
                shed_fraction: 0.05,
                delay_s: 0.0,
            },
            UflsStage {
                threshold_hz: 58.9,
                shed_fraction: 0.10,
                delay_s: 0.0,
            },
            UflsStage {
                threshold_hz: 58.5,
                shed_fraction: 0.10,
                delay_s: 0.0,
            },
        ],
    };

    for (name, ufls) in [("no relay", None), ("three-stage relay", Some(table))] {
        let cfg = SimConfig {
            ufls,
            ..SimConfig::default()
        };
        let out = simulate(&case, &event, &cfg).expect("simulation runs");
        let m = compute_metrics(&out.trace, 1.0, &MetricsConfig::default()).unwrap();
        println!(
            "{name}: nadir {:.3} Hz, settles at {:.3} Hz",
            m.nadir_hz, m.settling_freq_hz
        );
        for trip in &out.trace.annotations.ufls_trips {
            println!(
                "  stage {} below {:.1} Hz at t = {:.2} s, shed {:.0} MW",
                trip.stage, trip.threshold_hz, trip.t_s, trip.shed_mw
            );
        }
    }
}
