//! Step-size audit: rerun at half the step and compare the metrics, for a
//! smooth case and one where the governor valves saturate.
//!
//! ```text
//! cargo run --release --example convergence_audit
//! ```

use gridfreq::governor::Tgov1Params;
use gridfreq::metrics::MetricsConfig;
use gridfreq::model::{SynchronousUnit, SystemCase, TripEvent};
use gridfreq::reference::{ercot_aggregate, ERCOT_TRIP_MW};
use gridfreq::simulator::{verify_convergence, SimConfig};

fn main() {
    // Units at 95 % loading with the valve capped at 1.0 pu hit the limit
    // on any sizeable trip.
    let tight = SystemCase::new(
        (1..=4)
            .map(|i| SynchronousUnit {
                id: format!("g{i}"),
                s_rated_mva: 1000.0,
                p_gen_mw: 950.0,
                h_s: 4.0,
                governor: Some(Tgov1Params::default()),
                responsive: true,
            })
            .collect(),
        vec![],
        3800.0,
        1.0,
        60.0,
        None,
    )
    .unwrap();

    let runs = [
        ("aggregate, 1129 MW", ercot_aggregate(), ERCOT_TRIP_MW),
        ("saturating fleet, 300 MW", tight, 300.0),
    ];
    for (name, case, mw) in runs {
        for dt in [0.05, 0.02, 0.01] {
            let r = verify_convergence(
                &case,
                &TripEvent::magnitude(1.0, mw),
                &SimConfig {
                    dt_s: dt,
                    ..SimConfig::default()
                },
                &MetricsConfig::default(),
            )
            .unwrap();
            println!(
                "{name:26} dt {dt:5}: nadir {:.6} Hz, change at dt/2 {:.2e} Hz{}",
                r.nadir_hz,
                r.nadir_delta_hz,
                if r.non_smooth {
                    "  [valve limits hit]"
                } else {
                    ""
                }
            );
        }
    }
}
