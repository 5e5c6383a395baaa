//! Trip 1129 MW on the aggregate reference case and print the response.
//!
//! ```text
//! cargo run --release --example simulate_trip
//! ```

use gridfreq::metrics::{compute_metrics, MetricsConfig};
use gridfreq::model::{system_inertia, TripEvent};
use gridfreq::reference::{ercot_aggregate, ERCOT_TRIP_MW};
use gridfreq::simulator::{simulate, SimConfig};

fn main() {
    let case = ercot_aggregate();
    println!(
        "{} units, {:.0} MW load, system base {:.0} MVA, H_sys {:.3} s",
        case.units().len(),
        case.p_load_mw(),
        case.s_base_mva(),
        system_inertia(&case)
    );

    let event = TripEvent::magnitude(1.0, ERCOT_TRIP_MW);
    let out = simulate(&case, &event, &SimConfig::default()).expect("simulation runs");

    println!("\n  t (s)   f (Hz)");
    for t in [0.0, 1.0, 1.5, 2.0, 3.0, 5.0, 8.0, 12.0, 20.0, 40.0, 60.0] {
        println!("{t:7.1}  {:.5}", out.trace.interpolate(t));
    }

    let m = compute_metrics(&out.trace, out.trip.t_event_s, &MetricsConfig::default()).unwrap();
    println!("\nROCOF            {:8.1} mHz/s", m.rocof_mhz_per_s);
    println!("nadir            {:8.4} Hz", m.nadir_hz);
    println!("settling time    {:8.2} s", m.settling_time_s);
    println!("settling freq    {:8.4} Hz", m.settling_freq_hz);
}
