//! Recover governor capacity, reheater time and inertia from the metrics of
//! a single trip event.
//!
//! The "measured" event is synthesized from a copy of the fleet with 70 % of
//! governed capacity responsive, reheaters 30 % slower and 15 % less inertia;
//! calibration starts from the nominal fleet.
//!
//! ```text
//! cargo run --release --example calibrate_event
//! ```

use std::time::Instant;

use gridfreq::calibration::{calibrate, CalibrationConfig, CalibrationTargets};
use gridfreq::metrics::{compute_metrics, format_comparison, MetricsConfig};
use gridfreq::model::{SystemCase, TripEvent};
use gridfreq::reference::equal_fleet;
use gridfreq::simulator::{simulate, SimConfig};

fn perturbed(base: &SystemCase, responsive: usize, t3_mult: f64, h_mult: f64) -> SystemCase {
    let units = base
        .units()
        .iter()
        .enumerate()
        .map(|(i, u)| {
            let mut u = u.clone();
            u.responsive = i < responsive;
            u.governor = u.governor.map(|g| g.with_reheater_scaled(t3_mult));
            u.h_s *= h_mult;
            u
        })
        .collect();
    base.with_parts(units, vec![], None).unwrap()
}

fn main() {
    let base = equal_fleet();
    let truth = perturbed(&base, 7, 1.3, 0.85);
    let event = TripEvent::magnitude(1.0, 540.0);
    let out = simulate(&truth, &event, &SimConfig::default()).unwrap();
    let measured = compute_metrics(&out.trace, 1.0, &MetricsConfig::default()).unwrap();

    let started = Instant::now();
    let targets = CalibrationTargets::new(measured, event);
    let (result, _patched) = calibrate(&base, &targets, &CalibrationConfig::default()).unwrap();
    println!("calibrated in {:.2?}", started.elapsed());
    println!(
        "kappa {:.3} ({} units)  t3 x{:.3}  h x{:.3}  passes {}",
        result.kappa, result.responsive_units, result.t3_mult, result.h_mult, result.passes
    );
    for s in &result.history {
        println!(
            "  pass {} {:?}: {:.4} -> {:.4} ({} evals, converged {}, accepted {}) residual {:.4} -> {:.4}",
            s.pass, s.step, s.value_before, s.value, s.iterations, s.converged, s.accepted,
            s.residual_before, s.residual_after
        );
    }
    println!();
    print!("{}", format_comparison(&measured, &result.simulated));
}
