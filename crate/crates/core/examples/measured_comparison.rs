//! Compare a model against a "measured" event and against its calibrated
//! self, printed in the measurement / simulation / difference layout.
//!
//! The measurement is synthesized from a fleet whose true governor capacity,
//! reheater time and inertia differ from the nominal model; a measured trace
//! is attached so calibration finishes with a trace-RMSE refinement.
//!
//! ```text
//! cargo run --release --example measured_comparison
//! ```

use gridfreq::calibration::{calibrate, CalibrationConfig, CalibrationTargets};
use gridfreq::metrics::{
    compare_metrics, compute_metrics, format_average_table, format_comparison, MetricsConfig,
};
use gridfreq::model::{SystemCase, TripEvent};
use gridfreq::reference::equal_fleet;
use gridfreq::simulator::{simulate, SimConfig};
use gridfreq::trace::FrequencyTrace;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn truth(base: &SystemCase) -> SystemCase {
    let units = base
        .units()
        .iter()
        .enumerate()
        .map(|(i, u)| {
            let mut u = u.clone();
            u.responsive = i < 6;
            u.governor = u.governor.map(|g| g.with_reheater_scaled(1.4));
            u.h_s *= 0.8;
            u
        })
        .collect();
    base.with_parts(units, vec![], None).unwrap()
}

fn noisy(trace: &FrequencyTrace, seed: u64) -> FrequencyTrace {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let samples: Vec<(f64, f64)> = trace
        .samples()
        .step_by(10)
        .map(|(t, f)| (t, f + rng.gen_range(-0.0003..0.0003)))
        .collect();
    FrequencyTrace::from_samples(&samples).unwrap()
}

fn main() {
    let model = equal_fleet();
    let actual = truth(&model);
    let mcfg = MetricsConfig::default();
    let mut deltas = Vec::new();

    for (i, mw) in [360.0, 320.0, 540.0, 390.0, 660.0].into_iter().enumerate() {
        let event = TripEvent::magnitude(1.0, mw);
        let measured_trace = noisy(
            &simulate(&actual, &event, &SimConfig::default())
                .unwrap()
                .trace,
            i as u64,
        );
        let measured = compute_metrics(&measured_trace, 1.0, &mcfg).unwrap();

        let nominal = simulate(&model, &event, &SimConfig::default()).unwrap();
        let nominal_m = compute_metrics(&nominal.trace, 1.0, &mcfg).unwrap();

        let mut targets = CalibrationTargets::new(measured, event);
        targets.trace = Some(measured_trace);
        let (result, _) = calibrate(&model, &targets, &CalibrationConfig::default()).unwrap();

        if i == 3 {
            println!(
                "{mw} MW event, nominal model:\n{}",
                format_comparison(&measured, &nominal_m)
            );
            println!(
                "{mw} MW event, calibrated model:\n{}",
                format_comparison(&measured, &result.simulated)
            );
            if let Some(r) = &result.refinement {
                println!(
                    "trace RMSE {:.2} mHz -> {:.2} mHz over {} evaluations\n",
                    r.rmse_before_hz * 1e3,
                    r.rmse_after_hz * 1e3,
                    r.evaluations
                );
            }
        }
        deltas.push(compare_metrics(&measured, &result.simulated));
    }
    println!(
        "Average difference, calibrated model, five events:\n{}",
        format_average_table(&deltas)
    );
}
