//! Acceptance checks. Each check prints one PASS/FAIL line; the process
//! exits non-zero if any fails.
//!
//! Reference values here are computed independently of the library: closed
//! forms for single-machine responses, a local RK4 for the governor, direct
//! arithmetic for the report formatting.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use gridfreq::calibration::{calibrate, CalibrationConfig, CalibrationTargets};
use gridfreq::governor::{tgov1_init, tgov1_step_output, GovernorState, Tgov1Params};
use gridfreq::metrics::{
    average_delta, compare_metrics, compute_metrics, difference_column, format_average_table,
    FrequencyMetrics, MetricsConfig, MetricsDelta, MetricsTolerance,
};
use gridfreq::model::{SynchronousUnit, SystemCase, TripEvent};
use gridfreq::reference::{equal_fleet, ercot_aggregate, ERCOT_TRIP_MW};
use gridfreq::scenario::{penetration_sweep, ScenarioSpec, SweepRow, DEFAULT_WIND_PCT};
use gridfreq::simulator::ufls::{UflsTable, FIRST_STAGE_HZ};
use gridfreq::simulator::{simulate, verify_convergence, SimConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = (&'static str, fn() -> Verdict);

struct Verdict {
    pass: bool,
    detail: String,
}

impl Verdict {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Verdict {
            pass,
            detail: detail.into(),
        }
    }
}

fn one_machine(governor: Option<Tgov1Params>, p_mw: f64, d_load: f64) -> SystemCase {
    SystemCase::new(
        vec![SynchronousUnit {
            id: "g1".into(),
            s_rated_mva: 1000.0,
            p_gen_mw: p_mw,
            h_s: 5.0,
            responsive: governor.is_some(),
            governor,
        }],
        vec![],
        p_mw,
        d_load,
        60.0,
        None,
    )
    .expect("valid single-machine case")
}

/// Ordinary least-squares slope.
fn ls_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let (sx, sy) = points
        .iter()
        .fold((0.0, 0.0), |(a, b), (x, y)| (a + x, b + y));
    let (mx, my) = (sx / n, sy / n);
    let (num, den) = points.iter().fold((0.0, 0.0), |(a, b), (x, y)| {
        (a + (x - mx) * (y - my), b + (x - mx) * (x - mx))
    });
    num / den
}

fn analytic_rocof() -> Verdict {
    let case = one_machine(None, 800.0, 0.0);
    let cfg = SimConfig {
        t_end_s: 3.0,
        ..SimConfig::default()
    };
    let started = Instant::now();
    let out = simulate(&case, &TripEvent::magnitude(1.0, 100.0), &cfg).expect("simulation runs");
    let elapsed = started.elapsed();

    let expected = -(100.0 / 1000.0) * 60.0 / (2.0 * 5.0);
    let window: Vec<(f64, f64)> = out
        .trace
        .samples()
        .filter(|&(t, _)| (1.0 - 1e-9..=1.5 + 1e-9).contains(&t))
        .collect();
    let slope = ls_slope(&window);
    let rel = ((slope - expected) / expected).abs();
    Verdict::new(
        rel < 0.005 && elapsed < Duration::from_secs(1),
        format!("slope {slope:.6} Hz/s vs {expected} Hz/s (rel err {rel:.1e}), {elapsed:.1?}"),
    )
}

fn analytic_settling() -> Verdict {
    // Fully loaded machine, 20 % valve headroom.
    let gov = Tgov1Params {
        v_max: 1.2,
        ..Tgov1Params::default()
    };
    let case = one_machine(Some(gov), 1000.0, 1.0);
    let cfg = SimConfig {
        t_end_s: 300.0,
        ..SimConfig::default()
    };
    let out = simulate(&case, &TripEvent::magnitude(1.0, 100.0), &cfg).expect("simulation runs");
    let f_end = *out.trace.freqs().last().unwrap();
    let expected = 60.0 - 60.0 * 0.1 / (1.0 / 0.05 + 1.0);
    let err = (f_end - expected).abs();
    let err_rounded = (f_end - 59.714).abs();
    Verdict::new(
        err < 5e-4 && err_rounded < 5e-4,
        format!(
            "settled at {f_end:.6} Hz vs {expected:.6} Hz (|err| {:.2e} Hz)",
            err
        ),
    )
}

/// Local RK4 of the valve/lead-lag pair at a fixed speed deviation, with the
/// valve clamped after every step.
fn integrate_governor(p: &Tgov1Params, p0: f64, dw: f64, t_end: f64, h: f64) -> f64 {
    let mut s = tgov1_init(p, p0).expect("p0 inside limits");
    let deriv = |s: &GovernorState| {
        let o = tgov1_step_output(s, p, p0, dw);
        (o.dv_dt, o.dx_ll_dt)
    };
    let add = |s: &GovernorState, k: (f64, f64), c: f64| GovernorState {
        v: s.v + c * k.0,
        x_ll: s.x_ll + c * k.1,
    };
    let steps = (t_end / h).round() as usize;
    for _ in 0..steps {
        let k1 = deriv(&s);
        let k2 = deriv(&add(&s, k1, h / 2.0));
        let k3 = deriv(&add(&s, k2, h / 2.0));
        let k4 = deriv(&add(&s, k3, h));
        s.v += h / 6.0 * (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0);
        s.x_ll += h / 6.0 * (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1);
        s.v = s.v.clamp(p.v_min, p.v_max);
    }
    tgov1_step_output(&s, p, p0, dw).p_mech
}

fn governor_dc_gain() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(76_071);
    let mut worst_dc: f64 = 0.0;
    let mut worst_ll: f64 = 0.0;
    for _ in 0..20 {
        let t3 = rng.gen_range(1.0..12.0);
        let v_min = rng.gen_range(0.0..0.3);
        let v_max = rng.gen_range(1.0..1.2);
        let p = Tgov1Params {
            r: rng.gen_range(0.03..0.08),
            t1_s: rng.gen_range(0.1..1.0),
            t2_s: rng.gen_range(0.0..=t3),
            t3_s: t3,
            v_max,
            v_min,
            d_t: rng.gen_range(0.0..0.5),
        };
        let p0 = rng.gen_range(v_min + 0.05..v_max - 0.05);
        let dw = rng.gen_range(-0.005..0.005);

        let closed = (p0 - dw / p.r).clamp(v_min, v_max) - p.d_t * dw;
        let settle = 40.0 * p.t1_s.max(p.t3_s);
        let sim = integrate_governor(&p, p0, dw, settle, 0.01);
        worst_dc = worst_dc.max((sim - closed).abs());

        let s0 = tgov1_init(&p, p0).unwrap();
        let kick = GovernorState {
            v: s0.v + 0.01,
            ..s0
        };
        let jump = tgov1_step_output(&kick, &p, p0, 0.0).p_mech
            - tgov1_step_output(&s0, &p, p0, 0.0).p_mech;
        worst_ll = worst_ll.max((jump / 0.01 - p.t2_s / p.t3_s).abs());
    }
    Verdict::new(
        worst_dc < 1e-6 && worst_ll < 1e-9,
        format!(
            "20 draws: worst DC error {worst_dc:.2e} pu, worst lead-lag gain error {worst_ll:.2e}"
        ),
    )
}

fn integrator_convergence() -> Verdict {
    let cases = [
        (
            "single machine",
            one_machine(Some(Tgov1Params::default()), 800.0, 1.0),
            50.0,
        ),
        ("equal fleet", equal_fleet(), 540.0),
        ("aggregate", ercot_aggregate(), ERCOT_TRIP_MW),
    ];
    let mut worst: f64 = 0.0;
    let mut smooth = true;
    let mut parts = Vec::new();
    for (name, case, mw) in cases {
        let r = verify_convergence(
            &case,
            &TripEvent::magnitude(1.0, mw),
            &SimConfig::default(),
            &MetricsConfig::default(),
        )
        .expect("both runs complete");
        smooth &= !r.non_smooth;
        worst = worst.max(r.nadir_delta_hz);
        parts.push(format!("{name} {:.1e}", r.nadir_delta_hz));
    }
    Verdict::new(
        smooth && worst < 1e-4,
        format!("nadir change dt 0.01 -> 0.005: {} Hz", parts.join(", ")),
    )
}

/// Mark the `responsive` largest governed units responsive (ties by id) and
/// scale reheaters and inertia.
fn perturb(base: &SystemCase, responsive: usize, t3_mult: f64, h_mult: f64) -> SystemCase {
    let mut order: Vec<usize> = (0..base.units().len())
        .filter(|&i| base.units()[i].governor.is_some())
        .collect();
    order.sort_by(|&a, &b| {
        let (ua, ub) = (&base.units()[a], &base.units()[b]);
        ub.s_rated_mva
            .total_cmp(&ua.s_rated_mva)
            .then(ua.id.cmp(&ub.id))
    });
    let mut units = base.units().to_vec();
    for (rank, &i) in order.iter().enumerate() {
        units[i].responsive = rank < responsive;
    }
    for u in &mut units {
        if let Some(g) = u.governor.as_mut() {
            g.t2_s *= t3_mult;
            g.t3_s *= t3_mult;
        }
        u.h_s *= h_mult;
    }
    SystemCase::new(
        units,
        vec![],
        base.p_load_mw(),
        base.d_load(),
        base.f0_hz(),
        None,
    )
    .unwrap()
}

fn measure(case: &SystemCase, event: &TripEvent) -> FrequencyMetrics {
    let out = simulate(case, event, &SimConfig::default()).unwrap();
    compute_metrics(&out.trace, event.t_event_s, &MetricsConfig::default()).unwrap()
}

fn calibration_round_trip() -> Verdict {
    let started = Instant::now();
    let base = equal_fleet();
    let cfg = CalibrationConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(20_160_108);
    let mut failures = Vec::new();
    let mut worst = (0.0f64, 0.0f64, 0.0f64);
    let trials = 6;
    for trial in 0..trials {
        let kappa = [0.6, 0.7, 0.8, 0.9][rng.gen_range(0..4)];
        let t3 = rng.gen_range(0.7..1.5);
        let h = rng.gen_range(0.7..1.2);
        let truth = perturb(&base, (kappa * 10.0f64).round() as usize, t3, h);
        let event = TripEvent::magnitude(1.0, 390.0);
        let targets = CalibrationTargets::new(measure(&truth, &event), event);
        let (r, _) = calibrate(&base, &targets, &cfg).expect("calibration runs");
        let err = (
            (r.kappa - kappa).abs(),
            (r.t3_mult - t3).abs(),
            (r.h_mult - h).abs(),
        );
        worst = (worst.0.max(err.0), worst.1.max(err.1), worst.2.max(err.2));
        if err.0 > 0.05 || err.1 > 0.15 || err.2 > 0.05 {
            failures.push(format!(
                "trial {trial}: truth ({kappa}, {t3:.3}, {h:.3}) got ({:.3}, {:.3}, {:.3})",
                r.kappa, r.t3_mult, r.h_mult
            ));
        }
    }

    let truth = perturb(&base, 8, 1.2, 0.9);
    let mut deltas = Vec::new();
    for mw in [360.0, 320.0, 540.0, 390.0, 660.0] {
        let event = TripEvent::magnitude(1.0, mw);
        let targets = CalibrationTargets::new(measure(&truth, &event), event);
        let (r, _) = calibrate(&base, &targets, &cfg).expect("calibration runs");
        deltas.push(r.residuals);
    }
    let avg = average_delta(&deltas);
    let envelope = MetricsTolerance::default();
    let within = envelope.admits(&avg);
    let elapsed = started.elapsed();
    if !within {
        failures.push(format!("batch average {avg:?} outside envelope"));
    }
    let fast = elapsed < Duration::from_secs(60);
    if !fast {
        failures.push(format!("took {elapsed:.1?}"));
    }
    Verdict::new(
        failures.is_empty(),
        if failures.is_empty() {
            format!(
                "{trials} draws, worst errors kappa {:.3} t3 {:.3} h {:.3}; batch average ({:.4} Hz, {:.2} mHz/s, {:.2} s, {:.4} Hz); {elapsed:.1?}",
                worst.0, worst.1, worst.2, avg.nadir_hz, avg.rocof_mhz_per_s, avg.settling_time_s, avg.settling_freq_hz
            )
        } else {
            failures.join("; ")
        },
    )
}

fn strictly<F: Fn(f64, f64) -> bool>(xs: &[f64], ok: F) -> bool {
    xs.windows(2).all(|w| ok(w[0], w[1]))
}

fn sweep(mw: f64) -> Vec<SweepRow> {
    let specs: Vec<ScenarioSpec> = [0.0, 20.0, 40.0, 60.0]
        .iter()
        .map(|&l| ScenarioSpec::level(l, DEFAULT_WIND_PCT))
        .collect();
    penetration_sweep(
        &ercot_aggregate(),
        &specs,
        &TripEvent::magnitude(1.0, mw),
        &SimConfig::default(),
        &MetricsConfig::default(),
        Some(&UflsTable::first_stage()),
    )
}

fn flag_consistent(row: &SweepRow) -> bool {
    let m = row.metrics().unwrap();
    let flagged = row.flags().contains("UFLS stage 1 would trigger");
    flagged == (m.nadir_hz < FIRST_STAGE_HZ)
}

fn renewable_sweep_orderings() -> Verdict {
    let rows = sweep(ERCOT_TRIP_MW);
    let Some(ms) = rows
        .iter()
        .map(|r| r.metrics().copied())
        .collect::<Option<Vec<_>>>()
    else {
        return Verdict::new(false, "a sweep row failed");
    };
    let col = |f: fn(&FrequencyMetrics) -> f64| ms.iter().map(f).collect::<Vec<_>>();
    let rocof = col(|m| m.rocof_mhz_per_s);
    let nadir = col(|m| m.nadir_hz);
    let ts = col(|m| m.settling_time_s);
    let sf = col(|m| m.settling_freq_hz);
    let ordered = strictly(&rocof, |a, b| b > a)
        && strictly(&nadir, |a, b| b < a)
        && strictly(&ts, |a, b| b >= a)
        && strictly(&sf, |a, b| b < a);

    // A deeper trip pushes the low-inertia row through the first stage.
    let deep = sweep(3600.0);
    let flags_ok = flag_consistent(&rows[3])
        && deep
            .iter()
            .all(|r| r.metrics().is_some() && flag_consistent(r));
    let deep_60 = deep[3].metrics().map_or(f64::NAN, |m| m.nadir_hz);
    Verdict::new(
        ordered && flags_ok,
        format!(
            "rocof {:?} mHz/s, nadir {:?} Hz; 3600 MW trip 60% nadir {deep_60:.3} Hz flagged: {}",
            rocof
                .iter()
                .map(|x| (x * 10.0).round() / 10.0)
                .collect::<Vec<_>>(),
            nadir
                .iter()
                .map(|x| (x * 1000.0).round() / 1000.0)
                .collect::<Vec<_>>(),
            deep[3].flags().contains("UFLS stage 1")
        ),
    )
}

fn fixture(name: &str) -> String {
    let p = Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name);
    std::fs::read_to_string(&p).unwrap_or_else(|e| panic!("{}: {e}", p.display()))
}

fn report_formats() -> Verdict {
    let pair: BTreeMap<String, FrequencyMetrics> =
        serde_json::from_str(&fixture("comparison_pair.json")).unwrap();
    let d = compare_metrics(&pair["measured"], &pair["simulated"]);
    let column = difference_column(&d);
    let column_ok = column == ["0.001", "7", "2", "0.003"];

    let deltas: Vec<MetricsDelta> =
        serde_json::from_str(&fixture("five_event_differences.json")).unwrap();
    let table = format_average_table(&deltas);
    let average: Vec<&str> = table
        .lines()
        .find(|l| l.starts_with("Average"))
        .map(|l| l.split_whitespace().skip(1).collect())
        .unwrap_or_default();
    let average_ok = average == ["0.005", "4.2", "1.4", "0.006"];
    Verdict::new(
        column_ok && average_ok,
        format!("difference column {column:?}; average row {average:?}"),
    )
}

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("data")
        .join(name)
}

fn run_all_commands(dir: &Path, jobs: &str) -> Result<(), String> {
    let s = |p: &Path| p.to_string_lossy().into_owned();
    let d = |name: &str| s(&dir.join(name));
    let single_target = dir.join("target.json");
    std::fs::write(
        &single_target,
        r#"{"event": {"t_event_s": 1.0, "magnitude_mw": 390.0},
            "metrics": {"rocof_mhz_per_s": 36.0, "nadir_hz": 59.955, "settling_time_s": 7.0, "settling_freq_hz": 59.981}}"#,
    )
    .map_err(|e| e.to_string())?;
    let invocations: Vec<Vec<String>> = vec![
        vec![
            "simulate".into(),
            "--case".into(),
            s(&data("equal_fleet.json")),
            "--trip-unit".into(),
            "g03".into(),
            "--per-unit".into(),
            "--out".into(),
            d("trace.csv"),
        ],
        vec![
            "metrics".into(),
            "--trace".into(),
            d("trace.csv"),
            "--measured".into(),
            d("trace.csv"),
            "--out".into(),
            d("metrics.json"),
        ],
        vec![
            "calibrate".into(),
            "--case".into(),
            s(&data("equal_fleet.json")),
            "--targets".into(),
            s(&single_target),
            "--out-dir".into(),
            d("cal"),
        ],
        vec![
            "scenario".into(),
            "build".into(),
            "--case".into(),
            s(&data("ercot_aggregate.json")),
            "--pv-pct".into(),
            "25".into(),
            "--out".into(),
            d("case40.json"),
        ],
        vec![
            "sweep".into(),
            "--case".into(),
            s(&data("ercot_aggregate.json")),
            "--levels".into(),
            "20,40,60".into(),
            "--event".into(),
            s(&data("trip_1129.json")),
            "--out-dir".into(),
            d("sweep"),
        ],
        vec![
            "convergence".into(),
            "--case".into(),
            s(&data("ercot_aggregate.json")),
            "--event-mw".into(),
            "1129".into(),
            "--out".into(),
            d("convergence.json"),
        ],
    ];
    for args in invocations {
        let out = Command::new(env!("CARGO_BIN_EXE_gridfreq"))
            .args(&args)
            .env("GRIDFREQ_JOBS", jobs)
            .output()
            .map_err(|e| e.to_string())?;
        if !out.status.success() {
            return Err(format!(
                "{} failed: {}",
                args[0],
                String::from_utf8_lossy(&out.stderr)
            ));
        }
    }
    Ok(())
}

fn collect_files(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                out.insert(
                    path.strip_prefix(root).unwrap().to_path_buf(),
                    std::fs::read(&path).unwrap(),
                );
            }
        }
    }
    out
}

fn determinism() -> Verdict {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    if let Err(e) = run_all_commands(a.path(), "1").and_then(|_| run_all_commands(b.path(), "4")) {
        return Verdict::new(false, e);
    }
    let (fa, fb) = (collect_files(a.path()), collect_files(b.path()));
    let names_match = fa.keys().eq(fb.keys());
    let differing: Vec<String> = fa
        .iter()
        .filter(|(k, v)| fb.get(*k) != Some(*v))
        .map(|(k, _)| k.display().to_string())
        .collect();
    let expected = 14;
    Verdict::new(
        names_match && differing.is_empty() && fa.len() == expected,
        format!(
            "{} artifacts from six commands, 1 vs 4 worker threads; differing: {:?}",
            fa.len(),
            differing
        ),
    )
}

fn main() {
    let checks: [Check; 8] = [
        ("analytic ROCOF", analytic_rocof),
        ("analytic settling frequency", analytic_settling),
        ("governor DC gain", governor_dc_gain),
        ("integrator convergence", integrator_convergence),
        ("calibration self-consistency", calibration_round_trip),
        ("renewable sweep orderings", renewable_sweep_orderings),
        ("report formats", report_formats),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, check)) in checks.iter().enumerate() {
        let v = check();
        if !v.pass {
            failed += 1;
        }
        println!(
            "criterion {} {:<30} {}  {}",
            i + 1,
            name,
            if v.pass { "PASS" } else { "FAIL" },
            v.detail
        );
    }
    println!(
        "{} of {} criteria passed",
        checks.len() - failed,
        checks.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
