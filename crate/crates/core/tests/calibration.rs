//! Calibration against simulated controlled experiments.

use wsn_detect::calibration::{estimate_detection, estimate_pw, estimate_response, generate_runs, CalibrationRun};
use wsn_detect::hexgrid::{GridTopology, NodeId};
use wsn_detect::probability::SensorParams;
use wsn_detect::simulator::TruthScenario;

fn params() -> SensorParams {
    SensorParams::new(0.9, 0.5, 0.9, 0.01).unwrap()
}

#[test]
fn paired_response_estimates_within_three_se() {
    // 5x5 grid: each event run contributes 25 paired observations, 4000 runs = 1e5
    let g = GridTopology::new(5, 5).unwrap();
    let runs = generate_runs(&params(), &g, TruthScenario::EventUniform, 4_000, 8).unwrap();
    let e = estimate_response(&runs).unwrap();
    assert_eq!(e.detected + e.undetected, 100_000);
    assert!((e.pc.value - 0.9).abs() <= 3.0 * e.pc.std_error, "{:?}", e.pc);
    assert!((e.pw.value - 0.01).abs() <= 3.0 * e.pw.std_error, "{:?}", e.pw);
}

#[test]
fn detection_and_false_alarm_estimates_within_three_se() {
    let g = GridTopology::new(8, 8).unwrap();
    let p = params();
    let mut runs = generate_runs(&p, &g, TruthScenario::EventAt(NodeId::new(3, 4)), 5_000, 2).unwrap();
    runs.extend(generate_runs(&p, &g, TruthScenario::Normal, 2_000, 3).unwrap());
    let d = estimate_detection(&runs, &g).unwrap();
    assert!((d.p1.value - p.p1).abs() <= 3.0 * d.p1.std_error);
    assert!((d.p2.value - p.p2).abs() <= 3.0 * d.p2.std_error);
    let pw = estimate_pw(&runs).unwrap();
    assert!((pw.value - p.pw).abs() <= 3.0 * pw.std_error);
}

fn rmse_p1(runs_per_estimate: u64, repetitions: u64) -> f64 {
    let g = GridTopology::new(4, 4).unwrap();
    let p = SensorParams::new(0.7, 0.3, 0.9, 0.1).unwrap();
    let sq: f64 = (0..repetitions)
        .map(|rep| {
            let seed = runs_per_estimate * 1_000_003 + rep;
            let runs: Vec<CalibrationRun> =
                generate_runs(&p, &g, TruthScenario::EventUniform, runs_per_estimate, seed).unwrap();
            let est = estimate_detection(&runs, &g).unwrap().p1.value;
            (est - p.p1).powi(2)
        })
        .sum();
    (sq / repetitions as f64).sqrt()
}

#[test]
fn estimation_error_shrinks_at_root_n() {
    let sizes = [100u64, 1_000, 10_000];
    let pts: Vec<(f64, f64)> = sizes.iter().map(|&n| ((n as f64).ln(), rmse_p1(n, 200).ln())).collect();
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / 3.0;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / 3.0;
    let slope = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>() / pts.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>();
    assert!((slope + 0.5).abs() <= 0.1, "log-log slope {slope}");
}
