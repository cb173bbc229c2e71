//! Parameter estimation from replicated controlled experiments.
//!
//! Normal runs (no event) give `pw` as the mean per-run response rate.
//! Event runs with recorded detections give `p1` (detection rate at the
//! event node), `p2` (detection rate among its neighbours) and the response
//! channel `pc`/`pw` from paired `(y, z)` observations.

use thiserror::Error;

use crate::detectors::{ModelId, ResponseField};
use crate::hexgrid::{GridError, GridTopology, NodeId};
use crate::probability::SensorParams;
use crate::simulator::{
    detection_phase, replication_rng, response_phase, DetectionField, Estimate, SimError, TruthScenario, EVENT_LANE,
    NORMAL_LANE,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CalibrationError {
    #[error("insufficient data: {0}")]
    InsufficientData(&'static str),
    #[error("pc inestimable: no node-observation with a detection (y = 1)")]
    PcInestimable,
    #[error("pw inestimable: no node-observation without a detection (y = 0)")]
    PwInestimable,
    #[error("run {run}: {reason}")]
    MalformedRun { run: usize, reason: String },
    #[error(transparent)]
    Grid(#[from] GridError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunKind {
    Normal,
    Event(NodeId),
}

/// One controlled experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationRun {
    pub kind: RunKind,
    pub detections: Option<DetectionField>,
    pub responses: ResponseField,
}

fn mean_and_se(values: &[f64]) -> Estimate {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let std_error = if values.len() < 2 {
        f64::NAN
    } else {
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        (var / n).sqrt()
    };
    Estimate { value: mean, std_error }
}

fn pooled_proportion(hits: u64, total: u64) -> Estimate {
    let p = hits as f64 / total as f64;
    Estimate {
        value: p,
        std_error: (p * (1.0 - p) / total as f64).sqrt(),
    }
}

/// Mean over normal runs of the proportion of responding nodes; the standard
/// error is the sample SD of the per-run proportions over `sqrt(runs)`
/// (NaN for a single run). Event runs are ignored.
pub fn estimate_pw(runs: &[CalibrationRun]) -> Result<Estimate, CalibrationError> {
    let proportions: Vec<f64> = runs
        .iter()
        .filter(|r| r.kind == RunKind::Normal && !r.responses.is_empty())
        .map(|r| r.responses.count_ones() as f64 / r.responses.len() as f64)
        .collect();
    if proportions.is_empty() {
        return Err(CalibrationError::InsufficientData("no normal runs"));
    }
    Ok(mean_and_se(&proportions))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectionEstimates {
    pub p1: Estimate,
    pub p2: Estimate,
}

/// `p1` is the mean of `y` at the event node; `p2` the mean over runs of the
/// per-run detection proportion among the event node's neighbours (runs whose
/// event node has no neighbours are skipped for `p2`).
pub fn estimate_detection(runs: &[CalibrationRun], topology: &GridTopology) -> Result<DetectionEstimates, CalibrationError> {
    let mut center = Vec::new();
    let mut neighbor = Vec::new();
    for (run, r) in runs.iter().enumerate() {
        let RunKind::Event(node) = r.kind else {
            continue;
        };
        let y = r
            .detections
            .as_ref()
            .ok_or(CalibrationError::InsufficientData("event run without detections"))?;
        if y.len() != topology.len() {
            return Err(CalibrationError::MalformedRun {
                run,
                reason: format!("{} detections for {} nodes", y.len(), topology.len()),
            });
        }
        let i = topology.index_of(node)?;
        center.push(if y.get(i) { 1.0 } else { 0.0 });
        let nb = topology.neighbor_indices(i);
        if !nb.is_empty() {
            neighbor.push(nb.iter().filter(|&&j| y.get(j)).count() as f64 / nb.len() as f64);
        }
    }
    if center.is_empty() {
        return Err(CalibrationError::InsufficientData("no event runs"));
    }
    if neighbor.is_empty() {
        return Err(CalibrationError::InsufficientData("no event node has neighbours"));
    }
    Ok(DetectionEstimates {
        p1: mean_and_se(&center),
        p2: mean_and_se(&neighbor),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResponseEstimates {
    pub pc: Estimate,
    pub pw: Estimate,
    pub detected: u64,
    pub undetected: u64,
}

/// Pooled `P(z = 1 | y = 1)` and `P(z = 1 | y = 0)` over every node of every
/// run with recorded detections.
pub fn estimate_response(runs: &[CalibrationRun]) -> Result<ResponseEstimates, CalibrationError> {
    let (mut detected, mut detected_hits, mut undetected, mut undetected_hits) = (0u64, 0u64, 0u64, 0u64);
    let mut any = false;
    for (run, r) in runs.iter().enumerate() {
        let Some(y) = &r.detections else {
            continue;
        };
        if y.len() != r.responses.len() {
            return Err(CalibrationError::MalformedRun {
                run,
                reason: "detection and response fields differ in length".into(),
            });
        }
        any = true;
        for (&yi, &zi) in y.bits().iter().zip(r.responses.bits()) {
            if yi {
                detected += 1;
                detected_hits += zi as u64;
            } else {
                undetected += 1;
                undetected_hits += zi as u64;
            }
        }
    }
    if !any {
        return Err(CalibrationError::InsufficientData("no runs with detections"));
    }
    if detected == 0 {
        return Err(CalibrationError::PcInestimable);
    }
    if undetected == 0 {
        return Err(CalibrationError::PwInestimable);
    }
    Ok(ResponseEstimates {
        pc: pooled_proportion(detected_hits, detected),
        pw: pooled_proportion(undetected_hits, undetected),
        detected,
        undetected,
    })
}

/// Simulate `count` controlled runs with recorded detections. Run `r` uses
/// the same per-replication stream layout as the experiment harness.
pub fn generate_runs(
    params: &SensorParams,
    topology: &GridTopology,
    truth: TruthScenario,
    count: u64,
    seed: u64,
) -> Result<Vec<CalibrationRun>, SimError> {
    (0..count)
        .map(|r| {
            let lane = if truth == TruthScenario::Normal { NORMAL_LANE } else { EVENT_LANE };
            let mut rng = replication_rng(seed, r, lane);
            let model = truth.draw(topology, &mut rng);
            let y = detection_phase(model, params, topology, &mut rng)?;
            let z = response_phase(&y, params, &mut rng);
            let kind = match model {
                ModelId::Normal => RunKind::Normal,
                ModelId::Event(n) => RunKind::Event(n),
            };
            Ok(CalibrationRun {
                kind,
                detections: Some(y),
                responses: z,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> GridTopology {
        GridTopology::new(4, 4).unwrap()
    }

    fn normal_run(g: &GridTopology, responders: &[NodeId]) -> CalibrationRun {
        CalibrationRun {
            kind: RunKind::Normal,
            detections: None,
            responses: ResponseField::with_responders(g, responders).unwrap(),
        }
    }

    fn det(g: &GridTopology, on: &[NodeId]) -> DetectionField {
        let mut bits = vec![false; g.len()];
        for n in on {
            bits[g.index_of(*n).unwrap()] = true;
        }
        DetectionField::new(bits, g).unwrap()
    }

    #[test]
    fn pw_from_silent_runs_is_zero() {
        let g = grid();
        let runs = vec![normal_run(&g, &[]), normal_run(&g, &[])];
        let e = estimate_pw(&runs).unwrap();
        assert_eq!(e.value, 0.0);
        assert_eq!(e.std_error, 0.0);
    }

    #[test]
    fn pw_is_mean_of_run_proportions() {
        // 1000-node grid: 2 and 4 responders give 0.002 and 0.004
        let g = GridTopology::new(10, 100).unwrap();
        let nodes = g.nodes();
        let runs = vec![normal_run(&g, &nodes[..2]), normal_run(&g, &nodes[..4])];
        let e = estimate_pw(&runs).unwrap();
        assert!((e.value - 0.003).abs() < 1e-15);
        assert!((e.std_error - 0.001).abs() < 1e-12);
    }

    #[test]
    fn pw_needs_runs() {
        assert!(matches!(estimate_pw(&[]), Err(CalibrationError::InsufficientData(_))));
        let e = estimate_pw(&[normal_run(&grid(), &[NodeId::new(0, 0)])]).unwrap();
        assert_eq!(e.value, 1.0 / 16.0);
        assert!(e.std_error.is_nan());
    }

    #[test]
    fn detection_estimates() {
        let g = grid();
        let node = NodeId::new(1, 1);
        let nb = g.neighbors(node).unwrap().to_vec();
        let run = |y: DetectionField| CalibrationRun {
            kind: RunKind::Event(node),
            detections: Some(y),
            responses: ResponseField::zeros(&g),
        };
        let mut on = vec![node];
        on.extend_from_slice(&nb[..3]);
        let runs = vec![run(det(&g, &on)), run(det(&g, &[node]))];
        let e = estimate_detection(&runs, &g).unwrap();
        assert_eq!(e.p1.value, 1.0);
        assert!((e.p2.value - 0.25).abs() < 1e-15);
    }

    #[test]
    fn boundary_event_uses_its_own_neighbours() {
        let g = grid();
        let corner = NodeId::new(0, 0);
        assert_eq!(g.degree(corner).unwrap(), 2);
        let nb = g.neighbors(corner).unwrap().to_vec();
        let runs = vec![CalibrationRun {
            kind: RunKind::Event(corner),
            detections: Some(det(&g, &[nb[0]])),
            responses: ResponseField::zeros(&g),
        }];
        let e = estimate_detection(&runs, &g).unwrap();
        assert_eq!(e.p1.value, 0.0);
        assert_eq!(e.p2.value, 0.5);
    }

    #[test]
    fn detection_needs_recorded_y() {
        let g = grid();
        let runs = vec![CalibrationRun {
            kind: RunKind::Event(NodeId::new(1, 1)),
            detections: None,
            responses: ResponseField::zeros(&g),
        }];
        assert!(matches!(
            estimate_detection(&runs, &g),
            Err(CalibrationError::InsufficientData(_))
        ));
        assert!(matches!(
            estimate_detection(&[normal_run(&g, &[])], &g),
            Err(CalibrationError::InsufficientData(_))
        ));
    }

    #[test]
    fn perfect_channel() {
        let g = grid();
        let on = [NodeId::new(1, 1), NodeId::new(1, 2)];
        let runs = vec![CalibrationRun {
            kind: RunKind::Event(on[0]),
            detections: Some(det(&g, &on)),
            responses: ResponseField::with_responders(&g, &on).unwrap(),
        }];
        let e = estimate_response(&runs).unwrap();
        assert_eq!(e.pc.value, 1.0);
        assert_eq!(e.pw.value, 0.0);
        assert_eq!(e.detected, 2);
        assert_eq!(e.undetected, 14);
    }

    #[test]
    fn pc_inestimable_without_detections() {
        let g = grid();
        let runs = vec![CalibrationRun {
            kind: RunKind::Normal,
            detections: Some(DetectionField::zeros(&g)),
            responses: ResponseField::zeros(&g),
        }];
        assert_eq!(estimate_response(&runs), Err(CalibrationError::PcInestimable));
        assert!(matches!(
            estimate_response(&[normal_run(&g, &[])]),
            Err(CalibrationError::InsufficientData(_))
        ));
    }
}
