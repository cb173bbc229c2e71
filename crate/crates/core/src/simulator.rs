//! Seeded Monte Carlo harness for the two-phase sensing process.
//!
//! Each replication draws from its own ChaCha8 stream: the key is the run
//! seed and the 64-bit stream id is `2 * replication + lane`, with lane 0 for
//! normal-truth runs and lane 1 for event-truth runs. Replications are
//! therefore independent of evaluation order, and tallies are integer sums,
//! so serial and parallel execution produce identical summaries.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::detectors::{DetectError, Evidence, ModelId, ResponseField};
use crate::hexgrid::{GridError, GridTopology, NodeId};
use crate::probability::{derive_params, DerivedParams, ParamError, SensorParams};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Param(#[from] ParamError),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Detect(#[from] DetectError),
}

/// Private detections `y_N`, row-major.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct DetectionField {
    bits: Vec<bool>,
}

impl DetectionField {
    pub fn new(bits: Vec<bool>, topology: &GridTopology) -> Result<Self, SimError> {
        if bits.len() != topology.len() {
            return Err(SimError::Config(format!(
                "detection field has {} values for {} nodes",
                bits.len(),
                topology.len()
            )));
        }
        Ok(Self { bits })
    }

    pub fn zeros(topology: &GridTopology) -> Self {
        Self {
            bits: vec![false; topology.len()],
        }
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn get(&self, index: usize) -> bool {
        self.bits[index]
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }
}

/// Ground truth for a replication.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TruthScenario {
    Normal,
    EventAt(NodeId),
    /// Event node drawn uniformly over all nodes, boundary included.
    EventUniform,
}

impl TruthScenario {
    pub fn draw<R: Rng + ?Sized>(&self, topology: &GridTopology, rng: &mut R) -> ModelId {
        match *self {
            TruthScenario::Normal => ModelId::Normal,
            TruthScenario::EventAt(n) => ModelId::Event(n),
            TruthScenario::EventUniform => ModelId::Event(topology.node_at(rng.gen_range(0..topology.len()))),
        }
    }
}

/// Detection phase: under `M_N` the event node detects with `p1`, each
/// neighbour with `p2`, nobody else; under `M_0` nobody detects.
pub fn detection_phase<R: Rng + ?Sized>(
    truth: ModelId,
    params: &SensorParams,
    topology: &GridTopology,
    rng: &mut R,
) -> Result<DetectionField, SimError> {
    let mut field = DetectionField::zeros(topology);
    if let ModelId::Event(node) = truth {
        let i = topology.index_of(node)?;
        field.bits[i] = rng.gen_bool(params.p1);
        for &j in topology.neighbor_indices(i) {
            field.bits[j] = rng.gen_bool(params.p2);
        }
    }
    Ok(field)
}

/// Response phase: each node responds with `pc` after a detection and with
/// `pw` otherwise, independently.
pub fn response_phase<R: Rng + ?Sized>(detections: &DetectionField, params: &SensorParams, rng: &mut R) -> ResponseField {
    let bits = detections
        .bits
        .iter()
        .map(|&y| rng.gen_bool(if y { params.pc } else { params.pw }))
        .collect();
    ResponseField::from_bits_unchecked(bits)
}

/// The per-replication random stream.
pub fn replication_rng(seed: u64, replication: u64, lane: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replication.wrapping_mul(2).wrapping_add(lane));
    rng
}

pub const NORMAL_LANE: u64 = 0;
pub const EVENT_LANE: u64 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scenario {
    Normal,
    Event,
    Both,
}

impl Scenario {
    pub fn runs_normal(&self) -> bool {
        matches!(self, Scenario::Normal | Scenario::Both)
    }

    pub fn runs_event(&self) -> bool {
        matches!(self, Scenario::Event | Scenario::Both)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Execution {
    Serial,
    Parallel,
}

pub const DEFAULT_OCCAM_C: f64 = 0.9;

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub params: SensorParams,
    pub rows: usize,
    pub cols: usize,
    pub scenario: Scenario,
    /// Event placement on event runs; `None` draws it uniformly.
    pub event_node: Option<NodeId>,
    pub replications: u64,
    pub seed: u64,
    pub occam_c: f64,
}

impl ExperimentConfig {
    /// Defaults: 32×32 grid, 10 000 replications, both scenarios.
    pub fn new(params: SensorParams) -> Self {
        Self {
            params,
            rows: 32,
            cols: 32,
            scenario: Scenario::Both,
            event_node: None,
            replications: 10_000,
            seed: 0,
            occam_c: DEFAULT_OCCAM_C,
        }
    }

    fn validate(&self) -> Result<(GridTopology, DerivedParams), SimError> {
        if self.replications == 0 {
            return Err(SimError::Config("replications must be at least 1".into()));
        }
        if !(self.occam_c > 0.0 && self.occam_c < 1.0) {
            return Err(SimError::Config(format!("occam C = {} outside (0, 1)", self.occam_c)));
        }
        let params = SensorParams::new(self.params.p1, self.params.p2, self.params.pc, self.params.pw)?;
        let dp = derive_params(params)?;
        let topology = GridTopology::new(self.rows, self.cols)?;
        if let Some(n) = self.event_node {
            topology.index_of(n)?;
        }
        Ok((topology, dp))
    }

    fn event_truth(&self) -> TruthScenario {
        match self.event_node {
            Some(n) => TruthScenario::EventAt(n),
            None => TruthScenario::EventUniform,
        }
    }
}

/// What one event-truth replication produced under every detector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EventOutcome {
    pub truth: NodeId,
    pub single_correct: bool,
    pub single_searched: u32,
    pub single_normal: bool,
    pub argmax_hit: bool,
    pub argmax_searched: u32,
    pub neighborhood_hit: bool,
    pub neighborhood_searched: u32,
    pub occam_hit: bool,
    pub occam_searched: u32,
}

/// What one normal-truth replication produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NormalOutcome {
    pub accepted_normal: bool,
    pub searched: u32,
}

fn simulate_field(truth: ModelId, params: &SensorParams, topology: &GridTopology, rng: &mut ChaCha8Rng) -> Result<(DetectionField, ResponseField), SimError> {
    let y = detection_phase(truth, params, topology, rng)?;
    let z = response_phase(&y, params, rng);
    Ok((y, z))
}

pub fn normal_replication(
    config: &ExperimentConfig,
    topology: &GridTopology,
    dp: &DerivedParams,
    replication: u64,
) -> Result<NormalOutcome, SimError> {
    let mut rng = replication_rng(config.seed, replication, NORMAL_LANE);
    let (_, field) = simulate_field(ModelId::Normal, &config.params, topology, &mut rng)?;
    let ev = Evidence::compute(&field, topology, dp)?;
    let chosen = ev.select_single(&mut rng).chosen.expect("single selection");
    let accepted_normal = chosen == ModelId::Normal;
    Ok(NormalOutcome {
        accepted_normal,
        searched: u32::from(!accepted_normal),
    })
}

fn event_field(
    config: &ExperimentConfig,
    topology: &GridTopology,
    replication: u64,
) -> Result<(NodeId, ResponseField, ChaCha8Rng), SimError> {
    let mut rng = replication_rng(config.seed, replication, EVENT_LANE);
    let truth = config.event_truth().draw(topology, &mut rng);
    let (_, field) = simulate_field(truth, &config.params, topology, &mut rng)?;
    Ok((truth.event_node().expect("event truth"), field, rng))
}

pub fn event_replication(
    config: &ExperimentConfig,
    topology: &GridTopology,
    dp: &DerivedParams,
    replication: u64,
) -> Result<EventOutcome, SimError> {
    let (truth, field, mut rng) = event_field(config, topology, replication)?;
    let target = ModelId::Event(truth);
    let ev = Evidence::compute(&field, topology, dp)?;
    let single = ev.select_single(&mut rng);
    let argmax = ev.select_argmax_set();
    let neighborhood = ev.select_with_neighborhood();
    let occam = ev.select_occam(config.occam_c)?;
    Ok(EventOutcome {
        truth,
        single_correct: single.chosen == Some(target),
        single_searched: single.search_count() as u32,
        single_normal: single.chosen == Some(ModelId::Normal),
        argmax_hit: argmax.contains(&target),
        argmax_searched: argmax.search_count() as u32,
        neighborhood_hit: neighborhood.contains(&target),
        neighborhood_searched: neighborhood.search_count() as u32,
        occam_hit: occam.contains(&target),
        occam_searched: occam.search_count() as u32,
    })
}

/// Integer tallies of a success indicator or a count.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Tally {
    pub n: u64,
    pub sum: u64,
    pub sum_sq: u64,
}

impl Tally {
    pub fn push(&mut self, value: u64) {
        self.n += 1;
        self.sum += value;
        self.sum_sq += value * value;
    }

    pub fn mean(&self) -> f64 {
        self.sum as f64 / self.n as f64
    }

    /// Binomial standard error `sqrt(p(1-p)/n)`.
    pub fn proportion(&self) -> Estimate {
        let p = self.mean();
        Estimate {
            value: p,
            std_error: (p * (1.0 - p) / self.n as f64).sqrt(),
        }
    }

    /// Sample mean with `sd / sqrt(n)`.
    pub fn mean_estimate(&self) -> Estimate {
        let n = self.n as f64;
        let mean = self.mean();
        let std_error = if self.n < 2 {
            0.0
        } else {
            // integer sums keep this exact up to the final division
            let ss = self.sum_sq as f64 - self.sum as f64 * self.sum as f64 / n;
            (ss.max(0.0) / (n - 1.0)).sqrt() / n.sqrt()
        };
        Estimate { value: mean, std_error }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub std_error: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct NormalTallies {
    pub success: Tally,
    pub searched: Tally,
}

impl NormalTallies {
    fn add(&mut self, o: &NormalOutcome) {
        self.success.push(o.accepted_normal as u64);
        self.searched.push(o.searched as u64);
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EventTallies {
    pub single: Tally,
    pub single_searched: Tally,
    pub single_normal: Tally,
    pub argmax: Tally,
    pub argmax_searched: Tally,
    pub neighborhood: Tally,
    pub neighborhood_searched: Tally,
    pub occam: Tally,
    pub occam_searched: Tally,
}

impl EventTallies {
    fn add(&mut self, o: &EventOutcome) {
        self.single.push(o.single_correct as u64);
        self.single_searched.push(o.single_searched as u64);
        self.single_normal.push(o.single_normal as u64);
        self.argmax.push(o.argmax_hit as u64);
        self.argmax_searched.push(o.argmax_searched as u64);
        self.neighborhood.push(o.neighborhood_hit as u64);
        self.neighborhood_searched.push(o.neighborhood_searched as u64);
        self.occam.push(o.occam_hit as u64);
        self.occam_searched.push(o.occam_searched as u64);
    }
}

/// Estimates for the normal-truth metrics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalMetrics {
    /// Proportion of runs where `M_0` was selected.
    pub s1: Estimate,
    pub n1: Estimate,
}

/// Estimates for the event-truth metrics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EventMetrics {
    pub s2: Estimate,
    pub n2: Estimate,
    pub s3: Estimate,
    pub n3: Estimate,
    pub s4: Estimate,
    pub n4: Estimate,
    pub s5: Estimate,
    pub n5: Estimate,
    pub false_negative_rate: Estimate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationSummary {
    pub config: ExperimentConfig,
    pub normal_tallies: Option<NormalTallies>,
    pub event_tallies: Option<EventTallies>,
    pub normal: Option<NormalMetrics>,
    pub event: Option<EventMetrics>,
}

impl SimulationSummary {
    fn from_tallies(config: ExperimentConfig, normal: Option<NormalTallies>, event: Option<EventTallies>) -> Self {
        let normal_metrics = normal.map(|t| NormalMetrics {
            s1: t.success.proportion(),
            n1: t.searched.mean_estimate(),
        });
        let event_metrics = event.map(|t| EventMetrics {
            s2: t.single.proportion(),
            n2: t.single_searched.mean_estimate(),
            s3: t.argmax.proportion(),
            n3: t.argmax_searched.mean_estimate(),
            s4: t.neighborhood.proportion(),
            n4: t.neighborhood_searched.mean_estimate(),
            s5: t.occam.proportion(),
            n5: t.occam_searched.mean_estimate(),
            false_negative_rate: t.single_normal.proportion(),
        });
        Self {
            config,
            normal_tallies: normal,
            event_tallies: event,
            normal: normal_metrics,
            event: event_metrics,
        }
    }
}

fn run_replications<T, F>(replications: u64, execution: Execution, f: F) -> Result<Vec<T>, SimError>
where
    T: Send,
    F: Fn(u64) -> Result<T, SimError> + Sync + Send,
{
    match execution {
        Execution::Serial => (0..replications).map(f).collect(),
        Execution::Parallel => (0..replications).into_par_iter().map(f).collect(),
    }
}

pub fn run_experiment(config: &ExperimentConfig) -> Result<SimulationSummary, SimError> {
    run_experiment_with(config, Execution::Parallel)
}

pub fn run_experiment_with(config: &ExperimentConfig, execution: Execution) -> Result<SimulationSummary, SimError> {
    let (topology, dp) = config.validate()?;
    let normal = if config.scenario.runs_normal() {
        let outcomes = run_replications(config.replications, execution, |r| {
            normal_replication(config, &topology, &dp, r)
        })?;
        let mut t = NormalTallies::default();
        outcomes.iter().for_each(|o| t.add(o));
        Some(t)
    } else {
        None
    };
    let event = if config.scenario.runs_event() {
        let outcomes = run_replications(config.replications, execution, |r| {
            event_replication(config, &topology, &dp, r)
        })?;
        let mut t = EventTallies::default();
        outcomes.iter().for_each(|o| t.add(o));
        Some(t)
    } else {
        None
    };
    Ok(SimulationSummary::from_tallies(config.clone(), normal, event))
}

/// Per-replication outcomes, for trace output.
pub fn trace_experiment(config: &ExperimentConfig) -> Result<(Vec<NormalOutcome>, Vec<EventOutcome>), SimError> {
    let (topology, dp) = config.validate()?;
    let normal = if config.scenario.runs_normal() {
        run_replications(config.replications, Execution::Parallel, |r| {
            normal_replication(config, &topology, &dp, r)
        })?
    } else {
        Vec::new()
    };
    let event = if config.scenario.runs_event() {
        run_replications(config.replications, Execution::Parallel, |r| {
            event_replication(config, &topology, &dp, r)
        })?
    } else {
        Vec::new()
    };
    Ok((normal, event))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepPoint {
    pub threshold: f64,
    pub success: Estimate,
    pub search: Estimate,
    pub success_tally: Tally,
    pub search_tally: Tally,
}

/// Occam-window success and search counts for several thresholds `C`, all
/// evaluated on the same event-truth fields as [`run_experiment`] uses.
pub fn threshold_sweep(config: &ExperimentConfig, thresholds: &[f64]) -> Result<Vec<SweepPoint>, SimError> {
    threshold_sweep_with(config, thresholds, Execution::Parallel)
}

pub fn threshold_sweep_with(config: &ExperimentConfig, thresholds: &[f64], execution: Execution) -> Result<Vec<SweepPoint>, SimError> {
    if let Some(&bad) = thresholds.iter().find(|&&c| !(c > 0.0 && c < 1.0)) {
        return Err(DetectError::InvalidThreshold(bad).into());
    }
    let (topology, dp) = config.validate()?;
    let per_rep = run_replications(config.replications, execution, |r| {
        let (truth, field, _) = event_field(config, &topology, r)?;
        let target = ModelId::Event(truth);
        let ev = Evidence::compute(&field, &topology, &dp)?;
        thresholds
            .iter()
            .map(|&c| {
                let sel = ev.select_occam(c)?;
                Ok((sel.contains(&target), sel.search_count() as u64))
            })
            .collect::<Result<Vec<_>, SimError>>()
    })?;
    let mut tallies = vec![(Tally::default(), Tally::default()); thresholds.len()];
    for rep in &per_rep {
        for (slot, &(hit, searched)) in tallies.iter_mut().zip(rep) {
            slot.0.push(hit as u64);
            slot.1.push(searched);
        }
    }
    Ok(thresholds
        .iter()
        .zip(tallies)
        .map(|(&threshold, (s, n))| SweepPoint {
            threshold,
            success: s.proportion(),
            search: n.mean_estimate(),
            success_tally: s,
            search_tally: n,
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(p1: f64, p2: f64, pc: f64, pw: f64) -> SensorParams {
        SensorParams::new(p1, p2, pc, pw).unwrap()
    }

    #[test]
    fn normal_truth_detects_nothing() {
        let g = GridTopology::new(8, 8).unwrap();
        let p = params(0.9, 0.5, 0.9, 0.01);
        for r in 0..50 {
            let mut rng = replication_rng(1, r, 0);
            let y = detection_phase(ModelId::Normal, &p, &g, &mut rng).unwrap();
            assert!(y.bits().iter().all(|&b| !b));
        }
    }

    #[test]
    fn detections_confined_to_closed_neighborhood() {
        let g = GridTopology::new(8, 8).unwrap();
        let p = params(0.9, 0.5, 0.9, 0.01);
        let node = NodeId::new(3, 4);
        let i = g.index_of(node).unwrap();
        for r in 0..200 {
            let mut rng = replication_rng(2, r, 1);
            let y = detection_phase(ModelId::Event(node), &p, &g, &mut rng).unwrap();
            for j in 0..g.len() {
                if j != i && !g.neighbor_indices(i).contains(&j) {
                    assert!(!y.get(j));
                }
            }
        }
    }

    #[test]
    fn certain_center_only_detection() {
        let g = GridTopology::new(8, 8).unwrap();
        let p = params(1.0, 0.0, 0.9, 0.01);
        let node = NodeId::new(4, 4);
        let mut rng = replication_rng(3, 0, 1);
        let y = detection_phase(ModelId::Event(node), &p, &g, &mut rng).unwrap();
        let ones: Vec<usize> = (0..g.len()).filter(|&j| y.get(j)).collect();
        assert_eq!(ones, vec![g.index_of(node).unwrap()]);
    }

    #[test]
    fn identity_channel() {
        let g = GridTopology::new(8, 8).unwrap();
        let p = params(0.7, 0.6, 1.0, 0.0);
        let node = NodeId::new(4, 4);
        for r in 0..100 {
            let mut rng = replication_rng(4, r, 1);
            let y = detection_phase(ModelId::Event(node), &p, &g, &mut rng).unwrap();
            let z = response_phase(&y, &p, &mut rng);
            assert_eq!(y.bits(), z.bits());
        }
    }

    #[test]
    fn invalid_configs_rejected() {
        let p = params(0.9, 0.5, 0.9, 0.01);
        let mut c = ExperimentConfig::new(p);
        c.replications = 0;
        assert!(matches!(run_experiment(&c), Err(SimError::Config(_))));
        let mut c = ExperimentConfig::new(p);
        c.occam_c = 1.0;
        assert!(matches!(run_experiment(&c), Err(SimError::Config(_))));
        let mut c = ExperimentConfig::new(p);
        c.rows = 0;
        assert!(matches!(run_experiment(&c), Err(SimError::Grid(_))));
        let mut c = ExperimentConfig::new(p);
        c.event_node = Some(NodeId::new(40, 0));
        assert!(matches!(run_experiment(&c), Err(SimError::Grid(_))));
        let mut c = ExperimentConfig::new(p);
        c.params.pc = 0.001;
        assert!(matches!(run_experiment(&c), Err(SimError::Param(_))));
        let c = ExperimentConfig::new(p);
        assert!(matches!(
            threshold_sweep(&c, &[0.5, 1.2]),
            Err(SimError::Detect(DetectError::InvalidThreshold(_)))
        ));
    }

    #[test]
    fn tally_statistics() {
        let mut t = Tally::default();
        for v in [1u64, 2, 3, 4] {
            t.push(v);
        }
        let e = t.mean_estimate();
        assert_eq!(e.value, 2.5);
        // sample sd of 1..4 is sqrt(5/3)
        assert!((e.std_error - (5.0f64 / 3.0).sqrt() / 2.0).abs() < 1e-12);
        let mut b = Tally::default();
        b.push(1);
        b.push(0);
        let p = b.proportion();
        assert_eq!(p.value, 0.5);
        assert!((p.std_error - 0.125f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn streams_are_distinct_and_reproducible() {
        let a: Vec<u64> = (0..4).map(|_| 0).scan(replication_rng(9, 5, 1), |r, _| Some(r.gen())).collect();
        let b: Vec<u64> = (0..4).map(|_| 0).scan(replication_rng(9, 5, 1), |r, _| Some(r.gen())).collect();
        let c: Vec<u64> = (0..4).map(|_| 0).scan(replication_rng(9, 5, 0), |r, _| Some(r.gen())).collect();
        let d: Vec<u64> = (0..4).map(|_| 0).scan(replication_rng(10, 5, 1), |r, _| Some(r.gen())).collect();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_ne!(a, d);
    }
}
