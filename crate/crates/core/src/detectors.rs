//! Base-station decision rules.
//!
//! Every rule works from one [`Evidence`] value: per-node statistics plus a
//! score for each of the `|R| + 1` models. A score is the model's
//! log-likelihood up to an additive constant shared by all models. When
//! `L_0 > 0` (always the case for `pw > 0`) that constant is `ln L_0`, so the
//! event scores are exactly `delta_N = ln L_N - ln L_0` and `M_0` scores 0.
//! With `pw = 0` and at least one response, `L_0 = 0`; the scores then fall
//! back to absolute log-likelihoods and `M_0` scores `-inf`.
//!
//! Ties are detected with exact floating-point equality. Nodes with equal
//! `(z, t, k)` read the same cached value, so symmetric configurations tie
//! exactly.

use std::cmp::Ordering;
use std::collections::BTreeSet;
use std::fmt;

use rand::Rng;
use thiserror::Error;

use crate::hexgrid::{GridError, GridTopology, NodeId};
use crate::probability::{DerivedParams, ParamError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DetectError {
    #[error("response field has {got} values but the grid has {expected} nodes")]
    FieldSize { expected: usize, got: usize },
    #[error("threshold {0} must lie strictly between 0 and 1")]
    InvalidThreshold(f64),
    #[error("invalid priors: {0}")]
    InvalidPriors(String),
    #[error("posterior undefined: every model has zero prior mass or zero likelihood")]
    UndefinedPosterior,
    #[error(transparent)]
    Param(#[from] ParamError),
    #[error(transparent)]
    Grid(#[from] GridError),
}

/// `M_0` or `M_N`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ModelId {
    Normal,
    Event(NodeId),
}

impl ModelId {
    pub fn event_node(&self) -> Option<NodeId> {
        match self {
            ModelId::Normal => None,
            ModelId::Event(n) => Some(*n),
        }
    }
}

impl fmt::Display for ModelId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelId::Normal => f.write_str("normal"),
            ModelId::Event(n) => write!(f, "event{n}"),
        }
    }
}

/// Observed responses `z_N`, one per node in row-major order.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ResponseField {
    bits: Vec<bool>,
}

impl ResponseField {
    pub fn new(bits: Vec<bool>, topology: &GridTopology) -> Result<Self, DetectError> {
        if bits.len() != topology.len() {
            return Err(DetectError::FieldSize {
                expected: topology.len(),
                got: bits.len(),
            });
        }
        Ok(Self { bits })
    }

    pub fn zeros(topology: &GridTopology) -> Self {
        Self {
            bits: vec![false; topology.len()],
        }
    }

    /// Field with exactly the listed nodes responding.
    pub fn with_responders(topology: &GridTopology, responders: &[NodeId]) -> Result<Self, DetectError> {
        let mut field = Self::zeros(topology);
        for &n in responders {
            field.bits[topology.index_of(n)?] = true;
        }
        Ok(field)
    }

    pub(crate) fn from_bits_unchecked(bits: Vec<bool>) -> Self {
        Self { bits }
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

    pub fn count_ones(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }
}

/// Local statistics of one node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NodeStatistics {
    pub z: bool,
    /// Responding neighbours, `t_N`.
    pub t: usize,
    /// Neighbour count, `k(N)`.
    pub k: usize,
    /// `ln L_N - ln L_0`; may be infinite at `pw = 0`.
    pub delta: f64,
    pub q: Option<f64>,
}

/// Per-node `(z, t, k, delta, q)` in row-major order.
pub fn compute_statistics(
    field: &ResponseField,
    topology: &GridTopology,
    dp: &DerivedParams,
) -> Result<Vec<NodeStatistics>, DetectError> {
    Ok(Evidence::compute(field, topology, dp)?.stats)
}

/// Statistics and model scores for one response field.
#[derive(Debug, Clone)]
pub struct Evidence<'a> {
    topology: &'a GridTopology,
    stats: Vec<NodeStatistics>,
    scores: Vec<f64>,
    normal_score: f64,
    max_event_score: f64,
}

impl<'a> Evidence<'a> {
    pub fn compute(field: &ResponseField, topology: &'a GridTopology, dp: &DerivedParams) -> Result<Self, DetectError> {
        if field.len() != topology.len() {
            return Err(DetectError::FieldSize {
                expected: topology.len(),
                got: field.len(),
            });
        }
        let bits = field.bits();
        let stats: Vec<NodeStatistics> = (0..topology.len())
            .map(|i| {
                let nb = topology.neighbor_indices(i);
                let z = bits[i];
                let t = nb.iter().filter(|&&j| bits[j]).count();
                let k = nb.len();
                NodeStatistics {
                    z,
                    t,
                    k,
                    delta: dp.cached_delta(z, t, k),
                    q: dp.q_value(z, t, k),
                }
            })
            .collect();

        let responders = field.count_ones();
        let null_possible = dp.params.pw > 0.0 || responders == 0;
        let (scores, normal_score) = if null_possible {
            (stats.iter().map(|s| s.delta).collect::<Vec<_>>(), 0.0)
        } else {
            // pw = 0: any response outside the closed neighbourhood of N is
            // impossible under M_N, responses inside it are scored locally.
            let scores = stats
                .iter()
                .map(|s| {
                    if responders > s.z as usize + s.t {
                        f64::NEG_INFINITY
                    } else {
                        absolute_local_loglik(s, dp)
                    }
                })
                .collect();
            (scores, f64::NEG_INFINITY)
        };
        let max_event_score = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Ok(Self {
            topology,
            stats,
            scores,
            normal_score,
            max_event_score,
        })
    }

    pub fn topology(&self) -> &GridTopology {
        self.topology
    }

    pub fn statistics(&self) -> &[NodeStatistics] {
        &self.stats
    }

    /// Event-model scores in row-major order.
    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn normal_score(&self) -> f64 {
        self.normal_score
    }

    pub fn max_event_score(&self) -> f64 {
        self.max_event_score
    }

    /// Indices of event models attaining the maximum score.
    pub fn argmax_indices(&self) -> Vec<usize> {
        let max = self.max_event_score;
        self.scores
            .iter()
            .enumerate()
            .filter(|(_, &s)| s == max)
            .map(|(i, _)| i)
            .collect()
    }

    /// `M_0` is accepted only if every event model scores strictly below it.
    pub fn normal_accepted(&self) -> bool {
        self.max_event_score < self.normal_score
    }

    fn event(&self, index: usize) -> ModelId {
        ModelId::Event(self.topology.node_at(index))
    }

    /// Maximum-likelihood selection with a uniform random tie-break.
    pub fn select_single<R: Rng + ?Sized>(&self, rng: &mut R) -> SelectionResult {
        let chosen = if self.normal_accepted() {
            ModelId::Normal
        } else {
            let ties = self.argmax_indices();
            let pick = if ties.len() == 1 { 0 } else { rng.gen_range(0..ties.len()) };
            self.event(ties[pick])
        };
        SelectionResult::single(chosen)
    }

    /// Every model attaining the maximum likelihood, `M_0` included when it does.
    pub fn select_argmax_set(&self) -> SelectionResult {
        let mut candidates = BTreeSet::new();
        if self.normal_score >= self.max_event_score {
            candidates.insert(ModelId::Normal);
        }
        if !self.normal_accepted() {
            candidates.extend(self.argmax_indices().into_iter().map(|i| self.event(i)));
        }
        SelectionResult::set(candidates)
    }

    /// Argmax set plus the grid neighbours of each event model in it.
    pub fn select_with_neighborhood(&self) -> SelectionResult {
        let mut result = self.select_argmax_set();
        let extra: Vec<ModelId> = result
            .candidates
            .iter()
            .filter_map(ModelId::event_node)
            .flat_map(|n| {
                let i = self.topology.index_of(n).expect("node from this grid");
                self.topology.neighbor_indices(i).iter().map(|&j| self.event(j))
            })
            .collect();
        result.candidates.extend(extra);
        result
    }

    /// Event models with `L_K / max_N L_N > C`, evaluated as
    /// `delta_K > max delta + ln C`.
    pub fn select_occam(&self, threshold: f64) -> Result<SelectionResult, DetectError> {
        check_threshold(threshold)?;
        let cutoff = self.max_event_score + threshold.ln();
        Ok(self.occam_with_cutoff(cutoff))
    }

    fn occam_with_cutoff(&self, cutoff: f64) -> SelectionResult {
        let candidates = self
            .scores
            .iter()
            .enumerate()
            .filter(|(_, &s)| s > cutoff)
            .map(|(i, _)| self.event(i))
            .collect();
        let mut result = SelectionResult::set(candidates);
        result.normal_dominates = self.normal_score >= self.max_event_score;
        result
    }

    /// Event models with `Q_K > C* · max_N Q_N`, taken literally: when the
    /// maximum is not positive the set is flagged and may exceed the argmax set.
    pub fn select_q_ratio(&self, threshold: f64) -> Result<SelectionResult, DetectError> {
        check_threshold(threshold)?;
        let q: Vec<f64> = self
            .stats
            .iter()
            .map(|s| s.q.ok_or(ParamError::QUndefined))
            .collect::<Result<_, _>>()?;
        let max_q = q.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let cutoff = threshold * max_q;
        let candidates = q
            .iter()
            .enumerate()
            .filter(|(_, &v)| v > cutoff)
            .map(|(i, _)| self.event(i))
            .collect();
        let mut result = SelectionResult::set(candidates);
        result.nonpositive_max_q = max_q <= 0.0;
        result.normal_dominates = self.normal_score >= self.max_event_score;
        Ok(result)
    }

    /// Posterior over all models; `chosen` is the maximum a posteriori model.
    pub fn select_bma<R: Rng + ?Sized>(&self, priors: &Priors, rng: &mut R) -> Result<SelectionResult, DetectError> {
        if priors.p_event.len() != self.scores.len() {
            return Err(DetectError::InvalidPriors(format!(
                "{} event priors for {} nodes",
                priors.p_event.len(),
                self.scores.len()
            )));
        }
        // index 0 is M_0, index i+1 is the event model at node i
        let log_priors: Vec<f64> = std::iter::once(priors.p_norm)
            .chain(priors.p_event.iter().copied())
            .map(f64::ln)
            .collect();
        let scores: Vec<f64> = std::iter::once(self.normal_score)
            .chain(self.scores.iter().copied())
            .collect();
        let weights: Vec<f64> = log_priors.iter().zip(&scores).map(|(p, s)| p + s).collect();

        let max_weight = weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if max_weight == f64::NEG_INFINITY {
            return Err(DetectError::UndefinedPosterior);
        }
        let sum: f64 = weights.iter().map(|w| (w - max_weight).exp()).sum();
        let log_norm = max_weight + sum.ln();

        let compare = |a: usize, b: usize| compare_weights(log_priors[a], scores[a], log_priors[b], scores[b]);
        let mut best = vec![0usize];
        for i in 1..weights.len() {
            match compare(i, best[0]) {
                Ordering::Greater => {
                    best.clear();
                    best.push(i);
                }
                Ordering::Equal => best.push(i),
                Ordering::Less => {}
            }
        }
        let model = |i: usize| if i == 0 { ModelId::Normal } else { self.event(i - 1) };
        let pick = if best.len() == 1 { 0 } else { rng.gen_range(0..best.len()) };
        let chosen = model(best[pick]);
        let posterior = weights
            .iter()
            .enumerate()
            .map(|(i, w)| (model(i), (w - log_norm).exp()))
            .collect();
        Ok(SelectionResult {
            chosen: Some(chosen),
            candidates: best.into_iter().map(model).collect(),
            posterior: Some(posterior),
            normal_dominates: false,
            nonpositive_max_q: false,
        })
    }
}

/// Compares `lp_a + s_a` with `lp_b + s_b`. For finite values the comparison
/// is done on differences, so equal priors reduce exactly to comparing scores.
fn compare_weights(lp_a: f64, s_a: f64, lp_b: f64, s_b: f64) -> Ordering {
    if [lp_a, s_a, lp_b, s_b].iter().all(|v| v.is_finite()) {
        (lp_a - lp_b).total_cmp(&(s_b - s_a))
    } else {
        (lp_a + s_a).total_cmp(&(lp_b + s_b))
    }
}

fn absolute_local_loglik(s: &NodeStatistics, dp: &DerivedParams) -> f64 {
    fn term(count: usize, p: f64) -> f64 {
        if count == 0 {
            0.0
        } else {
            count as f64 * p.ln()
        }
    }
    let (p1, p2) = (dp.big_p1, dp.big_p2);
    term(s.z as usize, p1) + term(1 - s.z as usize, 1.0 - p1) + term(s.t, p2) + term(s.k - s.t, 1.0 - p2)
}

fn check_threshold(c: f64) -> Result<(), DetectError> {
    if c > 0.0 && c < 1.0 {
        Ok(())
    } else {
        Err(DetectError::InvalidThreshold(c))
    }
}

/// Prior probabilities of `M_0` and each `M_N` (row-major).
#[derive(Debug, Clone, PartialEq)]
pub struct Priors {
    pub p_norm: f64,
    pub p_event: Vec<f64>,
}

impl Priors {
    pub fn new(p_norm: f64, p_event: Vec<f64>) -> Result<Self, DetectError> {
        if [p_norm].iter().chain(&p_event).any(|p| p.is_nan() || *p < 0.0) {
            return Err(DetectError::InvalidPriors("negative or NaN prior".into()));
        }
        let total = p_norm + p_event.iter().sum::<f64>();
        if (total - 1.0).abs() > 1e-9 {
            return Err(DetectError::InvalidPriors(format!("priors sum to {total}, not 1")));
        }
        Ok(Self { p_norm, p_event })
    }

    /// Equal mass on all `n + 1` models.
    pub fn uniform(n: usize) -> Self {
        let p = 1.0 / (n as f64 + 1.0);
        Self {
            p_norm: p,
            p_event: vec![p; n],
        }
    }

    /// `p_norm` on `M_0`, the remainder split evenly over the `n` event models.
    pub fn with_normal(p_norm: f64, n: usize) -> Result<Self, DetectError> {
        if !(0.0..=1.0).contains(&p_norm) {
            return Err(DetectError::InvalidPriors(format!("p_norm = {p_norm}")));
        }
        let p = if n == 0 { 0.0 } else { (1.0 - p_norm) / n as f64 };
        Self::new(p_norm, vec![p; n])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectionResult {
    /// Single selected model, for the single-selection rules.
    pub chosen: Option<ModelId>,
    pub candidates: BTreeSet<ModelId>,
    /// Posterior over every model, `M_0` first then row-major (BMA only).
    pub posterior: Option<Vec<(ModelId, f64)>>,
    /// `M_0` scores at least as high as every event model.
    pub normal_dominates: bool,
    /// Q-ratio rule evaluated with `max Q <= 0`.
    pub nonpositive_max_q: bool,
}

impl SelectionResult {
    fn single(chosen: ModelId) -> Self {
        Self {
            chosen: Some(chosen),
            candidates: BTreeSet::from([chosen]),
            posterior: None,
            normal_dominates: false,
            nonpositive_max_q: false,
        }
    }

    fn set(candidates: BTreeSet<ModelId>) -> Self {
        Self {
            chosen: None,
            candidates,
            posterior: None,
            normal_dominates: false,
            nonpositive_max_q: false,
        }
    }

    /// Number of event models in the candidate set (nodes to be searched).
    pub fn search_count(&self) -> usize {
        self.candidates.iter().filter(|m| matches!(m, ModelId::Event(_))).count()
    }

    pub fn contains(&self, model: &ModelId) -> bool {
        self.candidates.contains(model)
    }
}

pub fn select_single<R: Rng + ?Sized>(
    field: &ResponseField,
    topology: &GridTopology,
    dp: &DerivedParams,
    rng: &mut R,
) -> Result<SelectionResult, DetectError> {
    Ok(Evidence::compute(field, topology, dp)?.select_single(rng))
}

pub fn select_argmax_set(
    field: &ResponseField,
    topology: &GridTopology,
    dp: &DerivedParams,
) -> Result<SelectionResult, DetectError> {
    Ok(Evidence::compute(field, topology, dp)?.select_argmax_set())
}

pub fn select_with_neighborhood(
    field: &ResponseField,
    topology: &GridTopology,
    dp: &DerivedParams,
) -> Result<SelectionResult, DetectError> {
    Ok(Evidence::compute(field, topology, dp)?.select_with_neighborhood())
}

pub fn select_occam(
    field: &ResponseField,
    topology: &GridTopology,
    dp: &DerivedParams,
    threshold: f64,
) -> Result<SelectionResult, DetectError> {
    check_threshold(threshold)?;
    Evidence::compute(field, topology, dp)?.select_occam(threshold)
}

pub fn select_q_ratio(
    field: &ResponseField,
    topology: &GridTopology,
    dp: &DerivedParams,
    threshold: f64,
) -> Result<SelectionResult, DetectError> {
    if !dp.q_defined() {
        return Err(ParamError::QUndefined.into());
    }
    check_threshold(threshold)?;
    Evidence::compute(field, topology, dp)?.select_q_ratio(threshold)
}

pub fn select_bma<R: Rng + ?Sized>(
    field: &ResponseField,
    topology: &GridTopology,
    dp: &DerivedParams,
    priors: &Priors,
    rng: &mut R,
) -> Result<SelectionResult, DetectError> {
    Evidence::compute(field, topology, dp)?.select_bma(priors, rng)
}
