//! Response probabilities, log-likelihood coefficients and exact error
//! probabilities for a single node.
//!
//! Under the event model `M_N` a node's own response is `Ber(P1)`, each of
//! its neighbours responds as `Ber(P2)` and every other node as `Ber(pw)`;
//! under the null model `M_0` every node responds as `Ber(pw)`. With
//! `z` the node's own response, `t` the number of responding neighbours and
//! `k` the neighbour count,
//!
//! ```text
//! ln L_N - ln L_0 = alpha*z + beta*t + gamma + delta*k
//!                 = gamma + beta*(c*z + t - d*k)      (beta > 0)
//! ```
//!
//! Every quantity here is a local function of `(z, t, k)`; no product over
//! the whole grid is ever formed.

use thiserror::Error;

use crate::hexgrid::GridTopology;

/// Largest neighbour count on a hexagonal grid.
pub const MAX_DEGREE: usize = 6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParamError {
    #[error("{field} = {value} is not a probability in [0, 1]")]
    OutOfRange { field: &'static str, value: f64 },
    #[error("p1 = {p1} must not be smaller than p2 = {p2}")]
    DetectionOrder { p1: f64, p2: f64 },
    #[error("p1 = 0 leaves the event node indistinguishable from the rest of the grid")]
    ZeroDetection,
    #[error("pc = {pc} must exceed pw = {pw}; otherwise responses carry no information")]
    Degenerate { pc: f64, pw: f64 },
    #[error("invalid statistic: t = {t} responding neighbours out of k = {k}")]
    InvalidStatistic { t: usize, k: usize },
    #[error("neighbour count {0} exceeds 6")]
    InvalidDegree(usize),
    #[error("Q statistic undefined: beta = 0 (p2 = 0) or a coefficient is infinite")]
    QUndefined,
}

/// Sensing and response probabilities of a homogeneous sensor population.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensorParams {
    /// Detection probability of the sensor in the event hexagon.
    pub p1: f64,
    /// Detection probability of a sensor adjacent to the event hexagon.
    pub p2: f64,
    /// Probability of responding after a detection.
    pub pc: f64,
    /// Probability of responding without a detection (false alarm).
    pub pw: f64,
}

impl SensorParams {
    pub fn new(p1: f64, p2: f64, pc: f64, pw: f64) -> Result<Self, ParamError> {
        for (field, value) in [("p1", p1), ("p2", p2), ("pc", pc), ("pw", pw)] {
            if !(0.0..=1.0).contains(&value) {
                return Err(ParamError::OutOfRange { field, value });
            }
        }
        if p1 < p2 {
            return Err(ParamError::DetectionOrder { p1, p2 });
        }
        if p1 == 0.0 {
            return Err(ParamError::ZeroDetection);
        }
        if pc <= pw {
            return Err(ParamError::Degenerate { pc, pw });
        }
        Ok(Self { p1, p2, pc, pw })
    }

    /// Marginal response probability of the event node, `p1(pc - pw) + pw`.
    pub fn big_p1(&self) -> f64 {
        self.p1 * (self.pc - self.pw) + self.pw
    }

    /// Marginal response probability of a neighbour of the event node.
    pub fn big_p2(&self) -> f64 {
        self.p2 * (self.pc - self.pw) + self.pw
    }
}

/// The two hypotheses that matter for one node's local statistics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LocalModel {
    /// `M_0`: no event anywhere.
    Null,
    /// `M_N`: the event is at the node itself.
    EventAtCenter,
}

/// `count * ln(num / den)` with the conventions `0 * x = 0` and
/// `ln(x / x) = 0`, so absent factors never produce NaN.
fn weighted_log_ratio(count: f64, num: f64, den: f64) -> f64 {
    if count == 0.0 || num == den {
        0.0
    } else {
        count * (num / den).ln()
    }
}

/// Closed-form coefficients derived from [`SensorParams`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivedParams {
    pub params: SensorParams,
    pub big_p1: f64,
    pub big_p2: f64,
    /// Weight of the node's own response, `ln(P1(1-pw) / (pw(1-P1)))`.
    pub alpha: f64,
    /// Weight of each responding neighbour, `ln(P2(1-pw) / (pw(1-P2)))`.
    pub beta: f64,
    /// `ln((1-P1) / (1-pw))`.
    pub gamma: f64,
    /// Per-neighbour constant `ln((1-P2) / (1-pw))`.
    pub delta: f64,
    /// `alpha / beta`, present only when the Q statistic is defined.
    pub c: Option<f64>,
    /// `-delta / beta`, present only when the Q statistic is defined.
    pub d: Option<f64>,
    /// `ln((1-pw)/(1-P1)) / beta`: an isolated node with `Q < tau0` favours `M_0`.
    pub tau0: Option<f64>,
    table: [[[f64; MAX_DEGREE + 1]; MAX_DEGREE + 1]; 2],
}

/// Compute `P1, P2, alpha, beta, gamma, delta` and, when `beta > 0`, `c, d, tau0`.
pub fn derive_params(params: SensorParams) -> Result<DerivedParams, ParamError> {
    let SensorParams { pc, pw, .. } = params;
    if pc <= pw {
        return Err(ParamError::Degenerate { pc, pw });
    }
    let big_p1 = params.big_p1();
    let big_p2 = params.big_p2();
    let alpha = weighted_log_ratio(1.0, big_p1, pw) + weighted_log_ratio(1.0, 1.0 - pw, 1.0 - big_p1);
    let beta = weighted_log_ratio(1.0, big_p2, pw) + weighted_log_ratio(1.0, 1.0 - pw, 1.0 - big_p2);
    let gamma = weighted_log_ratio(1.0, 1.0 - big_p1, 1.0 - pw);
    let delta = weighted_log_ratio(1.0, 1.0 - big_p2, 1.0 - pw);

    let q_defined = beta > 0.0 && [alpha, beta, gamma, delta].iter().all(|v| v.is_finite());
    let (c, d, tau0) = if q_defined {
        (Some(alpha / beta), Some(-delta / beta), Some(-gamma / beta))
    } else {
        (None, None, None)
    };

    let mut dp = DerivedParams {
        params,
        big_p1,
        big_p2,
        alpha,
        beta,
        gamma,
        delta,
        c,
        d,
        tau0,
        table: [[[0.0; MAX_DEGREE + 1]; MAX_DEGREE + 1]; 2],
    };
    for z in 0..2 {
        for k in 0..=MAX_DEGREE {
            for t in 0..=k {
                dp.table[z][k][t] = dp.local_log_ratio(z == 1, t, k);
            }
        }
    }
    Ok(dp)
}

impl DerivedParams {
    /// Term-by-term `ln L_N - ln L_0` for the node's closed neighbourhood.
    fn local_log_ratio(&self, z: bool, t: usize, k: usize) -> f64 {
        let pw = self.params.pw;
        let zf = if z { 1.0 } else { 0.0 };
        let tf = t as f64;
        let kf = k as f64;
        weighted_log_ratio(zf, self.big_p1, pw)
            + weighted_log_ratio(1.0 - zf, 1.0 - self.big_p1, 1.0 - pw)
            + weighted_log_ratio(tf, self.big_p2, pw)
            + weighted_log_ratio(kf - tf, 1.0 - self.big_p2, 1.0 - pw)
    }

    /// Precomputed `ln L_N - ln L_0`; caller guarantees `t <= k <= 6`.
    #[inline]
    pub(crate) fn cached_delta(&self, z: bool, t: usize, k: usize) -> f64 {
        self.table[z as usize][k][t]
    }

    /// Whether the `Q = c*z + t - d*k` statistic is available.
    pub fn q_defined(&self) -> bool {
        self.c.is_some()
    }

    /// `Q = c*z + t - d*k`, when defined.
    pub fn q_value(&self, z: bool, t: usize, k: usize) -> Option<f64> {
        let (c, d) = (self.c?, self.d?);
        Some(if z { c } else { 0.0 } + t as f64 - d * k as f64)
    }
}

fn check_statistic(t: usize, k: usize) -> Result<(), ParamError> {
    if k > MAX_DEGREE {
        return Err(ParamError::InvalidDegree(k));
    }
    if t > k {
        return Err(ParamError::InvalidStatistic { t, k });
    }
    Ok(())
}

/// `ln L_N - ln L_0` for a node with own response `z`, `t` responding
/// neighbours and `k` neighbours.
pub fn loglik_delta(z: bool, t: usize, k: usize, dp: &DerivedParams) -> Result<f64, ParamError> {
    check_statistic(t, k)?;
    Ok(dp.cached_delta(z, t, k))
}

fn binomial(n: usize, r: usize) -> f64 {
    (0..r).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Joint law of `(T_N, Z_N)` for one node.
#[derive(Debug, Clone, PartialEq)]
pub struct JointTZTable {
    pub k: usize,
    /// `entries[t][z]`, `t = 0..=k`.
    pub entries: Vec<[f64; 2]>,
}

impl JointTZTable {
    pub fn get(&self, t: usize, z: bool) -> f64 {
        self.entries[t][z as usize]
    }

    pub fn total(&self) -> f64 {
        self.entries.iter().map(|e| e[0] + e[1]).sum()
    }

    /// `(t, z, probability)` in `t`-major order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, bool, f64)> + '_ {
        self.entries
            .iter()
            .enumerate()
            .flat_map(|(t, e)| [(t, false, e[0]), (t, true, e[1])])
    }
}

/// `T_N` and `Z_N` are independent under either model, so each entry is a
/// binomial term times a Bernoulli term.
pub fn joint_tz(model: LocalModel, k: usize, dp: &DerivedParams) -> Result<JointTZTable, ParamError> {
    if k > MAX_DEGREE {
        return Err(ParamError::InvalidDegree(k));
    }
    let pw = dp.params.pw;
    let (center, neighbor) = match model {
        LocalModel::Null => (pw, pw),
        LocalModel::EventAtCenter => (dp.big_p1, dp.big_p2),
    };
    let entries = (0..=k)
        .map(|t| {
            let tail = binomial(k, t) * neighbor.powi(t as i32) * (1.0 - neighbor).powi((k - t) as i32);
            [tail * (1.0 - center), tail * center]
        })
        .collect();
    Ok(JointTZTable { k, entries })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QPoint {
    pub z: bool,
    pub t: usize,
    pub value: f64,
    pub probability: f64,
}

/// Law of `Q_N = c*Z_N + T_N - d*k`. Coincident support values are not merged.
#[derive(Debug, Clone, PartialEq)]
pub struct QDistribution {
    pub k: usize,
    pub support: Vec<QPoint>,
}

impl QDistribution {
    pub fn total(&self) -> f64 {
        self.support.iter().map(|p| p.probability).sum()
    }
}

pub fn q_distribution(model: LocalModel, k: usize, dp: &DerivedParams) -> Result<QDistribution, ParamError> {
    if !dp.q_defined() {
        return Err(ParamError::QUndefined);
    }
    let table = joint_tz(model, k, dp)?;
    let support = table
        .iter()
        .map(|(t, z, probability)| QPoint {
            z,
            t,
            value: dp.q_value(z, t, k).expect("q defined"),
            probability,
        })
        .collect();
    Ok(QDistribution { k, support })
}

/// `P_{M_0}(L_N > L_0)` for a node with `k` neighbours.
pub fn exact_false_detect(k: usize, dp: &DerivedParams) -> Result<f64, ParamError> {
    let table = joint_tz(LocalModel::Null, k, dp)?;
    Ok(table
        .iter()
        .filter(|&(t, z, _)| dp.cached_delta(z, t, k) > 0.0)
        .map(|(_, _, p)| p)
        .sum())
}

/// `P_{M_N}(L_N < L_0)` for a node with `k` neighbours.
pub fn exact_miss(k: usize, dp: &DerivedParams) -> Result<f64, ParamError> {
    let table = joint_tz(LocalModel::EventAtCenter, k, dp)?;
    Ok(table
        .iter()
        .filter(|&(t, z, _)| dp.cached_delta(z, t, k) < 0.0)
        .map(|(_, _, p)| p)
        .sum())
}

/// Lower (max over nodes) and upper (clamped sum over nodes) bounds on the
/// probability that some node is judged an event node when the grid is normal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FalsePositiveBounds {
    pub lower: f64,
    pub upper: f64,
}

pub fn false_positive_bounds(topology: &GridTopology, dp: &DerivedParams) -> Result<FalsePositiveBounds, ParamError> {
    let mut lower = 0.0f64;
    let mut sum = 0.0f64;
    for (k, &count) in topology.degree_histogram().iter().enumerate() {
        if count == 0 {
            continue;
        }
        let p = exact_false_detect(k, dp)?;
        lower = lower.max(p);
        sum += count as f64 * p;
    }
    Ok(FalsePositiveBounds {
        lower,
        upper: sum.min(1.0),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dp(p1: f64, p2: f64, pc: f64, pw: f64) -> DerivedParams {
        derive_params(SensorParams::new(p1, p2, pc, pw).unwrap()).unwrap()
    }

    /// Sum the probabilities of all 2^(k+1) outcome vectors (center first).
    fn enumerate_joint(center: f64, neighbor: f64, k: usize) -> Vec<[f64; 2]> {
        let mut out = vec![[0.0; 2]; k + 1];
        for mask in 0u32..(1 << (k + 1)) {
            let z = mask & 1;
            let mut prob = if z == 1 { center } else { 1.0 - center };
            let mut t = 0;
            for bit in 1..=k {
                if mask >> bit & 1 == 1 {
                    t += 1;
                    prob *= neighbor;
                } else {
                    prob *= 1.0 - neighbor;
                }
            }
            out[t][z as usize] += prob;
        }
        out
    }

    #[test]
    fn reference_coefficients_low_detection() {
        let d = dp(0.7, 0.3, 0.9, 0.1);
        assert!((d.big_p1 - 0.66).abs() < 1e-12);
        assert!((d.big_p2 - 0.34).abs() < 1e-12);
        assert!((d.c.unwrap() - 1.865).abs() < 5e-4);
        assert!((d.d.unwrap() - 0.202).abs() < 5e-4);
    }

    #[test]
    fn reference_coefficients_high_false_alarm() {
        let d = dp(0.8, 0.4, 0.9, 0.2);
        assert!((d.big_p1 - 0.76).abs() < 1e-12);
        assert!((d.big_p2 - 0.48).abs() < 1e-12);
        assert!((d.c.unwrap() - 1.944).abs() < 5e-4);
        assert!((d.d.unwrap() - 0.330).abs() < 5e-4);
    }

    #[test]
    fn ratio_c_at_high_p1_low_p2_is_2_421() {
        let d = dp(0.9, 0.3, 0.9, 0.1);
        assert!((d.c.unwrap() - 2.421).abs() < 1e-3);
    }

    #[test]
    fn zero_p2_collapses_neighbor_signal() {
        let d = dp(0.9, 0.0, 0.9, 0.01);
        assert_eq!(d.big_p2, 0.01);
        assert_eq!(d.beta, 0.0);
        assert_eq!(d.delta, 0.0);
        assert!(d.c.is_none() && d.d.is_none() && d.tau0.is_none());
        assert!(matches!(
            q_distribution(LocalModel::Null, 6, &d),
            Err(ParamError::QUndefined)
        ));
    }

    #[test]
    fn closed_forms_at_high_p2() {
        let d = dp(0.9, 0.5, 0.9, 0.01);
        assert!((d.big_p1 - 0.811).abs() < 1e-12);
        assert!((d.big_p2 - 0.455).abs() < 1e-12);
        assert!((d.beta - 4.4147).abs() < 1e-4);
        assert!((d.c.unwrap() - 1.3708).abs() < 1e-4);
        assert!((d.d.unwrap() - 0.1352).abs() < 1e-4);
        assert!((d.tau0.unwrap() - 0.3751).abs() < 1e-4);
        // exponentiate back
        let p1 = d.big_p1;
        let p2 = d.big_p2;
        let pw = 0.01;
        assert!((d.alpha.exp() - p1 * (1.0 - pw) / (pw * (1.0 - p1))).abs() < 1e-9);
        assert!((d.beta.exp() - p2 * (1.0 - pw) / (pw * (1.0 - p2))).abs() < 1e-9);
        assert!((d.gamma.exp() - (1.0 - p1) / (1.0 - pw)).abs() < 1e-12);
        assert!((d.delta.exp() - (1.0 - p2) / (1.0 - pw)).abs() < 1e-12);
    }

    #[test]
    fn degenerate_response_channel_rejected() {
        let params = SensorParams { p1: 0.9, p2: 0.5, pc: 0.1, pw: 0.1 };
        assert!(matches!(derive_params(params), Err(ParamError::Degenerate { .. })));
        assert!(matches!(
            SensorParams::new(0.9, 0.5, 0.1, 0.2),
            Err(ParamError::Degenerate { .. })
        ));
    }

    #[test]
    fn constructor_validation() {
        assert!(matches!(
            SensorParams::new(1.2, 0.5, 0.9, 0.1),
            Err(ParamError::OutOfRange { field: "p1", .. })
        ));
        assert!(matches!(
            SensorParams::new(0.9, 0.5, 0.9, f64::NAN),
            Err(ParamError::OutOfRange { field: "pw", .. })
        ));
        assert!(matches!(
            SensorParams::new(0.3, 0.5, 0.9, 0.1),
            Err(ParamError::DetectionOrder { .. })
        ));
        assert!(matches!(SensorParams::new(0.0, 0.0, 0.9, 0.1), Err(ParamError::ZeroDetection)));
    }

    #[test]
    fn delta_examples() {
        let d = dp(0.7, 0.3, 0.9, 0.1);
        for k in 0..=6 {
            let v = loglik_delta(false, 0, k, &d).unwrap();
            assert!(v < 0.0);
            assert!((v - (d.gamma + k as f64 * d.delta)).abs() < 1e-12);
        }
        let lone = loglik_delta(true, 0, 6, &d).unwrap();
        assert!((lone - 0.026140079209342915).abs() < 1e-12);
        assert!(matches!(
            loglik_delta(true, 7, 6, &d),
            Err(ParamError::InvalidStatistic { t: 7, k: 6 })
        ));
        assert!(matches!(loglik_delta(true, 0, 7, &d), Err(ParamError::InvalidDegree(7))));
    }

    #[test]
    fn affine_identity_holds() {
        for &(p1, p2, pc, pw) in &[(0.7, 0.3, 0.9, 0.1), (0.99, 0.6, 0.99, 0.001), (0.9, 0.5, 0.9, 0.01)] {
            let d = dp(p1, p2, pc, pw);
            let (c, dd) = (d.c.unwrap(), d.d.unwrap());
            for k in 0..=6 {
                for t in 0..=k {
                    for z in [false, true] {
                        let lhs = loglik_delta(z, t, k, &d).unwrap();
                        let zf = if z { 1.0 } else { 0.0 };
                        let rhs = d.gamma + d.beta * (c * zf + t as f64 - dd * k as f64);
                        let direct = d.alpha * zf + d.beta * t as f64 + d.gamma + d.delta * k as f64;
                        assert!((lhs - rhs).abs() < 1e-12);
                        assert!((lhs - direct).abs() < 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn joint_tables_match_enumeration() {
        let grid = [0.0, 0.001, 0.01, 0.1, 0.3, 0.5, 0.9, 0.99, 1.0];
        for &pw in &[0.001, 0.01, 0.1, 0.2] {
            for &p1 in &grid {
                for &p2 in &grid {
                    for &pc in &[0.5, 0.9, 0.99, 1.0] {
                        let Ok(params) = SensorParams::new(p1, p2, pc, pw) else {
                            continue;
                        };
                        let d = derive_params(params).unwrap();
                        for k in 0..=6 {
                            for (model, center, neighbor) in [
                                (LocalModel::Null, pw, pw),
                                (LocalModel::EventAtCenter, d.big_p1, d.big_p2),
                            ] {
                                let table = joint_tz(model, k, &d).unwrap();
                                let oracle = enumerate_joint(center, neighbor, k);
                                assert!((table.total() - 1.0).abs() < 1e-12);
                                for t in 0..=k {
                                    for z in 0..2 {
                                        assert!(table.entries[t][z] >= 0.0);
                                        assert!((table.entries[t][z] - oracle[t][z]).abs() < 1e-12);
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn joint_entries_examples() {
        let d = dp(0.7, 0.3, 0.9, 0.1);
        let null = joint_tz(LocalModel::Null, 6, &d).unwrap();
        assert!((null.get(0, true) - 0.0531441).abs() < 1e-12);
        let event = joint_tz(LocalModel::EventAtCenter, 6, &d).unwrap();
        assert!((event.get(6, false) - 0.0005252335014399999).abs() < 1e-15);
    }

    #[test]
    fn q_distribution_is_pushforward() {
        let d = dp(0.7, 0.3, 0.9, 0.1);
        let q = q_distribution(LocalModel::EventAtCenter, 6, &d).unwrap();
        let table = joint_tz(LocalModel::EventAtCenter, 6, &d).unwrap();
        assert_eq!(q.support.len(), 14);
        assert!((q.total() - 1.0).abs() < 1e-12);
        for p in &q.support {
            assert_eq!(p.probability, table.get(p.t, p.z));
        }
        let point = q
            .support
            .iter()
            .find(|p| p.z && p.t == 0)
            .expect("c - 6d point");
        assert!((point.value - (d.c.unwrap() - 6.0 * d.d.unwrap())).abs() < 1e-12);
        assert!((point.probability - 0.05455160701056002).abs() < 1e-12);
    }

    #[test]
    fn exact_error_probabilities() {
        let d = dp(0.9, 0.5, 0.9, 0.01);
        // enumeration oracle values
        let fd = [0.01, 0.0199, 0.029701, 0.03940399, 0.0490099501, 0.010970348104, 0.01144584312895];
        let miss = [
            0.189,
            0.103005,
            0.056137725,
            0.030595060125,
            0.016674307768125,
            0.04702154790611247,
            0.029761555077632076,
        ];
        for k in 0..=6 {
            assert!((exact_false_detect(k, &d).unwrap() - fd[k]).abs() < 1e-12, "k={k}");
            assert!((exact_miss(k, &d).unwrap() - miss[k]).abs() < 1e-12, "k={k}");
        }
    }

    #[test]
    fn miss_and_complement_sum_to_one() {
        let d = dp(0.9, 0.5, 0.9, 0.01);
        for k in 0..=6 {
            let table = joint_tz(LocalModel::EventAtCenter, k, &d).unwrap();
            let rest: f64 = table
                .iter()
                .filter(|&(t, z, _)| d.cached_delta(z, t, k) >= 0.0)
                .map(|(_, _, p)| p)
                .sum();
            assert!((exact_miss(k, &d).unwrap() + rest - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn false_detect_vanishes_with_pw() {
        let d = dp(0.9, 0.5, 0.9, 1e-12);
        for k in 0..=6 {
            assert!(exact_false_detect(k, &d).unwrap() < 1e-10);
        }
        let d = dp(0.9, 0.5, 0.9, 0.0);
        for k in 0..=6 {
            assert_eq!(exact_false_detect(k, &d).unwrap(), 0.0);
        }
    }

    #[test]
    fn certain_detection_never_misses() {
        let d = dp(1.0, 1.0, 1.0, 0.1);
        for k in 0..=6 {
            assert_eq!(exact_miss(k, &d).unwrap(), 0.0);
        }
        let d = dp(1.0, 1.0, 1.0, 0.0);
        for k in 0..=6 {
            assert_eq!(exact_miss(k, &d).unwrap(), 0.0);
        }
    }

    #[test]
    fn bounds_on_32_by_32_grid() {
        let d = dp(0.9, 0.5, 0.9, 0.01);
        let g = GridTopology::new(32, 32).unwrap();
        let b = false_positive_bounds(&g, &d).unwrap();
        // degree 4 (corner-adjacent boundary nodes) attains the maximum
        assert!((b.lower - 0.0490099501).abs() < 1e-12);
        assert_eq!(b.upper, 1.0);
        assert!(b.lower <= b.upper);

        let single = GridTopology::new(1, 1).unwrap();
        let b = false_positive_bounds(&single, &d).unwrap();
        assert_eq!(b.lower, exact_false_detect(0, &d).unwrap());
        assert_eq!(b.upper, b.lower);
    }

    #[test]
    fn p1_exceeds_p2_across_sweep() {
        for i in 1..=20 {
            for j in 0..i {
                for &(pc, pw) in &[(0.9, 0.1), (0.99, 0.001), (0.6, 0.5)] {
                    let (p1, p2) = (i as f64 / 20.0, j as f64 / 20.0);
                    let d = dp(p1, p2, pc, pw);
                    assert!(d.big_p1 > d.big_p2 && d.big_p2 >= pw);
                    assert!(d.alpha > 0.0 && d.gamma < 0.0 && d.beta >= 0.0 && d.delta <= 0.0);
                    if let (Some(c), Some(dd)) = (d.c, d.d) {
                        assert!(c > 1.0 && dd > 0.0);
                    }
                }
            }
        }
    }
}
