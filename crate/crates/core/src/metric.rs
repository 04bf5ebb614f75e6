//! The hybrid angular + Euclidean distance on `ℝⁿ∖{0}`.
//!
//! `d_ε(s₁, s₂) = Θ(s₁, s₂) + ε·E(s₁, s₂)` where `Θ` is the angle between
//! the two vectors normalised to `[0, 1]` and `E` the Euclidean distance.
//! The angular term measures the direction a market moves in, the Euclidean
//! term its volume. For `ε > 0` this is a metric on the punctured space that
//! is not induced by any norm: two arbitrarily small vectors pointing in
//! opposite directions stay at distance at least 1.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::reward::ActionVector;

/// Weight of the Euclidean term in [`eps_distance`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricConfig {
    pub epsilon: f64,
}

impl MetricConfig {
    pub fn new(epsilon: f64) -> Result<Self> {
        let cfg = MetricConfig { epsilon };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.epsilon.is_finite() || self.epsilon < 0.0 {
            return Err(Error::config(format!(
                "epsilon must be finite and non-negative, got {}",
                self.epsilon
            )));
        }
        Ok(())
    }

    /// True when `d_ε` separates points (`ε > 0`).
    pub fn is_metric(&self) -> bool {
        self.epsilon > 0.0
    }
}

impl Default for MetricConfig {
    fn default() -> Self {
        MetricConfig { epsilon: 0.1 }
    }
}

/// A point of the market state space: finite, at least one coordinate, and
/// never the zero vector.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct StateVector(Vec<f64>);

impl StateVector {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::domain("state vector must have at least one coordinate"));
        }
        if let Some(i) = coords.iter().position(|x| !x.is_finite()) {
            return Err(Error::domain(format!(
                "state coordinate {i} is not finite ({})",
                coords[i]
            )));
        }
        if coords.iter().all(|&x| x == 0.0) {
            return Err(Error::domain("the zero vector is not a valid state"));
        }
        Ok(StateVector(coords))
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn norm2(&self) -> f64 {
        norm2(&self.0)
    }

    pub fn norm_inf(&self) -> f64 {
        norm_inf(&self.0)
    }

    pub fn dot(&self, other: &[f64]) -> Result<f64> {
        dot(&self.0, other)
    }

    /// `λ·s` for `λ > 0`.
    pub fn scaled(&self, lambda: f64) -> Result<Self> {
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(Error::domain(format!("scale factor must be positive, got {lambda}")));
        }
        StateVector::new(self.0.iter().map(|x| x * lambda).collect())
    }

    pub fn angular_distance(&self, other: &StateVector) -> Result<f64> {
        angular_distance(&self.0, &other.0)
    }

    pub fn euclidean_distance(&self, other: &StateVector) -> Result<f64> {
        euclidean_distance(&self.0, &other.0)
    }

    pub fn eps_distance(&self, other: &StateVector, cfg: &MetricConfig) -> Result<f64> {
        eps_distance(&self.0, &other.0, cfg)
    }
}

impl fmt::Debug for StateVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_tuple("StateVector").field(&self.0).finish()
    }
}

impl TryFrom<Vec<f64>> for StateVector {
    type Error = Error;

    fn try_from(coords: Vec<f64>) -> Result<Self> {
        StateVector::new(coords)
    }
}

impl From<StateVector> for Vec<f64> {
    fn from(s: StateVector) -> Self {
        s.0
    }
}

impl AsRef<[f64]> for StateVector {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

/// A (state, action) point, measured with the sum distance `d_s + d_a`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateActionPair {
    pub state: StateVector,
    pub action: ActionVector,
}

impl StateActionPair {
    pub fn new(state: StateVector, action: ActionVector) -> Self {
        StateActionPair { state, action }
    }
}

/// Anything that can serve as a point of a (pseudo-)metric space under a
/// [`MetricConfig`].
pub trait MetricPoint: Clone + fmt::Debug {
    fn distance(&self, other: &Self, cfg: &MetricConfig) -> Result<f64>;
}

impl MetricPoint for StateVector {
    fn distance(&self, other: &Self, cfg: &MetricConfig) -> Result<f64> {
        self.eps_distance(other, cfg)
    }
}

impl MetricPoint for StateActionPair {
    fn distance(&self, other: &Self, cfg: &MetricConfig) -> Result<f64> {
        product_distance(self, other, cfg)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DistanceKind {
    Angular,
    Euclidean,
    Eps,
}

pub(crate) fn check_dims(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::Dimension {
            expected: a.len(),
            found: b.len(),
        });
    }
    Ok(())
}

pub fn dot(a: &[f64], b: &[f64]) -> Result<f64> {
    check_dims(a, b)?;
    Ok(a.iter().zip(b).map(|(x, y)| x * y).sum())
}

/// Euclidean norm, rescaled by the largest magnitude so tiny and huge
/// coordinates neither underflow nor overflow.
pub fn norm2(a: &[f64]) -> f64 {
    let m = norm_inf(a);
    if m == 0.0 || !m.is_finite() {
        return m;
    }
    m * a.iter().map(|x| (x / m) * (x / m)).sum::<f64>().sqrt()
}

pub fn norm_inf(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Cosine of the angle between two nonzero vectors, clamped to `[-1, 1]`.
pub fn cosine_similarity(a: &[f64], b: &[f64]) -> Result<f64> {
    check_dims(a, b)?;
    let (na, nb) = nonzero_norms(a, b)?;
    Ok((dot(a, b)? / (na * nb)).clamp(-1.0, 1.0))
}

fn nonzero_norms(a: &[f64], b: &[f64]) -> Result<(f64, f64)> {
    let na = norm2(a);
    let nb = norm2(b);
    if na == 0.0 || nb == 0.0 {
        return Err(Error::domain("angular distance is undefined at the zero vector"));
    }
    Ok((na, nb))
}

/// `Θ(a, b) = arccos(cos(a, b)) / π`, in `[0, 1]`.
///
/// The angle is evaluated as `2·atan2(‖a‖b‖ − b‖a‖‖, ‖a‖b‖ + b‖a‖‖)`, which
/// equals the arccos form but keeps full precision near 0 and π, where
/// `arccos` loses about half the significant digits. Identical inputs give
/// exactly 0.
pub fn angular_distance(a: &[f64], b: &[f64]) -> Result<f64> {
    check_dims(a, b)?;
    let (na, nb) = nonzero_norms(a, b)?;
    // Θ is scale invariant; work with inputs of largest magnitude 1.
    let (ma, mb) = (norm_inf(a), norm_inf(b));
    let (na, nb) = (na / ma, nb / mb);
    let (mut diff, mut sum) = (0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let u = x / ma * nb;
        let v = y / mb * na;
        diff += (u - v) * (u - v);
        sum += (u + v) * (u + v);
    }
    let angle = 2.0 * diff.sqrt().atan2(sum.sqrt());
    Ok((angle / std::f64::consts::PI).clamp(0.0, 1.0))
}

/// `E(a, b) = ‖a − b‖₂`.
pub fn euclidean_distance(a: &[f64], b: &[f64]) -> Result<f64> {
    check_dims(a, b)?;
    Ok(a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt())
}

/// `d_ε(a, b) = Θ(a, b) + ε·E(a, b)`.
pub fn eps_distance(a: &[f64], b: &[f64], cfg: &MetricConfig) -> Result<f64> {
    let theta = angular_distance(a, b)?;
    if cfg.epsilon == 0.0 {
        return Ok(theta);
    }
    Ok(theta + cfg.epsilon * euclidean_distance(a, b)?)
}

/// `d_ε(s₁, s₂) + d_ε(a₁, a₂)` on state-action pairs.
pub fn product_distance(
    p1: &StateActionPair,
    p2: &StateActionPair,
    cfg: &MetricConfig,
) -> Result<f64> {
    let ds = eps_distance(p1.state.coords(), p2.state.coords(), cfg)?;
    let da = eps_distance(p1.action.coords(), p2.action.coords(), cfg)?;
    Ok(ds + da)
}

/// `inf_{t ∈ set} d(s, t)` for the chosen component of the metric.
pub fn distance_to_set(
    s: &StateVector,
    set: &[StateVector],
    kind: DistanceKind,
    cfg: &MetricConfig,
) -> Result<f64> {
    if set.is_empty() {
        return Err(Error::domain("distance to an empty set is undefined"));
    }
    let mut best = f64::INFINITY;
    for t in set {
        let d = match kind {
            DistanceKind::Angular => s.angular_distance(t)?,
            DistanceKind::Euclidean => s.euclidean_distance(t)?,
            DistanceKind::Eps => s.eps_distance(t, cfg)?,
        };
        best = best.min(d);
    }
    Ok(best)
}

/// Index and distance of the closest element of `set` to `s`; ties go to the
/// lowest index.
pub fn nearest<P: MetricPoint>(s: &P, set: &[P], cfg: &MetricConfig) -> Result<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for (i, t) in set.iter().enumerate() {
        let d = s.distance(t, cfg)?;
        if best.map_or(true, |(_, b)| d < b) {
            best = Some((i, d));
        }
    }
    best.ok_or_else(|| Error::domain("nearest neighbour of an empty set is undefined"))
}
