//! Lipschitz constants of finite samples and their McShane / Whitney
//! extensions.
//!
//! Given samples `T(b)` on a finite set `M₀` with Lipschitz constant `K`,
//!
//! ```text
//! McShane:  T^M(a) = max_b { T(b) − K·d(a, b) }
//! Whitney:  T^W(a) = min_b { T(b) + K·d(a, b) }
//! ```
//!
//! both agree with `T` on `M₀`, are `K`-Lipschitz everywhere, and bracket
//! every other `K`-Lipschitz extension: `T^M ≤ g ≤ T^W`. A convex blend of
//! the two is again such an extension.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metric::{self, DistanceKind, MetricConfig, MetricPoint, StateVector};

/// Default radius of the allocation action set (`100 × S⁺_{ℓ¹}`).
pub const DEFAULT_ACTION_RADIUS: f64 = 100.0;

#[derive(Debug, Clone, PartialEq)]
pub struct RewardSample<P> {
    pub point: P,
    pub value: f64,
}

impl<P> RewardSample<P> {
    pub fn new(point: P, value: f64) -> Self {
        RewardSample { point, value }
    }
}

/// A reward function known on finitely many points, with its exact Lipschitz
/// constant under the configured metric.
#[derive(Debug, Clone)]
pub struct SampledRewardFunction<P> {
    samples: Vec<RewardSample<P>>,
    metric: MetricConfig,
    k: f64,
}

impl<P: MetricPoint> SampledRewardFunction<P> {
    pub fn empty(metric: MetricConfig) -> Result<Self> {
        metric.validate()?;
        Ok(SampledRewardFunction {
            samples: Vec::new(),
            metric,
            k: 0.0,
        })
    }

    /// Builds the function and its constant by exact pairwise maximisation.
    /// Repeated points with equal values collapse into one sample.
    pub fn new(samples: impl IntoIterator<Item = RewardSample<P>>, metric: MetricConfig) -> Result<Self> {
        let mut f = Self::empty(metric)?;
        for (i, s) in samples.into_iter().enumerate() {
            f.insert(s).map_err(|e| Error::at_index(i, e))?;
        }
        if f.samples.is_empty() {
            return Err(Error::domain("a sampled reward function needs at least one sample"));
        }
        Ok(f)
    }

    /// Adds one sample, updating `K` against every existing point.
    ///
    /// Returns `false` when the point is already present with the same value.
    pub fn insert(&mut self, sample: RewardSample<P>) -> Result<bool> {
        if !sample.value.is_finite() {
            return Err(Error::domain(format!("reward value {} is not finite", sample.value)));
        }
        let mut k = self.k;
        for (j, other) in self.samples.iter().enumerate() {
            let d = sample.point.distance(&other.point, &self.metric)?;
            let dv = (sample.value - other.value).abs();
            if d == 0.0 {
                if dv == 0.0 {
                    return Ok(false);
                }
                return Err(Error::IllPosed {
                    first: j,
                    second: self.samples.len(),
                    first_value: other.value,
                    second_value: sample.value,
                });
            }
            k = k.max(dv / d);
        }
        self.k = k;
        self.samples.push(sample);
        Ok(true)
    }

    pub fn lipschitz_constant(&self) -> f64 {
        self.k
    }

    pub fn samples(&self) -> &[RewardSample<P>] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn metric(&self) -> &MetricConfig {
        &self.metric
    }

    pub fn max_value(&self) -> f64 {
        self.samples.iter().map(|s| s.value).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn points(&self) -> impl Iterator<Item = &P> {
        self.samples.iter().map(|s| &s.point)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum ExtensionKind {
    #[default]
    McShane,
    Whitney,
    /// `(1−λ)·McShane + λ·Whitney`.
    Blend(f64),
}

impl ExtensionKind {
    pub fn validate(&self) -> Result<()> {
        if let ExtensionKind::Blend(l) = *self {
            if !(0.0..=1.0).contains(&l) {
                return Err(Error::config(format!("blend weight must lie in [0, 1], got {l}")));
            }
        }
        Ok(())
    }

    /// Weight on the Whitney envelope.
    pub fn whitney_weight(&self) -> f64 {
        match *self {
            ExtensionKind::McShane => 0.0,
            ExtensionKind::Whitney => 1.0,
            ExtensionKind::Blend(l) => l,
        }
    }
}

impl fmt::Display for ExtensionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtensionKind::McShane => f.write_str("mcshane"),
            ExtensionKind::Whitney => f.write_str("whitney"),
            ExtensionKind::Blend(l) => write!(f, "blend:{l}"),
        }
    }
}

impl FromStr for ExtensionKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let kind = match s.trim().to_ascii_lowercase().as_str() {
            "mcshane" => ExtensionKind::McShane,
            "whitney" => ExtensionKind::Whitney,
            other => {
                let weight = other
                    .strip_prefix("blend:")
                    .ok_or_else(|| Error::config(format!("unknown extension kind '{s}'")))?;
                let l: f64 = weight
                    .parse()
                    .map_err(|_| Error::config(format!("invalid blend weight '{weight}'")))?;
                ExtensionKind::Blend(l)
            }
        };
        kind.validate()?;
        Ok(kind)
    }
}

impl TryFrom<String> for ExtensionKind {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<ExtensionKind> for String {
    fn from(k: ExtensionKind) -> Self {
        k.to_string()
    }
}

/// An evaluable extension of a [`SampledRewardFunction`] to the whole space.
#[derive(Debug, Clone)]
pub struct ExtensionModel<P> {
    base: SampledRewardFunction<P>,
    kind: ExtensionKind,
    k_override: Option<f64>,
}

impl<P: MetricPoint> ExtensionModel<P> {
    pub fn new(base: SampledRewardFunction<P>, kind: ExtensionKind) -> Result<Self> {
        kind.validate()?;
        if base.is_empty() {
            return Err(Error::domain("cannot extend a function with no samples"));
        }
        Ok(ExtensionModel {
            base,
            kind,
            k_override: None,
        })
    }

    pub fn mcshane(base: SampledRewardFunction<P>) -> Result<Self> {
        Self::new(base, ExtensionKind::McShane)
    }

    /// Evaluates with a fixed constant instead of the sample's own `K`. Any
    /// value at least `K` still yields a valid extension.
    pub fn with_lipschitz_constant(mut self, k: f64) -> Self {
        self.k_override = Some(k);
        self
    }

    pub fn base(&self) -> &SampledRewardFunction<P> {
        &self.base
    }

    pub fn kind(&self) -> ExtensionKind {
        self.kind
    }

    pub fn lipschitz_constant(&self) -> f64 {
        self.k_override.unwrap_or(self.base.k)
    }

    /// Adds a sample to the underlying function.
    pub fn insert(&mut self, sample: RewardSample<P>) -> Result<bool> {
        self.base.insert(sample)
    }

    /// McShane and Whitney values at `x`, computed in one pass.
    pub fn envelopes(&self, x: &P) -> Result<(f64, f64)> {
        let k = self.lipschitz_constant();
        let mut lower = f64::NEG_INFINITY;
        let mut upper = f64::INFINITY;
        for s in &self.base.samples {
            let d = x.distance(&s.point, &self.base.metric)?;
            let kd = if k == 0.0 { 0.0 } else { k * d };
            lower = lower.max(s.value - kd);
            upper = upper.min(s.value + kd);
        }
        Ok((lower, upper))
    }

    pub fn mcshane_value(&self, x: &P) -> Result<f64> {
        Ok(self.envelopes(x)?.0)
    }

    pub fn whitney_value(&self, x: &P) -> Result<f64> {
        Ok(self.envelopes(x)?.1)
    }

    pub fn evaluate(&self, x: &P) -> Result<f64> {
        match self.kind {
            ExtensionKind::McShane => self.mcshane_value(x),
            ExtensionKind::Whitney => self.whitney_value(x),
            ExtensionKind::Blend(l) => {
                let (lo, hi) = self.envelopes(x)?;
                Ok((1.0 - l) * lo + l * hi)
            }
        }
    }

    pub fn evaluate_batch(&self, xs: &[P]) -> Result<Vec<f64>> {
        xs.iter()
            .enumerate()
            .map(|(i, x)| self.evaluate(x).map_err(|e| Error::at_index(i, e)))
            .collect()
    }
}

/// The sample minimising the representation bound, and the bound itself.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PropextBound {
    pub bound: f64,
    pub index: usize,
}

/// `min_{s ∈ M₀} ( r·‖s − x‖_∞ + K·Θ(s, x) + ε·K·E(s, x) )`.
///
/// When every sample value is `s·a_s` for an action in `r × S⁺_{ℓ¹}`, the
/// McShane value at `x` differs from `x·a_{s₀}` by at most this bound, where
/// `s₀` is the minimising sample.
pub fn propext_bound(
    f: &SampledRewardFunction<StateVector>,
    x: &StateVector,
    action_radius: f64,
) -> Result<PropextBound> {
    let k = f.lipschitz_constant();
    let eps = f.metric().epsilon;
    let mut best: Option<PropextBound> = None;
    for (index, s) in f.samples().iter().enumerate() {
        let p = &s.point;
        metric::check_dims(p.coords(), x.coords())?;
        let sup = p
            .coords()
            .iter()
            .zip(x.coords())
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        let theta = p.angular_distance(x)?;
        let e = p.euclidean_distance(x)?;
        let bound = action_radius * sup + k * theta + eps * k * e;
        if best.map_or(true, |b| bound < b.bound) {
            best = Some(PropextBound { bound, index });
        }
    }
    best.ok_or_else(|| Error::domain("bound over an empty sample set"))
}

/// Bound for a state on a ray through a sample: `x = λ·s` with `s ∈ M₀`,
/// `|λ−1|/λ · (r·‖x‖_∞ + ε·K·‖x‖₂)`.
pub fn scaled_state_bound(x: &StateVector, lambda: f64, k: f64, epsilon: f64, action_radius: f64) -> f64 {
    (lambda - 1.0).abs() / lambda * (action_radius * x.norm_inf() + epsilon * k * x.norm2())
}

/// `K·(Θ(x, M₀) + ε·E(x, M₀))`, a lower bound on `|x·a − R^M(x)|` for any
/// action `a` with `x·a ≥ R(s)` for every sample.
///
/// Fails with a precondition error when `a` does not dominate the samples.
pub fn lower_bound_gap(f: &SampledRewardFunction<StateVector>, x: &StateVector, a: &[f64]) -> Result<f64> {
    let payoff = x.dot(a)?;
    let top = f.max_value();
    if payoff < top {
        return Err(Error::Precondition(format!(
            "action pays {payoff} at the probe, below the largest sample value {top}"
        )));
    }
    let points: Vec<StateVector> = f.points().cloned().collect();
    let cfg = f.metric();
    let theta = metric::distance_to_set(x, &points, DistanceKind::Angular, cfg)?;
    let e = metric::distance_to_set(x, &points, DistanceKind::Euclidean, cfg)?;
    Ok(f.lipschitz_constant() * (theta + cfg.epsilon * e))
}

/// Picks the blend weight with the highest score; ties go to the earlier
/// grid entry. Returns `(λ, score)`.
pub fn best_blend(grid: &[f64], mut score: impl FnMut(ExtensionKind) -> Result<f64>) -> Result<(f64, f64)> {
    let mut best: Option<(f64, f64)> = None;
    for &l in grid {
        let kind = ExtensionKind::Blend(l);
        kind.validate()?;
        let s = score(kind)?;
        if best.map_or(true, |(_, b)| s > b) {
            best = Some((l, s));
        }
    }
    best.ok_or_else(|| Error::config("blend grid is empty"))
}
