//! Actions, duality rewards and the similarity-averaged reward estimate.
//!
//! An action is a dual vector applied to a state-value vector by dot
//! product. Two action families are supported: percentage allocations
//! (`100 × S⁺_{ℓ¹}`, nonnegative and summing to 100, with an optional cash
//! slot) and signed directives (a unit vector of `ℝⁿ⁻¹` followed by `±1`).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metric::{self, MetricConfig, MetricPoint, StateVector};

/// Total of an allocation action.
pub const SIMPLEX_TOTAL: f64 = 100.0;

const ACTION_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionKind {
    /// Nonnegative coordinates summing to 100.
    L1Simplex100,
    /// Unit ℓ² vector in all but the last coordinate; last coordinate ±1.
    L2SphereSigned,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawAction")]
pub struct ActionVector {
    coords: Vec<f64>,
    kind: ActionKind,
}

#[derive(Deserialize)]
struct RawAction {
    coords: Vec<f64>,
    kind: ActionKind,
}

impl TryFrom<RawAction> for ActionVector {
    type Error = Error;

    fn try_from(raw: RawAction) -> Result<Self> {
        ActionVector::new(raw.coords, raw.kind)
    }
}

impl ActionVector {
    pub fn new(coords: Vec<f64>, kind: ActionKind) -> Result<Self> {
        if coords.is_empty() || coords.iter().any(|x| !x.is_finite()) {
            return Err(Error::domain("action coordinates must be finite and non-empty"));
        }
        match kind {
            ActionKind::L1Simplex100 => {
                if coords.iter().any(|&x| x < 0.0) {
                    return Err(Error::domain("allocation actions must be nonnegative"));
                }
                let total: f64 = coords.iter().sum();
                if (total - SIMPLEX_TOTAL).abs() > ACTION_TOL * SIMPLEX_TOTAL {
                    return Err(Error::domain(format!(
                        "allocation action sums to {total}, expected {SIMPLEX_TOTAL}"
                    )));
                }
            }
            ActionKind::L2SphereSigned => {
                let (head, last) = coords.split_at(coords.len() - 1);
                if head.is_empty() {
                    return Err(Error::domain("signed actions need at least two coordinates"));
                }
                if (metric::norm2(head) - 1.0).abs() > ACTION_TOL {
                    return Err(Error::domain("signed action direction must have unit ℓ² norm"));
                }
                if last[0] != 1.0 && last[0] != -1.0 {
                    return Err(Error::domain("signed action sign must be +1 or -1"));
                }
            }
        }
        Ok(ActionVector { coords, kind })
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn kind(&self) -> ActionKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn norm2(&self) -> f64 {
        metric::norm2(&self.coords)
    }

    /// Componentwise mean of allocation actions; the result is again an
    /// allocation action.
    pub fn mean_of<'a>(actions: impl IntoIterator<Item = &'a ActionVector>) -> Result<Self> {
        let mut acc: Option<(Vec<f64>, ActionKind)> = None;
        let mut n = 0usize;
        for a in actions {
            let (sum, kind) = acc.get_or_insert_with(|| (vec![0.0; a.dim()], a.kind));
            if a.kind != *kind || a.dim() != sum.len() {
                return Err(Error::domain("cannot average actions of different kinds or dimensions"));
            }
            for (s, x) in sum.iter_mut().zip(&a.coords) {
                *s += x;
            }
            n += 1;
        }
        let (sum, kind) = acc.ok_or_else(|| Error::domain("mean of an empty action list"))?;
        if kind != ActionKind::L1Simplex100 {
            return Err(Error::domain("only allocation actions are closed under averaging"));
        }
        let coords = sum.into_iter().map(|x| x / n as f64).collect();
        ActionVector::new(coords, kind)
    }
}

impl AsRef<[f64]> for ActionVector {
    fn as_ref(&self) -> &[f64] {
        &self.coords
    }
}

/// A non-empty, homogeneous finite set of actions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionSet {
    actions: Vec<ActionVector>,
    seed: Option<u64>,
}

impl ActionSet {
    pub fn new(actions: Vec<ActionVector>, seed: Option<u64>) -> Result<Self> {
        let first = actions
            .first()
            .ok_or_else(|| Error::domain("action set must not be empty"))?;
        if let Some(bad) = actions
            .iter()
            .position(|a| a.kind != first.kind || a.dim() != first.dim())
        {
            return Err(Error::domain(format!(
                "action {bad} differs in kind or dimension from action 0"
            )));
        }
        Ok(ActionSet { actions, seed })
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn get(&self, i: usize) -> Option<&ActionVector> {
        self.actions.get(i)
    }

    pub fn iter(&self) -> std::slice::Iter<'_, ActionVector> {
        self.actions.iter()
    }

    pub fn actions(&self) -> &[ActionVector] {
        &self.actions
    }

    pub fn kind(&self) -> ActionKind {
        self.actions[0].kind
    }

    pub fn dim(&self) -> usize {
        self.actions[0].dim()
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    /// Largest ℓ² norm in the set.
    pub fn max_norm2(&self) -> f64 {
        self.actions.iter().map(ActionVector::norm2).fold(0.0, f64::max)
    }
}

impl<'a> IntoIterator for &'a ActionSet {
    type Item = &'a ActionVector;
    type IntoIter = std::slice::Iter<'a, ActionVector>;

    fn into_iter(self) -> Self::IntoIter {
        self.actions.iter()
    }
}

/// `R₀ = v · a`.
pub fn duality_reward(values: &[f64], a: &ActionVector) -> Result<f64> {
    metric::dot(values, a.coords())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BestAction {
    pub index: usize,
    pub reward: f64,
}

/// The action of `set` with the largest duality reward on `values`. Ties go
/// to the lowest index.
pub fn best_action(values: &[f64], set: &ActionSet) -> Result<BestAction> {
    let mut best: Option<BestAction> = None;
    for (index, a) in set.iter().enumerate() {
        let reward = duality_reward(values, a)?;
        if best.map_or(true, |b| reward > b.reward) {
            best = Some(BestAction { index, reward });
        }
    }
    best.ok_or_else(|| Error::domain("best action of an empty set"))
}

/// Supremum of `v · a` over the ℓ² ball of the given radius.
pub fn optimal_reward_l2(values: &[f64], radius: f64) -> f64 {
    radius * metric::norm2(values)
}

/// Supremum of `v · a` over allocation actions (`a ≥ 0`, `Σa = 100`).
pub fn optimal_reward_simplex(values: &[f64]) -> f64 {
    SIMPLEX_TOTAL * values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

/// Random action set, deterministic for a fixed seed.
///
/// Allocation actions are uniform on the simplex (normalised `Exp(1)`
/// draws, i.e. a symmetric Dirichlet(1)); signed actions take a uniform
/// direction on the unit sphere of `ℝ^{dim−1}` and a fair random sign.
pub fn sample_action_set(n_actions: usize, kind: ActionKind, dim: usize, seed: u64) -> Result<ActionSet> {
    if n_actions == 0 {
        return Err(Error::config("action set needs at least one action"));
    }
    match kind {
        ActionKind::L1Simplex100 if dim == 0 => {
            return Err(Error::config("allocation actions need dimension >= 1"))
        }
        ActionKind::L2SphereSigned if dim < 2 => {
            return Err(Error::config("signed actions need dimension >= 2"))
        }
        _ => {}
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut actions = Vec::with_capacity(n_actions);
    for _ in 0..n_actions {
        let coords = match kind {
            ActionKind::L1Simplex100 => sample_simplex(&mut rng, dim),
            ActionKind::L2SphereSigned => sample_signed(&mut rng, dim),
        };
        actions.push(ActionVector::new(coords, kind)?);
    }
    ActionSet::new(actions, Some(seed))
}

pub(crate) fn sample_simplex<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> Vec<f64> {
    loop {
        let draws: Vec<f64> = (0..dim).map(|_| rng.sample::<f64, _>(Exp1)).collect();
        let total: f64 = draws.iter().sum();
        if total > 0.0 {
            return draws.into_iter().map(|x| SIMPLEX_TOTAL * x / total).collect();
        }
    }
}

fn sample_signed<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> Vec<f64> {
    let mut dir: Vec<f64>;
    loop {
        dir = (0..dim - 1).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let n = metric::norm2(&dir);
        if n > 1e-12 {
            dir.iter_mut().for_each(|x| *x /= n);
            break;
        }
    }
    dir.push(if rng.random_bool(0.5) { 1.0 } else { -1.0 });
    dir
}

/// Parameters of the experience/random reward average.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimilarityRewardConfig {
    /// Radius below which a historical state counts as similar.
    pub sim_epsilon: f64,
    /// Share of the draw taken from experience.
    pub frac_experience: f64,
    /// Fraction of the best-rewarded similar entries eligible for the experience share.
    pub top_quantile: f64,
    /// Nominal size of the averaged multiset.
    pub pool_size: usize,
    /// Fill a short experience share with extra random actions.
    pub pad_from_random: bool,
}

impl Default for SimilarityRewardConfig {
    fn default() -> Self {
        SimilarityRewardConfig {
            sim_epsilon: 0.5,
            frac_experience: 0.9,
            top_quantile: 0.25,
            pool_size: 30,
            pad_from_random: true,
        }
    }
}

impl SimilarityRewardConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.sim_epsilon > 0.0) || !self.sim_epsilon.is_finite() {
            return Err(Error::config("sim_epsilon must be positive"));
        }
        if !(0.0..=1.0).contains(&self.frac_experience) {
            return Err(Error::config("frac_experience must lie in [0, 1]"));
        }
        if !(self.top_quantile > 0.0 && self.top_quantile <= 1.0) {
            return Err(Error::config("top_quantile must lie in (0, 1]"));
        }
        if self.pool_size == 0 {
            return Err(Error::config("pool_size must be positive"));
        }
        Ok(())
    }

    /// Nominal number of experience actions, `⌈frac·pool_size⌉`.
    pub fn experience_target(&self) -> usize {
        // The small offset keeps 0.9·30 from rounding up to 28.
        (self.frac_experience * self.pool_size as f64 - 1e-9).ceil().max(0.0) as usize
    }
}

/// A checked action: the state it acted on, the action, and its reward there.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub state: StateVector,
    pub action: ActionVector,
    pub reward: f64,
}

/// Outcome of [`mean_reward_ab`].
#[derive(Debug, Clone, PartialEq)]
pub struct AbEstimate {
    /// Mean of `s · a` over the drawn multiset.
    pub reward: f64,
    /// History indices forming the experience share.
    pub from_history: Vec<usize>,
    /// Pool indices of the random share (with repetition).
    pub from_pool: Vec<usize>,
}

impl AbEstimate {
    pub fn len(&self) -> usize {
        self.from_history.len() + self.from_pool.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// The actions of the multiset, experience share first.
    pub fn actions<'a>(
        &'a self,
        history: &'a [HistoryEntry],
        pool: &'a ActionSet,
    ) -> impl Iterator<Item = &'a ActionVector> + 'a {
        self.from_history
            .iter()
            .map(move |&i| &history[i].action)
            .chain(self.from_pool.iter().map(move |&j| &pool.actions[j]))
    }
}

/// Reward of `s` as the mean of `s · a` over `A ∪ B`.
///
/// `A` holds the best-rewarded actions among history entries whose state
/// lies within `sim_epsilon` of `s` (the top `top_quantile` of them, at most
/// `⌈frac_experience·pool_size⌉`); `B` holds actions drawn uniformly with
/// replacement from `pool`. With no similar history the estimate uses `B`
/// alone.
pub fn mean_reward_ab<R: Rng + ?Sized>(
    s: &StateVector,
    history: &[HistoryEntry],
    pool: &ActionSet,
    cfg: &SimilarityRewardConfig,
    metric: &MetricConfig,
    rng: &mut R,
) -> Result<AbEstimate> {
    cfg.validate()?;
    let mut similar = Vec::new();
    for (i, h) in history.iter().enumerate() {
        if s.distance(&h.state, metric)? < cfg.sim_epsilon {
            similar.push(i);
        }
    }
    similar.sort_by(|&i, &j| history[j].reward.total_cmp(&history[i].reward).then(i.cmp(&j)));
    let eligible = if similar.is_empty() {
        0
    } else {
        ((cfg.top_quantile * similar.len() as f64).ceil() as usize).clamp(1, similar.len())
    };
    let target = cfg.experience_target();
    let from_history: Vec<usize> = similar.into_iter().take(eligible.min(target)).collect();

    let mut n_random = if cfg.pad_from_random {
        cfg.pool_size - from_history.len()
    } else {
        cfg.pool_size - target
    };
    if from_history.is_empty() && n_random == 0 {
        n_random = cfg.pool_size;
    }
    let from_pool: Vec<usize> = (0..n_random).map(|_| rng.random_range(0..pool.len())).collect();

    let mut total = 0.0;
    for &i in &from_history {
        total += duality_reward(s.coords(), &history[i].action)?;
    }
    for &j in &from_pool {
        total += duality_reward(s.coords(), &pool.actions[j])?;
    }
    let count = from_history.len() + from_pool.len();
    Ok(AbEstimate {
        reward: total / count as f64,
        from_history,
        from_pool,
    })
}
