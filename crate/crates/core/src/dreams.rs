//! Synthetic states ("dreams") for enlarging a training set.
//!
//! A dream mixes two distinct real states, `t·sᵢ + (1−t)·sⱼ`, and adds
//! Gaussian noise whose per-coordinate spread follows the spread of the real
//! data. Its reward comes from the extension of the real rewards, and it is
//! paired with the allocation action whose payoff comes closest to that
//! reward.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lipschitz::ExtensionModel;
use crate::metric::StateVector;
use crate::reward::{duality_reward, ActionKind, ActionSet, ActionVector};

const MAX_REDRAWS: usize = 100;

/// Distribution of the interpolation weight `t`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mixing {
    /// `t ~ U[0, 1]`.
    #[default]
    Uniform,
    /// A fixed weight in `[0, 1]`.
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DreamConfig {
    /// Share of dreams in the augmented set.
    pub beta: f64,
    /// Noise standard deviation, in units of the per-coordinate sample std.
    pub noise_scale: f64,
    pub mixing: Mixing,
    pub seed: u64,
}

impl Default for DreamConfig {
    fn default() -> Self {
        DreamConfig {
            beta: 0.5,
            noise_scale: 0.1,
            mixing: Mixing::Uniform,
            seed: 0,
        }
    }
}

impl DreamConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.beta) {
            return Err(Error::config(format!("beta must lie in [0, 1], got {}", self.beta)));
        }
        if !(self.noise_scale >= 0.0) || !self.noise_scale.is_finite() {
            return Err(Error::config("noise_scale must be finite and non-negative"));
        }
        if let Mixing::Fixed(t) = self.mixing {
            if !(0.0..=1.0).contains(&t) {
                return Err(Error::config(format!("fixed mixing weight must lie in [0, 1], got {t}")));
            }
        }
        Ok(())
    }
}

/// Number of dreams that makes them a `beta` share of `n_real + dreams`.
pub fn dream_count(n_real: usize, beta: f64) -> Result<usize> {
    if !(0.0..1.0).contains(&beta) {
        return Err(Error::config(format!(
            "dream share must lie in [0, 1) to keep real states, got {beta}"
        )));
    }
    Ok((n_real as f64 * beta / (1.0 - beta)).round() as usize)
}

/// A synthetic state with the real states it was mixed from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dream {
    pub state: StateVector,
    pub parents: (usize, usize),
    /// Weight on the first parent.
    pub t: f64,
}

/// Draws `count` dreams from `real`; deterministic for a fixed seed.
pub fn generate_dreams(real: &[StateVector], count: usize, cfg: &DreamConfig) -> Result<Vec<Dream>> {
    cfg.validate()?;
    if count == 0 {
        return Ok(Vec::new());
    }
    if real.len() < 2 {
        return Err(Error::insufficient(format!(
            "dreams interpolate two distinct real states, got {}",
            real.len()
        )));
    }
    let dim = real[0].dim();
    if let Some(s) = real.iter().find(|s| s.dim() != dim) {
        return Err(Error::Dimension {
            expected: dim,
            found: s.dim(),
        });
    }
    let noise: Vec<Option<Normal<f64>>> = coordinate_std(real)
        .into_iter()
        .map(|sd| {
            let scale = cfg.noise_scale * sd;
            (scale > 0.0).then(|| Normal::new(0.0, scale).expect("finite positive scale"))
        })
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let n = real.len();
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let mut drawn = None;
        for _ in 0..MAX_REDRAWS {
            let i = rng.random_range(0..n);
            let mut j = rng.random_range(0..n - 1);
            if j >= i {
                j += 1;
            }
            let t = match cfg.mixing {
                Mixing::Uniform => rng.random::<f64>(),
                Mixing::Fixed(t) => t,
            };
            let coords: Vec<f64> = real[i]
                .coords()
                .iter()
                .zip(real[j].coords())
                .zip(&noise)
                .map(|((a, b), eta)| {
                    let base = t * a + (1.0 - t) * b;
                    match eta {
                        Some(dist) => base + dist.sample(&mut rng),
                        None => base,
                    }
                })
                .collect();
            if let Ok(state) = StateVector::new(coords) {
                drawn = Some(Dream {
                    state,
                    parents: (i, j),
                    t,
                });
                break;
            }
        }
        out.push(drawn.ok_or_else(|| {
            Error::domain(format!("no nonzero dream after {MAX_REDRAWS} draws"))
        })?);
    }
    Ok(out)
}

fn coordinate_std(real: &[StateVector]) -> Vec<f64> {
    let n = real.len() as f64;
    let dim = real[0].dim();
    (0..dim)
        .map(|c| {
            let mean = real.iter().map(|s| s.coords()[c]).sum::<f64>() / n;
            let var = real
                .iter()
                .map(|s| (s.coords()[c] - mean).powi(2))
                .sum::<f64>()
                / (n - 1.0);
            var.sqrt()
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AssignedAction {
    pub index: usize,
    /// `|R^M(s*) − s*·a|` for the chosen action.
    pub gap: f64,
    /// `R^M(s*)`.
    pub value: f64,
}

/// The allocation action of `actions` whose payoff at `s_star` is closest to
/// the extended reward there. Ties go to the lowest index.
pub fn assign_dream_action(
    s_star: &StateVector,
    ext: &ExtensionModel<StateVector>,
    actions: &ActionSet,
) -> Result<AssignedAction> {
    if actions.kind() != ActionKind::L1Simplex100 {
        return Err(Error::Precondition("dream actions must be allocation actions".into()));
    }
    let value = ext.evaluate(s_star)?;
    let mut best: Option<AssignedAction> = None;
    for (index, a) in actions.iter().enumerate() {
        let gap = (value - duality_reward(s_star.coords(), a)?).abs();
        if best.map_or(true, |b| gap < b.gap) {
            best = Some(AssignedAction { index, gap, value });
        }
    }
    Ok(best.expect("action sets are non-empty"))
}

/// A real training state with its reward and representing action.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledState {
    pub state: StateVector,
    pub reward: f64,
    pub action: ActionVector,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DreamEntry {
    pub state: StateVector,
    pub reward: f64,
    pub action: ActionVector,
    pub parents: (usize, usize),
    pub t: f64,
    pub gap: f64,
}

/// Real states followed by dreams.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct AugmentedSet {
    pub real: Vec<LabeledState>,
    pub dreams: Vec<DreamEntry>,
}

impl AugmentedSet {
    pub fn len(&self) -> usize {
        self.real.len() + self.dreams.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dream_fraction(&self) -> f64 {
        if self.is_empty() {
            0.0
        } else {
            self.dreams.len() as f64 / self.len() as f64
        }
    }

    /// `(state, reward, action)` over real entries, then dreams.
    pub fn entries(&self) -> impl Iterator<Item = (&StateVector, f64, &ActionVector)> {
        self.real
            .iter()
            .map(|e| (&e.state, e.reward, &e.action))
            .chain(self.dreams.iter().map(|e| (&e.state, e.reward, &e.action)))
    }
}

/// Adds `round(N·β/(1−β))` dreams to `real`, each rewarded by `ext` and
/// paired with an action from `actions`.
pub fn build_augmented_set(
    real: &[LabeledState],
    cfg: &DreamConfig,
    ext: &ExtensionModel<StateVector>,
    actions: &ActionSet,
) -> Result<AugmentedSet> {
    cfg.validate()?;
    let count = dream_count(real.len(), cfg.beta)?;
    let states: Vec<StateVector> = real.iter().map(|e| e.state.clone()).collect();
    let dreams = generate_dreams(&states, count, cfg)?
        .into_iter()
        .map(|d| {
            let assigned = assign_dream_action(&d.state, ext, actions)?;
            Ok(DreamEntry {
                reward: assigned.value,
                action: actions.get(assigned.index).expect("index from set").clone(),
                state: d.state,
                parents: d.parents,
                t: d.t,
                gap: assigned.gap,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(AugmentedSet {
        real: real.to_vec(),
        dreams,
    })
}
