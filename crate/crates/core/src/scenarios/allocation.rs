//! Splitting a fixed stake across several products.
//!
//! States are the cumulative value changes of each product since the start
//! of the series, with a trailing zero coordinate for the uninvested share.
//! The first half of the states is the training set: each one gets a reward
//! from the experience/random average and is represented by the mean action
//! of that average. The second half is traded by applying the action of the
//! closest training state, starting from a fixed capital.
//!
//! The same test period is traded twice: once with all real training
//! states, and once with a `1 − β` share of them plus dreams rewarded by the
//! extension of the kept real rewards.

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data_io::{filter_zero_states, PriceSeries};
use crate::dreams::{build_augmented_set, AugmentedSet, DreamConfig, LabeledState};
use crate::error::{Error, Result};
use crate::lipschitz::{ExtensionKind, ExtensionModel, RewardSample, SampledRewardFunction};
use crate::metric::{MetricConfig, MetricPoint, StateVector};
use crate::reward::{
    duality_reward, mean_reward_ab, sample_action_set, ActionKind, ActionSet, ActionVector, HistoryEntry,
    SimilarityRewardConfig, SIMPLEX_TOTAL,
};
use crate::scenarios::report::{BacktestReport, Benchmark};

/// Cumulative-change states with their row in the price series.
#[derive(Debug, Clone, PartialEq)]
pub struct AllocationStates {
    pub states: Vec<StateVector>,
    pub rows: Vec<usize>,
    pub removed: Vec<usize>,
}

/// `s_t = (p_t − p_0, 0)` per row; all-zero rows are dropped.
pub fn allocation_states(prices: &PriceSeries) -> Result<AllocationStates> {
    if prices.len() < 2 {
        return Err(Error::insufficient(format!(
            "allocation states need at least 2 rows, got {}",
            prices.len()
        )));
    }
    let origin = &prices.values[0];
    let raw: Vec<Vec<f64>> = prices
        .values
        .iter()
        .map(|row| {
            let mut s: Vec<f64> = row.iter().zip(origin).map(|(p, p0)| p - p0).collect();
            s.push(0.0);
            s
        })
        .collect();
    let filtered = filter_zero_states(raw)?;
    Ok(AllocationStates {
        states: filtered.states,
        rows: filtered.kept,
        removed: filtered.removed,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AllocationConfig {
    pub metric: MetricConfig,
    pub similarity: SimilarityRewardConfig,
    pub dreams: DreamConfig,
    pub extension: ExtensionKind,
    pub initial_capital: f64,
    /// Size of the random action pool.
    pub n_actions: usize,
    pub seed: u64,
}

impl Default for AllocationConfig {
    fn default() -> Self {
        AllocationConfig {
            metric: MetricConfig::default(),
            similarity: SimilarityRewardConfig::default(),
            dreams: DreamConfig::default(),
            extension: ExtensionKind::McShane,
            initial_capital: 1000.0,
            n_actions: 30,
            seed: 0,
        }
    }
}

impl AllocationConfig {
    pub fn validate(&self) -> Result<()> {
        self.metric.validate()?;
        self.similarity.validate()?;
        self.dreams.validate()?;
        self.extension.validate()?;
        if self.dreams.beta >= 1.0 {
            return Err(Error::config("beta must stay below 1 so some real states remain"));
        }
        if !(self.initial_capital > 0.0) {
            return Err(Error::config("initial capital must be positive"));
        }
        if self.n_actions == 0 {
            return Err(Error::config("n_actions must be positive"));
        }
        Ok(())
    }
}

/// Both trading runs plus the training material behind them.
#[derive(Debug, Clone)]
pub struct AllocationOutcome {
    pub real_only: BacktestReport,
    pub with_dreams: BacktestReport,
    pub training: Vec<LabeledState>,
    pub augmented: AugmentedSet,
}

/// Rewards and representing actions of the training states, in time order.
///
/// Each state's reward is the experience/random average over the entries of
/// all earlier training states; every action in that average is then logged
/// as an entry for the state.
pub fn label_training_states(
    states: &[StateVector],
    pool: &ActionSet,
    cfg: &SimilarityRewardConfig,
    metric: &MetricConfig,
    seed: u64,
) -> Result<Vec<LabeledState>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut history: Vec<HistoryEntry> = Vec::new();
    let mut out = Vec::with_capacity(states.len());
    for (i, s) in states.iter().enumerate() {
        let est = mean_reward_ab(s, &history, pool, cfg, metric, &mut rng).map_err(|e| Error::at_index(i, e))?;
        let used: Vec<ActionVector> = est.actions(&history, pool).cloned().collect();
        let action = ActionVector::mean_of(used.iter())?;
        for a in used {
            let reward = duality_reward(s.coords(), &a)?;
            history.push(HistoryEntry {
                state: s.clone(),
                action: a,
                reward,
            });
        }
        out.push(LabeledState {
            state: s.clone(),
            reward: est.reward,
            action,
        });
    }
    Ok(out)
}

/// Reward samples for the extension; repeated states share the mean of their
/// rewards.
fn merged_samples(entries: &[LabeledState]) -> Vec<RewardSample<StateVector>> {
    let mut merged: Vec<(StateVector, f64, usize)> = Vec::new();
    for e in entries {
        match merged.iter_mut().find(|(s, _, _)| *s == e.state) {
            Some((_, total, n)) => {
                *total += e.reward;
                *n += 1;
            }
            None => merged.push((e.state.clone(), e.reward, 1)),
        }
    }
    merged
        .into_iter()
        .map(|(s, total, n)| RewardSample::new(s, total / n as f64))
        .collect()
}

/// Trades the test rows with the action of the nearest training state.
///
/// Profit per step is `Σᵢ (aᵢ/100)·Δᵢ` with `Δ` the change of each product
/// to the next row (the cash slot never changes). Trading stops once the
/// capital is exhausted; `survival_time` is the number of steps traded.
pub fn trade(
    prices: &PriceSeries,
    test: &[(usize, StateVector)],
    training: &[(&StateVector, f64, &ActionVector)],
    metric: &MetricConfig,
    initial_capital: f64,
    mut report: BacktestReport,
) -> Result<BacktestReport> {
    if training.is_empty() {
        return Err(Error::insufficient("no training states to trade from"));
    }
    let benchmark = Benchmark::Simplex {
        scale: 1.0 / SIMPLEX_TOTAL,
    };
    let mut capital = initial_capital;
    let mut survival = 0;
    for (row, s) in test {
        let Some(next) = prices.values.get(row + 1) else {
            break;
        };
        let mut delta: Vec<f64> = next.iter().zip(&prices.values[*row]).map(|(b, a)| b - a).collect();
        delta.push(0.0);

        let mut best: Option<(usize, f64)> = None;
        for (i, (t, _, _)) in training.iter().enumerate() {
            let d = s.distance(t, metric).map_err(|e| Error::at_step(*row, e))?;
            if best.map_or(true, |(_, b)| d < b) {
                best = Some((i, d));
            }
        }
        let (i, _) = best.expect("training set is non-empty");
        let (_, predicted, action) = training[i];
        let realized = duality_reward(&delta, action)? / SIMPLEX_TOTAL;
        let optimal = benchmark.value(&delta)?;
        report.push(*row, action.coords().to_vec(), predicted, realized, optimal);
        capital += realized;
        survival += 1;
        if capital <= 0.0 {
            break;
        }
    }
    report.survival_time = Some(survival);
    Ok(report)
}

/// Trains on the first half of the states and trades the second half, with
/// and without dreams.
pub fn run_allocation_backtest(prices: &PriceSeries, cfg: &AllocationConfig) -> Result<AllocationOutcome> {
    cfg.validate()?;
    let all = allocation_states(prices)?;
    let n_train = all.states.len() / 2;
    let n_test = all.states.len() - n_train;
    if n_train < 2 || n_test < 2 {
        return Err(Error::insufficient(format!(
            "need at least 2 training and 2 test states, got {n_train} and {n_test}"
        )));
    }
    let dim = prices.n_products() + 1;
    let pool = sample_action_set(cfg.n_actions, ActionKind::L1Simplex100, dim, cfg.seed)?;
    let training = label_training_states(
        &all.states[..n_train],
        &pool,
        &cfg.similarity,
        &cfg.metric,
        cfg.seed.wrapping_add(1),
    )?;
    let test: Vec<(usize, StateVector)> = all.rows[n_train..]
        .iter()
        .copied()
        .zip(all.states[n_train..].iter().cloned())
        .collect();

    let meta = |mode: &str| {
        serde_json::json!({
            "scenario": "allocation",
            "mode": mode,
            "allocation": cfg,
            "rows": prices.len(),
            "products": prices.n_products(),
            "train_states": n_train,
            "removed_rows": all.removed,
        })
    };

    let real_entries: Vec<_> = training.iter().map(|e| (&e.state, e.reward, &e.action)).collect();
    let real_only = trade(
        prices,
        &test,
        &real_entries,
        &cfg.metric,
        cfg.initial_capital,
        BacktestReport::new(cfg.seed, meta("real")),
    )?;

    let beta = cfg.dreams.beta;
    let n_keep = ((n_train as f64) * (1.0 - beta)).round().max(2.0) as usize;
    let mut keep = index::sample(&mut ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(2)), n_train, n_keep).into_vec();
    keep.sort_unstable();
    let kept: Vec<LabeledState> = keep.iter().map(|&i| training[i].clone()).collect();

    let f = SampledRewardFunction::new(merged_samples(&kept), cfg.metric)?;
    let ext = ExtensionModel::new(f, cfg.extension)?;
    let mut candidates: Vec<ActionVector> = kept.iter().map(|e| e.action.clone()).collect();
    candidates.extend(pool.iter().cloned());
    let candidates = ActionSet::new(candidates, None)?;
    let augmented = build_augmented_set(&kept, &cfg.dreams, &ext, &candidates)?;
    let dream_entries: Vec<_> = augmented.entries().collect();
    let with_dreams = trade(
        prices,
        &test,
        &dream_entries,
        &cfg.metric,
        cfg.initial_capital,
        BacktestReport::new(cfg.seed, meta("dreams")),
    )?;

    Ok(AllocationOutcome {
        real_only,
        with_dreams,
        training,
        augmented,
    })
}
