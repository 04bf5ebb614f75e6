//! Day-by-day investment in a single currency.
//!
//! Each day `k ≥ 1` is described by a state built from the previous and the
//! current bar, and once the day has passed, by a result vector `r_k`. A
//! signed action `a` earns `r_k · a`. At step `k` the reward over
//! (state, action) pairs of all earlier days is extended to `(s_k, a)` for
//! every candidate action; the action with the largest extended reward is
//! taken.

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::data_io::filter_zero_states;
use crate::error::{Error, Result};
use crate::lipschitz::{best_blend, ExtensionKind, ExtensionModel, RewardSample, SampledRewardFunction};
use crate::metric::{MetricConfig, StateActionPair, StateVector};
use crate::reward::{duality_reward, ActionSet};
use crate::scenarios::report::{BacktestReport, Benchmark};

/// Scale of the opening price in the state.
pub const PRICE_SCALE: f64 = 1e-2;
/// Scale of traded volume in states and results.
pub const VOLUME_SCALE: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OhlcvBar {
    pub date: NaiveDate,
    pub open: f64,
    pub high: f64,
    pub low: f64,
    pub close: f64,
    pub volume: f64,
}

impl OhlcvBar {
    /// Describes the first violated bar invariant, if any.
    pub fn violation(&self) -> Option<String> {
        let prices = [self.open, self.high, self.low, self.close];
        if prices.iter().chain([&self.volume]).any(|x| !x.is_finite()) {
            return Some("non-finite value".into());
        }
        if prices.iter().any(|&p| p <= 0.0) {
            return Some("prices must be positive".into());
        }
        if self.high < self.open.max(self.close) {
            return Some(format!("high {} below max(open, close)", self.high));
        }
        if self.low > self.open.min(self.close) {
            return Some(format!("low {} above min(open, close)", self.low));
        }
        if self.volume < 0.0 {
            return Some("negative volume".into());
        }
        None
    }
}

/// Daily states with the bar index each one belongs to.
#[derive(Debug, Clone, PartialEq)]
pub struct DailyStates {
    pub states: Vec<StateVector>,
    pub days: Vec<usize>,
    /// Days whose state was the zero vector.
    pub removed: Vec<usize>,
}

/// `s_k = (open_{k−1} − close_{k−1}, open_k·10⁻², volume_{k−1}·10⁻⁸)` for
/// `k ≥ 1`; the first day has no state.
pub fn currency_states(bars: &[OhlcvBar]) -> Result<DailyStates> {
    if bars.len() < 2 {
        return Err(Error::insufficient(format!(
            "daily states need at least 2 bars, got {}",
            bars.len()
        )));
    }
    let raw: Vec<Vec<f64>> = bars
        .windows(2)
        .map(|w| {
            let (prev, today) = (&w[0], &w[1]);
            vec![
                prev.open - prev.close,
                today.open * PRICE_SCALE,
                prev.volume * VOLUME_SCALE,
            ]
        })
        .collect();
    let filtered = filter_zero_states(raw)?;
    Ok(DailyStates {
        states: filtered.states,
        days: filtered.kept.iter().map(|i| i + 1).collect(),
        removed: filtered.removed.iter().map(|i| i + 1).collect(),
    })
}

/// Result vector of every bar:
/// `(open − close, ((high − max(open, close)) − (low − min(open, close)))·10⁻², (volume − mean)·10⁻⁸)`.
pub fn currency_results(bars: &[OhlcvBar], mean_volume: f64) -> Result<Vec<Vec<f64>>> {
    if !(mean_volume > 0.0) || !mean_volume.is_finite() {
        return Err(Error::config(format!("mean volume must be positive, got {mean_volume}")));
    }
    Ok(bars
        .iter()
        .map(|b| {
            let upper = b.high - b.open.max(b.close);
            let lower = b.low - b.open.min(b.close);
            vec![
                b.open - b.close,
                (upper - lower) * PRICE_SCALE,
                (b.volume - mean_volume) * VOLUME_SCALE,
            ]
        })
        .collect())
}

pub fn mean_volume(bars: &[OhlcvBar]) -> f64 {
    bars.iter().map(|b| b.volume).sum::<f64>() / bars.len() as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CurrencyConfig {
    pub metric: MetricConfig,
    pub extension: ExtensionKind,
    /// Keep only the most recent days in the sample set.
    pub window: Option<usize>,
    /// Reference volume for the results; defaults to the series mean.
    pub mean_volume: Option<f64>,
    /// Radius of the ℓ² ball the optimal reward is taken over.
    pub optimal_radius: f64,
}

impl Default for CurrencyConfig {
    fn default() -> Self {
        CurrencyConfig {
            metric: MetricConfig::default(),
            extension: ExtensionKind::McShane,
            window: None,
            mean_volume: None,
            optimal_radius: 1.0,
        }
    }
}

impl CurrencyConfig {
    pub fn validate(&self) -> Result<()> {
        self.metric.validate()?;
        self.extension.validate()?;
        if self.window == Some(0) {
            return Err(Error::config("window must hold at least one day"));
        }
        if !(self.optimal_radius > 0.0) {
            return Err(Error::config("optimal_radius must be positive"));
        }
        Ok(())
    }
}

fn day_samples<'a>(
    state: &'a StateVector,
    result: &'a [f64],
    actions: &'a ActionSet,
) -> impl Iterator<Item = Result<RewardSample<StateActionPair>>> + 'a {
    actions.iter().map(move |a| {
        let value = duality_reward(result, a)?;
        Ok(RewardSample::new(StateActionPair::new(state.clone(), a.clone()), value))
    })
}

/// Runs the step-wise extension backtest over `bars`.
pub fn run_currency_backtest(bars: &[OhlcvBar], actions: &ActionSet, cfg: &CurrencyConfig) -> Result<BacktestReport> {
    cfg.validate()?;
    let daily = currency_states(bars)?;
    if daily.states.len() < 2 {
        return Err(Error::insufficient(format!(
            "need at least 2 days with nonzero states, got {}",
            daily.states.len()
        )));
    }
    if actions.dim() != 3 {
        return Err(Error::Dimension {
            expected: 3,
            found: actions.dim(),
        });
    }
    let mean_vol = cfg.mean_volume.unwrap_or_else(|| mean_volume(bars));
    let results = currency_results(bars, mean_vol)?;
    let benchmark = Benchmark::L2Ball {
        radius: cfg.optimal_radius,
    };

    let seed = actions.seed().unwrap_or(0);
    let mut report = BacktestReport::new(
        seed,
        serde_json::json!({
            "scenario": "currency",
            "currency": cfg,
            "actions": actions.len(),
            "action_seed": actions.seed(),
            "bars": bars.len(),
            "removed_days": daily.removed,
        }),
    );

    let new_model = |days: std::ops::Range<usize>| -> Result<ExtensionModel<StateActionPair>> {
        let mut f = SampledRewardFunction::empty(cfg.metric)?;
        for i in days {
            let day = daily.days[i];
            for sample in day_samples(&daily.states[i], &results[day], actions) {
                f.insert(sample?)?;
            }
        }
        ExtensionModel::new(f, cfg.extension)
    };

    let mut model = new_model(0..1).map_err(|e| Error::at_step(daily.days[1], e))?;
    for j in 1..daily.states.len() {
        let day = daily.days[j];
        let mut step = || -> Result<(usize, f64)> {
            if j > 1 {
                match cfg.window {
                    Some(w) if j > w => model = new_model(j - w..j)?,
                    _ => {
                        let prev = j - 1;
                        for sample in day_samples(&daily.states[prev], &results[daily.days[prev]], actions) {
                            model.insert(sample?)?;
                        }
                    }
                }
            }
            choose_action(&model, &daily.states[j], actions)
        };
        let (index, predicted) = step().map_err(|e| Error::at_step(day, e))?;
        let chosen = actions.get(index).expect("index from set");
        let realized = duality_reward(&results[day], chosen)?;
        let optimal = benchmark.value(&results[day])?;
        report.push(day, chosen.coords().to_vec(), predicted, realized, optimal);
    }
    Ok(report)
}

/// Action with the largest extended reward at `state`; ties go to the
/// lowest index.
pub fn choose_action(
    model: &ExtensionModel<StateActionPair>,
    state: &StateVector,
    actions: &ActionSet,
) -> Result<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for (i, a) in actions.iter().enumerate() {
        let v = model.evaluate(&StateActionPair::new(state.clone(), a.clone()))?;
        if best.map_or(true, |(_, b)| v > b) {
            best = Some((i, v));
        }
    }
    Ok(best.expect("action sets are non-empty"))
}

/// Grid search over blend weights, scored by the realized reward collected
/// over the second half of the backtest. Returns `(λ, score)`.
pub fn tune_currency_blend(
    bars: &[OhlcvBar],
    actions: &ActionSet,
    cfg: &CurrencyConfig,
    grid: &[f64],
) -> Result<(f64, f64)> {
    best_blend(grid, |kind| {
        let report = run_currency_backtest(bars, actions, &CurrencyConfig { extension: kind, ..*cfg })?;
        let half = report.steps.len() / 2;
        Ok(report.steps[half..].iter().map(|s| s.realized).sum())
    })
}
