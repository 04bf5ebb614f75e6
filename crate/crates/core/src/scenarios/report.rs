use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::reward::{best_action, optimal_reward_l2, optimal_reward_simplex, ActionSet};

/// One decision of a backtest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    /// Time index of the decision (day or minute of the input series).
    pub step: usize,
    pub action: Vec<f64>,
    pub predicted: f64,
    pub realized: f64,
    pub optimal: f64,
    pub cum_realized: f64,
    pub cum_optimal: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportMeta {
    pub seed: u64,
    pub config: serde_json::Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BacktestReport {
    pub meta: ReportMeta,
    pub steps: Vec<StepRecord>,
    pub survival_time: Option<usize>,
}

impl BacktestReport {
    pub fn new(seed: u64, config: serde_json::Value) -> Self {
        BacktestReport {
            meta: ReportMeta { seed, config },
            steps: Vec::new(),
            survival_time: None,
        }
    }

    /// Appends a step, extending the cumulative columns.
    pub fn push(&mut self, step: usize, action: Vec<f64>, predicted: f64, realized: f64, optimal: f64) {
        let (cr, co) = self
            .steps
            .last()
            .map_or((0.0, 0.0), |s| (s.cum_realized, s.cum_optimal));
        self.steps.push(StepRecord {
            step,
            action,
            predicted,
            realized,
            optimal,
            cum_realized: cr + realized,
            cum_optimal: co + optimal,
        });
    }

    pub fn cum_realized(&self) -> f64 {
        self.steps.last().map_or(0.0, |s| s.cum_realized)
    }

    pub fn cum_optimal(&self) -> f64 {
        self.steps.last().map_or(0.0, |s| s.cum_optimal)
    }

    /// Checks that the cumulative columns are the running sums of the
    /// per-step columns, accumulated in order.
    pub fn check_prefix_sums(&self) -> Result<()> {
        let (mut cr, mut co) = (0.0, 0.0);
        for s in &self.steps {
            cr += s.realized;
            co += s.optimal;
            if cr != s.cum_realized || co != s.cum_optimal {
                return Err(Error::domain(format!("cumulative columns diverge at step {}", s.step)));
            }
        }
        Ok(())
    }

    /// `cum_realized=… cum_optimal=… survival=…`
    pub fn summary(&self) -> String {
        let survival = self
            .survival_time
            .map_or_else(|| "n/a".to_string(), |t| t.to_string());
        format!(
            "cum_realized={:.6} cum_optimal={:.6} survival={survival}",
            self.cum_realized(),
            self.cum_optimal()
        )
    }
}

/// What "optimal" means when scoring a step after the fact.
#[derive(Debug, Clone, PartialEq)]
pub enum Benchmark {
    /// All actions in the ℓ² ball of this radius: `radius·‖r‖₂`.
    L2Ball { radius: f64 },
    /// All allocation actions scaled by `scale`: `scale·100·max(rᵢ)`.
    Simplex { scale: f64 },
    /// The best action of a finite set.
    Actions(ActionSet),
}

impl Benchmark {
    pub fn value(&self, r: &[f64]) -> Result<f64> {
        match self {
            Benchmark::L2Ball { radius } => Ok(optimal_reward_l2(r, *radius)),
            Benchmark::Simplex { scale } => Ok(scale * optimal_reward_simplex(r)),
            Benchmark::Actions(set) => Ok(best_action(r, set)?.reward),
        }
    }
}

/// Running total of the best achievable reward per step.
pub fn optimal_posthoc(reward_series: &[Vec<f64>], benchmark: &Benchmark) -> Result<Vec<f64>> {
    let mut total = 0.0;
    reward_series
        .iter()
        .map(|r| {
            total += benchmark.value(r)?;
            Ok(total)
        })
        .collect()
}
