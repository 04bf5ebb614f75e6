//! End-to-end backtests: daily currency trading with step-wise extension,
//! and multi-product allocation with optional dream augmentation.

pub mod allocation;
pub mod currency;
pub mod report;

pub use allocation::{
    allocation_states, label_training_states, run_allocation_backtest, AllocationConfig, AllocationOutcome,
    AllocationStates,
};
pub use currency::{
    choose_action, currency_results, currency_states, run_currency_backtest, tune_currency_blend, CurrencyConfig,
    DailyStates, OhlcvBar,
};
pub use report::{optimal_posthoc, BacktestReport, Benchmark, ReportMeta, StepRecord};
