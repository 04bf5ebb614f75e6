//! Command-line front end: `run`, `synth` and `verify`.
//!
//! Exit codes: 0 success, 1 failed verification, 2 configuration error,
//! 3 I/O or malformed input, 4 domain error.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data_io::{
    load_ohlcv, load_prices, synth_market, synth_ohlcv, write_ohlcv, write_prices, write_report,
    OhlcvSynthParams, PriceSeries, ReportFormat, SynthParams,
};
use crate::dreams::DreamConfig;
use crate::error::{Error, Result};
use crate::lipschitz::{
    lower_bound_gap, propext_bound, ExtensionKind, ExtensionModel, RewardSample, SampledRewardFunction,
};
use crate::metric::{eps_distance, MetricConfig, StateVector};
use crate::reward::{sample_action_set, ActionKind, ActionVector, SimilarityRewardConfig, SIMPLEX_TOTAL};
use crate::scenarios::{allocation_states, run_allocation_backtest, run_currency_backtest, AllocationConfig, CurrencyConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VERIFY: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_IO: i32 = 3;
pub const EXIT_DOMAIN: i32 = 4;

/// Default directory for reports and generated series.
pub const OUT_DIR_ENV: &str = "LIPDREAM_OUT_DIR";

pub fn exit_code(err: &Error) -> i32 {
    match err.root() {
        Error::Config(_) => EXIT_CONFIG,
        Error::Io { .. } | Error::Parse { .. } => EXIT_IO,
        _ => EXIT_DOMAIN,
    }
}

#[derive(Debug, Parser)]
#[command(name = "lipdream", version, about = "Lipschitz-extension backtests for investment decisions")]
pub struct Cli {
    /// More output; repeat for debug logging.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a backtest scenario and write its report.
    Run(RunArgs),
    /// Write a seeded synthetic series.
    Synth(SynthArgs),
    /// Check the worked example and the extension bounds on a random battery.
    Verify(VerifyArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Scenario {
    #[default]
    Currency,
    Allocation,
}

/// Everything a run depends on. Loaded from TOML and overridden by flags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub scenario: Scenario,
    pub epsilon: f64,
    pub extension: ExtensionKind,
    /// Dream fraction of the training set (allocation only).
    pub beta: f64,
    pub actions: usize,
    pub sim_epsilon: f64,
    pub seed: u64,
    /// OHLCV file (currency) or price series (allocation). A seeded
    /// synthetic series is used when absent.
    pub input: Option<PathBuf>,
    pub output: Option<PathBuf>,
    /// Inferred from the output extension when absent; JSON otherwise.
    pub format: Option<ReportFormat>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            scenario: Scenario::Currency,
            epsilon: 0.1,
            extension: ExtensionKind::McShane,
            beta: 0.5,
            actions: 30,
            sim_epsilon: 0.5,
            seed: 0,
            input: None,
            output: None,
            format: None,
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| Error::config(format!("{}: {e}", path.display())))
    }

    pub fn validate(&self) -> Result<()> {
        self.metric().validate()?;
        self.extension.validate()?;
        if self.actions == 0 {
            return Err(Error::config("actions must be positive"));
        }
        if self.scenario == Scenario::Allocation {
            self.allocation().validate()?;
        }
        Ok(())
    }

    pub fn metric(&self) -> MetricConfig {
        MetricConfig { epsilon: self.epsilon }
    }

    pub fn currency(&self) -> CurrencyConfig {
        CurrencyConfig {
            metric: self.metric(),
            extension: self.extension,
            ..CurrencyConfig::default()
        }
    }

    pub fn allocation(&self) -> AllocationConfig {
        AllocationConfig {
            metric: self.metric(),
            similarity: SimilarityRewardConfig {
                sim_epsilon: self.sim_epsilon,
                ..SimilarityRewardConfig::default()
            },
            dreams: DreamConfig {
                beta: self.beta,
                seed: self.seed,
                ..DreamConfig::default()
            },
            extension: self.extension,
            n_actions: self.actions,
            seed: self.seed,
            ..AllocationConfig::default()
        }
    }

    pub fn report_format(&self) -> ReportFormat {
        self.format.unwrap_or_else(|| {
            let ext = self.output.as_deref().and_then(Path::extension);
            match ext.and_then(|e| e.to_str()) {
                Some(e) if e.eq_ignore_ascii_case("csv") => ReportFormat::Csv,
                _ => ReportFormat::Json,
            }
        })
    }

    /// Output path, falling back to `$LIPDREAM_OUT_DIR/report-<scenario>-<seed>.<fmt>`.
    pub fn output_path(&self) -> PathBuf {
        if let Some(p) = &self.output {
            return p.clone();
        }
        let scenario = match self.scenario {
            Scenario::Currency => "currency",
            Scenario::Allocation => "allocation",
        };
        out_dir().join(format!("report-{scenario}-{}.{}", self.seed, self.report_format()))
    }
}

fn out_dir() -> PathBuf {
    std::env::var_os(OUT_DIR_ENV).map_or_else(|| PathBuf::from("."), PathBuf::from)
}

#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    /// TOML file with RunConfig keys; flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub scenario: Option<Scenario>,
    #[arg(long, allow_negative_numbers = true)]
    pub epsilon: Option<f64>,
    /// mcshane, whitney or blend:<λ>.
    #[arg(long)]
    pub extension: Option<ExtensionKind>,
    #[arg(long, allow_negative_numbers = true)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub actions: Option<usize>,
    #[arg(long, allow_negative_numbers = true)]
    pub sim_epsilon: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long)]
    pub format: Option<ReportFormat>,
}

impl RunArgs {
    pub fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        macro_rules! set {
            ($($f:ident),*) => { $( if let Some(v) = self.$f.clone() { cfg.$f = v; } )* };
        }
        set!(scenario, epsilon, extension, beta, actions, sim_epsilon, seed);
        if self.input.is_some() {
            cfg.input = self.input.clone();
        }
        if self.output.is_some() {
            cfg.output = self.output.clone();
        }
        if self.format.is_some() {
            cfg.format = self.format;
        }
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum)]
pub enum SynthKind {
    /// Random-walk price series (`t,p1..pn`).
    #[default]
    Prices,
    /// Daily OHLCV bars.
    Ohlcv,
}

#[derive(Debug, Clone, Args)]
pub struct SynthArgs {
    #[arg(long, value_enum, default_value_t = SynthKind::Prices)]
    pub kind: SynthKind,
    /// Rows to generate (steps or days).
    #[arg(long, default_value_t = 800)]
    pub steps: usize,
    #[arg(long, default_value_t = 4)]
    pub products: usize,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub drift: f64,
    /// Per-step standard deviation (prices) or of the daily log return (ohlcv).
    #[arg(long)]
    pub volatility: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

impl Default for SynthArgs {
    fn default() -> Self {
        SynthArgs {
            kind: SynthKind::Prices,
            steps: 800,
            products: 4,
            drift: 0.0,
            volatility: None,
            seed: 0,
            output: None,
        }
    }
}

#[derive(Debug, Clone, Default, Args)]
pub struct VerifyArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Price series whose states join the battery.
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long, default_value_t = 100)]
    pub instances: usize,
    /// Multiplies the Lipschitz constant used by the extension.
    #[arg(long, hide = true)]
    pub inject_k_scale: Option<f64>,
}

/// Parses `args` (program name first), runs the command and returns the exit code.
pub fn main_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).try_init();
    dispatch(&cli)
}

pub fn dispatch(cli: &Cli) -> i32 {
    let verbose = cli.verbose > 0;
    let outcome = match &cli.command {
        Command::Run(args) => args.resolve().and_then(|cfg| cmd_run(&cfg)).map(|out| {
            println!("{}", out.summary);
            for p in &out.reports {
                println!("wrote {}", p.display());
            }
            EXIT_OK
        }),
        Command::Synth(args) => cmd_synth(args).map(|p| {
            println!("wrote {}", p.display());
            EXIT_OK
        }),
        Command::Verify(args) => cmd_verify(args, verbose).map(|report| {
            for line in &report.log {
                println!("{line}");
            }
            match report.failures.first() {
                None => {
                    println!("verify: all {} checks passed", report.checks);
                    EXIT_OK
                }
                Some(first) => {
                    eprintln!("verify: {} of {} checks failed; first: {first}", report.failures.len(), report.checks);
                    EXIT_VERIFY
                }
            }
        }),
    };
    outcome.unwrap_or_else(|e| {
        eprintln!("error: {e}");
        exit_code(&e)
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub summary: String,
    pub reports: Vec<PathBuf>,
}

fn with_suffix(path: &Path, tag: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let name = match path.extension() {
        Some(ext) => format!("{stem}.{tag}.{}", ext.to_string_lossy()),
        None => format!("{stem}.{tag}"),
    };
    path.with_file_name(name)
}

fn ensure_parent(path: &Path) -> Result<()> {
    match path.parent() {
        Some(dir) if !dir.as_os_str().is_empty() => std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e)),
        _ => Ok(()),
    }
}

/// Runs the configured scenario and writes its report(s). The allocation
/// scenario writes `<stem>.real.<ext>` and `<stem>.dreams.<ext>`.
pub fn cmd_run(cfg: &RunConfig) -> Result<RunOutput> {
    cfg.validate()?;
    let format = cfg.report_format();
    let out = cfg.output_path();
    ensure_parent(&out)?;
    let run_meta = serde_json::to_value(cfg).map_err(|e| Error::config(e.to_string()))?;
    match cfg.scenario {
        Scenario::Currency => {
            let bars = match &cfg.input {
                Some(p) => {
                    let load = load_ohlcv(p)?;
                    for r in &load.rejected {
                        log::warn!("{}: line {} rejected: {}", p.display(), r.line, r.reason);
                    }
                    load.bars
                }
                None => synth_ohlcv(&OhlcvSynthParams {
                    seed: cfg.seed,
                    ..OhlcvSynthParams::default()
                })?,
            };
            let actions = sample_action_set(cfg.actions, ActionKind::L2SphereSigned, 3, cfg.seed)?;
            let mut report = run_currency_backtest(&bars, &actions, &cfg.currency())?;
            report.meta.config["run"] = run_meta;
            write_report(&report, &out, format)?;
            Ok(RunOutput {
                summary: report.summary(),
                reports: vec![out],
            })
        }
        Scenario::Allocation => {
            let prices = match &cfg.input {
                Some(p) => load_prices(p)?,
                None => synth_market(&SynthParams {
                    seed: cfg.seed,
                    ..SynthParams::default()
                })?,
            };
            let mut outcome = run_allocation_backtest(&prices, &cfg.allocation())?;
            let (real_path, dream_path) = (with_suffix(&out, "real"), with_suffix(&out, "dreams"));
            for (report, path) in [(&mut outcome.real_only, &real_path), (&mut outcome.with_dreams, &dream_path)] {
                report.meta.config["run"] = run_meta.clone();
                write_report(report, path, format)?;
            }
            Ok(RunOutput {
                summary: format!(
                    "real: {} | dreams: {}",
                    outcome.real_only.summary(),
                    outcome.with_dreams.summary()
                ),
                reports: vec![real_path, dream_path],
            })
        }
    }
}

/// Writes a seeded synthetic series and returns its path.
pub fn cmd_synth(args: &SynthArgs) -> Result<PathBuf> {
    let out = args.output.clone().unwrap_or_else(|| {
        let kind = match args.kind {
            SynthKind::Prices => "prices",
            SynthKind::Ohlcv => "ohlcv",
        };
        out_dir().join(format!("synth-{kind}-{}.csv", args.seed))
    });
    ensure_parent(&out)?;
    match args.kind {
        SynthKind::Prices => {
            let series = synth_market(&SynthParams {
                n_steps: args.steps,
                n_products: args.products,
                drift: args.drift,
                volatility: args.volatility.unwrap_or(SynthParams::default().volatility),
                seed: args.seed,
            })?;
            write_prices(&out, &series)?;
        }
        SynthKind::Ohlcv => {
            let bars = synth_ohlcv(&OhlcvSynthParams {
                n_days: args.steps,
                volatility: args.volatility.unwrap_or(OhlcvSynthParams::default().volatility),
                seed: args.seed,
                ..OhlcvSynthParams::default()
            })?;
            write_ohlcv(&out, &bars)?;
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct VerifyReport {
    pub checks: usize,
    /// Names of the failed checks, with the offending numbers.
    pub failures: Vec<String>,
    /// Lines printed in verbose mode.
    pub log: Vec<String>,
}

impl VerifyReport {
    fn check(&mut self, name: impl Into<String>, ok: bool) {
        self.checks += 1;
        if !ok {
            self.failures.push(name.into());
        }
    }

    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

fn build_model(
    samples: Vec<RewardSample<StateVector>>,
    metric: MetricConfig,
    k_scale: Option<f64>,
) -> Result<(SampledRewardFunction<StateVector>, ExtensionModel<StateVector>)> {
    let f = SampledRewardFunction::new(samples, metric)?;
    let mut model = ExtensionModel::mcshane(f.clone())?;
    if let Some(scale) = k_scale {
        model = model.with_lipschitz_constant(f.lipschitz_constant() * scale);
    }
    Ok((f, model))
}

const TOL: f64 = 1e-9;
const BOUND_TOL: f64 = 1e-7;

/// Worked example, then the representation and lower bounds on a seeded
/// battery of random sample sets with simplex actions.
pub fn cmd_verify(args: &VerifyArgs, verbose: bool) -> Result<VerifyReport> {
    let mut rep = VerifyReport::default();
    let sv = |c: &[f64]| StateVector::new(c.to_vec());

    // Worked example: M₀ = {(1,0), (2,0)}, values under the bet (50, 0).
    let half = MetricConfig::new(0.5)?;
    let (s1, s2, x) = (sv(&[1.0, 0.0])?, sv(&[2.0, 0.0])?, sv(&[-1.0, 0.0])?);
    let samples = vec![RewardSample::new(s1.clone(), 50.0), RewardSample::new(s2.clone(), 100.0)];
    let (_, model) = build_model(samples, half, args.inject_k_scale)?;
    let k = model.lipschitz_constant();
    let d12 = eps_distance(s1.coords(), s2.coords(), &half)?;
    let dx1 = eps_distance(x.coords(), s1.coords(), &half)?;
    let dx2 = eps_distance(x.coords(), s2.coords(), &half)?;
    let rm = model.evaluate(&x)?;
    rep.check(format!("example: K = {k}, expected 100"), (k - 100.0).abs() <= TOL);
    rep.check(format!("example: d((1,0),(2,0)) = {d12}, expected 0.5"), (d12 - 0.5).abs() <= TOL);
    rep.check(format!("example: d((-1,0),(1,0)) = {dx1}, expected 2"), (dx1 - 2.0).abs() <= TOL);
    rep.check(format!("example: d((-1,0),(2,0)) = {dx2}, expected 2.5"), (dx2 - 2.5).abs() <= TOL);
    rep.check(format!("example: R^M((-1,0)) = {rm}, expected -150"), (rm + 150.0).abs() <= TOL);
    if verbose {
        rep.log.push(format!("K = {k}"));
        rep.log.push(format!("R^M((-1,0)) = {rm}"));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let metric = MetricConfig::default();
    let mut battery: Vec<(Vec<StateVector>, Vec<StateVector>)> = Vec::new();
    for _ in 0..args.instances {
        let dim = rng.random_range(2..=6);
        let n = rng.random_range(2..=20);
        let draw = |rng: &mut ChaCha8Rng| loop {
            let c: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
            if let Ok(s) = StateVector::new(c) {
                break s;
            }
        };
        let train = (0..n).map(|_| draw(&mut rng)).collect();
        let probes = (0..5).map(|_| draw(&mut rng)).collect();
        battery.push((train, probes));
    }
    if let Some(path) = &args.input {
        let states = allocation_states(&load_prices(path)?)?.states;
        let (train, probes) = states.split_at(states.len() / 2);
        if train.len() >= 2 && !probes.is_empty() {
            battery.push((train.to_vec(), probes.iter().take(50).cloned().collect()));
        }
    }

    for (i, (train, probes)) in battery.iter().enumerate() {
        let dim = train[0].dim();
        let seed = rng.random();
        let bets = sample_action_set(train.len() + probes.len(), ActionKind::L1Simplex100, dim, seed)?;
        let samples = train
            .iter()
            .zip(bets.iter())
            .map(|(s, a)| Ok(RewardSample::new(s.clone(), s.dot(a.coords())?)))
            .collect::<Result<Vec<_>>>()?;
        let (f, model) = build_model(samples, metric, args.inject_k_scale)?;
        for (j, x) in probes.iter().enumerate() {
            let rm = model.evaluate(x)?;
            let pb = propext_bound(&f, x, SIMPLEX_TOTAL)?;
            let a0: &ActionVector = bets.get(pb.index).expect("one bet per sample");
            let gap = (rm - x.dot(a0.coords())?).abs();
            rep.check(
                format!("instance {i} probe {j}: representation gap {gap} exceeds bound {}", pb.bound),
                gap <= pb.bound + BOUND_TOL,
            );
            let a = bets.get(train.len() + j).expect("one bet per probe");
            match lower_bound_gap(&f, x, a.coords()) {
                Ok(lower) => {
                    let actual = (x.dot(a.coords())? - rm).abs();
                    rep.check(
                        format!("instance {i} probe {j}: gap {actual} below lower bound {lower}"),
                        actual + BOUND_TOL >= lower,
                    );
                }
                Err(Error::Precondition(_)) => {}
                Err(e) => return Err(e),
            }
        }
    }
    if verbose {
        rep.log.push(format!("battery: {} instances, seed {}", battery.len(), args.seed));
    }
    Ok(rep)
}

/// Loads the series a run would use, for callers that need the raw data.
pub fn load_run_prices(cfg: &RunConfig) -> Result<PriceSeries> {
    match &cfg.input {
        Some(p) => load_prices(p),
        None => synth_market(&SynthParams {
            seed: cfg.seed,
            ..SynthParams::default()
        }),
    }
}
