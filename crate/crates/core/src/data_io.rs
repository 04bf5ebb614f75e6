//! File formats, input validation and synthetic markets.
//!
//! - OHLCV CSV: header `date,open,high,low,close,volume`, ISO dates.
//! - Price series CSV: header `t,p1,…,pn`, one row per time step.
//! - Report CSV: header `step,action,predicted,realized,optimal,cum_realized,cum_optimal`;
//!   the action column holds `;`-separated coordinates. Reals are written
//!   with 17 significant digits so a read-back is exact.
//! - Report JSON: `{ "meta": { "seed", "config" }, "steps": [...], "survival_time" }`.

use std::fmt;
use std::fs::File;
use std::io::{self, BufWriter, Read, Write};
use std::path::Path;
use std::str::FromStr;

use chrono::{Days, NaiveDate};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::dreams::AugmentedSet;
use crate::error::{Error, Result};
use crate::metric::StateVector;
use crate::scenarios::{BacktestReport, OhlcvBar, StepRecord};

pub const OHLCV_HEADER: [&str; 6] = ["date", "open", "high", "low", "close", "volume"];
pub const REPORT_HEADER: [&str; 7] = [
    "step",
    "action",
    "predicted",
    "realized",
    "optimal",
    "cum_realized",
    "cum_optimal",
];

fn parse_err(path: &Path, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        message: message.into(),
    }
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => parse_err(path, format!("{other:?}")),
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

/// A bar that failed validation.
#[derive(Debug, Clone, PartialEq)]
pub struct RowRejection {
    /// 1-based line in the file.
    pub line: u64,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OhlcvLoad {
    pub bars: Vec<OhlcvBar>,
    pub rejected: Vec<RowRejection>,
}

/// Parses OHLCV rows. Unparseable rows are errors; rows that parse but break
/// a bar invariant are set aside in `rejected`. Accepted rows must have
/// strictly increasing dates.
pub fn parse_ohlcv<R: Read>(reader: R, path: &Path) -> Result<OhlcvLoad> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers().map_err(|e| csv_err(path, e))?.clone();
    if headers.is_empty() || (headers.len() == 1 && headers[0].is_empty()) {
        return Err(Error::insufficient(format!("{} is empty", path.display())));
    }
    let names: Vec<String> = headers.iter().map(|h| h.to_ascii_lowercase()).collect();
    if names != OHLCV_HEADER {
        return Err(parse_err(
            path,
            format!("expected header '{}', found '{}'", OHLCV_HEADER.join(","), names.join(",")),
        ));
    }
    let mut bars: Vec<OhlcvBar> = Vec::new();
    let mut rejected = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| csv_err(path, e))?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != OHLCV_HEADER.len() {
            return Err(parse_err(path, format!("line {line}: expected 6 fields, found {}", record.len())));
        }
        let date = NaiveDate::parse_from_str(&record[0], "%Y-%m-%d")
            .map_err(|_| parse_err(path, format!("line {line}: invalid date '{}'", &record[0])))?;
        let mut num = [0.0; 5];
        for (slot, (field, name)) in num.iter_mut().zip(record.iter().skip(1).zip(&OHLCV_HEADER[1..])) {
            *slot = field
                .parse()
                .map_err(|_| parse_err(path, format!("line {line}: invalid {name} '{field}'")))?;
        }
        let bar = OhlcvBar {
            date,
            open: num[0],
            high: num[1],
            low: num[2],
            close: num[3],
            volume: num[4],
        };
        if let Some(reason) = bar.violation() {
            rejected.push(RowRejection { line, reason });
            continue;
        }
        if let Some(prev) = bars.last() {
            if bar.date <= prev.date {
                return Err(parse_err(
                    path,
                    format!("line {line}: date {} does not follow {}", bar.date, prev.date),
                ));
            }
        }
        bars.push(bar);
    }
    if bars.is_empty() && rejected.is_empty() {
        return Err(Error::insufficient(format!("{} has no data rows", path.display())));
    }
    Ok(OhlcvLoad { bars, rejected })
}

pub fn load_ohlcv(path: impl AsRef<Path>) -> Result<OhlcvLoad> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_ohlcv(file, path)
}

pub fn write_ohlcv(path: impl AsRef<Path>, bars: &[OhlcvBar]) -> Result<()> {
    let path = path.as_ref();
    let mut w = create(path)?;
    let mut body = || -> io::Result<()> {
        writeln!(w, "{}", OHLCV_HEADER.join(","))?;
        for b in bars {
            writeln!(w, "{},{},{},{},{},{}", b.date, b.open, b.high, b.low, b.close, b.volume)?;
        }
        w.flush()
    };
    body().map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SeriesSource {
    File,
    Synthetic(SynthParams),
}

/// Product values over time, one row per time step.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceSeries {
    pub timestamps: Vec<i64>,
    pub values: Vec<Vec<f64>>,
    pub source: SeriesSource,
}

impl PriceSeries {
    pub fn new(timestamps: Vec<i64>, values: Vec<Vec<f64>>, source: SeriesSource) -> Result<Self> {
        if timestamps.len() != values.len() {
            return Err(Error::domain("one timestamp per row is required"));
        }
        if timestamps.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::domain("timestamps must be strictly increasing"));
        }
        let width = values.first().map_or(0, Vec::len);
        if values.iter().any(|r| r.len() != width) {
            return Err(Error::domain("price rows must all have the same length"));
        }
        if values.iter().flatten().any(|x| !x.is_finite()) {
            return Err(Error::domain("price values must be finite"));
        }
        Ok(PriceSeries {
            timestamps,
            values,
            source,
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn n_products(&self) -> usize {
        self.values.first().map_or(0, Vec::len)
    }
}

pub fn load_prices(path: impl AsRef<Path>) -> Result<PriceSeries> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let headers = rdr.headers().map_err(|e| csv_err(path, e))?.clone();
    if headers.len() < 2 || !headers[0].eq_ignore_ascii_case("t") {
        return Err(parse_err(path, "expected header 't,p1,...,pn'"));
    }
    let (mut timestamps, mut values) = (Vec::new(), Vec::new());
    for record in rdr.records() {
        let record = record.map_err(|e| csv_err(path, e))?;
        let line = record.position().map_or(0, |p| p.line());
        let t: i64 = record[0]
            .parse()
            .map_err(|_| parse_err(path, format!("line {line}: invalid time '{}'", &record[0])))?;
        let row = record
            .iter()
            .skip(1)
            .map(|f| f.parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|_| parse_err(path, format!("line {line}: invalid price")))?;
        timestamps.push(t);
        values.push(row);
    }
    if values.is_empty() {
        return Err(Error::insufficient(format!("{} has no data rows", path.display())));
    }
    PriceSeries::new(timestamps, values, SeriesSource::File).map_err(|e| parse_err(path, e.to_string()))
}

pub fn write_prices(path: impl AsRef<Path>, series: &PriceSeries) -> Result<()> {
    let path = path.as_ref();
    let mut w = create(path)?;
    let mut body = || -> io::Result<()> {
        let names: Vec<String> = (1..=series.n_products()).map(|i| format!("p{i}")).collect();
        writeln!(w, "t,{}", names.join(","))?;
        for (t, row) in series.timestamps.iter().zip(&series.values) {
            let cells: Vec<String> = row.iter().map(|x| x.to_string()).collect();
            writeln!(w, "{t},{}", cells.join(","))?;
        }
        w.flush()
    };
    body().map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthParams {
    pub n_steps: usize,
    pub n_products: usize,
    /// Mean change per step.
    pub drift: f64,
    /// Standard deviation of the change per step.
    pub volatility: f64,
    pub seed: u64,
}

impl Default for SynthParams {
    fn default() -> Self {
        SynthParams {
            n_steps: 800,
            n_products: 4,
            drift: 0.0,
            volatility: 1.0,
            seed: 0,
        }
    }
}

impl SynthParams {
    pub fn validate(&self) -> Result<()> {
        if self.n_steps < 2 {
            return Err(Error::config("a synthetic market needs at least 2 steps"));
        }
        if self.n_products == 0 {
            return Err(Error::config("a synthetic market needs at least one product"));
        }
        if !self.drift.is_finite() {
            return Err(Error::config("drift must be finite"));
        }
        if !(self.volatility >= 0.0) || !self.volatility.is_finite() {
            return Err(Error::config("volatility must be finite and non-negative"));
        }
        Ok(())
    }
}

/// Seeded Gaussian random walk per product, starting at 0.
pub fn synth_market(p: &SynthParams) -> Result<PriceSeries> {
    p.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let mut values = Vec::with_capacity(p.n_steps);
    let mut row = vec![0.0; p.n_products];
    values.push(row.clone());
    for _ in 1..p.n_steps {
        for x in row.iter_mut() {
            let z: f64 = rng.sample(StandardNormal);
            *x += p.drift + p.volatility * z;
        }
        values.push(row.clone());
    }
    PriceSeries::new((0..p.n_steps as i64).collect(), values, SeriesSource::Synthetic(*p))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OhlcvSynthParams {
    pub n_days: usize,
    pub start_price: f64,
    /// Standard deviation of the daily log return.
    pub volatility: f64,
    pub mean_volume: f64,
    pub seed: u64,
}

impl Default for OhlcvSynthParams {
    fn default() -> Self {
        OhlcvSynthParams {
            n_days: 180,
            start_price: 200.0,
            volatility: 0.04,
            mean_volume: 5e9,
            seed: 0,
        }
    }
}

/// Seeded daily bars with a geometric random walk close, small overnight
/// gaps and lognormal volume. Dates start on 2019-01-01.
pub fn synth_ohlcv(p: &OhlcvSynthParams) -> Result<Vec<OhlcvBar>> {
    if p.n_days == 0 || !(p.start_price > 0.0) || !(p.volatility >= 0.0) || !(p.mean_volume > 0.0) {
        return Err(Error::config("invalid synthetic OHLCV parameters"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let mut normal = || -> f64 { rng.sample(StandardNormal) };
    let start = NaiveDate::from_ymd_opt(2019, 1, 1).expect("valid date");
    let mut prev_close = p.start_price;
    let mut bars = Vec::with_capacity(p.n_days);
    for k in 0..p.n_days {
        let open = prev_close * (0.1 * p.volatility * normal()).exp();
        let close = open * (p.volatility * normal()).exp();
        let high = open.max(close) * (1.0 + 0.5 * p.volatility * normal().abs());
        let low = open.min(close) * (-0.5 * p.volatility * normal().abs()).exp();
        let volume = p.mean_volume * (0.3 * normal()).exp();
        bars.push(OhlcvBar {
            date: start + Days::new(k as u64),
            open,
            high,
            low,
            close,
            volume,
        });
        prev_close = close;
    }
    Ok(bars)
}

/// Converts raw vectors to states, dropping zero vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct ZeroFiltered {
    pub states: Vec<StateVector>,
    /// Input index of each kept state.
    pub kept: Vec<usize>,
    pub removed: Vec<usize>,
}

pub fn filter_zero_states(raw: Vec<Vec<f64>>) -> Result<ZeroFiltered> {
    let mut out = ZeroFiltered {
        states: Vec::with_capacity(raw.len()),
        kept: Vec::with_capacity(raw.len()),
        removed: Vec::new(),
    };
    for (i, v) in raw.into_iter().enumerate() {
        if v.iter().all(|&x| x == 0.0) && !v.is_empty() {
            out.removed.push(i);
            continue;
        }
        out.states.push(StateVector::new(v).map_err(|e| Error::at_index(i, e))?);
        out.kept.push(i);
    }
    if !out.removed.is_empty() {
        log::warn!("dropped {} zero state(s) at {:?}", out.removed.len(), out.removed);
    }
    if out.states.is_empty() {
        log::warn!("no nonzero states left");
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Csv,
    #[default]
    Json,
}

impl FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            other => Err(Error::config(format!("unknown report format '{other}'"))),
        }
    }
}

impl fmt::Display for ReportFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ReportFormat::Csv => "csv",
            ReportFormat::Json => "json",
        })
    }
}

fn real(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn write_report(report: &BacktestReport, path: impl AsRef<Path>, format: ReportFormat) -> Result<()> {
    let path = path.as_ref();
    let mut w = create(path)?;
    let body = |w: &mut BufWriter<File>| -> io::Result<()> {
        match format {
            ReportFormat::Json => {
                serde_json::to_writer_pretty(&mut *w, report)?;
                writeln!(w)?;
            }
            ReportFormat::Csv => {
                writeln!(w, "{}", REPORT_HEADER.join(","))?;
                for s in &report.steps {
                    let action: Vec<String> = s.action.iter().map(|&x| real(x)).collect();
                    writeln!(
                        w,
                        "{},{},{},{},{},{},{}",
                        s.step,
                        action.join(";"),
                        real(s.predicted),
                        real(s.realized),
                        real(s.optimal),
                        real(s.cum_realized),
                        real(s.cum_optimal)
                    )?;
                }
            }
        }
        w.flush()
    };
    body(&mut w).map_err(|e| Error::io(path, e))
}

pub fn read_report_json(path: impl AsRef<Path>) -> Result<BacktestReport> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_reader(io::BufReader::new(file)).map_err(|e| parse_err(path, e.to_string()))
}

/// Reads the per-step rows of a CSV report.
pub fn read_report_csv(path: impl AsRef<Path>) -> Result<Vec<StepRecord>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut rdr = csv::Reader::from_reader(file);
    let headers = rdr.headers().map_err(|e| csv_err(path, e))?.clone();
    if headers.iter().ne(REPORT_HEADER) {
        return Err(parse_err(path, "unexpected report header"));
    }
    let mut steps = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| csv_err(path, e))?;
        let line = record.position().map_or(0, |p| p.line());
        let bad = |what: &str| parse_err(path, format!("line {line}: invalid {what}"));
        let num = |i: usize| record[i].parse::<f64>().map_err(|_| bad(REPORT_HEADER[i]));
        let action = if record[1].is_empty() {
            Vec::new()
        } else {
            record[1]
                .split(';')
                .map(|x| x.parse::<f64>().map_err(|_| bad("action")))
                .collect::<Result<Vec<_>>>()?
        };
        steps.push(StepRecord {
            step: record[0].parse().map_err(|_| bad("step"))?,
            action,
            predicted: num(2)?,
            realized: num(3)?,
            optimal: num(4)?,
            cum_realized: num(5)?,
            cum_optimal: num(6)?,
        });
    }
    Ok(steps)
}

/// Writes an augmented training set, one row per state, with a `kind`
/// column (`real` or `dream`) and the dream parents.
pub fn write_augmented_csv(set: &AugmentedSet, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = create(path)?;
    let join = |v: &[f64]| v.iter().map(|&x| real(x)).collect::<Vec<_>>().join(";");
    let body = |w: &mut BufWriter<File>| -> io::Result<()> {
        writeln!(w, "kind,parent_a,parent_b,reward,state,action")?;
        for e in &set.real {
            writeln!(w, "real,,,{},{},{}", real(e.reward), join(e.state.coords()), join(e.action.coords()))?;
        }
        for d in &set.dreams {
            writeln!(
                w,
                "dream,{},{},{},{},{}",
                d.parents.0,
                d.parents.1,
                real(d.reward),
                join(d.state.coords()),
                join(d.action.coords())
            )?;
        }
        w.flush()
    };
    body(&mut w).map_err(|e| Error::io(path, e))
}
