//! Hourly clearing-price ingestion, stratified episode splits and
//! normalized state windows.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::Write;
use std::path::Path;

use chrono::{Datelike, Duration, NaiveDate, NaiveDateTime, Timelike};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Hours of history in one state: 7 days of 24 hourly prices.
pub const WINDOW_HOURS: usize = 168;

/// Offset between the hour an offer is made for and the clearing price it
/// settles against: the same hour of the next day.
pub const SETTLEMENT_LAG: usize = 24;

/// Contiguous hourly clearing prices in €/MWh.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceSeries {
    start: NaiveDateTime,
    prices: Vec<f64>,
}

impl PriceSeries {
    /// Builds a series starting at `start`; every price must be finite.
    pub fn new(start: NaiveDateTime, prices: Vec<f64>) -> Result<Self> {
        if let Some(k) = prices.iter().position(|p| !p.is_finite()) {
            return Err(Error::Parse {
                line: k + 1,
                reason: format!("non-finite price {}", prices[k]),
            });
        }
        Ok(Self { start, prices })
    }

    /// Series starting at midnight of `date`.
    pub fn from_date(date: NaiveDate, prices: Vec<f64>) -> Result<Self> {
        Self::new(date.and_hms_opt(0, 0, 0).expect("midnight"), prices)
    }

    pub fn start(&self) -> NaiveDateTime {
        self.start
    }

    pub fn prices(&self) -> &[f64] {
        &self.prices
    }

    pub fn len(&self) -> usize {
        self.prices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prices.is_empty()
    }

    pub fn price(&self, t: usize) -> Option<f64> {
        self.prices.get(t).copied()
    }

    pub fn timestamp(&self, t: usize) -> NaiveDateTime {
        self.start + Duration::hours(t as i64)
    }
}

/// Header names of the date, hour and price columns.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnSpec {
    pub date: String,
    pub hour: String,
    pub price: String,
}

impl Default for ColumnSpec {
    fn default() -> Self {
        Self {
            date: "Date".into(),
            hour: "Hour".into(),
            price: "PUN".into(),
        }
    }
}

fn parse_price(raw: &str) -> Option<f64> {
    let normalized = raw.trim().replace(',', ".");
    normalized.parse::<f64>().ok().filter(|p| p.is_finite())
}

fn parse_row(record: &csv::StringRecord, cols: (usize, usize, usize), line: usize) -> Result<(NaiveDateTime, f64)> {
    let field = |i: usize| record.get(i).map(str::trim).unwrap_or("");
    let parse_err = |reason: String| Error::Parse { line, reason };

    let date = NaiveDate::parse_from_str(field(cols.0), "%Y%m%d")
        .map_err(|e| parse_err(format!("bad date {:?}: {e}", field(cols.0))))?;
    let hour: u32 = field(cols.1)
        .parse()
        .map_err(|_| parse_err(format!("bad hour {:?}", field(cols.1))))?;
    if !(1..=24).contains(&hour) {
        return Err(parse_err(format!("hour {hour} outside 1..=24")));
    }
    let price = parse_price(field(cols.2)).ok_or_else(|| parse_err(format!("bad price {:?}", field(cols.2))))?;
    let ts = date.and_hms_opt(0, 0, 0).expect("midnight") + Duration::hours(i64::from(hour) - 1);
    Ok((ts, price))
}

/// Loads an hourly price export.
///
/// The delimiter is `;` when the header line contains one, `,` otherwise.
/// Prices may use either `.` or `,` as decimal separator. Rows may come in
/// any order; duplicates and missing hours are rejected.
pub fn load_pun_csv(path: &Path, columns: &ColumnSpec) -> Result<PriceSeries> {
    let text = match std::fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Err(Error::FileNotFound(path.to_path_buf())),
        Err(e) => return Err(e.into()),
    };
    parse_pun_csv(&text, columns)
}

/// Parses the contents of a price export; see [`load_pun_csv`].
pub fn parse_pun_csv(text: &str, columns: &ColumnSpec) -> Result<PriceSeries> {
    let text = text.strip_prefix('\u{feff}').unwrap_or(text);
    let header_line = text.lines().next().unwrap_or("");
    let delimiter = if header_line.contains(';') { b';' } else { b',' };

    let mut reader = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| Error::Parse {
            line: 1,
            reason: e.to_string(),
        })?
        .clone();
    let find = |name: &str| {
        headers.iter().position(|h| h == name).ok_or_else(|| Error::Parse {
            line: 1,
            reason: format!("missing column {name:?}"),
        })
    };
    let cols = (find(&columns.date)?, find(&columns.hour)?, find(&columns.price)?);

    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::Parse {
            line: e.position().map_or(0, |p| p.line() as usize),
            reason: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        rows.push(parse_row(&record, cols, line)?);
    }
    if rows.is_empty() {
        return Err(Error::InsufficientData("price file has no rows".into()));
    }

    rows.sort_by_key(|(ts, _)| *ts);
    for pair in rows.windows(2) {
        let (prev, next) = (pair[0].0, pair[1].0);
        if next == prev {
            return Err(Error::Duplicate(next.to_string()));
        }
        if next - prev != Duration::hours(1) {
            return Err(Error::Gap((prev + Duration::hours(1)).to_string()));
        }
    }

    let negatives = rows.iter().filter(|(_, p)| *p < 0.0).count();
    if negatives > 0 {
        log::warn!("price series contains {negatives} negative prices");
    }

    let start = rows[0].0;
    PriceSeries::new(start, rows.into_iter().map(|(_, p)| p).collect())
}

/// Writes `series` in the format read by [`load_pun_csv`].
pub fn write_pun_csv(series: &PriceSeries, path: &Path, columns: &ColumnSpec) -> Result<()> {
    let mut out = std::io::BufWriter::new(File::create(path)?);
    writeln!(out, "{},{},{}", columns.date, columns.hour, columns.price)?;
    for (t, price) in series.prices.iter().enumerate() {
        let ts = series.timestamp(t);
        // Display for f64 is the shortest string that parses back to the same bits.
        writeln!(out, "{},{},{}", ts.format("%Y%m%d"), ts.hour() + 1, price)?;
    }
    out.flush()?;
    Ok(())
}

/// Parameters of the train/test split over episode-start hours.
///
/// Strata are calendar months of the start hour.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            train_fraction: 0.8,
            seed: 0,
        }
    }
}

impl SplitSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::Config(format!(
                "train_fraction must lie in (0,1), got {}",
                self.train_fraction
            )));
        }
        Ok(())
    }
}

/// Disjoint train and test episode-start hours, each sorted ascending.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Hour indices `t` that have a full history window and a settlement
/// price one day later.
pub fn eligible_starts(series: &PriceSeries, window_hours: usize) -> std::ops::Range<usize> {
    let end = series.len().saturating_sub(SETTLEMENT_LAG);
    window_hours..end.max(window_hours)
}

/// Number of training members taken from a stratum of `n` starts.
pub(crate) fn train_quota(train_fraction: f64, n: usize) -> usize {
    // The epsilon keeps products like 0.8·5 = 4.000000000000001 from rounding up.
    let quota = (train_fraction * n as f64 - 1e-9).ceil();
    (quota.max(0.0) as usize).min(n)
}

/// Splits eligible start hours by calendar month; within each month
/// ⌈fraction·n⌉ starts, drawn uniformly with the given seed, go to train.
pub fn stratified_split(series: &PriceSeries, spec: &SplitSpec, window_hours: usize) -> Result<Split> {
    spec.validate()?;
    let eligible = eligible_starts(series, window_hours);
    if eligible.is_empty() {
        return Err(Error::InsufficientData(format!(
            "series of {} hours has no start with {} hours of history and a next-day price",
            series.len(),
            window_hours
        )));
    }

    let mut strata: BTreeMap<(i32, u32), Vec<usize>> = BTreeMap::new();
    for t in eligible {
        let ts = series.timestamp(t);
        strata.entry((ts.year(), ts.month())).or_default().push(t);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut split = Split::default();
    for mut members in strata.into_values() {
        let quota = train_quota(spec.train_fraction, members.len());
        members.shuffle(&mut rng);
        split.train.extend_from_slice(&members[..quota]);
        split.test.extend_from_slice(&members[quota..]);
    }
    split.train.sort_unstable();
    split.test.sort_unstable();
    Ok(split)
}

/// Z-score parameters for network inputs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub mean: f64,
    pub std: f64,
}

impl NormStats {
    pub fn identity() -> Self {
        Self { mean: 0.0, std: 1.0 }
    }

    pub fn normalize(&self, price: f64) -> f64 {
        (price - self.mean) / self.std
    }
}

/// Mean and population standard deviation of the prices at `indices`.
/// A zero deviation is replaced by 1.
pub fn compute_norm_stats(series: &PriceSeries, indices: &[usize]) -> Result<NormStats> {
    if indices.is_empty() {
        return Err(Error::InsufficientData("no indices for normalization".into()));
    }
    let values = indices
        .iter()
        .map(|&i| {
            series.price(i).ok_or_else(|| Error::OutOfRange {
                index: i,
                reason: format!("series has {} hours", series.len()),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let std = var.sqrt();
    Ok(NormStats {
        mean,
        std: if std > 0.0 { std } else { 1.0 },
    })
}

/// Normalized prices of the `window_hours` hours strictly before `t`, oldest first.
pub fn window(series: &PriceSeries, t: usize, window_hours: usize, stats: &NormStats) -> Result<Vec<f64>> {
    if t < window_hours || t > series.len() {
        return Err(Error::OutOfRange {
            index: t,
            reason: format!(
                "window needs {window_hours} hours of history inside a series of {} hours",
                series.len()
            ),
        });
    }
    Ok(series.prices[t - window_hours..t]
        .iter()
        .map(|&p| stats.normalize(p))
        .collect())
}
