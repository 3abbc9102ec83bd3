//! Daily OHLCV histories in the Yahoo Finance CSV layout.

use std::collections::HashMap;
use std::fmt::Write as _;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Column names, in the order they are written back out.
pub const COLUMNS: [&str; 7] = ["Date", "Open", "High", "Low", "Close", "Adj Close", "Volume"];

pub const DEFAULT_TRAIN_FRACTION: f64 = 0.9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MarketDataError {
    #[error("missing column `{0}`")]
    MissingColumn(String),
    #[error("line {line_no}: {reason}")]
    MalformedRow { line_no: u64, reason: String },
    #[error("no valid rows")]
    EmptySeries,
    #[error("duplicate date {0}")]
    DuplicateDate(NaiveDate),
    #[error("cannot split {len} bars at fraction {fraction}: one side would be empty")]
    DegenerateSplit { len: usize, fraction: f64 },
    #[error("network error: {0}")]
    NetworkError(String),
    #[error("HTTP status {0}")]
    HttpStatus(u16),
}

type Result<T> = std::result::Result<T, MarketDataError>;

/// One daily bar. Prices are in quote currency.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OhlcvBar {
    pub date: NaiveDate,
    pub open: f64,
    pub high: f64,
    pub low: f64,
    pub close: f64,
    pub adj_close: f64,
    pub volume: f64,
}

impl OhlcvBar {
    /// Checks the bar invariants, returning a description of the first violation.
    pub fn validate(&self) -> std::result::Result<(), String> {
        let prices = [self.open, self.high, self.low, self.close, self.adj_close];
        if prices.iter().any(|p| !p.is_finite() || *p <= 0.0) {
            return Err("prices must be finite and strictly positive".into());
        }
        if !self.volume.is_finite() || self.volume < 0.0 {
            return Err("volume must be finite and non-negative".into());
        }
        if self.low > self.high {
            return Err(format!("low {} above high {}", self.low, self.high));
        }
        if self.low > self.open.min(self.close) {
            return Err(format!("low {} above min(open, close)", self.low));
        }
        if self.high < self.open.max(self.close) {
            return Err(format!("high {} below max(open, close)", self.high));
        }
        Ok(())
    }

    pub fn price(&self, field: PriceField) -> f64 {
        match field {
            PriceField::AdjClose => self.adj_close,
            PriceField::Close => self.close,
        }
    }
}

/// Which column is used as the traded price downstream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PriceField {
    #[default]
    AdjClose,
    Close,
}

/// Ordered daily bars for one asset. Dates are strictly increasing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriceSeries {
    pub asset_id: String,
    bars: Vec<OhlcvBar>,
}

impl PriceSeries {
    /// Builds a series, sorting by date and rejecting duplicates or empty input.
    pub fn new(asset_id: impl Into<String>, mut bars: Vec<OhlcvBar>) -> Result<Self> {
        if bars.is_empty() {
            return Err(MarketDataError::EmptySeries);
        }
        bars.sort_by_key(|b| b.date);
        if let Some(w) = bars.windows(2).find(|w| w[0].date == w[1].date) {
            return Err(MarketDataError::DuplicateDate(w[0].date));
        }
        Ok(Self { asset_id: asset_id.into(), bars })
    }

    pub fn bars(&self) -> &[OhlcvBar] {
        &self.bars
    }

    pub fn len(&self) -> usize {
        self.bars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bars.is_empty()
    }

    pub fn dates(&self) -> Vec<NaiveDate> {
        self.bars.iter().map(|b| b.date).collect()
    }

    pub fn prices(&self, field: PriceField) -> Vec<f64> {
        self.bars.iter().map(|b| b.price(field)).collect()
    }

    /// Writes the series back out in the input CSV layout. Floats use the
    /// shortest representation that parses back to the same bits.
    pub fn to_csv(&self) -> String {
        let mut out = COLUMNS.join(",");
        out.push('\n');
        for b in &self.bars {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                b.date.format("%Y-%m-%d"),
                b.open,
                b.high,
                b.low,
                b.close,
                b.adj_close,
                b.volume
            );
        }
        out
    }
}

/// Result of [`parse_csv`]: the series plus the number of `null`/empty rows dropped.
#[derive(Debug, Clone, PartialEq)]
pub struct ParsedSeries {
    pub series: PriceSeries,
    pub dropped: usize,
}

/// Parses a Yahoo Finance daily CSV.
///
/// The header must name all seven columns in any order. Rows with a `null`
/// or empty price/volume field are dropped and counted; any other parse
/// failure or invariant violation is a hard error carrying the line number.
pub fn parse_csv(asset_id: &str, text: &str) -> Result<ParsedSeries> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| MarketDataError::MalformedRow { line_no: 1, reason: e.to_string() })?
        .clone();
    let index: HashMap<&str, usize> = headers.iter().enumerate().map(|(i, h)| (h, i)).collect();
    let mut cols = [0usize; 7];
    for (slot, name) in cols.iter_mut().zip(COLUMNS) {
        *slot = *index.get(name).ok_or_else(|| MarketDataError::MissingColumn(name.to_string()))?;
    }

    let mut bars = Vec::new();
    let mut dropped = 0;
    for record in reader.records() {
        let record = record.map_err(|e| MarketDataError::MalformedRow {
            line_no: e.position().map(|p| p.line()).unwrap_or(0),
            reason: e.to_string(),
        })?;
        let line_no = record.position().map(|p| p.line()).unwrap_or(0);
        let malformed = |reason: String| MarketDataError::MalformedRow { line_no, reason };
        let field = |i: usize| record.get(cols[i]).unwrap_or("");

        let date = NaiveDate::parse_from_str(field(0), "%Y-%m-%d")
            .map_err(|e| malformed(format!("date `{}`: {e}", field(0))))?;
        if (1..7).any(|i| {
            let v = field(i);
            v.is_empty() || v.eq_ignore_ascii_case("null")
        }) {
            dropped += 1;
            continue;
        }
        let mut values = [0.0f64; 6];
        for (k, v) in values.iter_mut().enumerate() {
            let raw = field(k + 1);
            *v = raw.parse().map_err(|_| malformed(format!("{} `{raw}` is not a number", COLUMNS[k + 1])))?;
        }
        let bar = OhlcvBar {
            date,
            open: values[0],
            high: values[1],
            low: values[2],
            close: values[3],
            adj_close: values[4],
            volume: values[5],
        };
        bar.validate().map_err(malformed)?;
        bars.push(bar);
    }
    Ok(ParsedSeries { series: PriceSeries::new(asset_id, bars)?, dropped })
}

/// Chronological split: the first `floor(n * fraction)` bars train, the rest test.
pub fn chronological_split(series: &PriceSeries, train_fraction: f64) -> Result<(PriceSeries, PriceSeries)> {
    let n = series.len();
    let degenerate = MarketDataError::DegenerateSplit { len: n, fraction: train_fraction };
    if !(train_fraction > 0.0 && train_fraction < 1.0) || n < 2 {
        return Err(degenerate);
    }
    // The epsilon keeps e.g. 0.29 * 100 from flooring to 28.
    let cut = (n as f64 * train_fraction + 1e-9).floor() as usize;
    if cut == 0 || cut >= n {
        return Err(degenerate);
    }
    let (train, test) = series.bars.split_at(cut);
    Ok((
        PriceSeries { asset_id: series.asset_id.clone(), bars: train.to_vec() },
        PriceSeries { asset_id: series.asset_id.clone(), bars: test.to_vec() },
    ))
}

/// Inclusive calendar range for a download.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DateRange {
    pub start: NaiveDate,
    pub end: NaiveDate,
}

/// Expands `{symbol}`, `{start}`/`{end}` (ISO dates) and `{period1}`/`{period2}`
/// (unix seconds, as Yahoo's download endpoint expects).
pub fn render_url(template: &str, asset_id: &str, range: Option<DateRange>) -> String {
    let mut url = template.replace("{symbol}", asset_id);
    if let Some(r) = range {
        let epoch = |d: NaiveDate| d.and_hms_opt(0, 0, 0).map(|t| t.and_utc().timestamp()).unwrap_or(0);
        url = url
            .replace("{start}", &r.start.format("%Y-%m-%d").to_string())
            .replace("{end}", &r.end.format("%Y-%m-%d").to_string())
            .replace("{period1}", &epoch(r.start).to_string())
            .replace("{period2}", &epoch(r.end).to_string());
    }
    url
}

/// Downloads raw CSV text. The body is returned unchanged for [`parse_csv`].
#[cfg(feature = "fetch")]
pub fn fetch_csv(url_template: &str, asset_id: &str, range: Option<DateRange>) -> Result<String> {
    let url = render_url(url_template, asset_id, range);
    match ureq::get(&url).call() {
        Ok(mut resp) => resp
            .body_mut()
            .read_to_string()
            .map_err(|e| MarketDataError::NetworkError(e.to_string())),
        Err(ureq::Error::StatusCode(code)) => Err(MarketDataError::HttpStatus(code)),
        Err(e) => Err(MarketDataError::NetworkError(e.to_string())),
    }
}

#[cfg(not(feature = "fetch"))]
pub fn fetch_csv(_url_template: &str, _asset_id: &str, _range: Option<DateRange>) -> Result<String> {
    Err(MarketDataError::NetworkError("built without the `fetch` feature".into()))
}
