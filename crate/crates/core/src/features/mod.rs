//! State features: normalised close, volatility-scaled returns over four
//! horizons, MACD and RSI, stacked into 60-day windows.

pub mod indicators;

use std::fmt::Write as _;
use std::sync::Arc;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fmt::sig10;
use crate::market_data::{PriceField, PriceSeries};
pub use indicators::RsiSmoothing;
use indicators::{Indicator, MONTH, PRICE_STD_SPAN, SIGNAL_STD_SPAN, YEAR};

/// Values per feature row, in [`FeatureRow::NAMES`] order.
pub const N_FEATURES: usize = 7;
pub const DEFAULT_LOOKBACK: usize = 60;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FeatureError {
    #[error("insufficient history: needed {needed}, got {got}")]
    InsufficientHistory { needed: usize, got: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

type Result<T> = std::result::Result<T, FeatureError>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeatureConfig {
    pub price_field: PriceField,
    /// MACD short/long half-lives in days.
    pub macd_short: f64,
    pub macd_long: f64,
    pub rsi_window: usize,
    pub rsi_smoothing: RsiSmoothing,
    /// Span of the EWM std of daily returns.
    pub vol_span: usize,
    pub norm_window: usize,
    /// Floor applied to every standard deviation used as a divisor.
    pub epsilon_sigma: f64,
    pub lookback: usize,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self {
            price_field: PriceField::AdjClose,
            macd_short: 8.0,
            macd_long: 24.0,
            rsi_window: 30,
            rsi_smoothing: RsiSmoothing::Wilder,
            vol_span: 60,
            norm_window: 60,
            epsilon_sigma: indicators::DEFAULT_EPSILON,
            lookback: DEFAULT_LOOKBACK,
        }
    }
}

impl FeatureConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(FeatureError::InvalidParameter(m.to_string()));
        if !(self.macd_short >= 1.0 && self.macd_long > self.macd_short) {
            return bad("MACD scales need long > short >= 1");
        }
        if self.rsi_window == 0 || self.vol_span < 2 || self.norm_window < 2 || self.lookback == 0 {
            return bad("windows must be positive (vol_span, norm_window >= 2)");
        }
        if !(self.epsilon_sigma > 0.0) {
            return bad("epsilon_sigma must be > 0");
        }
        Ok(())
    }

    /// First series index at which every feature is defined.
    pub fn warmup(&self) -> usize {
        [PRICE_STD_SPAN + SIGNAL_STD_SPAN, YEAR, self.rsi_window, self.norm_window, 2]
            .into_iter()
            .max()
            .unwrap_or(0)
    }
}

/// Features for one day.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct FeatureRow {
    pub norm_close: f64,
    pub ret_1m: f64,
    pub ret_2m: f64,
    pub ret_3m: f64,
    pub ret_1y: f64,
    pub macd: f64,
    pub rsi: f64,
}

impl FeatureRow {
    pub const NAMES: [&'static str; N_FEATURES] =
        ["norm_close", "ret_1m", "ret_2m", "ret_3m", "ret_1y", "macd", "rsi"];

    pub fn to_array(&self) -> [f64; N_FEATURES] {
        [self.norm_close, self.ret_1m, self.ret_2m, self.ret_3m, self.ret_1y, self.macd, self.rsi]
    }
}

/// Per-day features aligned to series dates, starting at the first day with
/// full history. `prices` carries the configured price field for the same days.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub asset_id: String,
    /// Series index of row 0.
    pub first_valid: usize,
    dates: Vec<NaiveDate>,
    prices: Vec<f64>,
    rows: Arc<[FeatureRow]>,
}

impl FeatureMatrix {
    /// Assembles a matrix from parts; used by tests and synthetic markets.
    pub fn from_parts(asset_id: impl Into<String>, first_valid: usize, dates: Vec<NaiveDate>, prices: Vec<f64>, rows: Vec<FeatureRow>) -> Self {
        assert!(dates.len() == rows.len() && prices.len() == rows.len(), "ragged feature matrix");
        Self { asset_id: asset_id.into(), first_valid, dates, prices, rows: rows.into() }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn rows(&self) -> &[FeatureRow] {
        &self.rows
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn prices(&self) -> &[f64] {
        &self.prices
    }

    /// Rows `range` as a new matrix.
    pub fn slice(&self, range: std::ops::Range<usize>) -> FeatureMatrix {
        FeatureMatrix {
            asset_id: self.asset_id.clone(),
            first_valid: self.first_valid + range.start,
            dates: self.dates[range.clone()].to_vec(),
            prices: self.prices[range.clone()].to_vec(),
            rows: self.rows[range].to_vec().into(),
        }
    }

    /// Splits at series index `cut` (the first test bar). The test side keeps
    /// `lookback - 1` rows of preceding context so its first state lands on
    /// the first test day; every feature is trailing, so no test-period
    /// information reaches the training side.
    pub fn split_at_series_index(&self, cut: usize, lookback: usize) -> Result<(FeatureMatrix, FeatureMatrix)> {
        let cut_row = cut.saturating_sub(self.first_valid).min(self.len());
        if cut_row == 0 || cut_row >= self.len() {
            return Err(FeatureError::InsufficientHistory { needed: self.first_valid + 1, got: cut });
        }
        let test_start = cut_row.saturating_sub(lookback.saturating_sub(1));
        Ok((self.slice(0..cut_row), self.slice(test_start..self.len())))
    }

    /// `date,norm_close,ret_1m,ret_2m,ret_3m,ret_1y,macd,rsi` with 10 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = format!("date,{}\n", FeatureRow::NAMES.join(","));
        for (date, row) in self.dates.iter().zip(self.rows.iter()) {
            let _ = write!(out, "{}", date.format("%Y-%m-%d"));
            for v in row.to_array() {
                let _ = write!(out, ",{}", sig10(v));
            }
            out.push('\n');
        }
        out
    }
}

/// `lookback` consecutive feature rows ending at `end_index`: the MDP state.
///
/// Cheap to clone; it shares the row storage of its [`FeatureMatrix`].
#[derive(Debug, Clone)]
pub struct StateWindow {
    rows: Arc<[FeatureRow]>,
    end_index: usize,
    lookback: usize,
}

impl StateWindow {
    pub fn end_index(&self) -> usize {
        self.end_index
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.lookback, N_FEATURES)
    }

    fn window(&self) -> &[FeatureRow] {
        &self.rows[self.end_index + 1 - self.lookback..=self.end_index]
    }

    /// Rows in chronological order.
    pub fn values(&self) -> Vec<[f64; N_FEATURES]> {
        self.window().iter().map(FeatureRow::to_array).collect()
    }

    /// Row-major flattening (`lookback * 7` values), the network input.
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.lookback * N_FEATURES);
        self.flatten_into(&mut out);
        out
    }

    pub fn flatten_into(&self, out: &mut Vec<f64>) {
        out.clear();
        for row in self.window() {
            out.extend_from_slice(&row.to_array());
        }
    }
}

impl PartialEq for StateWindow {
    fn eq(&self, other: &Self) -> bool {
        self.lookback == other.lookback && self.window() == other.window()
    }
}

/// Computes every feature for `series` and drops rows before the joint warmup.
pub fn build_features(series: &PriceSeries, config: &FeatureConfig) -> Result<FeatureMatrix> {
    config.validate()?;
    let warmup = config.warmup();
    if series.len() < warmup + 1 {
        return Err(FeatureError::InsufficientHistory { needed: warmup + 1, got: series.len() });
    }
    let prices = series.prices(config.price_field);
    let eps = config.epsilon_sigma;
    let sigma = indicators::price_sigma(&prices, config.vol_span, eps);
    let rets: Vec<Indicator> = [MONTH, 2 * MONTH, 3 * MONTH, YEAR]
        .iter()
        .map(|&h| indicators::vol_normalized_return(&prices, h, &sigma))
        .collect();
    let norm = indicators::normalize_close(&prices, config.norm_window, eps);
    let macd = indicators::macd(&prices, config.macd_short, config.macd_long, eps);
    let rsi = indicators::rsi(&prices, config.rsi_window, config.rsi_smoothing);

    let rows = (warmup..prices.len())
        .map(|t| {
            Ok(FeatureRow {
                norm_close: norm.at(t)?,
                ret_1m: rets[0].at(t)?,
                ret_2m: rets[1].at(t)?,
                ret_3m: rets[2].at(t)?,
                ret_1y: rets[3].at(t)?,
                macd: macd.at(t)?,
                rsi: rsi.at(t)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let dates = series.dates()[warmup..].to_vec();
    Ok(FeatureMatrix::from_parts(series.asset_id.clone(), warmup, dates, prices[warmup..].to_vec(), rows))
}

/// Stacks rows `t - lookback + 1 ..= t` of `features` (row indices).
pub fn build_state(features: &FeatureMatrix, t: usize, lookback: usize) -> Result<StateWindow> {
    if lookback == 0 {
        return Err(FeatureError::InvalidParameter("lookback must be positive".into()));
    }
    if t + 1 < lookback || t >= features.len() {
        return Err(FeatureError::InsufficientHistory { needed: lookback - 1, got: t });
    }
    Ok(StateWindow { rows: features.rows.clone(), end_index: t, lookback })
}
