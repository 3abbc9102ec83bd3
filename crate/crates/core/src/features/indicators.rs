//! Price indicators, each aligned to the index of its input series.
//!
//! Entries that lack enough history are `None`. Every standard deviation used
//! as a divisor is floored at `eps` so degenerate (flat) inputs yield finite
//! values instead of NaN/Inf.

use super::FeatureError;

/// One-year horizon, and the window of the MACD signal normaliser.
pub const YEAR: usize = 252;
/// Trading days per month.
pub const MONTH: usize = 21;
/// Lag span of the rolling price std used by MACD (window `t-63..=t`).
pub const PRICE_STD_SPAN: usize = 63;
/// Lag span of the rolling std of `q` used by MACD (window `t-252..=t`).
pub const SIGNAL_STD_SPAN: usize = YEAR;

pub const DEFAULT_EPSILON: f64 = 1e-8;

/// A per-index indicator value, `None` before it is defined.
#[derive(Debug, Clone, PartialEq)]
pub struct Indicator(pub Vec<Option<f64>>);

impl Indicator {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Value at `t`, or `InsufficientHistory` when `t` precedes the warmup.
    pub fn at(&self, t: usize) -> Result<f64, FeatureError> {
        match self.0.get(t) {
            Some(Some(v)) => Ok(*v),
            _ => Err(FeatureError::InsufficientHistory { needed: self.first_valid().unwrap_or(usize::MAX), got: t }),
        }
    }

    pub fn first_valid(&self) -> Option<usize> {
        self.0.iter().position(Option::is_some)
    }
}

/// `r_t = p_t / p_{t-1} - 1`; element `i` is the return from `i` to `i + 1`.
pub fn daily_returns(prices: &[f64]) -> Vec<f64> {
    prices.windows(2).map(|w| w[1] / w[0] - 1.0).collect()
}

/// Exponentially weighted, bias-corrected standard deviation with decay
/// `alpha = 2 / (span + 1)`, computed over all history from index 0.
///
/// Index 0 is undefined (a single observation has no variance).
pub fn ewm_std(returns: &[f64], span: usize, eps: f64) -> Indicator {
    assert!(span >= 2, "span must be >= 2");
    let decay = 1.0 - 2.0 / (span as f64 + 1.0);
    let mut sum_w = 0.0;
    let mut sum_w2 = 0.0;
    let mut mean = 0.0;
    let mut m2 = 0.0;
    let mut out = Vec::with_capacity(returns.len());
    for &x in returns {
        sum_w *= decay;
        sum_w2 *= decay * decay;
        m2 *= decay;
        sum_w += 1.0;
        sum_w2 += 1.0;
        let delta = x - mean;
        mean += delta / sum_w;
        m2 += delta * (x - mean);
        let denom = sum_w - sum_w2 / sum_w;
        if denom > 0.0 {
            out.push(Some((m2.max(0.0) / denom).sqrt().max(eps)));
        } else {
            out.push(None);
        }
    }
    Indicator(out)
}

/// EWM std of daily returns re-indexed to prices: entry `t` covers returns up
/// to the one ending at `t`, so it is defined from `t = 2`.
pub fn price_sigma(prices: &[f64], span: usize, eps: f64) -> Indicator {
    let mut values = vec![None];
    values.extend(ewm_std(&daily_returns(prices), span, eps).0);
    values.truncate(prices.len());
    Indicator(values)
}

/// `(p_t / p_{t-h} - 1) / (sigma_t * sqrt(h))`.
pub fn vol_normalized_return(prices: &[f64], horizon: usize, sigma: &Indicator) -> Indicator {
    let scale = (horizon as f64).sqrt();
    Indicator(
        (0..prices.len())
            .map(|t| {
                if t < horizon {
                    return None;
                }
                let s = sigma.0.get(t).copied().flatten()?;
                Some((prices[t] / prices[t - horizon] - 1.0) / (s * scale))
            })
            .collect(),
    )
}

/// Bias-corrected exponentially weighted mean where weights halve every
/// `half_life` observations.
pub fn ewma_half_life(values: &[f64], half_life: f64) -> Vec<f64> {
    let decay = 0.5f64.powf(1.0 / half_life);
    let mut sum_w = 0.0;
    let mut mean = 0.0;
    values
        .iter()
        .map(|&x| {
            sum_w = sum_w * decay + 1.0;
            mean += (x - mean) / sum_w;
            mean
        })
        .collect()
}

/// Mean and sample (n-1) standard deviation of a window. Exact for constant input.
pub(crate) fn mean_std(window: &[f64]) -> (f64, f64) {
    let mut mean = 0.0;
    let mut m2 = 0.0;
    for (k, &x) in window.iter().enumerate() {
        let delta = x - mean;
        mean += delta / (k + 1) as f64;
        m2 += delta * (x - mean);
    }
    let n = window.len();
    let var = if n > 1 { m2.max(0.0) / (n - 1) as f64 } else { 0.0 };
    (mean, var.sqrt())
}

/// Volatility-normalised MACD: `q_t = (m(S) - m(L)) / std(p[t-63..=t])` and
/// `MACD_t = q_t / std(q[t-252..=t])`, with `m(k)` the half-life-`k` EWMA.
pub fn macd(prices: &[f64], short_half_life: f64, long_half_life: f64, eps: f64) -> Indicator {
    let fast = ewma_half_life(prices, short_half_life);
    let slow = ewma_half_life(prices, long_half_life);
    let q: Vec<Option<f64>> = (0..prices.len())
        .map(|t| {
            (t >= PRICE_STD_SPAN).then(|| {
                let (_, sd) = mean_std(&prices[t - PRICE_STD_SPAN..=t]);
                (fast[t] - slow[t]) / sd.max(eps)
            })
        })
        .collect();
    let first = PRICE_STD_SPAN + SIGNAL_STD_SPAN;
    Indicator(
        (0..prices.len())
            .map(|t| {
                if t < first {
                    return None;
                }
                let window: Vec<f64> = q[t - SIGNAL_STD_SPAN..=t].iter().map(|v| v.expect("q defined")).collect();
                let (_, sd) = mean_std(&window);
                Some(q[t].expect("q defined") / sd.max(eps))
            })
            .collect(),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RsiSmoothing {
    /// Recursive average with factor `1/window`, seeded by a simple mean.
    #[default]
    Wilder,
    /// Plain mean of the last `window` changes.
    Simple,
}

fn rsi_value(avg_gain: f64, avg_loss: f64) -> f64 {
    if avg_loss == 0.0 {
        if avg_gain == 0.0 {
            50.0
        } else {
            100.0
        }
    } else {
        100.0 - 100.0 / (1.0 + avg_gain / avg_loss)
    }
}

/// Relative strength index over daily price changes; defined from `t = window`.
pub fn rsi(prices: &[f64], window: usize, smoothing: RsiSmoothing) -> Indicator {
    assert!(window >= 1, "window must be >= 1");
    let n = prices.len();
    let mut out = vec![None; n];
    if n <= window {
        return Indicator(out);
    }
    let gain = |t: usize| (prices[t] - prices[t - 1]).max(0.0);
    let loss = |t: usize| (prices[t - 1] - prices[t]).max(0.0);
    match smoothing {
        RsiSmoothing::Wilder => {
            let w = window as f64;
            let mut g = (1..=window).map(gain).sum::<f64>() / w;
            let mut l = (1..=window).map(loss).sum::<f64>() / w;
            out[window] = Some(rsi_value(g, l));
            for t in window + 1..n {
                g = (g * (w - 1.0) + gain(t)) / w;
                l = (l * (w - 1.0) + loss(t)) / w;
                out[t] = Some(rsi_value(g, l));
            }
        }
        RsiSmoothing::Simple => {
            for (t, slot) in out.iter_mut().enumerate().skip(window) {
                let g = (t + 1 - window..=t).map(gain).sum::<f64>() / window as f64;
                let l = (t + 1 - window..=t).map(loss).sum::<f64>() / window as f64;
                *slot = Some(rsi_value(g, l));
            }
        }
    }
    Indicator(out)
}

/// Z-score of `p_t` against the mean and sample std of the preceding
/// `window` prices (`p[t-window..t]`).
pub fn normalize_close(prices: &[f64], window: usize, eps: f64) -> Indicator {
    assert!(window >= 2, "window must be >= 2");
    Indicator(
        (0..prices.len())
            .map(|t| {
                (t >= window).then(|| {
                    let (mean, sd) = mean_std(&prices[t - window..t]);
                    (prices[t] - mean) / sd.max(eps)
                })
            })
            .collect(),
    )
}
