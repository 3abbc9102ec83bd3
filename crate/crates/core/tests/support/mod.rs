//! Shared test fixtures and brute-force reference implementations.
//!
//! The reference functions evaluate each indicator straight from its
//! definition (explicit weight sums, two-pass statistics, closed-form
//! smoothing) so they share no code path with the library.
#![allow(dead_code)]

use chrono::NaiveDate;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use drltrade_core::market_data::{OhlcvBar, PriceSeries};

pub const EPS: f64 = 1e-8;

/// Geometric random walk with ~3% daily moves, starting at 100.
pub fn random_prices(seed: u64, n: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut p = 100.0;
    (0..n)
        .map(|_| {
            let v = p;
            p *= 1.0 + rng.gen_range(-0.05..0.05);
            v
        })
        .collect()
}

pub fn series(asset: &str, start: NaiveDate, prices: &[f64]) -> PriceSeries {
    let bars = prices
        .iter()
        .enumerate()
        .map(|(i, &p)| OhlcvBar {
            date: start + chrono::Days::new(i as u64),
            open: p,
            high: p * 1.01,
            low: p * 0.99,
            close: p,
            adj_close: p,
            volume: 1000.0 + i as f64,
        })
        .collect();
    PriceSeries::new(asset, bars).expect("valid series")
}

pub fn default_start() -> NaiveDate {
    NaiveDate::from_ymd_opt(2015, 8, 30).unwrap()
}

/// Yahoo-format CSV text for `prices`, one row per consecutive calendar day.
pub fn yahoo_csv(start: NaiveDate, prices: &[f64]) -> String {
    let mut out = String::from("Date,Open,High,Low,Close,Adj Close,Volume\n");
    for (i, p) in prices.iter().enumerate() {
        let d = start + chrono::Days::new(i as u64);
        out.push_str(&format!("{},{p},{},{},{p},{p},{}\n", d.format("%Y-%m-%d"), p * 1.01, p * 0.99, 1000 + i));
    }
    out
}

/// Two-pass sample standard deviation.
pub fn sample_std(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Bias-corrected exponentially weighted std of `x[0..=t]` with weights
/// `(1 - alpha)^lag`, from explicit weight sums. `None` at `t = 0`.
pub fn ewm_std_at(x: &[f64], t: usize, span: usize) -> Option<f64> {
    if t == 0 {
        return None;
    }
    let alpha = 2.0 / (span as f64 + 1.0);
    let w: Vec<f64> = (0..=t).map(|i| (1.0 - alpha).powi((t - i) as i32)).collect();
    let sw: f64 = w.iter().sum();
    let sw2: f64 = w.iter().map(|v| v * v).sum();
    let mu = w.iter().zip(x).map(|(w, x)| w * x).sum::<f64>() / sw;
    let num = w.iter().zip(x).map(|(w, x)| w * (x - mu).powi(2)).sum::<f64>();
    Some((num / (sw - sw2 / sw)).sqrt().max(EPS))
}

/// Daily-return EWM std expressed on price indices (defined from `t = 2`).
pub fn price_sigma_at(prices: &[f64], t: usize, span: usize) -> Option<f64> {
    if t < 1 {
        return None;
    }
    let r: Vec<f64> = (1..=t).map(|i| prices[i] / prices[i - 1] - 1.0).collect();
    ewm_std_at(&r, t - 1, span)
}

pub fn vol_return_at(prices: &[f64], t: usize, h: usize, span: usize) -> Option<f64> {
    if t < h {
        return None;
    }
    let s = price_sigma_at(prices, t, span)?;
    Some((prices[t] / prices[t - h] - 1.0) / (s * (h as f64).sqrt()))
}

/// Weighted average with weights `0.5^(lag / half_life)` over the full history.
pub fn ewma_at(x: &[f64], t: usize, half_life: f64) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..=t {
        let w = 0.5f64.powf((t - i) as f64 / half_life);
        num += w * x[i];
        den += w;
    }
    num / den
}

pub fn macd_series(prices: &[f64], short: f64, long: f64) -> Vec<Option<f64>> {
    let n = prices.len();
    let q: Vec<Option<f64>> = (0..n)
        .map(|t| {
            (t >= 63).then(|| {
                let sd = sample_std(&prices[t - 63..=t]).max(EPS);
                (ewma_at(prices, t, short) - ewma_at(prices, t, long)) / sd
            })
        })
        .collect();
    (0..n)
        .map(|t| {
            (t >= 315).then(|| {
                let w: Vec<f64> = q[t - 252..=t].iter().map(|v| v.unwrap()).collect();
                q[t].unwrap() / sample_std(&w).max(EPS)
            })
        })
        .collect()
}

/// Wilder RSI from the closed form of the smoothing recursion: the seed
/// average decays by `(1 - 1/w)^k` and each later change enters with weight
/// `(1/w) (1 - 1/w)^(t - j)`.
pub fn rsi_at(prices: &[f64], t: usize, window: usize) -> Option<f64> {
    if t < window {
        return None;
    }
    let w = window as f64;
    let k = 1.0 - 1.0 / w;
    let change = |j: usize| prices[j] - prices[j - 1];
    let seed_g = (1..=window).map(|j| change(j).max(0.0)).sum::<f64>() / w;
    let seed_l = (1..=window).map(|j| (-change(j)).max(0.0)).sum::<f64>() / w;
    let mut g = seed_g * k.powi((t - window) as i32);
    let mut l = seed_l * k.powi((t - window) as i32);
    for j in window + 1..=t {
        let f = k.powi((t - j) as i32) / w;
        g += f * change(j).max(0.0);
        l += f * (-change(j)).max(0.0);
    }
    Some(if l == 0.0 {
        if g == 0.0 {
            50.0
        } else {
            100.0
        }
    } else {
        100.0 * g / (g + l)
    })
}

pub fn norm_close_at(prices: &[f64], t: usize, window: usize) -> Option<f64> {
    (t >= window).then(|| {
        let w = &prices[t - window..t];
        (prices[t] - mean(w)) / sample_std(w).max(EPS)
    })
}

/// Absolute difference between an optional library value and an optional
/// reference value; both must be defined or both undefined.
pub fn diff(a: Option<f64>, b: Option<f64>) -> f64 {
    match (a, b) {
        (Some(x), Some(y)) => (x - y).abs(),
        (None, None) => 0.0,
        _ => f64::INFINITY,
    }
}

/// Central-difference step used by every gradient check.
pub const FD_STEP: f64 = 1e-5;

/// Below this magnitude both gradients count as zero and are compared
/// absolutely: a central difference with `FD_STEP` carries roughly 1e-11 of
/// rounding noise, so a pure relative test is meaningless near zero.
pub const FD_ZERO: f64 = 1e-7;

/// Worst elementwise relative error between `analytic` and a central
/// finite difference of `loss` around `params`.
pub fn fd_worst_relative<P: drltrade_core::neural::ParamSet>(params: &P, analytic: &P, loss: impl Fn(&P) -> f64) -> f64 {
    let grads: Vec<f64> = analytic.slices().iter().flat_map(|s| s.iter().copied()).collect();
    let mut probe = params.clone();
    let mut worst: f64 = 0.0;
    let mut k = 0;
    let n_slices = params.slices().len();
    for si in 0..n_slices {
        let len = params.slices()[si].len();
        for j in 0..len {
            let orig = probe.slices()[si][j];
            probe.slices_mut()[si][j] = orig + FD_STEP;
            let up = loss(&probe);
            probe.slices_mut()[si][j] = orig - FD_STEP;
            let down = loss(&probe);
            probe.slices_mut()[si][j] = orig;
            let numeric = (up - down) / (2.0 * FD_STEP);
            let a = grads[k];
            k += 1;
            let scale = a.abs().max(numeric.abs());
            let err = if scale < FD_ZERO { (a - numeric).abs() / FD_ZERO } else { (a - numeric).abs() / scale };
            worst = worst.max(err);
        }
    }
    worst
}
