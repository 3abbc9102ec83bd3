use thiserror::Error;

use crate::agents::AgentError;
use crate::backtest::BacktestError;
use crate::env::EnvError;
use crate::features::FeatureError;
use crate::market_data::MarketDataError;
use crate::neural::NeuralError;

/// Crate-wide error, one variant per pipeline stage.
#[derive(Debug, Error)]
pub enum Error {
    #[error("market data: {0}")]
    MarketData(#[from] MarketDataError),
    #[error("features: {0}")]
    Features(#[from] FeatureError),
    #[error("environment: {0}")]
    Env(#[from] EnvError),
    #[error("neural: {0}")]
    Neural(#[from] NeuralError),
    #[error("agent: {0}")]
    Agent(#[from] AgentError),
    #[error("backtest: {0}")]
    Backtest(#[from] BacktestError),
}

impl Error {
    /// Name of the pipeline stage that produced the error.
    pub fn stage(&self) -> &'static str {
        match self {
            Error::MarketData(_) => "market_data",
            Error::Features(_) => "features",
            Error::Env(_) => "environment",
            Error::Neural(_) => "neural",
            Error::Agent(_) => "agents",
            Error::Backtest(_) => "backtest",
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
