use drltrade_core::Error as CoreError;
use thiserror::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;
pub const EXIT_PARTIAL: i32 = 4;

/// A failure with the exit code it maps to and the pipeline stage it came from.
#[derive(Debug, Error)]
#[error("{stage}: {message}")]
pub struct CliError {
    pub code: i32,
    pub stage: &'static str,
    pub message: String,
}

impl CliError {
    pub fn input(stage: &'static str, message: impl Into<String>) -> Self {
        Self { code: EXIT_USAGE, stage, message: message.into() }
    }

    pub fn runtime(stage: &'static str, message: impl Into<String>) -> Self {
        Self { code: EXIT_RUNTIME, stage, message: message.into() }
    }

    /// Data problems (parse errors, short series) are input errors; the rest
    /// are runtime failures.
    pub fn from_core(e: CoreError) -> Self {
        use drltrade_core::market_data::MarketDataError as M;
        let code = match &e {
            CoreError::MarketData(M::NetworkError(_) | M::HttpStatus(_)) => EXIT_RUNTIME,
            CoreError::MarketData(_) => EXIT_USAGE,
            _ => EXIT_RUNTIME,
        };
        let stage = e.stage();
        Self { code, stage, message: e.to_string() }
    }

    /// Same as [`from_core`](Self::from_core) but always a runtime failure.
    pub fn runtime_from(e: impl Into<CoreError>) -> Self {
        let e = e.into();
        Self { code: EXIT_RUNTIME, stage: e.stage(), message: e.to_string() }
    }

    pub fn io(stage: &'static str, path: &std::path::Path, e: std::io::Error) -> Self {
        Self::runtime(stage, format!("{}: {e}", path.display()))
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        Self::from_core(e)
    }
}
