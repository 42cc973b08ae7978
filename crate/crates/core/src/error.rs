use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cut layer {cut} out of range 0..={num_layers}")]
    CutOutOfRange { cut: u32, num_layers: u32 },

    #[error("link outage: {link} rate is 0 with {payload_bits} bits to send")]
    LinkOutage {
        link: &'static str,
        payload_bits: u64,
    },

    #[error(
        "infeasible scenario: device '{device}' needs server frequency >= {f_min_hz} Hz \
         but the server tops out at {f_max_hz} Hz"
    )]
    InfeasibleServer {
        device: String,
        f_min_hz: f64,
        f_max_hz: f64,
    },

    #[error("server frequency {freq_hz} Hz outside feasible range [{f_min_hz}, {f_max_hz}]")]
    FrequencyOutOfRange {
        freq_hz: f64,
        f_min_hz: f64,
        f_max_hz: f64,
    },

    #[error("channel for device {device} round {round} still in outage after {attempts} redraws")]
    PersistentOutage {
        device: usize,
        round: u32,
        attempts: u32,
    },

    #[error("{path}: {message}")]
    Validation { path: String, message: String },

    #[error("failed to parse {file}: {message}")]
    Parse { file: PathBuf, message: String },

    #[error("invalid mapping table: {0}")]
    MappingTable(String),

    #[error("experiment produced no rounds")]
    EmptyResult,

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn validation(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Validation {
            path: path.into(),
            message: message.into(),
        }
    }

    /// Whether the error stems from bad input rather than a failure while running.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Validation { .. }
                | Error::Parse { .. }
                | Error::MappingTable(_)
                | Error::InfeasibleServer { .. }
        )
    }
}
