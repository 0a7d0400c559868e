use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("schema error: {0}")]
    Schema(String),
    #[error("capacity error: {0}")]
    Capacity(String),
    #[error("i/o error: {0}")]
    Io(String),
    #[error("{0}")]
    Mismatch(String),
    #[error("simulation error: {0}")]
    Simulation(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Mismatch(_) => 1,
            CliError::Schema(_) => 2,
            CliError::Capacity(_) => 3,
            CliError::Io(_) => 4,
            CliError::Simulation(_) => 5,
        }
    }

    pub fn io(path: &std::path::Path, e: std::io::Error) -> Self {
        CliError::Io(format!("{}: {e}", path.display()))
    }
}

impl From<impulse_core::mapper::MapError> for CliError {
    fn from(e: impulse_core::mapper::MapError) -> Self {
        use impulse_core::mapper::MapError::*;
        match e {
            Capacity { .. } | FanInTooLarge { .. } | ImageTooLarge { .. } => {
                CliError::Capacity(e.to_string())
            }
            Quantization { .. } | Shape(_) | Chain { .. } => CliError::Schema(e.to_string()),
        }
    }
}
