//! Library surface of the command-line tool: the run-configuration schema
//! and the error-to-exit-code mapping. The binary lives in `main.rs`;
//! integration tests and fuzz targets use this crate to parse configs the
//! same way the binary does.

pub mod config;

pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_NUMERIC: u8 = 3;
pub const EXIT_IO: u8 = 4;

/// Error carrying the process exit code.
#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn config(message: String) -> Self {
        CliError {
            code: EXIT_CONFIG,
            message,
        }
    }

    pub fn numeric(message: String) -> Self {
        CliError {
            code: EXIT_NUMERIC,
            message,
        }
    }

    pub fn io(message: String) -> Self {
        CliError {
            code: EXIT_IO,
            message,
        }
    }
}

impl From<train_harness::Error> for CliError {
    fn from(e: train_harness::Error) -> Self {
        use train_harness::Error as E;
        let code = match &e {
            E::Io(_) => EXIT_IO,
            E::Diverged { .. } | E::NanGradient { .. } => EXIT_NUMERIC,
            E::Autodiff(autodiff_core::Error::Numeric(_)) => EXIT_NUMERIC,
            E::Tokenizer(tokenizer_bpe::Error::Io(_)) => EXIT_IO,
            _ => EXIT_CONFIG,
        };
        CliError {
            code,
            message: e.to_string(),
        }
    }
}

impl From<tokenizer_bpe::Error> for CliError {
    fn from(e: tokenizer_bpe::Error) -> Self {
        let code = match &e {
            tokenizer_bpe::Error::Io(_) => EXIT_IO,
            _ => EXIT_CONFIG,
        };
        CliError {
            code,
            message: e.to_string(),
        }
    }
}
