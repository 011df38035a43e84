use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("unknown {what} '{id}'")]
    Unknown { what: &'static str, id: String },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{0}")]
    Numeric(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            Self::Numeric(_) => 1,
            Self::Unknown { .. } | Self::Config(_) => 2,
            Self::Io { .. } => 3,
        }
    }
}

macro_rules! numeric_from {
    ($($t:ty),*) => {$(
        impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                Self::Numeric(e.to_string())
            }
        }
    )*};
}

numeric_from!(
    regcalc::RegError,
    regcalc::SimError,
    regcalc::PathError,
    regcalc::JumpError,
    regcalc::ItoError,
    regcalc::DirichletError
);
