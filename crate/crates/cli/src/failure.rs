use std::fmt;

/// A command failure with the process exit code it maps to.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub error: anyhow::Error,
}

pub const EXIT_RUNTIME: u8 = 1;
pub const EXIT_USAGE: u8 = 2;

impl Failure {
    pub fn usage(msg: impl fmt::Display) -> Self {
        Failure {
            code: EXIT_USAGE,
            error: anyhow::anyhow!("{msg}"),
        }
    }
}

impl<E: Into<anyhow::Error>> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure {
            code: EXIT_RUNTIME,
            error: e.into(),
        }
    }
}

pub trait ResultExt<T> {
    /// Reclassifies an error as a usage or validation error.
    fn usage(self) -> Result<T, Failure>;
}

impl<T, E: Into<anyhow::Error>> ResultExt<T> for Result<T, E> {
    fn usage(self) -> Result<T, Failure> {
        self.map_err(|e| Failure {
            code: EXIT_USAGE,
            error: e.into(),
        })
    }
}
