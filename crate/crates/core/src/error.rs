use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("{what} needs about {needed} {unit}, over the budget of {budget}")]
    Budget {
        what: String,
        needed: u128,
        budget: u128,
        /// What `needed` and `budget` count: bytes, points or words.
        unit: &'static str,
    },

    #[error("n = {n} is outside the table range {lo}..={hi}")]
    OutOfRange { n: usize, lo: usize, hi: usize },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

/// Memory ceiling for the large tables and scans, in bytes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Budget {
    pub bytes: u128,
}

impl Budget {
    pub const DEFAULT_BYTES: u128 = 4 << 30;

    pub fn new(bytes: u128) -> Self {
        Budget { bytes }
    }

    pub fn from_megabytes(mb: u64) -> Self {
        Budget {
            bytes: (mb as u128) << 20,
        }
    }

    pub(crate) fn check(&self, what: &str, needed: u128) -> Result<()> {
        if needed > self.bytes {
            return Err(Error::Budget {
                what: what.to_string(),
                needed,
                budget: self.bytes,
                unit: "bytes",
            });
        }
        Ok(())
    }
}

impl Default for Budget {
    fn default() -> Self {
        Budget {
            bytes: Self::DEFAULT_BYTES,
        }
    }
}
