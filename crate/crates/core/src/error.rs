//! Error type shared by the core algorithms.

use alloc::string::String;
use core::fmt;

pub type Result<T> = core::result::Result<T, CoreError>;

/// Failure modes of the core computations. IO never appears here; the
/// companion crate wraps these when files are involved.
#[derive(Debug, Clone, PartialEq)]
pub enum CoreError {
    /// Tensor or latent dimensions do not line up.
    Shape(String),
    /// A value is outside its documented domain (bad class index, empty batch, ...).
    Domain(String),
    /// Non-finite numbers where finite ones are required.
    Numeric(String),
    /// Inconsistent or out-of-range configuration.
    Config(String),
    /// A dataset precondition failed (empty domain, missing scores, ...).
    Data(String),
    /// Training produced a non-finite loss; the message names the last good epoch.
    Diverged(String),
    /// Malformed checkpoint bytes.
    Format(String),
}

impl fmt::Display for CoreError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CoreError::Shape(m) => write!(f, "shape error: {m}"),
            CoreError::Domain(m) => write!(f, "domain error: {m}"),
            CoreError::Numeric(m) => write!(f, "numeric error: {m}"),
            CoreError::Config(m) => write!(f, "config error: {m}"),
            CoreError::Data(m) => write!(f, "data error: {m}"),
            CoreError::Diverged(m) => write!(f, "training diverged: {m}"),
            CoreError::Format(m) => write!(f, "format error: {m}"),
        }
    }
}

impl core::error::Error for CoreError {}
