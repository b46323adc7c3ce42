use std::fmt;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("configuration rejected: {}", join(.0))]
    InvalidConfig(Vec<crate::model::Violation>),

    #[error("singular linear system while {context}")]
    Singular { context: String },

    #[error("{what} did not converge after {iterations} iterations (last iterate {last}, residual {residual:e})")]
    NoConvergence { what: &'static str, iterations: usize, last: f64, residual: f64 },

    #[error("state space too large: {policies} policies over {states} joint states (limit {limit})")]
    StateSpaceTooLarge { states: usize, policies: f64, limit: usize },

    #[error("index computation failed for server {server}, state {state}: {source}")]
    IndexCell {
        server: usize,
        state: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("{0}")]
    Usage(String),

    #[error("internal numerical error: {0}")]
    Internal(String),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl fmt::Display) -> Self {
        Error::InvalidParameter { name, reason: reason.to_string() }
    }
}

fn join(violations: &[crate::model::Violation]) -> String {
    violations.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
}
