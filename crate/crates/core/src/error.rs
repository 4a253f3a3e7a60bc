use std::fmt;

use thiserror::Error;

/// Identifies a conductor inside a [`WireLayout`](crate::geometry::WireLayout).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Conductor {
    Segment(usize),
    Infinite(usize),
}

impl fmt::Display for Conductor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Conductor::Segment(i) => write!(f, "segment {i}"),
            Conductor::Infinite(i) => write!(f, "infinite wire {i}"),
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid {field}: {reason}")]
    Validation { field: String, reason: String },

    #[error("point is {distance:.3e} m from {conductor}, inside the exclusion radius")]
    Singularity { conductor: Conductor, distance: f64 },

    #[error("difference step {step:.3e} m exceeds a quarter of the distance {distance:.3e} m to the nearest conductor")]
    StepCollision { step: f64, distance: f64 },

    #[error("{name} must be positive, got {value}")]
    Domain { name: &'static str, value: f64 },

    #[error(
        "series not converged after {terms} pairs: last pair contributed {last_term:.3e} T, partial sum ({:.6e}, {:.6e}, {:.6e}) T",
        partial_sum[0], partial_sum[1], partial_sum[2]
    )]
    Truncation {
        partial_sum: [f64; 3],
        last_term: f64,
        terms: usize,
    },

    #[error("degenerate Jacobian spectrum ({:.4e}, {:.4e}, {:.4e}) T/m: quadrupole axis is undefined", eigenvalues[0], eigenvalues[1], eigenvalues[2])]
    Degenerate { eigenvalues: [f64; 3] },

    #[error("parse error{}: {message}", fmt_location(*line, key.as_deref()))]
    Parse {
        line: Option<usize>,
        key: Option<String>,
        message: String,
    },

    #[error("sample {index}: {source}")]
    Sample {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn fmt_location(line: Option<usize>, key: Option<&str>) -> String {
    match (line, key) {
        (Some(l), Some(k)) => format!(" at line {l}, key `{k}`"),
        (Some(l), None) => format!(" at line {l}"),
        (None, Some(k)) => format!(" at key `{k}`"),
        (None, None) => String::new(),
    }
}

impl Error {
    pub fn validation(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Validation {
            field: field.into(),
            reason: reason.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
