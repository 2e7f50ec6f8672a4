use std::path::PathBuf;

/// Errors raised across the workbench.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("config parse error: {0}")]
    Parse(String),

    #[error("invariant violation: {field}")]
    Invariant { field: String },

    #[error("inertia matrix is not positive definite (Cholesky failed)")]
    SingularInertia,

    #[error("inverse kinematics did not converge after {iterations} iterations (position residual {position_residual:.3e} m, orientation residual {orientation_residual:.3e} rad){}", context_suffix(.context))]
    NoConvergence {
        iterations: usize,
        position_residual: f64,
        orientation_residual: f64,
        best: Vec<f64>,
        context: Option<String>,
    },

    #[error("dimension mismatch: {what} (expected {expected}, got {got})")]
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("{0}")]
    Contract(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

fn context_suffix(ctx: &Option<String>) -> String {
    match ctx {
        Some(c) => format!(" [{c}]"),
        None => String::new(),
    }
}

impl Error {
    pub(crate) fn invariant(field: impl Into<String>) -> Self {
        Error::Invariant {
            field: field.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Attaches a location (segment, tick) to a `NoConvergence` error; other
    /// variants pass through unchanged.
    pub fn with_context(self, ctx: impl Into<String>) -> Self {
        match self {
            Error::NoConvergence {
                iterations,
                position_residual,
                orientation_residual,
                best,
                context,
            } => {
                let ctx = ctx.into();
                let context = Some(match context {
                    Some(inner) => format!("{ctx}: {inner}"),
                    None => ctx,
                });
                Error::NoConvergence {
                    iterations,
                    position_residual,
                    orientation_residual,
                    best,
                    context,
                }
            }
            other => other,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
