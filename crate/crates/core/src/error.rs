use std::fmt;

use crate::model::Violation;

pub type Result<T> = std::result::Result<T, Error>;

/// Failures raised by the solver stack.
///
/// Several variants mirror structural hypotheses of the periodic problem:
/// `Validation` carries stability (`b/c² − τ̄/α > 0`) and boundary-measure
/// violations, `NonContraction` the small-data requirement of the fixed
/// point, and `DegeneracyDetected` the requirement that `α` stays away from 0.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid configuration: {}", ViolationList(.0))]
    Validation(Vec<Violation>),

    #[error("configuration error: {0}")]
    Config(#[from] ConfigError),

    #[error("time grid with {nt} samples cannot represent {harmonics} harmonics (need at least {required})")]
    UndersampledTime {
        nt: usize,
        harmonics: usize,
        required: usize,
    },

    #[error("mean-mode system is singular: no impedance or Dirichlet endpoint")]
    SingularMeanMode,

    #[error("linear solve for harmonic {harmonic} failed: residual {residual:.3e}, pivot ratio {condition_estimate:.3e}")]
    SolveFailure {
        harmonic: usize,
        residual: f64,
        condition_estimate: f64,
    },

    #[error("linearized block solve did not converge after {iterations} iterations (residual {residual:.3e})")]
    NonConvergedIteration { iterations: usize, residual: f64 },

    #[error("fixed-point map is not contracting after {iterations} iterations (last ratio {last_ratio:.3e})")]
    NonContraction {
        iterations: usize,
        last_ratio: f64,
        update_norms: Vec<f64>,
    },

    #[error("degenerate second-derivative coefficient: alpha_min = {alpha_min:.6} below floor {floor}")]
    DegeneracyDetected { alpha_min: f64, floor: f64 },

    #[error("fixed point not reached in {iterations} iterations (last relative update {last_update:.3e})")]
    MaxIterExceeded { iterations: usize, last_update: f64 },

    #[error("stability condition violated: margin {margin:.6}")]
    StabilityViolation { margin: f64 },

    #[error("unknown manufactured case `{0}`")]
    UnknownCase(String),

    #[error("contraction lost at perturbation eps = {eps:.3e}: {source}")]
    ContractionLost {
        eps: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("no periodic attractor after {periods} periods (gap {gap:.3e})")]
    NoPeriodicAttractor { periods: usize, gap: f64 },

    #[error("implicit stage solve rejected at step {step} after {iterations} iterations")]
    StepRejected { step: usize, iterations: usize },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Stable machine-readable name, used in error records.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Validation(v) => v.first().map(Violation::kind).unwrap_or("Validation"),
            Error::Config(c) => c.kind(),
            Error::UndersampledTime { .. } => "UndersampledTime",
            Error::SingularMeanMode => "SingularMeanMode",
            Error::SolveFailure { .. } => "SolveFailure",
            Error::NonConvergedIteration { .. } => "NonConvergedIteration",
            Error::NonContraction { .. } => "NonContraction",
            Error::DegeneracyDetected { .. } => "DegeneracyDetected",
            Error::MaxIterExceeded { .. } => "MaxIterExceeded",
            Error::StabilityViolation { .. } => "StabilityViolation",
            Error::UnknownCase(_) => "UnknownCase",
            Error::ContractionLost { .. } => "ContractionLost",
            Error::NoPeriodicAttractor { .. } => "NoPeriodicAttractor",
            Error::StepRejected { .. } => "StepRejected",
            Error::ShapeMismatch(_) => "ShapeMismatch",
            Error::InvalidArgument(_) => "InvalidArgument",
            Error::Io(_) => "IoError",
        }
    }

    /// True for failures of the numerical solvers, as opposed to bad input.
    pub fn is_solver_failure(&self) -> bool {
        matches!(
            self,
            Error::SingularMeanMode
                | Error::SolveFailure { .. }
                | Error::NonConvergedIteration { .. }
                | Error::NonContraction { .. }
                | Error::DegeneracyDetected { .. }
                | Error::MaxIterExceeded { .. }
                | Error::ContractionLost { .. }
                | Error::NoPeriodicAttractor { .. }
                | Error::StepRejected { .. }
        )
    }
}

/// Problems found while reading a configuration file.
#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("syntax error at line {line}: {message}")]
    SyntaxError { line: usize, message: String },

    #[error("unknown key `{key}`{}", line_suffix(*.line))]
    UnknownKey { key: String, line: Option<usize> },

    #[error("type mismatch for `{key}`: {message}")]
    TypeMismatch { key: String, message: String },

    #[error("cannot read `{path}`: {message}")]
    Unreadable { path: String, message: String },
}

impl ConfigError {
    pub fn kind(&self) -> &'static str {
        match self {
            ConfigError::SyntaxError { .. } => "SyntaxError",
            ConfigError::UnknownKey { .. } => "UnknownKey",
            ConfigError::TypeMismatch { .. } => "TypeMismatch",
            ConfigError::Unreadable { .. } => "IoError",
        }
    }
}

fn line_suffix(line: Option<usize>) -> String {
    line.map(|l| format!(" at line {l}")).unwrap_or_default()
}

struct ViolationList<'a>(&'a [Violation]);

impl fmt::Display for ViolationList<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, v) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str("; ")?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}
