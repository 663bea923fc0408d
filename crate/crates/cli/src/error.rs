use std::fmt;
use std::process::ExitCode;

/// Failure classes, each with its own exit status.
#[derive(Debug)]
pub enum CliError {
    /// Unreadable or malformed input, or an invalid option combination (exit 2).
    Input(String),
    /// A tabulated f fails the admissibility checks (exit 3).
    Inadmissible(String),
    /// The requested z lies beyond what the sample can resolve (exit 4).
    Resolution(String),
    /// Output could not be written (exit 1).
    Output(String),
    /// Numerical failure (exit 1).
    Compute(String),
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(match self {
            CliError::Input(_) => 2,
            CliError::Inadmissible(_) => 3,
            CliError::Resolution(_) => 4,
            CliError::Output(_) | CliError::Compute(_) => 1,
        })
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Input(m) => write!(f, "input error: {m}"),
            CliError::Inadmissible(m) => write!(f, "inadmissible f: {m}"),
            CliError::Resolution(m) => write!(f, "insufficient resolution: {m}"),
            CliError::Output(m) => write!(f, "cannot write output: {m}"),
            CliError::Compute(m) => write!(f, "{m}"),
        }
    }
}

impl From<qfbound::Error> for CliError {
    fn from(e: qfbound::Error) -> Self {
        use qfbound::Error as E;
        let msg = e.to_string();
        match e {
            E::NotMonotone { .. } | E::ZeroAtBoundary { .. } => CliError::Inadmissible(msg),
            E::LengthMismatch { .. }
            | E::Empty(_)
            | E::NonFinite { .. }
            | E::DegenerateSpectrum
            | E::TOutOfRange { .. }
            | E::InvalidPower(_)
            | E::OutsideTable { .. }
            | E::InvalidTable(_)
            | E::DimensionMismatch { .. }
            | E::NotSymmetric { .. }
            | E::ZeroMatrix
            | E::TooLarge { .. }
            | E::Unsupported(_)
            | E::InvalidArgument(_)
            | E::Parse { .. }
            | E::Io(_) => CliError::Input(msg),
            _ => CliError::Compute(msg),
        }
    }
}
