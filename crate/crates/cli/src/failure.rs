use std::fmt;

/// Command failure, split by exit code.
#[derive(Debug)]
pub enum Failure {
    /// Bad configuration or arguments: exit 1.
    Validation(String),
    /// Solver, simulation or I/O failure: exit 2.
    Numerical(String),
}

impl Failure {
    pub fn validation(field: &str, reason: &str) -> Self {
        Failure::Validation(format!("{field}: {reason}"))
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Validation(_) => 1,
            Failure::Numerical(_) => 2,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Validation(m) => write!(f, "invalid configuration: {m}"),
            Failure::Numerical(m) => write!(f, "numerical failure: {m}"),
        }
    }
}

impl std::error::Error for Failure {}

impl From<patchcomp_core::Error> for Failure {
    fn from(e: patchcomp_core::Error) -> Self {
        if e.is_validation() {
            Failure::Validation(e.to_string())
        } else {
            Failure::Numerical(e.to_string())
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Numerical(format!("i/o: {e}"))
    }
}
