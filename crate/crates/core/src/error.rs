use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("polynomial is identically zero")]
    ZeroPolynomial,
    #[error("root finder did not converge after {sweeps} sweeps (degree {degree})")]
    NonConvergence { degree: usize, sweeps: usize },
    #[error("evaluation point {re}{im:+}j coincides with a pole")]
    PoleHit { re: f64, im: f64 },
    #[error("degenerate loop: 1 + L is identically zero")]
    DegenerateLoop,
    #[error("operands live in different domains")]
    DomainMismatch,
    #[error("limit does not exist: numerator degree {num}, denominator degree {den}")]
    ImproperTF { num: usize, den: usize },
    #[error("log-sensitivity does not decay at high frequency (|S(inf)| = {0})")]
    TailDivergence(f64),
    #[error("closed loop has a pole on the stability boundary at {re}{im:+}j")]
    MarginalPole { re: f64, im: f64 },
    #[error("closed loop is unstable (pole at {re}{im:+}j); the sensitivity integral identity does not apply")]
    UnstableClosedLoop { re: f64, im: f64 },
    #[error("sensitivity zero on the unit circle at the Nyquist edge")]
    SingularityAtGridEdge,
    #[error("invalid parameter: {0}")]
    InvalidParams(String),
    #[error("invalid frequency grid: {0}")]
    InvalidGrid(String),
    #[error("bad bracket [{low}, {high}]: {reason}")]
    BadBracket { low: f64, high: f64, reason: String },
    #[error("stability margin has no clean crossing in [{low}, {high}]")]
    NoCrossing { low: f64, high: f64 },
    #[error("closed-loop pole count changed from {expected} to {found} along the sweep")]
    BranchCountChanged { expected: usize, found: usize },
}
