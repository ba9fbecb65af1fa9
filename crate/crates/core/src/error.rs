use thiserror::Error;

/// Errors produced by the simulation and analysis routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument is outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A caller-side precondition does not hold.
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// The circuit topology cannot be integrated as a second-order system
    /// (zero capacitance or inductance).
    #[error("degenerate topology: {0}")]
    DegenerateTopology(String),

    /// A linear solve or conversion hit a zero pivot.
    #[error("singular: {0}")]
    Singular(String),

    /// A two-port conversion needs S21 != 0.
    #[error("degenerate network: {0}")]
    DegenerateNetwork(String),

    /// The requested frequency is not covered by the sampled grid.
    #[error("frequency {freq:e} Hz outside grid [{lo:e}, {hi:e}]")]
    Extrapolation { freq: f64, lo: f64, hi: f64 },

    /// NaN or an unphysical value appeared during time stepping.
    #[error("numerical instability at t = {time:e} s: {detail}")]
    NumericalInstability { time: f64, detail: String },

    /// Normalized autocorrelation of a train without clicks.
    #[error("undefined normalization: {0}")]
    UndefinedNormalization(String),

    /// The return-current sweep never produced a plateau/knee structure.
    #[error("no plateau found: {0}")]
    NoPlateau(String),

    /// Malformed Touchstone content.
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
