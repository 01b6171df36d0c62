use thiserror::Error;

/// Errors raised by the simulation and estimation pipeline.
#[derive(Debug, Error)]
pub enum Error {
    /// A caller-supplied argument is outside the domain of the operation.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Detuning too close to one of the dispersive-shift poles.
    #[error("detuning {detuning:.6e} rad/s lies within {margin:.3e} rad/s of the pole at {pole:.6e} rad/s")]
    Singularity { detuning: f64, pole: f64, margin: f64 },

    /// The radial cloud size is not small compared with the mode waist.
    #[error("cloud radius {r_rms:.3e} m is not below the mode waist {waist:.3e} m")]
    Geometry { r_rms: f64, waist: f64 },

    /// A least-squares fit did not converge or is degenerate.
    #[error("fit failed: {reason} (residual norm {residual_norm:.4e})")]
    FitFailure { reason: String, residual_norm: f64 },

    /// A trial record lacks an outcome needed by the chosen estimator.
    #[error("trial {trial_id}: missing outcome `{field}`")]
    MissingOutcome { trial_id: u64, field: &'static str },

    /// Not enough trials for the requested statistic.
    #[error("insufficient trials: need at least {needed}, got {got}")]
    InsufficientTrials { needed: usize, got: usize },

    /// The PSD table does not cover the band required by the transfer function.
    #[error("PSD covers [{have_lo:.4e}, {have_hi:.4e}] rad/s but [{need_lo:.4e}, {need_hi:.4e}] rad/s is required")]
    Coverage { have_lo: f64, have_hi: f64, need_lo: f64, need_hi: f64 },

    /// Velocity selection removed essentially every atom.
    #[error("velocity selection kept a fraction {survival:.3e} of the atoms")]
    EmptySelection { survival: f64 },

    /// Scenario configuration is malformed or inconsistent.
    #[error("config error: {0}")]
    Config(String),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for errors caused by configuration or user input rather than by
    /// the computation itself.
    pub fn is_config(&self) -> bool {
        matches!(self, Error::Config(_) | Error::InvalidArgument(_) | Error::Geometry { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;
