use thiserror::Error;

/// Errors raised by the link model, the LSK analysis and the transient simulator.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinkError {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("no real resonance: C*R_L^2 = {c_r2:.6e} must exceed L = {l:.6e}")]
    NoRealResonance { l: f64, c_r2: f64 },

    #[error("degenerate primary impedance |Zpri| = {0:e}")]
    DegenerateImpedance(f64),

    #[error("inductance matrix is singular (k = {0} must be < 1)")]
    SingularInductance(f64),

    #[error("no detune in [{min_detune}, 0) reaches margin {margin:e} A over k in [{k_min}, {k_max}]")]
    Unsolvable {
        min_detune: f64,
        margin: f64,
        k_min: f64,
        k_max: f64,
    },

    #[error("transient unstable: state {state} reached {value:e} at t = {time:e} s (reduce the time step)")]
    Instability {
        state: &'static str,
        value: f64,
        time: f64,
    },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("indeterminate decode: {0}")]
    Indeterminate(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

pub type Result<T> = std::result::Result<T, LinkError>;

pub(crate) fn ensure_positive(name: &str, value: f64) -> Result<()> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(LinkError::Domain(format!("{name} must be positive and finite, got {value}")))
    }
}
