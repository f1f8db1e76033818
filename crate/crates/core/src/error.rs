use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("momentum ellipse is degenerate at this point (|f|_G = {norm:e})")]
    DegenerateEllipse { norm: f64 },
    #[error("spherical chart too close to a pole (theta = {theta:e})")]
    PoleChart { theta: f64 },
    #[error("point is not a fixed point of the drift (|F| = {residual:e})")]
    NotFixedPoint { residual: f64 },
    #[error("linearization is defective: {0}")]
    DefectiveLinearization(String),
    #[error("trajectory rejected at t = {t}: energy residual {residual:e} exceeds {limit:e}")]
    TrajectoryRejected { t: f64, residual: f64, limit: f64 },
    #[error("step size underflow at t = {t} (h = {h:e})")]
    Stiffness { t: f64, h: f64 },
    #[error("curve is not closed (endpoint gap {gap:e})")]
    OpenLoop { gap: f64 },
    #[error("need at least {needed} points, got {got}")]
    TooFewPoints { needed: usize, got: usize },
    #[error("every seed was rejected: {}", .0.join("; "))]
    AllSeedsRejected(Vec<String>),
    #[error("empty search range: {0}")]
    EmptyRange(String),
    #[error("invalid configuration: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn ensure_finite(values: &[f64], what: &str) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::Domain(format!("non-finite {what}")))
    }
}
