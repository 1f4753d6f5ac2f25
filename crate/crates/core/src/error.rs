use thiserror::Error;

/// Errors raised by the laboratory.
#[derive(Debug, Error)]
pub enum KblError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("zero vector where a nonzero vector is required ({0})")]
    ZeroVector(&'static str),

    #[error("complex-valued input to a real-only routine ({0})")]
    ComplexInput(&'static str),

    #[error("linear program has {constraints} constraints, cap is {cap}")]
    LpTooLarge { constraints: usize, cap: usize },

    #[error("simplex breakdown: {0}")]
    LpNumerical(String),

    #[error("operator is singular or nearly singular at zeta = {zeta}{}", describe_distance(*.distance))]
    Singular { zeta: String, distance: Option<f64> },

    #[error("|zeta| = {modulus} does not exceed the spectral radius bound {spr_upper}")]
    MarginViolated { modulus: f64, spr_upper: f64 },

    #[error("series ratio {ratio} is not below 1")]
    RatioTooLarge { ratio: f64 },

    #[error("operator has no spectrum oracle; {0} requires one")]
    MissingSpectrum(&'static str),

    #[error("path comes within {eta:e} of the spectrum (margin {margin:e})")]
    PathTouchesSpectrum { eta: f64, margin: f64 },

    #[error("accumulated error bound {bound:e} exceeds target {target:e}")]
    BoundExceeded { bound: f64, target: f64 },

    #[error("polynomial formal degree {degree} exceeds cap {cap}")]
    DegreeCap { degree: usize, cap: usize },

    #[error("contour node within {distance:e} of the spectrum")]
    NodeTooClose { distance: f64 },

    #[error("point {0} is not enclosed by the contour")]
    NotEnclosed(String),

    #[error("contour must enclose exactly one eigenvalue, found {0}")]
    EnclosureMismatch(usize),

    #[error("projection hypothesis fails: |Pg|/|g| = {ratio:e} > {tolerance:e}")]
    ProjectionNonzero { ratio: f64, tolerance: f64 },

    #[error("complement check failed: {0}")]
    InvalidComplement(String),

    #[error("degenerate basis: {0}")]
    DegenerateBasis(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

fn describe_distance(distance: Option<f64>) -> String {
    match distance {
        Some(d) => format!(" (distance to spectrum {d:e})"),
        None => String::new(),
    }
}

pub type Result<T> = std::result::Result<T, KblError>;

pub(crate) fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(KblError::DimensionMismatch { expected, found })
    }
}
