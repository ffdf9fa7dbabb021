use thiserror::Error;

/// A single failed invariant found by [`crate::domain::validate`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    EmptyDomain,
    NonIncreasingInterfaces,
    NonPositiveConductivity {
        layer: usize,
    },
    /// Planar outer coordinates must be `-R` and `R`; cylindrical must start above 0.
    BadOuterCoordinates,
    LayerCountMismatch {
        layers: usize,
        compartments: usize,
    },
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid domain: {0:?}")]
    InvalidDomain(Vec<Violation>),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("divergent integral: term r^{exponent} ln^{log_power} is not integrable from {lower}")]
    DivergentIntegral {
        exponent: i32,
        log_power: u32,
        lower: String,
    },
    #[error("evaluation at a singular point r = {0}")]
    EvaluationAtSingularity(String),
    #[error("value not representable exactly (irrational); use a floating mode")]
    Irrational,
    #[error("term r^{0} ln^{1} is outside the planar polynomial class")]
    UnsupportedTerm(i32, u32),
    #[error("singular interface system at interface {0}")]
    SingularInterfaceSystem(usize),
    #[error("azimuthal index {0} is not supported for this geometry")]
    UnsupportedIndex(u32),
    #[error("requested |lambda| = {requested} exceeds the trust radius {radius}")]
    TrustRadiusTooSmall { requested: f64, radius: f64 },
    #[error("Newton polishing did not converge near lambda = {0}")]
    NoConvergence(f64),
    #[error("configuration is not equilibrated (total flux {0})")]
    NotEquilibrated(f64),
    #[error("zero denominator in {0}")]
    ZeroDenominator(&'static str),
    #[error("convolution diverges: class and sign of lambda = {0} disagree")]
    DivergentConvolution(f64),
    #[error("solution family does not match the configuration: {0}")]
    FamilyMismatch(String),
    #[error("coordinate {0} is outside the domain")]
    OutOfDomain(f64),
    #[error("integrator step failure at r = {0}")]
    StepFailure(f64),
    #[error("quadrature failed to reach tolerance on [{0}, {1}]")]
    QuadratureFailure(f64, f64),
    #[error("configuration error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;
