use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("RT condition violated: rho_plus ({rho_plus}) must exceed rho_minus ({rho_minus})")]
    RtConditionViolated { rho_plus: f64, rho_minus: f64 },
    #[error("parameter `{0}` must be strictly positive and finite")]
    NonPositiveParameter(String),
    #[error("coefficient `{0}` must be nonnegative and finite")]
    NegativeCoefficient(String),
    #[error("profile mismatch: {0}")]
    ProfileMismatch(String),
    #[error("degree {0} is below the minimum of 8")]
    DegreeTooLow(usize),
    #[error("constraint stack has numerical rank {found}, expected {expected}")]
    RankDeficiency { found: usize, expected: usize },
    #[error("denominator form is not positive definite on the constrained space")]
    IndefiniteDenominator,
    #[error("eigensolver breakdown: {0}")]
    NumericalBreakdown(String),
    #[error("adaptive lattice reached |k| <= {cap} without meeting the shell margin")]
    LatticeExhausted { cap: u32 },
    #[error("alpha(s) is nonnegative near s = 0: configuration is not unstable")]
    NotUnstable,
    #[error("alpha(s) still negative after {0} doublings")]
    ExpansionExhausted(u32),
    #[error("bisection stagnated at s = {s} with |h| = {h}")]
    ToleranceNotMet { s: f64, h: f64 },
    #[error("normal mode requested from a stable result")]
    StableInput,
    #[error("Stokes system is singular")]
    SingularSystem,
    #[error("incompatible Stokes data (residual {0:e})")]
    IncompatibleData(f64),
    #[error("lambda = 0: vertical field threshold undefined")]
    ZeroPermeability,
    #[error("horizontal destabilizer requires m_bar[2] = 0 and a nonzero horizontal field")]
    VerticalFieldPresent,
    #[error("Dirichlet search cap {0} reached before the ratio target")]
    DenominatorBoundExceeded(u64),
    #[error("verdict does not change across the bracket [{lo}, {hi}]")]
    NoSignChange { lo: f64, hi: f64 },
    #[error("unknown coefficient `{0}`")]
    UnknownCoefficient(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}
