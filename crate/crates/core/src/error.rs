//! Error type shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("site index {site} out of range for {num_sites} sites")]
    SiteOutOfRange { site: usize, num_sites: usize },

    #[error("local operator is {got}x{got} but site {site} has dimension {expected}")]
    LocalDimMismatch {
        site: usize,
        expected: usize,
        got: usize,
    },

    #[error("total Hilbert dimension {dim} exceeds cap {cap}")]
    DimensionCap { dim: usize, cap: usize },

    #[error("invalid lattice: {0}")]
    InvalidLattice(String),

    #[error("operator is not Hermitian (asymmetry {asym:.3e})")]
    NotHermitian { asym: f64 },

    #[error("operator support {support:?} is not the single site {site}")]
    NotSiteLocal { support: Vec<usize>, site: usize },

    #[error("wrong bath family: expected {expected}, got {got}")]
    WrongBathFamily {
        expected: &'static str,
        got: &'static str,
    },

    #[error("Matsubara frequency nu_{l} coincides with the Drude cutoff E_D = {e_d}")]
    MatsubaraResonance { l: usize, e_d: f64 },

    #[error("Bose occupation diverges: E - mu = {0} <= 0")]
    BoseDivergence(f64),

    #[error(
        "derivative contour around eps0 = {eps0} (radius {radius}) would enclose a pole at distance {pole_dist}"
    )]
    ContourPole {
        eps0: f64,
        radius: f64,
        pole_dist: f64,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("steady state did not converge: residual {residual:.3e} after horizon {horizon:.3e}")]
    SteadyStateNonConvergence { residual: f64, horizon: f64 },

    #[error("steady state is not unique: two null-space candidates below tolerance")]
    DegenerateSteadyState,

    #[error("step size underflow at t = {t}: problem too stiff for the requested tolerance")]
    StepSizeUnderflow { t: f64 },

    #[error("integrator exceeded {0} steps")]
    TooManySteps(usize),

    #[error("state norm collapsed below 1e-12 between observable grid points")]
    NormCollapse,

    #[error("coupling is trivial: all local matrix elements r_kq vanish")]
    TrivialCoupling,

    #[error("{0}")]
    Unsupported(String),
}

pub type Result<T> = std::result::Result<T, Error>;
