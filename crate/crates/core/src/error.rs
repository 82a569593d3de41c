use thiserror::Error;

use crate::jet::C64;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("telescopic factor 1+s with |s| = {modulus} >= 1 at step {step}")]
    BranchFailure { step: usize, modulus: f64 },
    #[error("preimage depth {depth} exceeds the configured cap {cap}")]
    DepthTooLarge { depth: u32, cap: u32 },
    #[error("map is not invertible at a = 0")]
    DegenerateJacobian,
    #[error("no r strictly between G_p(0) = {g0} and G_p(c) = {gc} inside (0, 1)")]
    InfeasibleConstants { g0: f64, gc: f64 },
    #[error("point ({x}, {y}) lies outside the domain of the operation")]
    OutsideDomain { x: C64, y: C64 },
    #[error("forward orbit does not enter V+ within {max_depth} steps")]
    NeverEntersVPlus { max_depth: u32 },
    #[error("backward orbit does not enter V- within {max_depth} steps")]
    NeverEntersVMinus { max_depth: u32 },
    #[error("point lies on the degenerate parabola x = p(y)")]
    OnDegenerateParabola,
    #[error("tangency function not evaluable: {0}")]
    NotInDomain(Box<Error>),
    #[error("{stage}: no convergence after {steps} steps (residual {residual:e})")]
    NoConvergence {
        stage: &'static str,
        steps: usize,
        residual: f64,
    },
    #[error("derivative {derivative:e} below the conditioning floor {floor:e}")]
    IllConditioned { derivative: f64, floor: f64 },
    #[error("gradient of w vanishes near ({x}, {y})")]
    SingularPoint { x: C64, y: C64 },
    #[error("step size collapsed below {min_step:e}")]
    StepCollapse { min_step: f64 },
    #[error("{0}: no locus component found")]
    NoComponentFound(&'static str),
    #[error("boundary traces do not close: {0}")]
    IncompleteTrace(String),
    #[error("gluing mismatch for {pair}: distance {distance:e}")]
    GluingMismatch { pair: String, distance: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
