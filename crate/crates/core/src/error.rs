use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("aliasing: {samples} samples cannot resolve order {order} (need at least {required})")]
    Aliasing {
        samples: usize,
        order: usize,
        required: usize,
    },

    #[error("unknown hamiltonian `{0}`")]
    UnknownHamiltonian(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("trigonometric polynomial has no terms")]
    EmptySpec,

    #[error("generating function implicit solve did not contract (ratio {ratio:.3e} after {iterations} iterations)")]
    GeneratingContraction { ratio: f64, iterations: usize },

    #[error("fiber map iteration is not contracting: observed ratio {ratio:.3e} at n0 = {n0}; retry with n0 >= {suggested_n0}")]
    ContractionFailure {
        ratio: f64,
        n0: usize,
        suggested_n0: usize,
    },

    #[error("contraction certificate violated: measured q = {measured:.3e} exceeds bound {bound:.3e}")]
    ContractionCertificate { measured: f64, bound: f64 },

    #[error("fixed-point iteration cap {cap} exceeded (last update {last_update:.3e})")]
    IterationCap { cap: usize, last_update: f64 },

    #[error("integrator step size underflow at t = {t}")]
    StepUnderflow { t: f64 },

    #[error("integrator exceeded {max_steps} steps")]
    TooManySteps { max_steps: usize },

    #[error("degenerate critical point: eigenvalue {eigenvalue:.3e}")]
    Degenerate { eigenvalue: f64 },

    #[error("not Morse: degenerate critical point at ({:.6}, {:.6}) with eigenvalue {eigenvalue:.3e}", point[0], point[1])]
    NotMorse { point: [f64; 2], eigenvalue: f64 },

    #[error("not Morse-Smale / inconclusive: saddle {saddle} branch {branch}: {reason}")]
    Inconclusive {
        saddle: usize,
        branch: String,
        reason: String,
        trajectory: Vec<[f64; 2]>,
    },

    #[error("boundary operator does not square to zero over Z2")]
    BoundarySquare,

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
