use thiserror::Error;

/// Errors for state construction, linear algebra and solver setup.
///
/// Messages name the violated invariant so CLI diagnostics can surface
/// them directly.
#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not square: {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("not Hermitian (max |m[i][j] - conj(m[j][i])| = {max_asymmetry:.3e} exceeds {tol:.1e})")]
    NotHermitian { max_asymmetry: f64, tol: f64 },

    #[error("not positive semi-definite (min eigenvalue {min_eigenvalue:.3e})")]
    NotPsd { min_eigenvalue: f64 },

    #[error("trace is not 1 (got {trace:.12})")]
    InvalidTrace { trace: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("bipartite dims {nx}x{ny} do not match matrix dim {dim}")]
    BadBipartiteDims { nx: usize, ny: usize, dim: usize },

    #[error("shape mismatch between the two arguments")]
    ShapeMismatch,

    #[error("distribution has a negative entry ({value:.3e})")]
    NegativeEntry { value: f64 },

    #[error("distribution does not sum to 1 (sum = {sum:.15})")]
    NotNormalized { sum: f64 },

    #[error("vector is not normalized (2-norm = {norm:.15})")]
    NotUnitNorm { norm: f64 },

    #[error("{name} = {value} out of range [{lo}, {hi}]")]
    OutOfRange {
        name: &'static str,
        value: f64,
        lo: f64,
        hi: f64,
    },

    #[error("ensemble size {nalpha} is below the state rank {rank}")]
    EnsembleTooSmall { nalpha: usize, rank: usize },

    #[error("right-unitary shape requires nalpha >= d (got nalpha = {nalpha}, d = {d})")]
    BadRightUnitaryShape { nalpha: usize, d: usize },

    #[error("ensemble invariant violated: {0}")]
    InvalidEnsemble(String),

    #[error("invalid solver config: {0}")]
    InvalidConfig(String),

    #[error("problem size {size} exceeds the brute-force cap {cap}")]
    OracleSizeCap { size: usize, cap: usize },

    #[error("oracle budget {budget} is below the minimum {min}")]
    OracleBudgetTooSmall { budget: usize, min: usize },

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
