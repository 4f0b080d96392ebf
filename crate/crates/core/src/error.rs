use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid covariance: {0}")]
    InvalidCovariance(String),

    #[error("not a covariance: spectral density reaches {min:.3e} < -1e-9")]
    NotACovariance { min: f64 },

    #[error("invalid density: {0}")]
    InvalidDensity(String),

    #[error("degenerate functional: Gaussian variance is {variance:.3e}")]
    DegenerateFunctional { variance: f64 },

    #[error("degenerate density: psi(X) = {value:.3e} below 1e-12")]
    DegenerateDensity { value: f64 },

    #[error("degenerate grid: {0}")]
    DegenerateGrid(String),

    #[error("aliasing: grid size {grid} is below 2n+2 = {required}")]
    Aliasing { grid: usize, required: usize },

    #[error("non-finite field value at t = {t}")]
    Evaluation { t: f64 },

    #[error("resource limit: {0}")]
    Resource(String),

    #[error(
        "ill-conditioned Toeplitz matrix: min eigenvalue {min_eigenvalue:.3e}, \
         condition number {condition:.3e}, spectral floor kappa_G = {kappa:.3e}"
    )]
    Conditioning {
        min_eigenvalue: f64,
        condition: f64,
        kappa: f64,
    },

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
