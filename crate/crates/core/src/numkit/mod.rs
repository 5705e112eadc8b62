//! Dense complex linear algebra used throughout the crate.
//!
//! Operators are plain `nalgebra` matrices over `Complex64`. The helpers here
//! add validation, Hermitian forms and the handful of matrix functions that the
//! certification code needs.

mod io;
mod linalg;

pub use io::{format_float, format_matrix, format_sig17, parse_matrix, read_matrix, write_matrix};
pub use linalg::*;

use nalgebra::DMatrix;
use num_complex::Complex64;
use thiserror::Error;

pub type Operator = DMatrix<Complex64>;

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn real(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

/// Build an operator from real row-major entries.
pub fn from_real_rows(rows: usize, cols: usize, data: &[f64]) -> Operator {
    assert_eq!(data.len(), rows * cols, "data length must equal rows*cols");
    Operator::from_fn(rows, cols, |i, j| real(data[i * cols + j]))
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NumError {
    #[error("operator must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("operator is empty")]
    Empty,
    #[error("operator has non-finite entries")]
    NonFinite,
    #[error("matrix is not Hermitian (deviation {deviation:e})")]
    NotHermitian { deviation: f64 },
    #[error("matrix is not positive definite (min eigenvalue {min_eig:e})")]
    NotPositiveDefinite { min_eig: f64 },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("operator is not stable (spectral abscissa {abscissa:e})")]
    Unstable { abscissa: f64 },
    #[error("Lyapunov pencil is singular (eigenvalue sum {gap:e})")]
    SingularPencil { gap: f64 },
    #[error("matrix is singular")]
    Singular,
    #[error("eigenvalue iteration did not converge")]
    NoConvergence,
    #[error("parse error on line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("io error: {0}")]
    Io(String),
    #[error("invalid tolerance: {0}")]
    InvalidTolerance(String),
}

/// Tolerances shared by every numerical routine.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct TolerancePolicy {
    pub tol_herm: f64,
    pub tol_psd: f64,
    pub tol_rel: f64,
    pub max_iter: usize,
    pub kappa_max: f64,
}

impl Default for TolerancePolicy {
    fn default() -> Self {
        TolerancePolicy {
            tol_herm: 1e-10,
            tol_psd: 1e-9,
            tol_rel: 1e-8,
            max_iter: 400,
            kappa_max: 1e8,
        }
    }
}

impl TolerancePolicy {
    pub fn validate(&self) -> Result<(), NumError> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(NumError::InvalidTolerance(format!(
                    "{name} must be positive and finite, got {v}"
                )))
            }
        };
        positive("tol_herm", self.tol_herm)?;
        positive("tol_psd", self.tol_psd)?;
        positive("tol_rel", self.tol_rel)?;
        if self.kappa_max.is_nan() || self.kappa_max < 1.0 {
            return Err(NumError::InvalidTolerance(format!(
                "kappa_max must be at least 1, got {}",
                self.kappa_max
            )));
        }
        if self.max_iter == 0 {
            return Err(NumError::InvalidTolerance(
                "max_iter must be at least 1".into(),
            ));
        }
        Ok(())
    }

    pub fn with_kappa_max(mut self, kappa_max: f64) -> Self {
        self.kappa_max = kappa_max;
        self
    }
}

/// A Hermitian matrix, symmetrized on construction.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianForm(Operator);

impl HermitianForm {
    /// Accepts `m` if `‖m − m*‖_F ≤ tol·max(1, ‖m‖_F)` and stores its Hermitian part.
    pub fn new(m: Operator, tol: f64) -> Result<Self, NumError> {
        check_square(&m)?;
        let dev = (&m - m.adjoint()).norm();
        if !dev.is_finite() {
            return Err(NumError::NonFinite);
        }
        if dev > tol * m.norm().max(1.0) {
            return Err(NumError::NotHermitian { deviation: dev });
        }
        Ok(HermitianForm(hermitian_part(&m)))
    }

    pub fn from_hermitian_part(m: &Operator) -> Self {
        HermitianForm(hermitian_part(m))
    }

    pub fn identity(n: usize) -> Self {
        HermitianForm(Operator::identity(n, n))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &Operator {
        &self.0
    }

    pub fn into_matrix(self) -> Operator {
        self.0
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        hermitian_eigenvalues(&self.0)
    }

    pub fn min_eig(&self) -> f64 {
        min_eig(&self.0)
    }

    pub fn max_eig(&self) -> f64 {
        max_eig(&self.0)
    }

    /// `λmax/λmin`, or an error when the form is not positive definite.
    pub fn cond(&self) -> Result<f64, NumError> {
        cond_pd(&self.0)
    }

    /// Rescale so that the smallest eigenvalue is one.
    pub fn normalized(&self) -> Result<Self, NumError> {
        let lo = self.min_eig();
        if !(lo > 0.0) {
            return Err(NumError::NotPositiveDefinite { min_eig: lo });
        }
        Ok(HermitianForm(self.0.map(|z| z / lo)))
    }

    /// Quadratic form `x* P x`.
    pub fn quad(&self, x: &nalgebra::DVector<Complex64>) -> f64 {
        (x.adjoint() * &self.0 * x)[(0, 0)].re
    }
}

pub(crate) fn check_square(m: &Operator) -> Result<usize, NumError> {
    if m.nrows() != m.ncols() {
        return Err(NumError::NotSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    if m.nrows() == 0 {
        return Err(NumError::Empty);
    }
    if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(NumError::NonFinite);
    }
    Ok(m.nrows())
}
