//! Constructors for the built-in example systems.

use thiserror::Error;

use crate::numkit::{asymmetry, min_symmetric_eigenvalue, rank, Matrix};
use crate::system::{SystemError, ValidationReport, Violation};
use crate::transforms::TransformError;

pub mod cahn_hilliard;
pub mod circuit;
pub mod mechanical;
pub mod poroelastic;
pub mod quantum;
pub mod simple;

pub use cahn_hilliard::{make_cahn_hilliard_1d, CahnHilliard1DParams};
pub use circuit::{make_circuit, CircuitParams};
pub use mechanical::{make_mechanical, MechanicalParams};
pub use poroelastic::{make_poroelastic, PoroelasticParams};
pub use quantum::{make_quantum_thermo, QuantumThermoParams};
pub use simple::{harmonic_oscillator, pendulum};

/// Names accepted by scenario files.
pub const MODEL_NAMES: [&str; 5] = ["poroelastic", "circuit", "mechanical", "cahn_hilliard_1d", "quantum_thermo"];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("invalid model parameters:\n{0}")]
    Invalid(ValidationReport),
    #[error(transparent)]
    System(SystemError),
    #[error(transparent)]
    Transform(TransformError),
}

impl ModelError {
    /// The violation list, when the failure is a validation failure.
    pub fn report(&self) -> Option<&ValidationReport> {
        match self {
            ModelError::Invalid(r) | ModelError::System(SystemError::Invalid(r)) => Some(r),
            ModelError::Transform(TransformError::System(SystemError::Invalid(r))) => Some(r),
            _ => None,
        }
    }
}

impl From<SystemError> for ModelError {
    fn from(e: SystemError) -> Self {
        match e {
            SystemError::Invalid(r) => ModelError::Invalid(r),
            other => ModelError::System(other),
        }
    }
}

impl From<TransformError> for ModelError {
    fn from(e: TransformError) -> Self {
        match e {
            TransformError::System(s) => s.into(),
            other => ModelError::Transform(other),
        }
    }
}

fn custom(report: &mut ValidationReport, detail: String) {
    report.push(Violation::Custom { detail });
}

fn check_shape(report: &mut ValidationReport, name: &str, m: &Matrix, rows: usize, cols: usize) -> bool {
    if m.rows() != rows || m.cols() != cols {
        custom(
            report,
            format!("{name} is {}x{}, expected {rows}x{cols}", m.rows(), m.cols()),
        );
        return false;
    }
    if !m.is_finite() {
        custom(report, format!("{name} has non-finite entries"));
        return false;
    }
    true
}

fn check_symmetric(report: &mut ValidationReport, name: &str, m: &Matrix) -> bool {
    if !m.is_square() {
        custom(report, format!("{name} is not square"));
        return false;
    }
    let a = asymmetry(m);
    if a > 1e-12 {
        custom(report, format!("{name} not symmetric, asymmetry {a:.3e}"));
        return false;
    }
    true
}

fn min_eig(m: &Matrix) -> f64 {
    if m.rows() == 0 {
        return f64::INFINITY;
    }
    min_symmetric_eigenvalue(&m.symmetric_part()).expect("symmetric part")
}

fn check_spd(report: &mut ValidationReport, name: &str, m: &Matrix) {
    if check_symmetric(report, name, m) {
        let e = min_eig(m);
        if e <= 0.0 {
            custom(report, format!("{name} not positive definite, min eig {e}"));
        }
    }
}

fn check_psd(report: &mut ValidationReport, name: &str, m: &Matrix) {
    if check_symmetric(report, name, m) {
        let e = min_eig(m);
        if e < -1e-10 {
            custom(report, format!("{name} not PSD, min eig {e}"));
        }
    }
}

fn check_full_row_rank(report: &mut ValidationReport, name: &str, m: &Matrix) {
    let r = rank(m, 1e-12);
    if r < m.rows() {
        custom(report, format!("{name} has rank {r}, needs full row rank {}", m.rows()));
    }
}

fn finish(report: ValidationReport) -> Result<(), ModelError> {
    if report.is_valid() {
        Ok(())
    } else {
        Err(ModelError::Invalid(report))
    }
}
