//! Structure-preserving simulation of energy-based differential-algebraic
//! systems of the form
//!
//! ```text
//! [∂z1H; ż2; 0] = (J − R) [ż1; ∂z2H; z3] + B u,     y = Bᵀ [ż1; ∂z2H; z3]
//! ```
//!
//! with `J` skew-symmetric and `R` symmetric positive semidefinite.

pub mod diagnostics;
pub mod hamiltonian;
pub mod integrators;
pub mod models;
pub mod numkit;
pub mod system;
pub mod transforms;

pub use hamiltonian::{DiscreteGradientKind, Hamiltonian, QuadraticHamiltonian};
pub use integrators::{simulate, step, Scheme, SchemeConfig, StepAudit, Trajectory};
pub use numkit::Matrix;
pub use system::{InputSignal, State, StatePartition, StructureMatrices, SystemSpec};
