//! Two-variable test systems: harmonic oscillator and pendulum.

use std::sync::Arc;

use crate::hamiltonian::{Pendulum, QuadraticHamiltonian};
use crate::numkit::Matrix;
use crate::system::{InputSignal, State, StatePartition, StructureMatrices, SystemSpec};

fn canonical_j() -> Matrix {
    Matrix::from_row_major(2, 2, vec![0.0, 1.0, -1.0, 0.0])
}

/// `ż2 = (J − r I) z2`, `H = ½‖z2‖²`, no ports.
pub fn harmonic_oscillator(damping: f64) -> SystemSpec {
    assert!(damping >= 0.0, "damping must be nonnegative");
    SystemSpec::new(
        StatePartition::new(0, 2, 0).expect("nonempty"),
        StructureMatrices::new(canonical_j(), Matrix::identity(2).scale(damping), Matrix::zeros(2, 0)),
        Arc::new(QuadraticHamiltonian::identity(0, 2)),
        InputSignal::zero(0),
    )
    .expect("oscillator structure is valid")
}

/// Undamped oscillator flow: rotation of `z0` by angle `t`.
pub fn oscillator_exact(z0: [f64; 2], t: f64) -> [f64; 2] {
    let (s, c) = t.sin_cos();
    [c * z0[0] + s * z0[1], -s * z0[0] + c * z0[1]]
}

/// `H(q, p) = p²/2 + (1 − cos q)` with canonical `J` and no damping.
pub fn pendulum() -> SystemSpec {
    SystemSpec::new(
        StatePartition::new(0, 2, 0).expect("nonempty"),
        StructureMatrices::new(canonical_j(), Matrix::zeros(2, 2), Matrix::zeros(2, 0)),
        Arc::new(Pendulum),
        InputSignal::zero(0),
    )
    .expect("pendulum structure is valid")
}

pub fn planar_state(a: f64, b: f64) -> State {
    State::from_blocks(&[], &[a, b], &[]).expect("nonempty")
}
