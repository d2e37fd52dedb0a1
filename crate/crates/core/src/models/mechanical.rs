//! Constrained damped mechanical system
//! `M ẍ + D ẋ + K x + Bᵀλ = f`, `B ẋ = g`.
//!
//! State `z2 = [K x; M y]` with `y = ẋ`, `z3 = λ`, and
//!
//! ```text
//! J = [[0, K, 0], [−K, 0, −Bᵀ], [0, B, 0]],  R = diag(0, D, 0)
//! H = ½⟨x, K x⟩ + ½⟨y, M y⟩
//! ```
//!
//! The inputs are `(f, g)`: `f` enters the momentum rows, `−g` the
//! constraint rows, so the constraint row reads `0 = B y − g`.

use std::sync::Arc;

use super::{check_full_row_rank, check_psd, check_shape, check_spd, finish, ModelError};
use crate::hamiltonian::QuadraticHamiltonian;
use crate::numkit::Matrix;
use crate::system::{InputSignal, State, StatePartition, StructureMatrices, SystemSpec, ValidationReport};

#[derive(Debug, Clone)]
pub struct MechanicalParams {
    pub m: Matrix,
    pub d: Matrix,
    pub k: Matrix,
    /// Constraint matrix, `nc × nx`; zero rows for an unconstrained system.
    pub bc: Matrix,
    pub f: InputSignal,
    pub g: InputSignal,
}

impl Default for MechanicalParams {
    fn default() -> Self {
        Self {
            m: Matrix::from_diagonal(&[1.0, 2.0]),
            d: Matrix::identity(2).scale(0.1),
            k: Matrix::from_row_major(2, 2, vec![2.0, -1.0, -1.0, 2.0]),
            bc: Matrix::from_row_major(1, 2, vec![1.0, -1.0]),
            f: InputSignal::zero(2),
            g: InputSignal::zero(1),
        }
    }
}

impl MechanicalParams {
    pub fn nx(&self) -> usize {
        self.m.rows()
    }

    pub fn nc(&self) -> usize {
        self.bc.rows()
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let mut r = ValidationReport::default();
        let nx = self.nx();
        if nx == 0 {
            super::custom(&mut r, "no degrees of freedom".into());
        }
        check_spd(&mut r, "M", &self.m);
        check_spd(&mut r, "K", &self.k);
        check_psd(&mut r, "D", &self.d);
        check_shape(&mut r, "K", &self.k, nx, nx);
        check_shape(&mut r, "D", &self.d, nx, nx);
        if check_shape(&mut r, "Bc", &self.bc, self.bc.rows(), nx) && self.nc() > 0 {
            check_full_row_rank(&mut r, "Bc", &self.bc);
        }
        if self.f.m() != nx {
            super::custom(&mut r, format!("f has {} components, expected {nx}", self.f.m()));
        }
        if self.g.m() != self.nc() {
            super::custom(&mut r, format!("g has {} components, expected {}", self.g.m(), self.nc()));
        }
        finish(r)
    }

    /// State for position `x`, velocity `y` and multiplier `λ`.
    pub fn state(&self, x: &[f64], y: &[f64], lambda: &[f64]) -> State {
        let z2 = [self.k.mul_vec(x), self.m.mul_vec(y)].concat();
        State::from_blocks(&[], &z2, lambda).expect("nonempty")
    }

    /// Position and velocity recovered from a state.
    pub fn positions_velocities(&self, s: &State) -> (Vec<f64>, Vec<f64>) {
        let nx = self.nx();
        let z2 = &s.as_slice()[..2 * nx];
        let x = crate::numkit::lu_solve(&self.k, &z2[..nx]).expect("K is SPD");
        let y = crate::numkit::lu_solve(&self.m, &z2[nx..]).expect("M is SPD");
        (x, y)
    }
}

pub fn make_mechanical(p: &MechanicalParams) -> Result<SystemSpec, ModelError> {
    p.validate()?;
    let nx = p.nx();
    let nc = p.nc();
    let n = 2 * nx + nc;
    let mut j = Matrix::zeros(n, n);
    j.set_block(0, nx, &p.k);
    j.set_block(nx, 0, &p.k.scale(-1.0));
    j.set_block(nx, 2 * nx, &p.bc.transpose().scale(-1.0));
    j.set_block(2 * nx, nx, &p.bc);
    let mut r = Matrix::zeros(n, n);
    r.set_block(nx, nx, &p.d);
    let mut b = Matrix::zeros(n, nx + nc);
    b.set_block(nx, 0, &Matrix::identity(nx));
    b.set_block(2 * nx, nx, &Matrix::identity(nc).scale(-1.0));

    let k_inv = p.k.inverse().expect("K is SPD").symmetric_part();
    let m_inv = p.m.inverse().expect("M is SPD").symmetric_part();
    let h = QuadraticHamiltonian::new(Matrix::zeros(0, 0), Matrix::block_diag(&k_inv, &m_inv));
    Ok(SystemSpec::new(
        StatePartition::new(0, 2 * nx, nc)?,
        StructureMatrices::new(j, r, b),
        Arc::new(h),
        InputSignal::concat(&p.f, &p.g),
    )?)
}
