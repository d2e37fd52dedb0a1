//! Linear poroelasticity: displacement `u` and pressure `p` with
//! `z1 = u`, `z2 = C p`.
//!
//! ```text
//! J = [[0, Dᵀ], [−D, 0]],  R = diag(0, B_flow),  B = I,  u_in = (f, g)
//! H = ½⟨u, A u⟩ + ½⟨z2, C⁻¹ z2⟩
//! ```
//!
//! The first block row is the quasi-static balance `A u = Dᵀ p + f`; start
//! from [`consistent_state`].

use std::sync::Arc;

use super::{check_shape, check_spd, finish, ModelError};
use crate::hamiltonian::QuadraticHamiltonian;
use crate::numkit::{lu_solve, Matrix};
use crate::system::{InputSignal, State, StatePartition, StructureMatrices, SystemSpec, ValidationReport};

#[derive(Debug, Clone)]
pub struct PoroelasticParams {
    /// Stiffness, SPD, `nu × nu`.
    pub a: Matrix,
    /// Compressibility, SPD, `np × np`.
    pub c: Matrix,
    /// Coupling, `np × nu`.
    pub d: Matrix,
    /// Permeability, SPD, `np × np`.
    pub b_flow: Matrix,
    pub f: InputSignal,
    pub g: InputSignal,
}

impl Default for PoroelasticParams {
    fn default() -> Self {
        Self {
            a: Matrix::identity(2),
            c: Matrix::identity(2),
            d: Matrix::identity(2),
            b_flow: Matrix::identity(2),
            f: InputSignal::zero(2),
            g: InputSignal::zero(2),
        }
    }
}

impl PoroelasticParams {
    pub fn validate(&self) -> Result<(), ModelError> {
        let mut r = ValidationReport::default();
        let nu = self.a.rows();
        let np = self.c.rows();
        check_spd(&mut r, "A", &self.a);
        check_spd(&mut r, "C", &self.c);
        check_spd(&mut r, "B_flow", &self.b_flow);
        check_shape(&mut r, "B_flow", &self.b_flow, np, np);
        check_shape(&mut r, "D", &self.d, np, nu);
        if self.f.m() != nu {
            super::custom(&mut r, format!("f has {} components, expected {nu}", self.f.m()));
        }
        if self.g.m() != np {
            super::custom(&mut r, format!("g has {} components, expected {np}", self.g.m()));
        }
        if nu + np == 0 {
            super::custom(&mut r, "empty system".into());
        }
        finish(r)
    }
}

pub fn make_poroelastic(p: &PoroelasticParams) -> Result<SystemSpec, ModelError> {
    p.validate()?;
    let nu = p.a.rows();
    let np = p.c.rows();
    let n = nu + np;
    let mut j = Matrix::zeros(n, n);
    j.set_block(0, nu, &p.d.transpose());
    j.set_block(nu, 0, &p.d.scale(-1.0));
    let mut r = Matrix::zeros(n, n);
    r.set_block(nu, nu, &p.b_flow);
    let c_inv = p.c.inverse().map_err(|e| {
        let mut rep = ValidationReport::default();
        super::custom(&mut rep, format!("C not invertible: {e}"));
        ModelError::Invalid(rep)
    })?;
    let h = QuadraticHamiltonian::new(p.a.clone(), c_inv.symmetric_part());
    Ok(SystemSpec::new(
        StatePartition::new(nu, np, 0)?,
        StructureMatrices::new(j, r, Matrix::identity(n)),
        Arc::new(h),
        InputSignal::concat(&p.f, &p.g),
    )?)
}

/// State with pressure `p0` and the displacement solving `A u = Dᵀ p0 + f(t0)`.
pub fn consistent_state(p: &PoroelasticParams, p0: &[f64], t0: f64) -> Result<State, ModelError> {
    let rhs: Vec<f64> = p
        .d
        .tr_mul_vec(p0)
        .iter()
        .zip(p.f.eval(t0))
        .map(|(a, b)| a + b)
        .collect();
    let u0 = lu_solve(&p.a, &rhs).map_err(|e| {
        let mut rep = ValidationReport::default();
        super::custom(&mut rep, format!("A not invertible: {e}"));
        ModelError::Invalid(rep)
    })?;
    Ok(State::from_blocks(&u0, &p.c.mul_vec(p0), &[])?)
}

/// Fully coupled two-by-two configuration with distinct relaxation rates.
pub fn coupled_example() -> PoroelasticParams {
    PoroelasticParams {
        a: Matrix::from_row_major(2, 2, vec![2.0, 0.5, 0.5, 1.0]),
        c: Matrix::from_diagonal(&[1.0, 0.5]),
        d: Matrix::from_row_major(2, 2, vec![1.0, 0.3, 0.0, 1.0]),
        b_flow: Matrix::from_row_major(2, 2, vec![1.0, 0.2, 0.2, 0.5]),
        f: InputSignal::zero(2),
        g: InputSignal::zero(2),
    }
}
