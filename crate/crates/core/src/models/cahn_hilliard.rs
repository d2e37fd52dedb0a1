//! Periodic one-dimensional Cahn–Hilliard equation on a uniform grid.
//!
//! With spacing `h = L/N`, `Δ_h` the periodic three-point Laplacian and
//! `K_h = −Δ_h / h`:
//!
//! ```text
//! H(u) = h Σ [ ε/2 ((u_{i+1} − u_i)/h)² + W(u_i)/ε ],   W(u) = ¼(u² − 1)²
//! J = [[0, I], [−I, 0]],  R = diag(0, σ K_h)
//! ```
//!
//! The concentration `u` is the differential variable `z1` and the scaled
//! chemical potential `w = ∂H/∂u` is the algebraic variable `z3`, so the
//! dynamics read `u̇ = −σ K_h w`. Because `K_h` annihilates constants, the
//! discrete mass `Σ u_i` is conserved.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{finish, ModelError};
use crate::hamiltonian::Hamiltonian;
use crate::numkit::Matrix;
use crate::system::{InputSignal, State, StatePartition, StructureMatrices, SystemSpec, ValidationReport};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Potential {
    DoubleWell,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CahnHilliard1DParams {
    pub n: usize,
    pub length: f64,
    pub eps_interface: f64,
    pub sigma: f64,
    pub potential: Potential,
}

impl Default for CahnHilliard1DParams {
    fn default() -> Self {
        Self {
            n: 64,
            length: 2.0 * std::f64::consts::PI,
            eps_interface: 0.6,
            sigma: 1.0,
            potential: Potential::DoubleWell,
        }
    }
}

impl CahnHilliard1DParams {
    pub fn h(&self) -> f64 {
        self.length / self.n as f64
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let mut r = ValidationReport::default();
        if self.n < 4 {
            super::custom(&mut r, format!("grid size {} below 4", self.n));
        }
        for (name, v) in [("length", self.length), ("eps_interface", self.eps_interface), ("sigma", self.sigma)] {
            if !(v > 0.0 && v.is_finite()) {
                super::custom(&mut r, format!("{name} must be positive, got {v}"));
            }
        }
        finish(r)
    }

    /// Uniform random concentration in `[−amplitude, amplitude]` with the
    /// matching chemical potential.
    pub fn random_state(&self, amplitude: f64, seed: u64) -> State {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u: Vec<f64> = (0..self.n).map(|_| rng.random_range(-amplitude..=amplitude)).collect();
        self.state(&u)
    }

    /// Random combination of the Fourier modes `1..=modes`, rescaled to
    /// max-norm `amplitude`, with the matching chemical potential.
    pub fn random_smooth_state(&self, amplitude: f64, modes: usize, seed: u64) -> State {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let coeffs: Vec<(f64, f64)> = (0..modes)
            .map(|_| (rng.random_range(-1.0..=1.0), rng.random_range(-1.0..=1.0)))
            .collect();
        let two_pi = 2.0 * std::f64::consts::PI;
        let mut u: Vec<f64> = (0..self.n)
            .map(|i| {
                let x = two_pi * i as f64 / self.n as f64;
                coeffs
                    .iter()
                    .enumerate()
                    .map(|(k, (a, b))| {
                        let kx = (k + 1) as f64 * x;
                        a * kx.cos() + b * kx.sin()
                    })
                    .sum()
            })
            .collect();
        let max = u.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        if max > 0.0 {
            u.iter_mut().for_each(|v| *v *= amplitude / max);
        }
        self.state(&u)
    }

    /// State with concentration `u` and `w = ∂H/∂u`.
    pub fn state(&self, u: &[f64]) -> State {
        assert_eq!(u.len(), self.n);
        let w = self.energy().gradient(u);
        State::from_blocks(u, &[], &w).expect("nonempty")
    }

    pub fn energy(&self) -> CahnHilliardEnergy {
        CahnHilliardEnergy {
            n: self.n,
            h: self.h(),
            eps: self.eps_interface,
        }
    }
}

fn w(u: f64) -> f64 {
    let s = u * u - 1.0;
    0.25 * s * s
}

fn dw(u: f64) -> f64 {
    u * (u * u - 1.0)
}

/// Discrete Ginzburg–Landau energy with periodic forward differences.
#[derive(Debug, Clone, Copy)]
pub struct CahnHilliardEnergy {
    pub n: usize,
    pub h: f64,
    pub eps: f64,
}

impl CahnHilliardEnergy {
    fn next(&self, i: usize) -> usize {
        (i + 1) % self.n
    }

    fn prev(&self, i: usize) -> usize {
        (i + self.n - 1) % self.n
    }
}

impl Hamiltonian for CahnHilliardEnergy {
    fn dim(&self) -> usize {
        self.n
    }

    fn energy(&self, u: &[f64]) -> f64 {
        let h = self.h;
        (0..self.n)
            .map(|i| {
                let d = (u[self.next(i)] - u[i]) / h;
                h * (0.5 * self.eps * d * d + w(u[i]) / self.eps)
            })
            .sum()
    }

    fn gradient(&self, u: &[f64]) -> Vec<f64> {
        let h = self.h;
        (0..self.n)
            .map(|i| {
                let lap = (2.0 * u[i] - u[self.prev(i)] - u[self.next(i)]) / (h * h);
                h * (self.eps * lap + dw(u[i]) / self.eps)
            })
            .collect()
    }

    fn energy_difference(&self, from: &[f64], to: &[f64]) -> f64 {
        let h = self.h;
        (0..self.n)
            .map(|i| {
                let j = self.next(i);
                let (a, b) = (from[i], to[i]);
                let dd = ((to[j] - to[i]) - (from[j] - from[i])) / h;
                let ds = ((to[j] - to[i]) + (from[j] - from[i])) / h;
                let dw = 0.25 * (b - a) * (b + a) * (a * a + b * b - 2.0);
                h * (0.5 * self.eps * dd * ds + dw / self.eps)
            })
            .sum()
    }

    fn hessian(&self, u: &[f64]) -> Option<Matrix> {
        let h = self.h;
        let mut m = Matrix::zeros(self.n, self.n);
        let c = self.eps / h;
        for i in 0..self.n {
            m[(i, i)] += 2.0 * c + h * (3.0 * u[i] * u[i] - 1.0) / self.eps;
            m[(i, self.next(i))] -= c;
            m[(i, self.prev(i))] -= c;
        }
        Some(m)
    }
}

/// `K_h = −Δ_h / h` with periodic wrap-around.
pub fn stiffness(n: usize, h: f64) -> Matrix {
    let mut k = Matrix::zeros(n, n);
    let c = 1.0 / (h * h * h);
    for i in 0..n {
        k[(i, i)] += 2.0 * c;
        k[(i, (i + 1) % n)] -= c;
        k[(i, (i + n - 1) % n)] -= c;
    }
    k
}

pub fn make_cahn_hilliard_1d(p: &CahnHilliard1DParams) -> Result<SystemSpec, ModelError> {
    p.validate()?;
    let n = p.n;
    let mut j = Matrix::zeros(2 * n, 2 * n);
    j.set_block(0, n, &Matrix::identity(n));
    j.set_block(n, 0, &Matrix::identity(n).scale(-1.0));
    let mut r = Matrix::zeros(2 * n, 2 * n);
    r.set_block(n, n, &stiffness(n, p.h()).scale(p.sigma));
    Ok(SystemSpec::new(
        StatePartition::new(n, 0, n)?,
        StructureMatrices::new(j, r, Matrix::zeros(2 * n, 0)),
        Arc::new(p.energy()),
        InputSignal::zero(0),
    )?)
}

/// `Σ u_i`.
pub fn mass(s: &State) -> f64 {
    s.z1().iter().sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamiltonian::{check_discrete_gradient_axioms, DiscreteGradientKind};
    use crate::integrators::{simulate, Scheme, SchemeConfig};
    use crate::numkit::fd_jacobian;

    #[test]
    fn pure_phase_is_an_equilibrium() {
        let p = CahnHilliard1DParams {
            n: 16,
            ..Default::default()
        };
        let spec = make_cahn_hilliard_1d(&p).unwrap();
        let s0 = p.state(&vec![1.0; 16]);
        let cfg = SchemeConfig::new(Scheme::DiscreteGradient(DiscreteGradientKind::Gonzalez), 0.1);
        let traj = simulate(&spec, &cfg, 0.0, 2.0, &s0).unwrap();
        for s in &traj.states {
            for (a, b) in s.as_slice().iter().zip(s0.as_slice()) {
                assert!((a - b).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn gradient_and_hessian_match_differences() {
        let p = CahnHilliard1DParams {
            n: 8,
            ..Default::default()
        };
        let e = p.energy();
        let u: Vec<f64> = (0..8).map(|i| (i as f64 * 0.7).sin()).collect();
        let g = e.gradient(&u);
        for i in 0..8 {
            let mut up = u.clone();
            let mut um = u.clone();
            up[i] += 1e-6;
            um[i] -= 1e-6;
            let fd = (e.energy(&up) - e.energy(&um)) / 2e-6;
            assert!((fd - g[i]).abs() < 1e-6 * (1.0 + g[i].abs()));
        }
        let hess = e.hessian(&u).unwrap();
        let fd = fd_jacobian(&|x| e.gradient(x), &u, &g);
        assert!(hess.sub(&fd).max_abs() < 1e-5);
    }

    #[test]
    fn energy_axioms_both_kinds() {
        let p = CahnHilliard1DParams {
            n: 12,
            ..Default::default()
        };
        for kind in [DiscreteGradientKind::Gonzalez, DiscreteGradientKind::ItohAbe] {
            let r = check_discrete_gradient_axioms(&p.energy(), kind, 300, 5);
            assert!(r.passes(1e-10), "{r:?}");
        }
    }

    #[test]
    fn random_data_keeps_mass_and_dissipates() {
        let p = CahnHilliard1DParams::default();
        let spec = make_cahn_hilliard_1d(&p).unwrap();
        let s0 = p.random_state(0.1, 3);
        assert!(s0.z1().iter().all(|u| u.abs() <= 0.1));
        let cfg = SchemeConfig::new(Scheme::DiscreteGradient(DiscreteGradientKind::Gonzalez), 0.1);
        let traj = simulate(&spec, &cfg, 0.0, 50.0, &s0).unwrap();
        assert_eq!(traj.steps(), 500);
        let m0 = mass(&s0);
        for (w, s) in traj.energies.windows(2).zip(&traj.states) {
            assert!(w[1] <= w[0] + 1e-9);
            assert!((mass(s) - m0).abs() <= 1e-10);
        }
    }

    #[test]
    fn smooth_state_is_bounded_by_amplitude() {
        let p = CahnHilliard1DParams::default();
        let s = p.random_smooth_state(0.1, 3, 1);
        let max = s.z1().iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        assert!((max - 0.1).abs() < 1e-15);
    }

    #[test]
    fn stiffness_annihilates_constants() {
        let k = stiffness(10, 0.1);
        assert!(k.mul_vec(&[1.0; 10]).iter().all(|v| v.abs() < 1e-9));
    }

    #[test]
    fn invalid_grid_rejected() {
        let p = CahnHilliard1DParams {
            n: 3,
            ..Default::default()
        };
        assert!(make_cahn_hilliard_1d(&p).is_err());
    }
}
