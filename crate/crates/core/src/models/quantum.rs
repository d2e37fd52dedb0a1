//! Two-level quantum dot exchanging energy with a thermal reservoir through
//! an exponentially decaying memory kernel.
//!
//! The convolution with `K(s) = γ e^{−βs}` is replaced by an auxiliary
//! memory variable `m`. Variables are `z1 = (ρ1, ρ2)`, `z2 = (S, Q, m)` and
//! `z3 = λ` (multiplier for `ρ1 + ρ2 = 1`), with `k_B = 1` and
//!
//! ```text
//! H = E1 ρ1 + E2 ρ2 + T0 S ln S + ½ α Q² + ½ m²
//! ```
//!
//! Population transfer couples to entropy and heat with weight `1/T0` and to
//! the memory with weight `γ`; `R = diag(Γ, Γ, 0, R_m, β, 0)`. The single
//! input acts on the heat row and is zero for an isolated system.
//!
//! [`make_quantum_thermo`] returns the ε-regularized system whose last `z2`
//! entry is `ζ = ελ`; [`make_quantum_thermo_dae`] returns the constrained one.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{finish, ModelError};
use crate::hamiltonian::{DomainError, Hamiltonian};
use crate::numkit::Matrix;
use crate::system::{InputSignal, State, StatePartition, StructureMatrices, SystemSpec, ValidationReport};
use crate::transforms::{regularize, RegularizationConfig};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QuantumThermoParams {
    pub e1: f64,
    pub e2: f64,
    /// Population relaxation rate Γ.
    pub gamma: f64,
    /// Kernel amplitude γ; zero switches the memory off.
    pub gamma_k: f64,
    /// Kernel decay β.
    pub beta_k: f64,
    pub kb_t0: f64,
    pub alpha_heat: f64,
    pub r_m: f64,
    pub epsilon_reg: f64,
}

impl Default for QuantumThermoParams {
    fn default() -> Self {
        Self {
            e1: 1.0,
            e2: 2.0,
            gamma: 1.0,
            gamma_k: 0.2,
            beta_k: 1.0,
            kb_t0: 1.0,
            alpha_heat: 1.0,
            r_m: 1.0,
            epsilon_reg: 1e-3,
        }
    }
}

pub const RHO1: usize = 0;
pub const RHO2: usize = 1;
pub const ENTROPY: usize = 2;
pub const HEAT: usize = 3;
pub const MEMORY: usize = 4;
pub const MULTIPLIER: usize = 5;

impl QuantumThermoParams {
    pub fn validate(&self) -> Result<(), ModelError> {
        let mut r = ValidationReport::default();
        let positive = [
            ("E1", self.e1),
            ("E2", self.e2),
            ("Gamma", self.gamma),
            ("beta_k", self.beta_k),
            ("kB_T0", self.kb_t0),
            ("alpha_heat", self.alpha_heat),
            ("R_m", self.r_m),
            ("epsilon_reg", self.epsilon_reg),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                super::custom(&mut r, format!("{name} must be positive, got {v}"));
            }
        }
        if !(self.gamma_k >= 0.0 && self.gamma_k.is_finite()) {
            super::custom(&mut r, format!("gamma_k must be nonnegative, got {}", self.gamma_k));
        }
        finish(r)
    }

    /// Largest level energy, used in the rate estimate.
    pub fn e_max(&self) -> f64 {
        self.e1.max(self.e2)
    }

    /// Rate estimate `min(Γ/E_max, 1/(α T0))`.
    pub fn beta_formula(&self) -> f64 {
        (self.gamma / self.e_max()).min(1.0 / (self.alpha_heat * self.kb_t0))
    }

    pub fn energy(&self) -> QuantumEnergy {
        QuantumEnergy {
            e1: self.e1,
            e2: self.e2,
            t0: self.kb_t0,
            alpha: self.alpha_heat,
        }
    }

    /// Constrained-coordinates state `(ρ1, ρ2, S, Q, m, λ)`.
    pub fn dae_state(&self, rho: [f64; 2], s: f64, q: f64, m: f64, lambda: f64) -> State {
        State::from_blocks(&rho, &[s, q, m], &[lambda]).expect("nonempty")
    }

    /// `ρ = (0.3, 0.7)`, `S = 0.2`, `Q = m = λ = 0`.
    pub fn default_dae_state(&self) -> State {
        self.dae_state([0.3, 0.7], 0.2, 0.0, 0.0, 0.0)
    }

    /// [`Self::default_dae_state`] in regularized coordinates.
    pub fn default_state(&self) -> State {
        self.lift(&self.default_dae_state())
    }

    /// Default populations, entropy and heat with the multiplier
    /// `λ = (E1 + E2)/2` that keeps `ρ̇1 + ρ̇2 = 0`, in regularized coordinates.
    pub fn consistent_state(&self) -> State {
        self.lift(&self.dae_state([0.3, 0.7], 0.2, 0.0, 0.0, 0.5 * (self.e1 + self.e2)))
    }

    /// `(ρ, S, Q, m, λ)` to `(ρ, S, Q, m, ελ)`.
    pub fn lift(&self, dae: &State) -> State {
        let mut z2 = dae.z2().to_vec();
        z2.push(self.epsilon_reg * dae.z3()[0]);
        State::from_blocks(dae.z1(), &z2, &[]).expect("nonempty")
    }
}

/// `E1 ρ1 + E2 ρ2 + T0 S ln S + ½αQ² + ½m²` on `(ρ1, ρ2, S, Q, m)`.
#[derive(Debug, Clone, Copy)]
pub struct QuantumEnergy {
    pub e1: f64,
    pub e2: f64,
    pub t0: f64,
    pub alpha: f64,
}

fn s_ln_s(s: f64) -> f64 {
    if s == 0.0 {
        0.0
    } else {
        s * s.ln()
    }
}

impl Hamiltonian for QuantumEnergy {
    fn dim(&self) -> usize {
        5
    }

    fn energy(&self, z: &[f64]) -> f64 {
        self.e1 * z[0] + self.e2 * z[1] + self.t0 * s_ln_s(z[2]) + 0.5 * self.alpha * z[3] * z[3] + 0.5 * z[4] * z[4]
    }

    fn gradient(&self, z: &[f64]) -> Vec<f64> {
        vec![self.e1, self.e2, self.t0 * (z[2].ln() + 1.0), self.alpha * z[3], z[4]]
    }

    fn energy_difference(&self, from: &[f64], to: &[f64]) -> f64 {
        let d = |i: usize| to[i] - from[i];
        let (a, b) = (from[2], to[2]);
        // b ln b − a ln a = a ln(b/a) + (b − a) ln b
        let entropy = if a > 0.0 && b > 0.0 {
            a * (d(2) / a).ln_1p() + d(2) * b.ln()
        } else {
            s_ln_s(b) - s_ln_s(a)
        };
        self.e1 * d(0)
            + self.e2 * d(1)
            + self.t0 * entropy
            + 0.5 * self.alpha * d(3) * (to[3] + from[3])
            + 0.5 * d(4) * (to[4] + from[4])
    }

    fn hessian(&self, z: &[f64]) -> Option<Matrix> {
        Some(Matrix::from_diagonal(&[0.0, 0.0, self.t0 / z[2], self.alpha, 1.0]))
    }

    fn check_domain(&self, z: &[f64]) -> Result<(), DomainError> {
        if z[2] > 0.0 {
            Ok(())
        } else {
            Err(DomainError(format!("entropy S = {} must be positive", z[2])))
        }
    }
}

fn structure(p: &QuantumThermoParams) -> StructureMatrices {
    let a = 1.0 / p.kb_t0;
    let g = p.gamma_k;
    let mut j = Matrix::zeros(6, 6);
    let mut put = |r: usize, c: usize, v: f64| {
        j[(r, c)] = v;
        j[(c, r)] = -v;
    };
    put(RHO1, ENTROPY, -a);
    put(RHO2, ENTROPY, a);
    put(RHO1, HEAT, -a);
    put(RHO2, HEAT, a);
    put(RHO1, MEMORY, g);
    put(RHO2, MEMORY, -g);
    put(RHO1, MULTIPLIER, 1.0);
    put(RHO2, MULTIPLIER, 1.0);
    let r = Matrix::from_diagonal(&[p.gamma, p.gamma, 0.0, p.r_m, p.beta_k, 0.0]);
    let mut b = Matrix::zeros(6, 1);
    b[(HEAT, 0)] = 1.0;
    StructureMatrices::new(j, r, b)
}

/// Constrained system with partition `(2, 3, 1)`.
pub fn make_quantum_thermo_dae(p: &QuantumThermoParams, heat_input: InputSignal) -> Result<SystemSpec, ModelError> {
    p.validate()?;
    if heat_input.m() != 1 {
        let mut r = ValidationReport::default();
        super::custom(&mut r, format!("heat input has {} components, expected 1", heat_input.m()));
        return Err(ModelError::Invalid(r));
    }
    Ok(SystemSpec::new(
        StatePartition::new(2, 3, 1)?,
        structure(p),
        Arc::new(p.energy()),
        heat_input,
    )?)
}

/// ε-regularized isolated system with partition `(2, 4, 0)`.
pub fn make_quantum_thermo(p: &QuantumThermoParams) -> Result<SystemSpec, ModelError> {
    let dae = make_quantum_thermo_dae(p, InputSignal::zero(1))?;
    Ok(regularize(
        &dae,
        RegularizationConfig {
            epsilon: p.epsilon_reg,
        },
    )?)
}

/// `|ρ1 + ρ2 − 1|`.
pub fn probability_violation(s: &State) -> f64 {
    let z = s.as_slice();
    (z[RHO1] + z[RHO2] - 1.0).abs()
}

pub fn entropy(s: &State) -> f64 {
    s.as_slice()[ENTROPY]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamiltonian::{check_discrete_gradient_axioms, DiscreteGradientKind};
    use crate::integrators::{simulate, IntegratorError, Scheme, SchemeConfig};
    use crate::system::validate_structure;

    fn dg() -> SchemeConfig {
        SchemeConfig::new(Scheme::DiscreteGradient(DiscreteGradientKind::Gonzalez), 0.1)
    }

    #[test]
    fn default_structure_is_valid() {
        let spec = make_quantum_thermo(&QuantumThermoParams::default()).unwrap();
        assert!(validate_structure(&spec.structure).is_valid());
        assert_eq!(spec.partition, StatePartition::new(2, 4, 0).unwrap());
    }

    #[test]
    fn memory_off_keeps_m_zero() {
        let p = QuantumThermoParams {
            gamma_k: 0.0,
            ..Default::default()
        };
        let spec = make_quantum_thermo(&p).unwrap();
        let traj = simulate(&spec, &dg(), 0.0, 20.0, &p.default_state()).unwrap();
        for s in &traj.states {
            assert_eq!(s.as_slice()[MEMORY], 0.0);
            assert!(probability_violation(s) <= 10.0 * p.epsilon_reg);
        }
    }

    #[test]
    fn isolated_entropy_is_nondecreasing() {
        let p = QuantumThermoParams::default();
        let spec = make_quantum_thermo(&p).unwrap();
        let cfg = dg();
        let traj = simulate(&spec, &cfg, 0.0, 30.0, &p.default_state()).unwrap();
        for w in traj.states.windows(2) {
            assert!(entropy(&w[1]) - entropy(&w[0]) >= -10.0 * cfg.newton_tol);
        }
    }

    #[test]
    fn consistent_multiplier_is_stationary() {
        let p = QuantumThermoParams::default();
        let spec = make_quantum_thermo(&p).unwrap();
        let traj = simulate(&spec, &dg(), 0.0, 5.0, &p.consistent_state()).unwrap();
        for s in &traj.states {
            assert!(probability_violation(s) < 1e-12);
        }
    }

    #[test]
    fn nonpositive_entropy_is_a_domain_error() {
        let p = QuantumThermoParams::default();
        let spec = make_quantum_thermo_dae(&p, InputSignal::zero(1)).unwrap();
        let s0 = p.dae_state([0.3, 0.7], 0.0, 0.0, 0.0, 0.0);
        let e = simulate(&spec, &dg(), 0.0, 1.0, &s0).unwrap_err();
        assert!(matches!(e.error, IntegratorError::Domain { .. }));
    }

    #[test]
    fn energy_axioms_hold() {
        for kind in [DiscreteGradientKind::Gonzalez, DiscreteGradientKind::ItohAbe] {
            let r = check_discrete_gradient_axioms(&QuantumThermoParams::default().energy(), kind, 300, 9);
            assert!(r.passes(1e-10), "{r:?}");
        }
    }

    #[test]
    fn negative_rate_rejected() {
        let p = QuantumThermoParams {
            gamma: -1.0,
            ..Default::default()
        };
        assert!(make_quantum_thermo(&p).is_err());
    }
}
