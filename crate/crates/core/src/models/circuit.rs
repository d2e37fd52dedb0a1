//! Lumped circuits in node-potential form.
//!
//! State `z1 = q_C` (capacitor charges), `z2 = ψ_L` (inductor fluxes),
//! `z3 = [i_S; φ]` (source currents, node potentials):
//!
//! ```text
//! J = [[0, 0, 0, A_Cᵀ], [0, 0, 0, A_Lᵀ], [0, 0, 0, A_Sᵀ], [−A_C, −A_L, −A_S, 0]]
//! ```
//!
//! Resistors with conductance `G(v) = g1 v + g3 v³` contribute
//! `A_R diag(g1) A_Rᵀ` to the `φφ` block of `R` and the monotone term
//! `A_R g3 (A_Rᵀφ)³` as a nonlinear dissipation. Voltage sources enter the
//! `i_S` rows with `−I`, so the output is `y = −i_S`.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{finish, ModelError};
use crate::hamiltonian::Hamiltonian;
use crate::numkit::Matrix;
use crate::system::{
    InputSignal, NonlinearDissipation, State, StatePartition, StructureMatrices, SystemSpec, ValidationReport,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case")]
pub enum CapacitorLaw {
    /// `q²/(2C)`
    Linear { capacitance: f64 },
    /// `q⁴/4 + q²/2`
    Quartic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Conductance {
    pub g1: f64,
    pub g3: f64,
}

impl Conductance {
    pub fn linear(g: f64) -> Self {
        Self { g1: g, g3: 0.0 }
    }

    pub fn current(&self, v: f64) -> f64 {
        self.g1 * v + self.g3 * v * v * v
    }
}

#[derive(Debug, Clone)]
pub struct CircuitParams {
    pub a_c: Matrix,
    pub a_r: Matrix,
    pub a_l: Matrix,
    pub a_s: Matrix,
    pub capacitors: Vec<CapacitorLaw>,
    pub inductances: Vec<f64>,
    pub resistors: Vec<Conductance>,
    /// Source voltages, one per column of `A_S`.
    pub source: InputSignal,
}

impl Default for CircuitParams {
    /// Source at node 1, cubic resistor between nodes 1 and 2, quartic
    /// capacitor and unit inductor from node 2 to ground. Source switched off.
    fn default() -> Self {
        Self {
            a_c: Matrix::from_row_major(2, 1, vec![0.0, 1.0]),
            a_r: Matrix::from_row_major(2, 1, vec![1.0, -1.0]),
            a_l: Matrix::from_row_major(2, 1, vec![0.0, 1.0]),
            a_s: Matrix::from_row_major(2, 1, vec![1.0, 0.0]),
            capacitors: vec![CapacitorLaw::Quartic],
            inductances: vec![1.0],
            resistors: vec![Conductance { g1: 1.0, g3: 0.5 }],
            source: InputSignal::zero(1),
        }
    }
}

impl CircuitParams {
    /// Capacitor and inductor in parallel on a single node.
    pub fn lc_loop(capacitance: f64, inductance: f64) -> Self {
        Self {
            a_c: Matrix::from_row_major(1, 1, vec![1.0]),
            a_r: Matrix::zeros(1, 0),
            a_l: Matrix::from_row_major(1, 1, vec![1.0]),
            a_s: Matrix::zeros(1, 0),
            capacitors: vec![CapacitorLaw::Linear { capacitance }],
            inductances: vec![inductance],
            resistors: vec![],
            source: InputSignal::zero(0),
        }
    }

    /// Capacitor discharging through a linear resistor.
    pub fn rc(capacitance: f64, conductance: f64) -> Self {
        Self {
            a_c: Matrix::from_row_major(1, 1, vec![1.0]),
            a_r: Matrix::from_row_major(1, 1, vec![1.0]),
            a_l: Matrix::zeros(1, 0),
            a_s: Matrix::zeros(1, 0),
            capacitors: vec![CapacitorLaw::Linear { capacitance }],
            inductances: vec![],
            resistors: vec![Conductance::linear(conductance)],
            source: InputSignal::zero(0),
        }
    }

    pub fn nodes(&self) -> usize {
        self.a_c.rows()
    }

    pub fn partition(&self) -> StatePartition {
        StatePartition::new(self.a_c.cols(), self.a_l.cols(), self.a_s.cols() + self.nodes()).expect("nonempty circuit")
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let mut r = ValidationReport::default();
        let nn = self.nodes();
        if nn == 0 {
            super::custom(&mut r, "circuit has no nodes".into());
        }
        for (name, a) in [("A_C", &self.a_c), ("A_R", &self.a_r), ("A_L", &self.a_l), ("A_S", &self.a_s)] {
            if a.rows() != nn {
                super::custom(&mut r, format!("{name} has {} rows, expected {nn}", a.rows()));
                continue;
            }
            for c in 0..a.cols() {
                let col = a.column(c);
                if col.iter().any(|&v| v != 0.0 && v != 1.0 && v != -1.0) {
                    super::custom(&mut r, format!("{name} column {c} has entries outside {{-1, 0, 1}}"));
                }
                let plus = col.iter().filter(|&&v| v == 1.0).count();
                let minus = col.iter().filter(|&&v| v == -1.0).count();
                if plus > 1 || minus > 1 || plus + minus == 0 {
                    super::custom(&mut r, format!("{name} column {c} is not a branch incidence"));
                }
            }
        }
        if self.capacitors.len() != self.a_c.cols() {
            super::custom(
                &mut r,
                format!("{} capacitor laws for {} capacitors", self.capacitors.len(), self.a_c.cols()),
            );
        }
        for (i, c) in self.capacitors.iter().enumerate() {
            if let CapacitorLaw::Linear { capacitance } = c {
                if !(*capacitance > 0.0) {
                    super::custom(&mut r, format!("capacitor {i} has capacitance {capacitance}"));
                }
            }
        }
        if self.inductances.len() != self.a_l.cols() {
            super::custom(
                &mut r,
                format!("{} inductances for {} inductors", self.inductances.len(), self.a_l.cols()),
            );
        }
        if let Some(l) = self.inductances.iter().find(|l| !(**l > 0.0)) {
            super::custom(&mut r, format!("inductance {l} is not positive"));
        }
        if self.resistors.len() != self.a_r.cols() {
            super::custom(
                &mut r,
                format!("{} conductance laws for {} resistors", self.resistors.len(), self.a_r.cols()),
            );
        }
        for (i, g) in self.resistors.iter().enumerate() {
            if !monotone_on_probes(g) {
                super::custom(&mut r, format!("conductance of resistor {i} is not monotone"));
            }
        }
        if self.source.m() != self.a_s.cols() {
            super::custom(
                &mut r,
                format!("source has {} components for {} sources", self.source.m(), self.a_s.cols()),
            );
        }
        finish(r)
    }

    pub fn state(&self, q: &[f64], psi: &[f64], i_s: &[f64], phi: &[f64]) -> State {
        let z3 = [i_s, phi].concat();
        State::from_blocks(q, psi, &z3).expect("nonempty")
    }
}

fn monotone_on_probes(g: &Conductance) -> bool {
    let probes: Vec<f64> = (-20..=20).map(|k| k as f64 * 0.25).collect();
    probes.iter().all(|&a| {
        probes
            .iter()
            .all(|&b| (g.current(a) - g.current(b)) * (a - b) >= -1e-12 * (1.0 + a.abs() + b.abs()))
    })
}

/// Capacitor and inductor energies.
#[derive(Debug, Clone)]
pub struct CircuitEnergy {
    pub capacitors: Vec<CapacitorLaw>,
    pub inductances: Vec<f64>,
}

impl Hamiltonian for CircuitEnergy {
    fn dim(&self) -> usize {
        self.capacitors.len() + self.inductances.len()
    }

    fn energy(&self, x: &[f64]) -> f64 {
        let nc = self.capacitors.len();
        let cap: f64 = self
            .capacitors
            .iter()
            .zip(x)
            .map(|(law, &q)| match law {
                CapacitorLaw::Linear { capacitance } => 0.5 * q * q / capacitance,
                CapacitorLaw::Quartic => 0.25 * q.powi(4) + 0.5 * q * q,
            })
            .sum();
        let ind: f64 = self.inductances.iter().zip(&x[nc..]).map(|(l, p)| 0.5 * p * p / l).sum();
        cap + ind
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let nc = self.capacitors.len();
        let mut g: Vec<f64> = self
            .capacitors
            .iter()
            .zip(x)
            .map(|(law, &q)| match law {
                CapacitorLaw::Linear { capacitance } => q / capacitance,
                CapacitorLaw::Quartic => q * q * q + q,
            })
            .collect();
        g.extend(self.inductances.iter().zip(&x[nc..]).map(|(l, p)| p / l));
        g
    }

    fn energy_difference(&self, from: &[f64], to: &[f64]) -> f64 {
        let nc = self.capacitors.len();
        let mut total = 0.0;
        for (i, law) in self.capacitors.iter().enumerate() {
            let (a, b) = (from[i], to[i]);
            let d = (b - a) * (b + a);
            total += match law {
                CapacitorLaw::Linear { capacitance } => 0.5 * d / capacitance,
                CapacitorLaw::Quartic => d * (0.25 * (a * a + b * b) + 0.5),
            };
        }
        for (k, l) in self.inductances.iter().enumerate() {
            let (a, b) = (from[nc + k], to[nc + k]);
            total += 0.5 * (b - a) * (b + a) / l;
        }
        total
    }

    fn hessian(&self, x: &[f64]) -> Option<Matrix> {
        let mut d: Vec<f64> = self
            .capacitors
            .iter()
            .zip(x)
            .map(|(law, &q)| match law {
                CapacitorLaw::Linear { capacitance } => 1.0 / capacitance,
                CapacitorLaw::Quartic => 3.0 * q * q + 1.0,
            })
            .collect();
        d.extend(self.inductances.iter().map(|l| 1.0 / l));
        Some(Matrix::from_diagonal(&d))
    }

    fn is_quadratic(&self) -> bool {
        self.capacitors
            .iter()
            .all(|c| matches!(c, CapacitorLaw::Linear { .. }))
    }
}

/// `A_R g3 (A_Rᵀφ)³` acting on the node-potential block of the flow stack.
#[derive(Debug, Clone)]
pub struct CubicResistors {
    pub a_r: Matrix,
    pub g3: Vec<f64>,
    /// Index of the first node potential in the flow stack.
    pub offset: usize,
    pub dim: usize,
}

impl NonlinearDissipation for CubicResistors {
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval(&self, w: &[f64]) -> Vec<f64> {
        let phi = &w[self.offset..self.offset + self.a_r.rows()];
        let v = self.a_r.tr_mul_vec(phi);
        let i: Vec<f64> = v.iter().zip(&self.g3).map(|(v, g)| g * v * v * v).collect();
        let mut out = vec![0.0; self.dim];
        for (o, x) in out[self.offset..].iter_mut().zip(self.a_r.mul_vec(&i)) {
            *o = x;
        }
        out
    }

    fn jacobian(&self, w: &[f64]) -> Matrix {
        let nn = self.a_r.rows();
        let phi = &w[self.offset..self.offset + nn];
        let v = self.a_r.tr_mul_vec(phi);
        let dg: Vec<f64> = v.iter().zip(&self.g3).map(|(v, g)| 3.0 * g * v * v).collect();
        let block = self.a_r.matmul(&Matrix::from_diagonal(&dg)).matmul(&self.a_r.transpose());
        let mut out = Matrix::zeros(self.dim, self.dim);
        out.set_block(self.offset, self.offset, &block);
        out
    }
}

pub fn make_circuit(p: &CircuitParams) -> Result<SystemSpec, ModelError> {
    p.validate()?;
    let part = p.partition();
    let (nc, nl, ns, nn) = (p.a_c.cols(), p.a_l.cols(), p.a_s.cols(), p.nodes());
    let n = part.n();
    let o_phi = nc + nl + ns;

    let mut j = Matrix::zeros(n, n);
    for (off, a) in [(0, &p.a_c), (nc, &p.a_l), (nc + nl, &p.a_s)] {
        j.set_block(off, o_phi, &a.transpose());
        j.set_block(o_phi, off, &a.scale(-1.0));
    }
    let g1: Vec<f64> = p.resistors.iter().map(|g| g.g1).collect();
    let mut r = Matrix::zeros(n, n);
    r.set_block(
        o_phi,
        o_phi,
        &p.a_r.matmul(&Matrix::from_diagonal(&g1)).matmul(&p.a_r.transpose()),
    );
    let mut b = Matrix::zeros(n, ns);
    b.set_block(nc + nl, 0, &Matrix::identity(ns).scale(-1.0));

    let h = CircuitEnergy {
        capacitors: p.capacitors.clone(),
        inductances: p.inductances.clone(),
    };
    let mut spec = SystemSpec::new(part, StructureMatrices::new(j, r, b), Arc::new(h), p.source.clone())?;
    if p.resistors.iter().any(|g| g.g3 != 0.0) {
        spec = spec.with_nonlinear_dissipation(Arc::new(CubicResistors {
            a_r: p.a_r.clone(),
            g3: p.resistors.iter().map(|g| g.g3).collect(),
            offset: o_phi,
            dim: n,
        }))?;
    }
    debug_assert_eq!(nn + o_phi, n);
    Ok(spec)
}
