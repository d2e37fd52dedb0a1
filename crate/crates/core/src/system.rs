//! The continuous model: partitioned state, structure matrices, inputs and
//! outputs, structural validation.
//!
//! Layout convention shared by every module: the flow stack is
//! `w = [ż1; ∂z2H; z3]`, the co-stack is `[∂z1H; ż2; 0]`, and
//! `co = (J − R) w − r(w) + B u` where `r` is an optional monotone resistive
//! term (zero for linear dissipation).

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hamiltonian::Hamiltonian;
use crate::numkit::{asymmetry, dot, fd_jacobian, min_symmetric_eigenvalue, Matrix};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SystemError {
    #[error("invalid partition: {0}")]
    InvalidPartition(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("structure validation failed:\n{0}")]
    Invalid(ValidationReport),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StatePartition {
    pub n1: usize,
    pub n2: usize,
    pub n3: usize,
}

impl StatePartition {
    pub fn new(n1: usize, n2: usize, n3: usize) -> Result<Self, SystemError> {
        if n1 + n2 + n3 == 0 {
            return Err(SystemError::InvalidPartition("state dimension must be at least 1".into()));
        }
        Ok(Self { n1, n2, n3 })
    }

    pub fn n(&self) -> usize {
        self.n1 + self.n2 + self.n3
    }

    /// Number of energy variables `n1 + n2`.
    pub fn n12(&self) -> usize {
        self.n1 + self.n2
    }
}

/// State `[z1; z2; z3]` stored contiguously.
#[derive(Debug, Clone, PartialEq)]
pub struct State {
    partition: StatePartition,
    data: Vec<f64>,
}

impl State {
    pub fn new(partition: StatePartition, data: Vec<f64>) -> Result<Self, SystemError> {
        if data.len() != partition.n() {
            return Err(SystemError::DimensionMismatch(format!(
                "state has {} entries, partition needs {}",
                data.len(),
                partition.n()
            )));
        }
        Ok(Self { partition, data })
    }

    pub fn from_blocks(z1: &[f64], z2: &[f64], z3: &[f64]) -> Result<Self, SystemError> {
        let partition = StatePartition::new(z1.len(), z2.len(), z3.len())?;
        let data = [z1, z2, z3].concat();
        Ok(Self { partition, data })
    }

    pub fn zeros(partition: StatePartition) -> Self {
        Self {
            partition,
            data: vec![0.0; partition.n()],
        }
    }

    pub fn partition(&self) -> StatePartition {
        self.partition
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn z1(&self) -> &[f64] {
        &self.data[..self.partition.n1]
    }

    pub fn z2(&self) -> &[f64] {
        &self.data[self.partition.n1..self.partition.n12()]
    }

    pub fn z3(&self) -> &[f64] {
        &self.data[self.partition.n12()..]
    }

    /// `[z1; z2]`, the argument of the Hamiltonian.
    pub fn energy_vars(&self) -> &[f64] {
        &self.data[..self.partition.n12()]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StructureMatrices {
    pub j: Matrix,
    pub r: Matrix,
    pub b: Matrix,
}

impl StructureMatrices {
    pub fn new(j: Matrix, r: Matrix, b: Matrix) -> Self {
        Self { j, r, b }
    }

    /// `J − R`.
    pub fn j_minus_r(&self) -> Matrix {
        self.j.sub(&self.r)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValidationTolerances {
    /// Relative skew-symmetry defect allowed for `J`.
    pub skew: f64,
    /// Relative symmetry defect allowed for `R`.
    pub symmetry: f64,
    /// Most negative eigenvalue tolerated in `sym(R)`.
    pub psd: f64,
}

impl Default for ValidationTolerances {
    fn default() -> Self {
        Self {
            skew: 1e-12,
            symmetry: 1e-12,
            psd: 1e-10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    DimensionMismatch { detail: String },
    NonFinite { matrix: String },
    NotSkew { asymmetry: f64 },
    NotSymmetric { asymmetry: f64 },
    NotPsd { min_eigenvalue: f64 },
    Custom { detail: String },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::DimensionMismatch { detail } => write!(f, "dimension mismatch: {detail}"),
            Violation::NonFinite { matrix } => write!(f, "{matrix} has non-finite entries"),
            Violation::NotSkew { asymmetry } => {
                write!(f, "J not skew, ‖J + Jᵀ‖∞ / (1 + ‖J‖∞) = {asymmetry:.3e}")
            }
            Violation::NotSymmetric { asymmetry } => {
                write!(f, "R not symmetric, ‖R − Rᵀ‖∞ / (1 + ‖R‖∞) = {asymmetry:.3e}")
            }
            Violation::NotPsd { min_eigenvalue } => {
                write!(f, "R not PSD, min eig {min_eigenvalue}")
            }
            Violation::Custom { detail } => f.write_str(detail),
        }
    }
}

/// List of violated structural invariants; empty means valid.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn push(&mut self, v: Violation) {
        self.violations.push(v);
    }

    pub fn merge(&mut self, other: ValidationReport) {
        self.violations.extend(other.violations);
    }

    pub fn into_result(self) -> Result<(), SystemError> {
        if self.is_valid() {
            Ok(())
        } else {
            Err(SystemError::Invalid(self))
        }
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return f.write_str("valid");
        }
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "  - {v}")?;
        }
        Ok(())
    }
}

pub fn validate_structure(s: &StructureMatrices) -> ValidationReport {
    validate_structure_with(s, &ValidationTolerances::default())
}

pub fn validate_structure_with(s: &StructureMatrices, tol: &ValidationTolerances) -> ValidationReport {
    let mut report = ValidationReport::default();
    let n = s.j.rows();
    if !s.j.is_square() || s.r.rows() != n || s.r.cols() != n || s.j.cols() != n {
        report.push(Violation::DimensionMismatch {
            detail: format!(
                "J is {}x{}, R is {}x{}",
                s.j.rows(),
                s.j.cols(),
                s.r.rows(),
                s.r.cols()
            ),
        });
        return report;
    }
    if s.b.rows() != n {
        report.push(Violation::DimensionMismatch {
            detail: format!("B has {} rows, expected {n}", s.b.rows()),
        });
    }
    for (name, m) in [("J", &s.j), ("R", &s.r), ("B", &s.b)] {
        if !m.is_finite() {
            report.push(Violation::NonFinite { matrix: name.into() });
        }
    }
    if !report.is_valid() {
        return report;
    }

    let skew = s.j.add(&s.j.transpose()).norm_inf() / (1.0 + s.j.norm_inf());
    if skew > tol.skew {
        report.push(Violation::NotSkew { asymmetry: skew });
    }
    let asym = asymmetry(&s.r);
    if asym > tol.symmetry {
        report.push(Violation::NotSymmetric { asymmetry: asym });
    }
    if n > 0 {
        // symmetric part is exactly symmetric, so the eigen solve cannot refuse it
        let min_eig = min_symmetric_eigenvalue(&s.r.symmetric_part())
            .expect("symmetric part passed to eigen solver");
        if min_eig < -tol.psd {
            report.push(Violation::NotPsd { min_eigenvalue: min_eig });
        }
    }
    report
}

type SignalFn = dyn Fn(f64) -> Vec<f64> + Send + Sync;

/// Time-dependent input `u(t) ∈ ℝᵐ`. The function must be pure.
#[derive(Clone)]
pub struct InputSignal {
    m: usize,
    f: Arc<SignalFn>,
}

impl fmt::Debug for InputSignal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "InputSignal(m = {})", self.m)
    }
}

impl InputSignal {
    pub fn new(m: usize, f: impl Fn(f64) -> Vec<f64> + Send + Sync + 'static) -> Self {
        Self { m, f: Arc::new(f) }
    }

    pub fn zero(m: usize) -> Self {
        Self::new(m, move |_| vec![0.0; m])
    }

    pub fn constant(value: Vec<f64>) -> Self {
        let m = value.len();
        Self::new(m, move |_| value.clone())
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn eval(&self, t: f64) -> Vec<f64> {
        let u = (self.f)(t);
        debug_assert_eq!(u.len(), self.m, "input signal returned wrong length");
        u
    }

    /// Stacks two signals as `[a(t); b(t)]`.
    pub fn concat(a: &InputSignal, b: &InputSignal) -> InputSignal {
        let (fa, fb) = (a.f.clone(), b.f.clone());
        InputSignal::new(a.m + b.m, move |t| {
            let mut u = fa(t);
            u.extend(fb(t));
            u
        })
    }
}

/// State-dependent resistive term `r(w)` acting on the flow stack, with
/// `⟨w, r(w)⟩ ≥ 0`. Enters the dynamics as `co = (J − R) w − r(w) + B u`.
pub trait NonlinearDissipation: Send + Sync {
    fn dim(&self) -> usize;

    fn eval(&self, w: &[f64]) -> Vec<f64>;

    fn jacobian(&self, w: &[f64]) -> Matrix {
        let r0 = self.eval(w);
        fd_jacobian(&|x| self.eval(x), w, &r0)
    }
}

impl fmt::Debug for dyn NonlinearDissipation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "NonlinearDissipation(dim = {})", self.dim())
    }
}

/// Bookkeeping left by [`crate::transforms::regularize`]: the last
/// `original_n3` entries of `z2` hold `ζ = ε z3`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegularizationInfo {
    pub epsilon: f64,
    pub original_n3: usize,
}

#[derive(Clone)]
pub struct SystemSpec {
    pub partition: StatePartition,
    pub structure: StructureMatrices,
    pub hamiltonian: Arc<dyn Hamiltonian>,
    pub input: InputSignal,
    pub nonlinear_dissipation: Option<Arc<dyn NonlinearDissipation>>,
    pub regularization: Option<RegularizationInfo>,
}

impl fmt::Debug for SystemSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SystemSpec")
            .field("partition", &self.partition)
            .field("structure", &self.structure)
            .field("m", &self.input.m())
            .field("nonlinear_dissipation", &self.nonlinear_dissipation.is_some())
            .field("regularization", &self.regularization)
            .finish()
    }
}

impl SystemSpec {
    /// Checks dimensions and structural invariants with default tolerances.
    pub fn new(
        partition: StatePartition,
        structure: StructureMatrices,
        hamiltonian: Arc<dyn Hamiltonian>,
        input: InputSignal,
    ) -> Result<Self, SystemError> {
        Self::with_tolerances(partition, structure, hamiltonian, input, &ValidationTolerances::default())
    }

    pub fn with_tolerances(
        partition: StatePartition,
        structure: StructureMatrices,
        hamiltonian: Arc<dyn Hamiltonian>,
        input: InputSignal,
        tol: &ValidationTolerances,
    ) -> Result<Self, SystemError> {
        let n = partition.n();
        if structure.j.rows() != n {
            return Err(SystemError::DimensionMismatch(format!(
                "J is {}x{}, partition has n = {n}",
                structure.j.rows(),
                structure.j.cols()
            )));
        }
        if structure.b.cols() != input.m() {
            return Err(SystemError::DimensionMismatch(format!(
                "B has {} columns, input has m = {}",
                structure.b.cols(),
                input.m()
            )));
        }
        if hamiltonian.dim() != partition.n12() {
            return Err(SystemError::DimensionMismatch(format!(
                "Hamiltonian acts on {} variables, partition has n1 + n2 = {}",
                hamiltonian.dim(),
                partition.n12()
            )));
        }
        validate_structure_with(&structure, tol).into_result()?;
        Ok(Self {
            partition,
            structure,
            hamiltonian,
            input,
            nonlinear_dissipation: None,
            regularization: None,
        })
    }

    pub fn with_nonlinear_dissipation(mut self, r: Arc<dyn NonlinearDissipation>) -> Result<Self, SystemError> {
        if r.dim() != self.n() {
            return Err(SystemError::DimensionMismatch(format!(
                "resistive term acts on {} entries, n = {}",
                r.dim(),
                self.n()
            )));
        }
        self.nonlinear_dissipation = Some(r);
        Ok(self)
    }

    pub fn with_input(mut self, input: InputSignal) -> Result<Self, SystemError> {
        if input.m() != self.m() {
            return Err(SystemError::DimensionMismatch(format!(
                "input has m = {}, spec expects {}",
                input.m(),
                self.m()
            )));
        }
        self.input = input;
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.partition.n()
    }

    pub fn m(&self) -> usize {
        self.input.m()
    }

    pub fn energy(&self, state: &State) -> f64 {
        self.hamiltonian.energy(state.energy_vars())
    }

    /// Flow stack `[ż1; ∂z2H; z3]` for a given state and `ż1`.
    pub fn flow(&self, state: &State, z1dot: &[f64]) -> FlowVector {
        let p = self.partition;
        assert_eq!(z1dot.len(), p.n1);
        let g = self.hamiltonian.gradient(state.energy_vars());
        let mut w = Vec::with_capacity(p.n());
        w.extend_from_slice(z1dot);
        w.extend_from_slice(&g[p.n1..]);
        w.extend_from_slice(state.z3());
        FlowVector(w)
    }

    /// `R w + r(w)`.
    pub fn resistive_force(&self, w: &[f64]) -> Vec<f64> {
        let mut out = self.structure.r.mul_vec(w);
        if let Some(nl) = &self.nonlinear_dissipation {
            for (o, v) in out.iter_mut().zip(nl.eval(w)) {
                *o += v;
            }
        }
        out
    }
}

/// Flow stack `w = [ż1; ∂z2H; z3]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowVector(pub Vec<f64>);

impl FlowVector {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// `y = Bᵀ w`.
pub fn eval_output(spec: &SystemSpec, flow: &FlowVector) -> Result<Vec<f64>, SystemError> {
    if flow.0.len() != spec.n() {
        return Err(SystemError::DimensionMismatch(format!(
            "flow has {} entries, n = {}",
            flow.0.len(),
            spec.n()
        )));
    }
    Ok(spec.structure.b.tr_mul_vec(&flow.0))
}

/// `[∂z1H; ż2; 0] − (J − R) w + r(w) − B u(t)` with `w = [ż1; ∂z2H; z3]`.
/// Zero exactly when the rates satisfy the dynamics.
pub fn continuous_residual(spec: &SystemSpec, t: f64, state: &State, z1dot: &[f64], z2dot: &[f64]) -> Vec<f64> {
    let p = spec.partition;
    assert_eq!(z2dot.len(), p.n2);
    let g = spec.hamiltonian.gradient(state.energy_vars());
    let w = spec.flow(state, z1dot).0;
    let mut res = Vec::with_capacity(p.n());
    res.extend_from_slice(&g[..p.n1]);
    res.extend_from_slice(z2dot);
    res.resize(p.n(), 0.0);
    let jw = spec.structure.j.mul_vec(&w);
    let rw = spec.resistive_force(&w);
    let bu = spec.structure.b.mul_vec(&spec.input.eval(t));
    for i in 0..p.n() {
        res[i] += -jw[i] + rw[i] - bu[i];
    }
    res
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PowerBalance {
    pub dh: f64,
    pub supply: f64,
    pub dissipation: f64,
    /// `⟨w, J w⟩`, zero up to round-off.
    pub skew_defect: f64,
}

/// Instantaneous energy balance along a consistent flow.
pub fn power_balance_rate(spec: &SystemSpec, flow: &FlowVector, t: f64) -> PowerBalance {
    let w = &flow.0;
    let u = spec.input.eval(t);
    let y = spec.structure.b.tr_mul_vec(w);
    let supply = dot(&y, &u);
    let dissipation = dot(w, &spec.resistive_force(w));
    let skew_defect = dot(w, &spec.structure.j.mul_vec(w));
    let scale = 1.0 + spec.structure.j.norm_inf() * dot(w, w);
    debug_assert!(skew_defect.abs() <= 1e-12 * scale, "⟨w, Jw⟩ = {skew_defect}");
    PowerBalance {
        dh: supply - dissipation,
        supply,
        dissipation,
        skew_defect,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamiltonian::QuadraticHamiltonian;

    fn m(rows: &[&[f64]]) -> Matrix {
        Matrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    fn oscillator() -> SystemSpec {
        SystemSpec::new(
            StatePartition::new(0, 2, 0).unwrap(),
            StructureMatrices::new(m(&[&[0.0, 1.0], &[-1.0, 0.0]]), Matrix::zeros(2, 2), Matrix::zeros(2, 0)),
            Arc::new(QuadraticHamiltonian::identity(0, 2)),
            InputSignal::zero(0),
        )
        .unwrap()
    }

    #[test]
    fn validation_examples() {
        let ok = StructureMatrices::new(m(&[&[0.0, 1.0], &[-1.0, 0.0]]), Matrix::zeros(2, 2), Matrix::zeros(2, 1));
        assert!(validate_structure(&ok).is_valid());

        let bad_r = StructureMatrices::new(Matrix::zeros(2, 2), m(&[&[-1.0, 0.0], &[0.0, 1.0]]), Matrix::zeros(2, 1));
        let rep = validate_structure(&bad_r);
        assert_eq!(rep.violations.len(), 1);
        match &rep.violations[0] {
            Violation::NotPsd { min_eigenvalue } => assert!((min_eigenvalue + 1.0).abs() < 1e-10),
            v => panic!("unexpected {v:?}"),
        }
        assert!(rep.to_string().contains("R not PSD, min eig -1"));

        let bad_j = StructureMatrices::new(m(&[&[0.0, 1.0], &[0.0, 0.0]]), Matrix::zeros(2, 2), Matrix::zeros(2, 1));
        let rep = validate_structure(&bad_j);
        assert!(matches!(rep.violations[0], Violation::NotSkew { .. }));
        assert!(rep.to_string().contains("J not skew"));
    }

    #[test]
    fn output_examples() {
        let spec = SystemSpec::new(
            StatePartition::new(1, 1, 1).unwrap(),
            StructureMatrices::new(Matrix::zeros(3, 3), Matrix::zeros(3, 3), m(&[&[1.0], &[0.0], &[2.0]])),
            Arc::new(QuadraticHamiltonian::identity(1, 1)),
            InputSignal::zero(1),
        )
        .unwrap();
        let y = eval_output(&spec, &FlowVector(vec![3.0, 5.0, 7.0])).unwrap();
        assert_eq!(y, vec![17.0]);
        assert!(eval_output(&spec, &FlowVector(vec![1.0])).is_err());

        let ident = SystemSpec::new(
            StatePartition::new(1, 1, 1).unwrap(),
            StructureMatrices::new(Matrix::zeros(3, 3), Matrix::zeros(3, 3), Matrix::identity(3)),
            Arc::new(QuadraticHamiltonian::identity(1, 1)),
            InputSignal::zero(3),
        )
        .unwrap();
        assert_eq!(eval_output(&ident, &FlowVector(vec![1.0, 2.0, 3.0])).unwrap(), vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn residual_of_oscillator() {
        let spec = oscillator();
        let s = State::from_blocks(&[], &[1.0, 0.0], &[]).unwrap();
        assert_eq!(continuous_residual(&spec, 0.0, &s, &[], &[0.0, -1.0]), vec![0.0, 0.0]);
        assert_eq!(continuous_residual(&spec, 0.0, &s, &[], &[0.0, 0.0]), vec![0.0, 1.0]);
        let zero = State::zeros(spec.partition);
        assert_eq!(continuous_residual(&spec, 0.0, &zero, &[], &[0.0, 0.0]), vec![0.0, 0.0]);
    }

    #[test]
    fn power_balance_examples() {
        let cons = power_balance_rate(&oscillator(), &FlowVector(vec![0.3, -2.0]), 0.0);
        assert_eq!(cons.dh, 0.0);

        let damped = SystemSpec::new(
            StatePartition::new(0, 2, 0).unwrap(),
            StructureMatrices::new(Matrix::zeros(2, 2), Matrix::identity(2), Matrix::identity(2)),
            Arc::new(QuadraticHamiltonian::identity(0, 2)),
            InputSignal::zero(2),
        )
        .unwrap();
        let pb = power_balance_rate(&damped, &FlowVector(vec![1.0, 1.0]), 0.0);
        assert_eq!((pb.dissipation, pb.dh), (2.0, -2.0));

        let driven = damped.with_input(InputSignal::constant(vec![0.5, -1.5])).unwrap();
        let w = FlowVector(vec![2.0, 4.0]);
        let pb = power_balance_rate(&driven, &w, 1.0);
        let y = eval_output(&driven, &w).unwrap();
        assert_eq!(pb.supply, dot(&y, &[0.5, -1.5]));
        assert!((pb.dh - (pb.supply - pb.dissipation)).abs() <= 1e-12);
    }

    #[test]
    fn spec_dimension_checks() {
        let r = SystemSpec::new(
            StatePartition::new(0, 2, 0).unwrap(),
            StructureMatrices::new(Matrix::zeros(2, 2), Matrix::zeros(2, 2), Matrix::zeros(2, 1)),
            Arc::new(QuadraticHamiltonian::identity(0, 3)),
            InputSignal::zero(1),
        );
        assert!(matches!(r, Err(SystemError::DimensionMismatch(_))));
        assert!(StatePartition::new(0, 0, 0).is_err());
    }
}
