//! System transforms: ε-regularization of algebraic rows and
//! power-preserving interconnection of two systems.

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hamiltonian::{CompositeHamiltonian, Hamiltonian, ScaledNorm};
use crate::numkit::{asymmetry, min_symmetric_eigenvalue, Matrix};
use crate::system::{
    InputSignal, NonlinearDissipation, RegularizationInfo, State, StatePartition, StructureMatrices, SystemError,
    SystemSpec,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TransformError {
    #[error("system has no algebraic variables to regularize")]
    NothingToRegularize,
    #[error("regularization parameter must be positive and finite, got {0}")]
    InvalidEpsilon(f64),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid coupling: {0}")]
    InvalidCoupling(String),
    #[error(transparent)]
    System(#[from] SystemError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegularizationConfig {
    pub epsilon: f64,
}

/// Replaces `0 = (row of z3)` by `ε ż3 = (row of z3)`.
///
/// The new state carries `ζ = ε z3` as trailing `z2` entries and the energy
/// becomes `H + ‖ζ‖²/(2ε) = H + (ε/2)‖z3‖²`, so `∂H/∂ζ = z3` and the flow
/// stack, `J`, `R` and `B` keep their layout. Use
/// [`RegularizationInfo::lift`] and [`RegularizationInfo::project`] to move
/// states between the two coordinate systems.
pub fn regularize(spec: &SystemSpec, cfg: RegularizationConfig) -> Result<SystemSpec, TransformError> {
    let p = spec.partition;
    if p.n3 == 0 {
        return Err(TransformError::NothingToRegularize);
    }
    if !(cfg.epsilon > 0.0 && cfg.epsilon.is_finite()) {
        return Err(TransformError::InvalidEpsilon(cfg.epsilon));
    }
    let n12 = p.n12();
    let n = p.n();
    let aug: Arc<dyn Hamiltonian> = Arc::new(ScaledNorm {
        dim: p.n3,
        coefficient: 1.0 / cfg.epsilon,
    });
    let hamiltonian: Arc<dyn Hamiltonian> = Arc::new(CompositeHamiltonian::new(
        n,
        vec![
            (spec.hamiltonian.clone(), (0..n12).collect()),
            (aug, (n12..n).collect()),
        ],
    ));
    let partition = StatePartition::new(p.n1, p.n2 + p.n3, 0)?;
    let mut out = SystemSpec::new(partition, spec.structure.clone(), hamiltonian, spec.input.clone())?;
    out.nonlinear_dissipation = spec.nonlinear_dissipation.clone();
    out.regularization = Some(RegularizationInfo {
        epsilon: cfg.epsilon,
        original_n3: p.n3,
    });
    Ok(out)
}

impl RegularizationInfo {
    /// Original-coordinates state `[z1; z2; z3]` to `[z1; z2; ε z3]`.
    pub fn lift(&self, state: &State) -> State {
        let p = state.partition();
        assert_eq!(p.n3, self.original_n3, "state does not match the regularized system");
        let mut data = state.as_slice().to_vec();
        for v in &mut data[p.n12()..] {
            *v *= self.epsilon;
        }
        let lifted = StatePartition::new(p.n1, p.n2 + p.n3, 0).expect("nonempty");
        State::new(lifted, data).expect("sizes agree")
    }

    /// Regularized state `[z1; z2; ζ]` back to `[z1; z2; ζ/ε]`.
    pub fn project(&self, state: &State) -> State {
        let p = state.partition();
        assert!(p.n3 == 0 && p.n2 >= self.original_n3, "state is not in regularized form");
        let n2 = p.n2 - self.original_n3;
        let mut data = state.as_slice().to_vec();
        for v in &mut data[p.n1 + n2..] {
            *v /= self.epsilon;
        }
        let orig = StatePartition::new(p.n1, n2, self.original_n3).expect("nonempty");
        State::new(orig, data).expect("sizes agree")
    }
}

/// Port feedback `u = (F_skew − F_sym) y + ũ`.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingMatrices {
    pub f_skew: Matrix,
    pub f_sym: Matrix,
}

impl CouplingMatrices {
    pub fn new(f_skew: Matrix, f_sym: Matrix) -> Result<Self, TransformError> {
        let c = Self { f_skew, f_sym };
        c.validate()?;
        Ok(c)
    }

    pub fn zero(m: usize) -> Self {
        Self {
            f_skew: Matrix::zeros(m, m),
            f_sym: Matrix::zeros(m, m),
        }
    }

    pub fn m(&self) -> usize {
        self.f_skew.rows()
    }

    pub fn validate(&self) -> Result<(), TransformError> {
        let m = self.f_skew.rows();
        if !self.f_skew.is_square() || self.f_sym.rows() != m || self.f_sym.cols() != m {
            return Err(TransformError::DimensionMismatch(format!(
                "F_skew is {}x{}, F_sym is {}x{}",
                self.f_skew.rows(),
                self.f_skew.cols(),
                self.f_sym.rows(),
                self.f_sym.cols()
            )));
        }
        let skew = self.f_skew.add(&self.f_skew.transpose()).norm_inf() / (1.0 + self.f_skew.norm_inf());
        if skew > 1e-12 {
            return Err(TransformError::InvalidCoupling(format!("F_skew not skew ({skew:.3e})")));
        }
        let asym = asymmetry(&self.f_sym);
        if asym > 1e-12 {
            return Err(TransformError::InvalidCoupling(format!("F_sym not symmetric ({asym:.3e})")));
        }
        if m > 0 {
            let min = min_symmetric_eigenvalue(&self.f_sym.symmetric_part()).expect("symmetric");
            if min < -1e-10 {
                return Err(TransformError::InvalidCoupling(format!("F_sym not PSD, min eig {min}")));
            }
        }
        Ok(())
    }
}

/// Index bookkeeping of an interconnected system with combined layout
/// `[z1a; z1b; z2a; z2b; z3a; z3b]`.
#[derive(Debug, Clone, PartialEq)]
pub struct InterconnectLayout {
    pub a: StatePartition,
    pub b: StatePartition,
    /// Combined position of every entry of the `a` state.
    pub a_index: Vec<usize>,
    /// Combined position of every entry of the `b` state.
    pub b_index: Vec<usize>,
}

impl InterconnectLayout {
    pub fn new(a: StatePartition, b: StatePartition) -> Self {
        let off1 = 0;
        let off2 = a.n1 + b.n1;
        let off3 = off2 + a.n2 + b.n2;
        let a_index = (0..a.n1)
            .map(|i| off1 + i)
            .chain((0..a.n2).map(|i| off2 + i))
            .chain((0..a.n3).map(|i| off3 + i))
            .collect();
        let b_index = (0..b.n1)
            .map(|i| off1 + a.n1 + i)
            .chain((0..b.n2).map(|i| off2 + a.n2 + i))
            .chain((0..b.n3).map(|i| off3 + a.n3 + i))
            .collect();
        Self { a, b, a_index, b_index }
    }

    pub fn combined(&self) -> StatePartition {
        StatePartition::new(self.a.n1 + self.b.n1, self.a.n2 + self.b.n2, self.a.n3 + self.b.n3).expect("nonempty")
    }

    pub fn join(&self, sa: &State, sb: &State) -> State {
        let mut data = vec![0.0; self.combined().n()];
        for (v, &i) in sa.as_slice().iter().zip(&self.a_index) {
            data[i] = *v;
        }
        for (v, &i) in sb.as_slice().iter().zip(&self.b_index) {
            data[i] = *v;
        }
        State::new(self.combined(), data).expect("sizes agree")
    }

    pub fn split(&self, s: &State) -> (State, State) {
        let x = s.as_slice();
        let pick = |idx: &[usize]| idx.iter().map(|&i| x[i]).collect::<Vec<_>>();
        (
            State::new(self.a, pick(&self.a_index)).expect("sizes agree"),
            State::new(self.b, pick(&self.b_index)).expect("sizes agree"),
        )
    }

    /// Combined index of each stacked entry `[a; b]`.
    fn stacked_to_combined(&self) -> Vec<usize> {
        self.a_index.iter().chain(&self.b_index).copied().collect()
    }

    fn energy_indices(&self) -> (Vec<usize>, Vec<usize>) {
        let n12 = self.combined().n12();
        let keep = |idx: &[usize], n12_local: usize| idx[..n12_local].to_vec();
        let ea = keep(&self.a_index, self.a.n12());
        let eb = keep(&self.b_index, self.b.n12());
        debug_assert!(ea.iter().chain(&eb).all(|&i| i < n12));
        (ea, eb)
    }
}

/// Resistive terms of subsystems scattered into the combined layout.
struct ScatteredDissipation {
    dim: usize,
    parts: Vec<(Arc<dyn NonlinearDissipation>, Vec<usize>)>,
}

impl NonlinearDissipation for ScatteredDissipation {
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval(&self, w: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        for (r, idx) in &self.parts {
            let local: Vec<f64> = idx.iter().map(|&i| w[i]).collect();
            for (v, &i) in r.eval(&local).iter().zip(idx) {
                out[i] = *v;
            }
        }
        out
    }

    fn jacobian(&self, w: &[f64]) -> Matrix {
        let mut out = Matrix::zeros(self.dim, self.dim);
        for (r, idx) in &self.parts {
            let local: Vec<f64> = idx.iter().map(|&i| w[i]).collect();
            let jl = r.jacobian(&local);
            for (a, &i) in idx.iter().enumerate() {
                for (b, &j) in idx.iter().enumerate() {
                    out[(i, j)] = jl[(a, b)];
                }
            }
        }
        out
    }
}

/// Couples two systems through `u = (F_skew − F_sym) y + ũ`.
///
/// Returns the combined system, whose input is `ũ = [ũa; ũb]` with the
/// subsystems' own input signals, and its layout.
pub fn interconnect(
    a: &SystemSpec,
    b: &SystemSpec,
    c: &CouplingMatrices,
) -> Result<(SystemSpec, InterconnectLayout), TransformError> {
    let m = a.m() + b.m();
    if c.m() != m {
        return Err(TransformError::DimensionMismatch(format!(
            "coupling is {0}x{0}, inputs total {m}",
            c.m()
        )));
    }
    c.validate()?;

    let layout = InterconnectLayout::new(a.partition, b.partition);
    let perm_inv = layout.stacked_to_combined();
    let n = perm_inv.len();
    // perm[combined] = stacked
    let mut perm = vec![0; n];
    for (s, &ci) in perm_inv.iter().enumerate() {
        perm[ci] = s;
    }

    let bs = Matrix::block_diag(&a.structure.b, &b.structure.b);
    let bt = bs.transpose();
    let j_s = Matrix::block_diag(&a.structure.j, &b.structure.j).add(&bs.matmul(&c.f_skew).matmul(&bt));
    let r_s = Matrix::block_diag(&a.structure.r, &b.structure.r).add(&bs.matmul(&c.f_sym).matmul(&bt));
    // remove round-off asymmetry introduced by the triple products
    let j_s = j_s.sub(&j_s.transpose()).scale(0.5);
    let r_s = r_s.symmetric_part();

    let structure = StructureMatrices::new(
        j_s.permute_symmetric(&perm),
        r_s.permute_symmetric(&perm),
        bs.permute_rows(&perm),
    );
    let combined = layout.combined();
    let (ea, eb) = layout.energy_indices();
    let hamiltonian: Arc<dyn Hamiltonian> = Arc::new(CompositeHamiltonian::new(
        combined.n12(),
        vec![(a.hamiltonian.clone(), ea), (b.hamiltonian.clone(), eb)],
    ));
    let mut spec = SystemSpec::new(combined, structure, hamiltonian, InputSignal::concat(&a.input, &b.input))?;

    let mut parts = Vec::new();
    if let Some(r) = &a.nonlinear_dissipation {
        parts.push((r.clone(), layout.a_index.clone()));
    }
    if let Some(r) = &b.nonlinear_dissipation {
        parts.push((r.clone(), layout.b_index.clone()));
    }
    if !parts.is_empty() {
        spec = spec.with_nonlinear_dissipation(Arc::new(ScatteredDissipation { dim: n, parts }))?;
    }
    Ok((spec, layout))
}
