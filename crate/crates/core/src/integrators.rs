//! One-step integrators and the time loop.
//!
//! The implicit schemes are solved in divided-by-τ form. With unknowns
//! `x = (z1ⁿ⁺¹, z2ⁿ⁺¹, z3ⁿ⁺¹ᐟ²)` and `g` either `∇H` at the midpoint or a
//! discrete gradient of `(zⁿ, zⁿ⁺¹)`:
//!
//! ```text
//! co = [g1; (z2ⁿ⁺¹ − z2ⁿ)/τ; 0],   v = [(z1ⁿ⁺¹ − z1ⁿ)/τ; g2; z3ⁿ⁺¹ᐟ²]
//! co − (J − R) v + r(v) − B u(t + τ/2) = 0
//! ```
//!
//! The `z3` entry stored for step `n + 1` is the half-step value `z3ⁿ⁺¹ᐟ²`.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hamiltonian::{discrete_gradient, DiscreteGradientKind, DomainError, Hamiltonian};
use crate::numkit::{dot, fd_jacobian, newton_solve, Lu, Matrix, NewtonOptions, NumError};
use crate::system::{State, StatePartition, SystemSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    ExplicitEuler,
    ImplicitEuler,
    Midpoint,
    DiscreteGradient(DiscreteGradientKind),
}

impl Scheme {
    pub const ALL: [Scheme; 5] = [
        Scheme::ExplicitEuler,
        Scheme::ImplicitEuler,
        Scheme::Midpoint,
        Scheme::DiscreteGradient(DiscreteGradientKind::Gonzalez),
        Scheme::DiscreteGradient(DiscreteGradientKind::ItohAbe),
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Scheme::ExplicitEuler => "explicit_euler",
            Scheme::ImplicitEuler => "implicit_euler",
            Scheme::Midpoint => "midpoint",
            Scheme::DiscreteGradient(DiscreteGradientKind::Gonzalez) => "discrete_gradient_gonzalez",
            Scheme::DiscreteGradient(DiscreteGradientKind::ItohAbe) => "discrete_gradient_itoh_abe",
        }
    }

    pub fn from_name(name: &str) -> Option<Scheme> {
        Scheme::ALL.into_iter().find(|s| s.name() == name)
    }

    /// Midpoint and discrete-gradient schemes satisfy a discrete dissipation inequality.
    pub fn is_structure_preserving(&self) -> bool {
        matches!(self, Scheme::Midpoint | Scheme::DiscreteGradient(_))
    }

    pub fn is_euler(&self) -> bool {
        matches!(self, Scheme::ExplicitEuler | Scheme::ImplicitEuler)
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SchemeConfig {
    pub scheme: Scheme,
    pub tau: f64,
    pub newton_tol: f64,
    pub newton_max_iter: usize,
}

impl SchemeConfig {
    pub fn new(scheme: Scheme, tau: f64) -> Self {
        Self {
            scheme,
            tau,
            newton_tol: 1e-10,
            newton_max_iter: 50,
        }
    }

    pub fn with_newton(mut self, tol: f64, max_iter: usize) -> Self {
        self.newton_tol = tol;
        self.newton_max_iter = max_iter;
        self
    }

    pub fn validate(&self) -> Result<(), IntegratorError> {
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(IntegratorError::InvalidConfig(format!("tau must be positive, got {}", self.tau)));
        }
        if !(self.newton_tol > 0.0) {
            return Err(IntegratorError::InvalidConfig(format!(
                "newton_tol must be positive, got {}",
                self.newton_tol
            )));
        }
        if self.newton_max_iter == 0 {
            return Err(IntegratorError::InvalidConfig("newton_max_iter must be at least 1".into()));
        }
        Ok(())
    }

    fn newton(&self) -> NewtonOptions {
        // one update at least, so that states far below the absolute tolerance still move
        NewtonOptions {
            tol: self.newton_tol,
            max_iter: self.newton_max_iter,
            min_iter: 1,
        }
    }
}

/// Per-step energy bookkeeping. For the structure-preserving schemes
/// `energy_after − energy_before = supply − dissipation` up to the Newton residual.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepAudit {
    pub t: f64,
    pub tau: f64,
    pub energy_before: f64,
    pub energy_after: f64,
    /// `τ⟨y, u⟩`
    pub supply: f64,
    /// `τ⟨v, R v + r(v)⟩`
    pub dissipation: f64,
    /// `⟨v, J v⟩`, zero up to round-off.
    pub skew_defect: f64,
    pub newton_iters: usize,
    pub newton_residual: f64,
}

impl StepAudit {
    pub fn energy_change(&self) -> f64 {
        self.energy_after - self.energy_before
    }

    /// `ΔH − (supply − dissipation)`.
    pub fn balance_defect(&self) -> f64 {
        self.energy_change() - (self.supply - self.dissipation)
    }

    /// `ΔH − supply`; positive values violate the dissipation inequality.
    pub fn dissipation_excess(&self) -> f64 {
        self.energy_change() - self.supply
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub next_state: State,
    /// Output at the evaluation point of the scheme (`y^{n+1/2}` for the
    /// structure-preserving schemes).
    pub midpoint_output: Vec<f64>,
    pub input: Vec<f64>,
    pub audit: StepAudit,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IntegratorError {
    #[error("newton failure at t = {t}: residual {residual:.3e} after {iterations} iterations")]
    NewtonFailure {
        t: f64,
        iterations: usize,
        residual: f64,
        iterate: Vec<f64>,
    },
    #[error("{scheme} cannot step this system: {reason}")]
    IndexTooHigh { scheme: Scheme, reason: String },
    #[error("at t = {t}: {source}")]
    Domain { t: f64, source: DomainError },
    #[error("invalid scheme configuration: {0}")]
    InvalidConfig(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("non-finite state produced at t = {t}")]
    NonFinite { t: f64 },
}

/// Advances `state` from `t` by one step of `cfg.tau`.
pub fn step(spec: &SystemSpec, cfg: &SchemeConfig, t: f64, state: &State) -> Result<StepResult, IntegratorError> {
    cfg.validate()?;
    if state.partition() != spec.partition {
        return Err(IntegratorError::DimensionMismatch(format!(
            "state partition {:?} does not match spec {:?}",
            state.partition(),
            spec.partition
        )));
    }
    step_tau(spec, cfg, t, cfg.tau, state, true)
}

fn step_tau(
    spec: &SystemSpec,
    cfg: &SchemeConfig,
    t: f64,
    tau: f64,
    state: &State,
    allow_retry: bool,
) -> Result<StepResult, IntegratorError> {
    let first = match cfg.scheme {
        Scheme::ExplicitEuler => return explicit_euler(spec, cfg, t, tau, state),
        Scheme::ImplicitEuler => implicit_euler(spec, cfg, t, tau, state),
        Scheme::Midpoint | Scheme::DiscreteGradient(_) => implicit_structured(spec, cfg, t, tau, state),
    };
    match first {
        Err(IntegratorError::NewtonFailure { .. }) if allow_retry => {
            let a = step_tau(spec, cfg, t, 0.5 * tau, state, false)?;
            let b = step_tau(spec, cfg, t + 0.5 * tau, 0.5 * tau, &a.next_state, false)?;
            Ok(merge_substeps(a, b, t, tau))
        }
        other => other,
    }
}

fn merge_substeps(a: StepResult, b: StepResult, t: f64, tau: f64) -> StepResult {
    let avg = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(p, q)| 0.5 * (p + q)).collect::<Vec<_>>();
    StepResult {
        midpoint_output: avg(&a.midpoint_output, &b.midpoint_output),
        input: avg(&a.input, &b.input),
        audit: StepAudit {
            t,
            tau,
            energy_before: a.audit.energy_before,
            energy_after: b.audit.energy_after,
            supply: a.audit.supply + b.audit.supply,
            dissipation: a.audit.dissipation + b.audit.dissipation,
            skew_defect: a.audit.skew_defect.abs().max(b.audit.skew_defect.abs()),
            newton_iters: a.audit.newton_iters + b.audit.newton_iters,
            newton_residual: a.audit.newton_residual.max(b.audit.newton_residual),
        },
        next_state: b.next_state,
    }
}

fn newton_failure(t: f64, x0: &[f64], e: NumError) -> IntegratorError {
    match e {
        NumError::NoConvergence {
            iterations,
            residual,
            last_iterate,
        } => IntegratorError::NewtonFailure {
            t,
            iterations,
            residual,
            iterate: last_iterate,
        },
        _ => IntegratorError::NewtonFailure {
            t,
            iterations: 0,
            residual: f64::NAN,
            iterate: x0.to_vec(),
        },
    }
}

fn domain(spec: &SystemSpec, t: f64, x: &[f64]) -> Result<(), IntegratorError> {
    spec.hamiltonian
        .check_domain(x)
        .map_err(|source| IntegratorError::Domain { t, source })
}

/// Forward-difference Jacobian of `xb ↦ g(xb)`.
fn fd_map_jacobian(g: &dyn Fn(&[f64]) -> Vec<f64>, xb: &[f64]) -> Matrix {
    let n = xb.len();
    let g0 = g(xb);
    let mut out = Matrix::zeros(g0.len(), n);
    let mut xp = xb.to_vec();
    let sqrt_eps = f64::EPSILON.sqrt();
    for c in 0..n {
        let h = sqrt_eps * (1.0 + xb[c].abs());
        xp[c] = xb[c] + h;
        let gp = g(&xp);
        xp[c] = xb[c];
        for r in 0..g0.len() {
            out[(r, c)] = (gp[r] - g0[r]) / h;
        }
    }
    out
}

/// Co-stack and flow stack of the implicit schemes for a trial unknown.
struct Stacks {
    co: Vec<f64>,
    v: Vec<f64>,
}

fn assemble_stacks(p: StatePartition, tau: f64, za: &[f64], x: &[f64], g: &[f64], z1_from_rate: bool) -> Stacks {
    let (n1, n12, n) = (p.n1, p.n12(), p.n());
    let mut co = vec![0.0; n];
    let mut v = vec![0.0; n];
    for i in 0..n1 {
        co[i] = g[i];
        v[i] = if z1_from_rate { (x[i] - za[i]) / tau } else { x[i] };
    }
    for i in n1..n12 {
        co[i] = (x[i] - za[i]) / tau;
        v[i] = g[i];
    }
    v[n12..n].copy_from_slice(&x[n12..n]);
    Stacks { co, v }
}

/// `co − (J − R) v + r(v) − B u`.
fn stack_residual(spec: &SystemSpec, jr: &Matrix, s: &Stacks, bu: &[f64]) -> Vec<f64> {
    let a = jr.mul_vec(&s.v);
    let nl = spec.nonlinear_dissipation.as_ref().map(|r| r.eval(&s.v));
    (0..s.co.len())
        .map(|i| s.co[i] - a[i] + nl.as_ref().map_or(0.0, |r| r[i]) - bu[i])
        .collect()
}

/// Jacobian of the stacked residual given `G = ∂g/∂xb`.
fn stack_jacobian(spec: &SystemSpec, jr: &Matrix, p: StatePartition, tau: f64, gm: &Matrix, v: &[f64]) -> Matrix {
    let (n1, n12, n) = (p.n1, p.n12(), p.n());
    let mut dco = Matrix::zeros(n, n);
    let mut dv = Matrix::zeros(n, n);
    for i in 0..n1 {
        for c in 0..n12 {
            dco[(i, c)] = gm[(i, c)];
        }
        dv[(i, i)] = 1.0 / tau;
    }
    for i in n1..n12 {
        dco[(i, i)] = 1.0 / tau;
        for c in 0..n12 {
            dv[(i, c)] = gm[(i, c)];
        }
    }
    for i in n12..n {
        dv[(i, i)] = 1.0;
    }
    let a = match &spec.nonlinear_dissipation {
        Some(r) => jr.sub(&r.jacobian(v)),
        None => jr.clone(),
    };
    dco.sub(&a.matmul(&dv))
}

fn finish_audit(
    spec: &SystemSpec,
    t: f64,
    tau: f64,
    energy_before: f64,
    energy_after: f64,
    v: &[f64],
    u: &[f64],
    iters: usize,
    residual: f64,
) -> (Vec<f64>, StepAudit) {
    let y = spec.structure.b.tr_mul_vec(v);
    let audit = StepAudit {
        t,
        tau,
        energy_before,
        energy_after,
        supply: tau * dot(&y, u),
        dissipation: tau * dot(v, &spec.resistive_force(v)),
        skew_defect: dot(v, &spec.structure.j.mul_vec(v)),
        newton_iters: iters,
        newton_residual: residual,
    };
    (y, audit)
}

/// Midpoint and discrete-gradient steps.
fn implicit_structured(
    spec: &SystemSpec,
    cfg: &SchemeConfig,
    t: f64,
    tau: f64,
    state: &State,
) -> Result<StepResult, IntegratorError> {
    let p = spec.partition;
    let n12 = p.n12();
    let h: &dyn Hamiltonian = spec.hamiltonian.as_ref();
    let za = state.energy_vars().to_vec();
    let u = spec.input.eval(t + 0.5 * tau);
    let bu = spec.structure.b.mul_vec(&u);
    let jr = spec.structure.j_minus_r();

    let gmap = |xb: &[f64]| -> Vec<f64> {
        match cfg.scheme {
            Scheme::DiscreteGradient(kind) => discrete_gradient(h, kind, &za, xb),
            _ => {
                let mid: Vec<f64> = za.iter().zip(xb).map(|(a, b)| 0.5 * (a + b)).collect();
                h.gradient(&mid)
            }
        }
    };
    let half_hessian = |xb: &[f64]| -> Option<Matrix> {
        let exact = matches!(cfg.scheme, Scheme::Midpoint)
            || (matches!(cfg.scheme, Scheme::DiscreteGradient(DiscreteGradientKind::Gonzalez)) && h.is_quadratic());
        if !exact {
            return None;
        }
        let mid: Vec<f64> = za.iter().zip(xb).map(|(a, b)| 0.5 * (a + b)).collect();
        h.hessian(&mid).map(|m| m.scale(0.5))
    };

    let residual = |x: &[f64]| {
        let g = gmap(&x[..n12]);
        stack_residual(spec, &jr, &assemble_stacks(p, tau, &za, x, &g, true), &bu)
    };
    let jacobian = |x: &[f64]| {
        let xb = &x[..n12];
        let gm = half_hessian(xb).unwrap_or_else(|| fd_map_jacobian(&gmap, xb));
        let g = gmap(xb);
        let s = assemble_stacks(p, tau, &za, x, &g, true);
        stack_jacobian(spec, &jr, p, tau, &gm, &s.v)
    };

    let x0 = state.as_slice().to_vec();
    let sol = newton_solve(&residual, Some(&jacobian), &x0, cfg.newton())
        .map_err(|e| newton_failure(t, &x0, e))?;
    let x = sol.x;
    if x.iter().any(|v| !v.is_finite()) {
        return Err(IntegratorError::NonFinite { t: t + tau });
    }
    domain(spec, t + tau, &x[..n12])?;

    let g = gmap(&x[..n12]);
    let s = assemble_stacks(p, tau, &za, &x, &g, true);
    let energy_before = h.energy(&za);
    let energy_after = h.energy(&x[..n12]);
    let (y, audit) = finish_audit(
        spec,
        t,
        tau,
        energy_before,
        energy_after,
        &s.v,
        &u,
        sol.iterations,
        sol.residual_norm,
    );
    Ok(StepResult {
        next_state: State::new(p, x).expect("partition preserved"),
        midpoint_output: y,
        input: u,
        audit,
    })
}

fn require_ode(spec: &SystemSpec, scheme: Scheme) -> Result<(), IntegratorError> {
    if spec.partition.n3 > 0 {
        return Err(IntegratorError::IndexTooHigh {
            scheme,
            reason: format!(
                "{} algebraic variables; regularize the system first",
                spec.partition.n3
            ),
        });
    }
    Ok(())
}

fn implicit_euler(
    spec: &SystemSpec,
    cfg: &SchemeConfig,
    t: f64,
    tau: f64,
    state: &State,
) -> Result<StepResult, IntegratorError> {
    require_ode(spec, Scheme::ImplicitEuler)?;
    let p = spec.partition;
    let h: &dyn Hamiltonian = spec.hamiltonian.as_ref();
    let za = state.energy_vars().to_vec();
    let u = spec.input.eval(t + tau);
    let bu = spec.structure.b.mul_vec(&u);
    let jr = spec.structure.j_minus_r();

    let residual = |x: &[f64]| {
        let g = h.gradient(x);
        stack_residual(spec, &jr, &assemble_stacks(p, tau, &za, x, &g, true), &bu)
    };
    let jacobian = |x: &[f64]| {
        let gm = h.hessian(x).unwrap_or_else(|| fd_map_jacobian(&|z| h.gradient(z), x));
        let g = h.gradient(x);
        let s = assemble_stacks(p, tau, &za, x, &g, true);
        stack_jacobian(spec, &jr, p, tau, &gm, &s.v)
    };
    let sol = newton_solve(&residual, Some(&jacobian), &za, cfg.newton()).map_err(|e| newton_failure(t, &za, e))?;
    let x = sol.x;
    if x.iter().any(|v| !v.is_finite()) {
        return Err(IntegratorError::NonFinite { t: t + tau });
    }
    domain(spec, t + tau, &x)?;
    let g = h.gradient(&x);
    let s = assemble_stacks(p, tau, &za, &x, &g, true);
    let (y, audit) = finish_audit(
        spec,
        t,
        tau,
        h.energy(&za),
        h.energy(&x),
        &s.v,
        &u,
        sol.iterations,
        sol.residual_norm,
    );
    Ok(StepResult {
        next_state: State::new(p, x).expect("partition preserved"),
        midpoint_output: y,
        input: u,
        audit,
    })
}

fn explicit_euler(
    spec: &SystemSpec,
    cfg: &SchemeConfig,
    t: f64,
    tau: f64,
    state: &State,
) -> Result<StepResult, IntegratorError> {
    require_ode(spec, Scheme::ExplicitEuler)?;
    let p = spec.partition;
    let (n1, n) = (p.n1, p.n());
    let h: &dyn Hamiltonian = spec.hamiltonian.as_ref();
    let z = state.as_slice();
    let g = h.gradient(z);
    let u = spec.input.eval(t);
    let bu = spec.structure.b.mul_vec(&u);
    let jr = spec.structure.j_minus_r();

    let flow = |z1dot: &[f64]| -> Vec<f64> {
        let mut w = z1dot.to_vec();
        w.extend_from_slice(&g[n1..]);
        w
    };
    // ż1 is defined implicitly by the first block row
    let mut iters = 0;
    let mut res_norm = 0.0;
    let z1dot = if n1 == 0 {
        Vec::new()
    } else {
        let row1 = |z1dot: &[f64]| -> Vec<f64> {
            let w = flow(z1dot);
            let rhs = jr.mul_vec(&w);
            let nl = spec.nonlinear_dissipation.as_ref().map(|r| r.eval(&w));
            (0..n1)
                .map(|i| g[i] - rhs[i] + nl.as_ref().map_or(0.0, |r| r[i]) - bu[i])
                .collect()
        };
        let zero = vec![0.0; n1];
        let singular = || IntegratorError::IndexTooHigh {
            scheme: Scheme::ExplicitEuler,
            reason: "the (z1, z1) block of J − R is singular, so ż1 is not determined explicitly".into(),
        };
        match spec.nonlinear_dissipation {
            // affine in ż1: (J − R)₁₁ ż1 = row1(0)
            None => {
                let lu = Lu::factor(&jr.block(0, 0, n1, n1)).map_err(|_| singular())?;
                lu.solve(&row1(&zero))
            }
            Some(_) => {
                if Lu::factor(&fd_jacobian(&row1, &zero, &row1(&zero))).is_err() {
                    return Err(singular());
                }
                match newton_solve(&row1, None, &zero, cfg.newton()) {
                    Ok(sol) => {
                        iters = sol.iterations;
                        res_norm = sol.residual_norm;
                        sol.x
                    }
                    Err(e) => return Err(newton_failure(t, &zero, e)),
                }
            }
        }
    };
    let w = flow(&z1dot);
    let rate = {
        let a = jr.mul_vec(&w);
        let nl = spec.nonlinear_dissipation.as_ref().map(|r| r.eval(&w));
        (0..n)
            .map(|i| a[i] - nl.as_ref().map_or(0.0, |r| r[i]) + bu[i])
            .collect::<Vec<_>>()
    };
    let mut next = z.to_vec();
    for i in 0..n1 {
        next[i] += tau * z1dot[i];
    }
    for i in n1..n {
        next[i] += tau * rate[i];
    }
    if next.iter().any(|v| !v.is_finite()) {
        return Err(IntegratorError::NonFinite { t: t + tau });
    }
    domain(spec, t + tau, &next)?;
    let (y, audit) = finish_audit(spec, t, tau, h.energy(z), h.energy(&next), &w, &u, iters, res_norm);
    Ok(StepResult {
        next_state: State::new(p, next).expect("partition preserved"),
        midpoint_output: y,
        input: u,
        audit,
    })
}

/// Time grid, states and per-step audits of a simulation.
///
/// `times`, `states` and `energies` hold one entry per grid point (N + 1);
/// `outputs`, `inputs` and `audits` hold one entry per step (N).
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub partition: StatePartition,
    pub scheme: Scheme,
    pub times: Vec<f64>,
    pub states: Vec<State>,
    pub energies: Vec<f64>,
    pub outputs: Vec<Vec<f64>>,
    pub inputs: Vec<Vec<f64>>,
    pub audits: Vec<StepAudit>,
}

impl Trajectory {
    pub fn steps(&self) -> usize {
        self.audits.len()
    }

    pub fn final_state(&self) -> &State {
        self.states.last().expect("trajectory holds the initial state")
    }

    pub fn final_time(&self) -> f64 {
        *self.times.last().expect("trajectory holds the initial time")
    }

    /// Largest absolute entry over all states.
    pub fn sup_norm(&self) -> f64 {
        self.states
            .iter()
            .flat_map(|s| s.as_slice().iter())
            .fold(0.0, |m: f64, v| m.max(v.abs()))
    }
}

/// Simulation stopped early; the partial trajectory is kept.
#[derive(Debug, Error, Clone, PartialEq)]
#[error("simulation stopped after {} steps: {error}", trajectory.steps())]
pub struct SimulateError {
    pub trajectory: Box<Trajectory>,
    pub error: IntegratorError,
}

/// Number of full steps and the length of a trailing partial step.
pub fn time_grid(t0: f64, t_end: f64, tau: f64) -> Vec<f64> {
    let ratio = (t_end - t0) / tau;
    let rounded = ratio.round();
    let full = if (ratio - rounded).abs() <= 1e-9 * ratio.max(1.0) {
        rounded as usize
    } else {
        ratio.floor() as usize
    };
    let mut times: Vec<f64> = (0..=full).map(|k| t0 + k as f64 * tau).collect();
    let last = *times.last().unwrap();
    if t_end - last > 1e-9 * tau {
        times.push(t_end);
    } else {
        *times.last_mut().unwrap() = t_end;
    }
    if times.len() == 1 {
        times.push(t_end);
    }
    times
}

pub fn simulate(
    spec: &SystemSpec,
    cfg: &SchemeConfig,
    t0: f64,
    t_end: f64,
    initial: &State,
) -> Result<Trajectory, SimulateError> {
    let empty = |error| SimulateError {
        trajectory: Box::new(Trajectory {
            partition: spec.partition,
            scheme: cfg.scheme,
            times: vec![t0],
            states: vec![initial.clone()],
            energies: vec![f64::NAN],
            outputs: Vec::new(),
            inputs: Vec::new(),
            audits: Vec::new(),
        }),
        error,
    };
    if let Err(e) = cfg.validate() {
        return Err(empty(e));
    }
    if !(t_end > t0) {
        return Err(empty(IntegratorError::InvalidConfig(format!(
            "t_end ({t_end}) must exceed t0 ({t0})"
        ))));
    }
    if initial.partition() != spec.partition {
        return Err(empty(IntegratorError::DimensionMismatch(format!(
            "initial state partition {:?} does not match spec {:?}",
            initial.partition(),
            spec.partition
        ))));
    }
    if let Err(e) = domain(spec, t0, initial.energy_vars()) {
        return Err(empty(e));
    }

    let grid = time_grid(t0, t_end, cfg.tau);
    let mut traj = Trajectory {
        partition: spec.partition,
        scheme: cfg.scheme,
        times: vec![t0],
        states: vec![initial.clone()],
        energies: vec![spec.energy(initial)],
        outputs: Vec::with_capacity(grid.len() - 1),
        inputs: Vec::with_capacity(grid.len() - 1),
        audits: Vec::with_capacity(grid.len() - 1),
    };
    for k in 0..grid.len() - 1 {
        let (ta, tb) = (grid[k], grid[k + 1]);
        let current = traj.states.last().unwrap();
        match step_tau(spec, cfg, ta, tb - ta, current, true) {
            Ok(r) => {
                traj.times.push(tb);
                traj.energies.push(r.audit.energy_after);
                traj.states.push(r.next_state);
                traj.outputs.push(r.midpoint_output);
                traj.inputs.push(r.input);
                traj.audits.push(r.audit);
            }
            Err(error) => {
                return Err(SimulateError {
                    trajectory: Box::new(traj),
                    error,
                })
            }
        }
    }
    Ok(traj)
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::hamiltonian::{Pendulum, QuadraticHamiltonian};
    use crate::system::{InputSignal, StructureMatrices};

    fn rot() -> Matrix {
        Matrix::from_rows(&[vec![0.0, 1.0], vec![-1.0, 0.0]]).unwrap()
    }

    fn oscillator(r: f64) -> SystemSpec {
        SystemSpec::new(
            StatePartition::new(0, 2, 0).unwrap(),
            StructureMatrices::new(rot(), Matrix::identity(2).scale(r), Matrix::zeros(2, 0)),
            Arc::new(QuadraticHamiltonian::identity(0, 2)),
            InputSignal::zero(0),
        )
        .unwrap()
    }

    fn z2(a: f64, b: f64) -> State {
        State::from_blocks(&[], &[a, b], &[]).unwrap()
    }

    #[test]
    fn midpoint_cayley_quarter_turn() {
        let cfg = SchemeConfig::new(Scheme::Midpoint, 2.0);
        let r = step(&oscillator(0.0), &cfg, 0.0, &z2(1.0, 0.0)).unwrap();
        let z = r.next_state.z2();
        assert!((z[0] - 0.0).abs() < 1e-12 && (z[1] + 1.0).abs() < 1e-12, "{z:?}");
        assert!((r.audit.energy_after - 0.5).abs() < 1e-12);
    }

    #[test]
    fn explicit_euler_energy_growth() {
        let cfg = SchemeConfig::new(Scheme::ExplicitEuler, 0.1);
        let r = step(&oscillator(0.0), &cfg, 0.0, &z2(1.0, 0.0)).unwrap();
        assert!((r.audit.energy_after - 0.505).abs() < 1e-14);
    }

    #[test]
    fn damped_discrete_gradient_is_monotone() {
        let spec = oscillator(0.3);
        for kind in [DiscreteGradientKind::Gonzalez, DiscreteGradientKind::ItohAbe] {
            let cfg = SchemeConfig::new(Scheme::DiscreteGradient(kind), 0.05);
            let traj = simulate(&spec, &cfg, 0.0, 50.0, &z2(1.0, 0.5)).unwrap();
            assert_eq!(traj.steps(), 1000);
            for w in traj.energies.windows(2) {
                assert!(w[1] < w[0]);
            }
            for a in &traj.audits {
                assert!(a.balance_defect().abs() <= 1e-9);
                assert!(a.dissipation >= 0.0);
            }
        }
    }

    #[test]
    fn pendulum_energy_conserved() {
        let spec = SystemSpec::new(
            StatePartition::new(0, 2, 0).unwrap(),
            StructureMatrices::new(rot(), Matrix::zeros(2, 2), Matrix::zeros(2, 0)),
            Arc::new(Pendulum),
            InputSignal::zero(0),
        )
        .unwrap();
        let cfg = SchemeConfig::new(Scheme::DiscreteGradient(DiscreteGradientKind::Gonzalez), 0.1);
        let traj = simulate(&spec, &cfg, 0.0, 100.0, &z2(2.0, 0.0)).unwrap();
        let h0 = traj.energies[0];
        assert!(traj.energies.iter().all(|h| (h - h0).abs() <= 1e-8));
    }

    #[test]
    fn gonzalez_coincides_with_midpoint_on_quadratic() {
        let spec = oscillator(0.1);
        let a = simulate(&spec, &SchemeConfig::new(Scheme::Midpoint, 0.1), 0.0, 10.0, &z2(1.0, 0.0)).unwrap();
        let b = simulate(
            &spec,
            &SchemeConfig::new(Scheme::DiscreteGradient(DiscreteGradientKind::Gonzalez), 0.1),
            0.0,
            10.0,
            &z2(1.0, 0.0),
        )
        .unwrap();
        for (x, y) in a.states.iter().zip(&b.states) {
            for (p, q) in x.as_slice().iter().zip(y.as_slice()) {
                assert!((p - q).abs() <= 1e-9);
            }
        }
    }

    #[test]
    fn euler_rejects_algebraic_rows() {
        let spec = SystemSpec::new(
            StatePartition::new(0, 1, 1).unwrap(),
            StructureMatrices::new(rot(), Matrix::zeros(2, 2), Matrix::zeros(2, 0)),
            Arc::new(QuadraticHamiltonian::identity(0, 1)),
            InputSignal::zero(0),
        )
        .unwrap();
        let s = State::from_blocks(&[], &[1.0], &[0.0]).unwrap();
        for scheme in [Scheme::ExplicitEuler, Scheme::ImplicitEuler] {
            let e = step(&spec, &SchemeConfig::new(scheme, 0.1), 0.0, &s).unwrap_err();
            assert!(matches!(e, IntegratorError::IndexTooHigh { .. }), "{e:?}");
        }
    }

    #[test]
    fn zero_dynamics_stay_constant() {
        let spec = SystemSpec::new(
            StatePartition::new(1, 1, 0).unwrap(),
            StructureMatrices::new(Matrix::zeros(2, 2), Matrix::zeros(2, 2), Matrix::zeros(2, 0)),
            Arc::new(QuadraticHamiltonian::identity(1, 1)),
            InputSignal::zero(0),
        )
        .unwrap();
        let s0 = State::from_blocks(&[0.0], &[0.0], &[]).unwrap();
        let traj = simulate(&spec, &SchemeConfig::new(Scheme::Midpoint, 0.1), 0.0, 1.0, &s0).unwrap();
        assert!(traj.states.iter().all(|s| s == &s0));
    }

    #[test]
    fn grid_with_partial_step() {
        let g = time_grid(0.0, 1.0, 0.3);
        assert_eq!(g.len(), 5);
        assert!((g[3] - 0.9).abs() < 1e-15 && g[4] == 1.0);
        let g = time_grid(0.0, 1.0, 0.1);
        assert_eq!(g.len(), 11);
        assert_eq!(*g.last().unwrap(), 1.0);
    }

    #[test]
    fn invalid_config_rejected() {
        let cfg = SchemeConfig::new(Scheme::Midpoint, -1.0);
        assert!(matches!(
            step(&oscillator(0.0), &cfg, 0.0, &z2(1.0, 0.0)),
            Err(IntegratorError::InvalidConfig(_))
        ));
    }
}
