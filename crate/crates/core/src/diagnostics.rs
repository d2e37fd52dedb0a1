//! Post-hoc analysis of trajectories: dissipation audits, decay-rate fits,
//! boundedness, convergence orders and the scheme comparison for the
//! quantum-thermodynamic model.

use std::collections::BTreeMap;

use serde::Serialize;
use thiserror::Error;

use crate::hamiltonian::DiscreteGradientKind;
use crate::integrators::{simulate, IntegratorError, Scheme, SchemeConfig, Trajectory};
use crate::models::quantum::{self, QuantumThermoParams};
use crate::models::ModelError;
use crate::numkit::norm_inf;
use crate::system::{State, SystemSpec};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DiagnosticsError {
    #[error("trajectory has no steps")]
    EmptyTrajectory,
    #[error("energy {energy} at t = {t} is not positive; cannot fit a logarithm")]
    NonPositiveEnergy { t: f64, energy: f64 },
    #[error("need at least 3 step sizes, got {0}")]
    TooFewStepSizes(usize),
    #[error("step sizes must halve: {0} then {1}")]
    NotHalving(f64, f64),
    #[error("reference unavailable: {0}")]
    ReferenceUnavailable(String),
    #[error("run with {scheme} at tau = {tau} failed: {source}")]
    Run {
        scheme: Scheme,
        tau: f64,
        source: IntegratorError,
    },
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DissipationAudit {
    /// `max_n (Hⁿ⁺¹ − Hⁿ − supplyⁿ)`
    pub max_violation: f64,
    /// Steps whose excess is above the threshold.
    pub violating_steps: Vec<usize>,
    /// Smallest per-step dissipation entry.
    pub min_dissipation: f64,
    /// `max_n |ΔH − (supply − dissipation)|`
    pub max_balance_defect: f64,
}

pub fn audit_dissipation(traj: &Trajectory, threshold: f64) -> Result<DissipationAudit, DiagnosticsError> {
    if traj.audits.is_empty() {
        return Err(DiagnosticsError::EmptyTrajectory);
    }
    let mut out = DissipationAudit {
        max_violation: f64::NEG_INFINITY,
        violating_steps: Vec::new(),
        min_dissipation: f64::INFINITY,
        max_balance_defect: 0.0,
    };
    for (k, a) in traj.audits.iter().enumerate() {
        let excess = a.dissipation_excess();
        out.max_violation = out.max_violation.max(excess);
        if excess > threshold || excess.is_nan() {
            out.violating_steps.push(k);
        }
        out.min_dissipation = out.min_dissipation.min(a.dissipation);
        out.max_balance_defect = out.max_balance_defect.max(a.balance_defect().abs());
    }
    Ok(out)
}

/// Largest `Hⁿ⁺¹ − Hⁿ` over the run.
pub fn max_energy_increase(energies: &[f64]) -> f64 {
    energies
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(f64::NEG_INFINITY, f64::max)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecayFit {
    pub beta: f64,
    pub r2: f64,
    /// Trailing fraction of the samples used for the fit.
    pub window: f64,
    /// `max_t H(t) / (H(0) e^{−β(t − t0)})`
    pub envelope_ratio: f64,
    /// `envelope_ratio ≤ 1.05`
    pub envelope_holds: bool,
    /// False when the fitted slope or its r² does not indicate decay.
    pub decaying: bool,
}

pub const ENVELOPE_SLACK: f64 = 0.05;

/// Least-squares fit of `log H` against `t` over the trailing window.
pub fn fit_decay_rate(traj: &Trajectory, window: f64) -> Result<DecayFit, DiagnosticsError> {
    fit_decay_series(&traj.times, &traj.energies, window)
}

pub fn fit_decay_series(times: &[f64], energies: &[f64], window: f64) -> Result<DecayFit, DiagnosticsError> {
    assert_eq!(times.len(), energies.len());
    assert!(window > 0.0 && window <= 1.0, "window must lie in (0, 1]");
    if times.len() < 3 {
        return Err(DiagnosticsError::EmptyTrajectory);
    }
    let start = ((1.0 - window) * (times.len() - 1) as f64).floor() as usize;
    let start = start.min(times.len() - 3);
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (&t, &h) in times[start..].iter().zip(&energies[start..]) {
        if !(h > 0.0) {
            return Err(DiagnosticsError::NonPositiveEnergy { t, energy: h });
        }
        xs.push(t);
        ys.push(h.ln());
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    let slope = sxy / sxx;
    let r2 = if syy <= 1e-24 * n * (1.0 + my * my) {
        0.0
    } else {
        ((sxy * sxy) / (sxx * syy)).clamp(0.0, 1.0)
    };
    let beta = -slope;

    let (t0, h0) = (times[0], energies[0]);
    let envelope_ratio = times
        .iter()
        .zip(energies)
        .map(|(&t, &h)| h / (h0 * (-beta * (t - t0)).exp()))
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(DecayFit {
        beta,
        r2,
        window,
        envelope_ratio,
        envelope_holds: envelope_ratio <= 1.0 + ENVELOPE_SLACK,
        decaying: beta > 1e-9 && r2 > 0.5,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Boundedness {
    Bounded { max_norm: f64 },
    Diverged { step: usize },
}

impl Boundedness {
    pub fn is_bounded(&self) -> bool {
        matches!(self, Boundedness::Bounded { .. })
    }
}

/// First grid index whose state exceeds `cap` in max norm or is non-finite.
pub fn boundedness(traj: &Trajectory, cap: f64) -> Boundedness {
    let mut max_norm: f64 = 0.0;
    for (k, s) in traj.states.iter().enumerate() {
        let v = norm_inf(s.as_slice());
        if !s.is_finite() || v > cap {
            return Boundedness::Diverged { step: k };
        }
        max_norm = max_norm.max(v);
    }
    Boundedness::Bounded { max_norm }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TerminalPlateau {
    /// Last energy value, the estimate of `H^∞`.
    pub h_inf: f64,
    /// `max − min` of `H` over the last decile.
    pub range: f64,
    pub holds: bool,
}

/// Last-decile energy range against `rel_tol · H⁰`.
pub fn terminal_plateau(energies: &[f64], rel_tol: f64) -> TerminalPlateau {
    let n = energies.len();
    let start = n - (n / 10).max(1);
    let tail = &energies[start..];
    let max = tail.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = tail.iter().cloned().fold(f64::INFINITY, f64::min);
    TerminalPlateau {
        h_inf: energies[n - 1],
        range: max - min,
        holds: max - min <= rel_tol * energies[0].abs(),
    }
}

/// `‖xᴺ − xᴺ⁻¹‖∞` over the selected components.
pub fn terminal_increment(traj: &Trajectory, components: std::ops::Range<usize>) -> f64 {
    let n = traj.states.len();
    if n < 2 {
        return 0.0;
    }
    let a = &traj.states[n - 2].as_slice()[components.clone()];
    let b = &traj.states[n - 1].as_slice()[components];
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Source of the exact terminal state for [`estimate_order`].
pub enum Reference<'a> {
    /// Exact solution at `t_end`.
    ClosedForm(&'a dyn Fn(f64) -> Vec<f64>),
    /// Same scheme at `τ_min / refinement`.
    Finest { refinement: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OrderEstimate {
    pub scheme: Scheme,
    pub taus: Vec<f64>,
    /// Terminal max-norm error per step size.
    pub errors: Vec<f64>,
    /// `log2(e(τ)/e(τ/2))` per consecutive pair.
    pub pairwise: Vec<f64>,
    pub order: f64,
}

pub fn estimate_order(
    spec: &SystemSpec,
    base: &SchemeConfig,
    taus: &[f64],
    t0: f64,
    t_end: f64,
    initial: &State,
    reference: Reference<'_>,
) -> Result<OrderEstimate, DiagnosticsError> {
    if taus.len() < 3 {
        return Err(DiagnosticsError::TooFewStepSizes(taus.len()));
    }
    for w in taus.windows(2) {
        if ((w[0] / w[1]) - 2.0).abs() > 1e-9 {
            return Err(DiagnosticsError::NotHalving(w[0], w[1]));
        }
    }
    let run = |tau: f64| {
        let cfg = SchemeConfig { tau, ..*base };
        simulate(spec, &cfg, t0, t_end, initial)
            .map(|t| t.final_state().as_slice().to_vec())
            .map_err(|e| DiagnosticsError::Run {
                scheme: base.scheme,
                tau,
                source: e.error,
            })
    };
    let exact = match reference {
        Reference::ClosedForm(f) => {
            let v = f(t_end);
            if v.len() != initial.as_slice().len() || v.iter().any(|x| !x.is_finite()) {
                return Err(DiagnosticsError::ReferenceUnavailable(
                    "closed form returned a state of the wrong size or non-finite entries".into(),
                ));
            }
            v
        }
        Reference::Finest { refinement } => {
            let tau = taus[taus.len() - 1] / refinement.max(2) as f64;
            run(tau).map_err(|e| DiagnosticsError::ReferenceUnavailable(e.to_string()))?
        }
    };
    let mut errors = Vec::with_capacity(taus.len());
    for &tau in taus {
        let end = run(tau)?;
        errors.push(end.iter().zip(&exact).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max));
    }
    let pairwise: Vec<f64> = errors.windows(2).map(|w| (w[0] / w[1]).log2()).collect();
    let order = pairwise.iter().sum::<f64>() / pairwise.len() as f64;
    Ok(OrderEstimate {
        scheme: base.scheme,
        taus: taus.to_vec(),
        errors,
        pairwise,
        order,
    })
}

/// One scheme's row in the quantum-thermodynamic comparison.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Table1Row {
    pub scheme: Scheme,
    pub completed_steps: usize,
    pub failure: Option<String>,
    /// `|H^N − H^0 − Σ(supply − dissipation)|`, infinite when the run fails.
    pub energy_balance_error: f64,
    /// `Σ_n τ |Hⁿ − H_ref(tₙ)|`, the time-integrated deviation from a fine
    /// discrete-gradient run.
    pub energy_error_vs_reference: f64,
    /// `max_n |ρ1ⁿ + ρ2ⁿ − 1|`
    pub max_probability_violation: f64,
    /// `max_n max(0, Sⁿ − Sⁿ⁺¹)`
    pub max_negative_entropy_increment: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Table1 {
    pub tau: f64,
    pub t_end: f64,
    pub epsilon: f64,
    pub rows: Vec<Table1Row>,
    pub beta_formula: f64,
    /// Rate fitted to `H − H^∞` on the reference run.
    pub beta_fitted: Option<f64>,
}

/// Rows of the comparison: the structure-preserving scheme first, explicit Euler last.
pub const TABLE1_SCHEMES: [Scheme; 4] = [
    Scheme::DiscreteGradient(DiscreteGradientKind::Gonzalez),
    Scheme::Midpoint,
    Scheme::ImplicitEuler,
    Scheme::ExplicitEuler,
];

const REFERENCE_REFINEMENT: usize = 8;

impl Table1 {
    pub fn row(&self, scheme: Scheme) -> Option<&Table1Row> {
        self.rows.iter().find(|r| r.scheme == scheme)
    }

    /// Energy-balance errors are nondecreasing along [`TABLE1_SCHEMES`].
    pub fn ordering_holds(&self) -> bool {
        let errs: Vec<f64> = TABLE1_SCHEMES
            .iter()
            .filter_map(|s| self.row(*s).map(|r| r.energy_balance_error))
            .collect();
        errs.len() == TABLE1_SCHEMES.len() && errs.windows(2).all(|w| w[0] <= w[1])
    }
}

pub fn table1_comparison(p: &QuantumThermoParams, tau: f64, t_end: f64) -> Result<Table1, DiagnosticsError> {
    table1_with_schemes(p, tau, t_end, &TABLE1_SCHEMES)
}

pub fn table1_with_schemes(
    p: &QuantumThermoParams,
    tau: f64,
    t_end: f64,
    schemes: &[Scheme],
) -> Result<Table1, DiagnosticsError> {
    table1_from(p, &p.default_state(), tau, t_end, schemes)
}

/// Comparison from an explicit regularized initial state.
pub fn table1_from(
    p: &QuantumThermoParams,
    s0: &State,
    tau: f64,
    t_end: f64,
    schemes: &[Scheme],
) -> Result<Table1, DiagnosticsError> {
    let spec = quantum::make_quantum_thermo(p)?;
    let s0 = s0.clone();

    let ref_cfg = SchemeConfig::new(
        Scheme::DiscreteGradient(DiscreteGradientKind::Gonzalez),
        tau / REFERENCE_REFINEMENT as f64,
    );
    let reference = simulate(&spec, &ref_cfg, 0.0, t_end, &s0).map_err(|e| {
        DiagnosticsError::ReferenceUnavailable(e.to_string())
    })?;

    let rows = schemes
        .iter()
        .map(|&scheme| {
            let cfg = SchemeConfig::new(scheme, tau);
            let (traj, failure) = match simulate(&spec, &cfg, 0.0, t_end, &s0) {
                Ok(t) => (t, None),
                Err(e) => (*e.trajectory, Some(e.error.to_string())),
            };
            table1_row(&traj, failure, &reference)
        })
        .collect();

    Ok(Table1 {
        tau,
        t_end,
        epsilon: p.epsilon_reg,
        rows,
        beta_formula: p.beta_formula(),
        beta_fitted: fit_relative_decay(&reference),
    })
}

fn table1_row(traj: &Trajectory, failure: Option<String>, reference: &Trajectory) -> Table1Row {
    let finite = failure.is_none() && traj.energies.iter().all(|h| h.is_finite());
    let balance = if finite {
        let net: f64 = traj.audits.iter().map(|a| a.supply - a.dissipation).sum();
        (traj.energies[traj.energies.len() - 1] - traj.energies[0] - net).abs()
    } else {
        f64::INFINITY
    };
    let vs_ref = if finite {
        traj.audits
            .iter()
            .enumerate()
            .map(|(k, a)| {
                let r = reference.energies[((k + 1) * REFERENCE_REFINEMENT).min(reference.energies.len() - 1)];
                a.tau * (traj.energies[k + 1] - r).abs()
            })
            .sum()
    } else {
        f64::INFINITY
    };
    let prob = traj
        .states
        .iter()
        .map(quantum::probability_violation)
        .fold(0.0, |m: f64, v| if v.is_nan() { f64::INFINITY } else { m.max(v) });
    let neg_entropy = traj
        .states
        .windows(2)
        .map(|w| quantum::entropy(&w[0]) - quantum::entropy(&w[1]))
        .fold(0.0, |m: f64, v| if v.is_nan() { f64::INFINITY } else { m.max(v) });
    Table1Row {
        scheme: traj.scheme,
        completed_steps: traj.steps(),
        failure,
        energy_balance_error: balance,
        energy_error_vs_reference: vs_ref,
        max_probability_violation: prob,
        max_negative_entropy_increment: neg_entropy,
    }
}

/// Decay rate of `H − H^∞`, fitted while the excess is above `1e-6` of its start.
pub fn fit_relative_decay(traj: &Trajectory) -> Option<f64> {
    let h_inf = *traj.energies.last()?;
    let excess: Vec<f64> = traj.energies.iter().map(|h| h - h_inf).collect();
    let cutoff = 1e-6 * excess[0].abs();
    let end = excess.iter().position(|e| *e <= cutoff)?;
    if end < 4 {
        return None;
    }
    fit_decay_series(&traj.times[..end], &excess[..end], 0.5).ok().map(|f| f.beta)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiagnosticsReport {
    pub scheme: Scheme,
    pub steps: usize,
    pub max_dissipation_violation: f64,
    pub violating_steps: Vec<usize>,
    pub max_balance_defect: f64,
    pub decay_rate_beta: Option<f64>,
    pub decay_fit_r2: f64,
    pub observed_orders: BTreeMap<String, f64>,
    pub boundedness: Boundedness,
    pub terminal_plateau: TerminalPlateau,
    pub table1: Option<Table1>,
}

impl DiagnosticsReport {
    /// Audit, decay fit, boundedness and plateau of a single run. Orders and
    /// the comparison table are left empty.
    pub fn from_trajectory(traj: &Trajectory, threshold: f64, cap: f64) -> Self {
        let audit = audit_dissipation(traj, threshold).ok();
        let fit = fit_decay_rate(traj, 0.5).ok();
        DiagnosticsReport {
            scheme: traj.scheme,
            steps: traj.steps(),
            max_dissipation_violation: audit.as_ref().map_or(0.0, |a| a.max_violation),
            violating_steps: audit.as_ref().map_or_else(Vec::new, |a| a.violating_steps.clone()),
            max_balance_defect: audit.as_ref().map_or(0.0, |a| a.max_balance_defect),
            decay_rate_beta: fit.as_ref().filter(|f| f.decaying).map(|f| f.beta),
            decay_fit_r2: fit.as_ref().map_or(0.0, |f| f.r2),
            observed_orders: BTreeMap::new(),
            boundedness: boundedness(traj, cap),
            terminal_plateau: terminal_plateau(&traj.energies, 1e-6),
            table1: None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::simple::{harmonic_oscillator, oscillator_exact, planar_state};

    #[test]
    fn conservative_audit_is_exact() {
        let spec = harmonic_oscillator(0.0);
        let cfg = SchemeConfig::new(Scheme::Midpoint, 0.1);
        let traj = simulate(&spec, &cfg, 0.0, 10.0, &planar_state(1.0, 0.0)).unwrap();
        let a = audit_dissipation(&traj, 10.0 * cfg.newton_tol).unwrap();
        assert!(a.max_violation.abs() <= 10.0 * cfg.newton_tol);
        assert!(a.violating_steps.is_empty());
    }

    #[test]
    fn damped_audit_has_nonnegative_dissipation() {
        let spec = harmonic_oscillator(0.3);
        let cfg = SchemeConfig::new(Scheme::DiscreteGradient(DiscreteGradientKind::ItohAbe), 0.1);
        let traj = simulate(&spec, &cfg, 0.0, 10.0, &planar_state(1.0, 0.5)).unwrap();
        let a = audit_dissipation(&traj, 10.0 * cfg.newton_tol).unwrap();
        assert!(a.max_violation <= 10.0 * cfg.newton_tol);
        assert!(a.min_dissipation >= 0.0);
    }

    #[test]
    fn explicit_euler_growth_is_flagged() {
        let spec = harmonic_oscillator(0.0);
        let tau = 0.1;
        let traj = simulate(&spec, &SchemeConfig::new(Scheme::ExplicitEuler, tau), 0.0, 1.0, &planar_state(1.0, 0.0))
            .unwrap();
        let a = audit_dissipation(&traj, 1e-9).unwrap();
        assert_eq!(a.violating_steps.len(), traj.steps());
        // each step multiplies H by 1 + τ²
        let expected = traj.energies[traj.steps() - 1] * tau * tau;
        assert!((a.max_violation - expected).abs() < 1e-12);
    }

    #[test]
    fn scalar_decay_rate() {
        // ż = −r z with H = z²/2 gives H(t) = H(0) e^{−2rt}
        let r = 0.5;
        let times: Vec<f64> = (0..=200).map(|k| k as f64 * 0.05).collect();
        let energies: Vec<f64> = times.iter().map(|t| 0.5 * (-2.0 * r * t).exp()).collect();
        let f = fit_decay_series(&times, &energies, 0.5).unwrap();
        assert!((f.beta - 1.0).abs() < 0.01);
        assert!(f.envelope_holds && f.decaying);
    }

    #[test]
    fn conservative_fit_reports_no_decay() {
        let spec = harmonic_oscillator(0.0);
        let traj = simulate(&spec, &SchemeConfig::new(Scheme::Midpoint, 0.1), 0.0, 20.0, &planar_state(1.0, 0.0))
            .unwrap();
        let f = fit_decay_rate(&traj, 0.5).unwrap();
        assert!(f.beta.abs() < 1e-6);
        assert!(!f.decaying);
    }

    #[test]
    fn nonpositive_energy_rejected() {
        let e = fit_decay_series(&[0.0, 1.0, 2.0, 3.0], &[1.0, 0.5, 0.0, 0.1], 1.0).unwrap_err();
        assert!(matches!(e, DiagnosticsError::NonPositiveEnergy { .. }));
    }

    #[test]
    fn order_needs_three_halving_steps() {
        let spec = harmonic_oscillator(0.0);
        let cfg = SchemeConfig::new(Scheme::Midpoint, 0.1);
        let s0 = planar_state(1.0, 0.0);
        let exact = |t: f64| oscillator_exact([1.0, 0.0], t).to_vec();
        let e = estimate_order(&spec, &cfg, &[0.1, 0.05], 0.0, 1.0, &s0, Reference::ClosedForm(&exact));
        assert!(matches!(e, Err(DiagnosticsError::TooFewStepSizes(2))));
        let e = estimate_order(&spec, &cfg, &[0.1, 0.05, 0.01], 0.0, 1.0, &s0, Reference::ClosedForm(&exact));
        assert!(matches!(e, Err(DiagnosticsError::NotHalving(..))));
        let bad = |_: f64| vec![f64::NAN, 0.0];
        let e = estimate_order(&spec, &cfg, &[0.2, 0.1, 0.05], 0.0, 1.0, &s0, Reference::ClosedForm(&bad));
        assert!(matches!(e, Err(DiagnosticsError::ReferenceUnavailable(_))));
    }

    #[test]
    fn midpoint_and_implicit_euler_orders() {
        let spec = harmonic_oscillator(0.0);
        let s0 = planar_state(1.0, 0.0);
        let exact = |t: f64| oscillator_exact([1.0, 0.0], t).to_vec();
        let taus = [0.2, 0.1, 0.05, 0.025];
        let mp = estimate_order(
            &spec,
            &SchemeConfig::new(Scheme::Midpoint, 0.1),
            &taus,
            0.0,
            2.0,
            &s0,
            Reference::ClosedForm(&exact),
        )
        .unwrap();
        assert!((mp.order - 2.0).abs() < 0.2, "{mp:?}");
        let ie = estimate_order(
            &spec,
            &SchemeConfig::new(Scheme::ImplicitEuler, 0.1),
            &taus,
            0.0,
            2.0,
            &s0,
            Reference::ClosedForm(&exact),
        )
        .unwrap();
        assert!((ie.order - 1.0).abs() < 0.2, "{ie:?}");
        let dg = estimate_order(
            &spec,
            &SchemeConfig::new(Scheme::DiscreteGradient(DiscreteGradientKind::Gonzalez), 0.1),
            &taus,
            0.0,
            2.0,
            &s0,
            Reference::ClosedForm(&exact),
        )
        .unwrap();
        for (a, b) in dg.errors.iter().zip(&mp.errors) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn plateau_and_boundedness() {
        let spec = harmonic_oscillator(0.5);
        let traj = simulate(&spec, &SchemeConfig::new(Scheme::Midpoint, 0.1), 0.0, 60.0, &planar_state(1.0, 0.0))
            .unwrap();
        assert!(terminal_plateau(&traj.energies, 1e-6).holds);
        assert!(boundedness(&traj, 2.0).is_bounded());
        assert_eq!(boundedness(&traj, 0.5), Boundedness::Diverged { step: 0 });
    }
}
