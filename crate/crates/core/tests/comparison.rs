//! Scheme comparison on the quantum-thermodynamic model.

use phdae::diagnostics::{table1_comparison, table1_from, table1_with_schemes, TABLE1_SCHEMES};
use phdae::models::quantum::QuantumThermoParams;
use phdae::{DiscreteGradientKind, Scheme};

const GONZALEZ: Scheme = Scheme::DiscreteGradient(DiscreteGradientKind::Gonzalez);

#[test]
fn structure_preserving_beats_explicit_euler_by_ten() {
    let t = table1_comparison(&QuantumThermoParams::default(), 0.1, 100.0).unwrap();
    assert!(t.ordering_holds(), "{t:#?}");
    let sp = t.row(GONZALEZ).unwrap().energy_balance_error;
    let ee = t.row(Scheme::ExplicitEuler).unwrap().energy_balance_error;
    assert!(10.0 * sp <= ee);
    assert_eq!(t.rows.len(), TABLE1_SCHEMES.len());
    assert!(t.row(GONZALEZ).unwrap().max_probability_violation <= 10.0 * t.epsilon);
}

#[test]
fn halving_epsilon_halves_probability_violation() {
    let viol = |eps: f64| {
        let p = QuantumThermoParams {
            epsilon_reg: eps,
            ..Default::default()
        };
        table1_with_schemes(&p, 0.1, 20.0, &[GONZALEZ]).unwrap().rows[0].max_probability_violation
    };
    let ratio = viol(1e-3) / viol(5e-4);
    assert!((ratio - 2.0).abs() <= 0.3, "ratio {ratio}");
}

#[test]
fn halving_tau_quarters_structure_preserving_energy_error() {
    let p = QuantumThermoParams::default();
    let err = |tau: f64| table1_with_schemes(&p, tau, 20.0, &[GONZALEZ]).unwrap().rows[0].energy_error_vs_reference;
    let ratio = err(0.05) / err(0.025);
    assert!((ratio - 4.0).abs() <= 0.5, "ratio {ratio}");
}

#[test]
fn consistent_start_has_no_probability_drift() {
    let p = QuantumThermoParams::default();
    let t = table1_from(&p, &p.consistent_state(), 0.1, 20.0, &[GONZALEZ]).unwrap();
    assert!(t.rows[0].max_probability_violation < 1e-12);
}

#[test]
fn explicit_euler_diverges_on_the_stiff_multiplier() {
    use phdae::integrators::IntegratorError;
    use phdae::models::make_quantum_thermo;
    use phdae::{simulate, SchemeConfig};

    let p = QuantumThermoParams::default();
    let spec = make_quantum_thermo(&p).unwrap();
    let e = simulate(&spec, &SchemeConfig::new(Scheme::ExplicitEuler, 0.05), 0.0, 100.0, &p.default_state())
        .unwrap_err();
    assert!(matches!(e.error, IntegratorError::NonFinite { .. }), "{:?}", e.error);
    let h = &e.trajectory.energies;
    assert!(h[h.len() - 1] > 1e100 * h[0]);
}
