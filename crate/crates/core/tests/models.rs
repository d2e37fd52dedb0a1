//! Model-level properties checked against independent linear-algebra oracles.

mod common;

use nalgebra::DMatrix;
use phdae::diagnostics::fit_decay_rate;
use phdae::hamiltonian::QuadraticHamiltonian;
use phdae::models::circuit::CircuitParams;
use phdae::models::mechanical::MechanicalParams;
use phdae::models::poroelastic::{consistent_state, coupled_example};
use phdae::models::quantum::{make_quantum_thermo_dae, QuantumThermoParams};
use phdae::models::{
    make_cahn_hilliard_1d, make_circuit, make_mechanical, make_poroelastic, make_quantum_thermo,
    CahnHilliard1DParams, PoroelasticParams,
};
use phdae::system::validate_structure;
use phdae::transforms::{regularize, RegularizationConfig};
use phdae::{simulate, DiscreteGradientKind, InputSignal, Matrix, Scheme, SchemeConfig, State, SystemSpec};

const GONZALEZ: Scheme = Scheme::DiscreteGradient(DiscreteGradientKind::Gonzalez);

fn to_na(m: &Matrix) -> DMatrix<f64> {
    DMatrix::from_fn(m.rows(), m.cols(), |i, j| m[(i, j)])
}

#[test]
fn every_constructor_validates() {
    let specs: Vec<SystemSpec> = vec![
        make_poroelastic(&PoroelasticParams::default()).unwrap(),
        make_poroelastic(&coupled_example()).unwrap(),
        make_circuit(&CircuitParams::default()).unwrap(),
        make_circuit(&CircuitParams::lc_loop(1.0, 2.0)).unwrap(),
        make_mechanical(&MechanicalParams::default()).unwrap(),
        make_cahn_hilliard_1d(&CahnHilliard1DParams::default()).unwrap(),
        make_quantum_thermo(&QuantumThermoParams::default()).unwrap(),
        make_quantum_thermo_dae(&QuantumThermoParams::default(), InputSignal::zero(1)).unwrap(),
    ];
    for s in &specs {
        assert!(validate_structure(&s.structure).is_valid(), "{s:?}");
    }
}

/// `exp(t (J − R) Q) z0` for an ODE system with quadratic energy `½⟨z, Q z⟩`.
fn linear_flow(spec: &SystemSpec, q: &Matrix, z0: &[f64], t: f64) -> Vec<f64> {
    let a = to_na(&spec.structure.j_minus_r()) * to_na(q);
    let e = (a * t).exp();
    (e * nalgebra::DVector::from_column_slice(z0)).iter().cloned().collect()
}

fn midpoint_ratios(spec: &SystemSpec, s0: &State, exact: &[f64], t_end: f64) -> Vec<f64> {
    let errs: Vec<f64> = [0.1, 0.05, 0.025]
        .iter()
        .map(|&tau| {
            let traj = simulate(spec, &SchemeConfig::new(Scheme::Midpoint, tau), 0.0, t_end, s0).unwrap();
            common::max_abs_diff(traj.final_state().as_slice(), exact)
        })
        .collect();
    errs.windows(2).map(|w| w[0] / w[1]).collect()
}

#[test]
fn mechanical_midpoint_matches_matrix_exponential_at_order_two() {
    let p = MechanicalParams {
        bc: Matrix::zeros(0, 2),
        g: InputSignal::zero(0),
        ..MechanicalParams::default()
    };
    let spec = make_mechanical(&p).unwrap();
    let s0 = p.state(&[1.0, -0.5], &[0.3, 0.0], &[]);
    let q = Matrix::block_diag(&p.k.inverse().unwrap(), &p.m.inverse().unwrap());
    let exact = linear_flow(&spec, &q, s0.as_slice(), 3.0);
    for r in midpoint_ratios(&spec, &s0, &exact, 3.0) {
        assert!((r - 4.0).abs() <= 0.5, "ratio {r}");
    }
}

#[test]
fn poroelastic_midpoint_matches_matrix_exponential_at_order_two() {
    let p = coupled_example();
    let spec = make_poroelastic(&p).unwrap();
    let p0 = [1.0, -0.5];
    let s0 = consistent_state(&p, &p0, 0.0).unwrap();
    // p' = −(C + D A⁻¹ Dᵀ)⁻¹ B_flow p and u = A⁻¹ Dᵀ p
    let a_inv = to_na(&p.a).try_inverse().unwrap();
    let d = to_na(&p.d);
    let s = to_na(&p.c) + &d * &a_inv * d.transpose();
    let g = -s.try_inverse().unwrap() * to_na(&p.b_flow);
    let t_end = 2.0;
    let pt = (g * t_end).exp() * nalgebra::DVector::from_column_slice(&p0);
    let ut = &a_inv * d.transpose() * &pt;
    let z2 = to_na(&p.c) * &pt;
    let exact: Vec<f64> = ut.iter().chain(z2.iter()).cloned().collect();
    for r in midpoint_ratios(&spec, &s0, &exact, t_end) {
        assert!((r - 4.0).abs() <= 0.5, "ratio {r}");
    }
}

#[test]
fn regularized_damped_mechanical_decays_at_the_eigenvalue_rate() {
    let p = MechanicalParams {
        d: Matrix::from_diagonal(&[0.2, 0.3]),
        ..MechanicalParams::default()
    };
    let eps = 1e-2;
    let spec = regularize(&make_mechanical(&p).unwrap(), RegularizationConfig { epsilon: eps }).unwrap();
    let info = spec.regularization.unwrap();
    // ζ − B_c x is conserved; start on its zero level so that H decays to zero.
    let s0 = info.lift(&p.state(&[1.0, 1.0], &[0.0, 0.0], &[0.0]));
    let traj = simulate(&spec, &SchemeConfig::new(GONZALEZ, 0.01), 0.0, 120.0, &s0).unwrap();
    let fit = fit_decay_rate(&traj, 0.5).unwrap();

    let q = Matrix::block_diag(
        &Matrix::block_diag(&p.k.inverse().unwrap(), &p.m.inverse().unwrap()),
        &Matrix::from_diagonal(&[1.0 / eps]),
    );
    let a = to_na(&spec.structure.j_minus_r()) * to_na(&q);
    let oracle = 2.0
        * a.complex_eigenvalues()
            .iter()
            .filter(|z| z.norm() > 1e-9)
            .map(|z| z.re.abs())
            .fold(f64::INFINITY, f64::min);
    assert!((fit.beta - oracle).abs() <= 0.05 * oracle, "{} vs {oracle}", fit.beta);
}

#[test]
fn quadratic_energy_of_mechanical_model() {
    let p = MechanicalParams::default();
    let spec = make_mechanical(&p).unwrap();
    let s = p.state(&[0.4, -0.2], &[1.0, 0.5], &[3.0]);
    let x = [0.4, -0.2];
    let y = [1.0, 0.5];
    let h = QuadraticHamiltonian::new(Matrix::zeros(0, 0), Matrix::block_diag(&p.k, &p.m));
    let direct = phdae::Hamiltonian::energy(&h, &[x.to_vec(), y.to_vec()].concat());
    assert!((spec.energy(&s) - direct).abs() < 1e-14);
}
