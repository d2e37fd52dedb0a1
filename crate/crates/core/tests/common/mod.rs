#![allow(dead_code)]

use std::sync::Arc;

use phdae::hamiltonian::QuadraticHamiltonian;
use phdae::transforms::CouplingMatrices;
use phdae::{InputSignal, Matrix, StatePartition, StructureMatrices, SystemSpec};
use rand::{Rng, RngCore};

pub fn random_matrix(rng: &mut impl RngCore, rows: usize, cols: usize, scale: f64) -> Matrix {
    let data = (0..rows * cols).map(|_| rng.random_range(-scale..=scale)).collect();
    Matrix::from_row_major(rows, cols, data)
}

pub fn random_skew(rng: &mut impl RngCore, n: usize) -> Matrix {
    let a = random_matrix(rng, n, n, 1.0);
    a.sub(&a.transpose()).scale(0.5)
}

/// `L Lᵀ` with `L` of size `n × rank`.
pub fn random_psd(rng: &mut impl RngCore, n: usize, rank: usize) -> Matrix {
    let l = random_matrix(rng, n, rank, 1.0);
    l.matmul(&l.transpose()).symmetric_part()
}

pub fn random_spd(rng: &mut impl RngCore, n: usize) -> Matrix {
    random_psd(rng, n, n).add(&Matrix::identity(n).scale(0.5))
}

/// Quadratic-energy system with the given partition, random structure and `m` ports.
pub fn random_system(rng: &mut impl RngCore, p: StatePartition, m: usize) -> SystemSpec {
    let n = p.n();
    let rank = rng.random_range(0..=n);
    let j = random_skew(rng, n);
    let r = random_psd(rng, n, rank);
    let b = random_matrix(rng, n, m, 1.0);
    let h = QuadraticHamiltonian::new(random_spd(rng, p.n1), random_spd(rng, p.n2));
    let input = if m == 0 {
        InputSignal::zero(0)
    } else {
        let phase: Vec<f64> = (0..m).map(|_| rng.random_range(0.0..6.0)).collect();
        InputSignal::new(m, move |t| phase.iter().map(|ph| (t + ph).sin()).collect())
    };
    SystemSpec::new(p, StructureMatrices::new(j, r, b), Arc::new(h), input).expect("random system is valid")
}

pub fn random_partition(rng: &mut impl RngCore, max: usize) -> StatePartition {
    loop {
        let n1 = rng.random_range(0..=max);
        let n2 = rng.random_range(0..=max);
        let n3 = rng.random_range(0..=max);
        if let Ok(p) = StatePartition::new(n1, n2, n3) {
            return p;
        }
    }
}

pub fn random_coupling(rng: &mut impl RngCore, m: usize) -> CouplingMatrices {
    let rank = rng.random_range(0..=m);
    CouplingMatrices::new(random_skew(rng, m), random_psd(rng, m, rank)).expect("random coupling is valid")
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
