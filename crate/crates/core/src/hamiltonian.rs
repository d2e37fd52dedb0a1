//! Energy functions and discrete gradients.
//!
//! A [`Hamiltonian`] acts on the energy variables `x = [z1; z2]` stored
//! contiguously. The algebraic block `z3` never enters the energy.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numkit::{dot, norm2, norm_inf, sub, Matrix};

#[derive(Debug, Error, Clone, PartialEq)]
#[error("state outside the energy domain: {0}")]
pub struct DomainError(pub String);

/// Energy function on the stacked energy variables `[z1; z2]`.
pub trait Hamiltonian: Send + Sync {
    fn dim(&self) -> usize;

    fn energy(&self, x: &[f64]) -> f64;

    fn gradient(&self, x: &[f64]) -> Vec<f64>;

    /// `H(to) − H(from)`. Implementations override this with a cancellation-free
    /// formula where one exists; discrete gradients divide it by small increments.
    fn energy_difference(&self, from: &[f64], to: &[f64]) -> f64 {
        self.energy(to) - self.energy(from)
    }

    fn hessian(&self, _x: &[f64]) -> Option<Matrix> {
        None
    }

    /// True when the energy is a quadratic form (constant Hessian).
    fn is_quadratic(&self) -> bool {
        false
    }

    fn check_domain(&self, _x: &[f64]) -> Result<(), DomainError> {
        Ok(())
    }
}

impl fmt::Debug for dyn Hamiltonian {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Hamiltonian(dim = {})", self.dim())
    }
}

/// `H = ½⟨z1, M1 z1⟩ + ½⟨z2, M2 z2⟩` with symmetric positive definite blocks.
#[derive(Debug, Clone)]
pub struct QuadraticHamiltonian {
    m1: Matrix,
    m2: Matrix,
    full: Matrix,
}

impl QuadraticHamiltonian {
    pub fn new(m1: Matrix, m2: Matrix) -> Self {
        assert!(m1.is_square() && m2.is_square(), "quadratic blocks must be square");
        let full = Matrix::block_diag(&m1, &m2);
        Self { m1, m2, full }
    }

    /// `½‖z2‖²` on `n` variables.
    pub fn identity(n1: usize, n2: usize) -> Self {
        Self::new(Matrix::identity(n1), Matrix::identity(n2))
    }

    pub fn m1(&self) -> &Matrix {
        &self.m1
    }

    pub fn m2(&self) -> &Matrix {
        &self.m2
    }

    /// The block-diagonal matrix acting on `[z1; z2]`.
    pub fn matrix(&self) -> &Matrix {
        &self.full
    }
}

impl Hamiltonian for QuadraticHamiltonian {
    fn dim(&self) -> usize {
        self.full.rows()
    }

    fn energy(&self, x: &[f64]) -> f64 {
        0.5 * dot(x, &self.full.mul_vec(x))
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        self.full.mul_vec(x)
    }

    fn energy_difference(&self, from: &[f64], to: &[f64]) -> f64 {
        let d = sub(to, from);
        let s: Vec<f64> = to.iter().zip(from).map(|(a, b)| a + b).collect();
        0.5 * dot(&d, &self.full.mul_vec(&s))
    }

    fn hessian(&self, _x: &[f64]) -> Option<Matrix> {
        Some(self.full.clone())
    }

    fn is_quadratic(&self) -> bool {
        true
    }
}

type EnergyFn = dyn Fn(&[f64]) -> f64 + Send + Sync;
type GradientFn = dyn Fn(&[f64]) -> Vec<f64> + Send + Sync;

/// Closure-backed Hamiltonian. Both closures must be pure.
#[derive(Clone)]
pub struct FnHamiltonian {
    dim: usize,
    energy: Arc<EnergyFn>,
    gradient: Arc<GradientFn>,
}

impl FnHamiltonian {
    pub fn new(
        dim: usize,
        energy: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
        gradient: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
    ) -> Self {
        Self {
            dim,
            energy: Arc::new(energy),
            gradient: Arc::new(gradient),
        }
    }
}

impl Hamiltonian for FnHamiltonian {
    fn dim(&self) -> usize {
        self.dim
    }
    fn energy(&self, x: &[f64]) -> f64 {
        (self.energy)(x)
    }
    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        (self.gradient)(x)
    }
}

/// Planar pendulum `H(q, p) = p²/2 + (1 − cos q)`.
#[derive(Debug, Clone, Copy, Default)]
pub struct Pendulum;

impl Hamiltonian for Pendulum {
    fn dim(&self) -> usize {
        2
    }
    fn energy(&self, x: &[f64]) -> f64 {
        0.5 * x[1] * x[1] + (1.0 - x[0].cos())
    }
    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        vec![x[0].sin(), x[1]]
    }
    fn energy_difference(&self, from: &[f64], to: &[f64]) -> f64 {
        let (qa, qb) = (from[0], to[0]);
        // cos a − cos b = 2 sin((a+b)/2) sin((b−a)/2)
        let dcos = 2.0 * (0.5 * (qa + qb)).sin() * (0.5 * (qb - qa)).sin();
        0.5 * (to[1] - from[1]) * (to[1] + from[1]) + dcos
    }
}

/// `½ c ‖x‖²`. Used as the augmentation term of regularized systems.
#[derive(Debug, Clone, Copy)]
pub struct ScaledNorm {
    pub dim: usize,
    pub coefficient: f64,
}

impl Hamiltonian for ScaledNorm {
    fn dim(&self) -> usize {
        self.dim
    }
    fn energy(&self, x: &[f64]) -> f64 {
        0.5 * self.coefficient * dot(x, x)
    }
    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        x.iter().map(|v| self.coefficient * v).collect()
    }
    fn energy_difference(&self, from: &[f64], to: &[f64]) -> f64 {
        0.5 * self.coefficient * to.iter().zip(from).map(|(b, a)| (b - a) * (b + a)).sum::<f64>()
    }
    fn hessian(&self, _x: &[f64]) -> Option<Matrix> {
        Some(Matrix::identity(self.dim).scale(self.coefficient))
    }
    fn is_quadratic(&self) -> bool {
        true
    }
}

/// Sum of Hamiltonians, each reading a selection of the stacked variables.
#[derive(Clone)]
pub struct CompositeHamiltonian {
    dim: usize,
    parts: Vec<(Arc<dyn Hamiltonian>, Vec<usize>)>,
}

impl CompositeHamiltonian {
    /// Every index in `0..dim` must be claimed by at most one part.
    pub fn new(dim: usize, parts: Vec<(Arc<dyn Hamiltonian>, Vec<usize>)>) -> Self {
        let mut seen = vec![false; dim];
        for (h, idx) in &parts {
            assert_eq!(h.dim(), idx.len(), "part dimension does not match its index set");
            for &i in idx {
                assert!(i < dim && !seen[i], "index {i} out of range or claimed twice");
                seen[i] = true;
            }
        }
        Self { dim, parts }
    }

    fn gather(x: &[f64], idx: &[usize]) -> Vec<f64> {
        idx.iter().map(|&i| x[i]).collect()
    }
}

impl Hamiltonian for CompositeHamiltonian {
    fn dim(&self) -> usize {
        self.dim
    }

    fn energy(&self, x: &[f64]) -> f64 {
        self.parts
            .iter()
            .map(|(h, idx)| h.energy(&Self::gather(x, idx)))
            .sum()
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.dim];
        for (h, idx) in &self.parts {
            for (gi, &i) in h.gradient(&Self::gather(x, idx)).iter().zip(idx) {
                g[i] = *gi;
            }
        }
        g
    }

    fn energy_difference(&self, from: &[f64], to: &[f64]) -> f64 {
        self.parts
            .iter()
            .map(|(h, idx)| h.energy_difference(&Self::gather(from, idx), &Self::gather(to, idx)))
            .sum()
    }

    fn hessian(&self, x: &[f64]) -> Option<Matrix> {
        let mut out = Matrix::zeros(self.dim, self.dim);
        for (h, idx) in &self.parts {
            let hp = h.hessian(&Self::gather(x, idx))?;
            for (a, &i) in idx.iter().enumerate() {
                for (b, &j) in idx.iter().enumerate() {
                    out[(i, j)] = hp[(a, b)];
                }
            }
        }
        Some(out)
    }

    fn is_quadratic(&self) -> bool {
        self.parts.iter().all(|(h, _)| h.is_quadratic())
    }

    fn check_domain(&self, x: &[f64]) -> Result<(), DomainError> {
        self.parts
            .iter()
            .try_for_each(|(h, idx)| h.check_domain(&Self::gather(x, idx)))
    }
}

/// Two-point discrete gradient constructions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiscreteGradientKind {
    /// Midpoint gradient plus a rank-one correction along the increment.
    Gonzalez,
    /// Coordinate-increment divided differences, natural index order.
    ItohAbe,
}

/// Increments below this size fall back to the exact gradient.
pub const COINCIDENCE_THRESHOLD: f64 = 1e-13;

/// Discrete gradient `ḡ(za, zb)` with `⟨ḡ, zb − za⟩ = H(zb) − H(za)`.
pub fn discrete_gradient(
    h: &dyn Hamiltonian,
    kind: DiscreteGradientKind,
    za: &[f64],
    zb: &[f64],
) -> Vec<f64> {
    match kind {
        DiscreteGradientKind::Gonzalez => gonzalez(h, za, zb),
        DiscreteGradientKind::ItohAbe => itoh_abe(h, za, zb),
    }
}

fn gonzalez(h: &dyn Hamiltonian, za: &[f64], zb: &[f64]) -> Vec<f64> {
    let dz = sub(zb, za);
    let dn = norm2(&dz);
    if dn < COINCIDENCE_THRESHOLD {
        return h.gradient(za);
    }
    let mid: Vec<f64> = za.iter().zip(zb).map(|(a, b)| 0.5 * (a + b)).collect();
    let mut g = h.gradient(&mid);
    if h.is_quadratic() {
        // the correction vanishes identically
        return g;
    }
    let defect = h.energy_difference(za, zb) - dot(&g, &dz);
    let coef = defect / (dn * dn);
    for (gi, di) in g.iter_mut().zip(&dz) {
        *gi += coef * di;
    }
    g
}

fn itoh_abe(h: &dyn Hamiltonian, za: &[f64], zb: &[f64]) -> Vec<f64> {
    let n = za.len();
    let mut g = vec![0.0; n];
    let mut prev = za.to_vec();
    for i in 0..n {
        let di = zb[i] - za[i];
        if di.abs() < COINCIDENCE_THRESHOLD {
            g[i] = h.gradient(&prev)[i];
            prev[i] = zb[i];
            continue;
        }
        let mut next = prev.clone();
        next[i] = zb[i];
        g[i] = h.energy_difference(&prev, &next) / di;
        prev = next;
    }
    g
}

/// Worst observed violations of the two discrete-gradient axioms.
#[derive(Debug, Clone, Serialize)]
pub struct AxiomReport {
    pub samples: usize,
    /// max |⟨ḡ, Δz⟩ − ΔH| / (1 + |H(za)| + |H(zb)|)
    pub max_energy_violation: f64,
    /// max ‖ḡ(z, z) − ∇H(z)‖∞ / (1 + ‖∇H(z)‖∞)
    pub max_consistency_violation: f64,
    /// (increment size, max relative deviation from ∇H(za)) along random directions.
    pub limit_errors: Vec<(f64, f64)>,
}

impl AxiomReport {
    pub fn passes(&self, tol: f64) -> bool {
        self.max_energy_violation <= tol && self.max_consistency_violation <= tol
    }
}

/// Draws a point in the box `[−radius, radius]^dim` inside the energy domain.
pub fn sample_in_domain(h: &dyn Hamiltonian, rng: &mut impl Rng, radius: f64) -> Vec<f64> {
    for _ in 0..10_000 {
        let x: Vec<f64> = (0..h.dim())
            .map(|_| rng.random_range(-radius..=radius))
            .collect();
        if h.check_domain(&x).is_ok() {
            return x;
        }
    }
    panic!("could not sample a point inside the energy domain");
}

pub fn check_discrete_gradient_axioms(
    h: &dyn Hamiltonian,
    kind: DiscreteGradientKind,
    samples: usize,
    seed: u64,
) -> AxiomReport {
    check_axioms_with(h, &|a, b| discrete_gradient(h, kind, a, b), samples, seed)
}

/// Randomized probe of both axioms for an arbitrary two-point map.
pub fn check_axioms_with(
    h: &dyn Hamiltonian,
    dg: &dyn Fn(&[f64], &[f64]) -> Vec<f64>,
    samples: usize,
    seed: u64,
) -> AxiomReport {
    assert!(samples >= 1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut max_energy: f64 = 0.0;
    let mut max_consistency: f64 = 0.0;
    for _ in 0..samples {
        let za = sample_in_domain(h, &mut rng, 1.0);
        let zb = sample_in_domain(h, &mut rng, 1.0);
        let g = dg(&za, &zb);
        let (ha, hb) = (h.energy(&za), h.energy(&zb));
        let viol = (dot(&g, &sub(&zb, &za)) - (hb - ha)).abs() / (1.0 + ha.abs() + hb.abs());
        max_energy = max_energy.max(viol);

        let exact = h.gradient(&za);
        let same = dg(&za, &za);
        let cons = norm_inf(&sub(&same, &exact)) / (1.0 + norm_inf(&exact));
        max_consistency = max_consistency.max(cons);
    }

    let probes = samples.min(50);
    let limit_errors = [1e-6, 1e-8]
        .iter()
        .map(|&delta| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
            let mut worst: f64 = 0.0;
            for _ in 0..probes {
                let z = sample_in_domain(h, &mut rng, 0.9);
                let dir: Vec<f64> = (0..h.dim()).map(|_| rng.random_range(-1.0..=1.0)).collect();
                let dn = norm2(&dir).max(f64::MIN_POSITIVE);
                let zb: Vec<f64> = z.iter().zip(&dir).map(|(a, d)| a + delta * d / dn).collect();
                let exact = h.gradient(&z);
                let err = norm_inf(&sub(&dg(&z, &zb), &exact)) / (1.0 + norm_inf(&exact));
                worst = worst.max(err);
            }
            (delta, worst)
        })
        .collect();

    AxiomReport {
        samples,
        max_energy_violation: max_energy,
        max_consistency_violation: max_consistency,
        limit_errors,
    }
}

/// Lower coercivity constants `c1‖z1‖² ≤ ⟨z1, ∂z1H⟩`, `c2‖z2‖² ≤ ⟨z2, ∂z2H⟩`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct CoercivityConstants {
    pub c1: f64,
    pub c2: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CoercivityReport {
    pub samples: usize,
    pub violations: usize,
    /// Largest `c‖z‖² − ⟨z, ∂H⟩` seen over both blocks (positive means violated).
    pub worst_gap: f64,
    pub worst_point: Option<Vec<f64>>,
}

impl CoercivityReport {
    pub fn holds(&self) -> bool {
        self.violations == 0
    }
}

/// Samples the ball of the given radius and reports coercivity failures.
/// `n1` splits the energy variables into the `z1` and `z2` blocks.
pub fn check_coercivity(
    h: &dyn Hamiltonian,
    n1: usize,
    c: CoercivityConstants,
    samples: usize,
    radius: f64,
    seed: u64,
) -> CoercivityReport {
    assert!(samples >= 1 && radius > 0.0 && n1 <= h.dim());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut violations = 0;
    let mut worst_gap = f64::NEG_INFINITY;
    let mut worst_point = None;
    for _ in 0..samples {
        let z = loop {
            let z = sample_in_domain(h, &mut rng, radius);
            if norm2(&z) <= radius {
                break z;
            }
        };
        let g = h.gradient(&z);
        let (z1, z2) = z.split_at(n1);
        let (g1, g2) = g.split_at(n1);
        let gap1 = c.c1 * dot(z1, z1) - dot(z1, g1);
        let gap2 = c.c2 * dot(z2, z2) - dot(z2, g2);
        let gap = gap1.max(gap2);
        let scale = 1e-12 * (1.0 + dot(&z, &z));
        if gap > scale {
            violations += 1;
        }
        if gap > worst_gap {
            worst_gap = gap;
            worst_point = Some(z);
        }
    }
    CoercivityReport {
        samples,
        violations,
        worst_gap,
        worst_point,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn product() -> FnHamiltonian {
        FnHamiltonian::new(2, |x| x[0] * x[1], |x| vec![x[1], x[0]])
    }

    #[test]
    fn gonzalez_quadratic_is_midpoint_gradient() {
        let h = QuadraticHamiltonian::identity(1, 1);
        let g = discrete_gradient(&h, DiscreteGradientKind::Gonzalez, &[1.0, 0.0], &[3.0, 0.0]);
        assert_eq!(g, vec![2.0, 0.0]);
    }

    #[test]
    fn itoh_abe_product_divided_differences() {
        let g = discrete_gradient(&product(), DiscreteGradientKind::ItohAbe, &[1.0, 2.0], &[3.0, 4.0]);
        assert!((g[0] - 2.0).abs() < 1e-14);
        assert!((g[1] - 3.0).abs() < 1e-14);
    }

    #[test]
    fn coincident_points_give_exact_gradient() {
        let z = [0.3, -0.7];
        for kind in [DiscreteGradientKind::Gonzalez, DiscreteGradientKind::ItohAbe] {
            assert_eq!(discrete_gradient(&Pendulum, kind, &z, &z), Pendulum.gradient(&z));
        }
    }

    #[test]
    fn pendulum_energy_identity() {
        let r = check_discrete_gradient_axioms(&Pendulum, DiscreteGradientKind::Gonzalez, 1000, 7);
        assert!(r.max_energy_violation <= 1e-10, "{r:?}");
    }

    #[test]
    fn broken_discrete_gradient_is_reported() {
        let h = QuadraticHamiltonian::identity(0, 2);
        let broken = |a: &[f64], b: &[f64]| {
            discrete_gradient(&h, DiscreteGradientKind::Gonzalez, a, b)
                .into_iter()
                .map(|g| g + 0.1)
                .collect::<Vec<_>>()
        };
        let r = check_axioms_with(&h, &broken, 200, 3);
        assert!(r.max_energy_violation > 1e-2, "{r:?}");
        assert!(r.max_consistency_violation > 1e-2);
    }

    #[test]
    fn coercivity_quadratic() {
        let h = QuadraticHamiltonian::new(Matrix::identity(2).scale(2.0), Matrix::identity(1));
        let ok = check_coercivity(&h, 2, CoercivityConstants { c1: 2.0, c2: 1.0 }, 500, 3.0, 1);
        assert!(ok.holds(), "{ok:?}");
        let bad = check_coercivity(&h, 2, CoercivityConstants { c1: 2.5, c2: 1.0 }, 500, 3.0, 1);
        assert!(!bad.holds());
    }

    #[test]
    fn coercivity_double_well_fails_near_wells() {
        // u·W'(u) − c1 u² = u⁴ − (1 + c1) u² < 0 for 0 < |u| < sqrt(1 + c1)
        let w = FnHamiltonian::new(
            1,
            |x| 0.25 * (x[0] * x[0] - 1.0).powi(2),
            |x| vec![x[0] * (x[0] * x[0] - 1.0)],
        );
        let c1 = 0.5;
        let scan_violates = (1..200).map(|k| -2.0 + 4.0 * k as f64 / 200.0).any(|u: f64| {
            u.powi(4) - (1.0 + c1) * u * u < 0.0
        });
        assert!(scan_violates);
        let r = check_coercivity(&w, 1, CoercivityConstants { c1, c2: 1.0 }, 500, 2.0, 9);
        assert!(!r.holds());
        let p = r.worst_point.unwrap();
        assert!(p[0].abs() < (1.0 + c1).sqrt());
    }

    #[test]
    fn composite_sums_parts() {
        let a: Arc<dyn Hamiltonian> = Arc::new(Pendulum);
        let b: Arc<dyn Hamiltonian> = Arc::new(ScaledNorm { dim: 1, coefficient: 4.0 });
        let c = CompositeHamiltonian::new(3, vec![(a, vec![0, 2]), (b, vec![1])]);
        let x = [0.5, 2.0, -1.0];
        let expected = Pendulum.energy(&[0.5, -1.0]) + 8.0;
        assert!((c.energy(&x) - expected).abs() < 1e-14);
        let g = c.gradient(&x);
        assert!((g[1] - 8.0).abs() < 1e-14);
        assert!((g[0] - 0.5_f64.sin()).abs() < 1e-14);
        assert!(c.hessian(&x).is_none());
        assert!(!c.is_quadratic());
    }
}
