//! Dense linear algebra checked against nalgebra.

use nalgebra::DMatrix;
use phdae::numkit::{expm, lu_solve, rank, symmetric_eigenvalues, Matrix};
use proptest::prelude::*;

fn to_na(m: &Matrix) -> DMatrix<f64> {
    DMatrix::from_fn(m.rows(), m.cols(), |i, j| m[(i, j)])
}

fn square(max: usize) -> impl Strategy<Value = Matrix> {
    (1..=max).prop_flat_map(|n| {
        prop::collection::vec(-2.0..2.0f64, n * n).prop_map(move |d| Matrix::from_row_major(n, n, d))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn eigenvalues_match(a in square(6)) {
        let s = a.symmetric_part();
        let mut ours = symmetric_eigenvalues(&s).unwrap();
        ours.sort_by(|x, y| x.partial_cmp(y).unwrap());
        let mut theirs: Vec<f64> = to_na(&s).symmetric_eigenvalues().iter().cloned().collect();
        theirs.sort_by(|x, y| x.partial_cmp(y).unwrap());
        for (x, y) in ours.iter().zip(&theirs) {
            prop_assert!((x - y).abs() <= 1e-10 * (1.0 + y.abs()), "{ours:?} vs {theirs:?}");
        }
    }

    #[test]
    fn expm_matches(a in square(5)) {
        let ours = expm(&a.scale(0.7));
        let theirs = to_na(&a.scale(0.7)).exp();
        let scale = theirs.amax().max(1.0);
        for i in 0..a.rows() {
            for j in 0..a.cols() {
                prop_assert!((ours[(i, j)] - theirs[(i, j)]).abs() <= 1e-10 * scale);
            }
        }
    }

    #[test]
    fn lu_solve_matches(a in square(6), seed in 0u64..1000) {
        let n = a.rows();
        let shifted = a.add(&Matrix::identity(n).scale(5.0));
        let b: Vec<f64> = (0..n).map(|i| ((i as u64 + seed) as f64).sin()).collect();
        let ours = lu_solve(&shifted, &b).unwrap();
        let theirs = to_na(&shifted).lu().solve(&nalgebra::DVector::from_vec(b.clone())).unwrap();
        for (x, y) in ours.iter().zip(theirs.iter()) {
            prop_assert!((x - y).abs() <= 1e-10 * (1.0 + y.abs()));
        }
    }

    #[test]
    fn rank_matches_svd(rows in 1usize..5, inner in 1usize..4, cols in 1usize..5, d in prop::collection::vec(-1.0..1.0f64, 40)) {
        let l = Matrix::from_row_major(rows, inner, d[..rows * inner].to_vec());
        let r = Matrix::from_row_major(inner, cols, d[20..20 + inner * cols].to_vec());
        let a = l.matmul(&r);
        let sv = to_na(&a).singular_values();
        let tol = 1e-9 * sv.max().max(1e-300);
        let expected = sv.iter().filter(|s| **s > tol).count();
        prop_assert_eq!(rank(&a, 1e-12), expected);
    }
}

#[test]
fn inverse_times_matrix_is_identity() {
    let a = Matrix::from_row_major(3, 3, vec![4.0, 1.0, 0.5, 1.0, 3.0, -1.0, 0.5, -1.0, 2.0]);
    let inv = a.inverse().unwrap();
    let theirs = to_na(&a).try_inverse().unwrap();
    for i in 0..3 {
        for j in 0..3 {
            assert!((inv[(i, j)] - theirs[(i, j)]).abs() < 1e-13);
        }
    }
}
