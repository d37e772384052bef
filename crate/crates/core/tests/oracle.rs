mod common;

use common::oracle::*;
use common::{gaussian_rows, matrix};
use dpcorr::bounds::decomposition_terms;
use dpcorr::{
    hsic, projection_constant, sample_unit_projections, unbiased_dcov, KernelMatrix, SquareMatrix,
};

#[test]
fn dcov_oracle_examples() {
    let constant = vec![vec![2.0]; 6];
    let y = gaussian_rows(6, 2, 1);
    assert_eq!(oracle_dcov(&constant, &y), 0.0);

    let line: Vec<Vec<f64>> = (0..5).map(|i| vec![i as f64]).collect();
    let core = unbiased_dcov(&matrix(&line), &matrix(&line)).unwrap();
    assert!((oracle_dcov(&line, &line) - core).abs() < 1e-12);
}

#[test]
fn hsic_oracle_examples() {
    let eye = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
    assert!((oracle_hsic(&eye, &eye) - 1.0).abs() < 1e-15);
    let flat = vec![vec![3.0; 5]; 5];
    let other: Vec<Vec<f64>> = (0..5).map(|i| (0..5).map(|j| (i * j) as f64).collect()).collect();
    assert!(oracle_hsic(&flat, &other).abs() < 1e-12);
}

#[test]
fn residual_oracle_examples() {
    let y = gaussian_rows(8, 2, 3);
    let v = [0.6, 0.8];
    assert_eq!(oracle_residual_term(&[0.0; 8], &y, &v, 2, 3), 0.0);

    let noise: Vec<f64> = gaussian_rows(8, 1, 4).into_iter().map(|r| r[0]).collect();
    let doubled: Vec<f64> = noise.iter().map(|v| 2.0 * v).collect();
    let a = oracle_residual_term(&noise, &y, &v, 2, 3);
    let b = oracle_residual_term(&doubled, &y, &v, 2, 3);
    assert!((b - 2.0 * a).abs() < 1e-12 * b.abs());
}

#[test]
fn gamma_closed_forms() {
    let sqrt_pi = std::f64::consts::PI.sqrt();
    assert_eq!(gamma_half(2), 1.0);
    assert!((gamma_half(1) - sqrt_pi).abs() < 1e-15);
    assert!((gamma_half(3) - sqrt_pi / 2.0).abs() < 1e-15);
    assert_eq!(gamma_half(10), 24.0);
    for p in 1..=40 {
        let core = projection_constant(p).unwrap();
        assert!((core / oracle_projection_constant(p) - 1.0).abs() < 1e-12);
    }
}

#[test]
fn oracles_agree_with_core() {
    for seed in 0..40u64 {
        let n = 4 + seed as usize % 17;
        let xr = gaussian_rows(n, 1 + seed as usize % 3, seed);
        let yr = gaussian_rows(n, 1 + seed as usize % 2, seed + 500);
        let core = unbiased_dcov(&matrix(&xr), &matrix(&yr)).unwrap();
        assert!((core - oracle_dcov(&xr, &yr)).abs() < 1e-10);

        let k: Vec<Vec<f64>> = (0..n)
            .map(|i| (0..n).map(|j| (xr[i][0] * xr[j][0]).exp().min(50.0)).collect())
            .collect();
        let l: Vec<Vec<f64>> = (0..n)
            .map(|i| (0..n).map(|j| -(yr[i][0] - yr[j][0]).abs()).collect())
            .collect();
        let km = KernelMatrix::try_from_matrix(SquareMatrix::from_fn(n, |i, j| k[i][j])).unwrap();
        let lm = KernelMatrix::try_from_matrix(SquareMatrix::from_fn(n, |i, j| l[i][j])).unwrap();
        assert!((hsic(&km, &lm).unwrap() - oracle_hsic(&k, &l)).abs() < 1e-10);
    }
}

#[test]
fn residual_oracle_matches_decomposition_small_n() {
    for n in 4..=20 {
        let yr = gaussian_rows(n, 2, n as u64);
        let vy = sample_unit_projections(2, 2, n as u64 + 1).unwrap();
        let noise: Vec<Vec<f64>> = (0..2)
            .map(|j| gaussian_rows(n, 1, 100 * n as u64 + j).into_iter().map(|r| r[0]).collect())
            .collect();
        let terms = decomposition_terms(&noise, &matrix(&yr), &vy, 3).unwrap();
        for (j, e) in noise.iter().enumerate() {
            let o = oracle_residual_term(e, &yr, vy.direction(j), 3, 2);
            assert!((terms.per_projection_residual[j] - o).abs() < 1e-10);
        }
    }
}
