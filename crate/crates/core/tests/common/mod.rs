#![allow(dead_code)]

pub mod oracle;

use dpcorr::rng::rng_from_seed;
use dpcorr::DataMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

pub fn gaussian_rows(n: usize, d: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = rng_from_seed(seed);
    (0..n)
        .map(|_| (0..d).map(|_| rng.sample(StandardNormal)).collect())
        .collect()
}

pub fn matrix(rows: &[Vec<f64>]) -> DataMatrix {
    DataMatrix::from_rows(rows).unwrap()
}

pub fn to_rows(m: &DataMatrix) -> Vec<Vec<f64>> {
    m.rows().map(<[f64]>::to_vec).collect()
}

/// `Y = X A + noise` with a fixed random `A`, so X and Y are dependent.
pub fn linear_pair(n: usize, p: usize, q: usize, noise: f64, seed: u64) -> (DataMatrix, DataMatrix) {
    let x = gaussian_rows(n, p, seed);
    let a = gaussian_rows(p, q, seed ^ 0xA5A5);
    let e = gaussian_rows(n, q, seed ^ 0x5A5A);
    let y: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            (0..q)
                .map(|j| (0..p).map(|t| x[i][t] * a[t][j]).sum::<f64>() + noise * e[i][j])
                .collect()
        })
        .collect();
    (matrix(&x), matrix(&y))
}
