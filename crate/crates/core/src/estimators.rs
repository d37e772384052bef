//! Non-private distance covariance estimators, random projections, HSIC and
//! the induced-kernel bridge between distance and kernel statistics.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::data::{DataMatrix, DistanceMatrix, KernelMatrix, SquareMatrix};
use crate::error::{Error, Result};
use crate::privacy::PrivacyBudget;
use crate::rng::rng_from_seed;

/// Smallest sample size the unbiased estimator admits.
pub const MIN_SAMPLES: usize = 4;

/// Largest dimension for which [`projection_constant`] uses the exact
/// two-step recurrence; larger dimensions go through `ln Γ`.
const RECURRENCE_LIMIT: usize = 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EstimateKind {
    Unbiased,
    Projected,
    HsicEquivalent,
    PrivateRepeated,
    PrivateDisjoint,
    PrivateDvar,
}

impl EstimateKind {
    pub fn is_private(self) -> bool {
        matches!(
            self,
            EstimateKind::PrivateRepeated | EstimateKind::PrivateDisjoint | EstimateKind::PrivateDvar
        )
    }
}

/// A dcov/dvar/dcorr value annotated with how it was produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateRecord {
    pub value: f64,
    pub kind: EstimateKind,
    /// Projection count, 0 for estimators that do not project.
    pub k: usize,
    pub seeds: Vec<u64>,
    /// Consumed budget; `None` for non-private kinds.
    pub budget: Option<PrivacyBudget>,
}

impl EstimateRecord {
    pub fn non_private(value: f64, kind: EstimateKind, k: usize, seeds: Vec<u64>) -> Self {
        debug_assert!(!kind.is_private());
        Self {
            value,
            kind,
            k,
            seeds,
            budget: None,
        }
    }
}

fn check_finite(m: &DataMatrix) -> Result<()> {
    // DataMatrix already guarantees this; kept for matrices built in-crate.
    if m.values().iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::InvalidInput("non-finite entry".into()))
    }
}

/// Pairwise Euclidean distances between rows.
pub fn pairwise_distances(m: &DataMatrix) -> Result<DistanceMatrix> {
    check_finite(m)?;
    let n = m.n();
    if m.d() == 1 {
        return Ok(univariate_distances(m.values()));
    }
    let mut entries = vec![0.0; n * n];
    for i in 0..n {
        let ri = m.row(i);
        for j in (i + 1)..n {
            let dist = ri
                .iter()
                .zip(m.row(j))
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            entries[i * n + j] = dist;
            entries[j * n + i] = dist;
        }
    }
    Ok(DistanceMatrix(SquareMatrix::from_vec(n, entries)?))
}

/// `|z_i - z_j|` for a univariate sample.
pub(crate) fn univariate_distances(z: &[f64]) -> DistanceMatrix {
    let n = z.len();
    let mut entries = vec![0.0; n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            let dist = (z[i] - z[j]).abs();
            entries[i * n + j] = dist;
            entries[j * n + i] = dist;
        }
    }
    DistanceMatrix(SquareMatrix { entries, m: n })
}

/// Unbiased distance covariance from two distance matrices of equal size.
pub(crate) fn dcov_from_distances(a: &DistanceMatrix, b: &DistanceMatrix) -> f64 {
    let n = a.size();
    let (a, b) = (a.as_matrix(), b.as_matrix());
    let mut cross = 0.0;
    let mut marginal = 0.0;
    let mut a_total = 0.0;
    let mut b_total = 0.0;
    for i in 0..n {
        let (ra, rb) = (a.row(i), b.row(i));
        let mut a_row = 0.0;
        let mut b_row = 0.0;
        for (x, y) in ra.iter().zip(rb) {
            cross += x * y;
            a_row += x;
            b_row += y;
        }
        marginal += a_row * b_row;
        a_total += a_row;
        b_total += b_row;
    }
    let nf = n as f64;
    cross / (nf * (nf - 3.0)) - 2.0 * marginal / (nf * (nf - 2.0) * (nf - 3.0))
        + a_total * b_total / (nf * (nf - 1.0) * (nf - 2.0) * (nf - 3.0))
}

fn check_pair(x: &DataMatrix, y: &DataMatrix) -> Result<()> {
    if x.n() != y.n() {
        return Err(Error::Shape(format!(
            "row counts differ: {} vs {}",
            x.n(),
            y.n()
        )));
    }
    if x.n() < MIN_SAMPLES {
        return Err(Error::SampleSize {
            n: x.n(),
            min: MIN_SAMPLES,
        });
    }
    Ok(())
}

/// Unbiased (U-statistic) distance covariance. May be negative on finite samples.
pub fn unbiased_dcov(x: &DataMatrix, y: &DataMatrix) -> Result<f64> {
    check_pair(x, y)?;
    let a = pairwise_distances(x)?;
    let b = pairwise_distances(y)?;
    Ok(dcov_from_distances(&a, &b))
}

/// Distance correlation ratio; 0 whenever the variance product is not positive.
pub fn unbiased_dcorr(x: &DataMatrix, y: &DataMatrix) -> Result<f64> {
    check_pair(x, y)?;
    let a = pairwise_distances(x)?;
    let b = pairwise_distances(y)?;
    let cov = dcov_from_distances(&a, &b);
    let var_x = dcov_from_distances(&a, &a);
    let var_y = dcov_from_distances(&b, &b);
    Ok(dcorr_ratio(cov, var_x, var_y))
}

pub(crate) fn dcorr_ratio(cov: f64, var_x: f64, var_y: f64) -> f64 {
    let prod = var_x * var_y;
    if prod > 0.0 {
        cov / prod.sqrt()
    } else {
        0.0
    }
}

/// `C_p = sqrt(pi) Γ((p+1)/2) / Γ(p/2)`, the constant that makes a
/// one-dimensional projection of a `p`-dimensional distance unbiased.
pub fn projection_constant(p: usize) -> Result<f64> {
    if p == 0 {
        return Err(Error::Domain("projection constant needs p >= 1".into()));
    }
    if p <= RECURRENCE_LIMIT {
        // C_{p+2} = C_p (p+1)/p, seeded with C_1 = 1 and C_2 = pi/2.
        let (mut c, mut q) = if p % 2 == 1 { (1.0, 1) } else { (PI / 2.0, 2) };
        while q < p {
            c *= (q + 1) as f64 / q as f64;
            q += 2;
        }
        return Ok(c);
    }
    let pf = p as f64;
    let log_ratio = statrs::function::gamma::ln_gamma((pf + 1.0) / 2.0)
        - statrs::function::gamma::ln_gamma(pf / 2.0);
    Ok(PI.sqrt() * log_ratio.exp())
}

/// `K` directions on the unit sphere in `dim` dimensions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectionSet {
    directions: Vec<Vec<f64>>,
    dim: usize,
    seed: u64,
}

impl ProjectionSet {
    /// Builds a set from explicit directions; each must have unit norm.
    pub fn from_directions(directions: Vec<Vec<f64>>, seed: u64) -> Result<Self> {
        let dim = directions
            .first()
            .map(Vec::len)
            .ok_or_else(|| Error::Config("projection set needs K >= 1".into()))?;
        if dim == 0 {
            return Err(Error::Domain("direction dimension must be >= 1".into()));
        }
        for (k, u) in directions.iter().enumerate() {
            if u.len() != dim {
                return Err(Error::Shape(format!("direction {k} has length {}", u.len())));
            }
            let norm = u.iter().map(|v| v * v).sum::<f64>().sqrt();
            if (norm - 1.0).abs() > 1e-12 {
                return Err(Error::InvalidInput(format!(
                    "direction {k} has norm {norm}, expected 1"
                )));
            }
        }
        Ok(Self {
            directions,
            dim,
            seed,
        })
    }

    pub fn directions(&self) -> &[Vec<f64>] {
        &self.directions
    }

    pub fn direction(&self, k: usize) -> &[f64] {
        &self.directions[k]
    }

    pub fn k(&self) -> usize {
        self.directions.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Rows of the `dim x K` matrix whose columns are the directions.
    pub fn as_matrix_rows(&self) -> Vec<Vec<f64>> {
        (0..self.dim)
            .map(|i| self.directions.iter().map(|u| u[i]).collect())
            .collect()
    }
}

/// Samples `k` directions uniformly on `S^{dim-1}` by normalizing standard
/// normal vectors.
pub fn sample_unit_projections(dim: usize, k: usize, seed: u64) -> Result<ProjectionSet> {
    if dim == 0 {
        return Err(Error::Domain("projection dimension must be >= 1".into()));
    }
    if k == 0 {
        return Err(Error::Config("projection count K must be >= 1".into()));
    }
    let mut rng = rng_from_seed(seed);
    let mut directions = Vec::with_capacity(k);
    while directions.len() < k {
        let g: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 || !norm.is_finite() {
            continue;
        }
        directions.push(g.into_iter().map(|v| v / norm).collect());
    }
    Ok(ProjectionSet {
        directions,
        dim,
        seed,
    })
}

/// Unbiased distance covariance of two univariate samples of equal length.
pub(crate) fn univariate_dcov(z: &[f64], w: &[f64]) -> f64 {
    dcov_from_distances(&univariate_distances(z), &univariate_distances(w))
}

/// `(1/K) Σ_k C_p C_q Ω_n(u_kᵀX, v_kᵀY)`.
pub fn projected_dcov(
    x: &DataMatrix,
    y: &DataMatrix,
    ux: &ProjectionSet,
    vy: &ProjectionSet,
) -> Result<EstimateRecord> {
    check_pair(x, y)?;
    if ux.k() != vy.k() {
        return Err(Error::Config(format!(
            "projection counts differ: {} vs {}",
            ux.k(),
            vy.k()
        )));
    }
    if ux.dim() != x.d() || vy.dim() != y.d() {
        return Err(Error::Shape(format!(
            "directions are {}/{}-dimensional but data has {}/{} columns",
            ux.dim(),
            vy.dim(),
            x.d(),
            y.d()
        )));
    }
    let scale = projection_constant(x.d())? * projection_constant(y.d())?;
    let mut total = 0.0;
    for (u, v) in ux.directions().iter().zip(vy.directions()) {
        let z = x.project(u)?;
        let w = y.project(v)?;
        total += scale * univariate_dcov(&z, &w);
    }
    Ok(EstimateRecord::non_private(
        total / ux.k() as f64,
        EstimateKind::Projected,
        ux.k(),
        vec![ux.seed(), vy.seed()],
    ))
}

/// The two bijections between a metric and a kernel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Bijection {
    /// `max(D) - d_ij`
    MaxSubtract,
    /// `1 - d_ij / max(D)`
    MaxNormalize,
}

/// Kernel induced by a distance matrix.
pub fn induced_kernel(d: &DistanceMatrix, variant: Bijection) -> Result<KernelMatrix> {
    let max = d.max();
    let m = d.size();
    let k = match variant {
        Bijection::MaxSubtract => SquareMatrix::from_fn(m, |i, j| max - d.get(i, j)),
        Bijection::MaxNormalize => {
            if max.is_nan() || max <= 0.0 {
                return Err(Error::DegenerateMetric);
            }
            SquareMatrix::from_fn(m, |i, j| 1.0 - d.get(i, j) / max)
        }
    };
    Ok(KernelMatrix(k))
}

/// Metric induced by a kernel matrix; inverse of [`induced_kernel`].
pub fn induced_metric(k: &KernelMatrix, variant: Bijection) -> Result<DistanceMatrix> {
    let max = k.max();
    let m = k.size();
    let d = match variant {
        Bijection::MaxSubtract => SquareMatrix::from_fn(m, |i, j| max - k.get(i, j)),
        Bijection::MaxNormalize => {
            if max.is_nan() || max <= 0.0 {
                return Err(Error::DegenerateMetric);
            }
            SquareMatrix::from_fn(m, |i, j| 1.0 - k.get(i, j) / max)
        }
    };
    // rounding may leave tiny negatives or a non-zero diagonal
    let d = SquareMatrix::from_fn(m, |i, j| if i == j { 0.0 } else { d.get(i, j).max(0.0) });
    DistanceMatrix::try_from_matrix(d)
}

/// `(m-1)^{-2} tr(K H L H)` with `H = I - J/m`.
pub fn hsic(k: &KernelMatrix, l: &KernelMatrix) -> Result<f64> {
    let m = k.size();
    if l.size() != m {
        return Err(Error::Shape(format!(
            "kernel sizes differ: {m} vs {}",
            l.size()
        )));
    }
    if m < 2 {
        return Err(Error::SampleSize { n: m, min: 2 });
    }
    let k = k.as_matrix();
    let l = l.as_matrix();
    let mf = m as f64;
    let row_means: Vec<f64> = (0..m).map(|i| k.row(i).iter().sum::<f64>() / mf).collect();
    let col_means: Vec<f64> = (0..m)
        .map(|j| (0..m).map(|i| k.get(i, j)).sum::<f64>() / mf)
        .collect();
    let grand = row_means.iter().sum::<f64>() / mf;
    // tr(HKH L) = Σ_ij (HKH)_ij L_ji
    let mut trace = 0.0;
    for (i, ri) in row_means.iter().enumerate() {
        for (j, cj) in col_means.iter().enumerate() {
            trace += (k.get(i, j) - ri - cj + grand) * l.get(j, i);
        }
    }
    Ok(trace / ((mf - 1.0) * (mf - 1.0)))
}

fn kernel_with_fallback(d: &DistanceMatrix) -> Result<KernelMatrix> {
    match induced_kernel(d, Bijection::MaxNormalize) {
        Err(Error::DegenerateMetric) => induced_kernel(d, Bijection::MaxSubtract),
        other => other,
    }
}

/// HSIC of the max-normalized induced kernels of `X` and `Y`.
///
/// Constant data has no max-normalized kernel; that side falls back to the
/// max-subtract kernel, which centering annihilates, so the result is 0.
pub fn dcov_via_hsic(x: &DataMatrix, y: &DataMatrix) -> Result<f64> {
    check_pair(x, y)?;
    let k = kernel_with_fallback(&pairwise_distances(x)?)?;
    let l = kernel_with_fallback(&pairwise_distances(y)?)?;
    hsic(&k, &l)
}

/// HSIC under an explicit bijection, without fallback.
pub fn dcov_via_hsic_with(x: &DataMatrix, y: &DataMatrix, variant: Bijection) -> Result<f64> {
    check_pair(x, y)?;
    let k = induced_kernel(&pairwise_distances(x)?, variant)?;
    let l = induced_kernel(&pairwise_distances(y)?, variant)?;
    hsic(&k, &l)
}
