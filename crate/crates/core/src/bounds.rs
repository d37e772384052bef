//! Utility analysis of the private cross term: the error decomposition, the
//! Gaussian tail bound behind the concentration result, and Bob's Monte Carlo
//! estimate of the noise-driven bias.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::DataMatrix;
use crate::error::{Error, Result};
use crate::estimators::{
    projected_dcov, projection_constant, sample_unit_projections, univariate_dcov, ProjectionSet,
    MIN_SAMPLES,
};
use crate::rng::{derive_seed, rng_from_seed};

/// `C = 4 C_p C_q / (K n (n-2)(n-3))`.
pub fn residual_coefficient(n: usize, k: usize, p: usize, q: usize) -> Result<f64> {
    if n < MIN_SAMPLES {
        return Err(Error::SampleSize {
            n,
            min: MIN_SAMPLES,
        });
    }
    if k == 0 {
        return Err(Error::Config("projection count K must be >= 1".into()));
    }
    let nf = n as f64;
    Ok(4.0 * projection_constant(p)? * projection_constant(q)?
        / (k as f64 * nf * (nf - 2.0) * (nf - 3.0)))
}

/// `Σ_l |z_i - z_l|` for every `i`.
fn abs_row_sums(z: &[f64]) -> Vec<f64> {
    z.iter()
        .map(|zi| z.iter().map(|zl| (zi - zl).abs()).sum())
        .collect()
}

/// The two noise-driven terms bounding `Ω̄ᵈᵖ(X,Y) - Ω̄(X,Y)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecompositionTerms {
    /// `Ω̄(N_X, Y)`: the projected estimator applied to the noise and `Y`.
    pub omega_noise_y: f64,
    /// `Σ_k C Σ_i (Σ_l |N_i - N_l|)(Σ_l |v_kᵀ(Y_i - Y_l)|)`.
    pub residual_bound_term: f64,
    /// The summand of `residual_bound_term` for each projection.
    pub per_projection_residual: Vec<f64>,
}

/// Decomposition terms plus the measured gap they bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecompositionReport {
    pub omega_noise_y: f64,
    pub residual_bound_term: f64,
    pub per_projection_residual: Vec<f64>,
    /// Measured `Ω̄ᵈᵖ(X,Y) - Ω̄(X,Y)`.
    pub total_gap: f64,
}

impl DecompositionReport {
    /// Whether the measured gap sits under the two decomposition terms.
    pub fn gap_is_bounded(&self) -> bool {
        self.total_gap <= self.omega_noise_y + self.residual_bound_term
    }
}

fn check_noise(noise: &[Vec<f64>], y: &DataMatrix, vy: &ProjectionSet) -> Result<()> {
    if noise.len() != vy.k() {
        return Err(Error::Shape(format!(
            "{} noise vectors for {} projections",
            noise.len(),
            vy.k()
        )));
    }
    if vy.dim() != y.d() {
        return Err(Error::Shape(format!(
            "directions are {}-dimensional, Y has {} columns",
            vy.dim(),
            y.d()
        )));
    }
    if let Some(bad) = noise.iter().find(|v| v.len() != y.n()) {
        return Err(Error::Shape(format!(
            "noise vector of length {} for {} rows",
            bad.len(),
            y.n()
        )));
    }
    if y.n() < MIN_SAMPLES {
        return Err(Error::SampleSize {
            n: y.n(),
            min: MIN_SAMPLES,
        });
    }
    Ok(())
}

/// Noise terms for per-projection noise vectors `noise[k]`, Bob's directions
/// `vy`, and Alice's feature dimension `x_dim`.
pub fn decomposition_terms(
    noise: &[Vec<f64>],
    y: &DataMatrix,
    vy: &ProjectionSet,
    x_dim: usize,
) -> Result<DecompositionTerms> {
    check_noise(noise, y, vy)?;
    let n = y.n();
    let k = vy.k();
    let scale = projection_constant(x_dim)? * projection_constant(y.d())?;
    let coef = residual_coefficient(n, k, x_dim, y.d())?;
    let mut omega = 0.0;
    let mut per_projection = Vec::with_capacity(k);
    for (nk, v) in noise.iter().zip(vy.directions()) {
        let w = y.project(v)?;
        omega += scale * univariate_dcov(nk, &w);
        let tau = abs_row_sums(nk);
        let rho = abs_row_sums(&w);
        per_projection.push(coef * tau.iter().zip(&rho).map(|(a, b)| a * b).sum::<f64>());
    }
    Ok(DecompositionTerms {
        omega_noise_y: omega / k as f64,
        residual_bound_term: per_projection.iter().sum(),
        per_projection_residual: per_projection,
    })
}

/// Full decomposition: measures `Ω̄ᵈᵖ(X,Y) - Ω̄(X,Y)` with the given
/// directions and noise, alongside both bounding terms.
pub fn decompose(
    x: &DataMatrix,
    y: &DataMatrix,
    ux: &ProjectionSet,
    vy: &ProjectionSet,
    noise: &[Vec<f64>],
) -> Result<DecompositionReport> {
    let clean = projected_dcov(x, y, ux, vy)?.value;
    let terms = decomposition_terms(noise, y, vy, x.d())?;
    let scale = projection_constant(x.d())? * projection_constant(y.d())?;
    let mut private = 0.0;
    for ((u, v), nk) in ux.directions().iter().zip(vy.directions()).zip(noise) {
        let z: Vec<f64> = x.project(u)?.iter().zip(nk).map(|(a, b)| a + b).collect();
        private += scale * univariate_dcov(&z, &y.project(v)?);
    }
    private /= ux.k() as f64;
    Ok(DecompositionReport {
        omega_noise_y: terms.omega_noise_y,
        residual_bound_term: terms.residual_bound_term,
        per_projection_residual: terms.per_projection_residual,
        total_gap: private - clean,
    })
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("alpha must be in (0, 1), got {alpha}")))
    }
}

/// Smallest `t` at which the tail bound drops below `alpha`:
/// `2σ sqrt(((n-1)/n)(ln 2 - ln(α)/n))`.
pub fn t_threshold(sigma: f64, n: usize, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    if n < 2 {
        return Err(Error::Domain(format!("n must be >= 2, got {n}")));
    }
    if !(sigma.is_finite() && sigma >= 0.0) {
        return Err(Error::Domain(format!("sigma must be >= 0, got {sigma}")));
    }
    let nf = n as f64;
    Ok(2.0 * sigma * (((nf - 1.0) / nf) * (2f64.ln() - alpha.ln() / nf)).sqrt())
}

/// Tail bound `P(Σ_l |N_i - N_l| >= n t) <= min(1, 2ⁿ exp(-n² t² / (4σ²(n-1))))`
/// for i.i.d. `N(0, σ²)` noise.
pub fn alpha_from_t(sigma: f64, n: usize, t: f64) -> Result<f64> {
    if n < 2 {
        return Err(Error::Domain(format!("n must be >= 2, got {n}")));
    }
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::Domain(format!("sigma must be > 0, got {sigma}")));
    }
    if t.is_nan() || t <= 0.0 {
        return Err(Error::Domain(format!("t must be > 0, got {t}")));
    }
    let nf = n as f64;
    let log_alpha = nf * 2f64.ln() - nf * nf * t * t / (4.0 * sigma * sigma * (nf - 1.0));
    Ok(log_alpha.exp().min(1.0))
}

/// The same Chernoff argument with the dominant term's variance counted in
/// full: `(n-1)|N_i|` has variance `(n-1)²σ²`, which gives
/// `min(1, 2ⁿ exp(-n t² / (2σ²(n-1))))`. Always at least [`alpha_from_t`].
pub fn alpha_from_t_sound(sigma: f64, n: usize, t: f64) -> Result<f64> {
    alpha_from_t(sigma, n, t)?;
    let nf = n as f64;
    let log_alpha = nf * 2f64.ln() - nf * t * t / (2.0 * sigma * sigma * (nf - 1.0));
    Ok(log_alpha.exp().min(1.0))
}

/// Union-bound lower bound on `P(Σ a_i < n c)` when each `P(a_i < c) > b`.
pub fn union_sum_bound(b: f64, n: usize) -> f64 {
    (1.0 - n as f64 * (1.0 - b)).max(0.0)
}

/// Mean and variance of `|Z|`, `Z ~ N(0, σ²)`.
pub fn half_normal_moments(sigma: f64) -> (f64, f64) {
    let two_over_pi = 2.0 / std::f64::consts::PI;
    (sigma * two_over_pi.sqrt(), sigma * sigma * (1.0 - two_over_pi))
}

/// Inputs to the concentration bound on one projection's residual term.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundInputs {
    pub n: usize,
    pub k: usize,
    /// Scale of the `v_kᵀY_i` terms.
    pub sigma1: f64,
    /// Projection-noise scale.
    pub sigma2: f64,
    pub alpha: f64,
    pub t1: f64,
    pub t2: f64,
    pub c: f64,
}

impl BoundInputs {
    /// Thresholds set to `t_threshold(σ_i, n, α)` and `C` from the dimensions.
    pub fn at_threshold(
        n: usize,
        k: usize,
        p: usize,
        q: usize,
        sigma1: f64,
        sigma2: f64,
        alpha: f64,
    ) -> Result<Self> {
        Ok(Self {
            n,
            k,
            sigma1,
            sigma2,
            alpha,
            t1: t_threshold(sigma1, n, alpha)?,
            t2: t_threshold(sigma2, n, alpha)?,
            c: residual_coefficient(n, k, p, q)?,
        })
    }

    pub fn validate(&self) -> Result<()> {
        for (name, t, sigma) in [("t1", self.t1, self.sigma1), ("t2", self.t2, self.sigma2)] {
            let min = t_threshold(sigma, self.n, self.alpha)?;
            // thresholds computed by t_threshold itself must pass
            if t.is_nan() || t < min * (1.0 - 1e-12) {
                return Err(Error::Domain(format!(
                    "{name} = {t} is below the admissible threshold {min}"
                )));
            }
        }
        if !(self.c >= 0.0 && self.c.is_finite()) {
            return Err(Error::Domain(format!("C must be >= 0, got {}", self.c)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorBound {
    pub bound_value: f64,
    pub confidence: f64,
    pub alpha1: f64,
    pub alpha2: f64,
    /// Set when `1 - n(α₁ + α₂ - α₁α₂)` was negative and clamped to 0.
    pub vacuous: bool,
}

/// `P(C Σ_i τ_i ρ_i < C n³ t₁ t₂) >= 1 - n(α₁ + α₂ - α₁α₂)`.
pub fn error_bound(inputs: &BoundInputs) -> Result<ErrorBound> {
    inputs.validate()?;
    error_bound_unchecked(inputs)
}

/// [`error_bound`] without the threshold precondition.
pub fn error_bound_unchecked(inputs: &BoundInputs) -> Result<ErrorBound> {
    let nf = inputs.n as f64;
    let alpha_or_one = |sigma: f64, t: f64| {
        if t > 0.0 {
            alpha_from_t(sigma, inputs.n, t)
        } else {
            Ok(1.0)
        }
    };
    let a1 = alpha_or_one(inputs.sigma1, inputs.t1)?;
    let a2 = alpha_or_one(inputs.sigma2, inputs.t2)?;
    let raw = 1.0 - nf * (a1 + a2 - a1 * a2);
    Ok(ErrorBound {
        bound_value: inputs.c * nf * nf * nf * inputs.t1 * inputs.t2,
        confidence: raw.clamp(0.0, 1.0),
        alpha1: a1,
        alpha2: a2,
        vacuous: raw <= 0.0,
    })
}

/// Per-trial values of `Ω̄(N', Y)` with fresh `N(0, σ²)` noise and fresh
/// directions each trial.
pub fn bob_noise_dcov_samples(
    y: &DataMatrix,
    sigma: f64,
    k: usize,
    x_dim: usize,
    trials: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    if trials == 0 {
        return Err(Error::Config("trials must be >= 1".into()));
    }
    if !(sigma.is_finite() && sigma >= 0.0) {
        return Err(Error::Domain(format!("sigma must be >= 0, got {sigma}")));
    }
    if y.n() < MIN_SAMPLES {
        return Err(Error::SampleSize {
            n: y.n(),
            min: MIN_SAMPLES,
        });
    }
    let n = y.n();
    (0..trials)
        .into_par_iter()
        .map(|trial| {
            let trial_seed = derive_seed(seed, trial as u64);
            let vy = sample_unit_projections(y.d(), k, derive_seed(trial_seed, 0))?;
            let mut rng = rng_from_seed(derive_seed(trial_seed, 1));
            let noise: Vec<Vec<f64>> = (0..k)
                .map(|_| {
                    (0..n)
                        .map(|_| sigma * rng.sample::<f64, _>(StandardNormal))
                        .collect()
                })
                .collect();
            Ok(decomposition_terms(&noise, y, &vy, x_dim)?.omega_noise_y)
        })
        .collect()
}

/// Bob's Monte Carlo estimate of the `Ω̄(N_X, Y)` bias term at the released σ.
pub fn bob_noise_dcov_estimate(
    y: &DataMatrix,
    sigma: f64,
    k: usize,
    x_dim: usize,
    trials: usize,
    seed: u64,
) -> Result<f64> {
    let samples = bob_noise_dcov_samples(y, sigma, k, x_dim, trials, seed)?;
    Ok(samples.iter().sum::<f64>() / samples.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn threshold_examples() {
        assert_eq!(t_threshold(0.0, 50, 0.2).unwrap(), 0.0);
        let t = t_threshold(1.0, 100, 0.05).unwrap();
        // 2 sqrt(0.99 (ln 2 - ln(0.05)/100))
        let expected = 2.0 * (0.99f64 * (2f64.ln() + 20f64.ln() / 100.0)).sqrt();
        assert!((t - expected).abs() < 1e-14);
        assert!((t - 1.6922).abs() < 1e-4, "t = {t}");
        let limit = t_threshold(1.0, 10_000_000, 1.0 - 1e-12).unwrap();
        assert!((limit - 2.0 * 2f64.ln().sqrt()).abs() < 1e-6);
        assert!(t_threshold(1.0, 10, 1.0).is_err());
        assert!(t_threshold(1.0, 10, 0.0).is_err());
        assert!(t_threshold(1.0, 1, 0.5).is_err());
    }

    #[test]
    fn threshold_monotone() {
        let sigmas = [0.1, 0.5, 1.0, 2.0, 5.0];
        let alphas = [1e-6, 1e-3, 0.01, 0.1, 0.5, 0.9];
        for &n in &[2usize, 5, 30, 200] {
            for w in sigmas.windows(2) {
                assert!(t_threshold(w[0], n, 0.05).unwrap() < t_threshold(w[1], n, 0.05).unwrap());
            }
            for w in alphas.windows(2) {
                assert!(t_threshold(1.0, n, w[0]).unwrap() > t_threshold(1.0, n, w[1]).unwrap());
            }
        }
    }

    #[test]
    fn alpha_inverts_threshold() {
        for &sigma in &[0.2, 1.0, 3.0] {
            for &n in &[2usize, 4, 10, 30, 100, 1000] {
                for &alpha in &[1e-8, 1e-4, 0.01, 0.05, 0.3, 0.9] {
                    let t = t_threshold(sigma, n, alpha).unwrap();
                    let back = alpha_from_t(sigma, n, t).unwrap();
                    assert!(back <= alpha * (1.0 + 1e-9), "{sigma} {n} {alpha}: {back}");
                }
            }
        }
        assert_eq!(alpha_from_t(1.0, 30, 1e6).unwrap(), 0.0);
        assert_eq!(alpha_from_t(1.0, 30, 1e-3).unwrap(), 1.0);
        assert!(alpha_from_t(0.0, 30, 1.0).is_err());
    }

    #[test]
    fn union_bound_and_moments() {
        assert_eq!(union_sum_bound(1.0, 17), 1.0);
        assert!((union_sum_bound(0.99, 10) - 0.9).abs() < 1e-12);
        assert_eq!(union_sum_bound(0.5, 10), 0.0);
        assert_eq!(half_normal_moments(0.0), (0.0, 0.0));
        let (m, v) = half_normal_moments(1.0);
        assert!((m - 0.797_884_560_802_865_4).abs() < 1e-15);
        assert!((v - 0.363_380_227_632_418_6).abs() < 1e-15);
    }

    #[test]
    fn bound_ranges_and_monotonicity() {
        let base = BoundInputs::at_threshold(30, 5, 1, 1, 1.0, 1.0, 0.01).unwrap();
        let b = error_bound(&base).unwrap();
        assert!(b.bound_value >= 0.0 && b.confidence <= 1.0 && b.confidence >= 0.0);
        let more_t1 = BoundInputs { t1: base.t1 * 1.5, ..base };
        let more_t2 = BoundInputs { t2: base.t2 * 1.5, ..base };
        assert!(error_bound(&more_t1).unwrap().bound_value > b.bound_value);
        assert!(error_bound(&more_t2).unwrap().bound_value > b.bound_value);
        let more_k = BoundInputs::at_threshold(30, 10, 1, 1, 1.0, 1.0, 0.01).unwrap();
        assert!(error_bound(&more_k).unwrap().bound_value < b.bound_value);
        let too_small = BoundInputs { t1: base.t1 * 0.5, ..base };
        assert!(matches!(error_bound(&too_small), Err(Error::Domain(_))));
        let zero = BoundInputs { t1: 0.0, ..base };
        assert_eq!(error_bound_unchecked(&zero).unwrap().bound_value, 0.0);
    }

    #[test]
    fn small_n_confidence_is_clamped() {
        let inputs = BoundInputs::at_threshold(5, 1, 1, 1, 1.0, 1.0, 0.5).unwrap();
        let b = error_bound(&inputs).unwrap();
        assert_eq!(b.confidence, 0.0);
        assert!(b.vacuous);
    }

    #[test]
    fn zero_noise_terms_vanish() {
        let y = DataMatrix::from_rows(&[[0.1, 2.0], [1.0, -1.0], [0.3, 0.3], [2.0, 1.0], [-1.0, 0.5]])
            .unwrap();
        let vy = sample_unit_projections(2, 3, 5).unwrap();
        let t = decomposition_terms(&vec![vec![0.0; 5]; 3], &y, &vy, 4).unwrap();
        assert_eq!(t.omega_noise_y, 0.0);
        assert_eq!(t.residual_bound_term, 0.0);
        assert_eq!(bob_noise_dcov_estimate(&y, 0.0, 3, 4, 20, 1).unwrap(), 0.0);
        assert!(decomposition_terms(&vec![vec![0.0; 5]; 2], &y, &vy, 4).is_err());
    }
}
