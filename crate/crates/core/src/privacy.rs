//! Differential-privacy mechanisms: Gaussian noise for released projections,
//! Laplace noise for the distance variance, sensitivities and budget
//! composition.

use rand::Rng;
use rand_distr::{Open01, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::DataMatrix;
use crate::error::{Error, Result};
use crate::estimators::{dcov_via_hsic, unbiased_dcov, EstimateKind, EstimateRecord, MIN_SAMPLES};
use crate::rng::rng_from_seed;

/// An `(ε, δ)` pair. `δ = 0` is pure ε-DP.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrivacyBudget {
    pub epsilon: f64,
    pub delta: f64,
}

impl PrivacyBudget {
    pub fn new(epsilon: f64, delta: f64) -> Result<Self> {
        if !(epsilon.is_finite() && epsilon > 0.0) {
            return Err(Error::Budget(format!("epsilon must be positive, got {epsilon}")));
        }
        if !(0.0..0.5).contains(&delta) {
            return Err(Error::Budget(format!("delta must be in [0, 1/2), got {delta}")));
        }
        Ok(Self { epsilon, delta })
    }

    pub fn pure(epsilon: f64) -> Result<Self> {
        Self::new(epsilon, 0.0)
    }
}

/// Which records each projection touches.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    /// Every projection uses all rows: sequential composition over K.
    Repeated,
    /// Projection k uses row block k only: parallel composition.
    Disjoint,
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Variant::Repeated => "repeated",
            Variant::Disjoint => "disjoint",
        })
    }
}

impl std::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "repeated" => Ok(Variant::Repeated),
            "disjoint" => Ok(Variant::Disjoint),
            other => Err(Error::Config(format!("unknown variant {other:?}"))),
        }
    }
}

/// Mechanism parameters for one protocol run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub gaussian_sigma: f64,
    pub laplace_scale: f64,
    pub w2: f64,
    pub projection_budget: PrivacyBudget,
    pub variance_budget: PrivacyBudget,
}

/// Maximum Euclidean row norm of a projection matrix given by its rows.
pub fn l2_sensitivity<R: AsRef<[f64]>>(rows: &[R]) -> Result<f64> {
    if rows.is_empty() || rows.iter().any(|r| r.as_ref().is_empty()) {
        return Err(Error::Shape("sensitivity of an empty matrix".into()));
    }
    let mut best: f64 = 0.0;
    for r in rows {
        let r = r.as_ref();
        if r.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite projection entry".into()));
        }
        best = best.max(r.iter().map(|v| v * v).sum::<f64>().sqrt());
    }
    Ok(best)
}

/// Smallest σ for which releasing `XP + N(0, σ²)` is `(ε, δ)`-DP:
/// `w2 · sqrt(2 (ln(1/(2δ)) + ε)) / ε`.
pub fn gaussian_sigma(w2: f64, budget: PrivacyBudget) -> Result<f64> {
    if !(budget.delta > 0.0 && budget.delta < 0.5) {
        return Err(Error::Budget(format!(
            "Gaussian mechanism needs 0 < delta < 1/2, got {}",
            budget.delta
        )));
    }
    if !(budget.epsilon.is_finite() && budget.epsilon > 0.0) {
        return Err(Error::Budget(format!(
            "epsilon must be positive, got {}",
            budget.epsilon
        )));
    }
    if !(w2.is_finite() && w2 >= 0.0) {
        return Err(Error::Domain(format!("sensitivity must be >= 0, got {w2}")));
    }
    let eps = budget.epsilon;
    Ok(w2 * (2.0 * ((1.0 / (2.0 * budget.delta)).ln() + eps)).sqrt() / eps)
}

/// `z + N` with `N_i ~ N(0, σ²)` drawn from `seed`.
pub fn privatize_projection(z: &[f64], sigma: f64, seed: u64) -> Result<Vec<f64>> {
    if !(sigma.is_finite() && sigma >= 0.0) {
        return Err(Error::Domain(format!("sigma must be >= 0, got {sigma}")));
    }
    if z.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("non-finite projected value".into()));
    }
    if sigma == 0.0 {
        return Ok(z.to_vec());
    }
    let mut rng = rng_from_seed(seed);
    Ok(z.iter()
        .map(|v| {
            let g: f64 = rng.sample(StandardNormal);
            v + sigma * g
        })
        .collect())
}

/// One Laplace(0, `scale`) draw via the inverse CDF of an open-interval uniform.
pub fn sample_laplace<R: Rng + ?Sized>(scale: f64, rng: &mut R) -> f64 {
    let u: f64 = rng.sample::<f64, _>(Open01) - 0.5;
    -scale * u.signum() * (1.0 - 2.0 * u.abs()).ln()
}

/// HSIC global sensitivity for kernels bounded by 1: `(12n - 11)/(n - 1)²`.
pub fn hsic_global_sensitivity(n: usize) -> Result<f64> {
    if n < 2 {
        return Err(Error::Domain(format!("HSIC sensitivity needs n >= 2, got {n}")));
    }
    let nf = n as f64;
    Ok((12.0 * nf - 11.0) / ((nf - 1.0) * (nf - 1.0)))
}

/// Statistic that the Laplace mechanism perturbs when releasing dVar(X).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DvarStatistic {
    /// The unbiased distance variance, on the same scale as the cross term.
    #[default]
    Unbiased,
    /// HSIC of the max-normalized induced kernel.
    HsicEquivalent,
}

fn dvar_statistic(x: &DataMatrix, statistic: DvarStatistic) -> Result<f64> {
    match statistic {
        DvarStatistic::Unbiased => unbiased_dcov(x, x),
        DvarStatistic::HsicEquivalent => dcov_via_hsic(x, x),
    }
}

/// Distance variance of `X` plus Laplace noise of scale `Δ/ε`, `Δ` the HSIC
/// global sensitivity.
pub fn privatize_dvar(
    x: &DataMatrix,
    epsilon: f64,
    seed: u64,
    statistic: DvarStatistic,
) -> Result<EstimateRecord> {
    let budget = PrivacyBudget::pure(epsilon)?;
    if x.n() < MIN_SAMPLES {
        return Err(Error::SampleSize {
            n: x.n(),
            min: MIN_SAMPLES,
        });
    }
    let scale = hsic_global_sensitivity(x.n())? / epsilon;
    privatize_dvar_with_scale(x, budget, scale, seed, statistic)
}

/// As [`privatize_dvar`] with an explicit Laplace scale. A zero scale is the
/// noise-free testing path and is not private.
pub(crate) fn privatize_dvar_with_scale(
    x: &DataMatrix,
    budget: PrivacyBudget,
    scale: f64,
    seed: u64,
    statistic: DvarStatistic,
) -> Result<EstimateRecord> {
    let value = dvar_statistic(x, statistic)?;
    let noise = if scale > 0.0 {
        sample_laplace(scale, &mut rng_from_seed(seed))
    } else {
        0.0
    };
    Ok(EstimateRecord {
        value: value + noise,
        kind: EstimateKind::PrivateDvar,
        k: 0,
        seeds: vec![seed],
        budget: Some(budget),
    })
}

/// How a ledger entry composes with the others.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Composition {
    /// Adds to the total.
    Sequential,
    /// Entries sharing a group touch disjoint records; the group costs its maximum.
    Parallel(u32),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LedgerEntry {
    pub label: String,
    pub epsilon: f64,
    pub delta: f64,
    pub composition: Composition,
}

/// Append-only record of mechanism invocations with basic composition totals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BudgetLedger {
    entries: Vec<LedgerEntry>,
    pub variant: Variant,
    pub k: usize,
}

impl BudgetLedger {
    pub fn new(variant: Variant, k: usize) -> Self {
        Self {
            entries: Vec::new(),
            variant,
            k,
        }
    }

    pub fn entries(&self) -> &[LedgerEntry] {
        &self.entries
    }

    /// Returns a new ledger with `entry` appended.
    #[must_use]
    pub fn with_entry(&self, entry: LedgerEntry) -> Self {
        let mut next = self.clone();
        next.entries.push(entry);
        next
    }

    /// Total `(ε, δ)`. Sums are taken over sorted values so the result does
    /// not depend on entry order.
    pub fn total(&self) -> (f64, f64) {
        let mut eps = Vec::new();
        let mut delta = Vec::new();
        let mut groups: Vec<(u32, f64, f64)> = Vec::new();
        for e in &self.entries {
            match e.composition {
                Composition::Sequential => {
                    eps.push(e.epsilon);
                    delta.push(e.delta);
                }
                Composition::Parallel(g) => match groups.iter_mut().find(|(id, _, _)| *id == g) {
                    Some(slot) => {
                        slot.1 = slot.1.max(e.epsilon);
                        slot.2 = slot.2.max(e.delta);
                    }
                    None => groups.push((g, e.epsilon, e.delta)),
                },
            }
        }
        for (_, e, d) in groups {
            eps.push(e);
            delta.push(d);
        }
        (sorted_sum(eps), sorted_sum(delta))
    }
}

fn sorted_sum(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    v.into_iter().sum()
}

/// Ledger for one protocol run: K projection releases plus the variance
/// release, composed sequentially with each other.
pub fn compose_budget(
    variant: Variant,
    k: usize,
    eps_per_projection: f64,
    delta_per_projection: f64,
    eps_variance: f64,
) -> Result<BudgetLedger> {
    if k == 0 {
        return Err(Error::Budget("projection count K must be >= 1".into()));
    }
    for (name, v) in [
        ("per-projection epsilon", eps_per_projection),
        ("variance epsilon", eps_variance),
    ] {
        if !(v.is_finite() && v > 0.0) {
            return Err(Error::Budget(format!("{name} must be positive, got {v}")));
        }
    }
    if !(0.0..0.5).contains(&delta_per_projection) {
        return Err(Error::Budget(format!(
            "delta must be in [0, 1/2), got {delta_per_projection}"
        )));
    }
    let composition = match variant {
        Variant::Repeated => Composition::Sequential,
        Variant::Disjoint => Composition::Parallel(0),
    };
    let mut ledger = BudgetLedger::new(variant, k);
    for i in 1..=k {
        ledger = ledger.with_entry(LedgerEntry {
            label: format!("projection {i}"),
            epsilon: eps_per_projection,
            delta: delta_per_projection,
            composition,
        });
    }
    Ok(ledger.with_entry(LedgerEntry {
        label: "distance variance".into(),
        epsilon: eps_variance,
        delta: 0.0,
        composition: Composition::Sequential,
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn budget(e: f64, d: f64) -> PrivacyBudget {
        PrivacyBudget::new(e, d).unwrap()
    }

    #[test]
    fn sensitivity_examples() {
        let eye = vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]];
        assert_eq!(l2_sensitivity(&eye).unwrap(), 1.0);
        assert_eq!(l2_sensitivity(&[vec![3.0, 4.0]]).unwrap(), 5.0);
        assert!(matches!(
            l2_sensitivity::<Vec<f64>>(&[]),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn sigma_reference_value() {
        let s = gaussian_sigma(1.0, budget(1.0, 0.1)).unwrap();
        assert!((s - (2.0 * (5f64.ln() + 1.0)).sqrt()).abs() < 1e-12);
        assert!((s - 2.284_486).abs() < 1e-6);
        assert_eq!(gaussian_sigma(0.0, budget(0.3, 0.01)).unwrap(), 0.0);
        let b = budget(0.7, 1e-5);
        assert_eq!(
            gaussian_sigma(2.0, b).unwrap(),
            2.0 * gaussian_sigma(1.0, b).unwrap()
        );
    }

    #[test]
    fn sigma_rejects_bad_delta() {
        let b = PrivacyBudget {
            epsilon: 1.0,
            delta: 0.5,
        };
        assert!(matches!(gaussian_sigma(1.0, b), Err(Error::Budget(_))));
        let b = PrivacyBudget {
            epsilon: 1.0,
            delta: 0.0,
        };
        assert!(matches!(gaussian_sigma(1.0, b), Err(Error::Budget(_))));
    }

    #[test]
    fn sigma_monotone_on_grid() {
        let eps = [0.05, 0.1, 0.5, 1.0, 2.0, 5.0, 10.0];
        let deltas = [1e-9, 1e-6, 1e-3, 0.01, 0.1, 0.3, 0.49];
        for &d in &deltas {
            for w in eps.windows(2) {
                assert!(
                    gaussian_sigma(1.0, budget(w[0], d)).unwrap()
                        > gaussian_sigma(1.0, budget(w[1], d)).unwrap()
                );
            }
        }
        for &e in &eps {
            for w in deltas.windows(2) {
                assert!(
                    gaussian_sigma(1.0, budget(e, w[0])).unwrap()
                        > gaussian_sigma(1.0, budget(e, w[1])).unwrap()
                );
            }
        }
    }

    #[test]
    fn projection_noise() {
        let z: Vec<f64> = (0..10).map(f64::from).collect();
        assert_eq!(privatize_projection(&z, 0.0, 1).unwrap(), z);
        assert_eq!(
            privatize_projection(&z, 1.5, 9).unwrap(),
            privatize_projection(&z, 1.5, 9).unwrap()
        );
        let zeros = vec![0.0; 10_000];
        let noisy = privatize_projection(&zeros, 2.0, 4).unwrap();
        let mean = noisy.iter().sum::<f64>() / noisy.len() as f64;
        let sd = (noisy.iter().map(|v| (v - mean).powi(2)).sum::<f64>()
            / (noisy.len() - 1) as f64)
            .sqrt();
        assert!((sd - 2.0).abs() < 0.06, "sd = {sd}");
    }

    #[test]
    fn hsic_sensitivity_values() {
        assert_eq!(hsic_global_sensitivity(11).unwrap(), 1.21);
        assert_eq!(hsic_global_sensitivity(2).unwrap(), 13.0);
        assert!((hsic_global_sensitivity(101).unwrap() - 0.1201).abs() < 1e-15);
        assert!(hsic_global_sensitivity(1).is_err());
        for n in 2..500 {
            assert!(hsic_global_sensitivity(n).unwrap() > hsic_global_sensitivity(n + 1).unwrap());
        }
        assert!(hsic_global_sensitivity(10_000_000).unwrap() < 2e-6);
    }

    #[test]
    fn laplace_mean_absolute_value() {
        let mut rng = rng_from_seed(11);
        let b = 0.8;
        let draws = 100_000;
        let mean_abs = (0..draws)
            .map(|_| sample_laplace(b, &mut rng).abs())
            .sum::<f64>()
            / draws as f64;
        assert!((mean_abs - b).abs() < 0.03 * b, "mean |noise| = {mean_abs}");
    }

    #[test]
    fn budget_examples() {
        let (e, _) = compose_budget(Variant::Repeated, 7, 0.1, 0.0, 0.3).unwrap().total();
        assert!((e - 1.0).abs() < 1e-12);
        let (e, _) = compose_budget(Variant::Disjoint, 7, 0.1, 0.0, 0.3).unwrap().total();
        assert!((e - 0.4).abs() < 1e-12);
        assert_eq!(
            compose_budget(Variant::Repeated, 1, 0.2, 1e-6, 0.05).unwrap().total(),
            compose_budget(Variant::Disjoint, 1, 0.2, 1e-6, 0.05).unwrap().total()
        );
        assert!(compose_budget(Variant::Repeated, 3, 0.0, 0.0, 0.3).is_err());
        assert!(compose_budget(Variant::Repeated, 0, 0.1, 0.0, 0.3).is_err());
        assert!(compose_budget(Variant::Repeated, 3, 0.1, 0.0, -1.0).is_err());
    }

    #[test]
    fn repeated_delta_composes_additively() {
        let (_, d) = compose_budget(Variant::Repeated, 4, 1.0, 1e-5, 0.5).unwrap().total();
        assert!((d - 4e-5).abs() < 1e-18);
        let (_, d) = compose_budget(Variant::Disjoint, 4, 1.0, 1e-5, 0.5).unwrap().total();
        assert_eq!(d, 1e-5);
    }

    #[test]
    fn dvar_noise_vanishes_with_large_epsilon() {
        let x = DataMatrix::column((0..12).map(|i| (i as f64).sin()).collect()).unwrap();
        let exact = unbiased_dcov(&x, &x).unwrap();
        let r = privatize_dvar(&x, 1e12, 3, DvarStatistic::Unbiased).unwrap();
        assert!((r.value - exact).abs() < 1e-9);
        assert_eq!(r.kind, EstimateKind::PrivateDvar);
        assert_eq!(r.budget.unwrap().delta, 0.0);
        let h = privatize_dvar(&x, 1e12, 3, DvarStatistic::HsicEquivalent).unwrap();
        assert!((h.value - dcov_via_hsic(&x, &x).unwrap()).abs() < 1e-9);
        assert_eq!(
            privatize_dvar(&x, 0.5, 3, DvarStatistic::Unbiased).unwrap(),
            privatize_dvar(&x, 0.5, 3, DvarStatistic::Unbiased).unwrap()
        );
    }
}
