//! Brute-force reference implementations for tests only.
//!
//! Everything here works on plain nested vectors and uses nothing from the
//! library, so agreement with the optimized code is a real cross-check.
//! Formulas are transcribed literally: explicit loops, no cached marginals.

#![allow(clippy::needless_range_loop)]

#![allow(dead_code)]

fn dist(a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for t in 0..a.len() {
        s += (a[t] - b[t]) * (a[t] - b[t]);
    }
    s.sqrt()
}

/// The three-term unbiased distance covariance, every sum a fresh loop.
pub fn oracle_dcov(x: &[Vec<f64>], y: &[Vec<f64>]) -> f64 {
    let n = x.len();
    assert!(n >= 4 && y.len() == n, "oracle_dcov needs matching n >= 4");
    let nf = n as f64;

    let mut first = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                first += dist(&x[i], &x[j]) * dist(&y[i], &y[j]);
            }
        }
    }

    let mut second = 0.0;
    for i in 0..n {
        let mut a_i = 0.0;
        for j in 0..n {
            a_i += dist(&x[i], &x[j]);
        }
        let mut b_i = 0.0;
        for j in 0..n {
            b_i += dist(&y[i], &y[j]);
        }
        second += a_i * b_i;
    }

    let mut a_all = 0.0;
    for i in 0..n {
        for j in 0..n {
            a_all += dist(&x[i], &x[j]);
        }
    }
    let mut b_all = 0.0;
    for k in 0..n {
        for l in 0..n {
            b_all += dist(&y[k], &y[l]);
        }
    }

    first / (nf * (nf - 3.0)) - 2.0 / (nf * (nf - 2.0) * (nf - 3.0)) * second
        + a_all * b_all / (nf * (nf - 1.0) * (nf - 2.0) * (nf - 3.0))
}

/// `(m-1)^{-2} Σ_{i,j,k,l} K_ij H_jk L_kl H_li` with `H = I - J/m`.
pub fn oracle_hsic(kmat: &[Vec<f64>], lmat: &[Vec<f64>]) -> f64 {
    let m = kmat.len();
    assert!(m >= 2 && lmat.len() == m);
    let h = |a: usize, b: usize| if a == b { 1.0 - 1.0 / m as f64 } else { -1.0 / m as f64 };
    let mut trace = 0.0;
    for i in 0..m {
        for j in 0..m {
            for k in 0..m {
                let kh = kmat[i][j] * h(j, k);
                for l in 0..m {
                    trace += kh * lmat[k][l] * h(l, i);
                }
            }
        }
    }
    trace / ((m as f64 - 1.0) * (m as f64 - 1.0))
}

/// Γ(s/2) for a positive integer `s`, from the factorial and half-integer
/// closed forms.
pub fn gamma_half(s: usize) -> f64 {
    assert!(s >= 1);
    let sqrt_pi = std::f64::consts::PI.sqrt();
    if s.is_multiple_of(2) {
        // Γ(m) = (m-1)!
        let m = s / 2;
        (1..m).map(|i| i as f64).product()
    } else {
        // Γ(m + 1/2) = sqrt(pi) Π_{i=1}^{m} (i - 1/2)
        let m = (s - 1) / 2;
        sqrt_pi * (1..=m).map(|i| i as f64 - 0.5).product::<f64>()
    }
}

/// `sqrt(pi) Γ((p+1)/2) / Γ(p/2)`.
pub fn oracle_projection_constant(p: usize) -> f64 {
    std::f64::consts::PI.sqrt() * gamma_half(p + 1) / gamma_half(p)
}

/// One projection's residual term:
/// `4 C_p C_q / (K n (n-2)(n-3)) Σ_i (Σ_l |N_i - N_l|)(Σ_l |vᵀ(Y_i - Y_l)|)`.
pub fn oracle_residual_term(noise: &[f64], y: &[Vec<f64>], v: &[f64], p: usize, k: usize) -> f64 {
    let n = noise.len();
    assert_eq!(y.len(), n);
    let q = v.len();
    let nf = n as f64;
    let coef = 4.0 * oracle_projection_constant(p) * oracle_projection_constant(q)
        / (k as f64 * nf * (nf - 2.0) * (nf - 3.0));
    let mut total = 0.0;
    for i in 0..n {
        let mut noise_sum = 0.0;
        for l in 0..n {
            noise_sum += (noise[i] - noise[l]).abs();
        }
        let mut y_sum = 0.0;
        for l in 0..n {
            let mut inner = 0.0;
            for t in 0..q {
                inner += v[t] * (y[i][t] - y[l][t]);
            }
            y_sum += inner.abs();
        }
        total += noise_sum * y_sum;
    }
    coef * total
}
