//! Criterion functions: the annealed log-likelihood `ℓ_n`, its first order
//! term `n·L_n(a)`, the second order term `R_n·K_n(θ)` and the remainder
//! `r_n(θ)`, which add up to `ℓ_n` exactly.

use crate::error::{domain, Error, Result};
use crate::model::{entropy_vec, kl_vec, ThetaParams};
use crate::walk::WalkStats;

/// Relative slack when comparing a departure ratio with a threshold. It
/// absorbs rounding in thresholds that are exact in real arithmetic (e.g.
/// `β = 1` for a symmetric support built as `(a, 1 − a)`).
const TIE_RTOL: f64 = 1e-12;

/// `β_0 = −∞ < β_1 < … < β_{d−1} < β_d = +∞`.
#[derive(Debug, Clone, PartialEq)]
pub struct BetaThresholds {
    beta: Vec<f64>,
}

impl BetaThresholds {
    /// All `d + 1` values including the infinite ends.
    pub fn values(&self) -> &[f64] {
        &self.beta
    }

    pub fn d(&self) -> usize {
        self.beta.len() - 1
    }

    /// 0-based class of a site with `xi_plus` right and `xi_minus` left
    /// departures: the `i` with ratio in `(β_i, β_{i+1}]`. A ratio exactly
    /// on a threshold goes to the lower class; `xi_minus = 0` is `+∞`.
    pub fn classify(&self, xi_plus: u64, xi_minus: u64) -> usize {
        let d = self.d();
        if xi_minus == 0 {
            return d - 1;
        }
        let ratio = xi_plus as f64 / xi_minus as f64;
        (1..d).find(|&i| ratio <= self.beta[i] * (1.0 + TIE_RTOL)).map_or(d - 1, |i| i - 1)
    }
}

fn check_support(a: &[f64]) -> Result<()> {
    if a.is_empty() {
        return Err(domain("empty support"));
    }
    if let Some(&bad) = a.iter().find(|&&v| !(v > 0.0 && v < 1.0)) {
        return Err(domain(format!("support atom {bad} outside (0,1)")));
    }
    if a.windows(2).any(|w| w[0] >= w[1]) {
        return Err(domain(format!("support {a:?} not strictly increasing")));
    }
    Ok(())
}

/// `β_i = log((1−a_i)/(1−a_{i+1})) / log(a_{i+1}/a_i)`.
pub fn beta_thresholds(a: &[f64]) -> Result<BetaThresholds> {
    check_support(a)?;
    let mut beta = Vec::with_capacity(a.len() + 1);
    beta.push(f64::NEG_INFINITY);
    for w in a.windows(2) {
        beta.push(((1.0 - w[0]) / (1.0 - w[1])).ln() / (w[1] / w[0]).ln());
    }
    beta.push(f64::INFINITY);
    Ok(BetaThresholds { beta })
}

/// Per-site class `î(a, n, x)` over the range and the class counts
/// `R_n(a, i)`. Classes are 0-based.
#[derive(Debug, Clone, PartialEq)]
pub struct SiteClassification {
    /// `(x, î)` for every `x` in the range, increasing in `x`.
    pub labels: Vec<(usize, usize)>,
    /// `R_n(a, i)` for `i = 0..d`.
    pub counts: Vec<usize>,
}

impl SiteClassification {
    pub fn range_size(&self) -> usize {
        self.counts.iter().sum()
    }

    /// `R_n(a, ·) / R_n`.
    pub fn frequencies(&self) -> Result<Vec<f64>> {
        let r = self.range_size();
        if r == 0 {
            return Err(Error::UndefinedCriterion("empty range".into()));
        }
        Ok(self.counts.iter().map(|&c| c as f64 / r as f64).collect())
    }
}

pub fn classify_sites(a: &[f64], stats: &WalkStats) -> Result<SiteClassification> {
    let beta = beta_thresholds(a)?;
    let mut counts = vec![0; a.len()];
    let labels = stats
        .range()
        .iter()
        .map(|&x| {
            let i = beta.classify(stats.xi_plus(x), stats.xi_minus(x));
            counts[i] += 1;
            (x, i)
        })
        .collect();
    Ok(SiteClassification { labels, counts })
}

#[inline]
fn site_term(plus: f64, minus: f64, ln_a: f64, ln_1ma: f64) -> f64 {
    // 0 * log a must stay 0
    let left = if plus == 0.0 { 0.0 } else { plus * ln_a };
    let right = if minus == 0.0 { 0.0 } else { minus * ln_1ma };
    left + right
}

fn logs(a: &[f64]) -> (Vec<f64>, Vec<f64>) {
    (a.iter().map(|v| v.ln()).collect(), a.iter().map(|v| (1.0 - v).ln()).collect())
}

/// `L(a, π⁺, π⁻) = Σ_x max_i {π⁺(x) log a_i + π⁻(x) log(1 − a_i)}` for
/// arbitrary nonnegative occupation vectors.
pub fn criterion_l(a: &[f64], pi_plus: &[f64], pi_minus: &[f64]) -> Result<f64> {
    if pi_plus.len() != pi_minus.len() {
        return Err(domain("occupation vectors differ in length"));
    }
    if a.is_empty() || a.iter().any(|&v| !(v > 0.0 && v < 1.0)) {
        return Err(domain(format!("support {a:?} must lie in (0,1)")));
    }
    let (la, l1a) = logs(a);
    Ok(pi_plus
        .iter()
        .zip(pi_minus)
        .map(|(&pp, &pm)| (0..a.len()).map(|i| site_term(pp, pm, la[i], l1a[i])).fold(f64::NEG_INFINITY, f64::max))
        .sum())
}

/// `n·L_n(a) = Σ_{x ∈ ℛ_n} max_i {ξ⁺ log a_i + ξ⁻ log(1 − a_i)}`.
fn first_order_sum(la: &[f64], l1a: &[f64], stats: &WalkStats) -> f64 {
    stats
        .range()
        .iter()
        .map(|&x| {
            let (p, m) = (stats.xi_plus(x) as f64, stats.xi_minus(x) as f64);
            (0..la.len()).map(|i| site_term(p, m, la[i], l1a[i])).fold(f64::NEG_INFINITY, f64::max)
        })
        .sum()
}

/// `L_n(a)`, the pseudo-likelihood of the support; 0 on an empty range.
pub fn pseudo_likelihood_l(a: &[f64], stats: &WalkStats) -> Result<f64> {
    if a.is_empty() || a.iter().any(|&v| !(v > 0.0 && v < 1.0)) {
        return Err(domain(format!("support {a:?} must lie in (0,1)")));
    }
    if stats.range_size() == 0 {
        return Ok(0.0);
    }
    let (la, l1a) = logs(a);
    Ok(first_order_sum(&la, &l1a, stats) / stats.n() as f64)
}

/// Annealed log-likelihood
/// `ℓ_n(θ) = Σ_{x ∈ ℛ_n} log Σ_i p_i a_i^{ξ⁺} (1 − a_i)^{ξ⁻}`,
/// evaluated by log-sum-exp.
pub fn log_likelihood(theta: &ThetaParams, stats: &WalkStats) -> f64 {
    let (la, l1a) = logs(theta.a());
    let lp: Vec<f64> = theta.p().iter().map(|v| v.ln()).collect();
    let mut terms = vec![0.0; la.len()];
    stats
        .range()
        .iter()
        .map(|&x| {
            let (p, m) = (stats.xi_plus(x) as f64, stats.xi_minus(x) as f64);
            for (i, t) in terms.iter_mut().enumerate() {
                *t = site_term(p, m, la[i], l1a[i]) + lp[i];
            }
            log_sum_exp(&terms)
        })
        .sum()
}

fn log_sum_exp(v: &[f64]) -> f64 {
    let m = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + v.iter().map(|&t| (t - m).exp()).sum::<f64>().ln()
}

/// `K_n(θ) = Σ_i (R_n(a,i)/R_n) log p_i`.
pub fn criterion_k(theta: &ThetaParams, classification: &SiteClassification) -> Result<f64> {
    let freq = classification.frequencies()?;
    if freq.len() != theta.d() {
        return Err(domain("classification and parameter dimension differ"));
    }
    Ok(freq.iter().zip(theta.p()).map(|(&f, &p)| if f == 0.0 { 0.0 } else { f * p.ln() }).sum())
}

/// `K_n(θ)` written as `−H(R_n(a,·)/R_n) − d_KL(R_n(a,·)/R_n | p)`.
pub fn criterion_k_entropy_form(theta: &ThetaParams, classification: &SiteClassification) -> Result<f64> {
    let freq = classification.frequencies()?;
    Ok(-entropy_vec(&freq)? - kl_vec(&freq, theta.p())?)
}

/// `r_n(θ) = Σ_x log(1 + Σ_{i ≠ î} (p_i/p_î) U_i^{ξ(n−1,x)})`; nonnegative.
pub fn remainder(theta: &ThetaParams, stats: &WalkStats) -> Result<f64> {
    let classes = classify_sites(theta.a(), stats)?;
    Ok(remainder_with(theta, stats, &classes))
}

fn remainder_with(theta: &ThetaParams, stats: &WalkStats, classes: &SiteClassification) -> f64 {
    let (la, l1a) = logs(theta.a());
    let lp: Vec<f64> = theta.p().iter().map(|v| v.ln()).collect();
    classes
        .labels
        .iter()
        .map(|&(x, k)| {
            let (p, m) = (stats.xi_plus(x) as f64, stats.xi_minus(x) as f64);
            let s: f64 =
                (0..la.len()).filter(|&i| i != k).map(|i| (lp[i] - lp[k] + site_term(p, m, la[i] - la[k], l1a[i] - l1a[k])).exp()).sum();
            s.ln_1p()
        })
        .sum()
}

/// The four terms of `ℓ_n = n·L_n + R_n·K_n + r_n`, each computed on its
/// own route.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Expansion {
    pub log_likelihood: f64,
    /// `n · L_n(a)`
    pub first_order: f64,
    /// `R_n · K_n(θ)`
    pub second_order: f64,
    /// `r_n(θ)`
    pub remainder: f64,
}

impl Expansion {
    /// `ℓ_n − n·L_n − R_n·K_n − r_n`.
    pub fn residual(&self) -> f64 {
        self.log_likelihood - self.first_order - self.second_order - self.remainder
    }
}

pub fn expansion(theta: &ThetaParams, stats: &WalkStats) -> Result<Expansion> {
    if stats.range_size() == 0 {
        return Err(Error::UndefinedCriterion("empty range".into()));
    }
    let classes = classify_sites(theta.a(), stats)?;
    let (la, l1a) = logs(theta.a());
    Ok(Expansion {
        log_likelihood: log_likelihood(theta, stats),
        first_order: first_order_sum(&la, &l1a, stats),
        second_order: stats.range_size() as f64 * criterion_k(theta, &classes)?,
        remainder: remainder_with(theta, stats, &classes),
    })
}
