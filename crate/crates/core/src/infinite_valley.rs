//! Infinite-valley Monte Carlo for the limit `L_∞(a)` of the
//! pseudo-likelihood, and the closed forms available for the Temkin,
//! two-point and lazy Temkin families.
//!
//! The two-sided landscape `Ṽ` is built from i.i.d. increments: on the
//! right `Ṽ(x) − Ṽ(x−1) = log ρ_x` with `Ṽ ≥ 0` on `[0, M]`, on the left the
//! same relation read backwards with `Ṽ > 0` on `[−M, −1]`. Both conditions
//! are imposed by rejection, over the window or over `M + lookahead` steps;
//! the longer horizon brings the window's law closer to conditioning on the
//! whole half-line. The walk's stationary law
//! in that landscape is `ν(x) ∝ e^{−Ṽ(x−1)} + e^{−Ṽ(x)}`, normalized over
//! `x ∈ [−M+1, M]`.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use rayon::prelude::*;

use crate::error::{domain, Error, Result};
use crate::model::{entropy_closed, kl_unchecked, FamilyKind, ModelFamily, ThetaParams};
use crate::rng::{stream_id, substream, TAG_VALLEY};

pub const DEFAULT_WINDOW: usize = 100;
pub const DEFAULT_ATTEMPT_CAP: u64 = 1_000_000;
/// Float slack in the positivity conditions, so that lattice landscapes
/// returning to 0 are judged by their exact value.
const LEVEL_SLACK: f64 = 1e-9;

/// Discrete law of one landscape increment.
#[derive(Debug, Clone)]
pub struct IncrementLaw {
    values: Vec<f64>,
    law: WeightedIndex<f64>,
}

impl IncrementLaw {
    pub fn new(values: Vec<f64>, probs: &[f64]) -> Result<Self> {
        if values.len() != probs.len() || values.is_empty() {
            return Err(domain("increment values and probabilities differ in length"));
        }
        let law = WeightedIndex::new(probs).map_err(|e| domain(format!("bad increment law: {e}")))?;
        Ok(Self { values, law })
    }

    /// Right (`log ρ_i`) and left (`−log ρ_i`) laws of `θ`.
    pub fn from_theta(theta: &ThetaParams) -> Result<(Self, Self)> {
        let lr = theta.log_rho();
        let left = lr.iter().map(|v| -v).collect();
        Ok((Self::new(lr, theta.p())?, Self::new(left, theta.p())?))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InfiniteValleySample {
    /// Half-width `M` of the window.
    pub m: usize,
    /// `Ṽ(x)` for `x = −M..=M` (index `x + M`).
    pub v_tilde: Vec<f64>,
    /// Increment index behind `Ṽ(x) − Ṽ(x−1)` for `x = −M+1..=M` (index
    /// `x + M − 1`); the atom of `ω̃(x)` for landscapes built from `θ`.
    pub atom: Vec<usize>,
    /// `ν(x)`, `ν⁺(x)`, `ν⁻(x)` and `ω̃(x)` for `x = −M+1..=M` (index
    /// `x + M − 1`).
    pub nu: Vec<f64>,
    pub nu_plus: Vec<f64>,
    pub nu_minus: Vec<f64>,
    pub omega_tilde: Vec<f64>,
    /// `(e^{−Ṽ(M)} + e^{−Ṽ(−M)}) / Z`: weight of the window edges.
    pub truncation_mass_bound: f64,
    /// Rejection attempts used by the right and left branches.
    pub attempts: (u64, u64),
}

impl InfiniteValleySample {
    /// `Ṽ(x)` for `−M ≤ x ≤ M`.
    pub fn v(&self, x: i64) -> f64 {
        self.v_tilde[(x + self.m as i64) as usize]
    }

    /// Sites `x = −M+1..=M` in the order of the per-site vectors.
    pub fn sites(&self) -> impl Iterator<Item = i64> {
        let m = self.m as i64;
        -m + 1..=m
    }

    /// `Σ_x ν(x) 1{atom(x) = j}`.
    pub fn atom_mass(&self, j: usize) -> f64 {
        self.nu.iter().zip(&self.atom).filter(|(_, &k)| k == j).map(|(v, _)| v).sum()
    }

    /// `Σ_x ν(x)(2ω̃(x) − 1) = Σ_x (ν⁺(x) − ν⁻(x))`.
    pub fn drift(&self) -> f64 {
        self.nu_plus.iter().zip(&self.nu_minus).map(|(p, m)| p - m).sum()
    }
}

/// Partial sums of one branch, rejection-sampled until all of them clear
/// the level (`≥ 0` or `> 0`).
fn sample_branch<R: Rng + ?Sized>(
    law: &IncrementLaw,
    m: usize,
    strict: bool,
    cap: u64,
    rng: &mut R,
) -> Result<(Vec<f64>, Vec<usize>, u64)> {
    let mut sums = Vec::with_capacity(m);
    let mut idx = Vec::with_capacity(m);
    for attempt in 1..=cap {
        sums.clear();
        idx.clear();
        let mut acc = 0.0;
        let ok = (0..m).all(|_| {
            let i = law.law.sample(rng);
            acc += law.values[i];
            sums.push(acc);
            idx.push(i);
            if strict {
                acc > LEVEL_SLACK
            } else {
                acc >= -LEVEL_SLACK
            }
        });
        if ok {
            return Ok((sums, idx, attempt));
        }
    }
    Err(Error::SamplerExhausted { attempts: cap })
}

/// Landscape from explicit right / left increment laws. The left law gives
/// `Ṽ(x−1) − Ṽ(x)` for `x ≤ 0`.
/// Branches are conditioned over `m + ahead` steps and cut to `m`.
pub fn sample_from_increments<R: Rng + ?Sized>(
    right: &IncrementLaw,
    left: &IncrementLaw,
    m: usize,
    ahead: usize,
    cap: u64,
    rng: &mut R,
) -> Result<InfiniteValleySample> {
    if m < 1 {
        return Err(domain("window radius must be positive"));
    }
    let (r_sums, r_idx, r_att) = sample_branch(right, m + ahead, false, cap, rng)?;
    let (l_sums, l_idx, l_att) = sample_branch(left, m + ahead, true, cap, rng)?;
    let (r_sums, r_idx, l_sums, l_idx) = (&r_sums[..m], &r_idx[..m], &l_sums[..m], &l_idx[..m]);

    let mut v = Vec::with_capacity(2 * m + 1);
    v.extend(l_sums.iter().rev());
    v.push(0.0);
    v.extend(r_sums);
    // l_idx[k] produced Ṽ(−k−1) from Ṽ(−k), i.e. the increment at site −k
    let mut atom: Vec<usize> = l_idx[..m].iter().rev().copied().collect();
    atom.extend(r_idx);

    let w: Vec<f64> = v.iter().map(|x| (-x).exp()).collect();
    let z: f64 = w.windows(2).map(|p| p[0] + p[1]).sum();
    let nu_minus: Vec<f64> = w[..2 * m].iter().map(|e| e / z).collect();
    let nu_plus: Vec<f64> = w[1..].iter().map(|e| e / z).collect();
    let nu: Vec<f64> = w.windows(2).map(|p| (p[0] + p[1]) / z).collect();
    let omega_tilde = v.windows(2).map(|p| 1.0 / (1.0 + (p[1] - p[0]).exp())).collect();
    Ok(InfiniteValleySample {
        m,
        truncation_mass_bound: (w[0] + w[2 * m]) / z,
        v_tilde: v,
        atom,
        nu,
        nu_plus,
        nu_minus,
        omega_tilde,
        attempts: (r_att, l_att),
    })
}

/// Landscape of `θ*` on `[−M, M]`, conditioned over the window only.
pub fn sample_infinite_valley<R: Rng + ?Sized>(theta_star: &ThetaParams, m: usize, rng: &mut R) -> Result<InfiniteValleySample> {
    sample_infinite_valley_with(theta_star, m, 0, DEFAULT_ATTEMPT_CAP, rng)
}

pub fn sample_infinite_valley_with<R: Rng + ?Sized>(
    theta_star: &ThetaParams,
    m: usize,
    lookahead: usize,
    cap: u64,
    rng: &mut R,
) -> Result<InfiniteValleySample> {
    if m < 10 {
        return Err(domain(format!("window radius {m} below 10")));
    }
    let (right, left) = IncrementLaw::from_theta(theta_star)?;
    sample_from_increments(&right, &left, m, lookahead, cap, rng)
}

/// `count` independent landscapes; sample `k` reads its own stream, so the
/// result does not depend on the thread count.
pub fn sample_valleys(theta_star: &ThetaParams, m: usize, lookahead: usize, count: usize, seed: u64) -> Result<Vec<InfiniteValleySample>> {
    (0..count as u64)
        .into_par_iter()
        .map(|k| sample_infinite_valley_with(theta_star, m, lookahead, DEFAULT_ATTEMPT_CAP, &mut substream(seed, stream_id(k, TAG_VALLEY))))
        .collect()
}

fn check_candidate(a: &[f64]) -> Result<()> {
    if a.is_empty() || a.iter().any(|&v| !(v > 0.0 && v < 1.0)) || a.windows(2).any(|w| w[0] >= w[1]) {
        return Err(domain(format!("candidate support {a:?} must be increasing in (0,1)")));
    }
    Ok(())
}

/// `Σ_x max_i {ν⁺(x) log a_i + ν⁻(x) log(1 − a_i)}`.
pub fn l_infinity(a: &[f64], s: &InfiniteValleySample) -> Result<f64> {
    check_candidate(a)?;
    let la: Vec<f64> = a.iter().map(|v| v.ln()).collect();
    let l1a: Vec<f64> = a.iter().map(|v| (1.0 - v).ln()).collect();
    Ok(s.nu_plus
        .iter()
        .zip(&s.nu_minus)
        .map(|(&p, &m)| {
            (0..a.len())
                .map(|i| if p == 0.0 { 0.0 } else { p * la[i] } + if m == 0.0 { 0.0 } else { m * l1a[i] })
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .sum())
}

/// `−Σ_x ν(x) H(ω̃(x)) − Σ_x ν(x) min_i d_KL(ω̃(x) | a_i)`.
pub fn l_infinity_entropy_form(a: &[f64], s: &InfiniteValleySample) -> Result<f64> {
    check_candidate(a)?;
    Ok(s.nu
        .iter()
        .zip(&s.omega_tilde)
        .filter(|(&nu, _)| nu > 0.0)
        .map(|(&nu, &w)| {
            let pen = a.iter().map(|&ai| kl_unchecked(w, ai)).fold(f64::INFINITY, f64::min);
            -nu * (entropy_closed(w) + pen)
        })
        .sum())
}

/// `L_∞(a)` on `samples` fresh landscapes drawn from `rng`.
pub fn l_infinity_mc<R: Rng + ?Sized>(a: &[f64], theta_star: &ThetaParams, m: usize, samples: usize, rng: &mut R) -> Result<Vec<f64>> {
    if samples == 0 {
        return Err(domain("need at least one sample"));
    }
    (0..samples).map(|_| l_infinity(a, &sample_infinite_valley(theta_star, m, rng)?)).collect()
}

/// Mean, variance and standard error of a Monte Carlo sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McSummary {
    pub count: usize,
    pub mean: f64,
    /// Unbiased sample variance (0 for a single sample).
    pub variance: f64,
    pub se: f64,
}

impl McSummary {
    pub fn of(x: &[f64]) -> Self {
        let n = x.len();
        let mean = x.iter().sum::<f64>() / n as f64;
        let variance = if n > 1 { x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64 } else { 0.0 };
        Self { count: n, mean, variance, se: (variance / n as f64).sqrt() }
    }
}

/// Closed-form limit: deterministic, or affine in the random mass
/// `ν^{(1/2)}` of the ½ atom.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LimitValue {
    Deterministic(f64),
    /// `intercept + slope · ν^{(1/2)}`.
    Random {
        intercept: f64,
        slope: f64,
    },
}

/// `−H(q) − min_i d_KL(q | a_i)`: limit contribution per unit of `ν` mass on
/// sites with environment `q`.
fn site_value(q: f64, a: &[f64]) -> f64 {
    -entropy_closed(q) - a.iter().map(|&ai| kl_unchecked(q, ai)).fold(f64::INFINITY, f64::min)
}

/// Mass `ν^{(j)}` of each atom fixed by `Σ ν^{(j)} = 1` and zero drift
/// `Σ ν^{(j)} (2a_j − 1) = 0`, for a two-atom support straddling ½.
pub fn balance_weights(a1: f64, a2: f64) -> Result<(f64, f64)> {
    if !(a1 < 0.5 && a2 > 0.5) {
        return Err(domain(format!("atoms ({a1}, {a2}) do not straddle 1/2")));
    }
    Ok(((a2 - 0.5) / (a2 - a1), (0.5 - a1) / (a2 - a1)))
}

/// Closed form of `L_∞` for candidate support `a` under `θ*`.
pub fn l_infinity_closed(family: &ModelFamily, a: &[f64], theta_star: &ThetaParams) -> Result<LimitValue> {
    check_candidate(a)?;
    let s = theta_star.a();
    match family.kind() {
        FamilyKind::Temkin => Ok(LimitValue::Deterministic(0.5 * (site_value(s[0], a) + site_value(s[1], a)))),
        FamilyKind::TwoPoint => {
            let (w1, w2) = balance_weights(s[0], s[1])?;
            Ok(LimitValue::Deterministic(w1 * site_value(s[0], a) + w2 * site_value(s[1], a)))
        }
        FamilyKind::LazyTemkin => {
            // the outer atoms carry equal mass by symmetry
            let outer = 0.5 * (site_value(s[0], a) + site_value(s[2], a));
            let half = site_value(0.5, a);
            if (half - outer).abs() <= 1e-12 * half.abs().max(1.0) {
                Ok(LimitValue::Deterministic(half))
            } else {
                Ok(LimitValue::Random { intercept: outer, slope: half - outer })
            }
        }
        FamilyKind::GeneralRecurrent { .. } => Err(Error::Unsupported("closed-form limit for the general family".into())),
    }
}

/// The unique `a′ ∈ (0, a*)` with `d_KL(a* | a′) = log 2 − H(a*)`, by
/// bisection.
pub fn lazy_threshold(a_star: f64, tol: f64) -> Result<f64> {
    if !(a_star > 0.0 && a_star < 0.5) {
        return Err(domain(format!("a* = {a_star} outside (0, 1/2)")));
    }
    let target = std::f64::consts::LN_2 - entropy_closed(a_star);
    let (mut lo, mut hi) = (0.0, a_star);
    while hi - lo > tol.max(f64::EPSILON) {
        let mid = 0.5 * (lo + hi);
        if mid == 0.0 || kl_unchecked(a_star, mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}
