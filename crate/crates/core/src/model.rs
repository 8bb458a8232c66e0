//! Parameter space, model families and the entropy / Kullback-Leibler
//! primitives used throughout the crate.

use crate::error::{domain, Error, Result};
use crate::optimize::{Interval, SearchBox};

/// Default separation margin between atoms, from the borders of `(0,1)`,
/// and below every probability.
pub const DEFAULT_EPS0: f64 = 0.02;

const PROB_SUM_TOL: f64 = 1e-12;
const RECURRENCE_TOL: f64 = 1e-10;

/// `θ = (a, p)`: ordered support and probability vector of the environment
/// law `η = Σ p_i δ_{a_i}`.
#[derive(Debug, Clone, PartialEq)]
pub struct ThetaParams {
    a: Vec<f64>,
    p: Vec<f64>,
    eps0: f64,
}

impl ThetaParams {
    /// Validates the margin constraints: `a_1 ≥ ε0`, `1 − a_d ≥ ε0`,
    /// `a_{i+1} − a_i ≥ ε0`, `p_i ≥ ε0` and `Σ p_i = 1`.
    pub fn new(a: Vec<f64>, p: Vec<f64>, eps0: f64) -> Result<Self> {
        let d = a.len();
        if d == 0 || p.len() != d {
            return Err(domain(format!("support has {} atoms but {} probabilities", d, p.len())));
        }
        if !(eps0 > 0.0 && eps0 < 1.0 / (2.0 * d as f64)) {
            return Err(domain(format!("eps0 = {eps0} outside (0, 1/(2d)) for d = {d}")));
        }
        // Slack for atoms built as 1 - a, which are not exact in binary.
        let slack = 1e-12;
        if a[0] < eps0 - slack || 1.0 - a[d - 1] < eps0 - slack {
            return Err(domain(format!("support {a:?} closer than eps0 = {eps0} to the border")));
        }
        for w in a.windows(2) {
            if w[1] - w[0] < eps0 - slack {
                return Err(domain(format!("support {a:?} not increasing with gaps >= eps0 = {eps0}")));
            }
        }
        if let Some(&bad) = p.iter().find(|&&pi| pi < eps0 - slack) {
            return Err(domain(format!("probability {bad} below eps0 = {eps0}")));
        }
        let total: f64 = p.iter().sum();
        if (total - 1.0).abs() > PROB_SUM_TOL {
            return Err(domain(format!("probabilities sum to {total}")));
        }
        Ok(Self { a, p, eps0 })
    }

    pub fn a(&self) -> &[f64] {
        &self.a
    }

    pub fn p(&self) -> &[f64] {
        &self.p
    }

    pub fn eps0(&self) -> f64 {
        self.eps0
    }

    pub fn d(&self) -> usize {
        self.a.len()
    }

    /// `log ρ_i = log((1 − a_i)/a_i)` per atom.
    pub fn log_rho(&self) -> Vec<f64> {
        self.a.iter().map(|&ai| ((1.0 - ai) / ai).ln()).collect()
    }
}

/// `Σ p_i log((1 − a_i)/a_i)`; zero exactly for a recurrent environment.
pub fn recurrence_defect(a: &[f64], p: &[f64]) -> Result<f64> {
    if a.len() != p.len() || a.is_empty() {
        return Err(domain("support and probability vectors must have equal nonzero length"));
    }
    if let Some(&bad) = a.iter().chain(p.iter()).find(|&&v| !(v > 0.0 && v < 1.0)) {
        // p = 1 is legitimate for a single atom
        if !(a.len() == 1 && p[0] == 1.0 && a[0] > 0.0 && a[0] < 1.0) {
            return Err(domain(format!("entry {bad} outside (0,1)")));
        }
    }
    Ok(a.iter().zip(p).map(|(&ai, &pi)| pi * ((1.0 - ai) / ai).ln()).sum())
}

/// Model families with their free parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FamilyKind {
    /// `½δ_a + ½δ_{1−a}`, free parameter `a < ½`.
    Temkin,
    /// `p_1δ_{a_1} + p_2δ_{a_2}`, `a_1 < ½ < a_2`, `p` fixed by recurrence.
    TwoPoint,
    /// `(1−r)/2 δ_a + r δ_{1/2} + (1−r)/2 δ_{1−a}`, free `(a, r)`.
    LazyTemkin,
    /// Any `d`-point law; free vector is `(a_1..a_d, p_1..p_{d−1})`.
    GeneralRecurrent { d: usize },
}

impl FamilyKind {
    pub fn name(&self) -> &'static str {
        match self {
            FamilyKind::Temkin => "temkin",
            FamilyKind::TwoPoint => "two-point",
            FamilyKind::LazyTemkin => "lazy-temkin",
            FamilyKind::GeneralRecurrent { .. } => "general",
        }
    }
}

/// A family together with the closed box its free parameters live in.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelFamily {
    kind: FamilyKind,
    eps0: f64,
    bounds: SearchBox,
}

impl ModelFamily {
    /// Family with the widest box compatible with the `eps0` margins.
    pub fn new(kind: FamilyKind, eps0: f64) -> Result<Self> {
        let d = match kind {
            FamilyKind::Temkin | FamilyKind::TwoPoint => 2,
            FamilyKind::LazyTemkin => 3,
            FamilyKind::GeneralRecurrent { d } => {
                if d < 2 {
                    return Err(domain("general family needs d >= 2"));
                }
                d
            }
        };
        if !(eps0 > 0.0 && eps0 < 1.0 / (2.0 * d as f64)) {
            return Err(domain(format!("eps0 = {eps0} outside (0, 1/(2d)) for d = {d}")));
        }
        let iv = |lo: f64, hi: f64| Interval::new(lo, hi);
        let bounds = match kind {
            FamilyKind::Temkin => SearchBox::new(vec![iv(eps0, 0.5 - eps0)?])?,
            FamilyKind::TwoPoint => {
                let m = two_point_inner_margin(eps0);
                SearchBox::new(vec![iv(eps0, 0.5 - m)?, iv(0.5 + m, 1.0 - eps0)?])?
            }
            FamilyKind::LazyTemkin => SearchBox::new(vec![iv(eps0, 0.5 - eps0)?, iv(eps0, 1.0 - 2.0 * eps0)?])?,
            FamilyKind::GeneralRecurrent { d } => {
                let mut v = vec![iv(eps0, 1.0 - eps0)?; d];
                v.extend(std::iter::repeat_n(iv(eps0, 1.0 - eps0)?, d - 1));
                SearchBox::new(v)?
            }
        };
        Ok(Self { kind, eps0, bounds })
    }

    /// Same family restricted to a caller-supplied box, which must sit
    /// inside the default one.
    pub fn with_bounds(kind: FamilyKind, eps0: f64, bounds: SearchBox) -> Result<Self> {
        let base = Self::new(kind, eps0)?;
        if bounds.dim() != base.bounds.dim() {
            return Err(domain("box dimension does not match the family"));
        }
        for (b, o) in bounds.intervals().iter().zip(base.bounds.intervals()) {
            if b.lo < o.lo || b.hi > o.hi {
                return Err(domain(format!("box [{}, {}] exceeds admissible [{}, {}]", b.lo, b.hi, o.lo, o.hi)));
            }
        }
        Ok(Self { bounds, ..base })
    }

    pub fn kind(&self) -> FamilyKind {
        self.kind
    }

    pub fn eps0(&self) -> f64 {
        self.eps0
    }

    pub fn bounds(&self) -> &SearchBox {
        &self.bounds
    }

    /// Names of the free parameters, in order.
    pub fn free_names(&self) -> Vec<String> {
        match self.kind {
            FamilyKind::Temkin => vec!["a".into()],
            FamilyKind::TwoPoint => vec!["a1".into(), "a2".into()],
            FamilyKind::LazyTemkin => vec!["a".into(), "r".into()],
            FamilyKind::GeneralRecurrent { d } => (1..=d).map(|i| format!("a{i}")).chain((1..d).map(|i| format!("p{i}"))).collect(),
        }
    }

    /// Number of atoms of every member of the family.
    pub fn d(&self) -> usize {
        match self.kind {
            FamilyKind::Temkin | FamilyKind::TwoPoint => 2,
            FamilyKind::LazyTemkin => 3,
            FamilyKind::GeneralRecurrent { d } => d,
        }
    }

    /// Box of the support-only parameters searched by the pseudo-likelihood.
    pub fn support_box(&self) -> SearchBox {
        let iv = self.bounds.intervals();
        match self.kind {
            FamilyKind::Temkin | FamilyKind::LazyTemkin => SearchBox::from_intervals(vec![iv[0]]),
            FamilyKind::TwoPoint => self.bounds.clone(),
            FamilyKind::GeneralRecurrent { d } => SearchBox::from_intervals(iv[..d].to_vec()),
        }
    }

    /// Support vector built from support-only parameters.
    pub fn support_from(&self, params: &[f64]) -> Vec<f64> {
        match self.kind {
            FamilyKind::Temkin => vec![params[0], 1.0 - params[0]],
            FamilyKind::LazyTemkin => vec![params[0], 0.5, 1.0 - params[0]],
            FamilyKind::TwoPoint => vec![params[0], params[1]],
            FamilyKind::GeneralRecurrent { .. } => {
                let mut a = params.to_vec();
                a.sort_by(f64::total_cmp);
                a
            }
        }
    }

    /// Inverse of [`family_to_theta`] on its image.
    pub fn free_from_theta(&self, theta: &ThetaParams) -> Vec<f64> {
        match self.kind {
            FamilyKind::Temkin => vec![theta.a[0]],
            FamilyKind::TwoPoint => vec![theta.a[0], theta.a[1]],
            FamilyKind::LazyTemkin => vec![theta.a[0], theta.p[1]],
            FamilyKind::GeneralRecurrent { d } => {
                let mut v = theta.a.clone();
                v.extend_from_slice(&theta.p[..d - 1]);
                v
            }
        }
    }
}

/// Inner margin `m` of the two-point box `[ε0, ½ − m] × [½ + m, 1 − ε0]`
/// that keeps both recurrence-determined probabilities above `ε0`.
fn two_point_inner_margin(eps0: f64) -> f64 {
    // p_1 = B/(A+B) >= eps0 at the corner a_1 = eps0, a_2 = 1/2 + m.
    let k = eps0 / (1.0 - eps0) * ((1.0 - eps0) / eps0).ln();
    eps0.max(0.5 * (0.5 * k).tanh())
}

/// Maps a family's free parameters to `θ`.
pub fn family_to_theta(family: &ModelFamily, free: &[f64]) -> Result<ThetaParams> {
    if free.len() != family.bounds.dim() {
        return Err(domain(format!("expected {} free parameters, got {}", family.bounds.dim(), free.len())));
    }
    if !family.bounds.contains(free) {
        return Err(domain(format!("free parameters {free:?} outside the family box")));
    }
    let eps0 = family.eps0;
    match family.kind {
        FamilyKind::Temkin => {
            let a = free[0];
            ThetaParams::new(vec![a, 1.0 - a], vec![0.5, 0.5], eps0)
        }
        FamilyKind::TwoPoint => {
            let (a1, a2) = (free[0], free[1]);
            if !(a1 < 0.5 && 0.5 < a2) {
                return Err(domain(format!("two-point support needs a1 < 1/2 < a2, got ({a1}, {a2})")));
            }
            let lo = ((1.0 - a1) / a1).ln();
            let hi = (a2 / (1.0 - a2)).ln();
            ThetaParams::new(vec![a1, a2], vec![hi / (lo + hi), lo / (lo + hi)], eps0)
        }
        FamilyKind::LazyTemkin => {
            let (a, r) = (free[0], free[1]);
            let side = (1.0 - r) / 2.0;
            ThetaParams::new(vec![a, 0.5, 1.0 - a], vec![side, r, side], eps0)
        }
        FamilyKind::GeneralRecurrent { d } => {
            let a = free[..d].to_vec();
            let mut p = free[d..].to_vec();
            let head: f64 = p.iter().sum();
            p.push(1.0 - head);
            let theta = ThetaParams::new(a, p, eps0)?;
            let defect = recurrence_defect(&theta.a, &theta.p)?;
            if defect.abs() > RECURRENCE_TOL {
                return Err(Error::Constraint(format!("recurrence defect {defect:e} exceeds {RECURRENCE_TOL:e}")));
            }
            Ok(theta)
        }
    }
}

/// Binary entropy `H(q) = −q log q − (1−q) log(1−q)`.
pub fn entropy(q: f64) -> Result<f64> {
    if !(q > 0.0 && q < 1.0) {
        return Err(domain(format!("entropy argument {q} outside (0,1)")));
    }
    Ok(-(q * q.ln() + (1.0 - q) * (1.0 - q).ln()))
}

/// Binary entropy with `H(0) = H(1) = 0`; for internal use where boundary
/// arguments are legitimate.
pub(crate) fn entropy_closed(q: f64) -> f64 {
    -xlogx(q) - xlogx(1.0 - q)
}

fn xlogx(x: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * x.ln()
    }
}

/// Multinomial entropy `−Σ q_i log q_i`; zero entries contribute 0.
pub fn entropy_vec(q: &[f64]) -> Result<f64> {
    if let Some(&bad) = q.iter().find(|&&v| !(0.0..=1.0).contains(&v)) {
        return Err(domain(format!("probability entry {bad} outside [0,1]")));
    }
    Ok(-q.iter().map(|&v| xlogx(v)).sum::<f64>())
}

/// Binary Kullback-Leibler divergence `d_KL(q | q2)`.
pub fn kl(q: f64, q2: f64) -> Result<f64> {
    if !(q > 0.0 && q < 1.0 && q2 > 0.0 && q2 < 1.0) {
        return Err(domain(format!("kl arguments ({q}, {q2}) outside (0,1)")));
    }
    Ok(kl_unchecked(q, q2))
}

pub(crate) fn kl_unchecked(q: f64, q2: f64) -> f64 {
    let left = if q == 0.0 { 0.0 } else { q * (q / q2).ln() };
    let right = if q == 1.0 { 0.0 } else { (1.0 - q) * ((1.0 - q) / (1.0 - q2)).ln() };
    left + right
}

/// Multinomial divergence `Σ q_i log(q_i / q2_i)`.
pub fn kl_vec(q: &[f64], q2: &[f64]) -> Result<f64> {
    if q.len() != q2.len() {
        return Err(domain(format!("length mismatch {} vs {}", q.len(), q2.len())));
    }
    let mut total = 0.0;
    for (&a, &b) in q.iter().zip(q2) {
        if !(0.0..=1.0).contains(&a) {
            return Err(domain(format!("probability entry {a} outside [0,1]")));
        }
        if !(b > 0.0 && b <= 1.0) {
            return Err(domain(format!("reference entry {b} must be in (0,1]")));
        }
        if a > 0.0 {
            total += a * (a / b).ln();
        }
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn recurrence_defect_examples() {
        assert!(close(recurrence_defect(&[0.3, 0.7], &[0.5, 0.5]).unwrap(), 0.0, 1e-15));
        let p1 = (7.0f64 / 3.0).ln() / 3.5f64.ln();
        assert!(close(recurrence_defect(&[0.4, 0.7], &[p1, 1.0 - p1]).unwrap(), 0.0, 1e-12));
        assert!(close(recurrence_defect(&[0.4, 0.7], &[0.5, 0.5]).unwrap(), -0.220916376, 1e-6));
        assert!(recurrence_defect(&[0.0, 0.7], &[0.5, 0.5]).is_err());
        assert!(recurrence_defect(&[0.3, 1.0], &[0.5, 0.5]).is_err());
    }

    #[test]
    fn family_examples() {
        let temkin = ModelFamily::new(FamilyKind::Temkin, DEFAULT_EPS0).unwrap();
        let th = family_to_theta(&temkin, &[0.3]).unwrap();
        assert_eq!(th.a(), &[0.3, 0.7]);
        assert_eq!(th.p(), &[0.5, 0.5]);

        let lazy = ModelFamily::new(FamilyKind::LazyTemkin, DEFAULT_EPS0).unwrap();
        let th = family_to_theta(&lazy, &[0.3, 0.2]).unwrap();
        assert_eq!(th.a(), &[0.3, 0.5, 0.7]);
        assert!(th.p().iter().zip([0.4, 0.2, 0.4]).all(|(a, b)| close(*a, b, 1e-15)));

        let two = ModelFamily::new(FamilyKind::TwoPoint, DEFAULT_EPS0).unwrap();
        let th = family_to_theta(&two, &[0.4, 0.7]).unwrap();
        // log(7/3)/log(3.5), evaluated independently
        assert!(close(th.p()[0], 0.6763433160902349, 1e-12));
        assert!(close(th.p()[1], 0.3236566839097651, 1e-12));
    }

    #[test]
    fn family_rejections() {
        let two = ModelFamily::new(FamilyKind::TwoPoint, DEFAULT_EPS0).unwrap();
        assert!(matches!(family_to_theta(&two, &[0.6, 0.7]), Err(Error::Domain(_))));
        let temkin = ModelFamily::new(FamilyKind::Temkin, DEFAULT_EPS0).unwrap();
        assert!(family_to_theta(&temkin, &[0.495]).is_err());
        let general = ModelFamily::new(FamilyKind::GeneralRecurrent { d: 2 }, DEFAULT_EPS0).unwrap();
        assert!(matches!(family_to_theta(&general, &[0.4, 0.7, 0.5]), Err(Error::Constraint(_))));
        let p1 = (7.0f64 / 3.0).ln() / 3.5f64.ln();
        let th = family_to_theta(&general, &[0.4, 0.7, p1]).unwrap();
        assert!(recurrence_defect(th.a(), th.p()).unwrap().abs() < 1e-10);
        assert!(family_to_theta(&general, &[0.7, 0.4, p1]).is_err());
    }

    #[test]
    fn theta_validation() {
        assert!(ThetaParams::new(vec![0.3, 0.7], vec![0.5, 0.5], 0.02).is_ok());
        assert!(ThetaParams::new(vec![0.01, 0.7], vec![0.5, 0.5], 0.02).is_err());
        assert!(ThetaParams::new(vec![0.3, 0.31], vec![0.5, 0.5], 0.02).is_err());
        assert!(ThetaParams::new(vec![0.3, 0.7], vec![0.5, 0.6], 0.02).is_err());
        assert!(ThetaParams::new(vec![0.3, 0.7], vec![0.99, 0.01], 0.02).is_err());
        assert!(ThetaParams::new(vec![0.3, 0.7], vec![0.5, 0.5], 0.3).is_err());
    }

    #[test]
    fn entropy_and_kl_examples() {
        assert!(close(entropy(0.5).unwrap(), std::f64::consts::LN_2, 1e-15));
        assert!(close(entropy(0.3).unwrap(), 0.6108643020548935, 1e-12));
        assert_eq!(entropy_vec(&[1.0, 0.0, 0.0]).unwrap(), 0.0);
        assert!(entropy(0.0).is_err() && entropy(1.0).is_err());

        assert_eq!(kl(0.3, 0.3).unwrap(), 0.0);
        let d = kl(0.3, 0.5).unwrap();
        assert!(close(d, 0.08228287850505178, 1e-12));
        assert!(close(d, entropy(0.5).unwrap() - entropy(0.3).unwrap(), 1e-14));
        assert!(close(kl_vec(&[0.5, 0.5], &[0.25, 0.75]).unwrap(), 0.14384103622589042, 1e-12));
        assert!(kl(0.0, 0.5).is_err());
        assert!(kl_vec(&[0.5, 0.5], &[1.0, 0.0]).is_err());
    }

    #[test]
    fn kl_nonnegative_on_grid() {
        for i in 1..=100 {
            for j in 1..=100 {
                let q = i as f64 / 101.0;
                let q2 = j as f64 / 101.0;
                let d = kl(q, q2).unwrap();
                if i == j {
                    assert_eq!(d, 0.0);
                } else {
                    assert!(d > 0.0, "kl({q}|{q2}) = {d}");
                }
            }
        }
    }

    #[test]
    fn entropy_symmetric_on_grid() {
        for i in 1..1000 {
            let q = i as f64 / 1000.0;
            assert!(close(entropy(q).unwrap(), entropy(1.0 - q).unwrap(), 1e-14));
        }
    }

    #[test]
    fn two_point_margin_keeps_probabilities_admissible() {
        for eps0 in [0.001, 0.005, 0.01, 0.02, 0.05, 0.1, 0.2] {
            let fam = ModelFamily::new(FamilyKind::TwoPoint, eps0).unwrap();
            let iv = fam.bounds().intervals();
            for &(a1, a2) in &[(iv[0].lo, iv[1].lo), (iv[0].hi, iv[1].hi), (iv[0].lo, iv[1].hi), (iv[0].hi, iv[1].lo)] {
                assert!(family_to_theta(&fam, &[a1, a2]).is_ok(), "eps0 {eps0} corner ({a1}, {a2})");
            }
        }
    }

    fn family_strategy() -> impl Strategy<Value = (ModelFamily, Vec<f64>)> {
        (0usize..3, 0.005f64..0.15, proptest::collection::vec(0.0f64..1.0, 2)).prop_map(|(k, eps0, u)| {
            let kind = [FamilyKind::Temkin, FamilyKind::TwoPoint, FamilyKind::LazyTemkin][k];
            let fam = ModelFamily::new(kind, eps0).unwrap();
            let free = fam.bounds().intervals().iter().zip(&u).map(|(iv, &t)| iv.lo + t * (iv.hi - iv.lo)).collect();
            (fam, free)
        })
    }

    proptest! {
        #[test]
        fn families_map_to_recurrent_admissible_theta((fam, free) in family_strategy()) {
            let th = family_to_theta(&fam, &free).unwrap();
            prop_assert!(recurrence_defect(th.a(), th.p()).unwrap().abs() <= 1e-10);
            prop_assert!(ThetaParams::new(th.a().to_vec(), th.p().to_vec(), fam.eps0()).is_ok());
            prop_assert_eq!(fam.free_from_theta(&th).len(), free.len());
        }
    }
}
