//! Estimators of `θ` from one trajectory: maximum likelihood, maximum
//! pseudo-likelihood, the Adelman-Enriquez moment estimator for the Temkin
//! model and the naive per-site frequency estimator.

use std::fmt;
use std::time::{Duration, Instant};

use crate::error::{domain, Error, Result};
use crate::likelihood::{classify_sites, log_likelihood, pseudo_likelihood_l};
use crate::model::{family_to_theta, FamilyKind, ModelFamily, ThetaParams};
use crate::optimize::{maximize_1d_scan, maximize_box_from, OptimResult, SearchBox, DEFAULT_RESTARTS, DEFAULT_TOL};
use crate::walk::WalkStats;

/// Grid size of the 1-D scan preceding Brent. `196 = 4 · 49`, so the
/// 50-point grid on the same interval is a subgrid.
pub const SCAN_POINTS: usize = 197;
const GRID_2D: usize = 21;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    Mle,
    Mple,
    Ae,
    Naive,
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::Mle => "MLE",
            Method::Mple => "MPLE",
            Method::Ae => "AE",
            Method::Naive => "Naive",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "mle" => Ok(Method::Mle),
            "mple" => Ok(Method::Mple),
            "ae" => Ok(Method::Ae),
            "naive" => Ok(Method::Naive),
            other => Err(Error::Config(format!("unknown estimator {other:?}"))),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Estimate {
    pub method: Method,
    /// Reported parameters by name, in reporting order.
    pub params: Vec<(String, f64)>,
    /// Full parameter when the estimate lies in the family.
    pub theta: Option<ThetaParams>,
    /// Objective at the estimate (`L_n`, `ℓ_n`, `ŵ` or moment mismatch).
    pub criterion_value: f64,
    pub evaluations: usize,
    pub wall_time: Duration,
    /// Non-fatal remarks, e.g. an estimate on the admissibility boundary.
    pub notes: Vec<String>,
}

impl Estimate {
    pub fn param(&self, name: &str) -> Option<f64> {
        self.params.iter().find(|(k, _)| k == name).map(|&(_, v)| v)
    }
}

fn require_range(stats: &WalkStats) -> Result<()> {
    if stats.range_size() == 0 {
        return Err(Error::InsufficientData("no positive site visited before time n".into()));
    }
    Ok(())
}

fn names(prefix: &str, count: usize) -> impl Iterator<Item = String> + '_ {
    (1..=count).map(move |i| format!("{prefix}{i}"))
}

/// Maximum pseudo-likelihood estimate: `ā` maximizes `L_n` over the
/// family's support box and `p̄_i = R_n(ā, i) / R_n`.
pub fn mple(stats: &WalkStats, family: &ModelFamily) -> Result<Estimate> {
    mple_with(stats, family, DEFAULT_TOL, DEFAULT_RESTARTS)
}

pub fn mple_with(stats: &WalkStats, family: &ModelFamily, tol: f64, restarts: usize) -> Result<Estimate> {
    let start = Instant::now();
    require_range(stats)?;
    let sbox = family.support_box();
    let objective = |s: &[f64]| pseudo_likelihood_l(&family.support_from(s), stats).unwrap_or(f64::NAN);
    let opt = match family.kind() {
        FamilyKind::Temkin | FamilyKind::LazyTemkin => {
            let iv = sbox.intervals()[0];
            maximize_1d_scan(|a| objective(&[a]), iv.lo, iv.hi, tol, SCAN_POINTS)?
        }
        FamilyKind::TwoPoint => {
            let warm = grid_best(&objective, &sbox);
            maximize_box_from(objective, &sbox, tol, restarts, &[warm])?
        }
        FamilyKind::GeneralRecurrent { .. } => maximize_box_from(objective, &sbox, tol, restarts, &[])?,
    };
    let a_bar = family.support_from(&opt.argmax);
    if a_bar.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Constraint(format!("pseudo-likelihood maximizer {a_bar:?} has coincident atoms")));
    }
    let classes = classify_sites(&a_bar, stats)?;
    let p_bar = classes.frequencies()?;

    let (params, free): (Vec<(String, f64)>, Vec<f64>) = match family.kind() {
        FamilyKind::Temkin => (vec![("a".into(), a_bar[0]), ("p1".into(), p_bar[0]), ("p2".into(), p_bar[1])], vec![a_bar[0]]),
        FamilyKind::LazyTemkin => {
            let r = p_bar[1];
            let mut params = vec![("a".into(), a_bar[0]), ("r".into(), r)];
            params.extend(names("p", 3).zip(p_bar.iter().copied()));
            (params, vec![a_bar[0], family.bounds().intervals()[1].clamp(r)])
        }
        FamilyKind::TwoPoint | FamilyKind::GeneralRecurrent { .. } => {
            let mut params: Vec<(String, f64)> = names("a", a_bar.len()).zip(a_bar.iter().copied()).collect();
            params.extend(names("p", p_bar.len()).zip(p_bar.iter().copied()));
            (params, opt.argmax.clone())
        }
    };
    let theta = match family.kind() {
        FamilyKind::GeneralRecurrent { .. } => ThetaParams::new(a_bar.clone(), p_bar.clone(), family.eps0()).ok(),
        _ => family_to_theta(family, &free).ok(),
    };
    Ok(Estimate {
        method: Method::Mple,
        params,
        theta,
        criterion_value: opt.value,
        evaluations: opt.evaluations,
        wall_time: start.elapsed(),
        notes: Vec::new(),
    })
}

fn grid_best<F: Fn(&[f64]) -> f64>(f: &F, sbox: &SearchBox) -> Vec<f64> {
    let iv = sbox.intervals();
    let at = |k: usize, j: usize| iv[j].lo + iv[j].width() * k as f64 / (GRID_2D - 1) as f64;
    let mut best = (f64::NEG_INFINITY, sbox.center());
    for i in 0..GRID_2D {
        for k in 0..GRID_2D {
            let x = [at(i, 0), at(k, 1)];
            let v = f(&x);
            if v > best.0 {
                best = (v, x.to_vec());
            }
        }
    }
    best.1
}

/// Maximizes `ℓ_n(map(free))` over `bounds`, always including the warm
/// starts in the comparison.
pub(crate) fn maximize_likelihood<M>(
    stats: &WalkStats,
    bounds: &SearchBox,
    map: M,
    warm: &[Vec<f64>],
    tol: f64,
    restarts: usize,
) -> Result<OptimResult>
where
    M: Fn(&[f64]) -> Result<ThetaParams>,
{
    let objective = |x: &[f64]| map(x).map(|th| log_likelihood(&th, stats)).unwrap_or(f64::NAN);
    let mut opt = if bounds.dim() == 1 {
        let iv = bounds.intervals()[0];
        maximize_1d_scan(|a| objective(&[a]), iv.lo, iv.hi, tol, SCAN_POINTS)?
    } else {
        maximize_box_from(objective, bounds, tol, restarts, warm)?
    };
    for w in warm {
        let mut w = w.clone();
        bounds.project(&mut w);
        let v = objective(&w);
        opt.evaluations += 1;
        if v > opt.value {
            opt.argmax = w;
            opt.value = v;
        }
    }
    Ok(opt)
}

/// Maximum likelihood estimate over the family's free-parameter box, warm
/// started at the pseudo-likelihood estimate.
pub fn mle(stats: &WalkStats, family: &ModelFamily) -> Result<Estimate> {
    mle_with(stats, family, DEFAULT_TOL, DEFAULT_RESTARTS)
}

pub fn mle_with(stats: &WalkStats, family: &ModelFamily, tol: f64, restarts: usize) -> Result<Estimate> {
    let start = Instant::now();
    require_range(stats)?;
    if let FamilyKind::GeneralRecurrent { .. } = family.kind() {
        return Err(Error::Unsupported("likelihood maximization for the general d-point family".into()));
    }
    let warm = mple_with(stats, family, tol, restarts)?;
    let warm_free = match &warm.theta {
        Some(th) => family.free_from_theta(th),
        None => family.bounds().center(),
    };
    let opt = maximize_likelihood(stats, family.bounds(), |x| family_to_theta(family, x), &[warm_free], tol, restarts)?;
    let theta = family_to_theta(family, &opt.argmax)?;
    let mut params: Vec<(String, f64)> = family.free_names().into_iter().zip(opt.argmax.iter().copied()).collect();
    if family.kind() != FamilyKind::LazyTemkin {
        params.extend(names("p", theta.d()).zip(theta.p().iter().copied()));
    }
    Ok(Estimate {
        method: Method::Mle,
        params,
        theta: Some(theta),
        criterion_value: opt.value,
        evaluations: opt.evaluations + warm.evaluations,
        wall_time: start.elapsed(),
        notes: Vec::new(),
    })
}

/// `a = (1 − √(2w − 1)) / 2`, the root below ½ of `w = a² + (1 − a)²`.
pub fn ae_invert(w: f64) -> Result<f64> {
    if !(w <= 1.0) || w < 0.5 {
        return Err(Error::NoSolution { w });
    }
    Ok((1.0 - (2.0 * w - 1.0).sqrt()) / 2.0)
}

/// Adelman-Enriquez moment estimator for the Temkin model. Among positive
/// sites left at least twice with a first step to the right, `ŵ` is the
/// fraction whose second departure was also to the right.
pub fn ae_estimator_temkin(path: &[usize]) -> Result<Estimate> {
    let start = Instant::now();
    if path.first() != Some(&0) {
        return Err(Error::MalformedPath { index: 0, reason: "path must start at 0".into() });
    }
    let max = path.iter().copied().max().unwrap_or(0);
    // per site: number of departures seen (capped at 2), first direction
    let mut seen = vec![0u8; max + 1];
    let mut first_right = vec![false; max + 1];
    let (mut eligible, mut both_right) = (0u64, 0u64);
    for (t, w) in path.windows(2).enumerate() {
        let (x, y) = (w[0], w[1]);
        if y != x + 1 && y + 1 != x {
            return Err(Error::MalformedPath { index: t + 1, reason: format!("step {x} -> {y}") });
        }
        if x == 0 {
            continue;
        }
        let right = y == x + 1;
        match seen[x] {
            0 => first_right[x] = right,
            1 if first_right[x] => {
                eligible += 1;
                both_right += u64::from(right);
            }
            _ => {}
        }
        seen[x] = seen[x].saturating_add(1).min(2);
    }
    if eligible == 0 {
        return Err(Error::InsufficientData("no site left twice after a first step to the right".into()));
    }
    let w_hat = both_right as f64 / eligible as f64;
    let a = ae_invert(w_hat)?;
    let mut notes = Vec::new();
    if w_hat == 0.5 {
        notes.push("w = 1/2: estimate on the admissibility boundary".to_string());
    }
    Ok(Estimate {
        method: Method::Ae,
        params: vec![("a".into(), a), ("w".into(), w_hat)],
        theta: ThetaParams::new(vec![a, 1.0 - a], vec![0.5, 0.5], crate::model::DEFAULT_EPS0).ok(),
        criterion_value: w_hat,
        evaluations: eligible as usize,
        wall_time: start.elapsed(),
        notes,
    })
}

/// Per-site frequencies `ω̂_x = ξ⁺(n, x) / ξ(n−1, x)` over the range.
#[derive(Debug, Clone, PartialEq)]
pub struct NaiveEstimate {
    /// `(x, ω̂_x)` increasing in `x`.
    pub sites: Vec<(usize, f64)>,
}

impl NaiveEstimate {
    /// Support points of the empirical law `(1/R_n) Σ δ_{ω̂_x}` with their
    /// masses, increasing.
    pub fn mixture(&self) -> Vec<(f64, f64)> {
        let mut vals: Vec<f64> = self.sites.iter().map(|&(_, w)| w).collect();
        vals.sort_by(f64::total_cmp);
        let unit = 1.0 / vals.len() as f64;
        let mut out: Vec<(f64, f64)> = Vec::new();
        for v in vals {
            match out.last_mut() {
                Some(last) if last.0 == v => last.1 += unit,
                _ => out.push((v, unit)),
            }
        }
        out
    }

    /// Empirical mass strictly below and strictly above `t`.
    pub fn mass_split(&self, t: f64) -> (f64, f64) {
        let r = self.sites.len() as f64;
        let below = self.sites.iter().filter(|&&(_, w)| w < t).count() as f64;
        let above = self.sites.iter().filter(|&&(_, w)| w > t).count() as f64;
        (below / r, above / r)
    }

    fn central_moment(&self, k: i32) -> f64 {
        self.sites.iter().map(|&(_, w)| (w - 0.5).powi(k)).sum::<f64>() / self.sites.len() as f64
    }
}

pub fn naive_estimator(stats: &WalkStats) -> NaiveEstimate {
    let sites = stats.range().iter().map(|&x| (x, stats.xi_plus(x) as f64 / stats.xi(x) as f64)).collect();
    NaiveEstimate { sites }
}

/// Moment-matching projection of the naive empirical law onto a family.
/// Temkin matches `E(ω − ½)²`, lazy Temkin the second and fourth central
/// moments, two-point the mean and second moment.
pub fn naive_projection(naive: &NaiveEstimate, family: &ModelFamily) -> Result<Estimate> {
    let start = Instant::now();
    if naive.sites.is_empty() {
        return Err(Error::InsufficientData("empty range".into()));
    }
    let b = family.bounds().intervals();
    let m2 = naive.central_moment(2);
    let (free, mismatch, evaluations) = match family.kind() {
        FamilyKind::Temkin => {
            let a = b[0].clamp(0.5 - m2.sqrt());
            (vec![a], (m2 - (0.5 - a).powi(2)).abs(), 0)
        }
        FamilyKind::LazyTemkin => {
            let m4 = naive.central_moment(4);
            if m2 == 0.0 {
                return Err(Error::InsufficientData("all naive estimates equal 1/2".into()));
            }
            let a = b[0].clamp(0.5 - (m4 / m2).sqrt());
            let r = b[1].clamp(1.0 - m2 * m2 / m4);
            let s2 = (0.5 - a).powi(2);
            (vec![a, r], ((1.0 - r) * s2 - m2).abs() + ((1.0 - r) * s2 * s2 - m4).abs(), 0)
        }
        FamilyKind::TwoPoint => {
            let r = naive.sites.len() as f64;
            let mean = naive.sites.iter().map(|&(_, w)| w).sum::<f64>() / r;
            let raw2 = naive.sites.iter().map(|&(_, w)| w * w).sum::<f64>() / r;
            let loss = |x: &[f64]| match family_to_theta(family, x) {
                Ok(th) => {
                    let e1: f64 = th.a().iter().zip(th.p()).map(|(a, p)| a * p).sum();
                    let e2: f64 = th.a().iter().zip(th.p()).map(|(a, p)| a * a * p).sum();
                    -((e1 - mean).powi(2) + (e2 - raw2).powi(2))
                }
                Err(_) => f64::NAN,
            };
            let opt = maximize_box_from(loss, family.bounds(), DEFAULT_TOL, DEFAULT_RESTARTS, &[])?;
            (opt.argmax, -opt.value, opt.evaluations)
        }
        FamilyKind::GeneralRecurrent { .. } => return Err(Error::Unsupported("moment projection for the general d-point family".into())),
    };
    let theta = family_to_theta(family, &free)?;
    let params = family.free_names().into_iter().zip(free).collect();
    Ok(Estimate {
        method: Method::Naive,
        params,
        theta: Some(theta),
        criterion_value: mismatch,
        evaluations,
        wall_time: start.elapsed(),
        notes: Vec::new(),
    })
}

/// Runs one estimator on a dataset. `path` is needed by [`Method::Ae`] only.
pub fn estimate(
    method: Method,
    stats: &WalkStats,
    path: Option<&[usize]>,
    family: &ModelFamily,
    tol: f64,
    restarts: usize,
) -> Result<Estimate> {
    match method {
        Method::Mple => mple_with(stats, family, tol, restarts),
        Method::Mle => mle_with(stats, family, tol, restarts),
        Method::Naive => naive_projection(&naive_estimator(stats), family),
        Method::Ae => {
            if family.kind() != FamilyKind::Temkin {
                return Err(Error::Unsupported(format!("AE estimator for the {} family", family.kind().name())));
            }
            let path = path.ok_or_else(|| domain("AE estimator needs the recorded path"))?;
            ae_estimator_temkin(path)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::environment::sample_environment;
    use crate::model::DEFAULT_EPS0;
    use crate::rng::substream;
    use crate::walk::{simulate_walk, stats_from_path};

    fn family(kind: FamilyKind) -> ModelFamily {
        ModelFamily::new(kind, DEFAULT_EPS0).unwrap()
    }

    fn dataset(kind: FamilyKind, free: &[f64], n: u64, seed: u64) -> (WalkStats, Vec<usize>) {
        let th = family_to_theta(&family(kind), free).unwrap();
        let env = sample_environment(&th, 100_000, &mut substream(seed, 1)).unwrap();
        let (s, p) = simulate_walk(&env, n, substream(seed, 2), true).unwrap();
        (s, p.unwrap())
    }

    #[test]
    fn ae_examples() {
        assert!((ae_invert(0.58).unwrap() - 0.3).abs() < 1e-12);
        assert_eq!(ae_invert(0.5).unwrap(), 0.5);
        assert!(matches!(ae_invert(0.4), Err(Error::NoSolution { .. })));
    }

    #[test]
    fn ae_round_trip() {
        for k in 0..=40 {
            let a = 0.05 + 0.01 * k as f64;
            let w = a * a + (1.0 - a) * (1.0 - a);
            assert!((ae_invert(w).unwrap() - a).abs() < 1e-12, "a = {a}");
        }
    }

    #[test]
    fn ae_counts_from_path() {
        // site 1: R, L, R -> first right, second left; site 2: R, R
        // site 1: R then L; site 2: R then R; site 3: L first, not eligible
        let path = [0, 1, 2, 3, 2, 3, 2, 1, 0, 1, 2];
        let e = ae_estimator_temkin(&path).unwrap();
        let w = e.param("w").unwrap();
        assert!((w - 0.5).abs() < 1e-15);
        assert!(!e.notes.is_empty());
        assert!(matches!(ae_estimator_temkin(&[0, 1, 0]), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn naive_examples() {
        let s = WalkStats::from_counts(vec![1, 3], vec![0, 1]).unwrap();
        let nv = naive_estimator(&s);
        assert_eq!(nv.sites, vec![(1, 0.75)]);
        assert_eq!(nv.mixture(), vec![(0.75, 1.0)]);
        let empty = WalkStats::from_counts(vec![1], vec![0]).unwrap();
        assert!(naive_estimator(&empty).sites.is_empty());
    }

    #[test]
    fn mple_single_site_goes_to_half() {
        let s = WalkStats::from_counts(vec![0, 5], vec![0, 5]).unwrap();
        let fam = family(FamilyKind::Temkin);
        let e = mple(&s, &fam).unwrap();
        let hi = fam.support_box().intervals()[0].hi;
        assert!((e.param("a").unwrap() - hi).abs() < 1e-6, "{:?}", e.params);
        // with an atom at 1/2 the criterion no longer depends on a
        let e = mple(&s, &family(FamilyKind::LazyTemkin)).unwrap();
        assert_eq!(e.param("r"), Some(1.0));
        assert!((e.criterion_value - 0.5f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn empty_range_is_an_error() {
        let s = stats_from_path(&[0, 1]).unwrap();
        assert!(mple(&s, &family(FamilyKind::Temkin)).is_err());
        assert!(mle(&s, &family(FamilyKind::Temkin)).is_err());
    }

    #[test]
    fn mple_probabilities_sum_to_one_and_audit_grid() {
        for (kind, free) in [(FamilyKind::Temkin, vec![0.3]), (FamilyKind::LazyTemkin, vec![0.3, 0.2])] {
            let (s, _) = dataset(kind, &free, 20_000, 7);
            let fam = family(kind);
            let e = mple(&s, &fam).unwrap();
            let total: f64 = e.params.iter().filter(|(k, _)| k.starts_with('p')).map(|&(_, v)| v).sum();
            assert_eq!(total, 1.0);
            let best = pseudo_likelihood_l(&fam.support_from(&[e.param("a").unwrap()]), &s).unwrap();
            assert_eq!(best, e.criterion_value);
            let iv = fam.support_box().intervals()[0];
            let step = (iv.hi - iv.lo) / (SCAN_POINTS - 1) as f64;
            for j in 0..50 {
                let a = iv.lo + step * (4 * j) as f64;
                assert!(pseudo_likelihood_l(&fam.support_from(&[a]), &s).unwrap() <= best, "a = {a}");
            }
        }
    }

    #[test]
    fn mle_beats_warm_start() {
        for (kind, free) in
            [(FamilyKind::Temkin, vec![0.3]), (FamilyKind::LazyTemkin, vec![0.3, 0.2]), (FamilyKind::TwoPoint, vec![0.4, 0.7])]
        {
            let (s, _) = dataset(kind, &free, 10_000, 3);
            let fam = family(kind);
            let warm = mple(&s, &fam).unwrap();
            let e = mle(&s, &fam).unwrap();
            let th = e.theta.as_ref().unwrap();
            assert!(fam.bounds().contains(&fam.free_from_theta(th)));
            assert_eq!(log_likelihood(th, &s), e.criterion_value);
            let warm_theta = family_to_theta(&fam, &fam.free_from_theta(warm.theta.as_ref().unwrap())).unwrap();
            assert!(e.criterion_value >= log_likelihood(&warm_theta, &s));
        }
    }

    #[test]
    fn bernoulli_closed_form() {
        let s = WalkStats::from_counts(vec![0, 3], vec![0, 7]).unwrap();
        let bounds = SearchBox::new(vec![crate::optimize::Interval::new(0.05, 0.95).unwrap()]).unwrap();
        let map = |x: &[f64]| ThetaParams::new(vec![x[0]], vec![1.0], 0.02);
        let opt = maximize_likelihood(&s, &bounds, map, &[], 1e-9, 1).unwrap();
        assert!((opt.argmax[0] - 0.3).abs() < 1e-6);
        let clipped = SearchBox::new(vec![crate::optimize::Interval::new(0.4, 0.95).unwrap()]).unwrap();
        let opt = maximize_likelihood(&s, &clipped, map, &[], 1e-9, 1).unwrap();
        assert_eq!(opt.argmax[0], 0.4);
    }

    #[test]
    fn general_family() {
        let (s, _) = dataset(FamilyKind::LazyTemkin, &[0.3, 0.2], 5_000, 4);
        let fam = family(FamilyKind::GeneralRecurrent { d: 2 });
        assert!(matches!(mle(&s, &fam), Err(Error::Unsupported(_))));
        let e = mple(&s, &fam).unwrap();
        assert_eq!(e.params.len(), 4);
    }

    #[test]
    fn naive_projection_recovers_exact_moments() {
        // two sites at 0.3 and 0.7 give E(w - 1/2)^2 = 0.04
        let s = WalkStats::from_counts(vec![1, 3, 7], vec![0, 7, 3]).unwrap();
        let e = naive_projection(&naive_estimator(&s), &family(FamilyKind::Temkin)).unwrap();
        assert!((e.param("a").unwrap() - 0.3).abs() < 1e-12);
        let e = naive_projection(&naive_estimator(&s), &family(FamilyKind::TwoPoint)).unwrap();
        assert!(e.theta.is_some());
    }
}
