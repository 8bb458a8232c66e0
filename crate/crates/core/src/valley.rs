//! Valley of the potential and the deep-site diagnostics.

use std::ops::RangeInclusive;

use crate::environment::PotentialProfile;
use crate::error::{domain, Error, Result};
use crate::walk::WalkStats;

/// Bottom `b` and right border `c` of the first valley of depth `threshold`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Valley {
    pub b: usize,
    pub c: usize,
    pub threshold: f64,
}

/// Depth `log n + √(log n)` of the valley the walk sits in at time `n`.
pub fn valley_depth(n: u64) -> f64 {
    let ln = (n as f64).ln();
    ln + ln.sqrt()
}

/// `c = min{x ≥ 0 : V(x) − min_{y ≤ x} V(y) ≥ h}` and `b` the first
/// minimizer of `V` on `[0, c]`, in one left-to-right pass.
pub fn find_valley(prof: &PotentialProfile, h: f64) -> Result<Valley> {
    if !(h > 0.0) {
        return Err(domain(format!("valley threshold must be positive, got {h}")));
    }
    let v = prof.values();
    let mut argmin = 0;
    for (x, &vx) in v.iter().enumerate() {
        if vx < v[argmin] {
            argmin = x;
        }
        if vx - v[argmin] >= h {
            return Ok(Valley { b: argmin, c: x, threshold: h });
        }
    }
    Err(Error::ValleyNotClosed { threshold: h, window: prof.x_max() })
}

/// Deep-site decomposition around the valley bottom.
#[derive(Debug, Clone, PartialEq)]
pub struct ValleyDecomposition {
    pub b: usize,
    pub c: usize,
    pub threshold: f64,
    pub delta: f64,
    /// `{x ≤ b : max_{[x,b]} V − V(x) ≥ δ log n}`.
    pub g_delta: Vec<usize>,
    /// `(b, c^δ]` as `b+1..=c^δ`; empty (`c^δ = b`) when `b + 1` already
    /// exceeds the barrier.
    pub d_delta: RangeInclusive<usize>,
    /// `G ∪ D`, increasing.
    pub r_delta: Vec<usize>,
}

impl ValleyDecomposition {
    pub fn d_sites(&self) -> Vec<usize> {
        self.d_delta.clone().collect()
    }
}

/// Decomposition with explicit barriers: `left_barrier` for `G` and
/// `right_barrier` for `D`.
pub fn deep_sites_with_barriers(
    prof: &PotentialProfile,
    valley: &Valley,
    left_barrier: f64,
    right_barrier: f64,
    delta: f64,
) -> ValleyDecomposition {
    let v = prof.values();
    let b = valley.b;

    // scan leftwards from b carrying the running max of V on [x, b]
    let mut g = Vec::new();
    let mut run_max = f64::NEG_INFINITY;
    for x in (0..=b).rev() {
        run_max = run_max.max(v[x]);
        if run_max - v[x] >= left_barrier {
            g.push(x);
        }
    }
    g.reverse();

    let mut end = b;
    let mut run_max = v[b];
    for (x, &vx) in v.iter().enumerate().skip(b + 1) {
        run_max = run_max.max(vx);
        if run_max - v[b] > right_barrier {
            break;
        }
        end = x;
    }
    let d_delta = (b + 1)..=end;

    let mut r = g.clone();
    r.extend(d_delta.clone());
    ValleyDecomposition { b, c: valley.c, threshold: valley.threshold, delta, g_delta: g, d_delta, r_delta: r }
}

/// `G_n^δ`, `D_n^δ` and `ℛ_n^δ` for horizon `n`; barriers `δ log n` and
/// `(1 − δ) log n`.
pub fn deep_sites(prof: &PotentialProfile, valley: &Valley, n: u64, delta: f64) -> Result<ValleyDecomposition> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(domain(format!("delta = {delta} outside (0,1)")));
    }
    let ln = (n as f64).ln();
    Ok(deep_sites_with_barriers(prof, valley, delta * ln, (1.0 - delta) * ln, delta))
}

/// Valley at depth `log n + √(log n)` and its deep-site decomposition.
pub fn decompose(prof: &PotentialProfile, n: u64, delta: f64) -> Result<ValleyDecomposition> {
    let valley = find_valley(prof, valley_depth(n))?;
    deep_sites(prof, &valley, n, delta)
}

/// Whether every deep site was visited at least `n^{δ/2}` times.
pub fn deep_site_event(stats: &WalkStats, decomp: &ValleyDecomposition, n: u64, delta: f64) -> bool {
    let floor = (n as f64).powf(delta / 2.0);
    decomp.r_delta.iter().all(|&x| stats.xi(x) as f64 >= floor)
}

/// `|ℛ_n \ ℛ_n^δ| / log² n`.
pub fn outside_deep_ratio(stats: &WalkStats, decomp: &ValleyDecomposition) -> f64 {
    let outside = stats.range().iter().filter(|x| decomp.r_delta.binary_search(x).is_err()).count();
    let ln = (stats.n() as f64).ln();
    outside as f64 / (ln * ln)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn prof(v: &[f64]) -> PotentialProfile {
        PotentialProfile::from_values(v.to_vec()).unwrap()
    }

    #[test]
    fn valley_examples() {
        let p = prof(&[0.0, -1.0, -2.0, -1.0, 0.0, 1.0]);
        let v = find_valley(&p, 2.0).unwrap();
        assert_eq!((v.b, v.c), (2, 4));
        let up = prof(&[0.0, 1.0, 2.0, 3.0, 4.0]);
        let v = find_valley(&up, 3.0).unwrap();
        assert_eq!((v.b, v.c), (0, 3));
        assert!(matches!(find_valley(&up, 10.0), Err(Error::ValleyNotClosed { .. })));
        assert!(find_valley(&up, 0.0).is_err());
    }

    #[test]
    fn valley_minimality_by_rescan() {
        let v = [0.0, 0.5, -0.5, 0.3, -1.2, -0.4, -1.2, 0.1, 1.0, -3.0, 2.0];
        let p = prof(&v);
        for h in [0.4, 0.9, 1.3, 2.2, 4.9] {
            let Valley { b, c, .. } = find_valley(&p, h).unwrap();
            let min_to = |x: usize| v[..=x].iter().cloned().fold(f64::INFINITY, f64::min);
            assert!(v[c] - min_to(c) >= h);
            assert!((0..c).all(|x| v[x] - min_to(x) < h));
            assert_eq!(v[b], min_to(c));
            assert!((0..b).all(|x| v[x] > v[b]));
        }
    }

    #[test]
    fn deep_site_example() {
        let p = prof(&[0.0, -1.0, -2.0, -1.0, 0.0, 1.0]);
        let valley = Valley { b: 2, c: 4, threshold: 2.0 };
        let d = deep_sites_with_barriers(&p, &valley, 1.0, 2.0, 0.5);
        assert!(d.g_delta.is_empty());
        assert_eq!(d.d_sites(), vec![3, 4]);
        assert_eq!(d.r_delta, vec![3, 4]);
    }

    #[test]
    fn vanishing_barriers() {
        let p = prof(&[0.0, 1.0, -1.0, 0.5, -2.0, -1.0, 0.2, 3.0]);
        let valley = find_valley(&p, 2.0).unwrap();
        let d = deep_sites_with_barriers(&p, &valley, 0.0, 2.0f64.ln(), 1e-9);
        assert_eq!(d.g_delta, (0..=valley.b).collect::<Vec<_>>());
        // D runs up to the first site whose climb from b exceeds the barrier
        let first_exceed = (valley.b + 1..p.len()).find(|&x| p.values()[x] - p.values()[valley.b] > 2.0f64.ln()).unwrap();
        assert_eq!(*d.d_delta.end(), first_exceed - 1);
    }

    #[test]
    fn event_examples() {
        let stats = WalkStats::from_counts(vec![1, 0, 0], vec![0, 1, 0]).unwrap();
        #[allow(clippy::reversed_empty_ranges)]
        let empty = ValleyDecomposition { b: 0, c: 1, threshold: 1.0, delta: 0.5, g_delta: vec![], d_delta: 1..=0, r_delta: vec![] };
        assert!(deep_site_event(&stats, &empty, 10_000, 0.5));
        let one = ValleyDecomposition { r_delta: vec![1], d_delta: 1..=1, ..empty };
        assert!(!deep_site_event(&stats, &one, 10_000, 0.5));
    }
}
