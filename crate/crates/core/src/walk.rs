//! Quenched walk simulation and local-time statistics.
//!
//! Counters follow the likelihood's indexing: `xi[x]` is `ξ(n−1, x)`, the
//! number of times `t ∈ {0, …, n−1}` with `X_t = x`, so that
//! `ξ(n−1, x) = ξ⁺(n, x) + ξ⁻(n, x)` holds exactly. A site first entered at
//! time `n` is therefore not part of the range.

use std::io::{BufRead, Write};

use rand::Rng;

use crate::environment::Environment;
use crate::error::{domain, Error, Result};

/// Local times, departure counts and range of a finished trajectory.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WalkStats {
    n: u64,
    xi: Vec<u64>,
    xi_plus: Vec<u64>,
    xi_minus: Vec<u64>,
    range: Vec<usize>,
    max_site: usize,
}

impl WalkStats {
    /// Stats from raw per-site departure counts (index = site). `n` is the
    /// total number of departures and `max_site` the last index. No
    /// walk-consistency check is made; use [`WalkStats::check_invariants`].
    pub fn from_counts(xi_plus: Vec<u64>, xi_minus: Vec<u64>) -> Result<Self> {
        if xi_plus.len() != xi_minus.len() || xi_plus.is_empty() {
            return Err(domain("count vectors must be nonempty and of equal length"));
        }
        let max_site = xi_plus.len() - 1;
        Ok(Self::assemble(xi_plus, xi_minus, max_site))
    }

    fn assemble(xi_plus: Vec<u64>, xi_minus: Vec<u64>, max_site: usize) -> Self {
        let xi: Vec<u64> = xi_plus.iter().zip(&xi_minus).map(|(a, b)| a + b).collect();
        let n = xi.iter().sum();
        let range = xi.iter().enumerate().skip(1).filter(|(_, &c)| c >= 1).map(|(x, _)| x).collect();
        Self { n, xi, xi_plus, xi_minus, range, max_site }
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    /// `ξ(n−1, x)`.
    pub fn xi(&self, x: usize) -> u64 {
        self.xi.get(x).copied().unwrap_or(0)
    }

    /// `ξ⁺(n, x)`: right departures from `x`.
    pub fn xi_plus(&self, x: usize) -> u64 {
        self.xi_plus.get(x).copied().unwrap_or(0)
    }

    /// `ξ⁻(n, x)`: left departures from `x`.
    pub fn xi_minus(&self, x: usize) -> u64 {
        self.xi_minus.get(x).copied().unwrap_or(0)
    }

    /// Visited positive sites `{x > 0 : ξ(n−1, x) ≥ 1}`, increasing.
    pub fn range(&self) -> &[usize] {
        &self.range
    }

    /// `R_n`.
    pub fn range_size(&self) -> usize {
        self.range.len()
    }

    /// `max_{t ≤ n} X_t`.
    pub fn max_site(&self) -> usize {
        self.max_site
    }

    /// Checks the counting identities of a nearest-neighbour path from 0.
    pub fn check_invariants(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::MalformedPath { index: 0, reason: msg });
        if self.xi.iter().sum::<u64>() != self.n {
            return fail("local times do not sum to n".into());
        }
        for x in 0..self.xi.len() {
            if self.xi[x] != self.xi_plus[x] + self.xi_minus[x] {
                return fail(format!("xi != xi+ + xi- at {x}"));
            }
            if self.xi_minus(x + 1).abs_diff(self.xi_plus(x)) > 1 {
                return fail(format!("crossing imbalance at edge ({x}, {})", x + 1));
            }
        }
        if self.xi_minus(0) != 0 {
            return fail("left departure from 0".into());
        }
        Ok(())
    }

    /// CSV `x,xi,xi_plus,xi_minus` for `x = 0..=max_site`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "x,xi,xi_plus,xi_minus")?;
        for x in 0..=self.max_site {
            writeln!(out, "{},{},{},{}", x, self.xi(x), self.xi_plus(x), self.xi_minus(x))?;
        }
        Ok(())
    }

    /// Reads the format written by [`WalkStats::write_csv`].
    pub fn read_csv<R: BufRead>(input: R) -> Result<Self> {
        let mut plus = Vec::new();
        let mut minus = Vec::new();
        for (i, line) in input.lines().enumerate() {
            let line = line?;
            if i == 0 {
                if line.trim() != "x,xi,xi_plus,xi_minus" {
                    return Err(domain(format!("unexpected header {line:?}")));
                }
                continue;
            }
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            let parse = |s: &str| s.trim().parse::<u64>().map_err(|e| domain(format!("line {}: {e}", i + 1)));
            if fields.len() != 4 || parse(fields[0])? as usize != plus.len() {
                return Err(domain(format!("line {}: malformed row {line:?}", i + 1)));
            }
            let (xi, p, m) = (parse(fields[1])?, parse(fields[2])?, parse(fields[3])?);
            if xi != p + m {
                return Err(domain(format!("line {}: xi != xi_plus + xi_minus", i + 1)));
            }
            plus.push(p);
            minus.push(m);
        }
        Self::from_counts(plus, minus)
    }
}

/// Streaming walker; can be paused at any horizon and resumed.
#[derive(Debug)]
pub struct Walker<'e, R> {
    env: &'e Environment,
    rng: R,
    pos: usize,
    t: u64,
    xi_plus: Vec<u64>,
    xi_minus: Vec<u64>,
    max_site: usize,
    path: Option<Vec<usize>>,
}

impl<'e, R: Rng> Walker<'e, R> {
    pub fn new(env: &'e Environment, rng: R, record_path: bool) -> Self {
        Self { env, rng, pos: 0, t: 0, xi_plus: vec![0; 2], xi_minus: vec![0; 2], max_site: 0, path: record_path.then(|| vec![0]) }
    }

    pub fn time(&self) -> u64 {
        self.t
    }

    pub fn position(&self) -> usize {
        self.pos
    }

    /// Runs until time `n` (no-op if already there).
    pub fn advance_to(&mut self, n: u64) -> Result<()> {
        let values = self.env.values();
        let x_max = values.len();
        while self.t < n {
            let x = self.pos;
            let right = x == 0 || self.rng.random::<f64>() < values[x - 1];
            if right {
                if x + 1 > x_max {
                    return Err(Error::EnvironmentExhausted { x_max, step: self.t });
                }
                self.xi_plus[x] += 1;
                self.pos = x + 1;
                if self.pos >= self.xi_plus.len() {
                    let len = (self.xi_plus.len() * 2).max(self.pos + 1);
                    self.xi_plus.resize(len, 0);
                    self.xi_minus.resize(len, 0);
                }
                self.max_site = self.max_site.max(self.pos);
            } else {
                self.xi_minus[x] += 1;
                self.pos = x - 1;
            }
            self.t += 1;
            if let Some(p) = self.path.as_mut() {
                p.push(self.pos);
            }
        }
        Ok(())
    }

    /// Snapshot of the counters at the current time.
    pub fn stats(&self) -> WalkStats {
        let len = self.max_site + 1;
        WalkStats::assemble(self.xi_plus[..len].to_vec(), self.xi_minus[..len].to_vec(), self.max_site)
    }

    /// Recorded path `X_0, …, X_t` if recording was requested.
    pub fn path(&self) -> Option<&[usize]> {
        self.path.as_deref()
    }
}

/// Runs `n` steps from `X_0 = 0`; returns the stats and, when requested,
/// the path `X_0, …, X_n`.
pub fn simulate_walk<R: Rng>(env: &Environment, n: u64, rng: R, record_path: bool) -> Result<(WalkStats, Option<Vec<usize>>)> {
    if n == 0 {
        return Err(domain("walk length must be at least 1"));
    }
    let mut walker = Walker::new(env, rng, record_path);
    walker.advance_to(n)?;
    let stats = walker.stats();
    Ok((stats, walker.path))
}

/// Counts recomputed from an explicit path; the brute-force reference for
/// the streaming counters.
pub fn stats_from_path(path: &[usize]) -> Result<WalkStats> {
    if path.first() != Some(&0) {
        return Err(Error::MalformedPath { index: 0, reason: "path must start at 0".into() });
    }
    if path.len() < 2 {
        return Err(Error::MalformedPath { index: 0, reason: "path needs at least one step".into() });
    }
    let max_site = *path.iter().max().unwrap();
    let mut plus = vec![0u64; max_site + 1];
    let mut minus = vec![0u64; max_site + 1];
    for (t, w) in path.windows(2).enumerate() {
        let (x, y) = (w[0], w[1]);
        if y == x + 1 {
            plus[x] += 1;
        } else if x > 0 && y == x - 1 {
            minus[x] += 1;
        } else {
            return Err(Error::MalformedPath { index: t + 1, reason: format!("step {x} -> {y}") });
        }
    }
    Ok(WalkStats::assemble(plus, minus, max_site))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::environment::sample_environment;
    use crate::model::{family_to_theta, FamilyKind, ModelFamily, DEFAULT_EPS0};
    use crate::rng::substream;
    use proptest::prelude::*;

    #[test]
    fn forced_path_counts() {
        let env = Environment::from_values(vec![0.0]).unwrap();
        let (s, path) = simulate_walk(&env, 4, substream(0, 0), true).unwrap();
        assert_eq!(path.unwrap(), vec![0, 1, 0, 1, 0]);
        assert_eq!((s.xi(0), s.xi_plus(0), s.xi_minus(0)), (2, 2, 0));
        assert_eq!((s.xi(1), s.xi_plus(1), s.xi_minus(1)), (2, 0, 2));
        assert_eq!(s.range_size(), 1);
        assert_eq!(s.n(), 4);
    }

    #[test]
    fn one_step_walk() {
        let env = Environment::from_values(vec![0.4, 0.4]).unwrap();
        let (s, _) = simulate_walk(&env, 1, substream(0, 0), false).unwrap();
        assert_eq!(s.xi_plus(0), 1);
        assert_eq!(s.range_size(), 0);
        assert_eq!(s.max_site(), 1);
    }

    #[test]
    fn path_examples() {
        let s = stats_from_path(&[0, 1, 0, 1, 0]).unwrap();
        assert_eq!((s.xi(0), s.xi_plus(0), s.xi(1), s.xi_minus(1), s.range_size()), (2, 2, 2, 2, 1));
        let s = stats_from_path(&[0, 1, 2, 1, 0]).unwrap();
        assert_eq!((s.xi_plus(1), s.xi_minus(1), s.xi_plus(2), s.xi_minus(2), s.range_size()), (1, 1, 0, 1, 2));
        let s = stats_from_path(&[0, 1]).unwrap();
        assert_eq!((s.range_size(), s.xi_plus(0)), (0, 1));
    }

    #[test]
    fn malformed_paths() {
        assert!(matches!(stats_from_path(&[0, 2]), Err(Error::MalformedPath { index: 1, .. })));
        assert!(stats_from_path(&[1, 2]).is_err());
        assert!(stats_from_path(&[0, 1, 1]).is_err());
        assert!(stats_from_path(&[0]).is_err());
    }

    #[test]
    fn exhausted_environment() {
        let env = Environment::from_values(vec![1.0, 1.0]).unwrap();
        assert!(matches!(simulate_walk(&env, 5, substream(0, 0), false), Err(Error::EnvironmentExhausted { .. })));
    }

    #[test]
    fn walker_snapshots_match_fresh_runs() {
        let th = family_to_theta(&ModelFamily::new(FamilyKind::Temkin, DEFAULT_EPS0).unwrap(), &[0.3]).unwrap();
        let env = sample_environment(&th, 10_000, &mut substream(3, 1)).unwrap();
        let mut w = Walker::new(&env, substream(3, 2), true);
        w.advance_to(500).unwrap();
        let mid = w.stats();
        w.advance_to(2000).unwrap();
        let (fresh, _) = simulate_walk(&env, 500, substream(3, 2), false).unwrap();
        assert_eq!(mid, fresh);
        assert_eq!(stats_from_path(&w.path().unwrap()[..=500]).unwrap(), mid);
        assert_eq!(stats_from_path(w.path().unwrap()).unwrap(), w.stats());
    }

    #[test]
    fn csv_round_trip() {
        let s = stats_from_path(&[0, 1, 2, 1, 2, 3, 2, 1, 0, 1]).unwrap();
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("x,xi,xi_plus,xi_minus\n0,2,2,0\n"));
        assert_eq!(WalkStats::read_csv(&buf[..]).unwrap(), s);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]
        #[test]
        fn streaming_counters_match_path_oracle(seed in any::<u64>(), n in 1u64..400, k in 0usize..3) {
            let fam = ModelFamily::new([FamilyKind::Temkin, FamilyKind::TwoPoint, FamilyKind::LazyTemkin][k], DEFAULT_EPS0).unwrap();
            let free = [vec![0.3], vec![0.4, 0.7], vec![0.3, 0.2]][k].clone();
            let th = family_to_theta(&fam, &free).unwrap();
            let env = sample_environment(&th, 1000, &mut substream(seed, 0)).unwrap();
            let (s, path) = simulate_walk(&env, n, substream(seed, 1), true).unwrap();
            let path = path.unwrap();
            prop_assert_eq!(path.len() as u64, n + 1);
            prop_assert_eq!(&stats_from_path(&path).unwrap(), &s);
            prop_assert!(s.check_invariants().is_ok());
            prop_assert_eq!(s.max_site(), *path.iter().max().unwrap());
            prop_assert!(s.range().iter().all(|&x| s.xi(x) >= 1));
            let (again, _) = simulate_walk(&env, n, substream(seed, 1), false).unwrap();
            prop_assert_eq!(again, s);
        }
    }
}
