//! Derivative-free maximizers: Brent's golden-section / parabolic search in
//! one dimension and a box-projected Nelder-Mead simplex with multistart in
//! several dimensions.
//!
//! The likelihood criteria are piecewise smooth in the support (the active
//! atom switches across β cells), so no gradients are used.

use crate::error::{domain, Error, Result};

/// Default parameter tolerance.
pub const DEFAULT_TOL: f64 = 1e-6;
/// Default number of multistart runs.
pub const DEFAULT_RESTARTS: usize = 5;

const MAX_EVALS_1D: usize = 500;
const MAX_EVALS_PER_RUN: usize = 20_000;
/// (3 - sqrt 5) / 2
const GOLDEN: f64 = 0.381_966_011_250_105_1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
            return Err(domain(format!("invalid interval [{lo}, {hi}]")));
        }
        Ok(Self { lo, hi })
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn clamp(&self, x: f64) -> f64 {
        x.clamp(self.lo, self.hi)
    }
}

/// Product of closed intervals.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchBox {
    intervals: Vec<Interval>,
}

impl SearchBox {
    pub fn new(intervals: Vec<Interval>) -> Result<Self> {
        if intervals.is_empty() {
            return Err(domain("empty box"));
        }
        Ok(Self { intervals })
    }

    pub(crate) fn from_intervals(intervals: Vec<Interval>) -> Self {
        Self { intervals }
    }

    pub fn dim(&self) -> usize {
        self.intervals.len()
    }

    pub fn intervals(&self) -> &[Interval] {
        &self.intervals
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim() && x.iter().zip(&self.intervals).all(|(&v, iv)| v >= iv.lo && v <= iv.hi)
    }

    pub fn project(&self, x: &mut [f64]) {
        for (v, iv) in x.iter_mut().zip(&self.intervals) {
            *v = iv.clamp(*v);
        }
    }

    pub fn center(&self) -> Vec<f64> {
        self.intervals.iter().map(|iv| 0.5 * (iv.lo + iv.hi)).collect()
    }

    /// Map a point of the unit cube into the box.
    pub fn from_unit(&self, u: &[f64]) -> Vec<f64> {
        self.intervals.iter().zip(u).map(|(iv, &t)| iv.lo + t * iv.width()).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimResult {
    pub argmax: Vec<f64>,
    pub value: f64,
    pub evaluations: usize,
    pub converged: bool,
}

fn checked<F: FnMut(&[f64]) -> f64>(f: &mut F, x: &[f64], count: &mut usize) -> Result<f64> {
    *count += 1;
    let v = f(x);
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Evaluation { at: x.to_vec(), value: v })
    }
}

/// Brent's method for the maximum of `f` on `[lo, hi]`.
///
/// Both endpoints are evaluated as well, so monotone objectives return the
/// boundary exactly.
pub fn maximize_1d<F: FnMut(f64) -> f64>(mut f: F, lo: f64, hi: f64, tol: f64) -> Result<OptimResult> {
    if !(lo < hi) {
        return Err(domain(format!("maximize_1d needs lo < hi, got [{lo}, {hi}]")));
    }
    let mut evals = 0usize;
    let mut g = |x: f64, evals: &mut usize| -> Result<f64> {
        // minimize -f
        checked(&mut |v: &[f64]| -f(v[0]), &[x], evals)
    };

    let (mut a, mut b) = (lo, hi);
    let mut x = a + GOLDEN * (b - a);
    let mut w = x;
    let mut v = x;
    let mut fx = g(x, &mut evals)?;
    let mut fw = fx;
    let mut fv = fx;
    let mut d = 0.0f64;
    let mut e = 0.0f64;
    let mut converged = false;

    while evals < MAX_EVALS_1D - 2 {
        let mid = 0.5 * (a + b);
        let tol1 = f64::EPSILON.sqrt() * x.abs() + tol / 3.0;
        let tol2 = 2.0 * tol1;
        if (x - mid).abs() <= tol2 - 0.5 * (b - a) {
            converged = true;
            break;
        }
        let mut golden = true;
        if e.abs() > tol1 {
            let r = (x - w) * (fx - fv);
            let mut q = (x - v) * (fx - fw);
            let mut p = (x - v) * q - (x - w) * r;
            q = 2.0 * (q - r);
            if q > 0.0 {
                p = -p;
            } else {
                q = -q;
            }
            let e_prev = e;
            if p.abs() < (0.5 * q * e_prev).abs() && p > q * (a - x) && p < q * (b - x) {
                e = d;
                d = p / q;
                let u = x + d;
                if u - a < tol2 || b - u < tol2 {
                    d = if x < mid { tol1 } else { -tol1 };
                }
                golden = false;
            }
        }
        if golden {
            e = if x < mid { b - x } else { a - x };
            d = GOLDEN * e;
        }
        let u = if d.abs() >= tol1 {
            x + d
        } else if d > 0.0 {
            x + tol1
        } else {
            x - tol1
        };
        let fu = g(u, &mut evals)?;
        if fu <= fx {
            if u < x {
                b = x;
            } else {
                a = x;
            }
            v = w;
            fv = fw;
            w = x;
            fw = fx;
            x = u;
            fx = fu;
        } else {
            if u < x {
                a = u;
            } else {
                b = u;
            }
            if fu <= fw || w == x {
                v = w;
                fv = fw;
                w = u;
                fw = fu;
            } else if fu <= fv || v == x || v == w {
                v = u;
                fv = fu;
            }
        }
    }

    let mut best = (x, fx);
    for end in [lo, hi] {
        let fe = g(end, &mut evals)?;
        if fe < best.1 {
            best = (end, fe);
        }
    }
    Ok(OptimResult { argmax: vec![best.0], value: -best.1, evaluations: evals, converged })
}

/// Grid scan of `points` equally spaced abscissae followed by Brent's method
/// on the bracket around the best grid point. Guards against the several
/// local maxima a piecewise criterion can have.
pub fn maximize_1d_scan<F: FnMut(f64) -> f64>(mut f: F, lo: f64, hi: f64, tol: f64, points: usize) -> Result<OptimResult> {
    if !(lo < hi) || points < 3 {
        return Err(domain("scan needs lo < hi and at least 3 points"));
    }
    let mut evals = 0;
    let step = (hi - lo) / (points - 1) as f64;
    let mut best = (0usize, f64::NEG_INFINITY);
    for k in 0..points {
        let x = lo + step * k as f64;
        let v = checked(&mut |t: &[f64]| f(t[0]), &[x], &mut evals)?;
        if v > best.1 {
            best = (k, v);
        }
    }
    let left = lo + step * best.0.saturating_sub(1) as f64;
    let right = (lo + step * (best.0 + 1).min(points - 1) as f64).min(hi);
    let local = maximize_1d(&mut f, left, right, tol)?;
    evals += local.evaluations;
    let grid_x = lo + step * best.0 as f64;
    let (argmax, value) = if local.value >= best.1 { (local.argmax, local.value) } else { (vec![grid_x], best.1) };
    Ok(OptimResult { argmax, value, evaluations: evals, converged: local.converged })
}

/// Deterministic scrambled Halton points in the unit cube.
pub fn halton_starts(dim: usize, count: usize) -> Vec<Vec<f64>> {
    const PRIMES: [u64; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];
    // Fixed Cranley-Patterson shift per coordinate.
    const SHIFT: [f64; 12] =
        [0.5, 0.3819660, 0.2360680, 0.6180340, 0.1458980, 0.8541020, 0.4721360, 0.0901699, 0.7082039, 0.3262379, 0.9442719, 0.5623059];
    (1..=count as u64)
        .map(|k| {
            (0..dim)
                .map(|j| {
                    let base = PRIMES[j % PRIMES.len()];
                    let mut f = 1.0;
                    let mut r = 0.0;
                    let mut i = k;
                    while i > 0 {
                        f /= base as f64;
                        r += f * (i % base) as f64;
                        i /= base;
                    }
                    (r + SHIFT[j % SHIFT.len()]).fract()
                })
                .collect()
        })
        .collect()
}

/// Maximum of `f` over `bounds` from `restarts` scrambled low-discrepancy
/// starting points.
pub fn maximize_box<F: FnMut(&[f64]) -> f64>(f: F, bounds: &SearchBox, tol: f64, restarts: usize) -> Result<OptimResult> {
    maximize_box_from(f, bounds, tol, restarts, &[])
}

/// As [`maximize_box`], with extra warm starts run before the multistart
/// points. Warm starts are projected into the box.
pub fn maximize_box_from<F: FnMut(&[f64]) -> f64>(
    mut f: F,
    bounds: &SearchBox,
    tol: f64,
    restarts: usize,
    warm: &[Vec<f64>],
) -> Result<OptimResult> {
    if !(tol > 0.0) {
        return Err(domain("tolerance must be positive"));
    }
    let mut starts: Vec<Vec<f64>> = warm
        .iter()
        .map(|w| {
            let mut p = w.clone();
            bounds.project(&mut p);
            p
        })
        .collect();
    starts.extend(halton_starts(bounds.dim(), restarts).iter().map(|u| bounds.from_unit(u)));
    if starts.is_empty() {
        starts.push(bounds.center());
    }

    let mut best: Option<OptimResult> = None;
    let mut total = 0;
    let mut all_converged = true;
    for start in &starts {
        let run = nelder_mead(&mut f, bounds, start, tol)?;
        total += run.evaluations;
        all_converged &= run.converged;
        if best.as_ref().is_none_or(|b| run.value > b.value) {
            best = Some(run);
        }
    }
    let mut best = best.expect("at least one start");
    best.evaluations = total;
    best.converged = all_converged;
    Ok(best)
}

fn nelder_mead<F: FnMut(&[f64]) -> f64>(f: &mut F, bounds: &SearchBox, start: &[f64], tol: f64) -> Result<OptimResult> {
    let n = bounds.dim();
    let mut evals = 0;
    // minimize -f on projected points
    let mut eval = |x: &[f64], evals: &mut usize| -> Result<f64> { checked(&mut |v: &[f64]| -f(v), x, evals) };

    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    let x0 = start.to_vec();
    let f0 = eval(&x0, &mut evals)?;
    simplex.push((x0.clone(), f0));
    for (j, iv) in bounds.intervals().iter().enumerate() {
        let mut xj = x0.clone();
        let step = 0.1 * iv.width().max(tol);
        xj[j] = if xj[j] + step <= iv.hi { xj[j] + step } else { xj[j] - step };
        bounds.project(&mut xj);
        let fj = eval(&xj, &mut evals)?;
        simplex.push((xj, fj));
    }

    let (alpha, gamma, rho, sigma) = (1.0, 2.0, 0.5, 0.5);
    let mut converged = false;
    while evals < MAX_EVALS_PER_RUN {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let diameter = simplex
            .iter()
            .skip(1)
            .map(|(x, _)| x.iter().zip(&simplex[0].0).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
            .fold(0.0, f64::max);
        if diameter < tol {
            converged = true;
            break;
        }

        let mut centroid = vec![0.0; n];
        for (x, _) in &simplex[..n] {
            for (c, v) in centroid.iter_mut().zip(x) {
                *c += v / n as f64;
            }
        }
        let worst = simplex[n].clone();
        let along = |t: f64| -> Vec<f64> {
            let mut p: Vec<f64> = centroid.iter().zip(&worst.0).map(|(c, w)| c + t * (c - w)).collect();
            bounds.project(&mut p);
            p
        };

        let xr = along(alpha);
        let fr = eval(&xr, &mut evals)?;
        if fr < simplex[0].1 {
            let xe = along(gamma);
            let fe = eval(&xe, &mut evals)?;
            simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
            continue;
        }
        if fr < simplex[n - 1].1 {
            simplex[n] = (xr, fr);
            continue;
        }
        let (xc, fc) = if fr < worst.1 {
            let xc = along(rho);
            let fc = eval(&xc, &mut evals)?;
            (xc, fc)
        } else {
            let xc = along(-rho);
            let fc = eval(&xc, &mut evals)?;
            (xc, fc)
        };
        if fc < worst.1.min(fr) {
            simplex[n] = (xc, fc);
            continue;
        }
        let best = simplex[0].0.clone();
        for item in simplex.iter_mut().skip(1) {
            let mut x: Vec<f64> = best.iter().zip(&item.0).map(|(b, v)| b + sigma * (v - b)).collect();
            bounds.project(&mut x);
            let fx = eval(&x, &mut evals)?;
            *item = (x, fx);
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    let (argmax, neg) = simplex.swap_remove(0);
    Ok(OptimResult { argmax, value: -neg, evaluations: evals, converged })
}
