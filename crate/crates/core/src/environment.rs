//! Environment sampling and the potential landscape.

use std::io::Write;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;

use crate::error::{domain, Error, Result};
use crate::model::ThetaParams;

/// Default window `{1, …, 10^5}`.
pub const DEFAULT_X_MAX: usize = 100_000;

/// Environment `ω_1, …, ω_{x_max}`. Site 0 reflects and carries no value.
#[derive(Debug, Clone, PartialEq)]
pub struct Environment {
    omega: Vec<f64>,
    atom_index: Vec<usize>,
}

impl Environment {
    /// Builds an environment from explicit values (site 1 first). Values
    /// must lie in `[0, 1]`; the boundary values are accepted so tests can
    /// force deterministic moves.
    pub fn from_values(omega: Vec<f64>) -> Result<Self> {
        if omega.is_empty() {
            return Err(domain("environment must cover at least one site"));
        }
        if let Some(&bad) = omega.iter().find(|&&w| !(0.0..=1.0).contains(&w)) {
            return Err(domain(format!("environment value {bad} outside [0,1]")));
        }
        let atom_index = vec![0; omega.len()];
        Ok(Self { omega, atom_index })
    }

    pub fn x_max(&self) -> usize {
        self.omega.len()
    }

    /// `ω_x` for `1 ≤ x ≤ x_max`.
    pub fn omega(&self, x: usize) -> Result<f64> {
        if x == 0 || x > self.omega.len() {
            return Err(Error::OutOfWindow { site: x, max: self.omega.len() });
        }
        Ok(self.omega[x - 1])
    }

    /// Values for sites `1..=x_max`.
    pub fn values(&self) -> &[f64] {
        &self.omega
    }

    /// Atom index `i` with `ω_x = a_i`, for sites `1..=x_max`.
    pub fn atom_indices(&self) -> &[usize] {
        &self.atom_index
    }

    /// Two-column table `x,omega`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "x,omega")?;
        for (i, w) in self.omega.iter().enumerate() {
            writeln!(out, "{},{}", i + 1, w)?;
        }
        Ok(())
    }
}

/// i.i.d. draw of `ω_x ~ η_θ` for `x = 1..=x_max`.
pub fn sample_environment<R: Rng + ?Sized>(theta: &ThetaParams, x_max: usize, rng: &mut R) -> Result<Environment> {
    if x_max == 0 {
        return Err(domain("x_max must be positive"));
    }
    let law = WeightedIndex::new(theta.p()).map_err(|e| domain(format!("bad probability vector: {e}")))?;
    let atom_index: Vec<usize> = (0..x_max).map(|_| law.sample(rng)).collect();
    let omega = atom_index.iter().map(|&i| theta.a()[i]).collect();
    Ok(Environment { omega, atom_index })
}

/// Potential `V(0) = 0`, `V(x) = Σ_{y ≤ x} log((1 − ω_y)/ω_y)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialProfile {
    v: Vec<f64>,
}

impl PotentialProfile {
    /// Profile from explicit values; `v[0]` must be 0.
    pub fn from_values(v: Vec<f64>) -> Result<Self> {
        if v.first() != Some(&0.0) {
            return Err(domain("potential must start with V(0) = 0"));
        }
        Ok(Self { v })
    }

    pub fn values(&self) -> &[f64] {
        &self.v
    }

    pub fn len(&self) -> usize {
        self.v.len()
    }

    pub fn is_empty(&self) -> bool {
        self.v.is_empty()
    }

    /// Last site of the window.
    pub fn x_max(&self) -> usize {
        self.v.len() - 1
    }
}

pub fn potential(env: &Environment) -> PotentialProfile {
    let mut v = Vec::with_capacity(env.omega.len() + 1);
    v.push(0.0);
    let mut acc = 0.0;
    for &w in &env.omega {
        acc += ((1.0 - w) / w).ln();
        v.push(acc);
    }
    PotentialProfile { v }
}

/// `μ(x) = exp(−V(x−1)) + exp(−V(x))`, reversible for the walk.
pub fn reversible_measure(prof: &PotentialProfile, x: usize) -> Result<f64> {
    if x == 0 || x > prof.x_max() {
        return Err(Error::OutOfWindow { site: x, max: prof.x_max() });
    }
    Ok((-prof.v[x - 1]).exp() + (-prof.v[x]).exp())
}
