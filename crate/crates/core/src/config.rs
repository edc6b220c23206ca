//! Particle configurations and model parameters.

use std::fmt::Write as _;
use std::io::BufRead;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::potentials::PhaseShift;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Species {
    Plus,
    Minus,
}

impl Species {
    pub fn sign(self) -> i8 {
        match self {
            Species::Plus => 1,
            Species::Minus => -1,
        }
    }

    pub fn from_sign(s: i64) -> Result<Self> {
        match s {
            1 => Ok(Species::Plus),
            -1 => Ok(Species::Minus),
            _ => Err(Error::Format(format!("species must be +1 or -1, got {s}"))),
        }
    }

    pub fn other(self) -> Self {
        match self {
            Species::Plus => Species::Minus,
            Species::Minus => Species::Plus,
        }
    }
}

/// Positions of the positive and negative walls in `[0, 1]`, each species sorted.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Configuration {
    plus: Vec<f64>,
    minus: Vec<f64>,
}

impl Configuration {
    /// Builds a configuration; each species is sorted, so labels within a
    /// species carry no meaning.
    pub fn new(mut plus: Vec<f64>, mut minus: Vec<f64>) -> Result<Self> {
        for &x in plus.iter().chain(&minus) {
            if !(0.0..=1.0).contains(&x) {
                return Err(Error::Domain(format!("position {x} outside [0, 1]")));
            }
        }
        plus.sort_by(f64::total_cmp);
        minus.sort_by(f64::total_cmp);
        Ok(Self { plus, minus })
    }

    /// Rebuilds a configuration from the block vector `[plus; minus]`.
    pub fn from_block(x: &[f64], n_plus: usize) -> Result<Self> {
        if n_plus > x.len() {
            return Err(Error::Parameter("n_plus exceeds vector length".into()));
        }
        Self::new(x[..n_plus].to_vec(), x[n_plus..].to_vec())
    }

    /// Block vector `[plus; minus]`, the state layout used by the solvers.
    pub fn to_block(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.n());
        v.extend_from_slice(&self.plus);
        v.extend_from_slice(&self.minus);
        v
    }

    pub fn plus(&self) -> &[f64] {
        &self.plus
    }

    pub fn minus(&self) -> &[f64] {
        &self.minus
    }

    pub fn species(&self, s: Species) -> &[f64] {
        match s {
            Species::Plus => &self.plus,
            Species::Minus => &self.minus,
        }
    }

    pub fn n_plus(&self) -> usize {
        self.plus.len()
    }

    pub fn n_minus(&self) -> usize {
        self.minus.len()
    }

    pub fn n(&self) -> usize {
        self.plus.len() + self.minus.len()
    }

    /// Merged description `(x^n, b^n)`: all positions in increasing order with
    /// species labels. Coincident opposite-species positions list the positive
    /// particle first.
    pub fn merged(&self) -> (Vec<f64>, Vec<Species>) {
        let (mut i, mut j) = (0, 0);
        let mut x = Vec::with_capacity(self.n());
        let mut b = Vec::with_capacity(self.n());
        while i < self.plus.len() || j < self.minus.len() {
            let take_plus =
                j == self.minus.len() || (i < self.plus.len() && self.plus[i] <= self.minus[j]);
            if take_plus {
                x.push(self.plus[i]);
                b.push(Species::Plus);
                i += 1;
            } else {
                x.push(self.minus[j]);
                b.push(Species::Minus);
                j += 1;
            }
        }
        (x, b)
    }

    pub fn from_merged(x: &[f64], b: &[Species]) -> Result<Self> {
        if x.len() != b.len() {
            return Err(Error::Parameter(
                "positions and labels differ in length".into(),
            ));
        }
        let mut plus = Vec::new();
        let mut minus = Vec::new();
        for (&xi, &bi) in x.iter().zip(b) {
            match bi {
                Species::Plus => plus.push(xi),
                Species::Minus => minus.push(xi),
            }
        }
        Self::new(plus, minus)
    }

    /// Image under `x^+ -> 1 - x^-`, `x^- -> 1 - x^+`, which leaves the energy invariant.
    pub fn reflect(&self) -> Self {
        let plus = self.minus.iter().rev().map(|x| 1.0 - x).collect();
        let minus = self.plus.iter().rev().map(|x| 1.0 - x).collect();
        Self { plus, minus }
    }

    /// Smallest gap between consecutive particles of one species (`inf` if fewer than two).
    pub fn min_same_gap(&self) -> f64 {
        let gap = |v: &[f64]| {
            v.windows(2)
                .map(|w| w[1] - w[0])
                .fold(f64::INFINITY, f64::min)
        };
        gap(&self.plus).min(gap(&self.minus))
    }

    /// CSV with header `species,position`, rows sorted by position.
    pub fn to_csv(&self) -> String {
        let (x, b) = self.merged();
        let mut out = String::from("species,position\n");
        for (xi, bi) in x.iter().zip(b) {
            let _ = writeln!(out, "{},{}", bi.sign(), fmt17(*xi));
        }
        out
    }

    pub fn from_csv<R: BufRead>(reader: R) -> Result<Self> {
        let mut plus = Vec::new();
        let mut minus = Vec::new();
        for (k, line) in reader.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || (k == 0 && line.starts_with("species")) {
                continue;
            }
            let (s, x) = line
                .split_once(',')
                .ok_or_else(|| Error::Format(format!("line {}: expected two columns", k + 1)))?;
            let s: i64 = s
                .trim()
                .parse()
                .map_err(|_| Error::Format(format!("line {}: bad species", k + 1)))?;
            let x: f64 = x
                .trim()
                .parse()
                .map_err(|_| Error::Format(format!("line {}: bad position", k + 1)))?;
            match Species::from_sign(s)? {
                Species::Plus => plus.push(x),
                Species::Minus => minus.push(x),
            }
        }
        Self::new(plus, minus)
    }
}

/// Formats with 17 significant digits, enough for an exact `f64` round trip.
pub fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

/// Parameters `(n^+, n^-, alpha_n, gamma_n, a)` of the discrete energy.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub n_plus: usize,
    pub n_minus: usize,
    pub alpha: f64,
    pub gamma: f64,
    pub a: PhaseShift,
}

impl ModelParams {
    pub fn new(
        n_plus: usize,
        n_minus: usize,
        alpha: f64,
        gamma: f64,
        a: PhaseShift,
    ) -> Result<Self> {
        if n_plus + n_minus == 0 {
            return Err(Error::Parameter("need at least one particle".into()));
        }
        if !(alpha > 0.0) || !alpha.is_finite() {
            return Err(Error::Parameter(format!(
                "alpha_n must be positive, got {alpha}"
            )));
        }
        if !(gamma >= 0.0) || !gamma.is_finite() {
            return Err(Error::Parameter(format!(
                "gamma_n must be non-negative, got {gamma}"
            )));
        }
        Ok(Self {
            n_plus,
            n_minus,
            alpha,
            gamma,
            a,
        })
    }

    /// Equal species counts `n/2`.
    pub fn balanced(n: usize, alpha: f64, gamma: f64, a: PhaseShift) -> Result<Self> {
        if !n.is_multiple_of(2) {
            return Err(Error::Parameter(format!(
                "balanced model needs even n, got {n}"
            )));
        }
        Self::new(n / 2, n / 2, alpha, gamma, a)
    }

    pub fn n(&self) -> usize {
        self.n_plus + self.n_minus
    }

    pub fn matches(&self, c: &Configuration) -> Result<()> {
        if c.n_plus() != self.n_plus || c.n_minus() != self.n_minus {
            return Err(Error::Parameter(format!(
                "configuration has ({}, {}) particles, parameters expect ({}, {})",
                c.n_plus(),
                c.n_minus(),
                self.n_plus,
                self.n_minus
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn merged_round_trip() {
        let c = Configuration::new(vec![0.0, 0.5, 0.2], vec![0.5, 1.0]).unwrap();
        assert_eq!(c.plus(), &[0.0, 0.2, 0.5]);
        let (x, b) = c.merged();
        assert_eq!(x, vec![0.0, 0.2, 0.5, 0.5, 1.0]);
        assert_eq!(b[2], Species::Plus);
        assert_eq!(Configuration::from_merged(&x, &b).unwrap(), c);
    }

    #[test]
    fn rejects_out_of_range() {
        assert!(Configuration::new(vec![1.5], vec![]).is_err());
        assert!(Configuration::new(vec![f64::NAN], vec![]).is_err());
    }

    #[test]
    fn reflection_is_an_involution() {
        let c = Configuration::new(vec![0.0, 0.125, 0.3], vec![0.7, 1.0]).unwrap();
        let r = c.reflect();
        assert_eq!(r.plus(), &[0.0, 0.30000000000000004]);
        assert_eq!(r.reflect().minus(), &[0.7, 1.0]);
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let c = Configuration::new(
            vec![0.0, 1.0 / 3.0, std::f64::consts::FRAC_1_SQRT_2],
            vec![0.1 + 0.2, 1.0],
        )
        .unwrap();
        let s = c.to_csv();
        assert!(s.starts_with("species,position\n1,"));
        let back = Configuration::from_csv(s.as_bytes()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn params_validation() {
        let a = PhaseShift::new(1.0).unwrap();
        assert!(ModelParams::new(0, 0, 1.0, 0.0, a).is_err());
        assert!(ModelParams::new(1, 1, 0.0, 0.0, a).is_err());
        assert!(ModelParams::new(1, 1, 1.0, -1.0, a).is_err());
        assert!(ModelParams::balanced(3, 1.0, 0.0, a).is_err());
        assert_eq!(ModelParams::balanced(4, 1.0, 0.0, a).unwrap().n(), 4);
    }
}
