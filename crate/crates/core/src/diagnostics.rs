//! Separation and mixing statistics of particle configurations.

use serde::{Deserialize, Serialize};

use crate::config::{Configuration, ModelParams, Species};
use crate::error::{Error, Result};
use crate::potentials::{self, PhaseShift};

/// Tolerance for particles pinned at the barriers.
pub const ENDPOINT_TOL: f64 = 1e-9;

/// `alpha_n (x_1^- - x_{n^+}^+)`.
pub fn d_plus_minus(c: &Configuration, p: &ModelParams) -> Result<f64> {
    let (plus, minus) = (c.plus(), c.minus());
    if plus.is_empty() || minus.is_empty() {
        return Err(Error::Precondition(
            "d_plus_minus needs both species".into(),
        ));
    }
    Ok(p.alpha * (minus[0] - plus[plus.len() - 1]))
}

/// `n` times the smallest same-species gap in the half of the species facing
/// the other species: the first `n^-/2` gaps for negatives, the last `n^+/2`
/// for positives.
pub fn d_bar_half(c: &Configuration, species: Species, n: usize) -> Result<f64> {
    let x = c.species(species);
    if x.len() < 2 {
        return Err(Error::Precondition(format!(
            "d_bar needs at least two particles of {species:?}"
        )));
    }
    let half = (x.len() / 2).max(1);
    let gaps = x.windows(2).map(|w| w[1] - w[0]);
    let m = match species {
        Species::Minus => gaps.take(half).fold(f64::INFINITY, f64::min),
        Species::Plus => {
            let skip = x.len() - 1 - half;
            gaps.skip(skip).fold(f64::INFINITY, f64::min)
        }
    };
    Ok(n as f64 * m)
}

fn strictly_increasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[0] < w[1])
}

/// `0 = x_1^+ < ... < x_{n^+}^+ < x_1^- < ... < x_{n^-}^- = 1`.
pub fn is_fully_separated(c: &Configuration) -> bool {
    let (plus, minus) = (c.plus(), c.minus());
    if plus.is_empty() || minus.is_empty() {
        return false;
    }
    plus[0].abs() <= ENDPOINT_TOL
        && (1.0 - minus[minus.len() - 1]).abs() <= ENDPOINT_TOL
        && strictly_increasing(plus)
        && strictly_increasing(minus)
        && plus[plus.len() - 1] < minus[0]
}

/// `0 = x_1^+ <= x_1^- < x_2^+ < x_2^- < ... < x_{n^+}^+ <= x_{n^-}^- = 1`.
pub fn is_completely_mixed(c: &Configuration) -> bool {
    let (plus, minus) = (c.plus(), c.minus());
    let k = plus.len();
    if k == 0 || k != minus.len() {
        return false;
    }
    if plus[0].abs() > ENDPOINT_TOL || (1.0 - minus[k - 1]).abs() > ENDPOINT_TOL {
        return false;
    }
    // chain x_1^+, x_1^-, x_2^+, ..., x_k^-, with "<=" only at the two ends
    let chain: Vec<f64> = plus.iter().zip(minus).flat_map(|(a, b)| [*a, *b]).collect();
    let last = chain.len() - 2;
    chain.windows(2).enumerate().all(|(i, w)| {
        if i == 0 || i == last {
            w[0] <= w[1]
        } else {
            w[0] < w[1]
        }
    })
}

/// Number of opposite-species pairs with the negative particle left of the
/// positive one; zero for fully separated states.
pub fn swap_count(c: &Configuration) -> usize {
    let minus = c.minus();
    c.plus()
        .iter()
        .map(|&x| minus.partition_point(|&y| y < x))
        .sum()
}

/// `(log d_n - log d_2n) / log 2`.
pub fn decay_rate(dist_n: f64, dist_2n: f64) -> Result<f64> {
    if !(dist_n > 0.0) || !(dist_2n > 0.0) {
        return Err(Error::Domain(format!(
            "decay rate needs positive distances, got {dist_n}, {dist_2n}"
        )));
    }
    Ok((dist_n.ln() - dist_2n.ln()) / std::f64::consts::LN_2)
}

/// Piecewise-constant discrete density of one species, sampled at gap
/// midpoints: `(x_i + x_{i+1}) / 2 -> 1 / (n (x_{i+1} - x_i))`. A zero gap
/// produces an infinite sample.
pub fn discrete_density(c: &Configuration, species: Species, n: usize) -> Result<Vec<(f64, f64)>> {
    let x = c.species(species);
    if x.len() < 2 {
        return Err(Error::Precondition(
            "discrete density needs two particles".into(),
        ));
    }
    Ok(x.windows(2)
        .map(|w| {
            let gap = w[1] - w[0];
            let rho = if gap > 0.0 {
                1.0 / (n as f64 * gap)
            } else {
                f64::INFINITY
            };
            (0.5 * (w[0] + w[1]), rho)
        })
        .collect())
}

/// `sum_k |V'(alpha d_bar k)| - |W_a'(r*)|`; negative values certify that the
/// leftmost negative particle is pushed away from the positive block.
pub fn separation_criterion(alpha: f64, d_bar: f64, a: PhaseShift) -> Result<f64> {
    let x = alpha * d_bar;
    if !(x > 0.0) {
        return Err(Error::Domain(format!(
            "alpha * d_bar must be positive, got {x}"
        )));
    }
    let r = potentials::r_star(a)?;
    Ok(potentials::v_prime_eff_abs(x)? - potentials::w_prime(r, a).abs())
}

/// Summary of one run's final state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunStats {
    pub n: usize,
    pub alpha: f64,
    pub d_plus_minus: f64,
    pub d_bar_plus: f64,
    pub d_bar_minus: f64,
    pub q: Option<f64>,
    pub mixed: bool,
    pub separated: bool,
    pub swaps: usize,
}

impl RunStats {
    pub fn from_state(c: &Configuration, p: &ModelParams) -> Result<Self> {
        let n = c.n();
        Ok(Self {
            n,
            alpha: p.alpha,
            d_plus_minus: d_plus_minus(c, p)?,
            d_bar_plus: d_bar_half(c, Species::Plus, n)?,
            d_bar_minus: d_bar_half(c, Species::Minus, n)?,
            q: None,
            mixed: is_completely_mixed(c),
            separated: is_fully_separated(c),
            swaps: swap_count(c),
        })
    }

    pub const CSV_HEADER: &'static str =
        "n,alpha,d_plus_minus,d_bar_plus,d_bar_minus,q,mixed,separated,swaps,params_hash,rtol,atol";

    /// One CSV row; `params_hash` and tolerances record provenance.
    pub fn csv_row(&self, params_hash: &str, rtol: f64, atol: f64) -> String {
        let q = self.q.map(|v| format!("{v:.10}")).unwrap_or_default();
        format!(
            "{},{},{:.10},{:.10},{:.10},{},{},{},{},{},{:e},{:e}",
            self.n,
            self.alpha,
            self.d_plus_minus,
            self.d_bar_plus,
            self.d_bar_minus,
            q,
            self.mixed,
            self.separated,
            self.swaps,
            params_hash,
            rtol,
            atol
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ic4() -> Configuration {
        Configuration::new(vec![0.0, 0.25], vec![0.75, 1.0]).unwrap()
    }

    #[test]
    fn gap_statistic() {
        let p = ModelParams::balanced(4, 8.0, 0.0, PhaseShift::new(1.0).unwrap()).unwrap();
        assert_eq!(d_plus_minus(&ic4(), &p).unwrap(), 4.0);
        let mixed = Configuration::new(vec![0.0, 0.5], vec![0.25, 1.0]).unwrap();
        assert!(d_plus_minus(&mixed, &p).unwrap() <= 0.0);
    }

    #[test]
    fn classification() {
        assert!(is_fully_separated(&ic4()));
        assert!(!is_completely_mixed(&ic4()));
        let alt = Configuration::new(vec![0.0, 0.4, 0.7], vec![0.2, 0.55, 1.0]).unwrap();
        assert!(is_completely_mixed(&alt));
        assert!(!is_fully_separated(&alt));
        let touching = Configuration::new(vec![0.0, 0.5], vec![0.0, 1.0]).unwrap();
        assert!(is_completely_mixed(&touching));
        let unpinned = Configuration::new(vec![1e-6, 0.25], vec![0.75, 1.0]).unwrap();
        assert!(!is_fully_separated(&unpinned));
        assert_eq!(swap_count(&ic4()), 0);
        assert_eq!(swap_count(&alt), 3);
        let one = Configuration::new(vec![0.0, 0.6], vec![0.5, 1.0]).unwrap();
        assert_eq!(swap_count(&one), 1);
    }

    #[test]
    fn d_bar_on_lattices() {
        let n = 16;
        let plus: Vec<f64> = (0..8).map(|i| i as f64 / 16.0).collect();
        let minus: Vec<f64> = (1..=8).map(|i| 0.5 + i as f64 / 16.0).collect();
        let c = Configuration::new(plus, minus).unwrap();
        assert!((d_bar_half(&c, Species::Minus, n).unwrap() - 1.0).abs() < 1e-12);
        assert!((d_bar_half(&c, Species::Plus, n).unwrap() - 1.0).abs() < 1e-12);
        // only the inner half counts
        let c2 = Configuration::new(vec![0.0, 0.01, 0.3, 0.4], vec![0.6, 0.7, 0.99, 1.0]).unwrap();
        assert!((d_bar_half(&c2, Species::Minus, 8).unwrap() - 0.8).abs() < 1e-12);
        assert!((d_bar_half(&c2, Species::Plus, 8).unwrap() - 0.8).abs() < 1e-12);
        let single = Configuration::new(vec![0.0], vec![1.0]).unwrap();
        assert!(d_bar_half(&single, Species::Plus, 2).is_err());
    }

    #[test]
    fn decay_rates() {
        assert!((decay_rate(0.4, 0.2).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(decay_rate(0.3, 0.3).unwrap(), 0.0);
        assert_eq!(
            decay_rate(0.3, 0.1).unwrap(),
            -decay_rate(0.1, 0.3).unwrap()
        );
        assert!(decay_rate(0.0, 0.1).is_err());
    }

    #[test]
    fn densities() {
        let d = discrete_density(&ic4(), Species::Plus, 4).unwrap();
        assert_eq!(d, vec![(0.125, 1.0)]);
        let total: f64 = discrete_density(&ic4(), Species::Minus, 4)
            .unwrap()
            .iter()
            .map(|(_, r)| 1.0 / (4.0 * r) * r)
            .sum();
        assert!((total - 0.25).abs() < 1e-15);
    }

    #[test]
    fn criterion_sign_and_monotonicity() {
        let a = PhaseShift::new(1.0).unwrap();
        assert!(separation_criterion(1.0, 0.01, a).unwrap() > 0.0);
        let mut prev = f64::INFINITY;
        for k in 1..60 {
            let m = separation_criterion(1.0, 0.1 * k as f64, a).unwrap();
            assert!(m < prev);
            prev = m;
        }
        // 50-digit values: sum_k |V'(1.98 k)| - |W_1'(r*)|
        let m = separation_criterion(2.0, 0.99, a).unwrap();
        assert!((m - (0.162_834_409_213_826_5 - 0.447_743_204_694_302_8)).abs() < 1e-12);
    }
}
