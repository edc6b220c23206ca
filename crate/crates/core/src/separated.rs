//! Fully separated local minimisers of the unloaded energy.
//!
//! The search runs over the closed convex set
//!
//! ```text
//! x_1^+ = 0,  x_{n^-}^- = 1,  alpha (x_1^- - x_{n^+}^+) >= r* + margin,
//! ```
//!
//! with each species ordered, parametrised by the free positive positions, the
//! opposite-species gap and the free interior negative positions.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::config::{Configuration, ModelParams};
use crate::energy;
use crate::error::{Error, Result};
use crate::optim::{self, Bounds, NewtonOptions, Objective};
use crate::potentials;

#[derive(Clone, Debug, Serialize)]
pub struct SeparatedMinimizer {
    pub config: Configuration,
    /// The gap constraint is strictly inactive at the optimum.
    pub interior: bool,
    /// Boundary derivative with `x_1^-` moved onto `alpha (x_1^- - x_{n^+}^+) = r*`.
    pub boundary_derivative: f64,
    pub d_plus_minus: f64,
    pub projected_gradient: f64,
    pub iterations: usize,
    pub converged: bool,
    pub r_star: f64,
}

struct Reduced<'a> {
    p: &'a ModelParams,
}

impl Reduced<'_> {
    fn expand(&self, u: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let (np, nm) = (self.p.n_plus, self.p.n_minus);
        let mut plus = Vec::with_capacity(np);
        plus.push(0.0);
        plus.extend_from_slice(&u[..np - 1]);
        let gap = u[np - 1];
        let mut minus = Vec::with_capacity(nm);
        minus.push(plus[np - 1] + gap);
        minus.extend_from_slice(&u[np..]);
        minus.push(1.0);
        (plus, minus)
    }

    /// Columns of `dx/du` in block order `[plus; minus]`.
    fn jacobian(&self) -> DMatrix<f64> {
        let (np, nm) = (self.p.n_plus, self.p.n_minus);
        let n = np + nm;
        let mut a = DMatrix::zeros(n, n - 2);
        for i in 1..np {
            a[(i, i - 1)] = 1.0;
        }
        a[(np, np - 2)] = 1.0;
        a[(np, np - 1)] = 1.0;
        for k in 1..nm - 1 {
            a[(np + k, np - 1 + k)] = 1.0;
        }
        a
    }
}

fn strictly_increasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[0] < w[1])
}

impl Objective for Reduced<'_> {
    fn dim(&self) -> usize {
        self.p.n() - 2
    }

    fn value(&self, u: &[f64]) -> f64 {
        let (plus, minus) = self.expand(u);
        if !strictly_increasing(&plus) || !strictly_increasing(&minus) {
            return f64::INFINITY;
        }
        energy::energy_split(&plus, &minus, self.p)
    }

    fn gradient(&self, u: &[f64]) -> Result<Vec<f64>> {
        let (plus, minus) = self.expand(u);
        let g = energy::grad_split(&plus, &minus, self.p)?;
        let np = self.p.n_plus;
        let mut out = Vec::with_capacity(self.dim());
        out.extend_from_slice(&g.plus[1..]);
        out[np - 2] += g.minus[0];
        out.push(g.minus[0]);
        out.extend_from_slice(&g.minus[1..g.minus.len() - 1]);
        Ok(out)
    }

    fn hessian(&self, u: &[f64]) -> Result<DMatrix<f64>> {
        let (plus, minus) = self.expand(u);
        let h = energy::hessian_split(&plus, &minus, self.p)?;
        let a = self.jacobian();
        Ok(a.transpose() * h * a)
    }
}

/// Default gap margin `1e-3 r*`.
pub fn default_margin(p: &ModelParams) -> Result<f64> {
    Ok(1e-3 * potentials::r_star(p.a)?)
}

/// Minimises `E_n` over the fully separated set described in the module docs.
pub fn find_separated_minimizer(p: &ModelParams, margin: f64) -> Result<SeparatedMinimizer> {
    if p.gamma != 0.0 {
        return Err(Error::Parameter(
            "separated minimiser requires gamma_n = 0".into(),
        ));
    }
    if p.n_plus < 2 || p.n_minus < 2 {
        return Err(Error::Parameter(
            "separated minimiser needs n^+, n^- >= 2".into(),
        ));
    }
    if !(margin > 0.0) {
        return Err(Error::Parameter(format!(
            "margin must be positive, got {margin}"
        )));
    }
    let r_star = potentials::r_star(p.a)?;
    let min_gap = (r_star + margin) / p.alpha;
    // room for the opposite-species gap plus strictly ordered species
    if min_gap >= 1.0 {
        return Err(Error::Parameter(format!(
            "separated set is empty: alpha_n = {} does not exceed r* + margin = {}",
            p.alpha,
            r_star + margin
        )));
    }
    let (np, nm) = (p.n_plus, p.n_minus);
    let n = p.n() as f64;

    // equispaced blocks separated by 1/n, widened if the gap bound requires it
    let gap0 = (1.0 / n).max(1.01 * min_gap).min(0.5 * (1.0 + min_gap));
    let left = 0.5 - 0.5 * gap0;
    let plus0: Vec<f64> = (0..np).map(|i| left * i as f64 / (np - 1) as f64).collect();
    let right0 = left + gap0;
    let minus0: Vec<f64> = (0..nm)
        .map(|k| right0 + (1.0 - right0) * k as f64 / (nm - 1) as f64)
        .collect();
    let mut u0: Vec<f64> = plus0[1..].to_vec();
    u0.push(gap0);
    u0.extend_from_slice(&minus0[1..nm - 1]);

    let obj = Reduced { p };
    let mut lower = vec![0.0; obj.dim()];
    let upper = vec![1.0; obj.dim()];
    lower[np - 1] = min_gap;
    let bounds = Bounds { lower, upper };
    let opts = NewtonOptions {
        tol: 1e-10,
        max_iter: 1000,
        armijo: 1e-4,
    };
    let res = optim::projected_newton(&obj, &bounds, &u0, &opts)?;

    let (plus, minus) = obj.expand(&res.x);
    let config = Configuration::new(plus.clone(), minus.clone())?;
    let gap = res.x[np - 1];
    let interior = gap > min_gap;
    let d_plus_minus = p.alpha * (minus[0] - plus[np - 1]);

    let mut moved = minus.clone();
    moved[0] = plus[np - 1] + r_star / p.alpha;
    let boundary_derivative = if moved[0] < moved.get(1).copied().unwrap_or(f64::INFINITY) {
        energy::boundary_derivative(&Configuration::new(plus, moved)?, p)?
    } else {
        f64::NAN
    };

    Ok(SeparatedMinimizer {
        config,
        interior,
        boundary_derivative,
        d_plus_minus,
        projected_gradient: res.projected_gradient,
        iterations: res.iterations,
        converged: res.converged,
        r_star,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potentials::PhaseShift;

    fn params(n: usize, alpha: f64) -> ModelParams {
        ModelParams::balanced(n, alpha, 0.0, PhaseShift::new(1.0).unwrap()).unwrap()
    }

    #[test]
    fn reduced_gradient_matches_differences() {
        let p = params(8, 16.0);
        let obj = Reduced { p: &p };
        let u = vec![0.1, 0.2, 0.33, 0.12, 0.6, 0.8];
        let g = obj.gradient(&u).unwrap();
        let h = 1e-7;
        for k in 0..u.len() {
            let mut up = u.clone();
            let mut um = u.clone();
            up[k] += h;
            um[k] -= h;
            let fd = (obj.value(&up) - obj.value(&um)) / (2.0 * h);
            assert!((fd - g[k]).abs() < 1e-6 * g[k].abs().max(1.0));
        }
        let hess = obj.hessian(&u).unwrap();
        assert!((hess.clone() - hess.transpose()).amax() < 1e-12);
    }

    #[test]
    fn small_system_is_interior_and_certified() {
        let p = params(16, 32.0);
        let m = find_separated_minimizer(&p, default_margin(&p).unwrap()).unwrap();
        assert!(m.converged, "{m:?}");
        assert!(m.projected_gradient <= 1e-10);
        assert!(m.interior);
        assert!(m.boundary_derivative < 0.0);
        assert!((m.d_plus_minus - 2.102).abs() < 0.03, "{}", m.d_plus_minus);
        assert_eq!(m.config.plus()[0], 0.0);
        assert_eq!(m.config.minus()[7], 1.0);
    }

    #[test]
    fn rejects_empty_feasible_set() {
        let p = params(4, 0.5);
        assert!(matches!(
            find_separated_minimizer(&p, 1e-3),
            Err(Error::Parameter(_))
        ));
        let loaded = ModelParams::balanced(4, 8.0, 1.0, PhaseShift::new(1.0).unwrap()).unwrap();
        assert!(find_separated_minimizer(&loaded, 1e-3).is_err());
    }
}
