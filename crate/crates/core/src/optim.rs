//! Projected Newton method for smooth objectives on boxes.
//!
//! The variables touching a bound with the gradient pointing outwards are
//! frozen; the rest take a regularised Newton step, projected back onto the
//! box and shortened by Armijo backtracking. Objectives encode any extra
//! feasibility (ordering, collisions) by returning `+inf`, which the line
//! search treats as a barrier.

use nalgebra::{Cholesky, DMatrix, DVector};

use crate::error::Result;

pub trait Objective {
    fn dim(&self) -> usize;
    fn value(&self, u: &[f64]) -> f64;
    fn gradient(&self, u: &[f64]) -> Result<Vec<f64>>;
    fn hessian(&self, u: &[f64]) -> Result<DMatrix<f64>>;
}

/// Componentwise bounds; use infinities for free directions.
#[derive(Clone, Debug)]
pub struct Bounds {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Bounds {
    pub fn uniform(dim: usize, lo: f64, hi: f64) -> Self {
        Self {
            lower: vec![lo; dim],
            upper: vec![hi; dim],
        }
    }

    pub fn project(&self, u: &mut [f64]) {
        for ((x, lo), hi) in u.iter_mut().zip(&self.lower).zip(&self.upper) {
            *x = x.clamp(*lo, *hi);
        }
    }

    /// `u - P(u - g)`, zero exactly at first-order stationary points.
    pub fn projected_gradient(&self, u: &[f64], g: &[f64]) -> Vec<f64> {
        u.iter()
            .zip(g)
            .zip(self.lower.iter().zip(&self.upper))
            .map(|((x, gi), (lo, hi))| x - (x - gi).clamp(*lo, *hi))
            .collect()
    }
}

#[derive(Clone, Copy, Debug)]
pub struct NewtonOptions {
    /// Stop when the max-norm of the projected gradient drops below this.
    pub tol: f64,
    pub max_iter: usize,
    pub armijo: f64,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self {
            tol: 1e-9,
            max_iter: 500,
            armijo: 1e-4,
        }
    }
}

#[derive(Clone, Debug)]
pub struct NewtonResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub projected_gradient: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Minimises `obj` over `bounds` from the feasible start `x0`.
pub fn projected_newton<O: Objective + ?Sized>(
    obj: &O,
    bounds: &Bounds,
    x0: &[f64],
    opts: &NewtonOptions,
) -> Result<NewtonResult> {
    let n = obj.dim();
    let mut x = x0.to_vec();
    bounds.project(&mut x);
    let mut f = obj.value(&x);
    let mut it = 0;
    let mut stalled = 0;
    loop {
        let g = obj.gradient(&x)?;
        let pg = bounds.projected_gradient(&x, &g);
        let pg_norm = max_abs(&pg);
        if pg_norm <= opts.tol || it >= opts.max_iter || stalled >= 3 {
            return Ok(NewtonResult {
                x,
                value: f,
                projected_gradient: pg_norm,
                iterations: it,
                converged: pg_norm <= opts.tol,
            });
        }
        it += 1;

        // epsilon-active set: near a bound with the gradient pushing outwards
        let eps = pg_norm.min(1e-8);
        let free: Vec<usize> = (0..n)
            .filter(|&i| {
                let at_lo = x[i] <= bounds.lower[i] + eps && g[i] > 0.0;
                let at_hi = x[i] >= bounds.upper[i] - eps && g[i] < 0.0;
                !(at_lo || at_hi)
            })
            .collect();

        let mut is_free = vec![false; n];
        for &i in &free {
            is_free[i] = true;
        }
        let mut d = vec![0.0; n];
        let mut newton_ok = false;
        if !free.is_empty() {
            let h = obj.hessian(&x)?;
            let hf = DMatrix::from_fn(free.len(), free.len(), |i, j| h[(free[i], free[j])]);
            let gf = DVector::from_iterator(free.len(), free.iter().map(|&i| g[i]));
            if let Some(step) = regularised_solve(&hf, &gf) {
                for (k, &i) in free.iter().enumerate() {
                    d[i] = -step[k];
                }
                newton_ok = true;
            }
        }
        // Frozen variables take a plain gradient step so projection can keep them pinned.
        for i in 0..n {
            if !is_free[i] {
                d[i] = -g[i];
            }
        }

        let mut accepted = line_search(obj, bounds, &x, f, &g, &d, opts.armijo);
        if accepted.is_none() && newton_ok {
            let gd: Vec<f64> = g.iter().map(|v| -v).collect();
            accepted = line_search(obj, bounds, &x, f, &g, &gd, opts.armijo);
        }
        match accepted {
            Some((xn, fnew)) => {
                let moved = xn
                    .iter()
                    .zip(&x)
                    .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
                if moved <= 1e-15 * (1.0 + max_abs(&x)) {
                    stalled += 1;
                } else {
                    stalled = 0;
                }
                x = xn;
                f = fnew;
            }
            None => stalled = 3,
        }
    }
}

/// Solves `(H + mu I) s = g` with the smallest `mu` in a geometric ladder that
/// makes the matrix positive definite.
fn regularised_solve(h: &DMatrix<f64>, g: &DVector<f64>) -> Option<DVector<f64>> {
    let scale = h
        .diagonal()
        .iter()
        .fold(0.0_f64, |m, v| m.max(v.abs()))
        .max(1e-300);
    let mut mu = 0.0;
    for _ in 0..60 {
        let mut m = h.clone();
        if mu > 0.0 {
            for i in 0..m.nrows() {
                m[(i, i)] += mu;
            }
        }
        if let Some(ch) = Cholesky::new(m) {
            let s = ch.solve(g);
            if s.iter().all(|v| v.is_finite()) {
                return Some(s);
            }
        }
        mu = if mu == 0.0 { 1e-10 * scale } else { mu * 4.0 };
    }
    None
}

fn line_search<O: Objective + ?Sized>(
    obj: &O,
    bounds: &Bounds,
    x: &[f64],
    f: f64,
    g: &[f64],
    d: &[f64],
    c: f64,
) -> Option<(Vec<f64>, f64)> {
    let mut s = 1.0;
    for _ in 0..80 {
        let mut xn: Vec<f64> = x.iter().zip(d).map(|(xi, di)| xi + s * di).collect();
        bounds.project(&mut xn);
        let decrease: f64 = g
            .iter()
            .zip(xn.iter().zip(x))
            .map(|(gi, (a, b))| gi * (a - b))
            .sum();
        let fnew = obj.value(&xn);
        // Close to a minimiser the true decrease sinks below rounding noise in f.
        let noise = 8.0 * f64::EPSILON * f.abs();
        if fnew.is_finite()
            && decrease <= 0.0
            && (fnew <= f + c * decrease || fnew - f <= noise && s == 1.0)
        {
            return Some((xn, fnew));
        }
        s *= 0.5;
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Rosenbrock-type test function restricted to a box.
    struct Rosen;
    impl Objective for Rosen {
        fn dim(&self) -> usize {
            2
        }
        fn value(&self, u: &[f64]) -> f64 {
            (1.0 - u[0]).powi(2) + 100.0 * (u[1] - u[0] * u[0]).powi(2)
        }
        fn gradient(&self, u: &[f64]) -> Result<Vec<f64>> {
            let t = u[1] - u[0] * u[0];
            Ok(vec![-2.0 * (1.0 - u[0]) - 400.0 * u[0] * t, 200.0 * t])
        }
        fn hessian(&self, u: &[f64]) -> Result<DMatrix<f64>> {
            Ok(DMatrix::from_row_slice(
                2,
                2,
                &[
                    2.0 - 400.0 * (u[1] - 3.0 * u[0] * u[0]),
                    -400.0 * u[0],
                    -400.0 * u[0],
                    200.0,
                ],
            ))
        }
    }

    #[test]
    fn unconstrained_minimum() {
        let b = Bounds::uniform(2, -5.0, 5.0);
        let r = projected_newton(&Rosen, &b, &[-1.2, 1.0], &NewtonOptions::default()).unwrap();
        assert!(r.converged);
        assert!((r.x[0] - 1.0).abs() < 1e-8 && (r.x[1] - 1.0).abs() < 1e-8);
    }

    #[test]
    fn active_bound() {
        let b = Bounds {
            lower: vec![-5.0, -5.0],
            upper: vec![0.5, 5.0],
        };
        let r = projected_newton(&Rosen, &b, &[-1.2, 1.0], &NewtonOptions::default()).unwrap();
        assert!(r.converged);
        assert_eq!(r.x[0], 0.5);
        assert!((r.x[1] - 0.25).abs() < 1e-9);
    }

    #[test]
    fn barrier_is_respected() {
        // value is +inf for u0 > 0.3, which the search must never cross
        struct Walled;
        impl Objective for Walled {
            fn dim(&self) -> usize {
                1
            }
            fn value(&self, u: &[f64]) -> f64 {
                if u[0] > 0.3 {
                    f64::INFINITY
                } else {
                    (u[0] - 1.0).powi(2) - (0.3 - u[0]).ln() * 1e-3
                }
            }
            fn gradient(&self, u: &[f64]) -> Result<Vec<f64>> {
                Ok(vec![2.0 * (u[0] - 1.0) + 1e-3 / (0.3 - u[0])])
            }
            fn hessian(&self, u: &[f64]) -> Result<DMatrix<f64>> {
                Ok(DMatrix::from_element(
                    1,
                    1,
                    2.0 + 1e-3 / (0.3 - u[0]).powi(2),
                ))
            }
        }
        let r = projected_newton(
            &Walled,
            &Bounds::uniform(1, 0.0, 1.0),
            &[0.0],
            &Default::default(),
        )
        .unwrap();
        assert!(r.converged);
        assert!(r.x[0] < 0.3 && r.x[0] > 0.29);
    }
}
