//! The discrete energy
//!
//! ```text
//! E_n = 1/n^2 sum_{same species, i > j} alpha V(alpha (x_i - x_j))
//!     + 1/n^2 sum_{i, j} alpha W_a(alpha (x_i^+ - x_j^-))
//!     + gamma^2/n sum_i x_i^+ + gamma^2/n sum_j (1 - x_j^-)
//! ```
//!
//! with its gradient and Hessian. All pair loops accumulate one compensated
//! partial sum per particle and reduce the partial sums in index order, so
//! results do not depend on the number of worker threads.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::config::{Configuration, ModelParams, Species};
use crate::error::{Error, Result};
use crate::potentials::{self, PhaseShift};
use crate::summation::Neumaier;

/// Same-species gap below which the energy is reported as `+inf`.
pub const COLLISION_GAP: f64 = 1e-15;

/// Same-species gap below which forces are refused.
pub const SINGULAR_GAP: f64 = 1e-12;

const PAR_THRESHOLD: usize = 192;

fn rows<F>(len: usize, f: F) -> Vec<f64>
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    if len >= PAR_THRESHOLD {
        (0..len).into_par_iter().map(f).collect()
    } else {
        (0..len).map(f).collect()
    }
}

fn min_gap(v: &[f64]) -> f64 {
    v.windows(2)
        .map(|w| w[1] - w[0])
        .fold(f64::INFINITY, f64::min)
}

/// `E_n(c)`; `+inf` when two particles of one species (numerically) coincide.
pub fn energy(c: &Configuration, p: &ModelParams) -> f64 {
    energy_split(c.plus(), c.minus(), p)
}

/// Energy on raw species slices, which must be sorted.
pub fn energy_split(plus: &[f64], minus: &[f64], p: &ModelParams) -> f64 {
    if min_gap(plus) < COLLISION_GAP || min_gap(minus) < COLLISION_GAP {
        return f64::INFINITY;
    }
    let n = (plus.len() + minus.len()) as f64;
    let (al, a) = (p.alpha, p.a);
    let np = plus.len();
    // Row i < n^+: plus particle i with all earlier plus particles and every
    // minus particle. Row n^+ + k: minus particle k with earlier minus ones.
    let parts = rows(np + minus.len(), |r| {
        let mut s = Neumaier::default();
        if r < np {
            let xi = plus[r];
            for &xj in &plus[..r] {
                s.add(potentials::v(al * (xi - xj)));
            }
            for &y in minus {
                s.add(potentials::w(al * (xi - y), a));
            }
        } else {
            let k = r - np;
            let yk = minus[k];
            for &yl in &minus[..k] {
                s.add(potentials::v(al * (yk - yl)));
            }
        }
        s.sum()
    });
    let interaction = crate::summation::sum(&parts) * al / (n * n);
    let mut ext = Neumaier::default();
    for &x in plus {
        ext.add(x);
    }
    for &y in minus {
        ext.add(1.0 - y);
    }
    interaction + p.gamma * p.gamma / n * ext.sum()
}

/// Gradient of `E_n`, split by species.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradient {
    pub plus: Vec<f64>,
    pub minus: Vec<f64>,
}

impl Gradient {
    /// Block layout `[plus; minus]`.
    pub fn block(&self) -> Vec<f64> {
        let mut v = self.plus.clone();
        v.extend_from_slice(&self.minus);
        v
    }

    /// Components in the merged order of [`Configuration::merged`].
    pub fn merged(&self, c: &Configuration) -> Vec<f64> {
        let (_, labels) = c.merged();
        let (mut i, mut j) = (0, 0);
        labels
            .iter()
            .map(|s| match s {
                Species::Plus => {
                    i += 1;
                    self.plus[i - 1]
                }
                Species::Minus => {
                    j += 1;
                    self.minus[j - 1]
                }
            })
            .collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.plus
            .iter()
            .chain(&self.minus)
            .fold(0.0, |m, g| m.max(g.abs()))
    }
}

/// Exact gradient of `E_n`.
pub fn grad(c: &Configuration, p: &ModelParams) -> Result<Gradient> {
    p.matches(c)?;
    grad_split(c.plus(), c.minus(), p)
}

/// Gradient on raw species slices, which must be sorted.
pub fn grad_split(plus: &[f64], minus: &[f64], p: &ModelParams) -> Result<Gradient> {
    let gp = min_gap(plus);
    let gm = min_gap(minus);
    if gp < SINGULAR_GAP || gm < SINGULAR_GAP {
        return Err(Error::Singular(format!(
            "same-species gap {:.3e} below {SINGULAR_GAP:e}",
            gp.min(gm)
        )));
    }
    let n = (plus.len() + minus.len()) as f64;
    let (al, a) = (p.alpha, p.a);
    let scale = al * al / (n * n);
    let ext = p.gamma * p.gamma / n;
    let np = plus.len();
    let g = rows(np + minus.len(), |r| {
        let (own, other, i, sign) = if r < np {
            (plus, minus, r, 1.0)
        } else {
            (minus, plus, r - np, -1.0)
        };
        let xi = own[i];
        let mut s = Neumaier::default();
        for (j, &xj) in own.iter().enumerate() {
            if j != i {
                s.add(potentials_dv(al * (xi - xj)));
            }
        }
        for &y in other {
            s.add(potentials::w_prime(al * (xi - y), a));
        }
        scale * s.sum() + sign * ext
    });
    let minus_g = g[np..].to_vec();
    let mut plus_g = g;
    plus_g.truncate(np);
    Ok(Gradient {
        plus: plus_g,
        minus: minus_g,
    })
}

#[inline]
fn potentials_dv(r: f64) -> f64 {
    // Only called with same-species offsets already checked to be nonzero.
    potentials::v_prime(r).unwrap_or(f64::NAN)
}

/// Hessian of `E_n` in block order `[plus; minus]`.
pub fn hessian_split(plus: &[f64], minus: &[f64], p: &ModelParams) -> Result<DMatrix<f64>> {
    let g = min_gap(plus).min(min_gap(minus));
    if g < SINGULAR_GAP {
        return Err(Error::Singular(format!(
            "same-species gap {g:.3e} below {SINGULAR_GAP:e}"
        )));
    }
    let np = plus.len();
    let n = np + minus.len();
    let nf = n as f64;
    let (al, a) = (p.alpha, p.a);
    let scale = al * al * al / (nf * nf);
    let x: Vec<f64> = plus.iter().chain(minus).copied().collect();
    let same = |i: usize, j: usize| (i < np) == (j < np);
    let off_rows: Vec<Vec<f64>> = if n >= PAR_THRESHOLD {
        (0..n)
            .into_par_iter()
            .map(|i| hess_row(i, &x, &same, al, a, scale))
            .collect()
    } else {
        (0..n)
            .map(|i| hess_row(i, &x, &same, al, a, scale))
            .collect()
    };
    let mut h = DMatrix::zeros(n, n);
    for (i, row) in off_rows.iter().enumerate() {
        let mut diag = Neumaier::default();
        for (j, &hij) in row.iter().enumerate() {
            if j != i {
                h[(i, j)] = hij;
                diag.add(-hij);
            }
        }
        h[(i, i)] = diag.sum();
    }
    Ok(h)
}

fn hess_row(
    i: usize,
    x: &[f64],
    same: &impl Fn(usize, usize) -> bool,
    al: f64,
    a: PhaseShift,
    scale: f64,
) -> Vec<f64> {
    (0..x.len())
        .map(|j| {
            if j == i {
                0.0
            } else {
                let r = al * (x[i] - x[j]);
                let u2 = if same(i, j) {
                    potentials::v_second(r).unwrap_or(f64::NAN)
                } else {
                    potentials::w_second(r, a)
                };
                -scale * u2
            }
        })
        .collect()
}

pub fn hessian(c: &Configuration, p: &ModelParams) -> Result<DMatrix<f64>> {
    p.matches(c)?;
    hessian_split(c.plus(), c.minus(), p)
}

/// `(2 alpha^3 / n^2)(n I - 1 1^T)`, the Hessian of the quadratic comparator
/// used in the lambda-convexity estimate.
pub fn quadratic_comparator_hessian(n: usize, alpha: f64) -> DMatrix<f64> {
    let nf = n as f64;
    let c = 2.0 * alpha.powi(3) / (nf * nf);
    DMatrix::from_fn(n, n, |i, j| if i == j { c * (nf - 1.0) } else { -c })
}

/// Lower bound `lambda~ <= 0` on `V''` and `W_a''` sampled on `(0, r_max]`,
/// the convexity defect of the pair potentials.
pub fn lambda_tilde(a: PhaseShift, r_max: f64, samples: usize) -> f64 {
    let mut m = potentials::w_second(0.0, a).min(0.0);
    for k in 1..=samples {
        let r = r_max * k as f64 / samples as f64;
        m = m.min(potentials::w_second(r, a));
        m = m.min(potentials::v_second(r).unwrap_or(f64::INFINITY));
    }
    m
}

/// Convexity modulus `2 alpha^3 lambda~ / n` of `E_n` on ordered configurations.
pub fn lambda_n(n: usize, alpha: f64, lambda_tilde: f64) -> f64 {
    2.0 * alpha.powi(3) * lambda_tilde / n as f64
}

/// Derivative of `E_n` with respect to the leftmost negative position with
/// the load switched off:
///
/// ```text
/// alpha^2/n^2 [ sum_{i >= 2} -V'(alpha (x_i^- - x_1^-)) - sum_i -W'(alpha (x_1^- - x_i^+)) ]
/// ```
///
/// A negative value means moving the leftmost negative particle towards the
/// positive block lowers the energy.
pub fn boundary_derivative(c: &Configuration, p: &ModelParams) -> Result<f64> {
    p.matches(c)?;
    let (plus, minus) = (c.plus(), c.minus());
    if plus.is_empty() || minus.is_empty() {
        return Err(Error::Precondition(
            "boundary derivative needs both species".into(),
        ));
    }
    let y = minus[0];
    if !(plus[plus.len() - 1] < y) {
        return Err(Error::Precondition(
            "configuration is not fully separated".into(),
        ));
    }
    let n = c.n() as f64;
    let al = p.alpha;
    let mut s = Neumaier::default();
    for &xi in &minus[1..] {
        let d = potentials::v_prime(al * (xi - y))
            .map_err(|_| Error::Singular("coincident negative particles".into()))?;
        s.add(-d);
    }
    for &xi in plus {
        s.add(potentials::w_prime(al * (y - xi), p.a));
    }
    Ok(al * al / (n * n) * s.sum())
}
