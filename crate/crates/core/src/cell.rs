//! Cell energy densities `psi_m(sigma^+, sigma^-)` and their large-cell limit.
//!
//! A cell of size `m` holds `floor(sigma^+- m)` particles of each species in
//! `[0, 1]`, interacting through `V` and `W_a` at scale `alpha m`. The cell
//! energy is the minimum of `1/m sum alpha V_ij(alpha m (y_i - y_j))`, found by
//! projected Newton from several species interleavings. Starts share the
//! relaxed single-species positions of all `n~` particles and differ only in
//! their labels, so every start begins below the relabelled single-species
//! minimum.
//!
//! Cells are always solved with `sigma^+ >= sigma^-`; the energy is invariant
//! under exchanging species, which makes `psi_m` exactly symmetric.

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{ModelParams, Species};
use crate::energy;
use crate::error::{Error, Result};
use crate::optim::{self, Bounds, NewtonOptions, Objective};
use crate::potentials::PhaseShift;

/// Projected-gradient tolerance of every cell solve.
pub const SOLVER_TOL: f64 = 1e-9;

/// Default number of starts per cell.
pub const DEFAULT_STARTS: usize = 16;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellSpec {
    pub sigma_plus: f64,
    pub sigma_minus: f64,
    pub m: f64,
    pub alpha: f64,
    pub a: PhaseShift,
}

/// `floor(sigma m)`, snapping values within `1e-12` of an integer.
fn count(sigma: f64, m: f64) -> usize {
    let x = sigma * m;
    let r = x.round();
    if (x - r).abs() <= 1e-12 * r.max(1.0) {
        r as usize
    } else {
        x.floor() as usize
    }
}

impl CellSpec {
    pub fn new(sigma_plus: f64, sigma_minus: f64, m: f64) -> Result<Self> {
        let s = Self {
            sigma_plus,
            sigma_minus,
            m,
            alpha: 1.0,
            a: PhaseShift::REPULSIVE_MAX,
        };
        s.validate()?;
        Ok(s)
    }

    fn validate(&self) -> Result<()> {
        let ok = |v: f64| v >= 0.0 && v.is_finite();
        if !ok(self.sigma_plus) || !ok(self.sigma_minus) {
            return Err(Error::Parameter(
                "cell densities must be finite and non-negative".into(),
            ));
        }
        if !(self.m > 0.0) || !self.m.is_finite() {
            return Err(Error::Parameter(format!(
                "cell size must be positive, got {}",
                self.m
            )));
        }
        if !(self.alpha > 0.0) || !self.alpha.is_finite() {
            return Err(Error::Parameter(format!(
                "alpha must be positive, got {}",
                self.alpha
            )));
        }
        Ok(())
    }

    pub fn n_plus(&self) -> usize {
        count(self.sigma_plus, self.m)
    }

    pub fn n_minus(&self) -> usize {
        count(self.sigma_minus, self.m)
    }

    fn swapped(&self) -> Self {
        Self {
            sigma_plus: self.sigma_minus,
            sigma_minus: self.sigma_plus,
            ..*self
        }
    }
}

/// Outcome of one cell minimisation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    /// `psi_m`, clamped below at zero.
    pub value: f64,
    pub grad_norm: f64,
    pub start_id_of_best: usize,
    /// Distinct starts actually run (duplicate interleavings are skipped).
    pub starts_run: usize,
    pub failed_starts: usize,
    /// Best positions and their labels, in merged order.
    pub positions: Vec<f64>,
    pub labels: Vec<Species>,
}

struct Cell {
    params: ModelParams,
    n_plus: usize,
    scale: f64,
}

impl Cell {
    fn new(n_plus: usize, n_minus: usize, spec: &CellSpec) -> Result<Self> {
        let alpha = spec.alpha * spec.m;
        let params = ModelParams::new(n_plus, n_minus, alpha, 0.0, spec.a)?;
        let n = (n_plus + n_minus) as f64;
        // energy_split carries alpha / n^2; the cell energy carries alpha_cell / m
        Ok(Self {
            params,
            n_plus,
            scale: n * n * spec.alpha / (alpha * spec.m),
        })
    }
}

impl Objective for Cell {
    fn dim(&self) -> usize {
        self.params.n()
    }

    fn value(&self, u: &[f64]) -> f64 {
        let (plus, minus) = u.split_at(self.n_plus);
        self.scale * energy::energy_split(plus, minus, &self.params)
    }

    fn gradient(&self, u: &[f64]) -> Result<Vec<f64>> {
        let (plus, minus) = u.split_at(self.n_plus);
        let g = energy::grad_split(plus, minus, &self.params)?;
        Ok(g.plus
            .iter()
            .chain(&g.minus)
            .map(|v| self.scale * v)
            .collect())
    }

    fn hessian(&self, u: &[f64]) -> Result<nalgebra::DMatrix<f64>> {
        let (plus, minus) = u.split_at(self.n_plus);
        Ok(energy::hessian_split(plus, minus, &self.params)? * self.scale)
    }
}

fn solver_options() -> NewtonOptions {
    NewtonOptions {
        tol: SOLVER_TOL,
        max_iter: 2000,
        armijo: 1e-4,
    }
}

/// Relaxed positions of `n` particles of one species.
fn relaxed_single(n: usize, spec: &CellSpec) -> Result<(Vec<f64>, f64, f64)> {
    if n == 1 {
        return Ok((vec![0.5], 0.0, 0.0));
    }
    let cell = Cell::new(n, 0, spec)?;
    let x0: Vec<f64> = (0..n).map(|k| k as f64 / (n - 1) as f64).collect();
    let res =
        optim::projected_newton(&cell, &Bounds::uniform(n, 0.0, 1.0), &x0, &solver_options())?;
    Ok((res.x, res.value, res.projected_gradient))
}

/// Interleavings: fully separated, evenly alternating, then seeded shuffles.
fn interleavings(n_plus: usize, n_minus: usize, starts: usize, seed: u64) -> Vec<Vec<Species>> {
    let n = n_plus + n_minus;
    let mut out: Vec<Vec<Species>> = Vec::with_capacity(starts);
    let separated: Vec<Species> = (0..n)
        .map(|k| {
            if k < n_plus {
                Species::Plus
            } else {
                Species::Minus
            }
        })
        .collect();
    out.push(separated.clone());
    if starts >= 2 {
        out.push(
            (0..n)
                .map(|k| {
                    if (k + 1) * n_minus / n > k * n_minus / n {
                        Species::Minus
                    } else {
                        Species::Plus
                    }
                })
                .collect(),
        );
    }
    for id in 2..starts {
        let mut rng =
            ChaCha8Rng::seed_from_u64(seed ^ (id as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
        let mut pattern = separated.clone();
        pattern.shuffle(&mut rng);
        out.push(pattern);
    }
    out
}

/// `psi_m` by multi-start minimisation; deterministic given `seed`.
pub fn psi_m(spec: &CellSpec, starts: usize, seed: u64) -> Result<CellResult> {
    spec.validate()?;
    if starts == 0 {
        return Err(Error::Parameter("need at least one start".into()));
    }
    if spec.sigma_plus < spec.sigma_minus {
        let mut r = psi_m(&spec.swapped(), starts, seed)?;
        for l in &mut r.labels {
            *l = l.other();
        }
        return Ok(r);
    }
    let (np, nm) = (spec.n_plus(), spec.n_minus());
    let n = np + nm;
    let empty = CellResult {
        value: 0.0,
        grad_norm: 0.0,
        start_id_of_best: 0,
        starts_run: 0,
        failed_starts: 0,
        positions: Vec::new(),
        labels: Vec::new(),
    };
    if n == 0 {
        return Ok(empty);
    }
    let (base, single_value, single_grad) = relaxed_single(n, spec)?;
    if nm == 0 {
        return Ok(CellResult {
            value: single_value.max(0.0),
            grad_norm: single_grad,
            starts_run: 1,
            failed_starts: usize::from(single_grad > SOLVER_TOL),
            positions: base,
            labels: vec![Species::Plus; n],
            ..empty
        });
    }

    let mut patterns = interleavings(np, nm, starts, seed);
    let mut ids: Vec<usize> = (0..patterns.len()).collect();
    {
        let mut seen = std::collections::HashSet::new();
        let keep: Vec<bool> = patterns.iter().map(|p| seen.insert(p.clone())).collect();
        let mut k = 0;
        patterns.retain(|_| {
            k += 1;
            keep[k - 1]
        });
        ids.retain(|&i| keep[i]);
    }

    let cell = Cell::new(np, nm, spec)?;
    let bounds = Bounds::uniform(n, 0.0, 1.0);
    let runs: Vec<Option<(f64, f64, Vec<f64>)>> = patterns
        .par_iter()
        .map(|pattern| {
            let mut plus = Vec::with_capacity(np);
            let mut minus = Vec::with_capacity(nm);
            for (x, s) in base.iter().zip(pattern) {
                match s {
                    Species::Plus => plus.push(*x),
                    Species::Minus => minus.push(*x),
                }
            }
            plus.extend(minus);
            match optim::projected_newton(&cell, &bounds, &plus, &solver_options()) {
                Ok(r) if r.converged && r.value.is_finite() => {
                    Some((r.value, r.projected_gradient, r.x))
                }
                Ok(r) => {
                    log::warn!(
                        "cell start did not converge: projected gradient {:e}",
                        r.projected_gradient
                    );
                    None
                }
                Err(e) => {
                    log::warn!("cell start failed: {e}");
                    None
                }
            }
        })
        .collect();

    let failed = runs.iter().filter(|r| r.is_none()).count();
    let best = runs
        .iter()
        .zip(&ids)
        .filter_map(|(r, id)| r.as_ref().map(|r| (r, *id)))
        .min_by(|(a, ia), (b, ib)| a.0.total_cmp(&b.0).then(ia.cmp(ib)));
    let Some(((value, grad, x), id)) = best else {
        return Err(Error::Numerical(format!(
            "no cell start converged for sigma = ({}, {}), m = {}",
            spec.sigma_plus, spec.sigma_minus, spec.m
        )));
    };
    let mut merged: Vec<(f64, Species)> = x[..np]
        .iter()
        .map(|v| (*v, Species::Plus))
        .chain(x[np..].iter().map(|v| (*v, Species::Minus)))
        .collect();
    merged.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(CellResult {
        value: value.max(0.0),
        grad_norm: *grad,
        start_id_of_best: id,
        starts_run: runs.len(),
        failed_starts: failed,
        positions: merged.iter().map(|p| p.0).collect(),
        labels: merged.iter().map(|p| p.1).collect(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PsiSample {
    pub m: f64,
    pub psi_m: f64,
    pub grad_norm: f64,
    pub start_id_of_best: usize,
    pub failed_starts: usize,
}

/// `psi_m` along increasing `m`, with the last value as estimate and the
/// spread of the last three values as uncertainty.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PsiLimit {
    pub sigma_plus: f64,
    pub sigma_minus: f64,
    pub samples: Vec<PsiSample>,
    pub estimate: f64,
    pub uncertainty: f64,
}

pub fn psi_limit(
    sigma_plus: f64,
    sigma_minus: f64,
    m_list: &[f64],
    starts: usize,
    seed: u64,
) -> Result<PsiLimit> {
    if m_list.len() < 3 || m_list.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Parameter(
            "m_list needs at least three increasing entries".into(),
        ));
    }
    let samples = m_list
        .iter()
        .map(|&m| {
            let r = psi_m(&CellSpec::new(sigma_plus, sigma_minus, m)?, starts, seed)?;
            Ok(PsiSample {
                m,
                psi_m: r.value,
                grad_norm: r.grad_norm,
                start_id_of_best: r.start_id_of_best,
                failed_starts: r.failed_starts,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let tail = &samples[samples.len() - 3..];
    let hi = tail
        .iter()
        .map(|s| s.psi_m)
        .fold(f64::NEG_INFINITY, f64::max);
    let lo = tail.iter().map(|s| s.psi_m).fold(f64::INFINITY, f64::min);
    Ok(PsiLimit {
        sigma_plus,
        sigma_minus,
        estimate: samples[samples.len() - 1].psi_m,
        uncertainty: hi - lo,
        samples,
    })
}

/// `psi` estimates on a rectangular `(sigma^+, sigma^-)` grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PsiTable {
    pub sigma_plus: Vec<f64>,
    pub sigma_minus: Vec<f64>,
    pub m_list: Vec<f64>,
    /// Row-major: `points[i * sigma_minus.len() + j]`.
    pub points: Vec<PsiLimit>,
}

impl PsiTable {
    pub fn compute(
        sigma_plus: &[f64],
        sigma_minus: &[f64],
        m_list: &[f64],
        starts: usize,
        seed: u64,
    ) -> Result<Self> {
        let sorted = |v: &[f64]| !v.is_empty() && v.windows(2).all(|w| w[0] < w[1]);
        if !sorted(sigma_plus) || !sorted(sigma_minus) {
            return Err(Error::Parameter(
                "sigma grids must be non-empty and increasing".into(),
            ));
        }
        let grid: Vec<(f64, f64)> = sigma_plus
            .iter()
            .flat_map(|&p| sigma_minus.iter().map(move |&q| (p, q)))
            .collect();
        let points = grid
            .par_iter()
            .map(|&(p, q)| psi_limit(p, q, m_list, starts, seed))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            sigma_plus: sigma_plus.to_vec(),
            sigma_minus: sigma_minus.to_vec(),
            m_list: m_list.to_vec(),
            points,
        })
    }

    pub fn point(&self, i: usize, j: usize) -> &PsiLimit {
        &self.points[i * self.sigma_minus.len() + j]
    }

    /// Bilinear interpolation of the estimates.
    pub fn interpolate(&self, sp: f64, sm: f64) -> Result<f64> {
        let locate = |grid: &[f64], x: f64| -> Result<(usize, f64)> {
            let (lo, hi) = (grid[0], grid[grid.len() - 1]);
            if !(x >= lo - 1e-12 && x <= hi + 1e-12) {
                return Err(Error::Domain(format!(
                    "density {x} outside the tabulated range [{lo}, {hi}]"
                )));
            }
            if grid.len() == 1 {
                return Ok((0, 0.0));
            }
            let k = grid.partition_point(|&g| g <= x).clamp(1, grid.len() - 1) - 1;
            let t = ((x - grid[k]) / (grid[k + 1] - grid[k])).clamp(0.0, 1.0);
            Ok((k, t))
        };
        let (i, s) = locate(&self.sigma_plus, sp)?;
        let (j, t) = locate(&self.sigma_minus, sm)?;
        let i1 = (i + 1).min(self.sigma_plus.len() - 1);
        let j1 = (j + 1).min(self.sigma_minus.len() - 1);
        let f = |a, b| self.point(a, b).estimate;
        Ok((1.0 - s) * ((1.0 - t) * f(i, j) + t * f(i, j1))
            + s * ((1.0 - t) * f(i1, j) + t * f(i1, j1)))
    }

    /// Columns `sigma_plus, sigma_minus, m, psi_m, grad_norm, start_id_of_best`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("sigma_plus,sigma_minus,m,psi_m,grad_norm,start_id_of_best\n");
        for p in &self.points {
            for s in &p.samples {
                let _ = writeln!(
                    out,
                    "{},{},{},{:.16e},{:.3e},{}",
                    p.sigma_plus, p.sigma_minus, s.m, s.psi_m, s.grad_norm, s.start_id_of_best
                );
            }
        }
        out
    }
}
