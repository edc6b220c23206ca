//! Gradient flow `dx/dt = -n grad E_n(x)` on `[0, 1]^n`.
//!
//! The default integrator is TR-BDF2: a trapezoidal stage to `t + gamma h`
//! followed by a BDF2 stage to `t + h`, with `gamma = 2 - sqrt 2` so that both
//! implicit solves share one matrix `I - (gamma/2) h J`. The method is
//! L-stable, which lets steps grow to `1e9` and beyond once the system has
//! settled. Errors are estimated against the third-order quadrature through
//! the three stage slopes, filtered through the same matrix.
//!
//! Both walls are handled by projection: force components pushing a particle
//! through a barrier are zeroed, and Newton iterates are clamped to `[0, 1]`.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector, LU};
use serde::{Deserialize, Serialize};

use crate::config::{fmt17, Configuration, ModelParams};
use crate::energy;
use crate::error::{Error, Result};

/// Default horizon of the reproduction runs.
pub const T_EQUILIBRIUM: f64 = 1e10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// TR-BDF2 (trapezoid + BDF2 stages), the stiff default.
    ImplicitTrapezoid,
    /// Dormand-Prince 5(4); only sensible on short horizons.
    ExplicitEmbedded,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct IntegratorOptions {
    pub rtol: f64,
    pub atol: f64,
    pub t_end: f64,
    pub method: Method,
    pub max_steps: usize,
    pub sample_times: Vec<f64>,
}

impl Default for IntegratorOptions {
    fn default() -> Self {
        Self {
            rtol: 1e-8,
            atol: 1e-10,
            t_end: T_EQUILIBRIUM,
            method: Method::ImplicitTrapezoid,
            max_steps: 2_000_000,
            sample_times: Vec::new(),
        }
    }
}

impl IntegratorOptions {
    fn validate(&self) -> Result<()> {
        if !(self.rtol > 0.0 && self.atol > 0.0) {
            return Err(Error::Parameter("tolerances must be positive".into()));
        }
        if !(self.t_end > 0.0) || !self.t_end.is_finite() {
            return Err(Error::Parameter(format!(
                "t_end must be positive, got {}",
                self.t_end
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlowState {
    pub t: f64,
    pub config: Configuration,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StepStats {
    pub accepted: usize,
    pub rejected: usize,
    pub newton_failures: usize,
    pub crossing_rejections: usize,
    pub energy_rejections: usize,
    pub rhs_evals: usize,
    pub jacobian_evals: usize,
    pub factorizations: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Trajectory {
    pub samples: Vec<FlowState>,
    pub final_state: FlowState,
    pub stats: StepStats,
    /// False when the step budget ran out before `t_end`.
    pub completed: bool,
    pub diagnostic: Option<String>,
}

impl Trajectory {
    /// CSV rows `(t, species, index, position)` for every sample and the final state.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,species,index,position\n");
        let last_is_sample = self
            .samples
            .last()
            .is_some_and(|s| s.t == self.final_state.t);
        let extra = if last_is_sample {
            None
        } else {
            Some(&self.final_state)
        };
        for s in self.samples.iter().chain(extra) {
            for (i, x) in s.config.plus().iter().enumerate() {
                let _ = writeln!(out, "{},1,{},{}", fmt17(s.t), i + 1, fmt17(*x));
            }
            for (i, x) in s.config.minus().iter().enumerate() {
                let _ = writeln!(out, "{},-1,{},{}", fmt17(s.t), i + 1, fmt17(*x));
            }
        }
        out
    }

    /// JSON sidecar with parameters, options and step statistics.
    pub fn metadata_json(&self, p: &ModelParams, opts: &IntegratorOptions) -> Result<String> {
        let v = serde_json::json!({
            "params": p,
            "options": {
                "rtol": opts.rtol,
                "atol": opts.atol,
                "t_end": opts.t_end,
                "method": opts.method,
                "max_steps": opts.max_steps,
                "samples": opts.sample_times.len(),
            },
            "stats": self.stats,
            "completed": self.completed,
            "diagnostic": self.diagnostic,
            "final_time": self.final_state.t,
        });
        Ok(serde_json::to_string_pretty(&v)?)
    }
}

/// `x^+_i = (i-1)/n`, `x^-_i = 1/2 + i/n`, `i = 1..n/2`.
pub fn initial_condition_equispaced(n: usize) -> Result<Configuration> {
    if n == 0 || !n.is_multiple_of(2) {
        return Err(Error::Parameter(format!(
            "equispaced initial condition needs even n, got {n}"
        )));
    }
    let nf = n as f64;
    let plus = (0..n / 2).map(|i| i as f64 / nf).collect();
    let minus = (1..=n / 2).map(|i| 0.5 + i as f64 / nf).collect();
    Configuration::new(plus, minus)
}

/// Geometric sample grid from `t0` to `t1` with `per_decade` points per decade.
pub fn geometric_grid(t0: f64, t1: f64, per_decade: usize) -> Vec<f64> {
    let decades = (t1 / t0).log10();
    let m = (decades * per_decade as f64).round() as usize;
    (0..=m)
        .map(|k| t0 * 10f64.powf(k as f64 / per_decade as f64))
        .map(|t| if (t / t1 - 1.0).abs() < 1e-12 { t1 } else { t })
        .collect()
}

/// The projected vector field in block layout.
struct System<'a> {
    p: &'a ModelParams,
}

impl System<'_> {
    fn split<'b>(&self, y: &'b [f64]) -> (&'b [f64], &'b [f64]) {
        y.split_at(self.p.n_plus)
    }

    /// Components whose force would push them through a barrier.
    fn pinned(y: &[f64], f: &[f64]) -> Vec<bool> {
        y.iter()
            .zip(f)
            .map(|(&x, &v)| (x <= WALL_SNAP && v < 0.0) || (x >= 1.0 - WALL_SNAP && v > 0.0))
            .collect()
    }

    fn rhs(&self, y: &[f64], stats: &mut StepStats) -> Result<Vec<f64>> {
        stats.rhs_evals += 1;
        let (plus, minus) = self.split(y);
        let g = energy::grad_split(plus, minus, self.p)?;
        let n = self.p.n() as f64;
        let mut f: Vec<f64> = g.plus.iter().chain(&g.minus).map(|v| -n * v).collect();
        let pins = Self::pinned(y, &f);
        for (fi, pin) in f.iter_mut().zip(pins) {
            if pin {
                *fi = 0.0;
            }
        }
        Ok(f)
    }

    fn jacobian(&self, y: &[f64], f_raw: &[f64], stats: &mut StepStats) -> Result<DMatrix<f64>> {
        stats.jacobian_evals += 1;
        let (plus, minus) = self.split(y);
        let mut j = energy::hessian_split(plus, minus, self.p)? * (-(self.p.n() as f64));
        for (i, pin) in Self::pinned(y, f_raw).into_iter().enumerate() {
            if pin {
                j.row_mut(i).fill(0.0);
            }
        }
        Ok(j)
    }

    fn unprojected(&self, y: &[f64]) -> Result<Vec<f64>> {
        let (plus, minus) = self.split(y);
        let g = energy::grad_split(plus, minus, self.p)?;
        let n = self.p.n() as f64;
        Ok(g.plus.iter().chain(&g.minus).map(|v| -n * v).collect())
    }

    fn energy(&self, y: &[f64]) -> f64 {
        let (plus, minus) = self.split(y);
        energy::energy_split(plus, minus, self.p)
    }

    fn ordered(&self, y: &[f64]) -> bool {
        let (plus, minus) = self.split(y);
        let ok = |v: &[f64]| v.windows(2).all(|w| w[1] - w[0] >= energy::SINGULAR_GAP);
        ok(plus) && ok(minus)
    }
}

/// Positions this close to a wall are put on it; stage combinations of
/// pinned components otherwise drift off the wall by rounding.
const WALL_SNAP: f64 = 1e-14;

fn clamp_unit(y: &mut [f64]) {
    for v in y {
        *v = if *v <= WALL_SNAP {
            0.0
        } else if *v >= 1.0 - WALL_SNAP {
            1.0
        } else {
            *v
        };
    }
}

fn weighted_max(v: &[f64], y0: &[f64], y1: &[f64], atol: f64, rtol: f64) -> f64 {
    v.iter()
        .zip(y0.iter().zip(y1))
        .map(|(e, (a, b))| e.abs() / (atol + rtol * a.abs().max(b.abs())))
        .fold(0.0, f64::max)
}

/// What ended an integration.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    GradientTolerance,
    EndTime,
    StepBudget,
}

enum StepOutcome {
    Accepted {
        y: Vec<f64>,
        f: Vec<f64>,
        h_next: f64,
    },
    Rejected {
        h_next: f64,
    },
}

const GAMMA: f64 = 2.0 - std::f64::consts::SQRT_2;
const DIAG: f64 = GAMMA / 2.0;
const MAX_NEWTON: usize = 10;
const SLOW_NEWTON: usize = 3;

/// TR-BDF2 state: the cached Jacobian and the factorisation of `I - d h J`.
struct TrBdf2<'a> {
    sys: System<'a>,
    rtol: f64,
    atol: f64,
    jac: Option<DMatrix<f64>>,
    jac_fresh: bool,
    /// Newton needed many iterations on the last accepted step.
    stale: bool,
    lu: Option<(f64, LU<f64, nalgebra::Dyn, nalgebra::Dyn>)>,
}

enum NewtonError {
    Diverged,
    Singular,
}

impl<'a> TrBdf2<'a> {
    fn new(p: &'a ModelParams, rtol: f64, atol: f64) -> Self {
        Self {
            sys: System { p },
            rtol,
            atol,
            jac: None,
            jac_fresh: false,
            stale: false,
            lu: None,
        }
    }

    fn refresh_jacobian(&mut self, y: &[f64], stats: &mut StepStats) -> Result<()> {
        let raw = self.sys.unprojected(y)?;
        self.jac = Some(self.sys.jacobian(y, &raw, stats)?);
        self.jac_fresh = true;
        self.lu = None;
        Ok(())
    }

    fn factor(&mut self, h: f64, stats: &mut StepStats) {
        if self.lu.as_ref().is_some_and(|(hh, _)| *hh == h) {
            return;
        }
        let j = self
            .jac
            .as_ref()
            .expect("jacobian computed before factorisation");
        let n = j.nrows();
        let m = DMatrix::identity(n, n) - j * (DIAG * h);
        stats.factorizations += 1;
        self.lu = Some((h, m.lu()));
    }

    /// Solves `z - d h f(z) = rhs` by simplified Newton from `z0`.
    fn newton(
        &self,
        rhs: &[f64],
        z0: Vec<f64>,
        h: f64,
        stats: &mut StepStats,
    ) -> std::result::Result<(Vec<f64>, Vec<f64>, usize), NewtonError> {
        let (_, lu) = self.lu.as_ref().expect("factorised");
        let mut z = z0;
        clamp_unit(&mut z);
        let mut prev: Option<f64> = None;
        for it in 1..=MAX_NEWTON {
            let fz = self.sys.rhs(&z, stats).map_err(|_| NewtonError::Singular)?;
            let g = DVector::from_iterator(
                z.len(),
                z.iter()
                    .zip(&fz)
                    .zip(rhs)
                    .map(|((zi, fi), ri)| -(zi - DIAG * h * fi - ri)),
            );
            let delta = lu.solve(&g).ok_or(NewtonError::Diverged)?;
            let before = z.clone();
            for (zi, di) in z.iter_mut().zip(delta.iter()) {
                *zi += di;
            }
            clamp_unit(&mut z);
            let moved: Vec<f64> = z.iter().zip(&before).map(|(a, b)| a - b).collect();
            let norm = weighted_max(&moved, &before, &z, self.atol, self.rtol);
            if !norm.is_finite() {
                return Err(NewtonError::Diverged);
            }
            let done = match prev {
                None => norm <= 1e-2,
                Some(p) => {
                    let theta = norm / p;
                    if theta >= 0.9 {
                        return Err(NewtonError::Diverged);
                    }
                    theta / (1.0 - theta) * norm <= 1e-2 || norm <= 1e-3
                }
            };
            prev = Some(norm);
            if done {
                if !self.sys.ordered(&z) {
                    return Err(NewtonError::Singular);
                }
                let fz = self.sys.rhs(&z, stats).map_err(|_| NewtonError::Singular)?;
                return Ok((z, fz, it));
            }
        }
        Err(NewtonError::Diverged)
    }

    fn step(
        &mut self,
        y: &[f64],
        f0: &[f64],
        e0: f64,
        h: f64,
        stats: &mut StepStats,
    ) -> Result<StepOutcome> {
        if self.jac.is_none() || self.stale {
            self.stale = false;
            self.refresh_jacobian(y, stats)?;
        }
        self.factor(h, stats);

        // trapezoidal stage
        let rhs1: Vec<f64> = y
            .iter()
            .zip(f0)
            .map(|(yi, fi)| yi + DIAG * h * fi)
            .collect();
        let stage1 = self.newton(&rhs1, y.to_vec(), h, stats);
        let (yg, fg, it1) = match stage1 {
            Ok(v) => v,
            Err(e) => return self.newton_failed(y, h, e, stats),
        };

        // BDF2 stage
        let c1 = 1.0 / (GAMMA * (2.0 - GAMMA));
        let c0 = (1.0 - GAMMA) * (1.0 - GAMMA) / (GAMMA * (2.0 - GAMMA));
        let rhs2: Vec<f64> = yg.iter().zip(y).map(|(a, b)| c1 * a - c0 * b).collect();
        let (y1, f1, it2) = match self.newton(&rhs2, yg.clone(), h, stats) {
            Ok(v) => v,
            Err(e) => return self.newton_failed(y, h, e, stats),
        };

        // third-order quadrature through the stage slopes
        let bg = 1.0 / (6.0 * GAMMA * (1.0 - GAMMA));
        let b1 = 0.5 - 1.0 / (6.0 * (1.0 - GAMMA));
        let b0 = 1.0 - bg - b1;
        let est = DVector::from_iterator(
            y.len(),
            (0..y.len()).map(|i| y[i] + h * (b0 * f0[i] + bg * fg[i] + b1 * f1[i]) - y1[i]),
        );
        let (_, lu) = self.lu.as_ref().expect("factorised");
        let filtered = lu.solve(&est).unwrap_or(est);
        let err = weighted_max(filtered.as_slice(), y, &y1, self.atol, self.rtol);

        if !err.is_finite() || err > 1.0 {
            stats.rejected += 1;
            let fac = if err.is_finite() {
                (0.9 * err.powf(-1.0 / 3.0)).clamp(0.2, 0.9)
            } else {
                0.25
            };
            return Ok(StepOutcome::Rejected { h_next: h * fac });
        }
        let e1 = self.sys.energy(&y1);
        if !(e1 <= e0 + 10.0 * self.atol) {
            stats.rejected += 1;
            stats.energy_rejections += 1;
            return Ok(StepOutcome::Rejected { h_next: 0.5 * h });
        }
        stats.accepted += 1;
        let fac = (0.9 * err.max(1e-10).powf(-1.0 / 3.0)).clamp(0.2, 5.0);
        self.jac_fresh = false;
        self.stale = it1.max(it2) > SLOW_NEWTON;
        Ok(StepOutcome::Accepted {
            y: y1,
            f: f1,
            h_next: h * fac,
        })
    }

    fn newton_failed(
        &mut self,
        y: &[f64],
        h: f64,
        e: NewtonError,
        stats: &mut StepStats,
    ) -> Result<StepOutcome> {
        stats.rejected += 1;
        match e {
            NewtonError::Singular => {
                stats.crossing_rejections += 1;
                Ok(StepOutcome::Rejected { h_next: 0.25 * h })
            }
            NewtonError::Diverged => {
                stats.newton_failures += 1;
                if self.jac_fresh {
                    Ok(StepOutcome::Rejected { h_next: 0.25 * h })
                } else {
                    self.refresh_jacobian(y, stats)?;
                    Ok(StepOutcome::Rejected { h_next: h })
                }
            }
        }
    }
}

/// Dormand-Prince 5(4) tableau.
mod dopri {
    pub const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
    pub const A: [[f64; 6]; 7] = [
        [0.0; 6],
        [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
        [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
        [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
        [
            19372.0 / 6561.0,
            -25360.0 / 2187.0,
            64448.0 / 6561.0,
            -212.0 / 729.0,
            0.0,
            0.0,
        ],
        [
            9017.0 / 3168.0,
            -355.0 / 33.0,
            46732.0 / 5247.0,
            49.0 / 176.0,
            -5103.0 / 18656.0,
            0.0,
        ],
        [
            35.0 / 384.0,
            0.0,
            500.0 / 1113.0,
            125.0 / 192.0,
            -2187.0 / 6784.0,
            11.0 / 84.0,
        ],
    ];
    /// Fifth-order minus fourth-order weights.
    pub const E: [f64; 7] = [
        71.0 / 57600.0,
        0.0,
        -71.0 / 16695.0,
        71.0 / 1920.0,
        -17253.0 / 339200.0,
        22.0 / 525.0,
        -1.0 / 40.0,
    ];
}

struct Dopri<'a> {
    sys: System<'a>,
    rtol: f64,
    atol: f64,
    err_prev: f64,
}

impl Dopri<'_> {
    fn step(
        &mut self,
        y: &[f64],
        f0: &[f64],
        e0: f64,
        h: f64,
        stats: &mut StepStats,
    ) -> Result<StepOutcome> {
        let n = y.len();
        let mut k: Vec<Vec<f64>> = vec![f0.to_vec()];
        for s in 1..7 {
            let mut ys: Vec<f64> = (0..n)
                .map(|i| y[i] + h * (0..s).map(|j| dopri::A[s][j] * k[j][i]).sum::<f64>())
                .collect();
            clamp_unit(&mut ys);
            match self.sys.rhs(&ys, stats) {
                Ok(f) => k.push(f),
                Err(_) => {
                    stats.rejected += 1;
                    stats.crossing_rejections += 1;
                    return Ok(StepOutcome::Rejected { h_next: 0.25 * h });
                }
            }
        }
        debug_assert_eq!(dopri::C.len(), k.len());
        let mut y1: Vec<f64> = (0..n)
            .map(|i| y[i] + h * (0..6).map(|j| dopri::A[6][j] * k[j][i]).sum::<f64>())
            .collect();
        clamp_unit(&mut y1);
        let est: Vec<f64> = (0..n)
            .map(|i| h * (0..7).map(|j| dopri::E[j] * k[j][i]).sum::<f64>())
            .collect();
        let err = weighted_max(&est, y, &y1, self.atol, self.rtol);
        if !err.is_finite() || err > 1.0 || !self.sys.ordered(&y1) {
            stats.rejected += 1;
            let fac = if err.is_finite() {
                (0.9 * err.powf(-0.2)).clamp(0.2, 0.9)
            } else {
                0.25
            };
            return Ok(StepOutcome::Rejected { h_next: h * fac });
        }
        if !(self.sys.energy(&y1) <= e0 + 10.0 * self.atol) {
            stats.rejected += 1;
            stats.energy_rejections += 1;
            return Ok(StepOutcome::Rejected { h_next: 0.5 * h });
        }
        stats.accepted += 1;
        let e = err.max(1e-10);
        let fac = (0.9 * e.powf(-0.7 / 5.0) * self.err_prev.powf(0.4 / 5.0)).clamp(0.2, 5.0);
        self.err_prev = e;
        let f1 = k.pop().expect("seven stages");
        Ok(StepOutcome::Accepted {
            y: y1,
            f: f1,
            h_next: h * fac,
        })
    }
}

enum Stepper<'a> {
    Implicit(TrBdf2<'a>),
    Explicit(Dopri<'a>),
}

impl Stepper<'_> {
    fn step(
        &mut self,
        y: &[f64],
        f0: &[f64],
        e0: f64,
        h: f64,
        st: &mut StepStats,
    ) -> Result<StepOutcome> {
        match self {
            Stepper::Implicit(s) => s.step(y, f0, e0, h, st),
            Stepper::Explicit(s) => s.step(y, f0, e0, h, st),
        }
    }

    fn sys(&self) -> &System<'_> {
        match self {
            Stepper::Implicit(s) => &s.sys,
            Stepper::Explicit(s) => &s.sys,
        }
    }
}

fn state(y: &[f64], n_plus: usize, t: f64) -> Result<FlowState> {
    Ok(FlowState {
        t,
        config: Configuration::from_block(y, n_plus)?,
    })
}

fn drive(
    c0: &Configuration,
    p: &ModelParams,
    opts: &IntegratorOptions,
    grad_tol: Option<f64>,
) -> Result<(Trajectory, StopReason)> {
    opts.validate()?;
    p.matches(c0)?;
    let mut stats = StepStats::default();
    let mut stepper = match opts.method {
        Method::ImplicitTrapezoid => Stepper::Implicit(TrBdf2::new(p, opts.rtol, opts.atol)),
        Method::ExplicitEmbedded => Stepper::Explicit(Dopri {
            sys: System { p },
            rtol: opts.rtol,
            atol: opts.atol,
            err_prev: 1e-4,
        }),
    };
    let mut samples_t: Vec<f64> = opts
        .sample_times
        .iter()
        .copied()
        .filter(|&t| t >= 0.0 && t <= opts.t_end)
        .collect();
    samples_t.sort_by(f64::total_cmp);
    samples_t.dedup();

    let mut y = c0.to_block();
    let mut t = 0.0;
    let mut f = stepper.sys().rhs(&y, &mut stats)?;
    let mut e = stepper.sys().energy(&y);
    let mut samples = Vec::with_capacity(samples_t.len());
    let mut next = 0;
    while next < samples_t.len() && samples_t[next] <= 0.0 {
        samples.push(state(&y, p.n_plus, 0.0)?);
        next += 1;
    }
    let fmax = f.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let mut h = (1e-4 / fmax.max(1.0)).min(opts.t_end);
    let mut reason = StopReason::EndTime;
    let mut diagnostic = None;

    loop {
        if let Some(tol) = grad_tol {
            if f.iter().all(|v| v.abs() <= tol) {
                reason = StopReason::GradientTolerance;
                break;
            }
        }
        if t >= opts.t_end {
            break;
        }
        if stats.accepted + stats.rejected >= opts.max_steps {
            reason = StopReason::StepBudget;
            diagnostic = Some(format!(
                "step budget {} exhausted at t = {t:e}",
                opts.max_steps
            ));
            break;
        }
        let target = samples_t
            .get(next)
            .copied()
            .unwrap_or(opts.t_end)
            .min(opts.t_end);
        let h_try = h.min(target - t);
        let landing = h_try < h;
        if h_try <= t.abs() * 1e-15 || h_try < 1e-300 {
            return Err(Error::Numerical(format!(
                "step size underflow at t = {t:e}"
            )));
        }
        match stepper.step(&y, &f, e, h_try, &mut stats)? {
            StepOutcome::Accepted {
                y: y1,
                f: f1,
                h_next,
            } => {
                t = if landing || t + h_try >= target {
                    target
                } else {
                    t + h_try
                };
                y = y1;
                f = f1;
                e = stepper.sys().energy(&y);
                // a shortened landing step says nothing about the natural step size
                h = if landing { h.max(h_next) } else { h_next };
                while next < samples_t.len() && samples_t[next] <= t {
                    samples.push(state(&y, p.n_plus, t)?);
                    next += 1;
                }
            }
            StepOutcome::Rejected { h_next } => h = h_next,
        }
    }
    let traj = Trajectory {
        samples,
        final_state: state(&y, p.n_plus, t)?,
        stats,
        completed: reason != StopReason::StepBudget,
        diagnostic,
    };
    Ok((traj, reason))
}

/// Integrates the flow from `c0` to `opts.t_end`, recording `opts.sample_times`.
pub fn integrate(
    c0: &Configuration,
    p: &ModelParams,
    opts: &IntegratorOptions,
) -> Result<Trajectory> {
    drive(c0, p, opts, None).map(|(t, _)| t)
}

/// Integrates until every component of the projected velocity `-n grad E_n`
/// is at most `grad_tol` in magnitude, or until `opts.t_end`.
pub fn run_to_equilibrium(
    c0: &Configuration,
    p: &ModelParams,
    grad_tol: f64,
    opts: &IntegratorOptions,
) -> Result<(FlowState, StopReason, StepStats)> {
    let (traj, reason) = drive(c0, p, opts, Some(grad_tol))?;
    Ok((traj.final_state, reason, traj.stats))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diagnostics;
    use crate::potentials::PhaseShift;

    fn params(n: usize, alpha: f64) -> ModelParams {
        ModelParams::balanced(n, alpha, 0.0, PhaseShift::new(1.0).unwrap()).unwrap()
    }

    #[test]
    fn initial_conditions() {
        let c = initial_condition_equispaced(4).unwrap();
        assert_eq!(c.plus(), &[0.0, 0.25]);
        assert_eq!(c.minus(), &[0.75, 1.0]);
        let c2 = initial_condition_equispaced(2).unwrap();
        assert_eq!((c2.plus(), c2.minus()), (&[0.0][..], &[1.0][..]));
        assert!(initial_condition_equispaced(5).is_err());
        for n in [8, 64, 256] {
            assert!(diagnostics::is_fully_separated(
                &initial_condition_equispaced(n).unwrap()
            ));
        }
    }

    #[test]
    fn grid_endpoints() {
        let g = geometric_grid(1e-4, 1e10, 15);
        assert_eq!(g.len(), 14 * 15 + 1);
        assert_eq!(g[0], 1e-4);
        assert_eq!(*g.last().unwrap(), 1e10);
    }

    #[test]
    fn short_run_agrees_with_explicit_method() {
        let p = params(8, 16.0);
        let c0 = initial_condition_equispaced(8).unwrap();
        let opts = IntegratorOptions {
            t_end: 1.0,
            rtol: 1e-9,
            atol: 1e-11,
            ..Default::default()
        };
        let a = integrate(&c0, &p, &opts).unwrap();
        let b = integrate(
            &c0,
            &p,
            &IntegratorOptions {
                method: Method::ExplicitEmbedded,
                ..opts
            },
        )
        .unwrap();
        let diff = a
            .final_state
            .config
            .to_block()
            .iter()
            .zip(b.final_state.config.to_block())
            .fold(0.0_f64, |m, (x, y)| m.max((x - y).abs()));
        assert!(diff < 1e-7, "{diff}");
        assert_eq!(a.final_state.t, 1.0);
    }

    #[test]
    fn samples_land_exactly() {
        let p = params(8, 16.0);
        let c0 = initial_condition_equispaced(8).unwrap();
        let grid = vec![0.0, 1e-3, 0.1, 10.0];
        let opts = IntegratorOptions {
            t_end: 10.0,
            sample_times: grid.clone(),
            ..Default::default()
        };
        let tr = integrate(&c0, &p, &opts).unwrap();
        let ts: Vec<f64> = tr.samples.iter().map(|s| s.t).collect();
        assert_eq!(ts, grid);
        assert!(tr.to_csv().lines().count() == 1 + 4 * 8);
    }

    #[test]
    fn separated_equilibrium_at_large_alpha() {
        let p = params(16, 32.0);
        let c0 = initial_condition_equispaced(16).unwrap();
        let tr = integrate(&c0, &p, &IntegratorOptions::default()).unwrap();
        assert!(tr.completed);
        let c = &tr.final_state.config;
        assert!(diagnostics::is_fully_separated(c));
        let d = diagnostics::d_plus_minus(c, &p).unwrap();
        assert!((d - 2.102).abs() < 0.03, "{d}");
    }

    #[test]
    fn equilibrium_stop_on_critical_input() {
        let p = params(16, 32.0);
        let m = crate::separated::find_separated_minimizer(&p, 1e-3).unwrap();
        let (s, reason, _) =
            run_to_equilibrium(&m.config, &p, 1e-6, &IntegratorOptions::default()).unwrap();
        assert_eq!(reason, StopReason::GradientTolerance);
        assert_eq!(s.t, 0.0);
    }
}
