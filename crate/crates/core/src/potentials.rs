//! Wall interaction potentials.
//!
//! Same-sign walls interact through
//!
//! ```text
//! V(r) = r coth r - log|2 sinh r|
//! ```
//!
//! and opposite-sign walls through the phase-shift family
//!
//! ```text
//! W_a(r) = 1/2 log(2 (cosh 2r + a)) - r sinh 2r / (cosh 2r + a),   a in [-1, 1].
//! ```
//!
//! Every evaluation is written in terms of `e = exp(-2|r|)` so that the
//! exponentially small tails keep full relative precision; the textbook forms
//! lose all significant digits well before `|r| = 20`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature;
use crate::summation::Neumaier;

/// Beyond this offset `log1p(-e)` replaces `log(1 - e)` in `V`.
const STABLE_SWITCH: f64 = 0.5;

/// Truncation tolerance for effective (lattice) sums.
const EFF_TAIL_TOL: f64 = 1e-14;

/// Cut-off of the half-line integrals; the tail beyond it is added in closed form.
const TAIL_CUT: f64 = 30.0;

/// Phase-shift parameter `a` of the opposite-sign potential.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct PhaseShift(f64);

impl PhaseShift {
    pub const REPULSIVE_MAX: PhaseShift = PhaseShift(1.0);

    pub fn new(a: f64) -> Result<Self> {
        if !(-1.0..=1.0).contains(&a) {
            return Err(Error::Parameter(format!(
                "phase shift a = {a} outside [-1, 1]"
            )));
        }
        Ok(Self(a))
    }

    pub fn value(self) -> f64 {
        self.0
    }

    /// `a` in `[0, 1]`, where `0 < W_a < V`.
    pub fn is_repelling(self) -> bool {
        self.0 >= 0.0
    }
}

impl TryFrom<f64> for PhaseShift {
    type Error = Error;
    fn try_from(a: f64) -> Result<Self> {
        Self::new(a)
    }
}

impl From<PhaseShift> for f64 {
    fn from(a: PhaseShift) -> f64 {
        a.0
    }
}

/// An even pair potential with two derivatives.
///
/// Implementations return extended reals (`+inf`, NaN) at singular points
/// instead of failing, so they can sit in tight force loops.
pub trait PairPotential: Sync {
    fn value(&self, r: f64) -> f64;
    fn d1(&self, r: f64) -> f64;
    fn d2(&self, r: f64) -> f64;
}

/// The two shipped wall potentials.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum WallPotential {
    SameSign,
    OppositeSign(PhaseShift),
}

impl PairPotential for WallPotential {
    #[inline]
    fn value(&self, r: f64) -> f64 {
        match *self {
            WallPotential::SameSign => v(r),
            WallPotential::OppositeSign(a) => w(r, a),
        }
    }
    #[inline]
    fn d1(&self, r: f64) -> f64 {
        match *self {
            WallPotential::SameSign => dv(r),
            WallPotential::OppositeSign(a) => w_prime(r, a),
        }
    }
    #[inline]
    fn d2(&self, r: f64) -> f64 {
        match *self {
            WallPotential::SameSign => d2v(r),
            WallPotential::OppositeSign(a) => w_second(r, a),
        }
    }
}

/// `V(r)`; `+inf` at `r = 0`.
pub fn v(r: f64) -> f64 {
    let x = r.abs();
    if x == 0.0 {
        return f64::INFINITY;
    }
    let e = (-2.0 * x).exp();
    let one_minus_e = -(-2.0 * x).exp_m1();
    // r (coth r - 1) = 2 r e / (1 - e)
    let head = 2.0 * x * e / one_minus_e;
    if x > STABLE_SWITCH {
        head - (-e).ln_1p()
    } else {
        head - one_minus_e.ln()
    }
}

/// `V'(r) = -r / sinh^2 r`.
pub fn v_prime(r: f64) -> Result<f64> {
    if r == 0.0 {
        return Err(Error::Domain("V' is singular at r = 0".into()));
    }
    Ok(dv(r))
}

/// `V''(r) = (2 r coth r - 1) / sinh^2 r`.
pub fn v_second(r: f64) -> Result<f64> {
    if r == 0.0 {
        return Err(Error::Domain("V'' is singular at r = 0".into()));
    }
    Ok(d2v(r))
}

#[inline]
fn dv(r: f64) -> f64 {
    let x = r.abs();
    let e = (-2.0 * x).exp();
    let om = -(-2.0 * x).exp_m1();
    // sinh^2 r = (1 - e)^2 / (4 e)
    -(4.0 * x * e / (om * om)).copysign(r)
}

#[inline]
fn d2v(r: f64) -> f64 {
    let x = r.abs();
    let e = (-2.0 * x).exp();
    let om = -(-2.0 * x).exp_m1();
    4.0 * e * (2.0 * x * (1.0 + e) - om) / (om * om * om)
}

/// `W_a(r)`.
pub fn w(r: f64, a: PhaseShift) -> f64 {
    let a = a.0;
    if a == -1.0 {
        return -v(r);
    }
    let x = r.abs();
    let e = (-2.0 * x).exp();
    let om = -(-2.0 * x).exp_m1();
    // 2 e (cosh 2r + a) = 1 + 2 a e + e^2, written without cancellation near a = -1
    let u = 2.0 * a * e + e * e;
    let d = om * om + 2.0 * (1.0 + a) * e;
    let log_term = if x > 1.0 { u.ln_1p() } else { d.ln() };
    0.5 * log_term + x * 2.0 * e * (a + e) / d
}

/// `W_a'(r) = -2r (1 + a cosh 2r) / (cosh 2r + a)^2`.
pub fn w_prime(r: f64, a: PhaseShift) -> f64 {
    let a = a.0;
    if a == -1.0 {
        return if r == 0.0 { f64::NAN } else { -dv(r) };
    }
    let x = r.abs();
    let e = (-2.0 * x).exp();
    let om = -(-2.0 * x).exp_m1();
    let d = om * om + 2.0 * (1.0 + a) * e;
    let num = 2.0 * e + a * (1.0 + e * e);
    (-4.0 * x * e * num / (d * d)).copysign(-r)
}

/// `W_a''(r)`.
pub fn w_second(r: f64, a: PhaseShift) -> f64 {
    let a = a.0;
    if a == -1.0 {
        return -d2v(r);
    }
    let x = r.abs();
    let e = (-2.0 * x).exp();
    let om = -(-2.0 * x).exp_m1();
    let d = om * om + 2.0 * (1.0 + a) * e;
    let p = a * (1.0 + e * e);
    let first = 8.0 * x * e * om * (1.0 + e) * (p + 2.0 * (2.0 - a * a) * e) / (d * d * d);
    let second = 4.0 * e * (2.0 * e + p) / (d * d);
    first - second
}

/// `sum_{k >= 1} f(k x)` for an exponentially decaying `f`.
///
/// The series is cut at `K = ceil(ln(1e14) / x)` terms, beyond which the
/// dominating `e^{-kx}` tail is below `1e-14`; terms are added smallest first.
pub fn effective_sum<F: Fn(f64) -> f64>(f: F, x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::Domain(format!(
            "effective sum needs spacing x > 0, got {x}"
        )));
    }
    let k_max = ((-EFF_TAIL_TOL.ln()) / x).ceil().max(1.0) as usize;
    let mut acc = Neumaier::default();
    for k in (1..=k_max).rev() {
        acc.add(f(k as f64 * x));
    }
    Ok(acc.sum())
}

/// `V_eff(x) = sum_{k >= 1} V(k x)`.
pub fn v_eff(x: f64) -> Result<f64> {
    effective_sum(v, x)
}

/// `W_eff(x) = sum_{k >= 1} W_a(k x)`.
pub fn w_eff(x: f64, a: PhaseShift) -> Result<f64> {
    effective_sum(|r| w(r, a), x)
}

/// `sum_{k >= 1} |V'(k x)|`, the total same-sign force exerted by a half lattice.
pub fn v_prime_eff_abs(x: f64) -> Result<f64> {
    effective_sum(|r| dv(r).abs(), x)
}

/// Maximiser `r*` of `|W_a'|` on `(0, inf)`.
///
/// Golden-section search brackets the maximiser, then Newton iterations on
/// `W_a''(r) = 0` (with a central-difference third derivative) polish it.
pub fn r_star(a: PhaseShift) -> Result<f64> {
    if !a.is_repelling() {
        return Err(Error::Parameter(format!(
            "r* is defined for a in [0, 1], got {}",
            a.0
        )));
    }
    let g = |r: f64| -w_prime(r, a);
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut lo, mut hi) = (0.0_f64, 4.0_f64);
    let mut c = hi - inv_phi * (hi - lo);
    let mut d = lo + inv_phi * (hi - lo);
    let (mut gc, mut gd) = (g(c), g(d));
    while hi - lo > 1e-6 {
        if gc > gd {
            hi = d;
            d = c;
            gd = gc;
            c = hi - inv_phi * (hi - lo);
            gc = g(c);
        } else {
            lo = c;
            c = d;
            gc = gd;
            d = lo + inv_phi * (hi - lo);
            gd = g(d);
        }
    }
    // The maximiser is where W'' changes sign from negative to positive.
    let (blo, bhi) = (lo - 1e-6, hi + 1e-6);
    if !(w_second(blo, a) < 0.0 && w_second(bhi, a) > 0.0) {
        return Err(Error::Numerical(
            "r*: maximiser of |W'| not bracketed".into(),
        ));
    }
    let mut r = 0.5 * (lo + hi);
    let h = 1e-5;
    for _ in 0..50 {
        let f = w_second(r, a);
        let df = (w_second(r + h, a) - w_second(r - h, a)) / (2.0 * h);
        let step = f / df;
        let next = (r - step).clamp(blo, bhi);
        let done = (next - r).abs() < 1e-14;
        r = next;
        if done {
            break;
        }
    }
    Ok(r)
}

/// Which potential a half-line integral refers to.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum HalfLine {
    V,
    W(PhaseShift),
}

/// `int_0^inf V` or `int_0^inf W_a`.
///
/// Adaptive quadrature on `(0, 30]` plus the leading-order tail beyond 30.
/// For `V` the logarithmic singularity at the origin is resolved on dyadic
/// panels `[2^{-k-1}, 2^{-k}]`, and the last sliver `[0, 2^{-52}]` is
/// integrated from the expansion `V(r) = 1 - log(2r) + O(r^2)`.
pub fn integral_0_inf(which: HalfLine) -> Result<f64> {
    let mut acc = Neumaier::default();
    match which {
        HalfLine::V => {
            let delta = 2f64.powi(-52);
            acc.add(delta * (2.0 - (2.0 * delta).ln()));
            let mut points: Vec<f64> = (0..=52).rev().map(|k| 2f64.powi(-k)).collect();
            points.extend([2.0, 4.0, 8.0, 16.0, TAIL_CUT]);
            let r = quadrature::integrate_breakpoints(v, &points, 1e-13, 1e-15);
            if !r.converged {
                return Err(Error::Numerical("quadrature of V did not converge".into()));
            }
            acc.add(r.value);
            // int_R^inf (2r + 1) e^{-2r} dr
            acc.add((TAIL_CUT + 1.0) * (-2.0 * TAIL_CUT).exp());
        }
        HalfLine::W(a) => {
            if !a.is_repelling() {
                return Err(Error::Parameter(
                    "int W_a is only provided for a in [0, 1]".into(),
                ));
            }
            let points = [0.0, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0, TAIL_CUT];
            let r = quadrature::integrate_breakpoints(|x| w(x, a), &points, 1e-13, 1e-15);
            if !r.converged {
                return Err(Error::Numerical("quadrature of W did not converge".into()));
            }
            acc.add(r.value);
            // W_a(r) ~ a (1 + 2r) e^{-2r}
            acc.add(a.0 * (TAIL_CUT + 1.0) * (-2.0 * TAIL_CUT).exp());
        }
    }
    Ok(acc.sum())
}

/// A priori bound on the tail dropped beyond the cut-off.
pub fn integral_tail_bound() -> f64 {
    2.0 * (TAIL_CUT + 1.0) * (-2.0 * TAIL_CUT).exp()
}
