//! Adaptive Dormand–Prince 5(4) integrator.
//!
//! The right-hand side reports whether it could be evaluated (the state may
//! have left a chart domain); failed evaluations are treated as rejected
//! steps, and a step size collapse is reported as a domain exit.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Tolerances and limits for the adaptive integrator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepControl<T> {
    pub rtol: T,
    pub atol: T,
    /// Upper bound on the internal step (output spacing is separate).
    pub max_step: T,
    pub max_steps: usize,
}

impl<T: Real> Default for StepControl<T> {
    fn default() -> Self {
        Self { rtol: T::lit(1e-10), atol: T::lit(1e-10), max_step: T::lit(0.25), max_steps: 2_000_000 }
    }
}

impl<T: Real> StepControl<T> {
    pub fn with_tolerance(tol: T) -> Self {
        Self { rtol: tol, atol: tol, ..Self::default() }
    }
}

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

struct Tableau<T> {
    c: [T; 7],
    a: [[T; 6]; 7],
    e: [T; 7],
}

impl<T: Real> Tableau<T> {
    fn new() -> Self {
        Self {
            c: C.map(T::lit),
            a: A.map(|row| row.map(T::lit)),
            e: E.map(T::lit),
        }
    }
}

/// Integrates `y' = f(t, y)` from `t0` and returns the state at each of the
/// `outputs` times, which must be monotone and lie on one side of `t0`
/// (integration runs backwards if they precede `t0`).
///
/// `rhs(t, y, dy)` writes the derivative and returns `false` if `y` is not an
/// admissible state.
pub fn integrate<T, F>(rhs: F, t0: T, y0: &[T], outputs: &[T], ctrl: &StepControl<T>) -> Result<Vec<Vec<T>>>
where
    T: Real,
    F: FnMut(T, &[T], &mut [T]) -> bool,
{
    integrate_weighted(rhs, |_, w: &mut [T]| w.iter_mut().for_each(|x| *x = T::one()), t0, y0, outputs, ctrl)
}

/// As [`integrate`], with the absolute tolerance of component `i` scaled by
/// `w_i(y)` as written by `weights(y, w)` (evaluated at the start of each
/// step). Lets callers measure absolute error in problem-specific units.
pub fn integrate_weighted<T, F, W>(
    mut rhs: F,
    mut weights: W,
    t0: T,
    y0: &[T],
    outputs: &[T],
    ctrl: &StepControl<T>,
) -> Result<Vec<Vec<T>>>
where
    T: Real,
    F: FnMut(T, &[T], &mut [T]) -> bool,
    W: FnMut(&[T], &mut [T]),
{
    let n = y0.len();
    let mut w = vec![T::one(); n];
    let mut out = Vec::with_capacity(outputs.len());
    if outputs.is_empty() {
        return Ok(out);
    }
    let last = *outputs.last().unwrap();
    let dir = if last >= t0 { T::one() } else { -T::one() };
    if outputs.iter().any(|&s| (s - t0) * dir < T::zero()) {
        return Err(Error::usage("output times must lie on one side of the start time"));
    }
    if outputs.windows(2).any(|w| (w[1] - w[0]) * dir < T::zero()) {
        return Err(Error::usage("output times must be monotone"));
    }

    let tab = Tableau::<T>::new();
    let mut y = y0.to_vec();
    let mut t = t0;
    let mut k: Vec<Vec<T>> = vec![vec![T::zero(); n]; 7];
    let mut ytmp = vec![T::zero(); n];
    let mut ynew = vec![T::zero(); n];
    if !rhs(t, &y, &mut k[0]) {
        return Err(Error::DomainExit { last_t: t0.to_f64_lossy() });
    }

    let span = (last - t0).abs();
    let mut h = ctrl.max_step.min(span.max(T::lit(1e-3))) * T::lit(0.1);
    h = h.max(T::lit(1e-6));
    let tiny = T::epsilon() * T::lit(64.0) * unit_span(t0, last);
    let mut steps = 0usize;
    let mut next_out = 0usize;

    while next_out < outputs.len() && (outputs[next_out] - t0) * dir <= T::zero() {
        out.push(y.clone());
        next_out += 1;
    }

    while next_out < outputs.len() {
        let target = outputs[next_out];
        let remaining = (target - t) * dir;
        if remaining <= tiny {
            out.push(y.clone());
            next_out += 1;
            continue;
        }
        let mut hstep = h.min(ctrl.max_step).min(remaining);
        let hits_target = hstep >= remaining;
        if hits_target {
            hstep = remaining;
        }
        steps += 1;
        if steps > ctrl.max_steps {
            return Err(Error::Integrator { t: t.to_f64_lossy(), reason: "step budget exhausted".into() });
        }

        let hs = hstep * dir;
        let mut ok = true;
        for s in 1..7 {
            for i in 0..n {
                let mut acc = y[i];
                for (j, kj) in k.iter().enumerate().take(s) {
                    let a = tab.a[s][j];
                    if a != T::zero() {
                        acc = acc + hs * a * kj[i];
                    }
                }
                ytmp[i] = acc;
            }
            let ts = t + tab.c[s] * hs;
            if !rhs(ts, &ytmp, &mut k[s]) {
                ok = false;
                break;
            }
            if s == 6 {
                ynew.copy_from_slice(&ytmp);
            }
        }

        let err = if ok {
            weights(&y, &mut w);
            let mut acc = T::zero();
            for i in 0..n {
                let mut e = T::zero();
                for (j, kj) in k.iter().enumerate() {
                    e = e + tab.e[j] * kj[i];
                }
                e = e * hs;
                let sc = ctrl.atol * w[i] + ctrl.rtol * y[i].abs().max(ynew[i].abs());
                let r = e / sc;
                acc = acc + r * r;
            }
            (acc / T::from_usize_lossy(n.max(1))).sqrt()
        } else {
            T::infinity()
        };

        if err.is_finite() && err <= T::one() {
            t = if hits_target { target } else { t + hs };
            y.copy_from_slice(&ynew);
            k.swap(0, 6);
            let fac = if err == T::zero() {
                T::lit(5.0)
            } else {
                (T::lit(0.9) * err.powf(T::lit(-0.2))).min(T::lit(5.0)).max(T::lit(0.2))
            };
            // a step clipped to hit an output must not shrink the next one
            h = if hits_target { h.max(hstep * fac) } else { hstep * fac };
            if hits_target {
                out.push(y.clone());
                next_out += 1;
            }
        } else {
            let fac = if err.is_finite() {
                (T::lit(0.9) * err.powf(T::lit(-0.2))).max(T::lit(0.1)).min(T::lit(0.5))
            } else {
                T::lit(0.25)
            };
            h = hstep * fac;
            if h <= tiny {
                return if ok {
                    Err(Error::Integrator { t: t.to_f64_lossy(), reason: "step size underflow".into() })
                } else {
                    Err(Error::DomainExit { last_t: t.to_f64_lossy() })
                };
            }
        }
    }
    Ok(out)
}

fn unit_span<T: Real>(a: T, b: T) -> T {
    a.abs().max(b.abs()).max(T::one())
}
