use serde::Serialize;

use super::{FlatteningReport, VariationScan, Verdict};
use crate::error::{Error, Result};
use crate::scalar::Real;

/// One numerical fact check across the probe's scales.
#[derive(Debug, Clone, Serialize)]
pub struct FactCheck<T> {
    pub name: &'static str,
    pub passed: bool,
    /// Worst value of the checked quantity, one per scale.
    pub values: Vec<T>,
    pub threshold: T,
}

#[derive(Debug, Clone, Serialize)]
pub struct FactReport<T> {
    pub checks: Vec<FactCheck<T>>,
}

impl<T: Real> FactReport<T> {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn get(&self, name: &str) -> Option<&FactCheck<T>> {
        self.checks.iter().find(|c| c.name == name)
    }
}

/// `∫₀^{t_m} (t_m − y) f(y) dy = ∫₀^{t_m} ∫₀^y f` by Simpson's rule on the
/// first `m` intervals (`m` even).
fn double_integral<T: Real>(f: &[T], h: T, m: usize) -> T {
    let tm = h * T::from_usize_lossy(m);
    let g: Vec<T> = (0..=m).map(|k| (tm - h * T::from_usize_lossy(k)) * f[k]).collect();
    simpson(&g, h)
}

fn simpson<T: Real>(f: &[T], h: T) -> T {
    let n = f.len() - 1;
    let mut acc = f[0] + f[n];
    for (i, &v) in f.iter().enumerate().take(n).skip(1) {
        acc = acc + if i % 2 == 1 { T::lit(4.0) * v } else { T::lit(2.0) * v };
    }
    acc * h / T::lit(3.0)
}

/// Absolute floor under which a quantity counts as identically zero.
pub(crate) const ZERO_FLOOR: f64 = 1e-8;

/// Checks the finite-scale precursors of the limiting Jacobi-field argument on
/// a flattening probe and one variation scan per scale:
///
/// * `convexity`: second differences of `L` are `≥ −1e-8·max(1,T)`.
/// * `double-integral`: `L(t) − L(0) − t L'(0) = ∫₀^t∫₀^y L''` within `1e-3`
///   relative (or `1e-8·max(1,T)` absolute when both sides vanish).
/// * `half-integral`: `∫₀^{T/2} L''` tends to 0: every value is `≤ 1e-8`, or
///   the last is `≤ 10 · first · δ_last/δ_first + 1e-8`.
/// * `x-norm`: `‖X‖ ≤ 1 + 1e-3` on every connecting geodesic.
/// * `bottom-integrand`: the second-variation integrand at `t = 0` decreases
///   across scales or is `≤ 1e-8` throughout.
pub fn fact_suite<T: Real>(report: &FlatteningReport<T>, scans: &[VariationScan<T>]) -> Result<FactReport<T>> {
    if report.verdict != Verdict::Flattening {
        return Err(Error::usage(format!("fact suite requires a flattening probe, got verdict {}", report.verdict)));
    }
    if scans.len() != report.entries.len() {
        return Err(Error::usage(format!("expected {} variation scans, got {}", report.entries.len(), scans.len())));
    }
    for (scan, entry) in scans.iter().zip(&report.entries) {
        if (scan.scale - entry.scale).abs() > T::lit(1e-9) * entry.scale.max(T::one()) {
            return Err(Error::usage("variation scans must follow the probe's scale order"));
        }
        if !scan.failures.is_empty() {
            return Err(Error::usage(format!("variation scan at T = {:?} has failed rows", scan.scale.to_f64_lossy())));
        }
    }
    let floor = T::lit(ZERO_FLOOR);
    let mut checks = Vec::new();

    let mut conv = Vec::new();
    let mut conv_ok = true;
    for sc in scans {
        let worst = sc
            .lengths
            .windows(3)
            .map(|w| w[0] - T::lit(2.0) * w[1] + w[2])
            .fold(T::infinity(), T::min);
        conv_ok &= worst >= -floor * sc.scale.max(T::one());
        conv.push(worst);
    }
    checks.push(FactCheck { name: "convexity", passed: conv_ok, values: conv, threshold: -floor });

    let mut dbl = Vec::new();
    let mut dbl_ok = true;
    for sc in scans {
        let h = sc.interval();
        let n = sc.t.len() - 1;
        let mut worst = T::zero();
        for m in (2..=n).step_by(2) {
            let lhs = sc.lengths[m] - sc.lengths[0] - sc.t[m] * sc.dl0;
            let rhs = double_integral(&sc.d2l_int, h, m);
            let err = (lhs - rhs).abs();
            let rel = err / lhs.abs().max(rhs.abs()).max(T::min_positive_value());
            if err > floor * sc.scale.max(T::one()) {
                worst = worst.max(rel);
            }
        }
        dbl_ok &= worst <= T::lit(1e-3);
        dbl.push(worst);
    }
    checks.push(FactCheck { name: "double-integral", passed: dbl_ok, values: dbl, threshold: T::lit(1e-3) });

    let half: Vec<T> = scans
        .iter()
        .map(|sc| {
            let m = (sc.t.len() - 1) / 2;
            simpson(&sc.d2l_int[..=m], sc.interval())
        })
        .collect();
    let deltas = report.distortions();
    let half_ok = half.iter().all(|&v| v.abs() <= floor) || {
        let (first, last) = (half[0].abs(), half[half.len() - 1].abs());
        let (d0, d1) = (deltas[0], deltas[deltas.len() - 1]);
        let ratio = if d0 > T::zero() { d1 / d0 } else { T::one() };
        last <= T::lit(10.0) * first * ratio + floor
    };
    checks.push(FactCheck { name: "half-integral", passed: half_ok, values: half, threshold: floor });

    let xn: Vec<T> = scans.iter().map(|sc| sc.x_norm_max.iter().copied().fold(T::zero(), T::max)).collect();
    let xn_ok = xn.iter().all(|&v| v <= T::one() + T::lit(1e-3));
    checks.push(FactCheck { name: "x-norm", passed: xn_ok, values: xn, threshold: T::one() + T::lit(1e-3) });

    let bottom: Vec<T> = scans.iter().map(|sc| sc.d2l_int[0]).collect();
    let bottom_ok = bottom.iter().all(|&v| v.abs() <= floor)
        || (bottom.windows(2).all(|w| w[1] <= w[0] + floor) && bottom[bottom.len() - 1] < bottom[0]);
    checks.push(FactCheck { name: "bottom-integrand", passed: bottom_ok, values: bottom, threshold: floor });

    Ok(FactReport { checks })
}
