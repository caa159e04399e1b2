use crate::error::Result;
use crate::models::Model;
use crate::ode::{integrate_weighted, StepControl};
use crate::scalar::Real;

/// Integrates the extended geodesic flow.
///
/// State layout (`n = dim`): `x`, `ẋ`, then `n_transport` vectors carried by
/// parallel transport, then `n_variation` pairs `(δx, δẋ)` of the linearised
/// flow.
pub(crate) fn integrate_flow<T: Real>(
    model: &Model<T>,
    y0: Vec<T>,
    n_transport: usize,
    n_variation: usize,
    t0: T,
    outputs: &[T],
    step: &StepControl<T>,
) -> Result<Vec<Vec<T>>> {
    let n = model.dim();
    debug_assert_eq!(y0.len(), 2 * n + n * n_transport + 2 * n * n_variation);
    let mut tmp = vec![T::zero(); n];
    let rhs = |_t: T, y: &[T], dy: &mut [T]| -> bool {
        let (x, v) = (&y[..n], &y[n..2 * n]);
        if !model.in_domain(x) {
            return false;
        }
        dy[..n].copy_from_slice(v);
        model.geodesic_accel(x, v, &mut dy[n..2 * n]);
        let mut off = 2 * n;
        for _ in 0..n_transport {
            model.gamma_contract(x, v, &y[off..off + n], &mut tmp);
            for k in 0..n {
                dy[off + k] = -tmp[k];
            }
            off += n;
        }
        for _ in 0..n_variation {
            let (dx, dv) = (&y[off..off + n], &y[off + n..off + 2 * n]);
            dy[off..off + n].copy_from_slice(dv);
            model.accel_jvp(x, v, dx, dv, &mut dy[off + n..off + 2 * n]);
            off += 2 * n;
        }
        dy.iter().all(|d| d.is_finite())
    };
    // absolute error is measured in metric units at the current point
    let mut scales = vec![T::one(); n];
    let weights = |y: &[T], w: &mut [T]| {
        let x = &y[..n];
        if model.in_domain(x) {
            model.coordinate_scales(x, &mut scales);
        }
        for (i, wi) in w.iter_mut().enumerate() {
            *wi = scales[i % n];
        }
    };
    integrate_weighted(rhs, weights, t0, &y0, outputs, step)
}
