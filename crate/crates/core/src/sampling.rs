//! Seeded random sampling of chart points, tangent vectors and planes.
//!
//! Every sample stream is a ChaCha8 generator keyed by `(seed, stream)`, so a
//! batch is reproducible no matter how its items are scheduled across threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::linalg::{axpy, scale};
use crate::models::{ChartPoint, Model, TangentVec};
use crate::scalar::Real;

pub type SampleRng = ChaCha8Rng;

/// Generator for item `stream` of the batch identified by `seed`.
pub fn rng_for(seed: u64, stream: u64) -> SampleRng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

/// Uniform in `[lo, hi)`.
pub fn uniform<T: Real>(rng: &mut SampleRng, lo: f64, hi: f64) -> T {
    T::lit(rng.gen_range(lo..hi))
}

/// A chart point scattered around the model's reference point. `spread` is a
/// coordinate half-width; the half-space height is drawn log-uniformly in
/// `[e^{-s}, e^{s}]` with `s = min(spread, 3)` so it stays well inside the
/// chart.
pub fn random_chart_point<T: Real>(model: &Model<T>, rng: &mut SampleRng, spread: f64) -> ChartPoint<T> {
    ChartPoint::new(random_coords(model, rng, spread))
}

fn random_coords<T: Real>(model: &Model<T>, rng: &mut SampleRng, spread: f64) -> Vec<T> {
    match model {
        Model::HalfSpace { dim, .. } => {
            let mut c: Vec<T> = (0..dim - 1).map(|_| uniform(rng, -spread, spread)).collect();
            let s = spread.min(3.0);
            c.push(T::lit(rng.gen_range(-s..s)).exp());
            c
        }
        Model::Product(a, b) => {
            let mut c = random_coords(a, rng, spread);
            c.extend(random_coords(b, rng, spread));
            c
        }
        _ => (0..model.dim()).map(|_| uniform(rng, -spread, spread)).collect(),
    }
}

/// Chart components uniform in the cube `[-1, 1]ⁿ`, rejecting tiny vectors.
pub fn random_components<T: Real>(n: usize, rng: &mut SampleRng) -> Vec<T> {
    loop {
        let v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let nn: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if nn > 1e-3 {
            return v.into_iter().map(T::lit).collect();
        }
    }
}

/// A random unit tangent vector at `x`.
pub fn random_unit_vector<T: Real>(model: &Model<T>, x: &ChartPoint<T>, rng: &mut SampleRng) -> TangentVec<T> {
    let c = random_components::<T>(model.dim(), rng);
    let n = model.norm(&x.coords, &c);
    TangentVec { base: x.clone(), components: scale(&c, T::one() / n) }
}

/// A random unit vector at `x` g-orthogonal to `u` (which need not be unit).
pub fn random_unit_normal<T: Real>(
    model: &Model<T>,
    x: &ChartPoint<T>,
    u: &[T],
    rng: &mut SampleRng,
) -> TangentVec<T> {
    let uu = model.inner(&x.coords, u, u);
    loop {
        let mut c = random_components::<T>(model.dim(), rng);
        let proj = model.inner(&x.coords, &c, u) / uu;
        axpy(&mut c, -proj, u);
        let n = model.norm(&x.coords, &c);
        if n > T::lit(1e-3) {
            return TangentVec { base: x.clone(), components: scale(&c, T::one() / n) };
        }
    }
}
