//! Simulated vision: noisy object descriptions.

use nalgebra::{Vector2, Vector3};
use rand::Rng;
use rand_distr::{Distribution as _, Normal, Uniform};

use super::scene::{Distribution, NoiseModel};
use crate::geometry::{rotation_about, ObjectEstimate};

/// Smallest dimension vision will ever report, m.
pub const MIN_DIM: f64 = 1e-4;

fn draw<R: Rng + ?Sized>(dist: Distribution, sigma: f64, rng: &mut R) -> f64 {
    if sigma <= 0.0 {
        return 0.0;
    }
    match dist {
        Distribution::Gaussian => Normal::new(0.0, sigma).expect("finite sigma").sample(rng),
        Distribution::Uniform => {
            let h = sigma * 3f64.sqrt();
            Uniform::new_inclusive(-h, h).expect("finite bounds").sample(rng)
        }
    }
}

/// Adds the vision error model to a true center, normal and dimension pair.
///
/// The normal is tilted by a drawn angle about a uniformly random axis
/// perpendicular to it.
pub fn observe<R: Rng + ?Sized>(
    center: &Vector3<f64>,
    normal: &Vector3<f64>,
    dims: &Vector2<f64>,
    noise: &NoiseModel,
    rng: &mut R,
) -> ObjectEstimate {
    let d = noise.distribution;
    let e_x = Vector3::from_fn(|i, _| draw(d, noise.sigma_x[i], rng));
    let tilt = draw(d, noise.sigma_n, rng);
    let azimuth = rng.random_range(0.0..std::f64::consts::TAU);
    let n = normal.normalize();
    let helper = if n.x.abs() < 0.9 { Vector3::x() } else { Vector3::y() };
    let u = n.cross(&helper).normalize();
    let v = n.cross(&u);
    let axis = u * azimuth.cos() + v * azimuth.sin();
    let n_tilde = (rotation_about(&axis, tilt) * n).normalize();
    let e_d = Vector2::from_fn(|i, _| draw(d, noise.sigma_d[i], rng));
    let dims_tilde = (dims + e_d).map(|x| x.max(MIN_DIM));
    ObjectEstimate { center: center + e_x, normal: n_tilde, dims: dims_tilde }
}
