//! Seeded generators of random zero-trace nodal functions.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::mesh::DomainMesh;

pub type LabRng = ChaCha8Rng;

pub fn seeded(seed: u64) -> LabRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Uniform noise in `[-amplitude, amplitude]` smoothed once by the `(1/4, 1/2, 1/4)`
/// kernel along every axis, with the boundary zeroed.
pub fn smoothed_noise(mesh: &DomainMesh, rng: &mut LabRng, amplitude: f64) -> Vec<f64> {
    let mut u: Vec<f64> = (0..mesh.len()).map(|_| rng.random_range(-amplitude..=amplitude)).collect();
    let nx = mesh.nodes_per_axis()[0];
    for axis in 0..mesh.dim() {
        let n_axis = mesh.nodes_per_axis()[axis];
        let stride = if axis == 0 { 1 } else { nx };
        let src = u.clone();
        for (k, v) in u.iter_mut().enumerate() {
            let pos = if axis == 0 { k % nx } else { k / nx };
            let lo = if pos > 0 { src[k - stride] } else { src[k] };
            let hi = if pos + 1 < n_axis { src[k + stride] } else { src[k] };
            *v = 0.25 * lo + 0.5 * src[k] + 0.25 * hi;
        }
    }
    for (k, v) in u.iter_mut().enumerate() {
        if mesh.is_boundary(k) {
            *v = 0.0;
        }
    }
    u
}

/// Random combination of the lowest `modes` sine modes per axis; resolution independent.
pub fn low_mode_field(mesh: &DomainMesh, rng: &mut LabRng, modes: usize) -> Vec<f64> {
    let dim = mesh.dim();
    let ivs = mesh.intervals().to_vec();
    let mut terms = Vec::new();
    let ny = if dim == 2 { modes } else { 1 };
    for i in 1..=modes {
        for j in 1..=ny {
            let c: f64 = rng.random_range(-1.0..=1.0) / (i * j) as f64;
            terms.push((i as f64, j as f64, c));
        }
    }
    let mut u = mesh.sample(|x| {
        let s0 = (x[0] - ivs[0].lo) / ivs[0].len() * std::f64::consts::PI;
        let s1 = if dim == 2 { (x[1] - ivs[1].lo) / ivs[1].len() * std::f64::consts::PI } else { 0.0 };
        terms.iter().map(|&(i, j, c)| c * (i * s0).sin() * if dim == 2 { (j * s1).sin() } else { 1.0 }).sum()
    });
    for (k, v) in u.iter_mut().enumerate() {
        if mesh.is_boundary(k) {
            *v = 0.0;
        }
    }
    u
}
