//! Seeded random streams and a few geometric samplers.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

#[allow(unused_imports)]
use num_traits::Float;

use crate::linalg::{Matrix, Vector};
use crate::polytope::HPolytope;

pub type StreamRng = ChaCha8Rng;

/// Independent stream `stream` of the master seed. Streams never overlap,
/// so per-chain results do not depend on scheduling.
pub fn stream_rng(seed: u64, stream: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Stream keyed by a name (FNV-1a hash), for pipeline stages.
pub fn named_rng(seed: u64, name: &str) -> StreamRng {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for byte in name.bytes() {
        hash ^= u64::from(byte);
        hash = hash.wrapping_mul(0x0100_0000_01b3);
    }
    stream_rng(seed, hash)
}

pub fn standard_normal<R: Rng + ?Sized>(k: usize, rng: &mut R) -> Vector {
    Vector::from_iterator(k, (0..k).map(|_| rng.sample::<f64, _>(StandardNormal)))
}

/// Uniform direction on the unit sphere (normalized Gaussian).
pub fn sample_sphere<R: Rng + ?Sized>(k: usize, rng: &mut R) -> Vector {
    loop {
        let g = standard_normal(k, rng);
        let n = g.norm();
        if n > 1e-300 {
            return g / n;
        }
    }
}

/// Uniform point in the ball of the given radius.
pub fn sample_ball<R: Rng + ?Sized>(k: usize, radius: f64, rng: &mut R) -> Vector {
    let s = sample_sphere(k, rng);
    let u: f64 = rng.random();
    s * (radius * u.powf(1.0 / k as f64))
}

/// Random bounded polytope containing the unit ball around the origin:
/// `m` random unit-normal halfspaces at distances in `[1, 3)`, intersected
/// with the box `[-4, 4]^k`.
pub fn random_polytope<R: Rng + ?Sized>(k: usize, m: usize, rng: &mut R) -> HPolytope {
    let mut a = Matrix::zeros(m + 2 * k, k);
    let mut b = Vector::zeros(m + 2 * k);
    for i in 0..m {
        let n = sample_sphere(k, rng);
        a.row_mut(i).copy_from(&n.transpose());
        b[i] = 1.0 + 2.0 * rng.random::<f64>();
    }
    for j in 0..k {
        a[(m + 2 * j, j)] = 1.0;
        a[(m + 2 * j + 1, j)] = -1.0;
        b[m + 2 * j] = 4.0;
        b[m + 2 * j + 1] = 4.0;
    }
    HPolytope::new(a, b).expect("random polytope rows are unit vectors")
}
