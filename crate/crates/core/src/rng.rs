//! Seeded random streams.
//!
//! Every replication `r` of a seeded experiment draws from ChaCha8 stream `r`
//! of the master seed, so results do not depend on how work is scheduled.

use faer::Mat;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// `rows x cols` matrix of i.i.d. `N(0, sd^2)` entries, filled column by column.
pub fn gaussian_matrix(rows: usize, cols: usize, sd: f64, rng: &mut ChaCha8Rng) -> Mat<f64> {
    let mut m = Mat::<f64>::zeros(rows, cols);
    for j in 0..cols {
        for i in 0..rows {
            let z: f64 = StandardNormal.sample(rng);
            m[(i, j)] = sd * z;
        }
    }
    m
}
