//! Seeded random streams.
//!
//! Every random quantity in the crate is drawn from ChaCha8 (`rand_chacha`
//! 0.9) seeded with the user seed, with a fixed stream id per component, so an
//! instance is fully determined by its seed regardless of the order in which
//! components are generated.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Stream ids. Changing any of these changes every generated instance.
pub mod streams {
    pub const POWER_ITERATION: u64 = 0;
    pub const MATRIX: u64 = 1;
    pub const NOISE: u64 = 2;
    pub const GEOMETRY: u64 = 3;
    pub const PHANTOM: u64 = 4;
    pub const PROBE: u64 = 5;
}

pub fn stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub fn gaussian_vector<R: Rng>(rng: &mut R, n: usize, std_dev: f64) -> DVector<f64> {
    DVector::from_iterator(n, (0..n).map(|_| std_dev * rng.sample::<f64, _>(StandardNormal)))
}

/// Matrix with i.i.d. standard normal entries, filled in row-major order.
pub fn gaussian_matrix<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> DMatrix<f64> {
    let data: Vec<f64> = (0..rows * cols)
        .map(|_| rng.sample::<f64, _>(StandardNormal))
        .collect();
    DMatrix::from_row_slice(rows, cols, &data)
}
