//! Seeded random matrix/vector generation. Used by the `project-check`
//! command and by the test suites; everything is deterministic given a seed.

use crate::linalg::matrix::{Dense, Sparse};
use crate::scalar::{cast, C, Real};
use rand::RngCore;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Deterministic random stream.
pub struct Rng64 {
    inner: ChaCha8Rng,
    spare: Option<f64>,
}

impl Rng64 {
    pub fn seeded(seed: u64) -> Self {
        Rng64 {
            inner: ChaCha8Rng::seed_from_u64(seed),
            spare: None,
        }
    }

    /// Uniform in [0, 1).
    pub fn uniform(&mut self) -> f64 {
        (self.inner.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn below(&mut self, n: usize) -> usize {
        (self.uniform() * n as f64) as usize % n.max(1)
    }

    /// Standard normal via Box-Muller.
    pub fn normal(&mut self) -> f64 {
        if let Some(s) = self.spare.take() {
            return s;
        }
        let u1 = loop {
            let u = self.uniform();
            if u > 0.0 {
                break u;
            }
        };
        let u2 = self.uniform();
        let r = (-2.0 * u1.ln()).sqrt();
        let th = 2.0 * std::f64::consts::PI * u2;
        self.spare = Some(r * th.sin());
        r * th.cos()
    }

    pub fn normal_t<T: Real>(&mut self) -> T {
        cast(self.normal())
    }

    pub fn cnormal<T: Real>(&mut self) -> C<T> {
        C::new(cast(self.normal()), cast(self.normal()))
    }
}

pub fn cvec<T: Real>(n: usize, rng: &mut Rng64) -> Vec<C<T>> {
    (0..n).map(|_| rng.cnormal()).collect()
}

pub fn unit_cvec<T: Real>(n: usize, rng: &mut Rng64) -> Vec<C<T>> {
    let v = cvec::<T>(n, rng);
    crate::linalg::matrix::vnormalize(&v).expect("nonzero random vector")
}

pub fn dense_complex<T: Real>(nrows: usize, ncols: usize, rng: &mut Rng64) -> Dense<T> {
    let mut m = Dense::zeros(nrows, ncols);
    for i in 0..nrows {
        for j in 0..ncols {
            m[(i, j)] = rng.cnormal();
        }
    }
    m
}

pub fn dense_real<T: Real>(nrows: usize, ncols: usize, rng: &mut Rng64) -> Dense<T> {
    let mut m = Dense::zeros(nrows, ncols);
    for i in 0..nrows {
        for j in 0..ncols {
            m[(i, j)] = C::new(rng.normal_t(), T::zero());
        }
    }
    m
}

/// Random real sparse matrix with approximately `density * n * n` entries.
/// The pattern is drawn without duplicates.
pub fn sparse_real<T: Real>(n: usize, density: f64, rng: &mut Rng64) -> Sparse<T> {
    let mut entries = Vec::new();
    for i in 0..n {
        for j in 0..n {
            if rng.uniform() < density {
                entries.push((i, j, C::new(rng.normal_t::<T>(), T::zero())));
            }
        }
    }
    if entries.is_empty() {
        entries.push((0, 0, C::new(rng.normal_t::<T>(), T::zero())));
    }
    Sparse::from_triplets(n, n, entries).expect("generated pattern is valid")
}

/// Random sparsity pattern with exactly `k` distinct positions.
pub fn pattern(n: usize, k: usize, rng: &mut Rng64) -> Vec<(usize, usize)> {
    let mut set = std::collections::BTreeSet::new();
    while set.len() < k.min(n * n) {
        set.insert((rng.below(n), rng.below(n)));
    }
    set.into_iter().collect()
}
