//! Reproducible random streams.
//!
//! Every stochastic input is drawn from an [`RngStream`] keyed by a master
//! seed and a stream id. The generator is ChaCha8 with its 64-bit stream
//! selector set to the id, so replicate `r` owns stream `r` no matter which
//! worker runs it.

use rand::seq::index;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{ChiSquared, Distribution, Exp1, StandardNormal};

use crate::error::{Error, Result};

pub const DEFAULT_SEED: u64 = 20_200_301;

#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    stream_id: u64,
    rng: ChaCha8Rng,
}

pub(crate) fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream_id);
        Self {
            seed,
            stream_id,
            rng,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// A child stream with the same id under a key derived from `(seed, tag)`.
    /// Does not advance `self`.
    pub fn derive(&self, tag: u64) -> RngStream {
        RngStream::new(splitmix64(self.seed ^ splitmix64(tag)), self.stream_id)
    }

    /// `n` draws from N(mu, sigma); `sigma` is a standard deviation.
    pub fn normal(&mut self, mu: f64, sigma: f64, n: usize) -> Result<Vec<f64>> {
        if !(sigma >= 0.0) || !mu.is_finite() || !sigma.is_finite() {
            return Err(Error::Parameter(format!("normal({mu}, {sigma})")));
        }
        Ok((0..n)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut self.rng);
                mu + sigma * z
            })
            .collect())
    }

    pub fn chisq(&mut self, df: usize, n: usize) -> Result<Vec<f64>> {
        if df < 1 {
            return Err(Error::Parameter("chi-square needs df ≥ 1".into()));
        }
        let dist = ChiSquared::new(df as f64).map_err(|e| Error::Parameter(e.to_string()))?;
        Ok((0..n).map(|_| dist.sample(&mut self.rng)).collect())
    }

    /// Unit exponential shifted by `−ln 2`: median 0, mean `1 − ln 2`, variance 1.
    pub fn exp_median_zero(&mut self, n: usize) -> Vec<f64> {
        (0..n)
            .map(|_| {
                let e: f64 = Exp1.sample(&mut self.rng);
                e - std::f64::consts::LN_2
            })
            .collect()
    }

    /// Two N(0, sd) columns with population correlation `r`, built as
    /// `z = r·x + √(1 − r²)·w`.
    pub fn bivariate_correlated(
        &mut self,
        sd: f64,
        r: f64,
        n: usize,
    ) -> Result<(Vec<f64>, Vec<f64>)> {
        if !(r.abs() < 1.0) {
            return Err(Error::Parameter(format!("correlation {r} outside (−1, 1)")));
        }
        if !(sd > 0.0) {
            return Err(Error::Parameter(format!("standard deviation {sd} must be > 0")));
        }
        let x = self.normal(0.0, sd, n)?;
        let w = self.normal(0.0, sd, n)?;
        let k = (1.0 - r * r).sqrt();
        let z = x.iter().zip(&w).map(|(a, b)| r * a + k * b).collect();
        Ok((x, z))
    }

    /// A uniformly random set of `round(fraction·n)` row indices, ascending.
    pub fn contamination_mask(&mut self, n: usize, fraction: f64) -> Result<Vec<usize>> {
        self.contamination_mask_excluding(n, fraction, &[])
    }

    /// As [`contamination_mask`](Self::contamination_mask) but never picks an
    /// index in `excluded`, so sequential masks can be made disjoint.
    pub fn contamination_mask_excluding(
        &mut self,
        n: usize,
        fraction: f64,
        excluded: &[usize],
    ) -> Result<Vec<usize>> {
        let m = mask_size(n, fraction)?;
        let mut taken = vec![false; n];
        for &i in excluded {
            if i < n {
                taken[i] = true;
            }
        }
        let pool: Vec<usize> = (0..n).filter(|&i| !taken[i]).collect();
        if m > pool.len() {
            return Err(Error::Parameter(format!(
                "cannot draw {m} rows from {} remaining",
                pool.len()
            )));
        }
        let mut out: Vec<usize> = index::sample(&mut self.rng, pool.len(), m)
            .into_iter()
            .map(|k| pool[k])
            .collect();
        out.sort_unstable();
        Ok(out)
    }

    /// Uniform index in `0..upper`.
    pub fn index(&mut self, upper: usize) -> usize {
        self.rng.random_range(0..upper)
    }

    /// `k` distinct indices from `0..n` in draw order.
    pub fn distinct_indices(&mut self, n: usize, k: usize) -> Vec<usize> {
        index::sample(&mut self.rng, n, k).into_vec()
    }
}

/// Contaminated-row count: `fraction·n` rounded to nearest, ties up. Must stay
/// below half the sample.
pub fn mask_size(n: usize, fraction: f64) -> Result<usize> {
    if !(0.0..0.5).contains(&fraction) {
        return Err(Error::Parameter(format!(
            "contamination fraction {fraction} must lie in [0, 0.5)"
        )));
    }
    let m = (fraction * n as f64 + 0.5).floor() as usize;
    if m > 0 && 2 * m >= n {
        return Err(Error::Parameter(format!(
            "{m} contaminated rows of {n} is not a minority"
        )));
    }
    Ok(m)
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.rng.fill_bytes(dst)
    }
}
