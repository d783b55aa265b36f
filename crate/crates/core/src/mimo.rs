//! Rayleigh MIMO channels and Monte-Carlo ergodic rates.
//!
//! Sampling is split into fixed-size chunks. Chunk `i` draws from a ChaCha8
//! stream seeded with the configuration seed and positioned on stream `i`,
//! and chunk statistics are merged in chunk order, so results are identical
//! for any thread count.

use num_complex::Complex64;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::hermitian::HermitianMatrix;

/// One draw of an `n_rx x n_tx` channel with i.i.d. CN(0, 1) entries.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSample {
    n_rx: usize,
    n_tx: usize,
    entries: Vec<Complex64>,
}

impl ChannelSample {
    pub fn zeros(n_rx: usize, n_tx: usize) -> Self {
        Self { n_rx, n_tx, entries: vec![Complex64::new(0.0, 0.0); n_rx * n_tx] }
    }

    pub fn from_entries(n_rx: usize, n_tx: usize, entries: Vec<Complex64>) -> Result<Self> {
        if n_rx == 0 || n_tx == 0 {
            return Err(invalid("channel", "dimensions must be positive"));
        }
        if entries.len() != n_rx * n_tx {
            return Err(invalid("channel", format!("{} entries for {n_rx}x{n_tx}", entries.len())));
        }
        Ok(Self { n_rx, n_tx, entries })
    }

    pub fn n_rx(&self) -> usize {
        self.n_rx
    }

    pub fn n_tx(&self) -> usize {
        self.n_tx
    }

    /// Row-major entries, `entries()[i * n_tx + j]` is the gain from
    /// transmit antenna `j` to receive antenna `i`.
    pub fn entries(&self) -> &[Complex64] {
        &self.entries
    }

    /// Redraw every entry in place.
    pub fn resample<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        for e in &mut self.entries {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            *e = Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2;
        }
    }

    /// Accumulate `scale * H H^H` into an `n_rx x n_rx` matrix.
    pub(crate) fn accumulate_outer(&self, scale: f64, into: &mut HermitianMatrix) {
        into.add_outer(scale, &self.entries, self.n_tx);
    }
}

pub fn sample_channel<R: Rng + ?Sized>(n_rx: usize, n_tx: usize, rng: &mut R) -> ChannelSample {
    let mut h = ChannelSample::zeros(n_rx, n_tx);
    h.resample(rng);
    h
}

/// Reusable buffers for repeated log-det evaluations of one channel shape.
#[derive(Debug, Clone)]
pub(crate) struct RateWorkspace {
    matrix: HermitianMatrix,
    scratch: Vec<Complex64>,
}

impl RateWorkspace {
    pub(crate) fn new(dim: usize) -> Self {
        Self { matrix: HermitianMatrix::identity(dim), scratch: Vec::with_capacity(dim * dim) }
    }

    /// `log2 det(I + (gamma / n_tx) H H^H)`, evaluated on the smaller of the
    /// two equivalent Gram matrices.
    pub(crate) fn rate(&mut self, h: &ChannelSample, gamma: f64) -> Result<f64> {
        if gamma == 0.0 {
            return Ok(0.0);
        }
        let scale = gamma / h.n_tx as f64;
        let dim = h.n_rx.min(h.n_tx);
        if self.matrix.dim() != dim {
            self.matrix = HermitianMatrix::identity(dim);
        } else {
            self.matrix.reset_identity();
        }
        if h.n_rx <= h.n_tx {
            self.matrix.add_outer(scale, &h.entries, h.n_tx);
        } else {
            self.matrix.add_gram(scale, &h.entries, h.n_rx);
        }
        self.matrix.log2_det_with(&mut self.scratch)
    }

    /// `log2 det(I + sum_k s_k H_k H_k^H)` for channels sharing `n_rx`.
    pub(crate) fn joint_rate(&mut self, terms: &[(f64, &ChannelSample)]) -> Result<f64> {
        let n_rx = terms.first().map(|(_, h)| h.n_rx).unwrap_or(0);
        if self.matrix.dim() != n_rx {
            self.matrix = HermitianMatrix::identity(n_rx);
        } else {
            self.matrix.reset_identity();
        }
        for (s, h) in terms {
            debug_assert_eq!(h.n_rx, n_rx);
            if *s != 0.0 {
                h.accumulate_outer(*s, &mut self.matrix);
            }
        }
        self.matrix.log2_det_with(&mut self.scratch)
    }
}

/// `log2 det(I + (gamma / n_tx) H H^H)` in bits per channel use.
pub fn instantaneous_rate(h: &ChannelSample, gamma_sinr: f64) -> Result<f64> {
    if !(gamma_sinr.is_finite() && gamma_sinr >= 0.0) {
        return Err(invalid("gamma_sinr", format!("{gamma_sinr} must be finite and >= 0")));
    }
    RateWorkspace::new(h.n_rx.min(h.n_tx)).rate(h, gamma_sinr)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct McConfig {
    pub n_samples: u64,
    pub seed: u64,
    pub chunk_size: u64,
}

impl McConfig {
    pub const DEFAULT_CHUNK: u64 = 4096;

    pub fn new(n_samples: u64, seed: u64, chunk_size: u64) -> Result<Self> {
        if n_samples == 0 {
            return Err(invalid("n_samples", "must be at least 1"));
        }
        if chunk_size == 0 {
            return Err(invalid("chunk_size", "must be at least 1"));
        }
        Ok(Self { n_samples, seed, chunk_size })
    }

    pub fn with_samples(self, n_samples: u64) -> Result<Self> {
        Self::new(n_samples, self.seed, self.chunk_size)
    }

    /// Configuration for an independent random stream identified by `tag`.
    pub fn stream(&self, tag: u64) -> Self {
        Self { seed: mix_seed(self.seed, tag), ..*self }
    }

    fn n_chunks(&self) -> u64 {
        self.n_samples.div_ceil(self.chunk_size)
    }
}

impl Default for McConfig {
    fn default() -> Self {
        Self { n_samples: 20_000, seed: 0, chunk_size: Self::DEFAULT_CHUNK }
    }
}

/// SplitMix64 finalizer applied to `seed ^ tag * phi`.
pub fn mix_seed(seed: u64, tag: u64) -> u64 {
    let mut z = seed ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Monte-Carlo estimate of an average rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateEstimate {
    pub mean_rate: f64,
    pub std_err: f64,
    pub n_samples: u64,
}

impl RateEstimate {
    pub fn zero(n_samples: u64) -> Self {
        Self { mean_rate: 0.0, std_err: 0.0, n_samples }
    }

    /// Scale by a nonnegative time-sharing fraction.
    pub fn scaled(self, factor: f64) -> Self {
        Self { mean_rate: self.mean_rate * factor, std_err: self.std_err * factor, n_samples: self.n_samples }
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct Moments {
    n: u64,
    mean: f64,
    m2: f64,
}

impl Moments {
    fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    fn merge(self, other: Moments) -> Moments {
        if self.n == 0 {
            return other;
        }
        if other.n == 0 {
            return self;
        }
        let n = self.n + other.n;
        let d = other.mean - self.mean;
        let mean = self.mean + d * other.n as f64 / n as f64;
        let m2 = self.m2 + other.m2 + d * d * (self.n as f64 * other.n as f64) / n as f64;
        Moments { n, mean, m2 }
    }

    fn estimate(self) -> RateEstimate {
        let std_err =
            if self.n > 1 { (self.m2.max(0.0) / (self.n - 1) as f64).sqrt() / (self.n as f64).sqrt() } else { 0.0 };
        RateEstimate { mean_rate: self.mean, std_err, n_samples: self.n }
    }
}

/// Chunked, order-reduced Monte-Carlo estimation of `n_out` jointly sampled
/// quantities.
///
/// For every chunk one RNG per entry of `seeds` is created, positioned on the
/// chunk's stream. `draw` fills one value per output for each sample.
pub(crate) fn estimate_joint<S, I, F>(
    cfg: &McConfig,
    seeds: &[u64],
    n_out: usize,
    init: I,
    draw: F,
) -> Result<Vec<RateEstimate>>
where
    I: Fn() -> S + Sync,
    F: Fn(&mut S, &mut [ChaCha8Rng], &mut [f64]) -> Result<()> + Sync,
{
    let chunks: Vec<Vec<Moments>> = (0..cfg.n_chunks())
        .into_par_iter()
        .map(|chunk| {
            let mut rngs: Vec<ChaCha8Rng> = seeds
                .iter()
                .map(|&s| {
                    let mut r = ChaCha8Rng::seed_from_u64(s);
                    r.set_stream(chunk);
                    r
                })
                .collect();
            let start = chunk * cfg.chunk_size;
            let len = cfg.chunk_size.min(cfg.n_samples - start);
            let mut state = init();
            let mut out = vec![0.0; n_out];
            let mut moments = vec![Moments::default(); n_out];
            for _ in 0..len {
                draw(&mut state, &mut rngs, &mut out)?;
                for (m, &x) in moments.iter_mut().zip(&out) {
                    m.push(x);
                }
            }
            Ok(moments)
        })
        .collect::<Result<_>>()?;

    let mut total = vec![Moments::default(); n_out];
    for chunk in chunks {
        for (t, c) in total.iter_mut().zip(chunk) {
            *t = t.merge(c);
        }
    }
    Ok(total.into_iter().map(Moments::estimate).collect())
}

/// Ergodic rate `E[log2 det(I + (gamma / n_tx) H H^H)]` over Rayleigh fading.
pub fn ergodic_rate(n_rx: usize, n_tx: usize, gamma_sinr: f64, cfg: &McConfig) -> Result<RateEstimate> {
    if n_rx == 0 || n_tx == 0 {
        return Err(invalid("antennas", "channel dimensions must be positive"));
    }
    if !(gamma_sinr.is_finite() && gamma_sinr >= 0.0) {
        return Err(invalid("gamma_sinr", format!("{gamma_sinr} must be finite and >= 0")));
    }
    if gamma_sinr == 0.0 {
        return Ok(RateEstimate::zero(cfg.n_samples));
    }
    let est = estimate_joint(
        cfg,
        &[cfg.seed],
        1,
        || (ChannelSample::zeros(n_rx, n_tx), RateWorkspace::new(n_rx.min(n_tx))),
        |(h, ws), rngs, out| {
            h.resample(&mut rngs[0]);
            out[0] = ws.rate(h, gamma_sinr)?;
            Ok(())
        },
    )?;
    Ok(est[0])
}

/// Ergodic rates of one link at several SINRs, all from the same channel draws.
pub fn ergodic_rate_curve(n_rx: usize, n_tx: usize, gammas: &[f64], cfg: &McConfig) -> Result<Vec<RateEstimate>> {
    if n_rx == 0 || n_tx == 0 {
        return Err(invalid("antennas", "channel dimensions must be positive"));
    }
    if let Some(g) = gammas.iter().find(|g| !(g.is_finite() && **g >= 0.0)) {
        return Err(invalid("gamma_sinr", format!("{g} must be finite and >= 0")));
    }
    estimate_joint(
        cfg,
        &[cfg.seed],
        gammas.len(),
        || (ChannelSample::zeros(n_rx, n_tx), RateWorkspace::new(n_rx.min(n_tx))),
        |(h, ws), rngs, out| {
            h.resample(&mut rngs[0]);
            for (o, &g) in out.iter_mut().zip(gammas) {
                *o = ws.rate(h, g)?;
            }
            Ok(())
        },
    )
}
