//! Seeded uniform and Gaussian streams.
//!
//! Both streams sit on ChaCha8, a counter-based generator, so a stream is a
//! pure function of `(seed, stream id)`. Uniforms are built from the top 53
//! bits of each 64-bit word, offset by half an ulp so they never hit 0 or 1.
//! Gaussians use the basic Box–Muller transform on consecutive uniform pairs
//! and emit both the cosine and the sine variate.

use rand::RngCore;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const DESIGN_STREAM: u64 = 0;
pub const NOISE_STREAM: u64 = 1;

const TWO_POW_MINUS_53: f64 = 1.0 / 9_007_199_254_740_992.0;

#[derive(Clone, Debug)]
pub struct UniformStream {
    rng: ChaCha8Rng,
}

impl UniformStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Self { rng }
    }

    /// Next uniform variate in the open interval (0, 1).
    pub fn next_open01(&mut self) -> f64 {
        ((self.rng.next_u64() >> 11) as f64 + 0.5) * TWO_POW_MINUS_53
    }
}

#[derive(Clone, Debug)]
pub struct GaussianStream {
    uniforms: UniformStream,
    spare: Option<f64>,
}

impl GaussianStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        Self {
            uniforms: UniformStream::new(seed, stream),
            spare: None,
        }
    }

    pub fn next_standard(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        let u1 = self.uniforms.next_open01();
        let u2 = self.uniforms.next_open01();
        let radius = (-2.0 * u1.ln()).sqrt();
        let angle = std::f64::consts::TAU * u2;
        self.spare = Some(radius * angle.sin());
        radius * angle.cos()
    }
}
