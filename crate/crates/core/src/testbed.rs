//! Benchmark signals and synthetic regression datasets.
//!
//! The four classic wavelet-benchmark signals use the standard published
//! parameterisations (Donoho and Johnstone, 1994), with no amplitude
//! rescaling. Noise is calibrated by a root signal-to-noise ratio:
//! `σ = sd(f) / rsnr`, where `sd(f)` is the population standard deviation
//! of `f` on [`SD_GRID_POINTS`] equally spaced points `i / (M − 1)`.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use crate::error::{domain, Error, Result};
use crate::locpoly::SampleSet;
use crate::rng::{GaussianStream, NOISE_STREAM};
use crate::rvdesign::DesignSpec;

pub const SD_GRID_POINTS: usize = 10_000;

const DJ_KNOTS: [f64; 11] = [0.1, 0.13, 0.15, 0.23, 0.25, 0.40, 0.44, 0.65, 0.76, 0.78, 0.81];
const BLOCKS_HEIGHTS: [f64; 11] = [4.0, -5.0, 3.0, -4.0, 5.0, -4.2, 2.1, 4.3, -3.1, 2.1, -4.2];
const BUMPS_HEIGHTS: [f64; 11] = [4.0, 5.0, 3.0, 4.0, 5.0, 4.2, 2.1, 4.3, 3.1, 5.1, 4.2];
const BUMPS_WIDTHS: [f64; 11] = [
    0.005, 0.005, 0.006, 0.01, 0.01, 0.03, 0.01, 0.01, 0.005, 0.008, 0.005,
];
const DOPPLER_EPS: f64 = 0.05;

/// Jump locations of [`TargetFunction::Heavysine`].
pub const HEAVYSINE_JUMPS: [f64; 2] = [0.3, 0.72];

#[derive(Debug, Clone, PartialEq)]
pub enum TargetFunction {
    Blocks,
    Bumps,
    Heavysine,
    Doppler,
    /// `r |x − x0|^s`.
    HolderCusp { s: f64, x0: f64, r: f64 },
    /// `Σ c_k x^k`.
    Polynomial(Vec<f64>),
    /// Piecewise-linear interpolation of `(x, y)` knots sorted by `x`,
    /// constant beyond the end knots.
    Custom(Vec<(f64, f64)>),
}

fn sgn(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

impl TargetFunction {
    pub fn cusp(s: f64, x0: f64) -> Self {
        TargetFunction::HolderCusp { s, x0, r: 1.0 }
    }

    pub fn eval(&self, x: f64) -> f64 {
        match self {
            TargetFunction::Blocks => DJ_KNOTS
                .iter()
                .zip(BLOCKS_HEIGHTS)
                .map(|(&t, h)| h * 0.5 * (1.0 + sgn(x - t)))
                .sum(),
            TargetFunction::Bumps => DJ_KNOTS
                .iter()
                .zip(BUMPS_HEIGHTS)
                .zip(BUMPS_WIDTHS)
                .map(|((&t, h), w)| h * (1.0 + (x - t).abs() / w).powi(-4))
                .sum(),
            TargetFunction::Heavysine => {
                4.0 * (4.0 * PI * x).sin() - sgn(x - HEAVYSINE_JUMPS[0]) - sgn(HEAVYSINE_JUMPS[1] - x)
            }
            TargetFunction::Doppler => {
                (x * (1.0 - x)).max(0.0).sqrt() * (2.0 * PI * (1.0 + DOPPLER_EPS) / (x + DOPPLER_EPS)).sin()
            }
            TargetFunction::HolderCusp { s, x0, r } => r * (x - x0).abs().powf(*s),
            TargetFunction::Polynomial(c) => c.iter().rev().fold(0.0, |acc, &ck| acc * x + ck),
            TargetFunction::Custom(knots) => interpolate(knots, x),
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            TargetFunction::HolderCusp { s, x0, r } => {
                if !(*s > 0.0) || !s.is_finite() || !(*r >= 0.0) || !r.is_finite() || !(0.0..=1.0).contains(x0) {
                    return Err(domain(format!("invalid cusp s = {s}, x0 = {x0}, r = {r}")));
                }
            }
            TargetFunction::Polynomial(c) => {
                if c.iter().any(|v| !v.is_finite()) {
                    return Err(domain("non-finite polynomial coefficient"));
                }
            }
            TargetFunction::Custom(knots) => {
                if knots.is_empty() {
                    return Err(domain("tabulated target needs at least one knot"));
                }
                if knots.windows(2).any(|w| !(w[0].0 <= w[1].0)) {
                    return Err(domain("tabulated target knots must be sorted by x"));
                }
            }
            _ => {}
        }
        Ok(())
    }
}

fn interpolate(knots: &[(f64, f64)], x: f64) -> f64 {
    let Some(&(x_first, y_first)) = knots.first() else {
        return 0.0;
    };
    if x <= x_first {
        return y_first;
    }
    let k = knots.partition_point(|&(kx, _)| kx <= x);
    if k == knots.len() {
        return knots[k - 1].1;
    }
    let (x0, y0) = knots[k - 1];
    let (x1, y1) = knots[k];
    y0 + (y1 - y0) * (x - x0) / (x1 - x0)
}

pub fn eval_target(t: &TargetFunction, x: f64) -> f64 {
    t.eval(x)
}

impl fmt::Display for TargetFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TargetFunction::Blocks => write!(f, "blocks"),
            TargetFunction::Bumps => write!(f, "bumps"),
            TargetFunction::Heavysine => write!(f, "heavysine"),
            TargetFunction::Doppler => write!(f, "doppler"),
            TargetFunction::HolderCusp { s, x0, r } => write!(f, "cusp:{s}:{x0}:{r}"),
            TargetFunction::Polynomial(c) => {
                let parts: Vec<String> = c.iter().map(|v| v.to_string()).collect();
                write!(f, "poly:{}", parts.join(","))
            }
            TargetFunction::Custom(knots) => write!(f, "custom({} knots)", knots.len()),
        }
    }
}

/// Accepts `blocks`, `bumps`, `heavysine`, `doppler`, `cusp[:s[:x0[:r]]]`
/// (defaults `s = 1`, `x0 = 0.5`, `r = 1`) and `poly:c0,c1,...`.
impl FromStr for TargetFunction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase();
        let mut parts = lower.splitn(2, ':');
        let name = parts.next().unwrap_or_default();
        let rest = parts.next();
        let num = |v: &str| -> Result<f64> {
            v.trim()
                .parse::<f64>()
                .map_err(|_| domain(format!("bad number {v:?} in target {s:?}")))
        };
        let target = match (name, rest) {
            ("blocks", None) => TargetFunction::Blocks,
            ("bumps", None) => TargetFunction::Bumps,
            ("heavysine", None) => TargetFunction::Heavysine,
            ("doppler", None) => TargetFunction::Doppler,
            ("cusp", rest) => {
                let vals = rest
                    .map(|r| r.split(':').map(num).collect::<Result<Vec<_>>>())
                    .transpose()?
                    .unwrap_or_default();
                if vals.len() > 3 {
                    return Err(domain(format!("too many cusp parameters in {s:?}")));
                }
                TargetFunction::HolderCusp {
                    s: vals.first().copied().unwrap_or(1.0),
                    x0: vals.get(1).copied().unwrap_or(0.5),
                    r: vals.get(2).copied().unwrap_or(1.0),
                }
            }
            ("poly", Some(rest)) => TargetFunction::Polynomial(rest.split(',').map(num).collect::<Result<_>>()?),
            _ => return Err(domain(format!("unknown target {s:?}"))),
        };
        target.validate()?;
        Ok(target)
    }
}

/// Checks `|f(x) − f(x0)| ≤ ω(|x − x0|)` on `points` equally spaced points of
/// `[0, 1]`, i.e. membership of the constant-approximation Hölder ball.
pub fn satisfies_modulus(f: &TargetFunction, x0: f64, omega: impl Fn(f64) -> f64, points: usize) -> bool {
    let f0 = f.eval(x0);
    (0..points).all(|i| {
        let x = i as f64 / (points - 1).max(1) as f64;
        let dev = (f.eval(x) - f0).abs();
        dev <= omega((x - x0).abs()) * (1.0 + 1e-12) + 1e-15
    })
}

/// Population standard deviation of `f` on `i / (M − 1)`, `M = SD_GRID_POINTS`.
pub fn sd_grid(f: &TargetFunction) -> f64 {
    let m = SD_GRID_POINTS;
    let vals: Vec<f64> = (0..m).map(|i| f.eval(i as f64 / (m - 1) as f64)).collect();
    let mean = vals.iter().sum::<f64>() / m as f64;
    (vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / m as f64).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoiseLevel {
    /// `σ = sd_grid(f) / rsnr`; `f64::INFINITY` gives noiseless data.
    Rsnr(f64),
    Sigma(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSpec {
    pub target: TargetFunction,
    pub design: DesignSpec,
    pub n: usize,
    pub noise: NoiseLevel,
    pub seed: u64,
}

impl DatasetSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::Precondition(format!("a dataset needs n >= 2, got {}", self.n)));
        }
        match self.noise {
            NoiseLevel::Rsnr(r) if !(r > 0.0) => return Err(domain(format!("rsnr must be positive, got {r}"))),
            NoiseLevel::Sigma(s) if !(s >= 0.0) || !s.is_finite() => {
                return Err(domain(format!("sigma must be finite and nonnegative, got {s}")))
            }
            _ => {}
        }
        self.target.validate()
    }

    /// Noise standard deviation implied by the spec.
    pub fn sigma(&self) -> f64 {
        match self.noise {
            NoiseLevel::Sigma(s) => s,
            NoiseLevel::Rsnr(r) if r.is_infinite() => 0.0,
            NoiseLevel::Rsnr(r) => sd_grid(&self.target) / r,
        }
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self { seed, ..self.clone() }
    }
}

/// A synthesized sample and the noise level used to draw it.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub samples: SampleSet,
    pub sigma: f64,
}

/// Draws `X` from the design (stream 0), sorts it, and adds `σ ξ_i` with
/// `ξ_i` standard Gaussians from stream 1 in sorted-design order.
pub fn synthesize(spec: &DatasetSpec) -> Result<Dataset> {
    spec.validate()?;
    let sigma = spec.sigma();
    let xs = spec.design.sample(spec.n, spec.seed);
    let mut noise = GaussianStream::new(spec.seed, NOISE_STREAM);
    let ys = xs
        .iter()
        .map(|&x| {
            let f = spec.target.eval(x);
            if sigma > 0.0 {
                f + sigma * noise.next_standard()
            } else {
                f
            }
        })
        .collect();
    Ok(Dataset {
        samples: SampleSet::new(xs, ys, Some(spec.seed))?,
        sigma,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_targets() {
        assert_eq!("heavysine".parse::<TargetFunction>().unwrap(), TargetFunction::Heavysine);
        assert_eq!("Blocks".parse::<TargetFunction>().unwrap(), TargetFunction::Blocks);
        assert_eq!(
            "cusp:2:0.3".parse::<TargetFunction>().unwrap(),
            TargetFunction::HolderCusp { s: 2.0, x0: 0.3, r: 1.0 }
        );
        assert_eq!(
            "poly:1,0,2".parse::<TargetFunction>().unwrap(),
            TargetFunction::Polynomial(vec![1.0, 0.0, 2.0])
        );
        assert!("sine".parse::<TargetFunction>().is_err());
        assert!("cusp:-1".parse::<TargetFunction>().is_err());
    }

    #[test]
    fn display_round_trips() {
        for t in ["blocks", "bumps", "heavysine", "doppler", "cusp:1.5:0.2:3", "poly:1,-2.5"] {
            let parsed: TargetFunction = t.parse().unwrap();
            assert_eq!(parsed.to_string().parse::<TargetFunction>().unwrap(), parsed);
        }
    }

    #[test]
    fn polynomial_and_cusp() {
        let p = TargetFunction::Polynomial(vec![1.0, -2.0, 3.0]);
        assert_eq!(p.eval(2.0), 1.0 - 4.0 + 12.0);
        assert_eq!(TargetFunction::cusp(1.0, 0.4).eval(0.4), 0.0);
        assert!((TargetFunction::cusp(0.5, 0.0).eval(0.25) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn custom_interpolates() {
        let t = TargetFunction::Custom(vec![(0.0, 0.0), (0.5, 1.0), (1.0, 3.0)]);
        assert_eq!(t.eval(0.25), 0.5);
        assert_eq!(t.eval(0.75), 2.0);
        assert_eq!(t.eval(-1.0), 0.0);
        assert_eq!(t.eval(2.0), 3.0);
    }

    #[test]
    fn constant_target_is_noiseless() {
        let spec = DatasetSpec {
            target: TargetFunction::Polynomial(vec![2.5]),
            design: DesignSpec::uniform(0.5).unwrap(),
            n: 50,
            noise: NoiseLevel::Rsnr(7.0),
            seed: 3,
        };
        let ds = synthesize(&spec).unwrap();
        assert_eq!(ds.sigma, 0.0);
        assert!(ds.samples.ys().iter().all(|&y| y == 2.5));
    }

    #[test]
    fn rejects_bad_specs() {
        let mut spec = DatasetSpec {
            target: TargetFunction::Heavysine,
            design: DesignSpec::uniform(0.5).unwrap(),
            n: 1,
            noise: NoiseLevel::Rsnr(7.0),
            seed: 3,
        };
        assert!(synthesize(&spec).is_err());
        spec.n = 10;
        spec.noise = NoiseLevel::Rsnr(0.0);
        assert!(synthesize(&spec).is_err());
    }
}
