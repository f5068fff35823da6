//! Regularly varying design densities, smoothness moduli and the
//! deterministic rate evaluators built from them.
//!
//! A design is described through `ν`, the profile of the density around the
//! estimation point: `μ(x) = ν(|x − x0|) / Z` on `[0, 1]`. Everything the
//! estimators need (sampling, expected window counts, balance equations)
//! goes through `F_ν(h) = ∫₀ʰ ν(t) dt`, which is available in closed form
//! for every supported family, so the density itself is never integrated
//! numerically and poles at `x0` are harmless.
//!
//! Families:
//!
//! * `Uniform`: `ν ≡ 1`, `F_ν(h) = h`.
//! * `PowerLaw`: `μ(x) = (β+1)/(x0^{β+1} + (1−x0)^{β+1}) · |x − x0|^β`,
//!   so `F_ν(h) = h^{β+1} / (x0^{β+1} + (1−x0)^{β+1})` and `Z = 1`.
//! * `PowerLogLaw(α)`: `F_ν(h) = h^{β+1} (log 1/h)^α` as given, with `Z`
//!   normalising the induced density on `[0, 1]`.

use crate::error::{domain, Error, Result};
use crate::linalg::{smallest_eigenvalue, Matrix, MAX_DEGREE};
use crate::rng::{UniformStream, DESIGN_STREAM};

/// Lower end of every bisection bracket.
pub const BRACKET_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DesignKind {
    Uniform,
    PowerLaw,
    PowerLogLaw { alpha: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DesignSpec {
    pub x0: f64,
    pub beta: f64,
    pub kind: DesignKind,
}

impl DesignSpec {
    pub fn uniform(x0: f64) -> Result<Self> {
        Self::new(x0, 0.0, DesignKind::Uniform)
    }

    pub fn power_law(x0: f64, beta: f64) -> Result<Self> {
        Self::new(x0, beta, DesignKind::PowerLaw)
    }

    pub fn power_log_law(x0: f64, beta: f64, alpha: f64) -> Result<Self> {
        Self::new(x0, beta, DesignKind::PowerLogLaw { alpha })
    }

    pub fn new(x0: f64, beta: f64, kind: DesignKind) -> Result<Self> {
        if !(0.0..=1.0).contains(&x0) {
            return Err(domain(format!("design point x0 = {x0} outside [0, 1]")));
        }
        if !(beta > -1.0) || !beta.is_finite() {
            return Err(domain(format!("regular-variation index beta = {beta} must exceed -1")));
        }
        let spec = Self { x0, beta, kind };
        match kind {
            DesignKind::Uniform if beta != 0.0 => {
                return Err(domain("uniform design has index beta = 0"));
            }
            DesignKind::PowerLogLaw { alpha } => {
                if !alpha.is_finite() {
                    return Err(domain("log exponent alpha must be finite"));
                }
                // the induced density needs F_ν increasing on the whole reach
                let reach = x0.max(1.0 - x0);
                if reach > spec.monotone_limit() || (alpha < 0.0 && reach >= 1.0) {
                    return Err(domain(format!(
                        "F_nu is not increasing on [0, {reach}] for alpha = {alpha}, beta = {beta}"
                    )));
                }
            }
            _ => {}
        }
        Ok(spec)
    }

    fn power_law_norm(&self) -> f64 {
        let b1 = self.beta + 1.0;
        self.x0.powf(b1) + (1.0 - self.x0).powf(b1)
    }

    /// Largest `h̄ ≤ 1` such that `F_ν` is increasing on `(0, h̄]`.
    pub fn monotone_limit(&self) -> f64 {
        match self.kind {
            DesignKind::PowerLogLaw { alpha } if alpha > 0.0 => {
                (-alpha / (self.beta + 1.0)).exp()
            }
            _ => 1.0,
        }
    }

    /// `F_ν(h) = ∫₀ʰ ν(t) dt` (see the module docs for each family).
    pub fn f_nu(&self, h: f64) -> Result<f64> {
        if !(h > 0.0) {
            return Err(domain(format!("F_nu needs h > 0, got {h}")));
        }
        Ok(self.f_nu_unchecked(h))
    }

    fn f_nu_unchecked(&self, h: f64) -> f64 {
        if h <= 0.0 {
            return 0.0;
        }
        let b1 = self.beta + 1.0;
        match self.kind {
            DesignKind::Uniform => h,
            DesignKind::PowerLaw => h.powf(b1) / self.power_law_norm(),
            DesignKind::PowerLogLaw { alpha } => {
                if alpha == 0.0 {
                    h.powf(b1)
                } else {
                    h.powf(b1) * (1.0 / h).ln().powf(alpha)
                }
            }
        }
    }

    /// `ν(t)` for `t > 0`.
    pub fn nu(&self, t: f64) -> f64 {
        let b1 = self.beta + 1.0;
        match self.kind {
            DesignKind::Uniform => 1.0,
            DesignKind::PowerLaw => b1 * t.powf(self.beta) / self.power_law_norm(),
            DesignKind::PowerLogLaw { alpha } => {
                let l = (1.0 / t).ln();
                t.powf(self.beta) * l.powf(alpha - 1.0) * (b1 * l - alpha)
            }
        }
    }

    fn normalizer(&self) -> f64 {
        match self.kind {
            DesignKind::Uniform | DesignKind::PowerLaw => 1.0,
            DesignKind::PowerLogLaw { .. } => {
                self.f_nu_unchecked(self.x0) + self.f_nu_unchecked(1.0 - self.x0)
            }
        }
    }

    /// Density of the design on `[0, 1]`; `+∞` at a pole (`β < 0`, `x = x0`).
    pub fn pdf(&self, x: f64) -> f64 {
        if !(0.0..=1.0).contains(&x) {
            return 0.0;
        }
        if matches!(self.kind, DesignKind::Uniform) {
            return 1.0;
        }
        let t = (x - self.x0).abs();
        if t == 0.0 {
            return if self.beta < 0.0 {
                f64::INFINITY
            } else if self.beta == 0.0 {
                self.nu(f64::MIN_POSITIVE) / self.normalizer()
            } else {
                0.0
            };
        }
        self.nu(t) / self.normalizer()
    }

    pub fn cdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        if x >= 1.0 {
            return 1.0;
        }
        let left_mass = self.f_nu_unchecked(self.x0);
        let v = if x < self.x0 {
            left_mass - self.f_nu_unchecked(self.x0 - x)
        } else {
            left_mass + self.f_nu_unchecked(x - self.x0)
        };
        (v / self.normalizer()).clamp(0.0, 1.0)
    }

    /// Inverse of `F_ν` on `[0, reach]`.
    fn f_nu_inverse(&self, y: f64, reach: f64) -> f64 {
        if y <= 0.0 {
            return 0.0;
        }
        match self.kind {
            DesignKind::Uniform => y.min(reach),
            DesignKind::PowerLaw => (y * self.power_law_norm())
                .powf(1.0 / (self.beta + 1.0))
                .min(reach),
            DesignKind::PowerLogLaw { .. } => {
                bisect_increasing(|h| self.f_nu_unchecked(h), y, 0.0, reach)
            }
        }
    }

    /// Quantile function `F⁻¹(u)` of the design.
    pub fn cdf_inverse(&self, u: f64) -> f64 {
        let u = u.clamp(0.0, 1.0);
        let target = u * self.normalizer();
        let left_mass = self.f_nu_unchecked(self.x0);
        let x = if target < left_mass {
            self.x0 - self.f_nu_inverse(left_mass - target, self.x0)
        } else {
            self.x0 + self.f_nu_inverse(target - left_mass, 1.0 - self.x0)
        };
        x.clamp(0.0, 1.0)
    }

    /// `n` i.i.d. design points, sorted ascending, from the design stream of
    /// `seed`.
    pub fn sample(&self, n: usize, seed: u64) -> Vec<f64> {
        let mut stream = UniformStream::new(seed, DESIGN_STREAM);
        let mut xs: Vec<f64> = (0..n).map(|_| self.cdf_inverse(stream.next_open01())).collect();
        xs.sort_by(f64::total_cmp);
        xs
    }
}

/// Free-function form of [`DesignSpec::pdf`].
pub fn design_pdf(spec: &DesignSpec, x: f64) -> f64 {
    spec.pdf(x)
}

pub fn design_cdf_inverse(spec: &DesignSpec, u: f64) -> f64 {
    spec.cdf_inverse(u)
}

pub fn sample_design(spec: &DesignSpec, n: usize, seed: u64) -> Vec<f64> {
    spec.sample(n, seed)
}

pub fn f_nu_integral(spec: &DesignSpec, h: f64) -> Result<f64> {
    spec.f_nu(h)
}

/// `ω(h) = r · h^s · (log 1/h)^γ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModulusSpec {
    pub s: f64,
    pub r: f64,
    pub gamma: f64,
}

impl ModulusSpec {
    pub fn holder(s: f64, r: f64) -> Result<Self> {
        Self::new(s, r, 0.0)
    }

    pub fn new(s: f64, r: f64, gamma: f64) -> Result<Self> {
        if !(s > 0.0) || !s.is_finite() {
            return Err(domain(format!("smoothness s = {s} must be positive")));
        }
        if !(r > 0.0) || !r.is_finite() {
            return Err(domain(format!("radius r = {r} must be positive")));
        }
        if !gamma.is_finite() {
            return Err(domain("log exponent gamma must be finite"));
        }
        Ok(Self { s, r, gamma })
    }

    pub fn eval(&self, h: f64) -> f64 {
        if h <= 0.0 {
            return 0.0;
        }
        let base = self.r * h.powf(self.s);
        if self.gamma == 0.0 {
            base
        } else {
            base * (1.0 / h).ln().powf(self.gamma)
        }
    }

    /// Largest `h̄ ≤ 1` such that `ω` is nondecreasing on `(0, h̄]`.
    pub fn monotone_limit(&self) -> f64 {
        if self.gamma > 0.0 {
            (-self.gamma / self.s).exp()
        } else {
            1.0
        }
    }

    /// Smallest `h` in `(0, h̄]` with `ω(h) ≥ level`, by bisection.
    pub fn inverse(&self, level: f64) -> f64 {
        bisect_increasing(|h| self.eval(h), level, 0.0, self.monotone_limit())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateModel {
    pub modulus: ModulusSpec,
    pub design: DesignSpec,
    pub sigma: f64,
}

impl RateModel {
    pub fn new(modulus: ModulusSpec, design: DesignSpec, sigma: f64) -> Result<Self> {
        if !(sigma > 0.0) || !sigma.is_finite() {
            return Err(domain(format!("noise level sigma = {sigma} must be positive")));
        }
        Ok(Self {
            modulus,
            design,
            sigma,
        })
    }

    /// Exponent `s / (1 + 2s + β)` of the rate in `log n / n`.
    pub fn exponent(&self) -> f64 {
        self.modulus.s / (1.0 + 2.0 * self.modulus.s + self.design.beta)
    }

    fn upper(&self) -> f64 {
        self.modulus
            .monotone_limit()
            .min(self.design.monotone_limit())
    }

    /// Root of `ω(h) = σ √(L / (2 n F_ν(h)))` with `L = log n` (adaptive,
    /// `h_{n,ω}`) or `L = 1` (minimax, `γ_{n,ω}`).
    ///
    /// Bisection on `ω(h) √(2 n F_ν(h)) − σ √L` over `[1e-12, h̄]`, where both
    /// factors increase; the root is unique so it is also the smallest one.
    /// Moduli with several crossings are not supported.
    pub fn deterministic_bandwidth(&self, n: f64, with_log: bool) -> Result<f64> {
        if !(n > 1.0) {
            return Err(domain(format!("rate evaluators need n > 1, got {n}")));
        }
        let level = if with_log { n.ln() } else { 1.0 };
        let rhs = self.sigma * level.sqrt();
        let lhs = |h: f64| self.modulus.eval(h) * (2.0 * n * self.design.f_nu_unchecked(h)).sqrt();
        let upper = self.upper();
        let top = lhs(upper);
        if !(top >= rhs) {
            return Err(Error::NoRoot {
                upper,
                lhs: top,
                rhs,
            });
        }
        if lhs(BRACKET_FLOOR) >= rhs {
            return Ok(BRACKET_FLOOR);
        }
        let (mut lo, mut hi) = (BRACKET_FLOOR, upper);
        for _ in 0..400 {
            let mid = 0.5 * (lo + hi);
            if lhs(mid) >= rhs {
                hi = mid;
            } else {
                lo = mid;
            }
            if hi - lo <= 1e-14 * hi {
                break;
            }
        }
        Ok(hi)
    }

    /// `r_{n,ω} = ω(h_{n,ω})` when `adaptive`, else `ψ_{n,ω} = ω(γ_{n,ω})`.
    pub fn theoretical_rate(&self, n: f64, adaptive: bool) -> Result<f64> {
        Ok(self.modulus.eval(self.deterministic_bandwidth(n, adaptive)?))
    }

    /// Residual `|ω(h) − σ √(L/(2nF_ν(h)))| / ω(h)` of a balance root.
    pub fn balance_residual(&self, n: f64, with_log: bool, h: f64) -> f64 {
        let level = if with_log { n.ln() } else { 1.0 };
        let w = self.modulus.eval(h);
        let rhs = self.sigma * (level / (2.0 * n * self.design.f_nu_unchecked(h))).sqrt();
        (w - rhs).abs() / w
    }

    /// Leading-order form of the rate for `F_ν(h) = h^{β+1}(log 1/h)^α` and
    /// `ω(h) = r h^s (log 1/h)^γ`:
    /// `σ^{2s/d} r^{(β+1)/d} (n (log n)^{α − e − γ(1+β)/s})^{−s/d}` with
    /// `d = 1 + 2s + β` and `e = 1` for the adaptive rate, `0` for the
    /// minimax one. Valid up to a constant factor depending on `(s, β, γ, α)`.
    pub fn asymptotic_rate(&self, n: f64, adaptive: bool) -> f64 {
        let ModulusSpec { s, r, gamma } = self.modulus;
        let beta = self.design.beta;
        let alpha = match self.design.kind {
            DesignKind::PowerLogLaw { alpha } => alpha,
            _ => 0.0,
        };
        let d = 1.0 + 2.0 * s + beta;
        let e = if adaptive { 1.0 } else { 0.0 };
        let log_power = alpha - e - gamma * (1.0 + beta) / s;
        self.sigma.powf(2.0 * s / d)
            * r.powf((beta + 1.0) / d)
            * (n * n.ln().powf(log_power)).powf(-s / d)
    }
}

/// `C_{α,β} = (1 + (−1)^α)(β + 1)/(α + β + 1)`.
pub fn c_alpha_beta(alpha: usize, beta: f64) -> Result<f64> {
    if !(beta > -1.0) {
        return Err(domain(format!("beta = {beta} must exceed -1")));
    }
    if alpha % 2 == 1 {
        return Ok(0.0);
    }
    Ok(2.0 * (beta + 1.0) / (alpha as f64 + beta + 1.0))
}

/// Limit of the normalised local Gram matrix for a design of index `β`.
#[derive(Debug, Clone)]
pub struct LimitMatrix {
    pub kappa: usize,
    pub beta: f64,
    pub entries: Matrix,
    pub lambda_min: f64,
}

pub fn limit_matrix(kappa: usize, beta: f64) -> Result<LimitMatrix> {
    if kappa > MAX_DEGREE {
        return Err(domain(format!("degree {kappa} exceeds {MAX_DEGREE}")));
    }
    let dim = kappa + 1;
    let mut entries = Matrix::zeros(dim);
    for j in 0..dim {
        for l in 0..dim {
            entries[(j, l)] = if j == l {
                1.0
            } else {
                c_alpha_beta(j + l, beta)?
                    / (c_alpha_beta(2 * j, beta)? * c_alpha_beta(2 * l, beta)?).sqrt()
            };
        }
    }
    let lambda_min = smallest_eigenvalue(&entries);
    Ok(LimitMatrix {
        kappa,
        beta,
        entries,
        lambda_min,
    })
}

/// `b^{a/b} h^{1/b} (log 1/h)^{−a/b}`, an asymptotic inverse of
/// `G(y) = y^b (log 1/y)^a` as `h → 0⁺`.
pub fn lambert_inverse_asymptotic(a: f64, b: f64, h: f64) -> Result<f64> {
    if !(b > 0.0) {
        return Err(domain(format!("exponent b = {b} must be positive")));
    }
    if !(h > 0.0 && h < 1.0) {
        return Err(domain(format!("argument h = {h} must lie in (0, 1)")));
    }
    Ok(b.powf(a / b) * h.powf(1.0 / b) * (1.0 / h).ln().powf(-a / b))
}

/// Index estimate `log(g(y h) / g(h)) / log y`; tends to the index of a
/// regularly varying `g` as `h → 0⁺`.
pub fn regular_variation_index(g: impl Fn(f64) -> f64, h: f64, y: f64) -> f64 {
    (g(y * h) / g(h)).ln() / y.ln()
}

/// Smallest `h ∈ [lo, hi]` with `f(h) ≥ level` for nondecreasing `f`.
pub(crate) fn bisect_increasing(f: impl Fn(f64) -> f64, level: f64, lo: f64, hi: f64) -> f64 {
    if f(hi) < level {
        return hi;
    }
    let (mut lo, mut hi) = (lo, hi);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) >= level {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}
