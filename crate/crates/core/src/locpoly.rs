//! Regularised local polynomial fits on a window around the estimation
//! point.
//!
//! The basis is the centred monomials `φ_j(x) = (x − x0)^j`, `j = 0..=κ`.
//! For a window the Gram system is
//!
//! ```text
//! (X)_{j,l} = ⟨φ_j, φ_l⟩,   (Y)_j = ⟨Y, φ_j⟩,
//! ```
//!
//! where the scalar product is either averaged over the `N` points in the
//! window ([`Normalization::ByCount`]) or a plain sum ([`Normalization::Raw`]).
//! In the averaged form the system is solved with the ridge
//! `X + N^{-1/2} I` whenever `λ(X) ≤ N^{-1/2}`, which keeps the solve well
//! posed for every non-empty window. The raw form is solved as is.

use crate::error::{Error, Result};
use crate::linalg::{smallest_eigenvalue, solve_symmetric, Matrix, MAX_DEGREE};

/// Observations `(X_i, Y_i)` sorted by design point.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    xs: Vec<f64>,
    ys: Vec<f64>,
    seed: Option<u64>,
}

impl SampleSet {
    /// Builds a sample set, sorting the pairs by `x` (stable for ties).
    pub fn new(xs: Vec<f64>, ys: Vec<f64>, seed: Option<u64>) -> Result<Self> {
        if xs.len() != ys.len() {
            return Err(Error::Precondition(format!(
                "{} design points but {} responses",
                xs.len(),
                ys.len()
            )));
        }
        if xs.is_empty() {
            return Err(Error::Precondition("a sample set needs n >= 1".into()));
        }
        if xs.iter().chain(&ys).any(|v| !v.is_finite()) {
            return Err(Error::Precondition("non-finite observation".into()));
        }
        let (xs, ys) = if xs.windows(2).all(|w| w[0] <= w[1]) {
            (xs, ys)
        } else {
            let mut pairs: Vec<(f64, f64)> = xs.into_iter().zip(ys).collect();
            pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
            pairs.into_iter().unzip()
        };
        Ok(Self { xs, ys, seed })
    }

    pub fn len(&self) -> usize {
        self.xs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xs.is_empty()
    }

    pub fn xs(&self) -> &[f64] {
        &self.xs
    }

    pub fn ys(&self) -> &[f64] {
        &self.ys
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    /// Half-open index range `[start, end)` of the points with `lo ≤ x ≤ hi`.
    pub fn index_range(&self, lo: f64, hi: f64) -> (usize, usize) {
        let start = self.xs.partition_point(|&x| x < lo);
        let end = self.xs.partition_point(|&x| x <= hi);
        (start, end.max(start))
    }

    /// Applies `f` to every response.
    pub fn map_responses(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            xs: self.xs.clone(),
            ys: self.ys.iter().map(|&y| f(y)).collect(),
            seed: self.seed,
        }
    }
}

/// Estimation window. Both forms are closed intervals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Window {
    /// `[x0 − h, x0 + h]`, basis centred at `x0`.
    Symmetric { x0: f64, h: f64 },
    /// `[lo, hi]`, basis centred at `center`.
    Interval { center: f64, lo: f64, hi: f64 },
}

impl Window {
    pub fn center(&self) -> f64 {
        match *self {
            Window::Symmetric { x0, .. } => x0,
            Window::Interval { center, .. } => center,
        }
    }

    pub fn bounds(&self) -> (f64, f64) {
        match *self {
            Window::Symmetric { x0, h } => (x0 - h, x0 + h),
            Window::Interval { lo, hi, .. } => (lo, hi),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Normalization {
    /// Scalar product averaged over the window count.
    ByCount,
    /// Plain sums over the window.
    Raw,
}

/// Sums of `(X_i − x0)^k` for `k = 0..=2κ` and `Y_i (X_i − x0)^k` for
/// `k = 0..=κ` over a set of points.
#[derive(Debug, Clone, PartialEq)]
pub struct Moments {
    kappa: usize,
    count: usize,
    powers: Vec<f64>,
    weighted: Vec<f64>,
}

impl Moments {
    pub fn new(kappa: usize) -> Self {
        Self {
            kappa,
            count: 0,
            powers: vec![0.0; 2 * kappa + 1],
            weighted: vec![0.0; kappa + 1],
        }
    }

    pub fn kappa(&self) -> usize {
        self.kappa
    }

    pub fn count(&self) -> usize {
        self.count
    }

    /// `Σ (X_i − x0)^k`.
    pub fn power_sum(&self, k: usize) -> f64 {
        self.powers[k]
    }

    /// `Σ Y_i (X_i − x0)^k`.
    pub fn weighted_sum(&self, k: usize) -> f64 {
        self.weighted[k]
    }

    /// Adds one point given its centred position `dx = X − x0`.
    #[inline]
    pub fn push(&mut self, dx: f64, y: f64) {
        self.count += 1;
        let mut p = 1.0;
        for k in 0..=2 * self.kappa {
            self.powers[k] += p;
            if k <= self.kappa {
                self.weighted[k] += y * p;
            }
            p *= dx;
        }
    }

    pub fn add(&mut self, other: &Moments) {
        debug_assert_eq!(self.kappa, other.kappa);
        self.count += other.count;
        for (a, b) in self.powers.iter_mut().zip(&other.powers) {
            *a += b;
        }
        for (a, b) in self.weighted.iter_mut().zip(&other.weighted) {
            *a += b;
        }
    }

    pub fn sum(parts: &[&Moments]) -> Moments {
        let mut total = Moments::new(parts[0].kappa);
        for p in parts {
            total.add(p);
        }
        total
    }

    /// Moments of `data` restricted to the index range `[start, end)`,
    /// centred at `center`.
    pub fn from_range(data: &SampleSet, start: usize, end: usize, center: f64, kappa: usize) -> Self {
        let mut m = Moments::new(kappa);
        for i in start..end {
            m.push(data.xs[i] - center, data.ys[i]);
        }
        m
    }

    pub fn system(&self, norm: Normalization) -> GramSystem {
        let dim = self.kappa + 1;
        let scale = match norm {
            Normalization::ByCount if self.count > 0 => 1.0 / self.count as f64,
            _ => 1.0,
        };
        let mut matrix = Matrix::zeros(dim);
        for j in 0..dim {
            for l in 0..dim {
                matrix[(j, l)] = self.powers[j + l] * scale;
            }
        }
        let rhs = self.weighted.iter().map(|v| v * scale).collect();
        GramSystem {
            matrix,
            rhs,
            normalization: norm,
            count: self.count,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GramSystem {
    pub matrix: Matrix,
    pub rhs: Vec<f64>,
    pub normalization: Normalization,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LocalFit {
    /// Coefficients in the centred monomial basis.
    pub theta: Vec<f64>,
    pub count: usize,
    /// `λ(X)` in the scale of the chosen normalisation.
    pub lambda_min: f64,
    /// `λ` of the matrix that was actually solved (`X̃` after any ridge).
    pub solved_lambda_min: f64,
    pub regularized: bool,
    /// `λ(X_h) > N^{-1/2}` and `N ≥ 2`, evaluated on the averaged Gram matrix.
    pub omega_event: bool,
    pub estimate: f64,
}

impl LocalFit {
    fn empty(kappa: usize) -> Self {
        Self {
            theta: vec![0.0; kappa + 1],
            count: 0,
            lambda_min: 0.0,
            solved_lambda_min: 0.0,
            regularized: false,
            omega_event: false,
            estimate: 0.0,
        }
    }
}

fn check_kappa(kappa: usize) -> Result<()> {
    if kappa > MAX_DEGREE {
        return Err(Error::Domain(format!(
            "degree {kappa} exceeds the supported maximum {MAX_DEGREE}"
        )));
    }
    Ok(())
}

/// Number of design points in the closed window.
pub fn count_in_window(data: &SampleSet, w: &Window) -> usize {
    let (lo, hi) = w.bounds();
    let (start, end) = data.index_range(lo, hi);
    end - start
}

pub fn window_moments(data: &SampleSet, w: &Window, kappa: usize) -> Moments {
    let (lo, hi) = w.bounds();
    let (start, end) = data.index_range(lo, hi);
    Moments::from_range(data, start, end, w.center(), kappa)
}

pub fn build_gram(data: &SampleSet, w: &Window, kappa: usize, norm: Normalization) -> Result<GramSystem> {
    check_kappa(kappa)?;
    Ok(window_moments(data, w, kappa).system(norm))
}

/// Fits the degree-`κ` local polynomial on `w`.
pub fn fit_local(data: &SampleSet, w: &Window, kappa: usize, norm: Normalization) -> Result<LocalFit> {
    check_kappa(kappa)?;
    fit_moments(&window_moments(data, w, kappa), norm)
}

/// Fit from precomputed window moments, with full diagnostics.
pub fn fit_moments(m: &Moments, norm: Normalization) -> Result<LocalFit> {
    let kappa = m.kappa();
    let n = m.count();
    if n == 0 {
        return Ok(LocalFit::empty(kappa));
    }
    let floor = 1.0 / (n as f64).sqrt();
    let averaged = m.system(Normalization::ByCount);
    let lambda_avg = smallest_eigenvalue(&averaged.matrix);
    let omega_event = lambda_avg > floor && n >= 2;

    let (theta, lambda_min, solved_lambda_min, regularized) = match norm {
        Normalization::ByCount => {
            let regularized = lambda_avg <= floor;
            let mut solved = averaged.matrix.clone();
            if regularized {
                solved.add_to_diagonal(floor);
            }
            let solved_lambda = if regularized {
                smallest_eigenvalue(&solved)
            } else {
                lambda_avg
            };
            let theta = solve_symmetric(&solved, &averaged.rhs)
                .ok_or(Error::SingularSystem { count: n, kappa })?;
            (theta, lambda_avg, solved_lambda, regularized)
        }
        Normalization::Raw => {
            let sys = m.system(Normalization::Raw);
            let lambda = smallest_eigenvalue(&sys.matrix);
            let theta = solve_symmetric(&sys.matrix, &sys.rhs)
                .ok_or(Error::SingularSystem { count: n, kappa })?;
            (theta, lambda, lambda, false)
        }
    };
    Ok(LocalFit {
        estimate: theta[0],
        theta,
        count: n,
        lambda_min,
        solved_lambda_min,
        regularized,
        omega_event,
    })
}

/// `𝒢_h = Λ X Λ` with `Λ = diag(‖φ_j‖^{-1})`, on the averaged scale.
///
/// Built from the unregularised Gram matrix, so the diagonal is exactly one;
/// on the event `Ω_h` this coincides with `Λ X̃ Λ`.
pub fn normalized_gram(data: &SampleSet, w: &Window, kappa: usize) -> Result<Matrix> {
    check_kappa(kappa)?;
    normalized_gram_from_moments(&window_moments(data, w, kappa))
}

pub fn normalized_gram_from_moments(m: &Moments) -> Result<Matrix> {
    let n = m.count();
    if n == 0 {
        return Err(Error::Precondition("normalised Gram matrix of an empty window".into()));
    }
    let averaged = m.system(Normalization::ByCount).matrix;
    let dim = averaged.dim();
    let norms: Vec<f64> = averaged.diag().iter().map(|d| d.sqrt()).collect();
    if let Some(j) = norms.iter().position(|&v| v == 0.0) {
        return Err(Error::DegenerateNorm { coordinate: j });
    }
    let mut g = Matrix::zeros(dim);
    for j in 0..dim {
        for l in 0..dim {
            g[(j, l)] = if j == l {
                1.0
            } else {
                averaged[(j, l)] / (norms[j] * norms[l])
            };
        }
    }
    Ok(g)
}
