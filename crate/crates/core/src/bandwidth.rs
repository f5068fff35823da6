//! Data-driven window selection.
//!
//! Two selectors share the same idea: accept the largest window whose fit
//! agrees, up to a noise-calibrated threshold, with the fits on every
//! smaller admissible window.
//!
//! * [`select_bandwidth_symmetric`] scans symmetric windows `[x0 − h, x0 + h]`
//!   over an arithmetic or geometric grid of order-statistic distances, using
//!   the averaged scalar product and the ridge-regularised fit.
//! * [`select_interval`] scans non-symmetric intervals built from geometric
//!   offsets on each side of a seed block of `m` neighbours, using raw sums.
//!
//! Both selectors accumulate window moments outward from the estimation
//! point, so every window sum is a sum of non-overlapping partial sums and
//! no moment is ever obtained by subtraction.

use crate::error::{domain, Error, Result};
use crate::linalg::{solve_symmetric_into, Matrix, MAX_DEGREE};
use crate::locpoly::{fit_moments, LocalFit, Moments, Normalization, SampleSet, Window};
use crate::rvdesign::ModulusSpec;

/// Relative floating-point allowance on every test statistic.
///
/// A test passes when `|stat| ≤ threshold + ROUNDOFF_SLACK · scale`, where
/// `scale` is the sum of absolute values of the terms forming `stat`. This
/// only matters when the threshold is (near) zero, e.g. noiseless data
/// with `σ = 0`, where exact-arithmetic zeros come out as roundoff.
pub const ROUNDOFF_SLACK: f64 = 1e-9;

/// Bandwidth grid family with its parameter `a`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GridKind {
    /// `h_{2+[i a]}`, `i = 1..[(n−2)/a]`, `a ≥ 1`.
    Arith { a: f64 },
    /// `h_{[a^i]}`, `i = 1..[log_a n]`, `a > 1`.
    Geom { a: f64 },
}

impl GridKind {
    pub fn a(&self) -> f64 {
        match *self {
            GridKind::Arith { a } | GridKind::Geom { a } => a,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub kind: GridKind,
    /// Strictly increasing bandwidths.
    pub values: Vec<f64>,
    /// `N_{n,h}` for each bandwidth.
    pub counts: Vec<usize>,
}

/// Integer part, tolerant to representation error just below an integer.
pub(crate) fn integer_part(v: f64) -> usize {
    if v <= 0.0 {
        return 0;
    }
    (v * (1.0 + 1e-12)).floor() as usize
}

fn sorted_distances(data: &SampleSet, x0: f64) -> Vec<f64> {
    let mut d: Vec<f64> = data.xs().iter().map(|&x| (x - x0).abs()).collect();
    d.sort_by(f64::total_cmp);
    d
}

/// One-based order-statistic indices generated by the grid formulas.
pub fn grid_indices(n: usize, kind: GridKind) -> Result<Vec<usize>> {
    let mut idx = Vec::new();
    match kind {
        GridKind::Arith { a } => {
            if !(a >= 1.0) || !a.is_finite() {
                return Err(domain(format!("arithmetic grid needs a >= 1, got {a}")));
            }
            if n < 3 {
                return Err(Error::EmptyGrid { n });
            }
            let top = integer_part((n - 2) as f64 / a);
            for i in 1..=top {
                idx.push((2 + integer_part(i as f64 * a)).min(n));
            }
        }
        GridKind::Geom { a } => {
            if !(a > 1.0) || !a.is_finite() {
                return Err(domain(format!("geometric grid needs a > 1, got {a}")));
            }
            let top = integer_part((n as f64).ln() / a.ln());
            for i in 1..=top {
                idx.push(integer_part(a.powi(i as i32)).clamp(1, n));
            }
        }
    }
    if idx.is_empty() {
        return Err(Error::EmptyGrid { n });
    }
    Ok(idx)
}

pub fn build_grid(data: &SampleSet, x0: f64, kind: GridKind) -> Result<GridSpec> {
    let d = sorted_distances(data, x0);
    let mut values: Vec<f64> = grid_indices(d.len(), kind)?
        .into_iter()
        .map(|i| d[i - 1])
        .collect();
    values.sort_by(f64::total_cmp);
    values.dedup();
    let counts = values
        .iter()
        .map(|&h| d.partition_point(|&v| v <= h))
        .collect();
    Ok(GridSpec {
        kind,
        values,
        counts,
    })
}

/// `C_κ = 1 + √(κ+1)`.
pub fn c_kappa(kappa: usize) -> f64 {
    1.0 + ((kappa + 1) as f64).sqrt()
}

/// `C_p = 8 (1 + 2p)`.
pub fn c_p(p: f64) -> f64 {
    8.0 * (1.0 + 2.0 * p)
}

/// Threshold `T_{n,h',h}` of the symmetric rule:
/// `C_κ √(C_p log N_h / N_h')` plus `√(log n / (N_h − a))` (arithmetic grid)
/// or `√((1 + a) log n / N_h)` (geometric grid).
pub fn threshold_symmetric(n: f64, n_hp: f64, n_h: f64, kappa: usize, p: f64, kind: GridKind) -> Result<f64> {
    if !(n_hp > 0.0) || !(n_h > 0.0) {
        return Err(domain(format!("threshold needs positive counts, got N_h' = {n_hp}, N_h = {n_h}")));
    }
    if !(n >= 1.0) {
        return Err(domain(format!("threshold needs n >= 1, got {n}")));
    }
    let first = c_kappa(kappa) * (c_p(p) * n_h.ln() / n_hp).sqrt();
    let second = match kind {
        GridKind::Arith { a } => {
            if !(n_h > a) {
                return Err(domain(format!("arithmetic threshold needs N_h > a, got N_h = {n_h}, a = {a}")));
            }
            (n.ln() / (n_h - a)).sqrt()
        }
        GridKind::Geom { a } => ((1.0 + a) * n.ln() / n_h).sqrt(),
    };
    Ok(first + second)
}

/// Which sub-window made a candidate fail, and by how much.
#[derive(Debug, Clone, PartialEq)]
pub struct Rejection {
    pub candidate: Window,
    pub against: Window,
    pub coordinate: usize,
    pub statistic: f64,
    pub threshold: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectionResult {
    pub window: Window,
    pub fit: LocalFit,
    /// Candidate windows examined, including the selected one.
    pub tested: usize,
    pub rejections: Vec<Rejection>,
    /// Set when no candidate passed and the most local one was returned.
    pub fallback: bool,
}

impl SelectionResult {
    pub fn estimate(&self) -> f64 {
        self.fit.estimate
    }
}

struct SymmetricCandidate {
    h: f64,
    count: usize,
    theta: Vec<f64>,
    gram: Matrix,
    fit: LocalFit,
}

/// Symmetric Lepski-type rule: the largest grid bandwidth `h` such that for
/// every grid `h' ≤ h` and every `j ≤ κ`,
/// `|⟨f̂_h − f̂_h', φ_j⟩_h'| ≤ σ ‖φ_j‖_h' T_{n,h',h}`.
pub fn select_bandwidth_symmetric(
    data: &SampleSet,
    x0: f64,
    kappa: usize,
    p: f64,
    grid: &GridSpec,
    sigma: f64,
) -> Result<SelectionResult> {
    if kappa > MAX_DEGREE {
        return Err(domain(format!("degree {kappa} exceeds {MAX_DEGREE}")));
    }
    if grid.values.is_empty() {
        return Err(Error::EmptyGrid { n: data.len() });
    }
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(domain(format!("noise level must be finite and nonnegative, got {sigma}")));
    }
    let n = data.len() as f64;

    let mut order: Vec<usize> = (0..data.len()).collect();
    let xs = data.xs();
    let ys = data.ys();
    order.sort_by(|&i, &j| (xs[i] - x0).abs().total_cmp(&(xs[j] - x0).abs()));

    let mut candidates = Vec::with_capacity(grid.values.len());
    let mut acc = Moments::new(kappa);
    let mut next = 0;
    for (&h, &count) in grid.values.iter().zip(&grid.counts) {
        while next < count {
            let i = order[next];
            acc.push(xs[i] - x0, ys[i]);
            next += 1;
        }
        let fit = fit_moments(&acc, Normalization::ByCount)?;
        candidates.push(SymmetricCandidate {
            h,
            count,
            theta: fit.theta.clone(),
            gram: acc.system(Normalization::ByCount).matrix,
            fit,
        });
    }

    let window = |h: f64| Window::Symmetric { x0, h };
    let mut rejections = Vec::new();
    let mut hint: Option<usize> = None;
    let mut tested = 0;
    for g in (0..candidates.len()).rev() {
        tested += 1;
        let cand = &candidates[g];
        let check = |gp: usize| -> Result<Option<(usize, f64, f64)>> {
            let sub = &candidates[gp];
            if sub.count == 0 {
                return Ok(None);
            }
            let t = threshold_symmetric(n, sub.count as f64, cand.count as f64, kappa, p, grid.kind)?;
            let diff: Vec<f64> = cand.theta.iter().zip(&sub.theta).map(|(a, b)| a - b).collect();
            let stat = sub.gram.mul_vec(&diff);
            for (j, s) in stat.iter().enumerate() {
                let bound = sigma * sub.gram[(j, j)].sqrt() * t;
                let scale: f64 = (0..diff.len())
                    .map(|l| sub.gram[(j, l)].abs() * (cand.theta[l].abs() + sub.theta[l].abs()))
                    .sum();
                if s.abs() > bound + ROUNDOFF_SLACK * scale {
                    return Ok(Some((j, s.abs(), bound)));
                }
            }
            Ok(None)
        };
        let mut failure = None;
        if let Some(gp) = hint.filter(|&gp| gp < g) {
            if let Some(f) = check(gp)? {
                failure = Some((gp, f));
            }
        }
        if failure.is_none() {
            for gp in 0..g {
                if Some(gp) == hint {
                    continue;
                }
                if let Some(f) = check(gp)? {
                    failure = Some((gp, f));
                    break;
                }
            }
        }
        match failure {
            None => {
                return Ok(SelectionResult {
                    window: window(cand.h),
                    fit: cand.fit.clone(),
                    tested,
                    rejections,
                    fallback: false,
                });
            }
            Some((gp, (coordinate, statistic, threshold))) => {
                hint = Some(gp);
                rejections.push(Rejection {
                    candidate: window(cand.h),
                    against: window(candidates[gp].h),
                    coordinate,
                    statistic,
                    threshold,
                });
            }
        }
    }
    // the smallest grid value has no strict sub-window, so this is unreachable
    let first = &candidates[0];
    Ok(SelectionResult {
        window: window(first.h),
        fit: first.fit.clone(),
        tested,
        rejections,
        fallback: true,
    })
}

/// Non-symmetric candidate intervals around an estimation point.
///
/// The seed block holds the `m` sample points nearest `x` (extended over
/// ties). Left endpoints sit `[a^i] − 1` order statistics below the seed's
/// first point and right endpoints `[a^i] − 1` above its last point,
/// clamped to the sample and deduplicated; with `m = 2` these are exactly
/// `X_(j+1−[a^i])` and `X_(j+[a^i])` around the bracketing pair
/// `X_(j) ≤ x ≤ X_(j+1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct IntervalGrid {
    pub center: f64,
    /// Inclusive zero-based index range of the seed block.
    pub seed: (usize, usize),
    /// Zero-based index of the rightmost seed point at or left of `x`.
    pub base_index: Option<usize>,
    /// Zero-based start indices, by growing extent (the first is the seed start).
    pub left: Vec<usize>,
    /// Zero-based inclusive end indices, by growing extent.
    pub right: Vec<usize>,
    /// The product grid, most preferred first: larger count, then longer,
    /// then further left.
    pub intervals: Vec<GridInterval>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridInterval {
    /// Position in [`IntervalGrid::left`].
    pub left: usize,
    /// Position in [`IntervalGrid::right`].
    pub right: usize,
    pub start: usize,
    /// Inclusive.
    pub end: usize,
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

impl GridInterval {
    /// Interval containment of grid members (`self ⊆ other`).
    pub fn within(&self, other: &GridInterval) -> bool {
        self.left <= other.left && self.right <= other.right
    }
}

/// Indices `[start, end)` of the `m` points nearest `x`, grown over ties.
pub fn seed_block(xs: &[f64], x: f64, m: usize) -> (usize, usize) {
    let n = xs.len();
    let p = xs.partition_point(|&v| v < x);
    let (mut lo, mut hi) = (p, p);
    while hi - lo < m.min(n) {
        let take_left = lo > 0 && (hi == n || (x - xs[lo - 1]) <= (xs[hi] - x));
        if take_left {
            lo -= 1;
        } else {
            hi += 1;
        }
    }
    while lo > 0 && xs[lo - 1] == xs[lo] {
        lo -= 1;
    }
    while hi < n && hi > 0 && xs[hi] == xs[hi - 1] {
        hi += 1;
    }
    (lo, hi)
}

/// Distinct values of `[a^i]` for `i = 0..=[log_a limit]`.
fn geometric_offsets(a: f64, limit: usize) -> Vec<usize> {
    let top = integer_part((limit.max(1) as f64).ln() / a.ln());
    let mut offs: Vec<usize> = (0..=top).map(|i| integer_part(a.powi(i as i32)).max(1)).collect();
    offs.dedup();
    offs
}

pub fn build_interval_grid(data: &SampleSet, x: f64, a: f64, m: usize) -> Result<IntervalGrid> {
    let xs = data.xs();
    let n = xs.len();
    if !(a > 1.0) || !a.is_finite() {
        return Err(domain(format!("interval grid needs a > 1, got {a}")));
    }
    if m == 0 || n < m {
        return Err(Error::Precondition(format!("seed size m = {m} needs 1 <= m <= n = {n}")));
    }
    let (lo_bound, hi_bound) = (xs[0].min(0.0), xs[n - 1].max(1.0));
    if !x.is_finite() || x < lo_bound || x > hi_bound {
        return Err(Error::OutOfRange {
            x,
            lo: lo_bound,
            hi: hi_bound,
        });
    }
    let (seed_lo, seed_end) = seed_block(xs, x, m);
    let seed_hi = seed_end - 1;
    let base_index = (seed_lo..=seed_hi).rev().find(|&i| xs[i] <= x);

    // one-based positions of the seed boundaries
    let first1 = seed_lo + 1;
    let last1 = seed_hi + 1;
    let mut left: Vec<usize> = geometric_offsets(a, first1 + 1)
        .into_iter()
        .map(|off| {
            let mut i = (first1 + 1).saturating_sub(off).max(1) - 1;
            while i > 0 && xs[i - 1] == xs[i] {
                i -= 1;
            }
            i
        })
        .collect();
    left.dedup();
    let mut right: Vec<usize> = geometric_offsets(a, n - last1 + 1)
        .into_iter()
        .map(|off| {
            let mut i = (last1 - 1 + off).min(n) - 1;
            while i + 1 < n && xs[i + 1] == xs[i] {
                i += 1;
            }
            i
        })
        .collect();
    right.dedup();

    let mut intervals = Vec::with_capacity(left.len() * right.len());
    for (li, &start) in left.iter().enumerate() {
        for (ri, &end) in right.iter().enumerate() {
            intervals.push(GridInterval {
                left: li,
                right: ri,
                start,
                end,
                lo: xs[start],
                hi: xs[end],
                count: end - start + 1,
            });
        }
    }
    intervals.sort_by(|p, q| {
        q.count
            .cmp(&p.count)
            .then((q.hi - q.lo).total_cmp(&(p.hi - p.lo)))
            .then(p.lo.total_cmp(&q.lo))
    });
    Ok(IntervalGrid {
        center: x,
        seed: (seed_lo, seed_hi),
        base_index,
        left,
        right,
        intervals,
    })
}

/// How the noise level enters the interval threshold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ThresholdForm {
    /// `σ̂ [C_κ √(log N_I) + √(1+a) √((N_J/N_I) log n)]`.
    #[default]
    Scaled,
    /// `σ̂ C_κ √(log N_I) + √(1+a) √((N_J/N_I) log n)`.
    FirstTermOnly,
}

/// `T_{I,J}` for the interval rule.
pub fn threshold_interval(
    sigma_hat: f64,
    kappa: usize,
    a: f64,
    n: usize,
    n_i: usize,
    n_j: usize,
    form: ThresholdForm,
) -> f64 {
    let first = sigma_hat * c_kappa(kappa) * (n_i as f64).ln().sqrt();
    let second = (1.0 + a).sqrt() * ((n_j as f64 / n_i as f64) * (n as f64).ln()).sqrt();
    match form {
        ThresholdForm::Scaled => first + sigma_hat * second,
        ThresholdForm::FirstTermOnly => first + second,
    }
}

/// Sub-interval test for the non-symmetric rule: the interval with the most
/// points such that every grid interval `J ⊊ I` has
/// `‖H_J (θ̂_I − θ̂_J)‖_∞ ≤ T_{I,J}`, where
/// `(H_J)_{j,l} = Σ_J (X_i − x)^{j+l} / √(Σ_J (X_i − x)^{2j})`.
pub fn select_interval(
    data: &SampleSet,
    x: f64,
    kappa: usize,
    a: f64,
    m: usize,
    sigma_hat: f64,
    form: ThresholdForm,
) -> Result<SelectionResult> {
    let grid = build_interval_grid(data, x, a, m)?;
    select_on_interval_grid(data, &grid, kappa, a, sigma_hat, form)
}

pub fn select_on_interval_grid(
    data: &SampleSet,
    grid: &IntervalGrid,
    kappa: usize,
    a: f64,
    sigma_hat: f64,
    form: ThresholdForm,
) -> Result<SelectionResult> {
    if kappa > MAX_DEGREE {
        return Err(domain(format!("degree {kappa} exceeds {MAX_DEGREE}")));
    }
    let (seed_lo, seed_hi) = grid.seed;
    if seed_hi + 1 - seed_lo < kappa + 1 {
        return Err(Error::Precondition(format!(
            "seed block of {} points cannot support a degree-{kappa} fit",
            seed_hi + 1 - seed_lo
        )));
    }
    if !(sigma_hat >= 0.0) || !sigma_hat.is_finite() {
        return Err(domain(format!("noise level must be finite and nonnegative, got {sigma_hat}")));
    }
    let xs = data.xs();
    let ys = data.ys();
    let x = grid.center;
    let n = data.len();

    let seed = Moments::from_range(data, seed_lo, seed_hi + 1, x, kappa);
    let mut left_parts = Vec::with_capacity(grid.left.len());
    let mut acc = Moments::new(kappa);
    let mut i = seed_lo;
    for &start in &grid.left {
        while i > start {
            i -= 1;
            acc.push(xs[i] - x, ys[i]);
        }
        left_parts.push(acc.clone());
    }
    let mut right_parts = Vec::with_capacity(grid.right.len());
    let mut acc = Moments::new(kappa);
    let mut i = seed_hi;
    for &end in &grid.right {
        while i < end {
            i += 1;
            acc.push(xs[i] - x, ys[i]);
        }
        right_parts.push(acc.clone());
    }

    let mut table = FitTable::new(seed, left_parts, right_parts);
    let window = |iv: &GridInterval| Window::Interval {
        center: x,
        lo: iv.lo,
        hi: iv.hi,
    };

    let mut rejections = Vec::new();
    // sub-intervals that recently rejected a candidate are tried first
    let mut recent: Vec<(usize, usize)> = Vec::with_capacity(RECENT_FAILURES);
    let mut tested = 0;
    for cand in &grid.intervals {
        tested += 1;
        let is_sub = |(lj, rj): (usize, usize)| {
            lj <= cand.left && rj <= cand.right && (lj, rj) != (cand.left, cand.right)
        };
        let rule = table.candidate(cand, sigma_hat, a, n, form)?;
        let mut failure = None;
        for &h in recent.iter().filter(|&&h| is_sub(h)) {
            if let Some(f) = table.test(&rule, h)? {
                failure = Some((h, f));
                break;
            }
        }
        if failure.is_none() {
            'outer: for lj in 0..=cand.left {
                for rj in 0..=cand.right {
                    if !is_sub((lj, rj)) || recent.contains(&(lj, rj)) {
                        continue;
                    }
                    if let Some(f) = table.test(&rule, (lj, rj))? {
                        failure = Some(((lj, rj), f));
                        break 'outer;
                    }
                }
            }
        }
        if let Some((h, _)) = failure {
            if let Some(pos) = recent.iter().position(|&r| r == h) {
                recent.remove(pos);
            } else if recent.len() == RECENT_FAILURES {
                recent.pop();
            }
            recent.insert(0, h);
        }
        match failure {
            None => {
                let fit = fit_moments(&table.moments(cand.left, cand.right), Normalization::Raw)?;
                return Ok(SelectionResult {
                    window: window(cand),
                    fit,
                    tested,
                    rejections,
                    fallback: false,
                });
            }
            Some(((lj, rj), (coordinate, statistic, threshold))) => {
                let against = GridInterval {
                    left: lj,
                    right: rj,
                    start: grid.left[lj],
                    end: grid.right[rj],
                    lo: xs[grid.left[lj]],
                    hi: xs[grid.right[rj]],
                    count: grid.right[rj] + 1 - grid.left[lj],
                };
                rejections.push(Rejection {
                    candidate: window(cand),
                    against: window(&against),
                    coordinate,
                    statistic,
                    threshold,
                });
            }
        }
    }
    // the seed interval has no strict sub-interval, so this is unreachable
    let smallest = grid
        .intervals
        .iter()
        .find(|iv| iv.left == 0 && iv.right == 0)
        .copied()
        .ok_or(Error::NoAdmissible)?;
    Ok(SelectionResult {
        window: window(&smallest),
        fit: fit_moments(&table.moments(0, 0), Normalization::Raw)?,
        tested,
        rejections,
        fallback: true,
    })
}

const RECENT_FAILURES: usize = 16;

/// Raw fits of the product grid, computed on first use and stored flat.
struct FitTable {
    dim: usize,
    n_right: usize,
    seed: Moments,
    left: Vec<Moments>,
    right: Vec<Moments>,
    ready: Vec<bool>,
    count: Vec<usize>,
    root_count: Vec<f64>,
    theta: Vec<f64>,
    /// `H_J` row-major; rows of zero-norm coordinates are left at zero.
    h: Vec<f64>,
    active: Vec<bool>,
    /// `H_J θ_J`.
    h_theta: Vec<f64>,
}

impl FitTable {
    fn new(seed: Moments, left: Vec<Moments>, right: Vec<Moments>) -> Self {
        let dim = seed.kappa() + 1;
        let slots = left.len() * right.len();
        Self {
            dim,
            n_right: right.len(),
            seed,
            left,
            right,
            ready: vec![false; slots],
            count: vec![0; slots],
            root_count: vec![0.0; slots],
            theta: vec![0.0; slots * dim],
            h: vec![0.0; slots * dim * dim],
            active: vec![false; slots * dim],
            h_theta: vec![0.0; slots * dim],
        }
    }

    fn moments(&self, li: usize, ri: usize) -> Moments {
        Moments::sum(&[&self.seed, &self.left[li], &self.right[ri]])
    }

    fn ensure(&mut self, li: usize, ri: usize) -> Result<usize> {
        let slot = li * self.n_right + ri;
        if self.ready[slot] {
            return Ok(slot);
        }
        let dim = self.dim;
        let parts = [&self.seed, &self.left[li], &self.right[ri]];
        let count: usize = parts.iter().map(|p| p.count()).sum();
        let mut powers = [0.0; 2 * MAX_DEGREE + 1];
        for (k, v) in powers.iter_mut().enumerate().take(2 * dim - 1) {
            *v = parts.iter().fold(0.0, |acc, p| acc + p.power_sum(k));
        }
        let mut rhs = [0.0; MAX_DEGREE + 1];
        for (k, v) in rhs.iter_mut().enumerate().take(dim) {
            *v = parts.iter().fold(0.0, |acc, p| acc + p.weighted_sum(k));
        }
        let mut gram = [0.0; (MAX_DEGREE + 1) * (MAX_DEGREE + 1)];
        for j in 0..dim {
            for l in 0..dim {
                gram[j * dim + l] = powers[j + l];
            }
        }
        let mut theta = [0.0; MAX_DEGREE + 1];
        if !solve_symmetric_into(&gram[..dim * dim], &rhs[..dim], &mut theta[..dim]) {
            return Err(Error::SingularSystem { count, kappa: dim - 1 });
        }
        let theta = &theta[..dim];
        self.count[slot] = count;
        self.root_count[slot] = (count as f64).sqrt();
        self.theta[slot * dim..(slot + 1) * dim].copy_from_slice(theta);
        for j in 0..dim {
            let norm = powers[2 * j].sqrt();
            let k = slot * dim + j;
            self.active[k] = norm > 0.0;
            if norm > 0.0 {
                let row = &mut self.h[k * dim..(k + 1) * dim];
                for (l, r) in row.iter_mut().enumerate() {
                    *r = powers[j + l] / norm;
                }
                self.h_theta[k] = dot(row, theta);
            }
        }
        self.ready[slot] = true;
        Ok(slot)
    }

    /// Splits `T_{I,J}` into `fixed + per_root · √N_J` for one candidate `I`.
    fn candidate(
        &mut self,
        cand: &GridInterval,
        sigma_hat: f64,
        a: f64,
        n: usize,
        form: ThresholdForm,
    ) -> Result<CandidateRule> {
        let slot = self.ensure(cand.left, cand.right)?;
        let n_i = self.count[slot] as f64;
        let kappa = self.dim - 1;
        let mut per_root = (1.0 + a).sqrt() * ((n as f64).ln() / n_i).sqrt();
        if form == ThresholdForm::Scaled {
            per_root *= sigma_hat;
        }
        Ok(CandidateRule {
            slot,
            fixed: sigma_hat * c_kappa(kappa) * n_i.ln().sqrt(),
            per_root,
        })
    }

    /// First coordinate where `|(H_J (θ_I − θ_J))_j| > T_{I,J}`.
    fn test(&mut self, rule: &CandidateRule, (lj, rj): (usize, usize)) -> Result<Option<(usize, f64, f64)>> {
        let sj = self.ensure(lj, rj)?;
        let dim = self.dim;
        let t = rule.fixed + rule.per_root * self.root_count[sj];
        let theta_i = &self.theta[rule.slot * dim..(rule.slot + 1) * dim];
        for j in 0..dim {
            let k = sj * dim + j;
            if !self.active[k] {
                continue;
            }
            let row = &self.h[k * dim..(k + 1) * dim];
            let mut fit = 0.0;
            let mut scale = self.h_theta[k].abs();
            for (r, v) in row.iter().zip(theta_i) {
                fit += r * v;
                scale += (r * v).abs();
            }
            let stat = (fit - self.h_theta[k]).abs();
            if stat > t + ROUNDOFF_SLACK * scale {
                return Ok(Some((j, stat, t)));
            }
        }
        Ok(None)
    }
}

struct CandidateRule {
    slot: usize,
    fixed: f64,
    per_root: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Ideal adaptive bandwidth `H_{n,ω}` and the matching random rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdealBandwidth {
    pub h: f64,
    /// `N_{n,H}`.
    pub count: usize,
    /// `σ √(log n / N_{n,H})`.
    pub random_rate: f64,
}

/// `H_{n,ω} = min{h ∈ [0,1] : ω(h) ≥ σ √(log n / N_{n,h})}`.
///
/// `N_{n,h}` is a right-continuous step function with jumps at the sorted
/// distances `d_k`, so on each step `[d_k, d_{k+1})` the condition reduces to
/// `h ≥ ω⁻¹(σ √(log n / N_k))`; the first step where that point falls
/// inside the step gives the exact minimum.
pub fn ideal_bandwidth(
    data: &SampleSet,
    x0: f64,
    modulus: &ModulusSpec,
    sigma: f64,
    n: usize,
) -> Result<IdealBandwidth> {
    if n < 2 {
        return Err(Error::Undefined(format!("needs n >= 2, got {n}")));
    }
    let log_n = (n as f64).ln();
    if modulus.eval(1.0) < sigma * (log_n / n as f64).sqrt() {
        return Err(Error::Undefined(format!(
            "omega(1) = {} is below sigma * sqrt(log n / n)",
            modulus.eval(1.0)
        )));
    }
    let d = sorted_distances(data, x0);
    let mut k = 0;
    while k < d.len() {
        let step_start = d[k];
        if step_start > 1.0 {
            break;
        }
        let mut end = k + 1;
        while end < d.len() && d[end] == step_start {
            end += 1;
        }
        let count = end;
        let step_end = d.get(end).copied().unwrap_or(f64::INFINITY).min(1.0);
        let level = sigma * (log_n / count as f64).sqrt();
        let h = if modulus.eval(step_start) >= level {
            step_start
        } else {
            modulus.inverse(level)
        };
        if modulus.eval(h) >= level && (h < step_end || (end == d.len() && h <= 1.0)) {
            return Ok(IdealBandwidth {
                h,
                count,
                random_rate: level,
            });
        }
        k = end;
    }
    Err(Error::Undefined("no bandwidth in [0, 1] balances the modulus".into()))
}

/// `R_{n,ω} = σ √(log n / N_{n,H*})` with `H* = max{h ∈ grid : h ≤ H_{n,ω}}`.
pub fn grid_random_rate(grid: &GridSpec, ideal: &IdealBandwidth, sigma: f64, n: usize) -> Result<f64> {
    let pos = grid.values.partition_point(|&h| h <= ideal.h);
    if pos == 0 {
        return Err(Error::Undefined("no grid bandwidth below the ideal one".into()));
    }
    let count = grid.counts[pos - 1];
    Ok(sigma * ((n as f64).ln() / count as f64).sqrt())
}

/// `σ̂² = (1 / (2(n−1))) Σ (Y_(i+1) − Y_(i))²` over responses ordered by design.
pub fn estimate_sigma(data: &SampleSet) -> Result<f64> {
    let ys = data.ys();
    if ys.len() < 2 {
        return Err(domain("noise estimate needs n >= 2"));
    }
    let ss: f64 = ys.windows(2).map(|w| (w[1] - w[0]) * (w[1] - w[0])).sum();
    Ok((ss / (2.0 * (ys.len() - 1) as f64)).sqrt())
}
