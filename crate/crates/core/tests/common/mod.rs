#![allow(dead_code)]

//! Independent reference computations shared by the integration tests.
//!
//! Nothing here calls into the library's numerics: linear systems go through
//! nalgebra, eigenvalues through characteristic-polynomial roots, integrals
//! through Gauss-Legendre quadrature.

use nalgebra::{DMatrix, DVector};

/// 20-point Gauss-Legendre nodes and weights on [-1, 1].
const GL_NODES: [(f64, f64); 10] = [
    (0.076_526_521_133_497_33, 0.152_753_387_130_725_85),
    (0.227_785_851_141_645_08, 0.149_172_986_472_603_75),
    (0.373_706_088_715_419_56, 0.142_096_109_318_382_05),
    (0.510_867_001_950_827_1, 0.131_688_638_449_176_63),
    (0.636_053_680_726_515_0, 0.118_194_531_961_518_42),
    (0.746_331_906_460_150_8, 0.101_930_119_817_240_44),
    (0.839_116_971_822_218_8, 0.083_276_741_576_704_75),
    (0.912_234_428_251_326_0, 0.062_672_048_334_109_06),
    (0.963_971_927_277_913_8, 0.040_601_429_800_386_94),
    (0.993_128_599_185_094_9, 0.017_614_007_139_152_12),
];

/// Composite Gauss-Legendre rule with `panels` equal panels.
pub fn quad(f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
    let w = (b - a) / panels as f64;
    let mut total = 0.0;
    for k in 0..panels {
        let mid = a + (k as f64 + 0.5) * w;
        let half = 0.5 * w;
        for &(t, wt) in &GL_NODES {
            total += wt * half * (f(mid - half * t) + f(mid + half * t));
        }
    }
    total
}

/// Root of an increasing function on `[lo, hi]`.
pub fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Coefficients `c_0..c_d` of `det(t I − A) = Σ c_k t^k` by Faddeev-LeVerrier.
pub fn char_poly(a: &[Vec<f64>]) -> Vec<f64> {
    let d = a.len();
    let am = DMatrix::from_fn(d, d, |i, j| a[i][j]);
    let mut c = vec![0.0; d + 1];
    c[d] = 1.0;
    let mut m = DMatrix::<f64>::zeros(d, d);
    for k in 1..=d {
        m = &am * &m + DMatrix::identity(d, d) * c[d - k + 1];
        c[d - k] = -(&am * &m).trace() / k as f64;
    }
    c
}

fn poly_eval(c: &[f64], t: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &v| acc * t + v)
}

/// Eigenvalues of a symmetric matrix as sign changes of its characteristic
/// polynomial, bracketed on a fine scan of the Gershgorin interval and
/// refined by bisection. Assumes simple eigenvalues.
pub fn charpoly_eigenvalues(a: &[Vec<f64>]) -> Vec<f64> {
    let c = char_poly(a);
    let radius = a
        .iter()
        .enumerate()
        .map(|(i, row)| row[i].abs() + row.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, v)| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
        + 1.0;
    let steps = 200_000;
    let mut roots = Vec::new();
    let mut prev_t = -radius;
    let mut prev_v = poly_eval(&c, prev_t);
    for k in 1..=steps {
        let t = -radius + 2.0 * radius * k as f64 / steps as f64;
        let v = poly_eval(&c, t);
        if v == 0.0 {
            roots.push(t);
        } else if prev_v != 0.0 && (v > 0.0) != (prev_v > 0.0) {
            let sign = if v > 0.0 { 1.0 } else { -1.0 };
            roots.push(bisect(|s| sign * poly_eval(&c, s), prev_t, t));
        }
        prev_t = t;
        prev_v = v;
    }
    roots
}

/// Inverse of a 3x3 matrix by cofactors.
pub fn cofactor_inverse3(m: [[f64; 3]; 3]) -> [[f64; 3]; 3] {
    let cof = |r: usize, c: usize| {
        let rows: Vec<usize> = (0..3).filter(|&i| i != r).collect();
        let cols: Vec<usize> = (0..3).filter(|&j| j != c).collect();
        let minor = m[rows[0]][cols[0]] * m[rows[1]][cols[1]] - m[rows[0]][cols[1]] * m[rows[1]][cols[0]];
        if (r + c) % 2 == 0 {
            minor
        } else {
            -minor
        }
    };
    let det: f64 = (0..3).map(|c| m[0][c] * cof(0, c)).sum();
    let mut inv = [[0.0; 3]; 3];
    for (r, row) in inv.iter_mut().enumerate() {
        for (c, v) in row.iter_mut().enumerate() {
            *v = cof(c, r) / det;
        }
    }
    inv
}

/// `Σ φ_j(x_i) φ_l(x_i)` and `Σ φ_j(x_i) y_i` by explicit loops, `φ_j(t) = (t − c)^j`.
pub fn naive_system(xs: &[f64], ys: &[f64], c: f64, kappa: usize) -> (DMatrix<f64>, DVector<f64>) {
    let d = kappa + 1;
    let mut m = DMatrix::zeros(d, d);
    let mut v = DVector::zeros(d);
    for (&x, &y) in xs.iter().zip(ys) {
        for j in 0..d {
            for l in 0..d {
                m[(j, l)] += (x - c).powi(j as i32) * (x - c).powi(l as i32);
            }
            v[j] += (x - c).powi(j as i32) * y;
        }
    }
    (m, v)
}

fn solve(m: &DMatrix<f64>, v: &DVector<f64>) -> Option<DVector<f64>> {
    m.clone().full_piv_lu().solve(v)
}

fn poly(theta: &DVector<f64>, t: f64) -> f64 {
    theta.iter().rev().fold(0.0, |acc, &c| acc * t + c)
}

fn integer_part(v: f64) -> usize {
    (v * (1.0 + 1e-12)).floor() as usize
}

/// Ridge-corrected averaged fit on the points `sel`, centred at `x0`.
fn ridge_fit(xs: &[f64], ys: &[f64], x0: f64, kappa: usize) -> DVector<f64> {
    let n = xs.len();
    if n == 0 {
        return DVector::zeros(kappa + 1);
    }
    let (m, v) = naive_system(xs, ys, x0, kappa);
    let scale = 1.0 / n as f64;
    let mut m = m * scale;
    let v = v * scale;
    let floor = 1.0 / (n as f64).sqrt();
    let lambda = m.clone().symmetric_eigen().eigenvalues.min();
    if lambda <= floor {
        for j in 0..=kappa {
            m[(j, j)] += floor;
        }
    }
    solve(&m, &v).expect("ridge system is invertible")
}

pub enum OracleGrid {
    Arith(f64),
    Geom(f64),
}

/// Exhaustive evaluation of the symmetric rule: returns the selected
/// bandwidth and estimate. Every test inequality is re-evaluated from the
/// definition `|⟨f̂_h − f̂_h', φ_j⟩_h'| ≤ σ ‖φ_j‖_h' T_{n,h',h}` with the
/// averaged scalar product, summing over the points of each window.
pub fn oracle_symmetric(
    xs: &[f64],
    ys: &[f64],
    x0: f64,
    kappa: usize,
    p: f64,
    grid: &OracleGrid,
    sigma: f64,
    slack: f64,
) -> (f64, f64) {
    let n = xs.len();
    let mut d: Vec<f64> = xs.iter().map(|x| (x - x0).abs()).collect();
    d.sort_by(f64::total_cmp);
    let idx: Vec<usize> = match *grid {
        OracleGrid::Arith(a) => (1..=integer_part((n - 2) as f64 / a)).map(|i| (2 + integer_part(i as f64 * a)).min(n)).collect(),
        OracleGrid::Geom(a) => (1..=integer_part((n as f64).ln() / a.ln())).map(|i| integer_part(a.powi(i as i32)).clamp(1, n)).collect(),
    };
    let mut hs: Vec<f64> = idx.iter().map(|&i| d[i - 1]).collect();
    hs.sort_by(f64::total_cmp);
    hs.dedup();

    let window = |h: f64| -> (Vec<f64>, Vec<f64>) {
        xs.iter().zip(ys).filter(|(x, _)| (*x - x0).abs() <= h).map(|(x, y)| (*x, *y)).unzip()
    };
    let fits: Vec<DVector<f64>> = hs
        .iter()
        .map(|&h| {
            let (wx, wy) = window(h);
            ridge_fit(&wx, &wy, x0, kappa)
        })
        .collect();
    let c_kappa = 1.0 + ((kappa + 1) as f64).sqrt();
    let c_p = 8.0 * (1.0 + 2.0 * p);
    for g in (0..hs.len()).rev() {
        let n_h = window(hs[g]).0.len() as f64;
        let mut ok = true;
        'sub: for gp in 0..g {
            let (wx, _) = window(hs[gp]);
            let n_hp = wx.len() as f64;
            let second = match *grid {
                OracleGrid::Arith(a) => ((n as f64).ln() / (n_h - a)).sqrt(),
                OracleGrid::Geom(a) => ((1.0 + a) * (n as f64).ln() / n_h).sqrt(),
            };
            let t = c_kappa * (c_p * n_h.ln() / n_hp).sqrt() + second;
            for j in 0..=kappa {
                let mut stat = 0.0;
                let mut scale = 0.0;
                let mut norm = 0.0;
                for &x in &wx {
                    let phi = (x - x0).powi(j as i32);
                    let a = poly(&fits[g], x - x0) * phi;
                    let b = poly(&fits[gp], x - x0) * phi;
                    stat += a - b;
                    scale += a.abs() + b.abs();
                    norm += phi * phi;
                }
                stat /= n_hp;
                scale /= n_hp;
                norm = (norm / n_hp).sqrt();
                if stat.abs() > sigma * norm * t + slack * scale {
                    ok = false;
                    break 'sub;
                }
            }
        }
        if ok {
            return (hs[g], fits[g][0]);
        }
    }
    (hs[0], fits[0][0])
}

/// Exhaustive evaluation of the non-symmetric interval rule: returns the
/// selected `(lo, hi)` and estimate. Candidates come from the seed block of
/// the `m` nearest points and the geometric endpoint offsets; each
/// `(F_{I,J})_j = ⟨f̂_I − f̂_J, φ_j⟩_J / ‖φ_j‖_J` is summed point by point.
pub fn oracle_interval(
    xs_unsorted: &[f64],
    ys_unsorted: &[f64],
    x: f64,
    kappa: usize,
    a: f64,
    m: usize,
    sigma: f64,
    literal: bool,
    slack: f64,
) -> ((f64, f64), f64) {
    let mut pts: Vec<(f64, f64)> = xs_unsorted.iter().copied().zip(ys_unsorted.iter().copied()).collect();
    pts.sort_by(|p, q| p.0.total_cmp(&q.0));
    let xs: Vec<f64> = pts.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = pts.iter().map(|p| p.1).collect();
    let n = xs.len();

    // seed: m nearest points (continuous data, so no ties)
    let mut by_dist: Vec<usize> = (0..n).collect();
    by_dist.sort_by(|&i, &j| (xs[i] - x).abs().total_cmp(&(xs[j] - x).abs()));
    let first = *by_dist[..m].iter().min().unwrap() + 1;
    let last = *by_dist[..m].iter().max().unwrap() + 1;

    let offsets = |limit: usize| -> Vec<usize> {
        (0..=integer_part((limit as f64).ln() / a.ln())).map(|i| integer_part(a.powi(i as i32)).max(1)).collect()
    };
    let mut lefts: Vec<usize> = offsets(first + 1).into_iter().map(|o| (first + 1).saturating_sub(o).max(1)).collect();
    let mut rights: Vec<usize> = offsets(n - last + 1).into_iter().map(|o| (last - 1 + o).min(n)).collect();
    lefts.sort_unstable();
    lefts.dedup();
    rights.sort_unstable();
    rights.dedup();

    let mut cands: Vec<(usize, usize)> = Vec::new();
    for &l in &lefts {
        for &r in &rights {
            cands.push((l - 1, r - 1));
        }
    }
    let fit = |(s, e): (usize, usize)| {
        let (mm, v) = naive_system(&xs[s..=e], &ys[s..=e], x, kappa);
        solve(&mm, &v).expect("raw system is invertible")
    };
    cands.sort_by(|p, q| {
        let (cp, cq) = (p.1 - p.0, q.1 - q.0);
        cq.cmp(&cp)
            .then((xs[q.1] - xs[q.0]).total_cmp(&(xs[p.1] - xs[p.0])))
            .then(xs[p.0].total_cmp(&xs[q.0]))
    });
    let c_kappa = 1.0 + ((kappa + 1) as f64).sqrt();
    for &(s, e) in &cands {
        let theta_i = fit((s, e));
        let n_i = (e - s + 1) as f64;
        let mut ok = true;
        'sub: for &(sj, ej) in &cands {
            if sj < s || ej > e || (sj, ej) == (s, e) {
                continue;
            }
            let theta_j = fit((sj, ej));
            let n_j = (ej - sj + 1) as f64;
            let first = sigma * c_kappa * n_i.ln().sqrt();
            let second = (1.0 + a).sqrt() * ((n_j / n_i) * (n as f64).ln()).sqrt();
            let t = if literal { first + second } else { first + sigma * second };
            for j in 0..=kappa {
                let mut stat = 0.0;
                let mut scale = 0.0;
                let mut norm = 0.0;
                for &xi in &xs[sj..=ej] {
                    let phi = (xi - x).powi(j as i32);
                    let pa = poly(&theta_i, xi - x) * phi;
                    let pb = poly(&theta_j, xi - x) * phi;
                    stat += pa - pb;
                    scale += pa.abs() + pb.abs();
                    norm += phi * phi;
                }
                if norm == 0.0 {
                    continue;
                }
                let norm = norm.sqrt();
                if (stat / norm).abs() > t + slack * scale / norm {
                    ok = false;
                    break 'sub;
                }
            }
        }
        if ok {
            return ((xs[s], xs[e]), theta_i[0]);
        }
    }
    unreachable!("the seed interval has no strict sub-interval")
}
