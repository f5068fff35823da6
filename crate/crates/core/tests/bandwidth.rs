mod common;

use adalopo::bandwidth::*;
use adalopo::locpoly::{SampleSet, Window};
use adalopo::rng::{GaussianStream, UniformStream};
use adalopo::rvdesign::{DesignSpec, ModulusSpec, RateModel};
use adalopo::testbed::{synthesize, DatasetSpec, NoiseLevel, TargetFunction};
use common::{oracle_interval, oracle_symmetric, OracleGrid};
use proptest::prelude::*;

fn samples(xs: Vec<f64>, ys: Vec<f64>) -> SampleSet {
    SampleSet::new(xs, ys, None).unwrap()
}

fn step_data(n: usize, jump: f64, sigma: f64, seed: u64) -> SampleSet {
    let mut u = UniformStream::new(seed, 0);
    let mut g = GaussianStream::new(seed, 1);
    let xs: Vec<f64> = (0..n).map(|_| u.next_open01()).collect();
    let ys = xs.iter().map(|&x| if x < jump { 1.0 } else { 2.0 } + sigma * g.next_standard()).collect();
    samples(xs, ys)
}

fn symmetric_h(res: &SelectionResult) -> f64 {
    match res.window {
        Window::Symmetric { h, .. } => h,
        _ => panic!("expected a symmetric window"),
    }
}

#[test]
fn geometric_grid_size_for_default_sample() {
    assert_eq!(grid_indices(2000, GridKind::Geom { a: 1.05 }).unwrap().len(), (2000f64.ln() / 1.05f64.ln()).floor() as usize);
}

#[test]
fn symmetric_threshold_examples() {
    let e = std::f64::consts::E;
    // C_0 = 2, C_1 = 24, N_h' = N_h = e, Geom a = 1
    let t = threshold_symmetric(e, e, e, 0, 1.0, GridKind::Geom { a: 1.0 }).unwrap();
    assert!((t - (2.0 * (24.0 / e).sqrt() + (2.0 / e).sqrt())).abs() < 1e-14);
    let big = threshold_symmetric(1e3, 1e6, 50.0, 2, 2.0, GridKind::Geom { a: 1.05 }).unwrap();
    let small = threshold_symmetric(1e3, 1e2, 50.0, 2, 2.0, GridKind::Geom { a: 1.05 }).unwrap();
    assert!(big < small);
    // Arith a = 1, N_h = 2, n = e: second term is exactly 1
    let t = threshold_symmetric(e, 2.0, 2.0, 0, 1.0, GridKind::Arith { a: 1.0 }).unwrap();
    assert!((t - 2.0 * (24.0 * 2f64.ln() / 2.0).sqrt() - 1.0).abs() < 1e-14);
}

#[test]
fn symmetric_polynomial_data_keeps_largest_window() {
    let xs: Vec<f64> = (0..80).map(|i| (i as f64 + 0.5) / 80.0).collect();
    let d = samples(xs.clone(), vec![-1.25; 80]);
    let grid = build_grid(&d, 0.3, GridKind::Arith { a: 1.0 }).unwrap();
    let res = select_bandwidth_symmetric(&d, 0.3, 0, 2.0, &grid, 1e-6).unwrap();
    assert_eq!(symmetric_h(&res), *grid.values.last().unwrap());
    assert!((res.estimate() + 1.25).abs() < 1e-12);
}

#[test]
fn symmetric_excludes_a_jump() {
    for seed in 1..=5 {
        let d = step_data(500, 0.6, 0.001, seed);
        let grid = build_grid(&d, 0.5, GridKind::Arith { a: 1.0 }).unwrap();
        let res = select_bandwidth_symmetric(&d, 0.5, 0, 2.0, &grid, 0.001).unwrap();
        let h = symmetric_h(&res);
        let crossing = d.xs().iter().filter(|&&x| x >= 0.6 && (x - 0.5).abs() <= h).count();
        assert_eq!(crossing, 0, "seed {seed}: h = {h}");
        assert!(!res.rejections.is_empty());
        let (oh, oest) = oracle_symmetric(d.xs(), d.ys(), 0.5, 0, 2.0, &OracleGrid::Arith(1.0), 0.001, ROUNDOFF_SLACK);
        assert_eq!(h, oh);
        assert!((res.estimate() - oest).abs() < 1e-9);
    }
}

#[test]
fn interval_excludes_a_jump() {
    for seed in 1..=5 {
        let d = step_data(500, 0.55, 0.01, seed);
        let res = select_interval(&d, 0.5, 1, 1.05, 5, 0.01, ThresholdForm::Scaled).unwrap();
        let Window::Interval { lo, hi, .. } = res.window else { panic!() };
        assert!(hi < 0.55, "seed {seed}: [{lo}, {hi}]");
        assert!(hi > 0.5);
        let ((olo, ohi), oest) = oracle_interval(d.xs(), d.ys(), 0.5, 1, 1.05, 5, 0.01, false, ROUNDOFF_SLACK);
        assert_eq!((lo, hi), (olo, ohi));
        assert!((res.estimate() - oest).abs() < 1e-8 * (1.0 + oest.abs()));
    }
}

#[test]
fn interval_polynomial_data_keeps_widest() {
    let xs: Vec<f64> = (0..300).map(|i| (i as f64 + 0.5) / 300.0).collect();
    let ys = xs.iter().map(|x| 0.5 - x + 3.0 * x * x).collect();
    let d = samples(xs, ys);
    let grid = build_interval_grid(&d, 0.42, 1.05, 25).unwrap();
    let res = select_on_interval_grid(&d, &grid, 2, 1.05, 1e-3, ThresholdForm::Scaled).unwrap();
    assert_eq!(res.tested, 1);
    assert_eq!(res.fit.count, grid.intervals[0].count);
    assert!((res.estimate() - (0.5 - 0.42 + 3.0 * 0.42 * 0.42)).abs() < 1e-9);
}

#[test]
fn minimal_seed_gives_single_interval() {
    let d = samples(vec![0.1, 0.4, 0.9], vec![3.0, -1.0, 0.5]);
    let grid = build_interval_grid(&d, 0.4, 1.05, 3).unwrap();
    assert_eq!(grid.intervals.len(), 1);
    let res = select_interval(&d, 0.4, 2, 1.05, 3, 0.1, ThresholdForm::Scaled).unwrap();
    assert!(!res.fallback);
    assert_eq!(res.tested, 1);
}

#[test]
fn interval_index_example() {
    let xs: Vec<f64> = (1..=16).map(|i| i as f64 / 17.0).collect();
    let d = samples(xs.clone(), vec![0.0; 16]);
    let g = build_interval_grid(&d, 0.5 * (xs[7] + xs[8]), 2.0, 2).unwrap();
    assert_eq!(g.left.iter().map(|i| i + 1).collect::<Vec<_>>(), vec![8, 7, 5, 1]);
    assert_eq!(g.right.iter().map(|i| i + 1).collect::<Vec<_>>(), vec![9, 10, 12, 16]);
    // x on a sample point: the left-closed bracket starts there
    let g = build_interval_grid(&d, xs[5], 2.0, 2).unwrap();
    assert_eq!(g.base_index, Some(5));
}

#[test]
fn default_interval_grid_sizes() {
    let d = synthesize(&DatasetSpec {
        target: TargetFunction::Heavysine,
        design: DesignSpec::uniform(0.5).unwrap(),
        n: 2000,
        noise: NoiseLevel::Rsnr(7.0),
        seed: 4,
    })
    .unwrap()
    .samples;
    let a: f64 = 1.05;
    for x in [0.0, 0.2, 0.5, 0.93, 1.0] {
        let g = build_interval_grid(&d, x, a, 25).unwrap();
        let (first, last) = (g.seed.0 + 1, g.seed.1 + 1);
        let distinct = |limit: usize, place: &dyn Fn(usize) -> usize| {
            let top = ((limit as f64).ln() / a.ln() * (1.0 + 1e-12)).floor() as i32;
            let mut v: Vec<usize> = (0..=top).map(|i| place((a.powi(i) * (1.0 + 1e-12)).floor() as usize)).collect();
            v.sort_unstable();
            v.dedup();
            v.len()
        };
        assert_eq!(g.left.len(), distinct(first + 1, &|o| (first + 1).saturating_sub(o).max(1)));
        assert_eq!(g.right.len(), distinct(2000 - last + 1, &|o| (last - 1 + o).min(2000)));
        assert_eq!(g.intervals.len(), g.left.len() * g.right.len());
    }
}

#[test]
fn noise_estimator_examples() {
    let d = samples((0..10).map(|i| i as f64 / 10.0).collect(), vec![2.0; 10]);
    assert_eq!(estimate_sigma(&d).unwrap(), 0.0);
    let c: f64 = 1.5;
    let d = samples((0..9).map(|i| i as f64 / 9.0).collect(), (0..9).map(|i| if i % 2 == 0 { c } else { -c }).collect());
    assert!((estimate_sigma(&d).unwrap().powi(2) - 2.0 * c * c).abs() < 1e-12);
}

#[test]
fn noise_estimator_monte_carlo() {
    let inside = (1..=200u64)
        .filter(|&seed| {
            let ds = synthesize(&DatasetSpec {
                target: TargetFunction::Polynomial(vec![0.0, 2.0, -1.0]),
                design: DesignSpec::uniform(0.5).unwrap(),
                n: 2000,
                noise: NoiseLevel::Sigma(1.0),
                seed,
            })
            .unwrap();
            let s = estimate_sigma(&ds.samples).unwrap();
            (0.95..=1.05).contains(&s)
        })
        .count();
    assert!(inside >= 190, "{inside}/200");
}

#[test]
fn ideal_bandwidth_tracks_balance_root() {
    let design = DesignSpec::uniform(0.5).unwrap();
    let modulus = ModulusSpec::holder(1.0, 1.0).unwrap();
    let h_det = RateModel::new(modulus, design, 1.0).unwrap().deterministic_bandwidth(1e4, true).unwrap();
    for seed in 1..=100 {
        let xs = design.sample(10_000, seed);
        let d = samples(xs, vec![0.0; 10_000]);
        let ib = ideal_bandwidth(&d, 0.5, &modulus, 1.0, 10_000).unwrap();
        let ratio = ib.h / h_det;
        assert!((1.0 / 1.5..=1.5).contains(&ratio), "seed {seed}: {ratio}");
        assert!((ib.random_rate - (1e4f64.ln() / ib.count as f64).sqrt()).abs() < 1e-15);
    }
    let xs: Vec<f64> = (0..50).map(|i| (i as f64 + 0.5) / 50.0).collect();
    let d = samples(xs, vec![0.0; 50]);
    let huge = ModulusSpec::holder(1.0, 1e12).unwrap();
    assert!((ideal_bandwidth(&d, 0.5, &huge, 1.0, 50).unwrap().h - 0.01).abs() < 1e-15);
}

fn random_instance(seed: u64, n: usize, jump: bool) -> SampleSet {
    let mut u = UniformStream::new(seed, 0);
    let mut g = GaussianStream::new(seed, 1);
    let xs: Vec<f64> = (0..n).map(|_| u.next_open01()).collect();
    let ys = xs
        .iter()
        .map(|&x| (3.0 * x).sin() + if jump && x > 0.6 { 1.0 } else { 0.0 } + 0.1 * g.next_standard())
        .collect();
    samples(xs, ys)
}

#[test]
fn symmetric_matches_exhaustive_oracle() {
    let mut rejected = 0;
    for seed in 0..60u64 {
        let n = 8 + (seed as usize * 7) % 33;
        let d = random_instance(seed, n, seed % 2 == 0);
        let kappa = (seed % 3) as usize;
        let x0 = 0.1 + 0.8 * ((seed * 37 % 100) as f64 / 100.0);
        let sigma = [0.02, 0.1, 0.5][(seed % 3) as usize];
        let (kind, og) = if seed % 2 == 0 {
            (GridKind::Geom { a: 1.3 }, OracleGrid::Geom(1.3))
        } else {
            (GridKind::Arith { a: 1.5 }, OracleGrid::Arith(1.5))
        };
        let grid = build_grid(&d, x0, kind).unwrap();
        let res = select_bandwidth_symmetric(&d, x0, kappa, 2.0, &grid, sigma).unwrap();
        let (h, est) = oracle_symmetric(d.xs(), d.ys(), x0, kappa, 2.0, &og, sigma, ROUNDOFF_SLACK);
        assert_eq!(symmetric_h(&res), h, "seed {seed}");
        assert!((res.estimate() - est).abs() < 1e-9 * (1.0 + est.abs()), "seed {seed}");
        rejected += usize::from(!res.rejections.is_empty());
    }
    assert!(rejected > 5, "only {rejected} instances exercised a rejection");
}

#[test]
fn interval_matches_exhaustive_oracle() {
    let mut rejected = 0;
    for seed in 0..60u64 {
        let n = 6 + (seed as usize * 11) % 35;
        let d = random_instance(seed + 1000, n, seed % 2 == 1);
        let kappa = (seed % 3) as usize;
        let m = (kappa + 1 + (seed as usize % 3)).min(n);
        let x = 0.05 + 0.9 * ((seed * 53 % 100) as f64 / 100.0);
        let sigma = [0.02, 0.1, 0.3][(seed % 3) as usize];
        let literal = seed % 5 == 0;
        let form = if literal { ThresholdForm::FirstTermOnly } else { ThresholdForm::Scaled };
        let res = select_interval(&d, x, kappa, 1.2, m, sigma, form).unwrap();
        let Window::Interval { lo, hi, .. } = res.window else { panic!() };
        let ((olo, ohi), est) = oracle_interval(d.xs(), d.ys(), x, kappa, 1.2, m, sigma, literal, ROUNDOFF_SLACK);
        assert_eq!((lo, hi), (olo, ohi), "seed {seed}");
        assert!((res.estimate() - est).abs() < 1e-7 * (1.0 + est.abs()), "seed {seed}: {} vs {est}", res.estimate());
        rejected += usize::from(!res.rejections.is_empty());
    }
    assert!(rejected > 5, "only {rejected} instances exercised a rejection");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn grid_is_monotone(seed in 0u64..1000, n in 3usize..300, x0 in 0.0..1.0f64, a in 1.01..3.0f64, geom in any::<bool>()) {
        let d = random_instance(seed, n, false);
        let kind = if geom { GridKind::Geom { a } } else { GridKind::Arith { a } };
        if let Ok(g) = build_grid(&d, x0, kind) {
            prop_assert!(g.values.windows(2).all(|w| w[0] < w[1]));
            prop_assert!(g.counts.windows(2).all(|w| w[0] <= w[1]));
        }
    }

    #[test]
    fn symmetric_selection_scale_invariant(seed in 0u64..1000, c in 0.01..100.0f64, kappa in 0usize..3) {
        let d = random_instance(seed, 60, seed % 2 == 0);
        let grid = build_grid(&d, 0.5, GridKind::Geom { a: 1.2 }).unwrap();
        let base = select_bandwidth_symmetric(&d, 0.5, kappa, 2.0, &grid, 0.1).unwrap();
        let scaled = select_bandwidth_symmetric(&d.map_responses(|y| c * y), 0.5, kappa, 2.0, &grid, 0.1 * c).unwrap();
        prop_assert_eq!(base.window, scaled.window);
        prop_assert!(grid.values.contains(&symmetric_h(&base)));
    }

    #[test]
    fn interval_selection_scale_invariant(seed in 0u64..1000, c in 0.01..100.0f64, kappa in 0usize..3) {
        let d = random_instance(seed, 80, seed % 2 == 0);
        let base = select_interval(&d, 0.4, kappa, 1.1, 6, 0.1, ThresholdForm::Scaled).unwrap();
        let scaled = select_interval(&d.map_responses(|y| c * y), 0.4, kappa, 1.1, 6, 0.1 * c, ThresholdForm::Scaled).unwrap();
        prop_assert_eq!(base.window, scaled.window);
    }

    #[test]
    fn noise_estimate_shift_and_scale(seed in 0u64..1000, b in -100.0..100.0f64, c in -10.0..10.0f64) {
        let d = random_instance(seed, 50, true);
        let s = estimate_sigma(&d).unwrap();
        let shifted = estimate_sigma(&d.map_responses(|y| y + b)).unwrap();
        let scaled = estimate_sigma(&d.map_responses(|y| c * y)).unwrap();
        prop_assert!((shifted - s).abs() <= 1e-9 * (1.0 + s));
        prop_assert!((scaled - c.abs() * s).abs() <= 1e-12 * (1.0 + c.abs() * s));
    }

    #[test]
    fn vanishing_noise_on_polynomial_keeps_widest(seed in 0u64..1000, sigma in 1e-8..1e-2f64, kappa in 0usize..3) {
        let mut u = UniformStream::new(seed, 0);
        let xs: Vec<f64> = (0..120).map(|_| u.next_open01()).collect();
        let ys = xs.iter().map(|x| 1.0 - 2.0 * x + if kappa == 2 { x * x } else { 0.0 }).collect();
        let d = samples(xs, ys);
        let k = kappa.max(1);
        let grid = build_interval_grid(&d, 0.5, 1.1, k + 2).unwrap();
        let res = select_on_interval_grid(&d, &grid, k, 1.1, sigma, ThresholdForm::Scaled).unwrap();
        prop_assert_eq!(res.tested, 1);
    }
}
