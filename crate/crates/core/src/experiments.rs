//! Simulation drivers: whole-curve estimation, Monte Carlo risk, empirical
//! rate exponents, design-count concentration and the adaptation gap.
//!
//! Replication `i` always uses dataset seed `seed_base + i`. Work runs on a
//! rayon pool of `jobs` threads, and every result is merged by replication
//! and point index, so reports do not depend on the thread count.

use rayon::prelude::*;

use crate::bandwidth::{
    build_grid, estimate_sigma, select_bandwidth_symmetric, select_interval, GridKind, SelectionResult,
    ThresholdForm,
};
use crate::error::{Error, Result};
use crate::io::fmt_f64;
use crate::locpoly::SampleSet;
use crate::rvdesign::{DesignSpec, ModulusSpec, RateModel};
use crate::testbed::{synthesize, DatasetSpec, NoiseLevel, TargetFunction};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridFamily {
    Arith,
    Geom,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Selector {
    /// Non-symmetric intervals around a seed block of `m` points.
    Interval,
    /// Symmetric windows over a bandwidth grid.
    Symmetric(GridFamily),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SigmaMode {
    Known,
    Estimated,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimatorParams {
    pub kappa: usize,
    pub a: f64,
    pub m: usize,
    pub selector: Selector,
    /// Loss exponent: enters `C_p` of the symmetric threshold and the risk.
    pub p: f64,
    pub sigma_mode: SigmaMode,
    pub threshold_form: ThresholdForm,
}

impl Default for EstimatorParams {
    fn default() -> Self {
        Self {
            kappa: 2,
            a: 1.05,
            m: 25,
            selector: Selector::Interval,
            p: 2.0,
            sigma_mode: SigmaMode::Estimated,
            threshold_form: ThresholdForm::Scaled,
        }
    }
}

impl EstimatorParams {
    pub fn validate(&self) -> Result<()> {
        if self.kappa > crate::linalg::MAX_DEGREE {
            return Err(Error::Precondition(format!("kappa = {} exceeds {}", self.kappa, crate::linalg::MAX_DEGREE)));
        }
        if !(self.p >= 1.0) || !self.p.is_finite() {
            return Err(Error::Precondition(format!("loss exponent p = {} must be >= 1", self.p)));
        }
        match self.selector {
            Selector::Interval => {
                if !(self.a > 1.0) {
                    return Err(Error::Precondition(format!("interval grid needs a > 1, got {}", self.a)));
                }
                if self.m < self.kappa + 1 {
                    return Err(Error::Precondition(format!(
                        "seed size m = {} must be at least kappa + 1 = {}",
                        self.m,
                        self.kappa + 1
                    )));
                }
            }
            Selector::Symmetric(GridFamily::Arith) if !(self.a >= 1.0) => {
                return Err(Error::Precondition(format!("arithmetic grid needs a >= 1, got {}", self.a)));
            }
            Selector::Symmetric(GridFamily::Geom) if !(self.a > 1.0) => {
                return Err(Error::Precondition(format!("geometric grid needs a > 1, got {}", self.a)));
            }
            _ => {}
        }
        Ok(())
    }

    fn grid_kind(&self, family: GridFamily) -> GridKind {
        match family {
            GridFamily::Arith => GridKind::Arith { a: self.a },
            GridFamily::Geom => GridKind::Geom { a: self.a },
        }
    }
}

/// Runs the configured selector at `x`.
pub fn select_at(data: &SampleSet, x: f64, params: &EstimatorParams, sigma: f64) -> Result<SelectionResult> {
    match params.selector {
        Selector::Interval => select_interval(data, x, params.kappa, params.a, params.m, sigma, params.threshold_form),
        Selector::Symmetric(family) => {
            let grid = build_grid(data, x, params.grid_kind(family))?;
            select_bandwidth_symmetric(data, x, params.kappa, params.p, &grid, sigma)
        }
    }
}

/// `j / k` for `j = 0..=k`.
pub fn eval_grid(k: usize) -> Vec<f64> {
    (0..=k).map(|j| j as f64 / k.max(1) as f64).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub dataset: DatasetSpec,
    pub params: EstimatorParams,
    pub eval_points: Vec<f64>,
    pub replications: usize,
    pub seed_base: u64,
    /// Worker threads; 0 uses the global pool.
    pub jobs: usize,
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        self.dataset.validate()?;
        self.params.validate()?;
        if self.replications == 0 {
            return Err(Error::Precondition("replications must be >= 1".into()));
        }
        if let Some(x) = self.eval_points.iter().find(|x| !(0.0..=1.0).contains(*x)) {
            return Err(Error::Precondition(format!("evaluation point {x} outside [0, 1]")));
        }
        Ok(())
    }

    pub fn replication_seed(&self, i: usize) -> u64 {
        self.seed_base.wrapping_add(i as u64)
    }
}

/// Runs `f` on a pool of `jobs` threads (the global pool when `jobs == 0`).
pub fn with_pool<T: Send>(jobs: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    if jobs == 0 {
        return Ok(f());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::Precondition(format!("cannot start {jobs} worker threads: {e}")))?;
    Ok(pool.install(f))
}

/// One evaluation point of an estimated curve. A failed point keeps its
/// message in `error` and NaN numerics.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveRow {
    pub x: f64,
    pub estimate: f64,
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
    pub tested: usize,
    pub lambda_min: f64,
    pub regularized: bool,
    pub omega_event: bool,
    pub fallback: bool,
    pub error: Option<String>,
}

impl CurveRow {
    fn from_result(x: f64, res: Result<SelectionResult>) -> Self {
        match res {
            Ok(sel) => {
                let (lo, hi) = sel.window.bounds();
                CurveRow {
                    x,
                    estimate: sel.fit.estimate,
                    lo,
                    hi,
                    count: sel.fit.count,
                    tested: sel.tested,
                    lambda_min: sel.fit.lambda_min,
                    regularized: sel.fit.regularized,
                    omega_event: sel.fit.omega_event,
                    fallback: sel.fallback,
                    error: None,
                }
            }
            Err(e) => CurveRow {
                x,
                estimate: f64::NAN,
                lo: f64::NAN,
                hi: f64::NAN,
                count: 0,
                tested: 0,
                lambda_min: f64::NAN,
                regularized: false,
                omega_event: false,
                fallback: false,
                error: Some(e.to_string()),
            },
        }
    }
}

/// Noise level handed to the selector.
pub fn selector_sigma(data: &SampleSet, known: f64, mode: SigmaMode) -> Result<f64> {
    match mode {
        SigmaMode::Known => Ok(known),
        SigmaMode::Estimated => estimate_sigma(data),
    }
}

/// Estimates at every point; per-point failures are recorded in the rows.
pub fn estimate_curve(data: &SampleSet, sigma: f64, params: &EstimatorParams, eval_points: &[f64]) -> Vec<CurveRow> {
    eval_points
        .par_iter()
        .map(|&x| CurveRow::from_result(x, select_at(data, x, params, sigma)))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurveRun {
    pub replication: usize,
    pub seed: u64,
    /// Noise level used to synthesize the data.
    pub sigma_true: f64,
    /// Noise level handed to the selector.
    pub sigma_used: f64,
    pub rows: Vec<CurveRow>,
}

/// Synthesizes replication `i` and estimates the curve on it.
pub fn run_replication(cfg: &RunConfig, i: usize) -> Result<CurveRun> {
    let seed = cfg.replication_seed(i);
    let ds = synthesize(&cfg.dataset.with_seed(seed))?;
    let sigma_used = selector_sigma(&ds.samples, ds.sigma, cfg.params.sigma_mode)?;
    Ok(CurveRun {
        replication: i,
        seed,
        sigma_true: ds.sigma,
        sigma_used,
        rows: estimate_curve(&ds.samples, sigma_used, &cfg.params, &cfg.eval_points),
    })
}

pub fn run_curve(cfg: &RunConfig) -> Result<Vec<CurveRun>> {
    cfg.validate()?;
    with_pool(cfg.jobs, || {
        (0..cfg.replications)
            .into_par_iter()
            .map(|i| run_replication(cfg, i))
            .collect::<Result<Vec<_>>>()
    })?
}

#[derive(Debug, Clone, PartialEq)]
pub struct RiskReport {
    pub p: f64,
    pub eval_points: Vec<f64>,
    pub truth: Vec<f64>,
    /// `((1/R) Σ |f̂ − f|^p)^{1/p}` over successful replications.
    pub risks: Vec<f64>,
    /// `(1/R) Σ |f̂ − f|^p`.
    pub power_means: Vec<f64>,
    /// Standard error of `power_means`.
    pub power_stderr: Vec<f64>,
    pub failures: Vec<usize>,
    pub replications: usize,
    pub seed_base: u64,
    /// `errors[i][k] = f̂ − f` for replication `i` at point `k` (NaN on failure).
    pub errors: Vec<Vec<f64>>,
}

/// Empirical pointwise `p`-risk over `cfg.replications` fresh datasets.
///
/// Per-point sums run over sorted terms, so the report is also invariant
/// to the order in which replications are listed.
pub fn monte_carlo_risk(cfg: &RunConfig, truth: &[f64]) -> Result<RiskReport> {
    cfg.validate()?;
    if cfg.replications < 2 {
        return Err(Error::Precondition("Monte Carlo risk needs at least 2 replications".into()));
    }
    if truth.len() != cfg.eval_points.len() {
        return Err(Error::Precondition(format!(
            "{} true values for {} evaluation points",
            truth.len(),
            cfg.eval_points.len()
        )));
    }
    let runs = run_curve(cfg)?;
    let errors: Vec<Vec<f64>> = runs
        .iter()
        .map(|run| run.rows.iter().zip(truth).map(|(r, t)| r.estimate - t).collect())
        .collect();
    Ok(summarize_errors(cfg, truth, errors))
}

fn summarize_errors(cfg: &RunConfig, truth: &[f64], errors: Vec<Vec<f64>>) -> RiskReport {
    let p = cfg.params.p;
    let k = cfg.eval_points.len();
    let mut risks = Vec::with_capacity(k);
    let mut power_means = Vec::with_capacity(k);
    let mut power_stderr = Vec::with_capacity(k);
    let mut failures = Vec::with_capacity(k);
    for j in 0..k {
        let mut terms: Vec<f64> = errors.iter().map(|e| e[j]).filter(|e| e.is_finite()).map(|e| e.abs().powf(p)).collect();
        terms.sort_by(f64::total_cmp);
        failures.push(errors.len() - terms.len());
        let r = terms.len() as f64;
        let mean = terms.iter().sum::<f64>() / r;
        let var = if terms.len() > 1 {
            terms.iter().map(|t| (t - mean) * (t - mean)).sum::<f64>() / (r - 1.0)
        } else {
            f64::NAN
        };
        risks.push(mean.powf(1.0 / p));
        power_means.push(mean);
        power_stderr.push((var / r).sqrt());
    }
    RiskReport {
        p,
        eval_points: cfg.eval_points.clone(),
        truth: truth.to_vec(),
        risks,
        power_means,
        power_stderr,
        failures,
        replications: errors.len(),
        seed_base: cfg.seed_base,
        errors,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    pub stderr: f64,
    /// Points that entered the fit.
    pub used: usize,
}

/// Regressor of the rate fit: `log(log n / n)` or `log(1/n)`.
pub fn rate_regressor(n: f64, use_log_n: bool) -> f64 {
    if use_log_n {
        (n.ln() / n).ln()
    } else {
        -n.ln()
    }
}

/// Least-squares slope of `log risk` on [`rate_regressor`].
///
/// Needs at least four distinct `n` spanning a decade. Zero or non-finite
/// risks are dropped with a warning.
pub fn rate_exponent_fit(points: &[(f64, f64)], use_log_n: bool) -> Result<SlopeFit> {
    let mut ns: Vec<f64> = points.iter().map(|p| p.0).collect();
    ns.sort_by(f64::total_cmp);
    ns.dedup();
    if ns.len() < 4 {
        return Err(Error::Precondition(format!(
            "rate fit needs at least 4 distinct sample sizes, got {}",
            ns.len()
        )));
    }
    if ns[0] <= 1.0 || ns[ns.len() - 1] / ns[0] < 10.0 {
        return Err(Error::Precondition("rate fit sample sizes must exceed 1 and span a decade".into()));
    }
    let used: Vec<(f64, f64)> = points
        .iter()
        .filter(|&&(n, r)| {
            let ok = r > 0.0 && r.is_finite();
            if !ok {
                log::warn!("dropping risk {r} at n = {n} from the rate fit");
            }
            ok
        })
        .map(|&(n, r)| (rate_regressor(n, use_log_n), r.ln()))
        .collect();
    if used.len() < 3 {
        return Err(Error::Precondition(format!(
            "only {} positive risks left for the rate fit",
            used.len()
        )));
    }
    let k = used.len() as f64;
    let mx = used.iter().map(|u| u.0).sum::<f64>() / k;
    let my = used.iter().map(|u| u.1).sum::<f64>() / k;
    let sxx: f64 = used.iter().map(|u| (u.0 - mx) * (u.0 - mx)).sum();
    let sxy: f64 = used.iter().map(|u| (u.0 - mx) * (u.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = used.iter().map(|u| (u.1 - intercept - slope * u.0).powi(2)).sum();
    Ok(SlopeFit {
        slope,
        intercept,
        stderr: (sse / (k - 2.0) / sxx).sqrt(),
        used: used.len(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateRow {
    pub n: usize,
    pub risk: f64,
    pub power_stderr: f64,
    pub failures: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateReport {
    pub x0: f64,
    pub target: TargetFunction,
    pub rows: Vec<RateRow>,
    pub fit: SlopeFit,
    pub use_log_n: bool,
    /// `s / (1 + 2s + β)` when the target is a Hölder cusp.
    pub theoretical: Option<f64>,
}

/// Risk at `x0` for each sample size, then the log-log slope.
pub fn rate_study(template: &RunConfig, ns: &[usize], x0: f64, use_log_n: bool) -> Result<RateReport> {
    let mut distinct = ns.to_vec();
    distinct.sort_unstable();
    distinct.dedup();
    if distinct.len() < 4 {
        return Err(Error::Precondition(format!(
            "rate study needs at least 4 distinct sample sizes, got {}",
            distinct.len()
        )));
    }
    let truth = template.dataset.target.eval(x0);
    let mut rows = Vec::with_capacity(ns.len());
    for &n in ns {
        let mut cfg = template.clone();
        cfg.dataset.n = n;
        cfg.eval_points = vec![x0];
        let rep = monte_carlo_risk(&cfg, &[truth])?;
        rows.push(RateRow {
            n,
            risk: rep.risks[0],
            power_stderr: rep.power_stderr[0],
            failures: rep.failures[0],
        });
    }
    let points: Vec<(f64, f64)> = rows.iter().map(|r| (r.n as f64, r.risk)).collect();
    let fit = rate_exponent_fit(&points, use_log_n)?;
    let theoretical = match template.dataset.target {
        TargetFunction::HolderCusp { s, .. } => Some(s / (1.0 + 2.0 * s + template.dataset.design.beta)),
        _ => None,
    };
    Ok(RateReport {
        x0,
        target: template.dataset.target.clone(),
        rows,
        fit,
        use_log_n,
        theoretical,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConcentrationRow {
    pub epsilon: f64,
    pub exceedances: usize,
    pub frequency: f64,
    /// `min(1, 2 exp(−ε² n F_ν(h) / (1 + ε/3)))`.
    pub bound: f64,
    /// Binomial standard error at the bound, `√(b(1−b)/R)`.
    pub stderr: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConcentrationReport {
    pub n: usize,
    pub h: f64,
    pub replications: usize,
    /// `n F_ν(h)`.
    pub n_f_nu: f64,
    pub rows: Vec<ConcentrationRow>,
}

pub const DEFAULT_EPSILONS: [f64; 3] = [0.1, 0.2, 0.5];

/// Frequency of `|N_{n,h} / (2n F_ν(h)) − 1| > ε` against the Bernstein bound.
pub fn concentration_check(
    design: &DesignSpec,
    h: f64,
    n: usize,
    replications: usize,
    seed: u64,
    epsilons: &[f64],
    jobs: usize,
) -> Result<ConcentrationReport> {
    let n_f_nu = n as f64 * design.f_nu(h)?;
    if !(n_f_nu >= 1.0) {
        return Err(Error::Precondition(format!("n F_nu(h) = {n_f_nu} must be >= 1")));
    }
    if replications == 0 {
        return Err(Error::Precondition("replications must be >= 1".into()));
    }
    let (lo, hi) = (design.x0 - h, design.x0 + h);
    let ratios: Vec<f64> = with_pool(jobs, || {
        (0..replications)
            .into_par_iter()
            .map(|i| {
                let xs = design.sample(n, seed.wrapping_add(i as u64));
                let count = xs.partition_point(|&x| x <= hi) - xs.partition_point(|&x| x < lo);
                count as f64 / (2.0 * n_f_nu)
            })
            .collect()
    })?;
    let r = replications as f64;
    let rows = epsilons
        .iter()
        .map(|&epsilon| {
            let exceedances = ratios.iter().filter(|&&q| (q - 1.0).abs() > epsilon).count();
            let frequency = exceedances as f64 / r;
            let bound = (2.0 * (-epsilon * epsilon / (1.0 + epsilon / 3.0) * n_f_nu).exp()).min(1.0);
            let stderr = (bound * (1.0 - bound) / r).sqrt();
            ConcentrationRow {
                epsilon,
                exceedances,
                frequency,
                bound,
                stderr,
                pass: frequency <= bound + 3.0 * stderr,
            }
        })
        .collect();
    Ok(ConcentrationReport {
        n,
        h,
        replications,
        n_f_nu,
        rows,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct GapConfig {
    pub s1: f64,
    pub r1: f64,
    pub s2: f64,
    pub r2: f64,
    pub design: DesignSpec,
    pub sigma: f64,
    pub ns: Vec<usize>,
    pub replications: usize,
    pub seed_base: u64,
    pub params: EstimatorParams,
    pub jobs: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GapRow {
    pub class: usize,
    pub s: f64,
    pub r: f64,
    pub n: usize,
    pub risk: f64,
    /// Minimax rate `ψ_{n,ω}`.
    pub psi: f64,
    /// Adaptive rate `r_{n,ω}`.
    pub rate: f64,
    pub risk_over_psi: f64,
    pub risk_over_rate: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GapReport {
    pub rows: Vec<GapRow>,
}

impl GapReport {
    pub fn class_rows(&self, class: usize) -> Vec<GapRow> {
        self.rows.iter().filter(|r| r.class == class).copied().collect()
    }

    /// Least-squares slope of `log(risk/ψ)` against `log n` for one class.
    pub fn psi_trend(&self, class: usize) -> f64 {
        let pts: Vec<(f64, f64)> = self
            .class_rows(class)
            .iter()
            .map(|r| ((r.n as f64).ln(), r.risk_over_psi.ln()))
            .collect();
        ls_slope(&pts)
    }

    /// `max / min` of `risk / r_{n,ω}` for one class.
    pub fn rate_spread(&self, class: usize) -> f64 {
        let v: Vec<f64> = self.class_rows(class).iter().map(|r| r.risk_over_rate).collect();
        let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let min = v.iter().copied().fold(f64::INFINITY, f64::min);
        max / min
    }
}

fn ls_slope(pts: &[(f64, f64)]) -> f64 {
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    sxy / sxx
}

/// Risk of the adaptive estimator at `r_i |x − x0|^{s_i}`, normalised by
/// the minimax rate `ψ_{n,i}` and by the adaptive rate `r_{n,i}`.
///
/// Both rows are representative functions of their classes, not the
/// supremum over the class.
pub fn adaptation_gap_report(cfg: &GapConfig) -> Result<GapReport> {
    if !(cfg.s1 <= cfg.s2) || !(cfg.r2 <= cfg.r1) {
        return Err(Error::Precondition(format!(
            "class pair needs s1 <= s2 and r2 <= r1, got s = ({}, {}), r = ({}, {})",
            cfg.s1, cfg.s2, cfg.r1, cfg.r2
        )));
    }
    let x0 = cfg.design.x0;
    let mut rows = Vec::new();
    for (class, s, r) in [(1, cfg.s1, cfg.r1), (2, cfg.s2, cfg.r2)] {
        let target = TargetFunction::HolderCusp { s, x0, r };
        let truth = target.eval(x0);
        let model = if cfg.sigma > 0.0 {
            Some(RateModel::new(ModulusSpec::new(s, r, 0.0)?, cfg.design, cfg.sigma)?)
        } else {
            None
        };
        for &n in &cfg.ns {
            let run = RunConfig {
                dataset: DatasetSpec {
                    target: target.clone(),
                    design: cfg.design,
                    n,
                    noise: NoiseLevel::Sigma(cfg.sigma),
                    seed: cfg.seed_base,
                },
                params: cfg.params,
                eval_points: vec![x0],
                replications: cfg.replications,
                seed_base: cfg.seed_base,
                jobs: cfg.jobs,
            };
            let risk = monte_carlo_risk(&run, &[truth])?.risks[0];
            let (psi, rate) = match &model {
                Some(m) => (m.theoretical_rate(n as f64, false)?, m.theoretical_rate(n as f64, true)?),
                None => (f64::NAN, f64::NAN),
            };
            let ratio = |den: f64| if risk == 0.0 { 0.0 } else { risk / den };
            rows.push(GapRow {
                class,
                s,
                r,
                n,
                risk,
                psi,
                rate,
                risk_over_psi: ratio(psi),
                risk_over_rate: ratio(rate),
            });
        }
    }
    Ok(GapReport { rows })
}

fn flag(b: bool) -> &'static str {
    if b {
        "1"
    } else {
        "0"
    }
}

/// Columns: `x,estimate,lo,hi,count,tested,lambda_min,regularized,omega_event,fallback,error`.
pub fn curve_csv(rows: &[CurveRow]) -> String {
    let mut out = String::from("x,estimate,lo,hi,count,tested,lambda_min,regularized,omega_event,fallback,error\n");
    for r in rows {
        let err = r.error.as_deref().unwrap_or("").replace([',', '\n'], ";");
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{}\n",
            fmt_f64(r.x),
            fmt_f64(r.estimate),
            fmt_f64(r.lo),
            fmt_f64(r.hi),
            r.count,
            r.tested,
            fmt_f64(r.lambda_min),
            flag(r.regularized),
            flag(r.omega_event),
            flag(r.fallback),
            err
        ));
    }
    out
}

/// Columns: `x,truth,risk,power_mean,power_stderr,replications,failures`.
pub fn risk_csv(rep: &RiskReport) -> String {
    let mut out = String::from("x,truth,risk,power_mean,power_stderr,replications,failures\n");
    for k in 0..rep.eval_points.len() {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            fmt_f64(rep.eval_points[k]),
            fmt_f64(rep.truth[k]),
            fmt_f64(rep.risks[k]),
            fmt_f64(rep.power_means[k]),
            fmt_f64(rep.power_stderr[k]),
            rep.replications,
            rep.failures[k]
        ));
    }
    out
}

/// Columns: `n,regressor,risk,power_stderr,failures`.
pub fn rate_csv(rep: &RateReport) -> String {
    let mut out = String::from("n,regressor,risk,power_stderr,failures\n");
    for r in &rep.rows {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            r.n,
            fmt_f64(rate_regressor(r.n as f64, rep.use_log_n)),
            fmt_f64(r.risk),
            fmt_f64(r.power_stderr),
            r.failures
        ));
    }
    out
}

/// Columns: `epsilon,exceedances,replications,frequency,bound,stderr,pass`.
pub fn concentration_csv(rep: &ConcentrationReport) -> String {
    let mut out = String::from("epsilon,exceedances,replications,frequency,bound,stderr,pass\n");
    for r in &rep.rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            fmt_f64(r.epsilon),
            r.exceedances,
            rep.replications,
            fmt_f64(r.frequency),
            fmt_f64(r.bound),
            fmt_f64(r.stderr),
            flag(r.pass)
        ));
    }
    out
}

/// Columns: `class,s,r,n,risk,psi,rate,risk_over_psi,risk_over_rate`.
pub fn gap_csv(rep: &GapReport) -> String {
    let mut out = String::from("class,s,r,n,risk,psi,rate,risk_over_psi,risk_over_rate\n");
    for r in &rep.rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            r.class,
            fmt_f64(r.s),
            fmt_f64(r.r),
            r.n,
            fmt_f64(r.risk),
            fmt_f64(r.psi),
            fmt_f64(r.rate),
            fmt_f64(r.risk_over_psi),
            fmt_f64(r.risk_over_rate)
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn linear_config(points: Vec<f64>) -> RunConfig {
        RunConfig {
            dataset: DatasetSpec {
                target: TargetFunction::Polynomial(vec![0.5, -1.5]),
                design: DesignSpec::uniform(0.5).unwrap(),
                n: 300,
                noise: NoiseLevel::Rsnr(f64::INFINITY),
                seed: 0,
            },
            params: EstimatorParams {
                kappa: 1,
                m: 10,
                ..EstimatorParams::default()
            },
            eval_points: points,
            replications: 2,
            seed_base: 11,
            jobs: 1,
        }
    }

    #[test]
    fn noiseless_linear_curve() {
        let cfg = linear_config(eval_grid(30));
        for run in run_curve(&cfg).unwrap() {
            for r in &run.rows {
                assert!((r.estimate - (0.5 - 1.5 * r.x)).abs() < 1e-8, "{r:?}");
            }
        }
        let truth: Vec<f64> = cfg.eval_points.iter().map(|x| 0.5 - 1.5 * x).collect();
        let rep = monte_carlo_risk(&cfg, &truth).unwrap();
        assert!(rep.risks.iter().all(|&r| r < 1e-8));
    }

    #[test]
    fn empty_eval_points() {
        let runs = run_curve(&linear_config(vec![])).unwrap();
        assert!(runs.iter().all(|r| r.rows.is_empty()));
    }

    #[test]
    fn rate_fit_planted_exponent() {
        let pts: Vec<(f64, f64)> = [500.0, 1e3, 4e3, 1.6e4, 6.4e4]
            .iter()
            .map(|&n: &f64| (n, 3.0 * (n.ln() / n).powf(0.25)))
            .collect();
        let fit = rate_exponent_fit(&pts, true).unwrap();
        assert!((fit.slope - 0.25).abs() < 1e-12);
        assert!(rate_exponent_fit(&pts[..2], true).is_err());
    }

    #[test]
    fn concentration_full_window() {
        let d = DesignSpec::uniform(0.5).unwrap();
        let rep = concentration_check(&d, 0.5, 200, 20, 1, &DEFAULT_EPSILONS, 1).unwrap();
        assert!(rep.rows.iter().all(|r| r.exceedances == 0 && r.pass));
    }

    #[test]
    fn pool_matches_serial() {
        let mut cfg = linear_config(eval_grid(10));
        cfg.dataset.noise = NoiseLevel::Sigma(0.3);
        let serial = run_curve(&cfg).unwrap();
        cfg.jobs = 3;
        assert_eq!(run_curve(&cfg).unwrap(), serial);
    }
}
