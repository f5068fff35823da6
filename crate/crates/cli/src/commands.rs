use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};

use adalopo::experiments::{
    adaptation_gap_report, concentration_check, concentration_csv, curve_csv, estimate_curve, eval_grid, gap_csv,
    monte_carlo_risk, rate_csv, rate_study, risk_csv, selector_sigma, with_pool, CurveRow, GapConfig, RunConfig,
    SigmaMode,
};
use adalopo::io::{dataset_provenance, fmt_f64, read_samples_csv, sidecar_path, write_atomic, write_samples_csv, Provenance};
use adalopo::testbed::{sd_grid, synthesize, TargetFunction};

use crate::settings::{Command, Settings};

const RATE_NS: [usize; 6] = [500, 1000, 2000, 4000, 8000, 16000];
const GAP_NS: [usize; 4] = [1000, 4000, 16000, 64000];

pub fn run(command: &Command, s: &Settings) -> Result<String> {
    fs::create_dir_all(&s.out).with_context(|| format!("creating output directory {}", s.out.display()))?;
    match command {
        Command::Synth => synth(s),
        Command::Estimate => estimate(s),
        Command::Risk => risk(s),
        Command::Rate => rate(s),
        Command::Concentration => concentration(s),
        Command::Gap => gap(s),
    }
}

fn run_config(s: &Settings) -> Result<RunConfig> {
    Ok(RunConfig {
        dataset: s.dataset()?,
        params: s.params(),
        eval_points: eval_grid(s.eval_grid),
        replications: s.replications,
        seed_base: s.seed,
        jobs: s.jobs,
    })
}

fn synth(s: &Settings) -> Result<String> {
    let spec = s.dataset()?;
    let ds = synthesize(&spec)?;
    let path = s.out.join("dataset.csv");
    write_samples_csv(&path, &ds.samples)?;
    dataset_provenance(&spec, ds.sigma).write(&sidecar_path(&path))?;
    Ok(format!(
        "synth: {} points, sigma {}, seed {} -> {}",
        ds.samples.len(),
        fmt_f64(ds.sigma),
        spec.seed,
        path.display()
    ))
}

fn median(mut v: Vec<f64>) -> f64 {
    v.retain(|x| x.is_finite());
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    v[v.len() / 2]
}

fn estimate(s: &Settings) -> Result<String> {
    let params = s.params();
    params.validate()?;
    let (data, sigma_true, source) = match &s.input {
        Some(path) => {
            let data = read_samples_csv(path)?;
            let side = sidecar_path(path);
            let sigma = if side.exists() {
                Provenance::read(&side)?.get("sigma").and_then(|v| v.parse::<f64>().ok())
            } else {
                None
            };
            (data, sigma, path.display().to_string())
        }
        None => {
            let ds = synthesize(&s.dataset()?)?;
            (ds.samples, Some(ds.sigma), "synthesized".to_string())
        }
    };
    if params.sigma_mode == SigmaMode::Known && sigma_true.is_none() {
        bail!("--sigma known needs the true sigma, but the input has no provenance sidecar with `sigma`");
    }
    let sigma_used = selector_sigma(&data, sigma_true.unwrap_or(f64::NAN), params.sigma_mode)?;
    let points = eval_grid(s.eval_grid);
    let rows: Vec<CurveRow> = with_pool(s.jobs, || estimate_curve(&data, sigma_used, &params, &points))?;

    let failed = rows.iter().filter(|r| r.error.is_some()).count();
    let fallback = rows.iter().filter(|r| r.fallback).count();
    let regularized = rows.iter().filter(|r| r.regularized).count();
    let median_count = median(rows.iter().map(|r| r.count as f64).collect());
    let median_width = median(rows.iter().map(|r| r.hi - r.lo).collect());

    let mut diag = Provenance::new();
    diag.set("source", &source)
        .set("n", data.len())
        .set("seed", data.seed().map_or("unset".to_string(), |v| v.to_string()))
        .set("sigma_true", sigma_true.map_or("unset".to_string(), fmt_f64))
        .set("sigma_used", fmt_f64(sigma_used))
        .set("sigma_mode", format!("{:?}", params.sigma_mode).to_lowercase())
        .set("selector", format!("{:?}", params.selector).to_lowercase())
        .set("threshold_form", format!("{:?}", params.threshold_form).to_lowercase())
        .set("kappa", params.kappa)
        .set("a", fmt_f64(params.a))
        .set("m", params.m)
        .set("p", fmt_f64(params.p))
        .set("eval_points", rows.len())
        .set("failed_points", failed)
        .set("fallback_points", fallback)
        .set("regularized_points", regularized)
        .set("median_count", median_count)
        .set("median_width", fmt_f64(median_width));

    let csv = s.out.join("estimate.csv");
    write_atomic(&csv, curve_csv(&rows).as_bytes())?;
    diag.write(&s.out.join("estimate.diagnostics"))?;
    Ok(format!(
        "estimate: {} points, {failed} failed, {fallback} fallback, median N {median_count}, median width {:.4} -> {}",
        rows.len(),
        median_width,
        csv.display()
    ))
}

fn risk(s: &Settings) -> Result<String> {
    let cfg = run_config(s)?;
    let truth: Vec<f64> = cfg.eval_points.iter().map(|&x| cfg.dataset.target.eval(x)).collect();
    let rep = monte_carlo_risk(&cfg, &truth)?;
    let path = s.out.join("risk.csv");
    write_report(&path, &representative_header(&cfg.dataset.target), &risk_csv(&rep))?;
    let finite: Vec<f64> = rep.risks.iter().copied().filter(|r| r.is_finite()).collect();
    let mean = finite.iter().sum::<f64>() / finite.len().max(1) as f64;
    let (k_max, max) = rep
        .risks
        .iter()
        .enumerate()
        .filter(|(_, r)| r.is_finite())
        .fold((0, f64::NEG_INFINITY), |acc, (k, &r)| if r > acc.1 { (k, r) } else { acc });
    Ok(format!(
        "risk: p = {}, {} replications, mean risk {:.6}, max {:.6} at x = {:.4} -> {}",
        rep.p,
        rep.replications,
        mean,
        max,
        rep.eval_points.get(k_max).copied().unwrap_or(f64::NAN),
        path.display()
    ))
}

fn rate(s: &Settings) -> Result<String> {
    let cfg = run_config(s)?;
    let ns = s.ns.clone().unwrap_or_else(|| RATE_NS.to_vec());
    let x0 = s.x0.unwrap_or(s.design_x0);
    let rep = rate_study(&cfg, &ns, x0, true)?;
    let path = s.out.join("rate.csv");
    write_report(&path, &representative_header(&cfg.dataset.target), &rate_csv(&rep))?;
    Ok(format!(
        "rate: slope {:.4} +- {:.4} in log(log n / n){} -> {}",
        rep.fit.slope,
        rep.fit.stderr,
        rep.theoretical.map_or(String::new(), |t| format!(", theory {t:.4}")),
        path.display()
    ))
}

fn concentration(s: &Settings) -> Result<String> {
    let design = s.design()?;
    let rep = concentration_check(&design, s.h, s.n, s.replications, s.seed, &s.epsilons, s.jobs)?;
    let path = s.out.join("concentration.csv");
    write_atomic(&path, concentration_csv(&rep).as_bytes())?;
    let passed = rep.rows.iter().filter(|r| r.pass).count();
    Ok(format!(
        "concentration: n F(h) = {:.2}, {passed}/{} cells within bound + 3 se -> {}",
        rep.n_f_nu,
        rep.rows.len(),
        path.display()
    ))
}

fn gap(s: &Settings) -> Result<String> {
    let design = s.design()?;
    let sigma = match s.noise_sigma {
        Some(v) => v,
        None => sd_grid(&TargetFunction::HolderCusp { s: s.s1, x0: design.x0, r: s.r1 }) / s.rsnr,
    };
    let cfg = GapConfig {
        s1: s.s1,
        r1: s.r1,
        s2: s.s2,
        r2: s.r2,
        design,
        sigma,
        ns: s.ns.clone().unwrap_or_else(|| GAP_NS.to_vec()),
        replications: s.replications,
        seed_base: s.seed,
        params: s.params(),
        jobs: s.jobs,
    };
    let rep = adaptation_gap_report(&cfg)?;
    let path = s.out.join("gap.csv");
    let header = format!(
        "# representative functions r|x - x0|^s per class, not the class supremum; sigma = {}\n",
        fmt_f64(sigma)
    );
    write_report(&path, &header, &gap_csv(&rep))?;
    Ok(format!(
        "gap: class 1 log-slope of risk/psi {:.4}, spread of risk/r {:.4} -> {}",
        rep.psi_trend(1),
        rep.rate_spread(1),
        path.display()
    ))
}

fn representative_header(target: &TargetFunction) -> String {
    format!("# empirical risk at the representative target {target}, not a class supremum\n")
}

fn write_report(path: &Path, header: &str, body: &str) -> Result<()> {
    write_atomic(path, format!("{header}{body}").as_bytes())?;
    Ok(())
}
