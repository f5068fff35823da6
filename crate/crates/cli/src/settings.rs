//! Command-line flags, the `key = value` config file, and their merge.
//!
//! A value comes from the flag if given, else from the config file, else
//! from the built-in default. `ADALOPO_SEED` replaces the default seed only.
//! Config keys are the flag names without the leading dashes; `_` and `-`
//! are interchangeable, list values are comma separated.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use adalopo::bandwidth::ThresholdForm;
use adalopo::experiments::{EstimatorParams, GridFamily, Selector, SigmaMode};
use adalopo::io::parse_key_values;
use adalopo::rvdesign::DesignSpec;
use adalopo::testbed::{DatasetSpec, NoiseLevel, TargetFunction};

pub const SEED_ENV: &str = "ADALOPO_SEED";

#[derive(Debug, Parser)]
#[command(name = "adalopo", version, about = "Adaptive local polynomial regression: synthesis, estimation and simulation studies")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    #[command(flatten)]
    pub opts: Options,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Draw a dataset and write dataset.csv plus dataset.provenance
    Synth,
    /// Estimate the curve on the evaluation grid (estimate.csv, estimate.diagnostics)
    Estimate,
    /// Monte Carlo pointwise risk on the evaluation grid (risk.csv)
    Risk,
    /// Risk at one point over several sample sizes and the fitted rate exponent (rate.csv)
    Rate,
    /// Concentration of the window count against its Bernstein bound (concentration.csv)
    Concentration,
    /// Risk normalised by minimax and adaptive rates for two cusp classes (gap.csv)
    Gap,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum GridArg {
    Arith,
    Geom,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SelectorArg {
    Interval,
    Symmetric,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SigmaArg {
    Known,
    Estimate,
}

macro_rules! impl_from_str_for_value_enum {
    ($($t:ty),*) => {$(
        impl FromStr for $t {
            type Err = String;
            fn from_str(s: &str) -> std::result::Result<Self, String> {
                <$t as ValueEnum>::from_str(s, true)
            }
        }
    )*};
}
impl_from_str_for_value_enum!(GridArg, SelectorArg, SigmaArg);

#[derive(Debug, Clone, Default, clap::Args)]
pub struct Options {
    /// Target function: blocks, bumps, heavysine, doppler, cusp[:s[:x0[:r]]], poly:c0,c1,... [default: heavysine]
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub target: Option<TargetFunction>,
    /// Regular-variation index of the design density at x0 (0 = uniform) [default: 0]
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub design_beta: Option<f64>,
    /// Point where the design density degenerates [default: 0.5]
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub design_x0: Option<f64>,
    /// Sample size [default: 2000]
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub n: Option<usize>,
    /// Root signal-to-noise ratio sd(f)/sigma; `inf` for noiseless data [default: 7]
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub rsnr: Option<f64>,
    /// Seed, or base seed of replications seed, seed+1, ... [default: $ADALOPO_SEED, else 1]
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub seed: Option<u64>,
    /// Local polynomial degree [default: 2]
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub kappa: Option<usize>,
    /// Grid parameter a [default: 1.05]
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub a: Option<f64>,
    /// Seed block size of the interval selector [default: 25]
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub m: Option<usize>,
    /// Loss exponent of the risk and of the symmetric threshold [default: 2]
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub p: Option<f64>,
    /// Window selector [default: interval]
    #[arg(long, global = true, value_enum)]
    pub selector: Option<SelectorArg>,
    /// Bandwidth grid of the symmetric selector [default: geom]
    #[arg(long, global = true, value_enum)]
    pub grid: Option<GridArg>,
    /// Noise level handed to the selector: the true sigma or the difference estimate [default: estimate]
    #[arg(long, global = true, value_enum)]
    pub sigma: Option<SigmaArg>,
    /// Interval threshold with sigma on the first term only [default: off]
    #[arg(long, global = true, action = clap::ArgAction::SetTrue)]
    pub paper_literal_threshold: bool,
    /// Evaluate at j/K for j = 0..=K [default: 300]
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub eval_grid: Option<usize>,
    /// Monte Carlo replications [default: 200]
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub replications: Option<usize>,
    /// Worker threads; 1 is the serial reference [default: 1]
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub jobs: Option<usize>,
    /// Output directory [default: out]
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub out: Option<PathBuf>,
    /// `key = value` config file; flags override it
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub config: Option<PathBuf>,
    /// Dataset CSV (x,y) for `estimate`, instead of synthesizing one
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub input: Option<PathBuf>,
    /// Sample sizes for `rate` [default: 500,1000,2000,4000,8000,16000] and `gap` [default: 1000,4000,16000,64000]
    #[arg(long, global = true, allow_negative_numbers = true, value_delimiter = ',')]
    pub ns: Option<Vec<usize>>,
    /// Estimation point of `rate` [default: design-x0]
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub x0: Option<f64>,
    /// Half-width of the `concentration` window [default: 0.1]
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub h: Option<f64>,
    /// Deviation levels of `concentration` [default: 0.1,0.2,0.5]
    #[arg(long, global = true, allow_negative_numbers = true, value_delimiter = ',')]
    pub epsilons: Option<Vec<f64>>,
    /// Smoothness of the first `gap` class [default: 1]
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub s1: Option<f64>,
    /// Radius of the first `gap` class [default: 1]
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub r1: Option<f64>,
    /// Smoothness of the second `gap` class [default: 2]
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub s2: Option<f64>,
    /// Radius of the second `gap` class [default: 0.5]
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub r2: Option<f64>,
    /// Noise sd of `gap` [default: sd of the first cusp / rsnr]
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub noise_sigma: Option<f64>,
}

/// Fully resolved settings.
#[derive(Debug, Clone, PartialEq)]
pub struct Settings {
    pub target: TargetFunction,
    pub design_beta: f64,
    pub design_x0: f64,
    pub n: usize,
    pub rsnr: f64,
    pub seed: u64,
    pub kappa: usize,
    pub a: f64,
    pub m: usize,
    pub p: f64,
    pub selector: SelectorArg,
    pub grid: GridArg,
    pub sigma: SigmaArg,
    pub paper_literal_threshold: bool,
    pub eval_grid: usize,
    pub replications: usize,
    pub jobs: usize,
    pub out: PathBuf,
    pub input: Option<PathBuf>,
    pub ns: Option<Vec<usize>>,
    pub x0: Option<f64>,
    pub h: f64,
    pub epsilons: Vec<f64>,
    pub s1: f64,
    pub r1: f64,
    pub s2: f64,
    pub r2: f64,
    pub noise_sigma: Option<f64>,
}

struct ConfigFile {
    path: PathBuf,
    values: BTreeMap<String, String>,
}

impl ConfigFile {
    fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Self {
                path: PathBuf::new(),
                values: BTreeMap::new(),
            });
        };
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let values = parse_key_values(&text, path)?
            .into_iter()
            .map(|(k, v)| (k.replace('_', "-"), v))
            .collect();
        Ok(Self {
            path: path.to_path_buf(),
            values,
        })
    }

    fn take<T: FromStr>(&mut self, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        match self.values.remove(key) {
            None => Ok(None),
            Some(v) => v
                .parse::<T>()
                .map(Some)
                .map_err(|e| anyhow!("{}: invalid value {v:?} for `{key}`: {e}", self.path.display())),
        }
    }

    fn take_list<T: FromStr>(&mut self, key: &str) -> Result<Option<Vec<T>>>
    where
        T::Err: std::fmt::Display,
    {
        match self.values.remove(key) {
            None => Ok(None),
            Some(v) => v
                .split(',')
                .map(|s| {
                    s.trim()
                        .parse::<T>()
                        .map_err(|e| anyhow!("{}: invalid value {s:?} in `{key}`: {e}", self.path.display()))
                })
                .collect::<Result<Vec<_>>>()
                .map(Some),
        }
    }
}

fn env_seed() -> Result<Option<u64>> {
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| anyhow!("{SEED_ENV}={v:?} is not an unsigned integer")),
        Err(_) => Ok(None),
    }
}

pub fn resolve(cli: &Cli) -> Result<Settings> {
    let o = &cli.opts;
    let mut cfg = ConfigFile::load(o.config.as_deref())?;
    macro_rules! pick {
        ($field:ident, $key:literal, $default:expr) => {
            match o.$field.clone() {
                Some(v) => {
                    cfg.values.remove($key);
                    v
                }
                None => cfg.take($key)?.unwrap_or_else(|| $default),
            }
        };
    }
    macro_rules! pick_opt {
        ($field:ident, $key:literal) => {
            match o.$field.clone() {
                Some(v) => {
                    cfg.values.remove($key);
                    Some(v)
                }
                None => cfg.take($key)?,
            }
        };
    }
    macro_rules! pick_list {
        ($field:ident, $key:literal) => {
            match o.$field.clone() {
                Some(v) => {
                    cfg.values.remove($key);
                    Some(v)
                }
                None => cfg.take_list($key)?,
            }
        };
    }
    let seed = match o.seed {
        Some(v) => {
            cfg.values.remove("seed");
            v
        }
        None => match cfg.take("seed")? {
            Some(v) => v,
            None => env_seed()?.unwrap_or(1),
        },
    };
    let paper_literal_threshold = if o.paper_literal_threshold {
        cfg.values.remove("paper-literal-threshold");
        true
    } else {
        cfg.take("paper-literal-threshold")?.unwrap_or(false)
    };
    let s = Settings {
        target: pick!(target, "target", TargetFunction::Heavysine),
        design_beta: pick!(design_beta, "design-beta", 0.0),
        design_x0: pick!(design_x0, "design-x0", 0.5),
        n: pick!(n, "n", 2000),
        rsnr: pick!(rsnr, "rsnr", 7.0),
        seed,
        kappa: pick!(kappa, "kappa", 2),
        a: pick!(a, "a", 1.05),
        m: pick!(m, "m", 25),
        p: pick!(p, "p", 2.0),
        selector: pick!(selector, "selector", SelectorArg::Interval),
        grid: pick!(grid, "grid", GridArg::Geom),
        sigma: pick!(sigma, "sigma", SigmaArg::Estimate),
        paper_literal_threshold,
        eval_grid: pick!(eval_grid, "eval-grid", 300),
        replications: pick!(replications, "replications", 200),
        jobs: pick!(jobs, "jobs", 1),
        out: pick!(out, "out", PathBuf::from("out")),
        input: pick_opt!(input, "input"),
        ns: pick_list!(ns, "ns"),
        x0: pick_opt!(x0, "x0"),
        h: pick!(h, "h", 0.1),
        epsilons: pick_list!(epsilons, "epsilons").unwrap_or_else(|| vec![0.1, 0.2, 0.5]),
        s1: pick!(s1, "s1", 1.0),
        r1: pick!(r1, "r1", 1.0),
        s2: pick!(s2, "s2", 2.0),
        r2: pick!(r2, "r2", 0.5),
        noise_sigma: pick_opt!(noise_sigma, "noise-sigma"),
    };
    if let Some(key) = cfg.values.keys().next() {
        bail!("{}: unknown config key `{key}`", cfg.path.display());
    }
    if s.eval_grid == 0 {
        bail!("--eval-grid must be at least 1");
    }
    Ok(s)
}

impl Settings {
    pub fn design(&self) -> Result<DesignSpec> {
        let d = if self.design_beta == 0.0 {
            DesignSpec::uniform(self.design_x0)
        } else {
            DesignSpec::power_law(self.design_x0, self.design_beta)
        };
        d.context("invalid design (--design-x0, --design-beta)")
    }

    pub fn dataset(&self) -> Result<DatasetSpec> {
        Ok(DatasetSpec {
            target: self.target.clone(),
            design: self.design()?,
            n: self.n,
            noise: NoiseLevel::Rsnr(self.rsnr),
            seed: self.seed,
        })
    }

    pub fn params(&self) -> EstimatorParams {
        EstimatorParams {
            kappa: self.kappa,
            a: self.a,
            m: self.m,
            selector: match (self.selector, self.grid) {
                (SelectorArg::Interval, _) => Selector::Interval,
                (SelectorArg::Symmetric, GridArg::Arith) => Selector::Symmetric(GridFamily::Arith),
                (SelectorArg::Symmetric, GridArg::Geom) => Selector::Symmetric(GridFamily::Geom),
            },
            p: self.p,
            sigma_mode: match self.sigma {
                SigmaArg::Known => SigmaMode::Known,
                SigmaArg::Estimate => SigmaMode::Estimated,
            },
            threshold_form: if self.paper_literal_threshold {
                ThresholdForm::FirstTermOnly
            } else {
                ThresholdForm::Scaled
            },
        }
    }
}
