//! Plain-text persistence: sample CSV files, `key = value` sidecars and
//! config files, and atomic file replacement.
//!
//! Numbers are written with 17 significant digits in scientific notation,
//! which round-trips every `f64` exactly and never depends on locale.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::locpoly::SampleSet;
use crate::rvdesign::DesignKind;
use crate::testbed::{DatasetSpec, NoiseLevel, SD_GRID_POINTS};

/// Formats a float with 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else if v.is_nan() {
        "NaN".into()
    } else if v > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Writes through a temporary file in the same directory, then renames it
/// into place, so readers never see a partial file.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp = dir.join(format!(".{name}.tmp{}", std::process::id()));
    let result = (|| {
        let mut f = fs::File::create(&tmp).map_err(io_err(&tmp))?;
        f.write_all(contents).map_err(io_err(&tmp))?;
        f.sync_all().map_err(io_err(&tmp))?;
        fs::rename(&tmp, path).map_err(io_err(path))
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    result
}

pub fn samples_to_csv(data: &SampleSet) -> String {
    let mut out = String::with_capacity(48 * (data.len() + 1));
    out.push_str("x,y\n");
    for (x, y) in data.xs().iter().zip(data.ys()) {
        out.push_str(&fmt_f64(*x));
        out.push(',');
        out.push_str(&fmt_f64(*y));
        out.push('\n');
    }
    out
}

pub fn write_samples_csv(path: &Path, data: &SampleSet) -> Result<()> {
    write_atomic(path, samples_to_csv(data).as_bytes())
}

/// Parses an `x,y` CSV; the seed is left unset.
pub fn parse_samples_csv(text: &str, path: &Path) -> Result<SampleSet> {
    let parse_err = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header.trim().replace(' ', "") == "x,y" => {}
        _ => return Err(parse_err(1, "expected header `x,y`".into())),
    }
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for (i, line) in lines {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let mut fields = line.split(',');
        let (Some(x), Some(y), None) = (fields.next(), fields.next(), fields.next()) else {
            return Err(parse_err(i + 1, format!("expected two fields, got {line:?}")));
        };
        let num = |v: &str| {
            v.trim()
                .parse::<f64>()
                .map_err(|e| parse_err(i + 1, format!("{v:?}: {e}")))
        };
        xs.push(num(x)?);
        ys.push(num(y)?);
    }
    SampleSet::new(xs, ys, None)
}

/// Reads an `x,y` CSV, taking the seed from its sidecar when one exists.
pub fn read_samples_csv(path: &Path) -> Result<SampleSet> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let data = parse_samples_csv(&text, path)?;
    let side = sidecar_path(path);
    if side.exists() {
        let prov = Provenance::read(&side)?;
        if let Some(seed) = prov.get("seed").and_then(|s| s.parse::<u64>().ok()) {
            return SampleSet::new(data.xs().to_vec(), data.ys().to_vec(), Some(seed));
        }
    }
    Ok(data)
}

/// `data.csv` → `data.provenance`.
pub fn sidecar_path(path: &Path) -> PathBuf {
    path.with_extension("provenance")
}

/// Parses `key = value` lines. Blank lines and lines starting with `#` are
/// skipped; keys are trimmed and lowercased, values trimmed.
pub fn parse_key_values(text: &str, path: &Path) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                message: format!("expected `key = value`, got {line:?}"),
            });
        };
        let key = k.trim().to_ascii_lowercase();
        if key.is_empty() {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                message: "empty key".into(),
            });
        }
        out.push((key, v.trim().to_string()));
    }
    Ok(out)
}

/// Ordered `key = value` record.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Provenance {
    entries: Vec<(String, String)>,
}

impl Provenance {
    pub fn new() -> Self {
        Self::default()
    }

    /// Sets `key`, replacing an existing value in place.
    pub fn set(&mut self, key: &str, value: impl ToString) -> &mut Self {
        let value = value.to_string();
        match self.entries.iter_mut().find(|(k, _)| k == key) {
            Some(entry) => entry.1 = value,
            None => self.entries.push((key.to_string(), value)),
        }
        self
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn entries(&self) -> &[(String, String)] {
        &self.entries
    }

    pub fn to_text(&self) -> String {
        self.entries.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_atomic(path, self.to_text().as_bytes())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        Ok(Self {
            entries: parse_key_values(&text, path)?,
        })
    }
}

/// Everything needed to regenerate a synthesized dataset.
pub fn dataset_provenance(spec: &DatasetSpec, sigma: f64) -> Provenance {
    let mut p = Provenance::new();
    p.set("seed", spec.seed)
        .set("n", spec.n)
        .set("target", &spec.target)
        .set("design_x0", fmt_f64(spec.design.x0))
        .set("design_beta", fmt_f64(spec.design.beta));
    match spec.design.kind {
        DesignKind::Uniform => p.set("design_kind", "uniform"),
        DesignKind::PowerLaw => p.set("design_kind", "power-law"),
        DesignKind::PowerLogLaw { alpha } => p.set("design_kind", "power-log-law").set("design_alpha", fmt_f64(alpha)),
    };
    match spec.noise {
        NoiseLevel::Rsnr(r) => p.set("rsnr", fmt_f64(r)),
        NoiseLevel::Sigma(_) => p.set("rsnr", "unset"),
    };
    p.set("sigma", fmt_f64(sigma))
        .set("noise_convention", "sigma = sd(f) / rsnr, population sd over i/(M-1), i = 0..M-1")
        .set("sd_grid_points", SD_GRID_POINTS)
        .set("design_stream", crate::rng::DESIGN_STREAM)
        .set("noise_stream", crate::rng::NOISE_STREAM);
    p
}
