//! Synthetic sphere datasets and CSV ingestion.

use std::f64::consts::PI;
use std::path::Path;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::io::{format_float, numbered_header, write_csv};
use crate::randmat::rng_from_seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Provenance {
    Pinwheel(PinwheelConfig),
    Circles(CirclesConfig),
    File { path: String, sha256: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub name: String,
    pub points: DMatrix<f64>,
    pub labels: Option<Vec<i64>>,
    pub provenance: Provenance,
}

impl Dataset {
    pub fn new(name: impl Into<String>, points: DMatrix<f64>, labels: Option<Vec<i64>>, provenance: Provenance) -> Result<Self> {
        if points.nrows() < 2 || points.ncols() == 0 {
            return Err(Error::Shape(format!(
                "a dataset needs at least 2 rows and 1 column, got {}x{}",
                points.nrows(),
                points.ncols()
            )));
        }
        if points.iter().any(|x| !x.is_finite()) {
            return Err(Error::Domain("dataset contains non-finite values".into()));
        }
        if labels.as_ref().is_some_and(|l| l.len() != points.nrows()) {
            return Err(Error::Shape("label count differs from row count".into()));
        }
        Ok(Self {
            name: name.into(),
            points,
            labels,
            provenance,
        })
    }

    pub fn n(&self) -> usize {
        self.points.nrows()
    }

    pub fn dim(&self) -> usize {
        self.points.ncols()
    }

    /// Writes `x1..xD` (and `label`) with a header row.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut header: Vec<String> = numbered_header("x", self.dim()).collect();
        if self.labels.is_some() {
            header.push("label".into());
        }
        let rows = (0..self.n()).map(|i| {
            let mut row: Vec<String> = self.points.row(i).iter().map(|&x| format_float(x)).collect();
            if let Some(labels) = &self.labels {
                row.push(labels[i].to_string());
            }
            row
        });
        write_csv(path, &header, rows)
    }
}

/// `(x, y) ↦ (2x, 2y, x² + y² − 1)/(x² + y² + 1)`, the inverse of the
/// stereographic projection from the north pole.
pub fn inverse_stereographic(x: f64, y: f64) -> [f64; 3] {
    let s = x * x + y * y;
    let d = s + 1.0;
    [2.0 * x / d, 2.0 * y / d, (s - 1.0) / d]
}

fn project_rows(plane: &[[f64; 2]]) -> DMatrix<f64> {
    let rows: Vec<f64> = plane
        .iter()
        .flat_map(|&[x, y]| inverse_stereographic(x, y))
        .collect();
    DMatrix::from_row_slice(plane.len(), 3, &rows)
}

/// Splits `n` as evenly as possible into `k` parts, larger parts first.
fn split_even(n: usize, k: usize) -> impl Iterator<Item = usize> {
    (0..k).map(move |i| n / k + usize::from(i < n % k))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PinwheelConfig {
    pub n: usize,
    pub arms: usize,
    /// Standard deviation of the tangential noise.
    pub noise: f64,
    pub radial_mean: f64,
    pub radial_std: f64,
    pub spacing: f64,
    /// Rotation in radians per unit radius.
    pub twist: f64,
    pub seed: u64,
}

impl PinwheelConfig {
    pub fn new(n: usize, arms: usize, noise: f64, seed: u64) -> Self {
        Self {
            n,
            arms,
            noise,
            radial_mean: 1.0,
            radial_std: 0.25,
            spacing: 1.0,
            twist: 0.3,
            seed,
        }
    }
}

/// Planar pinwheel mapped onto the unit sphere. Each arm `a` holds points at
/// radius `r = |N(μ, s²)|·spacing` with tangential offset `N(0, noise²)`,
/// rotated by `2πa/arms + twist·r`. Labels are arm indices.
pub fn gen_pinwheel(cfg: &PinwheelConfig) -> Result<Dataset> {
    if cfg.arms == 0 || cfg.n < cfg.arms.max(2) {
        return Err(Error::Domain(format!("need n ≥ arms ≥ 1 and n ≥ 2 (n={}, arms={})", cfg.n, cfg.arms)));
    }
    if !(cfg.noise >= 0.0 && cfg.radial_std >= 0.0) {
        return Err(Error::Domain("noise levels must be non-negative".into()));
    }
    let mut rng = rng_from_seed(cfg.seed);
    let radial = Normal::new(cfg.radial_mean, cfg.radial_std).map_err(|e| Error::Domain(e.to_string()))?;
    let tangential = Normal::new(0.0, cfg.noise).map_err(|e| Error::Domain(e.to_string()))?;
    let mut plane = Vec::with_capacity(cfg.n);
    let mut labels = Vec::with_capacity(cfg.n);
    for (arm, count) in split_even(cfg.n, cfg.arms).enumerate() {
        let base = 2.0 * PI * arm as f64 / cfg.arms as f64;
        for _ in 0..count {
            let r = radial.sample(&mut rng).abs() * cfg.spacing;
            let t = tangential.sample(&mut rng);
            let (s, c) = (base + cfg.twist * r).sin_cos();
            plane.push([c * r - s * t, s * r + c * t]);
            labels.push(arm as i64);
        }
    }
    Dataset::new("pinwheel", project_rows(&plane), Some(labels), Provenance::Pinwheel(cfg.clone()))
}

pub fn gen_pinwheel_sphere(n: usize, arms: usize, noise: f64, seed: u64) -> Result<Dataset> {
    gen_pinwheel(&PinwheelConfig::new(n, arms, noise, seed))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CirclesConfig {
    pub n: usize,
    pub radii: Vec<f64>,
    /// Standard deviation of the radial noise.
    pub noise: f64,
    pub seed: u64,
}

/// Concentric planar circles mapped onto the unit sphere, labelled by circle.
/// Angles are uniform on `[0, 2π)`.
pub fn gen_circles_sphere(n: usize, radii: &[f64], noise: f64, seed: u64) -> Result<Dataset> {
    if radii.is_empty() || n < radii.len().max(2) {
        return Err(Error::Domain(format!("need n ≥ number of radii ≥ 1 (n={n}, radii={})", radii.len())));
    }
    if radii.iter().any(|r| !(r.is_finite() && *r > 0.0)) || !(noise >= 0.0) {
        return Err(Error::Domain("radii must be positive and noise non-negative".into()));
    }
    let mut rng = rng_from_seed(seed);
    let jitter = Normal::new(0.0, noise).map_err(|e| Error::Domain(e.to_string()))?;
    let mut plane = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for (c, count) in split_even(n, radii.len()).enumerate() {
        for _ in 0..count {
            let theta = rng.random_range(0.0..2.0 * PI);
            let r = radii[c] + jitter.sample(&mut rng);
            plane.push([r * theta.cos(), r * theta.sin()]);
            labels.push(c as i64);
        }
    }
    let cfg = CirclesConfig {
        n,
        radii: radii.to_vec(),
        noise,
        seed,
    };
    Dataset::new("circles", project_rows(&plane), Some(labels), Provenance::Circles(cfg))
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Reads a rectangular numeric CSV. A first row with no numeric cell is
/// taken as a header. With `has_labels` the last column holds integer labels.
/// Row and column numbers in errors are 1-based positions in the file.
pub fn load_csv(path: &Path, has_labels: bool) -> Result<Dataset> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(bytes.as_slice());
    let mut values = Vec::new();
    let mut labels = Vec::new();
    let mut width = None;
    let mut n_rows = 0;
    for (idx, record) in reader.records().enumerate() {
        let row = idx + 1;
        let record = record.map_err(|e| Error::Parse {
            row,
            column: 0,
            message: e.to_string(),
        })?;
        if record.iter().all(|c| c.is_empty()) {
            continue;
        }
        if idx == 0 && record.iter().all(|c| c.parse::<f64>().is_err()) {
            continue;
        }
        match width {
            None => width = Some(record.len()),
            Some(w) if w != record.len() => {
                return Err(Error::Parse {
                    row,
                    column: record.len().min(w) + 1,
                    message: format!("expected {w} fields, found {}", record.len()),
                })
            }
            _ => {}
        }
        let n_num = record.len() - usize::from(has_labels);
        if n_num == 0 {
            return Err(Error::Parse {
                row,
                column: 1,
                message: "no numeric columns".into(),
            });
        }
        for (c, cell) in record.iter().enumerate() {
            let column = c + 1;
            if c < n_num {
                let x: f64 = cell.parse().map_err(|_| Error::Parse {
                    row,
                    column,
                    message: format!("'{cell}' is not a number"),
                })?;
                if !x.is_finite() {
                    return Err(Error::Parse {
                        row,
                        column,
                        message: format!("'{cell}' is not finite"),
                    });
                }
                values.push(x);
            } else {
                labels.push(cell.parse::<i64>().map_err(|_| Error::Parse {
                    row,
                    column,
                    message: format!("'{cell}' is not an integer label"),
                })?);
            }
        }
        n_rows += 1;
    }
    let Some(width) = width else {
        return Err(Error::Parse {
            row: 1,
            column: 1,
            message: "file has no data rows".into(),
        });
    };
    let dim = width - usize::from(has_labels);
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "dataset".into());
    let provenance = Provenance::File {
        path: path.display().to_string(),
        sha256: sha256_hex(&bytes),
    };
    Dataset::new(
        name,
        DMatrix::from_row_slice(n_rows, dim, &values),
        has_labels.then_some(labels),
        provenance,
    )
}
