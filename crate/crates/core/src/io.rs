//! Dataset file formats, synthetic generators, and the JSON report schema.

use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::types::{DistanceMatrix, Point, WeightedPointSet};
use crate::{exec, Error, Result};

/// CSV dataset text: one point per line, comma-separated coordinates,
/// optional trailing `weight=<w>` column. 17 significant digits for
/// bit-faithful round-trips.
pub fn points_to_csv(x: &WeightedPointSet) -> String {
    let mut out = String::new();
    for i in 0..x.size_count() {
        let coords = x.points[i]
            .coords()
            .iter()
            .map(|v| format!("{v:.16e}"))
            .collect::<Vec<_>>()
            .join(",");
        out.push_str(&coords);
        if (x.weights[i] - 1.0).abs() > 0.0 {
            out.push_str(&format!(",weight={:.16e}", x.weights[i]));
        }
        out.push('\n');
    }
    out
}

/// Like [`points_to_csv`] but always emits the weight column, giving
/// coreset files a uniform schema.
pub fn points_to_csv_weighted(x: &WeightedPointSet) -> String {
    let mut out = String::new();
    for i in 0..x.size_count() {
        let coords = x.points[i]
            .coords()
            .iter()
            .map(|v| format!("{v:.16e}"))
            .collect::<Vec<_>>()
            .join(",");
        out.push_str(&format!("{coords},weight={:.16e}\n", x.weights[i]));
    }
    out
}

/// Parse CSV dataset text; returns the set and the shared dimension.
pub fn points_from_csv(text: &str) -> Result<(WeightedPointSet, usize)> {
    let mut points = Vec::new();
    let mut weights = Vec::new();
    let mut dim: Option<usize> = None;
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut coords = Vec::new();
        let mut weight = 1.0;
        for field in line.split(',') {
            let field = field.trim();
            if let Some(w) = field.strip_prefix("weight=") {
                weight = w.parse::<f64>().map_err(|e| Error::Parse {
                    line: lineno + 1,
                    msg: format!("bad weight: {e}"),
                })?;
            } else {
                coords.push(field.parse::<f64>().map_err(|e| Error::Parse {
                    line: lineno + 1,
                    msg: format!("bad coordinate '{field}': {e}"),
                })?);
            }
        }
        if coords.iter().any(|v| !v.is_finite()) || !weight.is_finite() || weight < 0.0 {
            return Err(Error::Parse { line: lineno + 1, msg: "non-finite value".into() });
        }
        match dim {
            None => dim = Some(coords.len()),
            Some(d) if d != coords.len() => {
                return Err(Error::Parse {
                    line: lineno + 1,
                    msg: format!("expected {d} coordinates, found {}", coords.len()),
                })
            }
            _ => {}
        }
        points.push(Point::Coords(coords));
        weights.push(weight);
    }
    let d = dim.ok_or(Error::Parse { line: 0, msg: "empty dataset".into() })?;
    if d == 0 {
        return Err(Error::Parse { line: 1, msg: "points need at least one coordinate".into() });
    }
    Ok((WeightedPointSet::new(points, weights)?, d))
}

/// Parse an explicit-metric file: first line n, then n rows of n distances
/// (comma or whitespace separated). Validation happens in DistanceMatrix.
pub fn matrix_from_text(text: &str) -> Result<DistanceMatrix> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let first = lines.next().ok_or(Error::Parse { line: 0, msg: "empty file".into() })?;
    let n: usize = first.trim().parse().map_err(|e| Error::Parse {
        line: 1,
        msg: format!("bad matrix size: {e}"),
    })?;
    let mut d = Vec::with_capacity(n * n);
    for (row, line) in lines.enumerate().take(n) {
        let vals: Vec<f64> = line
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|s| !s.is_empty())
            .map(|s| {
                s.parse::<f64>().map_err(|e| Error::Parse {
                    line: row + 2,
                    msg: format!("bad distance '{s}': {e}"),
                })
            })
            .collect::<Result<_>>()?;
        if vals.len() != n {
            return Err(Error::Parse {
                line: row + 2,
                msg: format!("expected {n} distances, found {}", vals.len()),
            });
        }
        d.extend(vals);
    }
    if d.len() != n * n {
        return Err(Error::Parse { line: 0, msg: format!("matrix has {} rows, expected {n}", d.len() / n) });
    }
    DistanceMatrix::new(n, d)
}

/// Heuristic for `--metric auto`: an explicit-metric file starts with a
/// lone integer row count.
pub fn looks_like_explicit(text: &str) -> bool {
    text.lines()
        .find(|l| !l.trim().is_empty())
        .is_some_and(|l| l.trim().parse::<usize>().is_ok())
}

/// Synthetic dataset families.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GenKind {
    GaussianMixture,
    UniformBox,
    ClusteredWithOutliers,
    Collinear,
}

impl std::str::FromStr for GenKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian_mixture" => Ok(GenKind::GaussianMixture),
            "uniform_box" => Ok(GenKind::UniformBox),
            "clustered_with_outliers" => Ok(GenKind::ClusteredWithOutliers),
            "collinear" => Ok(GenKind::Collinear),
            other => Err(Error::InvalidParam(format!("unknown generator kind '{other}'"))),
        }
    }
}

/// Deterministic synthetic dataset. `clustered_with_outliers` plants k
/// Gaussian clusters plus exactly m uniform outliers at distance at least
/// 10 * spread from every cluster center.
pub fn generate(
    kind: GenKind,
    n: usize,
    d: usize,
    k: usize,
    m: usize,
    spread: f64,
    seed: u64,
) -> Result<WeightedPointSet> {
    if n < 1 {
        return Err(Error::InvalidParam("n must be >= 1".into()));
    }
    if d < 1 {
        return Err(Error::InvalidParam("d must be >= 1".into()));
    }
    let mut rng = exec::stream_rng(seed, "generator");
    let points: Vec<Point> = match kind {
        GenKind::Collinear => (0..n)
            .map(|i| {
                let mut c = vec![0.0; d];
                c[0] = i as f64;
                Point::Coords(c)
            })
            .collect(),
        GenKind::UniformBox => (0..n)
            .map(|_| Point::Coords((0..d).map(|_| rng.gen_range(0.0..spread.max(1e-12))).collect()))
            .collect(),
        GenKind::GaussianMixture => {
            let k = k.max(1);
            let centers: Vec<Vec<f64>> = (0..k)
                .map(|_| (0..d).map(|_| rng.gen_range(0.0..10.0 * spread.max(1e-12))).collect())
                .collect();
            let normal = Normal::new(0.0, spread.max(1e-12)).unwrap();
            (0..n)
                .map(|i| {
                    let c = &centers[i % k];
                    Point::Coords(c.iter().map(|&v| v + normal.sample(&mut rng)).collect())
                })
                .collect()
        }
        GenKind::ClusteredWithOutliers => {
            let k = k.max(1);
            let m = m.min(n.saturating_sub(1));
            let box_side = 10.0 * spread.max(1e-12);
            let centers: Vec<Vec<f64>> = (0..k)
                .map(|_| (0..d).map(|_| rng.gen_range(0.0..box_side)).collect())
                .collect();
            let normal = Normal::new(0.0, spread.max(1e-12)).unwrap();
            let mut pts: Vec<Point> = (0..n - m)
                .map(|i| {
                    let c = &centers[i % k];
                    Point::Coords(c.iter().map(|&v| v + normal.sample(&mut rng)).collect())
                })
                .collect();
            let min_sep = 10.0 * spread.max(1e-12);
            let mut planted = 0;
            while planted < m {
                let cand: Vec<f64> = (0..d)
                    .map(|_| rng.gen_range(-3.0 * box_side..4.0 * box_side))
                    .collect();
                let far = centers.iter().all(|c| {
                    c.iter()
                        .zip(&cand)
                        .map(|(a, b)| (a - b) * (a - b))
                        .sum::<f64>()
                        .sqrt()
                        >= min_sep
                });
                if far {
                    pts.push(Point::Coords(cand));
                    planted += 1;
                }
            }
            pts
        }
    };
    Ok(WeightedPointSet::unit(points))
}

/// Distortion section of the report; null when the run did not certify.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DistortionSection {
    pub max_rel: f64,
    pub max_add: f64,
    pub pass_rate: f64,
    pub witness: Option<(usize, usize)>,
}

/// JSON report written by the CLI (`"schema": 1`).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReportFile {
    pub schema: u32,
    pub config: serde_json::Value,
    pub stage_sizes: BTreeMap<String, usize>,
    pub sample_sizes: BTreeMap<String, usize>,
    pub delta_ledger: BTreeMap<String, f64>,
    pub distortion: Option<DistortionSection>,
    pub timings_ms: BTreeMap<String, f64>,
    pub seed: u64,
}

impl ReportFile {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}
