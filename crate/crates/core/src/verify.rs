//! Empirical certification of the robust-coreset guarantee plus the
//! definition-level diagnostics (capacity, range space, indexed subsets).

use rand::seq::SliceRandom;
use rand::Rng;
use serde::Serialize;

use crate::cost::{dist_to_set, distortion, pow_z, vanilla_cost};
use crate::types::{CenterSet, MetricSpace, Point, RkInstance, WeightedPointSet};
use crate::{exec, Error, Result};

/// Maximum candidate-pool size for exhaustive certification.
pub const EXHAUSTIVE_POOL_MAX: usize = 25;

/// How candidate center sets are generated for certification.
#[derive(Debug, Clone)]
pub enum CenterSource {
    /// Every k-subset of the pool (defaults to the data points).
    Exhaustive { pool: Option<Vec<Point>> },
    /// `trials` center sets of k distinct points drawn from the data.
    RandomFromData,
    /// `trials` coordinate-jittered copies of a base solution
    /// (Euclidean backend only).
    PerturbedOptimal { base: CenterSet, scale: f64 },
}

/// Result of a certification sweep.
#[derive(Debug, Clone, Serialize)]
pub struct CertReport {
    /// Fraction of (C, t) pairs satisfying
    /// |cost^t(X,C) - cost^t(D,C)| <= eps * cost^t(X,C) + delta.
    pub pass_rate: f64,
    pub max_rel: f64,
    pub max_add_excess: f64,
    pub centers_evaluated: usize,
    /// (center index, t) of the worst additive excess.
    pub worst_witness: Option<(usize, usize)>,
}

fn all_k_subsets(pool: &[Point], k: usize) -> Vec<CenterSet> {
    let mut out = Vec::new();
    let mut idx: Vec<usize> = (0..k).collect();
    if pool.len() < k {
        return out;
    }
    loop {
        out.push(CenterSet::new(idx.iter().map(|&i| pool[i].clone()).collect()));
        let mut i = k;
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            if idx[i] != i + pool.len() - k {
                break;
            }
        }
        idx[i] += 1;
        for j in i + 1..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// Materialize candidate center sets from a source.
pub fn generate_centers(
    x: &WeightedPointSet,
    k: usize,
    source: &CenterSource,
    trials: usize,
    seed: u64,
) -> Result<Vec<CenterSet>> {
    match source {
        CenterSource::Exhaustive { pool } => {
            let pool: Vec<Point> = match pool {
                Some(p) => p.clone(),
                None => x.points.clone(),
            };
            if pool.len() > EXHAUSTIVE_POOL_MAX {
                return Err(Error::PoolTooLarge(pool.len()));
            }
            Ok(all_k_subsets(&pool, k))
        }
        CenterSource::RandomFromData => {
            let mut rng = exec::stream_rng(seed, "certify-random-centers");
            let idxs: Vec<usize> = (0..x.size_count()).collect();
            Ok((0..trials)
                .map(|_| {
                    let picks: Vec<usize> = idxs
                        .choose_multiple(&mut rng, k.min(idxs.len()))
                        .copied()
                        .collect();
                    CenterSet::new(picks.iter().map(|&i| x.points[i].clone()).collect())
                })
                .collect())
        }
        CenterSource::PerturbedOptimal { base, scale } => {
            let mut rng = exec::stream_rng(seed, "certify-perturbed-centers");
            Ok((0..trials)
                .map(|_| {
                    CenterSet::new(
                        base.centers
                            .iter()
                            .map(|p| {
                                let c = p.coords();
                                Point::Coords(
                                    c.iter()
                                        .map(|&v| v + rng.gen_range(-*scale..*scale))
                                        .collect(),
                                )
                            })
                            .collect(),
                    )
                })
                .collect())
        }
    }
}

/// Evaluate the Definition-2.1 inequality for every generated center set
/// and every integer t in 0..=m. Exhaustive mode is an exact decision
/// procedure restricted to the pool.
#[allow(clippy::too_many_arguments)]
pub fn certify_robust_coreset(
    x: &WeightedPointSet,
    d: &WeightedPointSet,
    k: usize,
    m: usize,
    z: f64,
    metric: &MetricSpace,
    eps: f64,
    delta: f64,
    source: &CenterSource,
    trials: usize,
    seed: u64,
) -> Result<CertReport> {
    let centers = generate_centers(x, k, source, trials, seed)?;
    if centers.is_empty() {
        return Err(Error::InvalidParam("no candidate centers generated".into()));
    }
    let rep = distortion(x, d, m, z, metric, &centers, eps, delta)?;
    Ok(CertReport {
        pass_rate: rep.pass_rate,
        max_rel: rep.max_rel,
        max_add_excess: rep.max_add_excess,
        centers_evaluated: centers.len(),
        worst_witness: rep.add_witness,
    })
}

fn cluster_of_id(inst: &RkInstance) -> std::collections::HashMap<usize, usize> {
    inst.data
        .ids
        .iter()
        .zip(&inst.assignment)
        .map(|(&id, &a)| (id, a))
        .collect()
}

/// Max per-cluster discrepancy between D's weight and the cluster's weight
/// (Definition 6.3). D points must carry ids from the instance's data.
pub fn check_capacity(inst: &RkInstance, d: &WeightedPointSet) -> f64 {
    let by_id = cluster_of_id(inst);
    let k0 = inst.anchors.k();
    let mut want = vec![0.0f64; k0];
    for (i, &a) in inst.assignment.iter().enumerate() {
        want[a] += inst.data.weights[i];
    }
    let mut got = vec![0.0f64; k0];
    for i in 0..d.size_count() {
        if let Some(&a) = by_id.get(&d.ids[i]) {
            got[a] += d.weights[i];
        }
    }
    (0..k0)
        .map(|a| (want[a] - got[a]).abs())
        .fold(0.0, f64::max)
}

fn subset_by_clusters(
    inst: &RkInstance,
    d: &WeightedPointSet,
    picked: &[bool],
) -> (WeightedPointSet, WeightedPointSet) {
    let xi: Vec<usize> = (0..inst.data.size_count())
        .filter(|&i| picked[inst.assignment[i]])
        .collect();
    let by_id = cluster_of_id(inst);
    let di: Vec<usize> = (0..d.size_count())
        .filter(|&i| by_id.get(&d.ids[i]).is_some_and(|&a| picked[a]))
        .collect();
    (inst.data.subset(&xi), d.subset(&di))
}

/// Worst violation of the range-space approximation (Definition 6.1) over
/// sampled (cluster subset, center set, radius) triples, normalized by n.
pub fn check_range_space(
    inst: &RkInstance,
    d: &WeightedPointSet,
    samples: usize,
    rng: &mut impl Rng,
) -> f64 {
    let n = inst.data.size_count();
    if n == 0 {
        return 0.0;
    }
    let k0 = inst.anchors.k();
    let mut worst = 0.0f64;
    for _ in 0..samples {
        let picked: Vec<bool> = (0..k0).map(|_| rng.gen_bool(0.5)).collect();
        let (xi, di) = subset_by_clusters(inst, d, &picked);
        let c = CenterSet::new(
            (0..k0)
                .map(|_| inst.data.points[rng.gen_range(0..n)].clone())
                .collect(),
        );
        // Semantically distinct radii: midpoints between consecutive sorted
        // distances, plus 0 and beyond-max.
        let metric = metric_of(inst);
        let mut ds: Vec<f64> = xi.points.iter().map(|p| dist_to_set(p, &c, &metric)).collect();
        ds.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut grid = vec![0.0];
        for w in ds.windows(2) {
            grid.push((w[0] + w[1]) / 2.0);
        }
        grid.push(ds.last().copied().unwrap_or(0.0) + 1.0);
        for &r in &grid {
            let count_x = xi
                .points
                .iter()
                .zip(&xi.weights)
                .filter(|(p, _)| dist_to_set(p, &c, &metric) <= r)
                .map(|(_, &w)| w)
                .sum::<f64>();
            let weight_d = di
                .points
                .iter()
                .zip(&di.weights)
                .filter(|(p, _)| dist_to_set(p, &c, &metric) <= r)
                .map(|(_, &w)| w)
                .sum::<f64>();
            worst = worst.max((count_x - weight_d).abs() / n as f64);
        }
    }
    worst
}

// The diagnostics take instances whose points are Euclidean in all our
// pipelines; explicit-metric instances carry the matrix out of band, so the
// checks reconstruct a metric handle from the point representation.
fn metric_of(inst: &RkInstance) -> MetricSpace {
    match inst.data.points.first().or(inst.anchors.centers.first()) {
        Some(Point::Coords(c)) => MetricSpace::Euclidean { dim: c.len() },
        _ => MetricSpace::Euclidean { dim: 1 },
    }
}

/// Worst violation of the indexed-subset cost approximation over sampled
/// (cluster subset, center set) pairs. Plain mode normalizes the excess
/// beyond eps * cost(X_I, C) by n * r^z; strong mode normalizes the raw
/// difference by cost(X_J, C) + cost(X, A).
#[allow(clippy::too_many_arguments)]
pub fn check_indexed_subset(
    inst: &RkInstance,
    d: &WeightedPointSet,
    eps: f64,
    z: f64,
    samples: usize,
    rng: &mut impl Rng,
    strong: Option<&CenterSet>,
) -> f64 {
    let n = inst.data.size_count();
    if n == 0 {
        return 0.0;
    }
    let metric = metric_of(inst);
    let k0 = inst.anchors.k();
    let anchor_cost = strong.map(|a| vanilla_cost(&inst.data, a, z, &metric));
    let nrz = n as f64 * pow_z(inst.radius, z);
    let mut worst = 0.0f64;
    for _ in 0..samples {
        let picked: Vec<bool> = (0..k0).map(|_| rng.gen_bool(0.5)).collect();
        let (xi, di) = subset_by_clusters(inst, d, &picked);
        if xi.is_empty() {
            continue;
        }
        let c = CenterSet::new(
            (0..k0)
                .map(|_| inst.data.points[rng.gen_range(0..n)].clone())
                .collect(),
        );
        let cx = vanilla_cost(&xi, &c, z, &metric);
        let cd = vanilla_cost(&di, &c, z, &metric);
        let diff = (cx - cd).abs();
        let v = match anchor_cost {
            Some(ca) => {
                let denom = cx + ca;
                if denom > 1e-12 {
                    diff / denom
                } else {
                    0.0
                }
            }
            None => {
                if nrz > 1e-12 {
                    (diff - eps * cx) / nrz
                } else if diff > 1e-12 {
                    f64::INFINITY
                } else {
                    0.0
                }
            }
        };
        worst = worst.max(v);
    }
    worst
}
