//! Baseline solvers producing the approximate solution C* that drives the
//! decompositions: an exhaustive solver for tiny instances and a seeded
//! local-search heuristic for everything else.

use itertools::Itertools;
use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;

use crate::cost::{dist_to_set, pow_z, CostProfile};
use crate::exec;
use crate::types::{CenterSet, MetricSpace, Point, WeightedPointSet};
use crate::{Error, Result};

/// Maximum number of candidate k-subsets the exact solver will enumerate.
pub const COMBINATION_BUDGET: u128 = 2_000_000;

fn n_choose_k(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.saturating_mul((n - i) as u128) / (i as u128 + 1);
        if acc > COMBINATION_BUDGET * 1000 {
            return u128::MAX;
        }
    }
    acc
}

fn robust(x: &WeightedPointSet, c: &CenterSet, m: f64, z: f64, metric: &MetricSpace) -> f64 {
    CostProfile::new(x, c, z, metric).robust(m).expect("m <= total weight")
}

/// Exhaustive minimum of the robust cost over all k-subsets of the pool
/// (defaults to the data points). Ties break toward the lexicographically
/// first index tuple, which is the enumeration order.
pub fn exact_solver(
    x: &WeightedPointSet,
    k: usize,
    m: usize,
    z: f64,
    metric: &MetricSpace,
    candidate_pool: Option<&[Point]>,
) -> Result<(CenterSet, f64)> {
    let pool: Vec<Point> = match candidate_pool {
        Some(p) => p.to_vec(),
        None => x.points.clone(),
    };
    if pool.len() < k {
        return Err(Error::InvalidParam(format!(
            "pool of {} points cannot supply k={k} centers",
            pool.len()
        )));
    }
    let subsets = n_choose_k(pool.len(), k);
    if subsets > COMBINATION_BUDGET {
        return Err(Error::CombinatorialBudget { subsets, max: COMBINATION_BUDGET });
    }
    // combinations() yields index tuples in lexicographic order; the strict
    // `<` keeps the first minimizer, i.e. the lexicographically smallest.
    let mut best: Option<(CenterSet, f64)> = None;
    for idx in (0..pool.len()).combinations(k) {
        let c = CenterSet::new(idx.iter().map(|&i| pool[i].clone()).collect());
        let cost = robust(x, &c, m as f64, z, metric);
        if best.as_ref().map_or(true, |(_, b)| cost < *b) {
            best = Some((c, cost));
        }
    }
    Ok(best.unwrap())
}

fn dz_to_centers(x: &WeightedPointSet, c: &CenterSet, z: f64, metric: &MetricSpace) -> Vec<f64> {
    exec::map_indexed(x.size_count(), |i| {
        pow_z(dist_to_set(&x.points[i], c, metric), z)
    })
}

/// Outlier-aware D^z seeding: sample each next center proportional to
/// dist^z to the current centers, after zeroing the m currently-farthest
/// points so planted outliers don't hijack the seeds.
fn seed_centers(
    x: &WeightedPointSet,
    k: usize,
    m: usize,
    z: f64,
    metric: &MetricSpace,
    rng: &mut impl Rng,
) -> CenterSet {
    let n = x.size_count();
    let first = rng.gen_range(0..n);
    let mut centers = vec![x.points[first].clone()];
    while centers.len() < k {
        let c = CenterSet::new(centers.clone());
        let mut dz = dz_to_centers(x, &c, z, metric);
        // Zero out the m farthest (ties by index: prefer removing higher
        // index last, matching the greedy removal order).
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| dz[b].partial_cmp(&dz[a]).unwrap().then_with(|| a.cmp(&b)));
        for &i in order.iter().take(m.min(n)) {
            dz[i] = 0.0;
        }
        let total: f64 = dz.iter().sum();
        let next = if total > 0.0 {
            WeightedIndex::new(&dz).unwrap().sample(rng)
        } else {
            rng.gen_range(0..n)
        };
        centers.push(x.points[next].clone());
    }
    CenterSet::new(centers)
}

fn local_search(
    x: &WeightedPointSet,
    mut centers: CenterSet,
    m: usize,
    z: f64,
    metric: &MetricSpace,
    rounds: usize,
    rng: &mut impl Rng,
) -> (CenterSet, f64) {
    let n = x.size_count();
    let mut cost = robust(x, &centers, m as f64, z, metric);
    loop {
        let mut improved = false;
        for _ in 0..rounds {
            let cand = rng.gen_range(0..n);
            let slot = rng.gen_range(0..centers.k());
            if centers.centers[slot] == x.points[cand] {
                continue;
            }
            let mut trial = centers.clone();
            trial.centers[slot] = x.points[cand].clone();
            let trial_cost = robust(x, &trial, m as f64, z, metric);
            if trial_cost < cost - 1e-12 * cost.max(1.0) {
                centers = trial;
                cost = trial_cost;
                improved = true;
            }
        }
        if !improved {
            return (centers, cost);
        }
    }
}

/// Seeded local-search heuristic for robust (k,z)-clustering: D^z seeding
/// with the m farthest points ignored, single-swap local search on the
/// robust-cost objective, best of 3 restarts (ties by restart index).
/// No approximation factor asserted; downstream budgets use the realized cost.
pub fn heuristic_solver(
    x: &WeightedPointSet,
    k: usize,
    m: usize,
    z: f64,
    metric: &MetricSpace,
    seed: u64,
    rounds: usize,
) -> Result<(CenterSet, f64)> {
    let n = x.size_count();
    if k > n {
        return Err(Error::InvalidParam(format!("k={k} exceeds n={n}")));
    }
    if m as f64 > x.total_weight() + 1e-9 {
        return Err(Error::BudgetExceedsWeight { budget: m as f64, total: x.total_weight() });
    }
    let restarts: Vec<(CenterSet, f64)> = exec::map_indexed(3, |r| {
        let mut rng = exec::stream_rng(seed, &format!("solver-restart-{r}"));
        let seeds = seed_centers(x, k, m, z, metric, &mut rng);
        local_search(x, seeds, m, z, metric, rounds, &mut rng)
    });
    // argmin over restarts, first (lowest restart index) wins ties
    let best = restarts
        .into_iter()
        .enumerate()
        .min_by(|(ia, (_, a)), (ib, (_, b))| a.partial_cmp(b).unwrap().then_with(|| ia.cmp(ib)))
        .map(|(_, r)| r)
        .unwrap();
    Ok(best)
}
