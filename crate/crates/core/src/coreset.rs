//! The three coreset constructions and the end-to-end builders that chain
//! them through the decompositions with an explicit additive-error ledger.

use std::collections::BTreeMap;
use std::time::Instant;

use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;

use crate::cost::{pow_z, vanilla_cost, CostProfile};
use crate::decompose::{decompose_euclidean, decompose_metric_z, split_regular};
use crate::solver::{exact_solver, heuristic_solver};
use crate::types::{
    CenterSet, CoresetReport, MetricSpace, Params, RegularInstance, RkInstance,
    WeightedPointSet,
};
use crate::{exec, Error, Result};

/// Which sample-size formula applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SampleMode {
    MetricVcDoubling,
    Euclidean,
}

/// Knobs of the sample-size formulas; the absolute constant and polylog
/// exponent are not pinned by the analysis, so both are exposed.
#[derive(Debug, Clone)]
pub struct SampleSizePolicy {
    pub mode: SampleMode,
    pub c0: f64,
    pub c: f64,
    pub override_size: Option<usize>,
}

impl SampleSizePolicy {
    pub fn from_params(mode: SampleMode, p: &Params) -> Self {
        SampleSizePolicy {
            mode,
            c0: p.c0,
            c: p.polylog_c,
            override_size: p.sample_override,
        }
    }
}

/// Number of with-replacement samples for one coreset stage.
pub fn sample_size(policy: &SampleSizePolicy, k: usize, d: f64, eps: f64, m: usize, z: f64) -> usize {
    if let Some(s) = policy.override_size {
        return s.max(1);
    }
    let kf = k as f64;
    let s = match policy.mode {
        SampleMode::MetricVcDoubling => {
            let lead = kf * d / pow_z(eps, 2.0 * z);
            let poly = (1.0 + (kf * d / eps + std::f64::consts::E).ln()).powf(policy.c);
            let poly_m = (1.0 + ((m + 2) as f64).ln()).powf(3.0 * policy.c);
            policy.c0 * lead * poly * poly_m
        }
        SampleMode::Euclidean => {
            let a = kf.powf((2.0 * z + 2.0) / (z + 2.0)) / (eps * eps);
            let b = kf / pow_z(eps, z + 2.0);
            let poly = (1.0 + (kf / eps + std::f64::consts::E).ln()).powf(policy.c);
            policy.c0 * a.min(b) * poly
        }
    };
    (s.ceil() as usize).max(1)
}

/// Merge repeated draws of the same point and emit in ascending point order.
fn collect_weighted(
    data: &WeightedPointSet,
    acc: &BTreeMap<usize, f64>,
) -> WeightedPointSet {
    let mut out = WeightedPointSet::empty();
    for (&i, &w) in acc {
        out.push(data.points[i].clone(), w, data.ids[i]);
    }
    out
}

/// Uniform coreset for a regular instance: s with-replacement samples at
/// provisional weight n/s, then a per-cluster rescale so each cluster's
/// coreset weight equals the cluster size exactly. Clusters missed by the
/// sample contribute one lowest-index representative at full weight.
/// Returns the coreset and its additive budget eps * n * r^z.
pub fn coreset1(
    x: &RegularInstance,
    params: &Params,
    rng: &mut impl Rng,
) -> (WeightedPointSet, f64) {
    let inst = &x.0;
    let n = inst.data.size_count();
    let delta = params.eps * n as f64 * pow_z(inst.radius, params.z);
    if n == 0 {
        return (WeightedPointSet::empty(), delta);
    }
    let policy = SampleSizePolicy::from_params(SampleMode::MetricVcDoubling, params);
    let s = sample_size(
        &policy,
        inst.anchors.k(),
        params.structural_dim,
        params.eps,
        params.m,
        params.z,
    );
    if s >= n {
        // The sample would dominate the instance; the instance is its own
        // exact coreset and every invariant below holds trivially.
        return (inst.data.clone(), delta);
    }
    let clusters = inst.clusters();
    let sizes: Vec<f64> = clusters.iter().map(|c| c.len() as f64).collect();

    let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
    let mut cluster_hits = vec![0usize; clusters.len()];
    for _ in 0..s {
        let i = rng.gen_range(0..n);
        *counts.entry(i).or_insert(0) += 1;
        cluster_hits[inst.assignment[i]] += 1;
    }
    // Provisional weight n/s per draw; per-cluster rescale n_i / u_i with
    // u_i = hits_i * n/s collapses to final weight n_i / hits_i per draw.
    let mut acc: BTreeMap<usize, f64> = BTreeMap::new();
    for (&i, &cnt) in &counts {
        let a = inst.assignment[i];
        let w = sizes[a] / cluster_hits[a] as f64 * cnt as f64;
        *acc.entry(i).or_insert(0.0) += w;
    }
    for (a, cl) in clusters.iter().enumerate() {
        if !cl.is_empty() && cluster_hits[a] == 0 {
            *acc.entry(cl[0]).or_insert(0.0) += sizes[a];
        }
    }
    (collect_weighted(&inst.data, &acc), delta)
}

/// Coreset for a general (r,k)-instance: regular split, [`coreset1`] per
/// bucket, representatives for small clusters. The internal epsilon is
/// rescaled so the returned budget is eps * n * r^z at the caller's eps.
pub fn coreset_rk(
    x: &RkInstance,
    params: &Params,
    seed: u64,
    stage: &str,
) -> Result<(WeightedPointSet, f64)> {
    let n = x.data.size_count();
    let delta = params.eps * n as f64 * pow_z(x.radius, params.z);
    if n == 0 {
        return Ok((WeightedPointSet::empty(), delta));
    }
    // The split + representative error chain costs a factor 3 at z = 1 and
    // (6z)^z in general; absorb it by shrinking the working epsilon.
    let shrink = if params.z == 1.0 { 3.0 } else { pow_z(6.0 * params.z, params.z) };
    let mut inner_params = params.clone();
    inner_params.eps = params.eps / shrink;

    let split = split_regular(x, inner_params.eps, params.z)?;
    let mut parts: Vec<(WeightedPointSet, f64)> = vec![(split.representatives, 0.0)];
    for (bi, bucket) in split.buckets.iter().enumerate() {
        let mut rng = exec::stream_rng(seed, &format!("{stage}/bucket-{bi}"));
        let (d, _) = coreset1(bucket, &inner_params, &mut rng);
        parts.push((d, 0.0));
    }
    let (merged, _) = merge(&parts)?;
    Ok((merged, delta))
}

/// Vanilla (outlier-free) coreset oracle consumed by [`coreset2`].
#[derive(Debug, Clone)]
pub enum VanillaOracle {
    /// Returns its input unchanged: an exact coreset with zero error.
    Identity,
    /// Sensitivity-style sampling down to `target_size` points around
    /// `k` seeded anchors. Empirical quality only — no proven guarantee.
    /// `target_size = 0` means pick 50 * k / eps^2 automatically.
    Empirical { k: usize, target_size: usize },
}

impl VanillaOracle {
    pub fn run(
        &self,
        x: &WeightedPointSet,
        eps: f64,
        z: f64,
        metric: &MetricSpace,
        rng: &mut impl Rng,
    ) -> WeightedPointSet {
        match self {
            VanillaOracle::Identity => x.clone(),
            VanillaOracle::Empirical { k, target_size } => {
                let target = if *target_size == 0 {
                    (50.0 * *k as f64 / (eps * eps)).ceil() as usize
                } else {
                    *target_size
                };
                empirical_vanilla(x, *k, target.max(1), z, metric, rng)
            }
        }
    }
}

/// Sensitivity sampling for the outlier-free problem: D^z-seeded anchors,
/// sampling proportional to (dist^z + mean cost), per-cluster capacity
/// rescale so total output weight equals the input's exactly.
fn empirical_vanilla(
    x: &WeightedPointSet,
    k: usize,
    target: usize,
    z: f64,
    metric: &MetricSpace,
    rng: &mut impl Rng,
) -> WeightedPointSet {
    let n = x.size_count();
    if n <= target {
        return x.clone();
    }
    let k = k.clamp(1, n);
    // D^z seeding without outlier handling.
    let mut centers = vec![x.points[rng.gen_range(0..n)].clone()];
    while centers.len() < k {
        let c = CenterSet::new(centers.clone());
        let dz: Vec<f64> = (0..n)
            .map(|i| x.weights[i] * pow_z(crate::cost::dist_to_set(&x.points[i], &c, metric), z))
            .collect();
        let total: f64 = dz.iter().sum();
        let next = if total > 0.0 {
            WeightedIndex::new(&dz).unwrap().sample(rng)
        } else {
            rng.gen_range(0..n)
        };
        centers.push(x.points[next].clone());
    }
    let anchors = CenterSet::new(centers);
    let inst = crate::make_rk_instance(x.clone(), anchors.clone(), metric);
    let dz: Vec<f64> = (0..n)
        .map(|i| pow_z(metric.dist(&x.points[i], &anchors.centers[inst.assignment[i]]), z))
        .collect();
    let total_w = x.total_weight();
    let cost: f64 = (0..n).map(|i| x.weights[i] * dz[i]).sum();
    let mean = if total_w > 0.0 { cost / total_w } else { 0.0 };
    let raw: Vec<f64> = (0..n).map(|i| x.weights[i] * (dz[i] + mean).max(1e-300)).collect();
    let norm: f64 = raw.iter().sum();
    let p: Vec<f64> = raw.iter().map(|v| v / norm).collect();

    let dist = WeightedIndex::new(&p).unwrap();
    let mut acc: BTreeMap<usize, f64> = BTreeMap::new();
    let mut hit_w = vec![0.0f64; anchors.k()];
    for _ in 0..target {
        let i = dist.sample(rng);
        let w = x.weights[i] / (target as f64 * p[i]);
        *acc.entry(i).or_insert(0.0) += w;
        hit_w[inst.assignment[i]] += w;
    }
    // Capacity rescale per anchor cluster; unhit clusters get one
    // representative carrying the cluster's full weight.
    let clusters = inst.clusters();
    let cluster_w: Vec<f64> = clusters
        .iter()
        .map(|cl| cl.iter().map(|&i| x.weights[i]).sum())
        .collect();
    let mut out: BTreeMap<usize, f64> = BTreeMap::new();
    for (&i, &w) in &acc {
        let a = inst.assignment[i];
        out.insert(i, w * cluster_w[a] / hit_w[a]);
    }
    for (a, cl) in clusters.iter().enumerate() {
        if !cl.is_empty() && hit_w[a] == 0.0 && cluster_w[a] > 0.0 {
            *out.entry(cl[0]).or_insert(0.0) += cluster_w[a];
        }
    }
    collect_weighted(x, &out)
}

/// Outlier-to-surrogate reduction: the min(m, |X_i|) lowest-index points of
/// each cluster collapse onto one surrogate carrying their weight; the rest
/// goes through the vanilla oracle. Budget 8mkr at z = 1.
pub fn coreset2(
    x: &RkInstance,
    params: &Params,
    oracle: &VanillaOracle,
    rng: &mut impl Rng,
    metric: &MetricSpace,
) -> (WeightedPointSet, f64) {
    let (m, eps, z) = (params.m, params.eps, params.z);
    let k = x.anchors.k() as f64;
    let rz = pow_z(x.radius, z);
    let delta = if z == 1.0 {
        8.0 * m as f64 * k * x.radius
    } else {
        m as f64 * k * rz * pow_z(3.0 * z / eps, z - 1.0) * (z + 1.0).exp2()
    };

    let mut surrogates = WeightedPointSet::empty();
    let mut rest_idx: Vec<usize> = Vec::new();
    for cl in x.clusters() {
        if cl.is_empty() {
            continue;
        }
        let h = m.min(cl.len());
        if h > 0 {
            let head = &cl[..h]; // clusters() is ascending, so lowest-index
            let w: f64 = head.iter().map(|&i| x.data.weights[i]).sum();
            surrogates.push(x.data.points[head[0]].clone(), w, x.data.ids[head[0]]);
        }
        rest_idx.extend_from_slice(&cl[h..]);
    }
    rest_idx.sort_unstable();
    let rest = x.data.subset(&rest_idx);
    let d_prime = oracle.run(&rest, eps, z, metric, rng);

    let mut out = surrogates;
    for i in 0..d_prime.size_count() {
        out.push(d_prime.points[i].clone(), d_prime.weights[i], d_prime.ids[i]);
    }
    (out, delta)
}

/// Importance-sampling coreset for Euclidean instances (the anchors A act
/// as the reference solution). Sampling probabilities mix cost share,
/// cluster share, and in-cluster cost share; per-cluster capacity rescale
/// keeps cluster weights exact.
pub fn coreset3(
    x: &RkInstance,
    a: &CenterSet,
    params: &Params,
    rng: &mut impl Rng,
    metric: &MetricSpace,
) -> (WeightedPointSet, f64) {
    assert!(metric.is_euclidean(), "coreset3 needs the Euclidean backend");
    let (m, eps, z) = (params.m as f64, params.eps, params.z);
    let n = x.data.size_count();
    let rz = pow_z(x.radius, z);
    let cost_total = vanilla_cost(&x.data, a, z, metric);
    let delta = if z == 1.0 {
        6.0 * m * x.radius + eps * cost_total
    } else {
        let gamma = pow_z(6.0 * z, z);
        4.0 * gamma * m * rz / pow_z(eps, z - 1.0) + 2.0 * eps * cost_total
    };
    if n == 0 {
        return (WeightedPointSet::empty(), delta);
    }
    let policy = SampleSizePolicy::from_params(SampleMode::Euclidean, params);
    let s = sample_size(&policy, x.anchors.k(), params.structural_dim, eps, params.m, z);
    if s >= n {
        return (x.data.clone(), delta);
    }

    let clusters = x.clusters();
    let k = x.anchors.k() as f64;
    let dz: Vec<f64> = (0..n)
        .map(|i| pow_z(metric.dist(&x.data.points[i], &a.centers[x.assignment[i]]), z))
        .collect();
    let cluster_n: Vec<f64> = clusters.iter().map(|c| c.len() as f64).collect();
    let cluster_cost: Vec<f64> = clusters
        .iter()
        .map(|c| c.iter().map(|&i| dz[i]).sum())
        .collect();
    // Delta_i = cost_z(X_i, A) / |X_i|.
    let cluster_mean: Vec<f64> = cluster_cost
        .iter()
        .zip(&cluster_n)
        .map(|(&c, &s)| if s > 0.0 { c / s } else { 0.0 })
        .collect();

    let p: Vec<f64> = if cost_total <= 0.0 {
        vec![1.0 / n as f64; n]
    } else {
        let mut p: Vec<f64> = (0..n)
            .map(|i| {
                let ci = x.assignment[i];
                let t1 = (dz[i] + cluster_mean[ci]) / cost_total;
                let t2 = 1.0 / (k * cluster_n[ci]);
                let t3 = if cluster_cost[ci] > 0.0 {
                    dz[i] / (k * cluster_cost[ci])
                } else {
                    0.0
                };
                0.25 * (t1 + t2 + t3)
            })
            .collect();
        let sum: f64 = p.iter().sum();
        let degenerate = cluster_cost.iter().any(|&c| c <= 0.0);
        if !degenerate {
            assert!(
                (sum - 1.0).abs() <= 1e-9,
                "sampling probabilities sum to {sum}, expected 1"
            );
        }
        for v in &mut p {
            *v /= sum;
        }
        p
    };

    let dist = WeightedIndex::new(&p).unwrap();
    let mut acc: BTreeMap<usize, f64> = BTreeMap::new();
    let mut hit_w = vec![0.0f64; clusters.len()];
    for _ in 0..s {
        let i = dist.sample(rng);
        let w = 1.0 / (s as f64 * p[i]);
        if cost_total > 0.0 {
            // Sampling-weight caps; each follows from p >= term / 4.
            let ci = x.assignment[i];
            let mut cap = k * cluster_n[ci];
            if dz[i] > 0.0 {
                cap = cap.min(cost_total / dz[i]);
                if cluster_cost[ci] > 0.0 {
                    cap = cap.min(k * cluster_cost[ci] / dz[i]);
                }
            }
            if cluster_mean[ci] > 0.0 {
                cap = cap.min(cost_total / cluster_mean[ci]);
            }
            let cap = 4.0 / s as f64 * cap;
            assert!(w <= cap * (1.0 + 1e-9), "sampled weight {w} exceeds cap {cap}");
        }
        *acc.entry(i).or_insert(0.0) += w;
        hit_w[x.assignment[i]] += w;
    }
    let mut out: BTreeMap<usize, f64> = BTreeMap::new();
    for (&i, &w) in &acc {
        let ci = x.assignment[i];
        out.insert(i, w * cluster_n[ci] / hit_w[ci]);
    }
    for (ci, cl) in clusters.iter().enumerate() {
        if !cl.is_empty() && hit_w[ci] == 0.0 {
            *out.entry(cl[0]).or_insert(0.0) += cluster_n[ci];
        }
    }
    (collect_weighted(&x.data, &out), delta)
}

/// Multiset union of disjoint coresets; additive budgets add.
pub fn merge(parts: &[(WeightedPointSet, f64)]) -> Result<(WeightedPointSet, f64)> {
    let mut seen = std::collections::HashSet::new();
    let mut out = WeightedPointSet::empty();
    let mut delta = 0.0;
    for (d, dl) in parts {
        for i in 0..d.size_count() {
            if !seen.insert(d.ids[i]) {
                return Err(Error::OverlappingIds(d.ids[i]));
            }
            out.push(d.points[i].clone(), d.weights[i], d.ids[i]);
        }
        delta += dl;
    }
    Ok((out, delta))
}

/// How the builders obtain the approximate solution C*.
#[derive(Debug, Clone)]
pub enum SolverChoice {
    Exact,
    Heuristic { rounds: usize },
    Provided(CenterSet),
}

fn solve(
    x: &WeightedPointSet,
    params: &Params,
    metric: &MetricSpace,
    choice: &SolverChoice,
) -> Result<(CenterSet, f64)> {
    match choice {
        SolverChoice::Exact => exact_solver(x, params.k, params.m, params.z, metric, None),
        SolverChoice::Heuristic { rounds } => {
            heuristic_solver(x, params.k, params.m, params.z, metric, params.seed, *rounds)
        }
        SolverChoice::Provided(c) => {
            let cost = CostProfile::new(x, c, params.z, metric).robust(params.m as f64)?;
            Ok((c.clone(), cost))
        }
    }
}

fn require_unit_weights(x: &WeightedPointSet) -> Result<()> {
    if x.weights.iter().any(|&w| (w - 1.0).abs() > 1e-12) {
        return Err(Error::InvalidData("builders require unit-weight input".into()));
    }
    Ok(())
}

/// End-to-end metric-mode builder: decompose around C*, keep F verbatim,
/// uniform-sample each ring, reduce the inner instance through coreset2.
pub fn build_metric(
    x: &WeightedPointSet,
    params: &Params,
    metric: &MetricSpace,
    solver_choice: &SolverChoice,
    oracle: &VanillaOracle,
) -> Result<CoresetReport> {
    params.validate()?;
    require_unit_weights(x)?;
    let t0 = Instant::now();
    let mut wall = BTreeMap::new();

    let (c_star, ref_cost) = solve(x, params, metric, solver_choice)?;
    wall.insert("solver".to_string(), t0.elapsed().as_secs_f64() * 1e3);

    let t1 = Instant::now();
    let decomp = decompose_metric_z(x, &c_star, params, metric)?;
    wall.insert("decompose".to_string(), t1.elapsed().as_secs_f64() * 1e3);

    let t2 = Instant::now();
    let mut stage_sizes = BTreeMap::new();
    let mut sample_sizes = BTreeMap::new();
    let mut parts: Vec<(WeightedPointSet, f64)> = vec![(decomp.far.clone(), 0.0)];
    stage_sizes.insert("far".to_string(), decomp.far.size_count());

    let policy = SampleSizePolicy::from_params(SampleMode::MetricVcDoubling, params);
    let ring_s = sample_size(
        &policy,
        params.k,
        params.structural_dim,
        params.eps / if params.z == 1.0 { 3.0 } else { pow_z(6.0 * params.z, params.z) },
        params.m,
        params.z,
    );
    for (ri, (ring, _radius)) in decomp.rings.iter().enumerate() {
        let stage = format!("ring-{ri}");
        let (d, dl) = coreset_rk(ring, params, params.seed, &stage)?;
        stage_sizes.insert(stage.clone(), d.size_count());
        sample_sizes.insert(stage, ring_s);
        parts.push((d, dl));
    }

    let mut rng = exec::stream_rng(params.seed, "inner-coreset2");
    let (d_inner, dl_inner) = coreset2(&decomp.inner, params, oracle, &mut rng, metric);
    stage_sizes.insert("inner".to_string(), d_inner.size_count());
    parts.push((d_inner, dl_inner));

    let (coreset, additive_budget) = merge(&parts)?;
    wall.insert("coresets".to_string(), t2.elapsed().as_secs_f64() * 1e3);
    stage_sizes.insert("total".to_string(), coreset.size_count());

    Ok(CoresetReport {
        coreset,
        additive_budget,
        stage_sizes,
        sample_sizes_used: sample_sizes,
        seed: params.seed,
        wall_times_ms: wall,
        reference_cost: ref_cost,
    })
}

/// End-to-end Euclidean builder: two-part decomposition, F verbatim,
/// importance sampling on the inner instance.
pub fn build_euclidean(
    x: &WeightedPointSet,
    params: &Params,
    metric: &MetricSpace,
    solver_choice: &SolverChoice,
) -> Result<CoresetReport> {
    params.validate()?;
    require_unit_weights(x)?;
    if !metric.is_euclidean() {
        return Err(Error::InvalidParam(
            "euclidean builder requires the Euclidean backend".into(),
        ));
    }
    let t0 = Instant::now();
    let mut wall = BTreeMap::new();

    let (c_star, ref_cost) = solve(x, params, metric, solver_choice)?;
    wall.insert("solver".to_string(), t0.elapsed().as_secs_f64() * 1e3);

    let t1 = Instant::now();
    let (far, g) = decompose_euclidean(x, &c_star, params, metric)?;
    wall.insert("decompose".to_string(), t1.elapsed().as_secs_f64() * 1e3);

    let t2 = Instant::now();
    let mut rng = exec::stream_rng(params.seed, "inner-coreset3");
    let (d0, delta0) = coreset3(&g, &c_star, params, &mut rng, metric);
    if params.z == 1.0 && ref_cost > 0.0 {
        // 6 m r_in = 6 eps cost^(m); cost(G,C*) exceeds cost^(m) by at most
        // m * r_in = eps * cost^(m), giving (7 + eps) * eps in total.
        let bound = (7.0 + params.eps) * params.eps * ref_cost;
        assert!(
            delta0 <= bound * (1.0 + 1e-9),
            "inner budget {delta0} exceeds (7 + eps) * eps * cost^(m) = {bound}"
        );
    }
    let (coreset, additive_budget) = merge(&[(far.clone(), 0.0), (d0.clone(), delta0)])?;
    wall.insert("coresets".to_string(), t2.elapsed().as_secs_f64() * 1e3);

    let mut stage_sizes = BTreeMap::new();
    stage_sizes.insert("far".to_string(), far.size_count());
    stage_sizes.insert("inner".to_string(), d0.size_count());
    stage_sizes.insert("total".to_string(), coreset.size_count());
    let policy = SampleSizePolicy::from_params(SampleMode::Euclidean, params);
    let mut sample_sizes = BTreeMap::new();
    sample_sizes.insert(
        "inner".to_string(),
        sample_size(&policy, params.k, params.structural_dim, params.eps, params.m, params.z),
    );

    Ok(CoresetReport {
        coreset,
        additive_budget,
        stage_sizes,
        sample_sizes_used: sample_sizes,
        seed: params.seed,
        wall_times_ms: wall,
        reference_cost: ref_cost,
    })
}

/// Standalone entry for the vanilla oracle; dispatches to
/// identity below `target_size` and sensitivity sampling above it.
pub fn vanilla_oracle(
    x: &WeightedPointSet,
    eps: f64,
    target_size: usize,
    z: f64,
    metric: &MetricSpace,
    rng: &mut impl Rng,
) -> WeightedPointSet {
    let k = ((1.0 / eps).ceil() as usize).max(1);
    VanillaOracle::Empirical { k, target_size }.run(x, eps, z, metric, rng)
}
