//! Dataset decompositions driven by an approximate solution C*: far points,
//! geometrically layered rings, an inner instance, and the regular split.

use crate::cost::{dist_to_set, pow_z, CostProfile};
use crate::types::{
    CenterSet, Decomposition, MetricSpace, Params, RegularInstance, RkInstance, WeightedPointSet,
};
use crate::{make_rk_instance, Result};

/// Indices of the `count` points farthest from `c` (ties: lower index
/// goes in), followed by the rest.
fn split_farthest(
    x: &WeightedPointSet,
    c: &CenterSet,
    metric: &MetricSpace,
    count: usize,
) -> (Vec<usize>, Vec<usize>, Vec<f64>) {
    let dist: Vec<f64> = x
        .points
        .iter()
        .map(|p| dist_to_set(p, c, metric))
        .collect();
    let mut order: Vec<usize> = (0..x.size_count()).collect();
    order.sort_by(|&a, &b| dist[b].partial_cmp(&dist[a]).unwrap().then_with(|| a.cmp(&b)));
    let far = order[..count.min(order.len())].to_vec();
    let rest = order[count.min(order.len())..].to_vec();
    (far, rest, dist)
}

/// Metric decomposition for z = 1.
pub fn decompose_metric(
    x: &WeightedPointSet,
    c_star: &CenterSet,
    params: &Params,
    metric: &MetricSpace,
) -> Result<Decomposition> {
    let mut p = params.clone();
    p.z = 1.0;
    decompose_metric_z(x, c_star, &p, metric)
}

/// Metric decomposition for general z >= 1: peel off the m + ceil(1/eps)
/// farthest points as F, layer the rest into geometric rings around C*,
/// and keep the innermost layers as one small-radius instance G.
pub fn decompose_metric_z(
    x: &WeightedPointSet,
    c_star: &CenterSet,
    params: &Params,
    metric: &MetricSpace,
) -> Result<Decomposition> {
    params.validate()?;
    let (m, k, eps, z) = (params.m, params.k, params.eps, params.z);
    let f_count = m + (1.0 / eps).ceil() as usize;
    let empty_inner = |anchors: &CenterSet| {
        make_rk_instance(WeightedPointSet::empty(), anchors.clone(), metric)
    };
    if x.size_count() <= f_count {
        return Ok(Decomposition {
            far: x.clone(),
            rings: vec![],
            inner: empty_inner(c_star),
        });
    }
    let (far_idx, rest_idx, dist) = split_farthest(x, c_star, metric, f_count);
    let far = x.subset(&far_idx);
    let y_dz: Vec<f64> = rest_idx.iter().map(|&i| pow_z(dist[i], z)).collect();
    let rz = y_dz.iter().sum::<f64>() / rest_idx.len() as f64;

    let robust_m = CostProfile::new(x, c_star, z, metric).robust(m as f64)?;

    if rz <= 0.0 {
        // Everything left sits on C*: no rings, inner radius 0.
        let inner = make_rk_instance(x.subset(&rest_idx), c_star.clone(), metric);
        return Ok(Decomposition { far, rings: vec![], inner });
    }

    // Ring index of each remaining point: smallest i with dist^z inside the
    // closed ball of threshold 2^i * eps * r^z.
    let base = eps * rz;
    let ring_of = |dz: f64| -> usize {
        if dz <= base {
            return 0;
        }
        let mut i = (dz / base).log2().ceil().max(1.0) as usize;
        while i > 0 && dz <= pow2(i - 1) * base {
            i -= 1;
        }
        while dz > pow2(i) * base {
            i += 1;
        }
        i
    };
    let rings_idx: Vec<usize> = y_dz.iter().map(|&dz| ring_of(dz)).collect();
    let t_max = rings_idx.iter().copied().max().unwrap_or(0);
    let s_cap = (z + ((m.max(1) * k) as f64).log2()).ceil() as usize;
    let s = s_cap.min(t_max);

    let cut = t_max - s; // rings with index <= cut form the inner instance G
    let mut inner_idx = Vec::new();
    let mut per_ring: Vec<Vec<usize>> = vec![Vec::new(); s];
    for (pos, &orig) in rest_idx.iter().enumerate() {
        let ri = rings_idx[pos];
        if ri <= cut {
            inner_idx.push(orig);
        } else {
            per_ring[ri - cut - 1].push(orig);
        }
    }
    inner_idx.sort_unstable();
    let rings = per_ring
        .into_iter()
        .enumerate()
        .map(|(off, mut idxs)| {
            idxs.sort_unstable();
            let i = cut + 1 + off;
            let radius = pow_z_inv(pow2(i) * base, z);
            (make_rk_instance(x.subset(&idxs), c_star.clone(), metric), radius)
        })
        .collect();
    let inner = make_rk_instance(x.subset(&inner_idx), c_star.clone(), metric);
    let r_in_bound = eps * pow_z_inv(robust_m / (m.max(1) * k) as f64, z);
    assert!(
        inner.radius <= r_in_bound + 1e-9,
        "inner radius {} exceeds bound {}",
        inner.radius,
        r_in_bound
    );
    Ok(Decomposition { far, rings, inner })
}

fn pow2(i: usize) -> f64 {
    (i as f64).exp2()
}

/// t^(1/z) with zero short-circuited, the inverse of [`pow_z`].
fn pow_z_inv(t: f64, z: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else {
        (t.ln() / z).exp()
    }
}

/// Euclidean decomposition: F = everything beyond a
/// single cost-derived radius, G = the rest as one instance around C*.
pub fn decompose_euclidean(
    x: &WeightedPointSet,
    c_star: &CenterSet,
    params: &Params,
    metric: &MetricSpace,
) -> Result<(WeightedPointSet, RkInstance)> {
    params.validate()?;
    let (m, eps, z) = (params.m, params.eps, params.z);
    if m == 0 {
        let g = make_rk_instance(x.clone(), c_star.clone(), metric);
        return Ok((WeightedPointSet::empty(), g));
    }
    let robust_m = CostProfile::new(x, c_star, z, metric).robust(m as f64)?;
    let dist: Vec<f64> = x
        .points
        .iter()
        .map(|p| dist_to_set(p, c_star, metric))
        .collect();
    if robust_m <= 1e-12 {
        // Degenerate: at most m points sit off C*; they are all of F.
        let far_idx: Vec<usize> = (0..x.size_count()).filter(|&i| dist[i] > 0.0).collect();
        let rest: Vec<usize> = (0..x.size_count()).filter(|&i| dist[i] == 0.0).collect();
        let g = make_rk_instance(x.subset(&rest), c_star.clone(), metric);
        return Ok((x.subset(&far_idx), g));
    }
    let r_in = if z == 1.0 {
        eps / m as f64 * robust_m
    } else {
        let gamma = pow_z(6.0 * z, z);
        pow_z_inv(robust_m / (gamma * m as f64 * pow_z(eps, -z)), z)
    };
    let far_idx: Vec<usize> = (0..x.size_count()).filter(|&i| dist[i] > r_in).collect();
    let rest: Vec<usize> = (0..x.size_count()).filter(|&i| dist[i] <= r_in).collect();
    assert!(
        far_idx.len() as f64 <= m as f64 + m as f64 / eps + 1.0,
        "|F| = {} exceeds m + m/eps + 1",
        far_idx.len()
    );
    let mut g = make_rk_instance(x.subset(&rest), c_star.clone(), metric);
    g.radius = r_in; // nominal covering radius; realized max distance is <= it
    Ok((x.subset(&far_idx), g))
}

/// Output of [`split_regular`]: small clusters collapsed to one weighted
/// representative each, the rest grouped into dyadic size buckets that each
/// satisfy the factor-2 regularity condition.
#[derive(Debug, Clone)]
pub struct RegularSplit {
    /// One lowest-index representative per small cluster, carrying the
    /// cluster's full weight.
    pub representatives: WeightedPointSet,
    pub buckets: Vec<RegularInstance>,
}

/// Partition an instance's clusters by size: clusters of weight at most
/// eps^z * n / k collapse to representatives; larger ones are grouped into
/// buckets of sizes in (2^{j-1}, 2^j] * eps^z * n / k.
pub fn split_regular(g: &RkInstance, eps: f64, z: f64) -> Result<RegularSplit> {
    let n = g.data.size_count() as f64;
    let k = g.anchors.k() as f64;
    let thr = pow_z(eps, z) * n / k;
    let clusters = g.clusters();

    let mut representatives = WeightedPointSet::empty();
    let mut by_bucket: std::collections::BTreeMap<u32, Vec<usize>> = Default::default();
    for (a, cl) in clusters.iter().enumerate() {
        if cl.is_empty() {
            continue;
        }
        let size = cl.len() as f64;
        if size <= thr {
            let rep = cl[0]; // clusters() yields ascending point order
            let weight: f64 = cl.iter().map(|&i| g.data.weights[i]).sum();
            representatives.push(g.data.points[rep].clone(), weight, g.data.ids[rep]);
        } else {
            // Smallest j >= 1 with size <= 2^j * thr.
            let mut j = 1u32;
            while size > (j as f64).exp2() * thr {
                j += 1;
            }
            by_bucket.entry(j).or_default().push(a);
        }
    }

    let mut buckets = Vec::new();
    for (_, anchor_idxs) in by_bucket {
        let anchors = CenterSet::new(
            anchor_idxs
                .iter()
                .map(|&a| g.anchors.centers[a].clone())
                .collect(),
        );
        let mut points = Vec::new();
        let mut weights = Vec::new();
        let mut ids = Vec::new();
        let mut assignment = Vec::new();
        for (new_a, &a) in anchor_idxs.iter().enumerate() {
            for &i in &clusters[a] {
                points.push(g.data.points[i].clone());
                weights.push(g.data.weights[i]);
                ids.push(g.data.ids[i]);
                assignment.push(new_a);
            }
        }
        let data = WeightedPointSet { points, weights, ids };
        let inst = RkInstance {
            data,
            anchors,
            radius: g.radius,
            assignment,
        };
        buckets.push(RegularInstance::new(inst)?);
    }
    Ok(RegularSplit { representatives, buckets })
}

/// Sum of nominal ring budgets r_i^z * |R_i|; the ring construction bounds this by
/// twice the robust cost of C*. Exposed for tests and reports.
pub fn ring_budget(d: &Decomposition, z: f64) -> f64 {
    d.rings
        .iter()
        .map(|(inst, r)| pow_z(*r, z) * inst.data.size_count() as f64)
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cost::robust_cost;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn line() -> MetricSpace {
        MetricSpace::Euclidean { dim: 1 }
    }

    fn ids_sorted(s: &WeightedPointSet) -> Vec<usize> {
        let mut v = s.ids.clone();
        v.sort_unstable();
        v
    }

    fn decomposition_ids(d: &Decomposition) -> Vec<usize> {
        let mut all = d.far.ids.clone();
        for (r, _) in &d.rings {
            all.extend_from_slice(&r.data.ids);
        }
        all.extend_from_slice(&d.inner.data.ids);
        all.sort_unstable();
        all
    }

    #[test]
    fn metric_collinear_twelve() {
        let xs: Vec<f64> = (1..=12).map(|i| i as f64).collect();
        let x = WeightedPointSet::from_line(&xs);
        let c = CenterSet::from_line(&[0.0]);
        let p = Params::new(1, 1, 0.5, 1.0);
        let d = decompose_metric(&x, &c, &p, &line()).unwrap();
        // F = 3 farthest: points 12, 11, 10 (ids 11, 10, 9)
        assert_eq!(ids_sorted(&d.far), vec![9, 10, 11]);
        // r = (1+..+9)/9 = 5; T = 2, s = min(ceil(1+log2 1), 2) = 1
        assert_eq!(d.rings.len(), 1);
        assert_eq!(ids_sorted(&d.rings[0].0.data), vec![5, 6, 7, 8]); // {6,7,8,9}
        assert!((d.rings[0].1 - 10.0).abs() < 1e-9); // 2^2 * 0.5 * 5
        assert_eq!(ids_sorted(&d.inner.data), vec![0, 1, 2, 3, 4]); // {1..5}
        assert!((d.inner.radius - 5.0).abs() < 1e-12);
        assert_eq!(decomposition_ids(&d), (0..12).collect::<Vec<_>>());
    }

    #[test]
    fn metric_identical_points() {
        let x = WeightedPointSet::from_line(&[3.0; 8]);
        let c = CenterSet::from_line(&[3.0]);
        let p = Params::new(2, 1, 0.5, 1.0);
        let d = decompose_metric(&x, &c, &p, &line()).unwrap();
        assert_eq!(ids_sorted(&d.far), vec![0, 1, 2]); // first m + ceil(1/eps) by index
        assert!(d.rings.is_empty());
        assert_eq!(d.inner.data.size_count(), 5);
        assert_eq!(d.inner.radius, 0.0);
    }

    #[test]
    fn metric_small_input_all_far() {
        let x = WeightedPointSet::from_line(&[1.0, 2.0]);
        let c = CenterSet::from_line(&[0.0]);
        let p = Params::new(1, 1, 0.5, 1.0);
        let d = decompose_metric(&x, &c, &p, &line()).unwrap();
        assert_eq!(d.far.size_count(), 2);
        assert!(d.rings.is_empty());
        assert!(d.inner.data.is_empty());
    }

    #[test]
    fn metric_z2_hand_execution() {
        let x = WeightedPointSet::from_line(&[1.0, 2.0, 4.0, 8.0, 100.0, 200.0]);
        let c = CenterSet::from_line(&[0.0]);
        let p = Params::new(1, 1, 0.5, 2.0);
        let d = decompose_metric_z(&x, &c, &p, &line()).unwrap();
        // F = 3 farthest {200, 100, 8}; Y = {1,2,4}, r^2 = 7.
        assert_eq!(ids_sorted(&d.far), vec![3, 4, 5]);
        // Rings R_2 (empty), R_3 = {4}; inner = {1, 2}.
        assert_eq!(d.rings.len(), 2);
        assert_eq!(d.rings[0].0.data.size_count(), 0);
        assert_eq!(ids_sorted(&d.rings[1].0.data), vec![2]);
        assert_eq!(ids_sorted(&d.inner.data), vec![0, 1]);
        assert_eq!(decomposition_ids(&d), (0..6).collect::<Vec<_>>());
    }

    #[test]
    fn metric_z1_wrapper_matches_general() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..20 {
            let n = rng.gen_range(5..40);
            let xs: Vec<f64> = (0..n).map(|_| rng.gen_range(-50.0..50.0)).collect();
            let x = WeightedPointSet::from_line(&xs);
            let c = CenterSet::from_line(&[rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0)]);
            let p = Params::new(2, 2, 0.3, 1.0);
            let a = decompose_metric(&x, &c, &p, &line()).unwrap();
            let b = decompose_metric_z(&x, &c, &p, &line()).unwrap();
            assert_eq!(decomposition_ids(&a), decomposition_ids(&b));
            assert_eq!(ids_sorted(&a.far), ids_sorted(&b.far));
            assert_eq!(a.rings.len(), b.rings.len());
        }
    }

    #[test]
    fn metric_partition_and_budget_randomized() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for trial in 0..50 {
            let n = rng.gen_range(8..60);
            let xs: Vec<f64> = (0..n).map(|_| rng.gen_range(-100.0..100.0)).collect();
            let x = WeightedPointSet::from_line(&xs);
            let c = CenterSet::from_line(&[rng.gen_range(-10.0..10.0)]);
            let z = [1.0, 1.5, 2.0][trial % 3];
            let p = Params::new(1, rng.gen_range(0..3), 0.4, z);
            let d = decompose_metric_z(&x, &c, &p, &line()).unwrap();
            assert_eq!(decomposition_ids(&d), (0..n).collect::<Vec<_>>());
            // Ring-count and budget-ledger invariants.
            let cap = (z + ((p.m.max(1) * p.k) as f64).log2()).ceil() as usize;
            assert!(d.rings.len() <= cap);
            let robust = robust_cost(&x, &c, p.m as f64, z, &line()).unwrap().0;
            assert!(
                ring_budget(&d, z) <= 2.0 * robust + 1e-9,
                "budget {} vs 2*{}",
                ring_budget(&d, z),
                robust
            );
        }
    }

    #[test]
    fn euclidean_degenerate_zero_cost() {
        let mut xs = vec![0.0; 9];
        xs.push(100.0);
        let x = WeightedPointSet::from_line(&xs);
        let c = CenterSet::from_line(&[0.0]);
        let p = Params::new(1, 1, 0.5, 1.0);
        let (f, g) = decompose_euclidean(&x, &c, &p, &line()).unwrap();
        assert_eq!(f.ids, vec![9]);
        assert_eq!(g.data.size_count(), 9);
        assert_eq!(g.radius, 0.0);
    }

    #[test]
    fn euclidean_threshold_hand_evaluation() {
        let mut xs: Vec<f64> = (0..10).map(|i| i as f64).collect();
        xs.push(1000.0);
        let x = WeightedPointSet::from_line(&xs);
        let c = CenterSet::from_line(&[0.0]);
        let p = Params::new(1, 1, 0.5, 1.0);
        let (f, g) = decompose_euclidean(&x, &c, &p, &line()).unwrap();
        // cost^(1) = 45, r_in = 22.5
        assert_eq!(f.ids, vec![10]);
        assert!((g.radius - 22.5).abs() < 1e-9);
        assert_eq!(g.data.size_count(), 10);
    }

    #[test]
    fn euclidean_m_zero_keeps_everything() {
        let x = WeightedPointSet::from_line(&[0.0, 5.0, 50.0]);
        let c = CenterSet::from_line(&[0.0]);
        let p = Params::new(1, 0, 0.5, 1.0);
        let (f, g) = decompose_euclidean(&x, &c, &p, &line()).unwrap();
        assert!(f.is_empty());
        assert_eq!(g.data.size_count(), 3);
    }

    #[test]
    fn euclidean_partition_randomized() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        for _ in 0..30 {
            let n = rng.gen_range(5..50);
            let xs: Vec<f64> = (0..n).map(|_| rng.gen_range(-20.0..20.0)).collect();
            let x = WeightedPointSet::from_line(&xs);
            let c = CenterSet::from_line(&[0.0]);
            let p = Params::new(1, rng.gen_range(1..4), 0.3, 1.0);
            let (f, g) = decompose_euclidean(&x, &c, &p, &line()).unwrap();
            let mut all = f.ids.clone();
            all.extend_from_slice(&g.data.ids);
            all.sort_unstable();
            assert_eq!(all, (0..n).collect::<Vec<_>>());
        }
    }

    #[test]
    fn split_regular_hand_buckets() {
        // k=3, n=8, eps=1, z=1: threshold 8/3; sizes (1,2,5).
        let x = WeightedPointSet::from_line(&[0.0, 10.0, 10.1, 20.0, 20.1, 20.2, 19.9, 19.8]);
        let c = CenterSet::from_line(&[0.0, 10.0, 20.0]);
        let g = make_rk_instance(x, c, &line());
        let split = split_regular(&g, 1.0, 1.0).unwrap();
        assert_eq!(split.representatives.size_count(), 2); // sizes 1 and 2
        assert_eq!(split.buckets.len(), 1);
        assert_eq!(split.buckets[0].0.data.size_count(), 5);
        // Representatives carry full cluster weight.
        let w: f64 = split.representatives.weights.iter().sum();
        assert!((w - 3.0).abs() < 1e-12);
    }

    #[test]
    fn split_regular_equal_sizes_single_bucket() {
        let x = WeightedPointSet::from_line(&[0.0, 0.1, 10.0, 10.1, 20.0, 20.1]);
        let c = CenterSet::from_line(&[0.0, 10.0, 20.0]);
        let g = make_rk_instance(x, c, &line());
        let split = split_regular(&g, 0.5, 1.0).unwrap();
        assert!(split.representatives.is_empty());
        assert_eq!(split.buckets.len(), 1);
        assert_eq!(split.buckets[0].0.data.size_count(), 6);
    }

    #[test]
    fn split_regular_covers_all_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..30 {
            let n = rng.gen_range(6..60);
            let xs: Vec<f64> = (0..n).map(|_| rng.gen_range(-30.0..30.0)).collect();
            let x = WeightedPointSet::from_line(&xs);
            let c = CenterSet::from_line(&[-20.0, 0.0, 20.0]);
            let g = make_rk_instance(x, c, &line());
            let split = split_regular(&g, 0.4, 1.0).unwrap();
            let covered: usize = split.representatives.size_count()
                + split
                    .buckets
                    .iter()
                    .map(|b| b.0.data.size_count())
                    .sum::<usize>();
            let weight: f64 = split.representatives.total_weight()
                + split
                    .buckets
                    .iter()
                    .map(|b| b.0.data.total_weight())
                    .sum::<f64>();
            assert!(covered <= n);
            assert!((weight - n as f64).abs() < 1e-9);
        }
    }
}
