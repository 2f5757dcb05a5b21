//! Exact vanilla and robust clustering-cost evaluation for weighted sets,
//! with fractional weighted-outlier removal, plus the brute-force oracle
//! used by tests.

use serde::Serialize;

use crate::exec;
use crate::types::{CenterSet, MetricSpace, WeightedPointSet};
use crate::{Error, Result};

/// dist^z with dist = 0 short-circuited, supporting non-integer z.
pub fn pow_z(dist: f64, z: f64) -> f64 {
    if dist <= 0.0 {
        0.0
    } else {
        (z * dist.ln()).exp()
    }
}

/// Distance to the nearest center.
pub fn dist_to_set(p: &crate::types::Point, c: &CenterSet, metric: &MetricSpace) -> f64 {
    c.centers
        .iter()
        .map(|q| metric.dist(p, q))
        .fold(f64::INFINITY, f64::min)
}

/// Record of a fractional outlier removal: (point index, removed weight)
/// pairs in removal order, plus the retained cost.
#[derive(Debug, Clone, PartialEq)]
pub struct OutlierRemoval {
    pub removed: Vec<(usize, f64)>,
    pub retained_cost: f64,
}

/// cost_z(Y, C) = sum_y w(y) * dist^z(y, C).
pub fn vanilla_cost(y: &WeightedPointSet, c: &CenterSet, z: f64, metric: &MetricSpace) -> f64 {
    let n = y.size_count();
    exec::reduce_indexed(
        n,
        0.0,
        |i| y.weights[i] * pow_z(dist_to_set(&y.points[i], c, metric), z),
        |a, b| a + b,
    )
}

/// Precomputed removal order for one (Y, C, z): lets robust cost be swept
/// over many outlier budgets t without re-sorting. Points are removed in
/// descending dist^z order (ties by ascending point index), which is the
/// exact minimizer because the objective is linear in removed weights.
#[derive(Debug, Clone)]
pub struct CostProfile {
    /// Point indices in removal order.
    order: Vec<usize>,
    /// Cumulative removed weight after each removal-order entry.
    prefix_w: Vec<f64>,
    /// Cumulative removed cost after each removal-order entry.
    prefix_cost: Vec<f64>,
    /// Per-point dist^z in original index order.
    dz: Vec<f64>,
    total_cost: f64,
    total_weight: f64,
}

impl CostProfile {
    pub fn new(y: &WeightedPointSet, c: &CenterSet, z: f64, metric: &MetricSpace) -> Self {
        let n = y.size_count();
        let dz = exec::map_indexed(n, |i| pow_z(dist_to_set(&y.points[i], c, metric), z));
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| {
            dz[b]
                .partial_cmp(&dz[a])
                .unwrap()
                .then_with(|| a.cmp(&b))
        });
        let mut prefix_w = Vec::with_capacity(n);
        let mut prefix_cost = Vec::with_capacity(n);
        let (mut w_acc, mut c_acc) = (0.0, 0.0);
        for &i in &order {
            w_acc += y.weights[i];
            c_acc += y.weights[i] * dz[i];
            prefix_w.push(w_acc);
            prefix_cost.push(c_acc);
        }
        CostProfile {
            order,
            prefix_w,
            prefix_cost,
            dz,
            total_cost: c_acc,
            total_weight: w_acc,
        }
    }

    pub fn total_weight(&self) -> f64 {
        self.total_weight
    }

    pub fn vanilla(&self) -> f64 {
        self.total_cost
    }

    /// cost^(t)_z for one budget; O(log n) after construction.
    pub fn robust(&self, t: f64) -> Result<f64> {
        if t > self.total_weight + 1e-9 {
            return Err(Error::BudgetExceedsWeight {
                budget: t,
                total: self.total_weight,
            });
        }
        let t = t.min(self.total_weight).max(0.0);
        if t == 0.0 {
            return Ok(self.total_cost);
        }
        // First removal-order position where cumulative weight reaches t.
        let pos = self.prefix_w.partition_point(|&w| w < t);
        if pos >= self.order.len() {
            return Ok(0.0);
        }
        let (w_before, c_before) = if pos == 0 {
            (0.0, 0.0)
        } else {
            (self.prefix_w[pos - 1], self.prefix_cost[pos - 1])
        };
        let frac_cost = (t - w_before) * self.dz[self.order[pos]];
        Ok((self.total_cost - c_before - frac_cost).max(0.0))
    }

    /// cost^(t)_z plus the removal record.
    pub fn robust_with_removal(&self, t: f64) -> Result<(f64, OutlierRemoval)> {
        let cost = self.robust(t)?;
        let t = t.min(self.total_weight).max(0.0);
        let mut removed = Vec::new();
        let mut left = t;
        for (pos, &i) in self.order.iter().enumerate() {
            if left <= 0.0 {
                break;
            }
            let w_here = self.prefix_w[pos] - if pos == 0 { 0.0 } else { self.prefix_w[pos - 1] };
            let take = left.min(w_here);
            if take > 0.0 {
                removed.push((i, take));
            }
            left -= take;
        }
        Ok((cost, OutlierRemoval { removed, retained_cost: cost }))
    }
}

/// cost^(t)_z(Y, C): minimum vanilla cost after removing total weight t,
/// per-point removals bounded by the point's weight.
pub fn robust_cost(
    y: &WeightedPointSet,
    c: &CenterSet,
    t: f64,
    z: f64,
    metric: &MetricSpace,
) -> Result<(f64, OutlierRemoval)> {
    CostProfile::new(y, c, z, metric).robust_with_removal(t)
}

/// Exhaustive minimum over all removal patterns of the form
/// "a fully-removed subset plus at most one fractional point".
/// Independent of the greedy implementation; test oracle only.
pub fn robust_cost_oracle(
    y: &WeightedPointSet,
    c: &CenterSet,
    t: f64,
    z: f64,
    metric: &MetricSpace,
) -> Result<f64> {
    let n = y.size_count();
    if n > 12 {
        return Err(Error::OracleTooLarge(n));
    }
    let total_weight = y.total_weight();
    if t > total_weight + 1e-9 {
        return Err(Error::BudgetExceedsWeight { budget: t, total: total_weight });
    }
    let t = t.min(total_weight).max(0.0);
    let dz: Vec<f64> = y
        .points
        .iter()
        .map(|p| pow_z(dist_to_set(p, c, metric), z))
        .collect();
    let total_cost: f64 = (0..n).map(|i| y.weights[i] * dz[i]).sum();
    let mut best = f64::INFINITY;
    for mask in 0u32..(1 << n) {
        let mut rem_w = 0.0;
        let mut rem_c = 0.0;
        for i in 0..n {
            if mask >> i & 1 == 1 {
                rem_w += y.weights[i];
                rem_c += y.weights[i] * dz[i];
            }
        }
        if rem_w > t + 1e-12 {
            continue;
        }
        let short = t - rem_w;
        if short <= 1e-12 {
            best = best.min(total_cost - rem_c);
            continue;
        }
        // One fractional point outside the subset must absorb the shortfall.
        for i in 0..n {
            if mask >> i & 1 == 0 && y.weights[i] >= short - 1e-12 {
                best = best.min(total_cost - rem_c - short * dz[i]);
            }
        }
    }
    if !best.is_finite() {
        return Err(Error::InvalidData("no feasible removal pattern".into()));
    }
    Ok(best.max(0.0))
}

/// Exact evaluation of the z=1 integral identity:
/// cost^(t)(X, C) = integral over u of (||X \ B(C,u)||_1 - t)^+ du,
/// computed piecewise over the sorted-distance breakpoints.
pub fn robust_cost_integral(
    x: &WeightedPointSet,
    c: &CenterSet,
    t: f64,
    metric: &MetricSpace,
) -> Result<f64> {
    let total_weight = x.total_weight();
    if t > total_weight + 1e-9 {
        return Err(Error::BudgetExceedsWeight { budget: t, total: total_weight });
    }
    let t = t.min(total_weight).max(0.0);
    let mut dw: Vec<(f64, f64)> = x
        .points
        .iter()
        .zip(&x.weights)
        .map(|(p, &w)| (dist_to_set(p, c, metric), w))
        .collect();
    dw.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    // Walk breakpoints from 0 upward; on [d_i, d_{i+1}) the excluded weight
    // W(u) = total - (weight at distance <= d_i) is constant.
    let mut cost = 0.0;
    let mut outside = total_weight;
    let mut u_prev = 0.0;
    let mut i = 0;
    while i < dw.len() {
        let d = dw[i].0;
        if d > u_prev {
            cost += (outside - t).max(0.0) * (d - u_prev);
            u_prev = d;
        }
        // Drop all points at exactly this distance.
        while i < dw.len() && dw[i].0 == d {
            outside -= dw[i].1;
            i += 1;
        }
    }
    Ok(cost)
}

/// Distortion sweep result for a coreset against its dataset.
#[derive(Debug, Clone, Serialize)]
pub struct DistortionReport {
    /// Max |cost^t(X,C) - cost^t(D,C)| / cost^t(X,C) over pairs with
    /// cost^t(X,C) > 1e-12.
    pub max_rel: f64,
    /// Max of |diff| - (eps * cost^t(X,C) + delta); <= 0 means every pair
    /// satisfies the budgeted inequality.
    pub max_add_excess: f64,
    /// Fraction of (C, t) pairs satisfying the (eps, delta) inequality.
    pub pass_rate: f64,
    /// (center-set index, t) achieving max_rel.
    pub rel_witness: Option<(usize, usize)>,
    /// (center-set index, t) achieving max_add_excess.
    pub add_witness: Option<(usize, usize)>,
}

/// Evaluate Definition-2.1 distortion of D against X for every center set
/// and every integer t in 0..=m, with the (eps, delta) budget.
pub fn distortion(
    x: &WeightedPointSet,
    d: &WeightedPointSet,
    m: usize,
    z: f64,
    metric: &MetricSpace,
    centers: &[CenterSet],
    eps: f64,
    delta: f64,
) -> Result<DistortionReport> {
    assert!(!centers.is_empty(), "centers must be nonempty");
    // Per center set: (max_rel, max_excess, passes) over t = 0..=m.
    let rows: Vec<Result<(f64, f64, usize, usize, usize)>> =
        exec::map_indexed(centers.len(), |ci| {
            let px = CostProfile::new(x, &centers[ci], z, metric);
            let pd = CostProfile::new(d, &centers[ci], z, metric);
            let mut max_rel = 0.0f64;
            let mut max_exc = f64::NEG_INFINITY;
            let mut passes = 0usize;
            let (mut t_rel, mut t_exc) = (0usize, 0usize);
            for t in 0..=m {
                let cx = px.robust(t as f64)?;
                let cd = pd.robust(t as f64)?;
                let diff = (cx - cd).abs();
                if cx > 1e-12 && diff / cx > max_rel {
                    max_rel = diff / cx;
                    t_rel = t;
                }
                let exc = diff - (eps * cx + delta);
                if exc > max_exc {
                    max_exc = exc;
                    t_exc = t;
                }
                if exc <= 1e-9 {
                    passes += 1;
                }
            }
            Ok((max_rel, max_exc, passes, t_rel, t_exc))
        });
    let mut report = DistortionReport {
        max_rel: 0.0,
        max_add_excess: f64::NEG_INFINITY,
        pass_rate: 0.0,
        rel_witness: None,
        add_witness: None,
    };
    let mut passes = 0usize;
    for (ci, row) in rows.into_iter().enumerate() {
        let (rel, exc, p, t_rel, t_exc) = row?;
        if rel >= report.max_rel {
            if rel > report.max_rel || report.rel_witness.is_none() {
                report.rel_witness = Some((ci, t_rel));
            }
            report.max_rel = rel;
        }
        if exc > report.max_add_excess {
            report.max_add_excess = exc;
            report.add_witness = Some((ci, t_exc));
        }
        passes += p;
    }
    report.pass_rate = passes as f64 / (centers.len() * (m + 1)) as f64;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::Point;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn line() -> MetricSpace {
        MetricSpace::Euclidean { dim: 1 }
    }

    #[test]
    fn vanilla_two_points() {
        let y = WeightedPointSet::from_line(&[0.0, 10.0]);
        let c = CenterSet::from_line(&[0.0]);
        assert!((vanilla_cost(&y, &c, 1.0, &line()) - 10.0).abs() < 1e-9);
    }

    #[test]
    fn vanilla_weighted_square() {
        let y = WeightedPointSet::new(vec![Point::Coords(vec![3.0])], vec![2.0]).unwrap();
        let c = CenterSet::from_line(&[0.0]);
        assert!((vanilla_cost(&y, &c, 2.0, &line()) - 18.0).abs() < 1e-9);
    }

    #[test]
    fn vanilla_2d_triangle() {
        let y = WeightedPointSet::unit(vec![
            Point::Coords(vec![0.0, 0.0]),
            Point::Coords(vec![3.0, 4.0]),
        ]);
        let c = CenterSet::new(vec![Point::Coords(vec![0.0, 0.0])]);
        let m = MetricSpace::Euclidean { dim: 2 };
        assert!((vanilla_cost(&y, &c, 1.0, &m) - 5.0).abs() < 1e-9);
    }

    #[test]
    fn robust_removes_far_point() {
        let y = WeightedPointSet::from_line(&[0.0, 10.0]);
        let c = CenterSet::from_line(&[0.0]);
        let (cost, rem) = robust_cost(&y, &c, 1.0, 1.0, &line()).unwrap();
        assert!(cost.abs() < 1e-9);
        assert_eq!(rem.removed, vec![(1, 1.0)]);
    }

    #[test]
    fn robust_partial_heavy_point() {
        let y =
            WeightedPointSet::new(vec![Point::Coords(vec![0.0]), Point::Coords(vec![5.0])], vec![1.0, 2.0])
                .unwrap();
        let c = CenterSet::from_line(&[0.0]);
        let (cost, rem) = robust_cost(&y, &c, 1.0, 1.0, &line()).unwrap();
        assert!((cost - 5.0).abs() < 1e-9);
        assert_eq!(rem.removed, vec![(1, 1.0)]);
    }

    #[test]
    fn robust_fractional_budget() {
        let y = WeightedPointSet::from_line(&[1.0, 2.0, 3.0]);
        let c = CenterSet::from_line(&[0.0]);
        let (cost, rem) = robust_cost(&y, &c, 1.5, 1.0, &line()).unwrap();
        assert!((cost - 2.0).abs() < 1e-9);
        assert_eq!(rem.removed.len(), 2);
        assert_eq!(rem.removed[0], (2, 1.0));
        assert_eq!(rem.removed[1].0, 1);
        assert!((rem.removed[1].1 - 0.5).abs() < 1e-12);
    }

    #[test]
    fn robust_budget_over_weight_errors() {
        let y = WeightedPointSet::from_line(&[1.0]);
        let c = CenterSet::from_line(&[0.0]);
        assert!(robust_cost(&y, &c, 2.0, 1.0, &line()).is_err());
    }

    #[test]
    fn oracle_trivial_cases() {
        let c = CenterSet::from_line(&[4.0]);
        let y = WeightedPointSet::from_line(&[0.0]);
        assert!(robust_cost_oracle(&y, &c, 1.0, 1.0, &line()).unwrap().abs() < 1e-9);

        let y2 = WeightedPointSet::new(vec![Point::Coords(vec![0.0])], vec![2.0]).unwrap();
        let got = robust_cost_oracle(&y2, &c, 1.0, 1.0, &line()).unwrap();
        assert!((got - 4.0).abs() < 1e-9);
    }

    #[test]
    fn oracle_matches_greedy_on_worked_examples() {
        let c = CenterSet::from_line(&[0.0]);
        let cases: Vec<(WeightedPointSet, f64)> = vec![
            (WeightedPointSet::from_line(&[0.0, 10.0]), 1.0),
            (
                WeightedPointSet::new(
                    vec![Point::Coords(vec![0.0]), Point::Coords(vec![5.0])],
                    vec![1.0, 2.0],
                )
                .unwrap(),
                1.0,
            ),
            (WeightedPointSet::from_line(&[1.0, 2.0, 3.0]), 1.5),
        ];
        for (y, t) in cases {
            let greedy = robust_cost(&y, &c, t, 1.0, &line()).unwrap().0;
            let oracle = robust_cost_oracle(&y, &c, t, 1.0, &line()).unwrap();
            assert!((greedy - oracle).abs() < 1e-9);
        }
    }

    /// Fully exhaustive removal enumeration on a weight grid; validates the
    /// "subset + one fractional point" pattern class of the main oracle.
    fn grid_oracle(y: &WeightedPointSet, c: &CenterSet, t: f64, z: f64, metric: &MetricSpace) -> f64 {
        let dz: Vec<f64> = y
            .points
            .iter()
            .map(|p| pow_z(dist_to_set(p, c, metric), z))
            .collect();
        let total: f64 = y.weights.iter().zip(&dz).map(|(w, d)| w * d).sum();
        let step = 0.01;
        fn rec(i: usize, left: f64, saved: f64, y: &WeightedPointSet, dz: &[f64], step: f64, best: &mut f64) {
            if left < step / 2.0 {
                *best = (*best).min(saved);
                return;
            }
            if i == y.points.len() {
                return;
            }
            let max_units = ((y.weights[i].min(left)) / step + 0.5).floor() as usize;
            for u in 0..=max_units {
                let r = u as f64 * step;
                rec(i + 1, left - r, saved - r * dz[i], y, dz, step, best);
            }
        }
        let mut best = f64::INFINITY;
        rec(0, t, total, y, &dz, step, &mut best);
        best.max(0.0)
    }

    #[test]
    fn oracle_pattern_class_is_optimal_small() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let n = rng.gen_range(1..=4);
            let pts: Vec<f64> = (0..n).map(|_| rng.gen_range(0..10) as f64).collect();
            let ws: Vec<f64> = (0..n).map(|_| rng.gen_range(1..=3) as f64 * 0.5).collect();
            let y = WeightedPointSet::new(
                pts.iter().map(|&x| Point::Coords(vec![x])).collect(),
                ws.clone(),
            )
            .unwrap();
            let c = CenterSet::from_line(&[0.0]);
            let total: f64 = ws.iter().sum();
            let t = (rng.gen_range(0..=((total / 0.25) as usize)) as f64 * 0.25).min(total);
            let a = robust_cost_oracle(&y, &c, t, 1.0, &line()).unwrap();
            let b = grid_oracle(&y, &c, t, 1.0, &line());
            assert!((a - b).abs() < 1e-9, "t={t} oracle={a} grid={b}");
        }
    }

    #[test]
    fn greedy_matches_oracle_randomized() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for trial in 0..200 {
            let n = rng.gen_range(1..=10);
            let pts: Vec<Point> = (0..n)
                .map(|_| Point::Coords(vec![rng.gen_range(-5.0..5.0)]))
                .collect();
            let ws: Vec<f64> = (0..n)
                .map(|_| if rng.gen_bool(0.5) { rng.gen_range(1..=3) as f64 } else { rng.gen_range(0.1..3.0) })
                .collect();
            let y = WeightedPointSet::new(pts, ws).unwrap();
            let c = CenterSet::from_line(&[rng.gen_range(-2.0..2.0)]);
            let z = [1.0, 1.5, 2.0][trial % 3];
            let total = y.total_weight();
            let t = (rng.gen_range(0..=(total / 0.25) as usize) as f64 * 0.25).min(total);
            let greedy = robust_cost(&y, &c, t, z, &line()).unwrap().0;
            let oracle = robust_cost_oracle(&y, &c, t, z, &line()).unwrap();
            assert!(
                (greedy - oracle).abs() <= 1e-9 * greedy.abs().max(1.0),
                "trial {trial}: greedy={greedy} oracle={oracle}"
            );
        }
    }

    #[test]
    fn monotone_in_budget_and_zero_matches_vanilla() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let n = rng.gen_range(1..=12);
            let y = WeightedPointSet::from_line(
                &(0..n).map(|_| rng.gen_range(-10.0..10.0)).collect::<Vec<_>>(),
            );
            let c = CenterSet::from_line(&[0.0]);
            let prof = CostProfile::new(&y, &c, 1.0, &line());
            assert!((prof.robust(0.0).unwrap() - vanilla_cost(&y, &c, 1.0, &line())).abs() < 1e-9);
            let mut prev = f64::INFINITY;
            let mut t = 0.0;
            while t <= y.total_weight() {
                let v = prof.robust(t).unwrap();
                assert!(v <= prev + 1e-12);
                prev = v;
                t += 0.5;
            }
        }
    }

    #[test]
    fn scale_covariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..30 {
            let n = rng.gen_range(2..=8);
            let xs: Vec<f64> = (0..n).map(|_| rng.gen_range(-5.0..5.0)).collect();
            let lam = rng.gen_range(0.2..4.0);
            let z = [1.0, 1.5, 2.0][rng.gen_range(0..3)];
            let t = rng.gen_range(0.0..n as f64);
            let y = WeightedPointSet::from_line(&xs);
            let ys = WeightedPointSet::from_line(&xs.iter().map(|v| v * lam).collect::<Vec<_>>());
            let cc = rng.gen_range(-2.0..2.0);
            let c = CenterSet::from_line(&[cc]);
            let cs = CenterSet::from_line(&[cc * lam]);
            let a = robust_cost(&y, &c, t, z, &line()).unwrap().0;
            let b = robust_cost(&ys, &cs, t, z, &line()).unwrap().0;
            assert!((b - a * pow_z(lam, z)).abs() <= 1e-9 * b.abs().max(1.0));
        }
    }

    #[test]
    fn integral_identity_randomized() {
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        for _ in 0..100 {
            let n = rng.gen_range(1..=15);
            let pts: Vec<Point> = (0..n)
                .map(|_| Point::Coords(vec![rng.gen_range(-10.0..10.0)]))
                .collect();
            let ws: Vec<f64> = (0..n).map(|_| rng.gen_range(0.5..2.5)).collect();
            let y = WeightedPointSet::new(pts, ws).unwrap();
            let c = CenterSet::from_line(&[rng.gen_range(-3.0..3.0)]);
            let t = rng.gen_range(0.0..y.total_weight());
            let greedy = robust_cost(&y, &c, t, 1.0, &line()).unwrap().0;
            let integral = robust_cost_integral(&y, &c, t, &line()).unwrap();
            assert!((greedy - integral).abs() <= 1e-9 * greedy.abs().max(1.0));
        }
    }

    #[test]
    fn distortion_identity_is_zero() {
        let x = WeightedPointSet::from_line(&[0.0, 1.0, 5.0, 9.0]);
        let centers = vec![CenterSet::from_line(&[0.0]), CenterSet::from_line(&[5.0])];
        let r = distortion(&x, &x, 3, 1.0, &line(), &centers, 0.0, 0.0).unwrap();
        assert_eq!(r.max_rel, 0.0);
        assert!(r.max_add_excess <= 0.0);
        assert_eq!(r.pass_rate, 1.0);
    }

    #[test]
    fn distortion_collapsed_coreset() {
        let x = WeightedPointSet::from_line(&[0.0, 10.0]);
        let d = WeightedPointSet::new(vec![Point::Coords(vec![0.0])], vec![2.0]).unwrap();
        let centers = vec![CenterSet::from_line(&[0.0])];
        let r = distortion(&x, &d, 0, 1.0, &line(), &centers, 0.0, 0.0).unwrap();
        assert!((r.max_add_excess - 10.0).abs() < 1e-9);
        assert_eq!(r.add_witness, Some((0, 0)));
    }
}
