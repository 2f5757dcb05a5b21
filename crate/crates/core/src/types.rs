//! Shared domain types: points, metric backends, weighted sets, instances.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// A point in either backend: explicit coordinates, or an index into the
/// universe of an explicit distance matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Point {
    Coords(Vec<f64>),
    Index(usize),
}

impl Point {
    pub fn coords(&self) -> &[f64] {
        match self {
            Point::Coords(c) => c,
            Point::Index(_) => panic!("coords() on an explicit-metric point"),
        }
    }
}

/// Symmetric nonnegative distance matrix over a finite universe.
#[derive(Debug, Clone)]
pub struct DistanceMatrix {
    n: usize,
    d: Vec<f64>,
    /// False when the universe exceeded the O(n^3) validation cutoff and the
    /// triangle inequality was taken on trust.
    pub triangle_checked: bool,
}

/// Universe size above which the O(n^3) triangle-inequality check is skipped.
pub const TRIANGLE_CHECK_MAX: usize = 512;

impl DistanceMatrix {
    /// Validate symmetry, zero diagonal, nonnegativity; check the triangle
    /// inequality exhaustively for universes up to [`TRIANGLE_CHECK_MAX`].
    pub fn new(n: usize, d: Vec<f64>) -> Result<Self> {
        if d.len() != n * n {
            return Err(Error::InvalidData(format!(
                "distance matrix has {} entries, expected {}",
                d.len(),
                n * n
            )));
        }
        for i in 0..n {
            if d[i * n + i].abs() > 1e-9 {
                return Err(Error::InvalidData(format!("nonzero diagonal at {i}")));
            }
            for j in 0..n {
                let v = d[i * n + j];
                if !v.is_finite() || v < 0.0 {
                    return Err(Error::InvalidData(format!("bad distance at ({i},{j})")));
                }
                if (v - d[j * n + i]).abs() > 1e-9 {
                    return Err(Error::InvalidData(format!("asymmetric at ({i},{j})")));
                }
            }
        }
        let triangle_checked = n <= TRIANGLE_CHECK_MAX;
        if triangle_checked {
            for i in 0..n {
                for j in 0..n {
                    for l in 0..n {
                        if d[i * n + j] > d[i * n + l] + d[l * n + j] + 1e-9 {
                            return Err(Error::InvalidData(format!(
                                "triangle inequality violated at ({i},{j},{l})"
                            )));
                        }
                    }
                }
            }
        }
        Ok(DistanceMatrix { n, d, triangle_checked })
    }

    pub fn universe_size(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.d[i * self.n + j]
    }
}

/// Distance-oracle abstraction. The power z lives in the cost layer.
#[derive(Debug, Clone)]
pub enum MetricSpace {
    Euclidean { dim: usize },
    Explicit(DistanceMatrix),
}

impl MetricSpace {
    pub fn dist(&self, p: &Point, q: &Point) -> f64 {
        match (self, p, q) {
            (MetricSpace::Euclidean { .. }, Point::Coords(a), Point::Coords(b)) => {
                debug_assert_eq!(a.len(), b.len());
                a.iter()
                    .zip(b)
                    .map(|(x, y)| (x - y) * (x - y))
                    .sum::<f64>()
                    .sqrt()
            }
            (MetricSpace::Explicit(m), Point::Index(i), Point::Index(j)) => m.get(*i, *j),
            _ => panic!("point/backend mismatch"),
        }
    }

    pub fn is_euclidean(&self) -> bool {
        matches!(self, MetricSpace::Euclidean { .. })
    }
}

/// Points with nonnegative weights and stable identities. `ids` track the
/// original dataset index of each point so decomposition outputs can be
/// checked to partition the input and merges can reject overlaps.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedPointSet {
    pub points: Vec<Point>,
    pub weights: Vec<f64>,
    pub ids: Vec<usize>,
}

impl WeightedPointSet {
    pub fn new(points: Vec<Point>, weights: Vec<f64>) -> Result<Self> {
        if points.len() != weights.len() {
            return Err(Error::InvalidData(
                "points/weights length mismatch".into(),
            ));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidData("weights must be finite and >= 0".into()));
        }
        let ids = (0..points.len()).collect();
        Ok(WeightedPointSet { points, weights, ids })
    }

    /// Unweighted dataset: all weights 1.
    pub fn unit(points: Vec<Point>) -> Self {
        let weights = vec![1.0; points.len()];
        let ids = (0..points.len()).collect();
        WeightedPointSet { points, weights, ids }
    }

    /// 1-D Euclidean convenience constructor (ubiquitous in tests).
    pub fn from_line(xs: &[f64]) -> Self {
        Self::unit(xs.iter().map(|&x| Point::Coords(vec![x])).collect())
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Number of points, written ||Y||_0.
    pub fn size_count(&self) -> usize {
        self.points.len()
    }

    /// Sum of weights, written ||Y||_1.
    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Subset keeping original ids.
    pub fn subset(&self, idxs: &[usize]) -> Self {
        WeightedPointSet {
            points: idxs.iter().map(|&i| self.points[i].clone()).collect(),
            weights: idxs.iter().map(|&i| self.weights[i]).collect(),
            ids: idxs.iter().map(|&i| self.ids[i]).collect(),
        }
    }

    pub fn push(&mut self, point: Point, weight: f64, id: usize) {
        self.points.push(point);
        self.weights.push(weight);
        self.ids.push(id);
    }

    pub fn empty() -> Self {
        WeightedPointSet { points: vec![], weights: vec![], ids: vec![] }
    }
}

/// A set of 1..k candidate centers.
#[derive(Debug, Clone, PartialEq)]
pub struct CenterSet {
    pub centers: Vec<Point>,
}

impl CenterSet {
    pub fn new(centers: Vec<Point>) -> Self {
        assert!(!centers.is_empty(), "center set must be nonempty");
        CenterSet { centers }
    }

    pub fn from_line(xs: &[f64]) -> Self {
        Self::new(xs.iter().map(|&x| Point::Coords(vec![x])).collect())
    }

    pub fn k(&self) -> usize {
        self.centers.len()
    }
}

/// A point set coverable by its anchors within a uniform radius, together
/// with the induced nearest-anchor partition.
#[derive(Debug, Clone)]
pub struct RkInstance {
    pub data: WeightedPointSet,
    pub anchors: CenterSet,
    pub radius: f64,
    /// assignment[i] = index of the nearest anchor of data point i
    /// (lowest anchor index on ties).
    pub assignment: Vec<usize>,
}

impl RkInstance {
    /// Data indices of each anchor's cluster, in point order.
    pub fn clusters(&self) -> Vec<Vec<usize>> {
        let mut cl = vec![Vec::new(); self.anchors.k()];
        for (i, &a) in self.assignment.iter().enumerate() {
            cl[a].push(i);
        }
        cl
    }
}

/// An instance whose nonempty clusters all have sizes within a factor 2.
#[derive(Debug, Clone)]
pub struct RegularInstance(pub RkInstance);

impl RegularInstance {
    /// Wrap after checking |X_i| <= 2|X_j| for all nonempty cluster pairs.
    pub fn new(inst: RkInstance) -> Result<Self> {
        let sizes: Vec<usize> = inst
            .clusters()
            .iter()
            .map(|c| c.len())
            .filter(|&s| s > 0)
            .collect();
        if let (Some(&max), Some(&min)) = (sizes.iter().max(), sizes.iter().min()) {
            if max > 2 * min {
                return Err(Error::InvalidData(format!(
                    "not regular: cluster sizes {max} > 2*{min}"
                )));
            }
        }
        Ok(RegularInstance(inst))
    }
}

/// Problem parameters shared across the pipeline.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Params {
    pub k: usize,
    /// Outlier budget m.
    pub m: usize,
    pub eps: f64,
    /// Distance power z >= 1.
    pub z: f64,
    /// User-supplied structural dimension proxy (VC or doubling).
    pub structural_dim: f64,
    /// Sample-size scale constant.
    pub c0: f64,
    /// Polylog exponent in the sample-size formulas.
    pub polylog_c: f64,
    /// Explicit sample size; wins over the policy formula when present.
    pub sample_override: Option<usize>,
    pub seed: u64,
}

impl Params {
    pub fn new(k: usize, m: usize, eps: f64, z: f64) -> Self {
        Params {
            k,
            m,
            eps,
            z,
            structural_dim: 1.0,
            c0: 1.0,
            polylog_c: 1.0,
            sample_override: None,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k < 1 {
            return Err(Error::InvalidParam("k must be >= 1".into()));
        }
        if !(self.eps > 0.0 && self.eps < 1.0) {
            return Err(Error::InvalidParam("eps must be in (0,1)".into()));
        }
        if self.z < 1.0 {
            return Err(Error::InvalidParam("z must be >= 1".into()));
        }
        if self.structural_dim <= 0.0 {
            return Err(Error::InvalidParam("structural dim must be > 0".into()));
        }
        Ok(())
    }
}

/// Output of a decomposition: far points F, layered ring instances
/// with their radii, and the inner instance G.
#[derive(Debug, Clone)]
pub struct Decomposition {
    pub far: WeightedPointSet,
    pub rings: Vec<(RkInstance, f64)>,
    pub inner: RkInstance,
}

/// Construction metadata returned by the end-to-end builders.
#[derive(Debug, Clone)]
pub struct CoresetReport {
    pub coreset: WeightedPointSet,
    /// Total additive budget Delta, summed over stages.
    pub additive_budget: f64,
    pub stage_sizes: BTreeMap<String, usize>,
    pub sample_sizes_used: BTreeMap<String, usize>,
    pub seed: u64,
    pub wall_times_ms: BTreeMap<String, f64>,
    /// Realized robust cost of the approximate solution the budgets scale with.
    pub reference_cost: f64,
}

/// Assign every point to its nearest anchor (lowest anchor index on ties)
/// and record the realized covering radius.
pub fn make_rk_instance(
    data: WeightedPointSet,
    anchors: CenterSet,
    metric: &MetricSpace,
) -> RkInstance {
    let n = data.size_count();
    let assignment = crate::exec::map_indexed(n, |i| {
        let mut best = 0usize;
        let mut best_d = metric.dist(&data.points[i], &anchors.centers[0]);
        for (a, c) in anchors.centers.iter().enumerate().skip(1) {
            let d = metric.dist(&data.points[i], c);
            if d < best_d {
                best = a;
                best_d = d;
            }
        }
        (best, best_d)
    });
    let radius = assignment.iter().map(|&(_, d)| d).fold(0.0, f64::max);
    RkInstance {
        data,
        anchors,
        radius,
        assignment: assignment.into_iter().map(|(a, _)| a).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line_metric() -> MetricSpace {
        MetricSpace::Euclidean { dim: 1 }
    }

    #[test]
    fn rk_instance_points_on_anchors() {
        let inst = make_rk_instance(
            WeightedPointSet::from_line(&[0.0, 10.0]),
            CenterSet::from_line(&[0.0, 10.0]),
            &line_metric(),
        );
        assert_eq!(inst.assignment, vec![0, 1]);
        assert_eq!(inst.radius, 0.0);
    }

    #[test]
    fn rk_instance_nearest() {
        let inst = make_rk_instance(
            WeightedPointSet::from_line(&[1.0, 9.0]),
            CenterSet::from_line(&[0.0, 10.0]),
            &line_metric(),
        );
        assert_eq!(inst.assignment, vec![0, 1]);
        assert!((inst.radius - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rk_instance_tie_breaks_low_index() {
        let inst = make_rk_instance(
            WeightedPointSet::from_line(&[5.0]),
            CenterSet::from_line(&[0.0, 10.0]),
            &line_metric(),
        );
        assert_eq!(inst.assignment, vec![0]);
        assert!((inst.radius - 5.0).abs() < 1e-12);
    }

    #[test]
    fn rk_instance_empty_data() {
        let inst = make_rk_instance(
            WeightedPointSet::empty(),
            CenterSet::from_line(&[0.0]),
            &line_metric(),
        );
        assert_eq!(inst.radius, 0.0);
        assert!(inst.assignment.is_empty());
    }

    #[test]
    fn clusters_partition_data() {
        let inst = make_rk_instance(
            WeightedPointSet::from_line(&[1.0, 2.0, 8.0, 9.0, 5.0]),
            CenterSet::from_line(&[0.0, 10.0]),
            &line_metric(),
        );
        let mut seen: Vec<usize> = inst.clusters().concat();
        seen.sort_unstable();
        assert_eq!(seen, vec![0, 1, 2, 3, 4]);
    }

    #[test]
    fn radius_matches_brute_force() {
        let data = WeightedPointSet::from_line(&[1.5, 2.5, 7.25, -3.0]);
        let anchors = CenterSet::from_line(&[0.0, 8.0]);
        let m = line_metric();
        let inst = make_rk_instance(data.clone(), anchors.clone(), &m);
        let brute = data
            .points
            .iter()
            .map(|p| {
                anchors
                    .centers
                    .iter()
                    .map(|c| m.dist(p, c))
                    .fold(f64::INFINITY, f64::min)
            })
            .fold(0.0, f64::max);
        assert!((inst.radius - brute).abs() <= 1e-12 * brute.max(1.0));
    }

    #[test]
    fn distance_matrix_rejects_triangle_violation() {
        // d(0,2)=10 > d(0,1)+d(1,2)=2
        let d = vec![0.0, 1.0, 10.0, 1.0, 0.0, 1.0, 10.0, 1.0, 0.0];
        assert!(DistanceMatrix::new(3, d).is_err());
    }

    #[test]
    fn distance_matrix_accepts_valid() {
        let d = vec![0.0, 1.0, 2.0, 1.0, 0.0, 1.0, 2.0, 1.0, 0.0];
        let m = DistanceMatrix::new(3, d).unwrap();
        assert!(m.triangle_checked);
        assert_eq!(m.get(0, 2), 2.0);
    }

    #[test]
    fn regular_instance_rejects_skew() {
        let inst = make_rk_instance(
            WeightedPointSet::from_line(&[0.1, 0.2, 0.3, 9.9]),
            CenterSet::from_line(&[0.0, 10.0]),
            &line_metric(),
        );
        assert!(RegularInstance::new(inst).is_err());
    }
}
