//! Build-pipeline benchmarks comparing the rayon-backed path against the
//! sequential fallback (same binary, runtime toggle).

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use robust_coreset::coreset::{build_euclidean, build_metric, SolverChoice, VanillaOracle};
use robust_coreset::io::{generate, GenKind};
use robust_coreset::types::{MetricSpace, Params};
use robust_coreset::exec;

fn params() -> Params {
    let mut p = Params::new(5, 5, 0.2, 1.0);
    p.structural_dim = 3.0;
    p.seed = 17;
    p
}

fn bench_builds(c: &mut Criterion) {
    let metric = MetricSpace::Euclidean { dim: 2 };
    let p = params();
    let mut group = c.benchmark_group("build");
    group.sample_size(10);
    for &n in &[2_000usize, 10_000] {
        let data = generate(GenKind::ClusteredWithOutliers, n, 2, p.k, p.m, 1.0, 17).unwrap();
        for &parallel in &[true, false] {
            let label = if parallel { "parallel" } else { "sequential" };
            group.bench_with_input(
                BenchmarkId::new(format!("euclidean/{label}"), n),
                &data,
                |b, data| {
                    b.iter(|| {
                        let old = exec::set_parallel(parallel);
                        let rep = build_euclidean(
                            data,
                            &p,
                            &metric,
                            &SolverChoice::Heuristic { rounds: 20 },
                        )
                        .unwrap();
                        exec::set_parallel(old);
                        rep.coreset.size_count()
                    })
                },
            );
            group.bench_with_input(
                BenchmarkId::new(format!("metric/{label}"), n),
                &data,
                |b, data| {
                    b.iter(|| {
                        let old = exec::set_parallel(parallel);
                        let rep = build_metric(
                            data,
                            &p,
                            &metric,
                            &SolverChoice::Heuristic { rounds: 20 },
                            &VanillaOracle::Empirical { k: p.k, target_size: 0 },
                        )
                        .unwrap();
                        exec::set_parallel(old);
                        rep.coreset.size_count()
                    })
                },
            );
        }
    }
    group.finish();
}

criterion_group!(benches, bench_builds);
criterion_main!(benches);
