//! Command-line surface: dataset generation, coreset construction,
//! certification, and a build-time scaling benchmark.
//!
//! Exit codes: 0 success, 1 validation/runtime error, 2 certification
//! pass-rate below `--min-pass` (evaluate only).

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use robust_coreset::coreset::{build_euclidean, build_metric, SolverChoice, VanillaOracle};
use robust_coreset::io::{
    generate, looks_like_explicit, matrix_from_text, points_from_csv, points_to_csv,
    points_to_csv_weighted, DistortionSection, GenKind, ReportFile,
};
use robust_coreset::solver::heuristic_solver;
use robust_coreset::types::{MetricSpace, Params, Point, WeightedPointSet};
use robust_coreset::verify::{certify_robust_coreset, CenterSource, CertReport};
use robust_coreset::{exec, CoresetReport};

#[derive(Parser)]
#[command(name = "rcoreset", about = "Robust coresets for k-median / (k,z)-clustering with outliers", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum MetricArg {
    Euclidean,
    Explicit,
    Auto,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModeArg {
    Metric,
    Euclidean,
    Auto,
}

#[derive(Args)]
struct BuildArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_enum, default_value_t = MetricArg::Auto)]
    metric: MetricArg,
    #[arg(long, value_enum, default_value_t = ModeArg::Auto)]
    mode: ModeArg,
    #[arg(long)]
    k: usize,
    #[arg(long, default_value_t = 0)]
    m: usize,
    #[arg(long)]
    eps: f64,
    #[arg(long, default_value_t = 1.0)]
    z: f64,
    /// Structural dimension proxy (VC or doubling) for the sample sizes.
    #[arg(long = "dim-d", default_value_t = 3.0)]
    dim_d: f64,
    #[arg(long, default_value_t = 1.0)]
    c0: f64,
    #[arg(long = "polylog-c", default_value_t = 1.0)]
    polylog_c: f64,
    #[arg(long = "sample-override")]
    sample_override: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Local-search candidate swaps per round in the baseline solver.
    #[arg(long, default_value_t = 30)]
    solver_rounds: usize,
    #[arg(long = "out-coreset")]
    out_coreset: Option<PathBuf>,
    #[arg(long = "out-report")]
    out_report: Option<PathBuf>,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    coreset: PathBuf,
    #[arg(long)]
    k: usize,
    #[arg(long, default_value_t = 0)]
    m: usize,
    #[arg(long, default_value_t = 1.0)]
    z: f64,
    #[arg(long)]
    eps: f64,
    #[arg(long, default_value_t = 0.0)]
    delta: f64,
    /// Center generation: "exhaustive", "random:N", or "perturb:N".
    #[arg(long, default_value = "random:200")]
    centers: String,
    /// Coordinate jitter for perturb mode (default: 5% of the data spread).
    #[arg(long = "perturb-scale")]
    perturb_scale: Option<f64>,
    /// Exit with code 2 when the pass-rate falls below this value.
    #[arg(long = "min-pass", default_value_t = 0.0)]
    min_pass: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = MetricArg::Auto)]
    metric: MetricArg,
    #[arg(long = "out-report")]
    out_report: Option<PathBuf>,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long)]
    kind: String,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 2)]
    d: usize,
    #[arg(long, default_value_t = 1)]
    k: usize,
    #[arg(long, default_value_t = 0)]
    m: usize,
    #[arg(long, default_value_t = 1.0)]
    spread: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    /// Comma-separated dataset sizes, e.g. 10000,100000.
    #[arg(long, default_value = "10000,100000")]
    sizes: String,
    #[arg(long, default_value_t = 3)]
    repeats: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long = "out-report")]
    out_report: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Construct a robust coreset for a dataset.
    Build(BuildArgs),
    /// Certify a coreset against its dataset.
    Evaluate(EvaluateArgs),
    /// Generate a synthetic dataset.
    Gen(GenArgs),
    /// Measure build-time scaling across dataset sizes.
    Bench(BenchArgs),
}

fn main() -> ExitCode {
    exec::init_threads_from_env();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Build(a) => run_build(a),
        Command::Evaluate(a) => run_evaluate(a),
        Command::Gen(a) => run_gen(a),
        Command::Bench(a) => run_bench(a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn load_dataset(
    path: &PathBuf,
    metric_arg: MetricArg,
) -> Result<(WeightedPointSet, MetricSpace), Box<dyn std::error::Error>> {
    let text = std::fs::read_to_string(path)?;
    let explicit = match metric_arg {
        MetricArg::Explicit => true,
        MetricArg::Euclidean => false,
        MetricArg::Auto => looks_like_explicit(&text),
    };
    if explicit {
        let matrix = matrix_from_text(&text)?;
        let n = matrix.universe_size();
        let points = (0..n).map(Point::Index).collect();
        Ok((WeightedPointSet::unit(points), MetricSpace::Explicit(matrix)))
    } else {
        let (set, dim) = points_from_csv(&text)?;
        Ok((set, MetricSpace::Euclidean { dim }))
    }
}

fn write_or_print(path: &Option<PathBuf>, content: &str) -> std::io::Result<()> {
    match path {
        Some(p) => std::fs::write(p, content),
        None => {
            println!("{content}");
            Ok(())
        }
    }
}

fn report_skeleton(config: serde_json::Value, seed: u64) -> ReportFile {
    ReportFile {
        schema: 1,
        config,
        stage_sizes: BTreeMap::new(),
        sample_sizes: BTreeMap::new(),
        delta_ledger: BTreeMap::new(),
        distortion: None,
        timings_ms: BTreeMap::new(),
        seed,
    }
}

fn run_build(a: BuildArgs) -> Result<ExitCode, Box<dyn std::error::Error>> {
    let (data, metric) = load_dataset(&a.input, a.metric)?;
    let mut params = Params::new(a.k, a.m, a.eps, a.z);
    params.structural_dim = a.dim_d;
    params.c0 = a.c0;
    params.polylog_c = a.polylog_c;
    params.sample_override = a.sample_override;
    params.seed = a.seed;
    params.validate()?;

    let euclidean_mode = match a.mode {
        ModeArg::Euclidean => {
            if !metric.is_euclidean() {
                return Err("euclidean mode requires a Euclidean input".into());
            }
            true
        }
        ModeArg::Metric => false,
        ModeArg::Auto => metric.is_euclidean() && (1.0..=2.0).contains(&a.z),
    };
    let solver = SolverChoice::Heuristic { rounds: a.solver_rounds };
    let report: CoresetReport = if euclidean_mode {
        build_euclidean(&data, &params, &metric, &solver)?
    } else {
        build_metric(
            &data,
            &params,
            &metric,
            &solver,
            &VanillaOracle::Empirical { k: a.k, target_size: 0 },
        )?
    };

    if let Some(path) = &a.out_coreset {
        std::fs::write(path, coreset_to_csv(&report.coreset, &metric))?;
    }
    let mut file = report_skeleton(
        serde_json::json!({
            "command": "build",
            "mode": if euclidean_mode { "euclidean" } else { "metric" },
            "k": a.k, "m": a.m, "eps": a.eps, "z": a.z,
            "dim_d": a.dim_d, "c0": a.c0, "polylog_c": a.polylog_c,
            "sample_override": a.sample_override,
        }),
        a.seed,
    );
    file.stage_sizes = report.stage_sizes.clone();
    file.sample_sizes = report.sample_sizes_used.clone();
    file.delta_ledger.insert("total".into(), report.additive_budget);
    file.delta_ledger.insert("reference_cost".into(), report.reference_cost);
    file.timings_ms = report.wall_times_ms.clone();
    write_or_print(&a.out_report, &file.to_json()?)?;
    eprintln!(
        "coreset: {} points, total weight {:.3}, additive budget {:.6}",
        report.coreset.size_count(),
        report.coreset.total_weight(),
        report.additive_budget
    );
    Ok(ExitCode::SUCCESS)
}

fn coreset_to_csv(set: &WeightedPointSet, metric: &MetricSpace) -> String {
    if metric.is_euclidean() {
        points_to_csv_weighted(set)
    } else {
        let mut out = String::new();
        for i in 0..set.size_count() {
            if let Point::Index(idx) = set.points[i] {
                out.push_str(&format!("{idx},weight={:.16e}\n", set.weights[i]));
            }
        }
        out
    }
}

fn parse_centers_arg(
    s: &str,
) -> Result<(String, usize), Box<dyn std::error::Error>> {
    if s == "exhaustive" {
        return Ok(("exhaustive".into(), 0));
    }
    if let Some(n) = s.strip_prefix("random:") {
        return Ok(("random".into(), n.parse()?));
    }
    if let Some(n) = s.strip_prefix("perturb:") {
        return Ok(("perturb".into(), n.parse()?));
    }
    Err(format!("invalid --centers value '{s}' (use exhaustive, random:N, perturb:N)").into())
}

fn data_spread(x: &WeightedPointSet) -> f64 {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for p in &x.points {
        for &v in p.coords() {
            lo = lo.min(v);
            hi = hi.max(v);
        }
    }
    if hi > lo {
        hi - lo
    } else {
        1.0
    }
}

fn run_evaluate(a: EvaluateArgs) -> Result<ExitCode, Box<dyn std::error::Error>> {
    let (data, metric) = load_dataset(&a.input, a.metric)?;
    let coreset_text = std::fs::read_to_string(&a.coreset)?;
    let coreset = if metric.is_euclidean() {
        points_from_csv(&coreset_text)?.0
    } else {
        parse_index_coreset(&coreset_text)?
    };
    let (mode, trials) = parse_centers_arg(&a.centers)?;
    let source = match mode.as_str() {
        "exhaustive" => CenterSource::Exhaustive { pool: None },
        "random" => CenterSource::RandomFromData,
        _ => {
            let (base, _) = heuristic_solver(&data, a.k, a.m, a.z, &metric, a.seed, 30)?;
            let scale = a.perturb_scale.unwrap_or(0.05 * data_spread(&data));
            CenterSource::PerturbedOptimal { base, scale }
        }
    };
    let rep: CertReport = certify_robust_coreset(
        &data, &coreset, a.k, a.m, a.z, &metric, a.eps, a.delta, &source, trials, a.seed,
    )?;

    let mut file = report_skeleton(
        serde_json::json!({
            "command": "evaluate",
            "k": a.k, "m": a.m, "eps": a.eps, "z": a.z, "delta": a.delta,
            "centers": a.centers, "min_pass": a.min_pass,
        }),
        a.seed,
    );
    file.stage_sizes.insert("data".into(), data.size_count());
    file.stage_sizes.insert("coreset".into(), coreset.size_count());
    file.stage_sizes.insert("centers".into(), rep.centers_evaluated);
    file.delta_ledger.insert("budget".into(), a.delta);
    file.distortion = Some(DistortionSection {
        max_rel: rep.max_rel,
        max_add: rep.max_add_excess,
        pass_rate: rep.pass_rate,
        witness: rep.worst_witness,
    });
    write_or_print(&a.out_report, &file.to_json()?)?;
    eprintln!(
        "pass-rate {:.4} over {} center sets (max rel {:.4})",
        rep.pass_rate, rep.centers_evaluated, rep.max_rel
    );
    if rep.pass_rate < a.min_pass {
        return Ok(ExitCode::from(2));
    }
    Ok(ExitCode::SUCCESS)
}

fn parse_index_coreset(text: &str) -> Result<WeightedPointSet, Box<dyn std::error::Error>> {
    let mut points = Vec::new();
    let mut weights = Vec::new();
    for line in text.lines().filter(|l| !l.trim().is_empty()) {
        let mut parts = line.split(',');
        let idx: usize = parts.next().ok_or("missing index")?.trim().parse()?;
        let w = match parts.next() {
            Some(f) => f.trim().strip_prefix("weight=").ok_or("expected weight=")?.parse()?,
            None => 1.0,
        };
        points.push(Point::Index(idx));
        weights.push(w);
    }
    Ok(WeightedPointSet::new(points, weights)?)
}

fn run_gen(a: GenArgs) -> Result<ExitCode, Box<dyn std::error::Error>> {
    let kind: GenKind = a.kind.parse()?;
    let data = generate(kind, a.n, a.d, a.k, a.m, a.spread, a.seed)?;
    let csv = points_to_csv(&data);
    match &a.out {
        Some(p) => std::fs::write(p, csv)?,
        None => print!("{csv}"),
    }
    Ok(ExitCode::SUCCESS)
}

fn run_bench(a: BenchArgs) -> Result<ExitCode, Box<dyn std::error::Error>> {
    let sizes: Vec<usize> = a
        .sizes
        .split(',')
        .map(|s| s.trim().parse::<usize>())
        .collect::<Result<_, _>>()?;
    if sizes.is_empty() {
        return Err("no sizes given".into());
    }
    let metric = MetricSpace::Euclidean { dim: 2 };
    let mut params = Params::new(5, 5, 0.2, 1.0);
    params.structural_dim = 3.0;
    params.seed = a.seed;
    let mut times = BTreeMap::new();
    for &n in &sizes {
        let data = generate(GenKind::ClusteredWithOutliers, n, 2, params.k, params.m, 1.0, a.seed)?;
        let mut best = f64::INFINITY;
        for _ in 0..a.repeats.max(1) {
            let t = Instant::now();
            let rep = build_euclidean(
                &data,
                &params,
                &metric,
                &SolverChoice::Heuristic { rounds: 20 },
            )?;
            let ms = t.elapsed().as_secs_f64() * 1e3;
            best = best.min(ms);
            std::hint::black_box(rep.coreset.size_count());
        }
        times.insert(format!("n={n}"), best);
    }
    let vals: Vec<f64> = times.values().copied().collect();
    let ratio = vals.last().unwrap() / vals.first().unwrap();
    let mut file = report_skeleton(
        serde_json::json!({
            "command": "bench", "sizes": sizes, "repeats": a.repeats,
            "time_ratio_last_over_first": ratio,
        }),
        a.seed,
    );
    file.timings_ms = times;
    write_or_print(&a.out_report, &file.to_json()?)?;
    Ok(ExitCode::SUCCESS)
}
