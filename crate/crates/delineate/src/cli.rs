//! Command-line interface: thin wrappers over the library operations.
//!
//! Every subcommand writes outputs atomically (temp file + rename) and is
//! byte-reproducible for fixed inputs and seeds. Exit codes: 0 success, 1
//! domain error (single-line diagnostic on stderr), 2 usage error.

use std::collections::HashMap;
use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::error::{Error, Result};
use crate::eval;
use crate::geom::Point;
use crate::netgraph::{default_square_side, ClassLabel, NetworkGraph, PatchWindow, SkeletonRaster};
use crate::patchgt::{self, GtMode};
use crate::pgm;
use crate::predictor::{FilePredictor, HeatmapStore, OraclePredictor, Predictor, StoreWriter};
use crate::synth::{self, SynthKind, SynthParams};
use crate::tracer::{self, ConfidenceMap, TraceParams};

const LONG_VERSION: &str = concat!(
    env!("CARGO_PKG_VERSION"),
    " (graph-format 1, graymap P5 maxval 255/65535, store-manifest 1)"
);

#[derive(Parser)]
#[command(
    name = "delineate",
    version,
    long_version = LONG_VERSION,
    about = "Topology extraction for filamentary networks"
)]
struct Cli {
    /// Parallel workers for per-item work; output order stays input order.
    #[arg(long, global = true, default_value_t = 1)]
    jobs: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate synthetic networks with rendered confidence maps
    Synth(SynthArgs),
    /// Sample training windows and write ground-truth heatmap stores
    GenGt(GenGtArgs),
    /// Run the iterative delineation tracer
    Trace(TraceArgs),
    /// Skeleton-of-thresholded-segmentation baseline evaluation
    SkeletonBaseline(BaselineArgs),
    /// Evaluate a prediction against ground truth
    Eval(EvalArgs),
    /// Patch-level precision-recall curve over a heatmap store
    Curve(CurveArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    Tree,
    Grid,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    #[value(name = "non-connectivity")]
    NonConnectivity,
    #[value(name = "connectivity")]
    Connectivity,
    #[value(name = "connectivity-av")]
    ConnectivityAv,
}

impl From<ModeArg> for GtMode {
    fn from(m: ModeArg) -> GtMode {
        match m {
            ModeArg::NonConnectivity => GtMode::NonConnectivity,
            ModeArg::Connectivity => GtMode::Connectivity,
            ModeArg::ConnectivityAv => GtMode::ConnectivityAv,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ClassArg {
    Artery,
    Vein,
}

impl From<ClassArg> for ClassLabel {
    fn from(c: ClassArg) -> ClassLabel {
        match c {
            ClassArg::Artery => ClassLabel::Artery,
            ClassArg::Vein => ClassLabel::Vein,
        }
    }
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, value_enum, default_value_t = KindArg::Tree)]
    kind: KindArg,
    #[arg(long, default_value_t = 256)]
    width: u32,
    #[arg(long, default_value_t = 256)]
    height: u32,
    #[arg(long, default_value_t = 8)]
    branches: u32,
    #[arg(long, default_value_t = 22.0)]
    branch_min: f64,
    #[arg(long, default_value_t = 42.0)]
    branch_max: f64,
    #[arg(long, default_value_t = 20.0)]
    angle_jitter: f64,
    #[arg(long, default_value_t = 5.0)]
    min_separation: f64,
    /// Fraction of artery-labeled branches (tree kind)
    #[arg(long, default_value_t = 1.0)]
    class_mix: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Instances to generate; instance i uses seed + i
    #[arg(long, default_value_t = 1)]
    count: usize,
    #[arg(long, default_value_t = 3)]
    line_width: u32,
    #[arg(long, default_value_t = 0.0)]
    noise_sigma: f64,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct GenGtArgs {
    #[arg(long)]
    graph: PathBuf,
    #[arg(long, value_enum, default_value_t = ModeArg::Connectivity)]
    mode: ModeArg,
    /// Number of training windows (50 for fundus-sized, 130 for aerial-sized)
    #[arg(long, default_value_t = 50)]
    n: usize,
    #[arg(long, default_value_t = 64)]
    patch_size: u32,
    /// Clip-square side; defaults to patch size - 6
    #[arg(long)]
    square_side: Option<u32>,
    #[arg(long, default_value_t = 2.0)]
    sigma: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct TraceArgs {
    /// Ground-truth graph: the oracle's annotation source and the canvas size
    #[arg(long)]
    graph: Option<PathBuf>,
    #[arg(long, default_value = "oracle")]
    predictor: String,
    #[arg(long, value_enum, default_value_t = ModeArg::Connectivity)]
    mode: ModeArg,
    /// Heatmap store directory for --predictor store
    #[arg(long)]
    store: Option<PathBuf>,
    #[arg(long)]
    confidence: Option<PathBuf>,
    #[arg(long, conflicts_with = "theta_255")]
    theta: Option<f32>,
    /// Threshold as an 8-bit level (20/25/30), mapped to level/255
    #[arg(long)]
    theta_255: Option<u8>,
    #[arg(long, default_value_t = 64)]
    patch_size: u32,
    #[arg(long)]
    square_side: Option<u32>,
    #[arg(long, default_value_t = 2.0)]
    sigma: f64,
    #[arg(long, default_value_t = 3)]
    nms: i32,
    #[arg(long, default_value_t = 3)]
    visit_radius: i32,
    #[arg(long, default_value_t = 0.5)]
    seed_threshold: f32,
    #[arg(long, default_value_t = 10)]
    seed_min_dist: i32,
    /// Seed at the lowest-id vertex of each graph component
    #[arg(long)]
    seed_from_graph: bool,
    /// Explicit seed "x,y"; repeatable
    #[arg(long = "seed", value_parser = parse_seed_point)]
    seeds: Vec<(i32, i32)>,
    #[arg(long, default_value_t = 0)]
    max_iterations: usize,
    #[arg(long, default_value_t = 0)]
    snapshot_every: usize,
    #[arg(long)]
    snapshot_dir: Option<PathBuf>,
    #[arg(long)]
    no_reseed: bool,
    /// Single-class run
    #[arg(long, value_enum)]
    class: Option<ClassArg>,
    /// Artery+vein tracing: two runs unioned, needs both confidence maps
    #[arg(long, requires = "conf_artery", requires = "conf_vein")]
    av: bool,
    #[arg(long)]
    conf_artery: Option<PathBuf>,
    #[arg(long)]
    conf_vein: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct BaselineArgs {
    #[arg(long)]
    confidence: PathBuf,
    /// 8-bit binarization level
    #[arg(long, default_value_t = 128)]
    level: u8,
    #[arg(long)]
    gt: PathBuf,
    #[arg(long, default_value_t = 2.0)]
    tolerance_px: f64,
    /// Also write the thinned skeleton
    #[arg(long)]
    skeleton: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    /// Prediction: .json network graph or .pgm skeleton raster
    #[arg(long)]
    pred: PathBuf,
    /// Ground truth: .json network graph or .pgm skeleton raster
    #[arg(long)]
    gt: PathBuf,
    #[arg(long, default_value_t = 2.0)]
    tolerance_px: f64,
    /// Write a P6 overlay: TP green, FP blue, FN red
    #[arg(long)]
    overlay: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CurveArgs {
    /// Store of predicted heatmaps
    #[arg(long)]
    store: PathBuf,
    #[arg(long)]
    graph: PathBuf,
    #[arg(long, value_enum, default_value_t = ModeArg::Connectivity)]
    mode: ModeArg,
    #[arg(long, default_value_t = 64)]
    patch_size: u32,
    #[arg(long)]
    square_side: Option<u32>,
    #[arg(long, default_value_t = 3.0)]
    match_radius: f64,
    #[arg(long, default_value_t = 3)]
    nms: i32,
    /// Comma-separated threshold list; default 0.05..0.95 step 0.05
    #[arg(long)]
    thresholds: Option<String>,
    #[arg(long)]
    out: PathBuf,
}

fn parse_seed_point(s: &str) -> std::result::Result<(i32, i32), String> {
    let (x, y) = s
        .split_once(',')
        .ok_or_else(|| format!("expected 'x,y', got '{s}'"))?;
    let x = x.trim().parse().map_err(|e| format!("bad x: {e}"))?;
    let y = y.trim().parse().map_err(|e| format!("bad y: {e}"))?;
    Ok((x, y))
}

/// Entry point; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 2,
            };
            let _ = e.print();
            return code;
        }
    };
    if cli.jobs == 0 {
        eprintln!("delineate: --jobs must be at least 1");
        return 2;
    }
    let result = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.jobs)
        .build()
        .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))
        .and_then(|pool| pool.install(|| dispatch(cli)));
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("delineate: {e}");
            1
        }
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Synth(args) => cmd_synth(args),
        Command::GenGt(args) => cmd_gen_gt(args),
        Command::Trace(args) => cmd_trace(args),
        Command::SkeletonBaseline(args) => cmd_baseline(args),
        Command::Eval(args) => cmd_eval(args),
        Command::Curve(args) => cmd_curve(args),
    }
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir.display().to_string(), e))
}

fn require_file(path: &Path) -> Result<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(Error::io(
            path.display().to_string(),
            std::io::Error::new(std::io::ErrorKind::NotFound, "no such file"),
        ))
    }
}

fn cmd_synth(args: SynthArgs) -> Result<()> {
    ensure_dir(&args.out_dir)?;
    let params = SynthParams {
        kind: match args.kind {
            KindArg::Tree => SynthKind::Tree,
            KindArg::Grid => SynthKind::Grid,
        },
        width: args.width,
        height: args.height,
        branches: args.branches,
        branch_length: (args.branch_min, args.branch_max),
        branch_angle_jitter: args.angle_jitter,
        min_separation: args.min_separation,
        class_mix: args.class_mix,
        rng_seed: args.seed,
    };
    use rayon::prelude::*;
    let items: Vec<(NetworkGraph, ConfidenceMap)> = (0..args.count)
        .into_par_iter()
        .map(|i| {
            let mut p = params.clone();
            p.rng_seed = args.seed + i as u64;
            let g = synth::generate_network(&p)?;
            let conf = synth::render_confidence(&g, args.line_width, args.noise_sigma, p.rng_seed)?;
            Ok((g, conf))
        })
        .collect::<Result<_>>()?;
    let mut manifest = String::new();
    for (i, (g, conf)) in items.iter().enumerate() {
        let gname = format!("net_{i:03}.json");
        let cname = format!("conf_{i:03}.pgm");
        g.save(&args.out_dir.join(&gname))?;
        conf.save(&args.out_dir.join(&cname))?;
        manifest.push_str(&format!("{gname} {cname}\n"));
    }
    pgm::write_atomic(&args.out_dir.join("manifest.txt"), manifest.as_bytes())?;
    Ok(())
}

fn cmd_gen_gt(args: GenGtArgs) -> Result<()> {
    require_file(&args.graph)?;
    ensure_dir(&args.out_dir)?;
    let graph = NetworkGraph::load(&args.graph)?;
    let mode: GtMode = args.mode.into();
    let square = args
        .square_side
        .unwrap_or_else(|| default_square_side(args.patch_size));
    let windows = patchgt::sample_training_patches(&graph, args.n, args.patch_size, args.seed)?;

    use rayon::prelude::*;
    let heatmaps: Vec<crate::patchgt::Heatmap> = windows
        .par_iter()
        .map(|w| {
            let w = PatchWindow::anchored(w.center(), args.patch_size, square, w.origin())?;
            let pts = patchgt::gt_points(&graph, &w, mode)?;
            let local: Vec<Point> = pts.iter().map(|bp| w.local(bp.pos)).collect();
            patchgt::make_gt_heatmap(&local, args.patch_size, args.sigma)
        })
        .collect::<Result<_>>()?;

    let mut writer = StoreWriter::create(&args.out_dir)?;
    let mut samples = String::new();
    for (w, hm) in windows.iter().zip(&heatmaps) {
        let c = w.center();
        let name = format!("hm_{:05}.pgm", samples.lines().count());
        samples.push_str(&format!("{} {} {mode} {name}\n", c.x, c.y));
        writer.append(c, hm)?;
    }
    writer.finish()?;
    pgm::write_atomic(&args.out_dir.join("samples.txt"), samples.as_bytes())?;
    Ok(())
}

fn seeds_from_graph(graph: &NetworkGraph) -> Vec<(i32, i32)> {
    // lowest-id vertex of every connected component
    let index: HashMap<u64, usize> = graph
        .vertices
        .iter()
        .enumerate()
        .map(|(i, v)| (v.id, i))
        .collect();
    let mut parent: Vec<usize> = (0..graph.vertices.len()).collect();
    fn find(parent: &mut Vec<usize>, mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    for e in &graph.edges {
        let (a, b) = (index[&e.u], index[&e.v]);
        let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
        if ra != rb {
            parent[ra.max(rb)] = ra.min(rb);
        }
    }
    let mut best: HashMap<usize, &crate::netgraph::Vertex> = HashMap::new();
    for (i, v) in graph.vertices.iter().enumerate() {
        let root = find(&mut parent, i);
        let e = best.entry(root).or_insert(v);
        if v.id < e.id {
            *e = v;
        }
    }
    let mut picks: Vec<&crate::netgraph::Vertex> = best.into_values().collect();
    picks.sort_by_key(|v| v.id);
    picks
        .iter()
        .map(|v| v.pos().round_pixel())
        .collect()
}

fn cmd_trace(args: TraceArgs) -> Result<()> {
    for p in [&args.graph, &args.confidence, &args.conf_artery, &args.conf_vein]
        .into_iter()
        .flatten()
    {
        require_file(p)?;
    }
    let theta = match (args.theta, args.theta_255) {
        (Some(t), None) => t,
        (None, Some(level)) => level as f32 / 255.0,
        (None, None) => 0.5,
        (Some(_), Some(_)) => unreachable!("clap conflicts_with"),
    };
    let graph = args.graph.as_deref().map(NetworkGraph::load).transpose()?;
    let confidence = args
        .confidence
        .as_deref()
        .map(ConfidenceMap::load)
        .transpose()?;

    let (width, height) = if let Some(g) = &graph {
        (g.width, g.height)
    } else if let Some(c) = &confidence {
        (c.width, c.height)
    } else {
        return Err(Error::InvalidParameter(
            "need --graph or --confidence to size the canvas".into(),
        ));
    };

    let mut params = TraceParams::new(width, height, theta);
    params.patch_size = args.patch_size;
    params.square_side = args
        .square_side
        .unwrap_or_else(|| default_square_side(args.patch_size));
    params.nms_radius = args.nms;
    params.visit_radius = args.visit_radius;
    params.seed_threshold = args.seed_threshold;
    params.seed_min_dist = args.seed_min_dist;
    params.max_iterations = args.max_iterations;
    params.snapshot_every = args.snapshot_every;
    params.class = args.class.map(Into::into);
    params.reseed = !args.no_reseed;

    let oracle;
    let file_pred;
    let predictor: &dyn Predictor = match args.predictor.as_str() {
        "oracle" => {
            let g = graph.as_ref().ok_or_else(|| {
                Error::InvalidParameter("--predictor oracle needs --graph".into())
            })?;
            oracle = OraclePredictor::new(g, args.mode.into(), args.patch_size, args.sigma);
            &oracle
        }
        "store" => {
            let dir = args.store.as_ref().ok_or_else(|| {
                Error::InvalidParameter("--predictor store needs --store".into())
            })?;
            file_pred = FilePredictor::open(dir, args.patch_size)?;
            &file_pred
        }
        other => {
            return Err(Error::InvalidParameter(format!(
                "unknown predictor '{other}' (expected oracle|store)"
            )))
        }
    };

    if args.av {
        let conf_a = ConfidenceMap::load(args.conf_artery.as_deref().expect("clap requires"))?;
        let conf_v = ConfidenceMap::load(args.conf_vein.as_deref().expect("clap requires"))?;
        let traced = tracer::trace_av(predictor, &conf_a, &conf_v, &params)?;
        traced.save(&args.out)?;
        return Ok(());
    }

    let mut seeds = args.seeds.clone();
    if args.seed_from_graph {
        let g = graph
            .as_ref()
            .ok_or_else(|| Error::InvalidParameter("--seed-from-graph needs --graph".into()))?;
        seeds.extend(seeds_from_graph(g));
    }
    if seeds.is_empty() {
        if let Some(c) = &confidence {
            seeds = tracer::select_seeds(c, params.seed_threshold, params.seed_min_dist);
        }
    }

    let outcome = tracer::trace(predictor, confidence.as_ref(), &seeds, &params)?;
    outcome.graph.save(&args.out)?;
    if let Some(dir) = &args.snapshot_dir {
        ensure_dir(dir)?;
        for (i, snap) in outcome.snapshots.iter().enumerate() {
            snap.save(&dir.join(format!("snapshot_{i:04}.pgm")))?;
        }
    }
    Ok(())
}

fn cmd_baseline(args: BaselineArgs) -> Result<()> {
    require_file(&args.confidence)?;
    require_file(&args.gt)?;
    let conf = ConfidenceMap::load(&args.confidence)?;
    let gt = NetworkGraph::load(&args.gt)?;
    if let Some(path) = &args.skeleton {
        let skel = eval::skeletonize(&conf.binarize(args.level as f32 / 255.0));
        skel.save(path)?;
    }
    let report = eval::baseline_eval(&conf, args.level, &gt, args.tolerance_px)?;
    emit_report(&report, args.out.as_deref())
}

fn load_skeleton(path: &Path) -> Result<SkeletonRaster> {
    match path.extension().and_then(|e| e.to_str()) {
        Some("json") => Ok(NetworkGraph::load(path)?.rasterize(None)),
        _ => SkeletonRaster::load(path),
    }
}

fn cmd_eval(args: EvalArgs) -> Result<()> {
    require_file(&args.pred)?;
    require_file(&args.gt)?;
    let pred = load_skeleton(&args.pred)?;
    let gt = load_skeleton(&args.gt)?;
    let report = eval::evaluate_skeletons(&pred, &gt, args.tolerance_px)?;
    if let Some(path) = &args.overlay {
        let m = eval::match_skeletons(&pred, &gt, args.tolerance_px)?;
        let rgb = eval::render_overlay(&m, pred.width, pred.height);
        pgm::write_pixmap(path, pred.width, pred.height, &rgb)?;
    }
    emit_report(&report, args.out.as_deref())
}

fn emit_report(report: &eval::EvalReport, out: Option<&Path>) -> Result<()> {
    let json = report.to_json();
    match out {
        Some(path) => pgm::write_atomic(path, json.as_bytes())?,
        None => println!("{json}"),
    }
    // human-readable summary on stderr-free stdout when writing to a file
    if out.is_some() {
        println!(
            "P={:.1} R={:.1} F1R={:.1} C={:.1} F1C={:.1}",
            report.p * 100.0,
            report.r * 100.0,
            report.f1_r * 100.0,
            report.c * 100.0,
            report.f1_c * 100.0
        );
    }
    Ok(())
}

fn cmd_curve(args: CurveArgs) -> Result<()> {
    require_file(&args.graph)?;
    let graph = NetworkGraph::load(&args.graph)?;
    let store = HeatmapStore::open(&args.store)?;
    let mode: GtMode = args.mode.into();
    let square = args
        .square_side
        .unwrap_or_else(|| default_square_side(args.patch_size));
    let thresholds: Vec<f32> = match &args.thresholds {
        Some(list) => list
            .split(',')
            .map(|s| {
                s.trim()
                    .parse::<f32>()
                    .map_err(|e| Error::InvalidParameter(format!("threshold '{s}': {e}")))
            })
            .collect::<Result<_>>()?,
        None => (1..=19).map(|i| i as f32 * 0.05).collect(),
    };

    let mut heatmaps = Vec::new();
    let mut gt_sets = Vec::new();
    for entry in store.entries() {
        let w = PatchWindow::new(entry.center, args.patch_size, square)?;
        w.require_fits(graph.width, graph.height)?;
        let pts = patchgt::gt_points(&graph, &w, mode)?;
        gt_sets.push(pts.iter().map(|bp| w.local(bp.pos)).collect::<Vec<Point>>());
        heatmaps.push(store.load_entry(entry)?);
    }
    let curve = eval::patch_pr_curve(&heatmaps, &gt_sets, args.match_radius, &thresholds, args.nms)?;
    pgm::write_atomic(&args.out, curve.to_text().as_bytes())?;
    if let Some(best) = curve.best {
        println!(
            "best F={:.3} at threshold {:.3} (P={:.3} R={:.3})",
            best.f, best.threshold, best.precision, best.recall
        );
    }
    Ok(())
}
