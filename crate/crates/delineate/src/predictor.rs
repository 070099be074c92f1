//! The local-connectivity predictor contract and its implementations.
//!
//! A predictor maps a patch window to a heatmap whose peaks mark border
//! points connected to the patch center. Three implementations exist:
//!
//! - [`OraclePredictor`] renders the ground-truth heatmap straight from an
//!   annotation graph (the stand-in for a trained patch model);
//! - [`FilePredictor`] serves heatmaps from a directory store keyed by patch
//!   center, the integration point for externally computed predictions;
//! - [`CorruptOracle`] degrades the oracle by dropping and jittering peaks,
//!   for robustness experiments.
//!
//! [`extract_peaks`] turns any heatmap into discrete detections by greedy
//! non-maximum suppression.

use std::fs;
use std::path::{Component, Path, PathBuf};
use std::sync::Mutex;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geom::Point;
use crate::netgraph::{ClassLabel, NetworkGraph, PatchWindow};
use crate::patchgt::{gt_points_for_class, make_gt_heatmap, GtMode, Heatmap};

/// A detected peak in window-local pixel coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Peak {
    pub x: i32,
    pub y: i32,
    pub score: f32,
}

/// The predictor contract: deterministic, safe for concurrent calls.
pub trait Predictor: Send + Sync {
    fn patch_size(&self) -> u32;

    /// Heatmap for the window; `class` restricts connectivity to a vessel
    /// class where the implementation supports it.
    fn predict(&self, window: &PatchWindow, class: Option<ClassLabel>) -> Result<Heatmap>;
}

/// Ground-truth oracle: renders `make_gt_heatmap(gt_points(...))`.
///
/// A center that is off the network in a connectivity mode yields an all-zero
/// heatmap rather than an error; the tracer may legitimately query slightly
/// off the centerline.
#[derive(Debug, Clone)]
pub struct OraclePredictor<'a> {
    graph: &'a NetworkGraph,
    mode: GtMode,
    patch_size: u32,
    sigma: f64,
}

impl<'a> OraclePredictor<'a> {
    pub fn new(graph: &'a NetworkGraph, mode: GtMode, patch_size: u32, sigma: f64) -> Self {
        OraclePredictor {
            graph,
            mode,
            patch_size,
            sigma,
        }
    }

    /// Ground-truth peak positions in window-local coordinates.
    ///
    /// Peaks that fall outside the pixel box are dropped; that can only
    /// happen for border-clamped windows with an oversized clip square.
    pub fn local_points(
        &self,
        window: &PatchWindow,
        class: Option<ClassLabel>,
    ) -> Result<Vec<Point>> {
        let pts = gt_points_for_class(self.graph, window, self.mode, class)?;
        let limit = self.patch_size as f64 - 1.0;
        Ok(pts
            .iter()
            .map(|bp| window.local(bp.pos))
            .filter(|p| (0.0..=limit).contains(&p.x) && (0.0..=limit).contains(&p.y))
            .collect())
    }
}

impl Predictor for OraclePredictor<'_> {
    fn patch_size(&self) -> u32 {
        self.patch_size
    }

    fn predict(&self, window: &PatchWindow, class: Option<ClassLabel>) -> Result<Heatmap> {
        let pts = self.local_points(window, class)?;
        make_gt_heatmap(&pts, self.patch_size, self.sigma)
    }
}

/// One line of a heatmap-store manifest.
#[derive(Debug, Clone, PartialEq)]
pub struct StoreEntry {
    pub center: Point,
    pub path: String,
}

/// Parse a store manifest: one `center_x center_y relative/path.pgm` line per
/// entry. Relative paths must stay inside the store directory.
pub fn parse_store_manifest(text: &str) -> Result<Vec<StoreEntry>> {
    let mut entries = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let mut it = line.splitn(3, char::is_whitespace);
        let (xs, ys, path) = match (it.next(), it.next(), it.next()) {
            (Some(x), Some(y), Some(p)) => (x, y, p.trim()),
            _ => {
                return Err(Error::Parse {
                    line: lineno + 1,
                    column: 1,
                    message: "manifest line needs 'center_x center_y path'".into(),
                })
            }
        };
        let parse_coord = |s: &str| -> Result<f64> {
            let v: f64 = s.parse().map_err(|_| Error::Parse {
                line: lineno + 1,
                column: 1,
                message: format!("bad coordinate '{s}'"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    line: lineno + 1,
                    column: 1,
                    message: "non-finite coordinate".into(),
                });
            }
            Ok(v)
        };
        let rel = Path::new(path);
        let safe = !path.is_empty()
            && rel.is_relative()
            && rel
                .components()
                .all(|c| matches!(c, Component::Normal(_) | Component::CurDir));
        if !safe {
            return Err(Error::Parse {
                line: lineno + 1,
                column: 1,
                message: format!("unsafe store path '{path}'"),
            });
        }
        entries.push(StoreEntry {
            center: Point::new(parse_coord(xs)?, parse_coord(ys)?),
            path: path.to_string(),
        });
    }
    Ok(entries)
}

/// A directory of P5 heatmaps indexed by patch center via `manifest.txt`.
#[derive(Debug)]
pub struct HeatmapStore {
    dir: PathBuf,
    entries: Vec<StoreEntry>,
}

impl HeatmapStore {
    pub fn open(dir: &Path) -> Result<Self> {
        let manifest = dir.join("manifest.txt");
        let text =
            fs::read_to_string(&manifest).map_err(|e| Error::io(manifest.display().to_string(), e))?;
        Ok(HeatmapStore {
            dir: dir.to_path_buf(),
            entries: parse_store_manifest(&text)?,
        })
    }

    pub fn entries(&self) -> &[StoreEntry] {
        &self.entries
    }

    /// Nearest entry within 1 px of `center`; ties resolve to manifest order.
    pub fn lookup(&self, center: Point) -> Result<&StoreEntry> {
        let mut best: Option<(f64, &StoreEntry)> = None;
        for e in &self.entries {
            let d = e.center.dist_sq(center);
            if best.map_or(true, |(bd, _)| d < bd) {
                best = Some((d, e));
            }
        }
        match best {
            Some((d, e)) if d.sqrt() <= 1.0 => Ok(e),
            _ => Err(Error::PredictorMiss {
                x: center.x,
                y: center.y,
            }),
        }
    }

    pub fn load_entry(&self, entry: &StoreEntry) -> Result<Heatmap> {
        Heatmap::load(&self.dir.join(&entry.path))
    }
}

/// Incrementally writes a heatmap store.
#[derive(Debug)]
pub struct StoreWriter {
    dir: PathBuf,
    lines: Vec<String>,
}

impl StoreWriter {
    pub fn create(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir.display().to_string(), e))?;
        Ok(StoreWriter {
            dir: dir.to_path_buf(),
            lines: Vec::new(),
        })
    }

    pub fn append(&mut self, center: Point, heatmap: &Heatmap) -> Result<()> {
        let name = format!("hm_{:05}.pgm", self.lines.len());
        heatmap.save(&self.dir.join(&name))?;
        self.lines.push(format!("{} {} {name}", center.x, center.y));
        Ok(())
    }

    /// Write `manifest.txt`; call once after all appends.
    pub fn finish(self) -> Result<PathBuf> {
        let manifest = self.dir.join("manifest.txt");
        let mut text = self.lines.join("\n");
        if !text.is_empty() {
            text.push('\n');
        }
        crate::pgm::write_atomic(&manifest, text.as_bytes())?;
        Ok(self.dir)
    }
}

/// Serves stored heatmaps; the adapter for externally trained models.
#[derive(Debug)]
pub struct FilePredictor {
    store: HeatmapStore,
    patch_size: u32,
}

impl FilePredictor {
    pub fn new(store: HeatmapStore, patch_size: u32) -> Self {
        FilePredictor { store, patch_size }
    }

    pub fn open(dir: &Path, patch_size: u32) -> Result<Self> {
        Ok(FilePredictor::new(HeatmapStore::open(dir)?, patch_size))
    }
}

impl Predictor for FilePredictor {
    fn patch_size(&self) -> u32 {
        self.patch_size
    }

    fn predict(&self, window: &PatchWindow, _class: Option<ClassLabel>) -> Result<Heatmap> {
        let entry = self.store.lookup(window.center())?;
        let hm = self.store.load_entry(entry)?;
        if hm.side != self.patch_size {
            return Err(Error::DimensionMismatch {
                left: format!("stored heatmap side {}", hm.side),
                right: format!("patch size {}", self.patch_size),
            });
        }
        Ok(hm)
    }
}

/// Records every prediction into a store while delegating to the inner
/// predictor. Used to capture oracle output for file-predictor runs.
pub struct RecordingPredictor<'a, P: Predictor> {
    inner: &'a P,
    writer: Mutex<StoreWriter>,
}

impl<'a, P: Predictor> RecordingPredictor<'a, P> {
    pub fn new(inner: &'a P, writer: StoreWriter) -> Self {
        RecordingPredictor {
            inner,
            writer: Mutex::new(writer),
        }
    }

    pub fn into_writer(self) -> StoreWriter {
        self.writer.into_inner().expect("writer lock poisoned")
    }
}

impl<P: Predictor> Predictor for RecordingPredictor<'_, P> {
    fn patch_size(&self) -> u32 {
        self.inner.patch_size()
    }

    fn predict(&self, window: &PatchWindow, class: Option<ClassLabel>) -> Result<Heatmap> {
        let hm = self.inner.predict(window, class)?;
        self.writer
            .lock()
            .expect("writer lock poisoned")
            .append(window.center(), &hm)?;
        Ok(hm)
    }
}

/// Oracle wrapper that drops each ground-truth peak with probability
/// `drop_rate` and displaces survivors by uniform integer offsets in
/// `[-jitter, jitter]^2`, then re-renders the Gaussians.
///
/// Randomness derives from `(seed, window center)` only, so results do not
/// depend on call order or concurrency.
#[derive(Debug, Clone)]
pub struct CorruptOracle<'a> {
    inner: OraclePredictor<'a>,
    drop_rate: f64,
    jitter: i32,
    seed: u64,
    sigma: f64,
}

impl<'a> CorruptOracle<'a> {
    pub fn new(inner: OraclePredictor<'a>, drop_rate: f64, jitter: i32, seed: u64) -> Result<Self> {
        if !(0.0..=1.0).contains(&drop_rate) {
            return Err(Error::InvalidParameter(format!(
                "drop rate {drop_rate} outside [0, 1]"
            )));
        }
        if jitter < 0 {
            return Err(Error::InvalidParameter("negative jitter".into()));
        }
        let sigma = inner.sigma;
        Ok(CorruptOracle {
            inner,
            drop_rate,
            jitter,
            seed,
            sigma,
        })
    }

    fn rng_for(&self, center: Point) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(mix_seed(self.seed, center))
    }

    /// Apply drop/jitter to a point list; exposed for statistical checks.
    pub fn corrupt_points(&self, center: Point, points: &[Point], side: u32) -> Vec<Point> {
        let mut rng = self.rng_for(center);
        let limit = side as f64 - 1.0;
        let mut out = Vec::with_capacity(points.len());
        for p in points {
            if rng.gen::<f64>() < self.drop_rate {
                continue;
            }
            let dx = rng.gen_range(-self.jitter..=self.jitter) as f64;
            let dy = rng.gen_range(-self.jitter..=self.jitter) as f64;
            out.push(Point::new(
                (p.x + dx).clamp(0.0, limit),
                (p.y + dy).clamp(0.0, limit),
            ));
        }
        out
    }
}

impl Predictor for CorruptOracle<'_> {
    fn patch_size(&self) -> u32 {
        self.inner.patch_size()
    }

    fn predict(&self, window: &PatchWindow, class: Option<ClassLabel>) -> Result<Heatmap> {
        let pts = self.inner.local_points(window, class)?;
        let corrupted = self.corrupt_points(window.center(), &pts, self.patch_size());
        make_gt_heatmap(&corrupted, self.patch_size(), self.sigma)
    }
}

fn mix_seed(seed: u64, center: Point) -> u64 {
    // splitmix64 over the seed and both coordinate bit patterns
    let mut h = seed ^ 0x9e37_79b9_7f4a_7c15;
    for v in [center.x.to_bits(), center.y.to_bits()] {
        h ^= v;
        h = h.wrapping_mul(0xbf58_476d_1ce4_e5b9);
        h ^= h >> 27;
        h = h.wrapping_mul(0x94d0_49bb_1331_11eb);
        h ^= h >> 31;
    }
    h
}

/// Greedy non-maximum suppression.
///
/// Repeatedly takes the global maximum at or above `theta` (ties to smaller
/// y, then smaller x), emits it, and suppresses the Chebyshev ball of radius
/// `nms_radius` around it.
pub fn extract_peaks(h: &Heatmap, theta: f32, nms_radius: i32) -> Vec<Peak> {
    let side = h.side as i32;
    grid_peaks(h.values(), side, side, theta, nms_radius)
}

/// NMS over an arbitrary grid; shared by heatmap peaks and seed selection.
pub(crate) fn grid_peaks(
    values: &[f32],
    width: i32,
    height: i32,
    theta: f32,
    radius: i32,
) -> Vec<Peak> {
    assert!(theta > 0.0, "threshold must be positive");
    assert!(radius >= 1, "suppression radius must be >= 1");
    #[derive(PartialEq)]
    struct Cell {
        score: f32,
        y: i32,
        x: i32,
    }
    impl Eq for Cell {}
    impl Ord for Cell {
        fn cmp(&self, other: &Self) -> std::cmp::Ordering {
            self.score
                .total_cmp(&other.score)
                .then_with(|| other.y.cmp(&self.y))
                .then_with(|| other.x.cmp(&self.x))
        }
    }
    impl PartialOrd for Cell {
        fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
            Some(self.cmp(other))
        }
    }

    let mut heap = std::collections::BinaryHeap::new();
    for y in 0..height {
        for x in 0..width {
            let score = values[(y * width + x) as usize];
            if score >= theta {
                heap.push(Cell { score, y, x });
            }
        }
    }
    let mut suppressed = vec![false; (width * height) as usize];
    let mut peaks = Vec::new();
    while let Some(c) = heap.pop() {
        if suppressed[(c.y * width + c.x) as usize] {
            continue;
        }
        peaks.push(Peak {
            x: c.x,
            y: c.y,
            score: c.score,
        });
        for y in (c.y - radius).max(0)..=(c.y + radius).min(height - 1) {
            for x in (c.x - radius).max(0)..=(c.x + radius).min(width - 1) {
                suppressed[(y * width + x) as usize] = true;
            }
        }
    }
    peaks
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netgraph::{Edge, Vertex};

    fn cross_graph() -> NetworkGraph {
        let vertices = vec![
            Vertex { id: 0, x: 20.0, y: 64.0 },
            Vertex { id: 1, x: 64.0, y: 64.0 },
            Vertex { id: 2, x: 108.0, y: 64.0 },
            Vertex { id: 3, x: 64.0, y: 20.0 },
            Vertex { id: 4, x: 64.0, y: 108.0 },
        ];
        let seg = |a: (f64, f64), b: (f64, f64)| vec![a, b];
        let edges = vec![
            Edge { u: 0, v: 1, label: ClassLabel::Artery, points: seg((20.0, 64.0), (64.0, 64.0)) },
            Edge { u: 1, v: 2, label: ClassLabel::Artery, points: seg((64.0, 64.0), (108.0, 64.0)) },
            Edge { u: 3, v: 1, label: ClassLabel::Vein, points: seg((64.0, 20.0), (64.0, 64.0)) },
            Edge { u: 1, v: 4, label: ClassLabel::Vein, points: seg((64.0, 64.0), (64.0, 108.0)) },
        ];
        NetworkGraph::new(128, 128, vertices, edges).unwrap()
    }

    fn window_at(cx: f64, cy: f64) -> PatchWindow {
        PatchWindow::new(Point::new(cx, cy), 64, 58).unwrap()
    }

    #[test]
    fn oracle_equals_pipeline_composition() {
        let g = cross_graph();
        let w = window_at(64.0, 64.0);
        let oracle = OraclePredictor::new(&g, GtMode::Connectivity, 64, 2.0);
        let direct = {
            let pts = crate::patchgt::gt_points(&g, &w, GtMode::Connectivity).unwrap();
            let local: Vec<Point> = pts.iter().map(|bp| w.local(bp.pos)).collect();
            make_gt_heatmap(&local, 64, 2.0).unwrap()
        };
        assert_eq!(oracle.predict(&w, None).unwrap(), direct);
    }

    #[test]
    fn oracle_off_network_center_yields_zero_heatmap() {
        let g = cross_graph();
        let w = window_at(90.0, 90.0); // > 2 px from both lines
        let oracle = OraclePredictor::new(&g, GtMode::Connectivity, 64, 2.0);
        assert!(oracle.predict(&w, None).unwrap().is_zero());
    }

    #[test]
    fn oracle_av_center_on_vein_keeps_vein_peaks_only() {
        let g = cross_graph();
        let w = window_at(64.0, 80.0); // on the vertical vein
        let oracle = OraclePredictor::new(&g, GtMode::ConnectivityAv, 64, 2.0);
        let hm = oracle.predict(&w, None).unwrap();
        // vein peaks sit on the vertical line x=64; artery crossings would be
        // horizontal. All mass must lie in the column band around x=64.
        let mut vein_mass = 0.0;
        let mut total = 0.0;
        for y in 0..64 {
            for x in 0..64u32 {
                let v = hm.get(x, y) as f64;
                total += v;
                let image_x = w.origin().0 + x as i32;
                if (image_x - 64).abs() <= 6 {
                    vein_mass += v;
                }
            }
        }
        assert!(total > 0.0);
        assert!(vein_mass / total > 0.99, "ratio {}", vein_mass / total);
        // pinning the wrong class finds no center -> zero heatmap
        assert!(oracle
            .predict(&w, Some(ClassLabel::Artery))
            .unwrap()
            .is_zero());
    }

    #[test]
    fn store_lookup_rules() {
        let dir = tempfile::tempdir().unwrap();
        let mut writer = StoreWriter::create(dir.path()).unwrap();
        let hm = make_gt_heatmap(&[Point::new(10.0, 12.0)], 64, 2.0).unwrap();
        writer.append(Point::new(100.0, 100.0), &hm).unwrap();
        writer.finish().unwrap();

        let pred = FilePredictor::open(dir.path(), 64).unwrap();
        let exact = pred.predict(&window_at(100.0, 100.0), None).unwrap();
        // 16-bit quantization round-trips to within half a step
        for y in 0..64u32 {
            for x in 0..64u32 {
                assert!((exact.get(x, y) - hm.get(x, y)).abs() <= 0.5 / 65535.0 + 1e-7);
            }
        }
        assert!(pred.predict(&window_at(100.4, 100.4), None).is_ok());
        let err = pred.predict(&window_at(200.0, 200.0), None).unwrap_err();
        assert!(matches!(err, Error::PredictorMiss { .. }), "{err}");
    }

    #[test]
    fn manifest_rejects_unsafe_paths() {
        assert!(parse_store_manifest("1 2 ../evil.pgm").is_err());
        assert!(parse_store_manifest("1 2 /abs.pgm").is_err());
        assert!(parse_store_manifest("1 2\n").is_err());
        assert!(parse_store_manifest("a b c.pgm").is_err());
        let ok = parse_store_manifest("1.5 2 sub/dir.pgm\n\n3 4 x.pgm\n").unwrap();
        assert_eq!(ok.len(), 2);
    }

    #[test]
    fn corrupt_identity_when_disabled() {
        let g = cross_graph();
        let oracle = OraclePredictor::new(&g, GtMode::Connectivity, 64, 2.0);
        let corrupt = CorruptOracle::new(oracle.clone(), 0.0, 0, 42).unwrap();
        for &(cx, cy) in &[(64.0, 64.0), (40.0, 64.0), (64.0, 88.0)] {
            let w = window_at(cx, cy);
            assert_eq!(
                corrupt.predict(&w, None).unwrap(),
                oracle.predict(&w, None).unwrap()
            );
        }
    }

    #[test]
    fn corrupt_drop_everything_yields_zero() {
        let g = cross_graph();
        let oracle = OraclePredictor::new(&g, GtMode::Connectivity, 64, 2.0);
        let corrupt = CorruptOracle::new(oracle, 1.0, 0, 42).unwrap();
        assert!(corrupt
            .predict(&window_at(64.0, 64.0), None)
            .unwrap()
            .is_zero());
    }

    #[test]
    fn corrupt_retention_matches_drop_rate_statistically() {
        let g = cross_graph();
        let oracle = OraclePredictor::new(&g, GtMode::Connectivity, 64, 2.0);
        let corrupt = CorruptOracle::new(oracle, 0.5, 0, 7).unwrap();
        let points: Vec<Point> = (0..10).map(|i| Point::new(5.0 + i as f64 * 5.0, 30.0)).collect();
        let mut kept = 0usize;
        let total = 10_000usize;
        for trial in 0..(total / points.len()) {
            let center = Point::new(trial as f64, 2.0 * trial as f64);
            kept += corrupt.corrupt_points(center, &points, 64).len();
        }
        let frac = kept as f64 / total as f64;
        assert!((frac - 0.5).abs() <= 0.02, "retained fraction {frac}");
    }

    #[test]
    fn corrupt_is_deterministic_per_center() {
        let g = cross_graph();
        let oracle = OraclePredictor::new(&g, GtMode::Connectivity, 64, 2.0);
        let corrupt = CorruptOracle::new(oracle, 0.3, 2, 11).unwrap();
        let w = window_at(64.0, 64.0);
        assert_eq!(
            corrupt.predict(&w, None).unwrap(),
            corrupt.predict(&w, None).unwrap()
        );
    }

    #[test]
    fn peaks_on_zero_heatmap_are_empty() {
        let h = Heatmap::zero(64);
        assert!(extract_peaks(&h, 0.2, 3).is_empty());
    }

    #[test]
    fn single_gaussian_gives_single_peak() {
        let h = make_gt_heatmap(&[Point::new(10.0, 10.0)], 64, 2.0).unwrap();
        let peaks = extract_peaks(&h, 0.2, 3);
        assert_eq!(peaks.len(), 1);
        assert_eq!((peaks[0].x, peaks[0].y), (10, 10));
        assert_eq!(peaks[0].score, 1.0);
    }

    #[test]
    fn nms_merges_close_peaks_and_keeps_far_ones() {
        let close = make_gt_heatmap(&[Point::new(20.0, 20.0), Point::new(22.0, 20.0)], 64, 1.0)
            .unwrap();
        assert_eq!(extract_peaks(&close, 0.2, 3).len(), 1);
        let far = make_gt_heatmap(&[Point::new(20.0, 20.0), Point::new(28.0, 20.0)], 64, 1.0)
            .unwrap();
        assert_eq!(extract_peaks(&far, 0.2, 3).len(), 2);
    }

    /// Exhaustive oracle: rescan the whole grid for the global max each round.
    pub(crate) fn exhaustive_nms(h: &Heatmap, theta: f32, radius: i32) -> Vec<Peak> {
        let side = h.side as i32;
        let mut suppressed = vec![false; (side * side) as usize];
        let mut out = Vec::new();
        loop {
            let mut best: Option<Peak> = None;
            for y in 0..side {
                for x in 0..side {
                    if suppressed[(y * side + x) as usize] {
                        continue;
                    }
                    let score = h.get(x as u32, y as u32);
                    if score < theta {
                        continue;
                    }
                    let better = match &best {
                        None => true,
                        Some(b) => {
                            score > b.score
                                || (score == b.score && (y < b.y || (y == b.y && x < b.x)))
                        }
                    };
                    if better {
                        best = Some(Peak { x, y, score });
                    }
                }
            }
            let Some(p) = best else { break };
            out.push(p);
            for y in (p.y - radius).max(0)..=(p.y + radius).min(side - 1) {
                for x in (p.x - radius).max(0)..=(p.x + radius).min(side - 1) {
                    suppressed[(y * side + x) as usize] = true;
                }
            }
        }
        out
    }

    #[test]
    fn heap_nms_matches_exhaustive_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..200 {
            let k = rng.gen_range(0..6);
            let pts: Vec<Point> = (0..k)
                .map(|_| Point::new(rng.gen_range(0.0..63.0), rng.gen_range(0.0..63.0)))
                .collect();
            let h = make_gt_heatmap(&pts, 64, 2.0).unwrap();
            let got = extract_peaks(&h, 0.3, 3);
            let want = exhaustive_nms(&h, 0.3, 3);
            assert_eq!(got.len(), want.len());
            for (g, w) in got.iter().zip(&want) {
                assert_eq!((g.x, g.y), (w.x, w.y));
                assert_eq!(g.score, w.score);
            }
        }
    }

    #[test]
    fn higher_threshold_peaks_are_subset() {
        let pts = [
            Point::new(10.0, 10.0),
            Point::new(30.0, 12.0),
            Point::new(12.0, 40.0),
            Point::new(33.0, 41.5),
        ];
        let h = make_gt_heatmap(&pts, 64, 2.0).unwrap();
        let hi: std::collections::BTreeSet<(i32, i32)> = extract_peaks(&h, 0.8, 3)
            .iter()
            .map(|p| (p.x, p.y))
            .collect();
        let lo: std::collections::BTreeSet<(i32, i32)> = extract_peaks(&h, 0.25, 3)
            .iter()
            .map(|p| (p.x, p.y))
            .collect();
        assert!(hi.is_subset(&lo));
    }
}
