//! Iterative delineation: grow the network out of seed points by querying the
//! patch predictor, linking the window center to accepted peaks, and
//! scheduling the peaks as new centers.
//!
//! Growth is breadth-first by default, matching the concentric progression of
//! the traced network; the frontier discipline, the linking policy, and the
//! reseeding policy are each swappable via [`TraceParams`].

use std::collections::{BinaryHeap, HashMap, VecDeque};
use std::path::Path;

use crate::error::{Error, Result};
use crate::geom::{digital_line, Point};
use crate::netgraph::{ClassLabel, Edge, NetworkGraph, PatchWindow, SkeletonRaster, Vertex};
use crate::pgm;
use crate::predictor::{extract_peaks, grid_peaks, Predictor};

/// Per-pixel scores in `[0, 1]` from a global segmentation model.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfidenceMap {
    pub width: u32,
    pub height: u32,
    values: Vec<f32>,
}

impl ConfidenceMap {
    pub fn from_values(width: u32, height: u32, values: Vec<f32>) -> Result<Self> {
        if values.len() != width as usize * height as usize {
            return Err(Error::InvalidParameter(format!(
                "confidence map needs {width}x{height} values"
            )));
        }
        if values.iter().any(|v| !v.is_finite() || *v < 0.0 || *v > 1.0) {
            return Err(Error::InvalidParameter(
                "confidence values must be finite and in [0, 1]".into(),
            ));
        }
        Ok(ConfidenceMap {
            width,
            height,
            values,
        })
    }

    #[inline]
    pub fn get(&self, x: i32, y: i32) -> f32 {
        if x < 0 || y < 0 || x >= self.width as i32 || y >= self.height as i32 {
            return 0.0;
        }
        self.values[y as usize * self.width as usize + x as usize]
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    /// Foreground raster of pixels with `value >= threshold`.
    pub fn binarize(&self, threshold: f32) -> SkeletonRaster {
        let mut r = SkeletonRaster::new(self.width, self.height);
        for y in 0..self.height as i32 {
            for x in 0..self.width as i32 {
                if self.get(x, y) >= threshold {
                    r.set(x, y, true);
                }
            }
        }
        r
    }

    /// Load from P5 at maxval 255 or 65535; samples are normalized.
    pub fn from_pgm_bytes(bytes: &[u8]) -> Result<Self> {
        let g = pgm::parse_graymap(bytes)?;
        ConfidenceMap::from_values(g.width, g.height, g.normalized())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes =
            std::fs::read(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        Self::from_pgm_bytes(&bytes)
    }

    /// Write as P5 maxval 65535.
    pub fn save(&self, path: &Path) -> Result<()> {
        let samples: Vec<u16> = self.values.iter().map(|&v| pgm::quantize16(v)).collect();
        pgm::write_graymap(path, self.width, self.height, 65535, &samples)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FrontierOrder {
    Fifo,
    Lifo,
}

/// Tracing knobs. `theta` is the peak threshold in `[0, 1]`; 8-bit paper
/// levels map through `level / 255`.
#[derive(Debug, Clone)]
pub struct TraceParams {
    pub width: u32,
    pub height: u32,
    pub patch_size: u32,
    pub square_side: u32,
    pub theta: f32,
    pub nms_radius: i32,
    /// Visited-ball radius rho: a popped point within rho of an earlier
    /// center is skipped.
    pub visit_radius: i32,
    pub seed_threshold: f32,
    /// Suppression distance for seed selection and reseeding.
    pub seed_min_dist: i32,
    /// 0 selects the safety default `50 * width * height / patch_size^2`.
    pub max_iterations: usize,
    /// Append a rasterized snapshot every this many iterations (0 = off).
    pub snapshot_every: usize,
    /// Class-constrained tracing: passed to the predictor and stamped on
    /// traced edges.
    pub class: Option<ClassLabel>,
    pub frontier: FrontierOrder,
    /// Re-seed from the confidence map when the frontier empties.
    pub reseed: bool,
}

impl TraceParams {
    pub fn new(width: u32, height: u32, theta: f32) -> Self {
        TraceParams {
            width,
            height,
            patch_size: 64,
            square_side: 58,
            theta,
            nms_radius: 3,
            visit_radius: 3,
            seed_threshold: 0.5,
            seed_min_dist: 10,
            max_iterations: 0,
            snapshot_every: 0,
            class: None,
            frontier: FrontierOrder::Fifo,
            reseed: true,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::InvalidParameter("zero image dimension".into()));
        }
        if !(self.theta > 0.0 && self.theta <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "theta {} outside (0, 1]",
                self.theta
            )));
        }
        if self.visit_radius < 1 {
            return Err(Error::InvalidParameter("visit radius must be >= 1".into()));
        }
        if self.nms_radius < 1 {
            return Err(Error::InvalidParameter("nms radius must be >= 1".into()));
        }
        if self.square_side == 0 || self.square_side >= self.patch_size {
            return Err(Error::InvalidParameter(format!(
                "square side {} must be < patch size {}",
                self.square_side, self.patch_size
            )));
        }
        Ok(())
    }

    fn iteration_cap(&self) -> usize {
        if self.max_iterations > 0 {
            return self.max_iterations;
        }
        let per_patch = (self.patch_size as usize * self.patch_size as usize).max(1);
        (50 * self.width as usize * self.height as usize / per_patch).max(1)
    }
}

/// Result of a trace run.
#[derive(Debug)]
pub struct TraceOutcome {
    pub graph: NetworkGraph,
    pub snapshots: Vec<SkeletonRaster>,
    /// Number of windows actually processed.
    pub iterations: usize,
}

/// Greedy peak picking on a confidence map: global maxima at or above
/// `seed_threshold`, suppressing `min_dist` Chebyshev balls.
pub fn select_seeds(conf: &ConfidenceMap, seed_threshold: f32, min_dist: i32) -> Vec<(i32, i32)> {
    if seed_threshold <= 0.0 {
        return Vec::new();
    }
    grid_peaks(
        &conf.values,
        conf.width as i32,
        conf.height as i32,
        seed_threshold,
        min_dist.max(1),
    )
    .into_iter()
    .map(|p| (p.x, p.y))
    .collect()
}

const LINK_LENGTH_WEIGHT: f64 = 1e-3;
const LINK_CHORD_BIAS: f64 = 1e-9;

/// In-patch geometry between the window center and an accepted peak.
///
/// Without a confidence map this is the straight digital segment. With one it
/// is the minimum-cost 8-connected grid path inside the window, with per-step
/// cost `(1 - conf(pixel)) + 1e-3 * step_length` plus an infinitesimal bias
/// toward the straight chord that makes cost ties deterministic.
pub fn link_path(
    center: (i32, i32),
    peak: (i32, i32),
    conf: Option<&ConfidenceMap>,
    window: &PatchWindow,
) -> Vec<(i32, i32)> {
    if center == peak {
        return vec![center];
    }
    let Some(conf) = conf else {
        return digital_line(center, peak);
    };
    let ps = window.patch_size() as i32;
    let (ox, oy) = window.origin();
    let inside = |x: i32, y: i32| x >= ox && y >= oy && x < ox + ps && y < oy + ps;
    debug_assert!(inside(center.0, center.1) && inside(peak.0, peak.1));

    let idx = |x: i32, y: i32| ((y - oy) * ps + (x - ox)) as usize;
    let chord_a = Point::new(center.0 as f64, center.1 as f64);
    let chord_b = Point::new(peak.0 as f64, peak.1 as f64);
    let chord_len = chord_a.dist(chord_b);
    let perp = |x: i32, y: i32| -> f64 {
        let cross = (chord_b.x - chord_a.x) * (y as f64 - chord_a.y)
            - (chord_b.y - chord_a.y) * (x as f64 - chord_a.x);
        cross.abs() / chord_len
    };

    #[derive(PartialEq)]
    struct Node {
        cost: f64,
        y: i32,
        x: i32,
    }
    impl Eq for Node {}
    impl Ord for Node {
        fn cmp(&self, other: &Self) -> std::cmp::Ordering {
            // reversed: BinaryHeap pops the smallest cost first
            other
                .cost
                .total_cmp(&self.cost)
                .then_with(|| other.y.cmp(&self.y))
                .then_with(|| other.x.cmp(&self.x))
        }
    }
    impl PartialOrd for Node {
        fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
            Some(self.cmp(other))
        }
    }

    let n = (ps * ps) as usize;
    let mut dist = vec![f64::INFINITY; n];
    let mut parent: Vec<u32> = vec![u32::MAX; n];
    let start = idx(center.0, center.1);
    dist[start] = 0.0;
    let mut heap = BinaryHeap::new();
    heap.push(Node {
        cost: 0.0,
        y: center.1,
        x: center.0,
    });
    while let Some(node) = heap.pop() {
        let i = idx(node.x, node.y);
        if node.cost > dist[i] {
            continue;
        }
        if (node.x, node.y) == peak {
            break;
        }
        for dy in -1..=1 {
            for dx in -1..=1 {
                if dx == 0 && dy == 0 {
                    continue;
                }
                let (nx, ny) = (node.x + dx, node.y + dy);
                if !inside(nx, ny) {
                    continue;
                }
                let step_len = if dx != 0 && dy != 0 {
                    std::f64::consts::SQRT_2
                } else {
                    1.0
                };
                let step = (1.0 - conf.get(nx, ny) as f64)
                    + LINK_LENGTH_WEIGHT * step_len
                    + LINK_CHORD_BIAS * perp(nx, ny);
                let j = idx(nx, ny);
                let cand = node.cost + step;
                if cand < dist[j] {
                    dist[j] = cand;
                    parent[j] = i as u32;
                    heap.push(Node {
                        cost: cand,
                        y: ny,
                        x: nx,
                    });
                }
            }
        }
    }
    // walk parents back from the peak
    let mut path = Vec::new();
    let mut i = idx(peak.0, peak.1);
    if dist[i].is_infinite() {
        // unreachable only if the window were malformed; fall back to the chord
        return digital_line(center, peak);
    }
    loop {
        let x = ox + (i as i32 % ps);
        let y = oy + (i as i32 / ps);
        path.push((x, y));
        if i == start {
            break;
        }
        i = parent[i] as usize;
    }
    path.reverse();
    path
}

/// Cost of a linked path under the link cost model (without the chord bias).
pub fn path_cost(path: &[(i32, i32)], conf: &ConfidenceMap) -> f64 {
    let mut cost = 0.0;
    for w in path.windows(2) {
        let step_len = if w[0].0 != w[1].0 && w[0].1 != w[1].1 {
            std::f64::consts::SQRT_2
        } else {
            1.0
        };
        cost += (1.0 - conf.get(w[1].0, w[1].1) as f64) + LINK_LENGTH_WEIGHT * step_len;
    }
    cost
}

struct TraceState {
    frontier: VecDeque<(i32, i32)>,
    visited: Vec<bool>,
    width: i32,
    height: i32,
}

impl TraceState {
    fn new(width: u32, height: u32) -> Self {
        TraceState {
            frontier: VecDeque::new(),
            visited: vec![false; width as usize * height as usize],
            width: width as i32,
            height: height as i32,
        }
    }

    #[inline]
    fn is_visited(&self, p: (i32, i32)) -> bool {
        self.visited[(p.1 * self.width + p.0) as usize]
    }

    fn mark_ball(&mut self, p: (i32, i32), radius: i32) {
        for y in (p.1 - radius).max(0)..=(p.1 + radius).min(self.height - 1) {
            for x in (p.0 - radius).max(0)..=(p.0 + radius).min(self.width - 1) {
                self.visited[(y * self.width + x) as usize] = true;
            }
        }
    }

    fn pop(&mut self, order: FrontierOrder) -> Option<(i32, i32)> {
        match order {
            FrontierOrder::Fifo => self.frontier.pop_front(),
            FrontierOrder::Lifo => self.frontier.pop_back(),
        }
    }
}

struct GraphBuilder {
    width: u32,
    height: u32,
    vertices: Vec<Vertex>,
    edges: Vec<Edge>,
    index: HashMap<(i32, i32), u64>,
}

impl GraphBuilder {
    fn new(width: u32, height: u32) -> Self {
        GraphBuilder {
            width,
            height,
            vertices: Vec::new(),
            edges: Vec::new(),
            index: HashMap::new(),
        }
    }

    fn vertex_at(&mut self, p: (i32, i32)) -> u64 {
        if let Some(&id) = self.index.get(&p) {
            return id;
        }
        let id = self.vertices.len() as u64;
        self.vertices.push(Vertex {
            id,
            x: p.0 as f64,
            y: p.1 as f64,
        });
        self.index.insert(p, id);
        id
    }

    fn add_link(&mut self, p: (i32, i32), q: (i32, i32), path: Vec<(i32, i32)>, label: ClassLabel) {
        let u = self.vertex_at(p);
        let v = self.vertex_at(q);
        let points: Vec<(f64, f64)> = path.iter().map(|&(x, y)| (x as f64, y as f64)).collect();
        self.edges.push(Edge {
            u,
            v,
            label,
            points,
        });
    }

    fn rasterize_current(&self) -> SkeletonRaster {
        let mut r = SkeletonRaster::new(self.width, self.height);
        for v in &self.vertices {
            r.set(v.x as i32, v.y as i32, true);
        }
        for e in &self.edges {
            for &(x, y) in &e.points {
                r.set(x as i32, y as i32, true);
            }
        }
        r
    }

    fn build(self) -> Result<NetworkGraph> {
        NetworkGraph::new(self.width, self.height, self.vertices, self.edges)
    }
}

/// Run the iterative delineation from the given seeds.
///
/// Pops frontier points, skips those already visited, marks a
/// `visit_radius`-ball around each processed center, queries the predictor on
/// the (border-clamped) window, links the center to every extracted peak, and
/// enqueues unvisited peaks. When the frontier empties and `reseed` is on,
/// new seeds come from confidence-map maxima farther than the visit radius
/// from every visited pixel; tracing stops when reseeding yields nothing or
/// the iteration cap is hit.
pub fn trace(
    predictor: &dyn Predictor,
    conf: Option<&ConfidenceMap>,
    seeds: &[(i32, i32)],
    params: &TraceParams,
) -> Result<TraceOutcome> {
    params.validate()?;
    if let Some(c) = conf {
        if c.width != params.width || c.height != params.height {
            return Err(Error::DimensionMismatch {
                left: format!("confidence {}x{}", c.width, c.height),
                right: format!("params {}x{}", params.width, params.height),
            });
        }
    }
    if predictor.patch_size() != params.patch_size {
        return Err(Error::DimensionMismatch {
            left: format!("predictor patch size {}", predictor.patch_size()),
            right: format!("params patch size {}", params.patch_size),
        });
    }
    let (w, h) = (params.width as i32, params.height as i32);
    for &(x, y) in seeds {
        if x < 0 || y < 0 || x >= w || y >= h {
            return Err(Error::InvalidParameter(format!(
                "seed ({x}, {y}) outside {w}x{h}"
            )));
        }
    }

    let mut state = TraceState::new(params.width, params.height);
    state.frontier.extend(seeds.iter().copied());
    let mut builder = GraphBuilder::new(params.width, params.height);
    let mut snapshots = Vec::new();
    let cap = params.iteration_cap();
    let label = params.class.unwrap_or(ClassLabel::Unlabeled);
    let window_possible =
        params.patch_size <= params.width && params.patch_size <= params.height;
    let mut iterations = 0usize;

    loop {
        let Some(p) = state.pop(params.frontier) else {
            // frontier exhausted: one reseed attempt per exhaustion
            let reseeded = if params.reseed {
                conf.map_or(false, |c| {
                    let fresh = reseed_candidates(c, &state, params);
                    state.frontier.extend(fresh.iter().copied());
                    !fresh.is_empty()
                })
            } else {
                false
            };
            if !reseeded {
                break;
            }
            continue;
        };
        if iterations >= cap {
            break;
        }
        if state.is_visited(p) {
            continue;
        }
        state.mark_ball(p, params.visit_radius);
        iterations += 1;
        builder.vertex_at(p);
        if !window_possible {
            continue;
        }
        let window = clamped_window(p, params)?;
        let heatmap = predictor.predict(&window, params.class)?;
        for peak in extract_peaks(&heatmap, params.theta, params.nms_radius) {
            let q = window.to_image_pixel((peak.x, peak.y));
            if q == p {
                continue;
            }
            let path = link_path(p, q, conf, &window);
            builder.add_link(p, q, path, label);
            if !state.is_visited(q) {
                state.frontier.push_back(q);
            }
        }
        if params.snapshot_every > 0 && iterations % params.snapshot_every == 0 {
            snapshots.push(builder.rasterize_current());
        }
    }

    Ok(TraceOutcome {
        graph: builder.build()?,
        snapshots,
        iterations,
    })
}

/// Class-constrained tracing for arteries and veins: one run per class,
/// seeded from that class's confidence map, unioned at the end.
pub fn trace_av(
    predictor: &dyn Predictor,
    conf_artery: &ConfidenceMap,
    conf_vein: &ConfidenceMap,
    params: &TraceParams,
) -> Result<NetworkGraph> {
    if conf_artery.width != conf_vein.width || conf_artery.height != conf_vein.height {
        return Err(Error::DimensionMismatch {
            left: format!("artery {}x{}", conf_artery.width, conf_artery.height),
            right: format!("vein {}x{}", conf_vein.width, conf_vein.height),
        });
    }
    let mut merged = NetworkGraph::new(params.width, params.height, vec![], vec![])?;
    for (conf, class) in [
        (conf_artery, ClassLabel::Artery),
        (conf_vein, ClassLabel::Vein),
    ] {
        let mut run_params = params.clone();
        run_params.class = Some(class);
        let seeds = select_seeds(conf, params.seed_threshold, params.seed_min_dist);
        let outcome = trace(predictor, Some(conf), &seeds, &run_params)?;
        merged = merged.merge(&outcome.graph)?;
    }
    Ok(merged)
}

/// Window centered on `p`, shifted (not truncated) to fit inside the image;
/// the query point keeps its role as connectivity center.
fn clamped_window(p: (i32, i32), params: &TraceParams) -> Result<PatchWindow> {
    let ps = params.patch_size as i32;
    let half = ps / 2;
    let ox = (p.0 - half).clamp(0, params.width as i32 - ps);
    let oy = (p.1 - half).clamp(0, params.height as i32 - ps);
    PatchWindow::anchored(
        Point::new(p.0 as f64, p.1 as f64),
        params.patch_size,
        params.square_side,
        (ox, oy),
    )
}

/// Seeds for a new wave: confidence maxima farther than the visit radius from
/// every visited pixel.
fn reseed_candidates(
    conf: &ConfidenceMap,
    state: &TraceState,
    params: &TraceParams,
) -> Vec<(i32, i32)> {
    let w = state.width;
    let h = state.height;
    // dilate the visited mask by the visit radius (Chebyshev)
    let mut dilated = state.visited.clone();
    for _ in 0..params.visit_radius {
        let prev = dilated.clone();
        for y in 0..h {
            for x in 0..w {
                if prev[(y * w + x) as usize] {
                    continue;
                }
                let mut near = false;
                'scan: for dy in -1..=1 {
                    for dx in -1..=1 {
                        let (nx, ny) = (x + dx, y + dy);
                        if nx >= 0 && ny >= 0 && nx < w && ny < h && prev[(ny * w + nx) as usize] {
                            near = true;
                            break 'scan;
                        }
                    }
                }
                if near {
                    dilated[(y * w + x) as usize] = true;
                }
            }
        }
    }
    let mut masked = conf.values.clone();
    for i in 0..masked.len() {
        if dilated[i] {
            masked[i] = 0.0;
        }
    }
    grid_peaks(&masked, w, h, params.seed_threshold, params.seed_min_dist.max(1))
        .into_iter()
        .map(|p| (p.x, p.y))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::patchgt::GtMode;
    use crate::predictor::OraclePredictor;

    /// "+"-shaped network: four straight arms meeting at (128, 128). With an
    /// odd clip square of side 59 the tracer steps exactly 29 px per window,
    /// so arms of length 87 = 3 * 29 end exactly on a clip-square boundary
    /// and every crossing falls on an integer pixel.
    fn plus_graph() -> NetworkGraph {
        let c = 128.0;
        let arm = 87.0;
        let vertices = vec![
            Vertex { id: 0, x: c, y: c },
            Vertex { id: 1, x: c + arm, y: c },
            Vertex { id: 2, x: c - arm, y: c },
            Vertex { id: 3, x: c, y: c + arm },
            Vertex { id: 4, x: c, y: c - arm },
        ];
        let seg = |b: (f64, f64)| vec![(c, c), b];
        let edges = vec![
            Edge { u: 0, v: 1, label: ClassLabel::Unlabeled, points: seg((c + arm, c)) },
            Edge { u: 0, v: 2, label: ClassLabel::Unlabeled, points: seg((c - arm, c)) },
            Edge { u: 0, v: 3, label: ClassLabel::Unlabeled, points: seg((c, c + arm)) },
            Edge { u: 0, v: 4, label: ClassLabel::Unlabeled, points: seg((c, c - arm)) },
        ];
        NetworkGraph::new(256, 256, vertices, edges).unwrap()
    }

    #[test]
    fn select_seeds_on_zero_map_is_empty() {
        let conf = ConfidenceMap::from_values(64, 64, vec![0.0; 64 * 64]).unwrap();
        assert!(select_seeds(&conf, 0.5, 10).is_empty());
    }

    #[test]
    fn select_seeds_finds_blob_maxima() {
        let mut values = vec![0.0f32; 256 * 256];
        let blob = |values: &mut Vec<f32>, cx: i32, cy: i32| {
            for dy in -5..=5i32 {
                for dx in -5..=5i32 {
                    let v = (1.0 - (dx.abs().max(dy.abs()) as f32) / 6.0).max(0.0);
                    let i = ((cy + dy) * 256 + cx + dx) as usize;
                    values[i] = values[i].max(v);
                }
            }
        };
        blob(&mut values, 50, 60);
        blob(&mut values, 150, 60);
        let conf = ConfidenceMap::from_values(256, 256, values).unwrap();
        let seeds = select_seeds(&conf, 0.5, 20);
        assert_eq!(seeds, vec![(50, 60), (150, 60)]);
        // exhaustive suppression oracle: no two seeds within the ball, all
        // maxima found
        for (i, a) in seeds.iter().enumerate() {
            for b in seeds.iter().skip(i + 1) {
                assert!(crate::geom::chebyshev(*a, *b) > 20);
            }
        }
    }

    #[test]
    fn link_path_without_map_is_straight() {
        let w = PatchWindow::anchored(Point::new(32.0, 32.0), 64, 58, (0, 0)).unwrap();
        let path = link_path((32, 32), (32, 3), None, &w);
        assert_eq!(path.len(), 30);
        assert!(path.iter().all(|&(x, _)| x == 32));
        assert_eq!(path[0], (32, 32));
        assert_eq!(*path.last().unwrap(), (32, 3));
    }

    #[test]
    fn link_path_on_uniform_map_is_straight() {
        let conf = ConfidenceMap::from_values(64, 64, vec![0.5; 64 * 64]).unwrap();
        let w = PatchWindow::anchored(Point::new(32.0, 32.0), 64, 58, (0, 0)).unwrap();
        let path = link_path((32, 32), (32, 3), Some(&conf), &w);
        assert_eq!(path, digital_line((32, 32), (32, 3)));
        // a slope without rounding ties
        let path = link_path((32, 32), (11, 18), Some(&conf), &w);
        assert_eq!(path, digital_line((32, 32), (11, 18)));
    }

    #[test]
    fn link_path_follows_bright_ridge() {
        // L-shaped ridge: bright along column x=10 and row y=50
        let mut values = vec![0.0f32; 64 * 64];
        for y in 10..=50 {
            values[y * 64 + 10] = 1.0;
        }
        for x in 10..=40 {
            values[50 * 64 + x] = 1.0;
        }
        let conf = ConfidenceMap::from_values(64, 64, values).unwrap();
        let w = PatchWindow::anchored(Point::new(32.0, 32.0), 64, 58, (0, 0)).unwrap();
        let path = link_path((10, 10), (40, 50), Some(&conf), &w);
        // every step stays on the ridge
        assert!(path.iter().all(|&(x, y)| conf.get(x, y) == 1.0));
        // cost matches a brute-force shortest-path oracle
        let got = path_cost(&path, &conf);
        let want = dijkstra_oracle(&conf, (10, 10), (40, 50));
        assert!((got - want).abs() < 1e-6, "{got} vs {want}");
    }

    /// Brute-force O(V^2) shortest path without a heap.
    fn dijkstra_oracle(conf: &ConfidenceMap, start: (i32, i32), goal: (i32, i32)) -> f64 {
        let n = 64 * 64;
        let idx = |x: i32, y: i32| (y * 64 + x) as usize;
        let mut dist = vec![f64::INFINITY; n];
        let mut done = vec![false; n];
        dist[idx(start.0, start.1)] = 0.0;
        loop {
            let mut best: Option<usize> = None;
            for i in 0..n {
                if !done[i] && dist[i].is_finite() {
                    if best.map_or(true, |b| dist[i] < dist[b]) {
                        best = Some(i);
                    }
                }
            }
            let Some(i) = best else { break };
            if i == idx(goal.0, goal.1) {
                return dist[i];
            }
            done[i] = true;
            let (x, y) = ((i % 64) as i32, (i / 64) as i32);
            for dy in -1..=1i32 {
                for dx in -1..=1i32 {
                    if dx == 0 && dy == 0 {
                        continue;
                    }
                    let (nx, ny) = (x + dx, y + dy);
                    if nx < 0 || ny < 0 || nx >= 64 || ny >= 64 {
                        continue;
                    }
                    let len = if dx != 0 && dy != 0 {
                        std::f64::consts::SQRT_2
                    } else {
                        1.0
                    };
                    let cand = dist[i] + (1.0 - conf.get(nx, ny) as f64) + 1e-3 * len;
                    if cand < dist[idx(nx, ny)] {
                        dist[idx(nx, ny)] = cand;
                    }
                }
            }
        }
        f64::INFINITY
    }

    #[test]
    fn tracing_plus_network_recovers_the_skeleton() {
        let g = plus_graph();
        let oracle = OraclePredictor::new(&g, GtMode::Connectivity, 64, 2.0);
        let conf = crate::synth::render_confidence(&g, 3, 0.0, 0).unwrap();
        let mut params = TraceParams::new(256, 256, 0.5);
        params.square_side = 59;
        params.reseed = false;
        let outcome = trace(&oracle, Some(&conf), &[(128, 128)], &params).unwrap();
        let traced = outcome.graph.rasterize(None);
        let gt = g.rasterize(None);
        let report = crate::eval::evaluate_skeletons(&traced, &gt, 2.0).unwrap();
        assert_eq!(report.f1_r, 1.0, "report {report:?}");
        assert_eq!(report.c, 1.0);
    }

    #[test]
    fn empty_seed_list_without_map_traces_nothing() {
        let g = plus_graph();
        let oracle = OraclePredictor::new(&g, GtMode::Connectivity, 64, 2.0);
        let params = TraceParams::new(256, 256, 0.5);
        let outcome = trace(&oracle, None, &[], &params).unwrap();
        assert_eq!(outcome.iterations, 0);
        assert!(outcome.graph.vertices.is_empty());
        assert!(outcome.graph.edges.is_empty());
    }

    #[test]
    fn fully_corrupted_predictor_leaves_isolated_seeds() {
        let g = plus_graph();
        let oracle = OraclePredictor::new(&g, GtMode::Connectivity, 64, 2.0);
        let corrupt = crate::predictor::CorruptOracle::new(oracle, 1.0, 0, 3).unwrap();
        let mut params = TraceParams::new(256, 256, 0.5);
        params.reseed = false;
        let seeds = [(128, 128), (40, 40), (200, 180)];
        let outcome = trace(&corrupt, None, &seeds, &params).unwrap();
        assert_eq!(outcome.graph.vertices.len(), 3);
        assert!(outcome.graph.edges.is_empty());
    }

    #[test]
    fn trace_is_deterministic() {
        let g = plus_graph();
        let oracle = OraclePredictor::new(&g, GtMode::Connectivity, 64, 2.0);
        let params = TraceParams::new(256, 256, 0.5);
        let a = trace(&oracle, None, &[(128, 128)], &params).unwrap();
        let b = trace(&oracle, None, &[(128, 128)], &params).unwrap();
        assert_eq!(a.graph, b.graph);
        assert_eq!(a.iterations, b.iterations);
    }

    #[test]
    fn traced_edges_fit_inside_one_window() {
        let g = plus_graph();
        let oracle = OraclePredictor::new(&g, GtMode::Connectivity, 64, 2.0);
        let params = TraceParams::new(256, 256, 0.5);
        let outcome = trace(&oracle, None, &[(128, 128)], &params).unwrap();
        for e in &outcome.graph.edges {
            let xs: Vec<f64> = e.points.iter().map(|p| p.0).collect();
            let ys: Vec<f64> = e.points.iter().map(|p| p.1).collect();
            let span_x = xs.iter().cloned().fold(f64::MIN, f64::max)
                - xs.iter().cloned().fold(f64::MAX, f64::min);
            let span_y = ys.iter().cloned().fold(f64::MIN, f64::max)
                - ys.iter().cloned().fold(f64::MAX, f64::min);
            assert!(span_x.max(span_y) <= 64.0);
        }
    }

    #[test]
    fn adversarial_predictor_terminates_within_bound() {
        struct Everywhere;
        impl Predictor for Everywhere {
            fn patch_size(&self) -> u32 {
                64
            }
            fn predict(
                &self,
                _w: &PatchWindow,
                _c: Option<ClassLabel>,
            ) -> crate::error::Result<crate::patchgt::Heatmap> {
                // peaks everywhere: a grid of bright points
                let pts: Vec<Point> = (0..8)
                    .flat_map(|i| (0..8).map(move |j| Point::new(4.0 + 8.0 * i as f64, 4.0 + 8.0 * j as f64)))
                    .collect();
                crate::patchgt::make_gt_heatmap(&pts, 64, 2.0)
            }
        }
        let params = TraceParams::new(256, 256, 0.5);
        let outcome = trace(&Everywhere, None, &[(128, 128)], &params).unwrap();
        let rho = params.visit_radius as usize;
        let bound = (256 * 256) / (rho * rho) + 1;
        assert!(
            outcome.iterations <= bound,
            "{} iterations exceeds bound {bound}",
            outcome.iterations
        );
    }

    #[test]
    fn reseeding_covers_disconnected_components() {
        // two far-apart horizontal lines; seed only the first: reseeding from
        // the confidence map must reach the second
        let vertices = vec![
            Vertex { id: 0, x: 40.0, y: 60.0 },
            Vertex { id: 1, x: 216.0, y: 60.0 },
            Vertex { id: 2, x: 40.0, y: 200.0 },
            Vertex { id: 3, x: 216.0, y: 200.0 },
        ];
        let edges = vec![
            Edge { u: 0, v: 1, label: ClassLabel::Unlabeled, points: vec![(40.0, 60.0), (216.0, 60.0)] },
            Edge { u: 2, v: 3, label: ClassLabel::Unlabeled, points: vec![(40.0, 200.0), (216.0, 200.0)] },
        ];
        let g = NetworkGraph::new(256, 256, vertices, edges).unwrap();
        let conf = crate::synth::render_confidence(&g, 3, 0.0, 0).unwrap();
        let oracle = OraclePredictor::new(&g, GtMode::Connectivity, 64, 2.0);
        let params = TraceParams::new(256, 256, 0.5);
        let outcome = trace(&oracle, Some(&conf), &[(128, 60)], &params).unwrap();
        let traced = outcome.graph.rasterize(None);
        let gt = g.rasterize(None);
        let report = crate::eval::evaluate_skeletons(&traced, &gt, 2.0).unwrap();
        assert!(report.r > 0.95, "recall {report:?}");
    }

    #[test]
    fn snapshot_recall_is_monotone() {
        let g = plus_graph();
        let oracle = OraclePredictor::new(&g, GtMode::Connectivity, 64, 2.0);
        let mut params = TraceParams::new(256, 256, 0.5);
        params.snapshot_every = 2;
        params.reseed = false;
        let outcome = trace(&oracle, None, &[(128, 128)], &params).unwrap();
        assert!(outcome.snapshots.len() >= 2);
        let gt = g.rasterize(None);
        let mut last = -1.0;
        for snap in &outcome.snapshots {
            let m = crate::eval::match_skeletons(snap, &gt, 2.0).unwrap();
            let (_, r, _) = crate::eval::precision_recall(&m);
            assert!(r + 1e-12 >= last, "recall decreased: {r} < {last}");
            last = r;
        }
    }
}
