//! Deterministic synthetic filamentary networks and confidence maps.
//!
//! `tree` networks are random binary branching trees (vessel-like); `grid`
//! networks are perturbed lattices with random deletions (road-like). Both
//! keep non-adjacent branches at least `min_separation` apart so raster-level
//! and graph-level connectivity agree, which the closed-loop tests rely on.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::geom::{segment_segment_dist, Point};
use crate::netgraph::{ClassLabel, Edge, NetworkGraph, Vertex};
use crate::tracer::ConfidenceMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SynthKind {
    Tree,
    Grid,
}

#[derive(Debug, Clone)]
pub struct SynthParams {
    pub kind: SynthKind,
    pub width: u32,
    pub height: u32,
    /// Tree: number of binary branching events. Grid: ignored.
    pub branches: u32,
    /// Branch length range in pixels.
    pub branch_length: (f64, f64),
    /// Maximum extra deviation of child directions, degrees.
    pub branch_angle_jitter: f64,
    pub min_separation: f64,
    /// Tree only: probability a branch is an artery rather than a vein.
    pub class_mix: f64,
    pub rng_seed: u64,
}

impl SynthParams {
    pub fn tree(width: u32, height: u32, branches: u32, rng_seed: u64) -> Self {
        SynthParams {
            kind: SynthKind::Tree,
            width,
            height,
            branches,
            branch_length: (22.0, 42.0),
            branch_angle_jitter: 20.0,
            min_separation: 5.0,
            class_mix: 1.0,
            rng_seed,
        }
    }

    pub fn grid(width: u32, height: u32, rng_seed: u64) -> Self {
        SynthParams {
            kind: SynthKind::Grid,
            width,
            height,
            branches: 0,
            branch_length: (36.0, 36.0),
            branch_angle_jitter: 0.0,
            min_separation: 5.0,
            class_mix: 0.0,
            rng_seed,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.width < 128 || self.height < 128 {
            return Err(Error::InvalidParameter(
                "synthetic images must be at least 128x128".into(),
            ));
        }
        if self.min_separation < 3.0 {
            return Err(Error::InvalidParameter(
                "min separation must be >= 3 px".into(),
            ));
        }
        if !(self.branch_length.0 > 0.0 && self.branch_length.1 >= self.branch_length.0) {
            return Err(Error::InvalidParameter("bad branch length range".into()));
        }
        if !(0.0..=1.0).contains(&self.class_mix) {
            return Err(Error::InvalidParameter("class mix outside [0, 1]".into()));
        }
        Ok(())
    }
}

const MARGIN: f64 = 4.0;
const GRID_KEEP_PROBABILITY: f64 = 0.8;
/// Branch segments per edge polyline; gives vessels a slight curve.
const TREE_SEGMENTS: usize = 3;

/// Generate a synthetic network; deterministic per seed.
pub fn generate_network(params: &SynthParams) -> Result<NetworkGraph> {
    params.validate()?;
    match params.kind {
        SynthKind::Tree => generate_tree(params),
        SynthKind::Grid => generate_grid(params),
    }
}

struct Tip {
    pos: Point,
    dir: f64,
    vertex: u64,
}

fn generate_tree(params: &SynthParams) -> Result<NetworkGraph> {
    // a run can strand itself (e.g. the trunk points at a border and both
    // children run out of room); restart with derived sub-seeds, still fully
    // deterministic per seed
    let mut last = Err(Error::SeparationUnsatisfiable { attempts: 0 });
    for attempt in 0..16u64 {
        let sub_seed = params
            .rng_seed
            .wrapping_add(attempt.wrapping_mul(0x9e37_79b9_7f4a_7c15));
        last = try_generate_tree(params, sub_seed);
        if last.is_ok() {
            return last;
        }
    }
    last
}

fn try_generate_tree(params: &SynthParams, sub_seed: u64) -> Result<NetworkGraph> {
    let mut rng = ChaCha8Rng::seed_from_u64(sub_seed);
    let (w, h) = (params.width as f64, params.height as f64);
    let mut vertices: Vec<Vertex> = Vec::new();
    let mut edges: Vec<Edge> = Vec::new();

    let mut budget = 60 * (params.branches as usize + 1);
    let spend = |budget: &mut usize| -> Result<()> {
        if *budget == 0 {
            return Err(Error::SeparationUnsatisfiable {
                attempts: 60 * (params.branches as usize + 1),
            });
        }
        *budget -= 1;
        Ok(())
    };

    // trunk
    let (root_polyline, root_dir) = loop {
        spend(&mut budget)?;
        let start = Point::new(
            rng.gen_range(0.3 * w..0.7 * w),
            rng.gen_range(0.3 * h..0.7 * h),
        );
        let dir = rng.gen_range(0.0..std::f64::consts::TAU);
        let len = rng.gen_range(params.branch_length.0..=params.branch_length.1);
        if let Some(poly) = wiggly_polyline(&mut rng, start, dir, len, params, w, h) {
            break (poly, dir);
        }
    };
    let root_class = pick_class(&mut rng, params.class_mix);
    let trunk_end = *root_polyline.last().unwrap();
    vertices.push(Vertex { id: 0, x: root_polyline[0].x, y: root_polyline[0].y });
    vertices.push(Vertex { id: 1, x: trunk_end.x, y: trunk_end.y });
    edges.push(Edge {
        u: 0,
        v: 1,
        label: root_class,
        points: root_polyline.iter().map(|p| (p.x, p.y)).collect(),
    });
    let mut tips = vec![Tip { pos: trunk_end, dir: root_dir, vertex: 1 }];

    let mut placed_events = 0;
    while placed_events < params.branches {
        spend(&mut budget)?;
        if tips.is_empty() {
            return Err(Error::SeparationUnsatisfiable {
                attempts: 60 * (params.branches as usize + 1),
            });
        }
        let tip = tips.swap_remove(rng.gen_range(0..tips.len()));
        let mut children = Vec::new();
        let mut ok = true;
        for side in [-1.0, 1.0] {
            let mut placed = None;
            for _ in 0..30 {
                let spread = 18.0 + rng.gen_range(0.0..=params.branch_angle_jitter.max(0.001));
                let dir = tip.dir + side * spread.to_radians();
                let len = rng.gen_range(params.branch_length.0..=params.branch_length.1);
                let Some(poly) = wiggly_polyline(&mut rng, tip.pos, dir, len, params, w, h) else {
                    continue;
                };
                // keep min_separation to every branch not sharing the tip
                // vertex, including the sibling placed just before
                let clear_existing = edges
                    .iter()
                    .filter(|e| e.u != tip.vertex && e.v != tip.vertex)
                    .all(|e| polyline_distance(&poly, &e.points) >= params.min_separation);
                let clear_sibling = children
                    .iter()
                    .all(|(_, sib): &(f64, Vec<Point>)| {
                        tail_distance(&poly, sib) >= params.min_separation
                    });
                if clear_existing && clear_sibling {
                    placed = Some((dir, poly));
                    break;
                }
            }
            match placed {
                Some(p) => children.push(p),
                None => {
                    ok = false;
                    break;
                }
            }
        }
        if !ok {
            continue; // tip abandoned, try another
        }
        for (dir, poly) in children {
            let end = *poly.last().unwrap();
            let vid = vertices.len() as u64;
            vertices.push(Vertex { id: vid, x: end.x, y: end.y });
            edges.push(Edge {
                u: tip.vertex,
                v: vid,
                label: pick_class(&mut rng, params.class_mix),
                points: poly.iter().map(|p| (p.x, p.y)).collect(),
            });
            tips.push(Tip { pos: end, dir, vertex: vid });
        }
        placed_events += 1;
    }

    NetworkGraph::new(params.width, params.height, vertices, edges)
}

fn pick_class(rng: &mut ChaCha8Rng, class_mix: f64) -> ClassLabel {
    if rng.gen::<f64>() < class_mix {
        ClassLabel::Artery
    } else {
        ClassLabel::Vein
    }
}

/// A gently curved polyline, or None when it leaves the canvas margin.
fn wiggly_polyline(
    rng: &mut ChaCha8Rng,
    start: Point,
    dir: f64,
    length: f64,
    params: &SynthParams,
    w: f64,
    h: f64,
) -> Option<Vec<Point>> {
    let seg = length / TREE_SEGMENTS as f64;
    let wiggle = (params.branch_angle_jitter / 6.0).to_radians();
    let mut points = vec![start];
    let mut pos = start;
    let mut d = dir;
    for i in 0..TREE_SEGMENTS {
        if i > 0 {
            d += rng.gen_range(-wiggle..=wiggle);
        }
        pos = Point::new(pos.x + seg * d.cos(), pos.y + seg * d.sin());
        if pos.x < MARGIN || pos.y < MARGIN || pos.x > w - 1.0 - MARGIN || pos.y > h - 1.0 - MARGIN
        {
            return None;
        }
        points.push(pos);
    }
    Some(points)
}

/// Minimum distance between two polylines.
fn polyline_distance(a: &[Point], b: &[(f64, f64)]) -> f64 {
    let mut best = f64::INFINITY;
    for sa in a.windows(2) {
        for sb in b.windows(2) {
            let d = segment_segment_dist(
                sa[0],
                sa[1],
                Point::new(sb[0].0, sb[0].1),
                Point::new(sb[1].0, sb[1].1),
            );
            best = best.min(d);
        }
    }
    best
}

/// Distance between two sibling branches ignoring their shared first point.
fn tail_distance(a: &[Point], b: &[Point]) -> f64 {
    let mut best = f64::INFINITY;
    for (i, sa) in a.windows(2).enumerate() {
        for (j, sb) in b.windows(2).enumerate() {
            if i == 0 && j == 0 {
                // both start at the shared tip; compare endpoints instead
                best = best.min(sa[1].dist(sb[1]));
                continue;
            }
            best = best.min(segment_segment_dist(sa[0], sa[1], sb[0], sb[1]));
        }
    }
    best
}

fn generate_grid(params: &SynthParams) -> Result<NetworkGraph> {
    let mut rng = ChaCha8Rng::seed_from_u64(params.rng_seed);
    let (w, h) = (params.width as f64, params.height as f64);
    let spacing = params.branch_length.0.max(params.min_separation * 3.0);
    let perturb = (spacing / 8.0).min((spacing - params.min_separation) / 2.0 * 0.8);
    let cols = ((w - 2.0 * MARGIN) / spacing).floor() as usize + 1;
    let rows = ((h - 2.0 * MARGIN) / spacing).floor() as usize + 1;
    if cols < 2 || rows < 2 {
        return Err(Error::SeparationUnsatisfiable { attempts: 0 });
    }

    let mut positions = vec![Point::new(0.0, 0.0); cols * rows];
    for j in 0..rows {
        for i in 0..cols {
            let base = Point::new(MARGIN + i as f64 * spacing, MARGIN + j as f64 * spacing);
            positions[j * cols + i] = Point::new(
                (base.x + rng.gen_range(-perturb..=perturb)).clamp(MARGIN, w - 1.0 - MARGIN),
                (base.y + rng.gen_range(-perturb..=perturb)).clamp(MARGIN, h - 1.0 - MARGIN),
            );
        }
    }
    // lattice edges with random deletions
    let mut kept: Vec<(usize, usize)> = Vec::new();
    for j in 0..rows {
        for i in 0..cols {
            let a = j * cols + i;
            if i + 1 < cols && rng.gen::<f64>() < GRID_KEEP_PROBABILITY {
                kept.push((a, a + 1));
            }
            if j + 1 < rows && rng.gen::<f64>() < GRID_KEEP_PROBABILITY {
                kept.push((a, a + cols));
            }
        }
    }
    // drop isolated lattice nodes, renumber the rest
    let mut used = vec![false; positions.len()];
    for &(a, b) in &kept {
        used[a] = true;
        used[b] = true;
    }
    let mut remap = vec![u64::MAX; positions.len()];
    let mut vertices = Vec::new();
    for (i, &u) in used.iter().enumerate() {
        if u {
            remap[i] = vertices.len() as u64;
            vertices.push(Vertex {
                id: remap[i],
                x: positions[i].x,
                y: positions[i].y,
            });
        }
    }
    let edges = kept
        .iter()
        .map(|&(a, b)| Edge {
            u: remap[a],
            v: remap[b],
            label: ClassLabel::Road,
            points: vec![
                (positions[a].x, positions[a].y),
                (positions[b].x, positions[b].y),
            ],
        })
        .collect();
    NetworkGraph::new(params.width, params.height, vertices, edges)
}

/// Confidence map with a linear falloff around rasterized centerlines (1 on
/// the line, 0 at `line_width`), plus clamped Gaussian noise.
pub fn render_confidence(
    graph: &NetworkGraph,
    line_width: u32,
    noise_sigma: f64,
    rng_seed: u64,
) -> Result<ConfidenceMap> {
    if line_width < 1 {
        return Err(Error::InvalidParameter("line width must be >= 1".into()));
    }
    if noise_sigma < 0.0 || !noise_sigma.is_finite() {
        return Err(Error::InvalidParameter("bad noise sigma".into()));
    }
    let raster = graph.rasterize(None);
    let w = graph.width as i32;
    let h = graph.height as i32;
    let lw = line_width as f64;
    let reach = line_width as i32;
    let mut values = vec![0.0f32; (w * h) as usize];
    for (x, y) in raster.iter_set() {
        for ny in (y - reach).max(0)..=(y + reach).min(h - 1) {
            for nx in (x - reach).max(0)..=(x + reach).min(w - 1) {
                let d = (((nx - x).pow(2) + (ny - y).pow(2)) as f64).sqrt();
                let v = (1.0 - d / lw).max(0.0) as f32;
                let i = (ny * w + nx) as usize;
                if v > values[i] {
                    values[i] = v;
                }
            }
        }
    }
    if noise_sigma > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
        let normal = Normal::new(0.0, noise_sigma).expect("validated sigma");
        for v in &mut values {
            let noisy = *v as f64 + normal.sample(&mut rng);
            *v = noisy.clamp(0.0, 1.0) as f32;
        }
    }
    ConfidenceMap::from_values(graph.width, graph.height, values)
}
