//! Filamentary-network data model: vertices, polyline edges, class labels,
//! JSON (de)serialization, rasterization to 1-px skeletons, and patch-window
//! clipping (see [`clip`]).
//!
//! Graph file format (UTF-8, strict RFC 8259):
//!
//! ```json
//! {
//!   "width": 256, "height": 256,
//!   "vertices": [{"id": 0, "x": 10.0, "y": 20.0}, ...],
//!   "edges": [{"u": 0, "v": 1, "label": "artery", "points": [[10.0,20.0], ...]}, ...]
//! }
//! ```
//!
//! Coordinates use x rightward, y downward, origin at the top-left pixel
//! center; all must satisfy `0 <= x < width`, `0 <= y < height`.

mod clip;

pub use clip::{
    clip_to_window, default_square_side, BorderPoint, CenterLocation, ClippedPiece,
    ClippedSubgraph, PatchConnectivity, PatchWindow, SNAP_RADIUS,
};

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{digital_line, Point};
use crate::pgm;

/// Segment class. Graphs mixing `road` with `artery`/`vein` are rejected.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClassLabel {
    Artery,
    Vein,
    Road,
    Unlabeled,
}

impl ClassLabel {
    pub fn is_vessel(self) -> bool {
        matches!(self, ClassLabel::Artery | ClassLabel::Vein)
    }
}

impl fmt::Display for ClassLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ClassLabel::Artery => "artery",
            ClassLabel::Vein => "vein",
            ClassLabel::Road => "road",
            ClassLabel::Unlabeled => "unlabeled",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Vertex {
    pub id: u64,
    pub x: f64,
    pub y: f64,
}

impl Vertex {
    pub fn pos(&self) -> Point {
        Point::new(self.x, self.y)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub u: u64,
    pub v: u64,
    pub label: ClassLabel,
    /// Polyline from the position of `u` to the position of `v`.
    pub points: Vec<(f64, f64)>,
}

impl Edge {
    pub fn polyline(&self) -> impl Iterator<Item = Point> + '_ {
        self.points.iter().map(|&(x, y)| Point::new(x, y))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkGraph {
    pub width: u32,
    pub height: u32,
    pub vertices: Vec<Vertex>,
    pub edges: Vec<Edge>,
}

impl NetworkGraph {
    /// Build and validate.
    pub fn new(width: u32, height: u32, vertices: Vec<Vertex>, edges: Vec<Edge>) -> Result<Self> {
        let g = NetworkGraph {
            width,
            height,
            vertices,
            edges,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn from_json_slice(bytes: &[u8]) -> Result<Self> {
        let g: NetworkGraph = serde_json::from_slice(bytes).map_err(|e| Error::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        g.validate()?;
        Ok(g)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        Self::from_json_slice(&bytes)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("graph serialization cannot fail")
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        pgm::write_atomic(path, self.to_json().as_bytes())
    }

    pub fn vertex(&self, id: u64) -> Option<&Vertex> {
        self.vertices.iter().find(|v| v.id == id)
    }

    /// Check every structural invariant; errors name the offending element.
    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::InvalidGraph("zero image dimension".into()));
        }
        let mut ids = HashSet::with_capacity(self.vertices.len());
        let mut pos: HashMap<u64, Point> = HashMap::with_capacity(self.vertices.len());
        for v in &self.vertices {
            if !ids.insert(v.id) {
                return Err(Error::InvalidGraph(format!("duplicate vertex id {}", v.id)));
            }
            self.check_bounds(format!("vertex {}", v.id), v.x, v.y)?;
            pos.insert(v.id, v.pos());
        }
        let mut has_road = false;
        let mut has_vessel = false;
        for (i, e) in self.edges.iter().enumerate() {
            let pu = *pos
                .get(&e.u)
                .ok_or(Error::UnknownVertexId { id: e.u, edge: i })?;
            let pv = *pos
                .get(&e.v)
                .ok_or(Error::UnknownVertexId { id: e.v, edge: i })?;
            if e.points.len() < 2 {
                return Err(Error::InvalidGraph(format!(
                    "edge {i} needs at least 2 polyline points"
                )));
            }
            for &(x, y) in &e.points {
                if !x.is_finite() || !y.is_finite() {
                    return Err(Error::InvalidGraph(format!(
                        "edge {i} has a non-finite coordinate"
                    )));
                }
                self.check_bounds(format!("edge {i}"), x, y)?;
            }
            let first = Point::new(e.points[0].0, e.points[0].1);
            let last = Point::new(
                e.points[e.points.len() - 1].0,
                e.points[e.points.len() - 1].1,
            );
            if first != pu || last != pv {
                return Err(Error::InvalidGraph(format!(
                    "edge {i} polyline endpoints do not match vertices {} and {}",
                    e.u, e.v
                )));
            }
            for (j, w) in e.points.windows(2).enumerate() {
                if w[0] == w[1] {
                    return Err(Error::InvalidGraph(format!(
                        "edge {i} repeats point {:?} at segment {j}",
                        w[0]
                    )));
                }
            }
            match e.label {
                ClassLabel::Road => has_road = true,
                ClassLabel::Artery | ClassLabel::Vein => has_vessel = true,
                ClassLabel::Unlabeled => {}
            }
        }
        if has_road && has_vessel {
            return Err(Error::InvalidGraph(
                "graph mixes road with artery/vein labels".into(),
            ));
        }
        // vertices may legitimately violate finiteness only via JSON infinities
        for v in &self.vertices {
            if !v.x.is_finite() || !v.y.is_finite() {
                return Err(Error::InvalidGraph(format!(
                    "vertex {} has a non-finite coordinate",
                    v.id
                )));
            }
        }
        Ok(())
    }

    fn check_bounds(&self, what: String, x: f64, y: f64) -> Result<()> {
        if !(0.0..self.width as f64).contains(&x) || !(0.0..self.height as f64).contains(&y) {
            return Err(Error::CoordinateOutOfBounds {
                what,
                x,
                y,
                width: self.width,
                height: self.height,
            });
        }
        Ok(())
    }

    /// True iff any edge carries the given label.
    pub fn has_label(&self, label: ClassLabel) -> bool {
        self.edges.iter().any(|e| e.label == label)
    }

    /// Number of connected components over the vertex set (isolated vertices
    /// count as their own components).
    pub fn component_count(&self) -> usize {
        let index: HashMap<u64, usize> = self
            .vertices
            .iter()
            .enumerate()
            .map(|(i, v)| (v.id, i))
            .collect();
        let mut dsu = Dsu::new(self.vertices.len());
        for e in &self.edges {
            dsu.union(index[&e.u], index[&e.v]);
        }
        let mut roots = HashSet::new();
        for i in 0..self.vertices.len() {
            roots.insert(dsu.find(i));
        }
        roots.len()
    }

    /// Render polylines as 8-connected one-pixel-wide digital lines.
    ///
    /// Endpoints are rounded half away from zero and clamped to the raster;
    /// `class_filter` drops edges of other classes.
    pub fn rasterize(&self, class_filter: Option<ClassLabel>) -> SkeletonRaster {
        let mut raster = SkeletonRaster::new(self.width, self.height);
        for e in &self.edges {
            if let Some(f) = class_filter {
                if e.label != f {
                    continue;
                }
            }
            let pts: Vec<(i32, i32)> = e
                .polyline()
                .map(|p| {
                    let (x, y) = p.round_pixel();
                    (
                        x.clamp(0, self.width as i32 - 1),
                        y.clamp(0, self.height as i32 - 1),
                    )
                })
                .collect();
            for w in pts.windows(2) {
                for px in digital_line(w[0], w[1]) {
                    raster.set(px.0, px.1, true);
                }
            }
        }
        raster
    }

    /// Union of two graphs over the same canvas, re-numbering the other
    /// graph's vertex ids to stay unique.
    pub fn merge(&self, other: &NetworkGraph) -> Result<NetworkGraph> {
        if self.width != other.width || self.height != other.height {
            return Err(Error::DimensionMismatch {
                left: format!("{}x{}", self.width, self.height),
                right: format!("{}x{}", other.width, other.height),
            });
        }
        let offset = self.vertices.iter().map(|v| v.id + 1).max().unwrap_or(0);
        let mut vertices = self.vertices.clone();
        vertices.extend(other.vertices.iter().map(|v| Vertex {
            id: v.id + offset,
            ..*v
        }));
        let mut edges = self.edges.clone();
        edges.extend(other.edges.iter().map(|e| Edge {
            u: e.u + offset,
            v: e.v + offset,
            label: e.label,
            points: e.points.clone(),
        }));
        NetworkGraph::new(self.width, self.height, vertices, edges)
    }
}

/// Binary raster of one-pixel-wide centerlines.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SkeletonRaster {
    pub width: u32,
    pub height: u32,
    bits: Vec<bool>,
}

impl SkeletonRaster {
    pub fn new(width: u32, height: u32) -> Self {
        SkeletonRaster {
            width,
            height,
            bits: vec![false; width as usize * height as usize],
        }
    }

    #[inline]
    pub fn get(&self, x: i32, y: i32) -> bool {
        if x < 0 || y < 0 || x >= self.width as i32 || y >= self.height as i32 {
            return false;
        }
        self.bits[y as usize * self.width as usize + x as usize]
    }

    #[inline]
    pub fn set(&mut self, x: i32, y: i32, value: bool) {
        if x < 0 || y < 0 || x >= self.width as i32 || y >= self.height as i32 {
            return;
        }
        self.bits[y as usize * self.width as usize + x as usize] = value;
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.bits.iter().any(|&b| b)
    }

    /// Set pixels in row-major order.
    pub fn iter_set(&self) -> impl Iterator<Item = (i32, i32)> + '_ {
        let w = self.width as usize;
        self.bits
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(move |(i, _)| ((i % w) as i32, (i / w) as i32))
    }

    pub fn from_pgm_bytes(bytes: &[u8]) -> Result<Self> {
        let g = pgm::parse_graymap(bytes)?;
        let mut r = SkeletonRaster::new(g.width, g.height);
        let half = g.maxval / 2;
        for (i, &s) in g.samples.iter().enumerate() {
            r.bits[i] = s > half;
        }
        Ok(r)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        Self::from_pgm_bytes(&bytes)
    }

    /// Write as P5, maxval 255, skeleton pixels at 255.
    pub fn save(&self, path: &Path) -> Result<()> {
        let samples: Vec<u16> = self.bits.iter().map(|&b| if b { 255 } else { 0 }).collect();
        pgm::write_graymap(path, self.width, self.height, 255, &samples)
    }
}

struct Dsu {
    parent: Vec<usize>,
}

impl Dsu {
    fn new(n: usize) -> Self {
        Dsu {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, mut i: usize) -> usize {
        while self.parent[i] != i {
            self.parent[i] = self.parent[self.parent[i]];
            i = self.parent[i];
        }
        i
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.parent[ra.max(rb)] = ra.min(rb);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn straight_edge_graph(
        width: u32,
        height: u32,
        a: (f64, f64),
        b: (f64, f64),
    ) -> NetworkGraph {
        NetworkGraph::new(
            width,
            height,
            vec![
                Vertex {
                    id: 0,
                    x: a.0,
                    y: a.1,
                },
                Vertex {
                    id: 1,
                    x: b.0,
                    y: b.1,
                },
            ],
            vec![Edge {
                u: 0,
                v: 1,
                label: ClassLabel::Unlabeled,
                points: vec![a, b],
            }],
        )
        .unwrap()
    }

    #[test]
    fn minimal_roundtrip_preserves_bytes_modulo_whitespace() {
        let doc = r#"{
  "width": 16,
  "height": 16,
  "vertices": [{"id": 0, "x": 1.0, "y": 2.0}, {"id": 1, "x": 9.0, "y": 2.0}],
  "edges": [{"u": 0, "v": 1, "label": "unlabeled", "points": [[1.0, 2.0], [9.0, 2.0]]}]
}"#;
        let g = NetworkGraph::from_json_slice(doc.as_bytes()).unwrap();
        assert_eq!(g.edges.len(), 1);
        let out = g.to_json();
        let strip = |s: &str| s.chars().filter(|c| !c.is_whitespace()).collect::<String>();
        assert_eq!(strip(&out), strip(doc));
    }

    #[test]
    fn load_then_save_is_identity() {
        let g = straight_edge_graph(32, 32, (1.5, 2.25), (30.0, 31.0));
        let g2 = NetworkGraph::from_json_slice(g.to_json().as_bytes()).unwrap();
        assert_eq!(g, g2);
    }

    #[test]
    fn unknown_vertex_id_is_rejected() {
        let doc = r#"{"width":16,"height":16,
            "vertices":[{"id":0,"x":1,"y":1}],
            "edges":[{"u":0,"v":99,"label":"road","points":[[1,1],[2,2]]}]}"#;
        let err = NetworkGraph::from_json_slice(doc.as_bytes()).unwrap_err();
        assert!(err.to_string().contains("unknown vertex id 99"), "{err}");
    }

    #[test]
    fn coordinate_at_width_is_rejected() {
        let doc = r#"{"width":16,"height":16,
            "vertices":[{"id":0,"x":16,"y":1}],
            "edges":[]}"#;
        let err = NetworkGraph::from_json_slice(doc.as_bytes()).unwrap_err();
        assert!(err.to_string().contains("coordinate out of bounds"), "{err}");
    }

    #[test]
    fn mixed_road_and_vessel_is_rejected() {
        let doc = r#"{"width":16,"height":16,
            "vertices":[{"id":0,"x":1,"y":1},{"id":1,"x":2,"y":2},{"id":2,"x":3,"y":1}],
            "edges":[{"u":0,"v":1,"label":"road","points":[[1,1],[2,2]]},
                     {"u":1,"v":2,"label":"artery","points":[[2,2],[3,1]]}]}"#;
        let err = NetworkGraph::from_json_slice(doc.as_bytes()).unwrap_err();
        assert!(err.to_string().contains("mixes road"), "{err}");
    }

    #[test]
    fn repeated_polyline_point_is_rejected() {
        let doc = r#"{"width":16,"height":16,
            "vertices":[{"id":0,"x":1,"y":1},{"id":1,"x":3,"y":3}],
            "edges":[{"u":0,"v":1,"label":"road","points":[[1,1],[2,2],[2,2],[3,3]]}]}"#;
        assert!(NetworkGraph::from_json_slice(doc.as_bytes()).is_err());
    }

    #[test]
    fn rasterize_horizontal_edge() {
        let g = straight_edge_graph(8, 4, (0.0, 0.0), (3.0, 0.0));
        let r = g.rasterize(None);
        let set: Vec<(i32, i32)> = r.iter_set().collect();
        assert_eq!(set, vec![(0, 0), (1, 0), (2, 0), (3, 0)]);
    }

    #[test]
    fn rasterize_empty_graph_is_all_zero() {
        let g = NetworkGraph::new(8, 8, vec![], vec![]).unwrap();
        assert!(g.rasterize(None).is_empty());
    }

    #[test]
    fn rasterize_matches_line_oracle() {
        // brute-force digital-line oracle over the whole raster
        let g = straight_edge_graph(8, 8, (0.0, 0.0), (4.0, 2.0));
        let r = g.rasterize(None);
        let steps = 4;
        let mut expect = std::collections::BTreeSet::new();
        for i in 0..=steps {
            let t = i as f64 / steps as f64;
            expect.insert((
                crate::geom::round_half_away(4.0 * t),
                crate::geom::round_half_away(2.0 * t),
            ));
        }
        let got: std::collections::BTreeSet<(i32, i32)> = r.iter_set().collect();
        assert_eq!(got, expect);
    }

    #[test]
    fn rasterize_class_filter_drops_other_labels() {
        let g = NetworkGraph::new(
            16,
            16,
            vec![
                Vertex { id: 0, x: 0.0, y: 0.0 },
                Vertex { id: 1, x: 5.0, y: 0.0 },
                Vertex { id: 2, x: 0.0, y: 5.0 },
                Vertex { id: 3, x: 5.0, y: 5.0 },
            ],
            vec![
                Edge {
                    u: 0,
                    v: 1,
                    label: ClassLabel::Artery,
                    points: vec![(0.0, 0.0), (5.0, 0.0)],
                },
                Edge {
                    u: 2,
                    v: 3,
                    label: ClassLabel::Vein,
                    points: vec![(0.0, 5.0), (5.0, 5.0)],
                },
            ],
        )
        .unwrap();
        let arteries = g.rasterize(Some(ClassLabel::Artery));
        assert_eq!(arteries.count(), 6);
        assert!(arteries.get(3, 0));
        assert!(!arteries.get(3, 5));
    }

    #[test]
    fn component_count_matches_raster_components() {
        // two straight lines far apart -> 2 components both as graph and raster
        let mut g = straight_edge_graph(64, 64, (2.0, 2.0), (20.0, 2.0));
        g.vertices.push(Vertex {
            id: 2,
            x: 2.0,
            y: 40.0,
        });
        g.vertices.push(Vertex {
            id: 3,
            x: 20.0,
            y: 44.0,
        });
        g.edges.push(Edge {
            u: 2,
            v: 3,
            label: ClassLabel::Unlabeled,
            points: vec![(2.0, 40.0), (20.0, 44.0)],
        });
        g.validate().unwrap();
        assert_eq!(g.component_count(), 2);
        let r = g.rasterize(None);
        let labels = crate::eval::label_components(&r);
        assert_eq!(labels.count, 2);
    }
}
