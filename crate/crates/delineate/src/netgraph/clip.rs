//! Patch windows and square clipping.
//!
//! A [`PatchWindow`] is the pixel box a predictor sees plus the slightly
//! smaller *clip square* used for ground truth: border points are the
//! intersections of the network's polylines with the square's boundary.
//! Connectivity queries ask whether a border point is reachable from the
//! patch center along clipped geometry only, optionally restricted to the
//! center's class.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::geom::Point;

use super::{ClassLabel, NetworkGraph};

/// The patch center counts as "on the network" within this radius (px).
pub const SNAP_RADIUS: f64 = 2.0;

/// A square pixel window plus the clip square centered on the query point.
///
/// The pixel box spans `patch_size` pixels with its origin normally at
/// `round(center) - patch_size/2`; [`PatchWindow::anchored`] lets callers
/// shift the box (border clamping) while the query point keeps its role as
/// center for connectivity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PatchWindow {
    center: Point,
    patch_size: u32,
    square_side: u32,
    origin: (i32, i32),
}

/// Default clip-square side for a patch: slightly smaller than the patch.
pub fn default_square_side(patch_size: u32) -> u32 {
    patch_size.saturating_sub(6).max(1)
}

impl PatchWindow {
    pub fn new(center: Point, patch_size: u32, square_side: u32) -> Result<Self> {
        let half = patch_size as i32 / 2;
        let origin = (
            center.x.round() as i32 - half,
            center.y.round() as i32 - half,
        );
        Self::anchored(center, patch_size, square_side, origin)
    }

    /// Window with an explicit pixel-box origin.
    pub fn anchored(
        center: Point,
        patch_size: u32,
        square_side: u32,
        origin: (i32, i32),
    ) -> Result<Self> {
        if patch_size < 2 {
            return Err(Error::InvalidWindow(format!(
                "patch size {patch_size} too small"
            )));
        }
        if square_side == 0 || square_side >= patch_size {
            return Err(Error::InvalidWindow(format!(
                "square side {square_side} must satisfy 0 < s < patch size {patch_size}"
            )));
        }
        if !center.x.is_finite() || !center.y.is_finite() {
            return Err(Error::InvalidWindow("non-finite center".into()));
        }
        Ok(PatchWindow {
            center,
            patch_size,
            square_side,
            origin,
        })
    }

    pub fn center(&self) -> Point {
        self.center
    }

    pub fn patch_size(&self) -> u32 {
        self.patch_size
    }

    pub fn square_side(&self) -> u32 {
        self.square_side
    }

    pub fn origin(&self) -> (i32, i32) {
        self.origin
    }

    /// Half side of the clip square; border points sit at exactly this
    /// Chebyshev distance from the center.
    pub fn half_side(&self) -> f64 {
        (self.square_side as f64 - 1.0) / 2.0
    }

    /// Does the pixel box lie fully inside an image of the given size?
    pub fn fits(&self, width: u32, height: u32) -> bool {
        let (ox, oy) = self.origin;
        ox >= 0
            && oy >= 0
            && ox as i64 + self.patch_size as i64 <= width as i64
            && oy as i64 + self.patch_size as i64 <= height as i64
    }

    pub fn require_fits(&self, width: u32, height: u32) -> Result<()> {
        if self.fits(width, height) {
            Ok(())
        } else {
            Err(Error::WindowOutOfBounds {
                cx: self.center.x,
                cy: self.center.y,
                patch_size: self.patch_size,
                width,
                height,
            })
        }
    }

    /// Image point -> window-local coordinates.
    pub fn local(&self, p: Point) -> Point {
        Point::new(p.x - self.origin.0 as f64, p.y - self.origin.1 as f64)
    }

    /// Window-local pixel -> image pixel.
    pub fn to_image_pixel(&self, local: (i32, i32)) -> (i32, i32) {
        (local.0 + self.origin.0, local.1 + self.origin.1)
    }
}

/// A maximal run of one edge's polyline inside the clip square.
#[derive(Debug, Clone)]
pub struct ClippedPiece {
    pub points: Vec<Point>,
    pub label: ClassLabel,
    pub edge_index: usize,
    /// Original vertex id when the run starts at the polyline's own start.
    pub start_vertex: Option<u64>,
    /// Original vertex id when the run ends at the polyline's own end.
    pub end_vertex: Option<u64>,
    /// Connected-component id within the clipped subgraph.
    pub component: usize,
}

/// An intersection of the network with the clip-square boundary.
#[derive(Debug, Clone, Copy)]
pub struct BorderPoint {
    /// Sub-pixel crossing position, image coordinates.
    pub pos: Point,
    /// Crossing rounded to the nearest boundary pixel (half away from zero).
    pub pixel: (i32, i32),
    pub label: ClassLabel,
    pub component: usize,
    /// Index of the piece the crossing belongs to.
    pub piece: usize,
}

/// Where the patch center snapped onto the clipped network.
#[derive(Debug, Clone, Copy)]
pub struct CenterLocation {
    pub piece: usize,
    pub component: usize,
    pub label: ClassLabel,
    /// Closest polyline point to the center.
    pub pos: Point,
}

/// Result of a patch-connectivity query.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PatchConnectivity {
    Connected,
    Disconnected,
    /// The patch center is not within [`SNAP_RADIUS`] of any clipped polyline.
    NoCenter,
}

/// The sub-network strictly inside one clip square.
#[derive(Debug, Clone)]
pub struct ClippedSubgraph {
    pub center: Point,
    pub half_side: f64,
    pub pieces: Vec<ClippedPiece>,
    pub border_points: Vec<BorderPoint>,
    /// Original vertex id -> pieces that meet there (inside the square).
    junctions: HashMap<u64, Vec<usize>>,
}

/// Intersect the graph with the window's clip square.
pub fn clip_to_window(graph: &NetworkGraph, window: &PatchWindow) -> Result<ClippedSubgraph> {
    window.require_fits(graph.width, graph.height)?;
    let c = window.center();
    let h = window.half_side();
    let min = Point::new(c.x - h, c.y - h);
    let max = Point::new(c.x + h, c.y + h);

    let mut pieces: Vec<ClippedPiece> = Vec::new();
    let mut raw_borders: Vec<(Point, usize)> = Vec::new(); // (pos, piece)

    let on_boundary = |p: Point| -> bool {
        let d = (p.x - c.x).abs().max((p.y - c.y).abs());
        d == h
    };

    for (edge_index, edge) in graph.edges.iter().enumerate() {
        let pts: Vec<Point> = edge.polyline().collect();
        let mut open: Option<(Vec<Point>, Option<u64>)> = None;
        let last_seg = pts.len() - 2;
        for i in 0..pts.len() - 1 {
            let a = pts[i];
            let b = pts[i + 1];
            let Some((t0, t1)) = clip_interval(a, b, min, max) else {
                if let Some((points, start_vertex)) = open.take() {
                    // previous run ended exactly on the boundary
                    let exit = *points.last().expect("open piece has points");
                    let idx = push_piece(&mut pieces, points, edge, edge_index, start_vertex, None);
                    raw_borders.push((exit, idx));
                }
                continue;
            };
            let entry = lerp(a, b, t0);
            let exit = lerp(a, b, t1);
            if t0 == t1 {
                // tangent touch; only meaningful when nothing is open
                if open.is_none() && t0 > 0.0 && t1 < 1.0 {
                    let idx = push_piece(
                        &mut pieces,
                        vec![entry],
                        edge,
                        edge_index,
                        None,
                        None,
                    );
                    raw_borders.push((entry, idx));
                } else if let Some((points, start_vertex)) = open.take() {
                    let end = *points.last().expect("open piece has points");
                    let idx = push_piece(&mut pieces, points, edge, edge_index, start_vertex, None);
                    raw_borders.push((end, idx));
                }
                continue;
            }
            if open.is_none() {
                let starts_at_polyline_start = i == 0 && t0 == 0.0;
                let start_vertex = starts_at_polyline_start.then_some(edge.u);
                if !starts_at_polyline_start || on_boundary(entry) {
                    // crossing into the square (or a tip resting on the boundary)
                    open = Some((vec![entry], start_vertex));
                    let piece_idx = pieces.len(); // will be this piece once closed
                    raw_borders.push((entry, piece_idx));
                } else {
                    open = Some((vec![entry], start_vertex));
                }
            }
            let (points, _) = open.as_mut().expect("just opened");
            if *points.last().unwrap() != exit {
                points.push(exit);
            }
            if t1 < 1.0 {
                let (points, start_vertex) = open.take().unwrap();
                let idx = push_piece(&mut pieces, points, edge, edge_index, start_vertex, None);
                raw_borders.push((exit, idx));
            } else if i == last_seg {
                let (points, start_vertex) = open.take().unwrap();
                let ends_on_boundary = on_boundary(exit);
                let idx = push_piece(
                    &mut pieces,
                    points,
                    edge,
                    edge_index,
                    start_vertex,
                    Some(edge.v),
                );
                if ends_on_boundary {
                    raw_borders.push((exit, idx));
                }
            }
        }
    }

    // Components: union pieces meeting at an original vertex inside the square.
    let mut junctions: HashMap<u64, Vec<usize>> = HashMap::new();
    for (i, p) in pieces.iter().enumerate() {
        for v in [p.start_vertex, p.end_vertex].into_iter().flatten() {
            junctions.entry(v).or_default().push(i);
        }
    }
    let mut dsu: Vec<usize> = (0..pieces.len()).collect();
    fn find(dsu: &mut Vec<usize>, mut i: usize) -> usize {
        while dsu[i] != i {
            dsu[i] = dsu[dsu[i]];
            i = dsu[i];
        }
        i
    }
    for members in junctions.values() {
        for w in members.windows(2) {
            let (a, b) = (find(&mut dsu, w[0]), find(&mut dsu, w[1]));
            if a != b {
                dsu[a.max(b)] = a.min(b);
            }
        }
    }
    let mut component_of_root: HashMap<usize, usize> = HashMap::new();
    for i in 0..pieces.len() {
        let root = find(&mut dsu, i);
        let next = component_of_root.len();
        let comp = *component_of_root.entry(root).or_insert(next);
        pieces[i].component = comp;
    }

    // the boundary intersection set: a junction sitting exactly on the
    // boundary is one point, not one per touching piece
    let mut seen: HashMap<(u64, u64, ClassLabel), ()> = HashMap::new();
    let border_points = raw_borders
        .into_iter()
        .filter_map(|(pos, piece)| {
            let label = pieces[piece].label;
            let key = (pos.x.to_bits(), pos.y.to_bits(), label);
            if seen.insert(key, ()).is_some() {
                return None;
            }
            Some(BorderPoint {
                pos,
                pixel: pos.round_pixel(),
                label,
                component: pieces[piece].component,
                piece,
            })
        })
        .collect();

    Ok(ClippedSubgraph {
        center: c,
        half_side: h,
        pieces,
        border_points,
        junctions,
    })
}

impl ClippedSubgraph {
    /// Snap the patch center to the nearest clipped polyline within
    /// [`SNAP_RADIUS`] px. Ties resolve to the lowest edge index, then the
    /// earliest arc-length position.
    pub fn locate_center(&self) -> Option<CenterLocation> {
        self.locate_center_for_class(None)
    }

    /// As [`locate_center`](Self::locate_center), considering only pieces of
    /// the given class when one is supplied.
    pub fn locate_center_for_class(&self, class: Option<ClassLabel>) -> Option<CenterLocation> {
        let mut best: Option<(f64, usize, Point)> = None;
        for (i, piece) in self.pieces.iter().enumerate() {
            if let Some(c) = class {
                if piece.label != c {
                    continue;
                }
            }
            if piece.points.len() == 1 {
                let d = self.center.dist_sq(piece.points[0]);
                if best.map_or(true, |(bd, _, _)| d < bd) {
                    best = Some((d, i, piece.points[0]));
                }
                continue;
            }
            for w in piece.points.windows(2) {
                let (d, t) = crate::geom::point_segment_dist_sq(self.center, w[0], w[1]);
                if best.map_or(true, |(bd, _, _)| d < bd) {
                    let q = lerp(w[0], w[1], t);
                    best = Some((d, i, q));
                }
            }
        }
        let (d, piece, pos) = best?;
        (d.sqrt() <= SNAP_RADIUS).then(|| CenterLocation {
            piece,
            component: self.pieces[piece].component,
            label: self.pieces[piece].label,
            pos,
        })
    }

    /// Is `bp` reachable from the patch center along clipped geometry?
    ///
    /// With `same_class`, every traversed piece must share the center piece's
    /// class. A center off the network yields
    /// [`PatchConnectivity::NoCenter`].
    pub fn connected_in_patch(&self, bp: &BorderPoint, same_class: bool) -> PatchConnectivity {
        let Some(loc) = self.locate_center() else {
            return PatchConnectivity::NoCenter;
        };
        self.connected_from(&loc, bp, same_class)
    }

    /// Connectivity from an already-located center.
    pub fn connected_from(
        &self,
        loc: &CenterLocation,
        bp: &BorderPoint,
        same_class: bool,
    ) -> PatchConnectivity {
        if !same_class {
            return if bp.component == loc.component {
                PatchConnectivity::Connected
            } else {
                PatchConnectivity::Disconnected
            };
        }
        if bp.label != loc.label {
            return PatchConnectivity::Disconnected;
        }
        // BFS over pieces of the center's class joined at shared vertices.
        let class = loc.label;
        let mut seen = vec![false; self.pieces.len()];
        let mut queue = std::collections::VecDeque::new();
        seen[loc.piece] = true;
        queue.push_back(loc.piece);
        while let Some(i) = queue.pop_front() {
            if i == bp.piece {
                return PatchConnectivity::Connected;
            }
            let piece = &self.pieces[i];
            for v in [piece.start_vertex, piece.end_vertex].into_iter().flatten() {
                for &j in self.junctions.get(&v).into_iter().flatten() {
                    if !seen[j] && self.pieces[j].label == class {
                        seen[j] = true;
                        queue.push_back(j);
                    }
                }
            }
        }
        PatchConnectivity::Disconnected
    }
}

fn push_piece(
    pieces: &mut Vec<ClippedPiece>,
    points: Vec<Point>,
    edge: &super::Edge,
    edge_index: usize,
    start_vertex: Option<u64>,
    end_vertex: Option<u64>,
) -> usize {
    pieces.push(ClippedPiece {
        points,
        label: edge.label,
        edge_index,
        start_vertex,
        end_vertex,
        component: usize::MAX,
    });
    pieces.len() - 1
}

fn lerp(a: Point, b: Point, t: f64) -> Point {
    if t == 0.0 {
        a
    } else if t == 1.0 {
        b
    } else {
        Point::new(a.x + t * (b.x - a.x), a.y + t * (b.y - a.y))
    }
}

/// Liang-Barsky interval of the segment inside the closed box, if any.
fn clip_interval(a: Point, b: Point, min: Point, max: Point) -> Option<(f64, f64)> {
    let mut t0 = 0.0_f64;
    let mut t1 = 1.0_f64;
    let dx = b.x - a.x;
    let dy = b.y - a.y;
    let checks = [
        (-dx, a.x - min.x),
        (dx, max.x - a.x),
        (-dy, a.y - min.y),
        (dy, max.y - a.y),
    ];
    for (p, q) in checks {
        if p == 0.0 {
            if q < 0.0 {
                return None;
            }
        } else {
            let r = q / p;
            if p < 0.0 {
                if r > t1 {
                    return None;
                }
                if r > t0 {
                    t0 = r;
                }
            } else {
                if r < t0 {
                    return None;
                }
                if r < t1 {
                    t1 = r;
                }
            }
        }
    }
    (t0 <= t1).then_some((t0, t1))
}
