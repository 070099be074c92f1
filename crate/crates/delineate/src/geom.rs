//! Small planar-geometry helpers shared across the crate.
//!
//! Coordinate convention: `x` rightward, `y` downward, origin at the center of
//! the top-left pixel. Pixel `(i, j)` therefore covers the point `(i as f64,
//! j as f64)`.

use serde::{Deserialize, Serialize};

/// A point in continuous image coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn dist(self, other: Point) -> f64 {
        self.dist_sq(other).sqrt()
    }

    pub fn dist_sq(self, other: Point) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        dx * dx + dy * dy
    }

    /// Nearest pixel, rounding half away from zero per axis.
    pub fn round_pixel(self) -> (i32, i32) {
        (round_half_away(self.x), round_half_away(self.y))
    }
}

impl From<(f64, f64)> for Point {
    fn from((x, y): (f64, f64)) -> Self {
        Point { x, y }
    }
}

/// Round half away from zero (`0.5 -> 1`, `-0.5 -> -1`).
pub fn round_half_away(v: f64) -> i32 {
    // f64::round already rounds half away from zero.
    v.round() as i32
}

/// Chebyshev distance between pixels.
pub fn chebyshev(a: (i32, i32), b: (i32, i32)) -> i32 {
    (a.0 - b.0).abs().max((a.1 - b.1).abs())
}

/// Squared Euclidean distance from `p` to the segment `a`-`b`, together with
/// the clamped parameter `t` of the closest point.
pub fn point_segment_dist_sq(p: Point, a: Point, b: Point) -> (f64, f64) {
    let abx = b.x - a.x;
    let aby = b.y - a.y;
    let len_sq = abx * abx + aby * aby;
    if len_sq == 0.0 {
        return (p.dist_sq(a), 0.0);
    }
    let t = (((p.x - a.x) * abx + (p.y - a.y) * aby) / len_sq).clamp(0.0, 1.0);
    let q = Point::new(a.x + t * abx, a.y + t * aby);
    (p.dist_sq(q), t)
}

/// Minimum distance between two segments.
pub fn segment_segment_dist(a0: Point, a1: Point, b0: Point, b1: Point) -> f64 {
    if segments_intersect(a0, a1, b0, b1) {
        return 0.0;
    }
    let d1 = point_segment_dist_sq(a0, b0, b1).0;
    let d2 = point_segment_dist_sq(a1, b0, b1).0;
    let d3 = point_segment_dist_sq(b0, a0, a1).0;
    let d4 = point_segment_dist_sq(b1, a0, a1).0;
    d1.min(d2).min(d3).min(d4).sqrt()
}

fn orient(a: Point, b: Point, c: Point) -> f64 {
    (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x)
}

/// Proper or touching intersection test for two closed segments.
pub fn segments_intersect(a0: Point, a1: Point, b0: Point, b1: Point) -> bool {
    let d1 = orient(b0, b1, a0);
    let d2 = orient(b0, b1, a1);
    let d3 = orient(a0, a1, b0);
    let d4 = orient(a0, a1, b1);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return true;
    }
    let on = |d: f64, s0: Point, s1: Point, p: Point| {
        d == 0.0
            && p.x >= s0.x.min(s1.x)
            && p.x <= s0.x.max(s1.x)
            && p.y >= s0.y.min(s1.y)
            && p.y <= s0.y.max(s1.y)
    };
    on(d1, b0, b1, a0) || on(d2, b0, b1, a1) || on(d3, a0, a1, b0) || on(d4, a0, a1, b1)
}

/// 8-connected digital line between integer endpoints.
///
/// Steps along the major axis one pixel at a time; the minor coordinate is the
/// ideal line coordinate rounded half away from zero, computed in exact
/// integer arithmetic. Includes both endpoints.
pub fn digital_line(a: (i32, i32), b: (i32, i32)) -> Vec<(i32, i32)> {
    let (x0, y0) = (a.0 as i64, a.1 as i64);
    let (x1, y1) = (b.0 as i64, b.1 as i64);
    let dx = x1 - x0;
    let dy = y1 - y0;
    let steps = dx.abs().max(dy.abs());
    if steps == 0 {
        return vec![a];
    }
    // round_half_away(c0 + i * d / steps) == sign(num) * floor((2|num| + steps) / (2 steps))
    // with num = c0 * steps + i * d
    let coord = |c0: i64, d: i64, i: i64| -> i64 {
        let num = c0 * steps + i * d;
        let q = (2 * num.abs() + steps) / (2 * steps);
        if num < 0 {
            -q
        } else {
            q
        }
    };
    (0..=steps)
        .map(|i| (coord(x0, dx, i) as i32, coord(y0, dy, i) as i32))
        .collect()
}
