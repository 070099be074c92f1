//! Topology-preserving morphological thinning.
//!
//! Four directional subiterations (north, south, east, west border points)
//! collect deletion candidates in parallel; candidates are then re-checked
//! sequentially against the current raster before removal, which keeps every
//! deletion a *simple point* deletion: 8-connected foreground components and
//! 4-connected background components (holes) are preserved exactly. Endpoints
//! (single-neighbor pixels) are never removed, so line ends survive.

use std::sync::OnceLock;

use crate::netgraph::SkeletonRaster;

/// Ring offsets, clockwise from north.
const RING: [(i32, i32); 8] = [
    (0, -1),
    (1, -1),
    (1, 0),
    (1, 1),
    (0, 1),
    (-1, 1),
    (-1, 0),
    (-1, -1),
];

/// Thin a binary raster to an 8-connected unit-width skeleton.
///
/// Idempotent: thinning a fixpoint (any already 1-px-wide curve) returns it
/// unchanged.
pub fn skeletonize(input: &SkeletonRaster) -> SkeletonRaster {
    let table = simple_point_table();
    let mut r = input.clone();
    let w = r.width as i32;
    let h = r.height as i32;
    // border directions: north, south, east, west ring indices
    let dirs = [RING[0], RING[4], RING[2], RING[6]];
    let mut candidates: Vec<(i32, i32)> = Vec::new();
    loop {
        let mut changed = false;
        for dir in dirs {
            candidates.clear();
            for y in 0..h {
                for x in 0..w {
                    if !r.get(x, y) || r.get(x + dir.0, y + dir.1) {
                        continue;
                    }
                    let mask = neighborhood(&r, x, y);
                    if deletable(mask, table) {
                        candidates.push((x, y));
                    }
                }
            }
            for &(x, y) in &candidates {
                // re-check against the partially updated raster
                let mask = neighborhood(&r, x, y);
                if deletable(mask, table) {
                    r.set(x, y, false);
                    changed = true;
                }
            }
        }
        if !changed {
            return r;
        }
    }
}

#[inline]
fn deletable(mask: u8, table: &[bool; 256]) -> bool {
    // endpoints (one neighbor) and isolated pixels stay
    mask.count_ones() >= 2 && table[mask as usize]
}

#[inline]
fn neighborhood(r: &SkeletonRaster, x: i32, y: i32) -> u8 {
    let mut mask = 0u8;
    for (i, (dx, dy)) in RING.iter().enumerate() {
        if r.get(x + dx, y + dy) {
            mask |= 1 << i;
        }
    }
    mask
}

/// Lookup of 3x3 neighborhoods whose center is a simple point: removing it
/// changes neither the count of 8-connected foreground components nor the
/// count of 4-connected background components touching the center.
fn simple_point_table() -> &'static [bool; 256] {
    static TABLE: OnceLock<[bool; 256]> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut table = [false; 256];
        for (mask, entry) in table.iter_mut().enumerate() {
            *entry = is_simple(mask as u8);
        }
        table
    })
}

fn is_simple(mask: u8) -> bool {
    // foreground ring cells, 8-adjacency between cells
    let fg: Vec<usize> = (0..8).filter(|&i| mask & (1 << i) != 0).collect();
    if fg.is_empty() {
        return false;
    }
    let adj8 = |a: usize, b: usize| {
        let (ax, ay) = RING[a];
        let (bx, by) = RING[b];
        (ax - bx).abs() <= 1 && (ay - by).abs() <= 1
    };
    if ring_components(&fg, adj8) != 1 {
        return false;
    }
    // background ring cells, 4-adjacency, counting only components that
    // contain an axial neighbor (indices 0, 2, 4, 6)
    let bg: Vec<usize> = (0..8).filter(|&i| mask & (1 << i) == 0).collect();
    let adj4 = |a: usize, b: usize| {
        let (ax, ay) = RING[a];
        let (bx, by) = RING[b];
        (ax - bx).abs() + (ay - by).abs() == 1
    };
    let mut comp = vec![usize::MAX; 8];
    let mut n_axial_components = 0;
    let mut next = 0;
    for &start in &bg {
        if comp[start] != usize::MAX {
            continue;
        }
        let id = next;
        next += 1;
        let mut stack = vec![start];
        comp[start] = id;
        let mut has_axial = false;
        while let Some(i) = stack.pop() {
            if i % 2 == 0 {
                has_axial = true;
            }
            for &j in &bg {
                if comp[j] == usize::MAX && adj4(i, j) {
                    comp[j] = id;
                    stack.push(j);
                }
            }
        }
        if has_axial {
            n_axial_components += 1;
        }
    }
    n_axial_components == 1
}

fn ring_components(cells: &[usize], adjacent: impl Fn(usize, usize) -> bool) -> usize {
    let mut comp = vec![usize::MAX; 8];
    let mut count = 0;
    for &start in cells {
        if comp[start] != usize::MAX {
            continue;
        }
        count += 1;
        let mut stack = vec![start];
        comp[start] = count;
        while let Some(i) = stack.pop() {
            for &j in cells {
                if comp[j] == usize::MAX && adjacent(i, j) {
                    comp[j] = count;
                    stack.push(j);
                }
            }
        }
    }
    count
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::label_components;

    fn raster_from(points: &[(i32, i32)], w: u32, h: u32) -> SkeletonRaster {
        let mut r = SkeletonRaster::new(w, h);
        for &(x, y) in points {
            r.set(x, y, true);
        }
        r
    }

    #[test]
    fn simple_point_table_known_cases() {
        let bit = |offsets: &[(i32, i32)]| -> u8 {
            let mut m = 0u8;
            for o in offsets {
                let i = RING.iter().position(|r| r == o).unwrap();
                m |= 1 << i;
            }
            m
        };
        // middle of a horizontal line: E + W -> two fg components, not simple
        assert!(!is_simple(bit(&[(1, 0), (-1, 0)])));
        // line end (single neighbor) is simple by the table but protected by
        // the endpoint rule
        assert!(is_simple(bit(&[(1, 0)])));
        // full ring: removing the center would open a hole
        assert!(!is_simple(0xFF));
        // corner of an L: W + S joined through SW diagonal position
        assert!(is_simple(bit(&[(-1, 0), (0, 1)])));
        // isolated pixel: no neighbors
        assert!(!is_simple(0));
    }

    #[test]
    fn thin_line_is_unchanged() {
        let line: Vec<(i32, i32)> = (2..=20).map(|x| (x, 5)).collect();
        let r = raster_from(&line, 32, 16);
        assert_eq!(skeletonize(&r), r);
        let diag: Vec<(i32, i32)> = (2..=12).map(|i| (i, i)).collect();
        let r = raster_from(&diag, 16, 16);
        assert_eq!(skeletonize(&r), r);
    }

    #[test]
    fn bar_thins_to_middle_row() {
        // filled 3x11 bar with rows y = 4,5,6
        let mut px = Vec::new();
        for y in 4..=6 {
            for x in 3..=13 {
                px.push((x, y));
            }
        }
        let r = raster_from(&px, 20, 12);
        let s = skeletonize(&r);
        assert!(s.iter_set().all(|(_, y)| y == 5), "pixels off middle row");
        let xs: Vec<i32> = s.iter_set().map(|(x, _)| x).collect();
        assert!(*xs.iter().min().unwrap() <= 4);
        assert!(*xs.iter().max().unwrap() >= 12);
        assert_eq!(label_components(&s).count, 1);
        // idempotent
        assert_eq!(skeletonize(&s), s);
    }

    #[test]
    fn disk_thins_to_single_component() {
        let mut px = Vec::new();
        for y in 0..32 {
            for x in 0..32 {
                let (dx, dy) = (x as f64 - 16.0, y as f64 - 16.0);
                if dx * dx + dy * dy <= 64.0 {
                    px.push((x, y));
                }
            }
        }
        let r = raster_from(&px, 32, 32);
        let s = skeletonize(&r);
        assert!(!s.is_empty());
        assert_eq!(label_components(&s).count, 1);
        assert_eq!(skeletonize(&s), s);
        // unit width: no 2x2 block fully set
        for y in 0..31 {
            for x in 0..31 {
                assert!(
                    !(s.get(x, y) && s.get(x + 1, y) && s.get(x, y + 1) && s.get(x + 1, y + 1)),
                    "2x2 block at ({x},{y})"
                );
            }
        }
    }

    /// 4-connected background components; 2 for any shape with one hole.
    fn background_components(r: &SkeletonRaster) -> usize {
        let w = r.width as i32;
        let h = r.height as i32;
        let mut seen = vec![false; (w * h) as usize];
        let mut count = 0;
        for sy in 0..h {
            for sx in 0..w {
                if r.get(sx, sy) || seen[(sy * w + sx) as usize] {
                    continue;
                }
                count += 1;
                let mut stack = vec![(sx, sy)];
                seen[(sy * w + sx) as usize] = true;
                while let Some((x, y)) = stack.pop() {
                    for (dx, dy) in [(1, 0), (-1, 0), (0, 1), (0, -1)] {
                        let (nx, ny) = (x + dx, y + dy);
                        if nx < 0 || ny < 0 || nx >= w || ny >= h {
                            continue;
                        }
                        let i = (ny * w + nx) as usize;
                        if !r.get(nx, ny) && !seen[i] {
                            seen[i] = true;
                            stack.push((nx, ny));
                        }
                    }
                }
            }
        }
        count
    }

    #[test]
    fn annulus_keeps_its_hole() {
        let mut px = Vec::new();
        for y in 0..40 {
            for x in 0..40 {
                let (dx, dy) = (x as f64 - 20.0, y as f64 - 20.0);
                let d2 = dx * dx + dy * dy;
                if d2 <= 144.0 && d2 >= 36.0 {
                    px.push((x, y));
                }
            }
        }
        let r = raster_from(&px, 40, 40);
        assert_eq!(background_components(&r), 2);
        let s = skeletonize(&r);
        assert_eq!(label_components(&s).count, 1);
        assert_eq!(background_components(&s), 2, "hole lost");
        assert_eq!(skeletonize(&s), s);
    }

    #[test]
    fn thinning_never_increases_component_count() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        for _ in 0..30 {
            let mut r = SkeletonRaster::new(48, 48);
            for _ in 0..rng.gen_range(1..6) {
                let cx: i32 = rng.gen_range(5..43);
                let cy: i32 = rng.gen_range(5..43);
                let rad: i32 = rng.gen_range(2..6);
                for y in cy - rad..=cy + rad {
                    for x in cx - rad..=cx + rad {
                        if (x - cx).pow(2) + (y - cy).pow(2) <= rad * rad {
                            r.set(x, y, true);
                        }
                    }
                }
            }
            let before = label_components(&r).count;
            let s = skeletonize(&r);
            let after = label_components(&s).count;
            assert_eq!(before, after, "components changed");
            assert_eq!(skeletonize(&s), s);
        }
    }
}
